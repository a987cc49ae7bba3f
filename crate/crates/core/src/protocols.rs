//! Named experiments as plain command sequences.
//!
//! A [`Plan`] is the list of files to write (training configs) and the
//! `dyntok` invocations to run, in order. `dyntok protocol NAME` prints it
//! as a shell script; `--execute` runs it in-process.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::cli::{ModelSection, TrainConfig, TRAIN_CONFIG_VERSION};
use crate::dynamics::Preset;
use crate::error::{Error, Result};
use crate::training::{AdamWConfig, TrainSettings};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    LorenzTable1,
    RosslerTable1,
    HenonTable1,
    HenonLyapunov,
    LorenzDivergence,
    RosslerDivergence,
    RosslerDiffcurve,
}

impl Protocol {
    pub const ALL: [Protocol; 7] = [
        Protocol::LorenzTable1,
        Protocol::RosslerTable1,
        Protocol::HenonTable1,
        Protocol::HenonLyapunov,
        Protocol::LorenzDivergence,
        Protocol::RosslerDivergence,
        Protocol::RosslerDiffcurve,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::LorenzTable1 => "lorenz-table1",
            Protocol::RosslerTable1 => "rossler-table1",
            Protocol::HenonTable1 => "henon-table1",
            Protocol::HenonLyapunov => "henon-lyapunov",
            Protocol::LorenzDivergence => "lorenz-divergence",
            Protocol::RosslerDivergence => "rossler-divergence",
            Protocol::RosslerDiffcurve => "rossler-diffcurve",
        }
    }

    fn system(self) -> &'static str {
        match self {
            Protocol::LorenzTable1 | Protocol::LorenzDivergence => "lorenz",
            Protocol::RosslerTable1 | Protocol::RosslerDivergence | Protocol::RosslerDiffcurve => "rossler",
            Protocol::HenonTable1 | Protocol::HenonLyapunov => "henon",
        }
    }

    /// Grid sizes swept. Desk runs use coarser grids so the small model
    /// sees each token often enough.
    fn grid_sizes(self, desk: bool) -> Vec<usize> {
        match (self, desk) {
            (Protocol::LorenzTable1, false) => vec![20, 35, 50],
            (Protocol::LorenzTable1, true) => vec![10, 15, 20],
            (Protocol::HenonTable1 | Protocol::HenonLyapunov, false) => vec![50],
            (_, false) => vec![50],
            (_, true) => vec![20],
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|p| p.name()).collect();
            Error::Usage(format!("unknown protocol {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlanOptions {
    pub desk: bool,
    pub seed: u64,
    pub train_steps: Option<usize>,
    pub new_tokens: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Plan {
    pub files: Vec<(PathBuf, String)>,
    pub commands: Vec<Vec<String>>,
}

impl Plan {
    /// POSIX shell script writing the files and running the commands.
    pub fn to_script(&self) -> String {
        let mut out = String::from("#!/bin/sh\nset -e\n");
        for (path, content) in &self.files {
            let p = quote(&path.display().to_string());
            out.push_str(&format!("mkdir -p \"$(dirname {p})\"\ncat > {p} <<'EOF'\n{content}EOF\n"));
        }
        for cmd in &self.commands {
            let words: Vec<String> = cmd.iter().map(|w| quote(w)).collect();
            out.push_str(&words.join(" "));
            out.push('\n');
        }
        out
    }
}

fn quote(w: &str) -> String {
    if !w.is_empty() && w.chars().all(|c| c.is_ascii_alphanumeric() || "-_./=:".contains(c)) {
        w.to_string()
    } else {
        format!("'{}'", w.replace('\'', r"'\''"))
    }
}

struct Builder<'a> {
    dir: &'a Path,
    opts: &'a PlanOptions,
    plan: Plan,
}

impl Builder<'_> {
    fn path(&self, name: &str) -> String {
        self.dir.join(name).display().to_string()
    }

    fn run(&mut self, args: &[&str]) {
        let mut cmd = vec!["dyntok".to_string()];
        cmd.extend(args.iter().map(|s| s.to_string()));
        self.plan.commands.push(cmd);
    }

    fn preset(&self, system: &str) -> String {
        if self.opts.desk {
            format!("{system}-desk")
        } else {
            system.to_string()
        }
    }

    /// Train, test and an independent second true batch.
    fn simulate(&mut self, system: &str) {
        let preset = self.preset(system);
        let seed = self.opts.seed.to_string();
        let second = (self.opts.seed + 1).to_string();
        for (split, file, seed) in [
            ("train", "train.traj", &seed),
            ("test", "test.traj", &seed),
            ("test", "true2.traj", &second),
        ] {
            let out = self.path(file);
            self.run(&[
                "simulate", "--preset", &preset, "--split", split, "--seed", seed, "--out", &out,
            ]);
        }
    }

    /// Grid, tokens and a trained model for grid size `n`; returns the
    /// run directory.
    fn model(&mut self, n: usize) -> PathBuf {
        let run = self.dir.join(format!("n{n}"));
        let p = |f: &str| run.join(f).display().to_string();
        let (train, test, true2) = (self.path("train.traj"), self.path("test.traj"), self.path("true2.traj"));
        self.run(&[
            "fit-grid",
            "--data",
            &train,
            &test,
            "--n",
            &n.to_string(),
            "--out",
            &p("grid.json"),
        ]);
        for (src, dst) in [(&train, "train.tok"), (&test, "test.tok"), (&true2, "true2.tok")] {
            self.run(&["encode", "--data", src, "--grid", &p("grid.json"), "--out", &p(dst)]);
        }
        let desk = self.opts.desk;
        let mut training = TrainSettings {
            steps: if desk { 2000 } else { 200_000 },
            batch_size: if desk { 1 } else { 8 },
            seed: self.opts.seed,
            init_seed: self.opts.seed,
            ..TrainSettings::default()
        };
        if let Some(s) = self.opts.train_steps {
            training.steps = s;
        }
        let config = TrainConfig {
            version: TRAIN_CONFIG_VERSION,
            train_tokens: "train.tok".into(),
            eval_tokens: Some("test.tok".into()),
            grid: Some("grid.json".into()),
            out_dir: "model".into(),
            deterministic: true,
            model: ModelSection {
                scale: Some(if desk { "desk" } else { "full" }.into()),
                ..ModelSection::default()
            },
            optimizer: AdamWConfig {
                lr: if desk { 1e-3 } else { 5e-5 },
                ..AdamWConfig::default()
            },
            training,
        };
        self.plan.files.push((run.join("train.toml"), config.to_toml()));
        self.run(&["train", "--config", &p("train.toml")]);
        run
    }

    /// Greedy continuations of the first `count` test sequences.
    fn generate(&mut self, run: &Path, new_tokens: usize, count: Option<usize>, out: &str) {
        let p = |f: &str| run.join(f).display().to_string();
        let new_tokens = self.opts.new_tokens.unwrap_or(new_tokens).to_string();
        let mut args = vec![
            "generate".to_string(),
            "--checkpoint".into(),
            p("model/final.ckpt"),
            "--grid".into(),
            p("grid.json"),
            "--prefix-from".into(),
            p("test.tok"),
            "--k".into(),
            "100".into(),
            "--new-tokens".into(),
            new_tokens,
            "--seed".into(),
            self.opts.seed.to_string(),
            "--out".into(),
            p(out),
        ];
        if let Some(c) = count {
            args.extend(["--count".into(), c.to_string()]);
        }
        if self.opts.desk {
            args.extend(["--context".into(), "refill".into()]);
        }
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        self.run(&refs);
    }

    fn test_length(&self, system: &str) -> usize {
        Preset::by_name(&self.preset(system)).map(|p| p.steps + 1).unwrap_or(1000)
    }
}

pub fn plan(protocol: Protocol, workdir: &Path, opts: &PlanOptions) -> Plan {
    let dir = workdir.join(protocol.name());
    let mut b = Builder {
        dir: &dir,
        opts,
        plan: Plan::default(),
    };
    let system = protocol.system();
    b.simulate(system);
    let len = b.test_length(system);
    match protocol {
        Protocol::LorenzTable1 | Protocol::RosslerTable1 | Protocol::HenonTable1 => {
            for n in protocol.grid_sizes(opts.desk) {
                let run = b.model(n);
                b.generate(&run, len - 100, None, "generated.tok");
                let p = |f: &str| run.join(f).display().to_string();
                b.run(&[
                    "eval",
                    "wasserstein",
                    "--grid",
                    &p("grid.json"),
                    "--model",
                    &p("generated.tok"),
                    "--truth",
                    &p("test.tok"),
                    "--baseline",
                    &p("true2.tok"),
                    "--skip",
                    "100",
                    "--out",
                    &p("wasserstein.json"),
                ]);
            }
        }
        Protocol::HenonLyapunov => {
            let run = b.model(protocol.grid_sizes(opts.desk)[0]);
            b.generate(&run, 10_000, Some(10), "generated.tok");
            let p = |f: &str| run.join(f).display().to_string();
            for (tokens, out) in [("generated.tok", "lyapunov-model.json"), ("test.tok", "lyapunov-true.json")] {
                b.run(&[
                    "eval",
                    "lyapunov",
                    "--grid",
                    &p("grid.json"),
                    "--tokens",
                    &p(tokens),
                    "--system",
                    "henon",
                    "--n-max",
                    "15",
                    "--fit-min",
                    "1",
                    "--fit-max",
                    "15",
                    "--skip",
                    "100",
                    "--out",
                    &p(out),
                ]);
            }
        }
        Protocol::LorenzDivergence | Protocol::RosslerDivergence => {
            let n = protocol.grid_sizes(opts.desk)[0];
            let run = b.model(n);
            let count = 3;
            let horizon = if opts.desk { len.min(1100) } else { len.min(2000) };
            b.generate(&run, horizon - 100, Some(count), "generated.tok");
            let test = b.path("test.traj");
            let p = |f: &str| run.join(f).display().to_string();
            for i in 0..count {
                b.run(&[
                    "eval",
                    "divergence",
                    "--reference",
                    &test,
                    "--generated",
                    &p("generated.tok"),
                    "--grid",
                    &p("grid.json"),
                    "--index",
                    &i.to_string(),
                    "--k",
                    "100",
                    "--seed",
                    &opts.seed.to_string(),
                    "--out",
                    &p(&format!("divergence-{i}.json")),
                ]);
            }
        }
        Protocol::RosslerDiffcurve => {
            let n = protocol.grid_sizes(opts.desk)[0];
            let run = b.model(n);
            let test = b.path("test.traj");
            let p = |f: &str| run.join(f).display().to_string();
            // desk test data holds fewer 1000-state pieces than the full run
            let count = if opts.desk { "20" } else { "300" };
            let (ckpt, grid) = (p("model/final.ckpt"), p("grid.json"));
            let mut args = vec![
                "eval",
                "diffcurve",
                "--checkpoint",
                &ckpt,
                "--grid",
                &grid,
                "--test",
                &test,
                "--segment-length",
                "1000",
                "--k",
                "100",
                "--count",
                count,
            ];
            let seed = opts.seed.to_string();
            let out = p("diffcurve.json");
            args.extend(["--seed", &seed, "--out", &out]);
            if opts.desk {
                args.extend(["--context", "refill"]);
            }
            b.run(&args);
        }
    }
    b.plan
}
