//! A small run of every command, for rerun and inspection checks.

use std::path::{Path, PathBuf};

use dyntok::cli::run;

pub fn dyntok(args: &[&str]) -> i32 {
    run(std::iter::once("dyntok").chain(args.iter().copied()))
}

pub fn s(p: &Path) -> String {
    p.display().to_string()
}

pub const TINY_CONFIG: &str = r#"
version = 1
train_tokens = "train.tok"
eval_tokens = "test.tok"
grid = "grid.json"
out_dir = "model"

[model]
context = 16
dim = 16
layers = 1
heads = 2
dropout = 0.1

[optimizer]
lr = 0.001

[training]
steps = 4
batch_size = 2
seed = 3
init_seed = 5
eval_windows = 4
"#;

/// Every command once on a small Henon dataset; returns the primary
/// outputs in order.
pub fn pipeline(dir: &Path) -> Vec<PathBuf> {
    let p = |f: &str| dir.join(f);
    let mut outs = Vec::new();
    let mut step = |args: Vec<String>, out: PathBuf| {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(dyntok(&refs), 0, "{args:?}");
        outs.push(out);
    };
    for (split, file) in [("train", "train.traj"), ("test", "test.traj")] {
        step(
            vec![
                "--deterministic".into(),
                "simulate".into(),
                "--preset".into(),
                "henon-desk".into(),
                "--split".into(),
                split.into(),
                "--count".into(),
                "3".into(),
                "--length".into(),
                "400".into(),
                "--seed".into(),
                "9".into(),
                "--out".into(),
                s(&p(file)),
            ],
            p(file),
        );
    }
    step(
        vec![
            "fit-grid".into(),
            "--data".into(),
            s(&p("train.traj")),
            s(&p("test.traj")),
            "--n".into(),
            "8".into(),
            "--out".into(),
            s(&p("grid.json")),
        ],
        p("grid.json"),
    );
    for (src, dst) in [("train.traj", "train.tok"), ("test.traj", "test.tok")] {
        step(
            vec![
                "encode".into(),
                "--data".into(),
                s(&p(src)),
                "--grid".into(),
                s(&p("grid.json")),
                "--out".into(),
                s(&p(dst)),
            ],
            p(dst),
        );
    }
    std::fs::write(p("train.toml"), TINY_CONFIG).unwrap();
    step(
        vec![
            "--deterministic".into(),
            "train".into(),
            "--config".into(),
            s(&p("train.toml")),
        ],
        p("model/final.ckpt"),
    );
    step(
        vec![
            "generate".into(),
            "--checkpoint".into(),
            s(&p("model/final.ckpt")),
            "--grid".into(),
            s(&p("grid.json")),
            "--prefix-from".into(),
            s(&p("test.traj")),
            "--k".into(),
            "10".into(),
            "--new-tokens".into(),
            "30".into(),
            "--temperature".into(),
            "0.8".into(),
            "--seed".into(),
            "4".into(),
            "--out".into(),
            s(&p("gen.tok")),
            "--decoded".into(),
            s(&p("gen.traj")),
        ],
        p("gen.tok"),
    );
    step(
        vec![
            "eval".into(),
            "wasserstein".into(),
            "--grid".into(),
            s(&p("grid.json")),
            "--model".into(),
            s(&p("gen.tok")),
            "--truth".into(),
            s(&p("test.tok")),
            "--baseline".into(),
            s(&p("train.tok")),
            "--out".into(),
            s(&p("w.json")),
        ],
        p("w.json"),
    );
    step(
        vec![
            "eval".into(),
            "lyapunov".into(),
            "--grid".into(),
            s(&p("grid.json")),
            "--tokens".into(),
            s(&p("test.tok")),
            "--n-max".into(),
            "6".into(),
            "--fit-max".into(),
            "6".into(),
            "--out".into(),
            s(&p("lyap.json")),
        ],
        p("lyap.json"),
    );
    step(
        vec![
            "eval".into(),
            "divergence".into(),
            "--reference".into(),
            s(&p("test.traj")),
            "--generated".into(),
            s(&p("test.tok")),
            "--grid".into(),
            s(&p("grid.json")),
            "--k".into(),
            "5".into(),
            "--samples".into(),
            "50".into(),
            "--horizon".into(),
            "60".into(),
            "--seed".into(),
            "2".into(),
            "--out".into(),
            s(&p("div.json")),
        ],
        p("div.json"),
    );
    step(
        vec![
            "eval".into(),
            "diffcurve".into(),
            "--checkpoint".into(),
            s(&p("model/final.ckpt")),
            "--grid".into(),
            s(&p("grid.json")),
            "--test".into(),
            s(&p("test.traj")),
            "--segment-length".into(),
            "100".into(),
            "--k".into(),
            "5".into(),
            "--count".into(),
            "4".into(),
            "--samples".into(),
            "50".into(),
            "--out".into(),
            s(&p("curve.json")),
        ],
        p("curve.json"),
    );
    outs
}
