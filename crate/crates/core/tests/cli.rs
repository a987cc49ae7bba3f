use dyntok::io::manifest::{self, manifest_path};
use dyntok::io::report::{self, ReportBody};
use dyntok::io::tokens;

mod common;
use common::pipeline::{dyntok, pipeline, s};

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = pipeline(a.path());
    let second = pipeline(b.path());
    for (x, y) in first.iter().zip(&second) {
        let mx = manifest::load(&manifest_path(x)).unwrap();
        let my = manifest::load(&manifest_path(y)).unwrap();
        assert!(!mx.outputs.is_empty());
        let digests = |m: &manifest::RunManifest| m.outputs.iter().map(|d| (d.bytes, d.sha256.clone())).collect::<Vec<_>>();
        assert_eq!(digests(&mx), digests(&my), "{}", x.display());
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
    let m = manifest::load(&manifest_path(&first[5])).unwrap();
    assert_eq!(m.command, "train");
    assert_eq!(m.seeds["seed"], 3);
    assert!(m.deterministic);
}

#[test]
fn wasserstein_of_a_file_with_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let p = |f: &str| s(&dir.path().join(f));
    assert_eq!(
        dyntok(&[
            "simulate",
            "--preset",
            "henon-desk",
            "--count",
            "2",
            "--length",
            "500",
            "--out",
            &p("t.traj")
        ]),
        0
    );
    assert_eq!(
        dyntok(&["fit-grid", "--data", &p("t.traj"), "--n", "20", "--out", &p("g.json")]),
        0
    );
    assert_eq!(
        dyntok(&["encode", "--data", &p("t.traj"), "--grid", &p("g.json"), "--out", &p("t.tok")]),
        0
    );
    assert_eq!(
        dyntok(&[
            "eval",
            "wasserstein",
            "--grid",
            &p("g.json"),
            "--model",
            &p("t.tok"),
            "--truth",
            &p("t.traj"),
            "--out",
            &p("w.json")
        ]),
        0
    );
    let ReportBody::Wasserstein { rows } = report::load(&dir.path().join("w.json")).unwrap() else {
        panic!("wrong report kind");
    };
    assert_eq!(rows[0].w_model_true, 0.0);
    assert_eq!(rows[0].w_true_true, None);
    let csv = std::fs::read_to_string(dir.path().join("w.csv")).unwrap();
    assert!(csv.starts_with("grid_size,w_model_true,w_true_true\n20,0,"));
}

#[test]
fn greedy_generation_ignores_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let work = dir.path();
    pipeline(work);
    let p = |f: &str| s(&work.join(f));
    for seed in ["1", "2"] {
        let out = p(&format!("greedy{seed}.tok"));
        let args = [
            "generate",
            "--checkpoint",
            &p("model/final.ckpt"),
            "--grid",
            &p("grid.json"),
            "--prefix-from",
            &p("test.tok"),
            "--k",
            "10",
            "--new-tokens",
            "40",
            "--seed",
            seed,
            "--out",
            &out,
        ];
        assert_eq!(dyntok(&args), 0);
    }
    let a = tokens::load(&work.join("greedy1.tok")).unwrap();
    assert_eq!(a, tokens::load(&work.join("greedy2.tok")).unwrap());
    assert!(a.sequences.iter().all(|s| s.len() == 50));
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let p = |f: &str| s(&dir.path().join(f));
    assert_eq!(dyntok(&["--help"]), 0);
    assert_eq!(dyntok(&["frobnicate"]), 1);
    assert_eq!(dyntok(&["simulate", "--preset", "henon-desk", "--bogus"]), 1);
    assert_eq!(dyntok(&["simulate", "--preset", "no-such-system", "--out", &p("x.traj")]), 1);
    assert_eq!(dyntok(&["inspect", &p("missing.traj")]), 2);
    std::fs::write(dir.path().join("junk.traj"), b"NOTMAGIC\0\0\0\0").unwrap();
    assert_eq!(
        dyntok(&["fit-grid", "--data", &p("junk.traj"), "--n", "4", "--out", &p("g.json")]),
        2
    );
    // an RK4 step this large blows up within a few steps
    let code = dyntok(&[
        "simulate",
        "--preset",
        "lorenz-desk",
        "--count",
        "1",
        "--length",
        "200",
        "--tau",
        "5",
        "--substeps",
        "1",
        "--out",
        &p("l.traj"),
    ]);
    assert_eq!(code, 3);
    assert!(!dir.path().join("l.traj").exists());
}

#[test]
fn inspect_reads_every_kind() {
    let dir = tempfile::tempdir().unwrap();
    let files = pipeline(dir.path());
    for f in &files {
        let text = dyntok::cli::describe(f).unwrap();
        assert!(!text.is_empty());
        dyntok::cli::describe(&manifest_path(f)).unwrap();
    }
    let ck = dyntok::cli::describe(&dir.path().join("model/final.ckpt")).unwrap();
    assert!(ck.contains("step: 4"), "{ck}");
}

#[test]
fn protocol_prints_and_executes() {
    let dir = tempfile::tempdir().unwrap();
    let w = s(dir.path());
    assert_eq!(dyntok(&["protocol", "rossler-diffcurve", "--workdir", &w]), 0);
    assert_eq!(dyntok(&["protocol", "table2"]), 1);
    let code = dyntok(&[
        "protocol",
        "henon-table1",
        "--desk-scale",
        "--execute",
        "--workdir",
        &w,
        "--train-steps",
        "1",
        "--new-tokens",
        "10",
    ]);
    assert_eq!(code, 0);
    let out = dir.path().join("henon-table1/n20/wasserstein.json");
    let ReportBody::Wasserstein { rows } = report::load(&out).unwrap() else {
        panic!("wrong report kind");
    };
    assert_eq!(rows[0].grid_size, 20);
    assert!(rows[0].w_true_true.unwrap() > 0.0);
}
