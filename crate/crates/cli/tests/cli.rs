use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mpsinit::mps::{Mpo, Mps};
use mpsinit::problems::load_pauli_hamiltonian;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mpsinit"))
}

fn h2() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/h2_sto3g_0.7414.txt")
}

fn exec(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(o: &Output, key: &str) -> f64 {
    let text = stdout(o);
    let line = text
        .lines()
        .find(|l| l.starts_with(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in {text}"));
    line.split(" = ").nth(1).unwrap().trim().parse().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn pretrain_without_flags_prints_usage() {
    let o = exec(&["pretrain"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_an_error() {
    let o = exec(&["exact", "--hamiltonian", p(&h2()), "--frobnicate", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exact_prints_the_recorded_minimum() {
    let o = exec(&["exact", "--hamiltonian", p(&h2())]);
    assert!(o.status.success());
    let e: f64 = stdout(&o).trim().parse().unwrap();
    assert!((e - -1.1372701746609024).abs() < 1e-10, "{e}");
}

#[test]
fn pretrain_output_reloads_to_the_printed_energy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    let o = exec(&["pretrain", "--hamiltonian", p(&h2()), "--method", "dmrg", "--chi", "2", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let printed = value(&o, "objective");
    let mps = Mps::load(&out).unwrap();
    let mpo = Mpo::from_pauli_sum(&load_pauli_hamiltonian(h2()).unwrap()).unwrap();
    assert!((mps.expectation(&mpo).unwrap() - printed).abs() < 1e-10);
}

#[test]
fn maxcut_tebd_pretrain_with_paper_budget() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.edges");
    std::fs::write(&graph, "0 1 1.0\n1 2 0.5\n2 3 1.0\n3 0 0.25\n0 2 0.75\n").unwrap();
    let out = dir.path().join("m.json");
    let o = exec(&[
        "pretrain", "--problem", "maxcut", "--graph", p(&graph), "--method", "tebd", "--dtau", "1e-3",
        "--steps", "30", "--chi", "2", "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(Mps::load(&out).unwrap().max_bond() <= 2);
}

#[test]
fn compile_and_train_h2() {
    let dir = tempfile::tempdir().unwrap();
    let mps = dir.path().join("m.json");
    let circ = dir.path().join("c.json");
    let log = dir.path().join("log.csv");
    assert!(exec(&["pretrain", "--hamiltonian", p(&h2()), "--out", p(&mps)]).status.success());

    let o = exec(&["compile", "--mps", p(&mps), "--depth", "1", "--out", p(&circ)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("depth 1"));
    assert!(!circ.exists());

    let o = exec(&["compile", "--mps", p(&mps), "--depth", "4", "--out", p(&circ)]);
    assert!(o.status.success());
    assert!(value(&o, "fidelity") >= 1.0 - 1e-9);

    let o = exec(&[
        "train", "--circuit", p(&circ), "--hamiltonian", p(&h2()), "--optimizer", "bfgs", "--init", "random",
        "--seed", "3", "--max-iterations", "2000", "--out", p(&log),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(value(&o, "final") - -1.1372701746609024 <= 1e-6);
    assert!(std::fs::read_to_string(&log).unwrap().starts_with("step,objective"));
}

#[test]
fn compile_bond_four_beats_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let mps = dir.path().join("m.json");
    let circ = dir.path().join("c.json");
    Mps::random(6, 4, 12).unwrap().save(&mps).unwrap();
    let o = exec(&["compile", "--mps", p(&mps), "--depth", "6", "--out", p(&circ)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(value(&o, "fidelity") >= value(&o, "truncation_fidelity") - 1e-12);
}

#[test]
fn compile_rejects_large_bonds() {
    let dir = tempfile::tempdir().unwrap();
    let mps = dir.path().join("m.json");
    Mps::random(8, 8, 1).unwrap().save(&mps).unwrap();
    let o = exec(&["compile", "--mps", p(&mps), "--depth", "8", "--out", p(&dir.path().join("c.json"))]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn exit_codes_for_io_and_parse_failures() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.txt");
    assert_eq!(exec(&["exact", "--hamiltonian", p(&missing)]).status.code(), Some(3));
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "0.5 Q0\n").unwrap();
    assert_eq!(exec(&["exact", "--hamiltonian", p(&bad)]).status.code(), Some(3));
    assert_eq!(exec(&["exact", "--problem", "tfim"]).status.code(), Some(2));
    assert_eq!(exec(&["exact", "--problem", "tfim", "--n-qubits", "20"]).status.code(), Some(2));
}

#[test]
fn inspect_validates_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mps = dir.path().join("m.json");
    Mps::random(4, 2, 5).unwrap().save(&mps).unwrap();
    let o = exec(&["inspect", p(&mps)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("MPS on 4 sites"));

    let o = exec(&["inspect", p(&h2())]);
    assert!(stdout(&o).contains("4 qubits"));

    let text = std::fs::read_to_string(&mps).unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, &text[..text.len() / 2]).unwrap();
    let o = exec(&["inspect", p(&broken)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(o.stdout.is_empty());
}

#[test]
fn experiment_is_reproducible_and_leaves_inputs_alone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let config = r#"{"problem": "maxcut", "depth": 3, "seeds": [0, 1], "optimizer": {"max_iterations": 10}}"#;
    std::fs::write(&cfg, config).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = exec(&["experiment", "--config", p(&cfg), "--inits", "mps,random", "--out", p(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read_to_string(&cfg).unwrap(), config);
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 6);
    for name in names {
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap());
    }
    let o = exec(&["inspect", p(&a.join("summary.json"))]);
    assert!(stdout(&o).contains("4 runs"));
}

#[test]
fn experiment_without_output_dir_fails_before_writing() {
    let o = exec(&["experiment", "--depth", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn classify_small_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = exec(&[
        "classify", "--n-qubits", "3", "--samples", "20", "--train-epochs", "1", "--epochs", "1", "--inits",
        "mps,identity", "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("summary.json").exists());
    assert!(stdout(&o).contains("accuracy"));
}
