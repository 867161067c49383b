use std::path::PathBuf;
use std::process::{Command, Output};

use hamlearn::instances::reference_chain;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hamlearn"))
}

fn scratch(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hamlearn-cli-tests-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn expand_minimal_file() {
    let f = scratch("one.txt", "qubits 1\nbeta 0.1\nterm a 0.5 Z0\n");
    let o = run(&["expand", f.to_str().unwrap(), "--order", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "a\t1\t-1/1\ta^1\n");
    let o = run(&["expand", f.to_str().unwrap(), "--order", "2", "--list-clusters"]);
    assert!(stdout(&o).starts_with("cluster\ta\t1\ta\n"));
}

#[test]
fn expand_exit_codes() {
    let bad = scratch("bad.txt", "qubits 1\nbeta 0.1\nterm a 0.5 Q0\n");
    let o = run(&["expand", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let hot = scratch("hot.txt", "qubits 2\nbeta 0.5\nterm a 0.5 Z0 Z1\nterm b 0.5 X1\n");
    assert_eq!(run(&["expand", hot.to_str().unwrap()]).status.code(), Some(3));
    let missing = run(&["expand", "/nonexistent/spec.txt"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn learn_gibbs_exact_on_chain() {
    let f = scratch("chain.txt", &reference_chain(0.05).to_text());
    let path = f.to_str().unwrap();
    assert_eq!(run(&["learn", "gibbs", path, "--exact-expectations"]).status.code(), Some(3));
    let o = run(&["learn", "gibbs", path, "--exact-expectations", "--override", "--order", "6", "--epsilon", "1e-4"]);
    assert_eq!(o.status.code(), Some(4));
    let text = stdout(&o);
    assert!(text.contains("guaranteed\tfalse"));
    let body = text.split("\n\n").nth(1).unwrap();
    for (line, want) in body.lines().zip(reference_chain(0.05).coefficients()) {
        let v: f64 = line.split('\t').nth(1).unwrap().parse().unwrap();
        assert!((v - want).abs() < 1e-6);
    }
}

#[test]
fn dynamics_at_zero_time() {
    let f = scratch("dyn.txt", "qubits 2\nbeta 1\nterm a 0.3 Z0 Z1\nterm b 0.2 X0\n");
    let o = run(&["learn", "dynamics", f.to_str().unwrap(), "--time", "0", "--exact-expectations"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let text = stdout(&o);
    assert!(text.contains("a\t0.00000000000000000e0") && text.contains("b\t0.00000000000000000e0"));
}

#[test]
fn mrf_round_trip_through_files() {
    let spec = scratch("m.txt", "vertices 4\nbeta 0.2\nedge e0 0.5 0 1\nedge e1 -0.3 1 2\nedge e2 0.7 2 3\n");
    let samples = spec.with_file_name("samples.txt");
    let o = run(&[
        "sample-mrf",
        spec.to_str().unwrap(),
        "--count",
        "20000",
        "--seed",
        "3",
        "-o",
        samples.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["learn", "mrf", spec.to_str().unwrap(), "--samples", samples.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("samples\t20000\n"));
    let exact = stdout(&run(&["learn", "mrf", spec.to_str().unwrap(), "--exact-conditionals"]));
    let e1: f64 = exact.lines().find_map(|l| l.strip_prefix("e1\t")).unwrap().parse().unwrap();
    assert!((e1 + 0.3).abs() < 1e-12, "{exact}");
}

#[test]
fn seed_is_printed_when_absent() {
    let f = scratch("sim.txt", "qubits 2\nbeta 0.5\nterm a 0.3 Z0 Z1\nterm b 0.2 X0\n");
    let o = run(&["simulate", f.to_str().unwrap(), "--shots", "100"]);
    assert_eq!(o.status.code(), Some(0));
    let err = String::from_utf8_lossy(&o.stderr);
    let seed = err.lines().find_map(|l| l.strip_prefix("seed ")).unwrap().trim().to_string();
    assert!(stdout(&o).starts_with(&format!("seed\t{seed}\n")));
    let again = run(&["simulate", f.to_str().unwrap(), "--shots", "100", "--seed", &seed]);
    assert_eq!(again.stdout, o.stdout);
}

#[test]
fn verify_suites_and_negative_control() {
    let o = run(&["verify"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().count() >= 8 && text.lines().all(|l| l.contains("\tPASS\t")));
    let o = run(&["verify", "--suite", "clusters"]);
    assert!(stdout(&o).lines().all(|l| l.starts_with("clusters.")));
    let o = run(&["verify", "--suite", "derivatives", "--perturb-derivatives", "1e-3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("derivatives.word_oracle\tFAIL"));
    assert_eq!(run(&["verify", "--suite", "nope"]).status.code(), Some(2));
}

#[test]
fn bounds_table() {
    let o = run(&["bounds"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 16);
    assert!(text.lines().skip(1).all(|l| l.ends_with("\tpass")));
}
