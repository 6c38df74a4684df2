use std::path::PathBuf;
use std::process::{Command, Output};

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

fn idfnl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idfnl")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn gap_model() -> String {
    data("closure_gap.dm").display().to_string()
}

#[test]
fn eval_state_form() {
    let out = idfnl(&["eval", &gap_model(), "p \\\\ q", "--state", "s"]);
    assert_eq!((code(&out), stdout(&out).as_str()), (0, "true\n"));
    let out = idfnl(&["eval", &gap_model(), "p", "--state", "s"]);
    assert_eq!((code(&out), stdout(&out).as_str()), (1, "false\n"));
}

#[test]
fn eval_set_form() {
    let out = idfnl(&["eval", &gap_model(), "bot"]);
    assert_eq!((code(&out), stdout(&out).as_str()), (0, "{}\n"));
    let out = idfnl(&["eval", &gap_model(), "p \\ q"]);
    assert_eq!(stdout(&out), "{s, t, u, x}\n");
}

#[test]
fn eval_errors() {
    assert_eq!(code(&idfnl(&["eval", &gap_model(), "p \\ q", "--state", "nosuch"])), 2);
    assert_eq!(code(&idfnl(&["eval", &gap_model(), "p \\ q \\ r"])), 2);
    assert_eq!(code(&idfnl(&["eval", "/nonexistent/model.dm", "p"])), 2);
}

#[test]
fn valid_prints_a_countermodel_that_eval_confirms() {
    let out = idfnl(&["valid", "p & (p \\ q) |- q", "--max-states", "2"]);
    assert_eq!(code(&out), 1);
    let text = stdout(&out);
    assert!(text.starts_with("# countermodel with 1 state\n"), "{text}");

    let path = std::env::temp_dir().join(format!("idfnl-cli-{}.dm", std::process::id()));
    std::fs::write(&path, &text).unwrap();
    let witness = text.lines().last().unwrap().trim_start_matches("# witness: ");
    let lhs = idfnl(&["eval", path.to_str().unwrap(), "p & (p \\ q)", "--state", witness]);
    let rhs = idfnl(&["eval", path.to_str().unwrap(), "q", "--state", witness]);
    std::fs::remove_file(&path).ok();
    assert_eq!((code(&lhs), code(&rhs)), (0, 1));
}

#[test]
fn valid_on_reflexive_frames() {
    let out = idfnl(&["valid", "p & (p \\ q) |- q", "--frame", "reflexive", "--max-states", "3"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "no countermodel with at most 3 states\n");
}

#[test]
fn valid_finds_the_iteration_non_theorem() {
    let out = idfnl(&["valid", "(p \\\\ r) & (q \\\\ r) |- (p | q) \\\\ r"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("# witness: "));
}

#[test]
fn valid_reports_complete_validity_for_tiny_closures() {
    let out = idfnl(&["valid", "top |- top", "--max-states", "4"]);
    assert_eq!((code(&out), stdout(&out).as_str()), (0, "valid: no countermodel up to the finite-model bound 4\n"));
}

#[test]
fn valid_exit_codes() {
    assert_eq!(code(&idfnl(&["valid", "p |-"])), 2);
    assert_eq!(code(&idfnl(&["valid", "p |- p", "--max-states", "0"])), 2);
    assert_eq!(code(&idfnl(&["valid", "p |- p", "--frame", "transitive"])), 2);
    assert_eq!(code(&idfnl(&["valid", "p * q |- q * p", "--max-states", "6"])), 3);
    assert_eq!(code(&idfnl(&["valid", "p \\\\ q |- p \\ q", "--max-states", "6"])), 3);
    assert_eq!(code(&idfnl(&["valid", "(p \\\\ q) & (p \\\\ r) |- p \\\\ (q & r)", "--max-states", "3", "--timeout", "0.2"])), 3);
}

#[test]
fn check_proof_shipped_files() {
    for name in ["residuation", "iter_unfold", "loop_invariance", "meet_commutes", "iter_r_monotone"] {
        let path = data(&format!("proofs/{name}.idp"));
        let out = idfnl(&["check-proof", path.to_str().unwrap()]);
        assert_eq!((code(&out), stdout(&out).as_str()), (0, "OK\n"), "{name}");
    }
}

#[test]
fn check_proof_reports_corrupted_step() {
    let good = std::fs::read_to_string(data("proofs/iter_unfold.idp")).unwrap();
    let bad = good.replace("; and_elim_l ; A=p \\ q ,", "; and_elim_l ; A=q \\ q ,");
    assert_ne!(good, bad);
    let path = std::env::temp_dir().join(format!("idfnl-cli-{}.idp", std::process::id()));
    std::fs::write(&path, bad).unwrap();
    let out = idfnl(&["check-proof", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).starts_with("step 2: "), "{}", stdout(&out));
}

#[test]
fn check_proof_extensions() {
    let path = data("proofs/ext/weak_contraction.idp");
    let out = idfnl(&["check-proof", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("extension disabled"));
    let out = idfnl(&["check-proof", path.to_str().unwrap(), "--ext", "weak_contraction"]);
    assert_eq!((code(&out), stdout(&out).as_str()), (0, "OK\n"));
    assert_eq!(code(&idfnl(&["check-proof", path.to_str().unwrap(), "--ext", "weak_commutativity"])), 1);
}

#[test]
fn check_proof_parse_error() {
    let path = std::env::temp_dir().join(format!("idfnl-cli-parse-{}.idp", std::process::id()));
    std::fs::write(&path, "1. p |- p ; modus_ponens ; A=p\n").unwrap();
    let out = idfnl(&["check-proof", path.to_str().unwrap()]);
    std::fs::remove_file(&path).ok();
    assert_eq!(code(&out), 2);
}

#[test]
fn closure_listings() {
    let out = idfnl(&["closure", "p \\\\ q"]);
    assert_eq!(stdout(&out), "bot\np\np \\ q\np \\\\ q\nq\ntop\n");
    assert_eq!(stdout(&idfnl(&["closure", "top"])), "bot\ntop\n");
    let out = idfnl(&["closure", "--sequent", "p |- q"]);
    assert_eq!(stdout(&out), "bot\np\nq\ntop\nbound: 16\n");
    assert_eq!(code(&idfnl(&["closure", "p *"])), 2);
}

#[test]
fn fmt_is_canonical() {
    assert_eq!(stdout(&idfnl(&["fmt", "((p * q)) & ((r) | top)"])), "p * q & (r | top)\n");
    assert_eq!(stdout(&idfnl(&["fmt", "(p & q) & r|-(p)"])), "p & q & r |- p\n");
    assert_eq!(code(&idfnl(&["fmt", "p * q * r"])), 2);
}

#[test]
fn selftest_runs() {
    let out = idfnl(&["selftest", "--seed", "7", "--iterations", "100"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).ends_with("8 suites passed, 0 failed (seed 7)\n"));
    let out = idfnl(&["selftest", "--iterations", "0"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn output_is_deterministic_across_job_counts() {
    let run = |jobs: &str| idfnl(&["valid", "p / q |- p // q", "--max-states", "3", "--jobs", jobs]).stdout;
    assert_eq!(run("1"), run("3"));
}
