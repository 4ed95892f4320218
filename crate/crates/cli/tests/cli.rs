use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sesscc_core::fltl::acceptance_counter;
use sesscc_core::utcc::Trace;

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

fn sesscc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sesscc")).args(args).env_remove("SESSCC_BUDGET").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn single_tell_gives_a_single_line() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(&dir, "a.utcc", "tell(a)\n");
    let o = sesscc(&["run", &f, "--units", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "{\"unit_index\":1,\"atoms\":[\"a\"],\"equalities\":[],\"inconsistent_flag\":false}\n");
}

#[test]
fn ambiguous_pairing_is_refused_unless_forced() {
    let f = corpus("two_senders.hvk");
    let f = f.to_str().unwrap();
    let o = sesscc(&["run", f]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("can pair with"));
    // Forced, one sender is left over with nobody to talk to.
    let o = sesscc(&["run", f, "--force-pairing", "--units", "2"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stdout(&o).lines().nth(1).unwrap().contains("\"fired_rules\":[\"Com\"]"));
}

#[test]
fn atm_reaches_the_overdraft_branch() {
    let o = sesscc(&["run", corpus("atm.hvk").to_str().unwrap(), "--mode", "encode-then-run", "--units", "20"]);
    assert_eq!(o.status.code(), Some(0));
    let trace = Trace::from_jsonl(&stdout(&o)).unwrap();
    assert_eq!(trace.len(), 20);
    assert!(trace.outputs.iter().any(|u| u.atom_texts().contains(&"out(k_bank,0)".to_string())));
}

#[test]
fn hvk_run_of_the_atm_ends_on_the_overdraft_output() {
    // Nobody listens on k_bank, so the run ends stuck on Q.
    let o = sesscc(&["run", corpus("atm.hvk").to_str().unwrap(), "--units", "30"]);
    assert_eq!(o.status.code(), Some(5));
    let last = stdout(&o).lines().last().unwrap().to_string();
    assert!(last.contains("\"threads\":[\"k_bank![0] 0\"]"), "{last}");
}

#[test]
fn empty_template_file_gives_no_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(&dir, "empty.jsonl", "");
    let o = sesscc(&["verify", corpus("micro/link.hvk").to_str().unwrap(), "--templates", &t]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "");
}

#[test]
fn booking_templates_hold() {
    let o = sesscc(&[
        "verify",
        corpus("booking.hvk").to_str().unwrap(),
        "--templates",
        corpus("booking.templates.jsonl").to_str().unwrap(),
        "--count-acceptances",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 4);
    assert!(out.contains("{\"template\":\"service-accepted\",\"verdict\":\"holds\""), "{out}");
    assert!(!out.contains("violated") && !out.contains("not_within_bound"), "{out}");
}

#[test]
fn three_providers_are_all_accepted() {
    let o = sesscc(&[
        "run",
        corpus("broker3.hvk").to_str().unwrap(),
        "--mode",
        "encode-then-run",
        "--units",
        "40",
        "--count-acceptances",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let trace = Trace::from_jsonl(&stdout(&o)).unwrap();
    let accepted: usize = ["sp1", "sp2", "sp3"].iter().map(|s| acceptance_counter(&trace, s)).sum();
    assert_eq!(accepted, 3);
    assert_eq!(acceptance_counter(&trace, "ob"), 1);

    let o = sesscc(&[
        "verify",
        corpus("broker3.hvk").to_str().unwrap(),
        "--templates",
        corpus("broker3.templates.jsonl").to_str().unwrap(),
        "--units",
        "40",
        "--count-acceptances",
    ]);
    let out = stdout(&o);
    assert_eq!(out.matches("\"verdict\":\"holds\"").count(), 4, "{out}");
}

#[test]
fn recorded_traces_verify_like_runs() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let program = corpus("booking.hvk");
    let templates = corpus("booking.templates.jsonl");
    let o = sesscc(&[
        "run",
        program.to_str().unwrap(),
        "--mode",
        "encode-then-run",
        "--count-acceptances",
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(Trace::from_jsonl(&text).unwrap().to_jsonl(), text);
    let from_file = sesscc(&["verify", trace.to_str().unwrap(), "--templates", templates.to_str().unwrap()]);
    let from_run = sesscc(&[
        "verify",
        program.to_str().unwrap(),
        "--templates",
        templates.to_str().unwrap(),
        "--count-acceptances",
    ]);
    assert_eq!(stdout(&from_file), stdout(&from_run));
}

#[test]
fn parse_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(&dir, "bad.hvk", "request a(k in 0\n");
    let o = sesscc(&["run", &f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("1:13"));
    let t = write(&dir, "bad.jsonl", "{\"name\": 3}\n");
    let o = sesscc(&["verify", corpus("micro/link.hvk").to_str().unwrap(), "--templates", &t]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_files_and_bad_flags_exit_with_one() {
    assert_eq!(sesscc(&["run", "/nonexistent.hvk"]).status.code(), Some(1));
    assert_eq!(sesscc(&["run", corpus("atm.hvk").to_str().unwrap(), "--mode", "pi"]).status.code(), Some(1));
    assert_eq!(sesscc(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn correspondence_and_its_negative_control() {
    let f = corpus("micro/link_com.hvk");
    let o = sesscc(&["correspond", f.to_str().unwrap(), "--units", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().last().unwrap(), "{\"agree\":true,\"units\":4}");
    let o = sesscc(&["correspond", f.to_str().unwrap(), "--units", "4", "--swap-req-acc"]);
    assert_eq!(o.status.code(), Some(8));
    assert_eq!(stdout(&o).lines().last().unwrap(), "{\"agree\":false,\"units\":4,\"first_divergence\":1}");
}

#[test]
fn timed_programs_are_not_compared() {
    let o = sesscc(&["correspond", corpus("booking.hvk").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn budget_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    // Each match tells the fact that enables the next: ten matches in one unit.
    let f = write(&dir, "chain.utcc", "tell(n(0)) || (abs x; n(x) & x < 10) tell(n(x + 1))\n");
    let run = |budget: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_sesscc"));
        cmd.args(["run", &f, "--units", "1"]).env_remove("SESSCC_BUDGET");
        if let Some(b) = budget {
            cmd.env("SESSCC_BUDGET", b);
        }
        cmd.output().unwrap()
    };
    assert_eq!(run(None).status.code(), Some(0));
    assert_eq!(run(Some("5")).status.code(), Some(3));
    assert_eq!(run(Some("5000")).status.code(), Some(0));
}

#[test]
fn encode_prints_a_parsable_process() {
    let o = sesscc(&["encode", corpus("micro/link_com.hvk").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    sesscc_core::utcc::parse_process(stdout(&o).trim()).unwrap();
}

#[test]
fn inputs_are_read_per_unit() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(&dir, "echo.utcc", "!(abs x; ping(x)) tell(pong(x))\n");
    let inputs = write(&dir, "in.txt", "ping(1)\n\nping(2)\n");
    let o = sesscc(&["run", &f, "--units", "3", "--inputs", &inputs]);
    let trace = Trace::from_jsonl(&stdout(&o)).unwrap();
    let atoms: Vec<Vec<String>> = trace.outputs.iter().map(|u| u.atom_texts()).collect();
    assert_eq!(atoms, [vec!["ping(1)", "pong(1)"], vec![], vec!["ping(2)", "pong(2)"]]);
}
