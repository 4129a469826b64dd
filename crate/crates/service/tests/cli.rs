mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Command, Output, Stdio};

use common::scenario_path;

fn lob(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lob")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path(name: &str) -> String {
    scenario_path(name).display().to_string()
}

#[test]
fn every_scenario_validates() {
    for name in ["empty.lob", "person-name.lob", "relay-chain.lob", "filter-pipeline.lob", "self-disabling-rule.lob"] {
        let o = lob(&["validate", &path(name)]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        assert!(stdout(&o).contains(": ok ("));
    }
    assert!(stdout(&lob(&["validate", &path("empty.lob")])).ends_with("ok (0 items)\n"));
}

#[test]
fn invalid_sources_exit_1_with_located_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.lob");
    std::fs::write(&bad, "operator f(x: integer) -> integer = x\n\nrule r\n  when\n    nope(f(1))\n  then\n    put(a.b, 1)\nend\n").unwrap();
    let o = lob(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with(&format!("{}:3:", bad.display())), "{err}");
    std::fs::write(&bad, [0xffu8, 0xfe]).unwrap();
    assert_eq!(lob(&["validate", bad.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn missing_files_exit_2() {
    let o = lob(&["validate", "/definitely/not/here.lob"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(lob(&["fmt", "/definitely/not/here.lob"]).status.code(), Some(2));
}

#[test]
fn self_disabling_rule_fires_once() {
    let o = lob(&["run", &path("self-disabling-rule.lob"), "--trace"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let fired: Vec<&str> = out.lines().filter(|l| l.starts_with("F\t")).collect();
    assert_eq!(fired.len(), 1);
    assert!(fired[0].starts_with("F\t1\tdisarm\t"));
    assert!(out.contains("H\t1\tquiescent"));
    assert!(out.contains("state app\n  armed = false\n  shots = 1\nend\n"), "{out}");
}

#[test]
fn run_without_trace_prints_only_state() {
    let o = lob(&["run", &path("self-disabling-rule.lob")]);
    assert_eq!(stdout(&o), "state app\n  armed = false\n  shots = 1\nend\n");
}

#[test]
fn iteration_cap_exits_3() {
    let o = lob(&["run", &path("self-disabling-rule.lob"), "--max-iter", "0"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("armed = true"), "state is printed as far as it got");
}

#[test]
fn fmt_is_idempotent_and_check_agrees() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["person-name.lob", "relay-chain.lob", "filter-pipeline.lob", "self-disabling-rule.lob", "empty.lob"] {
        let once = lob(&["fmt", &path(name)]);
        assert_eq!(once.status.code(), Some(0));
        let file = dir.path().join(name);
        std::fs::write(&file, &once.stdout).unwrap();
        let twice = lob(&["fmt", file.to_str().unwrap()]);
        assert_eq!(twice.stdout, once.stdout, "{name}");
        assert_eq!(lob(&["fmt", "--check", file.to_str().unwrap()]).status.code(), Some(0));
        // The originals carry comments, which canonical form drops.
        assert_eq!(lob(&["fmt", "--check", &path(name)]).status.code(), Some(1), "{name}");
    }
}

#[test]
fn relay_scenario_prints_the_round_summary_and_calls() {
    let o = lob(&["scenario", &path("relay-chain.lob")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "1 fire desk announce\n1 post desk ward\n2 fire nurse relay\n2 post nurse ward\n3 fire porter pick-up\ncall\t3\tporter\tfetch\t[{\"kind\":\"text\",\"value\":\"bed\"}]\n");
    let capped = lob(&["scenario", &path("relay-chain.lob"), "--rounds", "1"]);
    assert_eq!(capped.status.code(), Some(3));
}

#[test]
fn pipeline_scenario_prints_flow_and_rows() {
    let o = lob(&["scenario", &path("filter-pipeline.lob")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("P\t1\tcatalog\tdata\t"), "{out}");
    assert!(out.ends_with("# table\n{\"key\":2,\"name\":\"birch\"}\n{\"key\":4,\"name\":\"elm\"}\n"), "{out}");
    assert_eq!(lob(&["scenario", &path("empty.lob")]).status.code(), Some(1));
}

#[test]
fn serve_listens_and_answers() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_lob"))
        .args(["serve", "--port", "0", "--store", dir.path().to_str().unwrap()])
        .env("LOB_TOKEN", "t0k")
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").unwrap_or_else(|| panic!("{line}")).to_string();

    let request = |head: &str| {
        let mut s = TcpStream::connect(&addr).unwrap();
        write!(s, "{head}\r\nhost: x\r\nconnection: close\r\n\r\n").unwrap();
        let mut resp = String::new();
        s.read_to_string(&mut resp).unwrap();
        resp
    };
    let denied = request("GET /projects HTTP/1.1");
    let allowed = request("GET /projects HTTP/1.1\r\nx-lob-token: t0k");
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(denied.starts_with("HTTP/1.1 401"), "{denied}");
    assert!(allowed.starts_with("HTTP/1.1 200") && allowed.ends_with("[]"), "{allowed}");
}
