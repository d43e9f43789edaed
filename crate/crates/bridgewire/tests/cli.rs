use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bridgewire"));
    c.env_remove("BRIDGEWIRE_SERVER_BIN").env_remove("BRIDGEWIRE_PORT").env_remove("BRIDGEWIRE_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn bench_prints_ratio() {
    let o = run(&["bench", "--size", "10", "--runs", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("size 10, runs 2") && out.contains("ratio "), "{out}");
}

#[test]
fn bench_single_format_has_no_ratio() {
    let o = run(&["bench", "--size", "10", "--format", "binary"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("binary") && !out.contains("ratio"), "{out}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["bench", "--size", "0"]).status.code(), Some(2));
    assert_eq!(run(&["bench", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["bench", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn serve_on_taken_port_exits_one() {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = l.local_addr().unwrap().port().to_string();
    let o = run(&["serve", "--port", &port]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot listen"));
}

#[test]
fn serve_announces_port() {
    let mut child = bin().args(["serve", "--port", "0"]).stdout(Stdio::piped()).spawn().unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    let port: u16 = line.trim().strip_prefix("BRIDGEWIRE LISTENING ").unwrap().parse().unwrap();
    assert_ne!(port, 0);
}

#[test]
fn selftest_passes() {
    let o = run(&["selftest"]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    assert!(out.contains("PASS golden f64_scalar"));
    assert!(out.contains("PASS roundtrip 1000 values"));
    assert!(out.contains("PASS spawn call interrupt"), "{out}");
    assert!(!out.contains("FAIL"));
}

#[test]
fn selftest_names_corrupted_vector() {
    let tmp = tempfile::tempdir().unwrap();
    let src = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("golden");
    for entry in std::fs::read_dir(src).unwrap() {
        let p = entry.unwrap().path();
        std::fs::copy(&p, tmp.path().join(p.file_name().unwrap())).unwrap();
    }
    std::fs::write(tmp.path().join("frame_byebye.hex"), "# BYEBYE frame\n0e\n").unwrap();
    let o = run(&["selftest", "--golden-dir", tmp.path().to_str().unwrap(), "--server-bin", "/nonexistent/bw"]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(1), "{out}");
    assert!(out.contains("FAIL golden frame_byebye"), "{out}");
    assert!(out.contains("PASS golden f64_scalar"));
}

#[test]
fn selftest_skips_without_server() {
    let o = run(&["selftest", "--server-bin", "/nonexistent/bw"]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    assert!(out.contains("SKIP spawn call interrupt"), "{out}");
}

fn repl(input: &str) -> Output {
    let mut child = bin()
        .arg("repl")
        .env("BRIDGEWIRE_SERVER_BIN", env!("CARGO_BIN_EXE_bridgewire"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

#[test]
fn repl_evaluates_lines_and_survives_errors() {
    let o = repl("Base.sqrt(4.0)\nBase.sqrt(\nBase.error(\"boom\")\nBase.add(1, 2)\n:quit\nBase.sqrt(9.0)\n");
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(out.contains("> 2\n"), "{out}");
    assert!(out.contains("> 3\n"), "{out}");
    assert!(!out.contains("> 3\n> 3"), "input after :quit was evaluated: {out}");
    assert!(err.contains("boom"), "{err}");
    assert!(err.matches("error").count() >= 2, "{err}");
}

#[test]
fn repl_ends_at_end_of_input() {
    let o = repl("Base.typeof(1)\n");
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("\"Int64\""), "{}", stdout(&o));
}

#[test]
fn repl_connects_to_running_server() {
    let mut server = bin().args(["serve", "--port", "0"]).stdout(Stdio::piped()).spawn().unwrap();
    let mut line = String::new();
    BufReader::new(server.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let port = line.trim().rsplit(' ').next().unwrap().to_string();
    let mut child = bin().args(["repl", "--port", &port]).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(b"Base.length(Base.range(1, 10))\n").unwrap();
    let o = child.wait_with_output().unwrap();
    server.kill().unwrap();
    server.wait().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("> 10\n"), "{}", stdout(&o));
}
