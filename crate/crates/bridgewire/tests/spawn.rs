mod common;

use std::io::Write;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use bridgewire::client::{discover, double, ClientError, Session, SpawnOptions, ValExt};
use common::scenarios as sc;

/// Tests that touch process-wide environment variables take this lock.
static ENV: Mutex<()> = Mutex::new(());

fn script(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    let mut f = std::fs::File::create(&p).unwrap();
    writeln!(f, "#!/bin/sh\n{body}").unwrap();
    std::fs::set_permissions(&p, std::fs::Permissions::from_mode(0o755)).unwrap();
    p
}

fn opts(bin: PathBuf) -> SpawnOptions {
    SpawnOptions { server_bin: Some(bin), timeout: Duration::from_secs(2), ..SpawnOptions::default() }
}

#[test]
fn spawned_session_calls_and_closes() {
    let mut s = sc::spawned().unwrap();
    assert!(s.is_spawned());
    let port = s.server_port().unwrap();
    assert_eq!(s.call("Base.sqrt", vec![double(4.0)]).unwrap().as_f64(), Some(2.0));
    s.close().unwrap();
    assert!(std::net::TcpStream::connect(("127.0.0.1", port)).is_err(), "server outlived its session");
}

#[test]
fn setup_ok_reports_usability() {
    assert!(Session::setup_ok(Some(Path::new(env!("CARGO_BIN_EXE_bridgewire")))));
    assert!(!Session::setup_ok(Some(Path::new("/nonexistent/bridgewire"))));
}

#[test]
fn interrupt_restarts_the_server() {
    let mut s = sc::spawned().unwrap();
    let port = s.server_port().unwrap();
    let note = sc::interrupt_and_recover(&mut s).unwrap();
    assert!(s.server_port().is_some_and(|p| p != port), "{note}");
}

#[test]
fn interrupt_while_idle_then_call() {
    let mut s = sc::spawned().unwrap();
    let e = s.epoch();
    s.interrupt();
    s.interrupt();
    assert_eq!(s.call("Base.sqrt", vec![double(9.0)]).unwrap().as_f64(), Some(3.0));
    assert!(s.epoch() > e);
}

#[test]
fn fixed_port_is_honored() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut o = sc::server_bin();
    o.port = Some(port);
    let mut s = Session::spawn_with(o).unwrap();
    assert_eq!(s.server_port(), Some(port));
    assert_eq!(s.eval("1 + 2").unwrap().as_f64(), Some(3.0));
}

#[test]
fn port_taken_fails_fast() {
    let busy = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let mut o = sc::server_bin();
    o.port = Some(busy.local_addr().unwrap().port());
    assert!(matches!(Session::spawn_with(o), Err(ClientError::Spawn(_))));
}

#[test]
fn non_executable_path_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("plain.txt");
    std::fs::write(&p, "not a program").unwrap();
    match discover(Some(&p)) {
        Err(ClientError::Discovery(msg)) => assert!(msg.contains("plain.txt"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn env_var_is_used_and_checked() {
    let _g = ENV.lock().unwrap_or_else(|e| e.into_inner());
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("server.txt");
    std::fs::write(&p, "").unwrap();
    std::env::set_var(bridgewire::SERVER_BIN_ENV, &p);
    let r = discover(None);
    let spawned = Session::spawn();
    std::env::set_var(bridgewire::SERVER_BIN_ENV, env!("CARGO_BIN_EXE_bridgewire"));
    let ok = discover(None);
    std::env::remove_var(bridgewire::SERVER_BIN_ENV);
    match r {
        Err(ClientError::Discovery(msg)) => {
            assert!(msg.contains("server.txt") && msg.contains("BRIDGEWIRE_SERVER_BIN"), "{msg}")
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(spawned, Err(ClientError::Discovery(_))));
    assert_eq!(ok.unwrap(), PathBuf::from(env!("CARGO_BIN_EXE_bridgewire")));
    // An explicit path beats the environment.
    assert!(discover(Some(Path::new(env!("CARGO_BIN_EXE_bridgewire")))).is_ok());
}

#[test]
fn path_search_finds_the_server() {
    let _g = ENV.lock().unwrap_or_else(|e| e.into_inner());
    let dir = Path::new(env!("CARGO_BIN_EXE_bridgewire")).parent().unwrap().to_path_buf();
    let old = std::env::var_os("PATH").unwrap_or_default();
    let mut paths = vec![dir.clone()];
    paths.extend(std::env::split_paths(&old));
    std::env::set_var("PATH", std::env::join_paths(paths).unwrap());
    let found = discover(None);
    std::env::set_var("PATH", &old);
    assert_eq!(found.unwrap(), dir.join("bridgewire"));
}

#[test]
fn malformed_listening_line() {
    let dir = tempfile::tempdir().unwrap();
    let bin = script(dir.path(), "bad", "echo 'BRIDGEWIRE LISTENING soon'; sleep 5");
    match Session::spawn_with(opts(bin)) {
        Err(ClientError::Spawn(msg)) => assert!(msg.contains("malformed"), "{msg}"),
        other => panic!("{:?}", other.err()),
    }
}

#[test]
fn exit_before_listening() {
    let dir = tempfile::tempdir().unwrap();
    let bin = script(dir.path(), "quits", "echo starting; exit 3");
    match Session::spawn_with(opts(bin)) {
        Err(ClientError::Spawn(msg)) => assert!(msg.contains("exited before listening"), "{msg}"),
        other => panic!("{:?}", other.err()),
    }
}

#[test]
fn silent_server_times_out() {
    let dir = tempfile::tempdir().unwrap();
    let bin = script(dir.path(), "silent", "exec sleep 30");
    let mut o = opts(bin);
    o.timeout = Duration::from_millis(300);
    let start = std::time::Instant::now();
    match Session::spawn_with(o) {
        Err(ClientError::Spawn(msg)) => assert!(msg.contains("within"), "{msg}"),
        other => panic!("{:?}", other.err()),
    }
    assert!(start.elapsed() < Duration::from_secs(5));
}
