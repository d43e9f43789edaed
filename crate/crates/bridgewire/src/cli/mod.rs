//! The `bridgewire` command: `serve`, `repl`, `bench` and `selftest`.

mod render;

use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};

use crate::client::{self, double, ClientError, Session, SpawnOptions, ValExt};
use crate::conformance::{self, BenchFormat};
use crate::server::Server;
use crate::{LISTENING_PREFIX, LOG_ENV, PORT_ENV, SERVER_BIN_ENV};

pub use render::render;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "bridgewire", version, about = "Binary bridge server, REPL client and codec tools")]
pub struct Cli {
    /// Diagnostic log level on stderr: off, info or debug.
    #[arg(long, global = true, env = LOG_ENV, value_parser = ["off", "info", "debug"])]
    pub log: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Accept client connections, one isolated runtime per connection.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = PORT_ENV, default_value_t = 0)]
        port: u16,
    },
    /// Evaluate expressions line by line on a spawned or running server.
    Repl {
        /// Connect to this host instead of spawning a server.
        #[arg(long)]
        host: Option<String>,
        /// Connect to this port instead of spawning a server.
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, env = SERVER_BIN_ENV)]
        server_bin: Option<PathBuf>,
    },
    /// Time binary and text encode+decode of a float array.
    Bench {
        /// Number of array elements.
        #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
        size: u64,
        /// Format to time; both when omitted.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
        runs: u64,
    },
    /// Golden vectors, round trips and a spawned-server smoke test.
    Selftest {
        #[arg(long)]
        server_bin: Option<PathBuf>,
        /// Directory holding the golden `.hex` files.
        #[arg(long)]
        golden_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Binary,
    JsonBaseline,
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    crate::init_logging(cli.log.as_deref());
    match cli.command {
        Command::Serve { host, port } => cmd_serve(&host, port),
        Command::Repl { host, port, server_bin } => {
            let stdin = io::stdin();
            cmd_repl(host, port, server_bin, &mut stdin.lock(), &mut io::stdout())
        }
        Command::Bench { size, format, runs } => cmd_bench(size as usize, format, runs as usize),
        Command::Selftest { server_bin, golden_dir } => {
            cmd_selftest(server_bin.as_deref(), &golden_dir.unwrap_or_else(conformance::default_golden_dir))
        }
    }
}

pub fn cmd_serve(host: &str, port: u16) -> i32 {
    let server = match Server::bind(host, port) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("bridgewire: cannot listen on {host}:{port}: {e}");
            return EXIT_FAILURE;
        }
    };
    let port = match server.local_addr() {
        Ok(a) => a.port(),
        Err(e) => {
            eprintln!("bridgewire: {e}");
            return EXIT_FAILURE;
        }
    };
    let mut out = io::stdout().lock();
    if writeln!(out, "{LISTENING_PREFIX} {port}").and_then(|_| out.flush()).is_err() {
        return EXIT_FAILURE;
    }
    drop(out);
    match server.run() {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("bridgewire: {e}");
            EXIT_FAILURE
        }
    }
}

fn open_session(host: Option<String>, port: Option<u16>, server_bin: Option<PathBuf>) -> Result<Session, ClientError> {
    match (host, port) {
        (None, None) => {
            let server_bin = find_server(server_bin.as_deref()).ok().or(server_bin);
            Session::spawn_with(SpawnOptions { server_bin, ..SpawnOptions::default() })
        }
        (host, port) => {
            let host = host.unwrap_or_else(|| "127.0.0.1".into());
            let port = port.ok_or_else(|| ClientError::Usage("--host needs --port".into()))?;
            Session::connect((host.as_str(), port))
        }
    }
}

fn report_error(e: &ClientError) {
    eprintln!("error: {e}");
    if !e.detail().is_empty() {
        eprintln!("{}", e.detail());
    }
}

/// Reads expressions from `input` until `:quit` or end of input.
pub fn cmd_repl(
    host: Option<String>,
    port: Option<u16>,
    server_bin: Option<PathBuf>,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> i32 {
    let mut session = match open_session(host, port, server_bin) {
        Ok(s) => s,
        Err(e) => {
            report_error(&e);
            return EXIT_FAILURE;
        }
    };
    let handle = session.interrupt_handle();
    if let Err(e) = ctrlc::set_handler(move || handle.interrupt()) {
        log::info!("no interrupt handler: {e}");
    }
    let mut line = String::new();
    loop {
        let _ = write!(out, "> ").and_then(|_| out.flush());
        line.clear();
        match input.read_line(&mut line) {
            Ok(0) => break,
            Ok(_) => {}
            Err(e) => {
                eprintln!("bridgewire: {e}");
                return EXIT_FAILURE;
            }
        }
        let src = line.trim();
        match src {
            "" => continue,
            ":quit" | ":q" => break,
            _ => {}
        }
        match session.eval(src) {
            Ok(v) => {
                let _ = writeln!(out, "{}", render(&v));
            }
            Err(ClientError::Interrupted) => {
                eprintln!("interrupted");
                if !session.is_spawned() {
                    if let Err(e) = session.reconnect() {
                        report_error(&e);
                        return EXIT_FAILURE;
                    }
                }
            }
            Err(e @ ClientError::Disconnected(_)) => {
                report_error(&e);
                return EXIT_FAILURE;
            }
            Err(e) => report_error(&e),
        }
    }
    let _ = writeln!(out);
    match session.close() {
        Ok(()) => EXIT_OK,
        Err(e) => {
            report_error(&e);
            EXIT_FAILURE
        }
    }
}

fn ms(d: Duration) -> String {
    format!("{:.3} ms", d.as_secs_f64() * 1e3)
}

pub fn cmd_bench(size: usize, format: Option<FormatArg>, runs: usize) -> i32 {
    let formats: Vec<BenchFormat> = match format {
        Some(FormatArg::Binary) => vec![BenchFormat::Binary],
        Some(FormatArg::JsonBaseline) => vec![BenchFormat::JsonBaseline],
        None => vec![BenchFormat::Binary, BenchFormat::JsonBaseline],
    };
    let report = conformance::run_bench(size, runs, &formats);
    println!("size {size}, runs {runs}");
    if let Some(m) = conformance::median(&report.binary) {
        println!("binary        median {}", ms(m));
    }
    if let Some(m) = conformance::median(&report.text) {
        println!("json-baseline median {}", ms(m));
    }
    if let Some(r) = report.ratio() {
        println!("ratio {r:.2}");
    }
    EXIT_OK
}

enum Check {
    Pass,
    Fail(String),
    Skip(String),
}

fn line(name: &str, c: &Check) -> bool {
    match c {
        Check::Pass => println!("PASS {name}"),
        Check::Fail(why) => println!("FAIL {name}: {why}"),
        Check::Skip(why) => println!("SKIP {name}: {why}"),
    }
    !matches!(c, Check::Fail(_))
}

/// Finds a server executable: the explicit path or the environment
/// variable, then PATH, then this very executable.
fn find_server(explicit: Option<&Path>) -> Result<PathBuf, String> {
    match client::discover(explicit) {
        Ok(p) => Ok(p),
        Err(e) if explicit.is_some() || std::env::var_os(SERVER_BIN_ENV).is_some() => Err(e.to_string()),
        Err(e) => std::env::current_exe()
            .ok()
            .filter(|p| p.file_stem().is_some_and(|s| s == client::SERVER_EXE_NAME))
            .ok_or_else(|| e.to_string()),
    }
}

fn spawn_smoke(bin: PathBuf) -> Result<(), String> {
    let err = |e: ClientError| e.to_string();
    let mut s = Session::spawn_with(SpawnOptions { server_bin: Some(bin), ..SpawnOptions::default() }).map_err(err)?;
    let got = s.call("Base.sqrt", vec![double(4.0)]).map_err(err)?;
    if got.as_f64() != Some(2.0) {
        return Err(format!("sqrt(4.0) gave {}", render(&got)));
    }
    let handle = s.interrupt_handle();
    let start = Instant::now();
    let t = thread::spawn(move || {
        thread::sleep(Duration::from_millis(200));
        handle.interrupt();
    });
    let spun = s.eval("Base.spin()");
    let _ = t.join();
    match spun {
        Err(ClientError::Interrupted) => {}
        other => return Err(format!("spin was not interrupted: {other:?}")),
    }
    if start.elapsed() > Duration::from_secs(2) {
        return Err(format!("interrupt took {:?}", start.elapsed()));
    }
    let got = s.call("Base.sqrt", vec![double(4.0)]).map_err(err)?;
    if got.as_f64() != Some(2.0) {
        return Err(format!("sqrt(4.0) after interrupt gave {}", render(&got)));
    }
    s.close().map_err(err)
}

pub fn cmd_selftest(server_bin: Option<&Path>, golden_dir: &Path) -> i32 {
    let mut ok = true;
    for g in conformance::check_golden(golden_dir) {
        let c = match g.result {
            Ok(()) => Check::Pass,
            Err(e) => Check::Fail(e),
        };
        ok &= line(&format!("golden {}", g.name), &c);
    }
    let c = match conformance::roundtrip_suite(1000, 1) {
        Ok(()) => Check::Pass,
        Err(e) => Check::Fail(e),
    };
    ok &= line("roundtrip 1000 values", &c);
    let c = match find_server(server_bin) {
        Ok(bin) => match spawn_smoke(bin) {
            Ok(()) => Check::Pass,
            Err(e) => Check::Fail(e),
        },
        Err(why) => Check::Skip(format!("no server binary ({why})")),
    };
    ok &= line("spawn call interrupt", &c);
    if ok {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}
