//! Interprocess bridge over a streaming binary TCP protocol.
//!
//! A client [`Session`](client::Session) drives a server-hosted runtime:
//! it calls remote functions by name, gets plain data back for simple
//! results and [`Proxy`](client::Proxy) handles for everything else, and
//! serves callbacks the server makes into host functions while a call is
//! in flight. The value model, codec and runtime live in
//! [`bridgewire_core`]; this crate adds sockets, processes and tooling.

pub mod cli;
pub mod client;
pub mod conformance;
pub mod io;
pub mod server;

pub use bridgewire_core as core;

/// Environment variable naming the server executable for spawned sessions.
pub const SERVER_BIN_ENV: &str = "BRIDGEWIRE_SERVER_BIN";
/// Environment variable fixing the port a spawned server listens on.
pub const PORT_ENV: &str = "BRIDGEWIRE_PORT";
/// Environment variable selecting the diagnostic log level.
pub const LOG_ENV: &str = "BRIDGEWIRE_LOG";
/// Prefix of the line a server prints once it accepts connections.
pub const LISTENING_PREFIX: &str = "BRIDGEWIRE LISTENING";

/// Installs the stderr logger. `level` overrides [`LOG_ENV`]; both accept
/// `off`, `info` and `debug`. Calling it twice is harmless.
pub fn init_logging(level: Option<&str>) {
    let level = level.map(str::to_string).or_else(|| std::env::var(LOG_ENV).ok()).unwrap_or_else(|| "off".into());
    let filter = match level.as_str() {
        "info" => log::LevelFilter::Info,
        "debug" => log::LevelFilter::Debug,
        _ => log::LevelFilter::Off,
    };
    let _ = env_logger::Builder::new().filter_level(filter).target(env_logger::Target::Stderr).try_init();
}
