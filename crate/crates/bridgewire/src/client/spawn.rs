//! Finding, starting and stopping a local server process.

use std::env;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use log::debug;

use super::ClientError;
use crate::{LISTENING_PREFIX, PORT_ENV, SERVER_BIN_ENV};

/// Name searched on `PATH` when nothing more specific is configured.
pub const SERVER_EXE_NAME: &str = "bridgewire";

pub const DEFAULT_SPAWN_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Clone, Debug)]
pub struct SpawnOptions {
    /// Server executable. Takes precedence over the environment.
    pub server_bin: Option<PathBuf>,
    /// Fixed port. Defaults to [`PORT_ENV`], then an ephemeral port.
    pub port: Option<u16>,
    pub timeout: Duration,
}

impl Default for SpawnOptions {
    fn default() -> Self {
        SpawnOptions { server_bin: None, port: None, timeout: DEFAULT_SPAWN_TIMEOUT }
    }
}

fn is_executable(path: &Path) -> bool {
    let Ok(meta) = path.metadata() else { return false };
    if !meta.is_file() {
        return false;
    }
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        meta.permissions().mode() & 0o111 != 0
    }
    #[cfg(not(unix))]
    {
        true
    }
}

fn checked(path: PathBuf, source: &str) -> Result<PathBuf, ClientError> {
    if is_executable(&path) {
        Ok(path)
    } else {
        Err(ClientError::Discovery(format!("{} (from {source}) is not an executable file", path.display())))
    }
}

/// Locates the server executable: explicit path, then `BRIDGEWIRE_SERVER_BIN`,
/// then a search of `PATH`.
pub fn discover(explicit: Option<&Path>) -> Result<PathBuf, ClientError> {
    if let Some(p) = explicit {
        return checked(p.to_path_buf(), "explicit path");
    }
    if let Some(p) = env::var_os(SERVER_BIN_ENV).filter(|p| !p.is_empty()) {
        return checked(PathBuf::from(p), SERVER_BIN_ENV);
    }
    let exe = format!("{SERVER_EXE_NAME}{}", env::consts::EXE_SUFFIX);
    env::var_os("PATH")
        .and_then(|paths| env::split_paths(&paths).map(|dir| dir.join(&exe)).find(|p| is_executable(p)))
        .ok_or_else(|| ClientError::Discovery(format!("no `{exe}` on PATH and {SERVER_BIN_ENV} is not set")))
}

fn port_setting(opts: &SpawnOptions) -> Result<u16, ClientError> {
    if let Some(p) = opts.port {
        return Ok(p);
    }
    match env::var(PORT_ENV) {
        Ok(s) if !s.is_empty() => {
            s.trim().parse().map_err(|_| ClientError::Spawn(format!("{PORT_ENV}={s} is not a port number")))
        }
        _ => Ok(0),
    }
}

/// A running server child. Killed when dropped.
pub(crate) struct ServerProcess {
    child: Child,
    pub port: u16,
    pub path: PathBuf,
}

impl ServerProcess {
    pub fn start(opts: &SpawnOptions) -> Result<ServerProcess, ClientError> {
        let path = discover(opts.server_bin.as_deref())?;
        let port = port_setting(opts)?;
        debug!("starting {} on port {port}", path.display());
        let mut child = Command::new(&path)
            .args(["serve", "--host", "127.0.0.1", "--port", &port.to_string()])
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ClientError::Spawn(format!("cannot start {}: {e}", path.display())))?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        // Keeps draining stdout after the handshake line so the server never
        // blocks on a full pipe.
        thread::spawn(move || {
            let mut tx = Some(tx);
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if let Some(rest) = line.strip_prefix(LISTENING_PREFIX) {
                    if let Some(tx) = tx.take() {
                        let _ = tx.send(rest.trim().parse::<u16>().ok());
                    }
                }
            }
        });
        let mut proc = ServerProcess { child, port: 0, path };
        match rx.recv_timeout(opts.timeout) {
            Ok(Some(p)) => {
                proc.port = p;
                Ok(proc)
            }
            Ok(None) => Err(ClientError::Spawn(format!("{} printed a malformed listening line", proc.path.display()))),
            Err(mpsc::RecvTimeoutError::Timeout) => Err(ClientError::Spawn(format!(
                "{} did not report a listening port within {:?}",
                proc.path.display(),
                opts.timeout
            ))),
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                let status = proc.child.wait().map(|s| s.to_string()).unwrap_or_default();
                Err(ClientError::Spawn(format!("{} exited before listening ({status})", proc.path.display())))
            }
        }
    }

    pub fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for ServerProcess {
    fn drop(&mut self) {
        self.kill();
    }
}
