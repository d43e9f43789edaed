#![allow(dead_code)]

pub mod scenarios;

use std::net::SocketAddr;
use std::sync::OnceLock;

use bridgewire::client::Session;
use bridgewire::server::Server;

/// One in-process server shared by the tests of a binary; every session
/// gets its own runtime.
pub fn server() -> SocketAddr {
    static ADDR: OnceLock<SocketAddr> = OnceLock::new();
    *ADDR.get_or_init(|| Server::bind("127.0.0.1", 0).and_then(Server::spawn).expect("server starts").0)
}

pub fn session() -> Session {
    Session::connect(server()).expect("connects")
}

/// Session that keeps remote output out of the test log.
pub fn quiet_session() -> Session {
    let mut s = session();
    s.set_output(|_, _| {});
    s
}
