use std::fmt;
use std::sync::{Arc, Mutex};

/// Ids of dropped proxies waiting to be sent as RELEASE frames.
#[derive(Debug, Default)]
pub(crate) struct ReleaseQueue {
    /// Proxies minted under another epoch no longer enqueue.
    pub epoch: u64,
    pub ids: Vec<u64>,
}

pub(crate) type SharedQueue = Arc<Mutex<ReleaseQueue>>;

/// Host-side handle to an object held in the server's registry.
///
/// Clones share one handle; the id is queued for release once, when the
/// last clone is dropped.
#[derive(Clone)]
pub struct Proxy(Arc<ProxyInner>);

struct ProxyInner {
    id: u64,
    type_name: String,
    epoch: u64,
    session: u64,
    queue: SharedQueue,
}

impl Proxy {
    pub(crate) fn new(id: u64, type_name: String, epoch: u64, session: u64, queue: SharedQueue) -> Proxy {
        Proxy(Arc::new(ProxyInner { id, type_name, epoch, session, queue }))
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn type_name(&self) -> &str {
        &self.0.type_name
    }

    pub fn epoch(&self) -> u64 {
        self.0.epoch
    }

    pub(crate) fn session(&self) -> u64 {
        self.0.session
    }
}

impl Drop for ProxyInner {
    fn drop(&mut self) {
        // A poisoned lock only means another thread panicked mid-push; the
        // queue itself is still a plain vector.
        let mut q = self.queue.lock().unwrap_or_else(|e| e.into_inner());
        if q.epoch == self.epoch {
            q.ids.push(self.id);
        }
    }
}

impl PartialEq for Proxy {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.id == other.0.id && self.0.epoch == other.0.epoch && self.0.session == other.0.session)
    }
}

impl fmt::Debug for Proxy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Proxy({} #{} epoch {})", self.0.type_name, self.0.id, self.0.epoch)
    }
}
