use std::fmt;
use std::sync::Arc;

use bridgewire_core::host::{HostList, HostTable, HostValue, HostVector};

use super::proxy::Proxy;
use super::{ClientError, Session};

/// A host value as the client sees it.
pub type Val = HostValue<Extern>;

/// Host values that are not data.
#[derive(Clone, Debug, PartialEq)]
pub enum Extern {
    /// Reference to a server object.
    Proxy(Proxy),
    /// A remote function or type constructor known by name.
    Function(RemoteFn),
    /// A host function the server may call back.
    Callback(HostFn),
}

/// A remote function known by its qualified name. Type constructors carry
/// a marker so they travel as types rather than plain functions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemoteFn {
    pub name: String,
    pub constructor: bool,
}

/// Arguments of a callback invocation.
#[derive(Debug, Default)]
pub struct CallArgs {
    pub positional: Vec<Val>,
    pub named: Vec<(String, Val)>,
}

impl CallArgs {
    pub fn get(&self, i: usize) -> Option<&Val> {
        self.positional.get(i)
    }

    pub fn named(&self, name: &str) -> Option<&Val> {
        self.named.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    /// Positional argument `i` as a double scalar.
    pub fn f64(&self, i: usize) -> Result<f64, ClientError> {
        self.get(i)
            .and_then(ValExt::as_f64)
            .ok_or_else(|| ClientError::Callback(format!("argument {} is not a number", i + 1)))
    }
}

pub(crate) type CallbackFn = dyn Fn(&mut Session, CallArgs) -> Result<Val, ClientError> + Send + Sync;

/// A host function passed to the server as a callback. Clones share the
/// same callback id within a session.
#[derive(Clone)]
pub struct HostFn(pub(crate) Arc<CallbackFn>);

impl HostFn {
    pub fn new<F>(f: F) -> HostFn
    where
        F: Fn(&mut Session, CallArgs) -> Result<Val, ClientError> + Send + Sync + 'static,
    {
        HostFn(Arc::new(f))
    }

    pub fn into_val(self) -> Val {
        HostValue::Extern(Extern::Callback(self))
    }

    pub(crate) fn key(&self) -> usize {
        Arc::as_ptr(&self.0) as *const () as usize
    }
}

impl PartialEq for HostFn {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl fmt::Debug for HostFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HostFn({:#x})", self.key())
    }
}

impl From<Proxy> for Val {
    fn from(p: Proxy) -> Val {
        HostValue::Extern(Extern::Proxy(p))
    }
}

impl From<RemoteFn> for Val {
    fn from(f: RemoteFn) -> Val {
        HostValue::Extern(Extern::Function(f))
    }
}

impl From<HostFn> for Val {
    fn from(f: HostFn) -> Val {
        f.into_val()
    }
}

/// Shorthand accessors on [`Val`].
pub trait ValExt {
    fn as_proxy(&self) -> Option<&Proxy>;
    /// A one-element numeric vector as a double.
    fn as_f64(&self) -> Option<f64>;
    fn as_str(&self) -> Option<&str>;
    fn as_table(&self) -> Option<&HostTable>;
    fn as_record(&self) -> Option<&HostList<Extern>>;
}

impl ValExt for Val {
    fn as_proxy(&self) -> Option<&Proxy> {
        match self {
            HostValue::Extern(Extern::Proxy(p)) => Some(p),
            _ => None,
        }
    }

    fn as_f64(&self) -> Option<f64> {
        let v: &HostVector = self.as_vector()?;
        if v.len() != 1 {
            return None;
        }
        match &v.data {
            bridgewire_core::host::HostData::Double(x) => x[0],
            bridgewire_core::host::HostData::Integer(x) => x[0].map(f64::from),
            _ => None,
        }
    }

    fn as_str(&self) -> Option<&str> {
        self.as_vector()?.as_string()
    }

    fn as_table(&self) -> Option<&HostTable> {
        match self {
            HostValue::Table(t) => Some(t),
            _ => None,
        }
    }

    fn as_record(&self) -> Option<&HostList<Extern>> {
        self.as_list()
    }
}

/// A double vector value.
pub fn doubles(xs: &[f64]) -> Val {
    HostVector::doubles(xs).into()
}

/// A double scalar value.
pub fn double(x: f64) -> Val {
    HostVector::double(x).into()
}

/// An integer vector value.
pub fn integers(xs: &[i32]) -> Val {
    HostVector::integers(xs).into()
}

/// A string scalar value.
pub fn string(s: &str) -> Val {
    HostVector::string(s).into()
}
