use std::collections::BTreeMap;

use super::value::{RemoteFn, Val};
use super::{ClientError, Session};

/// One entry of a module listing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Symbol {
    pub name: String,
    /// `function`, `type` or `value`.
    pub kind: String,
    /// ASCII spelling of `name`; equal to `name` when it is already ASCII.
    pub alias: String,
}

/// A scanned module member, callable through the session that imported it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Imported {
    pub symbol: Symbol,
    pub qualified: String,
}

impl Imported {
    pub fn is_type(&self) -> bool {
        self.symbol.kind == "type"
    }

    pub fn is_function(&self) -> bool {
        self.symbol.kind == "function"
    }

    /// The member as a function value. Types keep their constructor marker
    /// so they can be passed where the server expects a type.
    pub fn to_val(&self) -> Val {
        RemoteFn { name: self.qualified.clone(), constructor: self.is_type() }.into()
    }
}

/// The members of an imported module, reachable by original name and by
/// ASCII alias.
#[derive(Clone, Debug)]
pub struct ImportedEnv {
    module: String,
    symbols: Vec<Imported>,
    index: BTreeMap<String, usize>,
}

impl ImportedEnv {
    pub(crate) fn new(module: &str, symbols: Vec<Symbol>) -> Result<ImportedEnv, ClientError> {
        let mut index = BTreeMap::new();
        let mut out = Vec::with_capacity(symbols.len());
        for (i, symbol) in symbols.into_iter().enumerate() {
            let keys = if symbol.alias == symbol.name {
                vec![symbol.name.clone()]
            } else {
                vec![symbol.name.clone(), symbol.alias.clone()]
            };
            for key in keys {
                if index.insert(key.clone(), i).is_some() {
                    return Err(ClientError::Usage(format!("module {module} lists `{key}` twice")));
                }
            }
            out.push(Imported { qualified: format!("{module}.{}", symbol.name), symbol });
        }
        Ok(ImportedEnv { module: module.to_string(), symbols: out, index })
    }

    pub fn module(&self) -> &str {
        &self.module
    }

    /// Looks a member up by original name or alias.
    pub fn get(&self, name: &str) -> Option<&Imported> {
        self.index.get(name).map(|&i| &self.symbols[i])
    }

    pub fn symbols(&self) -> &[Imported] {
        &self.symbols
    }

    /// Every key accepted by [`get`](Self::get), sorted.
    pub fn keys(&self) -> Vec<&str> {
        self.index.keys().map(String::as_str).collect()
    }

    fn member(&self, name: &str) -> Result<&Imported, ClientError> {
        self.get(name).ok_or_else(|| ClientError::Usage(format!("module {} has no member `{name}`", self.module)))
    }

    /// The member as a value that can be passed to other calls.
    pub fn function(&self, name: &str) -> Result<Val, ClientError> {
        Ok(self.member(name)?.to_val())
    }

    pub fn call(&self, session: &mut Session, name: &str, positional: Vec<Val>) -> Result<Val, ClientError> {
        self.call_with(session, name, positional, Vec::new())
    }

    pub fn call_with(
        &self,
        session: &mut Session,
        name: &str,
        positional: Vec<Val>,
        named: Vec<(&str, Val)>,
    ) -> Result<Val, ClientError> {
        let m = self.member(name)?;
        if m.symbol.kind == "value" {
            return Err(ClientError::Usage(format!("{} is a value, not a function", m.qualified)));
        }
        session.call_with(&m.qualified, positional, named)
    }

    /// Reads a non-function member.
    pub fn value(&self, session: &mut Session, name: &str) -> Result<Val, ClientError> {
        let m = self.member(name)?;
        session.eval(&m.qualified)
    }
}
