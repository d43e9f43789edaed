//! The server-side runtime: object registry, expression evaluator, builtin
//! modules and the request dispatcher used by each session.
//!
//! The runtime never touches I/O. A session hands it one request frame at a
//! time through [`Runtime::handle`] together with a [`Host`] that carries
//! printed output, client callbacks and interruption checks.

pub mod arith;
mod builtins;
pub mod eval;
pub mod lang;
pub mod modules;
pub mod object;
pub mod registry;

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::value::{ArrayData, TableValue, TypedArray, Value};
use crate::wire::{Callee, Frame};

pub use eval::{Args, Ctx};
pub use modules::{Builtin, Module, ModuleSet, SymbolInfo, SymbolKind};
pub use object::{deep_translate, Class, DeepError, FieldType, Object, StructType};
pub use registry::Registry;

/// Deepest stack of nested requests (callbacks calling back into the
/// runtime) a session accepts.
pub const MAX_NESTED_REQUESTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    Out,
    Err,
}

/// A client callback that did not return a value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallbackError {
    pub message: String,
    pub detail: String,
    /// The connection is gone or the client asked to stop; evaluation must
    /// unwind without replying.
    pub aborted: bool,
}

/// What the runtime needs from the session that drives it.
pub trait Host {
    /// Forwards text printed by evaluated code.
    fn emit(&mut self, channel: Channel, text: &str);

    /// Invokes client callback `id` and waits for its result. Requests the
    /// client sends meanwhile are served through `rt`.
    fn call_callback(
        &mut self,
        rt: &mut Runtime,
        id: u64,
        positional: Vec<Value>,
        named: Vec<(String, Value)>,
    ) -> Result<Value, CallbackError>;

    /// Polled by long-running evaluations. True once the client has gone
    /// away or sent something that ends the session.
    fn should_abort(&mut self) -> bool;
}

/// Evaluation failure, sent to the client as a FAIL frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalError {
    pub message: String,
    pub detail: String,
    pub aborted: bool,
}

impl EvalError {
    pub fn new(message: impl Into<String>) -> Self {
        EvalError { message: message.into(), detail: String::new(), aborted: false }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn aborted() -> Self {
        EvalError { message: "evaluation aborted".to_string(), detail: String::new(), aborted: true }
    }
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)?;
        if !self.detail.is_empty() {
            write!(f, "\n{}", self.detail)?;
        }
        Ok(())
    }
}

/// Per-session runtime state.
pub struct Runtime {
    modules: ModuleSet,
    registry: Registry,
    nesting: usize,
}

impl Default for Runtime {
    fn default() -> Self {
        Runtime::new()
    }
}

impl Runtime {
    pub fn new() -> Self {
        Runtime::with_modules(ModuleSet::standard())
    }

    pub fn with_modules(modules: ModuleSet) -> Self {
        Runtime { modules, registry: Registry::new(), nesting: 0 }
    }

    pub fn modules(&self) -> &ModuleSet {
        &self.modules
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn registry_mut(&mut self) -> &mut Registry {
        &mut self.registry
    }

    /// Serves one request frame. Returns the RESULT or FAIL reply, or
    /// `None` for frames that get no reply (RELEASE).
    pub fn handle(&mut self, host: &mut dyn Host, frame: Frame) -> Result<Option<Frame>, EvalError> {
        if let Frame::Release(id) = frame {
            self.registry.release(id);
            return Ok(None);
        }
        if self.nesting >= MAX_NESTED_REQUESTS {
            return Ok(Some(fail(&EvalError::new("too many nested requests"))));
        }
        self.nesting += 1;
        let out = self.dispatch(host, frame);
        self.nesting -= 1;
        match out {
            Ok(v) => Ok(Some(Frame::Result(v))),
            Err(e) if e.aborted => Err(e),
            Err(e) => Ok(Some(fail(&e))),
        }
    }

    fn dispatch(&mut self, host: &mut dyn Host, frame: Frame) -> Result<Value, EvalError> {
        match frame {
            Frame::Call { callee, positional, named } => self.call(host, &callee, positional, named),
            Frame::Eval(src) => self.eval(host, &src, Vec::new()),
            Frame::Let { expr, bindings } => self.eval(host, &expr, bindings),
            Frame::Fetch(id) => self.fetch(id),
            Frame::Put(v) => self.put(v),
            Frame::Scan { module, include_unexported } => self.scan(&module, include_unexported),
            other => Err(EvalError::new(alloc::format!("unexpected {:?} frame", other.kind()))),
        }
    }

    pub fn call(
        &mut self,
        host: &mut dyn Host,
        callee: &Callee,
        positional: Vec<Value>,
        named: Vec<(String, Value)>,
    ) -> Result<Value, EvalError> {
        let mut ctx = Ctx::new(self, host);
        let f = match callee {
            Callee::Named(name) => ctx.resolve_callee(name)?,
            Callee::Reference(id) => ctx.lookup_ref(*id)?,
            Callee::Callback(id) => {
                return Err(EvalError::new(alloc::format!("cannot call client callback {id} on the server")))
            }
        };
        let args = ctx.reconstruct_args(positional, named)?;
        let result = ctx.call_function(&f, args)?;
        ctx.to_wire(&result)
    }

    /// Evaluates `src` in a fresh scope holding `bindings`.
    pub fn eval(&mut self, host: &mut dyn Host, src: &str, bindings: Vec<(String, Value)>) -> Result<Value, EvalError> {
        let expr = lang::parse(src)
            .map_err(|e| EvalError::new(e.to_string()).with_detail(caret_detail(src, e.pos.line, e.pos.col)))?;
        let mut ctx = Ctx::new(self, host);
        let mut vars = Vec::with_capacity(bindings.len());
        for (name, v) in bindings {
            if vars.iter().any(|(n, _): &(String, Object)| *n == name) {
                return Err(EvalError::new(alloc::format!("duplicate binding `{name}`")));
            }
            vars.push((name, ctx.reconstruct(v)?));
        }
        let result = ctx.eval_with(&expr, vars)?;
        ctx.to_wire(&result)
    }

    pub fn fetch(&mut self, id: u64) -> Result<Value, EvalError> {
        let obj = self
            .registry
            .get(id)
            .ok_or_else(|| EvalError::new(alloc::format!("unknown reference id {id} (released or never issued)")))?;
        deep_translate(obj).map_err(|e| EvalError::new(alloc::format!("cannot translate object {id}: {e}")))
    }

    /// Stores a value and returns a reference to it.
    pub fn put(&mut self, v: Value) -> Result<Value, EvalError> {
        let obj = Ctx::reconstruct_value(&self.modules, &self.registry, v)?;
        let type_name = obj.type_name();
        let id = self.registry.register(obj);
        Ok(Value::Ref { id, type_name })
    }

    /// Module listing as a three-column table: name, kind, alias.
    pub fn scan(&self, module: &str, include_unexported: bool) -> Result<Value, EvalError> {
        let symbols = self.modules.scan(module, include_unexported)?;
        let col = |f: &dyn Fn(&SymbolInfo) -> String| {
            TypedArray::new(vec![symbols.len()], ArrayData::Str(symbols.iter().map(f).collect()), None)
                .expect("consistent column")
        };
        let table = TableValue {
            columns: vec![
                ("name".to_string(), col(&|s| s.name.clone())),
                ("kind".to_string(), col(&|s| s.kind.as_str().to_string())),
                ("alias".to_string(), col(&|s| s.alias.clone())),
            ],
        };
        Ok(Value::Table(table))
    }
}

fn fail(e: &EvalError) -> Frame {
    Frame::Fail { message: e.message.clone(), detail: e.detail.clone() }
}

/// The offending source line with a caret under the column.
fn caret_detail(src: &str, line: u32, col: u32) -> String {
    let text = src.lines().nth(line.saturating_sub(1) as usize).unwrap_or("");
    let mut out = String::from(text);
    out.push('\n');
    for _ in 1..col {
        out.push(' ');
    }
    out.push('^');
    out
}
