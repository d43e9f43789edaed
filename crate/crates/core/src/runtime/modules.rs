//! Modules: named collections of builtin functions, struct types and
//! values, plus the scanner that lists them for import.

use alloc::format;
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::alias::ascii_alias;

use super::eval::{Args, Ctx};
use super::object::{FieldType, Function, Object, StructType};
use super::EvalError;

pub type BuiltinFn = fn(&mut Ctx<'_>, Args) -> Result<Object, EvalError>;

pub struct Builtin {
    pub module: &'static str,
    pub name: &'static str,
    pub exported: bool,
    pub func: BuiltinFn,
}

impl Builtin {
    pub fn qualified(&self) -> String {
        format!("{}.{}", self.module, self.name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolKind {
    Function,
    Type,
    Value,
}

impl SymbolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SymbolKind::Function => "function",
            SymbolKind::Type => "type",
            SymbolKind::Value => "value",
        }
    }
}

pub struct Entry {
    pub name: String,
    pub exported: bool,
    pub kind: SymbolKind,
    pub object: Object,
}

pub struct Module {
    pub name: String,
    entries: Vec<Entry>,
}

impl Module {
    pub fn new(name: &str) -> Self {
        Module { name: name.to_string(), entries: Vec::new() }
    }

    fn push(&mut self, name: &str, exported: bool, kind: SymbolKind, object: Object) {
        assert!(self.get(name).is_none(), "duplicate entry `{name}` in module {}", self.name);
        self.entries.push(Entry { name: name.to_string(), exported, kind, object });
    }

    pub fn add_builtins(&mut self, builtins: &'static [Builtin]) {
        for b in builtins {
            self.push(b.name, b.exported, SymbolKind::Function, Object::Function(Rc::new(Function::Builtin(b))));
        }
    }

    /// Declares a struct type `Module.name`. Returns the type.
    pub fn add_type(&mut self, name: &str, exported: bool, fields: &[(&str, FieldType)]) -> Rc<StructType> {
        let ty = Rc::new(StructType {
            name: format!("{}.{name}", self.name),
            fields: fields.iter().map(|(n, t)| (n.to_string(), *t)).collect(),
        });
        self.push(name, exported, SymbolKind::Type, Object::Function(Rc::new(Function::Type(ty.clone()))));
        ty
    }

    pub fn add_value(&mut self, name: &str, exported: bool, value: Object) {
        self.push(name, exported, SymbolKind::Value, value);
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }
}

/// One scanned module member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolInfo {
    pub name: String,
    pub kind: SymbolKind,
    pub alias: String,
}

#[derive(Default)]
pub struct ModuleSet {
    modules: Vec<Module>,
}

impl ModuleSet {
    pub fn empty() -> Self {
        ModuleSet::default()
    }

    /// Base, Library and Nn.
    pub fn standard() -> Self {
        let mut set = ModuleSet::empty();
        for m in super::builtins::standard_modules() {
            set.add(m);
        }
        set
    }

    pub fn add(&mut self, module: Module) {
        assert!(self.get(&module.name).is_none(), "duplicate module {}", module.name);
        self.modules.push(module);
    }

    pub fn get(&self, name: &str) -> Option<&Module> {
        self.modules.iter().find(|m| m.name == name)
    }

    /// Looks up `Module.name`, or a bare name exported from Base.
    pub fn resolve(&self, qualified: &str) -> Option<&Entry> {
        match qualified.rsplit_once('.') {
            Some((module, name)) => self.get(module)?.get(name),
            None => self.get("Base")?.get(qualified).filter(|e| e.exported),
        }
    }

    /// Finds a struct type by qualified name.
    pub fn struct_type(&self, qualified: &str) -> Option<Rc<StructType>> {
        match &self.resolve(qualified)?.object {
            Object::Function(f) => match &**f {
                Function::Type(t) if t.name == qualified => Some(t.clone()),
                _ => None,
            },
            _ => None,
        }
    }

    /// Lists module members in byte order of their names. Fails when two
    /// members would be reachable under the same name or alias.
    pub fn scan(&self, module: &str, include_unexported: bool) -> Result<Vec<SymbolInfo>, EvalError> {
        let m = self.get(module).ok_or_else(|| EvalError::new(format!("unknown module `{module}`")))?;
        let mut out: Vec<SymbolInfo> = m
            .entries
            .iter()
            .filter(|e| e.exported || include_unexported)
            .map(|e| SymbolInfo { name: e.name.clone(), kind: e.kind, alias: ascii_alias(&e.name) })
            .collect();
        out.sort_by(|a, b| a.name.as_bytes().cmp(b.name.as_bytes()));
        let mut seen: Vec<(&str, &str)> = Vec::new();
        for s in &out {
            for key in [s.name.as_str(), s.alias.as_str()] {
                if let Some((_, owner)) = seen.iter().find(|(k, owner)| *k == key && *owner != s.name) {
                    return Err(EvalError::new(format!(
                        "alias collision in module `{module}`: `{}` and `{owner}` both map to `{key}`",
                        s.name
                    )));
                }
                seen.push((key, s.name.as_str()));
            }
        }
        Ok(out)
    }
}
