//! Runtime objects and their translation to wire values.

use alloc::format;
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cell::RefCell;
use core::fmt::{self, Write as _};

use crate::types::{self, Wrapped};
use crate::value::{ArrayData, ElemType, FnTarget, StructValue, TableValue, TypedArray, Value};

use super::lang::Expr;
use super::modules::Builtin;

/// An array object. Wrapped types keep their carrier array as storage.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayObj {
    pub wrapped: Option<&'static Wrapped>,
    pub array: TypedArray,
}

impl ArrayObj {
    pub fn native(array: TypedArray) -> Self {
        ArrayObj { wrapped: None, array }
    }

    pub fn elem_name(&self) -> &'static str {
        match self.wrapped {
            Some(w) => w.name,
            None => self.array.elem_type().type_name(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        match self.wrapped {
            Some(w) => w.logical_dims(&self.array),
            None => self.array.dims(),
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.dims().is_empty()
    }

    pub fn type_name(&self) -> String {
        let elem = self.elem_name();
        let dims = self.dims();
        let missing = self.array.missing().is_some();
        if dims.is_empty() {
            if self.array.has_missing() {
                return "Missing".to_string();
            }
            return elem.to_string();
        }
        if missing {
            format!("Array{{Union{{Missing, {elem}}},{}}}", dims.len())
        } else {
            format!("Array{{{elem},{}}}", dims.len())
        }
    }

    pub fn to_value(&self) -> Value {
        match self.wrapped {
            Some(w) => w.wrap(self.array.clone()),
            None => Value::Array(self.array.clone()),
        }
    }
}

/// Declared field type of a struct type.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldType {
    Any,
    Int64,
    Float64,
    String,
}

impl FieldType {
    pub fn name(self) -> &'static str {
        match self {
            FieldType::Any => "Any",
            FieldType::Int64 => "Int64",
            FieldType::Float64 => "Float64",
            FieldType::String => "String",
        }
    }
}

#[derive(Debug, PartialEq)]
pub struct StructType {
    /// Qualified name, `Module.Type`.
    pub name: String,
    pub fields: Vec<(String, FieldType)>,
}

#[derive(Debug)]
pub struct StructObj {
    pub ty: Rc<StructType>,
    pub fields: Vec<Object>,
}

#[derive(Debug)]
pub struct TableObj {
    pub columns: Vec<(String, Rc<ArrayObj>)>,
}

impl TableObj {
    pub fn nrows(&self) -> usize {
        self.columns.first().map_or(0, |(_, c)| c.array.len())
    }
}

/// Stand-in for an object holding an operating-system resource. It can be
/// passed around by reference but never translated.
#[derive(Debug)]
pub struct Resource {
    pub label: String,
}

/// Lexical scope of a lambda.
#[derive(Debug, Default)]
pub struct Env {
    pub vars: Vec<(String, Object)>,
    pub parent: Option<Rc<Env>>,
}

impl Env {
    pub fn lookup(&self, name: &str) -> Option<&Object> {
        match self.vars.iter().rev().find(|(n, _)| n == name) {
            Some((_, v)) => Some(v),
            None => self.parent.as_deref().and_then(|p| p.lookup(name)),
        }
    }
}

pub enum Function {
    Builtin(&'static Builtin),
    Type(Rc<StructType>),
    Lambda { params: Vec<String>, body: Rc<Expr>, env: Rc<Env> },
    Callback(u64),
}

impl fmt::Debug for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Function::Builtin(b) => write!(f, "Builtin({}.{})", b.module, b.name),
            Function::Type(t) => write!(f, "Type({})", t.name),
            Function::Lambda { params, .. } => write!(f, "Lambda({params:?})"),
            Function::Callback(id) => write!(f, "Callback({id})"),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Object {
    Null,
    Array(Rc<ArrayObj>),
    List(Rc<Vec<Object>>),
    NamedList(Rc<Vec<(String, Object)>>),
    Struct(Rc<StructObj>),
    Table(Rc<TableObj>),
    Function(Rc<Function>),
    Resource(Rc<Resource>),
    /// A mutable box. The only way to build a cyclic object graph.
    Cell(Rc<RefCell<Object>>),
}

/// Whether a result is sent as data or kept server-side behind a reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Class {
    Full,
    Proxy,
}

impl Object {
    pub fn array(array: TypedArray) -> Object {
        Object::Array(Rc::new(ArrayObj::native(array)))
    }

    pub fn f64(x: f64) -> Object {
        Object::array(TypedArray::scalar_f64(x))
    }

    pub fn i64(x: i64) -> Object {
        Object::array(TypedArray::scalar_i64(x))
    }

    pub fn bool(x: bool) -> Object {
        Object::array(TypedArray::scalar_bool(x))
    }

    pub fn str(s: &str) -> Object {
        Object::array(TypedArray::scalar_str(s))
    }

    pub fn as_array(&self) -> Option<&ArrayObj> {
        match self {
            Object::Array(a) => Some(a),
            _ => None,
        }
    }

    /// Address of the shared allocation, used as object identity.
    pub fn identity(&self) -> Option<usize> {
        Some(match self {
            Object::Null => return None,
            Object::Array(r) => Rc::as_ptr(r) as *const u8 as usize,
            Object::List(r) => Rc::as_ptr(r) as *const u8 as usize,
            Object::NamedList(r) => Rc::as_ptr(r) as *const u8 as usize,
            Object::Struct(r) => Rc::as_ptr(r) as *const u8 as usize,
            Object::Table(r) => Rc::as_ptr(r) as *const u8 as usize,
            Object::Function(r) => Rc::as_ptr(r) as *const u8 as usize,
            Object::Resource(r) => Rc::as_ptr(r) as *const u8 as usize,
            Object::Cell(r) => Rc::as_ptr(r) as *const u8 as usize,
        })
    }

    pub fn type_name(&self) -> String {
        match self {
            Object::Null => "Nothing".to_string(),
            Object::Array(a) => a.type_name(),
            Object::List(_) => "Base.List".to_string(),
            Object::NamedList(_) => "Base.NamedList".to_string(),
            Object::Struct(s) => s.ty.name.clone(),
            Object::Table(_) => "Base.Table".to_string(),
            Object::Function(f) => match &**f {
                Function::Type(_) => "DataType".to_string(),
                _ => "Function".to_string(),
            },
            Object::Resource(_) => "Base.Resource".to_string(),
            Object::Cell(_) => "Base.Ref".to_string(),
        }
    }

    fn is_scalar_leaf(&self) -> bool {
        match self {
            Object::Null => true,
            Object::Array(a) => a.is_scalar(),
            _ => false,
        }
    }

    /// Shape-only decision between sending data and sending a reference.
    pub fn classify(&self) -> Class {
        match self {
            Object::Null | Object::Array(_) => Class::Full,
            Object::List(items) if items.iter().all(Object::is_scalar_leaf) => Class::Full,
            Object::NamedList(items) if items.iter().all(|(_, v)| v.is_scalar_leaf()) => Class::Full,
            Object::Function(f) => match &**f {
                Function::Lambda { .. } => Class::Proxy,
                _ => Class::Full,
            },
            _ => Class::Proxy,
        }
    }

    /// Structural equality. Functions, resources and cells compare by
    /// identity.
    pub fn structurally_eq(&self, other: &Object) -> bool {
        match (self, other) {
            (Object::Null, Object::Null) => true,
            (Object::Array(a), Object::Array(b)) => a == b,
            (Object::List(a), Object::List(b)) => {
                a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.structurally_eq(y))
            }
            (Object::NamedList(a), Object::NamedList(b)) => {
                a.len() == b.len() && a.iter().zip(b.iter()).all(|((n, x), (m, y))| n == m && x.structurally_eq(y))
            }
            (Object::Struct(a), Object::Struct(b)) => {
                a.ty == b.ty
                    && a.fields.len() == b.fields.len()
                    && a.fields.iter().zip(&b.fields).all(|(x, y)| x.structurally_eq(y))
            }
            (Object::Table(a), Object::Table(b)) => {
                a.columns.len() == b.columns.len()
                    && a.columns.iter().zip(&b.columns).all(|((n, x), (m, y))| n == m && x == y)
            }
            (Object::Function(a), Object::Function(b)) => match (&**a, &**b) {
                (Function::Builtin(x), Function::Builtin(y)) => core::ptr::eq(*x, *y),
                (Function::Type(x), Function::Type(y)) => x == y,
                (Function::Callback(x), Function::Callback(y)) => x == y,
                _ => Rc::ptr_eq(a, b),
            },
            (Object::Resource(a), Object::Resource(b)) => Rc::ptr_eq(a, b),
            (Object::Cell(a), Object::Cell(b)) => Rc::ptr_eq(a, b),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DeepErrorKind {
    Cycle,
    ExternalResource,
    Untranslatable,
}

/// Deep translation failure with the path to the offending node, e.g.
/// `root.next[2]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeepError {
    pub kind: DeepErrorKind,
    pub path: String,
    pub what: String,
}

impl fmt::Display for DeepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DeepErrorKind::Cycle => write!(f, "cycle detected at {}", self.path),
            DeepErrorKind::ExternalResource => write!(f, "external resource {} at {}", self.what, self.path),
            DeepErrorKind::Untranslatable => write!(f, "{} at {} cannot be translated", self.what, self.path),
        }
    }
}

struct Deep {
    /// Identities of the containers on the current path.
    stack: Vec<usize>,
    path: String,
}

impl Deep {
    fn fail(&self, kind: DeepErrorKind, what: String) -> DeepError {
        DeepError { kind, path: self.path.clone(), what }
    }

    fn child<T>(&mut self, seg: fmt::Arguments<'_>, f: impl FnOnce(&mut Self) -> T) -> T {
        let len = self.path.len();
        let _ = self.path.write_fmt(seg);
        let out = f(self);
        self.path.truncate(len);
        out
    }

    fn enter(&mut self, obj: &Object) -> Result<Option<usize>, DeepError> {
        let Some(id) = obj.identity() else { return Ok(None) };
        if self.stack.contains(&id) {
            return Err(self.fail(DeepErrorKind::Cycle, obj.type_name()));
        }
        self.stack.push(id);
        Ok(Some(id))
    }

    fn translate(&mut self, obj: &Object) -> Result<Value, DeepError> {
        let entered = match obj {
            Object::List(_) | Object::NamedList(_) | Object::Struct(_) | Object::Cell(_) => self.enter(obj)?,
            _ => None,
        };
        let out = self.translate_inner(obj);
        if entered.is_some() {
            self.stack.pop();
        }
        out
    }

    fn translate_inner(&mut self, obj: &Object) -> Result<Value, DeepError> {
        Ok(match obj {
            Object::Null => Value::Null,
            Object::Array(a) => a.to_value(),
            Object::List(items) => Value::List(
                items
                    .iter()
                    .enumerate()
                    .map(|(i, v)| self.child(format_args!("[{}]", i + 1), |d| d.translate(v)))
                    .collect::<Result<_, _>>()?,
            ),
            Object::NamedList(items) => Value::NamedList(
                items
                    .iter()
                    .map(|(n, v)| Ok((n.clone(), self.child(format_args!(".{n}"), |d| d.translate(v))?)))
                    .collect::<Result<_, DeepError>>()?,
            ),
            Object::Struct(s) => Value::Struct(StructValue {
                type_name: s.ty.name.clone(),
                fields: s
                    .ty
                    .fields
                    .iter()
                    .zip(&s.fields)
                    .map(|((n, _), v)| Ok((n.clone(), self.child(format_args!(".{n}"), |d| d.translate(v))?)))
                    .collect::<Result<_, DeepError>>()?,
            }),
            Object::Table(t) => Value::Table(TableValue {
                columns: t.columns.iter().map(|(n, c)| (n.clone(), c.array.clone())).collect(),
            }),
            Object::Function(f) => match &**f {
                Function::Builtin(b) => Value::FnRef(FnTarget::Named(b.qualified())),
                Function::Type(t) => Value::FnRef(FnTarget::TypeConstructor(t.name.clone())),
                Function::Callback(id) => Value::FnRef(FnTarget::Callback(*id)),
                Function::Lambda { .. } => {
                    return Err(self.fail(DeepErrorKind::Untranslatable, "anonymous function".to_string()))
                }
            },
            Object::Resource(r) => {
                return Err(self.fail(DeepErrorKind::ExternalResource, format!("`{}`", r.label)));
            }
            Object::Cell(c) => {
                let inner = c.borrow().clone();
                self.child(format_args!("[]"), |d| d.translate(&inner))?
            }
        })
    }
}

/// Full recursive translation, failing on cycles, resources and closures.
pub fn deep_translate(obj: &Object) -> Result<Value, DeepError> {
    Deep { stack: Vec::new(), path: "root".to_string() }.translate(obj)
}

/// Short human-readable rendering used by `print` and `string`.
pub fn display(obj: &Object, out: &mut String) {
    match obj {
        Object::Null => out.push_str("nothing"),
        Object::Array(a) => display_array(a, out),
        Object::List(items) => {
            out.push('(');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                display(v, out);
            }
            out.push(')');
        }
        Object::NamedList(items) => {
            out.push('(');
            for (i, (n, v)) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(n);
                out.push_str(" = ");
                display(v, out);
            }
            out.push(')');
        }
        Object::Struct(s) => {
            out.push_str(&s.ty.name);
            out.push('(');
            for (i, v) in s.fields.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                display_quoted(v, out);
            }
            out.push(')');
        }
        Object::Table(t) => {
            let _ = write!(out, "{}x{} Table", t.nrows(), t.columns.len());
        }
        Object::Function(f) => match &**f {
            Function::Builtin(b) => out.push_str(&b.qualified()),
            Function::Type(t) => out.push_str(&t.name),
            Function::Lambda { .. } => out.push_str("#anonymous"),
            Function::Callback(id) => {
                let _ = write!(out, "#callback{id}");
            }
        },
        Object::Resource(r) => {
            let _ = write!(out, "Resource({})", r.label);
        }
        Object::Cell(c) => {
            out.push_str("Ref(");
            display(&c.borrow().clone(), out);
            out.push(')');
        }
    }
}

fn display_quoted(obj: &Object, out: &mut String) {
    match obj.as_array() {
        Some(a) if a.wrapped.is_none() && a.is_scalar() && !a.array.has_missing() => {
            if let Some([s]) = a.array.as_str() {
                let _ = write!(out, "{s:?}");
                return;
            }
            display(obj, out);
        }
        _ => display(obj, out),
    }
}

fn display_array(a: &ArrayObj, out: &mut String) {
    let n = a.array.len();
    let scalar = a.is_scalar();
    if !scalar {
        out.push('[');
    }
    let count = match a.wrapped {
        Some(w) if w.carrier == ElemType::U8 => n / w.width,
        _ => n,
    };
    for i in 0..count {
        if i > 0 {
            out.push_str(", ");
        }
        if a.array.is_missing(i) {
            out.push_str("missing");
            continue;
        }
        match (a.wrapped, a.array.data()) {
            (Some(w), ArrayData::U8(bytes)) => {
                if w.name.starts_with("UInt") || w.name == "Ptr" {
                    let _ = write!(out, "{}", types::raw_u128(bytes, w.width, i));
                } else {
                    let _ = write!(out, "{}", types::raw_i128(bytes, w.width, i));
                }
            }
            (Some(w), ArrayData::I32(v)) if w.name == "Char" => {
                let c = char::from_u32(v[i] as u32).unwrap_or(char::REPLACEMENT_CHARACTER);
                let _ = write!(out, "{c:?}");
            }
            (_, data) => display_elem(data, i, !scalar, out),
        }
    }
    if !scalar {
        out.push(']');
    }
}

fn display_elem(data: &ArrayData, i: usize, quote: bool, out: &mut String) {
    match data {
        ArrayData::F64(v) => fmt_float(v[i], out),
        ArrayData::F32(v) => fmt_float(f64::from(v[i]), out),
        ArrayData::I64(v) => {
            let _ = write!(out, "{}", v[i]);
        }
        ArrayData::I32(v) => {
            let _ = write!(out, "{}", v[i]);
        }
        ArrayData::I16(v) => {
            let _ = write!(out, "{}", v[i]);
        }
        ArrayData::I8(v) => {
            let _ = write!(out, "{}", v[i]);
        }
        ArrayData::U8(v) => {
            let _ = write!(out, "0x{:02x}", v[i]);
        }
        ArrayData::Bool(v) => out.push_str(if v[i] { "true" } else { "false" }),
        ArrayData::Str(v) => {
            if quote {
                let _ = write!(out, "{:?}", v[i]);
            } else {
                out.push_str(&v[i]);
            }
        }
        ArrayData::C128(v) => fmt_complex(v[i].re, v[i].im, out),
        ArrayData::C64(v) => fmt_complex(f64::from(v[i].re), f64::from(v[i].im), out),
    }
}

fn fmt_complex(re: f64, im: f64, out: &mut String) {
    fmt_float(re, out);
    if im.is_sign_negative() {
        out.push_str(" - ");
        fmt_float(-im, out);
    } else {
        out.push_str(" + ");
        fmt_float(im, out);
    }
    out.push_str("im");
}

/// Floats always show a decimal point or exponent, so `2.0` prints as
/// `2.0` rather than `2`.
pub fn fmt_float(x: f64, out: &mut String) {
    if x.is_nan() {
        out.push_str("NaN");
    } else if x.is_infinite() {
        out.push_str(if x > 0.0 { "Inf" } else { "-Inf" });
    } else if x != 0.0 && (x.abs() >= 1e16 || x.abs() < 1e-5) {
        let s = format!("{x:e}");
        match s.split_once('e') {
            Some((m, e)) if !m.contains('.') => {
                let _ = write!(out, "{m}.0e{e}");
            }
            _ => out.push_str(&s),
        }
    } else {
        let s = format!("{x}");
        out.push_str(&s);
        if !s.contains('.') {
            out.push_str(".0");
        }
    }
}

pub fn display_string(obj: &Object) -> String {
    let mut s = String::new();
    display(obj, &mut s);
    s
}
