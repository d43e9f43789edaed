//! Tree-walking evaluator and the conversions between runtime objects and
//! wire values.

use alloc::format;
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::types;
use crate::value::{ArrayData, FnTarget, TypedArray, Value};

use super::arith;
use super::lang::{Expr, Lit, Pos};
use super::modules::ModuleSet;
use super::object::{
    deep_translate, ArrayObj, Class, Env, FieldType, Function, Object, StructObj, StructType, TableObj,
};
use super::registry::Registry;
use super::{EvalError, Host, Runtime};

/// Deepest chain of nested function calls within one request.
pub const MAX_CALL_DEPTH: usize = 512;

/// Arguments of a builtin call. Positional and named arguments are never
/// mixed up: a builtin that takes no named arguments rejects them.
pub struct Args {
    pub positional: Vec<Object>,
    pub named: Vec<(String, Object)>,
}

impl Args {
    pub fn positional(positional: Vec<Object>) -> Self {
        Args { positional, named: Vec::new() }
    }

    /// Exactly `n` positional arguments and no named ones.
    pub fn exact(self, name: &str, n: usize) -> Result<Vec<Object>, EvalError> {
        self.no_named(name)?;
        if self.positional.len() != n {
            return Err(arity_error(name, n, self.positional.len()));
        }
        Ok(self.positional)
    }

    pub fn no_named(&self, name: &str) -> Result<(), EvalError> {
        match self.named.first() {
            Some((n, _)) => Err(EvalError::new(format!("`{name}` does not accept named argument `{n}`"))),
            None => Ok(()),
        }
    }
}

pub fn arity_error(name: &str, expected: usize, got: usize) -> EvalError {
    let plural = if expected == 1 { "" } else { "s" };
    EvalError::new(format!("`{name}` expects {expected} argument{plural}, got {got}"))
}

pub struct Ctx<'a> {
    pub rt: &'a mut Runtime,
    pub host: &'a mut dyn Host,
    depth: usize,
    calls: u64,
}

impl<'a> Ctx<'a> {
    pub fn new(rt: &'a mut Runtime, host: &'a mut dyn Host) -> Self {
        Ctx { rt, host, depth: 0, calls: 0 }
    }

    pub fn check_abort(&mut self) -> Result<(), EvalError> {
        if self.host.should_abort() {
            Err(EvalError::aborted())
        } else {
            Ok(())
        }
    }

    pub fn eval_with(&mut self, expr: &Expr, vars: Vec<(String, Object)>) -> Result<Object, EvalError> {
        let env = Rc::new(Env { vars, parent: None });
        self.eval(expr, &env)
    }

    fn eval(&mut self, expr: &Expr, env: &Rc<Env>) -> Result<Object, EvalError> {
        match expr {
            Expr::Literal(lit, _) => Ok(match lit {
                Lit::Int(i) => Object::i64(*i),
                Lit::Float(x) => Object::f64(*x),
                Lit::Str(s) => Object::str(s),
                Lit::Bool(b) => Object::bool(*b),
                Lit::Null => Object::Null,
                Lit::Missing => Object::array(TypedArray::missing_scalar(crate::ElemType::Bool)),
            }),
            Expr::Path(segments, pos) => self.resolve_path(segments, env, *pos),
            Expr::Call { target, positional, named, pos } => {
                let f = self.eval(target, env)?;
                let positional = positional.iter().map(|e| self.eval(e, env)).collect::<Result<Vec<_>, _>>()?;
                let named = named
                    .iter()
                    .map(|(n, e)| Ok((n.clone(), self.eval(e, env)?)))
                    .collect::<Result<Vec<_>, EvalError>>()?;
                self.call_function(&f, Args { positional, named }).map_err(|e| at(e, *pos))
            }
            Expr::Lambda { params, body, .. } => Ok(Object::Function(Rc::new(Function::Lambda {
                params: params.clone(),
                body: body.clone(),
                env: env.clone(),
            }))),
            Expr::BinOp { op, lhs, rhs, pos } => {
                let a = self.eval(lhs, env)?;
                let b = self.eval(rhs, env)?;
                let (Some(x), Some(y)) = (a.as_array(), b.as_array()) else {
                    return Err(at(
                        EvalError::new(format!(
                            "no method `{}` for {} and {}",
                            op.symbol(),
                            a.type_name(),
                            b.type_name()
                        )),
                        *pos,
                    ));
                };
                arith::binop(*op, x, y).map(|r| Object::Array(Rc::new(r))).map_err(|e| at(EvalError::new(e), *pos))
            }
            Expr::Neg(inner, pos) => {
                let v = self.eval(inner, env)?;
                let Some(a) = v.as_array() else {
                    return Err(at(EvalError::new(format!("no method `-` for {}", v.type_name())), *pos));
                };
                arith::neg(a).map(|r| Object::Array(Rc::new(r))).map_err(|e| at(EvalError::new(e), *pos))
            }
            Expr::ArrayLit(items, pos) => {
                let objs = items.iter().map(|e| self.eval(e, env)).collect::<Result<Vec<_>, _>>()?;
                Ok(collect_elements(objs, alloc::vec![items.len()]).map_err(|e| at(EvalError::new(e), *pos))?)
            }
        }
    }

    fn resolve_path(&mut self, segments: &[String], env: &Rc<Env>, pos: Pos) -> Result<Object, EvalError> {
        let (mut obj, rest) = if let Some(v) = env.lookup(&segments[0]) {
            (v.clone(), &segments[1..])
        } else if let Some(m) = self.rt.modules().get(&segments[0]) {
            let Some(name) = segments.get(1) else {
                return Err(at(EvalError::new(format!("module `{}` is not a value", m.name)), pos));
            };
            let entry = m
                .get(name)
                .ok_or_else(|| at(EvalError::new(format!("`{name}` is not defined in module `{}`", m.name)), pos))?;
            (entry.object.clone(), &segments[2..])
        } else if let Some(entry) = self.rt.modules().resolve(&segments[0]) {
            (entry.object.clone(), &segments[1..])
        } else {
            return Err(at(EvalError::new(format!("unknown identifier `{}`", segments[0])), pos));
        };
        for field in rest {
            obj = get_field(&obj, field).map_err(|e| at(e, pos))?;
        }
        Ok(obj)
    }

    /// Resolves the callee of a named CALL.
    pub fn resolve_callee(&self, name: &str) -> Result<Object, EvalError> {
        match self.rt.modules().resolve(name) {
            Some(e) => Ok(e.object.clone()),
            None => Err(EvalError::new(format!("unknown function `{name}`"))),
        }
    }

    pub fn lookup_ref(&self, id: u64) -> Result<Object, EvalError> {
        self.rt
            .registry()
            .get(id)
            .cloned()
            .ok_or_else(|| EvalError::new(format!("unknown reference id {id} (released or never issued)")))
    }

    pub fn call_function(&mut self, f: &Object, args: Args) -> Result<Object, EvalError> {
        let Object::Function(func) = f else {
            return Err(EvalError::new(format!("object of type {} is not callable", f.type_name())));
        };
        if self.depth >= MAX_CALL_DEPTH {
            return Err(EvalError::new("call depth limit exceeded"));
        }
        self.calls += 1;
        if self.calls.is_multiple_of(1024) {
            self.check_abort()?;
        }
        self.depth += 1;
        let out = self.call_inner(func, args);
        self.depth -= 1;
        out
    }

    fn call_inner(&mut self, func: &Rc<Function>, args: Args) -> Result<Object, EvalError> {
        match &**func {
            Function::Builtin(b) => (b.func)(self, args),
            Function::Type(t) => {
                let fields = args.exact(&t.name, t.fields.len())?;
                construct(t, fields)
            }
            Function::Lambda { params, body, env } => {
                let positional = args.exact("anonymous function", params.len())?;
                let env =
                    Rc::new(Env { vars: params.iter().cloned().zip(positional).collect(), parent: Some(env.clone()) });
                self.eval(body, &env)
            }
            Function::Callback(id) => {
                let positional = args.positional.iter().map(|o| self.to_wire(o)).collect::<Result<Vec<_>, _>>()?;
                let named = args
                    .named
                    .iter()
                    .map(|(n, o)| Ok((n.clone(), self.to_wire(o)?)))
                    .collect::<Result<Vec<_>, EvalError>>()?;
                match self.host.call_callback(self.rt, *id, positional, named) {
                    Ok(v) => self.reconstruct(v),
                    Err(e) if e.aborted => Err(EvalError::aborted()),
                    Err(e) => {
                        let mut detail = e.message.clone();
                        if !e.detail.is_empty() {
                            detail.push('\n');
                            detail.push_str(&e.detail);
                        }
                        Err(EvalError::new(format!("callback {id} failed: {}", e.message)).with_detail(detail))
                    }
                }
            }
        }
    }

    /// Reply form of an object: data for FULL shapes, a registry
    /// reference for everything else.
    pub fn to_wire(&mut self, obj: &Object) -> Result<Value, EvalError> {
        match obj.classify() {
            Class::Full => deep_translate(obj).map_err(|e| EvalError::new(e.to_string())),
            Class::Proxy => {
                let type_name = obj.type_name();
                let id = self.rt.registry_mut().register(obj.clone());
                Ok(Value::Ref { id, type_name })
            }
        }
    }

    pub fn reconstruct(&self, v: Value) -> Result<Object, EvalError> {
        Ctx::reconstruct_value(self.rt.modules(), self.rt.registry(), v)
    }

    pub fn reconstruct_args(&self, positional: Vec<Value>, named: Vec<(String, Value)>) -> Result<Args, EvalError> {
        Ok(Args {
            positional: positional.into_iter().map(|v| self.reconstruct(v)).collect::<Result<_, _>>()?,
            named: named.into_iter().map(|(n, v)| Ok((n, self.reconstruct(v)?))).collect::<Result<_, EvalError>>()?,
        })
    }

    /// Builds the runtime object a wire value denotes. Host integers (I32)
    /// widen to Int64; wrapper structs become arrays of their type; other
    /// structs go through their type constructor.
    pub fn reconstruct_value(modules: &ModuleSet, registry: &Registry, v: Value) -> Result<Object, EvalError> {
        let rec = |v| Ctx::reconstruct_value(modules, registry, v);
        Ok(match v {
            Value::Null => Object::Null,
            Value::Array(a) => Object::Array(Rc::new(ArrayObj::native(widen_host_int(a)))),
            Value::List(items) => Object::List(Rc::new(items.into_iter().map(rec).collect::<Result<_, _>>()?)),
            Value::NamedList(items) => Object::NamedList(Rc::new(
                items.into_iter().map(|(n, v)| Ok((n, rec(v)?))).collect::<Result<_, EvalError>>()?,
            )),
            Value::Struct(s) => {
                if let Some(unwrapped) = types::unwrap(&s) {
                    let (w, carrier) = unwrapped.map_err(|e| EvalError::new(e.to_string()))?;
                    return Ok(Object::Array(Rc::new(ArrayObj { wrapped: Some(w), array: carrier.clone() })));
                }
                let ty = modules
                    .struct_type(&s.type_name)
                    .ok_or_else(|| EvalError::new(format!("unknown type `{}`", s.type_name)))?;
                if s.fields.len() != ty.fields.len() {
                    return Err(EvalError::new(format!(
                        "`{}` has {} fields, got {}",
                        ty.name,
                        ty.fields.len(),
                        s.fields.len()
                    )));
                }
                let mut given = s.fields;
                let mut fields = Vec::with_capacity(ty.fields.len());
                for (name, _) in &ty.fields {
                    let i = given
                        .iter()
                        .position(|(n, _)| n == name)
                        .ok_or_else(|| EvalError::new(format!("`{}` value lacks field `{name}`", ty.name)))?;
                    fields.push(rec(given.swap_remove(i).1)?);
                }
                construct(&ty, fields)?
            }
            Value::Ref { id, .. } => registry
                .get(id)
                .cloned()
                .ok_or_else(|| EvalError::new(format!("unknown reference id {id} (released or never issued)")))?,
            Value::FnRef(FnTarget::Callback(id)) => Object::Function(Rc::new(Function::Callback(id))),
            Value::FnRef(FnTarget::Named(name)) => match modules.resolve(&name) {
                Some(e) if matches!(&e.object, Object::Function(f) if matches!(**f, Function::Builtin(_))) => {
                    e.object.clone()
                }
                _ => return Err(EvalError::new(format!("unknown function `{name}`"))),
            },
            Value::FnRef(FnTarget::TypeConstructor(name)) => match modules.struct_type(&name) {
                Some(t) => Object::Function(Rc::new(Function::Type(t))),
                None => return Err(EvalError::new(format!("unknown type `{name}`"))),
            },
            Value::Table(t) => Object::Table(Rc::new(TableObj {
                columns: t
                    .columns
                    .into_iter()
                    .map(|(n, c)| (n, Rc::new(ArrayObj::native(widen_host_int(c)))))
                    .collect(),
            })),
        })
    }
}

fn at(mut e: EvalError, pos: Pos) -> EvalError {
    if !e.aborted && !e.message.contains(" (at ") {
        e.message = format!("{} (at {pos})", e.message);
    }
    e
}

/// Plain I32 on the wire means a host integer, which the runtime holds as
/// Int64.
fn widen_host_int(a: TypedArray) -> TypedArray {
    if let ArrayData::I32(_) = a.data() {
        let (dims, data, missing) = a.into_parts();
        let ArrayData::I32(v) = data else { unreachable!() };
        TypedArray::new(dims, ArrayData::I64(v.into_iter().map(i64::from).collect()), missing).expect("same shape")
    } else {
        a
    }
}

pub fn get_field(obj: &Object, field: &str) -> Result<Object, EvalError> {
    let found = match obj {
        Object::Struct(s) => s.ty.fields.iter().position(|(n, _)| n == field).map(|i| s.fields[i].clone()),
        Object::NamedList(items) => items.iter().find(|(n, _)| n == field).map(|(_, v)| v.clone()),
        Object::Table(t) => t.columns.iter().find(|(n, _)| n == field).map(|(_, c)| Object::Array(c.clone())),
        _ => None,
    };
    found.ok_or_else(|| EvalError::new(format!("type {} has no field `{field}`", obj.type_name())))
}

/// Integer value of an integer-typed scalar, whatever its width.
pub fn int_scalar(obj: &Object) -> Option<i128> {
    let a = obj.as_array()?;
    if !a.is_scalar() || a.array.has_missing() {
        return None;
    }
    match (a.wrapped, a.array.data()) {
        (None, ArrayData::I64(v)) => Some(v[0].into()),
        (None, ArrayData::I32(v)) => Some(v[0].into()),
        (None, ArrayData::I16(v)) => Some(v[0].into()),
        (None, ArrayData::I8(v)) => Some(v[0].into()),
        (None, ArrayData::U8(v)) => Some(v[0].into()),
        (Some(w), ArrayData::I32(v)) if w.name != "Char" => Some(v[0].into()),
        (Some(w), ArrayData::U8(bytes)) if w.name.starts_with("Int") => Some(types::raw_i128(bytes, w.width, 0)),
        (Some(w), ArrayData::U8(bytes)) if w.name.starts_with("UInt") => {
            i128::try_from(types::raw_u128(bytes, w.width, 0)).ok()
        }
        (Some(w), ArrayData::F64(v)) if w.name == "UInt32" => Some(v[0] as i128),
        _ => None,
    }
}

/// Type-constructor call: checks the field count and field types, widening
/// or narrowing integers to Int64 where declared.
pub fn construct(ty: &Rc<StructType>, fields: Vec<Object>) -> Result<Object, EvalError> {
    if fields.len() != ty.fields.len() {
        return Err(super::eval::arity_error(&ty.name, ty.fields.len(), fields.len()));
    }
    let mut out = Vec::with_capacity(fields.len());
    for ((name, ft), obj) in ty.fields.iter().zip(fields) {
        let mismatch =
            || EvalError::new(format!("{}: field `{name}` expects {}, got {}", ty.name, ft.name(), obj.type_name()));
        let coerced = match ft {
            FieldType::Any => obj.clone(),
            FieldType::Int64 => {
                let v = int_scalar(&obj).ok_or_else(mismatch)?;
                Object::i64(i64::try_from(v).map_err(|_| mismatch())?)
            }
            FieldType::Float64 => match obj.as_array() {
                Some(a)
                    if a.wrapped.is_none() && a.is_scalar() && !a.array.has_missing() && a.array.as_f64().is_some() =>
                {
                    obj.clone()
                }
                _ => return Err(mismatch()),
            },
            FieldType::String => match obj.as_array() {
                Some(a)
                    if a.wrapped.is_none() && a.is_scalar() && !a.array.has_missing() && a.array.as_str().is_some() =>
                {
                    obj.clone()
                }
                _ => return Err(mismatch()),
            },
        };
        out.push(coerced);
    }
    Ok(Object::Struct(Rc::new(StructObj { ty: ty.clone(), fields: out })))
}

/// Gathers evaluated elements into one array when they are all native
/// scalars of compatible types, and into a list otherwise.
pub fn collect_elements(objs: Vec<Object>, dims: Vec<usize>) -> Result<Object, String> {
    if objs.is_empty() {
        return Ok(Object::List(Rc::new(objs)));
    }
    let scalars: Option<Vec<&TypedArray>> = objs
        .iter()
        .map(|o| match o.as_array() {
            Some(a) if a.wrapped.is_none() && a.is_scalar() => Some(&a.array),
            _ => None,
        })
        .collect();
    if let Some(parts) = scalars {
        if let Ok(joined) = arith::concat(&parts) {
            return joined.reshape(dims).map(Object::array).map_err(|e| e.to_string());
        }
    }
    Ok(Object::List(Rc::new(objs)))
}
