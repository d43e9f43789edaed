//! The standard modules: Base, the Library demo module and Nn.

use alloc::format;
use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use crate::value::{ArrayData, Bitmap, TypedArray};

use super::arith::{self, RealFn};
use super::eval::{arity_error, collect_elements, get_field, int_scalar, Args, Ctx};
use super::lang::BinOp;
use super::modules::{Builtin, Module};
use super::object::{display, display_string, ArrayObj, FieldType, Object, Resource, TableObj};
use super::{Channel, EvalError};

type R = Result<Object, EvalError>;

fn err(msg: impl Into<String>) -> EvalError {
    EvalError::new(msg)
}

fn array_arg<'o>(name: &str, o: &'o Object) -> Result<&'o ArrayObj, EvalError> {
    o.as_array().ok_or_else(|| err(format!("`{name}` expects an array, got {}", o.type_name())))
}

fn str_arg(name: &str, o: &Object) -> Result<String, EvalError> {
    match o.as_array() {
        Some(a) if a.wrapped.is_none() && a.is_scalar() && !a.array.has_missing() => {
            if let Some([s]) = a.array.as_str() {
                return Ok(s.clone());
            }
        }
        _ => {}
    }
    Err(err(format!("`{name}` expects a string, got {}", o.type_name())))
}

fn int_arg(name: &str, o: &Object) -> Result<i64, EvalError> {
    int_scalar(o)
        .and_then(|v| i64::try_from(v).ok())
        .ok_or_else(|| err(format!("`{name}` expects an integer, got {}", o.type_name())))
}

fn wrap(r: Result<ArrayObj, String>) -> R {
    r.map(|a| Object::Array(Rc::new(a))).map_err(err)
}

const BASE: &[Builtin] = &[
    Builtin { module: "Base", name: "add", exported: true, func: b_add },
    Builtin { module: "Base", name: "argmax", exported: true, func: b_argmax },
    Builtin { module: "Base", name: "convert", exported: true, func: b_convert },
    Builtin { module: "Base", name: "error", exported: true, func: b_error },
    Builtin { module: "Base", name: "fill", exported: true, func: b_fill },
    Builtin { module: "Base", name: "getcolumn", exported: true, func: b_getcolumn },
    Builtin { module: "Base", name: "getfield", exported: true, func: b_getfield },
    Builtin { module: "Base", name: "getref", exported: true, func: b_getref },
    Builtin { module: "Base", name: "identity", exported: true, func: b_identity },
    Builtin { module: "Base", name: "ismissing", exported: true, func: b_ismissing },
    Builtin { module: "Base", name: "isnan", exported: true, func: b_isnan },
    Builtin { module: "Base", name: "length", exported: true, func: b_length },
    Builtin { module: "Base", name: "maketable", exported: true, func: b_maketable },
    Builtin { module: "Base", name: "map", exported: true, func: b_map },
    Builtin { module: "Base", name: "namedtuple", exported: true, func: b_namedtuple },
    Builtin { module: "Base", name: "print", exported: true, func: b_print },
    Builtin { module: "Base", name: "println", exported: true, func: b_println },
    Builtin { module: "Base", name: "range", exported: true, func: b_range },
    Builtin { module: "Base", name: "ref", exported: true, func: b_ref },
    Builtin { module: "Base", name: "registrysize", exported: true, func: b_registrysize },
    Builtin { module: "Base", name: "reshape", exported: true, func: b_reshape },
    Builtin { module: "Base", name: "resource", exported: true, func: b_resource },
    Builtin { module: "Base", name: "select", exported: true, func: b_select },
    Builtin { module: "Base", name: "setref", exported: true, func: b_setref },
    Builtin { module: "Base", name: "spin", exported: true, func: b_spin },
    Builtin { module: "Base", name: "sqrt", exported: true, func: b_sqrt },
    Builtin { module: "Base", name: "string", exported: true, func: b_string },
    Builtin { module: "Base", name: "sum", exported: true, func: b_sum },
    Builtin { module: "Base", name: "tuple", exported: true, func: b_tuple },
    Builtin { module: "Base", name: "typeof", exported: true, func: b_typeof },
    Builtin { module: "Base", name: "vcat", exported: true, func: b_vcat },
    Builtin { module: "Base", name: "warn", exported: true, func: b_warn },
];

const LIBRARY: &[Builtin] = &[
    Builtin { module: "Library", name: "cite", exported: true, func: l_cite },
    Builtin { module: "Library", name: "isclassic", exported: false, func: l_isclassic },
];

const NN: &[Builtin] = &[
    Builtin { module: "Nn", name: "σ", exported: true, func: n_sigmoid },
    Builtin { module: "Nn", name: "logσ", exported: true, func: n_logsigmoid },
    Builtin { module: "Nn", name: "softplus", exported: false, func: n_softplus },
];

pub fn standard_modules() -> [Module; 3] {
    let mut base = Module::new("Base");
    base.add_builtins(BASE);
    base.add_value("pi", true, Object::f64(core::f64::consts::PI));

    let mut library = Module::new("Library");
    library.add_type(
        "Book",
        true,
        &[("author", FieldType::String), ("title", FieldType::String), ("year", FieldType::Int64)],
    );
    library.add_builtins(LIBRARY);

    let mut nn = Module::new("Nn");
    nn.add_builtins(NN);
    [base, library, nn]
}

fn b_add(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("add", 2)?;
    wrap(arith::binop(BinOp::Add, array_arg("add", &a[0])?, array_arg("add", &a[1])?))
}

/// 1-based index of the largest element. NaN counts as larger than any
/// number; missing elements are an error.
fn b_argmax(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("argmax", 1)?;
    let x = arith::lower(array_arg("argmax", &a[0])?).map_err(err)?;
    if x.has_missing() {
        return Err(err("argmax of an array with missing values"));
    }
    let v = match x.data() {
        ArrayData::F64(v) => v.clone(),
        ArrayData::F32(v) => v.iter().map(|t| f64::from(*t)).collect(),
        ArrayData::I64(v) => {
            let (i, _) = v
                .iter()
                .enumerate()
                .fold((0, i64::MIN), |best, (i, t)| if i == 0 || *t > best.1 { (i, *t) } else { best });
            return if v.is_empty() { Err(err("argmax of an empty array")) } else { Ok(Object::i64(i as i64 + 1)) };
        }
        _ => return Err(err(format!("no method `argmax` for {}", a[0].type_name()))),
    };
    if v.is_empty() {
        return Err(err("argmax of an empty array"));
    }
    let mut best = 0;
    for i in 1..v.len() {
        if v[best].is_nan() {
            break;
        }
        if v[i].is_nan() || v[i] > v[best] {
            best = i;
        }
    }
    Ok(Object::i64(best as i64 + 1))
}

fn b_convert(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("convert", 2)?;
    let target = match &a[0] {
        Object::Function(f) => match &**f {
            super::object::Function::Type(t) => t.name.clone(),
            _ => str_arg("convert", &a[0])?,
        },
        other => str_arg("convert", other)?,
    };
    wrap(arith::convert(&target, array_arg("convert", &a[1])?))
}

fn b_error(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("error", 1)?;
    Err(err(display_string(&a[0])))
}

/// `fill(x, n...)`: an array of the given dims, every element `x`.
fn b_fill(_: &mut Ctx<'_>, args: Args) -> R {
    args.no_named("fill")?;
    let Some((x, dims)) = args.positional.split_first() else { return Err(arity_error("fill", 2, 0)) };
    let x = arith::lower(array_arg("fill", x)?).map_err(err)?;
    if !x.is_scalar() {
        return Err(err("`fill` expects a scalar value"));
    }
    let dims = dims
        .iter()
        .map(|d| int_arg("fill", d).and_then(|d| usize::try_from(d).map_err(|_| err("negative dimension"))))
        .collect::<Result<Vec<_>, _>>()?;
    crate::value::element_count(&dims).map_err(|e| err(e.to_string()))?;
    let n: usize = dims.iter().product();
    let mut data = ArrayData::with_capacity(x.elem_type(), n);
    for _ in 0..n {
        data.extend_from(x.data()).map_err(|e| err(e.to_string()))?;
    }
    let missing = x.has_missing().then(|| Bitmap::from_flags(core::iter::repeat_n(true, n)));
    TypedArray::new(dims, data, missing).map(Object::array).map_err(|e| err(e.to_string()))
}

fn table_arg<'o>(name: &str, o: &'o Object) -> Result<&'o TableObj, EvalError> {
    match o {
        Object::Table(t) => Ok(t),
        other => Err(err(format!("`{name}` expects a table, got {}", other.type_name()))),
    }
}

fn b_getcolumn(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("getcolumn", 2)?;
    let t = table_arg("getcolumn", &a[0])?;
    let name = str_arg("getcolumn", &a[1])?;
    t.columns
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, c)| Object::Array(c.clone()))
        .ok_or_else(|| err(format!("table has no column `{name}`")))
}

fn b_getfield(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("getfield", 2)?;
    get_field(&a[0], &str_arg("getfield", &a[1])?)
}

fn b_getref(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("getref", 1)?;
    match &a[0] {
        Object::Cell(c) => Ok(c.borrow().clone()),
        other => Err(err(format!("`getref` expects a Base.Ref, got {}", other.type_name()))),
    }
}

fn b_identity(_: &mut Ctx<'_>, args: Args) -> R {
    let mut a = args.exact("identity", 1)?;
    Ok(a.remove(0))
}

fn bool_map(name: &str, o: &Object, f: impl Fn(&TypedArray, usize) -> bool) -> R {
    let x = arith::lower(array_arg(name, o)?).map_err(err)?;
    let v = (0..x.len()).map(|i| f(&x, i)).collect();
    TypedArray::new(x.dims().to_vec(), ArrayData::Bool(v), None).map(Object::array).map_err(|e| err(e.to_string()))
}

fn b_ismissing(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("ismissing", 1)?;
    if !matches!(a[0], Object::Array(_)) {
        return Ok(Object::bool(false));
    }
    bool_map("ismissing", &a[0], |x, i| x.is_missing(i))
}

/// Missing elements stay missing.
fn b_isnan(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("isnan", 1)?;
    let x = arith::lower(array_arg("isnan", &a[0])?).map_err(err)?;
    let v: Vec<bool> = match x.data() {
        ArrayData::F64(v) => v.iter().map(|t| t.is_nan()).collect(),
        ArrayData::F32(v) => v.iter().map(|t| t.is_nan()).collect(),
        ArrayData::C128(v) => v.iter().map(|c| c.re.is_nan() || c.im.is_nan()).collect(),
        ArrayData::C64(v) => v.iter().map(|c| c.re.is_nan() || c.im.is_nan()).collect(),
        ArrayData::Str(_) => return Err(err(format!("no method `isnan` for {}", a[0].type_name()))),
        d => vec![false; d.len()],
    };
    TypedArray::new(x.dims().to_vec(), ArrayData::Bool(v), x.missing().cloned())
        .map(Object::array)
        .map_err(|e| err(e.to_string()))
}

fn b_length(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("length", 1)?;
    let n = match &a[0] {
        Object::Array(x) => x.dims().iter().product(),
        Object::List(items) => items.len(),
        Object::NamedList(items) => items.len(),
        Object::Table(t) => t.nrows(),
        Object::Null => 0,
        other => return Err(err(format!("no method `length` for {}", other.type_name()))),
    };
    Ok(Object::i64(n as i64))
}

/// `maketable(; x = [..], y = [..])` or `maketable(namedtuple)`. Columns keep
/// the given order and must all be native vectors of one length.
fn b_maketable(_: &mut Ctx<'_>, args: Args) -> R {
    let cols: Vec<(String, Object)> = match (args.positional.as_slice(), args.named.is_empty()) {
        ([], _) => args.named,
        ([Object::NamedList(items)], true) => items.as_ref().clone(),
        (p, _) => return Err(err(format!("`maketable` expects named columns, got {} positional arguments", p.len()))),
    };
    let mut columns = Vec::with_capacity(cols.len());
    for (name, obj) in cols {
        let a = match obj {
            Object::Array(a) if a.wrapped.is_none() => a,
            other => return Err(err(format!("column `{name}` must be a native array, got {}", other.type_name()))),
        };
        let a = if a.array.ndims() == 1 {
            a
        } else if a.array.ndims() == 0 {
            let len = a.array.len();
            Rc::new(ArrayObj::native(a.array.clone().reshape(vec![len]).map_err(|e| err(e.to_string()))?))
        } else {
            return Err(err(format!("column `{name}` must be a vector")));
        };
        if columns.iter().any(|(n, _): &(String, _)| *n == name) {
            return Err(err(format!("duplicate column `{name}`")));
        }
        columns.push((name, a));
    }
    let t = TableObj { columns };
    if let Some((n, c)) = t.columns.iter().find(|(_, c)| c.array.len() != t.nrows()) {
        return Err(err(format!("column `{n}` has {} rows, expected {}", c.array.len(), t.nrows())));
    }
    Ok(Object::Table(Rc::new(t)))
}

/// `map(f, xs...)`: applies `f` elementwise over one or more collections of
/// equal length.
fn b_map(ctx: &mut Ctx<'_>, args: Args) -> R {
    args.no_named("map")?;
    let mut it = args.positional.into_iter();
    let Some(f) = it.next() else { return Err(arity_error("map", 2, 0)) };
    let colls: Vec<Object> = it.collect();
    if colls.is_empty() {
        return Err(arity_error("map", 2, 1));
    }
    let mut dims = None;
    let mut seqs = Vec::with_capacity(colls.len());
    for c in &colls {
        let (items, d) = elements(c)?;
        if let Some(prev) = &dims {
            if *prev != d {
                return Err(err("`map` collections must have the same shape"));
            }
        } else {
            dims = Some(d);
        }
        seqs.push(items);
    }
    let n = seqs[0].len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        ctx.check_abort()?;
        let positional = seqs.iter().map(|s| s[i].clone()).collect();
        out.push(ctx.call_function(&f, Args::positional(positional))?);
    }
    collect_elements(out, dims.unwrap_or_default()).map_err(err)
}

/// The elements of a collection as objects, with the collection's dims.
fn elements(o: &Object) -> Result<(Vec<Object>, Vec<usize>), EvalError> {
    match o {
        Object::Array(a) => {
            let x = arith::lower(a).map_err(err)?;
            let n = x.len();
            let dims = if x.is_scalar() { Vec::new() } else { x.dims().to_vec() };
            Ok(((0..n).map(|i| Object::array(x.element(i))).collect(), dims))
        }
        Object::List(items) => Ok((items.as_ref().clone(), vec![items.len()])),
        Object::NamedList(items) => Ok((items.iter().map(|(_, v)| v.clone()).collect(), vec![items.len()])),
        other => Err(err(format!("cannot iterate over {}", other.type_name()))),
    }
}

fn b_namedtuple(_: &mut Ctx<'_>, args: Args) -> R {
    if !args.positional.is_empty() {
        return Err(err("`namedtuple` takes only named arguments"));
    }
    Ok(Object::NamedList(Rc::new(args.named)))
}

fn print_args(ctx: &mut Ctx<'_>, name: &str, args: Args, newline: bool) -> R {
    args.no_named(name)?;
    let mut s = String::new();
    for a in &args.positional {
        display(a, &mut s);
    }
    if newline {
        s.push('\n');
    }
    ctx.host.emit(Channel::Out, &s);
    Ok(Object::Null)
}

fn b_print(ctx: &mut Ctx<'_>, args: Args) -> R {
    print_args(ctx, "print", args, false)
}

fn b_println(ctx: &mut Ctx<'_>, args: Args) -> R {
    print_args(ctx, "println", args, true)
}

/// `range(a, b)`: the Int64 vector a, a+1, ..., b.
fn b_range(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("range", 2)?;
    let (lo, hi) = (int_arg("range", &a[0])?, int_arg("range", &a[1])?);
    let n = if hi < lo { 0 } else { (hi as i128 - lo as i128 + 1) as u128 };
    if n > crate::value::MAX_ELEMENTS as u128 {
        return Err(err("range too long"));
    }
    Ok(Object::array(TypedArray::vector(ArrayData::I64((lo..=hi).collect()))))
}

fn b_ref(_: &mut Ctx<'_>, args: Args) -> R {
    let mut a = args.exact("ref", 1)?;
    Ok(Object::Cell(Rc::new(RefCell::new(a.remove(0)))))
}

fn b_registrysize(ctx: &mut Ctx<'_>, args: Args) -> R {
    args.exact("registrysize", 0)?;
    Ok(Object::i64(ctx.rt.registry().len() as i64))
}

fn b_reshape(_: &mut Ctx<'_>, args: Args) -> R {
    args.no_named("reshape")?;
    let Some((x, dims)) = args.positional.split_first() else { return Err(arity_error("reshape", 2, 0)) };
    let x = arith::lower(array_arg("reshape", x)?).map_err(err)?;
    let dims = dims
        .iter()
        .map(|d| int_arg("reshape", d).and_then(|d| usize::try_from(d).map_err(|_| err("negative dimension"))))
        .collect::<Result<Vec<_>, _>>()?;
    x.reshape(dims).map(Object::array).map_err(|e| err(e.to_string()))
}

/// An object standing for an operating-system handle.
fn b_resource(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("resource", 1)?;
    Ok(Object::Resource(Rc::new(Resource { label: str_arg("resource", &a[0])? })))
}

fn b_select(_: &mut Ctx<'_>, args: Args) -> R {
    args.no_named("select")?;
    let Some((t, names)) = args.positional.split_first() else { return Err(arity_error("select", 2, 0)) };
    let t = table_arg("select", t)?;
    let mut columns = Vec::with_capacity(names.len());
    for n in names {
        let name = str_arg("select", n)?;
        let col =
            t.columns.iter().find(|(c, _)| *c == name).ok_or_else(|| err(format!("table has no column `{name}`")))?;
        columns.push(col.clone());
    }
    Ok(Object::Table(Rc::new(TableObj { columns })))
}

fn b_setref(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("setref", 2)?;
    match &a[0] {
        Object::Cell(c) => {
            *c.borrow_mut() = a[1].clone();
            Ok(a[1].clone())
        }
        other => Err(err(format!("`setref` expects a Base.Ref, got {}", other.type_name()))),
    }
}

/// Loops until the host reports the evaluation should stop.
fn b_spin(ctx: &mut Ctx<'_>, args: Args) -> R {
    args.exact("spin", 0)?;
    loop {
        ctx.check_abort()?;
        core::hint::spin_loop();
    }
}

const SQRT: RealFn = RealFn { name: "sqrt", f: libm::sqrt, domain: |x| !(x < 0.0), complex: Some(arith::complex_sqrt) };

fn b_sqrt(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("sqrt", 1)?;
    wrap(arith::map_real(&SQRT, array_arg("sqrt", &a[0])?))
}

fn b_string(_: &mut Ctx<'_>, args: Args) -> R {
    args.no_named("string")?;
    let mut s = String::new();
    for a in &args.positional {
        display(a, &mut s);
    }
    Ok(Object::str(&s))
}

fn b_sum(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("sum", 1)?;
    arith::sum(array_arg("sum", &a[0])?).map(Object::array).map_err(err)
}

fn b_tuple(_: &mut Ctx<'_>, args: Args) -> R {
    args.no_named("tuple")?;
    Ok(Object::List(Rc::new(args.positional)))
}

fn b_typeof(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("typeof", 1)?;
    Ok(Object::str(&a[0].type_name()))
}

fn b_vcat(_: &mut Ctx<'_>, args: Args) -> R {
    args.no_named("vcat")?;
    if args.positional.is_empty() {
        return Ok(Object::List(Rc::new(Vec::new())));
    }
    let parts = args.positional.iter().map(|o| array_arg("vcat", o)).collect::<Result<Vec<_>, _>>()?;
    wrap(arith::vcat(&parts))
}

fn b_warn(ctx: &mut Ctx<'_>, args: Args) -> R {
    args.no_named("warn")?;
    let mut s = String::from("Warning: ");
    for a in &args.positional {
        display(a, &mut s);
    }
    s.push('\n');
    ctx.host.emit(Channel::Err, &s);
    Ok(Object::Null)
}

fn book_arg<'o>(name: &str, o: &'o Object) -> Result<&'o super::object::StructObj, EvalError> {
    match o {
        Object::Struct(s) if s.ty.name == "Library.Book" => Ok(s),
        other => Err(err(format!("`{name}` expects a Library.Book, got {}", other.type_name()))),
    }
}

fn l_cite(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("cite", 1)?;
    let b = book_arg("cite", &a[0])?;
    Ok(Object::str(&format!(
        "{}: {} ({})",
        display_string(&b.fields[0]),
        display_string(&b.fields[1]),
        display_string(&b.fields[2])
    )))
}

fn l_isclassic(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("isclassic", 1)?;
    let b = book_arg("isclassic", &a[0])?;
    Ok(Object::bool(int_scalar(&b.fields[2]).is_some_and(|y| y < 1900)))
}

fn softplus(x: f64) -> f64 {
    // log(1 + e^x) without overflow for large x.
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

const SIGMOID: RealFn = RealFn { name: "σ", f: |x| 1.0 / (1.0 + libm::exp(-x)), domain: |_| true, complex: None };
const LOGSIGMOID: RealFn = RealFn { name: "logσ", f: |x| -softplus(-x), domain: |_| true, complex: None };
const SOFTPLUS: RealFn = RealFn { name: "softplus", f: softplus, domain: |_| true, complex: None };

fn n_sigmoid(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("σ", 1)?;
    wrap(arith::map_real(&SIGMOID, array_arg("σ", &a[0])?))
}

fn n_logsigmoid(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("logσ", 1)?;
    wrap(arith::map_real(&LOGSIGMOID, array_arg("logσ", &a[0])?))
}

fn n_softplus(_: &mut Ctx<'_>, args: Args) -> R {
    let a = args.exact("softplus", 1)?;
    wrap(arith::map_real(&SOFTPLUS, array_arg("softplus", &a[0])?))
}
