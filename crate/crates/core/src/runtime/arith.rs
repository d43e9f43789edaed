//! Elementwise numeric operations, type promotion and conversion.
//!
//! Wrapped element types are lowered to their natural native type before
//! arithmetic (`Int32` and `UInt16` to Int64, `Float16` to Float64, ...), so
//! results are always native arrays. Integer arithmetic wraps on overflow.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::types::{self, Wrapped};
use crate::value::{ArrayData, Bitmap, Complex32, Complex64, ElemType, TypedArray};

use super::lang::BinOp;
use super::object::ArrayObj;

/// Promoted element type of an arithmetic operation between two types.
pub fn promote(a: ElemType, b: ElemType) -> Option<ElemType> {
    use ElemType::*;
    if a == Str || b == Str {
        return None;
    }
    let single = |t: ElemType| matches!(t, F32 | C64) || t.is_integer() || t == Bool;
    Some(if a.is_complex() || b.is_complex() {
        if single(a) && single(b) {
            C64
        } else {
            C128
        }
    } else if a.is_float() || b.is_float() {
        if a == F64 || b == F64 {
            F64
        } else {
            F32
        }
    } else if a == b && a != Bool {
        a
    } else {
        I64
    })
}

/// Converts a wrapped array to the native array arithmetic works on.
pub fn lower(a: &ArrayObj) -> Result<TypedArray, String> {
    let Some(w) = a.wrapped else { return Ok(a.array.clone()) };
    let dims = w.logical_dims(&a.array).to_vec();
    let missing = a.array.missing().cloned();
    let data = match a.array.data() {
        ArrayData::I32(v) => ArrayData::I64(v.iter().map(|x| i64::from(*x)).collect()),
        ArrayData::F64(v) if w.name == "UInt32" => ArrayData::I64(v.iter().map(|x| *x as i64).collect()),
        ArrayData::F64(v) => ArrayData::F64(v.clone()),
        ArrayData::C128(v) => ArrayData::C128(v.clone()),
        ArrayData::U8(bytes) => {
            let n = bytes.len() / w.width;
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let v = if w.name.starts_with("Int") {
                    types::raw_i128(bytes, w.width, i)
                } else {
                    i128::try_from(types::raw_u128(bytes, w.width, i)).unwrap_or(i128::MAX)
                };
                out.push(i64::try_from(v).map_err(|_| format!("{} value {v} does not fit Int64", w.name))?);
            }
            ArrayData::I64(out)
        }
        other => return Err(format!("malformed {} carrier of type {}", w.name, other.elem_type().type_name())),
    };
    TypedArray::new(dims, data, missing).map_err(|e| e.to_string())
}

fn to_i64(data: &ArrayData) -> Option<Vec<i64>> {
    Some(match data {
        ArrayData::I64(v) => v.clone(),
        ArrayData::I32(v) => v.iter().map(|x| i64::from(*x)).collect(),
        ArrayData::I16(v) => v.iter().map(|x| i64::from(*x)).collect(),
        ArrayData::I8(v) => v.iter().map(|x| i64::from(*x)).collect(),
        ArrayData::U8(v) => v.iter().map(|x| i64::from(*x)).collect(),
        ArrayData::Bool(v) => v.iter().map(|x| i64::from(*x)).collect(),
        _ => return None,
    })
}

fn to_f64(data: &ArrayData) -> Option<Vec<f64>> {
    Some(match data {
        ArrayData::F64(v) => v.clone(),
        ArrayData::F32(v) => v.iter().map(|x| f64::from(*x)).collect(),
        other => to_i64(other)?.into_iter().map(|x| x as f64).collect(),
    })
}

fn to_c128(data: &ArrayData) -> Option<Vec<Complex64>> {
    Some(match data {
        ArrayData::C128(v) => v.clone(),
        ArrayData::C64(v) => v.iter().map(|c| Complex64::new(c.re.into(), c.im.into())).collect(),
        other => to_f64(other)?.into_iter().map(|x| Complex64::new(x, 0.0)).collect(),
    })
}

/// Casts along the promotion lattice. Fails for strings and for
/// narrowing casts promotion never asks for.
fn cast(data: &ArrayData, to: ElemType) -> Result<ArrayData, String> {
    if data.elem_type() == to {
        return Ok(data.clone());
    }
    let fail = || format!("cannot promote {} to {}", data.elem_type().type_name(), to.type_name());
    Ok(match to {
        ElemType::I64 => ArrayData::I64(to_i64(data).ok_or_else(fail)?),
        ElemType::F64 => ArrayData::F64(to_f64(data).ok_or_else(fail)?),
        ElemType::F32 => ArrayData::F32(to_f64(data).ok_or_else(fail)?.into_iter().map(|x| x as f32).collect()),
        ElemType::C128 => ArrayData::C128(to_c128(data).ok_or_else(fail)?),
        ElemType::C64 => ArrayData::C64(
            to_c128(data).ok_or_else(fail)?.into_iter().map(|c| Complex32::new(c.re as f32, c.im as f32)).collect(),
        ),
        _ => return Err(fail()),
    })
}

/// Result dims and bitmap of a scalar-broadcasting binary operation.
fn broadcast_shape(a: &TypedArray, b: &TypedArray) -> Result<(Vec<usize>, Option<Bitmap>), String> {
    let dims = if a.dims() == b.dims() || b.is_scalar() {
        a.dims().to_vec()
    } else if a.is_scalar() {
        b.dims().to_vec()
    } else {
        return Err(format!("dimension mismatch: {:?} and {:?}", a.dims(), b.dims()));
    };
    let n: usize = dims.iter().product();
    let missing = if a.has_missing() || b.has_missing() {
        let at = |x: &TypedArray, i: usize| if x.is_scalar() { x.is_missing(0) } else { x.is_missing(i) };
        Some(Bitmap::from_flags((0..n).map(|i| at(a, i) || at(b, i))))
    } else {
        None
    };
    Ok((dims, missing))
}

fn zip_with<T: Copy, U>(x: &[T], y: &[T], n: usize, f: impl Fn(T, T) -> U) -> Vec<U> {
    let xi = |i: usize| if x.len() == 1 { x[0] } else { x[i] };
    let yi = |i: usize| if y.len() == 1 { y[0] } else { y[i] };
    (0..n).map(|i| f(xi(i), yi(i))).collect()
}

fn c128_op(op: BinOp, x: Complex64, y: Complex64) -> Complex64 {
    match op {
        BinOp::Add => Complex64::new(x.re + y.re, x.im + y.im),
        BinOp::Sub => Complex64::new(x.re - y.re, x.im - y.im),
        BinOp::Mul => Complex64::new(x.re * y.re - x.im * y.im, x.re * y.im + x.im * y.re),
        BinOp::Div => {
            let d = y.re * y.re + y.im * y.im;
            Complex64::new((x.re * y.re + x.im * y.im) / d, (x.im * y.re - x.re * y.im) / d)
        }
    }
}

fn c64_op(op: BinOp, x: Complex32, y: Complex32) -> Complex32 {
    let r = c128_op(op, Complex64::new(x.re.into(), x.im.into()), Complex64::new(y.re.into(), y.im.into()));
    Complex32::new(r.re as f32, r.im as f32)
}

macro_rules! int_op {
    ($op:expr, $x:expr, $y:expr, $n:expr) => {
        match $op {
            BinOp::Add => zip_with($x, $y, $n, |a, b| a.wrapping_add(b)),
            BinOp::Sub => zip_with($x, $y, $n, |a, b| a.wrapping_sub(b)),
            BinOp::Mul => zip_with($x, $y, $n, |a, b| a.wrapping_mul(b)),
            BinOp::Div => unreachable!("integer division goes through Float64"),
        }
    };
}

macro_rules! float_op {
    ($op:expr, $x:expr, $y:expr, $n:expr) => {
        match $op {
            BinOp::Add => zip_with($x, $y, $n, |a, b| a + b),
            BinOp::Sub => zip_with($x, $y, $n, |a, b| a - b),
            BinOp::Mul => zip_with($x, $y, $n, |a, b| a * b),
            BinOp::Div => zip_with($x, $y, $n, |a, b| a / b),
        }
    };
}

/// Elementwise `a op b` with scalar broadcast and missing propagation.
pub fn binop(op: BinOp, a: &ArrayObj, b: &ArrayObj) -> Result<ArrayObj, String> {
    let (x, y) = (lower(a)?, lower(b)?);
    let no_method = || format!("no method `{}` for {} and {}", op.symbol(), a.type_name(), b.type_name());
    let mut ty = promote(x.elem_type(), y.elem_type()).ok_or_else(no_method)?;
    if op == BinOp::Div && (ty.is_integer() || ty == ElemType::Bool) {
        ty = ElemType::F64;
    }
    let (dims, missing) = broadcast_shape(&x, &y)?;
    let n: usize = dims.iter().product();
    let (cx, cy) = (cast(x.data(), ty)?, cast(y.data(), ty)?);
    let data = match (&cx, &cy) {
        (ArrayData::I64(p), ArrayData::I64(q)) => ArrayData::I64(int_op!(op, p, q, n)),
        (ArrayData::I32(p), ArrayData::I32(q)) => ArrayData::I32(int_op!(op, p, q, n)),
        (ArrayData::I16(p), ArrayData::I16(q)) => ArrayData::I16(int_op!(op, p, q, n)),
        (ArrayData::I8(p), ArrayData::I8(q)) => ArrayData::I8(int_op!(op, p, q, n)),
        (ArrayData::U8(p), ArrayData::U8(q)) => ArrayData::U8(int_op!(op, p, q, n)),
        (ArrayData::F64(p), ArrayData::F64(q)) => ArrayData::F64(float_op!(op, p, q, n)),
        (ArrayData::F32(p), ArrayData::F32(q)) => ArrayData::F32(float_op!(op, p, q, n)),
        (ArrayData::C128(p), ArrayData::C128(q)) => ArrayData::C128(zip_with(p, q, n, |a, b| c128_op(op, a, b))),
        (ArrayData::C64(p), ArrayData::C64(q)) => ArrayData::C64(zip_with(p, q, n, |a, b| c64_op(op, a, b))),
        _ => return Err(no_method()),
    };
    TypedArray::new(dims, data, missing).map(ArrayObj::native).map_err(|e| e.to_string())
}

pub fn neg(a: &ArrayObj) -> Result<ArrayObj, String> {
    let x = lower(a)?;
    let data = match x.data() {
        ArrayData::I64(v) => ArrayData::I64(v.iter().map(|x| x.wrapping_neg()).collect()),
        ArrayData::I32(v) => ArrayData::I32(v.iter().map(|x| x.wrapping_neg()).collect()),
        ArrayData::I16(v) => ArrayData::I16(v.iter().map(|x| x.wrapping_neg()).collect()),
        ArrayData::I8(v) => ArrayData::I8(v.iter().map(|x| x.wrapping_neg()).collect()),
        ArrayData::U8(v) => ArrayData::U8(v.iter().map(|x| x.wrapping_neg()).collect()),
        ArrayData::Bool(_) => ArrayData::I64(to_i64(x.data()).unwrap().into_iter().map(|x| -x).collect()),
        ArrayData::F64(v) => ArrayData::F64(v.iter().map(|x| -x).collect()),
        ArrayData::F32(v) => ArrayData::F32(v.iter().map(|x| -x).collect()),
        ArrayData::C128(v) => ArrayData::C128(v.iter().map(|c| Complex64::new(-c.re, -c.im)).collect()),
        ArrayData::C64(v) => ArrayData::C64(v.iter().map(|c| Complex32::new(-c.re, -c.im)).collect()),
        ArrayData::Str(_) => return Err(format!("no method `-` for {}", a.type_name())),
    };
    TypedArray::new(x.dims().to_vec(), data, x.missing().cloned()).map(ArrayObj::native).map_err(|e| e.to_string())
}

/// A real function of one argument, applied elementwise.
pub struct RealFn {
    pub name: &'static str,
    pub f: fn(f64) -> f64,
    /// Arguments outside the domain raise a DomainError.
    pub domain: fn(f64) -> bool,
    pub complex: Option<fn(Complex64) -> Complex64>,
}

/// Applies `rf` elementwise. Integers and Bool compute in Float64, Float32
/// stays Float32, complex arrays use the complex variant if there is one.
/// Missing elements stay missing and are never evaluated.
pub fn map_real(rf: &RealFn, a: &ArrayObj) -> Result<ArrayObj, String> {
    let x = lower(a)?;
    let present = |i: usize| !x.is_missing(i);
    let check = |v: &[f64]| -> Result<(), String> {
        for (i, &t) in v.iter().enumerate() {
            if present(i) && !(rf.domain)(t) {
                return Err(format!("DomainError with {}: {} is not defined for this argument", fmt_num(t), rf.name));
            }
        }
        Ok(())
    };
    let data = match x.data() {
        ArrayData::Str(_) => return Err(format!("no method `{}` for {}", rf.name, a.type_name())),
        ArrayData::C128(v) if rf.complex.is_some() => {
            ArrayData::C128(v.iter().map(|c| (rf.complex.unwrap())(*c)).collect())
        }
        ArrayData::C64(_) if rf.complex.is_some() => {
            let g = rf.complex.unwrap();
            ArrayData::C64(
                v_c128(x.data())
                    .into_iter()
                    .map(|c| {
                        let r = g(c);
                        Complex32::new(r.re as f32, r.im as f32)
                    })
                    .collect(),
            )
        }
        ArrayData::C128(_) | ArrayData::C64(_) => return Err(format!("no method `{}` for {}", rf.name, a.type_name())),
        ArrayData::F32(v) => {
            let wide: Vec<f64> = v.iter().map(|t| f64::from(*t)).collect();
            check(&wide)?;
            ArrayData::F32(wide.into_iter().map(|t| (rf.f)(t) as f32).collect())
        }
        other => {
            let v = to_f64(other).expect("real numeric");
            check(&v)?;
            ArrayData::F64(v.into_iter().map(rf.f).collect())
        }
    };
    TypedArray::new(x.dims().to_vec(), data, x.missing().cloned()).map(ArrayObj::native).map_err(|e| e.to_string())
}

fn v_c128(data: &ArrayData) -> Vec<Complex64> {
    to_c128(data).expect("complex data")
}

fn fmt_num(x: f64) -> String {
    let mut s = String::new();
    super::object::fmt_float(x, &mut s);
    s
}

pub fn complex_sqrt(z: Complex64) -> Complex64 {
    if z.re == 0.0 && z.im == 0.0 {
        return Complex64::new(0.0, z.im);
    }
    let r = libm::hypot(z.re, z.im);
    let re = libm::sqrt((r + z.re) / 2.0);
    let im = libm::sqrt((r - z.re) / 2.0);
    Complex64::new(re, if z.im.is_sign_negative() { -im } else { im })
}

/// Sum of all elements. Any missing element makes the sum missing. Small
/// integers and Bool sum as Int64.
pub fn sum(a: &ArrayObj) -> Result<TypedArray, String> {
    let x = lower(a)?;
    let ty = match x.elem_type() {
        ElemType::Str => return Err(format!("no method `sum` for {}", a.type_name())),
        t if t.is_integer() || t == ElemType::Bool => ElemType::I64,
        t => t,
    };
    if x.has_missing() {
        return Ok(TypedArray::missing_scalar(ty));
    }
    let data = match cast(x.data(), ty)? {
        ArrayData::I64(v) => ArrayData::I64(vec![v.iter().fold(0i64, |s, t| s.wrapping_add(*t))]),
        ArrayData::F64(v) => ArrayData::F64(vec![v.iter().sum()]),
        ArrayData::F32(v) => ArrayData::F32(vec![v.iter().sum()]),
        ArrayData::C128(v) => {
            ArrayData::C128(vec![v.iter().fold(Complex64::default(), |s, t| Complex64::new(s.re + t.re, s.im + t.im))])
        }
        ArrayData::C64(v) => {
            ArrayData::C64(vec![v.iter().fold(Complex32::default(), |s, t| Complex32::new(s.re + t.re, s.im + t.im))])
        }
        _ => unreachable!(),
    };
    TypedArray::scalar(data).map_err(|e| e.to_string())
}

/// Concatenates scalars and vectors into one vector, promoting numeric
/// element types. Strings only concatenate with strings.
pub fn concat(parts: &[&TypedArray]) -> Result<TypedArray, String> {
    let Some(first) = parts.first() else {
        return Err("nothing to concatenate".to_string());
    };
    let mut ty = first.elem_type();
    for p in &parts[1..] {
        let t = p.elem_type();
        if t != ty {
            ty =
                promote(ty, t).ok_or_else(|| format!("cannot concatenate {} and {}", ty.type_name(), t.type_name()))?;
        }
    }
    let total: usize = parts.iter().map(|p| p.len()).sum();
    let mut data = ArrayData::with_capacity(ty, total);
    let any_missing = parts.iter().any(|p| p.missing().is_some());
    let mut flags = Vec::new();
    for p in parts {
        if p.ndims() > 1 {
            return Err(format!("cannot concatenate an array of {} dimensions", p.ndims()));
        }
        data.extend_from(&cast(p.data(), ty)?).map_err(|e| e.to_string())?;
        if any_missing {
            flags.extend((0..p.len()).map(|i| p.is_missing(i)));
        }
    }
    let missing = any_missing.then(|| Bitmap::from_flags(flags));
    TypedArray::new(vec![total], data, missing).map_err(|e| e.to_string())
}

/// Concatenation of array objects, lowering wrapped types first.
pub fn vcat(parts: &[&ArrayObj]) -> Result<ArrayObj, String> {
    let lowered = parts.iter().map(|a| lower(a)).collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&TypedArray> = lowered.iter().collect();
    concat(&refs).map(ArrayObj::native)
}

/// A number as read for conversion.
#[derive(Clone, Copy)]
enum Num {
    Int(i128),
    /// Unsigned values above `i128::MAX`.
    Big(u128),
    Real(f64),
    Cplx(f64, f64),
}

fn read_nums(a: &ArrayObj) -> Result<Vec<Num>, String> {
    let unsupported = || format!("cannot convert {}", a.type_name());
    if let Some(w) = a.wrapped {
        return Ok(match a.array.data() {
            ArrayData::U8(bytes) => (0..bytes.len() / w.width)
                .map(|i| {
                    if w.name.starts_with("Int") {
                        Num::Int(types::raw_i128(bytes, w.width, i))
                    } else {
                        let u = types::raw_u128(bytes, w.width, i);
                        i128::try_from(u).map_or(Num::Big(u), Num::Int)
                    }
                })
                .collect(),
            ArrayData::I32(v) => v.iter().map(|x| Num::Int((*x).into())).collect(),
            ArrayData::F64(v) if w.name == "UInt32" => v.iter().map(|x| Num::Int(*x as i128)).collect(),
            ArrayData::F64(v) => v.iter().map(|x| Num::Real(*x)).collect(),
            ArrayData::C128(v) => v.iter().map(|c| Num::Cplx(c.re, c.im)).collect(),
            _ => return Err(unsupported()),
        });
    }
    Ok(match a.array.data() {
        ArrayData::F64(v) => v.iter().map(|x| Num::Real(*x)).collect(),
        ArrayData::F32(v) => v.iter().map(|x| Num::Real((*x).into())).collect(),
        ArrayData::C128(v) => v.iter().map(|c| Num::Cplx(c.re, c.im)).collect(),
        ArrayData::C64(v) => v.iter().map(|c| Num::Cplx(c.re.into(), c.im.into())).collect(),
        ArrayData::Str(_) => return Err(unsupported()),
        other => to_i64(other).expect("integer data").into_iter().map(|x| Num::Int(x.into())).collect(),
    })
}

/// Integer bounds of an integer target type.
fn int_bounds(name: &str) -> Option<(i128, u128)> {
    Some(match name {
        "Int8" => (i8::MIN.into(), i8::MAX as u128),
        "Int16" => (i16::MIN.into(), i16::MAX as u128),
        "Int32" => (i32::MIN.into(), i32::MAX as u128),
        "Int64" => (i64::MIN.into(), i64::MAX as u128),
        "Int128" => (i128::MIN, i128::MAX as u128),
        "UInt8" => (0, u8::MAX.into()),
        "UInt16" => (0, u16::MAX.into()),
        "UInt32" => (0, u32::MAX.into()),
        "UInt64" | "Ptr" => (0, u64::MAX.into()),
        "UInt128" => (0, u128::MAX),
        "Char" => (0, 0x10FFFF),
        "Bool" => (0, 1),
        _ => return None,
    })
}

enum Exact {
    Signed(i128),
    Unsigned(u128),
}

impl Exact {
    fn as_i128(&self) -> i128 {
        match self {
            Exact::Signed(v) => *v,
            Exact::Unsigned(u) => *u as i128,
        }
    }

    fn as_u128(&self) -> u128 {
        match self {
            Exact::Signed(v) => *v as u128,
            Exact::Unsigned(u) => *u,
        }
    }
}

fn exact_int(n: Num, target: &str) -> Result<Exact, String> {
    let (lo, hi) = int_bounds(target).expect("integer target");
    let inexact = |shown: String| format!("InexactError: cannot convert {shown} to {target}");
    let real = match n {
        Num::Int(v) => {
            if v < lo || (v >= 0 && v as u128 > hi) {
                return Err(inexact(format!("{v}")));
            }
            return Ok(Exact::Signed(v));
        }
        Num::Big(u) => {
            if u > hi {
                return Err(inexact(format!("{u}")));
            }
            return Ok(Exact::Unsigned(u));
        }
        Num::Real(x) => x,
        Num::Cplx(re, im) => {
            if im != 0.0 {
                return Err(inexact(format!("{} + {}im", fmt_num(re), fmt_num(im))));
            }
            re
        }
    };
    if !real.is_finite() || libm::trunc(real) != real {
        return Err(inexact(fmt_num(real)));
    }
    // 2^127 and beyond do not fit any target.
    if real.abs() >= 1.7014118346046923e38 {
        if real > 0.0 && real < 3.402823669209385e38 && hi == u128::MAX {
            return Ok(Exact::Unsigned(real as u128));
        }
        return Err(inexact(fmt_num(real)));
    }
    exact_int(Num::Int(real as i128), target).map_err(|_| inexact(fmt_num(real)))
}

fn as_real(n: Num) -> f64 {
    match n {
        Num::Int(v) => v as f64,
        Num::Big(u) => u as f64,
        Num::Real(x) => x,
        Num::Cplx(re, _) => re,
    }
}

fn as_complex(n: Num) -> Complex64 {
    match n {
        Num::Cplx(re, im) => Complex64::new(re, im),
        other => Complex64::new(as_real(other), 0.0),
    }
}

fn real_only(n: Num, target: &str) -> Result<f64, String> {
    match n {
        Num::Cplx(re, im) if im != 0.0 => {
            Err(format!("InexactError: cannot convert {} + {}im to {target}", fmt_num(re), fmt_num(im)))
        }
        other => Ok(as_real(other)),
    }
}

/// Rounds to the nearest half-precision value, ties to even. Values that
/// overflow half precision become infinite.
pub fn round_f16(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    let (_, e) = libm::frexp(x);
    let q = (e - 11).max(-24);
    let r = libm::ldexp(libm::rint(libm::ldexp(x, -q)), q);
    if r.abs() > 65504.0 {
        if r > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        r
    }
}

/// `convert(T, x)`: converts every element to the named type, failing with
/// an InexactError when a value does not fit exactly.
pub fn convert(target: &str, a: &ArrayObj) -> Result<ArrayObj, String> {
    let nums = read_nums(a)?;
    let dims = a.dims().to_vec();
    let missing = a.array.missing().cloned();
    let present = |i: usize| missing.as_ref().is_none_or(|m| !m.get(i));
    let ints = |name: &str| -> Result<Vec<Exact>, String> {
        nums.iter()
            .enumerate()
            .map(|(i, n)| if present(i) { exact_int(*n, name) } else { Ok(Exact::Signed(0)) })
            .collect()
    };
    let reals = |name: &str| -> Result<Vec<f64>, String> {
        nums.iter().enumerate().map(|(i, n)| if present(i) { real_only(*n, name) } else { Ok(0.0) }).collect()
    };
    let native = |data: ArrayData| {
        TypedArray::new(dims.clone(), data, missing.clone()).map(ArrayObj::native).map_err(|e| e.to_string())
    };
    if let Some(w) = types::wrapped(target) {
        return convert_wrapped(w, &nums, &dims, missing.clone(), &present);
    }
    match target {
        "Float64" => native(ArrayData::F64(reals(target)?)),
        "Float32" => native(ArrayData::F32(reals(target)?.into_iter().map(|x| x as f32).collect())),
        "Int64" => native(ArrayData::I64(ints(target)?.iter().map(|e| e.as_i128() as i64).collect())),
        "Int16" => native(ArrayData::I16(ints(target)?.iter().map(|e| e.as_i128() as i16).collect())),
        "Int8" => native(ArrayData::I8(ints(target)?.iter().map(|e| e.as_i128() as i8).collect())),
        "UInt8" => native(ArrayData::U8(ints(target)?.iter().map(|e| e.as_i128() as u8).collect())),
        "Bool" => native(ArrayData::Bool(ints(target)?.iter().map(|e| e.as_i128() == 1).collect())),
        "Complex{Float64}" => native(ArrayData::C128(nums.iter().map(|n| as_complex(*n)).collect())),
        "Complex{Float32}" => native(ArrayData::C64(
            nums.iter()
                .map(|n| {
                    let c = as_complex(*n);
                    Complex32::new(c.re as f32, c.im as f32)
                })
                .collect(),
        )),
        other => Err(format!("unknown conversion target type `{other}`")),
    }
}

fn convert_wrapped(
    w: &'static Wrapped,
    nums: &[Num],
    dims: &[usize],
    missing: Option<Bitmap>,
    present: &dyn Fn(usize) -> bool,
) -> Result<ArrayObj, String> {
    let target = w.name;
    let inexact_complex = |re: f64, im: f64, part: &str| {
        format!("InexactError: cannot convert {} + {}im to {target} ({part} part)", fmt_num(re), fmt_num(im))
    };
    let (carrier_dims, data) = match w.carrier {
        ElemType::U8 => {
            if missing.as_ref().is_some_and(|m| m.any()) {
                return Err(format!("{target} values cannot be missing"));
            }
            let mut bytes = Vec::with_capacity(nums.len() * w.width);
            for n in nums {
                let e = exact_int(*n, target)?;
                bytes.extend_from_slice(&e.as_u128().to_le_bytes()[..w.width]);
            }
            let mut d = vec![w.width];
            d.extend_from_slice(dims);
            (d, ArrayData::U8(bytes))
        }
        ElemType::I32 => {
            let mut out = Vec::with_capacity(nums.len());
            for (i, n) in nums.iter().enumerate() {
                if !present(i) {
                    out.push(0);
                    continue;
                }
                let v = exact_int(*n, target)?.as_i128();
                if target == "Char" && char::from_u32(v as u32).is_none() {
                    return Err(format!("invalid Char code point {v}"));
                }
                out.push(v as i32);
            }
            (dims.to_vec(), ArrayData::I32(out))
        }
        ElemType::F64 if target == "UInt32" => {
            let mut out = Vec::with_capacity(nums.len());
            for (i, n) in nums.iter().enumerate() {
                out.push(if present(i) { exact_int(*n, target)?.as_i128() as f64 } else { 0.0 });
            }
            (dims.to_vec(), ArrayData::F64(out))
        }
        ElemType::F64 => {
            let mut out = Vec::with_capacity(nums.len());
            for (i, n) in nums.iter().enumerate() {
                out.push(if present(i) { round_f16(real_only(*n, target)?) } else { 0.0 });
            }
            (dims.to_vec(), ArrayData::F64(out))
        }
        ElemType::C128 => {
            let part_type = &target["Complex{".len()..target.len() - 1];
            let mut out = Vec::with_capacity(nums.len());
            for (i, n) in nums.iter().enumerate() {
                if !present(i) {
                    out.push(Complex64::default());
                    continue;
                }
                let c = as_complex(*n);
                out.push(if part_type == "Float16" {
                    Complex64::new(round_f16(c.re), round_f16(c.im))
                } else {
                    let re = exact_int(Num::Real(c.re), part_type).map_err(|_| inexact_complex(c.re, c.im, "real"))?;
                    let im =
                        exact_int(Num::Real(c.im), part_type).map_err(|_| inexact_complex(c.re, c.im, "imaginary"))?;
                    Complex64::new(re.as_i128() as f64, im.as_i128() as f64)
                });
            }
            (dims.to_vec(), ArrayData::C128(out))
        }
        other => return Err(format!("unsupported carrier {} for {target}", other.type_name())),
    };
    let missing = if w.carrier == ElemType::U8 { None } else { missing };
    let array = TypedArray::new(carrier_dims, data, missing).map_err(|e| e.to_string())?;
    w.check(&array).map_err(|e| e.to_string())?;
    Ok(ArrayObj { wrapped: Some(w), array })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arr(a: TypedArray) -> ArrayObj {
        ArrayObj::native(a)
    }

    fn f64v(v: &[f64]) -> ArrayObj {
        arr(TypedArray::vector(ArrayData::F64(v.to_vec())))
    }

    #[test]
    fn promotion_lattice() {
        use ElemType::*;
        assert_eq!(promote(I64, F64), Some(F64));
        assert_eq!(promote(I16, I16), Some(I16));
        assert_eq!(promote(I16, I8), Some(I64));
        assert_eq!(promote(Bool, Bool), Some(I64));
        assert_eq!(promote(F32, I64), Some(F32));
        assert_eq!(promote(F32, C128), Some(C128));
        assert_eq!(promote(F32, C64), Some(C64));
        assert_eq!(promote(F64, C64), Some(C128));
        assert_eq!(promote(Str, I64), None);
    }

    #[test]
    fn add_propagates_missing_not_nan() {
        let a = arr(TypedArray::vector_with_missing(
            ArrayData::F64(vec![1.0, 0.0, f64::NAN]),
            Bitmap::from_flags([false, true, false]),
        )
        .unwrap());
        let b = f64v(&[1.0, 2.0, 3.0]);
        let r = binop(BinOp::Add, &a, &b).unwrap();
        assert_eq!(r.array.as_f64().unwrap()[0], 2.0);
        assert!(r.array.is_missing(1));
        assert!(!r.array.is_missing(2));
        assert!(r.array.as_f64().unwrap()[2].is_nan());
    }

    #[test]
    fn scalar_broadcast_and_mismatch() {
        let r = binop(BinOp::Mul, &f64v(&[1.0, 2.0]), &arr(TypedArray::scalar_i64(3))).unwrap();
        assert_eq!(r.array.as_f64().unwrap(), &[3.0, 6.0]);
        assert!(binop(BinOp::Add, &f64v(&[1.0, 2.0]), &f64v(&[1.0])).unwrap_err().contains("dimension mismatch"));
    }

    #[test]
    fn integer_ops_wrap_and_divide_to_float() {
        let max = arr(TypedArray::scalar_i64(i64::MAX));
        let one = arr(TypedArray::scalar_i64(1));
        assert_eq!(binop(BinOp::Add, &max, &one).unwrap().array.as_i64().unwrap(), &[i64::MIN]);
        let r = binop(BinOp::Div, &one, &arr(TypedArray::scalar_i64(2))).unwrap();
        assert_eq!(r.array.as_f64().unwrap(), &[0.5]);
    }

    #[test]
    fn sqrt_domain_error_skips_missing() {
        let rf = RealFn { name: "sqrt", f: libm::sqrt, domain: |x| !(x < 0.0), complex: Some(complex_sqrt) };
        assert!(map_real(&rf, &f64v(&[-1.0])).unwrap_err().starts_with("DomainError"));
        let m =
            arr(TypedArray::vector_with_missing(ArrayData::F64(vec![0.0, 4.0]), Bitmap::from_flags([true, false]))
                .unwrap());
        let r = map_real(&rf, &m).unwrap();
        assert!(r.array.is_missing(0));
        assert_eq!(r.array.as_f64().unwrap()[1], 2.0);
        let missing = arr(TypedArray::missing_scalar(ElemType::Bool));
        let r = map_real(&rf, &missing).unwrap();
        assert!(r.is_scalar() && r.array.has_missing());
    }

    #[test]
    fn complex_sqrt_of_negative_one() {
        let r = complex_sqrt(Complex64::new(-1.0, 0.0));
        assert_eq!((r.re, r.im), (0.0, 1.0));
    }

    #[test]
    fn float16_rounding() {
        assert_eq!(round_f16(1.0), 1.0);
        assert_eq!(round_f16(0.1), 0.0999755859375);
        assert_eq!(round_f16(65504.0), 65504.0);
        assert_eq!(round_f16(65519.0), 65504.0);
        assert_eq!(round_f16(65520.0), f64::INFINITY);
        assert_eq!(round_f16(5.960464477539063e-8), 5.960464477539063e-8);
        assert_eq!(round_f16(2.0e-8), 0.0);
        // 2049 lies halfway between 2048 and 2050; ties go to even.
        assert_eq!(round_f16(2049.0), 2048.0);
        assert_eq!(round_f16(2051.0), 2052.0);
    }

    #[test]
    fn convert_checks_exactness() {
        let x = f64v(&[1.0, 2.5]);
        assert!(convert("Int64", &x).unwrap_err().contains("InexactError"));
        let y = convert("Int8", &f64v(&[1.0, -128.0])).unwrap();
        assert_eq!(y.array.data(), &ArrayData::I8(vec![1, -128]));
        assert!(convert("UInt8", &f64v(&[256.0])).is_err());
        let big = convert("UInt128", &arr(TypedArray::scalar_i64(-1)));
        assert!(big.is_err());
        let w = convert("Int128", &arr(TypedArray::scalar_i64(-2))).unwrap();
        assert_eq!(w.type_name(), "Int128");
        assert_eq!(w.array.dims(), &[16]);
        assert_eq!(
            types::raw_i128(
                match w.array.data() {
                    ArrayData::U8(b) => b,
                    _ => unreachable!(),
                },
                16,
                0
            ),
            -2
        );
        let back = convert("Int64", &w).unwrap();
        assert_eq!(back.array.as_i64().unwrap(), &[-2]);
    }

    #[test]
    fn concat_promotes_and_keeps_missing() {
        let a = TypedArray::vector(ArrayData::I64(vec![1, 2]));
        let b =
            TypedArray::vector_with_missing(ArrayData::F64(vec![0.0, 3.0]), Bitmap::from_flags([true, false])).unwrap();
        let c = concat(&[&a, &b]).unwrap();
        assert_eq!(c.elem_type(), ElemType::F64);
        assert_eq!(c.dims(), &[4]);
        assert!(c.is_missing(2) && !c.is_missing(3));
        let s = TypedArray::scalar_str("x");
        assert!(concat(&[&a, &s]).is_err());
    }

    #[test]
    fn sum_rules() {
        let r = sum(&arr(TypedArray::vector(ArrayData::Bool(vec![true, true, false])))).unwrap();
        assert_eq!(r.as_i64().unwrap(), &[2]);
        let m =
            arr(TypedArray::vector_with_missing(ArrayData::F64(vec![1.0, 0.0]), Bitmap::from_flags([false, true]))
                .unwrap());
        assert!(sum(&m).unwrap().has_missing());
    }
}
