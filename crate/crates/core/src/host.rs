//! Host-side value model and the translation policy between host values
//! and wire values.
//!
//! The host model follows a vector-oriented dynamic language: every atomic
//! value is a vector of one of six kinds, each element may be missing, and
//! lists carry optional names. Values the remote side gives back keep the
//! remote type name as an annotation whenever the host kind alone would not
//! reconstruct it.
//!
//! Client objects that are not data (proxies, host functions, remote
//! function handles) are the caller's type `X`; the translation functions
//! take a callback for those.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::types::{self, Wrapped};
use crate::value::{ArrayData, Bitmap, Complex64, ElemType, StructValue, TableValue, TypedArray, Value, ValueError};

#[derive(Clone, Debug)]
pub enum HostData {
    Integer(Vec<Option<i32>>),
    Double(Vec<Option<f64>>),
    Logical(Vec<Option<bool>>),
    Character(Vec<Option<String>>),
    Complex(Vec<Option<Complex64>>),
    Raw(Vec<Option<u8>>),
}

impl HostData {
    pub fn len(&self) -> usize {
        match self {
            HostData::Integer(v) => v.len(),
            HostData::Double(v) => v.len(),
            HostData::Logical(v) => v.len(),
            HostData::Character(v) => v.len(),
            HostData::Complex(v) => v.len(),
            HostData::Raw(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            HostData::Integer(_) => "integer",
            HostData::Double(_) => "double",
            HostData::Logical(_) => "logical",
            HostData::Character(_) => "character",
            HostData::Complex(_) => "complex",
            HostData::Raw(_) => "raw",
        }
    }

    pub fn is_missing(&self, i: usize) -> bool {
        match self {
            HostData::Integer(v) => v[i].is_none(),
            HostData::Double(v) => v[i].is_none(),
            HostData::Logical(v) => v[i].is_none(),
            HostData::Character(v) => v[i].is_none(),
            HostData::Complex(v) => v[i].is_none(),
            HostData::Raw(v) => v[i].is_none(),
        }
    }
}

fn opt_f64_eq(a: &Option<f64>, b: &Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x.to_bits() == y.to_bits(),
        (None, None) => true,
        _ => false,
    }
}

/// Doubles compare bitwise, so NaN equals NaN but never equals missing.
impl PartialEq for HostData {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (HostData::Integer(a), HostData::Integer(b)) => a == b,
            (HostData::Double(a), HostData::Double(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| opt_f64_eq(x, y))
            }
            (HostData::Logical(a), HostData::Logical(b)) => a == b,
            (HostData::Character(a), HostData::Character(b)) => a == b,
            (HostData::Complex(a), HostData::Complex(b)) => {
                a.len() == b.len()
                    && a.iter().zip(b).all(|(x, y)| match (x, y) {
                        (Some(x), Some(y)) => x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits(),
                        (None, None) => true,
                        _ => false,
                    })
            }
            (HostData::Raw(a), HostData::Raw(b)) => a == b,
            _ => false,
        }
    }
}

/// An atomic host vector. `dims` is `None` for plain vectors; a one-element
/// vector without dims is what the host calls a scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct HostVector {
    pub data: HostData,
    pub dims: Option<Vec<usize>>,
    pub annotation: Option<String>,
}

impl HostVector {
    pub fn new(data: HostData) -> Self {
        HostVector { data, dims: None, annotation: None }
    }

    pub fn with_dims(mut self, dims: Vec<usize>) -> Self {
        self.dims = Some(dims);
        self
    }

    pub fn with_annotation(mut self, name: &str) -> Self {
        self.annotation = Some(name.to_string());
        self
    }

    pub fn doubles(xs: &[f64]) -> Self {
        HostVector::new(HostData::Double(xs.iter().map(|x| Some(*x)).collect()))
    }

    pub fn integers(xs: &[i32]) -> Self {
        HostVector::new(HostData::Integer(xs.iter().map(|x| Some(*x)).collect()))
    }

    pub fn logicals(xs: &[bool]) -> Self {
        HostVector::new(HostData::Logical(xs.iter().map(|x| Some(*x)).collect()))
    }

    pub fn strings(xs: &[&str]) -> Self {
        HostVector::new(HostData::Character(xs.iter().map(|x| Some(x.to_string())).collect()))
    }

    pub fn double(x: f64) -> Self {
        HostVector::doubles(&[x])
    }

    pub fn integer(x: i32) -> Self {
        HostVector::integers(&[x])
    }

    pub fn string(s: &str) -> Self {
        HostVector::strings(&[s])
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_doubles(&self) -> Option<&[Option<f64>]> {
        match &self.data {
            HostData::Double(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_integers(&self) -> Option<&[Option<i32>]> {
        match &self.data {
            HostData::Integer(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_strings(&self) -> Option<&[Option<String>]> {
        match &self.data {
            HostData::Character(v) => Some(v),
            _ => None,
        }
    }

    /// The single double of a one-element double vector.
    pub fn as_double(&self) -> Option<f64> {
        match self.as_doubles()? {
            [Some(x)] => Some(*x),
            _ => None,
        }
    }

    pub fn as_string(&self) -> Option<&str> {
        match self.as_strings()? {
            [Some(s)] => Some(s),
            _ => None,
        }
    }
}

/// A generic host list. All names set makes a named list; `annotation`
/// set makes it a record of that remote type.
#[derive(Clone, Debug, PartialEq)]
pub struct HostList<X> {
    pub items: Vec<(Option<String>, HostValue<X>)>,
    pub annotation: Option<String>,
}

impl<X> HostList<X> {
    pub fn unnamed(items: Vec<HostValue<X>>) -> Self {
        HostList { items: items.into_iter().map(|v| (None, v)).collect(), annotation: None }
    }

    pub fn named(items: Vec<(&str, HostValue<X>)>) -> Self {
        HostList { items: items.into_iter().map(|(n, v)| (Some(n.to_string()), v)).collect(), annotation: None }
    }

    pub fn get(&self, name: &str) -> Option<&HostValue<X>> {
        self.items.iter().find(|(n, _)| n.as_deref() == Some(name)).map(|(_, v)| v)
    }
}

/// A host data frame: ordered, equally long named columns.
#[derive(Clone, Debug, PartialEq)]
pub struct HostTable {
    pub columns: Vec<(String, HostVector)>,
}

impl HostTable {
    pub fn nrows(&self) -> usize {
        self.columns.first().map_or(0, |(_, c)| c.len())
    }

    pub fn column(&self, name: &str) -> Option<&HostVector> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|(n, _)| n.as_str()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum HostValue<X> {
    Null,
    Vector(HostVector),
    List(HostList<X>),
    Table(HostTable),
    Extern(X),
}

impl<X> HostValue<X> {
    pub fn as_vector(&self) -> Option<&HostVector> {
        match self {
            HostValue::Vector(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&HostList<X>> {
        match self {
            HostValue::List(l) => Some(l),
            _ => None,
        }
    }

    pub fn annotation(&self) -> Option<&str> {
        match self {
            HostValue::Vector(v) => v.annotation.as_deref(),
            HostValue::List(l) => l.annotation.as_deref(),
            _ => None,
        }
    }
}

impl<X> From<HostVector> for HostValue<X> {
    fn from(v: HostVector) -> Self {
        HostValue::Vector(v)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct TranslateError(pub String);

impl From<ValueError> for TranslateError {
    fn from(e: ValueError) -> Self {
        TranslateError(e.to_string())
    }
}

fn err<T>(msg: String) -> Result<T, TranslateError> {
    Err(TranslateError(msg))
}

/// Wire dims for a host vector: a dim-less one-element vector is a scalar.
fn outbound_dims(v: &HostVector) -> Vec<usize> {
    match &v.dims {
        Some(d) => d.clone(),
        None if v.len() == 1 => Vec::new(),
        None => vec![v.len()],
    }
}

/// Host dims for a wire array: only shapes that would not come back by
/// default are kept.
fn inbound_dims(dims: &[usize], len: usize) -> Option<Vec<usize>> {
    match dims {
        [] => None,
        [1] if len == 1 => Some(vec![1]),
        [_] => None,
        d => Some(d.to_vec()),
    }
}

fn split_missing<T: Default + Clone>(items: &[Option<T>]) -> (Vec<T>, Option<Bitmap>) {
    let data = items.iter().map(|x| x.clone().unwrap_or_default()).collect();
    let bitmap = if items.iter().any(Option::is_none) {
        Some(Bitmap::from_flags(items.iter().map(Option::is_none)))
    } else {
        None
    };
    (data, bitmap)
}

fn join_missing<T: Clone>(data: &[T], a: &TypedArray) -> Vec<Option<T>> {
    data.iter().enumerate().map(|(i, x)| if a.is_missing(i) { None } else { Some(x.clone()) }).collect()
}

/// Natural element type for each host kind.
fn natural(data: &HostData) -> (ArrayData, Option<Bitmap>) {
    match data {
        HostData::Integer(v) => {
            let (d, m) = split_missing(v);
            (ArrayData::I32(d), m)
        }
        HostData::Double(v) => {
            let (d, m) = split_missing(v);
            (ArrayData::F64(d), m)
        }
        HostData::Logical(v) => {
            let (d, m) = split_missing(v);
            (ArrayData::Bool(d), m)
        }
        HostData::Character(v) => {
            let (d, m) = split_missing(v);
            (ArrayData::Str(d), m)
        }
        HostData::Complex(v) => {
            let (d, m) = split_missing(v);
            (ArrayData::C128(d), m)
        }
        HostData::Raw(v) => {
            let (d, m) = split_missing(v);
            (ArrayData::U8(d), m)
        }
    }
}

/// Narrows host data to `elem` for an annotated direct mapping.
fn narrow(data: &HostData, elem: ElemType, name: &str) -> Result<(ArrayData, Option<Bitmap>), TranslateError> {
    let mismatch = || err(alloc::format!("annotation `{name}` does not apply to a {} vector", data.kind_name()));
    Ok(match (data, elem) {
        (HostData::Double(v), ElemType::F32) => {
            let (d, m) = split_missing(v);
            (ArrayData::F32(d.into_iter().map(|x| x as f32).collect()), m)
        }
        (HostData::Double(v), ElemType::I64) => {
            let (d, m) = split_missing(v);
            let mut out = Vec::with_capacity(d.len());
            for x in d {
                if libm::trunc(x) != x || !(-9.223_372_036_854_776e18..9.223_372_036_854_776e18).contains(&x) {
                    return err(alloc::format!("{x} is not an Int64 value"));
                }
                out.push(x as i64);
            }
            (ArrayData::I64(out), m)
        }
        (HostData::Integer(v), ElemType::I64) => {
            let (d, m) = split_missing(v);
            (ArrayData::I64(d.into_iter().map(i64::from).collect()), m)
        }
        (HostData::Integer(v), ElemType::I16) => {
            let (d, m) = split_missing(v);
            let out: Result<Vec<i16>, _> = d.into_iter().map(i16::try_from).collect();
            (ArrayData::I16(out.map_err(|_| TranslateError(alloc::format!("value out of range for {name}")))?), m)
        }
        (HostData::Integer(v), ElemType::I8) => {
            let (d, m) = split_missing(v);
            let out: Result<Vec<i8>, _> = d.into_iter().map(i8::try_from).collect();
            (ArrayData::I8(out.map_err(|_| TranslateError(alloc::format!("value out of range for {name}")))?), m)
        }
        (HostData::Complex(v), ElemType::C64) => {
            let (d, m) = split_missing(v);
            (ArrayData::C64(d.into_iter().map(|c| crate::Complex32::new(c.re as f32, c.im as f32)).collect()), m)
        }
        _ => {
            let (d, m) = natural(data);
            if d.elem_type() != elem {
                return mismatch();
            }
            (d, m)
        }
    })
}

fn carrier_data(data: &HostData, w: &Wrapped) -> Result<(ArrayData, Option<Bitmap>), TranslateError> {
    let (d, m) = natural(data);
    if d.elem_type() != w.carrier {
        return err(alloc::format!("annotation `{}` does not apply to a {} vector", w.name, data.kind_name()));
    }
    Ok((d, m))
}

/// Translates one host vector (host-to-remote rules, plus annotations for values that
/// came from the remote side).
pub fn vector_outbound(v: &HostVector) -> Result<Value, TranslateError> {
    let dims = outbound_dims(v);
    match v.annotation.as_deref() {
        None => {
            let (data, missing) = natural(&v.data);
            Ok(Value::Array(TypedArray::new(dims, data, missing)?))
        }
        Some(name) => {
            if let Some(w) = types::wrapped(name) {
                let (data, missing) = carrier_data(&v.data, w)?;
                let carrier = TypedArray::new(dims, data, missing)?;
                w.check(&carrier)?;
                return Ok(w.wrap(carrier));
            }
            let elem = types::annotated_direct(name)
                .or_else(|| ElemType::from_type_name(name))
                .ok_or_else(|| TranslateError(alloc::format!("unknown vector annotation `{name}`")))?;
            let (data, missing) = narrow(&v.data, elem, name)?;
            Ok(Value::Array(TypedArray::new(dims, data, missing)?))
        }
    }
}

/// Translates a host value for the wire. `ext` handles the caller's own
/// objects (proxies become REF, functions become FNREF).
pub fn translate_outbound<X>(
    v: &HostValue<X>,
    ext: &mut dyn FnMut(&X) -> Result<Value, TranslateError>,
) -> Result<Value, TranslateError> {
    match v {
        HostValue::Null => Ok(Value::Null),
        HostValue::Vector(v) => vector_outbound(v),
        HostValue::List(l) => {
            let named = l.items.iter().filter(|(n, _)| n.is_some()).count();
            if let Some(type_name) = &l.annotation {
                if named != l.items.len() {
                    return err(alloc::format!("record of type `{type_name}` needs a name for every field"));
                }
                let fields = l
                    .items
                    .iter()
                    .map(|(n, v)| Ok((n.clone().unwrap_or_default(), translate_outbound(v, ext)?)))
                    .collect::<Result<Vec<_>, TranslateError>>()?;
                let value = Value::Struct(StructValue { type_name: type_name.clone(), fields });
                value.validate()?;
                return Ok(value);
            }
            if named == 0 {
                let items = l.items.iter().map(|(_, v)| translate_outbound(v, ext)).collect::<Result<_, _>>()?;
                Ok(Value::List(items))
            } else if named == l.items.len() {
                let items = l
                    .items
                    .iter()
                    .map(|(n, v)| Ok((n.clone().unwrap_or_default(), translate_outbound(v, ext)?)))
                    .collect::<Result<Vec<_>, TranslateError>>()?;
                let value = Value::NamedList(items);
                value.validate()?;
                Ok(value)
            } else {
                err("list mixes named and unnamed elements".to_string())
            }
        }
        HostValue::Table(t) => Ok(Value::Table(table_outbound(t)?)),
        HostValue::Extern(x) => ext(x),
    }
}

pub fn table_outbound(t: &HostTable) -> Result<TableValue, TranslateError> {
    let mut columns = Vec::with_capacity(t.columns.len());
    for (name, col) in &t.columns {
        let array = match vector_outbound(col)? {
            Value::Array(a) => a,
            _ => return err(alloc::format!("column `{name}` has a type that cannot be a table column")),
        };
        let n = array.len();
        columns.push((name.clone(), array.reshape(vec![n])?));
    }
    Ok(TableValue::new(columns)?)
}

fn fits_i32(v: &[i64], a: &TypedArray) -> bool {
    v.iter().enumerate().all(|(i, x)| a.is_missing(i) || i32::try_from(*x).is_ok())
}

/// Translates one wire array (remote-to-host rules). Returns the host vector, which
/// carries an annotation exactly for the rows that need one.
pub fn vector_inbound(a: &TypedArray) -> HostVector {
    let dims = inbound_dims(a.dims(), a.len());
    let (data, annotation) = match a.data() {
        ArrayData::F64(v) => (HostData::Double(join_missing(v, a)), None),
        ArrayData::F32(v) => {
            (HostData::Double(join_missing(v, a).into_iter().map(|x| x.map(f64::from)).collect()), Some("Float32"))
        }
        ArrayData::I64(v) if fits_i32(v, a) => {
            (HostData::Integer(join_missing(v, a).into_iter().map(|x| x.map(|x| x as i32)).collect()), None)
        }
        ArrayData::I64(v) => {
            (HostData::Double(join_missing(v, a).into_iter().map(|x| x.map(|x| x as f64)).collect()), Some("Int64"))
        }
        ArrayData::I32(v) => (HostData::Integer(join_missing(v, a)), None),
        ArrayData::I16(v) => {
            (HostData::Integer(join_missing(v, a).into_iter().map(|x| x.map(i32::from)).collect()), Some("Int16"))
        }
        ArrayData::I8(v) => {
            (HostData::Integer(join_missing(v, a).into_iter().map(|x| x.map(i32::from)).collect()), Some("Int8"))
        }
        ArrayData::U8(v) => (HostData::Raw(join_missing(v, a)), None),
        ArrayData::Bool(v) => (HostData::Logical(join_missing(v, a)), None),
        ArrayData::Str(v) => (HostData::Character(join_missing(v, a)), None),
        ArrayData::C128(v) => (HostData::Complex(join_missing(v, a)), None),
        ArrayData::C64(v) => (
            HostData::Complex(
                join_missing(v, a)
                    .into_iter()
                    .map(|x| x.map(|c| Complex64::new(f64::from(c.re), f64::from(c.im))))
                    .collect(),
            ),
            Some("Complex{Float32}"),
        ),
    };
    HostVector { data, dims, annotation: annotation.map(String::from) }
}

/// Translates a wire value for the host. `ext` builds the caller's objects
/// for REF and FNREF.
pub fn translate_inbound<X>(
    v: Value,
    ext: &mut dyn FnMut(Value) -> Result<X, TranslateError>,
) -> Result<HostValue<X>, TranslateError> {
    Ok(match v {
        Value::Null => HostValue::Null,
        Value::Array(a) => HostValue::Vector(vector_inbound(&a)),
        Value::List(items) => HostValue::List(HostList {
            items: items
                .into_iter()
                .map(|v| Ok((None, translate_inbound(v, ext)?)))
                .collect::<Result<_, TranslateError>>()?,
            annotation: None,
        }),
        Value::NamedList(items) => HostValue::List(HostList {
            items: items
                .into_iter()
                .map(|(n, v)| Ok((Some(n), translate_inbound(v, ext)?)))
                .collect::<Result<_, TranslateError>>()?,
            annotation: None,
        }),
        Value::Struct(s) => {
            if let Some(unwrapped) = types::unwrap(&s) {
                let (w, carrier) = unwrapped?;
                let mut hv = vector_inbound(carrier);
                hv.annotation = Some(w.name.to_string());
                return Ok(HostValue::Vector(hv));
            }
            HostValue::List(HostList {
                items: s.fields.into_iter().map(|(n, v)| Ok((Some(n), translate_inbound(v, ext)?))).collect::<Result<
                    _,
                    TranslateError,
                >>(
                )?,
                annotation: Some(s.type_name),
            })
        }
        Value::Table(t) => HostValue::Table(HostTable {
            columns: t.columns.into_iter().map(|(n, c)| (n, vector_inbound(&c))).collect(),
        }),
        v @ (Value::Ref { .. } | Value::FnRef(_)) => HostValue::Extern(ext(v)?),
    })
}
