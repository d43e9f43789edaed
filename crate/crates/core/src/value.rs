//! The universal tagged value exchanged between peers.
//!
//! Arrays are stored column-major with an optional missing-value bitmap.
//! Missing slots always hold a zero placeholder so that two arrays with the
//! same missingness compare equal regardless of how they were built.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

/// Upper bound on the element count of a single array.
pub const MAX_ELEMENTS: u64 = 1 << 31;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[repr(C)]
pub struct Complex<T> {
    pub re: T,
    pub im: T,
}

impl<T> Complex<T> {
    pub const fn new(re: T, im: T) -> Self {
        Complex { re, im }
    }
}

pub type Complex64 = Complex<f64>;
pub type Complex32 = Complex<f32>;

/// Element type of a typed array, with its one-byte wire code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum ElemType {
    F64 = 0x01,
    F32 = 0x02,
    I64 = 0x03,
    I32 = 0x04,
    I16 = 0x05,
    I8 = 0x06,
    U8 = 0x07,
    Bool = 0x08,
    Str = 0x09,
    C128 = 0x0A,
    C64 = 0x0B,
}

impl ElemType {
    pub const ALL: [ElemType; 11] = [
        ElemType::F64,
        ElemType::F32,
        ElemType::I64,
        ElemType::I32,
        ElemType::I16,
        ElemType::I8,
        ElemType::U8,
        ElemType::Bool,
        ElemType::Str,
        ElemType::C128,
        ElemType::C64,
    ];

    pub fn from_code(code: u8) -> Option<ElemType> {
        ElemType::ALL.iter().copied().find(|t| *t as u8 == code)
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    /// Fixed byte width of one element, `None` for strings.
    pub fn width(self) -> Option<usize> {
        Some(match self {
            ElemType::F64 | ElemType::I64 | ElemType::C64 => 8,
            ElemType::F32 | ElemType::I32 => 4,
            ElemType::I16 => 2,
            ElemType::I8 | ElemType::U8 | ElemType::Bool => 1,
            ElemType::C128 => 16,
            ElemType::Str => return None,
        })
    }

    /// Name of the element type in the remote language.
    pub fn type_name(self) -> &'static str {
        match self {
            ElemType::F64 => "Float64",
            ElemType::F32 => "Float32",
            ElemType::I64 => "Int64",
            ElemType::I32 => "Int32",
            ElemType::I16 => "Int16",
            ElemType::I8 => "Int8",
            ElemType::U8 => "UInt8",
            ElemType::Bool => "Bool",
            ElemType::Str => "String",
            ElemType::C128 => "Complex{Float64}",
            ElemType::C64 => "Complex{Float32}",
        }
    }

    pub fn from_type_name(name: &str) -> Option<ElemType> {
        ElemType::ALL.iter().copied().find(|t| t.type_name() == name)
    }

    pub fn is_integer(self) -> bool {
        matches!(self, ElemType::I64 | ElemType::I32 | ElemType::I16 | ElemType::I8 | ElemType::U8)
    }

    pub fn is_float(self) -> bool {
        matches!(self, ElemType::F64 | ElemType::F32)
    }

    pub fn is_complex(self) -> bool {
        matches!(self, ElemType::C128 | ElemType::C64)
    }

    pub fn is_numeric(self) -> bool {
        !matches!(self, ElemType::Str)
    }
}

/// One bit per element, LSB-first within each byte. A set bit marks a
/// missing element.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bitmap {
    bytes: Vec<u8>,
    len: usize,
}

impl Bitmap {
    pub fn new(len: usize) -> Self {
        Bitmap { bytes: alloc::vec![0; len.div_ceil(8)], len }
    }

    /// Wraps raw bitmap bytes. Fails if the byte count is wrong or if any
    /// padding bit past `len` is set.
    pub fn from_bytes(bytes: Vec<u8>, len: usize) -> Result<Self, ValueError> {
        if bytes.len() != len.div_ceil(8) {
            return Err(ValueError::BitmapLength { expected: len.div_ceil(8), actual: bytes.len() });
        }
        if !len.is_multiple_of(8) {
            let last = bytes[bytes.len() - 1];
            if last >> (len % 8) != 0 {
                return Err(ValueError::BitmapPadding);
            }
        }
        Ok(Bitmap { bytes, len })
    }

    pub fn from_flags(flags: impl IntoIterator<Item = bool>) -> Self {
        let mut bytes = Vec::new();
        let mut len = 0;
        for flag in flags {
            if len % 8 == 0 {
                bytes.push(0);
            }
            if flag {
                bytes[len / 8] |= 1 << (len % 8);
            }
            len += 1;
        }
        Bitmap { bytes, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        i < self.len && self.bytes[i / 8] & (1 << (i % 8)) != 0
    }

    pub fn set(&mut self, i: usize, missing: bool) {
        assert!(i < self.len, "bitmap index {i} out of range {}", self.len);
        if missing {
            self.bytes[i / 8] |= 1 << (i % 8);
        } else {
            self.bytes[i / 8] &= !(1 << (i % 8));
        }
    }

    pub fn any(&self) -> bool {
        self.bytes.iter().any(|b| *b != 0)
    }

    pub fn count(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }
}

/// Element storage of a typed array.
#[derive(Clone, Debug)]
pub enum ArrayData {
    F64(Vec<f64>),
    F32(Vec<f32>),
    I64(Vec<i64>),
    I32(Vec<i32>),
    I16(Vec<i16>),
    I8(Vec<i8>),
    U8(Vec<u8>),
    Bool(Vec<bool>),
    Str(Vec<String>),
    C128(Vec<Complex64>),
    C64(Vec<Complex32>),
}

macro_rules! each_data {
    ($data:expr, $v:ident => $body:expr) => {
        match $data {
            ArrayData::F64($v) => $body,
            ArrayData::F32($v) => $body,
            ArrayData::I64($v) => $body,
            ArrayData::I32($v) => $body,
            ArrayData::I16($v) => $body,
            ArrayData::I8($v) => $body,
            ArrayData::U8($v) => $body,
            ArrayData::Bool($v) => $body,
            ArrayData::Str($v) => $body,
            ArrayData::C128($v) => $body,
            ArrayData::C64($v) => $body,
        }
    };
}

impl ArrayData {
    pub fn elem_type(&self) -> ElemType {
        match self {
            ArrayData::F64(_) => ElemType::F64,
            ArrayData::F32(_) => ElemType::F32,
            ArrayData::I64(_) => ElemType::I64,
            ArrayData::I32(_) => ElemType::I32,
            ArrayData::I16(_) => ElemType::I16,
            ArrayData::I8(_) => ElemType::I8,
            ArrayData::U8(_) => ElemType::U8,
            ArrayData::Bool(_) => ElemType::Bool,
            ArrayData::Str(_) => ElemType::Str,
            ArrayData::C128(_) => ElemType::C128,
            ArrayData::C64(_) => ElemType::C64,
        }
    }

    pub fn len(&self) -> usize {
        each_data!(self, v => v.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn empty(elem: ElemType) -> ArrayData {
        ArrayData::with_capacity(elem, 0)
    }

    pub fn with_capacity(elem: ElemType, n: usize) -> ArrayData {
        match elem {
            ElemType::F64 => ArrayData::F64(Vec::with_capacity(n)),
            ElemType::F32 => ArrayData::F32(Vec::with_capacity(n)),
            ElemType::I64 => ArrayData::I64(Vec::with_capacity(n)),
            ElemType::I32 => ArrayData::I32(Vec::with_capacity(n)),
            ElemType::I16 => ArrayData::I16(Vec::with_capacity(n)),
            ElemType::I8 => ArrayData::I8(Vec::with_capacity(n)),
            ElemType::U8 => ArrayData::U8(Vec::with_capacity(n)),
            ElemType::Bool => ArrayData::Bool(Vec::with_capacity(n)),
            ElemType::Str => ArrayData::Str(Vec::with_capacity(n)),
            ElemType::C128 => ArrayData::C128(Vec::with_capacity(n)),
            ElemType::C64 => ArrayData::C64(Vec::with_capacity(n)),
        }
    }

    /// Resets element `i` to the zero placeholder.
    pub fn clear_slot(&mut self, i: usize) {
        match self {
            ArrayData::F64(v) => v[i] = 0.0,
            ArrayData::F32(v) => v[i] = 0.0,
            ArrayData::I64(v) => v[i] = 0,
            ArrayData::I32(v) => v[i] = 0,
            ArrayData::I16(v) => v[i] = 0,
            ArrayData::I8(v) => v[i] = 0,
            ArrayData::U8(v) => v[i] = 0,
            ArrayData::Bool(v) => v[i] = false,
            ArrayData::Str(v) => v[i].clear(),
            ArrayData::C128(v) => v[i] = Complex64::default(),
            ArrayData::C64(v) => v[i] = Complex32::default(),
        }
    }

    /// True if element `i` is bitwise the zero placeholder.
    pub fn slot_is_zero(&self, i: usize) -> bool {
        match self {
            ArrayData::F64(v) => v[i].to_bits() == 0,
            ArrayData::F32(v) => v[i].to_bits() == 0,
            ArrayData::I64(v) => v[i] == 0,
            ArrayData::I32(v) => v[i] == 0,
            ArrayData::I16(v) => v[i] == 0,
            ArrayData::I8(v) => v[i] == 0,
            ArrayData::U8(v) => v[i] == 0,
            ArrayData::Bool(v) => !v[i],
            ArrayData::Str(v) => v[i].is_empty(),
            ArrayData::C128(v) => v[i].re.to_bits() == 0 && v[i].im.to_bits() == 0,
            ArrayData::C64(v) => v[i].re.to_bits() == 0 && v[i].im.to_bits() == 0,
        }
    }

    pub fn slice(&self, range: core::ops::Range<usize>) -> ArrayData {
        match self {
            ArrayData::F64(v) => ArrayData::F64(v[range].to_vec()),
            ArrayData::F32(v) => ArrayData::F32(v[range].to_vec()),
            ArrayData::I64(v) => ArrayData::I64(v[range].to_vec()),
            ArrayData::I32(v) => ArrayData::I32(v[range].to_vec()),
            ArrayData::I16(v) => ArrayData::I16(v[range].to_vec()),
            ArrayData::I8(v) => ArrayData::I8(v[range].to_vec()),
            ArrayData::U8(v) => ArrayData::U8(v[range].to_vec()),
            ArrayData::Bool(v) => ArrayData::Bool(v[range].to_vec()),
            ArrayData::Str(v) => ArrayData::Str(v[range].to_vec()),
            ArrayData::C128(v) => ArrayData::C128(v[range].to_vec()),
            ArrayData::C64(v) => ArrayData::C64(v[range].to_vec()),
        }
    }

    /// Appends all elements of `other`, which must have the same type.
    pub fn extend_from(&mut self, other: &ArrayData) -> Result<(), ValueError> {
        match (self, other) {
            (ArrayData::F64(a), ArrayData::F64(b)) => a.extend_from_slice(b),
            (ArrayData::F32(a), ArrayData::F32(b)) => a.extend_from_slice(b),
            (ArrayData::I64(a), ArrayData::I64(b)) => a.extend_from_slice(b),
            (ArrayData::I32(a), ArrayData::I32(b)) => a.extend_from_slice(b),
            (ArrayData::I16(a), ArrayData::I16(b)) => a.extend_from_slice(b),
            (ArrayData::I8(a), ArrayData::I8(b)) => a.extend_from_slice(b),
            (ArrayData::U8(a), ArrayData::U8(b)) => a.extend_from_slice(b),
            (ArrayData::Bool(a), ArrayData::Bool(b)) => a.extend_from_slice(b),
            (ArrayData::Str(a), ArrayData::Str(b)) => a.extend_from_slice(b),
            (ArrayData::C128(a), ArrayData::C128(b)) => a.extend_from_slice(b),
            (ArrayData::C64(a), ArrayData::C64(b)) => a.extend_from_slice(b),
            (a, b) => return Err(ValueError::ElemTypeMismatch { expected: a.elem_type(), actual: b.elem_type() }),
        }
        Ok(())
    }
}

fn f64_bits_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn f32_bits_eq(a: &[f32], b: &[f32]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Bitwise equality for floating point payloads, so NaN equals NaN and
/// `0.0` differs from `-0.0`.
impl PartialEq for ArrayData {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ArrayData::F64(a), ArrayData::F64(b)) => f64_bits_eq(a, b),
            (ArrayData::F32(a), ArrayData::F32(b)) => f32_bits_eq(a, b),
            (ArrayData::I64(a), ArrayData::I64(b)) => a == b,
            (ArrayData::I32(a), ArrayData::I32(b)) => a == b,
            (ArrayData::I16(a), ArrayData::I16(b)) => a == b,
            (ArrayData::I8(a), ArrayData::I8(b)) => a == b,
            (ArrayData::U8(a), ArrayData::U8(b)) => a == b,
            (ArrayData::Bool(a), ArrayData::Bool(b)) => a == b,
            (ArrayData::Str(a), ArrayData::Str(b)) => a == b,
            (ArrayData::C128(a), ArrayData::C128(b)) => {
                a.len() == b.len()
                    && a.iter()
                        .zip(b)
                        .all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits())
            }
            (ArrayData::C64(a), ArrayData::C64(b)) => {
                a.len() == b.len()
                    && a.iter()
                        .zip(b)
                        .all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits())
            }
            _ => false,
        }
    }
}

/// A column-major n-dimensional array of one element type. Empty `dims`
/// is a scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct TypedArray {
    dims: Vec<usize>,
    data: ArrayData,
    missing: Option<Bitmap>,
}

impl TypedArray {
    /// Validates shape and bitmap, and zeroes every missing slot.
    pub fn new(dims: Vec<usize>, data: ArrayData, missing: Option<Bitmap>) -> Result<Self, ValueError> {
        let count = element_count(&dims)?;
        if count != data.len() as u64 {
            return Err(ValueError::CountMismatch { dims_product: count, elements: data.len() });
        }
        let mut data = data;
        if let Some(bitmap) = &missing {
            if bitmap.len() != data.len() {
                return Err(ValueError::BitmapLength {
                    expected: data.len().div_ceil(8),
                    actual: bitmap.as_bytes().len(),
                });
            }
            for i in 0..data.len() {
                if bitmap.get(i) {
                    data.clear_slot(i);
                }
            }
        }
        Ok(TypedArray { dims, data, missing })
    }

    pub fn scalar(data: ArrayData) -> Result<Self, ValueError> {
        TypedArray::new(Vec::new(), data, None)
    }

    /// A one-dimensional array whose extent is the data length.
    pub fn vector(data: ArrayData) -> Self {
        let n = data.len();
        TypedArray { dims: alloc::vec![n], data, missing: None }
    }

    pub fn vector_with_missing(data: ArrayData, missing: Bitmap) -> Result<Self, ValueError> {
        let n = data.len();
        TypedArray::new(alloc::vec![n], data, Some(missing))
    }

    pub fn scalar_f64(x: f64) -> Self {
        TypedArray { dims: Vec::new(), data: ArrayData::F64(alloc::vec![x]), missing: None }
    }

    pub fn scalar_i64(x: i64) -> Self {
        TypedArray { dims: Vec::new(), data: ArrayData::I64(alloc::vec![x]), missing: None }
    }

    pub fn scalar_bool(x: bool) -> Self {
        TypedArray { dims: Vec::new(), data: ArrayData::Bool(alloc::vec![x]), missing: None }
    }

    pub fn scalar_str(s: &str) -> Self {
        TypedArray { dims: Vec::new(), data: ArrayData::Str(alloc::vec![s.to_string()]), missing: None }
    }

    /// A scalar of the given type whose single element is missing.
    pub fn missing_scalar(elem: ElemType) -> Self {
        let mut data = ArrayData::with_capacity(elem, 1);
        push_zero(&mut data);
        let mut bitmap = Bitmap::new(1);
        bitmap.set(0, true);
        TypedArray { dims: Vec::new(), data, missing: Some(bitmap) }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndims(&self) -> usize {
        self.dims.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn data(&self) -> &ArrayData {
        &self.data
    }

    pub fn elem_type(&self) -> ElemType {
        self.data.elem_type()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn missing(&self) -> Option<&Bitmap> {
        self.missing.as_ref()
    }

    pub fn is_missing(&self, i: usize) -> bool {
        self.missing.as_ref().is_some_and(|b| b.get(i))
    }

    pub fn has_missing(&self) -> bool {
        self.missing.as_ref().is_some_and(Bitmap::any)
    }

    pub fn into_parts(self) -> (Vec<usize>, ArrayData, Option<Bitmap>) {
        (self.dims, self.data, self.missing)
    }

    /// Same data, new shape.
    pub fn reshape(self, dims: Vec<usize>) -> Result<Self, ValueError> {
        TypedArray::new(dims, self.data, self.missing)
    }

    /// Element `i` as a scalar array, keeping its missing bit.
    pub fn element(&self, i: usize) -> TypedArray {
        let data = self.data.slice(i..i + 1);
        let missing = if self.missing.is_some() { Some(Bitmap::from_flags([self.is_missing(i)])) } else { None };
        TypedArray { dims: Vec::new(), data, missing }
    }

    pub fn as_f64(&self) -> Option<&[f64]> {
        match &self.data {
            ArrayData::F64(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<&[i64]> {
        match &self.data {
            ArrayData::I64(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&[String]> {
        match &self.data {
            ArrayData::Str(v) => Some(v),
            _ => None,
        }
    }
}

pub(crate) fn push_zero(data: &mut ArrayData) {
    match data {
        ArrayData::F64(v) => v.push(0.0),
        ArrayData::F32(v) => v.push(0.0),
        ArrayData::I64(v) => v.push(0),
        ArrayData::I32(v) => v.push(0),
        ArrayData::I16(v) => v.push(0),
        ArrayData::I8(v) => v.push(0),
        ArrayData::U8(v) => v.push(0),
        ArrayData::Bool(v) => v.push(false),
        ArrayData::Str(v) => v.push(String::new()),
        ArrayData::C128(v) => v.push(Complex64::default()),
        ArrayData::C64(v) => v.push(Complex32::default()),
    }
}

/// Product of `dims`, checked against [`MAX_ELEMENTS`].
pub fn element_count(dims: &[usize]) -> Result<u64, ValueError> {
    let mut count: u64 = 1;
    for &d in dims {
        count = count.checked_mul(d as u64).ok_or(ValueError::TooManyElements)?;
        if count > MAX_ELEMENTS {
            return Err(ValueError::TooManyElements);
        }
    }
    Ok(count)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FnTarget {
    Named(String),
    Callback(u64),
    TypeConstructor(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructValue {
    pub type_name: String,
    pub fields: Vec<(String, Value)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableValue {
    pub columns: Vec<(String, TypedArray)>,
}

impl TableValue {
    pub fn new(columns: Vec<(String, TypedArray)>) -> Result<Self, ValueError> {
        let table = TableValue { columns };
        table.validate()?;
        Ok(table)
    }

    pub fn nrows(&self) -> usize {
        self.columns.first().map_or(0, |(_, c)| c.len())
    }

    pub fn column(&self, name: &str) -> Option<&TypedArray> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }

    pub fn validate(&self) -> Result<(), ValueError> {
        check_unique_names(self.columns.iter().map(|(n, _)| n.as_str()), "table column")?;
        let nrows = self.nrows();
        for (name, col) in &self.columns {
            if col.ndims() > 1 {
                return Err(ValueError::Invalid(alloc::format!(
                    "table column `{name}` has {} dimensions",
                    col.ndims()
                )));
            }
            if col.len() != nrows {
                return Err(ValueError::Invalid(alloc::format!(
                    "table column `{name}` has {} rows, expected {nrows}",
                    col.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Null,
    Array(TypedArray),
    List(Vec<Value>),
    NamedList(Vec<(String, Value)>),
    Struct(StructValue),
    Ref { id: u64, type_name: String },
    FnRef(FnTarget),
    Table(TableValue),
}

impl Value {
    pub fn scalar_f64(x: f64) -> Value {
        Value::Array(TypedArray::scalar_f64(x))
    }

    pub fn scalar_i64(x: i64) -> Value {
        Value::Array(TypedArray::scalar_i64(x))
    }

    pub fn scalar_str(s: &str) -> Value {
        Value::Array(TypedArray::scalar_str(s))
    }

    pub fn f64_vector(xs: Vec<f64>) -> Value {
        Value::Array(TypedArray::vector(ArrayData::F64(xs)))
    }

    /// One-byte wire tag.
    pub fn tag(&self) -> u8 {
        match self {
            Value::Null => 0x00,
            Value::Array(_) => 0x01,
            Value::List(_) => 0x02,
            Value::NamedList(_) => 0x03,
            Value::Struct(_) => 0x04,
            Value::Ref { .. } => 0x05,
            Value::FnRef(_) => 0x06,
            Value::Table(_) => 0x07,
        }
    }

    pub fn as_array(&self) -> Option<&TypedArray> {
        match self {
            Value::Array(a) => Some(a),
            _ => None,
        }
    }

    /// Nesting depth: 0 for leaves, one more than the deepest child for
    /// containers. Tables count as depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Value::List(items) => 1 + items.iter().map(Value::depth).max().unwrap_or(0),
            Value::NamedList(items) => 1 + items.iter().map(|(_, v)| v.depth()).max().unwrap_or(0),
            Value::Struct(s) => 1 + s.fields.iter().map(|(_, v)| v.depth()).max().unwrap_or(0),
            Value::Table(_) => 1,
            _ => 0,
        }
    }

    /// Checks the structural invariants of this value and all children.
    pub fn validate(&self) -> Result<(), ValueError> {
        match self {
            Value::Null | Value::Array(_) => Ok(()),
            Value::List(items) => items.iter().try_for_each(Value::validate),
            Value::NamedList(items) => {
                check_unique_names(items.iter().map(|(n, _)| n.as_str()), "named list entry")?;
                items.iter().try_for_each(|(_, v)| v.validate())
            }
            Value::Struct(s) => {
                if !is_qualified_type_name(&s.type_name) {
                    return Err(ValueError::BadTypeName(s.type_name.clone()));
                }
                check_unique_names(s.fields.iter().map(|(n, _)| n.as_str()), "struct field")?;
                s.fields.iter().try_for_each(|(_, v)| v.validate())
            }
            Value::Ref { id, .. } => {
                if *id == 0 {
                    Err(ValueError::ReservedId)
                } else {
                    Ok(())
                }
            }
            Value::FnRef(FnTarget::Callback(0)) => Err(ValueError::ReservedId),
            Value::FnRef(_) => Ok(()),
            Value::Table(t) => t.validate(),
        }
    }
}

fn check_unique_names<'a>(names: impl Iterator<Item = &'a str>, what: &str) -> Result<(), ValueError> {
    let mut seen: Vec<&str> = Vec::new();
    for name in names {
        if name.is_empty() {
            return Err(ValueError::Invalid(alloc::format!("empty {what} name")));
        }
        if seen.contains(&name) {
            return Err(ValueError::Invalid(alloc::format!("duplicate {what} name `{name}`")));
        }
        seen.push(name);
    }
    Ok(())
}

/// Dot-separated, non-empty segments without whitespace or control
/// characters. Type parameters in braces (`Complex{Int32}`) are allowed.
pub fn is_qualified_type_name(name: &str) -> bool {
    !name.is_empty()
        && name.split('.').all(|seg| {
            !seg.is_empty()
                && !seg.starts_with(|c: char| c.is_ascii_digit())
                && seg.chars().all(|c| !c.is_whitespace() && !c.is_control())
        })
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("dims product {dims_product} does not match element count {elements}")]
    CountMismatch { dims_product: u64, elements: usize },
    #[error("element count exceeds 2^31")]
    TooManyElements,
    #[error("missing bitmap has {actual} bytes, expected {expected}")]
    BitmapLength { expected: usize, actual: usize },
    #[error("missing bitmap has padding bits set")]
    BitmapPadding,
    #[error("element type mismatch: expected {expected:?}, got {actual:?}")]
    ElemTypeMismatch { expected: ElemType, actual: ElemType },
    #[error("invalid type name `{0}`")]
    BadTypeName(String),
    #[error("id 0 is reserved")]
    ReservedId,
    #[error("{0}")]
    Invalid(String),
}

impl fmt::Display for ElemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.type_name())
    }
}
