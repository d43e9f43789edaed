//! Remote element types beyond the wire's own element codes.
//!
//! Some remote types map onto a wire element type directly and only need a
//! host-side annotation (`Float32` travels as F32). The rest have no wire
//! code of their own; they travel as a one-field STRUCT named after the
//! type, whose `data` field holds a carrier array. Raw-carried types store
//! their little-endian bytes with the byte width as an extra leading
//! dimension, so a scalar `Int128` is a U8 array of dims `[16]` and a
//! vector of three is `[16, 3]`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::value::{ElemType, StructValue, TypedArray, Value, ValueError};

pub const WRAPPER_FIELD: &str = "data";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Wrapped {
    pub name: &'static str,
    pub carrier: ElemType,
    /// Bytes per element for U8 carriers, 1 otherwise.
    pub width: usize,
}

pub const WRAPPED: &[Wrapped] = &[
    Wrapped { name: "Float16", carrier: ElemType::F64, width: 1 },
    Wrapped { name: "UInt32", carrier: ElemType::F64, width: 1 },
    Wrapped { name: "Int32", carrier: ElemType::I32, width: 1 },
    Wrapped { name: "UInt16", carrier: ElemType::I32, width: 1 },
    Wrapped { name: "Char", carrier: ElemType::I32, width: 1 },
    Wrapped { name: "UInt64", carrier: ElemType::U8, width: 8 },
    Wrapped { name: "Int128", carrier: ElemType::U8, width: 16 },
    Wrapped { name: "UInt128", carrier: ElemType::U8, width: 16 },
    Wrapped { name: "Ptr", carrier: ElemType::U8, width: 8 },
    Wrapped { name: "Complex{Int8}", carrier: ElemType::C128, width: 1 },
    Wrapped { name: "Complex{Int16}", carrier: ElemType::C128, width: 1 },
    Wrapped { name: "Complex{Int32}", carrier: ElemType::C128, width: 1 },
    Wrapped { name: "Complex{Int64}", carrier: ElemType::C128, width: 1 },
    Wrapped { name: "Complex{Float16}", carrier: ElemType::C128, width: 1 },
];

/// Remote types carried by a wire element type that is not the host's
/// natural one for them, so the host keeps the name as an annotation.
pub const ANNOTATED_DIRECT: &[(&str, ElemType)] = &[
    ("Float32", ElemType::F32),
    ("Int64", ElemType::I64),
    ("Int8", ElemType::I8),
    ("Int16", ElemType::I16),
    ("Complex{Float32}", ElemType::C64),
];

pub fn wrapped(name: &str) -> Option<&'static Wrapped> {
    WRAPPED.iter().find(|w| w.name == name)
}

pub fn annotated_direct(name: &str) -> Option<ElemType> {
    ANNOTATED_DIRECT.iter().find(|(n, _)| *n == name).map(|(_, e)| *e)
}

impl Wrapped {
    /// Checks that `carrier` is a valid carrier array for this type.
    pub fn check(&self, carrier: &TypedArray) -> Result<(), ValueError> {
        if carrier.elem_type() != self.carrier {
            return Err(ValueError::ElemTypeMismatch { expected: self.carrier, actual: carrier.elem_type() });
        }
        if self.carrier == ElemType::U8 {
            if carrier.dims().first() != Some(&self.width) {
                return Err(ValueError::Invalid(alloc::format!(
                    "{} carrier must have leading dimension {}",
                    self.name,
                    self.width
                )));
            }
            if carrier.missing().is_some() {
                return Err(ValueError::Invalid(alloc::format!("{} values cannot be missing", self.name)));
            }
        }
        Ok(())
    }

    /// Logical dims of the wrapped array (the carrier's dims without the
    /// byte-width dimension).
    pub fn logical_dims<'a>(&self, carrier: &'a TypedArray) -> &'a [usize] {
        if self.carrier == ElemType::U8 {
            &carrier.dims()[1..]
        } else {
            carrier.dims()
        }
    }

    pub fn wrap(&self, carrier: TypedArray) -> Value {
        Value::Struct(StructValue {
            type_name: String::from(self.name),
            fields: vec![(String::from(WRAPPER_FIELD), Value::Array(carrier))],
        })
    }
}

/// Recognizes a wrapper STRUCT. Returns `None` for ordinary structs and an
/// error for a wrapper name with a malformed body.
pub fn unwrap(s: &StructValue) -> Option<Result<(&'static Wrapped, &TypedArray), ValueError>> {
    let w = wrapped(&s.type_name)?;
    Some(match s.fields.as_slice() {
        [(field, Value::Array(a))] if field == WRAPPER_FIELD => w.check(a).map(|()| (w, a)),
        _ => Err(ValueError::Invalid(alloc::format!(
            "{} wrapper must have exactly one array field `{}`",
            w.name,
            WRAPPER_FIELD
        ))),
    })
}

/// Packs integers into a raw carrier, keeping the low `width` bytes of
/// each in little-endian order.
pub fn raw_from_i128(values: &[i128], width: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * width);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes()[..width]);
    }
    out
}

/// Unsigned counterpart of [`raw_from_i128`].
pub fn raw_from_u128(values: &[u128], width: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * width);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes()[..width]);
    }
    out
}

/// Reads element `i` of a raw carrier as an unsigned integer.
pub fn raw_u128(bytes: &[u8], width: usize, i: usize) -> u128 {
    let mut buf = [0u8; 16];
    buf[..width].copy_from_slice(&bytes[i * width..(i + 1) * width]);
    u128::from_le_bytes(buf)
}

/// Reads element `i` of a raw carrier as a signed integer.
pub fn raw_i128(bytes: &[u8], width: usize, i: usize) -> i128 {
    let u = raw_u128(bytes, width, i);
    let shift = 128 - 8 * width as u32;
    ((u << shift) as i128) >> shift
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::ArrayData;

    #[test]
    fn raw_helpers_round_trip() {
        let vals = [-1i128, 0, 5, i128::MIN, i128::MAX];
        let bytes = raw_from_i128(&vals, 16);
        for (i, v) in vals.iter().enumerate() {
            assert_eq!(raw_i128(&bytes, 16, i), *v);
        }
        let small = raw_from_u128(&[u64::MAX as u128], 8);
        assert_eq!(raw_u128(&small, 8, 0), u64::MAX as u128);
    }

    #[test]
    fn wrapper_checks_leading_width() {
        let w = wrapped("Int128").unwrap();
        let ok = TypedArray::new(vec![16], ArrayData::U8(vec![0; 16]), None).unwrap();
        assert!(w.check(&ok).is_ok());
        let bad = TypedArray::new(vec![8, 2], ArrayData::U8(vec![0; 16]), None).unwrap();
        assert!(w.check(&bad).is_err());
        let v = w.wrap(ok.clone());
        let Value::Struct(s) = v else { panic!() };
        assert_eq!(unwrap(&s).unwrap().unwrap().1, &ok);
    }

    #[test]
    fn no_name_is_both_wrapped_and_direct() {
        for w in WRAPPED {
            assert!(annotated_direct(w.name).is_none());
        }
    }
}
