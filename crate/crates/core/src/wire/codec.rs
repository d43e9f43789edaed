use alloc::string::String;
use alloc::vec::Vec;
use core::mem::size_of;

use bytemuck::{Pod, Zeroable};

use super::io::{Sink, Source};
use super::WireError;
use crate::value::{
    element_count, ArrayData, Bitmap, Complex, ElemType, FnTarget, StructValue, TableValue, TypedArray, Value,
    ValueError,
};

/// Deepest container nesting the decoder accepts.
pub const MAX_NESTING: usize = 128;

/// Upper bound on a single incremental allocation while decoding, so a
/// forged length cannot reserve memory the stream never delivers.
const CHUNK_BYTES: usize = 64 * 1024;

const TAG_NULL: u8 = 0x00;
const TAG_ARRAY: u8 = 0x01;
const TAG_LIST: u8 = 0x02;
const TAG_NAMEDLIST: u8 = 0x03;
const TAG_STRUCT: u8 = 0x04;
const TAG_REF: u8 = 0x05;
const TAG_FNREF: u8 = 0x06;
const TAG_TABLE: u8 = 0x07;

const FLAG_MISSING: u8 = 0x01;

// SAFETY: `Complex` is `repr(C)` with two fields of the same Pod type, so it
// has no padding and every bit pattern is valid.
unsafe impl Zeroable for Complex<f64> {}
unsafe impl Pod for Complex<f64> {}
unsafe impl Zeroable for Complex<f32> {}
unsafe impl Pod for Complex<f32> {}

/// Little-endian conversion for fixed-width element types. A no-op on
/// little-endian targets.
trait LittleEndian: Pod {
    fn swap_le(self) -> Self;
}

macro_rules! le_int {
    ($($t:ty),*) => {$(
        impl LittleEndian for $t {
            fn swap_le(self) -> Self { <$t>::from_le(self) }
        }
    )*};
}
le_int!(u8, i8, i16, i32, i64);

impl LittleEndian for f64 {
    fn swap_le(self) -> Self {
        f64::from_bits(u64::from_le(self.to_bits()))
    }
}

impl LittleEndian for f32 {
    fn swap_le(self) -> Self {
        f32::from_bits(u32::from_le(self.to_bits()))
    }
}

impl<T: LittleEndian> LittleEndian for Complex<T>
where
    Complex<T>: Pod,
{
    fn swap_le(self) -> Self {
        Complex { re: self.re.swap_le(), im: self.im.swap_le() }
    }
}

pub(crate) struct Writer<'a, S: Sink + ?Sized> {
    sink: &'a mut S,
    written: usize,
}

impl<'a, S: Sink + ?Sized> Writer<'a, S> {
    pub(crate) fn new(sink: &'a mut S) -> Self {
        Writer { sink, written: 0 }
    }

    pub(crate) fn written(&self) -> usize {
        self.written
    }

    pub(crate) fn bytes(&mut self, b: &[u8]) -> Result<(), WireError> {
        self.sink.write_all(b)?;
        self.written += b.len();
        Ok(())
    }

    pub(crate) fn u8(&mut self, v: u8) -> Result<(), WireError> {
        self.bytes(&[v])
    }

    pub(crate) fn u32(&mut self, v: u32) -> Result<(), WireError> {
        self.bytes(&v.to_le_bytes())
    }

    pub(crate) fn u64(&mut self, v: u64) -> Result<(), WireError> {
        self.bytes(&v.to_le_bytes())
    }

    pub(crate) fn len(&mut self, n: usize) -> Result<(), WireError> {
        let n32 = u32::try_from(n).map_err(|_| WireError::TooLong { len: n })?;
        self.u32(n32)
    }

    pub(crate) fn str(&mut self, s: &str) -> Result<(), WireError> {
        self.len(s.len())?;
        self.bytes(s.as_bytes())
    }

    fn pod<T: LittleEndian>(&mut self, items: &[T]) -> Result<(), WireError> {
        if cfg!(target_endian = "little") {
            self.bytes(bytemuck::cast_slice(items))
        } else {
            let per_chunk = (CHUNK_BYTES / size_of::<T>()).max(1);
            for chunk in items.chunks(per_chunk) {
                let swapped: Vec<T> = chunk.iter().map(|x| x.swap_le()).collect();
                self.bytes(bytemuck::cast_slice(&swapped))?;
            }
            Ok(())
        }
    }
}

pub(crate) struct Reader<'a, S: Source + ?Sized> {
    src: &'a mut S,
    offset: u64,
    depth: usize,
}

impl<'a, S: Source + ?Sized> Reader<'a, S> {
    pub(crate) fn new(src: &'a mut S) -> Self {
        Reader { src, offset: 0, depth: 0 }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.offset
    }

    pub(crate) fn fill(&mut self, buf: &mut [u8]) -> Result<(), WireError> {
        let mut filled = 0;
        while filled < buf.len() {
            let n = self.src.read(&mut buf[filled..])?;
            if n == 0 {
                return Err(WireError::UnexpectedEof { offset: self.offset });
            }
            filled += n;
            self.offset += n as u64;
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self) -> Result<u8, WireError> {
        let mut b = [0u8; 1];
        self.fill(&mut b)?;
        Ok(b[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32, WireError> {
        let mut b = [0u8; 4];
        self.fill(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, WireError> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub(crate) fn i64(&mut self) -> Result<i64, WireError> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(i64::from_le_bytes(b))
    }

    pub(crate) fn nonzero_id(&mut self) -> Result<u64, WireError> {
        let offset = self.offset;
        match self.u64()? {
            0 => Err(WireError::ReservedId { offset }),
            id => Ok(id),
        }
    }

    pub(crate) fn str(&mut self) -> Result<String, WireError> {
        let offset = self.offset;
        let len = self.u32()? as usize;
        let bytes = self.pod::<u8>(len)?;
        String::from_utf8(bytes).map_err(|_| WireError::InvalidUtf8 { offset })
    }

    fn enter(&mut self) -> Result<(), WireError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(WireError::TooDeep { offset: self.offset });
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    /// Reads `count` fixed-width elements, growing the buffer one chunk at
    /// a time.
    fn pod<T: LittleEndian>(&mut self, count: usize) -> Result<Vec<T>, WireError> {
        let per_chunk = (CHUNK_BYTES / size_of::<T>()).max(1);
        let mut out: Vec<T> = Vec::with_capacity(count.min(per_chunk));
        while out.len() < count {
            let n = (count - out.len()).min(per_chunk);
            let old = out.len();
            out.resize(old + n, T::zeroed());
            self.fill(bytemuck::cast_slice_mut(&mut out[old..]))?;
        }
        if cfg!(target_endian = "big") {
            for x in &mut out {
                *x = x.swap_le();
            }
        }
        Ok(out)
    }
}

fn bounded_capacity(n: usize) -> usize {
    n.min(1024)
}

pub(crate) fn write_value<S: Sink + ?Sized>(w: &mut Writer<'_, S>, v: &Value) -> Result<(), WireError> {
    match v {
        Value::Null => w.u8(TAG_NULL),
        Value::Array(a) => {
            w.u8(TAG_ARRAY)?;
            write_array_body(w, a)
        }
        Value::List(items) => {
            w.u8(TAG_LIST)?;
            w.len(items.len())?;
            items.iter().try_for_each(|item| write_value(w, item))
        }
        Value::NamedList(items) => {
            w.u8(TAG_NAMEDLIST)?;
            write_named(w, items)
        }
        Value::Struct(s) => {
            w.u8(TAG_STRUCT)?;
            w.str(&s.type_name)?;
            write_named(w, &s.fields)
        }
        Value::Ref { id, type_name } => {
            if *id == 0 {
                return Err(WireError::ReservedId { offset: w.written() as u64 });
            }
            w.u8(TAG_REF)?;
            w.u64(*id)?;
            w.str(type_name)
        }
        Value::FnRef(target) => {
            w.u8(TAG_FNREF)?;
            match target {
                FnTarget::Named(name) => {
                    w.u8(0x00)?;
                    w.str(name)
                }
                FnTarget::Callback(id) => {
                    if *id == 0 {
                        return Err(WireError::ReservedId { offset: w.written() as u64 });
                    }
                    w.u8(0x01)?;
                    w.u64(*id)
                }
                FnTarget::TypeConstructor(name) => {
                    w.u8(0x02)?;
                    w.str(name)
                }
            }
        }
        Value::Table(t) => {
            w.u8(TAG_TABLE)?;
            w.len(t.columns.len())?;
            for (name, col) in &t.columns {
                w.str(name)?;
                w.u8(TAG_ARRAY)?;
                write_array_body(w, col)?;
            }
            Ok(())
        }
    }
}

fn write_named<S: Sink + ?Sized>(w: &mut Writer<'_, S>, items: &[(String, Value)]) -> Result<(), WireError> {
    w.len(items.len())?;
    for (name, v) in items {
        w.str(name)?;
        write_value(w, v)?;
    }
    Ok(())
}

fn write_array_body<S: Sink + ?Sized>(w: &mut Writer<'_, S>, a: &TypedArray) -> Result<(), WireError> {
    w.u8(a.elem_type().code())?;
    w.u8(if a.missing().is_some() { FLAG_MISSING } else { 0 })?;
    let ndims = u8::try_from(a.ndims()).map_err(|_| WireError::TooLong { len: a.ndims() })?;
    w.u8(ndims)?;
    for &d in a.dims() {
        w.bytes(&(d as i64).to_le_bytes())?;
    }
    if let Some(bitmap) = a.missing() {
        w.bytes(bitmap.as_bytes())?;
    }
    // Missing slots are already zero by the TypedArray invariant.
    match a.data() {
        ArrayData::F64(v) => w.pod(v),
        ArrayData::F32(v) => w.pod(v),
        ArrayData::I64(v) => w.pod(v),
        ArrayData::I32(v) => w.pod(v),
        ArrayData::I16(v) => w.pod(v),
        ArrayData::I8(v) => w.pod(v),
        ArrayData::U8(v) => w.pod(v),
        ArrayData::C128(v) => w.pod(v),
        ArrayData::C64(v) => w.pod(v),
        ArrayData::Bool(v) => {
            for chunk in v.chunks(CHUNK_BYTES) {
                let bytes: Vec<u8> = chunk.iter().map(|b| *b as u8).collect();
                w.bytes(&bytes)?;
            }
            Ok(())
        }
        ArrayData::Str(v) => v.iter().try_for_each(|s| w.str(s)),
    }
}

pub(crate) fn read_value<S: Source + ?Sized>(r: &mut Reader<'_, S>) -> Result<Value, WireError> {
    let start = r.offset();
    let tag = r.u8()?;
    let invalid = |source: ValueError| WireError::Invalid { offset: start, source };
    match tag {
        TAG_NULL => Ok(Value::Null),
        TAG_ARRAY => Ok(Value::Array(read_array_body(r)?)),
        TAG_LIST => {
            let n = r.u32()? as usize;
            r.enter()?;
            let mut items = Vec::with_capacity(bounded_capacity(n));
            for _ in 0..n {
                items.push(read_value(r)?);
            }
            r.leave();
            Ok(Value::List(items))
        }
        TAG_NAMEDLIST => {
            r.enter()?;
            let items = read_named(r)?;
            r.leave();
            let v = Value::NamedList(items);
            check_names(&v).map_err(invalid)?;
            Ok(v)
        }
        TAG_STRUCT => {
            let type_name = r.str()?;
            r.enter()?;
            let fields = read_named(r)?;
            r.leave();
            let v = Value::Struct(StructValue { type_name, fields });
            check_names(&v).map_err(invalid)?;
            Ok(v)
        }
        TAG_REF => {
            let id = r.nonzero_id()?;
            let type_name = r.str()?;
            Ok(Value::Ref { id, type_name })
        }
        TAG_FNREF => {
            let kind_offset = r.offset();
            let target = match r.u8()? {
                0x00 => FnTarget::Named(r.str()?),
                0x01 => FnTarget::Callback(r.nonzero_id()?),
                0x02 => FnTarget::TypeConstructor(r.str()?),
                kind => return Err(WireError::UnknownFnKind { kind, offset: kind_offset }),
            };
            Ok(Value::FnRef(target))
        }
        TAG_TABLE => {
            let n = r.u32()? as usize;
            r.enter()?;
            let mut columns = Vec::with_capacity(bounded_capacity(n));
            for _ in 0..n {
                let name = r.str()?;
                let col_offset = r.offset();
                let col_tag = r.u8()?;
                if col_tag != TAG_ARRAY {
                    return Err(WireError::Invalid {
                        offset: col_offset,
                        source: ValueError::Invalid(alloc::format!("table column `{name}` is not an array")),
                    });
                }
                columns.push((name, read_array_body(r)?));
            }
            r.leave();
            Ok(Value::Table(TableValue::new(columns).map_err(invalid)?))
        }
        tag => Err(WireError::UnknownTag { tag, offset: start }),
    }
}

/// Shallow name checks for the container just decoded; children were
/// checked when they were read.
fn check_names(v: &Value) -> Result<(), ValueError> {
    let shallow = match v {
        Value::NamedList(items) => Value::NamedList(items.iter().map(|(n, _)| (n.clone(), Value::Null)).collect()),
        Value::Struct(s) => Value::Struct(StructValue {
            type_name: s.type_name.clone(),
            fields: s.fields.iter().map(|(n, _)| (n.clone(), Value::Null)).collect(),
        }),
        _ => return Ok(()),
    };
    shallow.validate()
}

fn read_named<S: Source + ?Sized>(r: &mut Reader<'_, S>) -> Result<Vec<(String, Value)>, WireError> {
    let n = r.u32()? as usize;
    let mut items = Vec::with_capacity(bounded_capacity(n));
    for _ in 0..n {
        let name = r.str()?;
        let v = read_value(r)?;
        items.push((name, v));
    }
    Ok(items)
}

fn read_array_body<S: Source + ?Sized>(r: &mut Reader<'_, S>) -> Result<TypedArray, WireError> {
    let start = r.offset();
    let code = r.u8()?;
    let elem = ElemType::from_code(code).ok_or(WireError::UnknownElemType { code, offset: start })?;
    let flags_offset = r.offset();
    let flags = r.u8()?;
    if flags & !FLAG_MISSING != 0 {
        return Err(WireError::BadFlags { flags, offset: flags_offset });
    }
    let ndims = r.u8()? as usize;
    let mut dims = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        let offset = r.offset();
        let d = r.i64()?;
        if d < 0 {
            return Err(WireError::NegativeDim { dim: d, offset });
        }
        let d = usize::try_from(d).map_err(|_| WireError::DimsOverflow { offset })?;
        dims.push(d);
        element_count(&dims).map_err(|_| WireError::DimsOverflow { offset })?;
    }
    let count = element_count(&dims).map_err(|_| WireError::DimsOverflow { offset: start })? as usize;

    let missing = if flags & FLAG_MISSING != 0 {
        let offset = r.offset();
        let bytes = r.pod::<u8>(count.div_ceil(8))?;
        Some(Bitmap::from_bytes(bytes, count).map_err(|source| WireError::Invalid { offset, source })?)
    } else {
        None
    };

    let payload_offset = r.offset();
    let data = match elem {
        ElemType::F64 => ArrayData::F64(r.pod(count)?),
        ElemType::F32 => ArrayData::F32(r.pod(count)?),
        ElemType::I64 => ArrayData::I64(r.pod(count)?),
        ElemType::I32 => ArrayData::I32(r.pod(count)?),
        ElemType::I16 => ArrayData::I16(r.pod(count)?),
        ElemType::I8 => ArrayData::I8(r.pod(count)?),
        ElemType::U8 => ArrayData::U8(r.pod(count)?),
        ElemType::C128 => ArrayData::C128(r.pod(count)?),
        ElemType::C64 => ArrayData::C64(r.pod(count)?),
        ElemType::Bool => {
            let raw = r.pod::<u8>(count)?;
            let mut out = Vec::with_capacity(raw.len());
            for (i, byte) in raw.into_iter().enumerate() {
                match byte {
                    0 => out.push(false),
                    1 => out.push(true),
                    byte => return Err(WireError::InvalidBool { byte, offset: payload_offset + i as u64 }),
                }
            }
            ArrayData::Bool(out)
        }
        ElemType::Str => {
            let mut out = Vec::with_capacity(bounded_capacity(count));
            for _ in 0..count {
                out.push(r.str()?);
            }
            ArrayData::Str(out)
        }
    };

    if let Some(bitmap) = &missing {
        if (0..count).any(|i| bitmap.get(i) && !data.slot_is_zero(i)) {
            return Err(WireError::NonZeroPlaceholder { offset: payload_offset });
        }
    }
    TypedArray::new(dims, data, missing).map_err(|source| WireError::Invalid { offset: start, source })
}

/// Writes the encoding of `v` and returns the number of bytes written.
pub fn encode_value<S: Sink + ?Sized>(v: &Value, sink: &mut S) -> Result<usize, WireError> {
    let mut w = Writer::new(sink);
    write_value(&mut w, v)?;
    Ok(w.written())
}

pub fn encode_value_to_vec(v: &Value) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::new();
    encode_value(v, &mut out)?;
    Ok(out)
}

/// Reads exactly one encoded value from `src`.
pub fn decode_value<S: Source + ?Sized>(src: &mut S) -> Result<Value, WireError> {
    let mut r = Reader::new(src);
    read_value(&mut r)
}

/// Decodes one value from the front of `bytes`, returning it with the
/// number of bytes consumed.
pub fn decode_value_from_slice(bytes: &[u8]) -> Result<(Value, usize), WireError> {
    let mut src = bytes;
    let v = decode_value(&mut src)?;
    Ok((v, bytes.len() - src.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::ChunkedSource;
    use alloc::vec;

    fn hex(s: &str) -> Vec<u8> {
        let digits: Vec<u8> = s.bytes().filter(u8::is_ascii_hexdigit).collect();
        digits.chunks(2).map(|p| u8::from_str_radix(core::str::from_utf8(p).unwrap(), 16).unwrap()).collect()
    }

    #[test]
    fn scalar_float_one() {
        let bytes = encode_value_to_vec(&Value::scalar_f64(1.0)).unwrap();
        assert_eq!(bytes, hex("01 01 00 00 00 00 00 00 00 00 F0 3F"));
        let (v, used) = decode_value_from_slice(&bytes).unwrap();
        assert_eq!(used, 12);
        assert_eq!(v, Value::scalar_f64(1.0));
    }

    #[test]
    fn float_vector_with_missing_middle() {
        let a = TypedArray::vector_with_missing(
            ArrayData::F64(vec![1.0, 99.0, 3.0]),
            Bitmap::from_flags([false, true, false]),
        )
        .unwrap();
        let bytes = encode_value_to_vec(&Value::Array(a)).unwrap();
        let expected = hex("01 01 01 01 0300000000000000 02
             000000000000F03F 0000000000000000 0000000000000840");
        assert_eq!(bytes, expected);
    }

    #[test]
    fn fixed_stride_size() {
        let a = TypedArray::new(vec![3, 4], ArrayData::I16(vec![7; 12]), Some(Bitmap::new(12))).unwrap();
        let bytes = encode_value_to_vec(&Value::Array(a)).unwrap();
        assert_eq!(bytes.len(), 1 + 3 + 2 * 8 + 2 + 12 * 2);
    }

    #[test]
    fn decodes_one_byte_at_a_time() {
        let v = Value::NamedList(vec![
            ("a".into(), Value::scalar_str("héllo")),
            ("b".into(), Value::List(vec![Value::Null, Value::FnRef(FnTarget::Callback(3))])),
        ]);
        let bytes = encode_value_to_vec(&v).unwrap();
        let mut src = ChunkedSource::new(&bytes, 1);
        assert_eq!(decode_value(&mut src).unwrap(), v);
        assert_eq!(src.remaining(), 0);
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode_value_to_vec(&Value::scalar_f64(2.5)).unwrap();
        let err = decode_value_from_slice(&bytes[..7]).unwrap_err();
        assert_eq!(err, WireError::UnexpectedEof { offset: 7 });
    }

    #[test]
    fn rejects_unknown_tag_and_bad_bool() {
        assert_eq!(decode_value_from_slice(&[0x42]).unwrap_err(), WireError::UnknownTag { tag: 0x42, offset: 0 });
        let err = decode_value_from_slice(&hex("01 08 00 00 02")).unwrap_err();
        assert_eq!(err, WireError::InvalidBool { byte: 2, offset: 4 });
    }

    #[test]
    fn rejects_invalid_utf8() {
        let err = decode_value_from_slice(&hex("01 09 00 00 02000000 C3 28")).unwrap_err();
        assert_eq!(err, WireError::InvalidUtf8 { offset: 4 });
    }

    #[test]
    fn rejects_dims_overflow_without_allocating() {
        let mut bytes = hex("01 01 00 02");
        bytes.extend_from_slice(&(1i64 << 20).to_le_bytes());
        bytes.extend_from_slice(&(1i64 << 20).to_le_bytes());
        assert!(matches!(decode_value_from_slice(&bytes), Err(WireError::DimsOverflow { .. })));
        let mut neg = hex("01 01 00 01");
        neg.extend_from_slice(&(-1i64).to_le_bytes());
        assert!(matches!(decode_value_from_slice(&neg), Err(WireError::NegativeDim { dim: -1, .. })));
    }

    #[test]
    fn huge_declared_length_with_short_input_is_eof() {
        let mut bytes = hex("01 01 00 01");
        bytes.extend_from_slice(&(1i64 << 31).to_le_bytes());
        bytes.extend_from_slice(&[0; 16]);
        assert!(decode_value_from_slice(&bytes).unwrap_err().is_eof());
        let string = hex("01 09 00 00 FFFFFFFF 41");
        assert!(decode_value_from_slice(&string).unwrap_err().is_eof());
    }

    #[test]
    fn rejects_nonzero_placeholder() {
        let bytes = hex("01 06 01 01 0200000000000000 02 05 09");
        assert!(matches!(decode_value_from_slice(&bytes), Err(WireError::NonZeroPlaceholder { .. })));
    }

    #[test]
    fn rejects_deep_nesting() {
        let mut bytes = Vec::new();
        for _ in 0..(MAX_NESTING + 1) {
            bytes.extend_from_slice(&hex("02 01000000"));
        }
        bytes.push(0);
        assert!(matches!(decode_value_from_slice(&bytes), Err(WireError::TooDeep { .. })));
    }

    #[test]
    fn reserved_callback_id() {
        assert!(encode_value_to_vec(&Value::FnRef(FnTarget::Callback(0))).is_err());
        assert!(matches!(
            decode_value_from_slice(&hex("06 01 0000000000000000")),
            Err(WireError::ReservedId { offset: 2 })
        ));
    }

    #[test]
    fn table_column_must_be_array() {
        let bytes = hex("07 01000000 01000000 78 00");
        assert!(matches!(decode_value_from_slice(&bytes), Err(WireError::Invalid { .. })));
    }

    #[test]
    fn duplicate_struct_fields_rejected() {
        let v = Value::Struct(StructValue {
            type_name: "A.B".into(),
            fields: vec![("x".into(), Value::Null), ("x".into(), Value::Null)],
        });
        let bytes = encode_value_to_vec(&v).unwrap();
        assert!(matches!(decode_value_from_slice(&bytes), Err(WireError::Invalid { offset: 0, .. })));
    }
}
