//! JSON-style text encoding of data values, the baseline the binary codec
//! is benchmarked against.
//!
//! Numbers travel as shortest round-trip decimals, so floats come back
//! exactly except for NaN payloads. `missing` is a bare token distinct from
//! `NaN`. Arrays are objects carrying their element type and dims:
//!
//! ```text
//! {"array":"Float64","dims":[3],"masked":true,"data":[1.0,missing,NaN]}
//! ```

use std::fmt::Write;

use bridgewire_core::{ArrayData, Bitmap, Complex32, Complex64, ElemType, StructValue, TableValue, TypedArray, Value};

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum TextError {
    #[error("the text format has no representation for {0}")]
    Unsupported(&'static str),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// Encodes then decodes `v`.
pub fn text_roundtrip(v: &Value) -> Result<Value, TextError> {
    from_text(&to_text(v)?)
}

pub fn to_text(v: &Value) -> Result<String, TextError> {
    let mut out = String::with_capacity(estimate(v));
    write_value(&mut out, v)?;
    Ok(out)
}

fn estimate(v: &Value) -> usize {
    match v {
        Value::Array(a) => 64 + a.len() * 24,
        Value::List(items) => 2 + items.iter().map(estimate).sum::<usize>(),
        Value::NamedList(items) => 16 + items.iter().map(|(n, v)| n.len() + 4 + estimate(v)).sum::<usize>(),
        Value::Struct(s) => 32 + s.fields.iter().map(|(n, v)| n.len() + 4 + estimate(v)).sum::<usize>(),
        Value::Table(t) => 16 + t.columns.iter().map(|(n, c)| n.len() + 64 + c.len() * 24).sum::<usize>(),
        _ => 8,
    }
}

fn write_str(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

fn write_f64(out: &mut String, x: f64) {
    if x.is_nan() {
        out.push_str("NaN");
    } else if x.is_infinite() {
        out.push_str(if x > 0.0 { "Infinity" } else { "-Infinity" });
    } else {
        let _ = write!(out, "{x:?}");
    }
}

fn write_f32(out: &mut String, x: f32) {
    if x.is_finite() {
        let _ = write!(out, "{x:?}");
    } else {
        write_f64(out, f64::from(x));
    }
}

fn write_array(out: &mut String, a: &TypedArray) {
    out.push_str("{\"array\":");
    write_str(out, a.elem_type().type_name());
    out.push_str(",\"dims\":[");
    for (i, d) in a.dims().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{d}");
    }
    out.push(']');
    if a.missing().is_some() {
        out.push_str(",\"masked\":true");
    }
    out.push_str(",\"data\":[");
    for i in 0..a.len() {
        if i > 0 {
            out.push(',');
        }
        if a.is_missing(i) {
            out.push_str("missing");
            continue;
        }
        match a.data() {
            ArrayData::F64(v) => write_f64(out, v[i]),
            ArrayData::F32(v) => write_f32(out, v[i]),
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
                let _ = write!(out, "{}", v[i]);
            }
            ArrayData::Bool(v) => out.push_str(if v[i] { "true" } else { "false" }),
            ArrayData::Str(v) => write_str(out, &v[i]),
            ArrayData::C128(v) => {
                out.push('[');
                write_f64(out, v[i].re);
                out.push(',');
                write_f64(out, v[i].im);
                out.push(']');
            }
            ArrayData::C64(v) => {
                out.push('[');
                write_f32(out, v[i].re);
                out.push(',');
                write_f32(out, v[i].im);
                out.push(']');
            }
        }
    }
    out.push_str("]}");
}

fn write_pairs(out: &mut String, pairs: &[(String, Value)]) -> Result<(), TextError> {
    out.push('{');
    for (i, (n, v)) in pairs.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_str(out, n);
        out.push(':');
        write_value(out, v)?;
    }
    out.push('}');
    Ok(())
}

fn write_value(out: &mut String, v: &Value) -> Result<(), TextError> {
    match v {
        Value::Null => out.push_str("null"),
        Value::Array(a) => write_array(out, a),
        Value::List(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, v)?;
            }
            out.push(']');
        }
        Value::NamedList(items) => {
            out.push_str("{\"named\":");
            write_pairs(out, items)?;
            out.push('}');
        }
        Value::Struct(s) => {
            out.push_str("{\"struct\":");
            write_str(out, &s.type_name);
            out.push_str(",\"fields\":");
            write_pairs(out, &s.fields)?;
            out.push('}');
        }
        Value::Table(t) => {
            out.push_str("{\"table\":{");
            for (i, (n, c)) in t.columns.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_str(out, n);
                out.push(':');
                write_array(out, c);
            }
            out.push_str("}}");
        }
        Value::Ref { .. } => return Err(TextError::Unsupported("references")),
        Value::FnRef(_) => return Err(TextError::Unsupported("function references")),
    }
    Ok(())
}

pub fn from_text(s: &str) -> Result<Value, TextError> {
    let mut p = Parser { b: s.as_bytes(), i: 0 };
    let v = p.value(0)?;
    p.ws();
    if p.i != p.b.len() {
        return Err(p.err("trailing characters"));
    }
    Ok(v)
}

const MAX_DEPTH: usize = 128;

struct Parser<'a> {
    b: &'a [u8],
    i: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: impl Into<String>) -> TextError {
        TextError::Parse { pos: self.i, msg: msg.into() }
    }

    fn ws(&mut self) {
        while self.i < self.b.len() && matches!(self.b[self.i], b' ' | b'\n' | b'\r' | b'\t') {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.b.get(self.i).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), TextError> {
        if self.peek() == Some(c) {
            self.i += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{}`", c as char)))
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn key(&mut self, name: &str) -> Result<(), TextError> {
        let k = self.string()?;
        if k != name {
            return Err(self.err(format!("expected key `{name}`, found `{k}`")));
        }
        self.expect(b':')
    }

    fn string(&mut self) -> Result<String, TextError> {
        self.expect(b'"')?;
        let mut out = String::new();
        loop {
            let start = self.i;
            while self.i < self.b.len() && self.b[self.i] != b'"' && self.b[self.i] != b'\\' {
                self.i += 1;
            }
            let chunk = std::str::from_utf8(&self.b[start..self.i]).map_err(|_| self.err("invalid UTF-8"))?;
            out.push_str(chunk);
            match self.b.get(self.i) {
                Some(b'"') => {
                    self.i += 1;
                    return Ok(out);
                }
                Some(b'\\') => {
                    let esc = *self.b.get(self.i + 1).ok_or_else(|| self.err("unterminated escape"))?;
                    self.i += 2;
                    match esc {
                        b'"' => out.push('"'),
                        b'\\' => out.push('\\'),
                        b'/' => out.push('/'),
                        b'n' => out.push('\n'),
                        b't' => out.push('\t'),
                        b'r' => out.push('\r'),
                        b'u' => {
                            let hex = self.b.get(self.i..self.i + 4).ok_or_else(|| self.err("short \\u escape"))?;
                            let code = std::str::from_utf8(hex)
                                .ok()
                                .and_then(|h| u32::from_str_radix(h, 16).ok())
                                .and_then(char::from_u32)
                                .ok_or_else(|| self.err("bad \\u escape"))?;
                            out.push(code);
                            self.i += 4;
                        }
                        _ => return Err(self.err("unknown escape")),
                    }
                }
                _ => return Err(self.err("unterminated string")),
            }
        }
    }

    fn token(&mut self) -> &'a str {
        self.ws();
        let start = self.i;
        while self.i < self.b.len() && !matches!(self.b[self.i], b',' | b']' | b'}' | b' ' | b'\n' | b'\t' | b'\r') {
            self.i += 1;
        }
        // Tokens are ASCII or the parse below fails on them anyway.
        let b: &'a [u8] = self.b;
        std::str::from_utf8(&b[start..self.i]).unwrap_or("")
    }

    fn number<T: std::str::FromStr>(&mut self) -> Result<T, TextError> {
        let t = self.token();
        t.parse().map_err(|_| {
            let msg = format!("`{t}` is not a number");
            self.err(msg)
        })
    }

    fn float(&mut self) -> Result<f64, TextError> {
        match self.token() {
            "NaN" => Ok(f64::NAN),
            "Infinity" => Ok(f64::INFINITY),
            "-Infinity" => Ok(f64::NEG_INFINITY),
            t => {
                let parsed = t.parse();
                parsed.map_err(|_| {
                    let msg = format!("`{t}` is not a number");
                    self.err(msg)
                })
            }
        }
    }

    fn float32(&mut self) -> Result<f32, TextError> {
        match self.token() {
            "NaN" => Ok(f32::NAN),
            "Infinity" => Ok(f32::INFINITY),
            "-Infinity" => Ok(f32::NEG_INFINITY),
            t => {
                let parsed = t.parse();
                parsed.map_err(|_| {
                    let msg = format!("`{t}` is not a number");
                    self.err(msg)
                })
            }
        }
    }

    fn is_missing(&mut self) -> bool {
        self.ws();
        if self.b[self.i..].starts_with(b"missing") {
            self.i += "missing".len();
            true
        } else {
            false
        }
    }

    fn array_body(&mut self) -> Result<TypedArray, TextError> {
        let elem_name = self.string()?;
        let elem = ElemType::from_type_name(&elem_name)
            .ok_or_else(|| self.err(format!("unknown element type {elem_name}")))?;
        self.expect(b',')?;
        self.key("dims")?;
        self.expect(b'[')?;
        let mut dims = Vec::new();
        if !self.eat(b']') {
            loop {
                dims.push(self.number::<usize>()?);
                if self.eat(b']') {
                    break;
                }
                self.expect(b',')?;
            }
        }
        self.expect(b',')?;
        let k = self.string()?;
        self.expect(b':')?;
        let masked = match k.as_str() {
            "masked" => {
                if self.token() != "true" {
                    return Err(self.err("expected `true`"));
                }
                self.expect(b',')?;
                self.key("data")?;
                true
            }
            "data" => false,
            _ => return Err(self.err(format!("unexpected key `{k}`"))),
        };
        let n = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| self.err("dims overflow"))?;
        // The element count bounds the preallocation only as far as the
        // input could possibly hold that many elements.
        let cap = n.min(self.b.len() - self.i);
        let mut data = ArrayData::with_capacity(elem, cap);
        let mut flags = Vec::with_capacity(if masked { cap } else { 0 });
        self.expect(b'[')?;
        for i in 0..n {
            if i > 0 {
                self.expect(b',')?;
            }
            let missing = self.is_missing();
            if missing && !masked {
                return Err(self.err("missing element in an array without a mask"));
            }
            if masked {
                flags.push(missing);
            }
            self.element(&mut data, missing)?;
        }
        self.expect(b']')?;
        self.expect(b'}')?;
        let bitmap = masked.then(|| Bitmap::from_flags(flags));
        TypedArray::new(dims, data, bitmap).map_err(|e| self.err(e.to_string()))
    }

    fn element(&mut self, data: &mut ArrayData, missing: bool) -> Result<(), TextError> {
        macro_rules! push {
            ($v:expr, $parse:expr, $zero:expr) => {{
                let x = if missing { $zero } else { $parse };
                $v.push(x);
            }};
        }
        match data {
            ArrayData::F64(v) => push!(v, self.float()?, 0.0),
            ArrayData::F32(v) => push!(v, self.float32()?, 0.0),
            ArrayData::I64(v) => push!(v, self.number()?, 0),
            ArrayData::I32(v) => push!(v, self.number()?, 0),
            ArrayData::I16(v) => push!(v, self.number()?, 0),
            ArrayData::I8(v) => push!(v, self.number()?, 0),
            ArrayData::U8(v) => push!(v, self.number()?, 0),
            ArrayData::Bool(v) => push!(
                v,
                match self.token() {
                    "true" => true,
                    "false" => false,
                    _ => return Err(self.err("expected a boolean")),
                },
                false
            ),
            ArrayData::Str(v) => push!(v, self.string()?, String::new()),
            ArrayData::C128(v) => push!(
                v,
                {
                    self.expect(b'[')?;
                    let re = self.float()?;
                    self.expect(b',')?;
                    let im = self.float()?;
                    self.expect(b']')?;
                    Complex64::new(re, im)
                },
                Complex64::new(0.0, 0.0)
            ),
            ArrayData::C64(v) => push!(
                v,
                {
                    self.expect(b'[')?;
                    let re = self.float32()?;
                    self.expect(b',')?;
                    let im = self.float32()?;
                    self.expect(b']')?;
                    Complex32::new(re, im)
                },
                Complex32::new(0.0, 0.0)
            ),
        }
        Ok(())
    }

    fn pairs(&mut self, depth: usize) -> Result<Vec<(String, Value)>, TextError> {
        self.expect(b'{')?;
        let mut out = Vec::new();
        if self.eat(b'}') {
            return Ok(out);
        }
        loop {
            let name = self.string()?;
            self.expect(b':')?;
            out.push((name, self.value(depth + 1)?));
            if self.eat(b'}') {
                return Ok(out);
            }
            self.expect(b',')?;
        }
    }

    fn value(&mut self, depth: usize) -> Result<Value, TextError> {
        if depth > MAX_DEPTH {
            return Err(self.err("nesting too deep"));
        }
        match self.peek() {
            Some(b'n') => {
                if self.token() != "null" {
                    return Err(self.err("expected `null`"));
                }
                Ok(Value::Null)
            }
            Some(b'[') => {
                self.i += 1;
                let mut items = Vec::new();
                if self.eat(b']') {
                    return Ok(Value::List(items));
                }
                loop {
                    items.push(self.value(depth + 1)?);
                    if self.eat(b']') {
                        return Ok(Value::List(items));
                    }
                    self.expect(b',')?;
                }
            }
            Some(b'{') => {
                self.i += 1;
                let tag = self.string()?;
                self.expect(b':')?;
                let v = match tag.as_str() {
                    "array" => return Ok(Value::Array(self.array_body()?)),
                    "named" => Value::NamedList(self.pairs(depth)?),
                    "struct" => {
                        let type_name = self.string()?;
                        self.expect(b',')?;
                        self.key("fields")?;
                        Value::Struct(StructValue { type_name, fields: self.pairs(depth)? })
                    }
                    "table" => {
                        self.expect(b'{')?;
                        let mut columns = Vec::new();
                        if !self.eat(b'}') {
                            loop {
                                let name = self.string()?;
                                self.expect(b':')?;
                                self.expect(b'{')?;
                                self.key("array")?;
                                columns.push((name, self.array_body()?));
                                if self.eat(b'}') {
                                    break;
                                }
                                self.expect(b',')?;
                            }
                        }
                        Value::Table(TableValue::new(columns).map_err(|e| self.err(e.to_string()))?)
                    }
                    other => return Err(self.err(format!("unknown tag `{other}`"))),
                };
                self.expect(b'}')?;
                v.validate().map_err(|e| self.err(e.to_string()))?;
                Ok(v)
            }
            _ => Err(self.err("expected a value")),
        }
    }
}

fn f64_close(a: f64, b: f64) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    if a == b {
        return a.is_sign_negative() == b.is_sign_negative() || a != 0.0;
    }
    // Same sign, adjacent representations.
    a.is_sign_negative() == b.is_sign_negative() && a.to_bits().abs_diff(b.to_bits()) <= 1
}

fn f32_close(a: f32, b: f32) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    a == b || (a.is_sign_negative() == b.is_sign_negative() && a.to_bits().abs_diff(b.to_bits()) <= 1)
}

fn arrays_close(a: &TypedArray, b: &TypedArray) -> bool {
    if a.dims() != b.dims() || a.missing() != b.missing() || a.elem_type() != b.elem_type() {
        return false;
    }
    let live = |i: usize| !a.is_missing(i);
    match (a.data(), b.data()) {
        (ArrayData::F64(x), ArrayData::F64(y)) => (0..x.len()).all(|i| !live(i) || f64_close(x[i], y[i])),
        (ArrayData::F32(x), ArrayData::F32(y)) => (0..x.len()).all(|i| !live(i) || f32_close(x[i], y[i])),
        (ArrayData::C128(x), ArrayData::C128(y)) => {
            (0..x.len()).all(|i| !live(i) || (f64_close(x[i].re, y[i].re) && f64_close(x[i].im, y[i].im)))
        }
        (ArrayData::C64(x), ArrayData::C64(y)) => {
            (0..x.len()).all(|i| !live(i) || (f32_close(x[i].re, y[i].re) && f32_close(x[i].im, y[i].im)))
        }
        (x, y) => x == y,
    }
}

/// Structural equality with floats compared to within one unit in the
/// last place and any NaN matching any NaN.
pub fn approx_eq(a: &Value, b: &Value) -> bool {
    let pairs_close = |x: &[(String, Value)], y: &[(String, Value)]| {
        x.len() == y.len() && x.iter().zip(y).all(|((n, v), (m, w))| n == m && approx_eq(v, w))
    };
    match (a, b) {
        (Value::Array(x), Value::Array(y)) => arrays_close(x, y),
        (Value::List(x), Value::List(y)) => x.len() == y.len() && x.iter().zip(y).all(|(v, w)| approx_eq(v, w)),
        (Value::NamedList(x), Value::NamedList(y)) => pairs_close(x, y),
        (Value::Struct(x), Value::Struct(y)) => x.type_name == y.type_name && pairs_close(&x.fields, &y.fields),
        (Value::Table(x), Value::Table(y)) => {
            x.columns.len() == y.columns.len()
                && x.columns.iter().zip(&y.columns).all(|((n, c), (m, d))| n == m && arrays_close(c, d))
        }
        (x, y) => x == y,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_decimals_come_back() {
        let v = Value::Array(TypedArray::vector(ArrayData::F64(vec![1.0, 2.0, 3.0])));
        assert_eq!(to_text(&v).unwrap(), r#"{"array":"Float64","dims":[3],"data":[1.0,2.0,3.0]}"#);
        assert_eq!(text_roundtrip(&v).unwrap(), v);
    }

    #[test]
    fn missing_and_nan_are_different_tokens() {
        let a = TypedArray::vector_with_missing(
            ArrayData::F64(vec![1.0, 0.0, f64::NAN]),
            Bitmap::from_flags([false, true, false]),
        )
        .unwrap();
        let text = to_text(&Value::Array(a.clone())).unwrap();
        assert!(text.contains("missing,NaN"), "{text}");
        let back = text_roundtrip(&Value::Array(a)).unwrap();
        let back = back.as_array().unwrap();
        assert!(back.is_missing(1));
        assert!(!back.is_missing(2));
        assert!(back.as_f64().unwrap()[2].is_nan());
    }

    #[test]
    fn strings_escape_and_return() {
        let v = Value::Array(TypedArray::vector(ArrayData::Str(vec!["a\"b\\c\n\u{1}σ".into(), String::new()])));
        assert_eq!(text_roundtrip(&v).unwrap(), v);
    }

    #[test]
    fn references_are_rejected() {
        let v = Value::Ref { id: 2, type_name: "Library.Book".into() };
        assert_eq!(to_text(&v), Err(TextError::Unsupported("references")));
    }

    #[test]
    fn truncated_text_is_an_error() {
        let v = Value::Array(TypedArray::vector(ArrayData::I64(vec![1, 2, 3])));
        let t = to_text(&v).unwrap();
        for cut in 0..t.len() {
            assert!(from_text(&t[..cut]).is_err(), "prefix {cut} parsed");
        }
    }
}
