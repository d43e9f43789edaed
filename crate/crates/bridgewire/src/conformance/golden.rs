//! Golden byte vectors that pin the wire format.
//!
//! Each vector is built in code and compared byte for byte with a checked-in
//! hex file `<name>.hex` whose first line is `# <description>`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::fuzz::Seed;
use bridgewire_core::wire::{
    decode_value_from_slice, encode_value_to_vec, read_frame_from_slice, write_frame_to_vec, write_hello, Callee,
    Frame, PROTOCOL_VERSION,
};
use bridgewire_core::{ArrayData, Bitmap, Complex32, Complex64, FnTarget, StructValue, TableValue, TypedArray, Value};

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Value(Value),
    Frame(Frame),
    Hello(u32),
}

#[derive(Clone, Debug)]
pub struct GoldenVector {
    pub name: &'static str,
    pub description: &'static str,
    pub payload: Payload,
}

impl GoldenVector {
    /// Bytes the codec produces for this vector today.
    pub fn encode(&self) -> Vec<u8> {
        match &self.payload {
            Payload::Value(v) => encode_value_to_vec(v).expect("golden value encodes"),
            Payload::Frame(f) => write_frame_to_vec(f).expect("golden frame encodes"),
            Payload::Hello(version) => {
                let mut out = Vec::new();
                write_hello(&mut out, *version).expect("writing to a vector cannot fail");
                out
            }
        }
    }

    /// Decodes `bytes` and checks that exactly this vector comes back.
    pub fn decodes_from(&self, bytes: &[u8]) -> Result<(), String> {
        let (got, used) = match &self.payload {
            Payload::Value(_) => {
                decode_value_from_slice(bytes).map(|(v, n)| (Payload::Value(v), n)).map_err(|e| e.to_string())?
            }
            Payload::Frame(_) => {
                read_frame_from_slice(bytes).map(|(f, n)| (Payload::Frame(f), n)).map_err(|e| e.to_string())?
            }
            Payload::Hello(_) => {
                let mut src = bytes;
                let v = bridgewire_core::wire::read_hello(&mut src).map_err(|e| e.to_string())?;
                (Payload::Hello(v), 8)
            }
        };
        if used != bytes.len() {
            return Err(format!("decoding used {used} of {} bytes", bytes.len()));
        }
        if got != self.payload {
            return Err(format!("decoded {got:?}"));
        }
        Ok(())
    }
}

fn arr(dims: Vec<usize>, data: ArrayData, missing: Option<&[bool]>) -> Value {
    Value::Array(
        TypedArray::new(dims, data, missing.map(|m| Bitmap::from_flags(m.iter().copied()))).expect("golden array"),
    )
}

fn vector(data: ArrayData) -> Value {
    Value::Array(TypedArray::vector(data))
}

fn book() -> Value {
    Value::Struct(StructValue {
        type_name: "Library.Book".into(),
        fields: vec![
            ("author".into(), arr(vec![], ArrayData::Str(vec!["Shakespeare".into()]), None)),
            ("title".into(), arr(vec![], ArrayData::Str(vec!["Romeo and Julia".into()]), None)),
            ("year".into(), arr(vec![], ArrayData::I64(vec![1597]), None)),
        ],
    })
}

/// The full set of golden vectors.
pub fn golden_vectors() -> Vec<GoldenVector> {
    use Payload::{Frame as F, Hello, Value as V};
    let g = |name, description, payload| GoldenVector { name, description, payload };
    vec![
        g("hello", "handshake greeting for protocol version 1", Hello(PROTOCOL_VERSION)),
        g("null", "NULL value", V(Value::Null)),
        g("f64_scalar", "Float64 scalar 1.5 (ndims 0)", V(arr(vec![], ArrayData::F64(vec![1.5]), None))),
        g(
            "f64_missing_nan",
            "Float64 vector [1.0, missing, NaN] with bitmap and zeroed placeholder",
            V(arr(vec![3], ArrayData::F64(vec![1.0, 0.0, f64::NAN]), Some(&[false, true, false]))),
        ),
        g(
            "i64_matrix",
            "Int64 2x3 matrix, column-major 1..6",
            V(arr(vec![2, 3], ArrayData::I64(vec![1, 2, 3, 4, 5, 6]), None)),
        ),
        g("i32_vector", "Int32 vector [-1, 0, 2147483647]", V(vector(ArrayData::I32(vec![-1, 0, i32::MAX])))),
        g("i16_vector", "Int16 vector [-32768, 7]", V(vector(ArrayData::I16(vec![i16::MIN, 7])))),
        g("i8_vector", "Int8 vector [-128, 127]", V(vector(ArrayData::I8(vec![i8::MIN, i8::MAX])))),
        g("u8_vector", "UInt8 vector [0, 171, 255]", V(vector(ArrayData::U8(vec![0, 0xAB, 0xFF])))),
        g(
            "bool_missing",
            "Bool vector [true, missing, false]",
            V(arr(vec![3], ArrayData::Bool(vec![true, false, false]), Some(&[false, true, false]))),
        ),
        g(
            "string_vector",
            "String vector with UTF-8 and an empty string",
            V(vector(ArrayData::Str(vec!["logσ".into(), String::new(), "∇".into()]))),
        ),
        g("f32_vector", "Float32 vector [0.5, -2.0]", V(vector(ArrayData::F32(vec![0.5, -2.0])))),
        g(
            "c128_scalar",
            "ComplexF64 scalar 1.0 - 2.5im",
            V(arr(vec![], ArrayData::C128(vec![Complex64::new(1.0, -2.5)]), None)),
        ),
        g("c64_vector", "ComplexF32 vector [0.5 + 1im]", V(vector(ArrayData::C64(vec![Complex32::new(0.5, 1.0)])))),
        g("empty_matrix", "Float64 0x2 matrix", V(arr(vec![0, 2], ArrayData::F64(vec![]), None))),
        g(
            "list",
            "LIST of NULL, Int64 scalar and nested empty LIST",
            V(Value::List(vec![Value::Null, arr(vec![], ArrayData::I64(vec![42]), None), Value::List(vec![])])),
        ),
        g(
            "namedlist",
            "NAMEDLIST (x = 1.0, σ = \"a\") preserving order",
            V(Value::NamedList(vec![
                ("x".into(), arr(vec![], ArrayData::F64(vec![1.0]), None)),
                ("σ".into(), arr(vec![], ArrayData::Str(vec!["a".into()]), None)),
            ])),
        ),
        g("struct_book", "STRUCT Library.Book(author, title, year)", V(book())),
        g("ref", "REF id 2 of type Library.Book", V(Value::Ref { id: 2, type_name: "Library.Book".into() })),
        g("fnref_named", "FNREF to Base.sqrt", V(Value::FnRef(FnTarget::Named("Base.sqrt".into())))),
        g("fnref_callback", "FNREF to client callback 3", V(Value::FnRef(FnTarget::Callback(3)))),
        g(
            "fnref_type",
            "FNREF to type constructor Library.Book",
            V(Value::FnRef(FnTarget::TypeConstructor("Library.Book".into()))),
        ),
        g(
            "table",
            "TABLE x = [1.0, 2.0], y = [\"a\", missing]",
            V(Value::Table(
                TableValue::new(vec![
                    ("x".into(), TypedArray::vector(ArrayData::F64(vec![1.0, 2.0]))),
                    (
                        "y".into(),
                        TypedArray::vector_with_missing(
                            ArrayData::Str(vec!["a".into(), String::new()]),
                            Bitmap::from_flags([false, true]),
                        )
                        .expect("golden column"),
                    ),
                ])
                .expect("golden table"),
            )),
        ),
        g(
            "frame_call_named",
            "CALL Base.map with a callback and a vector, plus named arg",
            F(Frame::Call {
                callee: Callee::Named("Base.map".into()),
                positional: vec![Value::FnRef(FnTarget::Callback(1)), vector(ArrayData::I32(vec![1, 2, 3]))],
                named: vec![("n".into(), Value::Null)],
            }),
        ),
        g(
            "frame_call_reference",
            "CALL reference 4 with one argument",
            F(Frame::Call {
                callee: Callee::Reference(4),
                positional: vec![arr(vec![], ArrayData::I32(vec![2]), None)],
                named: vec![],
            }),
        ),
        g(
            "frame_call_callback",
            "CALL client callback 1 with no arguments",
            F(Frame::Call { callee: Callee::Callback(1), positional: vec![], named: vec![] }),
        ),
        g("frame_result", "RESULT Float64 scalar 2.0", F(Frame::Result(arr(vec![], ArrayData::F64(vec![2.0]), None)))),
        g(
            "frame_fail",
            "FAIL with message and detail",
            F(Frame::Fail { message: "DomainError".into(), detail: "sqrt(-1)".into() }),
        ),
        g("frame_release", "RELEASE id 6", F(Frame::Release(6))),
        g("frame_eval", "EVAL Base.sqrt(4.0)", F(Frame::Eval("Base.sqrt(4.0)".into()))),
        g(
            "frame_let",
            "LET vcat(x, y) with two bindings",
            F(Frame::Let {
                expr: "vcat(x, y)".into(),
                bindings: vec![
                    ("x".into(), vector(ArrayData::I32(vec![1, 2]))),
                    ("y".into(), vector(ArrayData::I32(vec![2, 3]))),
                ],
            }),
        ),
        g("frame_fetch", "FETCH id 2", F(Frame::Fetch(2))),
        g("frame_put", "PUT a Book record", F(Frame::Put(book()))),
        g(
            "frame_scan",
            "SCAN Library including unexported members",
            F(Frame::Scan { module: "Library".into(), include_unexported: true }),
        ),
        g("frame_out", "OUT chunk \"hi\\n\"", F(Frame::Out("hi\n".into()))),
        g("frame_err", "ERR chunk \"Warning\"", F(Frame::Err("Warning".into()))),
        g("frame_byebye", "BYEBYE", F(Frame::ByeBye)),
    ]
}

/// Directory of the checked-in vectors in this source tree.
pub fn default_golden_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/golden"))
}

/// Renders a vector file.
pub fn format_golden_file(description: &str, bytes: &[u8]) -> String {
    let mut out = format!("# {description}\n");
    for (i, chunk) in bytes.chunks(16).enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for (j, b) in chunk.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{b:02x}");
        }
    }
    out.push('\n');
    out
}

/// Parses a vector file into its description and bytes.
pub fn parse_golden_file(text: &str) -> Result<(String, Vec<u8>), String> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let description = first.strip_prefix("# ").ok_or("first line must be `# <description>`")?;
    let hex_digits: String = rest.chars().filter(|c| !c.is_whitespace()).collect();
    let bytes = hex::decode(&hex_digits).map_err(|e| format!("bad hex: {e}"))?;
    Ok((description.to_string(), bytes))
}

/// Outcome of one golden check.
#[derive(Clone, Debug)]
pub struct GoldenCheck {
    pub name: &'static str,
    pub result: Result<(), String>,
}

/// Compares every vector with its file under `dir`, in both directions.
pub fn check_golden(dir: &Path) -> Vec<GoldenCheck> {
    golden_vectors()
        .into_iter()
        .map(|g| {
            let result = (|| {
                let path = dir.join(format!("{}.hex", g.name));
                let text =
                    std::fs::read_to_string(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                let (_, expected) = parse_golden_file(&text)?;
                let actual = g.encode();
                if actual != expected {
                    return Err(format!(
                        "encoding differs from {}: expected {}, got {}",
                        path.display(),
                        hex::encode(&expected),
                        hex::encode(&actual)
                    ));
                }
                g.decodes_from(&expected)
            })();
            GoldenCheck { name: g.name, result }
        })
        .collect()
}

/// All golden encodings, used to seed the fuzzer.
pub fn golden_corpus() -> Vec<Seed> {
    golden_vectors()
        .iter()
        .filter_map(|g| match g.payload {
            Payload::Value(_) => Some(Seed { frame: false, bytes: g.encode() }),
            Payload::Frame(_) => Some(Seed { frame: true, bytes: g.encode() }),
            Payload::Hello(_) => None,
        })
        .collect()
}
