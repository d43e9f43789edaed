use bridgewire_core::host::{vector_inbound, vector_outbound, HostData, HostVector};
use bridgewire_core::wire::{
    decode_value, encode_value_to_vec, read_frame, write_frame_to_vec, Callee, ChunkedSource, Frame,
};
use bridgewire_core::{
    ArrayData, Bitmap, Complex32, Complex64, ElemType, FnTarget, StructValue, TableValue, TypedArray, Value,
};
use proptest::collection::vec;
use proptest::prelude::*;

fn data(elem: ElemType, n: usize) -> BoxedStrategy<ArrayData> {
    match elem {
        ElemType::F64 => vec(any::<f64>(), n).prop_map(ArrayData::F64).boxed(),
        ElemType::F32 => vec(any::<f32>(), n).prop_map(ArrayData::F32).boxed(),
        ElemType::I64 => vec(any::<i64>(), n).prop_map(ArrayData::I64).boxed(),
        ElemType::I32 => vec(any::<i32>(), n).prop_map(ArrayData::I32).boxed(),
        ElemType::I16 => vec(any::<i16>(), n).prop_map(ArrayData::I16).boxed(),
        ElemType::I8 => vec(any::<i8>(), n).prop_map(ArrayData::I8).boxed(),
        ElemType::U8 => vec(any::<u8>(), n).prop_map(ArrayData::U8).boxed(),
        ElemType::Bool => vec(any::<bool>(), n).prop_map(ArrayData::Bool).boxed(),
        ElemType::Str => vec(".{0,6}", n).prop_map(ArrayData::Str).boxed(),
        ElemType::C128 => vec(any::<(f64, f64)>(), n)
            .prop_map(|v| ArrayData::C128(v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()))
            .boxed(),
        ElemType::C64 => vec(any::<(f32, f32)>(), n)
            .prop_map(|v| ArrayData::C64(v.into_iter().map(|(a, b)| Complex32::new(a, b)).collect()))
            .boxed(),
    }
}

fn dims() -> impl Strategy<Value = Vec<usize>> {
    prop_oneof![Just(vec![]), (0usize..6).prop_map(|n| vec![n]), (0usize..4, 0usize..4).prop_map(|(a, b)| vec![a, b])]
}

fn array() -> impl Strategy<Value = TypedArray> {
    (proptest::sample::select(ElemType::ALL.to_vec()), dims()).prop_flat_map(|(elem, dims)| {
        let n: usize = dims.iter().product();
        (data(elem, n), proptest::option::of(vec(any::<bool>(), n)), Just(dims)).prop_map(|(data, flags, dims)| {
            TypedArray::new(dims, data, flags.map(Bitmap::from_flags)).expect("consistent")
        })
    })
}

fn name() -> impl Strategy<Value = String> {
    "[a-zσ][a-z0-9_]{0,5}"
}

fn unique<T>(items: Vec<(String, T)>) -> Vec<(String, T)> {
    let mut out: Vec<(String, T)> = Vec::new();
    for (n, v) in items {
        if !out.iter().any(|(m, _)| *m == n) {
            out.push((n, v));
        }
    }
    out
}

fn value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        array().prop_map(Value::Array),
        (1u64.., "[A-Z][a-z]{0,4}\\.[A-Z][a-z]{0,4}").prop_map(|(id, type_name)| Value::Ref { id, type_name }),
        name().prop_map(|n| Value::FnRef(FnTarget::Named(format!("Base.{n}")))),
        (1u64..).prop_map(|id| Value::FnRef(FnTarget::Callback(id))),
        (0usize..4).prop_flat_map(|rows| vec((name(), data(ElemType::F64, rows)), 0..3)).prop_map(|cols| {
            Value::Table(TableValue {
                columns: unique(cols).into_iter().map(|(n, d)| (n, TypedArray::vector(d))).collect(),
            })
        }),
    ];
    leaf.prop_recursive(4, 32, 4, |inner| {
        prop_oneof![
            vec(inner.clone(), 0..4).prop_map(Value::List),
            vec((name(), inner.clone()), 0..4).prop_map(|v| Value::NamedList(unique(v))),
            ("[A-Z][a-z]{0,4}\\.[A-Z][a-z]{0,4}", vec((name(), inner), 0..3))
                .prop_map(|(type_name, fields)| Value::Struct(StructValue { type_name, fields: unique(fields) })),
        ]
    })
}

proptest! {
    #[test]
    fn values_round_trip_under_any_chunking(v in value(), chunk in prop_oneof![Just(1usize), Just(7), Just(4096), 1usize..64]) {
        let bytes = encode_value_to_vec(&v).unwrap();
        let mut src = ChunkedSource::new(&bytes, chunk);
        let back = decode_value(&mut src).unwrap();
        prop_assert_eq!(&back, &v);
        prop_assert_eq!(src.remaining(), 0);
    }

    #[test]
    fn truncation_is_an_error_never_a_panic(v in value(), cut in any::<prop::sample::Index>()) {
        let bytes = encode_value_to_vec(&v).unwrap();
        let cut = cut.index(bytes.len());
        let mut src = ChunkedSource::new(&bytes[..cut], 3);
        prop_assert!(decode_value(&mut src).is_err());
    }

    #[test]
    fn frames_round_trip(args in vec(value(), 0..3), named in vec((name(), value()), 0..3)) {
        let frame = Frame::Call { callee: Callee::Named("Base.map".into()), positional: args, named: unique(named) };
        let bytes = write_frame_to_vec(&frame).unwrap();
        let back = read_frame(&mut ChunkedSource::new(&bytes, 5)).unwrap();
        prop_assert_eq!(back, frame);
    }

    #[test]
    fn host_doubles_round_trip(xs in vec(proptest::option::of(any::<f64>()), 0..20)) {
        let hv = HostVector::new(HostData::Double(xs));
        let Value::Array(a) = vector_outbound(&hv).unwrap() else { panic!("not an array") };
        prop_assert_eq!(vector_inbound(&a), hv);
    }

    #[test]
    fn host_strings_round_trip(xs in vec(proptest::option::of(".{0,5}"), 2..10)) {
        let hv = HostVector::new(HostData::Character(xs));
        let Value::Array(a) = vector_outbound(&hv).unwrap() else { panic!("not an array") };
        prop_assert_eq!(vector_inbound(&a), hv);
    }
}
