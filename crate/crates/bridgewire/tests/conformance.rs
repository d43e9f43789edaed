use std::collections::BTreeSet;
use std::time::Duration;

use bridgewire::conformance::gen::coverage;
use bridgewire::conformance::text::approx_eq;
use bridgewire::conformance::{
    fuzz_decoder, golden_corpus, median, roundtrip_suite, run_bench, text_roundtrip, to_text, BenchFormat, GenConfig,
    TextError, TrackingAllocator, ValueGenerator,
};
use bridgewire::core::wire::{decode_value_from_slice, encode_value_to_vec};
use bridgewire::core::{ArrayData, Bitmap, ElemType, TypedArray, Value};

#[global_allocator]
static ALLOC: TrackingAllocator = TrackingAllocator;

#[test]
fn generator_covers_every_tag_and_element_type() {
    let mut g = ValueGenerator::new(1);
    let mut seen = BTreeSet::new();
    for _ in 0..10_000 {
        coverage(&g.gen_value(), &mut seen);
    }
    let mut want: BTreeSet<(&str, Option<ElemType>)> =
        ["null", "array", "list", "namedlist", "struct", "ref", "fnref", "table"]
            .into_iter()
            .map(|t| (t, None))
            .collect();
    for e in ElemType::ALL {
        want.insert(("array", Some(e)));
        want.insert(("table", Some(e)));
    }
    let missing: Vec<_> = want.difference(&seen).collect();
    assert!(missing.is_empty(), "never generated: {missing:?}");
}

#[test]
fn generator_is_deterministic() {
    let a: Vec<Value> = {
        let mut g = ValueGenerator::new(42);
        (0..50).map(|_| g.gen_value()).collect()
    };
    let mut g = ValueGenerator::new(42);
    for v in &a {
        assert_eq!(&g.gen_value(), v);
    }
}

#[test]
fn depth_zero_gives_leaves() {
    let cfg = GenConfig { max_depth: 0, ..GenConfig::default() };
    let mut g = ValueGenerator::with_config(cfg, 1);
    for _ in 0..500 {
        let v = g.gen_value();
        assert!(!matches!(v, Value::List(_) | Value::NamedList(_) | Value::Struct(_)), "{v:?}");
    }
}

#[test]
fn generated_values_are_well_formed_and_bounded() {
    let cfg = GenConfig { max_len: 40, ..GenConfig::default() };
    let mut g = ValueGenerator::with_config(cfg, 5);
    for _ in 0..2_000 {
        let v = g.gen_value();
        v.validate().unwrap();
        if let Value::Array(a) = &v {
            assert!(a.len() <= 40, "{} elements", a.len());
        }
    }
}

#[test]
fn round_trip_suite_small() {
    roundtrip_suite(1_000, 3).unwrap();
}

#[test]
fn encodings_are_prefix_free() {
    let mut g = ValueGenerator::new(8);
    for _ in 0..300 {
        let bytes = encode_value_to_vec(&g.gen_value()).unwrap();
        let (_, used) = decode_value_from_slice(&bytes).unwrap();
        assert_eq!(used, bytes.len());
        for cut in [0, bytes.len() / 2, bytes.len() - 1] {
            let err = decode_value_from_slice(&bytes[..cut]).unwrap_err();
            assert!(err.is_eof(), "prefix of {cut}/{} bytes: {err}", bytes.len());
        }
    }
}

#[test]
fn numeric_arrays_have_fixed_stride() {
    let width = |e: ElemType| match e {
        ElemType::F64 | ElemType::I64 | ElemType::C64 => 8,
        ElemType::F32 | ElemType::I32 => 4,
        ElemType::I16 => 2,
        ElemType::I8 | ElemType::U8 | ElemType::Bool => 1,
        ElemType::C128 => 16,
        ElemType::Str => unreachable!(),
    };
    let mut g = ValueGenerator::new(9);
    let mut checked = 0;
    while checked < 500 {
        let a = g.gen_array();
        if a.elem_type() == ElemType::Str {
            continue;
        }
        let header = 4 + 8 * a.dims().len();
        let bitmap = a.missing().map_or(0, |_| a.len().div_ceil(8));
        let bytes = encode_value_to_vec(&Value::Array(a.clone())).unwrap();
        assert_eq!(bytes.len(), header + bitmap + a.len() * width(a.elem_type()));
        checked += 1;
    }
}

#[test]
fn text_baseline_exact_and_missing() {
    let v = Value::Array(TypedArray::vector(ArrayData::F64(vec![1.0, 2.0, 3.0])));
    assert_eq!(text_roundtrip(&v).unwrap(), v);
    let m = Value::Array(
        TypedArray::vector_with_missing(
            ArrayData::F64(vec![1.0, 0.0, f64::NAN]),
            Bitmap::from_flags([false, true, false]),
        )
        .unwrap(),
    );
    let text = to_text(&m).unwrap();
    assert!(text.contains("missing") && text.contains("NaN"), "{text}");
    let back = text_roundtrip(&m).unwrap();
    let Value::Array(b) = &back else { panic!() };
    assert!(b.is_missing(1) && !b.is_missing(2));
    let ArrayData::F64(x) = b.data() else { panic!() };
    assert!(x[2].is_nan());
}

#[test]
fn text_baseline_rejects_references() {
    let r = Value::Ref { id: 2, type_name: "Library.Book".into() };
    assert!(matches!(to_text(&r), Err(TextError::Unsupported(_))));
}

#[test]
fn text_baseline_round_trips_generated_data() {
    let cfg = GenConfig { data_only: true, max_len: 50, ..GenConfig::default() };
    let mut g = ValueGenerator::with_config(cfg, 77);
    for _ in 0..1_000 {
        let v = g.gen_value();
        let back = text_roundtrip(&v).unwrap_or_else(|e| panic!("{e}: {v:?}"));
        assert!(approx_eq(&back, &v), "{v:?} came back as {back:?}");
    }
}

#[test]
fn fuzz_short_run_has_no_findings() {
    let corpus = golden_corpus();
    let report = fuzz_decoder(&corpus, Duration::from_secs(3), 17);
    assert!(report.findings.is_empty(), "{:?}", report.findings.first());
    assert!(report.inputs > corpus.len() as u64);
    assert!(report.truncations > 0 && report.rejected > 0);
    assert!(report.allocation_checked, "tracking allocator is installed in this binary");
}

#[test]
fn bench_smoke_and_stability() {
    let r = run_bench(1, 1, &[BenchFormat::Binary, BenchFormat::JsonBaseline]);
    assert_eq!((r.binary.len(), r.text.len()), (1, 1));
    assert!(r.ratio().is_some());
    // Binary timings should not swing wildly between runs; retried because
    // shared machines are noisy.
    let stable = (0..3).any(|_| {
        let r = run_bench(200_000, 5, &[BenchFormat::Binary]);
        let (lo, hi) = (r.binary.iter().min().unwrap(), r.binary.iter().max().unwrap());
        hi.as_secs_f64() <= 3.0 * lo.as_secs_f64() && median(&r.binary).is_some()
    });
    assert!(stable, "binary timings varied more than 3x in every attempt");
}
