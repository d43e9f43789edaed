//! Test infrastructure shared by the test suites and the `selftest` and
//! `bench` commands: value generators, golden vectors, the decoder fuzzer
//! and the text baseline.

pub mod fuzz;
pub mod gen;
pub mod golden;
pub mod text;

use std::hint::black_box;
use std::time::{Duration, Instant};

use bridgewire_core::wire::{decode_value, decode_value_from_slice, encode_value_to_vec, ChunkedSource};
use bridgewire_core::{ArrayData, TypedArray, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use fuzz::{fuzz_decoder, Finding, FindingKind, FuzzReport, Seed, TrackingAllocator};
pub use gen::{GenConfig, ValueGenerator};
pub use golden::{check_golden, default_golden_dir, golden_corpus, golden_vectors, GoldenVector};
pub use text::{from_text, text_roundtrip, to_text, TextError};

/// Generates `count` values and checks encode/decode identity when the
/// bytes arrive in chunks of 1, 7 and 4096. Returns the first failure.
pub fn roundtrip_suite(count: usize, seed: u64) -> Result<(), String> {
    let mut g = ValueGenerator::new(seed);
    for i in 0..count {
        let v = g.gen_value();
        let bytes = encode_value_to_vec(&v).map_err(|e| format!("value {i}: encode failed: {e}"))?;
        for chunk in [1, 7, 4096] {
            let mut src = ChunkedSource::new(&bytes, chunk);
            let back = decode_value(&mut src).map_err(|e| format!("value {i}, chunk {chunk}: {e}"))?;
            if back != v {
                return Err(format!("value {i}, chunk {chunk}: decoded value differs"));
            }
            if src.remaining() != 0 {
                return Err(format!("value {i}, chunk {chunk}: {} bytes left over", src.remaining()));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchFormat {
    Binary,
    JsonBaseline,
}

/// Timings of encode+decode round trips, one entry per run.
#[derive(Clone, Debug, Default)]
pub struct BenchReport {
    pub size: usize,
    pub binary: Vec<Duration>,
    pub text: Vec<Duration>,
}

pub fn median(times: &[Duration]) -> Option<Duration> {
    let mut t = times.to_vec();
    t.sort();
    t.get(t.len() / 2).copied()
}

impl BenchReport {
    /// Text median over binary median.
    pub fn ratio(&self) -> Option<f64> {
        let b = median(&self.binary)?.as_secs_f64();
        let t = median(&self.text)?.as_secs_f64();
        Some(t / b.max(1e-9))
    }
}

/// A vector of `size` doubles of mixed magnitude.
pub fn bench_value(size: usize, seed: u64) -> Value {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..size).map(|_| rng.gen::<f64>() * 10f64.powi(rng.gen_range(-3..6))).collect();
    Value::Array(TypedArray::vector(ArrayData::F64(data)))
}

fn time_binary(v: &Value) -> Duration {
    let start = Instant::now();
    let bytes = encode_value_to_vec(black_box(v)).expect("bench value encodes");
    let (back, _) = decode_value_from_slice(black_box(&bytes)).expect("bench value decodes");
    let t = start.elapsed();
    assert_eq!(&back, v, "binary round trip changed the value");
    t
}

fn time_text(v: &Value) -> Duration {
    let start = Instant::now();
    let s = to_text(black_box(v)).expect("bench value has a text form");
    let back = from_text(black_box(&s)).expect("bench text parses");
    let t = start.elapsed();
    assert!(text::approx_eq(&back, v), "text round trip changed the value");
    t
}

/// Times `runs` round trips of a `size`-element double vector in each
/// requested format.
pub fn run_bench(size: usize, runs: usize, formats: &[BenchFormat]) -> BenchReport {
    let v = bench_value(size, 7);
    let mut report = BenchReport { size, ..BenchReport::default() };
    for _ in 0..runs {
        for f in formats {
            match f {
                BenchFormat::Binary => report.binary.push(time_binary(&v)),
                BenchFormat::JsonBaseline => report.text.push(time_text(&v)),
            }
        }
    }
    report
}
