//! Mutation fuzzing of the decoder.

use std::alloc::{GlobalAlloc, Layout, System};
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use bridgewire_core::wire::{decode_value, read_frame, ChunkedSource};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest single allocation a decode may make.
pub const ALLOCATION_CAP: usize = 256 << 20;

/// Longest a single input may take before it counts as a hang.
pub const HANG_LIMIT: Duration = Duration::from_secs(1);

static LARGEST: AtomicUsize = AtomicUsize::new(0);
static INSTALLED: AtomicBool = AtomicBool::new(false);

/// Global allocator that remembers the largest request. Install it in a
/// binary with `#[global_allocator]` to let the fuzzer enforce
/// [`ALLOCATION_CAP`]; without it the cap goes unchecked.
pub struct TrackingAllocator;

unsafe impl GlobalAlloc for TrackingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        note(layout.size());
        System.alloc(layout)
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        note(layout.size());
        System.alloc_zeroed(layout)
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        note(new_size);
        System.realloc(ptr, layout, new_size)
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout)
    }
}

fn note(size: usize) {
    if !INSTALLED.load(Ordering::Relaxed) {
        INSTALLED.store(true, Ordering::Relaxed);
    }
    LARGEST.fetch_max(size, Ordering::Relaxed);
}

/// True once [`TrackingAllocator`] has served an allocation.
pub fn allocation_tracking() -> bool {
    INSTALLED.load(Ordering::Relaxed)
}

fn take_largest() -> usize {
    LARGEST.swap(0, Ordering::Relaxed)
}

/// A corpus entry: encoded bytes of either a frame or a bare value.
#[derive(Clone, Debug)]
pub struct Seed {
    pub frame: bool,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FindingKind {
    Panic(String),
    Hang(Duration),
    Allocation(usize),
    /// A strict prefix of a valid encoding did not end in a premature-end
    /// error.
    TruncationAccepted(String),
}

#[derive(Clone, Debug)]
pub struct Finding {
    pub kind: FindingKind,
    pub input: Vec<u8>,
    pub frame: bool,
}

#[derive(Clone, Debug, Default)]
pub struct FuzzReport {
    pub inputs: u64,
    pub decoded_ok: u64,
    pub rejected: u64,
    pub truncations: u64,
    pub findings: Vec<Finding>,
    pub allocation_checked: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Outcome {
    Ok,
    Eof,
    Rejected,
}

/// Decodes one frame or value; returns how it ended and the bytes used.
fn decode_once(input: &[u8], frame: bool, chunk: usize) -> (Outcome, usize) {
    let mut src = ChunkedSource::new(input, chunk);
    let res = if frame { read_frame(&mut src).map(|_| ()) } else { decode_value(&mut src).map(|_| ()) };
    let outcome = match res {
        Ok(()) => Outcome::Ok,
        Err(e) if e.is_eof() => Outcome::Eof,
        Err(_) => Outcome::Rejected,
    };
    (outcome, src.position())
}

/// Runs one input, turning a panic, overlong run or oversize allocation
/// into a finding.
fn run_one(input: &[u8], frame: bool, chunk: usize) -> Result<(Outcome, usize), FindingKind> {
    take_largest();
    let start = Instant::now();
    let out = panic::catch_unwind(AssertUnwindSafe(|| decode_once(input, frame, chunk)));
    let elapsed = start.elapsed();
    let largest = take_largest();
    let out = out.map_err(|p| {
        FindingKind::Panic(
            p.downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default(),
        )
    })?;
    if elapsed > HANG_LIMIT {
        return Err(FindingKind::Hang(elapsed));
    }
    if largest > ALLOCATION_CAP {
        return Err(FindingKind::Allocation(largest));
    }
    Ok(out)
}

const INTERESTING: &[u8] = &[0x00, 0x01, 0x02, 0x07, 0x0b, 0x0c, 0x0f, 0x50, 0x51, 0x7f, 0x80, 0xfe, 0xff];

fn mutate(rng: &mut ChaCha8Rng, seed: &[u8], other: &[u8]) -> Vec<u8> {
    let mut out = seed.to_vec();
    for _ in 0..rng.gen_range(1..=4) {
        let len = out.len();
        match rng.gen_range(0..8) {
            0 if len > 0 => {
                let i = rng.gen_range(0..len);
                out[i] ^= 1 << rng.gen_range(0..8);
            }
            1 if len > 0 => {
                let i = rng.gen_range(0..len);
                out[i] = INTERESTING[rng.gen_range(0..INTERESTING.len())];
            }
            2 => {
                let i = rng.gen_range(0..=len);
                let n = rng.gen_range(1..8);
                let bytes: Vec<u8> = (0..n).map(|_| rng.gen()).collect();
                out.splice(i..i, bytes);
            }
            3 if len > 0 => {
                let i = rng.gen_range(0..len);
                let j = rng.gen_range(i..=len.min(i + 16));
                out.drain(i..j);
            }
            4 if len >= 4 => {
                // Large length or dimension fields.
                let i = rng.gen_range(0..=len - 4);
                let v: u32 = [u32::MAX, 0x8000_0000, 0x7fff_ffff, 1 << 20][rng.gen_range(0..4)];
                out[i..i + 4].copy_from_slice(&v.to_le_bytes());
            }
            5 if len >= 8 => {
                let i = rng.gen_range(0..=len - 8);
                let v: i64 = [i64::MAX, i64::MIN, -1, 1 << 31, 1 << 40][rng.gen_range(0..5)];
                out[i..i + 8].copy_from_slice(&v.to_le_bytes());
            }
            6 if len > 0 && !other.is_empty() => {
                let i = rng.gen_range(0..len);
                let j = rng.gen_range(0..other.len());
                out.truncate(i);
                out.extend_from_slice(&other[j..]);
            }
            7 if len > 0 => {
                let i = rng.gen_range(0..len);
                let j = rng.gen_range(i..=len);
                let chunk = out[i..j].to_vec();
                out.splice(j..j, chunk);
            }
            _ => out.push(rng.gen()),
        }
    }
    out
}

/// Feeds mutated corpus entries to the decoders until `budget` runs out.
/// Every input also goes through truncation at a random point, which must
/// end in a premature-end error for inputs that decode in full.
pub fn fuzz_decoder(corpus: &[Seed], budget: Duration, seed: u64) -> FuzzReport {
    let mut report = FuzzReport::default();
    if corpus.is_empty() {
        return report;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deadline = Instant::now() + budget;
    let quiet = QuietPanics::install();
    let finding = |report: &mut FuzzReport, kind, input: &[u8], frame| {
        report.findings.push(Finding { kind, input: input.to_vec(), frame });
    };
    // The unmutated corpus first.
    let mut queue: Vec<(Vec<u8>, bool)> = corpus.iter().map(|s| (s.bytes.clone(), s.frame)).collect();
    while Instant::now() < deadline || !queue.is_empty() {
        let (input, frame) = match queue.pop() {
            Some(x) => x,
            None => {
                let s = &corpus[rng.gen_range(0..corpus.len())];
                let o = &corpus[rng.gen_range(0..corpus.len())];
                (mutate(&mut rng, &s.bytes, &o.bytes), s.frame)
            }
        };
        let chunk = [1, 7, 4096][rng.gen_range(0..3)];
        report.inputs += 1;
        match run_one(&input, frame, chunk) {
            Err(kind) => finding(&mut report, kind, &input, frame),
            Ok((Outcome::Ok, used)) => {
                report.decoded_ok += 1;
                if used > 0 {
                    // Any strict prefix of a complete encoding is premature.
                    let cut = rng.gen_range(0..used);
                    report.truncations += 1;
                    match run_one(&input[..cut], frame, chunk) {
                        Ok((Outcome::Eof, _)) => {}
                        Ok((other, _)) => finding(
                            &mut report,
                            FindingKind::TruncationAccepted(format!("prefix of {cut} bytes gave {other:?}")),
                            &input[..cut],
                            frame,
                        ),
                        Err(kind) => finding(&mut report, kind, &input[..cut], frame),
                    }
                }
            }
            Ok(_) => report.rejected += 1,
        }
    }
    drop(quiet);
    report.allocation_checked = allocation_tracking();
    report
}

/// Silences the default panic message while the fuzzer catches panics.
struct QuietPanics {
    previous: Option<Box<dyn Fn(&panic::PanicHookInfo<'_>) + Sync + Send + 'static>>,
}

impl QuietPanics {
    fn install() -> QuietPanics {
        let previous = panic::take_hook();
        panic::set_hook(Box::new(|_| {}));
        QuietPanics { previous: Some(previous) }
    }
}

impl Drop for QuietPanics {
    fn drop(&mut self) {
        if let Some(p) = self.previous.take() {
            panic::set_hook(p);
        }
    }
}
