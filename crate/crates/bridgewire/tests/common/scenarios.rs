//! End-to-end scenarios shared by the integration tests and the acceptance
//! harness. Each returns a short note on success or the reason it failed.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use bridgewire::client::{
    double, doubles, integers, string, CallArgs, ClientError, Direction, HostFn, Proxy, Session, SpawnOptions, Val,
    ValExt,
};
use bridgewire::core::host::{HostData, HostList, HostTable, HostValue, HostVector};
use bridgewire::core::wire::Frame;
use bridgewire::core::Complex64;

pub type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn e(err: ClientError) -> String {
    match err.detail() {
        "" => err.to_string(),
        d => format!("{err} ({d})"),
    }
}

fn dbls(v: &Val) -> Option<Vec<Option<f64>>> {
    v.as_vector()?.as_doubles().map(<[_]>::to_vec)
}

fn same_bits(a: &[Option<f64>], b: &[Option<f64>]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()),
            (None, None) => true,
            _ => false,
        })
}

pub fn server_bin() -> SpawnOptions {
    SpawnOptions { server_bin: Some(env!("CARGO_BIN_EXE_bridgewire").into()), ..SpawnOptions::default() }
}

/// `map` over [1, 2, 3] with a host callback adding one.
pub fn map_with_callback(s: &mut Session) -> Outcome {
    let start = Instant::now();
    let plus_one = HostFn::new(|_, args: CallArgs| Ok(double(args.f64(0)? + 1.0)));
    let out = s.call("Base.map", vec![plus_one.into_val(), doubles(&[1.0, 2.0, 3.0])]).map_err(e)?;
    let took = start.elapsed();
    ensure!(dbls(&out) == Some(vec![Some(2.0), Some(3.0), Some(4.0)]), "got {out:?}");
    ensure!(took < Duration::from_secs(1), "took {took:?}");
    Ok(format!("[2, 3, 4] in {took:?}"))
}

/// `add` keeps missing and NaN apart position by position.
pub fn add_missing_nan(s: &mut Session) -> Outcome {
    let x: Val = HostVector::new(HostData::Double(vec![Some(1.0), None, Some(f64::NAN)])).into();
    let out = s.call("Base.add", vec![x, doubles(&[1.0, 2.0, 3.0])]).map_err(e)?;
    let got = dbls(&out).ok_or_else(|| format!("not doubles: {out:?}"))?;
    ensure!(got.len() == 3, "length {}", got.len());
    ensure!(got[0] == Some(2.0), "first element {:?}", got[0]);
    ensure!(got[1].is_none(), "second element should be missing, got {:?}", got[1]);
    ensure!(got[2].is_some_and(f64::is_nan), "third element should be NaN, got {:?}", got[2]);
    Ok("[2, NA, NaN]".into())
}

pub fn sqrt_missing(s: &mut Session) -> Outcome {
    let na: Val = HostVector::new(HostData::Double(vec![None])).into();
    let out = s.call("Base.sqrt", vec![na]).map_err(e)?;
    ensure!(dbls(&out) == Some(vec![None]), "got {out:?}");
    Ok("NA".into())
}

pub fn lambda_square(s: &mut Session) -> Outcome {
    let f = s.eval("fn(x) -> x * x").map_err(e)?;
    ensure!(f.as_proxy().is_some_and(|p| p.type_name() == "Function"), "lambda came back as {f:?}");
    let out = s.apply(&f, vec![integers(&[2])], vec![]).map_err(e)?;
    ensure!(out.as_f64() == Some(4.0), "f(2) gave {out:?}");
    Ok("4".into())
}

pub const CITATION: &str = "Shakespeare: Romeo and Julia (1597)";

/// Constructs a Book remotely, fetches it as an annotated record, and
/// passes the record back to `cite`.
pub fn book_round_trip(s: &mut Session) -> Outcome {
    let lib = s.import("Library").map_err(e)?;
    let book =
        lib.call(s, "Book", vec![string("Shakespeare"), string("Romeo and Julia"), integers(&[1597])]).map_err(e)?;
    let proxy = book.as_proxy().ok_or_else(|| format!("Book should be a proxy, got {book:?}"))?.clone();
    ensure!(proxy.type_name() == "Library.Book", "proxy type {}", proxy.type_name());
    let record = s.fetch(&proxy).map_err(e)?;
    let rec = record.as_record().ok_or_else(|| format!("fetch gave {record:?}"))?;
    ensure!(rec.annotation.as_deref() == Some("Library.Book"), "annotation {:?}", rec.annotation);
    let names: Vec<_> = rec.items.iter().map(|(n, _)| n.as_deref().unwrap_or("")).collect();
    ensure!(names == ["author", "title", "year"], "fields {names:?}");
    ensure!(rec.get("author").and_then(ValExt::as_str) == Some("Shakespeare"), "author {:?}", rec.get("author"));
    ensure!(rec.get("year").and_then(ValExt::as_f64) == Some(1597.0), "year {:?}", rec.get("year"));
    for arg in [record.clone(), proxy.into()] {
        let c = lib.call(s, "cite", vec![arg]).map_err(e)?;
        ensure!(c.as_str() == Some(CITATION), "cite gave {c:?}");
    }
    Ok(CITATION.into())
}

fn type_of(s: &mut Session, v: Val) -> Result<String, String> {
    let t = s.call("Base.typeof", vec![v]).map_err(e)?;
    t.as_str().map(str::to_string).ok_or_else(|| format!("typeof gave {t:?}"))
}

/// One check per row of the host-to-remote table: the remote type of each
/// basic host kind, as a one-element vector and as an array.
pub fn outbound_rows(s: &mut Session) -> Outcome {
    let c = |re, im| Some(Complex64::new(re, im));
    let rows: Vec<(&str, HostVector, &str)> = vec![
        ("integer", HostVector::integer(1), "Int64"),
        ("integer vector", HostVector::integers(&[1, 2]), "Array{Int64,1}"),
        ("double", HostVector::double(1.5), "Float64"),
        ("double matrix", HostVector::doubles(&[1.0, 2.0, 3.0, 4.0]).with_dims(vec![2, 2]), "Array{Float64,2}"),
        ("logical", HostVector::logicals(&[true]), "Bool"),
        ("logical vector", HostVector::logicals(&[true, false]), "Array{Bool,1}"),
        ("character", HostVector::string("a"), "String"),
        ("character vector", HostVector::strings(&["a", "b"]), "Array{String,1}"),
        ("complex", HostVector::new(HostData::Complex(vec![c(1.0, 2.0)])), "Complex{Float64}"),
        ("raw", HostVector::new(HostData::Raw(vec![Some(7)])), "UInt8"),
        ("raw vector", HostVector::new(HostData::Raw(vec![Some(7), Some(8)])), "Array{UInt8,1}"),
        (
            "double vector with NA",
            HostVector::new(HostData::Double(vec![Some(1.0), None])),
            "Array{Union{Missing, Float64},1}",
        ),
    ];
    let n = rows.len();
    for (label, hv, want) in rows {
        let got = type_of(s, hv.into())?;
        ensure!(got == want, "{label}: remote type {got}, expected {want}");
    }
    Ok(format!("{n} rows"))
}

/// One check per row of the remote-to-host table: host kind, annotation
/// presence, and that the annotated value goes back as the original type.
pub fn inbound_rows(s: &mut Session) -> Outcome {
    // (expression, host kind, annotation, remote type after the round trip)
    let rows: &[(&str, &str, Option<&str>, &str)] = &[
        ("1.5", "double", None, "Float64"),
        ("convert(\"Float16\", 1.5)", "double", Some("Float16"), "Float16"),
        ("convert(\"Float32\", 1.5)", "double", Some("Float32"), "Float32"),
        ("convert(\"UInt32\", 7)", "double", Some("UInt32"), "UInt32"),
        ("convert(\"Int64\", 7)", "integer", None, "Int64"),
        ("convert(\"Int64\", 1099511627776)", "double", Some("Int64"), "Int64"),
        ("convert(\"Int8\", 3)", "integer", Some("Int8"), "Int8"),
        ("convert(\"Int16\", 3)", "integer", Some("Int16"), "Int16"),
        ("convert(\"UInt16\", 3)", "integer", Some("UInt16"), "UInt16"),
        ("convert(\"Int32\", 3)", "integer", Some("Int32"), "Int32"),
        ("convert(\"Char\", 65)", "integer", Some("Char"), "Char"),
        ("convert(\"UInt8\", 3)", "raw", None, "UInt8"),
        ("convert(\"UInt64\", 3)", "raw", Some("UInt64"), "UInt64"),
        ("convert(\"Int128\", 3)", "raw", Some("Int128"), "Int128"),
        ("convert(\"UInt128\", 3)", "raw", Some("UInt128"), "UInt128"),
        ("convert(\"Ptr\", 3)", "raw", Some("Ptr"), "Ptr"),
        ("convert(\"Complex{Float64}\", 3)", "complex", None, "Complex{Float64}"),
        ("convert(\"Complex{Int8}\", 3)", "complex", Some("Complex{Int8}"), "Complex{Int8}"),
        ("convert(\"Complex{Int16}\", 3)", "complex", Some("Complex{Int16}"), "Complex{Int16}"),
        ("convert(\"Complex{Int32}\", 3)", "complex", Some("Complex{Int32}"), "Complex{Int32}"),
        ("convert(\"Complex{Int64}\", 3)", "complex", Some("Complex{Int64}"), "Complex{Int64}"),
        ("convert(\"Complex{Float16}\", 3)", "complex", Some("Complex{Float16}"), "Complex{Float16}"),
        ("convert(\"Complex{Float32}\", 3)", "complex", Some("Complex{Float32}"), "Complex{Float32}"),
        ("\"text\"", "character", None, "String"),
    ];
    for &(src, kind, annotation, back) in rows {
        let v = s.eval(src).map_err(e)?;
        let hv = v.as_vector().ok_or_else(|| format!("{src}: not a vector: {v:?}"))?;
        ensure!(hv.data.kind_name() == kind, "{src}: host kind {}, expected {kind}", hv.data.kind_name());
        ensure!(
            hv.annotation.as_deref() == annotation,
            "{src}: annotation {:?}, expected {annotation:?}",
            hv.annotation
        );
        let t = type_of(s, v.clone())?;
        ensure!(t == back, "{src}: sent back as {t}, expected {back}");
    }
    Ok(format!("{} rows", rows.len()))
}

/// Callbacks nested five deep: each level maps the next level's host
/// function over its argument and transforms the result.
pub fn nested_callbacks(s: &mut Session, depth: usize) -> Outcome {
    fn level(k: usize, x: f64) -> f64 {
        3.0 * x - k as f64
    }
    fn leaf(x: f64) -> f64 {
        x * x + 0.5
    }
    let deepest = Arc::new(AtomicUsize::new(0));
    let active = Arc::new(AtomicUsize::new(0));
    let mut f = {
        let (deepest, active) = (deepest.clone(), active.clone());
        HostFn::new(move |_, args: CallArgs| {
            let d = active.load(Ordering::SeqCst) + 1;
            deepest.fetch_max(d, Ordering::SeqCst);
            Ok(double(leaf(args.f64(0)?)))
        })
    };
    for k in (1..depth).rev() {
        let inner = f.clone();
        let (deepest, active) = (deepest.clone(), active.clone());
        f = HostFn::new(move |s: &mut Session, args: CallArgs| {
            let d = active.fetch_add(1, Ordering::SeqCst) + 1;
            deepest.fetch_max(d, Ordering::SeqCst);
            let x = args.positional.first().cloned().ok_or_else(|| ClientError::callback("no argument"))?;
            let r = s.call("Base.map", vec![inner.clone().into_val(), x]);
            active.fetch_sub(1, Ordering::SeqCst);
            let y = r?.as_f64().ok_or_else(|| ClientError::callback("inner result is not a number"))?;
            Ok(double(level(k, y)))
        });
    }
    let xs = [0.25, -1.5, 2.0, 7.0];
    let out = s.call("Base.map", vec![f.into_val(), doubles(&xs)]).map_err(e)?;
    let expected: Vec<Option<f64>> =
        xs.iter().map(|&x| Some((1..depth).rev().fold(leaf(x), |acc, k| level(k, acc)))).collect();
    let got = dbls(&out).ok_or_else(|| format!("result {out:?}"))?;
    ensure!(same_bits(&got, &expected), "remote {got:?}, in-host {expected:?}");
    let d = deepest.load(Ordering::SeqCst);
    ensure!(d == depth, "deepest callback nesting {d}, expected {depth}");
    Ok(format!("depth {d}, {} values exact", xs.len()))
}

/// Interrupts `spin()` from another thread after `after`; returns how long
/// control took to come back.
pub fn interrupt_spin(s: &mut Session, after: Duration) -> Result<Duration, String> {
    let handle = s.interrupt_handle();
    let start = Instant::now();
    let t = thread::spawn(move || {
        thread::sleep(after);
        handle.interrupt();
    });
    let r = s.eval("Base.spin()");
    let back = start.elapsed().saturating_sub(after);
    t.join().map_err(|_| "interrupt thread panicked".to_string())?;
    match r {
        Err(ClientError::Interrupted) => Ok(back),
        other => Err(format!("spin ended with {other:?}")),
    }
}

/// Spawned session: interrupt, then sqrt(4.0) works and older proxies are
/// stale.
pub fn interrupt_and_recover(s: &mut Session) -> Outcome {
    let before = s.put(&doubles(&[1.0, 2.0])).map_err(e)?;
    let epoch = s.epoch();
    let back = interrupt_spin(s, Duration::from_millis(300))?;
    ensure!(back < Duration::from_secs(2), "control came back after {back:?}");
    if !s.is_spawned() {
        s.reconnect().map_err(e)?;
    }
    let r = s.call("Base.sqrt", vec![double(4.0)]).map_err(e)?;
    ensure!(r.as_f64() == Some(2.0), "sqrt(4.0) after interrupt gave {r:?}");
    ensure!(s.epoch() > epoch, "epoch did not advance");
    match s.fetch(&before) {
        Err(ClientError::Stale { .. }) => {}
        other => return Err(format!("old proxy should be stale, got {other:?}")),
    }
    match s.call("Base.identity", vec![before.clone().into()]) {
        Err(ClientError::Stale { .. }) => {}
        other => return Err(format!("old proxy as argument should be stale, got {other:?}")),
    }
    Ok(format!("returned in {back:?}"))
}

/// 100 output chunks arrive in order and before the result.
pub fn output_ordering(s: &mut Session) -> Outcome {
    let log = Arc::new(Mutex::new(Vec::<String>::new()));
    let sink = log.clone();
    s.set_output(move |_, text| sink.lock().unwrap().push(text.to_string()));
    let r = s.eval("length(map(fn(i) -> print(string(\"chunk \", i, \";\")), range(1, 100)))");
    let chunks = std::mem::take(&mut *log.lock().unwrap());
    let r = r.map_err(e)?;
    ensure!(r.as_f64() == Some(100.0), "result {r:?}");
    let expected: String = (1..=100).map(|i| format!("chunk {i};")).collect();
    ensure!(chunks.len() == 100, "{} chunks", chunks.len());
    ensure!(chunks.concat() == expected, "concatenation differs");
    Ok("100 chunks, byte-identical".into())
}

fn registry_size(s: &mut Session) -> Result<f64, String> {
    let v = s.call("Base.registrysize", vec![]).map_err(e)?;
    v.as_f64().ok_or_else(|| format!("registrysize gave {v:?}"))
}

/// Mints `n` proxies of several kinds, drops them, flushes, and compares
/// the registry size with the baseline.
pub fn reference_hygiene(s: &mut Session, n: usize) -> Outcome {
    let baseline = registry_size(s)?;
    let mut proxies: Vec<Proxy> = Vec::with_capacity(n);
    for i in 0..n {
        let v = match i % 4 {
            0 => s.put(&doubles(&[i as f64, 1.0])).map(Val::from),
            1 => s.eval("fn(x) -> x + 1"),
            2 => s.call("Library.Book", vec![string("A"), string(&format!("T{i}")), integers(&[i as i32])]),
            _ => s.call("Base.maketable", vec![]),
        }
        .map_err(e)?;
        proxies.push(v.as_proxy().ok_or_else(|| format!("minted {v:?}"))?.clone());
    }
    let peak = registry_size(s)?;
    ensure!(peak >= baseline + n as f64, "registry grew to {peak} from {baseline} after {n} proxies");
    drop(proxies);
    ensure!(s.pending_releases() == n, "{} releases queued, expected {n}", s.pending_releases());
    s.release_flush().map_err(e)?;
    let after = registry_size(s)?;
    ensure!(after == baseline, "registry {after} after release, baseline {baseline}");
    Ok(format!("{n} proxies, registry back to {after}"))
}

/// Builds a remote table, passes it through several calls as a reference
/// and converts it back, counting bytes on the wire.
pub fn table_exchange(s: &mut Session, rows: usize) -> Outcome {
    let stats = Arc::new(Mutex::new(Vec::<(Direction, usize)>::new()));
    let tap = stats.clone();
    s.set_frame_tap(Some(Box::new(move |d, _: &Frame, n| tap.lock().unwrap().push((d, n)))));
    let zeta: Vec<f64> = (0..rows).map(|i| i as f64 * 0.5).collect();
    let alpha: Vec<i32> = (0..rows as i32).map(|i| i * 3 - 7).collect();
    let mid: Vec<Option<String>> = (0..rows).map(|i| if i % 5 == 0 { None } else { Some(format!("r{i}")) }).collect();

    let sent0 = s.stats().bytes_sent;
    let t = s
        .call_with(
            "Base.maketable",
            vec![],
            vec![
                ("zeta", doubles(&zeta)),
                ("alpha", integers(&alpha)),
                ("mid", HostVector::new(HostData::Character(mid.clone())).into()),
            ],
        )
        .map_err(e)?;
    let build_sent = s.stats().bytes_sent - sent0;
    let p = t.as_proxy().ok_or_else(|| format!("maketable gave {t:?}"))?.clone();
    ensure!(p.type_name() == "Base.Table", "proxy type {}", p.type_name());

    let before = s.stats();
    let same = s.call("Base.identity", vec![p.clone().into()]).map_err(e)?;
    ensure!(same.as_proxy().is_some_and(|q| q.id() == p.id()), "identity gave {same:?}");
    let sel =
        s.call("Base.select", vec![p.clone().into(), string("zeta"), string("alpha"), string("mid")]).map_err(e)?;
    let sel = sel.as_proxy().ok_or_else(|| format!("select gave {sel:?}"))?.clone();
    let mid_stats = s.stats();
    let passing = (mid_stats.bytes_sent - before.bytes_sent) + (mid_stats.bytes_received - before.bytes_received);
    ensure!(passing < 512, "passing references moved {passing} bytes");

    let recv0 = s.stats().bytes_received;
    let back: HostTable = s.to_table(&sel).map_err(e)?;
    let fetch_recv = s.stats().bytes_received - recv0;
    s.set_frame_tap(None);

    ensure!(back.names() == ["zeta", "alpha", "mid"], "column order {:?}", back.names());
    ensure!(back.nrows() == rows, "{} rows", back.nrows());
    let z = back.column("zeta").and_then(HostVector::as_doubles).ok_or("zeta is not double")?;
    ensure!(z.iter().zip(&zeta).all(|(a, b)| *a == Some(*b)), "zeta values differ");
    let a = back.column("alpha").and_then(HostVector::as_integers).ok_or("alpha is not integer")?;
    ensure!(a.iter().zip(&alpha).all(|(x, y)| *x == Some(*y)), "alpha values differ");
    let m = back.column("mid").and_then(HostVector::as_strings).ok_or("mid is not character")?;
    ensure!(m == mid.as_slice(), "mid values differ");

    // Data crosses once each way: one payload plus headers. The integer
    // column comes back widened to Int64.
    let strings: usize = mid.iter().map(|s| 4 + s.as_ref().map_or(0, String::len)).sum();
    let bitmap = rows.div_ceil(8);
    let (up, down) = ((rows * 12 + strings + bitmap) as u64, (rows * 16 + strings + bitmap) as u64);
    ensure!((up..up + 256).contains(&build_sent), "build sent {build_sent} bytes for a {up}-byte payload");
    ensure!((down..down + 256).contains(&fetch_recv), "fetch received {fetch_recv} bytes for a {down}-byte payload");
    let payload = up;
    let frames = stats.lock().unwrap().len();
    Ok(format!("{rows} rows, {payload} data bytes once each way, {passing} bytes for references, {frames} frames"))
}

/// A record built on the host, sent by value, comes back equal.
pub fn record_put_fetch(s: &mut Session) -> Outcome {
    let mut rec = HostList::named(vec![
        ("author", string("Shakespeare")),
        ("title", string("Romeo and Julia")),
        ("year", integers(&[1597])),
    ]);
    rec.annotation = Some("Library.Book".into());
    let p = s.put(&HostValue::List(rec.clone())).map_err(e)?;
    let back = s.fetch(&p).map_err(e)?;
    ensure!(back == HostValue::List(rec), "fetched {back:?}");
    Ok("record survives put/fetch".into())
}

pub fn spawned() -> Result<Session, String> {
    let mut s = Session::spawn_with(server_bin()).map_err(e)?;
    s.set_output(|_, _| {});
    Ok(s)
}
