mod common;

use common::scenarios as sc;

fn ok(r: sc::Outcome) {
    if let Err(why) = r {
        panic!("{why}");
    }
}

#[test]
fn map_with_callback() {
    ok(sc::map_with_callback(&mut common::session()));
}

#[test]
fn add_missing_nan() {
    ok(sc::add_missing_nan(&mut common::session()));
}

#[test]
fn sqrt_missing() {
    ok(sc::sqrt_missing(&mut common::session()));
}

#[test]
fn lambda_square() {
    ok(sc::lambda_square(&mut common::session()));
}

#[test]
fn book_round_trip() {
    ok(sc::book_round_trip(&mut common::session()));
}

#[test]
fn outbound_rows() {
    ok(sc::outbound_rows(&mut common::session()));
}

#[test]
fn inbound_rows() {
    ok(sc::inbound_rows(&mut common::session()));
}

#[test]
fn nested_callbacks() {
    ok(sc::nested_callbacks(&mut common::session(), 5));
}

#[test]
fn interrupt_connected_session() {
    ok(sc::interrupt_and_recover(&mut common::session()));
}

#[test]
fn output_ordering() {
    ok(sc::output_ordering(&mut common::session()));
}

#[test]
fn reference_hygiene() {
    ok(sc::reference_hygiene(&mut common::session(), 200));
}

#[test]
fn table_exchange() {
    ok(sc::table_exchange(&mut common::session(), 2000));
}

#[test]
fn record_put_fetch() {
    ok(sc::record_put_fetch(&mut common::session()));
}

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use bridgewire::client::{
    double, doubles, integers, string, CallArgs, ClientError, Direction, HostFn, Proxy, Session, Val, ValExt,
};
use bridgewire::core::host::{HostData, HostVector};
use bridgewire::core::wire::Frame;
use proptest::prelude::*;

#[test]
fn import_base_and_aliases() {
    let mut s = common::session();
    let base = s.import("Base").unwrap();
    assert_eq!(base.call(&mut s, "sqrt", vec![double(4.0)]).unwrap().as_f64(), Some(2.0));
    let nn = s.import("Nn").unwrap();
    assert!(nn.get("logσ").is_some());
    let a = nn.call(&mut s, "log<sigma>", vec![double(0.0)]).unwrap().as_f64().unwrap();
    let b = nn.call(&mut s, "logσ", vec![double(0.0)]).unwrap().as_f64().unwrap();
    assert_eq!(a, b);
    assert!((a - (0.5f64).ln()).abs() < 1e-12);
    // Unexported members need import_all.
    assert!(nn.get("softplus").is_none());
    assert!(s.import_all("Nn").unwrap().get("softplus").is_some());
    assert!(matches!(s.import("Nope"), Err(ClientError::Remote { .. })));
}

#[test]
fn type_constructor_passes_as_argument() {
    let mut s = common::session();
    let lib = s.import("Library").unwrap();
    let book = lib.get("Book").unwrap();
    assert!(book.is_type());
    let r = s.call("Base.convert", vec![book.to_val(), doubles(&[1.0])]);
    // Converting to a struct type is not a numeric conversion, but the
    // constructor must arrive as a type.
    match r {
        Err(ClientError::Remote { message, .. }) => assert!(message.contains("Library.Book"), "{message}"),
        other => panic!("{other:?}"),
    }
    let t = s.call("Base.typeof", vec![book.to_val()]).unwrap();
    assert_eq!(t.as_str(), Some("DataType"));
}

#[test]
fn let_eval_scopes_bindings() {
    let mut s = common::session();
    let v = s.let_eval("vcat(x, y)", vec![("x", integers(&[1, 2])), ("y", integers(&[2, 3]))]).unwrap();
    assert_eq!(v.as_vector().unwrap().as_integers().unwrap(), &[Some(1), Some(2), Some(2), Some(3)]);
    let v = s.let_eval("sqrt + 1", vec![("sqrt", double(1.0))]).unwrap();
    assert_eq!(v.as_f64(), Some(2.0));
    assert_eq!(s.eval("sqrt(9.0)").unwrap().as_f64(), Some(3.0));
    assert!(s.eval("x").is_err(), "bindings must not leak");
}

#[test]
fn remote_errors_leave_session_usable() {
    let mut s = common::session();
    match s.eval("sqrt(4.0") {
        Err(ClientError::Remote { message, .. }) => assert!(message.contains("1:9"), "{message}"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(s.call("Base.nosuch", vec![]), Err(ClientError::Remote { .. })));
    assert_eq!(s.call("Base.sqrt", vec![double(4.0)]).unwrap().as_f64(), Some(2.0));
}

#[test]
fn callback_errors_carry_nested_detail() {
    let mut s = common::session();
    let bad = HostFn::new(|_, _| Err(ClientError::callback("host side broke")));
    match s.call("Base.map", vec![bad.into_val(), doubles(&[1.0])]) {
        Err(ClientError::Remote { message, detail }) => {
            assert!(format!("{message} {detail}").contains("host side broke"), "{message} / {detail}");
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(s.eval("1 + 1").unwrap().as_f64(), Some(2.0));
}

#[test]
fn callbacks_are_forgotten_when_dropped() {
    let mut s = common::session();
    let f = HostFn::new(|_, a: CallArgs| Ok(double(a.f64(0)? * 2.0)));
    s.call("Base.map", vec![f.clone().into_val(), doubles(&[1.0])]).unwrap();
    s.call("Base.map", vec![f.clone().into_val(), doubles(&[1.0])]).unwrap();
    assert_eq!(s.callback_count(), 1, "the same function registers once");
    drop(f);
    assert_eq!(s.callback_count(), 0);
}

#[test]
fn named_arguments_reach_the_server() {
    let mut s = common::session();
    let t = s.call_with("Base.maketable", vec![], vec![("x", doubles(&[1.0, 2.0])), ("y", integers(&[3, 4]))]).unwrap();
    let p = t.as_proxy().unwrap().clone();
    let table = s.to_table(&p).unwrap();
    assert_eq!(table.names(), ["x", "y"]);
    assert_eq!(table.nrows(), 2);
}

#[test]
fn to_table_rejects_other_proxies() {
    let mut s = common::session();
    let b = s.call("Library.Book", vec![string("a"), string("b"), integers(&[1])]).unwrap();
    assert!(matches!(s.to_table(b.as_proxy().unwrap()), Err(ClientError::Usage(_))));
}

#[test]
fn proxies_from_another_session_are_rejected() {
    let mut a = common::session();
    let mut b = common::session();
    let p = a.put(&doubles(&[1.0])).unwrap();
    assert!(matches!(b.fetch(&p), Err(ClientError::Stale { .. })));
    assert!(matches!(b.call("Base.identity", vec![p.into()]), Err(ClientError::Stale { .. })));
}

#[test]
fn put_fetch_identity_for_generated_arrays() {
    use bridgewire::conformance::{GenConfig, ValueGenerator};
    use bridgewire::core::host::translate_inbound;
    let mut s = common::session();
    let cfg = GenConfig { max_depth: 0, max_len: 50, data_only: true, ..GenConfig::default() };
    let mut g = ValueGenerator::with_config(cfg, 11);
    for _ in 0..200 {
        let a = g.gen_array();
        let hv: Val = translate_inbound(bridgewire::core::Value::Array(a), &mut |_| unreachable!()).unwrap();
        // Int64 beyond 2^53 does not survive the host double.
        if hv.annotation() == Some("Int64") {
            continue;
        }
        let p = s.put(&hv).unwrap();
        assert_eq!(s.fetch(&p).unwrap(), hv);
    }
}

#[test]
fn release_flush_counts() {
    let mut s = common::session();
    assert_eq!(s.release_flush().unwrap(), 0);
    let ps: Vec<Proxy> = (0..3).map(|i| s.put(&doubles(&[i as f64])).unwrap()).collect();
    drop(ps);
    assert_eq!(s.release_flush().unwrap(), 3);
    assert_eq!(s.release_flush().unwrap(), 0);
    let p = s.put(&doubles(&[1.0])).unwrap();
    let q = p.clone();
    drop(p);
    assert_eq!(s.release_flush().unwrap(), 0, "a clone keeps the proxy alive");
    drop(q);
    assert_eq!(s.release_flush().unwrap(), 1);
    assert_eq!(s.release_flush().unwrap(), 0);
}

fn release_log(s: &mut Session) -> Arc<Mutex<Vec<u64>>> {
    let log = Arc::new(Mutex::new(Vec::new()));
    let sink = log.clone();
    s.set_frame_tap(Some(Box::new(move |d, f: &Frame, _| {
        if let (Direction::Sent, Frame::Release(id)) = (d, f) {
            sink.lock().unwrap().push(*id);
        }
    })));
    log
}

#[derive(Clone, Debug)]
enum Op {
    Mint,
    Clone(usize),
    Drop(usize),
    Flush,
    Call,
    DropInThread(usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => Just(Op::Mint),
        1 => any::<usize>().prop_map(Op::Clone),
        3 => any::<usize>().prop_map(Op::Drop),
        1 => Just(Op::Flush),
        1 => Just(Op::Call),
        1 => any::<usize>().prop_map(Op::DropInThread),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_proxy_is_released_exactly_once(ops in proptest::collection::vec(op(), 1..60)) {
        let mut s = common::session();
        let baseline = s.call("Base.registrysize", vec![]).unwrap().as_f64().unwrap();
        let log = release_log(&mut s);
        let mut live: Vec<Proxy> = Vec::new();
        let mut minted: Vec<u64> = Vec::new();
        for op in ops {
            match op {
                Op::Mint => {
                    let p = s.put(&doubles(&[minted.len() as f64])).unwrap();
                    minted.push(p.id());
                    live.push(p);
                }
                Op::Clone(i) if !live.is_empty() => {
                    let p = live[i % live.len()].clone();
                    live.push(p);
                }
                Op::Drop(i) if !live.is_empty() => {
                    live.swap_remove(i % live.len());
                }
                Op::DropInThread(i) if !live.is_empty() => {
                    let p = live.swap_remove(i % live.len());
                    std::thread::spawn(move || drop(p)).join().unwrap();
                }
                Op::Flush => {
                    s.release_flush().unwrap();
                }
                Op::Call => {
                    s.eval("1").unwrap();
                }
                _ => {}
            }
        }
        drop(live);
        s.release_flush().unwrap();
        let mut released: BTreeMap<u64, usize> = BTreeMap::new();
        for id in log.lock().unwrap().iter() {
            *released.entry(*id).or_default() += 1;
        }
        let expected: BTreeMap<u64, usize> = minted.iter().map(|id| (*id, 1)).collect();
        prop_assert_eq!(released, expected);
        s.set_frame_tap(None);
        let after = s.call("Base.registrysize", vec![]).unwrap().as_f64().unwrap();
        prop_assert_eq!(after, baseline);
    }
}

#[test]
fn no_old_epoch_ids_are_written_after_interrupt() {
    let mut s = common::quiet_session();
    let sent = Arc::new(Mutex::new(Vec::<Frame>::new()));
    let sink = sent.clone();
    s.set_frame_tap(Some(Box::new(move |d, f: &Frame, _| {
        if d == Direction::Sent {
            sink.lock().unwrap().push(f.clone());
        }
    })));
    let mut old: Vec<Proxy> = (0..6).map(|i| s.put(&doubles(&[i as f64])).unwrap()).collect();
    // Some releases are still queued when the interrupt hits.
    old.truncate(3);
    assert_eq!(s.pending_releases(), 3);

    common::scenarios::interrupt_spin(&mut s, Duration::from_millis(100)).unwrap();
    s.reconnect().unwrap();
    sent.lock().unwrap().clear();

    let stale = old[0].clone();
    assert!(matches!(s.call("Base.identity", vec![stale.into()]), Err(ClientError::Stale { .. })));
    assert!(matches!(s.fetch(&old[1]), Err(ClientError::Stale { .. })));
    assert!(sent.lock().unwrap().is_empty(), "a stale proxy reached the wire");

    let fresh: Vec<Proxy> = (0..2).map(|i| s.put(&doubles(&[i as f64])).unwrap()).collect();
    let fresh_ids: Vec<u64> = fresh.iter().map(Proxy::id).collect();
    drop(old);
    drop(fresh);
    s.release_flush().unwrap();
    s.eval("1").unwrap();

    let mut released: Vec<u64> = sent
        .lock()
        .unwrap()
        .iter()
        .filter_map(|f| match f {
            Frame::Release(id) => Some(*id),
            _ => None,
        })
        .collect();
    released.sort();
    assert_eq!(released, fresh_ids, "only proxies minted after the interrupt are released");
}

#[test]
fn argmax_matches_host_computation() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let groups = 12usize;
    let n = 600;
    let effects: Vec<f64> = (0..groups).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let group: Vec<i32> = (0..n).map(|i| (i % groups) as i32 + 1).collect();
    let response: Vec<f64> = group.iter().map(|g| 10.0 + effects[*g as usize - 1] + rng.gen_range(-0.5..0.5)).collect();
    let mut s = common::session();
    let t = s
        .call_with("Base.maketable", vec![], vec![("group", integers(&group)), ("response", doubles(&response))])
        .unwrap();
    let col = s.call("Base.getcolumn", vec![t.clone(), string("response")]).unwrap();
    let remote = s.call("Base.argmax", vec![col]).unwrap().as_f64().unwrap() as usize;
    let host = response
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, x)| if *x > best.1 { (i, *x) } else { best })
        .0
        + 1;
    assert_eq!(remote, host);
}

#[test]
fn interrupt_without_request_is_idempotent() {
    let mut s = common::session();
    let e = s.epoch();
    s.interrupt();
    s.interrupt();
    assert!(s.epoch() > e);
    assert!(matches!(s.eval("1"), Err(ClientError::Disconnected(_))));
    s.reconnect().unwrap();
    assert_eq!(s.eval("2").unwrap().as_f64(), Some(2.0));
}

#[test]
fn connect_to_closed_port_fails() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    assert!(matches!(Session::connect(("127.0.0.1", port)), Err(ClientError::Connect(_))));
}

#[test]
fn host_values_with_missing_strings_and_logicals() {
    let mut s = common::session();
    let x: Val = HostVector::new(HostData::Character(vec![Some("a".into()), None])).into();
    let p = s.put(&x).unwrap();
    assert_eq!(s.fetch(&p).unwrap(), x);
    let l: Val = HostVector::new(HostData::Logical(vec![None, Some(true)])).into();
    assert_eq!(s.call("Base.identity", vec![l.clone()]).unwrap(), l);
}
