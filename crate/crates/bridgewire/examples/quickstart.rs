use bridgewire::client::{double, doubles, integers, string, CallArgs, ClientError, HostFn, Session, ValExt};

fn main() -> Result<(), ClientError> {
    let mut s = Session::spawn()?;

    let r = s.call("Base.sqrt", vec![double(4.0)])?;
    assert_eq!(r.as_f64(), Some(2.0));

    // Host functions can be passed as callbacks.
    let plus_one = HostFn::new(|_, args: CallArgs| Ok(double(args.f64(0)? + 1.0)));
    let out = s.call("Base.map", vec![plus_one.into_val(), doubles(&[1.0, 2.0, 3.0])])?;
    println!("{out:?}");

    // Remote objects come back as proxies; fetch translates them.
    let lib = s.import("Library")?;
    let book = lib.call(&mut s, "Book", vec![string("Shakespeare"), string("Romeo and Julia"), integers(&[1597])])?;
    let record = s.fetch(book.as_proxy().unwrap())?;
    let cite = lib.call(&mut s, "cite", vec![record])?;
    println!("{}", cite.as_str().unwrap());

    s.close()
}
