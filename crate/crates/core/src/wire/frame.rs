use alloc::string::String;
use alloc::vec::Vec;

use super::codec::{read_value, write_value, Reader, Writer};
use super::io::{Sink, Source};
use super::WireError;
use crate::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameKind {
    Call = 0x01,
    Result = 0x02,
    Fail = 0x03,
    Release = 0x04,
    Eval = 0x05,
    Let = 0x06,
    Fetch = 0x07,
    Put = 0x08,
    Scan = 0x09,
    ByeBye = 0x0F,
    Out = 0x50,
    Err = 0x51,
}

impl FrameKind {
    pub fn from_code(code: u8) -> Option<FrameKind> {
        use FrameKind::*;
        [Call, Result, Fail, Release, Eval, Let, Fetch, Put, Scan, ByeBye, Out, Err]
            .into_iter()
            .find(|k| *k as u8 == code)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Callee {
    Named(String),
    Reference(u64),
    Callback(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Frame {
    Call { callee: Callee, positional: Vec<Value>, named: Vec<(String, Value)> },
    Result(Value),
    Fail { message: String, detail: String },
    Release(u64),
    Eval(String),
    Let { expr: String, bindings: Vec<(String, Value)> },
    Fetch(u64),
    Put(Value),
    Scan { module: String, include_unexported: bool },
    Out(String),
    Err(String),
    ByeBye,
}

impl Frame {
    pub fn kind(&self) -> FrameKind {
        match self {
            Frame::Call { .. } => FrameKind::Call,
            Frame::Result(_) => FrameKind::Result,
            Frame::Fail { .. } => FrameKind::Fail,
            Frame::Release(_) => FrameKind::Release,
            Frame::Eval(_) => FrameKind::Eval,
            Frame::Let { .. } => FrameKind::Let,
            Frame::Fetch(_) => FrameKind::Fetch,
            Frame::Put(_) => FrameKind::Put,
            Frame::Scan { .. } => FrameKind::Scan,
            Frame::Out(_) => FrameKind::Out,
            Frame::Err(_) => FrameKind::Err,
            Frame::ByeBye => FrameKind::ByeBye,
        }
    }
}

const SCAN_INCLUDE_UNEXPORTED: u8 = 0x01;

fn write_pairs<S: Sink + ?Sized>(w: &mut Writer<'_, S>, pairs: &[(String, Value)]) -> Result<(), WireError> {
    w.len(pairs.len())?;
    for (name, v) in pairs {
        w.str(name)?;
        write_value(w, v)?;
    }
    Ok(())
}

fn read_pairs<S: Source + ?Sized>(r: &mut Reader<'_, S>) -> Result<Vec<(String, Value)>, WireError> {
    let n = r.u32()? as usize;
    let mut out = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let name = r.str()?;
        out.push((name, read_value(r)?));
    }
    Ok(out)
}

/// Writes the kind byte and payload of `frame`; returns the byte count.
pub fn write_frame<S: Sink + ?Sized>(frame: &Frame, sink: &mut S) -> Result<usize, WireError> {
    let mut w = Writer::new(sink);
    w.u8(frame.kind() as u8)?;
    match frame {
        Frame::Call { callee, positional, named } => {
            match callee {
                Callee::Named(name) => {
                    w.u8(0x00)?;
                    w.str(name)?;
                }
                Callee::Reference(id) => {
                    w.u8(0x01)?;
                    w.u64(*id)?;
                }
                Callee::Callback(id) => {
                    if *id == 0 {
                        return Err(WireError::ReservedId { offset: w.written() as u64 });
                    }
                    w.u8(0x02)?;
                    w.u64(*id)?;
                }
            }
            w.len(positional.len())?;
            positional.iter().try_for_each(|v| write_value(&mut w, v))?;
            write_pairs(&mut w, named)?;
        }
        Frame::Result(v) | Frame::Put(v) => write_value(&mut w, v)?,
        Frame::Fail { message, detail } => {
            w.str(message)?;
            w.str(detail)?;
        }
        Frame::Release(id) | Frame::Fetch(id) => w.u64(*id)?,
        Frame::Eval(src) => w.str(src)?,
        Frame::Let { expr, bindings } => {
            w.str(expr)?;
            write_pairs(&mut w, bindings)?;
        }
        Frame::Scan { module, include_unexported } => {
            w.str(module)?;
            w.u8(if *include_unexported { SCAN_INCLUDE_UNEXPORTED } else { 0 })?;
        }
        Frame::Out(chunk) | Frame::Err(chunk) => w.str(chunk)?,
        Frame::ByeBye => {}
    }
    Ok(w.written())
}

pub fn write_frame_to_vec(frame: &Frame) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::new();
    write_frame(frame, &mut out)?;
    Ok(out)
}

/// Reads one frame. An unknown kind byte is fatal for the session: the
/// stream position can no longer be trusted.
pub fn read_frame<S: Source + ?Sized>(src: &mut S) -> Result<Frame, WireError> {
    let mut r = Reader::new(src);
    let code = r.u8()?;
    let kind = FrameKind::from_code(code).ok_or(WireError::UnknownFrameKind { kind: code, offset: 0 })?;
    Ok(match kind {
        FrameKind::Call => {
            let offset = r.offset();
            let callee = match r.u8()? {
                0x00 => Callee::Named(r.str()?),
                0x01 => Callee::Reference(r.u64()?),
                0x02 => Callee::Callback(r.nonzero_id()?),
                kind => return Err(WireError::UnknownCalleeKind { kind, offset }),
            };
            let npos = r.u32()? as usize;
            let mut positional = Vec::with_capacity(npos.min(1024));
            for _ in 0..npos {
                positional.push(read_value(&mut r)?);
            }
            let named = read_pairs(&mut r)?;
            Frame::Call { callee, positional, named }
        }
        FrameKind::Result => Frame::Result(read_value(&mut r)?),
        FrameKind::Put => Frame::Put(read_value(&mut r)?),
        FrameKind::Fail => {
            let message = r.str()?;
            let detail = r.str()?;
            Frame::Fail { message, detail }
        }
        FrameKind::Release => Frame::Release(r.u64()?),
        FrameKind::Fetch => Frame::Fetch(r.u64()?),
        FrameKind::Eval => Frame::Eval(r.str()?),
        FrameKind::Let => {
            let expr = r.str()?;
            let bindings = read_pairs(&mut r)?;
            Frame::Let { expr, bindings }
        }
        FrameKind::Scan => {
            let module = r.str()?;
            let offset = r.offset();
            let flags = r.u8()?;
            if flags & !SCAN_INCLUDE_UNEXPORTED != 0 {
                return Err(WireError::BadFlags { flags, offset });
            }
            Frame::Scan { module, include_unexported: flags & SCAN_INCLUDE_UNEXPORTED != 0 }
        }
        FrameKind::Out => Frame::Out(r.str()?),
        FrameKind::Err => Frame::Err(r.str()?),
        FrameKind::ByeBye => Frame::ByeBye,
    })
}

pub fn read_frame_from_slice(bytes: &[u8]) -> Result<(Frame, usize), WireError> {
    let mut src = bytes;
    let frame = read_frame(&mut src)?;
    Ok((frame, bytes.len() - src.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::ChunkedSource;
    use alloc::vec;

    #[test]
    fn release_seven() {
        let bytes = write_frame_to_vec(&Frame::Release(7)).unwrap();
        assert_eq!(bytes, vec![0x04, 7, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn byebye_is_one_byte() {
        assert_eq!(write_frame_to_vec(&Frame::ByeBye).unwrap(), vec![0x0F]);
    }

    #[test]
    fn unknown_kind_is_fatal() {
        assert_eq!(read_frame_from_slice(&[0xFF]).unwrap_err(), WireError::UnknownFrameKind { kind: 0xFF, offset: 0 });
    }

    #[test]
    fn interleaved_output_then_result() {
        let frames = [Frame::Out("a".into()), Frame::Err("warn".into()), Frame::Result(Value::scalar_f64(2.0))];
        let mut stream = Vec::new();
        for f in &frames {
            write_frame(f, &mut stream).unwrap();
        }
        let mut src = ChunkedSource::new(&stream, 3);
        let mut got = Vec::new();
        while src.remaining() > 0 {
            got.push(read_frame(&mut src).unwrap());
        }
        assert_eq!(got, frames);
    }

    #[test]
    fn scan_flags_are_strict() {
        let mut bytes = write_frame_to_vec(&Frame::Scan { module: "Base".into(), include_unexported: true }).unwrap();
        assert_eq!(*bytes.last().unwrap(), 1);
        *bytes.last_mut().unwrap() = 4;
        assert!(matches!(read_frame_from_slice(&bytes), Err(WireError::BadFlags { .. })));
    }

    #[test]
    fn call_round_trip() {
        let f = Frame::Call {
            callee: Callee::Named("Base.sqrt".into()),
            positional: vec![Value::scalar_f64(4.0)],
            named: vec![("digits".into(), Value::scalar_i64(3))],
        };
        let bytes = write_frame_to_vec(&f).unwrap();
        assert_eq!(read_frame_from_slice(&bytes).unwrap(), (f, bytes.len()));
    }
}
