//! Core of the bridgewire interprocess bridge.
//!
//! This crate needs only `alloc`. It holds the tagged [`Value`] model, the
//! streaming wire codec, the host translation policy used by clients, and
//! the server's embedded runtime (object registry, expression language and
//! builtin modules). Sockets, processes and threads live in the `bridgewire`
//! crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod alias;
pub mod host;
pub mod runtime;
pub mod types;
pub mod value;
pub mod wire;

pub use alias::ascii_alias;
pub use value::{
    ArrayData, Bitmap, Complex, Complex32, Complex64, ElemType, FnTarget, StructValue, TableValue, TypedArray, Value,
    ValueError,
};
