//! Text rendering of client values for the REPL.

use std::fmt::Write;

use bridgewire_core::host::{HostData, HostTable, HostValue, HostVector};

use crate::client::{Extern, Val};

const NA: &str = "NA";

fn element(data: &HostData, i: usize) -> String {
    fn or_na<T>(x: &Option<T>, f: impl FnOnce(&T) -> String) -> String {
        x.as_ref().map_or_else(|| NA.to_string(), f)
    }
    match data {
        HostData::Integer(v) => or_na(&v[i], |x| x.to_string()),
        HostData::Double(v) => or_na(&v[i], |x| x.to_string()),
        HostData::Logical(v) => or_na(&v[i], |x| if *x { "true".into() } else { "false".into() }),
        HostData::Character(v) => or_na(&v[i], |s| format!("{s:?}")),
        HostData::Complex(v) => or_na(&v[i], |c| {
            if c.im.is_sign_negative() {
                format!("{}-{}i", c.re, -c.im)
            } else {
                format!("{}+{}i", c.re, c.im)
            }
        }),
        HostData::Raw(v) => or_na(&v[i], |b| format!("0x{b:02x}")),
    }
}

fn vector(v: &HostVector) -> String {
    let items: Vec<String> = (0..v.len()).map(|i| element(&v.data, i)).collect();
    let mut out = match (&v.dims, items.len()) {
        (None, 1) => items[0].clone(),
        (None, _) => format!("[{}]", items.join(", ")),
        (Some(d), _) => {
            let dims: Vec<String> = d.iter().map(|n| n.to_string()).collect();
            format!("{} array [{}]", dims.join("x"), items.join(", "))
        }
    };
    if let Some(t) = &v.annotation {
        let _ = write!(out, " :: {t}");
    }
    out
}

fn table(t: &HostTable) -> String {
    let mut cells: Vec<Vec<String>> = Vec::new();
    for (name, col) in &t.columns {
        let mut c = vec![name.clone()];
        c.extend((0..col.len()).map(|i| element(&col.data, i)));
        cells.push(c);
    }
    let widths: Vec<usize> = cells.iter().map(|c| c.iter().map(|s| s.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in 0..=t.nrows() {
        let line: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{:>w$}", c[row], w = *w)).collect();
        out.push_str(line.join("  ").trim_end());
        if row < t.nrows() {
            out.push('\n');
        }
    }
    out
}

/// One-line (tables: multi-line) rendering of a value.
pub fn render(v: &Val) -> String {
    match v {
        HostValue::Null => "nothing".to_string(),
        HostValue::Vector(v) => vector(v),
        HostValue::Table(t) => table(t),
        HostValue::Extern(Extern::Proxy(p)) => format!("<{} #{}>", p.type_name(), p.id()),
        HostValue::Extern(Extern::Function(f)) => format!("<function {}>", f.name),
        HostValue::Extern(Extern::Callback(_)) => "<host function>".to_string(),
        HostValue::List(l) => {
            let items: Vec<String> = l
                .items
                .iter()
                .map(|(n, v)| match n {
                    Some(n) => format!("{n} = {}", render(v)),
                    None => render(v),
                })
                .collect();
            match &l.annotation {
                Some(t) => format!("{t}({})", items.join(", ")),
                None => format!("list({})", items.join(", ")),
            }
        }
    }
}
