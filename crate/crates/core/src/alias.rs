//! ASCII spellings for identifiers that contain non-ASCII characters.
//!
//! Each non-ASCII character becomes `<name>` using the tab-completion
//! abbreviations familiar from LaTeX (`σ` → `<sigma>`), or `<uXXXX>` with
//! lowercase hex when the character has no entry.

use alloc::format;
use alloc::string::String;

/// Sorted by code point.
const NAMES: &[(char, &str)] = &[
    ('\u{00D7}', "times"),
    ('\u{00F7}', "div"),
    ('\u{0127}', "hbar"),
    ('\u{0302}', "hat"),
    ('\u{0303}', "tilde"),
    ('\u{0304}', "bar"),
    ('\u{0307}', "dot"),
    ('\u{0393}', "Gamma"),
    ('\u{0394}', "Delta"),
    ('\u{0398}', "Theta"),
    ('\u{039B}', "Lambda"),
    ('\u{039E}', "Xi"),
    ('\u{03A0}', "Pi"),
    ('\u{03A3}', "Sigma"),
    ('\u{03A5}', "Upsilon"),
    ('\u{03A6}', "Phi"),
    ('\u{03A8}', "Psi"),
    ('\u{03A9}', "Omega"),
    ('\u{03B1}', "alpha"),
    ('\u{03B2}', "beta"),
    ('\u{03B3}', "gamma"),
    ('\u{03B4}', "delta"),
    ('\u{03B5}', "varepsilon"),
    ('\u{03B6}', "zeta"),
    ('\u{03B7}', "eta"),
    ('\u{03B8}', "theta"),
    ('\u{03B9}', "iota"),
    ('\u{03BA}', "kappa"),
    ('\u{03BB}', "lambda"),
    ('\u{03BC}', "mu"),
    ('\u{03BD}', "nu"),
    ('\u{03BE}', "xi"),
    ('\u{03C0}', "pi"),
    ('\u{03C1}', "rho"),
    ('\u{03C2}', "varsigma"),
    ('\u{03C3}', "sigma"),
    ('\u{03C4}', "tau"),
    ('\u{03C5}', "upsilon"),
    ('\u{03C6}', "varphi"),
    ('\u{03C7}', "chi"),
    ('\u{03C8}', "psi"),
    ('\u{03C9}', "omega"),
    ('\u{03D1}', "vartheta"),
    ('\u{03D5}', "phi"),
    ('\u{03D6}', "varpi"),
    ('\u{03F1}', "varrho"),
    ('\u{03F5}', "epsilon"),
    ('\u{1D62}', "_i"),
    ('\u{2032}', "prime"),
    ('\u{2070}', "^0"),
    ('\u{2071}', "^i"),
    ('\u{2074}', "^4"),
    ('\u{2075}', "^5"),
    ('\u{2076}', "^6"),
    ('\u{2077}', "^7"),
    ('\u{2078}', "^8"),
    ('\u{2079}', "^9"),
    ('\u{2080}', "_0"),
    ('\u{2081}', "_1"),
    ('\u{2082}', "_2"),
    ('\u{2083}', "_3"),
    ('\u{2084}', "_4"),
    ('\u{2085}', "_5"),
    ('\u{2086}', "_6"),
    ('\u{2087}', "_7"),
    ('\u{2088}', "_8"),
    ('\u{2089}', "_9"),
    ('\u{2113}', "ell"),
    ('\u{2202}', "partial"),
    ('\u{2207}', "nabla"),
    ('\u{2208}', "in"),
    ('\u{2209}', "notin"),
    ('\u{220F}', "prod"),
    ('\u{2211}', "sum"),
    ('\u{2218}', "circ"),
    ('\u{221A}', "sqrt"),
    ('\u{221E}', "infty"),
    ('\u{2229}', "cap"),
    ('\u{222A}', "cup"),
    ('\u{2248}', "approx"),
    ('\u{2260}', "ne"),
    ('\u{2264}', "le"),
    ('\u{2265}', "ge"),
    ('\u{2286}', "subseteq"),
    ('\u{2295}', "oplus"),
    ('\u{2297}', "otimes"),
    ('\u{22C5}', "cdot"),
    ('\u{2C7C}', "_j"),
];

/// Name used inside `<...>` for a non-ASCII character, if it has one.
pub fn char_name(c: char) -> Option<&'static str> {
    NAMES.binary_search_by_key(&c, |(k, _)| *k).ok().map(|i| NAMES[i].1)
}

/// ASCII-only alias of `name`. ASCII names are returned unchanged.
pub fn ascii_alias(name: &str) -> String {
    if name.is_ascii() {
        return String::from(name);
    }
    let mut out = String::with_capacity(name.len() + 8);
    for c in name.chars() {
        if c.is_ascii() {
            out.push(c);
        } else if let Some(n) = char_name(c) {
            out.push('<');
            out.push_str(n);
            out.push('>');
        } else {
            out.push_str(&format!("<u{:04x}>", c as u32));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_sorted_and_unique() {
        assert!(NAMES.windows(2).all(|w| w[0].0 < w[1].0));
        let mut names: alloc::vec::Vec<&str> = NAMES.iter().map(|(_, n)| *n).collect();
        names.sort_unstable();
        assert!(names.windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn known_examples() {
        assert_eq!(ascii_alias("logσ"), "log<sigma>");
        assert_eq!(ascii_alias("mean"), "mean");
        assert_eq!(ascii_alias("f♯"), "f<u266f>");
        assert_eq!(ascii_alias("∇f"), "<nabla>f");
        assert_eq!(ascii_alias("Σx"), "<Sigma>x");
        assert_eq!(ascii_alias("x\u{1F600}"), "x<u1f600>");
    }
}
