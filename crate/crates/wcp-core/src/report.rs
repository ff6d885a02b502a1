//! Deterministic JSON report emission.
//!
//! Reports must be byte-identical for identical configurations, so the
//! writer keeps object keys in insertion order and serializes every float
//! with 17 significant digits.

use std::fmt::Write as _;

/// JSON value with deterministic field order.
#[derive(Debug, Clone)]
pub enum Jv {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Jv>),
    Obj(Vec<(String, Jv)>),
}

impl Jv {
    pub fn obj() -> Jv {
        Jv::Obj(Vec::new())
    }

    pub fn push(&mut self, key: &str, value: Jv) {
        if let Jv::Obj(fields) = self {
            fields.push((key.to_string(), value));
        }
    }

    pub fn nums(values: &[f64]) -> Jv {
        Jv::Arr(values.iter().map(|&v| Jv::Num(v)).collect())
    }

    pub fn ints(values: &[i64]) -> Jv {
        Jv::Arr(values.iter().map(|&v| Jv::Int(v)).collect())
    }
}

/// 17 significant digits, enough to round-trip any double exactly.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        return "\"nan\"".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "\"inf\"".to_string() } else { "\"-inf\"".to_string() };
    }
    format!("{v:.16e}")
}

fn escape(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

fn render(v: &Jv, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    let pad_in = "  ".repeat(indent + 1);
    match v {
        Jv::Null => out.push_str("null"),
        Jv::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Jv::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Jv::Num(x) => out.push_str(&format_f64(*x)),
        Jv::Str(s) => escape(s, out),
        Jv::Arr(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad_in);
                render(item, indent + 1, out);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad);
            out.push(']');
        }
        Jv::Obj(fields) => {
            if fields.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, item)) in fields.iter().enumerate() {
                out.push_str(&pad_in);
                escape(k, out);
                out.push_str(": ");
                render(item, indent + 1, out);
                if i + 1 < fields.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad);
            out.push('}');
        }
    }
}

pub fn to_string(v: &Jv) -> String {
    let mut out = String::new();
    render(v, 0, &mut out);
    out.push('\n');
    out
}

/// FNV-1a hash of the canonical configuration string.
pub fn config_hash(canonical: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in canonical.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// Module version identifiers embedded in every report.
pub fn versions() -> Jv {
    let mut v = Jv::obj();
    v.push("crate", Jv::Str(env!("CARGO_PKG_VERSION").to_string()));
    for m in [
        "heisenberg",
        "bubble",
        "sphere",
        "morse",
        "interaction",
        "reduction",
        "fd",
        "brouwer",
    ] {
        v.push(m, Jv::Int(1));
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digit_floats() {
        let s = format_f64(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        let parsed: f64 = s.parse().unwrap();
        assert_eq!(parsed, std::f64::consts::PI);
    }

    #[test]
    fn deterministic_rendering() {
        let mut o = Jv::obj();
        o.push("schema", Jv::Int(1));
        o.push("values", Jv::nums(&[1.0, 0.5]));
        o.push("name", Jv::Str("x\"y".to_string()));
        let a = to_string(&o);
        let b = to_string(&o);
        assert_eq!(a, b);
        assert!(a.contains("\"schema\": 1"));
        assert!(a.contains("x\\\"y"));
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(config_hash("abc"), config_hash("abc"));
        assert_ne!(config_hash("abc"), config_hash("abd"));
    }
}
