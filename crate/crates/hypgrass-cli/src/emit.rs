//! Deterministic JSON output: ordered keys, floats rendered with 17
//! significant digits so every emitted number round-trips bit-exactly.

use std::fmt::Write as _;

#[derive(Debug, Clone)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

impl Json {
    pub fn obj(entries: Vec<(&str, Json)>) -> Json {
        Json::Obj(entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn nums(values: &[f64]) -> Json {
        Json::Arr(values.iter().map(|&v| Json::Num(v)).collect())
    }

    pub fn rows(m: &nalgebra::DMatrix<f64>) -> Json {
        let mut rows = Vec::with_capacity(m.nrows());
        for i in 0..m.nrows() {
            rows.push(Json::nums(&(0..m.ncols()).map(|j| m[(i, j)]).collect::<Vec<_>>()));
        }
        Json::Arr(rows)
    }
}

fn escape(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

/// 17 significant digits; guaranteed to re-parse to the identical double.
pub fn fmt_f64(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        // Small integral values read better and parse identically.
        format!("{:.1}", x)
    } else {
        format!("{:.16e}", x)
    }
}

pub fn render(v: &Json, out: &mut String) {
    match v {
        Json::Null => out.push_str("null"),
        Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Json::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Json::Num(x) => out.push_str(&fmt_f64(*x)),
        Json::Str(s) => escape(s, out),
        Json::Arr(items) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                render(item, out);
            }
            out.push(']');
        }
        Json::Obj(entries) => {
            out.push('{');
            for (k, (key, val)) in entries.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                escape(key, out);
                out.push(':');
                render(val, out);
            }
            out.push('}');
        }
    }
}

pub fn to_string(v: &Json) -> String {
    let mut s = String::new();
    render(v, &mut s);
    s
}

/// The schema-versioned result envelope, one line of JSON.
pub fn envelope(command: &str, inputs: Vec<Json>, result: Json, diagnostics: Json) -> String {
    to_string(&Json::obj(vec![
        ("command", Json::Str(command.to_string())),
        ("inputs", Json::Arr(inputs)),
        ("result", result),
        ("diagnostics", diagnostics),
        ("version", Json::Str("hypgrass/1".to_string())),
    ]))
}

/// FNV-1a content digest for the inputs field.
pub fn digest(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for &x in &[
            2.1213203435596424f64,
            -0.5,
            1.0 / 3.0,
            6.02e23,
            5e-324,
            -1.7976931348623157e308,
        ] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn rendering_is_ordered_and_escaped() {
        let v = Json::obj(vec![
            ("b", Json::Int(1)),
            ("a", Json::Str("x\"y".into())),
        ]);
        assert_eq!(to_string(&v), "{\"b\":1,\"a\":\"x\\\"y\"}");
    }
}
