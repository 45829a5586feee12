//! Deterministic JSON: sorted keys, floats with 17 significant digits.

use serde_json::{Map, Value};
use std::fmt::Write;

pub fn to_string(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn number(out: &mut String, n: &serde_json::Number) {
    if n.is_f64() {
        let x = n.as_f64().unwrap_or(f64::NAN);
        if x == 0.0 {
            // -0 and 0 print the same
            out.push_str("0.0000000000000000e0");
        } else {
            write!(out, "{x:.16e}").unwrap();
        }
    } else {
        write!(out, "{n}").unwrap();
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn is_flat(v: &Value) -> bool {
    match v {
        Value::Array(a) => a.iter().all(|x| !x.is_array() && !x.is_object()),
        _ => true,
    }
}

fn write_value(out: &mut String, v: &Value, level: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => number(out, n),
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("strings serialize")),
        Value::Array(a) if a.is_empty() => out.push_str("[]"),
        Value::Array(a) if is_flat(v) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(out, x, level);
            }
            out.push(']');
        }
        Value::Array(a) => {
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                indent(out, level + 1);
                write_value(out, x, level + 1);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            indent(out, level);
            out.push(']');
        }
        Value::Object(m) => write_object(out, m, level),
    }
}

fn write_object(out: &mut String, m: &Map<String, Value>, level: usize) {
    if m.is_empty() {
        out.push_str("{}");
        return;
    }
    let mut keys: Vec<&String> = m.keys().collect();
    keys.sort();
    out.push_str("{\n");
    for (i, k) in keys.iter().enumerate() {
        indent(out, level + 1);
        out.push_str(&serde_json::to_string(k).expect("strings serialize"));
        out.push_str(": ");
        write_value(out, &m[*k], level + 1);
        out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
    }
    indent(out, level);
    out.push('}');
}
