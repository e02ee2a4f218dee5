//! Deterministic float formatting and small I/O helpers shared by the CLI
//! and the artifact writers.
//!
//! Artifacts promise byte-identical output for identical inputs, so every
//! float that reaches a file goes through [`g9`] instead of the default
//! `Display` impl.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

/// Formats a float with 9 significant digits, trimming trailing zeros,
/// in the style of C's `%.9g`. Locale-independent.
///
/// Exponent range [-4, 8] prints in positional notation, everything else
/// in scientific notation with a bare `e` (`7.6581162e-4`).
pub fn g9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    // Exponent after rounding to 9 significant digits, read back from the
    // scientific rendering so boundary cases like 0.99999999951 land right.
    let sci = format!("{:.8e}", x);
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, x);
        trim_zeros(&fixed).to_string()
    } else {
        let (mantissa, e) = sci.split_at(sci.find('e').unwrap());
        format!("{}{}", trim_zeros(mantissa), e)
    }
}

fn trim_zeros(s: &str) -> &str {
    if !s.contains('.') {
        return s;
    }
    let s = s.trim_end_matches('0');
    s.strip_suffix('.').unwrap_or(s)
}

/// Serializes a JSON value with [`g9`] float formatting and 2-space
/// indentation. Key order of objects is preserved as built.
pub fn json_g9(value: &serde_json::Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, value: &serde_json::Value, indent: usize) {
    use serde_json::Value;
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => {
            let _ = write!(out, "{}", b);
        }
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{}", i);
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{}", u);
            } else {
                out.push_str(&g9(n.as_f64().unwrap()));
            }
        }
        Value::String(s) => {
            let _ = write!(out, "{}", serde_json::Value::String(s.clone()));
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                write_value(out, item, indent + 1);
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (k, (key, item)) in map.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                let _ = write!(out, "{}: ", serde_json::Value::String(key.clone()));
                write_value(out, item, indent + 1);
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
    }
}

/// Writes a file atomically: the content lands in a sibling temp file which
/// is then renamed over the target, so a crash never leaves a half-written
/// artifact at the destination path.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp_name = format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id());
    let tmp_path = match dir {
        Some(d) => d.join(&tmp_name),
        None => Path::new(&tmp_name).to_path_buf(),
    };
    fs::write(&tmp_path, bytes)?;
    match fs::rename(&tmp_path, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_file(&tmp_path);
            Err(e)
        }
    }
}

/// Splits one CSV line on commas. The formats used here never quote fields,
/// so a plain split is exact.
pub fn split_csv(line: &str) -> Vec<&str> {
    line.trim_end_matches(['\r', '\n']).split(',').map(str::trim).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g9_positional_range() {
        assert_eq!(g9(0.0), "0");
        assert_eq!(g9(45.0), "45");
        assert_eq!(g9(-45.5), "-45.5");
        assert_eq!(g9(15.3646), "15.3646");
        assert_eq!(g9(0.0001), "0.0001");
        assert_eq!(g9(123456789.0), "123456789");
        assert_eq!(g9(9.80665), "9.80665");
    }

    #[test]
    fn g9_rounds_to_nine_digits() {
        assert_eq!(g9(1.234567894), "1.23456789");
        assert_eq!(g9(1.234567896), "1.2345679");
        assert_eq!(g9(0.99999999951), "1");
    }

    #[test]
    fn g9_scientific_range() {
        assert_eq!(g9(1.0e9), "1e9");
        assert_eq!(g9(7.658116198e-4), "0.00076581162");
        assert_eq!(g9(7.658116198e-5), "7.6581162e-5");
        assert_eq!(g9(-2.5e-7), "-2.5e-7");
    }

    #[test]
    fn json_g9_formats_numbers_and_nesting() {
        let v = serde_json::json!({"a": 1.5, "b": [1, 2.25], "c": {"d": "x"}});
        let s = json_g9(&v);
        assert!(s.contains("\"a\": 1.5"), "got: {s}");
        assert!(s.contains("\"d\": \"x\""), "got: {s}");
        assert!(s.ends_with("}\n"), "got: {s}");
    }

    #[test]
    fn write_atomic_replaces_and_cleans_up() {
        let dir = std::env::temp_dir().join(format!("morphwing-util-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let target = dir.join("artifact.json");
        write_atomic(&target, b"one").unwrap();
        write_atomic(&target, b"two").unwrap();
        assert_eq!(std::fs::read(&target).unwrap(), b"two");
        let leftovers: Vec<_> = std::fs::read_dir(&dir)
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().contains("tmp"))
            .collect();
        assert!(leftovers.is_empty(), "temp files left behind: {leftovers:?}");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
