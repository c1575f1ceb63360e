//! CSV assembly.
//!
//! Every table renders as one provenance comment line, one header row, and
//! one line per data row. The provenance line carries the SHA-256 of the
//! resolved experiment spec and the package version, so an artifact can be
//! traced back to the exact invocation that produced it.

use sha2::{Digest, Sha256};

/// SHA-256 of the canonical JSON encoding of a resolved experiment spec.
///
/// `serde_json` maps have sorted keys, so the encoding (and hence the hash)
/// is stable for a given spec.
pub fn spec_hash(spec: &serde_json::Value) -> String {
    let mut hasher = Sha256::new();
    hasher.update(spec.to_string().as_bytes());
    hasher
        .finalize()
        .iter()
        .map(|byte| format!("{byte:02x}"))
        .collect()
}

/// Fixed-precision float cell; `inf`/`nan` spelled out.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.12e}")
    }
}

/// A CSV table under construction.
pub struct Table {
    meta: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            meta: Vec::new(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends `key=value` to the provenance line.
    pub fn meta(&mut self, key: &str, value: impl Into<String>) {
        self.meta.push((key.to_string(), value.into()));
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn render(&self, hash: &str) -> String {
        let mut out = format!(
            "# spec_sha256={hash} version={}",
            env!("CARGO_PKG_VERSION")
        );
        for (key, value) in &self.meta {
            out.push_str(&format!(" {key}={value}"));
        }
        out.push('\n');
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_provenance_then_header_then_rows() {
        let mut table = Table::new(&["a", "b"]);
        table.meta("note", "x");
        table.push(vec!["1".into(), fmt_float(0.5)]);
        let text = table.render("deadbeef");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("# spec_sha256=deadbeef version="));
        assert!(lines[0].ends_with(" note=x"));
        assert_eq!(lines[1], "a,b");
        assert_eq!(lines[2], "1,5.000000000000e-1");
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn hash_is_stable_and_hex() {
        let spec = serde_json::json!({"command": "tau", "q": 3});
        let h1 = spec_hash(&spec);
        let h2 = spec_hash(&spec);
        assert_eq!(h1, h2);
        assert_eq!(h1.len(), 64);
        assert!(h1.chars().all(|c| c.is_ascii_hexdigit()));
        let other = spec_hash(&serde_json::json!({"command": "tau", "q": 4}));
        assert_ne!(h1, other);
    }

    #[test]
    fn special_floats_render_as_words() {
        assert_eq!(fmt_float(f64::INFINITY), "inf");
        assert_eq!(fmt_float(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_float(f64::NAN), "nan");
        assert_eq!(fmt_float(1.0), "1.000000000000e0");
    }
}
