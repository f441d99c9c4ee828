//! Output artifacts. Every file starts with a `# config_sha256=...` echo
//! line so results are traceable to the exact configuration; the rest of a
//! CSV is plain RFC-4180 with a mandatory header row.

use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Write a CSV with the config echo line, a header, and string rows.
/// Values are written as given; callers format numbers with [`fmt_f64`] so
/// output is byte-stable across runs and worker counts.
pub fn write_csv(
    path: &Path,
    config_hash: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# config_sha256={config_hash}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Write a JSON document with the config hash injected at the top level.
pub fn write_json(path: &Path, config_hash: &str, value: serde_json::Value) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut doc = value;
    if let Some(map) = doc.as_object_mut() {
        map.insert("config_sha256".into(), config_hash.into());
    }
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| crate::Error::EvaluationFailed(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Canonical float formatting: shortest round-trip representation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_echo_line_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_csv(
            &p,
            "abc123",
            &["a", "b"],
            &[vec!["1".into(), "x,y".into()], vec![fmt_f64(0.1), "z".into()]],
        )
        .unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# config_sha256=abc123");
        assert_eq!(lines.next().unwrap(), "a,b");
        // RFC-4180 quoting of the embedded comma.
        assert_eq!(lines.next().unwrap(), "1,\"x,y\"");
        assert_eq!(lines.next().unwrap(), "0.1,z");
    }

    #[test]
    fn json_carries_config_hash() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.json");
        write_json(&p, "deadbeef", serde_json::json!({"x": 1.5})).unwrap();
        let doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(doc["config_sha256"], "deadbeef");
        assert_eq!(doc["x"], 1.5);
    }

    #[test]
    fn float_formatting_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-17, -2.5e300] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
