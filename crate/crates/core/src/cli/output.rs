//! CSV rows, number formatting and atomic file output.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::prob::JointPmf;

/// `v` with 9 significant digits: fixed notation for moderate magnitudes,
/// scientific otherwise.
pub fn sig9(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    // The exponent of the rounded value, not of `v`: 9.9999999996 rounds to 10.
    let sci = format!("{v:.8e}");
    let exp: i32 = sci.split('e').nth(1).and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-5..=9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        sci
    }
}

/// `U.X.Y:p0;p1;...` with cells in row-major order.
pub fn serialize_pmf(q: &JointPmf) -> String {
    let axes: Vec<String> = q.labels().iter().map(|a| a.label().to_string()).collect();
    let cells: Vec<String> = q.probs().iter().map(|&v| sig9(v)).collect();
    format!("{}:{}", axes.join("."), cells.join(";"))
}

/// One row of the exponent CSV, in column order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentRow {
    pub ry_nats: String,
    pub rz_nats: String,
    pub bound: String,
    pub value_nats: String,
    pub value_clamped: String,
    pub argmin_serialized: String,
    pub solver_status: String,
    pub wall_ms: u64,
}

pub const EXPONENT_HEADER: [&str; 8] = [
    "ry_nats",
    "rz_nats",
    "bound",
    "value_nats",
    "value_clamped",
    "argmin_serialized",
    "solver_status",
    "wall_ms",
];

/// Rows as CSV text, header first even when there are no rows.
pub fn csv_text<T: Serialize>(header: &[&str], rows: &[T]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Writes `text` to a temporary file beside `path`, then renames it into
/// place, so a failed run never leaves a partial file.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{Alphabet, Axis};

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(1.0), "1.00000000");
        assert_eq!(sig9(0.123456789012), "0.123456789");
        assert_eq!(sig9(-2.5e-3), "-0.00250000000");
        assert_eq!(sig9(9.9999999996), "10.0000000");
        assert_eq!(sig9(1.5e-9), "1.50000000e-9");
        assert_eq!(sig9(f64::INFINITY), "inf");
    }

    #[test]
    fn pmf_serialization_lists_axes_and_cells() {
        let q = JointPmf::new(
            vec![Alphabet::new(Axis::U, 1), Alphabet::new(Axis::X, 2)],
            vec![0.25, 0.75],
        )
        .unwrap();
        assert_eq!(serialize_pmf(&q), "U.X:0.250000000;0.750000000");
    }

    #[test]
    fn empty_csv_has_header_only() {
        let rows: Vec<ExponentRow> = Vec::new();
        assert_eq!(
            csv_text(&EXPONENT_HEADER, &rows).unwrap(),
            EXPONENT_HEADER.join(",") + "\n"
        );
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, "a\n").unwrap();
        write_atomic(&p, "b\n").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "b\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
