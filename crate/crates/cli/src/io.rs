//! Curve CSV and atomic file output.

use std::fs;
use std::io::Write;
use std::path::Path;

use homdip::runner::DipPoint;
use tempfile::NamedTempFile;

pub const CSV_HEADER: [&str; 3] = ["delay_um", "rate_hz", "err_hz"];

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn curve_csv(points: &[DipPoint]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for p in points {
        w.write_record([p.delay_um, p.rate_hz, p.err_hz].map(|x| x.to_string()))
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn read_curve_csv(path: &Path) -> Result<Vec<DipPoint>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?;
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(format!(
            "expected header `{}`, found `{}`",
            CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        ));
    }
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        let field = |k: usize| -> Result<f64, String> {
            record[k]
                .parse::<f64>()
                .map_err(|_| format!("row {}: `{}` is not a number in column {}", i + 2, &record[k], CSV_HEADER[k]))
        };
        points.push(DipPoint {
            delay_um: field(0)?,
            rate_hz: field(1)?,
            err_hz: field(2)?,
        });
    }
    Ok(points)
}
