//! Table-style quality report, one row per acquisition iteration.

use std::fs::OpenOptions;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use super::ImageQuality;

pub const REPORT_COLUMNS: [&str; 8] =
    ["iter", "n_point_spectra", "selected_wavenumbers", "PSNR", "RMSE", "SAM", "ERGAS", "accuracy"];

/// Unit conventions, written as a leading comment line.
const UNITS_NOTE: &str = "# PSNR dB (peak = reference max); SAM degrees; ERGAS ratio";

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub iteration: usize,
    pub n_point_spectra: usize,
    pub selected_wavenumbers: Vec<f64>,
    pub quality: ImageQuality,
    pub accuracy: Option<f64>,
    pub ergas_ratio: f64,
}

impl QualityReport {
    fn record(&self) -> Vec<String> {
        let wn: Vec<String> = self.selected_wavenumbers.iter().map(|w| format!("{w}")).collect();
        vec![
            self.iteration.to_string(),
            self.n_point_spectra.to_string(),
            wn.join(" "),
            format!("{:.4}", self.quality.psnr),
            format!("{:.6e}", self.quality.rmse),
            format!("{:.4}", self.quality.sam),
            format!("{:.4}", self.quality.ergas),
            self.accuracy.map(|a| format!("{a:.4}")).unwrap_or_default(),
        ]
    }
}

/// Appends rows to `path`, writing the header (and unit note) when the file
/// is new or empty.
pub fn append_report_csv(path: impl AsRef<Path>, rows: &[QualityReport]) -> io::Result<()> {
    let path = path.as_ref();
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        let ratio = rows.first().map_or(1.0, |r| r.ergas_ratio);
        writeln!(file, "{UNITS_NOTE} {ratio}")?;
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        w.write_record(REPORT_COLUMNS)?;
    }
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()
}

/// Reads a report back as raw string records (header excluded).
pub fn read_report_csv(path: impl AsRef<Path>) -> io::Result<Vec<Vec<String>>> {
    let file = BufReader::new(std::fs::File::open(path)?);
    let body: String = file.lines().collect::<io::Result<Vec<_>>>()?.join("\n");
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(body.as_bytes());
    let header = r.headers().map_err(io::Error::other)?.clone();
    if header.iter().ne(REPORT_COLUMNS) {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "unexpected report columns"));
    }
    r.records().map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()).map_err(io::Error::other)).collect()
}
