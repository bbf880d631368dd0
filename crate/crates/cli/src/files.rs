//! On-disk layout of measurements, reconstructions and ground truth.
//!
//! A measurement directory holds
//! - `spectra.csv`: `x,y,<wavenumber>...`, one point spectrum per row;
//! - `bands.hdr` / `bands.img`: the band images as an ENVI cube, ascending
//!   in wavenumber (ENVI axes are monotonic);
//! - `band_indices.csv`: `order,band,wavenumber` in acquisition order, with
//!   indices into the full axis;
//! - `bands/`: one 16-bit PNG per band image (with a `.scale.txt` sidecar).

use std::fs;
use std::path::{Path, PathBuf};

use hsi_acs::hypercube::{load_envi, save_envi, Interleave};
use hsi_acs::raster::save_band_png;
use hsi_acs::{BandStack, Bands, Cube, HyperCube, Image, Pixel, Spectra, SpectrumSet};
use nalgebra::DMatrix;

use crate::CliError;

pub const SPECTRA_FILE: &str = "spectra.csv";
pub const BANDS_FILE: &str = "bands.hdr";
pub const BAND_INDEX_FILE: &str = "band_indices.csv";
pub const BAND_PNG_DIR: &str = "bands";
pub const AUDIT_FILE: &str = "audit.csv";
pub const TRUTH_FILE: &str = "ground_truth.hdr";
pub const LABELS_FILE: &str = "labels.png";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const REPORT_FILE: &str = "report.csv";

fn named(path: &Path) -> impl Fn(String) -> CliError + '_ {
    move |m| CliError::Config(format!("{}: {m}", path.display()))
}

pub fn read_cube(path: &Path) -> Result<Cube, CliError> {
    load_envi(path).map_err(|e| named(path)(e.to_string()))
}

pub fn write_cube(cube: &Cube, path: &Path) -> Result<PathBuf, CliError> {
    save_envi(cube, path, Interleave::Bsq).map_err(|e| CliError::Config(e.to_string()))
}

pub fn write_spectra(set: &Spectra, path: &Path) -> Result<(), CliError> {
    let fail = |e: csv::Error| named(path)(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    let mut header = vec!["x".to_string(), "y".to_string()];
    header.extend(set.wavenumbers().iter().map(|w| w.to_string()));
    w.write_record(&header).map_err(fail)?;
    for (i, p) in set.positions().iter().enumerate() {
        let mut row = vec![p.x.to_string(), p.y.to_string()];
        row.extend(set.spectra().row(i).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(fail)?;
    }
    w.flush().map_err(|e| named(path)(e.to_string()))
}

pub fn read_spectra(path: &Path) -> Result<Spectra, CliError> {
    let err = named(path);
    let mut r = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let header = r.headers().map_err(|e| err(e.to_string()))?.clone();
    if header.len() < 3 || &header[0] != "x" || &header[1] != "y" {
        return Err(err("expected a header `x,y,<wavenumber>...`".into()));
    }
    let wavenumbers = header
        .iter()
        .skip(2)
        .map(|h| h.trim().parse::<f64>().map_err(|_| err(format!("bad wavenumber `{h}` in header"))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut positions = Vec::new();
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| err(e.to_string()))?;
        let parse_idx =
            |s: &str| s.trim().parse::<usize>().map_err(|_| err(format!("row {}: bad coordinate `{s}`", line + 1)));
        positions.push(Pixel::new(parse_idx(&record[0])?, parse_idx(&record[1])?));
        let values = record
            .iter()
            .skip(2)
            .map(|s| s.trim().parse::<f64>().map_err(|_| err(format!("row {}: bad value `{s}`", line + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(values);
    }
    let cols = wavenumbers.len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(err(format!("row {} has {} values, header declares {cols}", i + 1, r.len())));
    }
    let spectra = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
    SpectrumSet::new(positions, spectra, wavenumbers).map_err(|e| err(e.to_string()))
}

/// Writes the band images as ENVI + index table + PNGs under `dir`.
/// `axis` is the full wavenumber axis the indices refer to.
pub fn write_band_stack(stack: &Bands, axis: &[f64], dir: &Path) -> Result<(), CliError> {
    if stack.is_empty() {
        return Err(CliError::Config("no band images to write".into()));
    }
    let wn: Vec<f64> = stack.band_indices().iter().map(|&b| axis[b]).collect();
    let mut ascending: Vec<usize> = (0..stack.len()).collect();
    ascending.sort_by_key(|&j| stack.band_indices()[j]);
    let n = stack.width() * stack.height();
    let mut values = Vec::with_capacity(n * stack.len());
    for &j in &ascending {
        values.extend_from_slice(stack.images()[j].data());
    }
    let sorted_wn = ascending.iter().map(|&j| wn[j]).collect();
    let cube = HyperCube::new(stack.width(), stack.height(), sorted_wn, values)
        .map_err(|e| CliError::Config(e.to_string()))?;
    write_cube(&cube, &dir.join(BANDS_FILE))?;

    let index_path = dir.join(BAND_INDEX_FILE);
    let fail = |e: csv::Error| named(&index_path)(e.to_string());
    let mut w = csv::Writer::from_path(&index_path).map_err(fail)?;
    w.write_record(["order", "band", "wavenumber"]).map_err(fail)?;
    for (order, (&b, &w_b)) in stack.band_indices().iter().zip(&wn).enumerate() {
        w.write_record([(order + 1).to_string(), b.to_string(), w_b.to_string()]).map_err(fail)?;
    }
    w.flush().map_err(|e| named(&index_path)(e.to_string()))?;

    let png_dir = dir.join(BAND_PNG_DIR);
    fs::create_dir_all(&png_dir).map_err(|e| named(&png_dir)(e.to_string()))?;
    for (order, (img, &b)) in stack.images().iter().zip(stack.band_indices()).enumerate() {
        let path = png_dir.join(format!("band_{:02}_{:.0}.png", order + 1, axis[b]));
        save_band_png(img, &path).map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

/// `(band index, wavenumber)` pairs in acquisition order.
pub fn read_band_indices(path: &Path) -> Result<Vec<(usize, f64)>, CliError> {
    let err = named(path);
    let mut r = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let mut out = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| err(e.to_string()))?;
        if record.len() != 3 {
            return Err(err(format!("row {}: expected order,band,wavenumber", line + 1)));
        }
        let band = record[1].trim().parse().map_err(|_| err(format!("row {}: bad band index", line + 1)))?;
        let wn = record[2].trim().parse().map_err(|_| err(format!("row {}: bad wavenumber", line + 1)))?;
        out.push((band, wn));
    }
    Ok(out)
}

/// Reads the band images of a measurement directory and checks them against
/// the point spectra (shared axis, positions inside the images).
pub fn read_band_stack(dir: &Path, spectra: &Spectra) -> Result<Bands, CliError> {
    let cube_path = dir.join(BANDS_FILE);
    let index_path = dir.join(BAND_INDEX_FILE);
    let cube = read_cube(&cube_path)?;
    let indices = read_band_indices(&index_path)?;
    if indices.len() != cube.bands() {
        return Err(named(&cube_path)(format!(
            "holds {} band images but {} lists {}",
            cube.bands(),
            index_path.display(),
            indices.len()
        )));
    }
    let axis = spectra.wavenumbers();
    let mut planes = Vec::with_capacity(indices.len());
    for (j, &(band, wn)) in indices.iter().enumerate() {
        if band >= axis.len() {
            return Err(named(&index_path)(format!("band {band} outside the {}-band spectra axis", axis.len())));
        }
        let tol = 1e-6 * axis[band].abs().max(1.0);
        if (axis[band] - wn).abs() > tol {
            return Err(named(&index_path)(format!("row {}: wavenumber disagrees with the spectra axis", j + 1)));
        }
        match cube.wavenumbers().iter().position(|&w| (w - wn).abs() <= tol) {
            Some(plane) => planes.push(plane),
            None => return Err(named(&cube_path)(format!("no band image at {wn} cm-1"))),
        }
    }
    spectra.check_bounds(cube.width(), cube.height()).map_err(|e| {
        CliError::Config(format!("{} vs {}: {e}", dir.join(SPECTRA_FILE).display(), cube_path.display()))
    })?;
    let images = planes.iter().map(|&b| cube.extract_band(b)).collect::<Result<Vec<Image<f64>>, _>>();
    let images = images.map_err(|e| named(&cube_path)(e.to_string()))?;
    BandStack::new(indices.iter().map(|&(b, _)| b).collect(), images).map_err(|e| named(&index_path)(e.to_string()))
}

/// Point spectra + band images of a measurement directory.
pub fn read_measurements(dir: &Path) -> Result<(Spectra, Bands), CliError> {
    let spectra = read_spectra(&dir.join(SPECTRA_FILE))?;
    let stack = read_band_stack(dir, &spectra)?;
    Ok((spectra, stack))
}
