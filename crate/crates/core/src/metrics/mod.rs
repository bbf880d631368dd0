//! Reconstruction quality: RMSE, PSNR, SAM, ERGAS, and classification
//! accuracy of an RBF-SVM trained on the reference.

mod report;
mod svm;

pub use report::{append_report_csv, read_report_csv, QualityReport, REPORT_COLUMNS};
pub use svm::{classify, train_svm, SvmModel, SvmParams, TrainedSvm};

use rayon::prelude::*;
use thiserror::Error;

use crate::hypercube::HyperCube;
use crate::phantom::LabelMap;
use crate::scalar::Real;

/// PSNR reported for identical cubes.
pub const PSNR_CAP_DB: f64 = 999.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("every pixel spectrum has zero norm")]
    AllZeroSpectra,
    #[error("need at least two classes with labelled pixels, found {0}")]
    TooFewClasses(usize),
    #[error("model expects {expected} features, cube has {actual} bands")]
    FeatureCount { expected: usize, actual: usize },
    #[error("invalid SVM parameter: {0}")]
    InvalidParameter(String),
}

fn check_shape<T: Real>(a: &HyperCube<T>, b: &HyperCube<T>) -> Result<(), MetricsError> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(MetricsError::Shape(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.bands(),
            b.width(),
            b.height(),
            b.bands()
        )))
    }
}

fn sum_sq_diff<T: Real>(a: &[T], b: &[T]) -> f64 {
    a.par_iter().zip(b).map(|(x, y)| (x.as_f64() - y.as_f64()).powi(2)).sum()
}

pub fn rmse<T: Real>(reference: &HyperCube<T>, test: &HyperCube<T>) -> Result<f64, MetricsError> {
    check_shape(reference, test)?;
    let n = reference.values().len() as f64;
    Ok((sum_sq_diff(reference.values(), test.values()) / n).sqrt())
}

/// `20 log₁₀(peak / rmse)` with the peak taken as the reference maximum;
/// identical cubes give [`PSNR_CAP_DB`].
pub fn psnr<T: Real>(reference: &HyperCube<T>, test: &HyperCube<T>) -> Result<f64, MetricsError> {
    let e = rmse(reference, test)?;
    let peak = reference.values().iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    if e == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((20.0 * (peak / e).log10()).min(PSNR_CAP_DB))
}

/// Mean spectral angle and the number of pixels skipped for zero norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralAngle {
    pub degrees: f64,
    pub skipped: usize,
}

pub fn sam<T: Real>(reference: &HyperCube<T>, test: &HyperCube<T>) -> Result<SpectralAngle, MetricsError> {
    check_shape(reference, test)?;
    let plane = reference.n_pixels();
    let bands = reference.bands();
    let (ra, ta) = (reference.values(), test.values());
    let (sum, counted) = (0..plane)
        .into_par_iter()
        .map(|p| {
            let (mut nr, mut nt) = (0.0f64, 0.0f64);
            for b in 0..bands {
                nr += ra[b * plane + p].as_f64().powi(2);
                nt += ta[b * plane + p].as_f64().powi(2);
            }
            if nr == 0.0 || nt == 0.0 {
                return (0.0, 0usize);
            }
            let (nr, nt) = (nr.sqrt(), nt.sqrt());
            // 2·atan2(‖â - t̂‖, ‖â + t̂‖) stays accurate near 0° and 180°, unlike acos
            let (mut diff, mut sum) = (0.0, 0.0);
            for b in 0..bands {
                let (r, t) = (ra[b * plane + p].as_f64() / nr, ta[b * plane + p].as_f64() / nt);
                diff += (r - t).powi(2);
                sum += (r + t).powi(2);
            }
            (2.0 * diff.sqrt().atan2(sum.sqrt()), 1)
        })
        .reduce(|| (0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if counted == 0 {
        return Err(MetricsError::AllZeroSpectra);
    }
    Ok(SpectralAngle { degrees: (sum / counted as f64).to_degrees(), skipped: plane - counted })
}

/// ERGAS value and the number of bands skipped for a zero reference mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ergas {
    pub value: f64,
    pub skipped: usize,
}

/// `100·ratio·sqrt(mean_b (RMSE_b / μ_b)²)` over bands with non-zero reference mean.
pub fn ergas<T: Real>(reference: &HyperCube<T>, test: &HyperCube<T>, ratio: f64) -> Result<Ergas, MetricsError> {
    check_shape(reference, test)?;
    let terms: Vec<Option<f64>> = (0..reference.bands())
        .into_par_iter()
        .map(|b| {
            let (r, t) = (reference.band_plane(b), test.band_plane(b));
            let n = r.len() as f64;
            let mu = r.iter().map(|v| v.as_f64()).sum::<f64>() / n;
            (mu != 0.0).then(|| sum_sq_diff(r, t) / n / (mu * mu))
        })
        .collect();
    let used: Vec<f64> = terms.iter().flatten().copied().collect();
    let skipped = terms.len() - used.len();
    let value =
        if used.is_empty() { 0.0 } else { 100.0 * ratio * (used.iter().sum::<f64>() / used.len() as f64).sqrt() };
    Ok(Ergas { value, skipped })
}

/// Fraction of pixels with matching labels.
pub fn classification_accuracy(predicted: &LabelMap, truth: &LabelMap) -> Result<f64, MetricsError> {
    if predicted.width() != truth.width() || predicted.height() != truth.height() {
        return Err(MetricsError::Shape(format!(
            "{}x{} labels vs {}x{}",
            predicted.width(),
            predicted.height(),
            truth.width(),
            truth.height()
        )));
    }
    let hits = predicted.labels().iter().zip(truth.labels()).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.labels().len() as f64)
}

/// The four image metrics at once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageQuality {
    pub psnr: f64,
    pub rmse: f64,
    pub sam: f64,
    pub ergas: f64,
}

pub fn image_quality<T: Real>(
    reference: &HyperCube<T>,
    test: &HyperCube<T>,
    ergas_ratio: f64,
) -> Result<ImageQuality, MetricsError> {
    Ok(ImageQuality {
        psnr: psnr(reference, test)?,
        rmse: rmse(reference, test)?,
        sam: sam(reference, test)?.degrees,
        ergas: ergas(reference, test, ergas_ratio)?.value,
    })
}
