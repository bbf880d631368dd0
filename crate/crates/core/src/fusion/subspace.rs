//! PCA subspace of the point spectra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::FusionError;
use crate::hypercube::SpectrumSet;
use crate::scalar::Real;

/// How many principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZRule {
    Explicit(usize),
    /// smallest count whose cumulative explained variance reaches the fraction
    VarianceFraction(f64),
}

impl Default for ZRule {
    fn default() -> Self {
        ZRule::VarianceFraction(0.999)
    }
}

/// Mean spectrum and orthonormal basis `Q` (`Z̃ x Z_S`, one component per row).
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceModel<T: Real> {
    mean: DVector<T>,
    basis: DMatrix<T>,
    /// all covariance eigenvalues, descending
    eigenvalues: Vec<T>,
}

impl<T: Real> SubspaceModel<T> {
    /// Builds a model directly; `basis` rows must be orthonormal.
    pub fn new(mean: DVector<T>, basis: DMatrix<T>) -> Result<Self, FusionError> {
        if basis.ncols() != mean.len() || basis.nrows() == 0 {
            return Err(FusionError::Dimension(format!(
                "basis is {}x{} for a {}-band mean",
                basis.nrows(),
                basis.ncols(),
                mean.len()
            )));
        }
        let gram = &basis * basis.transpose();
        let off = (gram - DMatrix::identity(basis.nrows(), basis.nrows())).amax();
        if off.as_f64() > 1e-6 {
            return Err(FusionError::Dimension("basis rows are not orthonormal".into()));
        }
        Ok(Self { mean, basis, eigenvalues: Vec::new() })
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }

    pub fn basis(&self) -> &DMatrix<T> {
        &self.basis
    }

    /// `Z̃`
    pub fn rank(&self) -> usize {
        self.basis.nrows()
    }

    pub fn bands(&self) -> usize {
        self.mean.len()
    }

    /// Covariance eigenvalues of the fitted spectra (empty for hand-built models).
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// Fraction of the fitted variance captured by the kept components.
    pub fn explained_variance(&self) -> Option<f64> {
        let total: f64 = self.eigenvalues.iter().map(|v| v.as_f64().max(0.0)).sum();
        if self.eigenvalues.is_empty() {
            return None;
        }
        if total == 0.0 {
            return Some(1.0);
        }
        let kept: f64 = self.eigenvalues[..self.rank()].iter().map(|v| v.as_f64().max(0.0)).sum();
        Some(kept / total)
    }

    /// Keeps only the leading `rank` components.
    pub fn truncated(&self, rank: usize) -> Result<Self, FusionError> {
        if rank == 0 || rank > self.rank() {
            return Err(FusionError::InvalidRank { requested: rank, max: self.rank() });
        }
        Ok(Self {
            mean: self.mean.clone(),
            basis: self.basis.rows(0, rank).into_owned(),
            eigenvalues: self.eigenvalues.clone(),
        })
    }

    /// Number of eigenvalues above the Marchenko-Pastur edge
    /// `σ²(1 + √(Z_S/(n-1)))²` of white noise with variance `noise_var`,
    /// for a covariance fitted from `n` spectra.
    pub fn signal_rank(&self, noise_var: f64, n: usize) -> usize {
        let ratio = self.bands() as f64 / n.saturating_sub(1).max(1) as f64;
        let edge = noise_var * (1.0 + ratio.sqrt()).powi(2);
        self.eigenvalues.iter().take_while(|v| v.as_f64() > edge).count()
    }

    /// Coefficients `(S - mean) Qᵀ` of pixel-major spectra (`n x Z_S`).
    pub fn project(&self, spectra: &DMatrix<T>) -> DMatrix<T> {
        let mut centered = spectra.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        centered * self.basis.transpose()
    }

    /// Spectra `R Q + mean` from coefficients (`n x Z̃`).
    pub fn expand(&self, coefficients: &DMatrix<T>) -> DMatrix<T> {
        let mut s = coefficients * &self.basis;
        for mut row in s.row_iter_mut() {
            row += self.mean.transpose();
        }
        s
    }
}

/// Fits the subspace to the point spectra.
pub fn fit_subspace<T: Real>(spectra: &SpectrumSet<T>, rule: ZRule) -> Result<SubspaceModel<T>, FusionError> {
    let h = spectra.spectra();
    let (n, z) = h.shape();
    if n < 2 {
        return Err(FusionError::TooFewSpectra { got: n });
    }
    let max_rank = n.min(z);
    let mean = h.row_mean().transpose();
    let mut centered = h.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.tr_mul(&centered) / T::from_usize_lossy(n - 1);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..z).collect();
    // stable: equal eigenvalues keep nalgebra's order
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).expect("finite covariance"));
    let eigenvalues: Vec<T> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

    let rank = match rule {
        ZRule::Explicit(k) => {
            if k == 0 || k > max_rank {
                return Err(FusionError::InvalidRank { requested: k, max: max_rank });
            }
            k
        }
        ZRule::VarianceFraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(FusionError::InvalidFraction(f));
            }
            let clipped: Vec<f64> = eigenvalues.iter().map(|v| v.as_f64().max(0.0)).collect();
            let total: f64 = clipped.iter().sum();
            if total == 0.0 {
                1
            } else {
                let mut acc = 0.0;
                let mut k = clipped.len();
                for (i, v) in clipped.iter().enumerate() {
                    acc += v;
                    // relative slack so f = 1 terminates despite rounding
                    if acc >= f * total * (1.0 - 1e-12) {
                        k = i + 1;
                        break;
                    }
                }
                k.min(max_rank)
            }
        }
    };

    let mut basis = DMatrix::zeros(rank, z);
    for (row, &i) in order.iter().take(rank).enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let pivot = v.iter().copied().fold(T::zero(), |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < T::zero() {
            v.neg_mut();
        }
        basis.set_row(row, &v.transpose());
    }
    Ok(SubspaceModel { mean, basis, eigenvalues })
}
