//! MAP initialization of the subspace coefficients.
//!
//! Per pixel `i`, the band images alone give the ridge estimate
//! `r̃ᵢ = (GGᵀ + λI)⁻¹ G mᵢ` with conditional covariance
//! `Λ = σ_M² (GGᵀ + λI)⁻¹` (`G = QB`). Pixels that also carry a point spectrum
//! combine that prior with the spectrum likelihood:
//! `r̄ᵢ = (I/σ_H² + Λ⁻¹)⁻¹ (Q hᵢ/σ_H² + Λ⁻¹ r̃ᵢ)`.
//! Both systems are the same for every pixel of their kind, so each is
//! factored once.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use super::problem::{from_row_major, Problem};
use super::{FusionError, FusionOperators, ReducedImage, SubspaceModel};
use crate::hypercube::{BandStack, SpectrumSet};
use crate::scalar::Real;

/// Inverse of a symmetric positive-definite matrix, rejecting numerically
/// singular ones.
pub(crate) fn spd_inverse<T: Real>(a: DMatrix<T>) -> Option<DMatrix<T>> {
    let eig = SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(T::max_value().expect("bounded"), |m, &v| m.min(v));
    if !(max > T::zero()) || min <= max * T::default_epsilon() * T::from_usize_lossy(a.nrows() * 10) {
        return None;
    }
    a.cholesky().map(|c| c.inverse())
}

pub fn map_initialize<T: Real>(
    spectra: &SpectrumSet<T>,
    stack: &BandStack<T>,
    model: &SubspaceModel<T>,
    ops: &FusionOperators,
    ridge: f64,
) -> Result<ReducedImage<T>, FusionError> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(FusionError::InvalidConfig(format!("ridge must be non-negative (got {ridge})")));
    }
    let p = Problem::new(spectra, stack, model, ops)?;
    let k = p.k;
    let eye = DMatrix::<T>::identity(k, k);
    // everything below is scaled by σ_ref², which cancels in each solve
    let gram = p.ggt() + &eye * T::lit(ridge);
    let gram_inv = spd_inverse(gram.clone()).ok_or(FusionError::SingularSystem)?;
    let prior_precision = &gram * p.wm;
    let sampled_inv = spd_inverse(&eye * p.wh + &prior_precision).ok_or(FusionError::SingularSystem)?;

    let mut r = vec![T::zero(); p.n * k];
    r.par_chunks_mut(k).enumerate().for_each(|(i, out)| {
        let prior_mean = &gram_inv * p.g_times(p.m_row(i));
        let ri = match p.spectrum_of[i] {
            None => prior_mean,
            Some(s) => &sampled_inv * (p.q_times(p.h_row(s)) * p.wh + &prior_precision * prior_mean),
        };
        out.copy_from_slice(ri.as_slice());
    });
    Ok(ReducedImage::new(from_row_major(p.n, k, &r)))
}
