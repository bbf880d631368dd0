//! Band selection from sampled point spectra.
//!
//! All quantities are computed on band columns of the `N_D x Z_S` spectra
//! matrix: candidate band images are unmeasured, so only their values at the
//! sampled points are available.

use nalgebra::{DMatrix, DVector};

use super::SamplingError;
use crate::hypercube::SpectrumSet;
use crate::scalar::Real;

/// Pearson correlation between band columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix<T: Real> {
    pub matrix: DMatrix<T>,
    /// `true` for zero-variance columns, whose off-diagonal entries are set to 0
    pub degenerate: Vec<bool>,
}

/// Correlation of every band pair over the sampled points (`N_D >= 2`).
pub fn spectral_correlation_matrix<T: Real>(spectra: &SpectrumSet<T>) -> Result<CorrelationMatrix<T>, SamplingError> {
    let h = spectra.spectra();
    let (n, z) = h.shape();
    if n < 2 {
        return Err(SamplingError::TooFewSpectra { needed: 2, got: n });
    }
    let mut centered = h.clone();
    let mut degenerate = vec![false; z];
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        let first = col[0];
        degenerate[j] = col.iter().all(|&v| v == first);
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let gram = centered.tr_mul(&centered);
    let mut matrix = DMatrix::zeros(z, z);
    for i in 0..z {
        degenerate[i] |= gram[(i, i)] <= T::zero();
    }
    for i in 0..z {
        matrix[(i, i)] = T::one();
        for j in (i + 1)..z {
            let r = if degenerate[i] || degenerate[j] {
                T::zero()
            } else {
                (gram[(i, j)] / (gram[(i, i)] * gram[(j, j)]).sqrt()).clamp(-T::one(), T::one())
            };
            matrix[(i, j)] = r;
            matrix[(j, i)] = r;
        }
    }
    Ok(CorrelationMatrix { matrix, degenerate })
}

/// Bands whose best neighbour correlation `max(|ρ(b,b-1)|, |ρ(b,b+1)|)`
/// reaches `threshold`; the others are treated as noise. Sorted ascending.
pub fn prune_noise_bands<T: Real>(corr: &DMatrix<T>, threshold: f64) -> Result<Vec<usize>, SamplingError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(SamplingError::InvalidThreshold(threshold));
    }
    let z = corr.nrows();
    // absorbs rounding in perfectly correlated columns
    let slack = 1e-12;
    Ok((0..z)
        .filter(|&b| {
            let left = (b > 0).then(|| corr[(b, b - 1)].abs().as_f64());
            let right = (b + 1 < z).then(|| corr[(b, b + 1)].abs().as_f64());
            match left.into_iter().chain(right).reduce(f64::max) {
                Some(best) => best + slack >= threshold,
                None => true,
            }
        })
        .collect())
}

fn column_norm<T: Real>(h: &DMatrix<T>, b: usize) -> T {
    h.column(b).norm()
}

/// Score of candidate `b` against first band `b1`:
/// `(1 - |ρ(b, b1)|) * ‖h_b‖ / max_retained ‖h‖`.
pub fn second_band_scores<T: Real>(
    spectra: &SpectrumSet<T>,
    b1: usize,
    retained: &[usize],
) -> Result<Vec<(usize, T)>, SamplingError> {
    let corr = spectral_correlation_matrix(spectra)?;
    let h = spectra.spectra();
    let max_norm = retained.iter().map(|&b| column_norm(h, b)).fold(T::zero(), |a, b| a.max(b));
    Ok(retained
        .iter()
        .copied()
        .filter(|&b| b != b1)
        .map(|b| {
            let magnitude = if max_norm > T::zero() { column_norm(h, b) / max_norm } else { T::zero() };
            (b, (T::one() - corr.matrix[(b, b1)].abs()) * magnitude)
        })
        .collect())
}

pub(crate) fn argmax<T: Real>(scores: &[(usize, T)]) -> Option<(usize, T)> {
    // candidates are visited in ascending band order; strict > keeps the lower index on ties
    let mut sorted = scores.to_vec();
    sorted.sort_by_key(|&(b, _)| b);
    sorted.into_iter().fold(None, |best, (b, s)| match best {
        Some((_, bs)) if s <= bs => best,
        _ => Some((b, s)),
    })
}

/// Band least correlated with `b1` while carrying the most signal.
pub fn select_second_band<T: Real>(
    spectra: &SpectrumSet<T>,
    b1: usize,
    retained: &[usize],
) -> Result<usize, SamplingError> {
    let scores = second_band_scores(spectra, b1, retained)?;
    argmax(&scores).map(|(b, _)| b).ok_or(SamplingError::NoCandidateBands)
}

/// Orthonormal basis of the columns of `z` by twice-iterated modified
/// Gram-Schmidt; fails on the first column dependent on its predecessors.
fn orthonormal_basis<T: Real>(z: &DMatrix<T>) -> Result<DMatrix<T>, SamplingError> {
    let tol = T::default_epsilon().sqrt() * T::lit(1e-2);
    let mut q = z.clone();
    for j in 0..z.ncols() {
        let original = z.column(j).norm();
        let mut v = q.column(j).into_owned();
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let proj = qi.dot(&v);
                v.axpy(-proj, &qi, T::one());
            }
        }
        let norm = v.norm();
        if original == T::zero() || norm <= tol * original {
            return Err(SamplingError::RankDeficient { column: j });
        }
        q.set_column(j, &(v / norm));
    }
    Ok(q)
}

/// `P = I - Z (ZᵀZ)⁻¹ Zᵀ`, the projector onto the orthogonal complement of `span(Z)`.
pub fn osp_projector<T: Real>(z: &DMatrix<T>) -> Result<DMatrix<T>, SamplingError> {
    let q = orthonormal_basis(z)?;
    let n = z.nrows();
    Ok(DMatrix::identity(n, n) - &q * q.transpose())
}

/// Outcome of one orthogonal-subspace-projection band choice.
#[derive(Debug, Clone, PartialEq)]
pub struct OspChoice<T: Real> {
    pub band: usize,
    /// `‖Pᵀy‖` of the chosen band
    pub residual_norm: T,
    /// `‖Pᵀy‖ / ‖y‖` of the chosen band
    pub relative_residual: T,
    /// largest relative residual over all candidates
    pub max_relative_residual: T,
    /// `(band, ‖Pᵀy‖)` for every candidate
    pub scores: Vec<(usize, T)>,
}

/// Picks the candidate band (in `retained`, not in `selected`) whose sampled
/// column has the largest component orthogonal to the selected columns.
pub fn osp_select_next_band<T: Real>(
    spectra: &SpectrumSet<T>,
    selected: &[usize],
    retained: &[usize],
) -> Result<OspChoice<T>, SamplingError> {
    let h = spectra.spectra();
    if h.nrows() <= selected.len() {
        return Err(SamplingError::TooFewSpectra { needed: selected.len() + 1, got: h.nrows() });
    }
    let candidates: Vec<usize> = retained.iter().copied().filter(|b| !selected.contains(b)).collect();
    if candidates.is_empty() {
        return Err(SamplingError::NoCandidateBands);
    }
    let z = DMatrix::from_fn(h.nrows(), selected.len(), |i, j| h[(i, selected[j])]);
    let q = orthonormal_basis(&z)?;

    let mut scores = Vec::with_capacity(candidates.len());
    let mut max_relative = T::zero();
    for &b in &candidates {
        let y: DVector<T> = h.column(b).into_owned();
        let y0 = &y - &q * q.tr_mul(&y);
        let r = y0.norm();
        let ny = y.norm();
        if ny > T::zero() {
            max_relative = max_relative.max(r / ny);
        }
        scores.push((b, r));
    }
    if max_relative <= T::default_epsilon().sqrt() * T::lit(1e-2) {
        return Err(SamplingError::SpanExhausted);
    }
    let (band, residual_norm) = argmax(&scores).expect("non-empty candidates");
    let ny = h.column(band).norm();
    Ok(OspChoice {
        band,
        residual_norm,
        relative_residual: if ny > T::zero() { residual_norm / ny } else { T::zero() },
        max_relative_residual: max_relative,
        scores,
    })
}
