//! Centered per-pixel data shared by the initializer and the solver.

use nalgebra::{DMatrix, DVector};

use super::{FusionError, FusionOperators, SubspaceModel};
use crate::hypercube::{BandStack, SpectrumSet};
use crate::scalar::Real;

pub(crate) struct Problem<T: Real> {
    /// `Z̃`
    pub k: usize,
    pub n: usize,
    pub z_s: usize,
    pub z_d: usize,
    /// `G = Q B`, `Z̃ x Z_D`
    pub g: DMatrix<T>,
    pub q: DMatrix<T>,
    /// centered band values, pixel-major (`n x Z_D` row-major)
    pub mc: Vec<T>,
    /// centered point spectra, one row per sampled pixel (`N_D x Z_S` row-major)
    pub hc: Vec<T>,
    /// pixel -> row of `hc`
    pub spectrum_of: Vec<Option<usize>>,
    /// weights relative to the smaller variance: `σ_ref²/σ_H²`, `σ_ref²/σ_M²`
    pub wh: T,
    pub wm: T,
    /// `σ_ref² = min(σ_H², σ_M²)`; multiplies the stated objective into the solved one
    pub var_ref: f64,
}

impl<T: Real> Problem<T> {
    pub fn new(
        spectra: &SpectrumSet<T>,
        stack: &BandStack<T>,
        model: &SubspaceModel<T>,
        ops: &FusionOperators,
    ) -> Result<Self, FusionError> {
        let (k, z_s) = (model.rank(), model.bands());
        let n = ops.n_pixels();
        if spectra.bands() != z_s || ops.n_bands() != z_s {
            return Err(FusionError::Dimension(format!(
                "spectra have {} bands, subspace {z_s}, operators {}",
                spectra.bands(),
                ops.n_bands()
            )));
        }
        if stack.width() * stack.height() != n || stack.band_indices() != ops.bands() {
            return Err(FusionError::Dimension("band images do not match the band operator".into()));
        }
        let w = ops.width();
        if spectra.positions().iter().map(|p| p.index(w)).ne(ops.positions().iter().copied()) {
            return Err(FusionError::Dimension("spectrum positions do not match the pixel operator".into()));
        }
        let z_d = ops.bands().len();
        let q = model.basis().clone();
        let g = DMatrix::from_fn(k, z_d, |i, j| q[(i, ops.bands()[j])]);
        let mean: &DVector<T> = model.mean();

        let mut mc = vec![T::zero(); n * z_d];
        for (j, img) in stack.images().iter().enumerate() {
            let mu = mean[ops.bands()[j]];
            for (p, &v) in img.data().iter().enumerate() {
                mc[p * z_d + j] = v - mu;
            }
        }
        let h = spectra.spectra();
        let n_d = h.nrows();
        let mut hc = vec![T::zero(); n_d * z_s];
        let mut spectrum_of = vec![None; n];
        for (i, &p) in ops.positions().iter().enumerate() {
            spectrum_of[p] = Some(i);
            for b in 0..z_s {
                hc[i * z_s + b] = h[(i, b)] - mean[b];
            }
        }
        let var_ref = ops.var_h.min(ops.var_m);
        Ok(Self {
            k,
            n,
            z_s,
            z_d,
            g,
            q,
            mc,
            hc,
            spectrum_of,
            wh: T::lit(var_ref / ops.var_h),
            wm: T::lit(var_ref / ops.var_m),
            var_ref,
        })
    }

    pub fn m_row(&self, p: usize) -> &[T] {
        &self.mc[p * self.z_d..(p + 1) * self.z_d]
    }

    pub fn h_row(&self, i: usize) -> &[T] {
        &self.hc[i * self.z_s..(i + 1) * self.z_s]
    }

    /// `G m`
    pub fn g_times(&self, m: &[T]) -> DVector<T> {
        DVector::from_fn(self.k, |a, _| (0..self.z_d).map(|j| self.g[(a, j)] * m[j]).fold(T::zero(), |s, x| s + x))
    }

    /// `Q h`
    pub fn q_times(&self, h: &[T]) -> DVector<T> {
        DVector::from_fn(self.k, |a, _| (0..self.z_s).map(|b| self.q[(a, b)] * h[b]).fold(T::zero(), |s, x| s + x))
    }

    /// `GGᵀ`
    pub fn ggt(&self) -> DMatrix<T> {
        &self.g * self.g.transpose()
    }

    /// Data-fit part of the stated objective, `(1/2σ_H²)‖H - LRQ‖² + (1/2σ_M²)‖M - RQB‖²`,
    /// for row-major coefficients.
    pub fn data_fit(&self, r: &[T]) -> f64 {
        use rayon::prelude::*;
        let k = self.k;
        let (fit_h, fit_m) = r
            .par_chunks(k)
            .enumerate()
            .map(|(p, rp)| {
                let m = self.m_row(p);
                let mut fm = 0.0;
                for (j, &mj) in m.iter().enumerate().take(self.z_d) {
                    let pred = (0..k).fold(T::zero(), |s, a| s + rp[a] * self.g[(a, j)]);
                    fm += (mj - pred).as_f64().powi(2);
                }
                let mut fh = 0.0;
                if let Some(i) = self.spectrum_of[p] {
                    let h = self.h_row(i);
                    for (b, &hb) in h.iter().enumerate().take(self.z_s) {
                        let pred = (0..k).fold(T::zero(), |s, a| s + rp[a] * self.q[(a, b)]);
                        fh += (hb - pred).as_f64().powi(2);
                    }
                }
                (fh, fm)
            })
            .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        let (wh, wm) = (self.wh.as_f64(), self.wm.as_f64());
        0.5 * (wh * fit_h + wm * fit_m) / self.var_ref
    }
}

pub(crate) fn to_row_major<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    m.transpose().as_slice().to_vec()
}

pub(crate) fn from_row_major<T: Real>(n: usize, k: usize, v: &[T]) -> DMatrix<T> {
    DMatrix::from_row_slice(n, k, v)
}
