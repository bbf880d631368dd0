//! Sampling operators `L` (pixel selection) and `B` (band selection) plus the
//! scalar noise weights of the two measurement sets.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::FusionError;
use crate::hypercube::{BandStack, SpectrumSet};
use crate::scalar::Real;

/// Noise standard deviations; `None` entries are estimated from the data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub spectra_sigma: Option<f64>,
    pub band_sigma: Option<f64>,
}

/// `L`, `B` and the noise variances `σ_H²`, `σ_M²`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionOperators {
    width: usize,
    height: usize,
    n_bands: usize,
    /// scanline indices of the sampled pixels, in spectrum order
    positions: Vec<usize>,
    bands: Vec<usize>,
    pub var_h: f64,
    pub var_m: f64,
}

impl FusionOperators {
    pub fn new(
        width: usize,
        height: usize,
        n_bands: usize,
        positions: Vec<usize>,
        bands: Vec<usize>,
        var_h: f64,
        var_m: f64,
    ) -> Result<Self, FusionError> {
        let n = width * height;
        if let Some(&p) = positions.iter().find(|&&p| p >= n) {
            return Err(FusionError::Dimension(format!("sampled pixel {p} outside {n} pixels")));
        }
        if let Some(&b) = bands.iter().find(|&&b| b >= n_bands) {
            return Err(FusionError::Dimension(format!("band {b} outside {n_bands} bands")));
        }
        let mut seen = vec![false; n];
        for &p in &positions {
            if std::mem::replace(&mut seen[p], true) {
                return Err(FusionError::Dimension(format!("pixel {p} sampled twice")));
            }
        }
        if !(var_h > 0.0 && var_m > 0.0 && var_h.is_finite() && var_m.is_finite()) {
            return Err(FusionError::InvalidConfig(format!("noise variances must be positive (got {var_h}, {var_m})")));
        }
        Ok(Self { width, height, n_bands, positions, bands, var_h, var_m })
    }

    /// Operators for a pair of measurement sets, estimating unspecified noise.
    pub fn from_measurements<T: Real>(
        spectra: &SpectrumSet<T>,
        stack: &BandStack<T>,
        noise: &NoiseSpec,
    ) -> Result<Self, FusionError> {
        let (w, h) = (stack.width(), stack.height());
        spectra.check_bounds(w, h)?;
        stack.check_bands(spectra.bands())?;
        if stack.is_empty() {
            return Err(FusionError::Dimension("no band images".into()));
        }
        let sh = noise.spectra_sigma.unwrap_or_else(|| estimate_spectra_sigma(spectra.spectra()));
        let sm = noise.band_sigma.unwrap_or_else(|| estimate_band_sigma(stack));
        let scale = rms(spectra.spectra().iter().map(|v| v.as_f64()));
        Self::new(
            w,
            h,
            spectra.bands(),
            spectra.positions().iter().map(|p| p.index(w)).collect(),
            stack.band_indices().to_vec(),
            floored_variance(sh, scale),
            floored_variance(sm, scale),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn bands(&self) -> &[usize] {
        &self.bands
    }

    /// `L X`: rows of a pixel-major matrix at the sampled positions.
    pub fn apply_l<T: Real>(&self, x: &DMatrix<T>) -> DMatrix<T> {
        DMatrix::from_fn(self.positions.len(), x.ncols(), |i, j| x[(self.positions[i], j)])
    }

    /// `X B`: the selected band columns.
    pub fn apply_b<T: Real>(&self, x: &DMatrix<T>) -> DMatrix<T> {
        DMatrix::from_fn(x.nrows(), self.bands.len(), |i, j| x[(i, self.bands[j])])
    }

    /// Per-pixel sampling mask.
    pub fn sampled_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_pixels()];
        for &p in &self.positions {
            mask[p] = true;
        }
        mask
    }
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Keeps noise-free inputs from producing infinite weights.
fn floored_variance(sigma: f64, scale: f64) -> f64 {
    let floor = (1e-6 * scale).max(1e-150);
    sigma.max(floor).powi(2)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Robust white-noise σ from second differences: for i.i.d. noise
/// `x[j-1] - 2x[j] + x[j+1]` has variance `6σ²`, and smooth signal cancels.
fn mad_sigma(mut d: Vec<f64>) -> f64 {
    if d.is_empty() {
        return 0.0;
    }
    let med = median(&mut d);
    let mut dev: Vec<f64> = d.iter().map(|v| (v - med).abs()).collect();
    1.482_602_218_505_602 * median(&mut dev) / 6f64.sqrt()
}

/// Noise σ of point spectra, from second differences along the spectral axis.
pub fn estimate_spectra_sigma<T: Real>(h: &DMatrix<T>) -> f64 {
    let mut d = Vec::new();
    for row in h.row_iter() {
        for j in 1..row.len().saturating_sub(1) {
            d.push((row[j - 1] - row[j] * T::lit(2.0) + row[j + 1]).as_f64());
        }
    }
    mad_sigma(d)
}

/// Noise σ of band images, from second differences along scanlines.
pub fn estimate_band_sigma<T: Real>(stack: &BandStack<T>) -> f64 {
    let w = stack.width();
    let mut d = Vec::new();
    for img in stack.images() {
        for row in img.data().chunks(w) {
            for x in 1..w.saturating_sub(1) {
                d.push((row[x - 1] - row[x] * T::lit(2.0) + row[x + 1]).as_f64());
            }
        }
    }
    mad_sigma(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercube::{Image, Pixel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn selection_operators() {
        let ops = FusionOperators::new(3, 2, 4, vec![4, 1], vec![3, 0], 1.0, 1.0).unwrap();
        let x = DMatrix::from_fn(6, 4, |i, j| (10 * i + j) as f64);
        assert_eq!(ops.apply_l(&x).column(0).as_slice(), &[40.0, 10.0]);
        assert_eq!(ops.apply_b(&x).row(2).iter().copied().collect::<Vec<_>>(), vec![23.0, 20.0]);
        assert_eq!(ops.sampled_mask(), vec![false, true, false, false, true, false]);
        assert!(FusionOperators::new(3, 2, 4, vec![6], vec![0], 1.0, 1.0).is_err());
        assert!(FusionOperators::new(3, 2, 4, vec![1, 1], vec![0], 1.0, 1.0).is_err());
        assert!(FusionOperators::new(3, 2, 4, vec![1], vec![4], 1.0, 1.0).is_err());
        assert!(FusionOperators::new(3, 2, 4, vec![1], vec![0], 0.0, 1.0).is_err());
    }

    #[test]
    fn noise_estimates_recover_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let h = DMatrix::from_fn(200, 60, |i, j| {
            (j as f64 / 10.0).sin() * (1.0 + i as f64 / 200.0) + noise.sample(&mut rng)
        });
        let s = estimate_spectra_sigma(&h);
        assert!((s - 0.02).abs() < 0.002, "{s}");

        let img = Image::from_fn(100, 100, |x, y| ((x + y) as f64 / 50.0).cos() + noise.sample(&mut rng));
        let stack = BandStack::new(vec![0], vec![img]).unwrap();
        let s = estimate_band_sigma(&stack);
        assert!((s - 0.02).abs() < 0.002, "{s}");
    }

    #[test]
    fn noise_free_input_gets_floor() {
        let img = Image::from_fn(4, 4, |x, _| x as f64);
        let stack = BandStack::new(vec![1], vec![img]).unwrap();
        let spectra = SpectrumSet::new(
            vec![Pixel::new(0, 0), Pixel::new(1, 1)],
            DMatrix::from_element(2, 3, 1.0),
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        let ops = FusionOperators::from_measurements(&spectra, &stack, &NoiseSpec::default()).unwrap();
        assert!(ops.var_h > 0.0 && ops.var_h < 1e-11);
        assert_eq!(ops.positions(), &[0, 5]);
        let known = NoiseSpec { spectra_sigma: Some(0.1), band_sigma: Some(0.2) };
        let ops = FusionOperators::from_measurements(&spectra, &stack, &known).unwrap();
        assert!((ops.var_h - 0.01).abs() < 1e-15 && (ops.var_m - 0.04).abs() < 1e-15);
    }
}
