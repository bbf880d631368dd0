//! Seeded synthetic labeled cubes.
//!
//! The plane is split into Voronoi cells, each cell carries one class, and
//! every class owns a signature spectrum built from Gaussian absorption
//! peaks on a smooth baseline. Pixels scale their class signature by a
//! small random factor (thickness variation) and add white noise.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connectivity::enforce_connectivity;
use crate::hypercube::{CubeError, HyperCube};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhantomError {
    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Cube(#[from] CubeError),
}

/// Parameters of a synthetic phantom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub n_bands: usize,
    /// first wavenumber (cm⁻¹)
    pub wavenumber_start: f64,
    /// last wavenumber (cm⁻¹)
    pub wavenumber_end: f64,
    pub n_classes: usize,
    pub peaks_per_class: usize,
    /// absorbance units
    pub noise_sigma: f64,
    /// per-pixel multiplicative jitter half-width (0.1 = ±10%)
    pub scale_jitter: f64,
    /// Voronoi cells per class
    pub regions_per_class: usize,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            n_bands: 60,
            wavenumber_start: 900.0,
            wavenumber_end: 1800.0,
            n_classes: 4,
            peaks_per_class: 4,
            noise_sigma: 0.01,
            scale_jitter: 0.1,
            regions_per_class: 3,
            seed: 7,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<(), PhantomError> {
        let bad = |m: String| Err(PhantomError::InvalidSpec(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("image must be non-empty, got {}x{}", self.width, self.height));
        }
        if self.n_classes == 0 || self.n_classes > 255 {
            return bad(format!("n_classes must be in 1..=255, got {}", self.n_classes));
        }
        if self.n_classes > self.width * self.height {
            return bad(format!("{} classes do not fit in {} pixels", self.n_classes, self.width * self.height));
        }
        if self.n_bands < 2 || self.n_bands < 2 * self.peaks_per_class {
            return bad(format!(
                "n_bands ({}) must be at least 2 and at least twice peaks_per_class ({})",
                self.n_bands, self.peaks_per_class
            ));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return bad(format!("noise_sigma must be finite and >= 0, got {}", self.noise_sigma));
        }
        if !(0.0..1.0).contains(&self.scale_jitter) {
            return bad(format!("scale_jitter must be in [0, 1), got {}", self.scale_jitter));
        }
        if self.regions_per_class == 0 {
            return bad("regions_per_class must be >= 1".into());
        }
        if !(self.wavenumber_start.is_finite() && self.wavenumber_end.is_finite())
            || self.wavenumber_start == self.wavenumber_end
        {
            return bad("wavenumber range must be finite and non-degenerate".into());
        }
        Ok(())
    }

    /// Evenly spaced wavenumber axis over the requested range.
    pub fn axis(&self) -> Vec<f64> {
        let step = (self.wavenumber_end - self.wavenumber_start) / (self.n_bands - 1) as f64;
        (0..self.n_bands).map(|i| self.wavenumber_start + step * i as f64).collect()
    }
}

/// Per-pixel integer class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self, CubeError> {
        if labels.len() != width * height {
            return Err(CubeError::ValueCount { expected: width * height, actual: labels.len() });
        }
        if let Some(index) = labels.iter().position(|&l| l >= class_names.len()) {
            return Err(CubeError::BandOutOfRange { index: labels[index], bands: class_names.len() });
        }
        Ok(Self { width, height, labels, class_names })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x]
    }

    /// Pixel count per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Output of [`generate_phantom`].
#[derive(Debug, Clone)]
pub struct Phantom<T> {
    pub cube: HyperCube<T>,
    pub labels: LabelMap,
    /// noise-free class signatures, `signatures[class][band]`
    pub signatures: Vec<Vec<f64>>,
}

impl<T> Phantom<T> {
    pub fn into_parts(self) -> (HyperCube<T>, LabelMap) {
        (self.cube, self.labels)
    }
}

fn gaussian(i: f64, center: f64, width: f64) -> f64 {
    let d = (i - center) / width;
    (-0.5 * d * d).exp()
}

/// Builds a class signature from Gaussian peaks (band-index units) on a quadratic baseline.
fn signature(rng: &mut ChaCha8Rng, n_bands: usize, peaks: usize) -> Vec<f64> {
    let last = (n_bands - 1) as f64;
    let offset = rng.random_range(0.05..0.2);
    let slope = rng.random_range(-0.05..0.05);
    let curve = rng.random_range(-0.05..0.05);
    let peaks: Vec<(f64, f64, f64)> = (0..peaks)
        .map(|_| (rng.random_range(0.0..=last), rng.random_range(3.0..=10.0), rng.random_range(0.2..1.0)))
        .collect();
    (0..n_bands)
        .map(|i| {
            let t = if last > 0.0 { i as f64 / last } else { 0.0 };
            let base = offset + slope * t + curve * t * t;
            let bumps: f64 = peaks.iter().map(|&(c, w, a)| a * gaussian(i as f64, c, w)).sum();
            base.max(0.01) + bumps
        })
        .collect()
}

/// Voronoi class layout with contiguous regions; every class owns at least one region.
fn layout(spec: &PhantomSpec, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let (w, h) = (spec.width, spec.height);
    let n = w * h;
    let n_cells = (spec.n_classes * spec.regions_per_class).min(n);
    let mut pixels: Vec<usize> = (0..n).collect();
    pixels.shuffle(rng);
    let seeds = &pixels[..n_cells];
    let cell_class: Vec<usize> =
        (0..n_cells).map(|c| if c < spec.n_classes { c } else { rng.random_range(0..spec.n_classes) }).collect();

    let mut cells = vec![0usize; n];
    for (p, cell) in cells.iter_mut().enumerate() {
        let (x, y) = ((p % w) as f64, (p / w) as f64);
        let mut best = (f64::INFINITY, 0);
        for (c, &s) in seeds.iter().enumerate() {
            let (sx, sy) = ((s % w) as f64, (s / w) as f64);
            let d = (x - sx).powi(2) + (y - sy).powi(2);
            if d < best.0 {
                best = (d, c);
            }
        }
        *cell = best.1;
    }
    enforce_connectivity(&mut cells, w, h, Some(seeds));
    cells.iter().map(|&c| cell_class[c]).collect()
}

/// Generates a labeled phantom; identical specs give bit-identical output.
pub fn generate_phantom<T: Real>(spec: &PhantomSpec) -> Result<Phantom<T>, PhantomError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels = layout(spec, &mut rng);
    let signatures: Vec<Vec<f64>> =
        (0..spec.n_classes).map(|_| signature(&mut rng, spec.n_bands, spec.peaks_per_class)).collect();

    let n = spec.width * spec.height;
    let z = spec.n_bands;
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| PhantomError::InvalidSpec(e.to_string()))?;
    let mut values = vec![T::zero(); n * z];
    for (p, &class) in labels.iter().enumerate() {
        let scale =
            if spec.scale_jitter > 0.0 { 1.0 + rng.random_range(-spec.scale_jitter..spec.scale_jitter) } else { 1.0 };
        for b in 0..z {
            let eps = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            values[b * n + p] = T::lit(signatures[class][b] * scale + eps);
        }
    }
    let cube = HyperCube::new(spec.width, spec.height, spec.axis().into_iter().map(T::lit).collect(), values)?;
    let names = (0..spec.n_classes).map(|k| format!("class_{k}")).collect();
    let labels = LabelMap::new(spec.width, spec.height, labels, names)?;
    Ok(Phantom { cube, labels, signatures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectivity::components;

    fn angle(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        (dot / (na * nb)).clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn single_class_noise_free_pixels_identical() {
        let spec = PhantomSpec {
            n_classes: 1,
            noise_sigma: 0.0,
            scale_jitter: 0.0,
            width: 8,
            height: 6,
            ..Default::default()
        };
        let p = generate_phantom::<f64>(&spec).unwrap();
        let first = p.cube.pixel_spectrum(0);
        for i in 1..p.cube.n_pixels() {
            assert_eq!(p.cube.pixel_spectrum(i), first);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = PhantomSpec { width: 20, height: 16, ..Default::default() };
        let a = generate_phantom::<f64>(&spec).unwrap();
        let b = generate_phantom::<f64>(&spec).unwrap();
        assert_eq!(a.cube, b.cube);
        assert_eq!(a.labels, b.labels);
        let c = generate_phantom::<f64>(&PhantomSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.cube, c.cube);
    }

    #[test]
    fn classes_more_separated_than_within_class_spread() {
        let spec = PhantomSpec::default();
        let p = generate_phantom::<f64>(&spec).unwrap();
        let n = p.cube.n_pixels();
        let spectra: Vec<Vec<f64>> = (0..n).map(|i| p.cube.pixel_spectrum(i)).collect();
        let labels = p.labels.labels();
        // stride sampling keeps the pairwise sums tractable
        let idx: Vec<usize> = (0..n).step_by(7).collect();
        let (mut within, mut nw, mut between, mut nb) = (0.0, 0usize, 0.0, 0usize);
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                let t = angle(&spectra[i], &spectra[j]);
                if labels[i] == labels[j] {
                    within += t;
                    nw += 1;
                } else {
                    between += t;
                    nb += 1;
                }
            }
        }
        assert!(between / nb as f64 > within / nw as f64);
    }

    #[test]
    fn noise_free_cube_has_rank_at_most_classes() {
        let spec = PhantomSpec { width: 24, height: 24, noise_sigma: 0.0, ..Default::default() };
        let p = generate_phantom::<f64>(&spec).unwrap();
        let sv = p.cube.to_pixel_matrix().singular_values();
        let rank = sv.iter().filter(|&&s| s > 1e-9 * sv[0]).count();
        assert!(rank <= spec.n_classes, "rank {rank}");
    }

    #[test]
    fn regions_are_contiguous_and_every_class_present() {
        for seed in 0..20 {
            let spec = PhantomSpec { width: 10, height: 10, n_classes: 10, seed, ..Default::default() };
            let p = generate_phantom::<f32>(&spec).unwrap();
            assert!(p.labels.class_counts().iter().all(|&c| c > 0), "seed {seed}");
            // one cell per class: each class is exactly one 4-connected region
            let single = PhantomSpec { regions_per_class: 1, ..spec };
            let p = generate_phantom::<f32>(&single).unwrap();
            assert_eq!(components(p.labels.labels(), 10, 10).label.len(), 10, "seed {seed}");
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let base = PhantomSpec::default();
        for bad in [
            PhantomSpec { n_classes: 0, ..base.clone() },
            PhantomSpec { n_bands: 6, peaks_per_class: 4, ..base.clone() },
            PhantomSpec { noise_sigma: -1.0, ..base.clone() },
            PhantomSpec { width: 0, ..base.clone() },
            PhantomSpec { wavenumber_end: 900.0, ..base.clone() },
        ] {
            assert!(matches!(generate_phantom::<f64>(&bad), Err(PhantomError::InvalidSpec(_))));
        }
    }

    #[test]
    fn axis_spans_requested_range() {
        let spec = PhantomSpec { n_bands: 117, ..Default::default() };
        let axis = spec.axis();
        assert_eq!(axis[0], 900.0);
        assert!((axis[116] - 1800.0).abs() < 1e-9);
        assert!(axis.windows(2).all(|w| (w[1] - w[0] - 900.0 / 116.0).abs() < 1e-9));
    }
}
