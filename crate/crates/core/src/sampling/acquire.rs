//! Measurement sources for the adaptive loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::hypercube::{CubeError, HyperCube, Image, Pixel, SpectrumSet};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcquireError {
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error("acquisition failed: {0}")]
    Device(String),
}

/// Anything that can take band images and point spectra of one sample.
pub trait Acquirer<T: Real> {
    /// `(width, height)` of the field of view.
    fn dims(&self) -> (usize, usize);

    fn wavenumbers(&self) -> &[T];

    fn read_band(&mut self, band: usize) -> Result<Image<T>, AcquireError>;

    fn read_spectra(&mut self, positions: &[Pixel]) -> Result<SpectrumSet<T>, AcquireError>;

    /// Noise standard deviations `(spectra, bands)` when the source knows them.
    fn noise_levels(&self) -> Option<(f64, f64)> {
        None
    }
}

/// Simulated instrument backed by a ground-truth cube, with optional
/// additive white Gaussian noise on spectra (`σ₁`) and band images (`σ₂`).
///
/// Every read is logged so callers can audit what was acquired.
#[derive(Debug)]
pub struct CubeAcquirer<'a, T: Real> {
    cube: &'a HyperCube<T>,
    spectrum_noise: f64,
    band_noise: f64,
    rng: ChaCha8Rng,
    pub band_reads: Vec<usize>,
    pub position_reads: Vec<Pixel>,
}

impl<'a, T: Real> CubeAcquirer<'a, T> {
    pub fn new(cube: &'a HyperCube<T>) -> Self {
        Self::with_noise(cube, 0.0, 0.0, 0)
    }

    pub fn with_noise(cube: &'a HyperCube<T>, spectrum_noise: f64, band_noise: f64, seed: u64) -> Self {
        Self {
            cube,
            spectrum_noise: spectrum_noise.max(0.0),
            band_noise: band_noise.max(0.0),
            rng: ChaCha8Rng::seed_from_u64(seed),
            band_reads: Vec::new(),
            position_reads: Vec::new(),
        }
    }

    fn noise(&mut self, sigma: f64) -> T {
        if sigma == 0.0 {
            return T::zero();
        }
        T::lit(Normal::new(0.0, sigma).expect("finite sigma").sample(&mut self.rng))
    }
}

impl<T: Real> Acquirer<T> for CubeAcquirer<'_, T> {
    fn dims(&self) -> (usize, usize) {
        (self.cube.width(), self.cube.height())
    }

    fn wavenumbers(&self) -> &[T] {
        self.cube.wavenumbers()
    }

    fn read_band(&mut self, band: usize) -> Result<Image<T>, AcquireError> {
        let img = self.cube.extract_band(band)?;
        self.band_reads.push(band);
        if self.band_noise == 0.0 {
            return Ok(img);
        }
        let sigma = self.band_noise;
        let (w, h) = (img.width(), img.height());
        let data = img.into_data().into_iter().map(|v| v + self.noise(sigma)).collect();
        Ok(Image::new(w, h, data)?)
    }

    fn read_spectra(&mut self, positions: &[Pixel]) -> Result<SpectrumSet<T>, AcquireError> {
        let set = self.cube.extract_spectra(positions)?;
        self.position_reads.extend_from_slice(positions);
        if self.spectrum_noise == 0.0 {
            return Ok(set);
        }
        let sigma = self.spectrum_noise;
        let mut spectra = set.spectra().clone();
        spectra.iter_mut().for_each(|v| *v += self.noise(sigma));
        Ok(SpectrumSet::new(set.positions().to_vec(), spectra, set.wavenumbers().to_vec())?)
    }

    fn noise_levels(&self) -> Option<(f64, f64)> {
        Some((self.spectrum_noise, self.band_noise))
    }
}
