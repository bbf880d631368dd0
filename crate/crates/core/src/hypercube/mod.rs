//! Dense hyperspectral cubes and the two measurement types taken from them:
//! point spectra (full spectrum at a few pixels) and band images (one
//! wavenumber at every pixel).
//!
//! Cubes are stored band-major: each band is a contiguous `width * height`
//! plane in scanline order, so a band image is a slice copy.

mod envi;

pub use envi::{load_envi, save_envi, EnviError, EnviHeader, Interleave};

use std::collections::HashSet;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CubeError {
    #[error("cube dimensions must be non-zero (got {width}x{height}x{bands})")]
    EmptyDimension { width: usize, height: usize, bands: usize },
    #[error("expected {expected} values for the declared dimensions, got {actual}")]
    ValueCount { expected: usize, actual: usize },
    #[error("wavenumber axis has {actual} entries but the cube has {expected} bands")]
    AxisLength { expected: usize, actual: usize },
    #[error("wavenumber axis is not strictly monotonic at index {index}")]
    AxisNotMonotonic { index: usize },
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("band index {index} out of range for {bands} bands")]
    BandOutOfRange { index: usize, bands: usize },
    #[error("pixel ({x}, {y}) outside a {width}x{height} image")]
    PixelOutOfBounds { x: usize, y: usize, width: usize, height: usize },
    #[error("pixel ({x}, {y}) listed more than once")]
    DuplicatePixel { x: usize, y: usize },
    #[error("band index {index} listed more than once")]
    DuplicateBand { index: usize },
    #[error("image is {actual_w}x{actual_h}, expected {expected_w}x{expected_h}")]
    ImageShape { expected_w: usize, expected_h: usize, actual_w: usize, actual_h: usize },
    #[error("spectra matrix is {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    SpectraShape { rows: usize, cols: usize, expected_rows: usize, expected_cols: usize },
    #[error("a spectrum set needs at least one position")]
    NoSpectra,
}

/// Integer pixel coordinate; `x` runs along a scanline, `y` across lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pixel {
    pub x: usize,
    pub y: usize,
}

impl Pixel {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Scanline index in an image of the given width.
    #[inline]
    pub const fn index(self, width: usize) -> usize {
        self.y * width + self.x
    }

    #[inline]
    pub const fn from_index(index: usize, width: usize) -> Self {
        Self { x: index % width, y: index / width }
    }
}

fn check_pixels(positions: &[Pixel], width: usize, height: usize) -> Result<(), CubeError> {
    let mut seen = HashSet::with_capacity(positions.len());
    for &p in positions {
        if p.x >= width || p.y >= height {
            return Err(CubeError::PixelOutOfBounds { x: p.x, y: p.y, width, height });
        }
        if !seen.insert(p) {
            return Err(CubeError::DuplicatePixel { x: p.x, y: p.y });
        }
    }
    Ok(())
}

/// Single-channel image in scanline order.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> Image<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self, CubeError> {
        if width == 0 || height == 0 {
            return Err(CubeError::EmptyDimension { width, height, bands: 1 });
        }
        if data.len() != width * height {
            return Err(CubeError::ValueCount { expected: width * height, actual: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be non-zero");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// `(min, max)` over all pixels.
    pub fn range(&self) -> (T, T) {
        self.data.iter().fold((self.data[0], self.data[0]), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Dense `width x height x bands` absorbance cube with its wavenumber axis.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube<T> {
    width: usize,
    height: usize,
    wavenumbers: Vec<T>,
    /// band-major: `values[b * width * height + y * width + x]`
    values: Vec<T>,
}

impl<T: Real> HyperCube<T> {
    /// Builds a cube from band-major values, validating every invariant.
    pub fn new(width: usize, height: usize, wavenumbers: Vec<T>, values: Vec<T>) -> Result<Self, CubeError> {
        let bands = wavenumbers.len();
        if width == 0 || height == 0 || bands == 0 {
            return Err(CubeError::EmptyDimension { width, height, bands });
        }
        let expected = width * height * bands;
        if values.len() != expected {
            return Err(CubeError::ValueCount { expected, actual: values.len() });
        }
        check_axis(&wavenumbers)?;
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(CubeError::NonFinite { index });
        }
        Ok(Self { width, height, wavenumbers, values })
    }

    /// Builds a cube from a per-entry function `f(x, y, band)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        wavenumbers: Vec<T>,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self, CubeError> {
        let bands = wavenumbers.len();
        let mut values = Vec::with_capacity(width * height * bands);
        for b in 0..bands {
            for y in 0..height {
                for x in 0..width {
                    values.push(f(x, y, b));
                }
            }
        }
        Self::new(width, height, wavenumbers, values)
    }

    /// Builds a cube from an `N_S x Z_S` pixel-major matrix (row = scanline pixel).
    pub fn from_pixel_matrix(
        width: usize,
        height: usize,
        wavenumbers: Vec<T>,
        pixels: &DMatrix<T>,
    ) -> Result<Self, CubeError> {
        let bands = wavenumbers.len();
        if pixels.nrows() != width * height || pixels.ncols() != bands {
            return Err(CubeError::SpectraShape {
                rows: pixels.nrows(),
                cols: pixels.ncols(),
                expected_rows: width * height,
                expected_cols: bands,
            });
        }
        // nalgebra is column-major, so each column is already a band plane.
        Self::new(width, height, wavenumbers, pixels.as_slice().to_vec())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.wavenumbers.len()
    }

    /// `N_S = width * height`.
    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn wavenumbers(&self) -> &[T] {
        &self.wavenumbers
    }

    /// Band-major value buffer.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, band: usize) -> T {
        self.values[band * self.n_pixels() + y * self.width + x]
    }

    /// Contiguous plane for `band`; panics when out of range.
    #[inline]
    pub fn band_plane(&self, band: usize) -> &[T] {
        let n = self.n_pixels();
        &self.values[band * n..(band + 1) * n]
    }

    /// Full spectrum at a scanline pixel index.
    pub fn pixel_spectrum(&self, pixel_index: usize) -> Vec<T> {
        let n = self.n_pixels();
        (0..self.bands()).map(|b| self.values[b * n + pixel_index]).collect()
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.x < self.width && p.y < self.height
    }

    /// Simulates acquiring one band image.
    pub fn extract_band(&self, band: usize) -> Result<Image<T>, CubeError> {
        if band >= self.bands() {
            return Err(CubeError::BandOutOfRange { index: band, bands: self.bands() });
        }
        Ok(Image { width: self.width, height: self.height, data: self.band_plane(band).to_vec() })
    }

    /// Simulates acquiring point spectra at `positions` (row `i` ↔ `positions[i]`).
    pub fn extract_spectra(&self, positions: &[Pixel]) -> Result<SpectrumSet<T>, CubeError> {
        if positions.is_empty() {
            return Err(CubeError::NoSpectra);
        }
        check_pixels(positions, self.width, self.height)?;
        let n = self.n_pixels();
        let spectra =
            DMatrix::from_fn(positions.len(), self.bands(), |i, b| self.values[b * n + positions[i].index(self.width)]);
        Ok(SpectrumSet { positions: positions.to_vec(), spectra, wavenumbers: self.wavenumbers.clone() })
    }

    /// Index of the band nearest to `wavenumber`; ties go to the lower index.
    pub fn nearest_band_index(&self, wavenumber: T) -> usize {
        nearest_index(&self.wavenumbers, wavenumber)
    }

    /// `N_S x Z_S` matrix with one pixel spectrum per row (scanline order).
    pub fn to_pixel_matrix(&self) -> DMatrix<T> {
        DMatrix::from_column_slice(self.n_pixels(), self.bands(), &self.values)
    }

    /// Converts the scalar type, e.g. between the on-disk `f32` and compute `f64`.
    pub fn cast<U: Real>(&self) -> HyperCube<U> {
        HyperCube {
            width: self.width,
            height: self.height,
            wavenumbers: self.wavenumbers.iter().map(|v| U::lit(v.as_f64())).collect(),
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    /// Applies `f` to every value, keeping the layout.
    pub fn map_values(&self, f: impl Fn(T) -> T) -> Result<Self, CubeError> {
        Self::new(self.width, self.height, self.wavenumbers.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.bands() == other.bands()
    }
}

/// Nearest entry of `axis` to `target`, ties toward the lower index.
pub fn nearest_index<T: Real>(axis: &[T], target: T) -> usize {
    let mut best = 0;
    let mut best_dist = (axis[0] - target).abs();
    for (i, &w) in axis.iter().enumerate().skip(1) {
        let d = (w - target).abs();
        if d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    best
}

fn check_axis<T: Real>(axis: &[T]) -> Result<(), CubeError> {
    if axis.len() < 2 {
        return Ok(());
    }
    let increasing = axis[1] > axis[0];
    for i in 1..axis.len() {
        let ok = if increasing { axis[i] > axis[i - 1] } else { axis[i] < axis[i - 1] };
        if !ok || !axis[i].is_finite() {
            return Err(CubeError::AxisNotMonotonic { index: i });
        }
    }
    Ok(())
}

/// `N_D` point spectra with their pixel coordinates (the H measurement).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSet<T: Real> {
    positions: Vec<Pixel>,
    /// `N_D x Z_S`, row `i` measured at `positions[i]`
    spectra: DMatrix<T>,
    wavenumbers: Vec<T>,
}

impl<T: Real> SpectrumSet<T> {
    pub fn new(positions: Vec<Pixel>, spectra: DMatrix<T>, wavenumbers: Vec<T>) -> Result<Self, CubeError> {
        if positions.is_empty() {
            return Err(CubeError::NoSpectra);
        }
        if spectra.nrows() != positions.len() || spectra.ncols() != wavenumbers.len() {
            return Err(CubeError::SpectraShape {
                rows: spectra.nrows(),
                cols: spectra.ncols(),
                expected_rows: positions.len(),
                expected_cols: wavenumbers.len(),
            });
        }
        check_pixels(&positions, usize::MAX, usize::MAX)?;
        if let Some(index) = spectra.iter().position(|v| !v.is_finite()) {
            return Err(CubeError::NonFinite { index });
        }
        Ok(Self { positions, spectra, wavenumbers })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn bands(&self) -> usize {
        self.wavenumbers.len()
    }

    pub fn positions(&self) -> &[Pixel] {
        &self.positions
    }

    pub fn spectra(&self) -> &DMatrix<T> {
        &self.spectra
    }

    pub fn wavenumbers(&self) -> &[T] {
        &self.wavenumbers
    }

    /// Checks every position against image bounds.
    pub fn check_bounds(&self, width: usize, height: usize) -> Result<(), CubeError> {
        check_pixels(&self.positions, width, height)
    }

    /// Appends another set measured on the same axis; positions must stay unique.
    pub fn extend(&mut self, other: &SpectrumSet<T>) -> Result<(), CubeError> {
        if other.bands() != self.bands() {
            return Err(CubeError::SpectraShape {
                rows: other.len(),
                cols: other.bands(),
                expected_rows: other.len(),
                expected_cols: self.bands(),
            });
        }
        let mut positions = self.positions.clone();
        positions.extend_from_slice(&other.positions);
        check_pixels(&positions, usize::MAX, usize::MAX)?;
        let n = self.len();
        let mut spectra = self.spectra.clone().resize_vertically(n + other.len(), T::zero());
        spectra.rows_mut(n, other.len()).copy_from(&other.spectra);
        self.positions = positions;
        self.spectra = spectra;
        Ok(())
    }

    /// The first `n` spectra, in acquisition order.
    pub fn prefix(&self, n: usize) -> Result<Self, CubeError> {
        let n = n.min(self.len());
        Self::new(self.positions[..n].to_vec(), self.spectra.rows(0, n).into_owned(), self.wavenumbers.clone())
    }
}

/// Full-resolution band images at selected band indices (the M measurement).
#[derive(Debug, Clone, PartialEq)]
pub struct BandStack<T> {
    width: usize,
    height: usize,
    band_indices: Vec<usize>,
    images: Vec<Image<T>>,
}

impl<T: Real> BandStack<T> {
    pub fn new(band_indices: Vec<usize>, images: Vec<Image<T>>) -> Result<Self, CubeError> {
        let first = images.first().ok_or(CubeError::EmptyDimension { width: 0, height: 0, bands: 0 })?;
        let (width, height) = (first.width(), first.height());
        let mut stack = Self { width, height, band_indices: Vec::new(), images: Vec::new() };
        if band_indices.len() != images.len() {
            return Err(CubeError::AxisLength { expected: images.len(), actual: band_indices.len() });
        }
        for (b, img) in band_indices.into_iter().zip(images) {
            stack.push(b, img)?;
        }
        Ok(stack)
    }

    /// Empty stack for images of the given shape.
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, band_indices: Vec::new(), images: Vec::new() }
    }

    pub fn push(&mut self, band_index: usize, image: Image<T>) -> Result<(), CubeError> {
        if image.width() != self.width || image.height() != self.height {
            return Err(CubeError::ImageShape {
                expected_w: self.width,
                expected_h: self.height,
                actual_w: image.width(),
                actual_h: image.height(),
            });
        }
        if self.band_indices.contains(&band_index) {
            return Err(CubeError::DuplicateBand { index: band_index });
        }
        self.band_indices.push(band_index);
        self.images.push(image);
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn band_indices(&self) -> &[usize] {
        &self.band_indices
    }

    pub fn images(&self) -> &[Image<T>] {
        &self.images
    }

    /// Checks that every band index addresses an axis of `bands` entries.
    pub fn check_bands(&self, bands: usize) -> Result<(), CubeError> {
        match self.band_indices.iter().find(|&&b| b >= bands) {
            Some(&index) => Err(CubeError::BandOutOfRange { index, bands }),
            None => Ok(()),
        }
    }

    /// `N_S x Z_D` matrix, column `j` = image `j` in scanline order.
    pub fn to_matrix(&self) -> DMatrix<T> {
        let n = self.width * self.height;
        DMatrix::from_fn(n, self.len(), |i, j| self.images[j].data[i])
    }

    /// The first `n` band images, in acquisition order.
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            width: self.width,
            height: self.height,
            band_indices: self.band_indices[..n].to_vec(),
            images: self.images[..n].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn axis(n: usize) -> Vec<f64> {
        (0..n).map(|i| 900.0 + 8.0 * i as f64).collect()
    }

    fn random_cube(w: usize, h: usize, z: usize, seed: u64) -> (HyperCube<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..w * h * z).map(|_| rng.random::<f64>()).collect();
        let cube = HyperCube::new(w, h, axis(z), raw.clone()).unwrap();
        (cube, raw)
    }

    #[test]
    fn constant_cube_band_is_constant() {
        let cube = HyperCube::from_fn(3, 2, axis(4), |_, _, _| 0.7).unwrap();
        let img = cube.extract_band(2).unwrap();
        assert!(img.data().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn band_valued_cube() {
        let cube = HyperCube::from_fn(3, 3, axis(5), |_, _, b| b as f64).unwrap();
        for k in 0..5 {
            assert!(cube.extract_band(k).unwrap().data().iter().all(|&v| v == k as f64));
        }
    }

    #[test]
    fn band_matches_raw_indexing() {
        let (cube, raw) = random_cube(4, 4, 5, 11);
        let img = cube.extract_band(2).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(img.get(x, y), raw[2 * 16 + y * 4 + x]);
            }
        }
        assert!(matches!(cube.extract_band(5), Err(CubeError::BandOutOfRange { .. })));
    }

    #[test]
    fn spectra_match_pixel_indexing() {
        let (cube, raw) = random_cube(6, 5, 7, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut positions = Vec::new();
        while positions.len() < 10 {
            let p = Pixel::new(rng.random_range(0..6), rng.random_range(0..5));
            if !positions.contains(&p) {
                positions.push(p);
            }
        }
        let set = cube.extract_spectra(&positions).unwrap();
        for (i, p) in positions.iter().enumerate() {
            for b in 0..7 {
                assert_eq!(set.spectra()[(i, b)], raw[b * 30 + p.y * 6 + p.x]);
            }
        }
    }

    #[test]
    fn all_positions_reshape_cube() {
        let (cube, _) = random_cube(3, 4, 5, 5);
        let all: Vec<Pixel> = (0..12).map(|i| Pixel::from_index(i, 3)).collect();
        let set = cube.extract_spectra(&all).unwrap();
        assert_eq!(set.spectra(), &cube.to_pixel_matrix());
    }

    #[test]
    fn constant_cube_single_spectrum() {
        let cube = HyperCube::from_fn(2, 2, axis(3), |_, _, _| 2.0).unwrap();
        let set = cube.extract_spectra(&[Pixel::new(1, 0)]).unwrap();
        assert_eq!(set.len(), 1);
        assert!(set.spectra().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn spectra_errors() {
        let (cube, _) = random_cube(3, 3, 2, 1);
        assert!(matches!(cube.extract_spectra(&[Pixel::new(3, 0)]), Err(CubeError::PixelOutOfBounds { .. })));
        assert!(matches!(
            cube.extract_spectra(&[Pixel::new(1, 1), Pixel::new(1, 1)]),
            Err(CubeError::DuplicatePixel { .. })
        ));
    }

    #[test]
    fn nearest_band_examples() {
        let cube = HyperCube::from_fn(1, 1, vec![900.0, 908.0, 916.0], |_, _, _| 0.0).unwrap();
        assert_eq!(cube.nearest_band_index(908.0), 1);
        assert_eq!(cube.nearest_band_index(0.0), 0);
        assert_eq!(cube.nearest_band_index(5000.0), 2);
        let two = HyperCube::from_fn(1, 1, vec![900.0, 908.0], |_, _, _| 0.0).unwrap();
        assert_eq!(two.nearest_band_index(904.0), 0);
    }

    #[test]
    fn nearest_band_paper_axis() {
        // 900..=1800 step 8 has no 1650 entry; 1644 and 1652 are the neighbours.
        let wn: Vec<f64> = (0..=112).map(|i| 900.0 + 8.0 * i as f64).collect();
        let cube = HyperCube::from_fn(1, 1, wn.clone(), |_, _, _| 0.0).unwrap();
        let idx = cube.nearest_band_index(1650.0);
        let scan = (0..wn.len())
            .min_by(|&a, &b| (wn[a] - 1650.0).abs().partial_cmp(&(wn[b] - 1650.0).abs()).unwrap())
            .unwrap();
        assert_eq!(idx, scan);
        assert_eq!(wn[idx], 1652.0);
    }

    #[test]
    fn decreasing_axis_accepted_non_monotonic_rejected() {
        assert!(HyperCube::new(1, 1, vec![3.0, 2.0, 1.0], vec![0.0; 3]).is_ok());
        assert!(matches!(
            HyperCube::new(1, 1, vec![1.0, 2.0, 2.0], vec![0.0; 3]),
            Err(CubeError::AxisNotMonotonic { index: 2 })
        ));
        assert!(matches!(HyperCube::new(1, 1, vec![1.0], vec![f64::NAN]), Err(CubeError::NonFinite { index: 0 })));
    }

    #[test]
    fn band_stack_rejects_duplicates_and_shapes() {
        let mut stack = BandStack::<f64>::empty(2, 2);
        stack.push(3, Image::filled(2, 2, 1.0)).unwrap();
        assert!(matches!(stack.push(3, Image::filled(2, 2, 1.0)), Err(CubeError::DuplicateBand { .. })));
        assert!(matches!(stack.push(1, Image::filled(3, 2, 1.0)), Err(CubeError::ImageShape { .. })));
        assert!(stack.check_bands(3).is_err());
        assert!(stack.check_bands(4).is_ok());
    }

    #[test]
    fn spectrum_set_extend_keeps_uniqueness() {
        let (cube, _) = random_cube(4, 4, 3, 2);
        let mut a = cube.extract_spectra(&[Pixel::new(0, 0)]).unwrap();
        let b = cube.extract_spectra(&[Pixel::new(1, 0), Pixel::new(2, 2)]).unwrap();
        a.extend(&b).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a.spectra().row(2), cube.extract_spectra(&[Pixel::new(2, 2)]).unwrap().spectra().row(0));
        assert!(a.extend(&b).is_err());
        assert_eq!(a.prefix(1).unwrap().positions(), &[Pixel::new(0, 0)]);
    }

    proptest::proptest! {
        #[test]
        fn band_and_spectrum_agree(w in 1usize..5, h in 1usize..5, z in 1usize..6, seed in 0u64..1000) {
            let (cube, _) = random_cube(w, h, z, seed);
            for y in 0..h {
                for x in 0..w {
                    let s = cube.extract_spectra(&[Pixel::new(x, y)]).unwrap();
                    for b in 0..z {
                        proptest::prop_assert_eq!(cube.extract_band(b).unwrap().get(x, y), s.spectra()[(0, b)]);
                    }
                }
            }
        }

        #[test]
        fn nearest_matches_scan(q in 850.0f64..1850.0, n in 1usize..40) {
            let wn = axis(n);
            let cube = HyperCube::from_fn(1, 1, wn.clone(), |_, _, _| 0.0).unwrap();
            let mut best = 0;
            for i in 0..n {
                if (wn[i] - q).abs() < (wn[best] - q).abs() {
                    best = i;
                }
            }
            proptest::prop_assert_eq!(cube.nearest_band_index(q), best);
        }
    }
}
