//! SLIC superpixels over a stack of band images.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SamplingError;
use crate::connectivity::{compact_labels, enforce_connectivity};
use crate::hypercube::{BandStack, Pixel};
use crate::scalar::Real;

/// SLIC parameters other than the requested superpixel count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlicParams {
    pub compactness: f64,
    /// Gaussian pre-smoothing standard deviation in pixels; `0` disables it.
    pub smoothing_sigma: f64,
    pub iterations: usize,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self { compactness: 0.03, smoothing_sigma: 5.0, iterations: 10 }
    }
}

/// Superpixel labels and one representative pixel per superpixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelMap {
    pub width: usize,
    pub height: usize,
    /// scanline order, values in `0..k_actual`
    pub labels: Vec<usize>,
    /// `centers[l]` is a pixel of region `l`, the one nearest its centroid
    pub centers: Vec<Pixel>,
    pub k_requested: usize,
    pub k_actual: usize,
}

impl SuperpixelMap {
    pub fn label(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x]
    }

    pub fn region_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k_actual];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * n;
    let m = i.rem_euclid(period);
    if m < n {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Separable Gaussian blur with mirrored borders, truncated at 4σ.
pub(crate) fn gaussian_blur(data: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return data.to_vec();
    }
    let radius = (4.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius).map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= sum);

    let mut tmp = vec![0.0; data.len()];
    tmp.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            *out = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * data[y * width + reflect(x as isize + k as isize - radius, width)])
                .sum();
        }
    });
    let mut out = vec![0.0; data.len()];
    out.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            *o = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * tmp[reflect(y as isize + k as isize - radius, height) * width + x])
                .sum();
        }
    });
    out
}

fn min_max_normalize(data: &mut [f64]) {
    let (lo, hi) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let span = hi - lo;
    for v in data.iter_mut() {
        *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
    }
}

/// Grid of at most `k` seeds with an aspect ratio following the image.
fn grid_shape(k: usize, width: usize, height: usize) -> (usize, usize) {
    let ny = ((k as f64 * height as f64 / width as f64).sqrt().round() as usize).clamp(1, height.min(k));
    let nx = (k / ny).clamp(1, width);
    (nx, ny)
}

struct Cluster {
    feature: Vec<f64>,
    x: f64,
    y: f64,
}

/// Runs SLIC on the stacked (smoothed, min-max normalized) band images.
///
/// Pixel-to-center distance is `sqrt(d_color² + (d_spatial / S)² m²)` with
/// grid interval `S = sqrt(N / k)` and compactness `m`.
pub fn slic<T: Real>(bands: &BandStack<T>, k: usize, params: &SlicParams) -> Result<SuperpixelMap, SamplingError> {
    let (width, height) = (bands.width(), bands.height());
    let n = width * height;
    if bands.is_empty() {
        return Err(SamplingError::NoBandImages);
    }
    if k == 0 || k > n {
        return Err(SamplingError::InvalidSuperpixelCount { k, n_pixels: n });
    }
    let nb = bands.len();

    // pixel-major features: feats[p * nb + b]
    let mut feats = vec![0.0; n * nb];
    for (b, img) in bands.images().iter().enumerate() {
        let raw: Vec<f64> = img.data().iter().map(|v| v.as_f64()).collect();
        let mut plane = gaussian_blur(&raw, width, height, params.smoothing_sigma);
        min_max_normalize(&mut plane);
        for (p, v) in plane.into_iter().enumerate() {
            feats[p * nb + b] = v;
        }
    }
    let feature = |p: usize| &feats[p * nb..(p + 1) * nb];

    let gradient = |x: usize, y: usize| -> f64 {
        let (xl, xr) = (x.saturating_sub(1), (x + 1).min(width - 1));
        let (yu, yd) = (y.saturating_sub(1), (y + 1).min(height - 1));
        let (l, r, u, d) =
            (feature(y * width + xl), feature(y * width + xr), feature(yu * width + x), feature(yd * width + x));
        (0..nb).map(|b| (r[b] - l[b]).powi(2) + (d[b] - u[b]).powi(2)).sum()
    };

    let (nx, ny) = grid_shape(k, width, height);
    let mut seeds = Vec::with_capacity(nx * ny);
    let mut taken = HashSet::new();
    for j in 0..ny {
        for i in 0..nx {
            let cx = (((i as f64 + 0.5) * width as f64 / nx as f64) as usize).min(width - 1);
            let cy = (((j as f64 + 0.5) * height as f64 / ny as f64) as usize).min(height - 1);
            // lowest-gradient pixel of the 3x3 neighbourhood, scanline order on ties
            let mut best = (f64::INFINITY, cx, cy);
            for y in cy.saturating_sub(1)..=(cy + 1).min(height - 1) {
                for x in cx.saturating_sub(1)..=(cx + 1).min(width - 1) {
                    let g = gradient(x, y);
                    if g < best.0 {
                        best = (g, x, y);
                    }
                }
            }
            if taken.insert((best.1, best.2)) {
                seeds.push((best.1, best.2));
            }
        }
    }
    let mut clusters: Vec<Cluster> = seeds
        .iter()
        .map(|&(x, y)| Cluster { feature: feature(y * width + x).to_vec(), x: x as f64, y: y as f64 })
        .collect();

    let s = (n as f64 / k as f64).sqrt();
    let spatial_weight = (params.compactness / s).powi(2);
    let mut labels = vec![0usize; n];

    for _ in 0..params.iterations.max(1) {
        // bucket centers on an S-grid so each pixel only checks centers within S
        let cell = s.max(1.0);
        let gx = (width as f64 / cell).ceil() as usize + 1;
        let gy = (height as f64 / cell).ceil() as usize + 1;
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); gx * gy];
        for (c, cl) in clusters.iter().enumerate() {
            let bx = ((cl.x / cell) as usize).min(gx - 1);
            let by = ((cl.y / cell) as usize).min(gy - 1);
            buckets[by * gx + bx].push(c);
        }

        labels.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
            let mut candidates = Vec::new();
            for (x, label) in row.iter_mut().enumerate() {
                let p = y * width + x;
                let f = feature(p);
                let bx = (x as f64 / cell) as usize;
                let by = (y as f64 / cell) as usize;
                candidates.clear();
                for yy in by.saturating_sub(1)..=(by + 1).min(gy - 1) {
                    for xx in bx.saturating_sub(1)..=(bx + 1).min(gx - 1) {
                        candidates.extend_from_slice(&buckets[yy * gx + xx]);
                    }
                }
                candidates.sort_unstable();
                let mut best = (f64::INFINITY, usize::MAX);
                let consider = |best: &mut (f64, usize), c: usize, windowed: bool| {
                    let cl = &clusters[c];
                    let (dx, dy) = (x as f64 - cl.x, y as f64 - cl.y);
                    if windowed && (dx.abs() > s || dy.abs() > s) {
                        return;
                    }
                    let dc: f64 = f.iter().zip(&cl.feature).map(|(a, b)| (a - b).powi(2)).sum();
                    let d = dc + (dx * dx + dy * dy) * spatial_weight;
                    if d < best.0 {
                        *best = (d, c);
                    }
                };
                for &c in &candidates {
                    consider(&mut best, c, true);
                }
                if best.1 == usize::MAX {
                    // outside every 2S x 2S window
                    for c in 0..clusters.len() {
                        consider(&mut best, c, false);
                    }
                }
                *label = best.1;
            }
        });

        let mut sums = vec![(vec![0.0; nb], 0.0, 0.0, 0usize); clusters.len()];
        for (p, &l) in labels.iter().enumerate() {
            let acc = &mut sums[l];
            for (a, v) in acc.0.iter_mut().zip(feature(p)) {
                *a += v;
            }
            acc.1 += (p % width) as f64;
            acc.2 += (p / width) as f64;
            acc.3 += 1;
        }
        for (cl, (f, sx, sy, count)) in clusters.iter_mut().zip(sums) {
            if count > 0 {
                let c = count as f64;
                cl.feature = f.into_iter().map(|v| v / c).collect();
                cl.x = sx / c;
                cl.y = sy / c;
            }
        }
    }

    enforce_connectivity(&mut labels, width, height, None);
    let (k_actual, _) = compact_labels(&mut labels);

    let mut centroid = vec![(0.0, 0.0, 0usize); k_actual];
    for (p, &l) in labels.iter().enumerate() {
        centroid[l].0 += (p % width) as f64;
        centroid[l].1 += (p / width) as f64;
        centroid[l].2 += 1;
    }
    let mut centers = vec![(f64::INFINITY, Pixel::new(0, 0)); k_actual];
    for (p, &l) in labels.iter().enumerate() {
        let (sx, sy, c) = centroid[l];
        let (mx, my) = (sx / c as f64, sy / c as f64);
        let (x, y) = (p % width, p / width);
        let d = (x as f64 - mx).powi(2) + (y as f64 - my).powi(2);
        if d < centers[l].0 {
            centers[l] = (d, Pixel::new(x, y));
        }
    }
    Ok(SuperpixelMap {
        width,
        height,
        labels,
        centers: centers.into_iter().map(|(_, p)| p).collect(),
        k_requested: k,
        k_actual,
    })
}

/// Superpixel centers not already in `existing`, in label order.
pub fn superpixel_centers(map: &SuperpixelMap, existing: &[Pixel]) -> Vec<Pixel> {
    let seen: HashSet<Pixel> = existing.iter().copied().collect();
    map.centers.iter().copied().filter(|p| !seen.contains(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectivity::components;
    use crate::hypercube::Image;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stack(img: Image<f64>) -> BandStack<f64> {
        BandStack::new(vec![0], vec![img]).unwrap()
    }

    fn assert_valid(map: &SuperpixelMap) {
        assert!(map.k_actual <= map.k_requested);
        assert_eq!(map.centers.len(), map.k_actual);
        let comps = components(&map.labels, map.width, map.height);
        assert_eq!(comps.label.len(), map.k_actual, "each label must be one 4-connected region");
        for (l, c) in map.centers.iter().enumerate() {
            assert_eq!(map.label(c.x, c.y), l);
        }
    }

    #[test]
    fn single_superpixel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = Image::from_fn(21, 15, |_, _| rng.random::<f64>());
        let map = slic(&stack(img), 1, &SlicParams::default()).unwrap();
        assert_eq!(map.k_actual, 1);
        assert!(map.labels.iter().all(|&l| l == 0));
        assert_eq!(map.centers[0], Pixel::new(10, 7));
    }

    #[test]
    fn quadrants_recovered() {
        let values = [0.0, 0.35, 0.7, 1.0];
        let img = Image::from_fn(40, 40, |x, y| values[(x / 20) + 2 * (y / 20)]);
        let params = SlicParams { smoothing_sigma: 0.5, ..Default::default() };
        let map = slic(&stack(img), 4, &params).unwrap();
        assert_valid(&map);
        assert_eq!(map.k_actual, 4);
        for y in 0..40 {
            for x in 0..40 {
                let q = (x / 20) + 2 * (y / 20);
                let ref_label = map.label((q % 2) * 20 + 10, (q / 2) * 20 + 10);
                assert_eq!(map.label(x, y), ref_label, "pixel ({x}, {y})");
            }
        }
    }

    #[test]
    fn constant_image_gives_balanced_grid() {
        let map = slic(&stack(Image::filled(30, 30, 0.5)), 9, &SlicParams::default()).unwrap();
        assert_valid(&map);
        assert_eq!(map.k_actual, 9);
        let sizes = map.region_sizes();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(*hi <= 2 * *lo, "sizes {sizes:?}");
    }

    #[test]
    fn rejects_bad_k_and_empty_stack() {
        let s = stack(Image::filled(3, 3, 0.0));
        assert!(matches!(slic(&s, 0, &SlicParams::default()), Err(SamplingError::InvalidSuperpixelCount { .. })));
        assert!(matches!(slic(&s, 10, &SlicParams::default()), Err(SamplingError::InvalidSuperpixelCount { .. })));
        let empty = BandStack::<f64>::empty(3, 3);
        assert!(matches!(slic(&empty, 1, &SlicParams::default()), Err(SamplingError::NoBandImages)));
    }

    #[test]
    fn multi_band_random_maps_are_valid() {
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (w, h) = (rng.random_range(8..40), rng.random_range(8..40));
            let a = Image::from_fn(w, h, |_, _| rng.random::<f64>());
            let b = Image::from_fn(w, h, |x, y| ((x / 5 + y / 7) % 3) as f64);
            let bands = BandStack::new(vec![3, 9], vec![a, b]).unwrap();
            let k = rng.random_range(1..(w * h / 4));
            let map = slic(&bands, k, &SlicParams { smoothing_sigma: 1.0, ..Default::default() }).unwrap();
            assert_valid(&map);
        }
    }

    #[test]
    fn centers_exclude_existing() {
        let map = slic(&stack(Image::filled(30, 30, 0.5)), 9, &SlicParams::default()).unwrap();
        assert_eq!(superpixel_centers(&map, &[]), map.centers);
        assert!(superpixel_centers(&map, &map.centers).is_empty());
        let existing = vec![map.centers[0], map.centers[4], map.centers[8], Pixel::new(29, 29)];
        let fresh = superpixel_centers(&map, &existing);
        let oracle: Vec<Pixel> = map.centers.iter().copied().filter(|c| !existing.contains(c)).collect();
        assert_eq!(fresh, oracle);
        assert_eq!(fresh.len(), 6);
    }

    #[test]
    fn blur_preserves_constant_and_mass() {
        let flat = vec![2.0; 12 * 7];
        let out = gaussian_blur(&flat, 12, 7, 5.0);
        assert!(out.iter().all(|v| (v - 2.0).abs() < 1e-12));
        assert_eq!(reflect(-1, 5), 0);
        assert_eq!(reflect(5, 5), 4);
        assert_eq!(reflect(11, 5), 1);
    }
}
