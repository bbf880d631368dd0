//! Random fusion instances and dense reference solvers shared by the
//! integration tests.
#![allow(dead_code)]

use hsi_acs::fusion::{fit_subspace, FusionOperators, SubspaceModel, ZRule};
use hsi_acs::{BandStack, HyperCube, Pixel, SpectrumSet};
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub truth: HyperCube<f64>,
    pub spectra: SpectrumSet<f64>,
    pub stack: BandStack<f64>,
    pub model: SubspaceModel<f64>,
    pub ops: FusionOperators,
}

#[allow(clippy::too_many_arguments)]
pub fn instance(
    seed: u64,
    (w, h): (usize, usize),
    z_s: usize,
    n_d: usize,
    z_d: usize,
    k: usize,
    noise: f64,
    (var_h, var_m): (f64, f64),
) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rank = k + 1;
    let factors = DMatrix::from_fn(w * h, rank, |_, _| rng.random_range(-1.0..1.0));
    let loads = DMatrix::from_fn(rank, z_s, |_, _| rng.random_range(-1.0..1.0));
    let offset: Vec<f64> = (0..z_s).map(|_| rng.random_range(0.0..2.0)).collect();
    let pix = &factors * &loads;
    let truth = HyperCube::from_fn(w, h, (0..z_s).map(|b| 1000.0 + 4.0 * b as f64).collect(), |x, y, b| {
        pix[(y * w + x, b)] + offset[b]
    })
    .unwrap();
    let noisy = |v: f64, rng: &mut ChaCha8Rng| v + noise * rng.random_range(-1.0..1.0);

    let mut idx = sample(&mut rng, w * h, n_d).into_vec();
    idx.sort_unstable();
    idx.rotate_left(1);
    let positions: Vec<Pixel> = idx.iter().map(|&i| Pixel::from_index(i, w)).collect();
    let mut clean = truth.extract_spectra(&positions).unwrap().spectra().clone();
    clean.iter_mut().for_each(|v| *v = noisy(*v, &mut rng));
    let spectra = SpectrumSet::new(positions, clean, truth.wavenumbers().to_vec()).unwrap();

    let bands = sample(&mut rng, z_s, z_d).into_vec();
    let mut stack = BandStack::empty(w, h);
    for &b in &bands {
        let img = truth.extract_band(b).unwrap();
        let data = img.data().iter().map(|&v| noisy(v, &mut rng)).collect();
        stack.push(b, hsi_acs::Image::new(w, h, data).unwrap()).unwrap();
    }
    let model = fit_subspace(&spectra, ZRule::Explicit(k)).unwrap();
    let ops = FusionOperators::new(w, h, z_s, idx, bands, var_h, var_m).unwrap();
    Instance { truth, spectra, stack, model, ops }
}

/// Everything in vectorized form: `vec(R)` stacks the columns of `R`.
pub struct Dense {
    pub n: usize,
    pub k: usize,
    /// `Qᵀ ⊗ L`
    pub a_h: DMatrix<f64>,
    /// `(QB)ᵀ ⊗ I`
    pub a_m: DMatrix<f64>,
    pub h: DVector<f64>,
    pub m: DVector<f64>,
    pub var_h: f64,
    pub var_m: f64,
}

impl Dense {
    pub fn new(inst: &Instance) -> Self {
        let ops = &inst.ops;
        let n = ops.n_pixels();
        let z_s = ops.n_bands();
        let q = inst.model.basis().clone();
        let k = q.nrows();
        let mut l = DMatrix::zeros(ops.positions().len(), n);
        for (i, &p) in ops.positions().iter().enumerate() {
            l[(i, p)] = 1.0;
        }
        let mut b = DMatrix::zeros(z_s, ops.bands().len());
        for (j, &band) in ops.bands().iter().enumerate() {
            b[(band, j)] = 1.0;
        }
        let mean = inst.model.mean();
        let mut hc = inst.spectra.spectra().clone();
        for mut row in hc.row_iter_mut() {
            row -= mean.transpose();
        }
        let mut mc = inst.stack.to_matrix();
        let mean_b = (mean.transpose() * &b).transpose();
        for mut row in mc.row_iter_mut() {
            row -= mean_b.transpose();
        }
        let g = &q * &b;
        Dense {
            n,
            k,
            a_h: q.transpose().kronecker(&l),
            a_m: g.transpose().kronecker(&DMatrix::identity(n, n)),
            h: DVector::from_column_slice(hc.as_slice()),
            m: DVector::from_column_slice(mc.as_slice()),
            var_h: ops.var_h,
            var_m: ops.var_m,
        }
    }

    pub fn unvec(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n, self.k, x.as_slice())
    }

    pub fn vec(r: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_column_slice(r.as_slice())
    }

    /// Smooth part as `½xᵀPx - cᵀx + d`.
    pub fn quadratic(&self) -> (DMatrix<f64>, DVector<f64>, f64) {
        let p = self.a_h.tr_mul(&self.a_h) / self.var_h + self.a_m.tr_mul(&self.a_m) / self.var_m;
        let c = self.a_h.tr_mul(&self.h) / self.var_h + self.a_m.tr_mul(&self.m) / self.var_m;
        let d = 0.5 * (self.h.norm_squared() / self.var_h + self.m.norm_squared() / self.var_m);
        (p, c, d)
    }

    pub fn data_fit(&self, x: &DVector<f64>) -> f64 {
        0.5 * ((&self.h - &self.a_h * x).norm_squared() / self.var_h
            + (&self.m - &self.a_m * x).norm_squared() / self.var_m)
    }

    /// The initializer assembled from full covariance matrices.
    pub fn map_estimate(&self, ridge: f64) -> DMatrix<f64> {
        let nk = self.n * self.k;
        let eye = DMatrix::<f64>::identity(nk, nk);
        let normal = self.a_m.tr_mul(&self.a_m) + &eye * ridge;
        let prior_mean = normal.clone().lu().solve(&self.a_m.tr_mul(&self.m)).unwrap();
        let cov = normal.try_inverse().unwrap() * self.var_m;
        let cov_inv = cov.clone().try_inverse().unwrap();
        let lhs = self.a_h.tr_mul(&self.a_h) / self.var_h + &cov_inv;
        let rhs = self.a_h.tr_mul(&self.h) / self.var_h + &cov_inv * prior_mean;
        self.unvec(&lhs.lu().solve(&rhs).unwrap())
    }

    /// l1-penalized minimum by accelerated projected gradient on the split
    /// `x = p - n`, `p, n >= 0`.
    pub fn l1_reference(&self, eta: f64, iterations: usize) -> (DMatrix<f64>, f64) {
        let (p_mat, c, _) = self.quadratic();
        let nk = self.n * self.k;
        let lip = 2.0 * p_mat.clone().symmetric_eigen().eigenvalues.max();
        let step = 1.0 / lip;
        let obj = |z: &DVector<f64>| {
            let x = z.rows(0, nk) - z.rows(nk, nk);
            self.data_fit(&x) + eta * z.sum()
        };
        let grad = |z: &DVector<f64>| {
            let x = z.rows(0, nk) - z.rows(nk, nk);
            let g = &p_mat * x - &c;
            let mut out = DVector::zeros(2 * nk);
            for i in 0..nk {
                out[i] = g[i] + eta;
                out[nk + i] = -g[i] + eta;
            }
            out
        };
        let mut z = DVector::<f64>::zeros(2 * nk);
        let mut y = z.clone();
        let mut t = 1.0f64;
        let mut best = (obj(&z), z.clone());
        for _ in 0..iterations {
            let mut z_next = &y - grad(&y) * step;
            z_next.iter_mut().for_each(|v| *v = v.max(0.0));
            let f = obj(&z_next);
            if f > best.0 {
                // restart momentum
                t = 1.0;
            }
            if f < best.0 {
                best = (f, z_next.clone());
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &z_next + (&z_next - &z) * ((t - 1.0) / t_next);
            z = z_next;
            t = t_next;
        }
        let x = best.1.rows(0, nk) - best.1.rows(nk, nk);
        (self.unvec(&x), best.0)
    }

    /// Nuclear-norm-penalized minimum by accelerated proximal gradient with
    /// SVD-based singular value thresholding.
    pub fn nuclear_reference(&self, eta: f64, iterations: usize) -> (DMatrix<f64>, f64) {
        let (p_mat, c, _) = self.quadratic();
        let lip = p_mat.clone().symmetric_eigen().eigenvalues.max();
        let step = 1.0 / lip;
        let nuc = |x: &DVector<f64>| self.unvec(x).singular_values().sum();
        let obj = |x: &DVector<f64>| self.data_fit(x) + eta * nuc(x);
        let svt = |x: DVector<f64>, t: f64| {
            let svd = self.unvec(&x).svd(true, true);
            let s = svd.singular_values.map(|v| (v - t).max(0.0));
            let r = svd.u.unwrap() * DMatrix::from_diagonal(&s) * svd.v_t.unwrap();
            Self::vec(&r)
        };
        let nk = self.n * self.k;
        let mut x = DVector::<f64>::zeros(nk);
        let mut y = x.clone();
        let mut t = 1.0f64;
        let mut best = (obj(&x), x.clone());
        for _ in 0..iterations {
            let x_next = svt(&y - (&p_mat * &y - &c) * step, eta * step);
            let f = obj(&x_next);
            if f > best.0 {
                t = 1.0;
            }
            if f < best.0 {
                best = (f, x_next.clone());
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &x_next + (&x_next - &x) * ((t - 1.0) / t_next);
            x = x_next;
            t = t_next;
        }
        (self.unvec(&best.1), best.0)
    }
}
