//! Weighted-LASSO solve of the subspace coefficients by ADMM (scaled form).
//!
//! The splitting is `min f(R) + η·pen(V)  s.t.  R = V`, where `f` is the
//! weighted data fit. `f` separates over pixels into
//! `½ rᵀAr - bᵢᵀr` with one of two matrices `A` (sampled or not), so the
//! R-update is a `Z̃ x Z̃` solve per pixel against a pre-inverted
//! `A + ρI`.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::map::spd_inverse;
use super::problem::{from_row_major, to_row_major, Problem};
use super::{FusionError, FusionOperators, ReducedImage, SubspaceModel, ZRule};
use crate::hypercube::{BandStack, SpectrumSet};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    /// elementwise `‖R‖₁`
    #[default]
    L1,
    /// sum of singular values of `R`
    Nuclear,
}

impl std::str::FromStr for Penalty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Penalty::L1),
            "nuclear" => Ok(Penalty::Nuclear),
            _ => Err(format!("unknown penalty {s:?} (expected l1 or nuclear)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub penalty: Penalty,
    /// `None`: `1e-3` times the RMS of the point spectra
    pub eta: Option<f64>,
    /// penalty parameter, relative to unit data weight
    pub rho: f64,
    /// residual balancing (×2 / ÷2 when one residual exceeds ten times the other)
    pub adapt_rho: bool,
    pub max_iterations: usize,
    pub primal_tolerance: f64,
    pub dual_tolerance: f64,
    /// added to the normal-equation diagonal of the initializer
    pub ridge: f64,
    pub z_rule: ZRule,
    /// limit `Z̃` to the number of band images: unsampled pixels cannot
    /// determine more coefficients than they have measurements
    pub cap_rank_at_bands: bool,
    /// also drop trailing components whose eigenvalue does not clear the
    /// largest eigenvalue pure noise of variance `σ_H²` would produce
    pub drop_noise_components: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            penalty: Penalty::L1,
            eta: None,
            rho: 1.0,
            adapt_rho: true,
            max_iterations: 500,
            primal_tolerance: 1e-6,
            dual_tolerance: 1e-6,
            ridge: 1e-8,
            z_rule: ZRule::default(),
            cap_rank_at_bands: true,
            drop_noise_components: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        let bad = |m: String| Err(FusionError::InvalidConfig(m));
        if let Some(eta) = self.eta {
            if !(eta >= 0.0 && eta.is_finite()) {
                return bad(format!("eta must be >= 0 (got {eta})"));
            }
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be > 0 (got {})", self.rho));
        }
        if !(self.primal_tolerance > 0.0 && self.dual_tolerance > 0.0) {
            return bad("tolerances must be > 0".into());
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return bad(format!("ridge must be >= 0 (got {})", self.ridge));
        }
        Ok(())
    }

    /// `η` actually used for the given point spectra.
    pub fn resolved_eta<T: Real>(&self, spectra: &SpectrumSet<T>) -> f64 {
        self.eta.unwrap_or_else(|| {
            let h = spectra.spectra();
            let ss: f64 = h.iter().map(|v| v.as_f64().powi(2)).sum();
            1e-3 * (ss / h.len().max(1) as f64).sqrt()
        })
    }
}

/// One logged ADMM iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    /// stated objective at the iterate `V`
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmOutcome<T: Real> {
    pub solution: ReducedImage<T>,
    pub log: Vec<IterationLog>,
    pub converged: bool,
    pub eta: f64,
    /// objective at the initial point
    pub initial_objective: f64,
}

impl<T: Real> AdmmOutcome<T> {
    pub fn iterations(&self) -> usize {
        self.log.len()
    }

    pub fn final_objective(&self) -> f64 {
        self.log.last().map_or(self.initial_objective, |l| l.objective)
    }

    /// Writes `iteration,objective,primal_residual,dual_residual`.
    pub fn write_convergence_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        write_convergence_csv(&self.log, out)
    }
}

pub fn write_convergence_csv<W: Write>(log: &[IterationLog], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "objective", "primal_residual", "dual_residual"])?;
    for l in log {
        w.write_record([
            l.iteration.to_string(),
            format!("{:e}", l.objective),
            format!("{:e}", l.primal_residual),
            format!("{:e}", l.dual_residual),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `sign(x)·max(|x| - t, 0)`
#[inline]
pub fn soft_threshold<T: Real>(x: T, t: T) -> T {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        T::zero()
    }
}

/// Right singular vectors and singular values of a tall `n x k` row-major
/// matrix, via the `k x k` Gram matrix.
fn thin_svd<T: Real>(x: &[T], k: usize) -> (DMatrix<T>, Vec<T>) {
    let gram = x
        .par_chunks(k)
        .fold(
            || DMatrix::<T>::zeros(k, k),
            |mut g, row| {
                for a in 0..k {
                    for b in a..k {
                        g[(a, b)] += row[a] * row[b];
                    }
                }
                g
            },
        )
        .reduce(|| DMatrix::zeros(k, k), |a, b| a + b);
    let gram = DMatrix::from_fn(k, k, |a, b| if a <= b { gram[(a, b)] } else { gram[(b, a)] });
    let eig = SymmetricEigen::new(gram);
    let sv = eig.eigenvalues.iter().map(|&l| l.max(T::zero()).sqrt()).collect();
    (eig.eigenvectors, sv)
}

/// Nuclear norm of a row-major `n x k` matrix.
fn nuclear_norm<T: Real>(x: &[T], k: usize) -> f64 {
    thin_svd(x, k).1.iter().map(|s| s.as_f64()).sum()
}

fn penalty_value<T: Real>(penalty: Penalty, x: &[T], k: usize) -> f64 {
    match penalty {
        Penalty::L1 => x.par_iter().map(|v| v.abs().as_f64()).sum(),
        Penalty::Nuclear => nuclear_norm(x, k),
    }
}

/// In-place proximal step of `t·pen`.
fn prox<T: Real>(penalty: Penalty, x: &mut [T], k: usize, t: T) {
    if t <= T::zero() {
        return;
    }
    match penalty {
        Penalty::L1 => x.par_iter_mut().for_each(|v| *v = soft_threshold(*v, t)),
        Penalty::Nuclear => {
            // X = U Σ Wᵀ  =>  prox(X) = X W diag(max(σ - t, 0)/σ) Wᵀ
            let (w, sv) = thin_svd(x, k);
            let scale: Vec<T> = sv.iter().map(|&s| if s > t { (s - t) / s } else { T::zero() }).collect();
            let op = &w * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(scale)) * w.transpose();
            x.par_chunks_mut(k).for_each(|row| {
                let v = nalgebra::RowDVector::from_row_slice(row) * &op;
                row.copy_from_slice(v.as_slice());
            });
        }
    }
}

fn sq_norm<T: Real>(x: &[T]) -> f64 {
    x.par_iter().map(|v| v.as_f64().powi(2)).sum()
}

fn sq_diff<T: Real>(a: &[T], b: &[T]) -> f64 {
    a.par_iter().zip(b).map(|(x, y)| (*x - *y).as_f64().powi(2)).sum()
}

/// Stated objective of the problem for row-major coefficients.
fn objective<T: Real>(p: &Problem<T>, penalty: Penalty, eta: f64, r: &[T]) -> f64 {
    let pen = if eta > 0.0 { eta * penalty_value(penalty, r, p.k) } else { 0.0 };
    p.data_fit(r) + pen
}

/// Evaluates the fusion objective at `r`.
pub fn fusion_objective<T: Real>(
    spectra: &SpectrumSet<T>,
    stack: &BandStack<T>,
    model: &SubspaceModel<T>,
    ops: &FusionOperators,
    penalty: Penalty,
    eta: f64,
    r: &ReducedImage<T>,
) -> Result<f64, FusionError> {
    let p = Problem::new(spectra, stack, model, ops)?;
    check_shape(&p, r)?;
    Ok(objective(&p, penalty, eta, &to_row_major(r.coefficients())))
}

fn check_shape<T: Real>(p: &Problem<T>, r: &ReducedImage<T>) -> Result<(), FusionError> {
    let c = r.coefficients();
    if c.nrows() != p.n || c.ncols() != p.k {
        return Err(FusionError::Dimension(format!(
            "coefficients are {}x{}, expected {}x{}",
            c.nrows(),
            c.ncols(),
            p.n,
            p.k
        )));
    }
    Ok(())
}

struct Factors<T: Real> {
    sampled: DMatrix<T>,
    unsampled: DMatrix<T>,
}

fn factor<T: Real>(p: &Problem<T>, rho: T) -> Result<Factors<T>, FusionError> {
    let k = p.k;
    let eye = DMatrix::<T>::identity(k, k);
    let a_u = p.ggt() * p.wm + &eye * rho;
    let a_s = &a_u + &eye * p.wh;
    Ok(Factors {
        sampled: spd_inverse(a_s).ok_or(FusionError::SingularSystem)?,
        unsampled: spd_inverse(a_u).ok_or(FusionError::SingularSystem)?,
    })
}

/// Solves the weighted LASSO starting from `init`.
pub fn admm_solve<T: Real>(
    spectra: &SpectrumSet<T>,
    stack: &BandStack<T>,
    model: &SubspaceModel<T>,
    ops: &FusionOperators,
    config: &SolverConfig,
    init: &ReducedImage<T>,
) -> Result<AdmmOutcome<T>, FusionError> {
    config.validate()?;
    let p = Problem::new(spectra, stack, model, ops)?;
    check_shape(&p, init)?;
    let (k, n) = (p.k, p.n);
    let eta = config.resolved_eta(spectra);
    // the solved objective is σ_ref² times the stated one
    let eta_s = T::lit(eta * p.var_ref);

    // linear terms bᵢ = w_M G mᵢ (+ w_H Q hᵢ when sampled)
    let mut b = vec![T::zero(); n * k];
    b.par_chunks_mut(k).enumerate().for_each(|(i, out)| {
        let mut bi = p.g_times(p.m_row(i)) * p.wm;
        if let Some(s) = p.spectrum_of[i] {
            bi += p.q_times(p.h_row(s)) * p.wh;
        }
        out.copy_from_slice(bi.as_slice());
    });

    let mut rho = T::lit(config.rho);
    let mut fac = factor(&p, rho)?;
    let mut v = to_row_major(init.coefficients());
    let mut r = v.clone();
    let mut u = vec![T::zero(); n * k];
    let mut v_prev = v.clone();
    let initial_objective = objective(&p, config.penalty, eta, &v);
    let mut log = Vec::new();
    let mut converged = false;
    let sqrt_nk = ((n * k) as f64).sqrt();

    for it in 1..=config.max_iterations {
        // R-update
        r.par_chunks_mut(k).enumerate().for_each_init(
            || vec![T::zero(); k],
            |rhs, (i, ri)| {
                let inv = if p.spectrum_of[i].is_some() { &fac.sampled } else { &fac.unsampled };
                for a in 0..k {
                    rhs[a] = b[i * k + a] + rho * (v[i * k + a] - u[i * k + a]);
                }
                for a in 0..k {
                    ri[a] = (0..k).fold(T::zero(), |s, c| s + inv[(a, c)] * rhs[c]);
                }
            },
        );
        // V-update
        v_prev.copy_from_slice(&v);
        v.par_iter_mut().zip(r.par_iter().zip(u.par_iter())).for_each(|(vi, (ri, ui))| *vi = *ri + *ui);
        prox(config.penalty, &mut v, k, eta_s / rho);
        // dual update
        u.par_iter_mut().zip(r.par_iter().zip(v.par_iter())).for_each(|(ui, (ri, vi))| *ui += *ri - *vi);

        let primal = sq_diff(&r, &v).sqrt();
        let dual = rho.as_f64() * sq_diff(&v, &v_prev).sqrt();
        let obj = objective(&p, config.penalty, eta, &v);
        log.push(IterationLog {
            iteration: it,
            objective: obj,
            primal_residual: primal,
            dual_residual: dual,
            rho: rho.as_f64(),
        });
        if !obj.is_finite() || !primal.is_finite() {
            return Err(FusionError::Diverged { iteration: it, trace: log });
        }

        let eps_pri =
            sqrt_nk * config.primal_tolerance + config.primal_tolerance * sq_norm(&r).sqrt().max(sq_norm(&v).sqrt());
        let eps_dual = sqrt_nk * config.dual_tolerance + config.dual_tolerance * rho.as_f64() * sq_norm(&u).sqrt();
        if primal <= eps_pri && dual <= eps_dual {
            converged = true;
            break;
        }
        if config.adapt_rho {
            let factor_change = if primal > 10.0 * dual {
                Some(T::lit(2.0))
            } else if dual > 10.0 * primal {
                Some(T::lit(0.5))
            } else {
                None
            };
            if let Some(f) = factor_change {
                rho *= f;
                u.par_iter_mut().for_each(|x| *x /= f);
                fac = factor(&p, rho)?;
            }
        }
    }

    Ok(AdmmOutcome { solution: ReducedImage::new(from_row_major(n, k, &v)), log, converged, eta, initial_objective })
}
