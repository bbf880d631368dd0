//! Reconstruction of the full cube from point spectra `H` and band images
//! `M`: PCA subspace of `H`, MAP initialization of the coefficients `R`,
//! weighted-LASSO refinement by ADMM, and expansion `S = RQ + mean`.
//!
//! Noise is modelled as white with scalar variances `σ_H²`, `σ_M²`.

mod admm;
mod map;
mod operators;
mod problem;
mod subspace;

pub use admm::{
    admm_solve, fusion_objective, soft_threshold, write_convergence_csv, AdmmOutcome, IterationLog, Penalty,
    SolverConfig,
};
pub use map::map_initialize;
pub use operators::{estimate_band_sigma, estimate_spectra_sigma, FusionOperators, NoiseSpec};
pub use subspace::{fit_subspace, SubspaceModel, ZRule};

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypercube::{BandStack, CubeError, HyperCube, SpectrumSet};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("need at least 2 point spectra, have {got}")]
    TooFewSpectra { got: usize },
    #[error("subspace dimension {requested} is outside 1..={max}")]
    InvalidRank { requested: usize, max: usize },
    #[error("variance fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular normal equations; use a positive ridge")]
    SingularSystem,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("ADMM diverged at iteration {iteration}")]
    Diverged { iteration: usize, trace: Vec<IterationLog> },
    #[error(transparent)]
    Cube(#[from] CubeError),
}

/// Subspace coefficients `R`, one row per pixel (`N_S x Z̃`).
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedImage<T: Real> {
    coefficients: DMatrix<T>,
}

impl<T: Real> ReducedImage<T> {
    pub fn new(coefficients: DMatrix<T>) -> Self {
        Self { coefficients }
    }

    pub fn zeros(n_pixels: usize, rank: usize) -> Self {
        Self::new(DMatrix::zeros(n_pixels, rank))
    }

    pub fn coefficients(&self) -> &DMatrix<T> {
        &self.coefficients
    }

    pub fn into_inner(self) -> DMatrix<T> {
        self.coefficients
    }
}

/// `S = RQ + mean`, reshaped to a `width x height` cube.
pub fn reconstruct_cube<T: Real>(
    r: &ReducedImage<T>,
    model: &SubspaceModel<T>,
    width: usize,
    height: usize,
    wavenumbers: &[T],
) -> Result<HyperCube<T>, FusionError> {
    let c = r.coefficients();
    if c.nrows() != width * height || c.ncols() != model.rank() || wavenumbers.len() != model.bands() {
        return Err(FusionError::Dimension(format!(
            "{}x{} coefficients, rank-{} model over {} bands, {}x{} image with {} wavenumbers",
            c.nrows(),
            c.ncols(),
            model.rank(),
            model.bands(),
            width,
            height,
            wavenumbers.len()
        )));
    }
    Ok(HyperCube::from_pixel_matrix(width, height, wavenumbers.to_vec(), &model.expand(c))?)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub solver: SolverConfig,
    pub noise: NoiseSpec,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub subspace: Duration,
    pub initialization: Duration,
    pub solve: Duration,
    pub expansion: Duration,
}

#[derive(Debug, Clone)]
pub struct FusionResult<T: Real> {
    pub cube: HyperCube<T>,
    pub model: SubspaceModel<T>,
    pub operators: FusionOperators,
    pub init: ReducedImage<T>,
    pub outcome: AdmmOutcome<T>,
    pub timings: StageTimings,
}

/// Runs the whole reconstruction.
pub fn fuse<T: Real>(
    spectra: &SpectrumSet<T>,
    stack: &BandStack<T>,
    config: &FusionConfig,
) -> Result<FusionResult<T>, FusionError> {
    config.solver.validate()?;
    let t = Instant::now();
    let mut model = fit_subspace(spectra, config.solver.z_rule)?;
    let ops = FusionOperators::from_measurements(spectra, stack, &config.noise)?;
    let mut cap = model.rank();
    if config.solver.cap_rank_at_bands && !stack.is_empty() {
        cap = cap.min(stack.len());
    }
    if config.solver.drop_noise_components {
        cap = cap.min(model.signal_rank(ops.var_h, spectra.len()).max(1));
    }
    if cap < model.rank() {
        model = model.truncated(cap)?;
    }
    let subspace = t.elapsed();

    let t = Instant::now();
    let init = map_initialize(spectra, stack, &model, &ops, config.solver.ridge)?;
    let initialization = t.elapsed();

    let t = Instant::now();
    let outcome = admm_solve(spectra, stack, &model, &ops, &config.solver, &init)?;
    let solve = t.elapsed();

    let t = Instant::now();
    let cube = reconstruct_cube(&outcome.solution, &model, stack.width(), stack.height(), spectra.wavenumbers())?;
    let expansion = t.elapsed();

    Ok(FusionResult {
        cube,
        model,
        operators: ops,
        init,
        outcome,
        timings: StageTimings { subspace, initialization, solve, expansion },
    })
}
