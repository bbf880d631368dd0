//! Adaptive compressive sampling of hyperspectral images and their
//! reconstruction by subspace fusion.
//!
//! ```
//! use hsi_acs::sampling::{adaptive_sampling_loop, CubeAcquirer, LoopConfig};
//! use hsi_acs::{fuse, generate_phantom, FusionConfig, PhantomSpec};
//!
//! let truth: hsi_acs::Scene = generate_phantom(&PhantomSpec::default())?;
//! let mut acquirer = CubeAcquirer::new(&truth.cube);
//! let loop_config = LoopConfig { max_bands: Some(5), ..LoopConfig::default() };
//! let state = adaptive_sampling_loop(&mut acquirer, &loop_config)?;
//! let result = fuse(&state.spectra, &state.band_stack, &FusionConfig::default())?;
//! let psnr = hsi_acs::metrics::psnr(&truth.cube, &result.cube)?;
//! assert!(psnr > 35.0);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

// `!(x > 0.0)` rejects NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod connectivity;
pub mod fusion;
pub mod hypercube;
pub mod metrics;
pub mod phantom;
pub mod raster;
pub mod sampling;
pub mod scalar;

pub use fusion::{fuse, FusionConfig, FusionResult, Penalty, SolverConfig, ZRule};
pub use hypercube::{BandStack, CubeError, HyperCube, Image, Pixel, SpectrumSet};
pub use phantom::{generate_phantom, LabelMap, PhantomSpec};
pub use scalar::Real;

/// `f64` instantiations used throughout the solvers and the command line.
pub type Cube = HyperCube<f64>;
pub type Spectra = SpectrumSet<f64>;
pub type Bands = BandStack<f64>;
pub type Reconstruction = FusionResult<f64>;
pub type Acquisition = sampling::AcquisitionState<f64>;
pub type Scene = phantom::Phantom<f64>;
