//! Adaptive acquisition: where to take point spectra and which band images
//! to acquire next.

mod acquire;
mod adaptive;
mod bands;
mod slic;

pub use acquire::{AcquireError, Acquirer, CubeAcquirer};
pub use adaptive::{
    adaptive_sampling_loop, AcquisitionState, BandSelection, IterationRecord, LoopConfig, StopReason, DEFAULT_SCHEDULE,
};
pub use bands::{
    osp_projector, osp_select_next_band, prune_noise_bands, second_band_scores, select_second_band,
    spectral_correlation_matrix, CorrelationMatrix, OspChoice,
};
pub use slic::{slic, superpixel_centers, SlicParams, SuperpixelMap};

use thiserror::Error;

use crate::hypercube::CubeError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("cannot make {k} superpixels from {n_pixels} pixels")]
    InvalidSuperpixelCount { k: usize, n_pixels: usize },
    #[error("no band images to cluster")]
    NoBandImages,
    #[error("need at least {needed} point spectra, have {got}")]
    TooFewSpectra { needed: usize, got: usize },
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("no candidate bands left to select from")]
    NoCandidateBands,
    #[error("selected band column {column} is linearly dependent on the previous ones")]
    RankDeficient { column: usize },
    #[error("every candidate band lies in the span of the selected bands")]
    SpanExhausted,
    #[error("noise pruning removed every band")]
    EmptyRetained,
    #[error("schedule must contain at least one entry")]
    EmptySchedule,
    #[error("no iteration {0} in the acquisition record")]
    NoSuchIteration(usize),
    #[error(transparent)]
    Acquire(#[from] AcquireError),
    #[error(transparent)]
    Cube(#[from] CubeError),
}
