//! The iterative acquisition loop: alternate superpixel-placed point spectra
//! with one new band image per iteration.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::acquire::Acquirer;
use super::bands::{
    argmax, osp_select_next_band, prune_noise_bands, second_band_scores, spectral_correlation_matrix, OspChoice,
};
use super::slic::{slic, superpixel_centers, SlicParams};
use super::SamplingError;
use crate::hypercube::{nearest_index, BandStack, Pixel, SpectrumSet};
use crate::scalar::Real;

pub const DEFAULT_SCHEDULE: [usize; 6] = [20, 40, 80, 160, 240, 480];

/// Loop configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    /// wavenumber of the first band image (cm⁻¹), snapped to the nearest band
    pub first_wavenumber: f64,
    /// requested superpixel count per iteration
    pub schedule: Vec<usize>,
    /// `None` means one band per schedule entry
    pub max_bands: Option<usize>,
    /// minimum neighbour correlation for a band to survive noise pruning
    pub prune_threshold: f64,
    /// stop when every candidate's relative OSP residual is below this
    pub stop_tolerance: f64,
    pub slic: SlicParams,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            first_wavenumber: 1650.0,
            schedule: DEFAULT_SCHEDULE.to_vec(),
            max_bands: None,
            prune_threshold: 0.5,
            stop_tolerance: 0.05,
            slic: SlicParams::default(),
        }
    }
}

impl LoopConfig {
    pub fn band_limit(&self) -> usize {
        self.max_bands.unwrap_or(self.schedule.len())
    }
}

/// How a band entered the selected set.
#[derive(Debug, Clone, PartialEq)]
pub enum BandSelection<T: Real> {
    /// nearest band to the configured first wavenumber
    First,
    /// uncorrelation-times-magnitude rule against the first band
    Uncorrelated { score: T, retained: Vec<usize>, n_spectra: usize },
    /// orthogonal subspace projection against all selected bands
    Osp { choice: OspChoice<T>, selected_before: Vec<usize>, retained: Vec<usize>, n_spectra: usize },
}

/// One row of the audit trail.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T: Real> {
    /// 1-based
    pub iteration: usize,
    /// band acquired for this iteration (the `iteration`-th selected band)
    pub band: usize,
    pub wavenumber: T,
    pub selection: BandSelection<T>,
    pub requested_spectra: usize,
    /// superpixels actually produced
    pub superpixels: usize,
    pub new_positions: Vec<Pixel>,
    /// cumulative spectra after this iteration
    pub realized_spectra: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopReason {
    ScheduleExhausted,
    MaxBands,
    /// every remaining candidate lies (nearly) in the span of the selected bands
    Converged {
        max_relative_residual: f64,
    },
}

/// Cumulative outcome of the loop.
#[derive(Debug, Clone)]
pub struct AcquisitionState<T: Real> {
    /// Φ, in selection order
    pub selected_bands: Vec<usize>,
    pub spectra: SpectrumSet<T>,
    pub band_stack: BandStack<T>,
    pub schedule: Vec<usize>,
    /// output of the most recent noise pruning (empty if none ran)
    pub retained_bands: Vec<usize>,
    pub iterations: Vec<IterationRecord<T>>,
    pub stop_reason: StopReason,
}

impl<T: Real> AcquisitionState<T> {
    /// Measurements available after `iteration` (1-based): its bands and spectra.
    pub fn measurements_at(&self, iteration: usize) -> Result<(SpectrumSet<T>, BandStack<T>), SamplingError> {
        let rec = self.iterations.get(iteration.wrapping_sub(1)).ok_or(SamplingError::NoSuchIteration(iteration))?;
        Ok((self.spectra.prefix(rec.realized_spectra)?, self.band_stack.prefix(iteration)))
    }

    /// Number of cube entries acquired (band pixels plus spectrum samples).
    pub fn acquired_entries(&self) -> usize {
        self.band_stack.len() * self.band_stack.width() * self.band_stack.height()
            + self.spectra.len() * self.spectra.bands()
    }

    /// Writes `iteration,selected_wavenumber,requested_spectra,realized_spectra`.
    pub fn write_audit_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "selected_wavenumber", "requested_spectra", "realized_spectra"])?;
        for r in &self.iterations {
            w.write_record([
                r.iteration.to_string(),
                format!("{}", r.wavenumber.as_f64()),
                r.requested_spectra.to_string(),
                r.realized_spectra.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the adaptive acquisition loop against `acquirer`.
///
/// Each iteration runs SLIC on all acquired band images, takes spectra at the
/// new superpixel centers, then chooses and acquires the next band: the
/// uncorrelated-and-strong rule for the second band, orthogonal subspace
/// projection afterwards.
pub fn adaptive_sampling_loop<T: Real, A: Acquirer<T>>(
    acquirer: &mut A,
    config: &LoopConfig,
) -> Result<AcquisitionState<T>, SamplingError> {
    if config.schedule.is_empty() {
        return Err(SamplingError::EmptySchedule);
    }
    if !(0.0..=1.0).contains(&config.prune_threshold) {
        return Err(SamplingError::InvalidThreshold(config.prune_threshold));
    }
    let band_limit = config.band_limit().max(1);
    let (width, height) = acquirer.dims();
    let wavenumbers = acquirer.wavenumbers().to_vec();

    let first = nearest_index(&wavenumbers, T::lit(config.first_wavenumber));
    let mut stack = BandStack::empty(width, height);
    stack.push(first, acquirer.read_band(first)?)?;
    let mut selected = vec![first];
    let mut selection = BandSelection::First;
    let mut spectra: Option<SpectrumSet<T>> = None;
    let mut iterations = Vec::new();
    let mut retained_bands = Vec::new();
    let mut stop_reason = StopReason::ScheduleExhausted;

    for (i, &k) in config.schedule.iter().enumerate() {
        let map = slic(&stack, k.min(width * height), &config.slic)?;
        let existing = spectra.as_ref().map(|s| s.positions().to_vec()).unwrap_or_default();
        let fresh = superpixel_centers(&map, &existing);
        if !fresh.is_empty() {
            let taken = acquirer.read_spectra(&fresh)?;
            match spectra.as_mut() {
                Some(s) => s.extend(&taken)?,
                None => spectra = Some(taken),
            }
        }
        let current = spectra.as_ref().expect("first SLIC yields at least one center");
        let band = *selected.last().expect("non-empty");
        iterations.push(IterationRecord {
            iteration: i + 1,
            band,
            wavenumber: wavenumbers[band],
            selection: selection.clone(),
            requested_spectra: k,
            superpixels: map.k_actual,
            new_positions: fresh,
            realized_spectra: current.len(),
        });

        if selected.len() >= band_limit {
            stop_reason = StopReason::MaxBands;
            break;
        }
        if i + 1 == config.schedule.len() {
            break;
        }

        let corr = spectral_correlation_matrix(current)?;
        retained_bands = prune_noise_bands(&corr.matrix, config.prune_threshold)?;
        if retained_bands.is_empty() {
            return Err(SamplingError::EmptyRetained);
        }
        let next = if selected.len() == 1 {
            let scores = second_band_scores(current, first, &retained_bands)?;
            let (b, score) = argmax(&scores).ok_or(SamplingError::NoCandidateBands)?;
            selection =
                BandSelection::Uncorrelated { score, retained: retained_bands.clone(), n_spectra: current.len() };
            b
        } else {
            let choice = match osp_select_next_band(current, &selected, &retained_bands) {
                Ok(c) => c,
                Err(SamplingError::SpanExhausted) => {
                    stop_reason = StopReason::Converged { max_relative_residual: 0.0 };
                    break;
                }
                Err(e) => return Err(e),
            };
            let max_rel = choice.max_relative_residual.as_f64();
            if max_rel < config.stop_tolerance {
                stop_reason = StopReason::Converged { max_relative_residual: max_rel };
                break;
            }
            let b = choice.band;
            selection = BandSelection::Osp {
                choice,
                selected_before: selected.clone(),
                retained: retained_bands.clone(),
                n_spectra: current.len(),
            };
            b
        };
        stack.push(next, acquirer.read_band(next)?)?;
        selected.push(next);
    }

    Ok(AcquisitionState {
        selected_bands: selected,
        spectra: spectra.expect("at least one iteration ran"),
        band_stack: stack,
        schedule: config.schedule.clone(),
        retained_bands,
        iterations,
        stop_reason,
    })
}
