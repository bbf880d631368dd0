//! Run configuration: one flat JSON document, with command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use hsi_acs::fusion::{FusionConfig, NoiseSpec, Penalty, SolverConfig, ZRule};
use hsi_acs::metrics::SvmParams;
use hsi_acs::sampling::{LoopConfig, SlicParams, DEFAULT_SCHEDULE};
use hsi_acs::PhantomSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every tunable of a run. Keys are flat; only `phantom` is an object so a
/// phantom can be described next to (but never together with) an `input` cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// ground-truth ENVI header
    pub input: Option<PathBuf>,
    /// label raster for `input` (8-bit PNG with a `.classes.txt` sidecar)
    pub labels: Option<PathBuf>,
    /// synthetic ground truth; the default when `input` is absent
    pub phantom: Option<PhantomSpec>,
    pub out: PathBuf,
    /// overrides the phantom seed; also seeds acquisition noise and SVM sampling
    pub seed: Option<u64>,

    pub first_wavenumber: f64,
    pub schedule: Vec<usize>,
    pub max_bands: Option<usize>,
    pub prune_threshold: f64,
    pub stop_tolerance: f64,
    pub slic_compactness: f64,
    pub slic_sigma: f64,
    pub slic_iterations: usize,
    /// simulated white noise on point spectra
    pub spectra_noise: f64,
    /// simulated white noise on band images
    pub band_noise: f64,

    pub penalty: Penalty,
    pub eta: Option<f64>,
    pub rho: f64,
    pub adapt_rho: bool,
    pub max_iterations: usize,
    pub primal_tolerance: f64,
    pub dual_tolerance: f64,
    pub ridge: f64,
    /// explicit subspace dimension; overrides `variance_fraction`
    pub rank: Option<usize>,
    pub variance_fraction: f64,
    pub cap_rank_at_bands: bool,
    pub drop_noise_components: bool,
    /// known noise levels for the fusion weights; default: the simulated
    /// levels when positive, otherwise estimated
    pub spectra_sigma: Option<f64>,
    pub band_sigma: Option<f64>,

    pub svm: bool,
    pub svm_per_class: Option<usize>,
    pub svm_gamma: Option<f64>,
    pub svm_c: f64,
    pub ergas_ratio: f64,
    /// write reference | reconstruction PNGs for the selected bands
    pub rasters: bool,

    /// directory holding `spectra.csv`, `bands.hdr`, `band_indices.csv`; default `out`
    pub measurements: Option<PathBuf>,
    /// reconstruction to evaluate; default `out/reconstruction.hdr`
    pub reconstruction: Option<PathBuf>,
    /// reference cube for `evaluate`; default the ground truth
    pub reference: Option<PathBuf>,
    /// `iter` value of the report row; default the number of bands
    pub iteration: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sampling = LoopConfig::default();
        let solver = SolverConfig::default();
        let svm = SvmParams::default();
        let fraction = match solver.z_rule {
            ZRule::VarianceFraction(f) => f,
            ZRule::Explicit(_) => 0.999,
        };
        Self {
            input: None,
            labels: None,
            phantom: None,
            out: PathBuf::from("out"),
            seed: None,
            first_wavenumber: sampling.first_wavenumber,
            schedule: DEFAULT_SCHEDULE.to_vec(),
            max_bands: None,
            prune_threshold: sampling.prune_threshold,
            stop_tolerance: sampling.stop_tolerance,
            slic_compactness: sampling.slic.compactness,
            slic_sigma: sampling.slic.smoothing_sigma,
            slic_iterations: sampling.slic.iterations,
            spectra_noise: 0.0,
            band_noise: 0.0,
            penalty: solver.penalty,
            eta: solver.eta,
            rho: solver.rho,
            adapt_rho: solver.adapt_rho,
            max_iterations: solver.max_iterations,
            primal_tolerance: solver.primal_tolerance,
            dual_tolerance: solver.dual_tolerance,
            ridge: solver.ridge,
            rank: None,
            variance_fraction: fraction,
            cap_rank_at_bands: solver.cap_rank_at_bands,
            drop_noise_components: solver.drop_noise_components,
            spectra_sigma: None,
            band_sigma: None,
            svm: true,
            svm_per_class: svm.per_class,
            svm_gamma: svm.gamma,
            svm_c: svm.c,
            ergas_ratio: 1.0,
            rasters: false,
            measurements: None,
            reconstruction: None,
            reference: None,
            iteration: None,
        }
    }
}

/// Command-line values; each `Some` replaces the config-file value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub bands: Option<usize>,
    pub schedule: Option<Vec<usize>>,
    pub penalty: Option<Penalty>,
    pub eta: Option<f64>,
    pub svm: Option<bool>,
}

/// Where the ground truth comes from once the config is resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Cube { path: PathBuf, labels: Option<PathBuf> },
    Phantom(PhantomSpec),
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    /// Reads `path` (or starts from defaults), applies `overrides`, validates.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut config = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                Self::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => Self::default(),
        };
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = Some(seed);
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(bands) = o.bands {
            self.max_bands = Some(bands);
        }
        if let Some(schedule) = &o.schedule {
            self.schedule = schedule.clone();
        }
        if let Some(penalty) = o.penalty {
            self.penalty = penalty;
        }
        if let Some(eta) = o.eta {
            self.eta = Some(eta);
        }
        if let Some(svm) = o.svm {
            self.svm = svm;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.input.is_some() && self.phantom.is_some() {
            return bad("`input` and `phantom` are mutually exclusive".into());
        }
        if self.labels.is_some() && self.input.is_none() {
            return bad("`labels` only applies to an `input` cube".into());
        }
        if self.schedule.is_empty() || self.schedule.contains(&0) {
            return bad("`schedule` needs at least one positive count".into());
        }
        if self.max_bands == Some(0) {
            return bad("`max_bands` must be at least 1".into());
        }
        if !(self.spectra_noise >= 0.0 && self.band_noise >= 0.0) {
            return bad("simulated noise levels must be >= 0".into());
        }
        if !(self.ergas_ratio > 0.0) {
            return bad("`ergas_ratio` must be > 0".into());
        }
        if self.rank == Some(0) {
            return bad("`rank` must be at least 1".into());
        }
        if !(self.variance_fraction > 0.0 && self.variance_fraction <= 1.0) {
            return bad(format!("`variance_fraction` must lie in (0, 1] (got {})", self.variance_fraction));
        }
        self.solver().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Source::Phantom(spec) = self.source() {
            spec.validate().map_err(|e| CliError::Config(format!("phantom: {e}")))?;
        }
        Ok(())
    }

    pub fn source(&self) -> Source {
        match &self.input {
            Some(path) => Source::Cube { path: path.clone(), labels: self.labels.clone() },
            None => {
                let mut spec = self.phantom.clone().unwrap_or_default();
                if let Some(seed) = self.seed {
                    spec.seed = seed;
                }
                Source::Phantom(spec)
            }
        }
    }

    /// Seed for acquisition noise and SVM sampling.
    pub fn effective_seed(&self) -> u64 {
        match self.source() {
            Source::Phantom(spec) => spec.seed,
            Source::Cube { .. } => self.seed.unwrap_or(0),
        }
    }

    pub fn sampling(&self) -> LoopConfig {
        LoopConfig {
            first_wavenumber: self.first_wavenumber,
            schedule: self.schedule.clone(),
            max_bands: self.max_bands,
            prune_threshold: self.prune_threshold,
            stop_tolerance: self.stop_tolerance,
            slic: SlicParams {
                compactness: self.slic_compactness,
                smoothing_sigma: self.slic_sigma,
                iterations: self.slic_iterations,
            },
        }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            penalty: self.penalty,
            eta: self.eta,
            rho: self.rho,
            adapt_rho: self.adapt_rho,
            max_iterations: self.max_iterations,
            primal_tolerance: self.primal_tolerance,
            dual_tolerance: self.dual_tolerance,
            ridge: self.ridge,
            z_rule: match self.rank {
                Some(k) => ZRule::Explicit(k),
                None => ZRule::VarianceFraction(self.variance_fraction),
            },
            cap_rank_at_bands: self.cap_rank_at_bands,
            drop_noise_components: self.drop_noise_components,
        }
    }

    pub fn fusion(&self) -> FusionConfig {
        let known = |explicit: Option<f64>, simulated: f64| explicit.or((simulated > 0.0).then_some(simulated));
        FusionConfig {
            solver: self.solver(),
            noise: NoiseSpec {
                spectra_sigma: known(self.spectra_sigma, self.spectra_noise),
                band_sigma: known(self.band_sigma, self.band_noise),
            },
        }
    }

    pub fn svm_params(&self) -> SvmParams {
        SvmParams {
            per_class: self.svm_per_class,
            gamma: self.svm_gamma,
            c: self.svm_c,
            seed: self.effective_seed(),
            ..SvmParams::default()
        }
    }

    pub fn measurements_dir(&self) -> PathBuf {
        self.measurements.clone().unwrap_or_else(|| self.out.clone())
    }

    pub fn reconstruction_path(&self) -> PathBuf {
        self.reconstruction.clone().unwrap_or_else(|| self.out.join("reconstruction.hdr"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
        assert_eq!(c.sampling(), LoopConfig::default());
        assert_eq!(c.solver(), SolverConfig::default());
        assert_eq!(c.fusion(), FusionConfig::default());
    }

    #[test]
    fn flags_win_over_file() {
        let mut c = RunConfig::from_json(r#"{"seed": 1, "eta": 0.5, "svm": false, "schedule": [5]}"#).unwrap();
        c.apply(&Overrides {
            seed: Some(9),
            eta: Some(0.0),
            svm: Some(true),
            schedule: Some(vec![3, 4]),
            bands: Some(2),
            ..Overrides::default()
        });
        assert_eq!((c.seed, c.eta, c.svm, c.max_bands), (Some(9), Some(0.0), true, Some(2)));
        assert_eq!(c.schedule, vec![3, 4]);
        assert_eq!(c.effective_seed(), 9);
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(RunConfig::from_json(r#"{"no_such_key": 1}"#).is_err());
        let both = RunConfig::from_json(r#"{"input": "a.hdr", "phantom": {}}"#).unwrap();
        assert!(matches!(both.validate(), Err(CliError::Config(_))));
        let bad_rho = RunConfig { rho: 0.0, ..RunConfig::default() };
        assert!(bad_rho.validate().is_err());
        let bad_phantom = RunConfig::from_json(r#"{"phantom": {"n_classes": 0}}"#).unwrap();
        assert!(bad_phantom.validate().is_err());
    }

    #[test]
    fn simulated_noise_feeds_fusion_weights() {
        let c = RunConfig { spectra_noise: 0.02, band_sigma: Some(0.1), ..RunConfig::default() };
        assert_eq!(c.fusion().noise, NoiseSpec { spectra_sigma: Some(0.02), band_sigma: Some(0.1) });
        let explicit = RunConfig { rank: Some(3), ..RunConfig::default() };
        assert_eq!(explicit.solver().z_rule, ZRule::Explicit(3));
    }
}
