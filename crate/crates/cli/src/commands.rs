//! The subcommands. Each reads a resolved [`RunConfig`], writes its files
//! under `out`, prints a short summary and returns what it computed.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use hsi_acs::fusion::fuse;
use hsi_acs::metrics::{
    append_report_csv, classification_accuracy, classify, image_quality, train_svm, QualityReport, SvmModel,
};
use hsi_acs::phantom::Phantom;
use hsi_acs::raster::{load_label_map, save_band_png_scaled, save_label_map, side_by_side};
use hsi_acs::sampling::{adaptive_sampling_loop, CubeAcquirer, StopReason};
use hsi_acs::{generate_phantom, Acquisition, Bands, Cube, LabelMap, Reconstruction, Spectra};

use crate::config::{RunConfig, Source};
use crate::files::{self, *};
use crate::CliError;

/// Ground-truth cube and its labels, if any.
pub struct GroundTruth {
    pub cube: Cube,
    pub labels: Option<LabelMap>,
}

pub fn ground_truth(config: &RunConfig) -> Result<GroundTruth, CliError> {
    match config.source() {
        Source::Phantom(spec) => {
            let Phantom { cube, labels, .. } =
                generate_phantom(&spec).map_err(|e| CliError::Config(format!("phantom: {e}")))?;
            Ok(GroundTruth { cube, labels: Some(labels) })
        }
        Source::Cube { path, labels } => {
            let cube = files::read_cube(&path)?;
            let labels = match labels {
                Some(p) => {
                    let map = load_label_map(&p).map_err(|e| CliError::Config(e.to_string()))?;
                    if map.width() != cube.width() || map.height() != cube.height() {
                        return Err(CliError::Config(format!(
                            "{}: labels are {}x{}, cube {} is {}x{}",
                            p.display(),
                            map.width(),
                            map.height(),
                            path.display(),
                            cube.width(),
                            cube.height()
                        )));
                    }
                    Some(map)
                }
                None => None,
            };
            Ok(GroundTruth { cube, labels })
        }
    }
}

fn out_dir(config: &RunConfig) -> Result<&Path, CliError> {
    let out = config.out.as_path();
    fs::create_dir_all(out).map_err(|e| CliError::Config(format!("{}: {e}", out.display())))?;
    Ok(out)
}

fn io_fail(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("{}: {e}", path.display()))
}

fn describe(stop: &StopReason) -> String {
    match stop {
        StopReason::ScheduleExhausted => "schedule exhausted".into(),
        StopReason::MaxBands => "band limit reached".into(),
        StopReason::Converged { max_relative_residual } => {
            format!("remaining bands lie in the selected span (max relative residual {max_relative_residual:.3})")
        }
    }
}

pub fn cmd_phantom(config: &RunConfig) -> Result<GroundTruth, CliError> {
    let Source::Phantom(spec) = config.source() else {
        return Err(CliError::Config("`phantom` needs a phantom spec, not an `input` cube".into()));
    };
    let out = out_dir(config)?;
    let truth = ground_truth(config)?;
    let labels = truth.labels.as_ref().expect("phantoms are labelled");
    let header = files::write_cube(&truth.cube, &out.join(TRUTH_FILE))?;
    save_label_map(labels, out.join(LABELS_FILE)).map_err(|e| CliError::Config(e.to_string()))?;

    let c = &truth.cube;
    println!(
        "phantom {}x{}x{} ({}-{} cm-1), seed {} -> {}",
        c.width(),
        c.height(),
        c.bands(),
        spec.wavenumber_start,
        spec.wavenumber_end,
        spec.seed,
        header.display()
    );
    for (name, count) in labels.class_names().iter().zip(labels.class_counts()) {
        println!("  {name}: {count} pixels");
    }
    if labels.n_classes() < 2 {
        eprintln!("warning: single-class phantom; the SVM accuracy metric is unavailable");
    }
    Ok(truth)
}

fn acquire(config: &RunConfig, truth: &Cube) -> Result<Acquisition, CliError> {
    let mut acq = CubeAcquirer::with_noise(truth, config.spectra_noise, config.band_noise, config.effective_seed());
    Ok(adaptive_sampling_loop(&mut acq, &config.sampling())?)
}

fn write_measurements(spectra: &Spectra, stack: &Bands, axis: &[f64], dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_fail(dir))?;
    files::write_spectra(spectra, &dir.join(SPECTRA_FILE))?;
    files::write_band_stack(stack, axis, dir)
}

fn write_audit(state: &Acquisition, out: &Path) -> Result<(), CliError> {
    let path = out.join(AUDIT_FILE);
    let file = File::create(&path).map_err(io_fail(&path))?;
    state.write_audit_csv(BufWriter::new(file)).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn print_acquisition(state: &Acquisition, truth: &Cube) {
    let total = truth.n_pixels() * truth.bands();
    for r in &state.iterations {
        println!(
            "  iter {}: band {} ({:.1} cm-1), {} superpixels requested, {} spectra so far",
            r.iteration, r.band, r.wavenumber, r.requested_spectra, r.realized_spectra
        );
    }
    println!(
        "acquired {} bands + {} spectra = {:.2}% of cube entries; stopped: {}",
        state.band_stack.len(),
        state.spectra.len(),
        100.0 * state.acquired_entries() as f64 / total as f64,
        describe(&state.stop_reason)
    );
}

pub fn cmd_simulate(config: &RunConfig) -> Result<Acquisition, CliError> {
    let out = out_dir(config)?.to_path_buf();
    let truth = ground_truth(config)?;
    let state = acquire(config, &truth.cube)?;
    write_measurements(&state.spectra, &state.band_stack, truth.cube.wavenumbers(), &config.measurements_dir())?;
    write_audit(&state, &out)?;
    println!("simulated acquisition -> {}", config.measurements_dir().display());
    print_acquisition(&state, &truth.cube);
    Ok(state)
}

pub fn cmd_reconstruct(config: &RunConfig) -> Result<Reconstruction, CliError> {
    let out = out_dir(config)?.to_path_buf();
    let (spectra, stack) = files::read_measurements(&config.measurements_dir())?;
    let result = fuse(&spectra, &stack, &config.fusion())?;
    let header = files::write_cube(&result.cube, &config.reconstruction_path())?;
    let conv = out.join(CONVERGENCE_FILE);
    let file = File::create(&conv).map_err(io_fail(&conv))?;
    result
        .outcome
        .write_convergence_csv(BufWriter::new(file))
        .map_err(|e| CliError::Config(format!("{}: {e}", conv.display())))?;

    let o = &result.outcome;
    println!(
        "reconstructed {} bands from {} spectra + {} band images, subspace dimension {} -> {}",
        result.cube.bands(),
        spectra.len(),
        stack.len(),
        result.model.rank(),
        header.display()
    );
    println!(
        "  {} ADMM iterations, {}; objective {:.6e}, eta {:.3e}",
        o.iterations(),
        if o.converged { "converged" } else { "iteration limit reached" },
        o.final_objective(),
        o.eta
    );
    Ok(result)
}

/// SVM trained on the ground truth, used to score reconstructions.
struct Scorer<'a> {
    model: SvmModel,
    labels: &'a LabelMap,
}

impl<'a> Scorer<'a> {
    fn new(config: &RunConfig, truth: &'a GroundTruth, reference: &Cube) -> Result<Option<Self>, CliError> {
        if !config.svm {
            return Ok(None);
        }
        let Some(labels) = truth.labels.as_ref() else {
            eprintln!("warning: no labels; skipping the SVM accuracy metric");
            return Ok(None);
        };
        if labels.width() != reference.width() || labels.height() != reference.height() {
            return Err(CliError::Config("labels and reference cube differ in size".into()));
        }
        if labels.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
            eprintln!("warning: single-class labels; the SVM accuracy metric is unavailable");
            return Ok(None);
        }
        let trained = train_svm(reference, labels, &config.svm_params())?;
        Ok(Some(Self { model: trained.model, labels }))
    }

    fn accuracy(&self, cube: &Cube) -> Result<f64, CliError> {
        let predicted = classify(&self.model, cube)?;
        Ok(classification_accuracy(&predicted, self.labels)?)
    }
}

fn report(
    config: &RunConfig,
    iteration: usize,
    spectra: usize,
    wavenumbers: Vec<f64>,
    reference: &Cube,
    test: &Cube,
    scorer: Option<&Scorer>,
) -> Result<QualityReport, CliError> {
    let quality = image_quality(reference, test, config.ergas_ratio)?;
    let accuracy = scorer.map(|s| s.accuracy(test)).transpose()?;
    Ok(QualityReport {
        iteration,
        n_point_spectra: spectra,
        selected_wavenumbers: wavenumbers,
        quality,
        accuracy,
        ergas_ratio: config.ergas_ratio,
    })
}

fn print_row(r: &QualityReport) {
    let wn: Vec<String> = r.selected_wavenumbers.iter().map(|w| format!("{w:.0}")).collect();
    println!(
        "  iter {}: {} spectra, bands [{}]: PSNR {:.2} dB, RMSE {:.4e}, SAM {:.3} deg, ERGAS {:.4}{}",
        r.iteration,
        r.n_point_spectra,
        wn.join(" "),
        r.quality.psnr,
        r.quality.rmse,
        r.quality.sam,
        r.quality.ergas,
        r.accuracy.map(|a| format!(", accuracy {a:.4}")).unwrap_or_default()
    );
}

pub fn cmd_evaluate(config: &RunConfig) -> Result<QualityReport, CliError> {
    let out = out_dir(config)?.to_path_buf();
    let truth = ground_truth(config)?;
    let reference = match &config.reference {
        Some(p) => files::read_cube(p)?,
        None => truth.cube.clone(),
    };
    let test_path = config.reconstruction_path();
    let test = files::read_cube(&test_path)?;
    if !reference.same_shape(&test) {
        return Err(CliError::Config(format!(
            "{}: {}x{}x{} does not match the {}x{}x{} reference",
            test_path.display(),
            test.width(),
            test.height(),
            test.bands(),
            reference.width(),
            reference.height(),
            reference.bands()
        )));
    }

    // what was measured, when the measurement directory is at hand
    let dir = config.measurements_dir();
    let spectra_path = dir.join(SPECTRA_FILE);
    let n_spectra = if spectra_path.exists() { files::read_spectra(&spectra_path)?.len() } else { 0 };
    let index_path = dir.join(BAND_INDEX_FILE);
    let bands = if index_path.exists() { files::read_band_indices(&index_path)? } else { Vec::new() };

    let scorer = Scorer::new(config, &truth, &reference)?;
    let iteration = config.iteration.unwrap_or(bands.len().max(1));
    let row = report(
        config,
        iteration,
        n_spectra,
        bands.iter().map(|&(_, w)| w).collect(),
        &reference,
        &test,
        scorer.as_ref(),
    )?;
    let path = out.join(REPORT_FILE);
    append_report_csv(&path, std::slice::from_ref(&row)).map_err(io_fail(&path))?;

    if config.rasters {
        let compare = out.join("compare");
        fs::create_dir_all(&compare).map_err(io_fail(&compare))?;
        let shown: Vec<usize> =
            if bands.is_empty() { (0..reference.bands()).collect() } else { bands.iter().map(|&(b, _)| b).collect() };
        for b in shown {
            let (r, t) = (reference.extract_band(b), test.extract_band(b));
            let (r, t) =
                (r.map_err(|e| CliError::Config(e.to_string()))?, t.map_err(|e| CliError::Config(e.to_string()))?);
            let (lo, hi) = r.range();
            let pair = side_by_side(&r, &t).map_err(|e| CliError::Config(e.to_string()))?;
            let png = compare.join(format!("band_{b:03}_{:.0}.png", reference.wavenumbers()[b]));
            save_band_png_scaled(&pair, &png, (lo, hi)).map_err(|e| CliError::Config(e.to_string()))?;
        }
    }
    println!("evaluated {} against the reference -> {}", test_path.display(), path.display());
    print_row(&row);
    Ok(row)
}

/// Runs the acquisition once, then reconstructs and scores the measurements
/// available after every iteration; writes a fresh `report.csv`.
pub fn cmd_sweep(config: &RunConfig) -> Result<Vec<QualityReport>, CliError> {
    let out = out_dir(config)?.to_path_buf();
    let t = Instant::now();
    let truth = ground_truth(config)?;
    let state = acquire(config, &truth.cube)?;
    write_measurements(&state.spectra, &state.band_stack, truth.cube.wavenumbers(), &config.measurements_dir())?;
    write_audit(&state, &out)?;
    println!(
        "sweep on {}x{}x{} ({:.1?} acquisition)",
        truth.cube.width(),
        truth.cube.height(),
        truth.cube.bands(),
        t.elapsed()
    );
    print_acquisition(&state, &truth.cube);

    let scorer = Scorer::new(config, &truth, &truth.cube)?;
    let axis = truth.cube.wavenumbers();
    let fusion = config.fusion();
    let mut rows = Vec::with_capacity(state.iterations.len());
    for record in &state.iterations {
        let (spectra, stack) = state.measurements_at(record.iteration)?;
        let result = fuse(&spectra, &stack, &fusion)?;
        let row = report(
            config,
            record.iteration,
            spectra.len(),
            stack.band_indices().iter().map(|&b| axis[b]).collect(),
            &truth.cube,
            &result.cube,
            scorer.as_ref(),
        )?;
        print_row(&row);
        rows.push(row);
    }
    let path = out.join(REPORT_FILE);
    if path.exists() {
        fs::remove_file(&path).map_err(io_fail(&path))?;
    }
    append_report_csv(&path, &rows).map_err(io_fail(&path))?;
    println!("report -> {} ({:.1?} total)", path.display(), t.elapsed());
    Ok(rows)
}
