use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use hsi_acs::metrics::read_report_csv;
use hsi_acs_cli::files::{self, read_measurements};
use hsi_acs_cli::{cmd_reconstruct, cmd_simulate, RunConfig};
use tempfile::TempDir;

fn hsi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsi-acs")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = hsi(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

fn audit_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["iteration", "selected_wavenumber", "requested_spectra", "realized_spectra"]
    );
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn phantom_is_deterministic_and_fast() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let t = Instant::now();
    let out = ok(&["phantom", "--seed", "7", "--out", s(a.path())]);
    assert!(t.elapsed() < Duration::from_secs(5), "took {:?}", t.elapsed());
    assert!(String::from_utf8_lossy(&out.stdout).contains("64x64x60"));
    ok(&["phantom", "--seed", "7", "--out", s(b.path())]);
    for f in ["ground_truth.hdr", "ground_truth.img", "labels.png", "labels.classes.txt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let c = TempDir::new().unwrap();
    ok(&["phantom", "--seed", "8", "--out", s(c.path())]);
    assert_ne!(
        fs::read(a.path().join("ground_truth.img")).unwrap(),
        fs::read(c.path().join("ground_truth.img")).unwrap()
    );
}

#[test]
fn single_class_phantom_warns() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), r#"{"phantom": {"n_classes": 1, "width": 16, "height": 16, "n_bands": 20}}"#);
    let out = ok(&["phantom", "--config", &cfg, "--out", s(dir.path())]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("SVM accuracy metric is unavailable"));
    let cube = files::read_cube(&dir.path().join("ground_truth.hdr")).unwrap();
    assert_eq!((cube.width(), cube.height(), cube.bands()), (16, 16, 20));
}

#[test]
fn one_band_limit_gives_one_audit_row() {
    let dir = TempDir::new().unwrap();
    ok(&["simulate", "--bands", "1", "--out", s(dir.path())]);
    assert_eq!(audit_rows(&dir.path().join("audit.csv")).len(), 1);
}

#[test]
fn default_simulation_audit() {
    let dir = TempDir::new().unwrap();
    ok(&["simulate", "--out", s(dir.path())]);
    let rows = audit_rows(&dir.path().join("audit.csv"));
    assert_eq!(rows.len(), 6);
    let requested: Vec<usize> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(requested, [20, 40, 80, 160, 240, 480]);
    let realized: Vec<usize> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(realized.windows(2).all(|w| w[0] <= w[1]), "{realized:?}");
    // 60 bands over 900-1800: 1647.5 is the grid point nearest 1650
    let first: f64 = rows[0][1].parse().unwrap();
    assert!((first - 1647.46).abs() < 0.01, "{first}");

    let (spectra, stack) = read_measurements(dir.path()).unwrap();
    assert_eq!(spectra.len(), *realized.last().unwrap());
    assert_eq!(stack.len(), 6);
    assert!(dir.path().join("bands/band_01_1647.png").exists());
    assert!(dir.path().join("bands/band_01_1647.scale.txt").exists());

    // deterministic under a fixed seed
    let again = TempDir::new().unwrap();
    ok(&["simulate", "--out", s(again.path())]);
    for f in ["audit.csv", "spectra.csv", "bands.img", "band_indices.csv"] {
        assert_eq!(fs::read(dir.path().join(f)).unwrap(), fs::read(again.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn reconstruct_five_bands_378_spectra() {
    let src = TempDir::new().unwrap();
    let config = RunConfig { out: src.path().to_path_buf(), ..RunConfig::default() };
    let state = cmd_simulate(&config).unwrap();
    let spectra = state.spectra.prefix(378).unwrap();
    let stack = state.band_stack.prefix(5);
    let dir = TempDir::new().unwrap();
    let axis = spectra.wavenumbers().to_vec();
    files::write_spectra(&spectra, &dir.path().join("spectra.csv")).unwrap();
    files::write_band_stack(&stack, &axis, dir.path()).unwrap();

    let out = ok(&["reconstruct", "--out", s(dir.path())]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("converged"));
    let mut r = csv::Reader::from_path(dir.path().join("convergence.csv")).unwrap();
    let last = r.records().last().unwrap().unwrap();
    let (primal, dual): (f64, f64) = (last[2].parse().unwrap(), last[3].parse().unwrap());
    assert!(primal.is_finite() && dual.is_finite());
    let rec = files::read_cube(&dir.path().join("reconstruction.hdr")).unwrap();
    assert_eq!((rec.width(), rec.height(), rec.bands()), (64, 64, 60));

    let evaluated = ok(&["evaluate", "--out", s(dir.path()), "--no-svm"]);
    let rows = read_report_csv(dir.path().join("report.csv")).unwrap();
    assert_eq!(rows.len(), 1, "{}", String::from_utf8_lossy(&evaluated.stdout));
    assert_eq!(rows[0][0], "5");
    assert_eq!(rows[0][1], "378");
    let psnr: f64 = rows[0][3].parse().unwrap();
    assert!(psnr > 35.0, "PSNR {psnr}");
}

#[test]
fn full_sampling_reconstruction_is_pca_truncation() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), r#"{"phantom": {"width": 16, "height": 16, "n_bands": 24}, "eta": 0.0}"#);
    let config = RunConfig::load(Some(Path::new(&cfg)), &Default::default()).unwrap();
    let config = RunConfig { out: dir.path().to_path_buf(), ..config };

    // hand-assembled full sampling: every spectrum and every band image
    let truth = hsi_acs_cli::commands::ground_truth(&config).unwrap().cube;
    let all: Vec<_> = (0..truth.n_pixels()).map(|i| hsi_acs::Pixel::from_index(i, truth.width())).collect();
    let spectra = truth.extract_spectra(&all).unwrap();
    let images = (0..truth.bands()).map(|b| truth.extract_band(b).unwrap()).collect();
    let stack = hsi_acs::BandStack::new((0..truth.bands()).collect(), images).unwrap();
    files::write_spectra(&spectra, &dir.path().join("spectra.csv")).unwrap();
    files::write_band_stack(&stack, truth.wavenumbers(), dir.path()).unwrap();

    let result = cmd_reconstruct(&config).unwrap();
    let k = result.model.rank();
    let explained = result.model.explained_variance().unwrap();
    let mean = result.model.mean();
    let (mut resid, mut total) = (0.0, 0.0);
    for b in 0..truth.bands() {
        for p in 0..truth.n_pixels() {
            let (x, y) = (p % truth.width(), p / truth.width());
            let t = truth.get(x, y, b);
            resid += (t - result.cube.get(x, y, b)).powi(2);
            total += (t - mean[b]).powi(2);
        }
    }
    // band images are stored as f32; their rounding enters only quadratically
    assert!(k >= 3, "k {k}");
    assert!(resid / total <= (1.0 - explained) + 1e-9, "k {k}: {} vs {}", resid / total, 1.0 - explained);
}

#[test]
fn corrupted_band_header_names_the_file() {
    let dir = TempDir::new().unwrap();
    ok(&["simulate", "--bands", "2", "--out", s(dir.path())]);
    let hdr = dir.path().join("bands.hdr");
    let text = fs::read_to_string(&hdr).unwrap();
    fs::write(&hdr, text.replace("samples = 64", "samples = 63")).unwrap();
    let out = hsi(&["reconstruct", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bands.hdr"), "{}", String::from_utf8_lossy(&out.stderr));

    // a band count that disagrees with the index table
    fs::write(&hdr, text).unwrap();
    let idx = dir.path().join("band_indices.csv");
    let table = fs::read_to_string(&idx).unwrap();
    let first_two: Vec<&str> = table.lines().take(2).collect();
    fs::write(&idx, first_two.join("\n") + "\n").unwrap();
    let out = hsi(&["reconstruct", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bands.hdr"));
}

#[test]
fn evaluate_reference_against_itself() {
    let dir = TempDir::new().unwrap();
    ok(&["phantom", "--out", s(dir.path())]);
    let truth = dir.path().join("ground_truth.hdr");
    let cfg = write_config(
        dir.path(),
        &format!(r#"{{"reference": {:?}, "reconstruction": {:?}, "iteration": 1}}"#, truth, truth),
    );
    ok(&["evaluate", "--config", &cfg, "--out", s(dir.path())]);
    let text = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(text.lines().nth(1), Some("iter,n_point_spectra,selected_wavenumbers,PSNR,RMSE,SAM,ERGAS,accuracy"));
    let rows = read_report_csv(dir.path().join("report.csv")).unwrap();
    let r = &rows[0];
    assert_eq!(r[3].parse::<f64>().unwrap(), 999.0);
    assert_eq!(r[4].parse::<f64>().unwrap(), 0.0);
    assert_eq!(r[5].parse::<f64>().unwrap(), 0.0);
    assert_eq!(r[6].parse::<f64>().unwrap(), 0.0);
    let acc: f64 = r[7].parse().unwrap();
    assert!((0.95..=1.0).contains(&acc), "self-consistency accuracy {acc}");

    // mismatched shapes
    let other = TempDir::new().unwrap();
    let cfg2 = write_config(other.path(), r#"{"phantom": {"width": 32}}"#);
    ok(&["phantom", "--config", &cfg2, "--out", s(other.path())]);
    let bad = write_config(
        dir.path(),
        &format!(r#"{{"reference": {:?}, "reconstruction": {:?}}}"#, truth, other.path().join("ground_truth.hdr")),
    );
    let out = hsi(&["evaluate", "--config", &bad, "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_emits_six_rows_with_falling_rmse() {
    let dir = TempDir::new().unwrap();
    ok(&["sweep", "--out", s(dir.path())]);
    let text = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(text.starts_with("# PSNR dB"));
    let rows = read_report_csv(dir.path().join("report.csv")).unwrap();
    assert_eq!(rows.len(), 6);
    let iters: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(iters, ["1", "2", "3", "4", "5", "6"]);
    let rmse: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(rmse.windows(2).all(|w| w[1] <= w[0]), "{rmse:?}");
    let n_bands: Vec<usize> = rows.iter().map(|r| r[2].split(' ').count()).collect();
    assert_eq!(n_bands, [1, 2, 3, 4, 5, 6]);
    assert!(rows.iter().all(|r| r[7].parse::<f64>().is_ok()));

    // rerun: identical report
    let again = TempDir::new().unwrap();
    ok(&["sweep", "--out", s(again.path())]);
    assert_eq!(text, fs::read_to_string(again.path().join("report.csv")).unwrap());
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), r#"{"no_such_key": 1}"#);
    assert_eq!(hsi(&["phantom", "--config", &cfg, "--out", s(dir.path())]).status.code(), Some(2));
    assert_eq!(hsi(&["sweep", "--penalty", "l2"]).status.code(), Some(2));
    assert_eq!(hsi(&["reconstruct", "--out", s(&dir.path().join("empty"))]).status.code(), Some(2));

    // rank above the band count with no ridge: unsampled pixels are singular
    ok(&["simulate", "--bands", "1", "--out", s(dir.path())]);
    let cfg = write_config(
        dir.path(),
        r#"{"ridge": 0.0, "rank": 3, "cap_rank_at_bands": false, "drop_noise_components": false}"#,
    );
    let out = hsi(&["reconstruct", "--config", &cfg, "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
