//! Command bodies. Inputs are validated before the output directory is
//! touched; a failure after outputs exist is recorded in the manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use super::manifest::{Run, RunManifest};
use super::svg::{heatmap, line_panels, Panel, Series};
use super::{Cli, Command, Common, GridSpec};
use crate::dsp::welch::EstimatedCovariance;
use crate::dsp::WelchConfig;
use crate::error::{Error, Result};
use crate::fit::{align_phase, fit_sigma_theta, FitConfig, FitResult};
use crate::grid::FrequencyGrid;
use crate::model::measured_spectra;
use crate::params::SystemParams;
use crate::pipeline::{analyze_file, calibrate_in_band, reference_config, simulate_to_file, AnalysisConfig};
use crate::spectra::SpectralTriple;
use crate::squeezing::{build_map, optimal_spectrum, rotate_covariance, BandReport, OptimalSpectrum};
use crate::synth::SynthConfig;
use crate::trace::TraceReader;

/// Phase-noise variance reported for the experiment, rad²; fit reports
/// compare against it.
pub const REPORTED_SIGMA_SQ: f64 = 0.062;

pub fn run(cli: Cli) -> Result<RunManifest> {
    match cli.command {
        Command::ModelSpectra {
            common,
            grid,
            no_phase_noise,
        } => model_spectra(&common, grid, !no_phase_noise),
        Command::Map {
            common,
            grid,
            phases,
            no_phase_noise,
        } => map(&common, grid, phases, !no_phase_noise),
        Command::Simulate {
            common,
            duration,
            sample_rate,
            beat,
            seed,
            jitter_bandwidth,
            reference_duration,
            no_phase_noise,
        } => {
            let p = load_params(&common.config)?;
            let synth = SynthConfig {
                sample_rate,
                duration,
                seed,
                beat_freq: beat,
                jitter_sigma_sq: if no_phase_noise { 0.0 } else { p.sigma_theta_sq },
                jitter_bandwidth,
                ..SynthConfig::default()
            };
            simulate(&common, &p, &synth, reference_duration)
        }
        Command::Analyze {
            trace,
            reference,
            out,
            beat,
            band,
            segment_length,
        } => {
            let c = AnalysisConfig {
                beat_freq: beat,
                calibration_band: (band.0, band.1),
                welch: WelchConfig {
                    segment_length,
                    ..AnalysisConfig::default().welch
                },
                ..AnalysisConfig::default()
            };
            analyze(&trace, reference.as_deref(), &out, &c)
        }
        Command::FitPhaseNoise {
            data,
            common,
            model,
            band,
            weights,
            align,
            seed,
        } => {
            let c = FitConfig {
                freq_band: (band.0, band.1),
                weight_mode: weights.into(),
                bootstrap_seed: seed,
                ..FitConfig::default()
            };
            fit_phase_noise(&data, &common, model.as_deref(), &c, align)
        }
        Command::Optimal {
            common,
            data,
            grid,
            no_phase_noise,
        } => optimal(&common, data.as_deref(), grid, !no_phase_noise),
    }
}

fn load_params(path: &Option<PathBuf>) -> Result<SystemParams> {
    match path {
        Some(p) => SystemParams::load(p),
        None => Ok(SystemParams::reproduction()),
    }
}

fn params_json(p: &SystemParams) -> serde_json::Value {
    serde_json::to_value(p.to_hz()).expect("flat params serialize")
}

fn make_grid(g: GridSpec, p: &SystemParams) -> Result<FrequencyGrid> {
    let grid = FrequencyGrid::linspace_hz(g.start_hz, g.stop_hz, g.n)?;
    grid.check_poles(p)?;
    Ok(grid)
}

fn grid_json(g: GridSpec) -> serde_json::Value {
    json!({ "start_hz": g.start_hz, "stop_hz": g.stop_hz, "n": g.n })
}

/// Runs `body`, then writes the manifest; a failure after outputs were
/// written is recorded in the manifest before the error is returned.
fn finish(mut run: Run, result: Result<()>) -> Result<RunManifest> {
    match result {
        Ok(()) => run.finish(),
        Err(e) => {
            if run.has_outputs() {
                run.fail(&e.to_string());
                run.finish()?;
            }
            Err(e)
        }
    }
}

fn khz(grid: &FrequencyGrid) -> Vec<f64> {
    grid.hz().iter().map(|f| f / 1e3).collect()
}

/// Panel title, data, optional overlay and guide level.
type Column<'a> = (&'a str, &'a [f64], Option<&'a [f64]>, Option<f64>);

fn spectra_panels<'a>(
    x: &'a [f64],
    s: &'a SpectralTriple,
    overlay: Option<(&'a SpectralTriple, &'a str)>,
) -> Vec<Panel<'a>> {
    let cols: [Column<'a>; 3] = [
        ("S_QQ", &s.s_qq, overlay.map(|o| o.0.s_qq.as_slice()), Some(1.0)),
        ("S_PP", &s.s_pp, overlay.map(|o| o.0.s_pp.as_slice()), Some(1.0)),
        ("S_QP = S_PQ", &s.s_qp, overlay.map(|o| o.0.s_qp.as_slice()), Some(0.0)),
    ];
    cols.into_iter()
        .map(|(title, y, over, guide)| {
            let mut series = vec![Series {
                label: if overlay.is_some() { "data" } else { title },
                x,
                y,
                color: "#1f5fbf",
                dashed: false,
            }];
            if let (Some(o), Some((_, name))) = (over, overlay) {
                series.push(Series {
                    label: name,
                    x,
                    y: o,
                    color: "#c0392b",
                    dashed: false,
                });
            }
            Panel {
                title: title.to_string(),
                series,
                guide,
            }
        })
        .collect()
}

fn model_spectra(common: &Common, g: GridSpec, phase_noise: bool) -> Result<RunManifest> {
    let p = load_params(&common.config)?;
    let grid = make_grid(g, &p)?;
    let config = json!({
        "params": params_json(&p),
        "grid": grid_json(g),
        "phase_noise": phase_noise,
    });
    let mut run = Run::new("model-spectra", &common.out, config.clone())?;
    let result = (|| {
        let s = run.time("evaluate", || measured_spectra(&grid, &p, phase_noise))?;
        run.write_with("spectra.csv", |w| s.write_csv(w))?;
        run.write_json(
            "spectra.json",
            &json!({
                "params": config["params"],
                "grid": config["grid"],
                "phase_noise": phase_noise,
                "eta_eff": p.eta_eff(),
                "sigma_theta_sq": if phase_noise { p.sigma_theta_sq } else { 0.0 },
            }),
        )?;
        let x = khz(&grid);
        let plot = line_panels("Detected output spectra", "frequency (kHz)", &spectra_panels(&x, &s, None));
        run.write_text("spectra.svg", &plot)
    })();
    finish(run, result)
}

fn map(common: &Common, g: GridSpec, phases: usize, phase_noise: bool) -> Result<RunManifest> {
    let p = load_params(&common.config)?;
    let grid = make_grid(g, &p)?;
    if phases < 2 {
        return Err(Error::InvalidParam {
            name: "phases",
            reason: "need at least 2".into(),
        });
    }
    let sigma_sq = if phase_noise { p.sigma_theta_sq } else { 0.0 };
    let config = json!({
        "params": params_json(&p),
        "grid": grid_json(g),
        "phases": phases,
        "phase_noise": phase_noise,
    });
    let mut run = Run::new("map", &common.out, config)?;
    let result = (|| {
        let m = run.time("evaluate", || -> Result<_> {
            build_map(&measured_spectra(&grid, &p, false)?, sigma_sq, phases)
        })?;
        run.write_with("map.csv", |w| m.write_csv(w))?;
        let hz = grid.hz();
        let (i_min, j_min, v_min) = m
            .values
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, v)| (i, j, *v)))
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .expect("non-empty map");
        run.write_json(
            "map.json",
            &json!({
                "sigma_sq": sigma_sq,
                "n_phases": phases,
                "n_freqs": hz.len(),
                "min_value": v_min,
                "min_freq_hz": hz[j_min],
                "min_phase_rad": m.phases[i_min],
            }),
        )?;
        let svg = run.time("render", || {
            heatmap(
                "Quadrature spectrum over detection phase",
                "frequency (kHz)",
                "phase (rad)",
                &khz(&grid),
                &m.phases,
                &m.values,
                1.0,
            )
        });
        run.write_text("map.svg", &svg)
    })();
    finish(run, result)
}

/// Reference length rounded to whole samples.
fn default_reference_duration(synth: &SynthConfig) -> f64 {
    let n = (synth.duration * synth.sample_rate / 4.0).round().max(2.0);
    n / synth.sample_rate
}

fn simulate(
    common: &Common,
    p: &SystemParams,
    synth: &SynthConfig,
    reference_duration: Option<f64>,
) -> Result<RunManifest> {
    synth.validate(p)?;
    let ref_duration = reference_duration.unwrap_or_else(|| default_reference_duration(synth));
    let reference = (ref_duration > 0.0).then(|| reference_config(synth, ref_duration));
    let decoupled = (*p).decoupled();
    if let Some(r) = &reference {
        r.validate(&decoupled)?;
    }
    let config = json!({
        "params": params_json(p),
        "synth": synth,
        "reference": reference,
    });
    let mut run = Run::new("simulate", &common.out, config)?;
    run.seed(synth.seed);
    let result = (|| {
        run.register("record.osqt");
        let path = run.path("record.osqt");
        let n = run.time("record", || simulate_to_file(p, synth, &path))?;
        let mut n_ref = 0;
        if let Some(r) = &reference {
            run.seed(r.seed);
            run.register("reference.osqt");
            let path = run.path("reference.osqt");
            n_ref = run.time("reference", || simulate_to_file(&decoupled, r, &path))?;
        }
        run.write_json(
            "simulate.json",
            &json!({
                "params": params_json(p),
                "synth": synth,
                "reference": reference,
                "record_samples": n,
                "reference_samples": n_ref,
                "format": "OSQT v1: 16-byte header (magic, version, sample rate), little-endian f64 samples",
            }),
        )
    })();
    finish(run, result)
}

fn check_trace(path: &Path) -> Result<f64> {
    let f = std::fs::File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(TraceReader::new(std::io::BufReader::new(f))?.sample_rate())
}

fn analyze(trace: &Path, reference: Option<&Path>, out: &Path, c: &AnalysisConfig) -> Result<RunManifest> {
    let fs = check_trace(trace)?;
    if let Some(r) = reference {
        let fr = check_trace(r)?;
        if fr != fs {
            return Err(Error::Config(format!(
                "reference sample rate {fr} Hz differs from record {fs} Hz"
            )));
        }
    }
    c.welch.validate()?;
    let config = json!({
        "trace": trace.display().to_string(),
        "reference": reference.map(|r| r.display().to_string()),
        "analysis": c,
    });
    let mut run = Run::new("analyze", out, config)?;
    let result = (|| {
        let raw = run.time("record", || analyze_file(trace, c))?;
        let estimate = match reference {
            Some(r) => {
                let ref_est = run.time("reference", || analyze_file(r, c))?;
                calibrate_in_band(&raw, &ref_est, c)?
            }
            None => {
                run.note("no reference record: unity calibration, spectra are not in shot-noise units");
                raw.band(c.calibration_band.0, c.calibration_band.1)?
            }
        };
        run.write_with("covariance.csv", |w| estimate.write_csv(w))?;
        run.write_json(
            "analyze.json",
            &json!({
                "sample_rate": fs,
                "n_segments": estimate.n_segments,
                "n_bins": estimate.len(),
                "calibrated": reference.is_some(),
                "analysis": c,
            }),
        )?;
        let x = khz(estimate.grid());
        let plot = line_panels(
            "Estimated covariance",
            "frequency (kHz)",
            &spectra_panels(&x, &estimate.spectra, None),
        );
        run.write_text("covariance.svg", &plot)
    })();
    finish(run, result)
}

fn read_covariance(path: &Path) -> Result<EstimatedCovariance> {
    let f = std::fs::File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    EstimatedCovariance::read_csv(std::io::BufReader::new(f))
}

#[derive(Serialize)]
struct FitReport<'a> {
    fit: &'a FitResult,
    freq_band_hz: (f64, f64),
    weight_mode: crate::fit::WeightMode,
    alignment_rad: Option<f64>,
    configured_sigma_sq: f64,
    reported_sigma_sq: f64,
    relative_to_reported: f64,
}

fn fit_phase_noise(
    data_path: &Path,
    common: &Common,
    model_path: Option<&Path>,
    c: &FitConfig,
    align: bool,
) -> Result<RunManifest> {
    let p = load_params(&common.config)?;
    c.validate()?;
    let data = read_covariance(data_path)?;
    let model = match model_path {
        Some(m) => {
            let f = std::fs::File::open(m).map_err(|e| Error::Config(format!("{}: {e}", m.display())))?;
            let model = SpectralTriple::read_csv(std::io::BufReader::new(f))?;
            if !model.grid.matches(data.grid(), 1e-9) {
                return Err(Error::Grid(format!(
                    "model grid ({} bins) does not match data grid ({} bins)",
                    model.len(),
                    data.len()
                )));
            }
            Some(model)
        }
        None => None,
    };
    let keep = data.grid().pole_free_mask(&p);
    let data = data.select(&keep)?;
    let model = match model {
        Some(m) => m.select(&keep)?,
        None => measured_spectra(data.grid(), &p, false)?,
    };
    let config = json!({
        "params": params_json(&p),
        "data": data_path.display().to_string(),
        "model": model_path.map(|m| m.display().to_string()),
        "fit": c,
        "align": align,
    });
    let mut run = Run::new("fit-phase-noise", &common.out, config)?;
    if c.weight_mode == crate::fit::WeightMode::Uniform {
        run.seed(c.bootstrap_seed);
    }
    let result = (|| {
        let alignment = if align { Some(align_phase(&data, &model, c.freq_band)?) } else { None };
        let model = match alignment {
            Some(theta) => rotate_covariance(&model, theta),
            None => model,
        };
        let fit = run.time("fit", || fit_sigma_theta(&data, &model, c))?;
        if fit.at_bound {
            run.note(format!("σ² minimum on the search bound at {:.4e} rad²", fit.sigma_sq_hat));
        }
        run.write_json(
            "fit.json",
            &FitReport {
                fit: &fit,
                freq_band_hz: c.freq_band,
                weight_mode: c.weight_mode,
                alignment_rad: alignment,
                configured_sigma_sq: p.sigma_theta_sq,
                reported_sigma_sq: REPORTED_SIGMA_SQ,
                relative_to_reported: fit.sigma_sq_hat / REPORTED_SIGMA_SQ - 1.0,
            },
        )?;
        let band = data.band(c.freq_band.0, c.freq_band.1)?;
        let fitted = crate::squeezing::dephase_covariance(
            &model.select(&data.grid().band_mask(c.freq_band.0, c.freq_band.1))?,
            fit.sigma_sq_hat,
        );
        let x = khz(band.grid());
        let plot = line_panels(
            &format!("Fit: σ² = {:.4} rad²", fit.sigma_sq_hat),
            "frequency (kHz)",
            &spectra_panels(&x, &band.spectra, Some((&fitted, "model"))),
        );
        run.write_text("fit.svg", &plot)
    })();
    finish(run, result)
}

#[derive(Serialize)]
struct OptimalReport {
    sigma_sq: f64,
    min_value: f64,
    min_freq_hz: f64,
    min_phase_rad: f64,
    bands: BandReport,
    bands_without_phase_noise: Option<BandReport>,
}

fn optimal(common: &Common, data: Option<&Path>, g: GridSpec, phase_noise: bool) -> Result<RunManifest> {
    let p = load_params(&common.config)?;
    // measured data already carry their phase noise
    let (spectra, sigma_sq, source) = match data {
        Some(d) => (read_covariance(d)?.spectra, 0.0, json!(d.display().to_string())),
        None => {
            let grid = make_grid(g, &p)?;
            let sigma = if phase_noise { p.sigma_theta_sq } else { 0.0 };
            (measured_spectra(&grid, &p, false)?, sigma, json!({ "model_grid": grid_json(g) }))
        }
    };
    let config = json!({
        "params": params_json(&p),
        "source": source,
        "phase_noise": phase_noise,
    });
    let mut run = Run::new("optimal", &common.out, config)?;
    let result = (|| {
        let opt = optimal_spectrum(&spectra, sigma_sq);
        let ideal: Option<OptimalSpectrum> =
            (data.is_none() && sigma_sq > 0.0).then(|| optimal_spectrum(&spectra, 0.0));
        run.write_with("optimal.csv", |w| opt.write_csv(w))?;
        if let Some(o) = &ideal {
            run.write_with("optimal_without_phase_noise.csv", |w| o.write_csv(w))?;
        }
        let (i, v) = opt.min().ok_or_else(|| Error::Grid("empty spectrum".into()))?;
        run.write_json(
            "bands.json",
            &OptimalReport {
                sigma_sq,
                min_value: v,
                min_freq_hz: opt.grid.hz()[i],
                min_phase_rad: opt.phases[i],
                bands: opt.bands(1.0),
                bands_without_phase_noise: ideal.as_ref().map(|o| o.bands(1.0)),
            },
        )?;
        let x = khz(&opt.grid);
        let mut series = vec![Series {
            label: if ideal.is_some() { "with phase noise" } else { "S_opt" },
            x: &x,
            y: &opt.values,
            color: "#c0392b",
            dashed: false,
        }];
        if let Some(o) = &ideal {
            series.push(Series {
                label: "without phase noise",
                x: &x,
                y: &o.values,
                color: "#c0392b",
                dashed: true,
            });
        }
        let plot = line_panels(
            "Optimal quadrature spectrum",
            "frequency (kHz)",
            &[Panel {
                title: "min over detection phase".into(),
                series,
                guide: Some(1.0),
            }],
        );
        run.write_text("optimal.svg", &plot)
    })();
    finish(run, result)
}

