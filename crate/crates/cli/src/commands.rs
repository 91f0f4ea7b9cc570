//! The two front-end commands: single experiment runs and bundled presets.
//!
//! Presets mirror the standard experiment grids: `fig2` compares binary and
//! exhaustive power search on sampled pairings, `gains` sweeps mode sets,
//! hotspot counts, cancellation levels, and rate models against the
//! half-duplex baseline, and `asymmetry` sweeps the downlink priority and
//! reports the delivered traffic ratio.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fdcell_core::config::{RateModelKind, Scenario, SimConfig};
use fdcell_core::rates::{RateModel, Staircase};
use fdcell_core::sim::{
    binary_vs_exhaustive, gain_vs_baseline, run_experiment, sample_pair_contexts, Metrics,
    MetricsSummary, EXHAUSTIVE_GRID_LEVELS,
};
use fdcell_core::Error;
use serde::Serialize;

use crate::manifest::{CommandSpec, OutputFile, RunManifest};
use crate::{io_err, parse_config, CliError};

/// Names accepted by `fdcell preset`.
pub const PRESET_NAMES: &[&str] = &["fig2", "gains", "asymmetry"];

const METRICS_FILE: &str = "metrics.json";

// ============================================================================
// Single runs
// ============================================================================

/// Options for `fdcell run`. Unset fields fall back to the config file, and
/// the config file falls back to the built-in defaults.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub drops: Option<usize>,
    pub slots: Option<usize>,
}

#[derive(Serialize)]
struct RunMetricsDoc {
    schema: &'static str,
    version: u32,
    summary: MetricsSummary,
}

/// Runs one experiment and writes `metrics.json`, `summary.csv` (one row
/// per drop), and the manifest into `out_dir`.
pub fn run_single(opts: &RunOptions) -> Result<RunManifest, CliError> {
    let mut cfg = match &opts.config {
        Some(path) => parse_config(path)?,
        None => SimConfig::default(),
    };
    if let Some(seed) = opts.seed {
        cfg.run.seed = seed;
    }
    if let Some(drops) = opts.drops {
        cfg.run.drops = drops;
    }
    if let Some(slots) = opts.slots {
        cfg.run.slots_per_drop = slots;
    }

    let setup = cfg.setup()?;
    let metrics = run_experiment(&setup, cfg.run.drops, cfg.run.seed)?;

    fs::create_dir_all(&opts.out_dir).map_err(io_err(&opts.out_dir))?;
    let mut manifest = RunManifest::new(CommandSpec::Run, cfg.run.seed, cfg.to_toml_string());

    let doc = RunMetricsDoc {
        schema: "fdcell-run-metrics",
        version: 1,
        summary: metrics.summary(),
    };
    write_json(&opts.out_dir, METRICS_FILE, &doc)?;
    manifest.outputs.push(OutputFile {
        path: METRICS_FILE.into(),
        schema: "fdcell-run-metrics-v1".into(),
    });

    let mut csv = String::from(
        "drop,seed,mean_r_ul_bps_hz,mean_r_dl_bps_hz,mean_utility_bps_hz,\
         hd_ul_slots,hd_dl_slots,fd_slots,sic_slots\n",
    );
    for (i, d) in metrics.per_drop.iter().enumerate() {
        writeln!(
            csv,
            "{i},{},{},{},{},{},{},{},{}",
            d.seed,
            d.mean_r_ul,
            d.mean_r_dl,
            d.mean_utility,
            d.modes.hd_ul,
            d.modes.hd_dl,
            d.modes.fd,
            d.modes.sic
        )
        .expect("writing to a string cannot fail");
    }
    write_file(&opts.out_dir, "summary.csv", &csv)?;
    manifest.outputs.push(OutputFile {
        path: "summary.csv".into(),
        schema: "fdcell-run-drops-v1".into(),
    });

    manifest.write(&opts.out_dir)?;
    Ok(manifest)
}

// ============================================================================
// Presets
// ============================================================================

/// Options shared by all presets. `drops` is the per-cell drop count, except
/// for `fig2` where it is the number of sampled pairings.
#[derive(Debug, Clone)]
pub struct PresetOptions {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub drops: usize,
    pub slots: usize,
}

impl Default for PresetOptions {
    fn default() -> Self {
        PresetOptions { out_dir: PathBuf::from("out"), seed: 1, drops: 200, slots: 2000 }
    }
}

/// Dispatches a preset by name.
pub fn run_preset(name: &str, opts: &PresetOptions) -> Result<RunManifest, CliError> {
    fs::create_dir_all(&opts.out_dir).map_err(io_err(&opts.out_dir))?;
    match name {
        "fig2" => preset_fig2(opts),
        "gains" => preset_gains(opts),
        "asymmetry" => preset_asymmetry(opts),
        other => Err(Error::UnknownPreset(other.to_owned()).into()),
    }
}

fn base_config(opts: &PresetOptions) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.run.seed = opts.seed;
    cfg.run.drops = opts.drops;
    cfg.run.slots_per_drop = opts.slots;
    cfg
}

fn preset_manifest(name: &str, opts: &PresetOptions) -> RunManifest {
    RunManifest::new(
        CommandSpec::Preset { name: name.to_owned(), drops: opts.drops, slots: opts.slots },
        opts.seed,
        base_config(opts).to_toml_string(),
    )
}

fn model_name(kind: RateModelKind) -> &'static str {
    match kind {
        RateModelKind::Shannon => "shannon",
        RateModelKind::Staircase => "staircase",
    }
}

// ------------------------------------------------------------- fig2

#[derive(Serialize)]
struct Fig2ModelStats {
    rate_model: &'static str,
    samples: usize,
    mean_binary_bps_hz: f64,
    mean_exhaustive_bps_hz: f64,
    /// Largest relative shortfall of binary below exhaustive.
    max_rel_gap: f64,
    /// Fraction of samples where binary reaches 98% of exhaustive.
    share_binary_within_2pct: f64,
}

#[derive(Serialize)]
struct Fig2Doc {
    schema: &'static str,
    version: u32,
    psi_inv_db: f64,
    rho: f64,
    exhaustive_levels: usize,
    models: Vec<Fig2ModelStats>,
}

/// Binary vs exhaustive power search on sampled two-user pairings, one CSV
/// row per (rate model, sample), suitable for CDF plotting.
fn preset_fig2(opts: &PresetOptions) -> Result<RunManifest, CliError> {
    let mut cfg = base_config(opts);
    cfg.channel.psi_cancellation_db = 100.0;
    let setup = cfg.setup()?;
    let ctxs = sample_pair_contexts(&setup, opts.drops, opts.seed)?;

    let models = [
        (RateModelKind::Shannon, RateModel::Shannon),
        (RateModelKind::Staircase, RateModel::Staircase(Staircase::bundled())),
    ];

    let mut csv =
        String::from("rate_model,sample_index,binary_utility_bps_hz,exhaustive_utility_bps_hz\n");
    let mut stats = Vec::new();
    for (kind, model) in &models {
        let cmp = binary_vs_exhaustive(&ctxs, model, EXHAUSTIVE_GRID_LEVELS)?;
        let name = model_name(*kind);
        let mut max_gap = 0.0f64;
        let mut within = 0usize;
        for (i, c) in cmp.iter().enumerate() {
            writeln!(csv, "{name},{i},{},{}", c.binary, c.exhaustive)
                .expect("writing to a string cannot fail");
            if c.exhaustive > 0.0 {
                max_gap = max_gap.max((c.exhaustive - c.binary) / c.exhaustive);
            }
            if c.binary >= 0.98 * c.exhaustive {
                within += 1;
            }
        }
        stats.push(Fig2ModelStats {
            rate_model: name,
            samples: cmp.len(),
            mean_binary_bps_hz: cmp.iter().map(|c| c.binary).sum::<f64>() / cmp.len() as f64,
            mean_exhaustive_bps_hz: cmp.iter().map(|c| c.exhaustive).sum::<f64>()
                / cmp.len() as f64,
            max_rel_gap: max_gap,
            share_binary_within_2pct: within as f64 / cmp.len() as f64,
        });
    }

    let mut manifest = preset_manifest("fig2", opts);
    write_file(&opts.out_dir, "fig2_cdf.csv", &csv)?;
    manifest.outputs.push(OutputFile {
        path: "fig2_cdf.csv".into(),
        schema: "fdcell-fig2-cdf-v1".into(),
    });
    let doc = Fig2Doc {
        schema: "fdcell-fig2-metrics",
        version: 1,
        psi_inv_db: 100.0,
        rho: cfg.utility.rho,
        exhaustive_levels: EXHAUSTIVE_GRID_LEVELS,
        models: stats,
    };
    write_json(&opts.out_dir, METRICS_FILE, &doc)?;
    manifest.outputs.push(OutputFile {
        path: METRICS_FILE.into(),
        schema: "fdcell-fig2-metrics-v1".into(),
    });
    manifest.write(&opts.out_dir)?;
    Ok(manifest)
}

// ------------------------------------------------------------- gains

#[derive(Serialize)]
struct GainsCell {
    scenario: String,
    n_h: usize,
    psi_inv_db: f64,
    rate_model: &'static str,
    gain_pct_vs_hd: f64,
    summary: MetricsSummary,
}

#[derive(Serialize)]
struct GainsDoc {
    schema: &'static str,
    version: u32,
    cells: Vec<GainsCell>,
}

/// Cell throughput for every (rate model, cancellation, hotspot count,
/// scenario) combination, with the percent gain over the matched-seed
/// half-duplex baseline.
fn preset_gains(opts: &PresetOptions) -> Result<RunManifest, CliError> {
    let mut csv = String::from(
        "scenario,n_h,psi_inv_db,rate_model,mean_cell_throughput_bps,\
         se_cell_throughput_bps,gain_pct_vs_hd\n",
    );
    let mut cells = Vec::new();
    for kind in [RateModelKind::Shannon, RateModelKind::Staircase] {
        for psi_db in [80.0, 100.0] {
            for n_h in 0..=3usize {
                let run = |scenario: Scenario| -> Result<Metrics, CliError> {
                    let mut cfg = base_config(opts);
                    cfg.rate.model = kind;
                    cfg.channel.psi_cancellation_db = psi_db;
                    cfg.users.n_h = n_h;
                    cfg.scenario.modes = scenario;
                    Ok(run_experiment(&cfg.setup()?, cfg.run.drops, cfg.run.seed)?)
                };
                let hd = run(Scenario::Hd)?;
                for scenario in Scenario::ALL {
                    let m = match scenario {
                        Scenario::Hd => hd.clone(),
                        _ => run(scenario)?,
                    };
                    let gain = gain_vs_baseline(
                        m.mean_cell_throughput_bps,
                        hd.mean_cell_throughput_bps,
                    )?;
                    writeln!(
                        csv,
                        "{scenario},{n_h},{psi_db},{},{},{},{gain}",
                        model_name(kind),
                        m.mean_cell_throughput_bps,
                        m.se_cell_throughput_bps
                    )
                    .expect("writing to a string cannot fail");
                    cells.push(GainsCell {
                        scenario: scenario.to_string(),
                        n_h,
                        psi_inv_db: psi_db,
                        rate_model: model_name(kind),
                        gain_pct_vs_hd: gain,
                        summary: m.summary(),
                    });
                }
            }
        }
    }

    let mut manifest = preset_manifest("gains", opts);
    write_file(&opts.out_dir, "gains.csv", &csv)?;
    manifest
        .outputs
        .push(OutputFile { path: "gains.csv".into(), schema: "fdcell-gains-v1".into() });
    let doc = GainsDoc { schema: "fdcell-gains-metrics", version: 1, cells };
    write_json(&opts.out_dir, METRICS_FILE, &doc)?;
    manifest.outputs.push(OutputFile {
        path: METRICS_FILE.into(),
        schema: "fdcell-gains-metrics-v1".into(),
    });
    manifest.write(&opts.out_dir)?;
    Ok(manifest)
}

// ------------------------------------------------------------- asymmetry

#[derive(Serialize)]
struct AsymmetryCell {
    scenario: String,
    rho: f64,
    gamma: f64,
    summary: MetricsSummary,
}

#[derive(Serialize)]
struct AsymmetryDoc {
    schema: &'static str,
    version: u32,
    psi_inv_db: f64,
    rate_model: &'static str,
    cells: Vec<AsymmetryCell>,
}

/// Delivered downlink-to-uplink traffic ratio as the downlink priority
/// sweeps over 0.3, 0.5, and 0.7, per scenario (uniform users, staircase
/// rates, 80 dB cancellation).
fn preset_asymmetry(opts: &PresetOptions) -> Result<RunManifest, CliError> {
    let mut csv = String::from("scenario,rho,gamma\n");
    let mut cells = Vec::new();
    for scenario in Scenario::ALL {
        for rho in [0.3, 0.5, 0.7] {
            let mut cfg = base_config(opts);
            cfg.rate.model = RateModelKind::Staircase;
            cfg.channel.psi_cancellation_db = 80.0;
            cfg.scenario.modes = scenario;
            cfg.utility.rho = rho;
            let m = run_experiment(&cfg.setup()?, cfg.run.drops, cfg.run.seed)?;
            let gamma = m.gamma.unwrap_or(f64::NAN);
            writeln!(csv, "{scenario},{rho},{gamma}").expect("writing to a string cannot fail");
            cells.push(AsymmetryCell {
                scenario: scenario.to_string(),
                rho,
                gamma,
                summary: m.summary(),
            });
        }
    }

    let mut manifest = preset_manifest("asymmetry", opts);
    write_file(&opts.out_dir, "asymmetry.csv", &csv)?;
    manifest
        .outputs
        .push(OutputFile { path: "asymmetry.csv".into(), schema: "fdcell-asymmetry-v1".into() });
    let doc = AsymmetryDoc {
        schema: "fdcell-asymmetry-metrics",
        version: 1,
        psi_inv_db: 80.0,
        rate_model: "staircase",
        cells,
    };
    write_json(&opts.out_dir, METRICS_FILE, &doc)?;
    manifest.outputs.push(OutputFile {
        path: METRICS_FILE.into(),
        schema: "fdcell-asymmetry-metrics-v1".into(),
    });
    manifest.write(&opts.out_dir)?;
    Ok(manifest)
}

// ============================================================================
// Artifact writing
// ============================================================================

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(io_err(&path))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|source| CliError::Json { what: "metrics", source })?;
    text.push('\n');
    write_file(dir, name, &text)
}
