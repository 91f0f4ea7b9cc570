//! Monte Carlo experiment harness.
//!
//! An experiment is a set of independent drops. Each drop places users,
//! draws large-scale gains once, then schedules a fixed number of slots with
//! fresh fading per slot. Drops are seeded deterministically from a master
//! seed and the drop index only, so two runs with the same master seed are
//! bit-identical, and runs differing only in mode set or rate model see the
//! same channels drop for drop (the scheduler consumes no randomness).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{place_users, sample_large_scale, sample_slot_gains, ChannelParams};
use crate::config::SimConfig;
use crate::error::Error;
use crate::power::{grid_search, PairContext, PowerConfig};
use crate::rates::{Mode, PairGains, RateModel, UtilityWeights};
use crate::scheduler::{schedule_slot, FairnessState, ModeSet, SchedulerParams};

/// Exhaustive-search resolution used by the reference comparisons.
pub const EXHAUSTIVE_GRID_LEVELS: usize = 101;

// ============================================================================
// Setup
// ============================================================================

/// Everything a drop needs, pre-resolved from a [`SimConfig`].
#[derive(Debug, Clone)]
pub struct SimSetup {
    pub channel: ChannelParams,
    pub k: usize,
    pub n_h: usize,
    /// Residual self-interference channel gain (linear).
    pub psi: f64,
    pub calibration: crate::channel::Calibration,
    pub weights: UtilityWeights,
    pub model: RateModel,
    pub power_cfg: PowerConfig,
    pub modes: ModeSet,
    pub sched: SchedulerParams,
    pub slots_per_drop: usize,
    pub bandwidth_hz: f64,
}

impl SimConfig {
    /// Validates the configuration and resolves it into a runnable setup
    /// (loading the rate table if one is configured).
    pub fn setup(&self) -> Result<SimSetup, Error> {
        self.validate()?;
        Ok(SimSetup {
            channel: self.channel_params()?,
            k: self.users.k,
            n_h: self.users.n_h,
            psi: self.psi_linear(),
            calibration: self.calibration(),
            weights: self.utility_weights()?,
            model: self.rate_model()?,
            power_cfg: self.power,
            modes: self.mode_set(),
            sched: self.scheduler,
            slots_per_drop: self.run.slots_per_drop,
            bandwidth_hz: self.radio.bandwidth_hz,
        })
    }
}

// ============================================================================
// Seeding
// ============================================================================

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Seed of drop `idx` under a master seed: an O(1) mix, so any drop can be
/// reproduced alone and drops are decorrelated regardless of the master.
pub fn drop_seed(master_seed: u64, idx: u64) -> u64 {
    splitmix64(master_seed ^ (idx.wrapping_add(1)).wrapping_mul(0x9E3779B97F4A7C15))
}

// ============================================================================
// Metrics
// ============================================================================

/// How often each mode was scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModeHistogram {
    pub hd_ul: u64,
    pub hd_dl: u64,
    pub fd: u64,
    pub sic: u64,
}

impl ModeHistogram {
    pub fn record(&mut self, mode: Mode) {
        match mode {
            Mode::HdUl => self.hd_ul += 1,
            Mode::HdDl => self.hd_dl += 1,
            Mode::Fd => self.fd += 1,
            Mode::Sic => self.sic += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.hd_ul + self.hd_dl + self.fd + self.sic
    }

    pub fn merge(&mut self, other: &ModeHistogram) {
        self.hd_ul += other.hd_ul;
        self.hd_dl += other.hd_dl;
        self.fd += other.fd;
        self.sic += other.sic;
    }
}

/// Per-drop slot averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropMetrics {
    pub seed: u64,
    /// Mean per-slot rates in bps/Hz.
    pub mean_r_ul: f64,
    pub mean_r_dl: f64,
    /// Mean per-slot weighted network utility in bps/Hz.
    pub mean_utility: f64,
    pub modes: ModeHistogram,
}

/// Aggregates over all drops of one experiment. Standard errors are the
/// across-drop standard deviation divided by sqrt(drops) (zero for a single
/// drop).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub drops: usize,
    pub slots_per_drop: usize,
    pub bandwidth_hz: f64,
    pub mean_r_ul: f64,
    pub se_r_ul: f64,
    pub mean_r_dl: f64,
    pub se_r_dl: f64,
    pub mean_utility: f64,
    pub se_utility: f64,
    /// `(mean_r_ul + mean_r_dl) * bandwidth_hz`.
    pub mean_cell_throughput_bps: f64,
    pub se_cell_throughput_bps: f64,
    /// Downlink-to-uplink rate ratio; `None` when no uplink rate was seen.
    pub gamma: Option<f64>,
    pub modes: ModeHistogram,
    pub per_drop: Vec<DropMetrics>,
}

/// [`Metrics`] without the per-drop breakdown, for compact result files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub drops: usize,
    pub slots_per_drop: usize,
    pub bandwidth_hz: f64,
    pub mean_r_ul: f64,
    pub se_r_ul: f64,
    pub mean_r_dl: f64,
    pub se_r_dl: f64,
    pub mean_utility: f64,
    pub se_utility: f64,
    pub mean_cell_throughput_bps: f64,
    pub se_cell_throughput_bps: f64,
    pub gamma: Option<f64>,
    pub modes: ModeHistogram,
}

impl Metrics {
    pub fn summary(&self) -> MetricsSummary {
        MetricsSummary {
            drops: self.drops,
            slots_per_drop: self.slots_per_drop,
            bandwidth_hz: self.bandwidth_hz,
            mean_r_ul: self.mean_r_ul,
            se_r_ul: self.se_r_ul,
            mean_r_dl: self.mean_r_dl,
            se_r_dl: self.se_r_dl,
            mean_utility: self.mean_utility,
            se_utility: self.se_utility,
            mean_cell_throughput_bps: self.mean_cell_throughput_bps,
            se_cell_throughput_bps: self.se_cell_throughput_bps,
            gamma: self.gamma,
            modes: self.modes,
        }
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Percent throughput gain of `value` over `baseline`.
pub fn gain_vs_baseline(value: f64, baseline: f64) -> Result<f64, Error> {
    if baseline == 0.0 {
        return Err(Error::param("baseline", "gain over a zero baseline is undefined"));
    }
    Ok(100.0 * (value - baseline) / baseline)
}

// ============================================================================
// Running drops and experiments
// ============================================================================

/// Simulates one drop with its own RNG. The RNG is consumed in a fixed
/// order: hotspot centers, user positions, shadowing, then per-slot fading.
pub fn run_drop(setup: &SimSetup, seed: u64) -> Result<DropMetrics, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = place_users(
        &setup.channel.geometry,
        setup.k,
        setup.n_h,
        setup.channel.hotspot_radius_m,
        &mut rng,
    )?;
    let ls = sample_large_scale(&layout, &setup.channel, &mut rng);
    let mut state = FairnessState::new(setup.k)?;

    let mut sum_ul = 0.0;
    let mut sum_dl = 0.0;
    let mut sum_utility = 0.0;
    let mut modes = ModeHistogram::default();
    for _ in 0..setup.slots_per_drop {
        let gains = sample_slot_gains(&ls, setup.psi, setup.calibration.noise, &mut rng);
        let out = schedule_slot(
            &mut state,
            &gains,
            setup.calibration.limits,
            &setup.weights,
            &setup.model,
            &setup.power_cfg,
            setup.modes,
            &setup.sched,
        )?;
        sum_ul += out.r_ul;
        sum_dl += out.r_dl;
        sum_utility += out.utility;
        modes.record(out.decision.mode);
    }

    let slots = setup.slots_per_drop as f64;
    Ok(DropMetrics {
        seed,
        mean_r_ul: sum_ul / slots,
        mean_r_dl: sum_dl / slots,
        mean_utility: sum_utility / slots,
        modes,
    })
}

/// Runs `drops` independent drops in parallel and aggregates them. Results
/// are ordered and bit-identical regardless of thread count.
pub fn run_experiment(setup: &SimSetup, drops: usize, master_seed: u64) -> Result<Metrics, Error> {
    if drops == 0 {
        return Err(Error::param("drops", "at least one drop required"));
    }
    let per_drop: Vec<DropMetrics> = (0..drops as u64)
        .into_par_iter()
        .map(|idx| run_drop(setup, drop_seed(master_seed, idx)))
        .collect::<Result<_, _>>()?;

    let uls: Vec<f64> = per_drop.iter().map(|d| d.mean_r_ul).collect();
    let dls: Vec<f64> = per_drop.iter().map(|d| d.mean_r_dl).collect();
    let utils: Vec<f64> = per_drop.iter().map(|d| d.mean_utility).collect();
    let tputs: Vec<f64> = per_drop
        .iter()
        .map(|d| (d.mean_r_ul + d.mean_r_dl) * setup.bandwidth_hz)
        .collect();
    let (mean_r_ul, se_r_ul) = mean_and_se(&uls);
    let (mean_r_dl, se_r_dl) = mean_and_se(&dls);
    let (mean_utility, se_utility) = mean_and_se(&utils);
    let (mean_tput, se_tput) = mean_and_se(&tputs);

    let mut modes = ModeHistogram::default();
    for d in &per_drop {
        modes.merge(&d.modes);
    }

    Ok(Metrics {
        drops,
        slots_per_drop: setup.slots_per_drop,
        bandwidth_hz: setup.bandwidth_hz,
        mean_r_ul,
        se_r_ul,
        mean_r_dl,
        se_r_dl,
        mean_utility,
        se_utility,
        mean_cell_throughput_bps: mean_tput,
        se_cell_throughput_bps: se_tput,
        gamma: (mean_r_ul > 0.0).then(|| mean_r_dl / mean_r_ul),
        modes,
        per_drop,
    })
}

// ============================================================================
// Power-strategy comparisons
// ============================================================================

/// One sampled pairing instance evaluated under two search resolutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerComparison {
    pub binary: f64,
    pub exhaustive: f64,
}

/// Draws `n` independent two-user pairing instances from the configured
/// channel (placement, shadowing, one slot of fading each) as power
/// optimization contexts.
pub fn sample_pair_contexts(
    setup: &SimSetup,
    n: usize,
    master_seed: u64,
) -> Result<Vec<PairContext>, Error> {
    let n_h = setup.n_h.min(2);
    let mut out = Vec::with_capacity(n);
    for idx in 0..n as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(drop_seed(master_seed, idx));
        let layout = place_users(
            &setup.channel.geometry,
            2,
            n_h,
            setup.channel.hotspot_radius_m,
            &mut rng,
        )?;
        let ls = sample_large_scale(&layout, &setup.channel, &mut rng);
        let gains = sample_slot_gains(&ls, setup.psi, setup.calibration.noise, &mut rng);
        out.push(PairContext {
            gains: PairGains {
                g_i: gains.g[0],
                g_j: gains.g[1],
                h_ij: gains.h.get(0, 1),
                psi: gains.psi,
            },
            noise: gains.noise,
            limits: setup.calibration.limits,
            rho: setup.weights.rho(),
        });
    }
    Ok(out)
}

/// Evaluates each context under binary (two-level) and exhaustive
/// (`levels`-per-axis) full-duplex power search.
pub fn binary_vs_exhaustive(
    ctxs: &[PairContext],
    model: &RateModel,
    levels: usize,
) -> Result<Vec<PowerComparison>, Error> {
    ctxs.iter()
        .map(|ctx| {
            Ok(PowerComparison {
                binary: grid_search(ctx, model, 2, 2)?.utility,
                exhaustive: grid_search(ctx, model, levels, levels)?.utility,
            })
        })
        .collect()
}

// ============================================================================
// Tests
// ============================================================================
