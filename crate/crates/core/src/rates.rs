//! Link-level SINR and spectral-efficiency computation.
//!
//! Three transmission modes are supported for a scheduled slot:
//!
//! * half duplex (`HdUl`/`HdDl`): one direction active, no intra-cell
//!   interference;
//! * full duplex (`Fd`): uplink and downlink active simultaneously, uplink
//!   degraded by residual base-station self-interference, downlink degraded
//!   by user-to-user interference;
//! * full duplex with cancellation (`Sic`): the downlink user decodes and
//!   subtracts the uplink signal before decoding its own, which removes
//!   user-to-user interference from the downlink at the cost of an extra
//!   decodability constraint on the uplink.
//!
//! All SINRs and gains are linear; rates are spectral efficiencies in bps/Hz.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::units::db_to_linear;

// ============================================================================
// Basic quantities
// ============================================================================

/// Transmission mode of an activated slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    HdUl,
    HdDl,
    Fd,
    Sic,
}

/// Link direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Ul,
    Dl,
}

/// Uplink/downlink SINR pair (linear). An inactive direction carries 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrPair {
    pub ul: f64,
    pub dl: f64,
}

/// Transmit powers in watts for one scheduled pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPair {
    pub p_u: f64,
    pub p_d: f64,
}

impl PowerPair {
    pub fn total(&self) -> f64 {
        self.p_u + self.p_d
    }
}

/// Per-direction transmit power caps in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLimits {
    pub p_max_u: f64,
    pub p_max_d: f64,
}

/// Uplink (base station) and downlink (user) noise floors in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisePair {
    pub n_u: f64,
    pub n_d: f64,
}

/// Channel gains relevant to one (uplink user i, downlink user j) pairing:
/// `g_i`, `g_j` are the base-station links, `h_ij` the user-to-user link,
/// and `psi` the residual self-interference gain after cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGains {
    pub g_i: f64,
    pub g_j: f64,
    pub h_ij: f64,
    pub psi: f64,
}

// ============================================================================
// SINR per mode
// ============================================================================

/// Half-duplex SINR: the active direction sees only its own link and noise.
pub fn sinr_hd(direction: Direction, gain: f64, power: f64, noise: f64) -> SinrPair {
    let s = power * gain / noise;
    match direction {
        Direction::Ul => SinrPair { ul: s, dl: 0.0 },
        Direction::Dl => SinrPair { ul: 0.0, dl: s },
    }
}

/// Full-duplex SINR. Uplink is degraded by residual self-interference
/// `p_d * psi`, downlink by user-to-user interference `p_u * h_ij`.
pub fn sinr_fd(gains: &PairGains, powers: PowerPair, noise: NoisePair) -> SinrPair {
    SinrPair {
        ul: powers.p_u * gains.g_i / (powers.p_d * gains.psi + noise.n_u),
        dl: powers.p_d * gains.g_j / (powers.p_u * gains.h_ij + noise.n_d),
    }
}

/// Full duplex with uplink-signal cancellation at the downlink user.
///
/// The downlink user first decodes the uplink signal (treating its own
/// downlink as interference) and subtracts it, so the downlink SINR is
/// interference free. The uplink rate is limited by the weaker of the
/// base-station observation and the decodability at the downlink user,
/// hence the `min` of the two terms.
pub fn sinr_sic(gains: &PairGains, powers: PowerPair, noise: NoisePair) -> SinrPair {
    let at_bs = powers.p_u * gains.g_i / (powers.p_d * gains.psi + noise.n_u);
    let at_user = powers.p_u * gains.h_ij / (powers.p_d * gains.g_j + noise.n_d);
    SinrPair {
        ul: at_bs.min(at_user),
        dl: powers.p_d * gains.g_j / noise.n_d,
    }
}

// ============================================================================
// Rate models
// ============================================================================

/// One step of a staircase rate table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    /// Minimum linear SINR at which this step applies.
    pub min_sinr: f64,
    /// Spectral efficiency in bps/Hz.
    pub rate: f64,
}

/// Staircase mapping from SINR to spectral efficiency, as used by practical
/// modulation-and-coding selection. Below the first threshold the rate is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Staircase {
    steps: Vec<Step>,
}

/// Default 15-step table bundled with the crate (see `data/lte_cqi.txt`).
const DEFAULT_TABLE: &str = include_str!("../data/lte_cqi.txt");

impl Staircase {
    /// Builds a staircase from steps with linear SINR thresholds.
    /// Thresholds must be strictly increasing, rates nondecreasing and finite.
    pub fn from_steps(steps: Vec<Step>) -> Result<Self, Error> {
        if steps.is_empty() {
            return Err(Error::param("steps", "staircase table must be non-empty"));
        }
        for (idx, w) in steps.windows(2).enumerate() {
            if w[1].min_sinr <= w[0].min_sinr {
                return Err(Error::RateTable {
                    line: idx + 2,
                    reason: "thresholds must be strictly increasing".to_string(),
                });
            }
            if w[1].rate < w[0].rate {
                return Err(Error::RateTable {
                    line: idx + 2,
                    reason: "rates must be nondecreasing".to_string(),
                });
            }
        }
        if steps.iter().any(|s| !s.min_sinr.is_finite() || !s.rate.is_finite() || s.rate < 0.0) {
            return Err(Error::param("steps", "thresholds and rates must be finite, rates >= 0"));
        }
        Ok(Staircase { steps })
    }

    /// Parses the text table format: one `<sinr_threshold_db> <bps_per_hz>`
    /// pair per line, `#` starts a comment, thresholds ascending.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut steps = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (thr, rate) = match (fields.next(), fields.next(), fields.next()) {
                (Some(t), Some(r), None) => (t, r),
                _ => {
                    return Err(Error::RateTable {
                        line: lineno + 1,
                        reason: "expected `<sinr_threshold_db> <bps_per_hz>`".to_string(),
                    })
                }
            };
            let parse = |s: &str| -> Result<f64, Error> {
                s.parse().map_err(|_| Error::RateTable {
                    line: lineno + 1,
                    reason: format!("`{s}` is not a number"),
                })
            };
            steps.push(Step {
                min_sinr: db_to_linear(parse(thr)?),
                rate: parse(rate)?,
            });
        }
        // Re-check ordering on the parsed (linear) thresholds; dB-to-linear is
        // monotone so this reports the original line of the first violation.
        for (idx, w) in steps.windows(2).enumerate() {
            if w[1].min_sinr <= w[0].min_sinr {
                return Err(Error::RateTable {
                    line: idx + 2,
                    reason: "thresholds must be ascending".to_string(),
                });
            }
        }
        Staircase::from_steps(steps)
    }

    /// The 15-step table shipped with the crate.
    pub fn bundled() -> Self {
        Staircase::parse(DEFAULT_TABLE).expect("bundled rate table is valid")
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Highest step rate; an upper bound on any staircase rate.
    pub fn max_rate(&self) -> f64 {
        self.steps.last().map(|s| s.rate).unwrap_or(0.0)
    }

    #[inline]
    fn lookup(&self, sinr: f64) -> f64 {
        let idx = self.steps.partition_point(|s| s.min_sinr <= sinr);
        if idx == 0 {
            0.0
        } else {
            self.steps[idx - 1].rate
        }
    }
}

/// Mapping from SINR to spectral efficiency.
#[derive(Debug, Clone, PartialEq)]
pub enum RateModel {
    /// `log2(1 + sinr)`.
    Shannon,
    /// Discrete staircase lookup.
    Staircase(Staircase),
}

/// Spectral efficiency in bps/Hz for a linear SINR under the given model.
#[inline]
pub fn rate(model: &RateModel, sinr: f64) -> f64 {
    match model {
        RateModel::Shannon => (1.0 + sinr).log2(),
        RateModel::Staircase(s) => s.lookup(sinr),
    }
}

// ============================================================================
// Network utility and temporal-share weights
// ============================================================================

/// Weighted network utility: `rho * r_dl + (1 - rho) * r_ul`.
#[inline]
pub fn network_utility(rho: f64, r_ul: f64, r_dl: f64) -> f64 {
    rho * r_dl + (1.0 - rho) * r_ul
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Downlink priority `rho` plus per-directional-user temporal-share weights.
///
/// Weights are nonnegative and sum to one across all 2K directional users;
/// the invariant is enforced at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityWeights {
    rho: f64,
    w_ul: Vec<f64>,
    w_dl: Vec<f64>,
}

impl UtilityWeights {
    pub fn new(rho: f64, w_ul: Vec<f64>, w_dl: Vec<f64>) -> Result<Self, Error> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::param("rho", format!("{rho} not in [0, 1]")));
        }
        if w_ul.len() != w_dl.len() {
            return Err(Error::param("w_dl", "weight vectors must have equal length"));
        }
        if w_ul.is_empty() {
            return Err(Error::param("w_ul", "weights must be non-empty"));
        }
        if w_ul.iter().chain(&w_dl).any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::param("w_ul", "weights must be finite and nonnegative"));
        }
        let sum: f64 = w_ul.iter().chain(&w_dl).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::param(
                "w_ul",
                format!("weights sum to {sum}, expected 1 within {WEIGHT_SUM_TOL:e}"),
            ));
        }
        Ok(UtilityWeights { rho, w_ul, w_dl })
    }

    /// Equal weights `1 / (2k)` for every directional user.
    pub fn equal(rho: f64, k: usize) -> Result<Self, Error> {
        if k == 0 {
            return Err(Error::param("k", "at least one user required"));
        }
        let w = 1.0 / (2 * k) as f64;
        UtilityWeights::new(rho, vec![w; k], vec![w; k])
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn k(&self) -> usize {
        self.w_ul.len()
    }

    pub fn w_ul(&self) -> &[f64] {
        &self.w_ul
    }

    pub fn w_dl(&self) -> &[f64] {
        &self.w_dl
    }
}

// ============================================================================
// Tests
// ============================================================================
