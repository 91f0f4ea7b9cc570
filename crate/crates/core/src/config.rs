//! TOML-backed experiment configuration.
//!
//! Every field has a default matching the reference cell (40 m square, six
//! users, 10 MHz, 100 dB self-interference cancellation, equal temporal
//! weights), so an empty document is a complete configuration. Unknown keys
//! are rejected rather than silently ignored.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{
    calibrate, Calibration, CalibrationParams, CellGeometry, ChannelParams, LinkClass,
};
use crate::error::Error;
use crate::power::{PowerConfig, StrategyKind};
use crate::rates::{RateModel, Staircase, UtilityWeights};
use crate::scheduler::{ModeSet, SchedulerParams};
use crate::units::db_to_linear;

// ============================================================================
// Scenario
// ============================================================================

/// Which communication modes a run may schedule. Every scenario includes
/// half duplex; the richer ones add full duplex, then cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "hd")]
    Hd,
    #[serde(rename = "hd+fd")]
    HdFd,
    #[serde(rename = "hd+fd+sic")]
    HdFdSic,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Hd, Scenario::HdFd, Scenario::HdFdSic];

    pub fn mode_set(self) -> ModeSet {
        match self {
            Scenario::Hd => ModeSet::HD_ONLY,
            Scenario::HdFd => ModeSet::HD_FD,
            Scenario::HdFdSic => ModeSet::ALL,
        }
    }

    /// The key used in config files and CSV output.
    pub fn key(self) -> &'static str {
        match self {
            Scenario::Hd => "hd",
            Scenario::HdFd => "hd+fd",
            Scenario::HdFdSic => "hd+fd+sic",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Hd => "HD",
            Scenario::HdFd => "HD+FD",
            Scenario::HdFdSic => "HD+FD+SIC",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "hd" => Ok(Scenario::Hd),
            "hd+fd" => Ok(Scenario::HdFd),
            "hd+fd+sic" => Ok(Scenario::HdFdSic),
            other => Err(Error::ConfigParse(format!(
                "unknown scenario {other:?}; expected hd, hd+fd, or hd+fd+sic"
            ))),
        }
    }
}

// ============================================================================
// Sections
// ============================================================================

/// `[cell]`: square cell geometry and hotspot disk size, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellSection {
    pub side_m: f64,
    pub r_min_m: f64,
    pub hotspot_radius_m: f64,
}

impl Default for CellSection {
    fn default() -> Self {
        CellSection { side_m: 40.0, r_min_m: 5.0, hotspot_radius_m: 10.0 }
    }
}

/// `[users]`: population size and number of hotspots (0 = uniform drop).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UsersSection {
    pub k: usize,
    pub n_h: usize,
}

impl Default for UsersSection {
    fn default() -> Self {
        UsersSection { k: 6, n_h: 0 }
    }
}

/// `[channel]`: self-interference cancellation, shadowing, and link classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    /// Cancellation capability in dB: the residual self-interference channel
    /// gain is `10^(-psi_cancellation_db / 10)`.
    pub psi_cancellation_db: f64,
    pub shadow_sigma_los_db: f64,
    pub shadow_sigma_nlos_db: f64,
    pub bs_user_los: bool,
    pub user_user_los: bool,
    pub min_link_distance_m: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            psi_cancellation_db: 100.0,
            shadow_sigma_los_db: 3.0,
            shadow_sigma_nlos_db: 4.0,
            bs_user_los: false,
            user_user_los: false,
            min_link_distance_m: 1.0,
        }
    }
}

/// `[radio]`: bandwidth, noise, and the power-cap calibration rule (power
/// caps give `target_snr_db` at `calibration_distance_m` before shadowing).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioSection {
    pub bandwidth_hz: f64,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_bs_db: f64,
    pub noise_figure_user_db: f64,
    pub target_snr_db: f64,
    pub calibration_distance_m: f64,
}

impl Default for RadioSection {
    fn default() -> Self {
        RadioSection {
            bandwidth_hz: 1e7,
            noise_density_dbm_hz: -174.0,
            noise_figure_bs_db: 8.0,
            noise_figure_user_db: 9.0,
            target_snr_db: 5.0,
            // Cell-corner distance of the default 40 m cell.
            calibration_distance_m: 40.0 * std::f64::consts::SQRT_2,
        }
    }
}

/// `[utility]`: downlink priority and optional per-user temporal weights
/// (both lists or neither; absent means equal shares `1 / 2K`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UtilitySection {
    pub rho: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ul_weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dl_weights: Option<Vec<f64>>,
}

impl Default for UtilitySection {
    fn default() -> Self {
        UtilitySection { rho: 0.5, ul_weights: None, dl_weights: None }
    }
}

/// `[rate]`: rate model selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RateSection {
    pub model: RateModelKind,
    /// Staircase table file; absent means the bundled table.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RateModelKind {
    #[default]
    Shannon,
    Staircase,
}

/// `[scenario]`: enabled communication modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub modes: Scenario,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection { modes: Scenario::HdFdSic }
    }
}

/// `[run]`: Monte Carlo extent and seeding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub drops: usize,
    pub slots_per_drop: usize,
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { drops: 500, slots_per_drop: 2000, seed: 1 }
    }
}

// ============================================================================
// The full configuration
// ============================================================================

/// Complete experiment configuration. `Default` is the reference setup; a
/// TOML document overrides only what it mentions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub cell: CellSection,
    pub users: UsersSection,
    pub channel: ChannelSection,
    pub radio: RadioSection,
    pub utility: UtilitySection,
    pub rate: RateSection,
    pub power: PowerConfig,
    pub scenario: ScenarioSection,
    pub scheduler: SchedulerParams,
    pub run: RunSection,
}

impl SimConfig {
    /// Parses and validates a TOML document. An empty document yields the
    /// defaults; unknown keys and out-of-range values are errors.
    pub fn from_toml_str(s: &str) -> Result<Self, Error> {
        let cfg: SimConfig =
            toml::from_str(s).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes the configuration back to TOML (round-trips through
    /// [`SimConfig::from_toml_str`]).
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    /// Checks every field against its documented range. Error messages name
    /// the offending key (for example `utility.rho`).
    pub fn validate(&self) -> Result<(), Error> {
        let c = &self.cell;
        if !(c.side_m.is_finite() && c.side_m > 0.0) {
            return Err(Error::range("cell.side_m", "must be a positive length"));
        }
        if !(c.r_min_m.is_finite() && c.r_min_m >= 0.0 && c.r_min_m < c.side_m / 2.0) {
            return Err(Error::range("cell.r_min_m", "must be in [0, side_m / 2)"));
        }
        if self.users.k == 0 {
            return Err(Error::range("users.k", "at least one user required"));
        }
        if self.users.n_h > self.users.k {
            return Err(Error::range("users.n_h", "more hotspots than users"));
        }
        if self.users.n_h > 0
            && !(c.hotspot_radius_m > 0.0 && c.hotspot_radius_m <= c.side_m / 2.0)
        {
            return Err(Error::range(
                "cell.hotspot_radius_m",
                "must be in (0, side_m / 2] when hotspots are used",
            ));
        }

        let ch = &self.channel;
        if !ch.psi_cancellation_db.is_finite() {
            return Err(Error::range("channel.psi_cancellation_db", "must be finite"));
        }
        if !(ch.shadow_sigma_los_db.is_finite() && ch.shadow_sigma_los_db >= 0.0) {
            return Err(Error::range("channel.shadow_sigma_los_db", "must be >= 0"));
        }
        if !(ch.shadow_sigma_nlos_db.is_finite() && ch.shadow_sigma_nlos_db >= 0.0) {
            return Err(Error::range("channel.shadow_sigma_nlos_db", "must be >= 0"));
        }
        if !(ch.min_link_distance_m.is_finite() && ch.min_link_distance_m > 0.0) {
            return Err(Error::range("channel.min_link_distance_m", "must be > 0"));
        }

        let r = &self.radio;
        if !(r.bandwidth_hz.is_finite() && r.bandwidth_hz > 0.0) {
            return Err(Error::range("radio.bandwidth_hz", "must be > 0"));
        }
        if !r.noise_density_dbm_hz.is_finite() {
            return Err(Error::range("radio.noise_density_dbm_hz", "must be finite"));
        }
        if !r.noise_figure_bs_db.is_finite() || !r.noise_figure_user_db.is_finite() {
            return Err(Error::range("radio.noise_figure_bs_db", "must be finite"));
        }
        if !r.target_snr_db.is_finite() {
            return Err(Error::range("radio.target_snr_db", "must be finite"));
        }
        if !(r.calibration_distance_m.is_finite() && r.calibration_distance_m > 0.0) {
            return Err(Error::range("radio.calibration_distance_m", "must be > 0"));
        }

        if !(0.0..=1.0).contains(&self.utility.rho) {
            return Err(Error::range("utility.rho", "must be in [0, 1]"));
        }
        let weights = self.utility_weights()?;
        if weights.k() != self.users.k {
            return Err(Error::range(
                "utility.ul_weights",
                format!("weight lists must have users.k = {} entries", self.users.k),
            ));
        }

        if self.power.strategy == StrategyKind::Grid && self.power.grid_levels < 2 {
            return Err(Error::range("power.grid_levels", "grid search needs >= 2 levels"));
        }

        let s = &self.scheduler;
        if !(s.epsilon.is_finite() && s.epsilon >= 0.0) {
            return Err(Error::range("scheduler.epsilon", "must be >= 0"));
        }
        if !(s.deficit_bound.is_finite() && s.deficit_bound > 0.0) {
            return Err(Error::range("scheduler.deficit_bound", "must be > 0"));
        }

        if self.run.drops == 0 {
            return Err(Error::range("run.drops", "at least one drop required"));
        }
        if self.run.slots_per_drop == 0 {
            return Err(Error::range("run.slots_per_drop", "at least one slot required"));
        }
        Ok(())
    }

    /// Residual self-interference channel gain (linear).
    pub fn psi_linear(&self) -> f64 {
        db_to_linear(-self.channel.psi_cancellation_db)
    }

    /// Downlink priority and temporal weights (equal when not configured).
    pub fn utility_weights(&self) -> Result<UtilityWeights, Error> {
        match (&self.utility.ul_weights, &self.utility.dl_weights) {
            (None, None) => UtilityWeights::equal(self.utility.rho, self.users.k),
            (Some(u), Some(d)) => UtilityWeights::new(self.utility.rho, u.clone(), d.clone())
                .map_err(|e| match e {
                    Error::Param { reason, .. } => Error::range("utility.ul_weights", reason),
                    other => other,
                }),
            _ => Err(Error::range(
                "utility.ul_weights",
                "ul_weights and dl_weights must be configured together",
            )),
        }
    }

    /// Static channel-model parameters.
    pub fn channel_params(&self) -> Result<ChannelParams, Error> {
        let geometry = CellGeometry::new(self.cell.side_m, self.cell.r_min_m)?;
        let class = |los: bool| if los { LinkClass::Los } else { LinkClass::Nlos };
        Ok(ChannelParams {
            geometry,
            hotspot_radius_m: self.cell.hotspot_radius_m,
            shadowing_sigma_los_db: self.channel.shadow_sigma_los_db,
            shadowing_sigma_nlos_db: self.channel.shadow_sigma_nlos_db,
            bs_user_class: class(self.channel.bs_user_los),
            user_user_class: class(self.channel.user_user_los),
            min_link_distance_m: self.channel.min_link_distance_m,
        })
    }

    /// Noise floors and power caps derived from the radio section.
    pub fn calibration(&self) -> Calibration {
        calibrate(&CalibrationParams {
            bandwidth_hz: self.radio.bandwidth_hz,
            noise_density_dbm_hz: self.radio.noise_density_dbm_hz,
            noise_figure_bs_db: self.radio.noise_figure_bs_db,
            noise_figure_user_db: self.radio.noise_figure_user_db,
            target_snr_db: self.radio.target_snr_db,
            distance_m: self.radio.calibration_distance_m,
        })
    }

    /// The configured rate model; loads the staircase table when needed.
    pub fn rate_model(&self) -> Result<RateModel, Error> {
        match self.rate.model {
            RateModelKind::Shannon => Ok(RateModel::Shannon),
            RateModelKind::Staircase => match &self.rate.table_path {
                None => Ok(RateModel::Staircase(Staircase::bundled())),
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                        path: path.clone(),
                        source,
                    })?;
                    Ok(RateModel::Staircase(Staircase::parse(&text)?))
                }
            },
        }
    }

    pub fn mode_set(&self) -> ModeSet {
        self.scenario.modes.mode_set()
    }
}

// ============================================================================
// Tests
// ============================================================================
