//! Single-cell full-duplex scheduling, power control, and simulation.
//!
//! A base station with self-interference cancellation serves K users. Each
//! slot it either schedules one user half-duplex (uplink or downlink) or
//! pairs an uplink user with a downlink user and operates full duplex,
//! optionally letting the downlink user cancel the uplink signal it decodes.
//! This crate provides:
//!
//! * [`channel`]: cell geometry, user placement, pathloss/shadowing/fading,
//!   and power/noise calibration,
//! * [`rates`]: SINR expressions for the three modes and the Shannon or
//!   staircase rate models,
//! * [`power`]: per-pair transmit power optimizers,
//! * [`scheduler`]: the temporally fair joint mode/pairing/power scheduler,
//! * [`sim`]: Monte Carlo experiment harness over random user drops,
//! * [`config`]: TOML-backed experiment configuration.

pub mod channel;
pub mod config;
pub mod error;
pub mod mat;
pub mod power;
pub mod rates;
pub mod scheduler;
pub mod sim;
pub mod units;

pub use channel::{
    calibrate, pathloss_db, place_users, sample_large_scale, sample_slot_gains, Calibration,
    CalibrationParams, CellGeometry, ChannelParams, LargeScaleGains, LinkClass, LinkGains, Point,
    UserLayout,
};
pub use config::{Scenario, SimConfig};
pub use error::Error;
pub use power::{
    fd_candidates, grid_search, sic_candidates, solve_fd, solve_sic, CandidateSet, CandidateTag,
    PairContext, PowerConfig, PowerSolution, StrategyKind,
};
pub use rates::{
    network_utility, rate, sinr_fd, sinr_hd, sinr_sic, Direction, Mode, NoisePair, PairGains,
    PowerLimits, PowerPair, RateModel, SinrPair, Staircase, UtilityWeights,
};
pub use scheduler::{
    build_directional_utilities, evaluate_slot, evaluate_virtual_user, hd_core_pick,
    schedule_slot, AirtimeReport, DirectionalUtilities, FairnessState, ModeDecision, ModeSet,
    ScheduleOutcome, SchedulerParams, SlotDecisions, VirtualUser,
};
pub use sim::{
    drop_seed, gain_vs_baseline, run_drop, run_experiment, DropMetrics, Metrics, MetricsSummary,
    ModeHistogram, SimSetup,
};
