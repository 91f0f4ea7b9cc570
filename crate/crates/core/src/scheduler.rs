//! Temporally fair joint mode, pairing, and power scheduling.
//!
//! Each slot the scheduler considers every virtual user: each user alone in
//! uplink or downlink (half duplex), and every ordered pair (uplink i,
//! downlink j) operating full duplex with or without uplink-signal
//! cancellation at the downlink user. Powers are optimized per virtual user,
//! each directional user is credited with the best utility any virtual user
//! containing it achieves, and a credit-based half-duplex core picks one
//! directional user per slot so that long-run temporal shares converge to
//! the configured weights. The picked user's best virtual user is scheduled.

use serde::{Deserialize, Serialize};

use crate::channel::LinkGains;
use crate::error::Error;
use crate::power::{solve_fd, solve_sic, PairContext, PowerConfig};
use crate::rates::{
    network_utility, rate, sinr_fd, sinr_hd, sinr_sic, Direction, Mode, NoisePair, PairGains,
    PowerLimits, PowerPair, RateModel, UtilityWeights,
};

// ============================================================================
// Mode sets and virtual users
// ============================================================================

/// Which communication modes the scheduler may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSet {
    pub hd: bool,
    pub fd: bool,
    pub sic: bool,
}

impl ModeSet {
    pub const HD_ONLY: ModeSet = ModeSet { hd: true, fd: false, sic: false };
    pub const HD_FD: ModeSet = ModeSet { hd: true, fd: true, sic: false };
    pub const ALL: ModeSet = ModeSet { hd: true, fd: true, sic: true };

    pub fn any(&self) -> bool {
        self.hd || self.fd || self.sic
    }

    /// True when ordered pairs are schedulable at all.
    pub fn pairs(&self) -> bool {
        self.fd || self.sic
    }
}

/// One schedulable unit: a user alone in one direction, or an ordered
/// (uplink, downlink) pair of distinct users.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VirtualUser {
    ul: Option<usize>,
    dl: Option<usize>,
}

impl VirtualUser {
    /// At least one side must be present; a pair must use distinct users.
    pub fn new(ul: Option<usize>, dl: Option<usize>) -> Result<Self, Error> {
        match (ul, dl) {
            (None, None) => Err(Error::param("ul", "virtual user with no sides")),
            (Some(i), Some(j)) if i == j => Err(Error::param(
                "dl",
                format!("user {i} cannot be scheduled in both directions at once"),
            )),
            _ => Ok(VirtualUser { ul, dl }),
        }
    }

    pub fn ul_only(i: usize) -> Self {
        VirtualUser { ul: Some(i), dl: None }
    }

    pub fn dl_only(j: usize) -> Self {
        VirtualUser { ul: None, dl: Some(j) }
    }

    pub fn pair(i: usize, j: usize) -> Result<Self, Error> {
        VirtualUser::new(Some(i), Some(j))
    }

    pub fn ul(&self) -> Option<usize> {
        self.ul
    }

    pub fn dl(&self) -> Option<usize> {
        self.dl
    }

    pub fn is_pair(&self) -> bool {
        self.ul.is_some() && self.dl.is_some()
    }
}

/// The scheduler's verdict for one virtual user: the best mode, its
/// optimized powers, and the weighted utility it would contribute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDecision {
    pub vu: VirtualUser,
    pub mode: Mode,
    pub powers: PowerPair,
    pub utility_q: f64,
}

// ============================================================================
// Virtual-user evaluation
// ============================================================================

fn pair_context(gains: &LinkGains, i: usize, j: usize, limits: PowerLimits, rho: f64) -> PairContext {
    PairContext {
        gains: PairGains {
            g_i: gains.g[i],
            g_j: gains.g[j],
            h_ij: gains.h.get(i, j),
            psi: gains.psi,
        },
        noise: gains.noise,
        limits,
        rho,
    }
}

/// Rates (bps/Hz) a decision achieves, recomputed from its mode and powers.
fn decision_rates(gains: &LinkGains, model: &RateModel, dec: &ModeDecision) -> (f64, f64) {
    let NoisePair { n_u, n_d } = gains.noise;
    let s = match dec.mode {
        Mode::HdUl => {
            let i = dec.vu.ul().expect("uplink half-duplex decision has an uplink user");
            sinr_hd(Direction::Ul, gains.g[i], dec.powers.p_u, n_u)
        }
        Mode::HdDl => {
            let j = dec.vu.dl().expect("downlink half-duplex decision has a downlink user");
            sinr_hd(Direction::Dl, gains.g[j], dec.powers.p_d, n_d)
        }
        Mode::Fd | Mode::Sic => {
            let (i, j) = (
                dec.vu.ul().expect("pair decision has an uplink user"),
                dec.vu.dl().expect("pair decision has a downlink user"),
            );
            let pg = PairGains {
                g_i: gains.g[i],
                g_j: gains.g[j],
                h_ij: gains.h.get(i, j),
                psi: gains.psi,
            };
            match dec.mode {
                Mode::Fd => sinr_fd(&pg, dec.powers, gains.noise),
                _ => sinr_sic(&pg, dec.powers, gains.noise),
            }
        }
    };
    (rate(model, s.ul), rate(model, s.dl))
}

/// Picks the best mode and powers for one virtual user.
///
/// One-sided virtual users transmit at full power in their direction and
/// require half duplex to be enabled. Pairs are evaluated under every
/// enabled pair mode (full duplex, and full duplex with cancellation); the
/// higher utility wins and exact ties keep the plain full-duplex mode. A
/// virtual user none of the enabled modes can serve is an error.
pub fn evaluate_virtual_user(
    vu: VirtualUser,
    gains: &LinkGains,
    limits: PowerLimits,
    rho: f64,
    model: &RateModel,
    power_cfg: &PowerConfig,
    modes: ModeSet,
) -> Result<ModeDecision, Error> {
    if !modes.any() {
        return Err(Error::param("modes", "no communication modes enabled"));
    }
    let NoisePair { n_u, n_d } = gains.noise;
    match (vu.ul(), vu.dl()) {
        (Some(i), None) => {
            if !modes.hd {
                return Err(Error::param("modes", "half duplex disabled for a one-sided user"));
            }
            let powers = PowerPair { p_u: limits.p_max_u, p_d: 0.0 };
            let s = sinr_hd(Direction::Ul, gains.g[i], powers.p_u, n_u);
            let utility_q = network_utility(rho, rate(model, s.ul), rate(model, s.dl));
            Ok(ModeDecision { vu, mode: Mode::HdUl, powers, utility_q })
        }
        (None, Some(j)) => {
            if !modes.hd {
                return Err(Error::param("modes", "half duplex disabled for a one-sided user"));
            }
            let powers = PowerPair { p_u: 0.0, p_d: limits.p_max_d };
            let s = sinr_hd(Direction::Dl, gains.g[j], powers.p_d, n_d);
            let utility_q = network_utility(rho, rate(model, s.ul), rate(model, s.dl));
            Ok(ModeDecision { vu, mode: Mode::HdDl, powers, utility_q })
        }
        (Some(i), Some(j)) => {
            if !modes.pairs() {
                return Err(Error::param(
                    "modes",
                    "pair scheduling requires full duplex or cancellation mode",
                ));
            }
            let ctx = pair_context(gains, i, j, limits, rho);
            let mut best: Option<(Mode, crate::power::PowerSolution)> = None;
            if modes.fd {
                best = Some((Mode::Fd, solve_fd(&ctx, model, power_cfg)));
            }
            if modes.sic {
                let sic = solve_sic(&ctx, model, power_cfg);
                best = match best {
                    Some((m, cur)) if cur.utility >= sic.utility => Some((m, cur)),
                    _ => Some((Mode::Sic, sic)),
                };
            }
            let (mode, sol) = best.expect("at least one pair mode enabled");
            Ok(ModeDecision { vu, mode, powers: sol.powers, utility_q: sol.utility })
        }
        (None, None) => unreachable!("VirtualUser construction forbids empty sides"),
    }
}

/// Best decisions for every virtual user of one slot. One-sided entries are
/// `None` when half duplex is disabled; `pairs` is row-major by (uplink,
/// downlink) index with an empty diagonal.
#[derive(Debug, Clone)]
pub struct SlotDecisions {
    k: usize,
    pub hd_ul: Vec<Option<ModeDecision>>,
    pub hd_dl: Vec<Option<ModeDecision>>,
    pub pairs: Vec<Option<ModeDecision>>,
}

impl SlotDecisions {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<&ModeDecision> {
        self.pairs[i * self.k + j].as_ref()
    }
}

/// Evaluates every virtual user of a slot.
///
/// Requires a mode set that can serve each direction of each user: with HD
/// disabled there must be at least two users so everyone can be paired.
pub fn evaluate_slot(
    gains: &LinkGains,
    limits: PowerLimits,
    rho: f64,
    model: &RateModel,
    power_cfg: &PowerConfig,
    modes: ModeSet,
) -> Result<SlotDecisions, Error> {
    if !modes.any() {
        return Err(Error::param("modes", "no communication modes enabled"));
    }
    let k = gains.k();
    if k == 0 {
        return Err(Error::param("gains", "no users"));
    }
    if !modes.hd && k < 2 {
        return Err(Error::param(
            "modes",
            "half duplex disabled and fewer than two users: nothing is schedulable",
        ));
    }

    let mut out = SlotDecisions {
        k,
        hd_ul: vec![None; k],
        hd_dl: vec![None; k],
        pairs: vec![None; k * k],
    };
    if modes.hd {
        for i in 0..k {
            out.hd_ul[i] = Some(evaluate_virtual_user(
                VirtualUser::ul_only(i),
                gains,
                limits,
                rho,
                model,
                power_cfg,
                modes,
            )?);
            out.hd_dl[i] = Some(evaluate_virtual_user(
                VirtualUser::dl_only(i),
                gains,
                limits,
                rho,
                model,
                power_cfg,
                modes,
            )?);
        }
    }
    if modes.pairs() && k >= 2 {
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let vu = VirtualUser::pair(i, j).expect("i != j");
                out.pairs[i * k + j] =
                    Some(evaluate_virtual_user(vu, gains, limits, rho, model, power_cfg, modes)?);
            }
        }
    }
    Ok(out)
}

// ============================================================================
// Directional utilities
// ============================================================================

/// Per-directional-user scheduling utilities: the best weighted utility any
/// virtual user containing that directional user achieves, and the partner
/// (other side of the pair) realizing it, `None` when alone is best.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalUtilities {
    pub q_ul: Vec<f64>,
    pub partner_ul: Vec<Option<usize>>,
    pub q_dl: Vec<f64>,
    pub partner_dl: Vec<Option<usize>>,
}

/// Reduces a slot's decisions to directional utilities.
///
/// Candidates are scanned alone-first then by ascending partner index, and
/// only strictly larger utilities displace the incumbent, so ties prefer
/// being alone and then the lowest partner.
pub fn build_directional_utilities(decisions: &SlotDecisions) -> DirectionalUtilities {
    let k = decisions.k();
    let mut q_ul = vec![f64::NEG_INFINITY; k];
    let mut partner_ul = vec![None; k];
    let mut q_dl = vec![f64::NEG_INFINITY; k];
    let mut partner_dl = vec![None; k];

    for i in 0..k {
        if let Some(d) = &decisions.hd_ul[i] {
            q_ul[i] = d.utility_q;
        }
        if let Some(d) = &decisions.hd_dl[i] {
            q_dl[i] = d.utility_q;
        }
    }
    for i in 0..k {
        for j in 0..k {
            if let Some(d) = decisions.pair(i, j) {
                if d.utility_q > q_ul[i] {
                    q_ul[i] = d.utility_q;
                    partner_ul[i] = Some(j);
                }
                if d.utility_q > q_dl[j] {
                    q_dl[j] = d.utility_q;
                    partner_dl[j] = Some(i);
                }
            }
        }
    }

    DirectionalUtilities { q_ul, partner_ul, q_dl, partner_dl }
}

// ============================================================================
// Temporally fair core
// ============================================================================

/// Tuning knobs of the fairness core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulerParams {
    /// Credit step. The core's opportunism metric is each directional user's
    /// utility divided by that user's own running mean utility, so the metric
    /// hovers around 1 and epsilon is dimensionless.
    pub epsilon: f64,
    /// Hard bound on the temporal-share deficit, in slots.
    pub deficit_bound: f64,
}

impl Default for SchedulerParams {
    fn default() -> Self {
        SchedulerParams { epsilon: 0.01, deficit_bound: 50.0 }
    }
}

/// Per-drop scheduler state: credits, pick and activity counters.
#[derive(Debug, Clone)]
pub struct FairnessState {
    k: usize,
    slot_count: u64,
    credit_ul: Vec<f64>,
    credit_dl: Vec<f64>,
    picks_ul: Vec<u64>,
    picks_dl: Vec<u64>,
    active_ul: Vec<u64>,
    active_dl: Vec<u64>,
    /// Per-user cumulative sums of observed directional utilities; each
    /// user's running mean normalizes its own opportunism metric.
    q_sum_ul: Vec<f64>,
    q_sum_dl: Vec<f64>,
}

impl FairnessState {
    pub fn new(k: usize) -> Result<Self, Error> {
        if k == 0 {
            return Err(Error::param("k", "at least one user required"));
        }
        Ok(FairnessState {
            k,
            slot_count: 0,
            credit_ul: vec![0.0; k],
            credit_dl: vec![0.0; k],
            picks_ul: vec![0; k],
            picks_dl: vec![0; k],
            active_ul: vec![0; k],
            active_dl: vec![0; k],
            q_sum_ul: vec![0.0; k],
            q_sum_dl: vec![0.0; k],
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn slot_count(&self) -> u64 {
        self.slot_count
    }

    pub fn picks(&self, direction: Direction, user: usize) -> u64 {
        match direction {
            Direction::Ul => self.picks_ul[user],
            Direction::Dl => self.picks_dl[user],
        }
    }

    pub fn active(&self, direction: Direction, user: usize) -> u64 {
        match direction {
            Direction::Ul => self.active_ul[user],
            Direction::Dl => self.active_dl[user],
        }
    }

    /// Fraction of slots in which the directional user was the picked owner.
    pub fn pick_share(&self, direction: Direction, user: usize) -> f64 {
        if self.slot_count == 0 {
            return 0.0;
        }
        self.picks(direction, user) as f64 / self.slot_count as f64
    }

    /// Fraction of slots in which the directional user was transmitting or
    /// receiving, whether as owner or as a pairing partner.
    pub fn active_share(&self, direction: Direction, user: usize) -> f64 {
        if self.slot_count == 0 {
            return 0.0;
        }
        self.active(direction, user) as f64 / self.slot_count as f64
    }

    /// Snapshot of temporal shares after at least one scheduled slot.
    pub fn airtime_report(&self) -> Result<AirtimeReport, Error> {
        if self.slot_count == 0 {
            return Err(Error::param("slot_count", "no slots scheduled yet"));
        }
        let share = |c: &[u64]| c.iter().map(|&x| x as f64 / self.slot_count as f64).collect();
        Ok(AirtimeReport {
            slots: self.slot_count,
            picked_ul: share(&self.picks_ul),
            picked_dl: share(&self.picks_dl),
            active_ul: share(&self.active_ul),
            active_dl: share(&self.active_dl),
        })
    }
}

/// Temporal shares per directional user (fractions of all slots).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AirtimeReport {
    pub slots: u64,
    pub picked_ul: Vec<f64>,
    pub picked_dl: Vec<f64>,
    pub active_ul: Vec<f64>,
    pub active_dl: Vec<f64>,
}

/// Picks this slot's owning directional user and updates fairness state.
///
/// The opportunism metric is each directional user's utility divided by the
/// running mean of its own observed utilities. Measuring every user against
/// its own typical value makes the metric dimensionless and invariant to
/// rescaling any user's utilities by a constant: with asymmetric priorities
/// the weighted utility scales the uplink and downlink blocks differently,
/// and an unnormalized metric would systematically hand the higher-weighted
/// block the lion's share of its fading peaks, skewing delivered traffic far
/// beyond what mode selection and power optimization already encode.
///
/// The owner is the directional user maximizing metric plus accumulated
/// credit (first maximum wins); credits then move by the step times (weight
/// minus picked-indicator), so underserved users catch up. When any user's
/// deficit `weight * slots - picks` exceeds the hard bound, the most-owed
/// user is forced regardless of utility, which caps how far shares can drift
/// from the weights on any horizon.
pub fn hd_core_pick(
    state: &mut FairnessState,
    q: &DirectionalUtilities,
    weights: &UtilityWeights,
    params: &SchedulerParams,
) -> Result<(Direction, usize), Error> {
    let k = state.k;
    if q.q_ul.len() != k || q.q_dl.len() != k {
        return Err(Error::param("q", "directional utilities sized for a different cell"));
    }
    if weights.k() != k {
        return Err(Error::param("weights", "weights sized for a different cell"));
    }

    let t_next = (state.slot_count + 1) as f64;
    let dir_of = |d: usize| if d < k { Direction::Ul } else { Direction::Dl };
    let weight = |d: usize| if d < k { weights.w_ul()[d] } else { weights.w_dl()[d - k] };
    let q_of = |d: usize| if d < k { q.q_ul[d] } else { q.q_dl[d - k] };
    let picks_of = |state: &FairnessState, d: usize| {
        if d < k { state.picks_ul[d] } else { state.picks_dl[d - k] }
    };
    let credit_of = |state: &FairnessState, d: usize| {
        if d < k { state.credit_ul[d] } else { state.credit_dl[d - k] }
    };

    // Fold this slot's utilities into the per-user running means first, so
    // the metric is well defined from the very first slot (where it is 1).
    for d in 0..2 * k {
        let v = q_of(d);
        let v = if v.is_finite() { v } else { 0.0 };
        if d < k {
            state.q_sum_ul[d] += v;
        } else {
            state.q_sum_dl[d - k] += v;
        }
    }
    let q_sum_of = |state: &FairnessState, d: usize| {
        if d < k { state.q_sum_ul[d] } else { state.q_sum_dl[d - k] }
    };
    let metric = |state: &FairnessState, d: usize| {
        let v = q_of(d);
        let sum = q_sum_of(state, d);
        // A zero sum means the user's utility has been zero every slot so
        // far; credits alone drive its picks then.
        if v.is_finite() && sum > 0.0 { v * t_next / sum } else { 0.0 }
    };

    // Hard deficit override first.
    let mut forced: Option<(usize, f64)> = None;
    for d in 0..2 * k {
        let owed = weight(d) * t_next - picks_of(state, d) as f64;
        if owed > params.deficit_bound && forced.map_or(true, |(_, best)| owed > best) {
            forced = Some((d, owed));
        }
    }
    let picked = match forced {
        Some((d, _)) => d,
        None => {
            let mut best = 0usize;
            for d in 1..2 * k {
                if metric(state, d) + credit_of(state, d)
                    > metric(state, best) + credit_of(state, best)
                {
                    best = d;
                }
            }
            best
        }
    };

    state.slot_count += 1;
    for d in 0..2 * k {
        let delta = params.epsilon * (weight(d) - if d == picked { 1.0 } else { 0.0 });
        if d < k {
            state.credit_ul[d] += delta;
        } else {
            state.credit_dl[d - k] += delta;
        }
    }
    if picked < k {
        state.picks_ul[picked] += 1;
    } else {
        state.picks_dl[picked - k] += 1;
    }

    Ok((dir_of(picked), if picked < k { picked } else { picked - k }))
}

// ============================================================================
// Full slot scheduling
// ============================================================================

/// Everything one scheduled slot produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleOutcome {
    /// The scheduled virtual user, mode, and powers.
    pub decision: ModeDecision,
    pub picked_direction: Direction,
    pub picked_user: usize,
    /// Achieved rates this slot (bps/Hz).
    pub r_ul: f64,
    pub r_dl: f64,
    /// Weighted network utility of the scheduled rates.
    pub utility: f64,
}

/// Runs one full scheduling slot: evaluates all virtual users, lets the
/// fairness core pick the owning directional user, and schedules that
/// user's best virtual user. Activity counters cover both the owner and,
/// for pairs, the partner.
pub fn schedule_slot(
    state: &mut FairnessState,
    gains: &LinkGains,
    limits: PowerLimits,
    weights: &UtilityWeights,
    model: &RateModel,
    power_cfg: &PowerConfig,
    modes: ModeSet,
    params: &SchedulerParams,
) -> Result<ScheduleOutcome, Error> {
    if gains.k() != state.k() {
        return Err(Error::param("gains", "channel sized for a different cell"));
    }
    let rho = weights.rho();
    let decisions = evaluate_slot(gains, limits, rho, model, power_cfg, modes)?;
    let q = build_directional_utilities(&decisions);
    let (direction, user) = hd_core_pick(state, &q, weights, params)?;

    let decision = match direction {
        Direction::Ul => match q.partner_ul[user] {
            Some(j) => *decisions.pair(user, j).expect("partner came from this table"),
            None => decisions.hd_ul[user].expect("alone is only best when HD is enabled"),
        },
        Direction::Dl => match q.partner_dl[user] {
            Some(i) => *decisions.pair(i, user).expect("partner came from this table"),
            None => decisions.hd_dl[user].expect("alone is only best when HD is enabled"),
        },
    };

    if let Some(i) = decision.vu.ul() {
        state.active_ul[i] += 1;
    }
    if let Some(j) = decision.vu.dl() {
        state.active_dl[j] += 1;
    }

    let (r_ul, r_dl) = decision_rates(gains, model, &decision);
    Ok(ScheduleOutcome {
        decision,
        picked_direction: direction,
        picked_user: user,
        r_ul,
        r_dl,
        utility: network_utility(rho, r_ul, r_dl),
    })
}

// ============================================================================
// Tests
// ============================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::SquareMat;
    use crate::units::db_to_linear;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const NOISE: NoisePair = NoisePair { n_u: 2.512e-13, n_d: 3.162e-13 };
    const LIMITS: PowerLimits = PowerLimits { p_max_u: 1.733e-3, p_max_d: 2.182e-3 };

    fn gains_from(g: Vec<f64>, h_entries: &[(usize, usize, f64)], psi: f64) -> LinkGains {
        let k = g.len();
        let mut h = SquareMat::filled(k, 0.0);
        for &(i, j, v) in h_entries {
            h.set(i, j, v);
            h.set(j, i, v);
        }
        LinkGains { g, h, psi, noise: NOISE }
    }

    fn random_gains(k: usize, rng: &mut impl Rng) -> LinkGains {
        let g = (0..k).map(|_| db_to_linear(rng.random_range(-110.0..-60.0))).collect();
        let mut h = SquareMat::filled(k, 0.0);
        for i in 0..k {
            for j in (i + 1)..k {
                let v = db_to_linear(rng.random_range(-120.0..-50.0));
                h.set(i, j, v);
                h.set(j, i, v);
            }
        }
        LinkGains { g, h, psi: db_to_linear(-100.0), noise: NOISE }
    }

    fn cfg() -> PowerConfig {
        PowerConfig::default()
    }

    // ------------------------------------------------ virtual users

    #[test]
    fn virtual_user_validation() {
        assert!(VirtualUser::new(None, None).is_err());
        assert!(VirtualUser::new(Some(1), Some(1)).is_err());
        let vu = VirtualUser::new(Some(0), Some(2)).unwrap();
        assert!(vu.is_pair());
        assert_eq!(vu.ul(), Some(0));
        assert_eq!(vu.dl(), Some(2));
        assert!(!VirtualUser::ul_only(3).is_pair());
    }

    #[test]
    fn one_sided_users_get_full_power_half_duplex() {
        let gains = gains_from(vec![1e-9, 2e-9], &[(0, 1, 1e-8)], 1e-10);
        let model = RateModel::Shannon;

        let d = evaluate_virtual_user(
            VirtualUser::ul_only(0), &gains, LIMITS, 0.3, &model, &cfg(), ModeSet::ALL,
        )
        .unwrap();
        assert_eq!(d.mode, Mode::HdUl);
        assert_eq!(d.powers, PowerPair { p_u: LIMITS.p_max_u, p_d: 0.0 });
        let want = 0.7 * (1.0 + LIMITS.p_max_u * 1e-9 / NOISE.n_u).log2();
        assert_relative_eq!(d.utility_q, want, max_relative = 1e-12);

        let d = evaluate_virtual_user(
            VirtualUser::dl_only(1), &gains, LIMITS, 0.3, &model, &cfg(), ModeSet::ALL,
        )
        .unwrap();
        assert_eq!(d.mode, Mode::HdDl);
        assert_eq!(d.powers, PowerPair { p_u: 0.0, p_d: LIMITS.p_max_d });
        let want = 0.3 * (1.0 + LIMITS.p_max_d * 2e-9 / NOISE.n_d).log2();
        assert_relative_eq!(d.utility_q, want, max_relative = 1e-12);
    }

    #[test]
    fn perfect_isolation_prefers_plain_full_duplex_at_full_power() {
        // No self-interference and no cross link: FD is clean on both sides
        // while cancellation has nothing to decode from (uplink rate 0).
        let gains = gains_from(vec![1e-9, 2e-9], &[(0, 1, 0.0)], 0.0);
        let d = evaluate_virtual_user(
            VirtualUser::pair(0, 1).unwrap(),
            &gains,
            LIMITS,
            0.5,
            &RateModel::Shannon,
            &cfg(),
            ModeSet::ALL,
        )
        .unwrap();
        assert_eq!(d.mode, Mode::Fd);
        assert_eq!(d.powers, PowerPair { p_u: LIMITS.p_max_u, p_d: LIMITS.p_max_d });
    }

    #[test]
    fn strong_cross_link_prefers_cancellation() {
        // The downlink user hears the uplink user loud and clear: decoding
        // and cancelling it frees the downlink entirely, while plain full
        // duplex would drown the downlink in cross interference.
        let gains = gains_from(vec![1e-9, 1e-9], &[(0, 1, 1e-6)], 1e-10);
        let d = evaluate_virtual_user(
            VirtualUser::pair(0, 1).unwrap(),
            &gains,
            LIMITS,
            0.5,
            &RateModel::Shannon,
            &cfg(),
            ModeSet::ALL,
        )
        .unwrap();
        assert_eq!(d.mode, Mode::Sic);
    }

    #[test]
    fn mode_set_requirements() {
        let gains = gains_from(vec![1e-9, 2e-9], &[(0, 1, 1e-8)], 1e-10);
        let model = RateModel::Shannon;
        let none = ModeSet { hd: false, fd: false, sic: false };
        let pair_only = ModeSet { hd: false, fd: true, sic: true };

        let one_sided = VirtualUser::ul_only(0);
        let pair = VirtualUser::pair(0, 1).unwrap();
        assert!(evaluate_virtual_user(one_sided, &gains, LIMITS, 0.5, &model, &cfg(), none).is_err());
        assert!(
            evaluate_virtual_user(one_sided, &gains, LIMITS, 0.5, &model, &cfg(), pair_only)
                .is_err()
        );
        assert!(
            evaluate_virtual_user(pair, &gains, LIMITS, 0.5, &model, &cfg(), ModeSet::HD_ONLY)
                .is_err()
        );

        // A lone user with HD disabled has nothing to schedule.
        let solo = gains_from(vec![1e-9], &[], 1e-10);
        assert!(evaluate_slot(&solo, LIMITS, 0.5, &model, &cfg(), pair_only).is_err());
        assert!(evaluate_slot(&solo, LIMITS, 0.5, &model, &cfg(), ModeSet::HD_ONLY).is_ok());
    }

    #[test]
    fn decision_utilities_recompute_from_modes_and_powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let model = RateModel::Shannon;
        for _ in 0..20 {
            let gains = random_gains(4, &mut rng);
            let rho = rng.random_range(0.0..=1.0);
            let decisions = evaluate_slot(&gains, LIMITS, rho, &model, &cfg(), ModeSet::ALL).unwrap();
            let all = decisions
                .hd_ul
                .iter()
                .chain(decisions.hd_dl.iter())
                .chain(decisions.pairs.iter())
                .flatten();
            for d in all {
                let (r_ul, r_dl) = decision_rates(&gains, &model, d);
                let again = network_utility(rho, r_ul, r_dl);
                assert!(
                    (d.utility_q - again).abs() <= 1e-12 * again.abs().max(1e-30),
                    "stored {} recomputed {}",
                    d.utility_q,
                    again
                );
            }
        }
    }

    // ------------------------------------------------ directional utilities

    #[test]
    fn directional_utilities_take_the_best_candidate() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let gains = random_gains(5, &mut rng);
            let decisions =
                evaluate_slot(&gains, LIMITS, 0.5, &RateModel::Shannon, &cfg(), ModeSet::ALL)
                    .unwrap();
            let q = build_directional_utilities(&decisions);
            for i in 0..5 {
                // Dominates every candidate containing UL i...
                assert!(q.q_ul[i] >= decisions.hd_ul[i].unwrap().utility_q);
                for j in 0..5 {
                    if let Some(d) = decisions.pair(i, j) {
                        assert!(q.q_ul[i] >= d.utility_q);
                        assert!(q.q_dl[j] >= d.utility_q);
                    }
                }
                // ...and equals the one its partner pointer names.
                let named = match q.partner_ul[i] {
                    Some(j) => decisions.pair(i, j).unwrap().utility_q,
                    None => decisions.hd_ul[i].unwrap().utility_q,
                };
                assert_eq!(q.q_ul[i], named);
            }
        }
    }

    #[test]
    fn equal_partners_tie_to_the_lowest_index() {
        // Users 1 and 2 are bitwise identical from user 0's point of view.
        let gains = gains_from(
            vec![1e-9, 3e-9, 3e-9],
            &[(0, 1, 1e-8), (0, 2, 1e-8), (1, 2, 5e-9)],
            1e-10,
        );
        let decisions =
            evaluate_slot(&gains, LIMITS, 0.5, &RateModel::Shannon, &cfg(), ModeSet::ALL).unwrap();
        assert_eq!(
            decisions.pair(0, 1).unwrap().utility_q,
            decisions.pair(0, 2).unwrap().utility_q
        );
        let q = build_directional_utilities(&decisions);
        if q.partner_ul[0].is_some() {
            assert_eq!(q.partner_ul[0], Some(1));
        }
    }

    // ------------------------------------------------ fairness core

    fn constant_q(q_ul: Vec<f64>, q_dl: Vec<f64>) -> DirectionalUtilities {
        let k = q_ul.len();
        DirectionalUtilities {
            q_ul,
            partner_ul: vec![None; k],
            q_dl,
            partner_dl: vec![None; k],
        }
    }

    #[test]
    fn single_user_alternates_between_directions() {
        let weights = UtilityWeights::equal(0.5, 1).unwrap();
        let params = SchedulerParams::default();
        let mut state = FairnessState::new(1).unwrap();
        // Uplink is consistently more useful, but both directions carry
        // weight 1/2, so the credits must enforce an even split.
        let q = constant_q(vec![2.0], vec![1.0]);
        for _ in 0..20_000 {
            hd_core_pick(&mut state, &q, &weights, &params).unwrap();
        }
        assert!((state.pick_share(Direction::Ul, 0) - 0.5).abs() < 0.01);
        assert!((state.pick_share(Direction::Dl, 0) - 0.5).abs() < 0.01);
    }

    #[test]
    fn adversarial_constant_utilities_still_respect_weights() {
        // One directional user dwarfs all others; the deficit bound must
        // still hand everyone their share.
        let weights = UtilityWeights::equal(0.5, 2).unwrap();
        let params = SchedulerParams::default();
        let mut state = FairnessState::new(2).unwrap();
        let q = constant_q(vec![1e6, 1e-6], vec![1e-6, 1e-6]);
        let slots = 30_000;
        for _ in 0..slots {
            hd_core_pick(&mut state, &q, &weights, &params).unwrap();
        }
        for dir in [Direction::Ul, Direction::Dl] {
            for u in 0..2 {
                let share = state.pick_share(dir, u);
                assert!((share - 0.25).abs() < 0.01, "{dir:?} {u}: share {share}");
            }
        }
    }

    #[test]
    fn weighted_shares_follow_the_weights() {
        // Uneven weights: UL user 0 gets half the airtime.
        let weights = UtilityWeights::new(0.5, vec![0.5, 0.1], vec![0.2, 0.2]).unwrap();
        let params = SchedulerParams::default();
        let mut state = FairnessState::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let slots = 30_000;
        for _ in 0..slots {
            let q = constant_q(
                vec![rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)],
                vec![rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)],
            );
            hd_core_pick(&mut state, &q, &weights, &params).unwrap();
        }
        assert!((state.pick_share(Direction::Ul, 0) - 0.5).abs() < 0.01);
        assert!((state.pick_share(Direction::Ul, 1) - 0.1).abs() < 0.01);
        assert!((state.pick_share(Direction::Dl, 0) - 0.2).abs() < 0.01);
        assert!((state.pick_share(Direction::Dl, 1) - 0.2).abs() < 0.01);
    }

    #[test]
    fn pick_sequence_is_invariant_to_per_user_utility_rescaling() {
        // Asymmetric priorities scale the two directional blocks' utilities
        // by different constants. The per-user normalization must absorb any
        // such rescaling, otherwise the core would over-serve the fading
        // peaks of whichever block carries the larger scale.
        let k = 3;
        let weights = UtilityWeights::equal(0.5, k).unwrap();
        let params = SchedulerParams::default();
        let mut raw = FairnessState::new(k).unwrap();
        let mut scaled = FairnessState::new(k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..5000 {
            let ul: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..4.0)).collect();
            let dl: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..4.0)).collect();
            let q = constant_q(ul.clone(), dl.clone());
            let q_scaled = constant_q(
                ul.iter().map(|v| 0.7 * v).collect(),
                dl.iter().map(|v| 0.3 * v).collect(),
            );
            let a = hd_core_pick(&mut raw, &q, &weights, &params).unwrap();
            let b = hd_core_pick(&mut scaled, &q_scaled, &weights, &params).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn picks_sum_to_slots_and_reports_need_history() {
        let weights = UtilityWeights::equal(0.5, 3).unwrap();
        let params = SchedulerParams::default();
        let mut state = FairnessState::new(3).unwrap();
        assert!(state.airtime_report().is_err());
        let q = constant_q(vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]);
        for _ in 0..1000 {
            hd_core_pick(&mut state, &q, &weights, &params).unwrap();
        }
        let total: u64 = (0..3)
            .map(|u| state.picks(Direction::Ul, u) + state.picks(Direction::Dl, u))
            .sum();
        assert_eq!(total, 1000);
        let report = state.airtime_report().unwrap();
        assert_eq!(report.slots, 1000);
        let sum: f64 = report.picked_ul.iter().chain(report.picked_dl.iter()).sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let weights = UtilityWeights::equal(0.5, 2).unwrap();
        let params = SchedulerParams::default();
        let mut state = FairnessState::new(3).unwrap();
        let q = constant_q(vec![1.0, 1.0], vec![1.0, 1.0]);
        assert!(hd_core_pick(&mut state, &q, &weights, &params).is_err());
    }

    // ------------------------------------------------ full slots

    #[test]
    fn scheduled_slots_respect_weights_and_count_activity() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let k = 3;
        let gains = random_gains(k, &mut rng);
        let weights = UtilityWeights::equal(0.5, k).unwrap();
        let params = SchedulerParams::default();
        let model = RateModel::Shannon;
        let slots = 30_000u64;

        let mut state = FairnessState::new(k).unwrap();
        for _ in 0..slots {
            schedule_slot(
                &mut state, &gains, LIMITS, &weights, &model, &cfg(), ModeSet::ALL, &params,
            )
            .unwrap();
        }
        let w = 1.0 / (2 * k) as f64;
        for dir in [Direction::Ul, Direction::Dl] {
            for u in 0..k {
                let share = state.pick_share(dir, u);
                assert!((share - w).abs() < 0.02, "{dir:?} {u}: pick share {share}");
                // Activity includes partner slots, so it can only be higher.
                assert!(state.active_share(dir, u) >= share);
            }
        }
        // At most one uplink and one downlink user are active per slot.
        let active_total: u64 = (0..k)
            .map(|u| state.active(Direction::Ul, u) + state.active(Direction::Dl, u))
            .sum();
        assert!(active_total <= 2 * slots);
    }

    #[test]
    fn hd_only_slots_activate_exactly_one_directional_user() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let k = 4;
        let gains = random_gains(k, &mut rng);
        let weights = UtilityWeights::equal(0.5, k).unwrap();
        let params = SchedulerParams::default();
        let mut state = FairnessState::new(k).unwrap();
        let slots = 1000u64;
        for _ in 0..slots {
            let out = schedule_slot(
                &mut state,
                &gains,
                LIMITS,
                &weights,
                &RateModel::Shannon,
                &cfg(),
                ModeSet::HD_ONLY,
                &params,
            )
            .unwrap();
            assert!(matches!(out.decision.mode, Mode::HdUl | Mode::HdDl));
            assert!(!out.decision.vu.is_pair());
        }
        let active_total: u64 = (0..k)
            .map(|u| state.active(Direction::Ul, u) + state.active(Direction::Dl, u))
            .sum();
        assert_eq!(active_total, slots);
    }

    #[test]
    fn scheduled_pair_matches_the_partner_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let k = 4;
        let gains = random_gains(k, &mut rng);
        let weights = UtilityWeights::equal(0.5, k).unwrap();
        let params = SchedulerParams::default();
        let mut state = FairnessState::new(k).unwrap();
        for _ in 0..200 {
            let decisions =
                evaluate_slot(&gains, LIMITS, 0.5, &RateModel::Shannon, &cfg(), ModeSet::ALL)
                    .unwrap();
            let q = build_directional_utilities(&decisions);
            let out = schedule_slot(
                &mut state,
                &gains,
                LIMITS,
                &weights,
                &RateModel::Shannon,
                &cfg(),
                ModeSet::ALL,
                &params,
            )
            .unwrap();
            let (dir, user) = (out.picked_direction, out.picked_user);
            match dir {
                Direction::Ul => {
                    assert_eq!(out.decision.vu.ul(), Some(user));
                    assert_eq!(out.decision.vu.dl(), q.partner_ul[user]);
                }
                Direction::Dl => {
                    assert_eq!(out.decision.vu.dl(), Some(user));
                    assert_eq!(out.decision.vu.ul(), q.partner_dl[user]);
                }
            }
            assert_relative_eq!(out.utility, out.decision.utility_q, max_relative = 1e-12);
        }
    }

    #[test]
    fn scheduling_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let gains = random_gains(4, &mut rng);
        let weights = UtilityWeights::equal(0.6, 4).unwrap();
        let params = SchedulerParams::default();
        let run = || {
            let mut state = FairnessState::new(4).unwrap();
            (0..500)
                .map(|_| {
                    let out = schedule_slot(
                        &mut state,
                        &gains,
                        LIMITS,
                        &weights,
                        &RateModel::Shannon,
                        &cfg(),
                        ModeSet::ALL,
                        &params,
                    )
                    .unwrap();
                    (out.picked_direction, out.picked_user, out.r_ul, out.r_dl)
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
