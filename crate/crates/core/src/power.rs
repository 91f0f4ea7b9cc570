//! Transmit power optimization for one scheduled user pair.
//!
//! For the Shannon rate model the weighted-utility maximum over the power box
//! is found by evaluating a finite candidate set derived from the KKT
//! conditions of the problem: the three nontrivial corners, the stationary
//! points of each box face (one power pinned at 0 or its cap, a quadratic in
//! the free power), and the stationary points of the interior system (two
//! bivariate quadratics, located by damped Newton from a seed lattice).
//!
//! Staircase rate models have no useful stationarity structure, so they are
//! optimized by exhaustive search over a configured power grid (binary by
//! default).

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rates::{
    network_utility, rate, sinr_fd, sinr_sic, NoisePair, PairGains, PowerLimits, PowerPair,
    RateModel,
};

// ============================================================================
// Context and solution types
// ============================================================================

/// Everything needed to optimize powers for one (uplink i, downlink j) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairContext {
    pub gains: PairGains,
    pub noise: NoisePair,
    pub limits: PowerLimits,
    /// Downlink priority in [0, 1].
    pub rho: f64,
}

/// Which kind of candidate produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateTag {
    /// A corner of the power box.
    Corner,
    /// A stationary point (interior or on a box face).
    InteriorRoot,
    /// The crossover power where the two uplink decodability terms meet.
    Breakpoint,
    /// A grid-search point.
    Grid,
}

/// Optimized powers with the achieved weighted utility (bps/Hz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSolution {
    pub powers: PowerPair,
    pub utility: f64,
    pub tag: CandidateTag,
}

/// Candidate scope for the analytic full-duplex solver. `CornersOnly` is the
/// cheap two-level strategy; `Full` adds every stationary-point candidate and
/// is exhaustive for the Shannon model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSet {
    CornersOnly,
    Full,
}

/// Power optimization strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Candidate evaluation for Shannon; binary grid for staircase models.
    Analytic,
    /// Two levels {0, p_max} per searched dimension.
    Binary,
    /// `grid_levels` evenly spaced levels per searched dimension.
    Grid,
}

/// Solver configuration shared by all per-pair optimizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerConfig {
    pub strategy: StrategyKind,
    pub grid_levels: usize,
    pub candidate_set: CandidateSet,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig {
            strategy: StrategyKind::Analytic,
            grid_levels: 101,
            candidate_set: CandidateSet::CornersOnly,
        }
    }
}

// ============================================================================
// Utility evaluation and the best-candidate accumulator
// ============================================================================

/// Weighted full-duplex utility at the given powers.
#[inline]
pub fn fd_utility(ctx: &PairContext, model: &RateModel, powers: PowerPair) -> f64 {
    let s = sinr_fd(&ctx.gains, powers, ctx.noise);
    network_utility(ctx.rho, rate(model, s.ul), rate(model, s.dl))
}

/// Weighted cancellation-mode utility at the given powers.
#[inline]
pub fn sic_utility(ctx: &PairContext, model: &RateModel, powers: PowerPair) -> f64 {
    let s = sinr_sic(&ctx.gains, powers, ctx.noise);
    network_utility(ctx.rho, rate(model, s.ul), rate(model, s.dl))
}

/// Keeps the best candidate; ties go to lower total power, then lower p_u.
struct Best {
    sol: Option<PowerSolution>,
}

impl Best {
    fn new() -> Self {
        Best { sol: None }
    }

    fn offer(&mut self, powers: PowerPair, utility: f64, tag: CandidateTag) {
        let better = match &self.sol {
            None => true,
            Some(cur) => {
                utility > cur.utility
                    || (utility == cur.utility
                        && (powers.total() < cur.powers.total()
                            || (powers.total() == cur.powers.total()
                                && powers.p_u < cur.powers.p_u)))
            }
        };
        if better {
            self.sol = Some(PowerSolution {
                powers,
                utility,
                tag,
            });
        }
    }

    fn take(self) -> PowerSolution {
        self.sol.expect("at least one candidate offered")
    }
}

// ============================================================================
// Stable quadratic roots
// ============================================================================

/// Real roots of a quadratic, without allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealRoots {
    count: u8,
    vals: [f64; 2],
}

impl RealRoots {
    const EMPTY: RealRoots = RealRoots {
        count: 0,
        vals: [0.0; 2],
    };

    fn one(x: f64) -> Self {
        RealRoots {
            count: 1,
            vals: [x, 0.0],
        }
    }

    fn two(x: f64, y: f64) -> Self {
        RealRoots {
            count: 2,
            vals: [x, y],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.vals[..self.count as usize]
    }
}

/// Discriminants in `[-1e-12 * scale, 0)` are treated as zero (double root),
/// where `scale` tracks the coefficient magnitudes; physical gain products
/// make absolute thresholds meaningless here.
const DISC_REL_TOL: f64 = 1e-12;

/// Real roots of `a x^2 + b x + c = 0`.
///
/// Uses the sign-aware form `q = -(b + sign(b) sqrt(disc)) / 2` with roots
/// `q / a` and `c / q`, which avoids the cancellation of the textbook formula
/// when `b^2 >> |4 a c|`. Degenerate cases fall back to the linear equation;
/// all-zero coefficients are a parameter error.
pub fn quadratic_real_roots(a: f64, b: f64, c: f64) -> Result<RealRoots, Error> {
    if a == 0.0 && b == 0.0 && c == 0.0 {
        return Err(Error::param("a", "all quadratic coefficients are zero"));
    }
    if a == 0.0 {
        if b == 0.0 {
            return Ok(RealRoots::EMPTY); // c != 0: no solutions
        }
        return Ok(RealRoots::one(-c / b));
    }

    let disc = b * b - 4.0 * a * c;
    let scale = (b * b).max((4.0 * a * c).abs());
    if disc < 0.0 {
        if disc >= -DISC_REL_TOL * scale {
            return Ok(RealRoots::one(-b / (2.0 * a)));
        }
        return Ok(RealRoots::EMPTY);
    }
    if disc == 0.0 {
        return Ok(RealRoots::one(-b / (2.0 * a)));
    }

    let sqrt_disc = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sqrt_disc);
    if q == 0.0 {
        // b == 0 and c/a <= 0: symmetric roots.
        let r = (-c / a).sqrt();
        return Ok(RealRoots::two(-r, r));
    }
    Ok(RealRoots::two(q / a, c / q))
}

// ============================================================================
// Full-duplex stationarity system
// ============================================================================

/// Where a full-duplex stationary point lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationaryCase {
    /// Both powers strictly between the bounds; solves both equations.
    Interior,
    /// p_u pinned at 0; p_d solves the downlink stationarity equation.
    PuZero,
    /// p_u pinned at its cap; p_d solves the downlink stationarity equation.
    PuMax,
    /// p_d pinned at 0; p_u solves the uplink stationarity equation.
    PdZero,
    /// p_d pinned at its cap; p_u solves the uplink stationarity equation.
    PdMax,
}

/// One stationary-point candidate of the full-duplex utility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdStationaryPoint {
    pub powers: PowerPair,
    pub case: StationaryCase,
}

/// First stationarity equation (utility derivative in p_d set to zero),
/// cleared of denominators:
///
/// `rho g_j (p_d psi + p_u g_i + n_u)(p_d psi + n_u)
///    - (1-rho) p_u g_i psi (p_d g_j + p_u h_ij + n_d) = 0`
#[inline]
fn eval_e1(ctx: &PairContext, p_u: f64, p_d: f64) -> (f64, f64) {
    let PairGains { g_i, g_j, h_ij, psi } = ctx.gains;
    let NoisePair { n_u, n_d } = ctx.noise;
    let t_a = ctx.rho * g_j * (p_d * psi + p_u * g_i + n_u) * (p_d * psi + n_u);
    let t_b = (1.0 - ctx.rho) * p_u * g_i * psi * (p_d * g_j + p_u * h_ij + n_d);
    let e = t_a - t_b;
    let rel = e.abs() / (t_a.abs() + t_b.abs() + f64::MIN_POSITIVE);
    (e, rel)
}

/// Second stationarity equation (utility derivative in p_u set to zero):
///
/// `rho p_d g_j h_ij (p_d psi + p_u g_i + n_u)
///    - (1-rho) g_i (p_d g_j + p_u h_ij + n_d)(p_u h_ij + n_d) = 0`
#[inline]
fn eval_e2(ctx: &PairContext, p_u: f64, p_d: f64) -> (f64, f64) {
    let PairGains { g_i, g_j, h_ij, psi } = ctx.gains;
    let NoisePair { n_u, n_d } = ctx.noise;
    let t_a = ctx.rho * p_d * g_j * h_ij * (p_d * psi + p_u * g_i + n_u);
    let t_b = (1.0 - ctx.rho) * g_i * (p_d * g_j + p_u * h_ij + n_d) * (p_u * h_ij + n_d);
    let e = t_a - t_b;
    let rel = e.abs() / (t_a.abs() + t_b.abs() + f64::MIN_POSITIVE);
    (e, rel)
}

/// Relative residuals of both stationarity equations at a power pair.
/// Used to certify interior candidates independently of how they were found.
pub fn fd_stationarity_residuals(ctx: &PairContext, powers: PowerPair) -> (f64, f64) {
    (
        eval_e1(ctx, powers.p_u, powers.p_d).1,
        eval_e2(ctx, powers.p_u, powers.p_d).1,
    )
}

/// Analytic Jacobian of (e1, e2) in (p_u, p_d).
#[inline]
fn jacobian(ctx: &PairContext, p_u: f64, p_d: f64) -> [f64; 4] {
    let PairGains { g_i, g_j, h_ij, psi } = ctx.gains;
    let NoisePair { n_u, n_d } = ctx.noise;
    let rho = ctx.rho;
    let de1_du = rho * g_j * g_i * (p_d * psi + n_u)
        - (1.0 - rho) * g_i * psi * (p_d * g_j + 2.0 * p_u * h_ij + n_d);
    let de1_dd = rho * g_j * psi * (2.0 * p_d * psi + p_u * g_i + 2.0 * n_u)
        - (1.0 - rho) * p_u * g_i * psi * g_j;
    let de2_du = rho * p_d * g_j * h_ij * g_i
        - (1.0 - rho) * g_i * h_ij * (p_d * g_j + 2.0 * p_u * h_ij + 2.0 * n_d);
    let de2_dd = rho * g_j * h_ij * (2.0 * p_d * psi + p_u * g_i + n_u)
        - (1.0 - rho) * g_i * g_j * (p_u * h_ij + n_d);
    [de1_du, de1_dd, de2_du, de2_dd]
}

const NEWTON_LATTICE: usize = 8;
const NEWTON_ITERS: usize = 50;
const NEWTON_BACKTRACKS: usize = 8;
const NEWTON_REL_TOL: f64 = 1e-9;
/// Matching tolerance for deduplicating candidates, relative to the caps.
const DEDUP_REL_TOL: f64 = 1e-9;

/// Damped Newton iteration on the interior system from one start; steps are
/// clipped to the power box and non-improving starts are dropped.
fn newton_from(ctx: &PairContext, mut p_u: f64, mut p_d: f64) -> Option<PowerPair> {
    let (p_max_u, p_max_d) = (ctx.limits.p_max_u, ctx.limits.p_max_d);
    let (mut e1, mut r1) = eval_e1(ctx, p_u, p_d);
    let (mut e2, mut r2) = eval_e2(ctx, p_u, p_d);
    for _ in 0..NEWTON_ITERS {
        if r1 < NEWTON_REL_TOL && r2 < NEWTON_REL_TOL {
            return Some(PowerPair { p_u, p_d });
        }
        let [j11, j12, j21, j22] = jacobian(ctx, p_u, p_d);
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let du = (-e1 * j22 + e2 * j12) / det;
        let dd = (-e2 * j11 + e1 * j21) / det;

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..NEWTON_BACKTRACKS {
            let nu = (p_u + step * du).clamp(0.0, p_max_u);
            let nd = (p_d + step * dd).clamp(0.0, p_max_d);
            let (ne1, nr1) = eval_e1(ctx, nu, nd);
            let (ne2, nr2) = eval_e2(ctx, nu, nd);
            if nr1 + nr2 < r1 + r2 {
                p_u = nu;
                p_d = nd;
                e1 = ne1;
                e2 = ne2;
                r1 = nr1;
                r2 = nr2;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    if r1 < NEWTON_REL_TOL && r2 < NEWTON_REL_TOL {
        Some(PowerPair { p_u, p_d })
    } else {
        None
    }
}

/// Fits `f(x) = a x^2 + b x + c` from probes at 0, xmax/2, xmax. Exact for
/// quadratics; avoids hand-expanding coefficient algebra per face.
fn probe_quadratic(f: impl Fn(f64) -> f64, xmax: f64) -> (f64, f64, f64) {
    let f0 = f(0.0);
    let fm = f(0.5 * xmax);
    let f1 = f(xmax);
    let a = 2.0 * (f1 - 2.0 * fm + f0) / (xmax * xmax);
    let b = (4.0 * fm - f1 - 3.0 * f0) / xmax;
    (a, b, f0)
}

fn push_dedup(out: &mut Vec<FdStationaryPoint>, cand: FdStationaryPoint, limits: &PowerLimits) {
    let tol_u = DEDUP_REL_TOL * limits.p_max_u.max(f64::MIN_POSITIVE);
    let tol_d = DEDUP_REL_TOL * limits.p_max_d.max(f64::MIN_POSITIVE);
    let dup = out.iter().any(|p| {
        (p.powers.p_u - cand.powers.p_u).abs() <= tol_u
            && (p.powers.p_d - cand.powers.p_d).abs() <= tol_d
    });
    if !dup {
        out.push(cand);
    }
}

/// All stationary-point candidates of the full-duplex utility: the four box
/// faces (free power solves its face quadratic) and the fully interior
/// system (damped Newton over an 8x8 seed lattice). Duplicates within 1e-9
/// of the power caps are merged. Corners are not included here.
///
/// Scaling both powers by a common factor above 1 raises both SINRs, so the
/// utility increases along rays from the origin and the interior system has
/// no solution for strictly positive gains and noise; the Newton stage stays
/// as a cheap safety net for degenerate inputs the argument does not cover.
pub fn fd_interior_roots(ctx: &PairContext) -> Vec<FdStationaryPoint> {
    let (p_max_u, p_max_d) = (ctx.limits.p_max_u, ctx.limits.p_max_d);
    let mut out = Vec::new();

    // Face cases: (pinned power, free power equation, case tag).
    let faces: [(StationaryCase, f64); 4] = [
        (StationaryCase::PuZero, 0.0),
        (StationaryCase::PuMax, p_max_u),
        (StationaryCase::PdZero, 0.0),
        (StationaryCase::PdMax, p_max_d),
    ];
    for (case, pinned) in faces {
        let on_pd = matches!(case, StationaryCase::PuZero | StationaryCase::PuMax);
        let xmax = if on_pd { p_max_d } else { p_max_u };
        if xmax <= 0.0 {
            continue;
        }
        let (a, b, c) = if on_pd {
            probe_quadratic(|pd| eval_e1(ctx, pinned, pd).0, xmax)
        } else {
            probe_quadratic(|pu| eval_e2(ctx, pu, pinned).0, xmax)
        };
        // An identically-zero face equation means every point is stationary;
        // the face endpoints are already corner candidates, so skip it.
        let roots = match quadratic_real_roots(a, b, c) {
            Ok(r) => r,
            Err(_) => continue,
        };
        for &x in roots.as_slice() {
            if x.is_finite() && x >= -DEDUP_REL_TOL * xmax && x <= xmax * (1.0 + DEDUP_REL_TOL) {
                let x = x.clamp(0.0, xmax);
                let powers = if on_pd {
                    PowerPair { p_u: pinned, p_d: x }
                } else {
                    PowerPair { p_u: x, p_d: pinned }
                };
                push_dedup(&mut out, FdStationaryPoint { powers, case }, &ctx.limits);
            }
        }
    }

    // Interior system from a seed lattice.
    for su in 0..NEWTON_LATTICE {
        for sd in 0..NEWTON_LATTICE {
            let p_u = (su as f64 + 0.5) / NEWTON_LATTICE as f64 * p_max_u;
            let p_d = (sd as f64 + 0.5) / NEWTON_LATTICE as f64 * p_max_d;
            if let Some(powers) = newton_from(ctx, p_u, p_d) {
                push_dedup(
                    &mut out,
                    FdStationaryPoint {
                        powers,
                        case: StationaryCase::Interior,
                    },
                    &ctx.limits,
                );
            }
        }
    }

    out
}

/// Candidate power pairs for the full-duplex problem: the three nontrivial
/// corners, plus all stationary points when `set` is `Full`.
pub fn fd_candidates(ctx: &PairContext, set: CandidateSet) -> Vec<PowerPair> {
    let (p_max_u, p_max_d) = (ctx.limits.p_max_u, ctx.limits.p_max_d);
    let mut out = vec![
        PowerPair { p_u: 0.0, p_d: p_max_d },
        PowerPair { p_u: p_max_u, p_d: 0.0 },
        PowerPair { p_u: p_max_u, p_d: p_max_d },
    ];
    if set == CandidateSet::Full {
        let tol_u = DEDUP_REL_TOL * p_max_u.max(f64::MIN_POSITIVE);
        let tol_d = DEDUP_REL_TOL * p_max_d.max(f64::MIN_POSITIVE);
        for sp in fd_interior_roots(ctx) {
            let dup = out.iter().any(|p| {
                (p.p_u - sp.powers.p_u).abs() <= tol_u && (p.p_d - sp.powers.p_d).abs() <= tol_d
            });
            if !dup {
                out.push(sp.powers);
            }
        }
    }
    out
}

// ============================================================================
// Full-duplex solver
// ============================================================================

/// Exhaustive grid search of the full-duplex utility over evenly spaced
/// power levels ({0, ..., p_max} per axis). Ties resolve to lower total
/// power, then lower p_u. At least two levels per axis are required.
pub fn grid_search(
    ctx: &PairContext,
    model: &RateModel,
    levels_u: usize,
    levels_d: usize,
) -> Result<PowerSolution, Error> {
    if levels_u < 2 || levels_d < 2 {
        return Err(Error::param(
            "levels",
            format!("need at least 2 levels per axis, got {levels_u}x{levels_d}"),
        ));
    }
    let mut best = Best::new();
    for iu in 0..levels_u {
        let p_u = ctx.limits.p_max_u * iu as f64 / (levels_u - 1) as f64;
        for id in 0..levels_d {
            let p_d = ctx.limits.p_max_d * id as f64 / (levels_d - 1) as f64;
            let powers = PowerPair { p_u, p_d };
            best.offer(powers, fd_utility(ctx, model, powers), CandidateTag::Grid);
        }
    }
    Ok(best.take())
}

/// Optimizes full-duplex powers under the configured strategy.
///
/// Shannon + `Analytic` evaluates the candidate set (corners, and stationary
/// points when the set is `Full`); staircase models fall back to a binary
/// grid under `Analytic` since step functions have no stationarity to
/// exploit. `Binary`/`Grid` force grid search for either model.
pub fn solve_fd(ctx: &PairContext, model: &RateModel, cfg: &PowerConfig) -> PowerSolution {
    let analytic = match (cfg.strategy, model) {
        (StrategyKind::Analytic, RateModel::Shannon) => true,
        (StrategyKind::Analytic, RateModel::Staircase(_)) => false,
        (StrategyKind::Binary, _) | (StrategyKind::Grid, _) => false,
    };
    if !analytic {
        let levels = match cfg.strategy {
            StrategyKind::Grid => cfg.grid_levels,
            _ => 2,
        };
        return grid_search(ctx, model, levels, levels).expect("levels >= 2");
    }

    let (p_max_u, p_max_d) = (ctx.limits.p_max_u, ctx.limits.p_max_d);
    let mut best = Best::new();
    for powers in [
        PowerPair { p_u: 0.0, p_d: p_max_d },
        PowerPair { p_u: p_max_u, p_d: 0.0 },
        PowerPair { p_u: p_max_u, p_d: p_max_d },
    ] {
        best.offer(powers, fd_utility(ctx, model, powers), CandidateTag::Corner);
    }
    if cfg.candidate_set == CandidateSet::Full {
        for sp in fd_interior_roots(ctx) {
            best.offer(
                sp.powers,
                fd_utility(ctx, model, sp.powers),
                CandidateTag::InteriorRoot,
            );
        }
    }
    best.take()
}

// ============================================================================
// Cancellation-mode solver
// ============================================================================

/// A downlink-power candidate for the cancellation mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SicCandidate {
    pub p_d: f64,
    pub tag: CandidateTag,
}

/// Downlink power candidates for the cancellation mode with p_u at its cap:
/// the two endpoints, the breakpoint where the two uplink decodability terms
/// cross, and the roots of the per-branch stationarity quadratics
///
/// branch with uplink limited at the downlink user:
///   `rho g_j (p_d g_j + p_u h_ij + n_d)(p_d g_j + n_d)
///      - (1-rho) p_u g_j h_ij (p_d g_j + n_d) = 0`
/// branch with uplink limited at the base station:
///   `rho g_j (p_d psi + p_u g_i + n_u)(p_d psi + n_u)
///      - (1-rho) p_u g_i psi (p_d g_j + n_d) = 0`
///
/// The breakpoint `(h_ij n_u - g_i n_d) / (g_i g_j - psi h_ij)` is skipped
/// when its denominator is negligible relative to its own terms (crossover
/// at infinity). Candidates outside [0, p_max_d] are dropped; duplicates are
/// merged within 1e-9 of the cap.
pub fn sic_candidates(ctx: &PairContext) -> Vec<SicCandidate> {
    let PairGains { g_i, g_j, h_ij, psi } = ctx.gains;
    let NoisePair { n_u, n_d } = ctx.noise;
    let (p_u, p_max_d) = (ctx.limits.p_max_u, ctx.limits.p_max_d);
    let rho = ctx.rho;

    let mut out = vec![
        SicCandidate { p_d: 0.0, tag: CandidateTag::Corner },
        SicCandidate { p_d: p_max_d, tag: CandidateTag::Corner },
    ];
    let tol = DEDUP_REL_TOL * p_max_d.max(f64::MIN_POSITIVE);
    let push = |out: &mut Vec<SicCandidate>, p_d: f64, tag: CandidateTag| {
        if p_d.is_finite() && p_d >= -tol && p_d <= p_max_d * (1.0 + DEDUP_REL_TOL) {
            let p_d = p_d.clamp(0.0, p_max_d);
            if !out.iter().any(|c| (c.p_d - p_d).abs() <= tol) {
                out.push(SicCandidate { p_d, tag });
            }
        }
    };

    let bp_num = h_ij * n_u - g_i * n_d;
    let bp_den = g_i * g_j - psi * h_ij;
    let bp_scale = g_i * g_j + psi * h_ij;
    if bp_den.abs() > 1e-15 * bp_scale {
        push(&mut out, bp_num / bp_den, CandidateTag::Breakpoint);
    }

    if p_max_d > 0.0 {
        let branch_user = |p_d: f64| {
            rho * g_j * (p_d * g_j + p_u * h_ij + n_d) * (p_d * g_j + n_d)
                - (1.0 - rho) * p_u * g_j * h_ij * (p_d * g_j + n_d)
        };
        let branch_bs = |p_d: f64| {
            rho * g_j * (p_d * psi + p_u * g_i + n_u) * (p_d * psi + n_u)
                - (1.0 - rho) * p_u * g_i * psi * (p_d * g_j + n_d)
        };
        for f in [&branch_user as &dyn Fn(f64) -> f64, &branch_bs] {
            let (a, b, c) = probe_quadratic(f, p_max_d);
            if let Ok(roots) = quadratic_real_roots(a, b, c) {
                for &r in roots.as_slice() {
                    push(&mut out, r, CandidateTag::InteriorRoot);
                }
            }
        }
    }

    out
}

/// Optimizes the downlink power for the cancellation mode. The uplink power
/// is always at its cap: raising it improves the uplink SINR and leaves the
/// cancelled downlink untouched, for any monotone rate model.
pub fn solve_sic(ctx: &PairContext, model: &RateModel, cfg: &PowerConfig) -> PowerSolution {
    let p_u = ctx.limits.p_max_u;
    let analytic = matches!(
        (cfg.strategy, model),
        (StrategyKind::Analytic, RateModel::Shannon)
    );

    let mut best = Best::new();
    if analytic {
        for cand in sic_candidates(ctx) {
            let powers = PowerPair { p_u, p_d: cand.p_d };
            best.offer(powers, sic_utility(ctx, model, powers), cand.tag);
        }
    } else {
        let levels = match cfg.strategy {
            StrategyKind::Grid => cfg.grid_levels.max(2),
            _ => 2,
        };
        for i in 0..levels {
            let p_d = ctx.limits.p_max_d * i as f64 / (levels - 1) as f64;
            let powers = PowerPair { p_u, p_d };
            best.offer(powers, sic_utility(ctx, model, powers), CandidateTag::Grid);
        }
    }
    best.take()
}

// ============================================================================
// Tests
// ============================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::db_to_linear;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx_from_parts(g_i: f64, g_j: f64, h_ij: f64, psi: f64, rho: f64) -> PairContext {
        PairContext {
            gains: PairGains { g_i, g_j, h_ij, psi },
            noise: NoisePair { n_u: 2.512e-13, n_d: 3.162e-13 },
            limits: PowerLimits { p_max_u: 1.733e-3, p_max_d: 2.182e-3 },
            rho,
        }
    }

    fn random_ctx(rng: &mut impl Rng) -> PairContext {
        ctx_from_parts(
            db_to_linear(rng.random_range(-110.0..-55.0)),
            db_to_linear(rng.random_range(-110.0..-55.0)),
            db_to_linear(rng.random_range(-120.0..-40.0)),
            db_to_linear(-rng.random_range(80.0..100.0)),
            rng.random_range(0.0..=1.0),
        )
    }

    // -------------------------------------------------- quadratic roots

    #[test]
    fn quadratic_examples() {
        let r = quadratic_real_roots(1.0, -3.0, 2.0).unwrap();
        let mut v = r.as_slice().to_vec();
        v.sort_by(f64::total_cmp);
        assert_relative_eq!(v[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(v[1], 2.0, epsilon = 1e-12);

        let r = quadratic_real_roots(0.0, 2.0, -4.0).unwrap();
        assert_eq!(r.as_slice(), &[2.0]);

        assert!(quadratic_real_roots(1.0, 0.0, 1.0).unwrap().as_slice().is_empty());
        assert!(quadratic_real_roots(0.0, 0.0, 5.0).unwrap().as_slice().is_empty());
        assert!(quadratic_real_roots(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn quadratic_is_stable_for_dominant_linear_term() {
        // Roots near 1e8 and 1e-8; the textbook formula destroys the small one.
        let r = quadratic_real_roots(1.0, -1e8, 1.0).unwrap();
        let mut v = r.as_slice().to_vec();
        v.sort_by(f64::total_cmp);
        assert_relative_eq!(v[0], 1e-8, max_relative = 1e-9);
        assert_relative_eq!(v[1], 1e8, max_relative = 1e-9);
    }

    #[test]
    fn quadratic_near_zero_discriminant_gives_double_root() {
        // Discriminant is ~ -4e-16 relative to b^2 = 4: inside the clamp band.
        let eps = 1e-16;
        let r = quadratic_real_roots(1.0, -2.0, 1.0 + eps).unwrap();
        assert_eq!(r.as_slice(), &[1.0]);
        // A genuinely negative discriminant at tiny absolute scale must NOT
        // be clamped: 1e-36 x^2 + 1e-36 has no real roots.
        let r = quadratic_real_roots(1e-36, 0.0, 1e-36).unwrap();
        assert!(r.as_slice().is_empty());
    }

    proptest! {
        #[test]
        fn quadratic_roundtrip_recovers_roots(
            a in prop::sample::select(vec![-3.0, -1.0, 0.5, 2.0]),
            r1 in -5.0..5.0f64,
            spread in 1e-3..10.0f64,
        ) {
            let r2 = r1 + spread;
            let b = -a * (r1 + r2);
            let c = a * r1 * r2;
            let roots = quadratic_real_roots(a, b, c).unwrap();
            let mut v = roots.as_slice().to_vec();
            v.sort_by(f64::total_cmp);
            prop_assert_eq!(v.len(), 2);
            prop_assert!((v[0] - r1).abs() <= 1e-6 * (1.0 + r1.abs()));
            prop_assert!((v[1] - r2).abs() <= 1e-6 * (1.0 + r2.abs()));
        }
    }

    // -------------------------------------------------- stationarity system

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let ctx = random_ctx(&mut rng);
            let p_u = rng.random_range(0.05..0.95) * ctx.limits.p_max_u;
            let p_d = rng.random_range(0.05..0.95) * ctx.limits.p_max_d;
            let [j11, j12, j21, j22] = jacobian(&ctx, p_u, p_d);
            let du = 1e-5 * ctx.limits.p_max_u;
            let dd = 1e-5 * ctx.limits.p_max_d;
            // Central differences carry a rounding noise floor of roughly
            // eps * |f| / (2h); tolerate it alongside the relative check.
            let diff = |f: &dyn Fn(f64, f64) -> f64, var_u: bool| {
                let (hi, lo, h) = if var_u {
                    (f(p_u + du, p_d), f(p_u - du, p_d), du)
                } else {
                    (f(p_u, p_d + dd), f(p_u, p_d - dd), dd)
                };
                ((hi - lo) / (2.0 * h), 1e-12 * (hi.abs() + lo.abs()) / (2.0 * h))
            };
            let e1 = |u: f64, d: f64| eval_e1(&ctx, u, d).0;
            let e2 = |u: f64, d: f64| eval_e2(&ctx, u, d).0;
            for (an, (fd, noise)) in [
                (j11, diff(&e1, true)),
                (j12, diff(&e1, false)),
                (j21, diff(&e2, true)),
                (j22, diff(&e2, false)),
            ] {
                let scale = an.abs().max(fd.abs());
                assert!(
                    (an - fd).abs() <= 1e-5 * scale + noise,
                    "analytic {an:e} vs finite-diff {fd:e} (noise {noise:e})"
                );
            }
        }
    }

    #[test]
    fn stationary_points_satisfy_their_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut faces_seen = 0usize;
        for _ in 0..400 {
            let ctx = random_ctx(&mut rng);
            for sp in fd_interior_roots(&ctx) {
                let (r1, r2) = fd_stationarity_residuals(&ctx, sp.powers);
                match sp.case {
                    // Scaling both powers by t > 1 raises both SINRs (the
                    // noise share of each denominator shrinks), so the
                    // utility strictly increases along rays from the origin
                    // and fully interior stationary points cannot exist for
                    // positive gains and noise. Anything the Newton safety
                    // net does report must still satisfy both equations.
                    StationaryCase::Interior => {
                        assert!(r1 < 1e-6 && r2 < 1e-6, "interior residuals {r1:e} {r2:e}");
                    }
                    StationaryCase::PuZero | StationaryCase::PuMax => {
                        faces_seen += 1;
                        assert!(r1 < 1e-6, "face residual {r1:e}");
                    }
                    StationaryCase::PdZero | StationaryCase::PdMax => {
                        faces_seen += 1;
                        assert!(r2 < 1e-6, "face residual {r2:e}");
                    }
                }
                assert!(sp.powers.p_u >= 0.0 && sp.powers.p_u <= ctx.limits.p_max_u);
                assert!(sp.powers.p_d >= 0.0 && sp.powers.p_d <= ctx.limits.p_max_d);
            }
        }
        // Face roots are where the real uplink/downlink tradeoffs live; the
        // sweep must produce a healthy number of them.
        assert!(faces_seen > 100, "only {faces_seen} face stationary points");
    }

    #[test]
    fn fd_candidates_always_include_the_three_corners() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let ctx = random_ctx(&mut rng);
            for set in [CandidateSet::CornersOnly, CandidateSet::Full] {
                let cands = fd_candidates(&ctx, set);
                let (pu, pd) = (ctx.limits.p_max_u, ctx.limits.p_max_d);
                for want in [(0.0, pd), (pu, 0.0), (pu, pd)] {
                    assert!(
                        cands.iter().any(|c| c.p_u == want.0 && c.p_d == want.1),
                        "missing corner {want:?}"
                    );
                }
                if set == CandidateSet::CornersOnly {
                    assert_eq!(cands.len(), 3);
                }
                // No duplicates within tolerance.
                for (i, a) in cands.iter().enumerate() {
                    for b in &cands[i + 1..] {
                        assert!(
                            (a.p_u - b.p_u).abs() > 1e-9 * pu || (a.p_d - b.p_d).abs() > 1e-9 * pd
                        );
                    }
                }
            }
        }
    }

    // -------------------------------------------------- full-duplex solver

    fn full_cfg() -> PowerConfig {
        PowerConfig {
            strategy: StrategyKind::Analytic,
            grid_levels: 101,
            candidate_set: CandidateSet::Full,
        }
    }

    #[test]
    fn no_interference_maxes_both_powers() {
        let ctx = ctx_from_parts(1e-8, 2e-8, 0.0, 0.0, 0.5);
        let sol = solve_fd(&ctx, &RateModel::Shannon, &full_cfg());
        assert_eq!(sol.powers.p_u, ctx.limits.p_max_u);
        assert_eq!(sol.powers.p_d, ctx.limits.p_max_d);
    }

    #[test]
    fn degenerate_priorities_shut_the_other_link_down() {
        // rho = 1: only the downlink counts, and any uplink power hurts it.
        let ctx = ctx_from_parts(1e-8, 2e-8, 1e-7, 1e-10, 1.0);
        let sol = solve_fd(&ctx, &RateModel::Shannon, &full_cfg());
        assert_eq!(sol.powers.p_u, 0.0);
        assert_eq!(sol.powers.p_d, ctx.limits.p_max_d);
        let s = sinr_fd(&ctx.gains, sol.powers, ctx.noise);
        assert_relative_eq!(sol.utility, (1.0 + s.dl).log2(), epsilon = 1e-12);

        // rho = 0: only the uplink counts, and downlink power only interferes.
        let ctx = ctx_from_parts(1e-8, 2e-8, 1e-7, 1e-10, 0.0);
        let sol = solve_fd(&ctx, &RateModel::Shannon, &full_cfg());
        assert_eq!(sol.powers.p_u, ctx.limits.p_max_u);
        assert_eq!(sol.powers.p_d, 0.0);
    }

    #[test]
    fn analytic_candidates_match_dense_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut misses = 0usize;
        let n = 300;
        for _ in 0..n {
            let ctx = random_ctx(&mut rng);
            let analytic = solve_fd(&ctx, &RateModel::Shannon, &full_cfg());
            let grid = grid_search(&ctx, &RateModel::Shannon, 101, 101).unwrap();
            if analytic.utility < grid.utility - 1e-6 * grid.utility.abs() {
                misses += 1;
            }
        }
        assert!(misses <= n / 100, "{misses}/{n} grid points beat the candidates");
    }

    #[test]
    fn staircase_solver_uses_binary_grid_under_analytic_strategy() {
        let model = RateModel::Staircase(crate::rates::Staircase::bundled());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let ctx = random_ctx(&mut rng);
            let sol = solve_fd(&ctx, &model, &full_cfg());
            let binary = grid_search(&ctx, &model, 2, 2).unwrap();
            assert_eq!(sol.powers, binary.powers);
            assert_eq!(sol.utility, binary.utility);
        }
    }

    // -------------------------------------------------- cancellation solver

    #[test]
    fn breakpoint_example() {
        // h n_u - g_i n_d = 2 - 1 = 1; g_i g_j - psi h = 1 -> breakpoint 1.
        let ctx = PairContext {
            gains: PairGains { g_i: 1.0, g_j: 1.0, h_ij: 2.0, psi: 0.0 },
            noise: NoisePair { n_u: 1.0, n_d: 1.0 },
            limits: PowerLimits { p_max_u: 1.0, p_max_d: 2.0 },
            rho: 0.5,
        };
        let cands = sic_candidates(&ctx);
        assert!(cands
            .iter()
            .any(|c| c.tag == CandidateTag::Breakpoint && (c.p_d - 1.0).abs() < 1e-9));
    }

    #[test]
    fn branch_equation_root_example() {
        // rho = 1/4, p_u = 1, h = 1, n_d = 1, g_j = 1: the downlink-limited
        // branch reads (pd + 1)(pd/4 - 1/4) = 0 after factoring, so pd = 1.
        let ctx = PairContext {
            gains: PairGains { g_i: 1.0, g_j: 1.0, h_ij: 1.0, psi: 0.0 },
            noise: NoisePair { n_u: 1.0, n_d: 1.0 },
            limits: PowerLimits { p_max_u: 1.0, p_max_d: 2.0 },
            rho: 0.25,
        };
        let cands = sic_candidates(&ctx);
        assert!(cands
            .iter()
            .any(|c| c.tag == CandidateTag::InteriorRoot && (c.p_d - 1.0).abs() < 1e-9));
        // Endpoints are always present.
        assert!(cands.iter().any(|c| c.p_d == 0.0));
        assert!(cands.iter().any(|c| c.p_d == 2.0));
    }

    #[test]
    fn sic_uplink_power_is_always_at_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let staircase = RateModel::Staircase(crate::rates::Staircase::bundled());
        for _ in 0..100 {
            let ctx = random_ctx(&mut rng);
            for model in [&RateModel::Shannon, &staircase] {
                let sol = solve_sic(&ctx, model, &full_cfg());
                assert_eq!(sol.powers.p_u, ctx.limits.p_max_u);
            }
        }
    }

    #[test]
    fn sic_with_zero_downlink_priority_mutes_the_downlink() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let mut ctx = random_ctx(&mut rng);
            ctx.rho = 0.0;
            let sol = solve_sic(&ctx, &RateModel::Shannon, &full_cfg());
            assert_eq!(sol.powers.p_d, 0.0);
        }
    }

    #[test]
    fn sic_candidates_match_dense_line_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..300 {
            let ctx = random_ctx(&mut rng);
            let sol = solve_sic(&ctx, &RateModel::Shannon, &full_cfg());
            let mut best = f64::NEG_INFINITY;
            for i in 0..=2000 {
                let p_d = ctx.limits.p_max_d * i as f64 / 2000.0;
                let u = sic_utility(
                    &ctx,
                    &RateModel::Shannon,
                    PowerPair { p_u: ctx.limits.p_max_u, p_d },
                );
                best = best.max(u);
            }
            assert!(
                sol.utility >= best - 1e-9 * best.abs().max(1e-30),
                "candidates {:.15e} below line search {best:.15e}",
                sol.utility
            );
        }
    }

    // -------------------------------------------------- grid search

    #[test]
    fn grid_search_validates_levels() {
        let ctx = ctx_from_parts(1e-8, 1e-8, 1e-9, 1e-10, 0.5);
        assert!(grid_search(&ctx, &RateModel::Shannon, 1, 2).is_err());
        assert!(grid_search(&ctx, &RateModel::Shannon, 2, 0).is_err());
    }

    #[test]
    fn nested_grids_never_lose_utility() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let ctx = random_ctx(&mut rng);
            // Level sets {0,max} c {0,max/2,max} c {0,max/4,...,max}.
            let u2 = grid_search(&ctx, &RateModel::Shannon, 2, 2).unwrap().utility;
            let u3 = grid_search(&ctx, &RateModel::Shannon, 3, 3).unwrap().utility;
            let u5 = grid_search(&ctx, &RateModel::Shannon, 5, 5).unwrap().utility;
            assert!(u3 >= u2 && u5 >= u3);
        }
    }

    #[test]
    fn grid_tie_breaks_toward_lower_power() {
        // Zero gains: utility is 0 everywhere; lowest total power must win.
        let ctx = ctx_from_parts(0.0, 0.0, 0.0, 0.0, 0.5);
        let sol = grid_search(&ctx, &RateModel::Shannon, 5, 5).unwrap();
        assert_eq!(sol.powers, PowerPair { p_u: 0.0, p_d: 0.0 });
        assert_eq!(sol.utility, 0.0);
    }

    // -------------------------------------------------- cross-cutting

    #[test]
    fn common_gain_noise_scaling_leaves_solutions_unchanged() {
        // SINRs depend only on gain-to-noise ratios: multiplying every gain
        // and both noise floors by one constant is an exact identity. A
        // power-of-two factor keeps even the floating point bit-identical.
        let c = 65536.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let ctx = random_ctx(&mut rng);
            let scaled = PairContext {
                gains: PairGains {
                    g_i: ctx.gains.g_i * c,
                    g_j: ctx.gains.g_j * c,
                    h_ij: ctx.gains.h_ij * c,
                    psi: ctx.gains.psi * c,
                },
                noise: NoisePair {
                    n_u: ctx.noise.n_u * c,
                    n_d: ctx.noise.n_d * c,
                },
                limits: ctx.limits,
                rho: ctx.rho,
            };
            let a = solve_fd(&ctx, &RateModel::Shannon, &full_cfg());
            let b = solve_fd(&scaled, &RateModel::Shannon, &full_cfg());
            assert_eq!(a.powers, b.powers);
            assert_eq!(a.utility, b.utility);

            let a = solve_sic(&ctx, &RateModel::Shannon, &full_cfg());
            let b = solve_sic(&scaled, &RateModel::Shannon, &full_cfg());
            assert_eq!(a.powers, b.powers);
            assert_eq!(a.utility, b.utility);
        }
    }

    #[test]
    fn reported_utility_is_consistent_with_reported_powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let staircase = RateModel::Staircase(crate::rates::Staircase::bundled());
        for _ in 0..100 {
            let ctx = random_ctx(&mut rng);
            for model in [&RateModel::Shannon, &staircase] {
                let sol = solve_fd(&ctx, model, &full_cfg());
                let again = fd_utility(&ctx, model, sol.powers);
                assert!((sol.utility - again).abs() <= 1e-12 * again.abs().max(1e-30));

                let sol = solve_sic(&ctx, model, &full_cfg());
                let again = sic_utility(&ctx, model, sol.powers);
                assert!((sol.utility - again).abs() <= 1e-12 * again.abs().max(1e-30));
            }
        }
    }
}
