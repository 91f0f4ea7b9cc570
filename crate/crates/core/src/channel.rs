//! Cell geometry, user placement, and the two-stage channel model.
//!
//! Large-scale attenuation (distance pathloss plus log-normal shadowing) is
//! drawn once per drop; small-scale Rayleigh fading is drawn independently
//! per link per slot. Per drop, one seeded RNG is consumed in a fixed order:
//! hotspot centers, then user positions, then shadowing, then per-slot
//! fading, so simulations are reproducible bit for bit.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::Error;
use crate::mat::SquareMat;
use crate::rates::{NoisePair, PowerLimits};
use crate::units::{db_to_linear, dbm_to_watts};

/// Links closer than this are treated as being at this distance.
pub const DEFAULT_MIN_LINK_DISTANCE_M: f64 = 1.0;

/// Attempts of rejection sampling before placement gives up.
const MAX_REJECTS: usize = 10_000;

// ============================================================================
// Geometry and placement
// ============================================================================

/// Position in meters; the base station sits at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Square cell of side `side_m` centered on the base station, with an
/// exclusion disk of radius `r_min_m` around it where no user may be placed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    side_m: f64,
    r_min_m: f64,
}

impl CellGeometry {
    pub fn new(side_m: f64, r_min_m: f64) -> Result<Self, Error> {
        if !(side_m.is_finite() && side_m > 0.0) {
            return Err(Error::param("side_m", format!("{side_m} must be positive")));
        }
        if !(r_min_m.is_finite() && r_min_m >= 0.0 && r_min_m < side_m / 2.0) {
            return Err(Error::param(
                "r_min_m",
                format!("{r_min_m} must be in [0, side/2)"),
            ));
        }
        Ok(CellGeometry { side_m, r_min_m })
    }

    pub fn side_m(&self) -> f64 {
        self.side_m
    }

    pub fn r_min_m(&self) -> f64 {
        self.r_min_m
    }

    pub fn contains(&self, p: Point) -> bool {
        let h = self.side_m / 2.0;
        p.x.abs() <= h && p.y.abs() <= h
    }

    /// Inside the cell and outside the exclusion disk.
    pub fn admits(&self, p: Point) -> bool {
        self.contains(p) && p.norm() >= self.r_min_m
    }
}

/// User positions for one drop. When hotspots are used, users are assigned
/// to hotspot disks round-robin (user u belongs to hotspot u mod n_h).
#[derive(Debug, Clone, PartialEq)]
pub struct UserLayout {
    pub positions: Vec<Point>,
    pub hotspot_centers: Vec<Point>,
}

impl UserLayout {
    pub fn k(&self) -> usize {
        self.positions.len()
    }

    pub fn hotspot_count(&self) -> usize {
        self.hotspot_centers.len()
    }
}

fn rejection_sample(
    rng: &mut impl Rng,
    mut draw: impl FnMut(&mut dyn FnMut() -> f64) -> Point,
    accept: impl Fn(Point) -> bool,
) -> Result<Point, Error> {
    for _ in 0..MAX_REJECTS {
        let p = draw(&mut || rng.random::<f64>());
        if accept(p) {
            return Ok(p);
        }
    }
    Err(Error::Placement(format!(
        "no admissible point found in {MAX_REJECTS} attempts"
    )))
}

/// Places `k` users. With `n_h == 0` users are uniform over the cell minus
/// the exclusion disk. With `n_h > 0`, hotspot centers are drawn uniformly
/// over the square shrunk by the hotspot radius (so every disk lies inside
/// the cell) and users are uniform within their assigned disk, resampled
/// against the exclusion disk.
pub fn place_users(
    geometry: &CellGeometry,
    k: usize,
    n_h: usize,
    hotspot_radius_m: f64,
    rng: &mut impl Rng,
) -> Result<UserLayout, Error> {
    if k == 0 {
        return Err(Error::param("k", "at least one user required"));
    }
    if n_h > k {
        return Err(Error::param("n_h", format!("{n_h} hotspots exceed {k} users")));
    }
    let half = geometry.side_m / 2.0;
    if n_h > 0 && !(hotspot_radius_m > 0.0 && hotspot_radius_m <= half) {
        return Err(Error::param(
            "hotspot_radius_m",
            format!("{hotspot_radius_m} must be in (0, side/2]"),
        ));
    }

    let mut hotspot_centers = Vec::with_capacity(n_h);
    let shrunk = half - hotspot_radius_m;
    for _ in 0..n_h {
        let x = rng.random::<f64>() * 2.0 * shrunk - shrunk;
        let y = rng.random::<f64>() * 2.0 * shrunk - shrunk;
        hotspot_centers.push(Point { x, y });
    }

    let mut positions = Vec::with_capacity(k);
    for user in 0..k {
        let p = if n_h == 0 {
            rejection_sample(
                rng,
                |u| Point {
                    x: u() * 2.0 * half - half,
                    y: u() * 2.0 * half - half,
                },
                |p| p.norm() >= geometry.r_min_m,
            )?
        } else {
            let center = hotspot_centers[user % n_h];
            rejection_sample(
                rng,
                |u| {
                    let r = hotspot_radius_m * u().sqrt();
                    let theta = std::f64::consts::TAU * u();
                    Point {
                        x: center.x + r * theta.cos(),
                        y: center.y + r * theta.sin(),
                    }
                },
                |p| p.norm() >= geometry.r_min_m,
            )?
        };
        positions.push(p);
    }

    Ok(UserLayout {
        positions,
        hotspot_centers,
    })
}

// ============================================================================
// Pathloss and shadowing
// ============================================================================

/// Line-of-sight condition of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkClass {
    Los,
    Nlos,
}

/// Distance pathloss in dB. Distances below `min_distance_m` are clamped so
/// the model stays finite for co-located endpoints. Distance enters in km.
pub fn pathloss_db(distance_m: f64, class: LinkClass, min_distance_m: f64) -> f64 {
    let d_km = distance_m.max(min_distance_m) / 1000.0;
    match class {
        LinkClass::Los => 89.5 + 16.9 * d_km.log10(),
        LinkClass::Nlos => 147.4 + 43.3 * d_km.log10(),
    }
}

/// Static channel-model parameters for one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub geometry: CellGeometry,
    pub hotspot_radius_m: f64,
    pub shadowing_sigma_los_db: f64,
    pub shadowing_sigma_nlos_db: f64,
    pub bs_user_class: LinkClass,
    pub user_user_class: LinkClass,
    pub min_link_distance_m: f64,
}

impl ChannelParams {
    fn sigma(&self, class: LinkClass) -> f64 {
        match class {
            LinkClass::Los => self.shadowing_sigma_los_db,
            LinkClass::Nlos => self.shadowing_sigma_nlos_db,
        }
    }
}

/// Per-drop large-scale gains in dB (negative pathloss plus zero-mean
/// shadowing). The user-user matrix diagonal is unused and holds NaN.
#[derive(Debug, Clone)]
pub struct LargeScaleGains {
    pub bs_user_db: Vec<f64>,
    pub user_user_db: SquareMat<f64>,
    pub bs_user_class: LinkClass,
    pub user_user_class: LinkClass,
}

/// Draws pathloss-plus-shadowing for all links of a layout. Shadowing is
/// zero-mean normal in dB; user-user links are reciprocal, so each unordered
/// pair is drawn once and mirrored.
pub fn sample_large_scale(
    layout: &UserLayout,
    params: &ChannelParams,
    rng: &mut impl Rng,
) -> LargeScaleGains {
    let k = layout.k();
    let bs = Point { x: 0.0, y: 0.0 };

    let mut bs_user_db = Vec::with_capacity(k);
    for i in 0..k {
        let d = layout.positions[i].distance(bs);
        let pl = pathloss_db(d, params.bs_user_class, params.min_link_distance_m);
        let draw: f64 = StandardNormal.sample(rng);
        let shadow = params.sigma(params.bs_user_class) * draw;
        bs_user_db.push(-pl + shadow);
    }

    let mut user_user_db = SquareMat::filled(k, f64::NAN);
    for i in 0..k {
        for j in (i + 1)..k {
            let d = layout.positions[i].distance(layout.positions[j]);
            let pl = pathloss_db(d, params.user_user_class, params.min_link_distance_m);
            let draw: f64 = StandardNormal.sample(rng);
            let gain = -pl + params.sigma(params.user_user_class) * draw;
            user_user_db.set(i, j, gain);
            user_user_db.set(j, i, gain);
        }
    }

    LargeScaleGains {
        bs_user_db,
        user_user_db,
        bs_user_class: params.bs_user_class,
        user_user_class: params.user_user_class,
    }
}

// ============================================================================
// Per-slot link gains
// ============================================================================

/// Linear link gains for one slot, together with the noise floors and the
/// residual self-interference gain needed to evaluate any mode's SINR.
/// `h` is symmetric with an unused zero diagonal.
#[derive(Debug, Clone)]
pub struct LinkGains {
    pub g: Vec<f64>,
    pub h: SquareMat<f64>,
    pub psi: f64,
    pub noise: NoisePair,
}

impl LinkGains {
    pub fn k(&self) -> usize {
        self.g.len()
    }
}

/// Applies squared-envelope fading to a large-scale gain in dB.
#[inline]
pub fn faded_gain(large_scale_db: f64, fading: f64) -> f64 {
    db_to_linear(large_scale_db) * fading
}

/// Combines large-scale gains with explicit fading values (deterministic).
/// `fading_uu` must be symmetric where it is read (i != j).
pub fn slot_gains_with_fading(
    ls: &LargeScaleGains,
    psi: f64,
    noise: NoisePair,
    fading_bs: &[f64],
    fading_uu: &SquareMat<f64>,
) -> LinkGains {
    let k = ls.bs_user_db.len();
    let g = (0..k).map(|i| faded_gain(ls.bs_user_db[i], fading_bs[i])).collect();
    let mut h = SquareMat::filled(k, 0.0);
    for i in 0..k {
        for j in (i + 1)..k {
            let gain = faded_gain(ls.user_user_db.get(i, j), fading_uu.get(i, j));
            h.set(i, j, gain);
            h.set(j, i, gain);
        }
    }
    LinkGains { g, h, psi, noise }
}

/// Draws i.i.d. unit-mean Rayleigh-squared (exponential) fading for every
/// link and combines it with the large-scale gains. Links are reciprocal
/// within a slot; consecutive slots are independent.
pub fn sample_slot_gains(
    ls: &LargeScaleGains,
    psi: f64,
    noise: NoisePair,
    rng: &mut impl Rng,
) -> LinkGains {
    let k = ls.bs_user_db.len();
    let fading_bs: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let mut fading_uu = SquareMat::filled(k, 0.0);
    for i in 0..k {
        for j in (i + 1)..k {
            let x: f64 = Exp1.sample(rng);
            fading_uu.set(i, j, x);
            fading_uu.set(j, i, x);
        }
    }
    slot_gains_with_fading(ls, psi, noise, &fading_bs, &fading_uu)
}

// ============================================================================
// Power and noise calibration
// ============================================================================

/// Inputs for deriving noise floors and transmit power caps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationParams {
    pub bandwidth_hz: f64,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_bs_db: f64,
    pub noise_figure_user_db: f64,
    /// Target SNR in dB at `distance_m` under NLOS pathloss (no shadowing).
    pub target_snr_db: f64,
    pub distance_m: f64,
}

/// Derived noise floors and power caps in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub limits: PowerLimits,
    pub noise: NoisePair,
}

/// Noise floors from thermal density, bandwidth, and noise figures; power
/// caps chosen so an NLOS link at `distance_m` reaches `target_snr_db`
/// before shadowing and fading.
pub fn calibrate(cal: &CalibrationParams) -> Calibration {
    let n_u_dbm = cal.noise_density_dbm_hz + 10.0 * cal.bandwidth_hz.log10() + cal.noise_figure_bs_db;
    let n_d_dbm =
        cal.noise_density_dbm_hz + 10.0 * cal.bandwidth_hz.log10() + cal.noise_figure_user_db;
    let pl = pathloss_db(cal.distance_m, LinkClass::Nlos, DEFAULT_MIN_LINK_DISTANCE_M);
    let p_max_u_dbm = cal.target_snr_db + pl + n_u_dbm;
    let p_max_d_dbm = cal.target_snr_db + pl + n_d_dbm;
    Calibration {
        limits: PowerLimits {
            p_max_u: dbm_to_watts(p_max_u_dbm),
            p_max_d: dbm_to_watts(p_max_d_dbm),
        },
        noise: NoisePair {
            n_u: dbm_to_watts(n_u_dbm),
            n_d: dbm_to_watts(n_d_dbm),
        },
    }
}

// ============================================================================
// Tests
// ============================================================================
