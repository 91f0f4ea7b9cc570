//! Deterministic fixtures shared by the benchmark targets.

use fdcell_core::channel::{place_users, sample_large_scale, sample_slot_gains, LinkGains};
use fdcell_core::config::SimConfig;
use fdcell_core::power::PairContext;
use fdcell_core::sim::{sample_pair_contexts, SimSetup};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed for all fixtures, so timings compare like against like.
pub const SEED: u64 = 42;

/// The default six-user setup.
pub fn default_setup() -> SimSetup {
    SimConfig::default().setup().expect("default config is valid")
}

/// Samples `n` independent two-user pairing contexts.
pub fn pair_contexts(n: usize) -> Vec<PairContext> {
    let setup = default_setup();
    sample_pair_contexts(&setup, n, SEED).expect("default setup supports pair sampling")
}

/// Samples `n` slot channel realizations of a single user drop.
pub fn slot_gains(setup: &SimSetup, n: usize) -> Vec<LinkGains> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let layout = place_users(
        &setup.channel.geometry,
        setup.k,
        setup.n_h,
        setup.channel.hotspot_radius_m,
        &mut rng,
    )
    .expect("default geometry admits the default user count");
    let ls = sample_large_scale(&layout, &setup.channel, &mut rng);
    (0..n)
        .map(|_| sample_slot_gains(&ls, setup.psi, setup.calibration.noise, &mut rng))
        .collect()
}
