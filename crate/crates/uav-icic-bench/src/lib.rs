//! Shared fixtures for the benchmark targets.

use uav_icic::scenario::{build_instance, snapshot_seed, Instance, ScenarioConfig};

/// A mid-size realization on the simplified channel model.
pub fn bench_instance(tiers: usize, rbs: usize, ues: usize) -> (ScenarioConfig, Instance) {
    let mut cfg = ScenarioConfig::small_random(42);
    cfg.grid.tiers = tiers;
    cfg.ues.rbs = rbs;
    cfg.ues.count = ues;
    cfg.ues.per_cell = None;
    let table = cfg.pathloss_table().expect("bundled table");
    let inst = build_instance(&cfg, &table, snapshot_seed(cfg.seed, 0)).expect("instance builds");
    (cfg, inst)
}
