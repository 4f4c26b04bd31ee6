//! Scenario configuration and per-snapshot instance assembly.
//!
//! A [`ScenarioConfig`] is the single source of truth for a run: topology,
//! user population, UAV placement, channel model, weights and solver knobs.
//! Defaults reproduce the full-scale setup (five tiers, 500 m cells, 60 UEs
//! on 30 RBs, the UAV at (150, 420) m and 60 m altitude, 23 dBm budgets).
//! Configs load from TOML with unknown keys rejected.
//!
//! Each snapshot derives its own seed from the master seed, and everything
//! downstream is deterministic given that seed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{
    self, dbm_to_w, ChannelError, ChannelParams, ChannelState, PathlossModel, PathlossTable,
    UavAntenna, UlaPattern,
};
use crate::icic::{Scheme, SolverOptions};
use crate::rates::Weights;
use crate::scheduler::{self, AssignOrder, GroundUe, RbOccupancy, ScheduleError};
use crate::topology::{self, HexGrid, NeighborSets};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("failed to parse config: {0}")]
    Parse(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub radius_m: f64,
    pub tiers: usize,
    pub bs_height_m: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            radius_m: 500.0,
            tiers: 5,
            bs_height_m: 25.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UeConfig {
    pub count: usize,
    pub height_m: f64,
    pub tx_power_dbm: f64,
    /// Coordination ring depth of the terrestrial RB criterion.
    pub q: usize,
    /// Number of RBs in the shared subband.
    pub rbs: usize,
    pub assign_order: AssignOrder,
    /// Optional explicit UE count per cell (length = cell count, sum = count).
    pub per_cell: Option<Vec<usize>>,
}

impl Default for UeConfig {
    fn default() -> Self {
        Self {
            count: 60,
            height_m: 1.5,
            tx_power_dbm: 23.0,
            q: 2,
            rbs: 30,
            assign_order: AssignOrder::CellOrder,
            per_cell: None,
        }
    }
}

/// UAV antenna selection in config form; converted after strict parsing.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UavAntennaConfig {
    /// "isotropic" or "directional".
    pub kind: String,
    pub half_beamwidth_deg: f64,
    pub main_gain_const: f64,
    pub side_gain: f64,
}

impl Default for UavAntennaConfig {
    fn default() -> Self {
        Self {
            kind: "isotropic".into(),
            half_beamwidth_deg: 90.0,
            main_gain_const: 7500.0,
            side_gain: 0.0,
        }
    }
}

impl UavAntennaConfig {
    pub fn to_antenna(&self) -> Result<UavAntenna, ConfigError> {
        let antenna = match self.kind.as_str() {
            "isotropic" => UavAntenna::Isotropic,
            "directional" => UavAntenna::Directional {
                half_beamwidth_deg: self.half_beamwidth_deg,
                main_gain_const: self.main_gain_const,
                side_gain: self.side_gain,
            },
            other => {
                return Err(invalid(
                    "uav.antenna.kind",
                    format!("unknown kind `{other}` (expected isotropic or directional)"),
                ))
            }
        };
        antenna
            .validate()
            .map_err(|e| invalid("uav.antenna", e.to_string()))?;
        Ok(antenna)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UavConfig {
    pub x_m: f64,
    pub y_m: f64,
    pub height_m: f64,
    pub p_max_dbm: f64,
    pub antenna: UavAntennaConfig,
}

impl Default for UavConfig {
    fn default() -> Self {
        Self {
            x_m: 150.0,
            y_m: 420.0,
            height_m: 60.0,
            p_max_dbm: 23.0,
            antenna: UavAntennaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub carrier_freq_ghz: f64,
    /// Includes the receiver noise figure.
    pub noise_psd_dbm_hz: f64,
    pub rb_bandwidth_hz: f64,
    pub model: PathlossModel,
    /// Override the bundled path-loss parameter table.
    pub table_path: Option<String>,
    pub enable_shadowing: bool,
    pub enable_fading: bool,
    pub bs_antenna: UlaPattern,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            carrier_freq_ghz: 2.0,
            noise_psd_dbm_hz: -164.0,
            rb_bandwidth_hz: 180_000.0,
            model: PathlossModel::Uma,
            table_path: None,
            enable_shadowing: true,
            enable_fading: true,
            bs_antenna: UlaPattern::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsConfig {
    pub mu_u: f64,
    pub mu_g: f64,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self { mu_u: 1.0, mu_g: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Objective-improvement stop threshold of the iterative solver.
    pub epsilon: f64,
    pub max_iters: usize,
    /// RBs with best free gain at or below this are excluded.
    pub gain_floor: f64,
    /// BSs per cluster in the decentralized protocol.
    pub cluster_size: usize,
    /// Compute the dual upper bound per snapshot.
    pub compute_bound: bool,
    /// Per-RB certified rate slack of the dual subproblem solver.
    pub dual_rate_epsilon: f64,
    /// Relative tolerance of the outer dual bisection.
    pub nu_rel_tol: f64,
    pub opa_epsilon: f64,
    pub opa_delta_tol: f64,
    pub opa_vertex_cap: usize,
    pub opa_max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iters: 200,
            gain_floor: 0.0,
            cluster_size: 4,
            compute_bound: true,
            dual_rate_epsilon: 1e-6,
            nu_rel_tol: 1e-8,
            opa_epsilon: 1e-6,
            opa_delta_tol: 1e-9,
            opa_vertex_cap: 100_000,
            opa_max_iters: 80_000,
        }
    }
}

/// The complete description of one experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Independent channel realizations to average over.
    pub snapshots: usize,
    /// Scheme names, or ["all"].
    pub schemes: Vec<String>,
    pub grid: GridConfig,
    pub ues: UeConfig,
    pub uav: UavConfig,
    pub channel: ChannelConfig,
    pub weights: WeightsConfig,
    pub solver: SolverConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            snapshots: 50,
            schemes: vec!["all".into()],
            grid: GridConfig::default(),
            ues: UeConfig::default(),
            uav: UavConfig::default(),
            channel: ChannelConfig::default(),
            weights: WeightsConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

const ALL_SCHEMES: [Scheme; 6] = [
    Scheme::Egoistic,
    Scheme::Altruistic,
    Scheme::Terrestrial,
    Scheme::Sca,
    Scheme::DecentralOneRound,
    Scheme::DecentralIterative,
];

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Check every invariant a run relies on; errors carry the field path.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.snapshots == 0 {
            return Err(invalid("snapshots", "must be at least 1"));
        }
        if !(self.grid.radius_m > 0.0) {
            return Err(invalid("grid.radius_m", "must be positive"));
        }
        if !(self.grid.bs_height_m > 0.0) {
            return Err(invalid("grid.bs_height_m", "must be positive"));
        }
        if self.ues.rbs == 0 {
            return Err(invalid("ues.rbs", "must be at least 1"));
        }
        if !(self.ues.height_m > 0.0) {
            return Err(invalid("ues.height_m", "must be positive"));
        }
        if !(self.uav.height_m > 0.0) {
            return Err(invalid("uav.height_m", "must be positive"));
        }
        if !(self.channel.carrier_freq_ghz > 0.0) {
            return Err(invalid("channel.carrier_freq_ghz", "must be positive"));
        }
        if !(self.channel.rb_bandwidth_hz > 0.0) {
            return Err(invalid("channel.rb_bandwidth_hz", "must be positive"));
        }
        if self.weights.mu_u < 0.0 || self.weights.mu_g < 0.0 {
            return Err(invalid("weights", "weights must be nonnegative"));
        }
        if self.weights.mu_u == 0.0 && self.weights.mu_g == 0.0 {
            return Err(invalid("weights", "at least one weight must be positive"));
        }
        if self.solver.cluster_size == 0 {
            return Err(invalid("solver.cluster_size", "must be at least 1"));
        }
        if !(self.solver.epsilon > 0.0) {
            return Err(invalid("solver.epsilon", "must be positive"));
        }
        if let Some(per_cell) = &self.ues.per_cell {
            let cells = HexGrid::cell_count_for_tiers(self.grid.tiers);
            if per_cell.len() != cells {
                return Err(invalid(
                    "ues.per_cell",
                    format!("has {} entries for {} cells", per_cell.len(), cells),
                ));
            }
            let sum: usize = per_cell.iter().sum();
            if sum != self.ues.count {
                return Err(invalid(
                    "ues.per_cell",
                    format!("sums to {sum}, expected ues.count = {}", self.ues.count),
                ));
            }
        }
        self.uav.antenna.to_antenna()?;
        self.parsed_schemes()?;
        Ok(())
    }

    pub fn parsed_schemes(&self) -> Result<Vec<Scheme>, ConfigError> {
        let mut out = Vec::new();
        for name in &self.schemes {
            match name.as_str() {
                "all" => out.extend(ALL_SCHEMES),
                "egoistic" => out.push(Scheme::Egoistic),
                "altruistic" => out.push(Scheme::Altruistic),
                "terrestrial" => out.push(Scheme::Terrestrial),
                "sca" => out.push(Scheme::Sca),
                "decentral-one-round" => out.push(Scheme::DecentralOneRound),
                "decentral-iterative" => out.push(Scheme::DecentralIterative),
                other => {
                    return Err(invalid(
                        "schemes",
                        format!("unknown scheme `{other}`"),
                    ))
                }
            }
        }
        out.dedup();
        Ok(out)
    }

    /// Load the path-loss table this config points at (bundled by default).
    pub fn pathloss_table(&self) -> Result<PathlossTable, ConfigError> {
        match &self.channel.table_path {
            None => Ok(PathlossTable::bundled()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                    path: path.clone(),
                    source,
                })?;
                PathlossTable::parse(&text)
                    .map_err(|e| invalid("channel.table_path", e.to_string()))
            }
        }
    }

    pub fn weights(&self) -> Weights {
        Weights::new(self.weights.mu_u, self.weights.mu_g)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            epsilon: self.solver.epsilon,
            max_iters: self.solver.max_iters,
            gain_floor: self.solver.gain_floor,
        }
    }

    pub fn p_max_w(&self) -> f64 {
        dbm_to_w(self.uav.p_max_dbm)
    }

    fn channel_params(&self, table: &PathlossTable, seed: u64) -> Result<ChannelParams, ConfigError> {
        Ok(ChannelParams {
            carrier_freq_hz: self.channel.carrier_freq_ghz * 1e9,
            noise_psd_dbm_hz: self.channel.noise_psd_dbm_hz,
            rb_bandwidth_hz: self.channel.rb_bandwidth_hz,
            bs_antenna: self.channel.bs_antenna,
            uav_antenna: self.uav.antenna.to_antenna()?,
            model: self.channel.model,
            table: table.clone(),
            enable_shadowing: self.channel.enable_shadowing,
            enable_fading: self.channel.enable_fading,
            rng_seed: seed,
        })
    }

    /// Compact randomized configuration on the simplified channel model,
    /// for studies and benchmarks that need many small instances.
    pub fn small_random(seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xC0FF_EE11);
        let tiers = rng.gen_range(1..=3usize);
        let cells = HexGrid::cell_count_for_tiers(tiers);
        let mut cfg = Self {
            seed,
            snapshots: 1,
            grid: GridConfig {
                radius_m: 400.0,
                tiers,
                bs_height_m: 25.0,
            },
            ues: UeConfig {
                count: rng.gen_range(2..=20usize.min(3 * cells)),
                q: rng.gen_range(1..=2),
                rbs: rng.gen_range(2..=10),
                ..UeConfig::default()
            },
            uav: UavConfig {
                x_m: rng.gen_range(-200.0..200.0),
                y_m: rng.gen_range(-200.0..200.0),
                height_m: rng.gen_range(40.0..120.0),
                p_max_dbm: rng.gen_range(13.0..23.0),
                antenna: UavAntennaConfig::default(),
            },
            channel: ChannelConfig {
                model: PathlossModel::Simplified,
                ..ChannelConfig::default()
            },
            ..Self::default()
        };
        cfg.solver.cluster_size = rng.gen_range(1..=4);
        cfg
    }
}

/// Per-snapshot seed derivation from the master seed.
pub fn snapshot_seed(master: u64, index: u64) -> u64 {
    let mut state = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    state = (state ^ (state >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    state = (state ^ (state >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    state ^ (state >> 31)
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// One fully-drawn realization: everything the optimizers consume.
#[derive(Debug, Clone)]
pub struct Instance {
    pub grid: HexGrid,
    pub neighbors: NeighborSets,
    pub ues: Vec<GroundUe>,
    pub occupancy: RbOccupancy,
    pub channel: ChannelState,
}

/// Build the instance for one snapshot: layout, placement, RB assignment,
/// gain draws and SINRs, in that order.
pub fn build_instance(
    cfg: &ScenarioConfig,
    table: &PathlossTable,
    seed: u64,
) -> Result<Instance, BuildError> {
    let grid = topology::build_grid(cfg.grid.radius_m, cfg.grid.tiers, cfg.grid.bs_height_m);
    let q_max = cfg.ues.q.max(1);
    let neighbors = topology::neighbor_sets(&grid, q_max);

    let ues = scheduler::place_ues(
        &grid,
        cfg.ues.count,
        cfg.ues.per_cell.as_deref(),
        cfg.ues.height_m,
        dbm_to_w(cfg.ues.tx_power_dbm),
        seed,
    )?;
    let (ues, mut occupancy) =
        scheduler::assign_rbs(ues, &neighbors, cfg.ues.q, cfg.ues.rbs, cfg.ues.assign_order, seed);

    let params = cfg.channel_params(table, seed)?;
    let channel = channel::build_channel_state(
        &params,
        &grid,
        &neighbors,
        cfg.ues.q,
        (cfg.uav.x_m, cfg.uav.y_m),
        cfg.uav.height_m,
        &ues,
        &occupancy,
    )?;
    occupancy.gamma = scheduler::compute_ground_sinrs(&occupancy, &ues, &channel);

    Ok(Instance {
        grid,
        neighbors,
        ues,
        occupancy,
        channel,
    })
}
