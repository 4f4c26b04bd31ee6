//! Link gains for every transmitter-receiver pair in the coordination region.
//!
//! Terrestrial UE-BS gains combine the BS array pattern, path loss, log-normal
//! shadowing and Rayleigh small-scale fading. UAV-BS gains use a probabilistic
//! LoS/NLoS draw and are frequency-flat: one draw per BS is reused on every
//! resource block. All powers are linear watts internally; dBm appears only at
//! the configuration and reporting boundaries.
//!
//! Randomness is counter-based: every draw derives its own generator from
//! (seed, stream, link id), so gain draws are independent of evaluation order
//! and the assembled state is bit-reproducible for a fixed seed.

pub mod antenna;
pub mod pathloss;

pub use antenna::{bs_gain, elevation_deg, UavAntenna, UlaPattern};
pub use pathloss::{LinkGeometry, PathlossModel, PathlossTable};

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use thiserror::Error;

use crate::scheduler::{GroundUe, RbOccupancy};
use crate::topology::{Cell, HexGrid, NeighborSets};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid antenna: {0}")]
    InvalidAntenna(String),
    #[error("cone model needs the UAV above the BS (uav {uav_height_m} m, bs {bs_height_m} m)")]
    ConeGeometry { uav_height_m: f64, bs_height_m: f64 },
    #[error("altitude {altitude_m} m outside the model range [{min_m}, {max_m}] m")]
    AltitudeOutOfRange { altitude_m: f64, min_m: f64, max_m: f64 },
    #[error("path-loss table: {0}")]
    Table(String),
}

/// Everything needed to draw gains for one scenario realization.
#[derive(Debug, Clone)]
pub struct ChannelParams {
    pub carrier_freq_hz: f64,
    /// Receiver noise power spectral density, noise figure included.
    pub noise_psd_dbm_hz: f64,
    pub rb_bandwidth_hz: f64,
    pub bs_antenna: UlaPattern,
    pub uav_antenna: UavAntenna,
    pub model: PathlossModel,
    pub table: PathlossTable,
    pub enable_shadowing: bool,
    pub enable_fading: bool,
    pub rng_seed: u64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.carrier_freq_hz > 0.0) {
            return Err(ChannelError::InvalidAntenna("carrier frequency must be positive".into()));
        }
        if !(self.rb_bandwidth_hz > 0.0) {
            return Err(ChannelError::InvalidAntenna("RB bandwidth must be positive".into()));
        }
        self.bs_antenna.validate()?;
        self.uav_antenna.validate()
    }

    pub fn carrier_freq_ghz(&self) -> f64 {
        self.carrier_freq_hz / 1e9
    }

    /// Thermal noise power over one RB, in watts.
    pub fn thermal_noise_w(&self) -> f64 {
        dbm_to_w(self.noise_psd_dbm_hz + 10.0 * self.rb_bandwidth_hz.log10())
    }
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

// RNG stream tags; link ids fill the remaining words.
pub(crate) const STREAM_TERRESTRIAL: u64 = 1;
pub(crate) const STREAM_UAV: u64 = 2;
pub(crate) const STREAM_PLACE_CELL: u64 = 3;
pub(crate) const STREAM_PLACE_POS: u64 = 4;
pub(crate) const STREAM_ASSIGN: u64 = 5;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-link generator keyed by (seed, stream, a, b).
pub(crate) fn stream_rng(seed: u64, stream: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut state = seed;
    state ^= splitmix64(&mut { stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) });
    state = state.wrapping_add(stream);
    let mut key = [0u8; 32];
    let mut x = state;
    x ^= a.wrapping_mul(0xA076_1D64_78BD_642F);
    x ^= b.wrapping_mul(0xE703_7ED1_A0B4_28DB);
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut x).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Unit-mean exponential power of a Rayleigh fade.
fn rayleigh_power<R: Rng>(rng: &mut R) -> f64 {
    Exp::new(1.0).unwrap().sample(rng)
}

fn shadow_db<R: Rng>(sigma_db: f64, rng: &mut R) -> f64 {
    if sigma_db <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma_db).unwrap().sample(rng)
}

/// Core terrestrial draw shared by ground UEs and a low-altitude UAV.
fn terrestrial_gain_core<R: Rng>(
    params: &ChannelParams,
    geom: &LinkGeometry,
    rng: &mut R,
) -> (f64, bool) {
    let p_los = params.table.terrestrial_los_probability(params.model, geom);
    let los = rng.gen::<f64>() < p_los;
    let budget = params
        .table
        .terrestrial_pathloss(params.model, params.carrier_freq_ghz(), geom, los);
    let shadow = if params.enable_shadowing {
        shadow_db(budget.shadow_sigma_db, rng)
    } else {
        0.0
    };
    let fade = if params.enable_fading {
        rayleigh_power(rng)
    } else {
        1.0
    };
    let ant = bs_gain(&params.bs_antenna, geom.elevation_deg());
    let gain = ant * 10f64.powf(-(budget.pathloss_db + shadow) / 10.0) * fade;
    (gain, budget.clamped)
}

/// Channel power gain from a ground UE to the BS of `cell`.
///
/// Returns the linear gain and whether the distance had to be clamped to the
/// model's validity floor.
pub fn draw_terrestrial_gain<R: Rng>(
    params: &ChannelParams,
    ue_xy_m: (f64, f64),
    ue_height_m: f64,
    cell: &Cell,
    rng: &mut R,
) -> (f64, bool) {
    let d2d = ((ue_xy_m.0 - cell.center_m.0).powi(2) + (ue_xy_m.1 - cell.center_m.1).powi(2)).sqrt();
    let geom = LinkGeometry {
        d2d_m: d2d,
        ue_height_m,
        bs_height_m: cell.bs_height_m,
    };
    terrestrial_gain_core(params, &geom, rng)
}

/// Frequency-flat channel power gain from the UAV to the BS of `cell`.
///
/// Low altitudes (at or below the aerial model floor) reuse the terrestrial
/// draw, Rayleigh fading included, so a UAV at UE height is statistically a
/// ground UE. Above the floor the LoS state is Bernoulli with the
/// altitude-dependent probability and there is no small-scale fading.
pub fn draw_uav_gain<R: Rng>(
    params: &ChannelParams,
    uav_xy_m: (f64, f64),
    uav_height_m: f64,
    cell: &Cell,
    rng: &mut R,
) -> Result<f64, ChannelError> {
    let d2d = ((uav_xy_m.0 - cell.center_m.0).powi(2) + (uav_xy_m.1 - cell.center_m.1).powi(2)).sqrt();
    let geom = LinkGeometry {
        d2d_m: d2d,
        ue_height_m: uav_height_m,
        bs_height_m: cell.bs_height_m,
    };
    let ant_uav = params.uav_antenna.gain(d2d, uav_height_m, cell.bs_height_m)?;

    if params.table.aerial_uses_terrestrial(params.model, uav_height_m) {
        // Validate the altitude before drawing.
        params.table.aerial_los_probability(params.model, &geom)?;
        let (gain, _) = terrestrial_gain_core(params, &geom, rng);
        return Ok(gain * ant_uav);
    }

    let p_los = params.table.aerial_los_probability(params.model, &geom)?;
    let los = rng.gen::<f64>() < p_los;
    let budget = params
        .table
        .aerial_pathloss(params.model, params.carrier_freq_ghz(), &geom, los)?;
    let shadow = if params.enable_shadowing {
        shadow_db(budget.shadow_sigma_db, rng)
    } else {
        0.0
    };
    let ant_bs = bs_gain(&params.bs_antenna, geom.elevation_deg());
    Ok(ant_bs * ant_uav * 10f64.powf(-(budget.pathloss_db + shadow) / 10.0))
}

/// Gains from every ground UE to every BS, indexed `[ue][cell]`.
#[derive(Debug, Clone)]
pub struct UeGains {
    gains: Vec<Vec<f64>>,
    pub clamped_links: usize,
}

impl UeGains {
    pub fn get(&self, ue: usize, cell: usize) -> f64 {
        self.gains[ue][cell]
    }
}

/// Draw the full UE-to-BS gain matrix; each link has its own RNG stream.
pub fn draw_all_ue_gains(params: &ChannelParams, grid: &HexGrid, ues: &[GroundUe]) -> UeGains {
    let mut clamped_links = 0;
    let gains = ues
        .iter()
        .map(|ue| {
            grid.cells
                .iter()
                .map(|cell| {
                    let mut rng = stream_rng(
                        params.rng_seed,
                        STREAM_TERRESTRIAL,
                        ue.id as u64,
                        cell.id as u64,
                    );
                    let (g, clamped) =
                        draw_terrestrial_gain(params, ue.position_m, ue.height_m, cell, &mut rng);
                    if clamped {
                        clamped_links += 1;
                    }
                    g
                })
                .collect()
        })
        .collect();
    UeGains { gains, clamped_links }
}

/// Noise-plus-residual-ICI power sigma^2_j(n) for every (cell, RB).
///
/// Residual ICI at cell j on RB n sums the received power of co-channel
/// ground UEs scheduled in cells beyond the first q rings of j; closer cells
/// are covered by the terrestrial coordination and contribute nothing.
pub fn noise_and_residual_ici(
    params: &ChannelParams,
    neighbors: &NeighborSets,
    q: usize,
    occupancy: &RbOccupancy,
    ues: &[GroundUe],
    gains: &UeGains,
) -> Vec<Vec<f64>> {
    let thermal = params.thermal_noise_w();
    (0..occupancy.n_cells)
        .map(|j| {
            let nj = neighbors.get(j, q);
            (0..occupancy.n_rbs)
                .map(|n| {
                    let mut sigma = thermal;
                    for &jp in occupancy.occupied_cells(n) {
                        if jp == j || nj.contains(&jp) {
                            continue;
                        }
                        let ue = occupancy.ue_at(jp, n).expect("occupied cell has a UE");
                        sigma += ues[ue].tx_power_w * gains.get(ue, j);
                    }
                    sigma
                })
                .collect()
        })
        .collect()
}

/// Per-draw bookkeeping surfaced in reports.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct ChannelDiagnostics {
    /// Links whose distance fell below the path-loss validity floor.
    pub clamped_links: usize,
}

/// All link gains the optimizers consume, immutable once built.
#[derive(Debug, Clone)]
pub struct ChannelState {
    n_cells: usize,
    n_rbs: usize,
    /// Terrestrial gain of the scheduled UE, keyed by occupied (cell, RB).
    h: BTreeMap<(usize, usize), f64>,
    /// UAV-to-BS gain per cell, frequency-flat.
    f_tilde: Vec<f64>,
    /// Noise-plus-residual-ICI power per (cell, RB), watts.
    sigma2: Vec<Vec<f64>>,
    /// Normalized UAV gain F_j(n) = f_tilde[j] / sigma2[j][n], per watt.
    f: Vec<Vec<f64>>,
    pub diagnostics: ChannelDiagnostics,
}

impl ChannelState {
    /// Assemble a state from raw per-link quantities; the normalized gains
    /// are derived so the frequency-flat identity holds by construction.
    pub fn from_parts(
        f_tilde: Vec<f64>,
        sigma2: Vec<Vec<f64>>,
        h: BTreeMap<(usize, usize), f64>,
    ) -> Self {
        let n_cells = f_tilde.len();
        let n_rbs = sigma2.first().map_or(0, Vec::len);
        assert_eq!(sigma2.len(), n_cells);
        let f = f_tilde
            .iter()
            .zip(&sigma2)
            .map(|(ft, row)| row.iter().map(|s| ft / s).collect())
            .collect();
        Self {
            n_cells,
            n_rbs,
            h,
            f_tilde,
            sigma2,
            f,
            diagnostics: ChannelDiagnostics::default(),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_rbs(&self) -> usize {
        self.n_rbs
    }

    /// Terrestrial gain of the UE scheduled at (cell, RB), if any.
    pub fn h(&self, cell: usize, rb: usize) -> Option<f64> {
        self.h.get(&(cell, rb)).copied()
    }

    pub fn f_tilde(&self, cell: usize) -> f64 {
        self.f_tilde[cell]
    }

    pub fn sigma2(&self, cell: usize, rb: usize) -> f64 {
        self.sigma2[cell][rb]
    }

    /// Normalized UAV gain F_j(n), in 1/W.
    pub fn f(&self, cell: usize, rb: usize) -> f64 {
        self.f[cell][rb]
    }
}

/// Draw every gain for one scenario realization and assemble the state.
pub fn build_channel_state(
    params: &ChannelParams,
    grid: &HexGrid,
    neighbors: &NeighborSets,
    q: usize,
    uav_xy_m: (f64, f64),
    uav_height_m: f64,
    ues: &[GroundUe],
    occupancy: &RbOccupancy,
) -> Result<ChannelState, ChannelError> {
    params.validate()?;
    let gains = draw_all_ue_gains(params, grid, ues);

    let f_tilde = grid
        .cells
        .iter()
        .map(|cell| {
            let mut rng = stream_rng(params.rng_seed, STREAM_UAV, cell.id as u64, 0);
            draw_uav_gain(params, uav_xy_m, uav_height_m, cell, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let sigma2 = noise_and_residual_ici(params, neighbors, q, occupancy, ues, &gains);

    let mut h = BTreeMap::new();
    for n in 0..occupancy.n_rbs {
        for &j in occupancy.occupied_cells(n) {
            let ue = occupancy.ue_at(j, n).expect("occupied cell has a UE");
            h.insert((j, n), gains.get(ue, j));
        }
    }

    let mut state = ChannelState::from_parts(f_tilde, sigma2, h);
    state.diagnostics.clamped_links = gains.clamped_links;
    Ok(state)
}
