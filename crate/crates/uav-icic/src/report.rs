//! Batch execution and result persistence.
//!
//! A run solves every requested scheme on each snapshot, optionally computes
//! the dual upper bound, and aggregates means with normal-approximation
//! confidence half-widths. Reports serialize to JSON with stable field order;
//! sweep and rate-region tables are derived from the same in-memory reports
//! that back the JSON, so the CSV never re-computes anything.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::channel::PathlossTable;
use crate::decentral::{self, DecentralMode, MessageLedger};
use crate::dual_bound::{self, DualOptions, OpaOptions};
use crate::icic::{self, IcicSolution, InitMode, Scheme};
use crate::rates::{RateReport, Weights};
use crate::scenario::{
    build_instance, snapshot_seed, BuildError, ConfigError, Instance, ScenarioConfig,
};

/// Current layout version of the JSON report and CSV tables.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl RunError {
    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e.to_string())
    }
}

impl From<BuildError> for RunError {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::Config(c) => RunError::Config(c.to_string()),
            other => RunError::Numerical(other.to_string()),
        }
    }
}

impl From<icic::IcicError> for RunError {
    fn from(e: icic::IcicError) -> Self {
        RunError::Numerical(e.to_string())
    }
}

impl From<dual_bound::DualError> for RunError {
    fn from(e: dual_bound::DualError) -> Self {
        RunError::Numerical(e.to_string())
    }
}

impl From<decentral::DecentralError> for RunError {
    fn from(e: decentral::DecentralError) -> Self {
        RunError::Numerical(e.to_string())
    }
}

/// One scheme's outcome on one snapshot.
#[derive(Debug, Clone, Serialize)]
pub struct SchemeReport {
    pub scheme: Scheme,
    pub denied: bool,
    pub rates: RateReport,
    pub power_w: Vec<f64>,
    pub association: Vec<Option<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<icic::SolveDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ledger: Option<MessageLedger>,
}

impl SchemeReport {
    fn from_solution(sol: IcicSolution, ledger: Option<MessageLedger>) -> Self {
        Self {
            scheme: sol.scheme,
            denied: sol.denied,
            rates: sol.rates,
            power_w: sol.power.p,
            association: sol.association.j_star,
            diagnostics: sol.diagnostics,
            ledger,
        }
    }
}

/// Dual-bound summary for one snapshot.
#[derive(Debug, Clone, Serialize)]
pub struct DualReport {
    pub nu_star: f64,
    pub bound: f64,
    /// (bound - best scheme) / bound.
    pub gap_vs_best: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotReport {
    pub index: usize,
    pub seed: u64,
    pub blocked_ues: usize,
    pub fully_free_rbs: usize,
    pub clamped_links: usize,
    pub schemes: Vec<SchemeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual: Option<DualReport>,
}

/// Mean and half-width over the snapshots of one scheme.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateRow {
    pub scheme: Scheme,
    pub uav_rate_mean: f64,
    pub uav_rate_hw: f64,
    pub ground_rate_mean: f64,
    pub ground_rate_hw: f64,
    pub weighted_mean: f64,
    pub weighted_hw: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_vs_bound_mean: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: ScenarioConfig,
    pub snapshots: Vec<SnapshotReport>,
    pub aggregate: Vec<AggregateRow>,
}

/// 95% confidence half-width under the normal approximation.
fn half_width(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    1.96 * (var / n as f64).sqrt()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

fn solve_schemes(
    cfg: &ScenarioConfig,
    inst: &Instance,
    weights: &Weights,
    schemes: &[Scheme],
) -> Result<Vec<SchemeReport>, RunError> {
    let opts = cfg.solver_options();
    let p_max = cfg.p_max_w();
    let mut out = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let report = match scheme {
            Scheme::Egoistic => SchemeReport::from_solution(
                icic::egoistic(&inst.channel, &inst.occupancy, weights, p_max, &opts)?,
                None,
            ),
            Scheme::Altruistic => SchemeReport::from_solution(
                icic::altruistic(&inst.channel, &inst.occupancy, weights, p_max, &opts)?,
                None,
            ),
            Scheme::Terrestrial => SchemeReport::from_solution(
                icic::terrestrial_icic(
                    &inst.channel,
                    &inst.occupancy,
                    &inst.neighbors,
                    cfg.ues.q,
                    weights,
                    p_max,
                    &opts,
                )?,
                None,
            ),
            Scheme::Sca => SchemeReport::from_solution(
                icic::sca_solve(&inst.channel, &inst.occupancy, weights, p_max, &opts, InitMode::Default)?,
                None,
            ),
            Scheme::DecentralOneRound | Scheme::DecentralIterative => {
                let clusters = decentral::make_clusters(&inst.grid, cfg.solver.cluster_size);
                let partition = decentral::assign_heads(clusters, &inst.channel);
                let mode = match scheme {
                    Scheme::DecentralOneRound => DecentralMode::OneRound,
                    _ => DecentralMode::Iterative {
                        epsilon: cfg.solver.epsilon,
                        max_rounds: cfg.solver.max_iters,
                    },
                };
                let (sol, ledger) = decentral::run_decentralized(
                    &inst.channel,
                    &inst.occupancy,
                    &partition,
                    weights,
                    p_max,
                    mode,
                    &opts,
                )?;
                SchemeReport::from_solution(sol, Some(ledger))
            }
        };
        out.push(report);
    }
    Ok(out)
}

fn dual_options(cfg: &ScenarioConfig) -> DualOptions {
    DualOptions {
        rate_epsilon: cfg.solver.dual_rate_epsilon,
        nu_rel_tol: cfg.solver.nu_rel_tol,
        opa: OpaOptions {
            epsilon: cfg.solver.opa_epsilon,
            rel_epsilon: 0.0,
            delta_tol: cfg.solver.opa_delta_tol,
            vertex_cap: cfg.solver.opa_vertex_cap,
            max_iters: cfg.solver.opa_max_iters,
        },
    }
}

fn solve_snapshot(
    cfg: &ScenarioConfig,
    table: &PathlossTable,
    schemes: &[Scheme],
    index: usize,
) -> Result<SnapshotReport, RunError> {
    let seed = snapshot_seed(cfg.seed, index as u64);
    let inst = build_instance(cfg, table, seed)?;
    let weights = cfg.weights();
    let scheme_reports = solve_schemes(cfg, &inst, &weights, schemes)?;

    let dual = if cfg.solver.compute_bound {
        let result = dual_bound::dual_minimize(
            &inst.channel,
            &inst.occupancy,
            &weights,
            cfg.p_max_w(),
            &dual_options(cfg),
        )?;
        let best = scheme_reports
            .iter()
            .map(|s| s.rates.weighted)
            .fold(f64::NEG_INFINITY, f64::max);
        Some(DualReport {
            nu_star: result.nu_star,
            bound: result.g_value,
            gap_vs_best: if best.is_finite() && result.g_value > 0.0 {
                (result.g_value - best) / result.g_value
            } else {
                f64::NAN
            },
        })
    } else {
        None
    };

    Ok(SnapshotReport {
        index,
        seed,
        blocked_ues: inst.occupancy.blocked.len(),
        fully_free_rbs: inst.occupancy.fully_free_rbs().len(),
        clamped_links: inst.channel.diagnostics.clamped_links,
        schemes: scheme_reports,
        dual,
    })
}

fn aggregate(schemes: &[Scheme], snapshots: &[SnapshotReport]) -> Vec<AggregateRow> {
    let bounds: Vec<f64> = snapshots
        .iter()
        .filter_map(|s| s.dual.as_ref().map(|d| d.bound))
        .collect();
    let bound_mean = (!bounds.is_empty()).then(|| mean(&bounds));
    schemes
        .iter()
        .map(|&scheme| {
            let pick = |f: &dyn Fn(&SchemeReport) -> f64| -> Vec<f64> {
                snapshots
                    .iter()
                    .flat_map(|s| s.schemes.iter().filter(|r| r.scheme == scheme).map(f))
                    .collect()
            };
            let uav = pick(&|r| r.rates.uav_rate);
            let ground = pick(&|r| r.rates.ground_rate);
            let weighted = pick(&|r| r.rates.weighted);
            let gap = bound_mean.map(|_| {
                let gaps: Vec<f64> = snapshots
                    .iter()
                    .filter_map(|s| {
                        let b = s.dual.as_ref()?.bound;
                        let w = s.schemes.iter().find(|r| r.scheme == scheme)?.rates.weighted;
                        Some((b - w) / b)
                    })
                    .collect();
                mean(&gaps)
            });
            AggregateRow {
                scheme,
                uav_rate_mean: mean(&uav),
                uav_rate_hw: half_width(&uav),
                ground_rate_mean: mean(&ground),
                ground_rate_hw: half_width(&ground),
                weighted_mean: mean(&weighted),
                weighted_hw: half_width(&weighted),
                bound_mean,
                gap_vs_bound_mean: gap,
            }
        })
        .collect()
}

/// Execute every snapshot (in parallel) and assemble the report.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport, RunError> {
    cfg.validate().map_err(RunError::from)?;
    let table = cfg.pathloss_table()?;
    let schemes = cfg.parsed_schemes()?;
    let snapshots: Vec<SnapshotReport> = (0..cfg.snapshots)
        .into_par_iter()
        .map(|i| solve_snapshot(cfg, &table, &schemes, i))
        .collect::<Result<_, _>>()?;
    let aggregate = aggregate(&schemes, &snapshots);
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        snapshots,
        aggregate,
    })
}

/// Pretty JSON with a trailing newline; byte-stable for a fixed seed.
pub fn report_json<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports always serialize");
    s.push('\n');
    s
}

/// Which scenario knob a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// UAV power budget, dBm.
    Pmax,
    /// Number of active ground UEs.
    NumUes,
    /// UAV altitude, meters.
    Altitude,
    /// UAV antenna half-beamwidth, degrees (90 behaves isotropically).
    Beamwidth,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Pmax => "pmax",
            SweepAxis::NumUes => "num-ues",
            SweepAxis::Altitude => "altitude",
            SweepAxis::Beamwidth => "beamwidth",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pmax" => Ok(SweepAxis::Pmax),
            "num-ues" | "num_ues" => Ok(SweepAxis::NumUes),
            "altitude" => Ok(SweepAxis::Altitude),
            "beamwidth" => Ok(SweepAxis::Beamwidth),
            other => Err(format!("unknown sweep axis `{other}`")),
        }
    }
}

fn apply_axis(cfg: &ScenarioConfig, axis: SweepAxis, value: f64) -> Result<ScenarioConfig, RunError> {
    let mut cfg = cfg.clone();
    match axis {
        SweepAxis::Pmax => cfg.uav.p_max_dbm = value,
        SweepAxis::Altitude => cfg.uav.height_m = value,
        SweepAxis::NumUes => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(RunError::Config(format!(
                    "num-ues sweep values must be positive integers, got {value}"
                )));
            }
            cfg.ues.count = value as usize;
            cfg.ues.per_cell = None;
        }
        SweepAxis::Beamwidth => {
            cfg.uav.antenna.kind = "directional".into();
            cfg.uav.antenna.half_beamwidth_deg = value;
        }
    }
    cfg.validate().map_err(RunError::from)?;
    Ok(cfg)
}

/// One run per axis value, keeping the full report of each.
#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub axis: SweepAxis,
    pub runs: Vec<SweepRun>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRun {
    pub value: f64,
    pub report: RunReport,
}

/// Sweep the axis over `values` (must be nonempty and strictly monotone).
pub fn sweep(cfg: &ScenarioConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepReport, RunError> {
    if values.is_empty() {
        return Err(RunError::Config("sweep needs at least one value".into()));
    }
    let monotone = values.windows(2).all(|w| w[0] < w[1])
        || values.windows(2).all(|w| w[0] > w[1]);
    if !monotone {
        return Err(RunError::Config("sweep values must be monotone".into()));
    }
    let runs = values
        .iter()
        .map(|&value| {
            let cfg = apply_axis(cfg, axis, value)?;
            Ok(SweepRun {
                value,
                report: run_scenario(&cfg)?,
            })
        })
        .collect::<Result<_, RunError>>()?;
    Ok(SweepReport {
        schema_version: SCHEMA_VERSION,
        axis,
        runs,
    })
}

#[derive(Debug, Serialize)]
struct SweepCsvRow<'a> {
    schema_version: u32,
    axis: &'a str,
    value: f64,
    scheme: &'a str,
    uav_rate_mean: f64,
    uav_rate_hw: f64,
    ground_rate_mean: f64,
    ground_rate_hw: f64,
    weighted_mean: f64,
    weighted_hw: f64,
    bound_mean: Option<f64>,
    gap_vs_bound_mean: Option<f64>,
    snapshots: usize,
}

/// Plot-ready CSV: one row per (axis value, scheme), straight out of the
/// aggregates that the JSON report carries.
pub fn sweep_csv(sweep: &SweepReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for run in &sweep.runs {
        for row in &run.report.aggregate {
            w.serialize(SweepCsvRow {
                schema_version: sweep.schema_version,
                axis: sweep.axis.name(),
                value: run.value,
                scheme: row.scheme.name(),
                uav_rate_mean: row.uav_rate_mean,
                uav_rate_hw: row.uav_rate_hw,
                ground_rate_mean: row.ground_rate_mean,
                ground_rate_hw: row.ground_rate_hw,
                weighted_mean: row.weighted_mean,
                weighted_hw: row.weighted_hw,
                bound_mean: row.bound_mean,
                gap_vs_bound_mean: row.gap_vs_bound_mean,
                snapshots: run.report.snapshots.len(),
            })
            .expect("csv rows serialize");
        }
    }
    String::from_utf8(w.into_inner().expect("csv writer flushes")).expect("csv is utf-8")
}

/// One point of the achievable-rate-region boundary.
#[derive(Debug, Clone, Serialize)]
pub struct RegionPoint {
    /// "sca", "egoistic" or "altruistic".
    pub kind: String,
    /// mu_g / mu_u; 0 for the egoistic extreme, infinity for the altruistic.
    pub ratio: f64,
    pub uav_rate_mean: f64,
    pub uav_rate_hw: f64,
    pub ground_rate_mean: f64,
    pub ground_rate_hw: f64,
    /// Per-snapshot (uav, ground) pairs, for boundary diagnostics.
    pub per_snapshot: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionReport {
    pub schema_version: u32,
    pub config: ScenarioConfig,
    pub points: Vec<RegionPoint>,
}

/// Trace the rate-region boundary by sweeping the weight ratio mu_g/mu_u,
/// plus the two extreme schemes. Channel realizations are shared across
/// ratios, so the boundary is comparable point by point.
pub fn rate_region(cfg: &ScenarioConfig, ratios: &[f64]) -> Result<RegionReport, RunError> {
    if ratios.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
        return Err(RunError::Config("ratios must be positive and finite".into()));
    }
    cfg.validate().map_err(RunError::from)?;
    let table = cfg.pathloss_table()?;
    let instances: Vec<Instance> = (0..cfg.snapshots)
        .into_par_iter()
        .map(|i| build_instance(cfg, &table, snapshot_seed(cfg.seed, i as u64)).map_err(RunError::from))
        .collect::<Result<_, _>>()?;

    let opts = cfg.solver_options();
    let p_max = cfg.p_max_w();

    let solve_point = |kind: &str, ratio: f64, weights: Weights| -> Result<RegionPoint, RunError> {
        let per_snapshot: Vec<(f64, f64)> = instances
            .par_iter()
            .map(|inst| {
                let sol = match kind {
                    "egoistic" => icic::egoistic(&inst.channel, &inst.occupancy, &weights, p_max, &opts)?,
                    "altruistic" => {
                        icic::altruistic(&inst.channel, &inst.occupancy, &weights, p_max, &opts)?
                    }
                    _ => icic::sca_solve(
                        &inst.channel,
                        &inst.occupancy,
                        &weights,
                        p_max,
                        &opts,
                        InitMode::Default,
                    )?,
                };
                Ok::<_, RunError>((sol.rates.uav_rate, sol.rates.ground_rate))
            })
            .collect::<Result<_, _>>()?;
        let uav: Vec<f64> = per_snapshot.iter().map(|p| p.0).collect();
        let ground: Vec<f64> = per_snapshot.iter().map(|p| p.1).collect();
        Ok(RegionPoint {
            kind: kind.to_string(),
            ratio,
            uav_rate_mean: mean(&uav),
            uav_rate_hw: half_width(&uav),
            ground_rate_mean: mean(&ground),
            ground_rate_hw: half_width(&ground),
            per_snapshot,
        })
    };

    let mut points = Vec::with_capacity(ratios.len() + 2);
    points.push(solve_point("egoistic", 0.0, Weights::new(1.0, 0.0))?);
    for &ratio in ratios {
        points.push(solve_point("sca", ratio, Weights::new(1.0, ratio))?);
    }
    points.push(solve_point("altruistic", f64::INFINITY, Weights::new(0.0, 1.0))?);

    Ok(RegionReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        points,
    })
}

#[derive(Debug, Serialize)]
struct RegionCsvRow<'a> {
    schema_version: u32,
    kind: &'a str,
    ratio: f64,
    uav_rate_mean: f64,
    uav_rate_hw: f64,
    ground_rate_mean: f64,
    ground_rate_hw: f64,
    snapshots: usize,
}

pub fn region_csv(region: &RegionReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &region.points {
        w.serialize(RegionCsvRow {
            schema_version: region.schema_version,
            kind: &p.kind,
            ratio: p.ratio,
            uav_rate_mean: p.uav_rate_mean,
            uav_rate_hw: p.uav_rate_hw,
            ground_rate_mean: p.ground_rate_mean,
            ground_rate_hw: p.ground_rate_hw,
            snapshots: p.per_snapshot.len(),
        })
        .expect("csv rows serialize");
    }
    String::from_utf8(w.into_inner().expect("csv writer flushes")).expect("csv is utf-8")
}
