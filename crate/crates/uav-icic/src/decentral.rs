//! Decentralized coordination through BS clusters.
//!
//! Cells are tiled into static clusters; each head aggregates its cluster
//! into 2N numbers per round: the summed interference price V on every RB and
//! the best unoccupied gain W on every RB. The UAV picks the serving cluster
//! per RB by max W, allocates power from (max W, sum V) with the same priced
//! water-filling closed form as the centralized solver, and reports back only
//! the chosen RBs. Aggregation is exact: max-of-maxes and sum-of-sums
//! reproduce the centralized gain and price on every RB, for any partition.
//!
//! The UAV-side solver sees nothing but V and W; per-cell gains stay inside
//! the cluster, and the serving cell itself is resolved at the chosen head.

use serde::Serialize;
use thiserror::Error;

use crate::channel::ChannelState;
use crate::icic::{
    surrogate_solve, Association, IcicSolution, PowerAllocation, Scheme, SolveDiagnostics,
    SolverOptions,
};
use crate::rates::{self, Weights};
use crate::scheduler::RbOccupancy;
use crate::topology::HexGrid;

const LN2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Error)]
pub enum DecentralError {
    #[error(transparent)]
    Rate(#[from] rates::RateError),
}

/// Static partition of the cells into clusters with one head each.
#[derive(Debug, Clone)]
pub struct ClusterPartition {
    /// Disjoint cell-id sets covering every cell.
    pub clusters: Vec<Vec<usize>>,
    /// Head of each cluster; always a member.
    pub heads: Vec<usize>,
}

impl ClusterPartition {
    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }
}

/// Tile the grid into contiguous clusters of `cluster_size` cells.
///
/// Cells are swept row-major over their axial coordinates and chunked; the
/// trailing cluster may be smaller. A cluster size of at least the cell count
/// collapses to a single cluster, whose head then plays central scheduler.
pub fn make_clusters(grid: &HexGrid, cluster_size: usize) -> Vec<Vec<usize>> {
    assert!(cluster_size >= 1);
    let mut order: Vec<usize> = (0..grid.num_cells()).collect();
    order.sort_by_key(|&id| {
        let a = grid.cells[id].axial;
        (a.r, a.q)
    });
    order
        .chunks(cluster_size)
        .map(|chunk| {
            let mut c = chunk.to_vec();
            c.sort_unstable();
            c
        })
        .collect()
}

/// Appoint each cluster's head: the member with the best raw UAV gain,
/// ties toward the lowest id.
pub fn assign_heads(clusters: Vec<Vec<usize>>, channel: &ChannelState) -> ClusterPartition {
    let heads = clusters
        .iter()
        .map(|members| {
            members
                .iter()
                .copied()
                .fold(None::<(usize, f64)>, |acc, j| {
                    let f = channel.f_tilde(j);
                    match acc {
                        Some((_, bf)) if bf >= f => acc,
                        _ => Some((j, f)),
                    }
                })
                .expect("clusters are non-empty")
                .0
        })
        .collect();
    ClusterPartition { clusters, heads }
}

/// The 2N-per-cluster aggregates shipped to the UAV.
#[derive(Debug, Clone)]
pub struct ClusterReport {
    /// v[m][n]: summed interference price of cluster m on RB n.
    pub v: Vec<Vec<f64>>,
    /// w[m][n]: best unoccupied gain of cluster m on RB n (0 if none free).
    pub w: Vec<Vec<f64>>,
}

/// Per-cell price at the anchor power; zero for cells without a UE on the RB.
fn cell_price(channel: &ChannelState, occupancy: &RbOccupancy, j: usize, n: usize, anchor: f64) -> f64 {
    let f = channel.f(j, n);
    let gamma = occupancy.gamma[&(j, n)];
    let load = 1.0 + anchor * f;
    f * gamma / (LN2 * (load + gamma) * load)
}

/// Compute every cluster's (V, W) at the given anchor allocation.
pub fn cluster_report(
    partition: &ClusterPartition,
    channel: &ChannelState,
    occupancy: &RbOccupancy,
    anchor: &[f64],
) -> ClusterReport {
    let n_rbs = occupancy.n_rbs;
    let mut v = Vec::with_capacity(partition.num_clusters());
    let mut w = Vec::with_capacity(partition.num_clusters());
    for members in &partition.clusters {
        let mut vm = vec![0.0f64; n_rbs];
        let mut wm = vec![0.0f64; n_rbs];
        for n in 0..n_rbs {
            for &j in members {
                if occupancy.is_occupied(j, n) {
                    vm[n] += cell_price(channel, occupancy, j, n, anchor[n]);
                } else {
                    wm[n] = wm[n].max(channel.f(j, n));
                }
            }
        }
        v.push(vm);
        w.push(wm);
    }
    ClusterReport { v, w }
}

/// What the UAV decides from the aggregates alone.
#[derive(Debug, Clone)]
pub struct UavDecision {
    /// Serving cluster per RB; `None` when no cluster offers positive gain.
    pub serving_cluster: Vec<Option<usize>>,
    pub power: PowerAllocation,
}

/// UAV-side step of the protocol: pick the serving cluster by best W, form
/// the effective gain and summed price per RB, and run the priced
/// water-filling closed form. Only aggregates enter here.
pub fn uav_select_and_allocate(
    report: &ClusterReport,
    weights: &Weights,
    p_max: f64,
    opts: &SolverOptions,
) -> UavDecision {
    let m = report.w.len();
    let n_rbs = report.w.first().map_or(0, Vec::len);
    let mut serving = Vec::with_capacity(n_rbs);
    let mut eff_gain = Vec::with_capacity(n_rbs);
    let mut eff_price = Vec::with_capacity(n_rbs);
    for n in 0..n_rbs {
        let best = (0..m).fold(None::<(usize, f64)>, |acc, mi| {
            let wv = report.w[mi][n];
            match acc {
                Some((_, bw)) if bw >= wv => acc,
                _ => Some((mi, wv)),
            }
        });
        match best {
            Some((mi, wv)) if wv > opts.gain_floor => {
                serving.push(Some(mi));
                eff_gain.push(wv);
            }
            _ => {
                serving.push(None);
                eff_gain.push(0.0);
            }
        }
        eff_price.push((0..m).map(|mi| report.v[mi][n]).sum());
    }
    let power = surrogate_solve(&eff_gain, &eff_price, weights, p_max, opts.gain_floor);
    UavDecision {
        serving_cluster: serving,
        power,
    }
}

/// Resolve the serving cell inside the chosen cluster: best unoccupied gain,
/// exactly what the head knows locally.
fn resolve_cells(
    partition: &ClusterPartition,
    channel: &ChannelState,
    occupancy: &RbOccupancy,
    decision: &UavDecision,
) -> Association {
    let j_star = decision
        .serving_cluster
        .iter()
        .enumerate()
        .map(|(n, m)| {
            m.and_then(|m| {
                partition.clusters[m]
                    .iter()
                    .copied()
                    .filter(|&j| !occupancy.is_occupied(j, n))
                    .fold(None::<(usize, f64)>, |acc, j| {
                        let f = channel.f(j, n);
                        match acc {
                            Some((_, bf)) if bf >= f => acc,
                            _ => Some((j, f)),
                        }
                    })
                    .map(|(j, _)| j)
            })
        })
        .collect();
    Association { j_star }
}

/// Counts of parameters exchanged over the air between the UAV and heads.
#[derive(Debug, Clone, Serialize)]
pub struct MessageLedger {
    /// Cluster-heads to UAV.
    pub uplink_params: usize,
    /// UAV to cluster-heads (power broadcasts and final RB/cluster pairs).
    pub downlink_params: usize,
    pub beacons: usize,
    pub rounds: usize,
}

impl MessageLedger {
    pub fn total(&self) -> usize {
        self.uplink_params + self.downlink_params
    }
}

/// Protocol variant.
#[derive(Debug, Clone, Copy)]
pub enum DecentralMode {
    /// Single surrogate solve from a zero anchor; at most 2MN + 2N
    /// parameters cross the air.
    OneRound,
    /// Repeat rounds (MN uplink each after the first) until the objective
    /// gains at most `epsilon`.
    Iterative { epsilon: f64, max_rounds: usize },
}

/// Run the clustered protocol and account for every exchanged parameter.
pub fn run_decentralized(
    channel: &ChannelState,
    occupancy: &RbOccupancy,
    partition: &ClusterPartition,
    weights: &Weights,
    p_max: f64,
    mode: DecentralMode,
    opts: &SolverOptions,
) -> Result<(IcicSolution, MessageLedger), DecentralError> {
    weights.validate();
    let m = partition.num_clusters();
    let n_rbs = occupancy.n_rbs;

    let objective = |p: &[f64], assoc: &Association| -> Result<f64, DecentralError> {
        let (uav, _) = rates::uav_rate(channel, occupancy, assoc, p)?;
        let (ground, _) = rates::ground_rate_with_uav(occupancy, channel, p);
        Ok(rates::weighted_objective(weights, uav, ground))
    };

    match mode {
        DecentralMode::OneRound => {
            let report = cluster_report(partition, channel, occupancy, &vec![0.0; n_rbs]);
            let decision = uav_select_and_allocate(&report, weights, p_max, opts);
            let association = resolve_cells(partition, channel, occupancy, &decision);
            let chosen = decision.power.p.iter().filter(|&&p| p > 0.0).count();
            let ledger = MessageLedger {
                uplink_params: 2 * m * n_rbs,
                downlink_params: 2 * chosen,
                beacons: 1,
                rounds: 1,
            };
            let rates = rates::rate_report(weights, channel, occupancy, &association, &decision.power.p)?;
            let denied = decision.power.total() == 0.0;
            Ok((
                IcicSolution {
                    scheme: Scheme::DecentralOneRound,
                    association,
                    power: decision.power,
                    rates,
                    denied,
                    diagnostics: None,
                },
                ledger,
            ))
        }
        DecentralMode::Iterative { epsilon, max_rounds } => {
            let mut anchor = vec![0.0; n_rbs];
            // W never changes across rounds; compute it with the first report.
            let first = cluster_report(partition, channel, occupancy, &anchor);
            let w_fixed = first.w.clone();
            let mut decision = uav_select_and_allocate(&first, weights, p_max, opts);
            let association = resolve_cells(partition, channel, occupancy, &decision);

            let mut q_prev = objective(&anchor, &association)?;
            let mut trace = vec![q_prev];
            let mut rounds = 1;
            let mut converged = false;
            loop {
                let q_next = objective(&decision.power.p, &association)?;
                trace.push(q_next);
                anchor = decision.power.p.clone();
                if q_next - q_prev <= epsilon {
                    converged = true;
                    break;
                }
                if rounds >= max_rounds {
                    break;
                }
                q_prev = q_next;
                rounds += 1;
                let mut report = cluster_report(partition, channel, occupancy, &anchor);
                report.w = w_fixed.clone();
                decision = uav_select_and_allocate(&report, weights, p_max, opts);
            }

            let chosen = anchor.iter().filter(|&&p| p > 0.0).count();
            let ledger = MessageLedger {
                uplink_params: 2 * m * n_rbs + (rounds - 1) * m * n_rbs,
                downlink_params: rounds * n_rbs + 2 * chosen,
                beacons: 1,
                rounds,
            };
            let power = PowerAllocation { p: anchor };
            let rates = rates::rate_report(weights, channel, occupancy, &association, &power.p)?;
            let denied = power.total() == 0.0;
            Ok((
                IcicSolution {
                    scheme: Scheme::DecentralIterative,
                    association,
                    power,
                    rates,
                    denied,
                    diagnostics: Some(SolveDiagnostics {
                        iterations: rounds,
                        objective_trace: trace,
                        converged,
                        epsilon,
                    }),
                },
                ledger,
            ))
        }
    }
}
