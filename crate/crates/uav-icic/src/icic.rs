//! Centralized coordination: optimal per-RB association, the egoistic,
//! altruistic and terrestrial baselines, and the iterative concave-surrogate
//! solver for the weighted sum-rate power allocation.
//!
//! The surrogate replaces the ground sum-rate with its first-order expansion
//! around the current allocation; the expansion slope on each RB acts as an
//! interference price per watt, and the priced problem has a water-filling
//! style closed form. Iterating surrogate construction and closed-form solve
//! drives the true objective monotonically upward to a stationary point.

use serde::Serialize;
use thiserror::Error;

use crate::channel::ChannelState;
use crate::rates::{self, log2, RateReport, Weights};
use crate::scheduler::RbOccupancy;
use crate::topology::NeighborSets;

const LN2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Error)]
pub enum IcicError {
    #[error("RB {rb} has no unoccupied cell to serve the UAV")]
    NoFreeCell { rb: usize },
    #[error(transparent)]
    Rate(#[from] rates::RateError),
}

/// Which scheme produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Egoistic,
    Altruistic,
    Terrestrial,
    Sca,
    DecentralOneRound,
    DecentralIterative,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Egoistic => "egoistic",
            Scheme::Altruistic => "altruistic",
            Scheme::Terrestrial => "terrestrial",
            Scheme::Sca => "sca",
            Scheme::DecentralOneRound => "decentral-one-round",
            Scheme::DecentralIterative => "decentral-iterative",
        }
    }
}

/// Per-RB serving cell for the UAV; `None` marks an RB the UAV does not use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Association {
    pub j_star: Vec<Option<usize>>,
}

/// Per-RB UAV transmit powers, watts.
#[derive(Debug, Clone, Serialize)]
pub struct PowerAllocation {
    pub p: Vec<f64>,
}

impl PowerAllocation {
    pub fn zeros(n: usize) -> Self {
        Self { p: vec![0.0; n] }
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }
}

/// First-order expansion of the ground sum-rate around an anchor allocation.
#[derive(Debug, Clone)]
pub struct SurrogateCoeffs {
    /// Ground sum-rate at the anchor.
    pub a: f64,
    /// Per-RB marginal ground-rate loss per watt of UAV power (the price).
    pub b: Vec<f64>,
    pub anchor: Vec<f64>,
}

/// Iteration record of the surrogate solver.
#[derive(Debug, Clone, Serialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    /// True weighted objective after each iterate, starting at the initial
    /// allocation; nondecreasing.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub epsilon: f64,
}

/// Knobs shared by the centralized and decentralized solvers.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Stop when the true objective improves by at most this much.
    pub epsilon: f64,
    pub max_iters: usize,
    /// RBs whose best unoccupied gain is at or below this are excluded.
    pub gain_floor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iters: 200,
            gain_floor: 0.0,
        }
    }
}

/// Initial allocation for the surrogate iteration.
#[derive(Debug, Clone)]
pub enum InitMode {
    /// Altruistic start when mu_g <= mu_u, egoistic start otherwise.
    Default,
    Zero,
    Custom(Vec<f64>),
}

/// One scheme's output on one realization.
#[derive(Debug, Clone)]
pub struct IcicSolution {
    pub scheme: Scheme,
    pub association: Association,
    pub power: PowerAllocation,
    pub rates: RateReport,
    /// The scheme found no RB it may transmit on.
    pub denied: bool,
    pub diagnostics: Option<SolveDiagnostics>,
}

/// Best unoccupied cell per RB: j*_n = argmax over free cells of F_j(n).
///
/// Independent of the power allocation, so it is computed once and shared by
/// every power-control scheme. Ties break toward the lowest cell id. Returns
/// the association and the effective gain vector F_u(n); RBs whose best gain
/// is at or below `gain_floor` get `None` and gain 0.
pub fn optimal_association(
    channel: &ChannelState,
    occupancy: &RbOccupancy,
    gain_floor: f64,
) -> Result<(Association, Vec<f64>), IcicError> {
    let mut j_star = Vec::with_capacity(occupancy.n_rbs);
    let mut f_u = Vec::with_capacity(occupancy.n_rbs);
    for n in 0..occupancy.n_rbs {
        let best = occupancy
            .unoccupied_cells(n)
            .map(|j| (j, channel.f(j, n)))
            .fold(None::<(usize, f64)>, |acc, (j, f)| match acc {
                Some((_, bf)) if bf >= f => acc,
                _ => Some((j, f)),
            });
        let (j, f) = best.ok_or(IcicError::NoFreeCell { rb: n })?;
        if f > gain_floor {
            j_star.push(Some(j));
            f_u.push(f);
        } else {
            j_star.push(None);
            f_u.push(0.0);
        }
    }
    Ok((Association { j_star }, f_u))
}

/// Exact water-filling: maximize sum log2(1 + p_n g_n) subject to the budget.
///
/// Channels with gain at or below `gain_floor` are excluded. Solved by
/// active-set enumeration: sort the inverse gains, compute the analytic water
/// level per candidate set, keep the consistent one.
pub fn waterfill(gains: &[f64], p_max: f64, gain_floor: f64) -> PowerAllocation {
    let mut alloc = PowerAllocation::zeros(gains.len());
    if p_max <= 0.0 {
        return alloc;
    }
    let mut active: Vec<(usize, f64)> = gains
        .iter()
        .enumerate()
        .filter(|(_, &g)| g > gain_floor)
        .map(|(i, &g)| (i, 1.0 / g))
        .collect();
    if active.is_empty() {
        return alloc;
    }
    active.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());

    let mut prefix = 0.0;
    let mut level = 0.0;
    let mut used = 0;
    for k in 0..active.len() {
        prefix += active[k].1;
        let w = (p_max + prefix) / (k + 1) as f64;
        if w > active[k].1 && (k + 1 == active.len() || w <= active[k + 1].1) {
            level = w;
            used = k + 1;
            break;
        }
    }
    debug_assert!(used > 0, "water level search must succeed");
    for &(i, inv) in &active[..used] {
        alloc.p[i] = level - inv;
    }
    alloc
}

fn solution_from_power(
    scheme: Scheme,
    weights: &Weights,
    channel: &ChannelState,
    occupancy: &RbOccupancy,
    association: Association,
    power: PowerAllocation,
    denied: bool,
    diagnostics: Option<SolveDiagnostics>,
) -> Result<IcicSolution, IcicError> {
    let rates = rates::rate_report(weights, channel, occupancy, &association, &power.p)?;
    Ok(IcicSolution {
        scheme,
        association,
        power,
        rates,
        denied,
        diagnostics,
    })
}

/// Water-filling over every RB; maximizes the UAV rate and ignores the
/// ground users entirely.
pub fn egoistic(
    channel: &ChannelState,
    occupancy: &RbOccupancy,
    weights: &Weights,
    p_max: f64,
    opts: &SolverOptions,
) -> Result<IcicSolution, IcicError> {
    let (assoc, f_u) = optimal_association(channel, occupancy, opts.gain_floor)?;
    let power = waterfill(&f_u, p_max, opts.gain_floor);
    let denied = power.total() == 0.0;
    solution_from_power(Scheme::Egoistic, weights, channel, occupancy, assoc, power, denied, None)
}

/// Water-filling restricted to RBs no ground UE occupies anywhere; preserves
/// the ground sum-rate exactly, denying the UAV access when none exist.
pub fn altruistic(
    channel: &ChannelState,
    occupancy: &RbOccupancy,
    weights: &Weights,
    p_max: f64,
    opts: &SolverOptions,
) -> Result<IcicSolution, IcicError> {
    let (assoc, f_u) = optimal_association(channel, occupancy, opts.gain_floor)?;
    let free = occupancy.fully_free_rbs();
    let mut masked = vec![0.0; occupancy.n_rbs];
    for &n in &free {
        masked[n] = f_u[n];
    }
    let power = waterfill(&masked, p_max, opts.gain_floor);
    let denied = power.total() == 0.0;
    solution_from_power(Scheme::Altruistic, weights, channel, occupancy, assoc, power, denied, None)
}

/// The conventional single-BS benchmark: the UAV attaches to the strongest
/// BS like a ground UE and water-fills the RBs that BS may assign under the
/// q-tier criterion.
pub fn terrestrial_icic(
    channel: &ChannelState,
    occupancy: &RbOccupancy,
    neighbors: &NeighborSets,
    q: usize,
    weights: &Weights,
    p_max: f64,
    opts: &SolverOptions,
) -> Result<IcicSolution, IcicError> {
    // Strongest raw gain, ties toward the lowest id.
    let j_u = (0..channel.n_cells())
        .fold(None::<(usize, f64)>, |acc, j| {
            let f = channel.f_tilde(j);
            match acc {
                Some((_, bf)) if bf >= f => acc,
                _ => Some((j, f)),
            }
        })
        .map(|(j, _)| j)
        .expect("at least one cell");

    // RBs free at j_u and in its whole q-ring neighborhood.
    let nj = neighbors.get(j_u, q);
    let available: Vec<usize> = (0..occupancy.n_rbs)
        .filter(|&n| {
            !occupancy.is_occupied(j_u, n)
                && nj.iter().all(|&k| !occupancy.is_occupied(k, n))
        })
        .collect();

    let mut masked = vec![0.0; occupancy.n_rbs];
    for &n in &available {
        masked[n] = channel.f(j_u, n);
    }
    let power = waterfill(&masked, p_max, opts.gain_floor);
    let denied = power.total() == 0.0;
    let j_star = (0..occupancy.n_rbs)
        .map(|n| (masked[n] > opts.gain_floor).then_some(j_u))
        .collect();
    solution_from_power(
        Scheme::Terrestrial,
        weights,
        channel,
        occupancy,
        Association { j_star },
        power,
        denied,
        None,
    )
}

/// Expansion coefficients of the ground sum-rate around `anchor`.
///
/// The price on RB n sums, over the cells occupied there, the sensitivity of
/// that cell's log-rate to UAV power; empty RBs get price zero.
pub fn surrogate_coeffs(
    channel: &ChannelState,
    occupancy: &RbOccupancy,
    anchor: &[f64],
) -> SurrogateCoeffs {
    let (a, _) = rates::ground_rate_with_uav(occupancy, channel, anchor);
    let b = (0..occupancy.n_rbs)
        .map(|n| {
            occupancy
                .occupied_cells(n)
                .iter()
                .map(|&j| {
                    let f = channel.f(j, n);
                    let gamma = occupancy.gamma[&(j, n)];
                    let load = 1.0 + anchor[n] * f;
                    f * gamma / (LN2 * (load + gamma) * load)
                })
                .sum()
        })
        .collect();
    SurrogateCoeffs {
        a,
        b,
        anchor: anchor.to_vec(),
    }
}

/// Value of the surrogate objective (profit minus priced interference cost),
/// dropping the constant terms.
pub fn surrogate_objective(f_u: &[f64], b: &[f64], weights: &Weights, p: &[f64]) -> f64 {
    p.iter()
        .zip(f_u)
        .zip(b)
        .map(|((&p, &f), &b)| weights.mu_u * log2(1.0 + p * f) - weights.mu_g * b * p)
        .sum()
}

/// Closed-form maximizer of the priced surrogate under the power budget.
///
/// Unconstrained per-RB levels first; if they overspend, a common per-watt
/// price shift is bisected until the budget binds. RBs with zero interference
/// price reduce to plain water-filling terms under the shared shift.
pub fn surrogate_solve(
    f_u: &[f64],
    b: &[f64],
    weights: &Weights,
    p_max: f64,
    gain_floor: f64,
) -> PowerAllocation {
    let n = f_u.len();
    let mut alloc = PowerAllocation::zeros(n);
    if weights.mu_u == 0.0 || p_max <= 0.0 {
        return alloc;
    }
    let active: Vec<usize> = (0..n).filter(|&i| f_u[i] > gain_floor).collect();
    if active.is_empty() {
        return alloc;
    }

    // Unconstrained optimum; a zero price with positive mu_u means unbounded
    // preference for that RB, which forces the budget branch.
    let mut unbounded = false;
    let mut total = 0.0;
    let mut tilde = vec![0.0; n];
    for &i in &active {
        let cost = weights.mu_g * b[i];
        if cost <= 0.0 {
            unbounded = true;
            break;
        }
        tilde[i] = (weights.mu_u / (cost * LN2) - 1.0 / f_u[i]).max(0.0);
        total += tilde[i];
    }
    if !unbounded && total <= p_max {
        alloc.p = tilde;
        return alloc;
    }

    // Budget branch: p_i(nu) = (mu_u / ((mu_g b_i + nu) ln2) - 1/f_i)^+ with
    // nu > 0 chosen so the sum meets p_max. The sum is strictly decreasing in
    // nu, so bisection converges to machine precision.
    let spend = |nu: f64, out: &mut Vec<f64>| -> f64 {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut s = 0.0;
        for &i in &active {
            let level = weights.mu_u / ((weights.mu_g * b[i] + nu) * LN2) - 1.0 / f_u[i];
            if level > 0.0 {
                out[i] = level;
                s += level;
            }
        }
        s
    };

    let mut hi = active
        .iter()
        .map(|&i| weights.mu_u * f_u[i] / LN2 - weights.mu_g * b[i])
        .fold(0.0f64, f64::max);
    if hi <= 0.0 {
        return alloc; // every RB priced out
    }
    let mut lo = 0.0;
    let mut buf = vec![0.0; n];
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spend(mid, &mut buf) > p_max {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    spend(hi, &mut buf);
    alloc.p = buf;
    debug_assert!(alloc.total() <= p_max * (1.0 + 1e-9));
    alloc
}

fn weighted_objective_of(
    weights: &Weights,
    channel: &ChannelState,
    occupancy: &RbOccupancy,
    f_u: &[f64],
    p: &[f64],
) -> f64 {
    let uav: f64 = p
        .iter()
        .zip(f_u)
        .map(|(&p, &f)| log2(1.0 + p * f))
        .sum();
    let (ground, _) = rates::ground_rate_with_uav(occupancy, channel, p);
    rates::weighted_objective(weights, uav, ground)
}

/// Full centralized solve: fix the association once, then iterate surrogate
/// construction and closed-form allocation until the true objective gains at
/// most `epsilon` per round.
pub fn sca_solve(
    channel: &ChannelState,
    occupancy: &RbOccupancy,
    weights: &Weights,
    p_max: f64,
    opts: &SolverOptions,
    init: InitMode,
) -> Result<IcicSolution, IcicError> {
    weights.validate();
    let (assoc, f_u) = optimal_association(channel, occupancy, opts.gain_floor)?;

    let mut p = match init {
        InitMode::Zero => vec![0.0; occupancy.n_rbs],
        InitMode::Custom(p0) => p0,
        InitMode::Default => {
            if weights.mu_g <= weights.mu_u {
                altruistic(channel, occupancy, weights, p_max, opts)?.power.p
            } else {
                egoistic(channel, occupancy, weights, p_max, opts)?.power.p
            }
        }
    };

    let mut q_prev = weighted_objective_of(weights, channel, occupancy, &f_u, &p);
    let mut trace = vec![q_prev];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_iters {
        iterations += 1;
        let coeffs = surrogate_coeffs(channel, occupancy, &p);
        let next = surrogate_solve(&f_u, &coeffs.b, weights, p_max, opts.gain_floor);
        let q_next = weighted_objective_of(weights, channel, occupancy, &f_u, &next.p);
        trace.push(q_next);
        p = next.p;
        if q_next - q_prev <= opts.epsilon {
            converged = true;
            break;
        }
        q_prev = q_next;
    }

    let power = PowerAllocation { p };
    let denied = power.total() == 0.0;
    solution_from_power(
        Scheme::Sca,
        weights,
        channel,
        occupancy,
        assoc,
        power,
        denied,
        Some(SolveDiagnostics {
            iterations,
            objective_trace: trace,
            converged,
            epsilon: opts.epsilon,
        }),
    )
}
