//! Upper bound on the weighted sum-rate via Lagrangian duality.
//!
//! Relaxing the total-power constraint with a price nu > 0 decouples the
//! problem into independent per-RB subproblems. An empty RB has a closed-form
//! solution; an RB with co-channel ground UEs is nonconvex in the UAV power,
//! but rewrites as maximizing the product of two slack variables over a
//! normal (downward-closed) set, which polyblock outer approximation solves
//! to global epsilon-accuracy. Bisection over nu on the monotone subgradient
//! then minimizes the dual function.
//!
//! Every dual evaluation at any nu > 0 upper-bounds the primal optimum, so
//! the reported bound carries the per-RB outer-approximation slack instead of
//! the (possibly slightly smaller) achieved value: it stays a certified bound
//! regardless of where the inner loops stopped.

use serde::Serialize;
use thiserror::Error;

use crate::channel::ChannelState;
use crate::icic::{optimal_association, surrogate_coeffs, surrogate_solve};
use crate::rates::{self, log2, Weights};
use crate::scheduler::RbOccupancy;

const LN2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Error)]
pub enum DualError {
    #[error("projection bisection failed to reach tolerance {tol} in {steps} steps")]
    ProjectionBisection { tol: f64, steps: usize },
    #[error("polyblock vertex set exceeded {cap} vertices; retry with a larger epsilon")]
    VertexCap { cap: usize },
    #[error(transparent)]
    Icic(#[from] crate::icic::IcicError),
}

/// One per-RB dual subproblem: maximize
/// mu_u log2(1 + p F_u) + mu_g sum_j log2(1 + gamma_j / (1 + p F_j)) - nu p
/// over p >= 0.
#[derive(Debug, Clone)]
pub struct DualSubproblem {
    pub rb: usize,
    /// Effective gain toward the best free cell, per watt.
    pub f_u: f64,
    /// (gamma_j, F_j) of each co-channel ground UE on this RB.
    pub interferers: Vec<(f64, f64)>,
    /// Dual price per watt; must be positive for a bounded subproblem.
    pub nu: f64,
    pub weights: Weights,
}

impl DualSubproblem {
    /// Subproblem objective at power `p`.
    pub fn objective(&self, p: f64) -> f64 {
        self.weights.mu_u * log2(1.0 + p * self.f_u) + self.weights.mu_g * self.ground_term(p)
            - self.nu * p
    }

    fn ground_term(&self, p: f64) -> f64 {
        self.interferers
            .iter()
            .map(|&(gamma, f)| log2(1.0 + gamma / (1.0 + p * f)))
            .sum()
    }

    /// The product-form utility 2^objective; what the polyblock maximizes.
    pub fn utility(&self, p: f64) -> f64 {
        (1.0 + p * self.f_u).powf(self.weights.mu_u) * self.slack_bound(p)
    }

    /// Upper limit of the second slack coordinate at power p:
    /// 2^(-nu p) prod_j (1 + gamma_j / (1 + p F_j))^mu_g, decreasing in p.
    fn slack_bound(&self, p: f64) -> f64 {
        let prod: f64 = self
            .interferers
            .iter()
            .map(|&(gamma, f)| (1.0 + gamma / (1.0 + p * f)).powf(self.weights.mu_g))
            .product();
        (-self.nu * p).exp2() * prod
    }
}

/// Provable cap on the subproblem maximizer: the interference term only
/// pushes the optimum downward, so the empty-RB closed form bounds it.
pub fn opa_upper_power(sub: &DualSubproblem) -> f64 {
    debug_assert!(sub.nu > 0.0);
    if sub.f_u <= 0.0 {
        return 0.0;
    }
    (sub.weights.mu_u / (sub.nu * LN2) - 1.0 / sub.f_u).max(0.0)
}

/// Initial enclosing box vertex for the slack variables.
pub fn opa_initial_box(sub: &DualSubproblem, p_hat: f64) -> (f64, f64) {
    let z1 = (1.0 + p_hat * sub.f_u).powf(sub.weights.mu_u);
    let z2: f64 = sub
        .interferers
        .iter()
        .map(|&(gamma, _)| (1.0 + gamma).powf(sub.weights.mu_g))
        .product();
    (z1, z2)
}

/// Scale factor delta* = max{delta in [0,1] : delta * vertex is feasible},
/// found by bisection, plus the power recovering that boundary point.
///
/// Feasibility of `delta * z` reduces to a monotone test: the first slack
/// constraint forces p >= chi(delta), and the second-slack limit decreases in
/// p, so the scaled vertex is feasible iff delta z2 <= J(max(0, chi(delta))).
pub fn opa_project(
    sub: &DualSubproblem,
    vertex: (f64, f64),
    tol: f64,
) -> Result<(f64, f64), DualError> {
    let chi = |delta: f64| ((delta * vertex.0).powf(1.0 / sub.weights.mu_u) - 1.0) / sub.f_u;
    let feasible = |delta: f64| {
        let p = chi(delta).max(0.0);
        delta * vertex.1 <= sub.slack_bound(p)
    };
    if feasible(1.0) {
        return Ok((1.0, chi(1.0).max(0.0)));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut steps = 0;
    while hi - lo > tol {
        steps += 1;
        if steps > 200 {
            return Err(DualError::ProjectionBisection { tol, steps });
        }
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, chi(lo).max(0.0)))
}

/// Tuning for the outer-approximation loop.
#[derive(Debug, Clone, Copy)]
pub struct OpaOptions {
    /// Absolute utility gap at which the loop stops.
    pub epsilon: f64,
    /// Additional stop once the gap falls below this fraction of the best
    /// feasible utility; zero demands the absolute gap alone.
    pub rel_epsilon: f64,
    /// Bisection tolerance on the projection scale delta.
    pub delta_tol: f64,
    /// Hard cap on the vertex set.
    pub vertex_cap: usize,
    /// Iteration budget; on exhaustion the loop returns its current best
    /// with the (then looser) certified upper bound.
    pub max_iters: usize,
}

impl Default for OpaOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            rel_epsilon: 0.0,
            delta_tol: 1e-9,
            vertex_cap: 100_000,
            max_iters: 80_000,
        }
    }
}

/// Outcome of one polyblock run.
#[derive(Debug, Clone)]
pub struct OpaOutcome {
    /// Best feasible power found.
    pub p: f64,
    /// Utility at `p` (a lower bound on the global optimum).
    pub utility: f64,
    /// Largest remaining vertex utility (an upper bound on the optimum).
    pub utility_upper: f64,
    pub iterations: usize,
    /// Whether the epsilon gap was certified within the iteration budget.
    pub converged: bool,
}

/// Vertex ordered by utility, for the max-heap.
#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapVertex {
    u: f64,
    z: (f64, f64),
}

impl Eq for HeapVertex {}

impl Ord for HeapVertex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.u.total_cmp(&other.u)
    }
}

impl PartialOrd for HeapVertex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// The current outer approximation: vertex set plus the best feasible point.
#[derive(Debug, Clone)]
pub struct Polyblock {
    vertices: std::collections::BinaryHeap<HeapVertex>,
    pub best_p: f64,
    pub best_utility: f64,
}

impl Polyblock {
    fn push(&mut self, z: (f64, f64)) {
        let u = z.0 * z.1;
        // Vertices that cannot beat the incumbent are dead on arrival.
        if u > self.best_utility {
            self.vertices.push(HeapVertex { u, z });
        }
    }
}

/// Polyblock outer approximation over the two slack variables.
///
/// Maintains a vertex set whose polyblock encloses the feasible region.
/// Each round projects the best vertex onto the feasible boundary along its
/// ray, keeps the best boundary point seen, and replaces the vertex with the
/// two corners the projection cuts it into. Stops when the best vertex
/// utility exceeds the best feasible one by at most epsilon (with a floor at
/// machine resolution so the loop always terminates).
pub fn opa_iterate(sub: &DualSubproblem, opts: &OpaOptions) -> Result<OpaOutcome, DualError> {
    let p_hat = opa_upper_power(sub);
    let z0 = opa_initial_box(sub, p_hat);

    // Feasible warm starts at the interval ends.
    let mut pb = Polyblock {
        vertices: std::collections::BinaryHeap::new(),
        best_p: 0.0,
        best_utility: sub.utility(0.0),
    };
    if sub.utility(p_hat) > pb.best_utility {
        pb.best_p = p_hat;
        pb.best_utility = sub.utility(p_hat);
    }
    pb.push(z0);

    let mut iterations = 0;
    loop {
        // Lazy pruning: stale heap entries fall out here.
        let top = loop {
            match pb.vertices.pop() {
                None => {
                    return Ok(OpaOutcome {
                        p: pb.best_p,
                        utility: pb.best_utility,
                        utility_upper: pb.best_utility,
                        iterations,
                        converged: true,
                    })
                }
                Some(v) if v.u <= pb.best_utility => continue,
                Some(v) => break v,
            }
        };
        let gap_floor = (64.0 * f64::EPSILON * top.u.abs())
            .max(opts.rel_epsilon * pb.best_utility);
        if top.u - pb.best_utility <= opts.epsilon.max(gap_floor) {
            return Ok(OpaOutcome {
                p: pb.best_p,
                utility: pb.best_utility,
                utility_upper: top.u,
                iterations,
                converged: true,
            });
        }
        if iterations >= opts.max_iters {
            return Ok(OpaOutcome {
                p: pb.best_p,
                utility: pb.best_utility,
                utility_upper: top.u,
                iterations,
                converged: false,
            });
        }

        iterations += 1;
        let z = top.z;
        let (delta, p) = opa_project(sub, z, opts.delta_tol)?;
        let u_here = sub.utility(p);
        if u_here > pb.best_utility {
            pb.best_utility = u_here;
            pb.best_p = p;
        }
        if delta < 1.0 {
            pb.push((delta * z.0, z.1));
            pb.push((z.0, delta * z.1));
        }
        if pb.vertices.len() > opts.vertex_cap {
            // Compact away entries a better incumbent has retired; only a
            // genuinely oversized live set is an error.
            let best = pb.best_utility;
            let live: Vec<HeapVertex> =
                pb.vertices.drain().filter(|v| v.u > best).collect();
            if live.len() > opts.vertex_cap {
                return Err(DualError::VertexCap { cap: opts.vertex_cap });
            }
            pb.vertices = live.into();
        }
    }
}

/// Solution of one per-RB subproblem.
#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub p: f64,
    /// Objective attained at `p`.
    pub value: f64,
    /// Certified upper bound on the subproblem optimum.
    pub value_upper: f64,
}

/// Solve one subproblem: closed form on empty RBs, polyblock otherwise.
///
/// `rate_epsilon` is the certified per-RB slack in bps/Hz; the polyblock stop
/// threshold is derived from it so the returned `value_upper` exceeds
/// `value` by at most (about) that much.
pub fn dual_subproblem_solve(
    sub: &DualSubproblem,
    rate_epsilon: f64,
    opts: &OpaOptions,
) -> Result<SubproblemSolution, DualError> {
    debug_assert!(sub.nu > 0.0, "dual price must be positive");
    if sub.weights.mu_u == 0.0 || sub.f_u <= 0.0 {
        let value = sub.objective(0.0);
        return Ok(SubproblemSolution { p: 0.0, value, value_upper: value });
    }
    if sub.interferers.is_empty() {
        // First-order condition of the concave objective.
        let p = (sub.weights.mu_u / (sub.nu * LN2) - 1.0 / sub.f_u).max(0.0);
        let value = sub.objective(p);
        return Ok(SubproblemSolution { p, value, value_upper: value });
    }
    let p_hat = opa_upper_power(sub);
    if p_hat == 0.0 {
        // The cap already pins the maximizer at zero.
        let value = sub.objective(0.0);
        return Ok(SubproblemSolution { p: 0.0, value, value_upper: value });
    }
    // A utility gap of (2^eps - 1) times the incumbent certifies a rate gap
    // of at most eps, which is the slack the assembled bound carries.
    let run_opts = OpaOptions {
        rel_epsilon: opts.rel_epsilon.max(rate_epsilon.exp2() - 1.0),
        ..*opts
    };
    let outcome = opa_iterate(sub, &run_opts)?;
    Ok(SubproblemSolution {
        p: outcome.p,
        value: sub.objective(outcome.p),
        value_upper: log2(outcome.utility_upper),
    })
}

/// Dual function value at one price.
#[derive(Debug, Clone)]
pub struct DualFunctionValue {
    /// Certified upper bound on the primal optimum.
    pub g_cert: f64,
    /// Lagrangian evaluated at the recovered powers (<= g_cert).
    pub g_achieved: f64,
    pub p: Vec<f64>,
}

fn build_subproblems(
    channel: &ChannelState,
    occupancy: &RbOccupancy,
    f_u: &[f64],
    weights: &Weights,
    nu: f64,
) -> Vec<DualSubproblem> {
    (0..occupancy.n_rbs)
        .map(|n| DualSubproblem {
            rb: n,
            f_u: f_u[n],
            interferers: occupancy
                .occupied_cells(n)
                .iter()
                .map(|&j| (occupancy.gamma[&(j, n)], channel.f(j, n)))
                .collect(),
            nu,
            weights: *weights,
        })
        .collect()
}

/// Evaluate the dual function g(nu) by solving all per-RB subproblems.
///
/// Weights are normalized by their maximum before solving (the optimizers are
/// invariant and it keeps the slack utilities in floating-point range); the
/// returned values are rescaled back.
pub fn dual_function(
    channel: &ChannelState,
    occupancy: &RbOccupancy,
    weights: &Weights,
    nu: f64,
    p_max: f64,
    rate_epsilon: f64,
    opts: &OpaOptions,
) -> Result<DualFunctionValue, DualError> {
    assert!(nu > 0.0, "dual price must be positive");
    weights.validate();
    let scale = weights.mu_u.max(weights.mu_g);
    let wn = Weights { mu_u: weights.mu_u / scale, mu_g: weights.mu_g / scale };
    let (_, f_u) = optimal_association(channel, occupancy, 0.0)?;

    let subs = build_subproblems(channel, occupancy, &f_u, &wn, nu / scale);
    let mut p = vec![0.0; occupancy.n_rbs];
    let mut sum_value = 0.0;
    let mut sum_upper = 0.0;
    for sub in &subs {
        let sol = dual_subproblem_solve(sub, rate_epsilon, opts)?;
        p[sub.rb] = sol.p;
        sum_value += sol.value;
        sum_upper += sol.value_upper;
    }
    Ok(DualFunctionValue {
        g_cert: scale * (sum_upper + (nu / scale) * p_max),
        g_achieved: scale * (sum_value + (nu / scale) * p_max),
        p,
    })
}

/// Result of minimizing the dual function over nu.
#[derive(Debug, Clone, Serialize)]
pub struct DualResult {
    pub nu_star: f64,
    /// The certified upper bound on the primal optimum.
    pub g_value: f64,
    /// Lagrangian at the recovered powers and nu_star.
    pub g_achieved: f64,
    pub p: Vec<f64>,
    /// Fraction (bound - primal) / bound, filled in by the caller when a
    /// primal objective is available.
    pub gap_vs_primal: Option<f64>,
    /// Dual-function evaluations spent.
    pub evaluations: usize,
}

/// Knobs for the outer dual search.
#[derive(Debug, Clone, Copy)]
pub struct DualOptions {
    /// Per-RB certified rate slack passed to the subproblem solver.
    pub rate_epsilon: f64,
    /// Relative tolerance on nu for the bisection.
    pub nu_rel_tol: f64,
    pub opa: OpaOptions,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            rate_epsilon: 1e-6,
            nu_rel_tol: 1e-8,
            opa: OpaOptions::default(),
        }
    }
}

/// Minimize g over nu > 0 by bisection on the monotone subgradient
/// P_max - sum_n p_n(nu), tracking the smallest certified bound seen.
///
/// Because every evaluation is itself a valid upper bound, early termination
/// or bracket quirks can only loosen the result, never invalidate it.
pub fn dual_minimize(
    channel: &ChannelState,
    occupancy: &RbOccupancy,
    weights: &Weights,
    p_max: f64,
    opts: &DualOptions,
) -> Result<DualResult, DualError> {
    weights.validate();
    let scale = weights.mu_u.max(weights.mu_g);
    let (_, f_u) = optimal_association(channel, occupancy, 0.0)?;
    let active_max_f = f_u.iter().fold(0.0f64, |a, &b| a.max(b));

    let mut evaluations = 0;
    let mut best: Option<(f64, DualFunctionValue)> = None;
    let mut eval = |nu: f64, best: &mut Option<(f64, DualFunctionValue)>| {
        let v = dual_function(channel, occupancy, weights, nu, p_max, opts.rate_epsilon, &opts.opa);
        evaluations += 1;
        v.map(|v| {
            let spend: f64 = v.p.iter().sum();
            let better = best.as_ref().map_or(true, |(_, b)| v.g_cert < b.g_cert);
            if better {
                *best = Some((nu, v));
            }
            spend
        })
    };

    // Degenerate cases: the UAV term vanishes, so every subproblem solves at
    // zero power and g decreases toward mu_g * R_g as nu -> 0.
    if weights.mu_u == 0.0 || active_max_f <= 0.0 {
        let nu = 1e-12 * scale.max(1.0);
        eval(nu, &mut best)?;
        let (nu_star, v) = best.unwrap();
        return Ok(DualResult {
            nu_star,
            g_value: v.g_cert,
            g_achieved: v.g_achieved,
            p: v.p,
            gap_vs_primal: None,
            evaluations,
        });
    }

    // Above nu_hi every per-RB cap is zero, so the subgradient is +P_max.
    let nu_hi_limit = scale * (weights.mu_u / scale) * active_max_f / LN2;
    let mut hi = nu_hi_limit;

    // Analytic bracket floor: the subproblem maximizer is at least the
    // priced-surrogate level with the anchor-zero prices (the steepest the
    // interference penalty ever gets), so the nu at which those levels spend
    // exactly P_max certifies a nonpositive subgradient.
    let coeffs = surrogate_coeffs(channel, occupancy, &vec![0.0; occupancy.n_rbs]);
    let mut lo = {
        let tilde = surrogate_solve(&f_u, &coeffs.b, weights, f64::INFINITY, 0.0);
        if tilde.total() <= p_max {
            // Even the most pessimistic prices stay under budget: probe
            // downward until the subgradient flips or the floor is reached.
            let mut lo = hi;
            loop {
                lo *= 0.25;
                let spend = eval(lo, &mut best)?;
                if spend > p_max || lo < 1e-15 * nu_hi_limit {
                    break;
                }
            }
            lo
        } else {
            // Find the equalizing shift by bisection on the closed form.
            let spend_lb = |nu: f64| {
                surrogate_solve_with_shift(&f_u, &coeffs.b, weights, nu).iter().sum::<f64>()
            };
            let (mut a, mut b) = (0.0, nu_hi_limit);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if spend_lb(mid) > p_max {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            a.max(1e-15 * nu_hi_limit)
        }
    };

    // Geometric bisection on the subgradient sign.
    let spend_hi = eval(hi, &mut best)?;
    debug_assert!(spend_hi <= p_max * (1.0 + 1e-9));
    while hi - lo > opts.nu_rel_tol * hi {
        // Geometric midpoint: the bracket can span many decades.
        let gm = (lo * hi).sqrt();
        let mid = if gm > lo && gm < hi { gm } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        let spend = eval(mid, &mut best)?;
        if spend > p_max {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let (nu_star, v) = best.expect("dual function evaluated at least once");
    Ok(DualResult {
        nu_star,
        g_value: v.g_cert,
        g_achieved: v.g_achieved,
        p: v.p,
        gap_vs_primal: None,
        evaluations,
    })
}

/// Priced water-filling levels under an additional common shift, without the
/// budget search; helper for the bracket computation.
fn surrogate_solve_with_shift(f_u: &[f64], b: &[f64], weights: &Weights, shift: f64) -> Vec<f64> {
    f_u.iter()
        .zip(b)
        .map(|(&f, &b)| {
            if f <= 0.0 {
                0.0
            } else {
                (weights.mu_u / ((weights.mu_g * b + shift) * LN2) - 1.0 / f).max(0.0)
            }
        })
        .collect()
}

/// Evaluate the full Lagrangian at a power vector (used by tests to
/// cross-check the decomposed assembly).
pub fn lagrangian(
    channel: &ChannelState,
    occupancy: &RbOccupancy,
    f_u: &[f64],
    weights: &Weights,
    p: &[f64],
    nu: f64,
    p_max: f64,
) -> f64 {
    let uav: f64 = p.iter().zip(f_u).map(|(&p, &f)| log2(1.0 + p * f)).sum();
    let (ground, _) = rates::ground_rate_with_uav(occupancy, channel, p);
    weights.mu_u * uav + weights.mu_g * ground + nu * (p_max - p.iter().sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::icic::{self, InitMode, SolverOptions};
    use crate::testutil::random_synthetic;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sub(f_u: f64, interferers: Vec<(f64, f64)>, nu: f64, mu_u: f64, mu_g: f64) -> DualSubproblem {
        DualSubproblem {
            rb: 0,
            f_u,
            interferers,
            nu,
            weights: Weights { mu_u, mu_g },
        }
    }

    fn random_sub<R: Rng>(rng: &mut R, max_interferers: usize) -> DualSubproblem {
        let k = rng.gen_range(0..=max_interferers);
        let interferers = (0..k)
            .map(|_| (rng.gen_range(0.1..10.0), rng.gen_range(0.05..2.0)))
            .collect();
        sub(
            rng.gen_range(0.1..5.0),
            interferers,
            rng.gen_range(0.1..1.5),
            rng.gen_range(0.4..1.4),
            rng.gen_range(0.4..1.4),
        )
    }

    /// Generous budget for tests that must certify tight absolute gaps.
    fn tight_opts() -> OpaOptions {
        OpaOptions {
            max_iters: 2_000_000,
            vertex_cap: 3_000_000,
            ..OpaOptions::default()
        }
    }

    /// Fine 1-D scan of the utility over [0, p_hat], refined locally.
    fn grid_optimum(sub: &DualSubproblem, points: usize) -> (f64, f64) {
        let p_hat = opa_upper_power(sub);
        if p_hat == 0.0 {
            return (0.0, sub.utility(0.0));
        }
        let step = p_hat / (points - 1) as f64;
        let (mut best_p, mut best_u) = (0.0, f64::NEG_INFINITY);
        for i in 0..points {
            let p = i as f64 * step;
            let u = sub.utility(p);
            if u > best_u {
                best_u = u;
                best_p = p;
            }
        }
        // Local refinement around the incumbent.
        let lo = (best_p - step).max(0.0);
        let hi = (best_p + step).min(p_hat);
        for i in 0..=2000 {
            let p = lo + (hi - lo) * i as f64 / 2000.0;
            let u = sub.utility(p);
            if u > best_u {
                best_u = u;
                best_p = p;
            }
        }
        (best_p, best_u)
    }

    #[test]
    fn empty_rb_closed_form() {
        // mu_u = 1, nu ln2 = 1, F_u = 2: p = 1 - 1/2.
        let s = sub(2.0, vec![], 1.0 / LN2, 1.0, 1.0);
        let sol = dual_subproblem_solve(&s, 1e-9, &OpaOptions::default()).unwrap();
        assert_relative_eq!(sol.p, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn huge_price_silences_every_rb() {
        let s = sub(5.0, vec![(2.0, 1.0)], 1e9, 1.0, 1.0);
        let sol = dual_subproblem_solve(&s, 1e-9, &OpaOptions::default()).unwrap();
        assert_eq!(sol.p, 0.0);
    }

    #[test]
    fn upper_power_arithmetic() {
        // mu_u = 1, nu ln2 = 1, F_u = 10: cap at 0.9.
        assert_relative_eq!(
            opa_upper_power(&sub(10.0, vec![], 1.0 / LN2, 1.0, 1.0)),
            0.9,
            max_relative = 1e-12
        );
        // Cap clamps to zero when the price dominates.
        assert_eq!(opa_upper_power(&sub(0.5, vec![], 10.0, 1.0, 1.0)), 0.0);
    }

    #[test]
    fn zero_cap_skips_the_polyblock() {
        let s = sub(0.5, vec![(1.0, 1.0)], 10.0, 1.0, 1.0);
        let sol = dual_subproblem_solve(&s, 1e-9, &OpaOptions::default()).unwrap();
        assert_eq!(sol.p, 0.0);
        assert_eq!(sol.value, sol.value_upper);
    }

    #[test]
    fn initial_box_values() {
        let s = sub(1.0, vec![], 1.0, 1.0, 1.0);
        assert_eq!(opa_initial_box(&s, 0.0), (1.0, 1.0));
        let s = sub(1.0, vec![(1.0, 0.5)], 1.0, 1.0, 1.0);
        assert_eq!(opa_initial_box(&s, 0.0).1, 2.0);
        let s = sub(2.0, vec![], 1.0, 2.0, 1.0);
        assert_eq!(opa_initial_box(&s, 0.5).0, 4.0);
    }

    #[test]
    fn projection_keeps_boundary_points_fixed() {
        let s = sub(1.5, vec![(2.0, 0.7)], 0.4, 1.0, 1.0);
        // A point already on the feasible boundary projects with delta = 1.
        let p0 = 0.3;
        let boundary = ((1.0 + p0 * s.f_u).powf(s.weights.mu_u), s.slack_bound(p0));
        let (delta, p) = opa_project(&s, boundary, 1e-12).unwrap();
        assert_relative_eq!(delta, 1.0, epsilon = 1e-9);
        assert_relative_eq!(p, p0, epsilon = 1e-6);
    }

    #[test]
    fn projection_halves_a_doubled_boundary_point() {
        let s = sub(1.5, vec![(2.0, 0.7)], 0.4, 1.0, 1.0);
        let p0 = 0.3;
        let boundary = ((1.0 + p0 * s.f_u).powf(s.weights.mu_u), s.slack_bound(p0));
        let doubled = (2.0 * boundary.0, 2.0 * boundary.1);
        let (delta, _) = opa_project(&s, doubled, 1e-12).unwrap();
        // The ray through 2z hits the boundary at the same point, delta = 1/2
        // up to the curvature of the boundary between the two constraints.
        let r = (delta * doubled.0, delta * doubled.1);
        assert!(delta < 1.0);
        // r must be feasible and on the boundary: slightly scaling up fails.
        let chi = ((r.0).powf(1.0 / s.weights.mu_u) - 1.0) / s.f_u;
        assert!(r.1 <= s.slack_bound(chi.max(0.0)) * (1.0 + 1e-9));
        assert_relative_eq!(delta, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn projection_matches_a_dense_delta_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let s = random_sub(&mut rng, 3);
            let p_hat = opa_upper_power(&s);
            if p_hat == 0.0 {
                continue;
            }
            let z = opa_initial_box(&s, p_hat);
            let vertex = (z.0 * rng.gen_range(0.8..1.5), z.1 * rng.gen_range(0.8..1.5));
            let (delta, _) = opa_project(&s, vertex, 1e-12).unwrap();
            // Scan oracle.
            let chi = |d: f64| ((d * vertex.0).powf(1.0 / s.weights.mu_u) - 1.0) / s.f_u;
            let feasible =
                |d: f64| d * vertex.1 <= s.slack_bound(chi(d).max(0.0));
            let steps = 1_000_000;
            let mut scan = 0.0;
            for i in (0..=steps).rev() {
                let d = i as f64 / steps as f64;
                if feasible(d) {
                    scan = d;
                    break;
                }
            }
            assert!((delta - scan).abs() <= 2e-6, "delta {delta} scan {scan}");
        }
    }

    #[test]
    fn polyblock_matches_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let opts = tight_opts();
        for trial in 0..40 {
            let s = random_sub(&mut rng, 3);
            let outcome = opa_iterate(&s, &opts).unwrap();
            assert!(outcome.converged, "trial {trial} ran out of iterations");
            let (_, u_ref) = grid_optimum(&s, 20_000);
            assert!(
                outcome.utility >= u_ref - 1e-6 - 1e-9 * u_ref,
                "OPA {} below grid {}",
                outcome.utility,
                u_ref
            );
            assert!(outcome.utility <= outcome.utility_upper * (1.0 + 1e-12));
            assert!(outcome.p <= opa_upper_power(&s) + 1e-12);
        }
    }

    #[test]
    fn tiny_vertex_cap_errors_out() {
        let s = sub(3.0, vec![(5.0, 1.0), (2.0, 0.5)], 0.3, 1.0, 1.0);
        let opts = OpaOptions {
            vertex_cap: 4,
            epsilon: 1e-12,
            ..OpaOptions::default()
        };
        match opa_iterate(&s, &opts) {
            Err(DualError::VertexCap { cap }) => assert_eq!(cap, 4),
            other => panic!("expected vertex-cap error, got {other:?}"),
        }
    }

    #[test]
    fn no_interferer_polyblock_reaches_the_closed_form() {
        // Degenerate monotone problem: the polyblock must still land on the
        // concave closed-form optimum.
        let s = sub(2.0, vec![], 0.5, 1.0, 1.0);
        let outcome = opa_iterate(&s, &OpaOptions::default()).unwrap();
        let p_star = (s.weights.mu_u / (s.nu * LN2) - 1.0 / s.f_u).max(0.0);
        assert!(outcome.utility >= s.utility(p_star) - 1e-6);
        assert!(s.objective(outcome.p) >= s.objective(p_star) - 1e-6);
    }

    #[test]
    fn vertex_and_incumbent_traces_are_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let s = random_sub(&mut rng, 2);
            if opa_upper_power(&s) == 0.0 {
                continue;
            }
            // Re-run the loop manually to observe the traces.
            let opts = OpaOptions::default();
            let z0 = opa_initial_box(&s, opa_upper_power(&s));
            let mut vertices = vec![z0];
            let mut best_u = s.utility(0.0).max(s.utility(opa_upper_power(&s)));
            let mut last_vertex_u = f64::INFINITY;
            let mut last_best = 0.0;
            for _ in 0..200 {
                let (idx, &z) = vertices
                    .iter()
                    .enumerate()
                    .max_by(|a, b| (a.1 .0 * a.1 .1).partial_cmp(&(b.1 .0 * b.1 .1)).unwrap())
                    .unwrap();
                let u_vertex = z.0 * z.1;
                assert!(u_vertex <= last_vertex_u + 1e-9 * u_vertex.abs());
                last_vertex_u = u_vertex;
                assert!(best_u >= last_best - 1e-12);
                last_best = best_u;
                if u_vertex - best_u <= opts.epsilon {
                    break;
                }
                let (delta, p) = opa_project(&s, z, opts.delta_tol).unwrap();
                best_u = best_u.max(s.utility(p));
                vertices.swap_remove(idx);
                if delta < 1.0 {
                    vertices.push((delta * z.0, z.1));
                    vertices.push((z.0, delta * z.1));
                }
                vertices.retain(|v| v.0 * v.1 > best_u);
                if vertices.is_empty() {
                    break;
                }
            }
        }
    }

    #[test]
    fn utility_is_strictly_increasing_in_the_slacks() {
        // Componentwise monotonicity of U(z) = z1 z2 on positive vectors.
        let grid = [0.5, 1.0, 2.0, 4.0];
        for &z1 in &grid {
            for &z2 in &grid {
                assert!((z1 + 0.1) * z2 > z1 * z2);
                assert!(z1 * (z2 + 0.1) > z1 * z2);
            }
        }
    }

    #[test]
    fn feasibility_is_monotone_in_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let s = random_sub(&mut rng, 3);
            let p_hat = opa_upper_power(&s);
            let z = opa_initial_box(&s, p_hat.max(0.1));
            let chi = |d: f64| ((d * z.0).powf(1.0 / s.weights.mu_u) - 1.0) / s.f_u;
            let feasible = |d: f64| d * z.1 <= s.slack_bound(chi(d).max(0.0));
            let mut seen_infeasible = false;
            for i in 0..=100 {
                let d = i as f64 / 100.0;
                if seen_infeasible {
                    assert!(!feasible(d), "feasibility not monotone at delta {d}");
                } else if !feasible(d) {
                    seen_infeasible = true;
                }
            }
        }
    }

    #[test]
    fn lemma3_cap_holds_on_random_subproblems() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..100 {
            let s = random_sub(&mut rng, 3);
            let sol = dual_subproblem_solve(&s, 1e-7, &OpaOptions::default()).unwrap();
            assert!(sol.p <= opa_upper_power(&s) + 1e-12);
        }
    }

    #[test]
    fn dual_function_dominates_random_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (cs, occ) = random_synthetic(&mut rng, 5, 4, 2);
        let w = Weights::new(1.0, 1.0);
        let p_max = 2.0;
        let (_, f_u) = optimal_association(&cs, &occ, 0.0).unwrap();
        for &nu in &[0.05, 0.3, 1.0, 4.0] {
            let g = dual_function(&cs, &occ, &w, nu, p_max, 1e-6, &OpaOptions::default()).unwrap();
            // Decomposed assembly agrees with the Lagrangian evaluated whole.
            assert_relative_eq!(
                g.g_achieved,
                lagrangian(&cs, &occ, &f_u, &w, &g.p, nu, p_max),
                max_relative = 1e-9
            );
            for _ in 0..200 {
                let mut p: Vec<f64> = (0..occ.n_rbs).map(|_| rng.gen_range(0.0..1.0)).collect();
                let s: f64 = p.iter().sum();
                p.iter_mut().for_each(|v| *v *= rng.gen_range(0.0..1.0) * p_max / s.max(1e-9));
                let q = rates::weighted_objective(
                    &w,
                    p.iter()
                        .zip(&f_u)
                        .map(|(&p, &f)| log2(1.0 + p * f))
                        .sum(),
                    rates::ground_rate_with_uav(&occ, &cs, &p).0,
                );
                assert!(g.g_cert >= q - 1e-7, "weak duality violated");
            }
        }
    }

    #[test]
    fn dual_function_limit_at_huge_price() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let (cs, occ) = random_synthetic(&mut rng, 4, 3, 2);
        let w = Weights::new(1.0, 1.0);
        let p_max = 2.0;
        let nu = 1e9;
        let g = dual_function(&cs, &occ, &w, nu, p_max, 1e-6, &OpaOptions::default()).unwrap();
        assert!(g.p.iter().all(|&p| p == 0.0));
        let rg = rates::ground_rate_no_uav(&occ);
        assert_relative_eq!(g.g_achieved, rg + nu * p_max, max_relative = 1e-9);
    }

    #[test]
    fn dual_function_is_convex_in_nu() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let (cs, occ) = random_synthetic(&mut rng, 4, 3, 2);
        let w = Weights::new(1.0, 1.0);
        let g = |nu: f64| {
            dual_function(&cs, &occ, &w, nu, 1.5, 1e-8, &OpaOptions::default())
                .unwrap()
                .g_achieved
        };
        for &(a, b) in &[(0.05, 0.4), (0.2, 1.5), (0.8, 3.0)] {
            let mid = 0.5 * (a + b);
            assert!(g(mid) <= 0.5 * (g(a) + g(b)) + 1e-6);
        }
    }

    #[test]
    fn bracket_endpoints_have_opposite_subgradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let (cs, occ) = random_synthetic(&mut rng, 5, 4, 2);
        let w = Weights::new(1.0, 1.0);
        let p_max = 1.0;
        let opts = OpaOptions::default();
        let tiny = dual_function(&cs, &occ, &w, 1e-6, p_max, 1e-6, &opts).unwrap();
        let huge = dual_function(&cs, &occ, &w, 1e6, p_max, 1e-6, &opts).unwrap();
        assert!(tiny.p.iter().sum::<f64>() > p_max);
        assert!(huge.p.iter().sum::<f64>() < p_max);
    }

    #[test]
    fn bound_dominates_every_primal_scheme() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..10 {
            let (cs, occ) = random_synthetic(&mut rng, 6, 4, 2);
            let w = Weights::new(rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0));
            let p_max = rng.gen_range(0.5..4.0);
            let sopts = SolverOptions::default();
            let bound = dual_minimize(&cs, &occ, &w, p_max, &DualOptions::default()).unwrap();
            let schemes = [
                icic::egoistic(&cs, &occ, &w, p_max, &sopts).unwrap(),
                icic::altruistic(&cs, &occ, &w, p_max, &sopts).unwrap(),
                icic::sca_solve(&cs, &occ, &w, p_max, &sopts, InitMode::Default).unwrap(),
            ];
            for s in &schemes {
                assert!(
                    bound.g_value >= s.rates.weighted - 1e-6,
                    "bound {} below {} ({})",
                    bound.g_value,
                    s.rates.weighted,
                    s.scheme.name()
                );
            }
        }
    }

    #[test]
    fn small_instance_bound_is_tight_against_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let (cs, occ) = random_synthetic(&mut rng, 4, 2, 2);
        let w = Weights::new(1.0, 1.0);
        let p_max = 1.0;
        let (_, f_u) = optimal_association(&cs, &occ, 0.0).unwrap();
        let q = |p: &[f64]| {
            rates::weighted_objective(
                &w,
                p.iter().zip(&f_u).map(|(&p, &f)| log2(1.0 + p * f)).sum(),
                rates::ground_rate_with_uav(&occ, &cs, p).0,
            )
        };
        // Exhaustive 2-D grid over the simplex.
        let n = 400;
        let mut best = f64::NEG_INFINITY;
        for i in 0..n {
            for j in 0..(n - i) {
                let p = [
                    i as f64 * p_max / (n - 1) as f64,
                    j as f64 * p_max / (n - 1) as f64,
                ];
                best = best.max(q(&p));
            }
        }
        let bound = dual_minimize(&cs, &occ, &w, p_max, &DualOptions::default()).unwrap();
        assert!(bound.g_value >= best - 1e-9);
        assert!(
            (bound.g_value - best) / best < 0.01,
            "bound {} vs grid {}",
            bound.g_value,
            best
        );
    }
}
