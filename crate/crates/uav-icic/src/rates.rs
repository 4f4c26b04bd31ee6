//! Achievable-rate formulas and the weighted network objective.
//!
//! All rates are in bps/Hz: the per-RB bandwidth is normalized to 1 Hz inside
//! the optimization, and reports rescale at the boundary if asked to. log2 is
//! evaluated as ln(x)/ln(2) with no algebraic reshuffling, so objective
//! comparisons are reproducible across platforms at 1e-12 granularity.

use serde::Serialize;
use thiserror::Error;

use crate::channel::ChannelState;
use crate::icic::Association;
use crate::scheduler::RbOccupancy;

#[derive(Debug, Error)]
pub enum RateError {
    #[error("UAV associated with cell {cell} on RB {rb}, but that cell is occupied")]
    AssociationOccupied { cell: usize, rb: usize },
}

/// Relative weights of the UAV rate and the ground sum-rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct Weights {
    pub mu_u: f64,
    pub mu_g: f64,
}

impl Weights {
    pub fn new(mu_u: f64, mu_g: f64) -> Self {
        let w = Self { mu_u, mu_g };
        w.validate();
        w
    }

    pub fn validate(&self) {
        assert!(
            self.mu_u >= 0.0 && self.mu_g >= 0.0 && (self.mu_u > 0.0 || self.mu_g > 0.0),
            "weights must be nonnegative and not both zero"
        );
    }
}

pub(crate) fn log2(x: f64) -> f64 {
    x.ln() / std::f64::consts::LN_2
}

/// Per-RB rate breakdown.
#[derive(Debug, Clone, Serialize)]
pub struct RbRates {
    pub rb: usize,
    pub uav: f64,
    pub ground: f64,
    pub ground_no_uav: f64,
}

/// Rates achieved by one scheme on one realization.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub uav_rate: f64,
    pub ground_rate: f64,
    pub ground_rate_no_uav: f64,
    pub weighted: f64,
    pub per_rb: Vec<RbRates>,
}

/// Ground sum-rate with the UAV silent: sum of log2(1 + gamma_j(n)).
///
/// Summation runs RB-major, matching [`ground_rate_with_uav`] term for term
/// so a zero allocation reproduces this value bit-exactly.
pub fn ground_rate_no_uav(occupancy: &RbOccupancy) -> f64 {
    (0..occupancy.n_rbs)
        .map(|n| {
            occupancy
                .occupied_cells(n)
                .iter()
                .map(|&j| log2(1.0 + occupancy.gamma[&(j, n)]))
                .sum::<f64>()
        })
        .sum()
}

fn ground_rate_rb(occupancy: &RbOccupancy, channel: &ChannelState, rb: usize, p: f64) -> f64 {
    occupancy
        .occupied_cells(rb)
        .iter()
        .map(|&j| {
            let gamma = occupancy.gamma[&(j, rb)];
            log2(1.0 + gamma / (1.0 + p * channel.f(j, rb)))
        })
        .sum()
}

/// Ground sum-rate under UAV interference, total and per RB.
pub fn ground_rate_with_uav(
    occupancy: &RbOccupancy,
    channel: &ChannelState,
    p: &[f64],
) -> (f64, Vec<f64>) {
    let per_rb: Vec<f64> = (0..occupancy.n_rbs)
        .map(|n| ground_rate_rb(occupancy, channel, n, p[n]))
        .collect();
    (per_rb.iter().sum(), per_rb)
}

/// UAV rate under an association, total and per RB.
///
/// Errors if any RB with positive power is associated into an occupied cell.
pub fn uav_rate(
    channel: &ChannelState,
    occupancy: &RbOccupancy,
    association: &Association,
    p: &[f64],
) -> Result<(f64, Vec<f64>), RateError> {
    let mut per_rb = vec![0.0; occupancy.n_rbs];
    for n in 0..occupancy.n_rbs {
        let Some(j) = association.j_star[n] else {
            continue;
        };
        if occupancy.is_occupied(j, n) {
            return Err(RateError::AssociationOccupied { cell: j, rb: n });
        }
        per_rb[n] = log2(1.0 + p[n] * channel.f(j, n));
    }
    Ok((per_rb.iter().sum(), per_rb))
}

/// The weighted network objective Q = mu_u * uav + mu_g * ground.
pub fn weighted_objective(weights: &Weights, uav_rate: f64, ground_rate: f64) -> f64 {
    weights.mu_u * uav_rate + weights.mu_g * ground_rate
}

/// Full rate report for a (association, power) pair.
pub fn rate_report(
    weights: &Weights,
    channel: &ChannelState,
    occupancy: &RbOccupancy,
    association: &Association,
    p: &[f64],
) -> Result<RateReport, RateError> {
    let (uav_total, uav_rb) = uav_rate(channel, occupancy, association, p)?;
    let (ground_total, ground_rb) = ground_rate_with_uav(occupancy, channel, p);
    let per_rb = (0..occupancy.n_rbs)
        .map(|n| RbRates {
            rb: n,
            uav: uav_rb[n],
            ground: ground_rb[n],
            ground_no_uav: ground_rate_rb(occupancy, channel, n, 0.0),
        })
        .collect();
    Ok(RateReport {
        uav_rate: uav_total,
        ground_rate: ground_total,
        ground_rate_no_uav: ground_rate_no_uav(occupancy),
        weighted: weighted_objective(weights, uav_total, ground_total),
        per_rb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::synthetic_instance;
    use approx::assert_relative_eq;

    #[test]
    fn ground_rate_without_uav_trivia() {
        // Empty occupancy.
        let (_, occ) = synthetic_instance(2, 2, &[], &[1.0, 1.0]);
        assert_eq!(ground_rate_no_uav(&occ), 0.0);
        // One UE at gamma = 1 and gamma = 3.
        let (_, occ) = synthetic_instance(2, 1, &[(0, 0, 1.0, 1.0)], &[1.0]);
        assert_relative_eq!(ground_rate_no_uav(&occ), 1.0);
        let (_, occ) = synthetic_instance(2, 1, &[(0, 0, 3.0, 1.0)], &[1.0]);
        assert_relative_eq!(ground_rate_no_uav(&occ), 2.0);
    }

    #[test]
    fn zero_power_recovers_the_quiet_network() {
        let (cs, occ) = synthetic_instance(
            3,
            2,
            &[(0, 0, 2.0, 0.5), (1, 1, 5.0, 1.5)],
            &[0.7, 0.9],
        );
        let (with_uav, _) = ground_rate_with_uav(&occ, &cs, &[0.0, 0.0]);
        assert_relative_eq!(with_uav, ground_rate_no_uav(&occ), max_relative = 1e-15);
    }

    #[test]
    fn huge_power_silences_a_ground_ue() {
        let (cs, occ) = synthetic_instance(2, 1, &[(0, 0, 4.0, 1.0)], &[1.0]);
        let (r, _) = ground_rate_with_uav(&occ, &cs, &[1e12]);
        assert!(r < 1e-11);
    }

    #[test]
    fn ground_rate_interference_arithmetic() {
        // gamma = 1, p F = 1: log2(1 + 1/2).
        let (cs, occ) = synthetic_instance(2, 1, &[(0, 0, 1.0, 1.0)], &[1.0]);
        let (r, _) = ground_rate_with_uav(&occ, &cs, &[1.0]);
        assert_relative_eq!(r, 1.5f64.log2(), max_relative = 1e-15);
    }

    #[test]
    fn uav_rate_values() {
        let (cs, occ) = synthetic_instance(2, 1, &[], &[1.0]);
        let assoc = Association { j_star: vec![Some(1)] };
        assert_eq!(uav_rate(&cs, &occ, &assoc, &[0.0]).unwrap().0, 0.0);
        // p F = 1 -> 1 bps/Hz; p F = 7 -> 3 bps/Hz (F = 1 on cell 1).
        assert_relative_eq!(uav_rate(&cs, &occ, &assoc, &[1.0]).unwrap().0, 1.0);
        assert_relative_eq!(uav_rate(&cs, &occ, &assoc, &[7.0]).unwrap().0, 3.0);
    }

    #[test]
    fn association_into_occupied_cell_is_rejected() {
        let (cs, occ) = synthetic_instance(2, 1, &[(0, 0, 1.0, 1.0)], &[1.0]);
        let assoc = Association { j_star: vec![Some(0)] };
        assert!(uav_rate(&cs, &occ, &assoc, &[0.5]).is_err());
    }

    #[test]
    fn weighted_objective_cases() {
        assert_eq!(weighted_objective(&Weights::new(1.0, 1.0), 2.0, 3.0), 5.0);
        assert_eq!(weighted_objective(&Weights::new(1.0, 0.0), 2.0, 3.0), 2.0);
        assert_eq!(weighted_objective(&Weights::new(0.0, 1.0), 2.0, 3.0), 3.0);
    }

    #[test]
    fn ground_rate_is_decreasing_and_convex_in_power() {
        let (cs, occ) = synthetic_instance(
            3,
            1,
            &[(0, 0, 3.0, 0.8), (1, 0, 1.5, 0.3)],
            &[1.0],
        );
        let eval = |p: f64| ground_rate_with_uav(&occ, &cs, &[p]).0;
        let grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.2).collect();
        for w in grid.windows(2) {
            assert!(eval(w[1]) <= eval(w[0]) + 1e-12);
        }
        for w in grid.windows(3) {
            let mid = eval(w[1]);
            assert!(mid <= 0.5 * (eval(w[0]) + eval(w[2])) + 1e-12, "convexity");
        }
    }

    #[test]
    fn quiet_ground_rate_ignores_rb_relabeling() {
        let entries = [(0usize, 0usize, 2.0, 1.0), (1, 1, 5.0, 0.5), (2, 2, 0.7, 2.0)];
        let (_, occ) = synthetic_instance(4, 3, &entries, &[1.0, 1.0, 1.0]);
        // Same occupancy with RBs cycled one position.
        let relabeled: Vec<_> = entries.iter().map(|&(j, n, g, f)| (j, (n + 1) % 3, g, f)).collect();
        let (_, occ2) = synthetic_instance(4, 3, &relabeled, &[1.0, 1.0, 1.0]);
        assert_relative_eq!(
            ground_rate_no_uav(&occ),
            ground_rate_no_uav(&occ2),
            max_relative = 1e-12
        );
    }

    #[test]
    fn uav_rate_is_concave_nondecreasing_in_power() {
        let (cs, occ) = synthetic_instance(2, 1, &[], &[0.5]);
        let assoc = Association { j_star: vec![Some(0)] };
        let eval = |p: f64| uav_rate(&cs, &occ, &assoc, &[p]).unwrap().0;
        let grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.2).collect();
        for w in grid.windows(2) {
            assert!(eval(w[1]) >= eval(w[0]) - 1e-12);
        }
        for w in grid.windows(3) {
            let mid = eval(w[1]);
            assert!(mid >= 0.5 * (eval(w[0]) + eval(w[2])) - 1e-12, "concavity");
        }
    }
}
