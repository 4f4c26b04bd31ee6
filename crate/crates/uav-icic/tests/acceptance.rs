//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured quantities (visible with `--nocapture`).
//!
//! Stochastic setups use fixed seeds throughout, so every criterion is
//! reproducible run to run.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use uav_icic::decentral::{self, ClusterPartition, DecentralMode};
use uav_icic::dual_bound::{
    dual_minimize, dual_subproblem_solve, opa_upper_power, DualOptions, DualSubproblem,
    OpaOptions,
};
use uav_icic::icic::{self, InitMode, Scheme, SolverOptions};
use uav_icic::rates::{self, Weights};
use uav_icic::report::{report_json, run_scenario};
use uav_icic::scenario::{build_instance, snapshot_seed, Instance, ScenarioConfig};
use uav_icic::scheduler::RbOccupancy;
use uav_icic::topology::HexGrid;
use uav_icic::ChannelState;

const LN2: f64 = std::f64::consts::LN_2;

/// Synthetic instance with hand-picked SINRs and normalized gains, built on
/// the public constructors. `occupied` lists (cell, rb, gamma, f); free cells
/// see the UAV with `free_f[rb]`.
fn synth_instance(
    n_cells: usize,
    n_rbs: usize,
    occupied: &[(usize, usize, f64, f64)],
    free_f: &[f64],
) -> (ChannelState, RbOccupancy) {
    let mut sigma = vec![vec![0.0f64; n_rbs]; n_cells];
    for row in &mut sigma {
        for (n, s) in row.iter_mut().enumerate() {
            *s = 1.0 / free_f[n];
        }
    }
    let mut entries = Vec::new();
    let mut gamma = BTreeMap::new();
    let mut h = BTreeMap::new();
    for (ue, &(j, n, g, f)) in occupied.iter().enumerate() {
        sigma[j][n] = 1.0 / f;
        entries.push((j, n, ue));
        gamma.insert((j, n), g);
        h.insert((j, n), g * sigma[j][n]);
    }
    let cs = ChannelState::from_parts(vec![1.0; n_cells], sigma, h);
    let mut occ = RbOccupancy::from_assignments(n_cells, n_rbs, &entries);
    occ.gamma = gamma;
    (cs, occ)
}

fn random_synth(
    rng: &mut ChaCha8Rng,
    n_cells: usize,
    n_rbs: usize,
    max_interferers: usize,
) -> (ChannelState, RbOccupancy) {
    let free_f: Vec<f64> = (0..n_rbs).map(|_| rng.gen_range(0.1..5.0)).collect();
    let mut occupied = Vec::new();
    for n in 0..n_rbs {
        let k = rng.gen_range(0..=max_interferers.min(n_cells - 1));
        let mut cells: Vec<usize> = (0..n_cells).collect();
        for i in 0..k {
            let swap = rng.gen_range(i..n_cells);
            cells.swap(i, swap);
        }
        for &cell in &cells[..k] {
            occupied.push((cell, n, rng.gen_range(0.3..30.0), rng.gen_range(0.05..2.0)));
        }
    }
    synth_instance(n_cells, n_rbs, &occupied, &free_f)
}

/// The shared batch of small random pipeline scenarios (tiers <= 3,
/// N <= 10, K <= 20) used by criteria 1, 2 and 9.
fn scenario_batch(count: u64) -> Vec<(ScenarioConfig, Instance)> {
    (0..count)
        .into_par_iter()
        .map(|seed| {
            let mut cfg = ScenarioConfig::small_random(seed);
            let mut wrng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
            if seed % 2 == 1 {
                cfg.weights.mu_u = wrng.gen_range(0.2..2.0);
                cfg.weights.mu_g = wrng.gen_range(0.2..2.0);
            }
            let table = cfg.pathloss_table().unwrap();
            let inst = build_instance(&cfg, &table, snapshot_seed(cfg.seed, 0)).unwrap();
            (cfg, inst)
        })
        .collect()
}

#[test]
fn criterion_01_sca_monotonic_convergence() {
    let start = std::time::Instant::now();
    let batch = scenario_batch(100);
    let mut max_iters_seen = 0;
    for (cfg, inst) in &batch {
        let sol = icic::sca_solve(
            &inst.channel,
            &inst.occupancy,
            &cfg.weights(),
            cfg.p_max_w(),
            &SolverOptions { epsilon: 1e-6, max_iters: 200, gain_floor: 0.0 },
            InitMode::Default,
        )
        .unwrap();
        let d = sol.diagnostics.expect("solver diagnostics");
        assert!(d.converged, "seed {} did not converge in 200 iterations", cfg.seed);
        max_iters_seen = max_iters_seen.max(d.iterations);
        for pair in d.objective_trace.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-9,
                "seed {}: objective dipped {} -> {}",
                cfg.seed,
                pair[0],
                pair[1]
            );
        }
    }
    println!(
        "ACCEPTANCE 1 PASS: monotone nondecreasing traces on 100/100 scenarios, \
         max {} iterations, {:.1?}",
        max_iters_seen,
        start.elapsed()
    );
}

#[test]
fn criterion_02_weak_duality_sandwich() {
    let start = std::time::Instant::now();
    let batch = scenario_batch(100);
    let results: Vec<(u64, f64)> = batch
        .par_iter()
        .map(|(cfg, inst)| {
            let w = cfg.weights();
            let p_max = cfg.p_max_w();
            let opts = SolverOptions::default();
            let bound = dual_minimize(
                &inst.channel,
                &inst.occupancy,
                &w,
                p_max,
                &DualOptions::default(),
            )
            .unwrap()
            .g_value;

            let clusters = decentral::make_clusters(&inst.grid, cfg.solver.cluster_size);
            let partition = decentral::assign_heads(clusters, &inst.channel);
            let (dec, _) = decentral::run_decentralized(
                &inst.channel,
                &inst.occupancy,
                &partition,
                &w,
                p_max,
                DecentralMode::OneRound,
                &opts,
            )
            .unwrap();

            let solutions = [
                icic::egoistic(&inst.channel, &inst.occupancy, &w, p_max, &opts).unwrap(),
                icic::altruistic(&inst.channel, &inst.occupancy, &w, p_max, &opts).unwrap(),
                icic::terrestrial_icic(
                    &inst.channel,
                    &inst.occupancy,
                    &inst.neighbors,
                    cfg.ues.q,
                    &w,
                    p_max,
                    &opts,
                )
                .unwrap(),
                icic::sca_solve(&inst.channel, &inst.occupancy, &w, p_max, &opts, InitMode::Default)
                    .unwrap(),
                dec,
            ];
            let mut sca_gap = f64::NAN;
            for sol in &solutions {
                assert!(
                    bound >= sol.rates.weighted - 1e-6,
                    "seed {}: bound {} below {} objective {}",
                    cfg.seed,
                    bound,
                    sol.scheme.name(),
                    sol.rates.weighted
                );
                if sol.scheme == Scheme::Sca {
                    sca_gap = (bound - sol.rates.weighted) / bound;
                }
            }
            (cfg.seed, sca_gap)
        })
        .collect();

    let tight = results.iter().filter(|(_, gap)| *gap <= 0.02).count();
    assert!(
        tight >= 90,
        "SCA within 2% of the bound on only {tight}/100 scenarios"
    );
    let worst = results.iter().map(|(_, g)| *g).fold(0.0f64, f64::max);
    println!(
        "ACCEPTANCE 2 PASS: bound dominated all schemes on 100/100; SCA gap <= 2% on \
         {tight}/100 (worst gap {:.4}%), {:.1?}",
        100.0 * worst,
        start.elapsed()
    );
}

#[test]
fn criterion_03_decentralized_gap_at_reference_scale() {
    let start = std::time::Instant::now();
    // Reference setup scaled to three tiers: 37 cells, N = 30, K = 30.
    let mut cfg = ScenarioConfig::default();
    cfg.grid.tiers = 3;
    cfg.ues.count = 30;
    cfg.snapshots = 20;
    cfg.solver.compute_bound = false;
    cfg.schemes = vec!["sca".into(), "decentral-one-round".into()];
    let report = run_scenario(&cfg).unwrap();

    let mut gaps = Vec::new();
    for snap in &report.snapshots {
        let q_sca = snap
            .schemes
            .iter()
            .find(|s| s.scheme == Scheme::Sca)
            .unwrap()
            .rates
            .weighted;
        let q_dec = snap
            .schemes
            .iter()
            .find(|s| s.scheme == Scheme::DecentralOneRound)
            .unwrap()
            .rates
            .weighted;
        gaps.push((q_sca - q_dec) / q_sca);
    }
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!(
        mean_gap <= 0.05,
        "mean centralized/decentralized gap {:.3}% exceeds 5%",
        100.0 * mean_gap
    );
    println!(
        "ACCEPTANCE 3 PASS: mean decentralized gap {:.3}% over 20 snapshots \
         (37 cells, N=30, K=30), {:.1?}",
        100.0 * mean_gap,
        start.elapsed()
    );
}

#[test]
fn criterion_04_opa_global_optimality() {
    let start = std::time::Instant::now();
    let opts = OpaOptions {
        epsilon: 1e-6,
        max_iters: 2_000_000,
        vertex_cap: 3_000_000,
        ..OpaOptions::default()
    };
    let worst_err: f64 = (0..200u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial * 7 + 1);
            let k = rng.gen_range(1..=3);
            let sub = DualSubproblem {
                rb: 0,
                f_u: rng.gen_range(0.1..5.0),
                interferers: (0..k)
                    .map(|_| (rng.gen_range(0.1..10.0), rng.gen_range(0.05..2.0)))
                    .collect(),
                nu: rng.gen_range(0.1..1.5),
                weights: Weights {
                    mu_u: rng.gen_range(0.4..1.4),
                    mu_g: rng.gen_range(0.4..1.4),
                },
            };
            let p_hat = opa_upper_power(&sub);
            let sol = dual_subproblem_solve(&sub, 0.0, &opts).unwrap();
            assert!(
                sol.p <= p_hat + 1e-12,
                "trial {trial}: maximizer cap violated ({} > {})",
                sol.p,
                p_hat
            );
            let u_opa = sub.utility(sol.p);

            // 1e5-point grid over [0, p_hat].
            let points = 100_000usize;
            let mut u_grid = f64::NEG_INFINITY;
            let mut arg = 0.0;
            for i in 0..points {
                let p = p_hat * i as f64 / (points - 1) as f64;
                let u = sub.utility(p);
                if u > u_grid {
                    u_grid = u;
                    arg = p;
                }
            }
            assert!(
                u_opa >= u_grid - 1e-6,
                "trial {trial}: OPA utility {u_opa} below grid {u_grid}"
            );
            // Micro-refined local optimum confirms the other direction.
            let step = p_hat / (points - 1) as f64;
            let mut u_ref = u_grid;
            for i in 0..=4000 {
                let p = (arg - step).max(0.0) + i as f64 * step / 2000.0;
                u_ref = u_ref.max(sub.utility(p.min(p_hat)));
            }
            assert!(
                u_opa <= u_ref + 1e-9,
                "trial {trial}: OPA utility {u_opa} exceeds refined optimum {u_ref}"
            );
            (u_opa - u_grid).abs()
        })
        .reduce(|| 0.0, f64::max);
    println!(
        "ACCEPTANCE 4 PASS: 200/200 subproblems within 1e-6 of the grid \
         (worst |diff| {worst_err:.2e}); maximizer cap held everywhere, {:.1?}",
        start.elapsed()
    );
}

#[test]
fn criterion_05_surrogate_correctness() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);

    // Lemma-style lower bound at 10^4 random (anchor, p) pairs.
    let mut pairs = 0;
    while pairs < 10_000 {
        let (cs, occ) = random_synth(&mut rng, 6, 4, 3);
        for _ in 0..50 {
            let anchor: Vec<f64> = (0..occ.n_rbs).map(|_| rng.gen_range(0.0..2.0)).collect();
            let coeffs = icic::surrogate_coeffs(&cs, &occ, &anchor);
            let bound_at = |p: &[f64]| {
                coeffs.a
                    - coeffs
                        .b
                        .iter()
                        .zip(p.iter().zip(&anchor))
                        .map(|(&b, (&p, &a))| b * (p - a))
                        .sum::<f64>()
            };
            let truth_anchor = rates::ground_rate_with_uav(&occ, &cs, &anchor).0;
            assert!(
                (bound_at(&anchor) - truth_anchor).abs() <= 1e-9,
                "no equality at the anchor"
            );
            let p: Vec<f64> = (0..occ.n_rbs).map(|_| rng.gen_range(0.0..2.0)).collect();
            let truth = rates::ground_rate_with_uav(&occ, &cs, &p).0;
            assert!(truth >= bound_at(&p) - 1e-9, "lower bound violated");
            pairs += 1;
        }
    }

    // Prices match central finite differences at 10^3 points.
    let mut checked = 0;
    let mut worst_rel = 0.0f64;
    while checked < 1_000 {
        let (cs, occ) = random_synth(&mut rng, 6, 4, 3);
        let anchor: Vec<f64> = (0..occ.n_rbs).map(|_| rng.gen_range(0.0..1.5)).collect();
        let coeffs = icic::surrogate_coeffs(&cs, &occ, &anchor);
        for n in 0..occ.n_rbs {
            if coeffs.b[n] <= 1e-9 {
                continue;
            }
            let h = 1e-5 * anchor[n].max(1.0);
            let mut lo = anchor.clone();
            let mut hi = anchor.clone();
            lo[n] -= h;
            hi[n] += h;
            let fd = -(rates::ground_rate_with_uav(&occ, &cs, &hi).0
                - rates::ground_rate_with_uav(&occ, &cs, &lo).0)
                / (2.0 * h);
            let rel = ((coeffs.b[n] - fd) / fd).abs();
            assert!(rel <= 1e-5, "price/finite-difference mismatch: rel err {rel}");
            worst_rel = worst_rel.max(rel);
            checked += 1;
        }
    }
    println!(
        "ACCEPTANCE 5 PASS: lower bound held at 10000/10000 pairs (equality at anchors); \
         1000 price checks vs finite differences, worst rel err {worst_rel:.2e}, {:.1?}",
        start.elapsed()
    );
}

#[test]
fn criterion_06_small_instance_global_optimality() {
    let start = std::time::Instant::now();
    let trials = 50;
    let grid_n = 400usize;
    let hits: Vec<bool> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial * 13 + 600);
            // 2 RBs, up to 2 interferers each, plus always-free cells.
            let n_cells = 5;
            let free_f: Vec<f64> = (0..2).map(|_| rng.gen_range(0.2..4.0)).collect();
            let mut occupied = Vec::new();
            for n in 0..2usize {
                for cell in 0..rng.gen_range(0..=2usize) {
                    occupied.push((
                        cell,
                        n,
                        rng.gen_range(0.5..30.0),
                        rng.gen_range(0.1..2.0),
                    ));
                }
            }
            let (cs, occ) = synth_instance(n_cells, 2, &occupied, &free_f);
            let w = Weights::new(rng.gen_range(0.5..1.5), rng.gen_range(0.5..1.5));
            let p_max = rng.gen_range(0.5..2.0);

            let (_, f_u) = icic::optimal_association(&cs, &occ, 0.0).unwrap();
            let q = |p: &[f64]| {
                let uav: f64 = p
                    .iter()
                    .zip(&f_u)
                    .map(|(&p, &f)| (1.0 + p * f).ln() / LN2)
                    .sum();
                w.mu_u * uav + w.mu_g * rates::ground_rate_with_uav(&occ, &cs, p).0
            };

            // Exhaustive grid over the budget simplex.
            let h = p_max / (grid_n - 1) as f64;
            let mut best = f64::NEG_INFINITY;
            for i in 0..grid_n {
                for j in 0..(grid_n - i) {
                    best = best.max(q(&[i as f64 * h, j as f64 * h]));
                }
            }

            let sca = icic::sca_solve(
                &cs,
                &occ,
                &w,
                p_max,
                &SolverOptions { epsilon: 1e-9, ..SolverOptions::default() },
                InitMode::Default,
            )
            .unwrap();

            // Objective Lipschitz bound gives the honest grid-resolution margin.
            let beta_max = icic::surrogate_coeffs(&cs, &occ, &[0.0, 0.0])
                .b
                .iter()
                .fold(0.0f64, |a, &b| a.max(b));
            let f_max = f_u.iter().fold(0.0f64, |a, &b| a.max(b));
            let lipschitz = w.mu_u * f_max / LN2 + w.mu_g * beta_max;
            assert!(
                sca.rates.weighted <= best + lipschitz * h * 2.0 + 1e-9,
                "trial {trial}: SCA {} exceeded grid {} beyond resolution",
                sca.rates.weighted,
                best
            );
            sca.rates.weighted >= best - 1e-4
        })
        .collect();

    let global = hits.iter().filter(|&&h| h).count();
    assert!(
        global * 100 >= trials * 95,
        "SCA matched the global grid optimum on only {global}/{trials} instances"
    );
    println!(
        "ACCEPTANCE 6 PASS: SCA within 1e-4 of the 400^2 grid optimum on \
         {global}/{trials} instances and never above it, {:.1?}",
        start.elapsed()
    );
}

#[test]
fn criterion_07_reduction_identities() {
    let start = std::time::Instant::now();
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for trial in 0..20 {
        let (cs, occ) = random_synth(&mut rng, 7, 5, 3);
        let p_max = rng.gen_range(0.5..3.0);

        // UAV-only weights: the surrogate collapses to plain water-filling.
        let w = Weights::new(1.0, 0.0);
        let sca = icic::sca_solve(&cs, &occ, &w, p_max, &opts, InitMode::Default).unwrap();
        let ego = icic::egoistic(&cs, &occ, &w, p_max, &opts).unwrap();
        assert!(
            (sca.rates.weighted - ego.rates.weighted).abs() <= 1e-9,
            "trial {trial}: uav-only reduction broke"
        );

        // Ground-only weights: no power outside the fully-free RBs and the
        // quiet-network ground rate, bit for bit.
        let w = Weights::new(0.0, 1.0);
        let sca = icic::sca_solve(&cs, &occ, &w, p_max, &opts, InitMode::Default).unwrap();
        let free = occ.fully_free_rbs();
        for (n, &p) in sca.power.p.iter().enumerate() {
            if !free.contains(&n) {
                assert_eq!(p, 0.0, "trial {trial}: power on an occupied RB");
            }
        }
        assert_eq!(
            sca.rates.ground_rate, sca.rates.ground_rate_no_uav,
            "trial {trial}: ground rate not preserved exactly"
        );

        // Single-cluster iterative protocol equals the centralized solver
        // started from the zero anchor.
        let w = Weights::new(rng.gen_range(0.3..2.0), rng.gen_range(0.3..2.0));
        let partition = decentral::assign_heads(vec![(0..7).collect()], &cs);
        let (dec, _) = decentral::run_decentralized(
            &cs,
            &occ,
            &partition,
            &w,
            p_max,
            DecentralMode::Iterative { epsilon: opts.epsilon, max_rounds: opts.max_iters },
            &opts,
        )
        .unwrap();
        let central = icic::sca_solve(&cs, &occ, &w, p_max, &opts, InitMode::Zero).unwrap();
        assert!(
            (dec.rates.weighted - central.rates.weighted).abs() <= 1e-9,
            "trial {trial}: single-cluster equivalence broke"
        );
    }
    println!(
        "ACCEPTANCE 7 PASS: all three reduction identities held on 20 random instances, {:.1?}",
        start.elapsed()
    );
}

#[test]
fn criterion_08_protocol_overhead_bound() {
    let start = std::time::Instant::now();
    let n_cells = 10;
    for m in 1..=10usize {
        for n_rbs in 1..=40usize {
            // Empty network with ample budget: every RB ends up active, so
            // the ledger must hit its exact full-load count.
            let free_f: Vec<f64> = (0..n_rbs).map(|i| 1.0 + 0.01 * i as f64).collect();
            let (cs, occ) = synth_instance(n_cells, n_rbs, &[], &free_f);
            let partition = chunk_partition(n_cells, m, &cs);
            let (sol, ledger) = decentral::run_decentralized(
                &cs,
                &occ,
                &partition,
                &Weights::new(1.0, 1.0),
                50.0 * n_rbs as f64,
                DecentralMode::OneRound,
                &SolverOptions::default(),
            )
            .unwrap();
            assert!(sol.power.p.iter().all(|&p| p > 0.0), "waterfill left an RB idle");
            assert_eq!(
                ledger.total(),
                2 * m * n_rbs + 2 * n_rbs,
                "full-load ledger not exact at M={m}, N={n_rbs}"
            );

            // Loaded variant: arbitrary activity still respects the cap.
            let mut rng = ChaCha8Rng::seed_from_u64((m * 100 + n_rbs) as u64);
            let (cs, occ) = random_synth(&mut rng, n_cells, n_rbs, 3);
            let partition = chunk_partition(n_cells, m, &cs);
            let (_, ledger) = decentral::run_decentralized(
                &cs,
                &occ,
                &partition,
                &Weights::new(1.0, 1.0),
                rng.gen_range(0.1..2.0),
                DecentralMode::OneRound,
                &SolverOptions::default(),
            )
            .unwrap();
            assert!(
                ledger.total() <= 2 * m * n_rbs + 2 * n_rbs,
                "ledger exceeded the cap at M={m}, N={n_rbs}"
            );
        }
    }
    println!(
        "ACCEPTANCE 8 PASS: one-round ledger within 2MN+2N for all (M,N) in 1..=10 x 1..=40, \
         exact at full load, {:.1?}",
        start.elapsed()
    );
}

fn chunk_partition(n_cells: usize, m: usize, channel: &ChannelState) -> ClusterPartition {
    let base = n_cells / m;
    let extra = n_cells % m;
    let mut clusters = Vec::new();
    let mut next = 0;
    for i in 0..m {
        let size = base + usize::from(i < extra);
        clusters.push((next..next + size).collect());
        next += size;
    }
    decentral::assign_heads(clusters, channel)
}

#[test]
fn criterion_09_combinatorial_exactness() {
    let start = std::time::Instant::now();

    // Ring-count identity.
    for t in 0..=8 {
        let grid = uav_icic::topology::build_grid(500.0, t, 25.0);
        assert_eq!(grid.num_cells(), 1 + 3 * t * (t + 1));
    }
    assert_eq!(HexGrid::cell_count_for_tiers(5), 91);

    // Brute-force pair check of the q-tier criterion on every generated
    // occupancy in the scenario batch.
    let batch = scenario_batch(100);
    for (cfg, inst) in &batch {
        for n in 0..inst.occupancy.n_rbs {
            let cells: Vec<usize> = inst.occupancy.occupied_cells(n).iter().copied().collect();
            for (a, &j) in cells.iter().enumerate() {
                for &k in &cells[a + 1..] {
                    assert!(
                        !inst.neighbors.get(j, cfg.ues.q).contains(&k),
                        "seed {}: RB {n} shared within {} rings (cells {j},{k})",
                        cfg.seed,
                        cfg.ues.q
                    );
                }
            }
        }
    }

    // Association rule vs exhaustive enumeration on tiny instances.
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    for _ in 0..30 {
        let n_rbs = rng.gen_range(1..=4);
        let n_cells = rng.gen_range(2..=5);
        let (cs, occ) = random_synth(&mut rng, n_cells, n_rbs, n_cells - 1);
        let w = Weights::new(1.0, 1.0);
        let p: Vec<f64> = (0..n_rbs).map(|_| rng.gen_range(0.0..2.0)).collect();
        let (assoc, _) = icic::optimal_association(&cs, &occ, 0.0).unwrap();
        let q_rule = rates::rate_report(&w, &cs, &occ, &assoc, &p).unwrap().weighted;

        let free: Vec<Vec<usize>> = (0..n_rbs).map(|n| occ.unoccupied_cells(n).collect()).collect();
        let mut combo = vec![0usize; n_rbs];
        let mut best = f64::NEG_INFINITY;
        'outer: loop {
            let cand = icic::Association {
                j_star: combo
                    .iter()
                    .enumerate()
                    .map(|(n, &k)| Some(free[n][k]))
                    .collect(),
            };
            best = best.max(rates::rate_report(&w, &cs, &occ, &cand, &p).unwrap().weighted);
            let mut i = 0;
            loop {
                if i == n_rbs {
                    break 'outer;
                }
                combo[i] += 1;
                if combo[i] < free[i].len() {
                    break;
                }
                combo[i] = 0;
                i += 1;
            }
        }
        assert!(q_rule >= best - 1e-9, "association rule lost to enumeration");
    }

    println!(
        "ACCEPTANCE 9 PASS: ring counts exact for t=0..8; q-tier criterion verified on \
         100 occupancies; association matched enumeration on 30 instances, {:.1?}",
        start.elapsed()
    );
}

#[test]
fn criterion_10_deterministic_reports() {
    let start = std::time::Instant::now();
    let mut cfg = ScenarioConfig::small_random(1010);
    cfg.snapshots = 2;
    cfg.grid.tiers = 1;
    cfg.ues.count = 6;
    cfg.ues.rbs = 4;
    let a = report_json(&run_scenario(&cfg).unwrap());
    let b = report_json(&run_scenario(&cfg).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a.as_bytes(), b.as_bytes(), "reports differ across identical runs");
    println!(
        "ACCEPTANCE 10 PASS: byte-identical JSON reports ({} bytes) across two runs, {:.1?}",
        a.len(),
        start.elapsed()
    );
}
