use fedhdc::convergence::{j_of_d, ConvergenceModel};
use fedhdc::feasibility::init_allocation;
use fedhdc::optimizer::{
    b_min_lambert, bandwidth_step, dim_step, lambert_w, objective, power_of_bandwidth, solve, solve_scheme, time_step,
    transmit_objective, Branch, CandidateKind, DimSubproblemCoeffs, Scheme, SolverConfig,
};
use fedhdc::system_model::{gen_scenario, rate, ScenarioConfig, SystemConfig, UserProfile};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn scenario(seed: u64, users: usize) -> Vec<UserProfile> {
    gen_scenario(seed, &ScenarioConfig { users, ..Default::default() }).unwrap()
}

/// Transmission energy of one user with the rate constraint tight, written
/// out directly.
fn energy_oracle(b: f64, t: f64, g: f64, n0: f64, payload: f64) -> f64 {
    t * n0 * b / g * (2f64.powf(payload / (t * b)) - 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tight_power_delivers_the_payload(
        b in 1e3f64..1e7,
        t in 1e-3f64..1.0,
        g in 1e-13f64..1e-8,
        load in 0.01f64..20.0,
    ) {
        let n0 = 4e-21;
        let d = load * t * b / 10.0;
        let p = power_of_bandwidth(b, t, g, n0, 10, d, 1.0);
        prop_assert!(rel(rate(b, p, g, n0) * t, 10.0 * d) < 1e-10);
        prop_assert!(rel(p * t, energy_oracle(b, t, g, n0, 10.0 * d)) < 1e-9);
    }

    #[test]
    fn b_min_is_superlinear_in_payload(
        t in 0.01f64..1.0,
        g in 1e-11f64..1e-8,
        p_max in 1e-4f64..1e-2,
        payload in 1e3f64..1e5,
    ) {
        let n0 = 4e-21;
        let one = b_min_lambert(t, g, p_max, n0, payload);
        let two = b_min_lambert(t, g, p_max, n0, 2.0 * payload);
        if let (Ok(a), Ok(b)) = (one, two) {
            prop_assert!(b > 2.0 * a);
            prop_assert!(rel(a * (1.0 + p_max * g / (n0 * a)).log2() * t, payload) < 1e-8);
        }
    }
}

#[test]
fn lambert_reference_point() {
    let w = lambert_w(-0.1, Branch::Lower).unwrap();
    assert!((w + 3.577152).abs() < 1e-6);
    assert_eq!(lambert_w(-1.0 / std::f64::consts::E, Branch::Lower).unwrap(), -1.0);
}

#[test]
fn longer_airtime_never_lowers_energy_below_the_tight_time() {
    let us = scenario(3, 5);
    let sys = SystemConfig::default();
    let m = ConvergenceModel::REFERENCE;
    let a = init_allocation(&us, 4000.0, &sys, &m).unwrap();
    let j = j_of_d(&m, 4000.0).unwrap();
    let t = time_step(&us, &a, &sys, j).unwrap();
    for (i, &ti) in t.iter().enumerate() {
        assert!(rel(ti * rate(a.b[i], a.p[i], us[i].g, sys.n0), us[i].payload_bits(4000.0, 1.0)) < 1e-10);
        // with (b, p) held, energy p t grows with t
        for k in [1.001, 1.1, 2.0] {
            assert!(a.p[i] * ti * k > a.p[i] * ti);
        }
    }
}

/// Times twice as long as the full-power ones, so the bandwidth lower bounds
/// leave slack.
fn relaxed_times(us: &[UserProfile], sys: &SystemConfig, d: f64) -> Vec<f64> {
    let a = init_allocation(us, d, sys, &ConvergenceModel::REFERENCE).unwrap();
    a.t.iter().map(|t| 2.0 * t).collect()
}

#[test]
fn bandwidth_step_symmetry_and_single_user() {
    let sys = SystemConfig::default();
    let one = scenario(5, 1);
    let s = bandwidth_step(&one, &relaxed_times(&one, &sys, 4000.0), 4000.0, &sys).unwrap();
    assert!(rel(s.b[0], sys.bandwidth) < 1e-6);

    let twins = vec![one[0].clone(), one[0].clone()];
    let t = relaxed_times(&twins, &sys, 4000.0);
    let s = bandwidth_step(&twins, &t, 4000.0, &sys).unwrap();
    assert!(rel(s.b[0], s.b[1]) < 1e-9);
    assert!(rel(s.b[0], sys.bandwidth / 2.0) < 1e-6);
}

#[test]
fn bandwidth_step_is_a_kkt_point_and_locally_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let us = scenario(rng.gen(), rng.gen_range(2..=15));
        let sys = SystemConfig { bandwidth: rng.gen_range(2e6..2e7), ..Default::default() };
        let d = 4000.0;
        let t = relaxed_times(&us, &sys, d);
        let s = bandwidth_step(&us, &t, d, &sys).unwrap();
        let total: f64 = s.b.iter().sum();
        assert!((total - sys.bandwidth).abs() <= 1e-6 * sys.bandwidth);
        for (i, u) in us.iter().enumerate() {
            assert!(s.p[i] <= u.p_max * (1.0 + 1e-12));
            if s.b[i] > s.b_min[i] * (1.0 + 1e-9) {
                // finite-difference slope of the oracle energy
                let payload = u.payload_bits(d, 1.0);
                let h = 1e-4 * s.b[i];
                let slope = (energy_oracle(s.b[i] + h, t[i], u.g, sys.n0, payload)
                    - energy_oracle(s.b[i] - h, t[i], u.g, sys.n0, payload))
                    / (2.0 * h);
                assert!((slope + s.kkt.lambda).abs() <= 1e-4 * s.kkt.lambda.abs(), "user {i}");
            }
        }
        let base = transmit_objective(&us, &t, d, &sys, &s.b);
        for _ in 0..100 {
            // move mass between two users, respecting the lower bounds
            let (i, k) = (rng.gen_range(0..us.len()), rng.gen_range(0..us.len()));
            if i == k {
                continue;
            }
            let room = s.b[i] - s.b_min[i];
            let step = rng.gen_range(0.0..1.0) * room.min(0.01 * s.b[i]);
            let mut b = s.b.clone();
            b[i] -= step;
            b[k] += step;
            let e = transmit_objective(&us, &t, d, &sys, &b);
            assert!(e >= base * (1.0 - 1e-7), "perturbation improved {base} -> {e}");
        }
    }
}

#[test]
fn dim_step_candidate_is_stationary_or_on_the_boundary() {
    let us = scenario(1, 50);
    let sys = SystemConfig::default();
    let m = ConvergenceModel::REFERENCE;
    let cfg = SolverConfig::default();
    let a = init_allocation(&us, 3000.0, &sys, &m).unwrap();
    let step = dim_step(&us, &a, &sys, &m, &cfg).unwrap();
    assert_eq!(step.d, 4000.0);
    assert!(step.continuous > 3000.0 && step.continuous < 5000.0);
    if step.kind == CandidateKind::Stationary {
        let c = DimSubproblemCoeffs::new(&us, &a, sys.gamma);
        let scale = c.y.iter().sum::<f64>();
        assert!(c.derivative(&m, step.continuous).unwrap().abs() < 1e-6 * scale);
    }
}

#[test]
fn energy_versus_dimension_has_an_interior_dip() {
    let us = scenario(1, 50);
    let sys = SystemConfig::default();
    let m = ConvergenceModel::REFERENCE;
    let cfg = SolverConfig::default();
    let e = |d: f64| solve_scheme(&us, &sys, &m, &cfg, Scheme::FixedDimension { d }).unwrap().energy.total;
    assert!(e(3000.0) > e(4000.0));
    assert!(e(10000.0) > e(5000.0));
}

#[test]
fn optimal_single_point_grid_is_a_fixed_point() {
    let us = scenario(9, 1);
    let sys = SystemConfig::default();
    let m = ConvergenceModel::REFERENCE;
    let cfg = SolverConfig { d_grid: vec![4000.0], ..Default::default() };
    let init = init_allocation(&us, 4000.0, &sys, &m).unwrap();
    let s = solve(&us, &sys, &m, &init, &cfg, Scheme::Proposed).unwrap();
    assert!(s.converged);
    assert_eq!(s.outer_iterations, 1);
    for (a, b) in s.allocation.b.iter().zip(&init.b) {
        assert!(rel(*a, *b) < 1e-9);
    }
    assert!(rel(s.energy.total, objective(&us, &sys, &m, &init).unwrap().total) < 1e-9);
}

#[test]
fn infeasible_init_is_rejected() {
    let us = scenario(9, 3);
    let sys = SystemConfig::default();
    let m = ConvergenceModel::REFERENCE;
    let mut init = init_allocation(&us, 4000.0, &sys, &m).unwrap();
    init.f[1] *= 0.5;
    match solve(&us, &sys, &m, &init, &SolverConfig::default(), Scheme::Proposed) {
        Err(fedhdc::Error::InvalidParameter(msg)) => assert!(msg.contains("user 1:"), "{msg}"),
        other => panic!("expected rejection, got {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn objective_trace_never_rises(seed in any::<u64>(), users in 2usize..20, mhz in 2.0f64..20.0) {
        let us = scenario(seed, users);
        let sys = SystemConfig { bandwidth: mhz * 1e6, ..Default::default() };
        let m = ConvergenceModel::REFERENCE;
        let s = solve_scheme(&us, &sys, &m, &SolverConfig::default(), Scheme::Proposed).unwrap();
        for w in s.trace.windows(2) {
            prop_assert!(w[1].objective <= w[0].objective * (1.0 + 1e-9));
        }
        prop_assert!(fedhdc::optimizer::audit(&us, &sys, &m, &s.allocation).unwrap().is_empty());
    }
}

#[test]
fn full_power_is_a_fixed_point_of_the_inner_steps() {
    // At the initial point every bandwidth equals its own lower bound, so
    // the bandwidth step has a single feasible point.
    let us = scenario(2, 10);
    let sys = SystemConfig::default();
    let m = ConvergenceModel::REFERENCE;
    let a = init_allocation(&us, 4000.0, &sys, &m).unwrap();
    let s = bandwidth_step(&us, &a.t, 4000.0, &sys).unwrap();
    for i in 0..us.len() {
        assert!(rel(s.b_min[i], a.b[i]) < 1e-6);
        assert!(rel(s.b[i], a.b[i]) < 1e-6);
        assert!(rel(s.p[i], us[i].p_max) < 1e-5);
    }
}
