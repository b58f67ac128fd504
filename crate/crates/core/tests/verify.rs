use markov_pide::model::catalog::{
    build_catalog_model, constant_cox, with_catalog_payoff, ModelParams, Payoff, TerminalKind,
};
use markov_pide::model::generator::{ConstantFn, CoordinateFn, LevelFn};
use markov_pide::model::{MarkMeasure, ModelSpec, State};
use markov_pide::pide::{solve_pide_fixed_point, solve_pide_imex, Axis, GridSpec};
use markov_pide::verify::*;
use markov_pide::Error;

fn payoff(discount: f64, terminal: TerminalKind) -> Payoff {
    Payoff {
        discount,
        running: 0.0,
        running_level: 0.0,
        terminal,
    }
}

fn ou(sigma: f64, payoff_kind: &str) -> ModelSpec<f64> {
    build_catalog_model(
        "ou_modulated_cox",
        &ModelParams::new()
            .with("lambda0", 0.5)
            .with("lambda_bump", 1.5)
            .with("lambda_bar", 2.0)
            .with("kappa", 1.0)
            .with("theta", 0.0)
            .with("sigma", sigma)
            .with("payoff", payoff_kind)
            .with("discount", 0.1)
            .with("running", 0.2),
    )
    .unwrap()
}

fn probes(points: &[(f64, f64, f64)]) -> Vec<Probe<f64>> {
    points.iter().map(|&(t, z, l)| Probe::new(t, vec![z], l)).collect()
}

#[test]
fn poisson_level_comparison_passes() {
    let m: ModelSpec<f64> = constant_cox(2.0, 2.0).unwrap();
    let spec = GridSpec::new(1.0, 200, vec![Axis::with_spacing(-1.0, 1.0, 0.05)], (0.0, 6.0), 1.0).with_jump_cap(16);
    let sol = solve_pide_fixed_point(&m, &spec, 1e-10, 80, 0.5).unwrap();
    let pts = probes(&[(0.0, 0.0, 0.0), (0.5, 0.2, 3.0), (0.9, -0.3, 6.0)]);
    let rep = compare_mc_pide(&m, &sol, &pts, 20_000, 3, None).unwrap();
    assert!(rep.pass, "{rep:#?}");
    assert!(!rep.girsanov_flagged());
    for p in &rep.probes {
        let exact = p.probe.state.l + 2.0 * (1.0 - p.probe.t);
        assert!((p.pide - exact).abs() < 1e-9);
        assert!((p.physical.mean - exact).abs() <= 4.0 * p.physical.std_error);
    }
}

#[test]
fn unit_density_routes_coincide() {
    // lambda == lambda_bar: nu = 1, so both estimators see the same paths
    let m = with_catalog_payoff(
        &constant_cox::<f64>(1.5, 1.5).unwrap(),
        payoff(0.3, TerminalKind::LevelPlusCos),
    );
    let spec = GridSpec::new(1.0, 100, vec![Axis::with_spacing(-4.0, 4.0, 0.05)], (0.0, 2.0), 1.0).with_jump_cap(12);
    let sol = solve_pide_imex(&m, &spec, 0.5).unwrap();
    let rep = compare_mc_pide(&m, &sol, &probes(&[(0.0, 0.0, 1.0), (0.5, 1.0, 2.0)]), 5_000, 9, None).unwrap();
    for p in &rep.probes {
        assert_eq!(p.physical.mean, p.weighted.mean);
        assert_eq!(p.physical.std_error, p.weighted.std_error);
    }
    assert!(rep.pass, "{rep:#?}");
}

#[test]
fn coarse_grid_is_detected() {
    // First-order upwind error is ≈ 0.1·Δz here. With a tight budget the
    // Δz = 0.05 grid passes and the Δz × 4 grid does not.
    let m = ou(0.5, "level_plus_cos");
    let fine = GridSpec::new(1.0, 500, vec![Axis::with_spacing(-4.0, 4.0, 0.05)], (0.0, 3.0), 1.0).with_jump_cap(12);
    let coarse = GridSpec::new(1.0, 500, vec![Axis::with_spacing(-4.0, 4.0, 0.2)], (0.0, 3.0), 1.0).with_jump_cap(12);
    let pts = probes(&[(0.0, 1.0, 2.0), (0.0, 0.0, 0.0)]);
    let budget = Some(0.003);
    let good = compare_mc_pide(&m, &solve_pide_imex(&m, &fine, 0.5).unwrap(), &pts, 100_000, 11, budget).unwrap();
    let bad = compare_mc_pide(
        &m,
        &solve_pide_imex(&m, &coarse, 0.5).unwrap(),
        &pts,
        100_000,
        11,
        budget,
    )
    .unwrap();
    assert!(good.pass, "{good:#?}");
    assert!(!bad.pass, "{bad:#?}");
    assert!(bad.probes.iter().any(|p| p.inconsistency == Inconsistency::Grid));
    assert!(bad.worst_abs > good.worst_abs);
}

#[test]
fn off_grid_probe_rejected() {
    let m: ModelSpec<f64> = constant_cox(2.0, 2.0).unwrap();
    let spec = GridSpec::new(1.0, 20, vec![Axis::with_spacing(-1.0, 1.0, 0.1)], (0.0, 4.0), 1.0);
    let sol = solve_pide_imex(&m, &spec, 0.5).unwrap();
    for pts in [
        probes(&[(0.0, 0.05, 1.0)]),
        probes(&[(0.0, 0.0, 1.5)]),
        probes(&[(0.0, -0.9, 1.0)]),
        probes(&[(1.0, 0.0, 1.0)]),
    ] {
        assert!(matches!(
            compare_mc_pide(&m, &sol, &pts, 100, 0, None),
            Err(Error::ProbeOffGrid { .. })
        ));
    }
}

#[test]
fn default_budget_is_ten_horizon_residual() {
    let m = ou(0.5, "level_plus_cos");
    let spec = GridSpec::new(0.5, 50, vec![Axis::with_spacing(-4.0, 4.0, 0.1)], (0.0, 2.0), 1.0).with_jump_cap(8);
    let sol = solve_pide_imex(&m, &spec, 0.5).unwrap();
    let b = default_grid_error_budget(&sol, &m).unwrap();
    assert_eq!(b, 10.0 * 0.5 * sol.residual.unwrap().max_abs);
}

#[test]
fn boundary_influence_small_under_doubling() {
    let m = ou(0.5, "level_plus_cos");
    let spec = GridSpec::new(1.0, 100, vec![Axis::with_spacing(-4.0, 4.0, 0.1)], (0.0, 2.0), 1.0).with_jump_cap(8);
    let gap = domain_doubling_gap(&m, &spec, 0.5).unwrap();
    assert!(gap < 1e-6, "{gap}");
}

fn heat_model() -> ModelSpec<f64> {
    ModelSpec::builder(1, MarkMeasure::point(0.0, 1.0).unwrap())
        .dispersion(|_, _, _, out| out[0] = 2f64.sqrt())
        .nu_density(|_, _, _, _| 0.0)
        .terminal(|z, _| z[0] * z[0])
        .build()
        .unwrap()
}

fn ladder(
    m: &ModelSpec<f64>,
    half_width: f64,
    base_nodes: usize,
    dl: f64,
    steps: usize,
) -> Vec<markov_pide::pide::PIDESolution<f64>> {
    (0..3)
        .map(|k| {
            let r = 1usize << k;
            let spec = GridSpec::new(
                0.5,
                steps * r,
                vec![Axis::new(-half_width, half_width, (base_nodes - 1) * r + 1)],
                (0.0, 4.0),
                dl / r as f64,
            )
            .with_jump_cap(8);
            solve_pide_fixed_point(m, &spec, 1e-11, 60, 1.0).unwrap()
        })
        .collect()
}

#[test]
fn heat_ladder_second_difference_is_two() {
    let sols = ladder(&heat_model(), 10.0, 101, 1.0, 20);
    let rep = regularity_probe(&sols, &probes(&[(0.0, 0.0, 1.0), (0.25, 0.6, 2.0)])).unwrap();
    for level in &rep.levels {
        for v in &level.second_z {
            assert!((v - 2.0).abs() < 1e-9, "{v}");
        }
        for v in &level.first_t {
            assert!((v + 2.0).abs() < 1e-9, "{v}");
        }
    }
    assert!(rep.second_z_cauchy.iter().all(|c| *c < 1e-9));
}

#[test]
fn constant_terminal_ladder_is_flat() {
    let m = with_catalog_payoff(
        &constant_cox::<f64>(1.0, 2.0).unwrap(),
        payoff(0.0, TerminalKind::Constant(3.0)),
    );
    let sols = ladder(&m, 4.0, 21, 0.5, 10);
    let rep = regularity_probe(&sols, &probes(&[(0.0, 0.0, 2.0)])).unwrap();
    for level in &rep.levels {
        assert!(level.l_lipschitz < 1e-12);
        assert!(level
            .second_z
            .iter()
            .chain(&level.second_l)
            .chain(&level.first_t)
            .all(|v| v.abs() < 1e-9));
    }
}

#[test]
fn kinked_terminal_shows_l_z_asymmetry() {
    let m = with_catalog_payoff(
        &build_catalog_model::<f64>(
            "cox",
            &ModelParams::new()
                .with("lambda0", 1.0)
                .with("lambda_bump", 1.0)
                .with("lambda_bar", 2.0),
        )
        .unwrap(),
        payoff(0.0, TerminalKind::AbsLevel(2.0)),
    );
    let sols = ladder(&m, 4.0, 41, 0.5, 50);
    let rep = regularity_probe(&sols, &probes(&[(0.0, 0.0, 2.0), (0.0, 0.4, 1.0), (0.2, -0.6, 2.0)])).unwrap();
    assert!(rep.l_lipschitz_stable(0.05), "{:?}", rep.l_lipschitz_ratios);
    assert!(rep.levels.iter().all(|l| l.l_lipschitz <= 1.0 + 1e-9));
    assert!(rep.second_z_converges(2.0, 1e-12), "{:?}", rep.second_z_cauchy);
    assert!(rep.second_l_diverges(1.5), "{:?}", rep.second_l_max);
    assert!(rep.first_t_cauchy[1] < rep.first_t_cauchy[0]);
}

#[test]
fn ladder_needs_three_grids() {
    let sols = ladder(&heat_model(), 4.0, 21, 1.0, 10);
    assert!(regularity_probe(&sols[..2], &probes(&[(0.0, 0.0, 1.0)])).is_err());
}

#[test]
fn dynkin_constant() {
    let m = ou(0.5, "level");
    let r = generator_dynkin_check(
        &m,
        &ConstantFn { dim: 1, value: 2.0 },
        0.0,
        &State::scalar(0.3, 1.0),
        0.01,
        100,
        0,
        0.0,
    )
    .unwrap();
    assert_eq!(r.mc_rate, 0.0);
    assert_eq!(r.generator, 0.0);
    assert!(r.pass);
}

#[test]
fn dynkin_poisson_level() {
    let m: ModelSpec<f64> = constant_cox(2.0, 2.0).unwrap();
    let r = generator_dynkin_check(
        &m,
        &LevelFn { dim: 1 },
        0.0,
        &State::scalar(0.0, 0.0),
        0.01,
        1_000_000,
        5,
        0.0,
    )
    .unwrap();
    assert_eq!(r.generator, 2.0);
    assert!(r.pass, "{r:?}");
}

#[test]
fn dynkin_ou_drift() {
    let m = ou(0.5, "level");
    let z = 0.8;
    let r = generator_dynkin_check(
        &m,
        &CoordinateFn { dim: 1, index: 0 },
        0.0,
        &State::scalar(z, 0.0),
        0.01,
        1_000_000,
        6,
        z, // kappa^2 |theta - z|
    )
    .unwrap();
    assert!((r.generator + z).abs() < 1e-15);
    assert!(r.pass, "{r:?}");
}

#[test]
fn dynkin_error_linear_in_h() {
    let m = ou(1e-4, "level");
    let phi = CoordinateFn { dim: 1, index: 0 };
    let x = State::scalar(1.0, 0.0);
    let errs: Vec<f64> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&h| {
            generator_dynkin_check(&m, &phi, 0.0, &x, h, 2_000, 1, 1.0)
                .unwrap()
                .difference
                .abs()
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.8..2.2).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn dynkin_rejects_large_h() {
    let m = ou(0.5, "level");
    assert!(generator_dynkin_check(&m, &LevelFn { dim: 1 }, 0.0, &State::scalar(0.0, 0.0), 0.1, 10, 0, 0.0).is_err());
}
