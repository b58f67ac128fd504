//! The acceptance suite at desk scale on the `cox` catalog model.
//!
//! Everything printed is a function of (seed, n_paths), so the table is
//! reproducible run to run.

use rayon::prelude::*;

use markov_pide::feynman_kac::{bayes_consistency, estimate_v_physical, expect_terminal, McPlan};
use markov_pide::model::catalog::{
    build_catalog_model, constant_cox, with_catalog_payoff, ModelParams, Payoff, TerminalKind,
};
use markov_pide::model::{ModelSpec, State};
use markov_pide::pide::{residual_order, solve_pide_fixed_point, solve_pide_imex, Axis, GridSpec, PIDESolution};
use markov_pide::simulate::{simulate_physical_path, simulate_reference_path, MeasureTag, PathSeed};
use markov_pide::verify::{compare_mc_pide, regularity_probe, Probe};
use markov_pide::Result;

pub struct Row {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

type Check = fn(&Suite) -> Result<(bool, String)>;

struct Suite {
    seed: u64,
    n: usize,
}

fn payoff(discount: f64, running: f64, terminal: TerminalKind) -> Payoff {
    Payoff {
        discount,
        running,
        running_level: 0.0,
        terminal,
    }
}

/// λ(z) = 1 + 1/(1 + z²) under λ̄ = 2.
fn cox(p: Payoff) -> ModelSpec<f64> {
    let m = build_catalog_model(
        "cox",
        &ModelParams::new()
            .with("lambda0", 1.0)
            .with("lambda_bump", 1.0)
            .with("lambda_bar", 2.0),
    )
    .expect("fixed parameters");
    with_catalog_payoff(&m, p)
}

fn probes(points: &[(f64, f64, f64)]) -> Vec<Probe<f64>> {
    points.iter().map(|&(t, z, l)| Probe::new(t, vec![z], l)).collect()
}

impl Suite {
    fn girsanov_bound(&self) -> Result<(bool, String)> {
        let m = cox(payoff(0.2, 0.3, TerminalKind::LevelPlusCos));
        let lt = m.lambda_tilde();
        let x0 = State::scalar(0.0, 0.0);
        let worst = (0..self.n as u64)
            .into_par_iter()
            .map(|i| {
                let tr = simulate_reference_path(&m, 0.0, &x0, 1.0, 0.01, PathSeed::new(self.seed, i))?;
                Ok(tr
                    .grid_times
                    .iter()
                    .zip(&tr.xi_path)
                    .map(|(&t, &xi)| xi - (lt * t).exp())
                    .fold(f64::NEG_INFINITY, f64::max))
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        Ok((worst <= 1e-12, format!("max xi_t - e^(λ̃t) = {worst:.3e}")))
    }

    fn martingale(&self) -> Result<(bool, String)> {
        let m = cox(payoff(0.0, 0.0, TerminalKind::Level));
        let plan = McPlan::new(1.0, self.n, 0.0025, self.seed + 1);
        let r = expect_terminal(
            &m,
            MeasureTag::Reference,
            0.0,
            &State::scalar(0.0, 0.0),
            &plan,
            |_, _| 1.0,
        )?;
        let k = (r.mean - 1.0).abs() / r.std_error;
        Ok((
            k <= 3.0,
            format!("E[xi_T] = {:.5} ± {:.5} ({k:.2} SE)", r.mean, r.std_error),
        ))
    }

    fn bayes(&self) -> Result<(bool, String)> {
        let m = cox(payoff(0.2, 0.3, TerminalKind::LevelPlusCos));
        let plan = McPlan::new(1.0, self.n, 0.0025, 0);
        let mut ok = 0;
        let points = [(0.0, 0.0, 0.0), (0.3, -0.5, 2.0), (0.8, 0.3, 3.0)];
        for (i, &(t, z, l)) in points.iter().enumerate() {
            let s = self.seed + 10 + 2 * i as u64;
            ok += usize::from(bayes_consistency(&m, t, &State::scalar(z, l), &plan, (s, s + 1))?.pass);
        }
        Ok((
            ok == points.len(),
            format!("{ok}/{} probes with overlapping CIs", points.len()),
        ))
    }

    fn poisson_oracle(&self, c0: f64) -> Result<(bool, String)> {
        let m = with_catalog_payoff(&constant_cox::<f64>(2.0, 2.0)?, payoff(c0, 0.0, TerminalKind::Level));
        let spec =
            GridSpec::new(1.0, 1000, vec![Axis::with_spacing(-1.0, 1.0, 0.02)], (0.0, 10.0), 1.0).with_jump_cap(16);
        let sol = solve_pide_fixed_point(&m, &spec, 1e-10, 80, 0.5)?;
        let exact = (-c0).exp() * 7.0;
        let pide = sol.value_at(0.0, &[0.0], 5.0)?;
        let mc = estimate_v_physical(
            &m,
            0.0,
            &State::scalar(0.0, 5.0),
            &McPlan::new(1.0, self.n, 0.01, self.seed + 20),
        )?;
        let k = (mc.mean - exact) / mc.std_error;
        Ok((
            (pide - exact).abs() <= 1e-3 && k.abs() <= 3.0,
            format!("exact {exact:.5}: PIDE error {:.1e}, MC {k:+.2} SE", pide - exact),
        ))
    }

    fn cross_validation(&self) -> Result<(bool, String)> {
        let m = cox(payoff(0.2, 0.3, TerminalKind::LevelPlusCos));
        let spec =
            GridSpec::new(1.0, 1000, vec![Axis::with_spacing(-4.0, 4.0, 0.05)], (0.0, 4.0), 1.0).with_jump_cap(12);
        let sol = solve_pide_fixed_point(&m, &spec, 1e-10, 60, 0.5)?;
        let pts = probes(&[(0.0, 0.0, 0.0), (0.0, 1.0, 2.0), (0.5, -1.0, 1.0)]);
        let rep = compare_mc_pide(&m, &sol, &pts, self.n, self.seed + 30, None)?;
        Ok((
            rep.pass,
            format!(
                "worst |PIDE - MC| {:.4} ({:.2} SE), budget {:.3}",
                rep.worst_abs, rep.worst_normalized, rep.grid_error_budget
            ),
        ))
    }

    fn fixed_point(&self) -> Result<(bool, String)> {
        let m = cox(payoff(0.2, 0.3, TerminalKind::LevelPlusCos));
        let spec = |steps| {
            GridSpec::new(1.0, steps, vec![Axis::with_spacing(-4.0, 4.0, 0.1)], (0.0, 4.0), 1.0).with_jump_cap(8)
        };
        let fp = solve_pide_fixed_point(&m, &spec(100), 1e-8, 60, 1.0)?;
        let monotone = fp.sup_norm_deltas.windows(2).skip(1).all(|w| w[1] <= w[0]);
        let gap = |a: &PIDESolution<f64>, b: &PIDESolution<f64>| {
            a.values
                .iter()
                .zip(&b.values)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        let g1 = gap(&fp, &solve_pide_imex(&m, &spec(100), 1.0)?);
        let fp2 = solve_pide_fixed_point(&m, &spec(200), 1e-8, 60, 1.0)?;
        let g2 = gap(&fp2, &solve_pide_imex(&m, &spec(200), 1.0)?);
        let order = (g1 / g2).log2();
        Ok((
            fp.converged && fp2.converged && monotone && order >= 0.9,
            format!(
                "{} iterations, deltas {}monotone, fixed point vs IMEX order {order:.2}",
                fp.iterations,
                if monotone { "" } else { "not " }
            ),
        ))
    }

    fn residual(&self) -> Result<(bool, String)> {
        let m = cox(payoff(0.0, 0.0, TerminalKind::LevelPlusCos));
        let spec = |steps, dz| {
            GridSpec::new(0.5, steps, vec![Axis::with_spacing(-4.0, 4.0, dz)], (0.0, 2.0), 1.0).with_jump_cap(8)
        };
        let res = |s, theta| -> Result<_> {
            Ok(solve_pide_fixed_point(&m, &s, 1e-11, 60, theta)?
                .residual
                .expect("solver computes the residual"))
        };
        let t_order = residual_order(&res(spec(100, 0.01), 1.0)?, &res(spec(200, 0.01), 1.0)?, 2.0);
        let z_order = residual_order(&res(spec(500, 0.2), 0.5)?, &res(spec(500, 0.1), 0.5)?, 2.0);
        Ok((
            t_order >= 0.9 && z_order >= 1.8,
            format!("order {t_order:.3} in Δt, {z_order:.3} in Δz"),
        ))
    }

    fn regularity(&self) -> Result<(bool, String)> {
        let m = cox(payoff(0.0, 0.0, TerminalKind::AbsLevel(2.0)));
        let sols = (0..3)
            .map(|k| {
                let r = 1usize << k;
                let spec = GridSpec::new(
                    0.5,
                    50 * r,
                    vec![Axis::new(-4.0, 4.0, 40 * r + 1)],
                    (0.0, 4.0),
                    0.5 / r as f64,
                )
                .with_jump_cap(8);
                solve_pide_fixed_point(&m, &spec, 1e-11, 60, 1.0)
            })
            .collect::<Result<Vec<_>>>()?;
        let rep = regularity_probe(&sols, &probes(&[(0.0, 0.0, 2.0), (0.0, 0.4, 1.0), (0.2, -0.6, 2.0)]))?;
        Ok((
            rep.l_lipschitz_stable(0.05) && rep.second_z_converges(2.0, 1e-12),
            format!(
                "l-Lipschitz {:.4} → {:.4}, z'' Cauchy gaps {:.2e} → {:.2e}",
                rep.levels[0].l_lipschitz, rep.levels[2].l_lipschitz, rep.second_z_cauchy[0], rep.second_z_cauchy[1]
            ),
        ))
    }

    fn coupling(&self) -> Result<(bool, String)> {
        let m: ModelSpec<f64> = constant_cox(2.0, 2.0)?;
        let x0 = State::scalar(0.0, 0.0);
        let mut differ = 0;
        let paths = 1000u64;
        for i in 0..paths {
            let seed = PathSeed::new(self.seed, i);
            let r = simulate_reference_path(&m, 0.0, &x0, 1.0, 0.01, seed)?;
            let p = simulate_physical_path(&m, 0.0, &x0, 1.0, 0.01, seed)?;
            let same = r.grid_times == p.grid_times
                && r.z_path == p.z_path
                && r.l_path == p.l_path
                && r.xi_path.iter().chain(&p.xi_path).all(|&x| x == 1.0);
            differ += u64::from(!same);
        }
        Ok((differ == 0, format!("{differ}/{paths} path pairs differ")))
    }
}

/// Runs the suite; one row per criterion.
pub fn run(seed: u64, n_paths: usize) -> Vec<Row> {
    let s = Suite { seed, n: n_paths };
    let checks: [(&'static str, Check); 10] = [
        ("girsanov bound", Suite::girsanov_bound),
        ("martingale normalization", Suite::martingale),
        ("estimator equivalence", Suite::bayes),
        ("closed-form oracle", |s| s.poisson_oracle(0.0)),
        ("discounted oracle", |s| s.poisson_oracle(0.5)),
        ("mc/pide cross-validation", Suite::cross_validation),
        ("fixed-point behaviour", Suite::fixed_point),
        ("residual convergence", Suite::residual),
        ("regularity asymmetry", Suite::regularity),
        ("coupling identity", Suite::coupling),
    ];
    checks
        .iter()
        .map(|(name, f)| {
            let (pass, detail) = f(&s).unwrap_or_else(|e| (false, format!("error: {e}")));
            Row { name, pass, detail }
        })
        .collect()
}

pub fn table(rows: &[Row]) -> String {
    let mut s = String::new();
    for (i, r) in rows.iter().enumerate() {
        s += &format!(
            "{:>2}  {:<26} {}  {}\n",
            i + 1,
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    s += &format!("{passed}/{} passed\n", rows.len());
    s
}
