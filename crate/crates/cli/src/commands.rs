use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use markov_pide::export::{
    comparison_summary, solution_metadata, write_comparison, write_estimates, write_regularity, write_solution,
    write_trajectory, write_validation, Metadata,
};
use markov_pide::feynman_kac::{bayes_consistency, McPlan};
use markov_pide::model::validate::validate_assumptions;
use markov_pide::model::ModelSpec;
use markov_pide::pide::{solve_pide_fixed_point, solve_pide_imex, GridSpec, PIDESolution};
use markov_pide::simulate::{simulate_physical_path, simulate_reference_path, PathSeed};
use markov_pide::verify::{compare_mc_pide, regularity_probe};

use crate::config::{Mode, RunConfig};
use crate::Failure;

/// Output directory plus the metadata every artifact starts with.
pub struct Artifacts {
    dir: PathBuf,
    base: Metadata,
}

impl Artifacts {
    /// Creates the output directory up front so that a bad path fails before
    /// any computation.
    pub fn prepare(cfg: &RunConfig, command: &str) -> Result<Self, Failure> {
        fs::create_dir_all(&cfg.output)
            .map_err(|e| Failure::Config(format!("field `output`: cannot create {}: {e}", cfg.output.display())))?;
        let base = Metadata::new()
            .with("generator", concat!("markov-pide ", env!("CARGO_PKG_VERSION")))
            .with("command", command)
            .with("config_sha256", cfg.hash())
            .with("seed", cfg.seed)
            .with("model", &cfg.model.name);
        Ok(Self {
            dir: cfg.output.clone(),
            base,
        })
    }

    pub fn meta(&self) -> Metadata {
        self.base.clone()
    }

    pub fn write(
        &self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<PathBuf, Failure> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        Ok(path)
    }
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

pub fn validate(cfg: &RunConfig) -> Result<(), Failure> {
    let model = cfg.model()?;
    let out = Artifacts::prepare(cfg, "validate")?;
    let rep = validate_assumptions(&model, &cfg.sampling_box(), cfg.validate.samples, cfg.seed)?;
    for c in &rep.checks {
        println!(
            "{:<12} {:<4} worst {:>12.4e}  {}",
            c.id.to_string(),
            c.status.to_string(),
            c.worst,
            c.message
        );
    }
    println!("overall: {}", rep.worst_status());
    announce(&out.write("validation.csv", |w| write_validation(w, &rep, &out.meta()))?);
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<(), Failure> {
    let model = cfg.model()?;
    let out = Artifacts::prepare(cfg, "simulate")?;
    let x0 = cfg.initial_state();
    let (t0, horizon, dt) = (cfg.initial.t0, cfg.horizon, cfg.simulation.dt_max);
    for i in 0..cfg.simulation.trajectories {
        let seed = PathSeed::new(cfg.seed, i as u64);
        let reference = simulate_reference_path(&model, t0, &x0, horizon, dt, seed)?;
        let physical = simulate_physical_path(&model, t0, &x0, horizon, dt, seed)?;
        for (tag, tr) in [("reference", &reference), ("physical", &physical)] {
            let meta = out
                .meta()
                .with("measure", tag)
                .with("path_index", i)
                .with("dt_max", dt)
                .with("accepted_events", tr.accepted_events())
                .with("final_xi", tr.xi_path[tr.len() - 1]);
            announce(&out.write(&format!("{tag}_{i}.csv"), |w| write_trajectory(w, tr, &meta))?);
        }
    }
    Ok(())
}

pub fn estimate(cfg: &RunConfig) -> Result<(), Failure> {
    let model = cfg.model()?;
    let out = Artifacts::prepare(cfg, "estimate")?;
    let plan = McPlan::new(cfg.horizon, cfg.simulation.n_paths, cfg.simulation.dt_max, cfg.seed);
    let mut rows = Vec::new();
    let mut consistent = true;
    for p in cfg.probes() {
        let rep = bayes_consistency(&model, p.t, &p.state, &plan, (cfg.seed, cfg.seed.wrapping_add(1)))?;
        consistent &= rep.pass;
        for e in rep.estimates() {
            println!(
                "t={} z={:?} l={} {:<17} {:.6} ± {:.2e}",
                p.t,
                p.state.z,
                p.state.l,
                e.estimator_tag.as_str(),
                e.mean,
                e.std_error
            );
            rows.push((p.t, p.state.clone(), e.clone()));
        }
    }
    println!("pairwise 95% CI overlap: {}", if consistent { "yes" } else { "no" });
    let meta = out
        .meta()
        .with("dt_max", cfg.simulation.dt_max)
        .with("weighted_seed", cfg.seed.wrapping_add(1))
        .with("ci_overlap", consistent);
    announce(&out.write("estimates.csv", |w| write_estimates(w, &rows, &meta))?);
    Ok(())
}

fn run_solver(cfg: &RunConfig, model: &ModelSpec<f64>, spec: &GridSpec<f64>) -> Result<PIDESolution<f64>, Failure> {
    let s = &cfg.solver;
    Ok(match s.mode {
        Mode::FixedPoint => solve_pide_fixed_point(model, spec, s.tol, s.max_iter, s.theta)?,
        Mode::Imex => solve_pide_imex(model, spec, s.theta)?,
    })
}

fn describe(sol: &PIDESolution<f64>) {
    print!(
        "{} (theta {}): {} iteration(s)",
        sol.mode.as_str(),
        sol.theta,
        sol.iterations
    );
    if let Some(d) = sol.sup_norm_deltas.last() {
        print!(", last delta {d:.3e}");
    }
    if let Some(r) = &sol.residual {
        print!(", residual max {:.3e}", r.max_abs);
    }
    println!(", clamped jump targets {}", sol.clamped_destinations);
}

fn not_converged(cfg: &RunConfig, sol: &PIDESolution<f64>) -> Option<Failure> {
    (!sol.converged).then(|| {
        Failure::Compute(format!(
            "fixed point did not reach tol {:e} in {} iterations",
            cfg.solver.tol, cfg.solver.max_iter
        ))
    })
}

pub fn solve(cfg: &RunConfig) -> Result<(), Failure> {
    let model = cfg.model()?;
    let spec = cfg.grid_spec()?;
    let out = Artifacts::prepare(cfg, "solve")?;
    let sol = run_solver(cfg, &model, &spec)?;
    describe(&sol);
    let mut meta = out.meta();
    meta.0.extend(solution_metadata(&sol).0);
    announce(&out.write("solution.csv", |w| write_solution(w, &sol, &meta))?);
    not_converged(cfg, &sol).map_or(Ok(()), Err)
}

pub fn compare(cfg: &RunConfig) -> Result<(), Failure> {
    let model = cfg.model()?;
    let spec = cfg.grid_spec()?;
    let probes = cfg.probes();
    let out = Artifacts::prepare(cfg, "compare")?;
    let sol = run_solver(cfg, &model, &spec)?;
    describe(&sol);
    if let Some(f) = not_converged(cfg, &sol) {
        return Err(f);
    }
    let rep = compare_mc_pide(
        &model,
        &sol,
        &probes,
        cfg.simulation.n_paths,
        cfg.seed,
        cfg.compare.budget,
    )?;
    let summary = comparison_summary(&rep);
    print!("{summary}");
    announce(&out.write("comparison.csv", |w| write_comparison(w, &rep, &out.meta()))?);
    announce(&out.write("comparison.txt", |w| w.write_all(summary.as_bytes()))?);

    if cfg.compare.regularity {
        let mut sols = vec![sol];
        for r in [2usize, 4] {
            let mut s = spec.refine_z(r).refine_t(r);
            s.dl = spec.dl / r as f64;
            sols.push(run_solver(cfg, &model, &s)?);
        }
        let reg = regularity_probe(&sols, &probes)?;
        println!(
            "regularity: l-Lipschitz {:?}, second z-difference Cauchy gaps {:?}",
            reg.levels.iter().map(|l| l.l_lipschitz).collect::<Vec<_>>(),
            reg.second_z_cauchy
        );
        announce(&out.write("regularity.csv", |w| write_regularity(w, &reg, &out.meta()))?);
    }
    if rep.pass {
        Ok(())
    } else if rep.girsanov_flagged() {
        Err(Failure::Check(
            "MC and PIDE disagree; physical and weighted estimators also disagree (Girsanov)".into(),
        ))
    } else {
        Err(Failure::Check("MC and PIDE disagree beyond 3 SE + grid budget".into()))
    }
}
