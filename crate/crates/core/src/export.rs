//! CSV artifacts. Every file starts with `# key: value` metadata lines followed
//! by a fixed header row.

use std::fmt::Display;
use std::io::{self, Write};

use crate::feynman_kac::EstimatorResult;
use crate::model::validate::ValidationReport;
use crate::model::State;
use crate::pide::PIDESolution;
use crate::scalar::Scalar;
use crate::simulate::Trajectory;
use crate::verify::{ComparisonReport, RegularityReport};

/// Ordered `key: value` pairs written ahead of the CSV body.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata(pub Vec<(String, String)>);

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl Display) -> Self {
        self.push(key, value);
        self
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        // keep one line per entry
        let v = value.to_string().replace(['\n', '\r'], " ");
        self.0.push((key.to_string(), v));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for (k, v) in &self.0 {
            writeln!(w, "# {k}: {v}")?;
        }
        Ok(())
    }
}

fn csv_writer<W: Write>(mut w: W, meta: &Metadata, header: &[String]) -> io::Result<csv::Writer<W>> {
    meta.write_to(&mut w)?;
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(header)?;
    Ok(out)
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

fn header(parts: &[&str], z_dims: usize, after_z: &[&str]) -> Vec<String> {
    parts
        .iter()
        .map(|s| s.to_string())
        .chain(numbered("z", z_dims))
        .chain(after_z.iter().map(|s| s.to_string()))
        .collect()
}

/// `time,z_1..z_d,l,xi,event_flag,mark_index,accepted`; event rows carry the
/// post-jump state, `mark_index`/`accepted` are empty on non-event rows.
pub fn write_trajectory<T: Scalar, W: Write>(w: W, traj: &Trajectory<T>, meta: &Metadata) -> io::Result<()> {
    let mut out = csv_writer(
        w,
        meta,
        &header(
            &["time"],
            traj.dim_z,
            &["l", "xi", "event_flag", "mark_index", "accepted"],
        ),
    )?;
    for row in 0..traj.len() {
        let mut rec: Vec<String> = vec![traj.grid_times[row].to_string()];
        rec.extend(traj.z(row).iter().map(|v| v.to_string()));
        rec.push(traj.l_path[row].to_string());
        rec.push(traj.xi_path[row].to_string());
        match traj.row_event[row] {
            Some(k) => {
                let e = &traj.events[k];
                rec.push("1".into());
                rec.push(e.mark.to_string());
                rec.push(u8::from(e.accepted).to_string());
            }
            None => rec.extend(["0".into(), String::new(), String::new()]),
        }
        out.write_record(&rec)?;
    }
    out.flush()
}

/// `estimator_tag,t,z_1..z_d,l,mean,std_error,ci_lo,ci_hi,n_paths,seed`
pub fn write_estimates<T: Scalar, W: Write>(
    w: W,
    rows: &[(T, State<T>, EstimatorResult<T>)],
    meta: &Metadata,
) -> io::Result<()> {
    let d = rows.first().map_or(1, |r| r.1.z.len());
    let mut out = csv_writer(
        w,
        meta,
        &header(
            &["estimator_tag", "t"],
            d,
            &["l", "mean", "std_error", "ci_lo", "ci_hi", "n_paths", "seed"],
        ),
    )?;
    for (t, x, e) in rows {
        let mut rec = vec![e.estimator_tag.as_str().to_string(), t.to_string()];
        rec.extend(x.z.iter().map(|v| v.to_string()));
        rec.extend([
            x.l.to_string(),
            e.mean.to_string(),
            e.std_error.to_string(),
            e.ci95.0.to_string(),
            e.ci95.1.to_string(),
            e.n_paths.to_string(),
            e.seed.to_string(),
        ]);
        out.write_record(&rec)?;
    }
    out.flush()
}

/// Grid, mode and convergence entries for a solution header.
pub fn solution_metadata<T: Scalar>(sol: &PIDESolution<T>) -> Metadata {
    let g = &sol.grid;
    let mut m = Metadata::new()
        .with("mode", sol.mode.as_str())
        .with("theta", sol.theta)
        .with("horizon", g.spec.horizon)
        .with("time_steps", g.spec.time_steps);
    for (k, a) in g.spec.z_axes.iter().enumerate() {
        m.push(
            &format!("z_{}_axis", k + 1),
            format!("[{}, {}] x {}", a.lo, a.hi, a.nodes),
        );
    }
    m.push(
        "l_axis",
        format!("[{}, {}] step {}", g.l_nodes[0], g.l_nodes[g.nl() - 1], g.dl()),
    );
    m.push("l_reported", format!("[{}, {}]", g.spec.l_lo, g.spec.l_hi));
    m.push("jump_cap", g.spec.jump_cap);
    m.push("iterations", sol.iterations);
    m.push("converged", sol.converged);
    m.push(
        "final_delta",
        sol.sup_norm_deltas.last().map_or("-".to_string(), |d| d.to_string()),
    );
    m.push("clamped_destinations", sol.clamped_destinations);
    if let Some(r) = &sol.residual {
        m.push("residual_max", r.max_abs);
        m.push("residual_mean", r.mean_abs);
    }
    m
}

/// `t,z_1[,z_2],l,value` over every node; `meta` is written ahead of the
/// solution's own grid metadata.
pub fn write_solution<T: Scalar, W: Write>(w: W, sol: &PIDESolution<T>, meta: &Metadata) -> io::Result<()> {
    let g = &sol.grid;
    let mut all = meta.clone();
    all.0.extend(solution_metadata(sol).0);
    let mut out = csv_writer(w, &all, &header(&["t"], g.dim(), &["l", "value"]))?;
    let mut z = vec![T::zero(); g.dim()];
    for ti in 0..g.nt() {
        for li in 0..g.nl() {
            for zi in 0..g.nz() {
                g.z_point(zi, &mut z);
                let mut rec = vec![g.times[ti].to_string()];
                rec.extend(z.iter().map(|v| v.to_string()));
                rec.push(g.l_nodes[li].to_string());
                rec.push(sol.value(ti, li, zi).to_string());
                out.write_record(&rec)?;
            }
        }
    }
    out.flush()
}

/// One row per probe.
pub fn write_comparison<T: Scalar, W: Write>(w: W, rep: &ComparisonReport<T>, meta: &Metadata) -> io::Result<()> {
    let d = rep.probes.first().map_or(1, |p| p.probe.state.z.len());
    let mut all = meta.clone();
    all.push("grid_error_budget", rep.grid_error_budget);
    all.push("n_paths", rep.n_paths);
    all.push("mc_dt_max", rep.dt_max);
    all.push("pass", rep.pass);
    let mut out = csv_writer(
        w,
        &all,
        &header(
            &["t"],
            d,
            &[
                "l",
                "pide",
                "physical_mean",
                "physical_std_error",
                "weighted_mean",
                "weighted_std_error",
                "pass_physical",
                "pass_weighted",
                "inconsistency",
            ],
        ),
    )?;
    for p in &rep.probes {
        let mut rec = vec![p.probe.t.to_string()];
        rec.extend(p.probe.state.z.iter().map(|v| v.to_string()));
        rec.extend([
            p.probe.state.l.to_string(),
            p.pide.to_string(),
            p.physical.mean.to_string(),
            p.physical.std_error.to_string(),
            p.weighted.mean.to_string(),
            p.weighted.std_error.to_string(),
            p.pass_physical.to_string(),
            p.pass_weighted.to_string(),
            p.inconsistency.as_str().to_string(),
        ]);
        out.write_record(&rec)?;
    }
    out.flush()
}

/// Human-readable summary of a comparison.
pub fn comparison_summary<T: Scalar>(rep: &ComparisonReport<T>) -> String {
    let mut s = format!(
        "MC vs PIDE: {} ({} probes, {} paths, budget {:.3e})\n",
        if rep.pass { "PASS" } else { "FAIL" },
        rep.probes.len(),
        rep.n_paths,
        rep.grid_error_budget.to_f64_lossy()
    );
    for p in &rep.probes {
        s += &format!(
            "  t={} z={:?} l={}: pide={:.6} physical={:.6}±{:.2e} weighted={:.6}±{:.2e} [{}]\n",
            p.probe.t,
            p.probe.state.z.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>(),
            p.probe.state.l,
            p.pide.to_f64_lossy(),
            p.physical.mean.to_f64_lossy(),
            p.physical.std_error.to_f64_lossy(),
            p.weighted.mean.to_f64_lossy(),
            p.weighted.std_error.to_f64_lossy(),
            if p.pass() { "ok" } else { p.inconsistency.as_str() }
        );
    }
    s += &format!(
        "  worst |PIDE - MC| = {:.3e}, worst |PIDE - MC| / SE = {:.2}\n",
        rep.worst_abs.to_f64_lossy(),
        rep.worst_normalized.to_f64_lossy()
    );
    s
}

/// `level,dz,dl,dt,l_lipschitz,probe,second_z,second_l,first_t`
pub fn write_regularity<T: Scalar, W: Write>(w: W, rep: &RegularityReport<T>, meta: &Metadata) -> io::Result<()> {
    let cols = [
        "level",
        "dz",
        "dl",
        "dt",
        "l_lipschitz",
        "probe",
        "second_z",
        "second_l",
        "first_t",
    ];
    let mut out = csv_writer(w, meta, &cols.map(String::from))?;
    for (k, lv) in rep.levels.iter().enumerate() {
        for p in 0..lv.second_z.len() {
            out.write_record([
                k.to_string(),
                lv.dz.to_string(),
                lv.dl.to_string(),
                lv.dt.to_string(),
                lv.l_lipschitz.to_string(),
                p.to_string(),
                lv.second_z[p].to_string(),
                lv.second_l[p].to_string(),
                lv.first_t[p].to_string(),
            ])?;
        }
    }
    out.flush()
}

/// `check,status,worst,t,z,l,mark,message`; sampled Lipschitz constants go to
/// the metadata block.
pub fn write_validation<W: Write>(w: W, rep: &ValidationReport, meta: &Metadata) -> io::Result<()> {
    let mut all = meta.clone();
    let lip = &rep.sampled_lipschitz;
    for (k, v) in [
        ("lipschitz_drift", lip.drift),
        ("lipschitz_dispersion", lip.dispersion),
        ("lipschitz_jump_z", lip.jump_z),
        ("lipschitz_jump_l", lip.jump_l),
        ("lipschitz_nu", lip.nu),
        ("lipschitz_discount", lip.discount),
        ("lipschitz_running_cost", lip.running_cost),
        ("lipschitz_terminal", lip.terminal),
        ("ellipticity_estimate", rep.ellipticity_estimate),
        ("max_nu", rep.max_nu),
    ] {
        all.push(k, v);
    }
    all.push("estimated_rho", format!("{:?}", rep.estimated_rho));
    all.push("n_samples", rep.n_samples);
    all.push("validation_seed", rep.seed);
    let cols = ["check", "status", "worst", "t", "z", "l", "mark", "message"];
    let mut out = csv_writer(w, &all, &cols.map(String::from))?;
    for c in &rep.checks {
        let (t, z, l, mark) = match &c.location {
            Some(p) => (
                p.t.to_string(),
                p.z.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
                p.l.to_string(),
                p.mark.map_or(String::new(), |m| m.to_string()),
            ),
            None => Default::default(),
        };
        out.write_record([
            c.id.to_string(),
            c.status.to_string(),
            c.worst.to_string(),
            t,
            z,
            l,
            mark,
            c.message.clone(),
        ])?;
    }
    out.flush()
}
