//! Cross-checks between the Monte Carlo and grid routes, discrete regularity
//! probes, and a Dynkin-formula check of the generator.

use crate::error::{Error, Result};
use crate::feynman_kac::{
    estimate_v_physical, estimate_v_weighted, expect_terminal, EstimatorResult, McPlan, WeightForm,
};
use crate::model::generator::{apply_generator, TestFunction};
use crate::model::{ModelSpec, State};
use crate::pide::{pide_residual, solve_pide_imex, GridSpec, PIDESolution};
use crate::scalar::Scalar;
use crate::simulate::MeasureTag;

/// A point `(t, z, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe<T> {
    pub t: T,
    pub state: State<T>,
}

impl<T: Scalar> Probe<T> {
    pub fn new(t: T, z: Vec<T>, l: T) -> Self {
        Self {
            t,
            state: State::new(z, l),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inconsistency {
    None,
    /// Both estimators disagree with the grid.
    Grid,
    /// Exactly one estimator disagrees: the change of measure is suspect.
    Girsanov,
}

impl Inconsistency {
    pub fn as_str(&self) -> &'static str {
        match self {
            Inconsistency::None => "none",
            Inconsistency::Grid => "grid",
            Inconsistency::Girsanov => "girsanov",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeComparison<T> {
    pub probe: Probe<T>,
    pub pide: T,
    pub physical: EstimatorResult<T>,
    pub weighted: EstimatorResult<T>,
    pub pass_physical: bool,
    pub pass_weighted: bool,
    pub inconsistency: Inconsistency,
}

impl<T: Scalar> ProbeComparison<T> {
    pub fn pass(&self) -> bool {
        self.pass_physical && self.pass_weighted
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport<T> {
    pub probes: Vec<ProbeComparison<T>>,
    pub grid_error_budget: T,
    pub n_paths: usize,
    pub seed: u64,
    pub dt_max: T,
    pub worst_abs: T,
    /// Worst `|PIDE - MC| / SE`.
    pub worst_normalized: T,
    pub pass: bool,
}

impl<T: Scalar> ComparisonReport<T> {
    pub fn girsanov_flagged(&self) -> bool {
        self.probes.iter().any(|p| p.inconsistency == Inconsistency::Girsanov)
    }
}

/// `10 · T · max interior residual`: the comparison principle turns a residual
/// bound into an error bound `T · ‖r‖∞`, padded by a factor 10.
pub fn default_grid_error_budget<T: Scalar>(sol: &PIDESolution<T>, model: &ModelSpec<T>) -> Result<T> {
    let r = match sol.residual {
        Some(r) => r,
        None => pide_residual(sol, model)?,
    };
    Ok(T::lit(10.0) * sol.grid.spec.horizon * r.max_abs)
}

/// Runs the physical and the terminal-weighted estimator (same seed) at each
/// probe, which must be an interior grid node, and compares with the grid value.
/// Probe `k` uses seed `seed + k`; the Euler step is the grid's Δt.
pub fn compare_mc_pide<T: Scalar>(
    model: &ModelSpec<T>,
    sol: &PIDESolution<T>,
    probes: &[Probe<T>],
    n_paths: usize,
    seed: u64,
    grid_error_budget: Option<T>,
) -> Result<ComparisonReport<T>> {
    let nodes = probes
        .iter()
        .map(|p| sol.interior_node(p.t, &p.state.z, p.state.l))
        .collect::<Result<Vec<_>>>()?;
    let budget = match grid_error_budget {
        Some(b) => b,
        None => default_grid_error_budget(sol, model)?,
    };
    let dt_max = sol.grid.dt;
    let three = T::lit(3.0);
    let mut out = Vec::with_capacity(probes.len());
    let (mut worst_abs, mut worst_normalized) = (T::zero(), T::zero());
    for (k, (p, &(ti, li, zi))) in probes.iter().zip(&nodes).enumerate() {
        let plan = McPlan::new(sol.grid.spec.horizon, n_paths, dt_max, seed.wrapping_add(k as u64));
        let pide = sol.value(ti, li, zi);
        let physical = estimate_v_physical(model, p.t, &p.state, &plan)?;
        let weighted = estimate_v_weighted(model, p.t, &p.state, T::one(), &plan, WeightForm::Terminal)?;
        let check = |e: &EstimatorResult<T>| (pide - e.mean).abs() <= three * e.std_error + budget;
        let (pass_physical, pass_weighted) = (check(&physical), check(&weighted));
        for e in [&physical, &weighted] {
            let gap = (pide - e.mean).abs();
            worst_abs = worst_abs.max(gap);
            if e.std_error > T::zero() {
                worst_normalized = worst_normalized.max(gap / e.std_error);
            }
        }
        let inconsistency = match (pass_physical, pass_weighted) {
            (true, true) => Inconsistency::None,
            (false, false) => Inconsistency::Grid,
            _ => Inconsistency::Girsanov,
        };
        out.push(ProbeComparison {
            probe: p.clone(),
            pide,
            physical,
            weighted,
            pass_physical,
            pass_weighted,
            inconsistency,
        });
    }
    let pass = out.iter().all(ProbeComparison::pass);
    Ok(ComparisonReport {
        probes: out,
        grid_error_budget: budget,
        n_paths,
        seed,
        dt_max,
        worst_abs,
        worst_normalized,
        pass,
    })
}

/// Largest change of interior values when every z-axis is doubled around its
/// centre at the same spacing (IMEX solves on both boxes).
pub fn domain_doubling_gap<T: Scalar>(model: &ModelSpec<T>, spec: &GridSpec<T>, theta: T) -> Result<T> {
    let base = solve_pide_imex(model, spec, theta)?;
    let wide = solve_pide_imex(model, &spec.double_z_box(), theta)?;
    let g = &base.grid;
    let mut z = vec![T::zero(); g.dim()];
    let mut gap = T::zero();
    for ti in 0..g.nt() {
        for li in g.l_reported.0..=g.l_reported.1 {
            for zi in g.interior_z_indices() {
                g.z_point(zi, &mut z);
                let w = wide.value_at(g.times[ti], &z, g.l_nodes[li])?;
                gap = gap.max((w - base.value(ti, li, zi)).abs());
            }
        }
    }
    Ok(gap)
}

/// Discrete regularity measurements on one ladder grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderLevel<T> {
    pub dz: T,
    pub dl: T,
    pub dt: T,
    /// `max |v(l + Δl) - v(l)| / Δl` over the reported interior.
    pub l_lipschitz: T,
    /// Per probe: `(v(z+h) - 2v + v(z-h)) / h²` along z_1.
    pub second_z: Vec<T>,
    /// Per probe: `(v(l+Δl) - 2v + v(l-Δl)) / Δl²`.
    pub second_l: Vec<T>,
    /// Per probe: `(v(t+Δt) - v(t)) / Δt`.
    pub first_t: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport<T> {
    pub levels: Vec<LadderLevel<T>>,
    /// Max over probes of `|second_z[k+1] - second_z[k]|`, one entry per refinement.
    pub second_z_cauchy: Vec<T>,
    pub first_t_cauchy: Vec<T>,
    pub second_l_max: Vec<T>,
    /// Ratio of successive l-Lipschitz estimates (≈ 1 when stabilized).
    pub l_lipschitz_ratios: Vec<T>,
}

impl<T: Scalar> RegularityReport<T> {
    /// Successive Cauchy differences of the second z-differences shrink by at
    /// least `factor` (differences already below `floor` count as converged).
    pub fn second_z_converges(&self, factor: T, floor: T) -> bool {
        self.second_z_cauchy
            .windows(2)
            .all(|w| w[1] <= floor || w[0] >= factor * w[1])
    }

    /// The l-Lipschitz estimate changes by at most `rel` between grids.
    pub fn l_lipschitz_stable(&self, rel: T) -> bool {
        self.l_lipschitz_ratios.iter().all(|r| (*r - T::one()).abs() <= rel)
    }

    /// Second l-differences grow under refinement at some probe (a kink).
    pub fn second_l_diverges(&self, factor: T) -> bool {
        self.second_l_max.windows(2).all(|w| w[1] >= factor * w[0])
    }
}

/// Measures the ladder `sols` (coarse to fine, ≥ 3 grids, one common
/// refinement ratio in z) at `probes`, which must be interior nodes of every
/// grid with room for the difference stencils.
pub fn regularity_probe<T: Scalar>(sols: &[PIDESolution<T>], probes: &[Probe<T>]) -> Result<RegularityReport<T>> {
    if sols.len() < 3 {
        return Err(Error::InvalidArgument(
            "regularity ladder needs at least 3 grids".into(),
        ));
    }
    let ratios: Vec<T> = sols.windows(2).map(|w| w[0].grid.dz[0] / w[1].grid.dz[0]).collect();
    if ratios.iter().any(|r| (*r - ratios[0]).abs() > T::lit(1e-9) * ratios[0]) {
        return Err(Error::InvalidArgument("ladder refinement ratio is not constant".into()));
    }
    let mut levels = Vec::with_capacity(sols.len());
    for sol in sols {
        let g = &sol.grid;
        let dl = g.dl();
        let mut lip = T::zero();
        let interior = g.interior_z_indices();
        for ti in 0..g.nt() {
            for li in g.l_reported.0..g.l_reported.1 {
                for &zi in &interior {
                    lip = lip.max((sol.value(ti, li + 1, zi) - sol.value(ti, li, zi)).abs() / dl);
                }
            }
        }
        let (mut second_z, mut second_l, mut first_t) = (vec![], vec![], vec![]);
        for p in probes {
            let (ti, li, zi) = sol.interior_node(p.t, &p.state.z, p.state.l)?;
            let v = sol.value(ti, li, zi);
            let h = g.dz[0];
            second_z.push((sol.value(ti, li, zi + 1) - T::lit(2.0) * v + sol.value(ti, li, zi - 1)) / (h * h));
            if li == 0 || li + 1 >= g.nl() {
                return Err(crate::pide::off_grid(p.t, &p.state.z, p.state.l));
            }
            second_l.push((sol.value(ti, li + 1, zi) - T::lit(2.0) * v + sol.value(ti, li - 1, zi)) / (dl * dl));
            first_t.push((sol.value(ti + 1, li, zi) - v) / g.dt);
        }
        levels.push(LadderLevel {
            dz: g.dz[0],
            dl,
            dt: g.dt,
            l_lipschitz: lip,
            second_z,
            second_l,
            first_t,
        });
    }
    let cauchy = |f: fn(&LadderLevel<T>) -> &Vec<T>| -> Vec<T> {
        levels
            .windows(2)
            .map(|w| {
                f(&w[0])
                    .iter()
                    .zip(f(&w[1]))
                    .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
            })
            .collect()
    };
    let second_z_cauchy = cauchy(|l| &l.second_z);
    let first_t_cauchy = cauchy(|l| &l.first_t);
    let second_l_max = levels
        .iter()
        .map(|l| l.second_l.iter().fold(T::zero(), |m, v| m.max(v.abs())))
        .collect();
    let l_lipschitz_ratios = levels.windows(2).map(|w| w[1].l_lipschitz / w[0].l_lipschitz).collect();
    Ok(RegularityReport {
        levels,
        second_z_cauchy,
        first_t_cauchy,
        second_l_max,
        l_lipschitz_ratios,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynkinReport<T> {
    /// `(E[phi(X_{t+h})] - phi(x)) / h`
    pub mc_rate: T,
    /// Standard error of `mc_rate` (`SE / h`).
    pub std_error: T,
    pub generator: T,
    pub difference: T,
    pub tolerance: T,
    pub pass: bool,
}

/// Compares the empirical rate of change of `E[phi(X)]` over `[t, t + h]`
/// (physical paths, Euler step `h / 10`) with `L phi(t, x)`. Passes iff
/// `|difference| <= curvature_budget · h + 3 SE / h`.
#[allow(clippy::too_many_arguments)]
pub fn generator_dynkin_check<T: Scalar>(
    model: &ModelSpec<T>,
    phi: &dyn TestFunction<T>,
    t: T,
    x: &State<T>,
    h: T,
    n_paths: usize,
    seed: u64,
    curvature_budget: T,
) -> Result<DynkinReport<T>> {
    if !(h > T::zero() && h <= T::lit(0.05)) {
        return Err(Error::InvalidArgument(format!("h = {h} must lie in (0, 0.05]")));
    }
    let generator = apply_generator(model, phi, t, x)?;
    let plan = McPlan::new(t + h, n_paths, h / T::lit(10.0), seed);
    let end = expect_terminal(model, MeasureTag::Physical, t, x, &plan, |z, l| phi.value(z, l))?;
    let start = phi.value(&x.z, x.l);
    let mc_rate = (end.mean - start) / h;
    let std_error = end.std_error / h;
    let difference = mc_rate - generator;
    let tolerance = curvature_budget * h + T::lit(3.0) * std_error;
    Ok(DynkinReport {
        mc_rate,
        std_error,
        generator,
        difference,
        tolerance,
        pass: difference.abs() <= tolerance,
    })
}
