//! Monte Carlo estimators of the value function
//!
//! ```text
//! v(t, x) = E[ int_t^T e^{-int_t^s c} f(s, X_s) ds + e^{-int_t^T c} g(X_T) | X_t = x ]
//! ```
//!
//! under the physical measure, and of its reference-measure counterpart
//! `v~(t, x, xi) = xi * v(t, x)` in the terminal-weight and running-weight forms.
//! Discount and running-cost integrals use the left-point rule on the
//! simulation grid.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ModelSpec, State};
use crate::scalar::{compensated_sum, Scalar};
use crate::simulate::{MeasureTag, PathObserver, PathPlan, PathSeed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorTag {
    Physical,
    WeightedTerminal,
    WeightedRunning,
}

impl EstimatorTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorTag::Physical => "physical",
            EstimatorTag::WeightedTerminal => "weighted_terminal",
            EstimatorTag::WeightedRunning => "weighted_running",
        }
    }
}

impl fmt::Display for EstimatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which weighted form of v~ to average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightForm {
    /// `xi_T (e^{-int c} g + int e^{-int c} f ds)`
    Terminal,
    /// `xi_T e^{-int c} g + int xi_s e^{-int c} f ds`
    Running,
}

/// Horizon and Monte Carlo budget shared by all estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McPlan<T> {
    pub horizon: T,
    pub n_paths: usize,
    pub dt_max: T,
    pub seed: u64,
}

impl<T: Scalar> McPlan<T> {
    pub fn new(horizon: T, n_paths: usize, dt_max: T, seed: u64) -> Self {
        Self {
            horizon,
            n_paths,
            dt_max,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn with_paths(self, n_paths: usize) -> Self {
        Self { n_paths, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult<T> {
    pub estimator_tag: EstimatorTag,
    pub mean: T,
    pub std_error: T,
    pub ci95: (T, T),
    pub n_paths: usize,
    pub seed: u64,
    /// Reference paths on which xi hit zero (nu = 0 at an event).
    pub zero_density_paths: usize,
}

impl<T: Scalar> EstimatorResult<T> {
    pub(crate) fn from_samples(
        tag: EstimatorTag,
        samples: &[T],
        scale: T,
        seed: u64,
        zero_density_paths: usize,
    ) -> Self {
        let n = samples.len();
        let n_t = T::from_usize_lossy(n);
        let mean = compensated_sum(samples) / n_t;
        let sq: Vec<T> = samples.iter().map(|&x| (x - mean) * (x - mean)).collect();
        let var = compensated_sum(&sq) / T::from_usize_lossy(n.saturating_sub(1).max(1));
        let se = (var / n_t).sqrt();
        let mean = mean * scale;
        let std_error = se * scale.abs();
        let half = T::lit(1.96) * std_error;
        Self {
            estimator_tag: tag,
            mean,
            std_error,
            ci95: (mean - half, mean + half),
            n_paths: n,
            seed,
            zero_density_paths,
        }
    }

    /// True when the two 95% intervals intersect.
    pub fn overlaps(&self, other: &Self) -> bool {
        self.ci95.0 <= other.ci95.1 && other.ci95.0 <= self.ci95.1
    }
}

/// Per-path accumulator of the discounted payoff in all three forms.
struct PayoffAccumulator<'a, T> {
    model: &'a ModelSpec<T>,
    discount_integral: T,
    running: T,
    running_weighted: T,
}

impl<T: Scalar> PathObserver<T> for PayoffAccumulator<'_, T> {
    fn step(&mut self, s: T, h: T, z: &[T], l: T, xi: T) {
        let discount = (-self.discount_integral).exp();
        let f = self.model.running_cost(s, z, l);
        self.running += discount * f * h;
        self.running_weighted += xi * discount * f * h;
        self.discount_integral += self.model.discount(s, z, l) * h;
    }

    fn node(&mut self, _: T, _: &[T], _: T, _: T, _: Option<&crate::simulate::Event<T>>) {}
}

/// Terminal observer that only remembers the final state.
struct LastState<T> {
    z: Vec<T>,
    l: T,
}

impl<T: Scalar> PathObserver<T> for LastState<T> {
    fn step(&mut self, _: T, _: T, _: &[T], _: T, _: T) {}

    fn node(&mut self, _: T, z: &[T], l: T, _: T, _: Option<&crate::simulate::Event<T>>) {
        self.z.clear();
        self.z.extend_from_slice(z);
        self.l = l;
    }
}

#[derive(Debug, Clone, Copy)]
struct PathValues<T> {
    physical: T,
    terminal: T,
    running: T,
    xi_zero: bool,
}

fn check_common<T: Scalar>(t: T, x: &State<T>, model: &ModelSpec<T>, plan: &McPlan<T>) -> Result<()> {
    if plan.n_paths < 2 {
        return Err(Error::InvalidArgument("n_paths must be >= 2".into()));
    }
    if !(t < plan.horizon) {
        return Err(Error::InvalidArgument(format!(
            "t = {t} must be < T = {}",
            plan.horizon
        )));
    }
    if x.z.len() != model.dim_z() {
        return Err(Error::DimensionMismatch {
            expected: model.dim_z(),
            found: x.z.len(),
        });
    }
    Ok(())
}

fn simulate_values<T: Scalar>(
    model: &ModelSpec<T>,
    measure: MeasureTag,
    t: T,
    x: &State<T>,
    plan: &McPlan<T>,
) -> Result<Vec<PathValues<T>>> {
    let path_plan = PathPlan {
        model,
        measure,
        t0: t,
        horizon: plan.horizon,
        dt_max: plan.dt_max,
    };
    path_plan.check(x)?;
    (0..plan.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut acc = PayoffAccumulator {
                model,
                discount_integral: T::zero(),
                running: T::zero(),
                running_weighted: T::zero(),
            };
            let mut last = LastObserver {
                inner: &mut acc,
                z: Vec::with_capacity(x.z.len()),
                l: x.l,
            };
            let outcome = path_plan.run(x, PathSeed::new(plan.seed, i), &mut last)?;
            let (z_end, l_end) = (last.z, last.l);
            let g = model.terminal(&z_end, l_end);
            let discounted_g = (-acc.discount_integral).exp() * g;
            let xi = outcome.xi_final;
            Ok(PathValues {
                physical: acc.running + discounted_g,
                terminal: xi * (discounted_g + acc.running),
                running: xi * discounted_g + acc.running_weighted,
                xi_zero: outcome.xi_hit_zero,
            })
        })
        .collect()
}

/// Forwards steps to the payoff accumulator and keeps the final state.
struct LastObserver<'b, 'a, T> {
    inner: &'b mut PayoffAccumulator<'a, T>,
    z: Vec<T>,
    l: T,
}

impl<T: Scalar> PathObserver<T> for LastObserver<'_, '_, T> {
    fn step(&mut self, s: T, h: T, z: &[T], l: T, xi: T) {
        self.inner.step(s, h, z, l, xi);
    }

    fn node(&mut self, _: T, z: &[T], l: T, _: T, _: Option<&crate::simulate::Event<T>>) {
        self.z.clear();
        self.z.extend_from_slice(z);
        self.l = l;
    }
}

/// Plain Monte Carlo of v(t, x) over physical-measure (thinned) paths.
pub fn estimate_v_physical<T: Scalar>(
    model: &ModelSpec<T>,
    t: T,
    x: &State<T>,
    plan: &McPlan<T>,
) -> Result<EstimatorResult<T>> {
    check_common(t, x, model, plan)?;
    let values = simulate_values(model, MeasureTag::Physical, t, x, plan)?;
    let samples: Vec<T> = values.iter().map(|v| v.physical).collect();
    Ok(EstimatorResult::from_samples(
        EstimatorTag::Physical,
        &samples,
        T::one(),
        plan.seed,
        0,
    ))
}

fn check_xi0<T: Scalar>(model: &ModelSpec<T>, t: T, xi0: T) -> Result<()> {
    let bound = (model.lambda_tilde() * t).exp();
    if !(xi0 > T::zero() && xi0 <= bound) {
        return Err(Error::XiOutsideDomain {
            xi0: xi0.to_f64_lossy(),
            bound: bound.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Monte Carlo of v~(t, x, xi0) over reference-measure paths started at
/// xi_t = xi0. xi enters every path value as a multiplicative factor, so the
/// per-path values are computed for xi_t = 1 and the estimate is scaled by xi0.
pub fn estimate_v_weighted<T: Scalar>(
    model: &ModelSpec<T>,
    t: T,
    x: &State<T>,
    xi0: T,
    plan: &McPlan<T>,
    form: WeightForm,
) -> Result<EstimatorResult<T>> {
    check_common(t, x, model, plan)?;
    check_xi0(model, t, xi0)?;
    let values = simulate_values(model, MeasureTag::Reference, t, x, plan)?;
    Ok(weighted_result(&values, form, xi0, plan.seed))
}

fn weighted_result<T: Scalar>(values: &[PathValues<T>], form: WeightForm, xi0: T, seed: u64) -> EstimatorResult<T> {
    let zero = values.iter().filter(|v| v.xi_zero).count();
    let (tag, samples): (EstimatorTag, Vec<T>) = match form {
        WeightForm::Terminal => (
            EstimatorTag::WeightedTerminal,
            values.iter().map(|v| v.terminal).collect(),
        ),
        WeightForm::Running => (
            EstimatorTag::WeightedRunning,
            values.iter().map(|v| v.running).collect(),
        ),
    };
    EstimatorResult::from_samples(tag, &samples, xi0, seed, zero)
}

/// Both weighted forms from one batch of reference paths.
pub fn estimate_v_weighted_both<T: Scalar>(
    model: &ModelSpec<T>,
    t: T,
    x: &State<T>,
    xi0: T,
    plan: &McPlan<T>,
) -> Result<(EstimatorResult<T>, EstimatorResult<T>)> {
    check_common(t, x, model, plan)?;
    check_xi0(model, t, xi0)?;
    let values = simulate_values(model, MeasureTag::Reference, t, x, plan)?;
    Ok((
        weighted_result(&values, WeightForm::Terminal, xi0, plan.seed),
        weighted_result(&values, WeightForm::Running, xi0, plan.seed),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesReport<T> {
    pub physical: EstimatorResult<T>,
    pub weighted_terminal: EstimatorResult<T>,
    pub weighted_running: EstimatorResult<T>,
    /// All pairwise 95% intervals overlap.
    pub pass: bool,
}

impl<T: Scalar> BayesReport<T> {
    pub fn estimates(&self) -> [&EstimatorResult<T>; 3] {
        [&self.physical, &self.weighted_terminal, &self.weighted_running]
    }
}

/// Runs the physical estimator on `seeds.0` and both weighted forms (xi0 = 1)
/// on `seeds.1`, and checks v = v~ / xi through pairwise CI overlap.
pub fn bayes_consistency<T: Scalar>(
    model: &ModelSpec<T>,
    t: T,
    x: &State<T>,
    plan: &McPlan<T>,
    seeds: (u64, u64),
) -> Result<BayesReport<T>> {
    let physical = estimate_v_physical(model, t, x, &plan.with_seed(seeds.0))?;
    let (weighted_terminal, weighted_running) =
        estimate_v_weighted_both(model, t, x, T::one(), &plan.with_seed(seeds.1))?;
    let pass = physical.overlaps(&weighted_terminal)
        && physical.overlaps(&weighted_running)
        && weighted_terminal.overlaps(&weighted_running);
    Ok(BayesReport {
        physical,
        weighted_terminal,
        weighted_running,
        pass,
    })
}

/// Mean of `functional(X_T)` from `(t, x)`: plain average under the physical
/// measure, xi_T-weighted average under the reference measure.
pub fn expect_terminal<T, F>(
    model: &ModelSpec<T>,
    measure: MeasureTag,
    t: T,
    x: &State<T>,
    plan: &McPlan<T>,
    functional: F,
) -> Result<EstimatorResult<T>>
where
    T: Scalar,
    F: Fn(&[T], T) -> T + Sync,
{
    check_common(t, x, model, plan)?;
    let path_plan = PathPlan {
        model,
        measure,
        t0: t,
        horizon: plan.horizon,
        dt_max: plan.dt_max,
    };
    path_plan.check(x)?;
    let samples: Vec<(T, bool)> = (0..plan.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut last = LastState {
                z: Vec::with_capacity(x.z.len()),
                l: x.l,
            };
            let out = path_plan.run(x, PathSeed::new(plan.seed, i), &mut last)?;
            Ok((out.xi_final * functional(&last.z, last.l), out.xi_hit_zero))
        })
        .collect::<Result<_>>()?;
    let zero = samples.iter().filter(|s| s.1).count();
    let values: Vec<T> = samples.into_iter().map(|s| s.0).collect();
    let tag = match measure {
        MeasureTag::Physical => EstimatorTag::Physical,
        MeasureTag::Reference => EstimatorTag::WeightedTerminal,
    };
    Ok(EstimatorResult::from_samples(tag, &values, T::one(), plan.seed, zero))
}
