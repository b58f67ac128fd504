//! Path simulation of X = (Z, L) under the reference measure (exogenous
//! Poisson stream, density xi carried along) and under the physical measure
//! (thinning).
//!
//! Both simulators consume randomness in the same order: one exponential gap
//! per proposed event, `d` normals per Euler step, then one uniform for the
//! mark and one for the acceptance test at every proposal. With nu = 1 the two
//! produce identical (Z, L) paths for the same seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, State};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeasureTag {
    Reference,
    Physical,
}

impl MeasureTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            MeasureTag::Reference => "reference",
            MeasureTag::Physical => "physical",
        }
    }
}

/// Seed of one path: the user seed plus the stream (path index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathSeed {
    pub seed: u64,
    pub stream: u64,
}

impl PathSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub(crate) fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

impl From<u64> for PathSeed {
    fn from(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }
}

/// A proposed jump of the driving random measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Event<T> {
    pub time: T,
    pub mark: usize,
    /// Always true under the reference measure.
    pub accepted: bool,
    /// nu(T_n, X_{T_n-}, U_n)
    pub nu: T,
    pub z_before: Vec<T>,
    pub l_before: T,
}

/// One simulated path. Rows are the Euler grid (uniform base grid plus event
/// times); event rows hold the post-jump state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub measure: MeasureTag,
    pub dim_z: usize,
    pub grid_times: Vec<T>,
    /// Row-major, `dim_z` entries per row.
    pub z_path: Vec<T>,
    pub l_path: Vec<T>,
    pub xi_path: Vec<T>,
    /// For each row, the index into `events` if the row is an event row.
    pub row_event: Vec<Option<usize>>,
    pub events: Vec<Event<T>>,
    pub seed: PathSeed,
    pub dt_max: T,
    /// Some event had nu = 0, so xi vanished from that point on.
    pub xi_hit_zero: bool,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.grid_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid_times.is_empty()
    }

    pub fn z(&self, row: usize) -> &[T] {
        &self.z_path[row * self.dim_z..(row + 1) * self.dim_z]
    }

    pub fn accepted_events(&self) -> usize {
        self.events.iter().filter(|e| e.accepted).count()
    }

    /// State at time `t` (right-continuous): last row with time <= t.
    pub fn state_at(&self, t: T) -> State<T> {
        let row = self.grid_times.partition_point(|&s| s <= t).max(1) - 1;
        State::new(self.z(row).to_vec(), self.l_path[row])
    }

    pub fn final_state(&self) -> State<T> {
        let row = self.len() - 1;
        State::new(self.z(row).to_vec(), self.l_path[row])
    }
}

/// Receives the path as it is generated.
pub(crate) trait PathObserver<T> {
    /// Called before each Euler step over `[s, s + h]` with the left-endpoint state.
    fn step(&mut self, s: T, h: T, z: &[T], l: T, xi: T);
    /// Called at every grid row, after any jump at that time.
    fn node(&mut self, t: T, z: &[T], l: T, xi: T, event: Option<&Event<T>>);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PathOutcome<T> {
    pub xi_final: T,
    pub xi_hit_zero: bool,
    pub proposed: usize,
    pub accepted: usize,
}

pub(crate) struct PathPlan<'a, T> {
    pub model: &'a ModelSpec<T>,
    pub measure: MeasureTag,
    pub t0: T,
    pub horizon: T,
    pub dt_max: T,
}

impl<T: Scalar> PathPlan<'_, T> {
    pub fn check(&self, x0: &State<T>) -> Result<()> {
        if !(self.t0 < self.horizon) {
            return Err(Error::InvalidArgument(format!(
                "t0 = {} must be < T = {}",
                self.t0, self.horizon
            )));
        }
        if !(self.dt_max > T::zero()) {
            return Err(Error::InvalidArgument(format!("dt_max = {} must be > 0", self.dt_max)));
        }
        if x0.z.len() != self.model.dim_z() {
            return Err(Error::DimensionMismatch {
                expected: self.model.dim_z(),
                found: x0.z.len(),
            });
        }
        Ok(())
    }

    pub fn base_steps(&self) -> usize {
        let span = (self.horizon - self.t0) / self.dt_max;
        span.ceil().to_usize().unwrap_or(1).max(1)
    }

    /// Generates one path, feeding `obs`. Assumes `check` passed.
    pub fn run<O: PathObserver<T>>(&self, x0: &State<T>, seed: PathSeed, obs: &mut O) -> Result<PathOutcome<T>> {
        let model = self.model;
        let d = model.dim_z();
        let marks = model.marks();
        let lambda = marks.total_mass();
        let reference = self.measure == MeasureTag::Reference;
        let mut rng = seed.rng();

        let n_base = self.base_steps();
        let span = self.horizon - self.t0;
        let n_base_t = T::from_usize_lossy(n_base);

        let mut z = x0.z.clone();
        let mut l = x0.l;
        let mut t = self.t0;
        // xi = jump_product * exp(compensator)
        let mut jump_product = T::one();
        let mut compensator = T::zero();
        let mut xi = T::one();
        let mut a = vec![T::zero(); d];
        let mut b = vec![T::zero(); d * d];
        let mut dw = vec![T::zero(); d];
        let mut gz = vec![T::zero(); d];
        let mut out = PathOutcome {
            xi_final: T::one(),
            xi_hit_zero: false,
            proposed: 0,
            accepted: 0,
        };

        let gap = |rng: &mut ChaCha8Rng| -> T {
            let e: f64 = rng.sample(Exp1);
            T::lit(e) / lambda
        };
        let mut next_event = t + gap(&mut rng);

        obs.node(t, &z, l, xi, None);
        let mut k = 1usize;
        while k <= n_base {
            let node_t = if k == n_base {
                self.horizon
            } else {
                self.t0 + span * (T::from_usize_lossy(k) / n_base_t)
            };
            let is_event = next_event < node_t;
            let target = if is_event { next_event } else { node_t };
            let h = target - t;
            if h > T::zero() {
                obs.step(t, h, &z, l, xi);
                model.drift(t, &z, l, &mut a);
                model.dispersion(t, &z, l, &mut b);
                let sqrt_h = h.sqrt();
                for w in dw.iter_mut() {
                    let n: f64 = rng.sample(StandardNormal);
                    *w = T::lit(n) * sqrt_h;
                }
                if reference {
                    compensator += model.compensator_rate(t, &z, l) * h;
                }
                for i in 0..d {
                    let mut dz = a[i] * h;
                    for j in 0..d {
                        dz += b[i * d + j] * dw[j];
                    }
                    z[i] += dz;
                }
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState {
                        time: target.to_f64_lossy(),
                        what: format!("z = {z:?} (stream {})", seed.stream),
                    });
                }
                if reference {
                    xi = jump_product * compensator.exp();
                }
            }
            t = target;

            if is_event {
                out.proposed += 1;
                let u_mark: f64 = rng.random();
                let u_accept: f64 = rng.random();
                let mark = marks.sample_index(T::lit(u_mark));
                let nu = model.nu(t, &z, l, mark);
                let accepted = if reference { true } else { T::lit(u_accept) < nu };
                let event = Event {
                    time: t,
                    mark,
                    accepted,
                    nu,
                    z_before: z.clone(),
                    l_before: l,
                };
                if accepted {
                    out.accepted += 1;
                    model.jump_z(t, &z, l, mark, &mut gz);
                    let gl = model.jump_l(t, &z, l, mark);
                    for i in 0..d {
                        z[i] += gz[i];
                    }
                    l += gl;
                    if !l.is_finite() || z.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFiniteState {
                            time: t.to_f64_lossy(),
                            what: format!("jump to z = {z:?}, l = {l} (stream {})", seed.stream),
                        });
                    }
                }
                if reference {
                    jump_product *= nu;
                    if nu == T::zero() {
                        out.xi_hit_zero = true;
                    }
                    xi = jump_product * compensator.exp();
                }
                next_event = t + gap(&mut rng);
                obs.node(t, &z, l, xi, Some(&event));
            } else {
                obs.node(t, &z, l, xi, None);
                k += 1;
            }
        }
        out.xi_final = xi;
        Ok(out)
    }
}

struct Recorder<T> {
    traj: Trajectory<T>,
}

impl<T: Scalar> PathObserver<T> for Recorder<T> {
    fn step(&mut self, _: T, _: T, _: &[T], _: T, _: T) {}

    fn node(&mut self, t: T, z: &[T], l: T, xi: T, event: Option<&Event<T>>) {
        let tr = &mut self.traj;
        tr.grid_times.push(t);
        tr.z_path.extend_from_slice(z);
        tr.l_path.push(l);
        tr.xi_path.push(xi);
        match event {
            Some(e) => {
                tr.row_event.push(Some(tr.events.len()));
                tr.events.push(e.clone());
            }
            None => tr.row_event.push(None),
        }
    }
}

fn simulate_path<T: Scalar>(
    measure: MeasureTag,
    model: &ModelSpec<T>,
    t0: T,
    x0: &State<T>,
    horizon: T,
    dt_max: T,
    seed: PathSeed,
) -> Result<Trajectory<T>> {
    let plan = PathPlan {
        model,
        measure,
        t0,
        horizon,
        dt_max,
    };
    plan.check(x0)?;
    let cap = plan.base_steps() + 1;
    let mut rec = Recorder {
        traj: Trajectory {
            measure,
            dim_z: model.dim_z(),
            grid_times: Vec::with_capacity(cap),
            z_path: Vec::with_capacity(cap * model.dim_z()),
            l_path: Vec::with_capacity(cap),
            xi_path: Vec::with_capacity(cap),
            row_event: Vec::with_capacity(cap),
            events: Vec::new(),
            seed,
            dt_max,
            xi_hit_zero: false,
        },
    };
    let outcome = plan.run(x0, seed, &mut rec)?;
    rec.traj.xi_hit_zero = outcome.xi_hit_zero;
    Ok(rec.traj)
}

/// Simulates under the reference measure: events at constant rate
/// lambda-tilde, marks from `w_k / lambda-tilde`, and the density
/// `xi_t = prod nu(T_n, X_{T_n-}, U_n) * exp(int (1 - nu) dnu_tilde ds)`
/// with the compensator integrand frozen at each step's left endpoint.
pub fn simulate_reference_path<T: Scalar>(
    model: &ModelSpec<T>,
    t0: T,
    x0: &State<T>,
    horizon: T,
    dt_max: T,
    seed: impl Into<PathSeed>,
) -> Result<Trajectory<T>> {
    simulate_path(MeasureTag::Reference, model, t0, x0, horizon, dt_max, seed.into())
}

/// Simulates under the physical measure by thinning the reference stream:
/// each proposal is accepted with probability nu(T_n, X_{T_n-}, U_n).
pub fn simulate_physical_path<T: Scalar>(
    model: &ModelSpec<T>,
    t0: T,
    x0: &State<T>,
    horizon: T,
    dt_max: T,
    seed: impl Into<PathSeed>,
) -> Result<Trajectory<T>> {
    simulate_path(MeasureTag::Physical, model, t0, x0, horizon, dt_max, seed.into())
}

/// Re-integrates xi along a reference path from its SDE form (left-point
/// Euler between rows, multiplicative jump at events) and returns the largest
/// deviation from the stored product-formula values.
pub fn xi_sde_check<T: Scalar>(traj: &Trajectory<T>, model: &ModelSpec<T>) -> Result<T> {
    if traj.measure != MeasureTag::Reference {
        return Err(Error::InvalidArgument(
            "xi_sde_check needs a reference-measure trajectory".into(),
        ));
    }
    let mut xi = traj.xi_path[0];
    let mut worst = T::zero();
    for row in 1..traj.len() {
        let prev = row - 1;
        let h = traj.grid_times[row] - traj.grid_times[prev];
        let rate = model.compensator_rate(traj.grid_times[prev], traj.z(prev), traj.l_path[prev]);
        xi += xi * rate * h;
        if let Some(e) = traj.row_event[row] {
            let ev = &traj.events[e];
            let nu = model.nu(ev.time, &ev.z_before, ev.l_before, ev.mark);
            xi += xi * (nu - T::one());
        }
        worst = worst.max((xi - traj.xi_path[row]).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog::{build_catalog_model, constant_cox, ModelParams};
    use crate::model::MarkMeasure;

    fn half_nu_model() -> ModelSpec<f64> {
        // lambda = 1 against lambda_bar = 2: nu = 1/2 everywhere
        constant_cox(1.0, 2.0).unwrap()
    }

    fn ou_cox() -> ModelSpec<f64> {
        build_catalog_model(
            "joint_jump",
            &ModelParams::new()
                .with("lambda0", 0.5)
                .with("lambda_logit", 1.0)
                .with("lambda_bar", 1.5)
                .with("kappa", 1.0)
                .with("theta", 0.0)
                .with("sigma", 0.4)
                .with("eta", 0.3),
        )
        .unwrap()
    }

    #[test]
    fn xi_is_one_when_nu_is_one() {
        let m: ModelSpec<f64> = constant_cox(2.0, 2.0).unwrap();
        for s in 0..20 {
            let tr = simulate_reference_path(&m, 0.0, &State::scalar(0.0, 0.0), 1.0, 0.05, s).unwrap();
            assert!(tr.xi_path.iter().all(|&x| x == 1.0));
        }
    }

    #[test]
    fn constant_nu_product_formula() {
        let m = half_nu_model();
        for s in 0..30 {
            let tr = simulate_reference_path(&m, 0.0, &State::scalar(0.0, 0.0), 1.0, 0.01, s).unwrap();
            let n = tr.events.len() as i32;
            let expected = 0.5f64.powi(n) * (2.0 * 1.0 / 2.0f64).exp();
            let got = *tr.xi_path.last().unwrap();
            assert!((got - expected).abs() < 1e-12 * expected, "{got} vs {expected}");
        }
    }

    #[test]
    fn structural_invariants() {
        let m = ou_cox();
        let lam = m.lambda_tilde();
        for s in 0..50 {
            let tr = simulate_reference_path(&m, 0.2, &State::scalar(0.1, 1.0), 1.2, 0.02, s).unwrap();
            assert_eq!(tr.grid_times[0], 0.2);
            assert_eq!(*tr.grid_times.last().unwrap(), 1.2);
            for w in tr.grid_times.windows(2) {
                assert!(w[1] > w[0]);
                assert!(w[1] - w[0] <= 0.02 + 1e-12);
            }
            for w in tr.events.windows(2) {
                assert!(w[1].time > w[0].time);
            }
            for row in 1..tr.len() {
                if tr.row_event[row].is_none() {
                    assert_eq!(tr.l_path[row], tr.l_path[row - 1]);
                }
                let bound = (lam * (tr.grid_times[row] - 0.2)).exp();
                assert!(tr.xi_path[row] > 0.0 && tr.xi_path[row] <= bound + 1e-12);
            }
            assert!(tr.events.iter().all(|e| e.accepted));
        }
    }

    #[test]
    fn reproducible() {
        let m = ou_cox();
        let x0 = State::scalar(0.0, 0.0);
        let a = simulate_physical_path(&m, 0.0, &x0, 1.0, 0.01, PathSeed::new(9, 3)).unwrap();
        let b = simulate_physical_path(&m, 0.0, &x0, 1.0, 0.01, PathSeed::new(9, 3)).unwrap();
        assert_eq!(a, b);
        let c = simulate_physical_path(&m, 0.0, &x0, 1.0, 0.01, PathSeed::new(9, 4)).unwrap();
        assert_ne!(a.z_path, c.z_path);
    }

    #[test]
    fn coupling_with_unit_density() {
        let m: ModelSpec<f64> = build_catalog_model(
            "ou_modulated_cox",
            &ModelParams::new()
                .with("lambda0", 1.5)
                .with("lambda_bar", 1.5)
                .with("kappa", 1.0)
                .with("theta", 0.5)
                .with("sigma", 0.3),
        )
        .unwrap();
        let x0 = State::scalar(0.2, 1.0);
        for s in 0..20 {
            let r = simulate_reference_path(&m, 0.0, &x0, 1.0, 0.01, s).unwrap();
            let p = simulate_physical_path(&m, 0.0, &x0, 1.0, 0.01, s).unwrap();
            assert_eq!(r.z_path, p.z_path);
            assert_eq!(r.l_path, p.l_path);
            assert_eq!(r.grid_times, p.grid_times);
            assert!(p.xi_path.iter().all(|&x| x == 1.0));
        }
    }

    #[test]
    fn zero_intensity_accepts_nothing() {
        let m: ModelSpec<f64> = constant_cox(0.0, 1.0).unwrap();
        for s in 0..50 {
            let p = simulate_physical_path(&m, 0.0, &State::scalar(0.0, 0.0), 1.0, 0.1, s).unwrap();
            assert_eq!(p.accepted_events(), 0);
            assert!(p.l_path.iter().all(|&l| l == 0.0));
        }
    }

    #[test]
    fn zero_density_event_flags_path() {
        let m: ModelSpec<f64> = constant_cox(0.0, 3.0).unwrap();
        let tr = (0..100)
            .map(|s| simulate_reference_path(&m, 0.0, &State::scalar(0.0, 0.0), 1.0, 0.1, s))
            .map(Result::unwrap)
            .find(|t| !t.events.is_empty())
            .unwrap();
        assert!(tr.xi_hit_zero);
        assert_eq!(*tr.xi_path.last().unwrap(), 0.0);
    }

    #[test]
    fn invalid_arguments() {
        let m = half_nu_model();
        let x0 = State::scalar(0.0, 0.0);
        assert!(simulate_reference_path(&m, 1.0, &x0, 1.0, 0.1, 0).is_err());
        assert!(simulate_reference_path(&m, 0.0, &x0, 1.0, 0.0, 0).is_err());
        let x2 = State::new(vec![0.0, 0.0], 0.0);
        assert!(matches!(
            simulate_reference_path(&m, 0.0, &x2, 1.0, 0.1, 0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn exploding_drift_aborts() {
        let marks = MarkMeasure::point(1.0, 1.0).unwrap();
        let m = ModelSpec::builder(1, marks)
            .drift(|_, z, _, a: &mut [f64]| a[0] = z[0] * z[0] * 1e200)
            .build()
            .unwrap();
        let r = simulate_physical_path(&m, 0.0, &State::scalar(1.0, 0.0), 1.0, 0.1, 0);
        assert!(matches!(r, Err(Error::NonFiniteState { .. })));
    }

    #[test]
    fn sde_check_zero_for_unit_density() {
        let m: ModelSpec<f64> = constant_cox(2.0, 2.0).unwrap();
        let tr = simulate_reference_path(&m, 0.0, &State::scalar(0.0, 0.0), 1.0, 0.05, 1).unwrap();
        assert_eq!(xi_sde_check(&tr, &m).unwrap(), 0.0);
        let p = simulate_physical_path(&m, 0.0, &State::scalar(0.0, 0.0), 1.0, 0.05, 1).unwrap();
        assert!(xi_sde_check(&p, &m).is_err());
    }

    #[test]
    fn sde_check_first_order_in_dt() {
        // constant nu = 1/2: the Euler product (1 + lambda h / 2)^n differs from
        // exp(lambda t / 2) by O(h); halving dt_max halves the deviation.
        let m = half_nu_model();
        let x0 = State::scalar(0.0, 0.0);
        let dev = |dt: f64| {
            let tr = simulate_reference_path(&m, 0.0, &x0, 1.0, dt, 4).unwrap();
            xi_sde_check(&tr, &m).unwrap()
        };
        let (d1, d2, d3) = (dev(0.02), dev(0.01), dev(0.005));
        assert!(d1 > 0.0);
        let r1 = d1 / d2;
        let r2 = d2 / d3;
        assert!((1.6..2.4).contains(&r1), "{r1}");
        assert!((1.6..2.4).contains(&r2), "{r2}");
    }

    #[test]
    fn sde_check_vanishing_density_matches_euler_bound() {
        // nu = 0: before the first event xi = exp(lambda t) exactly while the
        // SDE form gives (1 + lambda h)^n; after an event both are zero.
        let lambda = 2.0;
        let m: ModelSpec<f64> = constant_cox(0.0, lambda).unwrap();
        let dt = 1e-3;
        for s in 0..10 {
            let tr = simulate_reference_path(&m, 0.0, &State::scalar(0.0, 0.0), 1.0, dt, s).unwrap();
            let dev = xi_sde_check(&tr, &m).unwrap();
            let bound = lambda.exp() * lambda * lambda * 1.0 * dt / 2.0;
            assert!(dev <= bound * 1.01, "{dev} vs {bound}");
        }
    }

    #[test]
    fn single_precision_path() {
        let m: ModelSpec<f32> = constant_cox(1.0, 2.0).unwrap();
        let tr = simulate_reference_path(&m, 0.0f32, &State::scalar(0.0, 0.0), 1.0, 0.05, 2).unwrap();
        assert_eq!(*tr.grid_times.last().unwrap(), 1.0f32);
        assert!(tr.xi_path.iter().all(|x| *x > 0.0 && *x <= 2f32.exp() + 1e-5));
    }
}
