//! Sampling-based checks of the standing assumptions on the coefficients.
//!
//! Nothing here is a proof: coefficients are evaluated on random points of a
//! bounded box, Lipschitz constants are maxima of difference quotients over
//! sampled pairs, and the result is a pass/warn/fail report.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckId {
    /// Continuity (sampled as finiteness).
    A0,
    /// Lipschitz drift and dispersion.
    A1,
    /// Finite reference measure, density in [0, 1].
    A2,
    /// Jump coefficients dominated by rho.
    A3,
    /// Bounded discount.
    A4,
    /// Bounded Lipschitz f and g.
    A5,
    /// Uniform ellipticity of Sigma in z.
    Ellipticity,
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CheckId::A0 => "A0",
            CheckId::A1 => "A1",
            CheckId::A2 => "A2",
            CheckId::A3 => "A3",
            CheckId::A4 => "A4",
            CheckId::A5 => "A5",
            CheckId::Ellipticity => "ellipticity",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Warn => "warn",
            Status::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoint {
    pub t: f64,
    pub z: Vec<f64>,
    pub l: f64,
    pub mark: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: CheckId,
    pub status: Status,
    pub worst: f64,
    pub location: Option<SamplePoint>,
    pub message: String,
}

/// Maxima of sampled difference quotients in x = (z, l) at fixed t.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LipschitzEstimates {
    pub drift: f64,
    pub dispersion: f64,
    pub jump_z: f64,
    pub jump_l: f64,
    pub nu: f64,
    pub discount: f64,
    pub running_cost: f64,
    pub terminal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub sampled_lipschitz: LipschitzEstimates,
    /// Smallest eigenvalue of Sigma seen.
    pub ellipticity_estimate: f64,
    pub max_nu: f64,
    /// Per mark node: max(|gamma^Z| + |gamma^L|, Lipschitz estimate).
    pub estimated_rho: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
}

impl ValidationReport {
    pub fn check(&self, id: CheckId) -> &Check {
        self.checks.iter().find(|c| c.id == id).expect("every id reported")
    }

    pub fn worst_status(&self) -> Status {
        self.checks.iter().map(|c| c.status).max().unwrap_or(Status::Pass)
    }
}

/// Box in (t, z, l) from which validation points are drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingBox<T> {
    pub t: (T, T),
    pub z: Vec<(T, T)>,
    pub l: (T, T),
}

impl<T: Scalar> SamplingBox<T> {
    pub fn new(t: (T, T), z: Vec<(T, T)>, l: (T, T)) -> Self {
        Self { t, z, l }
    }
}

struct Eval<T> {
    a: Vec<T>,
    b: Vec<T>,
    gz: Vec<Vec<T>>,
    gl: Vec<T>,
    nu: Vec<T>,
    c: T,
    f: T,
    g: T,
}

fn evaluate<T: Scalar>(m: &ModelSpec<T>, t: T, z: &[T], l: T) -> Eval<T> {
    let d = m.dim_z();
    let n_marks = m.marks().len();
    let mut a = vec![T::zero(); d];
    let mut b = vec![T::zero(); d * d];
    m.drift(t, z, l, &mut a);
    m.dispersion(t, z, l, &mut b);
    let mut gz = vec![vec![T::zero(); d]; n_marks];
    let mut gl = Vec::with_capacity(n_marks);
    let mut nu = Vec::with_capacity(n_marks);
    for (k, gzk) in gz.iter_mut().enumerate() {
        m.jump_z(t, z, l, k, gzk);
        gl.push(m.jump_l(t, z, l, k));
        nu.push(m.nu(t, z, l, k));
    }
    Eval {
        a,
        b,
        gz,
        gl,
        nu,
        c: m.discount(t, z, l),
        f: m.running_cost(t, z, l),
        g: m.terminal(z, l),
    }
}

impl<T: Scalar> Eval<T> {
    fn all_finite(&self) -> bool {
        let fin = |v: &[T]| v.iter().all(|x| x.is_finite());
        fin(&self.a)
            && fin(&self.b)
            && self.gz.iter().all(|v| fin(v))
            && fin(&self.gl)
            && fin(&self.nu)
            && self.c.is_finite()
            && self.f.is_finite()
            && self.g.is_finite()
    }
}

fn norm_diff<T: Scalar>(x: &[T], y: &[T]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = (*a - *b).to_f64_lossy();
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn frobenius<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|a| a.to_f64_lossy().powi(2)).sum::<f64>().sqrt()
}

/// Eigenvalues of a symmetric row-major matrix (cyclic Jacobi).
pub fn symmetric_eigenvalues(mat: &[f64], d: usize) -> Vec<f64> {
    let mut a = mat.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * d + j].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..d).map(|i| a[i * d + i]).collect()
}

fn point<T: Scalar>(t: T, z: &[T], l: T, mark: Option<usize>) -> SamplePoint {
    SamplePoint {
        t: t.to_f64_lossy(),
        z: z.iter().map(|v| v.to_f64_lossy()).collect(),
        l: l.to_f64_lossy(),
        mark,
    }
}

struct Worst {
    value: f64,
    at: Option<SamplePoint>,
}

impl Worst {
    fn new(init: f64) -> Self {
        Self { value: init, at: None }
    }
    fn max(&mut self, v: f64, at: impl FnOnce() -> SamplePoint) {
        if v > self.value || (self.at.is_none() && v == self.value) {
            self.value = v;
            self.at = Some(at());
        }
    }
    fn min(&mut self, v: f64, at: impl FnOnce() -> SamplePoint) {
        if v < self.value || (self.at.is_none() && v == self.value) {
            self.value = v;
            self.at = Some(at());
        }
    }
}

fn exceeds(observed: f64, declared: Option<f64>) -> bool {
    declared.is_some_and(|d| observed > d * (1.0 + 1e-9) + 1e-12)
}

/// Evaluates every coefficient on `n_samples` random points of `sampler` (plus
/// perturbed neighbours) and grades each assumption. Deterministic in `seed`.
pub fn validate_assumptions<T: Scalar>(
    model: &ModelSpec<T>,
    sampler: &SamplingBox<T>,
    n_samples: usize,
    seed: u64,
) -> Result<ValidationReport> {
    let d = model.dim_z();
    if n_samples < 2 {
        return Err(Error::InvalidArgument("n_samples must be >= 2".into()));
    }
    if sampler.z.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: sampler.z.len(),
        });
    }
    let n_marks = model.marks().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |lo: T, hi: T| -> T { lo + (hi - lo) * T::lit(rng.random::<f64>()) };

    let points: Vec<(T, Vec<T>, T)> = (0..n_samples)
        .map(|_| {
            let t = draw(sampler.t.0, sampler.t.1);
            let z: Vec<T> = sampler.z.iter().map(|&(lo, hi)| draw(lo, hi)).collect();
            let l = draw(sampler.l.0, sampler.l.1);
            (t, z, l)
        })
        .collect();

    // per-axis perturbation for local difference quotients
    let width = |lo: T, hi: T| {
        let w = (hi - lo).to_f64_lossy();
        if w > 0.0 {
            w
        } else {
            1.0
        }
    };
    let mut steps: Vec<f64> = sampler.z.iter().map(|&(lo, hi)| 1e-4 * width(lo, hi)).collect();
    steps.push(1e-4 * width(sampler.l.0, sampler.l.1));

    let mut non_finite: Option<SamplePoint> = None;
    let mut max_nu = Worst::new(f64::NEG_INFINITY);
    let mut min_nu = Worst::new(f64::INFINITY);
    let mut min_eig = Worst::new(f64::INFINITY);
    let mut sup_b = Worst::new(0.0);
    let mut sup_c = Worst::new(0.0);
    let mut sup_f = Worst::new(0.0);
    let mut sup_g = Worst::new(0.0);
    let mut lip = LipschitzEstimates::default();
    let mut rho_est = vec![0.0f64; n_marks];
    let mut rho_violation = Worst::new(0.0);
    let declared_rho: Option<Vec<f64>> = model.rho().map(|r| r.iter().map(|v| v.to_f64_lossy()).collect());
    let mut sigma = vec![T::zero(); d * d];

    let mut quotients = |e0: &Eval<T>, e1: &Eval<T>, dist: f64, rho_est: &mut [f64]| {
        if dist <= 0.0 {
            return;
        }
        lip.drift = lip.drift.max(norm_diff(&e0.a, &e1.a) / dist);
        lip.dispersion = lip.dispersion.max(norm_diff(&e0.b, &e1.b) / dist);
        lip.discount = lip.discount.max((e0.c - e1.c).abs().to_f64_lossy() / dist);
        lip.running_cost = lip.running_cost.max((e0.f - e1.f).abs().to_f64_lossy() / dist);
        lip.terminal = lip.terminal.max((e0.g - e1.g).abs().to_f64_lossy() / dist);
        for (k, rho) in rho_est.iter_mut().enumerate().take(n_marks) {
            let dz = norm_diff(&e0.gz[k], &e1.gz[k]) / dist;
            let dl = (e0.gl[k] - e1.gl[k]).abs().to_f64_lossy() / dist;
            let dn = (e0.nu[k] - e1.nu[k]).abs().to_f64_lossy() / dist;
            lip.jump_z = lip.jump_z.max(dz);
            lip.jump_l = lip.jump_l.max(dl);
            lip.nu = lip.nu.max(dn);
            *rho = rho.max(dz + dl + dn);
        }
    };

    for (i, (t, z, l)) in points.iter().enumerate() {
        let (t, l) = (*t, *l);
        let e = evaluate(model, t, z, l);
        if !e.all_finite() {
            non_finite.get_or_insert_with(|| point(t, z, l, None));
            continue;
        }
        for k in 0..n_marks {
            let nu = e.nu[k].to_f64_lossy();
            max_nu.max(nu, || point(t, z, l, Some(k)));
            min_nu.min(nu, || point(t, z, l, Some(k)));
            let size = frobenius(&e.gz[k]) + e.gl[k].abs().to_f64_lossy();
            rho_est[k] = rho_est[k].max(size);
            if let Some(r) = &declared_rho {
                rho_violation.max(size - r[k], || point(t, z, l, Some(k)));
            }
        }
        sup_b.max(frobenius(&e.b), || point(t, z, l, None));
        sup_c.max(e.c.abs().to_f64_lossy(), || point(t, z, l, None));
        sup_f.max(e.f.abs().to_f64_lossy(), || point(t, z, l, None));
        sup_g.max(e.g.abs().to_f64_lossy(), || point(t, z, l, None));
        model.covariance(t, z, l, &mut sigma);
        let s64: Vec<f64> = sigma.iter().map(|v| v.to_f64_lossy()).collect();
        let eig = symmetric_eigenvalues(&s64, d).into_iter().fold(f64::INFINITY, f64::min);
        min_eig.min(eig, || point(t, z, l, None));

        // axis-aligned neighbours
        for (axis, &h) in steps.iter().enumerate() {
            let mut z1 = z.clone();
            let mut l1 = l;
            if axis < d {
                z1[axis] += T::lit(h);
            } else {
                l1 += T::lit(h);
            }
            let e1 = evaluate(model, t, &z1, l1);
            if !e1.all_finite() {
                non_finite.get_or_insert_with(|| point(t, &z1, l1, None));
                continue;
            }
            let dist = {
                let mut s = 0.0;
                for j in 0..d {
                    s += (z1[j] - z[j]).to_f64_lossy().powi(2);
                }
                (s + (l1 - l).to_f64_lossy().powi(2)).sqrt()
            };
            quotients(&e, &e1, dist, &mut rho_est);
        }
        // global partner at the same t
        let (_, z2, l2) = &points[(i + 1) % n_samples];
        let e2 = evaluate(model, t, z2, *l2);
        if e2.all_finite() {
            let mut s = 0.0;
            for j in 0..d {
                s += (z2[j] - z[j]).to_f64_lossy().powi(2);
            }
            let dist = (s + (*l2 - l).to_f64_lossy().powi(2)).sqrt();
            quotients(&e, &e2, dist, &mut rho_est);
        }
    }

    let bounds = model.bounds();
    let declared = |v: Option<T>| v.map(|x| x.to_f64_lossy());
    let mut checks = Vec::with_capacity(7);

    checks.push(match &non_finite {
        Some(at) => Check {
            id: CheckId::A0,
            status: Status::Fail,
            worst: f64::NAN,
            location: Some(at.clone()),
            message: "non-finite coefficient value".into(),
        },
        None => Check {
            id: CheckId::A0,
            status: Status::Pass,
            worst: 0.0,
            location: None,
            message: "all coefficients finite on the sampled box".into(),
        },
    });

    {
        let (la, lb) = (lip.drift, lip.dispersion);
        let bad_a = exceeds(la, declared(bounds.lip_a));
        let bad_b = exceeds(lb, declared(bounds.lip_b));
        let status = if bad_a || bad_b { Status::Fail } else { Status::Pass };
        checks.push(Check {
            id: CheckId::A1,
            status,
            worst: la.max(lb),
            location: None,
            message: format!(
                "sampled Lipschitz in x: a {la:.6}, b {lb:.6} (declared {:?}, {:?})",
                declared(bounds.lip_a),
                declared(bounds.lip_b)
            ),
        });
    }

    {
        let mass = model.lambda_tilde().to_f64_lossy();
        let (status, message) = if !(mass.is_finite() && mass > 0.0) {
            (Status::Fail, format!("reference mass {mass} not finite positive"))
        } else if max_nu.value > 1.0 + 1e-12 {
            (Status::Fail, format!("nu = {} exceeds 1", max_nu.value))
        } else if min_nu.value < 0.0 {
            (Status::Fail, format!("nu = {} is negative", min_nu.value))
        } else if min_nu.value == 0.0 {
            (
                Status::Warn,
                "nu vanishes somewhere: measures not equivalent there".into(),
            )
        } else {
            (
                Status::Pass,
                format!("nu in [{}, {}], lambda_tilde = {mass}", min_nu.value, max_nu.value),
            )
        };
        let location = if min_nu.value < 0.0 || (min_nu.value == 0.0 && max_nu.value <= 1.0) {
            min_nu.at.clone()
        } else {
            max_nu.at.clone()
        };
        checks.push(Check {
            id: CheckId::A2,
            status,
            worst: max_nu.value,
            location,
            message,
        });
    }

    {
        let lip_rho: Vec<f64> = rho_est.clone();
        let (status, message, location, worst) = match &declared_rho {
            None => (
                Status::Warn,
                format!("no rho declared; estimated rho per node {lip_rho:?}"),
                None,
                lip_rho.iter().cloned().fold(0.0, f64::max),
            ),
            Some(r) => {
                let lip_excess = lip_rho
                    .iter()
                    .zip(r)
                    .map(|(e, r)| e - r)
                    .fold(f64::NEG_INFINITY, f64::max);
                let excess = lip_excess.max(rho_violation.value);
                let integral: f64 = r
                    .iter()
                    .zip(model.marks().weights())
                    .map(|(r, w)| r * r * w.to_f64_lossy())
                    .sum();
                if excess > 1e-9 || !integral.is_finite() {
                    (
                        Status::Warn,
                        format!("declared rho exceeded by {excess:.3e}"),
                        rho_violation.at.clone(),
                        excess,
                    )
                } else {
                    (
                        Status::Pass,
                        format!("int rho^2 dnu_tilde = {integral:.6}"),
                        None,
                        excess.max(0.0),
                    )
                }
            }
        };
        checks.push(Check {
            id: CheckId::A3,
            status,
            worst,
            location,
            message,
        });
    }

    {
        let bound = declared(bounds.sup_c);
        let (status, message) = if exceeds(sup_c.value, bound) {
            (
                Status::Fail,
                format!("|c| = {} exceeds declared {:?}", sup_c.value, bound),
            )
        } else if bound.is_none() {
            (Status::Warn, "no sup-norm declared for c".into())
        } else {
            (
                Status::Pass,
                format!("sup |c| = {}, sampled Lipschitz {:.6}", sup_c.value, lip.discount),
            )
        };
        checks.push(Check {
            id: CheckId::A4,
            status,
            worst: sup_c.value,
            location: sup_c.at.clone(),
            message,
        });
    }

    {
        let mut status = Status::Pass;
        let mut notes = Vec::new();
        let mut location = None;
        for (name, sup, bound) in [
            ("f", &sup_f, declared(bounds.sup_f)),
            ("g", &sup_g, declared(bounds.sup_g)),
        ] {
            if exceeds(sup.value, bound) {
                status = Status::Fail;
                location = sup.at.clone();
                notes.push(format!("|{name}| = {} exceeds declared {:?}", sup.value, bound));
            } else if bound.is_none() {
                status = status.max(Status::Warn);
                notes.push(format!("no sup-norm declared for {name} (sampled {})", sup.value));
            }
        }
        for (name, est, bound) in [
            ("f", lip.running_cost, declared(bounds.lip_f)),
            ("g", lip.terminal, declared(bounds.lip_g)),
        ] {
            if exceeds(est, bound) {
                status = Status::Fail;
                notes.push(format!("Lipschitz({name}) = {est} exceeds declared {:?}", bound));
            } else if bound.is_none() {
                status = status.max(Status::Warn);
                notes.push(format!("no Lipschitz constant declared for {name}"));
            }
        }
        if notes.is_empty() {
            notes.push("f, g within declared bounds".into());
        }
        checks.push(Check {
            id: CheckId::A5,
            status,
            worst: sup_f.value.max(sup_g.value),
            location,
            message: notes.join("; "),
        });
    }

    {
        let scale = sup_b.value.powi(2).max(1.0);
        let (status, message) = if min_eig.value < -1e-9 * scale {
            (Status::Fail, "Sigma not positive semidefinite".to_string())
        } else if min_eig.value <= 1e-12 * scale {
            (Status::Warn, "Sigma degenerate in some z-direction".to_string())
        } else {
            (Status::Pass, format!("min eigenvalue of Sigma {:.6e}", min_eig.value))
        };
        checks.push(Check {
            id: CheckId::Ellipticity,
            status,
            worst: min_eig.value,
            location: min_eig.at.clone(),
            message,
        });
    }

    Ok(ValidationReport {
        checks,
        sampled_lipschitz: lip,
        ellipticity_estimate: min_eig.value,
        max_nu: max_nu.value,
        estimated_rho: rho_est,
        n_samples,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog::{build_catalog_model, ModelParams};
    use crate::model::MarkMeasure;

    fn unit_box() -> SamplingBox<f64> {
        SamplingBox::new((0.0, 1.0), vec![(-3.0, 3.0)], (0.0, 10.0))
    }

    #[test]
    fn cox_passes_a2() {
        let m: ModelSpec<f64> = build_catalog_model(
            "cox",
            &ModelParams::new()
                .with("lambda0", 1.0)
                .with("lambda_bump", 1.0)
                .with("lambda_bar", 2.0),
        )
        .unwrap();
        let r = validate_assumptions(&m, &unit_box(), 500, 7).unwrap();
        assert_eq!(r.check(CheckId::A2).status, Status::Pass);
        assert!(r.max_nu <= 1.0);
        assert_eq!(r.check(CheckId::A0).status, Status::Pass);
        assert_eq!(r.check(CheckId::A1).status, Status::Pass);
        assert_eq!(r.check(CheckId::A3).status, Status::Pass);
        assert_eq!(r.check(CheckId::Ellipticity).status, Status::Pass);
        // g = l has no declared sup-norm
        assert_eq!(r.check(CheckId::A5).status, Status::Warn);
    }

    #[test]
    fn degenerate_dispersion_warns() {
        let marks = MarkMeasure::point(1.0, 1.0).unwrap();
        let m = ModelSpec::builder(2, marks)
            .dispersion(|_, _, _, b: &mut [f64]| b.copy_from_slice(&[1.0, 0.0, 0.0, 0.0]))
            .build()
            .unwrap();
        let sb = SamplingBox::new((0.0, 1.0), vec![(-1.0, 1.0), (-1.0, 1.0)], (0.0, 1.0));
        let r = validate_assumptions(&m, &sb, 50, 1).unwrap();
        let e = r.check(CheckId::Ellipticity);
        assert_eq!(e.status, Status::Warn);
        assert_eq!(e.worst, 0.0);
    }

    #[test]
    fn ou_drift_lipschitz_equals_kappa() {
        let kappa = 1.7;
        let m: ModelSpec<f64> = build_catalog_model(
            "ou_modulated_cox",
            &ModelParams::new()
                .with("lambda0", 1.0)
                .with("lambda_bar", 1.0)
                .with("kappa", kappa)
                .with("theta", 0.3)
                .with("sigma", 0.5),
        )
        .unwrap();
        let r = validate_assumptions(&m, &unit_box(), 400, 3).unwrap();
        let est = r.sampled_lipschitz.drift;
        assert!((est - kappa).abs() <= 0.05 * kappa, "{est}");
    }

    #[test]
    fn nu_above_one_fails_a2_with_location() {
        let marks = MarkMeasure::point(1.0, 1.0).unwrap();
        let m = ModelSpec::builder(1, marks)
            .dispersion(|_, _, _, b: &mut [f64]| b[0] = 1.0)
            .nu_density(|_, z, _, _| if z[0] > 2.0 { 1.5 } else { 0.5 })
            .build()
            .unwrap();
        let r = validate_assumptions(&m, &unit_box(), 300, 11).unwrap();
        let a2 = r.check(CheckId::A2);
        assert_eq!(a2.status, Status::Fail);
        assert_eq!(a2.worst, 1.5);
        assert!(a2.location.as_ref().unwrap().z[0] > 2.0);
    }

    #[test]
    fn non_finite_coefficient_fails_a0() {
        let marks = MarkMeasure::point(1.0, 1.0).unwrap();
        let m = ModelSpec::builder(1, marks)
            .drift(|_, z, _, a: &mut [f64]| a[0] = 1.0 / (z[0] - z[0]))
            .build()
            .unwrap();
        let r = validate_assumptions(&m, &unit_box(), 10, 0).unwrap();
        assert_eq!(r.check(CheckId::A0).status, Status::Fail);
        assert!(r.check(CheckId::A0).location.is_some());
    }

    #[test]
    fn deterministic_in_seed() {
        let m: ModelSpec<f64> = build_catalog_model(
            "cox",
            &ModelParams::new()
                .with("lambda0", 1.0)
                .with("lambda_sat", 0.5)
                .with("lambda_bar", 2.0),
        )
        .unwrap();
        let a = validate_assumptions(&m, &unit_box(), 100, 5).unwrap();
        let b = validate_assumptions(&m, &unit_box(), 100, 5).unwrap();
        assert_eq!(a, b);
        assert!(validate_assumptions(&m, &unit_box(), 1, 5).is_err());
    }

    #[test]
    fn jacobi_eigenvalues() {
        let mut e = symmetric_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2);
        e.sort_by(f64::total_cmp);
        assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12);
        let mut e = symmetric_eigenvalues(&[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0], 3);
        e.sort_by(f64::total_cmp);
        // eigenvalues of the tridiagonal (4,3,2; 1,1): 3 - sqrt(3), 3, 3 + sqrt(3)
        assert!((e[0] - (3.0 - 3f64.sqrt())).abs() < 1e-10);
        assert!((e[1] - 3.0).abs() < 1e-10);
        assert!((e[2] - (3.0 + 3f64.sqrt())).abs() < 1e-10);
    }
}
