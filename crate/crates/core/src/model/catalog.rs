//! Parameterised catalog models.
//!
//! Every catalog model has a one-dimensional modulating factor `Z` and a pure
//! jump component `L` whose intensity is `lambda(z)`, dominated by an explicit
//! bound `lambda_bar`. The reference mark measure has total mass `lambda_bar`
//! and the density is `nu = lambda(z) / lambda_bar`.
//!
//! The intensity family shared by all models is
//!
//! ```text
//! lambda(z) = lambda0 + lambda_bump / (1 + z^2)
//!                     + lambda_sat * z^2 / (1 + z^2)
//!                     + lambda_logit / (1 + exp(-z))
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{DeclaredBounds, MarkMeasure, ModelSpec};
use crate::scalar::Scalar;

pub const CATALOG_NAMES: [&str; 4] = ["cox", "compound_cox", "ou_modulated_cox", "joint_jump"];

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Number(f64),
    List(Vec<f64>),
    Text(String),
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Number(v)
    }
}

impl From<Vec<f64>> for ParamValue {
    fn from(v: Vec<f64>) -> Self {
        ParamValue::List(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Number(v) => write!(f, "{v}"),
            ParamValue::List(v) => write!(f, "{v:?}"),
            ParamValue::Text(s) => write!(f, "{s:?}"),
        }
    }
}

/// Named numeric parameters of a catalog model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelParams(pub BTreeMap<String, ParamValue>);

impl ModelParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl Into<ParamValue>) -> Self {
        self.0.insert(key.to_string(), value.into());
        self
    }

    pub fn set(&mut self, key: &str, value: impl Into<ParamValue>) {
        self.0.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&ParamValue> {
        self.0.get(key)
    }
}

/// Reads parameters while recording which keys were consumed.
struct Reader<'a> {
    model: &'a str,
    params: &'a ModelParams,
    used: BTreeSet<&'static str>,
}

impl<'a> Reader<'a> {
    fn new(model: &'a str, params: &'a ModelParams) -> Self {
        Self {
            model,
            params,
            used: BTreeSet::new(),
        }
    }

    fn optional(&mut self, key: &'static str) -> Result<Option<f64>> {
        self.used.insert(key);
        match self.params.get(key) {
            None => Ok(None),
            Some(ParamValue::Number(v)) if v.is_finite() => Ok(Some(*v)),
            Some(other) => Err(Error::InvalidParameter {
                key: key.into(),
                reason: format!("expected a finite number, got {other}"),
            }),
        }
    }

    fn number_or(&mut self, key: &'static str, default: f64) -> Result<f64> {
        Ok(self.optional(key)?.unwrap_or(default))
    }

    fn required(&mut self, key: &'static str) -> Result<f64> {
        self.optional(key)?.ok_or_else(|| Error::MissingParameter {
            model: self.model.into(),
            key: key.into(),
        })
    }

    fn positive(&mut self, key: &'static str) -> Result<f64> {
        let v = self.required(key)?;
        if v <= 0.0 {
            return Err(Error::InvalidParameter {
                key: key.into(),
                reason: format!("must be > 0, got {v}"),
            });
        }
        Ok(v)
    }

    fn positive_or(&mut self, key: &'static str, default: f64) -> Result<f64> {
        let v = self.number_or(key, default)?;
        if v <= 0.0 {
            return Err(Error::InvalidParameter {
                key: key.into(),
                reason: format!("must be > 0, got {v}"),
            });
        }
        Ok(v)
    }

    fn list(&mut self, key: &'static str) -> Result<Option<Vec<f64>>> {
        self.used.insert(key);
        match self.params.get(key) {
            None => Ok(None),
            Some(ParamValue::List(v)) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => Ok(Some(v.clone())),
            Some(ParamValue::Number(v)) if v.is_finite() => Ok(Some(vec![*v])),
            Some(other) => Err(Error::InvalidParameter {
                key: key.into(),
                reason: format!("expected a non-empty list of finite numbers, got {other}"),
            }),
        }
    }

    fn text(&mut self, key: &'static str) -> Result<Option<String>> {
        self.used.insert(key);
        match self.params.get(key) {
            None => Ok(None),
            Some(ParamValue::Text(s)) => Ok(Some(s.clone())),
            Some(other) => Err(Error::InvalidParameter {
                key: key.into(),
                reason: format!("expected a string, got {other}"),
            }),
        }
    }

    fn finish(self) -> Result<()> {
        for key in self.params.0.keys() {
            if !self.used.contains(key.as_str()) {
                return Err(Error::UnknownParameter {
                    model: self.model.into(),
                    key: key.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Coefficients of the intensity family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intensity {
    pub base: f64,
    pub bump: f64,
    pub saturating: f64,
    pub logistic: f64,
}

impl Intensity {
    pub fn constant(lambda: f64) -> Self {
        Self {
            base: lambda,
            bump: 0.0,
            saturating: 0.0,
            logistic: 0.0,
        }
    }

    pub fn eval<T: Scalar>(&self, z: T) -> T {
        let one = T::one();
        let z2 = z * z;
        let mut v = T::lit(self.base);
        if self.bump != 0.0 {
            v += T::lit(self.bump) / (one + z2);
        }
        if self.saturating != 0.0 {
            v += T::lit(self.saturating) * z2 / (one + z2);
        }
        if self.logistic != 0.0 {
            v += T::lit(self.logistic) / (one + (-z).exp());
        }
        v
    }

    /// Upper bound on |lambda'(z)|.
    pub fn lipschitz(&self) -> f64 {
        // max |d/dz 1/(1+z^2)| = 3 sqrt(3) / 8, attained at z = 1/sqrt(3)
        let rational = 3.0 * 3f64.sqrt() / 8.0;
        (self.bump.abs() + self.saturating.abs()) * rational + self.logistic.abs() / 4.0
    }

    fn read(r: &mut Reader<'_>) -> Result<Self> {
        Ok(Self {
            base: r.required("lambda0")?,
            bump: r.number_or("lambda_bump", 0.0)?,
            saturating: r.number_or("lambda_sat", 0.0)?,
            logistic: r.number_or("lambda_logit", 0.0)?,
        })
    }

    /// Samples z over a wide grid (plus far tails) and checks 0 <= lambda <= lambda_bar.
    fn check(&self, lambda_bar: f64) -> Result<()> {
        let mut zs: Vec<f64> = (-5000..=5000).map(|i| i as f64 * 0.01).collect();
        zs.extend([-1.0e6, -1.0e3, 1.0e3, 1.0e6]);
        for z in zs {
            let lam: f64 = self.eval(z);
            if !lam.is_finite() || lam < 0.0 {
                return Err(Error::InvalidParameter {
                    key: "lambda0".into(),
                    reason: format!("intensity lambda({z}) = {lam} is negative or non-finite"),
                });
            }
            if lam > lambda_bar * (1.0 + 1e-12) {
                return Err(Error::IntensityExceedsBound {
                    z,
                    lambda: lam,
                    lambda_bar,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerminalKind {
    /// g = value
    Constant(f64),
    /// g = l
    Level,
    /// g = |l - strike|
    AbsLevel(f64),
    /// g = z_1^2
    ZSquared,
    /// g = cos(z_1)
    CosZ,
    /// g = l + cos(z_1)
    LevelPlusCos,
}

impl TerminalKind {
    pub fn eval<T: Scalar>(&self, z: &[T], l: T) -> T {
        match *self {
            TerminalKind::Constant(v) => T::lit(v),
            TerminalKind::Level => l,
            TerminalKind::AbsLevel(k) => (l - T::lit(k)).abs(),
            TerminalKind::ZSquared => z[0] * z[0],
            TerminalKind::CosZ => z[0].cos(),
            TerminalKind::LevelPlusCos => l + z[0].cos(),
        }
    }

    fn sup_and_lipschitz(&self) -> (Option<f64>, Option<f64>) {
        match *self {
            TerminalKind::Constant(v) => (Some(v.abs()), Some(0.0)),
            TerminalKind::Level | TerminalKind::AbsLevel(_) => (None, Some(1.0)),
            TerminalKind::ZSquared => (None, None),
            TerminalKind::CosZ => (Some(1.0), Some(1.0)),
            TerminalKind::LevelPlusCos => (None, Some(2f64.sqrt())),
        }
    }
}

/// Discount, running cost and terminal payoff: `c = discount`,
/// `f = running + running_level * l`, `g` per [`TerminalKind`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payoff {
    pub discount: f64,
    pub running: f64,
    pub running_level: f64,
    pub terminal: TerminalKind,
}

impl Default for Payoff {
    fn default() -> Self {
        Self {
            discount: 0.0,
            running: 0.0,
            running_level: 0.0,
            terminal: TerminalKind::Level,
        }
    }
}

impl Payoff {
    fn read(r: &mut Reader<'_>) -> Result<Self> {
        let discount = r.number_or("discount", 0.0)?;
        let running = r.number_or("running", 0.0)?;
        let running_level = r.number_or("running_level", 0.0)?;
        let strike = r.optional("strike")?;
        let value = r.optional("payoff_value")?;
        let kind = r.text("payoff")?.unwrap_or_else(|| "level".to_string());
        let terminal = match kind.as_str() {
            "one" => TerminalKind::Constant(1.0),
            "constant" => TerminalKind::Constant(value.ok_or_else(|| Error::MissingParameter {
                model: r.model.into(),
                key: "payoff_value".into(),
            })?),
            "level" => TerminalKind::Level,
            "abs_level" => TerminalKind::AbsLevel(strike.ok_or_else(|| Error::MissingParameter {
                model: r.model.into(),
                key: "strike".into(),
            })?),
            "z_squared" => TerminalKind::ZSquared,
            "cos_z" => TerminalKind::CosZ,
            "level_plus_cos" => TerminalKind::LevelPlusCos,
            other => {
                return Err(Error::InvalidParameter {
                    key: "payoff".into(),
                    reason: format!(
                        "unknown payoff `{other}` (one, constant, level, abs_level, z_squared, cos_z, level_plus_cos)"
                    ),
                })
            }
        };
        Ok(Self {
            discount,
            running,
            running_level,
            terminal,
        })
    }

    fn apply<T: Scalar>(&self, builder: crate::model::ModelBuilder<T>) -> crate::model::ModelBuilder<T> {
        let c = T::lit(self.discount);
        let f0 = T::lit(self.running);
        let f1 = T::lit(self.running_level);
        let g = self.terminal;
        builder
            .discount(move |_, _, _| c)
            .running_cost(move |_, _, l| f0 + f1 * l)
            .terminal(move |z, l| g.eval(z, l))
    }
}

/// Jump-size distribution: `sizes[k]` with probability `probs[k]`.
fn read_jumps(r: &mut Reader<'_>, required: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let sizes = match r.list("jump_sizes")? {
        Some(s) => s,
        None if required => {
            return Err(Error::MissingParameter {
                model: r.model.into(),
                key: "jump_sizes".into(),
            })
        }
        None => vec![1.0],
    };
    let probs = match r.list("jump_probs")? {
        Some(p) => {
            if p.len() != sizes.len() {
                return Err(Error::InvalidParameter {
                    key: "jump_probs".into(),
                    reason: format!("{} probabilities for {} sizes", p.len(), sizes.len()),
                });
            }
            if p.iter().any(|&x| x <= 0.0) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter {
                    key: "jump_probs".into(),
                    reason: "must be positive and sum to 1".into(),
                });
            }
            p
        }
        None => vec![1.0 / sizes.len() as f64; sizes.len()],
    };
    Ok((sizes, probs))
}

struct Factor {
    kappa: f64,
    theta: f64,
    drift: f64,
    sigma: f64,
}

impl Factor {
    fn drift_at<T: Scalar>(&self, z: T) -> T {
        T::lit(self.drift) + T::lit(self.kappa) * (T::lit(self.theta) - z)
    }
}

/// Assembles a one-factor modulated model from its parts.
#[allow(clippy::too_many_arguments)]
fn assemble<T: Scalar>(
    name: &str,
    factor: Factor,
    intensity: Intensity,
    lambda_bar: f64,
    sizes: Vec<f64>,
    probs: Vec<f64>,
    eta: f64,
    payoff: Payoff,
) -> Result<ModelSpec<T>> {
    intensity.check(lambda_bar)?;
    let weights: Vec<T> = probs.iter().map(|p| T::lit(lambda_bar * p)).collect();
    let marks = MarkMeasure::new(sizes.iter().map(|&s| T::lit(s)).collect(), weights)?;

    let lip_nu = intensity.lipschitz() / lambda_bar;
    let rho: Vec<T> = sizes
        .iter()
        .map(|s| T::lit((eta.abs() + s.abs()).max(lip_nu)))
        .collect();
    let (sup_g, lip_g) = payoff.terminal.sup_and_lipschitz();
    let bounds = DeclaredBounds {
        sup_b: Some(T::lit(factor.sigma)),
        sup_c: Some(T::lit(payoff.discount.abs())),
        sup_f: (payoff.running_level == 0.0).then(|| T::lit(payoff.running.abs())),
        sup_g: sup_g.map(T::lit),
        lip_a: Some(T::lit(factor.kappa.abs())),
        lip_b: Some(T::zero()),
        lip_f: Some(T::lit(payoff.running_level.abs())),
        lip_g: lip_g.map(T::lit),
    };

    let sigma = T::lit(factor.sigma);
    let lbar = T::lit(lambda_bar);
    let eta_t = T::lit(eta);
    let sizes_t: Vec<T> = sizes.iter().map(|&s| T::lit(s)).collect();
    let builder = ModelSpec::builder(1, marks)
        .name(name)
        .drift(move |_, z, _, out| out[0] = factor.drift_at(z[0]))
        .dispersion(move |_, _, _, out| out[0] = sigma)
        .jump_z(move |_, _, _, _, out| out[0] = eta_t)
        .jump_l(move |_, _, _, k| sizes_t[k])
        .nu_density(move |_, z, _, _| intensity.eval(z[0]) / lbar)
        .bounds(bounds)
        .rho(rho)
        .time_homogeneous(true);
    payoff.apply(builder).build()
}

/// Builds a catalog model by name.
///
/// * `cox`: `lambda0`, `lambda_bar` required; optional `lambda_bump`,
///   `lambda_sat`, `lambda_logit`, `drift` (0), `sigma` (1). Unit jumps in L.
/// * `compound_cox`: as `cox` plus required `jump_sizes`, optional `jump_probs`.
/// * `ou_modulated_cox`: `kappa`, `theta`, `sigma` required; drift
///   `kappa (theta - z)`; optional `jump_sizes`/`jump_probs`.
/// * `joint_jump`: as `ou_modulated_cox` plus required `eta`, the jump of Z
///   at every event of L.
///
/// Every model also reads the payoff keys `payoff`, `strike`,
/// `payoff_value`, `discount`, `running`, `running_level`.
pub fn build_catalog_model<T: Scalar>(name: &str, params: &ModelParams) -> Result<ModelSpec<T>> {
    let mut r = Reader::new(name, params);
    let model = match name {
        "cox" | "compound_cox" => {
            let lambda_bar = r.positive("lambda_bar")?;
            let intensity = Intensity::read(&mut r)?;
            let factor = Factor {
                kappa: 0.0,
                theta: 0.0,
                drift: r.number_or("drift", 0.0)?,
                sigma: r.positive_or("sigma", 1.0)?,
            };
            let (sizes, probs) = if name == "cox" {
                (vec![1.0], vec![1.0])
            } else {
                read_jumps(&mut r, true)?
            };
            let payoff = Payoff::read(&mut r)?;
            r.finish()?;
            assemble(name, factor, intensity, lambda_bar, sizes, probs, 0.0, payoff)?
        }
        "ou_modulated_cox" | "joint_jump" => {
            let lambda_bar = r.positive("lambda_bar")?;
            let intensity = Intensity::read(&mut r)?;
            let factor = Factor {
                kappa: r.positive("kappa")?,
                theta: r.required("theta")?,
                drift: 0.0,
                sigma: r.positive("sigma")?,
            };
            let eta = if name == "joint_jump" {
                let eta = r.required("eta")?;
                if eta == 0.0 {
                    return Err(Error::InvalidParameter {
                        key: "eta".into(),
                        reason: "joint_jump needs a non-zero jump in Z".into(),
                    });
                }
                eta
            } else {
                0.0
            };
            let (sizes, probs) = read_jumps(&mut r, false)?;
            let payoff = Payoff::read(&mut r)?;
            r.finish()?;
            assemble(name, factor, intensity, lambda_bar, sizes, probs, eta, payoff)?
        }
        other => return Err(Error::UnknownModel(other.to_string())),
    };
    Ok(model)
}

/// Convenience: constant-intensity Cox model with the default payoff g = l.
pub fn constant_cox<T: Scalar>(lambda: f64, lambda_bar: f64) -> Result<ModelSpec<T>> {
    build_catalog_model(
        "cox",
        &ModelParams::new()
            .with("lambda0", lambda)
            .with("lambda_bar", lambda_bar),
    )
}

/// Replaces the payoff triple of any model with a catalog [`Payoff`].
pub fn with_catalog_payoff<T: Scalar>(model: &ModelSpec<T>, payoff: Payoff) -> ModelSpec<T> {
    let c = T::lit(payoff.discount);
    let f0 = T::lit(payoff.running);
    let f1 = T::lit(payoff.running_level);
    let g = payoff.terminal;
    model.with_payoff(
        Arc::new(move |_, _, _| c),
        Arc::new(move |_, _, l| f0 + f1 * l),
        Arc::new(move |z, l| g.eval(z, l)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cox(lambda0: f64, bump: f64, lambda_bar: f64) -> Result<ModelSpec<f64>> {
        build_catalog_model(
            "cox",
            &ModelParams::new()
                .with("lambda0", lambda0)
                .with("lambda_bump", bump)
                .with("lambda_bar", lambda_bar),
        )
    }

    #[test]
    fn constant_cox_is_reference_measure() {
        let m = cox(2.0, 0.0, 2.0).unwrap();
        assert_eq!(m.lambda_tilde(), 2.0);
        for z in [-3.0, 0.0, 1.5] {
            assert_eq!(m.nu(0.3, &[z], 4.0, 0), 1.0);
            assert_eq!(m.jump_l(0.3, &[z], 4.0, 0), 1.0);
            let mut gz = [9.0];
            m.jump_z(0.3, &[z], 4.0, 0, &mut gz);
            assert_eq!(gz[0], 0.0);
        }
    }

    #[test]
    fn state_dependent_cox_density_in_half_one() {
        let m = cox(1.0, 1.0, 2.0).unwrap();
        for i in -200..=200 {
            let z = i as f64 * 0.05;
            let nu = m.nu(0.0, &[z], 0.0, 0);
            assert!((nu - (1.0 + 1.0 / (1.0 + z * z)) / 2.0).abs() < 1e-15);
            assert!((0.5..=1.0).contains(&nu));
        }
        assert_eq!(m.nu(0.0, &[0.0], 0.0, 0), 1.0);
    }

    #[test]
    fn compound_cox_marks() {
        let m: ModelSpec<f64> = build_catalog_model(
            "compound_cox",
            &ModelParams::new()
                .with("lambda0", 2.0)
                .with("lambda_bar", 2.0)
                .with("jump_sizes", vec![0.5, 1.0, 1.5]),
        )
        .unwrap();
        let marks = m.marks();
        assert_eq!(marks.len(), 3);
        for &w in marks.weights() {
            assert!((w - 2.0 / 3.0).abs() < 1e-15);
        }
        assert!((marks.total_mass() - 2.0).abs() < 1e-15);
        assert_eq!(m.jump_l(0.0, &[0.0], 0.0, 2), 1.5);
    }

    #[test]
    fn ou_drift_and_joint_jumps() {
        let p = ModelParams::new()
            .with("lambda0", 0.5)
            .with("lambda_logit", 1.0)
            .with("lambda_bar", 1.5)
            .with("kappa", 2.0)
            .with("theta", 0.5)
            .with("sigma", 0.3);
        let ou: ModelSpec<f64> = build_catalog_model("ou_modulated_cox", &p).unwrap();
        let mut a = [0.0];
        ou.drift(0.0, &[1.5], 0.0, &mut a);
        assert_eq!(a[0], 2.0 * (0.5 - 1.5));
        let jj: ModelSpec<f64> = build_catalog_model("joint_jump", &p.with("eta", 0.25)).unwrap();
        let mut gz = [0.0];
        jj.jump_z(0.0, &[0.0], 0.0, 0, &mut gz);
        assert_eq!(gz[0], 0.25);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            build_catalog_model::<f64>("hawkes", &ModelParams::new()),
            Err(Error::UnknownModel(_))
        ));
        assert!(matches!(cox(2.0, 1.0, 2.0), Err(Error::IntensityExceedsBound { .. })));
        assert!(matches!(
            build_catalog_model::<f64>("cox", &ModelParams::new().with("lambda_bar", 1.0)),
            Err(Error::MissingParameter { .. })
        ));
        let bad_sigma = ModelParams::new()
            .with("lambda0", 1.0)
            .with("lambda_bar", 1.0)
            .with("sigma", -1.0);
        assert!(matches!(
            build_catalog_model::<f64>("cox", &bad_sigma),
            Err(Error::InvalidParameter { .. })
        ));
        let typo = ModelParams::new()
            .with("lambda0", 1.0)
            .with("lambda_bar", 1.0)
            .with("lambdabar", 1.0);
        assert!(matches!(
            build_catalog_model::<f64>("cox", &typo),
            Err(Error::UnknownParameter { .. })
        ));
    }

    #[test]
    fn intensity_lipschitz_bound_holds() {
        let lam = Intensity {
            base: 0.1,
            bump: 1.0,
            saturating: -0.5,
            logistic: 2.0,
        };
        let lip = lam.lipschitz();
        let h = 1e-6;
        for i in -400..=400 {
            let z = i as f64 * 0.01;
            let d = (lam.eval(z + h) - lam.eval(z - h)) / (2.0 * h);
            assert!(d.abs() <= lip + 1e-8);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let m: ModelSpec<f32> = constant_cox(1.0, 2.0).unwrap();
        assert_eq!(m.nu(0.0, &[0.0], 0.0, 0), 0.5f32);
    }
}
