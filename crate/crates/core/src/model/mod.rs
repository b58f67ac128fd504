//! Model data types: the coefficient bundle of the generator, the discretised
//! reference mark measure, and the payoff triple (c, f, g).

pub mod catalog;
pub mod generator;
pub mod validate;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `(t, z, l) -> value`
pub type ScalarFn<T> = Arc<dyn Fn(T, &[T], T) -> T + Send + Sync>;
/// `(t, z, l, out)`
pub type VectorFn<T> = Arc<dyn Fn(T, &[T], T, &mut [T]) + Send + Sync>;
/// `(t, z, l, mark) -> value`
pub type MarkScalarFn<T> = Arc<dyn Fn(T, &[T], T, usize) -> T + Send + Sync>;
/// `(t, z, l, mark, out)`
pub type MarkVectorFn<T> = Arc<dyn Fn(T, &[T], T, usize, &mut [T]) + Send + Sync>;
/// `(z, l) -> value`
pub type TerminalFn<T> = Arc<dyn Fn(&[T], T) -> T + Send + Sync>;

/// Finite reference measure on the mark space, represented by weighted nodes.
///
/// Each node carries a numeric payload (e.g. the jump size it stands for).
#[derive(Debug, Clone, PartialEq)]
pub struct MarkMeasure<T> {
    payloads: Vec<T>,
    weights: Vec<T>,
    total_mass: T,
    cumulative: Vec<T>,
}

impl<T: Scalar> MarkMeasure<T> {
    pub fn new(payloads: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMarkMeasure("no nodes".into()));
        }
        if payloads.len() != weights.len() {
            return Err(Error::InvalidMarkMeasure(format!(
                "{} payloads for {} weights",
                payloads.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > T::zero())) {
            return Err(Error::InvalidMarkMeasure(format!(
                "weight {w} is not finite and positive"
            )));
        }
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = T::zero();
        for &w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        let total_mass = crate::scalar::compensated_sum(&weights);
        Ok(Self {
            payloads,
            weights,
            total_mass,
            cumulative,
        })
    }

    /// Single node of the given mass.
    pub fn point(payload: T, mass: T) -> Result<Self> {
        Self::new(vec![payload], vec![mass])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn payloads(&self) -> &[T] {
        &self.payloads
    }

    pub fn weight(&self, k: usize) -> T {
        self.weights[k]
    }

    pub fn payload(&self, k: usize) -> T {
        self.payloads[k]
    }

    /// lambda-tilde: jump rate under the reference measure.
    pub fn total_mass(&self) -> T {
        self.total_mass
    }

    /// Inverse-CDF draw of a node index from `w_k / total_mass`, `u` in [0, 1).
    pub fn sample_index(&self, u: T) -> usize {
        let target = u * *self.cumulative.last().unwrap();
        let idx = self.cumulative.partition_point(|&c| c <= target);
        idx.min(self.len() - 1)
    }
}

/// Sup-norms and Lipschitz constants a model declares about itself.
/// `None` means "not declared"; the validator then only reports observations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DeclaredBounds<T> {
    pub sup_b: Option<T>,
    pub sup_c: Option<T>,
    pub sup_f: Option<T>,
    pub sup_g: Option<T>,
    pub lip_a: Option<T>,
    pub lip_b: Option<T>,
    pub lip_f: Option<T>,
    pub lip_g: Option<T>,
}

/// Complete coefficient bundle of the generator plus the payoff data.
#[derive(Clone)]
pub struct ModelSpec<T> {
    name: String,
    dim_z: usize,
    drift: VectorFn<T>,
    dispersion: VectorFn<T>,
    jump_z: MarkVectorFn<T>,
    jump_l: MarkScalarFn<T>,
    nu_density: MarkScalarFn<T>,
    marks: MarkMeasure<T>,
    discount: ScalarFn<T>,
    running_cost: ScalarFn<T>,
    terminal: TerminalFn<T>,
    bounds: DeclaredBounds<T>,
    rho: Option<Vec<T>>,
    time_homogeneous: bool,
}

impl<T: Scalar> fmt::Debug for ModelSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("dim_z", &self.dim_z)
            .field("marks", &self.marks)
            .field("bounds", &self.bounds)
            .field("time_homogeneous", &self.time_homogeneous)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> ModelSpec<T> {
    /// Starts a model with zero drift, zero dispersion, no jumps in Z,
    /// unit jumps in L, nu = 1 and zero payoff data.
    pub fn builder(dim_z: usize, marks: MarkMeasure<T>) -> ModelBuilder<T> {
        ModelBuilder::new(dim_z, marks)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim_z(&self) -> usize {
        self.dim_z
    }

    pub fn marks(&self) -> &MarkMeasure<T> {
        &self.marks
    }

    pub fn lambda_tilde(&self) -> T {
        self.marks.total_mass()
    }

    pub fn bounds(&self) -> &DeclaredBounds<T> {
        &self.bounds
    }

    pub fn rho(&self) -> Option<&[T]> {
        self.rho.as_deref()
    }

    /// True when no coefficient depends on t; lets solvers cache stencils.
    pub fn is_time_homogeneous(&self) -> bool {
        self.time_homogeneous
    }

    #[inline]
    pub fn drift(&self, t: T, z: &[T], l: T, out: &mut [T]) {
        (self.drift)(t, z, l, out)
    }

    /// Row-major d x d matrix b.
    #[inline]
    pub fn dispersion(&self, t: T, z: &[T], l: T, out: &mut [T]) {
        (self.dispersion)(t, z, l, out)
    }

    /// Sigma = b b^T, row-major.
    pub fn covariance(&self, t: T, z: &[T], l: T, out: &mut [T]) {
        let d = self.dim_z;
        let mut b = vec![T::zero(); d * d];
        self.dispersion(t, z, l, &mut b);
        for i in 0..d {
            for j in 0..d {
                let mut s = T::zero();
                for k in 0..d {
                    s += b[i * d + k] * b[j * d + k];
                }
                out[i * d + j] = s;
            }
        }
    }

    #[inline]
    pub fn jump_z(&self, t: T, z: &[T], l: T, mark: usize, out: &mut [T]) {
        (self.jump_z)(t, z, l, mark, out)
    }

    #[inline]
    pub fn jump_l(&self, t: T, z: &[T], l: T, mark: usize) -> T {
        (self.jump_l)(t, z, l, mark)
    }

    /// Radon-Nikodym density of the physical jump measure w.r.t. the reference one.
    #[inline]
    pub fn nu(&self, t: T, z: &[T], l: T, mark: usize) -> T {
        (self.nu_density)(t, z, l, mark)
    }

    /// `sum_k w_k nu(t,z,l,u_k)`: the physical jump intensity.
    pub fn physical_intensity(&self, t: T, z: &[T], l: T) -> T {
        (0..self.marks.len())
            .map(|k| self.marks.weight(k) * self.nu(t, z, l, k))
            .sum()
    }

    /// `sum_k w_k (1 - nu(t,z,l,u_k))`: integrand of the density compensator.
    pub fn compensator_rate(&self, t: T, z: &[T], l: T) -> T {
        (0..self.marks.len())
            .map(|k| self.marks.weight(k) * (T::one() - self.nu(t, z, l, k)))
            .sum()
    }

    #[inline]
    pub fn discount(&self, t: T, z: &[T], l: T) -> T {
        (self.discount)(t, z, l)
    }

    #[inline]
    pub fn running_cost(&self, t: T, z: &[T], l: T) -> T {
        (self.running_cost)(t, z, l)
    }

    #[inline]
    pub fn terminal(&self, z: &[T], l: T) -> T {
        (self.terminal)(z, l)
    }

    /// Same dynamics with a different payoff triple.
    pub fn with_payoff(&self, discount: ScalarFn<T>, running_cost: ScalarFn<T>, terminal: TerminalFn<T>) -> Self {
        let mut m = self.clone();
        m.discount = discount;
        m.running_cost = running_cost;
        m.terminal = terminal;
        m.bounds.sup_c = None;
        m.bounds.sup_f = None;
        m.bounds.sup_g = None;
        m.bounds.lip_f = None;
        m.bounds.lip_g = None;
        m
    }
}

/// Builder for [`ModelSpec`]; every setter takes a closure.
pub struct ModelBuilder<T> {
    spec: ModelSpec<T>,
}

impl<T: Scalar> ModelBuilder<T> {
    fn new(dim_z: usize, marks: MarkMeasure<T>) -> Self {
        Self {
            spec: ModelSpec {
                name: "custom".to_string(),
                dim_z,
                drift: Arc::new(|_, _, _, out: &mut [T]| out.fill(T::zero())),
                dispersion: Arc::new(|_, _, _, out: &mut [T]| out.fill(T::zero())),
                jump_z: Arc::new(|_, _, _, _, out: &mut [T]| out.fill(T::zero())),
                jump_l: Arc::new(|_, _, _, _| T::one()),
                nu_density: Arc::new(|_, _, _, _| T::one()),
                marks,
                discount: Arc::new(|_, _, _| T::zero()),
                running_cost: Arc::new(|_, _, _| T::zero()),
                terminal: Arc::new(|_, _| T::zero()),
                bounds: DeclaredBounds::default(),
                rho: None,
                time_homogeneous: true,
            },
        }
    }

    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.spec.name = name.into();
        self
    }

    pub fn drift(mut self, f: impl Fn(T, &[T], T, &mut [T]) + Send + Sync + 'static) -> Self {
        self.spec.drift = Arc::new(f);
        self
    }

    pub fn dispersion(mut self, f: impl Fn(T, &[T], T, &mut [T]) + Send + Sync + 'static) -> Self {
        self.spec.dispersion = Arc::new(f);
        self
    }

    pub fn jump_z(mut self, f: impl Fn(T, &[T], T, usize, &mut [T]) + Send + Sync + 'static) -> Self {
        self.spec.jump_z = Arc::new(f);
        self
    }

    pub fn jump_l(mut self, f: impl Fn(T, &[T], T, usize) -> T + Send + Sync + 'static) -> Self {
        self.spec.jump_l = Arc::new(f);
        self
    }

    pub fn nu_density(mut self, f: impl Fn(T, &[T], T, usize) -> T + Send + Sync + 'static) -> Self {
        self.spec.nu_density = Arc::new(f);
        self
    }

    pub fn discount(mut self, f: impl Fn(T, &[T], T) -> T + Send + Sync + 'static) -> Self {
        self.spec.discount = Arc::new(f);
        self
    }

    pub fn running_cost(mut self, f: impl Fn(T, &[T], T) -> T + Send + Sync + 'static) -> Self {
        self.spec.running_cost = Arc::new(f);
        self
    }

    pub fn terminal(mut self, f: impl Fn(&[T], T) -> T + Send + Sync + 'static) -> Self {
        self.spec.terminal = Arc::new(f);
        self
    }

    pub fn bounds(mut self, bounds: DeclaredBounds<T>) -> Self {
        self.spec.bounds = bounds;
        self
    }

    pub fn rho(mut self, rho: Vec<T>) -> Self {
        self.spec.rho = Some(rho);
        self
    }

    pub fn time_homogeneous(mut self, yes: bool) -> Self {
        self.spec.time_homogeneous = yes;
        self
    }

    pub fn build(self) -> Result<ModelSpec<T>> {
        let s = &self.spec;
        if s.dim_z == 0 {
            return Err(Error::InvalidArgument("dim_z must be positive".into()));
        }
        if let Some(rho) = &s.rho {
            if rho.len() != s.marks.len() {
                return Err(Error::DimensionMismatch {
                    expected: s.marks.len(),
                    found: rho.len(),
                });
            }
        }
        Ok(self.spec)
    }
}

/// State x = (z, l).
#[derive(Debug, Clone, PartialEq)]
pub struct State<T> {
    pub z: Vec<T>,
    pub l: T,
}

impl<T: Scalar> State<T> {
    pub fn new(z: Vec<T>, l: T) -> Self {
        Self { z, l }
    }

    pub fn scalar(z: T, l: T) -> Self {
        Self { z: vec![z], l }
    }
}
