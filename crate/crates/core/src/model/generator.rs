//! Pointwise evaluation of the generator
//! `L phi = a . grad_z phi + 1/2 tr(Sigma D2_z phi) + sum_k w_k nu_k [phi(x + gamma_k) - phi(x)]`.

use crate::error::{Error, Result};
use crate::model::{ModelSpec, State};
use crate::scalar::Scalar;

/// A test function with supplied first and second z-derivatives.
pub trait TestFunction<T: Scalar>: Sync {
    fn dim_z(&self) -> usize;
    fn value(&self, z: &[T], l: T) -> T;
    fn gradient(&self, z: &[T], l: T, out: &mut [T]);
    /// Row-major d x d.
    fn hessian(&self, z: &[T], l: T, out: &mut [T]);
}

/// phi = constant.
#[derive(Debug, Clone, Copy)]
pub struct ConstantFn<T> {
    pub dim: usize,
    pub value: T,
}

impl<T: Scalar> TestFunction<T> for ConstantFn<T> {
    fn dim_z(&self) -> usize {
        self.dim
    }
    fn value(&self, _: &[T], _: T) -> T {
        self.value
    }
    fn gradient(&self, _: &[T], _: T, out: &mut [T]) {
        out.fill(T::zero());
    }
    fn hessian(&self, _: &[T], _: T, out: &mut [T]) {
        out.fill(T::zero());
    }
}

/// phi = l.
#[derive(Debug, Clone, Copy)]
pub struct LevelFn {
    pub dim: usize,
}

impl<T: Scalar> TestFunction<T> for LevelFn {
    fn dim_z(&self) -> usize {
        self.dim
    }
    fn value(&self, _: &[T], l: T) -> T {
        l
    }
    fn gradient(&self, _: &[T], _: T, out: &mut [T]) {
        out.fill(T::zero());
    }
    fn hessian(&self, _: &[T], _: T, out: &mut [T]) {
        out.fill(T::zero());
    }
}

/// phi = z_i.
#[derive(Debug, Clone, Copy)]
pub struct CoordinateFn {
    pub dim: usize,
    pub index: usize,
}

impl<T: Scalar> TestFunction<T> for CoordinateFn {
    fn dim_z(&self) -> usize {
        self.dim
    }
    fn value(&self, z: &[T], _: T) -> T {
        z[self.index]
    }
    fn gradient(&self, _: &[T], _: T, out: &mut [T]) {
        out.fill(T::zero());
        out[self.index] = T::one();
    }
    fn hessian(&self, _: &[T], _: T, out: &mut [T]) {
        out.fill(T::zero());
    }
}

type ValueFn<T> = Box<dyn Fn(&[T], T) -> T + Send + Sync>;
type DerivFn<T> = Box<dyn Fn(&[T], T, &mut [T]) + Send + Sync>;

/// Test function assembled from closures.
pub struct ClosureFn<T> {
    dim: usize,
    value: ValueFn<T>,
    gradient: DerivFn<T>,
    hessian: DerivFn<T>,
}

impl<T: Scalar> ClosureFn<T> {
    pub fn new(
        dim: usize,
        value: impl Fn(&[T], T) -> T + Send + Sync + 'static,
        gradient: impl Fn(&[T], T, &mut [T]) + Send + Sync + 'static,
        hessian: impl Fn(&[T], T, &mut [T]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            value: Box::new(value),
            gradient: Box::new(gradient),
            hessian: Box::new(hessian),
        }
    }
}

impl<T: Scalar> TestFunction<T> for ClosureFn<T> {
    fn dim_z(&self) -> usize {
        self.dim
    }
    fn value(&self, z: &[T], l: T) -> T {
        (self.value)(z, l)
    }
    fn gradient(&self, z: &[T], l: T, out: &mut [T]) {
        (self.gradient)(z, l, out)
    }
    fn hessian(&self, z: &[T], l: T, out: &mut [T]) {
        (self.hessian)(z, l, out)
    }
}

/// Drift and diffusion part only (the operator with l frozen).
pub fn apply_local_operator<T: Scalar>(
    model: &ModelSpec<T>,
    phi: &dyn TestFunction<T>,
    t: T,
    x: &State<T>,
) -> Result<T> {
    let d = model.dim_z();
    check_dims(model, phi, x)?;
    let mut a = vec![T::zero(); d];
    let mut grad = vec![T::zero(); d];
    let mut sigma = vec![T::zero(); d * d];
    let mut hess = vec![T::zero(); d * d];
    model.drift(t, &x.z, x.l, &mut a);
    model.covariance(t, &x.z, x.l, &mut sigma);
    phi.gradient(&x.z, x.l, &mut grad);
    phi.hessian(&x.z, x.l, &mut hess);
    let mut acc = T::zero();
    for i in 0..d {
        acc += a[i] * grad[i];
    }
    let half = T::lit(0.5);
    for (s, h) in sigma.iter().zip(&hess) {
        acc += half * *s * *h;
    }
    Ok(acc)
}

/// Full generator applied to `phi` at `(t, x)`; the jump integral is the
/// quadrature over the mark nodes.
pub fn apply_generator<T: Scalar>(model: &ModelSpec<T>, phi: &dyn TestFunction<T>, t: T, x: &State<T>) -> Result<T> {
    let local = apply_local_operator(model, phi, t, x)?;
    let d = model.dim_z();
    let marks = model.marks();
    let base = phi.value(&x.z, x.l);
    let mut gz = vec![T::zero(); d];
    let mut dest = vec![T::zero(); d];
    let mut jump = T::zero();
    for k in 0..marks.len() {
        let nu = model.nu(t, &x.z, x.l, k);
        if nu == T::zero() {
            continue;
        }
        model.jump_z(t, &x.z, x.l, k, &mut gz);
        let gl = model.jump_l(t, &x.z, x.l, k);
        for i in 0..d {
            dest[i] = x.z[i] + gz[i];
        }
        jump += marks.weight(k) * nu * (phi.value(&dest, x.l + gl) - base);
    }
    Ok(local + jump)
}

fn check_dims<T: Scalar>(model: &ModelSpec<T>, phi: &dyn TestFunction<T>, x: &State<T>) -> Result<()> {
    let d = model.dim_z();
    if phi.dim_z() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: phi.dim_z(),
        });
    }
    if x.z.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.z.len(),
        });
    }
    Ok(())
}
