//! Local (drift + diffusion − killing) operator on one l-row and the implicit
//! solves of the θ-scheme.

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::scalar::Scalar;

use super::grid::Grid;

/// Sparse row operator: `(A x)_i = diag_i x_i + sum_j vals_j x_{cols_j}`.
#[derive(Debug, Clone)]
pub(crate) struct LocalOp<T> {
    pub diag: Vec<T>,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<T>,
}

impl<T: Scalar> LocalOp<T> {
    /// Upwind drift, central diffusion, central cross terms, minus `c + kill`.
    ///
    /// On a z-face the normal second derivative and the cross terms are dropped
    /// (linear extrapolation) and the normal drift is kept only when it points
    /// into the box, so off-diagonals stay nonnegative apart from cross terms.
    pub fn assemble(model: &ModelSpec<T>, grid: &Grid<T>, ti: usize, li: usize, kill: Option<&[T]>) -> Self {
        let d = grid.dim();
        let nz = grid.nz();
        let n0 = grid.z_nodes[0].len();
        let t = grid.times[ti];
        let l = grid.l_nodes[li];
        let half = T::lit(0.5);
        let mut z = vec![T::zero(); d];
        let mut a = vec![T::zero(); d];
        let mut cov = vec![T::zero(); d * d];
        let mut op = Self {
            diag: vec![T::zero(); nz],
            row_ptr: Vec::with_capacity(nz + 1),
            cols: Vec::with_capacity(nz * (2 * d + 4)),
            vals: Vec::with_capacity(nz * (2 * d + 4)),
        };
        op.row_ptr.push(0);
        let stride = [1usize, n0];
        for zi in 0..nz {
            grid.z_point(zi, &mut z);
            model.drift(t, &z, l, &mut a);
            model.covariance(t, &z, l, &mut cov);
            let m = grid.z_multi(zi);
            let mut diag = -model.discount(t, &z, l);
            if let Some(k) = kill {
                diag -= k[zi];
            }
            let mut interior_all = true;
            for k in 0..d {
                let n = grid.z_nodes[k].len();
                let h = grid.dz[k];
                let at_lo = m[k] == 0;
                let at_hi = m[k] == n - 1;
                interior_all &= !(at_lo || at_hi);
                if !(at_lo || at_hi) {
                    let dk = half * cov[k * d + k] / (h * h);
                    if dk != T::zero() {
                        op.cols.push(zi - stride[k]);
                        op.vals.push(dk);
                        op.cols.push(zi + stride[k]);
                        op.vals.push(dk);
                        diag -= dk + dk;
                    }
                }
                let ak = a[k] / h;
                if ak > T::zero() && !at_hi {
                    op.cols.push(zi + stride[k]);
                    op.vals.push(ak);
                    diag -= ak;
                } else if ak < T::zero() && !at_lo {
                    op.cols.push(zi - stride[k]);
                    op.vals.push(-ak);
                    diag += ak;
                }
            }
            if d == 2 && interior_all {
                let c01 = cov[1] / (T::lit(4.0) * grid.dz[0] * grid.dz[1]);
                if c01 != T::zero() {
                    for (s0, s1, sign) in [(1i64, 1i64, 1.0), (-1, -1, 1.0), (1, -1, -1.0), (-1, 1, -1.0)] {
                        let col = (zi as i64 + s0 + s1 * n0 as i64) as usize;
                        op.cols.push(col);
                        op.vals.push(c01 * T::lit(sign));
                    }
                }
            }
            op.diag[zi] = diag;
            op.row_ptr.push(op.cols.len());
        }
        op
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    /// `out = x + s * A x`
    pub fn axpy_apply(&self, s: T, x: &[T], out: &mut [T]) {
        for i in 0..self.len() {
            let mut acc = self.diag[i] * x[i];
            for j in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[j] * x[self.cols[j]];
            }
            out[i] = x[i] + s * acc;
        }
    }

    /// Solves `(I - s A) x = rhs` in place of `x` (which holds an initial guess).
    pub fn solve_shifted(&self, s: T, rhs: &[T], x: &mut [T], dim: usize, time_index: usize) -> Result<()> {
        if dim == 1 {
            self.thomas(s, rhs, x, time_index)
        } else {
            self.gauss_seidel(s, rhs, x, time_index)
        }
    }

    fn thomas(&self, s: T, rhs: &[T], x: &mut [T], time_index: usize) -> Result<()> {
        let n = self.len();
        let mut lower = vec![T::zero(); n];
        let mut upper = vec![T::zero(); n];
        let mut diag = vec![T::zero(); n];
        for i in 0..n {
            diag[i] = T::one() - s * self.diag[i];
            for j in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = -s * self.vals[j];
                if self.cols[j] + 1 == i {
                    lower[i] += c;
                } else {
                    upper[i] += c;
                }
            }
        }
        // forward sweep, reusing `upper` and `x` for the modified coefficients
        let mut beta = diag[0];
        if !(beta.abs() > T::zero()) || !beta.is_finite() {
            return Err(Error::SingularSystem { time_index, row: 0 });
        }
        x[0] = rhs[0] / beta;
        for i in 1..n {
            upper[i - 1] /= beta;
            beta = diag[i] - lower[i] * upper[i - 1];
            if !(beta.abs() > T::zero()) || !beta.is_finite() {
                return Err(Error::SingularSystem { time_index, row: i });
            }
            x[i] = (rhs[i] - lower[i] * x[i - 1]) / beta;
        }
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] -= upper[i] * next;
        }
        Ok(())
    }

    fn gauss_seidel(&self, s: T, rhs: &[T], x: &mut [T], time_index: usize) -> Result<()> {
        let n = self.len();
        let tol = T::lit(if T::epsilon() > T::lit(1e-10) { 1e-6 } else { 1e-14 });
        for _ in 0..50_000 {
            let mut change = T::zero();
            let mut scale = T::one();
            for i in 0..n {
                let d = T::one() - s * self.diag[i];
                if !(d.abs() > T::zero()) {
                    return Err(Error::SingularSystem { time_index, row: i });
                }
                let mut acc = rhs[i];
                for j in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += s * self.vals[j] * x[self.cols[j]];
                }
                let new = acc / d;
                change = change.max((new - x[i]).abs());
                scale = scale.max(new.abs());
                x[i] = new;
            }
            if !change.is_finite() {
                return Err(Error::SingularSystem { time_index, row: n });
            }
            if change <= tol * scale {
                return Ok(());
            }
        }
        Err(Error::SingularSystem { time_index, row: n })
    }
}
