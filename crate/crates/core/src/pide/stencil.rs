//! Jump part of the generator on the grid: for each node and mark, the
//! (clamped, multilinear) interpolation of the destination `(z + γZ, l + γL)`.

use crate::model::ModelSpec;
use crate::scalar::Scalar;

use super::grid::Grid;

#[derive(Debug, Clone, Copy)]
pub(crate) struct JumpTarget<T> {
    /// w_k * nu_k at the source node.
    pub weight: T,
    pub l0: usize,
    pub al: T,
    pub z0: [usize; 2],
    pub az: [T; 2],
}

/// Targets of every node in one l-row at one time level.
#[derive(Debug, Clone)]
pub(crate) struct JumpRow<T> {
    pub offsets: Vec<usize>,
    pub targets: Vec<JumpTarget<T>>,
    pub clamped: usize,
}

impl<T: Scalar> JumpRow<T> {
    pub fn build(model: &ModelSpec<T>, grid: &Grid<T>, t: T, li: usize) -> Self {
        let d = grid.dim();
        let nz = grid.nz();
        let marks = model.marks();
        let l = grid.l_nodes[li];
        let mut z = vec![T::zero(); d];
        let mut dz = vec![T::zero(); d];
        let mut offsets = Vec::with_capacity(nz + 1);
        let mut targets = Vec::with_capacity(nz * marks.len());
        let mut clamped = 0;
        offsets.push(0);
        for zi in 0..nz {
            grid.z_point(zi, &mut z);
            for k in 0..marks.len() {
                let weight = marks.weight(k) * model.nu(t, &z, l, k);
                if weight == T::zero() {
                    continue;
                }
                model.jump_z(t, &z, l, k, &mut dz);
                let gl = model.jump_l(t, &z, l, k);
                let (l0, al, c) = locate(&grid.l_nodes, l + gl);
                let mut hit = c;
                let mut z0 = [0usize; 2];
                let mut az = [T::zero(); 2];
                for i in 0..d {
                    let (i0, a, c) = locate(&grid.z_nodes[i], z[i] + dz[i]);
                    z0[i] = i0;
                    az[i] = a;
                    hit |= c;
                }
                clamped += usize::from(hit);
                targets.push(JumpTarget { weight, l0, al, z0, az });
            }
            offsets.push(targets.len());
        }
        Self {
            offsets,
            targets,
            clamped,
        }
    }

    pub fn node(&self, zi: usize) -> &[JumpTarget<T>] {
        &self.targets[self.offsets[zi]..self.offsets[zi + 1]]
    }
}

/// Lower node index, fraction in [0, 1] and whether `x` was clamped.
fn locate<T: Scalar>(nodes: &[T], x: T) -> (usize, T, bool) {
    let n = nodes.len();
    let h = nodes[1] - nodes[0];
    let pos = (x - nodes[0]) / h;
    let last = T::from_usize_lossy(n - 1);
    let tol = T::lit(1e-9);
    let clamped = pos < -tol || pos > last + tol;
    let pos = pos.max(T::zero()).min(last);
    let i0 = (pos.floor().to_f64_lossy() as usize).min(n - 2);
    let a = (pos - T::from_usize_lossy(i0)).max(T::zero()).min(T::one());
    (i0, a, clamped)
}

#[inline]
fn lerp<T: Scalar>(a: T, b: T, w: T) -> T {
    a + w * (b - a)
}

/// Interpolated value of the (l, z) plane at a jump target. Written as nested
/// `a + w (b - a)` so constants are reproduced exactly.
#[inline]
pub(crate) fn interpolate<T: Scalar>(plane: &[T], nz: usize, n0: usize, dim: usize, tg: &JumpTarget<T>) -> T {
    let row = |li: usize| -> T {
        let r = &plane[li * nz..(li + 1) * nz];
        if dim == 1 {
            lerp(r[tg.z0[0]], r[tg.z0[0] + 1], tg.az[0])
        } else {
            let i = tg.z0[0] + n0 * tg.z0[1];
            let lo = lerp(r[i], r[i + 1], tg.az[0]);
            let hi = lerp(r[i + n0], r[i + n0 + 1], tg.az[0]);
            lerp(lo, hi, tg.az[1])
        }
    };
    lerp(row(tg.l0), row(tg.l0 + 1), tg.al)
}

/// Jump rows for all l at one time, cached once for time-homogeneous models.
pub(crate) struct JumpOperator<'a, T> {
    model: &'a ModelSpec<T>,
    grid: &'a Grid<T>,
    cached: Option<Vec<JumpRow<T>>>,
}

impl<'a, T: Scalar> JumpOperator<'a, T> {
    pub fn new(model: &'a ModelSpec<T>, grid: &'a Grid<T>) -> Self {
        let cached = model.is_time_homogeneous().then(|| {
            use rayon::prelude::*;
            (0..grid.nl())
                .into_par_iter()
                .map(|li| JumpRow::build(model, grid, grid.times[0], li))
                .collect()
        });
        Self { model, grid, cached }
    }

    /// Row for `(ti, li)`; borrowed from the cache or built on the spot.
    pub fn row(&self, ti: usize, li: usize) -> std::borrow::Cow<'_, JumpRow<T>> {
        match &self.cached {
            Some(rows) => std::borrow::Cow::Borrowed(&rows[li]),
            None => std::borrow::Cow::Owned(JumpRow::build(self.model, self.grid, self.grid.times[ti], li)),
        }
    }

    /// Sum over marks of `w nu (phi(dest) - phi(node))` for every node of row `li`.
    pub fn apply_full(&self, ti: usize, li: usize, plane: &[T], out: &mut [T]) -> usize {
        let row = self.row(ti, li);
        let (nz, n0, dim) = (self.grid.nz(), self.grid.z_nodes[0].len(), self.grid.dim());
        for (zi, o) in out.iter_mut().enumerate() {
            let here = plane[li * nz + zi];
            let mut acc = T::zero();
            for tg in row.node(zi) {
                acc += tg.weight * (interpolate(plane, nz, n0, dim, tg) - here);
            }
            *o = acc;
        }
        row.clamped
    }

    /// Gain part only: sum over marks of `w nu phi(dest)`.
    pub fn apply_gain(&self, ti: usize, li: usize, plane: &[T], out: &mut [T]) {
        let row = self.row(ti, li);
        let (nz, n0, dim) = (self.grid.nz(), self.grid.z_nodes[0].len(), self.grid.dim());
        for (zi, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for tg in row.node(zi) {
                acc += tg.weight * interpolate(plane, nz, n0, dim, tg);
            }
            *o = acc;
        }
    }

    /// Total accepted intensity `sum_k w_k nu_k` on row `li`.
    pub fn loss_rate(&self, ti: usize, li: usize, out: &mut [T]) {
        let row = self.row(ti, li);
        for (zi, o) in out.iter_mut().enumerate() {
            *o = row.node(zi).iter().fold(T::zero(), |a, tg| a + tg.weight);
        }
    }

    pub fn clamped(&self, ti: usize) -> usize {
        (0..self.grid.nl()).map(|li| self.row(ti, li).clamped).sum()
    }
}
