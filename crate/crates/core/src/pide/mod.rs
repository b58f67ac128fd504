//! Finite-difference solution of the backward equation
//!
//! ```text
//! v_t + L v - c v + f = 0,   v(T, z, l) = g(z, l)
//! ```
//!
//! on a `(t, z, l)` grid, either by the global fixed-point iteration over
//! frozen-source Cauchy problems or by a single IMEX sweep.
//!
//! The fixed-point iterates solve, for each l-node,
//! `psi_t + L_loc psi - (c + Λ) psi + J[v^n] + f = 0` where `Λ = Σ w ν` and
//! `J[v] = Σ w ν v(z + γZ, l + γL)`. This is the frozen problem with source
//! `F[v^n] + f` after moving the loss term `-Λ v` to the implicit side; it has
//! the same fixed point and contracts in sup-norm by at least `1 - e^{-λ̃T}`.

mod grid;
mod operator;
mod residual;
mod stencil;

use std::borrow::Cow;

use rayon::prelude::*;

pub use grid::{Axis, Grid, GridSpec};
pub use residual::{pide_residual, residual_order, ResidualStats};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::scalar::Scalar;
use operator::LocalOp;
use stencil::JumpOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    FixedPoint,
    Imex,
}

impl SolverMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverMode::FixedPoint => "fixed_point",
            SolverMode::Imex => "imex",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PIDESolution<T> {
    pub grid: Grid<T>,
    pub values: Vec<T>,
    pub mode: SolverMode,
    pub theta: T,
    pub iterations: usize,
    pub sup_norm_deltas: Vec<T>,
    pub converged: bool,
    pub residual: Option<ResidualStats<T>>,
    /// Jump destinations (node × mark, at t = 0) that fell outside the box.
    pub clamped_destinations: usize,
}

impl<T: Scalar> PIDESolution<T> {
    pub fn value(&self, ti: usize, li: usize, zi: usize) -> T {
        self.values[self.grid.index(ti, li, zi)]
    }

    /// Value at a grid node; anything else is rejected.
    pub fn value_at(&self, t: T, z: &[T], l: T) -> Result<T> {
        let (ti, li, zi) = self.node(t, z, l).ok_or_else(|| off_grid(t, z, l))?;
        Ok(self.value(ti, li, zi))
    }

    pub fn node(&self, t: T, z: &[T], l: T) -> Option<(usize, usize, usize)> {
        Some((self.grid.time_index(t)?, self.grid.l_index(l)?, self.grid.z_index(z)?))
    }

    /// Node indices of an interior probe (reported z-region, reported l-range,
    /// t < T).
    pub fn interior_node(&self, t: T, z: &[T], l: T) -> Result<(usize, usize, usize)> {
        match self.node(t, z, l) {
            Some((ti, li, zi))
                if ti + 1 < self.grid.nt() && self.grid.is_reported_l(li) && self.grid.is_interior_z(zi) =>
            {
                Ok((ti, li, zi))
            }
            _ => Err(off_grid(t, z, l)),
        }
    }

    /// Values at time index `ti` as an `(l, z)` plane.
    pub fn plane(&self, ti: usize) -> &[T] {
        let n = self.grid.plane_len();
        &self.values[ti * n..(ti + 1) * n]
    }

    /// Largest absolute value over the reported interior region.
    pub fn interior_sup(&self) -> T {
        let mut m = T::zero();
        for ti in 0..self.grid.nt() {
            for li in self.grid.l_reported.0..=self.grid.l_reported.1 {
                for zi in self.grid.interior_z_indices() {
                    m = m.max(self.value(ti, li, zi).abs());
                }
            }
        }
        m
    }
}

pub(crate) fn off_grid<T: Scalar>(t: T, z: &[T], l: T) -> Error {
    Error::ProbeOffGrid {
        t: t.to_f64_lossy(),
        z: z.iter().map(|v| v.to_f64_lossy()).collect(),
        l: l.to_f64_lossy(),
    }
}

fn check_theta<T: Scalar>(theta: T) -> Result<()> {
    if theta >= T::lit(0.5) && theta <= T::one() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("theta = {theta} outside [0.5, 1]")))
    }
}

/// Local operators per l-row, cached when the model is time-homogeneous.
struct OpCache<'a, T> {
    model: &'a ModelSpec<T>,
    grid: &'a Grid<T>,
    jumps: &'a JumpOperator<'a, T>,
    killed: bool,
    cached: Option<Vec<LocalOp<T>>>,
}

impl<'a, T: Scalar> OpCache<'a, T> {
    fn new(model: &'a ModelSpec<T>, grid: &'a Grid<T>, jumps: &'a JumpOperator<'a, T>, killed: bool) -> Self {
        let mut me = Self {
            model,
            grid,
            jumps,
            killed,
            cached: None,
        };
        if model.is_time_homogeneous() {
            let ops = (0..grid.nl()).into_par_iter().map(|li| me.build(0, li)).collect();
            me.cached = Some(ops);
        }
        me
    }

    fn build(&self, ti: usize, li: usize) -> LocalOp<T> {
        if self.killed {
            let mut kill = vec![T::zero(); self.grid.nz()];
            self.jumps.loss_rate(ti, li, &mut kill);
            LocalOp::assemble(self.model, self.grid, ti, li, Some(&kill))
        } else {
            LocalOp::assemble(self.model, self.grid, ti, li, None)
        }
    }

    fn get(&self, ti: usize, li: usize) -> Cow<'_, LocalOp<T>> {
        match &self.cached {
            Some(ops) => Cow::Borrowed(&ops[li]),
            None => Cow::Owned(self.build(ti, li)),
        }
    }
}

fn running_row<T: Scalar>(model: &ModelSpec<T>, grid: &Grid<T>, ti: usize, li: usize, out: &mut [T]) {
    let mut z = vec![T::zero(); grid.dim()];
    let (t, l) = (grid.times[ti], grid.l_nodes[li]);
    for (zi, o) in out.iter_mut().enumerate() {
        grid.z_point(zi, &mut z);
        *o = model.running_cost(t, &z, l);
    }
}

fn terminal_plane<T: Scalar>(model: &ModelSpec<T>, grid: &Grid<T>) -> Vec<T> {
    let nz = grid.nz();
    let mut z = vec![T::zero(); grid.dim()];
    let mut plane = vec![T::zero(); grid.plane_len()];
    for li in 0..grid.nl() {
        for zi in 0..nz {
            grid.z_point(zi, &mut z);
            plane[li * nz + zi] = model.terminal(&z, grid.l_nodes[li]);
        }
    }
    plane
}

/// Backward θ-march of one l-row: `out` holds `(t, z)` values, `source(ti, buf)`
/// fills the explicit source at time index `ti`.
fn march_row<T: Scalar, S>(
    grid: &Grid<T>,
    li: usize,
    theta: T,
    ops: &OpCache<'_, T>,
    terminal: &[T],
    mut source: S,
    out: &mut [T],
) -> Result<()>
where
    S: FnMut(usize, &mut [T]),
{
    let nz = grid.nz();
    let m_last = grid.nt() - 1;
    let dt = grid.dt;
    let explicit = (T::one() - theta) * dt;
    out[m_last * nz..].copy_from_slice(terminal);
    let mut src_next = vec![T::zero(); nz];
    let mut src_cur = vec![T::zero(); nz];
    let mut rhs = vec![T::zero(); nz];
    source(m_last, &mut src_next);
    let mut op_next = ops.get(m_last, li);
    for m in (0..m_last).rev() {
        let op_cur = ops.get(m, li);
        source(m, &mut src_cur);
        let (head, tail) = out.split_at_mut((m + 1) * nz);
        let next = &tail[..nz];
        op_next.axpy_apply(explicit, next, &mut rhs);
        for i in 0..nz {
            rhs[i] += dt * (theta * src_cur[i] + (T::one() - theta) * src_next[i]);
        }
        let x = &mut head[m * nz..];
        x.copy_from_slice(next);
        op_cur.solve_shifted(theta * dt, &rhs, x, grid.dim(), m)?;
        std::mem::swap(&mut src_cur, &mut src_next);
        op_next = op_cur;
    }
    Ok(())
}

/// Solves the frozen Cauchy problem `psi_t + L_loc psi - c psi + F = 0`,
/// `psi(T) = g(·, l)` on the l-row `li`. `source` is indexed `ti * nz + zi`.
pub fn solve_frozen_pde<T: Scalar>(
    model: &ModelSpec<T>,
    grid: &Grid<T>,
    li: usize,
    source: &[T],
    theta: T,
) -> Result<Vec<T>> {
    check_theta(theta)?;
    let nz = grid.nz();
    if li >= grid.nl() || source.len() != grid.nt() * nz {
        return Err(Error::InvalidArgument(
            "source must cover every (t, z) node of one l-row".into(),
        ));
    }
    let jumps = JumpOperator::new(model, grid);
    let ops = OpCache::new(model, grid, &jumps, false);
    let terminal = terminal_plane(model, grid);
    let mut out = vec![T::zero(); grid.nt() * nz];
    march_row(
        grid,
        li,
        theta,
        &ops,
        &terminal[li * nz..(li + 1) * nz],
        |ti, buf| buf.copy_from_slice(&source[ti * nz..(ti + 1) * nz]),
        &mut out,
    )?;
    Ok(out)
}

/// `F[phi]` on every node of the `(l, z)` plane at time `grid.times[ti]`.
pub fn apply_integral_operator<T: Scalar>(model: &ModelSpec<T>, grid: &Grid<T>, ti: usize, phi: &[T]) -> Vec<T> {
    let jumps = JumpOperator::new(model, grid);
    let nz = grid.nz();
    let mut out = vec![T::zero(); grid.plane_len()];
    out.par_chunks_mut(nz).enumerate().for_each(|(li, row)| {
        jumps.apply_full(ti, li, phi, row);
    });
    out
}

fn scatter<T: Scalar>(grid: &Grid<T>, rows: &[Vec<T>], values: &mut [T]) {
    let nz = grid.nz();
    for (li, row) in rows.iter().enumerate() {
        for ti in 0..grid.nt() {
            let at = grid.index(ti, li, 0);
            values[at..at + nz].copy_from_slice(&row[ti * nz..(ti + 1) * nz]);
        }
    }
}

/// Global fixed-point iteration, `v^0 = g` extended constantly in time.
/// Hitting `max_iter` returns the last iterate with `converged = false`.
pub fn solve_pide_fixed_point<T: Scalar>(
    model: &ModelSpec<T>,
    spec: &GridSpec<T>,
    tol: T,
    max_iter: usize,
    theta: T,
) -> Result<PIDESolution<T>> {
    check_theta(theta)?;
    if !(tol > T::zero()) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let grid = Grid::build(spec, model)?;
    let jumps = JumpOperator::new(model, &grid);
    let ops = OpCache::new(model, &grid, &jumps, true);
    let nz = grid.nz();
    let plane_len = grid.plane_len();
    let terminal = terminal_plane(model, &grid);
    let mut values: Vec<T> = terminal.iter().copied().cycle().take(grid.nt() * plane_len).collect();
    let mut deltas = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let prev = &values;
        let rows: Vec<Vec<T>> = (0..grid.nl())
            .into_par_iter()
            .map(|li| {
                let mut f = vec![T::zero(); nz];
                let mut row = vec![T::zero(); grid.nt() * nz];
                march_row(
                    &grid,
                    li,
                    theta,
                    &ops,
                    &terminal[li * nz..(li + 1) * nz],
                    |ti, buf| {
                        let plane = &prev[ti * plane_len..(ti + 1) * plane_len];
                        jumps.apply_gain(ti, li, plane, buf);
                        running_row(model, &grid, ti, li, &mut f);
                        for (b, fv) in buf.iter_mut().zip(&f) {
                            *b += *fv;
                        }
                    },
                    &mut row,
                )?;
                Ok(row)
            })
            .collect::<Result<_>>()?;
        let mut next = vec![T::zero(); values.len()];
        scatter(&grid, &rows, &mut next);
        let delta = next
            .par_iter()
            .zip(values.par_iter())
            .map(|(a, b)| (*a - *b).abs())
            .reduce(T::zero, T::max);
        values = next;
        deltas.push(delta);
        if !delta.is_finite() {
            return Err(Error::NonFiniteState {
                time: 0.0,
                what: format!("fixed-point delta at iteration {iterations}"),
            });
        }
        if delta <= tol {
            converged = true;
            break;
        }
    }
    let clamped = jumps.clamped(0);
    let mut sol = PIDESolution {
        grid,
        values,
        mode: SolverMode::FixedPoint,
        theta,
        iterations,
        sup_norm_deltas: deltas,
        converged,
        residual: None,
        clamped_destinations: clamped,
    };
    sol.residual = pide_residual(&sol, model).ok();
    Ok(sol)
}

/// Largest `nu` over the grid nodes (every time level unless time-homogeneous).
fn max_nu<T: Scalar>(model: &ModelSpec<T>, grid: &Grid<T>) -> T {
    let levels: Vec<usize> = if model.is_time_homogeneous() {
        vec![0]
    } else {
        (0..grid.nt()).collect()
    };
    levels
        .par_iter()
        .map(|&ti| {
            let mut z = vec![T::zero(); grid.dim()];
            let mut m = T::zero();
            for &l in &grid.l_nodes {
                for zi in 0..grid.nz() {
                    grid.z_point(zi, &mut z);
                    for k in 0..model.marks().len() {
                        m = m.max(model.nu(grid.times[ti], &z, l, k));
                    }
                }
            }
            m
        })
        .reduce(T::zero, T::max)
}

/// Single backward sweep: implicit local operator and discount, explicit
/// `F[v]` taken from the already computed later time level.
pub fn solve_pide_imex<T: Scalar>(model: &ModelSpec<T>, spec: &GridSpec<T>, theta: T) -> Result<PIDESolution<T>> {
    check_theta(theta)?;
    let grid = Grid::build(spec, model)?;
    let lambda = model.lambda_tilde();
    let nu_max = max_nu(model, &grid);
    let product = grid.dt * lambda * nu_max;
    if product > T::one() {
        let max_dt = T::one() / (lambda * nu_max);
        let min_steps = (spec.horizon / max_dt).ceil().to_f64_lossy() as usize;
        return Err(Error::StabilityBound {
            product: product.to_f64_lossy(),
            max_dt: max_dt.to_f64_lossy(),
            min_steps,
        });
    }
    let jumps = JumpOperator::new(model, &grid);
    let ops = OpCache::new(model, &grid, &jumps, false);
    let nz = grid.nz();
    let plane_len = grid.plane_len();
    let m_last = grid.nt() - 1;
    let dt = grid.dt;
    let explicit = (T::one() - theta) * dt;
    let mut values = vec![T::zero(); grid.nt() * plane_len];
    values[m_last * plane_len..].copy_from_slice(&terminal_plane(model, &grid));
    for m in (0..m_last).rev() {
        let (head, tail) = values.split_at_mut((m + 1) * plane_len);
        let next = &tail[..plane_len];
        let cur = &mut head[m * plane_len..];
        cur.par_chunks_mut(nz)
            .enumerate()
            .try_for_each(|(li, x)| -> Result<()> {
                let mut jump = vec![T::zero(); nz];
                let mut f_cur = vec![T::zero(); nz];
                let mut f_next = vec![T::zero(); nz];
                let mut rhs = vec![T::zero(); nz];
                jumps.apply_full(m + 1, li, next, &mut jump);
                running_row(model, &grid, m, li, &mut f_cur);
                running_row(model, &grid, m + 1, li, &mut f_next);
                let psi = &next[li * nz..(li + 1) * nz];
                ops.get(m + 1, li).axpy_apply(explicit, psi, &mut rhs);
                for i in 0..nz {
                    rhs[i] += dt * (jump[i] + theta * f_cur[i] + (T::one() - theta) * f_next[i]);
                }
                x.copy_from_slice(psi);
                ops.get(m, li).solve_shifted(theta * dt, &rhs, x, grid.dim(), m)
            })?;
    }
    let clamped = jumps.clamped(0);
    let mut sol = PIDESolution {
        grid,
        values,
        mode: SolverMode::Imex,
        theta,
        iterations: 1,
        sup_norm_deltas: Vec::new(),
        converged: true,
        residual: None,
        clamped_destinations: clamped,
    };
    sol.residual = pide_residual(&sol, model).ok();
    Ok(sol)
}

/// `(sup|g| + T sup|f|) e^{T sup|c|}` from the declared bounds, when all three
/// are declared.
pub fn comparison_bound<T: Scalar>(model: &ModelSpec<T>, horizon: T) -> Option<T> {
    let b = model.bounds();
    Some((b.sup_g? + horizon * b.sup_f?) * (horizon * b.sup_c?).exp())
}
