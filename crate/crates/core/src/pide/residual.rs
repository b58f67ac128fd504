use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::scalar::{compensated_sum, Scalar};

use super::stencil::JumpOperator;
use super::PIDESolution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualStats<T> {
    pub max_abs: T,
    pub mean_abs: T,
    pub nodes: usize,
}

/// `v_t + L v - c v + f` on the interior nodes of a computed solution.
///
/// Time derivative: centered over `2Δt`. z-derivatives: centered over `2Δz`
/// (a wider stencil than the scheme's, so the residual sees the spatial
/// truncation error instead of reproducing the scheme). The jump term uses the
/// scheme's own interpolation.
pub fn pide_residual<T: Scalar>(sol: &PIDESolution<T>, model: &ModelSpec<T>) -> Result<ResidualStats<T>> {
    let grid = &sol.grid;
    let interior = grid.interior_z_indices();
    if grid.nt() < 3 || interior.is_empty() {
        return Err(Error::InvalidArgument(
            "residual needs at least 3 time levels and a nonempty interior".into(),
        ));
    }
    let d = grid.dim();
    let nz = grid.nz();
    let n0 = grid.z_nodes[0].len();
    let stride = [1usize, n0];
    let jumps = JumpOperator::new(model, grid);
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let per_level: Vec<(T, Vec<T>)> = (1..grid.nt() - 1)
        .into_par_iter()
        .map(|m| {
            let t = grid.times[m];
            let plane = sol.plane(m);
            let mut jump = vec![T::zero(); nz];
            let mut z = vec![T::zero(); d];
            let mut a = vec![T::zero(); d];
            let mut cov = vec![T::zero(); d * d];
            let mut worst = T::zero();
            let mut abs = Vec::new();
            for li in grid.l_reported.0..=grid.l_reported.1 {
                let l = grid.l_nodes[li];
                jumps.apply_full(m, li, plane, &mut jump);
                let at = |ti: usize, zi: usize| sol.values[grid.index(ti, li, zi)];
                for &zi in &interior {
                    grid.z_point(zi, &mut z);
                    model.drift(t, &z, l, &mut a);
                    model.covariance(t, &z, l, &mut cov);
                    let v = at(m, zi);
                    let mut r = (at(m + 1, zi) - at(m - 1, zi)) / (two * grid.dt);
                    for k in 0..d {
                        let h = grid.dz[k];
                        let (p, q) = (at(m, zi + 2 * stride[k]), at(m, zi - 2 * stride[k]));
                        r += a[k] * (p - q) / (T::lit(4.0) * h);
                        r += half * cov[k * d + k] * (p - two * v + q) / (T::lit(4.0) * h * h);
                    }
                    if d == 2 {
                        let s = 2 * n0;
                        let cross = (at(m, zi + 2 + s) - at(m, zi + 2 - s) - at(m, zi - 2 + s) + at(m, zi - 2 - s))
                            / (T::lit(16.0) * grid.dz[0] * grid.dz[1]);
                        r += cov[1] * cross;
                    }
                    r += jump[zi] - model.discount(t, &z, l) * v + model.running_cost(t, &z, l);
                    worst = worst.max(r.abs());
                    abs.push(r.abs());
                }
            }
            (worst, abs)
        })
        .collect();
    let max_abs = per_level.iter().fold(T::zero(), |m, p| m.max(p.0));
    let all: Vec<T> = per_level.into_iter().flat_map(|p| p.1).collect();
    let nodes = all.len();
    Ok(ResidualStats {
        max_abs,
        mean_abs: compensated_sum(&all) / T::from_usize_lossy(nodes),
        nodes,
    })
}

/// Observed order `log(r_coarse / r_fine) / log(ratio)` of the max residual.
pub fn residual_order<T: Scalar>(coarse: &ResidualStats<T>, fine: &ResidualStats<T>, ratio: T) -> T {
    (coarse.max_abs / fine.max_abs).ln() / ratio.ln()
}
