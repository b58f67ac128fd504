use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::scalar::Scalar;

/// Uniform axis with `nodes` points including both endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis<T> {
    pub lo: T,
    pub hi: T,
    pub nodes: usize,
}

impl<T: Scalar> Axis<T> {
    pub fn new(lo: T, hi: T, nodes: usize) -> Self {
        Self { lo, hi, nodes }
    }

    /// Axis on `[lo, hi]` with spacing as close as possible to `step`.
    pub fn with_spacing(lo: T, hi: T, step: T) -> Self {
        let n = ((hi - lo) / step).round().to_f64_lossy().max(1.0) as usize + 1;
        Self { lo, hi, nodes: n }
    }

    pub fn spacing(&self) -> T {
        (self.hi - self.lo) / T::from_usize_lossy(self.nodes - 1)
    }

    pub fn node(&self, i: usize) -> T {
        self.lo + self.spacing() * T::from_usize_lossy(i)
    }
}

/// Discretization parameters. The l-axis covers `[l_lo, l_hi]` (the reported
/// range) and is extended by `jump_cap` maximal jumps in each direction a jump
/// can move l. The reported z-region is the central `interior_fraction` of each
/// z-axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T> {
    pub horizon: T,
    pub time_steps: usize,
    pub z_axes: Vec<Axis<T>>,
    pub l_lo: T,
    pub l_hi: T,
    pub dl: T,
    pub jump_cap: usize,
    pub interior_fraction: T,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(horizon: T, time_steps: usize, z_axes: Vec<Axis<T>>, l_range: (T, T), dl: T) -> Self {
        Self {
            horizon,
            time_steps,
            z_axes,
            l_lo: l_range.0,
            l_hi: l_range.1,
            dl,
            jump_cap: 24,
            interior_fraction: T::lit(0.5),
        }
    }

    pub fn with_jump_cap(mut self, cap: usize) -> Self {
        self.jump_cap = cap;
        self
    }

    pub fn with_interior_fraction(mut self, fraction: T) -> Self {
        self.interior_fraction = fraction;
        self
    }

    pub fn with_time_steps(mut self, steps: usize) -> Self {
        self.time_steps = steps;
        self
    }

    pub fn dt(&self) -> T {
        self.horizon / T::from_usize_lossy(self.time_steps)
    }

    /// Same box, every z spacing divided by `factor` (node counts scale as
    /// `(n - 1) * factor + 1`, so coarse nodes remain nodes).
    pub fn refine_z(&self, factor: usize) -> Self {
        let mut out = self.clone();
        for a in &mut out.z_axes {
            a.nodes = (a.nodes - 1) * factor + 1;
        }
        out
    }

    pub fn refine_t(&self, factor: usize) -> Self {
        self.clone().with_time_steps(self.time_steps * factor)
    }

    /// Box with every z-axis doubled in width around its centre, same spacing.
    pub fn double_z_box(&self) -> Self {
        let mut out = self.clone();
        let two = T::lit(2.0);
        for a in &mut out.z_axes {
            let half = (a.hi - a.lo) / two;
            a.lo -= half;
            a.hi += half;
            a.nodes = (a.nodes - 1) * 2 + 1;
        }
        out.interior_fraction = self.interior_fraction / two;
        out
    }

    fn check(&self, dim_z: usize) -> Result<()> {
        if self.z_axes.len() != dim_z {
            return Err(Error::DimensionMismatch {
                expected: dim_z,
                found: self.z_axes.len(),
            });
        }
        if !(1..=2).contains(&dim_z) {
            return Err(Error::InvalidArgument(format!(
                "the grid solver supports 1 or 2 z-dimensions, got {dim_z}"
            )));
        }
        if self.time_steps < 2 || !(self.horizon > T::zero()) {
            return Err(Error::InvalidArgument(
                "grid needs horizon > 0 and at least 2 time steps".into(),
            ));
        }
        for (k, a) in self.z_axes.iter().enumerate() {
            if a.nodes < 5 || !(a.hi > a.lo) {
                return Err(Error::InvalidArgument(format!(
                    "z-axis {k} needs hi > lo and at least 5 nodes"
                )));
            }
        }
        if !(self.dl > T::zero()) || self.l_hi < self.l_lo {
            return Err(Error::InvalidArgument("l-axis needs dl > 0 and l_hi >= l_lo".into()));
        }
        if !(self.interior_fraction > T::zero() && self.interior_fraction <= T::one()) {
            return Err(Error::InvalidArgument("interior_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Resolved node sets. Values are stored at `(ti * nl + li) * nz + zi` with
/// `zi = i0 + n0 * i1` in two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    pub spec: GridSpec<T>,
    pub times: Vec<T>,
    pub dt: T,
    pub z_nodes: Vec<Vec<T>>,
    pub dz: Vec<T>,
    pub l_nodes: Vec<T>,
    /// Reported l-range as inclusive node indices.
    pub l_reported: (usize, usize),
    /// Reported z-region as inclusive node indices per axis.
    pub z_interior: Vec<(usize, usize)>,
}

impl<T: Scalar> Grid<T> {
    pub fn build(spec: &GridSpec<T>, model: &ModelSpec<T>) -> Result<Self> {
        spec.check(model.dim_z())?;
        let m = spec.time_steps;
        let dt = spec.dt();
        let times: Vec<T> = (0..=m)
            .map(|i| {
                if i == m {
                    spec.horizon
                } else {
                    dt * T::from_usize_lossy(i)
                }
            })
            .collect();
        let z_nodes: Vec<Vec<T>> = spec
            .z_axes
            .iter()
            .map(|a| (0..a.nodes).map(|i| a.node(i)).collect())
            .collect();
        let dz: Vec<T> = spec.z_axes.iter().map(|a| a.spacing()).collect();
        let z_interior = spec
            .z_axes
            .iter()
            .map(|a| {
                let width = a.hi - a.lo;
                let margin = width * (T::one() - spec.interior_fraction) / T::lit(2.0);
                let h = a.spacing();
                let first = ((margin / h) - T::lit(1e-9)).ceil().to_f64_lossy() as usize;
                let last = a.nodes - 1 - first;
                (first.max(2), last.min(a.nodes - 3))
            })
            .collect();

        let (up, down) = max_l_jumps(spec, &z_nodes, model);
        let cap = T::from_usize_lossy(spec.jump_cap);
        let steps = |reach: T| -> usize {
            (cap * reach / spec.dl - T::lit(1e-9))
                .ceil()
                .max(T::zero())
                .to_f64_lossy() as usize
        };
        let (n_up, n_down) = (steps(up).max(1), steps(down).max(1));
        let n_rep = ((spec.l_hi - spec.l_lo) / spec.dl).round().to_f64_lossy() as usize;
        let l_nodes: Vec<T> = (0..n_down + n_rep + n_up + 1)
            .map(|k| spec.l_lo + spec.dl * (T::from_usize_lossy(k) - T::from_usize_lossy(n_down)))
            .collect();

        Ok(Self {
            spec: spec.clone(),
            times,
            dt,
            z_nodes,
            dz,
            l_nodes,
            l_reported: (n_down, n_down + n_rep),
            z_interior,
        })
    }

    pub fn dim(&self) -> usize {
        self.z_nodes.len()
    }

    pub fn nt(&self) -> usize {
        self.times.len()
    }

    pub fn nz(&self) -> usize {
        self.z_nodes.iter().map(Vec::len).product()
    }

    pub fn nl(&self) -> usize {
        self.l_nodes.len()
    }

    pub fn dl(&self) -> T {
        self.spec.dl
    }

    pub fn plane_len(&self) -> usize {
        self.nl() * self.nz()
    }

    pub fn index(&self, ti: usize, li: usize, zi: usize) -> usize {
        (ti * self.nl() + li) * self.nz() + zi
    }

    /// Per-axis indices of flat z-index `zi`.
    pub fn z_multi(&self, zi: usize) -> [usize; 2] {
        let n0 = self.z_nodes[0].len();
        [zi % n0, zi / n0]
    }

    pub fn z_flat(&self, multi: [usize; 2]) -> usize {
        multi[0] + self.z_nodes[0].len() * multi[1]
    }

    pub fn z_point(&self, zi: usize, out: &mut [T]) {
        let m = self.z_multi(zi);
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.z_nodes[k][m[k]];
        }
    }

    fn locate(nodes: &[T], x: T) -> Option<usize> {
        let h = nodes[1] - nodes[0];
        let pos = ((x - nodes[0]) / h).round();
        if pos < T::zero() {
            return None;
        }
        let i = pos.to_f64_lossy() as usize;
        if i < nodes.len() && (nodes[i] - x).abs() <= T::lit(1e-8) * h.abs() {
            Some(i)
        } else {
            None
        }
    }

    pub fn time_index(&self, t: T) -> Option<usize> {
        Self::locate(&self.times, t)
    }

    pub fn l_index(&self, l: T) -> Option<usize> {
        Self::locate(&self.l_nodes, l)
    }

    pub fn z_index(&self, z: &[T]) -> Option<usize> {
        if z.len() != self.dim() {
            return None;
        }
        let mut multi = [0usize; 2];
        for k in 0..z.len() {
            multi[k] = Self::locate(&self.z_nodes[k], z[k])?;
        }
        Some(self.z_flat(multi))
    }

    pub fn is_interior_z(&self, zi: usize) -> bool {
        let m = self.z_multi(zi);
        self.z_interior
            .iter()
            .enumerate()
            .all(|(k, &(a, b))| m[k] >= a && m[k] <= b)
    }

    pub fn is_reported_l(&self, li: usize) -> bool {
        li >= self.l_reported.0 && li <= self.l_reported.1
    }

    /// Flat z-indices of the reported interior region.
    pub fn interior_z_indices(&self) -> Vec<usize> {
        (0..self.nz()).filter(|&zi| self.is_interior_z(zi)).collect()
    }
}

/// Largest upward and downward l-jump over a sample of the grid.
fn max_l_jumps<T: Scalar>(spec: &GridSpec<T>, z_nodes: &[Vec<T>], model: &ModelSpec<T>) -> (T, T) {
    let (mut up, mut down) = (T::zero(), T::zero());
    let d = z_nodes.len();
    let n0 = z_nodes[0].len();
    let nz: usize = z_nodes.iter().map(Vec::len).product();
    let mut z = vec![T::zero(); d];
    let half = spec.horizon / T::lit(2.0);
    for t in [T::zero(), half, spec.horizon] {
        for zi in 0..nz {
            z[0] = z_nodes[0][zi % n0];
            if d == 2 {
                z[1] = z_nodes[1][zi / n0];
            }
            for l in [spec.l_lo, spec.l_hi] {
                for k in 0..model.marks().len() {
                    let j = model.jump_l(t, &z, l, k);
                    up = up.max(j);
                    down = down.max(-j);
                }
            }
        }
    }
    (up, down)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog::constant_cox;

    #[test]
    fn l_axis_extends_by_cap() {
        let m = constant_cox::<f64>(2.0, 2.0).unwrap();
        let spec = GridSpec::new(1.0, 10, vec![Axis::new(-1.0, 1.0, 11)], (0.0, 10.0), 1.0).with_jump_cap(20);
        let g = Grid::build(&spec, &m).unwrap();
        // one node below for safety, 20 above
        assert_eq!(g.l_reported, (1, 11));
        assert_eq!(g.nl(), 1 + 11 + 20);
        assert_eq!(g.l_nodes[g.l_reported.0], 0.0);
        assert_eq!(g.l_index(5.0), Some(6));
        assert_eq!(g.times[10], 1.0);
        assert_eq!(g.z_interior, vec![(3, 7)]);
    }

    #[test]
    fn lookups_reject_off_grid() {
        let m = constant_cox::<f64>(1.0, 1.0).unwrap();
        let spec = GridSpec::new(1.0, 10, vec![Axis::new(-1.0, 1.0, 21)], (0.0, 2.0), 0.5);
        let g = Grid::build(&spec, &m).unwrap();
        assert_eq!(g.z_index(&[0.3]), Some(13));
        assert_eq!(g.z_index(&[0.35]), None);
        assert_eq!(g.z_index(&[2.0]), None);
        assert_eq!(g.time_index(0.25), None);
        assert_eq!(g.time_index(0.3), Some(3));
    }

    #[test]
    fn refinement_keeps_coarse_nodes() {
        let a = Axis::new(-2.0, 2.0, 21);
        let spec = GridSpec::new(1.0, 10, vec![a], (0.0, 1.0), 1.0);
        let fine = spec.refine_z(2);
        assert_eq!(fine.z_axes[0].nodes, 41);
        assert_eq!(fine.z_axes[0].node(2), a.node(1));
        let doubled = spec.double_z_box();
        assert_eq!(doubled.z_axes[0].spacing(), a.spacing());
    }

    #[test]
    fn rejects_bad_specs() {
        let m = constant_cox::<f64>(1.0, 1.0).unwrap();
        let ok = GridSpec::new(1.0, 10, vec![Axis::new(-1.0, 1.0, 21)], (0.0, 2.0), 0.5);
        assert!(Grid::build(&ok, &m).is_ok());
        let mut bad = ok.clone();
        bad.z_axes.push(Axis::new(-1.0, 1.0, 21));
        assert!(matches!(Grid::build(&bad, &m), Err(Error::DimensionMismatch { .. })));
        let mut bad = ok.clone();
        bad.dl = 0.0;
        assert!(Grid::build(&bad, &m).is_err());
        assert!(Grid::build(&ok.clone().with_time_steps(1), &m).is_err());
    }
}
