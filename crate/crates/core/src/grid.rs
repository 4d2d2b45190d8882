//! Cell-centered square grids on `(0, L)²`.
//!
//! Cell `(iy, ix)` has its center at `((ix+½)h, (iy+½)h)` with `h = L/nx`.
//! Neumann boundaries are imposed with mirror ghosts: the ghost value beyond
//! a boundary face equals the adjacent interior cell, so the face flux is
//! zero. Cosine modes `cos(nπx/L)` sampled at cell centers are exact
//! eigenvectors of the resulting 5-point stencil.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    side: f64,
    nx: usize,
}

impl Grid {
    pub const MIN_CELLS: usize = 4;

    pub fn new(side: f64, nx: usize) -> Result<Self> {
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "side length must be positive, got {side}"
            )));
        }
        if nx < Self::MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "need at least {} cells per side, got {nx}",
                Self::MIN_CELLS
            )));
        }
        Ok(Grid { side, nx })
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn len(&self) -> usize {
        self.nx * self.nx
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.side / self.nx as f64
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    /// Center coordinate of cell `j` along either axis.
    pub fn center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.h()
    }

    pub fn index(&self, iy: usize, ix: usize) -> usize {
        iy * self.nx + ix
    }
}

/// Samples of a scalar function at the cell centers, row-major `(iy, ix)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite field value {bad}")));
        }
        Ok(Field { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Field {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f(x, y)` at every cell center.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for iy in 0..grid.nx() {
            let y = grid.center(iy);
            for ix in 0..grid.nx() {
                values.push(f(grid.center(ix), y));
            }
        }
        Field { grid, values }
    }

    /// Builds a field from a function of the cell index `(iy, ix)`.
    pub fn from_fn_indexed(grid: Grid, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let nx = grid.nx();
        let values = (0..grid.len()).map(|k| f(k / nx, k % nx)).collect();
        Field { grid, values }
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, iy: usize, ix: usize) -> f64 {
        self.values[self.grid.index(iy, ix)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.values) / self.values.len() as f64
    }

    pub fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `alpha·self + beta·other`.
    pub fn lin_comb(&self, alpha: f64, other: &Field, beta: f64) -> Result<Field> {
        self.ensure_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        self.ensure_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Writes the mirror-ghost Neumann Laplacian of `src` into `dst`.
pub(crate) fn laplacian_into(nx: usize, h: f64, src: &[f64], dst: &mut [f64]) {
    let inv_h2 = 1.0 / (h * h);
    for iy in 0..nx {
        let row = iy * nx;
        let north = if iy + 1 < nx { row + nx } else { row };
        let south = if iy > 0 { row - nx } else { row };
        for ix in 0..nx {
            let c = src[row + ix];
            let e = if ix + 1 < nx { src[row + ix + 1] } else { c };
            let w = if ix > 0 { src[row + ix - 1] } else { c };
            let n = src[north + ix];
            let s = src[south + ix];
            dst[row + ix] = (e + w + n + s - 4.0 * c) * inv_h2;
        }
    }
}

pub fn laplacian_neumann(f: &Field) -> Field {
    let mut out = vec![0.0; f.values.len()];
    laplacian_into(f.grid.nx, f.grid.h(), &f.values, &mut out);
    Field {
        grid: f.grid,
        values: out,
    }
}

/// Eigenvalue of the discrete 1-D Neumann second difference for mode `n`:
/// `−(2/h²)(1 − cos(nπh/L))`.
pub fn discrete_mode_eigenvalue(grid: &Grid, n: usize) -> f64 {
    let h = grid.h();
    -(2.0 / (h * h)) * (1.0 - (n as f64 * std::f64::consts::PI * h / grid.side()).cos())
}

/// Midpoint-rule integral over the domain.
pub fn integrate(f: &Field) -> f64 {
    let h = f.grid.h();
    h * h * pairwise_sum(&f.values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Linf,
    L2,
    H1Semi,
}

pub fn norm(f: &Field, kind: NormKind) -> f64 {
    let grid = f.grid;
    let h = grid.h();
    let v = &f.values;
    match kind {
        NormKind::Linf => v.iter().fold(0.0, |m, x| f64::max(m, x.abs())),
        NormKind::L2 => (h * h * pairwise_sum_by(v.len(), |k| v[k] * v[k])).sqrt(),
        NormKind::H1Semi => {
            // h²·(Δ/h)² = Δ²; the far-boundary difference against the mirror
            // ghost is zero.
            let nx = grid.nx;
            let sum = pairwise_sum_by(v.len(), |k| {
                let (iy, ix) = (k / nx, k % nx);
                let dx = if ix + 1 < nx { v[k + 1] - v[k] } else { 0.0 };
                let dy = if iy + 1 < nx { v[k + nx] - v[k] } else { 0.0 };
                dx * dx + dy * dy
            });
            sum.sqrt()
        }
    }
}

const PAIRWISE_BLOCK: usize = 32;

/// Pairwise (cascade) summation with a fixed split, so results do not depend
/// on anything but the input order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    pairwise_sum_by(values.len(), |k| values[k])
}

pub(crate) fn pairwise_sum_by(len: usize, term: impl Fn(usize) -> f64) -> f64 {
    fn go(lo: usize, hi: usize, term: &impl Fn(usize) -> f64) -> f64 {
        if hi - lo <= PAIRWISE_BLOCK {
            (lo..hi).map(term).sum()
        } else {
            let mid = lo + (hi - lo) / 2;
            go(lo, mid, term) + go(mid, hi, term)
        }
    }
    go(0, len, &term)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(nx: usize) -> Grid {
        Grid::new(5.0, nx).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(5.0, 3).is_err());
        assert!(Grid::new(0.0, 8).is_err());
        assert!(Grid::new(f64::NAN, 8).is_err());
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let f = Field::constant(grid(8), 3.7);
        assert!(laplacian_neumann(&f).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cosine_modes_are_discrete_eigenvectors() {
        let g = grid(16);
        for n in 0..16 {
            let f = Field::from_fn(g, |x, _| (n as f64 * PI * x / g.side()).cos());
            let mu = discrete_mode_eigenvalue(&g, n);
            let lap = laplacian_neumann(&f);
            for (l, v) in lap.values().iter().zip(f.values()) {
                assert!((l - mu * v).abs() <= 1e-10 * mu.abs().max(1.0), "mode {n}");
            }
        }
    }

    #[test]
    fn quadrature_examples() {
        assert_relative_eq!(
            integrate(&Field::constant(grid(8), 1.0)),
            25.0,
            epsilon = 1e-12
        );
        for nx in [5, 16, 33] {
            let g = grid(nx);
            let (s, i, r) = crate::integrator::gaussian_bump_fields(&g);
            let total = integrate(&s) + integrate(&i) + integrate(&r);
            assert_relative_eq!(total, 25.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn norm_examples() {
        let g = grid(10);
        let c = Field::constant(g, -2.0);
        assert_relative_eq!(norm(&c, NormKind::Linf), 2.0);
        assert_relative_eq!(norm(&c, NormKind::L2), 10.0, epsilon = 1e-12);
        assert_eq!(norm(&c, NormKind::H1Semi), 0.0);

        let z = Field::zeros(g);
        for kind in [NormKind::Linf, NormKind::L2, NormKind::H1Semi] {
            assert_eq!(norm(&z, kind), 0.0);
        }
    }

    #[test]
    fn l2_of_cosine_approaches_continuum() {
        let target = 5.0 / 2f64.sqrt();
        let errors: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&nx| {
                let g = grid(nx);
                let f = Field::from_fn(g, |x, _| (PI * x / g.side()).cos());
                (norm(&f, NormKind::L2) - target).abs()
            })
            .collect();
        // Midpoint sums of cos² are exact at cell centers.
        assert!(errors.iter().all(|&e| e < 1e-12), "{errors:?}");
    }

    #[test]
    fn stencil_converges_at_second_order() {
        let exact = |g: &Grid, x: f64, y: f64| {
            let k = PI / g.side();
            -(k * k + 4.0 * k * k) * (k * x).cos() * (2.0 * k * y).cos()
        };
        let errs: Vec<f64> = [16, 32, 64, 128]
            .iter()
            .map(|&nx| {
                let g = grid(nx);
                let k = PI / g.side();
                let f = Field::from_fn(g, |x, y| (k * x).cos() * (2.0 * k * y).cos());
                let want = Field::from_fn(g, |x, y| exact(&g, x, y));
                laplacian_neumann(&f).max_abs_diff(&want).unwrap()
            })
            .collect();
        for pair in errs.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!((1.8..=2.2).contains(&order), "order {order} from {errs:?}");
        }
    }

    #[test]
    fn mismatched_grids_do_not_mix() {
        let a = Field::zeros(grid(8));
        let b = Field::zeros(grid(9));
        assert_eq!(a.lin_comb(1.0, &b, 1.0), Err(Error::GridMismatch));
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let v: Vec<f64> = (0..1000).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
    }

    fn field_strategy() -> impl Strategy<Value = Field> {
        (4usize..20).prop_flat_map(|nx| {
            proptest::collection::vec(-10.0..10.0f64, nx * nx)
                .prop_map(move |v| Field::from_values(grid(nx), v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn laplacian_conserves_mass(f in field_strategy()) {
            let h = f.grid().h();
            let total = integrate(&laplacian_neumann(&f));
            let scale = norm(&f, NormKind::Linf).max(1.0) / (h * h);
            prop_assert!(total.abs() <= 1e-12 * scale);
        }

        #[test]
        fn laplacian_is_linear(f in field_strategy(), alpha in -3.0..3.0f64, beta in -3.0..3.0f64) {
            let g = Field::from_fn(*f.grid(), |x, y| (x * y).sin());
            let lhs = laplacian_neumann(&f.lin_comb(alpha, &g, beta).unwrap());
            let rhs = laplacian_neumann(&f).lin_comb(alpha, &laplacian_neumann(&g), beta).unwrap();
            let scale = norm(&lhs, NormKind::Linf).max(1.0);
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-12 * scale);
        }

        #[test]
        fn integration_is_linear(f in field_strategy(), alpha in -3.0..3.0f64) {
            let g = Field::constant(*f.grid(), 1.5);
            let combined = integrate(&f.lin_comb(alpha, &g, 2.0).unwrap());
            let split = alpha * integrate(&f) + 2.0 * integrate(&g);
            prop_assert!((combined - split).abs() <= 1e-10 * (1.0 + split.abs()));
        }
    }
}
