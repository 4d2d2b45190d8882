//! Closed-form solution of the infection-free (β = 0) system on `(0, L)²`.
//!
//! With `S̄ = (S − b/ν)e^{νt}`, `Ī = e^{(γ+ν)t} I` and `R̄ = e^{νt} R` the
//! system decouples into three heat equations, the last one forced by
//! `γ e^{−γt} Ī`. Each is solved mode by mode in the Neumann cosine basis
//! `cos(nπx/L)·cos(mπy/L)` with wavenumber `k² = π²(n² + m²)/L²`.
//!
//! Coefficients use the normalization `ε_n ε_m / L²` (`ε_0 = 1`, `ε_k = 2`)
//! so that a constant field maps to itself in mode `(0, 0)`.
//!
//! The forced R̄ coefficient is `e = −γL²d / (γL² + π²(n² + m²)(χ_I − χ_R))`.
//! This is the particular solution of
//! `ρ' = −χ_R k² ρ + γ d e^{−(γ + χ_I k²)t}`; the same expression without the
//! minus sign does not satisfy the mode equation.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::integrator::State;
use crate::kinetics::{Params, SirPoint};

/// Relative size of `γ + (χ_I − χ_R)k²` below which an R mode is resonant.
pub const RESONANCE_TOL: f64 = 1e-10;

/// Table of cosine coefficients indexed `(n, m)`, `n` along x.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineCoeffs {
    nmax: usize,
    table: Vec<f64>,
}

impl CosineCoeffs {
    pub fn zeros(nmax: usize) -> Self {
        CosineCoeffs {
            nmax,
            table: vec![0.0; (nmax + 1) * (nmax + 1)],
        }
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.table[n * (self.nmax + 1) + m]
    }

    fn set(&mut self, n: usize, m: usize, v: f64) {
        self.table[n * (self.nmax + 1) + m] = v;
    }

    /// Iterates `(n, m, value)` in n-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let w = self.nmax + 1;
        self.table
            .iter()
            .enumerate()
            .map(move |(k, &v)| (k / w, k % w, v))
    }
}

fn epsilon(n: usize) -> f64 {
    if n == 0 {
        1.0
    } else {
        2.0
    }
}

/// `table[n][j] = cos(nπ x_j / L)` at the grid's cell centers.
fn cosine_table(grid: &Grid, nmax: usize) -> Vec<Vec<f64>> {
    (0..=nmax)
        .map(|n| {
            (0..grid.nx())
                .map(|j| (n as f64 * PI * grid.center(j) / grid.side()).cos())
                .collect()
        })
        .collect()
}

/// Discrete cosine transform of `field` by midpoint sums at cell centers.
pub fn cosine_coefficients(field: &Field, nmax: usize) -> Result<CosineCoeffs> {
    let grid = field.grid();
    let nx = grid.nx();
    if nmax >= nx {
        return Err(Error::Precondition(format!(
            "nmax = {nmax} exceeds nx - 1 = {}",
            nx - 1
        )));
    }
    let cos = cosine_table(grid, nmax);
    let v = field.values();

    // Contract x first: rows[iy][n] = Σ_ix f(iy, ix) cos_n(x_ix).
    let rows: Vec<Vec<f64>> = (0..nx)
        .map(|iy| {
            let row = &v[iy * nx..(iy + 1) * nx];
            cos.iter()
                .map(|cn| row.iter().zip(cn).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();

    let inv_cells = 1.0 / (nx * nx) as f64; // h²/L²
    let mut out = CosineCoeffs::zeros(nmax);
    for n in 0..=nmax {
        for (m, cm) in cos.iter().enumerate() {
            let sum: f64 = rows.iter().zip(cm).map(|(row, c)| row[n] * c).sum();
            out.set(n, m, epsilon(n) * epsilon(m) * inv_cells * sum);
        }
    }
    Ok(out)
}

/// Evaluates `Σ a(n,m) cos(nπx/L) cos(mπy/L)` at every cell center of `grid`.
pub fn cosine_synthesis(coeffs: &CosineCoeffs, grid: &Grid) -> Field {
    let nx = grid.nx();
    let nmax = coeffs.nmax();
    let cos = cosine_table(grid, nmax);
    // cols[n][iy] = Σ_m a(n,m) cos_m(y_iy)
    let cols: Vec<Vec<f64>> = (0..=nmax)
        .map(|n| {
            (0..nx)
                .map(|iy| (0..=nmax).map(|m| coeffs.get(n, m) * cos[m][iy]).sum())
                .collect()
        })
        .collect();
    Field::from_fn_indexed(*grid, |iy, ix| {
        (0..=nmax).map(|n| cols[n][iy] * cos[n][ix]).sum()
    })
}

/// The infection-free solution in separated form.
#[derive(Debug, Clone, PartialEq)]
pub struct InfectionFreeSolution {
    params: Params,
    side: f64,
    /// Coefficients of `S̄(0) = S0 − b/ν`.
    pub c: CosineCoeffs,
    /// Coefficients of `I0`.
    pub d: CosineCoeffs,
    /// Forced R̄ modes, decaying like `e^{−(χ_I k² + γ)t}`. Opposite in sign
    /// to `d` whenever `γ + (χ_I − χ_R)k² > 0`.
    pub e: CosineCoeffs,
    /// Free R̄ modes, decaying like `e^{−χ_R k² t}`.
    pub f: CosineCoeffs,
    resonant: Vec<(usize, usize)>,
}

pub fn build_infection_free(
    s0: &Field,
    i0: &Field,
    r0: &Field,
    p: &Params,
    nmax: usize,
) -> Result<InfectionFreeSolution> {
    s0.ensure_same_grid(i0)?;
    s0.ensure_same_grid(r0)?;
    let grid = *s0.grid();
    let side = grid.side();

    let shifted = Field::from_values(grid, s0.values().iter().map(|v| v - p.b / p.nu).collect())?;
    let c = cosine_coefficients(&shifted, nmax)?;
    let d = cosine_coefficients(i0, nmax)?;
    let r_hat = cosine_coefficients(r0, nmax)?;

    let mut e = CosineCoeffs::zeros(nmax);
    let mut f = CosineCoeffs::zeros(nmax);
    let mut resonant = Vec::new();
    let dchi = p.chi_i - p.chi_r;
    for n in 0..=nmax {
        for m in 0..=nmax {
            let modes = (n * n + m * m) as f64;
            let k2 = PI * PI * modes / (side * side);
            if (p.gamma + dchi * k2).abs() > RESONANCE_TOL * p.gamma {
                let denom = p.gamma * side * side + PI * PI * modes * dchi;
                let enm = -p.gamma * side * side * d.get(n, m) / denom;
                e.set(n, m, enm);
                f.set(n, m, r_hat.get(n, m) - enm);
            } else {
                resonant.push((n, m));
                f.set(n, m, r_hat.get(n, m));
            }
        }
    }
    Ok(InfectionFreeSolution {
        params: *p,
        side,
        c,
        d,
        e,
        f,
        resonant,
    })
}

impl InfectionFreeSolution {
    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn nmax(&self) -> usize {
        self.c.nmax()
    }

    /// Modes where the forced R̄ response is secular (`t·e^{−χ_R k² t}`).
    pub fn resonant_modes(&self) -> &[(usize, usize)] {
        &self.resonant
    }

    pub fn is_resonant(&self, n: usize, m: usize) -> bool {
        self.resonant.binary_search(&(n, m)).is_ok()
    }

    pub fn k2(&self, n: usize, m: usize) -> f64 {
        PI * PI * (n * n + m * m) as f64 / (self.side * self.side)
    }

    /// Time-dependent amplitude of mode `(n, m)` in `S − b/ν`, `I` and `R`.
    pub fn mode_amplitudes(&self, n: usize, m: usize, t: f64) -> SirPoint {
        let p = &self.params;
        let k2 = self.k2(n, m);
        let s = self.c.get(n, m) * (-(p.nu + p.chi_s * k2) * t).exp();
        let i = self.d.get(n, m) * (-(p.gamma + p.nu + p.chi_i * k2) * t).exp();
        let free = (-p.chi_r * k2 * t).exp();
        let forced = if self.is_resonant(n, m) {
            p.gamma * self.d.get(n, m) * t * free
        } else {
            self.e.get(n, m) * (-(p.chi_i * k2 + p.gamma) * t).exp()
        };
        let r = (-p.nu * t).exp() * (forced + self.f.get(n, m) * free);
        SirPoint::new(s, i, r)
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> SirPoint {
        let nmax = self.nmax();
        let cx: Vec<f64> = (0..=nmax)
            .map(|n| (n as f64 * PI * x / self.side).cos())
            .collect();
        let cy: Vec<f64> = (0..=nmax)
            .map(|m| (m as f64 * PI * y / self.side).cos())
            .collect();
        let mut acc = SirPoint::default();
        for (n, wx) in cx.iter().enumerate() {
            for (m, wy) in cy.iter().enumerate() {
                let w = wx * wy;
                let a = self.mode_amplitudes(n, m, t);
                acc.s += a.s * w;
                acc.i += a.i * w;
                acc.r += a.r * w;
            }
        }
        acc.s += self.params.b / self.params.nu;
        acc
    }

    /// Evaluates the solution at every cell center of `grid` at time `t`.
    pub fn eval_state(&self, grid: &Grid, t: f64) -> Result<State> {
        if (grid.side() - self.side).abs() > 1e-12 * self.side {
            return Err(Error::GridMismatch);
        }
        let nmax = self.nmax();
        let mut amps = [
            CosineCoeffs::zeros(nmax),
            CosineCoeffs::zeros(nmax),
            CosineCoeffs::zeros(nmax),
        ];
        for n in 0..=nmax {
            for m in 0..=nmax {
                let a = self.mode_amplitudes(n, m, t);
                amps[0].set(n, m, a.s);
                amps[1].set(n, m, a.i);
                amps[2].set(n, m, a.r);
            }
        }
        amps[0].set(0, 0, amps[0].get(0, 0) + self.params.b / self.params.nu);
        let [s, i, r] = amps.map(|a| cosine_synthesis(&a, grid));
        State::new(s, i, r, t)
    }
}
