//! Method-of-lines integration of the full reaction-diffusion system.
//!
//! Space is discretized with [`crate::grid::laplacian_neumann`]; time with the
//! classical four-stage Runge–Kutta scheme at a fixed step. Positivity is
//! monitored (see [`SeriesRow::min_value`]) and never enforced.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, Field, Grid, NormKind};
use crate::kinetics::{reaction_rates, Params, SirPoint};

/// Any value beyond this magnitude is treated as numerical blow-up.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub s: Field,
    pub i: Field,
    pub r: Field,
    pub t: f64,
}

impl State {
    pub fn new(s: Field, i: Field, r: Field, t: f64) -> Result<Self> {
        s.ensure_same_grid(&i)?;
        s.ensure_same_grid(&r)?;
        Ok(State { s, i, r, t })
    }

    pub fn uniform(grid: Grid, u: SirPoint) -> Self {
        State {
            s: Field::constant(grid, u.s),
            i: Field::constant(grid, u.i),
            r: Field::constant(grid, u.r),
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.s.grid()
    }

    pub fn fields(&self) -> [&Field; 3] {
        [&self.s, &self.i, &self.r]
    }

    pub fn min_value(&self) -> f64 {
        self.fields()
            .iter()
            .map(|f| f.min())
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest componentwise distance to the uniform state `u`.
    pub fn distance_to_uniform(&self, u: SirPoint) -> f64 {
        self.fields()
            .iter()
            .zip(u.to_array())
            .map(|(f, c)| {
                f.values()
                    .iter()
                    .fold(0.0, |m, v| f64::max(m, (v - c).abs()))
            })
            .fold(0.0, f64::max)
    }

    fn to_buffers(&self) -> [Vec<f64>; 3] {
        [
            self.s.values().to_vec(),
            self.i.values().to_vec(),
            self.r.values().to_vec(),
        ]
    }

    fn from_buffers(grid: Grid, [s, i, r]: [Vec<f64>; 3], t: f64) -> Self {
        State {
            s: Field::from_raw(grid, s),
            i: Field::from_raw(grid, i),
            r: Field::from_raw(grid, r),
            t,
        }
    }
}

/// Initial data. The tagged variants are the JSON-facing ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "type",
    rename_all = "snake_case",
    deny_unknown_fields,
    from = "InitRepr"
)]
pub enum InitSpec {
    Constant {
        s: f64,
        i: f64,
        r: f64,
    },
    /// `S0 = 1 − G`, `I0 = R0 = G/2` with `G = exp(−|x − c|²)` centered on
    /// the domain.
    #[serde(rename = "paper_gaussian")]
    GaussianBump,
    /// Independent uniform samples in `[lo, hi]` per cell and species, drawn
    /// S first, then I, then R.
    RandomUniform {
        lo: f64,
        hi: f64,
        seed: u64,
    },
    /// Caller-supplied fields, taken as-is (may be signed).
    #[serde(skip)]
    Fields {
        s: Field,
        i: Field,
        r: Field,
    },
}

// Serde ignores unknown keys next to a unit variant's tag; an empty struct
// variant rejects them.
#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum InitRepr {
    Constant {
        s: f64,
        i: f64,
        r: f64,
    },
    #[serde(rename = "paper_gaussian")]
    GaussianBump {},
    RandomUniform {
        lo: f64,
        hi: f64,
        seed: u64,
    },
}

impl From<InitRepr> for InitSpec {
    fn from(r: InitRepr) -> Self {
        match r {
            InitRepr::Constant { s, i, r } => InitSpec::Constant { s, i, r },
            InitRepr::GaussianBump {} => InitSpec::GaussianBump,
            InitRepr::RandomUniform { lo, hi, seed } => InitSpec::RandomUniform { lo, hi, seed },
        }
    }
}

impl InitSpec {
    pub fn build(&self, grid: Grid) -> Result<State> {
        match self {
            InitSpec::Constant { s, i, r } => {
                let u = SirPoint::new(*s, *i, *r);
                if !u.is_finite() || u.s < 0.0 || u.i < 0.0 || u.r < 0.0 {
                    return Err(Error::Precondition(format!(
                        "constant initial data must be finite and non-negative, got {u:?}"
                    )));
                }
                Ok(State::uniform(grid, u))
            }
            InitSpec::GaussianBump => {
                let (s, i, r) = gaussian_bump_fields(&grid);
                Ok(State { s, i, r, t: 0.0 })
            }
            InitSpec::RandomUniform { lo, hi, seed } => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && lo <= hi) {
                    return Err(Error::Precondition(format!(
                        "random_uniform needs 0 <= lo <= hi, got [{lo}, {hi}]"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut draw = || {
                    let values = (0..grid.len())
                        .map(|_| {
                            if lo < hi {
                                rng.gen_range(*lo..=*hi)
                            } else {
                                *lo
                            }
                        })
                        .collect();
                    Field::from_raw(grid, values)
                };
                let s = draw();
                let i = draw();
                let r = draw();
                Ok(State { s, i, r, t: 0.0 })
            }
            InitSpec::Fields { s, i, r } => {
                if *s.grid() != grid {
                    return Err(Error::GridMismatch);
                }
                State::new(s.clone(), i.clone(), r.clone(), 0.0)
            }
        }
    }
}

pub fn gaussian_bump_fields(grid: &Grid) -> (Field, Field, Field) {
    let c = grid.side() / 2.0;
    let bump = |x: f64, y: f64| (-(x - c).powi(2) - (y - c).powi(2)).exp();
    (
        Field::from_fn(*grid, |x, y| 1.0 - bump(x, y)),
        Field::from_fn(*grid, |x, y| bump(x, y) / 2.0),
        Field::from_fn(*grid, |x, y| bump(x, y) / 2.0),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: Params,
    pub grid: Grid,
    pub t_end: f64,
    /// Explicit step; `None` selects [`stable_dt`].
    pub dt: Option<f64>,
    pub snapshot_stride: usize,
    pub init: InitSpec,
}

impl SimConfig {
    pub fn new(params: Params, grid: Grid, t_end: f64, init: InitSpec) -> Self {
        SimConfig {
            params,
            grid,
            t_end,
            dt: None,
            snapshot_stride: 1,
            init,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::Precondition(format!(
                "t_end must be >= 0, got {}",
                self.t_end
            )));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::Precondition(format!(
                    "dt must be positive, got {dt}"
                )));
            }
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Precondition("snapshot_stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn step_size(&self) -> f64 {
        self.dt
            .unwrap_or_else(|| stable_dt(&self.params, &self.grid))
    }
}

/// One row of the per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesRow {
    pub t: f64,
    /// Total population `∫ S + I + R`.
    pub n: f64,
    pub mass_s: f64,
    pub mass_i: f64,
    pub mass_r: f64,
    pub linf_s: f64,
    pub linf_i: f64,
    pub linf_r: f64,
    pub l2_i: f64,
    pub min_value: f64,
}

impl SeriesRow {
    pub fn of(state: &State) -> Self {
        let mass_s = grid::integrate(&state.s);
        let mass_i = grid::integrate(&state.i);
        let mass_r = grid::integrate(&state.r);
        SeriesRow {
            t: state.t,
            n: mass_s + mass_i + mass_r,
            mass_s,
            mass_i,
            mass_r,
            linf_s: grid::norm(&state.s, NormKind::Linf),
            linf_i: grid::norm(&state.i, NormKind::Linf),
            linf_r: grid::norm(&state.r, NormKind::Linf),
            l2_i: grid::norm(&state.i, NormKind::L2),
            min_value: state.min_value(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<State>,
    pub series: Vec<SeriesRow>,
    pub dt: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.snapshots
            .last()
            .expect("trajectory always holds the initial state")
    }

    pub fn min_value(&self) -> f64 {
        self.series
            .iter()
            .map(|r| r.min_value)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Explicit step: `0.9·min(h²/(4χmax), 0.1/ρ)` with the reaction scale
/// `ρ = γ + 2ν + β(b/ν + 1)`.
pub fn stable_dt(p: &Params, g: &Grid) -> f64 {
    let h = g.h();
    let diffusion = h * h / (4.0 * p.chi_max());
    let rho = p.gamma + 2.0 * p.nu + p.beta * (p.b / p.nu + 1.0);
    0.9 * diffusion.min(0.1 / rho)
}

/// Scratch buffers for the RK4 stages, reused across steps.
struct Stepper {
    grid: Grid,
    params: Params,
    k: [[Vec<f64>; 3]; 4],
    stage: [Vec<f64>; 3],
}

impl Stepper {
    fn new(grid: Grid, params: Params) -> Self {
        let n = grid.len();
        let buf = || [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        Stepper {
            grid,
            params,
            k: [buf(), buf(), buf(), buf()],
            stage: buf(),
        }
    }

    fn rhs(grid: &Grid, p: &Params, u: &[Vec<f64>; 3], out: &mut [Vec<f64>; 3]) {
        let (nx, h) = (grid.nx(), grid.h());
        for (src, dst) in u.iter().zip(out.iter_mut()) {
            grid::laplacian_into(nx, h, src, dst);
        }
        let [os, oi, or] = out;
        for c in 0..grid.len() {
            let f = reaction_rates(p, SirPoint::new(u[0][c], u[1][c], u[2][c]));
            os[c] = p.chi_s * os[c] + f.s;
            oi[c] = p.chi_i * oi[c] + f.i;
            or[c] = p.chi_r * or[c] + f.r;
        }
    }

    /// Fills `k[0]` with the time derivative at `u`.
    fn derivative(&mut self, u: &[Vec<f64>; 3]) -> &[Vec<f64>; 3] {
        Self::rhs(&self.grid, &self.params, u, &mut self.k[0]);
        &self.k[0]
    }

    /// Advances `u` by `dt`; `k[0]` must already hold the derivative at `u`.
    fn advance(&mut self, u: &mut [Vec<f64>; 3], dt: f64) {
        let Stepper {
            grid,
            params,
            k,
            stage,
        } = self;
        for (from, coef) in [(0, 0.5), (1, 0.5), (2, 1.0)] {
            let (done, rest) = k.split_at_mut(from + 1);
            let src = &done[from];
            for sp in 0..3 {
                for (x, (u0, d)) in stage[sp].iter_mut().zip(u[sp].iter().zip(&src[sp])) {
                    *x = u0 + coef * dt * d;
                }
            }
            Self::rhs(grid, params, stage, &mut rest[0]);
        }
        let [k1, k2, k3, k4] = &*k;
        let w = dt / 6.0;
        for sp in 0..3 {
            for c in 0..grid.len() {
                u[sp][c] += w * (k1[sp][c] + 2.0 * k2[sp][c] + 2.0 * k3[sp][c] + k4[sp][c]);
            }
        }
    }

    fn step(&mut self, u: &mut [Vec<f64>; 3], dt: f64) {
        Self::rhs(&self.grid, &self.params, u, &mut self.k[0]);
        self.advance(u, dt);
    }
}

fn check_divergence(u: &[Vec<f64>; 3], t: f64) -> Result<()> {
    for v in u.iter().flatten() {
        if !v.is_finite() || v.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Divergence { t, value: v.abs() });
        }
    }
    Ok(())
}

/// Semi-discrete time derivative `(∂tS, ∂tI, ∂tR)` at `state`.
pub fn time_derivative(state: &State, p: &Params) -> [Field; 3] {
    let grid = *state.grid();
    let mut stepper = Stepper::new(grid, *p);
    let d = stepper.derivative(&state.to_buffers()).clone();
    d.map(|v| Field::from_raw(grid, v))
}

/// One classical RK4 step.
pub fn step(state: &State, p: &Params, dt: f64) -> Result<State> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Precondition(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let grid = *state.grid();
    let mut u = state.to_buffers();
    Stepper::new(grid, *p).step(&mut u, dt);
    let t = state.t + dt;
    check_divergence(&u, t)?;
    Ok(State::from_buffers(grid, u, t))
}

/// Number of steps of size `dt` covering `[0, t_end]`, the last one possibly
/// shortened.
fn step_count(t_end: f64, dt: f64) -> usize {
    if t_end == 0.0 {
        return 0;
    }
    let q = t_end / dt;
    let nearest = q.round();
    if (q - nearest).abs() <= 1e-9 * q.max(1.0) && nearest >= 1.0 {
        nearest as usize
    } else {
        q.ceil() as usize
    }
}

pub fn simulate(cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let state = cfg.init.build(cfg.grid)?;
    let dt = cfg.step_size();
    let grid = cfg.grid;
    let steps = step_count(cfg.t_end, dt);

    let mut series = Vec::with_capacity(steps + 1);
    series.push(SeriesRow::of(&state));
    let mut snapshots = vec![state.clone()];

    let mut u = state.to_buffers();
    let mut stepper = Stepper::new(grid, cfg.params);
    for k in 1..=steps {
        let last = k == steps;
        let h = if last {
            cfg.t_end - (k - 1) as f64 * dt
        } else {
            dt
        };
        stepper.step(&mut u, h);
        let t = if last { cfg.t_end } else { k as f64 * dt };
        check_divergence(&u, t)?;

        let take_snapshot = last || k % cfg.snapshot_stride == 0;
        let current = State::from_buffers(grid, u.clone(), t);
        series.push(SeriesRow::of(&current));
        if take_snapshot {
            snapshots.push(current);
        }
    }
    Ok(Trajectory {
        snapshots,
        series,
        dt,
    })
}

/// Integrates until `max |∂t u| <= tol` (converged) or `t >= t_max`.
///
/// `tol = 0` never converges.
pub fn run_to_steady_state(cfg: &SimConfig, tol: f64, t_max: f64) -> Result<(State, bool)> {
    cfg.validate()?;
    if tol.is_nan() || tol < 0.0 || !t_max.is_finite() {
        return Err(Error::Precondition(format!(
            "need tol >= 0 and finite t_max, got tol = {tol}, t_max = {t_max}"
        )));
    }
    let grid = cfg.grid;
    let dt = cfg.step_size();
    let mut u = cfg.init.build(grid)?.to_buffers();
    let mut stepper = Stepper::new(grid, cfg.params);
    let mut k = 0usize;
    loop {
        let t = k as f64 * dt;
        let rate = stepper
            .derivative(&u)
            .iter()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs()));
        if tol > 0.0 && rate <= tol {
            return Ok((State::from_buffers(grid, u, t), true));
        }
        if t >= t_max {
            return Ok((State::from_buffers(grid, u, t), false));
        }
        stepper.advance(&mut u, dt);
        k += 1;
        check_divergence(&u, k as f64 * dt)?;
    }
}
