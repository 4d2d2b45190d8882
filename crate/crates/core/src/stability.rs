//! Linear stability of the constant equilibria under spatial perturbations.
//!
//! A perturbation `e^{λt} B(x)` with `∇²B + k²B = 0` grows at the rates given
//! by the eigenvalues of `J − k²D`, `D = diag(χ_S, χ_I, χ_R)`. The numeric
//! eigensolver [`eigenvalues3`] is the ground truth here; the closed forms are
//! checked against it. Each closed form also has a [`FormulaMode::Printed`]
//! variant reproducing the formulas as originally printed, which are wrong in
//! three places and kept only so the discrepancies can be reported.

use std::f64::consts::PI;

use nalgebra::{Complex, Matrix3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kinetics::{equilibria, jacobian, Params, SirPoint};

pub type C64 = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaMode {
    Corrected,
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    A1,
    A2,
}

impl EquilibriumKind {
    pub fn label(self) -> &'static str {
        match self {
            EquilibriumKind::A1 => "a1",
            EquilibriumKind::A2 => "a2",
        }
    }

    /// Resolves the equilibrium point, failing when `a2` does not exist.
    pub fn point(self, p: &Params) -> Result<SirPoint> {
        let eq = equilibria(p);
        match self {
            EquilibriumKind::A1 => Ok(eq.a1),
            EquilibriumKind::A2 => eq.a2.ok_or(Error::MissingEquilibrium { margin: eq.margin }),
        }
    }
}

/// `J(eq) − k²·diag(χ_S, χ_I, χ_R)`.
pub fn dispersion_matrix(p: &Params, eq: SirPoint, k2: f64) -> Matrix3<f64> {
    let mut m = jacobian(p, eq);
    m[(0, 0)] -= k2 * p.chi_s;
    m[(1, 1)] -= k2 * p.chi_i;
    m[(2, 2)] -= k2 * p.chi_r;
    m
}

/// Descending real part, ties broken by descending imaginary part.
pub fn sort_eigenvalues(values: &mut [C64]) {
    values.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
}

/// Eigenvalues of a real 3×3 matrix via a real Schur decomposition, sorted
/// with [`sort_eigenvalues`].
pub fn eigenvalues3(m: &Matrix3<f64>) -> [C64; 3] {
    let ev = m.complex_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2]];
    // Real eigenvalues of a real matrix come back with an exact zero
    // imaginary part; keep conjugate pairs exactly symmetric.
    for z in out.iter_mut() {
        if z.im == -0.0 {
            z.im = 0.0;
        }
    }
    sort_eigenvalues(&mut out);
    out
}

/// Coefficients `(c2, c1, c0)` of `det(λI − M) = λ³ + c2 λ² + c1 λ + c0`.
pub fn characteristic_polynomial(m: &Matrix3<f64>) -> (f64, f64, f64) {
    let trace = m.trace();
    let minors = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] + m[(0, 0)] * m[(2, 2)]
        - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)]
        - m[(1, 2)] * m[(2, 1)];
    (-trace, minors, -m.determinant())
}

/// `|det(λI − M)|` evaluated through the characteristic polynomial.
pub fn characteristic_residual(m: &Matrix3<f64>, lambda: C64) -> f64 {
    let (c2, c1, c0) = characteristic_polynomial(m);
    (((lambda + c2) * lambda + c1) * lambda + c0).norm()
}

/// Closed-form eigenvalues at the disease-free equilibrium, in the order
/// `(λ1, λ2, λ3)` = (R mode, S mode, I mode).
///
/// The printed λ2 carries a spurious `−βb/ν` term.
pub fn closed_form_a1(p: &Params, k2: f64, mode: FormulaMode) -> [f64; 3] {
    let lambda1 = -p.nu - p.chi_r * k2;
    let lambda2 = match mode {
        FormulaMode::Corrected => -p.nu - p.chi_s * k2,
        FormulaMode::Printed => -p.chi_s * k2 - p.beta * p.b / p.nu - p.nu,
    };
    let lambda3 = p.beta * p.b / p.nu - p.gamma - p.nu - p.chi_i * k2;
    [lambda1, lambda2, lambda3]
}

/// The `(a, b, c, d)` parametrization of the S–I block at the endemic
/// equilibrium: the block of `J − k²D` is `[[−a, −b], [c, −d]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndemicBlock {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl EndemicBlock {
    pub fn new(p: &Params, k2: f64) -> Self {
        let gn = p.gamma + p.nu;
        EndemicBlock {
            a: p.chi_s * k2 + p.b * p.beta / gn,
            b: gn,
            c: p.beta * (p.b / gn - p.nu / p.beta),
            d: p.chi_i * k2,
        }
    }

    /// `(a − d)² − 4bc`, or the printed `(a − d)² + 4bc` in printed mode.
    pub fn discriminant(&self, mode: FormulaMode) -> f64 {
        let spread = (self.a - self.d).powi(2);
        match mode {
            FormulaMode::Corrected => spread - 4.0 * self.b * self.c,
            FormulaMode::Printed => spread + 4.0 * self.b * self.c,
        }
    }
}

/// Closed-form eigenvalues at the endemic equilibrium:
/// `(−ν − χ_R k², (−(a+d) ± √disc)/2)`.
pub fn closed_form_a2(p: &Params, k2: f64, mode: FormulaMode) -> Result<[C64; 3]> {
    let margin = p.margin();
    if !(p.beta > 0.0 && margin >= 0.0) {
        return Err(Error::MissingEquilibrium { margin });
    }
    let blk = EndemicBlock::new(p, k2);
    let half_trace = -(blk.a + blk.d) / 2.0;
    let disc = blk.discriminant(mode);
    let root = C64::new(disc, 0.0).sqrt() / 2.0;
    let root = if disc >= 0.0 {
        C64::new(root.re, 0.0)
    } else {
        C64::new(0.0, root.im.abs())
    };
    Ok([
        C64::new(-p.nu - p.chi_r * k2, 0.0),
        C64::new(half_trace, 0.0) + root,
        C64::new(half_trace, 0.0) - root,
    ])
}

/// Squared wavenumber where λ3 at `a1` crosses zero, when positive.
pub fn critical_k2_a1(p: &Params) -> Option<f64> {
    let growth = p.beta * p.b / p.nu - p.gamma - p.nu;
    (growth > 0.0).then(|| growth / p.chi_i)
}

/// The printed Turing threshold for the endemic equilibrium, evaluated
/// verbatim. It follows from the sign error in the discriminant and does not
/// match the numeric dispersion relation; use for errata reporting only.
pub fn critical_k2_printed_a2(p: &Params) -> Result<f64> {
    let margin = p.margin();
    if !(p.beta > 0.0 && margin >= 0.0) {
        return Err(Error::MissingEquilibrium { margin });
    }
    let gn = p.gamma + p.nu;
    let lin = p.b * p.beta * p.chi_i;
    let quad = p.chi_s * p.chi_i;
    let disc = lin * lin + 4.0 * quad * (p.b * p.beta + p.nu * p.gamma + p.nu * p.nu) * gn * gn;
    Ok((-lin + disc.sqrt()) / (2.0 * quad * gn))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionPoint {
    pub k2: f64,
    #[serde(serialize_with = "serialize_complex3")]
    pub eigs: [C64; 3],
    pub max_re: f64,
}

fn serialize_complex3<S: serde::Serializer>(
    v: &[C64; 3],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(3))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

impl DispersionPoint {
    pub fn at(p: &Params, eq: SirPoint, k2: f64) -> Self {
        let eigs = eigenvalues3(&dispersion_matrix(p, eq, k2));
        DispersionPoint {
            k2,
            eigs,
            max_re: eigs[0].re,
        }
    }
}

/// A half-open band `[lo, hi)` of squared wavenumbers with growing modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    /// Whether the band reaches the end of the scanned range.
    pub open_ended: bool,
}

impl Interval {
    pub fn contains(&self, k2: f64) -> bool {
        k2 >= self.lo && (k2 < self.hi || (self.open_ended && k2 <= self.hi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub equilibrium: SirPoint,
    pub kind: Option<EquilibriumKind>,
    /// max Re λ at k² = 0 is negative.
    pub ode_stable: bool,
    pub unstable_intervals: Vec<Interval>,
    pub critical_k2: Vec<f64>,
    pub turing_unstable: bool,
    pub k2_max: f64,
}

const BISECTION_REL_TOL: f64 = 1e-12;

fn bisect_sign_change(p: &Params, eq: SirPoint, mut lo: f64, mut hi: f64) -> f64 {
    let positive = |k2: f64| DispersionPoint::at(p, eq, k2).max_re > 0.0;
    let lo_positive = positive(lo);
    for _ in 0..200 {
        if hi - lo <= BISECTION_REL_TOL * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if positive(mid) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Scans `steps` equally spaced k² values in `[0, k2_max]` and locates the
/// bands where some mode grows.
pub fn scan_dispersion(
    p: &Params,
    eq: SirPoint,
    k2_max: f64,
    steps: usize,
) -> Result<(Vec<DispersionPoint>, StabilityReport)> {
    if !(k2_max.is_finite() && k2_max > 0.0) || steps < 2 {
        return Err(Error::Precondition(format!(
            "need k2_max > 0 and steps >= 2, got {k2_max} and {steps}"
        )));
    }
    let points: Vec<DispersionPoint> = (0..steps)
        .map(|j| {
            let k2 = if j + 1 == steps {
                k2_max
            } else {
                k2_max * j as f64 / (steps - 1) as f64
            };
            DispersionPoint::at(p, eq, k2)
        })
        .collect();

    let mut intervals = Vec::new();
    let mut critical = Vec::new();
    let mut start = (points[0].max_re > 0.0).then_some(0.0);
    for pair in points.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        let (was, is) = (prev.max_re > 0.0, next.max_re > 0.0);
        if was != is {
            let k = bisect_sign_change(p, eq, prev.k2, next.k2);
            critical.push(k);
            if is {
                start = Some(k);
            } else if let Some(lo) = start.take() {
                intervals.push(Interval {
                    lo,
                    hi: k,
                    open_ended: false,
                });
            }
        }
    }
    if let Some(lo) = start {
        intervals.push(Interval {
            lo,
            hi: k2_max,
            open_ended: true,
        });
    }

    let ode_stable = points[0].max_re < 0.0;
    let turing_unstable = ode_stable && intervals.iter().any(|iv| iv.hi > 0.0);
    let report = StabilityReport {
        equilibrium: eq,
        kind: None,
        ode_stable,
        unstable_intervals: intervals,
        critical_k2: critical,
        turing_unstable,
        k2_max,
    };
    Ok((points, report))
}

/// [`scan_dispersion`] at a named equilibrium.
pub fn scan_equilibrium(
    p: &Params,
    kind: EquilibriumKind,
    k2_max: f64,
    steps: usize,
) -> Result<(Vec<DispersionPoint>, StabilityReport)> {
    let eq = kind.point(p)?;
    let (points, mut report) = scan_dispersion(p, eq, k2_max, steps)?;
    report.kind = Some(kind);
    Ok((points, report))
}

/// A Neumann eigenmode of the box with `k² = π²(n² + m²)/L²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxMode {
    pub n: usize,
    pub m: usize,
    pub k2: f64,
}

/// Box modes with `k² <= report.k2_max` that fall in an unstable band.
pub fn unstable_box_modes(report: &StabilityReport, side: f64) -> Vec<BoxMode> {
    let unit = PI * PI / (side * side);
    let limit = (report.k2_max / unit).sqrt().floor() as usize;
    let mut out = Vec::new();
    for n in 0..=limit {
        for m in 0..=limit {
            let k2 = unit * (n * n + m * m) as f64;
            if k2 <= report.k2_max && report.unstable_intervals.iter().any(|iv| iv.contains(k2)) {
                out.push(BoxMode { n, m, k2 });
            }
        }
    }
    out
}

/// One disagreement between a printed formula and the corrected analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Erratum {
    pub name: &'static str,
    pub printed: serde_json::Value,
    pub corrected: serde_json::Value,
    pub note: &'static str,
}

fn complex_json(v: &[C64]) -> serde_json::Value {
    serde_json::Value::Array(v.iter().map(|z| serde_json::json!([z.re, z.im])).collect())
}

/// Compares the printed formulas with corrected/numeric results for `p`.
///
/// The `a2` entries are only produced when the endemic equilibrium exists.
pub fn errata(p: &Params, k2_max: f64, steps: usize) -> Result<Vec<Erratum>> {
    let mut out = Vec::new();
    let printed = closed_form_a1(p, 0.0, FormulaMode::Printed);
    let corrected = closed_form_a1(p, 0.0, FormulaMode::Corrected);
    out.push(Erratum {
        name: "a1_lambda2",
        printed: serde_json::json!(printed[1]),
        corrected: serde_json::json!(corrected[1]),
        note: "at the disease-free state the S-I block is triangular, so lambda2 = -nu - chi_S k^2 with no beta*b/nu term",
    });

    let Ok(point) = EquilibriumKind::A2.point(p) else {
        return Ok(out);
    };
    let printed = closed_form_a2(p, 0.0, FormulaMode::Printed)?;
    let corrected = closed_form_a2(p, 0.0, FormulaMode::Corrected)?;
    let numeric = eigenvalues3(&dispersion_matrix(p, point, 0.0));
    out.push(Erratum {
        name: "a2_discriminant",
        printed: complex_json(&printed),
        corrected: complex_json(&numeric),
        note: "the characteristic polynomial of [[-a,-b],[c,-d]] is l^2 + (a+d)l + ad + bc, so the discriminant is (a-d)^2 - 4bc",
    });
    let _ = corrected;

    let (_, report) = scan_dispersion(p, point, k2_max, steps)?;
    out.push(Erratum {
        name: "a2_turing_threshold",
        printed: serde_json::json!(critical_k2_printed_a2(p)?),
        corrected: serde_json::json!(report.critical_k2),
        note: "numeric sign changes of max Re(lambda) on the scanned k^2 range; the printed threshold inherits the discriminant sign error",
    });
    out.push(Erratum {
        name: "a2_stability",
        printed: serde_json::json!("unstable whenever it exists"),
        corrected: serde_json::json!({ "ode_stable": report.ode_stable, "turing_unstable": report.turing_unstable }),
        note: "with bc > 0 the 2x2 block has positive determinant ad + bc and negative trace for every k^2",
    });
    Ok(out)
}
