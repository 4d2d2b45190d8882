//! Pointwise reaction terms of the SIR system with demography.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model constants: three diffusivities and four reaction rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub chi_s: f64,
    pub chi_i: f64,
    pub chi_r: f64,
    /// Birth rate (density per unit time).
    pub b: f64,
    /// Infection rate. Zero selects the infection-free system.
    pub beta: f64,
    /// Per-capita death rate.
    pub nu: f64,
    /// Recovery rate.
    pub gamma: f64,
}

impl Params {
    /// The parameter set of the worked example: χ = (0.3, 0.4, 0.5),
    /// b = 0.5, β = 0.01, ν = γ = 0.5.
    pub const EXAMPLE: Params = Params {
        chi_s: 0.3,
        chi_i: 0.4,
        chi_r: 0.5,
        b: 0.5,
        beta: 0.01,
        nu: 0.5,
        gamma: 0.5,
    };

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("chi_s", self.chi_s),
            ("chi_i", self.chi_i),
            ("chi_r", self.chi_r),
            ("b", self.b),
            ("nu", self.nu),
            ("gamma", self.gamma),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParam {
                    name,
                    value,
                    reason: "must be finite and strictly positive",
                });
            }
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidParam {
                name: "beta",
                value: self.beta,
                reason: "must be finite and non-negative",
            });
        }
        Ok(())
    }

    pub fn with_beta(self, beta: f64) -> Params {
        Params { beta, ..self }
    }

    pub fn chi_max(&self) -> f64 {
        self.chi_s.max(self.chi_i).max(self.chi_r)
    }

    /// `bβ − νγ − ν²`; the endemic equilibrium exists iff this is `≥ 0`.
    pub fn margin(&self) -> f64 {
        self.b * self.beta - self.nu * self.gamma - self.nu * self.nu
    }

    /// Largest parameter magnitude, used to scale residual tolerances.
    pub fn scale(&self) -> f64 {
        [
            self.chi_s, self.chi_i, self.chi_r, self.b, self.beta, self.nu, self.gamma,
        ]
        .into_iter()
        .fold(1.0, f64::max)
    }
}

/// A point in (S, I, R) space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SirPoint {
    pub s: f64,
    pub i: f64,
    pub r: f64,
}

impl SirPoint {
    pub const fn new(s: f64, i: f64, r: f64) -> Self {
        SirPoint { s, i, r }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.s, self.i, self.r]
    }

    pub fn max_abs(self) -> f64 {
        self.s.abs().max(self.i.abs()).max(self.r.abs())
    }

    pub fn is_finite(self) -> bool {
        self.s.is_finite() && self.i.is_finite() && self.r.is_finite()
    }

    pub fn sum(self) -> f64 {
        self.s + self.i + self.r
    }
}

/// Reaction right-hand side `(b − βsi − νs, βsi − (γ+ν)i, γi − νr)`.
#[inline]
pub fn reaction_rates(p: &Params, u: SirPoint) -> SirPoint {
    let infection = p.beta * u.s * u.i;
    SirPoint {
        s: p.b - infection - p.nu * u.s,
        i: infection - (p.gamma + p.nu) * u.i,
        r: p.gamma * u.i - p.nu * u.r,
    }
}

pub fn jacobian(p: &Params, u: SirPoint) -> Matrix3<f64> {
    Matrix3::new(
        -p.beta * u.i - p.nu,
        -p.beta * u.s,
        0.0,
        p.beta * u.i,
        p.beta * u.s - p.gamma - p.nu,
        0.0,
        0.0,
        p.gamma,
        -p.nu,
    )
}

/// Constant steady states: the disease-free `a1` and, when it exists, the
/// endemic `a2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumSet {
    pub a1: SirPoint,
    pub a2: Option<SirPoint>,
    pub margin: f64,
}

impl EquilibriumSet {
    /// At `margin == 0` both equilibria are the same point.
    pub fn coincident(&self) -> bool {
        self.a2.is_some_and(|a2| {
            let gap = SirPoint::new(a2.s - self.a1.s, a2.i - self.a1.i, a2.r - self.a1.r);
            gap.max_abs() <= 1e-12 * self.a1.s.abs().max(1.0)
        })
    }
}

pub fn equilibria(p: &Params) -> EquilibriumSet {
    let a1 = SirPoint::new(p.b / p.nu, 0.0, 0.0);
    let margin = p.margin();
    let a2 = if p.beta > 0.0 && margin >= 0.0 {
        let s = (p.gamma + p.nu) / p.beta;
        let i = margin / (p.beta * (p.gamma + p.nu));
        let r = p.gamma * i / p.nu;
        Some(SirPoint::new(s, i, r))
    } else {
        None
    };
    EquilibriumSet { a1, a2, margin }
}

/// Side lengths of the box `[0,c1]×[0,c2]×[0,c3]` that trajectories cannot
/// leave when β is small.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantRegionBounds {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl InvariantRegionBounds {
    pub fn contains(&self, u: SirPoint, slack: f64) -> bool {
        u.s >= -slack
            && u.i >= -slack
            && u.r >= -slack
            && u.s <= self.c1 + slack
            && u.i <= self.c2 + slack
            && u.r <= self.c3 + slack
    }
}

/// Invariant-region constants, defined for `0 < β < 1`.
///
/// `c3` is `(γ/ν)·c2 + 1`, which is the choice that satisfies
/// `c3 > γ·c2/ν` for every birth rate.
pub fn invariant_region(p: &Params) -> Result<InvariantRegionBounds> {
    if !(p.beta > 0.0 && p.beta < 1.0) {
        return Err(Error::Precondition(format!(
            "invariant region needs 0 < beta < 1, got {}",
            p.beta
        )));
    }
    let root = p.beta.cbrt();
    let c1 = (p.gamma + p.nu) / root;
    let c2 = p.b / (root * (p.gamma + p.nu));
    let c3 = p.gamma / p.nu * c2 + 1.0;
    Ok(InvariantRegionBounds { c1, c2, c3 })
}
