//! Model coefficients, the regularized mobility, and the energy/entropy
//! functionals of the thin film equation
//!
//! ```text
//! h_t + (f(h) (a0 h_xxx + a1 h_x + a2 w'(x)))_x + a3 h_x = 0,   f(h) = |h|³.
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, PeriodicField};

/// How the forcing was specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKind {
    /// `w(x) = sin x`; derivatives are evaluated analytically at the nodes.
    Sine,
    /// Samples of `w`; derivatives are the grid's centered differences.
    Tabulated,
}

/// Periodic forcing `w` sampled on a grid, with cached norms.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    kind: ForcingKind,
    w: PeriodicField,
    w1: PeriodicField,
    w2: PeriodicField,
    /// `(w_{i+1} - w_i)/dx`, the interface derivative used by the flux.
    w1_half: Vec<f64>,
    norms: ForcingNorms,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForcingNorms {
    pub w_sup: f64,
    pub w1_l2: f64,
    pub w1_sup: f64,
    pub w2_sup: f64,
}

impl Forcing {
    /// `w(x) = sin x`. The grid must span one period (`length = 2π`).
    pub fn sine(grid: Grid) -> Result<Self> {
        if (grid.length() - 2.0 * PI).abs() > 1e-12 {
            return Err(Error::Parameter(format!(
                "sine forcing needs a domain of length 2π, got {}",
                grid.length()
            )));
        }
        let w = grid.sample(f64::sin);
        let w1 = grid.sample(f64::cos);
        let w2 = grid.sample(|x| -x.sin());
        Ok(Self::assemble(ForcingKind::Sine, w, w1, w2))
    }

    pub fn tabulated(w: PeriodicField) -> Self {
        let w1 = w.d1();
        let w2 = w.d2();
        Self::assemble(ForcingKind::Tabulated, w, w1, w2)
    }

    pub fn zero(grid: Grid) -> Self {
        Self::tabulated(grid.constant(0.0))
    }

    fn assemble(kind: ForcingKind, w: PeriodicField, w1: PeriodicField, w2: PeriodicField) -> Self {
        let norms = ForcingNorms {
            w_sup: w.sup_abs(),
            w1_l2: w1.norms().l2,
            w1_sup: w1.sup_abs(),
            w2_sup: w2.sup_abs(),
        };
        let w1_half = w.forward_diff();
        Forcing {
            kind,
            w,
            w1,
            w2,
            w1_half,
            norms,
        }
    }

    pub fn kind(&self) -> ForcingKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid {
        self.w.grid()
    }

    pub fn w(&self) -> &PeriodicField {
        &self.w
    }

    pub fn w_prime(&self) -> &PeriodicField {
        &self.w1
    }

    pub fn w_second(&self) -> &PeriodicField {
        &self.w2
    }

    pub fn w_prime_half(&self) -> &[f64] {
        &self.w1_half
    }

    pub fn norms(&self) -> ForcingNorms {
        self.norms
    }
}

/// Coefficients `a0..a3` and the forcing `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    forcing: Forcing,
}

impl Params {
    pub fn new(a: [f64; 4], forcing: Forcing) -> Result<Self> {
        let [a0, a1, a2, a3] = a;
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("coefficients must be finite".into()));
        }
        if a0 <= 0.0 {
            return Err(Error::Parameter(format!("a0 must be > 0, got {a0}")));
        }
        Ok(Params {
            a0,
            a1,
            a2,
            a3,
            forcing,
        })
    }

    /// Coefficients with sine forcing on `grid`.
    pub fn with_sine(a: [f64; 4], grid: Grid) -> Result<Self> {
        Self::new(a, Forcing::sine(grid)?)
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.a0, self.a1, self.a2, self.a3]
    }

    pub fn forcing(&self) -> &Forcing {
        &self.forcing
    }

    pub fn grid(&self) -> &Grid {
        self.forcing.grid()
    }

    /// `|Ω|`
    pub fn domain_length(&self) -> f64 {
        self.grid().length()
    }

    pub(crate) fn check_field(&self, h: &PeriodicField) -> Result<()> {
        h.check_grid(self.forcing.w())
    }
}

/// Rotating-cylinder map: `a0 = a1 = χ/3`, `a2 = -μ/3`, `a3 = 1`, `w = sin x`
/// on a `2π` domain.
pub fn from_physical(chi: f64, mu: f64, grid: Grid) -> Result<Params> {
    if !(chi > 0.0) {
        return Err(Error::Parameter(format!(
            "chi must be > 0 (it sets a0 = chi/3 > 0), got {chi}"
        )));
    }
    if !(mu >= 0.0) {
        return Err(Error::Parameter(format!("mu must be >= 0, got {mu}")));
    }
    Params::with_sine([chi / 3.0, chi / 3.0, -mu / 3.0, 1.0], grid)
}

/// Regularization parameters `δ`, `ε`, `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizationKnobs {
    pub delta: f64,
    pub epsilon: f64,
    pub theta: f64,
}

impl Default for RegularizationKnobs {
    fn default() -> Self {
        RegularizationKnobs {
            delta: 0.0,
            epsilon: 1e-8,
            theta: 0.3,
        }
    }
}

impl RegularizationKnobs {
    pub fn new(delta: f64, epsilon: f64, theta: f64) -> Result<Self> {
        let k = RegularizationKnobs {
            delta,
            epsilon,
            theta,
        };
        k.validate()?;
        Ok(k)
    }

    /// The raw degenerate mobility `|h|³`.
    pub fn unregularized() -> Self {
        RegularizationKnobs {
            delta: 0.0,
            epsilon: 0.0,
            theta: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Parameter(format!("delta must be >= 0, got {}", self.delta)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Parameter(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if !(self.theta > 0.0 && self.theta < 0.4) {
            return Err(Error::Parameter(format!(
                "theta must lie in (0, 2/5), got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

/// `f_δε(z) = |z|⁴/(|z|+ε) + δ`, which is `|z|³ + δ` when `ε = 0`.
#[inline]
pub fn mobility(z: f64, knobs: RegularizationKnobs) -> f64 {
    let a = z.abs();
    let f = if knobs.epsilon > 0.0 {
        a * a * a * a / (a + knobs.epsilon)
    } else {
        a * a * a
    };
    f + knobs.delta
}

/// `d f_δε / dz = sign(z) |z|³ (3|z| + 4ε) / (|z| + ε)²`.
#[inline]
pub fn mobility_prime(z: f64, knobs: RegularizationKnobs) -> f64 {
    let a = z.abs();
    let eps = knobs.epsilon;
    let d = if eps > 0.0 {
        a * a * a * (3.0 * a + 4.0 * eps) / ((a + eps) * (a + eps))
    } else {
        3.0 * a * a
    };
    d.copysign(z)
}

/// Entropy-consistent interface mobility `(b - a)/(G_ε'(b) - G_ε'(a)) + δ`
/// for `a, b > 0`, with its partial derivatives `(m, ∂m/∂a, ∂m/∂b)`.
///
/// Reduces to `f_δε(a)` when `a = b`. Written without the difference
/// quotient, so it is exact for nearly equal arguments. Returns `None` unless
/// both arguments are positive.
pub fn entropy_mean_mobility(a: f64, b: f64, knobs: RegularizationKnobs) -> Option<(f64, f64, f64)> {
    if !(a > 0.0 && b > 0.0) {
        return None;
    }
    let eps = knobs.epsilon;
    // S = 1/m_ε = (a + b)/(2a²b²) + ε(a² + ab + b²)/(3a³b³)
    let s = |u: f64, v: f64| {
        (u + v) / (2.0 * u * u * v * v) + eps * (u * u + u * v + v * v) / (3.0 * u.powi(3) * v.powi(3))
    };
    let ds_du = |u: f64, v: f64| {
        -1.0 / (2.0 * u * u * v * v) - 1.0 / (u.powi(3) * v)
            - eps / 3.0 * (1.0 / (u * u * v.powi(3)) + 2.0 / (u.powi(3) * v * v) + 3.0 / (u.powi(4) * v))
    };
    let sv = s(a, b);
    let m = 1.0 / sv;
    let inv2 = m * m;
    Some((m + knobs.delta, -ds_du(a, b) * inv2, -ds_du(b, a) * inv2))
}

/// Entropy density `G_ε(z) = 1/(2z) + ε/(6z²)`, with `G_ε'' = 1/f_ε`.
pub fn entropy_g(z: f64, epsilon: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("entropy needs z > 0, got {z}")));
    }
    Ok(0.5 / z + epsilon / (6.0 * z * z))
}

/// α-entropy density
/// `z^{α-1}/((α-1)(α-2)) + ε z^{α-2}/((α-3)(α-2))`, whose second derivative
/// is `z^α / f_ε(z)`. Defined for `α ∈ (-1/2, 1) \ {0}`.
pub fn alpha_entropy(z: f64, epsilon: f64, alpha: f64) -> Result<f64> {
    if !(alpha > -0.5 && alpha < 1.0) || alpha == 0.0 {
        return Err(Error::Parameter(format!(
            "alpha must lie in (-1/2, 1) and be nonzero, got {alpha}"
        )));
    }
    if !(z > 0.0) {
        return Err(Error::Domain(format!("alpha-entropy needs z > 0, got {z}")));
    }
    let first = z.powf(alpha - 1.0) / ((alpha - 1.0) * (alpha - 2.0));
    let second = epsilon * z.powf(alpha - 2.0) / ((alpha - 3.0) * (alpha - 2.0));
    Ok(first + second)
}

/// `E₀ = ½ ∫ (a0 h_x² - a1 h² - 2 a2 w h) dx`, with `h_x` the forward
/// difference so that `E₀` is the discrete Lyapunov functional of the scheme
/// in [`crate::evolve`].
pub fn energy(h: &PeriodicField, p: &Params) -> Result<f64> {
    p.check_field(h)?;
    let grad = h.forward_diff();
    let w = p.forcing().w().values();
    let sum: f64 = h
        .values()
        .iter()
        .zip(&grad)
        .zip(w)
        .map(|((&hi, &gi), &wi)| p.a0 * gi * gi - p.a1 * hi * hi - 2.0 * p.a2 * wi * hi)
        .sum();
    Ok(0.5 * sum * h.grid().dx())
}

/// `∫ h_x² dx` with the forward difference (the gradient used by the energy).
pub fn gradient_sq(h: &PeriodicField) -> f64 {
    h.forward_diff().iter().map(|g| g * g).sum::<f64>() * h.grid().dx()
}
