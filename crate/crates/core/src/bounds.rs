//! Explicit constants, a priori bounds and runtime monitors.
//!
//! Everything here is a pure evaluator over fields or trajectories. Monitors
//! report through [`BoundReport`] and never abort a run.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::Trajectory;
use crate::grid::PeriodicField;
use crate::model::{alpha_entropy, energy, entropy_g, gradient_sq, Params, RegularizationKnobs};

/// Column order of the diagnostics CSV.
pub const DIAGNOSTICS_COLUMNS: [&str; 10] = [
    "t",
    "mass",
    "l2",
    "h1",
    "min_h",
    "energy",
    "entropy0",
    "entropy_eps",
    "gradient_sq",
    "dissipation_cum",
];

/// One time-stamped row of monitored functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub l2: f64,
    pub h1: f64,
    pub min_h: f64,
    pub energy: f64,
    /// `∫ 1/(2h)`, infinite once `min h <= 0`.
    pub entropy0: f64,
    /// `∫ G_ε(h)`, infinite once `min h <= 0`.
    pub entropy_eps: f64,
    pub alpha_entropy: Option<f64>,
    /// Running `∬ f(h) (a0 h_xxx + a1 h_x + a2 w')²`.
    pub dissipation_cum: f64,
    /// `∫ h_x²` with the forward difference.
    pub gradient_sq: f64,
    /// Running `∫₀ᵗ ‖h‖_∞³ dt`.
    pub sup_cubed_integral: f64,
    /// `∫h_x² + (|a1|/a0)(|a1|/a0 + 2δ)∫G_ε + a0 ∬ f h_xxx²` at this time.
    pub k1_lhs: f64,
}

/// Time integrals accumulated step by step (backward Euler quadrature).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulators {
    pub dissipation: f64,
    pub sup_cubed: f64,
    pub mobility_hxxx_sq: f64,
    /// Running `Σ (a1⁺/2) ‖h_new - h_old‖²`, the most an implicit step can
    /// add to `E + ∬ f g²` through the concave `-a1 h²/2` part of the energy.
    pub concavity_defect: f64,
}

impl Accumulators {
    /// Adds one step of length `dt` given the interface mobility `mob` and
    /// flux factor `g` at the new state `h`.
    pub fn record_step(&mut self, mob: &[f64], g: &[f64], h: &[f64], dt: f64, dx: f64) {
        let n = h.len();
        let diss: f64 = mob.iter().zip(g).map(|(f, g)| f * g * g).sum();
        self.dissipation += dt * dx * diss;
        let sup = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.sup_cubed += dt * sup * sup * sup;
        let inv3 = 1.0 / (dx * dx * dx);
        let at = |i: isize| h[i.rem_euclid(n as isize) as usize];
        let s: f64 = (0..n as isize)
            .map(|i| {
                let h3 = (at(i + 2) - 3.0 * at(i + 1) + 3.0 * at(i) - at(i - 1)) * inv3;
                mob[i as usize] * h3 * h3
            })
            .sum();
        self.mobility_hxxx_sq += dt * dx * s;
    }

    /// Adds the concavity defect of one step from `old` to `new`.
    pub fn record_increment(&mut self, old: &[f64], new: &[f64], a1: f64, dx: f64) {
        let d2: f64 = old.iter().zip(new).map(|(a, b)| (b - a) * (b - a)).sum();
        self.concavity_defect += 0.5 * a1.max(0.0) * dx * d2;
    }

    /// Left side of the blended gradient/entropy bound at state `h`. The
    /// entropy term uses `G_ε`, the `δ = 0` density.
    pub fn k1_lhs(&self, h: &PeriodicField, p: &Params, knobs: RegularizationKnobs) -> f64 {
        let r = p.a1.abs() / p.a0;
        let weight = r * (r + 2.0 * knobs.delta);
        let ent = entropy_integral(h, knobs.epsilon);
        let ent_term = if weight == 0.0 { 0.0 } else { weight * ent };
        gradient_sq(h) + ent_term + p.a0 * self.mobility_hxxx_sq
    }
}

fn entropy_integral(h: &PeriodicField, epsilon: f64) -> f64 {
    if h.min() <= 0.0 {
        return f64::INFINITY;
    }
    h.values()
        .iter()
        .map(|&v| entropy_g(v, epsilon).unwrap_or(f64::INFINITY))
        .sum::<f64>()
        * h.grid().dx()
}

impl DiagnosticsRecord {
    pub fn measure(
        t: f64,
        h: &PeriodicField,
        p: &Params,
        knobs: RegularizationKnobs,
        alpha: Option<f64>,
        acc: &Accumulators,
    ) -> Self {
        let norms = h.norms();
        let alpha_entropy = alpha.map(|a| {
            if norms.min <= 0.0 {
                return f64::INFINITY;
            }
            h.values()
                .iter()
                .map(|&v| alpha_entropy(v, knobs.epsilon, a).unwrap_or(f64::NAN))
                .sum::<f64>()
                * h.grid().dx()
        });
        DiagnosticsRecord {
            t,
            mass: h.integrate(),
            l2: norms.l2,
            h1: norms.h1,
            min_h: norms.min,
            energy: energy(h, p).unwrap_or(f64::NAN),
            entropy0: entropy_integral(h, 0.0),
            entropy_eps: entropy_integral(h, knobs.epsilon),
            alpha_entropy,
            dissipation_cum: acc.dissipation,
            gradient_sq: gradient_sq(h),
            sup_cubed_integral: acc.sup_cubed,
            k1_lhs: acc.k1_lhs(h, p, knobs),
        }
    }

    fn row(&self) -> [f64; 10] {
        [
            self.t,
            self.mass,
            self.l2,
            self.h1,
            self.min_h,
            self.energy,
            self.entropy0,
            self.entropy_eps,
            self.gradient_sq,
            self.dissipation_cum,
        ]
    }
}

/// Writes the diagnostics CSV (header plus one row per record).
pub fn write_diagnostics_csv<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = &'a DiagnosticsRecord>,
) -> Result<()> {
    writeln!(out, "{}", DIAGNOSTICS_COLUMNS.join(","))?;
    for r in records {
        let cells: Vec<String> = r.row().iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Outcome of comparing a monitored quantity with its bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    /// `rhs - lhs`
    pub slack: f64,
    pub tolerance: f64,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        BoundReport {
            name: name.into(),
            lhs,
            rhs,
            satisfied: lhs <= rhs + tolerance,
            slack: rhs - lhs,
            tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BConstants {
    pub a: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub b5: f64,
}

/// Poincaré/interpolation constants for exponents `p >= r >= 1` on a domain
/// of length `omega_len`.
pub fn b_constants(p: f64, r: f64, omega_len: f64) -> Result<BConstants> {
    if !(r >= 1.0 && p >= r && p.is_finite()) {
        return Err(Error::Parameter(format!("need p >= r >= 1, got p = {p}, r = {r}")));
    }
    if !(omega_len > 0.0) {
        return Err(Error::Parameter(format!("domain length must be > 0, got {omega_len}")));
    }
    let a = (1.0 / r - 1.0 / p) / (1.0 / r + 0.5);
    let b1 = omega_len.powf(p) / (p * 2f64.powf(p - 1.0));
    let b2 = (1.0 + r / 2.0).powf(a * p);
    let b3 = if p <= 2.0 {
        b1 * omega_len.powf((2.0 - p) / p)
    } else {
        b1.powf((p + 2.0) / 2.0) * b2
    };
    Ok(BConstants {
        a,
        b1,
        b2,
        b3,
        b4: 2f64.powf(p - 1.0) * b3,
        b5: (2.0 / omega_len).powf(p - 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub c8: f64,
    pub c9: f64,
}

/// The constants `c1..c9` of the local existence estimate for mass `m`.
pub fn c_constants(p: &Params, m: f64, delta: f64) -> Result<CConstants> {
    if !(m > 0.0) {
        return Err(Error::Parameter(format!("mass must be > 0, got {m}")));
    }
    let om = p.domain_length();
    let b42 = b_constants(4.0, 2.0, om)?;
    let b62 = b_constants(6.0, 2.0, om)?;
    let b32 = b_constants(3.0, 2.0, om)?;
    let wn = p.forcing().norms();
    let (a0, a1, a2) = (p.a0, p.a1, p.a2);
    let c1 = b42.b2 * b42.b2 / 8.0 + b62.b4 / 2.0;
    let c2 = m.powi(6) * b62.b5 / 2.0;
    let c3 = a1 * a1 / (2.0 * a0) + delta * a1.abs();
    let c4 = a1 * a1 / a0 * c1;
    let g = a2 * a2 / a0;
    let c5 = g * wn.w1_sup * wn.w1_sup * b32.b4;
    let c6 = a1 * a1 / a0 * c2
        + g * wn.w1_sup * wn.w1_sup * b32.b5 * m.powi(3)
        + delta * g * wn.w1_l2 * wn.w1_l2;
    let c7 = c4 + c5 + c6;
    let c8 = a1.abs() + a2.abs() * wn.w1_l2;
    let c9 = 2.0 * c3 * c8 / a0 + 2.0 * c7;
    Ok(CConstants {
        c1,
        c2,
        c3,
        c4,
        c5,
        c6,
        c7,
        c8,
        c9,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExistenceTime {
    /// Guaranteed existence time; `+∞` when `c9 = 0`.
    pub t_loc: f64,
    /// Set when `min h <= 0`, in which case `t_loc = 0`.
    pub infinite_entropy: bool,
}

/// `9/(40 c9) · min{1, (∫h_x² + 2(c3/a0)∫1/(2h))^{-2}}` with `δ = 0`.
pub fn local_existence_time(h: &PeriodicField, p: &Params) -> Result<ExistenceTime> {
    p.check_field(h)?;
    if h.min() <= 0.0 {
        return Ok(ExistenceTime {
            t_loc: 0.0,
            infinite_entropy: true,
        });
    }
    let c = c_constants(p, h.integrate(), 0.0)?;
    if c.c9 == 0.0 {
        return Ok(ExistenceTime {
            t_loc: f64::INFINITY,
            infinite_entropy: false,
        });
    }
    let v = gradient_sq(h) + 2.0 * c.c3 / p.a0 * entropy_integral(h, 0.0);
    Ok(ExistenceTime {
        t_loc: 9.0 / (40.0 * c.c9) * 1f64.min(v.powi(-2)),
        infinite_entropy: false,
    })
}

/// `∫h² <= 6^{2/3} M^{4/3} (∫h_x²)^{1/3} + M²/|Ω|` for nonnegative `h`.
pub fn interpolation_check(h: &PeriodicField) -> Result<BoundReport> {
    if let Some(v) = h.values().iter().find(|v| **v < 0.0) {
        return Err(Error::Input(format!("interpolation bound needs h >= 0, found {v}")));
    }
    let m = h.integrate();
    let lhs = h.dot(h)?;
    let rhs = 6f64.powf(2.0 / 3.0) * m.powf(4.0 / 3.0) * gradient_sq(h).cbrt()
        + m * m / h.grid().length();
    Ok(BoundReport::new("interpolation", lhs, rhs, 1e-12 * rhs.abs().max(1.0)))
}

/// Slope `|a2 a3| ‖w'‖_∞ (|Ω|² √K1 + 2M)` of the energy bound.
pub fn k_constant(p: &Params, k1: f64, m: f64) -> f64 {
    let om = p.domain_length();
    (p.a2 * p.a3).abs() * p.forcing().norms().w1_sup * (om * om * k1.max(0.0).sqrt() + 2.0 * m)
}

/// Additive constant of the H¹ growth bound (two cases in the sign of `a0 + a1`).
pub fn h1_offset(p: &Params, m: f64) -> f64 {
    let base = p.a2.abs() * p.forcing().norms().w_sup * m;
    let s = p.a0 + p.a1;
    if s <= 0.0 {
        base
    } else {
        base + m
            * m
            * (2.0 * 6f64.sqrt() * s.powf(1.5) / (3.0 * p.a0.sqrt())
                + s / (2.0 * p.domain_length()))
    }
}

/// `(4/a0)(E0 + K T + K3)`, the bound on `‖h(T)‖²_{H¹}`.
pub fn h1_growth_bound(e0_initial: f64, m: f64, t: f64, p: &Params, k1: f64) -> f64 {
    4.0 / p.a0 * (e0_initial + k_constant(p, k1, m) * t + h1_offset(p, m))
}

/// `E(T) + ∬ f g² <= E(0) + K T` over a trajectory. Backward Euler adds at
/// most the accumulated concavity defect to the left side, so that is
/// carried on the right.
pub fn dissipation_check(traj: &Trajectory, p: &Params, newton_tol: f64) -> BoundReport {
    let (Some(first), Some(last)) = (traj.snapshots.first(), traj.snapshots.last()) else {
        return BoundReport::new("dissipation", 0.0, 0.0, 0.0);
    };
    let d0 = first.diagnostics;
    let d1 = last.diagnostics;
    let k = k_constant(p, traj.k1_observed, d0.mass);
    let lhs = d1.energy + d1.dissipation_cum - d0.dissipation_cum;
    let rhs = d0.energy + k * (d1.t - d0.t) + traj.concavity_defect;
    let tol = 1e-6 * rhs.abs() + traj.steps.len() as f64 * newton_tol;
    BoundReport::new("dissipation", lhs, rhs, tol)
}

/// H¹ growth bound at every snapshot of `traj`.
pub fn h1_growth_reports(traj: &Trajectory, p: &Params) -> Vec<BoundReport> {
    let Some(first) = traj.snapshots.first() else {
        return Vec::new();
    };
    let d0 = first.diagnostics;
    traj.snapshots
        .iter()
        .map(|s| {
            let d = s.diagnostics;
            let rhs = h1_growth_bound(d0.energy, d0.mass, d.t, p, traj.k1_observed);
            BoundReport::new(format!("h1_growth@t={}", d.t), d.h1 * d.h1, rhs, 1e-12 * rhs.abs())
        })
        .collect()
}

/// `∫h_x²(T) <= max{‖w'‖₂², ∫h_{0x}²} exp(2 (a1² + a2²)/a0 ∫₀ᵀ ‖h‖_∞³)`.
pub fn gradient_growth_reports(traj: &Trajectory, p: &Params) -> Vec<BoundReport> {
    let Some(first) = traj.snapshots.first() else {
        return Vec::new();
    };
    let w1 = p.forcing().norms().w1_l2;
    let base = (w1 * w1).max(first.diagnostics.gradient_sq);
    let rate = 2.0 * (p.a1 * p.a1 + p.a2 * p.a2) / p.a0;
    traj.snapshots
        .iter()
        .map(|s| {
            let d = s.diagnostics;
            let rhs = base * (rate * d.sup_cubed_integral).exp();
            BoundReport::new(format!("gradient@t={}", d.t), d.gradient_sq, rhs, 1e-9 * rhs)
        })
        .collect()
}

/// `∫ ζ⁴/h` at every snapshot; infinite where `h <= 0` inside the support of `ζ`.
pub fn positivity_monitor(traj: &Trajectory, zeta: &PeriodicField) -> Result<Vec<f64>> {
    if let Some(v) = zeta.values().iter().find(|v| **v < 0.0) {
        return Err(Error::Input(format!("cutoff must be >= 0, found {v}")));
    }
    traj.snapshots
        .iter()
        .map(|s| {
            s.h.check_grid(zeta)?;
            let mut sum = 0.0;
            for (&z, &h) in zeta.values().iter().zip(s.h.values()) {
                if z == 0.0 {
                    continue;
                }
                if h <= 0.0 {
                    return Ok(f64::INFINITY);
                }
                sum += z.powi(4) / h;
            }
            Ok(sum * zeta.grid().dx())
        })
        .collect()
}

/// One rung of the existence-time ladder `T_{n+1} = T_n + T_loc(h(T_n))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderRung {
    pub t_n: f64,
    pub t_loc: f64,
}

/// Builds the ladder from the snapshots of `traj` (the latest snapshot at or
/// before `T_n` stands in for `h(T_n)`), stopping after `max_rungs` or when
/// the ladder passes the last snapshot.
pub fn existence_ladder(traj: &Trajectory, p: &Params, max_rungs: usize) -> Result<Vec<LadderRung>> {
    let mut rungs = Vec::new();
    let Some(end) = traj.last().map(|s| s.t) else {
        return Ok(rungs);
    };
    let mut t = 0.0;
    while rungs.len() < max_rungs && t <= end {
        let snap = traj
            .snapshots
            .iter()
            .rev()
            .find(|s| s.t <= t)
            .unwrap_or(&traj.snapshots[0]);
        let e = local_existence_time(&snap.h, p)?;
        rungs.push(LadderRung { t_n: t, t_loc: e.t_loc });
        if !(e.t_loc > 0.0 && e.t_loc.is_finite()) {
            break;
        }
        t += e.t_loc;
    }
    Ok(rungs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "period", rename_all = "snake_case")]
pub enum PeriodEstimate {
    Periodic(f64),
    /// Flat to within tolerance: the run has settled.
    Steady,
    /// No repeat within tolerance.
    Aperiodic,
    /// Too few samples or too short a window to decide.
    Inconclusive,
}

impl PeriodEstimate {
    pub fn period(&self) -> Option<f64> {
        match self {
            PeriodEstimate::Periodic(p) => Some(*p),
            _ => None,
        }
    }
}

/// Relative spread below which a series counts as settled.
const FLAT_REL: f64 = 1e-8;

/// Autocorrelation estimate of the period of `series` (pairs `(t, value)`,
/// increasing in `t`). A lag counts as a period when the normalized
/// autocorrelation there is at least `1 - tol`.
pub fn detect_period(series: &[(f64, f64)], tol: f64) -> PeriodEstimate {
    let n = series.len();
    if n < 16 {
        return PeriodEstimate::Inconclusive;
    }
    let (t0, t1) = (series[0].0, series[n - 1].0);
    if !(t1 > t0) {
        return PeriodEstimate::Inconclusive;
    }
    let dt = (t1 - t0) / (n - 1) as f64;
    let mut j = 0;
    let x: Vec<f64> = (0..n)
        .map(|i| {
            let t = t0 + dt * i as f64;
            while j + 2 < n && series[j + 1].0 < t {
                j += 1;
            }
            let (ta, va) = series[j];
            let (tb, vb) = series[j + 1];
            if tb > ta {
                va + (vb - va) * ((t - ta) / (tb - ta)).clamp(0.0, 1.0)
            } else {
                va
            }
        })
        .collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if var.sqrt() <= FLAT_REL * mean.abs() || var == 0.0 {
        return PeriodEstimate::Steady;
    }
    let max_lag = n / 2;
    let acf: Vec<f64> = (0..=max_lag)
        .map(|k| {
            let s: f64 = (0..n - k).map(|i| (x[i] - mean) * (x[i + k] - mean)).sum();
            s / ((n - k) as f64 * var)
        })
        .collect();
    let Some(zero) = acf.iter().position(|r| *r < 0.0) else {
        return PeriodEstimate::Aperiodic;
    };
    let mut best = None;
    for k in zero.max(1)..max_lag {
        if acf[k] >= acf[k - 1] && acf[k] >= acf[k + 1] && acf[k] > 0.0 {
            best = Some(k);
            break;
        }
    }
    let Some(k) = best else {
        // still climbing at the window edge: a repeat may lie beyond it
        let floor = acf[zero..].iter().copied().fold(f64::INFINITY, f64::min);
        return if acf[max_lag] > floor + 0.1 {
            PeriodEstimate::Inconclusive
        } else {
            PeriodEstimate::Aperiodic
        };
    };
    if acf[k] < 1.0 - tol {
        return PeriodEstimate::Aperiodic;
    }
    let (ym, y0, yp) = (acf[k - 1], acf[k], acf[k + 1]);
    let denom = ym - 2.0 * y0 + yp;
    let shift = if denom != 0.0 { 0.5 * (ym - yp) / denom } else { 0.0 };
    PeriodEstimate::Periodic((k as f64 + shift.clamp(-0.5, 0.5)) * dt)
}

/// Convenience: the standard bound reports for a finished run.
pub fn standard_reports(traj: &Trajectory, p: &Params, newton_tol: f64) -> Result<Vec<BoundReport>> {
    let mut out = vec![dissipation_check(traj, p, newton_tol)];
    for s in &traj.snapshots {
        if s.h.min() >= 0.0 {
            let mut r = interpolation_check(&s.h)?;
            r.name = format!("interpolation@t={}", s.t);
            out.push(r);
        }
    }
    out.extend(h1_growth_reports(traj, p));
    out.extend(gradient_growth_reports(traj, p));
    Ok(out)
}
