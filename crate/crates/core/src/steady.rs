//! Steady states of the rotating-cylinder film
//!
//! ```text
//! h - (μ/3) h³ cos x + (χ/3) h³ (h_x + h_xxx) = q
//! ```
//!
//! With `χ = 0` this is a cubic in `h` at every `x`, solved in closed form.
//! With `χ > 0` it is a periodic boundary value problem solved by Newton's
//! method, optionally with the mass prescribed and `q` as an unknown.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, PeriodicField};
use crate::linalg::CyclicBanded;
use crate::model::{Params, RegularizationKnobs};

/// `|cos x|` below this is treated as zero in the cubic.
const COS_ZERO: f64 = 4.0 * f64::EPSILON;
/// Roots closer than this (relative) are reported once.
const ROOT_MERGE: f64 = 1e-7;
const MAX_DAMPINGS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyProfile {
    pub h: PeriodicField,
    pub q: f64,
    pub mu: f64,
    pub chi: f64,
    pub residual_sup: f64,
    pub mass: f64,
}

impl SteadyProfile {
    /// Wraps `h` as a candidate for `(q, μ, χ)`, evaluating its residual.
    pub fn new(h: PeriodicField, q: f64, mu: f64, chi: f64) -> Self {
        let residual_sup = capillary_residual_field(&h, q, mu, chi).sup_abs();
        let mass = h.integrate();
        SteadyProfile {
            h,
            q,
            mu,
            chi,
            residual_sup,
            mass,
        }
    }

    pub fn beta(&self) -> f64 {
        self.q * self.q * self.mu / 3.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuationMode {
    /// `target` is the flux `q`.
    FixedFlux,
    /// `target` is the mass `∫h`; `q` becomes an unknown.
    FixedMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuationStep {
    pub mode: ContinuationMode,
    pub target: f64,
    #[serde(default = "default_max_newton")]
    pub max_newton: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_max_newton() -> usize {
    30
}

fn default_tol() -> f64 {
    1e-10
}

impl ContinuationStep {
    pub fn flux(q: f64) -> Self {
        ContinuationStep {
            mode: ContinuationMode::FixedFlux,
            target: q,
            max_newton: default_max_newton(),
            tol: default_tol(),
        }
    }

    pub fn mass(m: f64) -> Self {
        ContinuationStep {
            mode: ContinuationMode::FixedMass,
            ..Self::flux(m)
        }
    }

    fn with_target(self, target: f64) -> Self {
        ContinuationStep { target, ..self }
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("mu must be > 0, got {mu}")))
    }
}

/// `2/(3√μ)`: largest flux with a smooth positive zero-surface-tension state.
pub fn critical_flux(mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok(2.0 / (3.0 * mu.sqrt()))
}

/// `(2/3)√(2/μ)`: above this flux no positive steady state exists for any `χ`.
pub fn nonexistence_threshold(mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok(2.0 / 3.0 * (2.0 / mu).sqrt())
}

/// The older, weaker bound `2√(3/μ)`, kept for comparison.
pub fn pukhnachov_bound(mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok(2.0 * (3.0 / mu).sqrt())
}

/// Positive real roots of `(μ cos x/3) h³ - h + q = 0`, ascending.
pub fn moffatt_roots(mu: f64, q: f64, x: f64) -> Vec<f64> {
    let cx = x.cos();
    if cx.abs() <= COS_ZERO || mu == 0.0 {
        return if q > 0.0 { vec![q] } else { Vec::new() };
    }
    let c = mu * cx / 3.0;
    // depressed form t³ + P t + Q = 0
    let p = -1.0 / c;
    let qq = q / c;
    let mut roots = Vec::with_capacity(3);
    if p < 0.0 {
        let disc = qq * qq / 4.0 + p * p * p / 27.0;
        if disc <= 0.0 {
            let m = 2.0 * (-p / 3.0).sqrt();
            let arg = (3.0 * qq / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
            let phi = arg.acos() / 3.0;
            for k in 0..3 {
                roots.push(m * (phi - 2.0 * PI * k as f64 / 3.0).cos());
            }
        } else {
            let s = disc.sqrt();
            roots.push((-qq / 2.0 + s).cbrt() + (-qq / 2.0 - s).cbrt());
        }
    } else {
        let m = 2.0 * (p / 3.0).sqrt();
        let arg = 3.0 * qq / (2.0 * p) * (3.0 / p).sqrt();
        roots.push(-m * (arg.asinh() / 3.0).sinh());
    }
    for r in roots.iter_mut() {
        *r = polish(c, q, *r);
    }
    roots.retain(|r| *r > 0.0 && r.is_finite());
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= ROOT_MERGE * b.abs().max(1.0));
    roots
}

fn polish(c: f64, q: f64, mut h: f64) -> f64 {
    for _ in 0..3 {
        let f = c * h * h * h - h + q;
        let d = 3.0 * c * h * h - 1.0;
        // near a double root Newton loses accuracy instead of gaining it
        if d.abs() < 1e-6 {
            break;
        }
        let nh = h - f / d;
        if (c * nh * nh * nh - nh + q).abs() >= f.abs() {
            break;
        }
        h = nh;
    }
    h
}

/// The smooth zero-surface-tension profile, or `None` when `q` is at or
/// above the critical flux.
pub fn moffatt_profile(mu: f64, q: f64, grid: Grid) -> Result<Option<SteadyProfile>> {
    check_mu(mu)?;
    if !(q > 0.0) {
        return Err(Error::Domain(format!("flux must be > 0, got {q}")));
    }
    if q >= critical_flux(mu)? {
        return Ok(None);
    }
    let mut h = Vec::with_capacity(grid.n());
    for x in grid.nodes() {
        let roots = moffatt_roots(mu, q, x);
        let cx = x.cos();
        let pick = if cx > COS_ZERO {
            let cap = 1.0 / (mu * cx).sqrt();
            roots.iter().copied().rfind(|r| *r <= cap * (1.0 + 1e-12))
        } else {
            roots.first().copied()
        };
        match pick {
            Some(r) => h.push(r),
            None => return Err(Error::RootFinder { x }),
        }
    }
    let h = PeriodicField::new(grid, h)?;
    Ok(Some(SteadyProfile::new(h, q, mu, 0.0)))
}

/// `q + q³ cos x / 3`, the small-flux expansion (at `μ = 1`).
pub fn asymptotic_guess(q: f64, grid: Grid) -> PeriodicField {
    grid.sample(|x| q + q * q * q * x.cos() / 3.0)
}

fn capillary_residual_field(h: &PeriodicField, q: f64, mu: f64, chi: f64) -> PeriodicField {
    let grid = *h.grid();
    let d1 = h.d1();
    let d3 = h.d3();
    let v = h
        .values()
        .iter()
        .enumerate()
        .map(|(i, &hi)| {
            let h3 = hi * hi * hi;
            hi - mu / 3.0 * h3 * grid.x(i).cos() + chi / 3.0 * h3 * (d1.values()[i] + d3.values()[i])
                - q
        })
        .collect();
    PeriodicField::new(grid, v).unwrap_or_else(|_| grid.constant(f64::NAN))
}

/// Pointwise residual `h - (μ/3)h³cos x + (χ/3)h³(d1 h + d3 h) - q`.
pub fn capillary_residual(prof: &SteadyProfile) -> PeriodicField {
    capillary_residual_field(&prof.h, prof.q, prof.mu, prof.chi)
}

fn assemble(jac: &mut CyclicBanded, h: &[f64], grid: &Grid, mu: f64, chi: f64, fixed_mass: bool) {
    jac.clear();
    let n = h.len();
    let dx = grid.dx();
    let (c1, c3) = (0.5 / dx, 1.0 / (dx * dx * dx));
    let at = |i: isize| h[i.rem_euclid(n as isize) as usize];
    for i in 0..n {
        let ii = i as isize;
        let hi = h[i];
        let d = (at(ii + 1) - at(ii - 1)) * c1
            + (at(ii + 2) - 2.0 * at(ii + 1) + 2.0 * at(ii - 1) - at(ii - 2)) * 0.5 * c3;
        let cx = grid.x(i).cos();
        jac.add_offset(i, 0, 1.0 - mu * hi * hi * cx + chi * hi * hi * d);
        let s = chi / 3.0 * hi * hi * hi;
        if s != 0.0 {
            jac.add_offset(i, 2, s * 0.5 * c3);
            jac.add_offset(i, 1, s * (c1 - c3));
            jac.add_offset(i, -1, s * (-c1 + c3));
            jac.add_offset(i, -2, -s * 0.5 * c3);
        }
        if fixed_mass {
            jac.add(i, n, -1.0);
            jac.add(n, i, dx);
        }
    }
}

/// Newton solve of the capillary problem starting from `init`.
pub fn capillary_solve(init: &SteadyProfile, step: &ContinuationStep) -> Result<SteadyProfile> {
    if !(step.tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be > 0, got {}", step.tol)));
    }
    if init.h.min() <= 0.0 {
        return Err(Error::BranchLost { min_h: init.h.min() });
    }
    let grid = *init.h.grid();
    let (mu, chi) = (init.mu, init.chi);
    let fixed_mass = step.mode == ContinuationMode::FixedMass;
    let n = grid.n();
    let mut h = init.h.clone();
    let mut q = if fixed_mass { init.q } else { step.target };
    let mass_scale = grid.length();

    let eval = |h: &PeriodicField, q: f64| -> (Vec<f64>, f64) {
        let mut r = capillary_residual_field(h, q, mu, chi).into_values();
        let mut sup = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if fixed_mass {
            let mr = h.integrate() - step.target;
            sup = sup.max(mr.abs() / mass_scale);
            r.push(mr);
        }
        if r.iter().any(|v| !v.is_finite()) {
            sup = f64::NAN;
        }
        (r, sup)
    };

    let mut jac = CyclicBanded::new(n, 2, usize::from(fixed_mass));
    let (mut r, mut sup) = eval(&h, q);
    let mut iters = 0;
    while !(sup <= step.tol) {
        if sup.is_nan() {
            return Err(Error::Diverged);
        }
        if iters == step.max_newton {
            return Err(Error::NoConvergence { residual: sup });
        }
        iters += 1;
        assemble(&mut jac, h.values(), &grid, mu, chi, fixed_mass);
        let delta = jac.solve(&r).map_err(|_| Error::NoConvergence { residual: sup })?;
        let mut scale = 1.0;
        let mut dampings = 0;
        loop {
            let trial: Vec<f64> = h
                .values()
                .iter()
                .zip(&delta)
                .map(|(a, d)| a - scale * d)
                .collect();
            let tq = if fixed_mass { q - scale * delta[n] } else { q };
            let min = trial.iter().copied().fold(f64::INFINITY, f64::min);
            if !min.is_finite() {
                return Err(Error::Diverged);
            }
            let th = PeriodicField::new(grid, trial)?;
            let (tr, ts) = eval(&th, tq);
            let worse = !(ts <= sup);
            if (!worse && min > 0.0) || dampings == MAX_DAMPINGS {
                if min <= 0.0 {
                    return Err(Error::BranchLost { min_h: min });
                }
                h = th;
                q = tq;
                r = tr;
                sup = ts;
                break;
            }
            scale *= 0.5;
            dampings += 1;
        }
    }
    let mut prof = SteadyProfile::new(h, q, mu, chi);
    prof.residual_sup = prof.residual_sup.max(sup);
    Ok(prof)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Solvability {
    pub r0: f64,
    pub r1: f64,
    pub beta: f64,
    /// `β > 8/27`, which no steady state can have.
    pub nonexistence_violated: bool,
}

/// With `y = h/q`: `r0 = ∫(1/y² - 1/y³)`, `r1 = ∫(1/y² - 1/y³)cos x - πβ`,
/// `β = q²μ/3`. Both vanish on a steady state.
pub fn solvability_residuals(prof: &SteadyProfile) -> Result<Solvability> {
    if prof.h.min() <= 0.0 {
        return Err(Error::Domain(format!("profile must be positive, min h = {}", prof.h.min())));
    }
    if !(prof.q > 0.0) {
        return Err(Error::Domain(format!("flux must be > 0, got {}", prof.q)));
    }
    let grid = prof.h.grid();
    let w: Vec<f64> = prof
        .h
        .values()
        .iter()
        .map(|&h| {
            let y = h / prof.q;
            1.0 / (y * y) - 1.0 / (y * y * y)
        })
        .collect();
    let dx = grid.dx();
    let r0 = w.iter().sum::<f64>() * dx;
    let c: f64 = w.iter().enumerate().map(|(i, v)| v * grid.x(i).cos()).sum::<f64>() * dx;
    let beta = prof.beta();
    Ok(Solvability {
        r0,
        r1: c - PI * beta,
        beta,
        nonexistence_violated: beta > 8.0 / 27.0,
    })
}

/// A continued branch and, when it ended early, why.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub profiles: Vec<SteadyProfile>,
    pub stopped: Option<Error>,
}

fn parameter(prof: &SteadyProfile, mode: ContinuationMode) -> f64 {
    match mode {
        ContinuationMode::FixedFlux => prof.q,
        ContinuationMode::FixedMass => prof.mass,
    }
}

fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::BranchLost { .. } | Error::NoConvergence { .. } | Error::Diverged
    )
}

/// Natural-parameter continuation through `schedule`. A failed step is
/// bisected until the increment drops below `min_increment`; the branch
/// then ends at the last converged profile.
pub fn continue_branch(
    start: &SteadyProfile,
    schedule: &[ContinuationStep],
    min_increment: f64,
) -> Result<Branch> {
    let mut profiles = vec![start.clone()];
    for step in schedule {
        let mut target = step.target;
        loop {
            let prev = profiles.last().expect("branch starts non-empty");
            match capillary_solve(prev, &step.with_target(target)) {
                Ok(p) => {
                    profiles.push(p);
                    if target == step.target {
                        break;
                    }
                    target = step.target;
                }
                Err(e) if recoverable(&e) => {
                    let from = parameter(prev, step.mode);
                    let inc = 0.5 * (target - from);
                    if !(inc.abs() >= min_increment) {
                        if profiles.len() == 1 {
                            return Err(e);
                        }
                        return Ok(Branch {
                            profiles,
                            stopped: Some(e),
                        });
                    }
                    target = from + inc;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(Branch {
        profiles,
        stopped: None,
    })
}

/// Branch table with columns `step,q,mass,min_h,max_h,residual_sup,beta`.
pub fn write_branch_csv<W: Write>(mut out: W, profiles: &[SteadyProfile]) -> Result<()> {
    writeln!(out, "step,q,mass,min_h,max_h,residual_sup,beta")?;
    for (i, p) in profiles.iter().enumerate() {
        writeln!(
            out,
            "{i},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            p.q,
            p.mass,
            p.h.min(),
            p.h.max(),
            p.residual_sup,
            p.beta()
        )?;
    }
    Ok(())
}

/// Steady flux test for a general state: `(mean F, sup |F - mean F|)` over the
/// interface fluxes of the evolution scheme. A steady state has constant flux.
pub fn flux_spread(h: &PeriodicField, p: &Params, knobs: RegularizationKnobs) -> Result<(f64, f64)> {
    let f = crate::evolve::flux(h, p, knobs)?;
    let mean = f.values().iter().sum::<f64>() / f.len() as f64;
    let spread = f.values().iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
    Ok((mean, spread))
}
