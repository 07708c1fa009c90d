//! Conservative implicit integrator for the regularized thin film equation.
//!
//! Finite-volume form on the periodic grid: with `ĥ = (h_i + h_{i+1})/2`,
//!
//! ```text
//! F_{i+1/2} = f(ĥ) g_{i+1/2} + a3 ĥ,
//! g_{i+1/2} = a0 (d2_{i+1} - d2_i)/dx + a1 (h_{i+1} - h_i)/dx + a2 (w_{i+1} - w_i)/dx,
//! dh_i/dt   = -(F_{i+1/2} - F_{i-1/2})/dx.
//! ```
//!
//! `g = -D⁺p` where `p` is the variational derivative of the discrete energy
//! in [`crate::model::energy`], so the semi-discrete flow dissipates that
//! energy exactly when `a2 a3 = 0`. Time stepping is backward Euler with
//! Newton iterations on the analytic Jacobian (periodic pentadiagonal).

use serde::{Deserialize, Serialize};

use crate::bounds::{Accumulators, DiagnosticsRecord};
use crate::error::{Error, Result, StepFailure};
use crate::grid::PeriodicField;
use crate::linalg::CyclicBanded;
use crate::model::{entropy_mean_mobility, mobility, mobility_prime, Params, RegularizationKnobs};

/// Step-size growth after an accepted step.
const DT_GROWTH: f64 = 1.2;
/// Halvings of a Newton update allowed when the residual grows.
const MAX_DAMPINGS: usize = 4;
/// `sup |dh/dt|` below which a step counts as stationary.
const STEADY_RATE: f64 = 1e-9;
/// Consecutive stationary steps that end a run early.
const STEADY_STEPS: usize = 10;

/// How the mobility is evaluated at cell interfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceMobility {
    /// `f(ĥ)` with `ĥ` the arithmetic mean.
    #[default]
    Arithmetic,
    /// `(h_{i+1} - h_i)/(G'(h_{i+1}) - G'(h_i))`, which makes the scheme
    /// dissipate the discrete entropy `Σ G(h_i) dx` as well. Falls back to
    /// the arithmetic form where a neighbour is not positive.
    Entropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_end: f64,
    /// Newton stops once `sup |R|` or the last update falls to `newton_tol * max(1, sup h)`.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Times at which a snapshot and diagnostics row are recorded, in
    /// addition to `t = 0` and `t_end`.
    pub snapshot_times: Vec<f64>,
    /// Also record at every positive multiple of this interval below `t_end`.
    pub snapshot_every: Option<f64>,
    pub knobs: RegularizationKnobs,
    pub interface_mobility: InterfaceMobility,
    /// Steps with `min h` below this are counted (never clamped).
    pub positivity_floor: f64,
    /// Stop once the solution has been stationary for several steps.
    pub steady_exit: bool,
    /// Exponent of the α-entropy reported in diagnostics, if any.
    pub alpha: Option<f64>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            dt_init: 1e-4,
            dt_min: 1e-12,
            dt_max: 0.1,
            t_end: 1.0,
            newton_tol: 1e-10,
            newton_max_iter: 12,
            snapshot_times: Vec::new(),
            snapshot_every: None,
            knobs: RegularizationKnobs::default(),
            interface_mobility: InterfaceMobility::Arithmetic,
            positivity_floor: 0.0,
            steady_exit: true,
            alpha: None,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad(format!(
                "need 0 < dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            ));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be > 0, got {}", self.t_end));
        }
        if !(self.newton_tol > 0.0) {
            return bad(format!("newton_tol must be > 0, got {}", self.newton_tol));
        }
        if self.newton_max_iter == 0 {
            return bad("newton_max_iter must be >= 1".into());
        }
        if let Some(t) = self
            .snapshot_times
            .iter()
            .find(|t| !(t.is_finite() && **t >= 0.0 && **t <= self.t_end))
        {
            return bad(format!("snapshot time {t} outside [0, t_end]"));
        }
        if let Some(e) = self.snapshot_every {
            if !(e > 0.0 && self.t_end / e <= 1e6) {
                return bad(format!("snapshot_every must be > 0 and at least t_end / 1e6, got {e}"));
            }
        }
        if let Some(a) = self.alpha {
            if !(a > -0.5 && a < 1.0) || a == 0.0 {
                return bad(format!("alpha must lie in (-1/2, 1) and be nonzero, got {a}"));
            }
        }
        self.knobs.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveState {
    pub t: f64,
    pub h: PeriodicField,
    /// Step size to try next.
    pub dt: f64,
    pub step_count: usize,
    pub newton_iters_last: usize,
}

impl EvolveState {
    pub fn new(h: PeriodicField, cfg: &EvolveConfig) -> Self {
        EvolveState {
            t: 0.0,
            h,
            dt: cfg.dt_init,
            step_count: 0,
            newton_iters_last: 0,
        }
    }
}

/// Per-step record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepLog {
    pub t: f64,
    pub dt: f64,
    pub energy: f64,
    pub mass: f64,
    pub min_h: f64,
    pub newton_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub h: PeriodicField,
    pub diagnostics: DiagnosticsRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    /// Stationary from time `t` on; later snapshots repeat the final state.
    SteadyReached { t: f64 },
    Failed { message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub steps: Vec<StepLog>,
    pub termination: Termination,
    /// Largest value of `∫h_x² + (|a1|/a0)(|a1|/a0 + 2δ)∫G_ε + a0∬f h_xxx²`
    /// seen along the run.
    pub k1_observed: f64,
    /// Accepted steps whose `min h` fell below `positivity_floor`.
    pub floor_violations: usize,
    /// Total concavity defect of the implicit steps, see
    /// [`Accumulators::concavity_defect`].
    pub concavity_defect: f64,
}

impl Trajectory {
    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    pub fn diagnostics(&self) -> impl Iterator<Item = &DiagnosticsRecord> {
        self.snapshots.iter().map(|s| &s.diagnostics)
    }
}

/// A run that stopped on a solver error; `partial` holds everything recorded
/// before the failure.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Trajectory,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.error)
    }
}

impl std::error::Error for RunFailure {}

/// `h0 + ε^θ`.
pub fn initial_lift(h0: &PeriodicField, knobs: RegularizationKnobs) -> Result<PeriodicField> {
    if let Some(v) = h0.values().iter().find(|v| **v < 0.0) {
        return Err(Error::Input(format!("initial data must be >= 0, found {v}")));
    }
    knobs.validate()?;
    let lift = if knobs.epsilon > 0.0 {
        knobs.epsilon.powf(knobs.theta)
    } else {
        0.0
    };
    Ok(h0.map(|v| v + lift))
}

/// Interface quantities of the flux.
struct FluxParts {
    hhat: Vec<f64>,
    mob: Vec<f64>,
    /// `∂mob/∂h_i` and `∂mob/∂h_{i+1}`
    dmob: Vec<[f64; 2]>,
    g: Vec<f64>,
    flux: Vec<f64>,
}

fn flux_parts(
    h: &[f64],
    p: &Params,
    knobs: RegularizationKnobs,
    iface: InterfaceMobility,
    dx: f64,
) -> FluxParts {
    let n = h.len();
    let inv = 1.0 / dx;
    let inv2 = inv * inv;
    let w1 = p.forcing().w_prime_half();
    let d2: Vec<f64> = (0..n)
        .map(|i| (h[(i + 1) % n] - 2.0 * h[i] + h[(i + n - 1) % n]) * inv2)
        .collect();
    let mut parts = FluxParts {
        hhat: vec![0.0; n],
        mob: vec![0.0; n],
        dmob: vec![[0.0; 2]; n],
        g: vec![0.0; n],
        flux: vec![0.0; n],
    };
    for i in 0..n {
        let j = (i + 1) % n;
        let hh = 0.5 * (h[i] + h[j]);
        let g = p.a0 * (d2[j] - d2[i]) * inv + p.a1 * (h[j] - h[i]) * inv + p.a2 * w1[i];
        let entropic = match iface {
            InterfaceMobility::Entropy => entropy_mean_mobility(h[i], h[j], knobs),
            InterfaceMobility::Arithmetic => None,
        };
        let (f, df) = entropic.map_or_else(
            || {
                let d = 0.5 * mobility_prime(hh, knobs);
                (mobility(hh, knobs), [d, d])
            },
            |(m, da, db)| (m, [da, db]),
        );
        parts.hhat[i] = hh;
        parts.mob[i] = f;
        parts.dmob[i] = df;
        parts.g[i] = g;
        parts.flux[i] = f * g + p.a3 * hh;
    }
    parts
}

/// Interface fluxes `F_{i+1/2}`; entry `i` sits at `x_{i+1/2}`.
pub fn flux(h: &PeriodicField, p: &Params, knobs: RegularizationKnobs) -> Result<PeriodicField> {
    p.check_field(h)?;
    let parts = flux_parts(h.values(), p, knobs, InterfaceMobility::Arithmetic, h.grid().dx());
    PeriodicField::new(*h.grid(), parts.flux)
}

/// Semi-discrete right-hand side `dh_i/dt = -(F_{i+1/2} - F_{i-1/2})/dx`.
pub fn rate(h: &PeriodicField, p: &Params, knobs: RegularizationKnobs) -> Result<PeriodicField> {
    let f = flux(h, p, knobs)?;
    let dx = h.grid().dx();
    let n = h.len();
    let fv = f.values();
    let v = (0..n).map(|i| -(fv[i] - fv[(i + n - 1) % n]) / dx).collect();
    PeriodicField::new(*h.grid(), v)
}

/// `R = h - h_old + dt (F_{i+1/2} - F_{i-1/2})/dx`, returning `R` and its sup norm.
fn residual(h: &[f64], h_old: &[f64], parts: &FluxParts, dt: f64, dx: f64) -> (Vec<f64>, f64) {
    let n = h.len();
    let c = dt / dx;
    let mut sup = 0.0f64;
    let r: Vec<f64> = (0..n)
        .map(|i| {
            let v = h[i] - h_old[i] + c * (parts.flux[i] - parts.flux[(i + n - 1) % n]);
            sup = sup.max(v.abs());
            v
        })
        .collect();
    let finite = r.iter().all(|v| v.is_finite());
    (r, if finite { sup } else { f64::NAN })
}

fn assemble_jacobian(
    jac: &mut CyclicBanded,
    parts: &FluxParts,
    p: &Params,
    dt: f64,
    dx: f64,
) {
    jac.clear();
    let n = parts.flux.len();
    let c = dt / dx;
    let a0 = p.a0 / (dx * dx * dx);
    let a1 = p.a1 / dx;
    for j in 0..n {
        let f = parts.mob[j];
        let [dl, dr] = parts.dmob[j];
        let g = parts.g[j];
        // dF_j/dh_{j+k} for k = -1, 0, 1, 2
        let dfdh = [
            -f * a0,
            f * (3.0 * a0 - a1) + dl * g + 0.5 * p.a3,
            f * (-3.0 * a0 + a1) + dr * g + 0.5 * p.a3,
            f * a0,
        ];
        let next = (j + 1) % n;
        for (k, d) in (-1isize..=2).zip(dfdh) {
            jac.add_offset(j, k, c * d);
            jac.add_offset(next, k - 1, -c * d);
        }
        jac.add_offset(j, 0, 1.0);
    }
}

enum NewtonOutcome {
    Converged { h: Vec<f64>, iters: usize },
    Failed { residual: f64 },
}

fn newton(
    h_old: &[f64],
    p: &Params,
    cfg: &EvolveConfig,
    dt: f64,
    dx: f64,
    jac: &mut CyclicBanded,
) -> Result<NewtonOutcome> {
    let knobs = cfg.knobs;
    let tol = cfg.newton_tol * h_old.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut h = h_old.to_vec();
    let mut parts = flux_parts(&h, p, knobs, cfg.interface_mobility, dx);
    let (mut r, mut sup) = residual(&h, h_old, &parts, dt, dx);
    for iter in 1..=cfg.newton_max_iter {
        assemble_jacobian(jac, &parts, p, dt, dx);
        let delta = match jac.solve(&r) {
            Ok(d) => d,
            Err(Error::Singular(_)) => return Ok(NewtonOutcome::Failed { residual: sup }),
            Err(e) => return Err(e),
        };
        let mut scale = 1.0;
        let mut trial;
        let mut trial_parts;
        let mut trial_r;
        let mut trial_sup;
        let mut dampings = 0;
        loop {
            trial = h.iter().zip(&delta).map(|(a, d)| a - scale * d).collect::<Vec<f64>>();
            if trial.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged);
            }
            trial_parts = flux_parts(&trial, p, knobs, cfg.interface_mobility, dx);
            (trial_r, trial_sup) = residual(&trial, h_old, &trial_parts, dt, dx);
            if trial_sup.is_nan() {
                return Err(Error::Diverged);
            }
            if trial_sup <= sup || dampings == MAX_DAMPINGS {
                break;
            }
            scale *= 0.5;
            dampings += 1;
        }
        let update = delta.iter().fold(0.0f64, |m, d| m.max((scale * d).abs()));
        h = trial;
        parts = trial_parts;
        r = trial_r;
        sup = trial_sup;
        // the second test catches residuals stuck at the rounding floor of
        // the a0/dx⁴ terms on fine grids
        if sup <= tol || update <= tol {
            return Ok(NewtonOutcome::Converged { h, iters: iter });
        }
    }
    Ok(NewtonOutcome::Failed { residual: sup })
}

/// Outcome of one accepted step, with the step size actually used.
struct Accepted {
    state: EvolveState,
    dt_used: f64,
    parts: FluxParts,
}

fn advance(
    state: &EvolveState,
    p: &Params,
    cfg: &EvolveConfig,
    target: f64,
    jac: &mut CyclicBanded,
) -> Result<Accepted> {
    let dt_cap = target - state.t;
    let dx = state.h.grid().dx();
    let h_old = state.h.values();
    let mut dt_pref = state.dt;
    let mut last_residual = f64::NAN;
    let tol = cfg.newton_tol * state.h.sup_abs().max(1.0);
    loop {
        if dt_pref < cfg.dt_min {
            return Err(StepFailure {
                t: state.t,
                dt: dt_pref,
                residual: last_residual,
            }
            .into());
        }
        let dt = dt_pref.min(dt_cap);
        match newton(h_old, p, cfg, dt, dx, jac)? {
            NewtonOutcome::Converged { h, iters } => {
                let min = h.iter().copied().fold(f64::INFINITY, f64::min);
                if min < -10.0 * tol {
                    last_residual = min;
                    dt_pref *= 0.5;
                    continue;
                }
                let parts = flux_parts(&h, p, cfg.knobs, cfg.interface_mobility, dx);
                let clamped = dt < dt_pref;
                let next_dt = if clamped {
                    dt_pref
                } else {
                    (dt_pref * DT_GROWTH).min(cfg.dt_max)
                };
                let t = if dt == dt_cap { target } else { state.t + dt };
                return Ok(Accepted {
                    state: EvolveState {
                        t,
                        h: PeriodicField::new(*state.h.grid(), h)?,
                        dt: next_dt,
                        step_count: state.step_count + 1,
                        newton_iters_last: iters,
                    },
                    dt_used: dt,
                    parts,
                });
            }
            NewtonOutcome::Failed { residual } => {
                last_residual = residual;
                dt_pref *= 0.5;
            }
        }
    }
}

/// One backward Euler step starting from `state.dt`, halving on failure.
pub fn step(state: &EvolveState, p: &Params, cfg: &EvolveConfig) -> Result<EvolveState> {
    p.check_field(&state.h)?;
    if state.h.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged);
    }
    let mut jac = CyclicBanded::new(state.h.len(), 2, 0);
    advance(state, p, cfg, f64::INFINITY, &mut jac).map(|a| a.state)
}

/// Lifts `h0`, integrates to `cfg.t_end`, and records snapshots.
pub fn run(
    h0: &PeriodicField,
    p: &Params,
    cfg: &EvolveConfig,
) -> std::result::Result<Trajectory, Box<RunFailure>> {
    let empty = || Trajectory {
        snapshots: Vec::new(),
        steps: Vec::new(),
        termination: Termination::Failed {
            message: String::new(),
        },
        k1_observed: 0.0,
        floor_violations: 0,
        concavity_defect: 0.0,
    };
    let fail_early = |error: Error| {
        let mut partial = empty();
        partial.termination = Termination::Failed {
            message: error.to_string(),
        };
        Box::new(RunFailure { error, partial })
    };
    cfg.validate().map_err(fail_early)?;
    p.check_field(h0).map_err(fail_early)?;
    let h = initial_lift(h0, cfg.knobs).map_err(fail_early)?;

    let mut targets: Vec<f64> = cfg
        .snapshot_times
        .iter()
        .copied()
        .filter(|t| *t > 0.0 && *t < cfg.t_end)
        .collect();
    if let Some(e) = cfg.snapshot_every {
        targets.extend((1..).map(|k| k as f64 * e).take_while(|t| *t < cfg.t_end));
    }
    targets.push(cfg.t_end);
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    let mut traj = empty();
    traj.termination = Termination::Completed;
    let mut acc = Accumulators::default();
    let measure = |t: f64, h: &PeriodicField, acc: &Accumulators| {
        DiagnosticsRecord::measure(t, h, p, cfg.knobs, cfg.alpha, acc)
    };
    let first = measure(0.0, &h, &acc);
    traj.k1_observed = first.k1_lhs;
    traj.snapshots.push(Snapshot {
        t: 0.0,
        h: h.clone(),
        diagnostics: first,
    });

    let mut state = EvolveState::new(h, cfg);
    let mut jac = CyclicBanded::new(state.h.len(), 2, 0);
    let dx = state.h.grid().dx();
    let mut quiet = 0usize;
    let mut next = 0usize;
    while next < targets.len() {
        let target = targets[next];
        let accepted = match advance(&state, p, cfg, target, &mut jac) {
            Ok(a) => a,
            Err(error) => {
                traj.termination = Termination::Failed {
                    message: error.to_string(),
                };
                return Err(Box::new(RunFailure {
                    error,
                    partial: traj,
                }));
            }
        };
        let dt = accepted.dt_used;
        let new = accepted.state;
        acc.record_step(&accepted.parts.mob, &accepted.parts.g, new.h.values(), dt, dx);
        acc.record_increment(state.h.values(), new.h.values(), p.a1, dx);
        traj.concavity_defect = acc.concavity_defect;

        let rate_sup = new
            .h
            .values()
            .iter()
            .zip(state.h.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / dt;
        let norms = new.h.norms();
        if norms.min < cfg.positivity_floor {
            traj.floor_violations += 1;
        }
        traj.steps.push(StepLog {
            t: new.t,
            dt,
            energy: crate::model::energy(&new.h, p).unwrap_or(f64::NAN),
            mass: new.h.integrate(),
            min_h: norms.min,
            newton_iters: new.newton_iters_last,
        });
        let k1 = acc.k1_lhs(&new.h, p, cfg.knobs);
        traj.k1_observed = traj.k1_observed.max(k1);
        state = new;

        quiet = if rate_sup < STEADY_RATE { quiet + 1 } else { 0 };
        let steady = cfg.steady_exit && quiet >= STEADY_STEPS;

        if state.t >= target {
            let diag = measure(target, &state.h, &acc);
            traj.snapshots.push(Snapshot {
                t: target,
                h: state.h.clone(),
                diagnostics: diag,
            });
            next += 1;
        }
        if steady && next < targets.len() {
            for &t in &targets[next..] {
                let diag = measure(t, &state.h, &acc);
                traj.snapshots.push(Snapshot {
                    t,
                    h: state.h.clone(),
                    diagnostics: diag,
                });
            }
            traj.termination = Termination::SteadyReached { t: state.t };
            break;
        }
    }
    Ok(traj)
}
