//! Run configuration: TOML text in, validated [`RunConfig`] out.

use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thinfilm::evolve::EvolveConfig;
use thinfilm::model::from_physical;
use thinfilm::{Forcing, Grid, GridSpec, Params, PeriodicField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Evolve,
    Steady,
    Sweep,
    Check,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Evolve => "evolve",
            Mode::Steady => "steady",
            Mode::Sweep => "sweep",
            Mode::Check => "check",
        };
        f.write_str(s)
    }
}

/// A configuration error, always tagged with the offending key path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingSpec {
    Sine,
    Zero,
    /// Tabulated `w` read from an `x,w` CSV.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    /// `[a0, a1, a2, a3]`
    pub a: [f64; 4],
    #[serde(default = "sine")]
    pub forcing: ForcingSpec,
}

fn sine() -> ForcingSpec {
    ForcingSpec::Sine
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalSpec {
    pub chi: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialData {
    Constant(f64),
    /// `mean + Σ cos[k-1] cos(kx) + sin[k-1] sin(kx)`
    Trig(TrigSpec),
    /// An `x,h` CSV on the configured grid.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigSpec {
    pub mean: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyParameter {
    Flux,
    Mass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadySpec {
    #[serde(default = "flux")]
    pub parameter: SteadyParameter,
    /// Continuation targets, visited in order.
    pub values: Vec<f64>,
    #[serde(default = "min_increment")]
    pub min_increment: f64,
    #[serde(default = "steady_tol")]
    pub tol: f64,
    #[serde(default = "max_newton")]
    pub max_newton: usize,
}

fn flux() -> SteadyParameter {
    SteadyParameter::Flux
}
fn min_increment() -> f64 {
    1e-4
}
fn steady_tol() -> f64 {
    1e-10
}
fn max_newton() -> usize {
    30
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    A0,
    A1,
    A2,
    A3,
    Chi,
    Mu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Worker count; `None` uses every core.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Fraction of the run, counted from the end, used for period detection.
    #[serde(default = "half")]
    pub period_window: f64,
    #[serde(default = "period_tol")]
    pub period_tol: f64,
}

fn half() -> f64 {
    0.5
}
fn period_tol() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    /// Random nonnegative trig polynomials fed to the interpolation check.
    #[serde(default = "samples")]
    pub samples: usize,
    #[serde(default = "max_degree")]
    pub max_degree: usize,
    #[serde(default = "max_rungs")]
    pub max_rungs: usize,
}

fn samples() -> usize {
    200
}
fn max_degree() -> usize {
    8
}
fn max_rungs() -> usize {
    8
}

impl Default for CheckSpec {
    fn default() -> Self {
        CheckSpec {
            samples: samples(),
            max_degree: max_degree(),
            max_rungs: max_rungs(),
        }
    }
}

/// The file as written, before cross-field validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub grid: GridSpec,
    #[serde(default)]
    pub params: Option<ParamsSpec>,
    #[serde(default)]
    pub physical: Option<PhysicalSpec>,
    #[serde(default)]
    pub initial: Option<InitialData>,
    #[serde(default)]
    pub evolve: Option<EvolveConfig>,
    #[serde(default)]
    pub steady: Option<SteadySpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub check: Option<CheckSpec>,
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub raw: RawConfig,
    pub grid: Grid,
    /// Absent in steady mode, which works from `physical` directly.
    pub params: Option<Params>,
    pub h0: Option<PeriodicField>,
    pub output_dir: PathBuf,
    /// Directory relative file paths resolve against.
    pub base: PathBuf,
}

impl RunConfig {
    pub fn evolve(&self) -> &EvolveConfig {
        self.raw.evolve.as_ref().expect("validated")
    }

    pub fn params(&self) -> &Params {
        self.params.as_ref().expect("validated")
    }

    pub fn h0(&self) -> &PeriodicField {
        self.h0.as_ref().expect("validated")
    }
}

/// Parses and validates `text`. `mode` (from the subcommand) must agree with
/// the file's `mode` key when both are given; relative file paths resolve
/// against `base`.
pub fn parse_config(text: &str, mode: Option<Mode>, base: &Path) -> Result<RunConfig, ConfigError> {
    let de = toml::Deserializer::new(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let mut msg = inner.message().to_string();
        if let Some(span) = inner.span() {
            let line = text[..span.start].matches('\n').count() + 1;
            msg = format!("line {line}: {msg}");
        }
        ConfigError::new(if path == "." { "config".into() } else { path }, msg)
    })?;
    validate(raw, mode, base)
}

fn validate(raw: RawConfig, mode: Option<Mode>, base: &Path) -> Result<RunConfig, ConfigError> {
    let mode = match (raw.mode, mode) {
        (Some(a), Some(b)) if a != b => {
            return Err(ConfigError::new(
                "mode",
                format!("config declares mode {a} but the {b} command was run"),
            ))
        }
        (Some(m), _) | (None, Some(m)) => m,
        (None, None) => return Err(ConfigError::new("mode", "missing required key")),
    };
    let grid = Grid::try_from(raw.grid).map_err(|e| ConfigError::new("grid", e))?;

    let allowed: &[&str] = match mode {
        Mode::Evolve => &["evolve"],
        Mode::Sweep => &["evolve", "sweep"],
        Mode::Check => &["evolve", "check"],
        Mode::Steady => &["steady"],
    };
    let present = [
        ("evolve", raw.evolve.is_some()),
        ("steady", raw.steady.is_some()),
        ("sweep", raw.sweep.is_some()),
        ("check", raw.check.is_some()),
    ];
    for (name, here) in present {
        if here && !allowed.contains(&name) {
            return Err(ConfigError::new(name, format!("section not used by mode {mode}")));
        }
    }
    // `[check]` may be omitted; everything else the mode uses is required
    for name in allowed.iter().filter(|n| **n != "check") {
        if !present.iter().any(|(n, here)| n == name && *here) {
            return Err(ConfigError::new(*name, format!("missing required section for mode {mode}")));
        }
    }

    let mut params = None;
    let mut h0 = None;
    if mode == Mode::Steady {
        let phys = raw
            .physical
            .ok_or_else(|| ConfigError::new("physical", "steady mode needs chi and mu"))?;
        if raw.params.is_some() {
            return Err(ConfigError::new("params", "steady mode takes [physical] only"));
        }
        if !(phys.chi >= 0.0) {
            return Err(ConfigError::new("physical.chi", format!("must be >= 0, got {}", phys.chi)));
        }
        if !(phys.mu >= 0.0) {
            return Err(ConfigError::new("physical.mu", format!("must be >= 0, got {}", phys.mu)));
        }
        if raw.initial.is_some() {
            return Err(ConfigError::new("initial", "not used by mode steady"));
        }
        validate_steady(raw.steady.as_ref().expect("checked above"), phys)?;
    } else {
        params = Some(build_params(&raw, grid, base)?);
        let init = raw
            .initial
            .as_ref()
            .ok_or_else(|| ConfigError::new("initial", "missing required section"))?;
        h0 = Some(build_initial(init, grid, base)?);
        let ev = raw.evolve.as_ref().expect("checked above");
        ev.validate().map_err(|e| ConfigError::new("evolve", e))?;
        if let Some(sw) = &raw.sweep {
            validate_sweep(sw, &raw)?;
        }
    }

    let output_dir = raw
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("thinfilm-out"));
    Ok(RunConfig {
        mode,
        raw,
        grid,
        params,
        h0,
        output_dir,
        base: base.to_path_buf(),
    })
}

/// Parameters for `raw` with one coefficient replaced (sweeps).
pub fn build_params_with(
    raw: &RawConfig,
    grid: Grid,
    base: &Path,
    over: Option<(SweepParameter, f64)>,
) -> Result<Params, ConfigError> {
    match (&raw.params, raw.physical) {
        (Some(_), Some(_)) => Err(ConfigError::new(
            "physical",
            "give either [params] or [physical], not both",
        )),
        (None, None) => Err(ConfigError::new("params", "missing: give [params] or [physical]")),
        (Some(ps), None) => {
            let mut a = ps.a;
            if let Some((k, v)) = over {
                let idx = match k {
                    SweepParameter::A0 => 0,
                    SweepParameter::A1 => 1,
                    SweepParameter::A2 => 2,
                    SweepParameter::A3 => 3,
                    _ => return Err(ConfigError::new("sweep.parameter", "chi/mu need [physical]")),
                };
                a[idx] = v;
            }
            if !(a[0] > 0.0) {
                return Err(ConfigError::new("params.a[0]", format!("a0 must be > 0, got {}", a[0])));
            }
            let forcing = match &ps.forcing {
                ForcingSpec::Sine => {
                    Forcing::sine(grid).map_err(|e| ConfigError::new("params.forcing", e))?
                }
                ForcingSpec::Zero => Forcing::zero(grid),
                ForcingSpec::File(path) => read_field(&base.join(path), grid)
                    .map(Forcing::tabulated)
                    .map_err(|e| ConfigError::new("params.forcing.file", e))?,
            };
            Params::new(a, forcing).map_err(|e| ConfigError::new("params.a", e))
        }
        (None, Some(mut ph)) => {
            match over {
                Some((SweepParameter::Chi, v)) => ph.chi = v,
                Some((SweepParameter::Mu, v)) => ph.mu = v,
                Some(_) => return Err(ConfigError::new("sweep.parameter", "a0..a3 need [params]")),
                None => {}
            }
            if !(ph.chi > 0.0) {
                return Err(ConfigError::new(
                    "physical.chi",
                    format!("chi must be > 0 (it sets a0 = chi/3 > 0), got {}", ph.chi),
                ));
            }
            from_physical(ph.chi, ph.mu, grid).map_err(|e| ConfigError::new("physical", e))
        }
    }
}

fn build_params(raw: &RawConfig, grid: Grid, base: &Path) -> Result<Params, ConfigError> {
    build_params_with(raw, grid, base, None)
}

fn read_field(path: &Path, grid: Grid) -> Result<PeriodicField, String> {
    let f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    PeriodicField::read_csv(BufReader::new(f), grid).map_err(|e| format!("{}: {e}", path.display()))
}

fn build_initial(init: &InitialData, grid: Grid, base: &Path) -> Result<PeriodicField, ConfigError> {
    let (h, path) = match init {
        InitialData::Constant(c) => (grid.constant(*c), "initial.constant"),
        InitialData::Trig(t) => {
            let h = grid.sample(|x| {
                let c: f64 = t
                    .cos
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * ((k + 1) as f64 * x).cos())
                    .sum();
                let s: f64 = t
                    .sin
                    .iter()
                    .enumerate()
                    .map(|(k, b)| b * ((k + 1) as f64 * x).sin())
                    .sum();
                t.mean + c + s
            });
            (h, "initial.trig")
        }
        InitialData::File(p) => (
            read_field(&base.join(p), grid).map_err(|e| ConfigError::new("initial.file", e))?,
            "initial.file",
        ),
    };
    if let Some(i) = h.values().iter().position(|v| !v.is_finite()) {
        return Err(ConfigError::new(path, format!("non-finite value at x = {}", grid.x(i))));
    }
    let (i, min) = h
        .values()
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    if min < 0.0 {
        return Err(ConfigError::new(
            path,
            format!("initial data must be nonnegative, found {min} at x = {}", grid.x(i)),
        ));
    }
    Ok(h)
}

fn validate_steady(s: &SteadySpec, phys: PhysicalSpec) -> Result<(), ConfigError> {
    if s.values.is_empty() {
        return Err(ConfigError::new("steady.values", "need at least one target"));
    }
    if let Some(v) = s.values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(ConfigError::new("steady.values", format!("targets must be positive, got {v}")));
    }
    if phys.chi == 0.0 && s.parameter != SteadyParameter::Flux {
        return Err(ConfigError::new(
            "steady.parameter",
            "chi = 0 (zero surface tension) is parametrized by flux only",
        ));
    }
    if !(s.min_increment > 0.0) {
        return Err(ConfigError::new("steady.min_increment", "must be > 0"));
    }
    if !(s.tol > 0.0) {
        return Err(ConfigError::new("steady.tol", "must be > 0"));
    }
    Ok(())
}

fn validate_sweep(s: &SweepSpec, raw: &RawConfig) -> Result<(), ConfigError> {
    if s.values.is_empty() {
        return Err(ConfigError::new("sweep.values", "need at least one value"));
    }
    let physical = matches!(s.parameter, SweepParameter::Chi | SweepParameter::Mu);
    if physical && raw.physical.is_none() {
        return Err(ConfigError::new("sweep.parameter", "chi/mu sweeps need a [physical] block"));
    }
    if !physical && raw.params.is_none() {
        return Err(ConfigError::new("sweep.parameter", "a0..a3 sweeps need a [params] block"));
    }
    if !(s.period_window > 0.0 && s.period_window <= 1.0) {
        return Err(ConfigError::new("sweep.period_window", "must be in (0, 1]"));
    }
    if s.threads == Some(0) {
        return Err(ConfigError::new("sweep.threads", "must be >= 1"));
    }
    Ok(())
}

/// Annotated reference of every key, with defaults taken from the code.
pub fn reference() -> String {
    let ev = EvolveConfig::default();
    let ck = CheckSpec::default();
    format!(
        r#"# thinfilm run configuration (TOML)
#
# mode = "evolve" | "steady" | "sweep" | "check"   optional; must match the command
# seed = 0                                         randomized checks (check mode)
# output_dir = "thinfilm-out"                      overridden by THINFILM_OUTPUT_DIR, then --output-dir
#
# [grid]            n (required, even, >= 8); length = 2pi; origin = 0
#
# Coefficients: exactly one of
# [params]          a = [a0, a1, a2, a3] (required, a0 > 0)
#                   forcing = "sine" (default) | "zero" | {{ file = "w.csv" }}
# [physical]        chi, mu; maps to a0 = a1 = chi/3, a2 = -mu/3, a3 = 1, w = sin x
#                   (steady mode reads chi >= 0 and mu from here)
#
# [initial]         one of:  constant = 0.3
#                            file = "h0.csv"          (x,h rows on the grid)
# [initial.trig]    mean = 0.3, cos = [0.02, 0.02], sin = []
#                   initial data must be nonnegative on the grid
#
# [evolve]          evolve, sweep, check
#   dt_init = {dt_init:e}
#   dt_min = {dt_min:e}
#   dt_max = {dt_max}
#   t_end = {t_end}
#   newton_tol = {newton_tol:e}
#   newton_max_iter = {newton_max_iter}
#   snapshot_times = []       t_end is always recorded; --snapshots overrides
#   snapshot_every = (unset)  also record at multiples of this interval
#   positivity_floor = {floor}
#   steady_exit = {steady_exit}
#   alpha = (unset)           alpha-entropy exponent for the diagnostics
#   interface_mobility = "arithmetic" | "entropy"
#                             entropy-consistent face average keeps thin
#                             dimples positive on coarse grids
# [evolve.knobs]
#   delta = {delta}
#   epsilon = {epsilon:e}
#   theta = {theta}
#
# [steady]          steady mode
#   parameter = "flux" | "mass"   (default "flux"; chi = 0 needs "flux")
#   values = [...]                continuation targets, in order (required)
#   min_increment = {min_inc:e}
#   tol = {tol:e}
#   max_newton = {max_newton}
#
# [sweep]           sweep mode (also needs [evolve])
#   parameter = "a0" | "a1" | "a2" | "a3" | "chi" | "mu"
#   values = [...]
#   threads = (all cores)
#   period_window = {window}
#   period_tol = {ptol}
#
# [check]           check mode (optional; also needs [evolve])
#   samples = {samples}
#   max_degree = {max_degree}
#   max_rungs = {max_rungs}
"#,
        dt_init = ev.dt_init,
        dt_min = ev.dt_min,
        dt_max = ev.dt_max,
        t_end = ev.t_end,
        newton_tol = ev.newton_tol,
        newton_max_iter = ev.newton_max_iter,
        floor = ev.positivity_floor,
        steady_exit = ev.steady_exit,
        delta = ev.knobs.delta,
        epsilon = ev.knobs.epsilon,
        theta = ev.knobs.theta,
        min_inc = min_increment(),
        tol = steady_tol(),
        max_newton = max_newton(),
        window = half(),
        ptol = period_tol(),
        samples = ck.samples,
        max_degree = ck.max_degree,
        max_rungs = ck.max_rungs,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const DROPLETS: &str = r#"
mode = "evolve"
[grid]
n = 256
[params]
a = [1.0, 16.0, 0.0, 0.0]
[initial.trig]
mean = 0.3
cos = [0.02, 0.02]
[evolve]
t_end = 140.0
dt_max = 0.05
"#;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        parse_config(text, None, Path::new("."))
    }

    #[test]
    fn droplets_config_round_trip() {
        let cfg = parse(DROPLETS).unwrap();
        assert_eq!(cfg.mode, Mode::Evolve);
        assert_eq!(cfg.params().coefficients(), [1.0, 16.0, 0.0, 0.0]);
        assert_eq!(cfg.grid.n(), 256);
        let h0 = cfg.h0();
        assert!((h0.values()[0] - 0.34).abs() < 1e-15);
        assert_eq!(cfg.evolve().t_end, 140.0);
        assert_eq!(cfg.evolve().dt_min, EvolveConfig::default().dt_min);
    }

    #[test]
    fn zero_a0_names_constraint() {
        let e = parse(&DROPLETS.replace("[1.0, 16.0", "[0.0, 16.0")).unwrap_err();
        assert_eq!(e.path, "params.a[0]");
        assert!(e.message.contains("a0 must be > 0"), "{e}");
    }

    #[test]
    fn physical_block_maps_coefficients() {
        let text = DROPLETS.replace("[params]\na = [1.0, 16.0, 0.0, 0.0]", "[physical]\nchi = 1.0\nmu = 1.0");
        let cfg = parse(&text).unwrap();
        let [a0, a1, a2, a3] = cfg.params().coefficients();
        assert_eq!((a0, a1, a2, a3), (1.0 / 3.0, 1.0 / 3.0, -1.0 / 3.0, 1.0));
    }

    #[test]
    fn unknown_key_reports_path() {
        let e = parse(&DROPLETS.replace("dt_max = 0.05", "dt_maxx = 0.05")).unwrap_err();
        assert_eq!(e.path, "evolve.dt_maxx");
        assert!(e.message.contains("unknown field"), "{e}");
        let e = parse(&format!("{DROPLETS}\n[evolve.knobs]\ndelta = 0.0\nepsilon = 1e-8\ntheta = 0.3\nextra = 1\n"))
            .unwrap_err();
        assert_eq!(e.path, "evolve.knobs.extra");
    }

    #[test]
    fn syntax_error_reports_line() {
        let e = parse("[grid]\nn = 64\nmode = \"evolve\n").unwrap_err();
        assert_eq!(e.path, "config");
        assert!(e.message.starts_with("line 3:"), "{e}");
    }

    #[test]
    fn wrong_type_reports_path() {
        let e = parse(&DROPLETS.replace("n = 256", "n = \"many\"")).unwrap_err();
        assert_eq!(e.path, "grid.n");
    }

    #[test]
    fn missing_grid_is_error() {
        let e = parse(&DROPLETS.replace("[grid]\nn = 256\n", "")).unwrap_err();
        assert!(e.message.contains("grid"), "{e}");
    }

    #[test]
    fn negative_initial_data_rejected() {
        let e = parse(&DROPLETS.replace("mean = 0.3", "mean = 0.01")).unwrap_err();
        assert_eq!(e.path, "initial.trig");
        assert!(e.message.contains("nonnegative"));
    }

    #[test]
    fn mode_sections_exclusive() {
        let e = parse(&format!("{DROPLETS}\n[steady]\nvalues = [0.1]\n")).unwrap_err();
        assert_eq!(e.path, "steady");
        let e = parse(&DROPLETS.replace("[evolve]\nt_end = 140.0\ndt_max = 0.05\n", "")).unwrap_err();
        assert_eq!(e.path, "evolve");
        let e = parse_config(DROPLETS, Some(Mode::Check), Path::new(".")).unwrap_err();
        assert_eq!(e.path, "mode");
    }

    #[test]
    fn params_and_physical_conflict() {
        let e = parse(&format!("{DROPLETS}\n[physical]\nchi = 1.0\nmu = 1.0\n")).unwrap_err();
        assert_eq!(e.path, "physical");
    }

    #[test]
    fn steady_config() {
        let text = "mode = \"steady\"\n[grid]\nn = 128\n[physical]\nchi = 0.0\nmu = 1.0\n[steady]\nvalues = [0.64]\n";
        let cfg = parse(text).unwrap();
        assert!(cfg.params.is_none());
        assert_eq!(cfg.raw.steady.unwrap().parameter, SteadyParameter::Flux);
        let bad = text.replace("values = [0.64]", "parameter = \"mass\"\nvalues = [1.0]");
        assert_eq!(parse(&bad).unwrap_err().path, "steady.parameter");
    }

    #[test]
    fn sweep_parameter_must_match_block() {
        let text = DROPLETS.replace("mode = \"evolve\"", "mode = \"sweep\"")
            + "\n[sweep]\nparameter = \"chi\"\nvalues = [1.0]\n";
        assert_eq!(parse(&text).unwrap_err().path, "sweep.parameter");
        let ok = text.replace("\"chi\"", "\"a3\"");
        assert!(parse(&ok).is_ok());
    }

    #[test]
    fn reference_mentions_every_section() {
        let r = reference();
        for s in ["[grid]", "[params]", "[physical]", "[initial]", "[evolve]", "[steady]", "[sweep]", "[check]"] {
            assert!(r.contains(s), "{s}");
        }
        assert!(r.contains("dt_max = 0.1"));
    }
}
