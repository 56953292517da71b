//! Run configuration: a strict INI dialect.
//!
//! Sections group keys (`[grid]`, `[model]`, `[flow]`, `[stepper]`,
//! `[forcing]`, `[initial]`, `[output]`, `[verdicts]`, `[sweep]`); `seed`
//! lives before the first section. Values are `key = value`, `#` starts a
//! comment. Every key that is present must be understood and used: unknown
//! keys are reported with the closest known key, and keys that do not apply
//! to the selected variant (say `viscosity.scale` with `viscosity.kind =
//! constant`) are reported too. All problems are collected before failing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{ConfigIssue, Error, Result};
use crate::evolution::{AdaptConfig, StepperConfig};
use crate::flow::{FlowMode, FlowParams};
use crate::forcing::{ForcingMode, ForcingSpec, InitialSpec, ModeTerm, TimeProfile};
use crate::io::csv::fmt_f64;
use crate::model::{
    validate_assumptions, Coefficient, CoefficientKind, ModelSpec, PotentialFamily, PotentialSpec, SourceShape,
};
use crate::spectral::Grid;

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub sizes: Vec<usize>,
    pub lengths: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            sizes: vec![64, 64],
            lengths: vec![1.0, 1.0],
        }
    }
}

impl GridConfig {
    pub fn dims(&self) -> usize {
        self.sizes.len()
    }

    pub fn build(&self) -> Result<Grid> {
        Grid::new(&self.sizes, &self.lengths)
    }
}

/// Sampling window for the assumption certifier.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationConfig {
    pub range: f64,
    pub samples: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            range: 10.0,
            samples: 20001,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    /// Run CSV file name inside the output directory; empty disables it.
    pub csv: String,
    /// Write a snapshot every this many accepted steps; 0 disables.
    pub snapshot_stride: u64,
    /// Overwrite `checkpoint.chbk` every this many accepted steps; 0 disables.
    pub checkpoint_stride: u64,
    /// Report directory, relative to the output directory.
    pub report_dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            csv: "run.csv".into(),
            snapshot_stride: 0,
            checkpoint_stride: 0,
            report_dir: "reports".into(),
        }
    }
}

/// Thresholds of every experiment verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct VerdictConfig {
    /// Largest tolerated energy increase per accepted step.
    pub energy_tol: f64,
    /// Largest tolerated change of the mean of `φ` per step without sources.
    pub mass_tol: f64,
    /// Relative tolerance of the mean-μ identity.
    pub mean_mu_tol: f64,
    /// Relative slack of the cumulative dissipation bookkeeping.
    pub dissipation_tol: f64,
    /// Relative size of difference norms that counts as zero.
    pub uniqueness_tol: f64,
    /// Largest tolerated max/min ratio of the dependence constant.
    pub dependence_factor: f64,
    /// Target of the last-to-first ratio of the viscous dissipation.
    pub darcy_dissipation_ratio: f64,
    /// Largest tolerated relative spread of stability norms across levels.
    pub stability_spread: f64,
    /// Largest tolerated max/min ratio of a first-order rate constant.
    pub rate_factor: f64,
    pub order_min: f64,
    pub order_max: f64,
    /// Relative tolerance of the variational-derivative check.
    pub variational_tol: f64,
    /// Relative tolerance of pointwise algebraic identities.
    pub pointwise_tol: f64,
    /// Relative tolerance of integral identities and projector checks.
    pub identity_tol: f64,
}

impl Default for VerdictConfig {
    fn default() -> Self {
        VerdictConfig {
            energy_tol: 1e-8,
            mass_tol: 1e-10,
            mean_mu_tol: 1e-10,
            dissipation_tol: 0.05,
            uniqueness_tol: 1e-9,
            dependence_factor: 3.0,
            darcy_dissipation_ratio: 1e-2,
            stability_spread: 0.1,
            rate_factor: 2.0,
            order_min: 0.8,
            order_max: 1.5,
            variational_tol: 1e-5,
            pointwise_tol: 1e-12,
            identity_tol: 1e-10,
        }
    }
}

/// Parameters of the sweep experiments.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub levels: usize,
    /// Viscosity scale at level 0; level n uses `eta0 · 2⁻ⁿ` times the shape.
    pub eta0: f64,
    pub cutoffs: Vec<f64>,
    pub betas: Vec<f64>,
    pub dts: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Spatial shape of `u₂ − u₁`, scaled by each amplitude.
    pub perturbation: Option<ForcingMode>,
    /// Pseudo-time step of the frozen-φ regularization solve.
    pub stationary_dt: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            levels: 6,
            eta0: 1.0,
            cutoffs: vec![8.0, 16.0, 32.0],
            betas: vec![1.0, 0.1, 0.01, 0.0],
            dts: vec![0.02, 0.01, 0.005],
            amplitudes: vec![1e-3, 1e-2, 1e-1],
            perturbation: None,
            stationary_dt: 5.0,
        }
    }
}

impl SweepConfig {
    /// The configured perturbation, or `cos(2π x₂/L₂) e₁` on a `dims`-D grid.
    pub fn perturbation_or_default(&self, dims: usize) -> ForcingMode {
        self.perturbation.clone().unwrap_or_else(|| {
            let mut k = vec![0; dims];
            k[1] = 1;
            ForcingMode {
                component: 0,
                wavevector: k,
                amplitude: 1.0,
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub grid: GridConfig,
    pub model: ModelSpec,
    pub validation: ValidationConfig,
    pub flow: FlowParams,
    pub stepper: StepperConfig,
    pub forcing: ForcingSpec,
    pub initial: InitialSpec,
    pub output: OutputConfig,
    pub verdicts: VerdictConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            grid: GridConfig::default(),
            model: ModelSpec::default(),
            validation: ValidationConfig::default(),
            flow: FlowParams::default(),
            stepper: StepperConfig::default(),
            forcing: ForcingSpec::Zero,
            initial: InitialSpec::Random {
                band: 4.0,
                amplitude: 0.1,
                mean: 0.0,
            },
            output: OutputConfig::default(),
            verdicts: VerdictConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// Every key the parser understands.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "grid.dims",
    "grid.n",
    "grid.length",
    "model.potential",
    "model.potential.coeffs",
    "model.viscosity.kind",
    "model.viscosity.value",
    "model.viscosity.base",
    "model.viscosity.amplitude",
    "model.viscosity.scale",
    "model.friction.kind",
    "model.friction.value",
    "model.friction.base",
    "model.friction.amplitude",
    "model.friction.scale",
    "model.mobility.kind",
    "model.mobility.value",
    "model.mobility.base",
    "model.mobility.amplitude",
    "model.mobility.scale",
    "model.nu",
    "model.sigma",
    "model.h.amplitude",
    "model.h.scale",
    "model.epsilon",
    "model.validation.range",
    "model.validation.samples",
    "flow.mode",
    "flow.beta",
    "flow.max_iterations",
    "flow.tolerance",
    "stepper.dt",
    "stepper.dt_min",
    "stepper.dt_max",
    "stepper.stab_a",
    "stepper.kappa",
    "stepper.t_final",
    "stepper.cutoff",
    "stepper.adaptive",
    "stepper.energy_increase_tol",
    "stepper.shrink",
    "stepper.grow",
    "stepper.grow_after",
    "forcing.kind",
    "forcing.modes",
    "forcing.divergence_free",
    "forcing.profile",
    "forcing.ramp_time",
    "forcing.period",
    "forcing.file",
    "initial.kind",
    "initial.value",
    "initial.offset",
    "initial.modes",
    "initial.band",
    "initial.amplitude",
    "initial.mean",
    "initial.file",
    "output.csv",
    "output.snapshot_stride",
    "output.checkpoint_stride",
    "output.report_dir",
    "verdicts.energy_tol",
    "verdicts.mass_tol",
    "verdicts.mean_mu_tol",
    "verdicts.dissipation_tol",
    "verdicts.uniqueness_tol",
    "verdicts.dependence_factor",
    "verdicts.darcy_dissipation_ratio",
    "verdicts.stability_spread",
    "verdicts.rate_factor",
    "verdicts.order_min",
    "verdicts.order_max",
    "verdicts.variational_tol",
    "verdicts.pointwise_tol",
    "verdicts.identity_tol",
    "sweep.levels",
    "sweep.eta0",
    "sweep.cutoffs",
    "sweep.betas",
    "sweep.dts",
    "sweep.amplitudes",
    "sweep.perturbation",
    "sweep.stationary_dt",
];

/// Closest known key within a small edit distance.
pub fn suggest_key(key: &str) -> Option<&'static str> {
    let (best, dist) = KNOWN_KEYS
        .iter()
        .map(|k| (*k, strsim::levenshtein(key, k)))
        .min_by_key(|(_, d)| *d)?;
    let leaf = key.rsplit('.').next().unwrap_or(key);
    let leaf_hit = KNOWN_KEYS
        .iter()
        .filter(|k| k.rsplit('.').next() == Some(leaf))
        .count()
        == 1;
    if dist <= (key.len() / 3).max(2) {
        Some(best)
    } else if leaf_hit {
        KNOWN_KEYS.iter().copied().find(|k| k.rsplit('.').next() == Some(leaf))
    } else {
        None
    }
}

struct Entry {
    value: String,
    line: usize,
}

/// Raw `section.key → value` map.
fn tokenize(text: &str, issues: &mut Vec<ConfigIssue>) -> BTreeMap<String, Entry> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name) if !name.trim().is_empty() => section = name.trim().to_string(),
                _ => issues.push(ConfigIssue {
                    key: String::new(),
                    message: format!("line {line_no}: malformed section header '{line}'"),
                }),
            }
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            issues.push(ConfigIssue {
                key: String::new(),
                message: format!("line {line_no}: expected 'key = value', found '{line}'"),
            });
            continue;
        };
        let key = if section.is_empty() {
            k.trim().to_string()
        } else {
            format!("{section}.{}", k.trim())
        };
        if let Some(prev) = out.get(&key) {
            let prev: &Entry = prev;
            issues.push(ConfigIssue {
                key: key.clone(),
                message: format!("line {line_no}: duplicate key (first set on line {})", prev.line),
            });
            continue;
        }
        out.insert(
            key,
            Entry {
                value: v.trim().to_string(),
                line: line_no,
            },
        );
    }
    out
}

struct Reader {
    entries: BTreeMap<String, Entry>,
    used: BTreeSet<String>,
    issues: Vec<ConfigIssue>,
}

impl Reader {
    fn issue(&mut self, key: &str, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        debug_assert!(KNOWN_KEYS.contains(&key), "{key} missing from KNOWN_KEYS");
        let v = self.entries.get(key)?.value.clone();
        self.used.insert(key.to_string());
        Some(v)
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        let v = self.raw(key)?;
        match v.parse() {
            Ok(x) => Some(x),
            Err(_) => {
                self.issue(key, format!("expected {what}, found '{v}'"));
                None
            }
        }
    }

    fn f64(&mut self, key: &str, default: f64) -> f64 {
        match self.parsed::<f64>(key, "a number") {
            Some(x) if x.is_finite() => x,
            Some(x) => {
                self.issue(key, format!("must be finite, found {x}"));
                default
            }
            None => default,
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> usize {
        self.parsed(key, "a nonnegative integer").unwrap_or(default)
    }

    fn u64(&mut self, key: &str, default: u64) -> u64 {
        self.parsed(key, "a nonnegative integer").unwrap_or(default)
    }

    fn bool(&mut self, key: &str, default: bool) -> bool {
        self.parsed(key, "true or false").unwrap_or(default)
    }

    fn string(&mut self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or_else(|| default.to_string())
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Option<Vec<T>> {
        let v = self.raw(key)?;
        let items: std::result::Result<Vec<T>, _> = v.split(',').map(|s| s.trim().parse::<T>()).collect();
        match items {
            Ok(x) if !x.is_empty() => Some(x),
            _ => {
                self.issue(key, format!("expected a comma-separated list of {what}, found '{v}'"));
                None
            }
        }
    }

    fn f64_list(&mut self, key: &str, default: &[f64]) -> Vec<f64> {
        match self.list::<f64>(key, "numbers") {
            Some(x) if x.iter().all(|v| v.is_finite()) => x,
            Some(_) => {
                self.issue(key, "entries must be finite");
                default.to_vec()
            }
            None => default.to_vec(),
        }
    }
}

/// Broadcasts a single entry to `dims` entries.
fn expand<T: Copy>(v: Vec<T>, dims: usize, r: &mut Reader, key: &str) -> Vec<T> {
    match v.len() {
        1 => vec![v[0]; dims],
        n if n == dims => v,
        n => {
            r.issue(key, format!("needs 1 or {dims} entries, got {n}"));
            vec![v[0]; dims]
        }
    }
}

fn parse_wavevector(s: &str) -> Option<Vec<i64>> {
    s.split(',').map(|x| x.trim().parse().ok()).collect()
}

/// `comp:amp:k1,k2[,k3]` with a one-based component.
fn parse_forcing_mode(s: &str) -> Option<ForcingMode> {
    let mut parts = s.trim().splitn(3, ':');
    let component: usize = parts.next()?.trim().parse().ok()?;
    let amplitude: f64 = parts.next()?.trim().parse().ok()?;
    let wavevector = parse_wavevector(parts.next()?)?;
    (component >= 1).then_some(ForcingMode {
        component: component - 1,
        wavevector,
        amplitude,
    })
}

fn fmt_forcing_mode(m: &ForcingMode) -> String {
    format!("{}:{}:{}", m.component + 1, fmt_f64(m.amplitude), join_ints(&m.wavevector))
}

/// `amp:k1,k2[,k3]`.
fn parse_mode_term(s: &str) -> Option<ModeTerm> {
    let (a, k) = s.trim().split_once(':')?;
    Some(ModeTerm {
        amplitude: a.trim().parse().ok()?,
        wavevector: parse_wavevector(k)?,
    })
}

fn join_ints(k: &[i64]) -> String {
    k.iter().map(i64::to_string).collect::<Vec<_>>().join(",")
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", ")
}

fn read_coefficient(r: &mut Reader, name: &str) -> Coefficient {
    let key = |leaf: &str| format!("model.{name}.{leaf}");
    let kind = r.string(&key("kind"), "constant");
    match kind.as_str() {
        "constant" => Coefficient::constant(r.f64(&key("value"), 1.0)),
        "tanh" => {
            let base = r.f64(&key("base"), 1.0);
            let amplitude = r.f64(&key("amplitude"), 0.0);
            let scale = r.f64(&key("scale"), 1.0);
            if !(scale > 0.0) {
                r.issue(&key("scale"), "must be positive");
                return Coefficient::tanh(base, amplitude, 1.0);
            }
            Coefficient::tanh(base, amplitude, scale)
        }
        "saturated_quadratic" => {
            Coefficient::saturated_quadratic(r.f64(&key("base"), 1.0), r.f64(&key("amplitude"), 0.0))
        }
        other => {
            r.issue(
                &key("kind"),
                format!("unknown kind '{other}' (constant, tanh, saturated_quadratic)"),
            );
            Coefficient::constant(1.0)
        }
    }
}

fn write_coefficient(out: &mut String, name: &str, c: &Coefficient) {
    match c.kind {
        CoefficientKind::Constant(v) => {
            writeln!(out, "{name}.kind = constant\n{name}.value = {}", fmt_f64(v)).unwrap();
        }
        CoefficientKind::Tanh {
            base,
            amplitude,
            scale,
        } => {
            writeln!(
                out,
                "{name}.kind = tanh\n{name}.base = {}\n{name}.amplitude = {}\n{name}.scale = {}",
                fmt_f64(base),
                fmt_f64(amplitude),
                fmt_f64(scale)
            )
            .unwrap();
        }
        CoefficientKind::SaturatedQuadratic { base, amplitude } => {
            writeln!(
                out,
                "{name}.kind = saturated_quadratic\n{name}.base = {}\n{name}.amplitude = {}",
                fmt_f64(base),
                fmt_f64(amplitude)
            )
            .unwrap();
        }
    }
}

fn read_profile(r: &mut Reader) -> TimeProfile {
    let profile = r.string("forcing.profile", "constant");
    match profile.as_str() {
        "constant" => TimeProfile::Constant,
        "ramp" => {
            let duration = r.f64("forcing.ramp_time", 1.0);
            if !(duration > 0.0) {
                r.issue("forcing.ramp_time", "must be positive");
            }
            TimeProfile::Ramp { duration }
        }
        "sinusoid" => {
            let period = r.f64("forcing.period", 1.0);
            if !(period > 0.0) {
                r.issue("forcing.period", "must be positive");
            }
            TimeProfile::Sinusoid { period }
        }
        other => {
            r.issue(
                "forcing.profile",
                format!("unknown profile '{other}' (constant, ramp, sinusoid)"),
            );
            TimeProfile::Constant
        }
    }
}

fn write_profile(out: &mut String, p: &TimeProfile) {
    match p {
        TimeProfile::Constant => out.push_str("profile = constant\n"),
        TimeProfile::Ramp { duration } => {
            writeln!(out, "profile = ramp\nramp_time = {}", fmt_f64(*duration)).unwrap();
        }
        TimeProfile::Sinusoid { period } => {
            writeln!(out, "profile = sinusoid\nperiod = {}", fmt_f64(*period)).unwrap();
        }
    }
}

/// Result of parsing: the configuration and non-fatal issues (unused keys
/// when strictness is off).
#[derive(Clone, Debug)]
pub struct Parsed {
    pub config: RunConfig,
    pub warnings: Vec<ConfigIssue>,
}

impl RunConfig {
    pub fn parse_file(path: &Path, strict: bool) -> Result<Parsed> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut parsed = Self::parse_str(&text, strict)?;
        parsed.config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(parsed)
    }

    /// Makes relative input file paths relative to `base`.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let ForcingSpec::File { path, .. } = &mut self.forcing {
            fix(path);
        }
        if let InitialSpec::File(path) = &mut self.initial {
            fix(path);
        }
    }

    pub fn parse_str(text: &str, strict: bool) -> Result<Parsed> {
        let mut issues = Vec::new();
        let entries = tokenize(text, &mut issues);
        let mut r = Reader {
            entries,
            used: BTreeSet::new(),
            issues,
        };
        let config = Self::read(&mut r);
        let mut unused = Vec::new();
        for (key, entry) in &r.entries {
            if r.used.contains(key) {
                continue;
            }
            let message = if KNOWN_KEYS.contains(&key.as_str()) {
                format!("line {}: not used with the selected options", entry.line)
            } else {
                match suggest_key(key) {
                    Some(s) => format!("line {}: unknown key, did you mean '{s}'?", entry.line),
                    None => format!("line {}: unknown key", entry.line),
                }
            };
            unused.push(ConfigIssue {
                key: key.clone(),
                message,
            });
        }
        let mut issues = r.issues;
        let warnings = if strict {
            issues.extend(unused);
            Vec::new()
        } else {
            unused
        };
        if issues.is_empty() {
            issues.extend(config.validate());
        }
        if issues.is_empty() {
            Ok(Parsed { config, warnings })
        } else {
            Err(Error::ConfigIssues(issues))
        }
    }

    fn read(r: &mut Reader) -> RunConfig {
        let d = RunConfig::default();
        let seed = r.u64("seed", d.seed);

        let dims = r.usize("grid.dims", 2);
        if !(2..=3).contains(&dims) {
            r.issue("grid.dims", format!("must be 2 or 3, got {dims}"));
        }
        let dims = dims.clamp(2, 3);
        let sizes = r.list::<usize>("grid.n", "integers").unwrap_or(vec![64]);
        let sizes = expand(sizes, dims, r, "grid.n");
        let lengths = r.list::<f64>("grid.length", "numbers").unwrap_or(vec![1.0]);
        let lengths = expand(lengths, dims, r, "grid.length");
        let grid = GridConfig { sizes, lengths };

        let potential = match r.string("model.potential", "quartic").as_str() {
            "quartic" => PotentialSpec::quartic(),
            "even_polynomial" => match r.list::<f64>("model.potential.coeffs", "numbers") {
                Some(c) => PotentialSpec::new(PotentialFamily::EvenPolynomial(c)),
                None => {
                    r.issue("model.potential.coeffs", "required for an even_polynomial potential");
                    PotentialSpec::quartic()
                }
            },
            "none" => PotentialSpec::new(PotentialFamily::Zero),
            other => {
                r.issue(
                    "model.potential",
                    format!("unknown potential '{other}' (quartic, even_polynomial, none)"),
                );
                PotentialSpec::quartic()
            }
        };
        let dm = &d.model;
        let model = ModelSpec {
            potential,
            eta: read_coefficient(r, "viscosity"),
            lambda: read_coefficient(r, "friction"),
            mobility: read_coefficient(r, "mobility"),
            nu: r.f64("model.nu", dm.nu),
            sigma: r.f64("model.sigma", dm.sigma),
            h: SourceShape {
                amplitude: r.f64("model.h.amplitude", 0.0),
                scale: r.f64("model.h.scale", 1.0),
            },
            epsilon: r.f64("model.epsilon", 1.0),
        };
        if model.h.amplitude != 0.0 && !(model.h.scale > 0.0) {
            r.issue("model.h.scale", "must be positive");
        }
        let validation = ValidationConfig {
            range: r.f64("model.validation.range", d.validation.range),
            samples: r.usize("model.validation.samples", d.validation.samples),
        };

        let df = &d.flow;
        let mode_name = r.string("flow.mode", df.mode.name());
        let mode = FlowMode::parse(&mode_name).unwrap_or_else(|| {
            r.issue(
                "flow.mode",
                format!("unknown mode '{mode_name}' (brinkman, darcy, frozen)"),
            );
            df.mode
        });
        let ds = &d.stepper;
        let cutoff = match r.raw("stepper.cutoff") {
            None => None,
            Some(v) if v == "none" => None,
            Some(v) => match v.parse::<f64>() {
                Ok(c) => Some(c),
                Err(_) => {
                    r.issue("stepper.cutoff", format!("expected a number or 'none', found '{v}'"));
                    None
                }
            },
        };
        let flow = FlowParams {
            mode,
            regularization_beta: r.f64("flow.beta", df.regularization_beta),
            max_iterations: r.usize("flow.max_iterations", df.max_iterations),
            residual_tolerance: r.f64("flow.tolerance", df.residual_tolerance),
            galerkin_cutoff: cutoff,
        };
        let da = &ds.adapt;
        let stepper = StepperConfig {
            dt: r.f64("stepper.dt", ds.dt),
            dt_min: r.f64("stepper.dt_min", ds.dt_min),
            dt_max: r.f64("stepper.dt_max", ds.dt_max),
            stab_a: r.f64("stepper.stab_a", ds.stab_a),
            kappa: r.f64("stepper.kappa", ds.kappa),
            adapt: AdaptConfig {
                enabled: r.bool("stepper.adaptive", da.enabled),
                energy_increase_tol: r.f64("stepper.energy_increase_tol", da.energy_increase_tol),
                shrink: r.f64("stepper.shrink", da.shrink),
                grow: r.f64("stepper.grow", da.grow),
                grow_after: r.parsed("stepper.grow_after", "a nonnegative integer").unwrap_or(da.grow_after),
            },
            t_final: r.f64("stepper.t_final", ds.t_final),
            cutoff,
        };

        let forcing = match r.string("forcing.kind", "zero").as_str() {
            "zero" => ForcingSpec::Zero,
            "modes" => {
                let text = r.raw("forcing.modes").unwrap_or_default();
                let mut modes = Vec::new();
                for item in text.split(';').filter(|s| !s.trim().is_empty()) {
                    match parse_forcing_mode(item) {
                        Some(m) => modes.push(m),
                        None => r.issue(
                            "forcing.modes",
                            format!("cannot read '{}', expected component:amplitude:k1,k2", item.trim()),
                        ),
                    }
                }
                if modes.is_empty() {
                    r.issue("forcing.modes", "at least one mode is required");
                }
                ForcingSpec::Modes {
                    modes,
                    divergence_free: r.bool("forcing.divergence_free", true),
                    profile: read_profile(r),
                }
            }
            "file" => match r.raw("forcing.file") {
                Some(p) => ForcingSpec::File {
                    path: PathBuf::from(p),
                    profile: read_profile(r),
                },
                None => {
                    r.issue("forcing.file", "required for file forcing");
                    ForcingSpec::Zero
                }
            },
            other => {
                r.issue("forcing.kind", format!("unknown kind '{other}' (zero, modes, file)"));
                ForcingSpec::Zero
            }
        };

        let initial = match r.string("initial.kind", "random").as_str() {
            "constant" => InitialSpec::Constant(r.f64("initial.value", 0.0)),
            "modes" => {
                let offset = r.f64("initial.offset", 0.0);
                let text = r.raw("initial.modes").unwrap_or_default();
                let mut terms = Vec::new();
                for item in text.split(';').filter(|s| !s.trim().is_empty()) {
                    match parse_mode_term(item) {
                        Some(t) => terms.push(t),
                        None => r.issue(
                            "initial.modes",
                            format!("cannot read '{}', expected amplitude:k1,k2", item.trim()),
                        ),
                    }
                }
                InitialSpec::Modes { offset, terms }
            }
            "random" => {
                let band = r.f64("initial.band", 4.0);
                if !(band > 0.0) {
                    r.issue("initial.band", "must be positive");
                }
                InitialSpec::Random {
                    band,
                    amplitude: r.f64("initial.amplitude", 0.1),
                    mean: r.f64("initial.mean", 0.0),
                }
            }
            "file" => match r.raw("initial.file") {
                Some(p) => InitialSpec::File(PathBuf::from(p)),
                None => {
                    r.issue("initial.file", "required for file initial data");
                    InitialSpec::Constant(0.0)
                }
            },
            other => {
                r.issue(
                    "initial.kind",
                    format!("unknown kind '{other}' (constant, modes, random, file)"),
                );
                InitialSpec::Constant(0.0)
            }
        };

        let dout = &d.output;
        let output = OutputConfig {
            csv: r.string("output.csv", &dout.csv),
            snapshot_stride: r.u64("output.snapshot_stride", dout.snapshot_stride),
            checkpoint_stride: r.u64("output.checkpoint_stride", dout.checkpoint_stride),
            report_dir: r.string("output.report_dir", &dout.report_dir),
        };

        let dv = &d.verdicts;
        let verdicts = VerdictConfig {
            energy_tol: r.f64("verdicts.energy_tol", dv.energy_tol),
            mass_tol: r.f64("verdicts.mass_tol", dv.mass_tol),
            mean_mu_tol: r.f64("verdicts.mean_mu_tol", dv.mean_mu_tol),
            dissipation_tol: r.f64("verdicts.dissipation_tol", dv.dissipation_tol),
            uniqueness_tol: r.f64("verdicts.uniqueness_tol", dv.uniqueness_tol),
            dependence_factor: r.f64("verdicts.dependence_factor", dv.dependence_factor),
            darcy_dissipation_ratio: r.f64("verdicts.darcy_dissipation_ratio", dv.darcy_dissipation_ratio),
            stability_spread: r.f64("verdicts.stability_spread", dv.stability_spread),
            rate_factor: r.f64("verdicts.rate_factor", dv.rate_factor),
            order_min: r.f64("verdicts.order_min", dv.order_min),
            order_max: r.f64("verdicts.order_max", dv.order_max),
            variational_tol: r.f64("verdicts.variational_tol", dv.variational_tol),
            pointwise_tol: r.f64("verdicts.pointwise_tol", dv.pointwise_tol),
            identity_tol: r.f64("verdicts.identity_tol", dv.identity_tol),
        };

        let dsw = &d.sweep;
        let perturbation = r.raw("sweep.perturbation").and_then(|p| {
            let m = parse_forcing_mode(&p);
            if m.is_none() {
                r.issue(
                    "sweep.perturbation",
                    format!("cannot read '{p}', expected component:amplitude:k1,k2"),
                );
            }
            m
        });
        let sweep = SweepConfig {
            levels: r.usize("sweep.levels", dsw.levels),
            eta0: r.f64("sweep.eta0", dsw.eta0),
            cutoffs: r.f64_list("sweep.cutoffs", &dsw.cutoffs),
            betas: r.f64_list("sweep.betas", &dsw.betas),
            dts: r.f64_list("sweep.dts", &dsw.dts),
            amplitudes: r.f64_list("sweep.amplitudes", &dsw.amplitudes),
            perturbation,
            stationary_dt: r.f64("sweep.stationary_dt", dsw.stationary_dt),
        };

        RunConfig {
            seed,
            grid,
            model,
            validation,
            flow,
            stepper,
            forcing,
            initial,
            output,
            verdicts,
            sweep,
        }
    }

    /// Semantic checks; every violated constraint yields one issue.
    pub fn validate(&self) -> Vec<ConfigIssue> {
        let mut issues = Vec::new();
        let mut push = |key: &str, message: String| {
            issues.push(ConfigIssue {
                key: key.to_string(),
                message,
            })
        };
        let grid = match self.grid.build() {
            Ok(g) => Some(g),
            Err(e) => {
                push("grid", e.to_string());
                None
            }
        };
        if let Err(e) = validate_assumptions(&self.model, self.validation.range, self.validation.samples) {
            push("model", e.to_string());
        }
        if let Err(e) = self.flow.validate() {
            push("flow", e.to_string());
        }
        if let Err(e) = self.stepper.validate() {
            push("stepper", e.to_string());
        }
        if let (Some(g), Some(c)) = (&grid, self.stepper.cutoff) {
            let band = max_cutoff(g);
            if c > band {
                push(
                    "stepper.cutoff",
                    format!("{c} exceeds the dealiased band {band} of the grid"),
                );
            }
        }
        if let ForcingSpec::Modes { modes, .. } = &self.forcing {
            for m in modes {
                if m.wavevector.len() != self.grid.dims() || m.component >= self.grid.dims() {
                    push(
                        "forcing.modes",
                        format!("mode {} does not fit a {}-D grid", fmt_forcing_mode(m), self.grid.dims()),
                    );
                }
            }
        }
        if let InitialSpec::Modes { terms, .. } = &self.initial {
            for t in terms {
                if t.wavevector.len() != self.grid.dims() {
                    push(
                        "initial.modes",
                        format!("wavevector {:?} does not fit a {}-D grid", t.wavevector, self.grid.dims()),
                    );
                }
            }
        }
        let sw = &self.sweep;
        if let Some(m) = &sw.perturbation {
            if m.wavevector.len() != self.grid.dims() || m.component >= self.grid.dims() {
                push("sweep.perturbation", "does not fit the grid dimension".into());
            }
        }
        if sw.levels < 1 {
            push("sweep.levels", "must be positive".into());
        }
        if !(sw.stationary_dt > 0.0) {
            push("sweep.stationary_dt", "must be positive".into());
        }
        if !(sw.eta0 > 0.0) {
            push("sweep.eta0", "must be positive".into());
        }
        if sw.betas.iter().any(|b| !(*b >= 0.0)) {
            push("sweep.betas", "entries must be nonnegative".into());
        }
        if sw.dts.iter().any(|b| !(*b > 0.0)) {
            push("sweep.dts", "entries must be positive".into());
        }
        if sw.cutoffs.iter().any(|c| !(*c >= 1.0)) {
            push("sweep.cutoffs", "entries must be ≥ 1".into());
        }
        let v = &self.verdicts;
        for (key, x) in [
            ("verdicts.energy_tol", v.energy_tol),
            ("verdicts.mass_tol", v.mass_tol),
            ("verdicts.mean_mu_tol", v.mean_mu_tol),
            ("verdicts.dissipation_tol", v.dissipation_tol),
            ("verdicts.uniqueness_tol", v.uniqueness_tol),
            ("verdicts.darcy_dissipation_ratio", v.darcy_dissipation_ratio),
            ("verdicts.stability_spread", v.stability_spread),
            ("verdicts.variational_tol", v.variational_tol),
            ("verdicts.pointwise_tol", v.pointwise_tol),
            ("verdicts.identity_tol", v.identity_tol),
        ] {
            if !(x >= 0.0) {
                push(key, format!("must be nonnegative, got {x}"));
            }
        }
        if !(v.dependence_factor >= 1.0) || !(v.rate_factor >= 1.0) {
            push("verdicts", "ratio factors must be ≥ 1".into());
        }
        if !(v.order_min <= v.order_max) {
            push("verdicts.order_min", "must not exceed order_max".into());
        }
        issues
    }

    /// Configuration text that parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut o = String::new();
        writeln!(o, "seed = {}", self.seed).unwrap();

        writeln!(o, "\n[grid]\ndims = {}", self.grid.dims()).unwrap();
        writeln!(
            o,
            "n = {}",
            self.grid.sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
        )
        .unwrap();
        writeln!(o, "length = {}", join_f64(&self.grid.lengths)).unwrap();

        o.push_str("\n[model]\n");
        match self.model.potential.family() {
            PotentialFamily::Quartic => o.push_str("potential = quartic\n"),
            PotentialFamily::EvenPolynomial(c) => {
                writeln!(o, "potential = even_polynomial\npotential.coeffs = {}", join_f64(c)).unwrap();
            }
            PotentialFamily::Zero => o.push_str("potential = none\n"),
        }
        write_coefficient(&mut o, "viscosity", &self.model.eta);
        write_coefficient(&mut o, "friction", &self.model.lambda);
        write_coefficient(&mut o, "mobility", &self.model.mobility);
        let m = &self.model;
        writeln!(
            o,
            "nu = {}\nsigma = {}\nh.amplitude = {}\nh.scale = {}\nepsilon = {}",
            fmt_f64(m.nu),
            fmt_f64(m.sigma),
            fmt_f64(m.h.amplitude),
            fmt_f64(m.h.scale),
            fmt_f64(m.epsilon)
        )
        .unwrap();
        writeln!(
            o,
            "validation.range = {}\nvalidation.samples = {}",
            fmt_f64(self.validation.range),
            self.validation.samples
        )
        .unwrap();

        let f = &self.flow;
        writeln!(
            o,
            "\n[flow]\nmode = {}\nbeta = {}\nmax_iterations = {}\ntolerance = {}",
            f.mode.name(),
            fmt_f64(f.regularization_beta),
            f.max_iterations,
            fmt_f64(f.residual_tolerance)
        )
        .unwrap();

        let s = &self.stepper;
        writeln!(
            o,
            "\n[stepper]\ndt = {}\ndt_min = {}\ndt_max = {}\nstab_a = {}\nkappa = {}\nt_final = {}",
            fmt_f64(s.dt),
            fmt_f64(s.dt_min),
            fmt_f64(s.dt_max),
            fmt_f64(s.stab_a),
            fmt_f64(s.kappa),
            fmt_f64(s.t_final)
        )
        .unwrap();
        writeln!(
            o,
            "cutoff = {}",
            s.cutoff.map_or_else(|| "none".to_string(), fmt_f64)
        )
        .unwrap();
        writeln!(
            o,
            "adaptive = {}\nenergy_increase_tol = {}\nshrink = {}\ngrow = {}\ngrow_after = {}",
            s.adapt.enabled,
            fmt_f64(s.adapt.energy_increase_tol),
            fmt_f64(s.adapt.shrink),
            fmt_f64(s.adapt.grow),
            s.adapt.grow_after
        )
        .unwrap();

        o.push_str("\n[forcing]\n");
        match &self.forcing {
            ForcingSpec::Zero => o.push_str("kind = zero\n"),
            ForcingSpec::Modes {
                modes,
                divergence_free,
                profile,
            } => {
                writeln!(
                    o,
                    "kind = modes\nmodes = {}\ndivergence_free = {divergence_free}",
                    modes.iter().map(fmt_forcing_mode).collect::<Vec<_>>().join("; ")
                )
                .unwrap();
                write_profile(&mut o, profile);
            }
            ForcingSpec::File { path, profile } => {
                writeln!(o, "kind = file\nfile = {}", path.display()).unwrap();
                write_profile(&mut o, profile);
            }
        }

        o.push_str("\n[initial]\n");
        match &self.initial {
            InitialSpec::Constant(c) => writeln!(o, "kind = constant\nvalue = {}", fmt_f64(*c)).unwrap(),
            InitialSpec::Modes { offset, terms } => writeln!(
                o,
                "kind = modes\noffset = {}\nmodes = {}",
                fmt_f64(*offset),
                terms
                    .iter()
                    .map(|t| format!("{}:{}", fmt_f64(t.amplitude), join_ints(&t.wavevector)))
                    .collect::<Vec<_>>()
                    .join("; ")
            )
            .unwrap(),
            InitialSpec::Random {
                band,
                amplitude,
                mean,
            } => writeln!(
                o,
                "kind = random\nband = {}\namplitude = {}\nmean = {}",
                fmt_f64(*band),
                fmt_f64(*amplitude),
                fmt_f64(*mean)
            )
            .unwrap(),
            InitialSpec::File(p) => writeln!(o, "kind = file\nfile = {}", p.display()).unwrap(),
        }

        let out = &self.output;
        writeln!(
            o,
            "\n[output]\ncsv = {}\nsnapshot_stride = {}\ncheckpoint_stride = {}\nreport_dir = {}",
            out.csv, out.snapshot_stride, out.checkpoint_stride, out.report_dir
        )
        .unwrap();

        let v = &self.verdicts;
        o.push_str("\n[verdicts]\n");
        for (k, x) in [
            ("energy_tol", v.energy_tol),
            ("mass_tol", v.mass_tol),
            ("mean_mu_tol", v.mean_mu_tol),
            ("dissipation_tol", v.dissipation_tol),
            ("uniqueness_tol", v.uniqueness_tol),
            ("dependence_factor", v.dependence_factor),
            ("darcy_dissipation_ratio", v.darcy_dissipation_ratio),
            ("stability_spread", v.stability_spread),
            ("rate_factor", v.rate_factor),
            ("order_min", v.order_min),
            ("order_max", v.order_max),
            ("variational_tol", v.variational_tol),
            ("pointwise_tol", v.pointwise_tol),
            ("identity_tol", v.identity_tol),
        ] {
            writeln!(o, "{k} = {}", fmt_f64(x)).unwrap();
        }

        let sw = &self.sweep;
        writeln!(
            o,
            "\n[sweep]\nlevels = {}\neta0 = {}\ncutoffs = {}\nbetas = {}\ndts = {}\namplitudes = {}\nstationary_dt = {}",
            sw.levels,
            fmt_f64(sw.eta0),
            join_f64(&sw.cutoffs),
            join_f64(&sw.betas),
            join_f64(&sw.dts),
            join_f64(&sw.amplitudes),
            fmt_f64(sw.stationary_dt)
        )
        .unwrap();
        if let Some(p) = &sw.perturbation {
            writeln!(o, "perturbation = {}", fmt_forcing_mode(p)).unwrap();
        }
        o
    }
}

/// Largest Galerkin cutoff the grid resolves without its Nyquist modes.
pub fn max_cutoff(grid: &Grid) -> f64 {
    let n = grid.sizes().iter().min().copied().unwrap_or(2);
    (n / 2 - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn issues(text: &str) -> Vec<ConfigIssue> {
        match RunConfig::parse_str(text, true) {
            Err(Error::ConfigIssues(i)) => i,
            other => panic!("expected issues, got {other:?}"),
        }
    }

    #[test]
    fn empty_config_gives_defaults() {
        let p = RunConfig::parse_str("# nothing\n", true).unwrap();
        assert_eq!(p.config, RunConfig::default());
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn default_text_roundtrips() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse_str(&c.to_text(), true).unwrap().config, c);
    }

    #[test]
    fn variant_roundtrip() {
        let text = "seed = 9\n[grid]\ndims = 3\nn = 8, 10, 12\nlength = 6.283185307179586\n\
            [model]\npotential = even_polynomial\npotential.coeffs = 0.25, -0.5, 0.25\n\
            viscosity.kind = tanh\nviscosity.base = 1\nviscosity.amplitude = 0.5\nviscosity.scale = 0.3\n\
            friction.kind = saturated_quadratic\nfriction.base = 2\nfriction.amplitude = 1\n\
            sigma = 0.1\nh.amplitude = 0.05\nh.scale = 0.5\n\
            [flow]\nmode = darcy\n[stepper]\ncutoff = 3\nadaptive = false\n\
            [forcing]\nkind = modes\nmodes = 1:0.5:0,1,0; 3:0.25:1,0,0\nprofile = ramp\nramp_time = 0.2\n\
            [initial]\nkind = modes\noffset = 0.1\nmodes = 0.2:1,0,0; 0.1:0,2,1\n\
            [sweep]\nperturbation = 2:1:1,0,0\n";
        let c = RunConfig::parse_str(text, true).unwrap().config;
        assert_eq!(c.grid.sizes, vec![8, 10, 12]);
        assert_eq!(c.flow.galerkin_cutoff, Some(3.0));
        assert_eq!(RunConfig::parse_str(&c.to_text(), true).unwrap().config, c);
    }

    #[test]
    fn unknown_key_is_reported_with_suggestion() {
        let i = issues("[model]\nviscoity.kind = constant\n");
        assert_eq!(i.len(), 1);
        assert!(i[0].message.contains("did you mean 'model.viscosity.kind'"), "{}", i[0]);
    }

    #[test]
    fn lenient_mode_downgrades_unknown_keys() {
        let p = RunConfig::parse_str("[model]\nviscoity.kind = constant\n", false).unwrap();
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn inapplicable_keys_are_rejected() {
        let i = issues("[model]\nviscosity.kind = constant\nviscosity.scale = 2\n");
        assert_eq!(i[0].key, "model.viscosity.scale");
        assert!(i[0].message.contains("not used"));
    }

    #[test]
    fn all_problems_are_collected() {
        let i = issues("[grid]\nn = abc\n[flow]\nmode = stokes\ntolerance = x\n[stepper]\nfoo = 1\n");
        assert_eq!(i.len(), 4, "{i:?}");
    }

    #[test]
    fn friction_lower_bound_zero_names_positivity() {
        let i = issues("[model]\nfriction.kind = constant\nfriction.value = 0\n");
        assert!(i.iter().any(|x| x.message.contains("positivity")), "{i:?}");
    }

    #[test]
    fn cutoff_beyond_band_is_rejected() {
        let i = issues("[grid]\nn = 16\n[stepper]\ncutoff = 8\n");
        assert!(i.iter().any(|x| x.key == "stepper.cutoff"));
    }

    #[test]
    fn duplicate_and_malformed_lines() {
        let i = issues("seed = 1\nseed = 2\n[grid\nnonsense\n");
        assert_eq!(i.len(), 3, "{i:?}");
    }
}
