//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comment
//! [experiment]
//! kind = simulate-wave
//! nonlinearity = defocusing_exp:m=1
//! [grid]
//! n = 256
//! ```
//!
//! Keys are unique across sections. Values are layered file < environment
//! (`SUPERCRIT_<KEY>`) < command line, then resolved against per-kind
//! defaults and validated in one pass.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use supercrit_core::nonlinearity::{check_subcritical, parse_selection};
use supercrit_core::{GridSpec, Selection};

pub const ENV_PREFIX: &str = "SUPERCRIT_";

/// Every key with its home section, in canonical order.
pub const KEYS: &[(&str, &str)] = &[
    ("experiment", "kind"),
    ("experiment", "nonlinearity"),
    ("experiment", "seed"),
    ("experiment", "output_dir"),
    ("grid", "d"),
    ("grid", "n"),
    ("grid", "l"),
    ("time", "dt"),
    ("time", "t"),
    ("time", "stride"),
    ("time", "margin"),
    ("data", "amplitude"),
    ("data", "radius"),
    ("data", "velocity"),
    ("data", "perturbation"),
    ("study", "mode"),
    ("study", "ladder"),
    ("study", "radii"),
    ("study", "samples"),
    ("study", "grid_points"),
    ("study", "q_max"),
    ("study", "trials"),
    ("study", "shift"),
];

fn section_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(_, k)| *k == key).map(|(s, _)| *s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    CheckAssumptions,
    SimulateWave,
    SimulateNls,
    WeakStrong,
    AppendixConstruct,
    IdentityCheck,
}

impl Kind {
    pub const ALL: [Kind; 6] = [
        Kind::CheckAssumptions,
        Kind::SimulateWave,
        Kind::SimulateNls,
        Kind::WeakStrong,
        Kind::AppendixConstruct,
        Kind::IdentityCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::CheckAssumptions => "check-assumptions",
            Kind::SimulateWave => "simulate-wave",
            Kind::SimulateNls => "simulate-nls",
            Kind::WeakStrong => "weak-strong",
            Kind::AppendixConstruct => "appendix-construct",
            Kind::IdentityCheck => "identity-check",
        }
    }
}

impl FromStr for Kind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Kind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown kind '{s}' (expected one of {})", kind_list()))
    }
}

fn kind_list() -> String {
    Kind::ALL.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    PerturbedData,
    TruncationLadder,
    CoarseGrid,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::PerturbedData => "perturbed_data",
            Mode::TruncationLadder => "truncation_ladder",
            Mode::CoarseGrid => "coarse_grid",
        }
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "perturbed_data" => Ok(Mode::PerturbedData),
            "truncation_ladder" => Ok(Mode::TruncationLadder),
            "coarse_grid" => Ok(Mode::CoarseGrid),
            _ => Err(format!("unknown mode '{s}' (expected perturbed_data, truncation_ladder or coarse_grid)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shift {
    /// Estimated from the sampled convexity remainder.
    Auto,
    Fixed(f64),
}

/// Where a raw value came from; used in error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    File { line: usize },
    Env(String),
    Cli,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { line } => write!(f, "line {line}"),
            Origin::Env(var) => write!(f, "environment variable {var}"),
            Origin::Cli => write!(f, "command line"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub origin: Option<Origin>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.origin {
            Some(o) => write!(f, "{o}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Every problem found in a configuration; no partial config is produced.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.issues.iter().map(|i| i.to_string()).collect();
        f.write_str(&lines.join("\n"))
    }
}

impl ConfigError {
    fn single(origin: Option<Origin>, message: impl Into<String>) -> Self {
        Self { issues: vec![ConfigIssue { origin, message: message.into() }] }
    }
}

/// Unresolved `key -> (value, origin)` layers.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, (String, Origin)>,
}

impl RawConfig {
    /// Parses the file format; later layers override.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        let mut issues = Vec::new();
        let mut section: Option<String> = None;
        for (idx, line) in text.lines().enumerate() {
            let origin = Origin::File { line: idx + 1 };
            let line = match line.find('#') {
                Some(p) => &line[..p],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = match rest.strip_suffix(']') {
                    Some(n) => n.trim(),
                    None => {
                        issues.push(ConfigIssue { origin: Some(origin), message: format!("unterminated section header '{line}'") });
                        continue;
                    }
                };
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    issues.push(ConfigIssue { origin: Some(origin), message: format!("unknown section [{name}]") });
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                issues.push(ConfigIssue { origin: Some(origin), message: format!("expected key = value, got '{line}'") });
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            match section_of(key) {
                None => {
                    issues.push(ConfigIssue { origin: Some(origin), message: format!("unknown key '{key}'") });
                    continue;
                }
                Some(home) => match &section {
                    Some(s) if s != home => {
                        issues.push(ConfigIssue {
                            origin: Some(origin),
                            message: format!("key '{key}' belongs in [{home}], found in [{s}]"),
                        });
                        continue;
                    }
                    None => {
                        issues.push(ConfigIssue {
                            origin: Some(origin),
                            message: format!("key '{key}' appears before any section header (expected [{home}])"),
                        });
                        continue;
                    }
                    _ => {}
                },
            }
            if let Some((_, Origin::File { line })) = raw.values.get(key) {
                issues.push(ConfigIssue {
                    origin: Some(origin),
                    message: format!("duplicate key '{key}' (first set on line {line})"),
                });
                continue;
            }
            raw.values.insert(key.to_string(), (value.to_string(), origin));
        }
        if issues.is_empty() { Ok(raw) } else { Err(ConfigError { issues }) }
    }

    /// Applies `SUPERCRIT_<KEY>` variables from `vars`.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        for (name, value) in vars {
            let Some(suffix) = name.strip_prefix(ENV_PREFIX) else { continue };
            let key = suffix.to_ascii_lowercase();
            if section_of(&key).is_none() {
                issues.push(ConfigIssue { origin: Some(Origin::Env(name.clone())), message: format!("unknown key '{key}'") });
                continue;
            }
            self.values.insert(key, (value.trim().to_string(), Origin::Env(name)));
        }
        if issues.is_empty() { Ok(()) } else { Err(ConfigError { issues }) }
    }

    /// Command-line override of a single key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if section_of(key).is_none() {
            return Err(ConfigError::single(Some(Origin::Cli), format!("unknown key '{key}'")));
        }
        self.values.insert(key.to_string(), (value.trim().to_string(), Origin::Cli));
        Ok(())
    }

    /// Parses `key=value` from the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| ConfigError::single(Some(Origin::Cli), format!("expected key=value, got '{pair}'")))?;
        self.set(k.trim(), v)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(v, _)| v.as_str())
    }
}

/// A validated experiment with every default made explicit.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub nonlinearity: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub d: usize,
    pub n: usize,
    pub l: f64,
    pub dt: f64,
    pub t: f64,
    pub stride: usize,
    pub margin: f64,
    pub amplitude: f64,
    pub radius: f64,
    pub velocity: f64,
    pub perturbation: f64,
    pub mode: Mode,
    pub ladder: Vec<f64>,
    pub radii: Vec<f64>,
    pub samples: usize,
    pub grid_points: usize,
    pub q_max: f64,
    pub trials: usize,
    pub shift: Shift,
}

pub const DEFAULT_SEED: u64 = 0x5EED;
/// Wave time step as a fraction of `h/√d`.
pub const WAVE_DT_FRACTION: f64 = 0.25;
/// Time step of the identity check, as a fraction of `h`.
pub const IDENTITY_DT_FRACTION: f64 = 0.125;
/// Time step of the truncation ladder, as a fraction of `h/√d`; the energy
/// inequality check needs the `O(dt²)` energy defect below `10⁻⁶`.
pub const APPENDIX_DT_FRACTION: f64 = 1.0 / 64.0;
pub const NLS_MAX_DT: f64 = 1e-3;
/// Target number of recorded snapshots per run.
pub const SNAPSHOTS: usize = 128;

/// Parses a config file on its own (no environment, no overrides).
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    resolve(&RawConfig::parse(text)?)
}

struct Reader<'a> {
    raw: &'a RawConfig,
    issues: Vec<ConfigIssue>,
}

impl Reader<'_> {
    fn origin(&self, key: &str) -> Option<Origin> {
        self.raw.values.get(key).map(|(_, o)| o.clone())
    }

    fn err(&mut self, key: &str, message: String) {
        let origin = self.origin(key);
        self.issues.push(ConfigIssue { origin, message });
    }

    fn parse<T>(&mut self, key: &str, what: &str, f: impl Fn(&str) -> Option<T>) -> Option<T> {
        let v = self.raw.get(key)?;
        match f(v) {
            Some(x) => Some(x),
            None => {
                let m = format!("'{key}' must be {what}, got '{v}'");
                self.err(key, m);
                None
            }
        }
    }

    fn real(&mut self, key: &str) -> Option<f64> {
        self.parse(key, "a finite number", |v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
    }

    fn count(&mut self, key: &str) -> Option<usize> {
        self.parse(key, "a nonnegative integer", |v| v.parse::<usize>().ok())
    }

    fn list(&mut self, key: &str) -> Option<Vec<f64>> {
        self.parse(key, "a comma-separated list of numbers", |v| {
            v.split(',').map(|x| x.trim().parse::<f64>().ok().filter(|x| x.is_finite())).collect()
        })
    }

    fn check(&mut self, key: &str, ok: bool, message: impl FnOnce() -> String) {
        if !ok {
            let m = message();
            self.err(key, m);
        }
    }
}

fn parse_seed(v: &str) -> Option<u64> {
    match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => v.parse().ok(),
    }
}

/// Resolves defaults and validates every key.
pub fn resolve(raw: &RawConfig) -> Result<ExperimentConfig, ConfigError> {
    let mut r = Reader { raw, issues: Vec::new() };
    let kind = match raw.get("kind") {
        Some(v) => match v.parse::<Kind>() {
            Ok(k) => Some(k),
            Err(e) => {
                r.err("kind", e);
                None
            }
        },
        None => {
            r.issues.push(ConfigIssue { origin: None, message: format!("missing required key 'kind' ({})", kind_list()) });
            None
        }
    };
    let selection = match raw.get("nonlinearity") {
        Some(v) => match parse_selection(v) {
            Ok(s) => Some(s),
            Err(e) => {
                r.err("nonlinearity", e.to_string());
                None
            }
        },
        None => {
            r.issues.push(ConfigIssue { origin: None, message: "missing required key 'nonlinearity'".into() });
            None
        }
    };
    let (Some(kind), Some(selection)) = (kind, selection) else {
        return Err(ConfigError { issues: r.issues });
    };
    let is_nls = matches!(selection, Selection::Nls(_));
    match (kind, is_nls) {
        (Kind::SimulateWave | Kind::AppendixConstruct, true) => {
            r.err("nonlinearity", format!("{} needs a wave nonlinearity, got '{}'", kind.as_str(), selection.name()))
        }
        (Kind::SimulateNls, false) => {
            r.err("nonlinearity", format!("simulate-nls needs an NLS nonlinearity, got '{}'", selection.name()))
        }
        _ => {}
    }

    let seed = r.parse("seed", "a 64-bit integer (decimal or 0x-prefixed hex)", parse_seed).unwrap_or(DEFAULT_SEED);
    let output_dir = PathBuf::from(raw.get("output_dir").unwrap_or("runs"));
    let d = r.count("d").unwrap_or(1);
    r.check("d", (1..=3).contains(&d), || format!("dimension d must be 1, 2 or 3, got {d}"));
    let n = r.count("n").unwrap_or(match d {
        1 => 256,
        2 => 128,
        _ => 32,
    });
    let default_l = if kind == Kind::IdentityCheck || !is_nls { 8.0 } else { 64.0 };
    let l = r.real("l").unwrap_or(default_l);
    let grid = GridSpec::new(d.clamp(1, 3), n, l);
    if let Err(e) = &grid {
        let key = if raw.get("n").is_some() && !(n >= 8 && n.is_power_of_two()) { "n" } else { "l" };
        r.err(key, e.to_string());
    }
    let h = l / n as f64;
    let sqrt_d = (d.max(1) as f64).sqrt();
    let wave_cfl = supercrit_core::wave::cfl_bound(&GridSpec { d: d.clamp(1, 3), n: n.max(1), l });
    let default_dt = match kind {
        Kind::IdentityCheck => IDENTITY_DT_FRACTION * h,
        Kind::AppendixConstruct => APPENDIX_DT_FRACTION * h / sqrt_d,
        _ if is_nls => NLS_MAX_DT.min(h),
        _ => WAVE_DT_FRACTION * h / sqrt_d,
    };
    let dt = r.real("dt").unwrap_or(default_dt);
    let t = r.real("t").unwrap_or(1.0);
    r.check("t", t >= 0.0, || format!("horizon t must be nonnegative, got {t}"));
    if !(dt > 0.0) {
        r.err("dt", format!("time step dt must be positive, got {dt}"));
    } else if is_nls && dt > h {
        r.err("dt", format!("time step dt = {dt} exceeds h = {h}; the split-step scheme needs dt <= h"));
    } else if !is_nls && dt > wave_cfl * (1.0 + 1e-12) {
        r.err("dt", format!("time step dt = {dt} violates the stability bound dt <= 0.25 h/sqrt(d) = {wave_cfl}"));
    }
    let steps = if dt > 0.0 { (t / dt).round() as usize } else { 0 };
    let stride = r.count("stride").unwrap_or((steps / SNAPSHOTS).max(1));
    r.check("stride", stride >= 1, || "stride must be at least 1".into());
    let margin = r.real("margin").unwrap_or(l / 8.0);
    r.check("margin", margin > 0.0 && margin < l / 2.0, || format!("margin must lie in (0, l/2), got {margin}"));

    let (amp0, rad0) = match kind {
        Kind::IdentityCheck => (0.5, 2.0),
        _ if is_nls => (1.0, 4.0),
        _ => (0.5, 1.0),
    };
    let amplitude = r.real("amplitude").unwrap_or(amp0);
    let radius = r.real("radius").unwrap_or(rad0);
    r.check("radius", radius > 0.0 && radius < l / 2.0, || format!("radius must lie in (0, l/2), got {radius}"));
    let velocity = r.real("velocity").unwrap_or(0.0);
    r.check("velocity", !is_nls || velocity == 0.0, || "NLS data has no velocity".into());
    let perturbation = r.real("perturbation").unwrap_or(0.0);

    let mode = match raw.get("mode") {
        Some(v) => match v.parse::<Mode>() {
            Ok(m) => m,
            Err(e) => {
                r.err("mode", e);
                Mode::PerturbedData
            }
        },
        None if kind == Kind::AppendixConstruct => Mode::TruncationLadder,
        None => Mode::PerturbedData,
    };
    if kind == Kind::AppendixConstruct && mode != Mode::TruncationLadder {
        r.err("mode", format!("appendix-construct runs a truncation_ladder, got {}", mode.as_str()));
    }
    if kind == Kind::WeakStrong && mode == Mode::TruncationLadder && is_nls {
        r.err("mode", "the truncation ladder is defined for wave nonlinearities only".into());
    }
    let default_ladder = match (kind, mode) {
        (Kind::AppendixConstruct, _) => vec![1.0, 2.0, 4.0, 8.0],
        (_, Mode::TruncationLadder) => vec![2.0, 4.0, 8.0],
        (_, Mode::CoarseGrid) => vec![(n / 4) as f64, (n / 2) as f64],
        _ => vec![1e-3, 1e-2, 1e-1],
    };
    let ladder = r.list("ladder").unwrap_or(default_ladder);
    r.check("ladder", !ladder.is_empty() && ladder.iter().all(|x| *x > 0.0), || {
        format!("ladder values must be positive, got {ladder:?}")
    });
    r.check("ladder", ladder.windows(2).all(|p| p[1] > p[0]), || {
        format!("ladder values must be strictly increasing, got {ladder:?}")
    });
    if kind == Kind::AppendixConstruct {
        r.check("ladder", ladder.len() >= 3, || format!("the construction needs at least 3 levels, got {}", ladder.len()));
    }
    if mode == Mode::CoarseGrid && matches!(kind, Kind::WeakStrong) {
        r.check("ladder", ladder.iter().all(|x| x.fract() == 0.0 && *x >= 8.0 && (*x as usize).is_power_of_two() && *x as usize <= n), || {
            format!("coarse grid sizes must be powers of two in [8, n = {n}], got {ladder:?}")
        });
    }
    let radii = r.list("radii").unwrap_or_else(|| supercrit_core::assumption_lab::CLASS_RADII.to_vec());
    r.check("radii", !radii.is_empty() && radii.iter().all(|x| *x > 0.0), || format!("radii must be positive, got {radii:?}"));
    let samples = r.count("samples").unwrap_or(1_000_000);
    r.check("samples", samples >= 1, || "samples must be at least 1".into());
    let grid_points = r.count("grid_points").unwrap_or(201);
    r.check("grid_points", grid_points >= 2, || "grid_points must be at least 2".into());
    let q_max = r.real("q_max").unwrap_or(10.0);
    r.check("q_max", q_max > 2.0, || format!("q_max must exceed 2, got {q_max}"));
    let trials = r.count("trials").unwrap_or(1000);
    r.check("trials", trials >= 1, || "trials must be at least 1".into());
    let shift = match raw.get("shift") {
        None | Some("auto") => Shift::Auto,
        Some(_) => match r.real("shift") {
            Some(a) if a >= 0.0 => Shift::Fixed(a),
            Some(a) => {
                r.err("shift", format!("shift must be 'auto' or nonnegative, got {a}"));
                Shift::Auto
            }
            None => Shift::Auto,
        },
    };
    if let Some(g) = selection.growth() {
        if let Err(e) = check_subcritical(g.q, d) {
            r.err("nonlinearity", e.to_string());
        }
    }
    if !r.issues.is_empty() {
        return Err(ConfigError { issues: r.issues });
    }
    Ok(ExperimentConfig {
        kind,
        nonlinearity: raw.get("nonlinearity").unwrap().to_string(),
        seed,
        output_dir,
        d,
        n,
        l,
        dt,
        t,
        stride,
        margin,
        amplitude,
        radius,
        velocity,
        perturbation,
        mode,
        ladder,
        radii,
        samples,
        grid_points,
        q_max,
        trials,
        shift,
    })
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    pub fn selection(&self) -> Selection {
        parse_selection(&self.nonlinearity).expect("validated at parse")
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.d, self.n, self.l).expect("validated at parse")
    }

    pub fn steps(&self) -> usize {
        (self.t / self.dt).round() as usize
    }

    fn value(&self, key: &str) -> String {
        match key {
            "kind" => self.kind.as_str().into(),
            "nonlinearity" => self.nonlinearity.clone(),
            "seed" => self.seed.to_string(),
            "output_dir" => self.output_dir.display().to_string(),
            "d" => self.d.to_string(),
            "n" => self.n.to_string(),
            "l" => format!("{:?}", self.l),
            "dt" => format!("{:?}", self.dt),
            "t" => format!("{:?}", self.t),
            "stride" => self.stride.to_string(),
            "margin" => format!("{:?}", self.margin),
            "amplitude" => format!("{:?}", self.amplitude),
            "radius" => format!("{:?}", self.radius),
            "velocity" => format!("{:?}", self.velocity),
            "perturbation" => format!("{:?}", self.perturbation),
            "mode" => self.mode.as_str().into(),
            "ladder" => join(&self.ladder),
            "radii" => join(&self.radii),
            "samples" => self.samples.to_string(),
            "grid_points" => self.grid_points.to_string(),
            "q_max" => format!("{:?}", self.q_max),
            "trials" => self.trials.to_string(),
            "shift" => match self.shift {
                Shift::Auto => "auto".into(),
                Shift::Fixed(a) => format!("{a:?}"),
            },
            _ => unreachable!("unknown key {key}"),
        }
    }

    /// Canonical text: every key in fixed order, floats in shortest
    /// round-trip form. Parsing it gives back the same config.
    pub fn serialize(&self) -> String {
        self.render(|_| true)
    }

    fn render(&self, keep: impl Fn(&str) -> bool) -> String {
        let mut out = String::new();
        let mut section = "";
        for (s, k) in KEYS {
            if !keep(k) {
                continue;
            }
            if *s != section {
                out.push_str(&format!("[{s}]\n"));
                section = s;
            }
            out.push_str(&format!("{k} = {}\n", self.value(k)));
        }
        out
    }

    /// Canonical text without `output_dir`; the experiment id hashes this.
    pub fn canonical(&self) -> String {
        self.render(|k| k != "output_dir")
    }

    /// Every key/value pair, for the manifest echo.
    pub fn echo(&self) -> BTreeMap<String, String> {
        KEYS.iter().map(|(_, k)| (k.to_string(), self.value(k))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[experiment]\nkind = simulate-wave\nnonlinearity = defocusing_exp:m=1\n";

    #[test]
    fn minimal_wave_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!((c.d, c.n, c.l), (1, 256, 8.0));
        assert_eq!(c.dt, 0.25 * 8.0 / 256.0);
        assert_eq!(c.steps(), 128);
        assert_eq!(c.stride, 1);
        assert_eq!(c.margin, 1.0);
        assert_eq!(c.seed, DEFAULT_SEED);
    }

    #[test]
    fn stride_targets_128_snapshots() {
        let c = parse_config(&format!("{MINIMAL}[time]\nt = 4\n")).unwrap();
        assert_eq!(c.steps() / c.stride, 128);
        let nls = parse_config("[experiment]\nkind = simulate-nls\nnonlinearity = nls_coercive_exp\n").unwrap();
        assert_eq!((nls.l, nls.dt, nls.radius), (64.0, 1e-3, 4.0));
        assert_eq!(nls.stride, 7);
    }

    #[test]
    fn non_power_of_two_is_rejected() {
        let e = parse_config(&format!("{MINIMAL}[grid]\nn = 100\n")).unwrap_err();
        assert_eq!(e.issues.len(), 1);
        assert_eq!(e.issues[0].origin, Some(Origin::File { line: 5 }));
        assert!(e.issues[0].message.contains("power of two"), "{e}");
    }

    #[test]
    fn supercritical_growth_names_two_star() {
        let e = parse_config(
            "[experiment]\nkind = simulate-wave\nnonlinearity = oscillating_sin:q=7\n[grid]\nd = 3\nn = 16\n",
        )
        .unwrap_err();
        assert!(e.to_string().contains("2*=6"), "{e}");
        assert!(parse_config("[experiment]\nkind = simulate-wave\nnonlinearity = oscillating_sin:q=3\n[grid]\nd = 3\nn = 16\n").is_ok());
    }

    #[test]
    fn cfl_violation_is_refused_at_parse() {
        let e = parse_config(&format!("{MINIMAL}[time]\ndt = 0.1\n")).unwrap_err();
        assert!(e.to_string().contains("line 5") && e.to_string().contains("stability"), "{e}");
    }

    #[test]
    fn every_bad_line_is_reported() {
        let text = "[experiment]\nkind = simulate-wave\nnonlinearity = linear\nbogus = 1\n[grid]\nn = 64\nn = 128\n[time]\nd = 2\nnot a pair\n[plot]\n";
        let e = RawConfig::parse(text).unwrap_err();
        let lines: Vec<_> = e.issues.iter().map(|i| i.origin.clone().unwrap()).collect();
        assert_eq!(
            lines,
            [4, 7, 9, 10, 11].map(|line| Origin::File { line }).to_vec(),
            "{e}"
        );
    }

    #[test]
    fn missing_required_keys() {
        let e = parse_config("[grid]\nn = 64\n").unwrap_err();
        assert_eq!(e.issues.len(), 2);
    }

    #[test]
    fn layering_precedence() {
        let mut raw = RawConfig::parse(&format!("{MINIMAL}[grid]\nn = 64\n")).unwrap();
        raw.apply_env([("SUPERCRIT_N".to_string(), "128".to_string()), ("HOME".into(), "/".into())]).unwrap();
        assert_eq!(resolve(&raw).unwrap().n, 128);
        raw.set_pair("n=32").unwrap();
        assert_eq!(resolve(&raw).unwrap().n, 32);
        assert!(raw.apply_env([("SUPERCRIT_NOPE".to_string(), "1".to_string())]).is_err());
        let mut bad = raw.clone();
        bad.set("n", "33").unwrap();
        let e = resolve(&bad).unwrap_err();
        assert_eq!(e.issues[0].origin, Some(Origin::Cli));
    }

    #[test]
    fn round_trip_is_identity() {
        for text in [
            MINIMAL.to_string(),
            "[experiment]\nkind = weak-strong\nnonlinearity = oscillating_sin:q=1\nseed = 0xBEEF\n[study]\nmode = coarse_grid\nshift = 0.5\n".into(),
            "[experiment]\nkind = check-assumptions\nnonlinearity = nls_pure_power:p=3\n[grid]\nd = 2\n[study]\nradii = 0.1, 0.30000000000000004\n".into(),
        ] {
            let a = parse_config(&text).unwrap();
            let b = parse_config(&a.serialize()).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.serialize(), b.serialize());
        }
    }

    #[test]
    fn ladder_must_increase() {
        let e = parse_config("[experiment]\nkind = appendix-construct\nnonlinearity = oscillating_sin:q=1\n[study]\nladder = 4, 2, 8\n")
            .unwrap_err();
        assert!(e.to_string().contains("strictly increasing"));
        let e = parse_config("[experiment]\nkind = appendix-construct\nnonlinearity = nls_coercive_exp\n").unwrap_err();
        assert!(e.to_string().contains("wave nonlinearity"));
    }
}
