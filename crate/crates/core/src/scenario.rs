//! Scenario files: `key = value` lines, optional `[section]` headers, `#` comments.
//!
//! Keys are global; a section header only restricts which keys may follow it.
//! Keys before the first header may come from any section.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::closed_forms::critical_q;
use crate::fd_solver::RadialStencil;
use crate::harnack::{Probe, RatioKind};
use crate::params::Params;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: key `{key}` is not allowed in section [{section}]")]
    WrongSection { key: String, section: String, line: usize },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { section: String, line: usize },
    #[error("duplicate key `{key}` on lines {first} and {second}")]
    DuplicateKey { key: String, first: usize, second: usize },
    #[error("missing mandatory key `{0}`")]
    MissingKey(String),
    #[error("line {line}: bad value for `{key}`: {msg}")]
    BadValue { key: String, line: usize, msg: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

type Parsed<T> = std::result::Result<T, ScenarioError>;

const SECTIONS: &[(&str, &[&str])] = &[
    ("scenario", &["command", "id"]),
    ("params", &["n", "p", "q"]),
    ("solver", &["grid", "h", "epsilon", "safety", "t_start", "t_end", "snapshots", "radius", "stencil", "d_eff"]),
    ("initial", &["initial", "base", "amplitude", "width", "seed", "modes"]),
    ("barrier", &["lambda", "barrier_radius", "t_origin", "shift", "samples"]),
    ("probes", &["probes", "ratio", "bound"]),
    ("constants", &["mu", "c", "c_hat", "c_prime", "sigma", "x0", "y_hat"]),
    ("checks", &["tolerance"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    RangeCheck,
    Constants,
    Chain,
    SupersolutionAudit,
    CounterexampleAudit,
    SolveRadial,
    Solve2d,
    Harnack,
    Compare,
}

impl Command {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "range-check" => Command::RangeCheck,
            "constants" => Command::Constants,
            "chain" => Command::Chain,
            "supersolution-audit" => Command::SupersolutionAudit,
            "counterexample-audit" => Command::CounterexampleAudit,
            "solve-radial" => Command::SolveRadial,
            "solve-2d" => Command::Solve2d,
            "harnack" => Command::Harnack,
            "compare" => Command::Compare,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::RangeCheck => "range-check",
            Command::Constants => "constants",
            Command::Chain => "chain",
            Command::SupersolutionAudit => "supersolution-audit",
            Command::CounterexampleAudit => "counterexample-audit",
            Command::SolveRadial => "solve-radial",
            Command::Solve2d => "solve-2d",
            Command::Harnack => "harnack",
            Command::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridChoice {
    Radial,
    Planar,
}

/// How `λ` is chosen for the barrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    /// `λ_min(n, p, q)`.
    Minimal,
    /// The value making the profile an exact solution (needs `d = 2q/(2-q)`).
    SelfSimilar,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    Constant {
        base: f64,
    },
    /// `base + amplitude · exp(-|x|²/(2 width²))`.
    Gaussian {
        base: f64,
        amplitude: f64,
        width: f64,
    },
    /// `base + Σ_k a_k cos(kπ|x|/R)` with seeded coefficients, `Σ|a_k| ≤ amplitude < base`.
    Random {
        base: f64,
        amplitude: f64,
        seed: u64,
        modes: usize,
    },
    /// The barrier at `t_start`, with exact lateral data.
    Barrier,
    /// The critical counterexample at `t_start`, with exact lateral data.
    Counterexample,
}

/// Seeded radial cosine series; the same seed always yields the same function.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomProfile {
    pub base: f64,
    pub coefficients: Vec<f64>,
    pub radius: f64,
}

impl RandomProfile {
    pub fn new(base: f64, amplitude: f64, seed: u64, modes: usize, radius: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let total: f64 = raw.iter().map(|a: &f64| a.abs()).sum();
        let scale = if total > 0.0 { amplitude / total } else { 0.0 };
        Self { base, coefficients: raw.iter().map(|a| a * scale).collect(), radius }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let arg = std::f64::consts::PI * r / self.radius;
        self.base + self.coefficients.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * arg).cos()).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub grid: GridChoice,
    pub h: f64,
    pub epsilon: Option<f64>,
    pub safety: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub snapshots: Vec<f64>,
    /// Radial domain radius or planar half width.
    pub radius: f64,
    pub stencil: RadialStencil,
    pub d_eff: Option<f64>,
}

impl SolverSettings {
    /// Number of grid intervals implied by `h` and the radius (planar: across the full width).
    pub fn intervals(&self) -> Parsed<usize> {
        let span = match self.grid {
            GridChoice::Radial => self.radius,
            GridChoice::Planar => 2.0 * self.radius,
        };
        let m = span / self.h;
        let rounded = m.round();
        if (m - rounded).abs() > 1e-9 * m.max(1.0) || rounded < 2.0 {
            return Err(ScenarioError::Invalid(format!(
                "domain span {span} is not a whole number (>= 2) of steps h = {}",
                self.h
            )));
        }
        let m = rounded as usize;
        if self.grid == GridChoice::Planar && !m.is_multiple_of(2) {
            return Err(ScenarioError::Invalid(format!("planar grids need an even number of intervals, got {m}")));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSettings {
    pub lambda: LambdaChoice,
    pub radius: f64,
    pub t_origin: f64,
    pub shift: f64,
    /// Samples per axis for the residual audit.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantSettings {
    pub mu: f64,
    pub c: f64,
    pub c_hat: Option<f64>,
    pub c_prime: Option<f64>,
    pub sigma: f64,
    pub x0: Vec<f64>,
    pub y_hat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub command: Command,
    pub params: Params,
    pub solver: SolverSettings,
    pub initial: InitialProfile,
    pub barrier: BarrierSettings,
    pub probes: Vec<Probe>,
    pub ratio: RatioKind,
    pub bound: Option<f64>,
    pub constants: ConstantSettings,
    pub tolerance: Option<f64>,
}

struct Entry {
    value: String,
    line: usize,
}

fn section_of(key: &str) -> Option<&'static str> {
    SECTIONS.iter().find(|(_, keys)| keys.contains(&key)).map(|(s, _)| *s)
}

fn tokenize(text: &str) -> Parsed<HashMap<String, Entry>> {
    let mut entries: HashMap<String, Entry> = HashMap::new();
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ScenarioError::Syntax { line, msg: format!("unterminated section header `{content}`") })?
                .trim();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(ScenarioError::UnknownSection { section: name.to_string(), line });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ScenarioError::Syntax { line, msg: format!("expected key = value, got `{content}`") })?;
        let key = key.trim();
        let value = value.trim();
        let home = section_of(key).ok_or_else(|| ScenarioError::UnknownKey { key: key.to_string(), line })?;
        if let Some(s) = &section {
            if s != home {
                return Err(ScenarioError::WrongSection { key: key.to_string(), section: s.clone(), line });
            }
        }
        if let Some(prev) = entries.get(key) {
            return Err(ScenarioError::DuplicateKey { key: key.to_string(), first: prev.line, second: line });
        }
        entries.insert(key.to_string(), Entry { value: value.to_string(), line });
    }
    Ok(entries)
}

struct Lookup {
    entries: HashMap<String, Entry>,
}

impl Lookup {
    fn raw(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn bad(&self, key: &str, msg: impl Into<String>) -> ScenarioError {
        let line = self.raw(key).map_or(0, |e| e.line);
        ScenarioError::BadValue { key: key.to_string(), line, msg: msg.into() }
    }

    fn real(&self, key: &str) -> Parsed<Option<f64>> {
        self.raw(key).map(|e| parse_real(&e.value).map_err(|m| self.bad(key, m))).transpose()
    }

    fn real_or(&self, key: &str, default: f64) -> Parsed<f64> {
        Ok(self.real(key)?.unwrap_or(default))
    }

    fn integer(&self, key: &str) -> Parsed<Option<u64>> {
        self.raw(key).map(|e| e.value.parse::<u64>().map_err(|err| self.bad(key, err.to_string()))).transpose()
    }

    fn reals(&self, key: &str, sep: char) -> Parsed<Option<Vec<f64>>> {
        self.raw(key)
            .map(|e| {
                e.value
                    .split(sep)
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(parse_real)
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|m| self.bad(key, m))
            })
            .transpose()
    }
}

/// Accepts decimals and simple fractions such as `1/64`.
fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
            let den: f64 = den.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
            num / den
        }
        None => s.parse::<f64>().map_err(|_| format!("`{s}` is not a number"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

/// Reads and validates a scenario file; the id defaults to the file stem.
pub fn parse_scenario(path: &Path) -> Parsed<Scenario> {
    let text = fs::read_to_string(path)
        .map_err(|e| ScenarioError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    let stem = path.file_stem().map_or_else(|| "scenario".to_string(), |s| s.to_string_lossy().into_owned());
    parse_scenario_str(&text, &stem)
}

pub fn parse_scenario_str(text: &str, default_id: &str) -> Parsed<Scenario> {
    let lk = Lookup { entries: tokenize(text)? };
    let need = |key: &str| lk.raw(key).ok_or_else(|| ScenarioError::MissingKey(key.to_string()));

    let command_entry = need("command")?;
    let command = Command::parse(&command_entry.value)
        .ok_or_else(|| lk.bad("command", format!("unknown command `{}`", command_entry.value)))?;
    let id = lk.raw("id").map_or_else(|| default_id.to_string(), |e| e.value.clone());
    if id.is_empty() || id.contains(['/', '\\']) {
        return Err(lk.bad("id", "id must be a non-empty file-name fragment"));
    }

    need("n")?;
    need("p")?;
    need("q")?;
    let n = lk.integer("n")?.expect("checked") as usize;
    let p = lk.real("p")?.expect("checked");
    let q = if need("q")?.value == "critical" {
        critical_q(n, p).map_err(|e| lk.bad("q", e.to_string()))?
    } else {
        lk.real("q")?.expect("checked")
    };
    let params = Params::new(n, p, q).map_err(|e| ScenarioError::Invalid(e.to_string()))?;

    let grid = match lk.raw("grid").map(|e| e.value.as_str()) {
        None => match command {
            Command::Solve2d => GridChoice::Planar,
            _ => GridChoice::Radial,
        },
        Some("radial") => GridChoice::Radial,
        Some("planar") => GridChoice::Planar,
        Some(other) => return Err(lk.bad("grid", format!("expected radial or planar, got `{other}`"))),
    };
    let stencil = match lk.raw("stencil").map(|e| e.value.as_str()) {
        None | Some("conservative") => RadialStencil::Conservative,
        Some("centered") => RadialStencil::Centered,
        Some(other) => return Err(lk.bad("stencil", format!("expected conservative or centered, got `{other}`"))),
    };
    let t_start = lk.real_or("t_start", 0.0)?;
    let solver = SolverSettings {
        grid,
        h: lk.real_or("h", 1.0 / 64.0)?,
        epsilon: lk.real("epsilon")?,
        safety: lk.real_or("safety", crate::fd_solver::DEFAULT_SAFETY)?,
        t_start,
        t_end: lk.real_or("t_end", t_start)?,
        snapshots: lk.reals("snapshots", ',')?.unwrap_or_default(),
        radius: lk.real_or(
            "radius",
            match grid {
                GridChoice::Radial => 1.0,
                GridChoice::Planar => 0.5,
            },
        )?,
        stencil,
        d_eff: lk.real("d_eff")?,
    };
    if !(solver.h > 0.0) {
        return Err(lk.bad("h", "must be positive"));
    }
    if !(solver.safety > 0.0 && solver.safety <= 1.0) {
        return Err(lk.bad("safety", "must lie in (0, 1]"));
    }
    if let Some(e) = solver.epsilon {
        if !(e > 0.0) {
            return Err(lk.bad("epsilon", "must be positive"));
        }
    }
    if solver.t_end < solver.t_start {
        return Err(lk.bad("t_end", "must not precede t_start"));
    }
    let mut last = solver.t_start;
    for &t in &solver.snapshots {
        if !(t > last) || t > solver.t_end {
            return Err(lk.bad("snapshots", "times must increase strictly inside (t_start, t_end]"));
        }
        last = t;
    }

    let base = lk.real_or("base", 1.0)?;
    let amplitude = lk.real_or("amplitude", 1.0)?;
    let initial = match lk.raw("initial").map(|e| e.value.as_str()) {
        None | Some("gaussian") => InitialProfile::Gaussian { base, amplitude, width: lk.real_or("width", 0.1)? },
        Some("constant") => InitialProfile::Constant { base },
        Some("random") => {
            let amplitude = lk.real_or("amplitude", 0.5)?;
            if !(amplitude >= 0.0 && amplitude < base) {
                return Err(lk.bad("amplitude", "random data needs 0 <= amplitude < base"));
            }
            InitialProfile::Random {
                base,
                amplitude,
                seed: lk.integer("seed")?.unwrap_or(0),
                modes: lk.integer("modes")?.unwrap_or(4) as usize,
            }
        }
        Some("barrier") => InitialProfile::Barrier,
        Some("counterexample") => InitialProfile::Counterexample,
        Some(other) => return Err(lk.bad("initial", format!("unknown profile `{other}`"))),
    };

    let lambda = match lk.raw("lambda").map(|e| e.value.as_str()) {
        None | Some("min" | "minimal") => LambdaChoice::Minimal,
        Some("exact") => LambdaChoice::SelfSimilar,
        Some(_) => LambdaChoice::Value(lk.real("lambda")?.expect("present")),
    };
    let barrier = BarrierSettings {
        lambda,
        radius: lk.real_or("barrier_radius", 1.0)?,
        t_origin: lk.real_or("t_origin", 0.0)?,
        shift: lk.real_or("shift", 0.0)?,
        samples: lk.integer("samples")?.unwrap_or(200) as usize,
    };

    let probes = match lk.raw("probes") {
        None => Vec::new(),
        Some(e) => e
            .value
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|chunk| {
                let nums = chunk
                    .split_whitespace()
                    .map(parse_real)
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|m| lk.bad("probes", m))?;
                if nums.len() < 3 {
                    return Err(lk.bad("probes", format!("probe `{chunk}` needs coordinates, t0 and r")));
                }
                let (x0, rest) = nums.split_at(nums.len() - 2);
                Probe::new(x0.to_vec(), rest[0], rest[1]).map_err(|err| lk.bad("probes", err.to_string()))
            })
            .collect::<Parsed<Vec<_>>>()?,
    };
    let ratio = match lk.raw("ratio").map(|e| e.value.as_str()) {
        None | Some("elliptic") => RatioKind::Elliptic,
        Some("forward") => RatioKind::Forward,
        Some("backward") => RatioKind::Backward,
        Some(other) => return Err(lk.bad("ratio", format!("unknown ratio `{other}`"))),
    };

    let x0 = lk.reals("x0", ' ')?.unwrap_or_else(|| vec![0.0; n]);
    let y_hat = lk.reals("y_hat", ' ')?.unwrap_or_else(|| {
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        v
    });
    let constants = ConstantSettings {
        mu: lk.real_or("mu", crate::constants::DEFAULT_MU)?,
        c: lk.real_or("c", crate::constants::DEFAULT_C)?,
        c_hat: lk.real("c_hat")?,
        c_prime: lk.real("c_prime")?,
        sigma: lk.real_or("sigma", crate::constants::DEFAULT_SIGMA)?,
        x0,
        y_hat,
    };

    let scenario = Scenario {
        id,
        command,
        params,
        solver,
        initial,
        barrier,
        probes,
        ratio,
        bound: lk.real("bound")?,
        constants,
        tolerance: lk.real("tolerance")?,
    };
    validate(&scenario, &lk)?;
    Ok(scenario)
}

fn validate(s: &Scenario, lk: &Lookup) -> Parsed<()> {
    let q = s.params.q();
    let singular = q > 1.0 && q < 2.0;
    let needs_singular = matches!(s.command, Command::SupersolutionAudit | Command::Constants | Command::Chain)
        || s.initial == InitialProfile::Barrier;
    if needs_singular && !singular {
        return Err(ScenarioError::BadValue {
            key: "q".into(),
            line: lk.raw("q").map_or(0, |e| e.line),
            msg: format!("{} needs 1 < q < 2, got q = {q}", s.command.name()),
        });
    }
    if s.command == Command::CounterexampleAudit || s.initial == InitialProfile::Counterexample {
        let crit = critical_q(s.params.n(), s.params.p()).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if (crit - q).abs() > 1e-12 {
            return Err(lk.bad("q", format!("the counterexample needs the critical q = {crit}")));
        }
    }
    let solves = matches!(s.command, Command::SolveRadial | Command::Solve2d | Command::Harnack | Command::Compare);
    if solves {
        if s.command == Command::SolveRadial && s.solver.grid != GridChoice::Radial {
            return Err(lk.bad("grid", "solve-radial runs on the radial grid"));
        }
        if (s.command == Command::Solve2d || s.solver.grid == GridChoice::Planar || s.command == Command::Compare)
            && s.params.n() != 2
        {
            return Err(ScenarioError::Invalid("the planar solver is two-dimensional; set n = 2".into()));
        }
        let mut settings = s.solver.clone();
        if s.command == Command::Compare {
            settings.grid = GridChoice::Planar;
        }
        settings.intervals()?;
    }
    if s.command == Command::Harnack && s.probes.is_empty() {
        return Err(ScenarioError::MissingKey("probes".into()));
    }
    if s.command == Command::Chain && s.constants.x0.len() != s.constants.y_hat.len() {
        return Err(ScenarioError::Invalid("x0 and y_hat need the same number of coordinates".into()));
    }
    if s.barrier.samples < 2 {
        return Err(lk.bad("samples", "need at least 2 samples per axis"));
    }
    Ok(())
}
