//! Scenario files: TOML documents describing a system, its bath, the initial
//! state, integrator settings and what to record.
//!
//! Parsing is done on the raw `toml::Table` so that every problem can be
//! reported with its dotted field path and source line, and so that sweeps
//! can patch fields before validation.

use std::fmt;
use std::path::{Path, PathBuf};

use dqm_core::{
    build_particle, build_two_level, caldeira_leggett_friction, gibbs_state, BathModel,
    CMatrix, DensityMatrix, EntropyCurve, Flow, HermitianOperator, IntegratorConfig, Method,
    PhysicalConstants, Potential, SystemSpec, TabulatedCurve, C64,
};
use toml::{Table, Value};

/// One validation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.path, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemConfig {
    TwoLevel {
        omega: f64,
    },
    Particle {
        mass: f64,
        potential: Potential,
        basis_dim: usize,
        basis_omega: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Friction {
    Zeta(f64),
    /// Two-level spontaneous-emission rate.
    Gamma0(f64),
    /// Particle damping rate, `ζ = 2γm`.
    Gamma(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BathConfig {
    pub curve: EntropyCurve,
    pub initial_energy: f64,
    pub friction: Friction,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Gibbs { temperature: Option<f64> },
    Populations(Vec<f64>),
    Matrix(CMatrix),
    DisplacedGibbs { temperature: Option<f64>, q0: f64, p0: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub observables: Vec<String>,
    pub correlations: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub constants: PhysicalConstants,
    pub system: SystemConfig,
    pub bath: BathConfig,
    pub initial: InitialState,
    pub integrator: IntegratorConfig,
    pub output: OutputConfig,
}

/// Finds the source line of a dotted field path (`section.key`), falling
/// back to the section header when the key is absent.
pub fn locate(text: &str, path: &str) -> Option<usize> {
    let mut parts = path.splitn(2, '.');
    let first = parts.next()?;
    let rest = parts.next();
    let key_line = |key: &str, line: &str| {
        let t = line.trim_start();
        t.strip_prefix(key)
            .is_some_and(|r| r.trim_start().starts_with('=') || r.starts_with('.'))
            || t.strip_prefix(&format!("\"{key}\""))
                .is_some_and(|r| r.trim_start().starts_with('='))
    };
    let header = format!("[{first}]");
    let mut in_section = false;
    let mut section_line = None;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            in_section = t == header;
            if in_section {
                section_line = Some(i + 1);
            }
            continue;
        }
        match rest {
            None if section_line.is_none() && key_line(first, line) => return Some(i + 1),
            Some(key) if in_section => {
                let key = key.split('.').next().unwrap_or(key);
                if key_line(key, line) {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    section_line
}

struct Checker<'a> {
    text: &'a str,
    base_dir: &'a Path,
    diags: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn push(&mut self, path: &str, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            path: path.to_string(),
            line: locate(self.text, path),
            message: message.into(),
        });
    }

    fn section<'t>(&mut self, root: &'t Table, name: &str, required: bool) -> Option<&'t Table> {
        match root.get(name) {
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.push(name, "must be a table");
                None
            }
            None => {
                if required {
                    self.push(name, format!("missing required [{name}] block"));
                }
                None
            }
        }
    }

    fn number(&mut self, t: &Table, section: &str, key: &str) -> Option<f64> {
        let path = format!("{section}.{key}");
        match t.get(key) {
            Some(Value::Float(x)) => Some(*x),
            Some(Value::Integer(i)) => Some(*i as f64),
            Some(_) => {
                self.push(&path, "must be a number");
                None
            }
            None => None,
        }
    }

    fn required_number(&mut self, t: &Table, section: &str, key: &str) -> Option<f64> {
        let v = self.number(t, section, key);
        if v.is_none() && !t.contains_key(key) {
            self.push(&format!("{section}.{key}"), "missing required field");
        }
        v
    }

    fn positive(&mut self, t: &Table, section: &str, key: &str, required: bool) -> Option<f64> {
        let v = if required {
            self.required_number(t, section, key)
        } else {
            self.number(t, section, key)
        }?;
        if v > 0.0 && v.is_finite() {
            Some(v)
        } else {
            self.push(&format!("{section}.{key}"), format!("must be positive, got {v}"));
            None
        }
    }

    fn string<'t>(&mut self, t: &'t Table, section: &str, key: &str) -> Option<&'t str> {
        match t.get(key) {
            Some(Value::String(s)) => Some(s),
            Some(_) => {
                self.push(&format!("{section}.{key}"), "must be a string");
                None
            }
            None => {
                self.push(&format!("{section}.{key}"), "missing required field");
                None
            }
        }
    }

    fn numbers(&mut self, t: &Table, section: &str, key: &str) -> Option<Vec<f64>> {
        let path = format!("{section}.{key}");
        let Some(Value::Array(items)) = t.get(key) else {
            self.push(&path, "must be an array of numbers");
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            match item {
                Value::Float(x) => out.push(*x),
                Value::Integer(i) => out.push(*i as f64),
                _ => {
                    self.push(&path, "must be an array of numbers");
                    return None;
                }
            }
        }
        Some(out)
    }

    fn file(&mut self, t: &Table, section: &str, key: &str) -> Option<PathBuf> {
        let name = self.string(t, section, key)?;
        let path = self.base_dir.join(name);
        if path.is_file() {
            Some(path)
        } else {
            self.push(
                &format!("{section}.{key}"),
                format!("referenced file {} does not exist", path.display()),
            );
            None
        }
    }
}

pub const TWO_LEVEL_OBSERVABLES: &[&str] = &["sigma1", "sigma2", "sigma3", "H", "excited"];
pub const PARTICLE_OBSERVABLES: &[&str] = &["Q", "P", "QQ", "PP", "PQ+QP", "H"];

/// Validates a parsed document. `base_dir` resolves relative file references.
pub fn check(doc: &Table, text: &str, base_dir: &Path) -> Result<Scenario, Vec<Diagnostic>> {
    let mut c = Checker {
        text,
        base_dir,
        diags: Vec::new(),
    };

    let name = match doc.get("name") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            c.push("name", "must be a string");
            String::new()
        }
        None => "scenario".to_string(),
    };
    let constants = match doc.get("units") {
        Some(Value::String(u)) if u == "natural" => Some(PhysicalConstants::default()),
        Some(Value::String(u)) if u == "si" => Some(PhysicalConstants::si()),
        Some(_) => {
            c.push("units", "must be \"natural\" or \"si\"");
            None
        }
        None => {
            c.push("units", "missing required field (\"natural\" or \"si\")");
            None
        }
    };

    let system = c.section(doc, "system", true).and_then(|t| check_system(&mut c, t));
    let bath = c.section(doc, "bath", true).and_then(|t| check_bath(&mut c, t, system.as_ref()));
    let initial = c
        .section(doc, "initial_state", true)
        .and_then(|t| check_initial(&mut c, t, system.as_ref()));
    let integrator = c
        .section(doc, "integrator", true)
        .and_then(|t| check_integrator(&mut c, t));
    let output = match c.section(doc, "output", false) {
        Some(t) => check_output(&mut c, t, system.as_ref()),
        None => Some(OutputConfig {
            observables: Vec::new(),
            correlations: Vec::new(),
        }),
    };

    if let (Some(system), Some(bath)) = (&system, &bath) {
        if let Some(initial) = &initial {
            check_dimensions(&mut c, system, initial);
        }
        check_bath_domain(&mut c, bath);
    }

    match (system, bath, initial, integrator, output, constants) {
        (Some(system), Some(bath), Some(initial), Some(integrator), Some(output), Some(constants))
            if c.diags.is_empty() =>
        {
            Ok(Scenario {
                name,
                constants,
                system,
                bath,
                initial,
                integrator,
                output,
            })
        }
        _ => Err(c.diags),
    }
}

fn check_system(c: &mut Checker, t: &Table) -> Option<SystemConfig> {
    match c.string(t, "system", "model")? {
        "two_level" => {
            let omega = c.positive(t, "system", "omega", true)?;
            Some(SystemConfig::TwoLevel { omega })
        }
        "particle" => {
            let mass = c.positive(t, "system", "mass", true);
            let basis_dim = match t.get("basis_dim") {
                Some(Value::Integer(n)) if (4..=64).contains(n) => Some(*n as usize),
                Some(_) => {
                    c.push("system.basis_dim", "must be an integer in [4, 64]");
                    None
                }
                None => {
                    c.push("system.basis_dim", "missing required field");
                    None
                }
            };
            let potential = match t.get("potential") {
                Some(Value::String(s)) if s == "harmonic" => {
                    let omega = c.positive(t, "system", "omega", true);
                    match (mass, omega) {
                        (Some(m), Some(w)) => Some(Potential::harmonic(m, w)),
                        _ => None,
                    }
                }
                Some(Value::String(s)) if s == "free" => Some(Potential::free()),
                Some(Value::Array(_)) => {
                    let coeffs = c.numbers(t, "system", "potential")?;
                    match Potential::new(coeffs) {
                        Ok(p) => Some(p),
                        Err(e) => {
                            c.push("system.potential", e.to_string());
                            None
                        }
                    }
                }
                Some(_) => {
                    c.push(
                        "system.potential",
                        "must be \"harmonic\", \"free\" or an array of up to 5 coefficients",
                    );
                    None
                }
                None => {
                    c.push("system.potential", "missing required field");
                    None
                }
            };
            let basis_omega = match t.get("basis_omega") {
                Some(_) => c.positive(t, "system", "basis_omega", false),
                None => match t.get("omega") {
                    Some(_) => c.positive(t, "system", "omega", false),
                    None => {
                        c.push("system.basis_omega", "missing required field");
                        None
                    }
                },
            };
            Some(SystemConfig::Particle {
                mass: mass?,
                potential: potential?,
                basis_dim: basis_dim?,
                basis_omega: basis_omega?,
            })
        }
        other => {
            c.push(
                "system.model",
                format!("unknown model \"{other}\" (expected \"two_level\" or \"particle\")"),
            );
            None
        }
    }
}

fn check_bath(c: &mut Checker, t: &Table, system: Option<&SystemConfig>) -> Option<BathConfig> {
    let curve = match c.string(t, "bath", "curve") {
        Some("constant") => c
            .positive(t, "bath", "temperature", true)
            .map(|temp| EntropyCurve::ConstantTemperature { temperature: temp }),
        Some("logarithmic") => c
            .positive(t, "bath", "heat_capacity", true)
            .map(|cap| EntropyCurve::Logarithmic { heat_capacity: cap }),
        Some("table") => {
            let path = c.file(t, "bath", "file");
            path.and_then(|p| match std::fs::read_to_string(&p) {
                Ok(s) => match s.parse::<TabulatedCurve>() {
                    Ok(table) => Some(EntropyCurve::Tabulated(table)),
                    Err(e) => {
                        c.push("bath.file", format!("{}: {e}", p.display()));
                        None
                    }
                },
                Err(e) => {
                    c.push("bath.file", format!("cannot read {}: {e}", p.display()));
                    None
                }
            })
        }
        Some(other) => {
            c.push(
                "bath.curve",
                format!("unknown curve \"{other}\" (expected \"constant\", \"logarithmic\" or \"table\")"),
            );
            None
        }
        None => None,
    };
    let initial_energy = match t.get("initial_energy") {
        Some(_) => c.number(t, "bath", "initial_energy"),
        None => Some(0.0),
    };

    let given: Vec<&str> = ["zeta", "gamma0", "gamma"]
        .into_iter()
        .filter(|k| t.contains_key(*k))
        .collect();
    let friction = match given.as_slice() {
        [] => {
            c.push("bath.zeta", "missing friction: give one of zeta, gamma0 (two_level) or gamma (particle)");
            None
        }
        [key] => {
            let v = c.number(t, "bath", key);
            match v {
                Some(v) if v < 0.0 => {
                    c.push(
                        &format!("bath.{key}"),
                        format!("must be non-negative: the friction matrix must be PSD (zeta ≥ 0), got {v}"),
                    );
                    None
                }
                Some(v) => match (*key, system) {
                    ("zeta", _) => Some(Friction::Zeta(v)),
                    ("gamma0", Some(SystemConfig::Particle { .. })) => {
                        c.push("bath.gamma0", "only applies to the two_level model; use zeta or gamma");
                        None
                    }
                    ("gamma", Some(SystemConfig::TwoLevel { .. })) => {
                        c.push("bath.gamma", "only applies to the particle model; use zeta or gamma0");
                        None
                    }
                    ("gamma0", _) => Some(Friction::Gamma0(v)),
                    _ => Some(Friction::Gamma(v)),
                },
                None => None,
            }
        }
        _ => {
            c.push(
                &format!("bath.{}", given[1]),
                format!("conflicting friction fields: {}", given.join(", ")),
            );
            None
        }
    };
    Some(BathConfig {
        curve: curve?,
        initial_energy: initial_energy?,
        friction: friction?,
    })
}

fn check_initial(c: &mut Checker, t: &Table, system: Option<&SystemConfig>) -> Option<InitialState> {
    let temperature = |c: &mut Checker| match t.get("temperature") {
        Some(_) => c.positive(t, "initial_state", "temperature", false).map(Some),
        None => Some(None),
    };
    match c.string(t, "initial_state", "kind")? {
        "gibbs" => Some(InitialState::Gibbs {
            temperature: temperature(c)?,
        }),
        "populations" => {
            let p = c.numbers(t, "initial_state", "populations")?;
            let sum: f64 = p.iter().sum();
            if p.iter().any(|x| *x < 0.0) || (sum - 1.0).abs() > 1e-12 {
                c.push(
                    "initial_state.populations",
                    format!("must be non-negative and sum to 1 (sum = {sum})"),
                );
                return None;
            }
            Some(InitialState::Populations(p))
        }
        "matrix_file" => {
            let path = c.file(t, "initial_state", "file")?;
            match std::fs::read_to_string(&path).map_err(|e| e.to_string()).and_then(|s| parse_matrix(&s)) {
                Ok(m) => Some(InitialState::Matrix(m)),
                Err(e) => {
                    c.push("initial_state.file", format!("{}: {e}", path.display()));
                    None
                }
            }
        }
        "displaced_gibbs" => {
            if matches!(system, Some(SystemConfig::TwoLevel { .. })) {
                c.push("initial_state.kind", "displaced_gibbs needs the particle model");
                return None;
            }
            let temperature = temperature(c)?;
            let q0 = c.number(t, "initial_state", "q0").unwrap_or(0.0);
            let p0 = c.number(t, "initial_state", "p0").unwrap_or(0.0);
            Some(InitialState::DisplacedGibbs { temperature, q0, p0 })
        }
        other => {
            c.push(
                "initial_state.kind",
                format!(
                    "unknown kind \"{other}\" (expected gibbs, populations, matrix_file or displaced_gibbs)"
                ),
            );
            None
        }
    }
}

/// Rows of `re im re im …`, one matrix row per line; `#` starts a comment.
pub fn parse_matrix(text: &str) -> Result<CMatrix, String> {
    let mut rows: Vec<Vec<C64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums = line
            .split(|ch: char| ch.is_whitespace() || ch == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1)))
            .collect::<Result<Vec<f64>, _>>()?;
        if nums.len() % 2 != 0 {
            return Err(format!("line {}: expected re/im pairs", i + 1));
        }
        rows.push(nums.chunks(2).map(|p| C64::new(p[0], p[1])).collect());
    }
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err("matrix must be square and non-empty".into());
    }
    Ok(CMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn check_integrator(c: &mut Checker, t: &Table) -> Option<IntegratorConfig> {
    let t_end = c.positive(t, "integrator", "t_end", true);
    let method = match t.get("method") {
        None => Some("rk4"),
        Some(Value::String(s)) => Some(s.as_str()),
        Some(_) => {
            c.push("integrator.method", "must be \"rk4\" or \"rk45\"");
            None
        }
    };
    let method = match method? {
        "rk4" => c
            .positive(t, "integrator", "dt", true)
            .map(|dt| Method::Rk4 { dt }),
        "rk45" => {
            let rtol = c.positive(t, "integrator", "rtol", true);
            let atol = c.positive(t, "integrator", "atol", true);
            let dt_initial = match t.get("dt") {
                Some(_) => c.positive(t, "integrator", "dt", false),
                None => Some(1e-3),
            };
            Some(Method::Rk45 {
                rtol: rtol?,
                atol: atol?,
                dt_initial: dt_initial?,
            })
        }
        other => {
            c.push(
                "integrator.method",
                format!("unknown method \"{other}\" (expected \"rk4\" or \"rk45\")"),
            );
            None
        }
    };
    let mut cfg = IntegratorConfig::rk4(1e-3, t_end.unwrap_or(1.0));
    cfg.method = method?;
    if t.contains_key("p_floor") {
        cfg.p_floor = c.number(t, "integrator", "p_floor")?;
    }
    if t.contains_key("projection_tol") {
        cfg.projection_tol = c.number(t, "integrator", "projection_tol")?;
    }
    match t.get("monitor_stride") {
        Some(Value::Integer(n)) if *n >= 1 => cfg.monitor_stride = *n as usize,
        Some(_) => {
            c.push("integrator.monitor_stride", "must be a positive integer");
            return None;
        }
        None => {}
    }
    let t_end = t_end?;
    if let Method::Rk4 { dt } = cfg.method {
        if dt > t_end {
            c.push("integrator.dt", format!("step {dt} exceeds t_end = {t_end}"));
            return None;
        }
    }
    if let Err(e) = cfg.validate() {
        let field = match &e {
            dqm_core::Error::InvalidParameter { name, .. } => *name,
            _ => "method",
        };
        c.push(&format!("integrator.{field}"), e.to_string());
        return None;
    }
    Some(cfg)
}

fn check_output(c: &mut Checker, t: &Table, system: Option<&SystemConfig>) -> Option<OutputConfig> {
    let allowed = match system {
        Some(SystemConfig::TwoLevel { .. }) => TWO_LEVEL_OBSERVABLES,
        Some(SystemConfig::Particle { .. }) => PARTICLE_OBSERVABLES,
        None => return None,
    };
    let names = |c: &mut Checker, value: &Value, path: &str| -> Vec<String> {
        let mut out = Vec::new();
        let items: &[Value] = match value {
            Value::Array(items) => items,
            _ => {
                c.push(path, "must be an array of observable names");
                return out;
            }
        };
        for item in items {
            match item {
                Value::String(s) if allowed.contains(&s.as_str()) => out.push(s.clone()),
                other => {
                    c.push(
                        path,
                        format!("unknown observable {other} (available: {})", allowed.join(", ")),
                    );
                }
            }
        }
        out
    };
    let observables = t
        .get("observables")
        .map(|v| names(c, v, "output.observables"))
        .unwrap_or_default();
    let mut correlations = Vec::new();
    if let Some(v) = t.get("correlations") {
        match v {
            Value::Array(pairs) => {
                for pair in pairs {
                    let got = names(c, pair, "output.correlations");
                    if got.len() == 2 {
                        correlations.push((got[0].clone(), got[1].clone()));
                    } else if matches!(pair, Value::Array(_)) {
                        c.push("output.correlations", "each entry must be a pair [A, B]");
                    }
                }
            }
            _ => {
                c.push("output.correlations", "must be an array of [A, B] pairs");
            }
        }
    }
    Some(OutputConfig {
        observables,
        correlations,
    })
}

fn check_dimensions(c: &mut Checker, system: &SystemConfig, initial: &InitialState) {
    let dim = match system {
        SystemConfig::TwoLevel { .. } => 2,
        SystemConfig::Particle { basis_dim, .. } => *basis_dim,
    };
    let found = match initial {
        InitialState::Populations(p) => p.len(),
        InitialState::Matrix(m) => m.nrows(),
        _ => return,
    };
    if found != dim {
        let path = match initial {
            InitialState::Populations(_) => "initial_state.populations",
            _ => "initial_state.file",
        };
        c.push(path, format!("dimension {found} does not match the system dimension {dim}"));
    }
}

fn check_bath_domain(c: &mut Checker, bath: &BathConfig) {
    let model = BathModel::new(bath.curve.clone());
    let state = dqm_core::BathState::new(bath.initial_energy);
    if let Err(e) = dqm_core::temperature(&model, &state) {
        c.push("bath.initial_energy", e.to_string());
    }
}

/// Reads, parses and validates a scenario file.
pub fn load(path: &Path) -> Result<Scenario, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse(&text, base)
}

/// Parses and validates scenario text.
pub fn parse(text: &str, base_dir: &Path) -> Result<Scenario, LoadError> {
    let doc = parse_table(text)?;
    check(&doc, text, base_dir).map_err(LoadError::Invalid)
}

pub fn parse_table(text: &str) -> Result<Table, LoadError> {
    text.parse::<Table>().map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].lines().count().max(1));
        LoadError::Invalid(vec![Diagnostic {
            path: "(document)".into(),
            line,
            message: e.message().to_string(),
        }])
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadError {
    Io(String),
    Invalid(Vec<Diagnostic>),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Io(msg) => write!(f, "{msg}"),
            LoadError::Invalid(diags) => {
                for (i, d) in diags.iter().enumerate() {
                    if i > 0 {
                        writeln!(f)?;
                    }
                    write!(f, "{d}")?;
                }
                Ok(())
            }
        }
    }
}

/// Everything needed to integrate a scenario.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: SystemSpec,
    pub initial: DensityMatrix,
    pub observables: Vec<(String, HermitianOperator)>,
    pub correlations: Vec<(String, HermitianOperator, HermitianOperator)>,
    /// Population relaxation rate of the two-level model, when defined.
    pub two_level_rate: Option<f64>,
    /// Particle mass, for moment identities.
    pub mass: Option<f64>,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        match &self.system {
            SystemConfig::TwoLevel { .. } => 2,
            SystemConfig::Particle { basis_dim, .. } => *basis_dim,
        }
    }

    pub fn config(&self, flow: Flow) -> IntegratorConfig {
        self.integrator.with_flow(flow)
    }

    /// Builds the model, the initial state and the tracked operators.
    pub fn prepare(&self) -> dqm_core::Result<Prepared> {
        let c = self.constants;
        let bath = BathModel::new(self.bath.curve.clone());
        let t0 = dqm_core::temperature(&bath, &dqm_core::BathState::new(self.bath.initial_energy))?;
        let (spec, lookup, rate, mass): (SystemSpec, Box<dyn Fn(&str) -> Option<HermitianOperator>>, _, _) =
            match &self.system {
                SystemConfig::TwoLevel { omega } => {
                    let gamma0 = match self.bath.friction {
                        Friction::Gamma0(g) => g,
                        Friction::Zeta(z) => 4.0 * omega * z / c.hbar(),
                        Friction::Gamma(_) => unreachable!("rejected during validation"),
                    };
                    let model = build_two_level(*omega, gamma0, t0, c)?;
                    let spec = model.system_spec_with(bath)?;
                    let rate = model.relaxation_rate();
                    (spec, Box::new(move |n: &str| model.observable(n)), Some(rate), None)
                }
                SystemConfig::Particle {
                    mass,
                    potential,
                    basis_dim,
                    basis_omega,
                } => {
                    let model = build_particle(*mass, potential.clone(), *basis_dim, *basis_omega, c)?;
                    let zeta = match self.bath.friction {
                        Friction::Zeta(z) => z,
                        Friction::Gamma(g) => caldeira_leggett_friction(g, *mass),
                        Friction::Gamma0(_) => unreachable!("rejected during validation"),
                    };
                    let spec = model.system_spec(zeta, bath)?;
                    let m = *mass;
                    (spec, Box::new(move |n: &str| model.observable(n)), None, Some(m))
                }
            };
        let initial = match &self.initial {
            InitialState::Gibbs { temperature } => {
                gibbs_state(spec.hamiltonian(), temperature.unwrap_or(t0), &c)?
            }
            InitialState::Populations(p) => DensityMatrix::from_populations(p)?,
            InitialState::Matrix(m) => DensityMatrix::new(m.clone())?,
            InitialState::DisplacedGibbs { temperature, q0, p0 } => {
                let SystemConfig::Particle {
                    mass,
                    potential,
                    basis_dim,
                    basis_omega,
                } = &self.system
                else {
                    unreachable!("rejected during validation")
                };
                let model = build_particle(*mass, potential.clone(), *basis_dim, *basis_omega, c)?;
                let g = gibbs_state(spec.hamiltonian(), temperature.unwrap_or(t0), &c)?;
                model.displaced(&g, *q0, *p0)?
            }
        };
        let op = |n: &str| lookup(n).expect("names checked during validation");
        let observables = self
            .output
            .observables
            .iter()
            .map(|n| (n.clone(), op(n)))
            .collect();
        let correlations = self
            .output
            .correlations
            .iter()
            .map(|(a, b)| (format!("<<{a};{b}>>"), op(a), op(b)))
            .collect();
        Ok(Prepared {
            spec,
            initial,
            observables,
            correlations,
            two_level_rate: rate,
            mass,
        })
    }
}

/// Sets a dotted path (`bath.temperature`) in a document.
pub fn apply_override(doc: &mut Table, path: &str, value: Value) -> Result<(), String> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().ok_or("empty path")?;
    let mut table = doc;
    for part in parts {
        table = match table
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
        {
            Value::Table(t) => t,
            _ => return Err(format!("{path}: {part} is not a table")),
        };
    }
    table.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
name = "t"
units = "natural"

[system]
model = "two_level"
omega = 1.0

[bath]
curve = "constant"
temperature = 1.0
gamma0 = 0.1

[initial_state]
kind = "populations"
populations = [0.1, 0.9]

[integrator]
dt = 0.01
t_end = 1.0
"#;

    #[test]
    fn basic_scenario_validates() {
        let s = parse(BASIC, Path::new(".")).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.bath.friction, Friction::Gamma0(0.1));
    }

    #[test]
    fn locate_finds_keys_within_sections() {
        assert_eq!(locate(BASIC, "bath.gamma0"), Some(12));
        assert_eq!(locate(BASIC, "units"), Some(3));
        assert_eq!(locate(BASIC, "system"), Some(5));
        assert_eq!(locate(BASIC, "output.observables"), None);
    }

    #[test]
    fn negative_friction_names_field_and_psd() {
        let text = BASIC.replace("gamma0 = 0.1", "zeta = -0.2");
        let LoadError::Invalid(d) = parse(&text, Path::new(".")).unwrap_err() else {
            panic!()
        };
        assert_eq!(d[0].path, "bath.zeta");
        assert_eq!(d[0].line, Some(12));
        assert!(d[0].message.contains("PSD"));
    }

    #[test]
    fn missing_bath_block_is_reported() {
        let start = BASIC.find("[bath]").unwrap();
        let end = BASIC.find("[initial_state]").unwrap();
        let text = format!("{}{}", &BASIC[..start], &BASIC[end..]);
        let LoadError::Invalid(d) = parse(&text, Path::new(".")).unwrap_err() else {
            panic!()
        };
        assert!(d.iter().any(|d| d.path == "bath" && d.message.contains("missing")));
    }

    #[test]
    fn several_problems_are_reported_together() {
        let text = BASIC
            .replace("omega = 1.0", "omega = -1.0")
            .replace("dt = 0.01", "dt = 0.0");
        let LoadError::Invalid(d) = parse(&text, Path::new(".")).unwrap_err() else {
            panic!()
        };
        let paths: Vec<&str> = d.iter().map(|d| d.path.as_str()).collect();
        assert!(paths.contains(&"system.omega"));
        assert!(paths.contains(&"integrator.dt"));
    }

    #[test]
    fn matrix_file_format() {
        let m = parse_matrix("# rho\n0.5 0  0.1 0.2\n0.1 -0.2  0.5 0\n").unwrap();
        assert_eq!(m[(0, 1)], C64::new(0.1, 0.2));
        assert!(parse_matrix("1 0 0").is_err());
    }

    #[test]
    fn overrides_patch_nested_fields() {
        let mut doc = parse_table(BASIC).unwrap();
        apply_override(&mut doc, "bath.temperature", Value::Float(2.0)).unwrap();
        let s = check(&doc, BASIC, Path::new(".")).unwrap();
        assert_eq!(s.bath.curve, EntropyCurve::ConstantTemperature { temperature: 2.0 });
    }
}
