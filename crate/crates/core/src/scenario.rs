//! Declarative scenario files, built-in presets and the run pipeline behind
//! the command-line tool.
//!
//! A scenario is plain `key = value` text; `#` starts a comment. Values
//! that need parameters use a keyword followed by `name=value` pairs:
//!
//! ```text
//! name       = fig2
//! solver     = algo1
//! mu         = uniform
//! cost       = power p=2.2
//! congestion = log
//! kernel     = abs_power a=2 b=1.5 c=1 d=0 q=1.2
//! eps        = 1
//! n_cells    = 512
//! ```
//!
//! Every key is listed in [`KEYS`]. Parsing reports all problems at once,
//! each tied to its line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::best_reply::{contraction_certificate, iterate_best_reply, BestReplyOptions, ContractionCertificate};
use crate::error::{ConfigIssue, Error, Result};
use crate::game::{CongestionSpec, CostModel, ExternalityModel, InteractionKernel, KernelExpr, QuadraticBase};
use crate::measures::{DiscreteMeasure, GridMeasure1D, Point};
use crate::ode1d::{algo1_solve, algo2_solve, IterationOptions};
use crate::transport::TransportMap1D;
use crate::verification::{certify, pairwise_distances, Certification, Distribution, EquilibriumResult, PlanMap};

/// Recognized keys, in the order [`emit_scenario`] writes them.
pub const KEYS: [&str; 20] = [
    "name",
    "dimension",
    "solver",
    "mu",
    "start",
    "cost",
    "congestion",
    "kernel",
    "eps",
    "v0",
    "n_cells",
    "n_atoms",
    "tol",
    "max_iter",
    "damping",
    "seed",
    "bins",
    "cert_threshold",
    "out_dir",
    "formats",
];

const REQUIRED: [&str; 4] = ["name", "solver", "mu", "cost"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Algo1,
    Algo2,
    BestReply,
}

impl SolverKind {
    fn keyword(self) -> &'static str {
        match self {
            SolverKind::Algo1 => "algo1",
            SolverKind::Algo2 => "algo2",
            SolverKind::BestReply => "best_reply",
        }
    }
}

/// Type distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MuSpec {
    Uniform,
    /// Piecewise-constant density on equal cells, normalized on use.
    Table(Vec<f64>),
    /// Equal-weight atoms.
    Atoms(Vec<Point>),
}

/// Initial iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StartSpec {
    /// Identity map, `ν₀ = μ` or uniform density, depending on the solver.
    Default,
    /// `T₀(x) = x^k`, `ν₀ ∝ y^k`, or atoms of `μ` moved by `x ↦ x^k`.
    Power(f64),
}

/// Which artifacts [`write_artifacts`] produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Formats {
    pub json: bool,
    pub csv: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub dimension: usize,
    pub solver: SolverKind,
    pub mu: MuSpec,
    pub start: StartSpec,
    pub cost: CostModel,
    pub congestion: Option<CongestionSpec>,
    pub kernel: Option<KernelExpr>,
    pub eps: f64,
    pub v0: Option<QuadraticBase>,
    pub n_cells: usize,
    pub n_atoms: usize,
    /// Solver default when unset.
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub damping: Option<f64>,
    pub seed: u64,
    /// Histogram resolution for particle density output.
    pub bins: usize,
    pub cert_threshold: f64,
    pub out_dir: Option<PathBuf>,
    pub formats: Formats,
}

impl ScenarioConfig {
    fn base(name: &str, solver: SolverKind, cost: CostModel) -> Self {
        Self {
            name: name.into(),
            dimension: 1,
            solver,
            mu: MuSpec::Uniform,
            start: StartSpec::Default,
            cost,
            congestion: None,
            kernel: None,
            eps: 1.0,
            v0: None,
            n_cells: 512,
            n_atoms: 4096,
            tol: None,
            max_iter: None,
            damping: None,
            seed: 0,
            bins: 64,
            cert_threshold: crate::verification::DEFAULT_THRESHOLD,
            out_dir: None,
            formats: Formats { json: true, csv: true },
        }
    }

    pub fn model(&self) -> Result<ExternalityModel> {
        let kernel = self.kernel.map(|k| InteractionKernel::new(k, self.eps)).transpose()?;
        Ok(ExternalityModel {
            dim: self.dimension,
            congestion: self.congestion,
            kernel,
            base: self.v0,
        })
    }

    /// Applies command-line overrides. `grid` sets the number of cells.
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if o.tol.is_some() {
            self.tol = o.tol;
        }
        if o.max_iter.is_some() {
            self.max_iter = o.max_iter;
        }
        if o.damping.is_some() {
            self.damping = o.damping;
        }
        if let Some(g) = o.grid {
            self.n_cells = g;
        }
        let issues = validate(self);
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(issues))
        }
    }
}

/// Command-line overrides of config values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub damping: Option<f64>,
    pub grid: Option<usize>,
}

fn issue(line: Option<usize>, field: &str, message: impl Into<String>) -> ConfigIssue {
    ConfigIssue {
        line,
        field: field.into(),
        message: message.into(),
    }
}

/// Splits `keyword a=1 b=2` into the keyword and its parameters.
fn keyword_params(value: &str) -> std::result::Result<(String, BTreeMap<String, String>), String> {
    let mut parts = value.split_whitespace();
    let kw = parts.next().ok_or("missing value")?.to_string();
    let mut params = BTreeMap::new();
    for p in parts {
        let (k, v) = p.split_once('=').ok_or_else(|| format!("expected name=value, got `{p}`"))?;
        if params.insert(k.to_string(), v.to_string()).is_some() {
            return Err(format!("parameter `{k}` given twice"));
        }
    }
    Ok((kw, params))
}

fn num(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn num_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(num).collect()
}

fn pair(s: &str) -> std::result::Result<[f64; 2], String> {
    match num_list(s)?.as_slice() {
        [a] => Ok([*a, 0.0]),
        [a, b] => Ok([*a, *b]),
        _ => Err(format!("`{s}` needs one or two components")),
    }
}

fn take(params: &mut BTreeMap<String, String>, key: &str) -> std::result::Result<f64, String> {
    num(&params.remove(key).ok_or_else(|| format!("missing parameter `{key}`"))?)
}

fn no_leftovers(params: &BTreeMap<String, String>) -> std::result::Result<(), String> {
    match params.keys().next() {
        Some(k) => Err(format!("unknown parameter `{k}`")),
        None => Ok(()),
    }
}

fn parse_mu(v: &str) -> std::result::Result<MuSpec, String> {
    let v = v.trim();
    let (kw, rest) = v.split_once(char::is_whitespace).unwrap_or((v, ""));
    match kw {
        "uniform" if rest.trim().is_empty() => Ok(MuSpec::Uniform),
        "table" => {
            let t = num_list(rest.trim())?;
            if t.iter().any(|d| *d < 0.0) || t.iter().sum::<f64>() <= 0.0 {
                return Err("table needs non-negative values with positive sum".into());
            }
            Ok(MuSpec::Table(t))
        }
        "atoms" => {
            let pts = rest.trim().split(';').map(pair).collect::<std::result::Result<Vec<_>, _>>()?;
            if pts.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
                return Err("atoms must lie in [0, 1]".into());
            }
            Ok(MuSpec::Atoms(pts))
        }
        _ => Err(format!("expected `uniform`, `table v1,v2,…` or `atoms x;y;…`, got `{v}`")),
    }
}

fn parse_start(v: &str) -> std::result::Result<StartSpec, String> {
    let (kw, mut p) = keyword_params(v)?;
    let s = match kw.as_str() {
        "default" => StartSpec::Default,
        "power" => {
            let k = take(&mut p, "k")?;
            if k <= 0.0 {
                return Err("k must be positive".into());
            }
            StartSpec::Power(k)
        }
        _ => return Err(format!("expected `default` or `power k=…`, got `{kw}`")),
    };
    no_leftovers(&p)?;
    Ok(s)
}

fn parse_cost(v: &str) -> std::result::Result<CostModel, String> {
    let (kw, mut p) = keyword_params(v)?;
    let c = match kw.as_str() {
        "quadratic" => CostModel::Quadratic,
        "power" => CostModel::Power { p: take(&mut p, "p")? },
        "bilinear" => CostModel::Bilinear {
            coef: p.remove("coef").map(|s| num(&s)).transpose()?.unwrap_or(-1.0),
        },
        _ => return Err(format!("unknown cost `{kw}`")),
    };
    no_leftovers(&p)?;
    c.validate().map_err(|e| e.to_string())?;
    Ok(c)
}

fn parse_congestion(v: &str) -> std::result::Result<Option<CongestionSpec>, String> {
    let (kw, mut p) = keyword_params(v)?;
    let c = match kw.as_str() {
        "none" => None,
        "log" => Some(CongestionSpec::Log),
        "power" => Some(CongestionSpec::Power { alpha: take(&mut p, "alpha")? }),
        _ => return Err(format!("unknown congestion `{kw}`")),
    };
    no_leftovers(&p)?;
    if let Some(c) = c {
        c.validate().map_err(|e| e.to_string())?;
    }
    Ok(c)
}

fn parse_kernel(v: &str) -> std::result::Result<Option<KernelExpr>, String> {
    let (kw, mut p) = keyword_params(v)?;
    let k = match kw.as_str() {
        "none" => None,
        "zero" => Some(KernelExpr::Zero),
        "constant" => Some(KernelExpr::Constant { a: take(&mut p, "a")? }),
        "bilinear" => Some(KernelExpr::Bilinear { a: take(&mut p, "a")? }),
        "abs_power" => {
            let d = pair(&p.remove("d").unwrap_or_else(|| "0".into()))?;
            Some(KernelExpr::AbsPower {
                a: take(&mut p, "a")?,
                b: take(&mut p, "b")?,
                c: take(&mut p, "c")?,
                d,
                q: take(&mut p, "q")?,
            })
        }
        _ => return Err(format!("unknown kernel `{kw}`")),
    };
    no_leftovers(&p)?;
    if let Some(k) = k {
        k.validate().map_err(|e| e.to_string())?;
    }
    Ok(k)
}

fn parse_v0(v: &str) -> std::result::Result<Option<QuadraticBase>, String> {
    let (kw, mut p) = keyword_params(v)?;
    let b = match kw.as_str() {
        "none" => None,
        "quadratic" => {
            let a = pair(&p.remove("a").ok_or("missing parameter `a`")?)?;
            let center = pair(&p.remove("center").unwrap_or_else(|| "0".into()))?;
            if a.iter().any(|v| *v < 0.0) {
                return Err("coefficients `a` must be non-negative".into());
            }
            Some(QuadraticBase { a, center })
        }
        _ => return Err(format!("unknown base potential `{kw}`")),
    };
    no_leftovers(&p)?;
    Ok(b)
}

fn parse_formats(v: &str) -> std::result::Result<Formats, String> {
    let mut f = Formats { json: false, csv: false };
    for t in v.split(',').map(str::trim) {
        match t {
            "json" => f.json = true,
            "csv" => f.csv = true,
            _ => return Err(format!("unknown format `{t}`")),
        }
    }
    Ok(f)
}

fn positive_int(v: &str) -> std::result::Result<usize, String> {
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("`{v}` is not a positive integer")),
    }
}

fn positive(v: &str) -> std::result::Result<f64, String> {
    let x = num(v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("`{v}` must be positive"))
    }
}

/// Built-in scenarios by name.
pub fn presets() -> Vec<ScenarioConfig> {
    let abs = |a, b, c, d, q| KernelExpr::AbsPower { a, b, c, d: [d, 0.0], q };
    let mut out = Vec::new();

    let mut s = ScenarioConfig::base("trivial_log", SolverKind::Algo1, CostModel::Quadratic);
    s.congestion = Some(CongestionSpec::Log);
    out.push(s);

    let mut s = ScenarioConfig::base("trivial_power", SolverKind::Algo2, CostModel::Quadratic);
    s.congestion = Some(CongestionSpec::Power { alpha: 1.0 });
    out.push(s);

    let mut s = ScenarioConfig::base("closed_form_br", SolverKind::BestReply, CostModel::Quadratic);
    s.v0 = Some(QuadraticBase { a: [0.5, 0.0], center: [0.0, 0.0] });
    out.push(s);

    let mut s = ScenarioConfig::base("fig1", SolverKind::BestReply, CostModel::Quadratic);
    s.dimension = 2;
    s.n_atoms = 10_000;
    s.kernel = Some(KernelExpr::AbsPower { a: 1.0, b: 1.0, c: 1.0, d: [0.0, 0.0], q: 4.0 });
    s.eps = 0.1;
    s.v0 = Some(QuadraticBase { a: [1.0, 1.0], center: [0.6, 0.7] });
    out.push(s);

    let mut s = ScenarioConfig::base("fig2", SolverKind::Algo1, CostModel::Power { p: 2.2 });
    s.congestion = Some(CongestionSpec::Log);
    s.kernel = Some(abs(2.0, 1.5, 1.0, 0.0, 1.2));
    out.push(s);

    let mut s = ScenarioConfig::base("fig3", SolverKind::Algo2, CostModel::Power { p: 4.0 });
    s.congestion = Some(CongestionSpec::Power { alpha: 1.0 });
    s.kernel = Some(abs(3.0, 3.0, 2.0, 0.5, 2.0));
    out.push(s);

    let mut s = ScenarioConfig::base("fig3_nonsym", SolverKind::Algo2, CostModel::Power { p: 4.0 });
    s.congestion = Some(CongestionSpec::Power { alpha: 1.0 });
    s.kernel = Some(abs(10.0, 3.0, 2.0, 0.5, 2.0));
    out.push(s);

    let mut s = ScenarioConfig::base("uniqueness", SolverKind::Algo2, CostModel::Quadratic);
    s.congestion = Some(CongestionSpec::Power { alpha: 1.0 });
    s.kernel = Some(abs(3.0, 3.0, 2.0, 0.5, 2.0));
    s.eps = 0.1;
    out.push(s);

    let mut s = ScenarioConfig::base("variational", SolverKind::Algo2, CostModel::Quadratic);
    s.congestion = Some(CongestionSpec::Power { alpha: 1.0 });
    s.kernel = Some(abs(1.0, 1.0, 1.0, 0.0, 2.0));
    out.push(s);

    out
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    presets().into_iter().find(|p| p.name == name)
}

/// Parses scenario text, or a bare preset name.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let trimmed = text.trim();
    if !trimmed.is_empty() && !trimmed.contains('=') && !trimmed.contains('\n') {
        return preset(trimmed).ok_or_else(|| {
            Error::Config(vec![issue(None, "name", format!("no preset called `{trimmed}`"))])
        });
    }
    let mut issues = Vec::new();
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let mut cfg = ScenarioConfig::base("", SolverKind::Algo1, CostModel::Quadratic);
    for (i, raw) in text.lines().enumerate() {
        let line = Some(i + 1);
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            issues.push(issue(line, body, "expected `key = value`"));
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        let Some(key) = KEYS.iter().find(|known| **known == k) else {
            issues.push(issue(line, k, "unknown key"));
            continue;
        };
        if let Some(prev) = seen.insert(key, i + 1) {
            issues.push(issue(line, k, format!("already set on line {prev}")));
            continue;
        }
        let outcome: std::result::Result<(), String> = (|| {
            match *key {
                "name" => {
                    if v.is_empty() || v.chars().any(|c| !(c.is_ascii_alphanumeric() || c == '_' || c == '-')) {
                        return Err("use letters, digits, `_` and `-`".into());
                    }
                    cfg.name = v.into();
                }
                "dimension" => {
                    cfg.dimension = match v {
                        "1" => 1,
                        "2" => 2,
                        _ => return Err("must be 1 or 2".into()),
                    }
                }
                "solver" => {
                    cfg.solver = match v {
                        "algo1" => SolverKind::Algo1,
                        "algo2" => SolverKind::Algo2,
                        "best_reply" => SolverKind::BestReply,
                        _ => return Err(format!("unknown solver `{v}`; expected algo1, algo2 or best_reply")),
                    }
                }
                "mu" => cfg.mu = parse_mu(v)?,
                "start" => cfg.start = parse_start(v)?,
                "cost" => cfg.cost = parse_cost(v)?,
                "congestion" => cfg.congestion = parse_congestion(v)?,
                "kernel" => cfg.kernel = parse_kernel(v)?,
                "eps" => {
                    let e = num(v)?;
                    if e < 0.0 {
                        return Err("must be non-negative".into());
                    }
                    cfg.eps = e;
                }
                "v0" => cfg.v0 = parse_v0(v)?,
                "n_cells" => cfg.n_cells = positive_int(v)?,
                "n_atoms" => cfg.n_atoms = positive_int(v)?,
                "tol" => cfg.tol = Some(positive(v)?),
                "max_iter" => cfg.max_iter = Some(positive_int(v)?),
                "damping" => cfg.damping = Some(positive(v)?),
                "seed" => cfg.seed = v.parse().map_err(|_| format!("`{v}` is not an unsigned integer"))?,
                "bins" => cfg.bins = positive_int(v)?,
                "cert_threshold" => cfg.cert_threshold = positive(v)?,
                "out_dir" => cfg.out_dir = Some(PathBuf::from(v)),
                "formats" => cfg.formats = parse_formats(v)?,
                _ => unreachable!(),
            }
            Ok(())
        })();
        if let Err(m) = outcome {
            issues.push(issue(line, k, m));
        }
    }
    for r in REQUIRED {
        if !seen.contains_key(r) {
            issues.push(issue(None, r, "required key is missing"));
        }
    }
    if issues.is_empty() {
        issues = validate(&cfg)
            .into_iter()
            .map(|mut is| {
                is.line = seen.get(is.field.as_str()).copied();
                is
            })
            .collect();
    }
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(issues))
    }
}

/// Cross-field checks.
fn validate(c: &ScenarioConfig) -> Vec<ConfigIssue> {
    let mut out = Vec::new();
    let mut bad = |field: &str, m: String| out.push(issue(None, field, m));
    match (c.solver, c.congestion) {
        (SolverKind::Algo1, Some(CongestionSpec::Log)) | (SolverKind::Algo2, Some(CongestionSpec::Power { .. })) => {}
        (SolverKind::BestReply, None) => {}
        (SolverKind::Algo1, _) => bad("congestion", "algo1 needs `congestion = log`".into()),
        (SolverKind::Algo2, _) => bad("congestion", "algo2 needs `congestion = power alpha=…`".into()),
        (SolverKind::BestReply, Some(_)) => bad("congestion", "best_reply needs `congestion = none`".into()),
    }
    if c.solver == SolverKind::BestReply && c.cost != CostModel::Quadratic {
        bad("cost", "best_reply needs `cost = quadratic`".into());
    }
    if c.dimension == 2 && c.solver != SolverKind::BestReply {
        bad("dimension", format!("{} runs in one dimension only", c.solver.keyword()));
    }
    match &c.mu {
        MuSpec::Table(_) if c.dimension == 2 => bad("mu", "density tables are one-dimensional".into()),
        MuSpec::Atoms(a) if c.dimension == 1 && a.iter().any(|p| p[1] != 0.0) => {
            bad("mu", "one-dimensional atoms take a single coordinate".into())
        }
        _ => {}
    }
    if c.solver != SolverKind::BestReply && c.n_cells < 2 {
        bad("n_cells", "at least 2 cells".into());
    }
    if let Some(d) = c.damping {
        if d > 1.0 {
            bad("damping", "must lie in (0, 1]".into());
        }
    }
    if let Some(k) = c.kernel {
        if let Err(e) = InteractionKernel::new(k, c.eps) {
            bad("kernel", e.to_string());
        }
    }
    if !(c.formats.json || c.formats.csv) {
        bad("formats", "choose at least one of json, csv".into());
    }
    out
}

fn fmt_pair(p: [f64; 2], dim: usize) -> String {
    if dim == 1 {
        format!("{}", p[0])
    } else {
        format!("{},{}", p[0], p[1])
    }
}

/// Writes a config in the text format; `parse_scenario` reads it back
/// unchanged.
pub fn emit_scenario(c: &ScenarioConfig) -> String {
    let mut s = String::new();
    let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let _ = writeln!(s, "name = {}", c.name);
    let _ = writeln!(s, "dimension = {}", c.dimension);
    let _ = writeln!(s, "solver = {}", c.solver.keyword());
    let mu = match &c.mu {
        MuSpec::Uniform => "uniform".to_string(),
        MuSpec::Table(t) => format!("table {}", list(t)),
        MuSpec::Atoms(a) => format!(
            "atoms {}",
            a.iter().map(|p| fmt_pair(*p, c.dimension)).collect::<Vec<_>>().join(";")
        ),
    };
    let _ = writeln!(s, "mu = {mu}");
    let _ = match c.start {
        StartSpec::Default => writeln!(s, "start = default"),
        StartSpec::Power(k) => writeln!(s, "start = power k={k}"),
    };
    let _ = match c.cost {
        CostModel::Quadratic => writeln!(s, "cost = quadratic"),
        CostModel::Power { p } => writeln!(s, "cost = power p={p}"),
        CostModel::Bilinear { coef } => writeln!(s, "cost = bilinear coef={coef}"),
    };
    let _ = match c.congestion {
        None => writeln!(s, "congestion = none"),
        Some(CongestionSpec::Log) => writeln!(s, "congestion = log"),
        Some(CongestionSpec::Power { alpha }) => writeln!(s, "congestion = power alpha={alpha}"),
    };
    let _ = match c.kernel {
        None => writeln!(s, "kernel = none"),
        Some(KernelExpr::Zero) => writeln!(s, "kernel = zero"),
        Some(KernelExpr::Constant { a }) => writeln!(s, "kernel = constant a={a}"),
        Some(KernelExpr::Bilinear { a }) => writeln!(s, "kernel = bilinear a={a}"),
        Some(KernelExpr::AbsPower { a, b, c: cc, d, q }) => {
            writeln!(s, "kernel = abs_power a={a} b={b} c={cc} d={} q={q}", fmt_pair(d, 2))
        }
    };
    let _ = writeln!(s, "eps = {}", c.eps);
    let _ = match c.v0 {
        None => writeln!(s, "v0 = none"),
        Some(b) => writeln!(s, "v0 = quadratic a={} center={}", fmt_pair(b.a, 2), fmt_pair(b.center, 2)),
    };
    let _ = writeln!(s, "n_cells = {}", c.n_cells);
    let _ = writeln!(s, "n_atoms = {}", c.n_atoms);
    if let Some(t) = c.tol {
        let _ = writeln!(s, "tol = {t}");
    }
    if let Some(m) = c.max_iter {
        let _ = writeln!(s, "max_iter = {m}");
    }
    if let Some(d) = c.damping {
        let _ = writeln!(s, "damping = {d}");
    }
    let _ = writeln!(s, "seed = {}", c.seed);
    let _ = writeln!(s, "bins = {}", c.bins);
    let _ = writeln!(s, "cert_threshold = {}", c.cert_threshold);
    if let Some(d) = &c.out_dir {
        let _ = writeln!(s, "out_dir = {}", d.display());
    }
    let f: Vec<&str> = [(c.formats.json, "json"), (c.formats.csv, "csv")]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
    let _ = writeln!(s, "formats = {}", f.join(","));
    s
}

/// Reads a scenario from a preset name or a file path.
pub fn load_scenario(arg: &str) -> Result<ScenarioConfig> {
    if let Some(p) = preset(arg) {
        return Ok(p);
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(Error::Config(vec![issue(
            None,
            "scenario",
            format!("`{arg}` is neither a preset nor a readable file"),
        )]));
    }
    parse_scenario(&fs::read_to_string(path)?)
}

/// Type distribution on the solver's grid.
pub fn grid_mu(c: &ScenarioConfig) -> Result<GridMeasure1D> {
    let n = c.n_cells;
    match &c.mu {
        MuSpec::Uniform => Ok(GridMeasure1D::uniform(n)),
        MuSpec::Table(t) => {
            let k = t.len();
            GridMeasure1D::normalized(
                crate::measures::midpoints(n)
                    .iter()
                    .map(|y| t[((y * k as f64) as usize).min(k - 1)])
                    .collect(),
            )
        }
        MuSpec::Atoms(a) => DiscreteMeasure::equal_weights(1, a.clone())?.to_grid(n),
    }
}

/// Type distribution as particles. A uniform 2D distribution uses the
/// midpoint lattice when `n_atoms` is a perfect square and seeded random
/// atoms otherwise.
pub fn particle_mu(c: &ScenarioConfig) -> Result<DiscreteMeasure> {
    match (&c.mu, c.dimension) {
        (MuSpec::Atoms(a), d) => DiscreteMeasure::equal_weights(d, a.clone()),
        (_, 1) => Ok(grid_mu(c)?.quantize(c.n_atoms)),
        (_, _) => {
            let k = (c.n_atoms as f64).sqrt().round() as usize;
            if k * k == c.n_atoms {
                Ok(DiscreteMeasure::uniform_lattice_2d(k))
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
                DiscreteMeasure::equal_weights(2, (0..c.n_atoms).map(|_| [rng.gen(), rng.gen()]).collect())
            }
        }
    }
}

/// Sup of the type density, used by the contraction certificate.
fn mu_sup(c: &ScenarioConfig, mu: &DiscreteMeasure) -> f64 {
    match &c.mu {
        MuSpec::Uniform => 1.0,
        MuSpec::Table(t) => {
            let mean = t.iter().sum::<f64>() / t.len() as f64;
            t.iter().cloned().fold(0.0, f64::max) / mean
        }
        MuSpec::Atoms(_) => mu.bin_density(c.bins).into_iter().fold(0.0, f64::max),
    }
}

/// Everything one run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// The exact config text, with overrides applied.
    pub config: String,
    pub seed: u64,
    pub version: String,
    pub result: EquilibriumResult,
    pub certification: Certification,
    pub contraction: Option<ContractionCertificate>,
}

impl RunRecord {
    /// 0 certified, 2 converged but not certified, 3 not converged.
    pub fn exit_code(&self) -> i32 {
        match (self.result.converged, self.certification.passed) {
            (false, _) => 3,
            (true, true) => 0,
            (true, false) => 2,
        }
    }
}

/// Runs the configured solver and every applicable check.
pub fn solve_scenario(c: &ScenarioConfig) -> Result<RunRecord> {
    let issues = validate(c);
    if !issues.is_empty() {
        return Err(Error::Config(issues));
    }
    let model = c.model()?;
    let mut contraction = None;
    let result = match c.solver {
        SolverKind::Algo1 => {
            let mut o = IterationOptions::algo1_default();
            override_opts(&mut o, c);
            let mu = grid_mu(c)?;
            let start = match c.start {
                StartSpec::Default => None,
                StartSpec::Power(k) => Some(TransportMap1D::from_fn(c.n_cells, |x| x.powf(k))?),
            };
            algo1_solve(&c.cost, &model, &mu, &o, start)?
        }
        SolverKind::Algo2 => {
            let mut o = IterationOptions::algo2_default();
            override_opts(&mut o, c);
            let mu = grid_mu(c)?;
            let start = match c.start {
                StartSpec::Default => None,
                StartSpec::Power(k) => Some(GridMeasure1D::normalized(
                    crate::measures::midpoints(c.n_cells).iter().map(|y| y.powf(k)).collect(),
                )?),
            };
            algo2_solve(&c.cost, &model, &mu, &o, start)?
        }
        SolverKind::BestReply => {
            let mut o = BestReplyOptions::default();
            if let Some(t) = c.tol {
                o.tol = t;
            }
            if let Some(m) = c.max_iter {
                o.max_iter = m;
            }
            let mu = particle_mu(c)?;
            let nu0 = match c.start {
                StartSpec::Default => mu.clone(),
                StartSpec::Power(k) => DiscreteMeasure::new(
                    mu.dim(),
                    mu.atoms().iter().map(|p| [p[0].powf(k), p[1].powf(k)]).collect(),
                    mu.weights().to_vec(),
                )?,
            };
            if model.base.is_some() {
                contraction = Some(contraction_certificate(&model, mu_sup(c, &mu))?);
            }
            iterate_best_reply(&model, &mu, &nu0, &o)?
        }
    };
    let certification = certify(&result, &model, &c.cost, c.cert_threshold)?;
    Ok(RunRecord {
        config: emit_scenario(c),
        seed: c.seed,
        version: crate::VERSION.to_string(),
        result,
        certification,
        contraction,
    })
}

fn override_opts(o: &mut IterationOptions, c: &ScenarioConfig) {
    if let Some(t) = c.tol {
        o.tol = t;
    }
    if let Some(m) = c.max_iter {
        o.max_iter = m;
    }
    if let Some(d) = c.damping {
        o.damping = d;
    }
}

/// `y,nu` rows (1D) or `y1,y2,nu` rows on a `bins × bins` histogram (2D).
pub fn density_csv(r: &EquilibriumResult, bins: usize) -> String {
    let mut s = String::new();
    match &r.nu {
        Distribution::Grid(g) => {
            s.push_str("y,nu\n");
            for (y, d) in g.midpoints().iter().zip(g.density()) {
                let _ = writeln!(s, "{y},{d}");
            }
        }
        Distribution::Particles(p) => {
            let dens = p.bin_density(bins);
            let mids = crate::measures::midpoints(bins);
            if p.dim() == 1 {
                s.push_str("y,nu\n");
                for (y, d) in mids.iter().zip(&dens) {
                    let _ = writeln!(s, "{y},{d}");
                }
            } else {
                s.push_str("y1,y2,nu\n");
                for (i, y1) in mids.iter().enumerate() {
                    for (j, y2) in mids.iter().enumerate() {
                        let _ = writeln!(s, "{y1},{y2},{}", dens[i * bins + j]);
                    }
                }
            }
        }
    }
    s
}

/// `x,T` rows (1D) or `x1,x2,t1,t2` rows (2D).
pub fn map_csv(r: &EquilibriumResult) -> String {
    let mut s = String::new();
    match (&r.map, &r.mu) {
        (PlanMap::Grid(t), _) => {
            s.push_str("x,T\n");
            for (x, v) in t.nodes().iter().zip(t.values()) {
                let _ = writeln!(s, "{x},{v}");
            }
        }
        (PlanMap::Particles { actions }, Distribution::Particles(mu)) if mu.dim() == 1 => {
            s.push_str("x,T\n");
            for (x, y) in mu.atoms().iter().zip(actions) {
                let _ = writeln!(s, "{},{}", x[0], y[0]);
            }
        }
        (PlanMap::Particles { actions }, mu) => {
            s.push_str("x1,x2,t1,t2\n");
            if let Distribution::Particles(mu) = mu {
                for (x, y) in mu.atoms().iter().zip(actions) {
                    let _ = writeln!(s, "{},{},{},{}", x[0], x[1], y[0], y[1]);
                }
            }
        }
    }
    s
}

pub fn trace_csv(r: &EquilibriumResult) -> String {
    let mut s = String::from("iter,step\n");
    for (i, v) in r.trace.iter().enumerate() {
        let _ = writeln!(s, "{},{v}", i + 1);
    }
    s
}

/// `#` comment lines carrying the version, seed and full config, so every
/// CSV file identifies the run that produced it.
pub fn csv_preamble(record: &RunRecord) -> String {
    let mut s = format!("# cournot {}\n# seed = {}\n", record.version, record.seed);
    for line in record.config.lines() {
        let _ = writeln!(s, "# {line}");
    }
    s
}

/// Writes `<name>.result.json` and the three CSV files into `dir`. CSV
/// files start with the [`csv_preamble`].
pub fn write_artifacts(record: &RunRecord, c: &ScenarioConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |suffix: &str, body: String| -> Result<()> {
        let p = dir.join(format!("{}.{suffix}", c.name));
        fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    if c.formats.json {
        put("result.json", serde_json::to_string_pretty(record)? + "\n")?;
    }
    if c.formats.csv {
        let pre = csv_preamble(record);
        put("density.csv", pre.clone() + &density_csv(&record.result, c.bins))?;
        put("map.csv", pre.clone() + &map_csv(&record.result))?;
        put("trace.csv", pre + &trace_csv(&record.result))?;
    }
    Ok(written)
}

/// Solves, writes artifacts (also when the solver did not converge) and
/// returns the record with the files written. `dir` takes precedence over
/// the config's `out_dir`, which defaults to the working directory; the
/// choice of directory does not enter the artifacts.
pub fn run_scenario(c: &ScenarioConfig, dir: Option<&Path>) -> Result<(RunRecord, Vec<PathBuf>)> {
    let record = solve_scenario(c)?;
    let dir = dir
        .map(Path::to_path_buf)
        .or_else(|| c.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let files = write_artifacts(&record, c, &dir)?;
    Ok((record, files))
}

pub fn load_record(path: &Path) -> Result<RunRecord> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Stored versus recomputed certification of a result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub stored: Certification,
    pub recomputed: Certification,
    pub converged: bool,
}

impl VerifyReport {
    pub fn exit_code(&self) -> i32 {
        match (self.converged, self.recomputed.passed) {
            (false, _) => 3,
            (true, true) => 0,
            (true, false) => 2,
        }
    }
}

/// Re-runs every check on a stored result using its embedded config.
pub fn verify_record(record: &RunRecord) -> Result<VerifyReport> {
    let c = parse_scenario(&record.config)?;
    let recomputed = certify(&record.result, &c.model()?, &c.cost, c.cert_threshold)?;
    Ok(VerifyReport {
        stored: record.certification.clone(),
        recomputed,
        converged: record.result.converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub names: Vec<String>,
    pub w1: Vec<Vec<f64>>,
    pub max_w1: f64,
}

/// Pairwise W₁ between the action distributions of stored results.
pub fn compare_records(records: &[(String, RunRecord)]) -> Result<CompareReport> {
    if records.len() < 2 {
        return Err(Error::Precondition("compare needs at least two results".into()));
    }
    let results: Vec<EquilibriumResult> = records.iter().map(|(_, r)| r.result.clone()).collect();
    let w1 = pairwise_distances(&results)?;
    let max_w1 = w1.iter().flatten().cloned().fold(0.0, f64::max);
    Ok(CompareReport {
        names: records.iter().map(|(n, _)| n.clone()).collect(),
        w1,
        max_w1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn issues(e: Error) -> Vec<ConfigIssue> {
        match e {
            Error::Config(v) => v,
            other => panic!("expected config issues, got {other}"),
        }
    }

    #[test]
    fn preset_name_parses_to_preset() {
        let c = parse_scenario("fig2").unwrap();
        assert_eq!(c.cost, CostModel::Power { p: 2.2 });
        assert_eq!(c.congestion, Some(CongestionSpec::Log));
        assert_eq!(c.kernel, Some(KernelExpr::AbsPower { a: 2.0, b: 1.5, c: 1.0, d: [0.0, 0.0], q: 1.2 }));
        assert_eq!(c.eps, 1.0);
    }

    #[test]
    fn empty_text_names_required_fields() {
        let v = issues(parse_scenario("").unwrap_err());
        let fields: Vec<&str> = v.iter().map(|i| i.field.as_str()).collect();
        assert_eq!(fields, REQUIRED);
    }

    #[test]
    fn incompatible_solver_is_reported_with_its_line() {
        let text = "name = x\nsolver = algo1\nmu = uniform\ncost = quadratic\ncongestion = power alpha=1\n";
        let v = issues(parse_scenario(text).unwrap_err());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "congestion");
        assert_eq!(v[0].line, Some(5));
    }

    #[test]
    fn all_problems_are_collected() {
        let text = "name = x\nsolver = nope\nwhat = 3\nmu = table 1,-1\ncost = power\n# fine\neps = -1\neps = 2\n";
        let v = issues(parse_scenario(text).unwrap_err());
        let lines: Vec<Option<usize>> = v.iter().map(|i| i.line).collect();
        assert_eq!(lines, vec![Some(2), Some(3), Some(4), Some(5), Some(7), Some(8)]);
    }

    #[test]
    fn presets_round_trip() {
        for p in presets() {
            assert_eq!(parse_scenario(&emit_scenario(&p)).unwrap(), p, "{}", p.name);
        }
        let mut c = preset("fig1").unwrap();
        c.mu = MuSpec::Atoms(vec![[0.1, 0.2], [0.3, 0.4]]);
        c.tol = Some(1e-9);
        c.max_iter = Some(7);
        c.start = StartSpec::Power(2.0);
        c.out_dir = Some("out/x".into());
        c.formats.csv = false;
        assert_eq!(parse_scenario(&emit_scenario(&c)).unwrap(), c);
        let mut c = preset("fig3").unwrap();
        c.mu = MuSpec::Table(vec![0.5, 1.5, 1.0 / 3.0]);
        c.damping = Some(0.25);
        assert_eq!(parse_scenario(&emit_scenario(&c)).unwrap(), c);
    }

    #[test]
    fn table_mu_is_resampled_and_normalized() {
        let mut c = preset("trivial_power").unwrap();
        c.mu = MuSpec::Table(vec![1.0, 3.0]);
        c.n_cells = 4;
        assert_eq!(grid_mu(&c).unwrap().density(), &[0.5, 0.5, 1.5, 1.5]);
    }

    #[test]
    fn exit_codes() {
        let c = preset("trivial_power").unwrap();
        assert_eq!(solve_scenario(&c).unwrap().exit_code(), 0);
        let mut c = preset("fig3").unwrap();
        c.n_cells = 64;
        c.max_iter = Some(2);
        assert_eq!(solve_scenario(&c).unwrap().exit_code(), 3);
    }
}
