//! Line-oriented run configuration: `section.key = value`, `#` comments.
//!
//! Numeric values accept constant expressions (`pi/2 + 0.4`, `1/16`). Lists
//! are comma separated. Every key is optional except `domain.kind`,
//! `domain.dim`, `domain.h`, the shape parameter of the domain kind, and a
//! phase (either `phase.theta` or a manufactured `boundary.exact`).

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use crate::diagnostics::{ProbeConfig, ProbeKind};
use crate::grid::{boundary_fn, DomainKind, DomainSpec, GridProblem, PhaseSpec};
use crate::operator::{critical_phase, phase_of, SymMatrix};
use crate::solver::SolverConfig;

use super::expr::Expr;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line of the offending entry, `0` for whole-file problems.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config line {}: {}", self.line, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError { line, message: message.into() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    /// Solution dump and trace as CSV.
    Csv,
    /// Fixed-width node table.
    Table,
    /// Summary and report documents.
    Json,
}

impl OutputFormat {
    fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Table => "table",
            OutputFormat::Json => "json",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [OutputFormat::Csv, OutputFormat::Table, OutputFormat::Json].into_iter().find(|f| f.as_str() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub domain: DomainSpec,
    /// Source of `θ(x)` or `θ(x, u)`; derived from `exact` when absent.
    pub theta: Option<String>,
    /// Constant start phase of the continuation path.
    pub start_phase: Option<f64>,
    /// Source of `φ`; defaults to `exact`.
    pub phi: Option<String>,
    /// Manufactured solution.
    pub exact: Option<String>,
    pub solver: SolverConfig,
    /// Accepted band of observed convergence orders.
    pub order_band: (f64, f64),
    pub probes: ProbeConfig,
    pub enabled_probes: Vec<ProbeKind>,
    pub output_dir: String,
    pub formats: Vec<OutputFormat>,
}

const KEYS: &[&str] = &[
    "domain.kind",
    "domain.dim",
    "domain.h",
    "domain.radius",
    "domain.half_widths",
    "domain.semi_axes",
    "phase.theta",
    "phase.start",
    "boundary.phi",
    "boundary.exact",
    "solver.newton_tol",
    "solver.max_newton_iters",
    "solver.armijo_c",
    "solver.backtrack_factor",
    "solver.min_step",
    "solver.continuation_steps",
    "solver.linear_solver_tol",
    "solver.max_bisections",
    "solver.order_band",
    "probes.enabled",
    "probes.lambda1_threshold",
    "probes.jacobi_c",
    "probes.jacobi_C",
    "probes.boundary_band_width",
    "probes.epsilon_grad",
    "probes.gap_gate",
    "probes.gradient_c",
    "probes.margin_tol",
    "probes.eigen_tol",
    "probes.bump_radius",
    "output.directory",
    "output.formats",
];

const SECTIONS: &[&str] = &["domain", "phase", "boundary", "solver", "probes", "output"];

struct Entries(BTreeMap<&'static str, (usize, String)>);

impl Entries {
    fn take(&mut self, key: &'static str) -> Option<(usize, String)> {
        self.0.remove(key)
    }

    fn number(&mut self, key: &'static str) -> Result<Option<(usize, f64)>, ConfigError> {
        let Some((line, v)) = self.take(key) else { return Ok(None) };
        Ok(Some((line, parse_number(line, key, &v)?)))
    }

    fn count(&mut self, key: &'static str) -> Result<Option<usize>, ConfigError> {
        let Some((line, v)) = self.take(key) else { return Ok(None) };
        match v.parse::<usize>() {
            Ok(c) => Ok(Some(c)),
            Err(_) => err(line, format!("{key}: expected a nonnegative integer, found '{v}'")),
        }
    }

    fn numbers(&mut self, key: &'static str) -> Result<Option<(usize, Vec<f64>)>, ConfigError> {
        let Some((line, v)) = self.take(key) else { return Ok(None) };
        let vals = v.split(',').map(|s| parse_number(line, key, s.trim())).collect::<Result<Vec<_>, _>>()?;
        Ok(Some((line, vals)))
    }
}

fn parse_number(line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    let e = Expr::parse(v, 0).map_err(|e| ConfigError { line, message: format!("{key}: {e}") })?;
    match e.constant_value() {
        Some(x) if x.is_finite() => Ok(x),
        _ => err(line, format!("{key}: '{v}' is not a finite constant")),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = Entries(BTreeMap::new());
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return err(line, "expected 'section.key = value'");
            };
            let (key, value) = (key.trim(), value.trim());
            let Some((section, _)) = key.split_once('.') else {
                return err(line, format!("key '{key}' lacks a section"));
            };
            if !SECTIONS.contains(&section) {
                return err(line, format!("unknown section '{section}'"));
            }
            let Some(&known) = KEYS.iter().find(|k| **k == key) else {
                return err(line, format!("unknown key '{key}'"));
            };
            if value.is_empty() {
                return err(line, format!("{key}: empty value"));
            }
            if let Some((first, _)) = entries.0.get(known) {
                return err(line, format!("duplicate key '{key}' (first set on line {first})"));
            }
            entries.0.insert(known, (line, value.to_string()));
        }
        Self::from_entries(entries)
    }

    fn from_entries(mut e: Entries) -> Result<Self, ConfigError> {
        let Some((kind_line, kind)) = e.take("domain.kind") else { return err(0, "missing domain.kind") };
        let Some(dim) = e.count("domain.dim")? else { return err(0, "missing domain.dim") };
        let Some((h_line, h)) = e.number("domain.h")? else { return err(0, "missing domain.h") };
        let radius = e.number("domain.radius")?;
        let half = e.numbers("domain.half_widths")?;
        let semi = e.numbers("domain.semi_axes")?;
        let shape = |name: &str, present: bool| -> Result<(), ConfigError> {
            if present {
                Ok(())
            } else {
                err(kind_line, format!("domain.kind = {kind} requires domain.{name}"))
            }
        };
        let stray = [("radius", radius.as_ref().map(|r| r.0)), ("half_widths", half.as_ref().map(|r| r.0)), ("semi_axes", semi.as_ref().map(|r| r.0))];
        let expected = match kind.as_str() {
            "ball" => "radius",
            "box" => "half_widths",
            "ellipsoid" => "semi_axes",
            other => return err(kind_line, format!("unknown domain kind '{other}' (ball, box, ellipsoid)")),
        };
        for (name, line) in stray {
            if let Some(line) = line {
                if name != expected {
                    return err(line, format!("domain.{name} does not apply to domain.kind = {kind}"));
                }
            }
        }
        let kind = match expected {
            "radius" => {
                shape("radius", radius.is_some())?;
                DomainKind::Ball { radius: radius.unwrap().1 }
            }
            "half_widths" => {
                shape("half_widths", half.is_some())?;
                let mut v = half.unwrap().1;
                if v.len() == 1 {
                    v = vec![v[0]; dim];
                }
                DomainKind::Box { half_widths: v }
            }
            _ => {
                shape("semi_axes", semi.is_some())?;
                DomainKind::Ellipsoid { semi_axes: semi.unwrap().1 }
            }
        };
        let domain = DomainSpec { kind, dim, h };
        domain.validate().map_err(|x| ConfigError { line: h_line, message: x.to_string() })?;

        let mut expression = |key: &'static str| -> Result<Option<String>, ConfigError> {
            let Some((line, src)) = e.take(key) else { return Ok(None) };
            let parsed = Expr::parse(&src, dim).map_err(|x| ConfigError { line, message: format!("{key}: {x}") })?;
            if key != "phase.theta" && parsed.depends_on_u() {
                return err(line, format!("{key} may not depend on u"));
            }
            Ok(Some(src))
        };
        let theta = expression("phase.theta")?;
        let phi = expression("boundary.phi")?;
        let exact = expression("boundary.exact")?;
        if theta.is_none() && exact.is_none() {
            return err(0, "set phase.theta, or boundary.exact to derive the phase from a manufactured solution");
        }
        if phi.is_none() && exact.is_none() {
            return err(0, "set boundary.phi or boundary.exact");
        }
        let start_phase = e.number("phase.start")?.map(|v| v.1);

        let mut solver = SolverConfig::default();
        macro_rules! set {
            ($target:expr, $key:literal, number) => {
                if let Some((_, v)) = e.number($key)? {
                    $target = v;
                }
            };
            ($target:expr, $key:literal, count) => {
                if let Some(v) = e.count($key)? {
                    $target = v;
                }
            };
        }
        set!(solver.newton_tol, "solver.newton_tol", number);
        set!(solver.max_newton_iters, "solver.max_newton_iters", count);
        set!(solver.armijo_c, "solver.armijo_c", number);
        set!(solver.backtrack_factor, "solver.backtrack_factor", number);
        set!(solver.min_step, "solver.min_step", number);
        set!(solver.continuation_steps, "solver.continuation_steps", count);
        set!(solver.linear_solver_tol, "solver.linear_solver_tol", number);
        set!(solver.max_bisections, "solver.max_bisections", count);
        solver.validate().map_err(|x| ConfigError { line: 0, message: x.to_string() })?;
        let order_band = match e.numbers("solver.order_band")? {
            None => (1.7, 2.3),
            Some((_, v)) if v.len() == 2 && v[0] < v[1] => (v[0], v[1]),
            Some((line, _)) => return err(line, "solver.order_band: expected 'low, high' with low < high"),
        };

        let mut probes = ProbeConfig::default();
        set!(probes.lambda1_threshold, "probes.lambda1_threshold", number);
        set!(probes.jacobi_c, "probes.jacobi_c", number);
        set!(probes.jacobi_big_c, "probes.jacobi_C", number);
        set!(probes.boundary_band_width, "probes.boundary_band_width", number);
        set!(probes.epsilon_grad, "probes.epsilon_grad", number);
        set!(probes.gap_gate, "probes.gap_gate", number);
        set!(probes.gradient_c, "probes.gradient_c", number);
        set!(probes.margin_tol, "probes.margin_tol", number);
        set!(probes.eigen_tol, "probes.eigen_tol", number);
        set!(probes.bump_radius, "probes.bump_radius", number);
        probes.validate().map_err(|x| ConfigError { line: 0, message: x.to_string() })?;
        let enabled_probes = match e.take("probes.enabled") {
            None => ProbeKind::ALL.to_vec(),
            Some((line, v)) => {
                let mut out = Vec::new();
                for name in v.split(',').map(str::trim) {
                    match ProbeKind::parse(name) {
                        Some(k) if !out.contains(&k) => out.push(k),
                        Some(_) => return err(line, format!("probe '{name}' listed twice")),
                        None => return err(line, format!("unknown probe '{name}'")),
                    }
                }
                out.sort_by_key(|k| ProbeKind::ALL.iter().position(|a| a == k));
                out
            }
        };

        let output_dir = e.take("output.directory").map_or_else(|| "out".to_string(), |v| v.1);
        let formats = match e.take("output.formats") {
            None => vec![OutputFormat::Csv, OutputFormat::Json],
            Some((line, v)) => {
                let mut out = Vec::new();
                for name in v.split(',').map(str::trim) {
                    match OutputFormat::parse(name) {
                        Some(f) if !out.contains(&f) => out.push(f),
                        Some(_) => return err(line, format!("format '{name}' listed twice")),
                        None => return err(line, format!("unknown output format '{name}' (csv, table, json)")),
                    }
                }
                out.sort_by_key(|f| *f as usize);
                out
            }
        };
        debug_assert!(e.0.is_empty(), "unconsumed keys {:?}", e.0.keys().collect::<Vec<_>>());

        Ok(Self {
            domain,
            theta,
            start_phase,
            phi,
            exact,
            solver,
            order_band,
            probes,
            enabled_probes,
            output_dir,
            formats,
        })
    }

    /// Canonical text with every effective setting; parsing it yields the
    /// same configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let d = &self.domain;
        let _ = writeln!(s, "domain.kind = {}", d.kind_name());
        let _ = writeln!(s, "domain.dim = {}", d.dim);
        let _ = writeln!(s, "domain.h = {:?}", d.h);
        match &d.kind {
            DomainKind::Ball { radius } => {
                let _ = writeln!(s, "domain.radius = {radius:?}");
            }
            DomainKind::Box { half_widths } => {
                let _ = writeln!(s, "domain.half_widths = {}", list(half_widths));
            }
            DomainKind::Ellipsoid { semi_axes } => {
                let _ = writeln!(s, "domain.semi_axes = {}", list(semi_axes));
            }
        }
        if let Some(t) = &self.theta {
            let _ = writeln!(s, "phase.theta = {t}");
        }
        if let Some(t) = self.start_phase {
            let _ = writeln!(s, "phase.start = {t:?}");
        }
        if let Some(t) = &self.phi {
            let _ = writeln!(s, "boundary.phi = {t}");
        }
        if let Some(t) = &self.exact {
            let _ = writeln!(s, "boundary.exact = {t}");
        }
        let c = &self.solver;
        let _ = writeln!(s, "solver.newton_tol = {:?}", c.newton_tol);
        let _ = writeln!(s, "solver.max_newton_iters = {}", c.max_newton_iters);
        let _ = writeln!(s, "solver.armijo_c = {:?}", c.armijo_c);
        let _ = writeln!(s, "solver.backtrack_factor = {:?}", c.backtrack_factor);
        let _ = writeln!(s, "solver.min_step = {:?}", c.min_step);
        let _ = writeln!(s, "solver.continuation_steps = {}", c.continuation_steps);
        let _ = writeln!(s, "solver.linear_solver_tol = {:?}", c.linear_solver_tol);
        let _ = writeln!(s, "solver.max_bisections = {}", c.max_bisections);
        let _ = writeln!(s, "solver.order_band = {:?}, {:?}", self.order_band.0, self.order_band.1);
        let p = &self.probes;
        let names: Vec<&str> = self.enabled_probes.iter().map(|k| k.as_str()).collect();
        let _ = writeln!(s, "probes.enabled = {}", names.join(", "));
        let _ = writeln!(s, "probes.lambda1_threshold = {:?}", p.lambda1_threshold);
        let _ = writeln!(s, "probes.jacobi_c = {:?}", p.jacobi_c);
        let _ = writeln!(s, "probes.jacobi_C = {:?}", p.jacobi_big_c);
        let _ = writeln!(s, "probes.boundary_band_width = {:?}", p.boundary_band_width);
        let _ = writeln!(s, "probes.epsilon_grad = {:?}", p.epsilon_grad);
        let _ = writeln!(s, "probes.gap_gate = {:?}", p.gap_gate);
        let _ = writeln!(s, "probes.gradient_c = {:?}", p.gradient_c);
        let _ = writeln!(s, "probes.margin_tol = {:?}", p.margin_tol);
        let _ = writeln!(s, "probes.eigen_tol = {:?}", p.eigen_tol);
        let _ = writeln!(s, "probes.bump_radius = {:?}", p.bump_radius);
        let _ = writeln!(s, "output.directory = {}", self.output_dir);
        let fmts: Vec<&str> = self.formats.iter().map(|f| f.as_str()).collect();
        let _ = writeln!(s, "output.formats = {}", fmts.join(", "));
        s
    }

    fn parsed(&self, src: &str) -> Expr {
        Expr::parse(src, self.domain.dim).expect("validated at parse time")
    }

    /// The phase: `phase.theta` when given, otherwise the phase of the
    /// analytic Hessian of `boundary.exact`.
    pub fn phase_spec(&self) -> PhaseSpec {
        let n = self.domain.dim;
        if let Some(src) = &self.theta {
            let e = self.parsed(src);
            if let Some(c) = e.constant_value() {
                return PhaseSpec::constant(n, c);
            }
            return if e.depends_on_u() {
                PhaseSpec::from_fn_xu(n, src.clone(), move |x, u| e.eval(x, u))
            } else {
                PhaseSpec::from_fn(n, src.clone(), move |x| e.eval(x, 0.0))
            };
        }
        let exact = self.parsed(self.exact.as_ref().expect("phase or exact present"));
        let mut second = Vec::new();
        for i in 0..n {
            let di = exact.diff(i);
            for j in i..n {
                second.push(di.diff(j));
            }
        }
        PhaseSpec::from_fn(n, format!("phase of D^2({})", self.exact.as_ref().unwrap()), move |x| {
            let mut k = 0;
            let mut m = SymMatrix::zeros(n);
            for i in 0..n {
                for j in i..n {
                    m.set(i, j, second[k].eval(x, 0.0));
                    k += 1;
                }
            }
            phase_of(&m).unwrap_or(f64::NAN)
        })
    }

    /// Manufactured solution as a function, if configured.
    pub fn exact_fn(&self) -> Option<impl Fn(&[f64]) -> f64 + Send + Sync + 'static> {
        let e = self.parsed(self.exact.as_ref()?);
        Some(move |x: &[f64]| e.eval(x, 0.0))
    }

    /// Start phase of continuation: configured, or critical plus 0.4.
    pub fn continuation_start(&self) -> f64 {
        self.start_phase.unwrap_or_else(|| critical_phase(self.domain.dim) + 0.4)
    }

    /// Builds the grid problem at spacing `h` (the configured one if `None`).
    pub fn build_problem(&self, h: Option<f64>) -> Result<GridProblem, crate::grid::GridError> {
        let domain = h.map_or_else(|| self.domain.clone(), |h| self.domain.with_spacing(h));
        let src = self.phi.as_ref().or(self.exact.as_ref()).expect("boundary data present");
        let phi = self.parsed(src);
        GridProblem::build(domain, boundary_fn(move |x| phi.eval(x, 0.0)), self.phase_spec())
    }
}
