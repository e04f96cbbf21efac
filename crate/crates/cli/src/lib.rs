//! File formats and command implementations behind the `opspace` binary.
//!
//! Complex numbers are written as `[re, im]` pairs everywhere. A space file
//! holds one space, either a span of matrices or a span of sampled
//! functions, with an optional unit, cone and solver overrides.

use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use opspace_core::certify::{certify_coisometry, certify_isometry, certify_unitary};
use opspace_core::cstar::{detect_cstar, recover_product};
use opspace_core::funcspace::{
    catalog, g_hermitian_solve, min_opspace, scalar_unitary_check, CatalogSpace, SampledFunctionSpace,
};
use opspace_core::hermit::{delta_span, is_u_hermitian, is_u_positive};
use opspace_core::matcore::CMat;
use opspace_core::order::{cone_equals_delta_plus, norm_order_unit_check, psd_fixture_cone, Cone, DEFAULT_CONE_SAMPLES};
use opspace_core::report::decide;
use opspace_core::sysdetect::{detect_operator_system, recover_involution};
use opspace_core::tro::generate_tro;
use opspace_core::{
    BoundSide, CertificateReport, ConcreteOpSpace, Element, Exactness, SolverConfig, SolverDiagnostics, Verdict,
};
use serde::{Deserialize, Serialize};

/// Exit code for malformed input and violated preconditions.
pub const EXIT_INPUT: i32 = 3;
/// Random elements tried by `check function-unitary`.
pub const FUNCTION_SAMPLES: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] opspace_core::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub type CliResult<T> = Result<T, CliError>;

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

/// The space itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpaceData {
    /// `basis[k][r][c]`, each `rows x cols`.
    Matrix {
        rows: usize,
        cols: usize,
        basis: Vec<Vec<Vec<C64>>>,
        #[serde(default)]
        envelope_exact: bool,
    },
    /// `basis[k][w]`, the value of function `k` at point `w`.
    Function {
        points: usize,
        basis: Vec<Vec<C64>>,
        #[serde(default)]
        shilov_samples: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub space: SpaceData,
    /// Coefficients of the unit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<Vec<C64>>,
    /// Coefficients of the cone generators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone: Option<Vec<Vec<C64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SolverConfig>,
}

/// A parsed and validated space file.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub space: ConcreteOpSpace,
    pub function: Option<SampledFunctionSpace>,
    pub cone: Option<Cone>,
    pub config: SolverConfig,
}

impl SpaceFile {
    pub fn parse(text: &str) -> CliResult<SpaceFile> {
        serde_json::from_str(text).map_err(|e| input(format!("space file, line {} column {}: {e}", e.line(), e.column())))
    }

    pub fn read(path: &str) -> CliResult<SpaceFile> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_string(), source })?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("space files serialize");
        s.push('\n');
        s
    }

    fn dim(&self) -> usize {
        match &self.space {
            SpaceData::Matrix { basis, .. } => basis.len(),
            SpaceData::Function { basis, .. } => basis.len(),
        }
    }

    pub fn load(&self) -> CliResult<Loaded> {
        let d = self.dim();
        if d == 0 {
            return Err(input("space.basis: empty basis"));
        }
        let coeffs = |field: &str, v: &[C64]| {
            if v.len() != d {
                return Err(input(format!("{field}: {} coefficients for a {d}-dimensional space", v.len())));
            }
            Ok(Element(v.to_vec()))
        };
        let unit = self.unit.as_deref().map(|u| coeffs("unit", u)).transpose()?;
        let (space, function) = match &self.space {
            SpaceData::Matrix { rows, cols, basis, envelope_exact } => {
                let mut mats = Vec::with_capacity(d);
                for (k, m) in basis.iter().enumerate() {
                    if m.len() != *rows || m.iter().any(|r| r.len() != *cols) {
                        return Err(input(format!("space.matrix.basis[{k}]: expected {rows} rows of {cols} entries")));
                    }
                    mats.push(CMat::from_fn(*rows, *cols, |r, c| m[r][c]));
                }
                (ConcreteOpSpace::new(mats, unit)?.with_envelope_exact(*envelope_exact), None)
            }
            SpaceData::Function { points, basis, shilov_samples } => {
                if let Some(k) = basis.iter().position(|f| f.len() != *points) {
                    return Err(input(format!("space.function.basis[{k}]: expected {points} values")));
                }
                let f = SampledFunctionSpace::new(basis.clone(), unit)?.with_shilov_samples(*shilov_samples);
                (min_opspace(&f)?, Some(f))
            }
        };
        let cone = match &self.cone {
            Some(gens) => Some(Cone::new(
                gens.iter().enumerate().map(|(i, g)| coeffs(&format!("cone[{i}]"), g)).collect::<CliResult<_>>()?,
            )),
            None => None,
        };
        let config = self.config.clone().unwrap_or_default();
        config.validate()?;
        Ok(Loaded { space, function, cone, config })
    }

    /// The space file of a catalog example. `m2-full` carries the psd
    /// fixture cone.
    pub fn from_catalog(name: &str, samples: usize) -> CliResult<SpaceFile> {
        let c = catalog(name, samples)?;
        let canonical = opspace_core::funcspace::catalog_entry(name, samples)?.name;
        let (space, unit) = match &c {
            CatalogSpace::Matrix(s) => {
                let (rows, cols) = s.ambient_shape();
                let basis = s.basis().iter().map(|m| (0..rows).map(|r| (0..cols).map(|c| m[(r, c)]).collect()).collect()).collect();
                (SpaceData::Matrix { rows, cols, basis, envelope_exact: s.envelope_exact_hint() }, s.unit().cloned())
            }
            CatalogSpace::Function(f) => (
                SpaceData::Function { points: f.points(), basis: f.basis().to_vec(), shilov_samples: f.shilov_samples() },
                f.unit().cloned(),
            ),
        };
        let cone = (canonical == "m2-full").then(|| psd_fixture_cone().generators.into_iter().map(|g| g.0).collect());
        Ok(SpaceFile { name: Some(canonical), space, unit: unit.map(|u| u.0), cone, config: None })
    }
}

/// Parses coefficients: a JSON array of numbers or `[re, im]` pairs, or a
/// comma-separated list of `re` / `re:im` items.
pub fn parse_coeffs(text: &str) -> CliResult<Vec<C64>> {
    let t = text.trim();
    if t.starts_with('[') {
        let v: Vec<serde_json::Value> = serde_json::from_str(t).map_err(|e| input(format!("coefficients {t:?}: {e}")))?;
        return v
            .iter()
            .map(|x| match x {
                serde_json::Value::Number(n) => n.as_f64().map(|r| C64::new(r, 0.0)),
                serde_json::Value::Array(p) if p.len() == 2 => Some(C64::new(p[0].as_f64()?, p[1].as_f64()?)),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| input(format!("coefficients {t:?}: expected numbers or [re, im] pairs")));
    }
    t.split(',')
        .map(|item| {
            let mut it = item.trim().splitn(2, ':');
            let re = it.next().unwrap_or("").trim().parse::<f64>();
            let im = it.next().map(|s| s.trim().parse::<f64>()).unwrap_or(Ok(0.0));
            match (re, im) {
                (Ok(re), Ok(im)) => Ok(C64::new(re, im)),
                _ => Err(input(format!("coefficient {item:?}: expected re or re:im"))),
            }
        })
        .collect()
}

fn element(loaded: &Loaded, text: &str, flag: &str) -> CliResult<Element> {
    let c = parse_coeffs(text)?;
    let d = loaded.space.dim();
    if c.len() != d {
        return Err(input(format!("{flag}: {} coefficients for a {d}-dimensional space", c.len())));
    }
    Ok(Element(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Unitary,
    Isometry,
    Coisometry,
    Hermitian,
    Positive,
    System,
    Cstar,
    FunctionUnitary,
    FunctionSystem,
    OrderUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoverKind {
    Involution,
    Product,
}

#[derive(Debug, Clone, Default)]
pub struct CheckOptions {
    /// `--element`; defaults to the unit where that makes sense.
    pub element: Option<String>,
    pub level: Option<usize>,
    pub tol: Option<f64>,
}

fn function_space(loaded: &Loaded) -> CliResult<&SampledFunctionSpace> {
    loaded.function.as_ref().ok_or_else(|| input("this check needs a function space"))
}

/// Runs one check; several reports come back for `order-unit`.
pub fn run_check(kind: CheckKind, loaded: &Loaded, opts: &CheckOptions) -> CliResult<Vec<CertificateReport>> {
    let cfg = &loaded.config;
    let s = &loaded.space;
    let unit = || s.require_unit().cloned().map_err(CliError::from);
    let target = || match &opts.element {
        Some(t) => element(loaded, t, "--element"),
        None => unit(),
    };
    let explicit = || match &opts.element {
        Some(t) => element(loaded, t, "--element"),
        None => Err(input("--element is required for this check")),
    };
    let level = opts.level.unwrap_or(cfg.max_level);
    let one = |r: CertificateReport| Ok(vec![r]);
    match kind {
        CheckKind::Unitary => one(certify_unitary(s, &target()?, level, cfg)?),
        CheckKind::Isometry => one(certify_isometry(s, &target()?, level, cfg)?),
        CheckKind::Coisometry => one(certify_coisometry(s, &target()?, level, cfg)?),
        CheckKind::Hermitian => {
            let tol = opts.tol.unwrap_or(cfg.hermitian_tol);
            one(is_u_hermitian(s, &unit()?, &explicit()?, cfg)?.to_report(tol))
        }
        CheckKind::Positive => one(is_u_positive(s, &unit()?, &explicit()?, cfg)?),
        CheckKind::System => {
            let closure = generate_tro(s)?;
            one(detect_operator_system(s, &unit()?, Some(&closure), cfg)?)
        }
        CheckKind::Cstar => one(detect_cstar(s, &unit()?, cfg)?.report),
        CheckKind::FunctionUnitary => {
            let f = function_space(loaded)?;
            let tol = opts.tol.unwrap_or(10.0 / f.points() as f64);
            one(scalar_unitary_check(f, &target()?, FUNCTION_SAMPLES, tol, cfg.seed)?)
        }
        CheckKind::FunctionSystem => {
            let f = function_space(loaded)?;
            let g = g_hermitian_solve(f, &target()?)?;
            let gap = (f.dim() - g.complex_dim) as f64;
            one(CertificateReport::new("function-system", Verdict::from_bool(g.function_system), gap, 0.0, BoundSide::Exact)
                .note(format!("g-hermitians: real dimension {}, complex span {} of {}", g.real_dim(), g.complex_dim, f.dim())))
        }
        CheckKind::OrderUnit => {
            let cone = loaded.cone.as_ref().ok_or_else(|| input("order-unit needs cone generators in the space file"))?;
            let u = unit()?;
            let closure = generate_tro(s)?;
            let basis = delta_span(s, &u, Some(&closure), cfg)?.real_basis;
            let mut out = vec![norm_order_unit_check(s, cone, &u, &basis, DEFAULT_CONE_SAMPLES, cfg.seed)?];
            if closure.envelope_exact() {
                out.push(cone_equals_delta_plus(&closure, cone, &u, DEFAULT_CONE_SAMPLES, cfg)?);
            }
            Ok(out)
        }
    }
}

/// Outcome of `recover`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub kind: RecoverKind,
    pub t: f64,
    pub verdict: Verdict,
    pub coefficients: Vec<C64>,
    pub residual: f64,
    /// `1/t + 1/t² + tol`.
    pub error_bound: f64,
    /// Coefficients of the ambient answer, when it lies in the space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient: Option<Vec<C64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient_error: Option<f64>,
    /// Frobenius distance from the ambient answer to the space.
    pub ambient_residual: f64,
    /// The ambient answer is not in the space.
    pub escapes: bool,
    pub exactness: Exactness,
    pub diagnostics: SolverDiagnostics,
}

#[derive(Debug, Clone, Default)]
pub struct RecoverOptions {
    pub x: Option<String>,
    pub v: Option<String>,
    pub y: Option<String>,
    pub t: Option<f64>,
}

pub fn run_recover(kind: RecoverKind, loaded: &Loaded, opts: &RecoverOptions) -> CliResult<Recovery> {
    let cfg = &loaded.config;
    let s = &loaded.space;
    let u = s.require_unit()?.clone();
    let t = opts.t.unwrap_or(cfg.t_large);
    let need = |v: &Option<String>, flag: &str| match v {
        Some(text) => element(loaded, text, flag),
        None => Err(input(format!("{flag} is required"))),
    };
    let closure = generate_tro(s)?;
    let (rec, truth) = match kind {
        RecoverKind::Involution => {
            let x = need(&opts.x, "--x")?;
            let truth = closure.involution_blocks(&u, &x)?;
            (recover_involution(s, &u, &x, t, cfg)?, truth)
        }
        RecoverKind::Product => {
            let (v, y) = (need(&opts.v, "--v")?, need(&opts.y, "--y")?);
            let truth = closure.embed(&v).mul(&closure.embed(&y).adjoint()).mul(&closure.embed(&u));
            (recover_product(s, &u, &v, &y, t, cfg)?, truth)
        }
    };
    let m = s.membership(&closure.to_dense(&truth))?;
    let ambient = m.member.then(|| m.coeffs.clone());
    let ambient_error = ambient.as_ref().map(|a| s.norm(&rec.element.sub(a)));
    let verdict = decide(rec.residual, cfg.cert_tol, cfg.fail_threshold, BoundSide::Upper, rec.diagnostics.converged);
    Ok(Recovery {
        kind,
        t,
        verdict,
        coefficients: rec.element.0,
        residual: rec.residual,
        error_bound: rec.error_bound,
        ambient: ambient.map(|a| a.0),
        ambient_error,
        ambient_residual: m.residual,
        escapes: !m.member,
        exactness: closure.exactness(),
        diagnostics: rec.diagnostics,
    })
}

/// Structured output of `check` and `recover`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub seed: u64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CertificateReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery: Option<Recovery>,
}

impl ReportFile {
    pub fn new(command: Vec<String>, seed: u64) -> Self {
        ReportFile {
            tool: "opspace".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            seed,
            verdict: Verdict::Pass,
            checks: Vec::new(),
            recovery: None,
        }
    }

    pub fn with_checks(mut self, checks: Vec<CertificateReport>) -> Self {
        self.verdict = Verdict::all(checks.iter().map(|c| c.verdict));
        self.checks = checks;
        self
    }

    pub fn with_recovery(mut self, r: Recovery) -> Self {
        self.verdict = r.verdict;
        self.recovery = Some(r);
        self
    }

    pub fn exit_code(&self) -> i32 {
        self.verdict.exit_code()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

fn fmt_c(z: &C64) -> String {
    format!("{:.6}{:+.6}i", z.re, z.im)
}

fn fmt_coeffs(v: &[C64]) -> String {
    v.iter().map(fmt_c).collect::<Vec<_>>().join(", ")
}

fn render_check(out: &mut String, r: &CertificateReport, depth: usize) {
    let pad = "  ".repeat(depth);
    let _ = writeln!(out, "{pad}{}: {} (value {:.6e}, margin {:.3e}, {:?} bound)", r.check, r.verdict, r.value, r.margin, r.bound);
    if depth == 0 {
        if let Some(w) = &r.witness {
            for (k, c) in w.cells.iter().enumerate() {
                let _ = writeln!(out, "{pad}  witness[{k}]: {}", fmt_coeffs(&c.0));
            }
        }
    }
    for n in &r.notes {
        let _ = writeln!(out, "{pad}  note: {n}");
    }
    for p in &r.parts {
        render_check(out, p, depth + 1);
    }
}

/// Human-readable summary.
pub fn render_text(report: &ReportFile) -> String {
    let mut out = String::new();
    for c in &report.checks {
        render_check(&mut out, c, 0);
    }
    if let Some(r) = &report.recovery {
        let _ = writeln!(out, "recover {:?} at t = {}: {} (residual {:.3e})", r.kind, r.t, r.verdict, r.residual);
        let _ = writeln!(out, "  coefficients: {}", fmt_coeffs(&r.coefficients));
        let _ = writeln!(out, "  bound 1/t + 1/t^2 + tol = {:.6}", r.error_bound);
        match (&r.ambient, r.ambient_error) {
            (Some(a), Some(e)) => {
                let _ = writeln!(out, "  ambient: {}", fmt_coeffs(a));
                let _ = writeln!(out, "  distance to ambient: {e:.6}");
            }
            _ => {
                let _ = writeln!(out, "  product escapes X: ambient answer at distance {:.6} from the space", r.ambient_residual);
            }
        }
    }
    let _ = writeln!(out, "verdict: {} (seed {})", report.verdict, report.seed);
    out
}
