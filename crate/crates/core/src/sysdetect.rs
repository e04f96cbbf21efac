//! Intrinsic detection of operator systems and recovery of the involution.
//!
//! For a unitary `u`, `(X, u)` is an operator system iff every `x` in the
//! unit ball has a partner `y` in the unit ball with
//! `‖[[tu, x], [y, tu]]‖ ≤ √(t² + 1)` for all `t > 0`. As `t → ∞` the
//! partner is forced towards `−u x* u`, so at a single large `t` it
//! recovers the involution up to `1/t + 1/t²`.
//!
//! The residual `max_t (‖·‖ − √(t² + 1))₊` is convex in `y`, so the search
//! is a projected subgradient descent with target value zero.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::assembly::BlockAssembly;
use crate::error::{invalid, precondition, Result};
use crate::matcore::{C64, ONE};
use crate::opspace::{AmplifiedElement, ConcreteOpSpace, Element};
use crate::report::{decide, BoundSide, CertificateReport, SolverDiagnostics, Verdict};
use crate::solver::{minimize_over_ball, BallOptions, Geometry, MaxResidual, Objective, SolverConfig};
use crate::tro::{ambient_system_check, TroClosure};

/// Slack on `‖x‖ ≤ 1` and `‖u‖ = 1` before a precondition error.
const NORM_SLACK: f64 = 1e-9;

/// Outcome of one partner search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartnerSearchResult {
    pub x: Element,
    /// The best `y` found.
    pub partner: Element,
    /// `max(max_t (‖[[tu, x], [y, tu]]‖ − √(t² + 1)), ‖y‖ − 1)₊` at the
    /// partner.
    pub residual: f64,
    /// Unclipped `‖·‖ − √(t² + 1)` per `t`.
    pub per_t: Vec<(f64, f64)>,
    pub diagnostics: SolverDiagnostics,
    pub verdict: Verdict,
}

impl PartnerSearchResult {
    pub fn to_report(&self, name: impl Into<String>, cfg: &SolverConfig) -> CertificateReport {
        CertificateReport::new(name, self.verdict, self.residual, cfg.cert_tol, BoundSide::Upper)
            .with_witness(AmplifiedElement::diagonal(std::slice::from_ref(&self.x)))
            .with_diagnostics(self.diagnostics.clone())
    }
}

/// `[[tu, x], [y, tu]]` with `y` the variable.
pub fn partner_block<'a>(space: &'a ConcreteOpSpace, u: &Element, x: &Element, t: f64) -> BlockAssembly<'a> {
    let tu = C64::new(t, 0.0);
    let mut b = BlockAssembly::new(space, 2, 2, 1);
    b.add_constant(0, 0, u.coeffs(), tu)
        .add_constant(0, 1, x.coeffs(), ONE)
        .link(1, 0, 0, ONE)
        .add_constant(1, 1, u.coeffs(), tu);
    b
}

/// `‖y‖`, so that `(‖y‖ − 1)₊` joins the residual.
pub fn ball_block(space: &ConcreteOpSpace) -> BlockAssembly<'_> {
    let mut b = BlockAssembly::new(space, 1, 1, 1);
    b.link(0, 0, 0, ONE);
    b
}

fn check_inputs(space: &ConcreteOpSpace, u: &Element, x: &Element, t_grid: &[f64]) -> Result<()> {
    space.try_embed(u)?;
    space.try_embed(x)?;
    if t_grid.is_empty() || t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(invalid("t grid must be non-empty and positive"));
    }
    let nu = space.norm(u);
    if (nu - 1.0).abs() > NORM_SLACK.max(1e-6) {
        return Err(precondition(format!("‖u‖ = {nu}, a unitary has norm one")));
    }
    let nx = space.norm(x);
    if nx > 1.0 + NORM_SLACK {
        return Err(precondition(format!("‖x‖ = {nx} exceeds 1")));
    }
    Ok(())
}

/// Searches the unit ball for a partner of `x` on the given `t` grid.
pub fn find_partner(space: &ConcreteOpSpace, u: &Element, x: &Element, t_grid: &[f64], cfg: &SolverConfig) -> Result<PartnerSearchResult> {
    check_inputs(space, u, x, t_grid)?;
    let mut blocks: Vec<(BlockAssembly, f64)> = t_grid.iter().map(|&t| (partner_block(space, u, x, t), (t * t + 1.0).sqrt())).collect();
    blocks.push((ball_block(space), 1.0));
    let obj = MaxResidual { blocks, clip: true };
    let geom = Geometry::new(space, 1);
    let opts = BallOptions { target: Some(0.0), penalized: true, ..Default::default() };
    let opt = minimize_over_ball(&obj, &geom, cfg, &opts)?;
    let partner = AmplifiedElement::from_params(1, space.dim(), &opt.params).cell(0, 0).clone();
    let per_t: Vec<(f64, f64)> = obj.blocks.iter().map(|(b, c)| b.value(&opt.params) - c).zip(t_grid).map(|(v, &t)| (t, v)).collect();
    let residual = obj.value(&opt.params);
    let verdict = decide(residual, cfg.cert_tol, cfg.fail_threshold, BoundSide::Upper, opt.diagnostics.converged);
    Ok(PartnerSearchResult { x: x.clone(), partner, residual, per_t, diagnostics: opt.diagnostics, verdict })
}

/// Elements tested by [`detect_operator_system`]: the normalised basis,
/// then `cfg.ball_samples` seeded points of the unit ball.
pub fn probe_elements(space: &ConcreteOpSpace, cfg: &SolverConfig) -> Vec<Element> {
    let d = space.dim();
    let mut out: Vec<Element> = (0..d)
        .filter_map(|k| {
            let e = Element::basis(d, k);
            let n = space.norm(&e);
            (n > 0.0).then(|| e.scale_real(1.0 / n))
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xba11);
    let radius = Uniform::new(0.0f64, 1.0).expect("valid range");
    for _ in 0..cfg.ball_samples {
        let e = Element((0..d).map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))).collect());
        let n = space.norm(&e);
        if n > 0.0 {
            out.push(e.scale_real(radius.sample(&mut rng).sqrt() / n));
        }
    }
    out
}

/// Partner searches on the full `t` grid for every probe element. With a
/// closure the ambient criterion `u X* u ⊆ X` is attached as a cross-check.
pub fn detect_operator_system(
    space: &ConcreteOpSpace,
    u: &Element,
    closure: Option<&TroClosure>,
    cfg: &SolverConfig,
) -> Result<CertificateReport> {
    cfg.validate()?;
    let mut parts = Vec::new();
    let mut results = Vec::new();
    for (k, x) in probe_elements(space, cfg).iter().enumerate() {
        let r = find_partner(space, u, x, &cfg.t_grid, cfg)?;
        parts.push(r.to_report(format!("partner-{k}"), cfg));
        results.push(r);
    }
    let worst = results
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.residual.total_cmp(&b.1.residual).then(b.0.cmp(&a.0)))
        .map(|(_, r)| r)
        .ok_or_else(|| invalid("space has no elements to probe"))?;
    let verdict = Verdict::all(results.iter().map(|r| r.verdict));
    let mut diag = SolverDiagnostics { converged: true, ..Default::default() };
    results.iter().for_each(|r| diag.merge(&r.diagnostics));
    let mut report = CertificateReport::new("operator-system", verdict, worst.residual, cfg.cert_tol, BoundSide::Upper)
        .with_witness(AmplifiedElement::diagonal(std::slice::from_ref(&worst.x)))
        .with_diagnostics(diag);
    if let Some(c) = closure {
        let amb = ambient_system_check(c, u)?;
        if amb.verdict != verdict && verdict != Verdict::Inconclusive {
            report = report.note(format!("ambient criterion disagrees: {}", amb.verdict));
        }
        parts.push(amb);
    }
    Ok(report.with_parts(parts))
}

/// A space and unitary that passed [`detect_operator_system`].
#[derive(Debug, Clone)]
pub struct CertifiedSystem<'a> {
    space: &'a ConcreteOpSpace,
    unit: Element,
    report: CertificateReport,
}

/// A recovered value with its residual and the error bound that applies
/// when the residual is below tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovered {
    pub element: Element,
    pub residual: f64,
    pub t: f64,
    /// `1/t + 1/t² + tol`.
    pub error_bound: f64,
    pub feasible: bool,
    pub diagnostics: SolverDiagnostics,
}

/// `1/t + 1/t² + tol`.
pub fn recovery_bound(t: f64, tol: f64) -> f64 {
    1.0 / t + 1.0 / (t * t) + tol
}

impl<'a> CertifiedSystem<'a> {
    /// Runs detection; a precondition error unless it passes.
    pub fn new(space: &'a ConcreteOpSpace, u: &Element, cfg: &SolverConfig) -> Result<Self> {
        let report = detect_operator_system(space, u, None, cfg)?;
        Self::from_report(space, u, report)
    }

    pub fn from_report(space: &'a ConcreteOpSpace, u: &Element, report: CertificateReport) -> Result<Self> {
        if report.check != "operator-system" || !report.verdict.is_pass() {
            return Err(precondition(format!("not a certified operator system (verdict {})", report.verdict)));
        }
        Ok(CertifiedSystem { space, unit: u.clone(), report })
    }

    pub fn space(&self) -> &'a ConcreteOpSpace {
        self.space
    }

    pub fn unit(&self) -> &Element {
        &self.unit
    }

    pub fn report(&self) -> &CertificateReport {
        &self.report
    }

    /// `ι(x) ≈ −y` for the partner `y` of `x` at the single value `t`.
    pub fn recover_involution(&self, x: &Element, t: f64, cfg: &SolverConfig) -> Result<Recovered> {
        let r = find_partner(self.space, &self.unit, x, &[t], cfg)?;
        Ok(Recovered {
            element: r.partner.scale_real(-1.0),
            residual: r.residual,
            t,
            error_bound: recovery_bound(t, cfg.cert_tol),
            feasible: r.residual <= cfg.cert_tol,
            diagnostics: r.diagnostics,
        })
    }

    /// `ι` on an element of any norm, by scaling into the unit ball and
    /// back (`ι` is conjugate linear).
    pub fn involution(&self, x: &Element, t: f64, cfg: &SolverConfig) -> Result<Recovered> {
        let n = self.space.norm(x);
        if n <= 1.0 {
            return self.recover_involution(x, t, cfg);
        }
        let mut r = self.recover_involution(&x.scale_real(1.0 / n), t, cfg)?;
        r.element = r.element.scale_real(n);
        r.error_bound *= n;
        Ok(r)
    }
}

/// Certifies the system and recovers `ι(x)` at `t`.
pub fn recover_involution(space: &ConcreteOpSpace, u: &Element, x: &Element, t: f64, cfg: &SolverConfig) -> Result<Recovered> {
    CertifiedSystem::new(space, u, cfg)?.recover_involution(x, t, cfg)
}

/// Compares the partner constraint at `t = 1` alone with the full grid for
/// a norm-one `x`. Passes when they diverge: `t = 1` is satisfiable while
/// the grid is not.
pub fn t1_insufficiency_probe(space: &ConcreteOpSpace, u: &Element, x: &Element, cfg: &SolverConfig) -> Result<CertificateReport> {
    let nx = space.try_embed(x).map(|_| space.norm(x))?;
    if (nx - 1.0).abs() > 1e-6 {
        return Err(precondition(format!("‖x‖ = {nx}, the probe needs a norm-one element")));
    }
    let one = find_partner(space, u, x, &[1.0], cfg)?;
    let grid = find_partner(space, u, x, &cfg.t_grid, cfg)?;
    let verdict = match (one.verdict, grid.verdict) {
        (Verdict::Pass, Verdict::Fail) => Verdict::Pass,
        (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
        _ => Verdict::Fail,
    };
    Ok(CertificateReport::new("t1-probe", verdict, one.residual, cfg.cert_tol, BoundSide::Upper)
        .with_witness(AmplifiedElement::diagonal(std::slice::from_ref(x)))
        .with_parts(vec![one.to_report("t=1", cfg), grid.to_report("t-grid", cfg)])
        .note(format!("t = 1 {}, full grid {}", one.verdict, grid.verdict)))
}
