//! Intrinsic certificates for unitaries, isometries and coisometries.
//!
//! `u` is a coisometry iff `‖[u_n x]‖² = 1 + ‖x‖²` for every norm-one
//! `x ∈ M_n(X)`, and an isometry iff the same holds for the column
//! `[u_n; x]`. The defect `(1 + ‖x‖²) − ‖[u_n x]‖²` lies in `[0, 1]` on the
//! sphere when `‖u‖ ≤ 1`; its supremum is searched by multistart ascent,
//! so a reported defect is always attained by the returned witness.

use serde::{Deserialize, Serialize};

use crate::assembly::{BlockAssembly, Evaluation};
use crate::error::{precondition, Result};
use crate::matcore::{C64, ONE};
use crate::opspace::{AmplifiedElement, ConcreteOpSpace, Element};
use crate::report::{decide, BoundSide, CertificateReport, SolverDiagnostics, Verdict};
use crate::solver::{maximize_over_sphere, Geometry, Objective, SolverConfig, SphereOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `[u_n x]`: the coisometry half.
    Row,
    /// `[u_n; x]`: the isometry half.
    Column,
}

/// Worst defect found at one level and direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectProfile {
    pub level: usize,
    pub direction: Direction,
    pub worst_defect: f64,
    pub witness: AmplifiedElement,
    pub diagnostics: SolverDiagnostics,
    pub verdict: Verdict,
}

impl DefectProfile {
    pub fn to_report(&self, cfg: &SolverConfig) -> CertificateReport {
        let name = match self.direction {
            Direction::Row => format!("row-defect-n{}", self.level),
            Direction::Column => format!("column-defect-n{}", self.level),
        };
        CertificateReport::new(name, self.verdict, self.worst_defect, cfg.cert_tol, BoundSide::Lower)
            .with_witness(self.witness.clone())
            .with_diagnostics(self.diagnostics.clone())
    }
}

/// `[u_n x]` (row) or `[u_n; x]` (column) with `x` the `n²` variables.
pub fn defect_block<'a>(space: &'a ConcreteOpSpace, u: &Element, n: usize, direction: Direction) -> BlockAssembly<'a> {
    let (gr, gc) = match direction {
        Direction::Row => (n, 2 * n),
        Direction::Column => (2 * n, n),
    };
    let mut b = BlockAssembly::new(space, gr, gc, n * n);
    for i in 0..n {
        b.add_constant(i, i, u.coeffs(), ONE);
        for j in 0..n {
            match direction {
                Direction::Row => b.link(i, n + j, i * n + j, ONE),
                Direction::Column => b.link(n + i, j, i * n + j, ONE),
            };
        }
    }
    b
}

/// `(1 + ‖x‖²) − ‖block‖²` at a point of `M_n(X)`.
pub fn defect_at(space: &ConcreteOpSpace, u: &Element, x: &AmplifiedElement, direction: Direction) -> f64 {
    let b = defect_block(space, u, x.level, direction);
    let s = b.value(&x.to_params());
    let nx = space.norm_amplified(x);
    1.0 + nx * nx - s * s
}

fn check_unit(space: &ConcreteOpSpace, u: &Element, cfg: &SolverConfig) -> Result<()> {
    let nu = space.try_embed(u).map(|_| space.norm(u))?;
    if nu > 1.0 + cfg.cert_tol {
        return Err(precondition(format!("‖u‖ = {nu} exceeds 1")));
    }
    Ok(())
}

/// On the sphere the defect is `2 − ‖block‖²`.
struct DefectObjective<'a>(BlockAssembly<'a>);

impl Objective for DefectObjective<'_> {
    fn n_params(&self) -> usize {
        self.0.n_params()
    }
    fn evaluate(&self, p: &[f64]) -> Evaluation {
        let e = self.0.evaluate(p);
        Evaluation { value: 2.0 - e.value * e.value, gradient: e.gradient.iter().map(|g| -2.0 * e.value * g).collect(), gap: e.gap }
    }
    fn value(&self, p: &[f64]) -> f64 {
        let v = self.0.value(p);
        2.0 - v * v
    }
    fn values_along(&self, p: &[f64], step: f64) -> Vec<(f64, f64)> {
        self.0.values_along(p, step).into_iter().map(|(hi, lo)| (2.0 - hi * hi, 2.0 - lo * lo)).collect()
    }
}

fn defect(space: &ConcreteOpSpace, u: &Element, n: usize, direction: Direction, cfg: &SolverConfig) -> Result<DefectProfile> {
    check_unit(space, u, cfg)?;
    if n == 0 {
        return Err(crate::error::invalid("level must be positive"));
    }
    let block = defect_block(space, u, n, direction);
    let obj = DefectObjective(block);
    let geom = Geometry::new(space, n);
    let opt = maximize_over_sphere(&obj, &geom, cfg, &SphereOptions::default())?;
    let witness = AmplifiedElement::from_params(n, space.dim(), &opt.params);
    let worst = defect_at(space, u, &witness, direction);
    let verdict = decide(worst, cfg.cert_tol, cfg.fail_threshold, BoundSide::Lower, opt.diagnostics.converged);
    Ok(DefectProfile { level: n, direction, worst_defect: worst, witness, diagnostics: opt.diagnostics, verdict })
}

/// Worst row defect `(1 + ‖x‖²) − ‖[u_n x]‖²` over the unit sphere of
/// `M_n(X)`.
pub fn row_defect(space: &ConcreteOpSpace, u: &Element, n: usize, cfg: &SolverConfig) -> Result<DefectProfile> {
    defect(space, u, n, Direction::Row, cfg)
}

/// Worst column defect `(1 + ‖x‖²) − ‖[u_n; x]‖²`.
pub fn column_defect(space: &ConcreteOpSpace, u: &Element, n: usize, cfg: &SolverConfig) -> Result<DefectProfile> {
    defect(space, u, n, Direction::Column, cfg)
}

fn certify(
    name: &str,
    space: &ConcreteOpSpace,
    u: &Element,
    max_level: usize,
    directions: &[Direction],
    cfg: &SolverConfig,
) -> Result<CertificateReport> {
    cfg.validate()?;
    let mut profiles = Vec::new();
    for n in 1..=max_level {
        for &d in directions {
            profiles.push(defect(space, u, n, d, cfg)?);
        }
    }
    let worst = profiles
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.worst_defect.total_cmp(&b.1.worst_defect).then(b.0.cmp(&a.0)))
        .map(|(_, p)| p)
        .expect("at least one level");
    let verdict = Verdict::all(profiles.iter().map(|p| p.verdict));
    let mut diag = SolverDiagnostics { converged: true, ..Default::default() };
    for p in &profiles {
        diag.merge(&p.diagnostics);
    }
    diag.best_start = worst.diagnostics.best_start;
    Ok(CertificateReport::new(name, verdict, worst.worst_defect, cfg.cert_tol, BoundSide::Lower)
        .with_witness(worst.witness.clone())
        .with_diagnostics(diag)
        .with_parts(profiles.iter().map(|p| p.to_report(cfg)).collect()))
}

/// Row and column defects at levels `1..=max_level`.
pub fn certify_unitary(space: &ConcreteOpSpace, u: &Element, max_level: usize, cfg: &SolverConfig) -> Result<CertificateReport> {
    certify("unitary", space, u, max_level, &[Direction::Row, Direction::Column], cfg)
}

/// Column defects only.
pub fn certify_isometry(space: &ConcreteOpSpace, u: &Element, max_level: usize, cfg: &SolverConfig) -> Result<CertificateReport> {
    certify("isometry", space, u, max_level, &[Direction::Column], cfg)
}

/// Row defects only.
pub fn certify_coisometry(space: &ConcreteOpSpace, u: &Element, max_level: usize, cfg: &SolverConfig) -> Result<CertificateReport> {
    certify("coisometry", space, u, max_level, &[Direction::Row], cfg)
}

/// Scales an element to norm one; `None` for the zero element.
pub fn normalize(space: &ConcreteOpSpace, x: &Element) -> Option<Element> {
    let n = space.norm(x);
    (n > 0.0).then(|| x.scale(C64::new(1.0 / n, 0.0)))
}
