//! Detection of C*-algebras and recovery of their product.
//!
//! For unitaries `u, v` and `y` in the unit ball, a `z` in the ball with
//! `‖[[tu, y], [z, tv]]‖ ≤ √(t² + 1)` exists when `v y* u ∈ X`, and any such
//! `z` is within `1/t + 1/t²` of `−v y* u`. Taking `y = ι(w)` for a unitary
//! `w` gives the product `v ∘ w = v u* w` of the algebra with unit `u`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::assembly::BlockAssembly;
use crate::error::{invalid, precondition, Result};
use crate::hermit::delta_span;
use crate::matcore::{complex_rank, psd_sqrt, solve, CMat, C64, I, ONE, ZERO};
use crate::opspace::{AmplifiedElement, ConcreteOpSpace, Element};
use crate::report::{decide, BoundSide, CertificateReport, Exactness, SolverDiagnostics, Verdict};
use crate::solver::{minimize_over_ball, BallOptions, Geometry, MaxResidual, Objective, SolverConfig};
use crate::sysdetect::{ball_block, detect_operator_system, recovery_bound, CertifiedSystem, Recovered};
use crate::tro::{ambient_unitary_check, generate_tro, BlockMat, TroClosure, AMBIENT_TOL};

/// Rank cut for spans of unitaries.
const RANK_TOL: f64 = 1e-8;

/// `[[tu, y], [z, tv]]` with `z` the variable.
pub fn product_block<'a>(space: &'a ConcreteOpSpace, u: &Element, v: &Element, y: &Element, t: f64) -> BlockAssembly<'a> {
    let tc = C64::new(t, 0.0);
    let mut b = BlockAssembly::new(space, 2, 2, 1);
    b.add_constant(0, 0, u.coeffs(), tc)
        .add_constant(0, 1, y.coeffs(), ONE)
        .link(1, 0, 0, ONE)
        .add_constant(1, 1, v.coeffs(), tc);
    b
}

/// Recovers `v y* u` as `−z` at a single `t`. The residual is positive
/// (the product escapes `X`) when no `z` in the ball is feasible.
pub fn recover_product(
    space: &ConcreteOpSpace,
    u: &Element,
    v: &Element,
    y: &Element,
    t: f64,
    cfg: &SolverConfig,
) -> Result<Recovered> {
    for (name, w) in [("u", u), ("v", v)] {
        let n = space.try_embed(w).map(|_| space.norm(w))?;
        if (n - 1.0).abs() > 1e-6 {
            return Err(precondition(format!("‖{name}‖ = {n}, a unitary has norm one")));
        }
    }
    let ny = space.try_embed(y).map(|_| space.norm(y))?;
    if ny > 1.0 + 1e-9 {
        return Err(precondition(format!("‖y‖ = {ny} exceeds 1")));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(invalid("t must be positive"));
    }
    let obj = MaxResidual {
        blocks: vec![(product_block(space, u, v, y, t), (t * t + 1.0).sqrt()), (ball_block(space), 1.0)],
        clip: true,
    };
    let geom = Geometry::new(space, 1);
    let opts = BallOptions { target: Some(0.0), penalized: true, ..Default::default() };
    let opt = minimize_over_ball(&obj, &geom, cfg, &opts)?;
    let residual = obj.value(&opt.params);
    let z = AmplifiedElement::from_params(1, space.dim(), &opt.params).cell(0, 0).clone();
    Ok(Recovered {
        element: z.scale_real(-1.0),
        residual,
        t,
        error_bound: recovery_bound(t, cfg.cert_tol),
        feasible: residual <= cfg.cert_tol,
        diagnostics: opt.diagnostics,
    })
}

fn product_report(name: String, r: &Recovered, cfg: &SolverConfig) -> CertificateReport {
    let verdict = decide(r.residual, cfg.cert_tol, cfg.fail_threshold, BoundSide::Upper, r.diagnostics.converged);
    let rep = CertificateReport::new(name, verdict, r.residual, cfg.cert_tol, BoundSide::Upper).with_diagnostics(r.diagnostics.clone());
    if verdict == Verdict::Fail {
        rep.note("product escapes X")
    } else {
        rep
    }
}

/// `x = (v1 + v2)/2` with `v1 = u(h + i√(1 − h²))`, `h = u* x`.
#[derive(Debug, Clone)]
pub struct UnitaryPair {
    /// Coefficients of the projections of `v1`, `v2` onto `X`.
    pub v1: Element,
    pub v2: Element,
    pub members: bool,
    pub report: CertificateReport,
}

fn require_unitary_blocks(closure: &TroClosure, u: &Element) -> Result<BlockMat> {
    let ub = closure.embed(u);
    let (co, iso) = closure.unitary_defects(&ub);
    if co.max(iso) > AMBIENT_TOL {
        return Err(precondition("u is not unitary in the generated TRO"));
    }
    Ok(ub)
}

/// Splits a `u`-hermitian contraction into two unitaries of the generated
/// TRO and checks whether they lie in `X`.
pub fn hermitian_to_unitaries(closure: &TroClosure, u: &Element, x: &Element) -> Result<UnitaryPair> {
    let space = closure.space();
    space.try_embed(x)?;
    let ub = require_unitary_blocks(closure, u)?;
    if space.norm(x) > 1.0 + 1e-9 {
        return Err(precondition("x must be a contraction"));
    }
    let xb = closure.embed(x);
    let h = ub.adjoint().mul(&xb);
    let skew = h.sub(&h.adjoint()).norm();
    if skew > AMBIENT_TOL.max(1e-8 * space.norm(x)) {
        return Err(precondition(format!("x is not u-hermitian (‖u*x − x*u‖ = {skew:.3e})")));
    }
    let e = ub.adjoint().mul(&ub);
    let mut blocks = Vec::with_capacity(h.blocks.len());
    for ((hb, eb), ubk) in h.blocks.iter().zip(&e.blocks).zip(&ub.blocks) {
        let hs = (hb + &hb.adjoint()).scale_real(0.5);
        let rest = eb - &hs.matmul(&hs)?;
        let rest = (&rest + &rest.adjoint()).scale_real(0.5);
        let s = psd_sqrt(&rest)?;
        blocks.push(ubk.matmul(&(&hs + &s.scale(I)))?);
    }
    let v1b = BlockMat { blocks };
    let m1 = space.membership(&closure.to_dense(&v1b))?;
    let v1 = m1.coeffs;
    let v2 = x.scale_real(2.0).sub(&v1);
    let tol = space.membership_tol();
    let scale = closure.to_dense(&v1b).frobenius_norm().max(1.0);
    let member = CertificateReport::new(
        "member",
        Verdict::from_bool(m1.member),
        m1.residual / scale,
        tol,
        BoundSide::Exact,
    )
    .with_exactness(closure.exactness());
    let mut parts = vec![member];
    if m1.member {
        let mut a = ambient_unitary_check(closure, &v1);
        a.check = "v1-unitary".into();
        let mut b = ambient_unitary_check(closure, &v2);
        b.check = "v2-unitary".into();
        parts.extend([a, b]);
    }
    let verdict = Verdict::all(parts.iter().map(|p| p.verdict));
    let report = CertificateReport::new("unitary-pair", verdict, parts.iter().map(|p| p.value).fold(0.0, f64::max), tol, BoundSide::Exact)
        .with_exactness(closure.exactness())
        .with_parts(parts);
    Ok(UnitaryPair { v1, v2, members: m1.member, report })
}

/// Unitaries of `X` collected from `u` and the pairs of its hermitian
/// basis, and whether they span `X`.
#[derive(Debug, Clone)]
pub struct UnitarySpan {
    pub unitaries: Vec<Element>,
    pub report: CertificateReport,
}

/// Passes iff `u` and the member unitaries built from a canonical basis of
/// the `u`-hermitians span `X`. A pass is conclusive; a fail only says the
/// construction found too few unitaries.
pub fn unitary_span_check(closure: &TroClosure, u: &Element, cfg: &SolverConfig) -> Result<UnitarySpan> {
    let space = closure.space();
    require_unitary_blocks(closure, u)?;
    let ds = delta_span(space, u, Some(closure), cfg)?;
    let mut unitaries = vec![u.clone()];
    let mut rejected = 0usize;
    for h in &ds.real_basis {
        let n = space.norm(h);
        if n == 0.0 {
            continue;
        }
        let pair = hermitian_to_unitaries(closure, u, &h.scale_real(1.0 / n))?;
        if pair.report.verdict.is_pass() {
            unitaries.push(pair.v1);
            unitaries.push(pair.v2);
        } else {
            rejected += 1;
        }
    }
    let vectors: Vec<Vec<C64>> = unitaries.iter().map(|e| e.0.clone()).collect();
    let rank = complex_rank(&vectors, RANK_TOL);
    let d = space.dim();
    let missing = (d - rank.min(d)) as f64;
    let verdict = Verdict::from_bool(rank == d);
    let exactness = if verdict.is_pass() { closure.exactness() } else { Exactness::SufficientOnly };
    let report = CertificateReport::new("unitary-span", verdict, missing, 0.5, BoundSide::Exact)
        .with_exactness(exactness)
        .note(format!("{} member unitaries of rank {rank} (dimension {d}); {rejected} hermitians gave non-members", unitaries.len()));
    Ok(UnitarySpan { unitaries, report })
}

/// Structure constants of a recovered C*-algebra on the basis of `X`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductTable {
    pub dim: usize,
    pub unit: Element,
    /// Unitaries `w_l` forming a basis of `X`.
    pub unitaries: Vec<Element>,
    /// `products[i][j] = b_i ∘ b_j` for the basis `b` of `X`.
    pub products: Vec<Vec<Element>>,
    /// `involutions[k] = ι(b_k)`.
    pub involutions: Vec<Element>,
    /// Largest residual among the underlying recoveries.
    pub residual: f64,
    /// Error bound of each recovery (`1/t + 1/t² + tol`).
    pub error_bound: f64,
}

impl ProductTable {
    /// Bilinear extension of the table.
    pub fn product(&self, x: &Element, y: &Element) -> Element {
        let mut out = vec![ZERO; self.dim];
        for (i, a) in x.coeffs().iter().enumerate() {
            for (j, b) in y.coeffs().iter().enumerate() {
                let c = a * b;
                if c == ZERO {
                    continue;
                }
                for (o, p) in out.iter_mut().zip(self.products[i][j].coeffs()) {
                    *o += c * p;
                }
            }
        }
        Element(out)
    }

    /// Conjugate-linear extension of the recovered involution.
    pub fn involution(&self, x: &Element) -> Element {
        let mut out = vec![ZERO; self.dim];
        for (a, img) in x.coeffs().iter().zip(&self.involutions) {
            for (o, p) in out.iter_mut().zip(img.coeffs()) {
                *o += a.conj() * p;
            }
        }
        Element(out)
    }
}

/// A recovered C*-algebra structure on `X`.
#[derive(Debug, Clone)]
pub struct CstarStructure<'a> {
    pub space: &'a ConcreteOpSpace,
    pub table: ProductTable,
}

impl CstarStructure<'_> {
    pub fn product(&self, x: &Element, y: &Element) -> Element {
        self.table.product(x, y)
    }

    pub fn involution(&self, x: &Element) -> Element {
        self.table.involution(x)
    }

    /// Unit law on the basis, associativity on basis triples and the
    /// C*-identity `‖ι(x)∘x‖ = ‖x‖²` on seeded random samples.
    pub fn validate(&self, samples: usize, seed: u64, tol: f64) -> CertificateReport {
        let d = self.table.dim;
        let s = self.space;
        let basis: Vec<Element> = (0..d).map(|k| Element::basis(d, k)).collect();
        let u = &self.table.unit;
        let mut unit_err = 0.0f64;
        for b in &basis {
            unit_err = unit_err.max(s.norm(&self.product(u, b).sub(b))).max(s.norm(&self.product(b, u).sub(b)));
        }
        let mut assoc = 0.0f64;
        for a in &basis {
            for b in &basis {
                let ab = self.product(a, b);
                for c in &basis {
                    let l = self.product(&ab, c);
                    let r = self.product(a, &self.product(b, c));
                    assoc = assoc.max(s.norm(&l.sub(&r)));
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cstar = 0.0f64;
        for _ in 0..samples {
            let x = Element((0..d).map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))).collect());
            let x = x.scale_real(1.0 / s.norm(&x));
            cstar = cstar.max((s.norm(&self.product(&self.involution(&x), &x)) - 1.0).abs());
        }
        let part = |name: &str, v: f64| CertificateReport::new(name, Verdict::from_bool(v <= tol), v, tol, BoundSide::Exact);
        let parts = vec![part("unit-law", unit_err), part("associativity", assoc), part("cstar-identity", cstar)];
        let worst = unit_err.max(assoc).max(cstar);
        CertificateReport::new("cstar-structure", Verdict::all(parts.iter().map(|p| p.verdict)), worst, tol, BoundSide::Exact)
            .with_exactness(Exactness::Numerical)
            .with_parts(parts)
    }
}

/// Outcome of [`detect_cstar`]; the structure is present when every step
/// passed.
#[derive(Debug, Clone)]
pub struct CstarDetection<'a> {
    pub report: CertificateReport,
    pub structure: Option<CstarStructure<'a>>,
}

fn independent_subset(items: &[Element], d: usize) -> Vec<Element> {
    let mut out: Vec<Element> = Vec::new();
    for w in items {
        let mut trial: Vec<Vec<C64>> = out.iter().map(|e| e.0.clone()).collect();
        trial.push(w.0.clone());
        if complex_rank(&trial, RANK_TOL) == trial.len() {
            out.push(w.clone());
        }
        if out.len() == d {
            break;
        }
    }
    out
}

fn into_ball(space: &ConcreteOpSpace, y: Element) -> Element {
    let n = space.norm(&y);
    if n > 1.0 {
        y.scale_real(1.0 / n)
    } else {
        y
    }
}

/// Operator system, spanned by unitaries, closed under the recovered
/// products; then assembles and validates the product table.
pub fn detect_cstar<'a>(space: &'a ConcreteOpSpace, u: &Element, cfg: &SolverConfig) -> Result<CstarDetection<'a>> {
    cfg.validate()?;
    let d = space.dim();
    let closure = generate_tro(space)?;
    let system = detect_operator_system(space, u, Some(&closure), cfg)?;
    let mut parts = vec![system.clone()];
    let stop = |parts: Vec<CertificateReport>, verdict: Verdict| {
        let value = parts.last().map_or(0.0, |p| p.value);
        Ok(CstarDetection {
            report: CertificateReport::new("cstar", verdict, value, cfg.cert_tol, BoundSide::Upper).with_parts(parts),
            structure: None,
        })
    };
    if !system.verdict.is_pass() {
        return stop(parts, system.verdict);
    }
    let span = unitary_span_check(&closure, u, cfg)?;
    parts.push(span.report.clone());
    if !span.report.verdict.is_pass() {
        return stop(parts, span.report.verdict);
    }
    let t = cfg.t_large;
    let mut closure_parts = Vec::new();
    let mut worst: Option<(f64, Element)> = None;
    let mut diag = SolverDiagnostics { converged: true, ..Default::default() };
    for (l, v) in span.unitaries.iter().enumerate() {
        for k in 0..d {
            let Some(y) = crate::certify::normalize(space, &Element::basis(d, k)) else { continue };
            let r = recover_product(space, u, v, &y, t, cfg)?;
            diag.merge(&r.diagnostics);
            if worst.as_ref().is_none_or(|w| r.residual > w.0) {
                worst = Some((r.residual, y.clone()));
            }
            closure_parts.push(product_report(format!("product-{l}-{k}"), &r, cfg));
        }
    }
    let (wv, wy) = worst.expect("at least one product");
    let verdict = Verdict::all(closure_parts.iter().map(|p| p.verdict));
    let closed = CertificateReport::new("product-closure", verdict, wv, cfg.cert_tol, BoundSide::Upper)
        .with_witness(AmplifiedElement::diagonal(&[wy]))
        .with_diagnostics(diag)
        .with_parts(closure_parts);
    parts.push(closed);
    if !verdict.is_pass() {
        return stop(parts, verdict);
    }

    let sys = CertifiedSystem::from_report(space, u, system)?;
    let w = independent_subset(&span.unitaries, d);
    if w.len() < d {
        return Err(invalid("unitary span lost rank"));
    }
    let mut residual = 0.0f64;
    let mut iota_w = Vec::with_capacity(d);
    for wm in &w {
        let r = sys.recover_involution(wm, t, cfg)?;
        residual = residual.max(r.residual);
        iota_w.push(into_ball(space, r.element));
    }
    // pw[l][m] = w_l ∘ w_m = w_l u* w_m
    let mut pw = vec![vec![Element::zero(d); d]; d];
    for (l, wl) in w.iter().enumerate() {
        for (m, iw) in iota_w.iter().enumerate() {
            let r = recover_product(space, u, wl, iw, t, cfg)?;
            residual = residual.max(r.residual);
            pw[l][m] = r.element;
        }
    }
    // b_i = Σ_l alpha[l][i] w_l
    let wmat = CMat::from_fn(d, d, |k, l| w[l].0[k]);
    let alpha = solve(&wmat, &CMat::identity(d))?;
    let mut products = vec![vec![Element::zero(d); d]; d];
    for (i, row) in products.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let mut acc = Element::zero(d);
            for l in 0..d {
                for m in 0..d {
                    let c = alpha[(l, i)] * alpha[(m, j)];
                    if c != ZERO {
                        acc = acc.add(&pw[l][m].scale(c));
                    }
                }
            }
            *cell = acc;
        }
    }
    let involutions: Vec<Element> = (0..d)
        .map(|i| {
            let mut acc = Element::zero(d);
            for (l, iw) in iota_w.iter().enumerate() {
                acc = acc.add(&iw.scale(alpha[(l, i)].conj()));
            }
            acc
        })
        .collect();
    let table = ProductTable { dim: d, unit: u.clone(), unitaries: w, products, involutions, residual, error_bound: recovery_bound(t, cfg.cert_tol) };
    let structure = CstarStructure { space, table };
    let valid = structure.validate(20, cfg.seed, cfg.product_tol);
    parts.push(valid.clone());
    let verdict = valid.verdict;
    Ok(CstarDetection {
        report: CertificateReport::new("cstar", verdict, valid.value, cfg.product_tol, BoundSide::Upper).with_parts(parts),
        structure: verdict.is_pass().then_some(structure),
    })
}
