//! `u`-hermitian and `u`-positive elements and the space `Δᵘ` they span.
//!
//! An element `x` is `u`-hermitian iff `‖u + itx‖² ≤ 1 + t²‖x‖²` for all real
//! `t`; for `‖x‖ ≤ 1` the matricial test `‖[[tu, x], [−x, tu]]‖ ≤ √(t² + 1)`
//! is equivalent. Both are evaluated on a finite grid of `t`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::assembly::BlockAssembly;
use crate::error::{precondition, Result};
use crate::matcore::{complex_rank, herm_eigen_vectors, real_null_space, rref_real, CMat, C64, I, ONE, ZERO};
use crate::opspace::{ConcreteOpSpace, Element};
use crate::report::{BoundSide, CertificateReport, Exactness, Verdict};
use crate::solver::SolverConfig;
use crate::tro::{TroClosure, AMBIENT_TOL};

/// Squared singular values of `u` above `1 − ATTAIN_TOL` count as norm
/// attaining.
const ATTAIN_TOL: f64 = 1e-9;
/// Relative cut for the exact linear solve.
const SOLVE_TOL: f64 = 1e-8;

/// Slacks of both hermitian criteria on the `t` grid. Negative slack means
/// the criterion is violated at that `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermitianProfile {
    /// `(t, 1 + t²‖x‖² − ‖u + itx‖²)` for `±t`, scaled by `1 + t²‖x‖²`.
    pub scalar: Vec<(f64, f64)>,
    /// `(t, √(t²+1) − ‖[[tu, x], [−x, tu]]‖)` for the (possibly rescaled) `x`.
    pub matricial: Vec<(f64, f64)>,
    /// `x` was scaled into the unit ball before the matricial test.
    pub rescaled: bool,
    pub min_slack: f64,
    pub verdict: Verdict,
}

impl HermitianProfile {
    pub fn to_report(&self, tol: f64) -> CertificateReport {
        CertificateReport::new("hermitian", self.verdict, (-self.min_slack).max(0.0), tol, BoundSide::Exact)
            .with_exactness(Exactness::Numerical)
    }
}

fn matricial_block<'a>(space: &'a ConcreteOpSpace, u: &Element, x: &Element, t: f64) -> BlockAssembly<'a> {
    let mut b = BlockAssembly::new(space, 2, 2, 0);
    let tu = C64::new(t, 0.0);
    b.add_constant(0, 0, u.coeffs(), tu)
        .add_constant(0, 1, x.coeffs(), ONE)
        .add_constant(1, 0, x.coeffs(), -ONE)
        .add_constant(1, 1, u.coeffs(), tu);
    b
}

/// Evaluates both hermitian criteria of `x` on `cfg.t_grid`.
pub fn is_u_hermitian(space: &ConcreteOpSpace, u: &Element, x: &Element, cfg: &SolverConfig) -> Result<HermitianProfile> {
    space.try_embed(u)?;
    space.try_embed(x)?;
    let nx = space.norm(x);
    let mut scalar = Vec::new();
    for &t in &cfg.t_grid {
        for s in [t, -t] {
            let e = u.add(&x.scale(C64::new(0.0, s)));
            let n = space.norm(&e);
            let rhs = 1.0 + s * s * nx * nx;
            scalar.push((s, (rhs - n * n) / rhs));
        }
    }
    let rescaled = nx > 1.0;
    let xb = if rescaled { x.scale_real(1.0 / nx) } else { x.clone() };
    let matricial: Vec<(f64, f64)> = cfg
        .t_grid
        .iter()
        .map(|&t| (t, (t * t + 1.0).sqrt() - matricial_block(space, u, &xb, t).value(&[])))
        .collect();
    let min_slack = scalar.iter().chain(&matricial).map(|p| p.1).fold(f64::INFINITY, f64::min);
    let verdict = Verdict::from_bool(min_slack >= -cfg.hermitian_tol);
    Ok(HermitianProfile { scalar, matricial, rescaled, min_slack, verdict })
}

/// `x` is `u`-positive iff it is `u`-hermitian and `‖ ‖x‖u − x ‖ ≤ ‖x‖`.
/// Inside the unit ball `‖u − x‖ ≤ 1` is checked as well.
pub fn is_u_positive(space: &ConcreteOpSpace, u: &Element, x: &Element, cfg: &SolverConfig) -> Result<CertificateReport> {
    let tol = cfg.hermitian_tol;
    let nx = space.norm(x);
    if nx == 0.0 {
        space.try_embed(u)?;
        return Ok(CertificateReport::new("positive", Verdict::Pass, 0.0, tol, BoundSide::Exact).note("x = 0"));
    }
    let herm = is_u_hermitian(space, u, x, cfg)?.to_report(tol);
    let gap = space.norm(&u.scale_real(nx).sub(x)) - nx;
    let mut parts = vec![
        herm,
        CertificateReport::new("order-unit", Verdict::from_bool(gap <= tol * nx.max(1.0)), gap.max(0.0), tol, BoundSide::Exact),
    ];
    if nx <= 1.0 {
        let ball = space.norm(&u.sub(x)) - 1.0;
        parts.push(CertificateReport::new("ball", Verdict::from_bool(ball <= tol), ball.max(0.0), tol, BoundSide::Exact));
    }
    let verdict = Verdict::all(parts.iter().map(|p| p.verdict));
    let value = parts.iter().map(|p| p.value).fold(0.0, f64::max);
    Ok(CertificateReport::new("positive", verdict, value, tol, BoundSide::Exact)
        .with_exactness(Exactness::Numerical)
        .with_parts(parts))
}

/// A real basis of the `u`-hermitians and a complex basis of `Δᵘ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSpan {
    /// Canonical (row-reduced in real coordinates) basis of the hermitians.
    pub real_basis: Vec<Element>,
    /// Independent subset of `real_basis` spanning `Δᵘ` over `C`.
    pub complex_basis: Vec<Element>,
    pub exactness: Exactness,
}

impl DeltaSpan {
    pub fn real_dim(&self) -> usize {
        self.real_basis.len()
    }

    pub fn complex_dim(&self) -> usize {
        self.complex_basis.len()
    }
}

fn to_elements(real: Vec<Vec<f64>>) -> Vec<Element> {
    rref_real(&real, 1e-10)
        .into_iter()
        .map(|v| Element(v.chunks(2).map(|p| C64::new(p[0], p[1])).collect()))
        .collect()
}

fn finish(real_basis: Vec<Element>, exactness: Exactness) -> DeltaSpan {
    let mut complex_basis: Vec<Element> = Vec::new();
    for h in &real_basis {
        let mut trial: Vec<Vec<C64>> = complex_basis.iter().map(|e| e.0.clone()).collect();
        trial.push(h.0.clone());
        if complex_rank(&trial, SOLVE_TOL) == trial.len() {
            complex_basis.push(h.clone());
        }
    }
    DeltaSpan { real_basis, complex_basis, exactness }
}

/// Solves `x*u = u*x` for `x ∈ X` as a real-linear system, blockwise in
/// the generated TRO.
pub fn delta_span_ambient(closure: &TroClosure, u: &Element) -> Result<DeltaSpan> {
    let space = closure.space();
    let ub = closure.embed(u);
    let (co, iso) = closure.unitary_defects(&ub);
    if co.max(iso) > AMBIENT_TOL {
        return Err(precondition("u is not unitary in the generated TRO"));
    }
    let d = space.dim();
    // x = Σ (a_k + i b_k) B_k; columns 2k and 2k+1 of the system
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(2 * d);
    for k in 0..d {
        let bk = closure.embed(&Element::basis(d, k));
        let bu = bk.adjoint().mul(&ub);
        let ub_k = ub.adjoint().mul(&bk);
        let a = bu.sub(&ub_k);
        let b = bu.add(&ub_k).scale(-I);
        for m in [a, b] {
            columns.push(m.blocks.iter().flat_map(|blk| blk.as_slice().iter().flat_map(|z| [z.re, z.im])).collect());
        }
    }
    let n_rows = columns[0].len();
    let rows: Vec<Vec<f64>> = (0..n_rows).map(|r| columns.iter().map(|c| c[r]).collect()).collect();
    let null = real_null_space(&rows, 2 * d, SOLVE_TOL);
    Ok(finish(to_elements(null), closure.exactness()))
}

/// Norm-only route. The one-sided derivative
/// `N(x) = lim (‖u − iτx‖ − ‖u‖)/τ` (τ → 0+) is a seminorm vanishing
/// exactly on the hermitians. At a generic `x` it is differentiable with
/// gradient `y ↦ Im(b* u* y b)`, `b` the top eigenvector of the
/// skew part of `u* x` on the norm-attaining subspace of `u`. Gradients at
/// random points span the annihilator of the kernel; the kernel is then
/// filtered through [`is_u_hermitian`].
pub fn delta_span_intrinsic(space: &ConcreteOpSpace, u: &Element, cfg: &SolverConfig) -> Result<DeltaSpan> {
    let d = space.dim();
    let nu = space.norm(u);
    if (nu - 1.0).abs() > cfg.cert_tol {
        return Err(precondition(format!("‖u‖ = {nu}, expected 1")));
    }
    let comps = space.components();
    // norm-attaining subspace of u in each component
    let mut attain = Vec::with_capacity(comps.len());
    for c in comps {
        let uc = c.embed(u.coeffs());
        let (vals, vecs) = herm_eigen_vectors(&uc.adjoint().matmul(&uc)?)?;
        let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] >= 1.0 - ATTAIN_TOL).collect();
        let v = CMat::from_fn(vecs.rows(), keep.len(), |r, j| vecs[(r, keep[j])]);
        attain.push((uc, v));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    for _ in 0..8 * d {
        let x = Element((0..d).map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))).collect());
        let mut best: Option<(f64, usize, Vec<C64>)> = None;
        for (ci, (c, (uc, v))) in comps.iter().zip(&attain).enumerate() {
            if v.cols() == 0 {
                continue;
            }
            let ux = uc.adjoint().matmul(&c.embed(x.coeffs()))?;
            let k = v.adjoint().matmul(&ux)?.matmul(v)?;
            let skew = (&k - &k.adjoint()).scale(C64::new(0.0, -0.5));
            let (vals, vecs) = herm_eigen_vectors(&skew)?;
            let top = vals.len() - 1;
            if best.as_ref().is_none_or(|b| vals[top] > b.0) {
                let cvec = vecs.select(&(0..vecs.rows()).collect::<Vec<_>>(), &[top]);
                best = Some((vals[top], ci, v.matmul(&cvec)?.into_vec()));
            }
        }
        let Some((_, ci, b)) = best else { break };
        let (uc, _) = &attain[ci];
        let ub: Vec<C64> = (0..uc.rows()).map(|r| (0..uc.cols()).map(|j| uc[(r, j)] * b[j]).sum()).collect();
        let mut row = Vec::with_capacity(2 * d);
        for bk in &comps[ci].basis {
            let mut w = ZERO;
            for r in 0..bk.rows() {
                for j in 0..bk.cols() {
                    w += ub[r].conj() * bk[(r, j)] * b[j];
                }
            }
            // y = Σ (a_k + i b_k) B_k ↦ Im(Σ (a_k + i b_k) w_k)
            row.push(w.im);
            row.push(w.re);
        }
        rows.push(row);
    }
    let null = real_null_space(&rows, 2 * d, SOLVE_TOL);
    let mut kept = Vec::new();
    for h in to_elements(null) {
        let nh = space.norm(&h);
        if nh > 0.0 && is_u_hermitian(space, u, &h.scale_real(1.0 / nh), cfg)?.verdict.is_pass() {
            kept.push(h);
        }
    }
    Ok(finish(kept, Exactness::Numerical))
}

/// Ambient route when the closure is envelope-exact, norm-only otherwise.
pub fn delta_span(space: &ConcreteOpSpace, u: &Element, closure: Option<&TroClosure>, cfg: &SolverConfig) -> Result<DeltaSpan> {
    match closure {
        Some(c) if c.envelope_exact() => delta_span_ambient(c, u),
        _ => delta_span_intrinsic(space, u, cfg),
    }
}

/// `(X, u)` is an operator system iff the hermitians span `X`.
pub fn operator_system_check(
    space: &ConcreteOpSpace,
    u: &Element,
    closure: Option<&TroClosure>,
    cfg: &SolverConfig,
) -> Result<CertificateReport> {
    let ds = delta_span(space, u, closure, cfg)?;
    let d = space.dim();
    let missing = (d - ds.complex_dim()) as f64;
    Ok(CertificateReport::new("hermitian-span", Verdict::from_bool(missing == 0.0), missing, 0.5, BoundSide::Exact)
        .with_exactness(ds.exactness)
        .note(format!("hermitians: real dimension {}, complex span {} of {d}", ds.real_dim(), ds.complex_dim())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::catalog;
    use crate::opspace::make_space;
    use crate::tro::generate_tro;

    fn m2() -> ConcreteOpSpace {
        make_space(
            vec![CMat::identity(2), CMat::unit(2, 2, 0, 1), CMat::unit(2, 2, 1, 0), CMat::unit(2, 2, 1, 1)],
            Some(Element::basis(4, 0)),
        )
        .unwrap()
    }

    #[test]
    fn hermitian_examples() {
        let s = m2();
        let u = Element::basis(4, 0);
        let cfg = SolverConfig::default();
        // E12 + E21
        let h = Element(vec![ZERO, ONE, ONE, ZERO]);
        assert!(is_u_hermitian(&s, &u, &h, &cfg).unwrap().verdict.is_pass());
        let e12 = Element::basis(4, 1);
        assert_eq!(is_u_hermitian(&s, &u, &e12, &cfg).unwrap().verdict, Verdict::Fail);
        // rescaled: 2(E12 + E21)
        let p = is_u_hermitian(&s, &u, &h.scale_real(2.0), &cfg).unwrap();
        assert!(p.rescaled && p.verdict.is_pass());
    }

    #[test]
    fn positive_examples() {
        let s = m2();
        let u = Element::basis(4, 0);
        let cfg = SolverConfig::default();
        // E22 ⪰ 0, −E22 is not
        assert!(is_u_positive(&s, &u, &Element::basis(4, 3), &cfg).unwrap().verdict.is_pass());
        assert_eq!(is_u_positive(&s, &u, &Element::basis(4, 3).scale_real(-1.0), &cfg).unwrap().verdict, Verdict::Fail);
        assert!(is_u_positive(&s, &u, &Element::zero(4), &cfg).unwrap().verdict.is_pass());
    }

    #[test]
    fn delta_dims_m2() {
        let s = m2();
        let u = Element::basis(4, 0);
        let c = generate_tro(&s).unwrap();
        let cfg = SolverConfig::default();
        let a = delta_span_ambient(&c, &u).unwrap();
        assert_eq!((a.real_dim(), a.complex_dim()), (4, 4));
        let b = delta_span_intrinsic(&s, &u, &cfg).unwrap();
        assert_eq!((b.real_dim(), b.complex_dim()), (4, 4));
        assert!(operator_system_check(&s, &u, Some(&c), &cfg).unwrap().verdict.is_pass());
    }

    #[test]
    fn delta_dims_upper() {
        let s = make_space(vec![CMat::identity(2), CMat::unit(2, 2, 0, 1)], Some(Element::basis(2, 0))).unwrap();
        let u = Element::basis(2, 0);
        let c = generate_tro(&s).unwrap();
        let cfg = SolverConfig::default();
        let a = delta_span_ambient(&c, &u).unwrap();
        assert_eq!((a.real_dim(), a.complex_dim()), (1, 1));
        let b = delta_span_intrinsic(&s, &u, &cfg).unwrap();
        assert_eq!((b.real_dim(), b.complex_dim()), (1, 1));
        assert_eq!(operator_system_check(&s, &u, Some(&c), &cfg).unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn circle_with_z_unit() {
        let s = catalog("circle-1zz̄", 360).unwrap().to_opspace().unwrap();
        let z = Element::basis(3, 1);
        let c = generate_tro(&s).unwrap();
        let cfg = SolverConfig::default();
        let a = delta_span_ambient(&c, &z).unwrap();
        assert_eq!(a.real_dim(), 1);
        // the span is R z
        assert!(a.real_basis[0].0[0].norm() < 1e-9 && a.real_basis[0].0[2].norm() < 1e-9);
        let b = delta_span_intrinsic(&s, &z, &cfg).unwrap();
        assert_eq!(b.real_dim(), 1);
    }

    #[test]
    fn rejects_non_unitary() {
        let s = m2();
        let c = generate_tro(&s).unwrap();
        assert!(matches!(delta_span_ambient(&c, &Element::basis(4, 1)), Err(crate::Error::Precondition(_))));
    }
}
