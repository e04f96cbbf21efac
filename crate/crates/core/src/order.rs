//! Cones in a unital space: membership, norm-order units and comparison
//! with the cone `Δᵘ₊` of `u`-positive elements.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hermit::delta_span;
use crate::matcore::{herm_eigen, solve, CMat, C64};
use crate::opspace::{AmplifiedElement, ConcreteOpSpace, Element};
use crate::report::{BoundSide, CertificateReport, Exactness, Verdict};
use crate::solver::SolverConfig;
use crate::tro::{TroClosure, AMBIENT_TOL};

/// KKT stationarity required of an NNLS solution.
pub const NNLS_STATIONARITY: f64 = 1e-8;
/// Default number of samples drawn from `Δᵘ₊`.
pub const DEFAULT_CONE_SAMPLES: usize = 200;
/// A later sample replaces the witness only if worse by this much.
const WITNESS_TIE: f64 = 1e-9;

/// A finitely generated cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub generators: Vec<Element>,
}

impl Cone {
    pub fn new(generators: Vec<Element>) -> Self {
        Cone { generators }
    }

    /// The cone without generator `i`.
    pub fn without(&self, i: usize) -> Cone {
        let mut g = self.generators.clone();
        g.remove(i);
        Cone { generators: g }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeMembership {
    pub coefficients: Vec<f64>,
    /// `min_{λ ≥ 0} ‖Σ λ_i g_i − x‖_F`.
    pub residual: f64,
    /// Largest KKT violation of the returned coefficients.
    pub stationarity: f64,
    pub member: bool,
}

fn real_vec(m: &CMat) -> Vec<f64> {
    m.as_slice().iter().flat_map(|z| [z.re, z.im]).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lawson–Hanson active set NNLS on columns `cols` and target `b`.
fn nnls(cols: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let k = cols.len();
    let mut lambda = vec![0.0; k];
    let mut passive = vec![false; k];
    let mut blocked = vec![false; k];
    let scale = cols.iter().map(|c| dot(c, c).sqrt()).fold(dot(b, b).sqrt(), f64::max).max(1.0);
    let tol = 1e-12 * scale * scale;
    let residual = |lam: &[f64]| -> Vec<f64> {
        let mut r = b.to_vec();
        for (c, l) in cols.iter().zip(lam) {
            if *l != 0.0 {
                r.iter_mut().zip(c).for_each(|(ri, ci)| *ri -= l * ci);
            }
        }
        r
    };
    let ls = |set: &[usize]| -> Result<Vec<f64>> {
        let n = set.len();
        let q = CMat::from_fn(n, n, |i, j| C64::new(dot(&cols[set[i]], &cols[set[j]]), 0.0));
        let rhs = CMat::from_fn(n, 1, |i, _| C64::new(dot(&cols[set[i]], b), 0.0));
        Ok(solve(&q, &rhs)?.as_slice().iter().map(|z| z.re).collect())
    };
    for _outer in 0..(3 * k + 10) {
        let r = residual(&lambda);
        let w: Vec<f64> = cols.iter().map(|c| dot(c, &r)).collect();
        let Some(j) = (0..k).filter(|&j| !passive[j] && !blocked[j] && w[j] > tol).max_by(|&a, &b| w[a].total_cmp(&w[b])) else {
            break;
        };
        passive[j] = true;
        for _inner in 0..(3 * k + 10) {
            let set: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let z = match ls(&set) {
                Ok(z) => z,
                Err(_) => {
                    // dependent column: drop it again
                    passive[j] = false;
                    blocked[j] = true;
                    break;
                }
            };
            if z.iter().all(|&v| v > 0.0) {
                lambda.iter_mut().for_each(|l| *l = 0.0);
                for (&i, &v) in set.iter().zip(&z) {
                    lambda[i] = v;
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (&i, &v) in set.iter().zip(&z) {
                if v <= 0.0 {
                    alpha = alpha.min(lambda[i] / (lambda[i] - v));
                }
            }
            for (&i, &v) in set.iter().zip(&z) {
                lambda[i] += alpha * (v - lambda[i]);
                if lambda[i] <= 1e-15 * scale {
                    lambda[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    Ok(lambda)
}

/// Projects `x` onto the cone in the Frobenius norm of the ambient
/// matrices; member iff the residual is within the space's membership
/// tolerance.
pub fn cone_membership(space: &ConcreteOpSpace, cone: &Cone, x: &Element) -> Result<ConeMembership> {
    let target = real_vec(&space.try_embed(x)?);
    let cols: Vec<Vec<f64>> = cone.generators.iter().map(|g| space.try_embed(g).map(|m| real_vec(&m))).collect::<Result<_>>()?;
    let lambda = nnls(&cols, &target)?;
    let mut r = target.clone();
    for (c, l) in cols.iter().zip(&lambda) {
        r.iter_mut().zip(c).for_each(|(ri, ci)| *ri -= l * ci);
    }
    let residual = dot(&r, &r).sqrt();
    // KKT: λ ≥ 0, gradient Gᵀr ≤ 0 off the support and = 0 on it
    let stationarity = cols
        .iter()
        .zip(&lambda)
        .map(|(c, &l)| {
            let g = dot(c, &r);
            if l > 0.0 {
                g.abs()
            } else {
                g.max(0.0)
            }
        })
        .fold(0.0, f64::max);
    let scale = dot(&target, &target).sqrt().max(1.0);
    Ok(ConeMembership { coefficients: lambda, residual, stationarity, member: residual <= space.membership_tol() * scale })
}

fn hermitian_samples(space: &ConcreteOpSpace, basis: &[Element], samples: usize, seed: u64) -> Vec<Element> {
    let mut out = Vec::new();
    for h in basis.iter().filter(|h| space.norm(h) > 0.0) {
        let h = h.scale_real(1.0 / space.norm(h));
        out.push(h.scale_real(-1.0));
        out.push(h);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = space.dim();
    for _ in 0..samples {
        let mut x = Element::zero(d);
        for h in basis {
            let c: f64 = StandardNormal.sample(&mut rng);
            x = x.add(&h.scale_real(c));
        }
        let n = space.norm(&x);
        if n > 0.0 {
            out.push(x.scale_real(1.0 / n));
        }
    }
    out
}

fn worst_report(name: &str, worst: Option<(f64, Element)>, tol: f64) -> CertificateReport {
    match worst {
        Some((v, w)) => CertificateReport::new(name, Verdict::from_bool(v <= tol), v, tol, BoundSide::Exact)
            .with_witness(AmplifiedElement::diagonal(&[w])),
        None => CertificateReport::new(name, Verdict::Pass, 0.0, tol, BoundSide::Exact),
    }
}

/// `u ∈ 𝔠` and `‖x‖u − x ∈ 𝔠` for the elements of `hermitian_basis`
/// (normalized, both signs) and `samples` seeded random real combinations.
pub fn norm_order_unit_check(
    space: &ConcreteOpSpace,
    cone: &Cone,
    u: &Element,
    hermitian_basis: &[Element],
    samples: usize,
    seed: u64,
) -> Result<CertificateReport> {
    let tol = space.membership_tol();
    let mu = cone_membership(space, cone, u)?;
    let unit = worst_report("unit-in-cone", Some((mu.residual, u.clone())), tol);
    let mut worst: Option<(f64, Element)> = None;
    for x in hermitian_samples(space, hermitian_basis, samples, seed) {
        let w = u.scale_real(space.norm(&x)).sub(&x);
        let m = cone_membership(space, cone, &w)?;
        let rel = m.residual / space.embed(&w).frobenius_norm().max(1.0);
        if worst.as_ref().is_none_or(|b| rel > b.0 + WITNESS_TIE) {
            worst = Some((rel, x));
        }
    }
    let shifted = worst_report("shifted-in-cone", worst, tol);
    let parts = vec![unit, shifted];
    let verdict = Verdict::all(parts.iter().map(|p| p.verdict));
    let value = parts.iter().map(|p| p.value).fold(0.0, f64::max);
    let witness = parts.iter().filter(|p| !p.verdict.is_pass()).find_map(|p| p.witness.clone());
    let mut rep = CertificateReport::new("norm-order-unit", verdict, value, tol, BoundSide::Exact)
        .with_exactness(Exactness::Numerical)
        .with_parts(parts);
    rep.witness = witness;
    Ok(rep)
}

/// Smallest eigenvalue of the hermitian part of `u* x` over all blocks,
/// together with the size of its skew part.
fn positivity(closure: &TroClosure, u: &Element, x: &Element) -> Result<(f64, f64)> {
    let ub = closure.embed(u);
    let a = ub.adjoint().mul(&closure.embed(x));
    let skew = a.sub(&a.adjoint()).norm();
    let mut lmin = f64::INFINITY;
    for b in &a.blocks {
        if b.rows() == 0 {
            continue;
        }
        let h = (b + &b.adjoint()).scale_real(0.5);
        lmin = lmin.min(herm_eigen(&h)?[0]);
    }
    Ok((lmin, skew))
}

/// Compares the cone with `Δᵘ₊` through the ambient oracle `u* x ⪰ 0`:
/// every generator must be positive, and `samples` seeded boundary points
/// of `Δᵘ₊` must lie in the cone (NNLS residual).
pub fn cone_equals_delta_plus(
    closure: &TroClosure,
    cone: &Cone,
    u: &Element,
    samples: usize,
    cfg: &SolverConfig,
) -> Result<CertificateReport> {
    let space = closure.space();
    let ub = closure.embed(u);
    let (co, iso) = closure.unitary_defects(&ub);
    if co.max(iso) > AMBIENT_TOL {
        return Err(crate::error::precondition("u is not unitary in the generated TRO"));
    }
    if samples == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let tol = space.membership_tol();
    let mut worst_gen: Option<(f64, Element)> = None;
    for g in &cone.generators {
        let (lmin, skew) = positivity(closure, u, g)?;
        let scale = space.norm(g).max(1.0);
        let bad = ((-lmin).max(0.0)).max(skew) / scale;
        if worst_gen.as_ref().is_none_or(|b| bad > b.0) {
            worst_gen = Some((bad, g.clone()));
        }
    }
    let inside = worst_report("cone-in-positive", worst_gen, AMBIENT_TOL);

    let ds = delta_span(space, u, Some(closure), cfg)?;
    let mut worst: Option<(f64, Element)> = None;
    for h in hermitian_samples(space, &ds.real_basis, samples, cfg.seed ^ 0xc0de) {
        let (lmin, _) = positivity(closure, u, &h)?;
        let x = h.sub(&u.scale_real(lmin));
        let n = space.norm(&x);
        if n <= AMBIENT_TOL {
            continue;
        }
        let x = x.scale_real(1.0 / n);
        let m = cone_membership(space, cone, &x)?;
        if worst.as_ref().is_none_or(|b| m.residual > b.0 + WITNESS_TIE) {
            worst = Some((m.residual, x));
        }
    }
    let covers = worst_report("positive-in-cone", worst, tol);
    let parts = vec![inside, covers];
    let verdict = Verdict::all(parts.iter().map(|p| p.verdict));
    let value = parts.iter().map(|p| p.value).fold(0.0, f64::max);
    let witness = parts.iter().filter(|p| !p.verdict.is_pass()).find_map(|p| p.witness.clone());
    let mut rep = CertificateReport::new("cone-equals-positive", verdict, value, tol, BoundSide::Exact)
        .with_exactness(if verdict.is_pass() { Exactness::Numerical } else { closure.exactness() })
        .with_parts(parts)
        .note(format!("{samples} boundary samples of the positive cone"));
    rep.witness = witness;
    Ok(rep)
}

/// Generators `E11, E22, E11+E12+E21+E22, E11−iE12+iE21+E22, I` of a cone
/// in `M₂` with basis `I, E12, E21, E22`.
pub fn psd_fixture_cone() -> Cone {
    let c = |v: [(f64, f64); 4]| Element(v.iter().map(|&(a, b)| C64::new(a, b)).collect());
    Cone::new(vec![
        // E11 = I − E22
        c([(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (-1.0, 0.0)]),
        c([(0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]),
        c([(1.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 0.0)]),
        c([(1.0, 0.0), (0.0, -1.0), (0.0, 1.0), (0.0, 0.0)]),
        c([(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::catalog;
    use crate::opspace::make_space;
    use crate::tro::generate_tro;

    fn m2() -> ConcreteOpSpace {
        catalog("m2-full", 1).unwrap().to_opspace().unwrap()
    }

    fn m2_basis() -> Vec<Element> {
        let s = m2();
        let c = generate_tro(&s).unwrap();
        delta_span(&s, &Element::basis(4, 0), Some(&c), &SolverConfig::default()).unwrap().real_basis
    }

    #[test]
    fn nnls_examples() {
        let s = m2();
        let cone = psd_fixture_cone();
        let m = cone_membership(&s, &cone, &cone.generators[0]).unwrap();
        assert!(m.member && m.residual < 1e-12);
        let x = cone.generators[0].scale_real(2.0).add(&cone.generators[4].scale_real(3.0));
        let m = cone_membership(&s, &cone, &x).unwrap();
        assert!(m.member && m.stationarity < NNLS_STATIONARITY, "{m:?}");
        // nearest point to −I is 0
        let m = cone_membership(&s, &cone, &Element::basis(4, 0).scale_real(-1.0)).unwrap();
        assert!(!m.member && (m.residual - 2f64.sqrt()).abs() < 1e-12, "{m:?}");
        let empty = Cone::new(vec![]);
        let m = cone_membership(&s, &empty, &Element::basis(4, 1)).unwrap();
        assert!(!m.member && (m.residual - 1.0).abs() < 1e-15);
        assert!(cone_membership(&s, &empty, &Element::zero(4)).unwrap().member);
    }

    #[test]
    fn diag_one_two_is_a_combination() {
        let s = m2();
        let e11 = psd_fixture_cone().generators[0].clone();
        let cone = Cone::new(vec![e11.clone(), Element::basis(4, 3), Element::basis(4, 0)]);
        // diag(1, 2) = I + E22
        let x = Element::basis(4, 0).add(&Element::basis(4, 3));
        let m = cone_membership(&s, &cone, &x).unwrap();
        assert!(m.member && m.residual < 1e-12, "{m:?}");
    }

    #[test]
    fn scalar_cone_is_not_an_order_unit_cone() {
        let s = m2();
        let u = Element::basis(4, 0);
        let cone = Cone::new(vec![u.clone()]);
        let r = norm_order_unit_check(&s, &cone, &u, &m2_basis(), 16, 7).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.part("unit-in-cone").unwrap().verdict.is_pass());
        let r = norm_order_unit_check(&s, &Cone::new(vec![Element::basis(4, 3)]), &u, &[], 0, 7).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.witness.unwrap().cells[0], u);
    }

    #[test]
    fn diagonal_model_cone_is_exact() {
        let s = make_space(vec![CMat::unit(2, 2, 0, 0), CMat::unit(2, 2, 1, 1)], None).unwrap();
        let u = Element(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        let s = s.with_unit(Some(u.clone())).unwrap();
        let cone = Cone::new(vec![Element::basis(2, 0), Element::basis(2, 1)]);
        let c = generate_tro(&s).unwrap();
        let cfg = SolverConfig::default();
        let basis = delta_span(&s, &u, Some(&c), &cfg).unwrap().real_basis;
        assert!(norm_order_unit_check(&s, &cone, &u, &basis, 32, 1).unwrap().verdict.is_pass());
        assert!(cone_equals_delta_plus(&c, &cone, &u, 50, &cfg).unwrap().verdict.is_pass());
        let r = cone_equals_delta_plus(&c, &cone.without(1), &u, 50, &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.value >= 0.1);
    }

    #[test]
    fn unit_cone_in_the_scalars() {
        let s = make_space(vec![CMat::identity(1)], None).unwrap();
        let u = Element::basis(1, 0);
        let s = s.with_unit(Some(u.clone())).unwrap();
        let c = generate_tro(&s).unwrap();
        let r = cone_equals_delta_plus(&c, &Cone::new(vec![u.clone()]), &u, 20, &SolverConfig::default()).unwrap();
        assert!(r.verdict.is_pass(), "{r:?}");
    }

    #[test]
    fn dropping_e22_leaves_e22_out() {
        let s = m2();
        let c = generate_tro(&s).unwrap();
        let cfg = SolverConfig::default();
        let r = cone_equals_delta_plus(&c, &psd_fixture_cone().without(1), &Element::basis(4, 0), DEFAULT_CONE_SAMPLES, &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.part("cone-in-positive").unwrap().verdict.is_pass());
        let p = r.part("positive-in-cone").unwrap();
        assert!((p.value - 0.5f64.sqrt()).abs() < 1e-9, "{p:?}");
        let w = r.witness.as_ref().unwrap().cells[0].clone();
        assert!((s.norm(&w) - 1.0).abs() < 1e-9);
        let (lmin, skew) = positivity(&c, &Element::basis(4, 0), &w).unwrap();
        assert!(lmin > -1e-9 && skew < 1e-12);
        let m = cone_membership(&s, &psd_fixture_cone().without(1), &w).unwrap();
        assert!((m.residual - p.value).abs() < 1e-12);
        // E22 attains the same worst residual
        let m = cone_membership(&s, &psd_fixture_cone().without(1), &Element::basis(4, 3)).unwrap();
        assert!(!m.member && (m.residual - p.value).abs() < 1e-9, "{m:?}");
    }
}
