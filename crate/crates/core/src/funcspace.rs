//! Function spaces on finite sample sets and the built-in example catalog.
//!
//! A sampled function space is a span of complex functions on `m` points
//! with the sup norm. Its diagonal embedding ([`min_opspace`]) carries the
//! minimal operator space structure, so every matrix-level check applies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Result};
use crate::matcore::{column_svd, complex_rank, real_null_space, CMat, C64, ONE, ZERO};
use crate::opspace::{ConcreteOpSpace, Element, INDEPENDENCE_TOL};
use crate::report::{BoundSide, CertificateReport, Verdict};

/// Pointwise tolerance for `|g(w)| = 1`.
pub const UNIMODULAR_TOL: f64 = 1e-9;
/// Relative singular-value cutoff of the pointwise linear solves.
const SOLVE_TOL: f64 = 1e-9;

/// A span of functions sampled on `m` points.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunctionSpace {
    points: usize,
    basis: Vec<Vec<C64>>,
    unit: Option<Element>,
    shilov: bool,
}

impl SampledFunctionSpace {
    pub fn new(basis: Vec<Vec<C64>>, unit: Option<Element>) -> Result<Self> {
        let m = basis.first().map(Vec::len).ok_or_else(|| invalid("a function space needs a basis"))?;
        if m == 0 {
            return Err(invalid("functions need at least one sample point"));
        }
        if let Some(k) = basis.iter().position(|f| f.len() != m) {
            return Err(invalid(format!("basis function {k} has {} samples, expected {m}", basis[k].len())));
        }
        if let Some(u) = &unit {
            if u.dim() != basis.len() {
                return Err(invalid("unit dimension does not match the basis"));
            }
        }
        let normalized: Vec<Vec<C64>> = basis
            .iter()
            .map(|f| {
                let n = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                f.iter().map(|z| if n > 0.0 { z / n } else { ZERO }).collect()
            })
            .collect();
        let (sig, _) = column_svd(&normalized);
        let min_eig = sig.last().map_or(0.0, |s| s * s);
        if min_eig <= INDEPENDENCE_TOL {
            return Err(invalid(format!("basis functions are dependent (normalised Gram eigenvalue {min_eig:.3e})")));
        }
        Ok(SampledFunctionSpace { points: m, basis, unit, shilov: false })
    }

    /// Declares the sample set to be a boundary for the space, so the
    /// generated TRO of the diagonal model is its envelope.
    pub fn with_shilov_samples(mut self, yes: bool) -> Self {
        self.shilov = yes;
        self
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<C64>] {
        &self.basis
    }

    pub fn unit(&self) -> Option<&Element> {
        self.unit.as_ref()
    }

    pub fn shilov_samples(&self) -> bool {
        self.shilov
    }

    /// Sample values of an element.
    pub fn values(&self, e: &Element) -> Vec<C64> {
        let mut out = vec![ZERO; self.points];
        for (c, f) in e.coeffs().iter().zip(&self.basis) {
            if *c != ZERO {
                for (o, v) in out.iter_mut().zip(f) {
                    *o += c * v;
                }
            }
        }
        out
    }

    /// Sup norm over the samples.
    pub fn norm(&self, e: &Element) -> f64 {
        self.values(e).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Least-squares coefficients of sampled values and the `ℓ²` residual.
    pub fn project(&self, values: &[C64]) -> (Element, f64) {
        let d = self.dim();
        let mut gram = CMat::zeros(d, d);
        let mut rhs = vec![ZERO; d];
        for i in 0..d {
            for j in 0..d {
                gram[(i, j)] = self.basis[i].iter().zip(&self.basis[j]).map(|(a, b)| a.conj() * b).sum();
            }
            rhs[i] = self.basis[i].iter().zip(values).map(|(a, b)| a.conj() * b).sum();
        }
        let (vals, vecs) = crate::matcore::herm_eigen_vectors(&gram).expect("Gram matrix is hermitian");
        let coeffs: Vec<C64> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|k| {
                        let proj: C64 = (0..d).map(|j| vecs[(j, k)].conj() * rhs[j]).sum();
                        vecs[(i, k)] * proj / vals[k]
                    })
                    .sum()
            })
            .collect();
        let e = Element(coeffs);
        let fitted = self.values(&e);
        let res = fitted.iter().zip(values).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        (e, res)
    }

    fn is_unimodular(&self, g: &[C64]) -> bool {
        g.iter().all(|z| (z.norm() - 1.0).abs() <= UNIMODULAR_TOL)
    }
}

/// Diagonal `m x m` model of a sampled function space.
pub fn min_opspace(fspace: &SampledFunctionSpace) -> Result<ConcreteOpSpace> {
    let basis = fspace.basis.iter().map(|f| CMat::diag(f)).collect();
    Ok(ConcreteOpSpace::new(basis, fspace.unit.clone())?.with_envelope_exact(fspace.shilov))
}

/// `sup_{|s|²+|t|²=1} ‖s f + t g‖` by a grid over `s = cos φ`,
/// `t = e^{iψ} sin φ` and pattern-search refinement.
pub fn two_element_sup(f: &[C64], g: &[C64]) -> f64 {
    let eval = |phi: f64, psi: f64| {
        let s = phi.cos();
        let t = C64::from_polar(phi.sin(), psi);
        f.iter().zip(g).map(|(a, b)| (s * a + t * b).norm()).fold(0.0, f64::max)
    };
    let (nphi, npsi) = (32usize, 64usize);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let two_pi = std::f64::consts::TAU;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..=nphi {
        let phi = half_pi * i as f64 / nphi as f64;
        for j in 0..npsi {
            let psi = two_pi * j as f64 / npsi as f64;
            let v = eval(phi, psi);
            if v > best.0 {
                best = (v, phi, psi);
            }
        }
    }
    let (mut hphi, mut hpsi) = (half_pi / nphi as f64, two_pi / npsi as f64);
    while hphi > 1e-10 {
        let mut moved = false;
        for (dp, ds) in [(hphi, 0.0), (-hphi, 0.0), (0.0, hpsi), (0.0, -hpsi)] {
            let phi = (best.1 + dp).clamp(0.0, half_pi);
            let psi = best.2 + ds;
            let v = eval(phi, psi);
            if v > best.0 {
                best = (v, phi, psi);
                moved = true;
            }
        }
        if !moved {
            hphi *= 0.5;
            hpsi *= 0.5;
        }
    }
    best.0
}

/// Checks that `sup ‖s f + t g‖ = √2` over norm-one `f`: the basis
/// normalised plus `samples` seeded random elements. `tol` bounds
/// `|sup − √2|`.
pub fn scalar_unitary_check(fspace: &SampledFunctionSpace, g: &Element, samples: usize, tol: f64, seed: u64) -> Result<CertificateReport> {
    if g.dim() != fspace.dim() {
        return Err(invalid("g has the wrong number of coefficients"));
    }
    let gv = fspace.values(g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = fspace.dim();
    let mut candidates: Vec<Element> = (0..d).map(|k| Element::basis(d, k)).collect();
    for _ in 0..samples {
        let c = (0..d)
            .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        candidates.push(Element(c));
    }
    let target = std::f64::consts::SQRT_2;
    let mut worst = (f64::NEG_INFINITY, 0usize, 0.0f64);
    for (idx, f) in candidates.iter().enumerate() {
        let n = fspace.norm(f);
        if n == 0.0 {
            continue;
        }
        let fv: Vec<C64> = fspace.values(f).iter().map(|z| z / n).collect();
        let sup = two_element_sup(&fv, &gv);
        let dev = (sup - target).abs();
        if dev > worst.0 {
            worst = (dev, idx, sup);
        }
    }
    let f = candidates[worst.1].scale_real(1.0 / fspace.norm(&candidates[worst.1]));
    Ok(CertificateReport::new("function-unitary", Verdict::from_bool(worst.0 <= tol), worst.0, tol, BoundSide::Lower)
        .with_witness(crate::opspace::AmplifiedElement::diagonal(&[f]))
        .note(format!("supremum {:.9} against sqrt(2)", worst.2)))
}

/// Real basis of the `g`-hermitians and whether they span the space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GHermitian {
    pub real_basis: Vec<Element>,
    pub complex_dim: usize,
    pub function_system: bool,
}

impl GHermitian {
    pub fn real_dim(&self) -> usize {
        self.real_basis.len()
    }
}

/// Solves `Im(conj(g(w)) x(w)) = 0` at every sample for `x` in the span.
pub fn g_hermitian_solve(fspace: &SampledFunctionSpace, g: &Element) -> Result<GHermitian> {
    let gv = fspace.values(g);
    if !fspace.is_unimodular(&gv) {
        return Err(precondition("g is not unimodular on the sample set"));
    }
    let d = fspace.dim();
    let rows: Vec<Vec<f64>> = (0..fspace.points)
        .map(|w| {
            let mut r = Vec::with_capacity(2 * d);
            for f in &fspace.basis {
                let p = gv[w].conj() * f[w];
                // x = Σ (a_k + i b_k) f_k
                r.push(p.im);
                r.push(p.re);
            }
            r
        })
        .collect();
    let null = real_null_space(&rows, 2 * d, SOLVE_TOL);
    let real_basis: Vec<Element> =
        null.iter().map(|v| Element(v.chunks(2).map(|p| C64::new(p[0], p[1])).collect())).collect();
    let vectors: Vec<Vec<C64>> = real_basis.iter().map(|e| e.0.clone()).collect();
    let complex_dim = complex_rank(&vectors, SOLVE_TOL);
    Ok(GHermitian { real_basis, complex_dim, function_system: complex_dim == d })
}

/// A real-valued unitary `v` of a conjugation-closed space is a unit for
/// the original involution: `v conj(x) v = conj(x)`.
pub fn selfadjoint_unit_check(fspace: &SampledFunctionSpace, v: &Element, tol: f64) -> Result<CertificateReport> {
    let d = fspace.dim();
    for (k, f) in fspace.basis.iter().enumerate() {
        let conj: Vec<C64> = f.iter().map(|z| z.conj()).collect();
        let (_, res) = fspace.project(&conj);
        let scale = conj.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1.0);
        if res > 1e-8 * scale {
            return Err(precondition(format!("the space is not closed under conjugation (basis function {k})")));
        }
    }
    let vv = fspace.values(v);
    if vv.iter().any(|z| z.im.abs() > UNIMODULAR_TOL) {
        return Err(precondition("v is not real-valued"));
    }
    if !fspace.is_unimodular(&vv) {
        return Err(precondition("v is not unimodular"));
    }
    let gh = g_hermitian_solve(fspace, v)?;
    let mut worst = 0.0f64;
    for k in 0..d {
        let x = fspace.values(&Element::basis(d, k));
        for (w, xv) in x.iter().enumerate() {
            let iota = vv[w] * xv.conj() * vv[w];
            worst = worst.max((iota - xv.conj()).norm());
        }
    }
    let verdict = Verdict::from_bool(gh.function_system && worst <= tol);
    Ok(CertificateReport::new("selfadjoint-unit", verdict, worst, tol, BoundSide::Exact)
        .note(format!("v-hermitians: real dimension {}, complex span {} of {d}", gh.real_dim(), gh.complex_dim)))
}

/// Names accepted by [`catalog`].
pub const CATALOG_NAMES: [&str; 6] = ["circle-1zz̄", "circle-1z", "two-circles", "m2-full", "m2-upper", "m2-sym3"];

/// Default samples per circle.
pub const DEFAULT_SAMPLES: usize = 360;

/// A catalog example in whichever form it is defined.
#[derive(Debug, Clone)]
pub enum CatalogSpace {
    Function(SampledFunctionSpace),
    Matrix(ConcreteOpSpace),
}

impl CatalogSpace {
    /// Matrix model: diagonal for function spaces.
    pub fn to_opspace(&self) -> Result<ConcreteOpSpace> {
        match self {
            CatalogSpace::Function(f) => min_opspace(f),
            CatalogSpace::Matrix(m) => Ok(m.clone()),
        }
    }

    pub fn as_function(&self) -> Option<&SampledFunctionSpace> {
        match self {
            CatalogSpace::Function(f) => Some(f),
            CatalogSpace::Matrix(_) => None,
        }
    }
}

/// Expected verdicts of a catalog example under the unit it ships with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    pub samples: Option<usize>,
    pub expected: Vec<(String, Verdict)>,
}

fn canonical(name: &str) -> Option<&'static str> {
    match name {
        "circle-1zzbar" => Some("circle-1zz̄"),
        other => CATALOG_NAMES.iter().copied().find(|n| *n == other),
    }
}

/// The catalog entry, with expected verdicts, for a name.
pub fn catalog_entry(name: &str, samples: usize) -> Result<CatalogEntry> {
    use Verdict::{Fail, Pass};
    let name = canonical(name).ok_or_else(|| invalid(format!("unknown catalog name {name:?}")))?;
    let e = |list: &[(&str, Verdict)]| list.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let (samples, expected) = match name {
        "m2-full" => (None, e(&[("unitary", Pass), ("system", Pass), ("cstar", Pass)])),
        "m2-upper" => (None, e(&[("unitary", Pass), ("system", Fail), ("cstar", Fail)])),
        "m2-sym3" => (None, e(&[("unitary", Pass), ("system", Pass), ("cstar", Fail)])),
        "circle-1zz̄" => (
            Some(samples),
            e(&[("unitary", Pass), ("function-unitary", Pass), ("function-system", Pass), ("system", Pass), ("cstar", Fail)]),
        ),
        "circle-1z" => (
            Some(samples),
            e(&[("unitary", Pass), ("function-unitary", Pass), ("function-system", Fail), ("system", Fail)]),
        ),
        _ => (Some(samples), e(&[("unitary", Pass), ("function-unitary", Pass), ("function-system", Pass), ("system", Pass)])),
    };
    Ok(CatalogEntry { name: name.to_string(), samples, expected })
}

fn circle(m: usize) -> Vec<C64> {
    (0..m).map(|j| C64::from_polar(1.0, std::f64::consts::TAU * j as f64 / m as f64)).collect()
}

fn e2(i: usize, j: usize) -> CMat {
    CMat::unit(2, 2, i, j)
}

/// Builds a named example. `samples` is the number of points per circle
/// and is ignored by the matrix examples.
pub fn catalog(name: &str, samples: usize) -> Result<CatalogSpace> {
    let name = canonical(name).ok_or_else(|| invalid(format!("unknown catalog name {name:?}")))?;
    if samples == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let ones = |m: usize| vec![ONE; m];
    Ok(match name {
        "circle-1zz̄" => {
            let z = circle(samples);
            let zb = z.iter().map(|w| w.conj()).collect();
            CatalogSpace::Function(
                SampledFunctionSpace::new(vec![ones(samples), z, zb], Some(Element::basis(3, 0)))?.with_shilov_samples(true),
            )
        }
        "circle-1z" => CatalogSpace::Function(
            SampledFunctionSpace::new(vec![ones(samples), circle(samples)], Some(Element::basis(2, 0)))?
                .with_shilov_samples(true),
        ),
        "two-circles" => {
            let z = circle(samples);
            let f: Vec<C64> = z.iter().chain(&z).map(|w| ONE + w).collect();
            let fb: Vec<C64> = f.iter().map(|w| w.conj()).collect();
            let g: Vec<C64> = (0..2 * samples).map(|j| if j < samples { ONE } else { -ONE }).collect();
            CatalogSpace::Function(
                SampledFunctionSpace::new(vec![ones(2 * samples), g, f, fb], Some(Element::basis(4, 0)))?
                    .with_shilov_samples(true),
            )
        }
        "m2-full" => CatalogSpace::Matrix(ConcreteOpSpace::new(
            vec![CMat::identity(2), e2(0, 1), e2(1, 0), e2(1, 1)],
            Some(Element::basis(4, 0)),
        )?),
        "m2-upper" => CatalogSpace::Matrix(ConcreteOpSpace::new(vec![CMat::identity(2), e2(0, 1)], Some(Element::basis(2, 0)))?),
        _ => CatalogSpace::Matrix(ConcreteOpSpace::new(
            vec![CMat::identity(2), e2(0, 1), e2(1, 0)],
            Some(Element::basis(3, 0)),
        )?),
    })
}
