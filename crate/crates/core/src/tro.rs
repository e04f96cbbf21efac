//! The TRO generated by a space inside its ambient matrices, and exact
//! ambient oracles built on it.
//!
//! Everything generated by a space lives in the direct sum of its component
//! blocks, so elements are stored blockwise ([`BlockMat`]). The generated
//! TRO is the span of odd words `x1 y1* x2 y2* ... xk`; it is built by
//! appending `y* x` on the right until the span stops growing. The
//! C*-algebras are `span(Z*Z) = span(X* Z)` and `span(ZZ*) = span(Z X*)`.
//!
//! The generated TRO can be larger than the ternary envelope. Verdicts are
//! marked exact only when the closure is flagged envelope-exact: when the
//! space says so, or when the TRO fills every component block (the
//! C*-algebras are then full matrix algebras, which have no proper
//! quotients).

use crate::error::{precondition, Result};
use crate::matcore::{complex_rank, spectral_norm, CMat, C64, ZERO};
use crate::opspace::{ConcreteOpSpace, Element};
use crate::report::{BoundSide, CertificateReport, Exactness, Verdict};

/// Absolute tolerance of the ambient oracles.
pub const AMBIENT_TOL: f64 = 1e-8;
/// Relative residual above which a candidate extends a span.
const SPAN_TOL: f64 = 1e-9;

/// A block-diagonal matrix, one block per component of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMat {
    pub blocks: Vec<CMat>,
}

impl BlockMat {
    pub fn adjoint(&self) -> BlockMat {
        BlockMat { blocks: self.blocks.iter().map(CMat::adjoint).collect() }
    }

    pub fn mul(&self, other: &BlockMat) -> BlockMat {
        BlockMat {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a.matmul(b).expect("blockwise shapes agree"))
                .collect(),
        }
    }

    pub fn sub(&self, other: &BlockMat) -> BlockMat {
        BlockMat { blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a - b).collect() }
    }

    pub fn add(&self, other: &BlockMat) -> BlockMat {
        BlockMat { blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a + b).collect() }
    }

    pub fn scale(&self, s: C64) -> BlockMat {
        BlockMat { blocks: self.blocks.iter().map(|b| b.scale(s)).collect() }
    }

    /// Spectral norm: the largest block norm.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(|b| if b.rows() * b.cols() == 0 { 0.0 } else { spectral_norm(b).unwrap_or(0.0) }).fold(0.0, f64::max)
    }

    fn flatten(&self) -> Vec<C64> {
        self.blocks.iter().flat_map(|b| b.as_slice().iter().copied()).collect()
    }

    fn unflatten(&self, v: &[C64]) -> BlockMat {
        let mut off = 0;
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let n = b.rows() * b.cols();
                let m = CMat::from_vec(b.rows(), b.cols(), v[off..off + n].to_vec()).expect("sizes agree");
                off += n;
                m
            })
            .collect();
        BlockMat { blocks }
    }

    fn total_len(&self) -> usize {
        self.blocks.iter().map(|b| b.rows() * b.cols()).sum()
    }
}

/// Orthonormal (Frobenius) basis grown one candidate at a time.
#[derive(Debug, Clone, Default)]
struct SpanBuilder {
    basis: Vec<Vec<C64>>,
}

impl SpanBuilder {
    fn project_out(&self, v: &mut [C64]) {
        // two passes of Gram-Schmidt
        for _ in 0..2 {
            for q in &self.basis {
                let c: C64 = q.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                if c != ZERO {
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi -= c * qi;
                    }
                }
            }
        }
    }

    fn residual(&self, v: &[C64]) -> f64 {
        let mut w = v.to_vec();
        self.project_out(&mut w);
        w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn try_add(&mut self, mut v: Vec<C64>) -> bool {
        let n0 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n0 == 0.0 {
            return false;
        }
        self.project_out(&mut v);
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n <= SPAN_TOL * n0 {
            return false;
        }
        v.iter_mut().for_each(|z| *z /= n);
        self.basis.push(v);
        true
    }
}

/// Row and column indices of one component in the ambient matrices.
#[derive(Debug, Clone)]
struct Layout {
    rows: Vec<usize>,
    cols: Vec<usize>,
}

/// The TRO generated by a space, with `span(ZZ*)` and `span(Z*Z)`.
#[derive(Debug, Clone)]
pub struct TroClosure<'a> {
    space: &'a ConcreteOpSpace,
    layout: Vec<Layout>,
    z_basis: Vec<BlockMat>,
    zz_star_basis: Vec<BlockMat>,
    z_star_z_basis: Vec<BlockMat>,
    envelope_exact: bool,
    rounds: usize,
}

/// Generates the TRO of `space` and its two C*-algebras.
pub fn generate_tro(space: &ConcreteOpSpace) -> Result<TroClosure<'_>> {
    TroClosure::generate(space)
}

impl<'a> TroClosure<'a> {
    pub fn generate(space: &'a ConcreteOpSpace) -> Result<Self> {
        let layout: Vec<Layout> =
            space.components().iter().map(|c| Layout { rows: c.rows.clone(), cols: c.cols.clone() }).collect();
        let x: Vec<BlockMat> = (0..space.dim()).map(|k| embed_blocks(space, &Element::basis(space.dim(), k))).collect();
        let x_star: Vec<BlockMat> = x.iter().map(BlockMat::adjoint).collect();
        // products y* x, used on the right of every word
        let mut pairs: Vec<BlockMat> = Vec::new();
        let mut pair_span = SpanBuilder::default();
        for y in &x_star {
            for xx in &x {
                let p = y.mul(xx);
                if pair_span.try_add(p.flatten()) {
                    pairs.push(p);
                }
            }
        }
        let template = &x[0];
        let full = template.total_len();
        let (p, q) = space.ambient_shape();
        let cap = p * q;

        let mut z = SpanBuilder::default();
        let mut frontier: Vec<Vec<C64>> = Vec::new();
        for b in &x {
            let v = b.flatten();
            if z.try_add(v) {
                frontier.push(z.basis.last().expect("just added").clone());
            }
        }
        let mut rounds = 0;
        while !frontier.is_empty() && z.basis.len() < full {
            rounds += 1;
            if rounds > cap {
                return Err(crate::error::Error::Solver {
                    message: "TRO generation did not stabilise".into(),
                    iterate: Vec::new(),
                });
            }
            let mut next = Vec::new();
            'outer: for f in &frontier {
                let fm = template.unflatten(f);
                for pr in &pairs {
                    if z.try_add(fm.mul(pr).flatten()) {
                        next.push(z.basis.last().expect("just added").clone());
                        if z.basis.len() == full {
                            break 'outer;
                        }
                    }
                }
            }
            frontier = next;
        }
        let z_basis: Vec<BlockMat> = z.basis.iter().map(|v| template.unflatten(v)).collect();

        let star_z = span_of_products(x_star.iter(), &z_basis, |a, b| a.mul(b));
        let z_zstar = span_of_products(z_basis.iter(), &x_star, |a, b| a.mul(b));

        let exact = space.envelope_exact_hint() || z_basis.len() == full;
        Ok(TroClosure {
            space,
            layout,
            z_basis,
            zz_star_basis: z_zstar,
            z_star_z_basis: star_z,
            envelope_exact: exact,
            rounds,
        })
    }

    pub fn space(&self) -> &'a ConcreteOpSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.z_basis.len()
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn envelope_exact(&self) -> bool {
        self.envelope_exact
    }

    pub fn exactness(&self) -> Exactness {
        if self.envelope_exact {
            Exactness::Exact
        } else {
            Exactness::SufficientOnly
        }
    }

    /// Blockwise orthonormal basis of the generated TRO.
    pub fn z_blocks(&self) -> &[BlockMat] {
        &self.z_basis
    }

    pub fn zz_star_blocks(&self) -> &[BlockMat] {
        &self.zz_star_basis
    }

    pub fn z_star_z_blocks(&self) -> &[BlockMat] {
        &self.z_star_z_basis
    }

    /// Dense `p x q` basis of the generated TRO.
    pub fn z_basis(&self) -> Vec<CMat> {
        let (p, q) = self.space.ambient_shape();
        self.z_basis.iter().map(|b| self.dense(b, p, q, false, false)).collect()
    }

    /// Dense `p x p` basis of `span(ZZ*)`.
    pub fn zz_star_basis(&self) -> Vec<CMat> {
        let (p, _) = self.space.ambient_shape();
        self.zz_star_basis.iter().map(|b| self.dense(b, p, p, false, true)).collect()
    }

    /// Dense `q x q` basis of `span(Z*Z)`.
    pub fn z_star_z_basis(&self) -> Vec<CMat> {
        let (_, q) = self.space.ambient_shape();
        self.z_star_z_basis.iter().map(|b| self.dense(b, q, q, true, false)).collect()
    }

    /// Places blocks into an ambient matrix. `cols_as_rows` / `rows_as_cols`
    /// select which index lists label the block rows and columns.
    fn dense(&self, b: &BlockMat, rows: usize, cols: usize, cols_as_rows: bool, rows_as_cols: bool) -> CMat {
        let mut out = CMat::zeros(rows, cols);
        for (blk, lay) in b.blocks.iter().zip(&self.layout) {
            let ri = if cols_as_rows { &lay.cols } else { &lay.rows };
            let ci = if rows_as_cols { &lay.rows } else { &lay.cols };
            for (a, &r) in ri.iter().enumerate() {
                for (c, &col) in ci.iter().enumerate() {
                    out[(r, col)] = blk[(a, c)];
                }
            }
        }
        out
    }

    /// Blockwise form of an element of the space.
    pub fn embed(&self, e: &Element) -> BlockMat {
        embed_blocks(self.space, e)
    }

    /// Dense ambient `p x q` matrix of a blockwise element of `Z`.
    pub fn to_dense(&self, b: &BlockMat) -> CMat {
        let (p, q) = self.space.ambient_shape();
        self.dense(b, p, q, false, false)
    }

    /// Largest residual of `a b* c` against the TRO span over basis triples.
    pub fn ternary_residual(&self) -> f64 {
        let mut span = SpanBuilder::default();
        span.basis = self.z_basis.iter().map(BlockMat::flatten).collect();
        let mut worst = 0.0f64;
        for a in &self.z_basis {
            for b in &self.z_basis {
                let ab = a.mul(&b.adjoint());
                for c in &self.z_basis {
                    worst = worst.max(span.residual(&ab.mul(c).flatten()));
                }
            }
        }
        worst
    }

    /// Defects `max ‖v v* z − z‖` and `max ‖z v* v − z‖` over the TRO basis.
    pub fn unitary_defects(&self, v: &BlockMat) -> (f64, f64) {
        let vv = v.mul(&v.adjoint());
        let vstar_v = v.adjoint().mul(v);
        let mut co = 0.0f64;
        let mut iso = 0.0f64;
        for z in &self.z_basis {
            co = co.max(vv.mul(z).sub(z).norm());
            iso = iso.max(z.mul(&vstar_v).sub(z).norm());
        }
        (co, iso)
    }

    fn require_unitary(&self, u: &Element, what: &str) -> Result<BlockMat> {
        let b = self.embed(u);
        let (co, iso) = self.unitary_defects(&b);
        if co.max(iso) > AMBIENT_TOL {
            return Err(precondition(format!("{what} is not unitary in the generated TRO (defect {:.3e})", co.max(iso))));
        }
        Ok(b)
    }

    /// `u x* u` blockwise.
    pub fn involution_blocks(&self, u: &Element, x: &Element) -> Result<BlockMat> {
        let ub = self.require_unitary(u, "u")?;
        Ok(ub.mul(&self.embed(x).adjoint()).mul(&ub))
    }
}

fn embed_blocks(space: &ConcreteOpSpace, e: &Element) -> BlockMat {
    BlockMat { blocks: space.components().iter().map(|c| c.embed(e.coeffs())).collect() }
}

fn span_of_products<'b>(
    left: impl Iterator<Item = &'b BlockMat>,
    right: &[BlockMat],
    f: impl Fn(&BlockMat, &BlockMat) -> BlockMat,
) -> Vec<BlockMat> {
    let left: Vec<&BlockMat> = left.collect();
    let mut span = SpanBuilder::default();
    let template = f(left[0], &right[0]);
    let full = template.total_len();
    'outer: for a in &left {
        for b in right {
            span.try_add(f(a, b).flatten());
            if span.basis.len() == full {
                break 'outer;
            }
        }
    }
    span.basis.iter().map(|v| template.unflatten(v)).collect()
}

/// Ambient unitarity of `v` in the generated TRO: `v v* z = z` and
/// `z v* v = z` for all `z`. The one-sided verdicts are reported as parts.
pub fn ambient_unitary_check(closure: &TroClosure, v: &Element) -> CertificateReport {
    let (co, iso) = closure.unitary_defects(&closure.embed(v));
    let ex = closure.exactness();
    let part = |name: &str, value: f64| {
        CertificateReport::new(name, Verdict::from_bool(value <= AMBIENT_TOL), value, AMBIENT_TOL, BoundSide::Exact)
            .with_exactness(ex)
    };
    let worst = co.max(iso);
    CertificateReport::new("ambient-unitary", Verdict::from_bool(worst <= AMBIENT_TOL), worst, AMBIENT_TOL, BoundSide::Exact)
        .with_exactness(ex)
        .with_parts(vec![part("ambient-coisometry", co), part("ambient-isometry", iso)])
}

/// The ambient involution `u x* u`.
pub fn involution(closure: &TroClosure, u: &Element, x: &Element) -> Result<CMat> {
    Ok(closure.to_dense(&closure.involution_blocks(u, x)?))
}

/// `(X, u)` is an operator system iff `u X* u ⊆ X`: every basis element's
/// involution must be a member of the space.
pub fn ambient_system_check(closure: &TroClosure, u: &Element) -> Result<CertificateReport> {
    let space = closure.space();
    let mut worst = 0.0f64;
    for k in 0..space.dim() {
        let x = Element::basis(space.dim(), k);
        let img = involution(closure, u, &x)?;
        let m = space.membership(&img)?;
        worst = worst.max(m.residual / img.frobenius_norm().max(1.0));
    }
    let tol = space.membership_tol();
    Ok(CertificateReport::new("ambient-system", Verdict::from_bool(worst <= tol), worst, tol, BoundSide::Exact)
        .with_exactness(closure.exactness()))
}

/// Whether `u` and `v` induce the same involution: `u*v = v*u` and `u*v`
/// central in `Z*Z`.
pub fn same_involution_check(closure: &TroClosure, u: &Element, v: &Element) -> Result<CertificateReport> {
    let ub = closure.require_unitary(u, "u")?;
    let vb = closure.require_unitary(v, "v")?;
    let w = ub.adjoint().mul(&vb);
    let sym = w.sub(&vb.adjoint().mul(&ub)).norm();
    let mut comm = 0.0f64;
    for a in closure.z_star_z_blocks() {
        comm = comm.max(w.mul(a).sub(&a.mul(&w)).norm());
    }
    let worst = sym.max(comm);
    let parts = vec![
        CertificateReport::new("selfadjoint-quotient", Verdict::from_bool(sym <= AMBIENT_TOL), sym, AMBIENT_TOL, BoundSide::Exact),
        CertificateReport::new("central-quotient", Verdict::from_bool(comm <= AMBIENT_TOL), comm, AMBIENT_TOL, BoundSide::Exact),
    ];
    Ok(CertificateReport::new("same-involution", Verdict::from_bool(worst <= AMBIENT_TOL), worst, AMBIENT_TOL, BoundSide::Exact)
        .with_exactness(closure.exactness())
        .with_parts(parts))
}

/// Sufficient condition for `T(x) = v u* x` to map `X` onto itself: every
/// image is a member and the images have full rank.
pub fn transfer_check(closure: &TroClosure, u: &Element, v: &Element) -> Result<CertificateReport> {
    let ub = closure.require_unitary(u, "u")?;
    let vb = closure.require_unitary(v, "v")?;
    let space = closure.space();
    let t = vb.mul(&ub.adjoint());
    let mut worst = 0.0f64;
    let mut images = Vec::new();
    for k in 0..space.dim() {
        let img = closure.to_dense(&t.mul(&closure.embed(&Element::basis(space.dim(), k))));
        let m = space.membership(&img)?;
        worst = worst.max(m.residual / img.frobenius_norm().max(1.0));
        images.push(m.coeffs.0);
    }
    let tol = space.membership_tol();
    let rank = complex_rank(&images, 1e-8);
    let verdict = Verdict::from_bool(worst <= tol && rank == space.dim());
    Ok(CertificateReport::new("transfer", verdict, worst, tol, BoundSide::Exact)
        .with_exactness(closure.exactness())
        .note(format!("image rank {rank} of {}", space.dim())))
}
