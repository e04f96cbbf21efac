//! Concrete operator spaces: finite-dimensional subspaces of `p x q` complex
//! matrices given by a basis, optionally with a designated unit.
//!
//! Every basis matrix is supported on the same family of *components*: the
//! connected pieces of the bipartite row/column graph of the basis' nonzero
//! entries. Any block matrix whose entries lie in the space is, after a
//! permutation, a direct sum over components, so its spectral norm is the
//! largest of the component norms. All norm evaluations go through that
//! decomposition.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Result};
use crate::matcore::{column_svd, top_singular_values_of, CMat, C64, ZERO};

/// Default relative tolerance for [`ConcreteOpSpace::membership`].
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-6;
/// Minimum eigenvalue of the normalised Gram matrix accepted for a basis.
pub const INDEPENDENCE_TOL: f64 = 1e-10;

/// Coefficient vector over a space's basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Element(pub Vec<C64>);

impl Element {
    pub fn new(coeffs: Vec<C64>) -> Self {
        Element(coeffs)
    }

    pub fn zero(dim: usize) -> Self {
        Element(vec![ZERO; dim])
    }

    /// The `i`-th basis vector of a `dim`-dimensional space.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut c = vec![ZERO; dim];
        c[i] = C64::new(1.0, 0.0);
        Element(c)
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn scale(&self, s: C64) -> Element {
        Element(self.0.iter().map(|c| c * s).collect())
    }

    pub fn scale_real(&self, s: f64) -> Element {
        Element(self.0.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Element) -> Element {
        Element(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Element) -> Element {
        Element(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// Euclidean distance between coefficient vectors.
    pub fn coeff_distance(&self, other: &Element) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }
}

/// An element of `M_n(X)`: an `n x n` grid of coefficient vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplifiedElement {
    pub level: usize,
    /// Row-major `level x level` cells.
    pub cells: Vec<Element>,
}

impl AmplifiedElement {
    pub fn zero(level: usize, dim: usize) -> Self {
        AmplifiedElement { level, cells: vec![Element::zero(dim); level * level] }
    }

    pub fn cell(&self, i: usize, j: usize) -> &Element {
        &self.cells[i * self.level + j]
    }

    pub fn cell_mut(&mut self, i: usize, j: usize) -> &mut Element {
        &mut self.cells[i * self.level + j]
    }

    /// Block-diagonal element with the given diagonal entries.
    pub fn diagonal(entries: &[Element]) -> Self {
        let n = entries.len();
        let dim = entries.first().map_or(0, |e| e.dim());
        let mut a = AmplifiedElement::zero(n, dim);
        for (i, e) in entries.iter().enumerate() {
            *a.cell_mut(i, i) = e.clone();
        }
        a
    }

    /// Real parameter vector, `[re, im]` per coefficient, cells row-major.
    pub fn to_params(&self) -> Vec<f64> {
        self.cells.iter().flat_map(|e| e.0.iter().flat_map(|c| [c.re, c.im])).collect()
    }

    pub fn from_params(level: usize, dim: usize, params: &[f64]) -> Self {
        debug_assert_eq!(params.len(), 2 * dim * level * level);
        let cells = params
            .chunks(2 * dim)
            .map(|chunk| Element(chunk.chunks(2).map(|p| C64::new(p[0], p[1])).collect()))
            .collect();
        AmplifiedElement { level, cells }
    }
}

/// The restriction of the basis to one row/column component.
#[derive(Debug, Clone)]
pub struct Component {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub basis: Vec<CMat>,
}

impl Component {
    /// Restricted matrix of an element given by its coefficients.
    pub fn embed(&self, coeffs: &[C64]) -> CMat {
        let mut m = CMat::zeros(self.rows.len(), self.cols.len());
        for (c, b) in coeffs.iter().zip(&self.basis) {
            if *c != ZERO {
                m.axpy(*c, b);
            }
        }
        m
    }
}

/// A `d`-dimensional subspace of `M_{p x q}` with an optional unit.
#[derive(Debug, Clone)]
pub struct ConcreteOpSpace {
    rows: usize,
    cols: usize,
    basis: Vec<CMat>,
    unit: Option<Element>,
    components: Vec<Component>,
    /// Flat indices `r * cols + c` where some basis matrix is nonzero.
    support: Vec<usize>,
    /// Inverse of the Gram matrix `G_{ij} = <B_i, B_j>`.
    gram_inv: Vec<C64>,
    membership_tol: f64,
    envelope_exact: bool,
}

/// Result of projecting an ambient matrix onto a space.
#[derive(Debug, Clone)]
pub struct Membership {
    pub coeffs: Element,
    /// Frobenius distance from the matrix to the span.
    pub residual: f64,
    /// `residual <= tol · max(1, ‖M‖_F)`.
    pub member: bool,
}

/// Builds a validated space.
pub fn make_space(basis: Vec<CMat>, unit: Option<Element>) -> Result<ConcreteOpSpace> {
    ConcreteOpSpace::new(basis, unit)
}

impl ConcreteOpSpace {
    pub fn new(basis: Vec<CMat>, unit: Option<Element>) -> Result<Self> {
        let first = basis.first().ok_or_else(|| invalid("a space needs at least one basis matrix"))?;
        let (rows, cols) = first.shape();
        if rows == 0 || cols == 0 {
            return Err(invalid("basis matrices must be nonempty"));
        }
        if let Some(bad) = basis.iter().position(|b| b.shape() != (rows, cols)) {
            return Err(invalid(format!(
                "basis matrix {bad} has shape {:?}, expected {:?}",
                basis[bad].shape(),
                (rows, cols)
            )));
        }
        let d = basis.len();
        if let Some(u) = &unit {
            if u.dim() != d {
                return Err(invalid(format!("unit has {} coefficients, space dimension is {d}", u.dim())));
            }
        }

        let support: Vec<usize> =
            (0..rows * cols).filter(|&idx| basis.iter().any(|b| b.as_slice()[idx] != ZERO)).collect();

        // independence on normalised vectors
        let vectors: Vec<Vec<C64>> = basis
            .iter()
            .map(|b| {
                let n = b.frobenius_norm();
                support.iter().map(|&i| if n > 0.0 { b.as_slice()[i] / n } else { ZERO }).collect()
            })
            .collect();
        let (sig, _) = column_svd(&vectors);
        let min_eig = sig.last().map_or(0.0, |s| s * s);
        if min_eig <= INDEPENDENCE_TOL {
            return Err(invalid(format!(
                "basis is linearly dependent (smallest normalised Gram eigenvalue {min_eig:.3e})"
            )));
        }

        let mut gram = CMat::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                gram[(i, j)] = basis[i].inner(&basis[j]);
            }
        }
        let gram_inv = invert_hermitian_pd(&gram)?;
        let components = find_components(&basis, rows, cols);

        Ok(ConcreteOpSpace {
            rows,
            cols,
            basis,
            unit,
            components,
            support,
            gram_inv,
            membership_tol: DEFAULT_MEMBERSHIP_TOL,
            envelope_exact: false,
        })
    }

    pub fn with_membership_tol(mut self, tol: f64) -> Self {
        self.membership_tol = tol;
        self
    }

    pub fn with_unit(mut self, unit: Option<Element>) -> Result<Self> {
        if let Some(u) = &unit {
            if u.dim() != self.dim() {
                return Err(invalid("unit dimension does not match space"));
            }
        }
        self.unit = unit;
        Ok(self)
    }

    /// Marks the generated TRO of this space as known to coincide with its
    /// ternary envelope (e.g. sampled function spaces on their Shilov
    /// boundary).
    pub fn with_envelope_exact(mut self, exact: bool) -> Self {
        self.envelope_exact = exact;
        self
    }

    pub fn envelope_exact_hint(&self) -> bool {
        self.envelope_exact
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn basis(&self) -> &[CMat] {
        &self.basis
    }

    pub fn unit(&self) -> Option<&Element> {
        self.unit.as_ref()
    }

    pub fn require_unit(&self) -> Result<&Element> {
        self.unit.as_ref().ok_or_else(|| precondition("the space has no designated unit"))
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn membership_tol(&self) -> f64 {
        self.membership_tol
    }

    fn check_dim(&self, e: &Element) -> Result<()> {
        if e.dim() != self.dim() {
            return Err(invalid(format!("element has {} coefficients, space dimension is {}", e.dim(), self.dim())));
        }
        Ok(())
    }

    /// Concrete matrix `Σ c_i B_i`.
    pub fn embed(&self, e: &Element) -> CMat {
        let mut m = CMat::zeros(self.rows, self.cols);
        for (c, b) in e.0.iter().zip(&self.basis) {
            if *c != ZERO {
                m.axpy(*c, b);
            }
        }
        m
    }

    pub fn try_embed(&self, e: &Element) -> Result<CMat> {
        self.check_dim(e)?;
        Ok(self.embed(e))
    }

    /// Concrete `np x nq` block matrix of an amplified element.
    pub fn embed_amplified(&self, a: &AmplifiedElement) -> CMat {
        let n = a.level;
        let mut out = CMat::zeros(n * self.rows, n * self.cols);
        for i in 0..n {
            for j in 0..n {
                let block = self.embed(a.cell(i, j));
                for r in 0..self.rows {
                    for c in 0..self.cols {
                        out[(i * self.rows + r, j * self.cols + c)] = block[(r, c)];
                    }
                }
            }
        }
        out
    }

    /// Spectral norm of an element, computed componentwise.
    pub fn norm(&self, e: &Element) -> f64 {
        self.norm_cells(1, |_, _| &e.0)
    }

    /// Spectral norm of an amplified element.
    pub fn norm_amplified(&self, a: &AmplifiedElement) -> f64 {
        self.norm_cells(a.level, |i, j| &a.cell(i, j).0)
    }

    fn norm_cells<'e>(&self, n: usize, cell: impl Fn(usize, usize) -> &'e [C64]) -> f64 {
        let mut buf = Vec::new();
        let mut best = 0.0f64;
        for comp in &self.components {
            let (h, w) = (comp.rows.len(), comp.cols.len());
            let cols = n * w;
            buf.clear();
            buf.resize(n * h * cols, ZERO);
            for i in 0..n {
                for j in 0..n {
                    for (c, b) in cell(i, j).iter().zip(&comp.basis) {
                        if *c == ZERO {
                            continue;
                        }
                        for r in 0..h {
                            for k in 0..w {
                                buf[(i * h + r) * cols + j * w + k] += c * b[(r, k)];
                            }
                        }
                    }
                }
            }
            best = best.max(top_singular_values_of(&buf, n * h, cols).0);
        }
        best
    }

    /// Least-squares projection of an ambient matrix onto the span, in the
    /// Frobenius inner product.
    pub fn membership(&self, m: &CMat) -> Result<Membership> {
        if m.shape() != (self.rows, self.cols) {
            return Err(invalid(format!(
                "matrix has shape {:?}, ambient shape is {:?}",
                m.shape(),
                (self.rows, self.cols)
            )));
        }
        let d = self.dim();
        let rhs: Vec<C64> = self
            .basis
            .iter()
            .map(|b| self.support.iter().map(|&i| b.as_slice()[i].conj() * m.as_slice()[i]).sum())
            .collect();
        let coeffs: Vec<C64> = (0..d).map(|i| (0..d).map(|j| self.gram_inv[i * d + j] * rhs[j]).sum()).collect();
        let projected = self.embed(&Element(coeffs.clone()));
        let residual = (m - &projected).frobenius_norm();
        let member = residual <= self.membership_tol * m.frobenius_norm().max(1.0);
        Ok(Membership { coeffs: Element(coeffs), residual, member })
    }

    /// The diagonal amplification `u_n`.
    pub fn amplify_unit(&self, n: usize) -> Result<AmplifiedElement> {
        let u = self.require_unit()?;
        if n == 0 {
            return Err(invalid("amplification level must be positive"));
        }
        Ok(AmplifiedElement::diagonal(&vec![u.clone(); n]))
    }
}

fn invert_hermitian_pd(g: &CMat) -> Result<Vec<C64>> {
    let (vals, vecs) = crate::matcore::herm_eigen_vectors(g)?;
    let n = g.rows();
    if vals.first().is_some_and(|&v| v <= 0.0) {
        return Err(invalid("Gram matrix is singular"));
    }
    let mut inv = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = ZERO;
            for k in 0..n {
                s += vecs[(i, k)] * vecs[(j, k)].conj() / vals[k];
            }
            inv[i * n + j] = s;
        }
    }
    Ok(inv)
}

fn find_components(basis: &[CMat], rows: usize, cols: usize) -> Vec<Component> {
    // nodes 0..rows are rows, rows..rows+cols are columns
    let mut parent: Vec<usize> = (0..rows + cols).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut used_row = vec![false; rows];
    let mut used_col = vec![false; cols];
    for r in 0..rows {
        for c in 0..cols {
            if basis.iter().any(|b| b[(r, c)] != ZERO) {
                used_row[r] = true;
                used_col[c] = true;
                let (a, b) = (find(&mut parent, r), find(&mut parent, rows + c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>, Vec<usize>)> = Vec::new();
    for r in (0..rows).filter(|&r| used_row[r]) {
        let root = find(&mut parent, r);
        match groups.iter_mut().find(|g| g.0 == root) {
            Some(g) => g.1.push(r),
            None => groups.push((root, vec![r], Vec::new())),
        }
    }
    for c in (0..cols).filter(|&c| used_col[c]) {
        let root = find(&mut parent, rows + c);
        if let Some(g) = groups.iter_mut().find(|g| g.0 == root) {
            g.2.push(c);
        }
    }
    groups
        .into_iter()
        .map(|(_, rs, cs)| {
            let restricted = basis.iter().map(|b| b.select(&rs, &cs)).collect();
            Component { rows: rs, cols: cs, basis: restricted }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{spectral_norm, I, ONE};

    fn e(i: usize, j: usize) -> CMat {
        CMat::unit(2, 2, i, j)
    }

    fn m2_full() -> ConcreteOpSpace {
        make_space(vec![CMat::identity(2), e(0, 1), e(1, 0), e(1, 1)], Some(Element::basis(4, 0))).unwrap()
    }

    #[test]
    fn make_space_examples() {
        assert_eq!(make_space(vec![CMat::identity(2)], None).unwrap().dim(), 1);
        assert_eq!(m2_full().dim(), 4);
        let dep = make_space(vec![e(0, 1), e(0, 1).scale_real(2.0)], None);
        assert!(matches!(dep, Err(crate::Error::InvalidInput(_))));
    }

    #[test]
    fn make_space_rejects_shape_mismatch() {
        let r = make_space(vec![CMat::identity(2), CMat::zeros(2, 3)], None);
        assert!(matches!(r, Err(crate::Error::InvalidInput(_))));
    }

    #[test]
    fn membership_examples() {
        let s = m2_full();
        let m = s.membership(&CMat::identity(2)).unwrap();
        assert!(m.residual < 1e-12 && m.member);
        assert!((m.coeffs.0[0] - ONE).norm() < 1e-12);

        let upper = make_space(vec![CMat::identity(2), e(0, 1)], None).unwrap();
        let orth = upper.membership(&e(1, 0)).unwrap();
        assert!((orth.residual - 1.0).abs() < 1e-12 && !orth.member);
        assert!(orth.coeffs.0.iter().all(|c| c.norm() < 1e-12));

        // E11 onto span{I, E12}: projection I/2, residual² = 1/2
        let p = upper.membership(&e(0, 0)).unwrap();
        assert!((p.residual * p.residual - 0.5).abs() < 1e-12);
    }

    #[test]
    fn membership_rejects_wrong_shape() {
        assert!(m2_full().membership(&CMat::zeros(3, 3)).is_err());
    }

    #[test]
    fn amplify_unit_examples() {
        let s = m2_full();
        let u1 = s.amplify_unit(1).unwrap();
        assert_eq!(s.embed_amplified(&u1), CMat::identity(2));
        assert_eq!(s.embed_amplified(&s.amplify_unit(2).unwrap()), CMat::identity(4));
        assert_eq!(s.embed_amplified(&s.amplify_unit(3).unwrap()), CMat::identity(6));
        let no_unit = make_space(vec![CMat::identity(2)], None).unwrap();
        assert!(matches!(no_unit.amplify_unit(2), Err(crate::Error::Precondition(_))));
    }

    #[test]
    fn norm_examples() {
        let s = m2_full();
        assert_eq!(s.norm(&Element::zero(4)), 0.0);
        assert!((s.norm(s.unit().unwrap()) - 1.0).abs() < 1e-14);
        let x = Element(vec![ZERO, C64::new(0.5, 0.0), ZERO, ZERO]);
        let y = Element(vec![ZERO, ZERO, ZERO, C64::new(0.0, 2.0)]);
        let d = AmplifiedElement::diagonal(&[x.clone(), y.clone()]);
        assert!((s.norm_amplified(&d) - s.norm(&x).max(s.norm(&y))).abs() < 1e-14);
    }

    #[test]
    fn components_of_diagonal_space() {
        let f = |k: usize| CMat::diag(&(0..5).map(|j| I.powu((j * k) as u32)).collect::<Vec<_>>());
        let s = make_space(vec![f(0), f(1)], None).unwrap();
        assert_eq!(s.components().len(), 5);
        let x = Element(vec![ONE, ONE]);
        let dense = spectral_norm(&s.embed(&x)).unwrap();
        assert!((s.norm(&x) - dense).abs() < 1e-14);
    }
}
