//! Dense complex matrices and the spectral routines every norm evaluation
//! in the crate goes through.
//!
//! Singular values are obtained from the Hermitian Gram matrix with a cyclic
//! Jacobi eigensolver. Hermitian inputs are first split into the connected
//! components of their sparsity graph, so block-diagonal and diagonal
//! matrices (the commutative models) cost one small solve per block.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{invalid, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Relative tolerance on `‖M − M*‖` accepted by the Hermitian routines.
pub const HERMITICITY_TOL: f64 = 1e-9;
/// Eigenvalues down to `−EIGEN_CLAMP · max(1, ‖M‖)` are treated as zero by
/// [`psd_sqrt`].
pub const EIGEN_CLAMP: f64 = 1e-9;

const JACOBI_MAX_SWEEPS: usize = 64;

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMat {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(invalid(format!(
                "matrix data has {} entries, expected {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(CMat { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMat { rows, cols, data }
    }

    /// Builds a matrix from real row slices.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        CMat::from_fn(r, c, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        CMat::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn diag(entries: &[C64]) -> Self {
        let n = entries.len();
        let mut m = CMat::zeros(n, n);
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    /// Matrix unit `E_{ij}` of the given shape.
    pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Self {
        let mut m = CMat::zeros(rows, cols);
        m[(i, j)] = ONE;
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> CMat {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, s: C64) -> CMat {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> CMat {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    /// `self += s · other`.
    pub fn axpy(&mut self, s: C64, other: &CMat) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Matrix product. Zero entries of the left factor are skipped, which
    /// makes products of sparse (e.g. diagonal) matrices cheap.
    pub fn matmul(&self, other: &CMat) -> Result<CMat> {
        if self.cols != other.rows {
            return Err(invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius inner product `tr(self* · other)`.
    pub fn inner(&self, other: &CMat) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| *z == ZERO)
    }

    /// Copies the submatrix with the given row and column indices.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> CMat {
        CMat::from_fn(rows.len(), cols.len(), |r, c| self[(rows[r], cols[c])])
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    fn checked_same_shape(&self, other: &CMat, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(invalid(format!(
                "cannot {op} {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &CMat) -> Result<CMat> {
        self.checked_same_shape(other, "add")?;
        Ok(self + other)
    }

    pub fn try_sub(&self, other: &CMat) -> Result<CMat> {
        self.checked_same_shape(other, "subtract")?;
        Ok(self - other)
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &CMat {
    type Output = CMat;
    fn add(self, rhs: &CMat) -> CMat {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in addition");
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMat {
    type Output = CMat;
    fn sub(self, rhs: &CMat) -> CMat {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in subtraction");
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &CMat {
    type Output = CMat;
    fn neg(self) -> CMat {
        self.scale_real(-1.0)
    }
}

impl Mul for &CMat {
    type Output = CMat;
    fn mul(self, rhs: &CMat) -> CMat {
        self.matmul(rhs).expect("shape mismatch in multiplication")
    }
}

impl Mul<C64> for &CMat {
    type Output = CMat;
    fn mul(self, rhs: C64) -> CMat {
        self.scale(rhs)
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> Result<f64> {
    if m.rows == 0 || m.cols == 0 {
        return Err(invalid("spectral norm of an empty matrix"));
    }
    Ok(top_singular(m).sigma)
}

/// Top singular triple of a matrix together with the second singular value.
#[derive(Debug, Clone)]
pub struct TopSingular {
    pub sigma: f64,
    pub second: f64,
    /// Unit left singular vector (length `rows`).
    pub left: Vec<C64>,
    /// Unit right singular vector (length `cols`).
    pub right: Vec<C64>,
}

fn gram(m: &CMat) -> (Vec<C64>, usize, bool) {
    let (rows, cols) = m.shape();
    let use_right = cols <= rows;
    let n = if use_right { cols } else { rows };
    let mut gram = vec![ZERO; n * n];
    if use_right {
        // M* M
        for i in 0..n {
            for j in i..n {
                let mut s = ZERO;
                for k in 0..rows {
                    s += m.data[k * cols + i].conj() * m.data[k * cols + j];
                }
                gram[i * n + j] = s;
                gram[j * n + i] = s.conj();
            }
        }
    } else {
        // M M*
        for i in 0..n {
            for j in i..n {
                let mut s = ZERO;
                for k in 0..cols {
                    s += m.data[i * cols + k] * m.data[j * cols + k].conj();
                }
                gram[i * n + j] = s;
                gram[j * n + i] = s.conj();
            }
        }
    }
    (gram, n, use_right)
}

/// Largest and second largest singular values, without vectors.
pub fn top_singular_values(m: &CMat) -> (f64, f64) {
    top_singular_values_of(&m.data, m.rows, m.cols)
}

/// [`top_singular_values`] of a row-major `rows x cols` slice; no
/// allocation when the smaller side is at most 2.
pub fn top_singular_values_of(data: &[C64], rows: usize, cols: usize) -> (f64, f64) {
    if rows == 0 || cols == 0 {
        return (0.0, 0.0);
    }
    let n = rows.min(cols);
    if n > 2 {
        let (g, n, _) = gram(&CMat { rows, cols, data: data.to_vec() });
        let (vals, _) = eigen_hermitian_raw(&g, n, false);
        return (vals[n - 1].max(0.0).sqrt(), vals[n - 2].max(0.0).sqrt());
    }
    // entries of the n x n Gram matrix on the smaller side
    let at = |i: usize, k: usize| if cols <= rows { data[k * cols + i] } else { data[i * cols + k] };
    let len = rows.max(cols);
    let (mut a, mut off, mut c) = (0.0, ZERO, 0.0);
    for k in 0..len {
        let x = at(0, k);
        a += x.norm_sqr();
        if n == 2 {
            let y = at(1, k);
            off += x.conj() * y;
            c += y.norm_sqr();
        }
    }
    if n == 1 {
        return (a.max(0.0).sqrt(), 0.0);
    }
    let r = (0.25 * (a - c) * (a - c) + off.norm_sqr()).sqrt();
    let mid = 0.5 * (a + c);
    ((mid + r).max(0.0).sqrt(), (mid - r).max(0.0).sqrt())
}

/// Computes the top singular triple from the smaller Gram matrix.
pub fn top_singular(m: &CMat) -> TopSingular {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return TopSingular { sigma: 0.0, second: 0.0, left: vec![ZERO; rows], right: vec![ZERO; cols] };
    }
    let (gram, n, use_right) = gram(m);
    let (vals, vecs) = eigen_hermitian_raw(&gram, n, true);
    let vecs = vecs.expect("eigenvectors requested");
    let top = vals[n - 1].max(0.0);
    let sigma = top.sqrt();
    let second = if n >= 2 {
        vals[n - 2].max(0.0).sqrt()
    } else {
        0.0
    };
    let v: Vec<C64> = (0..n).map(|i| vecs[i * n + (n - 1)]).collect();

    let (left, right) = if use_right {
        let mut left = vec![ZERO; rows];
        for r in 0..rows {
            let mut s = ZERO;
            for c in 0..cols {
                s += m.data[r * cols + c] * v[c];
            }
            left[r] = s;
        }
        normalize_or_unit(&mut left);
        (left, v)
    } else {
        let mut right = vec![ZERO; cols];
        for c in 0..cols {
            let mut s = ZERO;
            for r in 0..rows {
                s += m.data[r * cols + c].conj() * v[r];
            }
            right[c] = s;
        }
        normalize_or_unit(&mut right);
        (v, right)
    };
    TopSingular { sigma, second, left, right }
}

fn normalize_or_unit(v: &mut [C64]) {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        for z in v.iter_mut() {
            *z /= n;
        }
    } else if let Some(first) = v.first_mut() {
        *first = ONE;
    }
}

/// Assembles `[[a, b], [c, d]]`.
pub fn block2x2(a: &CMat, b: &CMat, c: &CMat, d: &CMat) -> Result<CMat> {
    if a.rows != b.rows || c.rows != d.rows || a.cols != c.cols || b.cols != d.cols {
        return Err(invalid(format!(
            "incompatible blocks: a {:?}, b {:?}, c {:?}, d {:?}",
            a.shape(),
            b.shape(),
            c.shape(),
            d.shape()
        )));
    }
    let rows = a.rows + c.rows;
    let cols = a.cols + b.cols;
    Ok(CMat::from_fn(rows, cols, |r, col| match (r < a.rows, col < a.cols) {
        (true, true) => a[(r, col)],
        (true, false) => b[(r, col - a.cols)],
        (false, true) => c[(r - a.rows, col)],
        (false, false) => d[(r - a.rows, col - a.cols)],
    }))
}

/// Concatenates a rectangular grid of blocks. Rows of the grid must share
/// heights and columns must share widths.
pub fn block_grid(grid: &[Vec<CMat>]) -> Result<CMat> {
    let gr = grid.len();
    if gr == 0 || grid[0].is_empty() {
        return Err(invalid("empty block grid"));
    }
    let gc = grid[0].len();
    let heights: Vec<usize> = grid.iter().map(|row| row[0].rows).collect();
    let widths: Vec<usize> = grid[0].iter().map(|b| b.cols).collect();
    for (i, row) in grid.iter().enumerate() {
        if row.len() != gc {
            return Err(invalid("ragged block grid"));
        }
        for (j, b) in row.iter().enumerate() {
            if b.rows != heights[i] || b.cols != widths[j] {
                return Err(invalid(format!("block ({i},{j}) has incompatible shape {:?}", b.shape())));
            }
        }
    }
    let rows: usize = heights.iter().sum();
    let cols: usize = widths.iter().sum();
    let mut out = CMat::zeros(rows, cols);
    let mut r0 = 0;
    for (i, row) in grid.iter().enumerate() {
        let mut c0 = 0;
        for (j, b) in row.iter().enumerate() {
            for r in 0..b.rows {
                for c in 0..b.cols {
                    out[(r0 + r, c0 + c)] = b[(r, c)];
                }
            }
            c0 += widths[j];
        }
        r0 += heights[i];
    }
    Ok(out)
}

fn check_hermitian(m: &CMat) -> Result<()> {
    if !m.is_square() {
        return Err(invalid(format!("expected a square matrix, got {}x{}", m.rows, m.cols)));
    }
    let mut defect = 0.0;
    for r in 0..m.rows {
        for c in r..m.cols {
            defect += (m[(r, c)] - m[(c, r)].conj()).norm_sqr();
        }
    }
    let defect = defect.sqrt();
    if defect > HERMITICITY_TOL * m.frobenius_norm() {
        return Err(invalid(format!("matrix is not hermitian (defect {defect:.3e})")));
    }
    Ok(())
}

/// Real eigenvalues of a Hermitian matrix in ascending order.
pub fn herm_eigen(m: &CMat) -> Result<Vec<f64>> {
    check_hermitian(m)?;
    let n = m.rows;
    let (vals, _) = eigen_hermitian_raw(m.as_slice(), n, false);
    Ok(vals)
}

/// Eigenvalues (ascending) and unitary eigenvector matrix (columns).
pub fn herm_eigen_vectors(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    check_hermitian(m)?;
    let n = m.rows;
    let (vals, vecs) = eigen_hermitian_raw(m.as_slice(), n, true);
    Ok((vals, CMat { rows: n, cols: n, data: vecs.expect("eigenvectors requested") }))
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn herm_apply(m: &CMat, f: impl Fn(f64) -> f64) -> Result<CMat> {
    let (vals, vecs) = herm_eigen_vectors(m)?;
    let n = m.rows;
    let fv: Vec<f64> = vals.iter().map(|&v| f(v)).collect();
    Ok(CMat::from_fn(n, n, |r, c| {
        let mut s = ZERO;
        for k in 0..n {
            s += vecs[(r, k)] * fv[k] * vecs[(c, k)].conj();
        }
        s
    }))
}

/// Hermitian square root of a positive semidefinite matrix.
pub fn psd_sqrt(m: &CMat) -> Result<CMat> {
    let vals = herm_eigen(m)?;
    let scale = vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if let Some(&min) = vals.first() {
        if min < -EIGEN_CLAMP * scale {
            return Err(invalid(format!("matrix is not positive semidefinite (eigenvalue {min:.3e})")));
        }
    }
    herm_apply(m, |v| v.max(0.0).sqrt())
}

/// Hermitian eigen-decomposition on a raw row-major buffer.
///
/// The matrix is split into the connected components of its nonzero
/// pattern; each component is diagonalised by cyclic Jacobi rotations.
/// Returns ascending eigenvalues and, optionally, the eigenvector matrix
/// with eigenvectors as columns in the same order.
pub(crate) fn eigen_hermitian_raw(a: &[C64], n: usize, want_vectors: bool) -> (Vec<f64>, Option<Vec<C64>>) {
    if n == 0 {
        return (Vec::new(), want_vectors.then(Vec::new));
    }
    let components = sparsity_components(a, n);
    let mut pairs: Vec<(f64, Vec<(usize, C64)>)> = Vec::with_capacity(n);
    for comp in components {
        let k = comp.len();
        let mut sub = vec![ZERO; k * k];
        for (i, &gi) in comp.iter().enumerate() {
            for (j, &gj) in comp.iter().enumerate() {
                // symmetrise so tiny anti-hermitian noise is discarded
                sub[i * k + j] = 0.5 * (a[gi * n + gj] + a[gj * n + gi].conj());
            }
        }
        let (vals, vecs) = jacobi(&mut sub, k, want_vectors);
        for (col, &val) in vals.iter().enumerate() {
            let vector = match &vecs {
                Some(v) => comp.iter().enumerate().map(|(i, &gi)| (gi, v[i * k + col])).collect(),
                None => Vec::new(),
            };
            pairs.push((val, vector));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let vals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let vecs = want_vectors.then(|| {
        let mut out = vec![ZERO; n * n];
        for (col, (_, entries)) in pairs.iter().enumerate() {
            for &(row, z) in entries {
                out[row * n + col] = z;
            }
        }
        out
    });
    (vals, vecs)
}

/// Connected components of the graph with an edge wherever `a[i][j] != 0`.
fn sparsity_components(a: &[C64], n: usize) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if a[i * n + j] != ZERO || a[j * n + i] != ZERO {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index_of_root = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if index_of_root[r] == usize::MAX {
            index_of_root[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[index_of_root[r]].push(i);
    }
    groups
}

/// Unitary acting on the (p, q) plane that annihilates the off-diagonal
/// entry `off` of the Hermitian 2x2 block `[[app, off], [conj(off), aqq]]`.
///
/// Returns `(v_pp, v_pq, v_qp, v_qq)`.
fn jacobi_rotation(app: f64, aqq: f64, off: C64) -> (C64, C64, C64, C64) {
    let mag = off.norm();
    let phase = if mag > 0.0 { off / mag } else { ONE };
    let theta = (aqq - app) / (2.0 * mag);
    let t = if theta.is_infinite() {
        0.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let ph = phase.conj();
    (C64::new(c, 0.0), C64::new(s, 0.0), -ph * s, ph * c)
}

fn jacobi(a: &mut [C64], n: usize, want_vectors: bool) -> (Vec<f64>, Option<Vec<C64>>) {
    let mut v = want_vectors.then(|| {
        let mut id = vec![ZERO; n * n];
        for i in 0..n {
            id[i * n + i] = ONE;
        }
        id
    });
    if n > 1 {
        let total: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        for _sweep in 0..JACOBI_MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[p * n + q].norm_sqr();
                }
            }
            if off <= 1e-30 * total || off == 0.0 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq.norm_sqr() <= 1e-300 {
                        continue;
                    }
                    let (vpp, vpq, vqp, vqq) = jacobi_rotation(a[p * n + p].re, a[q * n + q].re, apq);
                    // A <- A V
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = akp * vpp + akq * vqp;
                        a[k * n + q] = akp * vpq + akq * vqq;
                    }
                    // A <- V* A
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = vpp.conj() * apk + vqp.conj() * aqk;
                        a[q * n + k] = vpq.conj() * apk + vqq.conj() * aqk;
                    }
                    a[p * n + q] = ZERO;
                    a[q * n + p] = ZERO;
                    a[p * n + p].im = 0.0;
                    a[q * n + q].im = 0.0;
                    if let Some(v) = v.as_mut() {
                        for k in 0..n {
                            let vkp = v[k * n + p];
                            let vkq = v[k * n + q];
                            v[k * n + p] = vkp * vpp + vkq * vqp;
                            v[k * n + q] = vkp * vpq + vkq * vqq;
                        }
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].re.total_cmp(&a[j * n + j].re));
    let vals = order.iter().map(|&i| a[i * n + i].re).collect();
    let vecs = v.map(|v| {
        let mut sorted = vec![ZERO; n * n];
        for (new_col, &old_col) in order.iter().enumerate() {
            for r in 0..n {
                sorted[r * n + new_col] = v[r * n + old_col];
            }
        }
        sorted
    });
    (vals, vecs)
}

/// Singular values and right singular vectors of the `rows x cols` matrix
/// whose columns are given, by one-sided (Hestenes) Jacobi.
///
/// Accurate for small singular values, which is what rank and null-space
/// decisions need. Singular values are returned in descending order with
/// matching columns of the right factor.
pub fn column_svd(columns: &[Vec<C64>]) -> (Vec<f64>, Vec<Vec<C64>>) {
    let n = columns.len();
    let mut cols: Vec<Vec<C64>> = columns.to_vec();
    let mut v: Vec<Vec<C64>> = (0..n)
        .map(|i| {
            let mut e = vec![ZERO; n];
            e[i] = ONE;
            e
        })
        .collect();
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: f64 = cols[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = cols[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: C64 = cols[p].iter().zip(&cols[q]).map(|(a, b)| a.conj() * b).sum();
                if gamma.norm() <= 1e-15 * (alpha * beta).sqrt() || gamma.norm() == 0.0 {
                    continue;
                }
                rotated = true;
                let (vpp, vpq, vqp, vqq) = jacobi_rotation(alpha, beta, gamma);
                let (left, right) = cols.split_at_mut(q);
                for (a, b) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (x, y) = (*a, *b);
                    *a = x * vpp + y * vqp;
                    *b = x * vpq + y * vqq;
                }
                for row in v.iter_mut() {
                    let (x, y) = (row[p], row[q]);
                    row[p] = x * vpp + y * vqp;
                    row[q] = x * vpq + y * vqq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sig: Vec<f64> = cols.iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sig[j].total_cmp(&sig[i]));
    let values = order.iter().map(|&i| sig[i]).collect();
    let vectors = order.iter().map(|&j| v.iter().map(|row| row[j]).collect()).collect();
    (values, vectors)
}

/// Numerical rank of a family of complex vectors: singular values above
/// `rel_tol · σ_max` are counted.
pub fn complex_rank(vectors: &[Vec<C64>], rel_tol: f64) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let (sig, _) = column_svd(vectors);
    let top = sig.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    sig.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Orthonormal basis (real vectors of length `ncols`) of the null space of
/// a real matrix given row by row.
///
/// Singular values at most `rel_tol · max(σ_max, 1)` are treated as zero.
pub fn real_null_space(rows: &[Vec<f64>], ncols: usize, rel_tol: f64) -> Vec<Vec<f64>> {
    if ncols == 0 {
        return Vec::new();
    }
    // columns of the equation matrix
    let columns: Vec<Vec<C64>> =
        (0..ncols).map(|j| rows.iter().map(|r| C64::new(r[j], 0.0)).collect()).collect();
    let (sig, vecs) = column_svd(&columns);
    let scale = sig.first().copied().unwrap_or(0.0).max(1.0);
    sig.iter()
        .zip(vecs)
        .filter(|(s, _)| **s <= rel_tol * scale)
        .map(|(_, v)| v.iter().map(|z| z.re).collect())
        .collect()
}

/// Solves `a · x = b` for square `a` by Gaussian elimination with partial
/// pivoting. Fails on a (numerically) singular `a`.
pub fn solve(a: &CMat, b: &CMat) -> Result<CMat> {
    let n = a.rows;
    if a.cols != n || b.rows != n {
        return Err(invalid(format!("solve: shapes {:?} and {:?}", a.shape(), b.shape())));
    }
    let m = b.cols;
    let mut a = a.clone();
    let mut x = b.clone();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[(i, col)].norm().total_cmp(&a[(j, col)].norm())).expect("non-empty range");
        if a[(piv, col)].norm() <= 1e-13 * scale {
            return Err(invalid("solve: singular matrix"));
        }
        if piv != col {
            for c in 0..n {
                let t = a[(piv, c)];
                a[(piv, c)] = a[(col, c)];
                a[(col, c)] = t;
            }
            for c in 0..m {
                let t = x[(piv, c)];
                x[(piv, c)] = x[(col, c)];
                x[(col, c)] = t;
            }
        }
        let p = a[(col, col)];
        for r in (col + 1)..n {
            let f = a[(r, col)] / p;
            if f == ZERO {
                continue;
            }
            for c in col..n {
                let v = a[(col, c)];
                a[(r, c)] -= f * v;
            }
            for c in 0..m {
                let v = x[(col, c)];
                x[(r, c)] -= f * v;
            }
        }
    }
    for col in (0..n).rev() {
        let p = a[(col, col)];
        for c in 0..m {
            let mut s = x[(col, c)];
            for k in (col + 1)..n {
                s -= a[(col, k)] * x[(k, c)];
            }
            x[(col, c)] = s / p;
        }
    }
    Ok(x)
}

/// Reduced row echelon form of the span of real vectors, with pivots
/// scaled to one and entries below `tol` (relative) cleared.
///
/// Two families with the same span give the same result, which makes it a
/// canonical basis.
pub fn rref_real(vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut m: Vec<Vec<f64>> = vectors.to_vec();
    let ncols = m.first().map_or(0, Vec::len);
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut row = 0;
    for col in 0..ncols {
        if row == m.len() {
            break;
        }
        let (piv, best) = (row..m.len()).map(|r| (r, m[r][col].abs())).fold((row, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        if best <= tol * scale {
            continue;
        }
        m.swap(row, piv);
        let p = m[row][col];
        m[row].iter_mut().for_each(|v| *v /= p);
        let pivot_row = m[row].clone();
        for (r, other) in m.iter_mut().enumerate() {
            if r != row && other[col] != 0.0 {
                let f = other[col];
                other.iter_mut().zip(&pivot_row).for_each(|(v, q)| *v -= f * q);
            }
        }
        row += 1;
    }
    m.truncate(row);
    for r in &mut m {
        r.iter_mut().for_each(|v| {
            if v.abs() <= tol {
                *v = 0.0;
            }
        });
    }
    m
}
