//! Block matrices whose cells are affine in a few variable elements of a
//! space, with the spectral norm and its subgradient in the real
//! parameters of those variables.
//!
//! Every certificate in the crate is a norm of such a block: `[u_n x]`,
//! `[[tu, x], [y, tu]]`, `[[tu, y], [z, tv]]`. Parameters are laid out as
//! `p[2(v·d + k)] = Re c_{v,k}` and `p[2(v·d + k) + 1] = Im c_{v,k}` for
//! variable `v` and basis index `k`.

use crate::matcore::{top_singular, top_singular_values_of, CMat, C64, ZERO};
use crate::opspace::ConcreteOpSpace;

#[derive(Debug, Clone, Default)]
struct Cell {
    constant: Option<Vec<C64>>,
    links: Vec<(usize, C64)>,
}

/// Norm, subgradient and local gap of a block at a parameter point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Distance from the top singular value to the next one, across all
    /// components. Below `1e-8` the gradient is only a subgradient.
    pub gap: f64,
}

/// A `grid_rows x grid_cols` block over a space, affine in `n_vars`
/// variable elements.
#[derive(Debug, Clone)]
pub struct BlockAssembly<'a> {
    space: &'a ConcreteOpSpace,
    grid_rows: usize,
    grid_cols: usize,
    n_vars: usize,
    cells: Vec<Cell>,
}

impl<'a> BlockAssembly<'a> {
    pub fn new(space: &'a ConcreteOpSpace, grid_rows: usize, grid_cols: usize, n_vars: usize) -> Self {
        BlockAssembly { space, grid_rows, grid_cols, n_vars, cells: vec![Cell::default(); grid_rows * grid_cols] }
    }

    pub fn space(&self) -> &'a ConcreteOpSpace {
        self.space
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Length of the real parameter vector.
    pub fn n_params(&self) -> usize {
        2 * self.n_vars * self.space.dim()
    }

    /// Adds `scale · coeffs` to the constant part of cell `(i, j)`.
    pub fn add_constant(&mut self, i: usize, j: usize, coeffs: &[C64], scale: C64) -> &mut Self {
        let d = self.space.dim();
        let cell = &mut self.cells[i * self.grid_cols + j];
        let slot = cell.constant.get_or_insert_with(|| vec![ZERO; d]);
        for (s, c) in slot.iter_mut().zip(coeffs) {
            *s += scale * c;
        }
        self
    }

    /// Adds `scale · var` to cell `(i, j)`.
    pub fn link(&mut self, i: usize, j: usize, var: usize, scale: C64) -> &mut Self {
        assert!(var < self.n_vars, "variable index out of range");
        self.cells[i * self.grid_cols + j].links.push((var, scale));
        self
    }

    fn cell_coeffs(&self, cell: &Cell, params: &[f64]) -> Option<Vec<C64>> {
        if cell.constant.is_none() && cell.links.is_empty() {
            return None;
        }
        let d = self.space.dim();
        let mut out = cell.constant.clone().unwrap_or_else(|| vec![ZERO; d]);
        for &(v, s) in &cell.links {
            for (k, o) in out.iter_mut().enumerate() {
                let base = 2 * (v * d + k);
                *o += s * C64::new(params[base], params[base + 1]);
            }
        }
        Some(out)
    }

    fn all_cell_coeffs(&self, params: &[f64]) -> Vec<Option<Vec<C64>>> {
        self.cells.iter().map(|c| self.cell_coeffs(c, params)).collect()
    }

    /// Writes component `comp` of the block into `buf` (row-major) and
    /// returns its shape.
    fn fill_component(&self, comp: usize, coeffs: &[Option<Vec<C64>>], buf: &mut Vec<C64>) -> (usize, usize) {
        let comp = &self.space.components()[comp];
        let (h, w) = (comp.rows.len(), comp.cols.len());
        let (rows, cols) = (self.grid_rows * h, self.grid_cols * w);
        buf.clear();
        buf.resize(rows * cols, ZERO);
        for gi in 0..self.grid_rows {
            for gj in 0..self.grid_cols {
                let Some(c) = &coeffs[gi * self.grid_cols + gj] else { continue };
                for (ck, bk) in c.iter().zip(&comp.basis) {
                    if *ck == ZERO {
                        continue;
                    }
                    for r in 0..h {
                        for col in 0..w {
                            buf[(gi * h + r) * cols + gj * w + col] += ck * bk[(r, col)];
                        }
                    }
                }
            }
        }
        (rows, cols)
    }

    fn component_matrix(&self, comp: usize, coeffs: &[Option<Vec<C64>>]) -> CMat {
        let mut buf = Vec::new();
        let (rows, cols) = self.fill_component(comp, coeffs, &mut buf);
        CMat::from_fn(rows, cols, |r, c| buf[r * cols + c])
    }

    /// Dense ambient block matrix at `params`.
    pub fn matrix(&self, params: &[f64]) -> CMat {
        let (p, q) = self.space.ambient_shape();
        let mut out = CMat::zeros(self.grid_rows * p, self.grid_cols * q);
        for (idx, coeffs) in self.all_cell_coeffs(params).into_iter().enumerate() {
            let Some(c) = coeffs else { continue };
            let (gi, gj) = (idx / self.grid_cols, idx % self.grid_cols);
            let block = self.space.embed(&crate::opspace::Element(c));
            for r in 0..p {
                for col in 0..q {
                    out[(gi * p + r, gj * q + col)] = block[(r, col)];
                }
            }
        }
        out
    }

    /// Spectral norm of the block.
    pub fn value(&self, params: &[f64]) -> f64 {
        let coeffs = self.all_cell_coeffs(params);
        let mut buf = Vec::new();
        (0..self.space.components().len())
            .map(|c| {
                let (r, k) = self.fill_component(c, &coeffs, &mut buf);
                top_singular_values_of(&buf, r, k).0
            })
            .fold(0.0, f64::max)
    }

    /// `(‖B(p + h eᵢ)‖, ‖B(p − h eᵢ)‖)` for every parameter `i`. Components
    /// that cannot reach the maximum under a step of size `h` are skipped.
    pub fn values_along(&self, params: &[f64], step: f64) -> Vec<(f64, f64)> {
        let coeffs = self.all_cell_coeffs(params);
        let comps = self.space.components();
        let mut buf = Vec::new();
        let mut bounds = Vec::with_capacity(comps.len());
        for (c, comp) in comps.iter().enumerate() {
            let (r, k) = self.fill_component(c, &coeffs, &mut buf);
            let sigma = top_singular_values_of(&buf, r, k).0;
            // ‖∂B_c/∂p_i‖ ≤ Σ_cells |scale| · max_k ‖B_k‖_F
            let bmax = comp.basis.iter().map(|b| b.frobenius_norm()).fold(0.0, f64::max);
            let lip = (0..self.n_vars)
                .map(|v| self.cells.iter().flat_map(|cell| &cell.links).filter(|l| l.0 == v).map(|l| l.1.norm()).sum::<f64>())
                .fold(0.0, f64::max)
                * bmax;
            let slack = step * lip + 1e-12 * (1.0 + sigma);
            bounds.push((sigma - slack, sigma + slack));
        }
        let floor = bounds.iter().map(|b| b.0).fold(f64::NEG_INFINITY, f64::max);
        let live: Vec<usize> = (0..comps.len()).filter(|&c| bounds[c].1 >= floor).collect();
        let eval = |p: &[f64], buf: &mut Vec<C64>| {
            let coeffs = self.all_cell_coeffs(p);
            live.iter()
                .map(|&c| {
                    let (r, k) = self.fill_component(c, &coeffs, buf);
                    top_singular_values_of(buf, r, k).0
                })
                .fold(0.0, f64::max)
        };
        let mut p = params.to_vec();
        (0..params.len())
            .map(|i| {
                let x = p[i];
                p[i] = x + step;
                let hi = eval(&p, &mut buf);
                p[i] = x - step;
                let lo = eval(&p, &mut buf);
                p[i] = x;
                (hi, lo)
            })
            .collect()
    }

    /// Norm together with the subgradient `Re(a* (∂M) b)` from the top
    /// singular pair of the largest component.
    pub fn evaluate(&self, params: &[f64]) -> Evaluation {
        let coeffs = self.all_cell_coeffs(params);
        let comps = self.space.components();
        let mut best: Option<(usize, f64)> = None;
        let mut runner_up = 0.0f64;
        let mut buf = Vec::new();
        for c in 0..comps.len() {
            let (r, k) = self.fill_component(c, &coeffs, &mut buf);
            let (sigma, _) = top_singular_values_of(&buf, r, k);
            match best {
                Some((_, b)) if sigma <= b => runner_up = runner_up.max(sigma),
                _ => {
                    if let Some((_, b)) = best {
                        runner_up = runner_up.max(b);
                    }
                    best = Some((c, sigma));
                }
            }
        }
        let best = best.map(|(c, _)| (c, top_singular(&self.component_matrix(c, &coeffs))));
        let d = self.space.dim();
        let mut gradient = vec![0.0; self.n_params()];
        let Some((ci, ts)) = best else {
            return Evaluation { value: 0.0, gradient, gap: 0.0 };
        };
        let comp = &comps[ci];
        let (h, w) = (comp.rows.len(), comp.cols.len());
        for (idx, cell) in self.cells.iter().enumerate() {
            if cell.links.is_empty() {
                continue;
            }
            let (gi, gj) = (idx / self.grid_cols, idx % self.grid_cols);
            let a = &ts.left[gi * h..(gi + 1) * h];
            let b = &ts.right[gj * w..(gj + 1) * w];
            for (k, bk) in comp.basis.iter().enumerate() {
                // a* B_k b
                let mut wk = ZERO;
                for r in 0..h {
                    if a[r] == ZERO {
                        continue;
                    }
                    let mut row = ZERO;
                    for col in 0..w {
                        row += bk[(r, col)] * b[col];
                    }
                    wk += a[r].conj() * row;
                }
                for &(v, s) in &cell.links {
                    let z = s * wk;
                    gradient[2 * (v * d + k)] += z.re;
                    gradient[2 * (v * d + k) + 1] -= z.im;
                }
            }
        }
        let gap = (ts.sigma - ts.second).min(ts.sigma - runner_up);
        Evaluation { value: ts.sigma, gradient, gap }
    }
}
