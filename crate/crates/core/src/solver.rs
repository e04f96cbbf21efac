//! Multistart first-order methods shared by all certificates.
//!
//! Two problems occur: minimising a convex function of an element over the
//! unit ball of `M_n(X)` (partner and product searches), and maximising a
//! function over the unit sphere (defect searches). Both run seeded starts
//! in fixed batches on the rayon pool and reduce in start order, so results
//! do not depend on the number of threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{BlockAssembly, Evaluation};
use crate::error::{invalid, Error, Result};
use crate::opspace::{AmplifiedElement, ConcreteOpSpace};
use crate::report::SolverDiagnostics;

/// Singular gap below which the top pair gives only a subgradient.
pub const GAP_TOL: f64 = 1e-8;
/// Step of the central finite-difference fallback.
pub const FD_STEP: f64 = 1e-6;
/// Relative gain over a stagnation window below which a diminishing-step
/// run counts as converged.
const PLATEAU: f64 = 1e-6;
const BATCH: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub seed: u64,
    /// Starts for sphere searches.
    pub starts: usize,
    /// Starts for convex ball searches.
    pub convex_starts: usize,
    pub max_iters: usize,
    /// `s0` of the `s0/√k` schedule, relative to the unit ball.
    pub step_scale: f64,
    pub stationarity: f64,
    /// Iterations without improvement after which a run stops.
    pub stagnation_window: usize,
    pub t_grid: Vec<f64>,
    pub t_large: f64,
    pub cert_tol: f64,
    pub fail_threshold: f64,
    pub hermitian_tol: f64,
    /// Tolerance on reconstructed products and tables.
    pub product_tol: f64,
    /// Random ball elements tested beyond the basis by detectors.
    pub ball_samples: usize,
    pub max_level: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            seed: 0x5eed,
            starts: 32,
            convex_starts: 4,
            max_iters: 500,
            step_scale: 0.1,
            stationarity: 1e-8,
            stagnation_window: 60,
            t_grid: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
            t_large: 100.0,
            cert_tol: 1e-4,
            fail_threshold: 1e-3,
            hermitian_tol: 1e-8,
            product_tol: 1e-3,
            ball_samples: 4,
            max_level: 2,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step_scale", self.step_scale),
            ("stationarity", self.stationarity),
            ("t_large", self.t_large),
            ("cert_tol", self.cert_tol),
            ("fail_threshold", self.fail_threshold),
            ("hermitian_tol", self.hermitian_tol),
            ("product_tol", self.product_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.starts == 0 || self.convex_starts == 0 || self.max_iters == 0 || self.max_level == 0 {
            return Err(invalid("starts, convex_starts, max_iters and max_level must be positive"));
        }
        if self.stagnation_window == 0 {
            return Err(invalid("stagnation_window must be positive"));
        }
        if self.t_grid.is_empty() || self.t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(invalid("t_grid must be a nonempty list of positive numbers"));
        }
        if self.fail_threshold < 10.0 * self.cert_tol * (1.0 - 1e-12) {
            return Err(invalid(format!(
                "fail_threshold {} must be at least 10 x cert_tol {}",
                self.fail_threshold, self.cert_tol
            )));
        }
        Ok(())
    }
}

/// A function of the real parameters of a few elements.
pub trait Objective: Sync {
    fn n_params(&self) -> usize;
    fn evaluate(&self, p: &[f64]) -> Evaluation;
    fn value(&self, p: &[f64]) -> f64 {
        self.evaluate(p).value
    }
    /// `(f(p + h eᵢ), f(p − h eᵢ))` for every parameter.
    fn values_along(&self, p: &[f64], step: f64) -> Vec<(f64, f64)> {
        let mut q = p.to_vec();
        (0..p.len())
            .map(|i| {
                let x = q[i];
                q[i] = x + step;
                let hi = self.value(&q);
                q[i] = x - step;
                let lo = self.value(&q);
                q[i] = x;
                (hi, lo)
            })
            .collect()
    }
}

impl Objective for BlockAssembly<'_> {
    fn n_params(&self) -> usize {
        BlockAssembly::n_params(self)
    }
    fn evaluate(&self, p: &[f64]) -> Evaluation {
        BlockAssembly::evaluate(self, p)
    }
    fn value(&self, p: &[f64]) -> f64 {
        BlockAssembly::value(self, p)
    }
    fn values_along(&self, p: &[f64], step: f64) -> Vec<(f64, f64)> {
        BlockAssembly::values_along(self, p, step)
    }
}

/// Objective given by a closure.
pub struct FnObjective<F> {
    pub n_params: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> Evaluation + Sync> Objective for FnObjective<F> {
    fn n_params(&self) -> usize {
        self.n_params
    }
    fn evaluate(&self, p: &[f64]) -> Evaluation {
        (self.f)(p)
    }
}

/// `max_t (‖B_t(p)‖ − c_t)`, optionally clipped at zero: the feasibility
/// residual of a family of norm constraints.
pub struct MaxResidual<'a> {
    pub blocks: Vec<(BlockAssembly<'a>, f64)>,
    pub clip: bool,
}

impl Objective for MaxResidual<'_> {
    fn n_params(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.0.n_params())
    }
    fn evaluate(&self, p: &[f64]) -> Evaluation {
        let values: Vec<f64> = self.blocks.iter().map(|(b, c)| b.value(p) - c).collect();
        let Some(top) = (0..values.len()).reduce(|a, b| if values[b] > values[a] { b } else { a }) else {
            return Evaluation { value: 0.0, gradient: vec![0.0; self.n_params()], gap: 0.0 };
        };
        let second = values.iter().enumerate().filter(|&(i, _)| i != top).map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
        let (b, c) = &self.blocks[top];
        let mut e = b.evaluate(p);
        e.value -= c;
        e.gap = e.gap.min(e.value - second);
        if self.clip && e.value <= 0.0 {
            e.value = 0.0;
            e.gradient.iter_mut().for_each(|g| *g = 0.0);
        }
        e
    }
    fn value(&self, p: &[f64]) -> f64 {
        let v = self.blocks.iter().map(|(b, c)| b.value(p) - c).fold(f64::NEG_INFINITY, f64::max);
        if self.clip {
            v.max(0.0)
        } else {
            v
        }
    }
    fn values_along(&self, p: &[f64], step: f64) -> Vec<(f64, f64)> {
        let floor = if self.clip { 0.0 } else { f64::NEG_INFINITY };
        let mut out = vec![(floor, floor); p.len()];
        for (b, c) in &self.blocks {
            for (o, (hi, lo)) in out.iter_mut().zip(b.values_along(p, step)) {
                o.0 = o.0.max(hi - c);
                o.1 = o.1.max(lo - c);
            }
        }
        out
    }
}

/// The norm on parameter vectors: elements of `M_level(X)`.
#[derive(Debug, Clone, Copy)]
pub struct Geometry<'a> {
    pub space: &'a ConcreteOpSpace,
    pub level: usize,
    /// Number of independent elements packed in the parameters; the norm
    /// is the largest of theirs.
    pub blocks: usize,
}

impl<'a> Geometry<'a> {
    pub fn new(space: &'a ConcreteOpSpace, level: usize) -> Self {
        Geometry { space, level, blocks: 1 }
    }

    pub fn n_params(&self) -> usize {
        2 * self.space.dim() * self.level * self.level * self.blocks
    }

    pub fn norm(&self, p: &[f64]) -> f64 {
        let chunk = p.len() / self.blocks.max(1);
        p.chunks(chunk.max(1))
            .map(|c| self.space.norm_amplified(&AmplifiedElement::from_params(self.level, self.space.dim(), c)))
            .fold(0.0, f64::max)
    }
}

/// Gradient of a norm objective with the finite-difference fallback at
/// near-multiple singular values.
#[derive(Debug, Clone)]
pub struct Subgradient {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub fd_fallback: bool,
}

/// Subgradient of `‖B(p)‖`: the analytic top-pair gradient when the
/// singular gap exceeds [`GAP_TOL`], else central differences with step
/// [`FD_STEP`].
pub fn spectral_subgradient(block: &dyn Objective, at: &[f64]) -> Subgradient {
    let e = block.evaluate(at);
    if e.gap > GAP_TOL {
        return Subgradient { value: e.value, gradient: e.gradient, fd_fallback: false };
    }
    let gradient = block.values_along(at, FD_STEP).into_iter().map(|(hi, lo)| (hi - lo) / (2.0 * FD_STEP)).collect();
    Subgradient { value: e.value, gradient, fd_fallback: true }
}

/// Best point found by a multistart search.
#[derive(Debug, Clone)]
pub struct Optimum {
    pub params: Vec<f64>,
    pub value: f64,
    pub diagnostics: SolverDiagnostics,
}

#[derive(Debug, Clone, Default)]
pub struct BallOptions {
    /// Known optimal value (e.g. zero for a feasibility residual). Enables
    /// Polyak steps and early exit.
    pub target: Option<f64>,
    /// Starts tried right after the origin.
    pub warm_starts: Vec<Vec<f64>>,
    /// Overrides `convex_starts`.
    pub starts: Option<usize>,
    /// The objective already penalises leaving the ball, so iterates are
    /// not projected. Radial scaling is not a Euclidean projection and can
    /// stall Polyak steps on the boundary.
    pub penalized: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SphereOptions {
    /// Starts tried before the basis directions.
    pub warm_starts: Vec<Vec<f64>>,
    /// Stop launching batches once this value is reached.
    pub stop_at: Option<f64>,
    pub starts: Option<usize>,
}

fn start_rng(seed: u64, index: usize) -> ChaCha8Rng {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(index as u64)))
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn check_finite(value: f64, p: &[f64]) -> Result<()> {
    if value.is_finite() && p.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Solver { message: format!("non-finite objective value {value}"), iterate: p.to_vec() })
    }
}

fn project_ball(geom: &Geometry, p: &mut [f64]) {
    let n = geom.norm(p);
    if n > 1.0 {
        p.iter_mut().for_each(|x| *x /= n);
    }
}

fn retract_sphere(geom: &Geometry, p: &mut [f64]) -> bool {
    let n = geom.norm(p);
    if n > 0.0 && n.is_finite() {
        p.iter_mut().for_each(|x| *x /= n);
        true
    } else {
        false
    }
}

fn basis_direction(geom: &Geometry, i: usize) -> Vec<f64> {
    let mut p = vec![0.0; geom.n_params()];
    p[2 * i] = 1.0;
    p
}

/// Deterministic start list for index `i` of a ball search.
fn ball_start(geom: &Geometry, opts: &BallOptions, seed: u64, i: usize) -> Vec<f64> {
    let n = geom.n_params();
    if i == 0 {
        return vec![0.0; n];
    }
    let i = i - 1;
    if let Some(w) = opts.warm_starts.get(i) {
        return w.clone();
    }
    let i = i - opts.warm_starts.len();
    if i < n / 2 {
        let mut p = basis_direction(geom, i);
        p.iter_mut().for_each(|x| *x *= 0.5);
        return p;
    }
    let mut rng = start_rng(seed, i);
    let mut p = gaussian(&mut rng, n);
    let r: f64 = rng.random();
    let norm = geom.norm(&p);
    if norm > 0.0 {
        p.iter_mut().for_each(|x| *x *= r / norm);
    }
    p
}

fn sphere_start(geom: &Geometry, opts: &SphereOptions, seed: u64, i: usize) -> Vec<f64> {
    let n = geom.n_params();
    if let Some(w) = opts.warm_starts.get(i) {
        return w.clone();
    }
    let i = i - opts.warm_starts.len();
    let d = geom.space.dim();
    let level = geom.level;
    // one basis element on the whole diagonal, then single cells
    if i < d && level > 1 {
        let mut p = vec![0.0; n];
        for c in 0..level {
            p[2 * ((c * level + c) * d + i)] = 1.0;
        }
        return p;
    }
    let i = if level > 1 { i - d } else { i };
    if i < n / 2 {
        return basis_direction(geom, i);
    }
    let mut rng = start_rng(seed, i);
    gaussian(&mut rng, n)
}

struct RunResult {
    params: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
    fd_fallback: bool,
}

fn ball_run(obj: &dyn Objective, geom: &Geometry, cfg: &SolverConfig, opts: &BallOptions, x0: Vec<f64>) -> Result<RunResult> {
    let target = opts.target;
    let mut x = x0;
    project_ball(geom, &mut x);
    let mut e = obj.evaluate(&x);
    check_finite(e.value, &x)?;
    let mut best = (e.value, x.clone());
    let mut polyak = target.is_some();
    let mut last_improve = 0usize;
    let mut k_dim = 0usize;
    let mut window = (0usize, best.0);
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=cfg.max_iters {
        iterations = k;
        if let Some(t) = target {
            if best.0 - t <= cfg.stationarity {
                converged = true;
                break;
            }
        }
        let gn2: f64 = e.gradient.iter().map(|g| g * g).sum();
        if gn2.sqrt() <= cfg.stationarity {
            converged = true;
            break;
        }
        let step = match (polyak, target) {
            (true, Some(t)) => (e.value - t) / gn2,
            _ => {
                k_dim += 1;
                cfg.step_scale / (k_dim as f64).sqrt() / gn2.sqrt()
            }
        };
        for (xi, gi) in x.iter_mut().zip(&e.gradient) {
            *xi -= step * gi;
        }
        if !opts.penalized {
            project_ball(geom, &mut x);
        }
        e = obj.evaluate(&x);
        check_finite(e.value, &x)?;
        if e.value < best.0 - 1e-12 * best.0.abs().max(1e-3) {
            best = (e.value, x.clone());
            last_improve = k;
        }
        if k - last_improve >= cfg.stagnation_window {
            if polyak {
                // the target is out of reach: continue with diminishing steps
                polyak = false;
                last_improve = k;
                window = (k, best.0);
                x = best.1.clone();
                e = obj.evaluate(&x);
            } else {
                converged = true;
                break;
            }
        }
        if !polyak && k - window.0 >= cfg.stagnation_window {
            // plateau: a whole window gained almost nothing
            if window.1 - best.0 <= PLATEAU * best.0.abs().max(1e-3) {
                converged = true;
                break;
            }
            window = (k, best.0);
        }
    }
    Ok(RunResult { params: best.1, value: best.0, iterations, converged, fd_fallback: false })
}

fn sphere_run(obj: &dyn Objective, geom: &Geometry, cfg: &SolverConfig, x0: Vec<f64>) -> Result<Option<RunResult>> {
    let mut x = x0;
    if !retract_sphere(geom, &mut x) {
        return Ok(None);
    }
    let mut sg = spectral_subgradient(obj, &x);
    check_finite(sg.value, &x)?;
    let mut fd_fallback = sg.fd_fallback;
    let mut best = (sg.value, x.clone());
    let mut last_improve = 0usize;
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=cfg.max_iters {
        iterations = k;
        let gn: f64 = sg.gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gn <= cfg.stationarity {
            converged = true;
            break;
        }
        let step = cfg.step_scale / (k as f64).sqrt() / gn;
        let mut y: Vec<f64> = x.iter().zip(&sg.gradient).map(|(xi, gi)| xi + step * gi).collect();
        if !retract_sphere(geom, &mut y) {
            break;
        }
        x = y;
        sg = spectral_subgradient(obj, &x);
        check_finite(sg.value, &x)?;
        fd_fallback |= sg.fd_fallback;
        if sg.value > best.0 + 1e-12 * best.0.abs().max(1e-3) {
            best = (sg.value, x.clone());
            last_improve = k;
        }
        if k - last_improve >= cfg.stagnation_window {
            converged = true;
            break;
        }
    }
    Ok(Some(RunResult { params: best.1, value: best.0, iterations, converged, fd_fallback }))
}

/// Reduces run results in start order: best value, ties to the lowest
/// index.
fn reduce(
    runs: Vec<(usize, RunResult)>,
    better: impl Fn(f64, f64) -> bool,
    best: &mut Option<(usize, RunResult)>,
    diag: &mut SolverDiagnostics,
) {
    for (i, r) in runs {
        diag.starts += 1;
        diag.iterations += r.iterations;
        diag.fd_fallback |= r.fd_fallback;
        diag.converged |= r.converged;
        let replace = match best {
            None => true,
            Some((_, b)) => better(r.value, b.value),
        };
        if replace {
            *best = Some((i, r));
        }
    }
}

/// Minimises a convex objective over the unit ball of `M_n(X)` by projected
/// subgradient steps (ball projection by norm scaling). Returns the best
/// iterate over all starts; its value is an upper bound on the infimum.
pub fn minimize_over_ball(obj: &dyn Objective, geom: &Geometry, cfg: &SolverConfig, opts: &BallOptions) -> Result<Optimum> {
    if obj.n_params() != geom.n_params() {
        return Err(invalid("objective and geometry disagree on the number of parameters"));
    }
    let total = opts.starts.unwrap_or(cfg.convex_starts).max(1);
    let mut best: Option<(usize, RunResult)> = None;
    let mut diag = SolverDiagnostics { converged: false, ..Default::default() };
    let mut next = 0;
    while next < total {
        let batch: Vec<usize> = (next..(next + BATCH).min(total)).collect();
        next += batch.len();
        let runs: Vec<(usize, RunResult)> = batch
            .par_iter()
            .map(|&i| ball_run(obj, geom, cfg, opts, ball_start(geom, opts, cfg.seed, i)).map(|r| (i, r)))
            .collect::<Result<_>>()?;
        reduce(runs, |a, b| a < b, &mut best, &mut diag);
        if let (Some(t), Some((_, b))) = (opts.target, &best) {
            if b.value - t <= cfg.stationarity {
                break;
            }
        }
    }
    let (idx, run) = best.expect("at least one start");
    diag.best_start = idx;
    diag.converged = run.converged;
    Ok(Optimum { params: run.params, value: run.value, diagnostics: diag })
}

/// Maximises an objective over the unit sphere of `M_n(X)` by multistart
/// ascent with normalisation retraction. The returned value is attained by
/// the returned point, so it is a lower bound on the supremum.
pub fn maximize_over_sphere(obj: &dyn Objective, geom: &Geometry, cfg: &SolverConfig, opts: &SphereOptions) -> Result<Optimum> {
    if obj.n_params() != geom.n_params() {
        return Err(invalid("objective and geometry disagree on the number of parameters"));
    }
    let total = opts.starts.unwrap_or(cfg.starts).max(1);
    let mut best: Option<(usize, RunResult)> = None;
    let mut diag = SolverDiagnostics::default();
    let mut next = 0;
    while next < total {
        let batch: Vec<usize> = (next..(next + BATCH).min(total)).collect();
        next += batch.len();
        let runs: Vec<(usize, RunResult)> = batch
            .par_iter()
            .map(|&i| sphere_run(obj, geom, cfg, sphere_start(geom, opts, cfg.seed, i)).map(|r| r.map(|r| (i, r))))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        reduce(runs, |a, b| a > b, &mut best, &mut diag);
        if let (Some(stop), Some((_, b))) = (opts.stop_at, &best) {
            if b.value >= stop {
                break;
            }
        }
    }
    let (idx, run) = best.ok_or_else(|| Error::Solver { message: "no start reached the sphere".into(), iterate: Vec::new() })?;
    diag.best_start = idx;
    // converged: at least one start settled within the budget
    Ok(Optimum { params: run.params, value: run.value, diagnostics: diag })
}
