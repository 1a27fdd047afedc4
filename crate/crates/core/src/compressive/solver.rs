//! Monotone FISTA (Beck & Teboulle, "Fast gradient-based algorithms for
//! constrained total variation image denoising and deblurring", 2009) with
//! adaptive restart, followed by an optional active-set polish.
//!
//! The data term `1/2 ||y - phi x||²` is handled by gradient steps of size
//! `step_scale / ||phi||²`; the TV term by its proximal map (exact for
//! temporal TV, dual fast gradient projection for spatial TV). A candidate
//! is accepted only when it does not raise the objective, so accepted
//! objectives never increase.

use nalgebra::{DMatrix, DVector};
use ndarray::Array3;

use crate::error::{CtgiError, Result};

use super::problem::{objective_flat, unflatten, CsProblem, TvMode};
use super::tv::{prox_tv_1d, prox_tv_2d, tv_1d, Tv2dDual};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Stop once `||x_new - x|| <= rel_tol * max(||x_new||, ||x||)` on an
    /// accepted step.
    pub rel_tol: f64,
    /// Gradient step as a fraction of `1 / ||phi||²`, in `(0, 1]`.
    pub step_scale: f64,
    /// Dual iterations per spatial TV proximal evaluation.
    pub inner_iters: usize,
    /// Refine the final iterate by re-solving on its piecewise-constant
    /// support (temporal TV, or any mode with `lambda = 0`).
    pub polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            rel_tol: 1e-9,
            step_scale: 1.0,
            inner_iters: 30,
            polish: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CtgiError::InvalidParameter(m));
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return bad(format!("rel_tol must lie in (0, 1), got {}", self.rel_tol));
        }
        if !(self.step_scale > 0.0 && self.step_scale <= 1.0) {
            return bad(format!("step_scale must lie in (0, 1], got {}", self.step_scale));
        }
        if self.inner_iters == 0 {
            return bad("inner_iters must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Relative iterate change fell below `rel_tol`, or a plain proximal
    /// gradient step from the current iterate could not lower the objective.
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsSolution {
    /// `(K, rows, cols)`.
    pub x: Array3<f64>,
    /// Objective at the zero initializer followed by every accepted iterate.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub polished: bool,
}

impl CsSolution {
    pub fn objective(&self) -> f64 {
        *self.objective_history.last().expect("history starts with x0")
    }

    /// The single trace of a one-super-pixel problem.
    pub fn trace(&self) -> Option<Vec<f64>> {
        let (_, r, c) = self.x.dim();
        (r == 1 && c == 1).then(|| self.x.iter().copied().collect())
    }
}

/// Row-major copy of `phi` and its squared spectral norm, shared by every
/// super-pixel that uses the same basis.
#[derive(Debug, Clone)]
pub struct PreparedMatrix {
    phi: DMatrix<f64>,
    rows: Vec<f64>,
    lipschitz: f64,
}

impl PreparedMatrix {
    pub fn new(phi: &DMatrix<f64>) -> Self {
        let smax = phi.singular_values().max();
        let (p, k) = phi.shape();
        Self {
            phi: phi.clone(),
            rows: (0..p).flat_map(|i| (0..k).map(move |j| phi[(i, j)])).collect(),
            lipschitz: smax * smax,
        }
    }

    fn k(&self) -> usize {
        self.phi.ncols()
    }

    fn p(&self) -> usize {
        self.phi.nrows()
    }

    /// `phi^T (phi x_s - y_s)` for every super-pixel `s`.
    fn gradient(&self, y: &[f64], x: &[f64], out: &mut [f64]) {
        let (k, p) = (self.k(), self.p());
        let mut res = vec![0.0; p];
        for ((xs, ys), gs) in x.chunks_exact(k).zip(y.chunks_exact(p)).zip(out.chunks_exact_mut(k)) {
            for (i, r) in res.iter_mut().enumerate() {
                let row = &self.rows[i * k..(i + 1) * k];
                *r = row.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>() - ys[i];
            }
            for (j, g) in gs.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (i, &r) in res.iter().enumerate() {
                    acc += self.rows[i * k + j] * r;
                }
                *g = acc;
            }
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn solve_tv(problem: &CsProblem, opts: &SolverOptions) -> Result<CsSolution> {
    solve_tv_prepared(problem, &PreparedMatrix::new(&problem.phi), opts)
}

/// [`solve_tv`] with the matrix preprocessing hoisted out.
pub fn solve_tv_prepared(
    problem: &CsProblem,
    prepared: &PreparedMatrix,
    opts: &SolverOptions,
) -> Result<CsSolution> {
    opts.validate()?;
    if prepared.phi != problem.phi {
        return Err(CtgiError::InvalidParameter(
            "prepared matrix does not belong to this problem".into(),
        ));
    }
    let k = problem.k();
    let (rows, cols) = problem.grid();
    let y: Vec<f64> = {
        let std = problem.y.as_standard_layout();
        std.iter().copied().collect()
    };
    let len = k * rows * cols;
    let lambda = problem.lambda;

    let mut x = vec![0.0; len];
    let mut fx = objective_flat(problem, &x);
    let mut history = vec![fx];

    if prepared.lipschitz == 0.0 {
        return Ok(CsSolution {
            x: unflatten(&x, k, rows, cols),
            objective_history: history,
            iterations: 0,
            termination: Termination::Converged,
            polished: false,
        });
    }
    let step = opts.step_scale / prepared.lipschitz;
    let mu = step * lambda;

    let mut duals: Vec<Tv2dDual> = match problem.tv_mode {
        TvMode::Spatial2d => (0..k).map(|_| Tv2dDual::new(rows, cols)).collect(),
        TvMode::Temporal1d => Vec::new(),
    };
    let mut prox = |v: &[f64], out: &mut [f64]| match problem.tv_mode {
        TvMode::Temporal1d => {
            for (vs, os) in v.chunks_exact(k).zip(out.chunks_exact_mut(k)) {
                prox_tv_1d(vs, mu, os);
            }
        }
        TvMode::Spatial2d => {
            let mut frame = vec![0.0; rows * cols];
            let mut solved = vec![0.0; rows * cols];
            for (kk, dual) in duals.iter_mut().enumerate() {
                for (s, f) in frame.iter_mut().enumerate() {
                    *f = v[s * k + kk];
                }
                prox_tv_2d(&frame, mu, opts.inner_iters, dual, &mut solved);
                for (s, &u) in solved.iter().enumerate() {
                    out[s * k + kk] = u;
                }
            }
        }
    };

    let mut yv = x.clone();
    let mut t = 1.0f64;
    let mut grad = vec![0.0; len];
    let mut v = vec![0.0; len];
    let mut z = vec![0.0; len];
    let mut restarted = true;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    for it in 1..=opts.max_iters {
        iterations = it;
        prepared.gradient(&y, &yv, &mut grad);
        for ((vi, yi), gi) in v.iter_mut().zip(&yv).zip(&grad) {
            *vi = yi - step * gi;
        }
        prox(&v, &mut z);
        let fz = objective_flat(problem, &z);
        if !fz.is_finite() || z.iter().any(|a| !a.is_finite()) {
            return Err(CtgiError::SolverDiverged { iteration: it });
        }

        if fz <= fx {
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let momentum = (t - 1.0) / t_next;
            let mut diff = 0.0;
            for ((yi, &zi), xi) in yv.iter_mut().zip(&z).zip(x.iter_mut()) {
                let d = zi - *xi;
                diff += d * d;
                *yi = zi + momentum * d;
                *xi = zi;
            }
            let scale = norm(&x).max(norm(&z)).max(f64::MIN_POSITIVE);
            fx = fz;
            history.push(fz);
            t = t_next;
            restarted = false;
            if diff.sqrt() <= opts.rel_tol * scale {
                termination = Termination::Converged;
                break;
            }
        } else if restarted {
            termination = Termination::Converged;
            break;
        } else {
            // momentum overshot: restart from the current iterate
            yv.copy_from_slice(&x);
            t = 1.0;
            restarted = true;
        }
    }

    let mut polished = false;
    if opts.polish && (problem.tv_mode == TvMode::Temporal1d || lambda == 0.0) {
        let p = problem.pixels();
        for (xs, ys) in x.chunks_exact_mut(k).zip(y.chunks_exact(p)) {
            if let Some(better) = polish_trace(prepared, ys, xs, lambda) {
                xs.copy_from_slice(&better);
                polished = true;
            }
        }
        if polished {
            let fp = objective_flat(problem, &x);
            if fp.is_finite() && fp <= fx {
                fx = fp;
                history.push(fx);
            }
        }
    }

    Ok(CsSolution {
        x: unflatten(&x, k, rows, cols),
        objective_history: history,
        iterations,
        termination,
        polished,
    })
}

fn local_objective(prepared: &PreparedMatrix, y: &[f64], x: &[f64], lambda: f64) -> f64 {
    let k = prepared.k();
    let mut data = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let row = &prepared.rows[i * k..(i + 1) * k];
        let d = yi - row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        data += d * d;
    }
    let tv = if lambda > 0.0 { lambda * tv_1d(x) } else { 0.0 };
    0.5 * data + tv
}

/// Re-solves one temporal trace exactly on the piecewise-constant support
/// of `x`. With the segment partition and jump signs fixed, the objective is
/// a quadratic in the segment levels; its minimizer is returned when it
/// keeps every jump sign and lowers the objective.
fn polish_trace(prepared: &PreparedMatrix, y: &[f64], x: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let k = prepared.k();
    let scale = x.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
    let mut best_obj = local_objective(prepared, y, x, lambda);
    let mut best: Option<Vec<f64>> = None;
    let tolerances: &[f64] = if lambda > 0.0 {
        &[0.0, 1e-9, 1e-6, 1e-4, 1e-3]
    } else {
        &[-1.0]
    };
    for &tol in tolerances {
        let mut starts = vec![0usize];
        for i in 1..k {
            if (x[i] - x[i - 1]).abs() > tol * scale {
                starts.push(i);
            }
        }
        let groups = starts.len();
        if groups > prepared.p() {
            continue;
        }
        let seg_of = |i: usize| starts.partition_point(|&s| s <= i) - 1;
        let phib = DMatrix::<f64>::from_fn(prepared.p(), groups, |r, g| {
            let end = starts.get(g + 1).copied().unwrap_or(k);
            (starts[g]..end).map(|c| prepared.phi[(r, c)]).sum()
        });
        let svd = phib.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin.is_nan() || smin <= 1e-10 * smax {
            continue;
        }
        let u = svd.u.as_ref()?;
        let vt = svd.v_t.as_ref()?;
        let sigma = &svd.singular_values;

        // c = V S^-1 U^T y - lambda V S^-2 V^T w, with w_j = s_{j-1} - s_j
        let yv = DVector::from_column_slice(y);
        let mut coeff: DVector<f64> = u.transpose() * yv;
        for (i, c) in coeff.iter_mut().enumerate() {
            *c /= sigma[i];
        }
        let signs: Vec<f64> = (0..groups.saturating_sub(1))
            .map(|j| (x[starts[j + 1]] - x[starts[j]]).signum())
            .collect();
        if lambda > 0.0 && groups > 1 {
            let w = DVector::from_fn(groups, |j, _| {
                let left = if j > 0 { signs[j - 1] } else { 0.0 };
                let right = if j + 1 < groups { signs[j] } else { 0.0 };
                left - right
            });
            let mut vw: DVector<f64> = vt * w;
            for (i, c) in vw.iter_mut().enumerate() {
                *c *= lambda / (sigma[i] * sigma[i]);
            }
            coeff -= vw;
        }
        let levels: DVector<f64> = vt.transpose() * coeff;
        if lambda > 0.0
            && signs
                .iter()
                .enumerate()
                .any(|(j, &s)| (levels[j + 1] - levels[j]) * s <= 0.0)
        {
            continue;
        }
        let candidate: Vec<f64> = (0..k).map(|i| levels[seg_of(i)]).collect();
        if candidate.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let obj = local_objective(prepared, y, &candidate, lambda);
        if obj < best_obj {
            best_obj = obj;
            best = Some(candidate);
        }
    }
    best
}
