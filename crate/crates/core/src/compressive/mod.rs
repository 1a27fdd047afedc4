//! Under-sampled (`l² < K`) reconstruction: per-super-pixel measurement
//! systems `y = phi x` regularized by total variation.

mod problem;
mod solver;
pub mod tv;

pub use problem::{
    build_problem, plan_sampling, tv_objective, tv_objective_trace, CsProblem, SamplingPlan,
    TvMode,
};
pub use solver::{
    solve_tv, solve_tv_prepared, CsSolution, PreparedMatrix, SolverOptions, Termination,
};

use ndarray::{s, Array3};
use rayon::prelude::*;

use crate::basis::ModulationBasis;
use crate::error::{CtgiError, Result};
use crate::recon::{ReconMode, ReconstructionResult};
use crate::scene::ExposureImage;

/// Exposure windows as `(n, n, l²)`, each window flattened row-major.
fn window_stack(exposure: &ExposureImage) -> Array3<f64> {
    let g = exposure.geometry;
    let (n, l) = (g.n(), g.l());
    let mut y = Array3::zeros((n, n, l * l));
    for r in 0..n {
        for c in 0..n {
            let block = exposure.values.slice(s![r * l..(r + 1) * l, c * l..(c + 1) * l]);
            for (dst, &v) in y.slice_mut(s![r, c, ..]).iter_mut().zip(block.iter()) {
                *dst = v;
            }
        }
    }
    y
}

/// TV-regularized reconstruction of every super-pixel.
///
/// `lambda = None` uses `0.01 * ||phi^T y||_inf`, computed per super-pixel in
/// temporal mode and over the whole exposure in spatial mode.
pub fn reconstruct_cs(
    exposure: &ExposureImage,
    basis: &ModulationBasis,
    lambda: Option<f64>,
    tv_mode: TvMode,
    opts: &SolverOptions,
) -> Result<ReconstructionResult> {
    if exposure.geometry != basis.geometry() {
        return Err(CtgiError::DimensionMismatch(format!(
            "exposure geometry {:?} does not match basis geometry {:?}",
            exposure.geometry,
            basis.geometry()
        )));
    }
    opts.validate()?;
    let n = basis.geometry().n();
    let k = basis.k();
    let phi = basis.measurement_matrix();
    let prepared = PreparedMatrix::new(&phi);
    let y = window_stack(exposure);

    let mut frames = Array3::zeros((k, n, n));
    let mut residual = 0.0f64;
    match tv_mode {
        TvMode::Temporal1d => {
            let traces: Vec<(Vec<f64>, f64)> = (0..n * n)
                .into_par_iter()
                .map(|s| {
                    let (r, c) = (s / n, s % n);
                    let ys = y.slice(s![r..r + 1, c..c + 1, ..]).to_owned();
                    let lam = lambda.unwrap_or_else(|| CsProblem::default_lambda(&phi, &ys));
                    let at = |e: CtgiError| CtgiError::AtSuperPixel {
                        row: r,
                        col: c,
                        source: Box::new(e),
                    };
                    let problem = CsProblem::new(phi.clone(), ys, lam, TvMode::Temporal1d).map_err(at)?;
                    let sol = solve_tv_prepared(&problem, &prepared, opts).map_err(at)?;
                    let trace = sol.trace().expect("single super-pixel");
                    Ok((trace, data_residual(&problem, &sol.x)))
                })
                .collect::<Result<_>>()?;
            for (s, (trace, res)) in traces.into_iter().enumerate() {
                for (kk, v) in trace.into_iter().enumerate() {
                    frames[[kk, s / n, s % n]] = v;
                }
                residual = residual.max(res);
            }
        }
        TvMode::Spatial2d => {
            let lam = lambda.unwrap_or_else(|| CsProblem::default_lambda(&phi, &y));
            let problem = CsProblem::new(phi, y, lam, TvMode::Spatial2d)?;
            let sol = solve_tv_prepared(&problem, &prepared, opts)?;
            residual = data_residual(&problem, &sol.x);
            frames = sol.x;
        }
    }
    let mut result = ReconstructionResult::new(frames, ReconMode::Compressive, None);
    result.residual = Some(residual);
    Ok(result)
}

/// Largest per-super-pixel `||y_s - phi x_s||`.
fn data_residual(problem: &CsProblem, x: &Array3<f64>) -> f64 {
    let (rows, cols) = problem.grid();
    let mut worst = 0.0f64;
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for i in 0..problem.pixels() {
                let pred: f64 = (0..problem.k()).map(|kk| problem.phi[(i, kk)] * x[[kk, r, c]]).sum();
                let d = problem.y[[r, c, i]] - pred;
                acc += d * d;
            }
            worst = worst.max(acc.sqrt());
        }
    }
    worst
}
