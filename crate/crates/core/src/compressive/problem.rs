use nalgebra::DMatrix;
use ndarray::{Array3, ArrayView2, ArrayView3};
use num_rational::Ratio;

use crate::basis::ModulationBasis;
use crate::error::{CtgiError, Result};

use super::tv::{tv_1d, tv_2d};

/// Which discrete gradient the TV regularizer penalizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TvMode {
    /// Per super-pixel: `sum_k |x[k+1] - x[k]|` along time.
    #[default]
    Temporal1d,
    /// Per frame: isotropic `sum sqrt(D_h² + D_v²)` over the `n x n`
    /// scene, coupling neighbouring super-pixels.
    Spatial2d,
}

/// Spatial-to-temporal bookkeeping for `K` frames recovered from `l x l`
/// super-pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingPlan {
    pub k: u64,
    pub l: u64,
}

impl SamplingPlan {
    /// `l² / K` as an exact fraction.
    pub fn sampling_rate(&self) -> Ratio<u64> {
        Ratio::new(self.l * self.l, self.k)
    }

    /// Transfer efficiency `T = K / l²` as an exact fraction.
    pub fn transfer_efficiency(&self) -> Ratio<u64> {
        Ratio::new(self.k, self.l * self.l)
    }

    pub fn sampling_rate_f64(&self) -> f64 {
        (self.l * self.l) as f64 / self.k as f64
    }

    pub fn transfer_efficiency_f64(&self) -> f64 {
        self.k as f64 / (self.l * self.l) as f64
    }

    /// Modulator / camera side needed for an `n x n` scene.
    pub fn effective_resolution(&self, n: u64) -> u64 {
        self.l * n
    }

    pub fn is_compressive(&self) -> bool {
        self.l * self.l < self.k
    }
}

pub fn plan_sampling(k: usize, l: usize) -> Result<SamplingPlan> {
    if k == 0 || l == 0 {
        return Err(CtgiError::InvalidParameter(format!(
            "K and l must be at least 1 (K = {k}, l = {l})"
        )));
    }
    Ok(SamplingPlan {
        k: k as u64,
        l: l as u64,
    })
}

/// Measurement system for a `rows x cols` grid of super-pixels sharing one
/// `P x K` matrix `phi`. `y` is `(rows, cols, P)`; unknowns are
/// `(K, rows, cols)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsProblem {
    pub phi: DMatrix<f64>,
    pub y: Array3<f64>,
    pub lambda: f64,
    pub tv_mode: TvMode,
}

impl CsProblem {
    pub fn new(phi: DMatrix<f64>, y: Array3<f64>, lambda: f64, tv_mode: TvMode) -> Result<Self> {
        if phi.nrows() == 0 || phi.ncols() == 0 {
            return Err(CtgiError::DimensionMismatch("empty measurement matrix".into()));
        }
        if let Some(v) = phi.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(CtgiError::InvalidParameter(format!(
                "measurement matrix entries must be 0 or 1, found {v}"
            )));
        }
        if y.dim().2 != phi.nrows() {
            return Err(CtgiError::DimensionMismatch(format!(
                "y has {} values per super-pixel, phi has {} rows",
                y.dim().2,
                phi.nrows()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(CtgiError::InvalidParameter("y contains non-finite values".into()));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(CtgiError::InvalidParameter(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(Self {
            phi,
            y,
            lambda,
            tv_mode,
        })
    }

    /// One super-pixel.
    pub fn single(phi: DMatrix<f64>, y: Vec<f64>, lambda: f64, tv_mode: TvMode) -> Result<Self> {
        let p = y.len();
        let y = Array3::from_shape_vec((1, 1, p), y).expect("shape matches length");
        Self::new(phi, y, lambda, tv_mode)
    }

    pub fn k(&self) -> usize {
        self.phi.ncols()
    }

    pub fn pixels(&self) -> usize {
        self.phi.nrows()
    }

    pub fn grid(&self) -> (usize, usize) {
        let (r, c, _) = self.y.dim();
        (r, c)
    }

    /// `0.01 * ||phi^T y||_inf` over every super-pixel.
    pub fn default_lambda(phi: &DMatrix<f64>, y: &Array3<f64>) -> f64 {
        let (rows, cols, p) = y.dim();
        let mut best = 0.0f64;
        for r in 0..rows {
            for c in 0..cols {
                for k in 0..phi.ncols() {
                    let v: f64 = (0..p).map(|i| phi[(i, k)] * y[[r, c, i]]).sum();
                    best = best.max(v.abs());
                }
            }
        }
        0.01 * best
    }
}

/// Builds the system of one `l x l` exposure window: row `p` of `phi` is
/// row-major pixel `p`, column `k` is tile `k`; `y` is the window in the
/// same pixel order.
pub fn build_problem(
    window: ArrayView2<'_, f64>,
    basis: &ModulationBasis,
    lambda: f64,
    tv_mode: TvMode,
) -> Result<CsProblem> {
    let l = basis.geometry().l();
    if window.dim() != (l, l) {
        return Err(CtgiError::DimensionMismatch(format!(
            "window is {:?}, basis tiles are {l}x{l}",
            window.dim()
        )));
    }
    CsProblem::single(
        basis.measurement_matrix(),
        window.iter().copied().collect(),
        lambda,
        tv_mode,
    )
}

/// Flat super-pixel-major layout `((r * cols + c) * K + k)` used by the solver.
pub(crate) fn flatten(x: ArrayView3<'_, f64>) -> Vec<f64> {
    let (k, rows, cols) = x.dim();
    let mut out = Vec::with_capacity(k * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            for kk in 0..k {
                out.push(x[[kk, r, c]]);
            }
        }
    }
    out
}

pub(crate) fn unflatten(flat: &[f64], k: usize, rows: usize, cols: usize) -> Array3<f64> {
    Array3::from_shape_fn((k, rows, cols), |(kk, r, c)| flat[(r * cols + c) * k + kk])
}

pub(crate) fn data_term(problem: &CsProblem, x: &[f64]) -> f64 {
    let (k, p) = (problem.k(), problem.pixels());
    let (rows, cols) = problem.grid();
    let mut total = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let xs = &x[(r * cols + c) * k..(r * cols + c + 1) * k];
            for i in 0..p {
                let mut pred = 0.0;
                for (kk, &v) in xs.iter().enumerate() {
                    pred += problem.phi[(i, kk)] * v;
                }
                let d = problem.y[[r, c, i]] - pred;
                total += d * d;
            }
        }
    }
    0.5 * total
}

pub(crate) fn tv_term(problem: &CsProblem, x: &[f64]) -> f64 {
    let k = problem.k();
    let (rows, cols) = problem.grid();
    match problem.tv_mode {
        TvMode::Temporal1d => x.chunks_exact(k).map(tv_1d).sum(),
        TvMode::Spatial2d => {
            let mut frame = vec![0.0; rows * cols];
            let mut total = 0.0;
            for kk in 0..k {
                for (s, f) in frame.iter_mut().enumerate() {
                    *f = x[s * k + kk];
                }
                total += tv_2d(&frame, rows, cols);
            }
            total
        }
    }
}

pub(crate) fn objective_flat(problem: &CsProblem, x: &[f64]) -> f64 {
    let tv = if problem.lambda > 0.0 {
        problem.lambda * tv_term(problem, x)
    } else {
        0.0
    };
    data_term(problem, x) + tv
}

/// `1/2 ||y - phi x||² + lambda * TV(x)` for `x` shaped `(K, rows, cols)`.
pub fn tv_objective(x: ArrayView3<'_, f64>, problem: &CsProblem) -> Result<f64> {
    let (rows, cols) = problem.grid();
    if x.dim() != (problem.k(), rows, cols) {
        return Err(CtgiError::DimensionMismatch(format!(
            "x is {:?}, problem expects ({}, {rows}, {cols})",
            x.dim(),
            problem.k()
        )));
    }
    Ok(objective_flat(problem, &flatten(x)))
}

/// [`tv_objective`] for a single-super-pixel problem and a `K`-vector.
pub fn tv_objective_trace(x: &[f64], problem: &CsProblem) -> Result<f64> {
    if problem.grid() != (1, 1) || x.len() != problem.k() {
        return Err(CtgiError::DimensionMismatch(format!(
            "trace of length {} against a {:?} grid with K = {}",
            x.len(),
            problem.grid(),
            problem.k()
        )));
    }
    Ok(objective_flat(problem, x))
}
