//! Per-super-pixel intensity-correlation retrieval, the exact linear-solve
//! alternative, the sliding-window high-resolution variant, and threshold
//! de-trailing.
//!
//! For a window of `P = l²` exposure values `s_p` and binary masks `x_kp`:
//!
//! ```text
//! I_k = sum_p (s_p - <s>) (x_kp - <x_k>) / sum_p (x_kp - <x_k>)²
//! ```
//!
//! where `<.>` is the spatial mean over the window. Masks with zero variance
//! (the DC pattern) are filled by [`DcPolicy`].

use nalgebra::DMatrix;
use ndarray::{s, Array3, ArrayView2, Axis};
use ndarray::parallel::prelude::*;

use crate::basis::ModulationBasis;
use crate::error::{CtgiError, Result};
use crate::recon::{DcPolicy, ReconMode, ReconstructionResult};
use crate::scene::ExposureImage;

/// The recovered `I_1..I_K` for one super-pixel or window position.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalTrace {
    pub values: Vec<f64>,
}

fn frame_label(k: usize) -> usize {
    k + 1
}

/// Precomputed centered masks and normalizers for one set of `K` window masks.
#[derive(Debug, Clone)]
pub struct CorrelationKernel {
    pixels: usize,
    k: usize,
    means: Vec<f64>,
    /// `K * P` deviations `x_kp - <x_k>`; zero rows for constant masks.
    centered: Vec<f64>,
    denoms: Vec<f64>,
    dc: Option<usize>,
    policy: DcPolicy,
}

impl CorrelationKernel {
    /// `masks[k]` lists mask `k` in the same pixel order the windows will use.
    pub fn new<'a, I>(masks: I, policy: DcPolicy) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [u8]>,
    {
        let masks: Vec<&[u8]> = masks.into_iter().collect();
        let k = masks.len();
        let pixels = masks.first().map_or(0, |m| m.len());
        if k == 0 || pixels == 0 {
            return Err(CtgiError::InvalidParameter("empty mask set".into()));
        }
        let mut means = Vec::with_capacity(k);
        let mut centered = vec![0.0; k * pixels];
        let mut denoms = Vec::with_capacity(k);
        let mut constants = Vec::new();
        for (idx, mask) in masks.iter().enumerate() {
            if mask.len() != pixels {
                return Err(CtgiError::DimensionMismatch(format!(
                    "mask {idx} has {} pixels, expected {pixels}",
                    mask.len()
                )));
            }
            let mean = mask.iter().map(|&v| f64::from(v)).sum::<f64>() / pixels as f64;
            let row = &mut centered[idx * pixels..(idx + 1) * pixels];
            let mut den = 0.0;
            for (d, &v) in row.iter_mut().zip(mask.iter()) {
                *d = f64::from(v) - mean;
                den += *d * *d;
            }
            if den == 0.0 {
                constants.push(idx);
            }
            means.push(mean);
            denoms.push(den);
        }

        let dc = match policy {
            DcPolicy::Zero => None,
            DcPolicy::Formula => match constants.as_slice() {
                [] => None,
                [only] if means[*only] == 1.0 => Some(*only),
                [only] => {
                    return Err(CtgiError::DegeneratePattern {
                        k: *only,
                        frame: frame_label(*only),
                        reason: "all-off tile carries no signal; use dc policy zero".into(),
                    })
                }
                many => return Err(CtgiError::MultipleDcPatterns(many.to_vec())),
            },
        };

        Ok(Self {
            pixels,
            k,
            means,
            centered,
            denoms,
            dc,
            policy,
        })
    }

    pub fn from_basis(basis: &ModulationBasis, policy: DcPolicy) -> Result<Self> {
        Self::new(basis.tiles(), policy)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn pixels(&self) -> usize {
        self.pixels
    }

    pub fn policy(&self) -> DcPolicy {
        self.policy
    }

    /// Index of the resolved DC frame, if any.
    pub fn dc_index(&self) -> Option<usize> {
        self.dc
    }

    pub fn trace(&self, window: &[f64]) -> TemporalTrace {
        let mut values = vec![0.0; self.k];
        self.retrieve_into(window, &mut values);
        TemporalTrace { values }
    }

    /// Writes the `K` recovered intensities for `window` into `out`.
    pub fn retrieve_into(&self, window: &[f64], out: &mut [f64]) {
        debug_assert_eq!(window.len(), self.pixels);
        let mean_s = window.iter().sum::<f64>() / self.pixels as f64;
        for (k, slot) in out.iter_mut().enumerate() {
            let den = self.denoms[k];
            if den == 0.0 {
                *slot = 0.0;
                continue;
            }
            let row = &self.centered[k * self.pixels..(k + 1) * self.pixels];
            let num: f64 = window
                .iter()
                .zip(row)
                .map(|(&s, &d)| (s - mean_s) * d)
                .sum();
            *slot = num / den;
        }
        if let Some(dc) = self.dc {
            out[dc] = dc_from_means(mean_s, &self.means, out, dc);
        }
    }
}

fn dc_from_means(mean_s: f64, means: &[f64], trace: &[f64], dc: usize) -> f64 {
    let mut rest = 0.0;
    for (k, (&m, &v)) in means.iter().zip(trace).enumerate() {
        if k != dc {
            rest += m * v;
        }
    }
    mean_s - rest
}

/// Fills in the DC frame of one super-pixel from the window mean and the
/// already recovered non-DC intensities: `I_dc = <S> - sum_{k != dc} <X_k> I_k`.
/// For binarized Hadamard tiles this is `<S> - (1/2) sum_{k != dc} I_k`.
pub fn recover_dc_frame(
    window: ArrayView2<'_, f64>,
    basis: &ModulationBasis,
    trace: &[f64],
) -> Result<f64> {
    if trace.len() != basis.k() {
        return Err(CtgiError::FrameCountMismatch {
            expected: basis.k(),
            actual: trace.len(),
        });
    }
    let l = basis.geometry().l();
    if window.dim() != (l, l) {
        return Err(CtgiError::DimensionMismatch(format!(
            "window is {:?}, expected {l}x{l}",
            window.dim()
        )));
    }
    let dc = match basis.constant_tiles().as_slice() {
        [(k, 1)] => *k,
        [(k, _)] => {
            return Err(CtgiError::DegeneratePattern {
                k: *k,
                frame: frame_label(*k),
                reason: "all-off tile carries no signal".into(),
            })
        }
        [] => {
            return Err(CtgiError::InvalidParameter(
                "basis has no constant tile to recover".into(),
            ))
        }
        many => return Err(CtgiError::MultipleDcPatterns(many.iter().map(|c| c.0).collect())),
    };
    let p = l * l;
    let means: Vec<f64> = basis
        .tiles()
        .map(|t| t.iter().map(|&v| f64::from(v)).sum::<f64>() / p as f64)
        .collect();
    let mean_s = window.iter().sum::<f64>() / p as f64;
    Ok(dc_from_means(mean_s, &means, trace, dc))
}

fn check_geometry(exposure: &ExposureImage, basis: &ModulationBasis) -> Result<()> {
    if exposure.geometry != basis.geometry() {
        return Err(CtgiError::DimensionMismatch(format!(
            "exposure geometry {:?} does not match basis geometry {:?}",
            exposure.geometry,
            basis.geometry()
        )));
    }
    Ok(())
}

/// Runs `retrieve(origin_row, origin_col, window, out)` for every window
/// position on a `rows x cols` grid with stride `stride`, in parallel over
/// rows. Returns `(K, rows, cols)`.
pub(crate) fn sweep_windows<F>(
    exposure: &ExposureImage,
    k: usize,
    rows: usize,
    cols: usize,
    stride: usize,
    retrieve: F,
) -> Result<Array3<f64>>
where
    F: Fn(usize, usize, &[f64], &mut [f64]) -> Result<()> + Sync,
{
    let l = exposure.geometry.l();
    let values = &exposure.values;
    let mut out = Array3::<f64>::zeros((rows, cols, k));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .try_for_each(|(r, mut row)| {
            let mut window = vec![0.0; l * l];
            let mut trace = vec![0.0; k];
            for c in 0..cols {
                let (r0, c0) = (r * stride, c * stride);
                let block = values.slice(s![r0..r0 + l, c0..c0 + l]);
                for (dst, &v) in window.iter_mut().zip(block.iter()) {
                    *dst = v;
                }
                retrieve(r0, c0, &window, &mut trace).map_err(|e| CtgiError::AtSuperPixel {
                    row: r,
                    col: c,
                    source: Box::new(e),
                })?;
                row.index_axis_mut(Axis(0), c)
                    .iter_mut()
                    .zip(&trace)
                    .for_each(|(d, &v)| *d = v);
            }
            Ok::<_, CtgiError>(())
        })?;
    Ok(out.permuted_axes([2, 0, 1]))
}

/// Block-mode correlation retrieval: one trace per super-pixel, output
/// `n x n x K`.
pub fn reconstruct_correlation(
    exposure: &ExposureImage,
    basis: &ModulationBasis,
    dc_policy: DcPolicy,
) -> Result<ReconstructionResult> {
    check_geometry(exposure, basis)?;
    let g = basis.geometry();
    if basis.kind().is_hadamard() && basis.k() > g.pixels_per_super_pixel() {
        return Err(CtgiError::IncompatibleMode(format!(
            "correlation with a Hadamard basis needs K <= l² (K = {}, l² = {})",
            basis.k(),
            g.pixels_per_super_pixel()
        )));
    }
    let kernel = CorrelationKernel::from_basis(basis, dc_policy)?;
    let frames = sweep_windows(exposure, basis.k(), g.n(), g.n(), g.l(), |_, _, w, out| {
        kernel.retrieve_into(w, out);
        Ok(())
    })?;
    Ok(ReconstructionResult::new(frames, ReconMode::Correlation, Some(dc_policy)))
}

/// Least-squares inverse of one `P x K` measurement matrix.
#[derive(Debug, Clone)]
pub struct ExactSolver {
    pixels: usize,
    k: usize,
    /// `P x K`, row-major.
    phi: Vec<f64>,
    /// `K x P`, row-major.
    pinv: Vec<f64>,
}

impl ExactSolver {
    pub fn new(phi: &DMatrix<f64>) -> Result<Self> {
        let (pixels, k) = phi.shape();
        if pixels < k {
            return Err(CtgiError::RankDeficient { rank: pixels, k });
        }
        let svd = phi.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let tol = pixels.max(k) as f64 * f64::EPSILON * smax;
        let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
        if rank < k {
            return Err(CtgiError::RankDeficient { rank, k });
        }
        let pinv = svd
            .pseudo_inverse(tol)
            .map_err(|e| CtgiError::InvalidParameter(e.to_string()))?;
        Ok(Self {
            pixels,
            k,
            phi: (0..pixels)
                .flat_map(|r| (0..k).map(move |c| (r, c)))
                .map(|(r, c)| phi[(r, c)])
                .collect(),
            pinv: (0..k)
                .flat_map(|r| (0..pixels).map(move |c| (r, c)))
                .map(|(r, c)| pinv[(r, c)])
                .collect(),
        })
    }

    fn apply_pinv(&self, y: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.pinv[r * self.pixels..(r + 1) * self.pixels];
            *o = row.iter().zip(y).map(|(a, b)| a * b).sum();
        }
    }

    fn residual_into(&self, y: &[f64], x: &[f64], res: &mut [f64]) {
        for (p, r) in res.iter_mut().enumerate() {
            let row = &self.phi[p * self.k..(p + 1) * self.k];
            *r = y[p] - row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Solves for `x` with one step of iterative refinement and returns the
    /// residual norm.
    pub fn solve_into(&self, y: &[f64], x: &mut [f64]) -> f64 {
        let mut res = vec![0.0; self.pixels];
        let mut dx = vec![0.0; self.k];
        self.apply_pinv(y, x);
        self.residual_into(y, x, &mut res);
        self.apply_pinv(&res, &mut dx);
        x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
        self.residual_into(y, x, &mut res);
        res.iter().map(|r| r * r).sum::<f64>().sqrt()
    }
}

/// Block-mode least-squares inversion of the per-super-pixel system.
pub fn reconstruct_exact(
    exposure: &ExposureImage,
    basis: &ModulationBasis,
) -> Result<ReconstructionResult> {
    check_geometry(exposure, basis)?;
    let g = basis.geometry();
    let solver = ExactSolver::new(&basis.measurement_matrix())?;
    let residuals = std::sync::Mutex::new(Vec::new());
    let frames = sweep_windows(exposure, basis.k(), g.n(), g.n(), g.l(), |_, _, w, out| {
        let r = solver.solve_into(w, out);
        residuals.lock().unwrap().push(r);
        Ok(())
    })?;
    let mut result = ReconstructionResult::new(frames, ReconMode::Exact, None);
    result.residual = Some(residuals.into_inner().unwrap().into_iter().fold(0.0, f64::max));
    Ok(result)
}

/// Retrieval applied to each window in [`reconstruct_sliding`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SlidingRetrieval {
    #[default]
    Correlation,
    Exact,
}

/// Masks seen by a window whose origin sits at tile offset `(a, b)`: a
/// cyclic shift of each canonical tile, in window row-major order.
pub fn shifted_masks(basis: &ModulationBasis, a: usize, b: usize) -> Vec<Vec<u8>> {
    let l = basis.geometry().l();
    basis
        .tiles()
        .map(|t| {
            (0..l * l)
                .map(|p| t[((a + p / l) % l) * l + (b + p % l) % l])
                .collect()
        })
        .collect()
}

/// Treats every `l x l` window of the exposure as a complete basis
/// measurement. Output side is `m - l + 1`.
///
/// The basis is `l`-periodic, so a window at origin `(r, c)` sees the
/// canonical tiles cyclically shifted by `(r mod l, c mod l)`. One kernel is
/// prepared per shift; windows are otherwise processed exactly as in block
/// mode, so block-aligned windows reproduce block mode bit for bit.
pub fn reconstruct_sliding(
    exposure: &ExposureImage,
    basis: &ModulationBasis,
    dc_policy: DcPolicy,
    retrieval: SlidingRetrieval,
) -> Result<ReconstructionResult> {
    check_geometry(exposure, basis)?;
    let g = basis.geometry();
    if !basis.kind().is_hadamard() {
        return Err(CtgiError::IncompatibleMode(
            "sliding reconstruction needs a walsh-hadamard basis; shifted windows of a random \
             basis do not form a complete basis"
                .into(),
        ));
    }
    let l = g.l();
    if basis.k() != l * l {
        return Err(CtgiError::IncompatibleMode(format!(
            "sliding reconstruction needs full sampling K = l² (K = {}, l² = {})",
            basis.k(),
            l * l
        )));
    }
    let side = g.sliding_side();
    let shifts: Vec<Vec<Vec<u8>>> = (0..l * l)
        .map(|o| shifted_masks(basis, o / l, o % l))
        .collect();

    let (frames, mode_policy, residual) = match retrieval {
        SlidingRetrieval::Correlation => {
            let kernels = shifts
                .iter()
                .map(|masks| CorrelationKernel::new(masks.iter().map(Vec::as_slice), dc_policy))
                .collect::<Result<Vec<_>>>()?;
            let frames = sweep_windows(exposure, basis.k(), side, side, 1, |r, c, w, out| {
                kernels[(r % l) * l + c % l].retrieve_into(w, out);
                Ok(())
            })?;
            (frames, Some(dc_policy), None)
        }
        SlidingRetrieval::Exact => {
            let solvers = shifts
                .iter()
                .map(|masks| {
                    let phi = DMatrix::from_fn(l * l, masks.len(), |p, k| f64::from(masks[k][p]));
                    ExactSolver::new(&phi)
                })
                .collect::<Result<Vec<_>>>()?;
            let residuals = std::sync::Mutex::new(0.0f64);
            let frames = sweep_windows(exposure, basis.k(), side, side, 1, |r, c, w, out| {
                let res = solvers[(r % l) * l + c % l].solve_into(w, out);
                let mut worst = residuals.lock().unwrap();
                *worst = worst.max(res);
                Ok(())
            })?;
            (frames, None, Some(residuals.into_inner().unwrap()))
        }
    };
    let mut result = ReconstructionResult::new(frames, ReconMode::Sliding, mode_policy);
    result.residual = residual;
    Ok(result)
}

/// Zeroes every value below `tau` times its frame maximum.
pub fn apply_threshold(mut result: ReconstructionResult, tau: f64) -> Result<ReconstructionResult> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(CtgiError::InvalidParameter(format!(
            "threshold tau must lie in [0, 1], got {tau}"
        )));
    }
    if tau == 0.0 {
        result.threshold = Some(tau);
        return Ok(result);
    }
    for (mut frame, stats) in result.frames.axis_iter_mut(Axis(0)).zip(&result.stats) {
        let cut = tau * stats.max;
        frame.mapv_inplace(|v| if v < cut { 0.0 } else { v });
    }
    result.threshold = Some(tau);
    result.refresh_stats();
    Ok(result)
}
