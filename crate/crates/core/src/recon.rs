//! Reconstruction results shared by every retrieval mode.

use ndarray::{Array3, ArrayView2, Axis};

use crate::video::Video;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReconMode {
    Correlation,
    Exact,
    Sliding,
    Compressive,
}

/// How frames whose tile is spatially constant (the DC pattern) are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DcPolicy {
    /// `I_dc = <S> - sum_{k != dc} <X_k> I_k`, which is exact for binarized
    /// Hadamard bases where every non-DC tile has mean 1/2.
    #[default]
    Formula,
    /// Leave the DC frame at zero.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl FrameStats {
    pub fn of(frame: ArrayView2<'_, f64>) -> Self {
        let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for &v in frame.iter() {
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        Self {
            min,
            max,
            mean: sum / frame.len() as f64,
        }
    }
}

/// Recovered video, `(K, height, width)`.
///
/// Raw values may be negative (correlation undershoots under noise or
/// crosstalk); [`ReconstructionResult::to_video`] clamps them for export.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub frames: Array3<f64>,
    pub mode: ReconMode,
    pub dc_policy: Option<DcPolicy>,
    pub stats: Vec<FrameStats>,
    /// Largest per-window residual norm `||y - Phi x||`, where computed.
    pub residual: Option<f64>,
    /// Threshold fraction applied by [`apply_threshold`](crate::correlation::apply_threshold).
    pub threshold: Option<f64>,
}

impl ReconstructionResult {
    pub fn new(frames: Array3<f64>, mode: ReconMode, dc_policy: Option<DcPolicy>) -> Self {
        let stats = frames.axis_iter(Axis(0)).map(FrameStats::of).collect();
        Self {
            frames,
            mode,
            dc_policy,
            stats,
            residual: None,
            threshold: None,
        }
    }

    pub fn k(&self) -> usize {
        self.frames.len_of(Axis(0))
    }

    pub fn height(&self) -> usize {
        self.frames.len_of(Axis(1))
    }

    pub fn width(&self) -> usize {
        self.frames.len_of(Axis(2))
    }

    pub(crate) fn refresh_stats(&mut self) {
        self.stats = self.frames.axis_iter(Axis(0)).map(FrameStats::of).collect();
    }

    /// Negative values clamped to zero; non-finite values become zero.
    pub fn to_video(&self) -> Video {
        let clamped = self
            .frames
            .mapv(|v| if v.is_finite() { v.max(0.0) } else { 0.0 });
        Video::new(clamped.as_standard_layout().to_owned()).expect("clamped values are valid")
    }
}
