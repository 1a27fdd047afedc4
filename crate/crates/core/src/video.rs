use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::error::{CtgiError, Result};

/// An ordered stack of `K` grayscale frames, stored as `(K, height, width)`.
///
/// Frame `k` in storage (0-based) is the `k + 1`-th sub-frame of the exposure.
#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    frames: Array3<f64>,
}

impl Video {
    /// Wraps a `(K, height, width)` array. Every value must be finite and
    /// non-negative.
    pub fn new(frames: Array3<f64>) -> Result<Self> {
        for ((k, r, c), &v) in frames.indexed_iter() {
            if !v.is_finite() || v < 0.0 {
                return Err(CtgiError::InvalidIntensity {
                    frame: k,
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
        Ok(Self { frames })
    }

    pub fn from_frames(frames: &[Array2<f64>]) -> Result<Self> {
        let first = frames.first().ok_or(CtgiError::EmptyVideo)?;
        let dim = first.dim();
        let mut stack = Array3::zeros((frames.len(), dim.0, dim.1));
        for (k, f) in frames.iter().enumerate() {
            if f.dim() != dim {
                return Err(CtgiError::DimensionMismatch(format!(
                    "frame {k} is {:?}, frame 0 is {:?}",
                    f.dim(),
                    dim
                )));
            }
            stack.index_axis_mut(Axis(0), k).assign(f);
        }
        Self::new(stack)
    }

    /// Converts 8-bit samples to intensities in `[0, 1]` by dividing by 255.
    pub fn from_u8(frames: &Array3<u8>) -> Self {
        Self {
            frames: frames.mapv(|v| f64::from(v) / 255.0),
        }
    }

    /// Number of frames `K`.
    pub fn len(&self) -> usize {
        self.frames.len_of(Axis(0))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn height(&self) -> usize {
        self.frames.len_of(Axis(1))
    }

    pub fn width(&self) -> usize {
        self.frames.len_of(Axis(2))
    }

    pub fn frame(&self, k: usize) -> ArrayView2<'_, f64> {
        self.frames.index_axis(Axis(0), k)
    }

    pub fn frames(&self) -> &Array3<f64> {
        &self.frames
    }

    pub fn into_inner(self) -> Array3<f64> {
        self.frames
    }

    pub fn max_intensity(&self) -> f64 {
        self.frames.iter().copied().fold(0.0, f64::max)
    }
}
