//! Frame-by-frame quality against ground truth on normalized data.

use std::fmt::Write;

use ndarray::{Array3, ArrayView2};

/// `20 log10(1 / rmse)`; infinite for identical frames.
pub fn psnr(rmse: f64) -> f64 {
    if rmse == 0.0 {
        f64::INFINITY
    } else {
        -20.0 * rmse.log10()
    }
}

pub fn rmse(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    let n = a.len() as f64;
    let sse: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    (sse / n).sqrt()
}

/// Pearson correlation; NaN when either frame is constant.
pub fn pearson(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    let n = a.len() as f64;
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return f64::NAN;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameMetrics {
    pub psnr_db: f64,
    pub rmse: f64,
    pub pearson: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub height: usize,
    pub width: usize,
    pub frames: Vec<FrameMetrics>,
    pub mean_psnr_db: f64,
    pub mean_rmse: f64,
    /// Mean over frames where the correlation is defined.
    pub mean_pearson: f64,
    /// Seconds per pipeline stage. Kept out of [`MetricsReport::to_text`] so
    /// reports stay byte-reproducible.
    pub timings: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeMismatch {
    pub recon: (usize, usize, usize),
    pub truth: (usize, usize, usize),
}

impl std::fmt::Display for ShapeMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "reconstruction is {:?} (frames, height, width) but truth is {:?}",
            self.recon, self.truth
        )
    }
}

impl std::error::Error for ShapeMismatch {}

impl MetricsReport {
    pub fn compare(recon: &Array3<f64>, truth: &Array3<f64>) -> Result<Self, ShapeMismatch> {
        if recon.dim() != truth.dim() {
            return Err(ShapeMismatch {
                recon: recon.dim(),
                truth: truth.dim(),
            });
        }
        let (k, height, width) = recon.dim();
        let frames: Vec<FrameMetrics> = recon
            .outer_iter()
            .zip(truth.outer_iter())
            .map(|(r, t)| {
                let e = rmse(r, t);
                FrameMetrics {
                    psnr_db: psnr(e),
                    rmse: e,
                    pearson: pearson(r, t),
                }
            })
            .collect();
        let mean = |f: &dyn Fn(&FrameMetrics) -> f64| frames.iter().map(f).sum::<f64>() / k as f64;
        let defined: Vec<f64> = frames.iter().map(|f| f.pearson).filter(|p| !p.is_nan()).collect();
        let mean_pearson = if defined.is_empty() {
            f64::NAN
        } else {
            defined.iter().sum::<f64>() / defined.len() as f64
        };
        Ok(Self {
            height,
            width,
            mean_psnr_db: mean(&|f| f.psnr_db),
            mean_rmse: mean(&|f| f.rmse),
            mean_pearson,
            frames,
            timings: Vec::new(),
        })
    }

    /// Flat `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "frames={}", self.frames.len());
        let _ = writeln!(s, "height={}", self.height);
        let _ = writeln!(s, "width={}", self.width);
        let _ = writeln!(s, "mean_psnr_db={}", fmt_value(self.mean_psnr_db));
        let _ = writeln!(s, "mean_rmse={}", fmt_value(self.mean_rmse));
        let _ = writeln!(s, "mean_pearson={}", fmt_value(self.mean_pearson));
        for (k, f) in self.frames.iter().enumerate() {
            let _ = writeln!(s, "frame_{:04}_psnr_db={}", k + 1, fmt_value(f.psnr_db));
            let _ = writeln!(s, "frame_{:04}_rmse={}", k + 1, fmt_value(f.rmse));
            let _ = writeln!(s, "frame_{:04}_pearson={}", k + 1, fmt_value(f.pearson));
        }
        s
    }

    pub fn timings_text(&self) -> String {
        self.timings
            .iter()
            .map(|(stage, secs)| format!("{stage}_seconds={secs:.3}\n"))
            .collect()
    }
}

/// Shortest round-trip decimal; `inf`, `-inf` and `nan` as words.
pub fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}
