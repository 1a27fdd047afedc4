//! Forward optical model: per-frame binary modulation, single-exposure
//! accumulation, optional camera noise, and the unmodulated blur image.

use ndarray::{Array2, Array3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use ndarray::parallel::prelude::*;

use crate::basis::ModulationBasis;
use crate::error::{CtgiError, Result};
use crate::geometry::SuperPixelGeometry;
use crate::video::Video;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    None,
    /// Additive zero-mean Gaussian with standard deviation `sigma`.
    AdditiveGaussian { sigma: f64 },
    /// Photon counting: `Poisson(value * scale) / scale`.
    Poisson { scale: f64 },
}

/// Post-accumulation camera noise. Draws come from ChaCha8 seeded with
/// `seed`, one per pixel in row-major order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            NoiseKind::None => Ok(()),
            NoiseKind::AdditiveGaussian { sigma } if sigma.is_finite() && sigma >= 0.0 => Ok(()),
            NoiseKind::AdditiveGaussian { sigma } => Err(CtgiError::InvalidParameter(format!(
                "gaussian sigma must be finite and >= 0, got {sigma}"
            ))),
            NoiseKind::Poisson { scale } if scale.is_finite() && scale > 0.0 => Ok(()),
            NoiseKind::Poisson { scale } => Err(CtgiError::InvalidParameter(format!(
                "poisson scale must be finite and > 0, got {scale}"
            ))),
        }
    }
}

/// The single `m x m` camera image.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureImage {
    pub values: Array2<f64>,
    pub geometry: SuperPixelGeometry,
    pub noise: Option<NoiseModel>,
}

impl ExposureImage {
    pub fn new(values: Array2<f64>, geometry: SuperPixelGeometry) -> Result<Self> {
        let m = geometry.m();
        if values.dim() != (m, m) {
            return Err(CtgiError::DimensionMismatch(format!(
                "exposure is {:?}, geometry requires {m}x{m}",
                values.dim()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(CtgiError::InvalidParameter(format!("non-finite exposure value {v}")));
        }
        Ok(Self {
            values,
            geometry,
            noise: None,
        })
    }
}

/// Replicates each scene pixel into an `l x l` block.
pub fn upsample_scene(video: &Video, geometry: SuperPixelGeometry) -> Result<Video> {
    let n = geometry.n();
    if video.height() != n || video.width() != n {
        return Err(CtgiError::DimensionMismatch(format!(
            "scene is {}x{}, geometry expects {n}x{n}",
            video.height(),
            video.width()
        )));
    }
    let l = geometry.l();
    let m = geometry.m();
    let src = video.frames();
    let out = Array3::from_shape_fn((video.len(), m, m), |(k, i, j)| src[[k, i / l, j / l]]);
    Video::new(out)
}

fn check_frames(video: &Video, basis: &ModulationBasis, side: usize) -> Result<()> {
    if video.len() != basis.k() {
        return Err(CtgiError::FrameCountMismatch {
            expected: basis.k(),
            actual: video.len(),
        });
    }
    if video.height() != side || video.width() != side {
        return Err(CtgiError::DimensionMismatch(format!(
            "frames are {}x{}, expected {side}x{side}",
            video.height(),
            video.width()
        )));
    }
    Ok(())
}

/// Accumulates every modulated frame into one exposure:
/// `S(i, j) = sum_k X_k(i, j) * F_k(i, j)`, summed in ascending `k`.
///
/// `video` is at modulator resolution `m x m`.
pub fn modulate_accumulate(video: &Video, basis: &ModulationBasis) -> Result<ExposureImage> {
    let geometry = basis.geometry();
    check_frames(video, basis, geometry.m())?;
    let frames = video.frames();
    Ok(accumulate(geometry, basis, |k, i, j| frames[[k, i, j]]))
}

/// Same as [`modulate_accumulate`] on `upsample_scene(video)`, without
/// materializing the `K x m x m` upsampled stack. Bit-identical to the
/// two-step route.
pub fn modulate_accumulate_scene(video: &Video, basis: &ModulationBasis) -> Result<ExposureImage> {
    let geometry = basis.geometry();
    check_frames(video, basis, geometry.n())?;
    let l = geometry.l();
    let frames = video.frames();
    Ok(accumulate(geometry, basis, |k, i, j| frames[[k, i / l, j / l]]))
}

fn accumulate<F>(geometry: SuperPixelGeometry, basis: &ModulationBasis, sample: F) -> ExposureImage
where
    F: Fn(usize, usize, usize) -> f64 + Sync,
{
    let m = geometry.m();
    let k_count = basis.k();
    let mut values = Array2::<f64>::zeros((m, m));
    values
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            for (j, out) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in 0..k_count {
                    acc += f64::from(basis.value(k, i, j)) * sample(k, i, j);
                }
                *out = acc;
            }
        });
    ExposureImage {
        values,
        geometry,
        noise: None,
    }
}

/// Pixelwise sum of all frames: what an unmodulated camera records.
pub fn direct_capture(video: &Video) -> Result<Array2<f64>> {
    if video.is_empty() {
        return Err(CtgiError::EmptyVideo);
    }
    let mut acc = Array2::<f64>::zeros((video.height(), video.width()));
    for k in 0..video.len() {
        acc += &video.frame(k);
    }
    Ok(acc)
}

/// Applies camera noise after accumulation and clamps the result at 0.
pub fn add_noise(exposure: &ExposureImage, model: &NoiseModel) -> Result<ExposureImage> {
    model.validate()?;
    let mut out = exposure.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    match model.kind {
        NoiseKind::None => return Ok(out),
        NoiseKind::AdditiveGaussian { sigma } => {
            let normal = Normal::new(0.0, sigma)
                .map_err(|e| CtgiError::InvalidParameter(e.to_string()))?;
            for v in out.values.iter_mut() {
                *v = (*v + normal.sample(&mut rng)).max(0.0);
            }
        }
        NoiseKind::Poisson { scale } => {
            for v in out.values.iter_mut() {
                let mean = *v * scale;
                *v = if mean > 0.0 {
                    let dist = Poisson::new(mean)
                        .map_err(|e| CtgiError::InvalidParameter(e.to_string()))?;
                    dist.sample(&mut rng) / scale
                } else {
                    0.0
                };
            }
        }
    }
    out.noise = Some(*model);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_hadamard_basis, build_random_basis};
    use crate::hadamard::HadamardOrdering;
    use ndarray::array;

    fn geom(l: usize, n: usize) -> SuperPixelGeometry {
        SuperPixelGeometry::new(l, n).unwrap()
    }

    fn trace_video(trace: &[f64], side: usize) -> Video {
        Video::new(Array3::from_shape_fn((trace.len(), side, side), |(k, _, _)| trace[k])).unwrap()
    }

    #[test]
    fn upsample_replicates() {
        let v = Video::from_frames(&[array![[0.5]]]).unwrap();
        let up = upsample_scene(&v, geom(2, 1)).unwrap();
        assert_eq!(up.frame(0), array![[0.5, 0.5], [0.5, 0.5]]);

        let v = Video::from_frames(&[array![[1.0, 0.0], [0.0, 1.0]]]).unwrap();
        let up = upsample_scene(&v, geom(2, 2)).unwrap();
        assert_eq!(
            up.frame(0),
            array![
                [1.0, 1.0, 0.0, 0.0],
                [1.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 1.0],
                [0.0, 0.0, 1.0, 1.0]
            ]
        );
        assert!(upsample_scene(&v, geom(2, 3)).is_err());
    }

    #[test]
    fn micro_case_exposure() {
        let b = build_hadamard_basis(geom(2, 1), HadamardOrdering::NaturalSylvester).unwrap();
        let s = modulate_accumulate(&trace_video(&[1.0, 2.0, 3.0, 4.0], 2), &b).unwrap();
        assert_eq!(s.values, array![[10.0, 4.0], [3.0, 5.0]]);
    }

    #[test]
    fn zero_video_and_identity_modulation() {
        let g = geom(2, 2);
        let b = build_hadamard_basis(g, HadamardOrdering::WalshSequency).unwrap();
        let zero = Video::new(Array3::zeros((4, 4, 4))).unwrap();
        assert!(modulate_accumulate(&zero, &b).unwrap().values.iter().all(|&v| v == 0.0));

        let ones = ModulationBasis::from_tiles(
            g,
            b.kind(),
            &vec![vec![1u8; 4]; 3],
        )
        .unwrap();
        let v = Video::new(Array3::from_shape_fn((3, 4, 4), |(k, i, j)| {
            (k * 16 + i * 4 + j) as f64 / 64.0
        }))
        .unwrap();
        let s = modulate_accumulate(&v, &ones).unwrap();
        assert_eq!(s.values, direct_capture(&v).unwrap());
    }

    #[test]
    fn mismatches_are_errors() {
        let b = build_hadamard_basis(geom(2, 1), HadamardOrdering::NaturalSylvester).unwrap();
        assert!(matches!(
            modulate_accumulate(&trace_video(&[1.0, 2.0], 2), &b),
            Err(CtgiError::FrameCountMismatch { expected: 4, actual: 2 })
        ));
        assert!(matches!(
            modulate_accumulate(&trace_video(&[1.0; 4], 3), &b),
            Err(CtgiError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn scene_route_matches_upsampled_route() {
        let g = geom(4, 3);
        let b = build_random_basis(g, 16, 3, 0.5).unwrap();
        let v = Video::new(Array3::from_shape_fn((16, 3, 3), |(k, i, j)| {
            ((k * 7 + i * 3 + j * 5) % 11) as f64 / 10.0
        }))
        .unwrap();
        let a = modulate_accumulate_scene(&v, &b).unwrap();
        let c = modulate_accumulate(&upsample_scene(&v, g).unwrap(), &b).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn direct_capture_cases() {
        let f = array![[0.25, 0.5], [0.75, 1.0]];
        let one = Video::from_frames(std::slice::from_ref(&f)).unwrap();
        assert_eq!(direct_capture(&one).unwrap(), f);
        let three = Video::from_frames(&[f.clone(), f.clone(), f.clone()]).unwrap();
        assert_eq!(direct_capture(&three).unwrap(), f * 3.0);
        // a bright pixel moving right smears into a line
        let frames: Vec<Array2<f64>> = (0..3)
            .map(|k| Array2::from_shape_fn((1, 3), |(_, j)| if j == k { 1.0 } else { 0.0 }))
            .collect();
        let moving = Video::from_frames(&frames).unwrap();
        assert_eq!(direct_capture(&moving).unwrap(), array![[1.0, 1.0, 1.0]]);
    }

    #[test]
    fn noise_contract() {
        let g = geom(2, 2);
        let values = Array2::from_shape_fn((4, 4), |(i, j)| (i * 4 + j) as f64 / 4.0);
        let e = ExposureImage::new(values, g).unwrap();

        assert_eq!(add_noise(&e, &NoiseModel::none()).unwrap().values, e.values);
        let zero = NoiseModel {
            kind: NoiseKind::AdditiveGaussian { sigma: 0.0 },
            seed: 1,
        };
        assert_eq!(add_noise(&e, &zero).unwrap().values, e.values);

        let m = NoiseModel {
            kind: NoiseKind::AdditiveGaussian { sigma: 0.01 },
            seed: 17,
        };
        let a = add_noise(&e, &m).unwrap();
        let b = add_noise(&e, &m).unwrap();
        assert!(a.values.iter().zip(b.values.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a.values, e.values);
        assert!(a.values.iter().all(|&v| v >= 0.0));
        assert_eq!(a.noise, Some(m));

        let p = NoiseModel {
            kind: NoiseKind::Poisson { scale: 100.0 },
            seed: 17,
        };
        let pa = add_noise(&e, &p).unwrap();
        assert_eq!(pa, add_noise(&e, &p).unwrap());
        assert_eq!(pa.values[[0, 0]], 0.0);

        for bad in [
            NoiseKind::AdditiveGaussian { sigma: -1.0 },
            NoiseKind::Poisson { scale: 0.0 },
        ] {
            assert!(add_noise(&e, &NoiseModel { kind: bad, seed: 0 }).is_err());
        }
    }
}
