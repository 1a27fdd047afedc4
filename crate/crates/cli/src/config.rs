//! Run configuration shared by the `reconstruct` command and the demos.

use std::path::PathBuf;

use ctgi::{
    apply_threshold, reconstruct_correlation, reconstruct_cs, reconstruct_exact,
    reconstruct_sliding, BasisKind, CtgiError, DcPolicy, ExposureImage, ModulationBasis,
    NoiseModel, ReconMode, ReconstructionResult, SlidingRetrieval, SolverOptions,
    SuperPixelGeometry, TvMode,
};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunPaths {
    pub scene: Option<PathBuf>,
    pub basis: Option<PathBuf>,
    pub exposure: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: SuperPixelGeometry,
    pub k: usize,
    pub basis: BasisKind,
    /// Fill probability of a random basis.
    pub density: Option<f64>,
    pub mode: ReconMode,
    pub dc_policy: DcPolicy,
    /// `None` picks `0.01 * ||phi^T y||_inf`.
    pub lambda: Option<f64>,
    pub tv_mode: TvMode,
    pub noise: NoiseModel,
    /// Ghost-suppression threshold as a fraction of each frame's maximum;
    /// 0 disables it.
    pub tau: f64,
    pub paths: RunPaths,
    pub metrics: bool,
}

impl RunConfig {
    /// Defaults for a basis already on disk or in memory.
    pub fn for_basis(basis: &ModulationBasis, mode: ReconMode) -> Self {
        Self {
            geometry: basis.geometry(),
            k: basis.k(),
            basis: basis.kind(),
            density: None,
            mode,
            dc_policy: DcPolicy::Formula,
            lambda: None,
            tv_mode: TvMode::default(),
            noise: NoiseModel::none(),
            tau: 0.0,
            paths: RunPaths::default(),
            metrics: false,
        }
    }

    pub fn validate(&self) -> Result<(), CtgiError> {
        let g = self.geometry;
        SuperPixelGeometry::from_parts(g.m(), g.l(), g.n())?;
        let bad = |m: String| Err(CtgiError::InvalidParameter(m));
        let l2 = g.pixels_per_super_pixel();
        if self.k == 0 {
            return bad("K must be at least 1".into());
        }
        match (self.basis, self.density) {
            (BasisKind::RandomBinary { .. }, Some(d)) if !(d > 0.0 && d < 1.0) => {
                return bad(format!("density must lie in (0, 1), got {d}"));
            }
            (BasisKind::WalshHadamard { .. }, Some(_)) => {
                return bad("density applies to random bases only".into());
            }
            (BasisKind::WalshHadamard { .. }, None) if self.k > l2 => {
                return bad(format!("a Hadamard basis has at most l² = {l2} patterns, K = {}", self.k));
            }
            _ => {}
        }
        match self.mode {
            ReconMode::Sliding if !self.basis.is_hadamard() || self.k != l2 => {
                return Err(CtgiError::IncompatibleMode(format!(
                    "sliding mode needs a complete Hadamard basis (K = l² = {l2})"
                )));
            }
            ReconMode::Exact if self.k > l2 => {
                return Err(CtgiError::IncompatibleMode(format!(
                    "exact mode needs K <= l² ({} > {l2}); use cs mode",
                    self.k
                )));
            }
            _ => {}
        }
        if let Some(lam) = self.lambda {
            if self.mode != ReconMode::Compressive {
                return bad("lambda applies to cs mode only".into());
            }
            if !(lam.is_finite() && lam >= 0.0) {
                return bad(format!("lambda must be finite and >= 0, got {lam}"));
            }
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("tau must lie in [0, 1], got {}", self.tau));
        }
        self.noise.validate()?;
        if self.metrics && self.paths.truth.is_none() {
            return bad("metrics requested without a truth directory".into());
        }
        Ok(())
    }

    /// Runs the configured reconstruction and threshold.
    pub fn reconstruct(
        &self,
        exposure: &ExposureImage,
        basis: &ModulationBasis,
    ) -> Result<ReconstructionResult, CtgiError> {
        self.validate()?;
        if basis.geometry() != self.geometry || basis.k() != self.k {
            return Err(CtgiError::DimensionMismatch(format!(
                "basis has K = {} and geometry {:?}, configuration expects K = {} and {:?}",
                basis.k(),
                basis.geometry(),
                self.k,
                self.geometry
            )));
        }
        let result = match self.mode {
            ReconMode::Correlation => reconstruct_correlation(exposure, basis, self.dc_policy)?,
            ReconMode::Exact => reconstruct_exact(exposure, basis)?,
            ReconMode::Sliding => {
                reconstruct_sliding(exposure, basis, self.dc_policy, SlidingRetrieval::Correlation)?
            }
            ReconMode::Compressive => {
                reconstruct_cs(exposure, basis, self.lambda, self.tv_mode, &SolverOptions::default())?
            }
        };
        apply_threshold(result, self.tau)
    }
}
