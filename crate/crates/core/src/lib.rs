//! Computational temporal ghost imaging.
//!
//! A `K`-frame scene is modulated by `K` binary patterns, summed into one
//! camera exposure, and recovered per `l x l` super-pixel by intensity
//! correlation, an exact linear solve, or TV-regularized compressive sensing.
//!
//! Frame `k` is 0-based in storage; file names and messages number frames
//! from 1.

pub mod basis;
pub mod basis_file;
pub mod compressive;
pub mod correlation;
mod error;
pub mod geometry;
pub mod hadamard;
pub mod recon;
pub mod scene;
pub mod video;

pub use basis::{
    build_hadamard_basis, build_hadamard_basis_with_order, build_random_basis, BasisKind,
    ModulationBasis,
};
pub use basis_file::{deserialize_basis, serialize_basis};
pub use compressive::{
    build_problem, plan_sampling, reconstruct_cs, solve_tv, tv_objective, CsProblem, CsSolution,
    SamplingPlan, SolverOptions, Termination, TvMode,
};
pub use correlation::{
    apply_threshold, reconstruct_correlation, reconstruct_exact, reconstruct_sliding,
    recover_dc_frame, CorrelationKernel, SlidingRetrieval, TemporalTrace,
};
pub use error::{CtgiError, Result};
pub use geometry::SuperPixelGeometry;
pub use hadamard::{binarize_row, walsh_hadamard, HadamardMatrix, HadamardOrdering};
pub use recon::{DcPolicy, FrameStats, ReconMode, ReconstructionResult};
pub use scene::{
    add_noise, direct_capture, modulate_accumulate, modulate_accumulate_scene, upsample_scene,
    ExposureImage, NoiseKind, NoiseModel,
};
pub use video::Video;
