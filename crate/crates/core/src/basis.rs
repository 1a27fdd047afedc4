//! Binary modulation bases: `K` super-pixel tiles of `l x l` mirrors, each
//! repeated `n x n` times across the `m x m` modulator.
//!
//! Tiles are stored row-major. Pattern `k` at modulator pixel `(i, j)` is
//! `tile_k(i mod l, j mod l)`, so every basis is exactly `l`-periodic.
//!
//! Random bases are drawn from ChaCha8 (`rand_chacha::ChaCha8Rng`, seeded with
//! `seed_from_u64`). One `next_u64` draw is consumed per tile pixel, in
//! k-major then row-major order; the pixel is on when the top 53 bits of the
//! draw, read as a fraction of 2^53, are below `density`. This generator and
//! draw order are part of the file contract and must not change.

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CtgiError, Result};
use crate::geometry::SuperPixelGeometry;
use crate::hadamard::{binarize_row, walsh_hadamard, HadamardOrdering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    WalshHadamard { ordering: HadamardOrdering },
    RandomBinary { seed: u64 },
}

impl BasisKind {
    pub fn is_hadamard(&self) -> bool {
        matches!(self, BasisKind::WalshHadamard { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModulationBasis {
    geometry: SuperPixelGeometry,
    kind: BasisKind,
    k: usize,
    /// `K * l * l` mirror states, tile-major then row-major.
    tiles: Vec<u8>,
}

impl ModulationBasis {
    /// Assembles a basis from explicit tiles (each `l * l` entries in `{0, 1}`,
    /// row-major).
    pub fn from_tiles(
        geometry: SuperPixelGeometry,
        kind: BasisKind,
        tiles: &[Vec<u8>],
    ) -> Result<Self> {
        if tiles.is_empty() {
            return Err(CtgiError::InvalidParameter("basis needs at least one tile".into()));
        }
        let p = geometry.pixels_per_super_pixel();
        let mut flat = Vec::with_capacity(tiles.len() * p);
        for (k, t) in tiles.iter().enumerate() {
            if t.len() != p {
                return Err(CtgiError::DimensionMismatch(format!(
                    "tile {k} has {} entries, expected l² = {p}",
                    t.len()
                )));
            }
            if let Some(v) = t.iter().find(|&&v| v > 1) {
                return Err(CtgiError::InvalidParameter(format!(
                    "tile {k} contains non-binary value {v}"
                )));
            }
            flat.extend_from_slice(t);
        }
        Ok(Self {
            geometry,
            kind,
            k: tiles.len(),
            tiles: flat,
        })
    }

    pub fn geometry(&self) -> SuperPixelGeometry {
        self.geometry
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// Number of patterns `K`.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Tile `k` as a row-major slice of length `l²`.
    pub fn tile(&self, k: usize) -> &[u8] {
        let p = self.geometry.pixels_per_super_pixel();
        &self.tiles[k * p..(k + 1) * p]
    }

    pub fn tiles(&self) -> impl Iterator<Item = &[u8]> {
        self.tiles.chunks_exact(self.geometry.pixels_per_super_pixel())
    }

    /// Mirror state of pattern `k` at modulator pixel `(i, j)`.
    #[inline]
    pub fn value(&self, k: usize, i: usize, j: usize) -> u8 {
        let l = self.geometry.l();
        self.tiles[(k * l + i % l) * l + j % l]
    }

    /// Full `m x m` pattern `k`.
    pub fn pattern(&self, k: usize) -> Array2<u8> {
        let m = self.geometry.m();
        Array2::from_shape_fn((m, m), |(i, j)| self.value(k, i, j))
    }

    /// Indices and values of tiles that are spatially constant.
    pub fn constant_tiles(&self) -> Vec<(usize, u8)> {
        self.tiles()
            .enumerate()
            .filter(|(_, t)| t.iter().all(|&v| v == t[0]))
            .map(|(k, t)| (k, t[0]))
            .collect()
    }

    /// The `l² x K` measurement matrix: entry `(p, k)` is tile `k` at
    /// row-major pixel `p`.
    pub fn measurement_matrix(&self) -> DMatrix<f64> {
        let p = self.geometry.pixels_per_super_pixel();
        DMatrix::from_fn(p, self.k, |r, c| f64::from(self.tile(c)[r]))
    }

    /// Mean of all mirror states over all tiles.
    pub fn fill_fraction(&self) -> f64 {
        let on: usize = self.tiles.iter().map(|&v| usize::from(v)).sum();
        on as f64 / self.tiles.len() as f64
    }
}

/// Full-sampling Walsh-Hadamard basis with `K = l²`.
pub fn build_hadamard_basis(
    geometry: SuperPixelGeometry,
    ordering: HadamardOrdering,
) -> Result<ModulationBasis> {
    build_hadamard_basis_with_order(geometry, ordering, geometry.pixels_per_super_pixel())
}

/// Walsh-Hadamard basis using the first `k` rows (in `ordering`) of the
/// `l²`-order matrix. `k < l²` oversamples; `k > l²` is rejected.
pub fn build_hadamard_basis_with_order(
    geometry: SuperPixelGeometry,
    ordering: HadamardOrdering,
    k: usize,
) -> Result<ModulationBasis> {
    let p = geometry.pixels_per_super_pixel();
    if k == 0 || k > p {
        return Err(CtgiError::InvalidParameter(format!(
            "Hadamard basis needs 1 <= K <= l² = {p}, got K = {k}"
        )));
    }
    let h = walsh_hadamard(p, ordering)?;
    let tiles: Vec<Vec<u8>> = h.rows().take(k).map(binarize_row).collect();
    ModulationBasis::from_tiles(geometry, BasisKind::WalshHadamard { ordering }, &tiles)
}

/// I.i.d. Bernoulli(`density`) tiles from the seeded ChaCha8 stream
/// described in the module docs.
pub fn build_random_basis(
    geometry: SuperPixelGeometry,
    k: usize,
    seed: u64,
    density: f64,
) -> Result<ModulationBasis> {
    if !(density > 0.0 && density < 1.0) {
        return Err(CtgiError::InvalidParameter(format!(
            "density must lie in (0, 1), got {density}"
        )));
    }
    if k == 0 {
        return Err(CtgiError::InvalidParameter("K must be at least 1".into()));
    }
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = geometry.pixels_per_super_pixel();
    let tiles: Vec<Vec<u8>> = (0..k)
        .map(|_| {
            (0..p)
                .map(|_| {
                    let u = (rng.next_u64() >> 11) as f64 * SCALE;
                    u8::from(u < density)
                })
                .collect()
        })
        .collect();
    ModulationBasis::from_tiles(geometry, BasisKind::RandomBinary { seed }, &tiles)
}
