use crate::error::{CtgiError, Result};

/// Ties the modulator/camera side length `m` to the super-pixel side `l`
/// and the scene side `n` through `m = l * n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SuperPixelGeometry {
    m: usize,
    l: usize,
    n: usize,
}

impl SuperPixelGeometry {
    pub fn new(l: usize, n: usize) -> Result<Self> {
        if l == 0 || n == 0 {
            return Err(CtgiError::InvalidGeometry(format!(
                "l and n must be at least 1 (got l = {l}, n = {n})"
            )));
        }
        let m = l.checked_mul(n).ok_or_else(|| {
            CtgiError::InvalidGeometry(format!("l * n overflows (l = {l}, n = {n})"))
        })?;
        Ok(Self { m, l, n })
    }

    /// Validating constructor for a full `(m, l, n)` triple.
    pub fn from_parts(m: usize, l: usize, n: usize) -> Result<Self> {
        let g = Self::new(l, n)?;
        if g.m != m {
            return Err(CtgiError::InvalidGeometry(format!(
                "m = {m} but l * n = {l} * {n} = {}",
                g.m
            )));
        }
        Ok(g)
    }

    /// Modulator / camera side length in pixels.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Super-pixel side length in pixels.
    pub fn l(&self) -> usize {
        self.l
    }

    /// Scene side length in super-pixels.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Pixels per super-pixel (`l²`).
    pub fn pixels_per_super_pixel(&self) -> usize {
        self.l * self.l
    }

    /// Side length of a sliding-window reconstruction, `m - l + 1`.
    pub fn sliding_side(&self) -> usize {
        self.m - self.l + 1
    }
}
