//! Sylvester-construction Hadamard matrices with natural or sequency (Walsh)
//! row ordering.

use crate::error::{CtgiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum HadamardOrdering {
    /// Rows in the order produced by the Sylvester recursion.
    NaturalSylvester,
    /// Rows sorted by ascending number of sign changes.
    #[default]
    WalshSequency,
}

/// A `K x K` matrix with entries in `{+1, -1}`, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HadamardMatrix {
    order: usize,
    ordering: HadamardOrdering,
    entries: Vec<i8>,
}

impl HadamardMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn ordering(&self) -> HadamardOrdering {
        self.ordering
    }

    pub fn row(&self, k: usize) -> &[i8] {
        &self.entries[k * self.order..(k + 1) * self.order]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        self.entries.chunks_exact(self.order)
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.entries[row * self.order + col]
    }
}

/// Number of sign changes along a `±1` row.
pub fn sign_changes(row: &[i8]) -> usize {
    row.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Builds the order-`order` Hadamard matrix via `H_2K = [[H_K, H_K], [H_K, -H_K]]`.
pub fn walsh_hadamard(order: usize, ordering: HadamardOrdering) -> Result<HadamardMatrix> {
    if order == 0 || !order.is_power_of_two() {
        return Err(CtgiError::NotPowerOfTwo(order));
    }
    let mut entries = vec![1i8];
    let mut size = 1;
    while size < order {
        let next = size * 2;
        let mut grown = vec![0i8; next * next];
        for r in 0..size {
            for c in 0..size {
                let v = entries[r * size + c];
                grown[r * next + c] = v;
                grown[r * next + c + size] = v;
                grown[(r + size) * next + c] = v;
                grown[(r + size) * next + c + size] = -v;
            }
        }
        entries = grown;
        size = next;
    }

    if ordering == HadamardOrdering::WalshSequency {
        let mut rows: Vec<&[i8]> = entries.chunks_exact(order).collect();
        // sign-change counts of Sylvester rows are a permutation of 0..K
        rows.sort_by_key(|r| sign_changes(r));
        entries = rows.concat();
    }

    Ok(HadamardMatrix {
        order,
        ordering,
        entries,
    })
}

/// Maps a `±1` row onto DMD mirror states: `+1 -> 1`, `-1 -> 0`.
pub fn binarize_row(row: &[i8]) -> Vec<u8> {
    row.iter().map(|&v| u8::from(v > 0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_cases() {
        let h1 = walsh_hadamard(1, HadamardOrdering::NaturalSylvester).unwrap();
        assert_eq!(h1.row(0), &[1]);
        let h2 = walsh_hadamard(2, HadamardOrdering::NaturalSylvester).unwrap();
        assert_eq!(h2.row(0), &[1, 1]);
        assert_eq!(h2.row(1), &[1, -1]);
    }

    #[test]
    fn rejects_non_power_of_two() {
        for k in [0, 3, 6, 12, 48] {
            assert_eq!(
                walsh_hadamard(k, HadamardOrdering::WalshSequency),
                Err(CtgiError::NotPowerOfTwo(k))
            );
        }
    }

    #[test]
    fn sequency_order_k4() {
        let h = walsh_hadamard(4, HadamardOrdering::WalshSequency).unwrap();
        let rows: Vec<Vec<i8>> = h.rows().map(<[i8]>::to_vec).collect();
        assert_eq!(
            rows,
            vec![
                vec![1, 1, 1, 1],
                vec![1, 1, -1, -1],
                vec![1, -1, -1, 1],
                vec![1, -1, 1, -1],
            ]
        );
    }

    #[test]
    fn orthogonality_and_sequency() {
        for p in 0..=7 {
            let k = 1usize << p;
            for ordering in [HadamardOrdering::NaturalSylvester, HadamardOrdering::WalshSequency] {
                let h = walsh_hadamard(k, ordering).unwrap();
                for a in 0..k {
                    for b in 0..k {
                        let dot: i64 = (0..k)
                            .map(|i| i64::from(h.get(i, a)) * i64::from(h.get(i, b)))
                            .sum();
                        assert_eq!(dot, if a == b { k as i64 } else { 0 });
                    }
                }
                if ordering == HadamardOrdering::WalshSequency {
                    let counts: Vec<usize> = h.rows().map(sign_changes).collect();
                    assert_eq!(counts, (0..k).collect::<Vec<_>>());
                } else {
                    assert!(h.row(0).iter().all(|&v| v == 1));
                }
            }
        }
    }

    #[test]
    fn binarize() {
        assert_eq!(binarize_row(&[1, -1]), vec![1, 0]);
        assert_eq!(binarize_row(&[1, 1, 1]), vec![1, 1, 1]);
        assert_eq!(binarize_row(&[1, -1, -1, 1]), vec![1, 0, 0, 1]);
    }

    #[test]
    fn non_dc_rows_have_half_mean() {
        let h = walsh_hadamard(64, HadamardOrdering::WalshSequency).unwrap();
        for row in h.rows().skip(1) {
            let ones: usize = binarize_row(row).iter().map(|&v| v as usize).sum();
            assert_eq!(2 * ones, 64);
        }
    }
}
