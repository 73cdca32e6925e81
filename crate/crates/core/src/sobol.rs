//! Sobol low-discrepancy sequence with Joe-Kuo direction numbers.
//!
//! Gray-code construction: point `i` is obtained from point `i-1` by XOR-ing
//! the direction number indexed by the lowest zero bit of `i-1`. Points are
//! dyadic rationals with 30 fractional bits, so every value is exact in f64.

use ndarray::Array2;

use crate::error::{Error, Result};

const NBITS: u32 = 30;

/// Joe-Kuo primitive-polynomial rows `(degree, coefficients, initial m)` for
/// dimensions 2..=48. Dimension 1 is the van der Corput sequence.
const JOE_KUO: &[(u32, u32, &[u32])] = &[
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
    (7, 7, &[1, 1, 3, 13, 7, 35, 63]),
    (7, 8, &[1, 3, 5, 9, 1, 25, 53]),
    (7, 14, &[1, 3, 1, 13, 9, 35, 107]),
    (7, 19, &[1, 3, 1, 5, 27, 61, 31]),
    (7, 21, &[1, 1, 5, 11, 19, 41, 61]),
    (7, 28, &[1, 3, 5, 3, 3, 13, 69]),
    (7, 31, &[1, 1, 7, 13, 1, 19, 1]),
    (7, 32, &[1, 3, 7, 5, 13, 19, 59]),
    (7, 37, &[1, 1, 3, 9, 25, 29, 41]),
    (7, 41, &[1, 3, 5, 13, 23, 1, 55]),
    (7, 42, &[1, 3, 7, 3, 13, 59, 17]),
    (7, 50, &[1, 3, 1, 3, 5, 53, 69]),
    (7, 55, &[1, 1, 5, 5, 23, 33, 13]),
    (7, 56, &[1, 1, 7, 7, 1, 61, 123]),
    (7, 59, &[1, 1, 7, 9, 13, 61, 49]),
    (7, 62, &[1, 3, 3, 5, 3, 55, 33]),
    (8, 14, &[1, 3, 1, 15, 31, 13, 49, 245]),
    (8, 21, &[1, 3, 5, 15, 31, 59, 63, 97]),
    (8, 22, &[1, 3, 1, 11, 11, 11, 77, 249]),
    (8, 38, &[1, 3, 1, 11, 27, 43, 71, 9]),
    (8, 47, &[1, 1, 7, 15, 21, 11, 81, 45]),
    (8, 49, &[1, 3, 7, 3, 25, 31, 65, 79]),
    (8, 50, &[1, 3, 1, 1, 19, 11, 3, 205]),
    (8, 52, &[1, 1, 5, 9, 19, 21, 29, 157]),
    (8, 56, &[1, 3, 7, 11, 1, 33, 89, 185]),
    (8, 67, &[1, 3, 3, 3, 15, 9, 79, 71]),
    (8, 70, &[1, 3, 7, 11, 15, 39, 119, 27]),
];

/// Largest supported dimension.
pub const MAX_DIM: usize = JOE_KUO.len() + 1;

fn direction_numbers(dim_index: usize) -> Vec<u32> {
    let mut v = vec![0u32; NBITS as usize];
    if dim_index == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1 << (NBITS - 1 - k as u32);
        }
        return v;
    }
    let (s, a, m) = JOE_KUO[dim_index - 1];
    let s = s as usize;
    for k in 0..s.min(NBITS as usize) {
        v[k] = m[k] << (NBITS - 1 - k as u32);
    }
    for k in s..NBITS as usize {
        let mut vk = v[k - s] ^ (v[k - s] >> s);
        for i in 1..s {
            if (a >> (s - 1 - i)) & 1 == 1 {
                vk ^= v[k - i];
            }
        }
        v[k] = vk;
    }
    v
}

/// Incremental Sobol generator over `[0,1)^dim`.
pub struct SobolSequence {
    directions: Vec<Vec<u32>>,
    state: Vec<u32>,
    index: u64,
}

impl SobolSequence {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Config(format!(
                "sobol dimension {dim} unsupported (1..={MAX_DIM})"
            )));
        }
        Ok(Self {
            directions: (0..dim).map(direction_numbers).collect(),
            state: vec![0; dim],
            index: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.state.len()
    }

    /// Advances to the next point. The first call yields point 0 (all zeros).
    pub fn next_point(&mut self) -> Vec<f64> {
        if self.index > 0 {
            let c = (self.index - 1).trailing_ones() as usize;
            debug_assert!(c < NBITS as usize, "sobol index exhausted");
            for (x, v) in self.state.iter_mut().zip(&self.directions) {
                *x ^= v[c];
            }
        }
        self.index += 1;
        let scale = 1.0 / f64::from(1u32 << NBITS);
        self.state.iter().map(|&x| f64::from(x) * scale).collect()
    }

    pub fn skip(&mut self, count: u64) {
        for _ in 0..count {
            self.next_point();
        }
    }
}

/// Generates `count` points of the `dim`-dimensional sequence starting after
/// `skip` points, as a `count x dim` matrix. `skip = 1` drops the all-zeros
/// point, which is the convention used throughout the pipeline.
pub fn sobol_points(dim: usize, count: usize, skip: u64) -> Result<Array2<f64>> {
    if count == 0 {
        return Err(Error::Config("sobol count must be >= 1".into()));
    }
    let mut seq = SobolSequence::new(dim)?;
    seq.skip(skip);
    let mut out = Array2::zeros((count, dim));
    for i in 0..count {
        let p = seq.next_point();
        for (j, &x) in p.iter().enumerate() {
            out[[i, j]] = x;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with an independent direction-number
    // implementation (scipy.stats.qmc.Sobol, Joe-Kuo table, unscrambled).
    const REF_1D_SKIP1: [f64; 8] = [0.5, 0.75, 0.25, 0.375, 0.875, 0.625, 0.125, 0.1875];

    #[test]
    fn one_dimensional_reference_sequence() {
        let pts = sobol_points(1, 8, 1).unwrap();
        for (i, &want) in REF_1D_SKIP1.iter().enumerate() {
            assert_eq!(pts[[i, 0]], want, "point {i}");
        }
    }

    #[test]
    fn two_dimensional_first_point() {
        let pts = sobol_points(2, 1, 1).unwrap();
        assert_eq!(pts[[0, 0]], 0.5);
        assert_eq!(pts[[0, 1]], 0.5);
    }

    #[test]
    fn thirty_two_dimensional_reference_points() {
        // Points 2..=4 and 16 (skip=1) from the same independent oracle.
        let pts = sobol_points(32, 16, 1).unwrap();
        let p2 = [
            0.75, 0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.75, 0.75, 0.75, 0.75, 0.75, 0.25, 0.25,
            0.75, 0.25, 0.75, 0.25, 0.75, 0.25, 0.25, 0.75, 0.25, 0.25, 0.25, 0.75, 0.25, 0.75,
            0.25, 0.75, 0.25, 0.25,
        ];
        let p4 = [
            0.375, 0.375, 0.625, 0.875, 0.375, 0.125, 0.375, 0.875, 0.875, 0.625, 0.875, 0.375,
            0.375, 0.625, 0.375, 0.875, 0.375, 0.875, 0.875, 0.125, 0.125, 0.125, 0.375, 0.875,
            0.875, 0.875, 0.375, 0.625, 0.125, 0.125, 0.375, 0.125,
        ];
        let p16 = [
            0.09375, 0.46875, 0.46875, 0.65625, 0.28125, 0.96875, 0.53125, 0.84375, 0.46875,
            0.15625, 0.09375, 0.40625, 0.65625, 0.65625, 0.34375, 0.03125, 0.78125, 0.59375,
            0.78125, 0.03125, 0.71875, 0.90625, 0.59375, 0.59375, 0.53125, 0.15625, 0.15625,
            0.84375, 0.21875, 0.34375, 0.40625, 0.34375,
        ];
        for j in 0..32 {
            assert_eq!(pts[[1, j]], p2[j], "point 2 dim {j}");
            assert_eq!(pts[[3, j]], p4[j], "point 4 dim {j}");
            assert_eq!(pts[[15, j]], p16[j], "point 16 dim {j}");
        }
    }

    #[test]
    fn unsupported_dimension_is_a_config_error() {
        assert!(SobolSequence::new(0).is_err());
        assert!(SobolSequence::new(MAX_DIM + 1).is_err());
        assert!(SobolSequence::new(MAX_DIM).is_ok());
        const { assert!(MAX_DIM >= 32) };
    }

    #[test]
    fn range_property() {
        let pts = sobol_points(9, 513, 1).unwrap();
        for &x in pts.iter() {
            assert!((0.0..1.0).contains(&x), "out of range: {x}");
        }
    }

    // Aligned blocks of 2^k consecutive points stratify every dyadic interval
    // of width 2^-k in each one-dimensional projection. The block starting at
    // index 0 contains the all-zeros point; the blocks starting at 2^k cover
    // the skip-1 usage.
    #[test]
    fn dyadic_stratification_of_aligned_blocks() {
        for dim in [1usize, 2, 5, 13, 32] {
            for k in [1u32, 2, 4, 6] {
                let block = 1usize << k;
                for start in [0u64, block as u64, 4 * block as u64] {
                    let pts = sobol_points(dim, block, start).unwrap();
                    for j in 0..dim {
                        let mut hits = vec![0usize; block];
                        for i in 0..block {
                            let cell = (pts[[i, j]] * block as f64).floor() as usize;
                            hits[cell] += 1;
                        }
                        assert!(
                            hits.iter().all(|&h| h == 1),
                            "dim {dim} proj {j} k {k} start {start}: {hits:?}"
                        );
                    }
                }
            }
        }
    }
}
