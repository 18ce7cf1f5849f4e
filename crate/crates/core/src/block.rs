//! Strategy bundles partitioned into per-player blocks.

use nalgebra::DVector;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::scalar::Scalar;

/// A strategy bundle `x = (x_1, ..., x_N)`, one block per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockVector<S: Scalar> {
    blocks: Vec<DVector<S>>,
}

impl<S: Scalar> BlockVector<S> {
    /// Build a bundle from per-player blocks. All entries must be finite.
    pub fn new(blocks: Vec<DVector<S>>) -> Result<Self> {
        for (i, b) in blocks.iter().enumerate() {
            if b.iter().any(|v| !Float::is_finite(*v)) {
                return Err(GameError::InvalidSpec(format!(
                    "block {i} contains a non-finite entry"
                )));
            }
        }
        Ok(Self { blocks })
    }

    /// Split a flat vector into blocks of the given dimensions.
    pub fn from_flat(dims: &[usize], flat: &DVector<S>) -> Result<Self> {
        let total: usize = dims.iter().sum();
        if flat.len() != total {
            return Err(GameError::DimensionMismatch {
                player: 0,
                expected: total,
                got: flat.len(),
            });
        }
        let mut blocks = Vec::with_capacity(dims.len());
        let mut offset = 0;
        for &d in dims {
            blocks.push(flat.rows(offset, d).into_owned());
            offset += d;
        }
        Self::new(blocks)
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self {
            blocks: dims.iter().map(|&d| DVector::zeros(d)).collect(),
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    pub fn block(&self, i: usize) -> &DVector<S> {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[DVector<S>] {
        &self.blocks
    }

    /// Offset of block `i` inside the concatenated vector.
    pub fn block_offset(&self, i: usize) -> usize {
        self.blocks[..i].iter().map(|b| b.len()).sum()
    }

    /// The bundle `(y_i, x_{-i})`: block `i` replaced, the rest untouched.
    pub fn replace_block(&self, i: usize, block: DVector<S>) -> Result<Self> {
        if block.len() != self.blocks[i].len() {
            return Err(GameError::DimensionMismatch {
                player: i + 1,
                expected: self.blocks[i].len(),
                got: block.len(),
            });
        }
        let mut out = self.clone();
        out.blocks[i] = block;
        Ok(out)
    }

    pub fn flatten(&self) -> DVector<S> {
        let mut out = DVector::zeros(self.total_dim());
        let mut offset = 0;
        for b in &self.blocks {
            out.rows_mut(offset, b.len()).copy_from(b);
            offset += b.len();
        }
        out
    }

    pub fn sup_distance(&self, other: &Self) -> S {
        let mut m = S::zero();
        for (a, b) in self.blocks.iter().zip(&other.blocks) {
            for (u, v) in a.iter().zip(b.iter()) {
                m = Float::max(m, Float::abs(*u - *v));
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn replace_block_round_trip() {
        let x = BlockVector::new(vec![dvector![1.0, 2.0], dvector![3.0]]).unwrap();
        let y = x.replace_block(0, dvector![5.0, 6.0]).unwrap();
        assert_eq!(y.block(0), &dvector![5.0, 6.0]);
        assert_eq!(y.block(1), &dvector![3.0]);
        let z = y.replace_block(0, x.block(0).clone()).unwrap();
        assert_eq!(z, x);
    }

    #[test]
    fn flatten_splits_back() {
        let x = BlockVector::new(vec![dvector![1.0], dvector![2.0, 3.0]]).unwrap();
        let flat = x.flatten();
        let back = BlockVector::from_flat(&[1, 2], &flat).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(BlockVector::new(vec![dvector![f64::NAN]]).is_err());
    }

    #[test]
    fn rejects_bad_block_length() {
        let x = BlockVector::new(vec![dvector![1.0, 2.0]]).unwrap();
        assert!(x.replace_block(0, dvector![1.0]).is_err());
    }
}
