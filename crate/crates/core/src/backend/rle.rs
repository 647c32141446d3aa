//! Run-length coding of binary masks over their row-major (C order)
//! flattening. Runs alternate background/foreground, starting with
//! background (which may be a zero-length run).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::{Mask2D, Mask3D};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RleError {
    #[error("runs sum to {sum}, expected {expected} for shape {shape:?}")]
    BadRunLength {
        sum: u128,
        expected: u128,
        shape: Vec<usize>,
    },
    #[error("shape {shape:?} is not a valid {dims}D mask shape")]
    BadShape { shape: Vec<usize>, dims: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RleMask {
    pub shape: Vec<usize>,
    pub runs: Vec<u64>,
}

pub fn encode_bits(shape: Vec<usize>, bits: impl IntoIterator<Item = bool>) -> RleMask {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0u64;
    for b in bits {
        if b != current {
            runs.push(len);
            current = b;
            len = 0;
        }
        len += 1;
    }
    runs.push(len);
    RleMask { shape, runs }
}

impl RleMask {
    pub fn from_mask2d(mask: &Mask2D) -> Self {
        encode_bits(mask.shape().to_vec(), mask.bits().iter().copied())
    }

    pub fn from_mask3d(mask: &Mask3D) -> Self {
        encode_bits(mask.shape().to_vec(), mask.to_c_order())
    }

    fn expected_len(&self) -> u128 {
        self.shape.iter().map(|&n| n as u128).product()
    }

    /// Expand to flat bits after checking the run sum against the shape.
    pub fn decode_bits(&self) -> Result<Vec<bool>, RleError> {
        let expected = self.expected_len();
        let sum = self.runs.iter().map(|&r| u128::from(r)).sum::<u128>();
        if sum != expected {
            return Err(RleError::BadRunLength {
                sum,
                expected,
                shape: self.shape.clone(),
            });
        }
        let mut bits = Vec::with_capacity(expected as usize);
        let mut value = false;
        for &r in &self.runs {
            bits.extend(std::iter::repeat_n(value, r as usize));
            value = !value;
        }
        Ok(bits)
    }

    pub fn to_mask2d(&self) -> Result<Mask2D, RleError> {
        if self.shape.len() != 2 || self.shape.contains(&0) {
            return Err(RleError::BadShape {
                shape: self.shape.clone(),
                dims: 2,
            });
        }
        Ok(Mask2D::from_bits(self.shape[0], self.shape[1], self.decode_bits()?))
    }

    pub fn to_mask3d(&self) -> Result<Mask3D, RleError> {
        if self.shape.len() != 3 || self.shape.contains(&0) {
            return Err(RleError::BadShape {
                shape: self.shape.clone(),
                dims: 3,
            });
        }
        let shape = [self.shape[0], self.shape[1], self.shape[2]];
        Ok(Mask3D::from_c_order(shape, &self.decode_bits()?))
    }
}
