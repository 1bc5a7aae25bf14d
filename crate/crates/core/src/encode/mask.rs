//! Graph-guided attention mask.
//!
//! Layout of an input of length `L = 1 + n_code + 1 + n_dfg`:
//! `[CLS] code... [SEP] dfg...`. Code slots (with CLS and SEP) all see each
//! other. A DFG slot sees its aligned code slot, CLS, SEP, itself and the DFG
//! slots it shares an edge with; the code slot sees it back.

use crate::scalar::Scalar;

use super::EncodeError;

/// Additive value standing in for −∞. Large enough that `exp` underflows to
/// exactly zero in both `f32` and `f64`, small enough to stay finite.
pub const MASKED: f64 = -1e9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionMask {
    len: usize,
    allowed: Vec<bool>,
}

impl AttentionMask {
    /// Everything attends to everything.
    pub fn open(len: usize) -> Self {
        AttentionMask {
            len,
            allowed: vec![true; len * len],
        }
    }

    /// Only the diagonal is open.
    pub fn diagonal(len: usize) -> Self {
        let mut m = AttentionMask {
            len,
            allowed: vec![false; len * len],
        };
        for i in 0..len {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_allowed(len: usize, allowed: Vec<bool>) -> Self {
        assert_eq!(allowed.len(), len * len);
        AttentionMask { len, allowed }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn allowed(&self, i: usize, j: usize) -> bool {
        self.allowed[i * self.len + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.allowed[i * self.len + j] = v;
    }

    /// Entry of the additive mask: 0 where attention is allowed, −∞ (as
    /// [`MASKED`]) elsewhere.
    pub fn value<T: Scalar>(&self, i: usize, j: usize) -> T {
        if self.allowed(i, j) {
            T::zero()
        } else {
            T::from_f64(MASKED).unwrap()
        }
    }

    /// Row-major additive mask.
    pub fn additive<T: Scalar>(&self) -> Vec<T> {
        let neg = T::from_f64(MASKED).unwrap();
        self.allowed
            .iter()
            .map(|&a| if a { T::zero() } else { neg })
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.len).all(|i| (0..i).all(|j| self.allowed(i, j) == self.allowed(j, i)))
    }
}

/// Builds the mask for `n_code` code tokens and DFG nodes aligned to 0-based
/// code-token indices, with undirected DFG edges given as node-index pairs.
pub fn build_attention_mask(
    n_code: usize,
    dfg_alignment: &[usize],
    edges: &[(usize, usize)],
) -> Result<AttentionMask, EncodeError> {
    let n_dfg = dfg_alignment.len();
    let sep = n_code + 1;
    let dfg0 = n_code + 2;
    let len = dfg0 + n_dfg;
    let mut m = AttentionMask {
        len,
        allowed: vec![false; len * len],
    };
    for i in 0..dfg0 {
        for j in 0..dfg0 {
            m.set(i, j, true);
        }
    }
    for (k, &align) in dfg_alignment.iter().enumerate() {
        if align >= n_code {
            return Err(EncodeError::AlignmentOutOfRange {
                node: k,
                index: align,
                n_code,
            });
        }
        let d = dfg0 + k;
        for special in [0, sep, 1 + align, d] {
            m.set(d, special, true);
            m.set(special, d, true);
        }
    }
    for &(a, b) in edges {
        if a >= n_dfg || b >= n_dfg {
            return Err(EncodeError::EdgeOutOfRange {
                edge: (a, b),
                n_dfg,
            });
        }
        m.set(dfg0 + a, dfg0 + b, true);
        m.set(dfg0 + b, dfg0 + a, true);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_dfg_is_all_open() {
        let m = build_attention_mask(2, &[], &[]).unwrap();
        assert_eq!(m.len(), 4);
        assert!(m.additive::<f64>().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_node_row() {
        // n_code = 2: slots CLS(0) c0(1) c1(2) SEP(3) d0(4); node aligned to code token 1
        let m = build_attention_mask(2, &[1], &[]).unwrap();
        let row: Vec<usize> = (0..5).filter(|&j| m.allowed(4, j)).collect();
        assert_eq!(row, [0, 2, 3, 4]);
        assert!(m.is_symmetric());
    }

    #[test]
    fn bad_alignment() {
        assert!(build_attention_mask(2, &[2], &[]).is_err());
        assert!(build_attention_mask(2, &[0], &[(0, 1)]).is_err());
    }
}
