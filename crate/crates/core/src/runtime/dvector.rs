use serde::{Deserialize, Serialize};

use crate::linalg::KrylovVector;

/// Storage convention of a vector over multipliers shared between patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Repr {
    /// Every copy of a shared entry holds the global value.
    Accumulated,
    /// The global value is the sum of the copies.
    Distributed,
}

/// The part of a multiplier vector held by one worker: one segment per owned
/// patch, aligned with that patch's row list.
#[derive(Debug, Clone, PartialEq)]
pub struct DVector {
    pub repr: Repr,
    pub segments: Vec<Vec<f64>>,
}

impl DVector {
    pub fn zeros(repr: Repr, lens: &[usize]) -> Self {
        Self { repr, segments: lens.iter().map(|&n| vec![0.0; n]).collect() }
    }

    pub fn new(repr: Repr, segments: Vec<Vec<f64>>) -> Self {
        Self { repr, segments }
    }

    /// Splits a global vector: accumulated copies every entry, distributed
    /// puts each entry on the first patch listed in `row_patches`.
    pub fn from_global(repr: Repr, global: &[f64], own: &[usize], patch_rows: &[Vec<usize>], row_patches: &[Vec<usize>]) -> Self {
        let segments = own
            .iter()
            .map(|&k| {
                patch_rows[k]
                    .iter()
                    .map(|&r| match repr {
                        Repr::Accumulated => global[r],
                        Repr::Distributed if row_patches[r][0] == k => global[r],
                        Repr::Distributed => 0.0,
                    })
                    .collect()
            })
            .collect();
        Self { repr, segments }
    }
}

impl KrylovVector for DVector {
    fn axpy(&mut self, a: f64, x: &Self) {
        debug_assert_eq!(self.repr, x.repr, "axpy mixes representations");
        for (s, xs) in self.segments.iter_mut().zip(&x.segments) {
            s.axpy(a, xs);
        }
    }

    fn xpby(&mut self, x: &Self, b: f64) {
        debug_assert_eq!(self.repr, x.repr, "xpby mixes representations");
        for (s, xs) in self.segments.iter_mut().zip(&x.segments) {
            s.xpby(xs, b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_keeps_the_global_sum() {
        let patch_rows = vec![vec![0, 1], vec![1, 2]];
        let row_patches = vec![vec![0], vec![0, 1], vec![1]];
        let g = [1.0, 2.0, 3.0];
        let d = DVector::from_global(Repr::Distributed, &g, &[0, 1], &patch_rows, &row_patches);
        assert_eq!(d.segments, vec![vec![1.0, 2.0], vec![0.0, 3.0]]);
        let a = DVector::from_global(Repr::Accumulated, &g, &[1], &patch_rows, &row_patches);
        assert_eq!(a.segments, vec![vec![2.0, 3.0]]);
    }
}
