use serde::{Deserialize, Serialize};

use crate::assembly::JumpOperators;
use crate::{Error, Result};

/// Split `n` items into `parts` contiguous blocks, the first `n % parts`
/// blocks one larger.
pub fn contiguous_blocks(n: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let base = n / parts;
    let extra = n % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for i in 0..parts {
        let len = base + usize::from(i < extra);
        out.push(start..start + len);
        start += len;
    }
    out
}

/// Static layout of the simulated distributed machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerGroup {
    pub workers: usize,
    /// `owner[k]`: worker holding patch `k`.
    pub owner: Vec<usize>,
    pub patches_of: Vec<Vec<usize>>,
    /// Workers holding a copy of the coarse factorization, ascending.
    pub holders: Vec<usize>,
    /// `master[q]`: the holder worker `q` is attached to.
    pub master: Vec<usize>,
    /// Workers whose patches share a multiplier with the worker's patches.
    pub neighbors: Vec<Vec<usize>>,
}

impl WorkerGroup {
    /// Contiguous patch blocks over `workers`; `holders` contiguous groups of
    /// workers, each led by its first worker.
    pub fn new(num_patches: usize, workers: usize, holders: usize) -> Result<Self> {
        if workers < 1 {
            return Err(Error::Config("at least one worker is required".into()));
        }
        if holders < 1 || holders > workers {
            return Err(Error::Config(format!("holder count must lie in 1..={workers}, got {holders}")));
        }
        let mut owner = vec![0; num_patches];
        let mut patches_of = vec![Vec::new(); workers];
        for (q, r) in contiguous_blocks(num_patches, workers).into_iter().enumerate() {
            for k in r {
                owner[k] = q;
                patches_of[q].push(k);
            }
        }
        let mut master = vec![0; workers];
        let mut hs = Vec::with_capacity(holders);
        for r in contiguous_blocks(workers, holders) {
            hs.push(r.start);
            for q in r.clone() {
                master[q] = r.start;
            }
        }
        Ok(Self { workers, owner, patches_of, holders: hs, master, neighbors: vec![Vec::new(); workers] })
    }

    /// Fills the neighbour table from the multiplier couplings.
    pub fn with_neighbors(mut self, jumps: &JumpOperators) -> Self {
        let mut nb = vec![std::collections::BTreeSet::new(); self.workers];
        for pats in &jumps.row_patches {
            for &a in pats {
                for &b in pats {
                    let (qa, qb) = (self.owner[a], self.owner[b]);
                    if qa != qb {
                        nb[qa].insert(qb);
                    }
                }
            }
        }
        self.neighbors = nb.into_iter().map(|s| s.into_iter().collect()).collect();
        self
    }

    pub fn is_holder(&self, q: usize) -> bool {
        self.master[q] == q
    }

    /// Workers attached to holder `h` (including `h`).
    pub fn group_of(&self, h: usize) -> Vec<usize> {
        (0..self.workers).filter(|&q| self.master[q] == h).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_rule() {
        let g = WorkerGroup::new(4, 3, 1).unwrap();
        let sizes: Vec<usize> = g.patches_of.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 1, 1]);
        let g = WorkerGroup::new(4, 4, 4).unwrap();
        assert!(g.patches_of.iter().all(|p| p.len() == 1));
        assert_eq!(g.holders, vec![0, 1, 2, 3]);
        let g = WorkerGroup::new(4, 1, 1).unwrap();
        assert_eq!(g.patches_of[0], vec![0, 1, 2, 3]);
    }

    #[test]
    fn holder_groups() {
        let g = WorkerGroup::new(16, 8, 2).unwrap();
        assert_eq!(g.holders, vec![0, 4]);
        assert_eq!(g.master, vec![0, 0, 0, 0, 4, 4, 4, 4]);
        assert_eq!(g.group_of(4), vec![4, 5, 6, 7]);
        assert!(WorkerGroup::new(4, 0, 1).is_err());
        assert!(WorkerGroup::new(4, 2, 3).is_err());
    }
}
