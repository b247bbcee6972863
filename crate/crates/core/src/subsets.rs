//! Subsets of a small outcome space as bit masks.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest outcome space that may be enumerated exhaustively.
pub const MAX_OUTCOMES: usize = 20;

pub fn check_outcomes(k: usize) -> Result<()> {
    if k > MAX_OUTCOMES {
        Err(Error::TooManyOutcomes {
            outcomes: k,
            max: MAX_OUTCOMES,
        })
    } else {
        Ok(())
    }
}

/// Outcome indices in `mask`, ascending.
pub fn members(mask: u32) -> Vec<usize> {
    (0..32).filter(|&i| mask & (1 << i) != 0).collect()
}

pub fn from_members(members: &[usize]) -> u32 {
    members.iter().fold(0, |m, &i| m | (1 << i))
}

/// Sum of `values` over `mask`, always accumulated in ascending index order
/// so the result depends only on the set.
#[inline]
pub fn mask_sum(mask: u32, values: &[f64]) -> f64 {
    let mut m = mask;
    let mut s = 0.0;
    while m != 0 {
        let i = m.trailing_zeros() as usize;
        s += values[i];
        m &= m - 1;
    }
    s
}

/// All nonempty masks over `k` outcomes satisfying `keep`.
pub fn nonempty_masks<F>(k: usize, keep: F) -> Vec<u32>
where
    F: Fn(u32) -> bool + Sync,
{
    let full: u32 = if k == 32 { u32::MAX } else { (1u32 << k) - 1 };
    (1..=full).into_par_iter().filter(|&m| keep(m)).collect()
}

/// Index in `masks` minimizing `score`; ties go to the earliest entry.
pub fn argmin_by<F>(masks: &[u32], score: F) -> Option<(usize, f64)>
where
    F: Fn(u32) -> f64 + Sync,
{
    masks
        .par_iter()
        .enumerate()
        .map(|(i, &m)| (i, score(m)))
        .reduce_with(|a, b| {
            if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
                b
            } else {
                a
            }
        })
}
