//! Order-independent-of-thread-count summation.
//!
//! Every loss reduction in the crate goes through [`pairwise_sum`], which uses
//! a fixed binary reduction tree over the input order, so results are
//! bit-reproducible no matter how the terms were produced.

const LEAF: usize = 8;

/// Pairwise (cascade) summation with a fixed split point at `len / 2`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().fold(0.0, |acc, v| acc + v);
    }
    let (lo, hi) = values.split_at(values.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}
