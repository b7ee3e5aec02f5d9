//! Brute-force Monte-Carlo IoU, independent of the polygon-clipping path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::boxes::Box3D;
use super::polygon::bev_corners;
use crate::error::{Error, Result};

pub const MIN_MC_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub iou: f64,
    /// Binomial standard error of `iou` given the number of union hits. The
    /// proportion is clamped to `[1/(2n), 1 - 1/(2n)]` so that a run with no
    /// or all hits still reports a nonzero resolution.
    pub std_error: f64,
    pub union_hits: u64,
    pub samples: usize,
}

fn contains(b: &Box3D, sin: f64, cos: f64, p: [f64; 3]) -> bool {
    let (dx, dy) = (p[0] - b.x, p[1] - b.y);
    let u = cos * dx + sin * dy;
    let v = -sin * dx + cos * dy;
    u.abs() <= 0.5 * b.l && v.abs() <= 0.5 * b.w && (p[2] - b.z).abs() <= 0.5 * b.h
}

/// Estimates IoU by sampling points uniformly in the axis-aligned region
/// enclosing both boxes and counting membership.
pub fn mc_iou_oracle(b1: &Box3D, b2: &Box3D, n_samples: usize, seed: u64) -> Result<McEstimate> {
    if n_samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "Monte-Carlo oracle needs at least {MIN_MC_SAMPLES} samples, got {n_samples}"
        )));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for b in [b1, b2] {
        for p in bev_corners(b) {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        lo[2] = lo[2].min(b.z - 0.5 * b.h);
        hi[2] = hi[2].max(b.z + 0.5 * b.h);
    }

    let (s1, c1) = b1.theta.sin_cos();
    let (s2, c2) = b2.theta.sin_cos();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut both, mut either) = (0u64, 0u64);
    for _ in 0..n_samples {
        let p = [
            rng.random_range(lo[0]..=hi[0]),
            rng.random_range(lo[1]..=hi[1]),
            rng.random_range(lo[2]..=hi[2]),
        ];
        let in1 = contains(b1, s1, c1, p);
        let in2 = contains(b2, s2, c2, p);
        both += u64::from(in1 && in2);
        either += u64::from(in1 || in2);
    }

    let iou = if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    };
    let n = either.max(1) as f64;
    let floor = 0.5 / n;
    let q = iou.clamp(floor, 1.0 - floor);
    Ok(McEstimate {
        iou,
        std_error: (q * (1.0 - q) / n).sqrt(),
        union_hits: either,
        samples: n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_boxes_within_three_sigma_of_one() {
        let b = Box3D::new(0.0, 0.0, 0.0, 4.0, 2.0, 1.5, 0.6).unwrap();
        let est = mc_iou_oracle(&b, &b, 20_000, 1).unwrap();
        assert!((est.iou - 1.0).abs() <= 3.0 * est.std_error);
    }

    #[test]
    fn disjoint_boxes_are_exactly_zero() {
        let a = Box3D::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.3).unwrap();
        let b = Box3D::new(5.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.3).unwrap();
        assert_eq!(mc_iou_oracle(&a, &b, 20_000, 2).unwrap().iou, 0.0);
    }

    #[test]
    fn rejects_small_sample_counts() {
        let a = Box3D::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!(mc_iou_oracle(&a, &a, 100, 0).is_err());
    }

    #[test]
    fn seeded_runs_repeat() {
        let a = Box3D::new(0.0, 0.0, 0.0, 2.0, 1.0, 1.0, 0.0).unwrap();
        let b = Box3D::new(0.5, 0.2, 0.1, 2.0, 1.0, 1.0, 0.7).unwrap();
        assert_eq!(
            mc_iou_oracle(&a, &b, 10_000, 9).unwrap(),
            mc_iou_oracle(&a, &b, 10_000, 9).unwrap()
        );
    }
}
