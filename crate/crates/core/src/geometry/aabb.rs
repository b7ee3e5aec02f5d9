//! Axis-aligned overlap terms and the rotation-weighted IoU.
//!
//! Per axis, the overlap of two centered intervals is written as
//! `max(min(e1, e2, (e1 + e2)/2 - |c1 - c2|), 0)`, which equals the
//! `min(upper) - max(lower)` form but is exact when the intervals coincide,
//! so `rwiou(b, b) == 1.0` holds without rounding slop.

use super::boxes::{Alpha, Box3D, BoxParams8, IoUScalar};

/// Value of a per-axis term together with its partial derivatives with
/// respect to the first box's center coordinate and extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct AxisTerm {
    pub value: f64,
    pub d_center: f64,
    pub d_extent: f64,
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Overlap length along one axis. Ties between the `min` branches resolve to
/// the partial-overlap branch, and `sign(0) = 0`, so identical intervals have
/// zero derivative in both center and extent.
pub(crate) fn axis_overlap(c1: f64, e1: f64, c2: f64, e2: f64) -> AxisTerm {
    let d = c1 - c2;
    let partial = 0.5 * (e1 + e2) - d.abs();
    let (value, d_center, d_extent) = if partial <= e1.min(e2) {
        (partial, -sign0(d), 0.5)
    } else if e1 < e2 {
        (e1, 0.0, 1.0)
    } else {
        (e2, 0.0, 0.0)
    };
    if value <= 0.0 {
        AxisTerm {
            value: 0.0,
            d_center: 0.0,
            d_extent: 0.0,
        }
    } else {
        AxisTerm {
            value,
            d_center,
            d_extent,
        }
    }
}

/// Length of the smallest interval containing both intervals, with the same
/// tie convention as [`axis_overlap`].
pub(crate) fn axis_span(c1: f64, e1: f64, c2: f64, e2: f64) -> AxisTerm {
    let d = c1 - c2;
    let partial = 0.5 * (e1 + e2) + d.abs();
    if partial >= e1.max(e2) {
        AxisTerm {
            value: partial,
            d_center: sign0(d),
            d_extent: 0.5,
        }
    } else if e1 > e2 {
        AxisTerm {
            value: e1,
            d_center: 0.0,
            d_extent: 1.0,
        }
    } else {
        AxisTerm {
            value: e2,
            d_center: 0.0,
            d_extent: 0.0,
        }
    }
}

pub fn volume(b: &Box3D) -> f64 {
    b.l * b.w * b.h
}

/// Intersection volume of the two boxes treated as axis-aligned; yaw is
/// ignored entirely.
pub fn aabb_intersection_volume(b1: &Box3D, b2: &Box3D) -> f64 {
    overlap_volume(b1.center(), b1.extents(), b2.center(), b2.extents())
}

fn overlap_volume(c1: [f64; 3], e1: [f64; 3], c2: [f64; 3], e2: [f64; 3]) -> f64 {
    (0..3)
        .map(|k| axis_overlap(c1[k], e1[k], c2[k], e2[k]).value)
        .product()
}

/// Plain axis-aligned 3D IoU (yaw ignored).
pub fn aabb_iou(b1: &Box3D, b2: &Box3D) -> IoUScalar {
    let inter = aabb_intersection_volume(b1, b2);
    IoUScalar::from_ratio(inter / (volume(b1) + volume(b2) - inter))
}

/// `clamp(1 - alpha * |delta| / 2, 0, 1)` plus whether the lower clamp is
/// active. The clamp only engages for channel values outside `[-1, 1]`.
pub(crate) fn clamped_weight(delta: f64, alpha: f64) -> (f64, bool) {
    let raw = 1.0 - 0.5 * alpha * delta.abs();
    if raw < 0.0 {
        (0.0, true)
    } else {
        (raw.min(1.0), false)
    }
}

/// Rotation weight `ω = ω_s · ω_c` for two yaw angles.
pub fn rotation_weight(theta1: f64, theta2: f64, alpha: Alpha) -> f64 {
    let (s1, c1) = theta1.sin_cos();
    let (s2, c2) = theta2.sin_cos();
    channel_weight(s2 - s1, c2 - c1, alpha)
}

fn channel_weight(ds: f64, dc: f64, alpha: Alpha) -> f64 {
    clamped_weight(ds, alpha.get()).0 * clamped_weight(dc, alpha.get()).0
}

/// RWIoU on the 8-channel parameterization. Symmetric in its arguments.
pub fn rwiou_params(p: &BoxParams8, t: &BoxParams8, alpha: Alpha) -> IoUScalar {
    let inter = overlap_volume(p.center(), p.extents(), t.center(), t.extents());
    if inter == 0.0 {
        return IoUScalar::ZERO;
    }
    let weighted = channel_weight(p.s - t.s, p.c - t.c, alpha) * inter;
    let vp = p.l * p.w * p.h;
    let vt = t.l * t.w * t.h;
    IoUScalar::from_ratio(weighted / (vp + vt - weighted))
}

/// Rotation-weighted IoU of two boxes: the axis-aligned intersection scaled
/// by the rotation weight, over the correspondingly reduced union.
pub fn rwiou(b1: &Box3D, b2: &Box3D, alpha: Alpha) -> IoUScalar {
    rwiou_params(&b1.to_params(), &b2.to_params(), alpha)
}

/// `(D / Diag)²`: squared center distance over the squared diagonal of the
/// axis-aligned box enclosing both boxes. Always `< 1`.
pub fn center_distance_term(b1: &Box3D, b2: &Box3D) -> f64 {
    center_distance_parts(b1.center(), b1.extents(), b2.center(), b2.extents())
}

pub(crate) fn center_distance_parts(
    c1: [f64; 3],
    e1: [f64; 3],
    c2: [f64; 3],
    e2: [f64; 3],
) -> f64 {
    let mut dist2 = 0.0;
    let mut diag2 = 0.0;
    for k in 0..3 {
        let d = c1[k] - c2[k];
        dist2 += d * d;
        let span = axis_span(c1[k], e1[k], c2[k], e2[k]).value;
        diag2 += span * span;
    }
    dist2 / diag2
}
