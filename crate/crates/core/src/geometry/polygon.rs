//! Exact IoU of yaw-rotated boxes.
//!
//! With yaw as the only rotation, the intersection of two boxes is a prism:
//! the BEV rectangles' convex intersection polygon times the overlap of the
//! vertical extents.

use super::aabb::{axis_overlap, volume};
use super::boxes::{Box3D, BoxParams8, IoUScalar};

/// Orientation tolerance for clipping; points this close to a clip edge are
/// treated as inside.
const CROSS_EPS: f64 = 1e-12;

type Point = [f64; 2];

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// BEV footprint corners in counter-clockwise order.
pub fn bev_corners(b: &Box3D) -> [Point; 4] {
    let (s, c) = b.theta.sin_cos();
    let (hl, hw) = (0.5 * b.l, 0.5 * b.w);
    [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)]
        .map(|(u, v)| [b.x + c * u - s * v, b.y + s * u + c * v])
}

/// Shoelace area (positive for counter-clockwise input).
pub fn convex_polygon_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (i, p) in poly.iter().enumerate() {
        let q = poly[(i + 1) % poly.len()];
        acc += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * acc
}

/// Sutherland-Hodgman clipping of a polygon by a convex counter-clockwise one.
fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut output = subject.to_vec();
    let mut input = Vec::with_capacity(8);
    for (i, &a) in clip.iter().enumerate() {
        let b = clip[(i + 1) % clip.len()];
        std::mem::swap(&mut input, &mut output);
        output.clear();
        if input.is_empty() {
            break;
        }
        for (j, &p) in input.iter().enumerate() {
            let q = input[(j + 1) % input.len()];
            let cp = cross(a, b, p);
            let cq = cross(a, b, q);
            let p_in = cp >= -CROSS_EPS;
            let q_in = cq >= -CROSS_EPS;
            if p_in {
                output.push(p);
            }
            if p_in != q_in {
                let t = cp / (cp - cq);
                if t.is_finite() {
                    output.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
                }
            }
        }
    }
    output
}

/// Area of the intersection of the two BEV footprints.
pub fn bev_intersection_area(b1: &Box3D, b2: &Box3D) -> f64 {
    // cheap reject on circumscribed circles
    let (dx, dy) = (b1.x - b2.x, b1.y - b2.y);
    let reach = 0.5 * (b1.l.hypot(b1.w) + b2.l.hypot(b2.w));
    if dx * dx + dy * dy >= reach * reach {
        return 0.0;
    }
    let poly = clip_convex(&bev_corners(b1), &bev_corners(b2));
    convex_polygon_area(&poly).max(0.0)
}

/// Exact 3D IoU of two yaw-rotated boxes.
pub fn rotated_iou_exact(b1: &Box3D, b2: &Box3D) -> IoUScalar {
    if b1 == b2 {
        return IoUScalar::ONE;
    }
    let dz = axis_overlap(b1.z, b1.h, b2.z, b2.h).value;
    if dz == 0.0 {
        return IoUScalar::ZERO;
    }
    let inter = bev_intersection_area(b1, b2) * dz;
    if inter == 0.0 {
        return IoUScalar::ZERO;
    }
    IoUScalar::from_ratio(inter / (volume(b1) + volume(b2) - inter))
}

/// Exact IoU of a predicted parameter vector against an object. A
/// prediction equal to the object's own encoding counts as a perfect match,
/// which the round trip through `atan2` would otherwise miss by an ulp.
pub fn rotated_iou_pred(pred: &BoxParams8, gt: &Box3D) -> IoUScalar {
    if *pred == gt.to_params() {
        return IoUScalar::ONE;
    }
    rotated_iou_exact(&pred.to_box(), gt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{aabb_iou, bev_corners};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn bx(x: f64, y: f64, z: f64, l: f64, w: f64, h: f64, t: f64) -> Box3D {
        Box3D::new(x, y, z, l, w, h, t).unwrap()
    }

    #[test]
    fn corners_are_ccw_with_full_area() {
        let b = bx(1.0, -2.0, 0.0, 4.0, 2.0, 1.0, 0.9);
        let area = convex_polygon_area(&bev_corners(&b));
        assert!((area - 8.0).abs() < 1e-12);
    }

    #[test]
    fn octagon_closed_form() {
        let a = bx(0.0, 0.0, 0.0, 2.0, 2.0, 1.0, 0.0);
        let b = a.with_theta(FRAC_PI_4);
        let octagon = 8.0 * (SQRT_2 - 1.0);
        assert!((bev_intersection_area(&a, &b) - octagon).abs() < 1e-12);
        let expected = octagon / (8.0 - octagon);
        assert!((rotated_iou_exact(&a, &b).value() - expected).abs() < 1e-9);
        assert!((expected - 1.0 / SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn identical_and_disjoint() {
        let a = bx(0.3, 0.1, 0.2, 3.0, 1.0, 1.5, 0.4);
        assert_eq!(rotated_iou_exact(&a, &a).value(), 1.0);
        let far = bx(30.0, 0.0, 0.0, 3.0, 1.0, 1.5, 0.4);
        assert_eq!(rotated_iou_exact(&a, &far).value(), 0.0);
        let above = bx(0.3, 0.1, 5.0, 3.0, 1.0, 1.5, 0.4);
        assert_eq!(rotated_iou_exact(&a, &above).value(), 0.0);
    }

    #[test]
    fn quarter_turn_of_square_is_full_overlap() {
        let a = bx(0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0);
        let b = a.with_theta(FRAC_PI_2);
        assert!((rotated_iou_exact(&a, &b).value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn axis_aligned_reduces_to_aabb() {
        let a = bx(0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0);
        let b = bx(1.0, 0.5, -0.3, 2.0, 3.0, 1.0, 0.0);
        let exact = rotated_iou_exact(&a, &b).value();
        assert!((exact - aabb_iou(&a, &b).value()).abs() < 1e-12);
    }

    #[test]
    fn rigid_rotation_invariance() {
        let a = bx(0.0, 0.0, 0.0, 4.0, 2.0, 1.5, 0.2);
        let b = bx(1.0, 0.7, 0.1, 3.5, 1.8, 1.5, 0.9);
        let base = rotated_iou_exact(&a, &b).value();
        for k in 1..12 {
            let phi = k as f64 * 0.53;
            let (s, c) = phi.sin_cos();
            let rot = |bb: &Box3D| Box3D {
                x: c * bb.x - s * bb.y,
                y: s * bb.x + c * bb.y,
                theta: bb.theta + phi,
                ..*bb
            };
            let v = rotated_iou_exact(&rot(&a), &rot(&b)).value();
            assert!((v - base).abs() < 1e-9, "phi={phi}: {v} vs {base}");
        }
    }

    #[test]
    fn shared_edge_is_zero_area() {
        let a = bx(0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0);
        let b = bx(2.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0);
        assert!(bev_intersection_area(&a, &b).abs() < 1e-12);
    }
}
