//! Analytic gradients of the RWIoU loss and the center-distance penalty
//! with respect to the 8-channel predicted box.
//!
//! Conventions at non-smooth points:
//! - per-axis `min` ties resolve to the partial-overlap branch and
//!   `sign(0) = 0`, so a prediction equal to its target has zero location
//!   and size gradient;
//! - `|s_p - s_t|` at equality uses its right derivative (+1), so the `s`
//!   and `c` components there have magnitude `α` with the `s_p > s_t` sign;
//! - zero intersection (including exactly touching faces) gives an all-zero
//!   gradient, since the loss is locally constant at 1;
//! - a clamped rotation factor (channel residual beyond `2/α`) has zero
//!   derivative.

mod audit;
mod fd;

use std::ops::{Add, AddAssign, Mul};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{axis_overlap, axis_span, clamped_weight, Alpha, BoxParams8};

pub use audit::{
    away_from_breakpoints, fd_relative_error, finite_difference_audit, gradient_bound_audit,
    sample_smooth_pair, AuditReport, RegimeReport, Violation, BOUND_SLACK, BREAKPOINT_MARGIN,
    FD_ABS_FLOOR, FD_REL_TOL, MIN_AUDIT_SAMPLES,
};
pub use fd::{central_difference, relative_step, FD_REL_STEP};

/// Partial derivatives of a scalar loss with respect to each [`BoxParams8`]
/// channel of the prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Grad8 {
    pub d_x: f64,
    pub d_y: f64,
    pub d_z: f64,
    pub d_l: f64,
    pub d_w: f64,
    pub d_h: f64,
    pub d_s: f64,
    pub d_c: f64,
}

impl Grad8 {
    pub const ZERO: Grad8 = Grad8 {
        d_x: 0.0,
        d_y: 0.0,
        d_z: 0.0,
        d_l: 0.0,
        d_w: 0.0,
        d_h: 0.0,
        d_s: 0.0,
        d_c: 0.0,
    };

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.d_x, self.d_y, self.d_z, self.d_l, self.d_w, self.d_h, self.d_s, self.d_c,
        ]
    }

    pub fn from_array(v: [f64; 8]) -> Self {
        Self {
            d_x: v[0],
            d_y: v[1],
            d_z: v[2],
            d_l: v[3],
            d_w: v[4],
            d_h: v[5],
            d_s: v[6],
            d_c: v[7],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.to_array().iter().all(|v| *v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Add for Grad8 {
    type Output = Grad8;

    fn add(self, rhs: Grad8) -> Grad8 {
        let (a, b) = (self.to_array(), rhs.to_array());
        Grad8::from_array(std::array::from_fn(|i| a[i] + b[i]))
    }
}

impl AddAssign for Grad8 {
    fn add_assign(&mut self, rhs: Grad8) {
        *self = *self + rhs;
    }
}

impl Mul<f64> for Grad8 {
    type Output = Grad8;

    fn mul(self, k: f64) -> Grad8 {
        Grad8::from_array(self.to_array().map(|v| v * k))
    }
}

fn right_sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `1 - RWIoU(target, pred)` and its gradient with respect to `pred`.
///
/// No validation; callers guarantee positive finite sizes.
pub(crate) fn rwiou_loss_and_grad(p: &BoxParams8, t: &BoxParams8, alpha: Alpha) -> (f64, Grad8) {
    let (pc, pe, tc, te) = (p.center(), p.extents(), t.center(), t.extents());
    let axes: [_; 3] = std::array::from_fn(|k| axis_overlap(pc[k], pe[k], tc[k], te[k]));
    let inter = axes[0].value * axes[1].value * axes[2].value;
    if inter == 0.0 {
        return (1.0, Grad8::ZERO);
    }

    let a = alpha.get();
    let (ds, dc) = (p.s - t.s, p.c - t.c);
    let (w_s, clamp_s) = clamped_weight(ds, a);
    let (w_c, clamp_c) = clamped_weight(dc, a);
    let omega = w_s * w_c;

    let vp = p.l * p.w * p.h;
    let vt = t.l * t.w * t.h;
    let weighted = omega * inter;
    let union = vp + vt - weighted;
    let ratio = weighted / union;

    // dR = (dVw (U + Vw) - Vw dVp) / U², with dVw = ω dI for geometry.
    let inv_u2 = 1.0 / (union * union);
    let k_w = (union + weighted) * inv_u2;
    let k_p = weighted * inv_u2;

    let mut g = [0.0; 8];
    for k in 0..3 {
        let others: f64 = (0..3).filter(|&j| j != k).map(|j| axes[j].value).product();
        let d_inter_center = axes[k].d_center * others;
        let d_inter_extent = axes[k].d_extent * others;
        let d_vp_extent: f64 = (0..3).filter(|&j| j != k).map(|j| pe[j]).product();
        g[k] = -(omega * d_inter_center * k_w);
        g[3 + k] = -(omega * d_inter_extent * k_w - d_vp_extent * k_p);
    }
    let d_ws = if clamp_s {
        0.0
    } else {
        -0.5 * a * right_sign(ds)
    };
    let d_wc = if clamp_c {
        0.0
    } else {
        -0.5 * a * right_sign(dc)
    };
    g[6] = -(d_ws * w_c * inter * k_w);
    g[7] = -(d_wc * w_s * inter * k_w);

    (1.0 - ratio, Grad8::from_array(g))
}

/// `(D / Diag)²` between pred and target, with its gradient in `pred`.
pub(crate) fn center_term_and_grad(p: &BoxParams8, t: &BoxParams8) -> (f64, Grad8) {
    let (pc, pe, tc, te) = (p.center(), p.extents(), t.center(), t.extents());
    let spans: [_; 3] = std::array::from_fn(|k| axis_span(pc[k], pe[k], tc[k], te[k]));
    let offsets: [f64; 3] = std::array::from_fn(|k| pc[k] - tc[k]);
    let dist2: f64 = offsets.iter().map(|d| d * d).sum();
    let diag2: f64 = spans.iter().map(|s| s.value * s.value).sum();
    let term = dist2 / diag2;

    let mut g = [0.0; 8];
    for k in 0..3 {
        let d_diag2_center = 2.0 * spans[k].value * spans[k].d_center;
        let d_diag2_extent = 2.0 * spans[k].value * spans[k].d_extent;
        g[k] = (2.0 * offsets[k] - term * d_diag2_center) / diag2;
        g[3 + k] = -term * d_diag2_extent / diag2;
    }
    (term, Grad8::from_array(g))
}

/// Per-sample regression loss `1 - RWIoU + (D / Diag)²` and its gradient.
pub(crate) fn regression_loss_and_grad(
    p: &BoxParams8,
    t: &BoxParams8,
    alpha: Alpha,
) -> (f64, Grad8) {
    let (l1, g1) = rwiou_loss_and_grad(p, t, alpha);
    let (l2, g2) = center_term_and_grad(p, t);
    (l1 + l2, g1 + g2)
}

fn check(p: &BoxParams8, t: &BoxParams8) -> Result<()> {
    p.validate()?;
    t.validate()
}

/// `1 - RWIoU(target, pred)`; the rotation factors act on the raw `s`/`c`
/// channel residuals and are clamped to `[0, 1]`.
pub fn rwiou_loss(pred: &BoxParams8, target: &BoxParams8, alpha: Alpha) -> Result<f64> {
    check(pred, target)?;
    Ok(rwiou_loss_and_grad(pred, target, alpha).0)
}

/// Analytic gradient of [`rwiou_loss`] with respect to `pred`.
pub fn rwiou_loss_grad(pred: &BoxParams8, target: &BoxParams8, alpha: Alpha) -> Result<Grad8> {
    check(pred, target)?;
    Ok(rwiou_loss_and_grad(pred, target, alpha).1)
}

/// Gradient of the center-distance penalty with respect to `pred`.
pub fn center_distance_grad(pred: &BoxParams8, target: &BoxParams8) -> Result<Grad8> {
    check(pred, target)?;
    Ok(center_term_and_grad(pred, target).1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Box3D;
    use std::f64::consts::FRAC_PI_2;

    fn params(v: [f64; 7]) -> BoxParams8 {
        Box3D::from_array(v).unwrap().to_params()
    }

    #[test]
    fn loss_examples() {
        let a = Alpha::DEFAULT;
        let t = params([0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0]);
        assert_eq!(rwiou_loss(&t, &t, a).unwrap(), 0.0);
        let far = params([10.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0]);
        assert_eq!(rwiou_loss(&far, &t, a).unwrap(), 1.0);
        let turned = params([0.0, 0.0, 0.0, 2.0, 2.0, 2.0, FRAC_PI_2]);
        let l = rwiou_loss(&turned, &t, a).unwrap();
        assert!((l - (1.0 - 4.5 / 11.5)).abs() < 1e-15);
        assert!((l - 0.60870).abs() < 1e-5);
    }

    #[test]
    fn loss_rejects_non_positive_sizes() {
        let t = params([0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0]);
        let bad = BoxParams8 { w: 0.0, ..t };
        assert!(rwiou_loss(&bad, &t, Alpha::DEFAULT).is_err());
        assert!(rwiou_loss_grad(&t, &bad, Alpha::DEFAULT).is_err());
    }

    #[test]
    fn converged_point_has_only_sin_cos_components() {
        for a in [0.25, 0.5, 1.0] {
            let alpha = Alpha::new(a).unwrap();
            let t = params([1.0, -2.0, 0.5, 4.2, 1.9, 1.6, 0.8]);
            let g = rwiou_loss_grad(&t, &t, alpha).unwrap();
            assert_eq!([g.d_x, g.d_y, g.d_z, g.d_l, g.d_w, g.d_h], [0.0; 6]);
            assert!((g.d_s - a).abs() < 1e-15);
            assert!((g.d_c - a).abs() < 1e-15);
        }
    }

    #[test]
    fn converged_point_matches_one_sided_differences() {
        let alpha = Alpha::DEFAULT;
        let t = params([0.0, 0.0, 0.0, 2.0, 1.0, 1.5, 0.3]);
        let h = 1e-7;
        let up = BoxParams8 { s: t.s + h, ..t };
        let fd = (rwiou_loss(&up, &t, alpha).unwrap() - 0.0) / h;
        let g = rwiou_loss_grad(&t, &t, alpha).unwrap();
        assert!((fd - g.d_s).abs() < 1e-6, "{fd} vs {}", g.d_s);
    }

    #[test]
    fn disjoint_gradient_is_zero() {
        let t = params([0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0]);
        let p = params([5.0, 1.0, 0.0, 2.0, 2.0, 2.0, 1.0]);
        assert!(rwiou_loss_grad(&p, &t, Alpha::DEFAULT).unwrap().is_zero());
        let touching = params([2.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0]);
        assert!(rwiou_loss_grad(&touching, &t, Alpha::DEFAULT).unwrap().is_zero());
    }

    #[test]
    fn sin_gradient_sign_follows_residual() {
        let t = params([0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.3]);
        let above = BoxParams8 { s: t.s + 0.2, ..t };
        let below = BoxParams8 { s: t.s - 0.2, ..t };
        assert!(rwiou_loss_grad(&above, &t, Alpha::DEFAULT).unwrap().d_s > 0.0);
        assert!(rwiou_loss_grad(&below, &t, Alpha::DEFAULT).unwrap().d_s < 0.0);
    }

    #[test]
    fn sin_gradient_closed_form() {
        // (α/2) ω_c (R + 1) V_inter / V_union for s_p > s_t
        let a = 0.5;
        let t = params([0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.3]);
        let p = BoxParams8 {
            x: 0.4,
            s: t.s + 0.3,
            c: t.c - 0.1,
            ..t
        };
        let g = rwiou_loss_grad(&p, &t, Alpha::new(a).unwrap()).unwrap();
        let inter = 1.6 * 2.0 * 2.0;
        let w_s = 1.0 - a * 0.3 / 2.0;
        let w_c = 1.0 - a * 0.1 / 2.0;
        let weighted = w_s * w_c * inter;
        let union = 16.0 - weighted;
        let r = weighted / union;
        let expected = 0.5 * a * w_c * (r + 1.0) * inter / union;
        assert!((g.d_s - expected).abs() < 1e-14);
    }

    #[test]
    fn clamped_channel_has_zero_derivative() {
        let t = params([0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0]);
        let p = BoxParams8 { s: 5.0, ..t };
        let g = rwiou_loss_grad(&p, &t, Alpha::new(1.0).unwrap()).unwrap();
        assert_eq!(g.d_s, 0.0);
        // ω = 0 ⇒ RWIoU = 0 but intersection is positive
        assert_eq!(rwiou_loss(&p, &t, Alpha::new(1.0).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn center_term_gradient_points_back_to_target() {
        let t = params([0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0]);
        let p = BoxParams8 { x: 0.7, y: -0.3, ..t };
        let g = center_distance_grad(&p, &t).unwrap();
        assert!(g.d_x > 0.0 && g.d_y < 0.0);
        assert!(center_distance_grad(&t, &t).unwrap().is_zero());
    }
}
