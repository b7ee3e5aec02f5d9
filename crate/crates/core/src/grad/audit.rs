//! Randomized audits of the analytic gradient: agreement with finite
//! differences, and the magnitude bounds on the rotation, center and scale
//! components.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fd::central_difference;
use super::{regression_loss_and_grad, rwiou_loss_and_grad};
use crate::error::{Error, Result};
use crate::geometry::{Alpha, BoxParams8};

pub const FD_REL_TOL: f64 = 1e-5;
pub const FD_ABS_FLOOR: f64 = 1e-8;
/// Minimum distance of every branch/clamp argument from its switch point
/// for finite-difference samples.
pub const BREAKPOINT_MARGIN: f64 = 1e-4;
pub const BOUND_SLACK: f64 = 1e-9;
pub const MIN_AUDIT_SAMPLES: usize = 1000;
const MAX_LISTED_VIOLATIONS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: String,
    /// What `max_observed` measures, e.g. `|d_x| * l_t`.
    pub statistic: String,
    pub bound: f64,
    pub max_observed: f64,
    pub n_violations: usize,
    /// Report-only regimes never fail the audit.
    pub asserted: bool,
    pub samples: usize,
}

impl RegimeReport {
    pub fn passed(&self) -> bool {
        !self.asserted || self.n_violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub regime: String,
    pub sample: usize,
    pub value: f64,
    pub bound: f64,
    pub pred: BoxParams8,
    pub target: BoxParams8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub alpha: f64,
    pub seed: u64,
    pub passed: bool,
    pub regimes: Vec<RegimeReport>,
    /// First few violating samples across all asserted regimes.
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn regime(&self, name: &str) -> Option<&RegimeReport> {
        self.regimes.iter().find(|r| r.regime == name)
    }
}

fn sample_target(rng: &mut ChaCha8Rng) -> BoxParams8 {
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    BoxParams8 {
        x: rng.random_range(-5.0..5.0),
        y: rng.random_range(-5.0..5.0),
        z: rng.random_range(-2.0..2.0),
        l: rng.random_range(0.5..5.0),
        w: rng.random_range(0.5..5.0),
        h: rng.random_range(0.5..3.0),
        s: theta.sin(),
        c: theta.cos(),
    }
}

/// Prediction whose extents are within a factor `e^±0.5` of the target and
/// whose center offset on each axis is a random fraction (up to
/// `max_offset_frac`) of the distance at which the boxes separate. The
/// `s`/`c` channels are perturbed freely and may leave `[-1, 1]`.
fn sample_pred(rng: &mut ChaCha8Rng, t: &BoxParams8, max_offset_frac: f64) -> BoxParams8 {
    let (tc, te) = (t.center(), t.extents());
    let e: [f64; 3] = std::array::from_fn(|k| te[k] * rng.random_range(-0.5f64..0.5).exp());
    let c: [f64; 3] = std::array::from_fn(|k| {
        let reach = 0.5 * (e[k] + te[k]);
        tc[k] + rng.random_range(-max_offset_frac..max_offset_frac) * reach
    });
    BoxParams8 {
        x: c[0],
        y: c[1],
        z: c[2],
        l: e[0],
        w: e[1],
        h: e[2],
        s: t.s + rng.random_range(-0.8..0.8),
        c: t.c + rng.random_range(-0.8..0.8),
    }
}

/// True when every max/min/abs/clamp argument in the loss is at least
/// `margin` away from its switch point, so the loss is smooth in a
/// neighborhood of the pair.
pub fn away_from_breakpoints(p: &BoxParams8, t: &BoxParams8, alpha: Alpha, margin: f64) -> bool {
    let (pc, pe, tc, te) = (p.center(), p.extents(), t.center(), t.extents());
    for k in 0..3 {
        let d = (pc[k] - tc[k]).abs();
        let half_gap = 0.5 * (pe[k] - te[k]).abs();
        let overlap = 0.5 * (pe[k] + te[k]) - d;
        if d < margin
            || (pe[k] - te[k]).abs() < margin
            || (d - half_gap).abs() < margin
            || overlap.min(pe[k].min(te[k])) < margin
        {
            return false;
        }
    }
    let a = alpha.get();
    for delta in [p.s - t.s, p.c - t.c] {
        if delta.abs() < margin || (1.0 - 0.5 * a * delta.abs()).abs() < margin {
            return false;
        }
    }
    true
}

/// Random overlapping pair, resampled until it is away from breakpoints.
pub fn sample_smooth_pair(rng: &mut ChaCha8Rng, alpha: Alpha) -> (BoxParams8, BoxParams8) {
    loop {
        let t = sample_target(rng);
        let p = sample_pred(rng, &t, 0.95);
        if away_from_breakpoints(&p, &t, alpha, BREAKPOINT_MARGIN) {
            return (p, t);
        }
    }
}

/// Max relative error (floored at `FD_ABS_FLOOR / FD_REL_TOL` in the
/// denominator) between an analytic gradient and central differences.
pub fn fd_relative_error(analytic: &[f64; 8], numeric: &[f64; 8]) -> f64 {
    let floor = FD_ABS_FLOOR / FD_REL_TOL;
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / n.abs().max(floor))
        .fold(0.0, f64::max)
}

struct Tracker {
    report: RegimeReport,
    violations: Vec<Violation>,
}

impl Tracker {
    fn new(regime: &str, statistic: &str, bound: f64, asserted: bool) -> Self {
        Self {
            report: RegimeReport {
                regime: regime.to_string(),
                statistic: statistic.to_string(),
                bound,
                max_observed: 0.0,
                n_violations: 0,
                asserted,
                samples: 0,
            },
            violations: Vec::new(),
        }
    }

    fn observe(&mut self, sample: usize, value: f64, slack: f64, p: &BoxParams8, t: &BoxParams8) {
        let r = &mut self.report;
        r.samples += 1;
        r.max_observed = r.max_observed.max(value);
        if r.asserted && (value.is_nan() || value > r.bound + slack) {
            r.n_violations += 1;
            if self.violations.len() < MAX_LISTED_VIOLATIONS {
                self.violations.push(Violation {
                    regime: r.regime.clone(),
                    sample,
                    value,
                    bound: r.bound,
                    pred: *p,
                    target: *t,
                });
            }
        }
    }
}

/// Compares analytic gradients of both the RWIoU loss and the full
/// per-sample regression loss against central differences on random smooth
/// overlapping pairs.
pub fn finite_difference_audit(samples: usize, seed: u64, alpha: Alpha) -> (RegimeReport, Vec<Violation>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(100);
    let mut tr = Tracker::new("finite_difference", "max relative error", FD_REL_TOL, true);
    for i in 0..samples {
        let (p, t) = sample_smooth_pair(&mut rng, alpha);
        let mut worst = 0.0f64;
        for full in [false, true] {
            let eval = |v: &[f64; 8]| {
                let q = BoxParams8::from_array(*v);
                if full {
                    regression_loss_and_grad(&q, &t, alpha).0
                } else {
                    rwiou_loss_and_grad(&q, &t, alpha).0
                }
            };
            let numeric = central_difference(eval, p.to_array());
            let analytic = if full {
                regression_loss_and_grad(&p, &t, alpha).1
            } else {
                rwiou_loss_and_grad(&p, &t, alpha).1
            };
            worst = worst.max(fd_relative_error(&analytic.to_array(), &numeric));
        }
        tr.observe(i, worst, 0.0, &p, &t);
    }
    (tr.report, tr.violations)
}

/// Audits the gradient magnitude bounds:
/// - `|d_s|, |d_c| ≤ α` on arbitrary overlapping pairs;
/// - `|d_x| ≤ 2 / l_t` when the boxes partially overlap along x;
/// - `|d_l| ≤ 1 / l_t` for center-aligned pairs;
/// - `|d_l| * l_t` in general position, reported but not asserted.
pub fn gradient_bound_audit(samples: usize, seed: u64, alpha: Alpha) -> Result<AuditReport> {
    if samples < MIN_AUDIT_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "gradient audit needs at least {MIN_AUDIT_SAMPLES} samples, got {samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut rot = Tracker::new("rotation", "max(|d_s|, |d_c|)", alpha.get(), true);
    for i in 0..samples {
        let t = sample_target(&mut rng);
        let p = sample_pred(&mut rng, &t, 1.2);
        let g = rwiou_loss_and_grad(&p, &t, alpha).1;
        rot.observe(i, g.d_s.abs().max(g.d_c.abs()), BOUND_SLACK, &p, &t);
    }

    rng.set_stream(1);
    let mut center = Tracker::new("center_partial_overlap", "|d_x| * l_t", 2.0, true);
    for i in 0..samples {
        let t = sample_target(&mut rng);
        let mut p = sample_pred(&mut rng, &t, 0.95);
        // push x into the partial-overlap branch
        let half_gap = 0.5 * (p.l - t.l).abs();
        let reach = 0.5 * (p.l + t.l);
        let d = rng.random_range(half_gap..reach);
        p.x = t.x + if rng.random_bool(0.5) { d } else { -d };
        let g = rwiou_loss_and_grad(&p, &t, alpha).1;
        center.observe(i, g.d_x.abs() * t.l, BOUND_SLACK * t.l, &p, &t);
    }

    rng.set_stream(2);
    let mut scale = Tracker::new("scale_center_aligned", "|d_l| * l_t", 1.0, true);
    let mut scale_free = Tracker::new("scale_general", "|d_l| * l_t", 1.0, false);
    for i in 0..samples {
        let t = sample_target(&mut rng);
        let free = sample_pred(&mut rng, &t, 0.95);
        let aligned = BoxParams8 {
            x: t.x,
            y: t.y,
            z: t.z,
            ..free
        };
        let g = rwiou_loss_and_grad(&aligned, &t, alpha).1;
        scale.observe(i, g.d_l.abs() * t.l, BOUND_SLACK * t.l, &aligned, &t);
        let g = rwiou_loss_and_grad(&free, &t, alpha).1;
        scale_free.observe(i, g.d_l.abs() * t.l, 0.0, &free, &t);
    }

    let trackers = [rot, center, scale, scale_free];
    let passed = trackers.iter().all(|t| t.report.passed());
    let mut violations = Vec::new();
    let mut regimes = Vec::new();
    for tr in trackers {
        violations.extend(tr.violations);
        regimes.push(tr.report);
    }
    violations.truncate(MAX_LISTED_VIOLATIONS);
    Ok(AuditReport {
        alpha: alpha.get(),
        seed,
        passed,
        regimes,
        violations,
    })
}
