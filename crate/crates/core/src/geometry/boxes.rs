use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A yaw-rotated 3D box: center, extents along the box's own length/width/
/// height axes, and yaw in the BEV plane. At `theta = 0` the length runs
/// along world x and the width along world y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

impl Box3D {
    pub const FIELDS: [&'static str; 7] = ["x", "y", "z", "l", "w", "h", "theta"];

    pub fn new(x: f64, y: f64, z: f64, l: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        let b = Self {
            x,
            y,
            z,
            l,
            w,
            h,
            theta,
        };
        b.validate()?;
        Ok(b)
    }

    /// Checks the invariants a deserialized or hand-built box must satisfy.
    pub fn validate(&self) -> Result<()> {
        for (field, value) in Self::FIELDS.iter().zip(self.to_array()) {
            if !value.is_finite() {
                return Err(Error::InvalidBox {
                    field,
                    value,
                    reason: "must be finite",
                });
            }
        }
        for (field, value) in [("l", self.l), ("w", self.w), ("h", self.h)] {
            if value <= 0.0 {
                return Err(Error::InvalidBox {
                    field,
                    value,
                    reason: "must be positive",
                });
            }
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 7] {
        [self.x, self.y, self.z, self.l, self.w, self.h, self.theta]
    }

    pub fn from_array(v: [f64; 7]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6])
    }

    pub fn center(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn extents(&self) -> [f64; 3] {
        [self.l, self.w, self.h]
    }

    /// Same box rotated about its own center.
    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn to_params(&self) -> BoxParams8 {
        let (s, c) = self.theta.sin_cos();
        BoxParams8 {
            x: self.x,
            y: self.y,
            z: self.z,
            l: self.l,
            w: self.w,
            h: self.h,
            s,
            c,
        }
    }
}

/// The differentiable 8-channel parameterization `(x, y, z, l, w, h, s, c)`.
///
/// `s` and `c` are independent channels; predictions need not satisfy
/// `s² + c² = 1`. Targets built with [`Box3D::to_params`] do.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxParams8 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub s: f64,
    pub c: f64,
}

impl BoxParams8 {
    pub const FIELDS: [&'static str; 8] = ["x", "y", "z", "l", "w", "h", "s", "c"];

    pub fn validate(&self) -> Result<()> {
        for (field, value) in Self::FIELDS.iter().zip(self.to_array()) {
            if !value.is_finite() {
                return Err(Error::InvalidBox {
                    field,
                    value,
                    reason: "must be finite",
                });
            }
        }
        for (field, value) in [("l", self.l), ("w", self.w), ("h", self.h)] {
            if value <= 0.0 {
                return Err(Error::InvalidBox {
                    field,
                    value,
                    reason: "must be positive",
                });
            }
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.x, self.y, self.z, self.l, self.w, self.h, self.s, self.c,
        ]
    }

    /// Unchecked; call [`BoxParams8::validate`] when the source is untrusted.
    pub fn from_array(v: [f64; 8]) -> Self {
        Self {
            x: v[0],
            y: v[1],
            z: v[2],
            l: v[3],
            w: v[4],
            h: v[5],
            s: v[6],
            c: v[7],
        }
    }

    pub fn center(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn extents(&self) -> [f64; 3] {
        [self.l, self.w, self.h]
    }

    /// Yaw recovered from the channels; `atan2(0, 0)` yields 0.
    pub fn yaw(&self) -> f64 {
        self.s.atan2(self.c)
    }

    pub fn to_box(&self) -> Box3D {
        Box3D {
            x: self.x,
            y: self.y,
            z: self.z,
            l: self.l,
            w: self.w,
            h: self.h,
            theta: self.yaw(),
        }
    }
}

/// Rotation-weight strength, validated to lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub const DEFAULT: Alpha = Alpha(0.5);
    pub const ZERO: Alpha = Alpha(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::InvalidAlpha(value))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Alpha {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

/// An IoU-like ratio in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IoUScalar(f64);

impl IoUScalar {
    pub const ZERO: IoUScalar = IoUScalar(0.0);
    pub const ONE: IoUScalar = IoUScalar(1.0);

    /// Clamps tiny round-off excursions outside `[0, 1]`.
    pub(crate) fn from_ratio(value: f64) -> Self {
        debug_assert!(value.is_finite(), "non-finite IoU {value}");
        Self(value.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<IoUScalar> for f64 {
    fn from(v: IoUScalar) -> f64 {
        v.0
    }
}
