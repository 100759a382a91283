//! Ventral-landing motion model.
//!
//! With the surface depth at the start of a batch fixed to one, the only
//! unknown is the normalized vertical velocity `nu` (units of 1/s). An event
//! observed at `(x, y)` and time `t` in a batch of duration `tau` is carried
//! to the batch end by the radial warp
//!
//! ```text
//! (x, y) -> (x, y) * (1 + nu * t) / (1 + nu * tau)
//! ```
//!
//! in coordinates centered on the focus of expansion. Cheirality restricts
//! `nu` to `[-1/tau, 0]`; the lower endpoint is excluded by a small guard
//! `epsilon` since the warp is singular there.

use crate::error::{Error, Result};
use crate::events::SensorGeometry;

pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Maps sensor pixel coordinates to coordinates centered on the image
/// center (the focus of expansion) and back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenteredFrame {
    cx: f64,
    cy: f64,
}

impl CenteredFrame {
    pub fn new(geometry: SensorGeometry) -> Self {
        let (cx, cy) = geometry.center();
        Self { cx, cy }
    }

    pub fn to_centered(&self, x: f64, y: f64) -> Point {
        Point::new(x - self.cx, y - self.cy)
    }

    pub fn to_pixel(&self, p: Point) -> Point {
        Point::new(p.x + self.cx, p.y + self.cy)
    }
}

/// Closed interval of candidate normalized velocities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityInterval {
    lo: f64,
    hi: f64,
}

impl VelocityInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid velocity interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn singleton(nu: f64) -> Self {
        Self { lo: nu, hi: nu }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, nu: f64) -> bool {
        self.lo <= nu && nu <= self.hi
    }

    /// Bisects at the center.
    pub fn split(&self) -> (Self, Self) {
        let mid = self.center();
        (
            Self { lo: self.lo, hi: mid },
            Self { lo: mid, hi: self.hi },
        )
    }
}

/// Admissible velocities `[-(1 - epsilon)/tau, 0]` for a batch of duration `tau`.
pub fn velocity_domain(tau: f64, epsilon: f64) -> Result<VelocityInterval> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in [0, 1), got {epsilon}"
        )));
    }
    Ok(VelocityInterval {
        lo: -(1.0 - epsilon) / tau,
        hi: 0.0,
    })
}

/// Radial scale `(1 + nu t) / (1 + nu tau)` applied by the warp.
#[inline]
pub fn warp_scale(t: f64, nu: f64, tau: f64) -> Result<f64> {
    let denom = 1.0 + nu * tau;
    if !(denom > 0.0) {
        return Err(Error::Domain(format!(
            "1 + nu*tau = {denom} <= 0 for nu = {nu}, tau = {tau}"
        )));
    }
    Ok((1.0 + nu * t) / denom)
}

/// Warps an event at FOE-centered position `p` and time `t` to the batch end.
pub fn radial_warp(p: Point, t: f64, nu: f64, tau: f64) -> Result<Point> {
    Ok(p.scale(warp_scale(t, nu, tau)?))
}

/// Point estimate of divergence at the batch end, `nu / (1 + nu tau)`.
pub fn divergence_from_velocity(nu: f64, tau: f64) -> Result<f64> {
    let denom = 1.0 + nu * tau;
    if !(denom > 0.0) {
        return Err(Error::Domain(format!("1 + nu*tau = {denom} <= 0")));
    }
    Ok(nu / denom)
}

/// Continuous-time divergence `nu / (z0 + nu t)` of a constant-velocity descent.
pub fn continuous_divergence(nu: f64, z0: f64, t: f64) -> Result<f64> {
    let depth = z0 + nu * t;
    if !(depth > 0.0) {
        return Err(Error::Domain(format!(
            "depth z0 + nu*t = {depth} <= 0 (past touchdown)"
        )));
    }
    Ok(nu / depth)
}
