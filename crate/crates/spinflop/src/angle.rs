//! Spin directions as angles in (-pi, pi].
//!
//! The convention follows the compass reading of the plane: East is 0,
//! North is +pi/2, West is pi and South is -pi/2. All public constructors
//! normalize into (-pi, pi], with both pi and -pi mapping to pi.

use std::f64::consts::{FRAC_PI_2, PI};

/// Wrap a radian value into (-pi, pi].
///
/// Branching (rather than remainder) keeps the map exactly odd in its
/// argument away from the pi seam: wrap(-x) is the bitwise negation of
/// wrap(x) whenever wrap(x) != pi. The sweep kernels rely on this.
pub(crate) fn wrap(mut x: f64) -> f64 {
    while x > PI {
        x -= 2.0 * PI;
    }
    while x <= -PI {
        x += 2.0 * PI;
    }
    x
}

/// Cosine forced to be exactly even in the floating-point argument.
#[inline]
pub(crate) fn even_cos(x: f64) -> f64 {
    x.abs().cos()
}

/// Sine forced to be exactly odd in the floating-point argument.
#[inline]
pub(crate) fn odd_sin(x: f64) -> f64 {
    if x.is_sign_negative() {
        -((-x).sin())
    } else {
        x.sin()
    }
}

/// atan2 forced to be exactly odd in its first argument.
#[inline]
pub(crate) fn odd_atan2(y: f64, x: f64) -> f64 {
    if y.is_sign_negative() {
        -((-y).atan2(x))
    } else {
        y.atan2(x)
    }
}

/// A spin direction, stored as the angle to the horizontal axis in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle(f64);

impl Angle {
    pub const EAST: Angle = Angle(0.0);
    pub const NORTH: Angle = Angle(FRAC_PI_2);
    pub const WEST: Angle = Angle(PI);
    pub const SOUTH: Angle = Angle(-FRAC_PI_2);

    pub fn from_radians(theta: f64) -> Angle {
        Angle(wrap(theta))
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// Unit vector (cos, sin). The four canonical directions come out as
    /// exact unit vectors so that pure N/S constraints cancel exactly.
    pub fn unit_vector(self) -> [f64; 2] {
        if self.0 == 0.0 {
            [1.0, 0.0]
        } else if self.0 == FRAC_PI_2 {
            [0.0, 1.0]
        } else if self.0 == PI {
            [-1.0, 0.0]
        } else if self.0 == -FRAC_PI_2 {
            [0.0, -1.0]
        } else {
            [self.0.cos(), self.0.sin()]
        }
    }

    /// Reflection about the vertical (N-S) axis: theta -> pi - theta.
    pub fn ew_flip(self) -> Angle {
        Angle::from_radians(PI - self.0)
    }

    pub fn rotated(self, alpha: f64) -> Angle {
        Angle::from_radians(self.0 + alpha)
    }

    /// Signed angular separation from `self` to `other`, in (-pi, pi].
    pub fn separation(self, other: Angle) -> f64 {
        wrap(other.0 - self.0)
    }
}

impl std::fmt::Display for Angle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
