//! Contour rotation `φ → ζφ` and the saddle parameters of the rotated kernel.

use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Tolerance on arguments when asserting that a complex number is real positive.
pub const ARG_TOL: f64 = 1e-12;

/// A unit-modulus complex number stored by its argument, so that `|ζ| = 1`
/// holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    arg: f64,
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation { arg: 0.0 }
    }

    pub fn from_arg(arg: f64) -> Self {
        Rotation { arg }
    }

    pub fn arg(&self) -> f64 {
        self.arg
    }

    pub fn zeta(&self) -> C64 {
        C64::from_polar(1.0, self.arg)
    }

    pub fn zeta_sq(&self) -> C64 {
        C64::from_polar(1.0, 2.0 * self.arg)
    }

    /// `Re ζ²`
    pub fn re_zeta_sq(&self) -> f64 {
        (2.0 * self.arg).cos()
    }

    pub fn is_admissible(&self) -> bool {
        self.re_zeta_sq() > 0.0
    }
}

/// The rotation with `ζ⁴ V″(0) > 0` and `|arg ζ| < π/4`.
pub fn solve_rotation(v_second: C64) -> Result<Rotation> {
    if v_second.norm() == 0.0 || !v_second.norm().is_finite() {
        return Err(Error::invalid(format!("V''(0) = {v_second} cannot be rotated")));
    }
    let arg = -v_second.arg() / 4.0;
    // arg(V'') = ±π gives |arg ζ| = π/4 exactly
    if arg.abs() >= FRAC_PI_4 - 1e-15 || (v_second.im == 0.0 && v_second.re < 0.0) {
        return Err(Error::Assumption {
            name: "rotation",
            detail: format!("arg V''(0) = {} forces |arg ζ| ≥ π/4", v_second.arg()),
        });
    }
    Ok(Rotation { arg })
}

/// Saddle data of the kernel `exp(-W²ζ²(x-y)² - U(x)/2 - U(y)/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationParams {
    pub zeta: Rotation,
    pub w: f64,
    /// `W·sqrt(ζ²U″(0)/2)`, real positive.
    pub alpha: f64,
    /// `sqrt(π / (W²ζ² + α))`, principal root.
    pub mu: C64,
    /// `sqrt(|U″(0)|/2)·Re ζ²`, the decay constant of the gap.
    pub c0: f64,
}

impl RotationParams {
    /// The predicted normalized gap `1 − c₀/W`.
    pub fn predicted_rate(&self) -> f64 {
        1.0 - self.c0 / self.w
    }
}

pub fn saddle_params(w: f64, zeta: Rotation, u_second: C64) -> Result<RotationParams> {
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::invalid(format!("W must be positive, got {w}")));
    }
    if !zeta.is_admissible() {
        return Err(Error::invalid(format!("Re ζ² = {} is not positive", zeta.re_zeta_sq())));
    }
    let rotated = zeta.zeta_sq() * u_second;
    if !(rotated.norm() > 0.0) || rotated.arg().abs() > ARG_TOL {
        return Err(Error::Assumption {
            name: "U2",
            detail: format!("ζ²U''(0) = {rotated} is not real positive"),
        });
    }
    let alpha = w * (rotated.norm() / 2.0).sqrt();
    let mu = (PI / (w * w * zeta.zeta_sq() + alpha)).sqrt();
    let c0 = (u_second.norm() / 2.0).sqrt() * zeta.re_zeta_sq();
    Ok(RotationParams { zeta, w, alpha, mu, c0 })
}
