//! Closed-form spectral data of the harmonic transfer operator
//!
//! `K(x, y) = exp(-W²ζ²(x-y)² - (a+ib)(x² + y²)/2)`,
//!
//! the exact reference every numerical routine is validated against.
//!
//! Eigenvalues are geometric, `λⱼ = sqrt(π/D)·(W²ζ²/D)ʲ` with
//! `D = W²ζ² + α_hr + (a+ib)/2` and `α_hr² = W²ζ²(a+ib) + (a+ib)²/4`.
//! Singular values come from `K*K`, which is unitarily equivalent to
//! `sqrt(π/A)` times a real harmonic operator with coupling `W′² = W⁴/A` and
//! potential strength `a′ = 2a(1 − a/2A)`, where `A = 2W² Re ζ² + a`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::contour::{Rotation, ARG_TOL};
use crate::discretize::{DiscretizedOperator, TransferKernel};
use crate::linalg::{spectral_norm_estimate, LinearOperator};
use crate::potentials::Potential;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicParams {
    pub w: f64,
    pub zeta: Rotation,
    pub a: f64,
    pub b: f64,
}

impl HarmonicParams {
    pub fn new(w: f64, zeta: Rotation, a: f64, b: f64) -> Result<Self> {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::invalid(format!("W must be positive, got {w}")));
        }
        if !(a > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid(format!("need a > 0 and finite b, got a={a}, b={b}")));
        }
        if !zeta.is_admissible() {
            return Err(Error::invalid(format!("Re ζ² = {} is not positive", zeta.re_zeta_sq())));
        }
        Ok(HarmonicParams { w, zeta, a, b })
    }

    /// The rotation making `ζ²(a+ib)` real positive.
    pub fn rotated(w: f64, a: f64, b: f64) -> Result<Self> {
        let c = C64::new(a, b);
        Self::new(w, Rotation::from_arg(-c.arg() / 2.0), a, b)
    }

    /// The rotation making `α_hr²` real, so that the operator is normal.
    pub fn exactly_normal(w: f64, a: f64, b: f64) -> Result<Self> {
        let c = C64::new(a, b);
        let s = -(c * c).im / (4.0 * w * w * c.norm());
        if s.abs() > 1.0 {
            return Err(Error::Degenerate(format!("no normal rotation for W={w}, a={a}, b={b}")));
        }
        Self::new(w, Rotation::from_arg(0.5 * (s.asin() - c.arg())), a, b)
    }

    /// `a + ib`
    pub fn c(&self) -> C64 {
        C64::new(self.a, self.b)
    }

    /// Whether `ζ²(a+ib)` is real positive.
    pub fn normal_case(&self) -> bool {
        (self.zeta.zeta_sq() * self.c()).arg().abs() <= ARG_TOL
    }

    fn wz(&self) -> C64 {
        self.w * self.w * self.zeta.zeta_sq()
    }

    /// `2W² Re ζ² + a`
    pub fn a_const(&self) -> f64 {
        2.0 * self.w * self.w * self.zeta.re_zeta_sq() + self.a
    }

    /// Coupling `W′²` and potential strength `a′` of the real operator
    /// equivalent to `K*K`.
    pub fn t_params(&self) -> (f64, f64) {
        let a_const = self.a_const();
        let w4 = self.w.powi(4);
        (w4 / a_const, 2.0 * self.a * (1.0 - self.a / (2.0 * a_const)))
    }

    /// The potential `U(x) = (a+ib) x²`.
    pub fn potential(&self) -> Potential {
        Potential::quadratic(2.0 * self.c())
    }

    pub fn kernel(&self) -> TransferKernel {
        TransferKernel {
            w: self.w,
            zeta: self.zeta,
            potential: self.potential(),
        }
    }
}

/// Root of `α² = W²ζ²(a+ib) + (a+ib)²/4` with positive real part.
pub fn alpha_hr(p: &HarmonicParams) -> Result<C64> {
    let c = p.c();
    let rhs = p.wz() * c + c * c / 4.0;
    if rhs.im == 0.0 && rhs.re <= 0.0 {
        return Err(Error::Degenerate(format!("α_hr² = {rhs} is real non-positive")));
    }
    let r = rhs.sqrt();
    Ok(if r.re < 0.0 { -r } else { r })
}

fn denominator(p: &HarmonicParams) -> Result<C64> {
    Ok(p.wz() + alpha_hr(p)? + p.c() / 2.0)
}

pub fn harmonic_eigenvalue(p: &HarmonicParams, j: usize) -> Result<C64> {
    let d = denominator(p)?;
    Ok((PI / d).sqrt() * (p.wz() / d).powi(j as i32))
}

/// `λ₁/λ₀`
pub fn eigenvalue_ratio(p: &HarmonicParams) -> Result<C64> {
    Ok(p.wz() / denominator(p)?)
}

/// `α_T = sqrt(W′² a′ + a′²/4)`
pub fn alpha_t(p: &HarmonicParams) -> f64 {
    let (w2, a) = p.t_params();
    (w2 * a + a * a / 4.0).sqrt()
}

/// Exact `sⱼ`, through the real operator equivalent to `K*K`.
pub fn harmonic_singular_value(p: &HarmonicParams, j: usize) -> f64 {
    let (w2, a) = p.t_params();
    let d = w2 + alpha_t(p) + a / 2.0;
    let s2 = (PI / p.a_const()).sqrt() * (PI / d).sqrt() * (w2 / d).powi(j as i32);
    s2.sqrt()
}

/// The radical `s_j² = sqrt(π²/D)(W⁴/D)ʲ`, `D = W⁴ + 2aA + sqrt((2W⁴ + aA)aA)`.
/// Agrees with [`harmonic_singular_value`] only asymptotically in `W`.
pub fn singular_value_radical(p: &HarmonicParams, j: usize) -> f64 {
    let w4 = p.w.powi(4);
    let aa = p.a * p.a_const();
    let d = w4 + 2.0 * aa + ((2.0 * w4 + aa) * aa).sqrt();
    ((PI * PI / d).sqrt() * (w4 / d).powi(j as i32)).sqrt()
}

/// Closed form of `(K*K)(x, y) = ∫ conj(K(r, x)) K(r, y) dr`.
pub fn kstar_k_kernel(p: &HarmonicParams, x: f64, y: f64) -> C64 {
    let a_const = p.a_const();
    let w2 = p.w * p.w;
    let w4 = w2 * w2;
    let c = p.c();
    let z2 = p.zeta.zeta_sq();
    let re = p.zeta.re_zeta_sq();
    let px = (w4 + w2 * (p.a * z2.conj() + c.conj() * re) + 0.5 * p.a * c.conj()) / a_const;
    let py = (w4 + w2 * (p.a * z2 + c * re) + 0.5 * p.a * c) / a_const;
    (PI / a_const).sqrt() * (-px * x * x - py * y * y + 2.0 * w4 / a_const * x * y).exp()
}

/// `g_α(x) = (2α/π)^(1/4) exp(-αx²)`
pub fn gaussian_eigenfunction(alpha: f64, x: f64) -> f64 {
    (2.0 * alpha / PI).powf(0.25) * (-alpha * x * x).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSpectrum {
    pub params: HarmonicParams,
    pub alpha_hr: C64,
    pub eigenvalues: Vec<C64>,
    pub singular_values: Vec<f64>,
    pub singular_values_radical: Vec<f64>,
    pub a_const: f64,
    pub w_t_sq: f64,
    pub a_t: f64,
    pub alpha_t: f64,
}

impl HarmonicSpectrum {
    pub fn new(p: &HarmonicParams, j_max: usize) -> Result<Self> {
        let (w_t_sq, a_t) = p.t_params();
        Ok(HarmonicSpectrum {
            params: *p,
            alpha_hr: alpha_hr(p)?,
            eigenvalues: (0..=j_max).map(|j| harmonic_eigenvalue(p, j)).collect::<Result<_>>()?,
            singular_values: (0..=j_max).map(|j| harmonic_singular_value(p, j)).collect(),
            singular_values_radical: (0..=j_max).map(|j| singular_value_radical(p, j)).collect(),
            a_const: p.a_const(),
            w_t_sq,
            a_t,
            alpha_t: alpha_t(p),
        })
    }
}

/// `‖MᴴM − MMᴴ‖ / ‖MᴴM‖` estimated by power iteration.
pub fn normality_defect(op: &dyn LinearOperator) -> f64 {
    let n = op.dim();
    let hermitian_gap = |x: &[C64], y: &mut [C64]| {
        let a = op.adjoint_matvec(&op.matvec(x));
        let b = op.matvec(&op.adjoint_matvec(x));
        for ((y, a), b) in y.iter_mut().zip(&a).zip(&b) {
            *y = a - b;
        }
    };
    let gram = |x: &[C64], y: &mut [C64]| y.copy_from_slice(&op.adjoint_matvec(&op.matvec(x)));
    let top = spectral_norm_estimate(n, gram, gram, 500, 11);
    if top == 0.0 {
        return 0.0;
    }
    spectral_norm_estimate(n, hermitian_gap, hermitian_gap, 500, 13) / top
}

/// `‖M₁M₂ − M₂M₁‖ / (‖M₁‖‖M₂‖)` for operators on the same grid.
pub fn commutator_defect(m1: &DiscretizedOperator, m2: &DiscretizedOperator) -> Result<f64> {
    if m1.grid != m2.grid {
        return Err(Error::invalid("commutator needs both operators on one grid"));
    }
    let n = m1.dim();
    let comm = |x: &[C64], y: &mut [C64]| {
        let a = m1.matvec(&m2.matvec(x));
        let b = m2.matvec(&m1.matvec(x));
        for ((y, a), b) in y.iter_mut().zip(&a).zip(&b) {
            *y = a - b;
        }
    };
    let comm_adj = |x: &[C64], y: &mut [C64]| {
        let a = m2.adjoint_matvec(&m1.adjoint_matvec(x));
        let b = m1.adjoint_matvec(&m2.adjoint_matvec(x));
        for ((y, a), b) in y.iter_mut().zip(&a).zip(&b) {
            *y = a - b;
        }
    };
    let norm_of = |m: &DiscretizedOperator| {
        spectral_norm_estimate(n, |x, y| m.apply(x, y), |x, y| m.apply_adjoint(x, y), 500, 17)
    };
    let scale = norm_of(m1) * norm_of(m2);
    Ok(spectral_norm_estimate(n, comm, comm_adj, 500, 19) / scale)
}
