//! Complex potentials `U`, observables, and sampled checks of the structural
//! assumptions placed on them.
//!
//! Three kinds are built in:
//!
//! * quadratic: `U(z) = u₂ z² / 2`, entire;
//! * rotated-log: `U(z) = a·log(1 + b ζ² z²)`, i.e. `V(ζz)` for
//!   `V(x) = a·log(1 + b x²)`, principal logarithm;
//! * polynomial: `U(z) = Σₖ cₖ z^(k+2)` from a coefficient table.

use serde::{Deserialize, Serialize};

use crate::contour::Rotation;
use crate::{Error, Result, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Real-axis extent assumed for rotated-log potentials unless configured.
pub const DEFAULT_LOG_DOMAIN: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialKind {
    Quadratic {
        u2: C64,
    },
    RotatedLog {
        a: f64,
        b: C64,
        zeta: Rotation,
    },
    /// Coefficients of `z², z³, …` in that order.
    Polynomial {
        coeffs: Vec<C64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub kind: PotentialKind,
    pub second_derivative_at_zero: C64,
    /// Half-width `c` of the strip `|Im z| ≤ c` on which `U` is analytic.
    pub strip_halfwidth: f64,
    /// Exponent `γ > 1` in the derivative growth bound.
    pub growth_exponent: f64,
    /// Largest `|x|` the potential is declared on; grids never extend past it.
    pub domain_halfwidth: f64,
}

impl Potential {
    pub fn quadratic(u2: C64) -> Self {
        Potential {
            kind: PotentialKind::Quadratic { u2 },
            second_derivative_at_zero: u2,
            strip_halfwidth: f64::INFINITY,
            growth_exponent: 2.0,
            domain_halfwidth: f64::INFINITY,
        }
    }

    /// `U(z) = a·log(1 + b ζ² z²)`.
    pub fn rotated_log(a: f64, b: C64, zeta: Rotation) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::invalid(format!("rotated-log needs a > 0, got {a}")));
        }
        if !(b.re > 0.0) {
            return Err(Error::invalid(format!("rotated-log needs Re b > 0, got {b}")));
        }
        let bz = b * zeta.zeta_sq();
        if bz.im == 0.0 && bz.re <= 0.0 {
            return Err(Error::invalid("b ζ² is real non-positive: branch cut on the real axis"));
        }
        // branch points at z = ±i (bζ²)^(-1/2)
        let branch = C64::new(0.0, 1.0) / bz.sqrt();
        Ok(Potential {
            kind: PotentialKind::RotatedLog { a, b, zeta },
            second_derivative_at_zero: 2.0 * a * bz,
            strip_halfwidth: 0.5 * branch.im.abs(),
            growth_exponent: 2.0,
            domain_halfwidth: DEFAULT_LOG_DOMAIN,
        })
    }

    pub fn polynomial(coeffs: Vec<C64>, strip_halfwidth: f64, growth_exponent: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("polynomial potential needs at least the z² coefficient"));
        }
        if !(strip_halfwidth > 0.0) || !(growth_exponent > 1.0) {
            return Err(Error::invalid(
                "strip half-width must be positive and growth exponent > 1",
            ));
        }
        let u2 = 2.0 * coeffs[0];
        Ok(Potential {
            kind: PotentialKind::Polynomial { coeffs },
            second_derivative_at_zero: u2,
            strip_halfwidth,
            growth_exponent,
            domain_halfwidth: f64::INFINITY,
        })
    }

    pub fn with_domain(mut self, halfwidth: f64) -> Self {
        self.domain_halfwidth = halfwidth;
        self
    }

    /// The quadratic potential with the same `U″(0)`.
    pub fn harmonic_approximation(&self) -> Potential {
        Potential::quadratic(self.second_derivative_at_zero)
    }

    pub fn is_even(&self) -> bool {
        match &self.kind {
            PotentialKind::Quadratic { .. } | PotentialKind::RotatedLog { .. } => true,
            PotentialKind::Polynomial { coeffs } => coeffs.iter().skip(1).step_by(2).all(|c| *c == ZERO),
        }
    }

    /// `U(z)`, with the domain checks of [`eval_potential`].
    pub fn eval(&self, z: C64) -> Result<C64> {
        eval_potential(self, z)
    }

    /// `U(x)` on the real axis; NaN if the point is not admissible.
    pub fn eval_real(&self, x: f64) -> C64 {
        self.eval_unchecked(C64::new(x, 0.0))
            .unwrap_or(C64::new(f64::NAN, f64::NAN))
    }

    fn eval_unchecked(&self, z: C64) -> Option<C64> {
        match &self.kind {
            PotentialKind::Quadratic { u2 } => Some(0.5 * u2 * z * z),
            PotentialKind::RotatedLog { a, b, zeta } => {
                let w = ONE + b * zeta.zeta_sq() * z * z;
                if w.im == 0.0 && w.re <= 0.0 {
                    None
                } else {
                    Some(*a * w.ln())
                }
            }
            PotentialKind::Polynomial { coeffs } => {
                let mut acc = ZERO;
                for c in coeffs.iter().rev() {
                    acc = acc * z + c;
                }
                Some(acc * z * z)
            }
        }
    }

    /// `U′(z)`, analytic formula.
    pub fn derivative(&self, z: C64) -> C64 {
        match &self.kind {
            PotentialKind::Quadratic { u2 } => u2 * z,
            PotentialKind::RotatedLog { a, b, zeta } => {
                let bz = b * zeta.zeta_sq();
                2.0 * a * bz * z / (ONE + bz * z * z)
            }
            PotentialKind::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| (k as f64 + 2.0) * c * z.powi(k as i32 + 1))
                .sum(),
        }
    }

    pub fn id(&self) -> String {
        match &self.kind {
            PotentialKind::Quadratic { u2 } => format!("quadratic(u2={u2})"),
            PotentialKind::RotatedLog { a, b, zeta } => {
                format!("rotated-log(a={a},b={b},arg_zeta={})", zeta.arg())
            }
            PotentialKind::Polynomial { coeffs } => format!("polynomial(deg={})", coeffs.len() + 1),
        }
    }
}

/// `U(z)` for `z` inside the analyticity strip.
///
/// Fails if `|Im z|` exceeds the strip half-width or if the logarithm's
/// argument lands on its branch cut.
pub fn eval_potential(p: &Potential, z: C64) -> Result<C64> {
    if z.im.abs() > p.strip_halfwidth {
        return Err(Error::Domain {
            z,
            reason: format!("|Im z| > strip half-width {}", p.strip_halfwidth),
        });
    }
    p.eval_unchecked(z).ok_or_else(|| Error::Domain {
        z,
        reason: "logarithm branch cut".into(),
    })
}

/// Outcome of one sampled assumption check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub passed: bool,
    /// The worst-case sampled quantity the verdict is based on.
    pub margin: f64,
}

/// Sampled verdicts for U1–U4. Passing is evidence, not a proof.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// max(|U(0)|, |U′(0)|)
    pub u1: Check,
    /// argument of ζ²U″(0) (passes when 0 and modulus positive)
    pub u2: Check,
    /// min Re U(x) / min(1, x²) over real samples
    pub u3: Check,
    /// max |U′(z)| / max(1, Re U(z))^γ over strip samples
    pub u4: Check,
    pub note: String,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.u1.passed && self.u2.passed && self.u3.passed && self.u4.passed
    }

    pub fn failures(&self) -> Vec<&'static str> {
        [("U1", &self.u1), ("U2", &self.u2), ("U3", &self.u3), ("U4", &self.u4)]
            .into_iter()
            .filter(|(_, c)| !c.passed)
            .map(|(n, _)| n)
            .collect()
    }
}

/// Where the assumption checks sample the potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub half_length: f64,
    pub real_points: usize,
    pub strip_lines: usize,
}

impl SampleGrid {
    pub fn covering(half_length: f64) -> Self {
        SampleGrid {
            half_length,
            real_points: 400,
            strip_lines: 5,
        }
    }
}

/// Bound used to call the sampled U4 ratio "bounded".
const U4_CEILING: f64 = 1e8;
const ARG_TOL: f64 = 1e-12;

pub fn check_assumptions(p: &Potential, zeta: Rotation, grid: &SampleGrid) -> AssumptionReport {
    let origin = C64::new(0.0, 0.0);
    let u1 = p.eval_real(0.0).norm().max(p.derivative(origin).norm());

    let rotated = zeta.zeta_sq() * p.second_derivative_at_zero;
    let u2 = Check {
        passed: rotated.norm() > 0.0 && rotated.arg().abs() <= ARG_TOL,
        margin: rotated.arg(),
    };

    let l = grid.half_length.min(p.domain_halfwidth);
    let n = grid.real_points.max(2);
    let xs: Vec<f64> = (0..n).map(|i| -l + 2.0 * l * i as f64 / (n - 1) as f64).collect();

    let mut u3 = f64::INFINITY;
    for &x in &xs {
        if x == 0.0 {
            continue;
        }
        let re = p.eval_real(x).re;
        u3 = u3.min(re / x.abs().powi(2).min(1.0));
    }

    let c = if p.strip_halfwidth.is_finite() {
        p.strip_halfwidth
    } else {
        1.0
    };
    let lines = grid.strip_lines.max(1);
    let mut u4: f64 = 0.0;
    for k in 0..lines {
        let y = if lines == 1 {
            0.0
        } else {
            -c + 2.0 * c * k as f64 / (lines - 1) as f64
        };
        for &x in &xs {
            let z = C64::new(x, y);
            let value = match p.eval(z) {
                Ok(v) => v,
                Err(_) => {
                    u4 = f64::INFINITY;
                    continue;
                }
            };
            let ratio = p.derivative(z).norm() / value.re.max(1.0).powf(p.growth_exponent);
            u4 = u4.max(if ratio.is_nan() { f64::INFINITY } else { ratio });
        }
    }

    AssumptionReport {
        u1: Check {
            passed: u1 <= 1e-14,
            margin: u1,
        },
        u2,
        u3: Check {
            passed: u3 > 0.0 && u3.is_finite(),
            margin: u3,
        },
        u4: Check {
            passed: u4.is_finite() && u4 <= U4_CEILING,
            margin: u4,
        },
        note: format!(
            "sampled check on {} real points and {} strip lines out to |x| = {l}; not a proof",
            n, lines
        ),
    }
}

/// Built-in observables. Expression parsing is deliberately not offered so
/// that analyticity and growth stay checkable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservableKind {
    One,
    X,
    X2,
    LogMoment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub kind: ObservableKind,
    /// Exponent `d` in `|F(z)| ≤ C (1 + |z|)^d` on the sector.
    pub growth_degree: f64,
}

impl Observable {
    pub fn new(kind: ObservableKind) -> Self {
        let growth_degree = match kind {
            ObservableKind::One => 0.0,
            ObservableKind::X => 1.0,
            ObservableKind::X2 => 2.0,
            // log grows slower than any power
            ObservableKind::LogMoment => 0.1,
        };
        Observable { kind, growth_degree }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        let kind = match name {
            "one" | "1" => ObservableKind::One,
            "x" => ObservableKind::X,
            "x2" | "x^2" | "x²" => ObservableKind::X2,
            "log-moment" => ObservableKind::LogMoment,
            other => return Err(Error::invalid(format!("unknown observable '{other}'"))),
        };
        Ok(Observable::new(kind))
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ObservableKind::One => "one",
            ObservableKind::X => "x",
            ObservableKind::X2 => "x2",
            ObservableKind::LogMoment => "log-moment",
        }
    }

    /// `F(z)`; `log(1 + z²)` uses the principal branch, analytic on the
    /// sector `|arg z| < π/4`.
    pub fn eval(&self, z: C64) -> C64 {
        match self.kind {
            ObservableKind::One => ONE,
            ObservableKind::X => z,
            ObservableKind::X2 => z * z,
            ObservableKind::LogMoment => (ONE + z * z).ln(),
        }
    }

    pub fn is_odd(&self) -> bool {
        matches!(self.kind, ObservableKind::X)
    }

    /// Growth condition against `V(x) = a·log(1 + b x²)`: degree < 2a − 1.
    pub fn satisfies_growth(&self, a: f64) -> bool {
        self.growth_degree < 2.0 * a - 1.0
    }

    /// `max |F(z)| (1 + |z|)^(-d)` over rays of the sector between the real
    /// axis and `ℝζ`, out to `radius`.
    pub fn sampled_growth_bound(&self, zeta: Rotation, radius: f64, samples: usize) -> f64 {
        let rays = 9;
        let mut worst: f64 = 0.0;
        for r in 0..rays {
            let theta = zeta.arg() * r as f64 / (rays - 1) as f64;
            for sign in [-1.0, 1.0] {
                for k in 0..samples {
                    let t = sign * radius * k as f64 / (samples.max(2) - 1) as f64;
                    let z = C64::from_polar(t.abs(), theta) * t.signum();
                    let v = self.eval(z).norm() * (1.0 + z.norm()).powf(-self.growth_degree);
                    worst = worst.max(v);
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn log11() -> Potential {
        Potential::rotated_log(1.0, C64::new(1.0, 0.0), Rotation::identity()).unwrap()
    }

    #[test]
    fn quadratic_vanishes_at_origin() {
        let p = Potential::quadratic(C64::new(2.0, 0.0));
        assert_eq!(eval_potential(&p, C64::new(0.0, 0.0)).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn rotated_log_values() {
        let p = log11();
        let v = eval_potential(&p, C64::new(1.0, 0.0)).unwrap();
        assert!((v - C64::new(2f64.ln(), 0.0)).norm() < 1e-15);
        let v = eval_potential(&p, C64::new(0.0, 0.5)).unwrap();
        assert!((v - C64::new(0.75f64.ln(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rotated_log_strip_is_half_branch_distance() {
        assert!((log11().strip_halfwidth - 0.5).abs() < 1e-15);
        let err = eval_potential(&log11(), C64::new(0.0, 0.75)).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
    }

    #[test]
    fn branch_cut_is_reported() {
        // widen the strip artificially so the cut itself is reachable
        let mut p = log11();
        p.strip_halfwidth = 10.0;
        assert!(eval_potential(&p, C64::new(0.0, 2.0)).is_err());
        assert!(eval_potential(&p, C64::new(0.1, 2.0)).is_ok());
    }

    #[test]
    fn rotated_log_second_derivative() {
        let b = C64::from_polar(1.3, PI / 5.0);
        let zeta = Rotation::from_arg(-PI / 20.0);
        let p = Potential::rotated_log(0.7, b, zeta).unwrap();
        let expected = 2.0 * 0.7 * b * zeta.zeta_sq();
        assert!((p.second_derivative_at_zero - expected).norm() < 1e-15);
    }

    #[test]
    fn finite_difference_second_derivative_matches_metadata() {
        let pots = [
            Potential::quadratic(C64::new(2.0, 0.5)),
            log11(),
            Potential::rotated_log(2.0, C64::from_polar(1.0, PI / 3.0), Rotation::from_arg(-PI / 12.0)).unwrap(),
            Potential::polynomial(
                vec![C64::new(1.0, 0.2), C64::new(0.0, 0.0), C64::new(0.1, 0.0)],
                1.0,
                2.0,
            )
            .unwrap(),
        ];
        let h = 1e-4;
        for p in &pots {
            let fd = (p.eval_real(h) - 2.0 * p.eval_real(0.0) + p.eval_real(-h)) / (h * h);
            let rel = (fd - p.second_derivative_at_zero).norm() / p.second_derivative_at_zero.norm();
            assert!(rel < 1e-6, "{}: {rel}", p.id());
        }
    }

    #[test]
    fn assumption_checks() {
        let g = SampleGrid::covering(6.0);
        let q = Potential::quadratic(C64::new(2.0, 0.0));
        assert!(check_assumptions(&q, Rotation::identity(), &g).all_passed());
        assert!(check_assumptions(&log11(), Rotation::identity(), &g).all_passed());
        let bad = Potential::quadratic(C64::new(-2.0, 0.0));
        let r = check_assumptions(&bad, Rotation::identity(), &g);
        assert!(!r.u2.passed);
        assert!(r.failures().contains(&"U2"));
        assert!(r.note.contains("not a proof"));
    }

    #[test]
    fn polynomial_with_linear_term_fails_u1() {
        // U = z² + z³ yields U'(0) = 0 but Re U < 0 for very negative x
        let p = Potential::polynomial(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)], 1.0, 2.0).unwrap();
        let r = check_assumptions(&p, Rotation::identity(), &SampleGrid::covering(3.0));
        assert!(r.u1.passed);
        assert!(!r.u3.passed);
    }

    #[test]
    fn observable_growth() {
        let zeta = Rotation::from_arg(-PI / 12.0);
        for kind in [
            ObservableKind::One,
            ObservableKind::X,
            ObservableKind::X2,
            ObservableKind::LogMoment,
        ] {
            let f = Observable::new(kind);
            let bound = f.sampled_growth_bound(zeta, 50.0, 200);
            assert!(bound.is_finite() && bound < 10.0, "{:?}: {bound}", kind);
        }
        assert!(Observable::new(ObservableKind::X).satisfies_growth(2.0));
        assert!(!Observable::new(ObservableKind::X).satisfies_growth(1.0));
        assert!(Observable::by_name("cos").is_err());
    }

    proptest::proptest! {
        #[test]
        fn schwarz_symmetry(x in -5.0f64..5.0, y in -0.49f64..0.49, a in 0.2f64..3.0, b in 0.2f64..3.0) {
            let p = Potential::rotated_log(a, C64::new(b, 0.0), Rotation::identity()).unwrap();
            let z = C64::new(x, y * p.strip_halfwidth / 0.5);
            let lhs = eval_potential(&p, z.conj()).unwrap().conj();
            let rhs = eval_potential(&p, z).unwrap();
            proptest::prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        }
    }
}
