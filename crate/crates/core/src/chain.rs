//! Means and connected correlations of the chain with action
//! `W² Σ (φⱼ − φⱼ₊₁)² + Σ V(φⱼ)`, computed after rotating every integration
//! contour `φ → ζφ`.
//!
//! A finite chain of `M + N + 1` sites with free ends is the bilinear form
//! `bᵀ K^M diag(F_ζ) K^N b` over `bᵀ K^(M+N) b`, where `K` is the Nyström
//! matrix of `exp(-W²ζ²(x-y)² - U(x)/2 - U(y)/2)`, `U(x) = V(ζx)` and
//! `b = sqrt(w)·exp(-U/2)`. The Jacobian `ζ` of each site cancels in the ratio.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::contour::{solve_rotation, Rotation};
use crate::discretize::{
    assemble_operator, auto_resolution, project_function, DiscretizedOperator, Grid, TransferKernel,
};
use crate::harmonic::gaussian_eigenfunction;
use crate::linalg::{dot_bilinear, normalize, DenseMatrix, LinearOperator, PowerOptions};
use crate::potentials::{Observable, Potential};
use crate::spectral::{top_eigenpair, EigenPair};
use crate::{Error, Result, C64};

/// Magnitude floor below which correlation values are not used for fitting.
pub const CORRELATION_FLOOR: f64 = 1e-13;
/// Separations skipped before fitting the decay rate.
pub const BURN_IN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChainPotential {
    /// `V(x) = a·log(1 + b x²)`
    Log { a: f64, b: C64 },
    /// `V(x) = v2 x²/2`
    Quadratic { v2: C64 },
}

impl ChainPotential {
    pub fn v_second(&self) -> C64 {
        match *self {
            ChainPotential::Log { a, b } => 2.0 * a * b,
            ChainPotential::Quadratic { v2 } => v2,
        }
    }

    /// `U(x) = V(ζx)`
    pub fn rotated(&self, zeta: Rotation) -> Result<Potential> {
        match *self {
            ChainPotential::Log { a, b } => Potential::rotated_log(a, b, zeta),
            ChainPotential::Quadratic { v2 } => {
                if !(v2.re > 0.0) {
                    return Err(Error::invalid(format!("quadratic chain needs Re v2 > 0, got {v2}")));
                }
                Ok(Potential::quadratic(v2 * zeta.zeta_sq()))
            }
        }
    }

    /// Observable growth condition; quadratic chains admit any polynomial.
    pub fn admits(&self, f: &Observable) -> bool {
        match *self {
            ChainPotential::Log { a, .. } => f.satisfies_growth(a),
            ChainPotential::Quadratic { .. } => true,
        }
    }
}

#[derive(Debug)]
pub struct ChainModel {
    pub v: ChainPotential,
    pub zeta: Rotation,
    pub w: f64,
    pub potential: Potential,
    pub kernel: TransferKernel,
    pub operator: DiscretizedOperator,
    /// `sqrt(wᵢ)·exp(-U(xᵢ)/2)`
    pub boundary: Vec<C64>,
    pub opts: PowerOptions,
    eigen: OnceLock<std::result::Result<EigenPair, Error>>,
}

impl ChainModel {
    /// Rotation solved from `V″(0)` unless `zeta` is given; grid from
    /// [`auto_resolution`].
    pub fn new(v: ChainPotential, w: f64, zeta: Option<Rotation>, tol: f64, opts: PowerOptions) -> Result<Self> {
        let zeta = match zeta {
            Some(z) => z,
            None => solve_rotation(v.v_second())?,
        };
        let potential = v.rotated(zeta)?;
        let grid = auto_resolution(w, zeta, &potential, tol)?.grid()?;
        Self::build(v, w, zeta, potential, &grid, opts)
    }

    pub fn with_grid(
        v: ChainPotential,
        w: f64,
        zeta: Option<Rotation>,
        grid: &Grid,
        opts: PowerOptions,
    ) -> Result<Self> {
        let zeta = match zeta {
            Some(z) => z,
            None => solve_rotation(v.v_second())?,
        };
        let potential = v.rotated(zeta)?;
        Self::build(v, w, zeta, potential, grid, opts)
    }

    fn build(
        v: ChainPotential,
        w: f64,
        zeta: Rotation,
        potential: Potential,
        grid: &Grid,
        opts: PowerOptions,
    ) -> Result<Self> {
        let kernel = TransferKernel::new(w, zeta, potential.clone())?;
        let operator = assemble_operator(&kernel, grid)?;
        let boundary = project_function(|x| kernel.envelope(x), grid);
        if boundary.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Degenerate("boundary vector is not finite on the grid".into()));
        }
        Ok(ChainModel {
            v,
            zeta,
            w,
            potential,
            kernel,
            operator,
            boundary,
            opts,
            eigen: OnceLock::new(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.operator.grid
    }

    /// `sqrt(|V″(0)|/2)·Re ζ²`
    pub fn c0(&self) -> f64 {
        (self.v.v_second().norm() / 2.0).sqrt() * self.zeta.re_zeta_sq()
    }

    /// `1 − c₀/W`
    pub fn predicted_rate(&self) -> f64 {
        1.0 - self.c0() / self.w
    }

    fn require(&self, f: &Observable) -> Result<()> {
        if self.v.admits(f) {
            Ok(())
        } else {
            Err(Error::Assumption {
                name: "F2",
                detail: format!("observable {} grows too fast for {:?}", f.name(), self.v),
            })
        }
    }

    /// `F(ζxᵢ)`
    fn rotated_values(&self, f: &Observable) -> Vec<C64> {
        let z = self.zeta.zeta();
        self.grid().nodes.iter().map(|x| f.eval(z * x)).collect()
    }

    /// Top eigenpair, computed once; the phase reference is a Gaussian of
    /// width matching `|U″(0)|`.
    pub fn eigenpair(&self) -> Result<&EigenPair> {
        self.eigen
            .get_or_init(|| {
                let alpha = self.w * (self.potential.second_derivative_at_zero.norm() / 2.0).sqrt();
                let g = project_function(|x| C64::new(gaussian_eigenfunction(alpha, x), 0.0), self.grid());
                top_eigenpair(&self.operator, Some(&g), &self.opts)
            })
            .as_ref()
            .map_err(|e| e.clone())
    }

    /// `K^k v` with per-step normalization; returns the vector and the
    /// accumulated `ln` of the discarded norms.
    fn power(&self, v: &[C64], k: usize) -> Result<(Vec<C64>, f64)> {
        let mut x = v.to_vec();
        let mut log_scale = 0.0;
        for _ in 0..k {
            x = self.operator.matvec(&x);
            let s = normalize(&mut x);
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::Degenerate("transfer power vanished or overflowed".into()));
            }
            log_scale += s.ln();
        }
        Ok((x, log_scale))
    }

    /// Finite chain with `m` sites left and `n` sites right of the observed one.
    pub fn finite_chain_mean(&self, f: &Observable, m: usize, n: usize) -> Result<C64> {
        self.require(f)?;
        let d = self.rotated_values(f);
        let (right, s_right) = self.power(&self.boundary, n)?;
        let inserted: Vec<C64> = right.iter().zip(&d).map(|(a, b)| a * b).collect();
        let (num_vec, s_num) = self.power(&inserted, m)?;
        let (den_vec, s_den) = self.power(&self.boundary, m + n)?;
        let num = dot_bilinear(&self.boundary, &num_vec);
        let den = dot_bilinear(&self.boundary, &den_vec);
        if den.norm() < 1e-300 {
            return Err(Error::Degenerate("finite-chain denominator vanishes".into()));
        }
        Ok(num / den * (s_right + s_num - s_den).exp())
    }

    /// The same ratio by explicit summation over all grid tuples, for at most
    /// three sites and 200 nodes.
    pub fn brute_force_tensor_mean(&self, f: &Observable, m: usize, n: usize) -> Result<C64> {
        self.require(f)?;
        let sites = m + n + 1;
        let grid = self.grid();
        if sites > 3 || grid.len() > 200 {
            return Err(Error::invalid(format!(
                "brute-force sum limited to 3 sites and 200 nodes, got {sites} and {}",
                grid.len()
            )));
        }
        let x = &grid.nodes;
        let w = &grid.weights;
        let u: Vec<C64> = x.iter().map(|x| self.potential.eval_real(*x)).collect();
        let fz = self.rotated_values(f);
        let coupling = self.w * self.w * self.zeta.zeta_sq();
        let len = x.len();
        let mut num = C64::new(0.0, 0.0);
        let mut den = C64::new(0.0, 0.0);
        let mut idx = vec![0usize; sites];
        loop {
            let mut weight = 1.0;
            let mut action = C64::new(0.0, 0.0);
            for (k, &i) in idx.iter().enumerate() {
                weight *= w[i];
                action += u[i];
                if k + 1 < sites {
                    let d = x[i] - x[idx[k + 1]];
                    action += coupling * d * d;
                }
            }
            let term = weight * (-action).exp();
            den += term;
            num += term * fz[idx[m]];
            // odometer increment
            let mut k = 0;
            while k < sites {
                idx[k] += 1;
                if idx[k] < len {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == sites {
                break;
            }
        }
        Ok(num / den)
    }

    /// `Σ F(ζxᵢ) u₀ᵢ² / Σ u₀ᵢ²`
    pub fn mean_observable(&self, f: &Observable) -> Result<C64> {
        self.require(f)?;
        let e = self.eigenpair()?;
        let den = self.pairing_norm(e)?;
        let d = self.rotated_values(f);
        let num: C64 = e.u0.iter().zip(&d).map(|(u, f)| u * u * f).sum();
        Ok(num / den)
    }

    fn pairing_norm(&self, e: &EigenPair) -> Result<C64> {
        if e.bilinear_norm.norm() < 1e-6 {
            return Err(Error::Degenerate(format!(
                "u₀ᵀu₀ = {} is too small for the spectral limit",
                e.bilinear_norm
            )));
        }
        Ok(e.bilinear_norm)
    }

    /// `⟨F(φ₀)G(φₙ)⟩ − ⟨F⟩⟨G⟩` in infinite volume.
    pub fn two_point_connected(&self, f: &Observable, g: &Observable, n: usize) -> Result<C64> {
        Ok(*self.correlation_series(f, g, n)?.values.last().unwrap())
    }

    /// Connected correlations for separations `0..=n_max`, with the fitted
    /// decay rate when enough values clear the floor.
    pub fn correlation_series(&self, f: &Observable, g: &Observable, n_max: usize) -> Result<CorrelationSeries> {
        self.require(g)?;
        let mean_f = self.mean_observable(f)?;
        let e = self.eigenpair()?;
        let den = self.pairing_norm(e)?;
        let df = self.rotated_values(f);
        let dg = self.rotated_values(g);
        let target: Vec<C64> = e.u0.iter().zip(&dg).map(|(u, g)| u * g).collect();
        let mut v: Vec<C64> = e.u0.iter().zip(&df).map(|(u, f)| u * f - u * mean_f).collect();
        let inv = 1.0 / e.lambda0;
        let mut values = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            if n > 0 {
                v = self.operator.matvec(&v);
                v.iter_mut().for_each(|z| *z *= inv);
            }
            values.push(dot_bilinear(&v, &target) / den);
        }
        let rate = correlation_decay_rate(&values).ok();
        Ok(CorrelationSeries {
            separations: (0..=n_max).collect(),
            values,
            rate,
            c0_over_w: self.c0() / self.w,
        })
    }

    /// `tr(K^L diag(F_ζ)) / tr(K^L)` for a ring of `length` sites.
    pub fn periodic_mean(&self, f: &Observable, length: usize) -> Result<C64> {
        self.require(f)?;
        if length == 0 {
            return Err(Error::invalid("ring length must be positive"));
        }
        if self.grid().len() > 2000 {
            return Err(Error::invalid("periodic closure is dense; grid limited to 2000 nodes"));
        }
        let m = DenseMatrix::dense_of(&self.operator);
        let normed = |a: DenseMatrix| {
            let s = a.max_abs();
            a.scaled(C64::new(1.0 / s, 0.0))
        };
        let mut result: Option<DenseMatrix> = None;
        let mut base = normed(m);
        let mut k = length;
        while k > 0 {
            if k & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => normed(r.matmul(&base)),
                });
            }
            k >>= 1;
            if k > 0 {
                base = normed(base.matmul(&base));
            }
        }
        let p = result.expect("length > 0");
        let d = self.rotated_values(f);
        let num: C64 = (0..p.dim()).map(|i| p.get(i, i) * d[i]).sum();
        Ok(num / p.trace())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub separations: Vec<usize>,
    pub values: Vec<C64>,
    pub rate: Option<f64>,
    /// `c₀/W`, the predicted gap.
    pub c0_over_w: f64,
}

/// `exp` of the least-squares slope of `ln|vₙ|` against `n`, over `n ≥ 3`
/// with `|vₙ|` above the floor.
pub fn correlation_decay_rate(values: &[C64]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .skip(BURN_IN)
        .filter(|(_, v)| v.norm() > CORRELATION_FLOOR)
        .map(|(n, v)| (n as f64, v.norm().ln()))
        .collect();
    if pts.len() < 5 {
        return Err(Error::Degenerate(format!(
            "only {} separations above the {CORRELATION_FLOOR:e} floor",
            pts.len()
        )));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok((sxy / sxx).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::build_grid;
    use crate::harmonic::{eigenvalue_ratio, HarmonicParams};
    use crate::potentials::ObservableKind;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn obs(k: ObservableKind) -> Observable {
        Observable::new(k)
    }

    fn opts() -> PowerOptions {
        PowerOptions::default()
    }

    /// Solves a complex tridiagonal system by the Thomas algorithm.
    fn thomas(sub: &[C64], diag: &[C64], sup: &[C64], rhs: &[C64]) -> Vec<C64> {
        let n = diag.len();
        let mut cp = vec![c(0.0, 0.0); n];
        let mut dp = vec![c(0.0, 0.0); n];
        cp[0] = sup[0] / diag[0];
        dp[0] = rhs[0] / diag[0];
        for i in 1..n {
            let m = diag[i] - sub[i] * cp[i - 1];
            cp[i] = if i + 1 < n { sup[i] / m } else { c(0.0, 0.0) };
            dp[i] = (rhs[i] - sub[i] * dp[i - 1]) / m;
        }
        let mut x = vec![c(0.0, 0.0); n];
        x[n - 1] = dp[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = dp[i] - cp[i] * x[i + 1];
        }
        x
    }

    /// `⟨φ_i φ_j⟩ = (Q⁻¹)ᵢⱼ / 2` for the Gaussian chain `exp(-φᵀQφ)`.
    fn gaussian_chain_covariance(v2: C64, w: f64, sites: usize, i: usize, j: usize) -> C64 {
        let w2 = w * w;
        let diag: Vec<C64> = (0..sites)
            .map(|k| {
                let nbrs = if k == 0 || k + 1 == sites { 1.0 } else { 2.0 };
                v2 / 2.0 + w2 * nbrs
            })
            .collect();
        let off = vec![c(-w2, 0.0); sites];
        let mut e = vec![c(0.0, 0.0); sites];
        e[j] = c(1.0, 0.0);
        thomas(&off, &diag, &off, &e)[i] / 2.0
    }

    #[test]
    fn constant_observable_has_unit_mean() {
        let m = ChainModel::new(ChainPotential::Log { a: 2.0, b: c(1.0, 0.3) }, 4.0, None, 1e-10, opts()).unwrap();
        let one = obs(ObservableKind::One);
        assert!((m.finite_chain_mean(&one, 3, 5).unwrap() - 1.0).norm() < 1e-13);
        assert!((m.mean_observable(&one).unwrap() - 1.0).norm() < 1e-13);
        assert!(m.two_point_connected(&one, &one, 0).unwrap().norm() < 1e-13);
    }

    #[test]
    fn odd_observable_vanishes_by_parity() {
        let m = ChainModel::new(ChainPotential::Log { a: 2.0, b: c(1.0, 0.5) }, 4.0, None, 1e-10, opts()).unwrap();
        let x = obs(ObservableKind::X);
        assert!(m.finite_chain_mean(&x, 2, 3).unwrap().norm() < 1e-10);
        assert!(m.mean_observable(&x).unwrap().norm() < 1e-10);
    }

    #[test]
    fn growth_condition_enforced() {
        let m = ChainModel::new(ChainPotential::Log { a: 1.0, b: c(1.0, 0.0) }, 4.0, None, 1e-10, opts()).unwrap();
        let err = m.mean_observable(&obs(ObservableKind::X)).unwrap_err();
        assert!(matches!(err, Error::Assumption { name: "F2", .. }));
    }

    #[test]
    fn gaussian_chain_second_moment() {
        for v2 in [c(2.0, 0.0), C64::from_polar(2.0, PI / 6.0)] {
            let w = 2.0;
            let m = ChainModel::new(ChainPotential::Quadratic { v2 }, w, None, 1e-12, opts()).unwrap();
            // the rotated chain computes the analytically continued moment ⟨(ζφ)²⟩
            let got = m.finite_chain_mean(&obs(ObservableKind::X2), 4, 4).unwrap();
            let exact = gaussian_chain_covariance(v2, w, 9, 4, 4);
            assert!((got - exact).norm() <= 1e-6 * exact.norm(), "{v2}: {got} vs {exact}");
        }
    }

    #[test]
    fn brute_force_agrees_with_transfer_products() {
        let grid = build_grid(5.0, 120).unwrap();
        let m =
            ChainModel::with_grid(ChainPotential::Log { a: 2.0, b: c(1.0, 0.4) }, 2.0, None, &grid, opts()).unwrap();
        let x2 = obs(ObservableKind::X2);
        let a = m.finite_chain_mean(&x2, 1, 1).unwrap();
        let b = m.brute_force_tensor_mean(&x2, 1, 1).unwrap();
        assert!((a - b).norm() <= 1e-12 * b.norm());
        let one = obs(ObservableKind::One);
        assert!((m.brute_force_tensor_mean(&one, 1, 1).unwrap() - 1.0).norm() < 1e-14);
        assert!(m.brute_force_tensor_mean(&x2, 2, 1).is_err());
    }

    #[test]
    fn infinite_chain_covariance_rate() {
        let v2 = c(2.0, 0.0);
        let w: f64 = 3.0;
        let m = ChainModel::new(ChainPotential::Quadratic { v2 }, w, None, 1e-12, opts()).unwrap();
        let x = obs(ObservableKind::X);
        let s = m.correlation_series(&x, &x, 30).unwrap();
        let d = v2 / 2.0 + 2.0 * w * w;
        let root = (d - (d * d - 4.0 * w.powi(4)).sqrt()) / (2.0 * w * w);
        let rate = s.rate.unwrap();
        assert!((rate - root.norm()).abs() <= 1e-4 * root.norm(), "{rate} vs {root}");
        // the Toeplitz root is the harmonic eigenvalue ratio
        let p = HarmonicParams::new(w, Rotation::identity(), 1.0, 0.0).unwrap();
        assert!((eigenvalue_ratio(&p).unwrap() - root).norm() < 1e-12);
    }

    #[test]
    fn finite_chain_converges_to_spectral_limit() {
        let m = ChainModel::new(ChainPotential::Log { a: 2.0, b: c(1.0, 0.2) }, 4.0, None, 1e-10, opts()).unwrap();
        let x2 = obs(ObservableKind::X2);
        let limit = m.mean_observable(&x2).unwrap();
        let x = obs(ObservableKind::X);
        let rate = m.correlation_series(&x, &x, 30).unwrap().rate.unwrap();
        let finite = m.finite_chain_mean(&x2, 30, 30).unwrap();
        assert!((finite - limit).norm() <= 10.0 * rate.powi(30) * limit.norm());
    }

    #[test]
    fn periodic_and_free_limits_agree() {
        let m = ChainModel::new(ChainPotential::Log { a: 2.0, b: c(1.0, 0.0) }, 4.0, None, 1e-10, opts()).unwrap();
        let x2 = obs(ObservableKind::X2);
        let free = m.mean_observable(&x2).unwrap();
        let ring = m.periodic_mean(&x2, 60).unwrap();
        assert!((free - ring).norm() <= 1e-6 * free.norm(), "{free} vs {ring}");
    }

    #[test]
    fn decay_rate_of_geometric_sequence() {
        let v: Vec<C64> = (0..20).map(|n| c(0.9f64.powi(n), 0.0)).collect();
        assert!((correlation_decay_rate(&v).unwrap() - 0.9).abs() < 1e-12);
        let tiny = vec![c(1e-20, 0.0); 20];
        assert!(correlation_decay_rate(&tiny).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(8))]
        #[test]
        fn fitted_rate_below_one(a in 1.2f64..3.0, b_im in -0.6f64..0.6, w in 2.0f64..5.0) {
            let m = ChainModel::new(ChainPotential::Log { a, b: c(1.0, b_im) }, w, None, 1e-10, opts()).unwrap();
            let x = obs(ObservableKind::X);
            let s = m.correlation_series(&x, &x, 25).unwrap();
            let r = s.rate.unwrap();
            proptest::prop_assert!(r > 0.0 && r < 1.0);
        }
    }
}
