//! W-sweeps that turn asymptotic statements into measured log-log slopes.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::{saddle_params, Rotation};
use crate::discretize::{assemble_operator, auto_resolution, project_function, Resolution, TransferKernel};
use crate::harmonic::{gaussian_eigenfunction, harmonic_eigenvalue, harmonic_singular_value, HarmonicParams};
use crate::linalg::{dot, norm, sub, PowerOptions};
use crate::potentials::Potential;
use crate::spectral::{
    block_report, harmonic_residual, overlap_integral, top_eigenpairs, top_right_singular_vector, top_singular_values,
};
use crate::{Error, Result, C64};

/// Least-squares line through `(ln W, ln value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerFit> {
    if points.len() < 3 {
        return Err(Error::invalid(format!(
            "power-law fit needs ≥ 3 points, got {}",
            points.len()
        )));
    }
    if let Some((x, y)) = points.iter().find(|(x, y)| !(*x > 0.0) || !(*y > 0.0)) {
        return Err(Error::invalid(format!(
            "power-law fit needs positive data, got ({x}, {y})"
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("power-law fit needs distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(PowerFit {
        slope,
        intercept,
        r2,
        points: points.len(),
    })
}

/// Metric names, in report order.
pub const METRICS: [&str; 9] = [
    "abs_a_minus_1",
    "norm_b",
    "norm_c",
    "gap_d",
    "lambda0_over_mu_minus_1",
    "u0_minus_galpha",
    "s0_over_lambda0_minus_1",
    "overlap_rel_err",
    "harmonic_residual_over_mu",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub w: f64,
    pub resolution: Option<Resolution>,
    /// Values in [`METRICS`] order; empty when the row failed.
    pub values: Vec<f64>,
    /// `gap_d·W/c₀`
    pub gap_ratio: f64,
    pub overlap_precondition_ok: bool,
    pub failure: Option<String>,
}

impl SweepRow {
    pub fn metric(&self, name: &str) -> Option<f64> {
        METRICS
            .iter()
            .position(|m| *m == name)
            .and_then(|i| self.values.get(i).copied())
    }

    pub fn converged(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub w_values: Vec<f64>,
    pub rows: Vec<SweepRow>,
    /// Fits over converged rows; omitted when fewer than 4 rows are usable.
    pub fits: BTreeMap<String, PowerFit>,
    pub c0: f64,
    /// `−1 − slope(|A − 1|)`
    pub delta_hat: Option<f64>,
}

impl SweepResult {
    pub fn fit(&self, name: &str) -> Option<&PowerFit> {
        self.fits.get(name)
    }

    pub fn row(&self, w: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.w == w)
    }
}

fn check_w_list(w_values: &[f64], min: usize) -> Result<()> {
    if w_values.len() < min {
        return Err(Error::invalid(format!(
            "sweep needs ≥ {min} W values, got {}",
            w_values.len()
        )));
    }
    if w_values.windows(2).any(|p| !(p[0] < p[1])) || !(w_values[0] > 0.0) {
        return Err(Error::invalid("W values must be positive and increasing"));
    }
    Ok(())
}

fn fits_of(w_values: &[f64], rows: &[SweepRow], names: &[&str]) -> BTreeMap<String, PowerFit> {
    let mut fits = BTreeMap::new();
    for name in names {
        let points: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.converged())
            .filter_map(|r| r.metric(name).map(|v| (r.w, v)))
            .collect();
        if points.len() >= 4.min(w_values.len()).max(3) {
            if let Ok(f) = fit_power_law(&points) {
                fits.insert(name.to_string(), f);
            }
        }
    }
    fits
}

fn main_row(
    potential: &Potential,
    zeta: Rotation,
    w: f64,
    tol: f64,
    opts: &PowerOptions,
) -> Result<(Resolution, Vec<f64>, f64, bool)> {
    let u2 = potential.second_derivative_at_zero;
    let params = saddle_params(w, zeta, u2)?;
    let res = auto_resolution(w, zeta, potential, tol)?;
    let grid = res.grid()?;
    let kernel = TransferKernel::new(w, zeta, potential.clone())?;
    let op = assemble_operator(&kernel, &grid)?;
    let op_tilde = assemble_operator(&kernel.harmonic_approximation(), &grid)?;
    let report = block_report(&op, &params, opts)?;
    let s0 = top_singular_values(&op, 1, opts)?[0];
    let overlap = overlap_integral(&op, &params, params.alpha, u2);
    let g = project_function(|x| C64::new(gaussian_eigenfunction(params.alpha, x), 0.0), &grid);
    let residual = harmonic_residual(&op, &op_tilde, &g)?;
    let mu = params.mu.norm();
    let values = vec![
        (report.blocks.a - 1.0).norm(),
        report.blocks.norm_b,
        report.blocks.norm_c,
        report.gap_d(),
        (report.lambda0 / params.mu - 1.0).norm(),
        report.u0_minus_galpha,
        (s0 / report.lambda0.norm() - 1.0).abs(),
        overlap.rel_diff,
        residual / mu,
    ];
    Ok((res, values, report.gap_ratio(), overlap.precondition_ok))
}

/// Block decomposition, eigenpair, overlap integral and harmonic residual at
/// each `W`, with power-law fits of every metric.
///
/// The `W` values run concurrently; rows are returned in input order. A row
/// whose solve fails is kept with its error and left out of the fits.
pub fn sweep_block_structure(
    potential: &Potential,
    zeta: Rotation,
    w_values: &[f64],
    tol: f64,
    opts: &PowerOptions,
) -> Result<SweepResult> {
    check_w_list(w_values, 4)?;
    let u2 = potential.second_derivative_at_zero;
    // surfaces U2 violations before any work is scheduled
    let c0 = saddle_params(w_values[0], zeta, u2)?.c0;
    let rows: Vec<SweepRow> = w_values
        .par_iter()
        .map(|&w| match main_row(potential, zeta, w, tol, opts) {
            Ok((res, values, gap_ratio, pre)) => SweepRow {
                w,
                resolution: Some(res),
                values,
                gap_ratio,
                overlap_precondition_ok: pre,
                failure: None,
            },
            Err(e) => SweepRow {
                w,
                resolution: None,
                values: Vec::new(),
                gap_ratio: f64::NAN,
                overlap_precondition_ok: false,
                failure: Some(e.to_string()),
            },
        })
        .collect();
    let fits = fits_of(w_values, &rows, &METRICS);
    let delta_hat = fits.get("abs_a_minus_1").map(|f| -1.0 - f.slope);
    Ok(SweepResult {
        w_values: w_values.to_vec(),
        rows,
        fits,
        c0,
        delta_hat,
    })
}

/// `s_j/|λ_j| − 1` from the closed forms, with a Nyström cross-check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularRatioSweep {
    pub w_values: Vec<f64>,
    /// `ratios[i][j] = s_j/|λ_j| − 1` at `w_values[i]`.
    pub ratios: Vec<Vec<f64>>,
    pub fit_j0: Option<PowerFit>,
    /// `(W, max relative deviation of Nyström s_j and |λ_j| from the closed forms)`
    /// at the smallest and largest `W`.
    pub nystrom_check: Vec<(f64, f64)>,
}

pub fn sweep_singular_ratio(
    family: impl Fn(f64) -> Result<HarmonicParams> + Sync,
    w_values: &[f64],
    j_max: usize,
    tol: f64,
    opts: &PowerOptions,
) -> Result<SingularRatioSweep> {
    check_w_list(w_values, 3)?;
    let mut ratios = Vec::with_capacity(w_values.len());
    for &w in w_values {
        let p = family(w)?;
        if !p.normal_case() {
            return Err(Error::Assumption {
                name: "U2",
                detail: format!("ζ²(a+ib) is not real positive at W = {w}"),
            });
        }
        let row = (0..=j_max)
            .map(|j| Ok(harmonic_singular_value(&p, j) / harmonic_eigenvalue(&p, j)?.norm() - 1.0))
            .collect::<Result<Vec<f64>>>()?;
        ratios.push(row);
    }
    let points: Vec<(f64, f64)> = w_values.iter().zip(&ratios).map(|(w, r)| (*w, r[0].abs())).collect();
    let fit_j0 = if points.iter().all(|p| p.1 > 0.0) {
        Some(fit_power_law(&points)?)
    } else {
        None
    };
    let ends = [w_values[0], *w_values.last().unwrap()];
    let k = (j_max + 1).min(6);
    let nystrom_check = ends
        .par_iter()
        .map(|&w| {
            let p = family(w)?;
            let res = auto_resolution(w, p.zeta, &p.potential(), tol)?;
            let op = assemble_operator(&p.kernel(), &res.grid()?)?;
            let eig = top_eigenpairs(&op, k, None, opts)?;
            let sv = top_singular_values(&op, k, opts)?;
            let mut worst: f64 = 0.0;
            for j in 0..k {
                let l = harmonic_eigenvalue(&p, j)?;
                worst = worst.max((eig[j].lambda0 - l).norm() / l.norm());
                let s = harmonic_singular_value(&p, j);
                worst = worst.max((sv[j] - s).abs() / s);
            }
            Ok((w, worst))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SingularRatioSweep {
        w_values: w_values.to_vec(),
        ratios,
        fit_j0,
        nystrom_check,
    })
}

/// Eigenfunction closeness for the harmonic operator with `α` and `μ` taken
/// from the saddle rule rather than from the exact solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenfunctionSweep {
    pub w_values: Vec<f64>,
    /// `‖K g_α − μ g_α‖/|μ|`
    pub eigen_residual: Vec<f64>,
    /// `‖g̃ − g_α‖`, `g̃` the top right singular vector
    pub singular_vector_distance: Vec<f64>,
    pub fit_eigen_residual: PowerFit,
    pub fit_singular_vector: PowerFit,
}

pub fn sweep_eigenfunction_closeness(
    family: impl Fn(f64) -> Result<HarmonicParams> + Sync,
    w_values: &[f64],
    tol: f64,
    opts: &PowerOptions,
) -> Result<EigenfunctionSweep> {
    check_w_list(w_values, 3)?;
    let rows = w_values
        .par_iter()
        .map(|&w| {
            let p = family(w)?;
            let pot = p.potential();
            let params = saddle_params(w, p.zeta, pot.second_derivative_at_zero)?;
            let res = auto_resolution(w, p.zeta, &pot, tol)?;
            let grid = res.grid()?;
            let op = assemble_operator(&p.kernel(), &grid)?;
            let g = project_function(|x| C64::new(gaussian_eigenfunction(params.alpha, x), 0.0), &grid);
            let kg = crate::linalg::LinearOperator::matvec(&op, &g);
            let mug: Vec<C64> = g.iter().map(|z| z * params.mu).collect();
            let r = norm(&sub(&kg, &mug)) / params.mu.norm();
            let v = top_right_singular_vector(&op, &g, opts)?;
            debug_assert!(dot(&v, &g).im.abs() < 1e-8);
            Ok((r, norm(&sub(&v, &g))))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let eigen_residual: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let singular_vector_distance: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let pts = |v: &[f64]| w_values.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
    Ok(EigenfunctionSweep {
        fit_eigen_residual: fit_power_law(&pts(&eigen_residual))?,
        fit_singular_vector: fit_power_law(&pts(&singular_vector_distance))?,
        w_values: w_values.to_vec(),
        eigen_residual,
        singular_vector_distance,
    })
}
