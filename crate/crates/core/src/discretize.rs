//! Quadrature grids and symmetric Nyström assembly.
//!
//! A kernel `K` on a rule `(xᵢ, wᵢ)` becomes the matrix
//! `Mᵢⱼ = sqrt(wᵢ) K(xᵢ, xⱼ) sqrt(wⱼ)`, which keeps `M` complex symmetric
//! whenever `K(x, y) = K(y, x)` and makes `MᴴM` exactly Hermitian.
//!
//! Kernels with a Gaussian factor `exp(-W²ζ²(x-y)²)` are stored as banded
//! matrices: entries whose Gaussian factor is below `exp(-BAND_EXPONENT)` are
//! dropped, which perturbs the operator by far less than rounding.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::Rotation;
use crate::linalg::LinearOperator;
use crate::potentials::Potential;
use crate::quadrature::{gauss_legendre_8, PANEL_ORDER};
use crate::{Error, Result, C64};

/// Gaussian factors below `exp(-BAND_EXPONENT)` are not stored.
pub const BAND_EXPONENT: f64 = 60.0;

/// Work per product above which rows are computed in parallel.
const PARALLEL_WORK: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub half_length: f64,
    /// Panels of the composite rule; zero for hand-built rules.
    pub panels: usize,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A rule from explicit nodes and weights (e.g. a single Nyström node).
    pub fn from_nodes(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(Error::invalid(
                "nodes and weights must be non-empty and of equal length",
            ));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::invalid("weights must be positive"));
        }
        if nodes.windows(2).any(|p| !(p[0] < p[1])) {
            return Err(Error::invalid("nodes must be strictly increasing"));
        }
        let half_length = nodes.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Ok(Grid {
            nodes,
            weights,
            half_length,
            panels: 0,
        })
    }

    pub fn sqrt_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.sqrt()).collect()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

/// Composite Gauss–Legendre rule of order 8 on `[-L, L]` with uniform panels
/// and `N` rounded up to a multiple of 8.
pub fn build_grid(half_length: f64, n: usize) -> Result<Grid> {
    if !(half_length > 0.0) || !half_length.is_finite() {
        return Err(Error::invalid(format!(
            "grid half-length must be positive, got {half_length}"
        )));
    }
    if n < 2 {
        return Err(Error::invalid(format!("grid needs at least 2 nodes, got {n}")));
    }
    let panels = n.div_ceil(PANEL_ORDER);
    let (t, wt) = gauss_legendre_8();
    let h = 2.0 * half_length / panels as f64;
    let mut nodes = Vec::with_capacity(panels * PANEL_ORDER);
    let mut weights = Vec::with_capacity(panels * PANEL_ORDER);
    for k in 0..panels {
        // panel k mirrors panel (panels-1-k) exactly
        let mid = -half_length + h * (k as f64 + 0.5);
        let mid = if 2 * k + 1 == panels {
            0.0
        } else if 2 * k + 1 > panels {
            -(-half_length + h * ((panels - 1 - k) as f64 + 0.5))
        } else {
            mid
        };
        for (t, w) in t.iter().zip(wt) {
            nodes.push(mid + 0.5 * h * t);
            weights.push(0.5 * h * w);
        }
    }
    Ok(Grid {
        nodes,
        weights,
        half_length,
        panels,
    })
}

/// Truncation length and node count chosen by [`auto_resolution`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub half_length: f64,
    pub n: usize,
    /// True when `L` was limited by the potential's declared domain rather
    /// than by the envelope cutoff.
    pub capped: bool,
}

impl Resolution {
    pub fn grid(&self) -> Result<Grid> {
        build_grid(self.half_length, self.n)
    }
}

/// Picks `[-L, L]` and `N` for the kernel `exp(-W²ζ²(x-y)² - U(x)/2 - U(y)/2)`.
///
/// `L` is the smallest value with `Re U(±L) ≥ 2 ln(1/tol)`; node spacing is at
/// most `1/(8 W sqrt(Re ζ²))`. When the cutoff is not reached inside the
/// potential's domain, `L` is capped at the domain edge provided the WKB
/// estimate `exp(-2W sqrt(Re ζ²) ∫₀ᴸ sqrt(Re U))` of the top eigenfunction's
/// tail is already below `tol`; otherwise the potential grows too slowly.
pub fn auto_resolution(w: f64, zeta: Rotation, potential: &Potential, tol: f64) -> Result<Resolution> {
    if !(tol > 0.0 && tol <= 1e-2) {
        return Err(Error::invalid(format!("tolerance must lie in (0, 1e-2], got {tol}")));
    }
    if !(w > 0.0) {
        return Err(Error::invalid(format!("W must be positive, got {w}")));
    }
    if !zeta.is_admissible() {
        return Err(Error::invalid("Re ζ² must be positive"));
    }
    let cutoff = 2.0 * (1.0 / tol).ln();
    let re_u = |x: f64| potential.eval_real(x).re.min(potential.eval_real(-x).re);
    let limit = potential.domain_halfwidth.min(1e4);
    let step = 1.0 / 64.0;

    let mut x = 0.0;
    let mut found = None;
    while x < limit {
        let next = (x + step).min(limit);
        if re_u(next) >= cutoff {
            // bisect on [x, next]
            let (mut lo, mut hi) = (x, next);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if re_u(mid) >= cutoff {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            found = Some(hi);
            break;
        }
        x = next;
    }

    let root = zeta.re_zeta_sq().sqrt();
    let (half_length, capped) = match found {
        Some(l) => (l, false),
        None => {
            if !potential.domain_halfwidth.is_finite() {
                return Err(Error::SlowGrowth(format!(
                    "Re U stays below {cutoff:.2} out to |x| = {limit}"
                )));
            }
            let l = potential.domain_halfwidth;
            // ∫₀ᴸ sqrt(max(Re U, 0)) by the midpoint rule
            let m = 4096;
            let h = l / m as f64;
            let action: f64 = (0..m).map(|i| re_u((i as f64 + 0.5) * h).max(0.0).sqrt()).sum::<f64>() * h;
            let tail = 2.0 * w * root * action;
            if tail < (1.0 / tol).ln() {
                return Err(Error::SlowGrowth(format!(
                    "tail estimate exp(-{tail:.2}) exceeds tolerance {tol:e} at the domain edge {l}"
                )));
            }
            (l, true)
        }
    };
    let spacing = 1.0 / (8.0 * w * root);
    let n = ((2.0 * half_length / spacing).ceil() as usize).div_ceil(PANEL_ORDER) * PANEL_ORDER;
    Ok(Resolution {
        half_length,
        n: n.max(PANEL_ORDER),
        capped,
    })
}

/// `vᵢ = sqrt(wᵢ) f(xᵢ)`, so that `⟨v, v⟩ ≈ ∫ |f|²`.
pub fn project_function(f: impl Fn(f64) -> C64, grid: &Grid) -> Vec<C64> {
    grid.nodes
        .iter()
        .zip(&grid.weights)
        .map(|(x, w)| w.sqrt() * f(*x))
        .collect()
}

/// Identifying data carried along with an assembled operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub w: Option<f64>,
    pub zeta: Option<Rotation>,
    pub potential: String,
}

/// An integral kernel that can be sampled on a grid.
pub trait Kernel: Sync {
    fn eval(&self, x: f64, y: f64) -> C64;

    /// Distance beyond which `|K(x, y)|` is negligible, if any.
    fn band_halfwidth(&self) -> Option<f64> {
        None
    }

    fn is_symmetric(&self) -> bool {
        true
    }

    fn meta(&self) -> KernelMeta {
        KernelMeta {
            w: None,
            zeta: None,
            potential: "generic".into(),
        }
    }
}

/// `K(x, y) = exp(-W²ζ²(x-y)² - U(x)/2 - U(y)/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferKernel {
    pub w: f64,
    pub zeta: Rotation,
    pub potential: Potential,
}

impl TransferKernel {
    pub fn new(w: f64, zeta: Rotation, potential: Potential) -> Result<Self> {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::invalid(format!("W must be positive, got {w}")));
        }
        if !zeta.is_admissible() {
            return Err(Error::invalid(format!("Re ζ² = {} is not positive", zeta.re_zeta_sq())));
        }
        Ok(TransferKernel { w, zeta, potential })
    }

    /// The same coupling with `U` replaced by its second-order Taylor expansion.
    pub fn harmonic_approximation(&self) -> TransferKernel {
        TransferKernel {
            w: self.w,
            zeta: self.zeta,
            potential: self.potential.harmonic_approximation(),
        }
    }

    /// `exp(-U(x)/2)`
    pub fn envelope(&self, x: f64) -> C64 {
        (-0.5 * self.potential.eval_real(x)).exp()
    }
}

impl Kernel for TransferKernel {
    fn eval(&self, x: f64, y: f64) -> C64 {
        let u = self.potential.eval_real(x) + self.potential.eval_real(y);
        (-(self.w * self.w * (x - y) * (x - y)) * self.zeta.zeta_sq() - 0.5 * u).exp()
    }

    fn band_halfwidth(&self) -> Option<f64> {
        Some(BAND_EXPONENT.sqrt() / (self.w * self.zeta.re_zeta_sq().sqrt()))
    }

    fn meta(&self) -> KernelMeta {
        KernelMeta {
            w: Some(self.w),
            zeta: Some(self.zeta),
            potential: self.potential.id(),
        }
    }
}

/// A Nyström matrix stored row by row over a contiguous column band.
#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    pub grid: Grid,
    pub meta: KernelMeta,
    first_col: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<C64>,
    symmetric: bool,
    row_sum_max: f64,
}

/// Nyström matrix of `kernel` on `grid`.
pub fn assemble_operator(kernel: &dyn Kernel, grid: &Grid) -> Result<DiscretizedOperator> {
    let n = grid.len();
    let sw = grid.sqrt_weights();
    let band = kernel.band_halfwidth();
    let ranges: Vec<(usize, usize)> = (0..n)
        .map(|i| match band {
            Some(h) => {
                let lo = grid.nodes.partition_point(|x| *x < grid.nodes[i] - h);
                let hi = grid.nodes.partition_point(|x| *x <= grid.nodes[i] + h);
                (lo, hi)
            }
            None => (0, n),
        })
        .collect();
    // envelope-separable kernels could be sped up, but the evaluation count is
    // already O(N · band)
    let rows: Vec<Result<Vec<C64>>> = ranges
        .par_iter()
        .enumerate()
        .map(|(i, &(lo, hi))| {
            (lo..hi)
                .map(|j| {
                    let k = kernel.eval(grid.nodes[i], grid.nodes[j]);
                    if !k.re.is_finite() || !k.im.is_finite() {
                        Err(Error::NonFinite {
                            x: grid.nodes[i],
                            y: grid.nodes[j],
                        })
                    } else {
                        Ok(sw[i] * k * sw[j])
                    }
                })
                .collect()
        })
        .collect();

    let mut first_col = Vec::with_capacity(n);
    let mut offsets = Vec::with_capacity(n + 1);
    let mut values = Vec::new();
    offsets.push(0);
    for (row, &(lo, _)) in rows.into_iter().zip(&ranges) {
        let row = row?;
        first_col.push(lo);
        values.extend_from_slice(&row);
        offsets.push(values.len());
    }

    let mut op = DiscretizedOperator {
        grid: grid.clone(),
        meta: kernel.meta(),
        first_col,
        offsets,
        values,
        symmetric: false,
        row_sum_max: 0.0,
    };
    op.row_sum_max = (0..n)
        .map(|i| op.row(i).1.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    op.symmetric = kernel.is_symmetric() && op.check_symmetry(1e-14);
    Ok(op)
}

impl DiscretizedOperator {
    /// First column and stored values of row `i`.
    pub fn row(&self, i: usize) -> (usize, &[C64]) {
        (self.first_col[i], &self.values[self.offsets[i]..self.offsets[i + 1]])
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        let (lo, vals) = self.row(i);
        if j >= lo && j < lo + vals.len() {
            vals[j - lo]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    pub fn stored_entries(&self) -> usize {
        self.values.len()
    }

    /// Componentwise check of `M = Mᵀ` relative to the largest entry.
    pub fn check_symmetry(&self, rel_tol: f64) -> bool {
        let max = self.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        (0..self.dim()).all(|i| {
            let (lo, vals) = self.row(i);
            vals.iter()
                .enumerate()
                .all(|(k, v)| (v - self.entry(lo + k, i)).norm() <= rel_tol * max)
        })
    }

    /// `max_i Σ_j |Mᵢⱼ|`
    pub fn max_row_sum(&self) -> f64 {
        self.row_sum_max
    }

    fn apply_rows(&self, x: &[C64], y: &mut [C64], conj: bool) {
        let row = |i: usize| -> C64 {
            let (lo, vals) = self.row(i);
            let xs = &x[lo..lo + vals.len()];
            if conj {
                vals.iter().zip(xs).map(|(a, b)| a.conj() * b).sum()
            } else {
                vals.iter().zip(xs).map(|(a, b)| a * b).sum()
            }
        };
        if self.values.len() >= PARALLEL_WORK {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        } else {
            y.iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        }
    }
}

impl LinearOperator for DiscretizedOperator {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.apply_rows(x, y, false);
    }

    fn apply_adjoint(&self, x: &[C64], y: &mut [C64]) {
        if self.symmetric {
            // Mᴴ = conj(M) when M = Mᵀ
            self.apply_rows(x, y, true);
        } else {
            y.fill(C64::new(0.0, 0.0));
            for (i, xi) in x.iter().enumerate() {
                let (lo, vals) = self.row(i);
                for (k, v) in vals.iter().enumerate() {
                    y[lo + k] += v.conj() * xi;
                }
            }
        }
    }

    fn is_complex_symmetric(&self) -> bool {
        self.symmetric
    }

    fn norm_estimate(&self) -> f64 {
        self.row_sum_max
    }
}
