//! Top of the spectrum of discretized transfer operators.
//!
//! Everything here is matrix-free: operators are touched only through
//! products with `M` and `Mᴴ`. For complex-symmetric `M` the eigenvectors are
//! orthogonal in the bilinear pairing `uᵀv`, so deflation uses the projector
//! `u uᵀ/(uᵀu)` and the complement `{v : u₀ᵀv = 0}` is invariant under `M`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::contour::RotationParams;
use crate::discretize::{project_function, DiscretizedOperator, Grid, Kernel};
use crate::harmonic::gaussian_eigenfunction;
use crate::linalg::{
    axpy, dot, dot_bilinear, hermitian_top_k, norm, normalize, random_vector, scale, sub, LinearOperator, PowerOptions,
};
use crate::{Error, Result, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda0: C64,
    /// Unit Hermitian norm, phase fixed against the reference vector.
    pub u0: Vec<C64>,
    /// `‖M u₀ − λ₀ u₀‖`
    pub residual: f64,
    pub iterations: usize,
    /// `u₀ᵀu₀`
    pub bilinear_norm: C64,
}

/// Dominant eigenpair by power iteration.
///
/// The eigenvalue estimate is the bilinear Rayleigh quotient `xᵀMx/xᵀx` for
/// complex-symmetric operators and `xᴴMx` otherwise. Converged when the
/// estimate moves by less than `tol·|λ|` and the residual is below
/// `tol·‖M‖`. The phase makes `⟨u₀, reference⟩` real positive; without a
/// usable reference the largest component is made real positive.
pub fn top_eigenpair(op: &dyn LinearOperator, reference: Option<&[C64]>, opts: &PowerOptions) -> Result<EigenPair> {
    let mut pairs = top_eigenpairs(op, 1, reference, opts)?;
    Ok(pairs.remove(0))
}

/// The `k` eigenvalues of largest modulus of a complex-symmetric operator,
/// each found by power iteration on the complement of the previous ones.
pub fn top_eigenpairs(
    op: &dyn LinearOperator,
    k: usize,
    reference: Option<&[C64]>,
    opts: &PowerOptions,
) -> Result<Vec<EigenPair>> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "cannot extract {k} eigenpairs from dimension {n}"
        )));
    }
    let symmetric = op.is_complex_symmetric();
    if k > 1 && !symmetric {
        return Err(Error::invalid("deflation needs a complex-symmetric operator"));
    }
    let scale_ref = op.norm_estimate();
    let mut found: Vec<EigenPair> = Vec::with_capacity(k);
    let mut y = vec![ZERO; n];
    for idx in 0..k {
        let mut x = match (idx, reference) {
            (0, Some(r)) if norm(r) > 0.0 => r.to_vec(),
            _ => random_vector(n, opts.seed.wrapping_add(idx as u64)),
        };
        deflate(&mut x, &found);
        normalize(&mut x);
        let mut theta_prev = C64::new(f64::NAN, 0.0);
        let mut outcome = None;
        let mut residual = f64::INFINITY;
        for it in 1..=opts.max_iters {
            op.apply(&x, &mut y);
            deflate(&mut y, &found);
            let theta = rayleigh(&x, &y, symmetric);
            residual = y
                .iter()
                .zip(&x)
                .map(|(y, x)| (y - theta * x).norm_sqr())
                .sum::<f64>()
                .sqrt();
            if (theta - theta_prev).norm() < opts.tol * theta.norm() && residual < opts.tol * scale_ref {
                outcome = Some((theta, it));
                break;
            }
            theta_prev = theta;
            std::mem::swap(&mut x, &mut y);
            if normalize(&mut x) == 0.0 {
                return Err(Error::Degenerate("power iterate vanished".into()));
            }
        }
        let (lambda, iterations) = outcome.ok_or(Error::NonConvergence {
            what: "power iteration",
            iterations: opts.max_iters,
            residual,
        })?;
        fix_phase(&mut x, if idx == 0 { reference } else { None });
        found.push(EigenPair {
            lambda0: lambda,
            bilinear_norm: dot_bilinear(&x, &x),
            u0: x.clone(),
            residual,
            iterations,
        });
    }
    Ok(found)
}

fn rayleigh(x: &[C64], y: &[C64], symmetric: bool) -> C64 {
    if symmetric {
        let xx = dot_bilinear(x, x);
        if xx.norm() > 1e-8 {
            return dot_bilinear(x, y) / xx;
        }
    }
    dot(y, x)
}

/// Removes the components along previously found eigenvectors with the
/// bilinear projector, applied twice.
fn deflate(x: &mut [C64], found: &[EigenPair]) {
    for _ in 0..2 {
        for p in found {
            let c = dot_bilinear(&p.u0, x) / p.bilinear_norm;
            axpy(-c, &p.u0, x);
        }
    }
}

fn fix_phase(u: &mut [C64], reference: Option<&[C64]>) {
    let overlap = reference.map_or(ZERO, |r| dot(u, r));
    let phase = if overlap.norm() > 1e-8 {
        overlap.conj() / overlap.norm()
    } else {
        let big = u
            .iter()
            .copied()
            .fold(ZERO, |m, z| if z.norm() > m.norm() { z } else { m });
        if big.norm() == 0.0 {
            return;
        }
        big.conj() / big.norm()
    };
    scale(u, phase);
}

/// Top `k ≤ 10` singular values, decreasing, from the Hermitian eigenvalues
/// of `MᴴM`.
pub fn top_singular_values(op: &dyn LinearOperator, k: usize, opts: &PowerOptions) -> Result<Vec<f64>> {
    if k > 10 {
        return Err(Error::invalid(format!("at most 10 singular values, requested {k}")));
    }
    let scale = op.norm_estimate().powi(2);
    let pairs = hermitian_top_k(
        op.dim(),
        k,
        |x, y| op.apply_adjoint(&op.matvec(x), y),
        None,
        scale,
        opts,
    )?;
    Ok(pairs.into_iter().map(|p| p.value.sqrt()).collect())
}

/// Top right singular vector of `M`, phase fixed against `reference`.
pub fn top_right_singular_vector(op: &dyn LinearOperator, reference: &[C64], opts: &PowerOptions) -> Result<Vec<C64>> {
    let mut start = reference.to_vec();
    normalize(&mut start);
    let scale = op.norm_estimate().powi(2);
    let pairs = hermitian_top_k(
        op.dim(),
        1,
        |x, y| op.apply_adjoint(&op.matvec(x), y),
        Some(&start),
        scale,
        opts,
    )?;
    let mut v = pairs.into_iter().next().map(|p| p.vector).unwrap_or_default();
    fix_phase(&mut v, Some(reference));
    Ok(v)
}

/// Blocks of `μ⁻¹M` with respect to `span(g) ⊕ g^⊥`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blocks {
    /// `gᴴ K̂ g`
    pub a: C64,
    /// `‖P K̂ᴴ g‖`
    pub norm_b: f64,
    /// `‖P K̂ g‖`
    pub norm_c: f64,
    /// `‖P K̂ P‖`
    pub norm_d: f64,
}

/// The four pieces of `K̂ = μ⁻¹M` for `P = I − ggᴴ`:
/// `A ggᴴ`, `ggᴴK̂P`, `PK̂ggᴴ` and `PK̂P`.
pub struct BlockSplit<'a> {
    op: &'a dyn LinearOperator,
    inv_mu: C64,
    g: &'a [C64],
}

impl<'a> BlockSplit<'a> {
    pub fn new(op: &'a dyn LinearOperator, mu: C64, g: &'a [C64]) -> Result<Self> {
        if (norm(g) - 1.0).abs() > 1e-8 {
            return Err(Error::invalid(format!(
                "block vector must have unit norm, got {}",
                norm(g)
            )));
        }
        if mu.norm() == 0.0 {
            return Err(Error::invalid("μ must be nonzero"));
        }
        Ok(BlockSplit {
            op,
            inv_mu: 1.0 / mu,
            g,
        })
    }

    /// `K̂ v`
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut y = self.op.matvec(v);
        scale(&mut y, self.inv_mu);
        y
    }

    /// `K̂ᴴ v`
    pub fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        let mut y = self.op.adjoint_matvec(v);
        scale(&mut y, self.inv_mu.conj());
        y
    }

    /// `P v`
    pub fn project(&self, v: &[C64]) -> Vec<C64> {
        let mut out = v.to_vec();
        axpy(-dot(v, self.g), self.g, &mut out);
        out
    }

    fn along_g(&self, c: C64) -> Vec<C64> {
        self.g.iter().map(|z| z * c).collect()
    }

    pub fn a_part(&self, v: &[C64]) -> Vec<C64> {
        let a = dot(&self.apply(self.g), self.g);
        self.along_g(a * dot(v, self.g))
    }

    pub fn b_part(&self, v: &[C64]) -> Vec<C64> {
        self.along_g(dot(&self.apply(&self.project(v)), self.g))
    }

    pub fn c_part(&self, v: &[C64]) -> Vec<C64> {
        let mut kg = self.project(&self.apply(self.g));
        scale(&mut kg, dot(v, self.g));
        kg
    }

    pub fn d_part(&self, v: &[C64]) -> Vec<C64> {
        self.project(&self.apply(&self.project(v)))
    }

    pub fn blocks(&self, opts: &PowerOptions) -> Result<Blocks> {
        let kg = self.apply(self.g);
        let a = dot(&kg, self.g);
        let norm_c = norm(&self.project(&kg));
        let norm_b = norm(&self.project(&self.apply_adjoint(self.g)));
        // ‖PK̂P‖² is the top eigenvalue of P K̂ᴴ P K̂ P
        let mut start = random_vector(self.g.len(), opts.seed);
        start = self.project(&start);
        normalize(&mut start);
        let pairs = hermitian_top_k(
            self.g.len(),
            1,
            |x, y| {
                let d = self.d_part(x);
                y.copy_from_slice(&self.project(&self.apply_adjoint(&d)));
            },
            Some(&start),
            (self.op.norm_estimate() * self.inv_mu.norm()).powi(2),
            opts,
        )?;
        Ok(Blocks {
            a,
            norm_b,
            norm_c,
            norm_d: pairs[0].value.sqrt(),
        })
    }
}

pub fn block_decomposition(op: &dyn LinearOperator, mu: C64, g: &[C64], opts: &PowerOptions) -> Result<Blocks> {
    BlockSplit::new(op, mu, g)?.blocks(opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub blocks: Blocks,
    pub lambda0: C64,
    pub mu: C64,
    /// `‖u₀ − g_α‖`
    pub u0_minus_galpha: f64,
    pub c0: f64,
    pub w: f64,
    pub eigen_residual: f64,
    pub eigen_iterations: usize,
    /// `u₀ᵀu₀`
    pub bilinear_norm: C64,
}

impl BlockReport {
    /// `1 − ‖D‖`
    pub fn gap_d(&self) -> f64 {
        1.0 - self.blocks.norm_d
    }

    /// `(1 − ‖D‖)·W/c₀`, close to one when the gap matches `c₀/W`.
    pub fn gap_ratio(&self) -> f64 {
        self.gap_d() * self.w / self.c0
    }
}

/// Blocks, top eigenpair and eigenvector closeness for the saddle data `params`.
pub fn block_report(op: &DiscretizedOperator, params: &RotationParams, opts: &PowerOptions) -> Result<BlockReport> {
    let g = project_function(|x| C64::new(gaussian_eigenfunction(params.alpha, x), 0.0), &op.grid);
    let blocks = block_decomposition(op, params.mu, &g, opts)?;
    let eig = top_eigenpair(op, Some(&g), opts)?;
    Ok(BlockReport {
        blocks,
        lambda0: eig.lambda0,
        mu: params.mu,
        u0_minus_galpha: norm(&sub(&eig.u0, &g)),
        c0: params.c0,
        w: params.w,
        eigen_residual: eig.residual,
        eigen_iterations: eig.iterations,
        bilinear_norm: eig.bilinear_norm,
    })
}

/// Orthogonal projector onto `{v : u₀ᵀv = 0}`: `v − ū₀ (u₀ᵀv)/‖u₀‖²`.
pub fn project_complement(v: &mut [C64], u0: &[C64]) {
    let n2 = dot(u0, u0).re;
    let c = dot_bilinear(u0, v) / n2;
    for (v, u) in v.iter_mut().zip(u0) {
        *v -= u.conj() * c;
    }
}

/// Per-step norm `‖(P₀K̂P₀)ⁿ‖^(1/n)` on the invariant complement of `u₀`,
/// `K̂ = M/scale`.
///
/// Each trial starts from a random vector and runs power iteration on `SᴴS`,
/// `S = (P₀K̂P₀)ⁿ`, re-projecting after every product; the largest
/// trial value is returned.
pub fn semigroup_decay(
    op: &dyn LinearOperator,
    scale_by: C64,
    u0: &[C64],
    n_steps: usize,
    trials: usize,
    opts: &PowerOptions,
) -> Result<f64> {
    if n_steps < 1 || trials < 1 {
        return Err(Error::invalid("semigroup decay needs n_steps ≥ 1 and trials ≥ 1"));
    }
    let inv = 1.0 / scale_by;
    let forward = |v: &mut Vec<C64>| {
        for _ in 0..n_steps {
            project_complement(v, u0);
            let mut y = op.matvec(v);
            scale(&mut y, inv);
            project_complement(&mut y, u0);
            *v = y;
        }
    };
    let backward = |v: &mut Vec<C64>| {
        for _ in 0..n_steps {
            project_complement(v, u0);
            let mut y = op.adjoint_matvec(v);
            scale(&mut y, inv.conj());
            project_complement(&mut y, u0);
            *v = y;
        }
    };
    let mut best: f64 = 0.0;
    for t in 0..trials {
        let mut v = random_vector(op.dim(), opts.seed.wrapping_add(1000 + t as u64));
        project_complement(&mut v, u0);
        normalize(&mut v);
        let mut growth = 0.0;
        for _ in 0..200 {
            let mut w = v.clone();
            forward(&mut w);
            let g = norm(&w);
            let done = (g - growth).abs() <= 1e-10 * g;
            growth = g;
            if g == 0.0 || done {
                break;
            }
            backward(&mut w);
            normalize(&mut w);
            v = w;
        }
        best = best.max(growth.powf(1.0 / n_steps as f64));
    }
    Ok(best)
}

/// `max_i Σ_j w_j |K(x_i, x_j)|`, an upper bound for `‖M‖`.
pub fn schur_bound(kernel: &dyn Kernel, grid: &Grid) -> f64 {
    (0..grid.len())
        .map(|i| {
            grid.nodes
                .iter()
                .zip(&grid.weights)
                .map(|(y, w)| w * kernel.eval(grid.nodes[i], *y).norm())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    /// `∬ exp(-W²ζ²(x-y)² - U(x)/2 - αx² - U(y)/2 - αy²)` on the grid.
    pub value: C64,
    /// `sqrt(π/(W²ζ² + α))·sqrt(π/2α)`
    pub asymptotic: C64,
    pub rel_diff: f64,
    /// `|α² − W²ζ²U″(0)/2| ≤ W^(3/2)`
    pub precondition_ok: bool,
}

/// The Gaussian overlap integral, evaluated as `hᵀMh` with
/// `hᵢ = sqrt(wᵢ) exp(-αxᵢ²)`.
pub fn overlap_integral(op: &DiscretizedOperator, params: &RotationParams, alpha: f64, u_second: C64) -> OverlapReport {
    let h = project_function(|x| C64::new((-alpha * x * x).exp(), 0.0), &op.grid);
    let value = dot_bilinear(&h, &op.matvec(&h));
    let w2z = params.w * params.w * params.zeta.zeta_sq();
    let asymptotic = (PI / (w2z + alpha)).sqrt() * (PI / (2.0 * alpha)).sqrt();
    let closeness = (alpha * alpha - w2z * u_second / 2.0).norm();
    OverlapReport {
        value,
        asymptotic,
        rel_diff: (value - asymptotic).norm() / asymptotic.norm(),
        precondition_ok: closeness <= params.w.powf(1.5),
    }
}

/// `‖(M − M̃) g‖` for two operators on the same grid.
pub fn harmonic_residual(op: &DiscretizedOperator, op_tilde: &DiscretizedOperator, g: &[C64]) -> Result<f64> {
    if op.grid != op_tilde.grid {
        return Err(Error::invalid("harmonic residual needs both operators on one grid"));
    }
    Ok(norm(&sub(&op.matvec(g), &op_tilde.matvec(g))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::{saddle_params, Rotation};
    use crate::discretize::{assemble_operator, auto_resolution, build_grid, TransferKernel};
    use crate::harmonic::{harmonic_eigenvalue, harmonic_singular_value, HarmonicParams};
    use crate::linalg::DenseMatrix;
    use crate::potentials::Potential;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn opts() -> PowerOptions {
        PowerOptions::default()
    }

    #[test]
    fn diagonal_top_eigenpair() {
        let m = DenseMatrix::diagonal(&[c(2.0, 0.0), c(1.0, 0.0)]);
        let e = top_eigenpair(&m, None, &opts()).unwrap();
        assert!((e.lambda0 - c(2.0, 0.0)).norm() < 1e-10);
        assert!((e.u0[0] - c(1.0, 0.0)).norm() < 1e-9 && e.u0[1].norm() < 1e-9);
    }

    #[test]
    fn diagonal_singular_values() {
        let m = DenseMatrix::diagonal(&[c(3.0, 0.0), c(1.0, 1.0)]);
        let s = top_singular_values(&m, 2, &opts()).unwrap();
        assert!((s[0] - 3.0).abs() < 1e-10 && (s[1] - 2f64.sqrt()).abs() < 1e-10);
        assert!(top_singular_values(&m, 11, &opts()).is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        // equal-modulus top eigenvalues never separate
        let m = DenseMatrix::diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        let o = PowerOptions {
            max_iters: 50,
            ..opts()
        };
        assert!(matches!(top_eigenpair(&m, None, &o), Err(Error::NonConvergence { .. })));
    }

    fn harmonic_op(p: &HarmonicParams) -> DiscretizedOperator {
        let r = auto_resolution(p.w, p.zeta, &p.potential(), 1e-10).unwrap();
        assemble_operator(&p.kernel(), &r.grid().unwrap()).unwrap()
    }

    #[test]
    fn harmonic_eigenvalues_and_singular_values() {
        let p = HarmonicParams::new(4.0, Rotation::from_arg(-0.2), 1.5, 0.6).unwrap();
        let op = harmonic_op(&p);
        let pairs = top_eigenpairs(&op, 6, None, &opts()).unwrap();
        for (j, e) in pairs.iter().enumerate() {
            let exact = harmonic_eigenvalue(&p, j).unwrap();
            assert!((e.lambda0 - exact).norm() <= 1e-8 * exact.norm(), "j={j}");
            assert!(e.residual <= 1e-10 * op.norm_estimate());
        }
        let s = top_singular_values(&op, 6, &opts()).unwrap();
        for (j, s) in s.iter().enumerate() {
            let exact = harmonic_singular_value(&p, j);
            assert!((s - exact).abs() <= 1e-8 * exact, "j={j}: {s} vs {exact}");
        }
        assert!(s[0] <= schur_bound(&p.kernel(), &op.grid));
    }

    #[test]
    fn self_adjoint_top_vector_is_gaussian() {
        let p = HarmonicParams::new(4.0, Rotation::identity(), 2.0, 0.0).unwrap();
        let op = harmonic_op(&p);
        let a = crate::harmonic::alpha_hr(&p).unwrap().re;
        let g = project_function(|x| c(gaussian_eigenfunction(a, x), 0.0), &op.grid);
        let e = top_eigenpair(&op, Some(&g), &opts()).unwrap();
        assert!(dot(&e.u0, &g).re >= 1.0 - 1e-8);
    }

    #[test]
    fn rank_one_blocks() {
        let g: Vec<C64> = (0..5).map(|i| c(1.0 + i as f64, 0.0)).collect();
        let n = norm(&g);
        let g: Vec<C64> = g.iter().map(|z| z / n).collect();
        let mu = c(0.3, 0.2);
        let m = DenseMatrix::from_fn(5, |i, j| mu * g[i] * g[j]);
        let b = block_decomposition(&m, mu, &g, &opts()).unwrap();
        assert!((b.a - c(1.0, 0.0)).norm() < 1e-14);
        assert!(b.norm_b < 1e-14 && b.norm_c < 1e-14 && b.norm_d < 1e-7);
    }

    #[test]
    fn block_split_reconstructs_operator() {
        let pot = Potential::rotated_log(1.0, c(1.0, 0.4), Rotation::from_arg(-0.1)).unwrap();
        let k = TransferKernel::new(6.0, Rotation::from_arg(-0.1), pot).unwrap();
        let op = assemble_operator(&k, &build_grid(4.0, 400).unwrap()).unwrap();
        let mut g = project_function(|x| c(gaussian_eigenfunction(5.0, x), 0.0), &op.grid);
        normalize(&mut g);
        let split = BlockSplit::new(&op, c(0.3, -0.05), &g).unwrap();
        for t in 0..20 {
            let v = random_vector(op.dim(), t);
            let whole = split.apply(&v);
            let mut sum = split.a_part(&v);
            for part in [split.b_part(&v), split.c_part(&v), split.d_part(&v)] {
                axpy(c(1.0, 0.0), &part, &mut sum);
            }
            assert!(norm(&sub(&whole, &sum)) <= 1e-12 * norm(&v));
        }
    }

    #[test]
    fn blocks_against_dense_products() {
        let p = HarmonicParams::rotated(3.0, 1.0, 0.5).unwrap();
        let op = assemble_operator(&p.kernel(), &build_grid(5.0, 160).unwrap()).unwrap();
        let params = saddle_params(p.w, p.zeta, p.potential().second_derivative_at_zero).unwrap();
        let g = project_function(|x| c(gaussian_eigenfunction(params.alpha, x), 0.0), &op.grid);
        let b = block_decomposition(&op, params.mu, &g, &opts()).unwrap();
        // dense oracle: explicit matrices K̂, P
        let n = op.dim();
        let kd = DenseMatrix::dense_of(&op).scaled(1.0 / params.mu);
        let pd = DenseMatrix::from_fn(n, |i, j| c(if i == j { 1.0 } else { 0.0 }, 0.0) - g[i] * g[j].conj());
        let kg = kd.matvec(&g);
        let a: C64 = (0..n).map(|i| g[i].conj() * kg[i]).sum();
        assert!((a - b.a).norm() < 1e-13);
        assert!((norm(&pd.matvec(&kg)) - b.norm_c).abs() < 1e-13);
        assert!((norm(&pd.matvec(&kd.adjoint().matvec(&g))) - b.norm_b).abs() < 1e-13);
        let pkp = pd.matmul(&kd).matmul(&pd);
        let d = top_singular_values(&pkp, 1, &opts()).unwrap()[0];
        assert!((d - b.norm_d).abs() < 1e-9);
    }

    #[test]
    fn semigroup_rate_diagonal() {
        let m = DenseMatrix::diagonal(&[c(1.0, 0.0), c(0.4, 0.0)]);
        let u0 = [c(1.0, 0.0), c(0.0, 0.0)];
        let r = semigroup_decay(&m, c(1.0, 0.0), &u0, 10, 2, &opts()).unwrap();
        assert!((r - 0.4).abs() < 1e-12);
    }

    #[test]
    fn semigroup_rate_harmonic_normal() {
        let p = HarmonicParams::exactly_normal(4.0, 1.0, 0.5).unwrap();
        let op = harmonic_op(&p);
        let e = top_eigenpair(&op, None, &opts()).unwrap();
        let r = semigroup_decay(&op, e.lambda0, &e.u0, 20, 8, &opts()).unwrap();
        let exact = crate::harmonic::eigenvalue_ratio(&p).unwrap().norm();
        assert!((r - exact).abs() <= 1e-6 * exact, "{r} vs {exact}");
    }

    #[test]
    fn complement_projection_is_invariant() {
        let p = HarmonicParams::rotated(4.0, 1.0, 0.5).unwrap();
        let op = harmonic_op(&p);
        let e = top_eigenpair(&op, None, &opts()).unwrap();
        let mut v = random_vector(op.dim(), 4);
        for _ in 0..30 {
            project_complement(&mut v, &e.u0);
            assert!(dot_bilinear(&v, &e.u0).norm() <= 1e-12 * norm(&v));
            v = op.matvec(&v);
            scale(&mut v, 1.0 / e.lambda0);
        }
    }

    #[test]
    fn schur_bound_cases() {
        struct Gauss(f64);
        impl Kernel for Gauss {
            fn eval(&self, x: f64, y: f64) -> C64 {
                c((-(self.0 * (x - y)).powi(2)).exp(), 0.0)
            }
        }
        let g = build_grid(6.0, 800).unwrap();
        assert!((schur_bound(&Gauss(10.0), &g) - PI.sqrt() / 10.0).abs() < 1e-12);
        let single = Grid::from_nodes(vec![0.2], vec![0.7]).unwrap();
        let p = Potential::quadratic(c(2.0, 0.0));
        let k = TransferKernel::new(2.0, Rotation::identity(), p.clone()).unwrap();
        assert!((schur_bound(&k, &single) - 0.7 * (-p.eval_real(0.2).re).exp()).abs() < 1e-16);
    }

    #[test]
    fn quadratic_overlap_matches_gaussian_determinant() {
        let c2 = c(2.0, 0.6);
        let zeta = Rotation::from_arg(-c2.arg() / 2.0);
        let pot = Potential::quadratic(c2);
        let w = 5.0;
        let params = saddle_params(w, zeta, c2).unwrap();
        let r = auto_resolution(w, zeta, &pot, 1e-12).unwrap();
        let op = assemble_operator(&TransferKernel::new(w, zeta, pot).unwrap(), &r.grid().unwrap()).unwrap();
        let o = overlap_integral(&op, &params, params.alpha, c2);
        let q = w * w * zeta.zeta_sq();
        let p = q + params.alpha + c2 / 4.0;
        let exact = PI / ((p - q) * (p + q)).sqrt();
        assert!((o.value - exact).norm() <= 1e-10 * exact.norm());
        assert!(o.precondition_ok);
        let bad = overlap_integral(&op, &params, 2.0 * params.alpha, c2);
        assert!(!bad.precondition_ok);
    }

    #[test]
    fn overlap_matches_explicit_double_sum() {
        let pot = Potential::rotated_log(1.0, c(1.0, 0.0), Rotation::identity()).unwrap();
        let k = TransferKernel::new(3.0, Rotation::identity(), pot.clone()).unwrap();
        let grid = build_grid(3.0, 120).unwrap();
        let op = assemble_operator(&k, &grid).unwrap();
        let params = saddle_params(3.0, Rotation::identity(), pot.second_derivative_at_zero).unwrap();
        let o = overlap_integral(&op, &params, params.alpha, pot.second_derivative_at_zero);
        let mut direct = c(0.0, 0.0);
        for (x, wx) in grid.nodes.iter().zip(&grid.weights) {
            for (y, wy) in grid.nodes.iter().zip(&grid.weights) {
                let e = -9.0 * (x - y).powi(2)
                    - 0.5 * (pot.eval_real(*x) + pot.eval_real(*y))
                    - params.alpha * (x * x + y * y);
                direct += wx * wy * e.exp();
            }
        }
        assert!((o.value - direct).norm() <= 1e-13 * direct.norm());
    }

    #[test]
    fn quadratic_harmonic_residual_vanishes() {
        let pot = Potential::quadratic(c(2.0, 0.0));
        let k = TransferKernel::new(4.0, Rotation::identity(), pot).unwrap();
        let grid = build_grid(5.0, 320).unwrap();
        let op = assemble_operator(&k, &grid).unwrap();
        let op_t = assemble_operator(&k.harmonic_approximation(), &grid).unwrap();
        let g = project_function(|x| c(gaussian_eigenfunction(4.0, x), 0.0), &grid);
        assert!(harmonic_residual(&op, &op_t, &g).unwrap() <= 1e-12);
    }

    #[test]
    fn refinement_stability_of_top_eigenvalue() {
        let pot = Potential::rotated_log(2.0, c(1.0, 0.0), Rotation::identity()).unwrap();
        let k = TransferKernel::new(8.0, Rotation::identity(), pot.clone()).unwrap();
        let r = auto_resolution(8.0, Rotation::identity(), &pot, 1e-10).unwrap();
        let l1 = top_eigenpair(
            &assemble_operator(&k, &build_grid(r.half_length, r.n).unwrap()).unwrap(),
            None,
            &opts(),
        )
        .unwrap()
        .lambda0;
        let l2 = top_eigenpair(
            &assemble_operator(&k, &build_grid(r.half_length, 2 * r.n).unwrap()).unwrap(),
            None,
            &opts(),
        )
        .unwrap()
        .lambda0;
        assert!((l1 - l2).norm() < 1e-9 * l1.norm());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(16))]
        #[test]
        fn singular_value_below_schur_bound(w in 1.0f64..8.0, a in 0.3f64..3.0, b in -1.0f64..1.0, arg in -0.3f64..0.3) {
            let p = HarmonicParams::new(w, Rotation::from_arg(arg), a, b).unwrap();
            let grid = build_grid(5.0, 200).unwrap();
            let op = assemble_operator(&p.kernel(), &grid).unwrap();
            let s0 = top_singular_values(&op, 1, &opts()).unwrap()[0];
            proptest::prop_assert!(s0 <= schur_bound(&p.kernel(), &grid) * (1.0 + 1e-12));
        }
    }
}
