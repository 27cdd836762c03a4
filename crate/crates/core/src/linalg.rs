//! Complex vectors, matrix-free operators and Hermitian power iteration.
//!
//! Inner products follow the convention `⟨u, v⟩ = Σ uᵢ conj(vᵢ)` (conjugation
//! on the second slot). The bilinear pairing `Σ uᵢ vᵢ` is what the spectral
//! projection of a complex-symmetric matrix needs; both are provided.
//!
//! All reductions run sequentially in index order, so results do not depend
//! on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Hermitian inner product `Σ uᵢ conj(vᵢ)`.
pub fn dot(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum()
}

/// Bilinear pairing `Σ uᵢ vᵢ`.
pub fn dot_bilinear(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[C64]) -> f64 {
    u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn scale(u: &mut [C64], s: C64) {
    u.iter_mut().for_each(|z| *z *= s);
}

/// `y += a * x`
pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

pub fn sub(u: &[C64], v: &[C64]) -> Vec<C64> {
    u.iter().zip(v).map(|(a, b)| a - b).collect()
}

/// Normalizes `u` in place and returns its former norm.
pub fn normalize(u: &mut [C64]) -> f64 {
    let n = norm(u);
    if n > 0.0 {
        scale(u, C64::new(1.0 / n, 0.0));
    }
    n
}

/// Deterministic random vector with entries uniform in the unit square.
pub fn random_vector(dim: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// A square matrix accessed only through products.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    /// `y = M x`
    fn apply(&self, x: &[C64], y: &mut [C64]);

    /// `y = Mᴴ x`
    fn apply_adjoint(&self, x: &[C64], y: &mut [C64]);

    /// Whether `M = Mᵀ` (no conjugation).
    fn is_complex_symmetric(&self) -> bool {
        false
    }

    /// An upper bound (or close estimate) of the spectral norm.
    fn norm_estimate(&self) -> f64;

    fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim()];
        self.apply(x, &mut y);
        y
    }

    fn adjoint_matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim()];
        self.apply_adjoint(x, &mut y);
        y
    }
}

/// Row-major dense complex matrix. Used for small problems and as an
/// independent reference in tests.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn diagonal(d: &[C64]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { d[i] } else { C64::new(0.0, 0.0) })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i).conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i))
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn scaled(&self, s: C64) -> Self {
        DenseMatrix {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        DenseMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Matrix product, rows computed in parallel.
    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        assert_eq!(n, other.n);
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        data.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                for (o, b) in out.iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        });
        DenseMatrix { n, data }
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn dense_of(op: &dyn LinearOperator) -> Self {
        let n = op.dim();
        let mut m = Self::zeros(n);
        let mut e = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            e[j] = C64::new(1.0, 0.0);
            let col = op.matvec(&e);
            for (i, v) in col.into_iter().enumerate() {
                m.set(i, j, v);
            }
            e[j] = C64::new(0.0, 0.0);
        }
        m
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn apply_adjoint(&self, x: &[C64], y: &mut [C64]) {
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = (0..self.n).map(|i| self.get(i, j).conj() * x[i]).sum();
        }
    }

    fn is_complex_symmetric(&self) -> bool {
        let tol = 1e-14 * self.max_abs();
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).norm() <= tol))
    }

    fn norm_estimate(&self) -> f64 {
        self.frobenius()
    }
}

/// Tolerances for iterative eigensolvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            tol: 1e-10,
            max_iters: 20_000,
            seed: 0x5eed_2013,
        }
    }
}

/// Eigenpair of a Hermitian positive semi-definite operator.
#[derive(Debug, Clone)]
pub struct HermitianPair {
    pub value: f64,
    pub vector: Vec<C64>,
    pub iterations: usize,
}

/// Top `k` eigenpairs of a Hermitian positive semi-definite operator given by
/// `apply`, using power iteration with orthogonal deflation.
///
/// Converged when the Rayleigh quotient stalls to `tol` relative to the top
/// eigenvalue and the residual is below `100·tol` of it. Rayleigh quotients of
/// Hermitian operators are accurate to the square of the residual, so this
/// pins the eigenvalues well below `tol`. `scale` is a known size of the
/// operator; eigenvalues below `1e-14·scale` count as converged zeros.
pub fn hermitian_top_k<F>(
    dim: usize,
    k: usize,
    apply: F,
    start: Option<&[C64]>,
    scale: f64,
    opts: &PowerOptions,
) -> Result<Vec<HermitianPair>>
where
    F: Fn(&[C64], &mut [C64]),
{
    if k > dim {
        return Err(Error::invalid(format!(
            "requested {k} eigenpairs of a {dim}-dimensional operator"
        )));
    }
    let mut found: Vec<HermitianPair> = Vec::with_capacity(k);
    let mut y = vec![C64::new(0.0, 0.0); dim];
    for idx in 0..k {
        let mut x = match (idx, start) {
            (0, Some(s)) => s.to_vec(),
            _ => random_vector(dim, opts.seed.wrapping_add(idx as u64)),
        };
        orthogonalize(&mut x, &found);
        if normalize(&mut x) == 0.0 {
            x = random_vector(dim, opts.seed ^ 0xa5a5);
            orthogonalize(&mut x, &found);
            normalize(&mut x);
        }
        let mut theta_prev = f64::NAN;
        let mut converged = None;
        let mut residual = f64::INFINITY;
        for it in 1..=opts.max_iters {
            apply(&x, &mut y);
            orthogonalize(&mut y, &found);
            let theta = dot(&y, &x).re;
            residual = y
                .iter()
                .zip(&x)
                .map(|(y, x)| (y - x * theta).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let reference = found.first().map_or(theta.abs(), |p| p.value.abs()).max(1e-14 * scale);
            let stalled = (theta - theta_prev).abs() <= opts.tol * reference;
            if reference == 0.0 || (stalled && residual <= 100.0 * opts.tol * reference) {
                converged = Some((theta, it));
                break;
            }
            theta_prev = theta;
            std::mem::swap(&mut x, &mut y);
            if normalize(&mut x) == 0.0 {
                converged = Some((0.0, it));
                break;
            }
        }
        match converged {
            Some((value, iterations)) => found.push(HermitianPair {
                value: value.max(0.0),
                vector: x.clone(),
                iterations,
            }),
            None => {
                return Err(Error::NonConvergence {
                    what: "Hermitian power iteration",
                    iterations: opts.max_iters,
                    residual,
                })
            }
        }
    }
    Ok(found)
}

/// Lower estimate of `‖C‖₂` by power iteration on `CᴴC`, given products with
/// `C` and `Cᴴ`. Stops once `‖Cv‖` stalls to `1e-9` relative or after `iters` steps.
pub fn spectral_norm_estimate<F, G>(dim: usize, apply: F, apply_adjoint: G, iters: usize, seed: u64) -> f64
where
    F: Fn(&[C64], &mut [C64]),
    G: Fn(&[C64], &mut [C64]),
{
    let mut v = random_vector(dim, seed);
    normalize(&mut v);
    let mut cv = vec![C64::new(0.0, 0.0); dim];
    let mut best: f64 = 0.0;
    for _ in 0..iters.max(1) {
        apply(&v, &mut cv);
        let s = norm(&cv);
        let stalled = (s - best).abs() <= 1e-9 * s;
        best = best.max(s);
        if s == 0.0 || stalled {
            break;
        }
        apply_adjoint(&cv, &mut v);
        if normalize(&mut v) == 0.0 {
            break;
        }
    }
    best
}

/// Two passes of classical Gram–Schmidt against `basis`.
fn orthogonalize(x: &mut [C64], basis: &[HermitianPair]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(x, &b.vector);
            axpy(-c, &b.vector, x);
        }
    }
}
