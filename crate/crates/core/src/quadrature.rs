use std::sync::OnceLock;

pub(crate) const PANEL_ORDER: usize = 8;

/// Gauss–Legendre nodes and weights of order [`PANEL_ORDER`] on [-1, 1].
pub(crate) fn gauss_legendre_8() -> &'static ([f64; PANEL_ORDER], [f64; PANEL_ORDER]) {
    static RULE: OnceLock<([f64; PANEL_ORDER], [f64; PANEL_ORDER])> = OnceLock::new();
    RULE.get_or_init(gauss_legendre::<PANEL_ORDER>)
}

/// Newton iteration on P_n from the Chebyshev-like initial guesses.
fn gauss_legendre<const N: usize>() -> ([f64; N], [f64; N]) {
    let mut nodes = [0.0; N];
    let mut weights = [0.0; N];
    let n = N as f64;
    for i in 0..N {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(N, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(N, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // enforce exact symmetry of the rule
    for i in 0..N / 2 {
        let j = N - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    (nodes, weights)
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
