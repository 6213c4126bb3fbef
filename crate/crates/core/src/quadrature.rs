//! Fejér first-rule quadrature and Chebyshev transforms.
//!
//! Fejér's first rule uses the Chebyshev points of the first kind,
//! `x_j = cos(π (2j+1) / (2n))`, which are open at the interval endpoints and
//! double as the nodes of the discrete orthogonality relation for Chebyshev
//! polynomials. The same node set therefore serves both the smooth-patch
//! quadrature and the 2D Chebyshev transforms of the density; transforms are
//! computed by partial summation (no FFT), which is the faster choice at the
//! small per-patch orders used here.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Nodes of the n-point Fejér first rule, strictly decreasing in j.
pub fn fejer_nodes(n: usize) -> Vec<f64> {
    assert!(n >= 1, "fejer_nodes requires n >= 1");
    fejer_angles(n).iter().map(|t| t.cos()).collect()
}

/// Node angles θ_j = π (2j+1) / (2n), increasing in j.
pub fn fejer_angles(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| PI * (2 * j + 1) as f64 / (2 * n) as f64)
        .collect()
}

/// Weights of the n-point Fejér first rule. All positive, summing to 2.
///
/// ω_j = (2/n) (1 − 2 Σ_{ℓ=1}^{⌊n/2⌋} cos(2ℓθ_j) / (4ℓ² − 1)).
pub fn fejer_weights(n: usize) -> Vec<f64> {
    assert!(n >= 1, "fejer_weights requires n >= 1");
    fejer_angles(n)
        .iter()
        .map(|&theta| {
            let mut s = 0.0;
            for l in 1..=(n / 2) {
                let lf = l as f64;
                s += (2.0 * lf * theta).cos() / (4.0 * lf * lf - 1.0);
            }
            2.0 / n as f64 * (1.0 - 2.0 * s)
        })
        .collect()
}

/// An n-point Fejér first rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct FejerRule {
    pub n: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Node angles, kept so that T_k(x_j) can be evaluated as cos(kθ_j).
    pub angles: Vec<f64>,
}

impl FejerRule {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            nodes: fejer_nodes(n),
            weights: fejer_weights(n),
            angles: fejer_angles(n),
        }
    }

    /// Integrate a function over [-1, 1].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Chebyshev polynomial of the first kind, T_n(x), by three-term recurrence.
pub fn cheb_eval(n: usize, x: f64) -> f64 {
    debug_assert!(x.abs() <= 1.0 + 1e-12);
    match n {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut tm, mut t) = (1.0, x);
            for _ in 2..=n {
                let next = 2.0 * x * t - tm;
                tm = t;
                t = next;
            }
            t
        }
    }
}

/// Fill `out[k] = T_k(x)` for k = 0..out.len().
pub fn cheb_values(x: f64, out: &mut [f64]) {
    if let Some(first) = out.first_mut() {
        *first = 1.0;
    }
    if out.len() > 1 {
        out[1] = x;
        for k in 2..out.len() {
            out[k] = 2.0 * x * out[k - 1] - out[k - 2];
        }
    }
}

/// A grid of 2D Chebyshev coefficients a_{n,m}, n < n_u, m < n_v, stored
/// row-major with the u-mode n as the slow index.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebCoeffGrid {
    pub n_u: usize,
    pub n_v: usize,
    pub coeffs: Vec<Complex64>,
}

impl ChebCoeffGrid {
    pub fn zeros(n_u: usize, n_v: usize) -> Self {
        Self {
            n_u,
            n_v,
            coeffs: vec![Complex64::ZERO; n_u * n_v],
        }
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        self.coeffs[n * self.n_v + m]
    }

    #[inline]
    pub fn set(&mut self, n: usize, m: usize, value: Complex64) {
        self.coeffs[n * self.n_v + m] = value;
    }
}

/// Forward 2D Chebyshev transform of nodal values on the Fejér grid,
/// by partial summation.
///
/// `nodal[i * n_v + j]` holds f(x_i, x_j) with x's the Fejér nodes of the
/// respective direction. Returns a_{n,m} such that
/// f(u,v) = Σ_{n,m} a_{n,m} T_n(u) T_m(v) whenever f is a polynomial of
/// degree < (n_u, n_v); the normalization is α_n α_m / (n_u n_v) with α_0 = 1
/// and α_k = 2 otherwise.
pub fn cheb_transform_2d(nodal: &[Complex64], n_u: usize, n_v: usize) -> ChebCoeffGrid {
    assert_eq!(nodal.len(), n_u * n_v, "nodal grid size mismatch");
    let tu = cos_table(n_u);
    let tv = cos_table(n_v);

    // Stage 1: g[n * n_v + j] = Σ_i f(x_i, x_j) T_n(x_i).
    let mut stage = vec![Complex64::ZERO; n_u * n_v];
    for n in 0..n_u {
        let trow = &tu[n * n_u..(n + 1) * n_u];
        for i in 0..n_u {
            let t = trow[i];
            let frow = &nodal[i * n_v..(i + 1) * n_v];
            let grow = &mut stage[n * n_v..(n + 1) * n_v];
            for j in 0..n_v {
                grow[j] += frow[j] * t;
            }
        }
    }

    // Stage 2: contract over j with T_m(x_j) and normalize.
    let mut grid = ChebCoeffGrid::zeros(n_u, n_v);
    let norm = 1.0 / (n_u * n_v) as f64;
    for n in 0..n_u {
        let alpha_n = if n == 0 { 1.0 } else { 2.0 };
        let grow = &stage[n * n_v..(n + 1) * n_v];
        for m in 0..n_v {
            let alpha_m = if m == 0 { 1.0 } else { 2.0 };
            let trow = &tv[m * n_v..(m + 1) * n_v];
            let mut acc = Complex64::ZERO;
            for j in 0..n_v {
                acc += grow[j] * trow[j];
            }
            grid.set(n, m, acc * (alpha_n * alpha_m * norm));
        }
    }
    grid
}

/// table[k * n + j] = T_k(x_j) = cos(k θ_j) at the n Fejér nodes.
fn cos_table(n: usize) -> Vec<f64> {
    let angles = fejer_angles(n);
    let mut table = vec![0.0; n * n];
    for k in 0..n {
        for (j, &theta) in angles.iter().enumerate() {
            table[k * n + j] = (k as f64 * theta).cos();
        }
    }
    table
}

/// Evaluate the double Chebyshev series at (u, v) by nested Clenshaw
/// recurrences.
pub fn cheb_eval_2d(grid: &ChebCoeffGrid, u: f64, v: f64) -> Complex64 {
    debug_assert!(u.abs() <= 1.0 + 1e-12 && v.abs() <= 1.0 + 1e-12);
    // Inner Clenshaw over m for each n, then outer Clenshaw over n.
    let mut inner = vec![Complex64::ZERO; grid.n_u];
    for n in 0..grid.n_u {
        inner[n] = clenshaw(&grid.coeffs[n * grid.n_v..(n + 1) * grid.n_v], v);
    }
    clenshaw(&inner, u)
}

fn clenshaw(coeffs: &[Complex64], x: f64) -> Complex64 {
    let mut b1 = Complex64::ZERO;
    let mut b2 = Complex64::ZERO;
    for &a in coeffs.iter().skip(1).rev() {
        let b0 = a + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    coeffs[0] + x * b1 - b2
}
