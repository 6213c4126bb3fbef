//! Spherical Bessel functions and spherical harmonics.
//!
//! These exist to validate the forward map against the known eigenvalues of
//! the single- and double-layer operators on the unit sphere. The spherical
//! Hankel function is taken with the convention h_ℓ(z) = −y_ℓ(z) + i j_ℓ(z),
//! under which the single-layer eigenvalue reads k j_ℓ(k) h_ℓ(k) without an
//! extra factor of i.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Values and derivatives of j_ℓ and y_ℓ for ℓ = 0..=l_max at argument x.
#[derive(Debug, Clone)]
pub struct SphBessel {
    pub j: Vec<f64>,
    pub jp: Vec<f64>,
    pub y: Vec<f64>,
    pub yp: Vec<f64>,
}

impl SphBessel {
    pub fn new(l_max: usize, x: f64) -> Self {
        assert!(x > 1e-8, "argument too small for the recurrences used");
        let j = sph_bessel_j(l_max, x);
        let y = sph_bessel_y(l_max, x);
        let jp = derivatives(&j, x);
        let yp = derivatives(&y, x);
        Self { j, jp, y, yp }
    }

    /// h_ℓ(x) = −y_ℓ(x) + i j_ℓ(x).
    pub fn h(&self, l: usize) -> Complex64 {
        Complex64::new(-self.y[l], self.j[l])
    }

    /// d/dx h_ℓ(x).
    pub fn hp(&self, l: usize) -> Complex64 {
        Complex64::new(-self.yp[l], self.jp[l])
    }
}

/// f_ℓ' = f_{ℓ−1} − (ℓ+1)/x f_ℓ, with f_0' handled from the recurrence
/// f_0' = −f_1 for both j and y.
fn derivatives(f: &[f64], x: f64) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    if f.len() > 1 {
        out[0] = -f[1];
    } else {
        // j_0' = cos x / x − sin x / x²; only needed when l_max = 0.
        out[0] = (x.cos() - f[0]) / x;
    }
    for l in 1..f.len() {
        out[l] = f[l - 1] - (l as f64 + 1.0) / x * f[l];
    }
    out
}

/// Spherical Bessel functions of the first kind, j_0..j_{l_max}, by downward
/// (Miller) recurrence normalized against j_0 = sin x / x. Stable for all
/// orders, including l ≫ x where upward recurrence loses all digits.
pub fn sph_bessel_j(l_max: usize, x: f64) -> Vec<f64> {
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    if l_max == 0 {
        return vec![j0];
    }
    let start = l_max + 25 + x as usize;
    let mut fp = 0.0_f64; // f_{n+1}
    let mut fc = 1e-300_f64; // f_n
    let mut out = vec![0.0; l_max + 1];
    for n in (0..start).rev() {
        let fm = (2.0 * n as f64 + 3.0) / x * fc - fp;
        fp = fc;
        fc = fm;
        if n <= l_max {
            out[n] = fc;
        }
        if fc.abs() > 1e250 {
            let s = 1.0 / fc.abs();
            fp *= s;
            fc *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    // Normalize against whichever closed form is away from a root; matching
    // at a zero of j_0 would poison every order.
    let scale = if j0.abs() >= j1.abs() {
        j0 / out[0]
    } else {
        j1 / out[1]
    };
    for v in out.iter_mut() {
        *v *= scale;
    }
    out
}

/// Spherical Bessel functions of the second kind, y_0..y_{l_max}, by upward
/// recurrence (stable in this direction).
pub fn sph_bessel_y(l_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; l_max + 1];
    out[0] = -x.cos() / x;
    if l_max == 0 {
        return out;
    }
    out[1] = -x.cos() / (x * x) - x.sin() / x;
    for l in 2..=l_max {
        out[l] = (2.0 * l as f64 - 1.0) / x * out[l - 1] - out[l - 2];
    }
    out
}

/// Single-layer eigenvalue on the unit sphere: S[Y_ℓ^m] = k j_ℓ(k) h_ℓ(k) Y_ℓ^m.
pub fn single_layer_eigenvalue(l: usize, k: f64) -> Complex64 {
    let b = SphBessel::new(l, k);
    k * b.j[l] * b.h(l)
}

/// Double-layer eigenvalue on the unit sphere:
/// D[Y_ℓ^m] = (k²/2) (j_ℓ(k) h_ℓ'(k) + h_ℓ(k) j_ℓ'(k)) Y_ℓ^m.
pub fn double_layer_eigenvalue(l: usize, k: f64) -> Complex64 {
    let b = SphBessel::new(l, k);
    0.5 * k * k * (b.j[l] * b.hp(l) + b.h(l) * b.jp[l])
}

/// Eigenvalue of the combined-field operator ½ I + D − ikS on the unit sphere.
pub fn combined_field_eigenvalue(l: usize, k: f64) -> Complex64 {
    0.5 + double_layer_eigenvalue(l, k) - Complex64::new(0.0, k) * single_layer_eigenvalue(l, k)
}

/// Orthonormal spherical harmonic Y_ℓ^m(θ, φ) (unit L² norm on the sphere,
/// Condon–Shortley phase).
pub fn sph_harmonic(l: usize, m: i64, theta: f64, phi: f64) -> Complex64 {
    let m_abs = m.unsigned_abs() as usize;
    assert!(m_abs <= l, "|m| must not exceed l");
    let p = assoc_legendre(l, m_abs, theta.cos());
    let norm = ((2.0 * l as f64 + 1.0) / (4.0 * PI) * factorial_ratio(l, m_abs)).sqrt();
    let (s, c) = (m_abs as f64 * phi).sin_cos();
    let y_pos = norm * p * Complex64::new(c, s);
    if m >= 0 {
        y_pos
    } else {
        // Y_ℓ^{−m} = (−1)^m conj(Y_ℓ^m).
        let sign = if m_abs % 2 == 0 { 1.0 } else { -1.0 };
        sign * y_pos.conj()
    }
}

/// (l − m)! / (l + m)! without forming the factorials.
fn factorial_ratio(l: usize, m: usize) -> f64 {
    let mut r = 1.0;
    for i in (l - m + 1)..=(l + m) {
        r /= i as f64;
    }
    r
}

/// Associated Legendre P_ℓ^m(x) with Condon–Shortley phase, m ≥ 0.
fn assoc_legendre(l: usize, m: usize, x: f64) -> f64 {
    let somx2 = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    let mut pmm = 1.0;
    for i in 1..=m {
        pmm *= -((2 * i - 1) as f64) * somx2;
    }
    if l == m {
        return pmm;
    }
    let mut pm1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return pm1;
    }
    let mut pl = 0.0;
    for ll in (m + 2)..=l {
        pl = ((2 * ll - 1) as f64 * x * pm1 - (ll + m - 1) as f64 * pmm) / (ll - m) as f64;
        pmm = pm1;
        pm1 = pl;
    }
    pl
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::FejerRule;

    /// Power-series oracle for j_ℓ, accurate for moderate x and independent
    /// of the recurrence route used by the implementation.
    fn j_series(l: usize, x: f64) -> f64 {
        let mut double_fact = 1.0; // (2l+1)!!
        for i in 0..=l {
            double_fact *= (2 * i + 1) as f64;
        }
        let mut term = x.powi(l as i32) / double_fact;
        let mut sum = term;
        let mut s = 1.0;
        loop {
            term *= -(x * x) / (2.0 * s * (2.0 * (l as f64 + s) + 1.0));
            sum += term;
            if term.abs() < 1e-18 * sum.abs().max(1e-280) {
                return sum;
            }
            s += 1.0;
        }
    }

    #[test]
    fn bessel_j_closed_forms() {
        for x in [0.7, 2.0, 6.283185307179586, 31.0] {
            let j = sph_bessel_j(2, x);
            assert!((j[0] - x.sin() / x).abs() < 1e-15);
            let j1 = x.sin() / (x * x) - x.cos() / x;
            assert!((j[1] - j1).abs() < 1e-14 * j1.abs().max(1e-3));
        }
    }

    #[test]
    fn bessel_j_matches_series_small_and_moderate_x() {
        for l in [0, 1, 2, 5, 10, 20] {
            for x in [0.5_f64, 1.0, 3.0, 6.5, 10.0] {
                let j = sph_bessel_j(l, x);
                let oracle = j_series(l, x);
                // The alternating series cancels ~e^x/√x of its largest term,
                // which bounds the oracle's own accuracy.
                let tol = 1e-13 * oracle.abs() + 1e-15 * x.exp() / x.sqrt() + 1e-300;
                assert!(
                    (j[l] - oracle).abs() <= tol,
                    "l={l} x={x}: {} vs {oracle}",
                    j[l]
                );
            }
        }
    }

    #[test]
    fn bessel_wronskian_identity() {
        // j_ℓ(x) y_ℓ'(x) − j_ℓ'(x) y_ℓ(x) = 1/x² for every ℓ.
        for x in [1.0, 5.5, 30.0, 100.0] {
            let b = SphBessel::new(20, x);
            for l in 0..=20 {
                let w = b.j[l] * b.yp[l] - b.jp[l] * b.y[l];
                assert!(
                    (w - 1.0 / (x * x)).abs() < 1e-13 / (x * x).min(1.0),
                    "l={l} x={x}: wronskian {w}"
                );
            }
        }
    }

    #[test]
    fn harmonic_low_order_closed_forms() {
        let test_angles = [(0.3, 1.1), (1.9, -2.4), (2.7, 0.0)];
        for (theta, phi) in test_angles {
            let y00 = sph_harmonic(0, 0, theta, phi);
            assert!((y00 - 1.0 / (4.0 * PI).sqrt()).norm() < 1e-15);

            let y10 = sph_harmonic(1, 0, theta, phi);
            let expect = (3.0 / (4.0 * PI)).sqrt() * theta.cos();
            assert!((y10 - expect).norm() < 1e-14);

            let y11 = sph_harmonic(1, 1, theta, phi);
            let mag = -(3.0 / (8.0 * PI)).sqrt() * theta.sin();
            let expect = mag * Complex64::new(phi.cos(), phi.sin());
            assert!((y11 - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn harmonic_negative_m_symmetry() {
        let (theta, phi) = (1.234, 0.77);
        for l in 0..=6 {
            for m in 1..=l as i64 {
                let plus = sph_harmonic(l, m, theta, phi);
                let minus = sph_harmonic(l, -m, theta, phi);
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                assert!((minus - sign * plus.conj()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn harmonic_unit_l2_norm() {
        // 2π ∫ |N P_ℓ^m(x)|² dx = 1; the integrand is a polynomial of degree
        // 2ℓ, integrated exactly by a 64-point Fejér rule.
        let rule = FejerRule::new(64);
        for (l, m) in [(2, 1), (5, 2), (10, 5), (20, 13)] {
            let val: f64 = rule.integrate(|x| {
                let y = sph_harmonic(l, m, x.acos(), 0.0);
                y.norm_sqr()
            }) * 2.0 * PI;
            assert!((val - 1.0).abs() < 1e-12, "(l,m)=({l},{m}): {val}");
        }
    }

    #[test]
    fn eigenvalue_limits() {
        // S[Y_0^0] → 1 as k → 0 (surface potential of the unit sphere).
        let s = single_layer_eigenvalue(0, 1e-4);
        assert!((s.re - 1.0).abs() < 1e-3 && s.im.abs() < 1e-3);
        // Wronskian identity under the h = −y + ij convention:
        // (k²/2)(j h' + h j') = k² j' h − ½.
        let k = 2.0 * PI;
        for l in 0..=8 {
            let b = SphBessel::new(l, k);
            let d = double_layer_eigenvalue(l, k);
            let alt = k * k * b.jp[l] * b.h(l) - 0.5;
            assert!((d - alt).norm() < 1e-12, "l={l}: {d} vs {alt}");
        }
    }
}
