//! Graded changes of variables.
//!
//! Three families, all built from the same polynomially-graded map `w(τ)` on
//! [0, 2π] whose derivatives up to order p−1 vanish at both interval ends:
//!
//! * [`ck_map`] — the graded map itself,
//! * [`edge_map`] — the four-case maps of [-1,1] onto itself that cluster
//!   nodes at flagged patch edges and thereby smooth out edge-singular
//!   densities,
//! * [`singular_map`] — the "floating" map whose derivative vanishes at an
//!   arbitrary interior point α (the projected kernel singularity), used to
//!   build the rectangular-polar singular quadrature.
//!
//! All derivatives are closed-form; finite differences appear only in tests.

use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

#[inline]
fn cubic_v(p: u32, tau: f64) -> f64 {
    let pf = p as f64;
    let a = (PI - tau) / PI;
    (1.0 / pf - 0.5) * a * a * a + (tau - PI) / (pf * PI) + 0.5
}

#[inline]
fn cubic_v_deriv(p: u32, tau: f64) -> f64 {
    let pf = p as f64;
    let a = (PI - tau) / PI;
    -3.0 / PI * (1.0 / pf - 0.5) * a * a + 1.0 / (pf * PI)
}

/// The graded map w(τ) = 2π v(τ)^p / (v(τ)^p + v(2π−τ)^p) on [0, 2π].
///
/// Fixed points: w(0) = 0, w(π) = π, w(2π) = 2π; strictly increasing, with
/// derivatives of order 1..p−1 vanishing at both endpoints.
pub fn ck_map(p: u32, tau: f64) -> f64 {
    debug_assert!(p >= 2);
    debug_assert!((-1e-12..=TWO_PI + 1e-12).contains(&tau));
    let a = cubic_v(p, tau).powi(p as i32);
    let b = cubic_v(p, TWO_PI - tau).powi(p as i32);
    (TWO_PI * a / (a + b)).clamp(0.0, TWO_PI)
}

/// Derivative of [`ck_map`]; non-negative, exactly 0 at τ ∈ {0, 2π}.
pub fn ck_map_deriv(p: u32, tau: f64) -> f64 {
    debug_assert!(p >= 2);
    let pi32 = p as i32;
    let v1 = cubic_v(p, tau);
    let v2 = cubic_v(p, TWO_PI - tau);
    let a = v1.powi(pi32);
    let b = v2.powi(pi32);
    let da = p as f64 * v1.powi(pi32 - 1) * cubic_v_deriv(p, tau);
    let db = -(p as f64) * v2.powi(pi32 - 1) * cubic_v_deriv(p, TWO_PI - tau);
    let denom = a + b;
    (TWO_PI * (da * b - a * db) / (denom * denom)).max(0.0)
}

/// Graded map of order p (see [`ck_map`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradedMap {
    pub p: u32,
}

impl GradedMap {
    pub fn new(p: u32) -> Self {
        assert!(p >= 2, "grading order must be at least 2");
        Self { p }
    }

    #[inline]
    pub fn value(&self, tau: f64) -> f64 {
        ck_map(self.p, tau)
    }

    #[inline]
    pub fn deriv(&self, tau: f64) -> f64 {
        ck_map_deriv(self.p, tau)
    }
}

/// Which ends of a parameter direction lie on a geometric edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EdgeFlag {
    #[default]
    None,
    BothEnds,
    LowEndOnly,
    HighEndOnly,
}

impl EdgeFlag {
    /// Does this flag mark the end at s = -1 (`low`) or s = +1 (`high`)?
    pub fn flags_low(self) -> bool {
        matches!(self, EdgeFlag::BothEnds | EdgeFlag::LowEndOnly)
    }

    pub fn flags_high(self) -> bool {
        matches!(self, EdgeFlag::BothEnds | EdgeFlag::HighEndOnly)
    }
}

/// Edge change of variables u = w(s) on [-1, 1] and its derivative du/ds.
///
/// The derivative vanishes to order p−1 at flagged endpoints and is strictly
/// positive elsewhere; the unflagged case is the identity.
pub fn edge_map(flag: EdgeFlag, p: u32, s: f64) -> (f64, f64) {
    debug_assert!(s.abs() <= 1.0 + 1e-12);
    let (u, du) = match flag {
        EdgeFlag::None => (s, 1.0),
        EdgeFlag::BothEnds => {
            let arg = PI * (s + 1.0);
            (-1.0 + ck_map(p, arg) / PI, ck_map_deriv(p, arg))
        }
        EdgeFlag::LowEndOnly => {
            let arg = 0.5 * PI * (s + 1.0);
            (-1.0 + 2.0 / PI * ck_map(p, arg), ck_map_deriv(p, arg))
        }
        EdgeFlag::HighEndOnly => {
            let arg = PI + 0.5 * PI * (s + 1.0);
            (-3.0 + 2.0 / PI * ck_map(p, arg), ck_map_deriv(p, arg))
        }
    };
    (u.clamp(-1.0, 1.0), du)
}

/// Singular change of variables u = w_α(τ) on [-1, 1].
///
/// Maps [-1, 1] onto itself with w_α(±1) = ±1 and a derivative that vanishes
/// (to order p−1) exactly at the preimage of α: τ = 0 for interior α, or the
/// matching endpoint for α = ±1. Targets within 1e-12 of ±1 take the
/// endpoint branches, since the interior branch degenerates there.
pub fn singular_map(alpha: f64, p: u32, tau: f64) -> (f64, f64) {
    debug_assert!(alpha.abs() <= 1.0 + 1e-12);
    debug_assert!(tau.abs() <= 1.0 + 1e-12);
    const ENDPOINT_TOL: f64 = 1e-12;
    let (u, du) = if alpha >= 1.0 - ENDPOINT_TOL {
        let arg = 0.5 * PI * (1.0 - tau).abs();
        (
            alpha - (1.0 + alpha) / PI * ck_map(p, arg),
            0.5 * (1.0 + alpha) * ck_map_deriv(p, arg),
        )
    } else if alpha <= -1.0 + ENDPOINT_TOL {
        let arg = 0.5 * PI * (tau + 1.0).abs();
        (
            alpha + (1.0 - alpha) / PI * ck_map(p, arg),
            0.5 * (1.0 - alpha) * ck_map_deriv(p, arg),
        )
    } else if tau == 0.0 {
        (alpha, 0.0)
    } else {
        let sgn = if tau > 0.0 { 1.0 } else { -1.0 };
        let arg = PI * tau.abs();
        (
            alpha + (sgn - alpha) / PI * ck_map(p, arg),
            (1.0 - alpha * sgn) * ck_map_deriv(p, arg),
        )
    };
    (u.clamp(-1.0, 1.0), du)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn ck_fixed_points() {
        for p in 2..=8 {
            assert!(ck_map(p, 0.0).abs() < 1e-15);
            assert!((ck_map(p, PI) - PI).abs() < 1e-13);
            assert!((ck_map(p, TWO_PI) - TWO_PI).abs() < 1e-13);
            assert!(ck_map_deriv(p, 0.0).abs() < 1e-15);
            assert!(ck_map_deriv(p, TWO_PI).abs() < 1e-15);
        }
    }

    #[test]
    fn ck_monotone_dense_sampling() {
        for p in [2, 4, 6] {
            let mut prev = 0.0;
            for i in 0..=100_000 {
                let tau = TWO_PI * i as f64 / 100_000.0;
                let w = ck_map(p, tau);
                assert!(w >= prev - 1e-14, "p={p} tau={tau}");
                prev = w;
            }
        }
    }

    #[test]
    fn ck_deriv_matches_finite_differences() {
        for p in [2, 3, 4, 6] {
            for i in 1..40 {
                let tau = TWO_PI * i as f64 / 40.0;
                let exact = ck_map_deriv(p, tau.min(TWO_PI - 1e-3));
                let fd = central_diff(|t| ck_map(p, t), tau.min(TWO_PI - 1e-3), 1e-6);
                assert!(
                    (exact - fd).abs() <= 1e-7 * exact.abs().max(1.0),
                    "p={p} tau={tau}: {exact} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn ck_endpoint_derivatives_vanish_to_order_p_minus_1() {
        // Estimate w(τ) ~ c τ^p near 0 by a log-log slope; the observed order
        // must be at least p (so derivatives 1..p-1 vanish).
        for p in [2, 4, 6] {
            let t1 = 1e-3;
            let t2 = 2e-3;
            let slope = (ck_map(p, t2) / ck_map(p, t1)).ln() / (t2 / t1).ln();
            assert!(
                (slope - p as f64).abs() < 0.05,
                "p={p}: observed order {slope}"
            );
        }
    }

    #[test]
    fn edge_map_identity_case() {
        for s in [-1.0, -0.3, 0.0, 0.99] {
            assert_eq!(edge_map(EdgeFlag::None, 4, s), (s, 1.0));
        }
    }

    #[test]
    fn edge_map_both_ends_endpoints() {
        for p in [2, 4] {
            let (u, du) = edge_map(EdgeFlag::BothEnds, p, -1.0);
            assert!((u + 1.0).abs() < 1e-15 && du.abs() < 1e-15);
            let (u, du) = edge_map(EdgeFlag::BothEnds, p, 1.0);
            assert!((u - 1.0).abs() < 1e-13 && du.abs() < 1e-13);
        }
    }

    #[test]
    fn edge_map_single_end_cases() {
        // low-end-only: clustered at s=-1, plain at s=+1.
        let (u, du) = edge_map(EdgeFlag::LowEndOnly, 4, -1.0);
        assert!((u + 1.0).abs() < 1e-15 && du.abs() < 1e-15);
        let (u, du) = edge_map(EdgeFlag::LowEndOnly, 4, 1.0);
        assert!((u - 1.0).abs() < 1e-13);
        assert!(du > 0.1, "derivative should stay positive at unflagged end");
        // high-end-only mirrors it.
        let (u, du) = edge_map(EdgeFlag::HighEndOnly, 4, 1.0);
        assert!((u - 1.0).abs() < 1e-13 && du.abs() < 1e-13);
        let (u, du) = edge_map(EdgeFlag::HighEndOnly, 4, -1.0);
        assert!((u + 1.0).abs() < 1e-13);
        assert!(du > 0.1);
    }

    #[test]
    fn edge_map_derivative_matches_fd() {
        for flag in [EdgeFlag::BothEnds, EdgeFlag::LowEndOnly, EdgeFlag::HighEndOnly] {
            for p in [2, 4] {
                for i in 1..20 {
                    let s = -0.95 + 1.9 * i as f64 / 20.0;
                    let (_, du) = edge_map(flag, p, s);
                    let fd = central_diff(|x| edge_map(flag, p, x).0, s, 1e-6);
                    assert!(
                        (du - fd).abs() <= 1e-7 * du.abs().max(1.0),
                        "{flag:?} p={p} s={s}: {du} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn singular_map_interior_alpha() {
        let (u, du) = singular_map(0.3, 6, 0.0);
        assert_eq!((u, du), (0.3, 0.0));
        let (u, _) = singular_map(0.3, 6, 1.0);
        assert!((u - 1.0).abs() < 1e-13);
        let (u, _) = singular_map(0.3, 6, -1.0);
        assert!((u + 1.0).abs() < 1e-13);
    }

    #[test]
    fn singular_map_endpoint_alpha() {
        let (u, du) = singular_map(1.0, 6, 1.0);
        assert!((u - 1.0).abs() < 1e-15 && du.abs() < 1e-15);
        let (u, du) = singular_map(1.0, 6, -1.0);
        assert!((u + 1.0).abs() < 1e-13);
        assert!(du > 0.0);
        let (u, du) = singular_map(-1.0, 6, -1.0);
        assert!((u + 1.0).abs() < 1e-15 && du.abs() < 1e-15);
        let (u, _) = singular_map(-1.0, 6, 1.0);
        assert!((u - 1.0).abs() < 1e-13);
    }

    #[test]
    fn singular_map_monotone_and_surjective() {
        // 50 alphas including the endpoint branches, 10^4 sample pairs each.
        for ia in 0..50 {
            let alpha = -1.0 + 2.0 * ia as f64 / 49.0;
            for p in [4, 6] {
                let (lo, _) = singular_map(alpha, p, -1.0);
                let (hi, _) = singular_map(alpha, p, 1.0);
                assert!((lo + 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
                let mut prev = -1.0;
                for i in 0..=10_000 {
                    let tau = -1.0 + 2.0 * i as f64 / 10_000.0;
                    let (u, du) = singular_map(alpha, p, tau);
                    assert!(u >= prev - 1e-13, "alpha={alpha} tau={tau}");
                    assert!(du >= 0.0);
                    prev = u;
                }
            }
        }
    }

    #[test]
    fn singular_map_derivative_matches_fd() {
        for &alpha in &[-1.0, -0.62, 0.0, 0.3, 0.97, 1.0] {
            for i in 1..40 {
                let tau = -0.98 + 1.96 * i as f64 / 40.0;
                if tau.abs() < 0.02 {
                    continue; // derivative kink of |τ| at 0
                }
                let (_, du) = singular_map(alpha, 5, tau);
                let fd = central_diff(|t| singular_map(alpha, 5, t).0, tau, 1e-7);
                assert!(
                    (du - fd).abs() <= 1e-6 * du.abs().max(1.0),
                    "alpha={alpha} tau={tau}: {du} vs {fd}"
                );
            }
        }
    }

    /// Adaptive Simpson on a smooth integrand.
    fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        let whole = simpson(f, a, b);
        let m = 0.5 * (a + b);
        let halves = simpson(f, a, m) + simpson(f, m, b);
        if depth == 0 || (whole - halves).abs() < 15.0 * tol {
            halves + (halves - whole) / 15.0
        } else {
            adaptive_simpson(f, a, m, 0.5 * tol, depth - 1)
                + adaptive_simpson(f, m, b, 0.5 * tol, depth - 1)
        }
    }

    /// ∫_{-1}^{1} g(u) du for g(u) = |u-α|^{-1/2} s(u), via the square-root
    /// substitution u = α ± t² that removes the singularity on each side.
    fn integrate_inv_sqrt(alpha: f64, smooth: &impl Fn(f64) -> f64) -> f64 {
        let right = adaptive_simpson(
            &|t: f64| 2.0 * smooth(alpha + t * t),
            0.0,
            (1.0 - alpha).sqrt(),
            1e-12,
            40,
        );
        let left = adaptive_simpson(
            &|t: f64| 2.0 * smooth(alpha - t * t),
            0.0,
            (1.0 + alpha).sqrt(),
            1e-12,
            40,
        );
        left + right
    }

    fn transformed_integral(
        alpha: f64,
        p: u32,
        n: usize,
        smooth: &impl Fn(f64) -> f64,
    ) -> f64 {
        use crate::quadrature::FejerRule;
        let rule = FejerRule::new(n);
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&tau, &w)| {
                let (u, du) = singular_map(alpha, p, tau);
                // Near a flagged end, u - alpha can underflow to exactly 0
                // for nodes whose true displacement is ~1e-19; the integrand
                // limit there is 0 (it vanishes like |τ-τ0|^{p/2-1}).
                if du == 0.0 || u == alpha {
                    0.0
                } else {
                    (u - alpha).abs().powf(-0.5) * smooth(u) * du * w
                }
            })
            .sum()
    }

    #[test]
    fn singular_map_smooths_edge_singularity() {
        // ∫ g(u) du == ∫ g(w(τ)) w'(τ) dτ for g = |u-α|^{-1/2}·smooth with
        // the singularity at an interval end, the case the edge maps are
        // built for. The transformed integrand vanishes algebraically at
        // that end and a plain Fejér rule resolves it.
        for &alpha in &[-1.0, 1.0] {
            for smooth in [|u: f64| 1.0 + 0.0 * u, |u: f64| (1.3 * u).cos()] {
                let exact = integrate_inv_sqrt(alpha, &smooth);
                let approx = transformed_integral(alpha, 4, 220, &smooth);
                let rel = (approx - exact).abs() / exact.abs();
                assert!(rel < 1e-6, "alpha={alpha}: rel err {rel}");
            }
        }
    }

    #[test]
    fn singular_map_smooths_interior_singularity() {
        // Interior singular point: the transformed integrand keeps a weak
        // |τ|^{p/2-1} kink at the preimage, so convergence is algebraic and
        // the rule must be larger for the same tolerance.
        for &alpha in &[-0.4, 0.0, 0.55] {
            for smooth in [|u: f64| 1.0 + 0.0 * u, |u: f64| (1.3 * u).cos()] {
                let exact = integrate_inv_sqrt(alpha, &smooth);
                let approx = transformed_integral(alpha, 4, 2400, &smooth);
                let rel = (approx - exact).abs() / exact.abs();
                assert!(rel < 1e-6, "alpha={alpha}: rel err {rel}");
            }
        }
    }
}
