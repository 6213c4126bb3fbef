//! The discretized boundary integral operator, applied matrix-free.
//!
//! Far interactions re-evaluate the kernel against the edge-resolved density
//! ψ under the plain tensor Fejér rule; near/self interactions contract the
//! per-patch Chebyshev coefficients of ψ with the precomputed β weights; the
//! combined-field formulation adds the ½φ jump term.

use crate::error::Error;
use crate::geometry::SurfaceDiscretization;
use crate::kernel::{KernelKind, KernelVariant};
use crate::precompute::{NearFieldPlan, PrecomputedWeights};
use crate::quadrature::{cheb_transform_2d, ChebCoeffGrid};
use crate::Result;
use num_complex::Complex64;
use rayon::prelude::*;

/// A surface density: nodal values of φ, the edge-resolved ψ = w'_u w'_v φ,
/// and the per-patch Chebyshev coefficients of ψ.
#[derive(Debug, Clone)]
pub struct Density {
    pub nodal: Vec<Complex64>,
    pub psi: Vec<Complex64>,
    pub coeffs: Vec<ChebCoeffGrid>,
}

/// Build a density from nodal φ values.
pub fn build_density(disc: &SurfaceDiscretization, nodal: &[Complex64]) -> Density {
    assert_eq!(nodal.len(), disc.node_count(), "nodal vector length");
    let psi: Vec<Complex64> = nodal
        .iter()
        .zip(&disc.nodes.cov_factor)
        .map(|(&phi, &c)| phi * c)
        .collect();
    let coeffs = transform_per_patch(disc, &psi);
    Density {
        nodal: nodal.to_vec(),
        psi,
        coeffs,
    }
}

/// Build a density from nodal values of the edge-resolved ψ; φ is recovered
/// pointwise (the change-of-variable factors are strictly positive at the
/// open Fejér nodes).
pub fn build_density_from_psi(disc: &SurfaceDiscretization, psi: &[Complex64]) -> Density {
    assert_eq!(psi.len(), disc.node_count(), "nodal vector length");
    let nodal: Vec<Complex64> = psi
        .iter()
        .zip(&disc.nodes.cov_factor)
        .map(|(&p, &c)| p / c)
        .collect();
    let coeffs = transform_per_patch(disc, psi);
    Density {
        nodal,
        psi: psi.to_vec(),
        coeffs,
    }
}

fn transform_per_patch(disc: &SurfaceDiscretization, psi: &[Complex64]) -> Vec<ChebCoeffGrid> {
    disc.patches
        .par_iter()
        .map(|pd| {
            cheb_transform_2d(
                &psi[pd.first_node..pd.first_node + pd.node_count()],
                pd.n_u,
                pd.n_v,
            )
        })
        .collect()
}

/// Far (non-adjacent) part: for every node ℓ, the plain Fejér quadrature sum
/// over all patches whose near set does not contain ℓ.
pub fn apply_far(
    plan: &NearFieldPlan,
    disc: &SurfaceDiscretization,
    kind: KernelKind,
    density: &Density,
) -> Vec<Complex64> {
    let psi = &density.psi;
    (0..disc.node_count())
        .into_par_iter()
        .map(|target| {
            let r = disc.nodes.pos[target];
            let mut skip = plan.target_patches[target].iter().peekable();
            let mut acc = Complex64::ZERO;
            for (q, pd) in disc.patches.iter().enumerate() {
                if let Some(&&(nq, _)) = skip.peek() {
                    if nq as usize == q {
                        skip.next();
                        continue;
                    }
                }
                let lo = pd.first_node;
                let hi = lo + pd.node_count();
                for src in lo..hi {
                    acc += kind.eval(r, disc.nodes.pos[src], disc.nodes.normal[src])
                        * (disc.nodes.smooth_weight[src] * psi[src]);
                }
            }
            acc
        })
        .collect()
}

/// Near/self part: contract the per-patch Chebyshev coefficients with the
/// precomputed β grids. Returns a full-length vector; contributions
/// accumulate in ascending patch order per target, so the reduction order is
/// fixed for any thread count.
pub fn apply_near(
    plan: &NearFieldPlan,
    weights: &PrecomputedWeights,
    coeffs: &[ChebCoeffGrid],
) -> Result<Vec<Complex64>> {
    let stride = weights.n_u * weights.n_v;
    for (q, (set, ws)) in plan.near.iter().zip(&weights.patches).enumerate() {
        if ws.data.len() != set.targets.len() * stride {
            let have = ws.data.len() / stride;
            let node = set.targets.get(have).map_or(0, |t| t.node);
            return Err(Error::MissingWeight { patch: q, node });
        }
    }
    Ok((0..plan.target_patches.len())
        .into_par_iter()
        .map(|target| {
            let mut acc = Complex64::ZERO;
            for &(q, idx) in &plan.target_patches[target] {
                let grid = weights.patches[q as usize].grid(idx as usize);
                let a = &coeffs[q as usize].coeffs;
                debug_assert_eq!(a.len(), grid.len());
                let mut pair = Complex64::ZERO;
                for (av, bv) in a.iter().zip(grid) {
                    pair += av * bv;
                }
                acc += pair;
            }
            acc
        })
        .collect())
}

/// Full operator: far + near parts, plus the ½φ jump term for the
/// combined-field (second-kind) formulation.
pub fn apply_operator(
    kind: KernelKind,
    disc: &SurfaceDiscretization,
    plan: &NearFieldPlan,
    weights: &PrecomputedWeights,
    density: &Density,
) -> Result<Vec<Complex64>> {
    if weights.kind != kind {
        return Err(Error::Config(format!(
            "weights were precomputed for {:?} at k = {}, operator wants {:?} at k = {}",
            weights.kind.variant, weights.kind.k, kind.variant, kind.k
        )));
    }
    let mut out = apply_far(plan, disc, kind, density);
    let near = apply_near(plan, weights, &density.coeffs)?;
    for (o, n) in out.iter_mut().zip(near) {
        *o += n;
    }
    if kind.variant == KernelVariant::CombinedField {
        for (o, &phi) in out.iter_mut().zip(&density.nodal) {
            *o += 0.5 * phi;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{discretize, make_cube_atlas, make_sphere_atlas, parse_patch_file};
    use crate::precompute::{build_plan, compute_weights};
    use crate::quadrature::{cheb_eval, cheb_eval_2d, FejerRule};
    use rand::{Rng, SeedableRng};

    fn zeros(n: usize) -> Vec<Complex64> {
        vec![Complex64::ZERO; n]
    }

    #[test]
    fn zero_density_maps_to_zero() {
        let atlas = make_sphere_atlas(1.0, 1);
        let disc = discretize(&atlas, 5, 5).unwrap();
        let plan = build_plan(&disc, 0.5);
        let kind = KernelKind::combined_field(1.0);
        let weights = compute_weights(&disc, &plan, kind, 20, 6).unwrap();
        let density = build_density(&disc, &zeros(disc.node_count()));
        let out = apply_operator(kind, &disc, &plan, &weights, &density).unwrap();
        assert!(out.iter().all(|c| c.norm() == 0.0));

        let kind_s = KernelKind::single_layer(1.0);
        let weights_s = compute_weights(&disc, &plan, kind_s, 20, 6).unwrap();
        let out = apply_operator(kind_s, &disc, &plan, &weights_s, &density).unwrap();
        assert!(out.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn far_part_matches_adaptive_panel_quadrature() {
        // Two flat unit panels far apart; unit density on the first, target
        // nodes on the second; k → 0 single layer is the classic panel
        // potential.
        let text = "\
patch
1 1
0 0 0  0 1 0  1 0 0  1 1 0
none none
4
patch
1 1
4 0 1  4 1 1  5 0 1  5 1 1
none none
4
";
        let atlas = parse_patch_file(text).unwrap();
        let disc = discretize(&atlas, 10, 10).unwrap();
        let plan = build_plan(&disc, 0.5);
        let kind = KernelKind::single_layer(0.0);
        let mut phi = zeros(disc.node_count());
        for i in 0..100 {
            phi[i] = Complex64::new(1.0, 0.0);
        }
        let density = build_density(&disc, &phi);
        let out = apply_far(&plan, &disc, kind, &density);

        // Adaptive iterated Simpson for ∬ dσ(r') / (4π |r − r'|).
        let target = disc.nodes.pos[disc.patches[1].node(3, 7)];
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        fn adsimp(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
            let whole = simpson(f, a, b);
            let m = 0.5 * (a + b);
            let halves = simpson(f, a, m) + simpson(f, m, b);
            if depth == 0 || (whole - halves).abs() < 15.0 * tol {
                halves + (halves - whole) / 15.0
            } else {
                adsimp(f, a, m, 0.5 * tol, depth - 1) + adsimp(f, m, b, 0.5 * tol, depth - 1)
            }
        }
        let inner = |y: f64| {
            let f = |x: f64| {
                let d = [target[0] - x, target[1] - y, target[2]];
                1.0 / (4.0 * std::f64::consts::PI * crate::vec3::norm(d))
            };
            adsimp(&f, 0.0, 1.0, 1e-13, 30)
        };
        let oracle = adsimp(&inner, 0.0, 1.0, 1e-13, 30);
        let got = out[disc.patches[1].node(3, 7)].re;
        assert!(
            (got - oracle).abs() < 1e-10,
            "panel potential {got} vs {oracle}"
        );
    }

    #[test]
    fn far_quadrature_self_converges_when_doubling_n() {
        // Potential of a smooth density over one panel at a fixed distant
        // point, evaluated with the same quadrature apply_far uses.
        let atlas =
            parse_patch_file("patch\n1 1\n0 0 0  0 1 0  1 0 0  1 1 0\nnone none\n4\n").unwrap();
        let kind = KernelKind::combined_field(2.0);
        let target = [3.0, -1.0, 2.5];
        let eval = |n: usize| {
            let disc = discretize(&atlas, n, n).unwrap();
            let phi: Vec<Complex64> = (0..disc.node_count())
                .map(|i| {
                    let p = disc.nodes.pos[i];
                    Complex64::new((1.3 * p[0]).cos(), 0.7 * p[1])
                })
                .collect();
            let density = build_density(&disc, &phi);
            let mut acc = Complex64::ZERO;
            for src in 0..disc.node_count() {
                acc += kind.eval(target, disc.nodes.pos[src], disc.nodes.normal[src])
                    * (disc.nodes.smooth_weight[src] * density.psi[src]);
            }
            acc
        };
        let (a, b) = (eval(12), eval(24));
        assert!((a - b).norm() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn single_mode_density_contracts_to_beta_column() {
        let atlas = make_sphere_atlas(1.0, 1);
        let disc = discretize(&atlas, 6, 6).unwrap();
        let plan = build_plan(&disc, 0.5);
        let kind = KernelKind::single_layer(1.0);
        let weights = compute_weights(&disc, &plan, kind, 24, 6).unwrap();
        // ψ = T_1(s) on patch 0, zero elsewhere.
        let pd = &disc.patches[0];
        let mut psi = zeros(disc.node_count());
        for i in 0..pd.n_u {
            for j in 0..pd.n_v {
                psi[pd.node(i, j)] = Complex64::new(cheb_eval(1, pd.s[i]), 0.0);
            }
        }
        let density = build_density_from_psi(&disc, &psi);
        let near = apply_near(&plan, &weights, &density.coeffs).unwrap();
        for (idx, t) in plan.near[0].targets.iter().enumerate() {
            // Contributions from other patches vanish (zero coefficients),
            // so the near value is exactly β^0_{1,0} of this pair.
            let expect = weights.patches[0].grid(idx)[weights.n_v]; // (n,m) = (1,0)
            let got = near[t.node];
            assert!(
                (got - expect).norm() <= 1e-12 * expect.norm().max(1.0),
                "node {}: {got} vs {expect}",
                t.node
            );
        }
    }

    #[test]
    fn jump_term_isolated_in_combined_field() {
        let atlas = make_sphere_atlas(1.0, 1);
        let disc = discretize(&atlas, 5, 5).unwrap();
        let plan = build_plan(&disc, 0.5);
        let kind = KernelKind::combined_field(1.7);
        let weights = compute_weights(&disc, &plan, kind, 20, 6).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let phi: Vec<Complex64> = (0..disc.node_count())
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let density = build_density(&disc, &phi);
        let full = apply_operator(kind, &disc, &plan, &weights, &density).unwrap();
        let far = apply_far(&plan, &disc, kind, &density);
        let near = apply_near(&plan, &weights, &density.coeffs).unwrap();
        for ((f, (fa, ne)), &p) in full.iter().zip(far.iter().zip(&near)).zip(&phi) {
            let jump = f - fa - ne;
            assert!((jump - 0.5 * p).norm() < 1e-14);
        }
    }

    #[test]
    fn operator_is_linear() {
        let atlas = make_sphere_atlas(1.0, 1);
        let disc = discretize(&atlas, 4, 4).unwrap();
        let plan = build_plan(&disc, 0.5);
        let kind = KernelKind::combined_field(1.0);
        let weights = compute_weights(&disc, &plan, kind, 16, 6).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let mut rand_vec = || -> Vec<Complex64> {
            (0..disc.node_count())
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect()
        };
        let phi1 = rand_vec();
        let phi2 = rand_vec();
        let alpha = Complex64::new(0.3, -1.2);
        let beta = Complex64::new(-0.8, 0.45);
        let combo: Vec<Complex64> = phi1
            .iter()
            .zip(&phi2)
            .map(|(&a, &b)| alpha * a + beta * b)
            .collect();
        let apply = |phi: &[Complex64]| {
            apply_operator(kind, &disc, &plan, &weights, &build_density(&disc, phi)).unwrap()
        };
        let lhs = apply(&combo);
        let r1 = apply(&phi1);
        let r2 = apply(&phi2);
        let scale: f64 = lhs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for i in 0..lhs.len() {
            let rhs = alpha * r1[i] + beta * r2[i];
            assert!((lhs[i] - rhs).norm() < 1e-13 * scale);
        }
    }

    #[test]
    fn build_density_identity_without_flags() {
        let atlas = make_sphere_atlas(1.0, 1);
        let disc = discretize(&atlas, 6, 6).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let phi: Vec<Complex64> = (0..disc.node_count())
            .map(|_| Complex64::new(rng.random(), rng.random()))
            .collect();
        let density = build_density(&disc, &phi);
        assert_eq!(density.nodal, density.psi);
    }

    #[test]
    fn build_density_applies_cov_factors_on_cube() {
        let atlas = make_cube_atlas(2.0);
        let disc = discretize(&atlas, 8, 8).unwrap();
        let phi = vec![Complex64::new(1.0, 0.0); disc.node_count()];
        let density = build_density(&disc, &phi);
        for node in 0..disc.node_count() {
            let expect = disc.nodes.cov_factor[node];
            assert!((density.psi[node] - expect).norm() < 1e-15);
        }
        // The boundary-nearest node carries a small p-dependent factor.
        let pd = &disc.patches[0];
        let corner = density.psi[pd.node(0, 0)].re;
        let center = density.psi[pd.node(4, 4)].re;
        assert!(corner < 1e-4 * center, "corner {corner} center {center}");
    }

    #[test]
    fn density_coefficients_reproduce_psi_at_nodes() {
        let atlas = make_cube_atlas(2.0);
        let disc = discretize(&atlas, 9, 9).unwrap();
        let rule = FejerRule::new(9);
        let phi: Vec<Complex64> = (0..disc.node_count())
            .map(|i| {
                let p = disc.nodes.pos[i];
                Complex64::new((1.2 * p[0] + 0.3 * p[1]).sin(), (0.8 * p[2]).cos())
            })
            .collect();
        let density = build_density(&disc, &phi);
        let mut max_err = 0.0_f64;
        for (q, pd) in disc.patches.iter().enumerate() {
            for (i, &s) in rule.nodes.iter().enumerate() {
                for (j, &t) in rule.nodes.iter().enumerate() {
                    let got = cheb_eval_2d(&density.coeffs[q], s, t);
                    let expect = density.psi[pd.node(i, j)];
                    max_err = max_err.max((got - expect).norm());
                }
            }
        }
        assert!(max_err < 1e-12, "roundtrip err {max_err:.3e}");
    }

    #[test]
    fn missing_weights_reported_with_location() {
        let atlas = make_sphere_atlas(1.0, 1);
        let disc = discretize(&atlas, 4, 4).unwrap();
        let plan = build_plan(&disc, 0.5);
        let kind = KernelKind::single_layer(1.0);
        let mut weights = compute_weights(&disc, &plan, kind, 16, 6).unwrap();
        // Drop one grid from patch 2.
        let stride = weights.patches[2].stride;
        let truncated = weights.patches[2].data.len() - stride;
        weights.patches[2].data.truncate(truncated);
        let density = build_density(&disc, &zeros(disc.node_count()));
        match apply_near(&plan, &weights, &density.coeffs) {
            Err(Error::MissingWeight { patch: 2, node }) => {
                let last = plan.near[2].targets.last().unwrap().node;
                assert_eq!(node, last);
            }
            other => panic!("expected missing-weight error, got {other:?}"),
        }
    }
}
