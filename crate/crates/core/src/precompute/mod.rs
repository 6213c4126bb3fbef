//! Near-field classification, closest-point projection, and precomputation
//! of the kernel–Chebyshev moment weights β.
//!
//! For every patch q the plan lists the targets that need singular treatment:
//! the patch's own nodes plus all nodes within δ·diam(q) of some node of q.
//! For each such pair the singular quadrature clusters its nodes at the
//! projection of the target onto the (edge-resolved) patch parameter square,
//! and the density-independent moments
//! β_{n,m} = ∬ K(r_ℓ, x(w_u(s), w_v(t))) J T_n(s) T_m(t) ds dt
//! are evaluated once and contracted against Chebyshev coefficients at apply
//! time.

mod cache;

pub use cache::{cache_load, cache_store, CacheKey};

use crate::error::Error;
use crate::geometry::{Patch, SurfaceDiscretization};
use crate::kernel::KernelKind;
use crate::maps::singular_map;
use crate::quadrature::FejerRule;
use crate::vec3::{dist, norm, sub, Vec3};
use crate::Result;
use num_complex::Complex64;
use rayon::prelude::*;

/// Projection of a target point onto a patch, in edge-resolved parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    /// |r − x(w_u(u), w_v(v))| at the minimizer.
    pub distance: f64,
}

/// One target requiring singular treatment against a given patch.
#[derive(Debug, Clone, PartialEq)]
pub struct NearTarget {
    /// Global node index of the target.
    pub node: usize,
    /// Distance from the target to the nearest discretization node of the
    /// patch (the classification metric; 0 for the patch's own nodes).
    pub node_distance: f64,
    pub projection: Option<Projection>,
}

/// Near set of one patch, sorted by target node index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PatchNearSet {
    pub targets: Vec<NearTarget>,
}

/// Which targets each patch treats as singular/near-singular, plus the
/// per-target reverse index used for deterministic accumulation.
#[derive(Debug, Clone, PartialEq)]
pub struct NearFieldPlan {
    pub delta: f64,
    pub near: Vec<PatchNearSet>,
    /// For every global node, the ascending list of patches whose near set
    /// contains it, paired with the position inside that near set.
    pub target_patches: Vec<Vec<(u32, u32)>>,
}

impl NearFieldPlan {
    /// Rebuild the reverse index from the per-patch near sets.
    pub(crate) fn rebuild_reverse_index(
        near: &[PatchNearSet],
        n_nodes: usize,
    ) -> Vec<Vec<(u32, u32)>> {
        let mut rev = vec![Vec::new(); n_nodes];
        for (q, set) in near.iter().enumerate() {
            for (idx, t) in set.targets.iter().enumerate() {
                rev[t.node].push((q as u32, idx as u32));
            }
        }
        rev
    }

    /// Is node ℓ in the near set of patch q?
    pub fn is_near(&self, q: usize, node: usize) -> bool {
        self.target_patches[node]
            .iter()
            .any(|&(p, _)| p as usize == q)
    }

    pub fn pair_count(&self) -> usize {
        self.near.iter().map(|s| s.targets.len()).sum()
    }

    /// Restriction to a smaller threshold δ' ≤ δ: keeps exactly the targets
    /// that `classify_near(disc, δ')` would produce (the classification
    /// metric is stored per target). Weight grids are per (patch, target)
    /// and independent of δ, so a matching [`PrecomputedWeights`] can be
    /// restricted alongside with [`PrecomputedWeights::restricted_to`].
    pub fn restricted(&self, disc: &SurfaceDiscretization, delta: f64) -> NearFieldPlan {
        assert!(delta <= self.delta + 1e-15, "can only shrink a plan");
        let near: Vec<PatchNearSet> = self
            .near
            .iter()
            .zip(&disc.patches)
            .map(|(set, pd)| PatchNearSet {
                targets: set
                    .targets
                    .iter()
                    .filter(|t| t.node_distance < delta * pd.diameter)
                    .cloned()
                    .collect(),
            })
            .collect();
        let target_patches = Self::rebuild_reverse_index(&near, disc.node_count());
        NearFieldPlan {
            delta,
            near,
            target_patches,
        }
    }
}

/// Classify targets into near/far sets per patch. Projection fields are left
/// unfilled; [`fill_projections`] or [`build_plan`] complete them.
///
/// A node ℓ outside patch q belongs to N_q iff its distance to the nearest
/// node of q is below δ·diam(q); the patch's own nodes always belong.
pub fn classify_near(disc: &SurfaceDiscretization, delta: f64) -> NearFieldPlan {
    assert!(delta > 0.0, "near threshold must be positive");
    let near: Vec<PatchNearSet> = disc
        .patches
        .par_iter()
        .map(|pd| {
            let threshold = delta * pd.diameter;
            let node_range = pd.first_node..pd.first_node + pd.node_count();
            let mut targets = Vec::with_capacity(pd.node_count());
            for node in 0..disc.node_count() {
                if node_range.contains(&node) {
                    targets.push(NearTarget {
                        node,
                        node_distance: 0.0,
                        projection: None,
                    });
                    continue;
                }
                let p = disc.nodes.pos[node];
                // Lower bound on the node distance via the bounding sphere.
                if dist(p, pd.center) - pd.bounding_radius >= threshold {
                    continue;
                }
                let mut best = f64::INFINITY;
                for other in node_range.clone() {
                    let d = dist(p, disc.nodes.pos[other]);
                    if d < best {
                        best = d;
                    }
                }
                if best < threshold {
                    targets.push(NearTarget {
                        node,
                        node_distance: best,
                        projection: None,
                    });
                }
            }
            targets.sort_by_key(|t| t.node);
            PatchNearSet { targets }
        })
        .collect();

    let target_patches = NearFieldPlan::rebuild_reverse_index(&near, disc.node_count());
    NearFieldPlan {
        delta,
        near,
        target_patches,
    }
}

/// Fill in the closest-point projections for every near pair. Self nodes
/// project to their own parameters; off-patch targets run the coordinate
/// golden-section descent.
pub fn fill_projections(disc: &SurfaceDiscretization, plan: &mut NearFieldPlan) {
    let filled: Vec<Vec<NearTarget>> = plan
        .near
        .par_iter()
        .enumerate()
        .map(|(q, set)| {
            let pd = &disc.patches[q];
            let patch = &disc.atlas.patches[q];
            set.targets
                .iter()
                .map(|t| {
                    let mut t = t.clone();
                    if disc.nodes.patch_of[t.node] as usize == q {
                        let local = t.node - pd.first_node;
                        let (i, j) = (local / pd.n_v, local % pd.n_v);
                        t.projection = Some(Projection {
                            u: pd.s[i],
                            v: pd.t[j],
                            distance: 0.0,
                        });
                    } else {
                        // Initialize at the nearest node of the patch.
                        let p = disc.nodes.pos[t.node];
                        let mut best = (0usize, 0usize);
                        let mut best_d = f64::INFINITY;
                        for i in 0..pd.n_u {
                            for j in 0..pd.n_v {
                                let d = dist(p, disc.nodes.pos[pd.node(i, j)]);
                                if d < best_d {
                                    best_d = d;
                                    best = (i, j);
                                }
                            }
                        }
                        t.projection = Some(project_point_from(
                            patch,
                            p,
                            (pd.s[best.0], pd.t[best.1]),
                        ));
                    }
                    t
                })
                .collect()
        })
        .collect();
    for (set, targets) in plan.near.iter_mut().zip(filled) {
        set.targets = targets;
    }
}

/// Classify and project in one call.
pub fn build_plan(disc: &SurfaceDiscretization, delta: f64) -> NearFieldPlan {
    let mut plan = classify_near(disc, delta);
    fill_projections(disc, &mut plan);
    plan
}

/// Closest point of a patch to `r`, over the edge-resolved parameter square.
///
/// The minimizer is found by cyclic coordinate descent with a golden-section
/// line search per coordinate, initialized from a coarse parameter sample.
pub fn project_point(patch: &Patch, r: Vec3) -> Projection {
    let rule = FejerRule::new(12);
    let mut init = (0.0, 0.0);
    let mut best = f64::INFINITY;
    for &s in &rule.nodes {
        for &t in &rule.nodes {
            let d = dist(patch.eval_resolved(s, t).pos, r);
            if d < best {
                best = d;
                init = (s, t);
            }
        }
    }
    project_point_from(patch, r, init)
}

fn project_point_from(patch: &Patch, r: Vec3, init: (f64, f64)) -> Projection {
    let dist2 = |s: f64, t: f64| {
        let d = sub(patch.eval_resolved(s, t).pos, r);
        crate::vec3::dot(d, d)
    };
    let (mut s, mut t) = init;
    const SWEEP_TOL: f64 = 1e-12;
    const LINE_TOL: f64 = 1e-13;
    for _ in 0..100 {
        let s_new = golden_min(|x| dist2(x, t), -1.0, 1.0, LINE_TOL);
        let t_new = golden_min(|y| dist2(s_new, y), -1.0, 1.0, LINE_TOL);
        let moved = (s_new - s).abs() + (t_new - t).abs();
        s = s_new;
        t = t_new;
        if moved < SWEEP_TOL {
            break;
        }
    }
    Projection {
        u: s,
        v: t,
        distance: dist2(s, t).sqrt(),
    }
}

/// Golden-section search for the minimum of f on [a, b].
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Dense β grids for every near pair of one patch, flattened per target.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchWeightSet {
    /// Grid size per target (n_u · n_v).
    pub stride: usize,
    /// Concatenated grids, one per target, in plan order.
    pub data: Vec<Complex64>,
}

impl PatchWeightSet {
    pub fn grid(&self, target_idx: usize) -> &[Complex64] {
        &self.data[target_idx * self.stride..(target_idx + 1) * self.stride]
    }
}

/// Precomputed kernel–Chebyshev moments for every near pair of the atlas.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputedWeights {
    pub kind: KernelKind,
    pub n_u: usize,
    pub n_v: usize,
    pub n_beta: usize,
    pub p_sing: u32,
    pub patches: Vec<PatchWeightSet>,
}

impl PrecomputedWeights {
    /// Subset matching a restricted plan (see [`NearFieldPlan::restricted`]).
    pub fn restricted_to(&self, full: &NearFieldPlan, sub: &NearFieldPlan) -> PrecomputedWeights {
        let patches = full
            .near
            .iter()
            .zip(&sub.near)
            .zip(&self.patches)
            .map(|((full_set, sub_set), ws)| {
                let mut data = Vec::with_capacity(sub_set.targets.len() * ws.stride);
                let mut it = sub_set.targets.iter().peekable();
                for (idx, t) in full_set.targets.iter().enumerate() {
                    if let Some(next) = it.peek() {
                        if next.node == t.node {
                            data.extend_from_slice(ws.grid(idx));
                            it.next();
                        }
                    }
                }
                assert!(it.next().is_none(), "restricted plan is not a subset");
                PatchWeightSet {
                    stride: ws.stride,
                    data,
                }
            })
            .collect();
        PrecomputedWeights {
            patches,
            ..self.clone()
        }
    }
}

/// One target of a weight computation.
#[derive(Debug, Clone, Copy)]
pub struct WeightTarget {
    pub position: Vec3,
    pub projection: Projection,
    /// Global node index (for error reporting).
    pub node: usize,
    /// For targets lying on the integration patch itself: the target's
    /// original-local coordinates (w_u(ū), w_v(v̄)). Quadrature nodes whose
    /// parameters nearly coincide with these evaluate the kernel through a
    /// second-order parameter-space expansion of r − r', which is free of
    /// the catastrophic cancellation that direct subtraction of two
    /// nearly-equal surface points suffers (the double-layer factor
    /// (r−r')·n' is O(|Δq|²) but naively computed carries O(ε) noise).
    pub self_params: Option<(f64, f64)>,
}

/// Parameter-space radius below which self-pair kernel arguments switch to
/// the Taylor expansion.
const SELF_EXPANSION_RADIUS: f64 = 1e-5;

/// β grids for a single patch and a slice of targets.
///
/// For each target with projection (ū, v̄), quadrature points are
/// s_i = w_ū(x_i), t_j = w_v̄(x_j) with the Fejér nodes x of `rule`, and
/// β_{n,m} = Σ_{j,i} K(r, x(w_u(s_i), w_v(t_j))) J μ_i ν_j ω_i ω_j T_n(s_i) T_m(t_j),
/// evaluated by partial summation over i then j.
pub fn compute_patch_weights(
    patch: &Patch,
    patch_index: usize,
    targets: &[WeightTarget],
    kind: KernelKind,
    n_u: usize,
    n_v: usize,
    rule: &FejerRule,
    p_sing: u32,
) -> Result<Vec<Complex64>> {
    let nb = rule.n;
    let mut out = vec![Complex64::ZERO; targets.len() * n_u * n_v];
    let mut s_arr = vec![0.0; nb];
    let mut mu = vec![0.0; nb];
    let mut t_arr = vec![0.0; nb];
    let mut nu = vec![0.0; nb];
    let mut tn_u = vec![0.0; n_u * nb]; // T_n(s_i), n slow
    let mut tm_v = vec![0.0; n_v * nb];
    let mut f_grid = vec![Complex64::ZERO; nb * nb];
    let mut stage = vec![Complex64::ZERO; n_u * nb];
    let mut cheb_col_u = vec![0.0; n_u];
    let mut cheb_col_v = vec![0.0; n_v];
    let mut mapped_v = vec![0.0; nb];

    for (t_idx, target) in targets.iter().enumerate() {
        let proj = target.projection;
        for (i, &x) in rule.nodes.iter().enumerate() {
            let (s, m) = singular_map(proj.u, p_sing, x);
            s_arr[i] = s;
            mu[i] = m * rule.weights[i];
        }
        for (j, &x) in rule.nodes.iter().enumerate() {
            let (t, n) = singular_map(proj.v, p_sing, x);
            t_arr[j] = t;
            nu[j] = n * rule.weights[j];
        }
        for (i, &s) in s_arr.iter().enumerate() {
            crate::quadrature::cheb_values(s, &mut cheb_col_u);
            for (n, &v) in cheb_col_u.iter().enumerate() {
                tn_u[n * nb + i] = v;
            }
        }
        for (j, &t) in t_arr.iter().enumerate() {
            crate::quadrature::cheb_values(t, &mut cheb_col_v);
            for (m, &v) in cheb_col_v.iter().enumerate() {
                tm_v[m * nb + j] = v;
            }
        }

        // Kernel × geometry factors on the transformed grid.
        for (j, &t) in t_arr.iter().enumerate() {
            mapped_v[j] = patch.edge_map_v(t).0;
        }
        for (i, &s) in s_arr.iter().enumerate() {
            let (u_mapped, _) = patch.edge_map_u(s);
            for j in 0..nb {
                let sp = patch.eval(u_mapped, mapped_v[j]);
                let cr = crate::vec3::cross(sp.du, sp.dv);
                let jac = norm(cr);
                let weight = mu[i] * nu[j];
                let normal = crate::vec3::scale(cr, 1.0 / jac);

                if let Some((tu, tv)) = target.self_params {
                    let dq_u = tu - u_mapped;
                    let dq_v = tv - mapped_v[j];
                    if dq_u * dq_u + dq_v * dq_v
                        < SELF_EXPANSION_RADIUS * SELF_EXPANSION_RADIUS
                    {
                        // r − r' ≈ x_u Δu + x_v Δv + ½(x_uu Δu² + 2x_uv ΔuΔv
                        // + x_vv Δv²), accurate to O(|Δq|³) relative O(Δq²).
                        let (xuu, xuv, xvv) = patch.eval2(u_mapped, mapped_v[j]);
                        let mut delta = [0.0; 3];
                        for a in 0..3 {
                            delta[a] = sp.du[a] * dq_u
                                + sp.dv[a] * dq_v
                                + 0.5
                                    * (xuu[a] * dq_u * dq_u
                                        + 2.0 * xuv[a] * dq_u * dq_v
                                        + xvv[a] * dq_v * dq_v);
                        }
                        let d = norm(delta);
                        f_grid[i * nb + j] = if d == 0.0 {
                            // Exact parameter coincidence: the integrand
                            // limit is zero through the vanishing map
                            // derivative.
                            Complex64::ZERO
                        } else {
                            kind.eval_with(d, crate::vec3::dot(delta, normal)) * (jac * weight)
                        };
                        continue;
                    }
                }

                let d = dist(target.position, sp.pos);
                if d == 0.0 {
                    // A quadrature node may only coincide with the target
                    // where the change-of-variable derivative vanishes, in
                    // which case the integrand limit is zero.
                    if weight == 0.0 {
                        f_grid[i * nb + j] = Complex64::ZERO;
                        continue;
                    }
                    return Err(Error::CoincidentNode {
                        patch: patch_index,
                        node: target.node,
                    });
                }
                f_grid[i * nb + j] = kind.eval(target.position, sp.pos, normal) * (jac * weight);
            }
        }

        // Partial summation: over i first, then j.
        stage.iter_mut().for_each(|v| *v = Complex64::ZERO);
        for n in 0..n_u {
            let trow = &tn_u[n * nb..(n + 1) * nb];
            let srow = &mut stage[n * nb..(n + 1) * nb];
            for i in 0..nb {
                let t = trow[i];
                let frow = &f_grid[i * nb..(i + 1) * nb];
                for j in 0..nb {
                    srow[j] += frow[j] * t;
                }
            }
        }
        let grid = &mut out[t_idx * n_u * n_v..(t_idx + 1) * n_u * n_v];
        for n in 0..n_u {
            let srow = &stage[n * nb..(n + 1) * nb];
            for m in 0..n_v {
                let trow = &tm_v[m * nb..(m + 1) * nb];
                let mut acc = Complex64::ZERO;
                for j in 0..nb {
                    acc += srow[j] * trow[j];
                }
                grid[n * n_v + m] = acc;
            }
        }
    }
    Ok(out)
}

/// Compute β grids for every near pair in the plan.
///
/// Work is parallel over (patch, target) pairs; each pair's sums run in a
/// fixed order, so the result is identical for any thread count.
pub fn compute_weights(
    disc: &SurfaceDiscretization,
    plan: &NearFieldPlan,
    kind: KernelKind,
    n_beta: usize,
    p_sing: u32,
) -> Result<PrecomputedWeights> {
    assert!(
        n_beta >= disc.n_u.max(disc.n_v),
        "moment rule must be at least as fine as the density grid"
    );
    let rule = FejerRule::new(n_beta);
    let stride = disc.n_u * disc.n_v;
    let patches: Vec<PatchWeightSet> = disc
        .patches
        .iter()
        .enumerate()
        .map(|(q, _)| {
            let patch = &disc.atlas.patches[q];
            let set = &plan.near[q];
            let chunks: Result<Vec<Vec<Complex64>>> = set
                .targets
                .par_iter()
                .map(|t| {
                    let projection = t.projection.expect("plan projections must be filled");
                    let self_params = if disc.nodes.patch_of[t.node] as usize == q {
                        Some((
                            patch.edge_map_u(projection.u).0,
                            patch.edge_map_v(projection.v).0,
                        ))
                    } else {
                        None
                    };
                    compute_patch_weights(
                        patch,
                        q,
                        &[WeightTarget {
                            position: disc.nodes.pos[t.node],
                            projection,
                            node: t.node,
                            self_params,
                        }],
                        kind,
                        disc.n_u,
                        disc.n_v,
                        &rule,
                        p_sing,
                    )
                })
                .collect();
            let chunks = chunks?;
            let mut data = Vec::with_capacity(set.targets.len() * stride);
            for c in chunks {
                data.extend_from_slice(&c);
            }
            Ok(PatchWeightSet { stride, data })
        })
        .collect::<Result<_>>()?;

    Ok(PrecomputedWeights {
        kind,
        n_u: disc.n_u,
        n_v: disc.n_v,
        n_beta,
        p_sing,
        patches,
    })
}
