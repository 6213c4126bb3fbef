//! Patch atlases, built-in scatterer shapes, and surface discretization.

mod bezier;
mod patch_file;
mod surface_map;

pub use bezier::BezierPatch;
pub use patch_file::{load_patch_file, parse_patch_file};
pub use surface_map::SurfaceMap;

use crate::error::Error;
use crate::maps::{edge_map, EdgeFlag};
use crate::quadrature::FejerRule;
use crate::vec3::{cross, dist, norm, scale, Vec3};
use crate::Result;
use std::sync::Arc;

/// Axis-aligned sub-rectangle of the master parameter square, stored as
/// center and half widths. Patch-local coordinates map through it affinely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBox {
    pub uc: f64,
    pub uh: f64,
    pub vc: f64,
    pub vh: f64,
}

impl ParamBox {
    pub const FULL: ParamBox = ParamBox {
        uc: 0.0,
        uh: 1.0,
        vc: 0.0,
        vh: 1.0,
    };
}

/// Position and tangents of a surface point in patch-local coordinates.
#[derive(Debug, Clone, Copy)]
pub struct SurfacePoint {
    pub pos: Vec3,
    pub du: Vec3,
    pub dv: Vec3,
}

impl SurfacePoint {
    #[inline]
    pub fn jacobian(&self) -> f64 {
        norm(cross(self.du, self.dv))
    }

    #[inline]
    pub fn normal(&self) -> Vec3 {
        let c = cross(self.du, self.dv);
        scale(c, 1.0 / norm(c))
    }
}

/// One logically-quadrilateral patch: a master map, a parameter sub-box,
/// per-direction edge flags, the grading order of the edge maps, and default
/// per-direction node counts.
#[derive(Debug, Clone)]
pub struct Patch {
    pub id: usize,
    pub map: Arc<SurfaceMap>,
    pub sub: ParamBox,
    pub edge_u: EdgeFlag,
    pub edge_v: EdgeFlag,
    pub cov_p: u32,
    pub n_u: usize,
    pub n_v: usize,
}

impl Patch {
    fn from_map(id: usize, map: SurfaceMap, edge_u: EdgeFlag, edge_v: EdgeFlag, cov_p: u32) -> Self {
        Patch {
            id,
            map: Arc::new(map),
            sub: ParamBox::FULL,
            edge_u,
            edge_v,
            cov_p,
            n_u: 16,
            n_v: 16,
        }
    }

    /// Evaluate at patch-local coordinates (no edge change of variables).
    pub fn eval(&self, u: f64, v: f64) -> SurfacePoint {
        let (pos, mdu, mdv) = self
            .map
            .eval(self.sub.uc + self.sub.uh * u, self.sub.vc + self.sub.vh * v);
        SurfacePoint {
            pos,
            du: scale(mdu, self.sub.uh),
            dv: scale(mdv, self.sub.vh),
        }
    }

    /// Edge change of variables in the u direction: s ↦ (u, du/ds).
    #[inline]
    pub fn edge_map_u(&self, s: f64) -> (f64, f64) {
        edge_map(self.edge_u, self.cov_p, s)
    }

    #[inline]
    pub fn edge_map_v(&self, t: f64) -> (f64, f64) {
        edge_map(self.edge_v, self.cov_p, t)
    }

    /// Evaluate at edge-resolved coordinates (s, t): the composition used by
    /// quadrature, x(w_u(s), w_v(t)).
    pub fn eval_resolved(&self, s: f64, t: f64) -> SurfacePoint {
        let (u, _) = self.edge_map_u(s);
        let (v, _) = self.edge_map_v(t);
        self.eval(u, v)
    }

    /// Second partials (x_uu, x_uv, x_vv) at patch-local coordinates.
    pub fn eval2(&self, u: f64, v: f64) -> (Vec3, Vec3, Vec3) {
        let (muu, muv, mvv) = self
            .map
            .eval2(self.sub.uc + self.sub.uh * u, self.sub.vc + self.sub.vh * v);
        (
            scale(muu, self.sub.uh * self.sub.uh),
            scale(muv, self.sub.uh * self.sub.vh),
            scale(mvv, self.sub.vh * self.sub.vh),
        )
    }

    /// Images of the four parameter corners.
    pub fn corners(&self) -> [Vec3; 4] {
        [
            self.eval(-1.0, -1.0).pos,
            self.eval(-1.0, 1.0).pos,
            self.eval(1.0, -1.0).pos,
            self.eval(1.0, 1.0).pos,
        ]
    }

    /// Maximum pairwise distance between corner images.
    pub fn diameter(&self) -> f64 {
        let c = self.corners();
        let mut d = 0.0_f64;
        for a in 0..4 {
            for b in a + 1..4 {
                d = d.max(dist(c[a], c[b]));
            }
        }
        d
    }
}

/// The non-overlapping patch cover of the scatterer surface.
#[derive(Debug, Clone)]
pub struct PatchAtlas {
    pub patches: Vec<Patch>,
    pub closed: bool,
}

impl PatchAtlas {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// Same geometry with all edge flags removed (used to compare against
    /// runs without the edge change of variables).
    pub fn without_edge_flags(&self) -> PatchAtlas {
        let mut out = self.clone();
        for p in &mut out.patches {
            p.edge_u = EdgeFlag::None;
            p.edge_v = EdgeFlag::None;
        }
        out
    }

    /// Same geometry with a different edge-map grading order.
    pub fn with_edge_order(&self, p: u32) -> PatchAtlas {
        assert!(p >= 2);
        let mut out = self.clone();
        for patch in &mut out.patches {
            patch.cov_p = p;
        }
        out
    }
}

/// Cube-mapped sphere: 6 base patches, each split `splits` × `splits`.
pub fn make_sphere_atlas(radius: f64, splits: usize) -> PatchAtlas {
    assert!(radius > 0.0 && splits >= 1);
    let base = PatchAtlas {
        patches: (0..6u8)
            .map(|face| {
                Patch::from_map(
                    face as usize,
                    SurfaceMap::SphereFace { face, radius },
                    EdgeFlag::None,
                    EdgeFlag::None,
                    4,
                )
            })
            .collect(),
        closed: true,
    };
    split_atlas(&base, splits)
}

/// Cube of the given side length; every face side is a geometric edge.
///
/// The default edge-map order is 2: the edges are shared between faces, and
/// the neighbouring face's clustered nodes approach them like N^(-2p), so
/// higher orders concentrate enormous kernel mass into the near-singular
/// moments of the adjacent patch and wreck the conditioning of the
/// discretized operator. Open boundaries (no neighbour) tolerate higher
/// orders; see `make_disk_atlas`.
pub fn make_cube_atlas(side: f64) -> PatchAtlas {
    assert!(side > 0.0);
    PatchAtlas {
        patches: (0..6u8)
            .map(|face| {
                Patch::from_map(
                    face as usize,
                    SurfaceMap::CubeFace {
                        face,
                        half: 0.5 * side,
                    },
                    EdgeFlag::BothEnds,
                    EdgeFlag::BothEnds,
                    2,
                )
            })
            .collect(),
        closed: true,
    }
}

/// Open disk of the given radius in the z = 0 plane: a central square plus
/// four blended sectors whose outer side lies on the boundary circle.
pub fn make_disk_atlas(radius: f64) -> PatchAtlas {
    assert!(radius > 0.0);
    let half = 0.5 * radius;
    let mut patches = vec![Patch::from_map(
        0,
        SurfaceMap::DiskCenter { half },
        EdgeFlag::None,
        EdgeFlag::None,
        4,
    )];
    for quadrant in 0..4u8 {
        patches.push(Patch::from_map(
            1 + quadrant as usize,
            SurfaceMap::DiskSector {
                quadrant,
                half,
                radius,
            },
            EdgeFlag::HighEndOnly, // u = +1 is the disk boundary
            EdgeFlag::None,
            4,
        ));
    }
    PatchAtlas {
        patches,
        closed: false,
    }
}

/// Replace every patch by s × s subpatches obtained by affine subdivision of
/// its parameter box. Edge flags propagate only to subpatches that touch a
/// flagged side of the original patch.
pub fn split_atlas(atlas: &PatchAtlas, s: usize) -> PatchAtlas {
    assert!(s >= 1);
    let mut patches = Vec::with_capacity(atlas.patches.len() * s * s);
    for patch in &atlas.patches {
        for a in 0..s {
            for b in 0..s {
                let frac = |idx: usize| -1.0 + (2 * idx + 1) as f64 / s as f64;
                let sub = ParamBox {
                    uc: patch.sub.uc + patch.sub.uh * frac(a),
                    uh: patch.sub.uh / s as f64,
                    vc: patch.sub.vc + patch.sub.vh * frac(b),
                    vh: patch.sub.vh / s as f64,
                };
                let edge_u = inherit_flag(patch.edge_u, a, s);
                let edge_v = inherit_flag(patch.edge_v, b, s);
                patches.push(Patch {
                    id: patches.len(),
                    map: Arc::clone(&patch.map),
                    sub,
                    edge_u,
                    edge_v,
                    cov_p: patch.cov_p,
                    n_u: patch.n_u,
                    n_v: patch.n_v,
                });
            }
        }
    }
    PatchAtlas {
        patches,
        closed: atlas.closed,
    }
}

fn inherit_flag(flag: EdgeFlag, idx: usize, s: usize) -> EdgeFlag {
    let low = flag.flags_low() && idx == 0;
    let high = flag.flags_high() && idx == s - 1;
    match (low, high) {
        (true, true) => EdgeFlag::BothEnds,
        (true, false) => EdgeFlag::LowEndOnly,
        (false, true) => EdgeFlag::HighEndOnly,
        (false, false) => EdgeFlag::None,
    }
}

/// Per-patch slice of a surface discretization.
#[derive(Debug, Clone)]
pub struct PatchDisc {
    pub first_node: usize,
    pub n_u: usize,
    pub n_v: usize,
    /// Fejér parameters along each direction.
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    /// Edge-mapped parameters u = w_u(s), v = w_v(t).
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Change-of-variable derivative factors dw_u/ds, dw_v/dt.
    pub du_ds: Vec<f64>,
    pub dv_dt: Vec<f64>,
    /// Fejér weights along each direction.
    pub wu: Vec<f64>,
    pub wv: Vec<f64>,
    pub diameter: f64,
    pub center: Vec3,
    pub bounding_radius: f64,
}

impl PatchDisc {
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        self.first_node + i * self.n_v + j
    }

    pub fn node_count(&self) -> usize {
        self.n_u * self.n_v
    }
}

/// Global node arrays (struct-of-arrays layout).
#[derive(Debug, Clone, Default)]
pub struct NodeData {
    pub pos: Vec<Vec3>,
    pub normal: Vec<Vec3>,
    pub jacobian: Vec<f64>,
    /// J · ω_i · ω_j — the quadrature weight against the edge-resolved
    /// density ψ.
    pub smooth_weight: Vec<f64>,
    /// (dw_u/ds)(dw_v/dt) at the node.
    pub cov_factor: Vec<f64>,
    pub patch_of: Vec<u32>,
}

/// Nodes, geometry factors and quadrature weights for a whole atlas.
#[derive(Debug, Clone)]
pub struct SurfaceDiscretization {
    pub atlas: PatchAtlas,
    pub n_u: usize,
    pub n_v: usize,
    pub patches: Vec<PatchDisc>,
    pub nodes: NodeData,
}

/// Tensor-product Fejér discretization of every patch, composed with the
/// edge changes of variables. Node ℓ of patch q at grid position (i, j) has
/// global index `first_node(q) + i·n_v + j`.
pub fn discretize(atlas: &PatchAtlas, n_u: usize, n_v: usize) -> Result<SurfaceDiscretization> {
    if n_u < 2 || n_v < 2 {
        return Err(Error::Config(format!(
            "node counts must be at least 2, got ({n_u}, {n_v})"
        )));
    }
    let rule_u = FejerRule::new(n_u);
    let rule_v = FejerRule::new(n_v);

    let total = atlas.patches.len() * n_u * n_v;
    let mut nodes = NodeData {
        pos: Vec::with_capacity(total),
        normal: Vec::with_capacity(total),
        jacobian: Vec::with_capacity(total),
        smooth_weight: Vec::with_capacity(total),
        cov_factor: Vec::with_capacity(total),
        patch_of: Vec::with_capacity(total),
    };
    let mut patches = Vec::with_capacity(atlas.patches.len());

    for (q, patch) in atlas.patches.iter().enumerate() {
        let first_node = nodes.pos.len();
        let mut u = vec![0.0; n_u];
        let mut du_ds = vec![0.0; n_u];
        for (i, &si) in rule_u.nodes.iter().enumerate() {
            let (ui, dui) = patch.edge_map_u(si);
            u[i] = ui;
            du_ds[i] = dui;
        }
        let mut v = vec![0.0; n_v];
        let mut dv_dt = vec![0.0; n_v];
        for (j, &tj) in rule_v.nodes.iter().enumerate() {
            let (vj, dvj) = patch.edge_map_v(tj);
            v[j] = vj;
            dv_dt[j] = dvj;
        }

        let mut center = [0.0; 3];
        for i in 0..n_u {
            for j in 0..n_v {
                let sp = patch.eval(u[i], v[j]);
                let jac = sp.jacobian();
                if !(jac > 1e-300) {
                    return Err(Error::DegeneratePatch {
                        patch: q,
                        jacobian: jac,
                        u: u[i],
                        v: v[j],
                    });
                }
                nodes.pos.push(sp.pos);
                nodes.normal.push(sp.normal());
                nodes.jacobian.push(jac);
                nodes
                    .smooth_weight
                    .push(jac * rule_u.weights[i] * rule_v.weights[j]);
                nodes.cov_factor.push(du_ds[i] * dv_dt[j]);
                nodes.patch_of.push(q as u32);
                for a in 0..3 {
                    center[a] += sp.pos[a];
                }
            }
        }
        let count = (n_u * n_v) as f64;
        center = scale(center, 1.0 / count);
        let mut bounding_radius = 0.0_f64;
        for &p in &nodes.pos[first_node..] {
            bounding_radius = bounding_radius.max(dist(center, p));
        }
        for corner in patch.corners() {
            bounding_radius = bounding_radius.max(dist(center, corner));
        }

        patches.push(PatchDisc {
            first_node,
            n_u,
            n_v,
            s: rule_u.nodes.clone(),
            t: rule_v.nodes.clone(),
            u,
            v,
            du_ds,
            dv_dt,
            wu: rule_u.weights.clone(),
            wv: rule_v.weights.clone(),
            diameter: patch.diameter(),
            center,
            bounding_radius,
        });
    }

    Ok(SurfaceDiscretization {
        atlas: atlas.clone(),
        n_u,
        n_v,
        patches,
        nodes,
    })
}

impl SurfaceDiscretization {
    pub fn node_count(&self) -> usize {
        self.nodes.pos.len()
    }

    /// Quadrature approximation of the surface area.
    pub fn area(&self) -> f64 {
        self.nodes
            .smooth_weight
            .iter()
            .zip(&self.nodes.cov_factor)
            .map(|(&w, &c)| w * c)
            .sum()
    }

    /// Patch-local grid position of a global node index.
    pub fn locate(&self, node: usize) -> (usize, usize, usize) {
        let q = self.nodes.patch_of[node] as usize;
        let local = node - self.patches[q].first_node;
        (q, local / self.patches[q].n_v, local % self.patches[q].n_v)
    }
}
