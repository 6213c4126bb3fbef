//! Master parametrizations backing the built-in atlases and patch files.

use super::bezier::BezierPatch;
use crate::vec3::{cross, dot, normalize, scale, sub, Vec3};
use std::f64::consts::FRAC_PI_4;

/// A smooth parametrization of the master square [-1,1]² into R³.
///
/// The built-in variants are oriented so that du × dv points outward (closed
/// shapes) or along +z (the disk).
#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceMap {
    /// Face of an axis-aligned cube of the given half side.
    CubeFace { face: u8, half: f64 },
    /// Cube face radially projected onto the sphere of the given radius.
    SphereFace { face: u8, radius: f64 },
    /// Central square of the disk atlas, half width `half`, in z = 0.
    DiskCenter { half: f64 },
    /// Blended quadrilateral between one side of the central square and the
    /// quarter arc of the disk boundary, rotated by `quadrant`·90°.
    DiskSector { quadrant: u8, half: f64, radius: f64 },
    /// Tensor-product Bernstein patch (from a patch file).
    Bezier(BezierPatch),
}

impl SurfaceMap {
    /// Position and partials with respect to the master coordinates.
    pub fn eval(&self, u: f64, v: f64) -> (Vec3, Vec3, Vec3) {
        match self {
            SurfaceMap::CubeFace { face, half } => {
                let (c, cu, cv) = cube_face(*face, u, v);
                (scale(c, *half), scale(cu, *half), scale(cv, *half))
            }
            SurfaceMap::SphereFace { face, radius } => {
                // Equiangular warp before projection: nearly uniform node
                // spacing on the sphere and far faster quadrature convergence
                // than the plain gnomonic map.
                let wu = (FRAC_PI_4 * u).tan();
                let dwu = FRAC_PI_4 / (FRAC_PI_4 * u).cos().powi(2);
                let wv = (FRAC_PI_4 * v).tan();
                let dwv = FRAC_PI_4 / (FRAC_PI_4 * v).cos().powi(2);
                let (c, cu, cv) = cube_face(*face, wu, wv);
                let n2 = dot(c, c);
                let n = n2.sqrt();
                let r_over_n = *radius / n;
                let pos = scale(c, r_over_n);
                let du = scale(sub(cu, scale(c, dot(c, cu) / n2)), r_over_n * dwu);
                let dv = scale(sub(cv, scale(c, dot(c, cv) / n2)), r_over_n * dwv);
                (pos, du, dv)
            }
            SurfaceMap::DiskCenter { half } => (
                [half * u, half * v, 0.0],
                [*half, 0.0, 0.0],
                [0.0, *half, 0.0],
            ),
            SurfaceMap::DiskSector {
                quadrant,
                half,
                radius,
            } => {
                // u radial (u = +1 on the circle), v angular across ±45°.
                let theta = v * FRAC_PI_4;
                let (s, c) = theta.sin_cos();
                let t = 0.5 * (u + 1.0);
                let tan = s / c;
                let inner = [*half, *half * tan, 0.0];
                let inner_dv = [0.0, *half * FRAC_PI_4 / (c * c), 0.0];
                let outer = [radius * c, radius * s, 0.0];
                let outer_dv = [-radius * s * FRAC_PI_4, radius * c * FRAC_PI_4, 0.0];
                let mut pos = [0.0; 3];
                let mut du = [0.0; 3];
                let mut dv = [0.0; 3];
                for a in 0..3 {
                    pos[a] = (1.0 - t) * inner[a] + t * outer[a];
                    du[a] = 0.5 * (outer[a] - inner[a]);
                    dv[a] = (1.0 - t) * inner_dv[a] + t * outer_dv[a];
                }
                (
                    rot_z_quadrant(*quadrant, pos),
                    rot_z_quadrant(*quadrant, du),
                    rot_z_quadrant(*quadrant, dv),
                )
            }
            SurfaceMap::Bezier(patch) => patch.eval(u, v),
        }
    }

    /// Unit normal du × dv / |du × dv|.
    pub fn normal(&self, u: f64, v: f64) -> Vec3 {
        let (_, du, dv) = self.eval(u, v);
        normalize(cross(du, dv))
    }

    /// Second partial derivatives (x_uu, x_uv, x_vv). Used by the
    /// cancellation-safe evaluation of nearly-coincident kernel arguments.
    pub fn eval2(&self, u: f64, v: f64) -> (Vec3, Vec3, Vec3) {
        const ZERO: Vec3 = [0.0; 3];
        match self {
            SurfaceMap::CubeFace { .. } | SurfaceMap::DiskCenter { .. } => (ZERO, ZERO, ZERO),
            SurfaceMap::SphereFace { face, radius } => {
                let q = FRAC_PI_4;
                let (wu, wv) = ((q * u).tan(), (q * v).tan());
                let (su, sv) = (1.0 / (q * u).cos().powi(2), 1.0 / (q * v).cos().powi(2));
                let (dwu, dwv) = (q * su, q * sv);
                let (ddwu, ddwv) = (2.0 * q * q * su * wu, 2.0 * q * q * sv * wv);
                let (c, eu, ev) = cube_face(*face, wu, wv);
                let cu = scale(eu, dwu);
                let cv = scale(ev, dwv);
                let cuu = scale(eu, ddwu);
                let cvv = scale(ev, ddwv);
                normalize_second(*radius, c, cu, cv, cuu, ZERO, cvv)
            }
            SurfaceMap::DiskSector {
                quadrant,
                half,
                radius,
            } => {
                let theta = v * FRAC_PI_4;
                let (s, c) = theta.sin_cos();
                let t = 0.5 * (u + 1.0);
                let sec2 = 1.0 / (c * c);
                let inner_dv = [0.0, *half * FRAC_PI_4 * sec2, 0.0];
                let inner_dvv = [0.0, *half * 2.0 * FRAC_PI_4 * FRAC_PI_4 * sec2 * (s / c), 0.0];
                let outer_dv = [-radius * s * FRAC_PI_4, radius * c * FRAC_PI_4, 0.0];
                let outer_dvv = [
                    -radius * c * FRAC_PI_4 * FRAC_PI_4,
                    -radius * s * FRAC_PI_4 * FRAC_PI_4,
                    0.0,
                ];
                let mut xuv = [0.0; 3];
                let mut xvv = [0.0; 3];
                for a in 0..3 {
                    xuv[a] = 0.5 * (outer_dv[a] - inner_dv[a]);
                    xvv[a] = (1.0 - t) * inner_dvv[a] + t * outer_dvv[a];
                }
                (
                    ZERO,
                    rot_z_quadrant(*quadrant, xuv),
                    rot_z_quadrant(*quadrant, xvv),
                )
            }
            SurfaceMap::Bezier(patch) => patch.eval2(u, v),
        }
    }
}

/// Second derivatives of R·c/|c| from those of c.
#[allow(clippy::too_many_arguments)]
fn normalize_second(
    radius: f64,
    c: Vec3,
    cu: Vec3,
    cv: Vec3,
    cuu: Vec3,
    cuv: Vec3,
    cvv: Vec3,
) -> (Vec3, Vec3, Vec3) {
    let n2 = dot(c, c);
    let n = n2.sqrt();
    let n3 = n2 * n;
    let n5 = n3 * n2;
    let gu = dot(c, cu);
    let gv = dot(c, cv);
    let second = |caa: Vec3, ca: Vec3, cb: Vec3, ga: f64, gb: f64| -> Vec3 {
        let gab = dot(ca, cb) + dot(c, caa);
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = radius
                * (caa[i] / n - ca[i] * gb / n3 - cb[i] * ga / n3 - c[i] * gab / n3
                    + 3.0 * c[i] * ga * gb / n5);
        }
        out
    };
    (
        second(cuu, cu, cu, gu, gu),
        second(cuv, cu, cv, gu, gv),
        second(cvv, cv, cv, gv, gv),
    )
}

/// The six cube faces on [-1,1]³, oriented outward.
fn cube_face(face: u8, u: f64, v: f64) -> (Vec3, Vec3, Vec3) {
    match face {
        0 => ([1.0, u, v], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]),
        1 => ([-1.0, v, u], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]),
        2 => ([v, 1.0, u], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]),
        3 => ([u, -1.0, v], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
        4 => ([u, v, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
        5 => ([v, u, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]),
        _ => panic!("cube face index out of range"),
    }
}

fn rot_z_quadrant(quadrant: u8, p: Vec3) -> Vec3 {
    match quadrant % 4 {
        0 => p,
        1 => [-p[1], p[0], p[2]],
        2 => [-p[0], -p[1], p[2]],
        3 => [p[1], -p[0], p[2]],
        _ => unreachable!(),
    }
}
