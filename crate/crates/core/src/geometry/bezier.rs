//! Tensor-product Bernstein (Bézier-style) surface patches.

use crate::vec3::Vec3;

/// Control net of a tensor-product polynomial patch over [-1,1]².
///
/// Control points are stored row-major with the u index slow:
/// `ctrl[i * (d_v + 1) + j]` for i = 0..=d_u, j = 0..=d_v.
#[derive(Debug, Clone, PartialEq)]
pub struct BezierPatch {
    pub d_u: usize,
    pub d_v: usize,
    pub ctrl: Vec<Vec3>,
}

impl BezierPatch {
    pub fn new(d_u: usize, d_v: usize, ctrl: Vec<Vec3>) -> Self {
        assert_eq!(ctrl.len(), (d_u + 1) * (d_v + 1));
        Self { d_u, d_v, ctrl }
    }

    /// Position and partial derivatives with respect to (u, v) ∈ [-1,1]².
    pub fn eval(&self, u: f64, v: f64) -> (Vec3, Vec3, Vec3) {
        let tu = 0.5 * (u + 1.0);
        let tv = 0.5 * (v + 1.0);
        let (bu, dbu) = bernstein_with_deriv(self.d_u, tu);
        let (bv, dbv) = bernstein_with_deriv(self.d_v, tv);

        let mut pos = [0.0; 3];
        let mut dtu = [0.0; 3];
        let mut dtv = [0.0; 3];
        for i in 0..=self.d_u {
            for j in 0..=self.d_v {
                let p = self.ctrl[i * (self.d_v + 1) + j];
                let w = bu[i] * bv[j];
                let wu = dbu[i] * bv[j];
                let wv = bu[i] * dbv[j];
                for a in 0..3 {
                    pos[a] += w * p[a];
                    dtu[a] += wu * p[a];
                    dtv[a] += wv * p[a];
                }
            }
        }
        // Chain rule for t = (x+1)/2.
        for a in 0..3 {
            dtu[a] *= 0.5;
            dtv[a] *= 0.5;
        }
        (pos, dtu, dtv)
    }

    /// Second partial derivatives (x_uu, x_uv, x_vv) at (u, v).
    pub fn eval2(&self, u: f64, v: f64) -> (Vec3, Vec3, Vec3) {
        let tu = 0.5 * (u + 1.0);
        let tv = 0.5 * (v + 1.0);
        let (bu, dbu, ddbu) = bernstein_with_two_derivs(self.d_u, tu);
        let (bv, dbv, ddbv) = bernstein_with_two_derivs(self.d_v, tv);
        let mut xuu = [0.0; 3];
        let mut xuv = [0.0; 3];
        let mut xvv = [0.0; 3];
        for i in 0..=self.d_u {
            for j in 0..=self.d_v {
                let p = self.ctrl[i * (self.d_v + 1) + j];
                let wuu = ddbu[i] * bv[j];
                let wuv = dbu[i] * dbv[j];
                let wvv = bu[i] * ddbv[j];
                for a in 0..3 {
                    xuu[a] += wuu * p[a];
                    xuv[a] += wuv * p[a];
                    xvv[a] += wvv * p[a];
                }
            }
        }
        for a in 0..3 {
            xuu[a] *= 0.25;
            xuv[a] *= 0.25;
            xvv[a] *= 0.25;
        }
        (xuu, xuv, xvv)
    }
}

/// Bernstein basis of degree n at t and its derivative, by the de Casteljau
/// style recurrence (stable for the small degrees used here).
fn bernstein_with_deriv(n: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let mut b = vec![0.0; n + 1];
    b[0] = 1.0;
    // Raise degree to n-1, keep it for the derivative formula.
    for k in 1..n {
        for i in (1..=k).rev() {
            b[i] = (1.0 - t) * b[i] + t * b[i - 1];
        }
        b[0] *= 1.0 - t;
    }
    let lower = b.clone(); // degree n-1 basis (first n entries) when n >= 1
    if n >= 1 {
        for i in (1..=n).rev() {
            b[i] = (1.0 - t) * b[i] + t * b[i - 1];
        }
        b[0] *= 1.0 - t;
    }
    let mut db = vec![0.0; n + 1];
    if n >= 1 {
        let nf = n as f64;
        for i in 0..=n {
            let left = if i >= 1 { lower[i - 1] } else { 0.0 };
            let right = if i <= n - 1 { lower[i] } else { 0.0 };
            db[i] = nf * (left - right);
        }
    }
    (b, db)
}

/// Basis, first and second derivatives of the Bernstein basis of degree n.
fn bernstein_with_two_derivs(n: usize, t: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (b, db) = bernstein_with_deriv(n, t);
    let mut ddb = vec![0.0; n + 1];
    if n >= 2 {
        let (lower, _) = bernstein_with_deriv(n - 2, t);
        let f = (n * (n - 1)) as f64;
        for i in 0..=n {
            let a = if i >= 2 { lower[i - 2] } else { 0.0 };
            let c = if i >= 1 && i - 1 <= n - 2 { lower[i - 1] } else { 0.0 };
            let d = if i <= n - 2 { lower[i] } else { 0.0 };
            ddb[i] = f * (a - 2.0 * c + d);
        }
    }
    (b, db, ddb)
}
