//! Helmholtz free-space Green function and the unified scattering kernel.

use crate::vec3::{dot, sub, Vec3};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Which boundary integral formulation the kernel serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelVariant {
    /// D − ikS; second-kind formulation for closed surfaces.
    CombinedField,
    /// S alone; first-kind formulation for open surfaces.
    SingleLayer,
}

/// Kernel selector: formulation plus wavenumber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelKind {
    pub variant: KernelVariant,
    pub k: f64,
}

impl KernelKind {
    pub fn combined_field(k: f64) -> Self {
        Self {
            variant: KernelVariant::CombinedField,
            k,
        }
    }

    pub fn single_layer(k: f64) -> Self {
        Self {
            variant: KernelVariant::SingleLayer,
            k,
        }
    }

    /// Evaluate the kernel at target r, source r' with unit source normal n'.
    ///
    /// Callers must never pass r = r'; the singular quadrature avoids the
    /// coincident limit through the vanishing change-of-variable derivative.
    #[inline]
    pub fn eval(&self, r: Vec3, rp: Vec3, np: Vec3) -> Complex64 {
        let d_vec = sub(r, rp);
        let d = dot(d_vec, d_vec).sqrt();
        self.eval_with(d, dot(d_vec, np))
    }

    /// Evaluate from precomputed distance d = |r − r'| and normal projection
    /// proj = (r − r')·n'. Lets callers substitute cancellation-safe values
    /// of `proj` for nearly-coincident arguments.
    #[inline]
    pub fn eval_with(&self, d: f64, proj: f64) -> Complex64 {
        let (s, c) = (self.k * d).sin_cos();
        let g = Complex64::new(c, s) / (4.0 * PI * d);
        match self.variant {
            KernelVariant::SingleLayer => g,
            KernelVariant::CombinedField => {
                let dn = g * Complex64::new(1.0 / d, -self.k) * (proj / d);
                dn - Complex64::new(0.0, self.k) * g
            }
        }
    }
}

/// Free-space Green function G(r, r') = e^{ik|r−r'|} / (4π|r−r'|).
#[inline]
pub fn green(k: f64, r: Vec3, rp: Vec3) -> Complex64 {
    let d_vec = sub(r, rp);
    let d = dot(d_vec, d_vec).sqrt();
    let (s, c) = (k * d).sin_cos();
    Complex64::new(c, s) / (4.0 * PI * d)
}

/// Normal derivative of the Green function with respect to the source point,
/// ∂G/∂n(r') = G(r,r') (1/d − ik) ((r−r')·n') / d.
#[inline]
pub fn green_dn(k: f64, r: Vec3, rp: Vec3, np: Vec3) -> Complex64 {
    let d_vec = sub(r, rp);
    let d2 = dot(d_vec, d_vec);
    let d = d2.sqrt();
    let (s, c) = (k * d).sin_cos();
    let phase = Complex64::new(c, s);
    phase / (4.0 * PI * d) * Complex64::new(1.0 / d, -k) * (dot(d_vec, np) / d)
}
