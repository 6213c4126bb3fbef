//! Scattering problems and the end-to-end pipelines: solve, far field,
//! near field, sphere validation, and convergence studies.

use crate::error::Error;
use crate::geometry::{discretize, make_sphere_atlas, PatchAtlas, SurfaceDiscretization};
use crate::kernel::{KernelKind, KernelVariant};
use crate::operator::{apply_operator, build_density, build_density_from_psi, Density};
use crate::precompute::{build_plan, compute_weights, NearFieldPlan, PrecomputedWeights};
use crate::solver::{gmres, GmresParams, SolveReport};
use crate::special::{combined_field_eigenvalue, single_layer_eigenvalue, sph_harmonic};
use crate::vec3::{dist, dot, norm, Vec3};
use crate::Result;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::time::Instant;

/// Incident plane wave with unit-normalized direction.
#[derive(Debug, Clone, Copy)]
pub struct PlaneWave {
    pub direction: Vec3,
    pub amplitude: Complex64,
}

impl PlaneWave {
    pub fn unit_z() -> Self {
        PlaneWave {
            direction: [0.0, 0.0, 1.0],
            amplitude: Complex64::new(1.0, 0.0),
        }
    }
}

/// u_inc(r) = exp(i k d·r) for a unit direction d.
#[inline]
pub fn incident_plane_wave(k: f64, direction: Vec3, r: Vec3) -> Complex64 {
    let (s, c) = (k * dot(direction, r)).sin_cos();
    Complex64::new(c, s)
}

/// Default moment-rule size for a given per-patch node count, following the
/// resolution pairs used in the reference experiments.
pub fn default_n_beta(n: usize) -> usize {
    (5 * n + 10).max(50)
}

/// A fully-specified scattering problem.
#[derive(Debug, Clone)]
pub struct ScatteringProblem {
    pub atlas: PatchAtlas,
    pub k: f64,
    pub formulation: KernelVariant,
    pub incident: PlaneWave,
    /// Nodes per patch per direction.
    pub n: usize,
    /// Moment-rule size for the singular precomputations.
    pub n_beta: usize,
    /// Near-field threshold in units of the patch diameter.
    pub delta: f64,
    /// Grading order of the singular (rectangular-polar) map.
    pub p_sing: u32,
    pub gmres: GmresParams,
}

impl ScatteringProblem {
    pub fn new(atlas: PatchAtlas, k: f64, formulation: KernelVariant) -> Self {
        ScatteringProblem {
            atlas,
            k,
            formulation,
            incident: PlaneWave::unit_z(),
            n: 16,
            n_beta: default_n_beta(16),
            delta: 0.5,
            p_sing: 8,
            gmres: GmresParams::default(),
        }
    }

    pub fn with_resolution(mut self, n: usize, n_beta: usize) -> Self {
        self.n = n;
        self.n_beta = n_beta;
        self
    }

    pub fn kind(&self) -> KernelKind {
        KernelKind {
            variant: self.formulation,
            k: self.k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) {
            return Err(Error::Config(format!("wavenumber must be positive, got {}", self.k)));
        }
        match self.formulation {
            KernelVariant::CombinedField if !self.atlas.closed => {
                return Err(Error::Config(
                    "combined-field formulation requires a closed surface".into(),
                ))
            }
            KernelVariant::SingleLayer if self.atlas.closed => {
                return Err(Error::Config(
                    "single-layer (open-surface) formulation requires an open surface".into(),
                ))
            }
            _ => {}
        }
        if self.n < 2 {
            return Err(Error::Config(format!("n must be at least 2, got {}", self.n)));
        }
        if self.n_beta < self.n {
            return Err(Error::Config(format!(
                "n_beta ({}) must be at least n ({})",
                self.n_beta, self.n
            )));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Config("delta must be positive".into()));
        }
        if (norm(self.incident.direction) - 1.0).abs() > 1e-12 {
            return Err(Error::Config("incident direction must be unit length".into()));
        }
        Ok(())
    }
}

/// Discretization, near-field plan and weights for one problem.
pub struct Assembled {
    pub disc: SurfaceDiscretization,
    pub plan: NearFieldPlan,
    pub weights: PrecomputedWeights,
}

/// Discretize, classify, project and precompute the weights.
pub fn assemble(problem: &ScatteringProblem) -> Result<Assembled> {
    problem.validate()?;
    let disc = discretize(&problem.atlas, problem.n, problem.n)?;
    let plan = build_plan(&disc, problem.delta);
    let weights = compute_weights(&disc, &plan, problem.kind(), problem.n_beta, problem.p_sing)?;
    Ok(Assembled {
        disc,
        plan,
        weights,
    })
}

/// Right-hand side −u_inc at the discretization nodes.
pub fn right_hand_side(problem: &ScatteringProblem, disc: &SurfaceDiscretization) -> Vec<Complex64> {
    disc.nodes
        .pos
        .iter()
        .map(|&r| -problem.incident.amplitude * incident_plane_wave(problem.k, problem.incident.direction, r))
        .collect()
}

/// Solve the boundary integral equation with an existing assembly.
///
/// The combined-field (second-kind) system is solved in the nodal values of
/// φ. The first-kind single-layer system is solved in the edge-resolved
/// variable ψ, which keeps the discrete system free of the tiny
/// change-of-variable column scalings; φ is recovered pointwise afterwards.
pub fn solve_assembled(
    problem: &ScatteringProblem,
    assembled: &Assembled,
) -> Result<(Density, SolveReport)> {
    let kind = problem.kind();
    let b = right_hand_side(problem, &assembled.disc);
    let mut apply_err: Option<Error> = None;
    let solve_result = match problem.formulation {
        KernelVariant::CombinedField => gmres(
            |phi: &[Complex64]| {
                let density = build_density(&assembled.disc, phi);
                match apply_operator(kind, &assembled.disc, &assembled.plan, &assembled.weights, &density)
                {
                    Ok(v) => v,
                    Err(e) => {
                        apply_err = Some(e);
                        vec![Complex64::new(f64::NAN, 0.0); phi.len()]
                    }
                }
            },
            &b,
            &problem.gmres,
        ),
        KernelVariant::SingleLayer => gmres(
            |psi: &[Complex64]| {
                let density = build_density_from_psi(&assembled.disc, psi);
                match apply_operator(kind, &assembled.disc, &assembled.plan, &assembled.weights, &density)
                {
                    Ok(v) => v,
                    Err(e) => {
                        apply_err = Some(e);
                        vec![Complex64::new(f64::NAN, 0.0); psi.len()]
                    }
                }
            },
            &b,
            &problem.gmres,
        ),
    };
    if let Some(e) = apply_err {
        return Err(e);
    }
    let (x, report) = solve_result?;
    if !report.converged && !report.breakdown {
        return Err(Error::SolverDidNotConverge {
            residual: report.final_residual,
            iterations: report.iterations,
        });
    }
    let density = match problem.formulation {
        KernelVariant::CombinedField => build_density(&assembled.disc, &x),
        KernelVariant::SingleLayer => build_density_from_psi(&assembled.disc, &x),
    };
    Ok((density, report))
}

/// Assemble and solve.
pub fn solve(problem: &ScatteringProblem) -> Result<(Density, SolveReport)> {
    let assembled = assemble(problem)?;
    solve_assembled(problem, &assembled)
}

/// Far-field pattern samples.
#[derive(Debug, Clone)]
pub struct FarField {
    pub directions: Vec<Vec3>,
    pub amplitudes: Vec<Complex64>,
}

impl FarField {
    pub fn max_abs(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute deviation from another pattern on the same grid.
    pub fn max_abs_diff(&self, other: &FarField) -> f64 {
        assert_eq!(self.amplitudes.len(), other.amplitudes.len());
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Latitude–longitude direction grid: `n_theta` polar values including both
/// poles, `n_phi` equispaced azimuths.
pub fn lat_long_grid(n_theta: usize, n_phi: usize) -> Vec<Vec3> {
    let mut dirs = Vec::with_capacity(n_theta * n_phi);
    for it in 0..n_theta {
        let theta = PI * it as f64 / (n_theta - 1).max(1) as f64;
        for ip in 0..n_phi {
            let phi = 2.0 * PI * ip as f64 / n_phi as f64;
            dirs.push([
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            ]);
        }
    }
    dirs
}

/// Far-field amplitude F(r̂) of the scattered field, from the r → ∞
/// asymptotics of the layer potentials:
/// single layer (1/4π) e^{−ik r̂·r'}; combined field adds the factor
/// −ik (1 + r̂·n').
pub fn far_field(
    density: &Density,
    problem: &ScatteringProblem,
    disc: &SurfaceDiscretization,
    directions: &[Vec3],
) -> FarField {
    let k = problem.k;
    let amplitudes: Vec<Complex64> = directions
        .par_iter()
        .map(|&rhat| {
            debug_assert!((norm(rhat) - 1.0).abs() < 1e-12);
            let mut acc = Complex64::ZERO;
            for src in 0..disc.node_count() {
                let rp = disc.nodes.pos[src];
                let (s, c) = (-k * dot(rhat, rp)).sin_cos();
                let phase = Complex64::new(c, s);
                let factor = match problem.formulation {
                    KernelVariant::SingleLayer => phase,
                    KernelVariant::CombinedField => {
                        phase
                            * Complex64::new(0.0, -k)
                            * (1.0 + dot(rhat, disc.nodes.normal[src]))
                    }
                };
                acc += factor * (disc.nodes.smooth_weight[src] * density.psi[src]);
            }
            acc / (4.0 * PI)
        })
        .collect();
    FarField {
        directions: directions.to_vec(),
        amplitudes,
    }
}

/// Total field u_inc + u_scat at off-surface points, by the plain smooth
/// quadrature. Points closer than δ·diam(q) to the nodes of any patch q
/// violate the standoff precondition and come back as `None`.
pub fn near_field_grid(
    density: &Density,
    problem: &ScatteringProblem,
    disc: &SurfaceDiscretization,
    points: &[Vec3],
) -> Vec<Option<Complex64>> {
    let kind = problem.kind();
    points
        .par_iter()
        .map(|&r| {
            for pd in &disc.patches {
                let threshold = problem.delta * pd.diameter;
                if dist(r, pd.center) - pd.bounding_radius >= threshold {
                    continue;
                }
                let mut best = f64::INFINITY;
                for src in pd.first_node..pd.first_node + pd.node_count() {
                    best = best.min(dist(r, disc.nodes.pos[src]));
                }
                if best < threshold {
                    return None;
                }
            }
            let mut scat = Complex64::ZERO;
            for src in 0..disc.node_count() {
                scat += kind.eval(r, disc.nodes.pos[src], disc.nodes.normal[src])
                    * (disc.nodes.smooth_weight[src] * density.psi[src]);
            }
            let inc =
                problem.incident.amplitude * incident_plane_wave(problem.k, problem.incident.direction, r);
            Some(inc + scat)
        })
        .collect()
}

/// Forward-map errors of the discrete layer operators against the analytic
/// eigenvalues on the unit sphere, relative to the maximum forward-map value.
#[derive(Debug, Clone, Copy)]
pub struct SphereValidation {
    pub err_single: f64,
    pub err_combined: f64,
}

impl SphereValidation {
    pub fn max(&self) -> f64 {
        self.err_single.max(self.err_combined)
    }
}

/// Apply S and the combined-field operator to nodal Y_ℓ^m data on the unit
/// sphere (6·splits² patches, n×n nodes each) and compare with the analytic
/// eigen-relations.
pub fn validate_sphere(
    k: f64,
    n: usize,
    n_beta: usize,
    l: usize,
    m: i64,
    splits: usize,
    delta: f64,
    p_sing: u32,
) -> Result<SphereValidation> {
    let atlas = make_sphere_atlas(1.0, splits);
    let disc = discretize(&atlas, n, n)?;
    let plan = build_plan(&disc, delta);
    let phi = spherical_harmonic_nodal(&disc, l, m);
    let density = build_density(&disc, &phi);

    let kind_s = KernelKind::single_layer(k);
    let weights_s = compute_weights(&disc, &plan, kind_s, n_beta, p_sing)?;
    let got_s = apply_operator(kind_s, &disc, &plan, &weights_s, &density)?;
    let err_single = relative_eigen_error(&got_s, &phi, single_layer_eigenvalue(l, k));

    let kind_c = KernelKind::combined_field(k);
    let weights_c = compute_weights(&disc, &plan, kind_c, n_beta, p_sing)?;
    let got_c = apply_operator(kind_c, &disc, &plan, &weights_c, &density)?;
    let err_combined = relative_eigen_error(&got_c, &phi, combined_field_eigenvalue(l, k));

    Ok(SphereValidation {
        err_single,
        err_combined,
    })
}

/// Nodal spherical-harmonic data on a sphere discretization.
pub fn spherical_harmonic_nodal(disc: &SurfaceDiscretization, l: usize, m: i64) -> Vec<Complex64> {
    disc.nodes
        .pos
        .iter()
        .map(|&p| {
            let r = norm(p);
            let theta = (p[2] / r).clamp(-1.0, 1.0).acos();
            let phi = p[1].atan2(p[0]);
            sph_harmonic(l, m, theta, phi)
        })
        .collect()
}

fn relative_eigen_error(got: &[Complex64], phi: &[Complex64], lambda: Complex64) -> f64 {
    let mut max_err = 0.0_f64;
    let mut max_val = 0.0_f64;
    for (g, p) in got.iter().zip(phi) {
        let expect = lambda * p;
        max_err = max_err.max((g - expect).norm());
        max_val = max_val.max(expect.norm());
    }
    max_err / max_val
}

/// One case of a convergence study.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceCase {
    pub n: usize,
    pub n_beta: usize,
    pub splits: usize,
}

/// One row of the study output.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n: usize,
    pub n_beta: usize,
    pub splits: usize,
    pub patches: usize,
    pub unknowns: usize,
    pub points_per_lambda: f64,
    pub t_precompute_s: f64,
    pub t_apply_s: f64,
    /// Combined-field forward-map error relative to the maximum forward-map
    /// value, in percent.
    pub error_percent: f64,
}

/// Forward-map convergence study on the unit sphere against the analytic
/// eigen-relation for Y_ℓ^m, mirroring the patch-splitting experiments.
pub fn convergence_study(
    k: f64,
    l: usize,
    m: i64,
    cases: &[ConvergenceCase],
    delta: f64,
    p_sing: u32,
) -> Result<Vec<ConvergenceRow>> {
    let mut rows = Vec::with_capacity(cases.len());
    for case in cases {
        let atlas = make_sphere_atlas(1.0, case.splits);
        let disc = discretize(&atlas, case.n, case.n)?;
        let t0 = Instant::now();
        let plan = build_plan(&disc, delta);
        let kind = KernelKind::combined_field(k);
        let weights = compute_weights(&disc, &plan, kind, case.n_beta, p_sing)?;
        let t_precompute = t0.elapsed().as_secs_f64();

        let phi = spherical_harmonic_nodal(&disc, l, m);
        let density = build_density(&disc, &phi);
        let t1 = Instant::now();
        let got = apply_operator(kind, &disc, &plan, &weights, &density)?;
        let t_apply = t1.elapsed().as_secs_f64();
        let err = relative_eigen_error(&got, &phi, combined_field_eigenvalue(l, k));

        let patches = atlas.len();
        let lambda = 2.0 * PI / k;
        let avg_side = (4.0 * PI / patches as f64).sqrt();
        rows.push(ConvergenceRow {
            n: case.n,
            n_beta: case.n_beta,
            splits: case.splits,
            patches,
            unknowns: disc.node_count(),
            points_per_lambda: case.n as f64 / (avg_side / lambda),
            t_precompute_s: t_precompute,
            t_apply_s: t_apply,
            error_percent: 100.0 * err,
        });
    }
    Ok(rows)
}

/// CSV rendering of a convergence study.
pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from(
        "n,n_beta,patches,points_per_lambda,unknowns,t_precompute_s,t_apply_s,error_percent\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},6x{}x{},{:.2},{},{:.3},{:.3},{:.6e}\n",
            r.n, r.n_beta, r.splits, r.splits, r.points_per_lambda, r.unknowns, r.t_precompute_s,
            r.t_apply_s, r.error_percent
        ));
    }
    out
}
