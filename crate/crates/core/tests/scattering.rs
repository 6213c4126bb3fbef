//! End-to-end invariants of the scattering pipeline on the unit sphere.

use num_complex::Complex64;
use rectpolar::geometry::{discretize, make_sphere_atlas};
use rectpolar::precompute::{build_plan, compute_weights};
use rectpolar::problem::{
    assemble, far_field, incident_plane_wave, lat_long_grid, right_hand_side, solve_assembled,
    spherical_harmonic_nodal, PlaneWave,
};
use rectpolar::special::{
    combined_field_eigenvalue, double_layer_eigenvalue, single_layer_eigenvalue,
};
use rectpolar::{
    apply_operator, build_density, KernelKind, KernelVariant, ScatteringProblem,
};
use std::f64::consts::PI;

fn max_rel_err(got: &[Complex64], expect: &[Complex64]) -> f64 {
    let scale = expect.iter().map(|c| c.norm()).fold(0.0, f64::max);
    got.iter()
        .zip(expect)
        .map(|(g, e)| (g - e).norm())
        .fold(0.0, f64::max)
        / scale
}

#[test]
fn layer_operators_match_sphere_eigenvalues() {
    // S, D and the combined operator applied to Y_2^1 nodal data.
    let k = 2.0 * PI;
    let atlas = make_sphere_atlas(1.0, 1);
    let disc = discretize(&atlas, 12, 12).unwrap();
    let plan = build_plan(&disc, 0.5);
    let phi = spherical_harmonic_nodal(&disc, 2, 1);
    let density = build_density(&disc, &phi);

    let kind_s = KernelKind::single_layer(k);
    let weights_s = compute_weights(&disc, &plan, kind_s, 100, 8).unwrap();
    let s_phi = apply_operator(kind_s, &disc, &plan, &weights_s, &density).unwrap();

    let kind_c = KernelKind::combined_field(k);
    let weights_c = compute_weights(&disc, &plan, kind_c, 100, 8).unwrap();
    let c_phi = apply_operator(kind_c, &disc, &plan, &weights_c, &density).unwrap();

    // D recovered from the two applications: D = A - ½I + ikS.
    let ik = Complex64::new(0.0, k);
    let d_phi: Vec<Complex64> = c_phi
        .iter()
        .zip(&s_phi)
        .zip(&phi)
        .map(|((&c, &s), &p)| c - 0.5 * p + ik * s)
        .collect();

    let lam_s = single_layer_eigenvalue(2, k);
    let lam_d = double_layer_eigenvalue(2, k);
    let lam_c = combined_field_eigenvalue(2, k);
    let expect = |lam: Complex64| -> Vec<Complex64> { phi.iter().map(|&p| lam * p).collect() };

    let err_s = max_rel_err(&s_phi, &expect(lam_s));
    let err_d = max_rel_err(&d_phi, &expect(lam_d));
    let err_c = max_rel_err(&c_phi, &expect(lam_c));
    assert!(err_s < 1e-4, "single layer err {err_s:.3e}");
    assert!(err_d < 1e-4, "double layer err {err_d:.3e}");
    assert!(err_c < 1e-4, "combined err {err_c:.3e}");
}

#[test]
fn solve_reapplies_to_rhs_and_rotates_consistently() {
    // One assembly, two incidence directions: (a) the residual of the
    // recovered density is bounded by the solver tolerance, (b) the far
    // field for +x incidence is the +z pattern rotated accordingly.
    let k = 2.0 * PI;
    let mut problem = ScatteringProblem::new(
        make_sphere_atlas(1.0, 1),
        k,
        KernelVariant::CombinedField,
    )
    .with_resolution(16, 90);
    problem.gmres.tol = 1e-10;
    let assembled = assemble(&problem).unwrap();

    let (density_z, report) = solve_assembled(&problem, &assembled).unwrap();
    assert!(report.converged);

    // Re-apply: A φ must reproduce −u_inc within 10× the tolerance.
    let reapplied = apply_operator(
        problem.kind(),
        &assembled.disc,
        &assembled.plan,
        &assembled.weights,
        &density_z,
    )
    .unwrap();
    let b = right_hand_side(&problem, &assembled.disc);
    let scale = b.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let resid = reapplied
        .iter()
        .zip(&b)
        .map(|(a, bi)| (a - bi).norm())
        .fold(0.0, f64::max)
        / scale;
    assert!(resid < 10.0 * problem.gmres.tol, "re-applied residual {resid:.3e}");

    // Rotated incidence: R maps +z to +x (rotation by +90° about y).
    let mut problem_x = problem.clone();
    problem_x.incident = PlaneWave {
        direction: [1.0, 0.0, 0.0],
        amplitude: Complex64::new(1.0, 0.0),
    };
    let (density_x, _) = solve_assembled(&problem_x, &assembled).unwrap();

    let dirs_z = lat_long_grid(13, 24);
    let rot = |d: [f64; 3]| [d[2], d[1], -d[0]];
    let dirs_x: Vec<[f64; 3]> = dirs_z.iter().map(|&d| rot(d)).collect();
    let ff_z = far_field(&density_z, &problem, &assembled.disc, &dirs_z);
    let ff_x = far_field(&density_x, &problem_x, &assembled.disc, &dirs_x);
    let scale = ff_z.max_abs();
    let dev = ff_z.max_abs_diff(&ff_x) / scale;
    assert!(dev < 1e-6, "rotation deviation {dev:.3e}");
}

#[test]
fn sphere_far_field_errors_decrease_with_n() {
    let k = 2.0 * PI;
    let dirs = lat_long_grid(13, 24);
    let pattern = |n: usize| {
        let mut problem = ScatteringProblem::new(
            make_sphere_atlas(1.0, 1),
            k,
            KernelVariant::CombinedField,
        )
        .with_resolution(n, 5 * n + 10);
        problem.gmres.tol = 1e-11;
        let assembled = assemble(&problem).unwrap();
        let (density, _) = solve_assembled(&problem, &assembled).unwrap();
        far_field(&density, &problem, &assembled.disc, &dirs)
    };
    let reference = pattern(18);
    let errs: Vec<f64> = [6, 10, 14]
        .iter()
        .map(|&n| pattern(n).max_abs_diff(&reference))
        .collect();
    // Monotone decrease (within a 1e-10 noise floor).
    for pair in errs.windows(2) {
        assert!(
            pair[1] < pair[0] || pair[1] < 1e-10,
            "errors not decreasing: {errs:?}"
        );
    }
    assert!(
        errs[2] < 1e-2 * errs[0],
        "insufficient overall decay: {errs:?}"
    );
}

#[test]
fn plane_wave_satisfies_helmholtz_on_surface_nodes() {
    // Sanity tying the incident field to the geometry: u_inc evaluated at
    // the nodes matches its defining formula.
    let atlas = make_sphere_atlas(1.0, 2);
    let disc = discretize(&atlas, 6, 6).unwrap();
    let k = 3.1;
    let d = [0.0, 1.0, 0.0];
    for node in (0..disc.node_count()).step_by(17) {
        let r = disc.nodes.pos[node];
        let expect = Complex64::new(0.0, k * r[1]).exp();
        assert!((incident_plane_wave(k, d, r) - expect).norm() < 1e-14);
    }
}
