//! Command-line driver for the rectpolar scattering solver.

mod config;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use config::{ConfigFile, Settings};
use num_complex::Complex64;
use rectpolar::geometry::discretize;
use rectpolar::precompute::{cache_load, cache_store, CacheKey};
use rectpolar::problem::{
    convergence_csv, convergence_study, far_field, lat_long_grid, near_field_grid, solve_assembled,
    validate_sphere, Assembled, ConvergenceCase, FarField,
};
use rectpolar::{build_plan, compute_weights, Error as CoreError, ScatteringProblem};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "rectpolar", version, about = "High-order boundary-integral solver for 3D sound-soft acoustic scattering on quadrilateral-patch surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Config file (key = value sections); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Geometry: sphere[:radius=R], cube[:side=S], disk[:radius=R], or a
    /// patch file path.
    #[arg(long)]
    geometry: Option<String>,
    /// Wavenumber.
    #[arg(long)]
    k: Option<f64>,
    /// Integral formulation.
    #[arg(long, value_parser = ["combined", "single"])]
    formulation: Option<String>,
    /// Nodes per patch per direction.
    #[arg(long, value_name = "N")]
    n: Option<usize>,
    /// Moment-rule size for singular precomputations.
    #[arg(long = "Nbeta", value_name = "NBETA")]
    n_beta: Option<usize>,
    /// Near-field threshold in patch diameters.
    #[arg(long)]
    delta: Option<f64>,
    /// Grading order of the edge change of variables.
    #[arg(long)]
    p_edge: Option<u32>,
    /// Grading order of the singular change of variables.
    #[arg(long)]
    p_sing: Option<u32>,
    /// Disable the edge change of variables (comparison runs).
    #[arg(long)]
    no_edge_cov: bool,
    /// Split every patch s × s.
    #[arg(long)]
    splits: Option<usize>,
    /// Incident direction "x y z" (normalized internally).
    #[arg(long)]
    direction: Option<String>,
    /// GMRES relative residual target.
    #[arg(long)]
    tol: Option<f64>,
    /// GMRES restart length.
    #[arg(long)]
    restart: Option<usize>,
    /// GMRES iteration budget.
    #[arg(long)]
    maxiter: Option<usize>,
    /// Directory for precomputed-weight caches.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long)]
    threads: Option<usize>,
    /// Fix the reduction order (always the case; accepted for explicitness).
    #[arg(long)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build the discretization and print its statistics.
    Mesh {
        #[command(flatten)]
        run: RunArgs,
        /// Write the node table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build (and cache) the near-field plan and moment weights.
    Precompute {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Solve the boundary integral equation; write the density as CSV.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve and evaluate the far-field pattern on a lat-long grid.
    Farfield {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 181)]
        ntheta: usize,
        #[arg(long, default_value_t = 360)]
        nphi: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Reference far-field CSV to compare against.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Solve and evaluate the total field on a planar grid.
    Nearfield {
        #[command(flatten)]
        run: RunArgs,
        /// Grid plane.
        #[arg(long, value_parser = ["xy", "xz", "yz"], default_value = "xz")]
        plane: String,
        /// Offset of the plane along its normal axis.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        offset: f64,
        #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
        min: f64,
        #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
        max: f64,
        /// Points per axis.
        #[arg(long, default_value_t = 101)]
        npts: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the forward map against the unit-sphere eigen-relations.
    ValidateSphere {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 5)]
        l: usize,
        #[arg(long, default_value_t = 2)]
        m: i64,
    },
    /// Forward-map convergence table over (N, Nbeta, splits) cases.
    Convergence {
        #[command(flatten)]
        run: RunArgs,
        /// Cases as N:NBETA:SPLITS, comma separated.
        #[arg(long)]
        cases: String,
        #[arg(long, default_value_t = 5)]
        l: usize,
        #[arg(long, default_value_t = 2)]
        m: i64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code(&err)
        }
    });
}

/// 0 success, 2 config error, 3 solver non-convergence, 4 cache mismatch.
fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::Config(_)
                | CoreError::PatchFile { .. }
                | CoreError::DegeneratePatch { .. } => 2,
                CoreError::SolverDidNotConverge { .. } | CoreError::SolverNonFinite(_) => 3,
                CoreError::CacheMismatch { .. } | CoreError::CacheCorrupt(_) => 4,
                _ => 1,
            };
        }
        if cause.downcast_ref::<clap::Error>().is_some() {
            return 2;
        }
    }
    // Settings/geometry parsing problems are configuration errors.
    let text = format!("{err:#}");
    if text.contains("config") || text.contains("geometry") || text.contains("formulation") {
        2
    } else {
        1
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mesh { run, out } => cmd_mesh(&settings(&run)?, out.as_deref()),
        Command::Precompute { run } => {
            let s = settings(&run)?;
            cmd_precompute(&s, run.cache_dir.as_deref())
        }
        Command::Solve { run, out } => {
            let s = settings(&run)?;
            let (problem, assembled) = prepare(&s, run.cache_dir.as_deref())?;
            let (density, report) = solve_assembled(&problem, &assembled)?;
            print_report(&report);
            if let Some(path) = out {
                write_density_csv(&path, &assembled, &density)?;
                println!("density written to {}", path.display());
            }
            Ok(())
        }
        Command::Farfield {
            run,
            ntheta,
            nphi,
            out,
            reference,
        } => {
            let s = settings(&run)?;
            let (problem, assembled) = prepare(&s, run.cache_dir.as_deref())?;
            let (density, report) = solve_assembled(&problem, &assembled)?;
            print_report(&report);
            let dirs = lat_long_grid(ntheta, nphi);
            let ff = far_field(&density, &problem, &assembled.disc, &dirs);
            println!("far-field max |F| = {:.6}", ff.max_abs());
            if let Some(path) = &reference {
                let reference_ff = read_far_field_csv(path, ntheta, nphi)?;
                println!(
                    "max |F - F_ref| = {:.6e} (reference max {:.6})",
                    ff.max_abs_diff(&reference_ff),
                    reference_ff.max_abs()
                );
            }
            if let Some(path) = out {
                write_far_field_csv(&path, ntheta, nphi, &ff)?;
                println!("far field written to {}", path.display());
            }
            Ok(())
        }
        Command::Nearfield {
            run,
            plane,
            offset,
            min,
            max,
            npts,
            out,
        } => {
            let s = settings(&run)?;
            let (problem, assembled) = prepare(&s, run.cache_dir.as_deref())?;
            let (density, report) = solve_assembled(&problem, &assembled)?;
            print_report(&report);
            cmd_nearfield(
                &problem, &assembled, &density, &plane, offset, min, max, npts,
                out.as_deref(),
            )
        }
        Command::ValidateSphere { run, l, m } => {
            let s = settings(&run)?;
            let v = validate_sphere(
                s.k,
                s.n,
                s.n_beta(),
                l,
                m,
                s.splits,
                s.delta,
                s.p_sing,
            )?;
            println!(
                "sphere forward-map validation (l={l}, m={m}, k={}, n={}, nbeta={}, splits={}):",
                s.k,
                s.n,
                s.n_beta(),
                s.splits
            );
            println!("  single layer : {:.6e}", v.err_single);
            println!("  combined     : {:.6e}  ({:.6}%)", v.err_combined, 100.0 * v.err_combined);
            Ok(())
        }
        Command::Convergence {
            run,
            cases,
            l,
            m,
            out,
        } => {
            let s = settings(&run)?;
            let cases = parse_cases(&cases)?;
            let rows = convergence_study(s.k, l, m, &cases, s.delta, s.p_sing)?;
            let csv = convergence_csv(&rows);
            match out {
                Some(path) => {
                    std::fs::write(&path, &csv)?;
                    println!("table written to {}", path.display());
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
    }
}

fn settings(run: &RunArgs) -> Result<Settings> {
    if let Some(threads) = run.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    let mut s = Settings::default();
    if let Some(path) = &run.config {
        s.apply_config(&ConfigFile::load(path)?)?;
    }
    if let Some(g) = &run.geometry {
        s.geometry = g.clone();
    }
    if let Some(k) = run.k {
        s.k = k;
    }
    if let Some(f) = &run.formulation {
        s.formulation = config::parse_formulation(f)?;
    }
    if let Some(n) = run.n {
        s.n = n;
    }
    if let Some(nb) = run.n_beta {
        s.n_beta = Some(nb);
    }
    if let Some(d) = run.delta {
        s.delta = d;
    }
    if let Some(p) = run.p_edge {
        s.p_edge = Some(p);
    }
    if let Some(p) = run.p_sing {
        s.p_sing = p;
    }
    if run.no_edge_cov {
        s.edge_cov = false;
    }
    if let Some(sp) = run.splits {
        s.splits = sp;
    }
    if let Some(d) = &run.direction {
        let parts: Vec<f64> = d
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| anyhow!("bad --direction '{d}': {e}"))?;
        if parts.len() != 3 {
            return Err(anyhow!("--direction needs three components"));
        }
        s.direction = [parts[0], parts[1], parts[2]];
    }
    if let Some(t) = run.tol {
        s.gmres.tol = t;
    }
    if let Some(r) = run.restart {
        s.gmres.restart = r;
    }
    if let Some(mi) = run.maxiter {
        s.gmres.max_iter = mi;
    }
    Ok(s)
}

/// Assemble the problem, loading weights from the cache directory when a
/// matching file exists and storing them when it does not.
fn prepare(s: &Settings, cache_dir: Option<&Path>) -> Result<(ScatteringProblem, Assembled)> {
    let problem = s.build_problem()?;
    problem.validate()?;
    let disc = discretize(&problem.atlas, problem.n, problem.n)?;
    let key = CacheKey::new(&disc, problem.kind(), problem.delta, problem.n_beta, problem.p_sing);
    if let Some(dir) = cache_dir {
        let path = dir.join(format!("rpw-{}.rpc", key.file_stem()));
        if path.exists() {
            let (plan, weights) = cache_load(&path, &key)?;
            println!("loaded weights from {}", path.display());
            return Ok((
                problem,
                Assembled {
                    disc,
                    plan,
                    weights,
                },
            ));
        }
    }
    let plan = build_plan(&disc, problem.delta);
    let weights = compute_weights(&disc, &plan, problem.kind(), problem.n_beta, problem.p_sing)?;
    if let Some(dir) = cache_dir {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("rpw-{}.rpc", key.file_stem()));
        cache_store(&path, &key, &plan, &weights)?;
        println!("weights cached at {}", path.display());
    }
    Ok((
        problem,
        Assembled {
            disc,
            plan,
            weights,
        },
    ))
}

fn cmd_mesh(s: &Settings, out: Option<&Path>) -> Result<()> {
    let atlas = s.build_atlas()?;
    let disc = discretize(&atlas, s.n, s.n)?;
    let area = disc.area();
    let mut jac_min = f64::INFINITY;
    let mut jac_max = 0.0_f64;
    for &j in &disc.nodes.jacobian {
        jac_min = jac_min.min(j);
        jac_max = jac_max.max(j);
    }
    let m = atlas.len() as f64;
    let lambda = 2.0 * std::f64::consts::PI / s.k;
    let avg_side = (area / m).sqrt();
    println!("patches        : {}", atlas.len());
    println!("closed surface : {}", atlas.closed);
    println!("nodes          : {} ({}x{} per patch)", disc.node_count(), s.n, s.n);
    println!("area           : {area:.12}");
    println!("jacobian range : [{jac_min:.3e}, {jac_max:.3e}]");
    println!("avg patch side : {avg_side:.4}");
    println!("points per λ   : {:.2} (k = {})", s.n as f64 * lambda / avg_side, s.k);
    if let Some(path) = out {
        let mut csv = String::from("node,patch,i,j,x,y,z,nx,ny,nz,jacobian,weight\n");
        for node in 0..disc.node_count() {
            let (q, i, j) = disc.locate(node);
            let p = disc.nodes.pos[node];
            let nrm = disc.nodes.normal[node];
            csv.push_str(&format!(
                "{node},{q},{i},{j},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                p[0], p[1], p[2], nrm[0], nrm[1], nrm[2],
                disc.nodes.jacobian[node],
                disc.nodes.smooth_weight[node] * disc.nodes.cov_factor[node],
            ));
        }
        std::fs::write(path, csv)?;
        println!("node table written to {}", path.display());
    }
    Ok(())
}

fn cmd_precompute(s: &Settings, cache_dir: Option<&Path>) -> Result<()> {
    let dir = cache_dir.ok_or_else(|| anyhow!("precompute requires --cache-dir"))?;
    let problem = s.build_problem()?;
    problem.validate()?;
    let disc = discretize(&problem.atlas, problem.n, problem.n)?;
    let t0 = std::time::Instant::now();
    let plan = build_plan(&disc, problem.delta);
    let weights = compute_weights(&disc, &plan, problem.kind(), problem.n_beta, problem.p_sing)?;
    let elapsed = t0.elapsed().as_secs_f64();
    let key = CacheKey::new(&disc, problem.kind(), problem.delta, problem.n_beta, problem.p_sing);
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("rpw-{}.rpc", key.file_stem()));
    cache_store(&path, &key, &plan, &weights)?;
    let pairs = plan.pair_count();
    println!("near pairs     : {pairs}");
    println!("precompute time: {elapsed:.2} s");
    println!("cache file     : {}", path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_nearfield(
    problem: &ScatteringProblem,
    assembled: &Assembled,
    density: &rectpolar::Density,
    plane: &str,
    offset: f64,
    min: f64,
    max: f64,
    npts: usize,
    out: Option<&Path>,
) -> Result<()> {
    let mut points = Vec::with_capacity(npts * npts);
    let step = if npts > 1 { (max - min) / (npts - 1) as f64 } else { 0.0 };
    for ia in 0..npts {
        for ib in 0..npts {
            let a = min + step * ia as f64;
            let b = min + step * ib as f64;
            points.push(match plane {
                "xy" => [a, b, offset],
                "xz" => [a, offset, b],
                _ => [offset, a, b],
            });
        }
    }
    let values = near_field_grid(density, problem, &assembled.disc, &points);
    let skipped = values.iter().filter(|v| v.is_none()).count();
    println!("grid {npts}x{npts} on {plane}-plane (offset {offset}); {skipped} points inside the standoff region");
    if let Some(path) = out {
        // Structured grid text: header then one row per point.
        let mut text = format!(
            "# total field u_inc + u_scat\n# plane {plane} offset {offset}\n# axis1 {min} {max} {npts}\n# axis2 {min} {max} {npts}\n# columns: x y z re im abs (skipped points: nan)\n"
        );
        for (p, v) in points.iter().zip(&values) {
            match v {
                Some(c) => text.push_str(&format!(
                    "{:.10e} {:.10e} {:.10e} {:.10e} {:.10e} {:.10e}\n",
                    p[0], p[1], p[2], c.re, c.im, c.norm()
                )),
                None => text.push_str(&format!(
                    "{:.10e} {:.10e} {:.10e} nan nan nan\n",
                    p[0], p[1], p[2]
                )),
            }
        }
        std::fs::write(path, text)?;
        println!("near field written to {}", path.display());
    }
    Ok(())
}

fn print_report(report: &rectpolar::SolveReport) {
    println!(
        "gmres: {} iterations, residual {:.3e}, {:.2} s{}",
        report.iterations,
        report.final_residual,
        report.wall_time.as_secs_f64(),
        if report.breakdown { " (breakdown)" } else { "" }
    );
}

fn write_density_csv(path: &Path, assembled: &Assembled, density: &rectpolar::Density) -> Result<()> {
    let disc = &assembled.disc;
    let mut csv = String::from("node,patch,x,y,z,phi_re,phi_im,psi_re,psi_im\n");
    for node in 0..disc.node_count() {
        let p = disc.nodes.pos[node];
        csv.push_str(&format!(
            "{node},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            disc.nodes.patch_of[node],
            p[0],
            p[1],
            p[2],
            density.nodal[node].re,
            density.nodal[node].im,
            density.psi[node].re,
            density.psi[node].im,
        ));
    }
    std::fs::write(path, csv)?;
    Ok(())
}

fn write_far_field_csv(path: &Path, ntheta: usize, nphi: usize, ff: &FarField) -> Result<()> {
    let mut csv = String::from("theta_deg,phi_deg,re,im,abs\n");
    for it in 0..ntheta {
        for ip in 0..nphi {
            let idx = it * nphi + ip;
            let theta = 180.0 * it as f64 / (ntheta - 1).max(1) as f64;
            let phi = 360.0 * ip as f64 / nphi as f64;
            let a = ff.amplitudes[idx];
            csv.push_str(&format!(
                "{theta:.6},{phi:.6},{:.17e},{:.17e},{:.17e}\n",
                a.re,
                a.im,
                a.norm()
            ));
        }
    }
    std::fs::write(path, csv)?;
    Ok(())
}

fn read_far_field_csv(path: &Path, ntheta: usize, nphi: usize) -> Result<FarField> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read reference {}", path.display()))?;
    let mut amplitudes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            continue; // header
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 4 {
            return Err(anyhow!("reference line {} malformed", i + 1));
        }
        amplitudes.push(Complex64::new(cols[2].parse()?, cols[3].parse()?));
    }
    if amplitudes.len() != ntheta * nphi {
        return Err(anyhow!(
            "reference grid is {} entries, expected {}x{}",
            amplitudes.len(),
            ntheta,
            nphi
        ));
    }
    Ok(FarField {
        directions: lat_long_grid(ntheta, nphi),
        amplitudes,
    })
}

fn parse_cases(spec: &str) -> Result<Vec<ConvergenceCase>> {
    spec.split(',')
        .map(|case| {
            let parts: Vec<&str> = case.trim().split(':').collect();
            if parts.len() != 3 {
                return Err(anyhow!("case '{case}' is not N:NBETA:SPLITS"));
            }
            Ok(ConvergenceCase {
                n: parts[0].parse().context("bad N")?,
                n_beta: parts[1].parse().context("bad NBETA")?,
                splits: parts[2].parse().context("bad SPLITS")?,
            })
        })
        .collect()
}
