//! Declarative run configuration: an INI-style `key = value` file with
//! `[section]` headers, merged under the command-line flags.
//!
//! ```text
//! [geometry]
//! kind = sphere          # sphere | cube | disk | file
//! radius = 1.0           # sphere / disk
//! side = 2.0             # cube
//! path = wing.patches    # kind = file
//! splits = 1
//! edge_cov = on          # off strips edge flags (comparison runs)
//! p_edge = 4
//!
//! [problem]
//! k = 6.2831853
//! formulation = combined # combined | single
//! direction = 0 0 1
//!
//! [discretization]
//! n = 16
//! nbeta = 90
//! delta = 0.5
//! p_sing = 8
//!
//! [solver]
//! tol = 1e-10
//! restart = 100
//! maxiter = 1000
//! ```

use anyhow::{anyhow, bail, Context, Result};
use rectpolar::geometry::{
    load_patch_file, make_cube_atlas, make_disk_atlas, make_sphere_atlas, split_atlas, PatchAtlas,
};
use rectpolar::problem::default_n_beta;
use rectpolar::solver::GmresParams;
use rectpolar::{KernelVariant, PlaneWave, ScatteringProblem};
use std::collections::BTreeMap;
use std::path::Path;

/// Flat `section.key -> value` view of a config file.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("line {}: unterminated section header", lineno + 1))?;
                section = name.trim().to_lowercase();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", lineno + 1))?;
            let full = if section.is_empty() {
                key.trim().to_lowercase()
            } else {
                format!("{section}.{}", key.trim().to_lowercase())
            };
            values.insert(full, value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn parse_key<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("config key '{key}': cannot parse '{raw}': {e}")),
        }
    }
}

/// Fully-resolved run settings (config file merged under flags).
#[derive(Debug, Clone)]
pub struct Settings {
    pub geometry: String,
    pub splits: usize,
    pub edge_cov: bool,
    pub p_edge: Option<u32>,
    pub k: f64,
    pub formulation: KernelVariant,
    pub direction: [f64; 3],
    pub n: usize,
    pub n_beta: Option<usize>,
    pub delta: f64,
    pub p_sing: u32,
    pub gmres: GmresParams,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            geometry: "sphere".into(),
            splits: 1,
            edge_cov: true,
            p_edge: None,
            k: 2.0 * std::f64::consts::PI,
            formulation: KernelVariant::CombinedField,
            direction: [0.0, 0.0, 1.0],
            n: 16,
            n_beta: None,
            delta: 0.5,
            p_sing: 8,
            gmres: GmresParams::default(),
        }
    }
}

impl Settings {
    /// Overlay config-file values onto the defaults.
    pub fn apply_config(&mut self, cfg: &ConfigFile) -> Result<()> {
        if let Some(kind) = cfg.get("geometry.kind") {
            self.geometry = match kind {
                "sphere" | "cube" | "disk" => {
                    let mut g = kind.to_string();
                    if let Some(r) = cfg.get("geometry.radius") {
                        g = format!("{g}:radius={r}");
                    }
                    if let Some(s) = cfg.get("geometry.side") {
                        g = format!("{g}:side={s}");
                    }
                    g
                }
                "file" => cfg
                    .get("geometry.path")
                    .ok_or_else(|| anyhow!("geometry.kind = file requires geometry.path"))?
                    .to_string(),
                other => bail!("unknown geometry.kind '{other}'"),
            };
        }
        if let Some(s) = cfg.parse_key("geometry.splits")? {
            self.splits = s;
        }
        if let Some(v) = cfg.get("geometry.edge_cov") {
            self.edge_cov = parse_switch(v)?;
        }
        if let Some(p) = cfg.parse_key("geometry.p_edge")? {
            self.p_edge = Some(p);
        }
        if let Some(k) = cfg.parse_key("problem.k")? {
            self.k = k;
        }
        if let Some(f) = cfg.get("problem.formulation") {
            self.formulation = parse_formulation(f)?;
        }
        if let Some(d) = cfg.get("problem.direction") {
            self.direction = parse_direction(d)?;
        }
        if let Some(n) = cfg.parse_key("discretization.n")? {
            self.n = n;
        }
        if let Some(nb) = cfg.parse_key("discretization.nbeta")? {
            self.n_beta = Some(nb);
        }
        if let Some(d) = cfg.parse_key("discretization.delta")? {
            self.delta = d;
        }
        if let Some(p) = cfg.parse_key("discretization.p_sing")? {
            self.p_sing = p;
        }
        if let Some(t) = cfg.parse_key("solver.tol")? {
            self.gmres.tol = t;
        }
        if let Some(r) = cfg.parse_key("solver.restart")? {
            self.gmres.restart = r;
        }
        if let Some(m) = cfg.parse_key("solver.maxiter")? {
            self.gmres.max_iter = m;
        }
        Ok(())
    }

    pub fn n_beta(&self) -> usize {
        self.n_beta.unwrap_or_else(|| default_n_beta(self.n))
    }

    /// Build the atlas this run describes.
    pub fn build_atlas(&self) -> Result<PatchAtlas> {
        let mut atlas = parse_geometry(&self.geometry)?;
        if let Some(p) = self.p_edge {
            atlas = atlas.with_edge_order(p);
        }
        if !self.edge_cov {
            atlas = atlas.without_edge_flags();
        }
        if self.splits > 1 {
            atlas = split_atlas(&atlas, self.splits);
        }
        Ok(atlas)
    }

    pub fn build_problem(&self) -> Result<ScatteringProblem> {
        let atlas = self.build_atlas()?;
        let mut problem = ScatteringProblem::new(atlas, self.k, self.formulation)
            .with_resolution(self.n, self.n_beta());
        problem.delta = self.delta;
        problem.p_sing = self.p_sing;
        problem.gmres = self.gmres;
        let norm = (self.direction.iter().map(|x| x * x).sum::<f64>()).sqrt();
        if norm == 0.0 {
            bail!("incident direction must be nonzero");
        }
        problem.incident = PlaneWave {
            direction: [
                self.direction[0] / norm,
                self.direction[1] / norm,
                self.direction[2] / norm,
            ],
            amplitude: num_complex::Complex64::new(1.0, 0.0),
        };
        Ok(problem)
    }
}

pub fn parse_formulation(s: &str) -> Result<KernelVariant> {
    match s {
        "combined" => Ok(KernelVariant::CombinedField),
        "single" => Ok(KernelVariant::SingleLayer),
        other => bail!("formulation must be 'combined' or 'single', got '{other}'"),
    }
}

fn parse_switch(s: &str) -> Result<bool> {
    match s {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        other => bail!("expected on/off, got '{other}'"),
    }
}

fn parse_direction(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = s
        .split_whitespace()
        .map(|t| t.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| anyhow!("bad direction '{s}': {e}"))?;
    if parts.len() != 3 {
        bail!("direction needs three components, got '{s}'");
    }
    Ok([parts[0], parts[1], parts[2]])
}

/// `sphere[:radius=R]`, `cube[:side=S]`, `disk[:radius=R]`, or a patch file
/// path.
pub fn parse_geometry(spec: &str) -> Result<PatchAtlas> {
    let (name, args) = match spec.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (spec, None),
    };
    let arg_value = |expected: &str| -> Result<Option<f64>> {
        match args {
            None => Ok(None),
            Some(a) => {
                let (key, val) = a
                    .split_once('=')
                    .ok_or_else(|| anyhow!("geometry argument '{a}' is not key=value"))?;
                if key != expected {
                    bail!("geometry '{name}' takes '{expected}=', got '{key}='");
                }
                Ok(Some(val.parse().map_err(|e| anyhow!("bad {key}: {e}"))?))
            }
        }
    };
    match name {
        "sphere" => Ok(make_sphere_atlas(arg_value("radius")?.unwrap_or(1.0), 1)),
        "cube" => Ok(make_cube_atlas(arg_value("side")?.unwrap_or(2.0))),
        "disk" => Ok(make_disk_atlas(arg_value("radius")?.unwrap_or(1.0))),
        path => {
            if args.is_some() {
                bail!("unknown built-in geometry '{name}'");
            }
            if !Path::new(path).exists() {
                bail!(
                    "geometry '{path}' is neither a built-in (sphere|cube|disk) nor an existing patch file"
                );
            }
            load_patch_file(path).map_err(|e| anyhow!("geometry file {path}: {e}"))
        }
    }
}
