//! Strict `key = value` run configuration for `hwforms solve`.
//!
//! `#` starts a comment. Keys may appear once. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use hwforms::constitutive::{EnergyModel, MaterialKind, MaterialParams};
use hwforms::hw::{BoundaryData, SolveMode, SolverConfig};
use hwforms::mesh::{build_box_mesh, load_off, SimplicialMesh};

const REQUIRED: [&str; 10] =
    ["dim", "mesh", "material", "lambda", "mu", "mode", "tol_rel", "max_iter", "dirichlet", "out_prefix"];
const OPTIONAL: [&str; 4] = ["neumann", "body_force", "tol_abs", "load_steps"];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config line {}: {}", self.line, self.message)
    }
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError { line, message: message.into() })
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    /// Unit box with the given divisions per axis.
    Box(Vec<usize>),
    File(PathBuf),
}

/// `A|b` prescribed on every vertex of the listed markers; `None` means all
/// boundary markers.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineData {
    pub markers: Option<Vec<u32>>,
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub mesh: MeshSource,
    pub material: MaterialKind,
    pub lambda: f64,
    pub mu: f64,
    pub mode: SolveMode,
    pub tol_rel: f64,
    pub tol_abs: Option<f64>,
    pub max_iter: usize,
    pub load_steps: usize,
    pub dirichlet: Vec<AffineData>,
    pub neumann: Vec<(u32, Vec<f64>)>,
    pub body_force: Option<Vec<f64>>,
    pub out_prefix: PathBuf,
}

struct Entry {
    line: usize,
    value: String,
}

fn number<T: std::str::FromStr>(key: &str, e: &Entry) -> Result<T, ConfigError> {
    e.value.parse().or_else(|_| err(e.line, format!("`{key}`: cannot parse `{}`", e.value)))
}

fn positive(key: &str, e: &Entry) -> Result<f64, ConfigError> {
    let v: f64 = number(key, e)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        err(e.line, format!("`{key}` must be positive, got {v}"))
    }
}

fn vector(key: &str, text: &str, len: usize, line: usize) -> Result<Vec<f64>, ConfigError> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .or_else(|_| err(line, format!("`{key}`: cannot parse vector `{text}`")))?;
    if v.len() != len || v.iter().any(|x| !x.is_finite()) {
        return err(line, format!("`{key}`: expected {len} finite components in `{text}`"));
    }
    Ok(v)
}

fn markers(key: &str, text: &str, line: usize) -> Result<Option<Vec<u32>>, ConfigError> {
    if text.trim() == "*" {
        return Ok(None);
    }
    text.split('+')
        .map(|m| m.trim().parse::<u32>())
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
        .or_else(|_| err(line, format!("`{key}`: bad marker list `{text}`")))
}

/// `markers:A|b; markers:A|b; ...` with `A` row-major, markers joined by `+`.
fn dirichlet(dim: usize, e: &Entry) -> Result<Vec<AffineData>, ConfigError> {
    e.value
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (m, map) = item.split_once(':').ok_or_else(|| ConfigError {
                line: e.line,
                message: format!("`dirichlet`: expected `markers:A|b` in `{item}`"),
            })?;
            let (a, b) = map.split_once('|').ok_or_else(|| ConfigError {
                line: e.line,
                message: format!("`dirichlet`: expected `A|b` in `{map}`"),
            })?;
            Ok(AffineData {
                markers: markers("dirichlet", m, e.line)?,
                a: DMatrix::from_row_slice(dim, dim, &vector("dirichlet", a, dim * dim, e.line)?),
                b: vector("dirichlet", b, dim, e.line)?,
            })
        })
        .collect()
}

/// `marker:t; marker:t; ...`
fn neumann(dim: usize, e: &Entry) -> Result<Vec<(u32, Vec<f64>)>, ConfigError> {
    e.value
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (m, t) = item.split_once(':').ok_or_else(|| ConfigError {
                line: e.line,
                message: format!("`neumann`: expected `marker:t` in `{item}`"),
            })?;
            let marker = m.trim().parse().or_else(|_| err(e.line, format!("`neumann`: bad marker `{m}`")))?;
            Ok((marker, vector("neumann", t, dim, e.line)?))
        })
        .collect()
}

fn mesh_source(dim: usize, e: &Entry, base: &Path) -> Result<MeshSource, ConfigError> {
    match e.value.strip_prefix("box:") {
        Some(spec) => {
            let div = crate::parse_divisions(spec)
                .map_err(|m| ConfigError { line: e.line, message: format!("`mesh`: {m}") })?;
            if div.len() != dim {
                return err(e.line, format!("`mesh`: {} divisions given for dim {dim}", div.len()));
            }
            Ok(MeshSource::Box(div))
        }
        None => Ok(MeshSource::File(base.join(&e.value))),
    }
}

impl RunConfig {
    /// Relative mesh paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        let mut last_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            last_line = line;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return err(line, format!("expected `key = value`, got `{content}`"));
            };
            let (k, v) = (k.trim(), v.trim());
            if !REQUIRED.contains(&k) && !OPTIONAL.contains(&k) {
                return err(line, format!("unknown key `{k}`"));
            }
            if v.is_empty() {
                return err(line, format!("`{k}` has no value"));
            }
            if let Some(prev) = entries.get(k) {
                return err(line, format!("duplicate key `{k}` (first set on line {})", prev.line));
            }
            entries.insert(k.to_string(), Entry { line, value: v.to_string() });
        }
        if let Some(missing) = REQUIRED.iter().find(|k| !entries.contains_key(**k)) {
            return err(last_line, format!("missing required key `{missing}`"));
        }
        let get = |k: &str| &entries[k];

        let dim: usize = number("dim", get("dim"))?;
        if dim != 2 && dim != 3 {
            return err(get("dim").line, format!("`dim` must be 2 or 3, got {dim}"));
        }
        let material = match get("material").value.as_str() {
            "svk" => MaterialKind::SaintVenantKirchhoff,
            "neohookean" => MaterialKind::NeoHookean,
            other => return err(get("material").line, format!("`material` must be svk or neohookean, got `{other}`")),
        };
        let mode = match get("mode").value.as_str() {
            "monolithic" => SolveMode::Monolithic,
            "condensed" => SolveMode::Condensed,
            other => return err(get("mode").line, format!("`mode` must be monolithic or condensed, got `{other}`")),
        };
        let lambda: f64 = number("lambda", get("lambda"))?;
        let mu = positive("mu", get("mu"))?;
        if MaterialParams::new(lambda, mu, dim).is_err() {
            return err(get("lambda").line, format!("`lambda` = {lambda} gives a non-positive bulk modulus"));
        }
        let max_iter: usize = number("max_iter", get("max_iter"))?;
        let load_steps = match entries.get("load_steps") {
            Some(e) => number("load_steps", e)?,
            None => 1,
        };
        if load_steps == 0 {
            return err(entries["load_steps"].line, "`load_steps` must be at least 1");
        }
        Ok(Self {
            dim,
            mesh: mesh_source(dim, get("mesh"), base)?,
            material,
            lambda,
            mu,
            mode,
            tol_rel: positive("tol_rel", get("tol_rel"))?,
            tol_abs: entries.get("tol_abs").map(|e| positive("tol_abs", e)).transpose()?,
            max_iter,
            load_steps,
            dirichlet: dirichlet(dim, get("dirichlet"))?,
            neumann: entries.get("neumann").map(|e| neumann(dim, e)).transpose()?.unwrap_or_default(),
            body_force: entries.get("body_force").map(|e| vector("body_force", &e.value, dim, e.line)).transpose()?,
            out_prefix: base.join(&get("out_prefix").value),
        })
    }

    pub fn model(&self) -> EnergyModel {
        EnergyModel::new(self.material, MaterialParams { lambda: self.lambda, mu: self.mu })
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            mode: self.mode,
            tol_rel: self.tol_rel,
            tol_abs: self.tol_abs,
            max_iter: self.max_iter,
            ..SolverConfig::default()
        }
    }

    pub fn build_mesh(&self) -> hwforms::Result<SimplicialMesh> {
        let mesh = match &self.mesh {
            MeshSource::Box(div) => build_box_mesh(self.dim, div, &vec![0.0; self.dim], &vec![1.0; self.dim])?,
            MeshSource::File(path) => load_off(path)?,
        };
        if mesh.dim() != self.dim {
            return Err(hwforms::Error::DimensionMismatch(format!(
                "config says dim {} but the mesh is {}D",
                self.dim,
                mesh.dim()
            )));
        }
        Ok(mesh)
    }

    pub fn boundary_data(&self, mesh: &SimplicialMesh) -> BoundaryData {
        let all: Vec<u32> = (1..=2 * self.dim as u32).collect();
        let mut bcs = BoundaryData::default();
        for d in &self.dirichlet {
            bcs.add_affine_dirichlet(mesh, d.markers.as_deref().unwrap_or(&all), &d.a, &d.b);
        }
        bcs.neumann = self.neumann.iter().cloned().collect();
        bcs.body_force = self.body_force.clone();
        bcs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STRETCH: &str = "\
# uniaxial stretch
dim = 2
mesh = box:4x4
material = neohookean
lambda = 1.5
mu = 1.0
mode = monolithic
tol_rel = 1e-10
max_iter = 20
dirichlet = *:1.1,0,0,1|0,0
out_prefix = out/run
";

    #[test]
    fn parses_a_full_config() {
        let c = RunConfig::parse(STRETCH, Path::new("/tmp")).unwrap();
        assert_eq!(c.mesh, MeshSource::Box(vec![4, 4]));
        assert_eq!(c.dirichlet[0].markers, None);
        assert_eq!(c.dirichlet[0].a[(0, 0)], 1.1);
        assert_eq!(c.out_prefix, PathBuf::from("/tmp/out/run"));
        assert_eq!(c.load_steps, 1);
    }

    #[test]
    fn optional_keys() {
        let text =
            format!("{STRETCH}neumann = 2:0.1,0; 4:0,-0.2\nbody_force = 0,-0.1\ntol_abs = 1e-13\nload_steps = 3\n");
        let c = RunConfig::parse(&text, Path::new(".")).unwrap();
        assert_eq!(c.neumann, vec![(2, vec![0.1, 0.0]), (4, vec![0.0, -0.2])]);
        assert_eq!(c.body_force, Some(vec![0.0, -0.1]));
        assert_eq!(c.tol_abs, Some(1e-13));
        assert_eq!(c.load_steps, 3);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            (STRETCH.replace("mu = 1.0", "mew = 1.0"), 6, "mew"),
            (STRETCH.replace("mu = 1.0", "mu = -1"), 6, "mu"),
            (STRETCH.replace("max_iter = 20", "max_iter 20"), 9, "key = value"),
            (format!("{STRETCH}dim = 3\n"), 12, "duplicate"),
            (STRETCH.replace("out_prefix = out/run\n", ""), 10, "out_prefix"),
            (STRETCH.replace("*:1.1,0,0,1|0,0", "*:1.1,0,0|0,0"), 10, "dirichlet"),
            (STRETCH.replace("box:4x4", "box:4x4x4"), 3, "mesh"),
        ];
        for (text, line, needle) in cases {
            let e = RunConfig::parse(&text, Path::new(".")).unwrap_err();
            assert_eq!(e.line, line, "{e}");
            assert!(e.message.contains(needle), "{e}");
        }
    }
}
