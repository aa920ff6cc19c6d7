//! Run configuration files.
//!
//! A configuration is a TOML document:
//!
//! ```toml
//! k = 2
//! nu = 1e-3
//! gamma = 900.0            # optional, default 100 (k + 1)^2
//! source = ["0", "0"]      # optional body force
//!
//! [permeability]           # scalar, matrix, or regions over a default
//! scalar = 1e8
//!
//! [mesh]
//! family = "quad"
//! cells = 4096
//! seed = 0
//! domain = "unit-square"   # or "cylinder", "step", "rect(x0, y0, x1, y1)", ...
//! # file = "mesh.json"     # instead of a generator, relative to the config
//!
//! [[boundary]]             # first matching `where` wins
//! tag = "lid"
//! where = "y = 1"
//! type = "dirichlet"
//! g = ["1", "0"]
//!
//! [output]
//! vtk = "cavity.vtk"
//! csv = "cavity.csv"
//! ```
//!
//! Slip sides take `g1` and `g2`, free-outflow sides take no data. With an
//! `[exact]` section the source and boundary data are derived from the exact
//! solution and slip sides need their outward `normal` instead.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use brinkman_vem::analysis::{ExactSolution, ManufacturedCase, SideCondition, Study};
use brinkman_vem::assembly::Problem;
use brinkman_vem::dataexpr::{parse, to_field};
use brinkman_vem::element::{Permeability, Tensor};
use brinkman_vem::mesh::{generate, io, Domain, Family, Predicate, PolygonalMesh, TagRule};
use brinkman_vem::nitsche::{BoundarySpec, Condition, NitscheParams, VectorFn};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_nu")]
    pub nu: f64,
    pub gamma: Option<f64>,
    pub source: Option<[String; 2]>,
    #[serde(default)]
    pub permeability: PermeabilityConfig,
    pub mesh: MeshConfig,
    #[serde(default)]
    pub boundary: Vec<BoundaryConfig>,
    pub exact: Option<ExactConfig>,
    pub convergence: Option<ConvergenceConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_k() -> usize {
    2
}

fn default_nu() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermeabilityConfig {
    pub scalar: Option<f64>,
    pub matrix: Option<Tensor>,
    #[serde(default)]
    pub regions: Vec<RegionConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    #[serde(rename = "where")]
    pub region: String,
    pub scalar: Option<f64>,
    pub matrix: Option<Tensor>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub family: Option<String>,
    pub cells: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_domain")]
    pub domain: String,
    pub file: Option<PathBuf>,
}

fn default_domain() -> String {
    "unit-square".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    Dirichlet,
    Slip,
    Outflow,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub tag: String,
    #[serde(rename = "where")]
    pub region: Option<String>,
    #[serde(rename = "type")]
    pub kind: BoundaryKind,
    pub g: Option<[String; 2]>,
    pub g1: Option<[String; 2]>,
    pub g2: Option<[String; 2]>,
    pub normal: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactConfig {
    /// `stream-function` selects the builtin unit-square flow.
    pub builtin: Option<String>,
    pub u: Option<[String; 2]>,
    pub p: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default)]
    pub nu_sweep: Vec<f64>,
}

fn default_levels() -> usize {
    4
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub vtk: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

fn config_error(message: impl Into<String>) -> CliError {
    CliError::Config(message.into())
}

/// Parses `unit-square`, `cylinder`, `step`, `rect(x0, y0, x1, y1)`,
/// `cylinder(L, H, cx, cy, r)` or `step(L, H, step_length, step_height)`.
pub fn parse_domain(text: &str) -> Result<Domain, CliError> {
    let text = text.trim();
    match text {
        "unit-square" => return Ok(Domain::unit_square()),
        "cylinder" => return Ok(Domain::cylinder_channel()),
        "step" => return Ok(Domain::backward_step()),
        _ => {}
    }
    let (name, args) = text
        .strip_suffix(')')
        .and_then(|t| t.split_once('('))
        .ok_or_else(|| config_error(format!("unknown domain `{text}`")))?;
    let values: Vec<f64> = args
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| config_error(format!("domain `{text}`: bad number")))?;
    match (name.trim(), values.as_slice()) {
        ("rect", &[x0, y0, x1, y1]) => Ok(Domain::Rect { min: [x0, y0], max: [x1, y1] }),
        ("cylinder", &[length, height, cx, cy, radius]) => {
            Ok(Domain::Cylinder { length, height, center: [cx, cy], radius })
        }
        ("step", &[length, height, step_length, step_height]) => {
            Ok(Domain::Step { length, height, step_length, step_height })
        }
        _ => Err(config_error(format!("unknown domain `{text}`"))),
    }
}

fn vector_field(exprs: &[String; 2], what: &str) -> Result<VectorFn, CliError> {
    let parse_one = |s: &String| parse(s).map_err(|e| config_error(format!("{what}: `{s}`: {e}")));
    let (a, b) = (to_field(parse_one(&exprs[0])?), to_field(parse_one(&exprs[1])?));
    Ok(Arc::new(move |x: [f64; 2]| [a(x[0], x[1]), b(x[0], x[1])]))
}

fn tensor_of(scalar: Option<f64>, matrix: Option<Tensor>, what: &str) -> Result<Option<Tensor>, CliError> {
    match (scalar, matrix) {
        (Some(s), None) => Ok(Some([[s, 0.0], [0.0, s]])),
        (None, Some(m)) => Ok(Some(m)),
        (None, None) => Ok(None),
        (Some(_), Some(_)) => Err(config_error(format!("{what}: give either `scalar` or `matrix`"))),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, CliError> {
        let mut config: RunConfig = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        config.base_dir = base_dir.into();
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, dir)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.k < 2 {
            return Err(config_error(format!("k must be at least 2, got {}", self.k)));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(config_error(format!("nu must lie in (0, 1], got {}", self.nu)));
        }
        self.permeability()?.validate()?;
        if let Some(g) = self.gamma {
            NitscheParams::uniform(g).validate()?;
        }
        let mut seen = std::collections::BTreeSet::new();
        for b in &self.boundary {
            if !seen.insert(b.tag.as_str()) {
                return Err(config_error(format!("boundary tag `{}` listed twice", b.tag)));
            }
        }
        if self.exact.is_some() {
            if self.source.is_some() {
                return Err(config_error("the source is derived from the exact solution"));
            }
            for b in &self.boundary {
                if b.g.is_some() || b.g1.is_some() || b.g2.is_some() {
                    return Err(config_error(format!("boundary `{}`: data is derived from the exact solution", b.tag)));
                }
                if b.region.is_none() {
                    return Err(config_error(format!("boundary `{}`: manufactured cases need `where`", b.tag)));
                }
                match b.kind {
                    BoundaryKind::Outflow => {
                        return Err(config_error(format!(
                            "boundary `{}`: manufactured cases support dirichlet and slip sides",
                            b.tag
                        )))
                    }
                    BoundaryKind::Slip if b.normal.is_none() => {
                        return Err(config_error(format!("boundary `{}`: slip side needs `normal`", b.tag)))
                    }
                    _ => {}
                }
            }
        } else {
            for b in &self.boundary {
                let ok = match b.kind {
                    BoundaryKind::Dirichlet => b.g.is_some() && b.g1.is_none() && b.g2.is_none(),
                    BoundaryKind::Slip => b.g.is_none() && b.g1.is_some() && b.g2.is_some(),
                    BoundaryKind::Outflow => b.g.is_none() && b.g1.is_none() && b.g2.is_none(),
                };
                if !ok {
                    let need = match b.kind {
                        BoundaryKind::Dirichlet => "`g`",
                        BoundaryKind::Slip => "`g1` and `g2`",
                        BoundaryKind::Outflow => "no data",
                    };
                    return Err(config_error(format!("boundary `{}`: {:?} takes {need}", b.tag, b.kind)));
                }
            }
        }
        if self.mesh.file.is_none() && (self.mesh.family.is_none() || self.mesh.cells.is_none()) {
            return Err(config_error("mesh: give `file` or both `family` and `cells`"));
        }
        Ok(())
    }

    pub fn permeability(&self) -> Result<Permeability, CliError> {
        let p = &self.permeability;
        let base = tensor_of(p.scalar, p.matrix, "permeability")?;
        if p.regions.is_empty() {
            return Ok(match (p.scalar, base) {
                (Some(s), _) => Permeability::Scalar(s),
                (None, Some(m)) => Permeability::Matrix(m),
                (None, None) => Permeability::default(),
            });
        }
        let regions = p
            .regions
            .iter()
            .map(|r| {
                let pred: Predicate = r.region.parse()?;
                let m = tensor_of(r.scalar, r.matrix, "permeability region")?
                    .ok_or_else(|| config_error(format!("permeability region `{}` has no value", r.region)))?;
                Ok((pred, m))
            })
            .collect::<Result<_, CliError>>()?;
        Ok(Permeability::Regions { regions, default: base.unwrap_or([[1.0, 0.0], [0.0, 1.0]]) })
    }

    pub fn family(&self) -> Result<Family, CliError> {
        let name = self.mesh.family.as_deref().ok_or_else(|| config_error("mesh: `family` missing"))?;
        name.parse().map_err(|_| config_error(format!("unknown mesh family `{name}`")))
    }

    pub fn domain(&self) -> Result<Domain, CliError> {
        parse_domain(&self.mesh.domain)
    }

    pub fn tag_rules(&self) -> Result<Vec<TagRule>, CliError> {
        self.boundary
            .iter()
            .filter_map(|b| b.region.as_ref().map(|r| (r, &b.tag)))
            .map(|(r, tag)| Ok(TagRule::new(r.parse::<Predicate>()?, tag.clone())))
            .collect()
    }

    /// The configured mesh, tagged by the `where` predicates if any.
    pub fn build_mesh(&self) -> Result<PolygonalMesh, CliError> {
        let mesh = match &self.mesh.file {
            Some(file) => io::read(self.base_dir.join(file))?,
            None => {
                let cells = self.mesh.cells.ok_or_else(|| config_error("mesh: `cells` missing"))?;
                generate(self.family()?, cells, self.mesh.seed, &self.domain()?)?
            }
        };
        let rules = self.tag_rules()?;
        if rules.is_empty() {
            Ok(mesh)
        } else {
            Ok(mesh.tag_boundary(&rules)?)
        }
    }

    pub fn manufactured(&self) -> Result<Option<ManufacturedCase>, CliError> {
        let Some(exact) = &self.exact else {
            return Ok(None);
        };
        let solution = match (&exact.builtin, &exact.u, &exact.p) {
            (Some(name), None, None) if name == "stream-function" => ExactSolution::stream_function(),
            (Some(name), None, None) => return Err(config_error(format!("unknown builtin exact solution `{name}`"))),
            (None, Some(u), Some(p)) => {
                let parse_one = |s: &String| parse(s).map_err(|e| config_error(format!("exact: `{s}`: {e}")));
                ExactSolution::from_expressions(&parse_one(&u[0])?, &parse_one(&u[1])?, &parse_one(p)?)
            }
            _ => return Err(config_error("exact: give `builtin` or both `u` and `p`")),
        };
        let sides = self
            .boundary
            .iter()
            .map(|b| {
                let pred: Predicate = b.region.as_deref().unwrap_or_default().parse()?;
                let cond = match b.kind {
                    BoundaryKind::Slip => SideCondition::Slip { normal: b.normal.unwrap_or_default() },
                    _ => SideCondition::Dirichlet,
                };
                Ok((b.tag.clone(), pred, cond))
            })
            .collect::<Result<_, CliError>>()?;
        Ok(Some(ManufacturedCase { exact: solution, nu: self.nu, permeability: self.permeability()?, sides }))
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        let mut problem = match self.manufactured()? {
            Some(case) => case.problem(self.k)?,
            None => {
                let mut spec = BoundarySpec::new();
                for b in &self.boundary {
                    let cond = match b.kind {
                        BoundaryKind::Dirichlet => Condition::Dirichlet {
                            g: vector_field(b.g.as_ref().expect("validated"), &b.tag)?,
                        },
                        BoundaryKind::Slip => Condition::Slip {
                            g1: vector_field(b.g1.as_ref().expect("validated"), &b.tag)?,
                            g2: vector_field(b.g2.as_ref().expect("validated"), &b.tag)?,
                        },
                        BoundaryKind::Outflow => Condition::FreeOutflow,
                    };
                    spec.insert(b.tag.clone(), cond);
                }
                let mut problem = Problem::new(self.k, self.nu, spec);
                problem.permeability = self.permeability()?;
                problem.source = self.source.as_ref().map(|s| vector_field(s, "source")).transpose()?;
                problem
            }
        };
        if let Some(g) = self.gamma {
            problem.nitsche = NitscheParams::uniform(g);
        }
        Ok(problem)
    }

    /// Mesh ladder starting at the configured cell count.
    pub fn study(&self, levels: usize) -> Result<Study, CliError> {
        if self.mesh.file.is_some() {
            return Err(config_error("convergence studies need a generated mesh"));
        }
        if levels < 2 {
            return Err(config_error(format!("a convergence study needs at least 2 levels, got {levels}")));
        }
        let cells = self.mesh.cells.ok_or_else(|| config_error("mesh: `cells` missing"))?;
        let mut study = Study::ladder(self.family()?, self.k, cells, levels);
        study.seed = self.mesh.seed;
        study.domain = self.domain()?;
        study.gamma = self.gamma;
        Ok(study)
    }
}
