//! Run configuration: a flat sectioned key-value format (TOML with one level
//! of tables, primitive values only), plus built-in presets.
//!
//! Data functions and boundary conditions are written as catalog strings,
//! e.g. `f = "vector zero zero"` or `u_top = "dirichlet vector zero ramp 1e-5"`.
//! Boundary keys are `<field>_<tag>` with field one of `u`, `phi`, `theta`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assembly::{BcEntry, BcKind, BcSpec, BcValue, ConductivityModel, ModelParams};
use crate::catalog::{ScalarFn, VectorFn};
use crate::linalg::LinearSolverKind;
use crate::mesh::{
    build_notched_square_kind, build_unit_square, BoundaryTag, CellKind, Mesh,
};
use crate::nonlinear::{LineSearch, NewtonConfig};
use crate::stepper::{ProblemData, SolverSettings, TimeGrid};
use crate::tensor::ElasticModuli;
use crate::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    pub mesh: MeshSection,
    pub material: MaterialSection,
    pub conductivity: ConductivitySection,
    pub time: TimeSection,
    #[serde(default)]
    pub data: DataSection,
    /// `<field>_<tag> = "<dirichlet|neumann> <function...>"`.
    #[serde(default)]
    pub bc: BTreeMap<String, String>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// `transient`, `mms-elastic`, or `mms-heat`.
    #[serde(default = "default_mode")]
    pub mode: String,
}

fn default_mode() -> String {
    "transient".to_string()
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { mode: default_mode() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    /// `unit-square` or `notched-square`.
    pub kind: String,
    /// `triangle` or `quadrilateral`.
    #[serde(default = "default_cell")]
    pub cell: String,
    pub n: usize,
    #[serde(default = "default_notch_length")]
    pub notch_length: f64,
    #[serde(default = "default_notch_thickness")]
    pub notch_thickness: f64,
    #[serde(default = "default_notch_y")]
    pub notch_y: f64,
}

fn default_cell() -> String {
    "quadrilateral".to_string()
}
fn default_notch_length() -> f64 {
    0.5
}
fn default_notch_thickness() -> f64 {
    1e-3
}
fn default_notch_y() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub lambda: f64,
    pub mu: f64,
    /// Thermal expansion constant.
    pub rho: f64,
    pub kappa: f64,
    /// Damage length scale; used when `ell_rule = "fixed"`.
    pub ell: f64,
    /// `fixed` keeps `ell`; `2h` sets `ell = 2 * lattice spacing` of the
    /// mesh in use.
    #[serde(default = "default_ell_rule")]
    pub ell_rule: String,
    pub gc: f64,
    #[serde(default = "default_gamma0")]
    pub gamma0: f64,
}

fn default_ell_rule() -> String {
    "fixed".to_string()
}
fn default_gamma0() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConductivitySection {
    /// `constant` or `power-law`.
    pub kind: String,
    #[serde(default = "default_k_const")]
    pub k_const: f64,
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default = "default_c0")]
    pub c1: f64,
    #[serde(default = "default_c2")]
    pub c2: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_k_const() -> f64 {
    0.158
}
fn default_c0() -> f64 {
    1.0
}
fn default_c2() -> f64 {
    2.0
}
fn default_beta() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub tau: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default = "zero_vector")]
    pub f: String,
    #[serde(default = "zero_scalar")]
    pub gamma: String,
    #[serde(default = "zero_vector")]
    pub u0: String,
    #[serde(default = "zero_vector")]
    pub v0: String,
    #[serde(default = "zero_scalar")]
    pub phi0: String,
    #[serde(default = "zero_scalar")]
    pub theta0: String,
}

fn zero_vector() -> String {
    "vector zero zero".to_string()
}
fn zero_scalar() -> String {
    "zero".to_string()
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            f: zero_vector(),
            gamma: zero_scalar(),
            u0: zero_vector(),
            v0: zero_vector(),
            phi0: zero_scalar(),
            theta0: zero_scalar(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max_iter")]
    pub newton_max_iter: usize,
    /// `auto` or `off`.
    #[serde(default = "default_line_search")]
    pub line_search: String,
    /// `direct` or `cg` (symmetric sub-solves only).
    #[serde(default = "default_linear")]
    pub linear: String,
    #[serde(default)]
    pub clip_phi: bool,
    #[serde(default)]
    pub monolithic: bool,
}

fn default_newton_tol() -> f64 {
    1e-8
}
fn default_newton_max_iter() -> usize {
    50
}
fn default_line_search() -> String {
    "auto".to_string()
}
fn default_linear() -> String {
    "direct".to_string()
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            newton_tol: default_newton_tol(),
            newton_max_iter: default_newton_max_iter(),
            line_search: default_line_search(),
            linear: default_linear(),
            clip_phi: false,
            monolithic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub directory: String,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default = "default_true")]
    pub write_vtk: bool,
}

fn default_out_dir() -> String {
    "out".to_string()
}
fn default_stride() -> usize {
    10
}
fn default_true() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: default_out_dir(),
            snapshot_stride: default_stride(),
            write_vtk: true,
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Parses and validates; parse errors carry the line/column reported by
    /// the TOML parser.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        match self.run.mode.as_str() {
            "transient" | "mms-elastic" | "mms-heat" => {}
            other => return invalid(format!("unknown run mode '{other}'")),
        }
        self.cell_kind()?;
        self.build_mesh()?;
        self.problem_data()?;
        let mesh = self.build_mesh()?;
        self.model_params(&mesh)?;
        self.bc_spec()?.validate()?;
        self.time_grid()?;
        self.solver_settings()?;
        Ok(())
    }

    pub fn cell_kind(&self) -> Result<CellKind> {
        match self.mesh.cell.as_str() {
            "triangle" => Ok(CellKind::Triangle),
            "quadrilateral" => Ok(CellKind::Quadrilateral),
            other => invalid(format!("unknown cell kind '{other}'")),
        }
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        let kind = self.cell_kind()?;
        match self.mesh.kind.as_str() {
            "unit-square" => build_unit_square(self.mesh.n, kind),
            "notched-square" => build_notched_square_kind(
                self.mesh.n,
                self.mesh.notch_length,
                self.mesh.notch_thickness,
                self.mesh.notch_y,
                kind,
            ),
            other => invalid(format!("unknown mesh kind '{other}'")),
        }
    }

    /// Length scale for a given mesh under the configured rule.
    pub fn resolved_ell(&self, mesh: &Mesh) -> Result<f64> {
        match self.material.ell_rule.as_str() {
            "fixed" => Ok(self.material.ell),
            "2h" => Ok(2.0 * mesh.spacing()),
            other => invalid(format!("unknown ell rule '{other}'")),
        }
    }

    pub fn conductivity(&self) -> Result<ConductivityModel> {
        match self.conductivity.kind.as_str() {
            "constant" => Ok(ConductivityModel::Constant { k: self.conductivity.k_const }),
            "power-law" => Ok(ConductivityModel::PowerLaw {
                c0: self.conductivity.c0,
                c1: self.conductivity.c1,
                c2: self.conductivity.c2,
                beta: self.conductivity.beta,
            }),
            other => invalid(format!("unknown conductivity kind '{other}'")),
        }
    }

    pub fn model_params(&self, mesh: &Mesh) -> Result<ModelParams> {
        let moduli = ElasticModuli::new(self.material.lambda, self.material.mu, 2)?;
        ModelParams::new(
            moduli,
            self.material.rho,
            self.material.kappa,
            self.resolved_ell(mesh)?,
            self.material.gc,
            self.material.gamma0,
            self.conductivity()?,
        )
    }

    pub fn problem_data(&self) -> Result<ProblemData> {
        Ok(ProblemData {
            f: VectorFn::parse_str(&self.data.f)?,
            gamma: ScalarFn::parse_str(&self.data.gamma)?,
            u0: VectorFn::parse_str(&self.data.u0)?,
            v0: VectorFn::parse_str(&self.data.v0)?,
            phi0: ScalarFn::parse_str(&self.data.phi0)?,
            theta0: ScalarFn::parse_str(&self.data.theta0)?,
        })
    }

    pub fn bc_spec(&self) -> Result<BcSpec> {
        let mut spec = BcSpec::default();
        for (key, value) in &self.bc {
            let (field, tag) = key
                .split_once('_')
                .ok_or_else(|| Error::Config(format!("bc key '{key}' is not <field>_<tag>")))?;
            let tag = BoundaryTag::parse(tag)?;
            let mut tokens = value.splitn(2, ' ');
            let kind = match tokens.next() {
                Some("dirichlet") => BcKind::Dirichlet,
                Some("neumann") => BcKind::Neumann,
                other => {
                    return Err(Error::Config(format!(
                        "bc '{key}' must start with dirichlet|neumann, got {other:?}"
                    )))
                }
            };
            let func = tokens
                .next()
                .ok_or_else(|| Error::Config(format!("bc '{key}' is missing its function")))?;
            match field {
                "u" => spec.u.push(BcEntry {
                    tag,
                    kind,
                    value: BcValue::Vector(VectorFn::parse_str(func)?),
                }),
                "phi" => spec.phi.push(BcEntry {
                    tag,
                    kind,
                    value: BcValue::Scalar(ScalarFn::parse_str(func)?),
                }),
                "theta" => spec.theta.push(BcEntry {
                    tag,
                    kind,
                    value: BcValue::Scalar(ScalarFn::parse_str(func)?),
                }),
                other => {
                    return Err(Error::Config(format!("bc field '{other}' not one of u/phi/theta")))
                }
            }
        }
        Ok(spec)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.time.tau, self.time.steps)
    }

    pub fn solver_settings(&self) -> Result<SolverSettings> {
        let line_search = match self.solver.line_search.as_str() {
            "auto" => LineSearch::Auto,
            "off" => LineSearch::Off,
            other => return invalid(format!("unknown line search '{other}'")),
        };
        let linear = match self.solver.linear.as_str() {
            "direct" => LinearSolverKind::Direct,
            "cg" => LinearSolverKind::ConjugateGradient,
            other => return invalid(format!("unknown linear solver '{other}'")),
        };
        let newton = NewtonConfig {
            tol_rel: self.solver.newton_tol,
            max_iter: self.solver.newton_max_iter,
            line_search,
            linear,
        };
        newton.validate()?;
        Ok(SolverSettings {
            newton,
            clip_phi: self.solver.clip_phi,
            monolithic: self.solver.monolithic,
        })
    }
}

/// Built-in presets.
pub fn preset(name: &str) -> Result<RunConfig> {
    match name {
        // notched-square loading experiment: quadrilateral elements,
        // monotonic vertical displacement at the top, heat flux on the notch
        // front
        "sens-notch" => {
            let mut bc = BTreeMap::new();
            bc.insert("u_bottom".into(), "dirichlet vector zero zero".into());
            bc.insert("u_top".into(), "dirichlet vector zero ramp 1e-5".into());
            bc.insert("theta_notch_front".into(), "neumann constant 300".into());
            Ok(RunConfig {
                run: RunSection { mode: "transient".into() },
                mesh: MeshSection {
                    kind: "notched-square".into(),
                    cell: "quadrilateral".into(),
                    n: 20,
                    notch_length: 0.5,
                    notch_thickness: 1e-3,
                    notch_y: 0.5,
                },
                material: MaterialSection {
                    lambda: 8.88e9,
                    mu: 13.33e9,
                    rho: 2e-6,
                    kappa: 1e-8,
                    ell: 0.1,
                    ell_rule: "2h".into(),
                    gc: 3.0e6,
                    gamma0: 100.0,
                },
                conductivity: ConductivitySection {
                    kind: "constant".into(),
                    k_const: 0.158,
                    ..default_conductivity()
                },
                time: TimeSection { tau: 1e-3, steps: 200 },
                data: DataSection { phi0: "one".into(), ..Default::default() },
                bc,
                solver: SolverSection::default(),
                output: OutputSection { directory: "out/sens-notch".into(), ..Default::default() },
            })
        }
        "zero" => Ok(RunConfig {
            run: RunSection { mode: "transient".into() },
            mesh: MeshSection {
                kind: "unit-square".into(),
                cell: "quadrilateral".into(),
                n: 4,
                notch_length: default_notch_length(),
                notch_thickness: default_notch_thickness(),
                notch_y: default_notch_y(),
            },
            material: MaterialSection {
                lambda: 1.0,
                mu: 1.0,
                rho: 0.5,
                kappa: 1e-2,
                ell: 0.5,
                ell_rule: "fixed".into(),
                gc: 2.0,
                gamma0: 100.0,
            },
            conductivity: ConductivitySection { kind: "constant".into(), k_const: 1.0, ..default_conductivity() },
            time: TimeSection { tau: 1e-2, steps: 5 },
            data: DataSection::default(),
            bc: BTreeMap::new(),
            solver: SolverSection::default(),
            output: OutputSection { directory: "out/zero".into(), ..Default::default() },
        }),
        "mms-elastic" | "mms-heat" => Ok(RunConfig {
            run: RunSection { mode: name.into() },
            mesh: MeshSection {
                kind: "unit-square".into(),
                cell: if name == "mms-heat" { "quadrilateral" } else { "triangle" }.into(),
                n: 8,
                notch_length: default_notch_length(),
                notch_thickness: default_notch_thickness(),
                notch_y: default_notch_y(),
            },
            material: MaterialSection {
                lambda: 2.0,
                mu: 3.0,
                rho: 0.0,
                kappa: 1e-8,
                ell: 0.5,
                ell_rule: "fixed".into(),
                gc: 2.0,
                gamma0: 100.0,
            },
            conductivity: ConductivitySection { kind: "constant".into(), k_const: 0.158, ..default_conductivity() },
            time: TimeSection { tau: 1e-3, steps: 1 },
            data: DataSection::default(),
            bc: BTreeMap::new(),
            solver: SolverSection::default(),
            output: OutputSection { directory: format!("out/{name}"), ..Default::default() },
        }),
        other => invalid(format!(
            "unknown preset '{other}' (available: sens-notch, zero, mms-elastic, mms-heat)"
        )),
    }
}

fn default_conductivity() -> ConductivitySection {
    ConductivitySection {
        kind: "constant".into(),
        k_const: default_k_const(),
        c0: default_c0(),
        c1: default_c0(),
        c2: default_c2(),
        beta: default_beta(),
    }
}
