//! Experiment configuration (JSON).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adhesive::{AdhesiveEnergyConfig, AdhesiveParams};
use crate::adjoint::BranchPolicy;
use crate::error::{Error, Result};
use crate::fem::{ElasticityTensor, LoadingEdge, RectangleGeometry};
use crate::forward::{ForwardModel, LoadingProgram, LoadingSpec};
use crate::identify::{planted_parameters, IdentificationProblem, ParameterBounds, PhasePlan, TrackingData};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// Nodes along the glued edge.
    pub nx: usize,
    /// Nodes through the thickness.
    pub ny: usize,
    pub width: f64,
    pub height: f64,
    pub contact_nodes: usize,
    pub loading_edge: LoadingEdge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub young: f64,
    pub poisson: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma_u: f64,
    pub sigma_z: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    pub zeta: f64,
    /// Tracking data file; synthesized from `planted` when absent.
    #[serde(default)]
    pub data: Option<String>,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
}

/// Parameters that generate synthetic data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedConfig {
    /// Means of `alpha_f`, `kappa_n`, `kappa_t`.
    pub means: [f64; 3],
    /// Peak-to-peak variation relative to the mean.
    #[serde(default)]
    pub variation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub qp: f64,
    pub stationarity: f64,
    /// Relative finite-difference step for `grad-check` (Richardson-extrapolated).
    pub fd_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { qp: crate::qp::DEFAULT_TOL, stationarity: 1e-4, fd_step: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_magnification")]
    pub magnification: f64,
    #[serde(default = "default_true")]
    pub svg: bool,
}

fn default_magnification() -> f64 {
    50.0
}

fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { magnification: default_magnification(), svg: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mesh: MeshConfig,
    pub material: MaterialConfig,
    #[serde(default)]
    pub adhesive: AdhesiveEnergyConfig,
    pub loading: LoadingSpec,
    pub objective: ObjectiveSection,
    pub planted: PlantedConfig,
    /// Initial delamination, uniform along the boundary.
    #[serde(default = "default_z0")]
    pub initial_delamination: f64,
    #[serde(default)]
    pub bounds: ParameterBounds,
    pub plan: PhasePlan,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub branch_policy: BranchPolicy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_z0() -> f64 {
    1.0
}

pub const FULL: &str = include_str!("../../configs/full.json");
pub const DESK: &str = include_str!("../../configs/desk.json");

/// Bundled configuration by name (`full` or `desk`).
pub fn bundled(name: &str) -> Option<ExperimentConfig> {
    let text = match name.trim_end_matches(".json") {
        "full" => FULL,
        "desk" => DESK,
        _ => return None,
    };
    parse_config(text).ok()
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("parse error: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

impl ExperimentConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |r: Result<()>| {
            if let Err(e) = r {
                out.push(e.to_string());
            }
        };
        let m = &self.mesh;
        if m.nx < 2 || m.ny < 2 {
            push(Err(Error::Config(format!("mesh: need at least 2x2 nodes, got {}x{}", m.nx, m.ny))));
        }
        if !(m.width > 0.0 && m.height > 0.0 && m.width.is_finite() && m.height.is_finite()) {
            push(Err(Error::Config("mesh: width and height must be positive".into())));
        }
        if m.contact_nodes < 2 || m.contact_nodes > m.nx {
            push(Err(Error::Config(format!("mesh.contact_nodes = {} must lie in [2, nx]", m.contact_nodes))));
        }
        push(self.elasticity().validate());
        push(self.adhesive.validate());
        push(self.loading.validate());
        if !(self.objective.zeta > 0.0 && self.objective.zeta.is_finite()) {
            push(Err(Error::Config(format!("objective.zeta = {} must be positive", self.objective.zeta))));
        }
        if let Some(n) = &self.objective.noise {
            if !(n.sigma_u >= 0.0 && n.sigma_z >= 0.0) {
                push(Err(Error::Config("objective.noise: standard deviations must be nonnegative".into())));
            }
        }
        if self.planted.means.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            push(Err(Error::Config("planted.means must be positive".into())));
        }
        if !(0.0..1.0).contains(&self.planted.variation) {
            push(Err(Error::Config("planted.variation must lie in [0, 1)".into())));
        }
        if !(0.0..=1.0).contains(&self.initial_delamination) {
            push(Err(Error::Config("initial_delamination must lie in [0, 1]".into())));
        }
        let t = &self.tolerances;
        if !(t.qp > 0.0 && t.stationarity > 0.0 && t.fd_step > 0.0) {
            push(Err(Error::Config("tolerances must be positive".into())));
        }
        if !(self.output.magnification > 0.0 && self.output.magnification.is_finite()) {
            push(Err(Error::Config("output.magnification must be positive".into())));
        }
        out.extend(self.bounds.violations());
        if m.contact_nodes >= 2 {
            out.extend(self.plan.violations(m.contact_nodes));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("{} violation(s): {}", v.len(), v.join("; "))))
        }
    }

    pub fn elasticity(&self) -> ElasticityTensor {
        ElasticityTensor { young: self.material.young, poisson: self.material.poisson }
    }

    pub fn geometry(&self) -> RectangleGeometry {
        RectangleGeometry {
            width: self.mesh.width,
            height: self.mesh.height,
            contact_nodes: self.mesh.contact_nodes,
            loading_edge: self.mesh.loading_edge,
        }
    }

    pub fn build_model(&self) -> Result<ForwardModel> {
        ForwardModel::structured(
            self.mesh.nx,
            self.mesh.ny,
            &self.geometry(),
            &self.elasticity(),
            &self.adhesive,
            self.tolerances.qp,
        )
    }

    pub fn build_loading(&self, model: &ForwardModel) -> Result<LoadingProgram> {
        self.loading.build(model.n_dirichlet())
    }

    pub fn planted_params(&self) -> AdhesiveParams {
        planted_parameters(self.mesh.contact_nodes, self.planted.means, self.planted.variation)
    }

    pub fn z0(&self) -> Vec<f64> {
        vec![self.initial_delamination; self.mesh.contact_nodes]
    }

    /// Identification problem from a prebuilt model; data are read from
    /// `objective.data` (relative to `base`) or synthesized from `planted`.
    pub fn build_problem(&self, model: ForwardModel, base: Option<&Path>) -> Result<IdentificationProblem> {
        let loading = self.build_loading(&model)?;
        let z0 = self.z0();
        let data = match &self.objective.data {
            Some(p) => {
                let path = base.map_or_else(|| Path::new(p).to_path_buf(), |b| b.join(p));
                read_json::<TrackingData>(&path)?
            }
            None => {
                let traj = crate::forward::simulate(&model, &self.planted_params(), &loading, &z0)?;
                TrackingData::from_trajectory(&model, &traj, &loading)
            }
        };
        let data = match &self.objective.noise {
            Some(n) if n.sigma_u > 0.0 || n.sigma_z > 0.0 => data.with_noise(n.sigma_u, n.sigma_z, n.seed)?,
            _ => data,
        };
        IdentificationProblem::new(model, loading, z0, data, self.objective.zeta, self.branch_policy)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}
