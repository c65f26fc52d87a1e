//! Shared fixtures for the criterion benches.

use delamid::io::bundled;
use delamid::{simulate, AdhesiveParams, ExperimentConfig, ForwardModel, IdentificationProblem, LoadingProgram, Trajectory};

pub struct Fixture {
    pub cfg: ExperimentConfig,
    pub model: ForwardModel,
    pub loading: LoadingProgram,
    pub params: AdhesiveParams,
    pub traj: Trajectory,
}

/// Model, loading and planted trajectory of a bundled configuration.
pub fn fixture(name: &str) -> Fixture {
    let cfg = bundled(name).expect("bundled configuration");
    let model = cfg.build_model().expect("model");
    let loading = cfg.build_loading(&model).expect("loading");
    let params = cfg.planted_params();
    let traj = simulate(&model, &params, &loading, &cfg.z0()).expect("trajectory");
    Fixture { cfg, model, loading, params, traj }
}

pub fn problem(f: &Fixture) -> IdentificationProblem {
    f.cfg.build_problem(f.model.clone(), None).expect("problem")
}
