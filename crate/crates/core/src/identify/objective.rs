//! Tracking objective and its adjoint gradient.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::grouping::Grouping;
use crate::adhesive::AdhesiveParams;
use crate::adjoint::solve::ENUMERATION_CAP;
use crate::adjoint::{check_m_stationarity, solve_adjoint, BoxBounds, BranchPolicy, StateGradients, StationarityReport};
use crate::error::{Error, Result};
use crate::forward::{simulate, ForwardModel, LoadingProgram, Trajectory};

/// Desired states for `k = 0..=K`: contact DOFs (nodal frame), free DOFs
/// and delamination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingData {
    pub u_c: Vec<Vec<f64>>,
    pub u_f: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
}

impl TrackingData {
    pub fn from_trajectory(model: &ForwardModel, traj: &Trajectory, loading: &LoadingProgram) -> Self {
        Self {
            u_c: traj.u.clone(),
            u_f: (0..=traj.steps()).map(|k| traj.free_displacement(k, &model.ops, loading)).collect(),
            z: traj.z.clone(),
        }
    }

    /// Adds independent Gaussian noise with standard deviations `sigma_u`
    /// (displacements) and `sigma_z` (delamination).
    pub fn with_noise(mut self, sigma_u: f64, sigma_z: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nu = Normal::new(0.0, sigma_u).map_err(|e| Error::Config(format!("noise: {e}")))?;
        let nz = Normal::new(0.0, sigma_z).map_err(|e| Error::Config(format!("noise: {e}")))?;
        for v in self.u_c.iter_mut().chain(self.u_f.iter_mut()).flatten() {
            *v += nu.sample(&mut rng);
        }
        for v in self.z.iter_mut().flatten() {
            *v += nz.sample(&mut rng);
        }
        Ok(self)
    }

    pub fn steps(&self) -> usize {
        self.z.len().saturating_sub(1)
    }
}

/// Everything needed to evaluate `J(pi, S(pi))`.
#[derive(Clone, Debug)]
pub struct IdentificationProblem {
    pub model: ForwardModel,
    pub loading: LoadingProgram,
    pub z0: Vec<f64>,
    pub data: TrackingData,
    /// Displacement weight (1/m^2).
    pub zeta: f64,
    pub policy: BranchPolicy,
}

/// Objective value with a subgradient in some parameterization.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// The trajectory passed through degenerate constraints.
    pub nonsmooth: bool,
}

impl IdentificationProblem {
    pub fn new(
        model: ForwardModel,
        loading: LoadingProgram,
        z0: Vec<f64>,
        data: TrackingData,
        zeta: f64,
        policy: BranchPolicy,
    ) -> Result<Self> {
        if !(zeta >= 0.0 && zeta.is_finite()) {
            return Err(Error::Config("zeta must be finite and non-negative".into()));
        }
        if data.steps() != loading.steps() || data.u_c.len() != data.z.len() || data.u_f.len() != data.z.len() {
            return Err(Error::Dimension("tracking data does not match the loading length".into()));
        }
        if z0.len() != model.m() {
            return Err(Error::Dimension("initial delamination does not match the contact nodes".into()));
        }
        Ok(Self { model, loading, z0, data, zeta, policy })
    }

    /// Problem whose data is the exact response to `planted`.
    pub fn synthetic(
        model: ForwardModel,
        loading: LoadingProgram,
        z0: Vec<f64>,
        planted: &AdhesiveParams,
        zeta: f64,
        policy: BranchPolicy,
    ) -> Result<Self> {
        let traj = simulate(&model, planted, &loading, &z0)?;
        let data = TrackingData::from_trajectory(&model, &traj, &loading);
        Self::new(model, loading, z0, data, zeta, policy)
    }

    pub fn m(&self) -> usize {
        self.model.m()
    }

    pub fn simulate(&self, params: &AdhesiveParams) -> Result<Trajectory> {
        simulate(&self.model, params, &self.loading, &self.z0)
    }

    /// `J` and the state gradients `u*`, `z*` along `traj`.
    pub fn tracking(&self, traj: &Trajectory) -> (f64, StateGradients) {
        let tau = self.loading.tau;
        let ops = &self.model.ops;
        let mut grads = StateGradients::zeros(traj);
        let mut j = 0.0;
        for k in 1..=traj.steps() {
            let rc: Vec<f64> = traj.u[k].iter().zip(&self.data.u_c[k]).map(|(a, b)| a - b).collect();
            let uf = traj.free_displacement(k, ops, &self.loading);
            let rf: Vec<f64> = uf.iter().zip(&self.data.u_f[k]).map(|(a, b)| a - b).collect();
            let rz: Vec<f64> = traj.z[k].iter().zip(&self.data.z[k]).map(|(a, b)| a - b).collect();
            let sq = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
            j += tau * (0.5 * self.zeta * (sq(&rc) + sq(&rf)) + 0.5 * sq(&rz));
            let back = ops.a_gamma.transpose() * DVector::from_column_slice(&rf);
            grads.u_star[k] = rc.iter().zip(back.iter()).map(|(a, b)| tau * self.zeta * (a + b)).collect();
            grads.z_star[k] = rz.iter().map(|r| tau * r).collect();
        }
        (j, grads)
    }

    pub fn value(&self, params: &AdhesiveParams) -> Result<f64> {
        Ok(self.tracking(&self.simulate(params)?).0)
    }

    /// Value and per-node subgradient (field-major).
    pub fn evaluate(&self, params: &AdhesiveParams) -> Result<Evaluation> {
        let traj = self.simulate(params)?;
        let (value, grads) = self.tracking(&traj);
        let bundle = solve_adjoint(&self.model, params, &traj, &grads, self.policy)?;
        Ok(Evaluation { value, gradient: bundle.gradient, nonsmooth: bundle.biactive_count > 0 })
    }

    /// M-stationarity of the per-node parameters `params` over the box `bounds`.
    pub fn check_stationarity(&self, params: &AdhesiveParams, bounds: &ParameterBounds, tol: f64) -> Result<StationarityReport> {
        let traj = self.simulate(params)?;
        let (_, grads) = self.tracking(&traj);
        let boxed = bounds.for_groups(self.m())?;
        let identity = |g: &[f64]| g.to_vec();
        check_m_stationarity(&self.model, params, &traj, &grads, &identity, &params.to_flat(), &boxed, tol, ENUMERATION_CAP)
    }
}

/// A bound-constrained objective on `[0, 1]^n`.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn evaluate(&self, x: &[f64]) -> Result<Evaluation>;
}

/// The identification objective under a grouping, in unit coordinates of
/// the parameter box.
pub struct PhaseObjective<'a> {
    pub problem: &'a IdentificationProblem,
    pub grouping: Grouping,
    pub bounds: BoxBounds,
}

impl<'a> PhaseObjective<'a> {
    pub fn new(problem: &'a IdentificationProblem, grouping: Grouping, field_bounds: &ParameterBounds) -> Result<Self> {
        let g = grouping.n_groups(problem.m())?;
        Ok(Self { problem, grouping, bounds: field_bounds.for_groups(g)? })
    }

    /// Per-node parameters at unit coordinates `x`.
    pub fn params(&self, x: &[f64]) -> Result<AdhesiveParams> {
        let phys = self.bounds.from_unit(x);
        AdhesiveParams::from_flat(&self.grouping.prolong(&phys, self.problem.m())?)
    }

    /// Grouped physical values at unit coordinates `x`.
    pub fn physical(&self, x: &[f64]) -> Vec<f64> {
        self.bounds.from_unit(x)
    }
}

impl Objective for PhaseObjective<'_> {
    fn dim(&self) -> usize {
        self.bounds.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.problem.value(&self.params(x)?)
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        let e = self.problem.evaluate(&self.params(x)?)?;
        let g = self.grouping.pullback(&e.gradient, self.problem.m())?;
        Ok(Evaluation { gradient: self.bounds.unit_gradient(&g), ..e })
    }
}

/// Admissible intervals for the three parameter fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterBounds {
    pub alpha_f: [f64; 2],
    pub kappa_n: [f64; 2],
    pub kappa_t: [f64; 2],
}

impl Default for ParameterBounds {
    fn default() -> Self {
        Self { alpha_f: [100.0, 500.0], kappa_n: [1e10, 1e12], kappa_t: [1e10, 1e12] }
    }
}

impl ParameterBounds {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, [lo, hi]) in [("alpha_f", self.alpha_f), ("kappa_n", self.kappa_n), ("kappa_t", self.kappa_t)] {
            if !(lo > 0.0 && lo.is_finite()) {
                out.push(format!("bounds.{name}: lower bound {lo} must be positive"));
            }
            if !(hi > lo && hi.is_finite()) {
                out.push(format!("bounds.{name}: upper bound {hi} must exceed {lo}"));
            }
        }
        out
    }

    /// Field-major box for `groups` groups.
    pub fn for_groups(&self, groups: usize) -> Result<BoxBounds> {
        let fields = [self.alpha_f, self.kappa_n, self.kappa_t];
        let lo = fields.iter().flat_map(|f| std::iter::repeat_n(f[0], groups)).collect();
        let hi = fields.iter().flat_map(|f| std::iter::repeat_n(f[1], groups)).collect();
        BoxBounds::new(lo, hi)
    }

    pub fn contains(&self, p: &AdhesiveParams) -> bool {
        let inside = |v: &[f64], [lo, hi]: [f64; 2]| v.iter().all(|x| (lo..=hi).contains(x));
        inside(&p.alpha_f, self.alpha_f) && inside(&p.kappa_n, self.kappa_n) && inside(&p.kappa_t, self.kappa_t)
    }
}
