//! M-stationarity test over a box of admissible parameters.

use serde::{Deserialize, Serialize};

use super::gphq::branch_contains;
use super::solve::{enumerate_branches, solve_adjoint_branch, Branch, BranchPolicy, StateGradients};
use super::Piece;
use crate::adhesive::AdhesiveParams;
use crate::error::{Error, Result};
use crate::forward::{ForwardModel, Trajectory};

/// Coordinate-wise bounds `lo <= x <= hi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension("bound vectors differ in length".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !l.is_finite() || !h.is_finite() || l >= h) {
            return Err(Error::Domain("bounds must be finite with lo < hi".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((v, l), h) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(*l, *h);
        }
    }

    /// Maps `x` into `[0, 1]^n`.
    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.lo).zip(&self.hi).map(|((v, l), h)| (v - l) / (h - l)).collect()
    }

    pub fn from_unit(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.lo).zip(&self.hi).map(|((v, l), h)| l + v * (h - l)).collect()
    }

    /// Gradient with respect to unit coordinates.
    pub fn unit_gradient(&self, g: &[f64]) -> Vec<f64> {
        g.iter().zip(&self.lo).zip(&self.hi).map(|((v, l), h)| v * (h - l)).collect()
    }

    /// `dist(-g, N(x))` in unit coordinates; `on_bound` is the relative tolerance
    /// for treating a coordinate as sitting on a bound.
    pub fn stationarity_residual(&self, x: &[f64], g: &[f64], on_bound: f64) -> f64 {
        let y = self.to_unit(x);
        let gs = self.unit_gradient(g);
        y.iter()
            .zip(&gs)
            .map(|(y, g)| {
                let r = if *y <= on_bound {
                    (-g).max(0.0)
                } else if *y >= 1.0 - on_bound {
                    g.max(0.0)
                } else {
                    g.abs()
                };
                r * r
            })
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityCertificate {
    /// Regular piece word per delamination coordinate.
    pub z_words: Vec<Vec<Piece>>,
    /// Steps and contact coordinates whose `beta` component is fixed at zero
    /// on degenerate constraints.
    pub biactive_contact_choice: Vec<(usize, usize, bool)>,
    /// Every `(gamma, delta)` slice decomposes along its word.
    pub cone_verified: bool,
    /// Subgradient in the reported parameterization.
    pub gradient: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub stationary: bool,
    pub residual: f64,
    /// Absolute tolerance the residual was compared against.
    pub tol: f64,
    pub branches_examined: usize,
    /// All branches within the budget were examined.
    pub verified_exhaustively: bool,
    pub certificate: Option<StationarityCertificate>,
}

fn certificate(traj: &Trajectory, branch: &Branch, bundle_cone: bool, gradient: Vec<f64>) -> StationarityCertificate {
    let mut choice = Vec::new();
    for k in 1..=traj.steps() {
        for (j, a) in traj.u_records[k].activity.iter().enumerate() {
            if a.is_biactive() {
                choice.push((k, j, branch.beta_zero[k][j]));
            }
        }
    }
    StationarityCertificate {
        z_words: branch.z_words.clone(),
        biactive_contact_choice: choice,
        cone_verified: bundle_cone,
        gradient,
    }
}

/// Searches the adjoint branches for multipliers that make `-g` a normal to
/// the box at `x`. `pullback` maps per-node gradients to the coordinates of `x`.
#[allow(clippy::too_many_arguments)]
pub fn check_m_stationarity(
    model: &ForwardModel,
    params: &AdhesiveParams,
    traj: &Trajectory,
    grads: &StateGradients,
    pullback: &dyn Fn(&[f64]) -> Vec<f64>,
    x: &[f64],
    bounds: &BoxBounds,
    tol: f64,
    cap: usize,
) -> Result<StationarityReport> {
    if x.len() != bounds.len() {
        return Err(Error::Dimension("parameter vector and bounds differ in length".into()));
    }
    let (branches, truncated) = if traj.has_biactive() {
        enumerate_branches(traj, cap)?
    } else {
        let b = super::solve::solve_adjoint(model, params, traj, grads, BranchPolicy::Active)?;
        (vec![b.branch], false)
    };
    let on_bound = 1e-9;
    let mut best: Option<(f64, StationarityCertificate)> = None;
    let n = branches.len();
    for branch in branches {
        let bundle = solve_adjoint_branch(model, params, traj, grads, branch)?;
        let g = pullback(&bundle.gradient);
        let r = bounds.stationarity_residual(x, &g, on_bound);
        if best.as_ref().is_none_or(|(b, _)| r < *b) {
            let cone = (0..model.m()).all(|i| {
                let gamma: Vec<f64> = (1..=traj.steps()).map(|k| bundle.gamma[k][i]).collect();
                let delta: Vec<f64> = (1..=traj.steps()).map(|k| bundle.delta[k][i]).collect();
                let scale = 1.0 + gamma.iter().chain(&delta).fold(0.0f64, |a, v| a.max(v.abs()));
                branch_contains(&bundle.branch.z_words[i], &gamma, &delta, 1e-9 * scale).unwrap_or(false)
            });
            best = Some((r, certificate(traj, &bundle.branch, cone, g)));
        }
        if r <= tol {
            break;
        }
    }
    let (residual, cert) = best.ok_or_else(|| Error::Internal("no adjoint branch".into()))?;
    Ok(StationarityReport {
        stationary: residual <= tol,
        residual,
        tol,
        branches_examined: n,
        verified_exhaustively: !truncated,
        certificate: Some(cert),
    })
}
