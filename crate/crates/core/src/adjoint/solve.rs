//! Backward adjoint sweep and subgradient assembly.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::pieces::{successors_of, Piece};
use crate::adhesive::{assemble_contact_coupling, b_jacobian_u, compute_b, AdhesiveParams};
use crate::error::{Error, Result};
use crate::forward::{ForwardModel, LoadingProgram, Trajectory};
use crate::qp::Activity;

/// How degenerate (biactive) constraints are resolved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchPolicy {
    /// Treat degenerate constraints as strongly active.
    #[default]
    Active,
    /// Treat degenerate constraints as inactive.
    Inactive,
    /// Try all branches (up to [`ENUMERATION_CAP`]) and keep the
    /// smallest subgradient.
    Enumerate,
}

impl std::str::FromStr for BranchPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "active" => Ok(Self::Active),
            "inactive" => Ok(Self::Inactive),
            "enumerate" => Ok(Self::Enumerate),
            _ => Err(Error::Config(format!("unknown branch policy '{s}'"))),
        }
    }
}

pub const ENUMERATION_CAP: usize = 1 << 12;

/// Objective gradients with respect to the states, indexed by step
/// (`k = 1..=K`; entry 0 is ignored).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateGradients {
    pub u_star: Vec<Vec<f64>>,
    pub z_star: Vec<Vec<f64>>,
}

impl StateGradients {
    pub fn zeros(traj: &Trajectory) -> Self {
        Self {
            u_star: traj.u.iter().map(|u| vec![0.0; u.len()]).collect(),
            z_star: traj.z.iter().map(|z| vec![0.0; z.len()]).collect(),
        }
    }
}

/// A branch of the adjoint system: a regular piece word per delamination
/// coordinate and, per step, which contact coordinates have `beta = 0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    /// `z_words[i][k - 1]`.
    pub z_words: Vec<Vec<Piece>>,
    /// `beta_zero[k][j]` for `k = 1..=K` (entry 0 unused).
    pub beta_zero: Vec<Vec<bool>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjointBundle {
    /// Multipliers indexed by step; entry 0 is zero.
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
    /// `mu_tilde[k]` splits `gamma^k = mu^k + mu_tilde^k`; `mu_tilde[K] = 0`.
    pub mu_tilde: Vec<Vec<f64>>,
    pub branch: Branch,
    /// Subgradient with respect to the per-node parameters, field-major.
    pub gradient: Vec<f64>,
    /// Degenerate constraints encountered along the trajectory.
    pub biactive_count: usize,
    /// Number of branches examined (1 unless enumerating).
    pub branches_examined: usize,
}

/// Strata `s-bar[i][k - 1]` of the delamination trajectory from the QP records.
pub fn trajectory_pieces(traj: &Trajectory) -> Vec<Vec<Piece>> {
    let m = traj.z[0].len();
    (0..m)
        .map(|i| {
            (1..=traj.steps())
                .map(|k| {
                    let r = traj.z_record(k);
                    Piece::from_activity(r.activity[i], r.lambda[i], r.activity_threshold)
                })
                .collect()
        })
        .collect()
}

fn biactive_count(traj: &Trajectory, strata: &[Vec<Piece>]) -> usize {
    let z = strata.iter().flatten().filter(|p| !p.is_regular()).count();
    let u: usize = traj.u_records[1..]
        .iter()
        .map(|r| r.activity.iter().filter(|a| a.is_biactive()).count())
        .sum();
    z + u
}

/// Greedy regular word following `preference` under the transition rule.
fn preferred_word(z0: f64, strata: &[Piece], preference: &[Piece]) -> Result<Vec<Piece>> {
    let mut bonded = z0 > 0.0;
    let mut word = Vec::with_capacity(strata.len());
    for s in strata {
        let allowed = s.adjacent();
        let next = successors_of(bonded);
        let p = preference
            .iter()
            .copied()
            .find(|p| allowed.contains(p) && next.contains(p))
            .ok_or_else(|| Error::Internal(format!("no admissible branch for stratum {s}")))?;
        word.push(p);
        bonded = p.bonded();
    }
    Ok(word)
}

/// All regular words with `w^k` in `I(s^k)` under the transition rule.
fn all_words(z0: f64, strata: &[Piece], cap: usize) -> Vec<Vec<Piece>> {
    let mut out = Vec::new();
    let mut stack: Vec<Vec<Piece>> = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        if out.len() >= cap {
            break;
        }
        let k = prefix.len();
        if k == strata.len() {
            out.push(prefix);
            continue;
        }
        let bonded = prefix.last().map_or(z0 > 0.0, |p| p.bonded());
        let allowed = strata[k].adjacent();
        for &p in Piece::REGULAR.iter().rev() {
            if allowed.contains(&p) && successors_of(bonded).contains(&p) {
                let mut next = prefix.clone();
                next.push(p);
                stack.push(next);
            }
        }
    }
    out
}

fn policy_branch(traj: &Trajectory, strata: &[Vec<Piece>], policy: BranchPolicy) -> Result<Branch> {
    let p = |i| Piece::new(i).unwrap();
    let preference = match policy {
        BranchPolicy::Inactive => [p(3), p(5), p(1), p(6), p(8)],
        _ => [p(5), p(6), p(1), p(8), p(3)],
    };
    let z_words = strata
        .iter()
        .enumerate()
        .map(|(i, s)| preferred_word(traj.z[0][i], s, &preference))
        .collect::<Result<_>>()?;
    let biactive_zero = policy != BranchPolicy::Inactive;
    let beta_zero = (0..=traj.steps())
        .map(|k| {
            if k == 0 {
                return Vec::new();
            }
            traj.u_records[k]
                .activity
                .iter()
                .map(|a| match a {
                    Activity::Lower | Activity::Upper | Activity::Fixed => true,
                    Activity::BiactiveLower | Activity::BiactiveUpper => biactive_zero,
                    Activity::Inactive => false,
                })
                .collect()
        })
        .collect();
    Ok(Branch { z_words, beta_zero })
}

/// Every branch of the adjoint system, capped at `cap`.
pub fn enumerate_branches(traj: &Trajectory, cap: usize) -> Result<(Vec<Branch>, bool)> {
    let strata = trajectory_pieces(traj);
    let base = policy_branch(traj, &strata, BranchPolicy::Active)?;
    let word_sets: Vec<Vec<Vec<Piece>>> =
        strata.iter().enumerate().map(|(i, s)| all_words(traj.z[0][i], s, cap)).collect();
    let u_sites: Vec<(usize, usize)> = (1..=traj.steps())
        .flat_map(|k| {
            traj.u_records[k]
                .activity
                .iter()
                .enumerate()
                .filter(|(_, a)| a.is_biactive())
                .map(move |(j, _)| (k, j))
        })
        .collect();
    let mut radices: Vec<usize> = word_sets.iter().map(|w| w.len()).collect();
    radices.extend(std::iter::repeat_n(2, u_sites.len()));
    let total = radices.iter().try_fold(1usize, |acc, r| acc.checked_mul(*r));
    let truncated = total.is_none_or(|t| t > cap);
    let count = total.map_or(cap, |t| t.min(cap));

    let mut out = Vec::with_capacity(count);
    let mut digits = vec![0usize; radices.len()];
    for _ in 0..count {
        let mut b = base.clone();
        for (i, words) in word_sets.iter().enumerate() {
            b.z_words[i] = words[digits[i]].clone();
        }
        for (n, &(k, j)) in u_sites.iter().enumerate() {
            b.beta_zero[k][j] = digits[word_sets.len() + n] == 0;
        }
        out.push(b);
        for (d, r) in digits.iter_mut().zip(&radices) {
            *d += 1;
            if *d < *r {
                break;
            }
            *d = 0;
        }
    }
    Ok((out, truncated))
}

/// Adjoint multipliers and subgradient under a branch policy.
pub fn solve_adjoint(
    model: &ForwardModel,
    params: &AdhesiveParams,
    traj: &Trajectory,
    grads: &StateGradients,
    policy: BranchPolicy,
) -> Result<AdjointBundle> {
    let strata = trajectory_pieces(traj);
    let biactive = biactive_count(traj, &strata);
    if policy == BranchPolicy::Enumerate && biactive > 0 {
        let (branches, truncated) = enumerate_branches(traj, ENUMERATION_CAP)?;
        if truncated {
            log::warn!("{biactive} degenerate constraints; only the first {ENUMERATION_CAP} branches are examined");
        }
        let n = branches.len();
        let mut best: Option<(f64, AdjointBundle)> = None;
        for b in branches {
            let bundle = solve_adjoint_branch(model, params, traj, grads, b)?;
            let norm = bundle.gradient.iter().map(|g| g * g).sum::<f64>();
            if best.as_ref().is_none_or(|(bn, _)| norm < *bn) {
                best = Some((norm, bundle));
            }
        }
        let mut bundle = best.map(|b| b.1).ok_or_else(|| Error::Internal("no adjoint branch".into()))?;
        bundle.biactive_count = biactive;
        bundle.branches_examined = n;
        return Ok(bundle);
    }
    let branch = policy_branch(traj, &strata, policy)?;
    let mut bundle = solve_adjoint_branch(model, params, traj, grads, branch)?;
    bundle.biactive_count = biactive;
    Ok(bundle)
}

/// `(grad_z~ p^{k})^T beta` at the contact state `u`.
fn coupling_transpose(params: &AdhesiveParams, measure: &[f64], u: &[f64], beta: &[f64]) -> Vec<f64> {
    (0..measure.len())
        .map(|i| measure[i] * (params.kappa_n[i] * u[2 * i] * beta[2 * i] + params.kappa_t[i] * u[2 * i + 1] * beta[2 * i + 1]))
        .collect()
}

fn restricted_solve(h: &DMatrix<f64>, rhs: &[f64], free: &[usize]) -> Result<Vec<f64>> {
    let mut x = vec![0.0; rhs.len()];
    if free.is_empty() {
        return Ok(x);
    }
    let hff = DMatrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
    let r = DVector::from_fn(free.len(), |a, _| rhs[free[a]]);
    let sol = hff
        .cholesky()
        .ok_or_else(|| Error::Internal("restricted adjoint system is not positive definite".into()))?
        .solve(&r);
    for (a, &i) in free.iter().enumerate() {
        x[i] = sol[a];
    }
    Ok(x)
}

/// Adjoint sweep for a fixed branch.
pub fn solve_adjoint_branch(
    model: &ForwardModel,
    params: &AdhesiveParams,
    traj: &Trajectory,
    grads: &StateGradients,
    branch: Branch,
) -> Result<AdjointBundle> {
    let k_steps = traj.steps();
    let m = model.m();
    let n = 2 * m;
    let s = &model.surface.measure;
    let b = &model.surface.b;
    if grads.u_star.len() != k_steps + 1 || grads.z_star.len() != k_steps + 1 {
        return Err(Error::Dimension("state gradients do not match the trajectory length".into()));
    }

    let zeros = |len| vec![vec![0.0; len]; k_steps + 1];
    let (mut alpha, mut beta, mut gamma, mut delta) = (zeros(n), zeros(n), zeros(m), zeros(m));
    let mut mu_tilde = zeros(m);
    for k in (1..=k_steps).rev() {
        // delamination inclusion
        let ptb = if k < k_steps {
            coupling_transpose(params, s, &traj.u[k + 1], &beta[k + 1])
        } else {
            vec![0.0; m]
        };
        let rhs: Vec<f64> = (0..m).map(|i| grads.z_star[k][i] + mu_tilde[k][i] - ptb[i]).collect();
        let inactive: Vec<usize> = (0..m).filter(|&i| branch.z_words[i][k - 1].index() == 3).collect();
        let d = restricted_solve(b, &rhs, &inactive)?;
        let bd = b * DVector::from_column_slice(&d);
        for i in 0..m {
            gamma[k][i] = bd[i] - grads.z_star[k][i] + ptb[i];
            let mu = gamma[k][i] - mu_tilde[k][i];
            mu_tilde[k - 1][i] = match branch.z_words[i][k - 1].index() {
                1 | 8 => -mu,
                _ => 0.0,
            };
        }
        for &i in &inactive {
            gamma[k][i] = mu_tilde[k][i];
        }
        delta[k] = d;

        // contact inclusion
        let g = b_jacobian_u(params, &traj.u[k], s);
        let gtd = g.transpose() * DVector::from_column_slice(&delta[k]);
        let h = &model.ops.a_alpha + assemble_contact_coupling(params, &traj.z[k - 1], s)?;
        let rhs: Vec<f64> = (0..n).map(|j| grads.u_star[k][j] - gtd[j]).collect();
        let free: Vec<usize> = (0..n).filter(|&j| !branch.beta_zero[k][j]).collect();
        beta[k] = restricted_solve(&h, &rhs, &free)?;
        let hb = &h * DVector::from_column_slice(&beta[k]);
        for j in 0..n {
            alpha[k][j] = if branch.beta_zero[k][j] { hb[j] + gtd[j] - grads.u_star[k][j] } else { 0.0 };
        }
    }

    let gradient = assemble_subgradient(params, s, traj, &beta, &delta);
    Ok(AdjointBundle {
        alpha,
        beta,
        gamma,
        delta,
        mu_tilde,
        branch,
        gradient,
        biactive_count: 0,
        branches_examined: 1,
    })
}

/// `-sum_k (grad_pi p^k)^T beta^k - sum_k (grad_pi q^k)^T delta^k`, per node.
fn assemble_subgradient(
    params: &AdhesiveParams,
    s: &[f64],
    traj: &Trajectory,
    beta: &[Vec<f64>],
    delta: &[Vec<f64>],
) -> Vec<f64> {
    let m = s.len();
    let mut g = vec![0.0; 3 * m];
    for k in 1..=traj.steps() {
        let (u, zp) = (&traj.u[k], &traj.z[k - 1]);
        for i in 0..m {
            let (un, ut) = (u[2 * i], u[2 * i + 1]);
            g[i] += s[i] * delta[k][i];
            g[m + i] -= zp[i] * s[i] * un * beta[k][2 * i] + 0.5 * s[i] * un * un * delta[k][i];
            g[2 * m + i] -= zp[i] * s[i] * ut * beta[k][2 * i + 1] + 0.5 * s[i] * ut * ut * delta[k][i];
        }
    }
    let _ = params;
    g
}

/// Contact residual `p^k = (A_alpha + A~(pi, z^{k-1})) u^k + A_beta w^k`.
pub fn residual_p(
    model: &ForwardModel,
    params: &AdhesiveParams,
    z_prev: &[f64],
    u: &[f64],
    w: &[f64],
) -> Result<Vec<f64>> {
    let h = &model.ops.a_alpha + assemble_contact_coupling(params, z_prev, &model.surface.measure)?;
    let r = h * DVector::from_column_slice(u) + &model.ops.a_beta * DVector::from_column_slice(w);
    Ok(r.iter().copied().collect())
}

/// Delamination residual `q^k = B z^k + b(pi, u^k)`.
pub fn residual_q(model: &ForwardModel, params: &AdhesiveParams, u: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    let b = compute_b(params, u, &model.surface)?;
    let r = &model.surface.b * DVector::from_column_slice(z);
    Ok(r.iter().zip(&b).map(|(a, c)| a + c).collect())
}

/// Largest residual of the adjoint equations relative to the data scale.
pub fn adjoint_residual(
    model: &ForwardModel,
    params: &AdhesiveParams,
    traj: &Trajectory,
    grads: &StateGradients,
    bundle: &AdjointBundle,
) -> Result<f64> {
    let k_steps = traj.steps();
    let s = &model.surface.measure;
    let mut worst: f64 = 0.0;
    for k in 1..=k_steps {
        let h = &model.ops.a_alpha + assemble_contact_coupling(params, &traj.z[k - 1], s)?;
        let g = b_jacobian_u(params, &traj.u[k], s);
        let hb = &h * DVector::from_column_slice(&bundle.beta[k]);
        let gtd = g.transpose() * DVector::from_column_slice(&bundle.delta[k]);
        let scale = 1.0 + hb.amax() + gtd.amax() + grads.u_star[k].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for j in 0..2 * model.m() {
            let r = grads.u_star[k][j] + bundle.alpha[k][j] - hb[j] - gtd[j];
            worst = worst.max(r.abs() / scale);
        }
        let ptb = if k < k_steps {
            coupling_transpose(params, s, &traj.u[k + 1], &bundle.beta[k + 1])
        } else {
            vec![0.0; model.m()]
        };
        let bd = &model.surface.b * DVector::from_column_slice(&bundle.delta[k]);
        let scale = 1.0 + bd.amax() + ptb.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..model.m() {
            let r = grads.z_star[k][i] + bundle.gamma[k][i] - bd[i] - ptb[i];
            worst = worst.max(r.abs() / scale);
        }
    }
    Ok(worst)
}

/// Reconstructs the interior displacement for every step.
pub fn free_trajectory(model: &ForwardModel, traj: &Trajectory, loading: &LoadingProgram) -> Vec<Vec<f64>> {
    (0..=traj.steps()).map(|k| traj.free_displacement(k, &model.ops, loading)).collect()
}
