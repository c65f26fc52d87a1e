//! Limiting normal cone to the graph of the multi-step map
//! `(z^1..z^K) -> (N_[0, z^{k-1}](z^k))_k` for one delamination coordinate,
//! as a union over stratum words `s` of intersections over piece words `i`.

use serde::Serialize;

use super::cones::piece_normal_cone;
use super::pieces::{classify_piece, successors_of, Piece};
use crate::error::{Error, Result};

/// Decomposition witnessing membership for one piece word `i`:
/// `gamma^k = mu^k + mu_tilde^k`, `delta^k = nu^k`, `mu_tilde^K = 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Chain {
    pub i: Vec<Piece>,
    /// `mu_tilde^0 .. mu_tilde^K`.
    pub mu_tilde: Vec<f64>,
    /// `mu^1 .. mu^K`.
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NcCertificate {
    pub s: Vec<Piece>,
    pub chains: Vec<Chain>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NcDecision {
    pub member: bool,
    pub certificate: Option<NcCertificate>,
    /// The word enumeration hit its cap; a `false` decision is then unverified.
    pub truncated: bool,
}

const WORD_CAP: usize = 200_000;

/// One constraint `a * t_prev + b * t <= r`.
type Row = (f64, f64, f64);

fn step_rows(i: Piece, s: Piece, gamma: f64, delta: f64, slack: f64) -> Result<Vec<Row>> {
    let cone = piece_normal_cone(i, s)?;
    // x = (t_prev, gamma - t, delta)
    let mut rows = Vec::new();
    for a in &cone.ineqs {
        let off = a[1] * gamma + a[2] * delta;
        rows.push((a[0], -a[1], slack - off));
    }
    for a in &cone.eqs {
        let off = a[1] * gamma + a[2] * delta;
        rows.push((a[0], -a[1], slack - off));
        rows.push((-a[0], a[1], slack + off));
    }
    Ok(rows)
}

/// Interval of `t_prev` for which some `t` in `[lo, hi]` satisfies `rows`.
fn project(rows: &[Row], lo: f64, hi: f64) -> Option<(f64, f64)> {
    let mut all: Vec<Row> = rows.to_vec();
    if hi.is_finite() {
        all.push((0.0, 1.0, hi));
    }
    if lo.is_finite() {
        all.push((0.0, -1.0, -lo));
    }
    let mut one_d: Vec<(f64, f64)> = Vec::new();
    let (mut lower, mut upper) = (Vec::new(), Vec::new());
    for &(a, b, r) in &all {
        if b == 0.0 {
            one_d.push((a, r));
        } else if b > 0.0 {
            upper.push((a, b, r));
        } else {
            lower.push((a, b, r));
        }
    }
    for &(al, bl, rl) in &lower {
        for &(au, bu, ru) in &upper {
            one_d.push((bu * al - bl * au, bu * rl - bl * ru));
        }
    }
    interval(&one_d)
}

/// Solution set of `c x <= d` for all rows.
fn interval(rows: &[(f64, f64)]) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for &(c, d) in rows {
        if c > 0.0 {
            hi = hi.min(d / c);
        } else if c < 0.0 {
            lo = lo.max(d / c);
        } else if d < 0.0 {
            return None;
        }
    }
    (lo <= hi).then_some((lo, hi))
}

fn clamp_zero((lo, hi): (f64, f64)) -> f64 {
    0.0f64.clamp(lo, hi)
}

/// Backward interval propagation; `Some` iff the chain decomposition exists.
fn chain_intervals(s: &[Piece], i: &[Piece], gamma: &[f64], delta: &[f64], slack: f64) -> Result<Option<Vec<(f64, f64)>>> {
    let k_steps = s.len();
    let mut t = vec![(0.0, 0.0); k_steps + 1];
    for k in (1..=k_steps).rev() {
        let rows = step_rows(i[k - 1], s[k - 1], gamma[k - 1], delta[k - 1], slack)?;
        match project(&rows, t[k].0, t[k].1) {
            Some(iv) => t[k - 1] = iv,
            None => return Ok(None),
        }
    }
    Ok(Some(t))
}

fn reconstruct(
    s: &[Piece],
    i: &[Piece],
    gamma: &[f64],
    delta: &[f64],
    slack: f64,
    t: &[(f64, f64)],
) -> Result<Chain> {
    let k_steps = s.len();
    let mut mu_tilde = vec![clamp_zero(t[0])];
    for k in 1..=k_steps {
        let prev = mu_tilde[k - 1];
        let rows = step_rows(i[k - 1], s[k - 1], gamma[k - 1], delta[k - 1], slack)?;
        // constraints on t with t_prev fixed: b t <= r - a t_prev
        let mut one_d: Vec<(f64, f64)> = rows.iter().map(|&(a, b, r)| (b, r - a * prev)).collect();
        one_d.push((1.0, t[k].1));
        one_d.push((-1.0, -t[k].0));
        let iv = interval(&one_d).unwrap_or(t[k]);
        mu_tilde.push(if k == k_steps { 0.0 } else { clamp_zero(iv) });
    }
    let mu = (1..=k_steps).map(|k| gamma[k - 1] - mu_tilde[k]).collect();
    Ok(Chain { i: i.to_vec(), mu_tilde, mu, nu: delta.to_vec() })
}

/// All words `w` with `w^k` in `options[k]` that respect the transition rule.
fn admissible_words(initially_bonded: bool, options: &[Vec<Piece>], cap: usize) -> (Vec<Vec<Piece>>, bool) {
    let mut out = Vec::new();
    let mut truncated = false;
    let mut stack: Vec<Vec<Piece>> = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        let k = prefix.len();
        if k == options.len() {
            if out.len() >= cap {
                truncated = true;
                break;
            }
            out.push(prefix);
            continue;
        }
        let bonded = prefix.last().map_or(initially_bonded, |p| p.bonded());
        for &p in options[k].iter().rev() {
            if successors_of(bonded).contains(&p) {
                let mut next = prefix.clone();
                next.push(p);
                stack.push(next);
            }
        }
    }
    (out, truncated)
}

/// Strata of the trajectory `(z^0..z^K, v^1..v^K)`.
pub fn trajectory_strata(z: &[f64], v: &[f64], tol: f64) -> Result<Vec<Piece>> {
    if z.len() != v.len() + 1 {
        return Err(Error::Dimension(format!("{} delamination values for {} steps", z.len(), v.len())));
    }
    (1..z.len()).map(|k| classify_piece(z[k - 1], z[k], v[k - 1], tol)).collect()
}

/// Checks `(gamma, delta)` against the limiting normal cone at the graph point
/// `(z^1..z^K, v^1..v^K)` with fixed initial value `z^0 = z[0]`.
pub fn limiting_normal_gphq(z: &[f64], v: &[f64], gamma: &[f64], delta: &[f64], tol: f64) -> Result<NcDecision> {
    let k_steps = v.len();
    if gamma.len() != k_steps || delta.len() != k_steps {
        return Err(Error::Dimension("query length differs from the step count".into()));
    }
    let strata = trajectory_strata(z, v, tol)?;
    let bonded0 = z[0] > tol;
    let scale = 1.0 + gamma.iter().chain(delta).fold(0.0f64, |m, x| m.max(x.abs()));
    let slack = tol * scale;

    let s_options: Vec<Vec<Piece>> = strata.iter().map(|s| s.adjacent()).collect();
    let (s_words, mut truncated) = admissible_words(bonded0, &s_options, WORD_CAP);
    for s in s_words {
        let i_options: Vec<Vec<Piece>> = s.iter().map(|p| p.adjacent()).collect();
        let (i_words, tr) = admissible_words(bonded0, &i_options, WORD_CAP);
        truncated |= tr;
        let mut chains = Vec::with_capacity(i_words.len());
        let mut ok = true;
        for i in &i_words {
            match chain_intervals(&s, i, gamma, delta, slack)? {
                Some(t) => chains.push(reconstruct(&s, i, gamma, delta, slack, &t)?),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && !i_words.is_empty() {
            return Ok(NcDecision { member: true, certificate: Some(NcCertificate { s, chains }), truncated: false });
        }
    }
    Ok(NcDecision { member: false, certificate: None, truncated })
}

/// Whether `(gamma, delta)` admits a decomposition for the single branch `s`
/// (with `i = s`); used to certify adjoint multipliers.
pub fn branch_contains(s: &[Piece], gamma: &[f64], delta: &[f64], slack: f64) -> Result<bool> {
    Ok(chain_intervals(s, s, gamma, delta, slack)?.is_some())
}
