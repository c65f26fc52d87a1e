//! Derivative-free search on `[0, 1]^n`: a particle swarm whose best point
//! is polished by a coordinate pattern search each generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::Objective;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlobalOptions {
    pub population: usize,
    /// Generation budget; 1 evaluates the initial population only.
    pub max_generations: usize,
    /// Generations without improvement before stopping.
    pub stagnation: usize,
    /// Stop once the best value is at or below this.
    pub threshold: Option<f64>,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Initial pattern-search step in unit coordinates.
    pub pattern_step: f64,
    pub min_pattern_step: f64,
}

impl Default for GlobalOptions {
    fn default() -> Self {
        Self {
            population: 20,
            max_generations: 100,
            stagnation: 15,
            threshold: None,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            pattern_step: 0.1,
            min_pattern_step: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Threshold,
    Stagnation,
    Budget,
    Converged,
    LineSearchFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub stop: StopReason,
    /// Best value after each iteration.
    pub history: Vec<f64>,
}

/// Values of `points`, with failed simulations mapped to `+inf`.
fn evaluate_all(obj: &dyn Objective, points: &[Vec<f64>]) -> Vec<f64> {
    points
        .par_iter()
        .map(|x| match obj.value(x) {
            Ok(v) if v.is_finite() => v,
            Ok(_) => f64::INFINITY,
            Err(e) => {
                log::warn!("objective evaluation failed: {e}");
                f64::INFINITY
            }
        })
        .collect()
}

pub fn phase_global(obj: &dyn Objective, opts: &GlobalOptions, seed: u64) -> Result<SearchResult> {
    let n = obj.dim();
    if opts.population == 0 || opts.max_generations == 0 {
        return Err(Error::Config("population and generation budget must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<Vec<f64>> = (0..opts.population).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
    let mut vel: Vec<Vec<f64>> = (0..opts.population)
        .map(|_| (0..n).map(|_| 0.1 * (rng.random::<f64>() - 0.5)).collect())
        .collect();
    let vals = evaluate_all(obj, &pos);
    let mut evaluations = pos.len();
    let mut pbest = pos.clone();
    let mut pbest_val = vals.clone();
    let (mut best, mut best_val) = argmin(&pos, &vals);
    if !best_val.is_finite() {
        return Err(Error::Internal("no member of the initial population could be evaluated".into()));
    }
    let mut history = vec![best_val];
    let mut step = opts.pattern_step;
    let mut stale = 0;
    let hit = |v: f64| opts.threshold.is_some_and(|t| v <= t);

    let mut generation = 1;
    let stop = loop {
        if hit(best_val) {
            break StopReason::Threshold;
        }
        if generation >= opts.max_generations {
            break StopReason::Budget;
        }
        if stale >= opts.stagnation {
            break StopReason::Stagnation;
        }
        generation += 1;
        let before = best_val;

        for i in 0..pos.len() {
            for d in 0..n {
                let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                vel[i][d] = opts.inertia * vel[i][d]
                    + opts.cognitive * r1 * (pbest[i][d] - pos[i][d])
                    + opts.social * r2 * (best[d] - pos[i][d]);
                vel[i][d] = vel[i][d].clamp(-0.5, 0.5);
                pos[i][d] = (pos[i][d] + vel[i][d]).clamp(0.0, 1.0);
            }
        }
        let vals = evaluate_all(obj, &pos);
        evaluations += pos.len();
        for i in 0..pos.len() {
            if vals[i] < pbest_val[i] {
                pbest_val[i] = vals[i];
                pbest[i] = pos[i].clone();
            }
        }
        let (cand, cand_val) = argmin(&pos, &vals);
        if cand_val < best_val {
            best = cand;
            best_val = cand_val;
        }

        // pattern poll around the incumbent
        if step >= opts.min_pattern_step {
            let poll: Vec<Vec<f64>> = (0..2 * n)
                .map(|j| {
                    let mut p = best.clone();
                    let s = if j % 2 == 0 { step } else { -step };
                    p[j / 2] = (p[j / 2] + s).clamp(0.0, 1.0);
                    p
                })
                .collect();
            let vals = evaluate_all(obj, &poll);
            evaluations += poll.len();
            let (cand, cand_val) = argmin(&poll, &vals);
            if cand_val < best_val {
                best = cand;
                best_val = cand_val;
                step *= 2.0;
            } else {
                step *= 0.5;
            }
        }

        history.push(best_val);
        if best_val < before {
            stale = 0;
        } else {
            stale += 1;
        }
    };
    Ok(SearchResult { x: best, value: best_val, evaluations, iterations: generation, stop, history })
}

fn argmin(points: &[Vec<f64>], vals: &[f64]) -> (Vec<f64>, f64) {
    let (i, v) = vals
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
    (points[i].clone(), v)
}
