//! Agreement between the stratified normal-cone formula and the sampling
//! oracle on random graph points and queries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::gphq::limiting_normal_gphq;
use super::nc_oracle::{random_graph_point, GraphPoint, SampledLimitingCone};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleComparisonOptions {
    pub steps: usize,
    pub base_points: usize,
    pub queries: usize,
    pub tol: f64,
    /// Radius of the neighborhood sampled by the oracle.
    pub radius: f64,
    /// Random neighbors added to the systematic ones.
    pub extra_neighbors: usize,
    pub seed: u64,
}

impl Default for OracleComparisonOptions {
    fn default() -> Self {
        Self { steps: 2, base_points: 50, queries: 200, tol: 1e-7, radius: 1e-3, extra_neighbors: 50, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub z: Vec<f64>,
    pub v: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
    pub formula: bool,
    pub oracle: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub steps: usize,
    pub queries: usize,
    /// Queries whose decision by either method changes between `0.1 tol` and `10 tol`.
    pub marginal: usize,
    pub agreements: usize,
    pub members: usize,
    pub disagreements: Vec<Disagreement>,
}

impl OracleComparison {
    /// Agreement over non-marginal queries.
    pub fn agreement_rate(&self) -> f64 {
        let decided = self.queries - self.marginal;
        if decided == 0 {
            1.0
        } else {
            self.agreements as f64 / decided as f64
        }
    }
}

fn query<R: Rng>(cone: &SampledLimitingCone, n: usize, rng: &mut R) -> Vec<f64> {
    match rng.random_range(0..3) {
        0 => (0..n).map(|_| StandardNormal.sample(rng)).collect(),
        1 => (0..n).map(|_| rng.random_range(-2i32..=2) as f64).collect(),
        _ => {
            // nonnegative combination of generators of one nearby cone
            let c = &cone.cones[rng.random_range(0..cone.cones.len())];
            let g = &c.generators[rng.random_range(0..c.generators.len())];
            let mut w = vec![0.0; n];
            for j in 0..g.ncols() {
                if rng.random_bool(0.5) {
                    let t = rng.random_range(0.1..2.0);
                    for (r, wr) in w.iter_mut().enumerate() {
                        *wr += t * g[(r, j)];
                    }
                }
            }
            w
        }
    }
}

fn formula(p: &GraphPoint, w: &[f64], k: usize, tol: f64) -> Result<bool> {
    Ok(limiting_normal_gphq(&p.z, &p.v, &w[..k], &w[k..], tol)?.member)
}

pub fn compare_oracles(opts: &OracleComparisonOptions) -> Result<OracleComparison> {
    let k = opts.steps;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = OracleComparison {
        steps: k,
        queries: 0,
        marginal: 0,
        agreements: 0,
        members: 0,
        disagreements: Vec::new(),
    };
    for _ in 0..opts.base_points {
        let p = random_graph_point(k, &mut rng);
        let cone = SampledLimitingCone::build(&p, opts.radius, opts.extra_neighbors, &mut rng);
        for _ in 0..opts.queries {
            let w = query(&cone, 2 * k, &mut rng);
            out.queries += 1;
            let f = [formula(&p, &w, k, 0.1 * opts.tol)?, formula(&p, &w, k, 10.0 * opts.tol)?];
            let o = [cone.contains(&w[..k], &w[k..], 0.1 * opts.tol), cone.contains(&w[..k], &w[k..], 10.0 * opts.tol)];
            if f[0] != f[1] || o[0] != o[1] {
                out.marginal += 1;
                continue;
            }
            let fm = formula(&p, &w, k, opts.tol)?;
            let om = cone.contains(&w[..k], &w[k..], opts.tol);
            out.members += fm as usize;
            if fm == om {
                out.agreements += 1;
            } else {
                out.disagreements.push(Disagreement {
                    z: p.z.clone(),
                    v: p.v.clone(),
                    gamma: w[..k].to_vec(),
                    delta: w[k..].to_vec(),
                    formula: fm,
                    oracle: om,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_agrees() {
        let r = compare_oracles(&OracleComparisonOptions { steps: 1, base_points: 10, queries: 40, ..Default::default() }).unwrap();
        assert_eq!(r.queries, 400);
        assert!(r.members > 0 && r.members < r.queries);
        assert!(r.agreement_rate() >= 0.99, "{r:?}");
    }
}
