//! Piecewise-constant parameter groupings along the contact boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How contact nodes share parameter values. Parameter vectors under a
/// grouping are field-major: `[alpha_f per group, kappa_n per group, kappa_t per group]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// One value per field.
    Uniform,
    /// Consecutive blocks of `n` nodes (the last block may be shorter).
    Blocks(usize),
    /// One value per node.
    PerNode,
}

impl Grouping {
    /// Group index of every node.
    pub fn node_groups(&self, m: usize) -> Result<Vec<usize>> {
        match *self {
            Grouping::Uniform => Ok(vec![0; m]),
            Grouping::Blocks(0) => Err(Error::Config("block size must be positive".into())),
            Grouping::Blocks(n) => Ok((0..m).map(|i| i / n).collect()),
            Grouping::PerNode => Ok((0..m).collect()),
        }
    }

    pub fn n_groups(&self, m: usize) -> Result<usize> {
        Ok(self.node_groups(m)?.iter().max().map_or(0, |g| g + 1))
    }

    /// Number of free parameters (three fields).
    pub fn dim(&self, m: usize) -> Result<usize> {
        Ok(3 * self.n_groups(m)?)
    }

    /// Per-node flat parameters from grouped values.
    pub fn prolong(&self, grouped: &[f64], m: usize) -> Result<Vec<f64>> {
        let groups = self.node_groups(m)?;
        let g = self.n_groups(m)?;
        if grouped.len() != 3 * g {
            return Err(Error::Dimension(format!("{} grouped values for {} groups", grouped.len(), g)));
        }
        Ok((0..3).flat_map(|f| groups.iter().map(move |&j| grouped[f * g + j])).collect())
    }

    /// Adjoint of [`Grouping::prolong`]: sums per-node gradients over each group.
    pub fn pullback(&self, node_grad: &[f64], m: usize) -> Result<Vec<f64>> {
        let groups = self.node_groups(m)?;
        let g = self.n_groups(m)?;
        if node_grad.len() != 3 * m {
            return Err(Error::Dimension(format!("{} gradient entries for {} nodes", node_grad.len(), m)));
        }
        let mut out = vec![0.0; 3 * g];
        for f in 0..3 {
            for (i, &j) in groups.iter().enumerate() {
                out[f * g + j] += node_grad[f * m + i];
            }
        }
        Ok(out)
    }

    /// Group means of per-node values.
    pub fn restrict(&self, node_values: &[f64], m: usize) -> Result<Vec<f64>> {
        let groups = self.node_groups(m)?;
        let g = self.n_groups(m)?;
        let mut count = vec![0usize; g];
        for &j in &groups {
            count[j] += 1;
        }
        let mut out = self.pullback(node_values, m)?;
        for f in 0..3 {
            for j in 0..g {
                out[f * g + j] /= count[j] as f64;
            }
        }
        Ok(out)
    }

    /// Whether every group of `self` lies inside a single group of `coarse`.
    pub fn refines(&self, coarse: &Grouping, m: usize) -> Result<bool> {
        let fine = self.node_groups(m)?;
        let coarse = coarse.node_groups(m)?;
        let mut parent = vec![None; self.n_groups(m)?];
        for (f, c) in fine.iter().zip(&coarse) {
            match parent[*f] {
                None => parent[*f] = Some(*c),
                Some(p) if p != *c => return Ok(false),
                _ => {}
            }
        }
        Ok(true)
    }
}

impl std::fmt::Display for Grouping {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Grouping::Uniform => write!(f, "uniform"),
            Grouping::Blocks(n) => write!(f, "blocks of {n}"),
            Grouping::PerNode => write!(f, "per node"),
        }
    }
}

/// Copies grouped values onto a finer grouping.
pub fn lift_grouping(coarse: &[f64], from: &Grouping, to: &Grouping, m: usize) -> Result<Vec<f64>> {
    if !to.refines(from, m)? {
        return Err(Error::IncompatibleGrouping(format!("{to} does not refine {from} on {m} nodes")));
    }
    let nodes = from.prolong(coarse, m)?;
    // each fine group is constant, so any node of the group carries its value
    let fine = to.node_groups(m)?;
    let g = to.n_groups(m)?;
    let mut out = vec![0.0; 3 * g];
    for f in 0..3 {
        for (i, &j) in fine.iter().enumerate() {
            out[f * g + j] = nodes[f * m + i];
        }
    }
    Ok(out)
}
