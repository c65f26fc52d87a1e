//! Adjoint subgradient against central differences, coordinate by coordinate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objective::{IdentificationProblem, ParameterBounds};
use crate::adhesive::AdhesiveParams;
use crate::error::Result;
use crate::forward::Trajectory;
use crate::qp::Activity;

const FIELDS: [&str; 3] = ["alpha_f", "kappa_n", "kappa_t"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckRow {
    /// `field[node]`.
    pub direction: String,
    pub analytic: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub value: f64,
    /// No degenerate constraint along the trajectory at the base point.
    pub strictly_complementary: bool,
    /// Every difference probe kept the active sets of the base point, so the
    /// stencil stayed on one smooth piece.
    pub stable_activity: bool,
    pub rows: Vec<GradCheckRow>,
}

impl GradientCheck {
    pub fn max_relative_error(&self) -> f64 {
        self.rows.iter().map(|r| r.relative_error).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("direction,analytic,finite_difference,relative_error\n");
        for r in &self.rows {
            s.push_str(&format!("{},{:.16e},{:.16e},{:.16e}\n", r.direction, r.analytic, r.finite_difference, r.relative_error));
        }
        s
    }
}

/// Richardson-extrapolated central differences with steps `h` and `h/2`,
/// `h = rel_step * |pi_j|`, in every coordinate. Errors are relative to the
/// larger of the two values, floored at `1e-12` of the largest gradient entry.
pub fn gradient_check(problem: &IdentificationProblem, params: &AdhesiveParams, rel_step: f64) -> Result<GradientCheck> {
    let traj = problem.simulate(params)?;
    let strictly_complementary = !traj.has_biactive();
    let base = activity(&traj);
    let mut stable_activity = true;
    let eval = problem.evaluate(params)?;
    let g = &eval.gradient;
    let floor = 1e-12 * g.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let flat = params.to_flat();
    let m = params.len();
    let mut rows = Vec::with_capacity(flat.len());
    for n in 0..flat.len() {
        let h = rel_step * flat[n].abs();
        let mut at = |d: f64| -> Result<f64> {
            let mut q = flat.clone();
            q[n] += d;
            let t = problem.simulate(&AdhesiveParams::from_flat(&q)?)?;
            stable_activity &= activity(&t) == base;
            Ok(problem.tracking(&t).0)
        };
        let d1 = (at(h)? - at(-h)?) / (2.0 * h);
        let d2 = (at(0.5 * h)? - at(-0.5 * h)?) / h;
        let fd = (4.0 * d2 - d1) / 3.0;
        let scale = g[n].abs().max(fd.abs()).max(floor);
        rows.push(GradCheckRow {
            direction: format!("{}[{}]", FIELDS[n / m], n % m),
            analytic: g[n],
            finite_difference: fd,
            relative_error: (fd - g[n]).abs() / scale,
        });
    }
    Ok(GradientCheck { value: eval.value, strictly_complementary, stable_activity, rows })
}

fn activity(traj: &Trajectory) -> Vec<Activity> {
    traj.u_records[1..].iter().chain(&traj.z_records).flat_map(|r| r.activity.iter().copied()).collect()
}

/// Uniform draw per node and field inside `bounds`; `kappa` fields are drawn
/// log-uniformly.
pub fn random_parameters(m: usize, bounds: &ParameterBounds, seed: u64) -> AdhesiveParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |[lo, hi]: [f64; 2], log: bool| -> Vec<f64> {
        (0..m)
            .map(|_| {
                let t: f64 = rng.random();
                if log {
                    (lo.ln() + t * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + t * (hi - lo)
                }
            })
            .collect()
    };
    AdhesiveParams {
        alpha_f: draw(bounds.alpha_f, false),
        kappa_n: draw(bounds.kappa_n, true),
        kappa_t: draw(bounds.kappa_t, true),
    }
}
