//! Multi-phase identification: each phase optimizes under a grouping and
//! hands its result, lifted, to the next.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::global::{phase_global, GlobalOptions, StopReason};
use super::grouping::{lift_grouping, Grouping};
use super::objective::{IdentificationProblem, Objective, ParameterBounds, PhaseObjective};
use super::quasi_newton::{phase_quasi_newton, QuasiNewtonOptions};
use crate::adhesive::AdhesiveParams;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Global,
    QuasiNewton,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpec {
    pub grouping: Grouping,
    pub algorithm: Algorithm,
    /// Generations (global) or iterations (quasi-Newton).
    pub budget: usize,
    /// Interrupt once the objective falls to this value.
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Non-improving generations or iterations tolerated.
    #[serde(default = "default_stagnation")]
    pub stagnation: usize,
}

fn default_stagnation() -> usize {
    15
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhasePlan {
    pub phases: Vec<PhaseSpec>,
    #[serde(default)]
    pub global: GlobalOptions,
    #[serde(default)]
    pub quasi_newton: QuasiNewtonOptions,
}

impl PhasePlan {
    /// Global search on one group, then quasi-Newton on one group, on blocks
    /// of two nodes, and per node.
    pub fn four_phase() -> Self {
        let phase = |grouping, algorithm, budget, threshold| PhaseSpec { grouping, algorithm, budget, threshold, stagnation: 15 };
        Self {
            phases: vec![
                phase(Grouping::Uniform, Algorithm::Global, 60, Some(300.0)),
                phase(Grouping::Uniform, Algorithm::QuasiNewton, 100, None),
                phase(Grouping::Blocks(2), Algorithm::QuasiNewton, 150, None),
                phase(Grouping::PerNode, Algorithm::QuasiNewton, 300, Some(1e-12)),
            ],
            global: GlobalOptions::default(),
            quasi_newton: QuasiNewtonOptions::default(),
        }
    }

    pub fn violations(&self, m: usize) -> Vec<String> {
        let mut out = Vec::new();
        if self.phases.is_empty() {
            out.push("plan.phases: at least one phase is required".into());
        }
        for (n, p) in self.phases.iter().enumerate() {
            if p.budget == 0 {
                out.push(format!("plan.phases[{n}].budget must be positive"));
            }
            if let Some(t) = p.threshold {
                if !(t > 0.0 && t.is_finite()) {
                    out.push(format!("plan.phases[{n}].threshold must be positive"));
                }
            }
            if let Grouping::Blocks(0) = p.grouping {
                out.push(format!("plan.phases[{n}].grouping: block size must be positive"));
            }
            if n > 0 {
                match p.grouping.refines(&self.phases[n - 1].grouping, m) {
                    Ok(true) => {}
                    _ => out.push(format!("plan.phases[{n}].grouping does not refine the previous phase")),
                }
            }
        }
        if self.global.population == 0 {
            out.push("plan.global.population must be positive".into());
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// Running iteration counter over all phases.
    pub iteration: usize,
    /// 1-based phase number.
    pub phase: usize,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub phase: usize,
    pub grouping: Grouping,
    pub algorithm: Algorithm,
    pub start_objective: f64,
    pub end_objective: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub stop: StopReason,
    /// Projected gradient norm in unit coordinates (quasi-Newton phases).
    pub grad_norm: Option<f64>,
    /// Grouped physical values, field-major.
    pub grouped: Vec<f64>,
    pub params: AdhesiveParams,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub seed: u64,
    pub initial_objective: Option<f64>,
    pub final_objective: Option<f64>,
    pub final_params: Option<AdhesiveParams>,
    pub phases: Vec<PhaseReport>,
    pub trace: Vec<TraceEntry>,
}

impl IdentificationReport {
    pub fn empty(seed: u64) -> Self {
        Self { seed, initial_objective: None, final_objective: None, final_params: None, phases: Vec::new(), trace: Vec::new() }
    }
}

/// Runs the phases in order. Phases other than the first start from the
/// lifted result of their predecessor; a leading quasi-Newton phase starts
/// at the box center.
pub fn run_identification(
    problem: &IdentificationProblem,
    bounds: &ParameterBounds,
    plan: &PhasePlan,
    seed: u64,
) -> Result<IdentificationReport> {
    let m = problem.m();
    let v = plan.violations(m);
    if !v.is_empty() {
        return Err(Error::Config(v.join("; ")));
    }
    let mut report = IdentificationReport::empty(seed);
    let mut carried: Option<(Grouping, Vec<f64>)> = None;
    let mut iteration = 0;

    for (n, spec) in plan.phases.iter().enumerate() {
        let clock = Instant::now();
        let obj = PhaseObjective::new(problem, spec.grouping, bounds)?;
        let start = match &carried {
            Some((from, phys)) => obj.bounds.to_unit(&lift_grouping(phys, from, &spec.grouping, m)?),
            None => vec![0.5; obj.dim()],
        };
        let phase_seed = seed.wrapping_add(n as u64);
        let context = |e: Error| Error::Internal(format!("phase {}: {e}", n + 1));

        let (x, history, evaluations, iterations, stop, grad_norm) = match spec.algorithm {
            Algorithm::Global => {
                let opts = GlobalOptions {
                    max_generations: spec.budget,
                    stagnation: spec.stagnation,
                    threshold: spec.threshold,
                    ..plan.global.clone()
                };
                let r = phase_global(&obj, &opts, phase_seed).map_err(context)?;
                (r.x, r.history, r.evaluations, r.iterations, r.stop, None)
            }
            Algorithm::QuasiNewton => {
                let opts = QuasiNewtonOptions {
                    max_iter: spec.budget,
                    stagnation: spec.stagnation,
                    threshold: spec.threshold,
                    ..plan.quasi_newton.clone()
                };
                let r = phase_quasi_newton(&obj, &start, &opts, phase_seed).map_err(context)?;
                (r.x, r.history, r.evaluations, r.iterations, r.stop, Some(r.grad_norm))
            }
        };
        report.initial_objective.get_or_insert(history[0]);
        for value in &history {
            report.trace.push(TraceEntry { iteration, phase: n + 1, objective: *value });
            iteration += 1;
        }
        let grouped = obj.physical(&x);
        let params = obj.params(&x)?;
        let end = *history.last().unwrap_or(&f64::NAN);
        log::info!("phase {} ({}, {:?}): {:.6e} -> {:.6e}, {:?}", n + 1, spec.grouping, spec.algorithm, history[0], end, stop);
        report.phases.push(PhaseReport {
            phase: n + 1,
            grouping: spec.grouping,
            algorithm: spec.algorithm,
            start_objective: history[0],
            end_objective: end,
            evaluations,
            iterations,
            stop,
            grad_norm,
            grouped: grouped.clone(),
            params: params.clone(),
            seconds: clock.elapsed().as_secs_f64(),
        });
        report.final_objective = Some(end);
        report.final_params = Some(params);
        carried = Some((spec.grouping, grouped));
    }
    Ok(report)
}

/// Smooth planted distribution: each field oscillates around its mean with
/// peak-to-peak amplitude `variation * mean`, phase-shifted per field.
pub fn planted_parameters(m: usize, means: [f64; 3], variation: f64) -> AdhesiveParams {
    let shape = |shift: f64| -> Vec<f64> {
        (0..m)
            .map(|i| {
                let x = if m > 1 { i as f64 / (m - 1) as f64 } else { 0.0 };
                1.0 + 0.5 * variation * (std::f64::consts::PI * (x + shift)).cos()
            })
            .collect()
    };
    let scale = |mean: f64, s: Vec<f64>| s.into_iter().map(|v| mean * v).collect();
    AdhesiveParams {
        alpha_f: scale(means[0], shape(0.0)),
        kappa_n: scale(means[1], shape(0.5)),
        kappa_t: scale(means[2], shape(1.0)),
    }
}
