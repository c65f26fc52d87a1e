pub mod driver;
pub mod global;
pub mod gradcheck;
pub mod grouping;
pub mod objective;
pub mod quasi_newton;

pub use driver::{planted_parameters, run_identification, Algorithm, IdentificationReport, PhasePlan, PhaseReport, PhaseSpec, TraceEntry};
pub use gradcheck::{gradient_check, random_parameters, GradCheckRow, GradientCheck};
pub use global::{phase_global, GlobalOptions, StopReason};
pub use grouping::{lift_grouping, Grouping};
pub use objective::{Evaluation, IdentificationProblem, Objective, ParameterBounds, PhaseObjective, TrackingData};
pub use quasi_newton::{phase_quasi_newton, QuasiNewtonOptions};
