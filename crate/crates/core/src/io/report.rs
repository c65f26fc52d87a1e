//! CSV and JSON emission of identification and simulation results.

use std::fmt::Write as _;
use std::path::Path;

use super::config::write_json;
use super::svg;
use crate::error::{Error, Result};
use crate::forward::{ForwardModel, LoadingProgram, Trajectory};
use crate::identify::{IdentificationReport, TraceEntry};

pub const PHASE_BOUNDARY: &str = "phase_boundary";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// `iteration,phase,objective,event`; a marker row with event
/// `phase_boundary` precedes the first entry of every phase after the first.
pub fn trace_csv(trace: &[TraceEntry]) -> String {
    let mut s = String::from("iteration,phase,objective,event\n");
    for (n, e) in trace.iter().enumerate() {
        if n > 0 && trace[n - 1].phase != e.phase {
            let _ = writeln!(s, "{},{},{},{PHASE_BOUNDARY}", e.iteration, e.phase, num(e.objective));
        }
        let _ = writeln!(s, "{},{},{},", e.iteration, e.phase, num(e.objective));
    }
    s
}

/// `node,x,alpha_f,kappa_n,kappa_t` for every contact node.
pub fn params_csv(model: Option<&ForwardModel>, params: &crate::adhesive::AdhesiveParams) -> String {
    let mut s = String::from("node,x,alpha_f,kappa_n,kappa_t\n");
    for i in 0..params.len() {
        let x = model.map_or(f64::NAN, |m| m.mesh.nodes()[m.mesh.contact_nodes()[i]][0]);
        let _ = writeln!(s, "{i},{},{},{},{}", num(x), num(params.alpha_f[i]), num(params.kappa_n[i]), num(params.kappa_t[i]));
    }
    s
}

/// `step,node,x,z,u_n,u_t` for every step and contact node.
pub fn trajectory_csv(model: &ForwardModel, traj: &Trajectory) -> String {
    let mut s = String::from("step,node,x,z,u_n,u_t\n");
    for k in 0..=traj.steps() {
        for i in 0..model.m() {
            let x = model.mesh.nodes()[model.mesh.contact_nodes()[i]][0];
            let _ = writeln!(
                s,
                "{k},{i},{},{},{},{}",
                num(x),
                num(traj.z[k][i]),
                num(traj.u[k][2 * i]),
                num(traj.u[k][2 * i + 1])
            );
        }
    }
    s
}

pub fn write_trajectory_csv(path: &Path, model: &ForwardModel, traj: &Trajectory) -> Result<()> {
    write(path, &trajectory_csv(model, traj))
}

/// Writes `trace.csv`, `params_phase{n}.csv`, `report.json` and, when
/// `plots` is given, `objective.svg` and `params.svg`.
pub fn emit_results(
    report: &IdentificationReport,
    out: &Path,
    model: Option<&ForwardModel>,
    plots: Option<&crate::adhesive::AdhesiveParams>,
) -> Result<()> {
    create_dir(out)?;
    write(&out.join("trace.csv"), &trace_csv(&report.trace))?;
    for p in &report.phases {
        write(&out.join(format!("params_phase{}.csv", p.phase)), &params_csv(model, &p.params))?;
    }
    write_json(&out.join("report.json"), report)?;
    if let Some(planted) = plots {
        write(&out.join("objective.svg"), &svg::objective_plot(&report.trace))?;
        if let Some(last) = report.phases.last() {
            write(&out.join("params.svg"), &svg::params_plot(&last.params, Some(planted)))?;
        }
    }
    Ok(())
}

/// Deformation frames `frames/step_{k}.svg` for every step.
pub fn emit_frames(
    out: &Path,
    model: &ForwardModel,
    traj: &Trajectory,
    loading: &LoadingProgram,
    magnification: f64,
) -> Result<()> {
    let dir = out.join("frames");
    create_dir(&dir)?;
    for k in 0..=traj.steps() {
        let u = crate::forward::full_displacement(model, traj, loading, k);
        let text = svg::deformation_frame(&model.mesh, &u, &traj.z[k], magnification, k);
        write(&dir.join(format!("step_{k:03}.svg")), &text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identify::IdentificationReport;

    #[test]
    fn empty_report_gives_header_only() {
        let dir = tempfile::tempdir().unwrap();
        emit_results(&IdentificationReport::empty(3), dir.path(), None, None).unwrap();
        let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
        assert_eq!(trace, "iteration,phase,objective,event\n");
        let back: IdentificationReport = super::super::read_json(&dir.path().join("report.json")).unwrap();
        assert_eq!(back, IdentificationReport::empty(3));
    }

    #[test]
    fn boundary_markers_between_phases() {
        let trace: Vec<TraceEntry> = [(1, 5.0), (1, 4.0), (2, 4.0), (2, 1.0), (3, 0.5), (4, 0.1)]
            .iter()
            .enumerate()
            .map(|(i, (p, v))| TraceEntry { iteration: i, phase: *p, objective: *v })
            .collect();
        let csv = trace_csv(&trace);
        assert_eq!(csv.lines().filter(|l| l.ends_with(PHASE_BOUNDARY)).count(), 3);
        assert_eq!(csv.lines().count(), 1 + 6 + 3);
        // full precision
        assert!(csv.contains("5.0000000000000000e0"));
    }
}
