//! Semi-implicit time stepping: at every step a contact QP for `u` with the
//! delamination frozen at its previous value, then a box QP for `z`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adhesive::{
    assemble_contact_coupling, assemble_z_quadratic, compute_b, AdhesiveEnergyConfig, AdhesiveParams,
    SurfaceOperators,
};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_stiffness, build_structured_mesh, partition_dofs, schur_reduce, DofPartition, ElasticityTensor,
    Mesh2D, RectangleGeometry, ReducedOperators,
};
use crate::qp::{solve_box_qp_warm, solve_contact_qp_warm, Activity, BoxQP, ContactQP, QPSolution};

/// Everything the recursion needs that does not depend on the parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForwardModel {
    pub mesh: Mesh2D,
    pub partition: DofPartition,
    pub ops: ReducedOperators,
    pub surface: SurfaceOperators,
    pub tol: f64,
}

impl ForwardModel {
    pub fn new(
        mesh: Mesh2D,
        elasticity: &ElasticityTensor,
        adhesive: &AdhesiveEnergyConfig,
        tol: f64,
    ) -> Result<Self> {
        elasticity.validate()?;
        let partition = partition_dofs(&mesh)?;
        let k = assemble_stiffness(&mesh, elasticity);
        let ops = schur_reduce(&k, &partition)?;
        let surface = assemble_z_quadratic(adhesive, &mesh)?;
        Ok(Self { mesh, partition, ops, surface, tol })
    }

    pub fn structured(
        nx: usize,
        ny: usize,
        geometry: &RectangleGeometry,
        elasticity: &ElasticityTensor,
        adhesive: &AdhesiveEnergyConfig,
        tol: f64,
    ) -> Result<Self> {
        Self::new(build_structured_mesh(nx, ny, geometry)?, elasticity, adhesive, tol)
    }

    /// Number of contact nodes `M`.
    pub fn m(&self) -> usize {
        self.surface.m()
    }

    pub fn n_dirichlet(&self) -> usize {
        self.ops.n_dirichlet()
    }

    pub fn contact_qp(&self, params: &AdhesiveParams, z_prev: &[f64], w: &[f64]) -> Result<ContactQP> {
        let h = &self.ops.a_alpha + assemble_contact_coupling(params, z_prev, &self.surface.measure)?;
        let c = &self.ops.a_beta * DVector::from_column_slice(w);
        Ok(ContactQP { h, c: c.iter().copied().collect(), constrained: (0..2 * self.m()).step_by(2).collect() })
    }

    pub fn z_qp(&self, params: &AdhesiveParams, u: &[f64], z_prev: &[f64]) -> Result<BoxQP> {
        Ok(BoxQP {
            h: self.surface.b.clone(),
            c: compute_b(params, u, &self.surface)?,
            lo: vec![0.0; self.m()],
            hi: z_prev.to_vec(),
        })
    }
}

/// Random monotone pulling schedule on the loading edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadingSpec {
    pub steps: usize,
    pub tau: f64,
    /// Terminal displacement magnitude (m) of the loading edge.
    pub amplitude: f64,
    /// Displacement direction of the loading edge; normalized on use.
    pub direction: [f64; 2],
    /// Relative spread of the per-step increments, in `[0, 1)`.
    pub jitter: f64,
    pub seed: u64,
}

impl LoadingSpec {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.steps == 0 {
            errs.push("loading.steps must be >= 1".to_string());
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            errs.push(format!("loading.tau = {} must be positive", self.tau));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            errs.push(format!("loading.amplitude = {} must be nonnegative", self.amplitude));
        }
        if !(self.jitter >= 0.0 && self.jitter < 1.0) {
            errs.push(format!("loading.jitter = {} must lie in [0, 1)", self.jitter));
        }
        let norm = self.direction[0].hypot(self.direction[1]);
        if !(norm > 0.0 && norm.is_finite()) {
            errs.push("loading.direction must be a nonzero vector".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs.join("; ")))
        }
    }

    /// `w_D^0 = 0` followed by `steps` positive increments of mean
    /// `amplitude / steps`, drawn from a ChaCha8 stream.
    pub fn build(&self, n_dirichlet: usize) -> Result<LoadingProgram> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let norm = self.direction[0].hypot(self.direction[1]);
        let dir = [self.direction[0] / norm, self.direction[1] / norm];
        let mut t = 0.0;
        let mut w = vec![vec![0.0; n_dirichlet]];
        for _ in 0..self.steps {
            let jitter: f64 = if self.jitter > 0.0 { rng.random_range(-self.jitter..self.jitter) } else { 0.0 };
            t += self.amplitude / self.steps as f64 * (1.0 + jitter);
            w.push((0..n_dirichlet).map(|d| t * dir[d % 2]).collect());
        }
        Ok(LoadingProgram { tau: self.tau, w })
    }
}

/// Dirichlet values `w_D^0 .. w_D^K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadingProgram {
    pub tau: f64,
    pub w: Vec<Vec<f64>>,
}

impl LoadingProgram {
    pub fn steps(&self) -> usize {
        self.w.len() - 1
    }

    /// Euclidean norm of `w_D^k` divided by the square root of the DOF count.
    pub fn magnitude(&self, k: usize) -> f64 {
        let w = &self.w[k];
        (w.iter().map(|v| v * v).sum::<f64>() / w.len().max(1) as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutput {
    pub u: Vec<f64>,
    pub z: Vec<f64>,
    pub u_qp: QPSolution,
    pub z_qp: QPSolution,
}

/// States `u^0..u^K`, `z^0..z^K` and the QP records that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub u: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    /// Contact QP records for `k = 0..=K`.
    pub u_records: Vec<QPSolution>,
    /// Delamination QP records for `k = 1..=K`, stored at `k - 1`.
    pub z_records: Vec<QPSolution>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.u.len() - 1
    }

    pub fn z_record(&self, k: usize) -> &QPSolution {
        &self.z_records[k - 1]
    }

    pub fn max_kkt_residual(&self) -> f64 {
        self.u_records.iter().chain(&self.z_records).map(|r| r.kkt_residual).fold(0.0, f64::max)
    }

    /// Degenerate constraints at steps `1..=K` (`u^0` does not feed the recursion).
    pub fn has_biactive(&self) -> bool {
        self.u_records[1..]
            .iter()
            .chain(&self.z_records)
            .any(|r| r.activity.iter().any(|a| a.is_biactive()))
    }

    pub fn free_displacement(&self, k: usize, ops: &ReducedOperators, loading: &LoadingProgram) -> Vec<f64> {
        ops.reconstruct_free(&self.u[k], &loading.w[k])
    }

    /// Violations of unidirectionality, bounds and non-penetration, if any.
    pub fn check_invariants(&self, tol: f64) -> std::result::Result<(), String> {
        for k in 0..=self.steps() {
            for (i, &z) in self.z[k].iter().enumerate() {
                if !(0.0..=1.0).contains(&z) {
                    return Err(format!("z^{k}_{i} = {z} outside [0, 1]"));
                }
                if k > 0 && z > self.z[k - 1][i] {
                    return Err(format!("z^{k}_{i} = {z} exceeds z^{}_{i} = {}", k - 1, self.z[k - 1][i]));
                }
            }
            for (i, un) in self.u[k].iter().step_by(2).enumerate() {
                if *un < -tol {
                    return Err(format!("u_N^{k} at node {i} is {un}"));
                }
            }
        }
        Ok(())
    }
}

/// One step of the recursion from `z_prev` under the load `w`.
pub fn step(
    model: &ForwardModel,
    params: &AdhesiveParams,
    z_prev: &[f64],
    w: &[f64],
    warm: Option<(&[Activity], &[Activity])>,
) -> Result<StepOutput> {
    let cqp = model.contact_qp(params, z_prev, w)?;
    let u_qp = solve_contact_qp_warm(&cqp, model.tol, warm.map(|w| w.0))?;
    let zqp = model.z_qp(params, &u_qp.x, z_prev)?;
    let z_qp = solve_box_qp_warm(&zqp, model.tol, warm.map(|w| w.1))?;
    Ok(StepOutput { u: u_qp.x.clone(), z: z_qp.x.clone(), u_qp, z_qp })
}

pub fn simulate(
    model: &ForwardModel,
    params: &AdhesiveParams,
    loading: &LoadingProgram,
    z0: &[f64],
) -> Result<Trajectory> {
    params.validate()?;
    let m = model.m();
    if params.len() != m || z0.len() != m {
        return Err(Error::Dimension(format!(
            "{} contact nodes, {} parameter triples, {} initial delamination values",
            m,
            params.len(),
            z0.len()
        )));
    }
    if loading.w.iter().any(|w| w.len() != model.n_dirichlet()) {
        return Err(Error::Dimension("loading does not match the Dirichlet DOF count".into()));
    }
    if z0.iter().any(|z| !(0.0..=1.0).contains(z)) {
        return Err(Error::Domain("initial delamination must lie in [0, 1]".into()));
    }
    let wrap = |step: usize| move |e: Error| Error::Simulation { step, source: Box::new(e) };

    let u0 = solve_contact_qp_warm(&model.contact_qp(params, z0, &loading.w[0])?, model.tol, None).map_err(wrap(0))?;
    let k_steps = loading.steps();
    let mut traj = Trajectory {
        u: vec![u0.x.clone()],
        z: vec![z0.to_vec()],
        u_records: vec![u0],
        z_records: Vec::with_capacity(k_steps),
    };
    for k in 1..=k_steps {
        let warm = (
            traj.u_records[k - 1].activity.as_slice(),
            traj.z_records.last().map(|r| r.activity.as_slice()).unwrap_or(&[]),
        );
        let out = step(model, params, &traj.z[k - 1], &loading.w[k], Some(warm)).map_err(wrap(k))?;
        traj.u.push(out.u);
        traj.z.push(out.z);
        traj.u_records.push(out.u_qp);
        traj.z_records.push(out.z_qp);
    }
    Ok(traj)
}

/// Full displacement field at step `k` in global coordinates.
pub fn full_displacement(model: &ForwardModel, traj: &Trajectory, loading: &LoadingProgram, k: usize) -> Vec<f64> {
    let uf = traj.free_displacement(k, &model.ops, loading);
    model.partition.assemble_full(&traj.u[k], &uf, &loading.w[k])
}

/// Energy `u'Ku/2` of a full displacement vector (diagnostics).
pub fn elastic_energy(k: &DMatrix<f64>, u: &[f64]) -> f64 {
    let u = DVector::from_column_slice(u);
    0.5 * u.dot(&(k * &u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::LoadingEdge;
    use crate::qp::DEFAULT_TOL;

    fn model() -> ForwardModel {
        ForwardModel::structured(
            6,
            5,
            &RectangleGeometry { width: 0.25, height: 0.2, contact_nodes: 5, loading_edge: LoadingEdge::Right },
            &ElasticityTensor::new(70e9, 0.35).unwrap(),
            &AdhesiveEnergyConfig::default(),
            DEFAULT_TOL,
        )
        .unwrap()
    }

    fn params(m: usize) -> AdhesiveParams {
        AdhesiveParams::uniform(m, 187.5, 1.5e11, 7.5e10)
    }

    fn spec(amplitude: f64) -> LoadingSpec {
        LoadingSpec { steps: 10, tau: 1.0, amplitude, direction: [0.2, 1.0], jitter: 0.5, seed: 3 }
    }

    #[test]
    fn loading_is_monotone_and_seeded() {
        let a = spec(1e-3).build(8).unwrap();
        let b = spec(1e-3).build(8).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.steps(), 10);
        assert!(a.w[0].iter().all(|v| *v == 0.0));
        for k in 1..=10 {
            assert!(a.magnitude(k) > a.magnitude(k - 1));
        }
    }

    #[test]
    fn zero_delamination_gives_pure_contact() {
        let m = model();
        let w = vec![1e-4; m.n_dirichlet()];
        let out = step(&m, &params(m.m()), &vec![0.0; m.m()], &w, None).unwrap();
        assert!(out.z.iter().all(|z| *z == 0.0));
        let pure = ContactQP {
            h: m.ops.a_alpha.clone(),
            c: (&m.ops.a_beta * DVector::from_vec(w)).iter().copied().collect(),
            constrained: (0..2 * m.m()).step_by(2).collect(),
        };
        let sol = crate::qp::solve_contact_qp(&pure, DEFAULT_TOL).unwrap();
        for (a, b) in out.u.iter().zip(&sol.x) {
            assert!((a - b).abs() <= 1e-12 * sol.x.iter().fold(0.0f64, |s, v| s.max(v.abs())));
        }
    }

    #[test]
    fn rest_state_keeps_adhesive_intact() {
        let m = model();
        let out = step(&m, &params(m.m()), &vec![1.0; m.m()], &vec![0.0; m.n_dirichlet()], None).unwrap();
        assert!(out.u.iter().all(|u| *u == 0.0));
        assert!(out.z.iter().all(|z| *z == 1.0));
        assert!(out.z_qp.activity.iter().all(|a| *a == Activity::Upper));
    }

    #[test]
    fn z_step_does_not_increase_energy() {
        let m = model();
        let p = params(m.m());
        let z_prev = vec![1.0, 0.8, 0.6, 0.9, 1.0];
        let w = vec![5e-5; m.n_dirichlet()];
        let out = step(&m, &p, &z_prev, &w, None).unwrap();
        let q = m.z_qp(&p, &out.u, &z_prev).unwrap();
        assert!(q.objective(&out.z) <= q.objective(&z_prev));
    }

    #[test]
    fn zero_loading_is_stationary() {
        let m = model();
        let traj = simulate(&m, &params(m.m()), &spec(0.0).build(m.n_dirichlet()).unwrap(), &vec![1.0; m.m()]).unwrap();
        for k in 0..=traj.steps() {
            assert!(traj.u[k].iter().all(|u| *u == 0.0));
            assert_eq!(traj.z[k], vec![1.0; m.m()]);
        }
    }

    #[test]
    fn strong_pulling_delaminates() {
        let m = model();
        let traj = simulate(&m, &params(m.m()), &spec(1e-3).build(m.n_dirichlet()).unwrap(), &vec![1.0; m.m()]).unwrap();
        traj.check_invariants(1e-12).unwrap();
        assert!(traj.z[traj.steps()].contains(&0.0));
        assert!(traj.max_kkt_residual() <= DEFAULT_TOL);
    }

    #[test]
    fn failure_reports_step() {
        let m = model();
        let mut loading = spec(1e-4).build(m.n_dirichlet()).unwrap();
        loading.w[3][0] = f64::NAN;
        match simulate(&m, &params(m.m()), &loading, &vec![1.0; m.m()]) {
            Err(Error::Simulation { step, .. }) => assert_eq!(step, 3),
            other => panic!("{other:?}"),
        }
    }
}
