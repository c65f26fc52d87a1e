//! Adhesive surface terms: the z-weighted elastic coupling on the contact
//! DOFs, the z-quadratic matrix `B`, and the z-linear coefficient `b(pi, u)`.
//!
//! Contact vectors are in the nodal frame `[N0, T0, N1, T1, ...]`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::Mesh2D;

/// Per-contact-node adhesive parameters (fracture toughness and the two
/// adhesive stiffnesses).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdhesiveParams {
    pub alpha_f: Vec<f64>,
    pub kappa_n: Vec<f64>,
    pub kappa_t: Vec<f64>,
}

impl AdhesiveParams {
    pub fn uniform(m: usize, alpha_f: f64, kappa_n: f64, kappa_t: f64) -> Self {
        Self {
            alpha_f: vec![alpha_f; m],
            kappa_n: vec![kappa_n; m],
            kappa_t: vec![kappa_t; m],
        }
    }

    pub fn len(&self) -> usize {
        self.alpha_f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha_f.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.len();
        if self.kappa_n.len() != m || self.kappa_t.len() != m {
            return Err(Error::Dimension("adhesive parameter fields differ in length".into()));
        }
        let all = self.alpha_f.iter().chain(&self.kappa_n).chain(&self.kappa_t);
        if all.clone().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Domain("adhesive parameters must be finite and positive".into()));
        }
        Ok(())
    }

    /// Field-major flat vector `[alpha_f.., kappa_n.., kappa_t..]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.alpha_f.clone();
        v.extend_from_slice(&self.kappa_n);
        v.extend_from_slice(&self.kappa_t);
        v
    }

    pub fn from_flat(v: &[f64]) -> Result<Self> {
        if !v.len().is_multiple_of(3) {
            return Err(Error::Dimension(format!("flat parameter length {} not divisible by 3", v.len())));
        }
        let m = v.len() / 3;
        Ok(Self {
            alpha_f: v[..m].to_vec(),
            kappa_n: v[m..2 * m].to_vec(),
            kappa_t: v[2 * m..].to_vec(),
        })
    }
}

/// Cohesive energy `h(z) = a z^2 / 2 + c z` and surface-gradient weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdhesiveEnergyConfig {
    pub a: f64,
    pub c: f64,
    pub epsilon: f64,
    /// Use the consistent P1 surface mass for the `a`-term of `B`.
    #[serde(default)]
    pub consistent_mass: bool,
}

impl Default for AdhesiveEnergyConfig {
    fn default() -> Self {
        Self { a: 1.0, c: -1.0, epsilon: 1.0, consistent_mass: false }
    }
}

impl AdhesiveEnergyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::Config(format!("cohesive coefficient a = {} must be positive", self.a)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("gradient weight epsilon = {} must be nonnegative", self.epsilon)));
        }
        if !self.c.is_finite() {
            return Err(Error::Config("cohesive coefficient c must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceOperators {
    /// `B`, symmetric positive definite, `M x M`.
    pub b: DMatrix<f64>,
    /// Lumped surface measure per contact node.
    pub measure: Vec<f64>,
    /// Linear coefficient of `h`.
    pub c: f64,
}

impl SurfaceOperators {
    pub fn m(&self) -> usize {
        self.measure.len()
    }
}

/// Half the lengths of the contact edges adjacent to each contact node.
pub fn lumped_measure(mesh: &Mesh2D) -> Vec<f64> {
    let mut s = vec![0.0; mesh.contact_nodes().len()];
    for (i, j, len) in mesh.contact_segments() {
        s[i] += 0.5 * len;
        s[j] += 0.5 * len;
    }
    s
}

pub fn assemble_z_quadratic(cfg: &AdhesiveEnergyConfig, mesh: &Mesh2D) -> Result<SurfaceOperators> {
    cfg.validate()?;
    let m = mesh.contact_nodes().len();
    if m == 0 {
        return Err(Error::InvalidGeometry("empty contact boundary".into()));
    }
    let measure = lumped_measure(mesh);
    let mut b = DMatrix::zeros(m, m);
    if cfg.consistent_mass {
        for (i, j, len) in mesh.contact_segments() {
            b[(i, i)] += cfg.a * len / 3.0;
            b[(j, j)] += cfg.a * len / 3.0;
            b[(i, j)] += cfg.a * len / 6.0;
            b[(j, i)] += cfg.a * len / 6.0;
        }
    } else {
        for (i, s) in measure.iter().enumerate() {
            b[(i, i)] = cfg.a * s;
        }
    }
    for (i, j, len) in mesh.contact_segments() {
        let k = cfg.epsilon / len;
        b[(i, i)] += k;
        b[(j, j)] += k;
        b[(i, j)] -= k;
        b[(j, i)] -= k;
    }
    Ok(SurfaceOperators { b, measure, c: cfg.c })
}

fn check_lengths(params: &AdhesiveParams, measure: &[f64], n: usize, what: &str) -> Result<()> {
    if params.len() != measure.len() || n != measure.len() {
        return Err(Error::Dimension(format!(
            "{what}: {} params, {} surface nodes, {n} entries",
            params.len(),
            measure.len()
        )));
    }
    Ok(())
}

/// `diag(z_i kappa_N,i s_i, z_i kappa_T,i s_i)` on the contact DOFs.
pub fn assemble_contact_coupling(
    params: &AdhesiveParams,
    z: &[f64],
    measure: &[f64],
) -> Result<DMatrix<f64>> {
    check_lengths(params, measure, z.len(), "contact coupling")?;
    if let Some(v) = z.iter().find(|v| v.is_nan() || **v < 0.0) {
        return Err(Error::Domain(format!("negative delamination value {v}")));
    }
    let m = z.len();
    let mut a = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        a[(2 * i, 2 * i)] = z[i] * params.kappa_n[i] * measure[i];
        a[(2 * i + 1, 2 * i + 1)] = z[i] * params.kappa_t[i] * measure[i];
    }
    Ok(a)
}

/// `b_i = s_i (kappa_N u_N^2 / 2 + kappa_T u_T^2 / 2 - alpha_F + c)`.
pub fn compute_b(params: &AdhesiveParams, u_c: &[f64], surf: &SurfaceOperators) -> Result<Vec<f64>> {
    check_lengths(params, &surf.measure, u_c.len() / 2, "b")?;
    Ok((0..surf.m())
        .map(|i| {
            let (un, ut) = (u_c[2 * i], u_c[2 * i + 1]);
            surf.measure[i]
                * (0.5 * params.kappa_n[i] * un * un + 0.5 * params.kappa_t[i] * ut * ut
                    - params.alpha_f[i]
                    + surf.c)
        })
        .collect())
}

/// Jacobian of `b` with respect to the contact displacement (`M x 2M`).
pub fn b_jacobian_u(params: &AdhesiveParams, u_c: &[f64], measure: &[f64]) -> DMatrix<f64> {
    let m = measure.len();
    let mut g = DMatrix::zeros(m, 2 * m);
    for i in 0..m {
        g[(i, 2 * i)] = measure[i] * params.kappa_n[i] * u_c[2 * i];
        g[(i, 2 * i + 1)] = measure[i] * params.kappa_t[i] * u_c[2 * i + 1];
    }
    g
}
