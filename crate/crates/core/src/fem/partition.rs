use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::mesh::Mesh2D;
use crate::error::{Error, Result};

/// Local contact frame of a contact node.
///
/// The normal coordinate is the opening displacement `u_N = -n . u`
/// (with `n` the outward normal), so non-penetration reads `u_N >= 0`;
/// the tangential coordinate is `u_T = t . u` with `t = (-n_y, n_x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactFrame {
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
}

impl ContactFrame {
    pub fn from_normal(normal: [f64; 2]) -> Self {
        ContactFrame {
            normal,
            tangent: [-normal[1], normal[0]],
        }
    }

    /// `(u_N, u_T)` from a global displacement.
    pub fn to_local(&self, u: [f64; 2]) -> [f64; 2] {
        [
            -(self.normal[0] * u[0] + self.normal[1] * u[1]),
            self.tangent[0] * u[0] + self.tangent[1] * u[1],
        ]
    }

    pub fn to_global(&self, local: [f64; 2]) -> [f64; 2] {
        [
            -self.normal[0] * local[0] + self.tangent[0] * local[1],
            -self.normal[1] * local[0] + self.tangent[1] * local[1],
        ]
    }
}

/// Split of displacement DOFs into contact / free / Dirichlet blocks.
///
/// Contact DOFs come in `(u_N, u_T)` pairs, one pair per contact node in
/// contact-boundary order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DofPartition {
    /// Global `(x, y)` DOFs of each contact node.
    pub contact: Vec<usize>,
    pub free: Vec<usize>,
    pub dirichlet: Vec<usize>,
    pub frames: Vec<ContactFrame>,
    pub num_dofs: usize,
}

impl DofPartition {
    pub fn n_contact(&self) -> usize {
        self.contact.len()
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn n_dirichlet(&self) -> usize {
        self.dirichlet.len()
    }

    /// Block-diagonal map from contact-frame to global contact DOFs.
    pub fn frame_matrix(&self) -> DMatrix<f64> {
        let n = self.contact.len();
        let mut t = DMatrix::zeros(n, n);
        for (i, f) in self.frames.iter().enumerate() {
            t[(2 * i, 2 * i)] = -f.normal[0];
            t[(2 * i + 1, 2 * i)] = -f.normal[1];
            t[(2 * i, 2 * i + 1)] = f.tangent[0];
            t[(2 * i + 1, 2 * i + 1)] = f.tangent[1];
        }
        t
    }

    /// Scatters block vectors into a global displacement vector, rotating the
    /// contact block back to global coordinates.
    pub fn assemble_full(&self, u_c: &[f64], u_f: &[f64], w_d: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.num_dofs];
        for (i, f) in self.frames.iter().enumerate() {
            let g = f.to_global([u_c[2 * i], u_c[2 * i + 1]]);
            u[self.contact[2 * i]] = g[0];
            u[self.contact[2 * i + 1]] = g[1];
        }
        for (&d, &v) in self.free.iter().zip(u_f) {
            u[d] = v;
        }
        for (&d, &v) in self.dirichlet.iter().zip(w_d) {
            u[d] = v;
        }
        u
    }
}

pub fn partition_dofs(mesh: &Mesh2D) -> Result<DofPartition> {
    if mesh.dirichlet_nodes().is_empty() {
        return Err(Error::InconsistentLabeling(
            "Dirichlet boundary is empty; the elastic problem would be singular".into(),
        ));
    }
    let dirichlet: BTreeSet<usize> = mesh.dirichlet_nodes().iter().copied().collect();
    if let Some(n) = mesh.contact_nodes().iter().find(|n| dirichlet.contains(n)) {
        return Err(Error::InconsistentLabeling(format!(
            "node {n} lies on both the contact and the Dirichlet boundary"
        )));
    }
    let contact_set: BTreeSet<usize> = mesh.contact_nodes().iter().copied().collect();
    let contact = mesh
        .contact_nodes()
        .iter()
        .flat_map(|&n| [2 * n, 2 * n + 1])
        .collect();
    let dirichlet_dofs = dirichlet.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect();
    let free = (0..mesh.num_nodes())
        .filter(|n| !contact_set.contains(n) && !dirichlet.contains(n))
        .flat_map(|n| [2 * n, 2 * n + 1])
        .collect();
    Ok(DofPartition {
        contact,
        free,
        dirichlet: dirichlet_dofs,
        frames: mesh
            .contact_normals()
            .iter()
            .map(|&n| ContactFrame::from_normal(n))
            .collect(),
        num_dofs: mesh.num_dofs(),
    })
}
