use nalgebra::{DMatrix, SMatrix};
use serde::{Deserialize, Serialize};

use super::mesh::{signed_area, Mesh2D};
use crate::error::{Error, Result};

/// Isotropic elasticity tensor in plane strain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticityTensor {
    /// Young modulus (Pa).
    pub young: f64,
    /// Poisson ratio.
    pub poisson: f64,
}

impl ElasticityTensor {
    pub fn new(young: f64, poisson: f64) -> Result<Self> {
        let t = ElasticityTensor { young, poisson };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.young > 0.0 && self.young.is_finite()) {
            return Err(Error::InvalidMaterial(format!(
                "Young modulus must be positive, got {}",
                self.young
            )));
        }
        if !(self.poisson > -1.0 && self.poisson < 0.5) {
            return Err(Error::InvalidMaterial(format!(
                "Poisson ratio must lie in (-1, 0.5), got {}",
                self.poisson
            )));
        }
        Ok(())
    }

    /// Lame constants `(lambda, mu)`.
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.young, self.poisson);
        (nu * e / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
    }

    /// Voigt matrix acting on `(e_xx, e_yy, 2 e_xy)`.
    pub fn voigt(&self) -> SMatrix<f64, 3, 3> {
        let (l, m) = self.lame();
        SMatrix::<f64, 3, 3>::new(l + 2.0 * m, l, 0.0, l, l + 2.0 * m, 0.0, 0.0, 0.0, m)
    }
}

/// Stiffness matrix of one P1 triangle, DOFs ordered `(x0, y0, x1, y1, x2, y2)`.
pub fn element_stiffness(p: [[f64; 2]; 3], elast: &ElasticityTensor) -> SMatrix<f64, 6, 6> {
    let area = signed_area(p[0], p[1], p[2]);
    let mut b = SMatrix::<f64, 3, 6>::zeros();
    for k in 0..3 {
        let (j, l) = ((k + 1) % 3, (k + 2) % 3);
        // gradient of the barycentric coordinate of vertex k
        let gx = (p[j][1] - p[l][1]) / (2.0 * area);
        let gy = (p[l][0] - p[j][0]) / (2.0 * area);
        b[(0, 2 * k)] = gx;
        b[(1, 2 * k + 1)] = gy;
        b[(2, 2 * k)] = gy;
        b[(2, 2 * k + 1)] = gx;
    }
    let ke = b.transpose() * elast.voigt() * b * area;
    (ke + ke.transpose()) * 0.5
}

/// Global stiffness over all `2 * nodes` displacement DOFs (node-major, x then y).
pub fn assemble_stiffness(mesh: &Mesh2D, elast: &ElasticityTensor) -> DMatrix<f64> {
    let n = mesh.num_dofs();
    let mut k = DMatrix::zeros(n, n);
    let nodes = mesh.nodes();
    for tri in mesh.triangles() {
        let ke = element_stiffness([nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]], elast);
        for a in 0..3 {
            for b in 0..3 {
                for da in 0..2 {
                    for db in 0..2 {
                        k[(2 * tri[a] + da, 2 * tri[b] + db)] += ke[(2 * a + da, 2 * b + db)];
                    }
                }
            }
        }
    }
    k
}
