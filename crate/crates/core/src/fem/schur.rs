use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::partition::DofPartition;
use crate::error::{Error, Result};

/// Elastic operators condensed onto the contact boundary.
///
/// With `K` partitioned into contact (C, in the contact frame), free (F) and
/// Dirichlet (D) blocks:
///
/// ```text
/// A_alpha = K_CC - K_CF K_FF^-1 K_FC      A_gamma = -K_FF^-1 K_FC
/// A_beta  = K_CD - K_CF K_FF^-1 K_FD      A_delta = -K_FF^-1 K_FD
/// ```
///
/// so that `u_F = A_gamma u_C + A_delta w_D` is the equilibrium interior
/// response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedOperators {
    pub a_alpha: DMatrix<f64>,
    pub a_beta: DMatrix<f64>,
    pub a_gamma: DMatrix<f64>,
    pub a_delta: DMatrix<f64>,
}

fn block(k: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| k[(rows[i], cols[j])])
}

pub fn schur_reduce(k: &DMatrix<f64>, part: &DofPartition) -> Result<ReducedOperators> {
    if k.nrows() != part.num_dofs || k.ncols() != part.num_dofs {
        return Err(Error::Dimension(format!(
            "stiffness is {}x{}, partition expects {} DOFs",
            k.nrows(),
            k.ncols(),
            part.num_dofs
        )));
    }
    let t = part.frame_matrix();
    let k_cc = t.transpose() * block(k, &part.contact, &part.contact) * &t;
    let k_cf = t.transpose() * block(k, &part.contact, &part.free);
    let k_cd = t.transpose() * block(k, &part.contact, &part.dirichlet);
    let k_ff = block(k, &part.free, &part.free);
    let k_fd = block(k, &part.free, &part.dirichlet);
    let k_fc = k_cf.transpose();

    let (a_gamma, a_delta) = if part.free.is_empty() {
        (
            DMatrix::zeros(0, part.n_contact()),
            DMatrix::zeros(0, part.n_dirichlet()),
        )
    } else {
        let chol = k_ff.cholesky().ok_or_else(|| {
            Error::Factorization("free-DOF stiffness block is not positive definite".into())
        })?;
        (-chol.solve(&k_fc), -chol.solve(&k_fd))
    };
    let mut a_alpha = &k_cc + &k_cf * &a_gamma;
    // restore exact symmetry lost to rounding
    a_alpha = (&a_alpha + a_alpha.transpose()) * 0.5;
    let a_beta = &k_cd + &k_cf * &a_delta;
    Ok(ReducedOperators {
        a_alpha,
        a_beta,
        a_gamma,
        a_delta,
    })
}

impl ReducedOperators {
    pub fn n_contact(&self) -> usize {
        self.a_alpha.nrows()
    }

    pub fn n_free(&self) -> usize {
        self.a_gamma.nrows()
    }

    pub fn n_dirichlet(&self) -> usize {
        self.a_beta.ncols()
    }

    /// Interior displacement `A_gamma u_C + A_delta w_D`.
    pub fn reconstruct_free(&self, u_c: &[f64], w_d: &[f64]) -> Vec<f64> {
        let uc = nalgebra::DVector::from_column_slice(u_c);
        let wd = nalgebra::DVector::from_column_slice(w_d);
        (&self.a_gamma * uc + &self.a_delta * wd).iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::partition::ContactFrame;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_partition(nc: usize, nf: usize, nd: usize) -> DofPartition {
        // contact frames with normal (0,-1) are the swap (x, y) -> (N, T) = (y, x)
        // use normal (-1, 0) instead so that the frame is the identity
        let frames = vec![ContactFrame { normal: [-1.0, 0.0], tangent: [0.0, 1.0] }; nc / 2];
        DofPartition {
            contact: (0..nc).collect(),
            free: (nc..nc + nf).collect(),
            dirichlet: (nc + nf..nc + nf + nd).collect(),
            frames,
            num_dofs: nc + nf + nd,
        }
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn decoupled_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut k = DMatrix::zeros(6, 6);
        let kcc = random_spd(2, &mut rng);
        let kfd = random_spd(4, &mut rng);
        k.view_mut((0, 0), (2, 2)).copy_from(&kcc);
        k.view_mut((2, 2), (4, 4)).copy_from(&kfd);
        let ops = schur_reduce(&k, &identity_partition(2, 2, 2)).unwrap();
        assert!((&ops.a_alpha - &kcc).norm() < 1e-14);
        assert_eq!(ops.a_gamma.norm(), 0.0);
    }

    #[test]
    fn matches_explicit_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = random_spd(6, &mut rng);
        let ops = schur_reduce(&k, &identity_partition(2, 2, 2)).unwrap();
        let kff_inv = k.view((2, 2), (2, 2)).into_owned().try_inverse().unwrap();
        let kcf = k.view((0, 2), (2, 2)).into_owned();
        let kfc = k.view((2, 0), (2, 2)).into_owned();
        let expected = k.view((0, 0), (2, 2)).into_owned() - &kcf * &kff_inv * &kfc;
        assert!((&ops.a_alpha - &expected).norm() < 1e-12 * expected.norm());
        let kfd = k.view((2, 4), (2, 2)).into_owned();
        let expected_delta = -&kff_inv * &kfd;
        assert!((&ops.a_delta - &expected_delta).norm() < 1e-12 * expected_delta.norm());
    }

    #[test]
    fn reconstruction_zeroes_free_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = random_spd(9, &mut rng);
        let part = identity_partition(4, 3, 2);
        let ops = schur_reduce(&k, &part).unwrap();
        let uc: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let wd: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let uf = ops.reconstruct_free(&uc, &wd);
        let u = DVector::from_vec(part.assemble_full(&uc, &uf, &wd));
        let r = &k * &u;
        let rf: f64 = part.free.iter().map(|&i| r[i] * r[i]).sum::<f64>().sqrt();
        assert!(rf < 1e-12 * (k.norm() * u.norm()));
    }

    #[test]
    fn singular_free_block_fails() {
        let mut k = DMatrix::identity(6, 6);
        k[(2, 2)] = 0.0;
        assert!(matches!(
            schur_reduce(&k, &identity_partition(2, 2, 2)),
            Err(Error::Factorization(_))
        ));
    }
}
