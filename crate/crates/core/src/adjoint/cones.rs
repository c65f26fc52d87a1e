//! Normal cones of the closed pieces `cl Q~_i` at points of a piece `Q~_s`.

use std::sync::OnceLock;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use super::pieces::{ConstraintKind, Piece};
use crate::error::{Error, Result};

/// Polyhedral cone in R^3 with both descriptions: generated by `lines`
/// (both signs) and `rays`, equivalently `{x : eqs.x = 0, ineqs.x <= 0}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolyCone {
    pub lines: Vec<[f64; 3]>,
    pub rays: Vec<[f64; 3]>,
    pub eqs: Vec<[f64; 3]>,
    pub ineqs: Vec<[f64; 3]>,
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Clears round-off so that absent couplings are exactly zero.
fn snap(a: [f64; 3]) -> [f64; 3] {
    a.map(|x| if x.abs() < 1e-12 { 0.0 } else { x })
}

impl PolyCone {
    /// Builds the inequality description from linearly independent generators.
    fn from_generators(lines: Vec<[f64; 3]>, rays: Vec<[f64; 3]>) -> Self {
        let gens: Vec<[f64; 3]> = lines.iter().chain(&rays).copied().collect();
        let n = gens.len();
        let g = Matrix3::from_fn(|r, c| if c < n { gens[c][r] } else { 0.0 });
        // with independent generators, x = G c has the unique solution c = G^+ x
        let svd = g.svd(true, true);
        let pinv = svd.pseudo_inverse(1e-12).expect("svd with both factors");
        let mut eqs = Vec::new();
        let u = svd.u.unwrap();
        for (k, sv) in svd.singular_values.iter().enumerate() {
            if *sv <= 1e-12 {
                let col = u.column(k);
                eqs.push(snap([col[0], col[1], col[2]]));
            }
        }
        let ineqs = (lines.len()..n)
            .map(|j| {
                let row = pinv.row(j);
                snap([-row[0], -row[1], -row[2]])
            })
            .collect();
        PolyCone { lines, rays, eqs, ineqs }
    }

    /// Membership with absolute slack `tol` on each defining row.
    pub fn contains(&self, x: [f64; 3], tol: f64) -> bool {
        self.eqs.iter().all(|a| dot(*a, x).abs() <= tol) && self.ineqs.iter().all(|a| dot(*a, x) <= tol)
    }

    pub fn dimension(&self) -> usize {
        self.lines.len() + self.rays.len()
    }

    /// A point of the cone from generator coefficients (rays use `|c|`).
    pub fn combine(&self, coeffs: &[f64]) -> [f64; 3] {
        let mut x = Vector3::zeros();
        for (k, g) in self.lines.iter().chain(&self.rays).enumerate() {
            let c = coeffs.get(k).copied().unwrap_or(0.0);
            let c = if k < self.lines.len() { c } else { c.abs() };
            x += Vector3::from(*g) * c;
        }
        [x[0], x[1], x[2]]
    }
}

fn compute(i: Piece, s: Piece) -> PolyCone {
    let rep = s.representative();
    let mut lines = Vec::new();
    let mut rays = Vec::new();
    for (a, kind) in i.closure() {
        match kind {
            ConstraintKind::Eq => lines.push(*a),
            ConstraintKind::Ineq if dot(*a, rep) == 0.0 => rays.push(*a),
            ConstraintKind::Ineq => {}
        }
    }
    PolyCone::from_generators(lines, rays)
}

fn table() -> &'static Vec<Vec<Option<PolyCone>>> {
    static TABLE: OnceLock<Vec<Vec<Option<PolyCone>>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        Piece::ALL
            .iter()
            .map(|&i| {
                Piece::ALL
                    .iter()
                    .map(|&s| s.adjacent().contains(&i).then(|| compute(i, s)))
                    .collect()
            })
            .collect()
    })
}

/// `N_{cl Q~_i}` at any point of `Q~_s`; requires `i` in `I(s)`.
pub fn piece_normal_cone(i: Piece, s: Piece) -> Result<&'static PolyCone> {
    table()[i.index() as usize - 1][s.index() as usize - 1]
        .as_ref()
        .ok_or(Error::InvalidBranch { i: i.index(), s: s.index() })
}
