//! The eight relatively open pieces of the graph of `z~ -> N_[0, z~]` in
//! coordinates `(z~, z, v)` and their admissible transitions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qp::Activity;

/// Index of a piece `Q~_1 .. Q~_8`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Piece(u8);

impl TryFrom<u8> for Piece {
    type Error = Error;
    fn try_from(i: u8) -> Result<Self> {
        Piece::new(i)
    }
}

impl From<Piece> for u8 {
    fn from(p: Piece) -> u8 {
        p.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    /// `a . x = 0`
    Eq,
    /// `a . x <= 0`
    Ineq,
}

/// Linear constraints describing `cl Q~_i`.
const CLOSURES: [&[([f64; 3], ConstraintKind)]; 8] = {
    use ConstraintKind::{Eq, Ineq};
    [
        &[([-1.0, 1.0, 0.0], Eq), ([-1.0, 0.0, 0.0], Ineq), ([0.0, 0.0, -1.0], Ineq)],
        &[([-1.0, 1.0, 0.0], Eq), ([-1.0, 0.0, 0.0], Ineq), ([0.0, 0.0, 1.0], Eq)],
        &[([0.0, -1.0, 0.0], Ineq), ([-1.0, 1.0, 0.0], Ineq), ([0.0, 0.0, 1.0], Eq)],
        &[([0.0, 1.0, 0.0], Eq), ([0.0, 0.0, 1.0], Eq), ([-1.0, 0.0, 0.0], Ineq)],
        &[([0.0, 1.0, 0.0], Eq), ([-1.0, 0.0, 0.0], Ineq), ([0.0, 0.0, 1.0], Ineq)],
        &[([1.0, 0.0, 0.0], Eq), ([0.0, 1.0, 0.0], Eq), ([0.0, 0.0, 1.0], Ineq)],
        &[([1.0, 0.0, 0.0], Eq), ([0.0, 1.0, 0.0], Eq), ([0.0, 0.0, 1.0], Eq)],
        &[([1.0, 0.0, 0.0], Eq), ([0.0, 1.0, 0.0], Eq), ([0.0, 0.0, -1.0], Ineq)],
    ]
};

/// A point in the relative interior of each piece.
const REPRESENTATIVES: [[f64; 3]; 8] = [
    [1.0, 1.0, 1.0],
    [1.0, 1.0, 0.0],
    [1.0, 0.5, 0.0],
    [1.0, 0.0, 0.0],
    [1.0, 0.0, -1.0],
    [0.0, 0.0, -1.0],
    [0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0],
];

impl Piece {
    pub const ALL: [Piece; 8] = [Piece(1), Piece(2), Piece(3), Piece(4), Piece(5), Piece(6), Piece(7), Piece(8)];
    /// Pieces of full relative dimension in their neighborhood of the graph.
    pub const REGULAR: [Piece; 5] = [Piece(1), Piece(3), Piece(5), Piece(6), Piece(8)];

    pub fn new(i: u8) -> Result<Self> {
        if (1..=8).contains(&i) {
            Ok(Piece(i))
        } else {
            Err(Error::Domain(format!("piece index {i} outside 1..=8")))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn closure(self) -> &'static [([f64; 3], ConstraintKind)] {
        CLOSURES[self.0 as usize - 1]
    }

    pub fn representative(self) -> [f64; 3] {
        REPRESENTATIVES[self.0 as usize - 1]
    }

    /// Whether `z > 0` on this piece, i.e. the adhesive is not yet fully broken.
    pub fn bonded(self) -> bool {
        self.0 <= 3
    }

    pub fn is_regular(self) -> bool {
        matches!(self.0, 1 | 3 | 5 | 6 | 8)
    }

    /// `true` if `x` satisfies the constraints of `cl Q~_i` exactly.
    pub fn closure_contains(self, x: [f64; 3]) -> bool {
        self.closure().iter().all(|(a, kind)| {
            let r = a[0] * x[0] + a[1] * x[1] + a[2] * x[2];
            match kind {
                ConstraintKind::Eq => r == 0.0,
                ConstraintKind::Ineq => r <= 0.0,
            }
        })
    }

    /// `I(s)`: pieces whose closure contains the piece `s`.
    pub fn adjacent(self) -> Vec<Piece> {
        let rep = self.representative();
        Piece::ALL.into_iter().filter(|i| i.closure_contains(rep)).collect()
    }

    /// Pieces allowed at the next step.
    pub fn successors(self) -> &'static [Piece] {
        successors_of(self.bonded())
    }

    /// Delamination-QP activity record to piece; `lambda = B z + b = -v`.
    pub fn from_activity(activity: Activity, lambda: f64, threshold: f64) -> Piece {
        Piece(match activity {
            Activity::Inactive => 3,
            Activity::Upper => 1,
            Activity::BiactiveUpper => 2,
            Activity::Lower => 5,
            Activity::BiactiveLower => 4,
            Activity::Fixed if lambda > threshold => 6,
            Activity::Fixed if lambda < -threshold => 8,
            Activity::Fixed => 7,
        })
    }
}

impl std::fmt::Display for Piece {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Allowed pieces after a step whose `z` is positive (`bonded`) or zero.
pub fn successors_of(bonded: bool) -> &'static [Piece] {
    const B: [Piece; 5] = [Piece(1), Piece(2), Piece(3), Piece(4), Piece(5)];
    const D: [Piece; 3] = [Piece(6), Piece(7), Piece(8)];
    if bonded {
        &B
    } else {
        &D
    }
}

/// Whether a word of pieces respects the transition rule, starting from
/// the initial delamination value `z0`.
pub fn word_is_admissible(z0: f64, word: &[Piece]) -> bool {
    let mut bonded = z0 > 0.0;
    for p in word {
        if !successors_of(bonded).contains(p) {
            return false;
        }
        bonded = p.bonded();
    }
    true
}

/// Piece of `(z_prev, z, v)`; values within `tol` of a stratum boundary are
/// snapped onto it.
pub fn classify_piece(z_prev: f64, z: f64, v: f64, tol: f64) -> Result<Piece> {
    let off = || Error::Classification { z_prev, z, v };
    if z_prev < -tol || z < -tol || z > z_prev + tol {
        return Err(off());
    }
    let zt0 = z_prev.abs() <= tol;
    let z0 = z.abs() <= tol;
    let zeq = (z - z_prev).abs() <= tol;
    let v0 = v.abs() <= tol;
    let i = if zt0 {
        match (v0, v < 0.0) {
            (true, _) => 7,
            (false, true) => 6,
            (false, false) => 8,
        }
    } else if z0 {
        match (v0, v < 0.0) {
            (true, _) => 4,
            (false, true) => 5,
            (false, false) => return Err(off()),
        }
    } else if zeq {
        match (v0, v > 0.0) {
            (true, _) => 2,
            (false, true) => 1,
            (false, false) => return Err(off()),
        }
    } else if v0 {
        3
    } else {
        return Err(off());
    };
    Ok(Piece(i))
}
