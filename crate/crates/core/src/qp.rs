//! Strictly convex box-constrained quadratic programs
//! `min x'Hx/2 + c'x  s.t.  lo <= x <= hi` by a primal active-set method.
//!
//! Multipliers follow `Hx + c = lambda`: nonnegative on an active lower bound,
//! nonpositive on an active upper bound, zero on free coordinates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct BoxQP {
    pub h: DMatrix<f64>,
    pub c: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Contact subproblem: coordinates listed in `constrained` must be `>= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactQP {
    pub h: DMatrix<f64>,
    pub c: Vec<f64>,
    pub constrained: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activity {
    Inactive,
    Lower,
    Upper,
    /// On the lower bound with a multiplier below the activity threshold.
    BiactiveLower,
    BiactiveUpper,
    /// `lo == hi`.
    Fixed,
}

impl Activity {
    pub fn on_lower(self) -> bool {
        matches!(self, Activity::Lower | Activity::BiactiveLower)
    }

    pub fn on_upper(self) -> bool {
        matches!(self, Activity::Upper | Activity::BiactiveUpper)
    }

    pub fn is_biactive(self) -> bool {
        matches!(self, Activity::BiactiveLower | Activity::BiactiveUpper)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QPSolution {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub activity: Vec<Activity>,
    pub iterations: usize,
    /// Stationarity and sign violation relative to `|c| + 1`.
    pub kkt_residual: f64,
    /// Threshold separating strong from degenerate multipliers.
    pub activity_threshold: f64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Bound {
    Lo,
    Hi,
}

impl BoxQP {
    fn validate(&self) -> Result<()> {
        let n = self.c.len();
        if self.h.nrows() != n || self.h.ncols() != n || self.lo.len() != n || self.hi.len() != n {
            return Err(Error::Dimension(format!(
                "QP with H {}x{}, c {}, lo {}, hi {}",
                self.h.nrows(),
                self.h.ncols(),
                n,
                self.lo.len(),
                self.hi.len()
            )));
        }
        for i in 0..n {
            if self.lo[i].is_nan() || self.hi[i].is_nan() || !self.c[i].is_finite() || self.lo[i] > self.hi[i] {
                return Err(Error::Domain(format!(
                    "coordinate {i}: bounds [{}, {}], c = {}",
                    self.lo[i], self.hi[i], self.c[i]
                )));
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        0.5 * xv.dot(&(&self.h * &xv)) + xv.dot(&DVector::from_column_slice(&self.c))
    }
}

impl ContactQP {
    pub fn to_box(&self) -> BoxQP {
        let n = self.c.len();
        let mut lo = vec![f64::NEG_INFINITY; n];
        for &i in &self.constrained {
            lo[i] = 0.0;
        }
        BoxQP { h: self.h.clone(), c: self.c.clone(), lo, hi: vec![f64::INFINITY; n] }
    }
}

pub fn solve_box_qp(problem: &BoxQP, tol: f64) -> Result<QPSolution> {
    solve_box_qp_warm(problem, tol, None)
}

pub fn solve_contact_qp(problem: &ContactQP, tol: f64) -> Result<QPSolution> {
    solve_box_qp(&problem.to_box(), tol)
}

pub fn solve_contact_qp_warm(problem: &ContactQP, tol: f64, warm: Option<&[Activity]>) -> Result<QPSolution> {
    solve_box_qp_warm(&problem.to_box(), tol, warm)
}

/// Solves with an initial working set taken from a previous activity record.
pub fn solve_box_qp_warm(problem: &BoxQP, tol: f64, warm: Option<&[Activity]>) -> Result<QPSolution> {
    solve_traced(problem, tol, warm, None)
}

pub(crate) fn solve_traced(
    problem: &BoxQP,
    tol: f64,
    warm: Option<&[Activity]>,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<QPSolution> {
    problem.validate()?;
    let n = problem.c.len();
    let (h, c, lo, hi) = (&problem.h, &problem.c, &problem.lo, &problem.hi);
    if h.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    let scale = DVector::from_column_slice(c).norm() + 1.0;
    let drop_tol = tol * scale;
    let bi_tol = 10.0 * tol * scale;

    let mut work: Vec<Option<Bound>> = vec![None; n];
    for i in 0..n {
        if lo[i] == hi[i] {
            work[i] = Some(Bound::Lo);
        } else if let Some(w) = warm.filter(|w| w.len() == n) {
            if w[i].on_lower() && lo[i].is_finite() {
                work[i] = Some(Bound::Lo);
            } else if w[i].on_upper() && hi[i].is_finite() {
                work[i] = Some(Bound::Hi);
            }
        }
    }
    let mut x: Vec<f64> = (0..n)
        .map(|i| match work[i] {
            Some(Bound::Lo) => lo[i],
            Some(Bound::Hi) => hi[i],
            None => 0.0f64.clamp(lo[i], hi[i]),
        })
        .collect();

    let max_iter = 20 * n + 50;
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > max_iter {
            return Err(Error::QpNoConvergence(max_iter));
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(problem.objective(&x));
        }
        let free: Vec<usize> = (0..n).filter(|&i| work[i].is_none()).collect();
        let target = equality_minimizer(h, c, &x, &free)?;

        // ratio test along x -> target
        let mut step = 1.0;
        let mut blocking = None;
        for (k, &i) in free.iter().enumerate() {
            let d = target[k] - x[i];
            if d < 0.0 && lo[i].is_finite() && target[k] < lo[i] {
                let t = ((lo[i] - x[i]) / d).max(0.0);
                if t < step {
                    step = t;
                    blocking = Some((i, Bound::Lo));
                }
            } else if d > 0.0 && hi[i].is_finite() && target[k] > hi[i] {
                let t = ((hi[i] - x[i]) / d).max(0.0);
                if t < step {
                    step = t;
                    blocking = Some((i, Bound::Hi));
                }
            }
        }
        for (k, &i) in free.iter().enumerate() {
            x[i] = if blocking.is_none() { target[k] } else { x[i] + step * (target[k] - x[i]) };
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
        if let Some((i, b)) = blocking {
            x[i] = if b == Bound::Lo { lo[i] } else { hi[i] };
            work[i] = Some(b);
            continue;
        }

        let g = gradient(h, c, &x);
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..n {
            if lo[i] == hi[i] {
                continue;
            }
            let violation = match work[i] {
                Some(Bound::Lo) => -g[i],
                Some(Bound::Hi) => g[i],
                None => continue,
            };
            if violation > drop_tol && worst.is_none_or(|(_, v)| violation > v) {
                worst = Some((i, violation));
            }
        }
        match worst {
            Some((i, _)) => work[i] = None,
            None => break,
        }
    }

    let g = gradient(h, c, &x);
    let mut lambda = vec![0.0; n];
    let mut activity = vec![Activity::Inactive; n];
    let mut kkt: f64 = 0.0;
    for i in 0..n {
        if lo[i] == hi[i] {
            activity[i] = Activity::Fixed;
            lambda[i] = g[i];
            continue;
        }
        match work[i] {
            Some(Bound::Lo) => {
                lambda[i] = g[i];
                kkt = kkt.max((-g[i]).max(0.0) / scale);
                activity[i] = if g[i].abs() <= bi_tol { Activity::BiactiveLower } else { Activity::Lower };
            }
            Some(Bound::Hi) => {
                lambda[i] = g[i];
                kkt = kkt.max(g[i].max(0.0) / scale);
                activity[i] = if g[i].abs() <= bi_tol { Activity::BiactiveUpper } else { Activity::Upper };
            }
            None => {
                kkt = kkt.max(g[i].abs() / scale);
                let hii = h[(i, i)];
                if lo[i].is_finite() && (x[i] - lo[i]) * hii <= bi_tol {
                    x[i] = lo[i];
                    lambda[i] = g[i];
                    activity[i] = Activity::BiactiveLower;
                } else if hi[i].is_finite() && (hi[i] - x[i]) * hii <= bi_tol {
                    x[i] = hi[i];
                    lambda[i] = g[i];
                    activity[i] = Activity::BiactiveUpper;
                }
            }
        }
    }
    Ok(QPSolution { x, lambda, activity, iterations, kkt_residual: kkt, activity_threshold: bi_tol })
}

fn gradient(h: &DMatrix<f64>, c: &[f64], x: &[f64]) -> Vec<f64> {
    let g = h * DVector::from_column_slice(x);
    g.iter().zip(c).map(|(a, b)| a + b).collect()
}

/// Minimizer over the free coordinates with the others held at `x`.
fn equality_minimizer(h: &DMatrix<f64>, c: &[f64], x: &[f64], free: &[usize]) -> Result<Vec<f64>> {
    if free.is_empty() {
        return Ok(Vec::new());
    }
    let n = x.len();
    let nf = free.len();
    let mut is_free = vec![false; n];
    for &i in free {
        is_free[i] = true;
    }
    let hff = DMatrix::from_fn(nf, nf, |a, b| h[(free[a], free[b])]);
    let rhs = DVector::from_fn(nf, |a, _| {
        let i = free[a];
        let mut r = -c[i];
        for j in 0..n {
            if !is_free[j] && x[j] != 0.0 {
                r -= h[(i, j)] * x[j];
            }
        }
        r
    });
    let chol = hff.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Minimizer by enumerating which bound (if any) each coordinate sits on.
    fn brute_force(p: &BoxQP) -> Vec<f64> {
        let n = p.c.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for code in 0..3usize.pow(n as u32) {
            let mut pattern = vec![0u8; n];
            let mut r = code;
            for v in pattern.iter_mut() {
                *v = (r % 3) as u8;
                r /= 3;
            }
            if (0..n).any(|i| (pattern[i] == 1 && !p.lo[i].is_finite()) || (pattern[i] == 2 && !p.hi[i].is_finite())) {
                continue;
            }
            let mut x = vec![0.0; n];
            let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == 0).collect();
            for i in 0..n {
                match pattern[i] {
                    1 => x[i] = p.lo[i],
                    2 => x[i] = p.hi[i],
                    _ => {}
                }
            }
            if !free.is_empty() {
                let hff = DMatrix::from_fn(free.len(), free.len(), |a, b| p.h[(free[a], free[b])]);
                let rhs = DVector::from_fn(free.len(), |a, _| {
                    -p.c[free[a]] - (0..n).filter(|j| pattern[*j] != 0).map(|j| p.h[(free[a], j)] * x[j]).sum::<f64>()
                });
                let sol = hff.lu().solve(&rhs).unwrap();
                for (a, &i) in free.iter().enumerate() {
                    x[i] = sol[a];
                }
            }
            if (0..n).any(|i| x[i] < p.lo[i] - 1e-12 || x[i] > p.hi[i] + 1e-12) {
                continue;
            }
            let f = p.objective(&x);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, x));
            }
        }
        best.unwrap().1
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn pinched_box_returns_zero() {
        let p = BoxQP { h: DMatrix::identity(3, 3), c: vec![5.0, -2.0, 0.0], lo: vec![0.0; 3], hi: vec![0.0; 3] };
        let s = solve_box_qp(&p, DEFAULT_TOL).unwrap();
        assert_eq!(s.x, vec![0.0; 3]);
        assert!(s.activity.iter().all(|a| *a == Activity::Fixed));
        assert_eq!(s.lambda, vec![5.0, -2.0, 0.0]);
    }

    #[test]
    fn separable_clipping() {
        let p = BoxQP { h: DMatrix::identity(2, 2), c: vec![-2.0, 0.5], lo: vec![0.0; 2], hi: vec![1.0; 2] };
        let s = solve_box_qp(&p, DEFAULT_TOL).unwrap();
        assert_eq!(s.x, vec![1.0, 0.0]);
        assert_eq!(s.activity, vec![Activity::Upper, Activity::Lower]);
        assert_eq!(s.lambda, vec![-1.0, 0.5]);
    }

    #[test]
    fn unconstrained_contact() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let s = solve_contact_qp(&ContactQP { h: h.clone(), c: vec![1.0, -1.0], constrained: vec![] }, DEFAULT_TOL).unwrap();
        let expected = h.cholesky().unwrap().solve(&DVector::from_vec(vec![-1.0, 1.0]));
        assert!((DVector::from_vec(s.x) - expected).norm() < 1e-14);
    }

    #[test]
    fn one_dof_active_contact() {
        let s = solve_contact_qp(
            &ContactQP { h: DMatrix::from_element(1, 1, 2.0), c: vec![3.0], constrained: vec![0] },
            DEFAULT_TOL,
        )
        .unwrap();
        assert_eq!(s.x, vec![0.0]);
        assert_eq!(s.lambda, vec![3.0]);
        assert_eq!(s.activity, vec![Activity::Lower]);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let p = BoxQP { h: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]), c: vec![0.0; 2], lo: vec![0.0; 2], hi: vec![1.0; 2] };
        assert!(matches!(solve_box_qp(&p, DEFAULT_TOL), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn inverted_bounds_are_rejected() {
        let p = BoxQP { h: DMatrix::identity(1, 1), c: vec![0.0], lo: vec![1.0], hi: vec![0.0] };
        assert!(matches!(solve_box_qp(&p, DEFAULT_TOL), Err(Error::Domain(_))));
    }

    #[test]
    fn degenerate_multiplier_is_flagged() {
        // minimizer of (x-1)^2/2 sits exactly on the upper bound 1
        let p = BoxQP { h: DMatrix::identity(1, 1), c: vec![-1.0], lo: vec![0.0], hi: vec![1.0] };
        let s = solve_box_qp(&p, DEFAULT_TOL).unwrap();
        assert_eq!(s.x, vec![1.0]);
        assert_eq!(s.activity, vec![Activity::BiactiveUpper]);
    }

    #[test]
    fn random_box_instances_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let n = rng.random_range(1..=6);
            let h = random_spd(n, &mut rng);
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..0.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.0..1.5)).collect();
            let p = BoxQP { h, c, lo, hi };
            let s = solve_box_qp(&p, DEFAULT_TOL).unwrap();
            let b = brute_force(&p);
            for i in 0..n {
                assert!((s.x[i] - b[i]).abs() < 1e-9, "{:?} vs {:?}", s.x, b);
            }
            assert!(s.kkt_residual <= DEFAULT_TOL);
        }
    }

    #[test]
    fn random_contact_instances_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..100 {
            let n = 8;
            let h = random_spd(n, &mut rng);
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let q = ContactQP { h, c, constrained: (0..n).step_by(2).collect() };
            let s = solve_contact_qp(&q, DEFAULT_TOL).unwrap();
            let b = brute_force(&q.to_box());
            for (x, y) in s.x.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9);
            }
            for &i in &q.constrained {
                assert!(s.x[i] >= 0.0 && s.lambda[i] >= -1e-9 && (s.x[i] * s.lambda[i]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn warm_starts_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..50 {
            let n = 7;
            let p = BoxQP {
                h: random_spd(n, &mut rng),
                c: (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
                lo: vec![0.0; n],
                hi: vec![1.0; n],
            };
            let warm: Vec<Activity> = (0..n)
                .map(|_| [Activity::Inactive, Activity::Lower, Activity::Upper][rng.random_range(0..3)])
                .collect();
            let a = solve_box_qp(&p, DEFAULT_TOL).unwrap();
            let b = solve_box_qp_warm(&p, DEFAULT_TOL, Some(&warm)).unwrap();
            for i in 0..n {
                assert!((a.x[i] - b.x[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn objective_decreases_across_iterations() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        for _ in 0..50 {
            let n = 8;
            let p = BoxQP {
                h: random_spd(n, &mut rng),
                c: (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
                lo: vec![-0.5; n],
                hi: vec![0.5; n],
            };
            let mut trace = Vec::new();
            solve_traced(&p, DEFAULT_TOL, None, Some(&mut trace)).unwrap();
            for w in trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()));
            }
        }
    }

    #[test]
    fn scaling_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let n = 6;
        let p = BoxQP {
            h: random_spd(n, &mut rng),
            c: (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
            lo: vec![0.0; n],
            hi: vec![f64::INFINITY; n],
        };
        let t = 1e11;
        let q = BoxQP { h: &p.h * t, c: p.c.iter().map(|v| v * t).collect(), ..p.clone() };
        let (a, b) = (solve_box_qp(&p, DEFAULT_TOL).unwrap(), solve_box_qp(&q, DEFAULT_TOL).unwrap());
        for i in 0..n {
            assert!((a.x[i] - b.x[i]).abs() < 1e-9);
            assert!((a.lambda[i] * t - b.lambda[i]).abs() <= 1e-9 * t);
        }
    }
}
