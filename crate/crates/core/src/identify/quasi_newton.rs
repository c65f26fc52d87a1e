//! Projected BFGS for nonsmooth objectives on `[0, 1]^n`: weak Wolfe line
//! search along the projected path, with gradient sampling when
//! subgradients disagree or the line search breaks down.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::global::StopReason;
use super::objective::{Evaluation, Objective};
use crate::adjoint::nc_oracle::nnls;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuasiNewtonOptions {
    pub max_iter: usize,
    /// Stop when the projected gradient norm falls to this.
    pub grad_tol: f64,
    /// Stop once the value is at or below this.
    pub threshold: Option<f64>,
    pub max_backtracks: usize,
    pub armijo: f64,
    pub wolfe: f64,
    /// Initial radius of the gradient-sampling ball.
    pub sampling_radius: f64,
    /// Steps shorter than this count toward subgradient disagreement.
    pub trust_radius: f64,
    /// Consecutive iterations with relative decrease below `1e-15` before stopping.
    pub stagnation: usize,
}

impl Default for QuasiNewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-8,
            threshold: None,
            max_backtracks: 60,
            armijo: 1e-4,
            wolfe: 0.9,
            sampling_radius: 1e-4,
            trust_radius: 1e-2,
            stagnation: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiNewtonResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub sampling_steps: usize,
    pub stop: StopReason,
    /// Value after each accepted iterate (starting point first).
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn project(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Gradient with components removed where a bound blocks descent.
pub fn projected_gradient(x: &[f64], g: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .map(|(x, g)| if (*x <= 0.0 && *g > 0.0) || (*x >= 1.0 && *g < 0.0) { 0.0 } else { *g })
        .collect()
}

struct Counter<'a> {
    obj: &'a dyn Objective,
    evaluations: usize,
}

impl Counter<'_> {
    fn eval(&mut self, x: &[f64]) -> Option<Evaluation> {
        self.evaluations += 1;
        match self.obj.evaluate(x) {
            Ok(e) if e.value.is_finite() => Some(e),
            Ok(_) => None,
            Err(e) => {
                log::warn!("objective evaluation failed: {e}");
                None
            }
        }
    }
}

fn weak_wolfe(
    c: &mut Counter,
    opts: &QuasiNewtonOptions,
    x: &[f64],
    cur: &Evaluation,
    d: &[f64],
) -> Option<(Vec<f64>, Evaluation)> {
    let (mut lo, mut hi, mut t) = (0.0, f64::INFINITY, 1.0);
    let mut armijo_point: Option<(Vec<f64>, Evaluation)> = None;
    for _ in 0..opts.max_backtracks {
        let mut xt: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
        project(&mut xt);
        let s: Vec<f64> = xt.iter().zip(x).map(|(a, b)| a - b).collect();
        let clipped = xt.iter().zip(x).zip(d).any(|((a, b), d)| (a - b - t * d).abs() > 0.0);
        let dec = dot(&cur.gradient, &s);
        if norm(&s) == 0.0 {
            return armijo_point;
        }
        match c.eval(&xt) {
            Some(e) if dec < 0.0 && e.value <= cur.value + opts.armijo * dec => {
                if !clipped && dot(&e.gradient, &s) < opts.wolfe * dec {
                    lo = t;
                    armijo_point = Some((xt, e));
                } else {
                    return Some((xt, e));
                }
            }
            _ => hi = t,
        }
        t = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * t };
    }
    armijo_point
}

/// Smallest-norm element of the convex hull of the columns of `g`.
pub fn min_norm_hull(g: &DMatrix<f64>) -> DVector<f64> {
    let n = g.ncols();
    let rho = 1e3 * (1.0 + g.amax());
    let mut a = DMatrix::zeros(g.nrows() + 1, n);
    a.view_mut((0, 0), (g.nrows(), n)).copy_from(g);
    a.row_mut(g.nrows()).fill(rho);
    let mut b = DVector::zeros(g.nrows() + 1);
    b[g.nrows()] = rho;
    let lam = nnls(&a, &b);
    let sum = lam.sum();
    if sum <= 0.0 {
        return g.column(0).into_owned();
    }
    g * (lam / sum)
}

fn sampling_step(
    c: &mut Counter,
    opts: &QuasiNewtonOptions,
    rng: &mut ChaCha8Rng,
    x: &[f64],
    cur: &Evaluation,
) -> Option<(Vec<f64>, Evaluation)> {
    let n = x.len();
    let mut radius = opts.sampling_radius;
    while radius > 1e-12 {
        let mut cols = vec![projected_gradient(x, &cur.gradient)];
        for _ in 0..=n {
            let mut p: Vec<f64> = x.iter().map(|v| v + radius * (2.0 * rng.random::<f64>() - 1.0)).collect();
            project(&mut p);
            if let Some(e) = c.eval(&p) {
                cols.push(projected_gradient(x, &e.gradient));
            }
        }
        let g = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
        let gmin = min_norm_hull(&g);
        let gn = gmin.norm();
        if gn <= opts.grad_tol {
            radius *= 0.1;
            continue;
        }
        let mut t = 1.0;
        for _ in 0..opts.max_backtracks {
            let mut xt: Vec<f64> = x.iter().zip(gmin.iter()).map(|(a, b)| a - t * b).collect();
            project(&mut xt);
            let s: Vec<f64> = xt.iter().zip(x).map(|(a, b)| a - b).collect();
            if norm(&s) == 0.0 {
                break;
            }
            if let Some(e) = c.eval(&xt) {
                if e.value <= cur.value - opts.armijo * dot(&s, &s) / t {
                    return Some((xt, e));
                }
            }
            t *= 0.5;
        }
        radius *= 0.1;
    }
    None
}

pub fn phase_quasi_newton(obj: &dyn Objective, x0: &[f64], opts: &QuasiNewtonOptions, seed: u64) -> Result<QuasiNewtonResult> {
    let n = obj.dim();
    if x0.len() != n {
        return Err(Error::Dimension(format!("start point has {} entries, objective {}", x0.len(), n)));
    }
    let mut c = Counter { obj, evaluations: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = x0.to_vec();
    project(&mut x);
    let mut cur = obj.evaluate(&x)?;
    c.evaluations += 1;
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;
    let mut history = vec![cur.value];
    let (mut disagreements, mut stale, mut sampling_steps) = (0usize, 0usize, 0usize);
    let mut iterations = 0;

    let stop = loop {
        let pg = projected_gradient(&x, &cur.gradient);
        if opts.threshold.is_some_and(|t| cur.value <= t) {
            break StopReason::Threshold;
        }
        if norm(&pg) <= opts.grad_tol {
            break StopReason::Converged;
        }
        if iterations >= opts.max_iter {
            break StopReason::Budget;
        }
        if stale >= opts.stagnation {
            break StopReason::Stagnation;
        }
        iterations += 1;

        let free: Vec<usize> = (0..n).filter(|&i| pg[i] != 0.0 || (x[i] > 0.0 && x[i] < 1.0)).collect();
        let mut d = vec![0.0; n];
        for &i in &free {
            d[i] = -free.iter().map(|&j| h[(i, j)] * cur.gradient[j]).sum::<f64>();
        }
        if dot(&d, &cur.gradient) >= -1e-14 * norm(&d) * norm(&cur.gradient) {
            h = DMatrix::identity(n, n);
            scaled = false;
            d = pg.iter().map(|g| -g).collect();
        }

        let mut step = None;
        if disagreements < 2 {
            step = weak_wolfe(&mut c, opts, &x, &cur, &d);
        }
        if step.is_none() {
            sampling_steps += 1;
            disagreements = 0;
            step = sampling_step(&mut c, opts, &mut rng, &x, &cur);
        }
        let Some((xn, en)) = step else {
            log::warn!("line search failed at value {:.6e}; returning current iterate", cur.value);
            break StopReason::LineSearchFailure;
        };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = en.gradient.iter().zip(&cur.gradient).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if !scaled {
                h = DMatrix::identity(n, n) * (sy / dot(&y, &y));
                scaled = true;
            }
            let sv = DVector::from_vec(s.clone());
            let yv = DVector::from_vec(y);
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            h += (&sv * sv.transpose()) * (rho * rho * yhy + rho) - (&hy * sv.transpose() + &sv * hy.transpose()) * rho;
        }
        let short = norm(&s) <= opts.trust_radius;
        if short && (en.nonsmooth || dot(&en.gradient, &cur.gradient) < 0.0) {
            disagreements += 1;
        } else {
            disagreements = 0;
        }
        if cur.value - en.value <= 1e-15 * cur.value.abs() {
            stale += 1;
        } else {
            stale = 0;
        }
        x = xn;
        cur = en;
        history.push(cur.value);
    };
    let grad_norm = norm(&projected_gradient(&x, &cur.gradient));
    Ok(QuasiNewtonResult {
        x,
        value: cur.value,
        grad_norm,
        evaluations: c.evaluations,
        iterations,
        sampling_steps,
        stop,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identify::global::tests::Quadratic;

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, x: &[f64]) -> Result<f64> {
            let (a, b) = (2.0 * x[0] - 1.0, 2.0 * x[1] - 1.0);
            Ok((1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2))
        }
        fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
            let (a, b) = (2.0 * x[0] - 1.0, 2.0 * x[1] - 1.0);
            let ga = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            let gb = 200.0 * (b - a * a);
            Ok(Evaluation { value: self.value(x)?, gradient: vec![2.0 * ga, 2.0 * gb], nonsmooth: false })
        }
    }

    /// `|x0 - 0.3| + 2 |x1 - 0.6|`.
    struct Kink;

    impl Objective for Kink {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, x: &[f64]) -> Result<f64> {
            Ok((x[0] - 0.3).abs() + 2.0 * (x[1] - 0.6).abs())
        }
        fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
            let gradient = vec![(x[0] - 0.3).signum(), 2.0 * (x[1] - 0.6).signum()];
            Ok(Evaluation { value: self.value(x)?, gradient, nonsmooth: false })
        }
    }

    #[test]
    fn smooth_convex_converges() {
        let q = Quadratic { center: vec![0.3, 0.5, 0.72, 0.1], weights: vec![1.0, 50.0, 0.5, 3.0] };
        let r = phase_quasi_newton(&q, &[0.9, 0.1, 0.2, 0.8], &QuasiNewtonOptions::default(), 0).unwrap();
        assert!(r.grad_norm <= 1e-8, "{r:?}");
        assert!(r.iterations <= 100);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn bound_minimizer_is_reached() {
        let q = Quadratic { center: vec![1.4, -0.2], weights: vec![1.0, 2.0] };
        let r = phase_quasi_newton(&q, &[0.5, 0.5], &QuasiNewtonOptions::default(), 0).unwrap();
        assert_eq!(r.x, vec![1.0, 0.0]);
        assert_eq!(r.stop, StopReason::Converged);
    }

    #[test]
    fn start_at_minimizer_stops_immediately() {
        let q = Quadratic { center: vec![0.3, 0.5], weights: vec![1.0, 1.0] };
        let r = phase_quasi_newton(&q, &[0.3, 0.5], &QuasiNewtonOptions::default(), 0).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.evaluations, 1);
    }

    #[test]
    fn rosenbrock_valley() {
        let r = phase_quasi_newton(&Rosenbrock, &[0.1, 0.9], &QuasiNewtonOptions::default(), 0).unwrap();
        assert!(r.value <= 1e-14, "{r:?}");
    }

    #[test]
    fn kink_needs_sampling() {
        let opts = QuasiNewtonOptions { grad_tol: 1e-10, ..Default::default() };
        let r = phase_quasi_newton(&Kink, &[0.9, 0.1], &opts, 3).unwrap();
        assert!(r.value <= 1e-5, "{r:?}");
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn min_norm_hull_of_opposite_vectors() {
        let g = DMatrix::from_column_slice(2, 3, &[1.0, 1.0, -1.0, 1.0, 0.0, 3.0]);
        let m = min_norm_hull(&g);
        assert!((m[0]).abs() < 1e-8 && (m[1] - 1.0).abs() < 1e-8, "{m}");
    }
}
