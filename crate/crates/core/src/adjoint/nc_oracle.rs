//! Sampling approximation of the limiting normal cone to the multi-step
//! graph, built directly from its definition: the graph is a finite union
//! of convex polyhedra, the regular (Frechet) normal cone at a point is the
//! intersection of the normal cones of the polyhedra containing it, and the
//! limiting cone is the union of regular cones at nearby graph points.
//!
//! Shares no code with the stratified formula in [`super::gphq`].

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

/// Graph point for one coordinate: `z = (z^0..z^K)`, `v = (v^1..v^K)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphPoint {
    pub z: Vec<f64>,
    pub v: Vec<f64>,
}

impl GraphPoint {
    pub fn steps(&self) -> usize {
        self.v.len()
    }

    /// Exact membership in the graph.
    pub fn on_graph(&self) -> bool {
        (1..=self.steps()).all(|k| {
            let (zt, z, v) = (self.z[k - 1], self.z[k], self.v[k - 1]);
            if zt < 0.0 || z < 0.0 || z > zt {
                return false;
            }
            if zt == 0.0 {
                true
            } else if z == 0.0 {
                v <= 0.0
            } else if z == zt {
                v >= 0.0
            } else {
                v == 0.0
            }
        })
    }
}

/// Convex polyhedral pieces of the one-step graph in `(z~, z, v)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Part {
    /// `z = 0, z~ >= 0, v <= 0`
    Low,
    /// `0 <= z <= z~, v = 0`
    Mid,
    /// `z = z~, z~ >= 0, v >= 0`
    Up,
}

impl Part {
    fn contains(self, zt: f64, z: f64, v: f64) -> bool {
        match self {
            Part::Low => z == 0.0 && zt >= 0.0 && v <= 0.0,
            Part::Mid => z >= 0.0 && z <= zt && v == 0.0,
            Part::Up => z == zt && zt >= 0.0 && v >= 0.0,
        }
    }

    /// `(gradient over (z~, z, v), is_equality, is_active)` for each constraint.
    fn constraints(self, zt: f64, z: f64, v: f64) -> Vec<([f64; 3], bool, bool)> {
        match self {
            Part::Low => vec![
                ([0.0, 1.0, 0.0], true, true),
                ([-1.0, 0.0, 0.0], false, zt == 0.0),
                ([0.0, 0.0, 1.0], false, v == 0.0),
            ],
            Part::Mid => vec![
                ([0.0, -1.0, 0.0], false, z == 0.0),
                ([-1.0, 1.0, 0.0], false, z == zt),
                ([0.0, 0.0, 1.0], true, true),
            ],
            Part::Up => vec![
                ([-1.0, 1.0, 0.0], true, true),
                ([-1.0, 0.0, 0.0], false, zt == 0.0),
                ([0.0, 0.0, -1.0], false, v == 0.0),
            ],
        }
    }
}

/// Generators (columns) of the normal cone of the product polyhedron `parts`
/// at `p`, in the space `(z^1..z^K, v^1..v^K)`; lines appear with both signs.
fn product_cone(p: &GraphPoint, parts: &[Part]) -> DMatrix<f64> {
    let k_steps = p.steps();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for k in 1..=k_steps {
        let (zt, z, v) = (p.z[k - 1], p.z[k], p.v[k - 1]);
        for (g, eq, active) in parts[k - 1].constraints(zt, z, v) {
            if !active {
                continue;
            }
            let mut col = DVector::zeros(2 * k_steps);
            // z^0 is fixed data, so its component is dropped
            if k >= 2 {
                col[k - 2] = g[0];
            }
            col[k - 1] = g[1];
            col[k_steps + k - 1] = g[2];
            if col.iter().all(|c| *c == 0.0) {
                continue;
            }
            if eq {
                cols.push(-&col);
            }
            cols.push(col);
        }
    }
    if cols.is_empty() {
        return DMatrix::zeros(2 * k_steps, 0);
    }
    DMatrix::from_columns(&cols)
}

/// Regular normal cone at a graph point, as the list of cones to intersect.
#[derive(Clone, Debug)]
pub struct FrechetCone {
    pub generators: Vec<DMatrix<f64>>,
}

impl FrechetCone {
    pub fn at(p: &GraphPoint) -> Self {
        let k_steps = p.steps();
        let options: Vec<Vec<Part>> = (1..=k_steps)
            .map(|k| {
                [Part::Low, Part::Mid, Part::Up]
                    .into_iter()
                    .filter(|part| part.contains(p.z[k - 1], p.z[k], p.v[k - 1]))
                    .collect()
            })
            .collect();
        let mut generators = Vec::new();
        let mut combo = vec![0usize; k_steps];
        loop {
            let parts: Vec<Part> = (0..k_steps).map(|k| options[k][combo[k]]).collect();
            generators.push(product_cone(p, &parts));
            let mut k = 0;
            while k < k_steps {
                combo[k] += 1;
                if combo[k] < options[k].len() {
                    break;
                }
                combo[k] = 0;
                k += 1;
            }
            if k == k_steps {
                break;
            }
        }
        Self { generators }
    }

    /// Largest distance from `w` to any of the intersected cones.
    pub fn residual(&self, w: &DVector<f64>) -> f64 {
        self.generators.iter().map(|g| nnls_residual(g, w)).fold(0.0, f64::max)
    }
}

/// `min |G x - w|` over `x >= 0` (Lawson-Hanson active set).
pub fn nnls_residual(g: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    let x = nnls(g, w);
    (g * x - w).norm()
}

pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    if n == 0 {
        return x;
    }
    let mut passive = vec![false; n];
    let tol = 1e-13 * (1.0 + a.norm() * b.norm());
    for _ in 0..(3 * n + 10) {
        let wgrad = a.transpose() * (b - a * &x);
        let cand = (0..n).filter(|&j| !passive[j] && wgrad[j] > tol).max_by(|&i, &j| wgrad[i].total_cmp(&wgrad[j]));
        let Some(j) = cand else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let ap = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
            let sol = ap.clone().svd(true, true).solve(b, 1e-12).unwrap_or_else(|_| DVector::zeros(idx.len()));
            let mut z = DVector::zeros(n);
            for (c, &j) in idx.iter().enumerate() {
                z[j] = sol[c];
            }
            if idx.iter().all(|&j| z[j] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = 1.0f64;
            for &j in &idx {
                if z[j] <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - z[j]));
                }
            }
            for j in 0..n {
                x[j] += alpha * (z[j] - x[j]);
                if passive[j] && x[j] <= 1e-15 {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
        }
    }
    x
}

/// Graph points near `p`: per step, `z` is pushed up, pushed down, or
/// snapped to `0` or `z~`, and `v` is snapped to `0` or pushed to a sign.
pub fn nearby_points<R: Rng>(p: &GraphPoint, rho: f64, extra: usize, rng: &mut R) -> Vec<GraphPoint> {
    let k_steps = p.steps();
    let modes = 12usize.pow(k_steps as u32);
    let mut out = vec![p.clone()];
    for code in 0..modes + extra {
        let mut c = if code < modes { code } else { rng.random_range(0..modes) };
        let mut q = GraphPoint { z: vec![p.z[0]], v: Vec::with_capacity(k_steps) };
        for k in 1..=k_steps {
            let (zmode, vmode) = (c % 4, (c / 4) % 3);
            c /= 12;
            let zt = q.z[k - 1];
            let z = match zmode {
                0 => (p.z[k] + rho * rng.random_range(0.1..1.0)).clamp(0.0, zt),
                1 => (p.z[k] - rho * rng.random_range(0.1..1.0)).clamp(0.0, zt),
                2 => 0.0,
                _ => zt,
            };
            let base = p.v[k - 1];
            let v = match vmode {
                0 => 0.0,
                1 => base.max(0.0) + rho * rng.random_range(0.1..1.0),
                _ => base.min(0.0) - rho * rng.random_range(0.1..1.0),
            };
            q.z.push(z);
            q.v.push(v);
        }
        let close = q.z.iter().zip(&p.z).chain(q.v.iter().zip(&p.v)).all(|(a, b)| (a - b).abs() <= 3.0 * rho);
        if close && q.on_graph() {
            out.push(q);
        }
    }
    out
}

/// Sign pattern determining the regular normal cone at a graph point.
fn signature(p: &GraphPoint) -> Vec<u8> {
    (1..=p.steps())
        .map(|k| {
            let (zt, z, v) = (p.z[k - 1], p.z[k], p.v[k - 1]);
            (zt == 0.0) as u8
                | ((z == 0.0) as u8) << 1
                | ((z == zt) as u8) << 2
                | ((v == 0.0) as u8) << 3
                | ((v > 0.0) as u8) << 4
        })
        .collect()
}

/// Approximate limiting normal cone: the distinct regular cones found near `p`.
#[derive(Clone, Debug)]
pub struct SampledLimitingCone {
    pub cones: Vec<FrechetCone>,
}

impl SampledLimitingCone {
    pub fn build<R: Rng>(p: &GraphPoint, rho: f64, extra: usize, rng: &mut R) -> Self {
        let mut seen = BTreeSet::new();
        let mut cones = Vec::new();
        for q in nearby_points(p, rho, extra, rng) {
            if seen.insert(signature(&q)) {
                cones.push(FrechetCone::at(&q));
            }
        }
        Self { cones }
    }

    /// Smallest distance-type residual of `(gamma, delta)` over the sampled cones.
    pub fn residual(&self, gamma: &[f64], delta: &[f64]) -> f64 {
        let w = DVector::from_iterator(gamma.len() + delta.len(), gamma.iter().chain(delta).copied());
        self.cones.iter().map(|c| c.residual(&w)).fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, gamma: &[f64], delta: &[f64], tol: f64) -> bool {
        let scale = 1.0 + gamma.iter().chain(delta).map(|x| x * x).sum::<f64>().sqrt();
        self.residual(gamma, delta) <= tol * scale
    }
}

/// Random graph point for `k_steps` steps: each step lies on a randomly
/// chosen face of the one-step graph with values bounded away from the
/// other faces.
pub fn random_graph_point<R: Rng>(k_steps: usize, rng: &mut R) -> GraphPoint {
    let z0 = if rng.random_bool(0.85) { rng.random_range(0.3..1.0) } else { 0.0 };
    let mut p = GraphPoint { z: vec![z0], v: Vec::new() };
    for _ in 0..k_steps {
        let zt = *p.z.last().unwrap();
        let (z, v) = if zt == 0.0 {
            match rng.random_range(0..3) {
                0 => (0.0, -rng.random_range(0.2..1.0)),
                1 => (0.0, 0.0),
                _ => (0.0, rng.random_range(0.2..1.0)),
            }
        } else {
            match rng.random_range(0..5) {
                0 => (zt, rng.random_range(0.2..1.0)),
                1 => (zt, 0.0),
                2 => (zt * rng.random_range(0.3..0.7), 0.0),
                3 => (0.0, 0.0),
                _ => (0.0, -rng.random_range(0.2..1.0)),
            }
        };
        p.z.push(z);
        p.v.push(v);
    }
    p
}
