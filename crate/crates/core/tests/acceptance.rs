//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use delamid::adjoint::{compare_oracles, solve_adjoint, BranchPolicy, OracleComparisonOptions, StateGradients};
use delamid::fem::assemble_stiffness;
use delamid::identify::{gradient_check, random_parameters};
use delamid::io::bundled;
use delamid::qp::{solve_box_qp, solve_contact_qp, BoxQP, ContactQP, DEFAULT_TOL};
use delamid::{
    run_identification, simulate, AdhesiveParams, ExperimentConfig, ForwardModel, LoadingProgram, LoadingSpec,
    Trajectory,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn desk() -> ExperimentConfig {
    bundled("desk").expect("bundled desk configuration")
}

/// Criteria 1 and 2 share one identification run.
fn identification() -> (Outcome, Outcome) {
    let cfg = desk();
    let model = cfg.build_model().unwrap();
    let problem = cfg.build_problem(model, None).unwrap();
    let planted = cfg.planted_params();
    let clock = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let report = pool.install(|| run_identification(&problem, &cfg.bounds, &cfg.plan, cfg.seed)).unwrap();
    let elapsed = clock.elapsed();

    let (j0, jf) = (report.initial_objective.unwrap(), report.final_objective.unwrap());
    let found = report.final_params.as_ref().unwrap();
    let worst = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| ((x - y) / y).abs()).fold(0.0, f64::max);
    let (ea, en, et) = (
        worst(&found.alpha_f, &planted.alpha_f),
        worst(&found.kappa_n, &planted.kappa_n),
        worst(&found.kappa_t, &planted.kappa_t),
    );
    let ratio = jf / j0;
    let c1 = outcome(
        ratio <= 1e-8 && en <= 0.01 && ea <= 0.02 && et <= 0.05 && elapsed <= Duration::from_secs(600),
        format!(
            "J {j0:.3e} -> {jf:.3e} (ratio {ratio:.1e} <= 1e-8); max rel error alpha_F {ea:.1e} (<= 2e-2), kappa_N {en:.1e} (<= 1e-2), kappa_T {et:.1e} (<= 5e-2); {:.1} s single-threaded (<= 600 s)",
            elapsed.as_secs_f64()
        ),
    );

    let ends: Vec<f64> = report.phases.iter().map(|p| p.end_objective).collect();
    let drops: Vec<f64> = ends.windows(2).map(|w| w[0] / w[1]).collect();
    let c2 = outcome(
        ends.len() == 4 && drops.iter().all(|d| *d >= 10.0),
        format!(
            "phase ends {}; drops {} (each >= 10)",
            ends.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(" -> "),
            drops.iter().map(|v| format!("{v:.1e}")).collect::<Vec<_>>().join(", ")
        ),
    );
    (c1, c2)
}

fn gradient_vs_fd() -> Outcome {
    let cfg = desk();
    let problem = cfg.build_problem(cfg.build_model().unwrap(), None).unwrap();
    let clock = Instant::now();
    let (mut accepted, mut skipped, mut seed, mut worst) = (0, 0, 0u64, 0.0f64);
    while accepted < 20 && seed < 200 {
        let p = random_parameters(problem.m(), &cfg.bounds, 1000 + seed);
        seed += 1;
        let check = gradient_check(&problem, &p, cfg.tolerances.fd_step).unwrap();
        if !(check.strictly_complementary && check.stable_activity) {
            skipped += 1;
            continue;
        }
        accepted += 1;
        worst = worst.max(check.max_relative_error());
    }
    let elapsed = clock.elapsed();
    outcome(
        accepted == 20 && worst <= 1e-5 && elapsed <= Duration::from_secs(120),
        format!(
            "{accepted} points ({skipped} skipped: degenerate or active set changes inside the stencil); max coordinate relative error {worst:.2e} (<= 1e-5); {:.1} s (<= 120 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn normal_cone_oracle() -> Outcome {
    let clock = Instant::now();
    let (mut agree, mut decided, mut marginal, mut parts) = (0, 0, 0, Vec::new());
    for k in 1..=3 {
        let r = compare_oracles(&OracleComparisonOptions {
            steps: k,
            base_points: 50,
            queries: 200,
            seed: 17 + k as u64,
            ..Default::default()
        })
        .unwrap();
        agree += r.agreements;
        decided += r.queries - r.marginal;
        marginal += r.marginal;
        parts.push(format!("K={k}: {:.4}", r.agreement_rate()));
    }
    let rate = agree as f64 / decided as f64;
    let elapsed = clock.elapsed();
    outcome(
        rate >= 0.99 && elapsed <= Duration::from_secs(300),
        format!(
            "agreement {rate:.4} (>= 0.99) over {decided} queries, {marginal} marginal excluded [{}]; {:.1} s (<= 300 s)",
            parts.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

fn random_spd<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    a.transpose() * a + DMatrix::identity(n, n) * 0.1
}

fn objective(h: &DMatrix<f64>, c: &[f64], x: &[f64]) -> f64 {
    let xv = DVector::from_column_slice(x);
    0.5 * xv.dot(&(h * &xv)) + xv.dot(&DVector::from_column_slice(c))
}

/// Minimizer over the face where `fixed[j] = Some(value)` pins coordinate `j`.
fn face_minimizer(h: &DMatrix<f64>, c: &[f64], fixed: &[Option<f64>]) -> Vec<f64> {
    let free: Vec<usize> = (0..c.len()).filter(|j| fixed[*j].is_none()).collect();
    let mut x: Vec<f64> = fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
    if free.is_empty() {
        return x;
    }
    let hff = DMatrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
    let rhs = DVector::from_fn(free.len(), |a, _| {
        -c[free[a]] - (0..c.len()).filter_map(|j| fixed[j].map(|v| h[(free[a], j)] * v)).sum::<f64>()
    });
    let sol = hff.cholesky().expect("SPD").solve(&rhs);
    for (a, &j) in free.iter().enumerate() {
        x[j] = sol[a];
    }
    x
}

/// Best feasible face minimizer; `options[j]` lists the pins tried for `j`.
fn brute_force(h: &DMatrix<f64>, c: &[f64], options: &[Vec<Option<f64>>], feasible: impl Fn(&[f64]) -> bool) -> Vec<f64> {
    let n = c.len();
    let total: usize = options.iter().map(Vec::len).product();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..total {
        let mut rest = code;
        let pins: Vec<Option<f64>> = (0..n)
            .map(|j| {
                let o = options[j][rest % options[j].len()];
                rest /= options[j].len();
                o
            })
            .collect();
        let x = face_minimizer(h, c, &pins);
        if feasible(&x) {
            let f = objective(h, c, &x);
            if best.as_ref().is_none_or(|(b, _)| f < *b) {
                best = Some((f, x));
            }
        }
    }
    best.expect("some face is feasible").1
}

fn qp_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for inst in 0..500 {
        let n = rng.random_range(1..=8);
        let h = random_spd(n, &mut rng);
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let x = if inst % 2 == 0 {
            let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..0.5)).collect();
            let hi: Vec<f64> =
                lo.iter().map(|l| if rng.random_bool(0.05) { *l } else { l + rng.random_range(0.1..1.5) }).collect();
            let got = solve_box_qp(&BoxQP { h: h.clone(), c: c.clone(), lo: lo.clone(), hi: hi.clone() }, DEFAULT_TOL).unwrap().x;
            let options: Vec<Vec<Option<f64>>> =
                (0..n).map(|j| if lo[j] == hi[j] { vec![Some(lo[j])] } else { vec![None, Some(lo[j]), Some(hi[j])] }).collect();
            let want = brute_force(&h, &c, &options, |x| (0..n).all(|j| x[j] >= lo[j] - 1e-12 && x[j] <= hi[j] + 1e-12));
            (got, want)
        } else {
            let constrained: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.6)).collect();
            let got = solve_contact_qp(&ContactQP { h: h.clone(), c: c.clone(), constrained: constrained.clone() }, DEFAULT_TOL)
                .unwrap()
                .x;
            let options: Vec<Vec<Option<f64>>> =
                (0..n).map(|j| if constrained.contains(&j) { vec![None, Some(0.0)] } else { vec![None] }).collect();
            let want = brute_force(&h, &c, &options, |x| constrained.iter().all(|&j| x[j] >= -1e-12));
            (got, want)
        };
        let (got, want) = x;
        worst = worst.max(got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    outcome(worst <= 1e-9, format!("500 instances (box and contact, n <= 8); max |x - x_brute| {worst:.2e} (<= 1e-9)"))
}

/// Random loading and parameters on the desk geometry.
struct Draw {
    model: std::sync::Arc<ForwardModel>,
    params: AdhesiveParams,
    loading: LoadingProgram,
    traj: Trajectory,
}

fn invariant_draws(n: usize) -> Vec<Draw> {
    let cfg = desk();
    let model = std::sync::Arc::new(cfg.build_model().unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    (0..n)
        .map(|d| {
            let params = random_parameters(model.m(), &cfg.bounds, 500 + d as u64);
            let angle = rng.random_range(0.0..std::f64::consts::PI);
            let spec = LoadingSpec {
                steps: rng.random_range(3..=20),
                tau: 1.0,
                amplitude: rng.random_range(5e-5..1.5e-3),
                direction: [angle.cos(), angle.sin()],
                jitter: rng.random_range(0.0..0.9),
                seed: rng.random(),
            };
            let loading = spec.build(model.n_dirichlet()).unwrap();
            let traj = simulate(&model, &params, &loading, &vec![1.0; model.m()]).unwrap();
            Draw { model: model.clone(), params, loading, traj }
        })
        .collect()
}

fn forward_invariants(draws: &[Draw]) -> Outcome {
    let cfg = desk();
    let k = assemble_stiffness(&draws[0].model.mesh, &cfg.elasticity());
    let k_norm = k.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let (mut kkt, mut schur, mut min_un, mut problems) = (0.0f64, 0.0f64, f64::INFINITY, Vec::new());
    for (d, draw) in draws.iter().enumerate() {
        if let Err(e) = draw.traj.check_invariants(1e-9) {
            problems.push(format!("draw {d}: {e}"));
        }
        kkt = kkt.max(draw.traj.max_kkt_residual());
        let part = &draw.model.partition;
        for step in 0..=draw.traj.steps() {
            min_un = draw.traj.u[step].iter().step_by(2).fold(min_un, |m, v| m.min(*v));
            let uf = draw.traj.free_displacement(step, &draw.model.ops, &draw.loading);
            let u = DVector::from_vec(part.assemble_full(&draw.traj.u[step], &uf, &draw.loading.w[step]));
            let r = &k * &u;
            let res = part.free.iter().map(|&j| r[j] * r[j]).sum::<f64>().sqrt();
            let scale = k_norm * u.norm();
            if scale > 0.0 {
                schur = schur.max(res / scale);
            }
        }
    }
    outcome(
        problems.is_empty() && kkt <= 1e-9 && schur <= 1e-10 && min_un >= -1e-9,
        format!(
            "{} draws; z monotone in [0,1]: {}; min u_N {min_un:.2e} (>= -1e-9); max KKT residual {kkt:.2e} (<= 1e-9); max Schur residual {schur:.2e} (<= 1e-10 rel){}",
            draws.len(),
            problems.is_empty(),
            problems.first().map(|p| format!("; {p}")).unwrap_or_default()
        ),
    )
}

fn zero_coderivative(draws: &[Draw]) -> Outcome {
    let cfg = desk();
    let (mut nonzero, mut worst_sign, mut bundles) = (0usize, f64::NEG_INFINITY, 0usize);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for draw in draws {
        let zero = StateGradients::zeros(&draw.traj);
        let b = solve_adjoint(&draw.model, &draw.params, &draw.traj, &zero, BranchPolicy::Active).unwrap();
        let all = b.alpha.iter().chain(&b.beta).chain(&b.gamma).chain(&b.delta).chain(&b.mu_tilde).flatten();
        nonzero += all.chain(&b.gradient).filter(|v| **v != 0.0).count();
        let mut grads = StateGradients::zeros(&draw.traj);
        for k in 1..=draw.traj.steps() {
            grads.u_star[k] = grads.u_star[k].iter().map(|_| cfg.objective.zeta * rng.random_range(-1e-4..1e-4)).collect();
            grads.z_star[k] = grads.z_star[k].iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        }
        for policy in [BranchPolicy::Active, BranchPolicy::Inactive] {
            for g in [&zero, &grads] {
                let b = solve_adjoint(&draw.model, &draw.params, &draw.traj, g, policy).unwrap();
                bundles += 1;
                for k in 1..=draw.traj.steps() {
                    let ab: f64 = b.alpha[k].iter().zip(&b.beta[k]).map(|(a, b)| a * b).sum();
                    worst_sign = worst_sign.max(ab);
                }
            }
        }
    }
    outcome(
        nonzero == 0 && worst_sign <= 1e-12,
        format!(
            "{} trajectories: {nonzero} nonzero multiplier entries for zero data (== 0); max alpha^k.beta^k {worst_sign:.2e} over {bundles} bundles (<= 1e-12)",
            draws.len()
        ),
    )
}

fn state_vector(traj: &Trajectory) -> DVector<f64> {
    DVector::from_iterator(
        traj.u.iter().map(Vec::len).sum::<usize>() + traj.z.iter().map(Vec::len).sum::<usize>(),
        traj.u.iter().chain(&traj.z).flatten().copied(),
    )
}

fn lipschitz() -> Outcome {
    let cfg = desk();
    let model = cfg.build_model().unwrap();
    let loading = cfg.build_loading(&model).unwrap();
    let z0 = cfg.z0();
    let bounds = cfg.bounds.for_groups(model.m()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let scales = [1e-3, 1e-4, 1e-5];
    let (mut points, mut seed, mut worst) = (0, 0u64, 1.0f64);
    while points < 20 && seed < 200 {
        let p = random_parameters(model.m(), &cfg.bounds, 2000 + seed);
        seed += 1;
        let traj = simulate(&model, &p, &loading, &z0).unwrap();
        if traj.has_biactive() {
            continue;
        }
        points += 1;
        let base = state_vector(&traj);
        let y = bounds.to_unit(&p.to_flat());
        let dir = DVector::from_fn(y.len(), |_, _| rng.random_range(-1.0..1.0)).normalize();
        let quotients: Vec<f64> = scales
            .iter()
            .map(|s| {
                let shifted: Vec<f64> = y.iter().zip(dir.iter()).map(|(a, d)| (a + s * d).clamp(0.0, 1.0)).collect();
                let q = AdhesiveParams::from_flat(&bounds.from_unit(&shifted)).unwrap();
                let step = DVector::from_vec(shifted.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>()).norm();
                (state_vector(&simulate(&model, &q, &loading, &z0).unwrap()) - &base).norm() / step
            })
            .collect();
        let hi = quotients.iter().cloned().fold(0.0, f64::max);
        let lo = quotients.iter().cloned().fold(f64::INFINITY, f64::min);
        worst = worst.max(if lo > 0.0 { hi / lo } else if hi > 0.0 { f64::INFINITY } else { 1.0 });
    }
    outcome(
        points == 20 && worst <= 10.0,
        format!("{points} regular points, steps {scales:?} in unit coordinates; max spread of difference quotients {worst:.2} (<= 10)"),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let (c1, c2) = identification();
    results.push((1, "planted-parameter recovery", c1));
    results.push((2, "phase pattern", c2));
    results.push((3, "subgradient vs finite differences", gradient_vs_fd()));
    results.push((4, "normal-cone oracle equivalence", normal_cone_oracle()));
    results.push((5, "QP oracle equivalence", qp_oracle()));
    let draws = invariant_draws(100);
    results.push((6, "forward invariants", forward_invariants(&draws)));
    results.push((7, "zero coderivative and sign law", zero_coderivative(&draws)));
    results.push((8, "Lipschitz sanity", lipschitz()));

    let mut failed = 0;
    for (n, name, o) in &results {
        println!("{} criterion {n} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.pass as usize;
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
