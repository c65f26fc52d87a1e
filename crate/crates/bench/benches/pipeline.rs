use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use delamid::fem::{assemble_stiffness, schur_reduce};
use delamid::qp::{solve_box_qp, solve_contact_qp, DEFAULT_TOL};
use delamid::simulate;
use delamid_bench::{fixture, problem};

fn model(c: &mut Criterion) {
    let f = fixture("full");
    let elast = f.cfg.elasticity();
    c.bench_function("assemble_stiffness/full", |b| b.iter(|| assemble_stiffness(black_box(&f.model.mesh), &elast)));
    let k = assemble_stiffness(&f.model.mesh, &elast);
    c.bench_function("schur_reduce/full", |b| b.iter(|| schur_reduce(black_box(&k), &f.model.partition).unwrap()));
}

fn qp(c: &mut Criterion) {
    let f = fixture("full");
    let k = f.traj.steps();
    let contact = f.model.contact_qp(&f.params, &f.traj.z[k - 1], &f.loading.w[k]).unwrap();
    c.bench_function("contact_qp/full", |b| b.iter(|| solve_contact_qp(black_box(&contact), DEFAULT_TOL).unwrap()));
    let zq = f.model.z_qp(&f.params, &f.traj.u[k], &f.traj.z[k - 1]).unwrap();
    c.bench_function("z_qp/full", |b| b.iter(|| solve_box_qp(black_box(&zq), DEFAULT_TOL).unwrap()));
}

fn recursion(c: &mut Criterion) {
    let f = fixture("desk");
    let z0 = f.cfg.z0();
    c.bench_function("simulate/desk", |b| b.iter(|| simulate(&f.model, black_box(&f.params), &f.loading, &z0).unwrap()));
    let p = problem(&f);
    c.bench_function("objective_and_adjoint/desk", |b| b.iter(|| p.evaluate(black_box(&f.params)).unwrap()));
}

criterion_group!(benches, model, qp, recursion);
criterion_main!(benches);
