use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use delamid::adhesive::lumped_measure;
use delamid::fem::{assemble_stiffness, build_structured_mesh};
use delamid::forward::{elastic_energy, full_displacement};
use delamid::io::{bundled, parse_config};
use delamid::{simulate, ExperimentConfig};

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1e-3..1e-3)).collect()
}

#[test]
fn condensed_energy_matches_full_energy() {
    let cfg = bundled("desk").unwrap();
    let model = cfg.build_model().unwrap();
    let k = assemble_stiffness(&model.mesh, &cfg.elasticity());
    let part = &model.partition;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let uc = random_vec(part.n_contact(), &mut rng);
        let w = vec![0.0; part.n_dirichlet()];
        let uf = model.ops.reconstruct_free(&uc, &w);
        let full = part.assemble_full(&uc, &uf, &w);
        let ucv = DVector::from_vec(uc.clone());
        let condensed = 0.5 * ucv.dot(&(&model.ops.a_alpha * &ucv));
        let e = elastic_energy(&k, &full);
        assert!((e - condensed).abs() <= 1e-10 * e, "{e} vs {condensed}");

        // any other interior field costs more energy
        let w = random_vec(part.n_dirichlet(), &mut rng);
        let uf = model.ops.reconstruct_free(&uc, &w);
        let base = elastic_energy(&k, &part.assemble_full(&uc, &uf, &w));
        let bumped: Vec<f64> = uf.iter().zip(random_vec(uf.len(), &mut rng)).map(|(a, b)| a + 1e-3 * b).collect();
        assert!(elastic_energy(&k, &part.assemble_full(&uc, &bumped, &w)) > base);
    }
}

#[test]
fn large_mesh_condensed_stiffness_is_positive_definite() {
    let cfg = bundled("full").unwrap();
    let model = cfg.build_model().unwrap();
    let a = &model.ops.a_alpha;
    assert_eq!(a.nrows(), 2 * cfg.mesh.contact_nodes);
    assert_eq!(a, &a.transpose());
    let eig = SymmetricEigen::new(a.clone()).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    assert!(lo > 0.0 && lo / hi > 1e-12, "eigenvalues in [{lo}, {hi}]");
}

#[test]
fn refinement_preserves_geometry() {
    let geom = bundled("desk").unwrap().geometry();
    for (nx, ny) in [(8, 5), (12, 7), (16, 9)] {
        let mesh = build_structured_mesh(nx, ny, &geom).unwrap();
        assert!((mesh.total_area() - geom.width * geom.height).abs() <= 1e-14);
        let s: f64 = lumped_measure(&mesh).iter().sum();
        assert!(s > 0.0 && s <= geom.width * (1.0 + 1e-14));
        let k = assemble_stiffness(&mesh, &bundled("desk").unwrap().elasticity());
        // rigid translations carry no energy
        let t: Vec<f64> = (0..mesh.num_dofs()).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let r = &k * DVector::from_vec(t);
        assert!(r.amax() <= 1e-6 * k.amax());
    }
}

#[test]
fn refined_contact_response_converges() {
    // the stored elastic energy after the first load step settles under refinement
    let mut cfg = bundled("desk").unwrap();
    let mut energies = Vec::new();
    for (nx, ny) in [(6, 4), (12, 7), (24, 13)] {
        cfg.mesh.nx = nx;
        cfg.mesh.ny = ny;
        cfg.mesh.contact_nodes = nx / 2;
        let model = cfg.build_model().unwrap();
        let loading = cfg.build_loading(&model).unwrap();
        let traj = simulate(&model, &cfg.planted_params(), &loading, &cfg.z0()).unwrap();
        let full = full_displacement(&model, &traj, &loading, 1);
        energies.push(elastic_energy(&assemble_stiffness(&model.mesh, &cfg.elasticity()), &full));
    }
    let d1 = (energies[1] - energies[0]).abs();
    let d2 = (energies[2] - energies[1]).abs();
    assert!(energies.iter().all(|v| v.is_finite() && *v > 0.0));
    assert!(d2 < d1, "{energies:?}");
}

#[test]
fn configs_round_trip_through_json() {
    for name in ["desk", "full"] {
        let cfg: ExperimentConfig = bundled(name).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}

#[test]
fn stiffness_is_symmetric() {
    let cfg = bundled("desk").unwrap();
    let model = cfg.build_model().unwrap();
    let k: DMatrix<f64> = assemble_stiffness(&model.mesh, &cfg.elasticity());
    assert!((&k - k.transpose()).amax() <= 1e-12 * k.amax());
}
