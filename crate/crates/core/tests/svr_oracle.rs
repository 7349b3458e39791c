mod common;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rrm::kernel::{KernelFamily, KernelSpec};
use rrm::svr::{dual_objective, kkt_report, train_svr, SvrParams};

fn gram(spec: &KernelSpec, x: &Array2<f64>) -> Vec<Vec<f64>> {
    let rows: Vec<Vec<f64>> = x.outer_iter().map(|r| r.to_vec()).collect();
    let family = spec.family.to_string();
    rows.iter()
        .map(|a| {
            rows.iter()
                .map(|b| common::kernel_value(&family, spec.gamma, spec.degree as i32, a, b))
                .collect()
        })
        .collect()
}

#[test]
fn ten_points_gaussian_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x: Array2<f64> = Array2::from_shape_fn((10, 2), |_| rng.random_range(-1.0..1.0));
    let y = Array1::from_shape_fn(10, |i| x[[i, 0]] * 2.0 - x[[i, 1]].powi(2) + rng.random_range(-0.2..0.2));
    let spec = KernelSpec::gaussian(1.0).unwrap();
    let params = SvrParams::new(1.0, 0.1).unwrap().with_tol(1e-10);
    let model = train_svr(x.view(), y.view(), &spec, &params).unwrap();
    let ours = dual_objective(&model, x.view(), y.view()).unwrap();
    let (_, oracle) = common::svr_dual_oracle(&gram(&spec, &x), y.as_slice().unwrap(), 1.0, 0.1, 1_000_000);
    assert!((ours - oracle).abs() <= 1e-6, "smo {ours} vs oracle {oracle}");
    assert!(kkt_report(&model, x.view(), y.view()).max() <= 1e-6);
}

#[test]
fn oracle_solved_tiny_instance_has_small_kkt_residuals() {
    let x = ndarray::array![[0.0], [0.4], [1.0], [1.7], [2.0]];
    let y = ndarray::array![0.2, 0.1, 0.9, 1.1, 2.2];
    let spec = KernelSpec::new(KernelFamily::Laplacian, 1.0, 1).unwrap();
    let (coeffs, _) = common::svr_dual_oracle(&gram(&spec, &x), y.as_slice().unwrap(), 1.0, 0.1, 1_000_000);
    let params = SvrParams::new(1.0, 0.1).unwrap().with_tol(1e-10);
    let model = train_svr(x.view(), y.view(), &spec, &params).unwrap();
    let dense = model.dense_coeffs(5);
    for (a, b) in dense.iter().zip(&coeffs) {
        assert!((a - b).abs() < 1e-6, "{dense:?} vs {coeffs:?}");
    }
    let fitted = model.predict(x.view()).unwrap();
    let r = rrm::svr::kkt_residuals(&coeffs, fitted.view(), y.view(), 1.0, 0.1);
    assert!(r.max() <= 1e-6, "{r:?}");
}
