mod common;

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rrm::bagging::bootstrap_sample;
use rrm::harness::{holdout_split, win_proportions, Metric, Record, ResultsTable};
use rrm::kernel::{KernelFamily, KernelSpec};
use rrm::metrics::agreement;
use rrm::svr::{train_svr, SvrParams};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn svr_solution_is_feasible_and_respects_the_tube(
        seed in any::<u64>(),
        n in 3usize..25,
        kernel in 0usize..4,
        c in prop::sample::select(vec![0.5, 1.0, 10.0]),
        eps in prop::sample::select(vec![0.01, 0.1, 0.5]),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Array2<f64> = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(n, |i| (2.0 * x[[i, 0]]).sin() + x[[i, 1]] + rng.random_range(-0.2..0.2));
        let spec = KernelSpec::new(KernelFamily::ALL[kernel], 1.0, 2).unwrap();
        let tol = 1e-6;
        let m = train_svr(x.view(), y.view(), &spec, &SvrParams::new(c, eps).unwrap().with_tol(tol)).unwrap();
        prop_assert!(m.coeffs.iter().all(|v| v.abs() <= c + 1e-12));
        prop_assert!(m.coeffs.sum().abs() <= tol);
        let fitted = m.predict(x.view()).unwrap();
        let dense = m.dense_coeffs(n);
        for i in 0..n {
            let r = (fitted[i] - y[i]).abs();
            if dense[i].abs() < c - 1e-9 {
                prop_assert!(r <= eps + tol, "row {i}: residual {r}, coeff {}", dense[i]);
            }
            if r < eps - tol {
                prop_assert!(dense[i] == 0.0, "row {i} inside the tube has coeff {}", dense[i]);
            }
        }
    }

    #[test]
    fn bootstrap_partitions_rows(n in 1usize..300, seed in any::<u64>()) {
        let d = bootstrap_sample(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(d.in_bag.len(), n);
        let mut seen = vec![false; n];
        for &i in &d.in_bag {
            seen[i] = true;
        }
        let oob: Vec<usize> = (0..n).filter(|&i| !seen[i]).collect();
        prop_assert_eq!(oob, d.oob);
    }

    #[test]
    fn agreement_is_a_correlation(b in 2usize..6, t in 2usize..15, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Array2::from_shape_fn((b, t), |_| rng.random_range(-3.0..3.0));
        let a = agreement(m.view()).unwrap().value;
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&a));
        let row = m.row(0).to_owned();
        let copies = Array2::from_shape_fn((b, t), |(_, j)| row[j]);
        prop_assert!((agreement(copies.view()).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn holdout_splits_are_disjoint_and_exhaustive(n in 3usize..500, split in 0.05f64..0.95, seed in any::<u64>()) {
        let want = ((split * n as f64).floor() as usize).min(n - 1);
        let res = holdout_split(n, split, seed);
        if want < 2 {
            prop_assert!(res.is_err());
            return Ok(());
        }
        let (tr, te) = res.unwrap();
        prop_assert!(!te.is_empty());
        prop_assert_eq!(tr.len(), want);
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn win_proportions_are_complementary(
        values in proptest::collection::vec(proptest::collection::vec(0u8..4, 3), 1..12),
    ) {
        let mut t = ResultsTable::default();
        for (rep, row) in values.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                t.records.push(Record {
                    dataset: "d".into(),
                    method: format!("m{k}"),
                    repetition: rep,
                    metric: Metric::Rmse,
                    value: v as f64,
                    parameters: String::new(),
                });
            }
        }
        let w = win_proportions(&t).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                prop_assert!((w.values[[a, b]] + w.values[[b, a]] - 1.0).abs() < 1e-12);
            }
        }
    }
}
