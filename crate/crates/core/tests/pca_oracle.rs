//! PCA against a brute-force Jacobi eigendecomposition of the covariance.

mod common;

use common::{covariance, jacobi_eigenvalues};
use mwsn::features::{pca_fit, FeatureMatrix};
use proptest::prelude::*;

fn dataset() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=12, 1usize..=12)
        .prop_flat_map(|(n, d)| prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn explained_variances_match_oracle(rows in dataset()) {
        let (n, d) = (rows.len(), rows[0].len());
        let k = (n - 1).min(d);
        let model = pca_fit(&FeatureMatrix::from_rows(&rows).unwrap(), k).unwrap();
        let oracle = jacobi_eigenvalues(covariance(&rows));
        for (i, (got, want)) in model.explained().iter().zip(&oracle).enumerate() {
            prop_assert!((got - want).abs() <= 1e-8, "component {}: {} vs {}", i, got, want);
        }
        for a in 0..k {
            for b in 0..k {
                let dot: f64 = model.component(a).iter().zip(model.component(b)).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() <= 1e-10, "gram[{}][{}] = {}", a, b, dot);
            }
        }
    }
}

#[test]
fn jacobi_oracle_sanity() {
    let ev = jacobi_eigenvalues(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
    assert!((ev[0] - 3.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
}
