use bezier_dp::bernstein::{
    bernstein_eval, bezier_inverse, tensor_apply_inverse, BernsteinDegree, MultiIndex,
};
use bezier_dp::mechanisms::bernstein_aggregates;
use bezier_dp::statistics::{mixed_moments_unnormalized, Dataset};
use proptest::prelude::*;

/// Explicit Kronecker power of the f64 inverse, applied as a dense matrix.
fn kronecker_apply(k: BernsteinDegree, d: usize, b: &[f64]) -> Vec<f64> {
    let inv = bezier_inverse(k).to_f64();
    let m = k.width();
    let idx: Vec<MultiIndex> = MultiIndex::all(k, d).collect();
    idx.iter()
        .map(|row| {
            idx.iter()
                .zip(b)
                .map(|(col, &bv)| {
                    let w: f64 = row
                        .components()
                        .iter()
                        .zip(col.components())
                        .map(|(&i, &j)| inv[i as usize * m + j as usize])
                        .product();
                    w * bv
                })
                .sum()
        })
        .collect()
}

fn small_shape() -> impl Strategy<Value = (u32, usize)> {
    prop_oneof![
        (0u32..=8).prop_map(|k| (k, 1)),
        (0u32..=8).prop_map(|k| (k, 2)),
        (0u32..=3).prop_map(|k| (k, 3)),
        (0u32..=2).prop_map(|k| (k, 4)),
    ]
    .prop_filter("at most 81 coefficients", |&(k, d)| (k as usize + 1).pow(d as u32) <= 81)
}

proptest! {
    #[test]
    fn tensor_inverse_matches_kronecker(
        (k, d) in small_shape(),
        seed in prop::collection::vec(-50.0f64..50.0, 81),
    ) {
        let deg = BernsteinDegree::new(k).unwrap();
        let b = &seed[..deg.width().pow(d as u32)];
        let fast = tensor_apply_inverse(deg, d, b).unwrap();
        let dense = kronecker_apply(deg, d, b);
        for (x, y) in fast.iter().zip(&dense) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn reconstruction_recovers_moments(
        k in 0u32..=4,
        d in 1usize..=2,
        values in prop::collection::vec(0.0f64..=1.0, 2..=100),
    ) {
        let n = values.len() / d;
        let data = Dataset::from_flat(d, values[..n * d].to_vec()).unwrap();
        let deg = BernsteinDegree::new(k).unwrap();
        let mu = tensor_apply_inverse(deg, d, &bernstein_aggregates(&data, deg).unwrap()).unwrap();
        let exact = mixed_moments_unnormalized(&data, deg);
        for (x, y) in mu.iter().zip(&exact) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()), "{x} vs {y}");
        }
    }
}

#[test]
fn partition_of_unity_and_nonnegativity() {
    for k in 0..=20 {
        let deg = BernsteinDegree::new(k).unwrap();
        for i in 0..1000 {
            let x = i as f64 / 999.0;
            let mut total = 0.0;
            for j in 0..=k {
                let v = bernstein_eval(deg, j, x).unwrap();
                assert!(v >= 0.0, "B_{j},{k}({x}) = {v}");
                total += v;
            }
            assert!((total - 1.0).abs() <= 1e-12, "k = {k}, x = {x}: {total}");
        }
    }
}

#[test]
fn each_record_contributes_unit_mass() {
    let data = Dataset::from_flat(2, vec![0.1, 0.9, 0.0, 1.0, 0.5, 0.5]).unwrap();
    for k in 1..=5 {
        let total: f64 = bernstein_aggregates(&data, BernsteinDegree::new(k).unwrap()).unwrap().iter().sum();
        assert!((total - 3.0).abs() < 1e-12);
    }
}
