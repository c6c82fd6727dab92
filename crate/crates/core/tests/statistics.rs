use bezier_dp::statistics::{
    correlation_exact, covariance_exact, feasible_rxy_bounds, unnormalized_cov, unnormalized_var,
    variance_exact, Dataset,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn random_bivariate(rng: &mut Xoshiro256PlusPlus) -> Dataset {
    let n = rng.random_range(1..40);
    let values = (0..2 * n)
        .map(|_| if rng.random_bool(0.3) { rng.random_range(0..2) as f64 } else { rng.random() })
        .collect();
    Dataset::from_flat(2, values).unwrap()
}

#[test]
fn ranges_over_many_datasets() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
    for _ in 0..10_000 {
        let d = random_bivariate(&mut rng);
        let x = Dataset::univariate(d.column(0)).unwrap();
        let v = variance_exact(&x).unwrap();
        let c = covariance_exact(&d).unwrap();
        assert!((0.0..=0.25).contains(&v), "{v}");
        assert!((-0.25..=0.25).contains(&c), "{c}");
        if let Ok(r) = correlation_exact(&d) {
            assert!((-1.0..=1.0).contains(&r), "{r}");
        }
        let n = d.len() as f64;
        assert!((n * v - unnormalized_var(&x)).abs() <= 1e-12 * n);
        let diag = covariance_exact(&x.duplicated_column(0)).unwrap();
        assert!((diag - v).abs() <= 1e-15, "{diag} vs {v}");
        let rx = x.as_flat().iter().sum::<f64>() / n;
        let ry = d.column(1).iter().sum::<f64>() / n;
        let (lo, hi) = feasible_rxy_bounds(rx, ry);
        let rxy = c + rx * ry;
        assert!(rxy >= lo - 1e-12 && rxy <= hi + 1e-12, "{lo} <= {rxy} <= {hi}");
    }
}

#[test]
fn correlation_undefined_for_constant_column() {
    let d = Dataset::bivariate(&[0.3, 0.3, 0.3], &[0.1, 0.5, 0.9]).unwrap();
    assert!(correlation_exact(&d).is_err());
}

proptest! {
    #[test]
    fn permutation_invariance(values in prop::collection::vec(0.0f64..=1.0, 2..=200), seed in any::<u64>()) {
        let n = values.len() / 2;
        let d = Dataset::from_flat(2, values[..2 * n].to_vec()).unwrap();
        let mut records: Vec<Vec<f64>> = d.records().map(|r| r.to_vec()).collect();
        records.shuffle(&mut Xoshiro256PlusPlus::seed_from_u64(seed));
        let p = Dataset::from_records(2, &records).unwrap();
        prop_assert!((covariance_exact(&d).unwrap() - covariance_exact(&p).unwrap()).abs() <= 1e-12);
        prop_assert!((unnormalized_cov(&d).unwrap() - unnormalized_cov(&p).unwrap()).abs() <= 1e-12 * n as f64);
        let x = Dataset::univariate(d.column(0)).unwrap();
        let y = Dataset::univariate(p.column(0)).unwrap();
        prop_assert!((variance_exact(&x).unwrap() - variance_exact(&y).unwrap()).abs() <= 1e-12);
    }
}
