use bezier_dp::audit::{
    bernstein_map, empirical_sensitivity, random_neighbor_pair, transformed_map, uvar_map, NeighborModel,
};
use bezier_dp::statistics::{univariate_sums, Dataset};
use bezier_dp::Result;

const SIZES: [usize; 4] = [0, 1, 4, 30];

#[test]
fn bernstein_vector_moves_by_exactly_one() {
    for (k, d) in [(1, 1), (3, 1), (2, 2), (2, 3)] {
        let rep = empirical_sensitivity(bernstein_map(k).unwrap(), d, NeighborModel::AddRemove, 3000, &SIZES, 1).unwrap();
        assert!((rep.max_l1 - 1.0).abs() < 1e-9 && (rep.min_l1 - 1.0).abs() < 1e-9, "k={k} d={d}: {rep:?}");
    }
}

#[test]
fn unnormalized_variance_and_transform() {
    let rep = empirical_sensitivity(uvar_map, 1, NeighborModel::AddRemove, 5000, &SIZES, 2).unwrap();
    assert!(rep.min_diff >= -1e-12 && rep.max_diff <= 1.0 + 1e-12);
    let rep = empirical_sensitivity(transformed_map, 1, NeighborModel::AddRemove, 5000, &SIZES, 3).unwrap();
    assert!(rep.max_l1 <= 1.0 + 1e-12);
}

/// `(n, Σx)` has sensitivity 2; the search must find pairs close to it.
#[test]
fn detects_sensitivity_above_one() {
    fn raw(d: &Dataset) -> Result<Vec<f64>> {
        let (n, s1, _) = univariate_sums(d);
        Ok(vec![n, s1])
    }
    let rep = empirical_sensitivity(raw, 1, NeighborModel::AddRemove, 2000, &SIZES, 4).unwrap();
    assert!(rep.max_l1 > 1.99, "{}", rep.max_l1);
    assert_eq!(rep.argmax.extended.len(), rep.argmax.base.len() + 1);
}

#[test]
fn search_is_deterministic() {
    let a = empirical_sensitivity(uvar_map, 1, NeighborModel::AddRemove, 500, &SIZES, 9).unwrap();
    let b = empirical_sensitivity(uvar_map, 1, NeighborModel::AddRemove, 500, &SIZES, 9).unwrap();
    assert_eq!(a.max_l1.to_bits(), b.max_l1.to_bits());
    assert_eq!(a.argmax.extended, b.argmax.extended);
}

#[test]
fn neighbour_pairs_have_the_right_shape() {
    for seed in 0..200 {
        let p = random_neighbor_pair(5, 2, NeighborModel::Swap, seed).unwrap();
        assert_eq!(p.base.len(), p.extended.len());
        let changed = p.base.records().zip(p.extended.records()).filter(|(a, b)| a != b).count();
        assert!(changed <= 1);
        let p = random_neighbor_pair(5, 2, NeighborModel::AddRemove, seed).unwrap();
        assert_eq!(&p.extended.as_flat()[..10], p.base.as_flat());
    }
    assert!(random_neighbor_pair(0, 1, NeighborModel::Swap, 0).is_err());
}
