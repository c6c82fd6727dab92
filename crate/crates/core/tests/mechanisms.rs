use bezier_dp::bernstein::{bezier_inverse, tensor_apply_inverse, BernsteinDegree, MultiIndex};
use bezier_dp::harness::{Benchmark, Distribution, ExperimentConfig, StatisticKind};
use bezier_dp::mechanisms::{bernstein_aggregates, bezier_release, Mechanism, MechanismId as M, PrivacyBudget, Statistic};
use bezier_dp::noise::{derive_substream, NoiseSource};
use bezier_dp::statistics::{correlation_from_sums, ClipRange, Dataset};
use bezier_dp::theory::{instance_constants, moment_release_mse, InstanceProfile};
use bezier_dp::GeneralStatistic;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution as _, Exp1};
use rand_xoshiro::Xoshiro256PlusPlus;

fn eps(e: f64) -> PrivacyBudget {
    PrivacyBudget::new(e).unwrap()
}

fn all_mechanisms() -> Vec<Mechanism> {
    M::ALL
        .iter()
        .filter(|&&id| id != M::BezierGeneral && id != M::BezierMoment)
        .map(|&id| Mechanism::from_id(id).unwrap())
        .chain([
            Mechanism::moment(3, 1).unwrap(),
            Mechanism::General(GeneralStatistic::central_moment(4).unwrap()),
        ])
        .collect()
}

#[test]
fn budget_accounting() {
    let d1 = Dataset::univariate(vec![0.2, 0.7, 0.4]).unwrap();
    let d2 = Dataset::bivariate(&[0.2, 0.7, 0.4], &[0.9, 0.1, 0.5]).unwrap();
    let e = 0.8;
    let cases = [
        (Mechanism::Swap { statistic: Statistic::Variance, clip: false }, &d1, 1, 1.0),
        (Mechanism::Naive(Statistic::Covariance), &d2, 4, 4.0),
        (Mechanism::Naive(Statistic::Variance), &d1, 3, 3.0),
        (Mechanism::Improved(Statistic::Variance), &d1, 2, 2.0),
        (Mechanism::Improved(Statistic::Covariance), &d2, 2, 2.0),
        (Mechanism::BezierVariance, &d1, 3, 1.0),
        (Mechanism::BezierCovariance, &d2, 4, 1.0),
        (Mechanism::VarianceViaCovariance, &d1, 4, 1.0),
        (Mechanism::TransformedVariance, &d1, 2, 1.0),
        (Mechanism::General(GeneralStatistic::correlation()), &d2, 9, 1.0),
        (Mechanism::ComposedCorrelation, &d2, 10, 3.0),
        (Mechanism::NaiveCorrelation, &d2, 6, 6.0),
        (Mechanism::moment(5, 2).unwrap(), &d1, 6, 1.0),
    ];
    for (m, data, draws, scale_times_eps) in cases {
        let mut src = NoiseSource::seeded(3).with_trace();
        m.run(data, eps(e), &mut src).unwrap();
        assert_eq!(src.consumed(), draws, "{}", m.id());
        for &s in src.scales().unwrap() {
            assert!((s - scale_times_eps / e).abs() < 1e-12, "{}: scale {s}", m.id());
        }
    }
}

#[test]
fn clip_containment() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(77);
    let mechanisms = all_mechanisms();
    for m in &mechanisms {
        let Some(range) = m.clip_range() else { continue };
        for run in 0..100_000u64 {
            let n = rng.random_range(1..8);
            let values = (0..n * m.required_dim()).map(|_| rng.random::<f64>()).collect();
            let data = Dataset::from_flat(m.required_dim(), values).unwrap();
            let e = 10f64.powf(rng.random_range(-2.0..1.0));
            let v = m.run(&data, eps(e), &mut derive_substream(5, run, 0)).unwrap().value;
            assert!(range.contains(v), "{} released {v} outside [{}, {}]", m.id(), range.lo(), range.hi());
        }
    }
}

#[test]
fn bezier_variance_moment_identity() {
    let data = Dataset::univariate(vec![0.1, 0.35, 0.8, 1.0, 0.0]).unwrap();
    let est = Mechanism::BezierVariance.run(&data, eps(1.0), &mut NoiseSource::zero()).unwrap();
    assert_eq!(est.noisy_aggregates["n~"], 5.0);
    let s1 = est.noisy_aggregates["s_x~"];
    assert!((s1 - 2.25).abs() < 1e-15, "{s1}");
}

#[test]
fn pushed_noise_matches_literal_inverse() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(9);
    for (k, d) in [(1, 1), (4, 1), (9, 1), (2, 2), (3, 2), (2, 3)] {
        let deg = BernsteinDegree::new(k).unwrap();
        let values = (0..30 * d).map(|_| rng.random::<f64>()).collect();
        let data = Dataset::from_flat(d, values).unwrap();
        let b = bernstein_aggregates(&data, deg).unwrap();
        let z: Vec<f64> = (0..b.len()).map(|_| rng.random_range(-20.0..20.0)).collect();
        let pushed = bezier_release(&data, k, d, eps(1.0), &mut NoiseSource::replay(z.clone())).unwrap();
        let noisy: Vec<f64> = b.iter().zip(&z).map(|(x, y)| x + y).collect();
        let literal = tensor_apply_inverse(deg, d, &noisy).unwrap();
        for (p, l) in pushed.iter().zip(&literal) {
            assert!((p - l).abs() <= 1e-9 * (1.0 + l.abs()), "k={k} d={d}: {p} vs {l}");
        }
    }
}

/// Output histograms of one Bernstein coordinate on neighbouring datasets
/// `{}` and `{1}`: that coordinate shifts by one unit of L1 mass, so bin
/// ratios stay within `e^ε` and approach it in the tails.
#[test]
fn dp_histogram_ratio() {
    let e = 1.0;
    let runs = 1_000_000u64;
    let empty = Dataset::empty(1).unwrap();
    let one = Dataset::univariate(vec![1.0]).unwrap();
    let (lo, width, bins) = (-4.0, 0.25, 36);
    let histogram = |data: &Dataset, channel: u64| {
        let prepared = Mechanism::moment(1, 1).unwrap().prepare(data).unwrap();
        let mut h = vec![0u64; bins];
        for t in 0..runs {
            let v = prepared.release_value(eps(e), &mut derive_substream(1, t, channel)).unwrap();
            let i = ((v - lo) / width).floor();
            if i >= 0.0 && (i as usize) < bins {
                h[i as usize] += 1;
            }
        }
        h
    };
    let p = histogram(&empty, 0);
    let q = histogram(&one, 1);
    let bound = e.exp();
    let mut tightest: f64 = 0.0;
    for (a, b) in p.iter().zip(&q) {
        if *a < 2000 || *b < 2000 {
            continue;
        }
        let (a, b) = (*a as f64, *b as f64);
        // four standard errors of a log ratio of two Poisson counts
        let slack = (4.0 * (1.0 / a + 1.0 / b).sqrt()).exp();
        let ratio = (a / b).max(b / a);
        assert!(ratio <= bound * slack, "ratio {ratio} exceeds e^ε");
        tightest = tightest.max(ratio);
    }
    assert!(tightest > 0.95 * bound, "calibration too loose: {tightest}");
}

#[test]
fn moment_mse_respects_bound() {
    let data = Dataset::univariate(vec![0.3, 0.6]).unwrap();
    let trials = 40_000u64;
    for k in 1..=4u32 {
        for j in 0..=k {
            let prepared = Mechanism::moment(k, j).unwrap().prepare(&data).unwrap();
            let exact = prepared.release_value(eps(1.0), &mut NoiseSource::zero()).unwrap();
            let mse = (0..trials)
                .map(|t| {
                    let v = prepared.release_value(eps(1.0), &mut derive_substream(2, t, k as u64 * 10 + j as u64)).unwrap();
                    (v - exact) * (v - exact)
                })
                .sum::<f64>()
                / trials as f64;
            // the count coordinate carries all k + 1 noise terms
            let bound = if j == 0 { 2.0 * (k + 1) as f64 } else { 2.0 * k as f64 };
            assert!(mse <= bound * 1.03, "k={k} j={j}: {mse}");
            let predicted = moment_release_mse(k, j, 1.0).unwrap();
            assert!((mse / predicted - 1.0).abs() < 0.05, "k={k} j={j}: {mse} vs {predicted}");
        }
    }
}

fn fixed_run(ids: Vec<M>, e: f64, dist: Distribution, trials: usize, seed: u64) -> Benchmark {
    let mut cfg = ExperimentConfig::new(ids, vec![e]);
    cfg.n = 10_000;
    cfg.trials = trials;
    cfg.distribution = dist;
    cfg.base_seed = seed;
    cfg.fixed_data = Some(true);
    Benchmark::new(&cfg, None).unwrap()
}

#[test]
fn monte_carlo_matches_first_order_predictions() {
    let e = 0.1;
    let unit = 2.0 / (e * e);
    let c = instance_constants(InstanceProfile::new(0.5, 1.0 / 12.0).unwrap());
    let bench = fixed_run(
        vec![M::SwapVariance, M::BezierVariance, M::VarianceViaCovariance, M::TransformedVariance],
        e,
        Distribution::Uniform,
        20_000,
        21,
    );
    for (id, want, tol) in [
        (M::SwapVariance, 200.0, 0.05),
        (M::BezierVariance, unit * c.c_b, 0.05),
        (M::VarianceViaCovariance, unit * c.c_c, 0.05),
        (M::TransformedVariance, unit * c.c_u, 0.05),
    ] {
        let got = bench.cell(id, e).unwrap().normalized_mse;
        assert!((got / want - 1.0).abs() <= tol, "{id}: {got} vs {want}");
    }
    let bench = fixed_run(vec![M::NaiveCovariance, M::ImprovedCovariance], e, Distribution::Uniform, 20_000, 22);
    for (id, want) in [(M::NaiveCovariance, 5000.0), (M::ImprovedCovariance, 800.0)] {
        let got = bench.cell(id, e).unwrap().normalized_mse;
        assert!((got / want - 1.0).abs() <= 0.07, "{id}: {got} vs {want}");
    }
}

#[test]
fn correlation_mechanisms_are_ordered() {
    for e in [0.3, 1.0] {
        let bench = fixed_run(
            vec![M::BezierCorrelation, M::ComposedCorrelation, M::NaiveCorrelation],
            e,
            Distribution::Correlated { rho: 0.5 },
            5_000,
            31,
        );
        let mse = |id| bench.cell(id, e).unwrap().mse;
        let (b, c, n) = (mse(M::BezierCorrelation), mse(M::ComposedCorrelation), mse(M::NaiveCorrelation));
        assert!(b < c && c < n, "ε={e}: {b} {c} {n}");
    }
}

fn oracle_laplace(rng: &mut Xoshiro256PlusPlus, scale: f64) -> f64 {
    let a: f64 = Exp1.sample(rng);
    let b: f64 = Exp1.sample(rng);
    scale * (a - b)
}

/// Correlation through the literal pipeline: explicit per-record Bernstein
/// sums, dense Kronecker inverse, independent noise generator.
fn oracle_correlation(data: &Dataset, e: f64, rng: &mut Xoshiro256PlusPlus) -> f64 {
    let k = BernsteinDegree::new(2).unwrap();
    let inv = bezier_inverse(k).to_f64();
    let idx: Vec<MultiIndex> = MultiIndex::all(k, 2).collect();
    let bern = |j: u32, x: f64| -> f64 {
        match j {
            0 => (1.0 - x) * (1.0 - x),
            1 => 2.0 * x * (1.0 - x),
            _ => x * x,
        }
    };
    let b: Vec<f64> = idx
        .iter()
        .map(|a| data.records().map(|r| bern(a.components()[0], r[0]) * bern(a.components()[1], r[1])).sum::<f64>())
        .map(|v| v + oracle_laplace(rng, 1.0 / e))
        .collect();
    let mu: Vec<f64> = idx
        .iter()
        .map(|row| {
            idx.iter()
                .zip(&b)
                .map(|(col, bv)| {
                    let (r, c) = (row.components(), col.components());
                    inv[r[0] as usize * 3 + c[0] as usize] * inv[r[1] as usize * 3 + c[1] as usize] * bv
                })
                .sum()
        })
        .collect();
    let at = |i: u32, j: u32| mu[(i * 3 + j) as usize];
    match correlation_from_sums(at(0, 0), at(1, 0), at(0, 1), at(2, 0), at(0, 2), at(1, 1)) {
        Some(r) => ClipRange::CORRELATION.apply(r),
        None => 0.0,
    }
}

#[test]
fn correlation_agrees_with_brute_force_oracle() {
    let e = 0.5;
    let trials = 10_000u64;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(404);
    let xs: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
    let ys: Vec<f64> = xs.iter().map(|x| (x + 0.3 * (2.0 * rng.random::<f64>() - 1.0)).clamp(0.0, 1.0)).collect();
    let data = Dataset::bivariate(&xs, &ys).unwrap();
    let m = Mechanism::General(GeneralStatistic::correlation());
    let prepared = m.prepare(&data).unwrap();
    let exact = prepared.release_value(eps(e), &mut NoiseSource::zero()).unwrap();
    let ours: Vec<f64> = (0..trials)
        .map(|t| prepared.release_value(eps(e), &mut derive_substream(8, t, 0)).unwrap() - exact)
        .collect();
    let theirs: Vec<f64> = (0..trials).map(|_| oracle_correlation(&data, e, &mut rng) - exact).collect();
    let summary = |errs: &[f64]| {
        let n = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / n;
        let sq: Vec<f64> = errs.iter().map(|x| x * x).collect();
        let mse = sq.iter().sum::<f64>() / n;
        let var = sq.iter().map(|s| (s - mse) * (s - mse)).sum::<f64>() / (n - 1.0);
        (mean, mse, (var / n).sqrt())
    };
    let (m1, mse1, se1) = summary(&ours);
    let (m2, mse2, se2) = summary(&theirs);
    let band = 4.0 * (se1 * se1 + se2 * se2).sqrt();
    assert!((mse1 - mse2).abs() <= band, "mse {mse1} vs oracle {mse2} (band {band})");
    let mean_band = 4.0 * ((mse1 + mse2) / trials as f64).sqrt();
    assert!((m1 - m2).abs() <= mean_band, "bias {m1} vs oracle {m2}");
}

#[test]
fn harness_statistic_names_round_trip() {
    for s in ["variance", "covariance", "correlation", "skewness", "kurtosis", "central_moment:3", "moment:4:2"] {
        let k: StatisticKind = s.parse().unwrap();
        assert_eq!(k.to_string(), s);
    }
}
