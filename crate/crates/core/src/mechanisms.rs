//! Differentially private estimators of moments, variance, covariance and
//! moment-based statistics.
//!
//! Every estimator is split into two stages. [`Mechanism::prepare`] computes
//! the exact aggregates of a dataset (deterministic, `O(n)`), and
//! [`Prepared::release`] draws the Laplace noise and post-processes it
//! (`O(1)` for the named estimators). The benchmark harness reuses one
//! `Prepared` across many trials when the dataset is held fixed.
//!
//! Each release draws i.i.d. noise `z` on the protected coordinates (the
//! Bernstein aggregates for the Bézier family) and reconstructs the noisy
//! sums as `exact + M·z`, where `M` is the algorithm's reconstruction map
//! (`A⁻¹` for the Bézier family). This equals `M·(b + z)` in exact
//! arithmetic and leaves the zero-noise path bit-identical to the exact
//! statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bernstein::{accumulate_tensor_basis, tensor_len, BernsteinDegree, BezierBasis};
use crate::error::{Error, Result};
use crate::noise::{LaplaceScale, NoiseSource};
use crate::statistics::{
    bivariate_sums, central_moment_from_sums, correlation_from_sums, covariance_from_sums,
    mixed_moments_unnormalized, standardized_moment_from_sums, univariate_sums, unnormalized_cov,
    unnormalized_var, variance_from_sums, ClipRange, Dataset,
};

/// Below this magnitude a noisy count is treated as degenerate and the
/// estimator releases the midpoint of its clip range.
pub const DEGENERATE_COUNT: f64 = 1e-9;
/// Noisy variance products at or below this value make correlation degenerate.
pub const DEGENERATE_VARIANCE_PRODUCT: f64 = 1e-12;
/// Cap on `(k+1)^d` for a single moment release.
pub const MAX_TENSOR_LEN: usize = 1_000_000;

/// Privacy budget `ε > 0`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PrivacyBudget(f64);

impl PrivacyBudget {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::domain(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(PrivacyBudget(epsilon))
    }

    #[inline]
    pub fn epsilon(self) -> f64 {
        self.0
    }

    /// Even split of the budget into `parts` sequentially composed releases.
    pub fn split(self, parts: usize) -> PrivacyBudget {
        PrivacyBudget(self.0 / parts as f64)
    }

    fn scale(self, sensitivity: f64) -> LaplaceScale {
        LaplaceScale::for_sensitivity(sensitivity, self.0).expect("budget is positive")
    }
}

impl TryFrom<f64> for PrivacyBudget {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        PrivacyBudget::new(value)
    }
}

impl From<PrivacyBudget> for f64 {
    fn from(value: PrivacyBudget) -> f64 {
        value.0
    }
}

/// Which centered second moment a baseline estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Variance,
    Covariance,
}

impl Statistic {
    pub fn clip_range(self) -> ClipRange {
        match self {
            Statistic::Variance => ClipRange::VARIANCE,
            Statistic::Covariance => ClipRange::COVARIANCE,
        }
    }
}

macro_rules! mechanism_ids {
    ($($variant:ident => $name:literal),* $(,)?) => {
        /// Stable identifier of every estimator.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum MechanismId {
            $(#[serde(rename = $name)] $variant,)*
        }

        impl MechanismId {
            pub const ALL: &'static [MechanismId] = &[$(MechanismId::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(MechanismId::$variant => $name,)*
                }
            }
        }

        impl FromStr for MechanismId {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(MechanismId::$variant),)*
                    other => Err(Error::config(format!("unknown mechanism `{other}`"))),
                }
            }
        }
    };
}

mechanism_ids! {
    SwapVariance => "swap_var",
    SwapCovariance => "swap_cov",
    NaiveVariance => "naive_var",
    NaiveCovariance => "naive_cov",
    ImprovedVariance => "improved_var",
    ImprovedCovariance => "improved_cov",
    BezierVariance => "bezier_var",
    BezierCovariance => "bezier_cov",
    VarianceViaCovariance => "via_cov_var",
    TransformedVariance => "transformed_var",
    BezierCorrelation => "bezier_corr",
    ComposedCorrelation => "composed_corr",
    NaiveCorrelation => "naive_corr",
    BezierSkewness => "bezier_skew",
    BezierKurtosis => "bezier_kurt",
    BezierCentralMoment3 => "bezier_cm3",
    BezierCentralMoment4 => "bezier_cm4",
    BezierGeneral => "bezier_general",
    BezierMoment => "bezier_moment",
}

impl fmt::Display for MechanismId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A released value with its audit trail.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub mechanism: MechanismId,
    pub epsilon: f64,
    pub clip_applied: Option<ClipRange>,
    /// Noisy intermediates named after the algorithm's quantities
    /// (`n~`, `s_x~`, `b_{1,1}~`, …). All are post-processing of the noisy
    /// protected vector.
    pub noisy_aggregates: BTreeMap<String, f64>,
}

/// Post-processing from noisy unnormalized moments (flattening order, entry
/// 0 is `ñ`) to a statistic; `None` marks a degenerate input.
pub type PostProcess = Arc<dyn Fn(&[f64]) -> Option<f64> + Send + Sync>;

/// A statistic computed from mixed moments up to degree `k` in `d` columns.
#[derive(Clone)]
pub struct GeneralStatistic {
    id: MechanismId,
    degree: BernsteinDegree,
    dim: usize,
    clip: ClipRange,
    post_process: PostProcess,
}

impl fmt::Debug for GeneralStatistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralStatistic")
            .field("id", &self.id)
            .field("degree", &self.degree)
            .field("dim", &self.dim)
            .field("clip", &self.clip)
            .finish()
    }
}

fn degenerate_count(n: f64) -> bool {
    !(n.abs() >= DEGENERATE_COUNT)
}

/// Private-layer correlation from raw sums: zero when degenerate.
fn noisy_correlation(n: f64, sx: f64, sy: f64, sxx: f64, syy: f64, sxy: f64) -> Option<f64> {
    if degenerate_count(n) {
        return None;
    }
    let (mx, my) = (sx / n, sy / n);
    let prod = (sxx / n - mx * mx) * (syy / n - my * my);
    if !(prod > DEGENERATE_VARIANCE_PRODUCT) {
        return None;
    }
    correlation_from_sums(n, sx, sy, sxx, syy, sxy)
}

impl GeneralStatistic {
    pub fn new(
        degree: u32,
        dim: usize,
        clip: ClipRange,
        post_process: PostProcess,
    ) -> Result<Self> {
        let degree = BernsteinDegree::new(degree)?;
        if degree.get() < 1 || dim < 1 {
            return Err(Error::domain("general statistic needs k >= 1 and d >= 1"));
        }
        check_tensor_cap(degree, dim)?;
        Ok(GeneralStatistic {
            id: MechanismId::BezierGeneral,
            degree,
            dim,
            clip,
            post_process,
        })
    }

    fn builtin(id: MechanismId, degree: u32, dim: usize, clip: ClipRange, f: PostProcess) -> Self {
        let mut s = GeneralStatistic::new(degree, dim, clip, f).expect("valid builtin");
        s.id = id;
        s
    }

    /// Pearson correlation: `d = 2`, `k = 2`, clip `[−1, 1]`.
    pub fn correlation() -> Self {
        // Flattening order for k = 2, d = 2: (0,0) (0,1) (0,2) (1,0) (1,1) (2,0) ...
        GeneralStatistic::builtin(
            MechanismId::BezierCorrelation,
            2,
            2,
            ClipRange::CORRELATION,
            Arc::new(|m: &[f64]| noisy_correlation(m[0], m[3], m[1], m[6], m[2], m[4])),
        )
    }

    /// Skewness `E[(x − μ)³] / σ³`: `d = 1`, `k = 3`.
    pub fn skewness(clip: ClipRange) -> Self {
        GeneralStatistic::builtin(
            MechanismId::BezierSkewness,
            3,
            1,
            clip,
            Arc::new(|m: &[f64]| guarded(m, |s| standardized_moment_from_sums(s, 3))),
        )
    }

    /// Kurtosis `E[(x − μ)⁴] / σ⁴`: `d = 1`, `k = 4`.
    pub fn kurtosis(clip: ClipRange) -> Self {
        GeneralStatistic::builtin(
            MechanismId::BezierKurtosis,
            4,
            1,
            clip,
            Arc::new(|m: &[f64]| guarded(m, |s| standardized_moment_from_sums(s, 4))),
        )
    }

    /// Central moment of order 3 or 4, clipped to its attainable range on `[0, 1]`.
    pub fn central_moment(order: u32) -> Result<Self> {
        let (id, clip) = match order {
            // max of p(1−p)(1−2p) over p ∈ [0, 1] is 1/(6√3)
            3 => {
                let bound = 1.0 / (6.0 * 3f64.sqrt());
                (MechanismId::BezierCentralMoment3, ClipRange::new(-bound, bound)?)
            }
            4 => (MechanismId::BezierCentralMoment4, ClipRange::new(0.0, 1.0 / 16.0)?),
            _ => return Err(Error::domain(format!("central moment order {order} unsupported"))),
        };
        Ok(GeneralStatistic::builtin(
            id,
            order,
            1,
            clip,
            Arc::new(move |m: &[f64]| guarded(m, |s| central_moment_from_sums(s, order))),
        ))
    }

    pub fn id(&self) -> MechanismId {
        self.id
    }

    pub fn degree(&self) -> BernsteinDegree {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn clip(&self) -> ClipRange {
        self.clip
    }

    pub fn evaluate(&self, noisy_moments: &[f64]) -> Option<f64> {
        (self.post_process)(noisy_moments)
    }
}

fn guarded(m: &[f64], f: impl Fn(&[f64]) -> Option<f64>) -> Option<f64> {
    if degenerate_count(m[0]) {
        None
    } else {
        f(m).filter(|v| v.is_finite())
    }
}

fn check_tensor_cap(k: BernsteinDegree, d: usize) -> Result<usize> {
    let len = tensor_len(k, d)?;
    if len > MAX_TENSOR_LEN {
        return Err(Error::Capacity(format!(
            "(k+1)^d = {len} exceeds the cap {MAX_TENSOR_LEN}"
        )));
    }
    Ok(len)
}

/// Per-record Bernstein aggregates `b_α = Σ_i Π_j B_{α_j}(x_{i,j})` in
/// flattening order. Under add-remove neighbours this vector moves by
/// exactly one unit of L1 mass.
pub fn bernstein_aggregates(data: &Dataset, k: BernsteinDegree) -> Result<Vec<f64>> {
    let len = check_tensor_cap(k, data.dim())?;
    let mut acc = vec![0.0; len];
    let mut row = vec![0.0; data.dim() * k.width()];
    for rec in data.records() {
        accumulate_tensor_basis(k, rec, &mut row, &mut acc);
    }
    Ok(acc)
}

/// An estimator configuration, independent of the dataset and of `ε`.
#[derive(Clone, Debug)]
pub enum Mechanism {
    /// Swap-model Laplace: `stat + Lap(1/ε)/n`. Clipping is off unless requested.
    Swap { statistic: Statistic, clip: bool },
    /// Separate Laplace noise on every raw sum, budget split evenly.
    Naive(Statistic),
    /// Laplace noise on `(n, u)` with `u` the unnormalized statistic.
    Improved(Statistic),
    BezierVariance,
    BezierCovariance,
    /// Bézier covariance of the duplicated column `[x, x]`.
    VarianceViaCovariance,
    /// Laplace noise on `(n − uvar, uvar)`.
    TransformedVariance,
    General(GeneralStatistic),
    /// Bézier covariance plus two Bézier variances, each at `ε/3`.
    ComposedCorrelation,
    /// Six raw sums with Laplace noise at `6/ε` each.
    NaiveCorrelation,
    /// One coordinate `μ̃_j` of a univariate degree-`k` moment release.
    Moment { degree: BernsteinDegree, index: u32 },
}

impl Mechanism {
    /// Default configuration for an id. `bezier_general` and `bezier_moment`
    /// need parameters and are rejected here.
    pub fn from_id(id: MechanismId) -> Result<Mechanism> {
        use MechanismId as M;
        Ok(match id {
            M::SwapVariance => Mechanism::Swap { statistic: Statistic::Variance, clip: false },
            M::SwapCovariance => Mechanism::Swap { statistic: Statistic::Covariance, clip: false },
            M::NaiveVariance => Mechanism::Naive(Statistic::Variance),
            M::NaiveCovariance => Mechanism::Naive(Statistic::Covariance),
            M::ImprovedVariance => Mechanism::Improved(Statistic::Variance),
            M::ImprovedCovariance => Mechanism::Improved(Statistic::Covariance),
            M::BezierVariance => Mechanism::BezierVariance,
            M::BezierCovariance => Mechanism::BezierCovariance,
            M::VarianceViaCovariance => Mechanism::VarianceViaCovariance,
            M::TransformedVariance => Mechanism::TransformedVariance,
            M::BezierCorrelation => Mechanism::General(GeneralStatistic::correlation()),
            M::ComposedCorrelation => Mechanism::ComposedCorrelation,
            M::NaiveCorrelation => Mechanism::NaiveCorrelation,
            M::BezierSkewness => Mechanism::General(GeneralStatistic::skewness(ClipRange::new(-10.0, 10.0)?)),
            M::BezierKurtosis => Mechanism::General(GeneralStatistic::kurtosis(ClipRange::new(1.0, 100.0)?)),
            M::BezierCentralMoment3 => Mechanism::General(GeneralStatistic::central_moment(3)?),
            M::BezierCentralMoment4 => Mechanism::General(GeneralStatistic::central_moment(4)?),
            M::BezierGeneral | M::BezierMoment => {
                return Err(Error::config(format!("mechanism `{id}` needs explicit parameters")))
            }
        })
    }

    pub fn moment(k: u32, j: u32) -> Result<Mechanism> {
        let degree = BernsteinDegree::new(k)?;
        if k < 1 || j > k {
            return Err(Error::domain(format!("moment index {j} with degree {k} is invalid")));
        }
        Ok(Mechanism::Moment { degree, index: j })
    }

    pub fn id(&self) -> MechanismId {
        use MechanismId as M;
        match self {
            Mechanism::Swap { statistic: Statistic::Variance, .. } => M::SwapVariance,
            Mechanism::Swap { statistic: Statistic::Covariance, .. } => M::SwapCovariance,
            Mechanism::Naive(Statistic::Variance) => M::NaiveVariance,
            Mechanism::Naive(Statistic::Covariance) => M::NaiveCovariance,
            Mechanism::Improved(Statistic::Variance) => M::ImprovedVariance,
            Mechanism::Improved(Statistic::Covariance) => M::ImprovedCovariance,
            Mechanism::BezierVariance => M::BezierVariance,
            Mechanism::BezierCovariance => M::BezierCovariance,
            Mechanism::VarianceViaCovariance => M::VarianceViaCovariance,
            Mechanism::TransformedVariance => M::TransformedVariance,
            Mechanism::General(g) => g.id(),
            Mechanism::ComposedCorrelation => M::ComposedCorrelation,
            Mechanism::NaiveCorrelation => M::NaiveCorrelation,
            Mechanism::Moment { .. } => M::BezierMoment,
        }
    }

    /// Number of columns the estimator reads.
    pub fn required_dim(&self) -> usize {
        match self {
            Mechanism::Swap { statistic, .. }
            | Mechanism::Naive(statistic)
            | Mechanism::Improved(statistic) => match statistic {
                Statistic::Variance => 1,
                Statistic::Covariance => 2,
            },
            Mechanism::BezierVariance
            | Mechanism::VarianceViaCovariance
            | Mechanism::TransformedVariance
            | Mechanism::Moment { .. } => 1,
            Mechanism::BezierCovariance
            | Mechanism::ComposedCorrelation
            | Mechanism::NaiveCorrelation => 2,
            Mechanism::General(g) => g.dim(),
        }
    }

    /// Clip range applied to the released value, if any.
    pub fn clip_range(&self) -> Option<ClipRange> {
        match self {
            Mechanism::Swap { statistic, clip } => clip.then(|| statistic.clip_range()),
            Mechanism::Naive(s) | Mechanism::Improved(s) => Some(s.clip_range()),
            Mechanism::BezierVariance
            | Mechanism::VarianceViaCovariance
            | Mechanism::TransformedVariance => Some(ClipRange::VARIANCE),
            Mechanism::BezierCovariance => Some(ClipRange::COVARIANCE),
            Mechanism::General(g) => Some(g.clip()),
            Mechanism::ComposedCorrelation | Mechanism::NaiveCorrelation => {
                Some(ClipRange::CORRELATION)
            }
            Mechanism::Moment { .. } => None,
        }
    }

    /// Computes the exact aggregates the estimator protects.
    pub fn prepare(&self, data: &Dataset) -> Result<Prepared> {
        let need = self.required_dim();
        let dim_ok = match self {
            Mechanism::General(_) => data.dim() == need,
            _ => data.dim() >= need,
        };
        if !dim_ok {
            return Err(Error::domain(format!(
                "{} needs {need} column(s), dataset has {}",
                self.id(),
                data.dim()
            )));
        }
        let n = data.len() as f64;
        let aggregates = match self {
            Mechanism::Swap { statistic, .. } => {
                if data.is_empty() {
                    return Err(Error::UndefinedStatistic(
                        "the swap model needs a non-empty dataset".into(),
                    ));
                }
                let stat = match statistic {
                    Statistic::Variance => {
                        let (n, s1, s2) = univariate_sums(data);
                        variance_from_sums(n, s1, s2)
                    }
                    Statistic::Covariance => {
                        let (n, sx, sy, sxy) = bivariate_sums(data);
                        covariance_from_sums(n, sx, sy, sxy)
                    }
                };
                Aggregates::Swap { n, stat }
            }
            Mechanism::Naive(Statistic::Variance) => {
                let (n, s1, s2) = univariate_sums(data);
                Aggregates::Sums3 { n, s1, s2 }
            }
            Mechanism::Naive(Statistic::Covariance) => {
                let (n, sx, sy, sxy) = bivariate_sums(data);
                Aggregates::Sums4 { n, sx, sy, sxy }
            }
            Mechanism::Improved(statistic) => {
                let u = match statistic {
                    Statistic::Variance => unnormalized_var(data),
                    Statistic::Covariance => unnormalized_cov(data)?,
                };
                Aggregates::CountAndU { n, u }
            }
            Mechanism::TransformedVariance => Aggregates::CountAndU {
                n,
                u: unnormalized_var(data),
            },
            Mechanism::BezierVariance => bezier_variance_aggregates(data)?,
            Mechanism::BezierCovariance => bezier_covariance_aggregates(data)?,
            Mechanism::VarianceViaCovariance => {
                bezier_covariance_aggregates(&data.duplicated_column(0))?
            }
            Mechanism::ComposedCorrelation => {
                let x = Dataset::univariate(data.column(0))?;
                let y = Dataset::univariate(data.column(1))?;
                Aggregates::Composed(Box::new([
                    bezier_covariance_aggregates(data)?,
                    bezier_variance_aggregates(&x)?,
                    bezier_variance_aggregates(&y)?,
                ]))
            }
            Mechanism::NaiveCorrelation => {
                let sums = crate::statistics::correlation_sums(data);
                Aggregates::Sums6([sums.0, sums.1, sums.2, sums.3, sums.4, sums.5])
            }
            Mechanism::General(g) => moment_aggregates(data, g.degree())?,
            Mechanism::Moment { degree, .. } => moment_aggregates(data, *degree)?,
        };
        Ok(Prepared {
            mechanism: self.clone(),
            aggregates,
        })
    }

    pub fn run(&self, data: &Dataset, eps: PrivacyBudget, src: &mut NoiseSource) -> Result<Estimate> {
        self.prepare(data)?.release(eps, src)
    }
}

#[derive(Clone, Debug)]
enum Aggregates {
    Swap { n: f64, stat: f64 },
    Sums3 { n: f64, s1: f64, s2: f64 },
    Sums4 { n: f64, sx: f64, sy: f64, sxy: f64 },
    CountAndU { n: f64, u: f64 },
    BezierVar { n: f64, s1: f64, s2: f64, b: [f64; 3] },
    BezierCov { n: f64, sx: f64, sy: f64, sxy: f64, b: [f64; 4] },
    Composed(Box<[Aggregates; 3]>),
    Sums6([f64; 6]),
    Moments { basis: Arc<BezierBasis>, dim: usize, mu: Vec<f64>, b: Vec<f64> },
}

fn bezier_variance_aggregates(data: &Dataset) -> Result<Aggregates> {
    let (n, s1, s2) = univariate_sums(data);
    let x = Dataset::univariate(data.column(0))?;
    let b = bernstein_aggregates(&x, BernsteinDegree::new(2)?)?;
    Ok(Aggregates::BezierVar { n, s1, s2, b: [b[0], b[1], b[2]] })
}

fn bezier_covariance_aggregates(data: &Dataset) -> Result<Aggregates> {
    let (n, sx, sy, sxy) = bivariate_sums(data);
    let xy = if data.dim() == 2 {
        data.clone()
    } else {
        Dataset::bivariate(&data.column(0), &data.column(1))?
    };
    let b = bernstein_aggregates(&xy, BernsteinDegree::new(1)?)?;
    Ok(Aggregates::BezierCov { n, sx, sy, sxy, b: [b[0], b[1], b[2], b[3]] })
}

fn moment_aggregates(data: &Dataset, k: BernsteinDegree) -> Result<Aggregates> {
    check_tensor_cap(k, data.dim())?;
    Ok(Aggregates::Moments {
        basis: Arc::new(BezierBasis::new(k)),
        dim: data.dim(),
        mu: mixed_moments_unnormalized(data, k),
        b: bernstein_aggregates(data, k)?,
    })
}

/// Exact aggregates of one dataset, ready for repeated noisy releases.
#[derive(Clone, Debug)]
pub struct Prepared {
    mechanism: Mechanism,
    aggregates: Aggregates,
}

type Trail<'a> = Option<&'a mut BTreeMap<String, f64>>;

fn record(trail: &mut Trail<'_>, name: &str, value: f64) {
    if let Some(t) = trail.as_deref_mut() {
        t.insert(name.to_string(), value);
    }
}

/// `clip(num/den)` with the degenerate-count rule.
fn clipped_ratio(num: f64, den: f64, range: ClipRange) -> f64 {
    if degenerate_count(den) {
        range.midpoint()
    } else {
        range.apply(num / den)
    }
}

impl Prepared {
    pub fn mechanism(&self) -> &Mechanism {
        &self.mechanism
    }

    pub fn release(&self, eps: PrivacyBudget, src: &mut NoiseSource) -> Result<Estimate> {
        let mut trail = BTreeMap::new();
        let value = self.compute(eps, src, &mut Some(&mut trail))?;
        Ok(Estimate {
            value,
            mechanism: self.mechanism.id(),
            epsilon: eps.epsilon(),
            clip_applied: self.mechanism.clip_range(),
            noisy_aggregates: trail,
        })
    }

    /// Released value only, without building the audit trail.
    pub fn release_value(&self, eps: PrivacyBudget, src: &mut NoiseSource) -> Result<f64> {
        self.compute(eps, src, &mut None)
    }

    fn compute(&self, eps: PrivacyBudget, src: &mut NoiseSource, trail: &mut Trail<'_>) -> Result<f64> {
        match (&self.mechanism, &self.aggregates) {
            (Mechanism::Swap { statistic, clip }, Aggregates::Swap { n, stat }) => {
                let z = src.laplace(eps.scale(1.0))?;
                let value = stat + z / n;
                record(trail, "stat~", value);
                Ok(if *clip { statistic.clip_range().apply(value) } else { value })
            }
            (Mechanism::Naive(_), Aggregates::Sums3 { n, s1, s2 }) => {
                let scale = eps.scale(3.0);
                let n_t = n + src.laplace(scale)?;
                let s1_t = s1 + src.laplace(scale)?;
                let s2_t = s2 + src.laplace(scale)?;
                record(trail, "n~", n_t);
                record(trail, "s_x~", s1_t);
                record(trail, "s_xx~", s2_t);
                Ok(variance_release(n_t, s1_t, s2_t))
            }
            (Mechanism::Naive(_), Aggregates::Sums4 { n, sx, sy, sxy }) => {
                let scale = eps.scale(4.0);
                let n_t = n + src.laplace(scale)?;
                let sx_t = sx + src.laplace(scale)?;
                let sy_t = sy + src.laplace(scale)?;
                let sxy_t = sxy + src.laplace(scale)?;
                record(trail, "n~", n_t);
                record(trail, "s_x~", sx_t);
                record(trail, "s_y~", sy_t);
                record(trail, "s_xy~", sxy_t);
                Ok(covariance_release(n_t, sx_t, sy_t, sxy_t))
            }
            (Mechanism::Improved(statistic), Aggregates::CountAndU { n, u }) => {
                let scale = eps.scale(2.0);
                let n_t = n + src.laplace(scale)?;
                let u_t = u + src.laplace(scale)?;
                record(trail, "n~", n_t);
                record(trail, "u~", u_t);
                Ok(clipped_ratio(u_t, n_t, statistic.clip_range()))
            }
            (Mechanism::TransformedVariance, Aggregates::CountAndU { n, u }) => {
                let scale = eps.scale(1.0);
                let z0 = src.laplace(scale)?;
                let z1 = src.laplace(scale)?;
                let n_t = n + (z0 + z1);
                let v_t = u + z1;
                record(trail, "b_0~", (n - u) + z0);
                record(trail, "b_1~", v_t);
                record(trail, "n~", n_t);
                record(trail, "v_x~", v_t);
                Ok(clipped_ratio(v_t, n_t, ClipRange::VARIANCE))
            }
            (Mechanism::BezierVariance, agg @ Aggregates::BezierVar { .. }) => {
                bezier_variance_release(agg, eps, src, trail)
            }
            (Mechanism::BezierCovariance, agg @ Aggregates::BezierCov { .. }) => {
                bezier_covariance_release(agg, eps, src, trail)
            }
            (Mechanism::VarianceViaCovariance, agg @ Aggregates::BezierCov { .. }) => {
                let c = bezier_covariance_release(agg, eps, src, trail)?;
                Ok(ClipRange::VARIANCE.apply(c))
            }
            (Mechanism::ComposedCorrelation, Aggregates::Composed(parts)) => {
                let third = eps.split(3);
                let c = bezier_covariance_release(&parts[0], third, src, &mut None)?;
                let vx = bezier_variance_release(&parts[1], third, src, &mut None)?;
                let vy = bezier_variance_release(&parts[2], third, src, &mut None)?;
                record(trail, "cov~", c);
                record(trail, "var_x~", vx);
                record(trail, "var_y~", vy);
                let prod = vx * vy;
                Ok(if prod > DEGENERATE_VARIANCE_PRODUCT {
                    ClipRange::CORRELATION.apply(c / prod.sqrt())
                } else {
                    ClipRange::CORRELATION.midpoint()
                })
            }
            (Mechanism::NaiveCorrelation, Aggregates::Sums6(s)) => {
                let scale = eps.scale(6.0);
                let mut t = [0.0; 6];
                for (slot, exact) in t.iter_mut().zip(s) {
                    *slot = exact + src.laplace(scale)?;
                }
                for (name, v) in ["n~", "s_x~", "s_y~", "s_xx~", "s_yy~", "s_xy~"].iter().zip(t) {
                    record(trail, name, v);
                }
                Ok(noisy_correlation(t[0], t[1], t[2], t[3], t[4], t[5])
                    .map_or(ClipRange::CORRELATION.midpoint(), |c| ClipRange::CORRELATION.apply(c)))
            }
            (Mechanism::General(g), agg @ Aggregates::Moments { .. }) => {
                let mu = noisy_moments(agg, eps, src, trail)?;
                Ok(g.evaluate(&mu).map_or(g.clip().midpoint(), |v| g.clip().apply(v)))
            }
            (Mechanism::Moment { index, .. }, Aggregates::Moments { basis, mu, .. }) => {
                let m = basis.degree().width();
                let inv = basis.inverse().to_f64();
                let j = *index as usize;
                let mut noise = 0.0;
                // rows of A⁻¹ are zero left of the diagonal; draw every coordinate anyway
                for l in 0..m {
                    let z = src.laplace(eps.scale(1.0))?;
                    noise += inv[j * m + l] * z;
                }
                let value = mu[j] + noise;
                record(trail, &format!("mu_{j}~"), value);
                Ok(value)
            }
            _ => unreachable!("aggregates always match their mechanism"),
        }
    }
}

fn variance_release(n_t: f64, s1_t: f64, s2_t: f64) -> f64 {
    if degenerate_count(n_t) {
        ClipRange::VARIANCE.midpoint()
    } else {
        variance_from_sums(n_t, s1_t, s2_t)
    }
}

fn covariance_release(n_t: f64, sx_t: f64, sy_t: f64, sxy_t: f64) -> f64 {
    if degenerate_count(n_t) {
        ClipRange::COVARIANCE.midpoint()
    } else {
        covariance_from_sums(n_t, sx_t, sy_t, sxy_t)
    }
}

fn bezier_variance_release(
    agg: &Aggregates,
    eps: PrivacyBudget,
    src: &mut NoiseSource,
    trail: &mut Trail<'_>,
) -> Result<f64> {
    let Aggregates::BezierVar { n, s1, s2, b } = agg else {
        unreachable!()
    };
    let scale = eps.scale(1.0);
    let z = [src.laplace(scale)?, src.laplace(scale)?, src.laplace(scale)?];
    // ñ = Σ b̃_j, s̃_x = b̃₁/2 + b̃₂, s̃_xx = b̃₂
    let n_t = n + (z[0] + z[1] + z[2]);
    let s1_t = s1 + (z[1] / 2.0 + z[2]);
    let s2_t = s2 + z[2];
    if trail.is_some() {
        for j in 0..3 {
            record(trail, &format!("b_{j}~"), b[j] + z[j]);
        }
        record(trail, "n~", n_t);
        record(trail, "s_x~", s1_t);
        record(trail, "s_xx~", s2_t);
    }
    Ok(variance_release(n_t, s1_t, s2_t))
}

fn bezier_covariance_release(
    agg: &Aggregates,
    eps: PrivacyBudget,
    src: &mut NoiseSource,
    trail: &mut Trail<'_>,
) -> Result<f64> {
    let Aggregates::BezierCov { n, sx, sy, sxy, b } = agg else {
        unreachable!()
    };
    let scale = eps.scale(1.0);
    // draw order follows the flattening: (0,0), (0,1), (1,0), (1,1)
    let z = [
        src.laplace(scale)?,
        src.laplace(scale)?,
        src.laplace(scale)?,
        src.laplace(scale)?,
    ];
    let n_t = n + (z[0] + z[1] + z[2] + z[3]);
    let sx_t = sx + (z[3] + z[2]);
    let sy_t = sy + (z[1] + z[3]);
    let sxy_t = sxy + z[3];
    if trail.is_some() {
        for (i, name) in ["b_{0,0}~", "b_{0,1}~", "b_{1,0}~", "b_{1,1}~"].iter().enumerate() {
            record(trail, name, b[i] + z[i]);
        }
        record(trail, "n~", n_t);
        record(trail, "s_x~", sx_t);
        record(trail, "s_y~", sy_t);
        record(trail, "s_xy~", sxy_t);
    }
    Ok(covariance_release(n_t, sx_t, sy_t, sxy_t))
}

fn noisy_moments(
    agg: &Aggregates,
    eps: PrivacyBudget,
    src: &mut NoiseSource,
    trail: &mut Trail<'_>,
) -> Result<Vec<f64>> {
    let Aggregates::Moments { basis, dim, mu, b } = agg else {
        unreachable!()
    };
    let mut z = vec![0.0; mu.len()];
    src.fill_laplace(eps.scale(1.0), &mut z)?;
    let w = basis.apply_inverse(*dim, &z)?;
    let out: Vec<f64> = mu.iter().zip(&w).map(|(m, w)| m + w).collect();
    if trail.is_some() {
        for (flat, (bv, zv)) in b.iter().zip(&z).enumerate() {
            record(trail, &format!("b_{flat}~"), bv + zv);
        }
        for (flat, v) in out.iter().enumerate() {
            record(trail, &format!("mu_{flat}~"), *v);
        }
    }
    Ok(out)
}

/// Swap-model Laplace baseline: `stat(D) + Lap(1/ε)/n`, unclipped.
pub fn swap_laplace(
    data: &Dataset,
    statistic: Statistic,
    eps: PrivacyBudget,
    src: &mut NoiseSource,
) -> Result<Estimate> {
    Mechanism::Swap { statistic, clip: false }.run(data, eps, src)
}

/// Naive add-remove baseline: every raw sum gets its own share of the budget.
pub fn naive_add_remove(
    data: &Dataset,
    statistic: Statistic,
    eps: PrivacyBudget,
    src: &mut NoiseSource,
) -> Result<Estimate> {
    Mechanism::Naive(statistic).run(data, eps, src)
}

/// Add-remove baseline on `(n, u)` with `u` the unnormalized statistic.
pub fn improved_add_remove(
    data: &Dataset,
    statistic: Statistic,
    eps: PrivacyBudget,
    src: &mut NoiseSource,
) -> Result<Estimate> {
    Mechanism::Improved(statistic).run(data, eps, src)
}

/// Releases every unnormalized mixed moment up to degree `k` in each of the
/// `d` columns under a single budget `ε`: Laplace noise of scale `1/ε` on
/// each Bernstein aggregate, mapped back through `(A_d)⁻¹`.
pub fn bezier_release(
    data: &Dataset,
    k: u32,
    d: usize,
    eps: PrivacyBudget,
    src: &mut NoiseSource,
) -> Result<Vec<f64>> {
    let degree = BernsteinDegree::new(k)?;
    if k < 1 || d < 1 {
        return Err(Error::domain("moment release needs k >= 1 and d >= 1"));
    }
    if data.dim() != d {
        return Err(Error::domain(format!(
            "dataset has {} columns, release asked for {d}",
            data.dim()
        )));
    }
    let agg = moment_aggregates(data, degree)?;
    noisy_moments(&agg, eps, src, &mut None)
}

pub fn bezier_covariance(data: &Dataset, eps: PrivacyBudget, src: &mut NoiseSource) -> Result<Estimate> {
    Mechanism::BezierCovariance.run(data, eps, src)
}

pub fn bezier_variance(data: &Dataset, eps: PrivacyBudget, src: &mut NoiseSource) -> Result<Estimate> {
    Mechanism::BezierVariance.run(data, eps, src)
}

pub fn variance_via_covariance(data: &Dataset, eps: PrivacyBudget, src: &mut NoiseSource) -> Result<Estimate> {
    Mechanism::VarianceViaCovariance.run(data, eps, src)
}

pub fn transformed_variance(data: &Dataset, eps: PrivacyBudget, src: &mut NoiseSource) -> Result<Estimate> {
    Mechanism::TransformedVariance.run(data, eps, src)
}

pub fn general_statistic(
    data: &Dataset,
    statistic: &GeneralStatistic,
    eps: PrivacyBudget,
    src: &mut NoiseSource,
) -> Result<Estimate> {
    Mechanism::General(statistic.clone()).run(data, eps, src)
}
