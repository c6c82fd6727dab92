use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::{Mechanism, MechanismId};
use crate::theory::first_order_normalized_mse;

/// Where benchmark datasets come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    /// i.i.d. `U[0, 1]` per coordinate.
    Uniform,
    /// i.i.d. `Beta(r/2, (1 − r)/2)` per coordinate, mean `r`.
    Beta { mean: f64 },
    /// `x ~ U[0, 1]`, `y = clip(x + U(−w, w))` with `w` tuned to correlation `rho`.
    Correlated { rho: f64 },
    /// Exactly `round(p·n)` records at the all-ones corner, the rest at the origin.
    TwoPoint { p: f64 },
    /// Loaded once from a file and reused across trials.
    Csv { path: PathBuf },
}

impl Default for Distribution {
    fn default() -> Self {
        Distribution::Uniform
    }
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Beta { mean } if !(mean > 0.0 && mean < 1.0) => Err(Error::config(
                format!("beta mean must lie in (0, 1), got {mean}"),
            )),
            Distribution::Correlated { rho } if !(-1.0..=1.0).contains(&rho) => Err(
                Error::config(format!("correlation must lie in [-1, 1], got {rho}")),
            ),
            Distribution::TwoPoint { p } if !(0.0..=1.0).contains(&p) => Err(Error::config(
                format!("two-point fraction must lie in [0, 1], got {p}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn is_synthetic(&self) -> bool {
        !matches!(self, Distribution::Csv { .. })
    }
}

fn parse_param(s: &str, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::config(format!("invalid {what} `{s}`")))
}

impl FromStr for Distribution {
    type Err = Error;

    /// `uniform`, `beta:<mean>`, `correlated:<rho>`, `two_point:<p>` or `csv:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let d = match (head, arg) {
            ("uniform", None) => Distribution::Uniform,
            ("beta", Some(a)) => Distribution::Beta { mean: parse_param(a, "beta mean")? },
            ("correlated", Some(a)) => Distribution::Correlated { rho: parse_param(a, "correlation")? },
            ("two_point", Some(a)) => Distribution::TwoPoint { p: parse_param(a, "fraction")? },
            ("csv", Some(a)) => Distribution::Csv { path: PathBuf::from(a) },
            _ => return Err(Error::config(format!("unknown distribution `{s}`"))),
        };
        d.validate()?;
        Ok(d)
    }
}

/// The quantity a benchmark measures error against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StatisticKind {
    Variance,
    Covariance,
    Correlation,
    Skewness,
    Kurtosis,
    CentralMoment { order: u32 },
    /// Unnormalized `Σ x^j` from a degree-`k` release.
    Moment { k: u32, j: u32 },
}

impl StatisticKind {
    /// Number of columns the statistic reads.
    pub fn dim(self) -> usize {
        match self {
            StatisticKind::Covariance | StatisticKind::Correlation => 2,
            _ => 1,
        }
    }

    /// The statistic an estimator targets; `None` for the parameterized ones.
    pub fn of_mechanism(id: MechanismId) -> Option<StatisticKind> {
        use MechanismId as M;
        Some(match id {
            M::SwapVariance
            | M::NaiveVariance
            | M::ImprovedVariance
            | M::BezierVariance
            | M::VarianceViaCovariance
            | M::TransformedVariance => StatisticKind::Variance,
            M::SwapCovariance | M::NaiveCovariance | M::ImprovedCovariance | M::BezierCovariance => {
                StatisticKind::Covariance
            }
            M::BezierCorrelation | M::ComposedCorrelation | M::NaiveCorrelation => {
                StatisticKind::Correlation
            }
            M::BezierSkewness => StatisticKind::Skewness,
            M::BezierKurtosis => StatisticKind::Kurtosis,
            M::BezierCentralMoment3 => StatisticKind::CentralMoment { order: 3 },
            M::BezierCentralMoment4 => StatisticKind::CentralMoment { order: 4 },
            M::BezierMoment | M::BezierGeneral => return None,
        })
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatisticKind::Variance => f.write_str("variance"),
            StatisticKind::Covariance => f.write_str("covariance"),
            StatisticKind::Correlation => f.write_str("correlation"),
            StatisticKind::Skewness => f.write_str("skewness"),
            StatisticKind::Kurtosis => f.write_str("kurtosis"),
            StatisticKind::CentralMoment { order } => write!(f, "central_moment:{order}"),
            StatisticKind::Moment { k, j } => write!(f, "moment:{k}:{j}"),
        }
    }
}

impl FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let int = |p: &str| {
            p.parse::<u32>()
                .map_err(|_| Error::config(format!("invalid integer `{p}` in statistic `{s}`")))
        };
        Ok(match parts.as_slice() {
            ["variance"] => StatisticKind::Variance,
            ["covariance"] => StatisticKind::Covariance,
            ["correlation"] => StatisticKind::Correlation,
            ["skewness"] => StatisticKind::Skewness,
            ["kurtosis"] => StatisticKind::Kurtosis,
            ["central_moment", o] => StatisticKind::CentralMoment { order: int(o)? },
            ["moment", k, j] => StatisticKind::Moment { k: int(k)?, j: int(j)? },
            _ => return Err(Error::config(format!("unknown statistic `{s}`"))),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    Seeded,
    /// All-zero noise; every estimator reduces to its exact statistic.
    Zero,
}

impl FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seeded" => Ok(NoiseMode::Seeded),
            "zero" => Ok(NoiseMode::Zero),
            _ => Err(Error::config(format!("unknown noise mode `{s}`"))),
        }
    }
}

fn default_n() -> usize {
    10_000
}

fn default_trials() -> usize {
    1_000
}

/// A benchmark run: every listed estimator at every budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mechanisms: Vec<MechanismId>,
    pub epsilons: Vec<f64>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub distribution: Distribution,
    /// Inferred from the estimators when absent; required for `bezier_moment`.
    #[serde(default)]
    pub statistic: Option<StatisticKind>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub noise: NoiseMode,
    /// Hold one dataset across trials. Defaults to on when every estimator
    /// has an instance-wise analytic prediction, off otherwise.
    #[serde(default)]
    pub fixed_data: Option<bool>,
    /// Clip out-of-range CSV cells into `[0, 1]` instead of rejecting them.
    #[serde(default)]
    pub clip_input: bool,
    /// Clip the swap-model estimators to the statistic's range.
    #[serde(default)]
    pub swap_clip: bool,
}

impl ExperimentConfig {
    pub fn new(mechanisms: Vec<MechanismId>, epsilons: Vec<f64>) -> Self {
        ExperimentConfig {
            mechanisms,
            epsilons,
            n: default_n(),
            trials: default_trials(),
            distribution: Distribution::Uniform,
            statistic: None,
            base_seed: 0,
            output_path: None,
            noise: NoiseMode::Seeded,
            fixed_data: None,
            clip_input: false,
            swap_clip: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))
    }

    /// Validates the configuration and builds the estimators.
    pub fn resolve(&self) -> Result<ResolvedExperiment> {
        if self.mechanisms.is_empty() {
            return Err(Error::config("no mechanisms given"));
        }
        if self.epsilons.is_empty() {
            return Err(Error::config("no epsilons given"));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(Error::config(format!("epsilon must be positive, got {e}")));
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.distribution.is_synthetic() && self.n == 0 {
            return Err(Error::config("n must be at least 1"));
        }
        self.distribution.validate()?;

        let statistic = match self.statistic {
            Some(s) => s,
            None => self
                .mechanisms
                .iter()
                .find_map(|&id| StatisticKind::of_mechanism(id))
                .ok_or_else(|| Error::config("statistic is required for these mechanisms"))?,
        };
        let mut mechanisms = Vec::with_capacity(self.mechanisms.len());
        for &id in &self.mechanisms {
            if mechanisms.iter().any(|m: &Mechanism| m.id() == id) {
                return Err(Error::config(format!("mechanism `{id}` listed twice")));
            }
            mechanisms.push(mechanism_for(id, statistic, self.swap_clip)?);
        }
        let fixed_data = self.fixed_data.unwrap_or_else(|| {
            let probe = crate::theory::DataProfile {
                n: 1,
                r_x: 0.5,
                v_x: 0.0,
                r_y: Some(0.5),
                v_y: Some(0.0),
                c: Some(0.0),
            };
            mechanisms
                .iter()
                .all(|m| first_order_normalized_mse(m, &probe, 1.0).is_some())
        });
        Ok(ResolvedExperiment {
            statistic,
            mechanisms,
            fixed_data,
        })
    }
}

/// A validated configuration.
#[derive(Clone, Debug)]
pub struct ResolvedExperiment {
    pub statistic: StatisticKind,
    pub mechanisms: Vec<Mechanism>,
    pub fixed_data: bool,
}

/// Builds the estimator for `id` measuring `statistic`.
pub fn mechanism_for(id: MechanismId, statistic: StatisticKind, swap_clip: bool) -> Result<Mechanism> {
    let mismatch = || {
        Error::config(format!(
            "mechanism `{id}` does not estimate {statistic}"
        ))
    };
    match id {
        MechanismId::BezierMoment => match statistic {
            StatisticKind::Moment { k, j } => Mechanism::moment(k, j).map_err(|e| Error::config(e.to_string())),
            _ => Err(mismatch()),
        },
        MechanismId::BezierGeneral => Err(Error::config(
            "bezier_general needs a post-processing function; use the library API",
        )),
        MechanismId::BezierSkewness | MechanismId::BezierKurtosis => {
            if StatisticKind::of_mechanism(id) != Some(statistic) {
                return Err(mismatch());
            }
            Mechanism::from_id(id)
        }
        _ => {
            if StatisticKind::of_mechanism(id) != Some(statistic) {
                return Err(mismatch());
            }
            Ok(match Mechanism::from_id(id)? {
                Mechanism::Swap { statistic, .. } => Mechanism::Swap {
                    statistic,
                    clip: swap_clip,
                },
                m => m,
            })
        }
    }
}
