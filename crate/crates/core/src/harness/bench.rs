use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{mechanism_for, Distribution, ExperimentConfig, NoiseMode, StatisticKind};
use super::data::{generate_dataset, load_csv};
use crate::error::{Error, Result};
use crate::mechanisms::{Estimate, Mechanism, MechanismId, PrivacyBudget};
use crate::noise::{derive_seed, derive_substream, NoiseSource};
use crate::statistics::{
    central_moment_from_sums, correlation_exact, covariance_exact, moments_unnormalized, pairwise_sum,
    standardized_moment, variance_exact, Dataset,
};
use crate::theory::{first_order_normalized_mse, DataProfile};

/// Worker-count override; `0` or unset means one worker per core.
pub const THREADS_ENV: &str = "BEZIER_DP_THREADS";

/// Substream channel reserved for dataset generation.
pub const DATA_CHANNEL: u64 = u64::MAX;

/// One (mechanism, ε) cell of a benchmark.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub mechanism: String,
    pub epsilon: f64,
    pub n: usize,
    pub trials: usize,
    pub mse: f64,
    pub normalized_mse: f64,
    pub std_error: f64,
    /// First-order prediction of `normalized_mse`, where a closed form exists.
    pub analytic_prediction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkReport {
    pub config: ExperimentConfig,
    pub fixed_data: bool,
    pub rows: Vec<ReportRow>,
}

impl BenchmarkReport {
    pub fn row(&self, id: MechanismId, eps: f64) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.mechanism == id.name() && r.epsilon == eps)
    }

    /// Report rows as CSV, columns in fixed order.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::data(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::data(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes the CSV report and its JSON config sidecar; returns the sidecar path.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        std::fs::write(path, self.to_csv()?)?;
        let sidecar = path.with_extension("json");
        let mut cfg = serde_json::to_value(&self.config).map_err(|e| Error::data(e.to_string()))?;
        cfg["fixed_data"] = serde_json::Value::Bool(self.fixed_data);
        let text = serde_json::to_string_pretty(&cfg).map_err(|e| Error::data(e.to_string()))?;
        std::fs::write(&sidecar, text + "\n")?;
        Ok(sidecar)
    }
}

/// Exact value of `statistic` on `data`, the reference for squared errors.
pub fn exact_statistic(statistic: StatisticKind, data: &Dataset) -> Result<f64> {
    match statistic {
        StatisticKind::Variance => variance_exact(data),
        StatisticKind::Covariance => covariance_exact(data),
        StatisticKind::Correlation => correlation_exact(data),
        StatisticKind::Skewness => standardized_moment(data, 3),
        StatisticKind::Kurtosis => standardized_moment(data, 4),
        StatisticKind::CentralMoment { order } => {
            if data.is_empty() {
                return Err(Error::UndefinedStatistic("central moment of an empty dataset".into()));
            }
            central_moment_from_sums(&moments_unnormalized(data, order), order)
                .ok_or_else(|| Error::domain(format!("central moment order {order} unsupported")))
        }
        StatisticKind::Moment { j, .. } => Ok(moments_unnormalized(data, j)[j as usize]),
    }
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let threads = match threads {
        Some(t) => t,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("{THREADS_ENV} must be an integer, got `{v}`")))?,
            Err(_) => 0,
        },
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

/// Substream channel of a mechanism: its position in [`MechanismId::ALL`], so
/// an estimator's noise does not depend on what else a config lists.
pub fn channel(id: MechanismId) -> u64 {
    MechanismId::ALL.iter().position(|&m| m == id).expect("listed") as u64
}

enum DataPlan {
    Fixed(Dataset),
    Fresh { dist: Distribution, n: usize, dim: usize, seed: u64 },
}

impl DataPlan {
    fn dataset(&self, trial: u64) -> Result<std::borrow::Cow<'_, Dataset>> {
        match self {
            DataPlan::Fixed(d) => Ok(std::borrow::Cow::Borrowed(d)),
            DataPlan::Fresh { dist, n, dim, seed } => Ok(std::borrow::Cow::Owned(generate_dataset(
                dist,
                *n,
                *dim,
                derive_seed(*seed, trial, DATA_CHANNEL),
            )?)),
        }
    }

    fn size(&self) -> usize {
        match self {
            DataPlan::Fixed(d) => d.len(),
            DataPlan::Fresh { n, .. } => *n,
        }
    }
}

fn noise_for(mode: NoiseMode, seed: u64, trial: u64, id: MechanismId) -> NoiseSource {
    match mode {
        NoiseMode::Seeded => derive_substream(seed, trial, channel(id)),
        NoiseMode::Zero => NoiseSource::zero(),
    }
}

struct Trial {
    squared_error: f64,
    prediction: Option<f64>,
}

/// A configured benchmark, ready to run cells.
pub struct Benchmark {
    config: ExperimentConfig,
    statistic: StatisticKind,
    mechanisms: Vec<Mechanism>,
    plan: DataPlan,
    pool: rayon::ThreadPool,
}

impl Benchmark {
    /// Validates `config`, loads or generates fixed data, and starts a worker
    /// pool of `threads` (or the environment override when `None`).
    pub fn new(config: &ExperimentConfig, threads: Option<usize>) -> Result<Self> {
        let resolved = config.resolve()?;
        let dim = resolved.statistic.dim();
        let plan = match &config.distribution {
            Distribution::Csv { path } => {
                let data = load_csv(path, config.clip_input)?;
                if data.dim() < dim {
                    return Err(Error::config(format!(
                        "{} needs {dim} column(s), {} has {}",
                        resolved.statistic,
                        path.display(),
                        data.dim()
                    )));
                }
                DataPlan::Fixed(data.leading_columns(dim)?)
            }
            dist if resolved.fixed_data => DataPlan::Fixed(generate_dataset(
                dist,
                config.n,
                dim,
                derive_seed(config.base_seed, 0, DATA_CHANNEL),
            )?),
            dist => DataPlan::Fresh {
                dist: dist.clone(),
                n: config.n,
                dim,
                seed: config.base_seed,
            },
        };
        Ok(Benchmark {
            config: config.clone(),
            statistic: resolved.statistic,
            mechanisms: resolved.mechanisms,
            plan,
            pool: thread_pool(threads)?,
        })
    }

    pub fn fixed_data(&self) -> bool {
        matches!(self.plan, DataPlan::Fixed(_))
    }

    /// The held dataset in fixed-data mode.
    pub fn dataset(&self) -> Option<&Dataset> {
        match &self.plan {
            DataPlan::Fixed(d) => Some(d),
            DataPlan::Fresh { .. } => None,
        }
    }

    fn mechanism(&self, id: MechanismId) -> Result<&Mechanism> {
        self.mechanisms
            .iter()
            .find(|m| m.id() == id)
            .ok_or_else(|| Error::config(format!("mechanism `{id}` is not configured")))
    }

    fn run_trials(&self, mechanism: &Mechanism, eps: f64) -> Result<Vec<Trial>> {
        let budget = PrivacyBudget::new(eps).map_err(|e| Error::config(e.to_string()))?;
        let id = mechanism.id();
        let (mode, seed) = (self.config.noise, self.config.base_seed);
        let trials = self.config.trials as u64;
        self.pool.install(|| match &self.plan {
            DataPlan::Fixed(data) => {
                let prepared = mechanism.prepare(data)?;
                let exact = exact_statistic(self.statistic, data)?;
                let prediction = DataProfile::measure(data)
                    .ok()
                    .and_then(|p| first_order_normalized_mse(mechanism, &p, eps));
                (0..trials)
                    .into_par_iter()
                    .map(|t| {
                        let mut src = noise_for(mode, seed, t, id);
                        let est = prepared.release_value(budget, &mut src)?;
                        Ok(Trial {
                            squared_error: (est - exact) * (est - exact),
                            prediction,
                        })
                    })
                    .collect()
            }
            plan @ DataPlan::Fresh { .. } => (0..trials)
                .into_par_iter()
                .map(|t| {
                    let data = plan.dataset(t)?;
                    let exact = exact_statistic(self.statistic, &data)?;
                    let mut src = noise_for(mode, seed, t, id);
                    let est = mechanism.prepare(&data)?.release_value(budget, &mut src)?;
                    let prediction = DataProfile::measure(&data)
                        .ok()
                        .and_then(|p| first_order_normalized_mse(mechanism, &p, eps));
                    Ok(Trial {
                        squared_error: (est - exact) * (est - exact),
                        prediction,
                    })
                })
                .collect(),
        })
    }

    /// Squared error of every trial, in trial order.
    pub fn squared_errors(&self, id: MechanismId, eps: f64) -> Result<Vec<f64>> {
        let m = self.mechanism(id)?;
        Ok(self.run_trials(m, eps)?.into_iter().map(|t| t.squared_error).collect())
    }

    /// Aggregates one (mechanism, ε) cell.
    pub fn cell(&self, id: MechanismId, eps: f64) -> Result<ReportRow> {
        let m = self.mechanism(id)?;
        let trials = self.run_trials(m, eps)?;
        let count = trials.len();
        let errors: Vec<f64> = trials.iter().map(|t| t.squared_error).collect();
        let mse = pairwise_sum(&errors) / count as f64;
        let std_error = if count > 1 {
            let dev: Vec<f64> = errors.iter().map(|e| (e - mse) * (e - mse)).collect();
            (pairwise_sum(&dev) / (count - 1) as f64).sqrt() / (count as f64).sqrt()
        } else {
            0.0
        };
        let predictions: Option<Vec<f64>> = trials.iter().map(|t| t.prediction).collect();
        let analytic_prediction = predictions.map(|p| pairwise_sum(&p) / count as f64);
        let n = self.plan.size();
        Ok(ReportRow {
            mechanism: id.name().to_string(),
            epsilon: eps,
            n,
            trials: count,
            mse,
            normalized_mse: normalized(n, mse),
            std_error,
            analytic_prediction,
        })
    }

    pub fn run(&self) -> Result<BenchmarkReport> {
        let mut rows = Vec::new();
        for m in &self.mechanisms {
            for &eps in &self.config.epsilons {
                rows.push(self.cell(m.id(), eps)?);
            }
        }
        Ok(BenchmarkReport {
            config: self.config.clone(),
            fixed_data: self.fixed_data(),
            rows,
        })
    }
}

/// `n²·mse`.
pub fn normalized(n: usize, mse: f64) -> f64 {
    let n = n as f64;
    n * n * mse
}

/// Runs every (mechanism, ε) cell of `config`.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<BenchmarkReport> {
    Benchmark::new(config, None)?.run()
}

/// Options of a single private release on a CSV file.
#[derive(Clone, Debug)]
pub struct EstimateRequest {
    pub path: PathBuf,
    pub mechanism: MechanismId,
    /// Needed for `bezier_moment`; otherwise inferred.
    pub statistic: Option<StatisticKind>,
    pub epsilon: f64,
    pub seed: u64,
    pub noise: NoiseMode,
    pub clip_input: bool,
    pub swap_clip: bool,
}

/// One private release on a CSV file.
pub fn run_estimate(req: &EstimateRequest) -> Result<Estimate> {
    let statistic = match req.statistic.or_else(|| StatisticKind::of_mechanism(req.mechanism)) {
        Some(s) => s,
        None => return Err(Error::config(format!("mechanism `{}` needs a statistic", req.mechanism))),
    };
    let mechanism = mechanism_for(req.mechanism, statistic, req.swap_clip)?;
    let eps = PrivacyBudget::new(req.epsilon).map_err(|e| Error::config(e.to_string()))?;
    let data = load_csv(&req.path, req.clip_input)?;
    if data.dim() < statistic.dim() {
        return Err(Error::config(format!(
            "`{}` needs {} column(s), input has {}",
            req.mechanism,
            statistic.dim(),
            data.dim()
        )));
    }
    let data = data.leading_columns(statistic.dim())?;
    let mut src = match req.noise {
        NoiseMode::Seeded => NoiseSource::seeded(req.seed),
        NoiseMode::Zero => NoiseSource::zero(),
    };
    mechanism.run(&data, eps, &mut src)
}
