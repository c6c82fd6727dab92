//! Exact (non-private) statistics of datasets in `[0, 1]^d`.
//!
//! Sums use pairwise summation. Variance and covariance follow the raw-moment
//! form `Σxy/n − (Σx/n)(Σy/n)`; the private estimators reconstruct exactly
//! that expression from their noisy aggregates, so with zero noise the two
//! agree bit for bit.

use crate::bernstein::{powi_u, BernsteinDegree, MultiIndex};
use crate::error::{Error, Result};

/// Ordered records of `dim` coordinates, each in `[0, 1]`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    values: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from row-major values, rejecting anything outside `[0, 1]`.
    pub fn from_flat(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("dataset dimension must be at least 1"));
        }
        if values.len() % dim != 0 {
            return Err(Error::domain(format!(
                "{} values do not form records of dimension {dim}",
                values.len()
            )));
        }
        if let Some((idx, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::domain(format!(
                "record {} coordinate {} = {v} is outside [0, 1]",
                idx / dim,
                idx % dim
            )));
        }
        Ok(Dataset { dim, values })
    }

    pub fn from_records(dim: usize, records: &[Vec<f64>]) -> Result<Self> {
        let mut values = Vec::with_capacity(records.len() * dim);
        for (i, r) in records.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::domain(format!(
                    "record {i} has {} coordinates, expected {dim}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Dataset::from_flat(dim, values)
    }

    pub fn univariate(xs: Vec<f64>) -> Result<Self> {
        Dataset::from_flat(1, xs)
    }

    pub fn bivariate(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::domain("columns have different lengths"));
        }
        let values = xs.iter().zip(ys).flat_map(|(&x, &y)| [x, y]).collect();
        Dataset::from_flat(2, values)
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Dataset::from_flat(dim, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn record(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn records(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.records().map(|r| r[j]).collect()
    }

    /// The dataset `[x, x]` built from column `j`.
    pub fn duplicated_column(&self, j: usize) -> Dataset {
        let values = self.records().flat_map(|r| [r[j], r[j]]).collect();
        Dataset { dim: 2, values }
    }

    /// The first `dim` columns.
    pub fn leading_columns(&self, dim: usize) -> Result<Dataset> {
        if dim == 0 || dim > self.dim {
            return Err(Error::domain(format!(
                "cannot take {dim} of {} columns",
                self.dim
            )));
        }
        if dim == self.dim {
            return Ok(self.clone());
        }
        let values = self.records().flat_map(|r| r[..dim].iter().copied()).collect();
        Ok(Dataset { dim, values })
    }

    /// Copy with one more record appended.
    pub fn with_record(&self, record: &[f64]) -> Result<Dataset> {
        if record.len() != self.dim {
            return Err(Error::domain("record dimension mismatch"));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(record);
        Dataset::from_flat(self.dim, values)
    }

    /// Copy with record `i` replaced.
    pub fn with_replaced(&self, i: usize, record: &[f64]) -> Result<Dataset> {
        if record.len() != self.dim || i >= self.len() {
            return Err(Error::domain("replacement out of range"));
        }
        let mut values = self.values.clone();
        values[i * self.dim..(i + 1) * self.dim].copy_from_slice(record);
        Dataset::from_flat(self.dim, values)
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClipRange {
    lo: f64,
    hi: f64,
}

impl ClipRange {
    pub const VARIANCE: ClipRange = ClipRange { lo: 0.0, hi: 0.25 };
    pub const COVARIANCE: ClipRange = ClipRange { lo: -0.25, hi: 0.25 };
    pub const CORRELATION: ClipRange = ClipRange { lo: -1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::domain(format!("invalid clip range [{lo}, {hi}]")));
        }
        Ok(ClipRange { lo, hi })
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn midpoint(self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        self.lo.max(self.hi.min(x))
    }

    pub fn contains(self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }
}

/// `max(lo, min(hi, x))`.
pub fn clip(x: f64, lo: f64, hi: f64) -> Result<f64> {
    Ok(ClipRange::new(lo, hi)?.apply(x))
}

const PAIRWISE_BLOCK: usize = 32;

/// Pairwise (tree) sum of `term(i)` for `i` in `0..n`.
pub fn pairwise_sum_by(n: usize, term: &impl Fn(usize) -> f64) -> f64 {
    fn go(lo: usize, hi: usize, term: &impl Fn(usize) -> f64) -> f64 {
        if hi - lo <= PAIRWISE_BLOCK {
            let mut s = 0.0;
            for i in lo..hi {
                s += term(i);
            }
            s
        } else {
            let mid = lo + (hi - lo) / 2;
            go(lo, mid, term) + go(mid, hi, term)
        }
    }
    go(0, n, term)
}

pub fn pairwise_sum(values: &[f64]) -> f64 {
    pairwise_sum_by(values.len(), &|i| values[i])
}

/// Sum over records of `Π_j x_j^{α_j}`.
pub fn mixed_moment_sum(data: &Dataset, alpha: &[u32]) -> f64 {
    pairwise_sum_by(data.len(), &|i| {
        let rec = data.record(i);
        let mut p = 1.0;
        for (&x, &a) in rec.iter().zip(alpha) {
            p *= powi_u(x, a);
        }
        p
    })
}

/// `(Σ x⁰, Σ x¹, …, Σ xᵏ)` of the first column; entry 0 is `n`.
pub fn moments_unnormalized(data: &Dataset, k: u32) -> Vec<f64> {
    (0..=k)
        .map(|j| pairwise_sum_by(data.len(), &|i| powi_u(data.record(i)[0], j)))
        .collect()
}

/// Unnormalized mixed moments up to degree `k` per coordinate, in
/// [`MultiIndex`] flattening order. Entry `(0, …, 0)` is `n`.
pub fn mixed_moments_unnormalized(data: &Dataset, k: BernsteinDegree) -> Vec<f64> {
    MultiIndex::all(k, data.dim())
        .map(|alpha| mixed_moment_sum(data, alpha.components()))
        .collect()
}

/// `s2/n − (s1/n)²`, clamped to `[0, 1/4]`.
#[inline]
pub fn variance_from_sums(n: f64, s1: f64, s2: f64) -> f64 {
    let mean = s1 / n;
    ClipRange::VARIANCE.apply(s2 / n - mean * mean)
}

/// `sxy/n − (sx/n)(sy/n)`, clamped to `[−1/4, 1/4]`.
#[inline]
pub fn covariance_from_sums(n: f64, sx: f64, sy: f64, sxy: f64) -> f64 {
    ClipRange::COVARIANCE.apply(sxy / n - (sx / n) * (sy / n))
}

/// Pearson correlation from raw sums; `None` when a marginal variance
/// product is not strictly positive.
pub fn correlation_from_sums(n: f64, sx: f64, sy: f64, sxx: f64, syy: f64, sxy: f64) -> Option<f64> {
    let (mx, my) = (sx / n, sy / n);
    let vx = sxx / n - mx * mx;
    let vy = syy / n - my * my;
    let prod = vx * vy;
    if !(prod > 0.0) || vx <= 0.0 {
        return None;
    }
    Some((sxy / n - mx * my) / prod.sqrt())
}

fn require_nonempty(data: &Dataset, what: &str) -> Result<()> {
    if data.is_empty() {
        return Err(Error::UndefinedStatistic(format!("{what} of an empty dataset")));
    }
    Ok(())
}

fn require_dim(data: &Dataset, at_least: usize, what: &str) -> Result<()> {
    if data.dim() < at_least {
        return Err(Error::domain(format!(
            "{what} needs {at_least} columns, dataset has {}",
            data.dim()
        )));
    }
    Ok(())
}

/// Raw first and second moment sums of column 0: `(n, Σx, Σx²)`.
pub fn univariate_sums(data: &Dataset) -> (f64, f64, f64) {
    (
        data.len() as f64,
        mixed_moment_sum(data, &[1]),
        mixed_moment_sum(data, &[2]),
    )
}

/// `(n, Σx, Σy, Σxy)` over the first two columns.
pub fn bivariate_sums(data: &Dataset) -> (f64, f64, f64, f64) {
    (
        data.len() as f64,
        mixed_moment_sum(data, &[1, 0]),
        mixed_moment_sum(data, &[0, 1]),
        mixed_moment_sum(data, &[1, 1]),
    )
}

pub fn variance_exact(data: &Dataset) -> Result<f64> {
    require_nonempty(data, "variance")?;
    let (n, s1, s2) = univariate_sums(data);
    Ok(variance_from_sums(n, s1, s2))
}

pub fn covariance_exact(data: &Dataset) -> Result<f64> {
    require_dim(data, 2, "covariance")?;
    require_nonempty(data, "covariance")?;
    let (n, sx, sy, sxy) = bivariate_sums(data);
    Ok(covariance_from_sums(n, sx, sy, sxy))
}

/// `Σ (x_i − x̄)²`, two-pass; zero for an empty dataset.
pub fn unnormalized_var(data: &Dataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let n = data.len();
    let mean = pairwise_sum_by(n, &|i| data.record(i)[0]) / n as f64;
    pairwise_sum_by(n, &|i| {
        let d = data.record(i)[0] - mean;
        d * d
    })
}

/// `Σ (x_i − x̄)(y_i − ȳ)`, two-pass; zero for an empty dataset.
pub fn unnormalized_cov(data: &Dataset) -> Result<f64> {
    require_dim(data, 2, "covariance")?;
    if data.is_empty() {
        return Ok(0.0);
    }
    let n = data.len();
    let mx = pairwise_sum_by(n, &|i| data.record(i)[0]) / n as f64;
    let my = pairwise_sum_by(n, &|i| data.record(i)[1]) / n as f64;
    Ok(pairwise_sum_by(n, &|i| {
        let r = data.record(i);
        (r[0] - mx) * (r[1] - my)
    }))
}

/// Raw sums `(n, Σx, Σy, Σx², Σy², Σxy)` of the first two columns.
pub fn correlation_sums(data: &Dataset) -> (f64, f64, f64, f64, f64, f64) {
    (
        data.len() as f64,
        mixed_moment_sum(data, &[1, 0]),
        mixed_moment_sum(data, &[0, 1]),
        mixed_moment_sum(data, &[2, 0]),
        mixed_moment_sum(data, &[0, 2]),
        mixed_moment_sum(data, &[1, 1]),
    )
}

pub fn correlation_exact(data: &Dataset) -> Result<f64> {
    require_dim(data, 2, "correlation")?;
    require_nonempty(data, "correlation")?;
    if unnormalized_var(data) <= 0.0 || unnormalized_var(&data.duplicated_column(1)) <= 0.0 {
        return Err(Error::UndefinedStatistic(
            "correlation with a constant column".into(),
        ));
    }
    let (n, sx, sy, sxx, syy, sxy) = correlation_sums(data);
    correlation_from_sums(n, sx, sy, sxx, syy, sxy)
        .map(|c| c.clamp(-1.0, 1.0))
        .ok_or_else(|| Error::UndefinedStatistic("correlation with a constant column".into()))
}

/// Central moment of order 2, 3 or 4 from raw sums `s[j] = Σ x^j`.
pub fn central_moment_from_sums(s: &[f64], order: u32) -> Option<f64> {
    let n = *s.first()?;
    if s.len() <= order as usize {
        return None;
    }
    let m = s[1] / n;
    let e = |j: usize| s[j] / n;
    Some(match order {
        2 => e(2) - m * m,
        3 => e(3) - 3.0 * m * e(2) + 2.0 * m * m * m,
        4 => e(4) - 4.0 * m * e(3) + 6.0 * m * m * e(2) - 3.0 * m * m * m * m,
        _ => return None,
    })
}

/// Standardized moment of order 3 (skewness) or 4 (kurtosis) from raw sums.
pub fn standardized_moment_from_sums(s: &[f64], order: u32) -> Option<f64> {
    let var = central_moment_from_sums(s, 2)?;
    if !(var > 0.0) {
        return None;
    }
    Some(central_moment_from_sums(s, order)? / var.powf(order as f64 / 2.0))
}

/// `(1/n) Σ ((x_i − x̄)/σ)^order` for order 3 or 4.
pub fn standardized_moment(data: &Dataset, order: u32) -> Result<f64> {
    if order != 3 && order != 4 {
        return Err(Error::domain(format!(
            "standardized moment order must be 3 or 4, got {order}"
        )));
    }
    require_nonempty(data, "standardized moment")?;
    if unnormalized_var(data) <= 0.0 {
        return Err(Error::UndefinedStatistic("zero variance".into()));
    }
    let s = moments_unnormalized(data, order);
    standardized_moment_from_sums(&s, order)
        .ok_or_else(|| Error::UndefinedStatistic("zero variance".into()))
}

/// Feasible interval of `r_xy = mean(x·y)` given the marginal means.
pub fn feasible_rxy_bounds(r_x: f64, r_y: f64) -> (f64, f64) {
    ((r_x + r_y - 1.0).max(0.0), r_x.min(r_y))
}
