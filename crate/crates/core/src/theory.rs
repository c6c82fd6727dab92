//! Closed-form error quantities: the minimax lower bound, the moment-release
//! MSE, the instance-wise variance/covariance constants and the worst-case
//! constants of every estimator.

use std::collections::BTreeMap;

use crate::bernstein::{binomial, BernsteinDegree};
use crate::error::{Error, Result};
use crate::mechanisms::{Mechanism, MechanismId, Statistic};
use crate::statistics::{feasible_rxy_bounds, Dataset};

/// Slack on feasibility checks for empirically measured `(r, v, c)`.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// `σ(ε)²`, the minimax constant of `ε²`-free normalized error for sums,
/// variances and covariances:
///
/// `(2^{−2/3} e^{−2ε/3} (1 + e^{−ε})^{2/3} + e^{−ε}) / (1 − e^{−ε})²`.
pub fn sigma_squared(eps: f64) -> Result<f64> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::domain(format!("epsilon must be positive, got {eps}")));
    }
    if eps < 1e-6 {
        return Ok(2.0 / (eps * eps));
    }
    let b = (-eps).exp();
    let one_minus_b = -(-eps).exp_m1();
    let num = 2f64.powf(-2.0 / 3.0) * (-2.0 * eps / 3.0).exp() * (1.0 + b).powf(2.0 / 3.0) + b;
    Ok(num / (one_minus_b * one_minus_b))
}

/// `σ(ε)`; tends to `√2/ε` as `ε → 0`.
pub fn sigma_lower_bound(eps: f64) -> Result<f64> {
    if eps.is_finite() && eps > 0.0 && eps < 1e-6 {
        return Ok(std::f64::consts::SQRT_2 / eps);
    }
    Ok(sigma_squared(eps)?.sqrt())
}

/// Mean `r` and variance `v` of a univariate dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InstanceProfile {
    r: f64,
    v: f64,
}

impl InstanceProfile {
    /// Accepts `0 ≤ r ≤ 1` and `0 ≤ v ≤ r(1 − r)`, up to [`FEASIBILITY_TOL`].
    pub fn new(r: f64, v: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::domain(format!("mean r = {r} outside [0, 1]")));
        }
        let max_v = r * (1.0 - r);
        if !(v >= -FEASIBILITY_TOL && v <= max_v + FEASIBILITY_TOL) {
            return Err(Error::domain(format!(
                "variance v = {v} infeasible for r = {r}; need 0 <= v <= {max_v}"
            )));
        }
        Ok(InstanceProfile { r, v })
    }

    pub fn r(self) -> f64 {
        self.r
    }

    pub fn v(self) -> f64 {
        self.v
    }
}

/// Leading coefficients of `2/ε²` in the normalized error of the three
/// add-remove variance estimators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InstanceConstants {
    /// Bézier variance.
    pub c_b: f64,
    /// Variance via Bézier covariance.
    pub c_c: f64,
    /// Transformed variance.
    pub c_u: f64,
}

pub fn instance_constants(p: InstanceProfile) -> InstanceConstants {
    let (r, v) = (p.r, p.v);
    let r2 = r * r;
    let c_b = 3.0 * v * v - 2.0 * (3.0 * r2 - 3.0 * r + 1.0) * v
        + (3.0 * r2 * r2 - 6.0 * r2 * r + 7.0 * r2 - 4.0 * r + 1.0);
    let q = 1.0 - 2.0 * r + 2.0 * r2;
    let c_c = q * q - 2.0 * v * (1.0 - 2.0 * r) * (1.0 - 2.0 * r) + 4.0 * v * v;
    let c_u = v * v + (1.0 - v) * (1.0 - v);
    InstanceConstants { c_b, c_c, c_u }
}

/// `C(r_x, r_y, c)`, the leading coefficient of `2/ε²` for Bézier covariance.
pub fn covariance_instance_constant(r_x: f64, r_y: f64, c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r_x) || !(0.0..=1.0).contains(&r_y) {
        return Err(Error::domain(format!("means ({r_x}, {r_y}) outside [0, 1]")));
    }
    let (lo, hi) = feasible_rxy_bounds(r_x, r_y);
    let r_xy = c + r_x * r_y;
    if !(r_xy >= lo - FEASIBILITY_TOL && r_xy <= hi + FEASIBILITY_TOL) {
        return Err(Error::domain(format!(
            "covariance {c} infeasible for means ({r_x}, {r_y}); mean product must lie in [{lo}, {hi}]"
        )));
    }
    let qx = 1.0 - 2.0 * r_x + 2.0 * r_x * r_x;
    let qy = 1.0 - 2.0 * r_y + 2.0 * r_y * r_y;
    Ok(qx * qy - 2.0 * c * (1.0 - 2.0 * r_x) * (1.0 - 2.0 * r_y) + 4.0 * c * c)
}

/// MSE of the `j`-th released moment of a degree-`k` univariate release:
/// `(2/ε²) Σ_{l=j}^{k} (C(l, j)/C(k, j))²`.
pub fn moment_release_mse(k: u32, j: u32, eps: f64) -> Result<f64> {
    BernsteinDegree::new(k)?;
    if j > k {
        return Err(Error::domain(format!("moment index {j} exceeds degree {k}")));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::domain(format!("epsilon must be positive, got {eps}")));
    }
    let ckj = binomial(k, j)? as f64;
    let mut sum = 0.0;
    for l in j..=k {
        let a = binomial(l, j)? as f64 / ckj;
        sum += a * a;
    }
    Ok(2.0 / (eps * eps) * sum)
}

/// Worst-case leading constants of `ε²·R` for the named estimator families.
pub fn worst_case_table() -> BTreeMap<&'static str, f64> {
    BTreeMap::from([
        ("swap", 2.0),
        ("naive_cov", 128.0),
        ("naive_var", 108.0),
        ("improved", 8.5),
        ("bezier_cov", 2.0),
        ("bezier_var", 2.0),
        ("transformed_var", 2.0),
    ])
}

/// Worst-case constant of a specific estimator, where one is known.
pub fn worst_case_constant(id: MechanismId) -> Option<f64> {
    use MechanismId as M;
    let key = match id {
        M::SwapVariance | M::SwapCovariance => "swap",
        M::NaiveCovariance => "naive_cov",
        M::NaiveVariance => "naive_var",
        M::ImprovedVariance | M::ImprovedCovariance => "improved",
        M::BezierCovariance | M::VarianceViaCovariance => "bezier_cov",
        M::BezierVariance => "bezier_var",
        M::TransformedVariance => "transformed_var",
        _ => return None,
    };
    worst_case_table().get(key).copied()
}

/// Measured means, variances and covariance of the first one or two columns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataProfile {
    pub n: usize,
    pub r_x: f64,
    pub v_x: f64,
    pub r_y: Option<f64>,
    pub v_y: Option<f64>,
    pub c: Option<f64>,
}

impl DataProfile {
    pub fn measure(data: &Dataset) -> Result<Self> {
        use crate::statistics::{covariance_exact, variance_exact};
        if data.is_empty() {
            return Err(Error::UndefinedStatistic("profile of an empty dataset".into()));
        }
        let n = data.len();
        let mean = |j: usize| crate::statistics::pairwise_sum(&data.column(j)) / n as f64;
        let x = Dataset::univariate(data.column(0))?;
        let (r_y, v_y, c) = if data.dim() >= 2 {
            let y = Dataset::univariate(data.column(1))?;
            (Some(mean(1)), Some(variance_exact(&y)?), Some(covariance_exact(data)?))
        } else {
            (None, None, None)
        };
        Ok(DataProfile {
            n,
            r_x: mean(0),
            v_x: variance_exact(&x)?,
            r_y,
            v_y,
            c,
        })
    }
}

/// First-order normalized MSE `n²·E[(est − stat)²]` of a mechanism on a
/// dataset with the given profile, ignoring clipping. `None` when no closed
/// form exists.
pub fn first_order_normalized_mse(mechanism: &Mechanism, p: &DataProfile, eps: f64) -> Option<f64> {
    if !(eps.is_finite() && eps > 0.0) {
        return None;
    }
    let unit = 2.0 / (eps * eps);
    let (rx, vx) = (p.r_x, p.v_x);
    let bivariate = || Some((p.r_y?, p.c?));
    let constant = match mechanism {
        Mechanism::Swap { .. } => 1.0,
        // each raw sum carries Lap(3/ε) or Lap(4/ε)
        Mechanism::Naive(Statistic::Variance) => {
            let g = [rx * rx - vx, -2.0 * rx, 1.0];
            9.0 * g.iter().map(|a| a * a).sum::<f64>()
        }
        Mechanism::Naive(Statistic::Covariance) => {
            let (ry, c) = bivariate()?;
            let g = [rx * ry - c, -ry, -rx, 1.0];
            16.0 * g.iter().map(|a| a * a).sum::<f64>()
        }
        Mechanism::Improved(s) => {
            let stat = match s {
                Statistic::Variance => vx,
                Statistic::Covariance => bivariate()?.1,
            };
            4.0 * (1.0 + stat * stat)
        }
        Mechanism::BezierVariance => instance_constants(InstanceProfile::new(rx, vx).ok()?).c_b,
        Mechanism::VarianceViaCovariance => {
            instance_constants(InstanceProfile::new(rx, vx).ok()?).c_c
        }
        Mechanism::TransformedVariance => {
            instance_constants(InstanceProfile::new(rx, vx).ok()?).c_u
        }
        Mechanism::BezierCovariance => {
            let (ry, c) = bivariate()?;
            covariance_instance_constant(rx, ry, c).ok()?
        }
        Mechanism::Moment { degree, index } => {
            let n = p.n as f64;
            return Some(n * n * moment_release_mse(degree.get(), *index, eps).ok()?);
        }
        _ => return None,
    };
    Some(unit * constant)
}
