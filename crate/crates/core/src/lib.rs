//! Differentially private moment estimation on `[0, 1]^d` under add-remove
//! neighbours, via Laplace noise on Bernstein-basis aggregates.

pub mod audit;
pub mod bernstein;
pub mod error;
pub mod harness;
pub mod mechanisms;
pub mod noise;
pub mod statistics;
pub mod theory;

pub use error::{Error, Result};
pub use mechanisms::{Estimate, GeneralStatistic, Mechanism, MechanismId, PrivacyBudget, Statistic};
pub use noise::NoiseSource;
pub use statistics::{ClipRange, Dataset};
