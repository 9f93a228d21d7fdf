//! Statistical machinery: normal and t numerics, the Welch t-test, the
//! difference-of-means (DoM) series, the Gaussian overlapping coefficient and
//! sample-size planning with a Monte-Carlo verification oracle.

mod dom;
mod normal;
mod ovl;
mod power;
mod special;
mod summary;
mod ttest;

pub use dom::{dom_series, dom_series_against_model, first_crossing, DomPoint};
pub use normal::{normal_cdf, normal_pdf, normal_quantile};
pub use ovl::{ovl, ovl_by_integration};
pub use power::{
    lehr_sample_size, mc_power_oracle, normal_approx_sample_size, required_sample_size,
    two_sample_power,
};
pub use special::{
    beta_reg, noncentral_t_cdf, noncentral_t_sf, students_t_cdf, students_t_quantile,
    students_t_sf,
};
pub use summary::{PowerSpec, SampleSummary, TimingDistribution};
pub use ttest::{welch_df, welch_t};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("probability {0} is outside the open interval (0, 1)")]
    InvalidProbability(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("need at least {needed} observations, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("t statistic is indeterminate: both samples have zero variance and equal means")]
    Indeterminate,
    #[error("effect size must be positive, got {0}")]
    NonPositiveEffect(f64),
}
