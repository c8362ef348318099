//! Estimators of distributional functionals from particle samples.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

mod chaos;
mod diagnostics;
mod entropy;
mod fisher;
pub mod kdtree;
mod moments;
mod pairwise;
mod stats;
mod wasserstein;

pub use chaos::{chaos_covariance, chaos_covariance_paired};
pub use diagnostics::{diagnose, DiagnosticParams, DiagnosticsRecord, W2Reference};
pub use entropy::{entropy_knn, jitter_duplicates};
pub use fisher::{fisher_estimate, fisher_estimate_grouped, FisherMethod};
pub use moments::{moments, Moments};
pub use pairwise::pairwise_singular_moment;
pub use stats::{kolmogorov_survival, ks_two_sample, KsResult};
pub use wasserstein::{assignment, w2_distance, W2Method};

/// A point estimate with its standard error and the parameters that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub name: String,
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub parameters: BTreeMap<String, f64>,
}

impl EstimatorReport {
    pub(crate) fn new(name: &str, value: f64, std_error: f64, n_samples: usize) -> Self {
        EstimatorReport {
            name: name.to_string(),
            value,
            std_error: std_error.max(0.0),
            n_samples,
            parameters: BTreeMap::new(),
        }
    }

    pub(crate) fn with(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }
}
