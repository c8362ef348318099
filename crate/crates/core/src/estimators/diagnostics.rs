use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{entropy_knn, fisher_estimate, moments, pairwise_singular_moment, w2_distance, EstimatorReport, FisherMethod, W2Method};
use crate::error::Result;
use crate::geometry::Velocity;

/// Reference measure for the `w2_to_reference` column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum W2Reference {
    None,
    /// A fresh i.i.d. unit-temperature Maxwellian sample of the same size.
    Maxwellian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticParams {
    pub entropy_k: usize,
    pub fisher: FisherMethod,
    pub pairwise_exponent: f64,
    pub w2_reference: W2Reference,
    /// Samples up to this size use the exact W2 solver, larger ones the sliced one.
    pub w2_exact_max: usize,
    pub seed: u64,
}

impl Default for DiagnosticParams {
    fn default() -> Self {
        DiagnosticParams {
            entropy_k: 4,
            fisher: FisherMethod::default(),
            pairwise_exponent: -1.0,
            w2_reference: W2Reference::Maxwellian,
            w2_exact_max: 1024,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub m2: f64,
    pub m4: f64,
    /// `H(f) = int f ln f`, the negative of the differential entropy.
    pub entropy: EstimatorReport,
    pub fisher: EstimatorReport,
    pub pairwise_a_moment: EstimatorReport,
    pub w2_to_reference: Option<EstimatorReport>,
    pub chaos_cov: Option<EstimatorReport>,
    pub weak_residual: Option<f64>,
}

/// All single-sample diagnostics of one snapshot.
pub fn diagnose(sample: &[Velocity], t: f64, p: &DiagnosticParams) -> Result<DiagnosticsRecord> {
    let m = moments(sample)?;
    let mut h = entropy_knn(sample, p.entropy_k, p.seed)?;
    h.name = "neg_entropy_knn".into();
    h.value = -h.value;
    let fisher = fisher_estimate(sample, &p.fisher, p.seed)?;
    let pairwise = pairwise_singular_moment(sample, p.pairwise_exponent)?;
    let w2 = match p.w2_reference {
        W2Reference::None => None,
        W2Reference::Maxwellian => {
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            rng.set_stream(9);
            let reference: Vec<Velocity> = (0..sample.len())
                .map(|_| Velocity::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            let method = if sample.len() <= p.w2_exact_max {
                W2Method::ExactAssignment
            } else {
                W2Method::Sliced {
                    projections: 128,
                    seed: p.seed,
                }
            };
            Some(w2_distance(sample, &reference, &method)?)
        }
    };
    Ok(DiagnosticsRecord {
        t,
        m2: m.m2,
        m4: m.m4,
        entropy: h,
        fisher,
        pairwise_a_moment: pairwise,
        w2_to_reference: w2,
        chaos_cov: None,
        weak_residual: None,
    })
}
