//! Instance randomness measures and solution-quality metrics.
//!
//! Entropies are in nats. The choice entropy of a customer is the Shannon
//! entropy of the logit choice among the candidate sites alone; the capture
//! entropy is the binary entropy of "the chosen alternative is a candidate"
//! against all alternatives.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{CustomerAttributes, GenerativeModel};
use crate::model::{log_sum_exp, mnl_probabilities, ChoiceInstance, DecisionVector, Solution};
use crate::rng::{self, CHUNK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyEstimator {
    MnlExact,
    MmnlMonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    /// Expected choice entropy, nats.
    pub entropy: f64,
    pub estimator: EntropyEstimator,
    pub sample_size: usize,
    /// Expected capture entropy, nats.
    pub capture_entropy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub rgap_pct: Option<f64>,
    pub rgen_gap_pct: Option<f64>,
    pub z_in_sample: f64,
    pub z_estimate: Option<Estimate>,
    pub size_reduction_pct: Option<f64>,
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub sample_size: usize,
}

/// Shannon entropy of the logit distribution over `utilities`.
pub fn choice_entropy(utilities: &[f64]) -> f64 {
    if utilities.len() <= 1 {
        return 0.0;
    }
    let p = mnl_probabilities(utilities).expect("nonempty");
    -p.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Probability that the chosen alternative is a candidate, all candidates
/// available.
fn capture_all(candidates: &[f64], competitors: &[f64]) -> f64 {
    if competitors.is_empty() {
        return 1.0;
    }
    let gap = log_sum_exp(competitors.iter().copied()) - log_sum_exp(candidates.iter().copied());
    1.0 / (1.0 + gap.exp())
}

/// Exact expected choice entropy of a finite-support instance.
pub fn entropy_mnl(instance: &ChoiceInstance) -> f64 {
    let n = instance.n_customers();
    let total: f64 = (0..n).map(|i| choice_entropy(instance.candidate_utilities(i))).sum();
    total / n as f64
}

/// Mean capture entropy over the customers of an instance.
pub fn capture_entropy(instance: &ChoiceInstance) -> f64 {
    let n = instance.n_customers();
    let total: f64 = (0..n)
        .map(|i| {
            binary_entropy(capture_all(
                instance.candidate_utilities(i),
                instance.competitor_utilities(i),
            ))
        })
        .sum();
    total / n as f64
}

/// Chunked parallel mean and standard error of `f` over `n_tilde` draws of
/// the evaluation stream. Chunk results are combined in order, so the value
/// does not depend on the thread count.
fn monte_carlo<F>(model: &GenerativeModel, n_tilde: usize, seed: u64, f: F) -> Result<Estimate>
where
    F: Fn(&CustomerAttributes, &mut [f64]) -> f64 + Sync,
{
    if n_tilde == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    let width = model.n_alternatives();
    let chunks = n_tilde.div_ceil(CHUNK);
    let parts: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = rng::substream(seed, rng::EVALUATION, chunk as u64);
            let mut buf = vec![0.0; width];
            let len = CHUNK.min(n_tilde - chunk * CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                let a = model.sample_attributes(&mut rng);
                let v = f(&a, &mut buf);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    Ok(summarize(&parts, n_tilde))
}

fn summarize(parts: &[(f64, f64)], n: usize) -> Estimate {
    let (s, s2) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let mean = s / n as f64;
    let var = if n > 1 {
        ((s2 - n as f64 * mean * mean) / (n - 1) as f64).max(0.0)
    } else {
        0.0
    };
    Estimate {
        value: mean,
        std_error: (var / n as f64).sqrt(),
        sample_size: n,
    }
}

/// Monte Carlo expected choice entropy of a generative model.
pub fn entropy_mmnl(model: &GenerativeModel, n_tilde: usize, seed: u64) -> Result<f64> {
    let d = model.n_candidates();
    Ok(monte_carlo(model, n_tilde, seed, |a, buf| {
        model.utilities_into(a, buf);
        choice_entropy(&buf[..d])
    })?
    .value)
}

/// Monte Carlo expected capture entropy of a generative model.
pub fn capture_entropy_mmnl(model: &GenerativeModel, n_tilde: usize, seed: u64) -> Result<f64> {
    let d = model.n_candidates();
    Ok(monte_carlo(model, n_tilde, seed, |a, buf| {
        model.utilities_into(a, buf);
        binary_entropy(capture_all(&buf[..d], &buf[d..]))
    })?
    .value)
}

pub fn entropy_report_mnl(instance: &ChoiceInstance) -> EntropyReport {
    EntropyReport {
        entropy: entropy_mnl(instance),
        estimator: EntropyEstimator::MnlExact,
        sample_size: instance.n_customers(),
        capture_entropy: Some(capture_entropy(instance)),
    }
}

pub fn entropy_report_mmnl(model: &GenerativeModel, n_tilde: usize, seed: u64) -> Result<EntropyReport> {
    Ok(EntropyReport {
        entropy: entropy_mmnl(model, n_tilde, seed)?,
        estimator: EntropyEstimator::MmnlMonteCarlo,
        sample_size: n_tilde,
        capture_entropy: Some(capture_entropy_mmnl(model, n_tilde, seed)?),
    })
}

/// Relative optimality gap of `x` in percent.
pub fn rgap(x: &DecisionVector, instance: &ChoiceInstance, optimum: &Solution) -> Result<f64> {
    let z = crate::model::objective_mnl(instance, x)?;
    rgap_values(z, optimum.objective)
}

/// Relative gap of a value against a reference optimum, in percent.
pub fn rgap_values(value: f64, optimum: f64) -> Result<f64> {
    if optimum <= 0.0 {
        return Err(Error::UndefinedGap("reference optimum is zero"));
    }
    Ok(100.0 * (optimum - value) / optimum)
}

/// Relative generalization gap in percent.
pub fn rgen_gap(in_sample: f64, z_estimate: f64) -> Result<f64> {
    if !(in_sample > 0.0) {
        return Err(Error::UndefinedGap("in-sample value must be positive"));
    }
    Ok(100.0 * (in_sample - z_estimate) / in_sample)
}

/// A large out-of-sample customer population kept in memory so that several
/// decisions are compared on the same draws.
///
/// Per customer only the attributes and the log competitor mass are stored;
/// candidate utilities are recomputed for the open sites of each decision.
#[derive(Debug, Clone)]
pub struct EvaluationSample<'a> {
    model: &'a GenerativeModel,
    attributes: Vec<CustomerAttributes>,
    log_competitor: Vec<f64>,
}

impl<'a> EvaluationSample<'a> {
    pub fn new(model: &'a GenerativeModel, n_tilde: usize, seed: u64) -> Result<Self> {
        if n_tilde == 0 {
            return Err(Error::InvalidParameter("sample size must be at least 1".into()));
        }
        let attributes = model.sample_population(n_tilde, seed, rng::EVALUATION);
        let log_competitor = attributes
            .par_iter()
            .map(|a| log_sum_exp(model.competitors().iter().map(|f| model.utility(a, f))))
            .collect();
        Ok(EvaluationSample {
            model,
            attributes,
            log_competitor,
        })
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    /// `Z` of `x` on this sample with its standard error.
    pub fn estimate(&self, x: &DecisionVector) -> Result<Estimate> {
        if x.len() != self.model.n_candidates() {
            return Err(Error::DecisionLength {
                got: x.len(),
                expected: self.model.n_candidates(),
            });
        }
        let open: Vec<_> = x.indices().into_iter().map(|c| &self.model.candidates()[c]).collect();
        let n = self.len();
        let parts: Vec<(f64, f64)> = self
            .attributes
            .par_chunks(CHUNK)
            .zip(self.log_competitor.par_chunks(CHUNK))
            .map(|(attrs, logw)| {
                let (mut s, mut s2) = (0.0, 0.0);
                for (a, lw) in attrs.iter().zip(logw) {
                    let p = if open.is_empty() {
                        0.0
                    } else if *lw == f64::NEG_INFINITY {
                        1.0
                    } else {
                        let ls = log_sum_exp(open.iter().map(|f| self.model.utility(a, f)));
                        1.0 / (1.0 + (lw - ls).exp())
                    };
                    s += p;
                    s2 += p * p;
                }
                (s, s2)
            })
            .collect();
        Ok(summarize(&parts, n))
    }
}

/// Out-of-sample estimate of `Z(x)` on a fresh evaluation sample.
pub fn estimate_z(model: &GenerativeModel, x: &DecisionVector, n_tilde: usize, seed: u64) -> Result<Estimate> {
    EvaluationSample::new(model, n_tilde, seed)?.estimate(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_hm14_mmnl, gen_mmnl3, materialize_sample, Mmnl3Params};
    use crate::model::tests::instance;
    use crate::model::{objective_mnl, Method};
    use proptest::prelude::*;
    use std::time::Duration;

    #[test]
    fn entropy_examples() {
        let inst = instance(&[vec![0.3, 0.3, 5.0], vec![-1.0, -1.0, 0.0]], 2, 1);
        assert!((entropy_mnl(&inst) - 2f64.ln()).abs() < 1e-15);
        let inst = instance(&[vec![1000.0, 0.0, 0.0]], 3, 1);
        assert!(entropy_mnl(&inst) < 1e-300);
        assert_eq!(choice_entropy(&[4.2]), 0.0);
    }

    #[test]
    fn capture_entropy_examples() {
        let inst = instance(&[vec![0.0, 1.0]], 2, 1);
        assert_eq!(capture_entropy(&inst), 0.0);
        let inst = instance(&[vec![0.5, 0.5, 0.5, 0.5]], 2, 1);
        assert!((capture_entropy(&inst) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn capture_entropy_matches_direct_integrand() {
        let inst = instance(
            &[vec![0.2, -1.0, 0.7], vec![1.5, 0.1, -0.4], vec![-2.0, -2.5, 1.0]],
            2,
            1,
        );
        let direct: f64 = (0..3)
            .map(|n| {
                let v = inst.utilities(n);
                let e: Vec<f64> = v.iter().map(|u| u.exp()).collect();
                let p = (e[0] + e[1]) / (e[0] + e[1] + e[2]);
                -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / 3.0;
        assert!((capture_entropy(&inst) - direct).abs() < 1e-14);
    }

    #[test]
    fn gap_examples() {
        let inst = instance(&[vec![1.0, 0.0, 0.5], vec![0.0, 2.0, 0.5]], 2, 1);
        let x = DecisionVector::from_indices(2, &[1]).unwrap();
        let z = objective_mnl(&inst, &x).unwrap();
        let opt = Solution {
            decision: x.clone(),
            objective: z,
            method: Method::Brute,
            wall_time: Duration::ZERO,
            iterations: 0,
            optimal: true,
        };
        assert_eq!(rgap(&x, &inst, &opt).unwrap(), 0.0);
        assert_eq!(rgap(&DecisionVector::closed(2), &inst, &opt).unwrap(), 100.0);
        assert!(rgap_values(0.0, 0.0).is_err());
        assert_eq!(rgen_gap(0.5, 0.5).unwrap(), 0.0);
        assert_eq!(rgen_gap(0.5, 0.25).unwrap(), 50.0);
        assert!(rgen_gap(0.0, 0.1).is_err());
        assert!(rgen_gap(-1.0, 0.1).is_err());
    }

    #[test]
    fn mmnl_entropy_is_deterministic_and_bounded() {
        let model = gen_hm14_mmnl(2);
        let a = entropy_mmnl(&model, 5000, 11).unwrap();
        assert_eq!(a, entropy_mmnl(&model, 5000, 11).unwrap());
        assert!(a > 0.0 && a <= (model.n_candidates() as f64).ln());
        assert!(entropy_mmnl(&model, 0, 1).is_err());
        let c = capture_entropy_mmnl(&model, 5000, 11).unwrap();
        assert!((0.0..=2f64.ln()).contains(&c));
    }

    #[test]
    fn evaluation_matches_materialized_objective() {
        // The evaluation sample is a plain draw from the model, so its value
        // must equal the instance objective on the same attributes.
        let model = gen_hm14_mmnl(5);
        let sample = EvaluationSample::new(&model, 3000, 8).unwrap();
        let inst = crate::generators::instance_from_attributes(&model, &sample.attributes).unwrap();
        let x = DecisionVector::from_indices(50, &[3, 7, 11, 20, 41]).unwrap();
        let est = sample.estimate(&x).unwrap();
        let z = objective_mnl(&inst, &x).unwrap();
        assert!((est.value - z).abs() < 1e-12);
        assert_eq!(sample.estimate(&DecisionVector::closed(50)).unwrap().value, 0.0);
    }

    #[test]
    fn estimate_without_competitors_is_one() {
        let params = Mmnl3Params {
            competitors_per_type: 0,
            ..Mmnl3Params::with_beta(1.0)
        };
        let model = gen_mmnl3(&params, 1).unwrap();
        let x = DecisionVector::first(model.n_candidates(), 2);
        let est = estimate_z(&model, &x, 2000, 4).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn disjoint_estimates_agree_within_three_errors() {
        let model = gen_hm14_mmnl(7);
        let x = DecisionVector::from_indices(50, &[0, 9, 18, 27, 36]).unwrap();
        let a = estimate_z(&model, &x, 200_000, 100).unwrap();
        let b = estimate_z(&model, &x, 200_000, 101).unwrap();
        let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.value - b.value).abs() < 3.0 * se, "{a:?} {b:?}");
    }

    #[test]
    fn entropy_variance_shrinks_with_sample_size() {
        // Batch means of 40 x 1000 vs 40 x 16000 draws.
        let model = gen_hm14_mmnl(1);
        let spread = |n: usize| {
            let vals: Vec<f64> = (0..40).map(|s| entropy_mmnl(&model, n, 500 + s).unwrap()).collect();
            let m = vals.iter().sum::<f64>() / 40.0;
            vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 39.0
        };
        let ratio = spread(1000) / spread(16000);
        // Expected 16; the F(39, 39) ratio stays within a factor 2.7 of it
        // with probability above 0.998.
        assert!(ratio > 6.0 && ratio < 43.0, "ratio {ratio}");
    }

    #[test]
    fn instance_entropy_of_materialized_sample_tracks_model() {
        let model = gen_hm14_mmnl(4);
        let inst = materialize_sample(&model, 20_000, 4).unwrap();
        let mc = entropy_mmnl(&model, 20_000, 9).unwrap();
        assert!((entropy_mnl(&inst) - mc).abs() < 0.03);
    }

    proptest! {
        #[test]
        fn entropy_bounds(rows in proptest::collection::vec(proptest::collection::vec(-30.0f64..30.0, 5), 1..12), d in 1usize..=4) {
            let inst = instance(&rows, d, 1);
            let h = entropy_mnl(&inst);
            prop_assert!(h >= 0.0 && h <= (d as f64).ln() + 1e-12);
            let c = capture_entropy(&inst);
            prop_assert!(c >= 0.0 && c <= 2f64.ln() + 1e-12);
        }
    }
}
