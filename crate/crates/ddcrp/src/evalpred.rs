//! Predictive likelihood, Bayes-factor estimation, and chain diagnostics.
//!
//! Held-out prediction averages, over stored posterior link configurations,
//! the prior-weighted predictive probability of the new point under every
//! candidate link. It is only valid for sequential distances with the new
//! point at the end of the sequence: in that regime old customers cannot
//! link forward, so the stored posterior is unaffected by the new point.
//! Anything else is refused rather than approximated.
//!
//! The Bayes factor between two link priors on the same data is estimated by
//! importance weighting: the likelihood given the partition does not depend
//! on which prior generated it, so averaging the prior ratio over posterior
//! samples estimates the inverse marginal-likelihood ratio.

use std::sync::Arc;

use thiserror::Error;

use crate::distance::{DecayFunction, DistanceMatrix, PriorWeights};
use crate::gibbs::{
    chain_rng, crp_partition_log_prob, ChainState, CrpState, GibbsError, ModelConfig,
};
use crate::likelihood::{
    log_predictive, BaseMeasure, Corpus, LikelihoodError, SparseDoc, TableStats,
};
use crate::linkstate::{tables_from_links, CustomerLinks, TableAssignment};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(
        "held-out prediction requires sequential distances; with general distances the \
         posterior itself changes and the sampler must be rerun with the new point included"
    )]
    NonSequentialPrediction,
    #[error(
        "held-out point at time {new_time} precedes observed time {last}; interior insertions \
         change the posterior and require a rerun with the new point included"
    )]
    InteriorPosition { new_time: f64, last: f64 },
    #[error("no stored posterior samples")]
    NoSamples,
    #[error("stored samples cover {samples} customers but the model has {expected}")]
    SampleSizeMismatch { samples: usize, expected: usize },
    #[error("{got} timestamps supplied for {expected} customers")]
    TimesSizeMismatch { got: usize, expected: usize },
    #[error(
        "every importance weight is zero: the alternative prior's support does not cover the \
         sampled configurations"
    )]
    SupportMismatch,
    #[error(
        "stored sample {index} is impossible under the stated sampled-model prior; the trace \
         was not generated by this configuration"
    )]
    SampledPriorExcludesSample { index: usize },
    #[error("series of length {len} is too short for lag {lag}")]
    SeriesTooShort { len: usize, lag: usize },
    #[error(transparent)]
    Gibbs(#[from] GibbsError),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
}

/// One stored posterior draw: the link configuration plus the
/// hyperparameters it was sampled under.
#[derive(Debug, Clone)]
pub struct PosteriorSample {
    pub links: CustomerLinks,
    pub log_joint: f64,
    pub alpha: f64,
    pub decay_param: f64,
}

/// A bag of stored draws over the same customers.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    n: usize,
    samples: Vec<PosteriorSample>,
}

impl PosteriorSamples {
    pub fn new(n: usize, samples: Vec<PosteriorSample>) -> Result<Self, EvalError> {
        for s in &samples {
            if s.links.len() != n {
                return Err(EvalError::SampleSizeMismatch {
                    samples: s.links.len(),
                    expected: n,
                });
            }
        }
        Ok(Self { n, samples })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PosteriorSample> {
        self.samples.iter()
    }
}

/// A Monte Carlo estimate in log space with the delta-method standard error
/// of its log.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarloEstimate {
    pub log_value: f64,
    /// Standard error of `log_value`; infinite when undefined (fewer than
    /// two samples).
    pub se_log: f64,
    pub samples: usize,
}

/// Stable mean-and-error reduction of per-sample log values: shifts by the
/// max, averages in linear space, and maps the standard error back through
/// the log.
fn log_mean_with_se(log_values: &[f64]) -> MonteCarloEstimate {
    let b = log_values.len();
    let max = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return MonteCarloEstimate {
            log_value: f64::NEG_INFINITY,
            se_log: f64::INFINITY,
            samples: b,
        };
    }
    let scaled: Vec<f64> = log_values.iter().map(|&lv| (lv - max).exp()).collect();
    let mean: f64 = scaled.iter().sum::<f64>() / b as f64;
    let log_value = max + mean.ln();
    let se_log = if b < 2 {
        f64::INFINITY
    } else {
        let variance = scaled.iter().map(|&r| (r - mean).powi(2)).sum::<f64>() / (b as f64 - 1.0);
        (variance / b as f64).sqrt() / mean
    };
    MonteCarloEstimate {
        log_value,
        se_log,
        samples: b,
    }
}

/// Log predictive likelihood of one held-out document at a strictly later
/// position, averaged over stored posterior samples.
///
/// `times` are the observed customers' positions in the same scale the
/// distance matrix was built from; the held-out point must not precede any
/// of them.
#[allow(clippy::too_many_arguments)]
pub fn predict_heldout(
    samples: &PosteriorSamples,
    corpus: &Corpus,
    base: &BaseMeasure,
    distances: &DistanceMatrix,
    decay: &DecayFunction,
    alpha: f64,
    times: &[f64],
    new_time: f64,
    new_doc: &SparseDoc,
) -> Result<MonteCarloEstimate, EvalError> {
    if !distances.is_sequential() {
        return Err(EvalError::NonSequentialPrediction);
    }
    let n = distances.n();
    if times.len() != n {
        return Err(EvalError::TimesSizeMismatch {
            got: times.len(),
            expected: n,
        });
    }
    if samples.n() != n {
        return Err(EvalError::SampleSizeMismatch {
            samples: samples.n(),
            expected: n,
        });
    }
    if samples.is_empty() {
        return Err(EvalError::NoSamples);
    }
    let last = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if new_time < last {
        return Err(EvalError::InteriorPosition { new_time, last });
    }
    if matches!(base, BaseMeasure::TermMatch(_)) && new_doc.tokens() != 1 {
        return Err(LikelihoodError::NotSingleToken {
            doc: 0,
            tokens: new_doc.tokens(),
        }
        .into());
    }

    // link prior of the held-out customer: backward weights plus self mass
    let weights: Vec<f64> = (0..n).map(|j| decay.eval(new_time - times[j])).collect();
    let normalizer = alpha + weights.iter().sum::<f64>();
    let vocab_size = corpus.vocab_size();

    let mut per_sample = Vec::with_capacity(samples.len());
    for sample in samples.iter() {
        let assignment = tables_from_links(&sample.links);
        // the predictive depends on the candidate only through its table
        let mut terms: Vec<f64> = Vec::with_capacity(assignment.n_tables() + 1);
        for (_, members) in assignment.tables() {
            let table_weight: f64 = members.iter().map(|&j| weights[j]).sum();
            if table_weight == 0.0 {
                continue;
            }
            let stats = TableStats::from_docs(members.iter().map(|&j| corpus.doc(j)));
            let predictive = log_predictive(new_doc, Some(&stats), base, vocab_size);
            terms.push(table_weight.ln() - normalizer.ln() + predictive);
        }
        terms.push(alpha.ln() - normalizer.ln() + log_predictive(new_doc, None, base, vocab_size));
        per_sample.push(log_sum_exp(&terms));
    }
    Ok(log_mean_with_se(&per_sample))
}

/// Importance-sampling estimate of
/// `ln p(x | sampled model) - ln p(x | alternative model)` from samples
/// drawn under the sampled model's posterior.
///
/// Both priors live on the same link support, and the likelihood given the
/// partition is model-independent, so
/// `E_post[ p_alt(c) / p_sampled(c) ]` is exactly the inverse ratio of
/// marginal likelihoods. Weights can be heavy-tailed for aggressive decays;
/// the standard error is always reported.
pub fn estimate_log_bayes_factor(
    samples: &PosteriorSamples,
    sampled_prior: &PriorWeights,
    sampled_alpha: f64,
    alternative_prior: &PriorWeights,
    alternative_alpha: f64,
) -> Result<MonteCarloEstimate, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::NoSamples);
    }
    let mut log_weights = Vec::with_capacity(samples.len());
    for (index, s) in samples.iter().enumerate() {
        let sampled = sampled_prior.log_prior_of(&s.links, sampled_alpha);
        if sampled == f64::NEG_INFINITY {
            return Err(EvalError::SampledPriorExcludesSample { index });
        }
        log_weights.push(alternative_prior.log_prior_of(&s.links, alternative_alpha) - sampled);
    }
    if log_weights.iter().all(|&lw| lw == f64::NEG_INFINITY) {
        return Err(EvalError::SupportMismatch);
    }
    let mean = log_mean_with_se(&log_weights);
    Ok(MonteCarloEstimate {
        log_value: -mean.log_value,
        se_log: mean.se_log,
        samples: mean.samples,
    })
}

/// Per-sweep log-joint series with its autocorrelation diagnostics.
#[derive(Debug, Clone)]
pub struct DiagnosticSeries {
    values: Vec<f64>,
}

impl DiagnosticSeries {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn autocorrelation(&self, max_lag: usize) -> Result<Vec<f64>, EvalError> {
        autocorrelation(&self.values, max_lag)
    }
}

/// Biased-normalized sample autocorrelation at lags `0..=max_lag`; lag zero
/// is 1. A constant series is defined as `[1, 0, 0, ...]`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>, EvalError> {
    if series.len() <= max_lag {
        return Err(EvalError::SeriesTooShort {
            len: series.len(),
            lag: max_lag,
        });
    }
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|&x| x - mean).collect();
    let denominator: f64 = centered.iter().map(|&x| x * x).sum();
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    if denominator == 0.0 {
        out.resize(max_lag + 1, 0.0);
        return Ok(out);
    }
    for lag in 1..=max_lag {
        let covariance: f64 = (0..n - lag).map(|t| centered[t] * centered[t + lag]).sum();
        out.push(covariance / denominator);
    }
    Ok(out)
}

/// One per-sweep score from one of the paired samplers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub sampler: SamplerKind,
    pub sweep: u64,
    pub log_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    CustomerLink,
    TableReassignment,
}

impl SamplerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplerKind::CustomerLink => "ddcrp",
            SamplerKind::TableReassignment => "crp",
        }
    }
}

/// Runs the customer-link sampler and the table-reassignment sampler from
/// identical all-singleton initial states with rng streams derived from the
/// same master seed, scoring both in the common table representation
/// `ln p_CRP(z) + ln p(x | z)`. Emits one row per sampler per sweep index,
/// with sweep 0 being the initial state.
pub fn compare_samplers(
    distances: &Arc<DistanceMatrix>,
    corpus: Option<Arc<Corpus>>,
    cfg: &ModelConfig,
    seed: u64,
    sweeps: u64,
) -> Result<Vec<ComparisonRow>, EvalError> {
    let mut link_chain = ChainState::new(distances.clone(), corpus.clone(), cfg.clone())?;
    let mut table_chain = CrpState::new(distances, corpus.clone(), cfg)?;
    let mut link_rng = chain_rng(seed, 0);
    let mut table_rng = chain_rng(seed, 1);

    let mut rows = Vec::with_capacity(2 * sweeps as usize);
    let score_link = |chain: &ChainState| {
        partition_log_score(
            &chain.assignment(),
            corpus.as_deref(),
            cfg.base.as_ref(),
            cfg.alpha,
        )
    };
    rows.push(ComparisonRow {
        sampler: SamplerKind::CustomerLink,
        sweep: 0,
        log_score: score_link(&link_chain),
    });
    rows.push(ComparisonRow {
        sampler: SamplerKind::TableReassignment,
        sweep: 0,
        log_score: table_chain.log_score(),
    });
    for sweep in 1..sweeps {
        link_chain.ddcrp_sweep(&mut link_rng);
        rows.push(ComparisonRow {
            sampler: SamplerKind::CustomerLink,
            sweep,
            log_score: score_link(&link_chain),
        });
        let table_score = table_chain.sweep(&mut table_rng);
        rows.push(ComparisonRow {
            sampler: SamplerKind::TableReassignment,
            sweep,
            log_score: table_score,
        });
    }
    Ok(rows)
}

/// Score of a partition in the table representation: CRP partition log
/// probability plus the factored data log likelihood. The common scale for
/// comparing the two samplers.
pub fn partition_log_score(
    assignment: &TableAssignment,
    corpus: Option<&Corpus>,
    base: Option<&BaseMeasure>,
    alpha: f64,
) -> f64 {
    let sizes: Vec<usize> = assignment.tables().map(|(_, m)| m.len()).collect();
    let mut score = crp_partition_log_prob(&sizes, alpha);
    if let (Some(corpus), Some(base)) = (corpus, base) {
        for (_, members) in assignment.tables() {
            let stats = TableStats::from_docs(members.iter().map(|&i| corpus.doc(i)));
            score += stats
                .log_marginal(base, corpus.vocab_size())
                .expect("tables are non-empty");
        }
    }
    score
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::SparseDoc;

    fn stored(n: usize, links: Vec<Vec<usize>>) -> PosteriorSamples {
        let samples = links
            .into_iter()
            .map(|c| PosteriorSample {
                links: CustomerLinks::from_vec(c).unwrap(),
                log_joint: 0.0,
                alpha: 1.0,
                decay_param: 0.0,
            })
            .collect();
        PosteriorSamples::new(n, samples).unwrap()
    }

    #[test]
    fn autocorrelation_conventions() {
        let constant = autocorrelation(&[2.0; 10], 3).unwrap();
        assert_eq!(constant, vec![1.0, 0.0, 0.0, 0.0]);

        let alternating: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let acf = autocorrelation(&alternating, 2).unwrap();
        assert_eq!(acf[0], 1.0);
        assert!((acf[1] + 1.0).abs() < 0.05, "lag-1 {}", acf[1]);

        assert!(matches!(
            autocorrelation(&[1.0, 2.0], 5),
            Err(EvalError::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn white_noise_autocorrelation_is_small() {
        use rand::Rng;
        let mut rng = chain_rng(123, 0);
        let series: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>() - 0.5).collect();
        let acf = autocorrelation(&series, 10).unwrap();
        for (lag, &rho) in acf.iter().enumerate().skip(1) {
            assert!(rho.abs() < 0.05, "lag {lag}: {rho}");
        }
    }

    #[test]
    fn bayes_factor_self_comparison_is_exactly_zero() {
        let d = DistanceMatrix::sequential_index(3).unwrap();
        let prior = PriorWeights::new(&d, &DecayFunction::Identity);
        let samples = stored(3, vec![vec![0, 0, 1], vec![0, 1, 2], vec![0, 1, 0]]);
        let est = estimate_log_bayes_factor(&samples, &prior, 1.0, &prior, 1.0).unwrap();
        assert_eq!(est.log_value, 0.0);
        assert_eq!(est.se_log, 0.0);
    }

    #[test]
    fn bayes_factor_rejects_impossible_samples() {
        // a link spanning distance 2 has zero mass under window width 2, so
        // this trace cannot have come from the stated sampled model
        let d = DistanceMatrix::sequential_index(3).unwrap();
        let window = PriorWeights::new(&d, &DecayFunction::Window { width: 2.0 });
        let identity = PriorWeights::new(&d, &DecayFunction::Identity);
        let samples = stored(3, vec![vec![0, 0, 0]]);
        assert!(matches!(
            estimate_log_bayes_factor(&samples, &window, 1.0, &identity, 1.0),
            Err(EvalError::SampledPriorExcludesSample { index: 0 })
        ));
    }

    #[test]
    fn bayes_factor_single_sample_flags_undefined_error() {
        let d = DistanceMatrix::sequential_index(2).unwrap();
        let prior = PriorWeights::new(&d, &DecayFunction::Identity);
        let window = PriorWeights::new(&d, &DecayFunction::Window { width: 2.0 });
        let samples = stored(2, vec![vec![0, 0]]);
        let est = estimate_log_bayes_factor(&samples, &window, 1.0, &prior, 1.0).unwrap();
        assert!(est.se_log.is_infinite());
        assert_eq!(est.samples, 1);
    }

    #[test]
    fn prediction_rejects_invalid_regimes() {
        let corpus = Corpus::new(2, vec![SparseDoc::single_token(0); 2]).unwrap();
        let base = BaseMeasure::uniform_term_match(2);
        let samples = stored(2, vec![vec![0, 0]]);
        let general = DistanceMatrix::graph_hops(2, &[(0, 1)]).unwrap();
        let err = predict_heldout(
            &samples,
            &corpus,
            &base,
            &general,
            &DecayFunction::Identity,
            1.0,
            &[0.0, 1.0],
            2.0,
            &SparseDoc::single_token(0),
        )
        .unwrap_err();
        assert!(matches!(err, EvalError::NonSequentialPrediction));

        let sequential = DistanceMatrix::timestamp_lags(&[0.0, 1.0], true).unwrap();
        let err = predict_heldout(
            &samples,
            &corpus,
            &base,
            &sequential,
            &DecayFunction::Identity,
            1.0,
            &[0.0, 1.0],
            0.5,
            &SparseDoc::single_token(0),
        )
        .unwrap_err();
        assert!(matches!(err, EvalError::InteriorPosition { .. }));
    }

    #[test]
    fn zero_decay_prediction_is_the_prior_predictive() {
        // with no decay mass the held-out point always sits alone
        let corpus = Corpus::new(
            3,
            vec![SparseDoc::single_token(0), SparseDoc::single_token(1)],
        )
        .unwrap();
        let g0 = vec![0.5, 0.25, 0.25];
        let base = BaseMeasure::term_match(g0.clone(), 3).unwrap();
        let samples = stored(2, vec![vec![0, 0], vec![0, 1]]);
        let d = DistanceMatrix::timestamp_lags(&[0.0, 1.0], true).unwrap();
        let est = predict_heldout(
            &samples,
            &corpus,
            &base,
            &d,
            &DecayFunction::Zero,
            1.0,
            &[0.0, 1.0],
            2.0,
            &SparseDoc::single_token(2),
        )
        .unwrap();
        assert!((est.log_value - g0[2].ln()).abs() < 1e-12);
    }

    #[test]
    fn huge_alpha_prediction_approaches_prior_predictive() {
        let corpus = Corpus::new(
            2,
            vec![SparseDoc::single_token(0), SparseDoc::single_token(0)],
        )
        .unwrap();
        let base = BaseMeasure::uniform_term_match(2);
        let samples = stored(2, vec![vec![0, 0]]);
        let d = DistanceMatrix::timestamp_lags(&[0.0, 1.0], true).unwrap();
        let est = predict_heldout(
            &samples,
            &corpus,
            &base,
            &d,
            &DecayFunction::Identity,
            1e12,
            &[0.0, 1.0],
            2.0,
            &SparseDoc::single_token(1),
        )
        .unwrap();
        assert!((est.log_value - 0.5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn prediction_invariant_to_sample_order() {
        let corpus = Corpus::new(
            2,
            vec![
                SparseDoc::new(vec![(0, 2)]),
                SparseDoc::new(vec![(1, 1)]),
                SparseDoc::new(vec![(0, 1)]),
            ],
        )
        .unwrap();
        let base = BaseMeasure::dirichlet_multinomial(1.0).unwrap();
        let d = DistanceMatrix::sequential_index(3).unwrap();
        let forward = stored(3, vec![vec![0, 0, 1], vec![0, 1, 2], vec![0, 1, 1]]);
        let reversed = stored(3, vec![vec![0, 1, 1], vec![0, 1, 2], vec![0, 0, 1]]);
        let args = |samples: &PosteriorSamples| {
            predict_heldout(
                samples,
                &corpus,
                &base,
                &d,
                &DecayFunction::Identity,
                1.0,
                &[1.0, 2.0, 3.0],
                4.0,
                &SparseDoc::new(vec![(0, 1), (1, 1)]),
            )
            .unwrap()
        };
        let a = args(&forward);
        let b = args(&reversed);
        assert_eq!(a.log_value, b.log_value);
    }

    // samples drawn under each model in turn: the two importance estimates
    // of the same log Bayes factor must agree (with opposite signs) within
    // their combined uncertainty
    #[test]
    fn bayes_factor_forward_and_reverse_estimates_agree() {
        let d = Arc::new(DistanceMatrix::sequential_index(4).unwrap());
        let corpus = Arc::new(
            Corpus::new(
                2,
                vec![
                    SparseDoc::new(vec![(0, 2)]),
                    SparseDoc::new(vec![(0, 1), (1, 1)]),
                    SparseDoc::new(vec![(1, 2)]),
                    SparseDoc::new(vec![(1, 1)]),
                ],
            )
            .unwrap(),
        );
        let base = BaseMeasure::dirichlet_multinomial(1.0).unwrap();
        let logistic = DecayFunction::Logistic { offset: 1.0 };
        let identity = DecayFunction::Identity;
        let alpha = 1.0;

        let draw = |decay: DecayFunction, seed: u64| -> PosteriorSamples {
            let cfg = ModelConfig::new(alpha, decay, Some(base.clone()));
            let mut chain = ChainState::new(d.clone(), Some(corpus.clone()), cfg).unwrap();
            let mut rng = chain_rng(seed, 0);
            for _ in 0..2_000 {
                chain.ddcrp_sweep(&mut rng);
            }
            let mut stored = Vec::new();
            for s in 1..=40_000u64 {
                chain.ddcrp_sweep(&mut rng);
                if s % 10 == 0 {
                    stored.push(PosteriorSample {
                        links: chain.links().clone(),
                        log_joint: 0.0,
                        alpha,
                        decay_param: 0.0,
                    });
                }
            }
            PosteriorSamples::new(4, stored).unwrap()
        };

        let logistic_prior = PriorWeights::new(&d, &logistic);
        let identity_prior = PriorWeights::new(&d, &identity);
        let forward = estimate_log_bayes_factor(
            &draw(logistic, 21),
            &logistic_prior,
            alpha,
            &identity_prior,
            alpha,
        )
        .unwrap();
        let reverse = estimate_log_bayes_factor(
            &draw(identity, 22),
            &identity_prior,
            alpha,
            &logistic_prior,
            alpha,
        )
        .unwrap();
        let combined = (forward.se_log.powi(2) + reverse.se_log.powi(2)).sqrt();
        let gap = (forward.log_value + reverse.log_value).abs();
        assert!(
            gap < 3.0 * combined + 1e-9,
            "forward {} vs reverse {} (combined se {combined})",
            forward.log_value,
            reverse.log_value
        );
    }

    // batch-means standard error, to absorb chain autocorrelation
    fn batch_mean_se(series: &[f64], batches: usize) -> (f64, f64) {
        let per = series.len() / batches;
        let means: Vec<f64> = (0..batches)
            .map(|b| series[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64)
            .collect();
        let grand = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
        (grand, (var / batches as f64).sqrt())
    }

    #[test]
    fn paired_samplers_share_long_run_mean_score() {
        let d = Arc::new(DistanceMatrix::sequential_index(4).unwrap());
        let corpus = Arc::new(
            Corpus::new(
                2,
                vec![
                    SparseDoc::new(vec![(0, 1)]),
                    SparseDoc::new(vec![(0, 1)]),
                    SparseDoc::new(vec![(1, 1)]),
                    SparseDoc::new(vec![(1, 1)]),
                ],
            )
            .unwrap(),
        );
        let base = BaseMeasure::dirichlet_multinomial(1.0).unwrap();
        let cfg = ModelConfig::new(1.0, DecayFunction::Identity, Some(base));
        let rows = compare_samplers(&d, Some(corpus), &cfg, 404, 40_000).unwrap();
        let burnin = 1_000;
        let series_of = |kind: SamplerKind| -> Vec<f64> {
            rows.iter()
                .filter(|r| r.sampler == kind && r.sweep >= burnin)
                .map(|r| r.log_score)
                .collect()
        };
        let (mean_link, se_link) = batch_mean_se(&series_of(SamplerKind::CustomerLink), 20);
        let (mean_table, se_table) = batch_mean_se(&series_of(SamplerKind::TableReassignment), 20);
        let combined = (se_link.powi(2) + se_table.powi(2)).sqrt();
        assert!(
            (mean_link - mean_table).abs() < 4.0 * combined,
            "means {mean_link} vs {mean_table}, combined se {combined}"
        );
    }

    #[test]
    fn comparison_rows_share_sweep_zero_and_count() {
        let n = 4;
        let d = Arc::new(DistanceMatrix::sequential_index(n).unwrap());
        let corpus = Arc::new(
            Corpus::new(
                2,
                vec![
                    SparseDoc::new(vec![(0, 1)]),
                    SparseDoc::new(vec![(0, 1)]),
                    SparseDoc::new(vec![(1, 1)]),
                    SparseDoc::new(vec![(1, 1)]),
                ],
            )
            .unwrap(),
        );
        let base = BaseMeasure::dirichlet_multinomial(1.0).unwrap();
        let cfg = ModelConfig::new(1.0, DecayFunction::Identity, Some(base));
        let sweeps = 25;
        let rows = compare_samplers(&d, Some(corpus), &cfg, 99, sweeps).unwrap();
        assert_eq!(rows.len(), 2 * sweeps as usize);
        let first_link = rows
            .iter()
            .find(|r| r.sampler == SamplerKind::CustomerLink && r.sweep == 0)
            .unwrap();
        let first_table = rows
            .iter()
            .find(|r| r.sampler == SamplerKind::TableReassignment && r.sweep == 0)
            .unwrap();
        assert_eq!(first_link.log_score, first_table.log_score);
    }
}
