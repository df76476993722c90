//! Exact small-instance computations used as ground truth.
//!
//! Everything here is brute force by design: partition laws by enumerating
//! every link configuration, posteriors by summing every configuration's
//! joint, and the marginal-invariance results as direct numeric residuals.
//! These functions are the oracles the samplers are tested against, so they
//! deliberately share as little machinery with the samplers as possible.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::distance::{DecayFunction, DistanceMatrix, IndicatorSet};
use crate::likelihood::{table_log_marginal, BaseMeasure, Corpus, LikelihoodError, TableStats};
use crate::linkstate::{rgs_from_labels, tables_from_links, CustomerLinks};

/// Enumeration cap for prior partition laws (`n^n` configurations).
pub const MAX_ENUM_PRIOR: usize = 8;
/// Enumeration cap for exact posteriors.
pub const MAX_ENUM_POSTERIOR: usize = 6;
/// Cap for the closed-form CRP law (Bell-number enumeration).
pub const MAX_CRP_LAW: usize = 10;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{n} customers exceeds the enumeration cap {max}")]
    TooLarge { n: usize, max: usize },
    #[error(
        "distances violate the block property at customers ({i}, {j}) with representative {rep}"
    )]
    BlockPropertyViolated { i: usize, j: usize, rep: usize },
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
}

/// An exact probability distribution over set partitions of `{0..n-1}`,
/// keyed by restricted growth strings. Partitions that are unreachable under
/// the generating process are stored explicitly with probability zero so
/// support comparisons are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionDistribution {
    probs: BTreeMap<Vec<usize>, f64>,
}

impl PartitionDistribution {
    /// All partitions of `n` elements, each with probability zero.
    pub fn zeros(n: usize) -> Self {
        let probs = all_partition_rgs(n).into_iter().map(|p| (p, 0.0)).collect();
        Self { probs }
    }

    /// Empirical distribution from partition counts.
    pub fn from_counts(counts: &BTreeMap<Vec<usize>, u64>) -> Self {
        let total: u64 = counts.values().sum();
        let probs = counts
            .iter()
            .map(|(k, &c)| (k.clone(), c as f64 / total as f64))
            .collect();
        Self { probs }
    }

    pub fn prob(&self, rgs: &[usize]) -> f64 {
        self.probs.get(rgs).copied().unwrap_or(0.0)
    }

    pub fn add(&mut self, rgs: Vec<usize>, p: f64) {
        *self.probs.entry(rgs).or_insert(0.0) += p;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<usize>, f64)> {
        self.probs.iter().map(|(k, &v)| (k, v))
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Total-variation distance `0.5 * sum |p - q|` over the union of
    /// supports.
    pub fn tv_distance(&self, other: &Self) -> f64 {
        let mut keys: Vec<&Vec<usize>> = self.probs.keys().collect();
        for k in other.probs.keys() {
            if !self.probs.contains_key(k) {
                keys.push(k);
            }
        }
        0.5 * keys
            .into_iter()
            .map(|k| (self.prob(k) - other.prob(k)).abs())
            .sum::<f64>()
    }

    /// Largest absolute probability difference over the union of supports.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0f64;
        for (k, p) in self.iter() {
            worst = worst.max((p - other.prob(k)).abs());
        }
        for (k, q) in other.iter() {
            worst = worst.max((q - self.prob(k)).abs());
        }
        worst
    }
}

/// All restricted growth strings of length `n`.
pub fn all_partition_rgs(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; n];
    fn recurse(current: &mut Vec<usize>, pos: usize, max_used: usize, out: &mut Vec<Vec<usize>>) {
        if pos == current.len() {
            out.push(current.clone());
            return;
        }
        for value in 0..=max_used + 1 {
            current[pos] = value;
            recurse(current, pos + 1, max_used.max(value), out);
        }
    }
    if n == 0 {
        return vec![Vec::new()];
    }
    current[0] = 0;
    recurse(&mut current, 1, 0, &mut out);
    out
}

/// Exact partition law of the distance dependent CRP by summing the product
/// prior over every reachable link configuration.
pub fn enumerate_ddcrp_partition_law(
    distances: &DistanceMatrix,
    decay: &DecayFunction,
    alpha: f64,
) -> Result<PartitionDistribution, OracleError> {
    let n = distances.n();
    if n > MAX_ENUM_PRIOR {
        return Err(OracleError::TooLarge {
            n,
            max: MAX_ENUM_PRIOR,
        });
    }
    let (candidates, probs) = link_candidates(distances, decay, alpha);
    let mut law = PartitionDistribution::zeros(n);
    for_each_config(&candidates, |choice| {
        let mut prob = 1.0;
        let mut links = Vec::with_capacity(n);
        for (i, &slot) in choice.iter().enumerate() {
            prob *= probs[i][slot];
            links.push(candidates[i][slot]);
        }
        let links = CustomerLinks::from_vec(links).expect("candidates are in range");
        law.add(tables_from_links(&links).as_rgs(), prob);
    });
    Ok(law)
}

/// Exact traditional CRP partition law from its closed-form partition
/// probability: `alpha^K * prod_k (n_k - 1)! / prod_{t=0}^{n-1} (alpha + t)`.
pub fn crp_partition_law(n: usize, alpha: f64) -> Result<PartitionDistribution, OracleError> {
    if n > MAX_CRP_LAW {
        return Err(OracleError::TooLarge {
            n,
            max: MAX_CRP_LAW,
        });
    }
    let mut law = PartitionDistribution::zeros(n);
    for rgs in all_partition_rgs(n) {
        let p = crp_partition_prob(&rgs, alpha);
        law.add(rgs, p);
    }
    Ok(law)
}

/// Closed-form CRP probability of one partition given as an RGS.
pub fn crp_partition_prob(rgs: &[usize], alpha: f64) -> f64 {
    let n = rgs.len();
    let n_blocks = rgs.iter().max().map_or(0, |&m| m + 1);
    let mut sizes = vec![0usize; n_blocks];
    for &b in rgs {
        sizes[b] += 1;
    }
    let mut numerator = alpha.powi(n_blocks as i32);
    for &size in &sizes {
        for factor in 1..size {
            numerator *= factor as f64;
        }
    }
    let mut denominator = 1.0;
    for t in 0..n {
        denominator *= alpha + t as f64;
    }
    numerator / denominator
}

/// Exact posterior over partitions and exact log marginal likelihood for a
/// small corpus, by enumerating every link configuration.
pub struct ExactPosterior {
    pub posterior: PartitionDistribution,
    pub log_marginal: f64,
}

pub fn exact_posterior(
    corpus: &Corpus,
    distances: &DistanceMatrix,
    decay: &DecayFunction,
    alpha: f64,
    base: &BaseMeasure,
) -> Result<ExactPosterior, OracleError> {
    let n = distances.n();
    if n > MAX_ENUM_POSTERIOR {
        return Err(OracleError::TooLarge {
            n,
            max: MAX_ENUM_POSTERIOR,
        });
    }
    assert_eq!(corpus.len(), n, "corpus size must match distance matrix");
    let (candidates, probs) = link_candidates(distances, decay, alpha);

    // first pass: log joint per configuration
    let mut configs: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut result: Result<(), OracleError> = Ok(());
    for_each_config(&candidates, |choice| {
        if result.is_err() {
            return;
        }
        let mut log_joint = 0.0;
        let mut links = Vec::with_capacity(n);
        for (i, &slot) in choice.iter().enumerate() {
            log_joint += probs[i][slot].ln();
            links.push(candidates[i][slot]);
        }
        let links = CustomerLinks::from_vec(links).expect("candidates are in range");
        let assignment = tables_from_links(&links);
        for (_, members) in assignment.tables() {
            let stats = TableStats::from_docs(members.iter().map(|&i| corpus.doc(i)));
            match table_log_marginal(&stats, base, corpus.vocab_size()) {
                Ok(term) => log_joint += term,
                Err(e) => {
                    result = Err(e.into());
                    return;
                }
            }
        }
        configs.push((assignment.as_rgs(), log_joint));
    });
    result?;

    let max_log = configs
        .iter()
        .map(|&(_, lj)| lj)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut posterior = PartitionDistribution::zeros(n);
    let mut total = 0.0;
    for (rgs, log_joint) in configs {
        let scaled = (log_joint - max_log).exp();
        total += scaled;
        posterior.add(rgs, scaled);
    }
    let log_marginal = max_log + total.ln();
    let posterior = PartitionDistribution {
        probs: posterior
            .probs
            .into_iter()
            .map(|(k, v)| (k, v / total))
            .collect(),
    };
    Ok(ExactPosterior {
        posterior,
        log_marginal,
    })
}

/// The non-random block decomposition behind the marginally invariant decay
/// family: customers `i != j` share a block iff `min(d_ij, d_ji)` lies in the
/// indicator set.
#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    pub set: IndicatorSet,
    pub blocks: Vec<Vec<usize>>,
}

impl BlockDecomposition {
    pub fn block_of(&self, i: usize) -> usize {
        self.blocks
            .iter()
            .position(|b| b.contains(&i))
            .expect("blocks partition the customers")
    }
}

/// Builds the block decomposition `B_k = {i : J(i) = j}` with
/// `J(i) = min{j : j = i or symmetrized d_ij in A}` and verifies the
/// iff-membership property, reporting a witness on failure.
pub fn build_blocks(
    distances: &DistanceMatrix,
    set: IndicatorSet,
) -> Result<BlockDecomposition, OracleError> {
    let n = distances.n();
    let representative: Vec<usize> = (0..n)
        .map(|i| {
            (0..n)
                .find(|&j| j == i || set.contains(distances.symmetrized(i, j)))
                .expect("j = i always qualifies")
        })
        .collect();
    let mut blocks_by_rep: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &rep) in representative.iter().enumerate() {
        blocks_by_rep.entry(rep).or_default().push(i);
    }
    let blocks: Vec<Vec<usize>> = blocks_by_rep.into_values().collect();

    // the construction is only valid when shared-block membership coincides
    // with the indicator relation
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let same_block = representative[i] == representative[j];
            let related = set.contains(distances.symmetrized(i, j));
            if same_block != related {
                return Err(OracleError::BlockPropertyViolated {
                    i,
                    j,
                    rep: representative[i],
                });
            }
        }
    }
    Ok(BlockDecomposition { set, blocks })
}

/// The product law of independent CRPs, one per block: zero mass on any
/// partition with a part crossing blocks, otherwise the product of each
/// block's CRP probability.
pub fn block_product_crp_law(
    decomposition: &BlockDecomposition,
    n: usize,
    alpha_over_a: f64,
) -> PartitionDistribution {
    let block_of: Vec<usize> = {
        let mut map = vec![0usize; n];
        for (b, block) in decomposition.blocks.iter().enumerate() {
            for &i in block {
                map[i] = b;
            }
        }
        map
    };
    let mut law = PartitionDistribution::zeros(n);
    'partition: for rgs in all_partition_rgs(n) {
        let n_parts = rgs.iter().max().map_or(0, |&m| m + 1);
        // every part must live inside one block
        let mut part_block = vec![usize::MAX; n_parts];
        for (i, &part) in rgs.iter().enumerate() {
            if part_block[part] == usize::MAX {
                part_block[part] = block_of[i];
            } else if part_block[part] != block_of[i] {
                continue 'partition;
            }
        }
        let mut prob = 1.0;
        for block in &decomposition.blocks {
            let local: Vec<usize> = block.iter().map(|&i| rgs[i]).collect();
            prob *= crp_partition_prob(&rgs_from_labels(&local), alpha_over_a);
        }
        law.add(rgs, prob);
    }
    law
}

/// Residual of the three-customer marginal-invariance identity for
/// sequential distances with `d31 = d21 + d32`: the probability that the
/// outer pair shares a table with the middle customer absent, minus the same
/// probability with the middle customer present and marginalized out. Zero
/// for every scaled-indicator decay; generically nonzero otherwise.
pub fn check_sequential_invariance(decay: &DecayFunction, alpha: f64, d21: f64, d32: f64) -> f64 {
    let d31 = d21 + d32;
    let f31 = decay.eval(d31);
    let f32_ = decay.eval(d32);
    let f21 = decay.eval(d21);
    let absent = f31 / (f31 + alpha);
    let present =
        f31 / (f31 + f32_ + alpha) + (f32_ / (f31 + f32_ + alpha)) * (f21 / (f21 + alpha));
    absent - present
}

/// Residual of the all-separate-tables identity for `n + 1` customers at
/// mutual distance zero: `(p_{n+1})^n + n (p_{n+1})^{n-1} q_{n+1} (p_{n+1} +
/// q_{n+1}) - (p_n)^n` with `p_m = alpha / (alpha + (m - 1) f0)` and
/// `q_{n+1} = f0 / (alpha + n f0)`.
pub fn check_general_invariance_polynomial(n: usize, f0: f64, alpha: f64) -> f64 {
    assert!(n >= 2, "the identity is defined for n >= 2");
    let p_n = alpha / (alpha + (n as f64 - 1.0) * f0);
    let p_next = alpha / (alpha + n as f64 * f0);
    let q_next = f0 / (alpha + n as f64 * f0);
    p_next.powi(n as i32) + n as f64 * p_next.powi(n as i32 - 1) * q_next * (p_next + q_next)
        - p_n.powi(n as i32)
}

/// Candidate links and normalized probabilities per customer: self plus
/// every target with a positive decay weight.
fn link_candidates(
    distances: &DistanceMatrix,
    decay: &DecayFunction,
    alpha: f64,
) -> (Vec<Vec<usize>>, Vec<Vec<f64>>) {
    let n = distances.n();
    let mut candidates = Vec::with_capacity(n);
    let mut probs = Vec::with_capacity(n);
    for i in 0..n {
        let mut targets = vec![i];
        let mut masses = vec![alpha];
        let mut normalizer = alpha;
        for j in 0..n {
            if j == i {
                continue;
            }
            let w = decay.eval(distances.get(i, j));
            normalizer += w;
            if w > 0.0 {
                targets.push(j);
                masses.push(w);
            }
        }
        for mass in &mut masses {
            *mass /= normalizer;
        }
        candidates.push(targets);
        probs.push(masses);
    }
    (candidates, probs)
}

/// Odometer over one choice index per customer.
fn for_each_config(candidates: &[Vec<usize>], mut visit: impl FnMut(&[usize])) {
    let n = candidates.len();
    let mut choice = vec![0usize; n];
    loop {
        visit(&choice);
        let mut pos = 0;
        loop {
            if pos == n {
                return;
            }
            choice[pos] += 1;
            if choice[pos] < candidates[pos].len() {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}
