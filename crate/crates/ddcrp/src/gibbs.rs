//! Collapsed Gibbs samplers and hyperparameter updates.
//!
//! [`ChainState`] is the customer-link sampler: each update deletes one
//! customer's outgoing link (splitting its table if that link was the only
//! connection), scores every candidate link with the three-case weights
//! (self link: the concentration; same table: the decay weight alone;
//! different table: decay weight times the table-merge likelihood ratio), and
//! samples a replacement by Gumbel-max over the log weights.
//!
//! [`CrpState`] is the per-datum table-reassignment sampler for the
//! exchangeable regime (Algorithm 3 of Neal, 2000); it targets the same
//! posterior as the link sampler when the decay is the identity over
//! sequential distances, which is what makes the two comparable.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::distance::{DecayFunction, DistanceMatrix, PriorWeights};
use crate::likelihood::{
    join_log_ratio, log_predictive, BaseMeasure, Corpus, LikelihoodError, TableStats,
};
use crate::linkstate::{AttachOutcome, CustomerLinks, DetachOutcome, LinkState, TableAssignment};

#[derive(Debug, Error)]
pub enum GibbsError {
    #[error("alpha must be positive (got {0})")]
    AlphaNotPositive(f64),
    #[error("corpus has {corpus} documents but the distance matrix covers {distances}")]
    SizeMismatch { corpus: usize, distances: usize },
    #[error("an observation model requires a corpus")]
    MissingCorpus,
    #[error("term {term} appears in the data but has zero base probability")]
    ZeroBaseProbability { term: usize },
    #[error("base distribution length {got} does not match vocabulary size {expected}")]
    BaseWrongLength { got: usize, expected: usize },
    #[error("link {customer} -> {target} has zero prior mass under the decay")]
    UnsupportedLink { customer: usize, target: usize },
    #[error("hyperparameter grid values must be positive and strictly increasing")]
    BadGridValues,
    #[error("grid prior masses must be non-negative and sum to 1 within 1e-12 (sum {0})")]
    BadGridPrior(f64),
    #[error("posterior mass is zero on the entire grid; the grid does not cover the support")]
    ZeroPosteriorOnGrid,
    #[error("decay family has no free parameter to sample")]
    UnparameterizedDecay,
    #[error(
        "the table sampler targets the exchangeable model only; it requires the identity decay \
         over sequential distances"
    )]
    NotCrpRegime,
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
}

#[derive(Debug, Error)]
#[error("chain state inconsistent after sweep {sweep}: {detail}")]
pub struct ConsistencyError {
    pub sweep: u64,
    pub detail: String,
}

/// Model hyperparameters: concentration, decay, and the observation model.
/// `base: None` runs the sampler on the link prior alone.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub alpha: f64,
    pub decay: DecayFunction,
    pub base: Option<BaseMeasure>,
    /// Shuffle the per-sweep update order (default: fixed order 0..n).
    pub shuffle_sweep_order: bool,
    /// Debug-build consistency check cadence, in sweeps.
    pub check_interval: u64,
}

impl ModelConfig {
    pub fn new(alpha: f64, decay: DecayFunction, base: Option<BaseMeasure>) -> Self {
        Self {
            alpha,
            decay,
            base,
            shuffle_sweep_order: false,
            check_interval: 1000,
        }
    }

    pub fn prior_only(alpha: f64, decay: DecayFunction) -> Self {
        Self::new(alpha, decay, None)
    }
}

/// Per-chain RNG stream derived from a master seed. Streams with different
/// ids never overlap.
pub fn chain_rng(master_seed: u64, chain: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(chain);
    rng
}

/// Samples an index from unnormalized log weights by the Gumbel-max trick;
/// entries at negative infinity carry no mass. Ties break toward the smaller
/// index. Returns `None` when nothing has mass.
pub fn gumbel_max_sample<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, &lw) in log_weights.iter().enumerate() {
        if lw == f64::NEG_INFINITY {
            continue;
        }
        let u: f64 = rng.random::<f64>().clamp(1e-300, 1.0 - 1e-16);
        let score = lw - (-u.ln()).ln();
        match best {
            Some((_, s)) if s >= score => {}
            _ => best = Some((idx, score)),
        }
    }
    best.map(|(idx, _)| idx)
}

/// One Gibbs chain over customer links, with per-table sufficient statistics
/// maintained incrementally. Owned by exactly one chain of execution.
#[derive(Debug, Clone)]
pub struct ChainState {
    distances: Arc<DistanceMatrix>,
    corpus: Option<Arc<Corpus>>,
    cfg: ModelConfig,
    prior: Arc<PriorWeights>,
    state: LinkState,
    stats: BTreeMap<usize, TableStats>,
    sweep: u64,
    scratch_weights: Vec<f64>,
    scratch_order: Vec<usize>,
}

impl ChainState {
    /// All-self-links initial state: valid under every decay and distance
    /// combination.
    pub fn new(
        distances: Arc<DistanceMatrix>,
        corpus: Option<Arc<Corpus>>,
        cfg: ModelConfig,
    ) -> Result<Self, GibbsError> {
        let n = distances.n();
        let links = CustomerLinks::all_self(n);
        Self::with_links(distances, corpus, cfg, links)
    }

    /// Starts from an explicit link configuration; every non-self link must
    /// have positive prior mass.
    pub fn with_links(
        distances: Arc<DistanceMatrix>,
        corpus: Option<Arc<Corpus>>,
        cfg: ModelConfig,
        links: CustomerLinks,
    ) -> Result<Self, GibbsError> {
        if cfg.alpha <= 0.0 || cfg.alpha.is_nan() {
            return Err(GibbsError::AlphaNotPositive(cfg.alpha));
        }
        let corpus = if cfg.base.is_some() {
            let corpus = corpus.ok_or(GibbsError::MissingCorpus)?;
            if corpus.len() != distances.n() {
                return Err(GibbsError::SizeMismatch {
                    corpus: corpus.len(),
                    distances: distances.n(),
                });
            }
            if let Some(BaseMeasure::TermMatch(g0)) = &cfg.base {
                if g0.len() != corpus.vocab_size() {
                    return Err(GibbsError::BaseWrongLength {
                        got: g0.len(),
                        expected: corpus.vocab_size(),
                    });
                }
                corpus.validate_single_token()?;
                for i in 0..corpus.len() {
                    let term = corpus.doc(i).entries()[0].0;
                    if g0[term as usize] <= 0.0 {
                        return Err(GibbsError::ZeroBaseProbability {
                            term: term as usize + 1,
                        });
                    }
                }
            }
            Some(corpus)
        } else {
            None
        };

        let prior = Arc::new(PriorWeights::new(&distances, &cfg.decay));
        for i in 0..links.len() {
            let j = links.get(i);
            if j != i && prior.log_weight(i, j) == f64::NEG_INFINITY {
                return Err(GibbsError::UnsupportedLink {
                    customer: i,
                    target: j,
                });
            }
        }
        let state = LinkState::new(links);
        let stats = match &corpus {
            Some(corpus) => rebuild_stats(&state, corpus),
            None => BTreeMap::new(),
        };
        let n = distances.n();
        Ok(Self {
            distances,
            corpus,
            cfg,
            prior,
            state,
            stats,
            sweep: 0,
            scratch_weights: vec![f64::NEG_INFINITY; n],
            scratch_order: (0..n).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.state.n()
    }

    pub fn links(&self) -> &CustomerLinks {
        self.state.links()
    }

    pub fn assignment(&self) -> TableAssignment {
        self.state.assignment()
    }

    pub fn n_tables(&self) -> usize {
        self.state.n_tables()
    }

    pub fn sweep_count(&self) -> u64 {
        self.sweep
    }

    pub fn alpha(&self) -> f64 {
        self.cfg.alpha
    }

    pub fn decay(&self) -> &DecayFunction {
        &self.cfg.decay
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn prior_weights(&self) -> &PriorWeights {
        &self.prior
    }

    /// Unnormalized log weights of every candidate link for customer `i`,
    /// evaluated against `z(c_{-i})`. Leaves the state unchanged.
    pub fn ddcrp_link_weights(&mut self, i: usize) -> Vec<f64> {
        let previous = self.state.links().get(i);
        self.detach(i);
        let mut weights = vec![f64::NEG_INFINITY; self.n()];
        self.fill_link_log_weights(i, &mut weights);
        self.attach(i, previous);
        weights
    }

    /// One full Gibbs sweep; returns the log joint
    /// `ln p(c) + ln p(x | z(c))` of the new state.
    pub fn ddcrp_sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        let mut order = std::mem::take(&mut self.scratch_order);
        if self.cfg.shuffle_sweep_order {
            order.shuffle(rng);
        }
        let mut weights = std::mem::take(&mut self.scratch_weights);
        for &i in &order {
            self.detach(i);
            self.fill_link_log_weights(i, &mut weights);
            let j = gumbel_max_sample(&weights, rng)
                .expect("alpha > 0 keeps the self-link weight finite");
            self.attach(i, j);
        }
        self.scratch_order = order;
        self.scratch_weights = weights;
        self.sweep += 1;
        if cfg!(debug_assertions) && self.sweep.is_multiple_of(self.cfg.check_interval) {
            if let Err(e) = self.check_consistency() {
                panic!("{e}");
            }
        }
        self.log_joint()
    }

    /// `ln p(c) + ln p(x | z(c))` of the current state.
    pub fn log_joint(&self) -> f64 {
        let mut log_joint = self.prior.log_prior_of(self.state.links(), self.cfg.alpha);
        if let Some(base) = &self.cfg.base {
            let corpus = self.corpus.as_ref().expect("base implies corpus");
            for stats in self.stats.values() {
                log_joint += stats
                    .log_marginal(base, corpus.vocab_size())
                    .expect("live tables are non-empty");
            }
        }
        log_joint
    }

    /// Draws a new concentration from its grid posterior and installs it.
    pub fn sample_alpha<R: Rng + ?Sized>(
        &mut self,
        grid: &HyperGrid,
        rng: &mut R,
    ) -> Result<f64, GibbsError> {
        let alpha = sample_alpha(self.state.links(), &self.prior, grid, rng)?;
        self.cfg.alpha = alpha;
        Ok(alpha)
    }

    /// Draws a new decay parameter from its grid posterior, installs it, and
    /// rebuilds the cached prior weights.
    pub fn sample_decay_param<R: Rng + ?Sized>(
        &mut self,
        grid: &HyperGrid,
        rng: &mut R,
    ) -> Result<f64, GibbsError> {
        let a = sample_decay_param(
            self.state.links(),
            &self.distances,
            &self.cfg.decay,
            self.cfg.alpha,
            grid,
            rng,
        )?;
        self.cfg.decay = self
            .cfg
            .decay
            .with_param(a)
            .expect("sample_decay_param verified the family is parameterized");
        self.prior = Arc::new(PriorWeights::new(&self.distances, &self.cfg.decay));
        Ok(a)
    }

    /// Verifies that the incremental state matches a from-scratch
    /// recomputation: tables from links, and sufficient statistics from
    /// memberships.
    pub fn check_consistency(&self) -> Result<(), ConsistencyError> {
        let derived = crate::linkstate::tables_from_links(self.state.links());
        if derived != self.state.assignment() {
            return Err(ConsistencyError {
                sweep: self.sweep,
                detail: "table assignment diverged from links".to_string(),
            });
        }
        if let Some(corpus) = &self.corpus {
            let fresh = rebuild_stats(&self.state, corpus);
            if fresh.len() != self.stats.len() {
                return Err(ConsistencyError {
                    sweep: self.sweep,
                    detail: "stale table statistics entries".to_string(),
                });
            }
            for (label, stats) in &fresh {
                let live = self.stats.get(label).ok_or_else(|| ConsistencyError {
                    sweep: self.sweep,
                    detail: format!("missing statistics for table {label}"),
                })?;
                if !live.structural_eq(stats) {
                    return Err(ConsistencyError {
                        sweep: self.sweep,
                        detail: format!("statistics for table {label} diverged"),
                    });
                }
            }
        }
        Ok(())
    }

    fn detach(&mut self, i: usize) {
        match self.state.detach(i) {
            DetachOutcome::AlreadySelf | DetachOutcome::NoSplit => {}
            DetachOutcome::Split { old, kept, other } => {
                let Some(corpus) = &self.corpus else {
                    return;
                };
                let old_stats = self.stats.remove(&old).expect("stats track live tables");
                let kept_members = self.state.table_members(kept);
                let other_members = self.state.table_members(other);
                let (small_label, big_label, small_members) =
                    if kept_members.len() <= other_members.len() {
                        (kept, other, kept_members)
                    } else {
                        (other, kept, other_members)
                    };
                let small = TableStats::from_docs(small_members.iter().map(|&m| corpus.doc(m)));
                let mut big = old_stats;
                big.subtract(&small);
                self.stats.insert(small_label, small);
                self.stats.insert(big_label, big);
            }
        }
    }

    fn attach(&mut self, i: usize, j: usize) {
        match self.state.attach(i, j) {
            AttachOutcome::NoChange => {}
            AttachOutcome::Merged { merged, absorbed } => {
                if self.corpus.is_none() {
                    return;
                }
                let absorbed_stats = self
                    .stats
                    .remove(&absorbed)
                    .expect("stats track live tables");
                self.stats
                    .get_mut(&merged)
                    .expect("surviving table keeps its stats")
                    .merge(&absorbed_stats);
            }
        }
    }

    /// Three-case candidate weights; requires customer `i` detached.
    fn fill_link_log_weights(&self, i: usize, out: &mut [f64]) {
        debug_assert_eq!(self.state.links().get(i), i);
        out[i] = self.cfg.alpha.ln();
        let Some(base) = &self.cfg.base else {
            for (j, slot) in out.iter_mut().enumerate() {
                if j != i {
                    *slot = self.prior.log_weight(i, j);
                }
            }
            return;
        };
        let corpus = self.corpus.as_ref().expect("base implies corpus");
        let vocab_size = corpus.vocab_size();
        let label_i = self.state.label_of(i);
        let my_stats = &self.stats[&label_i];
        // the likelihood ratio depends on the candidate only through its
        // table, so compute it once per table
        let mut ratio_cache: HashMap<usize, f64> = HashMap::new();
        for (j, slot) in out.iter_mut().enumerate() {
            if j == i {
                continue;
            }
            let log_w = self.prior.log_weight(i, j);
            if log_w == f64::NEG_INFINITY {
                *slot = f64::NEG_INFINITY;
                continue;
            }
            let label_j = self.state.label_of(j);
            if label_j == label_i {
                *slot = log_w;
            } else {
                let ratio = *ratio_cache.entry(label_j).or_insert_with(|| {
                    join_log_ratio(my_stats, &self.stats[&label_j], base, vocab_size)
                        .expect("live tables are non-empty")
                });
                *slot = log_w + ratio;
            }
        }
    }
}

fn rebuild_stats(state: &LinkState, corpus: &Corpus) -> BTreeMap<usize, TableStats> {
    state
        .table_labels()
        .map(|label| {
            let stats =
                TableStats::from_docs(state.table_members(label).iter().map(|&m| corpus.doc(m)));
            (label, stats)
        })
        .collect()
}

/// A finite grid of hyperparameter candidates with prior masses, for
/// Griddy-Gibbs updates.
#[derive(Debug, Clone)]
pub struct HyperGrid {
    values: Vec<f64>,
    log_prior: Vec<f64>,
}

impl HyperGrid {
    pub fn new(values: Vec<f64>, prior: Vec<f64>) -> Result<Self, GibbsError> {
        if values.is_empty() || values.len() != prior.len() {
            return Err(GibbsError::BadGridValues);
        }
        for (idx, &v) in values.iter().enumerate() {
            if v <= 0.0 || v.is_nan() || (idx > 0 && v <= values[idx - 1]) {
                return Err(GibbsError::BadGridValues);
            }
        }
        let sum: f64 = prior.iter().sum();
        if prior.iter().any(|&p| p < 0.0 || p.is_nan()) || (sum - 1.0).abs() > 1e-12 {
            return Err(GibbsError::BadGridPrior(sum));
        }
        let log_prior = prior.iter().map(|&p| p.ln()).collect();
        Ok(Self { values, log_prior })
    }

    /// Log-spaced grid with a flat prior: the shipped default when no grid
    /// is supplied explicitly.
    pub fn log_spaced_flat(lo: f64, hi: f64, points: usize) -> Result<Self, GibbsError> {
        if lo <= 0.0 || lo.is_nan() || hi <= lo || points < 2 {
            return Err(GibbsError::BadGridValues);
        }
        let step = (hi / lo).ln() / (points - 1) as f64;
        let values: Vec<f64> = (0..points).map(|k| lo * (step * k as f64).exp()).collect();
        let prior = vec![1.0 / points as f64; points];
        Self::new(values, prior)
    }

    pub fn single(value: f64) -> Result<Self, GibbsError> {
        Self::new(vec![value], vec![1.0])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn log_prior(&self) -> &[f64] {
        &self.log_prior
    }

    fn sample<R: Rng + ?Sized>(&self, log_masses: &[f64], rng: &mut R) -> Result<f64, GibbsError> {
        let max = log_masses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(GibbsError::ZeroPosteriorOnGrid);
        }
        let masses: Vec<f64> = log_masses.iter().map(|&lm| (lm - max).exp()).collect();
        let total: f64 = masses.iter().sum();
        let u: f64 = rng.random::<f64>() * total;
        let mut cumulative = 0.0;
        for (idx, &mass) in masses.iter().enumerate() {
            cumulative += mass;
            if u < cumulative {
                return Ok(self.values[idx]);
            }
        }
        Ok(*self.values.last().expect("grid is non-empty"))
    }
}

/// Griddy-Gibbs draw from the concentration posterior
/// `p(alpha | c) proportional to alpha^K * prod_i (alpha + S_i)^-1 * p(alpha)`
/// where `K` counts self-links and `S_i` is customer `i`'s total decay mass.
pub fn sample_alpha<R: Rng + ?Sized>(
    links: &CustomerLinks,
    prior: &PriorWeights,
    grid: &HyperGrid,
    rng: &mut R,
) -> Result<f64, GibbsError> {
    let log_masses = alpha_grid_log_posterior(links, prior, grid);
    grid.sample(&log_masses, rng)
}

/// Unnormalized log posterior of each grid point; exposed so reductions of
/// the posterior can be verified directly.
pub fn alpha_grid_log_posterior(
    links: &CustomerLinks,
    prior: &PriorWeights,
    grid: &HyperGrid,
) -> Vec<f64> {
    let k = links.self_link_count() as f64;
    grid.values
        .iter()
        .zip(&grid.log_prior)
        .map(|(&alpha, &lp)| {
            let mut log_mass = k * alpha.ln() + lp;
            for i in 0..links.len() {
                log_mass -= (alpha + prior.weight_sum(i)).ln();
            }
            log_mass
        })
        .collect()
}

/// Griddy-Gibbs draw from the decay-parameter posterior
/// `p(a | c, alpha) proportional to prod_{i: c_i != i} f(d_{i c_i}, a) *
/// prod_i (alpha + S_i(a))^-1 * p(a | alpha)`. Window decays get their
/// support constraint automatically: any link longer than the candidate
/// width zeroes that grid point.
pub fn sample_decay_param<R: Rng + ?Sized>(
    links: &CustomerLinks,
    distances: &DistanceMatrix,
    family: &DecayFunction,
    alpha: f64,
    grid: &HyperGrid,
    rng: &mut R,
) -> Result<f64, GibbsError> {
    let log_masses = decay_grid_log_posterior(links, distances, family, alpha, grid)?;
    grid.sample(&log_masses, rng)
}

pub fn decay_grid_log_posterior(
    links: &CustomerLinks,
    distances: &DistanceMatrix,
    family: &DecayFunction,
    alpha: f64,
    grid: &HyperGrid,
) -> Result<Vec<f64>, GibbsError> {
    if family.with_param(1.0).is_none() {
        return Err(GibbsError::UnparameterizedDecay);
    }
    let n = links.len();
    let mut out = Vec::with_capacity(grid.values.len());
    for (&a, &lp) in grid.values.iter().zip(&grid.log_prior) {
        let decay = family.with_param(a).expect("family is parameterized");
        let mut log_mass = lp;
        for i in 0..n {
            let mut row = alpha;
            for j in 0..n {
                if j != i {
                    row += decay.eval(distances.get(i, j));
                }
            }
            log_mass -= row.ln();
            let target = links.get(i);
            if target != i {
                log_mass += decay.eval(distances.get(i, target)).ln();
            }
        }
        out.push(log_mass);
    }
    Ok(out)
}

/// Log probability of a partition under the traditional CRP, from the block
/// sizes: `K ln alpha + sum_k ln (n_k - 1)! - ln rising(alpha, n)`.
pub fn crp_partition_log_prob(sizes: &[usize], alpha: f64) -> f64 {
    let n: usize = sizes.iter().sum();
    let mut log_prob = sizes.len() as f64 * alpha.ln();
    for &size in sizes {
        log_prob += ln_gamma(size as f64);
    }
    log_prob - (ln_gamma(alpha + n as f64) - ln_gamma(alpha))
}

/// Collapsed per-datum table-reassignment sampler for the exchangeable
/// regime. State is the table label of each datum plus per-table statistics.
#[derive(Debug, Clone)]
pub struct CrpState {
    corpus: Option<Arc<Corpus>>,
    base: Option<BaseMeasure>,
    alpha: f64,
    labels: Vec<usize>,
    tables: Vec<TableStats>,
    occupancy: Vec<Vec<usize>>,
    sweep: u64,
}

impl CrpState {
    /// All-singletons initial state. Rejects configurations outside the
    /// traditional-CRP regime, where this kernel would target the wrong
    /// distribution.
    pub fn new(
        distances: &DistanceMatrix,
        corpus: Option<Arc<Corpus>>,
        cfg: &ModelConfig,
    ) -> Result<Self, GibbsError> {
        if cfg.decay != DecayFunction::Identity || !distances.is_sequential() {
            return Err(GibbsError::NotCrpRegime);
        }
        if cfg.alpha <= 0.0 || cfg.alpha.is_nan() {
            return Err(GibbsError::AlphaNotPositive(cfg.alpha));
        }
        let n = distances.n();
        let corpus = if cfg.base.is_some() {
            let corpus = corpus.ok_or(GibbsError::MissingCorpus)?;
            if corpus.len() != n {
                return Err(GibbsError::SizeMismatch {
                    corpus: corpus.len(),
                    distances: n,
                });
            }
            if let Some(BaseMeasure::TermMatch(_)) = &cfg.base {
                corpus.validate_single_token()?;
            }
            Some(corpus)
        } else {
            None
        };
        let tables: Vec<TableStats> = (0..n)
            .map(|i| match &corpus {
                Some(corpus) => TableStats::from_docs([corpus.doc(i)]),
                None => {
                    let mut stats = TableStats::new();
                    stats.add_doc(&crate::likelihood::SparseDoc::empty());
                    stats
                }
            })
            .collect();
        Ok(Self {
            corpus,
            base: cfg.base.clone(),
            alpha: cfg.alpha,
            labels: (0..n).collect(),
            tables,
            occupancy: (0..n).map(|i| vec![i]).collect(),
            sweep: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn n_tables(&self) -> usize {
        self.tables.len()
    }

    pub fn sweep_count(&self) -> u64 {
        self.sweep
    }

    /// Canonical partition key of the current state.
    pub fn partition_rgs(&self) -> Vec<usize> {
        crate::linkstate::rgs_from_labels(&self.labels)
    }

    /// One reassignment pass; returns the log score
    /// `ln p_CRP(z) + ln p(x | z)` of the new state.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        let n = self.n();
        for i in 0..n {
            self.remove_datum(i);
            let mut weights = Vec::with_capacity(self.tables.len() + 1);
            for (stats, members) in self.tables.iter().zip(&self.occupancy) {
                let predictive = self.log_predictive_for(i, Some(stats));
                weights.push((members.len() as f64).ln() + predictive);
            }
            weights.push(self.alpha.ln() + self.log_predictive_for(i, None));
            let choice = gumbel_max_sample(&weights, rng)
                .expect("alpha > 0 keeps the new-table weight finite");
            self.insert_datum(i, choice);
        }
        self.sweep += 1;
        self.log_score()
    }

    /// `ln p_CRP(z) + ln p(x | z)`: the score in the table representation,
    /// shared with the link sampler through the common partition.
    pub fn log_score(&self) -> f64 {
        let sizes: Vec<usize> = self.occupancy.iter().map(|o| o.len()).collect();
        let mut score = crp_partition_log_prob(&sizes, self.alpha);
        if let (Some(base), Some(corpus)) = (&self.base, &self.corpus) {
            for stats in &self.tables {
                score += stats
                    .log_marginal(base, corpus.vocab_size())
                    .expect("live tables are non-empty");
            }
        }
        score
    }

    fn log_predictive_for(&self, i: usize, table: Option<&TableStats>) -> f64 {
        match (&self.base, &self.corpus) {
            (Some(base), Some(corpus)) => {
                log_predictive(corpus.doc(i), table, base, corpus.vocab_size())
            }
            _ => 0.0,
        }
    }

    fn remove_datum(&mut self, i: usize) {
        let t = self.labels[i];
        let pos = self.occupancy[t]
            .iter()
            .position(|&x| x == i)
            .expect("occupancy tracks labels");
        self.occupancy[t].swap_remove(pos);
        if self.occupancy[t].is_empty() {
            self.occupancy.swap_remove(t);
            self.tables.swap_remove(t);
            // the table that moved into slot t keeps its members' labels fresh
            if t < self.occupancy.len() {
                for &m in &self.occupancy[t] {
                    self.labels[m] = t;
                }
            }
        } else if let Some(corpus) = &self.corpus {
            let doc_stats = TableStats::from_docs([corpus.doc(i)]);
            self.tables[t].subtract(&doc_stats);
        } else {
            let empty = TableStats::from_docs([&crate::likelihood::SparseDoc::empty()]);
            self.tables[t].subtract(&empty);
        }
    }

    fn insert_datum(&mut self, i: usize, choice: usize) {
        if choice == self.tables.len() {
            let stats = match &self.corpus {
                Some(corpus) => TableStats::from_docs([corpus.doc(i)]),
                None => TableStats::from_docs([&crate::likelihood::SparseDoc::empty()]),
            };
            self.tables.push(stats);
            self.occupancy.push(vec![i]);
            self.labels[i] = self.tables.len() - 1;
        } else {
            match &self.corpus {
                Some(corpus) => self.tables[choice].add_doc(corpus.doc(i)),
                None => self.tables[choice].add_doc(&crate::likelihood::SparseDoc::empty()),
            }
            self.occupancy[choice].push(i);
            self.labels[i] = choice;
        }
    }
}
