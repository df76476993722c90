//! Marginal likelihood terms for both observation models.
//!
//! The joint likelihood factors over tables, so the samplers only ever need
//! the log marginal of one table's pooled observations and the log ratio that
//! a table merge induces. Two observation models are supported:
//!
//! * [`BaseMeasure::TermMatch`]: every customer is a single word token and a
//!   table holds one term drawn from a base distribution; the table marginal
//!   is that term's base probability when all members agree and negative
//!   infinity otherwise.
//! * [`BaseMeasure::DirichletMultinomial`]: customers are documents and each
//!   table's term distribution is integrated out against a symmetric
//!   Dirichlet, giving the Dirichlet-multinomial marginal of the pooled
//!   counts.
//!
//! Everything is carried in log space; the only sources of negative infinity
//! are term-match indicator violations.

use std::collections::BTreeMap;
use std::path::Path;

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LikelihoodError {
    #[error("table marginal requires a non-empty member set")]
    EmptyTable,
    #[error("term-match tables require single-token members (doc {doc} has {tokens} tokens)")]
    NotSingleToken { doc: usize, tokens: u64 },
    #[error("base distribution must sum to 1 within 1e-12 (got {sum})")]
    BaseNotNormalized { sum: f64 },
    #[error("base distribution length {got} does not match vocabulary size {expected}")]
    BaseWrongLength { got: usize, expected: usize },
    #[error("base probability at term {term} is {value}, expected a finite non-negative value")]
    BadBaseProbability { term: usize, value: f64 },
    #[error("dirichlet concentration must be positive (got {0})")]
    NonPositiveConcentration(f64),
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus is empty")]
    Empty,
    #[error("term id {term} out of range 1..={vocab_size} (doc {doc})")]
    TermOutOfRange {
        doc: usize,
        term: usize,
        vocab_size: usize,
    },
}

/// A sparse bag of words: sorted `(term, count)` pairs with positive counts.
/// Term ids are 0-based internally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseDoc {
    entries: Vec<(u32, u32)>,
    tokens: u64,
}

impl SparseDoc {
    pub fn new(mut entries: Vec<(u32, u32)>) -> Self {
        entries.retain(|&(_, count)| count > 0);
        entries.sort_unstable_by_key(|&(term, _)| term);
        // collapse duplicate term ids
        let mut merged: Vec<(u32, u32)> = Vec::with_capacity(entries.len());
        for (term, count) in entries {
            match merged.last_mut() {
                Some((last, c)) if *last == term => *c += count,
                _ => merged.push((term, count)),
            }
        }
        let tokens = merged.iter().map(|&(_, c)| c as u64).sum();
        Self {
            entries: merged,
            tokens,
        }
    }

    pub fn single_token(term: u32) -> Self {
        Self {
            entries: vec![(term, 1)],
            tokens: 1,
        }
    }

    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
            tokens: 0,
        }
    }

    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn tokens(&self) -> u64 {
        self.tokens
    }
}

/// A document collection over a fixed vocabulary.
#[derive(Debug, Clone)]
pub struct Corpus {
    vocab_size: usize,
    docs: Vec<SparseDoc>,
    ids: Vec<String>,
}

impl Corpus {
    pub fn new(vocab_size: usize, docs: Vec<SparseDoc>) -> Result<Self, CorpusError> {
        if docs.is_empty() {
            return Err(CorpusError::Empty);
        }
        for (i, doc) in docs.iter().enumerate() {
            for &(term, _) in doc.entries() {
                if term as usize >= vocab_size {
                    return Err(CorpusError::TermOutOfRange {
                        doc: i,
                        term: term as usize + 1,
                        vocab_size,
                    });
                }
            }
        }
        let ids = (0..docs.len()).map(|i| format!("doc{}", i + 1)).collect();
        Ok(Self {
            vocab_size,
            docs,
            ids,
        })
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Self {
        assert_eq!(ids.len(), self.docs.len());
        self.ids = ids;
        self
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn doc(&self, i: usize) -> &SparseDoc {
        &self.docs[i]
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    /// Checks that every document is a single token, the layout the
    /// term-match model requires.
    pub fn validate_single_token(&self) -> Result<(), LikelihoodError> {
        for (doc, d) in self.docs.iter().enumerate() {
            if d.tokens() != 1 {
                return Err(LikelihoodError::NotSingleToken {
                    doc,
                    tokens: d.tokens(),
                });
            }
        }
        Ok(())
    }
}

/// The per-table observation model with its component integrated out.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseMeasure {
    /// Base distribution over terms; tables hold a single term.
    TermMatch(Vec<f64>),
    /// Symmetric Dirichlet prior over each table's term distribution.
    DirichletMultinomial { lambda: f64 },
}

impl BaseMeasure {
    pub fn term_match(g0: Vec<f64>, vocab_size: usize) -> Result<Self, LikelihoodError> {
        if g0.len() != vocab_size {
            return Err(LikelihoodError::BaseWrongLength {
                got: g0.len(),
                expected: vocab_size,
            });
        }
        let mut sum = 0.0;
        for (term, &p) in g0.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(LikelihoodError::BadBaseProbability { term, value: p });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(LikelihoodError::BaseNotNormalized { sum });
        }
        Ok(BaseMeasure::TermMatch(g0))
    }

    pub fn uniform_term_match(vocab_size: usize) -> Self {
        BaseMeasure::TermMatch(vec![1.0 / vocab_size as f64; vocab_size])
    }

    pub fn dirichlet_multinomial(lambda: f64) -> Result<Self, LikelihoodError> {
        if lambda <= 0.0 || lambda.is_nan() {
            return Err(LikelihoodError::NonPositiveConcentration(lambda));
        }
        Ok(BaseMeasure::DirichletMultinomial { lambda })
    }
}

/// Pooled sufficient statistics for one table: term-count accumulator, token
/// total, member count, and a cached log marginal that is invalidated on any
/// membership change.
#[derive(Debug, Clone, Default)]
pub struct TableStats {
    counts: BTreeMap<u32, u32>,
    tokens: u64,
    members: usize,
    cache: std::cell::Cell<Option<f64>>,
}

impl TableStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_docs<'a>(docs: impl IntoIterator<Item = &'a SparseDoc>) -> Self {
        let mut stats = Self::new();
        for doc in docs {
            stats.add_doc(doc);
        }
        stats
    }

    pub fn tokens(&self) -> u64 {
        self.tokens
    }

    pub fn members(&self) -> usize {
        self.members
    }

    pub fn count(&self, term: u32) -> u32 {
        self.counts.get(&term).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.counts.iter().map(|(&t, &c)| (t, c))
    }

    pub fn add_doc(&mut self, doc: &SparseDoc) {
        for &(term, count) in doc.entries() {
            *self.counts.entry(term).or_insert(0) += count;
        }
        self.tokens += doc.tokens();
        self.members += 1;
        self.cache.set(None);
    }

    pub fn merge(&mut self, other: &TableStats) {
        for (&term, &count) in &other.counts {
            *self.counts.entry(term).or_insert(0) += count;
        }
        self.tokens += other.tokens;
        self.members += other.members;
        self.cache.set(None);
    }

    /// Removes `other`'s contribution; `other` must be a subset.
    pub fn subtract(&mut self, other: &TableStats) {
        for (&term, &count) in &other.counts {
            let slot = self.counts.get_mut(&term).expect("subset counts");
            debug_assert!(*slot >= count);
            *slot -= count;
            if *slot == 0 {
                self.counts.remove(&term);
            }
        }
        debug_assert!(self.tokens >= other.tokens && self.members >= other.members);
        self.tokens -= other.tokens;
        self.members -= other.members;
        self.cache.set(None);
    }

    /// Cached log marginal under `base`; recomputed only after membership
    /// changes.
    pub fn log_marginal(
        &self,
        base: &BaseMeasure,
        vocab_size: usize,
    ) -> Result<f64, LikelihoodError> {
        if let Some(value) = self.cache.get() {
            return Ok(value);
        }
        let value = table_log_marginal(self, base, vocab_size)?;
        self.cache.set(Some(value));
        Ok(value)
    }

    pub fn structural_eq(&self, other: &TableStats) -> bool {
        self.counts == other.counts && self.tokens == other.tokens && self.members == other.members
    }
}

/// Log marginal probability of one table's pooled observations.
///
/// Term-match: `ln g0(w)` when all member tokens are the same term `w`,
/// negative infinity otherwise. Dirichlet-multinomial:
/// `ln Gamma(V*lambda) - ln Gamma(V*lambda + T) + sum_v [ln Gamma(lambda + m_v) - ln Gamma(lambda)]`.
pub fn table_log_marginal(
    stats: &TableStats,
    base: &BaseMeasure,
    vocab_size: usize,
) -> Result<f64, LikelihoodError> {
    if stats.members == 0 {
        return Err(LikelihoodError::EmptyTable);
    }
    match base {
        BaseMeasure::TermMatch(g0) => {
            if stats.tokens != stats.members as u64 {
                return Err(LikelihoodError::NotSingleToken {
                    doc: 0,
                    tokens: stats.tokens,
                });
            }
            if stats.counts.len() != 1 {
                return Ok(f64::NEG_INFINITY);
            }
            let (&term, _) = stats.counts.iter().next().expect("one entry");
            Ok(g0[term as usize].ln())
        }
        BaseMeasure::DirichletMultinomial { lambda } => {
            let v_lambda = vocab_size as f64 * lambda;
            let lg_lambda = ln_gamma(*lambda);
            let mut log_prob = ln_gamma(v_lambda) - ln_gamma(v_lambda + stats.tokens as f64);
            for (_, count) in stats.counts() {
                log_prob += ln_gamma(lambda + count as f64) - lg_lambda;
            }
            Ok(log_prob)
        }
    }
}

/// Log ratio `ln p(k union l) - ln p(k) - ln p(l)`: the likelihood change
/// when a new link merges tables `k` and `l`.
///
/// Computed as the predictive probability of appending `k`'s counts to `l`
/// minus `k`'s own marginal, which touches only `k`'s distinct terms; a test
/// verifies it against the from-scratch merged marginal.
pub fn join_log_ratio(
    k_stats: &TableStats,
    l_stats: &TableStats,
    base: &BaseMeasure,
    vocab_size: usize,
) -> Result<f64, LikelihoodError> {
    if k_stats.members == 0 || l_stats.members == 0 {
        return Err(LikelihoodError::EmptyTable);
    }
    match base {
        BaseMeasure::TermMatch(g0) => {
            if k_stats.counts.len() != 1 || l_stats.counts.len() != 1 {
                return Ok(f64::NEG_INFINITY);
            }
            let (&term_k, _) = k_stats.counts.iter().next().expect("one entry");
            let (&term_l, _) = l_stats.counts.iter().next().expect("one entry");
            if term_k == term_l {
                // one redundant base draw cancels
                Ok(-g0[term_k as usize].ln())
            } else {
                Ok(f64::NEG_INFINITY)
            }
        }
        BaseMeasure::DirichletMultinomial { lambda } => {
            let append = log_predictive_counts(
                k_stats.counts().map(|(t, c)| (t, c as u64)),
                k_stats.tokens,
                l_stats,
                *lambda,
                vocab_size,
            );
            Ok(append - k_stats.log_marginal(base, vocab_size)?)
        }
    }
}

/// `ln p(new counts | table)` under the Dirichlet-multinomial: the marginal
/// of the pooled table after appending, divided by the table's marginal.
pub fn log_predictive_counts(
    new_counts: impl Iterator<Item = (u32, u64)>,
    new_tokens: u64,
    table: &TableStats,
    lambda: f64,
    vocab_size: usize,
) -> f64 {
    let v_lambda = vocab_size as f64 * lambda;
    let base_tokens = table.tokens() as f64;
    let mut log_prob =
        ln_gamma(v_lambda + base_tokens) - ln_gamma(v_lambda + base_tokens + new_tokens as f64);
    for (term, count) in new_counts {
        let existing = table.count(term) as f64;
        log_prob += ln_gamma(lambda + existing + count as f64) - ln_gamma(lambda + existing);
    }
    log_prob
}

/// `ln p(doc | table)`: Dirichlet-multinomial predictive of a whole document
/// given an existing (possibly empty) table.
pub fn log_predictive_doc(
    doc: &SparseDoc,
    table: &TableStats,
    lambda: f64,
    vocab_size: usize,
) -> f64 {
    log_predictive_counts(
        doc.entries().iter().map(|&(t, c)| (t, c as u64)),
        doc.tokens(),
        table,
        lambda,
        vocab_size,
    )
}

/// Predictive log probability of a document joining a table (`None` for a
/// fresh table), under either observation model.
///
/// Term-match: joining an occupied table is free when the token matches the
/// table's term and impossible otherwise; a fresh table draws the token from
/// the base distribution. Term-match documents must be single tokens — the
/// chain constructors and the prediction entry point validate this before
/// reaching here.
pub fn log_predictive(
    doc: &SparseDoc,
    table: Option<&TableStats>,
    base: &BaseMeasure,
    vocab_size: usize,
) -> f64 {
    match base {
        BaseMeasure::TermMatch(g0) => {
            assert_eq!(doc.tokens(), 1, "term-match observations are single tokens");
            let term = doc.entries()[0].0;
            match table {
                None => g0[term as usize].ln(),
                Some(stats) => {
                    if stats.counts.len() == 1 && stats.count(term) > 0 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                }
            }
        }
        BaseMeasure::DirichletMultinomial { lambda } => match table {
            Some(stats) => log_predictive_doc(doc, stats, *lambda, vocab_size),
            None => log_predictive_doc(doc, &TableStats::new(), *lambda, vocab_size),
        },
    }
}

/// Reads a vocabulary file: one term string per line, line number = term id.
pub fn load_vocab(path: &Path) -> Result<Vec<String>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text.lines().map(|l| l.trim().to_string()).collect())
}

/// Reads a bag-of-words corpus: one document per line,
/// `doc_id<TAB>term:count term:count ...` with 1-based term ids.
pub fn load_corpus(path: &Path, vocab_size: usize) -> Result<Corpus, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut docs = Vec::new();
    let mut ids = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        let (doc_id, rest) = split_doc_line(line, path, lineno)?;
        let mut entries = Vec::new();
        for token in rest.split_whitespace() {
            let (term, count) = token.split_once(':').ok_or_else(|| CorpusError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("expected term:count, got {token:?}"),
            })?;
            let term: usize = term.parse().map_err(|_| CorpusError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("bad term id {term:?}"),
            })?;
            let count: u32 = count.parse().map_err(|_| CorpusError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("bad count {count:?}"),
            })?;
            if term < 1 || term > vocab_size {
                return Err(CorpusError::TermOutOfRange {
                    doc: docs.len(),
                    term,
                    vocab_size,
                });
            }
            entries.push(((term - 1) as u32, count));
        }
        docs.push(SparseDoc::new(entries));
        ids.push(doc_id.to_string());
    }
    Ok(Corpus::new(vocab_size, docs)?.with_ids(ids))
}

/// Reads a token-sequence corpus: one document per line,
/// `doc_id<TAB>t1 t2 t3 ...` with 1-based term ids.
pub fn load_token_corpus(
    path: &Path,
    vocab_size: usize,
) -> Result<Vec<(String, Vec<u32>)>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut docs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        let (doc_id, rest) = split_doc_line(line, path, lineno)?;
        let mut tokens = Vec::new();
        for token in rest.split_whitespace() {
            let term: usize = token.parse().map_err(|_| CorpusError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("bad term id {token:?}"),
            })?;
            if term < 1 || term > vocab_size {
                return Err(CorpusError::TermOutOfRange {
                    doc: docs.len(),
                    term,
                    vocab_size,
                });
            }
            tokens.push((term - 1) as u32);
        }
        docs.push((doc_id.to_string(), tokens));
    }
    if docs.is_empty() {
        return Err(CorpusError::Empty);
    }
    Ok(docs)
}

/// Reads a base distribution: one probability per line, aligned with the
/// vocabulary file.
pub fn load_base_probs(path: &Path, vocab_size: usize) -> Result<Vec<f64>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut probs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let p: f64 = line.parse().map_err(|_| CorpusError::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            message: format!("expected a probability, got {line:?}"),
        })?;
        probs.push(p);
    }
    if probs.len() != vocab_size {
        return Err(CorpusError::Parse {
            path: path.display().to_string(),
            line: probs.len(),
            message: format!(
                "expected {vocab_size} probabilities (one per vocabulary term), got {}",
                probs.len()
            ),
        });
    }
    Ok(probs)
}

fn split_doc_line<'a>(
    line: &'a str,
    path: &Path,
    lineno: usize,
) -> Result<(&'a str, &'a str), CorpusError> {
    line.split_once('\t')
        .ok_or_else(|| CorpusError::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            message: "expected doc_id<TAB>payload".to_string(),
        })
        .map(|(id, rest)| (id.trim(), rest))
}
