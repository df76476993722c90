//! Distance matrices and decay functions.
//!
//! A [`DistanceMatrix`] holds pairwise distances `d[i][j]` between customers,
//! with `f64::INFINITY` as the sentinel for "unreachable / no link allowed".
//! A [`DecayFunction`] maps a distance to a non-negative link affinity; every
//! family maps infinity to exactly zero, which is what makes sequential
//! matrices (all entries above the diagonal infinite) forbid forward links.

use std::collections::VecDeque;
use std::path::Path;

use thiserror::Error;

/// Hard cap on the number of customers in a dense distance matrix.
///
/// The Gibbs sampler considers every customer as a link candidate, so memory
/// and per-sweep cost are both quadratic; the cap keeps accidental huge inputs
/// from thrashing the machine.
pub const MAX_CUSTOMERS: usize = 100_000;

#[derive(Debug, Error)]
pub enum DistanceError {
    #[error("need at least one customer")]
    Empty,
    #[error("{n} customers exceeds the supported maximum {max}")]
    TooLarge { n: usize, max: usize },
    #[error("distance entry ({i}, {j}) is {value}, expected a non-negative value or infinity")]
    NegativeEntry { i: usize, j: usize, value: f64 },
    #[error("matrix flagged sequential but entry ({i}, {j}) above the diagonal is finite")]
    NotSequential { i: usize, j: usize },
    #[error("sequential timestamps must be non-decreasing: times[{index}] = {value} is less than its predecessor {previous}")]
    DecreasingTimestamps {
        index: usize,
        value: f64,
        previous: f64,
    },
    #[error("timestamp at line {index} is not finite")]
    NonFiniteTimestamp { index: usize },
    #[error("edge ({u}, {v}) references a customer outside 1..={n}")]
    EdgeOutOfRange { u: usize, v: usize, n: usize },
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
}

/// Whether a matrix is constrained to backward-only links.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    /// `d[i][j] = INFINITY` for every `j > i`; customers only link backward.
    Sequential,
    /// No structural constraint on the entries.
    General,
}

/// Dense pairwise distance matrix over `n` customers.
///
/// The diagonal is never read: the self-link probability comes from the
/// concentration parameter, not from `d[i][i]`.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    kind: MatrixKind,
    d: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds a matrix from a row-major slice of `n * n` entries, validating
    /// non-negativity and (for sequential matrices) the upper-triangle
    /// infinity constraint.
    pub fn from_raw(n: usize, kind: MatrixKind, entries: Vec<f64>) -> Result<Self, DistanceError> {
        if n == 0 {
            return Err(DistanceError::Empty);
        }
        if n > MAX_CUSTOMERS {
            return Err(DistanceError::TooLarge {
                n,
                max: MAX_CUSTOMERS,
            });
        }
        assert_eq!(entries.len(), n * n, "entry count must be n*n");
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let value = entries[i * n + j];
                if value.is_nan() || value < 0.0 {
                    return Err(DistanceError::NegativeEntry { i, j, value });
                }
                if kind == MatrixKind::Sequential && j > i && value.is_finite() {
                    return Err(DistanceError::NotSequential { i, j });
                }
            }
        }
        Ok(Self {
            n,
            kind,
            d: entries,
        })
    }

    /// Index-lag distances `d[i][j] = i - j` for `j < i`, infinite above the
    /// diagonal.
    pub fn sequential_index(n: usize) -> Result<Self, DistanceError> {
        if n == 0 {
            return Err(DistanceError::Empty);
        }
        if n > MAX_CUSTOMERS {
            return Err(DistanceError::TooLarge {
                n,
                max: MAX_CUSTOMERS,
            });
        }
        let mut d = vec![f64::INFINITY; n * n];
        for i in 0..n {
            for j in 0..i {
                d[i * n + j] = (i - j) as f64;
            }
            d[i * n + i] = 0.0;
        }
        Ok(Self {
            n,
            kind: MatrixKind::Sequential,
            d,
        })
    }

    /// Timestamp-lag distances.
    ///
    /// Sequential: `d[i][j] = times[i] - times[j]` for `j < i` and infinity
    /// for `j > i`; timestamps must be non-decreasing in index order.
    /// General: symmetric absolute lags.
    pub fn timestamp_lags(times: &[f64], sequential: bool) -> Result<Self, DistanceError> {
        let n = times.len();
        if n == 0 {
            return Err(DistanceError::Empty);
        }
        if n > MAX_CUSTOMERS {
            return Err(DistanceError::TooLarge {
                n,
                max: MAX_CUSTOMERS,
            });
        }
        for (index, &value) in times.iter().enumerate() {
            if !value.is_finite() {
                return Err(DistanceError::NonFiniteTimestamp { index });
            }
            if sequential && index > 0 && value < times[index - 1] {
                return Err(DistanceError::DecreasingTimestamps {
                    index,
                    value,
                    previous: times[index - 1],
                });
            }
        }
        let mut d = vec![f64::INFINITY; n * n];
        for i in 0..n {
            d[i * n + i] = 0.0;
            for j in 0..i {
                let lag = times[i] - times[j];
                d[i * n + j] = if sequential { lag } else { lag.abs() };
                if !sequential {
                    d[j * n + i] = lag.abs();
                }
            }
        }
        Ok(Self {
            n,
            kind: if sequential {
                MatrixKind::Sequential
            } else {
                MatrixKind::General
            },
            d,
        })
    }

    /// Shortest-path hop counts over an undirected graph; unreachable pairs
    /// get infinity. Edges are 0-based index pairs.
    pub fn graph_hops(n: usize, edges: &[(usize, usize)]) -> Result<Self, DistanceError> {
        if n == 0 {
            return Err(DistanceError::Empty);
        }
        if n > MAX_CUSTOMERS {
            return Err(DistanceError::TooLarge {
                n,
                max: MAX_CUSTOMERS,
            });
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(DistanceError::EdgeOutOfRange {
                    u: u + 1,
                    v: v + 1,
                    n,
                });
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let mut d = vec![f64::INFINITY; n * n];
        let mut queue = VecDeque::new();
        for source in 0..n {
            // one BFS per source
            let row = &mut d[source * n..(source + 1) * n];
            row[source] = 0.0;
            queue.clear();
            queue.push_back(source);
            while let Some(u) = queue.pop_front() {
                let hops = row[u];
                for &v in &adjacency[u] {
                    if row[v].is_infinite() {
                        row[v] = hops + 1.0;
                        queue.push_back(v);
                    }
                }
            }
        }
        Ok(Self {
            n,
            kind: MatrixKind::General,
            d,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn is_sequential(&self) -> bool {
        self.kind == MatrixKind::Sequential
    }

    /// Distance from customer `i` to customer `j`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    /// `min(d[i][j], d[j][i])`, the symmetrized distance used by the
    /// marginal-invariance block construction.
    #[inline]
    pub fn symmetrized(&self, i: usize, j: usize) -> f64 {
        self.get(i, j).min(self.get(j, i))
    }
}

/// Membership set for indicator decays `f(d) = a * 1[d in A]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndicatorSet {
    /// `A` is empty: the decay is identically zero.
    Empty,
    /// `A = {0}`: only zero-distance pairs can link.
    ZeroOnly,
    /// `A` is all finite distances.
    AllFinite,
}

impl IndicatorSet {
    pub fn contains(self, d: f64) -> bool {
        match self {
            IndicatorSet::Empty => false,
            IndicatorSet::ZeroOnly => d == 0.0,
            IndicatorSet::AllFinite => d.is_finite(),
        }
    }
}

/// Non-increasing map from distance to link affinity, with `f(inf) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayFunction {
    /// `f(d) = 1[d < width]`.
    Window { width: f64 },
    /// `f(d) = exp(-d / scale)`.
    Exponential { scale: f64 },
    /// `f(d) = exp(-d + offset) / (1 + exp(-d + offset))`.
    Logistic { offset: f64 },
    /// `f(d) = 1` for finite `d`; reproduces the traditional CRP over
    /// sequential distances.
    Identity,
    /// `f(d) = 0`: every customer links to itself.
    Zero,
    /// `f(d) = weight * 1[d in set]`, the family characterizing marginal
    /// invariance.
    Indicator { set: IndicatorSet, weight: f64 },
    /// `f(d) = 1 / d`; expresses normalized pairwise-affinity priors through
    /// `d = 1 / h`.
    Reciprocal,
}

impl DecayFunction {
    /// Evaluates the decay at distance `d`.
    ///
    /// Total on `d >= 0` plus infinity; infinity maps to exactly `0.0` for
    /// every family.
    #[inline]
    pub fn eval(&self, d: f64) -> f64 {
        debug_assert!(d >= 0.0 || d.is_infinite());
        if d.is_infinite() {
            return 0.0;
        }
        match *self {
            DecayFunction::Window { width } => {
                if d < width {
                    1.0
                } else {
                    0.0
                }
            }
            DecayFunction::Exponential { scale } => (-d / scale).exp(),
            // 1 / (1 + exp(d - offset)) is the overflow-safe form.
            DecayFunction::Logistic { offset } => 1.0 / (1.0 + (d - offset).exp()),
            DecayFunction::Identity => 1.0,
            DecayFunction::Zero => 0.0,
            DecayFunction::Indicator { set, weight } => {
                if set.contains(d) {
                    weight
                } else {
                    0.0
                }
            }
            DecayFunction::Reciprocal => {
                if d == 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / d
                }
            }
        }
    }

    /// The family parameter, when the family has one.
    pub fn param(&self) -> Option<f64> {
        match *self {
            DecayFunction::Window { width } => Some(width),
            DecayFunction::Exponential { scale } => Some(scale),
            DecayFunction::Logistic { offset } => Some(offset),
            DecayFunction::Indicator { weight, .. } => Some(weight),
            DecayFunction::Identity | DecayFunction::Zero | DecayFunction::Reciprocal => None,
        }
    }

    /// Same family with the parameter replaced; `None` for parameter-free
    /// families.
    pub fn with_param(&self, a: f64) -> Option<DecayFunction> {
        match *self {
            DecayFunction::Window { .. } => Some(DecayFunction::Window { width: a }),
            DecayFunction::Exponential { .. } => Some(DecayFunction::Exponential { scale: a }),
            DecayFunction::Logistic { .. } => Some(DecayFunction::Logistic { offset: a }),
            DecayFunction::Indicator { set, .. } => {
                Some(DecayFunction::Indicator { set, weight: a })
            }
            DecayFunction::Identity | DecayFunction::Zero | DecayFunction::Reciprocal => None,
        }
    }
}

/// Per-customer link affinities `w[i][j] = f(d[i][j])` cached in log space,
/// plus the linear row sums that normalize the link prior.
///
/// The prior never changes while `(D, f)` are fixed, so one cache serves an
/// entire run; it is immutable and safe to share across chains.
#[derive(Debug, Clone)]
pub struct PriorWeights {
    n: usize,
    log_w: Vec<f64>,
    row_sum: Vec<f64>,
}

impl PriorWeights {
    pub fn new(distances: &DistanceMatrix, decay: &DecayFunction) -> Self {
        let n = distances.n();
        let mut log_w = vec![f64::NEG_INFINITY; n * n];
        let mut row_sum = vec![0.0; n];
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let w = decay.eval(distances.get(i, j));
                sum += w;
                log_w[i * n + j] = w.ln();
            }
            row_sum[i] = sum;
        }
        Self { n, log_w, row_sum }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `ln f(d[i][j])`; negative infinity where the affinity is zero.
    #[inline]
    pub fn log_weight(&self, i: usize, j: usize) -> f64 {
        self.log_w[i * self.n + j]
    }

    /// `sum_{j != i} f(d[i][j])`.
    #[inline]
    pub fn weight_sum(&self, i: usize) -> f64 {
        self.row_sum[i]
    }

    /// Normalized log prior of a single link choice `c_i = j`.
    #[inline]
    pub fn log_link_prob(&self, i: usize, j: usize, alpha: f64) -> f64 {
        let log_mass = if i == j {
            alpha.ln()
        } else {
            self.log_weight(i, j)
        };
        log_mass - (alpha + self.row_sum[i]).ln()
    }

    /// Log prior of a full link configuration under the independent-links
    /// model.
    pub fn log_prior_of(&self, links: &crate::linkstate::CustomerLinks, alpha: f64) -> f64 {
        links
            .iter()
            .enumerate()
            .map(|(i, j)| self.log_link_prob(i, j, alpha))
            .sum()
    }
}

/// Reads one timestamp per line; `#` starts a comment, blank lines ignored.
pub fn load_timestamps(path: &Path) -> Result<Vec<f64>, DistanceError> {
    let text = std::fs::read_to_string(path).map_err(|source| DistanceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut times = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let value: f64 = line.parse().map_err(|_| DistanceError::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            message: format!("expected a real number, got {line:?}"),
        })?;
        times.push(value);
    }
    Ok(times)
}

/// Reads an undirected edge list, one `u v` pair of 1-based indices per line;
/// `#` starts a comment. Returns 0-based pairs.
pub fn load_edge_list(path: &Path, n: usize) -> Result<Vec<(usize, usize)>, DistanceError> {
    let text = std::fs::read_to_string(path).map_err(|source| DistanceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let parse = |tok: &str| -> Result<usize, DistanceError> {
            tok.parse::<usize>()
                .ok()
                .filter(|&v| v >= 1)
                .ok_or_else(|| DistanceError::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("expected a 1-based index, got {tok:?}"),
                })
        };
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(u), Some(v), None) => {
                let (u, v) = (parse(u)?, parse(v)?);
                if u > n || v > n {
                    return Err(DistanceError::EdgeOutOfRange { u, v, n });
                }
                edges.push((u - 1, v - 1));
            }
            _ => {
                return Err(DistanceError::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: "expected exactly two indices per line".to_string(),
                })
            }
        }
    }
    Ok(edges)
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => line[..pos].trim(),
        None => line.trim(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn window_decay_values() {
        let f = DecayFunction::Window { width: 2.0 };
        assert_eq!(f.eval(1.0), 1.0);
        assert_eq!(f.eval(2.0), 0.0);
        assert_eq!(f.eval(f64::INFINITY), 0.0);
    }

    #[test]
    fn exponential_decay_values() {
        let f = DecayFunction::Exponential { scale: 1.0 };
        assert_eq!(f.eval(0.0), 1.0);
        assert!((f.eval(2.0_f64.ln()) - 0.5).abs() < 1e-15);
        assert_eq!(f.eval(f64::INFINITY), 0.0);
    }

    #[test]
    fn logistic_decay_values() {
        let f = DecayFunction::Logistic { offset: 2.0 };
        assert!((f.eval(2.0) - 0.5).abs() < 1e-15);
        assert_eq!(f.eval(f64::INFINITY), 0.0);
        // no overflow far beyond the offset
        assert_eq!(f.eval(1e6), 0.0);
    }

    #[test]
    fn identity_decay_values() {
        assert_eq!(DecayFunction::Identity.eval(1e300), 1.0);
        assert_eq!(DecayFunction::Identity.eval(f64::INFINITY), 0.0);
    }

    #[test]
    fn indicator_decay_values() {
        let zero_only = DecayFunction::Indicator {
            set: IndicatorSet::ZeroOnly,
            weight: 3.0,
        };
        assert_eq!(zero_only.eval(0.0), 3.0);
        assert_eq!(zero_only.eval(0.5), 0.0);
        let all = DecayFunction::Indicator {
            set: IndicatorSet::AllFinite,
            weight: 2.0,
        };
        assert_eq!(all.eval(7.0), 2.0);
        assert_eq!(all.eval(f64::INFINITY), 0.0);
    }

    #[test]
    fn sequential_index_small() {
        let d = DistanceMatrix::sequential_index(3).unwrap();
        assert_eq!(d.get(1, 0), 1.0);
        assert_eq!(d.get(2, 0), 2.0);
        assert_eq!(d.get(2, 1), 1.0);
        assert!(d.get(0, 1).is_infinite());
        assert!(d.get(0, 2).is_infinite());
        assert!(d.get(1, 2).is_infinite());
        assert!(d.is_sequential());

        let single = DistanceMatrix::sequential_index(1).unwrap();
        assert_eq!(single.n(), 1);

        let two = DistanceMatrix::sequential_index(2).unwrap();
        assert_eq!(two.get(1, 0), 1.0);
        assert!(two.get(0, 1).is_infinite());
    }

    #[test]
    fn timestamp_lags_sequential() {
        let d = DistanceMatrix::timestamp_lags(&[0.0, 2.0, 5.0], true).unwrap();
        assert_eq!(d.get(1, 0), 2.0);
        assert_eq!(d.get(2, 0), 5.0);
        assert_eq!(d.get(2, 1), 3.0);
        assert!(d.get(0, 2).is_infinite());

        let equal = DistanceMatrix::timestamp_lags(&[1.0, 1.0, 1.0], true).unwrap();
        assert_eq!(equal.get(2, 0), 0.0);
        assert_eq!(equal.get(1, 0), 0.0);

        assert!(matches!(
            DistanceMatrix::timestamp_lags(&[3.0, 1.0], true),
            Err(DistanceError::DecreasingTimestamps { index: 1, .. })
        ));
    }

    #[test]
    fn timestamp_lags_general_absolute() {
        let d = DistanceMatrix::timestamp_lags(&[3.0, 1.0], false).unwrap();
        assert_eq!(d.get(0, 1), 2.0);
        assert_eq!(d.get(1, 0), 2.0);
        assert_eq!(d.kind(), MatrixKind::General);
    }

    #[test]
    fn graph_hops_small() {
        let d = DistanceMatrix::graph_hops(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(d.get(0, 2), 2.0);
        assert_eq!(d.get(2, 0), 2.0);

        let disconnected = DistanceMatrix::graph_hops(2, &[]).unwrap();
        assert!(disconnected.get(0, 1).is_infinite());

        assert!(matches!(
            DistanceMatrix::graph_hops(2, &[(0, 5)]),
            Err(DistanceError::EdgeOutOfRange { .. })
        ));
    }

    // Independent oracle: all-pairs shortest hops by Floyd-Warshall.
    fn floyd_warshall(n: usize, edges: &[(usize, usize)]) -> Vec<f64> {
        let mut d = vec![f64::INFINITY; n * n];
        for i in 0..n {
            d[i * n + i] = 0.0;
        }
        for &(u, v) in edges {
            d[u * n + v] = 1.0;
            d[v * n + u] = 1.0;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i * n + k] + d[k * n + j];
                    if via < d[i * n + j] {
                        d[i * n + j] = via;
                    }
                }
            }
        }
        d
    }

    #[test]
    fn graph_hops_matches_floyd_warshall() {
        let n = 4;
        let edges = [(0, 1), (2, 3)];
        let d = DistanceMatrix::graph_hops(n, &edges).unwrap();
        let oracle = floyd_warshall(n, &edges);
        for i in 0..n {
            for j in 0..n {
                assert_eq!(d.get(i, j), oracle[i * n + j], "entry ({i}, {j})");
            }
        }
        assert!(d.get(0, 2).is_infinite());
        assert_eq!(d.get(0, 1), 1.0);
    }

    #[test]
    fn graph_hops_finite_reachability_is_transitive() {
        // connectedness must be transitive for the block construction
        let d = DistanceMatrix::graph_hops(6, &[(0, 1), (1, 2), (3, 4)]).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..6 {
                    if d.symmetrized(i, j).is_finite() && d.symmetrized(j, k).is_finite() {
                        assert!(d.symmetrized(i, k).is_finite());
                    }
                }
            }
        }
    }

    #[test]
    fn prior_weights_cache_row_sums() {
        let d = DistanceMatrix::sequential_index(4).unwrap();
        let w = PriorWeights::new(&d, &DecayFunction::Identity);
        for i in 0..4 {
            assert_eq!(w.weight_sum(i), i as f64);
        }
        assert_eq!(w.log_weight(2, 1), 0.0);
        assert!(w.log_weight(1, 2).is_infinite());
        let alpha = 2.0;
        assert!((w.log_link_prob(3, 3, alpha) - (alpha.ln() - (alpha + 3.0).ln())).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn decay_is_non_increasing(
            family in 0usize..5,
            a in 0.1f64..10.0,
            d1 in 0.0f64..50.0,
            delta in 0.0f64..50.0,
        ) {
            let f = match family {
                0 => DecayFunction::Window { width: a },
                1 => DecayFunction::Exponential { scale: a },
                2 => DecayFunction::Logistic { offset: a },
                3 => DecayFunction::Identity,
                _ => DecayFunction::Zero,
            };
            let d2 = d1 + delta;
            prop_assert!(f.eval(d1) >= f.eval(d2));
            prop_assert!(f.eval(d1).is_finite() && f.eval(d1) >= 0.0);
            prop_assert_eq!(f.eval(f64::INFINITY), 0.0);
        }

        #[test]
        fn sequential_matrices_have_infinite_upper_triangle(n in 1usize..8) {
            let d = DistanceMatrix::sequential_index(n).unwrap();
            for i in 0..n {
                for j in 0..n {
                    if j > i {
                        prop_assert!(d.get(i, j).is_infinite());
                    } else if j < i {
                        prop_assert!(d.get(i, j).is_finite());
                    }
                }
            }
        }
    }
}
