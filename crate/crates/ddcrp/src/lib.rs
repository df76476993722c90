//! Clustering with distance dependent Chinese restaurant processes.
//!
//! The distance dependent CRP is a prior over partitions expressed through
//! *customer links*: customer `i` links to customer `j` with mass `f(d_ij)`
//! for a non-increasing decay function `f` over pairwise distances, or to
//! itself with mass `alpha`; the partition is read off the connected
//! components of the link graph. With the identity decay over sequential
//! distances it reduces to the traditional CRP, and with general distances it
//! expresses non-exchangeable priors over partitions (time decay, network
//! reachability, and so on).
//!
//! The crate provides:
//!
//! * [`distance`] — distance matrices (sequential index lags, timestamp
//!   lags, graph hop counts) and decay families, with the cached link-weight
//!   rows the sampler iterates over.
//! * [`linkstate`] — link configurations, induced table assignments, and the
//!   split/join mechanics of link removal and reassignment.
//! * [`likelihood`] — collapsed per-table marginals for single-token
//!   (term-match) and Dirichlet-multinomial observation models.
//! * [`gibbs`] — the collapsed customer-link Gibbs sampler, the classic
//!   per-datum table sampler for the exchangeable special case, and
//!   Griddy-Gibbs hyperparameter updates.
//! * [`evalpred`] — held-out predictive likelihood, importance-sampled
//!   Bayes factors between link priors, autocorrelation diagnostics, and
//!   paired sampler comparisons.
//! * [`oracle`] — exact small-instance enumerations and the numeric
//!   marginal-invariance checkers that everything above is tested against.
//! * [`trace`] / [`cli`] — the on-disk trace format and the command-line
//!   front end.

pub mod cli;
pub mod distance;
pub mod evalpred;
pub mod gibbs;
pub mod likelihood;
pub mod linkstate;
pub mod oracle;
pub mod trace;

pub use distance::{DecayFunction, DistanceMatrix, IndicatorSet, MatrixKind, PriorWeights};
pub use gibbs::{ChainState, CrpState, HyperGrid, ModelConfig};
pub use likelihood::{BaseMeasure, Corpus, SparseDoc, TableStats};
pub use linkstate::{CustomerLinks, TableAssignment};
