//! Command-line front end: configuration, data ingestion, chain execution,
//! and report emission.
//!
//! Configuration comes from an optional TOML file plus flag overrides (flags
//! win); every run writes the fully resolved configuration into its output
//! directory so runs are self-describing. All outputs are deterministic
//! functions of `(inputs, seed)`: rerunning a command overwrites its output
//! files with bit-identical bytes.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::distance::{
    load_edge_list, load_timestamps, DecayFunction, DistanceMatrix, IndicatorSet, PriorWeights,
};
use crate::evalpred::{
    compare_samplers, estimate_log_bayes_factor, predict_heldout, MonteCarloEstimate,
};
use crate::gibbs::{chain_rng, ChainState, HyperGrid, ModelConfig};
use crate::likelihood::{
    load_base_probs, load_corpus, load_token_corpus, load_vocab, BaseMeasure, Corpus, SparseDoc,
};
use crate::oracle::{check_general_invariance_polynomial, check_sequential_invariance};
use crate::trace::{posterior_samples_from_records, read_trace, TraceRecord, TraceWriter};

/// Resolved run configuration. Field meanings follow the flags of the same
/// names; see the README for the file formats.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Bag-of-words corpus (`doc_id<TAB>term:count ...`) or token-sequence
    /// corpus for `langmodel`.
    pub corpus: Option<PathBuf>,
    /// Vocabulary file, one term per line; line number = 1-based term id.
    pub vocab: Option<PathBuf>,
    /// Customer count for prior-only runs without a corpus.
    pub n: Option<usize>,
    /// `sequential`, `timestamps:PATH`, `timestamps-abs:PATH`, or
    /// `edges:PATH`.
    pub distances: String,
    /// `identity`, `zero`, `window:A`, `exponential:A`, `logistic:A`,
    /// `indicator:empty|zero|all[:WEIGHT]`, or `reciprocal`.
    pub decay: String,
    pub alpha: f64,
    /// Griddy-Gibbs grid for alpha: `log:LO:HI:POINTS` or `list:V1,V2,...`
    /// (flat prior).
    pub alpha_grid: Option<String>,
    /// Griddy-Gibbs grid for the decay parameter, same syntax.
    pub decay_grid: Option<String>,
    /// `dirichlet:LAMBDA`, `termmatch`, `termmatch:G0_PATH`, or `none`
    /// (prior-only).
    pub base: String,
    pub sweeps: u64,
    pub burnin: u64,
    pub thinning: u64,
    pub seed: u64,
    pub chains: u64,
    /// Maximum number of chains run concurrently.
    pub workers: usize,
    pub shuffle_order: bool,
    pub output: PathBuf,
    /// Input trace for `predict` / `bayes-factor`.
    pub trace: Option<PathBuf>,
    /// Held-out document file (one corpus-format line) for `predict`.
    pub heldout_doc: Option<PathBuf>,
    /// Held-out position/timestamp for `predict`.
    pub heldout_time: Option<f64>,
    /// Distance grid for `check-invariance`.
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            vocab: None,
            n: None,
            distances: "sequential".to_string(),
            decay: "identity".to_string(),
            alpha: 1.0,
            alpha_grid: None,
            decay_grid: None,
            base: "dirichlet:1.0".to_string(),
            // defaults store (sweeps - burnin) / thinning = 1000 samples
            sweeps: 11_000,
            burnin: 1_000,
            thinning: 10,
            seed: 0,
            chains: 1,
            workers: 4,
            shuffle_order: false,
            output: PathBuf::from("ddcrp-out"),
            trace: None,
            heldout_doc: None,
            heldout_time: None,
            grid_min: 0.0,
            grid_max: 4.75,
            grid_points: 20,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("failed to read config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("bad config file {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps <= self.burnin {
            bail!(
                "sweeps ({}) must exceed burnin ({})",
                self.sweeps,
                self.burnin
            );
        }
        if self.thinning < 1 {
            bail!("thinning must be at least 1");
        }
        if self.chains < 1 {
            bail!("chains must be at least 1");
        }
        if self.workers < 1 {
            bail!("workers must be at least 1");
        }
        Ok(())
    }
}

pub fn parse_decay(spec: &str) -> Result<DecayFunction> {
    let (name, param) = match spec.split_once(':') {
        Some((name, param)) => (name, Some(param)),
        None => (spec, None),
    };
    let value = |default: Option<f64>| -> Result<f64> {
        match param {
            Some(p) => p
                .parse::<f64>()
                .with_context(|| format!("bad decay parameter {p:?} in {spec:?}")),
            None => default.ok_or_else(|| anyhow::anyhow!("decay {spec:?} needs a parameter")),
        }
    };
    match name {
        "identity" => Ok(DecayFunction::Identity),
        "zero" => Ok(DecayFunction::Zero),
        "reciprocal" => Ok(DecayFunction::Reciprocal),
        "window" => Ok(DecayFunction::Window {
            width: value(None)?,
        }),
        "exponential" | "exp" => Ok(DecayFunction::Exponential {
            scale: value(None)?,
        }),
        "logistic" => Ok(DecayFunction::Logistic {
            offset: value(None)?,
        }),
        "indicator" => {
            let param = param.ok_or_else(|| {
                anyhow::anyhow!("indicator decay needs a set: indicator:empty|zero|all[:WEIGHT]")
            })?;
            let (set_name, weight) = match param.split_once(':') {
                Some((set_name, w)) => (
                    set_name,
                    w.parse::<f64>()
                        .with_context(|| format!("bad indicator weight {w:?}"))?,
                ),
                None => (param, 1.0),
            };
            let set = match set_name {
                "empty" => IndicatorSet::Empty,
                "zero" => IndicatorSet::ZeroOnly,
                "all" => IndicatorSet::AllFinite,
                other => bail!("unknown indicator set {other:?} (use empty, zero, or all)"),
            };
            Ok(DecayFunction::Indicator { set, weight })
        }
        other => bail!("unknown decay family {other:?}"),
    }
}

fn parse_grid(spec: &str) -> Result<HyperGrid> {
    if let Some(rest) = spec.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            bail!("log grid syntax is log:LO:HI:POINTS (got {spec:?})");
        }
        let lo: f64 = parts[0].parse().context("bad grid lower bound")?;
        let hi: f64 = parts[1].parse().context("bad grid upper bound")?;
        let points: usize = parts[2].parse().context("bad grid point count")?;
        Ok(HyperGrid::log_spaced_flat(lo, hi, points)?)
    } else if let Some(rest) = spec.strip_prefix("list:") {
        let values: Vec<f64> = rest
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("bad grid value list {rest:?}"))?;
        let prior = vec![1.0 / values.len() as f64; values.len()];
        Ok(HyperGrid::new(values, prior)?)
    } else {
        bail!("grid syntax is log:LO:HI:POINTS or list:V1,V2,... (got {spec:?})");
    }
}

enum BaseSpec {
    None,
    Dirichlet(f64),
    TermMatchUniform,
    TermMatchFile(PathBuf),
}

fn parse_base(spec: &str) -> Result<BaseSpec> {
    match spec {
        "none" => Ok(BaseSpec::None),
        "termmatch" => Ok(BaseSpec::TermMatchUniform),
        _ => {
            if let Some(lambda) = spec.strip_prefix("dirichlet:") {
                Ok(BaseSpec::Dirichlet(
                    lambda.parse().context("bad dirichlet concentration")?,
                ))
            } else if let Some(path) = spec.strip_prefix("termmatch:") {
                Ok(BaseSpec::TermMatchFile(PathBuf::from(path)))
            } else {
                bail!(
                    "unknown base measure {spec:?} (use dirichlet:LAMBDA, termmatch, \
                     termmatch:PATH, or none)"
                );
            }
        }
    }
}

/// The inputs a sampling command operates on.
struct ModelInputs {
    distances: Arc<DistanceMatrix>,
    corpus: Option<Arc<Corpus>>,
    model: ModelConfig,
    /// Positions underlying a sequential distance matrix, when they exist;
    /// used by `predict`.
    times: Option<Vec<f64>>,
}

fn load_required_corpus(cfg: &RunConfig) -> Result<Corpus> {
    let vocab_path = cfg
        .vocab
        .as_ref()
        .context("a vocabulary file is required (--vocab)")?;
    let vocab = load_vocab(vocab_path)?;
    let corpus_path = cfg
        .corpus
        .as_ref()
        .context("a corpus file is required (--corpus)")?;
    Ok(load_corpus(corpus_path, vocab.len())?)
}

fn build_base(cfg: &RunConfig, corpus: Option<&Corpus>) -> Result<Option<BaseMeasure>> {
    match parse_base(&cfg.base)? {
        BaseSpec::None => Ok(None),
        BaseSpec::Dirichlet(lambda) => Ok(Some(BaseMeasure::dirichlet_multinomial(lambda)?)),
        BaseSpec::TermMatchUniform => {
            let corpus = corpus.context("a term-match base requires a corpus")?;
            Ok(Some(BaseMeasure::uniform_term_match(corpus.vocab_size())))
        }
        BaseSpec::TermMatchFile(path) => {
            let corpus = corpus.context("a term-match base requires a corpus")?;
            let g0 = load_base_probs(&path, corpus.vocab_size())?;
            Ok(Some(BaseMeasure::term_match(g0, corpus.vocab_size())?))
        }
    }
}

fn build_inputs(cfg: &RunConfig) -> Result<ModelInputs> {
    let base_spec = parse_base(&cfg.base)?;
    let corpus = match base_spec {
        BaseSpec::None => match (&cfg.corpus, &cfg.vocab) {
            (Some(_), Some(_)) => Some(load_required_corpus(cfg)?),
            _ => None,
        },
        _ => Some(load_required_corpus(cfg)?),
    };

    let (distances, times) = build_distances(cfg, corpus.as_ref().map(|c| c.len()))?;
    let base = build_base(cfg, corpus.as_ref())?;
    let decay = parse_decay(&cfg.decay)?;
    let mut model = ModelConfig::new(cfg.alpha, decay, base);
    model.shuffle_sweep_order = cfg.shuffle_order;
    Ok(ModelInputs {
        distances: Arc::new(distances),
        corpus: corpus.map(Arc::new),
        model,
        times,
    })
}

fn build_distances(
    cfg: &RunConfig,
    corpus_len: Option<usize>,
) -> Result<(DistanceMatrix, Option<Vec<f64>>)> {
    let resolve_n = |n_from_source: Option<usize>| -> Result<usize> {
        corpus_len
            .or(n_from_source)
            .or(cfg.n)
            .context("cannot determine the customer count; supply a corpus or --n")
    };
    if cfg.distances == "sequential" {
        let n = resolve_n(None)?;
        let times: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        Ok((DistanceMatrix::sequential_index(n)?, Some(times)))
    } else if let Some(path) = cfg.distances.strip_prefix("timestamps-abs:") {
        let times = load_timestamps(Path::new(path))?;
        check_count(corpus_len, times.len(), "timestamps")?;
        Ok((DistanceMatrix::timestamp_lags(&times, false)?, None))
    } else if let Some(path) = cfg.distances.strip_prefix("timestamps:") {
        let times = load_timestamps(Path::new(path))?;
        check_count(corpus_len, times.len(), "timestamps")?;
        Ok((DistanceMatrix::timestamp_lags(&times, true)?, Some(times)))
    } else if let Some(path) = cfg.distances.strip_prefix("edges:") {
        let n = resolve_n(None)?;
        let edges = load_edge_list(Path::new(path), n)?;
        Ok((DistanceMatrix::graph_hops(n, &edges)?, None))
    } else {
        bail!(
            "unknown distance source {:?} (use sequential, timestamps:PATH, \
             timestamps-abs:PATH, or edges:PATH)",
            cfg.distances
        );
    }
}

fn check_count(corpus_len: Option<usize>, got: usize, what: &str) -> Result<()> {
    if let Some(expected) = corpus_len {
        if got != expected {
            bail!("{what} cover {got} customers but the corpus has {expected} documents");
        }
    }
    Ok(())
}

fn prepare_output_dir(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.output)
        .with_context(|| format!("failed to create output directory {}", cfg.output.display()))?;
    let resolved = toml::to_string(cfg).context("failed to serialize resolved config")?;
    std::fs::write(cfg.output.join("config.toml"), resolved)
        .context("failed to write resolved config")?;
    Ok(())
}

/// Per-chain outcome recorded in the fit summary.
#[derive(Debug, Clone)]
pub struct ChainReport {
    pub chain: u64,
    pub stored_samples: usize,
    pub mean_tables: f64,
    pub final_log_joint: f64,
    pub final_alpha: f64,
    pub consistency_ok: bool,
}

#[derive(Debug, Clone)]
pub struct FitSummary {
    pub chains: Vec<ChainReport>,
}

/// Runs the configured chains of the customer-link sampler, writing one
/// trace file per chain and a run summary.
pub fn cmd_fit(cfg: &RunConfig) -> Result<FitSummary> {
    cfg.validate()?;
    let inputs = build_inputs(cfg)?;
    let alpha_grid = cfg.alpha_grid.as_deref().map(parse_grid).transpose()?;
    let decay_grid = cfg.decay_grid.as_deref().map(parse_grid).transpose()?;
    if decay_grid.is_some() && inputs.model.decay.param().is_none() {
        bail!(
            "decay_grid given but the decay family {:?} has no parameter",
            cfg.decay
        );
    }
    prepare_output_dir(cfg)?;

    let chain_ids: Vec<u64> = (0..cfg.chains).collect();
    let mut reports: Vec<Option<Result<ChainReport>>> = Vec::new();
    reports.resize_with(cfg.chains as usize, || None);
    for batch in chain_ids.chunks(cfg.workers) {
        std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .iter()
                .map(|&chain| {
                    let distances = inputs.distances.clone();
                    let corpus = inputs.corpus.clone();
                    let model = inputs.model.clone();
                    let alpha_grid = alpha_grid.clone();
                    let decay_grid = decay_grid.clone();
                    let trace_path = cfg.output.join(format!("trace_chain{chain}.txt"));
                    scope.spawn(move || {
                        run_single_chain(
                            chain,
                            distances,
                            corpus,
                            model,
                            alpha_grid,
                            decay_grid,
                            cfg.seed,
                            cfg.sweeps,
                            cfg.burnin,
                            cfg.thinning,
                            &trace_path,
                        )
                    })
                })
                .collect();
            for (handle, &chain) in handles.into_iter().zip(batch) {
                reports[chain as usize] = Some(handle.join().expect("chain worker must not panic"));
            }
        });
    }
    let chains: Vec<ChainReport> = reports
        .into_iter()
        .map(|r| r.expect("every chain ran"))
        .collect::<Result<_>>()?;

    let summary = FitSummary { chains };
    write_fit_summary(&cfg.output.join("summary.txt"), &summary)?;
    Ok(summary)
}

#[allow(clippy::too_many_arguments)]
fn run_single_chain(
    chain: u64,
    distances: Arc<DistanceMatrix>,
    corpus: Option<Arc<Corpus>>,
    model: ModelConfig,
    alpha_grid: Option<HyperGrid>,
    decay_grid: Option<HyperGrid>,
    seed: u64,
    sweeps: u64,
    burnin: u64,
    thinning: u64,
    trace_path: &Path,
) -> Result<ChainReport> {
    let mut state = ChainState::new(distances, corpus, model)?;
    let mut rng = chain_rng(seed, chain);
    let mut writer = TraceWriter::create(trace_path)?;
    let record = |state: &ChainState, sweep: u64, log_joint: f64, snapshot: bool| TraceRecord {
        chain,
        sweep,
        log_joint,
        n_tables: state.n_tables(),
        alpha: state.alpha(),
        decay_param: state.decay().param().unwrap_or(0.0),
        links: snapshot.then(|| state.links().clone()),
    };
    writer.write(&record(&state, 0, state.log_joint(), false))?;
    let mut stored = 0usize;
    let mut table_sum = 0u64;
    let mut last_log_joint = f64::NAN;
    for sweep in 1..=sweeps {
        let mut log_joint = state.ddcrp_sweep(&mut rng);
        if let Some(grid) = &alpha_grid {
            state.sample_alpha(grid, &mut rng)?;
            log_joint = state.log_joint();
        }
        if let Some(grid) = &decay_grid {
            state.sample_decay_param(grid, &mut rng)?;
            log_joint = state.log_joint();
        }
        let snapshot = sweep > burnin && (sweep - burnin).is_multiple_of(thinning);
        if snapshot {
            stored += 1;
            table_sum += state.n_tables() as u64;
        }
        writer.write(&record(&state, sweep, log_joint, snapshot))?;
        last_log_joint = log_joint;
    }
    writer.finish()?;
    let consistency_ok = state.check_consistency().is_ok();
    Ok(ChainReport {
        chain,
        stored_samples: stored,
        mean_tables: table_sum as f64 / stored.max(1) as f64,
        final_log_joint: last_log_joint,
        final_alpha: state.alpha(),
        consistency_ok,
    })
}

fn write_fit_summary(path: &Path, summary: &FitSummary) -> Result<()> {
    let mut text =
        String::from("chain stored_samples mean_tables final_log_joint final_alpha consistency\n");
    for report in &summary.chains {
        text.push_str(&format!(
            "{} {} {} {} {} {}\n",
            report.chain,
            report.stored_samples,
            report.mean_tables,
            report.final_log_joint,
            report.final_alpha,
            if report.consistency_ok {
                "ok"
            } else {
                "FAILED"
            }
        ));
    }
    std::fs::write(path, text).context("failed to write summary")?;
    Ok(())
}

/// Fully-observed model over token sequences: one independent chain per
/// document with sequential index distances inside the document and a shared
/// term base distribution. Traces for all documents go into one file, with
/// the document index as the chain id.
pub fn cmd_langmodel(cfg: &RunConfig) -> Result<FitSummary> {
    cfg.validate()?;
    let vocab_path = cfg
        .vocab
        .as_ref()
        .context("a vocabulary file is required (--vocab)")?;
    let vocab = load_vocab(vocab_path)?;
    let corpus_path = cfg
        .corpus
        .as_ref()
        .context("a corpus file is required (--corpus)")?;
    let docs = load_token_corpus(corpus_path, vocab.len())?;
    let decay = parse_decay(&cfg.decay)?;
    let g0 = match parse_base(&cfg.base)? {
        BaseSpec::TermMatchUniform | BaseSpec::Dirichlet(_) | BaseSpec::None => {
            BaseMeasure::uniform_term_match(vocab.len())
        }
        BaseSpec::TermMatchFile(path) => {
            let probs = load_base_probs(&path, vocab.len())?;
            BaseMeasure::term_match(probs, vocab.len())?
        }
    };
    prepare_output_dir(cfg)?;

    let mut writer = TraceWriter::create(&cfg.output.join("trace_langmodel.txt"))?;
    let mut reports = Vec::with_capacity(docs.len());
    for (doc_index, (_, tokens)) in docs.iter().enumerate() {
        let n = tokens.len();
        if n == 0 {
            bail!("document {} has no tokens", doc_index + 1);
        }
        let corpus = Corpus::new(
            vocab.len(),
            tokens.iter().map(|&t| SparseDoc::single_token(t)).collect(),
        )?;
        let distances = Arc::new(DistanceMatrix::sequential_index(n)?);
        let mut model = ModelConfig::new(cfg.alpha, decay, Some(g0.clone()));
        model.shuffle_sweep_order = cfg.shuffle_order;
        let mut state = ChainState::new(distances, Some(Arc::new(corpus)), model)?;
        let mut rng = chain_rng(cfg.seed, doc_index as u64);
        writer.write(&TraceRecord {
            chain: doc_index as u64,
            sweep: 0,
            log_joint: state.log_joint(),
            n_tables: state.n_tables(),
            alpha: state.alpha(),
            decay_param: state.decay().param().unwrap_or(0.0),
            links: None,
        })?;
        let mut stored = 0usize;
        let mut table_sum = 0u64;
        let mut last = f64::NAN;
        for sweep in 1..=cfg.sweeps {
            let log_joint = state.ddcrp_sweep(&mut rng);
            let snapshot = sweep > cfg.burnin && (sweep - cfg.burnin).is_multiple_of(cfg.thinning);
            if snapshot {
                stored += 1;
                table_sum += state.n_tables() as u64;
            }
            writer.write(&TraceRecord {
                chain: doc_index as u64,
                sweep,
                log_joint,
                n_tables: state.n_tables(),
                alpha: state.alpha(),
                decay_param: state.decay().param().unwrap_or(0.0),
                links: snapshot.then(|| state.links().clone()),
            })?;
            last = log_joint;
        }
        reports.push(ChainReport {
            chain: doc_index as u64,
            stored_samples: stored,
            mean_tables: table_sum as f64 / stored.max(1) as f64,
            final_log_joint: last,
            final_alpha: cfg.alpha,
            consistency_ok: state.check_consistency().is_ok(),
        });
    }
    writer.finish()?;
    let summary = FitSummary { chains: reports };
    write_fit_summary(&cfg.output.join("summary.txt"), &summary)?;
    Ok(summary)
}

/// Stored samples carry the hyperparameters they were drawn under; the
/// fixed-hyperparameter evaluators are only valid when those match the
/// stated configuration.
fn check_sample_hyperparams(
    samples: &crate::evalpred::PosteriorSamples,
    alpha: f64,
    decay: &DecayFunction,
) -> Result<()> {
    for (index, sample) in samples.iter().enumerate() {
        if sample.alpha != alpha {
            bail!(
                "stored sample {index} was drawn with alpha = {} but the configuration says \
                 {alpha}; this evaluator needs a fixed-hyperparameter trace (refit without \
                 --alpha-grid or pass the matching --alpha)",
                sample.alpha
            );
        }
        if let Some(param) = decay.param() {
            if sample.decay_param != param {
                bail!(
                    "stored sample {index} was drawn with decay parameter {} but the \
                     configuration says {param}; this evaluator needs a fixed-hyperparameter \
                     trace (refit without --decay-grid or pass the matching --decay)",
                    sample.decay_param
                );
            }
        }
    }
    Ok(())
}

/// Held-out predictive likelihood from a stored trace.
pub fn cmd_predict(cfg: &RunConfig) -> Result<MonteCarloEstimate> {
    let inputs = build_inputs(cfg)?;
    let corpus = inputs
        .corpus
        .as_ref()
        .context("predict requires a corpus")?;
    let base = inputs
        .model
        .base
        .as_ref()
        .context("predict requires an observation model (base != none)")?;
    let times = inputs
        .times
        .clone()
        .context("predict requires sequential distances (sequential or timestamps:PATH)")?;
    let trace_path = cfg.trace.as_ref().context("predict requires --trace")?;
    let records = read_trace(trace_path)?;
    let samples = posterior_samples_from_records(&records, corpus.len())?;
    check_sample_hyperparams(&samples, inputs.model.alpha, &inputs.model.decay)?;

    let heldout_path = cfg
        .heldout_doc
        .as_ref()
        .context("predict requires --heldout-doc")?;
    let heldout = load_corpus(heldout_path, corpus.vocab_size())?;
    if heldout.len() != 1 {
        bail!(
            "{} holds {} documents; the held-out file must contain exactly one",
            heldout_path.display(),
            heldout.len()
        );
    }
    let new_doc = heldout.doc(0).clone();
    let new_time = cfg
        .heldout_time
        .unwrap_or_else(|| times.last().copied().unwrap_or(0.0) + 1.0);

    let estimate = predict_heldout(
        &samples,
        corpus,
        base,
        &inputs.distances,
        &inputs.model.decay,
        inputs.model.alpha,
        &times,
        new_time,
        &new_doc,
    )?;
    prepare_output_dir(cfg)?;
    let mut csv = String::from("log_predictive,se_log,samples\n");
    csv.push_str(&format!(
        "{},{},{}\n",
        estimate.log_value, estimate.se_log, estimate.samples
    ));
    std::fs::write(cfg.output.join("predict.csv"), csv)?;
    Ok(estimate)
}

/// Importance-sampled log Bayes factor of the configured decay against the
/// identity-decay (traditional CRP) representation, from a stored trace.
pub fn cmd_bayes_factor(cfg: &RunConfig) -> Result<MonteCarloEstimate> {
    let inputs = build_inputs(cfg)?;
    let n = inputs.distances.n();
    let trace_path = cfg
        .trace
        .as_ref()
        .context("bayes-factor requires --trace")?;
    let records = read_trace(trace_path)?;
    let samples = posterior_samples_from_records(&records, n)?;
    check_sample_hyperparams(&samples, inputs.model.alpha, &inputs.model.decay)?;

    let sampled_prior = PriorWeights::new(&inputs.distances, &inputs.model.decay);
    let identity_prior = PriorWeights::new(&inputs.distances, &DecayFunction::Identity);
    let estimate = estimate_log_bayes_factor(
        &samples,
        &sampled_prior,
        inputs.model.alpha,
        &identity_prior,
        inputs.model.alpha,
    )?;
    prepare_output_dir(cfg)?;
    let mut csv = String::from("log_bf,se_log,samples\n");
    csv.push_str(&format!(
        "{},{},{}\n",
        estimate.log_value, estimate.se_log, estimate.samples
    ));
    std::fs::write(cfg.output.join("bayes_factor.csv"), csv)?;
    Ok(estimate)
}

/// Paired log-score trajectories of the customer-link sampler and the
/// table-reassignment sampler from matched seeds.
pub fn cmd_compare_samplers(cfg: &RunConfig) -> Result<()> {
    if cfg.sweeps < 1 {
        bail!("sweeps must be at least 1");
    }
    let inputs = build_inputs(cfg)?;
    let rows = compare_samplers(
        &inputs.distances,
        inputs.corpus.clone(),
        &inputs.model,
        cfg.seed,
        cfg.sweeps,
    )?;
    prepare_output_dir(cfg)?;
    let mut csv = String::from("sampler,sweep,log_score\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            row.sampler.as_str(),
            row.sweep,
            row.log_score
        ));
    }
    std::fs::write(cfg.output.join("compare_samplers.csv"), csv)?;
    Ok(())
}

/// Marginal-invariance residual reports: the three-customer sequential
/// identity on a distance grid, plus the equal-distance polynomial witnesses.
pub fn cmd_check_invariance(cfg: &RunConfig) -> Result<f64> {
    let decay = parse_decay(&cfg.decay)?;
    if cfg.grid_points < 2 {
        bail!("grid_points must be at least 2");
    }
    prepare_output_dir(cfg)?;
    let step = (cfg.grid_max - cfg.grid_min) / (cfg.grid_points - 1) as f64;
    let mut csv = String::from("d21,d32,residual\n");
    let mut max_abs: f64 = 0.0;
    for i in 0..cfg.grid_points {
        let d21 = cfg.grid_min + step * i as f64;
        for j in 0..cfg.grid_points {
            let d32 = cfg.grid_min + step * j as f64;
            let residual = check_sequential_invariance(&decay, cfg.alpha, d21, d32);
            max_abs = max_abs.max(residual.abs());
            csv.push_str(&format!("{d21},{d32},{residual}\n"));
        }
    }
    std::fs::write(cfg.output.join("invariance_grid.csv"), csv)?;

    let f0 = cfg.alpha / 2.0f64.sqrt();
    let mut summary = format!("max_abs_residual {max_abs}\n");
    for n in [2usize, 3] {
        let residual = check_general_invariance_polynomial(n, f0, cfg.alpha);
        summary.push_str(&format!(
            "separate_tables_polynomial n={n} f0=alpha/sqrt(2) residual {residual}\n"
        ));
    }
    std::fs::write(cfg.output.join("invariance_summary.txt"), summary)?;
    Ok(max_abs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_specs_parse() {
        assert_eq!(parse_decay("identity").unwrap(), DecayFunction::Identity);
        assert_eq!(parse_decay("zero").unwrap(), DecayFunction::Zero);
        assert_eq!(
            parse_decay("window:2").unwrap(),
            DecayFunction::Window { width: 2.0 }
        );
        assert_eq!(
            parse_decay("exponential:1.5").unwrap(),
            DecayFunction::Exponential { scale: 1.5 }
        );
        assert_eq!(
            parse_decay("logistic:3").unwrap(),
            DecayFunction::Logistic { offset: 3.0 }
        );
        assert_eq!(
            parse_decay("indicator:zero:2.0").unwrap(),
            DecayFunction::Indicator {
                set: IndicatorSet::ZeroOnly,
                weight: 2.0
            }
        );
        assert!(parse_decay("window").is_err());
        assert!(parse_decay("mystery:1").is_err());
    }

    #[test]
    fn grid_specs_parse() {
        let grid = parse_grid("list:0.5,1,2").unwrap();
        assert_eq!(grid.values(), &[0.5, 1.0, 2.0]);
        let grid = parse_grid("log:0.1:10:5").unwrap();
        assert_eq!(grid.values().len(), 5);
        assert!(parse_grid("linear:1:2").is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = RunConfig {
            sweeps: 10,
            burnin: 10,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.burnin = 5;
        assert!(cfg.validate().is_ok());
        cfg.thinning = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_file_round_trip() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let parsed: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(toml::to_string(&parsed).unwrap(), text);
    }
}
