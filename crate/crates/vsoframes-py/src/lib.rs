//! Python bindings: corpus construction, model fitting, point estimates,
//! DM numerics and wordset evaluation.

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vsoframes::corpus::{self, ArgPosition, RawDoc, RawTriple, Vocabulary};
use vsoframes::diagnostics::TraceRecord;
use vsoframes::dirmult::{self, DirichletPrior};
use vsoframes::evalx::{self, DiscretizeSource, ReferenceLexicon, Wordset};
use vsoframes::fit::{FitEngine, FitOptions, ResamplePolicy};
use vsoframes::hyper::HyperSchedule;
use vsoframes::model::{
    generate_synthetic, AssignmentState, EstimateKind, ModelConfig, ModelVariant, NonePolicy,
    PlantedSpec, PointEstimates, SynthOptions,
};

fn to_py_err(err: vsoframes::Error) -> PyErr {
    match &err {
        vsoframes::Error::Io { .. } => PyIOError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn parse_prior(alpha: &Bound<'_, PyAny>, dim: usize) -> PyResult<DirichletPrior> {
    if let Ok(scalar) = alpha.extract::<f64>() {
        return Ok(DirichletPrior::symmetric(scalar, dim));
    }
    let full: Vec<f64> = alpha.extract()?;
    Ok(DirichletPrior::Full(full))
}

fn parse_position(position: Option<&str>) -> PyResult<Option<ArgPosition>> {
    match position {
        None => Ok(None),
        Some("verb") => Ok(Some(ArgPosition::Verb)),
        Some("subj") => Ok(Some(ArgPosition::Subject)),
        Some("obj") => Ok(Some(ArgPosition::Object)),
        Some(other) => Err(PyValueError::new_err(format!(
            "position must be verb/subj/obj, got {other:?}"
        ))),
    }
}

/// A vocabulary-encoded corpus of document-grouped VSO tuples.
#[pyclass(name = "Corpus", from_py_object)]
#[derive(Clone)]
struct PyCorpus {
    corpus: corpus::Corpus,
    vocab: Vocabulary,
}

#[pymethods]
impl PyCorpus {
    /// Build from (doc_id, verb, subj, obj) tuples; subj/obj may be None.
    #[staticmethod]
    #[pyo3(signature = (tuples, cutoff = 10_000))]
    fn from_tuples(
        tuples: Vec<(String, String, Option<String>, Option<String>)>,
        cutoff: usize,
    ) -> PyResult<PyCorpus> {
        let mut order: Vec<String> = Vec::new();
        let mut docs: HashMap<String, Vec<RawTriple>> = HashMap::new();
        for (doc, verb, subj, obj) in tuples {
            if subj.is_none() && obj.is_none() {
                return Err(PyValueError::new_err(
                    "a tuple needs at least one of subject and object",
                ));
            }
            if !docs.contains_key(&doc) {
                order.push(doc.clone());
            }
            docs.entry(doc)
                .or_default()
                .push(RawTriple { verb, subj, obj });
        }
        let raw: Vec<RawDoc> = order
            .into_iter()
            .map(|name| {
                let triples = docs.remove(&name).unwrap();
                RawDoc { name, triples }
            })
            .collect();
        let vocab = Vocabulary::from_raw_docs(&raw, cutoff);
        let corpus = corpus::encode_corpus(&raw, &vocab);
        Ok(PyCorpus { corpus, vocab })
    }

    /// Read the canonical tuple TSV.
    #[staticmethod]
    #[pyo3(signature = (path, cutoff = 10_000, vocab_path = None))]
    fn read_tsv(path: PathBuf, cutoff: usize, vocab_path: Option<PathBuf>) -> PyResult<PyCorpus> {
        let raw = corpus::read_tuple_tsv_raw(&path).map_err(to_py_err)?;
        let vocab = match vocab_path {
            Some(p) => Vocabulary::read_file(&p).map_err(to_py_err)?,
            None => Vocabulary::from_raw_docs(&raw, cutoff),
        };
        let corpus = corpus::encode_corpus(&raw, &vocab);
        Ok(PyCorpus { corpus, vocab })
    }

    fn write_tsv(&self, path: PathBuf) -> PyResult<()> {
        corpus::write_tuple_tsv(&self.corpus, &self.vocab, &path).map_err(to_py_err)
    }

    #[getter]
    fn doc_count(&self) -> usize {
        self.corpus.doc_count()
    }

    #[getter]
    fn tuple_count(&self) -> usize {
        self.corpus.len()
    }

    #[getter]
    fn vocab_size(&self) -> usize {
        self.vocab.real_len()
    }

    /// Counts of (VSO, VS-, V-O) tuple shapes.
    fn shape_counts(&self) -> (usize, usize, usize) {
        self.corpus.shape_counts()
    }

    fn __repr__(&self) -> String {
        format!(
            "Corpus(docs={}, tuples={}, vocab={})",
            self.corpus.doc_count(),
            self.corpus.len(),
            self.vocab.real_len()
        )
    }
}

/// A fitted model: assignments, point estimates, hyperparameters, trace.
#[pyclass(name = "FittedModel")]
struct PyFittedModel {
    corpus: corpus::Corpus,
    vocab: Vocabulary,
    config: ModelConfig,
    state: AssignmentState,
    estimates: PointEstimates,
    trace: Vec<TraceRecord>,
    alpha: f64,
    beta: f64,
    gamma: [f64; 3],
    log_joint: f64,
}

#[pymethods]
impl PyFittedModel {
    #[getter]
    fn alpha(&self) -> f64 {
        self.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.beta
    }

    #[getter]
    fn gamma(&self) -> (f64, f64, f64) {
        (self.gamma[0], self.gamma[1], self.gamma[2])
    }

    #[getter]
    fn log_joint(&self) -> f64 {
        self.log_joint
    }

    #[getter]
    fn frames(&self) -> usize {
        self.config.frames
    }

    /// Per-document frame distributions (conjugate posterior means).
    fn theta(&self) -> Vec<Vec<f64>> {
        self.estimates.theta.clone()
    }

    /// Per-tuple frame assignments of the final Gibbs state.
    fn assignments(&self) -> Vec<u32> {
        self.state.frame_of.clone()
    }

    /// Top words of a frame's position (models 0/1) or of a class (model 2,
    /// with `frame` the class id and no position).
    #[pyo3(signature = (frame, position = None, n = 10))]
    fn top_words(
        &self,
        frame: usize,
        position: Option<&str>,
        n: usize,
    ) -> PyResult<Vec<(String, f64)>> {
        let row: &[f64] = match (&self.estimates.kind, parse_position(position)?) {
            (EstimateKind::FrameArg { phi }, Some(a)) => &phi[frame * 3 + a.index()],
            (EstimateKind::FrameArg { .. }, None) => {
                return Err(PyValueError::new_err(
                    "models 0/1 need a position (verb/subj/obj)",
                ))
            }
            (EstimateKind::Classes { phi, .. }, None) => &phi[frame],
            (EstimateKind::Classes { .. }, Some(_)) => {
                return Err(PyValueError::new_err(
                    "model 2 word distributions are per class; call without position",
                ))
            }
        };
        let mut indexed: Vec<(usize, f64)> = row.iter().copied().enumerate().collect();
        indexed.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        Ok(indexed
            .into_iter()
            .take(n)
            .map(|(w, p)| (self.vocab.token(corpus::WordId(w as u32)).to_string(), p))
            .collect())
    }

    /// Model 2 linker row: top classes for a (frame, position).
    #[pyo3(signature = (frame, position, n = 5))]
    fn top_classes(&self, frame: usize, position: &str, n: usize) -> PyResult<Vec<(usize, f64)>> {
        let a = parse_position(Some(position))?.unwrap();
        match &self.estimates.kind {
            EstimateKind::Classes { linker, .. } => {
                let row = &linker[frame * 3 + a.index()];
                let mut indexed: Vec<(usize, f64)> = row.iter().copied().enumerate().collect();
                indexed.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
                indexed.truncate(n);
                Ok(indexed)
            }
            _ => Err(PyValueError::new_err("linker exists only for model 2")),
        }
    }

    /// Discretized wordsets: words assigned at least `threshold` times.
    #[pyo3(signature = (threshold = 5, position = None))]
    fn wordsets(
        &self,
        py: Python<'_>,
        threshold: u32,
        position: Option<&str>,
    ) -> PyResult<Py<PyDict>> {
        let source = match self.config.variant {
            ModelVariant::DocTupleClass => DiscretizeSource::Classes,
            _ => DiscretizeSource::FrameArg,
        };
        let sets = evalx::discretize_model(
            &self.corpus,
            &self.state,
            &self.vocab,
            source,
            parse_position(position)?,
            threshold,
        );
        let out = PyDict::new(py);
        for set in sets {
            let words: Vec<&String> = set.words.iter().collect();
            out.set_item(set.name, words)?;
        }
        Ok(out.into())
    }

    /// Best-match report against a reference lexicon given as a dict
    /// name -> list of words. Returns one dict per reference set.
    #[pyo3(signature = (reference, threshold = 5, position = None, min_words = 1))]
    fn eval_against(
        &self,
        py: Python<'_>,
        reference: HashMap<String, Vec<String>>,
        threshold: u32,
        position: Option<&str>,
        min_words: usize,
    ) -> PyResult<Vec<Py<PyDict>>> {
        let sets: Vec<Wordset> = reference
            .into_iter()
            .map(|(name, words)| Wordset::new(name, words))
            .collect();
        let reference = ReferenceLexicon::from_sets(sets, min_words);
        let source = match self.config.variant {
            ModelVariant::DocTupleClass => DiscretizeSource::Classes,
            _ => DiscretizeSource::FrameArg,
        };
        let model_sets = evalx::discretize_model(
            &self.corpus,
            &self.state,
            &self.vocab,
            source,
            parse_position(position)?,
            threshold,
        );
        let report =
            evalx::best_matches(&reference, &model_sets, &self.vocab).map_err(to_py_err)?;
        report
            .rows
            .iter()
            .map(|row| {
                let d = PyDict::new(py);
                d.set_item("ref_name", &row.ref_name)?;
                d.set_item("model_set", &row.model_name)?;
                d.set_item("dice", row.dice)?;
                d.set_item("both", row.venn.both)?;
                d.set_item("missed", row.venn.missed)?;
                d.set_item("oov", row.venn.oov)?;
                d.set_item("other", row.venn.other)?;
                d.set_item("new", row.venn.new)?;
                Ok(d.into())
            })
            .collect()
    }

    /// The per-iteration trace as dicts.
    fn trace(&self, py: Python<'_>) -> PyResult<Vec<Py<PyDict>>> {
        self.trace
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("iter", r.iteration)?;
                d.set_item("changes", r.changes)?;
                d.set_item("log_joint", r.log_joint)?;
                d.set_item("pseudo_ll", r.pseudo_ll)?;
                d.set_item("alpha", r.alpha)?;
                d.set_item("beta", r.beta)?;
                Ok(d.into())
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "FittedModel(model={}, frames={}, log_joint={:.3})",
            self.config.variant.code(),
            self.config.frames,
            self.log_joint
        )
    }
}

/// Fit a model to a corpus by collapsed Gibbs sampling.
#[pyfunction]
#[pyo3(signature = (corpus, model = 1, frames = 20, classes = 20, alpha = 1.0, beta = 1.0,
                    gamma = (1.0, 1.0, 1.0), iters = 1000, seed = 0, workers = 1,
                    hyper_burnin = 100, hyper_interval = 100, fix_hypers = false,
                    none_policy = None, log_joint_every = 10))]
#[allow(clippy::too_many_arguments)]
fn fit(
    corpus: &PyCorpus,
    model: u8,
    frames: usize,
    classes: usize,
    alpha: f64,
    beta: f64,
    gamma: (f64, f64, f64),
    iters: u64,
    seed: u64,
    workers: usize,
    hyper_burnin: u64,
    hyper_interval: u64,
    fix_hypers: bool,
    none_policy: Option<&str>,
    log_joint_every: u64,
) -> PyResult<PyFittedModel> {
    let mut config = ModelConfig::new(ModelVariant::from_code(model).map_err(to_py_err)?, frames);
    config.classes = classes;
    config.alpha = alpha;
    config.beta = beta;
    config.gamma = [gamma.0, gamma.1, gamma.2];
    config.seed = seed;
    config.none_policy = match none_policy {
        None => None,
        Some("placeholder") => Some(NonePolicy::Placeholder),
        Some("skip") => Some(NonePolicy::Skip),
        Some(other) => {
            return Err(PyValueError::new_err(format!(
                "none_policy must be placeholder or skip, got {other:?}"
            )))
        }
    };
    let opts = FitOptions {
        iters,
        schedule: HyperSchedule {
            burnin: hyper_burnin,
            interval: hyper_interval,
            ..Default::default()
        },
        resample: if fix_hypers {
            ResamplePolicy::fixed()
        } else {
            ResamplePolicy::default()
        },
        log_joint_every,
        workers,
    };
    let mut engine = FitEngine::new(
        &corpus.corpus,
        corpus.vocab.real_len(),
        config.clone(),
        workers,
    )
    .map_err(to_py_err)?;
    let trace = engine.run(&opts, None).map_err(to_py_err)?;
    Ok(PyFittedModel {
        corpus: corpus.corpus.clone(),
        vocab: corpus.vocab.clone(),
        config,
        estimates: engine.point_estimates(),
        alpha: engine.hypers.alpha,
        beta: engine.hypers.beta,
        gamma: engine.hypers.gamma,
        log_joint: engine.log_joint(),
        state: engine.state.clone(),
        trace,
    })
}

/// Generate a synthetic corpus; returns (corpus, planted_lexicon, true_frames).
#[pyfunction]
#[pyo3(signature = (model = 1, frames = 5, classes = 5, docs = 100, tuples_per_doc = 20,
                    alpha = 0.3, beta = 0.3, planted_words = None, vocab_words = 50, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    model: u8,
    frames: usize,
    classes: usize,
    docs: usize,
    tuples_per_doc: usize,
    alpha: f64,
    beta: f64,
    planted_words: Option<usize>,
    vocab_words: usize,
    seed: u64,
) -> PyResult<(PyCorpus, Py<PyDict>, Vec<u32>)> {
    let mut config = ModelConfig::new(ModelVariant::from_code(model).map_err(to_py_err)?, frames);
    config.classes = classes;
    config.alpha = alpha;
    config.beta = beta;
    let opts = SynthOptions {
        docs,
        tuples_per_doc,
        planted: planted_words.map(|w| PlantedSpec { words_per_slot: w }),
        vocab_words,
        seed,
        ..Default::default()
    };
    let synth = generate_synthetic(&config, &opts).map_err(to_py_err)?;
    let lexicon = PyDict::new(py);
    for (name, words) in &synth.lexicon {
        lexicon.set_item(name, words.clone())?;
    }
    Ok((
        PyCorpus {
            corpus: synth.corpus,
            vocab: synth.vocab,
        },
        lexicon.into(),
        synth.state.frame_of,
    ))
}

/// Dirichlet-multinomial log PMF; `alpha` is a scalar (symmetric) or a list.
#[pyfunction]
fn dm_log_pmf(counts: Vec<u32>, alpha: &Bound<'_, PyAny>) -> PyResult<f64> {
    let prior = parse_prior(alpha, counts.len())?;
    dirmult::dm_log_pmf(&counts, &prior).map_err(to_py_err)
}

/// Single-path DM log PMF (one specific sequence with these counts).
#[pyfunction]
fn dm1_log_pmf(counts: Vec<u32>, alpha: &Bound<'_, PyAny>) -> PyResult<f64> {
    let prior = parse_prior(alpha, counts.len())?;
    dirmult::dm1_log_pmf(&counts, &prior).map_err(to_py_err)
}

/// Posterior predictive (alpha_k + n_k) / (A + N).
#[pyfunction]
fn posterior_predictive(k: usize, counts: Vec<u32>, alpha: &Bound<'_, PyAny>) -> PyResult<f64> {
    let prior = parse_prior(alpha, counts.len())?;
    dirmult::posterior_predictive(k, &counts, &prior).map_err(to_py_err)
}

/// log of the multivariate Beta function.
#[pyfunction]
fn log_multivariate_beta(alpha: Vec<f64>) -> PyResult<f64> {
    dirmult::log_multivariate_beta(&alpha).map_err(to_py_err)
}

fn as_wordset(words: BTreeSet<String>) -> Wordset {
    Wordset {
        name: String::new(),
        words,
    }
}

/// Dice coefficient of two word collections.
#[pyfunction]
fn dice_sim(a: BTreeSet<String>, b: BTreeSet<String>) -> f64 {
    evalx::dice(&as_wordset(a), &as_wordset(b))
}

/// Jaccard similarity of two word collections.
#[pyfunction]
fn jaccard_sim(a: BTreeSet<String>, b: BTreeSet<String>) -> f64 {
    evalx::jaccard(&as_wordset(a), &as_wordset(b))
}

/// Tversky index with asymmetric penalties.
#[pyfunction]
fn tversky_sim(a: BTreeSet<String>, b: BTreeSet<String>, wa: f64, wb: f64) -> f64 {
    evalx::tversky(&as_wordset(a), &as_wordset(b), wa, wb)
}

#[pymodule]
fn vsoframes_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyFittedModel>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(dm_log_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(dm1_log_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(posterior_predictive, m)?)?;
    m.add_function(wrap_pyfunction!(log_multivariate_beta, m)?)?;
    m.add_function(wrap_pyfunction!(dice_sim, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard_sim, m)?)?;
    m.add_function(wrap_pyfunction!(tversky_sim, m)?)?;
    Ok(())
}
