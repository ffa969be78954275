//! Brute-force oracles shared by the integration suites. Everything here is
//! computed independently of the sampler's count tables and conditionals:
//! joints come from single-path DM products over counts recomputed from
//! scratch, and posteriors from full enumeration of the latent space.
#![allow(dead_code)]

use std::collections::HashMap;

use vsoframes::corpus::{ArgPosition, Corpus, VsoTuple, WordId};
use vsoframes::dirmult::{dm1_log_pmf, log_sum_exp, DirichletPrior};
use vsoframes::model::{
    AssignmentState, Hyperparams, ModelConfig, ModelVariant, NonePolicy, NO_CLASS,
};

/// All count vectors of the given dimension summing to `total`.
pub fn enumerate_count_vectors(dim: usize, total: u32) -> Vec<Vec<u32>> {
    fn rec(dim: usize, total: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if dim == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for x in 0..=total {
            prefix.push(x);
            rec(dim - 1, total - x, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, total, &mut Vec::new(), &mut out);
    out
}

/// Build a corpus from (doc, verb, subj, obj) word-id tuples grouped by doc.
pub fn corpus_from(tuples: Vec<(u32, u32, u32, u32)>, docs: usize) -> Corpus {
    let tuples: Vec<VsoTuple> = tuples
        .into_iter()
        .map(|(doc, v, s, o)| VsoTuple {
            doc,
            verb: WordId(v),
            subj: WordId(s),
            obj: WordId(o),
        })
        .collect();
    let mut doc_spans = Vec::new();
    let mut start = 0u32;
    for d in 0..docs as u32 {
        let end = start + tuples.iter().filter(|t| t.doc == d).count() as u32;
        doc_spans.push((start, end));
        start = end;
    }
    Corpus {
        tuples,
        doc_names: (0..docs).map(|d| format!("d{d}")).collect(),
        doc_spans,
        labels: None,
    }
}

/// Latent configuration: per-tuple frames plus (model 2) per-slot classes.
pub type Config = (Vec<u32>, Vec<[u32; 3]>);

/// Brute-force joint evaluator over a tiny corpus.
pub struct JointOracle<'c> {
    pub corpus: &'c Corpus,
    pub config: ModelConfig,
    pub hypers: Hyperparams,
    pub vocab_real: usize,
    /// Per-document allowed-frame sets (the mask, if any).
    pub allowed: Option<Vec<Vec<bool>>>,
}

impl<'c> JointOracle<'c> {
    pub fn new(corpus: &'c Corpus, config: ModelConfig, vocab_real: usize) -> JointOracle<'c> {
        let allowed = config.mask.as_ref().map(|mask| {
            corpus
                .labels
                .as_ref()
                .expect("masked oracle needs labels")
                .iter()
                .map(|y| mask.allowed_for(y))
                .collect()
        });
        JointOracle {
            corpus,
            hypers: config.initial_hypers(),
            config,
            vocab_real,
            allowed,
        }
    }

    fn policy(&self) -> NonePolicy {
        self.config.policy()
    }

    fn slot_modeled(&self, t: &VsoTuple, a: ArgPosition) -> bool {
        self.policy() == NonePolicy::Placeholder || t.present(a)
    }

    fn word_dim(&self) -> usize {
        self.config.word_dim(self.vocab_real)
    }

    /// log p(z, c, w) up to the same constants the sampler's log joint keeps.
    pub fn log_joint(&self, frames: &[u32], classes: &[[u32; 3]]) -> f64 {
        let f_dim = self.config.frames;
        let mut total = 0.0;

        // Document factor.
        match self.config.variant {
            ModelVariant::Independent => {
                for d in 0..self.corpus.doc_count() {
                    let support = match &self.allowed {
                        Some(a) => a[d].iter().filter(|&&ok| ok).count() as f64,
                        None => f_dim as f64,
                    };
                    total -= self.corpus.doc_tuples(d).len() as f64 * support.ln();
                    // Disallowed assignment under a mask has probability zero.
                    if let Some(a) = &self.allowed {
                        for i in self.corpus.doc_span(d) {
                            if !a[d][frames[i] as usize] {
                                return f64::NEG_INFINITY;
                            }
                        }
                    }
                }
            }
            ModelVariant::DocTuple | ModelVariant::DocTupleClass => {
                for d in 0..self.corpus.doc_count() {
                    let mut counts = vec![0u32; f_dim];
                    for i in self.corpus.doc_span(d) {
                        counts[frames[i] as usize] += 1;
                    }
                    let prior = match &self.allowed {
                        Some(a) => DirichletPrior::Full(
                            a[d].iter()
                                .map(|&ok| if ok { self.hypers.alpha } else { 0.0 })
                                .collect(),
                        ),
                        None => DirichletPrior::symmetric(self.hypers.alpha, f_dim),
                    };
                    total += dm1_log_pmf(&counts, &prior).unwrap();
                    if total == f64::NEG_INFINITY {
                        return total;
                    }
                }
            }
        }

        // Word / linker factors.
        match self.config.variant {
            ModelVariant::Independent | ModelVariant::DocTuple => {
                let beta = DirichletPrior::symmetric(self.hypers.beta, self.word_dim());
                for f in 0..f_dim {
                    for a in ArgPosition::ALL {
                        let mut counts = vec![0u32; self.word_dim()];
                        for (i, t) in self.corpus.tuples.iter().enumerate() {
                            if frames[i] as usize == f && self.slot_modeled(t, a) {
                                counts[t.word_at(a).index()] += 1;
                            }
                        }
                        total += dm1_log_pmf(&counts, &beta).unwrap();
                    }
                }
            }
            ModelVariant::DocTupleClass => {
                let c_dim = self.config.classes;
                for f in 0..f_dim {
                    for a in ArgPosition::ALL {
                        let gamma = DirichletPrior::symmetric(self.hypers.gamma[a.index()], c_dim);
                        let mut counts = vec![0u32; c_dim];
                        for (i, t) in self.corpus.tuples.iter().enumerate() {
                            if frames[i] as usize == f && self.slot_modeled(t, a) {
                                counts[classes[i][a.index()] as usize] += 1;
                            }
                        }
                        total += dm1_log_pmf(&counts, &gamma).unwrap();
                    }
                }
                let beta = DirichletPrior::symmetric(self.hypers.beta, self.word_dim());
                for c in 0..c_dim {
                    let mut counts = vec![0u32; self.word_dim()];
                    for (i, t) in self.corpus.tuples.iter().enumerate() {
                        for a in ArgPosition::ALL {
                            if self.slot_modeled(t, a) && classes[i][a.index()] == c as u32 {
                                counts[t.word_at(a).index()] += 1;
                            }
                        }
                    }
                    total += dm1_log_pmf(&counts, &beta).unwrap();
                }
            }
        }
        total
    }

    /// Enumerated conditional over tuple `i`'s frame, everything else fixed.
    pub fn frame_conditional(&self, i: usize, state: &AssignmentState) -> Vec<f64> {
        let mut frames = state.frame_of.clone();
        let classes = if state.class_of.is_empty() {
            vec![[NO_CLASS; 3]; frames.len()]
        } else {
            state.class_of.clone()
        };
        let logs: Vec<f64> = (0..self.config.frames)
            .map(|f| {
                frames[i] = f as u32;
                self.log_joint(&frames, &classes)
            })
            .collect();
        let norm = log_sum_exp(&logs);
        logs.iter().map(|&l| (l - norm).exp()).collect()
    }

    /// Enumerated conditional over one class slot, everything else fixed.
    pub fn class_conditional(&self, i: usize, a: ArgPosition, state: &AssignmentState) -> Vec<f64> {
        let frames = state.frame_of.clone();
        let mut classes = state.class_of.clone();
        let logs: Vec<f64> = (0..self.config.classes)
            .map(|c| {
                classes[i][a.index()] = c as u32;
                self.log_joint(&frames, &classes)
            })
            .collect();
        let norm = log_sum_exp(&logs);
        logs.iter().map(|&l| (l - norm).exp()).collect()
    }

    /// The slots that carry a class variable per tuple under model 2.
    pub fn modeled_slots(&self, i: usize) -> Vec<ArgPosition> {
        ArgPosition::ALL
            .into_iter()
            .filter(|&a| self.slot_modeled(&self.corpus.tuples[i], a))
            .collect()
    }

    /// Exhaustive posterior over every latent configuration, as normalized
    /// probabilities keyed by (frames, flattened classes).
    pub fn full_posterior(&self) -> HashMap<(Vec<u32>, Vec<u32>), f64> {
        let n = self.corpus.len();
        let f_dim = self.config.frames;
        let uses_classes = self.config.variant == ModelVariant::DocTupleClass;
        let slots: Vec<Vec<ArgPosition>> = (0..n).map(|i| self.modeled_slots(i)).collect();
        let token_count: usize = if uses_classes {
            slots.iter().map(|s| s.len()).sum()
        } else {
            0
        };
        let c_dim = self.config.classes;

        let mut keys = Vec::new();
        let mut logs = Vec::new();
        let frame_configs = (f_dim as u64).pow(n as u32);
        let class_configs = if uses_classes {
            (c_dim as u64).pow(token_count as u32)
        } else {
            1
        };
        for fc in 0..frame_configs {
            let mut frames = Vec::with_capacity(n);
            let mut rest = fc;
            for _ in 0..n {
                frames.push((rest % f_dim as u64) as u32);
                rest /= f_dim as u64;
            }
            for cc in 0..class_configs {
                let mut classes = vec![[NO_CLASS; 3]; n];
                let mut flat = Vec::with_capacity(token_count);
                let mut rest = cc;
                if uses_classes {
                    for (i, islots) in slots.iter().enumerate() {
                        for &a in islots {
                            let c = (rest % c_dim as u64) as u32;
                            rest /= c_dim as u64;
                            classes[i][a.index()] = c;
                            flat.push(c);
                        }
                    }
                }
                let lj = self.log_joint(&frames, &classes);
                if lj > f64::NEG_INFINITY {
                    keys.push((frames.clone(), flat));
                    logs.push(lj);
                }
            }
        }
        let norm = log_sum_exp(&logs);
        keys.into_iter()
            .zip(logs)
            .map(|(k, l)| (k, (l - norm).exp()))
            .collect()
    }
}

/// Flatten a sampler state into the oracle's posterior key.
pub fn state_key(state: &AssignmentState, oracle: &JointOracle) -> (Vec<u32>, Vec<u32>) {
    let mut flat = Vec::new();
    if oracle.config.variant == ModelVariant::DocTupleClass {
        for i in 0..state.frame_of.len() {
            for a in oracle.modeled_slots(i) {
                flat.push(state.class_of[i][a.index()]);
            }
        }
    }
    (state.frame_of.clone(), flat)
}

/// Total variation distance between an empirical configuration histogram and
/// the enumerated posterior.
pub fn total_variation(
    counts: &HashMap<(Vec<u32>, Vec<u32>), u64>,
    posterior: &HashMap<(Vec<u32>, Vec<u32>), f64>,
    samples: u64,
) -> f64 {
    let mut tv = 0.0;
    for (key, &p) in posterior {
        let emp = counts.get(key).copied().unwrap_or(0) as f64 / samples as f64;
        tv += (emp - p).abs();
    }
    // Any sampled configuration outside the posterior support would be a
    // soundness bug; count it too.
    for (key, &c) in counts {
        if !posterior.contains_key(key) {
            tv += c as f64 / samples as f64;
        }
    }
    tv / 2.0
}
