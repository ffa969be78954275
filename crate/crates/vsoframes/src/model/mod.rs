//! The collapsed Gibbs sampling engine: count tables, conditionals, sweeps,
//! point estimates, label masking and synthetic-corpus generation.

mod checkpoint;
mod counts;
pub(crate) mod sampler;
mod synth;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use counts::{CountTables, DocTables, SharedCounts, SharedTables, WordTable};
pub use sampler::{Sampler, SweepStats};
pub use synth::{generate_synthetic, PlantedSpec, SynthOptions, SynthOutput};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Which mixture model to fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelVariant {
    /// Model 0: tuples are independent; frames share only word distributions.
    Independent,
    /// Model 1: frames drawn from a per-document multinomial.
    DocTuple,
    /// Model 2: frames pick word classes through a per-(frame, position) linker.
    DocTupleClass,
}

impl ModelVariant {
    pub fn code(self) -> u8 {
        match self {
            ModelVariant::Independent => 0,
            ModelVariant::DocTuple => 1,
            ModelVariant::DocTupleClass => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(ModelVariant::Independent),
            1 => Ok(ModelVariant::DocTuple),
            2 => Ok(ModelVariant::DocTupleClass),
            other => Err(Error::Config(format!("unknown model {other}"))),
        }
    }
}

/// How absent argument slots are treated. `Placeholder` models them as a
/// real NONE symbol in the word distributions; `Skip` leaves them out of the
/// model entirely. Models 0/1 default to `Placeholder`, model 2 to `Skip`
/// (explicitly modeled NONEs swamp the class-word distributions there).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NonePolicy {
    Placeholder,
    Skip,
}

/// Binary label-to-frame permission matrix (J rows, F columns): row j lists
/// the frames a document carrying label j may use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelMask {
    pub rows: Vec<Vec<bool>>,
}

impl LabelMask {
    pub fn new(rows: Vec<Vec<bool>>) -> Result<LabelMask> {
        let f = rows.first().map_or(0, |r| r.len());
        if f == 0 || rows.iter().any(|r| r.len() != f) {
            return Err(Error::Config(
                "label mask rows must be non-empty and of equal length".into(),
            ));
        }
        Ok(LabelMask { rows })
    }

    /// Read a mask file: J lines of F comma-separated 0/1 digits.
    pub fn from_path(path: &std::path::Path) -> Result<LabelMask> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let row: Vec<bool> = line
                .split(',')
                .map(|b| match b.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(Error::parse(path, i + 1, format!("bad mask bit {other:?}"))),
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        LabelMask::new(rows)
    }

    pub fn label_count(&self) -> usize {
        self.rows.len()
    }

    pub fn frame_count(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    /// Frames allowed for a document with label vector `y`: the union of the
    /// rows whose label is on.
    pub fn allowed_for(&self, y: &[bool]) -> Vec<bool> {
        let f = self.frame_count();
        let mut allowed = vec![false; f];
        for (row, &on) in self.rows.iter().zip(y) {
            if on {
                for (slot, &bit) in allowed.iter_mut().zip(row) {
                    *slot |= bit;
                }
            }
        }
        allowed
    }

    /// The masked prior vector: alpha where some active label permits the
    /// frame, zero elsewhere.
    pub fn masked_alpha(&self, y: &[bool], alpha: f64) -> Vec<f64> {
        self.allowed_for(y)
            .into_iter()
            .map(|ok| if ok { alpha } else { 0.0 })
            .collect()
    }
}

/// Per-document allowed-frame sets derived from a mask and corpus labels.
#[derive(Clone, Debug, PartialEq)]
pub struct DocMask {
    pub allowed: Vec<Vec<bool>>,
    pub allowed_count: Vec<u32>,
}

impl DocMask {
    pub fn doc_alpha_total(&self, d: usize, alpha: f64) -> f64 {
        alpha * self.allowed_count[d] as f64
    }
}

/// Resolve mask-by-labels into per-document allowed-frame sets. Fails when a
/// document that owns tuples has no admissible frame.
pub fn apply_label_mask(mask: &LabelMask, corpus: &Corpus, frames: usize) -> Result<DocMask> {
    if mask.frame_count() != frames {
        return Err(Error::Config(format!(
            "label mask has {} frame columns, model has {frames}",
            mask.frame_count()
        )));
    }
    let labels = corpus
        .labels
        .as_ref()
        .ok_or_else(|| Error::Config("label mask given but the corpus carries no labels".into()))?;
    let mut allowed = Vec::with_capacity(corpus.doc_count());
    let mut allowed_count = Vec::with_capacity(corpus.doc_count());
    for (d, y) in labels.iter().enumerate() {
        if y.len() != mask.label_count() {
            return Err(Error::Config(format!(
                "document {} has {} labels, mask has {}",
                corpus.doc_names[d],
                y.len(),
                mask.label_count()
            )));
        }
        let row = mask.allowed_for(y);
        let count = row.iter().filter(|&&b| b).count() as u32;
        if count == 0 && !corpus.doc_tuples(d).is_empty() {
            return Err(Error::Config(format!(
                "document {} has tuples but no allowed frame under the mask",
                corpus.doc_names[d]
            )));
        }
        allowed.push(row);
        allowed_count.push(count);
    }
    Ok(DocMask {
        allowed,
        allowed_count,
    })
}

/// Model shape and priors. `alpha`, `beta` and `gamma` here are the initial
/// concentration values; the live (possibly resampled) values travel in
/// [`Hyperparams`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: ModelVariant,
    pub frames: usize,
    pub classes: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: [f64; 3],
    pub none_policy: Option<NonePolicy>,
    pub seed: u64,
    pub mask: Option<LabelMask>,
}

impl ModelConfig {
    pub fn new(variant: ModelVariant, frames: usize) -> ModelConfig {
        ModelConfig {
            variant,
            frames,
            classes: 1,
            alpha: 1.0,
            beta: 1.0,
            gamma: [1.0; 3],
            none_policy: None,
            seed: 0,
            mask: None,
        }
    }

    pub fn policy(&self) -> NonePolicy {
        self.none_policy.unwrap_or(match self.variant {
            ModelVariant::Independent | ModelVariant::DocTuple => NonePolicy::Placeholder,
            ModelVariant::DocTupleClass => NonePolicy::Skip,
        })
    }

    pub fn uses_classes(&self) -> bool {
        self.variant == ModelVariant::DocTupleClass
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::Config("frame count must be at least 1".into()));
        }
        if self.uses_classes() && self.classes == 0 {
            return Err(Error::Config("class count must be at least 1".into()));
        }
        let positive = self.alpha > 0.0 && self.beta > 0.0 && self.gamma.iter().all(|&g| g > 0.0);
        if !positive {
            return Err(Error::Config(
                "concentration parameters must be positive".into(),
            ));
        }
        if let Some(mask) = &self.mask {
            if mask.frame_count() != self.frames {
                return Err(Error::Config(
                    "mask frame columns do not match frame count".into(),
                ));
            }
        }
        Ok(())
    }

    /// Dimension of the word space under the active NONE policy: the real
    /// vocabulary plus OOV, plus the NONE symbol when it is modeled.
    pub fn word_dim(&self, vocab_real: usize) -> usize {
        match self.policy() {
            NonePolicy::Placeholder => vocab_real + 2,
            NonePolicy::Skip => vocab_real + 1,
        }
    }

    pub fn initial_hypers(&self) -> Hyperparams {
        Hyperparams {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
        }
    }
}

/// Live concentration values (resampled during fitting).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: [f64; 3],
}

/// Per-tuple latent indicators. `class_of` is populated for model 2 only;
/// [`NO_CLASS`] marks slots the model does not cover.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentState {
    pub frame_of: Vec<u32>,
    pub class_of: Vec<[u32; 3]>,
}

pub const NO_CLASS: u32 = u32::MAX;

impl AssignmentState {
    pub fn empty() -> AssignmentState {
        AssignmentState {
            frame_of: Vec::new(),
            class_of: Vec::new(),
        }
    }

    /// Total number of latent variables (frames plus modeled classes).
    pub fn latent_count(&self) -> usize {
        self.frame_of.len()
            + self
                .class_of
                .iter()
                .flat_map(|cs| cs.iter())
                .filter(|&&c| c != NO_CLASS)
                .count()
    }
}

/// Conjugate posterior-mean estimates recovered from the count tables.
#[derive(Clone, Debug)]
pub struct PointEstimates {
    /// Per-document frame distributions, D rows of length F.
    pub theta: Vec<Vec<f64>>,
    pub kind: EstimateKind,
}

#[derive(Clone, Debug)]
pub enum EstimateKind {
    /// Models 0/1: one word distribution per (frame, position), indexed
    /// `f * 3 + a`, each over the full word-id space.
    FrameArg { phi: Vec<Vec<f64>> },
    /// Model 2: per-class word distributions plus the linker rows
    /// (frame, position) -> distribution over classes.
    Classes {
        phi: Vec<Vec<f64>>,
        linker: Vec<Vec<f64>>,
    },
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::corpus::{Corpus, VsoTuple, WordId};

    /// Build a corpus from (doc, verb, subj, obj) word-id tuples; tuples must
    /// already be grouped by document.
    pub(crate) fn corpus_from(tuples: Vec<(u32, u32, u32, u32)>, docs: usize) -> Corpus {
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
}
