//! Corpus ingestion: vocabulary-mapped, document-grouped VSO tuples.

mod extract;
mod tsv;
mod vocab;

pub use extract::{extract_tuples, read_conllu, ParsedDoc, Token};
pub use tsv::{read_labels, read_tuple_tsv, read_tuple_tsv_raw, write_tuple_tsv};
pub use vocab::Vocabulary;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into a [`Vocabulary`], with two reserved sentinels: `NONE` marks an
/// absent argument slot and `OOV` a word outside the vocabulary cutoff. Real
/// words start at [`WordId::FIRST_REAL`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WordId(pub u32);

impl WordId {
    pub const NONE: WordId = WordId(0);
    pub const OOV: WordId = WordId(1);
    pub const FIRST_REAL: u32 = 2;

    pub fn is_none(self) -> bool {
        self == WordId::NONE
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// The three argument positions of a tuple, in their fixed order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArgPosition {
    Verb = 1,
    Subject = 2,
    Object = 3,
}

impl ArgPosition {
    pub const ALL: [ArgPosition; 3] =
        [ArgPosition::Verb, ArgPosition::Subject, ArgPosition::Object];

    /// Zero-based index for table lookups.
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_index(i: usize) -> ArgPosition {
        Self::ALL[i]
    }

    pub fn label(self) -> &'static str {
        match self {
            ArgPosition::Verb => "verb",
            ArgPosition::Subject => "subj",
            ArgPosition::Object => "obj",
        }
    }
}

/// One extracted (verb, subject, object) tuple. The verb is always a real
/// word or OOV; subject and object may be `NONE`, but never both.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VsoTuple {
    pub doc: u32,
    pub verb: WordId,
    pub subj: WordId,
    pub obj: WordId,
}

impl VsoTuple {
    pub fn word_at(&self, a: ArgPosition) -> WordId {
        match a {
            ArgPosition::Verb => self.verb,
            ArgPosition::Subject => self.subj,
            ArgPosition::Object => self.obj,
        }
    }

    /// Whether the slot holds a word (the verb slot always does).
    pub fn present(&self, a: ArgPosition) -> bool {
        !self.word_at(a).is_none()
    }
}

/// A raw, string-form extraction result prior to vocabulary encoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawTriple {
    pub verb: String,
    pub subj: Option<String>,
    pub obj: Option<String>,
}

/// A document of raw triples, keyed by its external id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawDoc {
    pub name: String,
    pub triples: Vec<RawTriple>,
}

/// An encoded corpus: tuples grouped contiguously by document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub tuples: Vec<VsoTuple>,
    pub doc_names: Vec<String>,
    /// Half-open tuple ranges per document, aligned with `doc_names`.
    pub doc_spans: Vec<(u32, u32)>,
    /// Optional per-document binary label vectors, all of one length J.
    pub labels: Option<Vec<Vec<bool>>>,
}

impl Corpus {
    pub fn doc_count(&self) -> usize {
        self.doc_names.len()
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn doc_tuples(&self, d: usize) -> &[VsoTuple] {
        let (lo, hi) = self.doc_spans[d];
        &self.tuples[lo as usize..hi as usize]
    }

    pub fn doc_span(&self, d: usize) -> std::ops::Range<usize> {
        let (lo, hi) = self.doc_spans[d];
        lo as usize..hi as usize
    }

    /// Counts of full VSO, VS- and V-O tuples. Every tuple is exactly one of
    /// the three shapes.
    pub fn shape_counts(&self) -> (usize, usize, usize) {
        let mut vso = 0;
        let mut vs = 0;
        let mut vo = 0;
        for t in &self.tuples {
            match (t.subj.is_none(), t.obj.is_none()) {
                (false, false) => vso += 1,
                (false, true) => vs += 1,
                (true, false) => vo += 1,
                (true, true) => unreachable!("tuple with neither subject nor object"),
            }
        }
        (vso, vs, vo)
    }

    /// Hash over everything the sampler state depends on, for checkpoint
    /// compatibility checks.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.doc_names.len() as u64).to_le_bytes());
        for name in &self.doc_names {
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
        }
        for t in &self.tuples {
            h.update(t.doc.to_le_bytes());
            h.update(t.verb.0.to_le_bytes());
            h.update(t.subj.0.to_le_bytes());
            h.update(t.obj.0.to_le_bytes());
        }
        if let Some(labels) = &self.labels {
            for row in labels {
                for &b in row {
                    h.update([b as u8]);
                }
                h.update([0xff]);
            }
        }
        hex_digest(h)
    }

    pub fn attach_labels(&mut self, labels: Vec<Vec<bool>>) -> Result<()> {
        if labels.len() != self.doc_count() {
            return Err(Error::Config(format!(
                "label rows ({}) do not match document count ({})",
                labels.len(),
                self.doc_count()
            )));
        }
        let j = labels.first().map_or(0, |r| r.len());
        if labels.iter().any(|r| r.len() != j) {
            return Err(Error::Config("label vectors must share one length".into()));
        }
        self.labels = Some(labels);
        Ok(())
    }
}

pub(crate) fn hex_digest(h: sha2::Sha256) -> String {
    use sha2::Digest;
    let bytes = h.finalize();
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Encode raw documents against a vocabulary. Unknown lemmas map to OOV and
/// absent slots stay `NONE`; documents (even empty ones) keep their slots.
pub fn encode_corpus(docs: &[RawDoc], vocab: &Vocabulary) -> Corpus {
    let mut tuples = Vec::new();
    let mut doc_names = Vec::with_capacity(docs.len());
    let mut doc_spans = Vec::with_capacity(docs.len());
    for (d, doc) in docs.iter().enumerate() {
        let lo = tuples.len() as u32;
        for triple in &doc.triples {
            tuples.push(VsoTuple {
                doc: d as u32,
                verb: vocab.id_of(&triple.verb),
                subj: triple
                    .subj
                    .as_deref()
                    .map_or(WordId::NONE, |w| vocab.id_of(w)),
                obj: triple
                    .obj
                    .as_deref()
                    .map_or(WordId::NONE, |w| vocab.id_of(w)),
            });
        }
        doc_names.push(doc.name.clone());
        doc_spans.push((lo, tuples.len() as u32));
    }
    Corpus {
        tuples,
        doc_names,
        doc_spans,
        labels: None,
    }
}

/// Decode a corpus back to raw lemma triples (sentinels decode to their
/// reserved literals).
pub fn decode_corpus(corpus: &Corpus, vocab: &Vocabulary) -> Vec<RawDoc> {
    (0..corpus.doc_count())
        .map(|d| RawDoc {
            name: corpus.doc_names[d].clone(),
            triples: corpus
                .doc_tuples(d)
                .iter()
                .map(|t| RawTriple {
                    verb: vocab.token(t.verb).to_string(),
                    subj: (!t.subj.is_none()).then(|| vocab.token(t.subj).to_string()),
                    obj: (!t.obj.is_none()).then(|| vocab.token(t.obj).to_string()),
                })
                .collect(),
        })
        .collect()
}
