use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Vocabulary};
use crate::error::{Error, Result};

use super::{AssignmentState, Hyperparams, ModelConfig};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned fit snapshot: everything needed to resume a run bit-exactly.
/// Count tables are not stored; they are rebuilt from the assignments.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub hypers: Hyperparams,
    pub corpus_hash: String,
    pub vocab_hash: String,
    pub vocab_real: usize,
    pub iteration: u64,
    pub state: AssignmentState,
    /// One sweep stream per worker, plus the hyperparameter stream.
    pub sweep_rngs: Vec<ChaCha8Rng>,
    pub hyper_rng: ChaCha8Rng,
}

impl Checkpoint {
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), self)
            .map_err(|e| Error::Numeric(format!("checkpoint serialization failed: {e}")))
    }

    pub fn read(path: &Path) -> Result<Checkpoint> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_reader(BufReader::new(file)).map_err(|e| {
            Error::parse(path, 0, format!("checkpoint deserialization failed: {e}"))
        })?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Mismatch(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }

    /// Refuse to resume against data the checkpoint was not built from.
    pub fn verify_inputs(&self, corpus: &Corpus, vocab: &Vocabulary) -> Result<()> {
        if self.corpus_hash != corpus.content_hash() {
            return Err(Error::Mismatch(
                "corpus content does not match the checkpoint".into(),
            ));
        }
        if self.vocab_hash != vocab.content_hash() {
            return Err(Error::Mismatch(
                "vocabulary does not match the checkpoint".into(),
            ));
        }
        Ok(())
    }
}
