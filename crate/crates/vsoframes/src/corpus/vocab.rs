use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{hex_digest, RawDoc, WordId};
use crate::error::{Error, Result};

pub const OOV_TOKEN: &str = "<OOV>";
pub const NONE_TOKEN: &str = "-";

/// Frequency-cut vocabulary over lemma strings. Exactly the `cutoff` most
/// frequent words (ties broken lexicographically) are real words; everything
/// else encodes to [`WordId::OOV`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    /// (word, frequency) in rank order; word at rank r has id FIRST_REAL + r.
    entries: Vec<(String, u64)>,
    #[serde(skip)]
    index: HashMap<String, u32>,
    cutoff: usize,
}

impl Vocabulary {
    /// Build from (word, count) pairs, keeping the `cutoff` most frequent.
    pub fn build(counts: impl IntoIterator<Item = (String, u64)>, cutoff: usize) -> Vocabulary {
        let mut merged: HashMap<String, u64> = HashMap::new();
        for (w, c) in counts {
            *merged.entry(w).or_insert(0) += c;
        }
        let mut entries: Vec<(String, u64)> = merged.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        entries.truncate(cutoff);
        Vocabulary::from_entries(entries, cutoff)
    }

    /// Count lemmas across all three positions of raw documents jointly.
    pub fn from_raw_docs(docs: &[RawDoc], cutoff: usize) -> Vocabulary {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for doc in docs {
            for t in &doc.triples {
                *counts.entry(t.verb.clone()).or_insert(0) += 1;
                if let Some(s) = &t.subj {
                    *counts.entry(s.clone()).or_insert(0) += 1;
                }
                if let Some(o) = &t.obj {
                    *counts.entry(o.clone()).or_insert(0) += 1;
                }
            }
        }
        Vocabulary::build(counts, cutoff)
    }

    fn from_entries(entries: Vec<(String, u64)>, cutoff: usize) -> Vocabulary {
        let index = entries
            .iter()
            .enumerate()
            .map(|(r, (w, _))| (w.clone(), WordId::FIRST_REAL + r as u32))
            .collect();
        Vocabulary {
            entries,
            index,
            cutoff,
        }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Number of real (non-sentinel) words.
    pub fn real_len(&self) -> usize {
        self.entries.len()
    }

    /// Total id space: real words plus the two sentinels.
    pub fn id_space(&self) -> usize {
        self.entries.len() + 2
    }

    pub fn id_of(&self, lemma: &str) -> WordId {
        match self.index.get(lemma) {
            Some(&id) => WordId(id),
            None => WordId::OOV,
        }
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.index.contains_key(lemma)
    }

    /// Token string for an id; sentinels decode to their reserved literals.
    pub fn token(&self, id: WordId) -> &str {
        match id {
            WordId::NONE => NONE_TOKEN,
            WordId::OOV => OOV_TOKEN,
            WordId(raw) => &self.entries[(raw - WordId::FIRST_REAL) as usize].0,
        }
    }

    pub fn iter_ranked(&self) -> impl Iterator<Item = (&str, u64)> {
        self.entries.iter().map(|(w, c)| (w.as_str(), *c))
    }

    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (w, c) in &self.entries {
            h.update(w.as_bytes());
            h.update([0]);
            h.update(c.to_le_bytes());
        }
        hex_digest(h)
    }

    /// Write as "word<TAB>count" lines in rank order.
    pub fn write_file(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (w, c) in &self.entries {
            writeln!(out, "{w}\t{c}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Vocabulary> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let (word, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected word<TAB>count"))?;
            let count: u64 = count
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad count {count:?}")))?;
            entries.push((word.to_string(), count));
        }
        let cutoff = entries.len();
        Ok(Vocabulary::from_entries(entries, cutoff))
    }

    /// Restore the lookup index after deserialization.
    pub fn rebuild_index(&mut self) {
        self.index = self
            .entries
            .iter()
            .enumerate()
            .map(|(r, (w, _))| (w.clone(), WordId::FIRST_REAL + r as u32))
            .collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_everything_below_cutoff() {
        let v = Vocabulary::build(
            [
                ("a".to_string(), 5u64),
                ("b".to_string(), 3),
                ("c".to_string(), 1),
            ],
            10_000,
        );
        assert_eq!(v.real_len(), 3);
        assert!(v.contains("a") && v.contains("b") && v.contains("c"));
    }

    #[test]
    fn cutoff_drops_least_frequent_to_oov() {
        let v = Vocabulary::build(
            [
                ("a".to_string(), 5u64),
                ("b".to_string(), 3),
                ("c".to_string(), 1),
            ],
            2,
        );
        assert_eq!(v.real_len(), 2);
        assert!(v.contains("a") && v.contains("b"));
        assert_eq!(v.id_of("c"), WordId::OOV);
    }

    #[test]
    fn boundary_ties_break_lexicographically() {
        let v = Vocabulary::build(
            [
                ("zeta".to_string(), 4u64),
                ("beta".to_string(), 2),
                ("alpha".to_string(), 2),
            ],
            2,
        );
        assert!(v.contains("zeta"));
        assert!(v.contains("alpha"));
        assert_eq!(v.id_of("beta"), WordId::OOV);
    }

    #[test]
    fn empty_input_is_a_valid_vocabulary() {
        let v = Vocabulary::build(std::iter::empty(), 100);
        assert_eq!(v.real_len(), 0);
        assert_eq!(v.id_of("anything"), WordId::OOV);
    }

    #[test]
    fn increasing_cutoff_never_removes_words() {
        let counts: Vec<(String, u64)> = (0..20)
            .map(|i| (format!("w{i:02}"), (20 - i) as u64))
            .collect();
        let small = Vocabulary::build(counts.clone(), 5);
        let large = Vocabulary::build(counts, 12);
        for (w, _) in small.iter_ranked() {
            assert!(large.contains(w), "{w} lost when cutoff grew");
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.tsv");
        let v = Vocabulary::build(
            [
                ("arrest".to_string(), 9u64),
                ("police".to_string(), 7),
                ("law".to_string(), 7),
            ],
            10,
        );
        v.write_file(&path).unwrap();
        let back = Vocabulary::read_file(&path).unwrap();
        assert_eq!(v.real_len(), back.real_len());
        for ((w1, c1), (w2, c2)) in v.iter_ranked().zip(back.iter_ranked()) {
            assert_eq!((w1, c1), (w2, c2));
        }
        assert_eq!(v.content_hash(), back.content_hash());
    }
}
