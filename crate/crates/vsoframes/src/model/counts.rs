//! Sufficient statistics for the collapsed samplers.
//!
//! Document tables (tuple counts per document and frame) are small and dense.
//! Word-indexed tables are sparse by word: each touched word owns a dense
//! block (frame x position for models 0/1, classes for model 2), which keeps
//! the per-frame scan in the conditional cheap.

use std::collections::HashMap;

use crate::corpus::{ArgPosition, Corpus, WordId};

use super::{AssignmentState, ModelConfig, ModelVariant, NonePolicy, NO_CLASS};

/// Sparse-by-word count table: word id -> dense block of counts.
#[derive(Clone, Debug, Default)]
pub struct WordTable {
    block: usize,
    map: HashMap<u32, Vec<u32>>,
}

/// Blocks that have decayed to all zeros compare equal to absent blocks, so
/// incrementally maintained tables match rebuilt-from-scratch ones.
impl PartialEq for WordTable {
    fn eq(&self, other: &WordTable) -> bool {
        if self.block != other.block {
            return false;
        }
        let nonzero = |table: &WordTable| {
            let mut cells: Vec<(u32, usize, u32)> = table
                .map
                .iter()
                .flat_map(|(&w, block)| {
                    block
                        .iter()
                        .enumerate()
                        .filter(|(_, &c)| c != 0)
                        .map(move |(slot, &c)| (w, slot, c))
                })
                .collect();
            cells.sort_unstable();
            cells
        };
        nonzero(self) == nonzero(other)
    }
}

impl Eq for WordTable {}

impl WordTable {
    pub fn new(block: usize) -> WordTable {
        WordTable {
            block,
            map: HashMap::new(),
        }
    }

    pub fn block_len(&self) -> usize {
        self.block
    }

    #[inline]
    pub fn get(&self, word: WordId, slot: usize) -> u32 {
        self.map.get(&word.0).map_or(0, |b| b[slot])
    }

    #[inline]
    pub fn add(&mut self, word: WordId, slot: usize, delta: i32) {
        let block = self
            .map
            .entry(word.0)
            .or_insert_with(|| vec![0; self.block]);
        let cell = &mut block[slot];
        *cell = cell
            .checked_add_signed(delta)
            .expect("word count underflow");
    }

    pub fn block(&self, word: WordId) -> Option<&[u32]> {
        self.map.get(&word.0).map(|b| b.as_slice())
    }

    /// Word ids in ascending order, for deterministic reductions.
    pub fn sorted_words(&self) -> Vec<u32> {
        let mut words: Vec<u32> = self.map.keys().copied().collect();
        words.sort_unstable();
        words
    }

    pub fn total(&self) -> u64 {
        self.map
            .values()
            .flat_map(|b| b.iter())
            .map(|&c| c as u64)
            .sum()
    }
}

/// Per-document counts: tuples per (document, frame) and per document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DocTables {
    pub frames: usize,
    pub doc_frame: Vec<u32>,
    pub doc_total: Vec<u32>,
}

impl DocTables {
    pub fn new(docs: usize, frames: usize) -> DocTables {
        DocTables {
            frames,
            doc_frame: vec![0; docs * frames],
            doc_total: vec![0; docs],
        }
    }

    #[inline]
    pub fn row(&self, d: usize) -> &[u32] {
        &self.doc_frame[d * self.frames..(d + 1) * self.frames]
    }
}

/// Read/write access to the globally shared (non-document) tables. The live
/// tables implement it directly; parallel workers implement it over a frozen
/// snapshot plus their private delta.
pub trait SharedCounts {
    fn word_fa(&self, w: WordId, f: usize, a: usize) -> u32;
    fn fa_total(&self, f: usize, a: usize) -> u32;
    fn link(&self, f: usize, a: usize, c: usize) -> u32;
    fn class_word(&self, c: usize, w: WordId) -> u32;
    fn class_total(&self, c: usize) -> u32;

    fn add_word_fa(&mut self, w: WordId, f: usize, a: usize, delta: i32);
    fn add_fa_total(&mut self, f: usize, a: usize, delta: i32);
    fn add_link(&mut self, f: usize, a: usize, c: usize, delta: i32);
    fn add_class_word(&mut self, c: usize, w: WordId, delta: i32);
    fn add_class_total(&mut self, c: usize, delta: i32);
}

/// The shared tables themselves. For models 0/1 the word table is
/// (frame, position)-blocked; for model 2 the linker table is dense and the
/// word table is class-blocked.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SharedTables {
    pub frames: usize,
    pub classes: usize,
    /// Models 0/1: word -> counts per (frame, position).
    pub word_fa: WordTable,
    /// Token totals per (frame, position).
    pub fa_total: Vec<u32>,
    /// Model 2: dense counts per (frame, position, class).
    pub link_fac: Vec<u32>,
    /// Model 2: word -> counts per class.
    pub class_word: WordTable,
    pub class_total: Vec<u32>,
}

impl SharedTables {
    pub fn new(cfg: &ModelConfig) -> SharedTables {
        let frames = cfg.frames;
        let (classes, link_len, class_block) = if cfg.uses_classes() {
            (cfg.classes, frames * 3 * cfg.classes, cfg.classes)
        } else {
            (0, 0, 0)
        };
        SharedTables {
            frames,
            classes,
            word_fa: WordTable::new(if cfg.uses_classes() { 0 } else { frames * 3 }),
            fa_total: vec![0; frames * 3],
            link_fac: vec![0; link_len],
            class_word: WordTable::new(class_block),
            class_total: vec![0; classes],
        }
    }

    #[inline]
    fn link_idx(&self, f: usize, a: usize, c: usize) -> usize {
        (f * 3 + a) * self.classes + c
    }
}

impl SharedCounts for SharedTables {
    #[inline]
    fn word_fa(&self, w: WordId, f: usize, a: usize) -> u32 {
        self.word_fa.get(w, f * 3 + a)
    }
    #[inline]
    fn fa_total(&self, f: usize, a: usize) -> u32 {
        self.fa_total[f * 3 + a]
    }
    #[inline]
    fn link(&self, f: usize, a: usize, c: usize) -> u32 {
        self.link_fac[self.link_idx(f, a, c)]
    }
    #[inline]
    fn class_word(&self, c: usize, w: WordId) -> u32 {
        self.class_word.get(w, c)
    }
    #[inline]
    fn class_total(&self, c: usize) -> u32 {
        self.class_total[c]
    }

    #[inline]
    fn add_word_fa(&mut self, w: WordId, f: usize, a: usize, delta: i32) {
        self.word_fa.add(w, f * 3 + a, delta);
    }
    #[inline]
    fn add_fa_total(&mut self, f: usize, a: usize, delta: i32) {
        let cell = &mut self.fa_total[f * 3 + a];
        *cell = cell.checked_add_signed(delta).expect("fa_total underflow");
    }
    #[inline]
    fn add_link(&mut self, f: usize, a: usize, c: usize, delta: i32) {
        let idx = self.link_idx(f, a, c);
        let cell = &mut self.link_fac[idx];
        *cell = cell.checked_add_signed(delta).expect("link underflow");
    }
    #[inline]
    fn add_class_word(&mut self, c: usize, w: WordId, delta: i32) {
        self.class_word.add(w, c, delta);
    }
    #[inline]
    fn add_class_total(&mut self, c: usize, delta: i32) {
        let cell = &mut self.class_total[c];
        *cell = cell
            .checked_add_signed(delta)
            .expect("class_total underflow");
    }
}

/// All sufficient statistics of a sampler state.
#[derive(Clone, Debug, PartialEq)]
pub struct CountTables {
    pub docs: DocTables,
    pub shared: SharedTables,
}

impl CountTables {
    pub fn new(corpus: &Corpus, cfg: &ModelConfig) -> CountTables {
        CountTables {
            docs: DocTables::new(corpus.doc_count(), cfg.frames),
            shared: SharedTables::new(cfg),
        }
    }

    /// Rebuild tables from scratch out of an assignment state. This is the
    /// reference construction the incrementally maintained tables are checked
    /// against.
    pub fn rebuild(corpus: &Corpus, state: &AssignmentState, cfg: &ModelConfig) -> CountTables {
        let mut tables = CountTables::new(corpus, cfg);
        let policy = cfg.policy();
        for (i, t) in corpus.tuples.iter().enumerate() {
            let f = state.frame_of[i] as usize;
            let d = t.doc as usize;
            tables.docs.doc_frame[d * cfg.frames + f] += 1;
            tables.docs.doc_total[d] += 1;
            for a in ArgPosition::ALL {
                let w = t.word_at(a);
                if policy == NonePolicy::Skip && w.is_none() {
                    continue;
                }
                let ai = a.index();
                match cfg.variant {
                    ModelVariant::Independent | ModelVariant::DocTuple => {
                        tables.shared.add_word_fa(w, f, ai, 1);
                        tables.shared.add_fa_total(f, ai, 1);
                    }
                    ModelVariant::DocTupleClass => {
                        let c = state.class_of[i][ai];
                        assert_ne!(c, NO_CLASS, "modeled slot without class assignment");
                        tables.shared.add_link(f, ai, c as usize, 1);
                        tables.shared.add_fa_total(f, ai, 1);
                        tables.shared.add_class_word(c as usize, w, 1);
                        tables.shared.add_class_total(c as usize, 1);
                    }
                }
            }
        }
        tables
    }

    /// Check the marginal identities: every coarse table equals the sum of
    /// its finer one and the grand totals match the corpus.
    pub fn check_consistency(&self, corpus: &Corpus, cfg: &ModelConfig) -> bool {
        let tuple_total: u64 = self.docs.doc_total.iter().map(|&c| c as u64).sum();
        if tuple_total != corpus.len() as u64 {
            return false;
        }
        for d in 0..corpus.doc_count() {
            let row_sum: u64 = self.docs.row(d).iter().map(|&c| c as u64).sum();
            if row_sum != self.docs.doc_total[d] as u64 {
                return false;
            }
        }
        let policy = cfg.policy();
        let token_total: u64 = corpus
            .tuples
            .iter()
            .map(|t| {
                ArgPosition::ALL
                    .iter()
                    .filter(|&&a| policy == NonePolicy::Placeholder || t.present(a))
                    .count() as u64
            })
            .sum();
        let fa_sum: u64 = self.shared.fa_total.iter().map(|&c| c as u64).sum();
        if fa_sum != token_total {
            return false;
        }
        match cfg.variant {
            ModelVariant::Independent | ModelVariant::DocTuple => {
                if self.shared.word_fa.total() != token_total {
                    return false;
                }
                // fa_total must equal the word-table column sums.
                let mut per_fa = vec![0u64; cfg.frames * 3];
                for w in self.shared.word_fa.sorted_words() {
                    let block = self.shared.word_fa.block(WordId(w)).unwrap();
                    for (slot, &c) in block.iter().enumerate() {
                        per_fa[slot] += c as u64;
                    }
                }
                per_fa
                    .iter()
                    .zip(&self.shared.fa_total)
                    .all(|(&fine, &coarse)| fine == coarse as u64)
            }
            ModelVariant::DocTupleClass => {
                if self.shared.class_word.total() != token_total {
                    return false;
                }
                let c_dim = cfg.classes;
                for fa in 0..cfg.frames * 3 {
                    let fine: u64 = self.shared.link_fac[fa * c_dim..(fa + 1) * c_dim]
                        .iter()
                        .map(|&c| c as u64)
                        .sum();
                    if fine != self.shared.fa_total[fa] as u64 {
                        return false;
                    }
                }
                let mut per_class = vec![0u64; c_dim];
                for w in self.shared.class_word.sorted_words() {
                    let block = self.shared.class_word.block(WordId(w)).unwrap();
                    for (c, &n) in block.iter().enumerate() {
                        per_class[c] += n as u64;
                    }
                }
                per_class
                    .iter()
                    .zip(&self.shared.class_total)
                    .all(|(&fine, &coarse)| fine == coarse as u64)
            }
        }
    }
}
