//! Multi-worker Gibbs sampling with stale counts.
//!
//! Workers own disjoint contiguous document ranges. During one iteration
//! every worker sweeps its documents against a frozen snapshot of the shared
//! tables plus its own live delta; per-document tables are worker-private and
//! always exact. At the barrier the deltas are summed into the shared tables
//! and a fresh snapshot is published for the next iteration.

use std::collections::HashMap;
use std::ops::Range;

use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, WordId};
use crate::error::{Error, Result};
use crate::model::sampler::{sweep_shard, DocShard, ModelCtx};
use crate::model::{
    AssignmentState, CountTables, DocMask, Hyperparams, ModelConfig, SharedCounts, SharedTables,
    SweepStats,
};

/// Contiguous document ranges per worker; documents are never split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkerPartition {
    pub doc_ranges: Vec<Range<usize>>,
    pub tuple_ranges: Vec<Range<usize>>,
}

/// Split documents into `workers` contiguous ranges, balancing tuple counts
/// greedily while leaving at least one document per worker.
pub fn partition_documents(corpus: &Corpus, workers: usize) -> Result<WorkerPartition> {
    let docs = corpus.doc_count();
    if workers == 0 {
        return Err(Error::Config("worker count must be at least 1".into()));
    }
    // A single worker may own an empty corpus; beyond that every worker
    // needs at least one document.
    if workers > docs.max(1) {
        return Err(Error::Config(format!(
            "cannot split {docs} documents across {workers} workers"
        )));
    }
    let total = corpus.len();
    let mut doc_ranges = Vec::with_capacity(workers);
    let mut start = 0usize;
    let mut assigned = 0usize;
    for w in 0..workers {
        let remaining_workers = workers - w;
        let mut end = start;
        let mut load = 0usize;
        let target = (total - assigned).div_ceil(remaining_workers);
        while end < docs {
            // Leave enough documents for the remaining workers.
            if docs - (end + 1) < remaining_workers - 1 {
                if end == start {
                    end += 1;
                }
                break;
            }
            let span = corpus.doc_span(end).len();
            if end > start && load + span > target {
                break;
            }
            load += span;
            end += 1;
        }
        assigned += load;
        doc_ranges.push(start..end);
        start = end;
    }
    debug_assert_eq!(doc_ranges.last().map(|r| r.end), Some(docs));
    let tuple_ranges = doc_ranges
        .iter()
        .map(|r| {
            let lo = if r.start < docs {
                corpus.doc_span(r.start).start
            } else {
                corpus.len()
            };
            let hi = if r.end > r.start {
                corpus.doc_span(r.end - 1).end
            } else {
                lo
            };
            lo..hi
        })
        .collect();
    Ok(WorkerPartition {
        doc_ranges,
        tuple_ranges,
    })
}

/// Sparse increments to the shared tables accumulated by one worker during
/// one iteration.
#[derive(Clone, Debug)]
pub struct CountDelta {
    word_fa: HashMap<u32, Vec<i64>>,
    fa_total: Vec<i64>,
    link_fac: Vec<i64>,
    class_word: HashMap<u32, Vec<i64>>,
    class_total: Vec<i64>,
    word_block: usize,
    classes: usize,
}

impl CountDelta {
    pub fn new(config: &ModelConfig) -> CountDelta {
        let frames = config.frames;
        let (classes, link_len, class_block) = if config.uses_classes() {
            (config.classes, frames * 3 * config.classes, config.classes)
        } else {
            (0, 0, 0)
        };
        CountDelta {
            word_fa: HashMap::new(),
            fa_total: vec![0; frames * 3],
            link_fac: vec![0; link_len],
            class_word: HashMap::new(),
            class_total: vec![0; classes],
            word_block: if config.uses_classes() { 0 } else { frames * 3 },
            classes: class_block,
        }
    }

    fn word_fa_get(&self, w: u32, slot: usize) -> i64 {
        self.word_fa.get(&w).map_or(0, |b| b[slot])
    }

    fn class_word_get(&self, w: u32, c: usize) -> i64 {
        self.class_word.get(&w).map_or(0, |b| b[c])
    }

    /// Sum of all increments per table; conservation requires zero for every
    /// fixed-population table.
    pub fn totals(&self) -> DeltaTotals {
        DeltaTotals {
            word_fa: self.word_fa.values().flat_map(|b| b.iter()).sum(),
            fa_total: self.fa_total.iter().sum(),
            link_fac: self.link_fac.iter().sum(),
            class_word: self.class_word.values().flat_map(|b| b.iter()).sum(),
            class_total: self.class_total.iter().sum(),
        }
    }

    /// Fold this delta into the live shared tables.
    pub fn apply_to(&self, shared: &mut SharedTables) {
        let mut words: Vec<u32> = self.word_fa.keys().copied().collect();
        words.sort_unstable();
        for w in words {
            let block = &self.word_fa[&w];
            for (slot, &d) in block.iter().enumerate() {
                if d != 0 {
                    shared.word_fa.add(WordId(w), slot, d as i32);
                }
            }
        }
        for (slot, &d) in self.fa_total.iter().enumerate() {
            if d != 0 {
                shared.add_fa_total(slot / 3, slot % 3, d as i32);
            }
        }
        for (idx, &d) in self.link_fac.iter().enumerate() {
            if d != 0 {
                let c = idx % self.classes;
                let fa = idx / self.classes;
                shared.add_link(fa / 3, fa % 3, c, d as i32);
            }
        }
        let mut words: Vec<u32> = self.class_word.keys().copied().collect();
        words.sort_unstable();
        for w in words {
            let block = &self.class_word[&w];
            for (c, &d) in block.iter().enumerate() {
                if d != 0 {
                    shared.class_word.add(WordId(w), c, d as i32);
                }
            }
        }
        for (c, &d) in self.class_total.iter().enumerate() {
            if d != 0 {
                shared.add_class_total(c, d as i32);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DeltaTotals {
    pub word_fa: i64,
    pub fa_total: i64,
    pub link_fac: i64,
    pub class_word: i64,
    pub class_total: i64,
}

impl DeltaTotals {
    pub fn accumulate(&mut self, other: &DeltaTotals) {
        self.word_fa += other.word_fa;
        self.fa_total += other.fa_total;
        self.link_fac += other.link_fac;
        self.class_word += other.class_word;
        self.class_total += other.class_total;
    }

    pub fn is_zero(&self) -> bool {
        *self == DeltaTotals::default()
    }
}

/// A worker's view of the shared tables: the frozen snapshot plus its own
/// live delta. Reads see snapshot + delta; writes go to the delta only.
pub(crate) struct StaleView<'a> {
    snapshot: &'a SharedTables,
    delta: &'a mut CountDelta,
}

impl<'a> StaleView<'a> {
    pub fn new(snapshot: &'a SharedTables, delta: &'a mut CountDelta) -> StaleView<'a> {
        StaleView { snapshot, delta }
    }
}

#[inline]
fn merged(base: u32, delta: i64) -> u32 {
    let v = base as i64 + delta;
    debug_assert!(v >= 0, "stale view produced a negative count");
    v.max(0) as u32
}

impl SharedCounts for StaleView<'_> {
    #[inline]
    fn word_fa(&self, w: WordId, f: usize, a: usize) -> u32 {
        merged(
            self.snapshot.word_fa(w, f, a),
            self.delta.word_fa_get(w.0, f * 3 + a),
        )
    }
    #[inline]
    fn fa_total(&self, f: usize, a: usize) -> u32 {
        merged(self.snapshot.fa_total(f, a), self.delta.fa_total[f * 3 + a])
    }
    #[inline]
    fn link(&self, f: usize, a: usize, c: usize) -> u32 {
        merged(
            self.snapshot.link(f, a, c),
            self.delta.link_fac[(f * 3 + a) * self.delta.classes + c],
        )
    }
    #[inline]
    fn class_word(&self, c: usize, w: WordId) -> u32 {
        merged(
            self.snapshot.class_word(c, w),
            self.delta.class_word_get(w.0, c),
        )
    }
    #[inline]
    fn class_total(&self, c: usize) -> u32 {
        merged(self.snapshot.class_total(c), self.delta.class_total[c])
    }

    #[inline]
    fn add_word_fa(&mut self, w: WordId, f: usize, a: usize, delta: i32) {
        let width = self.delta.word_block;
        let block = self
            .delta
            .word_fa
            .entry(w.0)
            .or_insert_with(|| vec![0; width]);
        block[f * 3 + a] += delta as i64;
    }
    #[inline]
    fn add_fa_total(&mut self, f: usize, a: usize, delta: i32) {
        self.delta.fa_total[f * 3 + a] += delta as i64;
    }
    #[inline]
    fn add_link(&mut self, f: usize, a: usize, c: usize, delta: i32) {
        self.delta.link_fac[(f * 3 + a) * self.delta.classes + c] += delta as i64;
    }
    #[inline]
    fn add_class_word(&mut self, c: usize, w: WordId, delta: i32) {
        let width = self.delta.classes;
        let block = self
            .delta
            .class_word
            .entry(w.0)
            .or_insert_with(|| vec![0; width]);
        block[c] += delta as i64;
    }
    #[inline]
    fn add_class_total(&mut self, c: usize, delta: i32) {
        self.delta.class_total[c] += delta as i64;
    }
}

/// Outcome of one parallel iteration.
pub struct ParallelSweep {
    pub stats: SweepStats,
    /// Per-worker deltas, already folded into the shared tables.
    pub deltas: Vec<CountDelta>,
    /// Wall time spent in the reduction barrier.
    pub barrier_ms: u64,
}

/// One bulk-synchronous iteration: every worker sweeps its shard against the
/// frozen snapshot, then the deltas are reduced into the shared tables.
#[allow(clippy::too_many_arguments)]
pub(crate) fn parallel_sweep(
    corpus: &Corpus,
    ctx: &ModelCtx,
    config: &ModelConfig,
    hypers: &Hyperparams,
    mask: Option<&DocMask>,
    partition: &WorkerPartition,
    tables: &mut CountTables,
    state: &mut AssignmentState,
    rngs: &mut [ChaCha8Rng],
) -> Result<ParallelSweep> {
    let workers = partition.doc_ranges.len();
    assert_eq!(rngs.len(), workers, "one sweep stream per worker");
    let snapshot = tables.shared.clone();
    let frames = config.frames;

    // Carve the document tables and the assignment vectors into per-worker
    // mutable windows.
    let mut shards: Vec<DocShard<'_>> = Vec::with_capacity(workers);
    {
        let mut doc_frame_rest: &mut [u32] = &mut tables.docs.doc_frame;
        let mut doc_total_rest: &mut [u32] = &mut tables.docs.doc_total;
        let mut frame_rest: &mut [u32] = &mut state.frame_of;
        let mut class_rest: &mut [[u32; 3]] = &mut state.class_of;
        let has_classes = config.uses_classes();
        for w in 0..workers {
            let dr = &partition.doc_ranges[w];
            let tr = &partition.tuple_ranges[w];
            let (df, df_rest) = doc_frame_rest.split_at_mut(dr.len() * frames);
            let (dt, dt_rest) = doc_total_rest.split_at_mut(dr.len());
            let (fr, fr_rest) = frame_rest.split_at_mut(tr.len());
            let (cl, cl_rest) = if has_classes {
                class_rest.split_at_mut(tr.len())
            } else {
                class_rest.split_at_mut(0)
            };
            doc_frame_rest = df_rest;
            doc_total_rest = dt_rest;
            frame_rest = fr_rest;
            class_rest = cl_rest;
            shards.push(DocShard {
                doc_lo: dr.start,
                doc_count: dr.len(),
                tuple_lo: tr.start,
                frames,
                doc_frame: df,
                doc_total: dt,
                frame_of: fr,
                class_of: cl,
            });
        }
    }

    let results: Vec<Result<(SweepStats, CountDelta)>> = std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(workers);
        for (shard, rng) in shards.into_iter().zip(rngs.iter_mut()) {
            let snapshot = &snapshot;
            let handle = scope.spawn(move || {
                let mut shard = shard;
                let mut delta = CountDelta::new(config);
                let mut view = StaleView::new(snapshot, &mut delta);
                let mut weights = Vec::new();
                let stats = sweep_shard(
                    corpus,
                    ctx,
                    hypers,
                    mask,
                    &mut shard,
                    &mut view,
                    rng,
                    &mut weights,
                )?;
                Ok((stats, delta))
            });
            handles.push(handle);
        }
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked"))
            .collect()
    });

    let barrier_start = std::time::Instant::now();
    let mut stats = SweepStats::default();
    let mut deltas = Vec::with_capacity(workers);
    for result in results {
        let (s, delta) = result?;
        stats.changes += s.changes;
        stats.pseudo_ll += s.pseudo_ll;
        delta.apply_to(&mut tables.shared);
        deltas.push(delta);
    }
    let barrier_ms = barrier_start.elapsed().as_millis() as u64;
    Ok(ParallelSweep {
        stats,
        deltas,
        barrier_ms,
    })
}
