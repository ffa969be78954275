//! The fit engine: sweep scheduling, hyperparameter resampling, trace
//! emission and checkpointing, for one worker or many.

use std::time::Instant;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Vocabulary};
use crate::diagnostics::{log_joint, TraceRecord, TraceWriter};
use crate::error::{Error, Result};
use crate::hyper::{resample_alpha, resample_beta, resample_gamma, HyperSchedule};
use crate::model::sampler::{init_assignments, sweep_shard, DocShard, ModelCtx};
use crate::model::{
    apply_label_mask, AssignmentState, Checkpoint, CountTables, DocMask, Hyperparams, ModelConfig,
    ModelVariant, PointEstimates, CHECKPOINT_VERSION,
};
use crate::parallel::{parallel_sweep, partition_documents, WorkerPartition};

/// Which concentration parameters are resampled on schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResamplePolicy {
    pub alpha: bool,
    pub beta: bool,
    pub gamma: bool,
}

impl Default for ResamplePolicy {
    fn default() -> Self {
        ResamplePolicy {
            alpha: true,
            beta: true,
            gamma: true,
        }
    }
}

impl ResamplePolicy {
    pub fn fixed() -> ResamplePolicy {
        ResamplePolicy {
            alpha: false,
            beta: false,
            gamma: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub iters: u64,
    pub schedule: HyperSchedule,
    pub resample: ResamplePolicy,
    /// Evaluate the exact log joint every this many iterations (0 = never).
    pub log_joint_every: u64,
    pub workers: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            iters: 1000,
            schedule: HyperSchedule::default(),
            resample: ResamplePolicy::default(),
            log_joint_every: 10,
            workers: 1,
        }
    }
}

/// Derive the sweep stream for one worker. Worker 0 continues the base seed
/// so a single-worker fit equals the plain sequential sampler stream.
fn worker_seed(seed: u64, worker: u64) -> u64 {
    seed.wrapping_add(worker.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

const HYPER_STREAM_SALT: u64 = 0x5851_F42D_4C95_7F2D;

/// A fitting run in progress: assignments, tables, live hyperparameters and
/// the RNG streams. All randomness flows from the config seed.
pub struct FitEngine<'c> {
    pub corpus: &'c Corpus,
    pub config: ModelConfig,
    pub hypers: Hyperparams,
    pub state: AssignmentState,
    pub tables: CountTables,
    pub iteration: u64,
    vocab_real: usize,
    ctx: ModelCtx,
    mask: Option<DocMask>,
    partition: WorkerPartition,
    sweep_rngs: Vec<ChaCha8Rng>,
    hyper_rng: ChaCha8Rng,
    weights: Vec<f64>,
    sweep_deltas: Option<Vec<crate::parallel::DeltaTotals>>,
}

impl<'c> FitEngine<'c> {
    /// Random initialization from the config seed.
    pub fn new(
        corpus: &'c Corpus,
        vocab_real: usize,
        config: ModelConfig,
        workers: usize,
    ) -> Result<FitEngine<'c>> {
        config.validate()?;
        let partition = partition_documents(corpus, workers)?;
        let real_workers = partition.doc_ranges.len();
        let ctx = ModelCtx::from_config(&config, vocab_real);
        let mask = match &config.mask {
            Some(m) => Some(apply_label_mask(m, corpus, config.frames)?),
            None => None,
        };
        let mut sweep_rngs: Vec<ChaCha8Rng> = (0..real_workers as u64)
            .map(|w| ChaCha8Rng::seed_from_u64(worker_seed(config.seed, w)))
            .collect();
        let hyper_rng = ChaCha8Rng::seed_from_u64(config.seed ^ HYPER_STREAM_SALT);
        let state = init_assignments(corpus, &ctx, mask.as_ref(), &mut sweep_rngs[0]);
        let tables = CountTables::rebuild(corpus, &state, &config);
        Ok(FitEngine {
            corpus,
            hypers: config.initial_hypers(),
            config,
            state,
            tables,
            iteration: 0,
            vocab_real,
            ctx,
            mask,
            partition,
            sweep_rngs,
            hyper_rng,
            weights: Vec::new(),
            sweep_deltas: None,
        })
    }

    /// Restore a run from a checkpoint; the corpus and vocabulary must hash
    /// to the values recorded at save time.
    pub fn from_checkpoint(
        corpus: &'c Corpus,
        vocab: &Vocabulary,
        ckpt: Checkpoint,
        workers: Option<usize>,
    ) -> Result<FitEngine<'c>> {
        ckpt.verify_inputs(corpus, vocab)?;
        let stored_workers = ckpt.sweep_rngs.len();
        if let Some(w) = workers {
            if w != stored_workers {
                return Err(Error::Mismatch(format!(
                    "checkpoint was taken with {stored_workers} workers, cannot resume with {w}"
                )));
            }
        }
        let config = ckpt.config;
        config.validate()?;
        if ckpt.state.frame_of.len() != corpus.len() {
            return Err(Error::Mismatch(
                "checkpoint state does not cover the corpus".into(),
            ));
        }
        let partition = partition_documents(corpus, stored_workers)?;
        let ctx = ModelCtx::from_config(&config, ckpt.vocab_real);
        let mask = match &config.mask {
            Some(m) => Some(apply_label_mask(m, corpus, config.frames)?),
            None => None,
        };
        let tables = CountTables::rebuild(corpus, &ckpt.state, &config);
        Ok(FitEngine {
            corpus,
            hypers: ckpt.hypers,
            config,
            state: ckpt.state,
            tables,
            iteration: ckpt.iteration,
            vocab_real: ckpt.vocab_real,
            ctx,
            mask,
            partition,
            sweep_rngs: ckpt.sweep_rngs,
            hyper_rng: ckpt.hyper_rng,
            weights: Vec::new(),
            sweep_deltas: None,
        })
    }

    pub fn workers(&self) -> usize {
        self.partition.doc_ranges.len()
    }

    pub fn mask(&self) -> Option<&DocMask> {
        self.mask.as_ref()
    }

    /// Exact collapsed log joint of the current state.
    pub fn log_joint(&self) -> f64 {
        log_joint(
            self.corpus,
            &self.tables,
            &self.config,
            &self.hypers,
            self.mask.as_ref(),
            self.vocab_real,
        )
    }

    pub fn point_estimates(&self) -> PointEstimates {
        crate::model::sampler::point_estimates(
            &self.tables,
            &self.ctx,
            &self.hypers,
            self.mask.as_ref(),
            self.corpus.doc_count(),
        )
    }

    /// One sweep without hyperparameter updates or tracing, returning the
    /// per-worker delta totals observed at the barrier (empty for a single
    /// worker). This is the diagnostic surface for delta-conservation checks.
    pub fn step_with_delta_totals(
        &mut self,
    ) -> Result<(crate::model::SweepStats, Vec<crate::parallel::DeltaTotals>)> {
        let before = self.sweep_deltas.take();
        debug_assert!(before.is_none());
        let (stats, _) = self.sweep_once()?;
        self.iteration += 1;
        Ok((stats, self.sweep_deltas.take().unwrap_or_default()))
    }

    fn sweep_once(&mut self) -> Result<(crate::model::SweepStats, Option<u64>)> {
        if self.workers() == 1 {
            let FitEngine {
                corpus,
                config,
                mask,
                state,
                tables,
                sweep_rngs,
                ctx,
                weights,
                hypers,
                ..
            } = self;
            let mut shard = DocShard {
                doc_lo: 0,
                doc_count: corpus.doc_count(),
                tuple_lo: 0,
                frames: config.frames,
                doc_frame: &mut tables.docs.doc_frame,
                doc_total: &mut tables.docs.doc_total,
                frame_of: &mut state.frame_of,
                class_of: &mut state.class_of,
            };
            let stats = sweep_shard(
                corpus,
                ctx,
                hypers,
                mask.as_ref(),
                &mut shard,
                &mut tables.shared,
                &mut sweep_rngs[0],
                weights,
            )?;
            Ok((stats, None))
        } else {
            let sweep = parallel_sweep(
                self.corpus,
                &self.ctx,
                &self.config,
                &self.hypers,
                self.mask.as_ref(),
                &self.partition,
                &mut self.tables,
                &mut self.state,
                &mut self.sweep_rngs,
            )?;
            self.sweep_deltas = Some(sweep.deltas.iter().map(|d| d.totals()).collect());
            Ok((sweep.stats, Some(sweep.barrier_ms)))
        }
    }

    fn resample_hypers(&mut self, policy: &ResamplePolicy, schedule: &HyperSchedule) -> Result<()> {
        if policy.alpha && self.config.variant != ModelVariant::Independent {
            resample_alpha(
                &self.tables,
                self.mask.as_ref(),
                &mut self.hypers,
                schedule,
                &mut self.hyper_rng,
            )?;
        }
        if policy.beta {
            resample_beta(
                &self.tables,
                &self.config,
                self.vocab_real,
                &mut self.hypers,
                schedule,
                &mut self.hyper_rng,
            )?;
        }
        if policy.gamma && self.config.variant == ModelVariant::DocTupleClass {
            for a in 0..3 {
                resample_gamma(
                    &self.tables,
                    &self.config,
                    a,
                    &mut self.hypers,
                    schedule,
                    &mut self.hyper_rng,
                )?;
            }
        }
        Ok(())
    }

    /// Run `opts.iters` iterations: sweep, resample hyperparameters on
    /// schedule (immediately after the barrier, on fresh counts), then record
    /// a trace row. Returns all rows produced.
    pub fn run(
        &mut self,
        opts: &FitOptions,
        mut trace: Option<&mut TraceWriter>,
    ) -> Result<Vec<TraceRecord>> {
        let mut records = Vec::with_capacity(opts.iters as usize);
        for _ in 0..opts.iters {
            let t = self.iteration + 1;
            let started = Instant::now();
            let (stats, barrier_ms) = self.sweep_once()?;
            if opts.schedule.due(t) {
                self.resample_hypers(&opts.resample, &opts.schedule)?;
            }
            let lj = (opts.log_joint_every > 0 && t.is_multiple_of(opts.log_joint_every))
                .then(|| self.log_joint());
            let record = TraceRecord {
                iteration: t,
                changes: stats.changes,
                log_joint: lj,
                pseudo_ll: stats.pseudo_ll,
                alpha: self.hypers.alpha,
                beta: self.hypers.beta,
                gamma: self.hypers.gamma,
                wall_ms: started.elapsed().as_millis() as u64,
                barrier_ms,
            };
            if let Some(writer) = trace.as_deref_mut() {
                writer.write(&record)?;
            }
            records.push(record);
            self.iteration = t;
        }
        Ok(records)
    }

    /// Snapshot the run for exact resumption.
    pub fn to_checkpoint(&self, vocab: &Vocabulary) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            hypers: self.hypers,
            corpus_hash: self.corpus.content_hash(),
            vocab_hash: vocab.content_hash(),
            vocab_real: self.vocab_real,
            iteration: self.iteration,
            state: self.state.clone(),
            sweep_rngs: self.sweep_rngs.clone(),
            hyper_rng: self.hyper_rng.clone(),
        }
    }
}
