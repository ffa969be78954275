use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ArgPosition, Corpus, VsoTuple, WordId};
use crate::error::{Error, Result};

use super::counts::{CountTables, SharedCounts};
use super::{
    apply_label_mask, AssignmentState, DocMask, EstimateKind, Hyperparams, ModelConfig,
    ModelVariant, NonePolicy, PointEstimates, NO_CLASS,
};

/// Resolved model shape, cheap to copy into the hot loop.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ModelCtx {
    pub variant: ModelVariant,
    pub frames: usize,
    pub classes: usize,
    pub policy: NonePolicy,
    pub word_dim: usize,
}

impl ModelCtx {
    pub fn from_config(config: &ModelConfig, vocab_real: usize) -> ModelCtx {
        ModelCtx {
            variant: config.variant,
            frames: config.frames,
            classes: config.classes,
            policy: config.policy(),
            word_dim: config.word_dim(vocab_real),
        }
    }

    #[inline]
    pub fn slot_modeled(&self, t: &VsoTuple, a: ArgPosition) -> bool {
        self.policy == NonePolicy::Placeholder || t.present(a)
    }
}

/// Outcome of one full sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SweepStats {
    /// Latent variables (frames and classes) whose value changed.
    pub changes: u64,
    /// Running pseudolikelihood: the summed log probability of every sampled
    /// value under its own conditional.
    pub pseudo_ll: f64,
}

/// A contiguous range of documents with mutable views of everything the
/// sweep updates locally: the per-document tables and the assignments of the
/// tuples in range.
pub(crate) struct DocShard<'a> {
    pub doc_lo: usize,
    pub doc_count: usize,
    pub tuple_lo: usize,
    pub frames: usize,
    pub doc_frame: &'a mut [u32],
    pub doc_total: &'a mut [u32],
    pub frame_of: &'a mut [u32],
    pub class_of: &'a mut [[u32; 3]],
}

/// Unnormalized frame conditional for one tuple whose own contribution has
/// already been removed from all tables. Returns the weight total.
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn frame_weights<S: SharedCounts>(
    ctx: &ModelCtx,
    h: &Hyperparams,
    t: &VsoTuple,
    classes: &[u32; 3],
    doc_row: &[u32],
    doc_total: u32,
    allowed: Option<&[bool]>,
    allowed_count: u32,
    shared: &S,
    out: &mut Vec<f64>,
) -> f64 {
    let frames = ctx.frames;
    out.clear();
    out.resize(frames, 0.0);
    let alpha0 = match allowed {
        Some(_) => h.alpha * allowed_count as f64,
        None => h.alpha * frames as f64,
    };
    let doc_denom = doc_total as f64 + alpha0;
    let beta0 = h.beta * ctx.word_dim as f64;
    let mut total = 0.0;
    for f in 0..frames {
        if let Some(mask) = allowed {
            if !mask[f] {
                continue;
            }
        }
        let mut q = match ctx.variant {
            ModelVariant::Independent => 1.0,
            ModelVariant::DocTuple | ModelVariant::DocTupleClass => {
                (doc_row[f] as f64 + h.alpha) / doc_denom
            }
        };
        for a in ArgPosition::ALL {
            if !ctx.slot_modeled(t, a) {
                continue;
            }
            let ai = a.index();
            q *= match ctx.variant {
                ModelVariant::Independent | ModelVariant::DocTuple => {
                    let w = t.word_at(a);
                    (shared.word_fa(w, f, ai) as f64 + h.beta)
                        / (shared.fa_total(f, ai) as f64 + beta0)
                }
                ModelVariant::DocTupleClass => {
                    let c = classes[ai] as usize;
                    let gamma0 = h.gamma[ai] * ctx.classes as f64;
                    (shared.link(f, ai, c) as f64 + h.gamma[ai])
                        / (shared.fa_total(f, ai) as f64 + gamma0)
                }
            };
        }
        out[f] = q;
        total += q;
    }
    total
}

/// Unnormalized class conditional for one token (model 2) whose class
/// contribution has been removed; the (frame, position)-constant denominator
/// is dropped. Returns the weight total.
#[inline]
pub(crate) fn class_weights<S: SharedCounts>(
    ctx: &ModelCtx,
    h: &Hyperparams,
    f: usize,
    ai: usize,
    w: WordId,
    shared: &S,
    out: &mut Vec<f64>,
) -> f64 {
    let classes = ctx.classes;
    out.clear();
    out.resize(classes, 0.0);
    let beta0 = h.beta * ctx.word_dim as f64;
    let mut total = 0.0;
    for (c, slot) in out.iter_mut().enumerate() {
        let q = (shared.link(f, ai, c) as f64 + h.gamma[ai])
            * ((shared.class_word(c, w) as f64 + h.beta) / (shared.class_total(c) as f64 + beta0));
        *slot = q;
        total += q;
    }
    total
}

/// Add (+1) or remove (-1) a tuple's frame-side contribution: the document
/// tables plus, per modeled slot, the frame-indexed shared tables. Class-word
/// counts are untouched (they do not involve the frame).
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn apply_frame_side<S: SharedCounts>(
    ctx: &ModelCtx,
    t: &VsoTuple,
    f: usize,
    classes: &[u32; 3],
    doc_row: &mut [u32],
    doc_total: &mut u32,
    shared: &mut S,
    sign: i32,
) {
    doc_row[f] = doc_row[f]
        .checked_add_signed(sign)
        .expect("doc_frame underflow");
    *doc_total = doc_total
        .checked_add_signed(sign)
        .expect("doc_total underflow");
    for a in ArgPosition::ALL {
        if !ctx.slot_modeled(t, a) {
            continue;
        }
        let ai = a.index();
        match ctx.variant {
            ModelVariant::Independent | ModelVariant::DocTuple => {
                shared.add_word_fa(t.word_at(a), f, ai, sign);
                shared.add_fa_total(f, ai, sign);
            }
            ModelVariant::DocTupleClass => {
                shared.add_link(f, ai, classes[ai] as usize, sign);
                shared.add_fa_total(f, ai, sign);
            }
        }
    }
}

/// Add or remove one token's class-side contribution (model 2). The token
/// stays put at (f, a), so `fa_total` is not touched.
#[inline]
pub(crate) fn apply_class_side<S: SharedCounts>(
    shared: &mut S,
    f: usize,
    ai: usize,
    c: usize,
    w: WordId,
    sign: i32,
) {
    shared.add_link(f, ai, c, sign);
    shared.add_class_word(c, w, sign);
    shared.add_class_total(c, sign);
}

#[inline]
fn sample_index(weights: &[f64], total: f64, u: f64) -> usize {
    let target = u * total;
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return k;
        }
    }
    // Rounding pushed the target past the final cumulative sum; take the
    // last frame with positive mass.
    weights
        .iter()
        .rposition(|&w| w > 0.0)
        .expect("all-zero weight vector")
}

/// One sequential sweep over a shard's documents in ascending tuple order:
/// decrement, sample from the conditional, increment. For model 2, the frame
/// is resampled first, then the classes in verb/subject/object order.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sweep_shard<S: SharedCounts>(
    corpus: &Corpus,
    ctx: &ModelCtx,
    h: &Hyperparams,
    mask: Option<&DocMask>,
    shard: &mut DocShard<'_>,
    shared: &mut S,
    rng: &mut ChaCha8Rng,
    weights: &mut Vec<f64>,
) -> Result<SweepStats> {
    let mut stats = SweepStats::default();
    let frames = shard.frames;
    for d in shard.doc_lo..shard.doc_lo + shard.doc_count {
        let local_d = d - shard.doc_lo;
        let (allowed, allowed_count) = match mask {
            Some(m) => (Some(m.allowed[d].as_slice()), m.allowed_count[d]),
            None => (None, 0),
        };
        for i in corpus.doc_span(d) {
            let li = i - shard.tuple_lo;
            let t = &corpus.tuples[i];
            let f_old = shard.frame_of[li] as usize;
            let classes = if ctx.variant == ModelVariant::DocTupleClass {
                shard.class_of[li]
            } else {
                [NO_CLASS; 3]
            };

            let doc_row = &mut shard.doc_frame[local_d * frames..(local_d + 1) * frames];
            let doc_total = &mut shard.doc_total[local_d];

            apply_frame_side(ctx, t, f_old, &classes, doc_row, doc_total, shared, -1);
            let total = frame_weights(
                ctx,
                h,
                t,
                &classes,
                doc_row,
                *doc_total,
                allowed,
                allowed_count,
                shared,
                weights,
            );
            if !total.is_finite() || total <= 0.0 {
                return Err(Error::Numeric(format!(
                    "frame conditional for tuple {i} has weight total {total}"
                )));
            }
            let f_new = sample_index(weights, total, rng.random::<f64>());
            stats.pseudo_ll += (weights[f_new] / total).ln();
            apply_frame_side(ctx, t, f_new, &classes, doc_row, doc_total, shared, 1);
            if f_new != f_old {
                stats.changes += 1;
            }
            shard.frame_of[li] = f_new as u32;

            if ctx.variant != ModelVariant::DocTupleClass {
                continue;
            }
            for a in ArgPosition::ALL {
                let ai = a.index();
                let c_old = shard.class_of[li][ai];
                if c_old == NO_CLASS {
                    continue;
                }
                let w = t.word_at(a);
                apply_class_side(shared, f_new, ai, c_old as usize, w, -1);
                let total = class_weights(ctx, h, f_new, ai, w, shared, weights);
                if !total.is_finite() || total <= 0.0 {
                    return Err(Error::Numeric(format!(
                        "class conditional for tuple {i} position {ai} has weight total {total}"
                    )));
                }
                let c_new = sample_index(weights, total, rng.random::<f64>());
                stats.pseudo_ll += (weights[c_new] / total).ln();
                apply_class_side(shared, f_new, ai, c_new, w, 1);
                if c_new as u32 != c_old {
                    stats.changes += 1;
                }
                shard.class_of[li][ai] = c_new as u32;
            }
        }
    }
    Ok(stats)
}

/// Draw uniform-random assignments (respecting the mask) for every tuple.
pub(crate) fn init_assignments(
    corpus: &Corpus,
    ctx: &ModelCtx,
    mask: Option<&DocMask>,
    rng: &mut ChaCha8Rng,
) -> AssignmentState {
    let mut frame_of = Vec::with_capacity(corpus.len());
    let mut class_of = Vec::new();
    if ctx.variant == ModelVariant::DocTupleClass {
        class_of.reserve(corpus.len());
    }
    for d in 0..corpus.doc_count() {
        let allowed_ids: Option<Vec<usize>> = mask.map(|m| {
            m.allowed[d]
                .iter()
                .enumerate()
                .filter_map(|(f, &ok)| ok.then_some(f))
                .collect()
        });
        for i in corpus.doc_span(d) {
            let f = match &allowed_ids {
                Some(ids) => ids[rng.random_range(0..ids.len())],
                None => rng.random_range(0..ctx.frames),
            };
            frame_of.push(f as u32);
            if ctx.variant == ModelVariant::DocTupleClass {
                let t = &corpus.tuples[i];
                let mut cs = [NO_CLASS; 3];
                for a in ArgPosition::ALL {
                    if ctx.slot_modeled(t, a) {
                        cs[a.index()] = rng.random_range(0..ctx.classes) as u32;
                    }
                }
                class_of.push(cs);
            }
        }
    }
    AssignmentState { frame_of, class_of }
}

/// A single-threaded collapsed Gibbs sampler over one corpus.
///
/// A sampler instance is sequential by construction; the trajectory is fully
/// determined by (seed, corpus, config).
pub struct Sampler<'c> {
    pub corpus: &'c Corpus,
    pub config: ModelConfig,
    pub hypers: Hyperparams,
    pub mask: Option<DocMask>,
    pub state: AssignmentState,
    pub tables: CountTables,
    pub rng: ChaCha8Rng,
    ctx: ModelCtx,
    weights: Vec<f64>,
}

impl<'c> Sampler<'c> {
    /// Initialize with uniform-random assignments from the config seed.
    pub fn init_random(
        corpus: &'c Corpus,
        vocab_real: usize,
        config: ModelConfig,
    ) -> Result<Sampler<'c>> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Sampler::init_with_rng(corpus, vocab_real, config, &mut rng)
    }

    /// Initialize drawing from a caller-provided stream (the fit engine owns
    /// seeding policy); the sampler keeps its own clone of the stream state.
    pub fn init_with_rng(
        corpus: &'c Corpus,
        vocab_real: usize,
        config: ModelConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Sampler<'c>> {
        config.validate()?;
        let ctx = ModelCtx::from_config(&config, vocab_real);
        let mask = match &config.mask {
            Some(m) => Some(apply_label_mask(m, corpus, config.frames)?),
            None => None,
        };
        let state = init_assignments(corpus, &ctx, mask.as_ref(), rng);
        let tables = CountTables::rebuild(corpus, &state, &config);
        Ok(Sampler {
            corpus,
            hypers: config.initial_hypers(),
            config,
            mask,
            state,
            tables,
            rng: rng.clone(),
            ctx,
            weights: Vec::new(),
        })
    }

    /// Rebuild a sampler around an existing assignment state (checkpoint
    /// restore or tests); tables are reconstructed from the state.
    #[allow(clippy::too_many_arguments)]
    pub fn from_state(
        corpus: &'c Corpus,
        vocab_real: usize,
        config: ModelConfig,
        state: AssignmentState,
        hypers: Hyperparams,
        rng: ChaCha8Rng,
    ) -> Result<Sampler<'c>> {
        config.validate()?;
        if state.frame_of.len() != corpus.len() {
            return Err(Error::Config(format!(
                "state covers {} tuples, corpus has {}",
                state.frame_of.len(),
                corpus.len()
            )));
        }
        let ctx = ModelCtx::from_config(&config, vocab_real);
        let mask = match &config.mask {
            Some(m) => Some(apply_label_mask(m, corpus, config.frames)?),
            None => None,
        };
        let tables = CountTables::rebuild(corpus, &state, &config);
        Ok(Sampler {
            corpus,
            hypers,
            config,
            mask,
            state,
            tables,
            rng,
            ctx,
            weights: Vec::new(),
        })
    }

    pub fn word_dim(&self) -> usize {
        self.ctx.word_dim
    }

    /// One full sequential sweep; returns the change count and the running
    /// pseudolikelihood of the pass.
    pub fn gibbs_pass(&mut self) -> Result<SweepStats> {
        let hypers = self.hypers;
        let Sampler {
            corpus,
            config,
            mask,
            state,
            tables,
            rng,
            ctx,
            weights,
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
        sweep_shard(
            corpus,
            ctx,
            &hypers,
            mask.as_ref(),
            &mut shard,
            &mut tables.shared,
            rng,
            weights,
        )
    }

    /// Normalized frame conditional for tuple `i` under exclusive counts.
    /// The tuple's contribution is removed, the conditional computed, and the
    /// tables restored.
    pub fn frame_conditional(&mut self, i: usize) -> Result<Vec<f64>> {
        let t = self.corpus.tuples[i];
        let d = t.doc as usize;
        let f = self.state.frame_of[i] as usize;
        let classes = if self.ctx.variant == ModelVariant::DocTupleClass {
            self.state.class_of[i]
        } else {
            [NO_CLASS; 3]
        };
        let frames = self.config.frames;
        let hypers = self.hypers;
        let (allowed, allowed_count) = match &self.mask {
            Some(m) => (Some(m.allowed[d].clone()), m.allowed_count[d]),
            None => (None, 0),
        };
        let doc_row = &mut self.tables.docs.doc_frame[d * frames..(d + 1) * frames];
        let doc_total = &mut self.tables.docs.doc_total[d];
        apply_frame_side(
            &self.ctx,
            &t,
            f,
            &classes,
            doc_row,
            doc_total,
            &mut self.tables.shared,
            -1,
        );
        let total = frame_weights(
            &self.ctx,
            &hypers,
            &t,
            &classes,
            doc_row,
            *doc_total,
            allowed.as_deref(),
            allowed_count,
            &self.tables.shared,
            &mut self.weights,
        );
        apply_frame_side(
            &self.ctx,
            &t,
            f,
            &classes,
            doc_row,
            doc_total,
            &mut self.tables.shared,
            1,
        );
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::Numeric(format!(
                "frame conditional for tuple {i} has weight total {total}"
            )));
        }
        Ok(self.weights.iter().map(|&w| w / total).collect())
    }

    /// Normalized class conditional for tuple `i` at position `a` (model 2),
    /// under exclusive counts; tables are restored afterwards.
    pub fn class_conditional(&mut self, i: usize, a: ArgPosition) -> Result<Vec<f64>> {
        if self.ctx.variant != ModelVariant::DocTupleClass {
            return Err(Error::Config(
                "class conditionals exist only for model 2".into(),
            ));
        }
        let ai = a.index();
        let c = self.state.class_of[i][ai];
        if c == NO_CLASS {
            return Err(Error::Config(format!(
                "tuple {i} has no modeled word at position {}",
                a.label()
            )));
        }
        let t = self.corpus.tuples[i];
        let f = self.state.frame_of[i] as usize;
        let w = t.word_at(a);
        let hypers = self.hypers;
        apply_class_side(&mut self.tables.shared, f, ai, c as usize, w, -1);
        let total = class_weights(
            &self.ctx,
            &hypers,
            f,
            ai,
            w,
            &self.tables.shared,
            &mut self.weights,
        );
        apply_class_side(&mut self.tables.shared, f, ai, c as usize, w, 1);
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::Numeric(format!(
                "class conditional for tuple {i} has weight total {total}"
            )));
        }
        Ok(self.weights.iter().map(|&w| w / total).collect())
    }

    /// Conjugate posterior-mean point estimates from the current tables.
    pub fn point_estimates(&self) -> PointEstimates {
        point_estimates(
            &self.tables,
            &self.ctx,
            &self.hypers,
            self.mask.as_ref(),
            self.corpus.doc_count(),
        )
    }

    /// Reference reconstruction of the tables from the current state.
    pub fn rebuild_tables(&self) -> CountTables {
        CountTables::rebuild(self.corpus, &self.state, &self.config)
    }
}

/// Posterior-mean estimates from count tables. Rows over masked-out frames
/// are zero; under the Skip policy the NONE word id carries no mass.
pub(crate) fn point_estimates(
    tables: &CountTables,
    ctx: &ModelCtx,
    h: &Hyperparams,
    mask: Option<&DocMask>,
    docs: usize,
) -> PointEstimates {
    let frames = ctx.frames;
    let mut theta = Vec::with_capacity(docs);
    for d in 0..docs {
        let row = tables.docs.row(d);
        let mut out = vec![0.0; frames];
        match mask {
            Some(m) => {
                let denom = tables.docs.doc_total[d] as f64 + m.doc_alpha_total(d, h.alpha);
                for f in 0..frames {
                    if m.allowed[d][f] {
                        out[f] = (row[f] as f64 + h.alpha) / denom;
                    }
                }
            }
            None => {
                let denom = tables.docs.doc_total[d] as f64 + h.alpha * frames as f64;
                for f in 0..frames {
                    out[f] = (row[f] as f64 + h.alpha) / denom;
                }
            }
        }
        theta.push(out);
    }

    // The id space always includes both sentinels; under Skip the NONE id is
    // outside the support and gets zero mass.
    let id_space = match ctx.policy {
        NonePolicy::Placeholder => ctx.word_dim,
        NonePolicy::Skip => ctx.word_dim + 1,
    };
    let beta0 = h.beta * ctx.word_dim as f64;
    let word_row = |counts_for: &dyn Fn(WordId) -> u32, total: u32| -> Vec<f64> {
        let denom = total as f64 + beta0;
        (0..id_space)
            .map(|wid| {
                let w = WordId(wid as u32);
                if ctx.policy == NonePolicy::Skip && w.is_none() {
                    0.0
                } else {
                    (counts_for(w) as f64 + h.beta) / denom
                }
            })
            .collect()
    };

    let kind = match ctx.variant {
        ModelVariant::Independent | ModelVariant::DocTuple => {
            let mut phi = Vec::with_capacity(frames * 3);
            for f in 0..frames {
                for a in 0..3 {
                    phi.push(word_row(
                        &|w| tables.shared.word_fa(w, f, a),
                        tables.shared.fa_total(f, a),
                    ));
                }
            }
            EstimateKind::FrameArg { phi }
        }
        ModelVariant::DocTupleClass => {
            let classes = ctx.classes;
            let mut phi = Vec::with_capacity(classes);
            for c in 0..classes {
                phi.push(word_row(
                    &|w| tables.shared.class_word(c, w),
                    tables.shared.class_total(c),
                ));
            }
            let mut linker = Vec::with_capacity(frames * 3);
            for f in 0..frames {
                for a in 0..3 {
                    let gamma0 = h.gamma[a] * classes as f64;
                    let denom = tables.shared.fa_total(f, a) as f64 + gamma0;
                    linker.push(
                        (0..classes)
                            .map(|c| (tables.shared.link(f, a, c) as f64 + h.gamma[a]) / denom)
                            .collect(),
                    );
                }
            }
            EstimateKind::Classes { phi, linker }
        }
    };
    PointEstimates { theta, kind }
}
