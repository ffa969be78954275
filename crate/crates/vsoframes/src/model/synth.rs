//! Forward simulation of the generative stories, for recovery tests and the
//! simulate command.
//!
//! Tuple shape (full VSO vs. VS- vs. V-O) is drawn from a configurable
//! missingness split, defaulting to the 19/43/38 proportions observed in
//! parsed news text. Conditional on the shape, present slots are drawn
//! exactly as the model states; under the Placeholder policy absent slots
//! become NONE tokens, under Skip they stay unmodeled.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::corpus::{encode_corpus, ArgPosition, Corpus, RawDoc, RawTriple, Vocabulary};
use crate::error::{Error, Result};

use super::{AssignmentState, ModelConfig, ModelVariant, NonePolicy, NO_CLASS};

/// Planted (well-separated) parameters: each frame's verb/subject/object slot
/// (or each class, for model 2) owns a disjoint block of words, uniform
/// within the block.
#[derive(Clone, Copy, Debug)]
pub struct PlantedSpec {
    pub words_per_slot: usize,
}

#[derive(Clone, Debug)]
pub struct SynthOptions {
    pub docs: usize,
    pub tuples_per_doc: usize,
    /// Probabilities of (VSO, VS-, V-O) tuple shapes; must sum to one.
    pub missingness: [f64; 3],
    /// Planted block structure; `None` samples word distributions from the
    /// model's own Dirichlet priors.
    pub planted: Option<PlantedSpec>,
    /// Real vocabulary size used when sampling distributions from priors.
    pub vocab_words: usize,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            docs: 10,
            tuples_per_doc: 20,
            missingness: [0.19, 0.43, 0.38],
            planted: None,
            vocab_words: 50,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub corpus: Corpus,
    pub vocab: Vocabulary,
    /// Ground-truth latent assignments for every generated tuple.
    pub state: AssignmentState,
    /// Ground-truth per-document frame distributions.
    pub theta: Vec<Vec<f64>>,
    /// Planted wordsets (name, words), restricted to words that actually
    /// occur in the generated corpus. Empty when sampling from priors.
    pub lexicon: Vec<(String, Vec<String>)>,
}

struct WordDist {
    words: Vec<String>,
    probs: Vec<f64>,
}

impl WordDist {
    fn draw(&self, rng: &mut ChaCha8Rng) -> &str {
        let mut u = rng.random::<f64>();
        for (w, &p) in self.words.iter().zip(&self.probs) {
            if u < p {
                return w;
            }
            u -= p;
        }
        self.words.last().expect("empty word distribution")
    }
}

fn dirichlet(rng: &mut ChaCha8Rng, per_component: f64, dim: usize) -> Vec<f64> {
    if dim == 1 {
        return vec![1.0];
    }
    let gamma = Gamma::new(per_component, 1.0).expect("positive Dirichlet parameter");
    let mut draws: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total <= 0.0 {
        // Extremely sparse draw rounded to zero; fall back to a one-hot.
        let hot = rng.random_range(0..dim);
        draws.iter_mut().for_each(|x| *x = 0.0);
        draws[hot] = 1.0;
        return draws;
    }
    draws.iter_mut().for_each(|x| *x /= total);
    draws
}

fn shared_vocab(n: usize) -> Vec<String> {
    (0..n).map(|k| format!("w{k:04}")).collect()
}

fn block_vocab(prefix: &str, id: usize, n: usize) -> Vec<String> {
    (0..n).map(|k| format!("{prefix}{id}w{k:02}")).collect()
}

fn sampled_dist(rng: &mut ChaCha8Rng, words: &[String], beta: f64) -> WordDist {
    WordDist {
        words: words.to_vec(),
        probs: dirichlet(rng, beta, words.len()),
    }
}

fn uniform_dist(words: Vec<String>) -> WordDist {
    let p = 1.0 / words.len() as f64;
    let probs = vec![p; words.len()];
    WordDist { words, probs }
}

fn draw_index(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let mut u = rng.random::<f64>();
    for (k, &p) in probs.iter().enumerate() {
        if u < p {
            return k;
        }
        u -= p;
    }
    probs.len() - 1
}

/// Generate a corpus by exact forward simulation of the configured model,
/// returning the true latent state and parameters for recovery tests.
pub fn generate_synthetic(config: &ModelConfig, opts: &SynthOptions) -> Result<SynthOutput> {
    config.validate()?;
    let msum: f64 = opts.missingness.iter().sum();
    if opts.missingness.iter().any(|&p| p < 0.0) || (msum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "missingness {:?} must be non-negative and sum to 1",
            opts.missingness
        )));
    }
    if config.variant == ModelVariant::DocTupleClass && config.policy() == NonePolicy::Placeholder {
        return Err(Error::Config(
            "synthetic generation for model 2 supports the Skip policy only".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let frames = config.frames;

    // Word distributions per slot: models 0/1 use (frame, position) slots,
    // model 2 uses classes behind a per-(frame, position) linker.
    let mut slot_dists: Vec<WordDist> = Vec::new();
    let mut class_dists: Vec<WordDist> = Vec::new();
    let mut linker: Vec<Vec<f64>> = Vec::new();
    let mut lexicon: Vec<(String, Vec<String>)> = Vec::new();

    match config.variant {
        ModelVariant::Independent | ModelVariant::DocTuple => match opts.planted {
            Some(spec) => {
                for f in 0..frames {
                    for a in ArgPosition::ALL {
                        let prefix = match a {
                            ArgPosition::Verb => "v",
                            ArgPosition::Subject => "s",
                            ArgPosition::Object => "o",
                        };
                        let words = block_vocab(prefix, f, spec.words_per_slot);
                        lexicon.push((format!("frame{f}_{}", a.label()), words.clone()));
                        slot_dists.push(uniform_dist(words));
                    }
                }
            }
            None => {
                let words = shared_vocab(opts.vocab_words);
                for _ in 0..frames * 3 {
                    slot_dists.push(sampled_dist(&mut rng, &words, config.beta));
                }
            }
        },
        ModelVariant::DocTupleClass => {
            let classes = config.classes;
            match opts.planted {
                Some(spec) => {
                    for c in 0..classes {
                        let words = block_vocab("c", c, spec.words_per_slot);
                        lexicon.push((format!("class{c}"), words.clone()));
                        class_dists.push(uniform_dist(words));
                    }
                    // Each (frame, position) links to a single designated class.
                    for f in 0..frames {
                        for a in 0..3 {
                            let mut row = vec![0.0; classes];
                            row[(f * 3 + a) % classes] = 1.0;
                            linker.push(row);
                        }
                    }
                }
                None => {
                    let words = shared_vocab(opts.vocab_words);
                    for _ in 0..classes {
                        class_dists.push(sampled_dist(&mut rng, &words, config.beta));
                    }
                    for _ in 0..frames {
                        for a in 0..3 {
                            linker.push(dirichlet(&mut rng, config.gamma[a], classes));
                        }
                    }
                }
            }
        }
    }

    let mut docs: Vec<RawDoc> = Vec::with_capacity(opts.docs);
    let mut theta = Vec::with_capacity(opts.docs);
    let mut frame_of = Vec::new();
    let mut class_of = Vec::new();
    let uses_classes = config.uses_classes();

    for d in 0..opts.docs {
        let doc_theta = match config.variant {
            ModelVariant::Independent => vec![1.0 / frames as f64; frames],
            _ => dirichlet(&mut rng, config.alpha, frames),
        };
        let mut triples = Vec::with_capacity(opts.tuples_per_doc);
        for _ in 0..opts.tuples_per_doc {
            let f = draw_index(&doc_theta, &mut rng);
            let shape = draw_index(&opts.missingness, &mut rng);
            let (has_subj, has_obj) = match shape {
                0 => (true, true),
                1 => (true, false),
                _ => (false, true),
            };
            let mut classes = [NO_CLASS; 3];
            let word_for = |a: ArgPosition, classes: &mut [u32; 3], rng: &mut ChaCha8Rng| {
                if uses_classes {
                    let row = &linker[f * 3 + a.index()];
                    let c = draw_index(row, rng);
                    classes[a.index()] = c as u32;
                    class_dists[c].draw(rng).to_string()
                } else {
                    slot_dists[f * 3 + a.index()].draw(rng).to_string()
                }
            };
            let verb = word_for(ArgPosition::Verb, &mut classes, &mut rng);
            let subj = has_subj.then(|| word_for(ArgPosition::Subject, &mut classes, &mut rng));
            let obj = has_obj.then(|| word_for(ArgPosition::Object, &mut classes, &mut rng));
            frame_of.push(f as u32);
            if uses_classes {
                class_of.push(classes);
            }
            triples.push(RawTriple { verb, subj, obj });
        }
        docs.push(RawDoc {
            name: format!("synth{d:04}"),
            triples,
        });
        theta.push(doc_theta);
    }

    // Keep the whole generated vocabulary (no cutoff effects in synthesis).
    let vocab = Vocabulary::from_raw_docs(&docs, usize::MAX);
    let corpus = encode_corpus(&docs, &vocab);

    let lexicon = lexicon
        .into_iter()
        .map(|(name, words)| {
            let present: Vec<String> = words.into_iter().filter(|w| vocab.contains(w)).collect();
            (name, present)
        })
        .filter(|(_, words)| !words.is_empty())
        .collect();

    Ok(SynthOutput {
        corpus,
        vocab,
        state: AssignmentState { frame_of, class_of },
        theta,
        lexicon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_tuples_per_doc_gives_empty_corpus() {
        let cfg = ModelConfig::new(ModelVariant::DocTuple, 3);
        let opts = SynthOptions {
            docs: 4,
            tuples_per_doc: 0,
            ..Default::default()
        };
        let out = generate_synthetic(&cfg, &opts).unwrap();
        assert_eq!(out.corpus.doc_count(), 4);
        assert!(out.corpus.is_empty());
    }

    #[test]
    fn frame_frequencies_match_theta_within_binomial_bounds() {
        let cfg = ModelConfig::new(ModelVariant::DocTuple, 4);
        let opts = SynthOptions {
            docs: 1,
            tuples_per_doc: 100_000,
            seed: 17,
            ..Default::default()
        };
        let out = generate_synthetic(&cfg, &opts).unwrap();
        let n = out.corpus.len() as f64;
        let mut freq = [0usize; 4];
        for &f in &out.state.frame_of {
            freq[f as usize] += 1;
        }
        for (f, &count) in freq.iter().enumerate() {
            let p = out.theta[0][f];
            let se = (p * (1.0 - p) / n).sqrt();
            let observed = count as f64 / n;
            assert!(
                (observed - p).abs() <= 3.0 * se + 1e-12,
                "frame {f}: observed {observed}, theta {p}, se {se}"
            );
        }
    }

    #[test]
    fn default_missingness_matches_configured_split() {
        let cfg = ModelConfig::new(ModelVariant::DocTuple, 3);
        let opts = SynthOptions {
            docs: 20,
            tuples_per_doc: 2_000,
            seed: 5,
            ..Default::default()
        };
        let out = generate_synthetic(&cfg, &opts).unwrap();
        let (vso, vs, vo) = out.corpus.shape_counts();
        let n = out.corpus.len() as f64;
        for (observed, expected) in [
            (vso as f64 / n, 0.19),
            (vs as f64 / n, 0.43),
            (vo as f64 / n, 0.38),
        ] {
            let se = (expected * (1.0 - expected) / n).sqrt();
            assert!(
                (observed - expected).abs() <= 4.0 * se,
                "shape share {observed} vs {expected}"
            );
        }
    }

    #[test]
    fn planted_lexicon_words_exist_in_corpus() {
        let mut cfg = ModelConfig::new(ModelVariant::DocTuple, 3);
        cfg.alpha = 0.3;
        let opts = SynthOptions {
            docs: 50,
            tuples_per_doc: 40,
            planted: Some(PlantedSpec { words_per_slot: 8 }),
            seed: 2,
            ..Default::default()
        };
        let out = generate_synthetic(&cfg, &opts).unwrap();
        assert_eq!(out.lexicon.len(), 9);
        for (_, words) in &out.lexicon {
            for w in words {
                assert!(out.vocab.contains(w));
            }
        }
    }

    #[test]
    fn model2_state_has_classes_exactly_at_present_slots() {
        let mut cfg = ModelConfig::new(ModelVariant::DocTupleClass, 2);
        cfg.classes = 6;
        let opts = SynthOptions {
            docs: 5,
            tuples_per_doc: 30,
            seed: 9,
            ..Default::default()
        };
        let out = generate_synthetic(&cfg, &opts).unwrap();
        for (i, t) in out.corpus.tuples.iter().enumerate() {
            for a in ArgPosition::ALL {
                let has_class = out.state.class_of[i][a.index()] != NO_CLASS;
                assert_eq!(has_class, t.present(a));
            }
        }
    }

    #[test]
    fn bad_missingness_is_rejected() {
        let cfg = ModelConfig::new(ModelVariant::DocTuple, 2);
        let opts = SynthOptions {
            missingness: [0.5, 0.2, 0.2],
            ..Default::default()
        };
        assert!(generate_synthetic(&cfg, &opts).is_err());
    }
}
