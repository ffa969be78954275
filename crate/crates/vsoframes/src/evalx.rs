//! Lexicon evaluation: discretize a fitted model into wordsets and align
//! them against a reference lexicon with best-match Dice scores and a Venn
//! breakdown per reference set.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::{ArgPosition, Corpus, Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::model::{AssignmentState, NO_CLASS};

/// A named set of lemmas: the discretized unit of lexicon comparison.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Wordset {
    pub name: String,
    pub words: BTreeSet<String>,
}

impl Wordset {
    pub fn new(name: impl Into<String>, words: impl IntoIterator<Item = String>) -> Wordset {
        Wordset {
            name: name.into(),
            words: words.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

fn intersection_size(a: &BTreeSet<String>, b: &BTreeSet<String>) -> usize {
    if a.len() <= b.len() {
        a.iter().filter(|w| b.contains(*w)).count()
    } else {
        b.iter().filter(|w| a.contains(*w)).count()
    }
}

/// Dice coefficient 2|AB| / (|A| + |B|); zero when both sets are empty.
pub fn dice(a: &Wordset, b: &Wordset) -> f64 {
    let denom = a.len() + b.len();
    if denom == 0 {
        return 0.0;
    }
    2.0 * intersection_size(&a.words, &b.words) as f64 / denom as f64
}

/// Jaccard similarity |AB| / |A u B|; zero when both sets are empty.
pub fn jaccard(a: &Wordset, b: &Wordset) -> f64 {
    let both = intersection_size(&a.words, &b.words);
    let union = a.len() + b.len() - both;
    if union == 0 {
        return 0.0;
    }
    both as f64 / union as f64
}

/// Tversky index |AB| / (|AB| + wa|A\B| + wb|B\A|). (1, 1) recovers Jaccard
/// and (1/2, 1/2) recovers Dice. The penalty terms are summed smaller-first
/// so that tversky(a, b, wa, wb) == tversky(b, a, wb, wa) bit-exactly.
pub fn tversky(a: &Wordset, b: &Wordset, wa: f64, wb: f64) -> f64 {
    let both = intersection_size(&a.words, &b.words) as f64;
    let pa = wa * ((a.len() as f64) - both);
    let pb = wb * ((b.len() as f64) - both);
    let (lo, hi) = if pa <= pb { (pa, pb) } else { (pb, pa) };
    let denom = both + lo + hi;
    if denom == 0.0 {
        return 0.0;
    }
    both / denom
}

/// A reference frame lexicon: wordsets, optionally with per-word annotation
/// frequencies (needed to separate "new" from "assigned elsewhere" among
/// model-only words).
#[derive(Clone, Debug)]
pub struct ReferenceLexicon {
    pub sets: Vec<Wordset>,
    pub word_freq: Option<HashMap<String, u64>>,
    pub min_words: usize,
    pub freq_floor: u64,
}

impl ReferenceLexicon {
    /// Load "frame_name<TAB>word[:count](,word[:count])*" records. Multiword
    /// lexemes are dropped; sets smaller than `min_words` after filtering are
    /// removed.
    pub fn load(path: &Path, min_words: usize) -> Result<ReferenceLexicon> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut sets = Vec::new();
        let mut freqs: HashMap<String, u64> = HashMap::new();
        let mut any_freq = false;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::parse(path, lineno, e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let (name, items) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, lineno, "expected frame_name<TAB>words"))?;
            let mut words = BTreeSet::new();
            for item in items.split(',') {
                let item = item.trim();
                if item.is_empty() {
                    continue;
                }
                let (word, count) = match item.rsplit_once(':') {
                    Some((w, c)) => {
                        let count: u64 = c.parse().map_err(|_| {
                            Error::parse(path, lineno, format!("bad count in {item:?}"))
                        })?;
                        (w, Some(count))
                    }
                    None => (item, None),
                };
                if word.contains(char::is_whitespace) || word.contains('_') {
                    continue; // multiword lexeme
                }
                if let Some(c) = count {
                    any_freq = true;
                    let slot = freqs.entry(word.to_string()).or_insert(0);
                    *slot = (*slot).max(c);
                }
                words.insert(word.to_string());
            }
            sets.push(Wordset {
                name: name.to_string(),
                words,
            });
        }
        sets.retain(|s| s.len() >= min_words);
        Ok(ReferenceLexicon {
            sets,
            word_freq: any_freq.then_some(freqs),
            min_words,
            freq_floor: 5,
        })
    }

    pub fn from_sets(sets: Vec<Wordset>, min_words: usize) -> ReferenceLexicon {
        let mut sets = sets;
        sets.retain(|s| s.len() >= min_words);
        ReferenceLexicon {
            sets,
            word_freq: None,
            min_words,
            freq_floor: 5,
        }
    }

    fn union(&self) -> BTreeSet<&str> {
        self.sets
            .iter()
            .flat_map(|s| s.words.iter().map(String::as_str))
            .collect()
    }
}

/// Write wordsets in the lexicon file format (no counts).
pub fn write_lexicon(sets: &[(String, Vec<String>)], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (name, words) in sets {
        writeln!(out, "{name}\t{}", words.join(",")).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Where model wordsets come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiscretizeSource {
    /// Models 0/1: one wordset per (frame, position).
    FrameArg,
    /// Model 2: one wordset per class.
    Classes,
}

/// Discretize a Gibbs sample into wordsets: the words assigned to a unit at
/// least `threshold` times. Empty sets are dropped; the NONE placeholder is
/// never included.
pub fn discretize_model(
    corpus: &Corpus,
    state: &AssignmentState,
    vocab: &Vocabulary,
    source: DiscretizeSource,
    position: Option<ArgPosition>,
    threshold: u32,
) -> Vec<Wordset> {
    let mut counts: HashMap<(usize, u32), u32> = HashMap::new();
    for (i, t) in corpus.tuples.iter().enumerate() {
        for a in ArgPosition::ALL {
            if position.is_some_and(|p| p != a) {
                continue;
            }
            let w = t.word_at(a);
            if w.is_none() {
                continue;
            }
            let unit = match source {
                DiscretizeSource::FrameArg => state.frame_of[i] as usize * 3 + a.index(),
                DiscretizeSource::Classes => {
                    let c = state.class_of[i][a.index()];
                    if c == NO_CLASS {
                        continue;
                    }
                    c as usize
                }
            };
            *counts.entry((unit, w.0)).or_insert(0) += 1;
        }
    }
    let mut by_unit: HashMap<usize, Vec<String>> = HashMap::new();
    for ((unit, w), c) in counts {
        if c >= threshold {
            by_unit
                .entry(unit)
                .or_default()
                .push(vocab.token(WordId(w)).to_string());
        }
    }
    let mut units: Vec<usize> = by_unit.keys().copied().collect();
    units.sort_unstable();
    units
        .into_iter()
        .map(|unit| {
            let name = match source {
                DiscretizeSource::FrameArg => {
                    format!(
                        "frame{}_{}",
                        unit / 3,
                        ArgPosition::from_index(unit % 3).label()
                    )
                }
                DiscretizeSource::Classes => format!("class{unit}"),
            };
            Wordset::new(name, by_unit.remove(&unit).unwrap())
        })
        .collect()
}

/// Five-way Venn accounting between one reference set and its best model
/// match. The reference side partitions as |ref| = both + missed + oov; the
/// model side as |model| = both + other + new.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VennBreakdown {
    /// In both wordsets.
    pub both: usize,
    /// Reference-only, present in the model vocabulary but assigned elsewhere.
    pub missed: usize,
    /// Reference-only, absent from the model vocabulary.
    pub oov: usize,
    /// Model-only, present in the reference lexicon's other sets.
    pub other: usize,
    /// Model-only, below the reference annotation-frequency floor.
    pub new: usize,
}

#[derive(Clone, Debug, Default)]
pub struct VennSamples {
    pub both: Vec<String>,
    pub missed: Vec<String>,
    pub oov: Vec<String>,
    pub other: Vec<String>,
    pub new: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct MatchRow {
    pub ref_name: String,
    pub model_index: usize,
    pub model_name: String,
    pub dice: f64,
    pub venn: VennBreakdown,
    pub samples: VennSamples,
}

#[derive(Clone, Debug)]
pub struct MatchReport {
    /// One row per reference set, sorted by descending Dice.
    pub rows: Vec<MatchRow>,
    /// Set when the reference lexicon has no frequency data, in which case
    /// the "new" category is merged into "other".
    pub new_merged_into_other: bool,
}

const SAMPLE_WORDS: usize = 6;

fn sample(words: impl IntoIterator<Item = String>) -> Vec<String> {
    words.into_iter().take(SAMPLE_WORDS).collect()
}

/// For each reference wordset, find the arg-max-Dice model wordset (ties
/// break toward the lowest model index) and compute the Venn breakdown.
/// `model_vocab` is the full vocabulary of the fitted model, needed to tell
/// "missed" from out-of-vocabulary reference words.
pub fn best_matches(
    reference: &ReferenceLexicon,
    model_sets: &[Wordset],
    model_vocab: &Vocabulary,
) -> Result<MatchReport> {
    if model_sets.is_empty() {
        return Err(Error::Config("no model wordsets to match against".into()));
    }
    let union = reference.union();
    let mut rows = Vec::with_capacity(reference.sets.len());
    for rset in &reference.sets {
        let mut best = 0usize;
        let mut best_dice = f64::NEG_INFINITY;
        for (j, mset) in model_sets.iter().enumerate() {
            let d = dice(rset, mset);
            if d > best_dice {
                best = j;
                best_dice = d;
            }
        }
        let mset = &model_sets[best];

        let mut venn = VennBreakdown::default();
        let mut samples = VennSamples::default();
        for w in &rset.words {
            if mset.words.contains(w) {
                venn.both += 1;
                samples.both.push(w.clone());
            } else if model_vocab.contains(w) {
                venn.missed += 1;
                samples.missed.push(w.clone());
            } else {
                venn.oov += 1;
                samples.oov.push(w.clone());
            }
        }
        for w in &mset.words {
            if rset.words.contains(w) {
                continue;
            }
            let elsewhere = union.contains(w.as_str());
            let is_new = if elsewhere {
                false
            } else {
                match &reference.word_freq {
                    Some(freqs) => freqs.get(w).copied().unwrap_or(0) < reference.freq_floor,
                    None => false, // merged into "other"
                }
            };
            if is_new {
                venn.new += 1;
                samples.new.push(w.clone());
            } else {
                venn.other += 1;
                samples.other.push(w.clone());
            }
        }
        samples.both = sample(std::mem::take(&mut samples.both));
        samples.missed = sample(std::mem::take(&mut samples.missed));
        samples.oov = sample(std::mem::take(&mut samples.oov));
        samples.other = sample(std::mem::take(&mut samples.other));
        samples.new = sample(std::mem::take(&mut samples.new));

        rows.push(MatchRow {
            ref_name: rset.name.clone(),
            model_index: best,
            model_name: mset.name.clone(),
            dice: best_dice,
            venn,
            samples,
        });
    }
    rows.sort_by(|a, b| b.dice.partial_cmp(&a.dice).unwrap());
    Ok(MatchReport {
        rows,
        new_merged_into_other: reference.word_freq.is_none(),
    })
}

/// Write the machine-readable match table: one row per reference set with
/// the per-category counts and sample words.
pub fn write_match_report(report: &MatchReport, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(
        out,
        "ref_name\tmodel_set\tdice\tB\tM\tX\tO\tN\tin_both\tref_missed\tref_oov\tmodel_other\tmodel_new"
    )
    .map_err(|e| Error::io(path, e))?;
    for row in &report.rows {
        writeln!(
            out,
            "{}\t{}\t{:.4}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            row.ref_name,
            row.model_name,
            row.dice,
            row.venn.both,
            row.venn.missed,
            row.venn.oov,
            row.venn.other,
            row.venn.new,
            row.samples.both.join(","),
            row.samples.missed.join(","),
            row.samples.oov.join(","),
            row.samples.other.join(","),
            row.samples.new.join(","),
        )
        .map_err(|e| Error::io(path, e))?;
    }
    if report.new_merged_into_other {
        writeln!(
            out,
            "# note: reference lexicon has no frequency data; N merged into O"
        )
        .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
