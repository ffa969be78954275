//! Per-iteration convergence telemetry: the exact collapsed log joint,
//! change counts, running pseudolikelihood and their correlations, plus the
//! append-only trace CSV.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use statrs::function::gamma::ln_gamma;

use crate::corpus::{Corpus, WordId};
use crate::error::{Error, Result};
use crate::model::{CountTables, DocMask, Hyperparams, ModelConfig, ModelVariant, SharedCounts};

fn dm1_symmetric<I: IntoIterator<Item = u32>>(counts: I, dim: usize, per: f64) -> f64 {
    let a0 = per * dim as f64;
    let base = ln_gamma(per);
    let mut total = 0u64;
    let mut acc = 0.0;
    for c in counts {
        if c > 0 {
            acc += ln_gamma(per + c as f64) - base;
            total += c as u64;
        }
    }
    acc + ln_gamma(a0) - ln_gamma(a0 + total as f64)
}

/// The exact log joint of the collapsed state: document-frame, linker and
/// word factors, each a product of single-path DM terms over its groups.
pub fn log_joint(
    corpus: &Corpus,
    tables: &CountTables,
    config: &ModelConfig,
    hypers: &Hyperparams,
    mask: Option<&DocMask>,
    vocab_real: usize,
) -> f64 {
    let frames = config.frames;
    let word_dim = config.word_dim(vocab_real);
    let mut total = 0.0;

    // Document part.
    match config.variant {
        ModelVariant::Independent => {
            for d in 0..corpus.doc_count() {
                let n = tables.docs.doc_total[d] as f64;
                let support = match mask {
                    Some(m) => m.allowed_count[d] as f64,
                    None => frames as f64,
                };
                if n > 0.0 {
                    total -= n * support.ln();
                }
            }
        }
        ModelVariant::DocTuple | ModelVariant::DocTupleClass => {
            for d in 0..corpus.doc_count() {
                let row = tables.docs.row(d);
                match mask {
                    Some(m) => {
                        let dim = m.allowed_count[d] as usize;
                        if dim == 0 {
                            continue;
                        }
                        let allowed = row
                            .iter()
                            .zip(&m.allowed[d])
                            .filter_map(|(&c, &ok)| ok.then_some(c));
                        total += dm1_symmetric(allowed, dim, hypers.alpha);
                    }
                    None => {
                        total += dm1_symmetric(row.iter().copied(), frames, hypers.alpha);
                    }
                }
            }
        }
    }

    // Word (and linker) parts.
    match config.variant {
        ModelVariant::Independent | ModelVariant::DocTuple => {
            let beta0 = hypers.beta * word_dim as f64;
            let base = ln_gamma(hypers.beta);
            for fa in 0..frames * 3 {
                let n = tables.shared.fa_total[fa] as f64;
                total += ln_gamma(beta0) - ln_gamma(beta0 + n);
            }
            for w in tables.shared.word_fa.sorted_words() {
                let block = tables.shared.word_fa.block(WordId(w)).unwrap();
                for &c in block {
                    if c > 0 {
                        total += ln_gamma(hypers.beta + c as f64) - base;
                    }
                }
            }
        }
        ModelVariant::DocTupleClass => {
            let classes = config.classes;
            for f in 0..frames {
                for a in 0..3 {
                    let row = (0..classes).map(|c| tables.shared.link(f, a, c));
                    total += dm1_symmetric(row, classes, hypers.gamma[a]);
                }
            }
            let beta0 = hypers.beta * word_dim as f64;
            let base = ln_gamma(hypers.beta);
            for c in 0..classes {
                let n = tables.shared.class_total[c] as f64;
                total += ln_gamma(beta0) - ln_gamma(beta0 + n);
            }
            for w in tables.shared.class_word.sorted_words() {
                let block = tables.shared.class_word.block(WordId(w)).unwrap();
                for &c in block {
                    if c > 0 {
                        total += ln_gamma(hypers.beta + c as f64) - base;
                    }
                }
            }
        }
    }
    total
}

/// One trace row. `log_joint` is present exactly on the iterations it was
/// scheduled; `barrier_ms` only when running multi-worker.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iteration: u64,
    pub changes: u64,
    pub log_joint: Option<f64>,
    pub pseudo_ll: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: [f64; 3],
    pub wall_ms: u64,
    pub barrier_ms: Option<u64>,
}

const TRACE_HEADER: &str =
    "iter,changes,log_joint,pseudo_ll,alpha,beta,gamma1,gamma2,gamma3,wall_ms";

/// Append-only trace sink, flushed per record so crashed runs keep telemetry.
pub struct TraceWriter {
    out: BufWriter<File>,
    path: std::path::PathBuf,
    with_barrier: bool,
}

impl TraceWriter {
    pub fn create(path: &Path, with_barrier: bool) -> Result<TraceWriter> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = TraceWriter {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
            with_barrier,
        };
        let header = if with_barrier {
            format!("{TRACE_HEADER},barrier_ms")
        } else {
            TRACE_HEADER.to_string()
        };
        writeln!(writer.out, "{header}").map_err(|e| Error::io(path, e))?;
        writer.out.flush().map_err(|e| Error::io(path, e))?;
        Ok(writer)
    }

    pub fn write(&mut self, rec: &TraceRecord) -> Result<()> {
        let lj = rec.log_joint.map_or(String::new(), |v| format!("{v}"));
        let mut line = format!(
            "{},{},{},{},{},{},{},{},{},{}",
            rec.iteration,
            rec.changes,
            lj,
            rec.pseudo_ll,
            rec.alpha,
            rec.beta,
            rec.gamma[0],
            rec.gamma[1],
            rec.gamma[2],
            rec.wall_ms
        );
        if self.with_barrier {
            let bm = rec.barrier_ms.map_or(String::new(), |v| format!("{v}"));
            line.push(',');
            line.push_str(&bm);
        }
        writeln!(self.out, "{line}").map_err(|e| Error::io(&self.path, e))?;
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Read a trace CSV back; tolerates both the sequential and the
/// barrier-column headers.
pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        if lineno == 1 {
            if !line.starts_with("iter,") {
                return Err(Error::parse(path, 1, "missing trace header"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 10 && cols.len() != 11 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 10 or 11 columns, found {}", cols.len()),
            ));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad {what} value {s:?}")))
        };
        let parse_u = |s: &str, what: &str| -> Result<u64> {
            s.parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad {what} value {s:?}")))
        };
        records.push(TraceRecord {
            iteration: parse_u(cols[0], "iter")?,
            changes: parse_u(cols[1], "changes")?,
            log_joint: if cols[2].is_empty() {
                None
            } else {
                Some(parse_f(cols[2], "log_joint")?)
            },
            pseudo_ll: parse_f(cols[3], "pseudo_ll")?,
            alpha: parse_f(cols[4], "alpha")?,
            beta: parse_f(cols[5], "beta")?,
            gamma: [
                parse_f(cols[6], "gamma1")?,
                parse_f(cols[7], "gamma2")?,
                parse_f(cols[8], "gamma3")?,
            ],
            wall_ms: parse_u(cols[9], "wall_ms")?,
            barrier_ms: match cols.get(10) {
                Some(&"") | None => None,
                Some(s) => Some(parse_u(s, "barrier_ms")?),
            },
        });
    }
    Ok(records)
}

/// Trace fields usable in correlations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceField {
    Changes,
    LogJoint,
    PseudoLl,
    Alpha,
    Beta,
    Gamma1,
    Gamma2,
    Gamma3,
}

impl TraceField {
    pub fn of(self, rec: &TraceRecord) -> Option<f64> {
        match self {
            TraceField::Changes => Some(rec.changes as f64),
            TraceField::LogJoint => rec.log_joint,
            TraceField::PseudoLl => Some(rec.pseudo_ll),
            TraceField::Alpha => Some(rec.alpha),
            TraceField::Beta => Some(rec.beta),
            TraceField::Gamma1 => Some(rec.gamma[0]),
            TraceField::Gamma2 => Some(rec.gamma[1]),
            TraceField::Gamma3 => Some(rec.gamma[2]),
        }
    }
}

/// Pearson correlation over paired observations; `None` when fewer than
/// three pairs exist or either side has zero variance.
pub fn correlate(pairs: impl IntoIterator<Item = (f64, f64)>) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = pairs.into_iter().collect();
    if pairs.len() < 3 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in &pairs {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Correlate two trace fields over the iterations where both are present.
pub fn correlate_trace(trace: &[TraceRecord], x: TraceField, y: TraceField) -> Option<f64> {
    correlate(
        trace
            .iter()
            .filter_map(|rec| Some((x.of(rec)?, y.of(rec)?))),
    )
}
