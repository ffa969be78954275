use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::vocab::NONE_TOKEN;
use super::{encode_corpus, Corpus, RawDoc, RawTriple, Vocabulary};
use crate::error::{Error, Result};

/// Read the canonical tuple TSV ("doc_id<TAB>verb<TAB>subj<TAB>obj", "-" for
/// an absent slot) into raw documents. Document ids map to dense indices in
/// first-appearance order; interleaved blocks of one document are merged.
pub fn read_tuple_tsv_raw(path: &Path) -> Result<Vec<RawDoc>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut order: Vec<String> = Vec::new();
    let mut by_doc: HashMap<String, Vec<RawTriple>> = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 4 tab-separated columns, found {}", cols.len()),
            ));
        }
        let (doc, verb, subj, obj) = (cols[0], cols[1], cols[2], cols[3]);
        if verb == NONE_TOKEN {
            return Err(Error::parse(path, lineno, "verb slot may not be \"-\""));
        }
        if subj == NONE_TOKEN && obj == NONE_TOKEN {
            return Err(Error::parse(
                path,
                lineno,
                "subject and object may not both be \"-\"",
            ));
        }
        if !by_doc.contains_key(doc) {
            order.push(doc.to_string());
        }
        by_doc.entry(doc.to_string()).or_default().push(RawTriple {
            verb: verb.to_string(),
            subj: (subj != NONE_TOKEN).then(|| subj.to_string()),
            obj: (obj != NONE_TOKEN).then(|| obj.to_string()),
        });
    }
    Ok(order
        .into_iter()
        .map(|name| {
            let triples = by_doc.remove(&name).unwrap();
            RawDoc { name, triples }
        })
        .collect())
}

/// Read a tuple TSV and encode it against a vocabulary.
pub fn read_tuple_tsv(path: &Path, vocab: &Vocabulary) -> Result<Corpus> {
    Ok(encode_corpus(&read_tuple_tsv_raw(path)?, vocab))
}

/// Write a corpus as the canonical tuple TSV. Reading the file back with the
/// same vocabulary reproduces the corpus content exactly.
pub fn write_tuple_tsv(corpus: &Corpus, vocab: &Vocabulary, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for d in 0..corpus.doc_count() {
        for t in corpus.doc_tuples(d) {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                corpus.doc_names[d],
                vocab.token(t.verb),
                vocab.token(t.subj),
                vocab.token(t.obj),
            )
            .map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read per-document label vectors: "doc_id<TAB>0,1,1" with one 0/1 digit per
/// label. Returns rows aligned with `doc_names`; every document must appear.
pub fn read_labels(path: &Path, doc_names: &[String]) -> Result<Vec<Vec<bool>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows: HashMap<String, Vec<bool>> = HashMap::new();
    let mut width: Option<usize> = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let (doc, bits) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, lineno, "expected doc_id<TAB>bits"))?;
        let row: Vec<bool> = bits
            .split(',')
            .map(|b| match b.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::parse(
                    path,
                    lineno,
                    format!("bad label bit {other:?}"),
                )),
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("label vector length {} differs from {}", row.len(), w),
                ))
            }
            _ => {}
        }
        rows.insert(doc.to_string(), row);
    }
    doc_names
        .iter()
        .map(|name| {
            rows.get(name)
                .cloned()
                .ok_or_else(|| Error::Config(format!("document {name:?} has no label vector")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::WordId;

    fn write_tmp(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tuples.tsv");
        let mut f = File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        (dir, path)
    }

    #[test]
    fn none_slot_parses() {
        let (_dir, path) = write_tmp("d1\tarrest\tpolice\t-\n");
        let docs = read_tuple_tsv_raw(&path).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].triples[0].obj, None);
        let vocab = Vocabulary::from_raw_docs(&docs, 100);
        let corpus = encode_corpus(&docs, &vocab);
        assert_eq!(corpus.tuples[0].obj, WordId::NONE);
    }

    #[test]
    fn three_column_line_errors_with_line_number() {
        let (_dir, path) = write_tmp("d1\tarrest\tpolice\t-\nd1\tsee\tjury\n");
        let err = read_tuple_tsv_raw(&path).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn both_slots_missing_is_rejected() {
        let (_dir, path) = write_tmp("d1\train\t-\t-\n");
        assert!(read_tuple_tsv_raw(&path).is_err());
    }

    #[test]
    fn write_then_read_is_identity() {
        let mut lines = String::new();
        for d in 0..10 {
            for t in 0..10 {
                let subj = if t % 3 == 0 { "-" } else { "police" };
                let obj = if t % 3 == 1 { "-" } else { "suspect" };
                lines.push_str(&format!("doc{d}\tverb{t}\t{subj}\t{obj}\n"));
            }
        }
        let (dir, path) = write_tmp(&lines);
        let docs = read_tuple_tsv_raw(&path).unwrap();
        let vocab = Vocabulary::from_raw_docs(&docs, 10_000);
        let corpus = encode_corpus(&docs, &vocab);
        assert_eq!(corpus.len(), 100);

        let out = dir.path().join("rewritten.tsv");
        write_tuple_tsv(&corpus, &vocab, &out).unwrap();
        let back = read_tuple_tsv(&out, &vocab).unwrap();
        assert_eq!(back, corpus);
    }

    #[test]
    fn doc_order_is_first_appearance() {
        let (_dir, path) = write_tmp("z\tsee\tjury\t-\na\tsee\tjury\t-\nz\thear\tjury\t-\n");
        let docs = read_tuple_tsv_raw(&path).unwrap();
        assert_eq!(docs[0].name, "z");
        assert_eq!(docs[1].name, "a");
        assert_eq!(docs[0].triples.len(), 2);
    }

    #[test]
    fn labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.tsv");
        std::fs::write(&path, "d1\t1,0,1\nd2\t0,1,0\n").unwrap();
        let labels = read_labels(&path, &["d1".into(), "d2".into()]).unwrap();
        assert_eq!(labels[0], vec![true, false, true]);
        assert_eq!(labels[1], vec![false, true, false]);

        let missing = read_labels(&path, &["d1".into(), "d3".into()]);
        assert!(missing.is_err());
    }
}
