use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{RawDoc, RawTriple};
use crate::error::{Error, Result};

/// One token row of the dependency input: 1-based index, surface form,
/// lemma, POS tag, head index (0 = root) and dependency relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub index: u32,
    pub form: String,
    pub lemma: String,
    pub pos: String,
    pub head: u32,
    pub deprel: String,
}

/// A parsed document: sentences of tokens, keyed by its external id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedDoc {
    pub name: String,
    pub sentences: Vec<Vec<Token>>,
}

impl ParsedDoc {
    pub fn extract(&self) -> RawDoc {
        RawDoc {
            name: self.name.clone(),
            triples: extract_tuples(&self.sentences),
        }
    }
}

/// Extract raw (verb, subject?, object?) lemma triples from parsed sentences.
///
/// A tuple is emitted for every token whose POS tag begins with "VB" and that
/// has at least one `nsubj` or `dobj` dependent. When several subjects (or
/// objects) exist, the leftmost by token index is taken. Verbs with an
/// `nsubjpass` dependent are skipped entirely: only active-voice tuples are
/// kept.
pub fn extract_tuples(sentences: &[Vec<Token>]) -> Vec<RawTriple> {
    let mut triples = Vec::new();
    for sentence in sentences {
        for verb in sentence {
            if !verb.pos.starts_with("VB") {
                continue;
            }
            let mut subj: Option<&Token> = None;
            let mut obj: Option<&Token> = None;
            let mut passive = false;
            for child in sentence {
                if child.head != verb.index {
                    continue;
                }
                match child.deprel.as_str() {
                    "nsubjpass" => passive = true,
                    "nsubj" if subj.is_none_or(|cur| child.index < cur.index) => {
                        subj = Some(child);
                    }
                    "dobj" if obj.is_none_or(|cur| child.index < cur.index) => {
                        obj = Some(child);
                    }
                    _ => {}
                }
            }
            if passive || (subj.is_none() && obj.is_none()) {
                continue;
            }
            triples.push(RawTriple {
                verb: verb.lemma.clone(),
                subj: subj.map(|t| t.lemma.clone()),
                obj: obj.map(|t| t.lemma.clone()),
            });
        }
    }
    triples
}

/// Read a CoNLL-U-style file: one token per line with tab-separated columns
/// (index, form, lemma, POS, head, deprel), blank lines between sentences,
/// and a `# doc_id = X` comment starting each document.
pub fn read_conllu(path: &Path) -> Result<Vec<ParsedDoc>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut docs: Vec<ParsedDoc> = Vec::new();
    let mut sentence: Vec<Token> = Vec::new();
    let mut sentence_start_line = 0usize;

    let flush_sentence =
        |docs: &mut Vec<ParsedDoc>, sentence: &mut Vec<Token>, start_line: usize| -> Result<()> {
            if sentence.is_empty() {
                return Ok(());
            }
            let len = sentence.len() as u32;
            for tok in sentence.iter() {
                if tok.head > len {
                    return Err(Error::parse(
                        path,
                        start_line,
                        format!(
                            "head index {} out of range for {}-token sentence",
                            tok.head, len
                        ),
                    ));
                }
            }
            match docs.last_mut() {
                Some(doc) => doc.sentences.push(std::mem::take(sentence)),
                None => {
                    return Err(Error::parse(
                        path,
                        start_line,
                        "token lines before any \"# doc_id = ...\" header",
                    ))
                }
            }
            Ok(())
        };

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            flush_sentence(&mut docs, &mut sentence, sentence_start_line)?;
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(id) = comment.trim().strip_prefix("doc_id") {
                let id = id
                    .trim_start()
                    .strip_prefix('=')
                    .map(str::trim)
                    .unwrap_or("");
                if id.is_empty() {
                    return Err(Error::parse(path, lineno, "empty doc_id"));
                }
                flush_sentence(&mut docs, &mut sentence, sentence_start_line)?;
                docs.push(ParsedDoc {
                    name: id.to_string(),
                    sentences: Vec::new(),
                });
            }
            continue;
        }
        let cols: Vec<&str> = trimmed.split('\t').collect();
        if cols.len() != 6 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 6 tab-separated columns, found {}", cols.len()),
            ));
        }
        let index: u32 = cols[0]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad token index {:?}", cols[0])))?;
        let head: u32 = cols[4]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad head index {:?}", cols[4])))?;
        if sentence.is_empty() {
            sentence_start_line = lineno;
        }
        if index as usize != sentence.len() + 1 {
            return Err(Error::parse(
                path,
                lineno,
                format!("token index {} out of sequence", index),
            ));
        }
        sentence.push(Token {
            index,
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            pos: cols[3].to_string(),
            head,
            deprel: cols[5].to_string(),
        });
    }
    flush_sentence(&mut docs, &mut sentence, sentence_start_line)?;
    Ok(docs)
}
