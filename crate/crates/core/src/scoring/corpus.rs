//! Corpus and query files.
//!
//! Corpus files hold one document per line as `<doc_id>\t<text>`; ids must be
//! contiguous from zero. Query files hold
//! `<qid>\t<question>\t<optA>|<optB>|...\t<correct_index>`.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use super::bm25::Bm25Index;
use super::tokenize::tokenize;
use crate::error::{ensure, Result, VodError};

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: usize,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    docs: Vec<Document>,
}

impl Corpus {
    pub fn new(docs: Vec<Document>) -> Result<Self> {
        ensure!(!docs.is_empty(), "empty corpus");
        for (pos, doc) in docs.iter().enumerate() {
            ensure!(
                doc.id == pos,
                "document ids must be contiguous from 0: found {} at position {pos}",
                doc.id
            );
            ensure!(!doc.tokens.is_empty(), "document {} has no tokens", doc.id);
        }
        Ok(Self { docs })
    }

    /// Tokenizes each text; ids follow iteration order.
    pub fn from_texts<S: AsRef<str>>(texts: impl IntoIterator<Item = S>) -> Result<Self> {
        let docs = texts
            .into_iter()
            .enumerate()
            .map(|(id, t)| Document {
                id,
                tokens: tokenize(t.as_ref()),
            })
            .collect();
        Self::new(docs)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn doc(&self, id: usize) -> Result<&Document> {
        self.docs
            .get(id)
            .ok_or_else(|| VodError::invalid(format!("unknown document id {id}")))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::parse(std::io::BufReader::new(file), path)
    }

    pub fn parse(reader: impl BufRead, origin: &Path) -> Result<Self> {
        let mut docs = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| VodError::Parse {
                path: origin.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let (id, text) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected `<doc_id>\\t<text>`".into()))?;
            let id: usize = id
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("bad document id `{id}`")))?;
            if id != docs.len() {
                return Err(parse_err(format!(
                    "document id {id} out of sequence, expected {}",
                    docs.len()
                )));
            }
            let tokens = tokenize(text);
            if tokens.is_empty() {
                return Err(parse_err(format!("document {id} has no tokens")));
            }
            docs.push(Document { id, tokens });
        }
        Self::new(docs)
    }

    pub fn write(&self, mut out: impl Write) -> Result<()> {
        for doc in &self.docs {
            writeln!(out, "{}\t{}", doc.id, doc.tokens.join(" "))?;
        }
        Ok(())
    }
}

/// A corpus together with its BM25 index.
#[derive(Debug, Clone)]
pub struct Collection {
    pub corpus: Corpus,
    pub index: Bm25Index,
}

impl Collection {
    pub fn new(corpus: Corpus, k1: f64, b: f64) -> Result<Self> {
        let index = Bm25Index::build(&corpus, k1, b)?;
        Ok(Self { corpus, index })
    }

    pub fn with_defaults(corpus: Corpus) -> Result<Self> {
        Self::new(corpus, super::DEFAULT_K1, super::DEFAULT_B)
    }

    pub fn len(&self) -> usize {
        self.corpus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corpus.is_empty()
    }
}

/// One line of a query file, untokenized.
#[derive(Debug, Clone, PartialEq)]
pub struct McqaRecord {
    pub qid: String,
    pub question: String,
    pub options: Vec<String>,
    pub correct: usize,
}

pub fn read_queries(path: &Path) -> Result<Vec<McqaRecord>> {
    let file = std::fs::File::open(path)?;
    parse_queries(std::io::BufReader::new(file), path)
}

pub(crate) fn parse_queries(reader: impl BufRead, origin: &Path) -> Result<Vec<McqaRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| VodError::Parse {
            path: PathBuf::from(origin),
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(parse_err(format!(
                "expected 4 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let options: Vec<String> = fields[2].split('|').map(|s| s.to_string()).collect();
        let correct: usize = fields[3]
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("bad correct index `{}`", fields[3])))?;
        if correct >= options.len() {
            return Err(parse_err(format!(
                "correct index {correct} out of range for {} options",
                options.len()
            )));
        }
        out.push(McqaRecord {
            qid: fields[0].to_string(),
            question: fields[1].to_string(),
            options,
            correct,
        });
    }
    Ok(out)
}

pub fn write_queries(records: &[McqaRecord], mut out: impl Write) -> Result<()> {
    for r in records {
        writeln!(out, "{}\t{}\t{}\t{}", r.qid, r.question, r.options.join("|"), r.correct)?;
    }
    Ok(())
}
