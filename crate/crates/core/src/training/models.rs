//! Reader/retriever pairs, their construction from config, and the text
//! checkpoint format.
//!
//! ```text
//! vod-checkpoint 1
//! model reader
//! kind linear-features
//! scale 1
//! dim 0
//! vocab confirmed not
//! params 0.5 -1.25 ...
//! model retriever
//! ...
//! ```

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result, VodError};
use crate::rng::derive_seed;
use crate::scoring::{Collection, ScoreKind, ScoreModel};

const HEADER: &str = "vod-checkpoint 1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Linear,
    DualEmbedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Indicator / embedding vocabulary. When absent, the `vocab_size` terms
    /// with the highest document frequency are used.
    pub vocab: Option<Vec<String>>,
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub init_std: f64,
    pub score_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Linear,
            vocab: None,
            vocab_size: 32,
            embedding_dim: 16,
            init_std: 0.1,
            score_scale: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn build(&self, collection: &Collection, seed: u64) -> Result<ScoreModel> {
        let vocab = match &self.vocab {
            Some(v) => v.clone(),
            None => frequent_terms(collection, self.vocab_size),
        };
        let model = match self.kind {
            ModelKind::Linear => ScoreModel::linear(vocab),
            ModelKind::DualEmbedding => ScoreModel::dual_embedding(vocab, self.embedding_dim, self.init_std, seed)?,
        };
        ensure!(
            self.score_scale.is_finite() && self.score_scale > 0.0,
            "score scale must be positive"
        );
        Ok(model.with_scale(self.score_scale))
    }
}

/// The `n` terms with the highest document frequency, ties alphabetical.
pub fn frequent_terms(collection: &Collection, n: usize) -> Vec<String> {
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in collection.corpus.docs() {
        let mut seen: Vec<&str> = doc.tokens.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let mut terms: Vec<(&str, usize)> = df.into_iter().collect();
    terms.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    terms.into_iter().take(n).map(|(t, _)| t.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub reader: ScoreModel,
    pub retriever: ScoreModel,
}

impl Models {
    pub fn from_config(cfg: &ModelConfig, collection: &Collection, seed: u64) -> Result<Self> {
        Ok(Self {
            reader: cfg.build(collection, derive_seed(seed, 1))?,
            retriever: cfg.build(collection, derive_seed(seed, 2))?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn write(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{HEADER}")?;
        for (name, m) in [("reader", &self.reader), ("retriever", &self.retriever)] {
            writeln!(out, "model {name}")?;
            writeln!(out, "kind {}", m.kind_name())?;
            writeln!(out, "scale {:?}", m.scale)?;
            let dim = match m.kind {
                ScoreKind::DualEmbedding { dim, .. } => dim,
                ScoreKind::LinearFeatures { .. } => 0,
            };
            writeln!(out, "dim {dim}")?;
            writeln!(out, "vocab {}", m.vocab().join(" "))?;
            let ps: Vec<String> = m.params.iter().map(|p| format!("{p:?}")).collect();
            writeln!(out, "params {}", ps.join(" "))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::parse(std::io::BufReader::new(f), path)
    }

    pub fn parse(reader: impl BufRead, origin: &Path) -> Result<Self> {
        let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
        let err = |line: usize, message: String| VodError::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        if lines.first().map(|l| l.trim()) != Some(HEADER) {
            return Err(err(1, format!("expected header `{HEADER}`")));
        }
        let mut models = Vec::new();
        let mut i = 1;
        for expected in ["reader", "retriever"] {
            let mut field = |key: &str| -> Result<(usize, String)> {
                let lineno = i + 1;
                let line = lines
                    .get(i)
                    .ok_or_else(|| err(lineno, format!("missing `{key}` line")))?;
                i += 1;
                let rest = line
                    .strip_prefix(key)
                    .filter(|r| r.is_empty() || r.starts_with(' '))
                    .ok_or_else(|| err(lineno, format!("expected `{key}`")))?;
                Ok((lineno, rest.trim().to_string()))
            };
            let (ln, name) = field("model")?;
            if name != expected {
                return Err(err(ln, format!("expected model `{expected}`, found `{name}`")));
            }
            let (kind_ln, kind) = field("kind")?;
            let (ln, scale) = field("scale")?;
            let scale: f64 = scale.parse().map_err(|_| err(ln, format!("bad scale `{scale}`")))?;
            let (ln, dim) = field("dim")?;
            let dim: usize = dim.parse().map_err(|_| err(ln, format!("bad dim `{dim}`")))?;
            let (_, vocab) = field("vocab")?;
            let vocab: Vec<String> = vocab.split_whitespace().map(String::from).collect();
            let (pln, params) = field("params")?;
            let params = params
                .split_whitespace()
                .map(|p| p.parse::<f64>().map_err(|_| err(pln, format!("bad parameter `{p}`"))))
                .collect::<Result<Vec<f64>>>()?;
            let model = match kind.as_str() {
                "linear-features" => ScoreModel::linear(vocab),
                "dual-embedding" => ScoreModel::dual_embedding(vocab, dim, 0.0, 0)?,
                other => return Err(err(kind_ln, format!("unknown model kind `{other}`"))),
            };
            let model = model
                .with_params(params)
                .map_err(|e| err(pln, e.to_string()))?
                .with_scale(scale);
            models.push(model);
        }
        let retriever = models.pop().expect("two models parsed");
        let reader = models.pop().expect("two models parsed");
        Ok(Self { reader, retriever })
    }
}
