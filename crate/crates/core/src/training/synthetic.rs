//! Planted-evidence multiple-choice task.
//!
//! Every entity `ent<e>` has one true attribute. Exactly one document, the
//! evidence, contains `ent<e>`, the true attribute and the marker
//! `confirmed`. Denial documents pair the entity with a wrong attribute and
//! the marker `not`. Spam documents repeat an attribute without naming any
//! entity, so they score well under BM25 for `[q; a]` while carrying no
//! evidence. For a fraction of entities the evidence is padded with filler,
//! which pushes it down the BM25 ranking.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::mcqa::McqaInstance;
use crate::rng;
use crate::scoring::{Collection, Corpus, Document};

pub const CONFIRMED: &str = "confirmed";
pub const DENIED: &str = "not";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_docs: usize,
    pub n_entities: usize,
    pub n_attributes: usize,
    pub n_options: usize,
    pub denials_per_entity: usize,
    /// Fraction of entities whose evidence is padded with `hidden_filler` tokens.
    pub hidden_fraction: f64,
    pub evidence_filler: usize,
    pub hidden_filler: usize,
    pub spam_repeat: usize,
    pub doc_filler: usize,
    pub filler_vocab: usize,
    pub question_noise: usize,
    pub n_train: usize,
    pub n_eval: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_docs: 500,
            n_entities: 50,
            n_attributes: 10,
            n_options: 4,
            denials_per_entity: 3,
            hidden_fraction: 0.3,
            evidence_filler: 2,
            hidden_filler: 30,
            spam_repeat: 3,
            doc_filler: 3,
            filler_vocab: 300,
            question_noise: 1,
            n_train: 1000,
            n_eval: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub collection: Collection,
    pub train: Vec<McqaInstance>,
    pub eval: Vec<McqaInstance>,
    /// Evidence document of each training question.
    pub train_evidence: Vec<usize>,
    pub eval_evidence: Vec<usize>,
    /// The marker tokens, a natural indicator vocabulary for linear scorers.
    pub markers: Vec<String>,
}

fn entity(e: usize) -> String {
    format!("ent{e}")
}

fn attribute(a: usize) -> String {
    format!("attr{a}")
}

pub fn generate(cfg: &SyntheticConfig, seed: u64) -> Result<SyntheticTask> {
    ensure!(cfg.n_entities >= 1, "need at least one entity");
    ensure!(cfg.n_options >= 2, "need at least two options");
    ensure!(
        cfg.n_attributes >= cfg.n_options && cfg.n_attributes > cfg.denials_per_entity,
        "need more attributes than options and denials"
    );
    ensure!(
        (0.0..=1.0).contains(&cfg.hidden_fraction),
        "hidden_fraction must lie in [0, 1]"
    );
    ensure!(cfg.filler_vocab >= 1, "need a filler vocabulary");
    let planted = cfg.n_entities * (1 + cfg.denials_per_entity);
    ensure!(
        cfg.n_docs >= planted,
        "{} documents cannot hold {planted} planted documents",
        cfg.n_docs
    );

    let mut rng = rng::stream(seed, 0);
    let filler = |rng: &mut rng::StreamRng, n: usize| -> Vec<String> {
        (0..n)
            .map(|_| format!("w{}", rng.random_range(0..cfg.filler_vocab)))
            .collect()
    };

    let truth: Vec<usize> = (0..cfg.n_entities)
        .map(|_| rng.random_range(0..cfg.n_attributes))
        .collect();
    let n_hidden = (cfg.hidden_fraction * cfg.n_entities as f64).round() as usize;
    let mut order: Vec<usize> = (0..cfg.n_entities).collect();
    order.shuffle(&mut rng);
    let mut hidden = vec![false; cfg.n_entities];
    for &e in &order[..n_hidden] {
        hidden[e] = true;
    }

    // (tokens, evidence-of-entity)
    let mut texts: Vec<(Vec<String>, Option<usize>)> = Vec::with_capacity(cfg.n_docs);
    let mut denied: Vec<Vec<usize>> = Vec::with_capacity(cfg.n_entities);
    for e in 0..cfg.n_entities {
        let pad = if hidden[e] {
            cfg.hidden_filler
        } else {
            cfg.evidence_filler
        };
        let mut ev = vec![entity(e), attribute(truth[e]), CONFIRMED.to_string()];
        ev.extend(filler(&mut rng, pad));
        texts.push((ev, Some(e)));

        let wrong: Vec<usize> = (0..cfg.n_attributes).filter(|&a| a != truth[e]).collect();
        let picks: Vec<usize> = wrong
            .choose_multiple(&mut rng, cfg.denials_per_entity)
            .copied()
            .collect();
        for &a in &picks {
            let mut d = vec![entity(e), attribute(a), DENIED.to_string()];
            d.extend(filler(&mut rng, cfg.doc_filler));
            texts.push((d, None));
        }
        denied.push(picks);
    }
    let mut a = 0;
    while texts.len() < cfg.n_docs {
        let mut d = vec![attribute(a % cfg.n_attributes); cfg.spam_repeat.max(1)];
        d.extend(filler(&mut rng, cfg.doc_filler));
        texts.push((d, None));
        a += 1;
    }
    texts.shuffle(&mut rng);

    let mut evidence_doc = vec![0; cfg.n_entities];
    let docs: Vec<Document> = texts
        .into_iter()
        .enumerate()
        .map(|(id, (tokens, ev))| {
            if let Some(e) = ev {
                evidence_doc[e] = id;
            }
            Document { id, tokens }
        })
        .collect();
    let collection = Collection::with_defaults(Corpus::new(docs)?)?;

    let mut make = |n: usize, prefix: &str| -> Result<(Vec<McqaInstance>, Vec<usize>)> {
        let mut out = Vec::with_capacity(n);
        let mut ev = Vec::with_capacity(n);
        for i in 0..n {
            let e = rng.random_range(0..cfg.n_entities);
            let mut question: Vec<String> = ["which", "attribute", "describes"].map(String::from).to_vec();
            question.push(entity(e));
            question.extend(filler(&mut rng, cfg.question_noise));

            // Prefer denied attributes as decoys so denials are on topic.
            let mut decoys: Vec<usize> = denied[e].clone();
            decoys.shuffle(&mut rng);
            let mut rest: Vec<usize> = (0..cfg.n_attributes)
                .filter(|a| *a != truth[e] && !decoys.contains(a))
                .collect();
            rest.shuffle(&mut rng);
            decoys.extend(rest);
            decoys.truncate(cfg.n_options - 1);

            let correct = rng.random_range(0..cfg.n_options);
            let mut options: Vec<Vec<String>> = decoys.iter().map(|&a| vec![attribute(a)]).collect();
            options.insert(correct, vec![attribute(truth[e])]);
            out.push(McqaInstance::new(format!("{prefix}{i}"), question, options, correct)?);
            ev.push(evidence_doc[e]);
        }
        Ok((out, ev))
    };
    let (train, train_evidence) = make(cfg.n_train, "train")?;
    let (eval, eval_evidence) = make(cfg.n_eval, "eval")?;
    Ok(SyntheticTask {
        collection,
        train,
        eval,
        train_evidence,
        eval_evidence,
        markers: vec![CONFIRMED.to_string(), DENIED.to_string()],
    })
}
