//! Trains on the planted-evidence task with three retriever settings and
//! prints the evaluation accuracy after every round.
//!
//! cargo run --release --example synthetic_training -- [seed]

use std::time::Instant;

use vod::training::synthetic::{generate, SyntheticConfig};
use vod::training::{run_training, AlphaSchedule, ModelConfig, Models, RetrieverMode, TrainConfig};

fn main() -> vod::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let task = generate(&SyntheticConfig::default(), seed)?;
    let model_cfg = ModelConfig {
        vocab: Some(task.markers.clone()),
        ..Default::default()
    };
    let base = TrainConfig {
        support: 32,
        ..Default::default()
    };
    let runs = [
        ("annealed", base.clone()),
        (
            "elbo",
            TrainConfig {
                alpha_schedule: AlphaSchedule::Constant(1.0),
                ..base.clone()
            },
        ),
        (
            "frozen-bm25",
            TrainConfig {
                retriever_mode: RetrieverMode::Frozen,
                ..base.clone()
            },
        ),
    ];
    for (name, cfg) in runs {
        let start = Instant::now();
        let models = Models::from_config(&model_cfg, &task.collection, seed)?;
        let out = run_training(&cfg, &task.train, &task.eval, &task.collection, models, seed)?;
        let evals: Vec<String> = out.trace.evals.iter().map(|(r, a)| format!("r{r}={a:.3}")).collect();
        let kl: Vec<String> = out
            .trace
            .steps
            .iter()
            .step_by(25)
            .map(|s| format!("{:.3}", s.kl))
            .collect();
        println!(
            "{name:12} {}  ({:.1}s)  kl every 25 steps: {}",
            evals.join(" "),
            start.elapsed().as_secs_f64(),
            kl.join(" ")
        );
    }
    Ok(())
}
