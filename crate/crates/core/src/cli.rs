//! Command-line experiment runner.
//!
//! Every command writes into a fresh output directory (or an existing one
//! with `--force`) and is fully determined by its config and seed.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bench::{variance_study, write_variance_csv, BenchConfig};
use crate::error::{Result, VodError};
use crate::mcqa::{format_prediction, McqaInstance};
use crate::oracle::{run_oracle_suite, OracleConfig, OracleReport};
use crate::rng::derive_seed;
use crate::scoring::{read_queries, write_queries, Collection, Corpus, McqaRecord};
use crate::training::synthetic::{generate, SyntheticConfig};
use crate::training::{
    eval_cache, evaluate, recall_at_1, run_distillation, run_training, teacher_proposals, DistillConfig, EvalResult,
    ModelConfig, Models, TrainConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    #[default]
    Synthetic,
    Files,
}

/// `[data]`. File paths are relative to the config file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub corpus: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub eval: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub synthetic: SyntheticConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub distill: DistillConfig,
}

impl RunConfig {
    /// Parses TOML text. Errors carry the 1-based line of the offending key.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            VodError::Parse {
                path: origin.to_path_buf(),
                line,
                message: e.message().to_string(),
            }
        })?;
        let base = origin.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.corpus, &mut cfg.data.train, &mut cfg.data.eval]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.training.validate().map_err(|e| VodError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| VodError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    /// Checks that every input exists before any work starts.
    pub fn check_paths(&self) -> Result<()> {
        let d = &self.data;
        let paths = [("corpus", &d.corpus), ("train", &d.train), ("eval", &d.eval)];
        match d.source {
            DataSource::Synthetic => {
                if let Some((name, _)) = paths.iter().find(|(_, p)| p.is_some()) {
                    return Err(VodError::Config(format!(
                        "[data] {name} is only used with source = \"files\""
                    )));
                }
            }
            DataSource::Files => {
                for (name, p) in paths {
                    let p = p.as_ref().ok_or_else(|| {
                        VodError::Config(format!("[data] {name} is required with source = \"files\""))
                    })?;
                    if !p.is_file() {
                        return Err(VodError::Config(format!(
                            "[data] {name}: {} does not exist",
                            p.display()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Corpus and question splits. Evidence ids are known for synthetic data only.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub collection: Collection,
    pub train: Vec<McqaInstance>,
    pub eval: Vec<McqaInstance>,
    pub train_evidence: Option<Vec<usize>>,
    pub eval_evidence: Option<Vec<usize>>,
}

pub fn load_dataset(cfg: &RunConfig, seed: u64) -> Result<Dataset> {
    cfg.check_paths()?;
    match cfg.data.source {
        DataSource::Synthetic => {
            let t = generate(&cfg.synthetic, seed)?;
            Ok(Dataset {
                collection: t.collection,
                train: t.train,
                eval: t.eval,
                train_evidence: Some(t.train_evidence),
                eval_evidence: Some(t.eval_evidence),
            })
        }
        DataSource::Files => {
            let path = |p: &Option<PathBuf>| p.clone().expect("checked above");
            let collection = Collection::with_defaults(Corpus::read(&path(&cfg.data.corpus))?)?;
            let questions = |p: PathBuf| -> Result<Vec<McqaInstance>> {
                read_queries(&p)?.iter().map(McqaInstance::from_record).collect()
            };
            Ok(Dataset {
                collection,
                train: questions(path(&cfg.data.train))?,
                eval: questions(path(&cfg.data.eval))?,
                train_evidence: None,
                eval_evidence: None,
            })
        }
    }
}

fn to_record(inst: &McqaInstance) -> McqaRecord {
    McqaRecord {
        qid: inst.qid.clone(),
        question: inst.question.join(" "),
        options: inst.options.iter().map(|o| o.join(" ")).collect(),
        correct: inst.correct,
    }
}

/// Creates `dir`, refusing a non-empty one unless `force` is set.
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)?.next().is_some();
        if non_empty && !force {
            return Err(VodError::Config(format!(
                "output directory {} is not empty; pass --force to write into it",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    f(&mut file)?;
    file.flush()?;
    Ok(())
}

fn write_predictions(path: &Path, instances: &[McqaInstance], eval: &EvalResult) -> Result<()> {
    write_file(path, |f| {
        for (inst, p) in instances.iter().zip(&eval.probabilities) {
            writeln!(f, "{}", format_prediction(&inst.qid, p)?)?;
        }
        Ok(())
    })
}

/// A command's one-line result plus whether its checks passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub summary: String,
    pub passed: bool,
}

impl Outcome {
    fn ok(summary: String) -> Self {
        Self { summary, passed: true }
    }
}

pub fn cmd_priority_bench(cfg: &BenchConfig, seed: u64, out: &Path, force: bool) -> Result<Outcome> {
    prepare_out_dir(out, force)?;
    let rows = variance_study(cfg, seed)?;
    write_file(&out.join("variance.csv"), |f| write_variance_csv(&rows, f))?;
    let wins = rows.iter().filter(|r| r.priority_normalized <= r.mc).count();
    Ok(Outcome::ok(format!(
        "wrote {} rows; self-normalized priority variance <= MC in {wins}/{} rows",
        rows.len(),
        rows.len()
    )))
}

pub fn cmd_oracle_check(
    cfg: &OracleConfig,
    seed: u64,
    out: Option<&Path>,
    force: bool,
) -> Result<(OracleReport, Outcome)> {
    if let Some(dir) = out {
        prepare_out_dir(dir, force)?;
    }
    let report = run_oracle_suite(cfg, seed)?;
    let mut text = Vec::new();
    report.write(&mut text)?;
    if let Some(dir) = out {
        fs::write(dir.join("oracle_report.txt"), &text)?;
    }
    let failed = report.checks.iter().filter(|c| !c.passed()).count();
    let mut summary = String::from_utf8(text).expect("report is UTF-8");
    summary.push_str(&format!("{} checks, {failed} failed", report.checks.len()));
    let passed = report.all_passed();
    Ok((report, Outcome { summary, passed }))
}

fn copy_config(config_path: &Path, out: &Path) -> Result<()> {
    fs::copy(config_path, out.join("config.toml"))?;
    Ok(())
}

fn resolve_seed(cfg: &RunConfig, flag: Option<u64>) -> Result<u64> {
    flag.or(cfg.seed)
        .ok_or_else(|| VodError::Config("a seed is required: set `seed` in the config or pass --seed".into()))
}

pub fn cmd_train(config_path: &Path, seed: Option<u64>, out: &Path, force: bool) -> Result<Outcome> {
    let cfg = RunConfig::load(config_path)?;
    let seed = resolve_seed(&cfg, seed)?;
    cfg.check_paths()?;
    prepare_out_dir(out, force)?;
    copy_config(config_path, out)?;
    let start = Instant::now();
    let data = load_dataset(&cfg, seed)?;
    if cfg.data.source == DataSource::Synthetic {
        let dir = out.join("data");
        fs::create_dir_all(&dir)?;
        write_file(&dir.join("corpus.tsv"), |f| data.collection.corpus.write(f))?;
        for (name, split) in [("train.tsv", &data.train), ("eval.tsv", &data.eval)] {
            let records: Vec<McqaRecord> = split.iter().map(to_record).collect();
            write_file(&dir.join(name), |f| write_queries(&records, f))?;
        }
    }
    let initial = Models::from_config(&cfg.model, &data.collection, seed)?;
    let outcome = run_training(&cfg.training, &data.train, &data.eval, &data.collection, initial, seed)?;
    write_file(&out.join("metrics.csv"), |f| outcome.trace.write_csv(f))?;
    outcome.models.save(&out.join("checkpoint.txt"))?;
    if let Some(e) = &outcome.final_eval {
        write_predictions(&out.join("predictions.tsv"), &data.eval, e)?;
    }
    let acc = outcome.trace.final_eval();
    let secs = start.elapsed().as_secs_f64();
    write_file(&out.join("summary.txt"), |f| {
        writeln!(f, "seed {seed}")?;
        for (round, a) in &outcome.trace.evals {
            writeln!(f, "eval_accuracy round={round} {a:.6}")?;
        }
        for n in &outcome.notices {
            writeln!(f, "notice {n}")?;
        }
        writeln!(f, "seconds {secs:.3}")?;
        Ok(())
    })?;
    let mut summary = match acc {
        Some(a) => format!("final eval accuracy {a:.4}"),
        None => "no evaluation set".to_string(),
    };
    summary.push_str(&format!(" ({secs:.1}s)"));
    for n in &outcome.notices {
        summary.push_str(&format!("\nnotice: {n}"));
    }
    Ok(Outcome::ok(summary))
}

pub fn cmd_eval(
    config_path: &Path,
    checkpoint: &Path,
    seed: Option<u64>,
    out: &Path,
    force: bool,
) -> Result<(f64, Outcome)> {
    let cfg = RunConfig::load(config_path)?;
    let seed = resolve_seed(&cfg, seed)?;
    cfg.check_paths()?;
    if !checkpoint.is_file() {
        return Err(VodError::Config(format!(
            "checkpoint {} does not exist",
            checkpoint.display()
        )));
    }
    prepare_out_dir(out, force)?;
    copy_config(config_path, out)?;
    let data = load_dataset(&cfg, seed)?;
    let models = Models::load(checkpoint)?;
    let cache = eval_cache(&data.eval, &data.collection, &models, &cfg.training)?;
    let result = evaluate(
        &data.eval,
        &cache,
        &data.collection,
        &models,
        &cfg.training,
        derive_seed(seed, 2_000_000),
    )?;
    write_predictions(&out.join("predictions.tsv"), &data.eval, &result)?;
    fs::write(
        out.join("summary.txt"),
        format!("seed {seed}\neval_accuracy {:.6}\n", result.accuracy),
    )?;
    Ok((
        result.accuracy,
        Outcome::ok(format!("eval accuracy {:.4}", result.accuracy)),
    ))
}

#[derive(Debug, Clone)]
pub struct DistillSummary {
    pub kl_trace: Vec<f64>,
    /// `(untrained, distilled)` recall@1 on the evaluation split.
    pub recall: Option<(f64, f64)>,
}

pub fn cmd_distill(
    config_path: &Path,
    checkpoint: &Path,
    seed: Option<u64>,
    out: &Path,
    force: bool,
) -> Result<(DistillSummary, Outcome)> {
    let cfg = RunConfig::load(config_path)?;
    let seed = resolve_seed(&cfg, seed)?;
    cfg.check_paths()?;
    if !checkpoint.is_file() {
        return Err(VodError::Config(format!(
            "checkpoint {} does not exist",
            checkpoint.display()
        )));
    }
    prepare_out_dir(out, force)?;
    copy_config(config_path, out)?;
    let data = load_dataset(&cfg, seed)?;
    let teacher = Models::load(checkpoint)?;
    let dc = &cfg.distill;
    let teachers = teacher_proposals(
        &data.train,
        &data.collection,
        Some(&teacher.retriever),
        dc.support,
        dc.hybrid_tau,
    )?;
    let student = cfg.model.build(&data.collection, derive_seed(seed, 3))?;
    let untrained = student.clone();
    let result = run_distillation(dc, &data.train, &teachers, &data.collection, student)?;

    let recall = match &data.eval_evidence {
        Some(ev) if !data.eval.is_empty() => Some((
            recall_at_1(&untrained, &data.eval, ev, &data.collection)?,
            recall_at_1(&result.student, &data.eval, ev, &data.collection)?,
        )),
        _ => None,
    };
    write_file(&out.join("distill_kl.csv"), |f| {
        writeln!(f, "step,kl")?;
        for (i, kl) in result.kl_trace.iter().enumerate() {
            writeln!(f, "{i},{kl:.9}")?;
        }
        Ok(())
    })?;
    Models {
        reader: teacher.reader,
        retriever: result.student.clone(),
    }
    .save(&out.join("student.txt"))?;

    let first = result.kl_trace.first().copied().unwrap_or(f64::NAN);
    let last = result.kl_trace.last().copied().unwrap_or(f64::NAN);
    let mut summary = format!("student KL {first:.6} -> {last:.6}");
    if let Some((before, after)) = recall {
        summary.push_str(&format!("; recall@1 {before:.4} -> {after:.4}"));
    }
    fs::write(out.join("summary.txt"), format!("seed {seed}\n{summary}\n"))?;
    let passed = last < first;
    Ok((
        DistillSummary {
            kl_trace: result.kl_trace,
            recall,
        },
        Outcome { summary, passed },
    ))
}

#[derive(Debug, Parser)]
#[command(name = "vod", version, about = "Variational reader-retriever training toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimator variance table for a K grid.
    PriorityBench {
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Comma-separated sample sizes.
        #[arg(long, value_delimiter = ',', default_values_t = (5..=95).step_by(5).collect::<Vec<usize>>())]
        k_grid: Vec<usize>,
        #[arg(long, default_value_t = 10_000)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Sampled objectives and gradients against brute-force oracles.
    OracleCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 20)]
        mcqa_instances: usize,
        /// Adds this offset to one log-ratio before evaluating (negative control).
        #[arg(long)]
        inject_zeta_fault: Option<f64>,
    },
    /// Round-based training from a config.
    Train(RunArgs),
    /// Monte-Carlo evaluation of a checkpoint on the evaluation split.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Distills the checkpoint's answer-aware proposal into a query-only retriever.
    Distill {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn exit_code_for(err: &VodError) -> i32 {
    match err {
        VodError::Parse { .. } | VodError::Config(_) | VodError::InvalidArgument(_) => EXIT_USAGE,
        _ => EXIT_CHECK_FAILED,
    }
}

pub fn execute(command: Command) -> Result<Outcome> {
    match command {
        Command::PriorityBench {
            n,
            k_grid,
            replicates,
            seed,
            out,
            force,
        } => {
            let cfg = BenchConfig {
                n,
                k_grid,
                replicates,
                ..BenchConfig::default()
            };
            cmd_priority_bench(&cfg, seed, &out, force)
        }
        Command::OracleCheck {
            seed,
            out,
            force,
            instances,
            mcqa_instances,
            inject_zeta_fault,
        } => {
            let cfg = OracleConfig {
                latent_instances: instances,
                mcqa_instances,
                zeta_fault: inject_zeta_fault,
            };
            cmd_oracle_check(&cfg, seed, out.as_deref(), force).map(|(_, o)| o)
        }
        Command::Train(a) => cmd_train(&a.config, a.seed, &a.out, a.force),
        Command::Eval { run, checkpoint } => {
            cmd_eval(&run.config, &checkpoint, run.seed, &run.out, run.force).map(|(_, o)| o)
        }
        Command::Distill { run, checkpoint } => {
            cmd_distill(&run.config, &checkpoint, run.seed, &run.out, run.force).map(|(_, o)| o)
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                eprint!("{}", e.render());
                return EXIT_USAGE;
            }
            print!("{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(cli.command) {
        Ok(o) => {
            println!("{}", o.summary);
            if o.passed {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
