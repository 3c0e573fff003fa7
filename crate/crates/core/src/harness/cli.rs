//! Command-line front end. Every command writes its outputs under `--out`.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use super::{
    evaluate, faithfulness_curves, per_aspect_table, run_ablation, write_ablation_csv, write_faithfulness_csv,
    HarnessError, NullPolicy,
};
use crate::config::{ConfigError, PipelineConfig};
use crate::corpus::{generate_synthetic, load_corpus, save_corpus, split, AspectId, Corpus, CorpusError};
use crate::explain::{render_svg, ExplainScope};
use crate::fusion::PredictionRecord;
use crate::pipeline::{explain_aspect, train_pipeline, PipelineError, PipelineModel, Variant};

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pairwise-opinion", version, about = "Aspect-level comparative opinion mining")]
pub struct Cli {
    /// TOML configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config's `seed`
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Route sentences by their gold aspect tags instead of the classifiers
    #[arg(long, global = true)]
    pub oracle_aspects: bool,
    /// Log progress to stderr (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Corpus JSONL; defaults to the matching split of a generated corpus
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Trained model; defaults to `<out>/model.json`
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus and its train/val/test split
    GenData,
    /// Train a pipeline variant on the training data
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "full")]
        variant: String,
    },
    /// Predict every aspect of every pair
    Predict {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Micro/macro P/R/F1 overall and per aspect
    Eval {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        data: DataArgs,
        /// exclude-gold-null or null-as-fourth-class
        #[arg(long)]
        null_policy: Option<String>,
    },
    /// Shapley token attributions for one pair
    Explain {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Pair index in the data
        #[arg(long, default_value_t = 0)]
        pair: usize,
        /// Single aspect; defaults to every non-Null aspect
        #[arg(long)]
        aspect: Option<String>,
        /// fused or semantic-only
        #[arg(long)]
        scope: Option<String>,
    },
    /// Top-k and bottom-k adjective removal curves
    Faithfulness {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Train and evaluate every configured variant
    Ablate {
        /// Training corpus; defaults to the generated train split
        #[arg(long)]
        train: Option<PathBuf>,
        /// Test corpus; defaults to the generated test split
        #[arg(long)]
        test: Option<PathBuf>,
        /// Comma-separated variants; defaults to the config's list
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<String>>,
    },
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Corpus(c) => c.into(),
            PipelineError::UnknownVariant(_)
            | PipelineError::MissingAnnotations(_)
            | PipelineError::NothingToExplain(_)
            | PipelineError::NoSemanticBranch
            | PipelineError::UnsupportedVersion(_)
            | PipelineError::Json(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Pipeline(p) => p.into(),
            HarnessError::EmptyTestSet | HarnessError::EmptyEvaluation | HarnessError::LengthMismatch { .. } => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

struct Ctx {
    cfg: PipelineConfig,
    out: PathBuf,
    oracle: bool,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn generated_splits(&self) -> Result<(Corpus, Corpus, Corpus), CliError> {
        let data = generate_synthetic(&self.cfg.generator, self.cfg.seed)?;
        Ok(split(&data, self.cfg.split_ratios(), self.cfg.split_seed())?)
    }

    fn corpus_or(&self, path: &Option<PathBuf>, pick: fn((Corpus, Corpus, Corpus)) -> Corpus) -> Result<Corpus, CliError> {
        match path {
            Some(p) => {
                require_file(p, "data")?;
                Ok(load_corpus(p)?)
            }
            None => Ok(pick(self.generated_splits()?)),
        }
    }

    fn model(&self, args: &ModelArgs) -> Result<PipelineModel, CliError> {
        let path = args.model.clone().unwrap_or_else(|| self.path("model.json"));
        require_file(&path, "model")?;
        Ok(PipelineModel::load(path)?)
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{what} file {} not found", path.display())))
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn train_part(s: (Corpus, Corpus, Corpus)) -> Corpus {
    s.0
}

fn test_part(s: (Corpus, Corpus, Corpus)) -> Corpus {
    s.2
}

fn parse_variant(s: &str) -> Result<Variant, CliError> {
    s.parse().map_err(|e: PipelineError| CliError::Validation(e.to_string()))
}

#[derive(Serialize)]
struct PairPredictions<'a> {
    pair: usize,
    user_id: &'a str,
    first: &'a str,
    second: &'a str,
    predictions: Vec<PredictionRecord>,
}

fn run_command(cli: &Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => {
            require_file(p, "config")?;
            PipelineConfig::load(p)?
        }
        None => PipelineConfig::default(),
    };
    let seed = cli.seed.unwrap_or(cfg.seed);
    let mut cfg = cfg.with_seed(seed);
    if cli.oracle_aspects {
        cfg.eval.oracle_aspects = true;
    }
    fs::create_dir_all(&cli.out)?;
    let ctx = Ctx {
        oracle: cfg.eval.oracle_aspects,
        cfg,
        out: cli.out.clone(),
    };

    match &cli.command {
        Command::GenData => {
            let data = generate_synthetic(&ctx.cfg.generator, ctx.cfg.seed)?;
            let (train, val, test) = split(&data, ctx.cfg.split_ratios(), ctx.cfg.split_seed())?;
            save_corpus(&data, ctx.path("corpus.jsonl"))?;
            save_corpus(&train, ctx.path("train.jsonl"))?;
            save_corpus(&val, ctx.path("val.jsonl"))?;
            save_corpus(&test, ctx.path("test.jsonl"))?;
            fs::write(ctx.path("lexicon.tsv"), ctx.cfg.generator.scoring_lexicon()?.to_tsv())?;
            println!(
                "{} pairs: {} train, {} val, {} test",
                data.len(),
                train.len(),
                val.len(),
                test.len()
            );
        }
        Command::Train { data, variant } => {
            let variant = parse_variant(variant)?;
            let train = ctx.corpus_or(&data.data, train_part)?;
            let (model, report) = train_pipeline(&train, &ctx.cfg, variant)?;
            model.save(ctx.path("model.json"))?;
            write_json(&ctx.path("train_report.json"), &report)?;
            println!("trained {variant} on {} aspect pairs", report.examples);
        }
        Command::Predict { model, data } => {
            let model = ctx.model(model)?;
            let corpus = ctx.corpus_or(&data.data, test_part)?;
            let preds = model.predict_corpus(&corpus, ctx.oracle)?;
            let mut w = BufWriter::new(File::create(ctx.path("predictions.jsonl"))?);
            for (i, (pair, pred)) in corpus.pairs.iter().zip(&preds).enumerate() {
                let row = PairPredictions {
                    pair: i,
                    user_id: pair.user_id(),
                    first: &pair.first.review_id,
                    second: &pair.second.review_id,
                    predictions: pred.iter().map(|(a, p)| p.record(a)).collect(),
                };
                serde_json::to_writer(&mut w, &row)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            println!("wrote predictions for {} pairs", corpus.len());
        }
        Command::Eval {
            model,
            data,
            null_policy,
        } => {
            let model = ctx.model(model)?;
            let corpus = ctx.corpus_or(&data.data, test_part)?;
            let mut eval = ctx.cfg.eval.clone();
            if let Some(p) = null_policy {
                eval.null_policy = p.parse::<NullPolicy>().map_err(CliError::Validation)?;
            }
            let report = evaluate(&model, &corpus, &eval)?;
            write_json(&ctx.path("metrics.json"), &report)?;
            let table = per_aspect_table(&report);
            fs::write(ctx.path("per_aspect.txt"), &table)?;
            print!("{table}");
        }
        Command::Explain {
            model,
            data,
            pair,
            aspect,
            scope,
        } => {
            let model = ctx.model(model)?;
            let corpus = ctx.corpus_or(&data.data, test_part)?;
            let target_pair = corpus.pairs.get(*pair).ok_or_else(|| {
                CliError::Validation(format!("pair {pair} is out of range (corpus has {})", corpus.len()))
            })?;
            let mut explainer = ctx.cfg.explain.clone();
            if let Some(s) = scope {
                explainer.scope = match s.as_str() {
                    "fused" => ExplainScope::Fused,
                    "semantic-only" => ExplainScope::SemanticOnly,
                    _ => return Err(CliError::Validation(format!("unknown scope `{s}`"))),
                };
            }
            let aspects: Vec<AspectId> = match aspect {
                Some(a) => vec![a.parse().map_err(CliError::Validation)?],
                None => {
                    let preds = model.predict_pair(target_pair, ctx.oracle)?;
                    AspectId::ALL.into_iter().filter(|&a| !preds[a].label.is_null()).collect()
                }
            };
            for a in aspects {
                let ex = explain_aspect(&model, target_pair, a, &explainer, ctx.oracle)?;
                let report = ex.attribution.report(a, ex.target);
                let stem = format!("attribution_{pair}_{a}");
                write_json(&ctx.path(&format!("{stem}.json")), &report)?;
                fs::write(ctx.path(&format!("{stem}.svg")), render_svg(&report, ex.target))?;
                println!(
                    "{a}: {:?} from {} tokens, efficiency gap {:.2e}",
                    ex.prediction.label,
                    report.tokens.len(),
                    ex.attribution.efficiency_gap()
                );
            }
        }
        Command::Faithfulness { model, data } => {
            let model = ctx.model(model)?;
            let corpus = ctx.corpus_or(&data.data, test_part)?;
            let curves = faithfulness_curves(
                &corpus,
                &model,
                &ctx.cfg.explain,
                &ctx.cfg.eval,
                ctx.cfg.faithfulness.ks.as_deref(),
            )?;
            write_faithfulness_csv(&curves, File::create(ctx.path("faithfulness.csv"))?)?;
            for c in &curves {
                println!("{}: {:?}", c.strategy.name(), c.points);
            }
        }
        Command::Ablate { train, test, variants } => {
            let variants = match variants {
                Some(v) => v.iter().map(|s| parse_variant(s)).collect::<Result<Vec<_>, _>>()?,
                None => ctx.cfg.ablation.variants.clone(),
            };
            for p in train.iter().chain(test) {
                require_file(p, "data")?;
            }
            let (train, test) = match (train, test) {
                (Some(a), Some(b)) => (load_corpus(a)?, load_corpus(b)?),
                (a, b) => {
                    let (gen_train, _, gen_test) = ctx.generated_splits()?;
                    let train = a.as_ref().map(load_corpus).transpose()?.unwrap_or(gen_train);
                    let test = b.as_ref().map(load_corpus).transpose()?.unwrap_or(gen_test);
                    (train, test)
                }
            };
            let report = run_ablation(&train, &test, &ctx.cfg, &variants)?;
            write_ablation_csv(&report, File::create(ctx.path("ablation.csv"))?)?;
            write_json(&ctx.path("ablation.json"), &report)?;
            for r in &report.rows {
                println!("{:<26} macro F1 {:.4}  delta {:+.4}", r.variant.name(), r.macro_f1, r.delta);
            }
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run_command(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
