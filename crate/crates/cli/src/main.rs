//! `candst` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 numerical failure.
//!
//! Setting `CANDST_SEED` to an integer overrides the seed of every
//! subcommand that draws random numbers (generate, train, grid, transfer,
//! gradcheck). Nothing else is read from the environment.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use candst::corpus::{
    builtin_schema, convert_dstc2, convert_simdialogue, corpus_stats, generate_synthetic, load_corpus, write_corpus,
    Corpus, DomainSchema, GenConfig, Split,
};
use candst::evaluation::evaluate;
use candst::training::{
    grid_search, gradient_suite, train, transfer_eval, GridSpec, SuiteDims, TrainConfig, TransferMode,
};
use candst::tracker::{track_dialogue, tracking_records, TrackerModel};
use candst::Error;

const SEED_VAR: &str = "CANDST_SEED";
const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Parser)]
#[command(name = "candst", version, about = "Candidate-set dialogue state tracking")]
struct Cli {
    /// Log progress to stderr (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Dstc2,
    Simdialogue,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Dev,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Dev => Split::Dev,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    ZeroShot,
    Joint,
}

#[derive(Clone, Copy, ValueEnum)]
enum DimsArg {
    Small,
    Default,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic corpora, one `<domain>.jsonl` per schema.
    Generate {
        /// Schema JSON file (one schema or a list), or a built-in name: restaurant, movie.
        #[arg(long)]
        schema: String,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Target fraction of distinct test values unseen in train.
        #[arg(long, default_value_t = 0.4)]
        oov: f64,
        #[arg(long, default_value_t = 500)]
        train: usize,
        #[arg(long, default_value_t = 100)]
        dev: usize,
        #[arg(long, default_value_t = 200)]
        test: usize,
    },
    /// Convert a public dataset into a corpus file.
    Convert {
        #[arg(long, value_enum)]
        format: Format,
        /// Dataset root: the DSTC2 release, or one simulated domain directory with train/dev/test.json.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Domain name for simdialogue input.
        #[arg(long, default_value = "sim")]
        domain: String,
    },
    /// Train a tracker on one corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// key=value training config; omitted keys keep their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch history as JSON lines (default: <out>.history.jsonl).
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Grid search over embedding width, GRU width and learning rate.
    Grid {
        #[arg(long)]
        corpus: PathBuf,
        /// key=value file; embedding_dim, gru_hidden_dim and learning_rate take comma lists.
        /// Without it the grid is {50,75,100} x {50,75,100} x {0.001,0.01,0.1}.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Output directory for cells.tsv, best.cfg and model.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a model on one split of a corpus.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// key=value report; a per-dialogue TSV goes next to it with a .tsv suffix.
        #[arg(long)]
        report: PathBuf,
        /// Assignment threshold (default: the model's tuned threshold).
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Train a shared model on other domains and evaluate on a new one.
    Transfer {
        /// Comma-separated training corpora; the evaluation domain is excluded from them.
        #[arg(long, value_delimiter = ',', required = true)]
        train_corpora: Vec<PathBuf>,
        #[arg(long)]
        eval_corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "zero-shot")]
        mode: ModeArg,
        #[arg(long)]
        report: PathBuf,
    },
    /// Print per-turn slates, probabilities and assignments as JSON lines.
    Track {
        #[arg(long)]
        model: PathBuf,
        /// Corpus file holding the dialogues to step through.
        #[arg(long)]
        dialogue_file: PathBuf,
        /// Only this dialogue id.
        #[arg(long)]
        dialogue: Option<String>,
    },
    /// Finite-difference check of the full training loss gradient.
    Gradcheck {
        #[arg(long, value_enum, default_value = "small")]
        dims: DimsArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::Numerical(_)) { 3 } else { 2 };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

type Outcome = std::result::Result<(), Failure>;

fn seed_override(flag: u64) -> std::result::Result<u64, Failure> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("{SEED_VAR}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

fn write_text(path: &Path, text: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn load_config(path: Option<&Path>) -> std::result::Result<TrainConfig, Failure> {
    let mut cfg = match path {
        Some(p) => TrainConfig::load(p).map_err(|e| Failure::from(e).in_file(p))?,
        None => TrainConfig::default(),
    };
    cfg.seed = seed_override(cfg.seed)?;
    Ok(cfg)
}

impl Failure {
    /// Prefix the message with `path` unless it already names it.
    fn in_file(mut self, path: &Path) -> Self {
        let shown = path.display().to_string();
        if !self.message.contains(&shown) {
            self.message = format!("{shown}: {}", self.message);
        }
        self
    }
}

fn schemas_from(arg: &str) -> std::result::Result<Vec<DomainSchema>, Failure> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(s) = builtin_schema(arg) {
            return Ok(vec![s]);
        }
    }
    Ok(DomainSchema::load_all(path)?)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Generate {
            schema,
            out,
            seed,
            oov,
            train,
            dev,
            test,
        } => {
            let schemas = schemas_from(&schema)?;
            let gen = GenConfig {
                n_train: train,
                n_dev: dev,
                n_test: test,
                oov_target: oov,
                ..GenConfig::default()
            };
            let corpora = generate_synthetic(&schemas, &gen, seed_override(seed)?)?;
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            for c in &corpora {
                let path = out.join(format!("{}.jsonl", c.schema.domain));
                write_corpus(c, &path)?;
                let stats = corpus_stats(c);
                println!("{}\t{}", path.display(), stats.to_report().replace('\n', " "));
            }
        }
        Command::Convert {
            format,
            input,
            out,
            domain,
        } => {
            let corpus = match format {
                Format::Dstc2 => convert_dstc2(&input),
                Format::Simdialogue => convert_simdialogue(&input, &domain),
            }
            .map_err(|e| Failure::from(e).in_file(&input))?;
            write_corpus(&corpus, &out)?;
            println!(
                "{}: {} train, {} dev, {} test dialogues",
                out.display(),
                corpus.train.len(),
                corpus.dev.len(),
                corpus.test.len()
            );
        }
        Command::Train {
            corpus,
            config,
            out,
            history,
        } => {
            let cfg = load_config(config.as_deref())?;
            let c = load(&corpus)?;
            let (model, hist) = train(&c, &cfg)?;
            model.save(&out)?;
            let hpath = history.unwrap_or_else(|| suffixed(&out, ".history.jsonl"));
            write_text(&hpath, &hist.to_lines())?;
            println!("{}", hist.summary());
        }
        Command::Grid { corpus, grid, out } => {
            let (spec, mut base) = match &grid {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    GridSpec::from_key_values(&text).map_err(|e| Failure::from(e).in_file(p))?
                }
                None => (GridSpec::default(), TrainConfig::default()),
            };
            base.seed = seed_override(base.seed)?;
            let c = load(&corpus)?;
            let result = grid_search(&c, &base, &spec)?;
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            write_text(&out.join("cells.tsv"), &result.to_tsv())?;
            write_text(&out.join("best.cfg"), &result.best.to_key_values())?;
            result.best_model.save(&out.join("model.json"))?;
            print!("{}", result.to_tsv());
            println!("best dev_jga={:.6}", result.best_dev_jga);
        }
        Command::Eval {
            model,
            corpus,
            split,
            report,
            threshold,
        } => {
            let m: TrackerModel<f32> = TrackerModel::load(&model)?;
            let c = load(&corpus)?;
            let t = threshold.unwrap_or(m.config.threshold);
            if !(0.0..=1.0).contains(&t) {
                return Err(usage(format!("--threshold {t} is outside [0, 1]")));
            }
            let r = evaluate(&m, c.split(split.into()), t)?;
            write_text(&report, &r.to_key_values())?;
            write_text(&suffixed(&report, ".tsv"), &r.to_tsv())?;
            print!("{}", r.to_key_values());
        }
        Command::Transfer {
            train_corpora,
            eval_corpus,
            config,
            mode,
            report,
        } => {
            let cfg = load_config(config.as_deref())?;
            let train = train_corpora.iter().map(|p| load(p)).collect::<std::result::Result<Vec<_>, _>>()?;
            let eval = load(&eval_corpus)?;
            let mode = match mode {
                ModeArg::ZeroShot => TransferMode::ZeroShot,
                ModeArg::Joint => TransferMode::Joint,
            };
            let r = transfer_eval(&train, &eval, &cfg, mode)?;
            let text = format!(
                "mode={}\ntrained_on={}\neval_domain={}\nnull_predictor_jga={:.6}\n{}",
                r.mode,
                r.trained_on.join(","),
                eval.schema.domain,
                r.null_jga,
                r.report.to_key_values()
            );
            write_text(&report, &text)?;
            print!("{text}");
        }
        Command::Track {
            model,
            dialogue_file,
            dialogue,
        } => {
            let mut m: TrackerModel<f32> = TrackerModel::load(&model)?;
            let c = load(&dialogue_file)?;
            if m.slots_for(&c.schema.domain).is_err() {
                m.register_domain(&c.schema)?;
            }
            let mut found = false;
            for (_, d) in c.dialogues() {
                if dialogue.as_ref().is_some_and(|id| *id != d.id) {
                    continue;
                }
                found = true;
                let tracked = track_dialogue(d, &m)?;
                for rec in tracking_records(&d.id, &tracked) {
                    println!("{}", serde_json::to_string(&rec).expect("records serialize"));
                }
            }
            if let (Some(id), false) = (&dialogue, found) {
                return Err(Failure::from(Error::invalid(format!(
                    "{}: no dialogue with id '{id}'",
                    dialogue_file.display()
                ))));
            }
        }
        Command::Gradcheck { dims, seed } => {
            let dims = match dims {
                DimsArg::Small => SuiteDims::Small,
                DimsArg::Default => SuiteDims::Default,
            };
            let results = gradient_suite(dims, seed_override(seed)?)?;
            let mut worst: f64 = 0.0;
            for r in &results {
                info!("{} {}: worst element {:?}", r.mode, r.policy, r.report.worst);
                println!(
                    "{}\t{}\tchecked={}\tmax_relative_error={:.3e}",
                    r.mode, r.policy, r.report.checked, r.report.max_relative_error
                );
                worst = worst.max(r.report.max_relative_error);
            }
            println!("max_relative_error={worst:.3e}");
            if !(worst < GRADCHECK_TOLERANCE) {
                return Err(Failure {
                    code: 3,
                    message: format!("gradient check failed: {worst:.3e} >= {GRADCHECK_TOLERANCE:e}"),
                });
            }
        }
    }
    Ok(())
}

fn load(path: &Path) -> std::result::Result<Corpus, Failure> {
    load_corpus(path).map_err(|e| Failure::from(e).in_file(path))
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
