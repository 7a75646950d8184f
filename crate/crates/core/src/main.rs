use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use evasion::harness::{
    build_iceboxes, emit_report, generate_corpus, load_report, load_trained, run_attack_stage, train_models,
    Corpus, ExperimentConfig, HarnessError, Harvested, Stage,
};

/// Problem-space evasion pipeline over a synthetic program corpus.
#[derive(Parser)]
#[command(name = "evasion", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; defaults apply to missing keys.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Master seed; also reseeds the corpus generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory holding one subdirectory per stage.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Attack worker threads.
    #[arg(long, short, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate the labelled corpus into <out>/corpus.
    GenCorpus,
    /// Train SVM and Sec-SVM into <out>/model.
    Train,
    /// Harvest one ice-box per model into <out>/icebox.
    Harvest,
    /// Attack every true positive in all four settings into <out>/attack.
    Attack,
    /// Write tables, CSVs and the summary into <out>/report.
    Report,
    /// Every stage in order.
    RunAll,
}

struct Layout {
    corpus: PathBuf,
    model: PathBuf,
    icebox: PathBuf,
    attack: PathBuf,
    report: PathBuf,
}

impl Layout {
    fn new(out: &Path) -> Self {
        Self {
            corpus: out.join("corpus"),
            model: out.join("model"),
            icebox: out.join("icebox"),
            attack: out.join("attack"),
            report: out.join("report"),
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| match e {
            HarnessError::Io(io) => HarnessError::Config(format!("{}: {io}", path.display())),
            other => other,
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        cfg.corpus.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(workers) = common.workers {
        cfg.workers = workers;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn stage<T>(s: Stage, f: impl FnOnce() -> Result<T, HarnessError>) -> Result<T, HarnessError> {
    info!("stage {s}");
    f().map_err(|e| e.within(s))
}

fn gen_corpus(cfg: &ExperimentConfig, dirs: &Layout) -> Result<(), HarnessError> {
    stage(Stage::GenCorpus, || {
        let corpus = generate_corpus(&cfg.corpus)?;
        corpus.save(&dirs.corpus)?;
        info!("{} programs written to {}", corpus.len(), dirs.corpus.display());
        Ok(())
    })
}

fn load_corpus(s: Stage, dirs: &Layout) -> Result<Corpus, HarnessError> {
    Corpus::load(&dirs.corpus).map_err(|e| HarnessError::stage(s, format!("reading {}: {e}", dirs.corpus.display())))
}

fn train(cfg: &ExperimentConfig, dirs: &Layout) -> Result<(), HarnessError> {
    stage(Stage::Train, || {
        let corpus = load_corpus(Stage::Train, dirs)?;
        let trained = train_models(&corpus, cfg)?;
        trained.save(&dirs.model)
    })
}

fn harvest(cfg: &ExperimentConfig, dirs: &Layout) -> Result<(), HarnessError> {
    stage(Stage::Harvest, || {
        let corpus = load_corpus(Stage::Harvest, dirs)?;
        let trained = load_trained(&dirs.model)?;
        let harvested = build_iceboxes(&corpus, &trained, cfg)?;
        harvested.save(&dirs.icebox, &trained.vocab)
    })
}

fn attack(cfg: &ExperimentConfig, dirs: &Layout) -> Result<(), HarnessError> {
    stage(Stage::Attack, || {
        let corpus = load_corpus(Stage::Attack, dirs)?;
        let trained = load_trained(&dirs.model)?;
        let harvested = Harvested::load(&dirs.icebox, &trained)?;
        let report = run_attack_stage(&corpus, &trained, &harvested, cfg)?;
        report.save(&dirs.attack)
    })
}

fn report(dirs: &Layout) -> Result<(), HarnessError> {
    stage(Stage::Report, || {
        let report = load_report(&dirs.attack)?;
        emit_report(&report, &dirs.report)?;
        info!("report written to {}", dirs.report.display());
        Ok(())
    })
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    let cfg = load_config(&cli.common)?;
    let dirs = Layout::new(&cfg.out_dir);
    match cli.command {
        Command::GenCorpus => gen_corpus(&cfg, &dirs),
        Command::Train => train(&cfg, &dirs),
        Command::Harvest => harvest(&cfg, &dirs),
        Command::Attack => attack(&cfg, &dirs),
        Command::Report => report(&dirs),
        Command::RunAll => {
            gen_corpus(&cfg, &dirs)?;
            train(&cfg, &dirs)?;
            harvest(&cfg, &dirs)?;
            attack(&cfg, &dirs)?;
            report(&dirs)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
