use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use textvqa::config::PipelineConfig;
use textvqa::eval::Normalization;
use textvqa::pipeline::{self, Technique, TRIPLETS_FILE};
use textvqa::{Diagnostics, Error, Result};

#[derive(Parser)]
#[command(
    name = "textvqa",
    version,
    about = "Build, augment and evaluate language-only VQA corpora"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    shards: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Join the corpora and write the original triplets.
    Build {
        /// none, narrative, whole or captions:k.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Generate synthetic triplets from a built triplet file.
    Augment {
        /// Triplet file; defaults to the build output.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Technique to run (repeatable; `all` for every technique).
        #[arg(long = "technique", short = 't')]
        techniques: Vec<String>,
    },
    /// Write one truncated copy of a triplet file per rate.
    Truncate {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Comma-separated rates in [0, 1].
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
    },
    /// Mean description length for every description mode.
    Stats,
    /// Score predictions with the VQA accuracy metric.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        /// Annotation JSON, or a triplet file (.jsonl).
        #[arg(long)]
        annotations: PathBuf,
        /// Earlier JSON report; adds the Gap column.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Match answers after lowercasing and whitespace cleanup only.
        #[arg(long)]
        simple_normalization: bool,
    },
    /// Bucket two systems by binary correctness on shared questions.
    Overlap {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Apply the full VQA answer normalizer before matching.
        #[arg(long)]
        official_normalization: bool,
    },
    /// Convert a WordNet database directory into a lexical graph TSV.
    ImportLexicon {
        #[arg(long)]
        wordnet: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

fn load_config(g: &Global) -> Result<PipelineConfig> {
    let mut c = match &g.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = g.seed {
        c.seed = v;
    }
    if let Some(v) = g.shards {
        c.shards = v;
    }
    if let Some(v) = &g.out {
        c.out = v.clone();
    }
    if let Some(v) = g.threads {
        c.threads = v;
    }
    Ok(c)
}

fn report_diagnostics(d: &Diagnostics) {
    for (kind, n) in &d.counts {
        eprintln!("diagnostic {kind}: {n}");
    }
}

fn techniques(names: &[String]) -> Result<Vec<Technique>> {
    if names.iter().any(|n| n == "all") {
        return Ok(Technique::all());
    }
    let mut out = names
        .iter()
        .map(|n| n.parse())
        .collect::<Result<Vec<Technique>>>()?;
    out.dedup();
    Ok(out)
}

fn default_input(config: &PipelineConfig, input: Option<PathBuf>) -> PathBuf {
    input.unwrap_or_else(|| config.out.join(TRIPLETS_FILE))
}

fn run(cli: Cli) -> Result<()> {
    let mut config = load_config(&cli.global)?;
    match cli.command {
        Command::Build { mode } => {
            if let Some(m) = mode {
                config.mode = m;
            }
            let m = pipeline::cmd_build(&config)?;
            report_diagnostics(&m.diagnostics);
            if let Some(j) = &m.join {
                eprintln!("excluded {} questions", j.excluded());
            }
            println!(
                "{} triplets written to {}",
                m.num_original,
                config.out.join(TRIPLETS_FILE).display()
            );
        }
        Command::Augment {
            input,
            techniques: names,
        } => {
            let names = if names.is_empty() {
                config.techniques.clone()
            } else {
                names
            };
            let list = techniques(&names)?;
            let input = default_input(&config, input);
            let m = pipeline::cmd_augment(&config, &input, &list)?;
            report_diagnostics(&m.diagnostics);
            print!("{}", m.table());
        }
        Command::Truncate { input, rates } => {
            let rates = rates.unwrap_or_else(|| config.truncate.rates.clone());
            let input = default_input(&config, input);
            for path in pipeline::cmd_truncate(&config, &input, &rates)? {
                println!("{}", path.display());
            }
        }
        Command::Stats => {
            let rows = pipeline::cmd_stats(&config)?;
            print!("{}", pipeline::format_length_table(&rows));
        }
        Command::Eval {
            predictions,
            annotations,
            baseline,
            report,
            simple_normalization,
        } => {
            let norm = if simple_normalization {
                Normalization::Simple
            } else {
                Normalization::Official
            };
            let (r, diag) =
                pipeline::cmd_eval(&predictions, &annotations, baseline.as_deref(), norm)?;
            report_diagnostics(&diag);
            print!("{r}");
            write_report(report.as_deref(), &r)?;
        }
        Command::Overlap {
            a,
            b,
            annotations,
            report,
            official_normalization,
        } => {
            let norm = if official_normalization {
                Normalization::Official
            } else {
                Normalization::Simple
            };
            let r = pipeline::cmd_overlap(&a, &b, &annotations, norm)?;
            print!("{r}");
            write_report(report.as_deref(), &r)?;
        }
        Command::ImportLexicon { wordnet, output } => {
            let (words, diag) = pipeline::cmd_import_lexicon(&wordnet, &output)?;
            report_diagnostics(&diag);
            println!("{words} head words written to {}", output.display());
        }
    }
    Ok(())
}

fn write_report<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    match path {
        Some(p) => pipeline::write_json(p, value),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
