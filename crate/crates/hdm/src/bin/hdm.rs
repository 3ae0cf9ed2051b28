//! Command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hdm::config::AppConfig;
use hdm::corpus;
use hdm::experiment::{self, ExperimentError, REPORTED_SQM_GAINS_VS_MAPS};
use hdm::gateway::MockScript;
use hdm::report;
use hdm::runstore::RunStore;

#[derive(Parser)]
#[command(name = "hdm", about = "Staged humour translation with LLM-as-judge scoring")]
struct Cli {
    /// Path to a TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline over a corpus sample and judge the outputs.
    Run {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        src: Option<String>,
        #[arg(long)]
        tgt: Option<String>,
        /// Comma-separated mode labels (base, -HT, -HDM, full).
        #[arg(long)]
        modes: Option<String>,
        /// Comma-separated model names from the config gateway table.
        #[arg(long)]
        models: Option<String>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        judge_model: Option<String>,
        #[arg(long)]
        run_dir: Option<PathBuf>,
        #[arg(long)]
        prompt_dir: Option<PathBuf>,
        /// Render every prompt for the first sample and exit; no requests.
        #[arg(long)]
        dry_run: bool,
    },
    /// Re-render the report tables for a stored run (or fixture cells).
    Report {
        /// Run id under the run directory.
        #[arg(long)]
        run: Option<String>,
        /// Aggregate-cells CSV to read instead of a stored run.
        #[arg(long)]
        cells: Option<PathBuf>,
        #[arg(long)]
        run_dir: Option<PathBuf>,
        /// Emit the ablation table with this mode order instead of the main table.
        #[arg(long)]
        ablation: bool,
        /// Also print mean gains of MODE over this baseline mode.
        #[arg(long)]
        gains_baseline: Option<String>,
        /// Method mode for the gains summary (default HDM).
        #[arg(long, default_value = "HDM")]
        gains_method: String,
    },
    /// Print a side-by-side case sheet for selected joke ids in a run.
    Case {
        #[arg(long)]
        run: String,
        /// Comma-separated joke ids.
        #[arg(long)]
        ids: String,
        #[arg(long)]
        run_dir: Option<PathBuf>,
    },
    /// Run the staged mode once per prompt variant and summarise.
    Variants {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        run_dir: Option<PathBuf>,
    },
    /// Print a deterministic corpus sample (one id per line).
    Sample {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Inspect or clear the response cache for a model.
    Cache {
        #[arg(long)]
        model: String,
        #[arg(long)]
        clear: bool,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<AppConfig, String> {
    match path {
        Some(p) => AppConfig::load(p).map_err(|e| e.to_string()),
        None => Ok(AppConfig::default()),
    }
}

fn split_csv(s: &str) -> Vec<String> {
    s.split(',')
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => CliError::Usage(c.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let mut config = load_config(&cli.config).map_err(CliError::Usage)?;
    match cli.command {
        Command::Run {
            corpus,
            n,
            seed,
            src,
            tgt,
            modes,
            models,
            runs,
            variant,
            judge_model,
            run_dir,
            prompt_dir,
            dry_run,
        } => {
            if let Some(path) = corpus {
                config.corpus = Some(hdm::config::CorpusConfig::from_path(path));
            }
            if let Some(n) = n {
                config.n = n;
            }
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(src) = src {
                config.src = src;
            }
            if let Some(tgt) = tgt {
                config.tgt = tgt;
            }
            if let Some(modes) = modes {
                config.modes = split_csv(&modes);
            }
            if let Some(models) = models {
                config.models = split_csv(&models);
            }
            if let Some(runs) = runs {
                config.runs = runs as u32;
            }
            if let Some(variant) = variant {
                config.prompt_variant = variant;
            }
            if let Some(judge_model) = judge_model {
                config.judge.model = judge_model;
            }
            if let Some(run_dir) = run_dir {
                config.run_dir = run_dir;
            }
            if let Some(prompt_dir) = prompt_dir {
                config.prompt_dir = Some(prompt_dir);
            }
            config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            if dry_run {
                print!("{}", experiment::dry_run(&config)?);
                return Ok(());
            }
            let outcome = experiment::run_experiment(&config, MockScript::new())?;
            println!(
                "run {} complete: {} records, {} judgments ({} valid)",
                outcome.run_id, outcome.n_records, outcome.n_judgments, outcome.n_valid_judgments
            );
            print!("{}", outcome.report_markdown);
            Ok(())
        }
        Command::Report {
            run,
            cells,
            run_dir,
            ablation,
            gains_baseline,
            gains_method,
        } => {
            if let Some(run_dir) = run_dir {
                config.run_dir = run_dir;
            }
            let cells = match (run, cells) {
                (Some(run_id), None) => {
                    let store = RunStore::new(&config.run_dir)
                        .map_err(|e| CliError::Runtime(e.to_string()))?;
                    store
                        .open_run(&run_id)
                        .and_then(|h| h.load_cells())
                        .map_err(|e| CliError::Runtime(e.to_string()))?
                }
                (None, Some(path)) => hdm::runstore::cells_from_csv_path(&path)
                    .map_err(|e| CliError::Runtime(e.to_string()))?,
                _ => {
                    return Err(CliError::Usage(
                        "pass exactly one of --run or --cells".into(),
                    ))
                }
            };
            let table = if ablation {
                report::ablation_table(&cells)
            } else {
                report::main_table(&cells)
            }
            .map_err(|e| CliError::Runtime(e.to_string()))?;
            println!("{}", table.markdown);
            if let Some(baseline) = gains_baseline {
                let (_, md) = report::gains_summary(
                    &cells,
                    &gains_method,
                    &baseline,
                    &REPORTED_SQM_GAINS_VS_MAPS,
                )
                .map_err(|e| CliError::Runtime(e.to_string()))?;
                println!("{md}");
            }
            Ok(())
        }
        Command::Case { run, ids, run_dir } => {
            if let Some(run_dir) = run_dir {
                config.run_dir = run_dir;
            }
            let store =
                RunStore::new(&config.run_dir).map_err(|e| CliError::Runtime(e.to_string()))?;
            let handle = store
                .open_run(&run)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            let records = handle
                .load_records()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            let ids = split_csv(&ids);
            let sheet = report::case_sheet(&records, &ids)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            println!("{sheet}");
            Ok(())
        }
        Command::Variants {
            corpus,
            n,
            seed,
            run_dir,
        } => {
            if let Some(path) = corpus {
                config.corpus = Some(hdm::config::CorpusConfig::from_path(path));
            }
            if let Some(n) = n {
                config.n = n;
            }
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(run_dir) = run_dir {
                config.run_dir = run_dir;
            }
            let (_, md) = experiment::run_variants(&config, MockScript::new())?;
            println!("{md}");
            Ok(())
        }
        Command::Sample { corpus: path, n, seed } => {
            let mut cfg = hdm::config::CorpusConfig::from_path(path);
            cfg.name = "sample".into();
            let spec = cfg.to_spec().map_err(|e| CliError::Usage(e.to_string()))?;
            let loaded = corpus::load(&spec).map_err(|e| CliError::Runtime(e.to_string()))?;
            let seed = seed.unwrap_or(config.seed);
            for joke in corpus::sample(&loaded.samples, n, seed) {
                println!("{}", joke.id);
            }
            Ok(())
        }
        Command::Cache { model, clear } => {
            let entry = config
                .gateway_entry(&model)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let Some(dir) = entry.cache_dir.as_deref() else {
                println!("no cache directory configured for {model}");
                return Ok(());
            };
            let cache = hdm::gateway::ResponseCache::new(dir)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            if clear {
                let removed = cache.clear().map_err(|e| CliError::Runtime(e.to_string()))?;
                println!("cleared {removed} cached responses for {model}");
            } else {
                println!(
                    "{} cached responses for {model} in {}",
                    cache.len(),
                    dir.display()
                );
            }
            Ok(())
        }
    }
}
