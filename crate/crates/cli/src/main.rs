use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use treekv::commands::{self, compare, PrefillInput};
use treekv::config::read_token_file;
use treekv::{trace, weights_io, CliError, ConfigArgs, Result, RunConfig};

#[derive(Parser)]
#[command(name = "treekv", version, about = "Tree-structured KV-cache eviction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a TKVW weight file generated from the configured seed and dims.
    GenWeights {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a token stream under a policy and write a JSON-lines trace.
    Decode {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Block-level compression of a prompt's KV cache.
    Prefill {
        #[command(flatten)]
        config: ConfigArgs,
        /// Prompt token file; sets seq_len to its length.
        #[arg(long)]
        prompt: Option<PathBuf>,
        /// JSON array of fixed block scores instead of running the model.
        #[arg(long)]
        block_scores: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-layer fraction of heads retaining each position at the end of a trace.
    Map {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Wavelet magnitude profile of a trace's analysis step.
    Analyze {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        exclude: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare policies on one model and token stream.
    Compare {
        /// Config files; the first is the overlap reference.
        #[arg(long, num_args = 1..)]
        configs: Vec<PathBuf>,
        /// Comma-separated policies applied to the base config instead.
        #[arg(long, value_delimiter = ',')]
        policies: Vec<String>,
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        #[command(flatten)]
        base: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e)),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenWeights { config, out } => {
            let cfg = config.load()?;
            cfg.dims().validate().map_err(|e| CliError::Config(e.to_string()))?;
            let w = treekv_core::generate_weights(cfg.seed, cfg.dims())?;
            weights_io::write(&out, &w)
        }
        Command::Decode { config, out } => {
            let cfg = config.load()?;
            match out {
                Some(path) => {
                    let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
                    commands::run_decode(&cfg, io::BufWriter::new(file))?;
                }
                None => {
                    commands::run_decode(&cfg, io::BufWriter::new(io::stdout().lock()))?;
                }
            }
            Ok(())
        }
        Command::Prefill { config, prompt, block_scores, out } => {
            let mut cfg = config.load()?;
            if let Some(p) = prompt {
                cfg.seq_len = read_token_file(&p)?.len();
                cfg.tokens = Some(p);
            }
            let input = match block_scores {
                Some(path) => {
                    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
                    PrefillInput::BlockScores(serde_json::from_str(&text)?)
                }
                None => PrefillInput::Model,
            };
            emit(out.as_deref(), &commands::run_prefill(&cfg, &input)?)
        }
        Command::Map { trace: path, out } => emit(out.as_deref(), &commands::run_map(&trace::read(&path)?)?),
        Command::Analyze { trace: path, levels, exclude, out } => {
            let t = trace::read(&path)?;
            let levels = levels.unwrap_or(t.config().levels);
            let exclude = exclude.unwrap_or(t.config().exclude);
            emit(out.as_deref(), &commands::run_analyze(&t, levels, exclude)?)
        }
        Command::Compare { configs, policies, seeds, base, out } => {
            let configs: Vec<RunConfig> = if configs.is_empty() {
                let base = base.load()?;
                policies.iter().map(|p| RunConfig { policy: p.clone(), ..base.clone() }).collect()
            } else {
                configs.iter().map(|p| Ok(base.apply(RunConfig::from_file(p)?))).collect::<Result<_>>()?
            };
            let rows = commands::run_compare(&configs, seeds)?;
            emit(out.as_deref(), &compare::render(&rows))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("treekv: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
