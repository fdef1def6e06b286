//! `trellis` — command-line entry points and the HTTP query service.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_BACKEND: u8 = 3;

#[derive(Parser)]
#[command(
    name = "trellis",
    version,
    about = "Three-channel retrieval-augmented generation engine: BM25, dense embeddings, and knowledge-graph reasoning behind one CLI and HTTP service"
)]
struct Cli {
    /// Engine config file (JSON).
    #[arg(short, long, global = true, default_value = "trellis.json")]
    config: PathBuf,

    /// Override the config's RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the default config with every setting explicit.
    GenerateConfig {
        /// Destination file (stdout when omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Clean, chunk, and classify a corpus into the chunks file.
    Ingest {
        /// Directory of .md/.txt files, or a JSONL file of raw documents.
        #[arg(short, long)]
        input: PathBuf,
    },
    /// Build the sparse, dense, and graph artifacts from the chunks file.
    Index,
    /// Answer a query (or retrieve evidence only with --no-llm).
    Ask {
        query: String,
        /// Evidence items to select (defaults to the config top_n).
        #[arg(short, long)]
        k: Option<usize>,
        /// Retrieval-only mode: print evidence, skip the LLM call.
        #[arg(long)]
        no_llm: bool,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
        /// Include stage timings in JSON output (timings always go to
        /// stderr in text mode; stdout stays byte-deterministic).
        #[arg(long)]
        timings: bool,
    },
    /// Run the benchmark: automatic metrics plus optional LLM judging.
    Eval {
        /// Benchmark tasks JSONL.
        #[arg(long)]
        bench: PathBuf,
        /// Replayed answers JSONL (id -> answer); otherwise answers come
        /// from the generation engine.
        #[arg(long)]
        answers: Option<PathBuf>,
        /// Also score each answer with the judge backend.
        #[arg(long)]
        judge: bool,
        /// Report destination (stdout when omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Evaluate a stratified subsample of this size.
        #[arg(long)]
        mini: Option<usize>,
    },
    /// Run the instruction data engine over source chunks and seeds.
    Forge {
        /// Chunks JSONL to distill.
        #[arg(long)]
        chunks: Option<PathBuf>,
        /// Seed pool JSON for the generation loop.
        #[arg(long)]
        seeds: Option<PathBuf>,
        /// Public-QA records JSONL for the extraction pipeline.
        #[arg(long)]
        extract: Option<PathBuf>,
        /// Generation rounds (defaults to the config).
        #[arg(long)]
        rounds: Option<usize>,
        /// Instructions per round (defaults to the config).
        #[arg(long)]
        per_round: Option<usize>,
        /// Output directory for accepted/rejected/removed files.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Serve the query API over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Port to bind (0 picks a free port, printed on startup).
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

fn load_config(cli: &Cli) -> trellis_core::Result<trellis_core::config::EngineConfig> {
    let mut config = trellis_core::config::EngineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn run(cli: Cli) -> trellis_core::Result<()> {
    match &cli.command {
        Command::GenerateConfig { output } => commands::generate_config(output.as_deref()),
        Command::Ingest { input } => commands::ingest(&load_config(&cli)?, input),
        Command::Index => commands::index(&load_config(&cli)?),
        Command::Ask {
            query,
            k,
            no_llm,
            json,
            timings,
        } => commands::ask(
            &load_config(&cli)?,
            query,
            *k,
            commands::AskOptions {
                no_llm: *no_llm,
                json: *json,
                timings: *timings,
            },
        ),
        Command::Eval {
            bench,
            answers,
            judge,
            output,
            mini,
        } => commands::eval(
            &load_config(&cli)?,
            bench,
            answers.as_deref(),
            *judge,
            output.as_deref(),
            *mini,
        ),
        Command::Forge {
            chunks,
            seeds,
            extract,
            rounds,
            per_round,
            out_dir,
        } => commands::forge(
            &load_config(&cli)?,
            commands::ForgeInputs {
                chunks: chunks.as_deref(),
                seeds: seeds.as_deref(),
                extract: extract.as_deref(),
                rounds: *rounds,
                per_round: *per_round,
            },
            out_dir,
        ),
        Command::Serve { host, port } => commands::serve(load_config(&cli)?, host, *port),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_backend() { EXIT_BACKEND } else { EXIT_DATA })
        }
    }
}
