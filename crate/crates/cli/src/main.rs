//! `photoscout`: batch driver for albums, programs, searches and scripted
//! sessions.
//!
//! Exit status: 0 success, 1 failed expectation or conflict, 2 bad input,
//! 3 sketch source or service unavailable.

mod commands;
mod failure;
mod fixture_files;
mod script;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use photoscout_service::ServiceConfig;

use crate::failure::{Failure, Outcome};

#[derive(Debug, Parser)]
#[command(name = "photoscout", version, about = "Search annotated photo albums with synthesized queries")]
struct Cli {
    /// Config file; defaults to $PHOTOSCOUT_CONFIG, then ./photoscout.toml.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory holding one subdirectory per album; overrides the config.
    #[arg(long, global = true)]
    root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a directory of annotation files and add it to the album root.
    Ingest {
        dir: PathBuf,
        #[arg(long)]
        album: String,
    },
    /// Run a complete program and print the matching image ids.
    Eval {
        #[arg(long)]
        album: String,
        #[arg(long)]
        program: PathBuf,
    },
    /// Synthesize a program from a query and examples, then run it.
    Search(commands::SearchArgs),
    /// Run a session script against an in-process service.
    Replay {
        #[arg(long)]
        album: String,
        #[arg(long)]
        script: PathBuf,
        /// Defaults to the offline translator.
        #[arg(long, value_name = "SOURCE")]
        sketch_source: Option<String>,
    },
    /// Serve the HTTP API.
    Serve,
    /// Write the example albums, recorded model outputs and scripts.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
    },
}

fn config(cli: &Cli) -> Outcome<ServiceConfig> {
    let loaded = match &cli.config {
        Some(path) => ServiceConfig::load(path),
        None => ServiceConfig::discover(),
    };
    let mut config = loaded.map_err(|e| Failure::input(e.to_string()))?;
    if let Some(root) = &cli.root {
        config.album_root = root.clone();
    }
    Ok(config)
}

fn run(cli: Cli) -> Outcome {
    if let Command::Fixtures { out } = &cli.command {
        return fixture_files::write_all(out);
    }
    let config = config(&cli)?;
    match cli.command {
        Command::Ingest { dir, album } => commands::ingest(&config, &dir, &album),
        Command::Eval { album, program } => commands::eval(&config, &album, &program),
        Command::Search(args) => commands::search(&config, &args),
        Command::Replay {
            album,
            script,
            sketch_source,
        } => script::replay(config, &album, &script, sketch_source.as_deref()),
        Command::Serve => commands::serve(config),
        Command::Fixtures { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(tracing_subscriber::filter::LevelFilter::WARN)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            failure.exit_code()
        }
    }
}
