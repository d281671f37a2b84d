//! `dkts`: simulate data, build the question graph, embed questions, train,
//! evaluate, and run the full comparison matrix.
//!
//! Every subcommand accepts `--config <file>` with `key = value` lines and a
//! `--<key> <value>` flag for each key; flags win over the file.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 runtime or numeric
//! failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};
use dkts::config::{RawConfig, Settings, KEYS};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Run(dkts::Error),
}

impl From<dkts::Error> for Failure {
    fn from(e: dkts::Error) -> Self {
        Failure::Run(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Run(e) if e.is_input_error() => 1,
            Failure::Run(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(msg) => write!(f, "usage error: {msg}"),
            Failure::Run(e) => e.fmt(f),
        }
    }
}

fn path_arg(id: &'static str, help: &'static str) -> Arg {
    Arg::new(id)
        .long(id)
        .value_name("PATH")
        .value_parser(value_parser!(PathBuf))
        .help(help)
}

fn with_config(cmd: Command) -> Command {
    let cmd = cmd.arg(path_arg("config", "key = value configuration file"));
    KEYS.iter().fold(cmd, |cmd, (key, help)| {
        cmd.arg(
            Arg::new(*key)
                .long(*key)
                .value_name("VALUE")
                .help(*help)
                .help_heading("Configuration"),
        )
    })
}

fn cli() -> Command {
    Command::new("dkts")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Knowledge tracing with question-relation side information")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(with_config(
            Command::new("simulate")
                .about("Generate a synthetic population: log, skill map, mastery traces")
                .arg(path_arg("out", "output directory").required(true)),
        ))
        .subcommand(with_config(
            Command::new("build-graph")
                .about("Build the question graph from a skill map")
                .arg(path_arg("skill-map", "question_id<TAB>skills file").required(true))
                .arg(path_arg("out", "edge list to write").required(true)),
        ))
        .subcommand(with_config(
            Command::new("embed")
                .about("Embed questions")
                .arg(
                    Arg::new("method")
                        .long("method")
                        .required(true)
                        .value_parser(["gaussian", "line1", "line2", "node2vec"]),
                )
                .arg(path_arg("graph", "edge list written by build-graph"))
                .arg(path_arg("skill-map", "skill map; the graph is built from it"))
                .arg(path_arg("out", "embedding file to write").required(true)),
        ))
        .subcommand(with_config(
            Command::new("train")
                .about("Train a model; giving a graph enables the relation regularizer")
                .arg(path_arg("data", "training interaction log").required(true))
                .arg(path_arg("valid", "validation log for early stopping"))
                .arg(path_arg("embedding", "embedding file").required(true))
                .arg(path_arg("graph", "edge list written by build-graph"))
                .arg(path_arg("skill-map", "skill map; the graph is built from it"))
                .arg(path_arg("out", "checkpoint to write").required(true))
                .arg(path_arg("log", "training log (default: <out>.log)")),
        ))
        .subcommand(with_config(
            Command::new("eval")
                .about("Score a checkpoint on a log, or summarize a per-step score dump")
                .arg(path_arg("checkpoint", "checkpoint written by train"))
                .arg(path_arg("data", "interaction log"))
                .arg(path_arg("scores", "per-step dump to summarize instead"))
                .arg(path_arg("steps", "per-step dump to write"))
                .arg(path_arg("out", "metrics record to write")),
        ))
        .subcommand(with_config(
            Command::new("matrix")
                .about("Train and test every cell type × embedding, plus the regularized model")
                .arg(path_arg("data", "interaction log").required(true))
                .arg(path_arg("skill-map", "skill map (default: the log's skills column)"))
                .arg(path_arg("out", "table to write"))
                .arg(path_arg("runs", "per-run results to write"))
                .arg(
                    Arg::new("quiet")
                        .long("quiet")
                        .action(ArgAction::SetTrue)
                        .help("no per-run progress on stderr"),
                ),
        ))
}

/// File values first, then flags.
fn settings(m: &ArgMatches) -> Result<Settings, Failure> {
    let mut raw = match m.get_one::<PathBuf>("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| dkts::Error::io(path, e))?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::default(),
    };
    for (key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            raw.set(key, v)?;
        }
    }
    Ok(Settings::from_raw(&raw)?)
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let result = settings(sub).and_then(|s| match name {
        "simulate" => commands::simulate(sub, s),
        "build-graph" => commands::build_graph(sub, s),
        "embed" => commands::embed(sub, s),
        "train" => commands::train(sub, s),
        "eval" => commands::eval(sub, s),
        "matrix" => commands::matrix(sub, s),
        _ => unreachable!("clap rejects unknown subcommands"),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dkts {name}: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
