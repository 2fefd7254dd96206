//! The `fairsim` command line: argument handling, the pipeline stages and
//! the merged JSON report.

pub mod config;
pub mod pipeline;
pub mod report;

use std::path::Path;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

pub use config::Config;
use pipeline::Context;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NOT_CERTIFIED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] fairsim_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) | CliError::Io(_) => EXIT_DATA,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "fairsim",
    version,
    about = "Similarity networks, kernels and fairness analysis for tabular data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub config: Config,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Pairwise similarity matrix.
    Similarity,
    /// Exponential and random-walk kernel matrices.
    Kernel,
    /// Thresholded similarity network and its measures.
    Network,
    /// Data complexity measures per representation.
    Complexity,
    /// Cross-validated classification per representation, with feature importance.
    Classify,
    /// Equal opportunity and equal mis-opportunity per representation.
    Fairness,
    /// First representation whose group gaps are within --delta (exit 3 if none).
    Certify,
    /// Fill missing cells from network neighbours.
    Impute,
    /// Oversample minority classes (graph, smote or group:<column>).
    Augment,
    /// Every analysis, plus plot-ready tables.
    Report,
    /// Write the synthetic employee table used in the examples.
    Generate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Similarity => "similarity",
            Command::Kernel => "kernel",
            Command::Network => "network",
            Command::Complexity => "complexity",
            Command::Classify => "classify",
            Command::Fairness => "fairness",
            Command::Certify => "certify",
            Command::Impute => "impute",
            Command::Augment => "augment",
            Command::Report => "report",
            Command::Generate => "generate",
        }
    }
}

fn config_value(cfg: &Config) -> Value {
    serde_json::to_value(cfg).expect("config serializes")
}

/// Runs one subcommand and returns the process exit code.
pub fn run(command: Command, cfg: &Config) -> Result<i32, CliError> {
    cfg.validate()?;
    let out = cfg.out.as_path();
    std::fs::create_dir_all(out)?;
    if command == Command::Generate {
        let section = pipeline::generate(cfg, out)?;
        report::merge(
            out,
            command.name(),
            config_value(cfg),
            None,
            vec![("generate", section)],
        )?;
        return Ok(EXIT_OK);
    }
    let ctx = Context::load(cfg)?;
    let (sections, code) = sections(command, &ctx, out)?;
    report::merge(
        out,
        command.name(),
        config_value(cfg),
        Some(ctx.dataset_summary()),
        sections,
    )?;
    Ok(code)
}

fn certification_value(outcome: &fairsim_core::CertificationOutcome) -> Value {
    json!({
        "certified": outcome.certified,
        "chosen_representation": outcome.chosen_representation,
        "delta": outcome.delta,
        "trail": outcome.trail,
    })
}

/// Report sections produced by one subcommand, with its exit code.
type Sections = (Vec<(&'static str, Value)>, i32);

fn sections(command: Command, ctx: &Context, out: &Path) -> Result<Sections, CliError> {
    let one = |name, v| Ok((vec![(name, v)], EXIT_OK));
    match command {
        Command::Similarity => one("similarity", pipeline::similarity(ctx, out)?),
        Command::Kernel => one("kernel", pipeline::kernel(ctx, out)?),
        Command::Network => one("network", pipeline::network(ctx, out)?),
        Command::Complexity => one("complexity", pipeline::complexity(ctx, out)?),
        Command::Classify => one("classification", pipeline::classify(ctx, out)?),
        Command::Fairness => one("fairness", pipeline::fairness(ctx, out)?),
        Command::Certify => {
            let outcome = pipeline::certification(ctx)?;
            let code = if outcome.certified {
                EXIT_OK
            } else {
                EXIT_NOT_CERTIFIED
            };
            Ok((vec![("certification", certification_value(&outcome))], code))
        }
        Command::Impute => one("imputation", pipeline::impute_stage(ctx, out)?),
        Command::Augment => one("augmentation", pipeline::augment(ctx, out)?),
        Command::Report => {
            let mut s = vec![
                ("similarity", pipeline::similarity(ctx, out)?),
                ("kernel", pipeline::kernel(ctx, out)?),
                ("network", pipeline::network(ctx, out)?),
                ("complexity", pipeline::complexity(ctx, out)?),
                ("classification", pipeline::classify(ctx, out)?),
            ];
            let mut fairness = Value::Null;
            if ctx.cfg.groups.is_some() {
                let outcome = pipeline::certification(ctx)?;
                fairness = pipeline::fairness_from(ctx, &outcome)?;
                s.push(("fairness", fairness.clone()));
                s.push(("certification", certification_value(&outcome)));
            }
            if ctx.raw.missing_count() > 0 {
                s.push(("imputation", pipeline::impute_stage(ctx, out)?));
            }
            s.push(("augmentation", pipeline::augment(ctx, out)?));
            let plots = pipeline::write_plots(out, &s[3].1, &fairness)?;
            s.push(("plots", json!(plots)));
            Ok((s, EXIT_OK))
        }
        Command::Generate => unreachable!("handled before loading data"),
    }
}
