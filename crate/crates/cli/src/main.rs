//! `mf` — experiment runner for the matrix-factorization solvers.
//!
//! Subcommands: `run` (end-to-end), `tune`, `synthesize`, `train`,
//! `predict`, `evaluate`. Every configuration key can be overridden on the
//! command line with `--key value`; flags win over the config file.

mod config;
mod exit;
mod model_io;
mod report;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Config;
use exit::{CliError, ErrorKind};

#[derive(Parser)]
#[command(name = "mf", version, about = "Matrix-factorization experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides as `--key value` pairs (win over the file).
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Split, train, predict and evaluate; writes a JSON report.
    Run(ConfigArgs),
    /// Select the regularization weight by one-per-user validation.
    Tune(ConfigArgs),
    /// Generate a fully observed synthetic rating matrix.
    Synthesize(ConfigArgs),
    /// Train on the whole ratings file and save the model.
    Train(ConfigArgs),
    /// Complete a ratings matrix with a saved model.
    Predict(ConfigArgs),
    /// Score a prediction file against a truth ratings file.
    Evaluate(ConfigArgs),
}

fn build_config(args: &ConfigArgs) -> Result<Config, CliError> {
    let mut config = match &args.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    config.apply_overrides(&args.overrides)?;
    Ok(config)
}

fn cmd_run(args: &ConfigArgs) -> Result<(), CliError> {
    let config = build_config(args)?;
    let report = runner::run(&config)?;
    let out = config.get("out").unwrap_or("report.json");
    report.write(&PathBuf::from(out))?;
    println!("method: {}", report.method);
    for (name, value) in &report.aggregate.mean {
        let std = report.aggregate.std.get(name).copied().unwrap_or(0.0);
        println!("{name}: {value:.6} +- {std:.6}");
    }
    println!("report: {out}");
    Ok(())
}

fn cmd_tune(args: &ConfigArgs) -> Result<(), CliError> {
    let config = build_config(args)?;
    let (best, scored) = runner::tune(&config)?;
    for (lambda, zoe) in &scored {
        println!("lambda {lambda:.6} -> zoe {zoe:.6}");
    }
    println!("best_lambda: {best:.6}");
    if let Some(out) = config.get("out") {
        let doc = serde_json::json!({
            "best_lambda": best,
            "grid": scored.iter().map(|(l, _)| *l).collect::<Vec<f64>>(),
            "zoe": scored.iter().map(|(_, z)| *z).collect::<Vec<f64>>(),
        });
        std::fs::write(out, serde_json::to_string_pretty(&doc).expect("serialize"))
            .map_err(|e| CliError::new(ErrorKind::Data, format!("cannot write {out}: {e}")))?;
    }
    Ok(())
}

fn cmd_synthesize(args: &ConfigArgs) -> Result<(), CliError> {
    let config = build_config(args)?;
    let n: usize = config.require_parse("n_users")?;
    let m: usize = config.require_parse("n_items")?;
    let d: usize = config.require_parse("d")?;
    let r: u8 = config.require_parse("r_levels")?;
    let seed: u64 = config.seeds()?[0];
    let max_rounds: usize = config.parse_or("max_rounds", 100)?;
    if d > n.min(m) {
        return Err(CliError::new(
            ErrorKind::Config,
            format!("d = {d} exceeds min(n_users, n_items) = {}", n.min(m)),
        ));
    }
    let out = config.require("out")?;
    let result = mf_core::data_io::synthesize_ratings(n, m, d, r, seed, max_rounds)?;
    mf_core::data_io::write_ratings_tsv(PathBuf::from(out), &result.ratings)?;
    println!(
        "wrote {} ratings ({}x{}, R={}, rounds={}, stabilized={}) to {out}",
        result.ratings.n_observed(),
        n,
        m,
        r,
        result.rounds,
        result.stabilized
    );
    Ok(())
}

fn cmd_train(args: &ConfigArgs) -> Result<(), CliError> {
    let config = build_config(args)?;
    let model_path = config.require("model")?;
    runner::train_model(&config, &PathBuf::from(model_path))?;
    println!("model: {model_path}");
    Ok(())
}

fn cmd_predict(args: &ConfigArgs) -> Result<(), CliError> {
    let config = build_config(args)?;
    let model_path = config.require("model")?;
    let out = config.require("out")?;
    runner::predict_with_model(&config, &PathBuf::from(model_path), &PathBuf::from(out))?;
    println!("predictions: {out}");
    Ok(())
}

fn cmd_evaluate(args: &ConfigArgs) -> Result<(), CliError> {
    let config = build_config(args)?;
    let truth = config.require("ratings")?;
    let predictions = config.require("predictions")?;
    let divisor: f64 = config.parse_or("nmae_divisor", mf_core::metrics::NMAE_DIVISOR_MOVIELENS)?;
    let eval = runner::evaluate_predictions(
        &PathBuf::from(truth),
        &PathBuf::from(predictions),
        divisor,
    )?;
    let doc = serde_json::json!({
        "mae": eval.mae,
        "rmse": eval.rmse,
        "fre": eval.fre,
        "nmae": eval.nmae,
        "zero_one": eval.zero_one,
        "nmae_divisor": eval.nmae_divisor,
    });
    let rendered = serde_json::to_string_pretty(&doc).expect("serialize");
    if let Some(out) = config.get("out") {
        std::fs::write(out, &rendered)
            .map_err(|e| CliError::new(ErrorKind::Data, format!("cannot write {out}: {e}")))?;
    }
    println!("{rendered}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Tune(args) => cmd_tune(args),
        Command::Synthesize(args) => cmd_synthesize(args),
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Evaluate(args) => cmd_evaluate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
