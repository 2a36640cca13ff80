//! `hierglm`: fit Bayesian cancellation models to booking CSVs, simulate
//! synthetic datasets, and emit reports from stored bundles.

mod ingest;
mod pipeline;
mod report;

use clap::{Args, Parser, Subcommand};
use hierglm_core::{
    simulate_dataset, table4_truth, CovariateProfile, ModelKind, ModelSpec, ParameterVector,
    SamplerConfig,
};
use ingest::{ingest_csv, subsample, write_records_csv, ColumnMap, IngestError};
use pipeline::{run_pipeline, InputRecipe, PipelineError};
use report::{emit_report, Format};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_DATA: u8 = 2;
const EXIT_SAMPLER: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "hierglm",
    version,
    about = "Hierarchical Bayesian booking-cancellation models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit models to a booking CSV and write report artifacts.
    Fit(FitArgs),
    /// Generate a synthetic booking CSV from a known parameter vector.
    Simulate(SimulateArgs),
    /// Re-emit report artifacts from a stored bundle.json.
    Report(ReportArgs),
    /// Print the version.
    Version,
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV (public booking-dataset schema).
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated subset of: simple, hierarchical, interaction.
    #[arg(long, value_delimiter = ',', default_values = ["simple", "hierarchical", "interaction"])]
    models: Vec<String>,
    #[arg(long, default_value_t = 2)]
    chains: usize,
    #[arg(long, default_value_t = 1000)]
    draws: usize,
    #[arg(long, default_value_t = 500)]
    warmup: usize,
    #[arg(long, default_value_t = 0.90)]
    target_accept: f64,
    #[arg(long, default_value_t = 10)]
    max_tree_depth: usize,
    /// RNG seed; falls back to HIERGLM_SEED, then 42.
    #[arg(long)]
    seed: Option<u64>,
    /// Subsample this many rows (uniform, without replacement, seeded).
    #[arg(long)]
    sample_n: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Comma-separated subset of: json, markdown-tables, csv-draws, svg-plots.
    #[arg(long, value_delimiter = ',', default_values = ["json", "markdown-tables", "csv-draws", "svg-plots"])]
    formats: Vec<Format>,
    /// Thread-pool size for chain-level parallelism (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "simple")]
    model: String,
    /// Either `table4` or comma-separated parameter values in model order.
    #[arg(long, default_value = "table4")]
    truth: String,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Path to a bundle.json written by `fit`.
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_values = ["json", "markdown-tables", "csv-draws", "svg-plots"])]
    formats: Vec<Format>,
}

/// Sidecar record describing the generative truth of a simulated CSV.
#[derive(Serialize, Deserialize)]
struct TruthSidecar {
    model: ModelKind,
    parameters: Vec<String>,
    values: Vec<f64>,
    n: usize,
    seed: u64,
}

fn parse_model(name: &str) -> Result<ModelKind, String> {
    match name {
        "simple" => Ok(ModelKind::Simple),
        "hierarchical" => Ok(ModelKind::Hierarchical),
        "interaction" => Ok(ModelKind::Interaction),
        other => Err(format!(
            "unknown model `{other}` (expected simple, hierarchical, interaction)"
        )),
    }
}

fn spec_for(kind: ModelKind) -> ModelSpec {
    match kind {
        ModelKind::Simple => ModelSpec::simple(),
        ModelKind::Hierarchical => ModelSpec::hierarchical(),
        ModelKind::Interaction => ModelSpec::interaction(),
    }
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("HIERGLM_SEED")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(42)
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn ingest_exit_code(err: &IngestError) -> u8 {
    match err {
        IngestError::FileNotFound { .. } => EXIT_IO,
        _ => EXIT_DATA,
    }
}

fn run_fit(args: FitArgs) -> ExitCode {
    if let Some(jobs) = args.jobs {
        // Determinism does not depend on the pool size; this only bounds
        // parallelism.
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            return fail(EXIT_SAMPLER, format!("cannot configure thread pool: {e}"));
        }
    }
    let models: Vec<ModelKind> = match args.models.iter().map(|m| parse_model(m)).collect() {
        Ok(models) => models,
        Err(e) => return fail(EXIT_DATA, e),
    };
    let seed = resolve_seed(args.seed);
    let config = SamplerConfig {
        chains: args.chains,
        draws: args.draws,
        warmup: args.warmup,
        target_accept: args.target_accept,
        max_tree_depth: args.max_tree_depth,
        seed,
    };

    let mut records = match ingest_csv(&args.input, &ColumnMap::default()) {
        Ok(records) => records,
        Err(e) => return fail(ingest_exit_code(&e), e),
    };
    if let Some(n) = args.sample_n {
        records = subsample(&records, n, seed);
    }

    let recipe = InputRecipe::Csv {
        path: args.input.display().to_string(),
        sample_n: args.sample_n,
    };
    let bundle = match run_pipeline(&records, &config, &models, recipe) {
        Ok(bundle) => bundle,
        Err(e @ (PipelineError::TooFewRecords(_) | PipelineError::Data(_))) => {
            return fail(EXIT_DATA, e)
        }
        Err(e @ PipelineError::Model { .. }) => return fail(EXIT_SAMPLER, e),
    };

    let formats: BTreeSet<Format> = args.formats.into_iter().collect();
    match emit_report(&bundle, &args.out_dir, &formats) {
        Ok(written) => {
            println!(
                "wrote {} files to {}",
                written.len(),
                args.out_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_IO, e),
    }
}

fn run_simulate(args: SimulateArgs) -> ExitCode {
    let kind = match parse_model(&args.model) {
        Ok(kind) => kind,
        Err(e) => return fail(EXIT_DATA, e),
    };
    let spec = spec_for(kind);
    let truth = if args.truth == "table4" {
        if kind != ModelKind::Simple {
            return fail(
                EXIT_DATA,
                "--truth table4 provides the 4 simple-model values; pass explicit values for other models",
            );
        }
        table4_truth()
    } else {
        let values: Result<Vec<f64>, _> = args
            .truth
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect();
        let values = match values {
            Ok(values) => values,
            Err(_) => return fail(EXIT_DATA, format!("cannot parse --truth `{}`", args.truth)),
        };
        match ParameterVector::new(kind, values) {
            Ok(theta) => theta,
            Err(e) => return fail(EXIT_DATA, e),
        }
    };
    if args.n < 100 {
        return fail(
            EXIT_DATA,
            format!("--n must be at least 100, got {}", args.n),
        );
    }

    let seed = resolve_seed(args.seed);
    let records = match simulate_dataset(&spec, &truth, args.n, &CovariateProfile::default(), seed)
    {
        Ok(records) => records,
        Err(e) => return fail(EXIT_DATA, e),
    };
    if let Err(e) = write_records_csv(&args.out, &records) {
        return fail(EXIT_IO, format!("cannot write {}: {e}", args.out.display()));
    }
    let sidecar_path = args.out.with_extension("truth.json");
    let sidecar = TruthSidecar {
        model: kind,
        parameters: spec.param_names(),
        values: truth.values,
        n: args.n,
        seed,
    };
    let mut text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    text.push('\n');
    if let Err(e) = std::fs::write(&sidecar_path, text) {
        return fail(
            EXIT_IO,
            format!("cannot write {}: {e}", sidecar_path.display()),
        );
    }
    println!(
        "wrote {} records to {} (truth: {})",
        args.n,
        args.out.display(),
        sidecar_path.display()
    );
    ExitCode::SUCCESS
}

fn run_report(args: ReportArgs) -> ExitCode {
    let text = match std::fs::read_to_string(&args.bundle) {
        Ok(text) => text,
        Err(e) => {
            return fail(
                EXIT_IO,
                format!("cannot read {}: {e}", args.bundle.display()),
            )
        }
    };
    let bundle: pipeline::Bundle = match serde_json::from_str(&text) {
        Ok(bundle) => bundle,
        Err(e) => return fail(EXIT_DATA, format!("invalid bundle: {e}")),
    };
    let formats: BTreeSet<Format> = args.formats.into_iter().collect();
    match emit_report(&bundle, &args.out_dir, &formats) {
        Ok(written) => {
            println!(
                "wrote {} files to {}",
                written.len(),
                args.out_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_IO, e),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Fit(args) => run_fit(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Report(args) => run_report(args),
        Command::Version => {
            println!("hierglm {}", env!("CARGO_PKG_VERSION"));
            ExitCode::SUCCESS
        }
    }
}
