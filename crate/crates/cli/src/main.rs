//! `covswarm`: run coverage-guided test campaigns, quantize models,
//! benchmark the optimizers and inspect reports.
//!
//! Exit codes: 0 success, 1 findings (with `--fail-on-finding`), weight
//! overflow, benchmark regression or a report violating its invariants,
//! 2 usage, configuration or I/O errors.

mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use covswarm_core::dataset::{ingest_idx, ingest_png_dir, sample_seeds, SeedInput};
use covswarm_core::model::{quantize_model, Model, QuantizeError};
use covswarm_core::optimizer::bench::{run_benchmark, Objective};
use covswarm_core::optimizer::{OptimizerKind, OptimizerParams};
use covswarm_core::search::{SearchEngine, TestReport};
use serde::{Deserialize, Serialize};

use crate::config::{CampaignFile, DatasetSource};

#[derive(Debug, Parser)]
#[command(name = "covswarm", version, about = "Coverage-guided swarm search for image-classifier tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a campaign described by a TOML file (or a previous report).
    Run(RunArgs),
    /// Round every parameter of a model to binary16 and write the twin.
    Quantize(QuantizeArgs),
    /// Run an optimizer on a benchmark function and write CSV trajectories.
    BenchOpt(BenchArgs),
    /// Summarize a report and check its invariants.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Exit with status 1 when the campaign stores any finding.
    #[arg(long)]
    fail_on_finding: bool,
    /// Write every finding's mutant as a PNG under `<output_dir>/findings`.
    #[arg(long)]
    export_png: bool,
    /// Override the configured optimizer.
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    /// Override the search RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of sampled seed inputs.
    #[arg(long)]
    sample_size: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct QuantizeArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    out_manifest: PathBuf,
    #[arg(long)]
    out_weights: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    kind: OptimizerKind,
    #[arg(long, default_value = "sphere", value_parser = parse_objective)]
    function: Objective,
    #[arg(long, default_value_t = 5)]
    dim: usize,
    #[arg(long, default_value_t = 20)]
    pop: usize,
    #[arg(long, default_value_t = 300)]
    iters: usize,
    /// Number of runs, seeded 0, 1, ...
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// CSV output (`seed,iteration,best_value`); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fail when the median best value is worse than twice this baseline.
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Store this run's median best value as a baseline.
    #[arg(long)]
    save_baseline: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    report: PathBuf,
    /// Also list every finding.
    #[arg(long)]
    findings: bool,
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    s.parse()
}

/// Outcome of a command that ran to completion.
enum Status {
    Clean,
    Flagged,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Quantize(args) => cmd_quantize(args),
        Command::BenchOpt(args) => cmd_bench_opt(args),
        Command::Inspect(args) => cmd_inspect(args),
    };
    match result {
        Ok(Status::Clean) => ExitCode::SUCCESS,
        Ok(Status::Flagged) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn load_seeds(source: &DatasetSource) -> Result<Vec<SeedInput>> {
    Ok(match source {
        DatasetSource::Idx { images, labels } => ingest_idx(images, labels)?,
        DatasetSource::Png { dir, labels } => ingest_png_dir(dir, labels)?,
    })
}

fn cmd_run(args: RunArgs) -> Result<Status> {
    let mut file = CampaignFile::load(&args.config)?;
    if let Some(kind) = args.optimizer {
        file.search.optimizer = kind;
    }
    if let Some(seed) = args.seed {
        file.search.rng_seed = seed;
    }
    if let Some(n) = args.sample_size {
        file.sample_size = Some(n);
    }
    if let Some(dir) = args.output_dir {
        file.output_dir = dir;
    }
    file.check_files()?;
    file.search.validate()?;

    let dataset = load_seeds(&file.dataset).context("cannot load the dataset")?;
    let seeds = match file.sample_size {
        Some(n) => sample_seeds(&dataset, n, file.sampling_seed)?,
        None => dataset,
    };
    let model = Model::load(&file.model.manifest, &file.model.weights).context("cannot load the model")?;
    let qmodel = match (&file.model.quantized_manifest, &file.model.quantized_weights) {
        (Some(m), Some(w)) => Some(Model::load(m, w).context("cannot load the quantized model")?),
        _ if file.search.divergence_check => Some(quantize_model(&model).context("cannot quantize the model")?),
        _ => None,
    };

    let engine = SearchEngine::new(&model, qmodel.as_ref(), file.search)?;
    let mut report = engine.run_campaign(&seeds)?;
    report.campaign = Some(serde_json::to_value(&file)?);

    fs::create_dir_all(&file.output_dir)
        .with_context(|| format!("cannot create {}", file.output_dir.display()))?;
    let report_path = file.output_dir.join("report.json");
    report.write(&report_path)?;
    if args.export_png {
        report.export_pngs(&engine, &seeds, file.output_dir.join("findings"))?;
    }

    println!(
        "{} seeds ({} admitted), {} evaluations, coverage {:.2}% -> {:.2}%, {} misclassification / {} divergence findings",
        report.seed_count,
        report.admitted_seeds,
        report.evaluations,
        100.0 * report.baseline_ratio,
        100.0 * report.final_ratio,
        report.counts.misclassification,
        report.counts.divergence
    );
    println!("report written to {}", report_path.display());
    Ok(if args.fail_on_finding && report.counts.total() > 0 {
        Status::Flagged
    } else {
        Status::Clean
    })
}

fn cmd_quantize(args: QuantizeArgs) -> Result<Status> {
    let model = Model::load(&args.manifest, &args.weights)?;
    match quantize_model(&model) {
        Ok(q) => {
            q.save(&args.out_manifest, &args.out_weights)
                .with_context(|| format!("cannot write {}", args.out_weights.display()))?;
            println!("wrote {} and {}", args.out_manifest.display(), args.out_weights.display());
            Ok(Status::Clean)
        }
        Err(err @ QuantizeError::Overflow { .. }) => {
            eprintln!("error: {err}");
            Ok(Status::Flagged)
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BenchBaseline {
    kind: OptimizerKind,
    function: String,
    dim: usize,
    pop: usize,
    iters: usize,
    seeds: u64,
    median_best: f64,
}

fn cmd_bench_opt(args: BenchArgs) -> Result<Status> {
    let seeds: Vec<u64> = (0..args.seeds).collect();
    let result = run_benchmark(
        args.kind,
        args.function,
        args.dim,
        args.pop,
        args.iters,
        &seeds,
        OptimizerParams::default(),
    )?;
    match &args.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            result.write_csv(BufWriter::new(file))?;
        }
        None => result.write_csv(std::io::stdout().lock())?,
    }
    let median = result.median_best();
    eprintln!("{} on {}: median best {median:e}", args.kind, args.function.name());

    let current = BenchBaseline {
        kind: args.kind,
        function: args.function.name().to_string(),
        dim: args.dim,
        pop: args.pop,
        iters: args.iters,
        seeds: args.seeds,
        median_best: median,
    };
    if let Some(path) = &args.save_baseline {
        fs::write(path, serde_json::to_string_pretty(&current)?)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    if let Some(path) = &args.baseline {
        let stored = read_baseline(path)?;
        if (stored.kind, stored.function.as_str(), stored.dim) != (current.kind, current.function.as_str(), current.dim) {
            bail!("baseline {} was recorded for a different setup", path.display());
        }
        if !(median <= 2.0 * stored.median_best) {
            eprintln!(
                "regression: median best {median:e} exceeds twice the baseline {:e}",
                stored.median_best
            );
            return Ok(Status::Flagged);
        }
    }
    Ok(Status::Clean)
}

fn read_baseline(path: &Path) -> Result<BenchBaseline> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed baseline {}", path.display()))
}

fn cmd_inspect(args: InspectArgs) -> Result<Status> {
    let report = TestReport::read(&args.report)?;
    println!("model:        {}", report.model_name.as_deref().unwrap_or("(unnamed)"));
    println!("optimizer:    {}", report.config.optimizer);
    println!("rng seed:     {}", report.config.rng_seed);
    println!("seeds:        {} ({} admitted)", report.seed_count, report.admitted_seeds);
    println!("evaluations:  {}", report.evaluations);
    println!(
        "coverage:     {:.2}% baseline -> {:.2}% final",
        100.0 * report.baseline_ratio,
        100.0 * report.final_ratio
    );
    println!(
        "findings:     {} misclassification, {} divergence",
        report.counts.misclassification, report.counts.divergence
    );
    println!("duration:     {:.1}s", report.duration_secs);
    if args.findings {
        for f in &report.findings {
            println!(
                "  {:<17} seed {:<12} {:<10} model {} reference {} ssim {:.3}",
                f.kind.as_str(),
                f.seed_id,
                f.mutant_path.as_str(),
                f.model_label,
                f.reference_label,
                f.ssim
            );
        }
    }
    match report.check_invariants() {
        Ok(()) => Ok(Status::Clean),
        Err(problem) => {
            eprintln!("report violates its invariants: {problem}");
            Ok(Status::Flagged)
        }
    }
}
