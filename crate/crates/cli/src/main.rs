use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ubp_core::dataset::load_schema;
use ubp_core::eval::SweepOptions;
use ubp_core::imputers::impute_with;
use ubp_core::{
    corrupt_mcar, score, sweep, AttributeSpec, CorruptionPlan, Dataset, Error, ImputeOptions, ImputerSpec,
    LoadOptions, Method, SweepConfig, TrainConfig, TrainedModel,
};

#[derive(Parser)]
#[command(name = "ubp", version, about = "Missing-value imputation by unsupervised backpropagation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Remove a fraction of known cells at random (MCAR).
    Corrupt(CorruptArgs),
    /// Fill the missing cells of a dataset.
    Impute(ImputeArgs),
    /// Score an imputed dataset against the original on the removed cells.
    Evaluate(EvaluateArgs),
    /// Run a corrupt/impute/score sweep described by a JSON config.
    Sweep(SweepArgs),
    /// Decode a grid of latent points from a trained model.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct CorruptArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Percentage of cells to remove, in (0, 100).
    #[arg(long, value_parser = parse_sparsity)]
    u: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Corrupted CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    plan_out: Option<PathBuf>,
    /// JSON schema for the input file.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args)]
struct ImputeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Method spec: name(:key=value(,key=value)*)?, e.g. ubp:t=2,hidden=8
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Completed CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Where to write the trained model (nlpca and ubp only).
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long, value_parser = parse_positive)]
    eta_start: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    eta_floor: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    gamma: Option<f64>,
    #[arg(long, value_parser = parse_non_negative)]
    lambda: Option<f64>,
    /// Epoch cap per training phase.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_epochs: Option<u64>,
    /// Fraction of known cells held out to score convergence, in [0, 1).
    #[arg(long, value_parser = parse_fraction)]
    holdout_fraction: Option<f64>,
    /// Compute the latent gradient before the weight update.
    #[arg(long)]
    h_before_w: bool,
    #[arg(long, value_parser = parse_positive)]
    latent_init_std: Option<f64>,
}

impl TrainFlags {
    fn apply(&self, mut c: TrainConfig) -> TrainConfig {
        if let Some(v) = self.eta_start {
            c.eta_start = v;
        }
        if let Some(v) = self.eta_floor {
            c.eta_floor = v;
        }
        if let Some(v) = self.gamma {
            c.gamma = v;
        }
        if let Some(v) = self.lambda {
            c.lambda = v;
        }
        if let Some(v) = self.max_epochs {
            c.max_epochs_per_phase = v as usize;
        }
        if let Some(v) = self.holdout_fraction {
            c.holdout_fraction = v;
        }
        if let Some(v) = self.latent_init_std {
            c.latent_init_std = v;
        }
        c.h_before_w |= self.h_before_w;
        c
    }
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    imputed: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Per-run CSV; standard output when omitted.
    #[arg(long)]
    csv_out: Option<PathBuf>,
    /// Best-of-grid and pairwise comparisons as JSON.
    #[arg(long)]
    summary_out: Option<PathBuf>,
    /// Best-of-grid error against sparsity as gnuplot-ready TSV.
    #[arg(long)]
    curves_out: Option<PathBuf>,
    /// Worker threads; overrides the config file.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Two latent dimensions to vary, e.g. 0,1
    #[arg(long, default_value = "0,1", value_parser = parse_dims)]
    dims: (usize, usize),
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(2..))]
    steps: u64,
    /// Axis bounds lo0,hi0,lo1,hi1; the observed latent ranges when omitted.
    #[arg(long, value_parser = parse_bounds)]
    bounds: Option<Bounds>,
    #[arg(long)]
    out: Option<PathBuf>,
}

type Bounds = [(f64, f64); 2];

fn parse_sparsity(s: &str) -> Result<f64, String> {
    let u: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if u > 0.0 && u < 100.0 {
        Ok(u)
    } else {
        Err(format!("u must lie in (0, 100), got {u}"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("'{s}' is not a positive number")),
    }
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("'{s}' is not a non-negative number")),
    }
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (0.0..1.0).contains(&v) => Ok(v),
        _ => Err(format!("'{s}' is not in [0, 1)")),
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => match (a.parse(), b.parse()) {
            (Ok(a), Ok(b)) if a != b => Ok((a, b)),
            _ => Err(format!("'{s}' is not two distinct dimension indices")),
        },
        _ => Err(format!("expected two indices like 0,1, got '{s}'")),
    }
}

fn parse_bounds(s: &str) -> Result<Bounds, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("'{s}' is not four numbers"))?;
    match v.as_slice() {
        &[a, b, c, d] if a < b && c < d => Ok([(a, b), (c, d)]),
        _ => Err(format!("expected lo0,hi0,lo1,hi1 with lo < hi, got '{s}'")),
    }
}

fn load(path: &Path, schema: Option<&Path>) -> ubp_core::Result<Dataset> {
    let schema = schema.map(load_schema).transpose()?;
    Dataset::load(path, schema.as_deref(), &LoadOptions::default())
}

fn load_with(path: &Path, attrs: &[AttributeSpec]) -> ubp_core::Result<Dataset> {
    Dataset::load(path, Some(attrs), &LoadOptions::default())
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_text(path: &Path, text: &str) -> ubp_core::Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn run_corrupt(a: &CorruptArgs) -> ubp_core::Result<()> {
    let ds = load(&a.input, a.schema.as_deref())?;
    let (corrupted, plan) = corrupt_mcar(&ds, a.u, a.seed)?;
    let mut w = output(a.out.as_deref())?;
    corrupted.write_csv(&mut w, ubp_core::dataset::MISSING_TOKEN)?;
    w.flush()?;
    if let Some(p) = &a.plan_out {
        write_text(p, &plan.to_json()?)?;
    }
    eprintln!("removed {} of {} cells", plan.removed.len(), ds.n_rows() * ds.n_attrs());
    Ok(())
}

fn run_impute(a: &ImputeArgs) -> ubp_core::Result<()> {
    if a.model_out.is_some() && !matches!(a.method, Method::Ubp { .. } | Method::Nlpca { .. }) {
        return Err(Error::Argument("--model-out needs a ubp or nlpca method".into()));
    }
    let ds = load(&a.input, a.schema.as_deref())?;
    let opts = ImputeOptions {
        train: a.train.apply(TrainConfig::default()),
    };
    opts.train.validate()?;
    let spec = ImputerSpec::new(a.method.clone(), a.seed);
    let result = impute_with(&ds, &spec, &opts, &mut |rec| eprintln!("{rec}"))?;
    let mut w = output(a.out.as_deref())?;
    result.completed.write_csv(&mut w, ubp_core::dataset::MISSING_TOKEN)?;
    w.flush()?;
    if let Some(p) = &a.model_out {
        match &result.trained {
            Some(tm) => write_text(p, &serde_json::to_string(tm)?)?,
            None => return Err(Error::State("the dataset had no missing cells, so no model was trained".into())),
        }
    }
    for (k, v) in &result.diagnostics {
        eprintln!("{k}={v}");
    }
    Ok(())
}

fn run_evaluate(a: &EvaluateArgs) -> ubp_core::Result<()> {
    let original = load(&a.original, a.schema.as_deref())?;
    let imputed = load_with(&a.imputed, original.attrs())?;
    let plan = CorruptionPlan::from_json(&fs::read_to_string(&a.plan)?)?;
    let report = score(&original, &imputed, &plan)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn run_sweep(a: &SweepArgs) -> ubp_core::Result<()> {
    let config = SweepConfig::from_json(&fs::read_to_string(&a.config)?)?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    let datasets = config.load_datasets(base)?;
    let grids = config.grids()?;
    let opts = SweepOptions {
        workers: a.workers.map(|w| w as usize).or(config.workers),
        impute: ImputeOptions {
            train: config.train.clone().unwrap_or_default(),
        },
    };
    opts.impute.train.validate()?;
    let result = sweep(&datasets, &config.u_levels, &config.seeds, &grids, &opts)?;
    for r in &result.records {
        if let Some(e) = &r.error {
            eprintln!("failed: dataset={} u={} seed={} spec={}: {e}", r.dataset, r.u, r.seed, r.spec);
        }
    }
    let mut w = output(a.csv_out.as_deref())?;
    result.write_csv(&mut w)?;
    w.flush()?;
    if let Some(p) = &a.summary_out {
        let summary = result.summary(&config.reference)?;
        write_text(p, &serde_json::to_string_pretty(&summary)?)?;
    }
    if let Some(p) = &a.curves_out {
        let mut w = output(Some(p))?;
        result.write_curves_tsv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn run_generate(a: &GenerateArgs) -> ubp_core::Result<()> {
    let model: TrainedModel = serde_json::from_str(&fs::read_to_string(&a.model)?)?;
    let grid = model.sample_latent_grid(a.dims, a.steps as usize, a.bounds)?;
    let mut w = output(a.out.as_deref())?;
    let t = model.latent.dims();
    let header: Vec<String> = (0..t)
        .map(|i| format!("latent{i}"))
        .chain((0..model.model.outputs()).map(|i| format!("out{i}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for p in &grid.points {
        let row: Vec<String> = p.latent.iter().chain(&p.outputs).map(f64::to_string).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Corrupt(a) => run_corrupt(a),
        Command::Impute(a) => run_impute(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Generate(a) => run_generate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Argument(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
