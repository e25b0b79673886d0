use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use rangeloc::analysis::{samples_csv, sample_set_s, trace_csv, trace_hull, HullSettings, DEFAULT_BETAS};
use rangeloc::core::Warning;
use rangeloc::experiment::{localize, parse_algorithms, run_experiment, Algorithm, AlgorithmSettings, ExperimentConfig};
use rangeloc::io::{read_anchors, read_ranges};
use rangeloc::sdp::SolveStatus;
use rangeloc::slcp::{build_slcp, Factorization};
use rangeloc::Error;

#[derive(Parser)]
#[command(name = "rangeloc", version, about = "Range-based source localization by semidefinite relaxation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and print the RMSE table.
    Simulate(SimulateArgs),
    /// Locate a source from an anchor file and a range file.
    Localize(LocalizeArgs),
    /// Trace the boundary of the relaxed image set and sample the exact one.
    Hull(HullArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON experiment configuration; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma separated subset of slcp,slnn,sll1-ad,sll1-md,sll1-sd,srls.
    #[arg(long)]
    algos: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
    /// Directory for report.csv and report.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct LocalizeArgs {
    anchors: PathBuf,
    ranges: PathBuf,
    #[arg(long, default_value = "slnn")]
    algo: String,
    /// Use the exhaustive phase search with this many points (slcp, m = 3).
    #[arg(long)]
    grid_points: Option<usize>,
}

#[derive(Args)]
struct HullArgs {
    anchors: PathBuf,
    ranges: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BETAS)]
    betas: usize,
    /// Random points of the exact image set to emit.
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gap threshold relative to the traced diameter.
    #[arg(long)]
    threshold: Option<f64>,
    /// Trace in the raw image axes instead of the unit-scaled ones.
    #[arg(long)]
    raw_axes: bool,
    /// Sweep the whole circle of directions (conjectural boundary).
    #[arg(long)]
    full: bool,
    /// Directory for trace.csv and samples.csv; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

/// Exit status 2 for bad input, 1 for solver trouble.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. }
        | Error::InvalidInput(_)
        | Error::DimensionMismatch(_)
        | Error::LengthMismatch { .. }
        | Error::Io(_) => 2,
        _ => 1,
    }
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Error> {
    match jobs {
        Some(0) => Err(Error::InvalidInput("--jobs must be positive".into())),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::InvalidInput(e.to_string())),
        None => Ok(f()),
    }
}

fn with_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { line, message } => Error::Parse { line, message: format!("{}: {message}", path.display()) },
        Error::Io(m) => Error::Io(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let mut config = match &args.config {
        Some(p) => ExperimentConfig::from_json(&std::fs::read_to_string(p).map_err(|e| with_file(p, e.into()))?)
            .map_err(|e| with_file(p, e))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(a) = &args.algos {
        config.algorithms = parse_algorithms(a)?;
    }
    if let Some(r) = args.runs {
        config.runs = r;
    }
    if let Some(o) = args.out {
        config.output = Some(o);
    }
    let report = with_jobs(args.jobs, || run_experiment(&config))??;
    print!("{}", report.to_table());
    if let Some(dir) = &config.output {
        report.write_to(dir)?;
        eprintln!("wrote {}", dir.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct LocalizeOutput {
    algorithm: Algorithm,
    position: Vec<f64>,
    eig_ratio: f64,
    objective: f64,
    status: SolveStatus,
    iterations: usize,
    warnings: Vec<Warning>,
}

fn localize_cmd(args: LocalizeArgs) -> Result<(), Error> {
    let algorithm: Algorithm = args.algo.parse()?;
    let anchors = read_anchors(&args.anchors).map_err(|e| with_file(&args.anchors, e))?;
    let ranges = read_ranges(&args.ranges).map_err(|e| with_file(&args.ranges, e))?;
    let settings = AlgorithmSettings {
        factorization: match args.grid_points {
            Some(points) => Factorization::GridSearch { points },
            None => Factorization::Eigen,
        },
        ..Default::default()
    };
    let res = localize(algorithm, &anchors, &ranges, &settings)?;
    let out = LocalizeOutput {
        algorithm,
        position: res.position.iter().copied().collect(),
        eig_ratio: res.eig_ratio,
        objective: res.objective,
        status: res.solver_status,
        iterations: res.iterations,
        warnings: res.warnings,
    };
    println!("{}", serde_json::to_string_pretty(&out).expect("output serializes"));
    if res.solver_status == SolveStatus::Failed {
        return Err(Error::NumericalFailure("solver did not converge".into()));
    }
    Ok(())
}

fn hull(args: HullArgs) -> Result<(), Error> {
    let anchors = read_anchors(&args.anchors).map_err(|e| with_file(&args.anchors, e))?;
    let ranges = read_ranges(&args.ranges).map_err(|e| with_file(&args.ranges, e))?;
    let data = build_slcp(&anchors, &ranges)?;
    let base = if args.raw_axes { HullSettings::default() } else { HullSettings::convexity() };
    let settings = HullSettings {
        gap_threshold: args.threshold.unwrap_or(base.gap_threshold),
        full_boundary: args.full,
        ..base
    };
    let trace = with_jobs(args.jobs, || trace_hull(&data.c, &data.r, args.betas, &settings))??;
    for (b, e) in &trace.skipped {
        eprintln!("warning: direction {b} skipped: {e}");
    }
    if trace.conjectural {
        eprintln!("note: full-circle boundary is conjectural");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (su, sv) = trace.axis_scale;
    let samples: Vec<(f64, f64)> = sample_set_s(&data.c, &data.r, args.samples, &mut rng)?
        .into_iter()
        .map(|(u, v)| (u / su, v / sv))
        .collect();
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("trace.csv"), trace_csv(&trace))?;
            std::fs::write(dir.join("samples.csv"), samples_csv(&samples))?;
            eprintln!("wrote {}", dir.display());
        }
        None => {
            print!("{}", trace_csv(&trace));
            println!();
            print!("{}", samples_csv(&samples));
        }
    }
    eprintln!("gaps: {}", trace.gaps.len());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Localize(a) => localize_cmd(a),
        Command::Hull(a) => hull(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
