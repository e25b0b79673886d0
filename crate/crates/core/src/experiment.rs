//! Monte Carlo harness: batches of random scenarios run through a chosen
//! set of algorithms, aggregated into RMSE tables.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::localize_srls;
use crate::core::{generate_scenario_with, AnchorSet, LocalizationResult, NoiseModel, RangeVector};
use crate::error::{Error, Result};
use crate::sdp::{SolveStatus, SolverSettings};
use crate::slcp::{solve_slcp_with, Factorization};
use crate::sll1::{sll1_ad, sll1_md, sll1_sd, Sll1Settings};
use crate::slnn::solve_slnn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Slcp,
    Slnn,
    Sll1Ad,
    Sll1Md,
    Sll1Sd,
    Srls,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Slcp,
        Algorithm::Slnn,
        Algorithm::Sll1Ad,
        Algorithm::Sll1Md,
        Algorithm::Sll1Sd,
        Algorithm::Srls,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Slcp => "slcp",
            Algorithm::Slnn => "slnn",
            Algorithm::Sll1Ad => "sll1-ad",
            Algorithm::Sll1Md => "sll1-md",
            Algorithm::Sll1Sd => "sll1-sd",
            Algorithm::Srls => "srls",
        }
    }

    /// Whether the algorithm only handles planar problems.
    pub fn planar_only(self) -> bool {
        self == Algorithm::Slcp
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidInput(format!("unknown algorithm '{s}'")))
    }
}

/// Parses a comma separated list such as `slnn,srls`.
pub fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>> {
    let algos = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Algorithm::from_str)
        .collect::<Result<Vec<_>>>()?;
    if algos.is_empty() {
        return Err(Error::InvalidInput("algorithm list is empty".into()));
    }
    Ok(algos)
}

/// Settings shared by every algorithm in a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AlgorithmSettings {
    pub solver: SolverSettings,
    /// `solver` inside this value is ignored in favour of the field above.
    pub sll1: Sll1Settings,
    pub factorization: Factorization,
}

/// Runs one algorithm on one instance.
pub fn localize(
    algorithm: Algorithm,
    anchors: &AnchorSet,
    ranges: &RangeVector,
    settings: &AlgorithmSettings,
) -> Result<LocalizationResult> {
    let sll1 = Sll1Settings { solver: settings.solver, ..settings.sll1 };
    match algorithm {
        Algorithm::Slcp => solve_slcp_with(anchors, ranges, &settings.solver, settings.factorization),
        Algorithm::Slnn => solve_slnn(anchors, ranges, &settings.solver),
        Algorithm::Sll1Ad => sll1_ad(anchors, ranges, &sll1),
        Algorithm::Sll1Md => sll1_md(anchors, ranges, &sll1),
        Algorithm::Sll1Sd => sll1_sd(anchors, ranges, &sll1),
        Algorithm::Srls => localize_srls(anchors, ranges),
    }
}

/// One noise model swept over a list of parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum NoiseGrid {
    Gaussian { sigmas: Vec<f64> },
    Laplacian { sigmas: Vec<f64> },
    SelectiveGaussian { sigma_base: f64, sigma_outliers: Vec<f64> },
}

impl NoiseGrid {
    pub fn points(&self) -> Vec<NoiseModel> {
        match self {
            NoiseGrid::Gaussian { sigmas } => sigmas.iter().map(|&sigma| NoiseModel::Gaussian { sigma }).collect(),
            NoiseGrid::Laplacian { sigmas } => sigmas.iter().map(|&sigma| NoiseModel::Laplacian { sigma }).collect(),
            NoiseGrid::SelectiveGaussian { sigma_base, sigma_outliers } => sigma_outliers
                .iter()
                .map(|&sigma_outlier| NoiseModel::SelectiveGaussian { sigma_base: *sigma_base, sigma_outlier })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub box_half_width: f64,
    pub noise: NoiseGrid,
    pub algorithms: Vec<Algorithm>,
    pub runs: usize,
    pub seed: u64,
    pub solver: SolverSettings,
    /// SL-l1 parameters; its nested solver settings are replaced by `solver`.
    pub sll1: Sll1Settings,
    /// Grid points for the three-anchor phase search; `None` uses the eigenvector.
    pub slcp_grid_points: Option<usize>,
    /// Directory receiving `report.csv` and `report.json`.
    pub output: Option<PathBuf>,
    /// Wall-clock timing makes reports differ between invocations, so it is opt-in.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            m: 5,
            n: 2,
            box_half_width: 10.0,
            noise: NoiseGrid::Gaussian { sigmas: vec![1e-3, 1e-2, 1e-1, 1.0] },
            algorithms: vec![Algorithm::Slnn, Algorithm::Srls],
            runs: 200,
            seed: 2024,
            solver: SolverSettings::default(),
            sll1: Sll1Settings::default(),
            slcp_grid_points: None,
            output: None,
            record_timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Error::InvalidInput("runs must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidInput("no algorithms selected".into()));
        }
        if !(2..=3).contains(&self.n) {
            return Err(Error::InvalidInput(format!("n must be 2 or 3, got {}", self.n)));
        }
        if self.m < 2 {
            return Err(Error::InvalidInput("m must be at least 2".into()));
        }
        if self.n != 2 {
            if let Some(a) = self.algorithms.iter().find(|a| a.planar_only()) {
                return Err(Error::DimensionMismatch(format!("{a} requires n = 2, got n = {}", self.n)));
            }
        }
        if let Some(p) = self.slcp_grid_points {
            if p == 0 || self.m != 3 {
                return Err(Error::InvalidInput("phase grid search needs m = 3 and a positive grid".into()));
            }
        }
        if !(self.box_half_width.is_finite() && self.box_half_width > 0.0) {
            return Err(Error::InvalidInput("box half width must be positive".into()));
        }
        let points = self.noise.points();
        if points.is_empty() {
            return Err(Error::InvalidInput("noise grid is empty".into()));
        }
        for p in &points {
            p.validate()?;
        }
        self.sll1.validate()
    }

    pub fn algorithm_settings(&self) -> AlgorithmSettings {
        AlgorithmSettings {
            solver: self.solver,
            sll1: self.sll1,
            factorization: match self.slcp_grid_points {
                Some(points) => Factorization::GridSearch { points },
                None => Factorization::Eigen,
            },
        }
    }
}

/// Aggregate over all runs of one algorithm at one noise point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub algorithm: Algorithm,
    pub noise: NoiseModel,
    pub runs: usize,
    pub failure_count: usize,
    pub n_tight: usize,
    /// Over all runs that did not fail; `None` when every run failed.
    pub rmse_all: Option<f64>,
    pub rmse_tight: Option<f64>,
    pub mean_iterations: f64,
    /// Seconds; `None` unless timing was requested.
    pub mean_solve_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub m: usize,
    pub n: usize,
    pub runs: usize,
    pub seed: u64,
    /// Ordered by noise point, then by algorithm in configuration order.
    pub rows: Vec<ReportRow>,
}

/// Column order of [`ExperimentReport::to_csv`].
pub const CSV_HEADER: &str =
    "algorithm,noise,runs,failure_count,n_tight,rmse_all,rmse_tight,mean_iterations,mean_solve_time";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl ExperimentReport {
    pub fn row(&self, algorithm: Algorithm, noise: &NoiseModel) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm && r.noise == *noise)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{:e},{}",
                r.algorithm,
                r.noise.label().replace(',', ";"),
                r.runs,
                r.failure_count,
                r.n_tight,
                opt(r.rmse_all),
                opt(r.rmse_tight),
                r.mean_iterations,
                opt(r.mean_solve_time)
            );
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width table for terminals.
    pub fn to_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        let mut s = format!(
            "{:<22} {:<9} {:>6} {:>6} {:>10} {:>10} {:>7} {:>10}\n",
            "noise", "algorithm", "tight", "fail", "rmse", "rmse_t", "iters", "time_s"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<22} {:<9} {:>6} {:>6} {:>10} {:>10} {:>7.2} {:>10}",
                r.noise.label(),
                r.algorithm.name(),
                r.n_tight,
                r.failure_count,
                fmt(r.rmse_all),
                fmt(r.rmse_tight),
                r.mean_iterations,
                r.mean_solve_time.map(|t| format!("{t:.4}")).unwrap_or_else(|| "-".into())
            );
        }
        s
    }

    /// Writes `report.csv` and `report.json` into `dir`.
    pub fn write_to(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.csv"), self.to_csv())?;
        std::fs::write(dir.join("report.json"), self.to_json())?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Outcome {
    estimate: Option<DVector<f64>>,
    tight: bool,
    iterations: usize,
    seconds: f64,
}

fn run_one(
    algorithm: Algorithm,
    anchors: &AnchorSet,
    ranges: &RangeVector,
    settings: &AlgorithmSettings,
    timing: bool,
) -> Outcome {
    let start = timing.then(Instant::now);
    let res = localize(algorithm, anchors, ranges, settings);
    let seconds = start.map(|t| t.elapsed().as_secs_f64()).unwrap_or(0.0);
    match res {
        Ok(r) if r.solver_status != SolveStatus::Failed && r.position.iter().all(|v| v.is_finite()) => Outcome {
            tight: r.is_tight(),
            iterations: r.iterations,
            estimate: Some(r.position),
            seconds,
        },
        Ok(_) => Outcome { estimate: None, tight: false, iterations: 0, seconds },
        Err(e) => {
            log::debug!("{algorithm} failed: {e}");
            Outcome { estimate: None, tight: false, iterations: 0, seconds }
        }
    }
}

fn sq_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm_squared()
}

/// Runs every selected algorithm on `runs` shared scenarios per noise point.
///
/// Work is spread over the current rayon pool. Results are collected in
/// index order, so the report does not depend on the number of workers.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let points = config.noise.points();
    let settings = config.algorithm_settings();
    let jobs: Vec<(usize, usize)> =
        (0..points.len()).flat_map(|p| (0..config.runs).map(move |run| (p, run))).collect();

    let per_run: Vec<Result<(DVector<f64>, Vec<Outcome>)>> = jobs
        .par_iter()
        .map(|&(p, run)| {
            let sc = generate_scenario_with(
                config.m,
                config.n,
                config.box_half_width,
                points[p],
                config.seed,
                run as u64,
            )?;
            let outs = config
                .algorithms
                .iter()
                .map(|&a| run_one(a, &sc.anchors, &sc.measured_ranges, &settings, config.record_timing))
                .collect();
            Ok((sc.source, outs))
        })
        .collect();
    let per_run = per_run.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(points.len() * config.algorithms.len());
    for (p, noise) in points.iter().enumerate() {
        let block = &per_run[p * config.runs..(p + 1) * config.runs];
        for (k, &algorithm) in config.algorithms.iter().enumerate() {
            let (mut se_all, mut se_tight) = (0.0, 0.0);
            let (mut ok, mut n_tight, mut iters, mut secs) = (0usize, 0usize, 0usize, 0.0);
            for (truth, outs) in block {
                let o = &outs[k];
                secs += o.seconds;
                if let Some(x) = &o.estimate {
                    let e = sq_err(x, truth);
                    ok += 1;
                    se_all += e;
                    iters += o.iterations;
                    if o.tight {
                        n_tight += 1;
                        se_tight += e;
                    }
                }
            }
            let rms = |se: f64, k: usize| (k > 0).then(|| (se / k as f64).sqrt());
            rows.push(ReportRow {
                algorithm,
                noise: *noise,
                runs: config.runs,
                failure_count: config.runs - ok,
                n_tight,
                rmse_all: rms(se_all, ok),
                rmse_tight: rms(se_tight, n_tight),
                mean_iterations: if ok > 0 { iters as f64 / ok as f64 } else { 0.0 },
                mean_solve_time: config.record_timing.then(|| secs / config.runs as f64),
            });
        }
    }
    Ok(ExperimentReport { m: config.m, n: config.n, runs: config.runs, seed: config.seed, rows })
}
