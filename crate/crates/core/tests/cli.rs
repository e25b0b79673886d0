use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rangeloc"))
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Position from three exact ranges by differencing the circle equations.
fn trilaterate(a: &[(f64, f64); 3], r: &[f64; 3]) -> (f64, f64) {
    let row = |i: usize| {
        let (x0, y0) = a[0];
        let (xi, yi) = a[i];
        (
            2.0 * (xi - x0),
            2.0 * (yi - y0),
            r[0] * r[0] - r[i] * r[i] + xi * xi - x0 * x0 + yi * yi - y0 * y0,
        )
    };
    let (a1, b1, c1) = row(1);
    let (a2, b2, c2) = row(2);
    let det = a1 * b2 - a2 * b1;
    ((c1 * b2 - c2 * b1) / det, (a1 * c2 - a2 * c1) / det)
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn localize_exact_ranges_hits_intersection() {
    let tmp = TempDir::new().unwrap();
    let anchors = [(0.0, 0.0), (7.0, 1.0), (2.0, 8.0)];
    let source = (3.3, 2.9);
    let ranges = anchors.map(|a| dist(a, source));
    let oracle = trilaterate(&anchors, &ranges);
    assert!(dist(oracle, source) < 1e-12);
    let af = write(tmp.path(), "a.csv", "# x,y\n0,0\n7,1\n2,8\n");
    let rf = write(tmp.path(), "r.csv", &ranges.map(|r| format!("{r:e}")).join(","));
    for algo in ["slcp", "slnn", "sll1-ad", "srls"] {
        let out = run(bin().args(["localize", &af, &rf, "--algo", algo]));
        assert!(out.status.success(), "{algo}: {}", String::from_utf8_lossy(&out.stderr));
        let js: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        let p = (js["position"][0].as_f64().unwrap(), js["position"][1].as_f64().unwrap());
        assert!(dist(p, oracle) < 1e-4, "{algo}: {p:?}");
        assert_eq!(js["status"], "Optimal");
        assert!(js["eig_ratio"].as_f64().unwrap() > 0.0);
        assert!(js["objective"].is_number());
    }
}

#[test]
fn malformed_file_exits_2_naming_line() {
    let tmp = TempDir::new().unwrap();
    let af = write(tmp.path(), "a.csv", "0,0\n7,1\n2;8\n");
    let rf = write(tmp.path(), "r.csv", "1,2,3\n");
    let out = run(bin().args(["localize", &af, &rf]));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn slcp_rejects_3d_with_exit_2() {
    let tmp = TempDir::new().unwrap();
    let af = write(tmp.path(), "a.csv", "0,0,0\n5,0,0\n0,5,0\n0,0,5\n");
    let rf = write(tmp.path(), "r.csv", "3,4,4,4\n");
    let out = run(bin().args(["localize", &af, &rf, "--algo", "slcp"]));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension"));
    let out = run(bin().args(["hull", &af, &rf]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_algorithm_and_range_count_mismatch() {
    let tmp = TempDir::new().unwrap();
    let af = write(tmp.path(), "a.csv", "0,0\n5,0\n0,5\n");
    let rf = write(tmp.path(), "r.csv", "3,4\n");
    assert_eq!(run(bin().args(["localize", &af, &rf])).status.code(), Some(2));
    let rf = write(tmp.path(), "r3.csv", "3,4,4\n");
    assert_eq!(run(bin().args(["localize", &af, &rf, "--algo", "nope"])).status.code(), Some(2));
}

#[test]
fn hull_two_anchors_matches_closed_form() {
    let tmp = TempDir::new().unwrap();
    let anchors = [(0.0, 0.0), (4.0, 1.0)];
    let r = [2.2, 3.1];
    let af = write(tmp.path(), "a.csv", "0,0\n4,1\n");
    let rf = write(tmp.path(), "r.csv", "2.2,3.1\n");
    let out_dir = tmp.path().join("hull");
    let out = run(bin().args(["hull", &af, &rf, "--raw-axes", "--betas", "41", "--samples", "50", "--out"]).arg(&out_dir));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // u(φ) = |c1 + c2 e^{jφ}|^2 with c_i = (a_i - mean) r_i, v(φ) = |r1 + r2 e^{jφ}|^2
    let mean = ((anchors[0].0 + anchors[1].0) / 2.0, (anchors[0].1 + anchors[1].1) / 2.0);
    let c: Vec<(f64, f64)> = anchors.iter().zip(r).map(|(a, ri)| ((a.0 - mean.0) * ri, (a.1 - mean.1) * ri)).collect();
    let curve = |phi: f64| {
        let (co, si) = (phi.cos(), phi.sin());
        let x = c[0].0 + c[1].0 * co - c[1].1 * si;
        let y = c[0].1 + c[1].0 * si + c[1].1 * co;
        (x * x + y * y, r[0] * r[0] + r[1] * r[1] + 2.0 * r[0] * r[1] * co)
    };
    let closest = |p: (f64, f64)| {
        let n = 20_000;
        let step = std::f64::consts::TAU / n as f64;
        let k = (0..n).min_by(|&i, &j| dist(p, curve(i as f64 * step)).total_cmp(&dist(p, curve(j as f64 * step)))).unwrap();
        let (mut lo, mut hi) = ((k as f64 - 1.0) * step, (k as f64 + 1.0) * step);
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if dist(p, curve(m1)) < dist(p, curve(m2)) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        dist(p, curve(0.5 * (lo + hi)))
    };
    let trace = rows(&std::fs::read_to_string(out_dir.join("trace.csv")).unwrap());
    assert_eq!(trace.len(), 41);
    for row in &trace {
        let d = closest((row[1], row[2]));
        assert!(d < 1e-5, "{row:?} is {d} from the arc");
    }
    let samples = rows(&std::fs::read_to_string(out_dir.join("samples.csv")).unwrap());
    assert_eq!(samples.len(), 50);
    for s in &samples {
        assert!(closest((s[0], s[1])) < 1e-9);
    }
}

#[test]
fn hull_noiseless_five_anchors_has_one_row_per_direction() {
    let tmp = TempDir::new().unwrap();
    let anchors = [(-8.0, 1.0), (6.5, -7.0), (3.0, 9.0), (-2.0, -4.5), (9.0, 2.0)];
    let x = (0.7, -1.2);
    let af = write(tmp.path(), "a.csv", &anchors.map(|a| format!("{},{}", a.0, a.1)).join("\n"));
    let rf = write(tmp.path(), "r.csv", &anchors.map(|a| dist(a, x).to_string()).join(","));
    let out = run(bin().args(["hull", &af, &rf, "--betas", "37", "--samples", "10"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let (trace, samples) = text.split_once("\n\n").unwrap();
    assert_eq!(trace.lines().next(), Some("beta,u,v,gap"));
    assert_eq!(trace.lines().count(), 1 + 37);
    assert_eq!(samples.lines().count(), 1 + 10);
}

#[test]
fn simulate_is_byte_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "cfg.json",
        r#"{"m": 5, "n": 3, "runs": 6, "seed": 11,
            "noise": {"model": "laplacian", "sigmas": [0.25, 0.5]},
            "algorithms": ["slnn", "sll1-ad", "sll1-sd", "srls"]}"#,
    );
    let mut outs = Vec::new();
    for (k, jobs) in ["1", "2"].into_iter().enumerate() {
        let dir = tmp.path().join(format!("run{k}"));
        let out = run(bin().args(["simulate", "--config", &cfg, "--jobs", jobs, "--out"]).arg(&dir));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outs.push((
            out.stdout,
            std::fs::read(dir.join("report.json")).unwrap(),
            std::fs::read(dir.join("report.csv")).unwrap(),
        ));
    }
    assert_eq!(outs[0], outs[1]);
    let csv = String::from_utf8(outs[0].2.clone()).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 4);
}

#[test]
fn simulate_flags_override_config() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("o");
    let out = run(bin().args(["simulate", "--runs", "2", "--algos", "srls", "--seed", "5", "--out"]).arg(&dir));
    assert!(out.status.success());
    let js: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(js["seed"], 5);
    assert_eq!(js["runs"], 2);
    assert_eq!(js["rows"].as_array().unwrap().len(), 4);
    let bad = write(tmp.path(), "bad.json", "{\n  \"runs\": 0\n}");
    assert_eq!(run(bin().args(["simulate", "--config", &bad])).status.code(), Some(2));
    let bad = write(tmp.path(), "bad2.json", "{\n  \"runs\": 3,\n  \"m\": \"x\"\n}");
    let out = run(bin().args(["simulate", "--config", &bad]));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    let out = run(bin().args(["simulate", "--algos", "slcp", "--config", &write(tmp.path(), "c3.json", r#"{"n": 3}"#)]));
    assert_eq!(out.status.code(), Some(2));
}
