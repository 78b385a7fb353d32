//! Whole pipeline on a small 2D demo beam.

mod common;

use std::fs;
use std::path::Path;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn demo_config(dir: &Path, extra_solver: &str) -> std::path::PathBuf {
    let text = format!(
        "output = \"out\"
{RATIOS}
[specimen]
preset = \"HC\"

[specimen.mesh]
dimension = \"2d\"
h_fine = 1.0
h_coarse = 4.0
corridor_half_width = 2.0

[solver]
max_deflection = 0.6
steps = 60
{extra_solver}

[calibration]
experiments = \"experiments.csv\"
c_range = [1500.0, 2500.0]
g_range = [0.05, 0.15]

[crack]
sections = {{ \"A-A\" = 8.0, \"B-B\" = 12.0 }}
anchor = [0.0, 0.0, 0.0]

[[crack.scans]]
file = \"scan.csv\"
anchor = [0.0, 0.0, 0.0]

[plots]
test = \"HC\"
"
    );
    write(dir, "project.toml", &text)
}

fn forces(dir: &Path) -> Vec<(f64, f64)> {
    let (_, rows) = csv_rows(&dir.join("out/simulate/curve.csv"));
    rows.iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect()
}

#[test]
fn demo_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    // Placeholders so that the configuration validates before the real
    // inputs exist.
    write(dir, "experiments.csv", "test,path\n");
    write(dir, "scan.csv", "y_mm,z_mm,x_mm\n");
    let cfg = demo_config(dir, "");

    let out = orthofrac(&cfg, &["simulate", "--gc", "0.0923"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = json(&dir.join("out/simulate/summary.json"));
    assert!(summary["elements"].as_u64().unwrap() <= 2000, "{summary}");
    let manifest = json(&dir.join("out/simulate/manifest.json"));
    assert_eq!(manifest["overrides"]["gc"].as_f64(), Some(0.0923));
    assert_eq!(manifest["partial"], false);

    let curve = forces(dir);
    let peak = curve.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let at_peak: Vec<usize> = (0..curve.len()).filter(|&i| curve[i].1 == peak).collect();
    assert_eq!(at_peak.len(), 1, "peak force must be attained once");
    assert!(curve.last().unwrap().1 < 0.5 * peak, "no drop after the peak");

    // AT1 stays linear until damage starts: secant slope within 0.5 %.
    let (_, steps) = csv_rows(&dir.join("out/simulate/steps.csv"));
    let elastic: Vec<(f64, f64)> = steps
        .iter()
        .filter(|r| r[6].parse::<f64>().unwrap() == 0.0)
        .map(|r| (r[1].parse().unwrap(), r[2].parse().unwrap()))
        .collect();
    assert!(elastic.len() >= 5, "{} elastic steps", elastic.len());
    let k0 = elastic[0].1 / elastic[0].0;
    for (u, f) in &elastic {
        assert!((f / u / k0 - 1.0).abs() < 5e-3, "secant {} vs {k0}", f / u);
    }

    let out = orthofrac(&cfg, &["extract-crack"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (_, sections) = csv_rows(&dir.join("out/extract-crack/sections.csv"));
    assert!(sections.iter().any(|r| r[1] == "A-A"), "no A-A section");

    // Perturbed copy of the numerical crack as the scan.
    let (header, nodes) = csv_rows(&dir.join("out/extract-crack/average.csv"));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut scan = header.join(",") + "\n";
    for r in &nodes {
        let x: f64 = r[2].parse().unwrap();
        scan.push_str(&format!("{},{},{}\n", r[0], r[1], x + rng.random_range(-0.8..=0.8)));
    }
    write(dir, "scan.csv", &scan);
    let out = orthofrac(&cfg, &["compare-crack"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = json(&dir.join("out/compare-crack/report.json"));
    let max = report["max_deviation"].as_f64().unwrap();
    assert!(max <= 1.0, "deviation {max}");

    // Two repetitions of different shape: the mean is the midpoint of the
    // envelope at every grid point.
    let reps: [Box<dyn Fn(f64, f64) -> (f64, f64)>; 2] =
        [Box::new(|u, f| (u, 0.9 * f)), Box::new(|u, f| (1.1 * u, f * (1.0 + 0.3 * u)))];
    let mut manifest = String::from("test,path\n");
    for (k, map) in reps.iter().enumerate() {
        let mut s = String::from("displacement_mm,force_N\n");
        for (u, f) in &curve {
            let (a, b) = map(*u, *f);
            s.push_str(&format!("{a},{b}\n"));
        }
        write(dir, &format!("rep{k}.csv"), &s);
        manifest.push_str(&format!("HC,rep{k}.csv\n"));
    }
    write(dir, "experiments.csv", &manifest);
    let out = orthofrac(&cfg, &["export-plots"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let bundles: Vec<String> = fs::read_dir(dir.join("out/export-plots"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    assert_eq!(bundles.len(), 3, "{bundles:?}");
    let (header, rows) = csv_rows(&dir.join("out/export-plots/curves.csv"));
    assert_eq!(header.len(), 5);
    for r in &rows {
        let v: Vec<f64> = r[2..].iter().map(|s| s.parse().unwrap()).collect();
        assert!(v[1] <= v[0] + 1e-9 && v[0] <= v[2] + 1e-9, "{r:?}");
        assert!((v[0] - 0.5 * (v[1] + v[2])).abs() <= 1e-9 * (1.0 + v[0].abs()), "{r:?}");
    }

    // Without repetitions the envelope columns are left out.
    write(dir, "experiments.csv", "test,path\n");
    assert_eq!(code(&orthofrac(&cfg, &["export-plots"])), 0);
    let (header, _) = csv_rows(&dir.join("out/export-plots/curves.csv"));
    assert_eq!(header, ["deflection_mm", "numerical_N"]);

    let out = orthofrac(&cfg, &["simulate", "--model", "AT2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(json(&dir.join("out/simulate/manifest.json"))["overrides"]["model"], "AT2");
}

#[test]
fn solver_failure_keeps_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(dir, "experiments.csv", "test,path\n");
    write(dir, "scan.csv", "y_mm,z_mm,x_mm\n");
    let cfg = demo_config(dir, "max_stagger_iters = 1");
    let out = orthofrac(&cfg, &["simulate"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    let manifest = json(&dir.join("out/simulate/manifest.json"));
    assert_eq!(manifest["partial"], true);
    let summary = json(&dir.join("out/simulate/summary.json"));
    assert_eq!(summary["completed"], false);
    assert!(forces(dir).len() > 2, "converged steps are kept");
}

#[test]
fn export_without_simulation_is_a_missing_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "experiments.csv", "test,path\n");
    write(tmp.path(), "scan.csv", "y_mm,z_mm,x_mm\n");
    let cfg = demo_config(tmp.path(), "");
    let out = orthofrac(&cfg, &["export-plots"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("simulate"), "{}", stderr(&out));
}
