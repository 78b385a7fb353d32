#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn orthofrac(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orthofrac"))
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::create_dir_all(p.parent().unwrap()).unwrap();
    fs::write(&p, text).unwrap();
    p
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// (path, sha256) pairs of a manifest's outputs.
pub fn outputs(manifest: &Path) -> Vec<(String, String)> {
    json(manifest)["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| (o["path"].as_str().unwrap().to_string(), o["sha256"].as_str().unwrap().to_string()))
        .collect()
}

pub const VELOCITIES: &str = "propagation,polarization,velocity_m_s
V,V,2730
V,T,2020
V,H,1476
T,V,1980
T,T,2530
T,H,1696
H,V,1799
H,T,1745
H,H,2332
";

/// Ratio block for configs that skip estimate-elastic.
pub const RATIOS: &str = "[material.ratios]
normal = [1.0, 0.8590, 0.7297]
coupling = [0.8386, 0.6845, 0.7467]
shear = [0.3972, 0.3598, 0.5367]
";

/// Reads the numeric columns of a CSV with a header row.
pub fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    (header, lines.map(|l| l.split(',').map(str::to_string).collect()).collect())
}
