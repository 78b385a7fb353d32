//! CSV input and output for curves, wave speeds and repetition manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::curve::LoadDeflectionCurve;
use crate::error::{Error, Result};

fn parse_err(origin: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: origin.into(), line, message: message.into() }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn number(field: &str, origin: &str, line: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(origin, line, format!("'{field}' is not a finite number")))
}

/// Two numeric columns (deflection mm, force N) after a header row.
pub fn parse_curve_csv(text: &str, origin: &str, tag: &str) -> Result<LoadDeflectionCurve> {
    let mut pairs = Vec::new();
    let mut rdr = reader(text);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(origin, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() < 2 {
            return Err(parse_err(origin, line, "expected displacement_mm, force_N"));
        }
        pairs.push((number(&rec[0], origin, line)?, number(&rec[1], origin, line)?));
    }
    LoadDeflectionCurve::from_pairs(tag, &pairs).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{origin}: {m}")),
        other => other,
    })
}

pub fn read_curve_csv(path: &Path) -> Result<LoadDeflectionCurve> {
    let tag = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_curve_csv(&fs::read_to_string(path)?, &path.display().to_string(), &tag)
}

pub fn curve_to_csv(curve: &LoadDeflectionCurve) -> String {
    let mut s = String::from("displacement_mm,force_N\n");
    for (u, f) in curve.iter() {
        s.push_str(&format!("{u},{f}\n"));
    }
    s
}

pub fn write_curve_csv(path: &Path, curve: &LoadDeflectionCurve) -> Result<()> {
    fs::write(path, curve_to_csv(curve))?;
    Ok(())
}

/// Rows (propagation, polarization, speed m/s), e.g. `V,T,2020`.
pub fn parse_velocity_csv(text: &str, origin: &str) -> Result<Vec<(char, char, f64)>> {
    let mut out = Vec::new();
    for rec in reader(text).records() {
        let rec = rec.map_err(|e| parse_err(origin, 0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() < 3 {
            return Err(parse_err(origin, line, "expected propagation, polarization, velocity"));
        }
        let dir = |f: &str| -> Result<char> {
            let mut chars = f.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(c.to_ascii_uppercase()),
                _ => Err(parse_err(origin, line, format!("'{f}' is not a direction letter"))),
            }
        };
        out.push((dir(&rec[0])?, dir(&rec[1])?, number(&rec[2], origin, line)?));
    }
    Ok(out)
}

/// Rows (key, path); relative paths are resolved against the manifest's
/// directory. Keys keep their first-seen order within each group.
pub fn parse_manifest(text: &str, origin: &str, base: &Path) -> Result<BTreeMap<String, Vec<PathBuf>>> {
    let mut out: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    for rec in reader(text).records() {
        let rec = rec.map_err(|e| parse_err(origin, 0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() < 2 || rec[0].is_empty() || rec[1].is_empty() {
            return Err(parse_err(origin, line, "expected key, path"));
        }
        let p = PathBuf::from(&rec[1]);
        out.entry(rec[0].to_string()).or_default().push(if p.is_absolute() { p } else { base.join(p) });
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<BTreeMap<String, Vec<PathBuf>>> {
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&fs::read_to_string(path)?, &path.display().to_string(), base)
}
