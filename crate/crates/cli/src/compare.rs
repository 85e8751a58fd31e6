//! Side-by-side comparison of result bundles.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::run::{fmt, RunError};

#[derive(Debug, Clone, PartialEq)]
struct TrajectoryRow {
    time: f64,
    phase: String,
    component: usize,
    mean: f64,
    var: f64,
}

/// Differences of one bundle against the first, for one record.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    /// Position of the bundle in the input list; bundle 0 is the reference.
    pub bundle: usize,
    pub time: f64,
    pub phase: String,
    pub component: usize,
    pub mean_diff: f64,
    pub var_diff: f64,
    /// `∫|p − p_ref|` over a shared density grid, when both bundles have one.
    pub pdf_l1: Option<f64>,
}

fn read_trajectory(dir: &Path) -> Result<Vec<TrajectoryRow>, RunError> {
    let path = dir.join("trajectory.csv");
    let file = File::open(&path).map_err(|e| RunError::io(&path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let bad = |why: String| RunError::IncompatibleBundles(format!("{}: {why}", path.display()));
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column `{name}`")))
    };
    let (ti, pi, ci, mi, vi) = (
        col("time")?,
        col("phase")?,
        col("component")?,
        col("mean")?,
        col("var")?,
    );
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(e.to_string()));
        rows.push(TrajectoryRow {
            time: num(ti)?,
            phase: rec[pi].to_string(),
            component: rec[ci]
                .parse()
                .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            mean: num(mi)?,
            var: num(vi)?,
        });
    }
    Ok(rows)
}

/// Abscissae and densities of one pdf file.
type Density = (Vec<f64>, Vec<f64>);

fn read_pdf(path: &Path) -> Result<Option<Density>, RunError> {
    if !path.exists() {
        return Ok(None);
    }
    let file = File::open(path).map_err(|e| RunError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let bad = |why: String| RunError::IncompatibleBundles(format!("{}: {why}", path.display()));
    let (mut xs, mut ps) = (Vec::new(), Vec::new());
    for rec in reader.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        xs.push(rec[0].parse::<f64>().map_err(|e| bad(e.to_string()))?);
        ps.push(rec[1].parse::<f64>().map_err(|e| bad(e.to_string()))?);
    }
    Ok(Some((xs, ps)))
}

/// Trapezoidal `∫|p − q|` on a shared abscissa.
pub fn l1_distance(x: &[f64], p: &[f64], q: &[f64]) -> f64 {
    (1..x.len())
        .map(|i| 0.5 * (x[i] - x[i - 1]) * ((p[i] - q[i]).abs() + (p[i - 1] - q[i - 1]).abs()))
        .sum()
}

/// Compares every bundle with the first one, record by record.
///
/// Bundles must list the same `(time, phase, component)` records in the same order.
pub fn compare_runs(dirs: &[PathBuf]) -> Result<Vec<ComparisonRow>, RunError> {
    let Some((base_dir, others)) = dirs.split_first() else {
        return Err(RunError::IncompatibleBundles("no bundles given".into()));
    };
    let base = read_trajectory(base_dir)?;
    let mut times: Vec<f64> = base.iter().map(|r| r.time).collect();
    times.dedup();
    let mut out = Vec::new();
    let all: Vec<&PathBuf> = std::iter::once(base_dir).chain(others).collect();
    for (b, dir) in all.iter().enumerate() {
        let rows = read_trajectory(dir)?;
        let keys = |rs: &[TrajectoryRow]| {
            rs.iter()
                .map(|r| (r.time.to_bits(), r.phase.clone(), r.component))
                .collect::<Vec<_>>()
        };
        if keys(&rows) != keys(&base) {
            return Err(RunError::IncompatibleBundles(format!(
                "{} and {} do not share a schedule and state dimension",
                base_dir.display(),
                dir.display()
            )));
        }
        let mut seen = BTreeSet::new();
        for (r, r0) in rows.iter().zip(&base) {
            let step = times.iter().position(|&t| t == r.time).unwrap_or(0);
            let pdf_l1 = if r.phase == "analysis" && seen.insert((step, r.component)) {
                let name = format!("pdf_{step}_{}.csv", r.component);
                match (read_pdf(&base_dir.join(&name))?, read_pdf(&dir.join(&name))?) {
                    (Some((x0, p0)), Some((x1, p1))) if x0 == x1 => Some(l1_distance(&x0, &p1, &p0)),
                    _ => None,
                }
            } else {
                None
            };
            out.push(ComparisonRow {
                bundle: b,
                time: r.time,
                phase: r.phase.clone(),
                component: r.component,
                mean_diff: r.mean - r0.mean,
                var_diff: r.var - r0.var,
                pdf_l1,
            });
        }
    }
    Ok(out)
}

pub fn write_comparison<W: Write>(rows: &[ComparisonRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "bundle,time,phase,component,mean_diff,var_diff,pdf_l1")?;
    for r in rows {
        let l1 = r.pdf_l1.map(fmt).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{l1}",
            r.bundle,
            fmt(r.time),
            r.phase,
            r.component,
            fmt(r.mean_diff),
            fmt(r.var_diff)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_distance() {
        let x = [0.0, 1.0, 2.0];
        assert_eq!(l1_distance(&x, &[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0]), 2.0);
        assert_eq!(l1_distance(&x, &[0.0, 2.0, 0.0], &[0.0, 0.0, 0.0]), 2.0);
        assert_eq!(l1_distance(&x, &[0.5, 0.5, 0.5], &[0.5, 0.5, 0.5]), 0.0);
    }
}
