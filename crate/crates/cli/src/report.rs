//! Scenario reports and the files written to the output directory.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use lambdaflow::{Grid, NodeKind, ValueSlice};
use serde::Serialize;

/// One acceptance check. `gating` checks decide the exit code; the others
/// are recorded for inspection only.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub gating: bool,
    pub detail: String,
}

impl Check {
    /// Passes when `measured <= threshold`.
    pub fn at_most(name: &str, measured: f64, threshold: f64) -> Self {
        Self::new(name, measured <= threshold, measured, threshold)
    }

    /// Passes when `measured >= threshold`.
    pub fn at_least(name: &str, measured: f64, threshold: f64) -> Self {
        Self::new(name, measured >= threshold, measured, threshold)
    }

    pub fn new(name: &str, passed: bool, measured: f64, threshold: f64) -> Self {
        Self { name: name.to_string(), passed, measured, threshold, gating: true, detail: String::new() }
    }

    pub fn informational(mut self) -> Self {
        self.gating = false;
        self
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(scenario: &str, seed: u64, checks: Vec<Check>) -> Self {
        let passed = checks.iter().filter(|c| c.gating).all(|c| c.passed);
        Self { scenario: scenario.to_string(), seed, passed, checks }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Shortest decimal that round-trips would also do; fixed 17 significant
/// digits keeps columns aligned and identical across platforms.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Coordinates and value of every interior and strip node.
pub fn field_csv(grid: &Grid, slice: &ValueSlice) -> String {
    let n = grid.dim();
    let mut out = String::new();
    for i in 0..n {
        let _ = write!(out, "x{},", i + 1);
    }
    out.push_str("kind,value\n");
    let mut p = vec![0.0; n];
    for idx in 0..grid.len() {
        let kind = match grid.kind(idx) {
            NodeKind::Interior => "interior",
            NodeKind::Strip => "strip",
            NodeKind::Exterior => continue,
        };
        grid.write_point(idx, &mut p);
        for c in &p {
            out.push_str(&fmt_f64(*c));
            out.push(',');
        }
        out.push_str(kind);
        out.push(',');
        out.push_str(&fmt_f64(slice.values[idx]));
        out.push('\n');
    }
    out
}

pub fn decay_csv(times: &[f64], gaps: &[f64]) -> String {
    let mut out = String::from("t,sup_gap\n");
    for (t, g) in times.iter().zip(gaps) {
        let _ = writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*g));
    }
    out
}

/// Files produced by a scenario, written only once it has finished.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    /// Field CSVs for `count` levels spread evenly over `slices`
    /// (first and last included).
    pub fn add_fields(&mut self, grid: &Grid, slices: &[ValueSlice], levels: &[usize], count: usize) {
        for k in pick_levels(slices.len(), count) {
            self.add(format!("field_t{}.csv", levels[k]), field_csv(grid, &slices[k]));
        }
    }

    pub fn write_all(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, contents) in &self.files {
            std::fs::write(dir.join(name), contents)?;
        }
        Ok(())
    }
}

/// Up to `count` distinct indices in 0..len, evenly spread, ends included.
pub fn pick_levels(len: usize, count: usize) -> Vec<usize> {
    if len == 0 || count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![len - 1];
    }
    let mut out: Vec<usize> =
        (0..count).map(|i| ((i as f64) * (len - 1) as f64 / (count - 1) as f64).round() as usize).collect();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_picking() {
        assert_eq!(pick_levels(11, 3), vec![0, 5, 10]);
        assert_eq!(pick_levels(2, 5), vec![0, 1]);
        assert_eq!(pick_levels(7, 1), vec![6]);
        assert!(pick_levels(0, 3).is_empty());
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 123456.789] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn gating() {
        let r = Report::new("x", 0, vec![Check::at_most("a", 1.0, 2.0), Check::at_most("b", 3.0, 2.0).informational()]);
        assert!(r.passed);
        let r = Report::new("x", 0, vec![Check::at_least("a", 1.0, 2.0)]);
        assert!(!r.passed);
    }
}
