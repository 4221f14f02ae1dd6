//! Run table, summary document and optimiser traces.

use std::fmt::Write as _;
use std::path::Path;

use super::{AggregateStats, RunReport};
use crate::error::{Error, Result};

pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TRACES_FILE: &str = "traces.csv";

/// Comma-separated table with one row per run.
pub fn run_table(reports: &[RunReport]) -> String {
    let k = reports.first().map_or(0, |r| r.clusters.len());
    let mut out = String::from("run,seed");
    for c in 1..=k {
        let _ = write!(out, ",cluster{c}_distance");
    }
    out.push_str(",intra_total,inter_distance,inter_oracle,ratio,repaired,total");
    for c in 1..=k {
        let _ = write!(out, ",cluster{c}_bitstring");
    }
    out.push_str(",inter_bitstring\n");

    for r in reports {
        let _ = write!(out, "{},{}", r.run, r.seed);
        for c in &r.clusters {
            let _ = write!(out, ",{:.6}", c.distance);
        }
        let _ = write!(
            out,
            ",{:.6},{:.6},{:.6},{:.6},{},{:.6}",
            r.intra_total,
            r.inter.distance,
            r.inter.oracle_distance,
            r.approximation_ratio,
            r.inter.repaired,
            r.total
        );
        for c in &r.clusters {
            let _ = write!(out, ",{}", c.bitstring);
        }
        let _ = writeln!(out, ",{}", r.inter.bitstring);
    }
    out
}

fn trace_table(reports: &[RunReport]) -> String {
    let mut out = String::from("run,stage,iteration,value\n");
    for r in reports {
        for t in &r.traces {
            for (k, v) in t.values.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{:.9}", r.run, t.stage, k, v);
            }
        }
    }
    out
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes the run table, summary and traces into `dir` (created if missing).
pub fn emit_report(reports: &[RunReport], stats: &AggregateStats, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    write(dir, RUNS_FILE, &run_table(reports))?;
    let summary = serde_json::to_string_pretty(stats).expect("stats serialise") + "\n";
    write(dir, SUMMARY_FILE, &summary)?;
    write(dir, TRACES_FILE, &trace_table(reports))
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    #[test]
    fn files_have_expected_shape() {
        let mut cfg = PipelineConfig {
            runs: 4,
            ..Default::default()
        };
        cfg.otsp.spsa.max_iterations = 5;
        cfg.vrp.spsa.max_iterations = 5;
        let b = run_benchmark(&Dataset::example(), &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_report(&b.reports, &b.stats, dir.path()).unwrap();

        let runs = std::fs::read_to_string(dir.path().join(RUNS_FILE)).unwrap();
        let lines: Vec<&str> = runs.lines().collect();
        assert_eq!(lines.len(), 5);
        let header: Vec<&str> = lines[0].split(',').collect();
        let ratio = header.iter().position(|h| *h == "ratio").unwrap();
        for row in &lines[1..] {
            let cols: Vec<&str> = row.split(',').collect();
            assert_eq!(cols.len(), header.len());
            let v: f64 = cols[ratio].parse().unwrap();
            assert!(v > 0.0 && v <= 1.0);
        }
        assert_eq!(runs, run_table(&b.reports));

        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap())
                .unwrap();
        assert_eq!(summary["runs"], 4);
        let traces = std::fs::read_to_string(dir.path().join(TRACES_FILE)).unwrap();
        assert_eq!(traces.lines().count(), 1 + 4 * 4 * 5);
    }

    #[test]
    fn unwritable_path_reports_location() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        std::fs::write(&file, "x").unwrap();
        let stats = AggregateStats {
            runs: 0,
            inter_distance: Summary::of(&[1.0]),
            inter_oracle_distance: 1.0,
            approximation_ratio: Summary::of(&[1.0]),
            modal_bitstring: String::new(),
            modal_count: 0,
            modal_distance: 0.0,
            repair_rate: 0.0,
            intra_total: Summary::of(&[1.0]),
            intra_oracle_total: 1.0,
            intra_hit_rates: vec![],
            intra_repair_rates: vec![],
            total: Summary::of(&[1.0]),
        };
        let err = emit_report(&[], &stats, &file.join("sub")).unwrap_err();
        assert!(err.to_string().contains("plain"), "{err}");
    }
}
