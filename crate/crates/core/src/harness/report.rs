//! CSV reports and record persistence.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RunRecord;
use crate::acq::Strategy;
use crate::discretize::DiscretizerKind;
use crate::error::{Error, Result};
use crate::problems::ProblemKind;
use crate::space::ObjectiveSense;
use crate::stats;

pub const CONVERGENCE_HEADER: [&str; 7] = [
    "problem",
    "dim",
    "acq",
    "disc",
    "replication",
    "evaluations",
    "best_value",
];
pub const SUMMARY_HEADER: [&str; 8] = [
    "problem",
    "dim",
    "acq",
    "disc",
    "reps_ok",
    "reps_failed",
    "mean_final",
    "var_final",
];
pub const RANKS_HEADER: [&str; 6] = ["problem", "dim", "acq", "rank", "mean_final", "var_final"];
pub const TRACE_HEADER: [&str; 4] = ["evaluations", "median", "p25", "p75"];

pub const RECORDS_FILE: &str = "records.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportFile {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub problem: ProblemKind,
    pub dim: usize,
    pub sense: ObjectiveSense,
    pub acq: Strategy,
    pub disc: DiscretizerKind,
    pub reps_ok: usize,
    pub reps_failed: usize,
    pub finals: Vec<f64>,
    pub mean_final: f64,
    pub var_final: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankRow {
    pub problem: ProblemKind,
    pub dim: usize,
    pub label: String,
    pub rank: usize,
    pub mean_final: f64,
    pub var_final: f64,
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

/// Groups records by (problem, dim, acq, disc) in order of first appearance.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    for r in records {
        let pos = rows.iter().position(|s| {
            s.problem == r.problem && s.dim == r.dim && s.acq == r.acq && s.disc == r.disc
        });
        let row = match pos {
            Some(i) => &mut rows[i],
            None => {
                rows.push(SummaryRow {
                    problem: r.problem,
                    dim: r.dim,
                    sense: r.sense,
                    acq: r.acq,
                    disc: r.disc,
                    reps_ok: 0,
                    reps_failed: 0,
                    finals: Vec::new(),
                    mean_final: f64::NAN,
                    var_final: f64::NAN,
                });
                rows.last_mut().unwrap()
            }
        };
        match r.final_value() {
            Some(v) if r.is_ok() => {
                row.reps_ok += 1;
                row.finals.push(v);
            }
            _ => row.reps_failed += 1,
        }
    }
    for row in &mut rows {
        if !row.finals.is_empty() {
            row.mean_final = stats::mean(&row.finals);
            row.var_final = stats::variance(&row.finals);
        }
    }
    rows
}

/// Ranks strategies within each (problem, dim) by mean final value in the
/// problem's favorable direction, then by variance. Groups without a
/// successful replication are left out.
pub fn rank(summary: &[SummaryRow]) -> Vec<RankRow> {
    let mut out = Vec::new();
    let mut keys: Vec<(ProblemKind, usize)> = Vec::new();
    for s in summary {
        if !keys.contains(&(s.problem, s.dim)) {
            keys.push((s.problem, s.dim));
        }
    }
    for (problem, dim) in keys {
        let mut group: Vec<&SummaryRow> = summary
            .iter()
            .filter(|s| s.problem == problem && s.dim == dim && s.reps_ok > 0)
            .collect();
        group.sort_by(|a, b| {
            let by_mean = match a.sense {
                ObjectiveSense::Minimize => a.mean_final.total_cmp(&b.mean_final),
                ObjectiveSense::Maximize => b.mean_final.total_cmp(&a.mean_final),
            };
            by_mean.then(a.var_final.total_cmp(&b.var_final))
        });
        for (i, s) in group.iter().enumerate() {
            let shared = group.iter().filter(|o| o.acq == s.acq).count() > 1;
            let label = if shared {
                format!("{}@{}", s.acq, s.disc)
            } else {
                s.acq.name().to_string()
            };
            out.push(RankRow {
                problem,
                dim,
                label,
                rank: i + 1,
                mean_final: s.mean_final,
                var_final: s.var_final,
            });
        }
    }
    out
}

/// Best-so-far quantiles over successful replications at each evaluation
/// count reached by all of them.
pub fn quantile_trace(records: &[&RunRecord]) -> Vec<[f64; 4]> {
    let len = records.iter().map(|r| r.rows.len()).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let vals: Vec<f64> = records.iter().map(|r| r.rows[i].best_value).collect();
            [
                records[0].rows[i].evaluations as f64,
                stats::median(&vals),
                stats::quantile(&vals, 0.25),
                stats::quantile(&vals, 0.75),
            ]
        })
        .collect()
}

pub fn trace_file_name(s: &SummaryRow) -> String {
    format!("trace_{}_d{}_{}_{}.csv", s.problem, s.dim, s.acq, s.disc)
}

/// Renders every report as in-memory files.
pub fn render_reports(records: &[RunRecord]) -> Result<Vec<ReportFile>> {
    if !records.iter().any(RunRecord::is_ok) {
        return Err(Error::InvalidArgument(
            "no successful run records to report".into(),
        ));
    }
    let mut files = Vec::new();

    let mut w = writer();
    w.write_record(CONVERGENCE_HEADER)?;
    for r in records {
        for row in &r.rows {
            w.write_record([
                r.problem.name().to_string(),
                r.dim.to_string(),
                r.acq.name().to_string(),
                r.disc.name().to_string(),
                r.replication.to_string(),
                row.evaluations.to_string(),
                num(row.best_value),
            ])?;
        }
    }
    files.push(ReportFile {
        name: "convergence.csv".into(),
        contents: finish(w)?,
    });

    let summary = summarize(records);
    let mut w = writer();
    w.write_record(SUMMARY_HEADER)?;
    for s in &summary {
        w.write_record([
            s.problem.name().to_string(),
            s.dim.to_string(),
            s.acq.name().to_string(),
            s.disc.name().to_string(),
            s.reps_ok.to_string(),
            s.reps_failed.to_string(),
            num(s.mean_final),
            num(s.var_final),
        ])?;
    }
    files.push(ReportFile {
        name: "summary.csv".into(),
        contents: finish(w)?,
    });

    let mut w = writer();
    w.write_record(RANKS_HEADER)?;
    for r in rank(&summary) {
        w.write_record([
            r.problem.name().to_string(),
            r.dim.to_string(),
            r.label,
            r.rank.to_string(),
            num(r.mean_final),
            num(r.var_final),
        ])?;
    }
    files.push(ReportFile {
        name: "ranks.csv".into(),
        contents: finish(w)?,
    });

    for s in summary.iter().filter(|s| s.reps_ok > 0) {
        let ok: Vec<&RunRecord> = records
            .iter()
            .filter(|r| {
                r.is_ok()
                    && r.problem == s.problem
                    && r.dim == s.dim
                    && r.acq == s.acq
                    && r.disc == s.disc
            })
            .collect();
        let mut w = writer();
        w.write_record(TRACE_HEADER)?;
        for [e, med, lo, hi] in quantile_trace(&ok) {
            w.write_record([format!("{e}"), num(med), num(lo), num(hi)])?;
        }
        files.push(ReportFile {
            name: trace_file_name(s),
            contents: finish(w)?,
        });
    }
    Ok(files)
}

/// Writes all reports into `out_dir`, creating it if needed.
pub fn write_reports(records: &[RunRecord], out_dir: &Path) -> Result<Vec<ReportFile>> {
    let files = render_reports(records)?;
    fs::create_dir_all(out_dir)?;
    for f in &files {
        fs::write(out_dir.join(&f.name), &f.contents)?;
    }
    Ok(files)
}

pub fn save_records(records: &[RunRecord], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_vec_pretty(records)?)?;
    Ok(())
}

pub fn load_records(path: &Path) -> Result<Vec<RunRecord>> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{RunStatus, TraceRow};

    fn record(acq: Strategy, rep: usize, trace: &[f64]) -> RunRecord {
        RunRecord {
            problem: ProblemKind::Rastrigin,
            dim: 2,
            sense: ObjectiveSense::Minimize,
            acq,
            disc: DiscretizerKind::Uniform,
            replication: rep,
            seed: 0,
            budget: trace.len(),
            status: RunStatus::Completed,
            rows: trace
                .iter()
                .enumerate()
                .map(|(i, v)| TraceRow {
                    evaluations: i + 1,
                    best_value: *v,
                    wall_time: 0.0,
                })
                .collect(),
            iterations: Vec::new(),
            initial_best: trace.first().copied(),
            final_best: trace.last().map(|v| (vec![0.0, 0.0], *v)),
        }
    }

    #[test]
    fn tied_means_rank_lower_variance_first() {
        let records = vec![
            record(Strategy::SeqEi, 0, &[5.0, 1.0]),
            record(Strategy::SeqEi, 1, &[5.0, 3.0]),
            record(Strategy::SeqPi, 0, &[5.0, 2.0]),
            record(Strategy::SeqPi, 1, &[5.0, 2.0]),
        ];
        let ranks = rank(&summarize(&records));
        assert_eq!(ranks.len(), 2);
        assert_eq!((ranks[0].label.as_str(), ranks[0].rank), ("sPI", 1));
        assert_eq!((ranks[1].label.as_str(), ranks[1].rank), ("sEI", 2));
    }

    #[test]
    fn failed_replications_are_counted_not_averaged() {
        let mut bad = record(Strategy::SeqEi, 2, &[5.0]);
        bad.status = RunStatus::Failed("boom".into());
        let records = vec![record(Strategy::SeqEi, 0, &[5.0, 1.0]), bad];
        let s = summarize(&records);
        assert_eq!((s[0].reps_ok, s[0].reps_failed), (1, 1));
        assert_eq!(s[0].mean_final, 1.0);
        assert_eq!(s[0].var_final, 0.0);
    }

    #[test]
    fn convergence_rows_match_trace_rows() {
        let records = vec![
            record(Strategy::SeqEi, 0, &[5.0, 4.0, 1.0]),
            record(Strategy::Wscore, 0, &[5.0, 2.0]),
        ];
        let files = render_reports(&records).unwrap();
        let conv = &files[0];
        assert_eq!(conv.name, "convergence.csv");
        assert_eq!(conv.contents.lines().count(), 1 + 5);
        assert!(conv
            .contents
            .starts_with("problem,dim,acq,disc,replication,evaluations,best_value\n"));
        assert!(!conv.contents.contains('\r'));
        assert!(conv.contents.contains("rastrigin,2,sEI,uniform,0,3,1\n"));
        assert_eq!(files.len(), 3 + 2);
    }

    #[test]
    fn quantiles_follow_type_seven() {
        let records: Vec<RunRecord> = (0..4)
            .map(|i| record(Strategy::SeqEi, i, &[i as f64 + 1.0]))
            .collect();
        let refs: Vec<&RunRecord> = records.iter().collect();
        let q = quantile_trace(&refs);
        assert_eq!(q, vec![[1.0, 2.5, 1.75, 3.25]]);
    }

    #[test]
    fn nothing_to_report_is_an_error() {
        let mut bad = record(Strategy::SeqEi, 0, &[1.0]);
        bad.status = RunStatus::Failed("x".into());
        assert!(render_reports(&[bad]).is_err());
    }

    #[test]
    fn records_round_trip_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(RECORDS_FILE);
        let records = vec![record(Strategy::EepaPlus, 0, &[3.0, 0.5])];
        save_records(&records, &path).unwrap();
        assert_eq!(load_records(&path).unwrap(), records);
        write_reports(&records, &dir.path().join("out")).unwrap();
        assert!(dir.path().join("out/ranks.csv").exists());
        assert!(dir
            .path()
            .join("out/trace_rastrigin_d2_EEPA+_uniform.csv")
            .exists());
    }
}
