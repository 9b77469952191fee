//! CSV output for training curves, evaluation traces and comparisons.

use std::fs::File;
use std::path::Path;

use csv::Writer;

use crate::atppo::{EpisodeReport, EvalReport, TraceRow};
use crate::envs::EnvKind;
use crate::error::Result;

pub const TRAIN_HEADER: [&str; 7] = [
    "step",
    "mean_raw_return",
    "comm_fraction",
    "mean_inter_event",
    "policy_loss",
    "value_loss",
    "clip_fraction",
];

pub const SUMMARY_HEADER: [&str; 9] = [
    "episode",
    "raw_return",
    "steps",
    "events",
    "comm_fraction",
    "min_inter_event",
    "mean_inter_event",
    "captured",
    "terminal_norm",
];

pub const COMPARE_HEADER: [&str; 7] = [
    "label",
    "env",
    "mean_return",
    "comm_fraction",
    "resource_saving",
    "min_inter_event",
    "capture_rate",
];

/// One training-curve sample, emitted after each update cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    /// Environment steps consumed so far.
    pub step: u64,
    pub mean_raw_return: f64,
    pub comm_fraction: f64,
    pub mean_inter_event: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub clip_fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricLog {
    pub rows: Vec<MetricRow>,
}

/// Column names of the plant state for trace files.
pub fn state_columns(env: EnvKind) -> &'static [&'static str] {
    match env {
        EnvKind::Integrator => &["x"],
        EnvKind::Pursuit => &["r", "r_dot", "eta", "eta_dot", "psi_p"],
    }
}

pub fn control_columns(env: EnvKind) -> &'static [&'static str] {
    match env {
        EnvKind::Integrator => &["u"],
        EnvKind::Pursuit => &["a_p_cmd"],
    }
}

pub fn trace_header(env: EnvKind) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(state_columns(env).iter().map(|s| s.to_string()));
    h.extend(control_columns(env).iter().map(|s| s.to_string()));
    h.extend(["triggered", "lyapunov", "inter_event"].map(String::from));
    h
}

fn writer(path: &Path) -> Result<Writer<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(Writer::from_path(path)?)
}

fn num(v: f64) -> String {
    format!("{v}")
}

pub fn write_training_csv(log: &MetricLog, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRAIN_HEADER)?;
    for r in &log.rows {
        w.write_record([
            r.step.to_string(),
            num(r.mean_raw_return),
            num(r.comm_fraction),
            num(r.mean_inter_event),
            num(r.policy_loss),
            num(r.value_loss),
            num(r.clip_fraction),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv(env: EnvKind, rows: &[TraceRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(trace_header(env))?;
    for row in rows {
        let mut rec = vec![num(row.t)];
        rec.extend(row.state.iter().map(|&v| num(v)));
        rec.extend(row.applied_control.iter().map(|&v| num(v)));
        rec.push(if row.triggered { "1" } else { "0" }.to_string());
        rec.push(num(row.lyapunov));
        rec.push(num(row.inter_event));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_eval_summary_csv(report: &EvalReport, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for (i, ep) in report.episodes.iter().enumerate() {
        w.write_record(summary_record(i, ep))?;
    }
    w.flush()?;
    Ok(())
}

fn summary_record(i: usize, ep: &EpisodeReport) -> Vec<String> {
    vec![
        i.to_string(),
        num(ep.raw_return),
        ep.steps.to_string(),
        ep.event_times.len().to_string(),
        num(ep.comm_fraction),
        num(ep.stats.min_delta),
        num(ep.stats.mean_delta),
        (ep.captured as u8).to_string(),
        num(ep.terminal_state.iter().map(|x| x * x).sum::<f64>().sqrt()),
    ]
}

/// Writes `eval_summary.csv` and one `trace_NNN.csv` per episode into `dir`.
pub fn write_eval_report(report: &EvalReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_eval_summary_csv(report, &dir.join("eval_summary.csv"))?;
    for (i, ep) in report.episodes.iter().enumerate() {
        write_trace_csv(report.env, &ep.trace, &dir.join(format!("trace_{i:03}.csv")))?;
    }
    Ok(())
}

/// One line of a comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub env: EnvKind,
    pub mean_return: f64,
    pub comm_fraction: f64,
    /// `1 - comm_fraction / reference comm_fraction`.
    pub resource_saving: f64,
    pub min_inter_event: f64,
    /// NaN for environments without a capture notion.
    pub capture_rate: f64,
}

pub fn resource_saving(comm_fraction: f64, reference: f64) -> f64 {
    1.0 - comm_fraction / reference
}

/// Builds comparison rows; savings are relative to `reports[reference]`.
pub fn comparison_rows(reports: &[&EvalReport], reference: usize) -> Vec<ComparisonRow> {
    let ref_cf = reports
        .get(reference)
        .map(|r| r.comm_fraction())
        .unwrap_or(f64::NAN);
    reports
        .iter()
        .map(|r| ComparisonRow {
            label: r.label.clone(),
            env: r.env,
            mean_return: r.mean_return(),
            comm_fraction: r.comm_fraction(),
            resource_saving: resource_saving(r.comm_fraction(), ref_cf),
            min_inter_event: r.min_inter_event(),
            capture_rate: match r.env {
                EnvKind::Pursuit => r.capture_rate(),
                EnvKind::Integrator => f64::NAN,
            },
        })
        .collect()
}

pub fn write_comparison_csv(rows: &[ComparisonRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(COMPARE_HEADER)?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.env.to_string(),
            num(r.mean_return),
            num(r.comm_fraction),
            num(r.resource_saving),
            num(r.min_inter_event),
            num(r.capture_rate),
        ])?;
    }
    w.flush()?;
    Ok(())
}
