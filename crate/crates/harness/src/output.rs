//! Result files. CSV contents depend only on the config and seed; wall
//! times go to a separate JSON file.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::experiment::ExperimentReport;

pub const PER_STEP_FILE: &str = "per_step.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TIMING_FILE: &str = "timing.json";
pub const ESTIMATES_FILE: &str = "estimates.jsonl";

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

#[derive(Serialize)]
struct PerStepRow<'a> {
    trial: u32,
    k: u32,
    ospa: f64,
    ospa_loc: f64,
    ospa_card: f64,
    estimated: usize,
    truth: usize,
    selected: String,
    rewards: String,
    evaluations: u64,
    discarded_mass: f64,
    status: &'a str,
}

#[derive(Serialize)]
struct SummaryRow {
    k: u32,
    trials: u32,
    mean_ospa: f64,
    mean_ospa_loc: f64,
    mean_ospa_card: f64,
    mean_evaluations: f64,
}

#[derive(Serialize)]
struct TimingEntry {
    trial: u32,
    seconds: f64,
    aborted: Option<String>,
}

#[derive(Serialize)]
struct EstimateLine<'a> {
    trial: u32,
    k: u32,
    estimates: &'a [passive_glmb::LabeledEstimate],
    truth: &'a [[f64; 2]],
}

/// Writes the per-step and summary CSVs plus timings, and optionally a
/// JSON-lines dump of estimates and truth per step.
pub fn write_report(report: &ExperimentReport, dir: &Path, dump_estimates: bool) -> Result<()> {
    fs::create_dir_all(dir)?;

    let mut per_step = csv::Writer::from_path(dir.join(PER_STEP_FILE))?;
    for t in &report.trials {
        let last = t.steps.len();
        for (i, s) in t.steps.iter().enumerate() {
            let status = if t.aborted.is_some() && i + 1 == last {
                "aborted_after"
            } else {
                "ok"
            };
            per_step.serialize(PerStepRow {
                trial: t.trial,
                k: s.k,
                ospa: s.ospa.total,
                ospa_loc: s.ospa.localization,
                ospa_card: s.ospa.cardinality,
                estimated: s.estimates.len(),
                truth: s.truth.len(),
                selected: join(&s.selected),
                rewards: join(&s.rewards),
                evaluations: s.evaluations,
                discarded_mass: s.discarded_mass,
                status,
            })?;
        }
    }
    per_step.flush()?;

    let mut summary = csv::Writer::from_path(dir.join(SUMMARY_FILE))?;
    for s in &report.summary {
        summary.serialize(SummaryRow {
            k: s.k,
            trials: s.trials,
            mean_ospa: s.mean_ospa,
            mean_ospa_loc: s.mean_ospa_loc,
            mean_ospa_card: s.mean_ospa_card,
            mean_evaluations: s.mean_evaluations,
        })?;
    }
    summary.flush()?;

    let timing: Vec<TimingEntry> = report
        .trials
        .iter()
        .map(|t| TimingEntry {
            trial: t.trial,
            seconds: t.wall_time.as_secs_f64(),
            aborted: t.aborted.clone(),
        })
        .collect();
    fs::write(
        dir.join(TIMING_FILE),
        serde_json::to_string_pretty(&timing).expect("timings serialize"),
    )?;

    if dump_estimates {
        let mut out = BufWriter::new(File::create(dir.join(ESTIMATES_FILE))?);
        for t in &report.trials {
            for s in &t.steps {
                let line = EstimateLine {
                    trial: t.trial,
                    k: s.k,
                    estimates: &s.estimates,
                    truth: &s.truth,
                };
                serde_json::to_writer(&mut out, &line).expect("estimates serialize");
                out.write_all(b"\n")?;
            }
        }
        out.flush()?;
    }
    Ok(())
}
