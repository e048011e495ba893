//! Run-report directories.
//!
//! ```text
//! metrics.csv        step, agent, kld_to_oracle, entropy, message_cells
//! observations.csv   step, agent, x, y, outcome
//! messages.csv       step, sender, receiver, regions, region_weights, payload_cells, whole_joint_cells, omega_region
//! summary.json
//! prior.json         hybrid pdf documents
//! final/agent_<i>.json
//! oracle/agent_<i>.json
//! snapshots/step_<k>_agent_<i>_<before|after>.json
//! ```

use std::fs;
use std::path::Path;

use ddf_core::sensor::Detection;
use ddf_core::sim::{ObservationRecord, RunReport, Scenario, SnapshotPhase};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{write_pdf, Pdf};
use crate::scenario::{ModeDoc, ScenarioDoc};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCsvRow {
    pub step: usize,
    pub agent: usize,
    pub kld_to_oracle: Option<f64>,
    pub entropy: f64,
    pub message_cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeCsv {
    Detected,
    NotDetected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationCsvRow {
    pub step: usize,
    pub agent: usize,
    pub x: f64,
    pub y: f64,
    pub outcome: OutcomeCsv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageCsvRow {
    pub step: usize,
    pub sender: usize,
    pub receiver: usize,
    /// Space-separated 0-based region indices.
    pub regions: String,
    pub region_weights: bool,
    pub payload_cells: usize,
    pub whole_joint_cells: usize,
    pub omega_region: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub seed: u64,
    pub mode: ModeDoc,
    pub agents: usize,
    pub messages: usize,
    pub payload_cells: usize,
    pub whole_joint_cells: usize,
    pub final_kld_to_oracle: Option<Vec<f64>>,
}

impl From<&ObservationRecord> for ObservationCsvRow {
    fn from(o: &ObservationRecord) -> Self {
        Self {
            step: o.step,
            agent: o.agent,
            x: o.pose[0],
            y: o.pose[1],
            outcome: match o.outcome {
                Detection::Detected => OutcomeCsv::Detected,
                Detection::NotDetected => OutcomeCsv::NotDetected,
            },
        }
    }
}

impl From<&ObservationCsvRow> for ObservationRecord {
    fn from(r: &ObservationCsvRow) -> Self {
        Self {
            step: r.step,
            agent: r.agent,
            pose: [r.x, r.y],
            outcome: match r.outcome {
                OutcomeCsv::Detected => Detection::Detected,
                OutcomeCsv::NotDetected => Detection::NotDetected,
            },
        }
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report values always serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn summarize(scenario: &Scenario, report: &RunReport) -> Result<RunSummary> {
    let final_kld_to_oracle = report
        .final_oracles
        .as_ref()
        .map(|oracles| {
            oracles
                .iter()
                .zip(&report.final_beliefs)
                .map(|(o, b)| ddf_core::hybrid::hybrid_joint_kld(o, b).map(|k| k.total))
                .collect::<ddf_core::Result<Vec<_>>>()
        })
        .transpose()?;
    Ok(RunSummary {
        steps: scenario.steps,
        seed: scenario.seed,
        mode: ScenarioDoc::from(scenario).mode,
        agents: scenario.n_agents(),
        messages: report.messages.len(),
        payload_cells: report.payload_cells(),
        whole_joint_cells: report.whole_joint_cells(),
        final_kld_to_oracle,
    })
}

pub fn write_run_report(dir: &Path, scenario: &Scenario, report: &RunReport) -> Result<RunSummary> {
    create_dir(dir)?;
    write_csv(
        &dir.join("metrics.csv"),
        report.metrics.iter().map(|m| MetricCsvRow {
            step: m.step,
            agent: m.agent,
            kld_to_oracle: m.kld_to_oracle,
            entropy: m.entropy,
            message_cells: m.message_cells,
        }),
    )?;
    write_csv(&dir.join("observations.csv"), report.observations.iter().map(ObservationCsvRow::from))?;
    write_csv(
        &dir.join("messages.csv"),
        report.messages.iter().map(|m| MessageCsvRow {
            step: m.step,
            sender: m.sender,
            receiver: m.receiver,
            regions: m.regions.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" "),
            region_weights: m.region_weights,
            payload_cells: m.payload_cells,
            whole_joint_cells: m.whole_joint_cells,
            omega_region: m.omegas.as_ref().map(|o| o.region),
        }),
    )?;
    write_pdf(&dir.join("prior.json"), &Pdf::Hybrid(report.prior.clone()))?;

    let finals = dir.join("final");
    create_dir(&finals)?;
    for (i, b) in report.final_beliefs.iter().enumerate() {
        write_pdf(&finals.join(format!("agent_{i}.json")), &Pdf::Hybrid(b.clone()))?;
    }
    if let Some(oracles) = &report.final_oracles {
        let od = dir.join("oracle");
        create_dir(&od)?;
        for (i, b) in oracles.iter().enumerate() {
            write_pdf(&od.join(format!("agent_{i}.json")), &Pdf::Hybrid(b.clone()))?;
        }
    }
    if !report.snapshots.is_empty() {
        let sd = dir.join("snapshots");
        create_dir(&sd)?;
        for s in &report.snapshots {
            let phase = match s.phase {
                SnapshotPhase::BeforeExchange => "before",
                SnapshotPhase::AfterExchange => "after",
            };
            let name = format!("step_{}_agent_{}_{phase}.json", s.step, s.agent);
            write_pdf(&sd.join(name), &Pdf::Hybrid(s.belief.clone()))?;
        }
    }
    let summary = summarize(scenario, report)?;
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Reads an `observations.csv` log back for replay.
pub fn read_observations(path: &Path) -> Result<Vec<ObservationRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize::<ObservationCsvRow>()
        .map(|row| row.map(|row| ObservationRecord::from(&row)).map_err(Error::from))
        .collect()
}
