use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

use super::config::ScenarioConfig;
use super::metrics::oscillation_count;
use super::run::{execute, ScenarioRun};

/// One line of `summary.csv`. Numeric cells are empty when the run failed
/// or, for comparison scenarios, had no objective.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    #[serde(rename = "J")]
    pub objective: Option<f64>,
    pub theta: Option<f64>,
    pub regime: Option<String>,
    pub oscillations: Option<usize>,
    pub status: String,
}

#[derive(Debug)]
pub struct SweepEntry {
    pub value: f64,
    pub outcome: std::result::Result<ScenarioRun, Error>,
}

impl SweepEntry {
    pub fn row(&self) -> SweepRow {
        match &self.outcome {
            Ok(run) => SweepRow {
                value: self.value,
                objective: run.final_objective(),
                theta: run.final_theta(),
                regime: Some(run.regime.label.to_string()),
                oscillations: run
                    .trajectory
                    .column("n")
                    .map(|n| oscillation_count(&n, 0.5)),
                status: "ok".to_string(),
            },
            Err(e) => SweepRow {
                value: self.value,
                objective: None,
                theta: None,
                regime: None,
                oscillations: None,
                status: format!("failed: {e}"),
            },
        }
    }
}

/// Runs `base` once per value of the numeric field `axis` (a dotted config
/// path), in parallel. A failing run is recorded and does not stop the rest.
/// With `out`, each run is persisted under `out/NNN` and the table is written
/// to `out/summary.csv` after all runs finish.
pub fn sweep(
    base: &ScenarioConfig,
    axis: &str,
    values: &[f64],
    out: Option<&Path>,
) -> Result<Vec<SweepEntry>> {
    if !values.is_empty() && !base.has_numeric_field(axis) {
        return Err(Error::invalid(axis, "not a numeric field of the base config"));
    }
    let entries: Vec<SweepEntry> = values
        .par_iter()
        .enumerate()
        .map(|(i, &value)| {
            let mut cfg = base.clone();
            cfg.name = format!("{}-{i:03}", base.name);
            let outcome = cfg
                .set_numeric(axis, value)
                .and_then(|()| execute(&cfg, |_| {}))
                .and_then(|run| {
                    if let Some(dir) = out {
                        run.persist(&dir.join(format!("{i:03}")))?;
                    }
                    Ok(run)
                });
            if let Err(e) = &outcome {
                log::warn!("sweep {axis}={value}: {e}");
            }
            SweepEntry { value, outcome }
        })
        .collect();
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_summary(&dir.join("summary.csv"), &entries)?;
    }
    Ok(entries)
}

pub fn write_summary(path: &Path, entries: &[SweepEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for e in entries {
        w.serialize(e.row())?;
    }
    if entries.is_empty() {
        w.write_record(["value", "J", "theta", "regime", "oscillations", "status"])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
