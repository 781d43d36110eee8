//! Run every requested controller and seed of a scenario and write the results.
//!
//! Layout under the output directory:
//!
//! ```text
//! <out>/<scenario>/<controller>/<seed>/trace.jsonl
//! <out>/<scenario>/<controller>/<seed>/decisions.jsonl
//! <out>/<scenario>/<controller>/<seed>/report.json
//! <out>/<scenario>/comparison.json
//! <out>/<scenario>/comparison.csv
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::controllers::ControllerKind;
use crate::error::{Error, Result};
use crate::metrics::{self, ComparisonTable, MetricRow, MetricsReport};
use crate::scenario::ScenarioConfig;
use crate::sim;

#[derive(Debug, Clone, Default)]
pub struct ExperimentOptions {
    pub out_dir: PathBuf,
    /// Overrides the scenario's controller list.
    pub controllers: Option<Vec<ControllerKind>>,
    /// Overrides the scenario's base seed.
    pub seed: Option<u64>,
    /// Overrides the scenario's repeat count.
    pub repeats: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub scenario_dir: PathBuf,
    pub reports: Vec<MetricsReport>,
    /// `None` when fewer than two controllers ran.
    pub comparison: Option<ComparisonTable>,
}

#[derive(Serialize)]
struct ComparisonDoc<'a> {
    scenario: &'a str,
    seeds: Vec<u64>,
    #[serde(flatten)]
    table: &'a ComparisonTable,
    spread: Vec<MetricRow>,
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let io_err = |e| Error::io(path.display().to_string(), e);
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

/// Run all `(controller, seed)` pairs and write traces, audit logs, reports
/// and the comparison table. Runs share the same arrivals per seed.
pub fn run_experiment(
    scenario: &ScenarioConfig,
    opts: &ExperimentOptions,
) -> Result<ExperimentSummary> {
    let mut scenario = scenario.clone();
    if let Some(controllers) = &opts.controllers {
        scenario.controllers = controllers.clone();
    }
    if let Some(seed) = opts.seed {
        scenario.seed = seed;
    }
    if let Some(repeats) = opts.repeats {
        scenario.repeats = repeats;
    }
    scenario.validate()?;

    let scenario_dir = opts.out_dir.join(&scenario.name);
    create_dir(&scenario_dir)?;

    let seeds: Vec<u64> = (0..u64::from(scenario.repeats))
        .map(|i| scenario.seed.wrapping_add(i))
        .collect();
    let mut reports = Vec::new();
    for &kind in &scenario.controllers {
        for &seed in &seeds {
            let mut seeded = scenario.clone();
            seeded.seed = seed;
            let trace = sim::run(&seeded, kind)?;
            let report = metrics::report(&trace, &seeded);

            let run_dir = scenario_dir.join(kind.as_str()).join(seed.to_string());
            create_dir(&run_dir)?;
            write_with(&run_dir.join("trace.jsonl"), |w| trace.write_trace_jsonl(w))?;
            write_with(&run_dir.join("decisions.jsonl"), |w| {
                trace.write_decisions_jsonl(w)
            })?;
            write_json(&run_dir.join("report.json"), &report)?;
            reports.push(report);
        }
    }

    let aggregated = metrics::aggregate(&reports);
    let comparison = if aggregated.len() >= 2 {
        let means: Vec<MetricRow> = aggregated.iter().map(|(m, _)| m.clone()).collect();
        let table = metrics::compare(&means)?;
        let doc = ComparisonDoc {
            scenario: &scenario.name,
            seeds: seeds.clone(),
            table: &table,
            spread: aggregated.iter().map(|(_, s)| s.clone()).collect(),
        };
        write_json(&scenario_dir.join("comparison.json"), &doc)?;
        let csv = table.to_csv();
        write_with(&scenario_dir.join("comparison.csv"), |w| {
            w.write_all(csv.as_bytes())
        })?;
        Some(table)
    } else {
        None
    };

    Ok(ExperimentSummary {
        scenario_dir,
        reports,
        comparison,
    })
}
