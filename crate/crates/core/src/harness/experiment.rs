use super::config::{ExperimentConfig, SweepPoint, WorkloadSelector};
use super::generate::generate;
use super::workloads::{builtin_workloads, Workload};
use super::HarnessError;
use crate::isa::Program;
use crate::machine::{run_reference, MachineState};
use crate::metrics::{aggregate, to_csv_string, AggregateRow, MetricError, MetricRow};
use crate::reuse::ReusePolicy;
use crate::timing::{simulate, SimOptions, SimRun, SimStats};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

/// One emitted row: the metrics plus whether the final state matched the
/// reference interpreter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(flatten)]
    pub metrics: MetricRow,
    pub oracle_ok: bool,
}

#[derive(Clone, Debug)]
pub struct RowResult {
    pub row: ReportRow,
    /// Policy name without the sweep label.
    pub policy: String,
    pub sweep: Option<String>,
    pub stats: SimStats,
}

#[derive(Clone, Debug, Serialize)]
struct JsonReport<'a> {
    rows: Vec<&'a ReportRow>,
    aggregates: &'a [AggregateRow],
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub rows: Vec<RowResult>,
    pub aggregates: Vec<AggregateRow>,
}

impl ExperimentReport {
    pub fn oracle_failures(&self) -> Vec<&RowResult> {
        self.rows.iter().filter(|r| !r.row.oracle_ok).collect()
    }

    pub fn metric_rows(&self) -> Vec<MetricRow> {
        self.rows.iter().map(|r| r.row.metrics.clone()).collect()
    }

    pub fn metrics_csv(&self) -> String {
        to_csv_string(&self.metric_rows())
    }

    pub fn metrics_json(&self) -> String {
        let report = JsonReport { rows: self.rows.iter().map(|r| &r.row).collect(), aggregates: &self.aggregates };
        serde_json::to_string_pretty(&report).expect("report serialize") + "\n"
    }

    /// Flat statistics, one row per report row, keyed by the report's
    /// policy label.
    pub fn stats_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["policy".to_string()];
        header.extend(SimStats::csv_header());
        w.write_record(&header).expect("in-memory csv");
        for r in &self.rows {
            let mut rec = vec![r.row.metrics.policy.clone()];
            rec.extend(r.stats.csv_record());
            w.write_record(&rec).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }

    /// Writes `metrics.csv`, `metrics.json` and `stats.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(dir.to_path_buf(), e))?;
        for (name, body) in
            [("metrics.csv", self.metrics_csv()), ("metrics.json", self.metrics_json()), ("stats.csv", self.stats_csv())]
        {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| HarnessError::Io(path, e))?;
        }
        Ok(())
    }
}

pub fn resolve_workloads(cfg: &ExperimentConfig) -> Result<Vec<Workload>, HarnessError> {
    let mut out = match &cfg.workloads {
        WorkloadSelector::All => builtin_workloads(),
        WorkloadSelector::Named(names) => {
            let suite = builtin_workloads();
            names
                .iter()
                .map(|n| {
                    suite
                        .iter()
                        .find(|w| w.name.eq_ignore_ascii_case(n))
                        .cloned()
                        .ok_or_else(|| HarnessError::UnknownWorkload(n.clone()))
                })
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    for &(tag, size) in &cfg.generated {
        out.push(generate(tag.name(), size, cfg.seed)?);
    }
    Ok(out)
}

fn reference_state(program: &Program, ops: u64) -> Result<MachineState, HarnessError> {
    run_reference(program, ops.max(1), Some(0))
        .map(|r| r.state)
        .map_err(|f| HarnessError::Invalid(format!("reference run faulted: {f}")))
}

/// True when `state` equals the reference interpreter's state after the
/// same number of micro-ops.
pub fn oracle_check(program: &Program, state: &MachineState) -> Result<bool, HarnessError> {
    Ok(reference_state(program, state.dyn_count)?.same_architectural_state(state))
}

fn oracle_ok(cache: &mut HashMap<u64, MachineState>, w: &Workload, run: &SimRun) -> Result<bool, HarnessError> {
    let ops = run.state.dyn_count;
    if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(ops) {
        e.insert(reference_state(&w.program, ops)?);
    }
    Ok(cache[&ops].same_architectural_state(&run.state))
}

fn run_cell(cfg: &ExperimentConfig, w: &Workload, point: Option<&SweepPoint>) -> Result<Vec<RowResult>, HarnessError> {
    let opts = SimOptions {
        max_ops: cfg.max_ops,
        fast_forward: cfg.fast_forward,
        log_window: Some(0),
        workload: w.name.clone(),
    };
    let run = |policy: &ReusePolicy| -> Result<SimRun, HarnessError> {
        let (timing, policy) = match point {
            Some(p) => p.apply(&cfg.timing, policy),
            None => (cfg.timing.clone(), policy.clone()),
        };
        simulate(&w.program, &policy, &timing, &opts).map_err(|source| HarnessError::Sim {
            workload: w.name.clone(),
            policy: policy.name.clone(),
            source,
        })
    };
    let baseline = run(&ReusePolicy::baseline())?;
    let listed = |name: &str| cfg.policies.iter().any(|p| p.name == name);
    let reference = if listed(&cfg.reference_policy.name) { None } else { Some(run(&cfg.reference_policy)?) };

    let mut cache = HashMap::new();
    let mut runs: Vec<(&ReusePolicy, SimRun)> = Vec::new();
    for policy in &cfg.policies {
        let r = if policy.name == baseline_name() { baseline.clone() } else { run(policy)? };
        runs.push((policy, r));
    }
    let reference_stats = reference
        .as_ref()
        .map(|r| r.stats.clone())
        .or_else(|| runs.iter().find(|(p, _)| p.name == cfg.reference_policy.name).map(|(_, r)| r.stats.clone()))
        .expect("reference run");

    let mut rows = Vec::with_capacity(runs.len());
    for (policy, r) in runs {
        let label = match point {
            Some(p) => format!("{}@{}", policy.name, p.label()),
            None => policy.name.clone(),
        };
        if r.stats.dyn_ops.total() == 0 {
            return Err(HarnessError::Metric {
                workload: w.name.clone(),
                source: MetricError::NoOps,
            });
        }
        let metrics = MetricRow::from_stats(&label, policy.subset, &r.stats, &baseline.stats, Some(&reference_stats))
            .map_err(|source| HarnessError::Metric { workload: w.name.clone(), source })?;
        rows.push(RowResult {
            row: ReportRow { metrics, oracle_ok: oracle_ok(&mut cache, w, &r)? },
            policy: policy.name.clone(),
            sweep: point.map(SweepPoint::label),
            stats: r.stats,
        });
    }
    Ok(rows)
}

fn baseline_name() -> String {
    ReusePolicy::baseline().name
}

/// Runs every (sweep point x workload x policy) combination. Cells run in
/// parallel; rows come back in a fixed order: sweep point, then workload,
/// then policy as configured.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    let workloads = resolve_workloads(cfg)?;
    let points: Vec<Option<&SweepPoint>> =
        if cfg.sweep.is_empty() { vec![None] } else { cfg.sweep.iter().map(Some).collect() };
    let cells: Vec<(Option<&SweepPoint>, &Workload)> =
        points.iter().flat_map(|&p| workloads.iter().map(move |w| (p, w))).collect();
    let rows: Vec<RowResult> = cells
        .par_iter()
        .map(|&(p, w)| run_cell(cfg, w, p))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    let aggregates = aggregate(&rows.iter().map(|r| r.row.metrics.clone()).collect::<Vec<_>>())?;
    Ok(ExperimentReport { rows, aggregates })
}
