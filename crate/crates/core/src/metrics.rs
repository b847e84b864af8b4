//! Derived metrics and machine-readable reports.

use crate::isa::{DomainSubset, InstrClass};
use crate::timing::SimStats;
use serde::{Deserialize, Serialize};
use std::io;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("speedup compares different workloads: {0} vs {1}")]
    WorkloadMismatch(String, String),
    #[error("run reports zero cycles")]
    ZeroCycles,
    #[error("reference run made no table accesses")]
    NoReferenceAccesses,
    #[error("no dynamic operations to classify")]
    NoOps,
    #[error("harmonic mean needs at least one value")]
    EmptyMean,
    #[error("harmonic mean of non-positive value {0}")]
    NonPositive(f64),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("report row {row}: {msg}")]
    Malformed { row: usize, msg: String },
}

/// Fraction of executed micro-ops from `subset` that were reused.
pub fn reuse_rate(stats: &SimStats, subset: DomainSubset) -> f64 {
    let (reused, executed) = subset
        .classes()
        .iter()
        .fold((0, 0), |(r, e), c| (r + stats.reused_ops[c], e + stats.dyn_ops[c]));
    if executed == 0 {
        0.0
    } else {
        reused as f64 / executed as f64
    }
}

/// Speedup per unit of reuse rate; `None` when nothing was reused.
pub fn efficiency_index(speedup: f64, rr: f64) -> Option<f64> {
    (rr > 0.0).then(|| speedup / rr)
}

pub fn speedup(baseline: &SimStats, mode: &SimStats) -> Result<f64, MetricError> {
    if baseline.workload != mode.workload {
        return Err(MetricError::WorkloadMismatch(baseline.workload.clone(), mode.workload.clone()));
    }
    if mode.cycles == 0 {
        return Err(MetricError::ZeroCycles);
    }
    Ok(baseline.cycles as f64 / mode.cycles as f64)
}

/// `1 - restricted / reference` over total table accesses. Negative when
/// the restricted run accessed the tables more.
pub fn access_reduction(reference: &SimStats, restricted: &SimStats) -> Result<f64, MetricError> {
    let base = reference.table_accesses.total();
    if base == 0 {
        return Err(MetricError::NoReferenceAccesses);
    }
    Ok(1.0 - restricted.table_accesses.total() as f64 / base as f64)
}

/// Dynamic instruction mix in four groups.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mix {
    /// Address calculations and memory accesses.
    pub memory: f64,
    pub branch: f64,
    /// Add/sub and other integer ALU operations.
    pub logic_arith: f64,
    pub other: f64,
}

pub fn mix_distribution(stats: &SimStats) -> Result<Mix, MetricError> {
    let total = stats.dyn_ops.total();
    if total == 0 {
        return Err(MetricError::NoOps);
    }
    let frac = |classes: &[InstrClass]| classes.iter().map(|&c| stats.dyn_ops[c]).sum::<u64>() as f64 / total as f64;
    let memory = frac(&[InstrClass::AddrCalc, InstrClass::MemAccess]);
    let branch = frac(&[InstrClass::Branch]);
    let logic_arith = frac(&[InstrClass::AddSub, InstrClass::OtherIntAlu]);
    Ok(Mix { memory, branch, logic_arith, other: 1.0 - memory - branch - logic_arith })
}

pub fn harmonic_mean(values: &[f64]) -> Result<f64, MetricError> {
    if values.is_empty() {
        return Err(MetricError::EmptyMean);
    }
    if let Some(&bad) = values.iter().find(|&&v| v.is_nan() || v <= 0.0) {
        return Err(MetricError::NonPositive(bad));
    }
    Ok(values.len() as f64 / values.iter().map(|v| 1.0 / v).sum::<f64>())
}

/// Rounds to the six fractional digits used in reports, so emitted values
/// parse back to the same number.
pub fn quantize(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

pub const CSV_HEADER: [&str; 12] = [
    "workload",
    "policy",
    "cycles",
    "speedup",
    "rr",
    "ei",
    "table_accesses",
    "access_reduction",
    "mem_frac",
    "branch_frac",
    "alu_frac",
    "other_frac",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub workload: String,
    pub policy: String,
    pub cycles: u64,
    pub speedup: f64,
    pub rr: f64,
    pub ei: Option<f64>,
    pub table_accesses: u64,
    /// Relative to the reference policy; absent when the reference made no
    /// accesses.
    pub access_reduction: Option<f64>,
    pub mem_frac: f64,
    pub branch_frac: f64,
    pub alu_frac: f64,
    pub other_frac: f64,
}

impl MetricRow {
    /// Builds a row for `stats`, run under `policy` with reuse subset
    /// `subset`, against the baseline run and an optional reference run
    /// for the access reduction.
    pub fn from_stats(
        policy: &str,
        subset: DomainSubset,
        stats: &SimStats,
        baseline: &SimStats,
        reference: Option<&SimStats>,
    ) -> Result<MetricRow, MetricError> {
        let speedup = quantize(speedup(baseline, stats)?);
        let rr = quantize(reuse_rate(stats, subset));
        let mix = mix_distribution(stats)?;
        let access_reduction = match reference {
            Some(r) if r.table_accesses.total() > 0 => Some(quantize(access_reduction(r, stats)?)),
            _ => None,
        };
        Ok(MetricRow {
            workload: stats.workload.clone(),
            policy: policy.to_string(),
            cycles: stats.cycles,
            speedup,
            rr,
            ei: efficiency_index(speedup, rr).map(quantize),
            table_accesses: stats.table_accesses.total(),
            access_reduction,
            mem_frac: quantize(mix.memory),
            branch_frac: quantize(mix.branch),
            alu_frac: quantize(mix.logic_arith),
            other_frac: quantize(mix.other),
        })
    }

    fn csv_record(&self) -> Vec<String> {
        let f = |x: f64| format!("{x:.6}");
        let opt = |x: Option<f64>| x.map(f).unwrap_or_default();
        vec![
            self.workload.clone(),
            self.policy.clone(),
            self.cycles.to_string(),
            f(self.speedup),
            f(self.rr),
            opt(self.ei),
            self.table_accesses.to_string(),
            opt(self.access_reduction),
            f(self.mem_frac),
            f(self.branch_frac),
            f(self.alu_frac),
            f(self.other_frac),
        ]
    }

    fn from_csv_record(row: usize, rec: &csv::StringRecord) -> Result<MetricRow, MetricError> {
        let bad = |msg: String| MetricError::Malformed { row, msg };
        if rec.len() != CSV_HEADER.len() {
            return Err(bad(format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len())));
        }
        let num = |i: usize| -> Result<f64, MetricError> {
            rec[i].parse().map_err(|_| bad(format!("{}: bad number {:?}", CSV_HEADER[i], &rec[i])))
        };
        let opt = |i: usize| if rec[i].is_empty() { Ok(None) } else { num(i).map(Some) };
        let int = |i: usize| -> Result<u64, MetricError> {
            rec[i].parse().map_err(|_| bad(format!("{}: bad integer {:?}", CSV_HEADER[i], &rec[i])))
        };
        Ok(MetricRow {
            workload: rec[0].to_string(),
            policy: rec[1].to_string(),
            cycles: int(2)?,
            speedup: num(3)?,
            rr: num(4)?,
            ei: opt(5)?,
            table_accesses: int(6)?,
            access_reduction: opt(7)?,
            mem_frac: num(8)?,
            branch_frac: num(9)?,
            alu_frac: num(10)?,
            other_frac: num(11)?,
        })
    }
}

pub fn write_csv<W: io::Write>(rows: &[MetricRow], out: W) -> Result<(), MetricError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.csv_record())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn to_csv_string(rows: &[MetricRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("in-memory csv");
    String::from_utf8(buf).expect("utf-8 csv")
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<MetricRow>, MetricError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(MetricError::Malformed { row: 0, msg: format!("unexpected header {:?}", header) });
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| MetricRow::from_csv_record(i + 1, &rec?))
        .collect()
}

/// Harmonic means over workloads for one policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub policy: String,
    pub hm_speedup: f64,
    /// Over the workloads where EI is defined; absent if there are none.
    pub hm_ei: Option<f64>,
}

/// One aggregate per policy, in order of first appearance.
pub fn aggregate(rows: &[MetricRow]) -> Result<Vec<AggregateRow>, MetricError> {
    let mut policies: Vec<&str> = Vec::new();
    for r in rows {
        if !policies.contains(&r.policy.as_str()) {
            policies.push(&r.policy);
        }
    }
    policies
        .into_iter()
        .map(|p| {
            let of = || rows.iter().filter(move |r| r.policy == p);
            let speedups: Vec<f64> = of().map(|r| r.speedup).collect();
            let eis: Vec<f64> = of().filter_map(|r| r.ei).collect();
            Ok(AggregateRow {
                policy: p.to_string(),
                hm_speedup: quantize(harmonic_mean(&speedups)?),
                hm_ei: if eis.is_empty() { None } else { Some(quantize(harmonic_mean(&eis)?)) },
            })
        })
        .collect()
}
