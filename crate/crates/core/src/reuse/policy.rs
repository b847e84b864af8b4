use crate::isa::DomainSubset;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReuseMode {
    /// No reuse; tables are never consulted.
    Baseline,
    /// Non-speculative trace memoization.
    Dtm,
    /// Trace memoization with speculation on unavailable inputs.
    Rst,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LoopGateMode {
    Always,
    InsideLoopsOnly,
    OutsideLoopsOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TableMode {
    /// Single instructions and traces share one table.
    Unified,
    /// Single instructions go to the instruction table, traces of two or
    /// more micro-ops to the trace table.
    Split,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TableGeometry {
    pub entries: usize,
    pub assoc: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("unknown policy `{0}`")]
    UnknownPreset(String),
    #[error("table of {entries} entries is not a positive multiple of associativity {assoc}")]
    Geometry { entries: usize, assoc: usize },
    #[error("branch_limit must be between 0 and 32, got {0}")]
    BranchLimit(usize),
}

impl TableGeometry {
    pub const fn new(entries: usize, assoc: usize) -> Self {
        TableGeometry { entries, assoc }
    }

    pub fn sets(self) -> usize {
        self.entries / self.assoc
    }

    pub fn validate(self) -> Result<(), PolicyError> {
        if self.assoc == 0 || self.entries == 0 || !self.entries.is_multiple_of(self.assoc) {
            return Err(PolicyError::Geometry { entries: self.entries, assoc: self.assoc });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReusePolicy {
    pub name: String,
    pub mode: ReuseMode,
    pub subset: DomainSubset,
    pub loop_gate: LoopGateMode,
    pub input_scope: usize,
    pub output_scope: usize,
    /// Maximum branches per trace; also the width of `bm` and `btk`.
    pub branch_limit: usize,
    pub table_mode: TableMode,
    pub trace_table: TableGeometry,
    /// Only used in split mode.
    pub instr_table: TableGeometry,
}

pub const DEFAULT_BRANCH_LIMIT: usize = 4;

impl ReusePolicy {
    /// Unified table, input scope 2, output scope 1, 512 entries 4-way.
    pub fn unified(name: &str, mode: ReuseMode, loop_gate: LoopGateMode) -> Self {
        ReusePolicy {
            name: name.to_string(),
            mode,
            subset: DomainSubset::O,
            loop_gate,
            input_scope: 2,
            output_scope: 1,
            branch_limit: DEFAULT_BRANCH_LIMIT,
            table_mode: TableMode::Unified,
            trace_table: TableGeometry::new(512, 4),
            instr_table: TableGeometry::new(1024, 4),
        }
    }

    /// Split tables: traces 512 entries 4-way with scopes (4,4), single
    /// instructions 1024 entries 4-way.
    pub fn split(name: &str, mode: ReuseMode, subset: DomainSubset) -> Self {
        ReusePolicy {
            name: name.to_string(),
            mode,
            subset,
            loop_gate: LoopGateMode::Always,
            input_scope: 4,
            output_scope: 4,
            branch_limit: DEFAULT_BRANCH_LIMIT,
            table_mode: TableMode::Split,
            trace_table: TableGeometry::new(512, 4),
            instr_table: TableGeometry::new(1024, 4),
        }
    }

    pub fn baseline() -> Self {
        ReusePolicy::unified("Baseline", ReuseMode::Baseline, LoopGateMode::Always)
    }

    pub fn dtm() -> Self {
        ReusePolicy::unified("DTM", ReuseMode::Dtm, LoopGateMode::Always)
    }

    pub fn rst() -> Self {
        ReusePolicy::unified("RST", ReuseMode::Rst, LoopGateMode::Always)
    }

    pub fn rst_loop() -> Self {
        ReusePolicy::unified("RST-Loop", ReuseMode::Rst, LoopGateMode::InsideLoopsOnly)
    }

    pub fn rst_out_of_loop() -> Self {
        ReusePolicy::unified("RST-Out-Of-Loop", ReuseMode::Rst, LoopGateMode::OutsideLoopsOnly)
    }

    /// RST restricted to one reuse-domain subset, on split tables.
    pub fn rst_subset(subset: DomainSubset) -> Self {
        ReusePolicy::split(&format!("RST-{}", subset.name()), ReuseMode::Rst, subset)
    }

    /// Every named preset, in report order.
    pub fn presets() -> Vec<ReusePolicy> {
        let mut all = vec![
            ReusePolicy::baseline(),
            ReusePolicy::dtm(),
            ReusePolicy::rst(),
            ReusePolicy::rst_loop(),
            ReusePolicy::rst_out_of_loop(),
        ];
        all.extend(DomainSubset::ALL.into_iter().map(ReusePolicy::rst_subset));
        all
    }

    /// Case-insensitive preset lookup by name.
    pub fn preset(name: &str) -> Result<ReusePolicy, PolicyError> {
        ReusePolicy::presets()
            .into_iter()
            .find(|p| p.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| PolicyError::UnknownPreset(name.to_string()))
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        self.trace_table.validate()?;
        if self.table_mode == TableMode::Split {
            self.instr_table.validate()?;
        }
        if self.branch_limit > 32 {
            return Err(PolicyError::BranchLimit(self.branch_limit));
        }
        Ok(())
    }

    pub fn reuses(&self) -> bool {
        self.mode != ReuseMode::Baseline
    }
}

impl fmt::Display for ReusePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_names() {
        assert_eq!(ReusePolicy::preset("rst-loop").unwrap(), ReusePolicy::rst_loop());
        assert_eq!(ReusePolicy::preset("RST-NotB").unwrap().subset, DomainSubset::NotB);
        assert!(ReusePolicy::preset("bogus").is_err());
        assert_eq!(ReusePolicy::presets().len(), 12);
        for p in ReusePolicy::presets() {
            p.validate().unwrap();
        }
    }

    #[test]
    fn geometry_validation() {
        assert!(TableGeometry::new(512, 4).validate().is_ok());
        assert_eq!(TableGeometry::new(512, 4).sets(), 128);
        assert!(TableGeometry::new(510, 4).validate().is_err());
        assert!(TableGeometry::new(16, 0).validate().is_err());
    }
}
