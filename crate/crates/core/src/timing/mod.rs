//! Cycle-approximate performance model.
//!
//! A scoreboard core: an in-order front end delivers `width` units per
//! cycle after `frontend_depth` cycles of fill, each micro-op issues at the
//! first cycle where its operands are ready and a functional unit of its
//! kind is free, and a bounded window of in-flight units limits how far the
//! front end runs ahead. Reused traces occupy one front-end slot and write
//! their live-outs after `reuse_hit_latency` cycles.

mod cache;
mod predictor;
mod sim;
mod stats;

pub use cache::{Cache, CacheHierarchy, CacheLevelConfig, CachePort, LevelCounts};
pub use predictor::{PredictorState, BTB_ASSOC, BTB_ENTRIES, HISTORY_BITS, PHT_ENTRIES};
pub use sim::{simulate, SimError, SimOptions, SimRun};
pub use stats::{CacheCounts, ClassCounts, HitCounts, PredictorCounts, SimStats, TableCounts};

use crate::isa::InstrClass;
use crate::reuse::ReusePolicy;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid timing configuration: {0}")]
pub struct TimingConfigError(pub String);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub width: usize,
    pub alu_units: usize,
    pub mem_ports: usize,
    pub mul_units: usize,
    pub frontend_depth: u64,
    pub branch_mispredict_penalty: u64,
    pub reuse_hit_latency: u64,
    pub rollback_penalty: u64,
    /// In-flight units (reuse hits count as one).
    pub window: usize,
    pub alu_latency: u64,
    pub mul_latency: u64,
    /// `fadd` runs on an ALU with this latency.
    pub float_latency: u64,
    pub l1i: CacheLevelConfig,
    pub l1d: CacheLevelConfig,
    pub l2: CacheLevelConfig,
    pub l3: CacheLevelConfig,
    pub memory_latency: u64,
    /// Energy units per reuse-table access when entries carry branch bitmaps.
    pub energy_per_access: f64,
    /// Same, for entries without branch bitmaps.
    pub energy_per_access_no_branch: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        let l1 = CacheLevelConfig::new(32 * 1024, 4, 64, 1);
        TimingConfig {
            width: 4,
            alu_units: 2,
            mem_ports: 2,
            mul_units: 1,
            frontend_depth: 10,
            branch_mispredict_penalty: 10,
            reuse_hit_latency: 1,
            rollback_penalty: 10,
            window: 128,
            alu_latency: 1,
            mul_latency: 3,
            float_latency: 2,
            l1i: l1,
            l1d: l1,
            l2: CacheLevelConfig::new(512 * 1024, 8, 256, 5),
            l3: CacheLevelConfig::new(2 * 1024 * 1024, 8, 256, 20),
            memory_latency: 200,
            energy_per_access: 327.7,
            energy_per_access_no_branch: 320.6,
        }
    }
}

impl TimingConfig {
    pub fn validate(&self) -> Result<(), TimingConfigError> {
        let err = |m: &str| Err(TimingConfigError(m.to_string()));
        if self.width == 0 {
            return err("width must be at least 1");
        }
        if self.alu_units == 0 || self.mem_ports == 0 || self.mul_units == 0 {
            return err("every functional unit kind needs at least one unit");
        }
        if self.window == 0 {
            return err("window must be at least 1");
        }
        let latencies = [
            self.branch_mispredict_penalty,
            self.reuse_hit_latency,
            self.rollback_penalty,
            self.alu_latency,
            self.mul_latency,
            self.float_latency,
            self.memory_latency,
        ];
        if latencies.contains(&0) {
            return err("all latencies and penalties must be at least 1");
        }
        for (name, level) in [("l1i", &self.l1i), ("l1d", &self.l1d), ("l2", &self.l2), ("l3", &self.l3)] {
            level.validate().map_err(|e| TimingConfigError(format!("{name}: {e}")))?;
        }
        if !(self.energy_per_access >= 0.0 && self.energy_per_access_no_branch >= 0.0) {
            return err("energy constants must be non-negative");
        }
        Ok(())
    }

    pub fn hierarchy(&self) -> CacheHierarchy {
        CacheHierarchy::new(self.l1i, self.l1d, self.l2, self.l3, self.memory_latency)
    }

    /// Per-access energy for `policy`: entries drop their branch bitmaps
    /// when branches are outside the reuse subset.
    pub fn access_energy(&self, policy: &ReusePolicy) -> f64 {
        if has_branch_fields(policy) {
            self.energy_per_access
        } else {
            self.energy_per_access_no_branch
        }
    }
}

fn has_branch_fields(policy: &ReusePolicy) -> bool {
    policy.subset.classes().contains(InstrClass::Branch)
}

/// Storage bits of one trace entry with 32-bit addresses.
pub fn entry_bits(policy: &ReusePolicy, value_width: u32) -> u32 {
    entry_bits_with_address(policy, value_width, 32)
}

/// `pc + npc + in*(5+vw) + out*(5+vw)`, plus `bm` and `btk` (one bit per
/// allowed branch each) when branches are in the subset.
pub fn entry_bits_with_address(policy: &ReusePolicy, value_width: u32, address_width: u32) -> u32 {
    assert!(value_width > 0, "value width must be positive");
    let reg_field = 5 + value_width;
    let bitmaps = if has_branch_fields(policy) { 2 * policy.branch_limit as u32 } else { 0 };
    2 * address_width + policy.input_scope as u32 * reg_field + policy.output_scope as u32 * reg_field + bitmaps
}
