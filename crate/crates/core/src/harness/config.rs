//! Flat `key = value` experiment configuration.
//!
//! Blank lines and text after `#` are ignored. Every key can be overridden
//! from the environment as `RSTSIM_` followed by the key upper-cased with
//! dots replaced by underscores, e.g. `RSTSIM_MAX_OPS` or `RSTSIM_L1D_SIZE`.

use super::workloads::Tag;
use super::HarnessError;
use crate::reuse::ReusePolicy;
use crate::timing::{CacheLevelConfig, TimingConfig};
use std::path::{Path, PathBuf};

pub const ENV_PREFIX: &str = "RSTSIM_";

/// Recognised keys with a one-line description each.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("workloads", "`all` or a comma list of built-in workload names"),
    ("generate", "comma list of `kind:size` generated workloads, seeded by `seed`"),
    ("policies", "`all` or a comma list of policy presets; Baseline always runs"),
    ("reference_policy", "policy whose table accesses anchor access_reduction (default RST)"),
    ("fast_forward", "micro-ops committed before counters start (default 10000)"),
    ("max_ops", "micro-op budget per run (default 1000000)"),
    ("seed", "seed for generated workloads (default 1)"),
    ("sweep", "comma list of `L1SIZE:TABLE_ENTRIES` points, e.g. `32K:512, 64K:512, 32K:1024`"),
    ("out", "output directory"),
    ("width", "micro-ops issued per cycle"),
    ("alu_units", "integer ALUs"),
    ("mem_ports", "memory ports"),
    ("mul_units", "multipliers"),
    ("frontend_depth", "cycles from fetch to issue"),
    ("branch_mispredict_penalty", "cycles lost on a mispredicted branch"),
    ("reuse_hit_latency", "cycles to read a table entry and write its outputs"),
    ("rollback_penalty", "cycles lost on a misspeculated reuse"),
    ("window", "in-flight units"),
    ("alu_latency", "integer ALU latency"),
    ("mul_latency", "multiply latency"),
    ("float_latency", "fadd latency"),
    ("l1i.size", "L1 instruction cache bytes (K and M suffixes accepted)"),
    ("l1i.assoc", "L1 instruction cache ways"),
    ("l1i.line", "L1 instruction cache line bytes"),
    ("l1i.hit", "L1 instruction cache hit cycles"),
    ("l1d.size", "L1 data cache bytes"),
    ("l1d.assoc", "L1 data cache ways"),
    ("l1d.line", "L1 data cache line bytes"),
    ("l1d.hit", "L1 data cache hit cycles"),
    ("l2.size", "L2 bytes"),
    ("l2.assoc", "L2 ways"),
    ("l2.line", "L2 line bytes"),
    ("l2.hit", "L2 hit cycles"),
    ("l3.size", "L3 bytes"),
    ("l3.assoc", "L3 ways"),
    ("l3.line", "L3 line bytes"),
    ("l3.hit", "L3 hit cycles"),
    ("memory_latency", "memory access cycles"),
    ("energy_per_access", "energy units per table access, entries with branch bitmaps"),
    ("energy_per_access_no_branch", "energy units per table access, entries without branch bitmaps"),
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WorkloadSelector {
    All,
    Named(Vec<String>),
}

/// One point of a memory-budget sweep: both L1 caches and the (trace)
/// table are resized.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepPoint {
    pub l1_bytes: usize,
    pub table_entries: usize,
}

impl SweepPoint {
    pub fn label(&self) -> String {
        format!("{}:{}", format_size(self.l1_bytes), self.table_entries)
    }

    pub fn apply(&self, timing: &TimingConfig, policy: &ReusePolicy) -> (TimingConfig, ReusePolicy) {
        let mut t = timing.clone();
        t.l1i.size = self.l1_bytes;
        t.l1d.size = self.l1_bytes;
        let mut p = policy.clone();
        p.trace_table.entries = self.table_entries;
        (t, p)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub workloads: WorkloadSelector,
    pub generated: Vec<(Tag, u32)>,
    pub policies: Vec<ReusePolicy>,
    pub reference_policy: ReusePolicy,
    pub timing: TimingConfig,
    pub fast_forward: u64,
    pub max_ops: u64,
    pub seed: u64,
    pub sweep: Vec<SweepPoint>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            workloads: WorkloadSelector::All,
            generated: Vec::new(),
            policies: ReusePolicy::presets(),
            reference_policy: ReusePolicy::rst(),
            timing: TimingConfig::default(),
            fast_forward: 10_000,
            max_ops: 1_000_000,
            seed: 1,
            sweep: Vec::new(),
            out: None,
        }
    }
}

fn bad(key: &str, value: &str, why: impl Into<String>) -> HarnessError {
    HarnessError::ConfigValue { key: key.to_string(), value: value.to_string(), reason: why.into() }
}

/// Parses a byte count with an optional `K` or `M` suffix.
pub fn parse_size(s: &str) -> Option<usize> {
    let s = s.trim();
    let (digits, scale) = match s.chars().last()? {
        'k' | 'K' => (&s[..s.len() - 1], 1024),
        'm' | 'M' => (&s[..s.len() - 1], 1024 * 1024),
        _ => (s, 1),
    };
    digits.trim().parse::<usize>().ok()?.checked_mul(scale)
}

fn format_size(bytes: usize) -> String {
    if bytes.is_multiple_of(1024 * 1024) {
        format!("{}M", bytes / (1024 * 1024))
    } else if bytes.is_multiple_of(1024) {
        format!("{}K", bytes / 1024)
    } else {
        bytes.to_string()
    }
}

fn list(value: &str) -> Vec<String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = ExperimentConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::ConfigSyntax { line: n + 1, text: raw.to_string() })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    /// Reads `path` (when given), then applies `RSTSIM_*` variables from
    /// the process environment, then validates.
    pub fn load(path: Option<&Path>) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| HarnessError::Io(p.to_path_buf(), e))?;
                ExperimentConfig::parse(&text)?
            }
            None => ExperimentConfig::default(),
        };
        cfg.apply_env(std::env::vars())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies overrides from `(name, value)` pairs; names without the
    /// prefix are ignored.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), HarnessError> {
        let mut vars: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        vars.sort();
        for (name, value) in vars {
            let suffix = &name[ENV_PREFIX.len()..];
            let key = CONFIG_KEYS
                .iter()
                .map(|(k, _)| *k)
                .find(|k| k.replace('.', "_").eq_ignore_ascii_case(suffix))
                .ok_or_else(|| HarnessError::UnknownKey(name.clone()))?;
            self.set(key, &value)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let int = |v: &str| v.trim().replace('_', "").parse::<u64>().map_err(|_| bad(key, v, "expected an integer"));
        let size = |v: &str| parse_size(v).ok_or_else(|| bad(key, v, "expected a byte size"));
        let float = |v: &str| v.trim().parse::<f64>().map_err(|_| bad(key, v, "expected a number"));
        let t = &mut self.timing;
        match key {
            "workloads" => {
                self.workloads = if value.eq_ignore_ascii_case("all") {
                    WorkloadSelector::All
                } else {
                    WorkloadSelector::Named(list(value))
                }
            }
            "generate" => {
                self.generated = list(value)
                    .iter()
                    .map(|item| {
                        let (kind, n) = item.split_once(':').ok_or_else(|| bad(key, item, "expected kind:size"))?;
                        let n = n.trim().parse::<u32>().map_err(|_| bad(key, item, "bad size"))?;
                        Ok((kind.parse::<Tag>()?, n))
                    })
                    .collect::<Result<_, HarnessError>>()?
            }
            "policies" => {
                self.policies = if value.eq_ignore_ascii_case("all") {
                    ReusePolicy::presets()
                } else {
                    list(value).iter().map(|n| ReusePolicy::preset(n)).collect::<Result<_, _>>()?
                }
            }
            "reference_policy" => self.reference_policy = ReusePolicy::preset(value)?,
            "fast_forward" => self.fast_forward = int(value)?,
            "max_ops" => self.max_ops = int(value)?,
            "seed" => self.seed = int(value)?,
            "sweep" => {
                self.sweep = list(value)
                    .iter()
                    .map(|item| {
                        let (l1, entries) = item.split_once(':').ok_or_else(|| bad(key, item, "expected L1SIZE:ENTRIES"))?;
                        Ok(SweepPoint {
                            l1_bytes: parse_size(l1).ok_or_else(|| bad(key, item, "bad L1 size"))?,
                            table_entries: entries.trim().parse().map_err(|_| bad(key, item, "bad table entries"))?,
                        })
                    })
                    .collect::<Result<_, HarnessError>>()?
            }
            "out" => self.out = Some(PathBuf::from(value)),
            "width" => t.width = int(value)? as usize,
            "alu_units" => t.alu_units = int(value)? as usize,
            "mem_ports" => t.mem_ports = int(value)? as usize,
            "mul_units" => t.mul_units = int(value)? as usize,
            "frontend_depth" => t.frontend_depth = int(value)?,
            "branch_mispredict_penalty" => t.branch_mispredict_penalty = int(value)?,
            "reuse_hit_latency" => t.reuse_hit_latency = int(value)?,
            "rollback_penalty" => t.rollback_penalty = int(value)?,
            "window" => t.window = int(value)? as usize,
            "alu_latency" => t.alu_latency = int(value)?,
            "mul_latency" => t.mul_latency = int(value)?,
            "float_latency" => t.float_latency = int(value)?,
            "memory_latency" => t.memory_latency = int(value)?,
            "energy_per_access" => t.energy_per_access = float(value)?,
            "energy_per_access_no_branch" => t.energy_per_access_no_branch = float(value)?,
            _ => {
                let (level, field) = key.split_once('.').ok_or_else(|| HarnessError::UnknownKey(key.to_string()))?;
                let level: &mut CacheLevelConfig = match level {
                    "l1i" => &mut t.l1i,
                    "l1d" => &mut t.l1d,
                    "l2" => &mut t.l2,
                    "l3" => &mut t.l3,
                    _ => return Err(HarnessError::UnknownKey(key.to_string())),
                };
                match field {
                    "size" => level.size = size(value)?,
                    "assoc" => level.assoc = int(value)? as usize,
                    "line" => level.line = size(value)?,
                    "hit" => level.hit_latency = int(value)?,
                    _ => return Err(HarnessError::UnknownKey(key.to_string())),
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.policies.is_empty() {
            return Err(HarnessError::Invalid("policy list is empty".into()));
        }
        if self.max_ops == 0 {
            return Err(HarnessError::Invalid("max_ops must be positive".into()));
        }
        if self.fast_forward >= self.max_ops {
            return Err(HarnessError::Invalid(format!(
                "fast_forward ({}) must be below max_ops ({})",
                self.fast_forward, self.max_ops
            )));
        }
        if matches!(&self.workloads, WorkloadSelector::Named(v) if v.is_empty()) && self.generated.is_empty() {
            return Err(HarnessError::Invalid("no workloads selected".into()));
        }
        self.timing.validate().map_err(|e| HarnessError::Invalid(e.to_string()))?;
        for p in self.policies.iter().chain([&self.reference_policy]) {
            p.validate()?;
        }
        for point in &self.sweep {
            for p in self.policies.iter().chain([&self.reference_policy]) {
                let (t, p) = point.apply(&self.timing, p);
                t.validate().map_err(|e| HarnessError::Invalid(format!("sweep {}: {e}", point.label())))?;
                p.validate().map_err(|e| HarnessError::Invalid(format!("sweep {}: {e}", point.label())))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.max_ops, 1_000_000);
        assert_eq!(cfg.fast_forward, 10_000);
        assert_eq!(cfg.policies.len(), 12);
    }

    #[test]
    fn parses_keys() {
        let cfg = ExperimentConfig::parse(
            "# comment\nworkloads = redundant_loop, branchy\npolicies = DTM, rst-loop\nmax_ops = 200_000 # trailing\n\
             fast_forward=0\nl1d.size = 64K\nl2.hit = 6\nsweep = 32K:512, 64K:512, 32K:1024\ngenerate = loop-heavy:20\n",
        )
        .unwrap();
        assert_eq!(cfg.workloads, WorkloadSelector::Named(vec!["redundant_loop".into(), "branchy".into()]));
        assert_eq!(cfg.policies.iter().map(|p| p.name.as_str()).collect::<Vec<_>>(), ["DTM", "RST-Loop"]);
        assert_eq!(cfg.max_ops, 200_000);
        assert_eq!(cfg.fast_forward, 0);
        assert_eq!(cfg.timing.l1d.size, 64 * 1024);
        assert_eq!(cfg.timing.l2.hit_latency, 6);
        assert_eq!(cfg.sweep.len(), 3);
        assert_eq!(cfg.sweep[2], SweepPoint { l1_bytes: 32 * 1024, table_entries: 1024 });
        assert_eq!(cfg.sweep[1].label(), "64K:512");
        assert_eq!(cfg.generated, vec![(Tag::LoopHeavy, 20)]);
        cfg.validate().unwrap();
    }

    #[test]
    fn env_overrides_file() {
        let mut cfg = ExperimentConfig::parse("max_ops = 5000\n").unwrap();
        let vars = [
            ("RSTSIM_MAX_OPS".to_string(), "9000".to_string()),
            ("RSTSIM_L1I_ASSOC".to_string(), "8".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ];
        cfg.apply_env(vars).unwrap();
        assert_eq!(cfg.max_ops, 9000);
        assert_eq!(cfg.timing.l1i.assoc, 8);
        assert!(cfg.apply_env([("RSTSIM_NOPE".to_string(), "1".to_string())]).is_err());
    }

    #[test]
    fn every_key_has_an_env_name() {
        let mut cfg = ExperimentConfig::default();
        for (key, _) in CONFIG_KEYS {
            let name = format!("{ENV_PREFIX}{}", key.replace('.', "_").to_uppercase());
            // a value that is at least well-formed for the key's type
            let value = match *key {
                "workloads" => "all",
                "generate" => "loopless:5",
                "policies" => "all",
                "reference_policy" => "RST",
                "sweep" => "32K:512",
                "out" => "/tmp/x",
                k if k.starts_with("energy") => "1.5",
                k if k.ends_with(".size") => "32K",
                k if k.ends_with(".line") => "64",
                _ => "4",
            };
            cfg.apply_env([(name, value.to_string())]).unwrap();
        }
    }

    #[test]
    fn validation_errors() {
        let cfg = ExperimentConfig::parse("policies = \n").unwrap();
        assert!(matches!(cfg.validate(), Err(HarnessError::Invalid(_))));
        let cfg = ExperimentConfig::parse("fast_forward = 100\nmax_ops = 100\n").unwrap();
        assert!(cfg.validate().is_err());
        assert!(matches!(ExperimentConfig::parse("bogus = 1"), Err(HarnessError::UnknownKey(_))));
        assert!(matches!(ExperimentConfig::parse("max_ops"), Err(HarnessError::ConfigSyntax { line: 1, .. })));
        assert!(ExperimentConfig::parse("max_ops = many").is_err());
        assert!(ExperimentConfig::parse("policies = RST, nonsense").is_err());
        let cfg = ExperimentConfig::parse("sweep = 33:512").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sizes() {
        assert_eq!(parse_size("32K"), Some(32768));
        assert_eq!(parse_size("2m"), Some(2 << 20));
        assert_eq!(parse_size("256"), Some(256));
        assert_eq!(parse_size("x"), None);
    }
}
