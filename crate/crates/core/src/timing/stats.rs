use super::cache::LevelCounts;
use crate::isa::InstrClass;
use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Index, IndexMut};

/// Micro-op counts per instruction class. Serialized as a map from class
/// name to count, plus a derived `total`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassCounts(pub [u64; InstrClass::COUNT]);

impl ClassCounts {
    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (InstrClass, u64)> + '_ {
        InstrClass::ALL.into_iter().map(|c| (c, self.0[c.index()]))
    }

    pub fn add_counts(&mut self, counts: &[u32; InstrClass::COUNT]) {
        for (acc, &n) in self.0.iter_mut().zip(counts) {
            *acc += n as u64;
        }
    }

    fn saturating_sub(&self, other: &ClassCounts) -> ClassCounts {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(other.0) {
            *a = a.saturating_sub(b);
        }
        out
    }
}

impl Index<InstrClass> for ClassCounts {
    type Output = u64;
    fn index(&self, c: InstrClass) -> &u64 {
        &self.0[c.index()]
    }
}

impl IndexMut<InstrClass> for ClassCounts {
    fn index_mut(&mut self, c: InstrClass) -> &mut u64 {
        &mut self.0[c.index()]
    }
}

impl Serialize for ClassCounts {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(InstrClass::COUNT + 1))?;
        map.serialize_entry("total", &self.total())?;
        for (c, n) in self.iter() {
            map.serialize_entry(c.name(), &n)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for ClassCounts {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct CountsVisitor;

        impl<'de> Visitor<'de> for CountsVisitor {
            type Value = ClassCounts;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from instruction class to count")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<ClassCounts, A::Error> {
                let mut counts = ClassCounts::default();
                let mut seen = [false; InstrClass::COUNT];
                let mut total = None;
                while let Some(key) = map.next_key::<String>()? {
                    let n: u64 = map.next_value()?;
                    if key == "total" {
                        total = Some(n);
                        continue;
                    }
                    let class = InstrClass::ALL
                        .into_iter()
                        .find(|c| c.name() == key)
                        .ok_or_else(|| de::Error::unknown_field(&key, &[]))?;
                    counts[class] = n;
                    seen[class.index()] = true;
                }
                if let Some(missing) = InstrClass::ALL.into_iter().find(|c| !seen[c.index()]) {
                    return Err(de::Error::missing_field(missing.name()));
                }
                if total.is_some_and(|t| t != counts.total()) {
                    return Err(de::Error::custom("total does not match the per-class counts"));
                }
                Ok(counts)
            }
        }

        d.deserialize_map(CountsVisitor)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableCounts {
    /// Unified table, or the trace table in split mode.
    pub trace: u64,
    /// Single-instruction table (split mode only).
    pub instr: u64,
}

impl TableCounts {
    pub fn total(&self) -> u64 {
        self.trace + self.instr
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitCounts {
    pub regular: u64,
    pub speculative: u64,
}

impl HitCounts {
    pub fn total(&self) -> u64 {
        self.regular + self.speculative
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorCounts {
    /// Executed (not reused) branches.
    pub branches: u64,
    pub mispredictions: u64,
}

impl PredictorCounts {
    /// Fraction predicted correctly; 1.0 when no branch executed.
    pub fn accuracy(&self) -> f64 {
        if self.branches == 0 {
            1.0
        } else {
            1.0 - self.mispredictions as f64 / self.branches as f64
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheCounts {
    pub l1i: LevelCounts,
    pub l1d: LevelCounts,
    pub l2: LevelCounts,
    pub l3: LevelCounts,
}

/// Counters of one simulation, measured after the fast-forward point.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub workload: String,
    pub cycles: u64,
    /// Committed micro-ops per class, reused or executed.
    pub dyn_ops: ClassCounts,
    pub reused_ops: ClassCounts,
    pub traces_captured: u64,
    pub instrs_captured: u64,
    pub table_accesses: TableCounts,
    pub table_hits: HitCounts,
    pub table_writes: u64,
    pub misspeculations: u64,
    /// Micro-ops discarded by rollbacks.
    pub squashed_ops: u64,
    pub predictor: PredictorCounts,
    pub cache: CacheCounts,
    pub energy_proxy: f64,
}

fn level_sub(a: LevelCounts, b: LevelCounts) -> LevelCounts {
    LevelCounts { accesses: a.accesses - b.accesses, misses: a.misses - b.misses }
}

impl SimStats {
    pub fn table_accesses_total(&self) -> u64 {
        self.table_accesses.total()
    }

    /// Field-wise difference of cumulative counters; `cycles` and
    /// `energy_proxy` are left to the caller.
    pub(crate) fn delta(&self, earlier: &SimStats) -> SimStats {
        SimStats {
            workload: self.workload.clone(),
            cycles: 0,
            dyn_ops: self.dyn_ops.saturating_sub(&earlier.dyn_ops),
            reused_ops: self.reused_ops.saturating_sub(&earlier.reused_ops),
            traces_captured: self.traces_captured - earlier.traces_captured,
            instrs_captured: self.instrs_captured - earlier.instrs_captured,
            table_accesses: TableCounts {
                trace: self.table_accesses.trace - earlier.table_accesses.trace,
                instr: self.table_accesses.instr - earlier.table_accesses.instr,
            },
            table_hits: HitCounts {
                regular: self.table_hits.regular - earlier.table_hits.regular,
                speculative: self.table_hits.speculative - earlier.table_hits.speculative,
            },
            table_writes: self.table_writes - earlier.table_writes,
            misspeculations: self.misspeculations - earlier.misspeculations,
            squashed_ops: self.squashed_ops - earlier.squashed_ops,
            predictor: PredictorCounts {
                branches: self.predictor.branches - earlier.predictor.branches,
                mispredictions: self.predictor.mispredictions - earlier.predictor.mispredictions,
            },
            cache: CacheCounts {
                l1i: level_sub(self.cache.l1i, earlier.cache.l1i),
                l1d: level_sub(self.cache.l1d, earlier.cache.l1d),
                l2: level_sub(self.cache.l2, earlier.cache.l2),
                l3: level_sub(self.cache.l3, earlier.cache.l3),
            },
            energy_proxy: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<SimStats> {
        serde_json::from_str(text)
    }

    /// Column names of the flat CSV form, matching [`SimStats::csv_record`].
    pub fn csv_header() -> Vec<String> {
        let mut h: Vec<String> = vec!["workload".into(), "cycles".into()];
        for prefix in ["dyn_ops", "reused_ops"] {
            h.push(format!("{prefix}.total"));
            h.extend(InstrClass::ALL.iter().map(|c| format!("{prefix}.{}", c.name())));
        }
        h.extend(
            [
                "traces_captured",
                "instrs_captured",
                "table_accesses.trace",
                "table_accesses.instr",
                "table_hits.regular",
                "table_hits.speculative",
                "table_writes",
                "misspeculations",
                "squashed_ops",
                "predictor.branches",
                "predictor.mispredictions",
            ]
            .map(String::from),
        );
        for level in ["l1i", "l1d", "l2", "l3"] {
            h.push(format!("cache.{level}.accesses"));
            h.push(format!("cache.{level}.misses"));
        }
        h.push("energy_proxy".into());
        h
    }

    pub fn csv_record(&self) -> Vec<String> {
        let mut r = vec![self.workload.clone(), self.cycles.to_string()];
        for counts in [&self.dyn_ops, &self.reused_ops] {
            r.push(counts.total().to_string());
            r.extend(counts.0.iter().map(u64::to_string));
        }
        r.extend(
            [
                self.traces_captured,
                self.instrs_captured,
                self.table_accesses.trace,
                self.table_accesses.instr,
                self.table_hits.regular,
                self.table_hits.speculative,
                self.table_writes,
                self.misspeculations,
                self.squashed_ops,
                self.predictor.branches,
                self.predictor.mispredictions,
            ]
            .map(|v| v.to_string()),
        );
        for level in [self.cache.l1i, self.cache.l1d, self.cache.l2, self.cache.l3] {
            r.push(level.accesses.to_string());
            r.push(level.misses.to_string());
        }
        r.push(format!("{:.6}", self.energy_proxy));
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SimStats {
        let mut s = SimStats { workload: "w".into(), cycles: 120, ..Default::default() };
        s.dyn_ops[InstrClass::AddSub] = 40;
        s.dyn_ops[InstrClass::Branch] = 10;
        s.reused_ops[InstrClass::AddSub] = 12;
        s.table_accesses = TableCounts { trace: 30, instr: 5 };
        s.cache.l1d = LevelCounts { accesses: 9, misses: 2 };
        s.energy_proxy = 35.0 * 327.7;
        s
    }

    #[test]
    fn json_round_trip() {
        let s = sample();
        let json = s.to_json();
        assert!(json.contains("\"AddSub\": 40"));
        assert!(json.contains("\"total\": 50"));
        assert_eq!(SimStats::from_json(&json).unwrap(), s);
    }

    #[test]
    fn json_rejects_inconsistent_total() {
        let json = sample().to_json().replacen("\"total\": 50", "\"total\": 51", 1);
        assert!(SimStats::from_json(&json).is_err());
    }

    #[test]
    fn csv_columns_line_up() {
        let s = sample();
        let header = SimStats::csv_header();
        let record = s.csv_record();
        assert_eq!(header.len(), record.len());
        let col = |name: &str| record[header.iter().position(|h| h == name).unwrap()].clone();
        assert_eq!(col("dyn_ops.total"), "50");
        assert_eq!(col("reused_ops.AddSub"), "12");
        assert_eq!(col("table_accesses.instr"), "5");
        assert_eq!(col("cache.l1d.misses"), "2");
    }

    #[test]
    fn predictor_accuracy() {
        assert_eq!(PredictorCounts::default().accuracy(), 1.0);
        assert_eq!(PredictorCounts { branches: 8, mispredictions: 2 }.accuracy(), 0.75);
    }
}
