use super::entry::TraceEntry;
use super::policy::TableGeometry;
use crate::isa::Reg;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Lookup {
    Miss,
    Regular(TraceEntry),
    /// Every known input matched; `assumed` lists the unknown inputs with
    /// the values the entry was recorded with.
    Speculative { entry: TraceEntry, assumed: Vec<(Reg, u32)> },
}

impl Lookup {
    pub fn is_hit(&self) -> bool {
        !matches!(self, Lookup::Miss)
    }
}

/// Set-associative memoization table with per-set LRU replacement.
/// Each set keeps its ways ordered most recently used first.
#[derive(Clone, Debug)]
pub struct ReuseTable {
    geometry: TableGeometry,
    sets: Vec<Vec<TraceEntry>>,
    pub accesses: u64,
    pub regular_hits: u64,
    pub speculative_hits: u64,
    pub writes: u64,
}

impl ReuseTable {
    pub fn new(geometry: TableGeometry) -> Self {
        geometry.validate().expect("table geometry");
        let sets = geometry.sets();
        ReuseTable {
            geometry,
            sets: vec![Vec::with_capacity(geometry.assoc); sets],
            accesses: 0,
            regular_hits: 0,
            speculative_hits: 0,
            writes: 0,
        }
    }

    pub fn geometry(&self) -> TableGeometry {
        self.geometry
    }

    pub fn set_index(&self, pc: u32) -> usize {
        ((pc / 4) as usize) % self.sets.len()
    }

    /// Searches the set for `pc`. `known` tells whether a register's value is
    /// available; unavailable inputs can only produce a speculative hit, and
    /// only when `allow_speculation` is set. A regular hit is preferred over
    /// a speculative one; among candidates of the same kind the most
    /// recently used way wins. Hits move to MRU. Counts one access.
    pub fn lookup(
        &mut self,
        pc: u32,
        regs: &[u32],
        known: impl Fn(Reg) -> bool,
        allow_speculation: bool,
    ) -> Lookup {
        self.accesses += 1;
        let set = self.set_index(pc);
        let ways = &mut self.sets[set];
        let mut speculative: Option<(usize, Vec<(Reg, u32)>)> = None;
        let mut regular: Option<usize> = None;

        for (way, entry) in ways.iter().enumerate() {
            if entry.pc != pc {
                continue;
            }
            let mut assumed = Vec::new();
            let mut matches = true;
            for &(r, v) in &entry.inputs {
                if known(r) {
                    if regs[r.index()] != v {
                        matches = false;
                        break;
                    }
                } else {
                    assumed.push((r, v));
                }
            }
            if !matches {
                continue;
            }
            if assumed.is_empty() {
                regular = Some(way);
                break;
            }
            if allow_speculation && speculative.is_none() {
                speculative = Some((way, assumed));
            }
        }

        if let Some(way) = regular {
            self.regular_hits += 1;
            let entry = ways.remove(way);
            ways.insert(0, entry.clone());
            return Lookup::Regular(entry);
        }
        if let Some((way, assumed)) = speculative {
            self.speculative_hits += 1;
            let entry = ways.remove(way);
            ways.insert(0, entry.clone());
            return Lookup::Speculative { entry, assumed };
        }
        Lookup::Miss
    }

    /// Inserts at MRU. An entry with the same pc and input context is
    /// replaced in place of adding a duplicate. Returns the evicted LRU
    /// entry when the set was full.
    pub fn insert(&mut self, entry: TraceEntry) -> Option<TraceEntry> {
        self.writes += 1;
        let set = self.set_index(entry.pc);
        let assoc = self.geometry.assoc;
        let ways = &mut self.sets[set];
        if let Some(pos) = ways.iter().position(|e| e.same_context(&entry)) {
            ways.remove(pos);
            ways.insert(0, entry);
            return None;
        }
        ways.insert(0, entry);
        if ways.len() > assoc {
            ways.pop()
        } else {
            None
        }
    }

    pub fn set(&self, index: usize) -> &[TraceEntry] {
        &self.sets[index]
    }

    pub fn occupancy(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = &TraceEntry> {
        self.sets.iter().flatten()
    }

    /// One line per valid entry, see [`TraceEntry::dump_line`].
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (s, ways) in self.sets.iter().enumerate() {
            for (w, e) in ways.iter().enumerate() {
                out.push_str(&e.dump_line(s, w));
                out.push('\n');
            }
        }
        out
    }
}
