use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheLevelConfig {
    pub size: usize,
    pub assoc: usize,
    pub line: usize,
    pub hit_latency: u64,
}

impl CacheLevelConfig {
    pub const fn new(size: usize, assoc: usize, line: usize, hit_latency: u64) -> Self {
        CacheLevelConfig { size, assoc, line, hit_latency }
    }

    pub fn sets(&self) -> usize {
        self.size / (self.assoc * self.line)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.line == 0 || self.assoc == 0 || self.size == 0 {
            return Err("cache size, associativity and line size must be positive".into());
        }
        if !self.size.is_multiple_of(self.assoc * self.line) {
            return Err(format!(
                "cache size {} is not a multiple of assoc {} x line {}",
                self.size, self.assoc, self.line
            ));
        }
        if self.hit_latency == 0 {
            return Err("cache hit latency must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCounts {
    pub accesses: u64,
    pub misses: u64,
}

/// Set-associative cache with LRU replacement. Only tags are modelled.
#[derive(Clone, Debug)]
pub struct Cache {
    cfg: CacheLevelConfig,
    // most recently used first
    sets: Vec<Vec<u64>>,
    pub counts: LevelCounts,
}

impl Cache {
    pub fn new(cfg: CacheLevelConfig) -> Self {
        cfg.validate().expect("cache config");
        Cache { cfg, sets: vec![Vec::with_capacity(cfg.assoc); cfg.sets()], counts: LevelCounts::default() }
    }

    pub fn config(&self) -> &CacheLevelConfig {
        &self.cfg
    }

    /// Looks up `addr`, filling the line on a miss. Returns whether it hit.
    pub fn access(&mut self, addr: u32) -> bool {
        self.counts.accesses += 1;
        let line = addr as u64 / self.cfg.line as u64;
        let n = self.sets.len() as u64;
        let set = &mut self.sets[(line % n) as usize];
        if let Some(pos) = set.iter().position(|&t| t == line) {
            let tag = set.remove(pos);
            set.insert(0, tag);
            true
        } else {
            self.counts.misses += 1;
            set.insert(0, line);
            set.truncate(self.cfg.assoc);
            false
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CachePort {
    Instruction,
    Data,
}

/// Split L1 instruction and data caches over shared L2 and L3.
#[derive(Clone, Debug)]
pub struct CacheHierarchy {
    pub l1i: Cache,
    pub l1d: Cache,
    pub l2: Cache,
    pub l3: Cache,
    pub memory_latency: u64,
}

impl CacheHierarchy {
    pub fn new(l1i: CacheLevelConfig, l1d: CacheLevelConfig, l2: CacheLevelConfig, l3: CacheLevelConfig, memory_latency: u64) -> Self {
        CacheHierarchy {
            l1i: Cache::new(l1i),
            l1d: Cache::new(l1d),
            l2: Cache::new(l2),
            l3: Cache::new(l3),
            memory_latency,
        }
    }

    /// Latency of one access: the hit latencies of every level probed, plus
    /// memory when all levels miss. Reads and writes behave alike
    /// (write-allocate); every probed level is filled.
    pub fn access(&mut self, port: CachePort, addr: u32) -> u64 {
        let l1 = match port {
            CachePort::Instruction => &mut self.l1i,
            CachePort::Data => &mut self.l1d,
        };
        let mut latency = l1.cfg.hit_latency;
        if l1.access(addr) {
            return latency;
        }
        latency += self.l2.cfg.hit_latency;
        if self.l2.access(addr) {
            return latency;
        }
        latency += self.l3.cfg.hit_latency;
        if self.l3.access(addr) {
            return latency;
        }
        latency + self.memory_latency
    }
}
