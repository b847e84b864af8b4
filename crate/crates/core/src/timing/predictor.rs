//! Two-level (gshare) branch predictor with a set-associative BTB.

pub const HISTORY_BITS: u32 = 13;
pub const PHT_ENTRIES: usize = 8192;
pub const BTB_ENTRIES: usize = 4096;
pub const BTB_ASSOC: usize = 2;

#[derive(Clone, Debug)]
pub struct PredictorState {
    history: u32,
    /// 2-bit saturating counters, initialised weakly not-taken.
    pht: Vec<u8>,
    // (pc, target), most recently used first
    btb: Vec<Vec<(u32, u32)>>,
}

impl Default for PredictorState {
    fn default() -> Self {
        Self::new()
    }
}

impl PredictorState {
    pub fn new() -> Self {
        PredictorState {
            history: 0,
            pht: vec![1; PHT_ENTRIES],
            btb: (0..BTB_ENTRIES / BTB_ASSOC).map(|_| Vec::with_capacity(BTB_ASSOC)).collect(),
        }
    }

    pub fn history(&self) -> u32 {
        self.history
    }

    pub fn set_history(&mut self, history: u32) {
        self.history = history & ((1 << HISTORY_BITS) - 1);
    }

    fn index(&self, pc: u32) -> usize {
        ((self.history ^ (pc / 4)) as usize) % PHT_ENTRIES
    }

    pub fn counter(&self, pc: u32) -> u8 {
        self.pht[self.index(pc)]
    }

    pub fn predict(&self, pc: u32) -> bool {
        self.counter(pc) >= 2
    }

    /// Saturates the counter selected by the current history toward `taken`.
    pub fn update_counter(&mut self, pc: u32, taken: bool) {
        let i = self.index(pc);
        let c = &mut self.pht[i];
        *c = if taken { (*c + 1).min(3) } else { c.saturating_sub(1) };
    }

    pub fn push_history(&mut self, taken: bool) {
        self.set_history((self.history << 1) | taken as u32);
    }

    pub fn train(&mut self, pc: u32, taken: bool) {
        self.update_counter(pc, taken);
        self.push_history(taken);
    }

    pub fn btb_lookup(&mut self, pc: u32) -> Option<u32> {
        let set = &mut self.btb[((pc / 4) as usize) % (BTB_ENTRIES / BTB_ASSOC)];
        let pos = set.iter().position(|&(p, _)| p == pc)?;
        let hit = set.remove(pos);
        set.insert(0, hit);
        Some(hit.1)
    }

    pub fn btb_update(&mut self, pc: u32, target: u32) {
        let set = &mut self.btb[((pc / 4) as usize) % (BTB_ENTRIES / BTB_ASSOC)];
        set.retain(|&(p, _)| p != pc);
        set.insert(0, (pc, target));
        set.truncate(BTB_ASSOC);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_predicts_not_taken() {
        let p = PredictorState::new();
        assert!(!p.predict(0x40));
        assert_eq!(p.counter(0x40), 1);
    }

    #[test]
    fn two_taken_updates_flip_prediction() {
        let mut p = PredictorState::new();
        p.update_counter(0x40, true);
        assert_eq!(p.counter(0x40), 2);
        p.update_counter(0x40, true);
        assert_eq!(p.counter(0x40), 3);
        assert!(p.predict(0x40));
        p.update_counter(0x40, true);
        assert_eq!(p.counter(0x40), 3);
    }

    /// Accuracy of a single counter, starting at 1, over an outcome sequence.
    fn single_counter_accuracy(outcomes: &[bool]) -> f64 {
        let mut p = PredictorState::new();
        let correct = outcomes
            .iter()
            .filter(|&&t| {
                let hit = p.predict(0) == t;
                p.update_counter(0, t);
                hit
            })
            .count();
        correct as f64 / outcomes.len() as f64
    }

    #[test]
    fn alternating_outcomes() {
        // From state 1: N is predicted (1->0), T mispredicted (0->1), ...
        let nt: Vec<bool> = (0..8).map(|i| i % 2 == 1).collect();
        assert_eq!(single_counter_accuracy(&nt), 0.5);
        // Starting with T instead: 1->2 (miss), N predicted T (2->1, miss), ...
        let tn: Vec<bool> = (0..8).map(|i| i % 2 == 0).collect();
        assert_eq!(single_counter_accuracy(&tn), 0.0);
    }

    #[test]
    fn history_is_xored_with_pc() {
        let mut p = PredictorState::new();
        p.update_counter(0x40, true);
        p.update_counter(0x40, true);
        p.push_history(true);
        // different history, different counter
        assert!(!p.predict(0x40));
        p.set_history(0);
        assert!(p.predict(0x40));
        p.set_history(u32::MAX);
        assert_eq!(p.history(), (1 << HISTORY_BITS) - 1);
    }

    #[test]
    fn btb_two_way_lru() {
        let mut p = PredictorState::new();
        let sets = (BTB_ENTRIES / BTB_ASSOC) as u32;
        let (a, b, c) = (0, sets * 4, 2 * sets * 4);
        p.btb_update(a, 100);
        p.btb_update(b, 200);
        assert_eq!(p.btb_lookup(a), Some(100));
        p.btb_update(c, 300);
        assert_eq!(p.btb_lookup(b), None);
        assert_eq!(p.btb_lookup(a), Some(100));
        assert_eq!(p.btb_lookup(c), Some(300));
    }
}
