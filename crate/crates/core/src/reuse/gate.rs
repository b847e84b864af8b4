use super::policy::LoopGateMode;
use crate::machine::StepResult;

/// Loop regions learned from taken backward branches. A region spans from
/// the branch target to the branch itself, inclusive, and stays recorded
/// for the rest of the run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoopGate {
    regions: Vec<(u32, u32)>,
}

impl LoopGate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn regions(&self) -> &[(u32, u32)] {
        &self.regions
    }

    /// Records `(target, pc)` when `step` is a taken branch to a lower address.
    pub fn update(&mut self, step: &StepResult) {
        if step.branch_taken != Some(true) {
            return;
        }
        let pc = step.executed.pc;
        let target = step.next_pc;
        if target < pc && !self.regions.contains(&(target, pc)) {
            self.regions.push((target, pc));
        }
    }

    pub fn in_loop(&self, pc: u32) -> bool {
        self.regions.iter().any(|&(lo, hi)| lo <= pc && pc <= hi)
    }

    pub fn allows(&self, mode: LoopGateMode, pc: u32) -> bool {
        mode_allows(mode, self.in_loop(pc))
    }
}

pub fn mode_allows(mode: LoopGateMode, in_loop: bool) -> bool {
    match mode {
        LoopGateMode::Always => true,
        LoopGateMode::InsideLoopsOnly => in_loop,
        LoopGateMode::OutsideLoopsOnly => !in_loop,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{Instruction, Opcode};

    fn branch(pc: u32, target: u32, taken: bool) -> StepResult {
        let instr = Instruction {
            pc,
            opcode: Opcode::Bne,
            dest: None,
            src1: None,
            src2: None,
            imm: Some(target as i32 - (pc as i32 + 4)),
        };
        StepResult {
            executed: instr,
            classes: instr.classes(),
            inputs: vec![],
            outputs: vec![],
            branch_taken: Some(taken),
            next_pc: if taken { target } else { pc + 4 },
            mem_effect: None,
        }
    }

    #[test]
    fn records_taken_backward_only() {
        let mut g = LoopGate::new();
        g.update(&branch(40, 16, true));
        assert_eq!(g.regions(), &[(16, 40)]);
        g.update(&branch(80, 60, false));
        g.update(&branch(100, 120, true));
        assert_eq!(g.regions(), &[(16, 40)]);
        g.update(&branch(40, 16, true));
        assert_eq!(g.regions().len(), 1);
    }

    #[test]
    fn gating_modes() {
        let mut g = LoopGate::new();
        assert!(!g.allows(LoopGateMode::InsideLoopsOnly, 20));
        assert!(g.allows(LoopGateMode::OutsideLoopsOnly, 20));
        g.update(&branch(40, 16, true));
        assert!(g.allows(LoopGateMode::InsideLoopsOnly, 20));
        assert!(g.allows(LoopGateMode::InsideLoopsOnly, 16));
        assert!(g.allows(LoopGateMode::InsideLoopsOnly, 40));
        assert!(!g.allows(LoopGateMode::InsideLoopsOnly, 44));
        assert!(!g.allows(LoopGateMode::OutsideLoopsOnly, 20));
        assert!(g.allows(LoopGateMode::Always, 20));
    }
}
