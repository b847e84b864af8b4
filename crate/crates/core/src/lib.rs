//! Trace-reuse microarchitecture simulator.
//!
//! The crate is organised bottom-up:
//!
//! - [`isa`]: toy RISC instruction set, assembly parser, reuse-domain classes.
//! - [`machine`]: architectural reference interpreter and checkpoints.
//! - [`reuse`]: memoization tables, trace construction, loop gate.
//! - [`timing`]: cycle-approximate core model, branch predictor, caches.
//! - [`metrics`]: speedup, reuse rate, efficiency index and reports.
//! - [`harness`]: workload suite, experiment configuration and sweeps.

pub mod isa;
pub mod machine;
pub mod reuse;
pub mod metrics;
pub mod timing;
pub mod harness;

pub use isa::{parse_program, DomainSubset, InstrClass, Instruction, Opcode, Program, Reg};
pub use machine::{run_reference, step, Checkpoint, Fault, MachineState, StepResult};
pub use reuse::{ReuseEngine, ReuseMode, ReusePolicy};
pub use timing::{entry_bits, simulate, SimOptions, SimStats, TimingConfig};
