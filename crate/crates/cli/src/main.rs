//! `tracereuse`: run single programs or whole policy grids through the
//! trace-reuse simulator.

use anyhow::{Context, Result};
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tracereuse_core::harness::{
    builtin, builtin_workloads, oracle_check, run_experiment, ExperimentConfig, HarnessError, CONFIG_KEYS, ENV_PREFIX,
};
use tracereuse_core::isa::unparse;
use tracereuse_core::metrics::{to_csv_string, MetricRow};
use tracereuse_core::{parse_program, simulate, ReusePolicy, SimOptions, SimStats};

const EXIT_INVALID: u8 = 1;
const EXIT_ORACLE: u8 = 2;

#[derive(Parser)]
#[command(name = "tracereuse", version, about = "Trace-reuse microarchitecture simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one assembly program under one policy.
    ///
    /// Writes stats.json, stats.csv, metrics.csv (against a Baseline run)
    /// and tables.txt (final reuse-table contents) into the output directory.
    Simulate {
        /// Assembly source file.
        #[arg(long)]
        program: PathBuf,
        /// Policy preset, e.g. Baseline, DTM, RST, RST-Loop, RST-Out-Of-Loop, RST-NotB.
        #[arg(long)]
        policy: String,
        /// Configuration file; timing, fast_forward and max_ops apply.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the configured workload x policy (x sweep) grid.
    ///
    /// Writes metrics.csv, metrics.json and stats.csv. `--out` overrides
    /// the config's `out` key.
    Sweep {
        /// Configuration file; see `tracereuse --help` for the keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List or print the built-in workloads.
    Workloads {
        #[command(subcommand)]
        action: WorkloadAction,
    },
}

#[derive(Subcommand)]
enum WorkloadAction {
    /// Names and tags of the built-in workloads.
    List,
    /// Assembly source of one built-in workload.
    Dump { name: String },
}

fn after_help() -> String {
    let mut s = String::from("Configuration keys (flat `key = value` file; `#` starts a comment):\n");
    for (key, desc) in CONFIG_KEYS {
        let env = format!("{ENV_PREFIX}{}", key.to_uppercase().replace('.', "_"));
        s.push_str(&format!("  {key:<26} {desc}\n  {:<26} env: {env}\n", ""));
    }
    s.push_str("\nStatistics fields (stats.csv columns; stats.json nests on the dots):\n");
    for chunk in SimStats::csv_header().chunks(4) {
        s.push_str(&format!("  {}\n", chunk.join(", ")));
    }
    s.push_str("\nExit status: 0 success, 1 invalid input or failed run, 2 oracle mismatch.\n");
    s
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
}

fn simulate_cmd(program: &Path, policy: &str, config: Option<&Path>, out: &Path) -> Result<bool> {
    let cfg = ExperimentConfig::load(config)?;
    let text = std::fs::read_to_string(program).with_context(|| format!("reading {}", program.display()))?;
    let program_ir = parse_program(&text).with_context(|| format!("parsing {}", program.display()))?;
    let policy = ReusePolicy::preset(policy)?;
    let name = program.file_stem().map_or("program".into(), |s| s.to_string_lossy().into_owned());
    let opts =
        SimOptions { max_ops: cfg.max_ops, fast_forward: cfg.fast_forward, log_window: Some(0), workload: name };

    let run = simulate(&program_ir, &policy, &cfg.timing, &opts)?;
    if run.stats.dyn_ops.total() == 0 {
        return Err(HarnessError::Invalid(format!(
            "program stopped after {} micro-ops, before fast_forward = {}",
            run.state.dyn_count, cfg.fast_forward
        ))
        .into());
    }
    let ok = oracle_check(&program_ir, &run.state)?;
    let baseline = simulate(&program_ir, &ReusePolicy::baseline(), &cfg.timing, &opts)?;
    let reference = simulate(&program_ir, &cfg.reference_policy, &cfg.timing, &opts)?;
    let row = MetricRow::from_stats(&policy.name, policy.subset, &run.stats, &baseline.stats, Some(&reference.stats))?;

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(out, "stats.json", &(run.stats.to_json() + "\n"))?;
    let mut csv = SimStats::csv_header().join(",") + "\n";
    csv.push_str(&run.stats.csv_record().join(","));
    csv.push('\n');
    write(out, "stats.csv", &csv)?;
    write(out, "metrics.csv", &to_csv_string(&[row]))?;
    let mut tables = format!("# trace table ({})\n", policy.name);
    tables.push_str(&run.engine.trace_table().dump());
    if let Some(t) = run.engine.instr_table() {
        tables.push_str("# instruction table\n");
        tables.push_str(&t.dump());
    }
    write(out, "tables.txt", &tables)?;
    println!(
        "{}: {} cycles, {} ops, {} reused, {} misspeculations, oracle {}",
        policy.name,
        run.stats.cycles,
        run.stats.dyn_ops.total(),
        run.stats.reused_ops.total(),
        run.stats.misspeculations,
        if ok { "ok" } else { "MISMATCH" }
    );
    Ok(ok)
}

fn sweep_cmd(config: Option<&Path>, out: Option<&Path>) -> Result<bool> {
    let cfg = ExperimentConfig::load(config)?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| HarnessError::Invalid("no output directory: pass --out or set `out`".into()))?;
    let report = run_experiment(&cfg)?;
    report.write(&dir)?;
    let failures = report.oracle_failures();
    for f in &failures {
        eprintln!("oracle mismatch: {} under {}", f.row.metrics.workload, f.row.metrics.policy);
    }
    println!("{} rows written to {}", report.rows.len(), dir.display());
    Ok(failures.is_empty())
}

fn workloads_cmd(action: &WorkloadAction) -> Result<()> {
    match action {
        WorkloadAction::List => {
            for w in builtin_workloads() {
                let tags: Vec<_> = w.tags.iter().map(|t| t.name()).collect();
                println!("{:<24} {}", w.name, tags.join(","));
            }
        }
        WorkloadAction::Dump { name } => print!("{}", unparse(&builtin(name)?.program)),
    }
    Ok(())
}

fn main() -> ExitCode {
    let matches = Cli::command().after_long_help(after_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match &cli.command {
        Command::Simulate { program, policy, config, out } => simulate_cmd(program, policy, config.as_deref(), out),
        Command::Sweep { config, out } => sweep_cmd(config.as_deref(), out.as_deref()),
        Command::Workloads { action } => workloads_cmd(action).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_ORACLE),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
