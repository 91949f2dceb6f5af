use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use deskbot_core::config::ScenarioConfig;
use deskbot_core::offload::{compare_energy, decide_placement_for, OffloadModels, OffloadServer};
use deskbot_core::par::Exec;
use deskbot_core::runtime::{run_scenario_with, write_chassis_log, write_trace_csv, RunOptions, ServiceId};

#[derive(Parser)]
#[command(name = "deskbot", version, about = "Virtual-time robot runtime and local-cloud server")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write its report and trace.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Report JSON; defaults to the scenario's outputs.report, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-task CSV trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Chassis command log (t_ns,linear,angular).
        #[arg(long)]
        chassis_log: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Exit with status 2 when any deadline is violated.
        #[arg(long)]
        strict: bool,
        /// Pace virtual time against the wall clock at this speed factor.
        #[arg(long)]
        pace: Option<f64>,
        /// Disable data-parallel kernels.
        #[arg(long)]
        sequential: bool,
    },
    /// Serve vision and speech requests over TCP.
    Serve {
        #[arg(long, default_value_t = 7070)]
        port: u16,
        #[arg(long)]
        models: PathBuf,
        #[arg(long, default_value = "0.0.0.0")]
        host: String,
    },
    /// Print the placement table and energy comparison for a scenario.
    OffloadEval {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn cmd_run(
    scenario: &Path,
    out: Option<PathBuf>,
    trace: Option<PathBuf>,
    chassis_log: Option<PathBuf>,
    seed: Option<u64>,
    strict: bool,
    pace: Option<f64>,
    sequential: bool,
) -> Result<u8> {
    let cfg = ScenarioConfig::load(scenario).with_context(|| format!("scenario {}", scenario.display()))?;
    let opts = RunOptions {
        seed,
        exec: if sequential { Exec::Sequential } else { Exec::default() },
        pace,
        models: None,
    };
    let outcome = run_scenario_with(&cfg, &opts)?;
    let json = outcome.report.to_json();
    let pick = |flag: Option<PathBuf>, cfg_path: &Option<String>| flag.or_else(|| cfg_path.as_deref().map(|p| cfg.resolve(p)));
    match pick(out, &cfg.outputs.report) {
        Some(p) => {
            std::fs::write(&p, &json).with_context(|| format!("cannot write {}", p.display()))?;
            let r = &outcome.report;
            println!(
                "report written to {}: power {:.2} W, battery {:.2} h, {} deadline violations",
                p.display(),
                r.power_w,
                r.battery_hours,
                r.violation_count
            );
        }
        None => print!("{json}"),
    }
    if let Some(p) = pick(trace, &cfg.outputs.trace) {
        let mut w = create(&p)?;
        write_trace_csv(&mut w, &outcome.records)?;
        w.flush()?;
    }
    if let Some(p) = pick(chassis_log, &cfg.outputs.chassis_log) {
        let mut w = create(&p)?;
        write_chassis_log(&mut w, &outcome.chassis)?;
        w.flush()?;
    }
    if strict && outcome.report.violation_count > 0 {
        eprintln!("{} deadline violations", outcome.report.violation_count);
        return Ok(2);
    }
    Ok(0)
}

fn cmd_serve(port: u16, models: &Path, host: &str) -> Result<u8> {
    let models = OffloadModels::load(models)?;
    let server = OffloadServer::bind((host, port), Arc::new(models))?;
    log::info!("listening on {}", server.local_addr());
    server.run()?;
    Ok(0)
}

fn cmd_offload_eval(scenario: &Path) -> Result<u8> {
    let cfg = ScenarioConfig::load(scenario).with_context(|| format!("scenario {}", scenario.display()))?;
    let plan = decide_placement_for(&ServiceId::ALL, &cfg.tolerances, &cfg.endpoints);
    println!("{:<8} {:<14} {:>12} {:>12}  {}", "service", "endpoint", "latency_ms", "tolerance_ms", "result");
    for s in ServiceId::ALL {
        println!("{:<8} {:<14} {:>12} {:>12.1}  {}", s.name(), "local", "-", cfg.tolerances.get(s), "pass");
        for c in plan.candidates.iter().filter(|c| c.service == s) {
            println!(
                "{:<8} {:<14} {:>12.1} {:>12.1}  {}",
                s.name(),
                c.endpoint,
                c.worst_case_ms,
                c.tolerance_ms,
                if c.passes { "pass" } else { "fail" }
            );
        }
    }
    println!();
    println!("placement:");
    for p in &plan.placements {
        println!("  {:<8} -> {} ({}): {}", p.service.name(), p.endpoint, p.kind.name(), p.rationale);
    }
    let e = compare_energy(&plan, &cfg.device, cfg.battery_wh)?;
    println!();
    println!("energy (battery {} Wh):", cfg.battery_wh);
    println!(
        "  all local: {:.2} W, {:.2} h, cpu {:.1}% gpu {:.1}%",
        e.all_local.power_w, e.all_local.battery_hours, e.all_local.cpu_pct, e.all_local.gpu_pct
    );
    println!(
        "  plan:      {:.2} W, {:.2} h, cpu {:.1}% gpu {:.1}%",
        e.plan.power_w, e.plan.battery_hours, e.plan.cpu_pct, e.plan.gpu_pct
    );
    println!("  battery ratio: {:.2}", e.battery_ratio);
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Cmd::Run { scenario, out, trace, chassis_log, seed, strict, pace, sequential } => {
            cmd_run(&scenario, out, trace, chassis_log, seed, strict, pace, sequential)
        }
        Cmd::Serve { port, models, host } => cmd_serve(port, &models, &host),
        Cmd::OffloadEval { scenario } => cmd_offload_eval(&scenario),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
