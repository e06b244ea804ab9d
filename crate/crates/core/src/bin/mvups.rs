//! Batch CLI: run single scenarios, reproduce the named studies, dump the
//! parameter registry, and compare the averaged model against the EMT-style
//! abc simulation.
//!
//! Exit codes: 0 success, 1 row/simulation failure, 2 configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mvups::config::{
    parse_config, registry_listing, run_suite, serialize_config, StudyId,
};
use mvups::metrics::{metrics_for, render_table, TableFormat};
use mvups::scenario::{ControllerKind, Scenario};
use mvups::sim::run_scenario;

#[derive(Parser)]
#[command(
    name = "mvups",
    about = "Averaged-dq simulation of a three-mode MV-UPS grid-forming controller on a weak grid"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single scenario and write its trace and metrics.
    Run {
        /// Flat INI config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Repeatable key=value override (see `mvups list`).
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Controller: proposed | gfl-mc | gfl-pll.
        #[arg(long)]
        controller: Option<String>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a named study suite (table1, stress, ablation, sweeps,
    /// mode1-shaping, mode1-stiffbus, freq-proxy, nh-sweep, emt-compare, all).
    Suite {
        study: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Concurrent rows.
        #[arg(long, default_value_t = 4)]
        jobs: usize,
    },
    /// Print the parameter registry.
    List,
    /// Run the averaged vs EMT comparison study.
    Compare {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn default_out_root(cli_out: PathBuf) -> PathBuf {
    if cli_out == PathBuf::from("out") {
        if let Ok(env_root) = std::env::var("MVUPS_OUT") {
            return PathBuf::from(env_root);
        }
    }
    cli_out
}

fn cmd_run(
    config: Option<PathBuf>,
    overrides: Vec<String>,
    controller: Option<String>,
    out: PathBuf,
) -> Result<(), (u8, String)> {
    let mut sc = match config {
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| (2, format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text).map_err(|e| (2, e.to_string()))?
        }
        None => Scenario::default(),
    };
    if let Some(c) = controller {
        sc.controller = ControllerKind::parse(&c).map_err(|e| (2, e.to_string()))?;
    }
    let pairs: Vec<(String, String)> = overrides
        .iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| (2u8, format!("override `{s}` is not KEY=VALUE")))
        })
        .collect::<Result<_, _>>()?;
    sc = sc
        .apply_overrides(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
        .map_err(|e| (2, e.to_string()))?;

    let trace = run_scenario(&sc).map_err(|e| (1, e.to_string()))?;
    if let Some(d) = &trace.diverged {
        eprintln!("warning: {d} (partial trace retained)");
    }
    let metrics = metrics_for(&trace).map_err(|e| (1, e.to_string()))?;
    let rows = vec![(sc.controller.name().to_string(), metrics)];
    let table = render_table(&rows, TableFormat::Text).map_err(|e| (1, e.to_string()))?;

    std::fs::create_dir_all(&out).map_err(|e| (1, e.to_string()))?;
    std::fs::write(out.join("trace.csv"), trace.to_csv()).map_err(|e| (1, e.to_string()))?;
    std::fs::write(out.join("scenario.ini"), serialize_config(&sc))
        .map_err(|e| (1, e.to_string()))?;
    std::fs::write(out.join("metrics.txt"), &table).map_err(|e| (1, e.to_string()))?;
    print!("{table}");
    println!("trace: {}", out.join("trace.csv").display());
    Ok(())
}

fn cmd_suite(study: &str, out: PathBuf, jobs: usize) -> Result<(), (u8, String)> {
    let ids: Vec<StudyId> = if study.eq_ignore_ascii_case("all") {
        StudyId::ALL.to_vec()
    } else {
        vec![StudyId::parse(study).map_err(|e| (2, e.to_string()))?]
    };
    let mut failed = false;
    for id in ids {
        println!("== {} ==", id.name());
        match run_suite(id, &out, jobs) {
            Ok(report) => print!("{report}"),
            Err(e) => {
                eprintln!("suite {} failed: {e}", id.name());
                failed = true;
            }
        }
    }
    if failed {
        Err((1, "one or more suites failed".into()))
    } else {
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            overrides,
            controller,
            out,
        } => cmd_run(config, overrides, controller, default_out_root(out)),
        Command::Suite { study, out, jobs } => cmd_suite(&study, default_out_root(out), jobs),
        Command::List => {
            print!("{}", registry_listing());
            Ok(())
        }
        Command::Compare { out } => cmd_suite("emt-compare", default_out_root(out), 1),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
