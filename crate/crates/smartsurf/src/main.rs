//! Command-line harness: run simulations, sweeps and demos, emitting CSV.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use smartsurf::controller::runloop::Mode;
use smartsurf::experiment::{
    cellsearch_report, filter_design_sweep, linkbudget_sweep, run, sync_demo, RunConfig,
};
use smartsurf::filter::{TuningTargets, VaractorLaw};
use smartsurf::scenario::Scenario;
use smartsurf::Error;

#[derive(Parser)]
#[command(name = "smartsurf", about = "Smart-surface private-LTE simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario end to end and emit per-run CSVs.
    Simulate(SimulateArgs),
    /// Surface-gain grid over element count and environment path loss.
    Linkbudget(LinkbudgetArgs),
    /// TDD time-offset estimation and correction demo.
    SyncDemo(SyncDemoArgs),
    /// Solve the dual-mode filter design and sweep it over bias.
    FilterDesign(FilterDesignArgs),
    /// Scan the band for a scenario's cells.
    Cellsearch(CellsearchArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario TOML file.
    scenario: PathBuf,
    /// baseline | amp_only | waveflex
    #[arg(long, default_value = "waveflex")]
    mode: String,
    /// Simulated duration in milliseconds.
    #[arg(long, default_value_t = 2000)]
    duration: u64,
    /// Master seed override (defaults to the scenario's seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LinkbudgetArgs {
    /// Maximum element count; the sweep covers 1..=k.
    #[arg(long, default_value_t = 16)]
    k: u32,
    /// Environment path losses in dB, comma-separated.
    #[arg(long, default_value = "40,50,60,70,80", value_delimiter = ',')]
    lenv: Vec<f64>,
    /// Override the per-element path loss (dB); default uses the reference
    /// 5 m + 1 m geometry at 3.58 GHz.
    #[arg(long)]
    l_ele: Option<f64>,
    /// Output CSV path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SyncDemoArgs {
    /// Injected clock offset in milliseconds, in [0, 10).
    #[arg(long)]
    offset: f64,
    /// Maximum correction rounds.
    #[arg(long, default_value_t = 3)]
    rounds: u32,
    /// Output CSV path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FilterDesignArgs {
    /// Emit the bias sweep CSV.
    #[arg(long)]
    sweep: bool,
    /// Number of sweep points.
    #[arg(long, default_value_t = 16)]
    points: usize,
    /// Output CSV path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CellsearchArgs {
    /// Scenario TOML file.
    scenario: PathBuf,
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn real_main(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(a) => {
            let mode = Mode::parse(&a.mode).ok_or_else(|| {
                Error::Domain(format!(
                    "unknown mode '{}' (expected baseline|amp_only|waveflex)",
                    a.mode
                ))
            })?;
            let scenario = Scenario::from_path(&a.scenario)?;
            let summary = run(
                &scenario,
                &RunConfig {
                    mode,
                    duration_ms: a.duration,
                    seed_override: a.seed,
                    out_dir: a.out,
                },
            )?;
            println!(
                "mode={} duration_ms={} seed={} dci={} commands={} selection_rounds={} channel_changes={}",
                summary.mode.name(),
                summary.duration_ms,
                summary.seed,
                summary.dci_count,
                summary.command_count,
                summary.selection_rounds,
                summary.channel_changes_detected
            );
            for l in &summary.links {
                println!(
                    "enb={} ue={} dir={} mean_snr_db={:.3} throughput_mbps={:.3}",
                    l.enb,
                    l.ue,
                    l.direction.letter(),
                    l.mean_snr_db,
                    l.throughput_mbps
                );
            }
            Ok(())
        }
        Command::Linkbudget(a) => {
            let csv = linkbudget_sweep((1, a.k), &a.lenv, a.l_ele)?;
            emit(&csv, a.out.as_ref())
        }
        Command::SyncDemo(a) => {
            let demo = sync_demo(a.offset, a.rounds, 1.0)?;
            emit(&demo.to_csv(), a.out.as_ref())?;
            eprintln!(
                "final_offset_ms={:.6} residual_ms={:.6} rounds={}",
                demo.final_offset_ms,
                demo.residual_ms(),
                demo.rounds.len()
            );
            Ok(())
        }
        Command::FilterDesign(a) => {
            let targets = TuningTargets::default();
            let law = VaractorLaw::default();
            if a.sweep {
                let csv = filter_design_sweep(&targets, &law, a.points)?;
                emit(&csv, a.out.as_ref())
            } else {
                let params = smartsurf::filter::align_tuning_rates(&targets)?;
                println!(
                    "y_o={:.6e} y_e={:.6e} theta_o_ref={:.6} theta_e_ref={:.6} f_ref={:.4e} l1={:.3e}",
                    params.y_o,
                    params.y_e,
                    params.theta_o_ref,
                    params.theta_e_ref,
                    params.f_ref,
                    params.l1
                );
                Ok(())
            }
        }
        Command::Cellsearch(a) => {
            let scenario = Scenario::from_path(&a.scenario)?;
            print!("{}", cellsearch_report(&scenario)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Scenario(_) => ExitCode::from(2),
                Error::InfeasibleDesign(_) | Error::NoResonance { .. } => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}
