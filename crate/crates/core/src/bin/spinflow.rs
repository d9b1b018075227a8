use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spinflow::clifford::build_gamma;
use spinflow::config::RunConfig;
use spinflow::diagnostics::write_csv;
use spinflow::flow::{FlowState, FlowSystem};
use spinflow::snapshot::{parse_header, read_state, write_state};
use spinflow::verify::{all_pass, format_table, run_suite, SUITES};
use spinflow::Error;

/// Environment variable consulted for the worker count when `--threads` is absent.
const THREADS_ENV: &str = "SPINFLOW_THREADS";

#[derive(Parser)]
#[command(name = "spinflow", version, about = "Spinor flow with flux on flat periodic tori")]
struct Cli {
    /// Worker threads for the node kernels (overrides SPINFLOW_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write diagnostics and snapshots.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Replaces the generator seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a verification suite and print a pass/fail table.
    Verify {
        /// algebra, exterior, geometry, spin, identities, symbol, scaling or all.
        suite: String,
        /// Nodes per axis for convergence studies, coarse to fine.
        #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
        grids: Vec<usize>,
    },
    /// Snapshot utilities.
    Snapshot {
        #[command(subcommand)]
        action: SnapshotAction,
    },
}

#[derive(Subcommand)]
enum SnapshotAction {
    /// Print the header, per-field norms and the normalization residual.
    Inspect { path: PathBuf },
}

fn init_threads(flag: Option<usize>) -> Result<(), String> {
    let from_env = std::env::var(THREADS_ENV).ok().map(|v| v.parse::<usize>().map_err(|_| format!("{THREADS_ENV}={v} is not a count")));
    let threads = match (flag, from_env) {
        (Some(t), _) => Some(t),
        (None, Some(parsed)) => Some(parsed?),
        (None, None) => None,
    };
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn run_exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } | Error::Stiffness { .. } | Error::Geometry { .. } => 2,
        _ => 1,
    }
}

fn snapshot_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("step{step:08}.snap"))
}

fn simulate(config: &Path, out_dir: &Path, seed: Option<u64>) -> Result<(), (u8, String)> {
    let setup = |e: Error| (1, e.to_string());
    let mut cfg = RunConfig::load(config).map_err(setup)?;
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    let grid = cfg.grid().map_err(setup)?;
    let basis = build_gamma(cfg.scenario.n).map_err(setup)?;
    let initial = cfg.scenario.initial_state(&grid, &basis, &cfg.flow).map_err(setup)?;
    let sys = FlowSystem::for_state(cfg.flow.clone(), &initial).map_err(setup)?;
    std::fs::create_dir_all(out_dir).map_err(|e| (1, format!("cannot create {}: {e}", out_dir.display())))?;
    let cadence = cfg.flow.snapshot_cadence;
    if cadence > 0 {
        write_state(&snapshot_path(out_dir, 0), &initial).map_err(setup)?;
    }
    let hook = |s: &FlowState, step: usize| {
        if cadence > 0 && step % cadence == 0 {
            write_state(&snapshot_path(out_dir, step), s)?;
        }
        Ok(())
    };
    let out = sys.run(initial, hook).map_err(|e| (run_exit_code(&e), e.to_string()))?;
    let csv = out_dir.join("diagnostics.csv");
    let mut w = BufWriter::new(File::create(&csv).map_err(|e| (1, format!("cannot write {}: {e}", csv.display())))?);
    write_csv(&mut w, &out.records).map_err(|e| (1, e.to_string()))?;
    write_state(&out_dir.join("final.snap"), &out.state).map_err(setup)?;
    let last = out.records.last().expect("run records the initial state");
    let [a, b, c, d] = last.stationarity();
    println!(
        "{}: {} steps to t = {:.6}; stationarity residuals {a:.3e} {b:.3e} {c:.3e} {d:.3e}; normalization {:.3e}",
        cfg.scenario.name, out.steps, out.state.t, last.normalization
    );
    Ok(())
}

fn verify(suite: &str, grids: &[usize]) -> Result<(), (u8, String)> {
    if suite != "all" && !SUITES.contains(&suite) {
        return Err((1, format!("unknown suite `{suite}`; expected one of {} or all", SUITES.join(", "))));
    }
    let checks = run_suite(suite, grids).map_err(|e| (1, e.to_string()))?;
    print!("{}", format_table(&checks));
    if all_pass(&checks) {
        Ok(())
    } else {
        let failed = checks.iter().filter(|c| c.gating && !c.pass).count();
        Err((1, format!("{failed} check(s) failed")))
    }
}

fn inspect(path: &Path) -> Result<(), (u8, String)> {
    let bytes = std::fs::read(path).map_err(|e| (1, format!("cannot read {}: {e}", path.display())))?;
    let (header, _) = parse_header(&bytes).map_err(|e| (1, e.to_string()))?;
    let state = read_state(path).map_err(|e| (1, e.to_string()))?;
    print!("{}", header.text());
    let rms = |data: &[f64]| (data.iter().map(|v| v * v).sum::<f64>() / data.len().max(1) as f64).sqrt();
    let psi: Vec<f64> = state.psi.data.iter().map(|z| z.norm()).collect();
    println!("{:<6} {:>12} {:>12}", "field", "max|.|", "rms");
    for (name, max, r) in [
        ("g", state.g.max_abs(), rms(&state.g.data)),
        ("frame", state.frame.max_abs(), rms(&state.frame.data)),
        ("psi", state.psi.max_abs(), rms(&psi)),
        ("h", state.h.field.max_abs(), rms(&state.h.field.data)),
        ("phi", state.phi.max_abs(), rms(&state.phi.data)),
    ] {
        println!("{name:<6} {max:>12.6e} {r:>12.6e}");
    }
    println!("normalization residual {:.3e}", state.normalization_residual());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads(cli.threads) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let result = match &cli.command {
        Command::Simulate { config, out_dir, seed } => simulate(config, out_dir, *seed),
        Command::Verify { suite, grids } => verify(suite, grids),
        Command::Snapshot { action: SnapshotAction::Inspect { path } } => inspect(path),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
