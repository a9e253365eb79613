//! `risbeam`: run beamforming sweeps, validate a config, or trace one trial.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use risbeam::config::{Family, SystemConfig};
use risbeam::experiments::{config_at, run_sweep, run_trial, summarize, write_outputs, SweepSpec, TrialSeeds};
use risbeam::interference::{cascade, check_unit_modulus, sigma_design, sigma_eval};
use risbeam::linalg::{fro_norm_sq, is_finite, HpdFactor};
use risbeam::optimizer::{achievable_se, mse_matrix, update_z};
use risbeam::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "risbeam", version, about = "Joint precoder and RIS phase design under near-, piece-wise and far-field channel models")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file; absent keys take desk-scale defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (overrides `sweep.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for trials; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Switch to the large scenario (64 Tx, 8 Rx, 16×16 RIS, 50 trials). Slow.
    #[arg(long, global = true)]
    full_scale: bool,

    /// Record per-trial wall time (makes outputs run-dependent).
    #[arg(long, global = true)]
    timing: bool,

    /// Experiment family (overrides `sweep.family`).
    #[arg(long, global = true)]
    family: Option<String>,

    /// Trials per sweep point (overrides `sweep.trials`).
    #[arg(long, global = true)]
    trials: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute the configured sweep and write CSV outputs.
    Run,
    /// Parse the config and check solver invariants on one trial.
    Validate,
    /// Solve a single trial and dump its per-iteration trace.
    Trace,
}

fn load(cli: &Cli) -> Result<SystemConfig> {
    let mut cfg = match &cli.config {
        Some(path) => SystemConfig::from_file(path)?,
        None => SystemConfig::default(),
    };
    if cli.full_scale {
        log::warn!("full-scale scenario selected: expect runtimes of hours");
        cfg.apply_full_scale();
    }
    if let Some(seed) = cli.seed {
        cfg.sweep.seed = seed;
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(f) = &cli.family {
        cfg.sweep.family = Family::parse(f)?;
        cfg.sweep.values = None;
    }
    if let Some(n) = cli.trials {
        cfg.sweep.trials = n;
    }
    cfg.output.timing |= cli.timing;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cfg: &SystemConfig) -> Result<()> {
    let spec = SweepSpec::from_config(cfg)?;
    // Fail before the sweep rather than after it.
    fs::create_dir_all(&cfg.output.dir)?;
    log::info!("{}: {} models × {} values × {} trials", spec.family.name(), spec.models.len(), spec.values.len(), spec.trials);
    let records = run_sweep(&spec)?;
    let files = write_outputs(&cfg.output.dir, cfg, &records)?;
    println!("{:<14} {:>10} {:>10} {:>8} {:>4} {:>6}", "model", spec.family.sweep_name(), "mean_se", "stderr", "n", "conv");
    for row in summarize(&records) {
        println!(
            "{:<14} {:>10} {:>10.4} {:>8.4} {:>4} {:>6.2}",
            row.model.to_string(),
            row.sweep_value,
            row.mean_se,
            row.stderr_se,
            row.n,
            row.conv_rate
        );
    }
    println!("wrote {}", files.records.display());
    println!("wrote {}", files.summary.display());
    if let Some(t) = files.traces {
        println!("wrote {}", t.display());
    }
    Ok(())
}

/// The trial that `trace` and `validate` inspect: trial 0 of the
/// convergence family at the configured Tx position.
fn single_trial(cfg: &SystemConfig) -> Result<(SystemConfig, TrialSeeds)> {
    let d = -cfg.scene.tx_position[1];
    let point = config_at(cfg, Family::Convergence, d)?;
    Ok((point, TrialSeeds::derive(cfg.sweep.seed, Family::Convergence, d, 0)))
}

fn trace(cfg: &SystemConfig) -> Result<()> {
    let (point, seeds) = single_trial(cfg)?;
    let (_, state) = run_trial(&point, cfg.channel.model, &seeds)?;
    fs::create_dir_all(&cfg.output.dir)?;
    let path = cfg.output.dir.join("trace.csv");
    state.write_trace_csv(fs::File::create(&path)?)?;
    state.write_trace_csv(std::io::stdout().lock())?;
    eprintln!(
        "{}: {} outer iterations, converged = {}, SE design {:.4}, eval {:.4}; wrote {}",
        cfg.channel.model,
        state.outer_iters,
        state.converged,
        state.se_design,
        state.se_eval,
        path.display()
    );
    Ok(())
}

fn validate(cfg: &SystemConfig) -> Result<()> {
    let (point, seeds) = single_trial(cfg)?;
    let (set, state) = run_trial(&point, cfg.channel.model, &seeds)?;
    let link = point.link_params();
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        println!("{} {name}", if ok { "ok    " } else { "FAILED" });
        if !ok {
            failures.push(name.to_string());
        }
    };

    check("channels are finite", [&set.g_true, &set.g_hat, &set.r_true, &set.r_hat].into_iter().all(is_finite));
    check(
        "noise covariances are Hermitian and above the thermal floor",
        sigma_design(&set, &state.w, &state.phi, link.noise).and_then(|s| s.verify()).is_ok()
            && sigma_eval(&set, &state.w, &state.phi, link.noise).and_then(|s| s.verify()).is_ok(),
    );
    check("phases are unit modulus", check_unit_modulus(&state.phi).is_ok());
    let power = fro_norm_sq(&state.w);
    check("precoder meets the power budget", power <= link.p_tx * (1.0 + 1e-9));
    if state.eta > 0.0 {
        check("active power constraint is tight", (power - link.p_tx).abs() <= 1e-6 * link.p_tx);
    }
    let worst = state.worst_block_increase();
    let scale = state.trace.iter().map(|r| r.substeps[0].abs()).fold(1.0, f64::max);
    check("Z, Ω and W steps never raise the surrogate", worst <= 1e-9 * scale);

    let h = cascade(&set.r_hat, &state.phi, &set.g_hat);
    let sigma = sigma_design(&set, &state.w, &state.phi, link.noise)?.sigma;
    let z = update_z(&h, &state.w, &sigma)?;
    let ln_det_j = HpdFactor::new(&mse_matrix(&z, &state.w, &h, &sigma))?.ln_det();
    let se = achievable_se(&h, &state.w, &sigma_design(&set, &state.w, &state.phi, link.noise)?)?;
    let lhs = se * std::f64::consts::LN_2;
    check("rate equals −ln det of the MMSE error", (lhs + ln_det_j).abs() <= 1e-8 * lhs.abs().max(1.0));

    println!(
        "{}: {} outer iterations, converged = {}, SE design {:.4}, eval {:.4}",
        cfg.channel.model, state.outer_iters, state.converged, state.se_design, state.se_eval
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::Numerical(format!("invariant checks failed: {}", failures.join("; "))))
    }
}

fn exit_code(err: &Error) -> u8 {
    if err.is_config() {
        1
    } else if err.is_io() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = load(&cli).and_then(|cfg| {
        let work = || match cli.command {
            Command::Run => run(&cfg),
            Command::Validate => validate(&cfg),
            Command::Trace => trace(&cfg),
        };
        match cli.threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?
                .install(work),
            None => work(),
        }
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
