//! Monte Carlo sweeps over the experiment families.
//!
//! A trial is keyed by `(family, value, trial)`, and every model in it shares
//! the same random draws: scattered RIS–Rx paths, the white noise behind the
//! channel errors and the solver's starting phases. Model comparisons are
//! therefore paired, and adding sweep points or models never perturbs
//! existing trials.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::channel::{build_ris_rx, PathParams};
use crate::config::{Family, PowerSpec, SystemConfig};
use crate::error::{Error, Result};
use crate::error_model::{make_channel_set, ChannelModel, ChannelSet, GainScale};
use crate::geometry::build_scene;
use crate::optimizer::{bcd_solve, BeamformingState, TraceRow};
use crate::rng::{derive_seed, label_tag, rng_from_seed};

pub const RECORD_COLUMNS: [&str; 12] = [
    "family",
    "model",
    "K",
    "sweep_name",
    "sweep_value",
    "trial",
    "seed",
    "se_eval_bits",
    "se_design_bits",
    "outer_iters",
    "converged",
    "wall_s",
];

pub const SUMMARY_COLUMNS: [&str; 8] = ["family", "model", "K", "sweep_value", "mean_se", "stderr_se", "n", "conv_rate"];

pub const TRACE_COLUMNS: [&str; 12] = [
    "family",
    "model",
    "K",
    "sweep_value",
    "trial",
    "outer_iter",
    "objective",
    "se_design",
    "se_eval",
    "adpm_iters",
    "adpm_residual",
    "eta",
];

/// A fully resolved sweep: what to vary, over which models, how many trials.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub family: Family,
    pub values: Vec<f64>,
    pub models: Vec<ChannelModel>,
    pub trials: usize,
    pub base: SystemConfig,
    pub seed: u64,
}

impl SweepSpec {
    pub fn from_config(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            family: cfg.sweep.family,
            values: cfg.sweep_values(),
            models: cfg.sweep_models()?,
            trials: cfg.sweep.trials,
            base: cfg.clone(),
            seed: cfg.sweep.seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.models.is_empty() || self.trials == 0 {
            return Err(Error::Config("sweep needs at least one value, one model and one trial".into()));
        }
        for &v in &self.values {
            config_at(&self.base, self.family, v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub family: Family,
    pub model: ChannelModel,
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    /// NaN when the trial failed.
    pub se_eval: f64,
    pub se_design: f64,
    pub outer_iters: usize,
    pub converged: bool,
    pub wall_s: f64,
    pub trace: Vec<TraceRow>,
}

impl ExperimentRecord {
    pub fn failed(&self) -> bool {
        self.se_eval.is_nan()
    }
}

/// Aggregate over the trials at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub family: Family,
    pub model: ChannelModel,
    pub sweep_value: f64,
    pub mean_se: f64,
    pub stderr_se: f64,
    pub n: usize,
    pub conv_rate: f64,
}

/// Base config with the family's variable set to `value`.
pub fn config_at(base: &SystemConfig, family: Family, value: f64) -> Result<SystemConfig> {
    let mut cfg = base.clone();
    match family {
        Family::Convergence => cfg.scene.tx_position[1] = -value,
        Family::SeVsSnr => cfg.link.power = PowerSpec::SnrDb(value),
        Family::SeVsTau => {
            cfg.errors.tau_g = value;
            cfg.errors.tau_r = value;
        }
        Family::SeVsNtx => cfg.scene.n_tx = value.round() as usize,
        Family::SeVsNris => cfg.scene.ris_nz = (value.round() as usize) / cfg.scene.ris_ny.max(1),
    }
    cfg.validate_point()?;
    Ok(cfg)
}

/// Seeds for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    /// Drives the scattered paths; the other streams are split off it.
    pub scenario: u64,
}

impl TrialSeeds {
    pub fn derive(master: u64, family: Family, value: f64, trial: usize) -> Self {
        Self { scenario: derive_seed(master, &[label_tag(family.name()), value.to_bits(), trial as u64]) }
    }

    pub fn errors(&self) -> u64 {
        derive_seed(self.scenario, &[label_tag("errors")])
    }

    pub fn solver(&self) -> u64 {
        derive_seed(self.scenario, &[label_tag("solver")])
    }
}

/// Channels for one trial of `cfg` under `model`.
pub fn build_channel_set(cfg: &SystemConfig, model: ChannelModel, seeds: &TrialSeeds) -> Result<ChannelSet> {
    let geom = build_scene(&cfg.scene_spec(model.partition()))?;
    let mut rng = rng_from_seed(seeds.scenario);
    let paths = PathParams::generate(&geom, cfg.link.n_paths, cfg.link.nlos_gain_db, &mut rng)?;
    let r = build_ris_rx(&geom, &paths)?;
    let scale = if cfg.channel.normalize_path_loss { GainScale::reference(&geom) } else { GainScale::UNIT };
    make_channel_set(&geom, &r, model, &cfg.channel.options, scale, &cfg.error_spec(seeds.errors()))
}

/// Runs one trial end to end.
pub fn run_trial(cfg: &SystemConfig, model: ChannelModel, seeds: &TrialSeeds) -> Result<(ChannelSet, BeamformingState)> {
    let set = build_channel_set(cfg, model, seeds)?;
    let state = bcd_solve(&set, &cfg.link_params(), &cfg.solver, seeds.solver())?;
    Ok((set, state))
}

/// Executes every (model, value, trial) triple; failures become NaN records.
///
/// Work is spread over the current rayon pool. Output order is canonical:
/// model, then sweep value in grid order, then trial.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ExperimentRecord>> {
    spec.validate()?;
    let configs: Vec<SystemConfig> = spec.values.iter().map(|&v| config_at(&spec.base, spec.family, v)).collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for &model in &spec.models {
        for (vi, &value) in spec.values.iter().enumerate() {
            if !configs[vi].supports(model) {
                log::warn!("skipping {model} at {} = {value}: partition does not fit the RIS", spec.family.sweep_name());
                continue;
            }
            for trial in 0..spec.trials {
                jobs.push((model, vi, value, trial));
            }
        }
    }
    let timing = spec.base.output.timing;
    let keep_trace = spec.family == Family::Convergence;
    let records = jobs
        .par_iter()
        .map(|&(model, vi, value, trial)| {
            let seeds = TrialSeeds::derive(spec.seed, spec.family, value, trial);
            let start = Instant::now();
            let outcome = run_trial(&configs[vi], model, &seeds);
            let wall_s = if timing { start.elapsed().as_secs_f64() } else { 0.0 };
            let base = ExperimentRecord {
                family: spec.family,
                model,
                sweep_value: value,
                trial,
                seed: seeds.scenario,
                se_eval: f64::NAN,
                se_design: f64::NAN,
                outer_iters: 0,
                converged: false,
                wall_s,
                trace: Vec::new(),
            };
            match outcome {
                Ok((_, st)) => ExperimentRecord {
                    se_eval: st.se_eval,
                    se_design: st.se_design,
                    outer_iters: st.outer_iters,
                    converged: st.converged,
                    trace: if keep_trace { st.trace } else { Vec::new() },
                    ..base
                },
                Err(e) => {
                    log::warn!("{} {} value {} trial {} failed: {e}", spec.family.name(), model, value, trial);
                    base
                }
            }
        })
        .collect();
    Ok(records)
}

/// Mean, standard error and convergence rate per (family, model, value).
///
/// Failed trials count toward the convergence rate but not the SE statistics.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Family, ChannelModel, u64, f64)> = Vec::new();
    for r in records {
        let key = (r.family, r.model, r.sweep_value.to_bits(), r.sweep_value);
        if !keys.iter().any(|k| (k.0, k.1, k.2) == (key.0, key.1, key.2)) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(family, model, bits, value)| {
            let group: Vec<&ExperimentRecord> = records
                .iter()
                .filter(|r| r.family == family && r.model == model && r.sweep_value.to_bits() == bits)
                .collect();
            let ok: Vec<f64> = group.iter().filter(|r| !r.failed()).map(|r| r.se_eval).collect();
            let n = ok.len();
            let mean = if n == 0 { f64::NAN } else { ok.iter().sum::<f64>() / n as f64 };
            let stderr = if n < 2 {
                0.0
            } else {
                let var = ok.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            };
            let conv = group.iter().filter(|r| r.converged).count() as f64 / group.len() as f64;
            SummaryRow { family, model, sweep_value: value, mean_se: mean, stderr_se: stderr, n, conv_rate: conv }
        })
        .collect()
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_records_csv<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.write_record([
            r.family.name().to_string(),
            r.model.name().to_string(),
            r.model.k_label().to_string(),
            r.family.sweep_name().to_string(),
            num(r.sweep_value),
            r.trial.to_string(),
            r.seed.to_string(),
            num(r.se_eval),
            num(r.se_design),
            r.outer_iters.to_string(),
            (r.converged as u8).to_string(),
            num(r.wall_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.family.name().to_string(),
            r.model.name().to_string(),
            r.model.k_label().to_string(),
            num(r.sweep_value),
            num(r.mean_se),
            num(r.stderr_se),
            r.n.to_string(),
            num(r.conv_rate),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_traces_csv<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for r in records {
        for t in &r.trace {
            w.write_record([
                r.family.name().to_string(),
                r.model.name().to_string(),
                r.model.k_label().to_string(),
                num(r.sweep_value),
                r.trial.to_string(),
                t.outer_iter.to_string(),
                num(t.objective),
                num(t.se_design),
                num(t.se_eval),
                t.adpm_iters.to_string(),
                num(t.adpm_residual),
                num(t.eta),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub records: PathBuf,
    pub summary: PathBuf,
    pub traces: Option<PathBuf>,
    pub config: PathBuf,
}

/// Writes records, summary, traces (convergence family) and the echoed config.
pub fn write_outputs(dir: &Path, cfg: &SystemConfig, records: &[ExperimentRecord]) -> Result<OutputFiles> {
    fs::create_dir_all(dir)?;
    let fam = cfg.sweep.family.name();
    let files = OutputFiles {
        records: dir.join(format!("{fam}_records.csv")),
        summary: dir.join(format!("{fam}_summary.csv")),
        traces: (cfg.sweep.family == Family::Convergence).then(|| dir.join(format!("{fam}_traces.csv"))),
        config: dir.join(format!("{fam}_config.toml")),
    };
    write_records_csv(fs::File::create(&files.records)?, records)?;
    write_summary_csv(fs::File::create(&files.summary)?, &summarize(records))?;
    if let Some(p) = &files.traces {
        write_traces_csv(fs::File::create(p)?, records)?;
    }
    fs::write(&files.config, cfg.to_toml())?;
    Ok(files)
}
