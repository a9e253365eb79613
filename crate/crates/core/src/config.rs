//! Scenario configuration: TOML sections of `key = value` pairs.
//!
//! Every key is optional. Absent keys take desk-scale defaults (each one is
//! logged at `info` level), unknown keys are rejected all at once, and
//! [`SystemConfig::to_toml`] echoes a config that parses back to itself.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::channel::{BlockDistance, ChannelOptions, PhaseReference};
use crate::error::{Error, Result};
use crate::error_model::{CeeNormalization, ChannelModel, ErrorSpec};
use crate::geometry::{ArraySpec, Position3D, SceneSpec, SPEED_OF_LIGHT};
use crate::optimizer::{AdpmParams, LinkParams, SolverConfig};

/// Experiment family; each sweeps one scenario variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// Per-iteration traces, swept over the Tx–RIS offset along y.
    Convergence,
    SeVsSnr,
    SeVsTau,
    SeVsNtx,
    SeVsNris,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Convergence, Family::SeVsSnr, Family::SeVsTau, Family::SeVsNtx, Family::SeVsNris];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Convergence => "convergence",
            Family::SeVsSnr => "se_vs_snr",
            Family::SeVsTau => "se_vs_tau",
            Family::SeVsNtx => "se_vs_ntx",
            Family::SeVsNris => "se_vs_nris",
        }
    }

    /// Name of the swept variable in output tables.
    pub fn sweep_name(&self) -> &'static str {
        match self {
            Family::Convergence => "d_br_m",
            Family::SeVsSnr => "snr_db",
            Family::SeVsTau => "tau",
            Family::SeVsNtx => "n_tx",
            Family::SeVsNris => "n_ris",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown family `{s}`; expected one of convergence, se_vs_snr, se_vs_tau, se_vs_ntx, se_vs_nris")))
    }

    pub fn default_values(&self) -> Vec<f64> {
        match self {
            Family::Convergence => vec![20.0],
            Family::SeVsSnr => vec![-40.0, -30.0, -20.0, -10.0, 0.0, 10.0],
            Family::SeVsTau => vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
            Family::SeVsNtx => vec![4.0, 8.0, 16.0, 32.0],
            Family::SeVsNris => vec![32.0, 64.0, 96.0, 128.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerSpec {
    SnrDb(f64),
    TxPowerW(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub carrier_hz: f64,
    pub tx_position: [f64; 3],
    pub ris_position: [f64; 3],
    pub rx_position: [f64; 3],
    pub n_tx: usize,
    pub n_rx: usize,
    pub ris_ny: usize,
    pub ris_nz: usize,
    /// Element spacing in wavelengths, shared by all arrays.
    pub spacing_wavelengths: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub power: PowerSpec,
    pub noise_dbm: f64,
    /// `None` means `min(N_Tx, N_Rx)`.
    pub n_s: Option<usize>,
    /// Number of RIS → Rx paths, LoS included.
    pub n_paths: usize,
    /// Power of each scattered path relative to LoS.
    pub nlos_gain_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub model: ChannelModel,
    pub options: ChannelOptions,
    /// Scale both links so their center-to-center path coefficients are one.
    pub normalize_path_loss: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorConfig {
    pub tau_g: f64,
    pub tau_r: f64,
    pub normalization: CeeNormalization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub family: Family,
    /// `None` uses the family's default grid.
    pub values: Option<Vec<f64>>,
    pub models: Vec<String>,
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Record wall-clock time per trial; off keeps output byte-stable.
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub scene: SceneConfig,
    pub link: LinkConfig,
    pub channel: ChannelConfig,
    pub errors: ErrorConfig,
    pub solver: SolverConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig {
                carrier_hz: 30e9,
                tx_position: [10.0, -20.0, 5.0],
                ris_position: [0.0, 0.0, 10.0],
                rx_position: [100.0, 50.0, 5.0],
                n_tx: 16,
                n_rx: 4,
                ris_ny: 8,
                ris_nz: 8,
                spacing_wavelengths: 0.5,
            },
            link: LinkConfig { power: PowerSpec::SnrDb(10.0), noise_dbm: -80.0, n_s: None, n_paths: 3, nlos_gain_db: -10.0 },
            channel: ChannelConfig { model: ChannelModel::Near, options: ChannelOptions::default(), normalize_path_loss: true },
            errors: ErrorConfig { tau_g: 0.0, tau_r: 0.0, normalization: CeeNormalization::ModelEnergy },
            solver: SolverConfig::default(),
            sweep: SweepConfig {
                family: Family::SeVsSnr,
                values: None,
                models: vec!["near".into(), "piecewise".into(), "far".into()],
                k_values: vec![1, 2, 4, 8],
                trials: 20,
                seed: 0,
            },
            output: OutputConfig { dir: PathBuf::from("out"), timing: false },
        }
    }
}

fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl SystemConfig {
    pub fn lambda(&self) -> f64 {
        SPEED_OF_LIGHT / self.scene.carrier_hz
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.link.noise_dbm)
    }

    pub fn tx_power_watts(&self) -> f64 {
        match self.link.power {
            PowerSpec::SnrDb(snr) => self.noise_watts() * 10f64.powf(snr / 10.0),
            PowerSpec::TxPowerW(p) => p,
        }
    }

    pub fn n_s(&self) -> usize {
        self.link.n_s.unwrap_or(self.scene.n_tx.min(self.scene.n_rx))
    }

    pub fn link_params(&self) -> LinkParams {
        LinkParams { p_tx: self.tx_power_watts(), noise: self.noise_watts(), n_s: self.n_s() }
    }

    pub fn error_spec(&self, seed: u64) -> ErrorSpec {
        ErrorSpec { tau_g: self.errors.tau_g, tau_r: self.errors.tau_r, normalization: self.errors.normalization, seed }
    }

    /// Scene with the partition `k`.
    pub fn scene_spec(&self, k: usize) -> SceneSpec {
        let s = &self.scene;
        let lambda = self.lambda();
        let d = s.spacing_wavelengths * lambda;
        SceneSpec {
            lambda,
            tx: ArraySpec::ula(s.n_tx, d, Position3D::from(s.tx_position)),
            ris: ArraySpec::upa(s.ris_ny, s.ris_nz, d, Position3D::from(s.ris_position)),
            rx: ArraySpec::ula(s.n_rx, d, Position3D::from(s.rx_position)),
            k,
        }
    }

    /// Models selected by the sweep, piece-wise expanded over `k_values`.
    pub fn sweep_models(&self) -> Result<Vec<ChannelModel>> {
        let mut out = Vec::new();
        for name in &self.sweep.models {
            match ChannelModel::parse(name, 1)? {
                ChannelModel::Piecewise(_) => out.extend(self.sweep.k_values.iter().map(|&k| ChannelModel::Piecewise(k))),
                m => out.push(m),
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    pub fn sweep_values(&self) -> Vec<f64> {
        self.sweep.values.clone().unwrap_or_else(|| self.sweep.family.default_values())
    }

    /// Large scenario: 64 Tx antennas, 8 Rx antennas, a 16×16 RIS and 50 trials.
    pub fn apply_full_scale(&mut self) {
        self.scene.n_tx = 64;
        self.scene.n_rx = 8;
        self.scene.ris_ny = 16;
        self.scene.ris_nz = 16;
        self.sweep.trials = 50;
    }

    /// Checks everything that a single trial depends on.
    pub fn validate_point(&self) -> Result<()> {
        let s = &self.scene;
        if !(s.carrier_hz > 0.0 && s.carrier_hz.is_finite()) {
            return cfg_err("scene.carrier_hz must be positive");
        }
        if !(s.spacing_wavelengths > 0.0 && s.spacing_wavelengths.is_finite()) {
            return cfg_err("scene.spacing_wavelengths must be positive");
        }
        for (name, p) in [("tx_position", s.tx_position), ("ris_position", s.ris_position), ("rx_position", s.rx_position)] {
            if p.iter().any(|v| !v.is_finite()) {
                return cfg_err(&format!("scene.{name} must be finite"));
            }
        }
        for (name, n) in [("n_tx", s.n_tx), ("n_rx", s.n_rx), ("ris_ny", s.ris_ny), ("ris_nz", s.ris_nz)] {
            if n == 0 {
                return cfg_err(&format!("scene.{name} must be positive"));
            }
        }
        let l = &self.link;
        match l.power {
            PowerSpec::SnrDb(v) if !v.is_finite() => return cfg_err("link.snr_db must be finite"),
            PowerSpec::TxPowerW(p) if !(p > 0.0 && p.is_finite()) => return cfg_err("link.tx_power_w must be positive"),
            _ => {}
        }
        if !l.noise_dbm.is_finite() || !l.nlos_gain_db.is_finite() {
            return cfg_err("link.noise_dbm and link.nlos_gain_db must be finite");
        }
        if l.n_s == Some(0) || l.n_paths == 0 {
            return cfg_err("link.n_s and link.n_paths must be positive");
        }
        for (name, t) in [("tau_g", self.errors.tau_g), ("tau_r", self.errors.tau_r)] {
            if !(0.0..1.0).contains(&t) {
                return cfg_err(&format!("errors.{name}: tau must be in [0,1), got {t}"));
            }
        }
        self.solver.validate()?;
        check_partition(s.ris_ny, s.ris_nz, self.channel.model.partition())
    }

    /// Full validation, including every sweep point and model.
    pub fn validate(&self) -> Result<()> {
        self.validate_point()?;
        let s = &self.scene;
        let sw = &self.sweep;
        if sw.trials == 0 {
            return cfg_err("sweep.trials must be at least 1");
        }
        if sw.models.is_empty() {
            return cfg_err("sweep.models must not be empty");
        }
        if matches!(&sw.values, Some(v) if v.is_empty() || v.iter().any(|x| !x.is_finite())) {
            return cfg_err("sweep.values must be a nonempty list of finite numbers");
        }
        let models = self.sweep_models()?;
        match sw.family {
            Family::SeVsNris => {
                // Partitions that do not fit a given RIS size are skipped at that point.
                for v in self.sweep_values() {
                    if v < 1.0 || v.fract() != 0.0 || (v as usize) % s.ris_ny != 0 {
                        return cfg_err(&format!("sweep value {v}: N_R must be a positive multiple of ris_ny = {}", s.ris_ny));
                    }
                    let nz = v as usize / s.ris_ny;
                    if !models.iter().any(|m| check_partition(s.ris_ny, nz, m.partition()).is_ok()) {
                        return cfg_err(&format!("sweep value {v}: N_Rz = {nz} not divisible by K for any selected model"));
                    }
                }
            }
            _ => {
                for m in &models {
                    check_partition(s.ris_ny, s.ris_nz, m.partition())?;
                }
            }
        }
        if sw.family == Family::SeVsTau && self.sweep_values().iter().any(|t| !(0.0..1.0).contains(t)) {
            return cfg_err("sweep values for se_vs_tau: tau must be in [0,1)");
        }
        if sw.family == Family::SeVsNtx && self.sweep_values().iter().any(|&v| v < 1.0 || v.fract() != 0.0) {
            return cfg_err("sweep values for se_vs_ntx must be positive integers");
        }
        Ok(())
    }

    /// Whether `model` can be built on this config's RIS.
    pub fn supports(&self, model: ChannelModel) -> bool {
        check_partition(self.scene.ris_ny, self.scene.ris_nz, model.partition()).is_ok()
    }

    /// Parses and validates a config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Parses and validates config text; an empty string yields the defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(format!("malformed config: {}", e.message())))?;
        let mut r = Reader::new(table)?;
        let d = SystemConfig::default();

        let scene = SceneConfig {
            carrier_hz: r.float("scene", "carrier_hz", d.scene.carrier_hz)?,
            tx_position: r.point("scene", "tx_position", d.scene.tx_position)?,
            ris_position: r.point("scene", "ris_position", d.scene.ris_position)?,
            rx_position: r.point("scene", "rx_position", d.scene.rx_position)?,
            n_tx: r.count("scene", "n_tx", d.scene.n_tx)?,
            n_rx: r.count("scene", "n_rx", d.scene.n_rx)?,
            ris_ny: r.count("scene", "ris_ny", d.scene.ris_ny)?,
            ris_nz: r.count("scene", "ris_nz", d.scene.ris_nz)?,
            spacing_wavelengths: r.float("scene", "spacing_wavelengths", d.scene.spacing_wavelengths)?,
        };

        let snr = r.opt_float("link", "snr_db")?;
        let p_tx = r.opt_float("link", "tx_power_w")?;
        let power = match (snr, p_tx) {
            (Some(_), Some(_)) => return cfg_err("link.snr_db and link.tx_power_w are mutually exclusive"),
            (Some(s), None) => PowerSpec::SnrDb(s),
            (None, Some(p)) => PowerSpec::TxPowerW(p),
            (None, None) => {
                log::info!("default link.snr_db = {:?}", 10.0);
                d.link.power
            }
        };
        let link = LinkConfig {
            power,
            noise_dbm: r.float("link", "noise_dbm", d.link.noise_dbm)?,
            n_s: match r.opt_count("link", "n_s")? {
                Some(n) => Some(n),
                None => {
                    log::info!("default link.n_s = min(n_tx, n_rx)");
                    None
                }
            },
            n_paths: r.count("link", "n_paths", d.link.n_paths)?,
            nlos_gain_db: r.float("link", "nlos_gain_db", d.link.nlos_gain_db)?,
        };

        let model_name = r.string("channel", "model", d.channel.model.name())?;
        let k = r.count("channel", "k", d.channel.model.partition().max(8))?;
        let phase_reference = match r.string("channel", "phase_reference", "centroid")?.as_str() {
            "centroid" => PhaseReference::Centroid,
            "first_element" => PhaseReference::FirstElement,
            other => return cfg_err(&format!("channel.phase_reference: unknown value `{other}` (centroid, first_element)")),
        };
        let block_distance = match r.string("channel", "block_distance", "effective")?.as_str() {
            "effective" => BlockDistance::Effective,
            "centroid" => BlockDistance::Centroid,
            other => return cfg_err(&format!("channel.block_distance: unknown value `{other}` (effective, centroid)")),
        };
        let channel = ChannelConfig {
            model: ChannelModel::parse(&model_name, k)?,
            options: ChannelOptions { phase_reference, block_distance },
            normalize_path_loss: r.boolean("channel", "normalize_path_loss", d.channel.normalize_path_loss)?,
        };

        let errors = ErrorConfig {
            tau_g: r.float("errors", "tau_g", d.errors.tau_g)?,
            tau_r: r.float("errors", "tau_r", d.errors.tau_r)?,
            normalization: match r.string("errors", "normalization", "model")?.as_str() {
                "model" => CeeNormalization::ModelEnergy,
                "estimate" => CeeNormalization::EstimateEnergy,
                other => return cfg_err(&format!("errors.normalization: unknown value `{other}` (model, estimate)")),
            },
        };

        let ds = &d.solver;
        let da = &ds.adpm;
        let mut solver = SolverConfig {
            r_max: r.count("solver", "r_max", ds.r_max)?,
            epsilon: r.float("solver", "epsilon", ds.epsilon)?,
            adpm: AdpmParams {
                epsilon: r.float("solver", "adpm_epsilon", da.epsilon)?,
                delta1: r.float("solver", "adpm_delta1", da.delta1)?,
                delta2: r.float("solver", "adpm_delta2", da.delta2)?,
                kappa: r.float("solver", "adpm_kappa", da.kappa)?,
                max_iters: r.count("solver", "adpm_max_iters", da.max_iters)?,
                zero_eig_rel: r.float("solver", "adpm_zero_eig_rel", da.zero_eig_rel)?,
            },
            phase_safeguard: r.boolean("solver", "phase_safeguard", ds.phase_safeguard)?,
            monotone_tol: r.float("solver", "monotone_tol", ds.monotone_tol)?,
            ..*ds
        };
        solver.eta.rel_tol = r.float("solver", "eta_rel_tol", ds.eta.rel_tol)?;
        solver.eta.growth = r.float("solver", "eta_growth", ds.eta.growth)?;
        solver.eta.max_doublings = r.count("solver", "eta_max_doublings", ds.eta.max_doublings)?;

        let sweep = SweepConfig {
            family: Family::parse(&r.string("sweep", "family", d.sweep.family.name())?)?,
            values: r.opt_floats("sweep", "values")?,
            models: r.strings("sweep", "models", &d.sweep.models)?,
            k_values: r.counts("sweep", "k_values", &d.sweep.k_values)?,
            trials: r.count("sweep", "trials", d.sweep.trials)?,
            seed: r.uint("sweep", "seed", d.sweep.seed)?,
        };
        let output = OutputConfig {
            dir: PathBuf::from(r.string("output", "dir", &d.output.dir.to_string_lossy())?),
            timing: r.boolean("output", "timing", d.output.timing)?,
        };
        r.finish()?;

        let cfg = SystemConfig { scene, link, channel, errors, solver, sweep, output };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes every field; parsing the result gives back `self`.
    pub fn to_toml(&self) -> String {
        let mut o = String::new();
        let s = &self.scene;
        let _ = writeln!(o, "[scene]");
        let _ = writeln!(o, "carrier_hz = {:?}", s.carrier_hz);
        for (k, p) in [("tx_position", s.tx_position), ("ris_position", s.ris_position), ("rx_position", s.rx_position)] {
            let _ = writeln!(o, "{k} = [{:?}, {:?}, {:?}]", p[0], p[1], p[2]);
        }
        let _ = writeln!(o, "n_tx = {}\nn_rx = {}\nris_ny = {}\nris_nz = {}", s.n_tx, s.n_rx, s.ris_ny, s.ris_nz);
        let _ = writeln!(o, "spacing_wavelengths = {:?}", s.spacing_wavelengths);

        let l = &self.link;
        let _ = writeln!(o, "\n[link]");
        match l.power {
            PowerSpec::SnrDb(v) => writeln!(o, "snr_db = {v:?}"),
            PowerSpec::TxPowerW(v) => writeln!(o, "tx_power_w = {v:?}"),
        }
        .ok();
        let _ = writeln!(o, "noise_dbm = {:?}", l.noise_dbm);
        if let Some(n) = l.n_s {
            let _ = writeln!(o, "n_s = {n}");
        }
        let _ = writeln!(o, "n_paths = {}\nnlos_gain_db = {:?}", l.n_paths, l.nlos_gain_db);

        let ch = &self.channel;
        let _ = writeln!(o, "\n[channel]");
        let _ = writeln!(o, "model = \"{}\"\nk = {}", ch.model.name(), ch.model.partition());
        let pr = match ch.options.phase_reference {
            PhaseReference::Centroid => "centroid",
            PhaseReference::FirstElement => "first_element",
        };
        let bd = match ch.options.block_distance {
            BlockDistance::Effective => "effective",
            BlockDistance::Centroid => "centroid",
        };
        let _ = writeln!(o, "phase_reference = \"{pr}\"\nblock_distance = \"{bd}\"");
        let _ = writeln!(o, "normalize_path_loss = {}", ch.normalize_path_loss);

        let e = &self.errors;
        let norm = match e.normalization {
            CeeNormalization::ModelEnergy => "model",
            CeeNormalization::EstimateEnergy => "estimate",
        };
        let _ = writeln!(o, "\n[errors]\ntau_g = {:?}\ntau_r = {:?}\nnormalization = \"{norm}\"", e.tau_g, e.tau_r);

        let sv = &self.solver;
        let a = &sv.adpm;
        let _ = writeln!(o, "\n[solver]\nr_max = {}\nepsilon = {:?}", sv.r_max, sv.epsilon);
        let _ = writeln!(o, "eta_rel_tol = {:?}\neta_growth = {:?}\neta_max_doublings = {}", sv.eta.rel_tol, sv.eta.growth, sv.eta.max_doublings);
        let _ = writeln!(o, "adpm_epsilon = {:?}\nadpm_delta1 = {:?}\nadpm_delta2 = {:?}", a.epsilon, a.delta1, a.delta2);
        let _ = writeln!(o, "adpm_kappa = {:?}\nadpm_max_iters = {}\nadpm_zero_eig_rel = {:?}", a.kappa, a.max_iters, a.zero_eig_rel);
        let _ = writeln!(o, "phase_safeguard = {}\nmonotone_tol = {:?}", sv.phase_safeguard, sv.monotone_tol);

        let w = &self.sweep;
        let _ = writeln!(o, "\n[sweep]\nfamily = \"{}\"", w.family.name());
        if let Some(v) = &w.values {
            let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(o, "values = [{}]", items.join(", "));
        }
        let models: Vec<String> = w.models.iter().map(|m| format!("\"{m}\"")).collect();
        let ks: Vec<String> = w.k_values.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(o, "models = [{}]\nk_values = [{}]", models.join(", "), ks.join(", "));
        let _ = writeln!(o, "trials = {}\nseed = {}", w.trials, w.seed);

        let _ = writeln!(o, "\n[output]\ndir = {:?}\ntiming = {}", self.output.dir.to_string_lossy(), self.output.timing);
        o
    }
}

fn cfg_err<T>(msg: &str) -> Result<T> {
    Err(Error::Config(msg.to_string()))
}

fn check_partition(ny: usize, nz: usize, k: usize) -> Result<()> {
    if k == 0 {
        return cfg_err("K must be positive");
    }
    if ny % k != 0 {
        return cfg_err(&format!("N_Ry not divisible by K (N_Ry = {ny}, K = {k})"));
    }
    if nz % k != 0 {
        return cfg_err(&format!("N_Rz not divisible by K (N_Rz = {nz}, K = {k})"));
    }
    Ok(())
}

const SECTIONS: [&str; 7] = ["scene", "link", "channel", "errors", "solver", "sweep", "output"];

/// Pulls typed values out of the parsed table, remembering what was consumed.
struct Reader {
    sections: BTreeMap<String, toml::Table>,
}

impl Reader {
    fn new(table: toml::Table) -> Result<Self> {
        let mut sections = BTreeMap::new();
        let mut unknown = Vec::new();
        for (name, value) in table {
            match value {
                toml::Value::Table(t) if SECTIONS.contains(&name.as_str()) => {
                    sections.insert(name, t);
                }
                _ => unknown.push(name),
            }
        }
        if !unknown.is_empty() {
            return cfg_err(&format!("unknown config keys: {}", unknown.join(", ")));
        }
        Ok(Self { sections })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<toml::Value> {
        self.sections.get_mut(section).and_then(|t| t.remove(key))
    }

    fn finish(self) -> Result<()> {
        let leftovers: Vec<String> = self
            .sections
            .iter()
            .flat_map(|(s, t)| t.keys().map(move |k| format!("{s}.{k}")))
            .collect();
        if leftovers.is_empty() {
            Ok(())
        } else {
            cfg_err(&format!("unknown config keys: {}", leftovers.join(", ")))
        }
    }

    fn with_default<T: std::fmt::Debug>(&mut self, section: &str, key: &str, default: T, parse: impl Fn(&toml::Value) -> Option<T>, what: &str) -> Result<T> {
        match self.take(section, key) {
            Some(v) => parse(&v).ok_or_else(|| Error::Config(format!("{section}.{key} must be {what}, got {v}"))),
            None => {
                log::info!("default {section}.{key} = {default:?}");
                Ok(default)
            }
        }
    }

    fn float(&mut self, s: &str, k: &str, d: f64) -> Result<f64> {
        self.with_default(s, k, d, as_float, "a number")
    }

    fn opt_float(&mut self, s: &str, k: &str) -> Result<Option<f64>> {
        self.take(s, k)
            .map(|v| as_float(&v).ok_or_else(|| Error::Config(format!("{s}.{k} must be a number, got {v}"))))
            .transpose()
    }

    fn count(&mut self, s: &str, k: &str, d: usize) -> Result<usize> {
        self.with_default(s, k, d, as_count, "a non-negative integer")
    }

    fn opt_count(&mut self, s: &str, k: &str) -> Result<Option<usize>> {
        self.take(s, k)
            .map(|v| as_count(&v).ok_or_else(|| Error::Config(format!("{s}.{k} must be a non-negative integer, got {v}"))))
            .transpose()
    }

    fn uint(&mut self, s: &str, k: &str, d: u64) -> Result<u64> {
        self.with_default(s, k, d, |v| v.as_integer().and_then(|i| u64::try_from(i).ok()), "a non-negative integer")
    }

    fn boolean(&mut self, s: &str, k: &str, d: bool) -> Result<bool> {
        self.with_default(s, k, d, |v| v.as_bool(), "true or false")
    }

    fn string(&mut self, s: &str, k: &str, d: &str) -> Result<String> {
        self.with_default(s, k, d.to_string(), |v| v.as_str().map(str::to_string), "a string")
    }

    fn point(&mut self, s: &str, k: &str, d: [f64; 3]) -> Result<[f64; 3]> {
        self.with_default(s, k, d, |v| float_list(v).and_then(|l| <[f64; 3]>::try_from(l).ok()), "a list of three numbers")
    }

    fn opt_floats(&mut self, s: &str, k: &str) -> Result<Option<Vec<f64>>> {
        match self.take(s, k) {
            Some(v) => float_list(&v).map(Some).ok_or_else(|| Error::Config(format!("{s}.{k} must be a list of numbers, got {v}"))),
            None => {
                log::info!("default {s}.{k} = family grid");
                Ok(None)
            }
        }
    }

    fn strings(&mut self, s: &str, k: &str, d: &[String]) -> Result<Vec<String>> {
        self.with_default(
            s,
            k,
            d.to_vec(),
            |v| v.as_array()?.iter().map(|x| x.as_str().map(str::to_string)).collect(),
            "a list of strings",
        )
    }

    fn counts(&mut self, s: &str, k: &str, d: &[usize]) -> Result<Vec<usize>> {
        self.with_default(s, k, d.to_vec(), |v| v.as_array()?.iter().map(as_count).collect(), "a list of non-negative integers")
    }
}

fn as_float(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(f) => Some(*f),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_count(v: &toml::Value) -> Option<usize> {
    v.as_integer().and_then(|i| usize::try_from(i).ok())
}

fn float_list(v: &toml::Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(as_float).collect()
}
