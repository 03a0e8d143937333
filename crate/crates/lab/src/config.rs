//! Run configuration: a TOML document with one table per experiment family.
//! Every problem is reported with the line it comes from.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use polaron_core::dynamics::{FlowConfig, Frame, Integrator, System};
use polaron_core::exec::Execution;
use polaron_core::formfactor::ModelParams;
use polaron_core::phasespace::{GridSpec, DEFAULT_GRID_TOLERANCE};
use polaron_core::quantumdesk::Scenario;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    Dress,
    ConjugationTest,
    EnergyScan,
    PicardVerify,
    QuantumCheck,
    RegularityCheck,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Simulate => "simulate",
            Experiment::Dress => "dress",
            Experiment::ConjugationTest => "conjugation-test",
            Experiment::EnergyScan => "energy-scan",
            Experiment::PicardVerify => "picard-verify",
            Experiment::QuantumCheck => "quantum-check",
            Experiment::RegularityCheck => "regularity-check",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldInit {
    Zero,
    Smooth,
    Random,
    Minimizer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub resolution: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    DEFAULT_GRID_TOLERANCE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    #[serde(default = "default_system")]
    pub system: String,
    #[serde(default = "default_integrator")]
    pub integrator: String,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub frame: Frame,
    #[serde(default = "one")]
    pub sample_every: usize,
}

fn default_system() -> String {
    "undressed".into()
}
fn default_integrator() -> String {
    "strang".into()
}
fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub q: Option<Vec<f64>>,
    #[serde(default)]
    pub p: Option<Vec<f64>>,
    #[serde(default = "default_field")]
    pub field: FieldInit,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_field() -> FieldInit {
    FieldInit::Smooth
}
fn default_amplitude() -> f64 {
    0.3
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            q: None,
            p: None,
            field: default_field(),
            amplitude: default_amplitude(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DressSection {
    #[serde(default = "default_thetas")]
    pub thetas: Vec<f64>,
    #[serde(default = "default_triples")]
    pub triples: usize,
}

fn default_thetas() -> Vec<f64> {
    vec![-2.5, -1.0, 1.0, 2.5]
}
fn default_triples() -> usize {
    100
}

impl Default for DressSection {
    fn default() -> Self {
        DressSection {
            thetas: default_thetas(),
            triples: default_triples(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConjugationSection {
    #[serde(default = "default_conj_dts")]
    pub dts: Vec<f64>,
    #[serde(default = "default_conj_horizon")]
    pub horizon: f64,
}

fn default_conj_dts() -> Vec<f64> {
    vec![1e-3, 5e-4]
}
fn default_conj_horizon() -> f64 {
    2.0
}

impl Default for ConjugationSection {
    fn default() -> Self {
        ConjugationSection {
            dts: default_conj_dts(),
            horizon: default_conj_horizon(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyScanSection {
    #[serde(default = "default_cutoffs")]
    pub cutoffs: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_cutoffs() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0]
}
fn default_samples() -> usize {
    10_000
}

impl Default for EnergyScanSection {
    fn default() -> Self {
        EnergyScanSection {
            cutoffs: default_cutoffs(),
            samples: default_samples(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSection {
    /// Ball radius; the initial state's norm when absent.
    #[serde(default)]
    pub radius: Option<f64>,
    /// Steps on `[0, T(R)]`.
    #[serde(default)]
    pub steps: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumSection {
    #[serde(default = "default_hbars")]
    pub hbars: Vec<f64>,
    #[serde(default = "one_f")]
    pub horizon: f64,
    #[serde(default = "two")]
    pub box_periods: usize,
    #[serde(default = "default_fock_cap")]
    pub fock_cap: usize,
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
    /// Mode momenta, each of which must be a node of the classical grid.
    #[serde(default = "default_modes")]
    pub modes: Vec<f64>,
    #[serde(default = "default_scenarios")]
    pub scenarios: Vec<Scenario>,
    #[serde(default)]
    pub q0: f64,
    #[serde(default = "half")]
    pub p0: f64,
    /// `[re, im]` per mode.
    #[serde(default = "default_alpha0")]
    pub alpha0: Vec<[f64; 2]>,
    #[serde(default = "default_fock_cutoffs")]
    pub dressing_cutoffs: Vec<usize>,
    #[serde(default = "half")]
    pub dressing_hbar: f64,
    #[serde(default = "default_dressing_nx")]
    pub dressing_nx: usize,
}

fn default_hbars() -> Vec<f64> {
    vec![0.4, 0.2, 0.1]
}
fn one_f() -> f64 {
    1.0
}
fn two() -> usize {
    2
}
fn half() -> f64 {
    0.5
}
fn default_fock_cap() -> usize {
    40
}
fn default_max_dim() -> usize {
    polaron_core::quantumdesk::DEFAULT_MAX_DIM
}
fn default_modes() -> Vec<f64> {
    vec![1.5625]
}
fn default_scenarios() -> Vec<Scenario> {
    Scenario::ALL.to_vec()
}
fn default_alpha0() -> Vec<[f64; 2]> {
    vec![[0.3, 0.2]]
}
fn default_fock_cutoffs() -> Vec<usize> {
    vec![8, 12, 16]
}
fn default_dressing_nx() -> usize {
    32
}

impl Default for QuantumSection {
    fn default() -> Self {
        QuantumSection {
            hbars: default_hbars(),
            horizon: 1.0,
            box_periods: 2,
            fock_cap: default_fock_cap(),
            max_dim: default_max_dim(),
            modes: default_modes(),
            scenarios: default_scenarios(),
            q0: 0.0,
            p0: 0.5,
            alpha0: default_alpha0(),
            dressing_cutoffs: default_fock_cutoffs(),
            dressing_hbar: 0.5,
            dressing_nx: default_dressing_nx(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularitySection {
    #[serde(default = "default_orders")]
    pub orders: Vec<f64>,
}

fn default_orders() -> Vec<f64> {
    vec![1.0, 2.0]
}

impl Default for RegularitySection {
    fn default() -> Self {
        RegularitySection {
            orders: default_orders(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub experiments: Vec<Experiment>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub exec: Execution,
    pub model: ModelParams,
    pub grid: GridSection,
    pub flow: FlowSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub dress: DressSection,
    #[serde(default)]
    pub conjugation: ConjugationSection,
    #[serde(default)]
    pub energy_scan: EnergyScanSection,
    #[serde(default)]
    pub picard: PicardSection,
    #[serde(default)]
    pub quantum: QuantumSection,
    #[serde(default)]
    pub regularity: RegularitySection,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Invalid {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
}

/// 1-based line and column of a byte offset.
fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

/// Line of `key` inside `[table]` (or at top level when `table` is empty).
fn locate(src: &str, table: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header_line = None;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == table {
                header_line = Some(i + 1);
            }
            continue;
        }
        if current == table {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header_line
}

struct Problem {
    table: &'static str,
    key: &'static str,
    message: String,
}

fn problem(table: &'static str, key: &'static str, message: impl Into<String>) -> Problem {
    Problem {
        table,
        key,
        message: message.into(),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&src, path)
    }

    pub fn parse(src: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(src).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |s| line_col(src, s.start));
            ConfigError::Invalid {
                path: path.to_path_buf(),
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        if let Err(p) = cfg.check() {
            let line = locate(src, p.table, p.key).unwrap_or(1);
            let key = if p.table.is_empty() {
                p.key.to_string()
            } else {
                format!("{}.{}", p.table, p.key)
            };
            return Err(ConfigError::Invalid {
                path: path.to_path_buf(),
                line,
                column: 1,
                message: format!("{key}: {}", p.message),
            });
        }
        Ok(cfg)
    }

    fn check(&self) -> Result<(), Problem> {
        self.model.validate().map_err(|e| problem("model", "dim", e.to_string()))?;
        self.grid_spec()
            .validate()
            .map_err(|e| problem("grid", "resolution", e.to_string()))?;
        if !(self.grid.tolerance > 0.0) {
            return Err(problem("grid", "tolerance", "must be positive"));
        }
        System::from_str(&self.flow.system).map_err(|e| problem("flow", "system", e.to_string()))?;
        Integrator::from_str(&self.flow.integrator).map_err(|e| problem("flow", "integrator", e.to_string()))?;
        self.flow_config()
            .validate()
            .map_err(|e| problem("flow", "dt", e.to_string()))?;
        let d = self.model.dim;
        for (key, v) in [("q", &self.initial.q), ("p", &self.initial.p)] {
            if let Some(v) = v {
                if v.len() != d {
                    return Err(problem("initial", key, format!("needs {d} components, got {}", v.len())));
                }
            }
        }
        if !(self.initial.amplitude >= 0.0 && self.initial.amplitude.is_finite()) {
            return Err(problem("initial", "amplitude", "must be finite and ≥ 0"));
        }
        if self.conjugation.dts.iter().any(|&dt| !(dt > 0.0)) {
            return Err(problem("conjugation", "dts", "all steps must be positive"));
        }
        if !(self.conjugation.horizon > 0.0) {
            return Err(problem("conjugation", "horizon", "must be positive"));
        }
        let uses = |e: Experiment| self.experiments.contains(&e);
        if self.model.coupling != 1.0 {
            return Err(problem("model", "coupling", "the runner drives the g = 1 system only"));
        }
        if uses(Experiment::EnergyScan) && self.energy_scan.cutoffs.iter().any(|&c| !(c > self.model.threshold)) {
            return Err(problem("energy_scan", "cutoffs", "every cutoff must exceed the threshold"));
        }
        if let Some(r) = self.picard.radius {
            if !(r > 0.0) {
                return Err(problem("picard", "radius", "must be positive"));
            }
        }
        let q = &self.quantum;
        if !uses(Experiment::QuantumCheck) {
            return self.check_regularity();
        }
        if q.hbars.iter().any(|&h| !(h > 0.0)) {
            return Err(problem("quantum", "hbars", "every ħ must be positive"));
        }
        if q.modes.is_empty() {
            return Err(problem("quantum", "modes", "at least one mode is required"));
        }
        if q.alpha0.len() != q.modes.len() {
            return Err(problem("quantum", "alpha0", "one amplitude per mode"));
        }
        if self.model.dim != 1 {
            return Err(problem("model", "dim", "quantum-check runs in one dimension"));
        }
        self.check_regularity()
    }

    fn check_regularity(&self) -> Result<(), Problem> {
        if self.regularity.orders.iter().any(|&s| !(s >= 0.0)) {
            return Err(problem("regularity", "orders", "orders must be ≥ 0"));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec::new(self.model.dim, self.model.cutoff, self.model.threshold, self.grid.resolution)
            .with_tolerance(self.grid.tolerance)
    }

    pub fn system(&self) -> System {
        System::from_str(&self.flow.system).expect("validated")
    }

    pub fn flow_config(&self) -> FlowConfig {
        let system = System::from_str(&self.flow.system).unwrap_or(System::Undressed);
        let integ = Integrator::from_str(&self.flow.integrator).unwrap_or(Integrator::Strang);
        FlowConfig::new(system, integ, self.flow.dt, self.flow.horizon)
            .in_frame(self.flow.frame)
            .every(self.flow.sample_every)
    }
}
