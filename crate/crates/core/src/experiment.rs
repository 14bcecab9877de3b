//! Experiment configuration and seeded sweeps with CSV, protocol and manifest
//! output.
//!
//! A run expands the configuration into tasks (one per noise grid point, or
//! one per Haar sample for merging), evaluates them on the rayon pool and
//! writes the results in task order, so identical configurations produce
//! identical files apart from the wall-time column.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::manifold::ProductPoint;
use crate::objectives::{gadc_choi_input, noisy_bell_input, NoiseKind, NoiseLocus, Objective, ObjectiveKind};
use crate::optimizer::{maximize_multi, restart_seed, OptimOptions};
use crate::protocol::{AgentSpace, Followers, LoccProtocol, Povm, ProtocolDocument};
use crate::sdp::{ppt_avg_fidelity_bound_with, ppt_fidelity_bound_with, ppt_merging_bound, PptBound, SolveOptions};
use crate::state::{conditional_entropy, haar_random_pure, PureState, QState};

pub const CSV_SCHEMA: &str = "loccforge-results v1";
pub const TIMING_SCHEMA: &str = "loccforge-timing v1";
pub const MANIFEST_FORMAT: &str = "loccforge-manifest";

const CSV_COLUMNS: [&str; 17] = [
    "experiment",
    "scheme",
    "point",
    "gamma",
    "gamma2",
    "sample",
    "conditional_entropy",
    "value",
    "success_probability",
    "baseline",
    "bound",
    "bound_residual",
    "best_restart",
    "status",
    "seed",
    "noise_locus",
    "wall_time_s",
];

const OPTIMIZER_STREAM: usize = 0;
const HAAR_STREAM: usize = 1;

/// Seed of item `index` in an independent `stream` derived from `master`.
pub fn derive_seed(master: u64, stream: usize, index: usize) -> u64 {
    restart_seed(restart_seed(master, stream), index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    DistillAvg,
    DistillFid,
    CoherentInfo,
    Merge,
    PptBound,
    Timing,
}

impl ExperimentKind {
    pub fn label(&self) -> &'static str {
        match self {
            ExperimentKind::DistillAvg => "distill-avg",
            ExperimentKind::DistillFid => "distill-fid",
            ExperimentKind::CoherentInfo => "coherent-info",
            ExperimentKind::Merge => "merge",
            ExperimentKind::PptBound => "ppt-bound",
            ExperimentKind::Timing => "timing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    #[default]
    Locc,
    Ips,
    Cmps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseName {
    Depolarizing,
    AmplitudeDamping,
    Dephasing,
    Gadc,
}

impl NoiseName {
    fn with(self, gamma: f64, gamma2: f64) -> NoiseKind {
        match self {
            NoiseName::Depolarizing => NoiseKind::Depolarizing { gamma },
            NoiseName::AmplitudeDamping => NoiseKind::AmplitudeDamping { gamma },
            NoiseName::Dephasing => NoiseKind::Dephasing { gamma },
            NoiseName::Gadc => NoiseKind::Gadc { gamma_a: gamma, gamma_n: gamma2 },
        }
    }
}

/// Evenly spaced points on `[start, stop]`, or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub values: Option<Vec<f64>>,
}

impl Default for Grid {
    fn default() -> Self {
        Self { start: 0.0, stop: 1.0, points: 11, values: None }
    }
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if let Some(v) = &self.values {
            return v.clone();
        }
        match self.points {
            0 => vec![],
            1 => vec![self.start],
            n => (0..n).map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// One kind per copy; a single kind is repeated over all copies.
    pub kinds: Vec<NoiseName>,
    pub locus: NoiseLocus,
    pub grid: Grid,
    /// Second GADC parameter, held fixed over the grid.
    pub gamma_n: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { kinds: vec![NoiseName::Depolarizing], locus: NoiseLocus::Joint, grid: Grid::default(), gamma_n: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeObjective {
    #[default]
    Conditional,
    Average,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeConfig {
    /// Schmidt rank of the shared resource.
    pub k: usize,
    /// Schmidt rank of the entanglement left over.
    pub m: usize,
    pub samples: usize,
    pub objective: MergeObjective,
}

impl Default for MergeConfig {
    fn default() -> Self {
        Self { k: 2, m: 1, samples: 200, objective: MergeObjective::Conditional }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PptTarget {
    #[default]
    DistillAvg,
    DistillFid,
    Merge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PptConfig {
    pub target: PptTarget,
    /// Success probability for the fixed-probability program.
    pub success_probability: Option<f64>,
}

impl Default for PptConfig {
    fn default() -> Self {
        Self { target: PptTarget::DistillAvg, success_probability: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub copies: Vec<usize>,
    pub trials: usize,
    pub gamma: f64,
    pub sdp_time_cap_s: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self { copies: vec![2, 3], trials: 10, gamma: 0.4, sdp_time_cap_s: 1800.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub csv: String,
    pub export_protocols: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), csv: "results.csv".into(), export_protocols: true }
    }
}

/// Parsed experiment document. Unset scheme parameters fall back to
/// per-experiment defaults, see [`ExperimentConfig::resolved`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    pub scheme: SchemeKind,
    pub agents: usize,
    pub copies: usize,
    pub outcomes: Option<usize>,
    pub kraus_order: Option<usize>,
    pub rounds: usize,
    pub follower_channels: bool,
    pub selected: Option<Vec<usize>>,
    /// Adds the matching PPT bound to every optimization row.
    pub with_bound: bool,
    pub seed: u64,
    pub noise: NoiseConfig,
    pub merge: MergeConfig,
    pub ppt: PptConfig,
    pub timing: TimingConfig,
    pub optimizer: OptimOptions,
    pub sdp: SolveOptions,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            scheme: SchemeKind::Locc,
            agents: 2,
            copies: 2,
            outcomes: None,
            kraus_order: None,
            rounds: 1,
            follower_channels: false,
            selected: None,
            with_bound: false,
            seed: 0,
            noise: NoiseConfig::default(),
            merge: MergeConfig::default(),
            ppt: PptConfig::default(),
            timing: TimingConfig::default(),
            optimizer: OptimOptions::default(),
            sdp: SolveOptions::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Scheme parameters after defaults are applied; recorded in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolved {
    pub experiment: ExperimentKind,
    pub outcomes: usize,
    pub kraus_order: usize,
}

fn config_err(field: &str, msg: impl Into<String>) -> Error {
    Error::Config { field: field.into(), msg: msg.into() }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = msg.split('`').nth(1).map(str::to_string).unwrap_or_else(|| "<document>".into());
            config_err(&field, e.to_string().trim().to_string())
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err("<document>", e.to_string()))
    }

    pub fn kind(&self) -> Result<ExperimentKind> {
        self.experiment.ok_or_else(|| config_err("experiment", "missing experiment kind"))
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        }))
    }

    fn merging(&self) -> bool {
        match self.kind() {
            Ok(ExperimentKind::Merge) => true,
            Ok(ExperimentKind::PptBound) => self.ppt.target == PptTarget::Merge,
            _ => false,
        }
    }

    pub fn resolved(&self) -> Result<Resolved> {
        let experiment = self.kind()?;
        let (default_s, default_t) = if self.merging() {
            let (k, m) = (self.merge.k, self.merge.m);
            (2, (2 * k) * (4 * m))
        } else if experiment == ExperimentKind::Timing {
            (1, 4)
        } else if self.scheme == SchemeKind::Cmps {
            (1, 2)
        } else {
            (2, 1)
        };
        Ok(Resolved { experiment, outcomes: self.outcomes.unwrap_or(default_s), kraus_order: self.kraus_order.unwrap_or(default_t) })
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        let r = self.resolved()?;
        if self.agents < 2 {
            return Err(config_err("agents", "need at least two agents"));
        }
        if self.copies == 0 || self.copies > 4 {
            return Err(config_err("copies", "copies must lie in 1..=4"));
        }
        if r.outcomes == 0 {
            return Err(config_err("outcomes", "must be at least 1"));
        }
        if r.kraus_order == 0 {
            return Err(config_err("kraus_order", "must be at least 1"));
        }
        if self.scheme == SchemeKind::Locc && self.rounds == 0 {
            return Err(config_err("rounds", "must be at least 1"));
        }
        let grid = self.noise.grid.values();
        if grid.is_empty() {
            return Err(config_err("noise.grid", "grid is empty"));
        }
        if grid.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(config_err("noise.grid", "grid values must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.noise.gamma_n) {
            return Err(config_err("noise.gamma_n", "must lie in [0, 1]"));
        }
        let nk = self.noise.kinds.len();
        if nk == 0 || (nk != 1 && nk != self.copies && kind != ExperimentKind::Timing) {
            return Err(config_err("noise.kinds", format!("give one kind or one per copy ({})", self.copies)));
        }
        if self.merge.samples == 0 {
            return Err(config_err("merge.samples", "sample count must be at least 1"));
        }
        if !matches!(self.merge.k, 1 | 2) || !matches!(self.merge.m, 1 | 2) {
            return Err(config_err("merge", "k and m must be 1 or 2"));
        }
        self.optimizer.validate().map_err(|e| config_err("optimizer", e.to_string()))?;
        let gadc = self.noise.kinds.contains(&NoiseName::Gadc);
        match kind {
            ExperimentKind::CoherentInfo => {
                if !self.noise.kinds.iter().all(|k| *k == NoiseName::Gadc) {
                    return Err(config_err("noise.kinds", "coherent-info runs on GADC Choi states"));
                }
                if self.agents != 2 {
                    return Err(config_err("agents", "coherent information is bipartite"));
                }
                if self.with_bound {
                    return Err(config_err("with_bound", "no SDP relaxation for coherent information"));
                }
            }
            ExperimentKind::Merge => {
                if self.scheme != SchemeKind::Ips {
                    return Err(config_err("scheme", "merging runs with scheme = \"ips\""));
                }
                if self.with_bound && self.merge.objective != MergeObjective::Average {
                    return Err(config_err("with_bound", "the PPT merging bound applies to the average fidelity"));
                }
            }
            ExperimentKind::DistillAvg | ExperimentKind::DistillFid | ExperimentKind::PptBound | ExperimentKind::Timing => {
                if gadc && !self.merging() {
                    return Err(config_err("noise.kinds", "GADC inputs are for coherent-info"));
                }
                if (self.with_bound || kind == ExperimentKind::PptBound) && self.agents != 2 {
                    return Err(config_err("agents", "PPT bounds are bipartite"));
                }
            }
        }
        if kind == ExperimentKind::PptBound && self.ppt.target == PptTarget::DistillFid {
            match self.ppt.success_probability {
                Some(p) if p > 0.0 && p <= 1.0 => {}
                _ => return Err(config_err("ppt.success_probability", "fixed-probability bound needs p in (0, 1]")),
            }
        }
        if kind == ExperimentKind::Timing {
            if self.timing.copies.is_empty() || self.timing.copies.iter().any(|&m| m == 0 || m > 4) {
                return Err(config_err("timing.copies", "copies must lie in 1..=4"));
            }
            if self.timing.trials == 0 {
                return Err(config_err("timing.trials", "must be at least 1"));
            }
            if !(0.0..=1.0).contains(&self.timing.gamma) {
                return Err(config_err("timing.gamma", "must lie in [0, 1]"));
            }
        }
        if let Some(sel) = &self.selected {
            if kind != ExperimentKind::DistillFid && !(kind == ExperimentKind::Merge && self.merge.objective == MergeObjective::Conditional)
            {
                return Err(config_err("selected", "only conditional objectives select an outcome"));
            }
            if sel.is_empty() {
                return Err(config_err("selected", "empty outcome sequence"));
            }
        }
        Ok(())
    }

    fn noise_at(&self, copies: usize, gamma: f64) -> Vec<NoiseKind> {
        (0..copies).map(|i| self.noise.kinds[i % self.noise.kinds.len()].with(gamma, self.noise.gamma_n)).collect()
    }

    /// Distillation input at noise parameter `gamma`.
    pub fn distill_input(&self, copies: usize, gamma: f64) -> Result<QState> {
        noisy_bell_input(self.agents, &self.noise_at(copies, gamma), self.noise.locus)
    }

    /// `n`-copy GADC Choi input at `gamma_a = gamma`.
    pub fn coherent_input(&self, gamma: f64) -> Result<QState> {
        gadc_choi_input(&vec![(gamma, self.noise.gamma_n); self.copies])
    }

    /// Haar-random `ψ_RAB` of merging sample `sample`.
    pub fn merge_state(&self, sample: usize) -> Result<PureState> {
        let h = haar_random_pure(8, derive_seed(self.seed, HAAR_STREAM, sample))?;
        PureState::new(h.amplitudes().clone(), vec![2, 2, 2])
    }

    /// Protocol over `copies` qubit pairs per agent.
    pub fn distill_protocol(&self, copies: usize) -> Result<LoccProtocol> {
        let r = self.resolved()?;
        let d = 1usize << copies;
        let agents = vec![AgentSpace::square(d); self.agents];
        match self.scheme {
            SchemeKind::Locc => {
                let followers = if self.follower_channels {
                    Followers::Channels { kraus_orders: vec![r.kraus_order; self.rounds] }
                } else {
                    Followers::Identity
                };
                LoccProtocol::locc_r(self.agents, d, self.rounds, r.outcomes, r.kraus_order, followers)
            }
            SchemeKind::Ips => LoccProtocol::ips(agents, vec![], r.outcomes, r.kraus_order),
            SchemeKind::Cmps => {
                let povm = Povm::computational(vec![2; copies], (1..copies).collect())?;
                LoccProtocol::cmps(agents, vec![], r.kraus_order, vec![povm; self.agents])
            }
        }
    }

    /// IPS protocol taking `(A A_e, B B_e)` to `(A_e', B_e' B' B'')` with the
    /// reference as a spectator.
    pub fn merge_protocol(&self) -> Result<LoccProtocol> {
        let r = self.resolved()?;
        let (k, m) = (self.merge.k, self.merge.m);
        let agents = vec![AgentSpace { dim_in: 2 * k, dim_out: m }, AgentSpace { dim_in: 2 * k, dim_out: 4 * m }];
        LoccProtocol::ips(agents, vec![2], r.outcomes, r.kraus_order)
    }

    /// The objective optimized at grid point `point` or merging sample
    /// `sample`; used by [`run`] and to re-check exported protocols.
    pub fn objective(&self, point: usize, sample: usize) -> Result<Objective> {
        let gamma = self.grid_value(point)?;
        match self.kind()? {
            ExperimentKind::DistillAvg => {
                Objective::avg_distill(self.distill_protocol(self.copies)?, self.distill_input(self.copies, gamma)?, self.copies)
            }
            ExperimentKind::DistillFid => Objective::distill(
                self.distill_protocol(self.copies)?,
                self.distill_input(self.copies, gamma)?,
                self.copies,
                self.selected.clone(),
            ),
            ExperimentKind::CoherentInfo => {
                Objective::block_coherent_info(self.distill_protocol(self.copies)?, self.coherent_input(gamma)?, self.copies)
            }
            ExperimentKind::Merge => {
                let psi = self.merge_state(sample)?;
                let (k, m) = (self.merge.k, self.merge.m);
                match self.merge.objective {
                    MergeObjective::Conditional => Objective::merge(self.merge_protocol()?, &psi, k, m, self.selected.clone()),
                    MergeObjective::Average => Objective::avg_merge(self.merge_protocol()?, &psi, k, m),
                }
            }
            ExperimentKind::PptBound | ExperimentKind::Timing => Err(config_err("experiment", "this experiment has no protocol objective")),
        }
    }

    fn grid_value(&self, point: usize) -> Result<f64> {
        let grid = self.noise.grid.values();
        grid.get(point).copied().ok_or_else(|| config_err("noise.grid", format!("no grid point {point}")))
    }

    fn tasks(&self) -> Result<Vec<Task>> {
        if self.merging() {
            return Ok((0..self.merge.samples).map(|s| Task { point: 0, sample: Some(s), gamma: None }).collect());
        }
        Ok(self.noise.grid.values().into_iter().enumerate().map(|(i, g)| Task { point: i, sample: None, gamma: Some(g) }).collect())
    }
}

#[derive(Debug, Clone, Copy)]
struct Task {
    point: usize,
    sample: Option<usize>,
    gamma: Option<f64>,
}

/// One CSV row. Empty optional fields are written as empty cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: String,
    pub scheme: String,
    pub point: usize,
    pub gamma: Option<f64>,
    pub gamma2: Option<f64>,
    pub sample: Option<usize>,
    pub conditional_entropy: Option<f64>,
    pub value: Option<f64>,
    pub success_probability: Option<f64>,
    /// Objective at the identity protocol, when local maps are square.
    pub baseline: Option<f64>,
    pub bound: Option<f64>,
    pub bound_residual: Option<f64>,
    pub best_restart: Option<usize>,
    pub status: String,
    pub seed: u64,
    pub noise_locus: String,
    pub wall_time_s: f64,
}

fn cell<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

impl Row {
    fn cells(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.scheme.clone(),
            self.point.to_string(),
            cell(&self.gamma),
            cell(&self.gamma2),
            cell(&self.sample),
            cell(&self.conditional_entropy),
            cell(&self.value),
            cell(&self.success_probability),
            cell(&self.baseline),
            cell(&self.bound),
            cell(&self.bound_residual),
            cell(&self.best_restart),
            self.status.clone(),
            self.seed.to_string(),
            self.noise_locus.clone(),
            format!("{:.6}", self.wall_time_s),
        ]
    }

    /// File stem of the exported protocol.
    pub fn stem(&self) -> String {
        match self.sample {
            Some(s) => format!("{}-s{s:04}", self.experiment),
            None => format!("{}-p{:03}", self.experiment, self.point),
        }
    }
}

pub fn rows_to_csv(rows: &[Row]) -> String {
    let mut out = format!("# {CSV_SCHEMA}\n{}\n", CSV_COLUMNS.join(","));
    for r in rows {
        out.push_str(&r.cells().iter().map(|c| csv_escape(c)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Rows whose bound falls below the achieved value by more than `tol`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DominanceReport {
    pub checked: usize,
    pub violations: Vec<(usize, f64, f64)>,
}

impl DominanceReport {
    pub fn from_rows(rows: &[Row], tol: f64) -> Self {
        let mut rep = DominanceReport::default();
        for (i, r) in rows.iter().enumerate() {
            if let (Some(v), Some(b)) = (r.value, r.bound) {
                rep.checked += 1;
                if b < v - tol {
                    rep.violations.push((i, v, b));
                }
            }
        }
        rep
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<Row>,
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub protocol_paths: Vec<PathBuf>,
    pub dominance: DominanceReport,
    pub failures: usize,
}

struct TaskResult {
    row: Row,
    document: Option<ProtocolDocument>,
}

fn bound_for(cfg: &ExperimentConfig, rho_or_psi: BoundInput<'_>, p: Option<f64>) -> Result<PptBound> {
    match rho_or_psi {
        BoundInput::Merge(psi) => ppt_merging_bound(psi),
        BoundInput::Distill(rho) => match p {
            None => ppt_avg_fidelity_bound_with(rho, 2, &cfg.sdp),
            Some(p) => ppt_fidelity_bound_with(rho, 2, p, &cfg.sdp),
        },
    }
}

enum BoundInput<'a> {
    Distill(&'a QState),
    Merge(&'a PureState),
}

fn scheme_label(cfg: &ExperimentConfig) -> String {
    match cfg.scheme {
        SchemeKind::Locc => format!("locc{}", cfg.rounds),
        SchemeKind::Ips => "ips".into(),
        SchemeKind::Cmps => "cmps".into(),
    }
}

fn run_task(cfg: &ExperimentConfig, index: usize, task: Task) -> TaskResult {
    let started = Instant::now();
    let kind = cfg.kind().expect("validated");
    let seed = derive_seed(cfg.seed, OPTIMIZER_STREAM, index);
    let gamma2 = cfg.noise.kinds.contains(&NoiseName::Gadc).then_some(cfg.noise.gamma_n);
    let mut row = Row {
        experiment: kind.label().into(),
        scheme: if kind == ExperimentKind::PptBound { "ppt".into() } else { scheme_label(cfg) },
        point: task.point,
        gamma: task.gamma,
        gamma2,
        sample: task.sample,
        conditional_entropy: None,
        value: None,
        success_probability: None,
        baseline: None,
        bound: None,
        bound_residual: None,
        best_restart: None,
        status: String::new(),
        seed,
        noise_locus: if cfg.merging() { String::new() } else { cfg.noise.locus.label().into() },
        wall_time_s: 0.0,
    };
    let outcome = if kind == ExperimentKind::PptBound {
        ppt_task(cfg, task, &mut row).map(|_| None)
    } else {
        optimize_task(cfg, task, seed, &mut row).map(Some)
    };
    let document = match outcome {
        Ok(doc) => {
            if row.status.is_empty() {
                row.status = "ok".into();
            }
            doc
        }
        Err(e) => {
            eprintln!("loccforge: {} task {index} failed: {e}", kind.label());
            row.status = format!("error: {e}");
            None
        }
    };
    row.wall_time_s = started.elapsed().as_secs_f64();
    TaskResult { row, document }
}

fn ppt_task(cfg: &ExperimentConfig, task: Task, row: &mut Row) -> Result<()> {
    let bound = if let Some(s) = task.sample {
        let psi = cfg.merge_state(s)?;
        row.conditional_entropy = Some(conditional_entropy(&psi)?);
        bound_for(cfg, BoundInput::Merge(&psi), None)?
    } else {
        let rho = cfg.distill_input(cfg.copies, task.gamma.expect("grid task"))?;
        let p = (cfg.ppt.target == PptTarget::DistillFid).then(|| cfg.ppt.success_probability.expect("validated"));
        row.success_probability = p;
        bound_for(cfg, BoundInput::Distill(&rho), p)?
    };
    row.value = Some(bound.value);
    row.bound = Some(bound.value);
    row.bound_residual = Some(bound.residual());
    row.status = bound_status(&bound);
    Ok(())
}

fn bound_status(b: &PptBound) -> String {
    format!("sdp_{}", serde_json::to_value(b.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
}

fn optimize_task(cfg: &ExperimentConfig, task: Task, seed: u64, row: &mut Row) -> Result<ProtocolDocument> {
    let objective = cfg.objective(task.point, task.sample.unwrap_or(0))?;
    let opts = OptimOptions { seed, ..cfg.optimizer };
    let result = maximize_multi(&objective, &opts)?;
    let point: &ProductPoint = &result.best.point;
    let eval = objective.evaluate(point)?;
    row.value = Some(eval.value);
    row.success_probability = eval.success_probability;
    row.best_restart = Some(result.best_restart());
    row.status = result.best.trace.status.label().into();
    // non-square local maps (merging) have no identity protocol
    if let Ok(id) = objective.protocol().identity_point() {
        row.baseline = Some(objective.value(&id)?);
    }
    if let Some(s) = task.sample {
        let psi = cfg.merge_state(s)?;
        row.conditional_entropy = Some(conditional_entropy(&psi)?);
        if cfg.with_bound {
            let b = bound_for(cfg, BoundInput::Merge(&psi), None)?;
            row.bound = Some(b.value);
            row.bound_residual = Some(b.residual());
        }
    } else if cfg.with_bound {
        let p = match objective.kind() {
            ObjectiveKind::DistillFid => eval.success_probability.filter(|&p| p > 0.0),
            _ => None,
        };
        if objective.kind() == ObjectiveKind::AvgDistillFid || p.is_some() {
            let b = bound_for(cfg, BoundInput::Distill(objective.input()), p)?;
            row.bound = Some(b.value);
            row.bound_residual = Some(b.residual());
        }
    }
    let mut doc = ProtocolDocument::new(objective.protocol(), point)?
        .with_metadata("experiment", row.experiment.clone().into())
        .with_metadata("point", row.point.into())
        .with_metadata("value", eval.value.into())
        .with_metadata("seed", seed.into());
    if let Some(g) = row.gamma {
        doc = doc.with_metadata("gamma", g.into());
    }
    if let Some(s) = row.sample {
        doc = doc.with_metadata("sample", s.into());
    }
    Ok(doc)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub software_version: String,
    pub config_sha256: String,
    pub csv_schema: String,
    pub resolved: Resolved,
    pub rows: usize,
    pub failures: usize,
    pub files: Vec<String>,
    pub config: ExperimentConfig,
}

fn write_manifest(cfg: &ExperimentConfig, dir: &Path, schema: &str, rows: usize, failures: usize, files: Vec<String>) -> Result<PathBuf> {
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        software_version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: cfg.hash()?,
        csv_schema: schema.into(),
        resolved: cfg.resolved()?,
        rows,
        failures,
        files,
        config: cfg.clone(),
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(path)
}

/// Runs the configured sweep and writes the CSV, one protocol document per
/// task and the manifest into `cfg.output.dir`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    if cfg.kind()? == ExperimentKind::Timing {
        return Err(config_err("experiment", "use timing_report for timing runs"));
    }
    let tasks = cfg.tasks()?;
    let results: Vec<TaskResult> = tasks.par_iter().enumerate().map(|(i, &t)| run_task(cfg, i, t)).collect();
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir)?;
    let mut files = vec![cfg.output.csv.clone()];
    let mut protocol_paths = Vec::new();
    if cfg.output.export_protocols {
        let pdir = dir.join("protocols");
        for res in &results {
            if let Some(doc) = &res.document {
                if protocol_paths.is_empty() {
                    fs::create_dir_all(&pdir)?;
                }
                let name = format!("{}.json", res.row.stem());
                let path = pdir.join(&name);
                fs::write(&path, doc.to_json()? + "\n")?;
                files.push(format!("protocols/{name}"));
                protocol_paths.push(path);
            }
        }
    }
    let rows: Vec<Row> = results.into_iter().map(|r| r.row).collect();
    let failures = rows.iter().filter(|r| r.status.starts_with("error")).count();
    let csv_path = dir.join(&cfg.output.csv);
    fs::write(&csv_path, rows_to_csv(&rows))?;
    let manifest_path = write_manifest(cfg, dir, CSV_SCHEMA, rows.len(), failures, files)?;
    let dominance = DominanceReport::from_rows(&rows, 1e-4);
    Ok(RunOutput { rows, csv_path, manifest_path, protocol_paths, dominance, failures })
}

/// One timed run of either method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: String,
    pub copies: usize,
    pub trial: usize,
    pub gamma: f64,
    pub value: Option<f64>,
    pub success_probability: Option<f64>,
    pub status: String,
    pub seed: u64,
    pub wall_time_s: f64,
}

pub fn timing_to_csv(rows: &[TimingRow]) -> String {
    let mut out = format!("# {TIMING_SCHEMA}\nmethod,copies,trial,gamma,value,success_probability,status,seed,wall_time_s\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.6}",
            r.method,
            r.copies,
            r.trial,
            r.gamma,
            cell(&r.value),
            cell(&r.success_probability),
            csv_escape(&r.status),
            r.seed,
            r.wall_time_s
        );
    }
    out
}

/// Times a CMPS optimization of the conditional distillation fidelity on
/// `copies` noisy pairs. Returns the row and the input state.
pub fn cmps_trial(cfg: &ExperimentConfig, copies: usize, trial: usize) -> Result<(TimingRow, QState)> {
    let gamma = cfg.timing.gamma;
    let seed = derive_seed(cfg.seed, OPTIMIZER_STREAM, copies * 1000 + trial);
    let rho = cfg.distill_input(copies, gamma)?;
    let cmps = ExperimentConfig { scheme: SchemeKind::Cmps, ..cfg.clone() };
    let objective = Objective::distill(cmps.distill_protocol(copies)?, rho.clone(), copies, None)?;
    let started = Instant::now();
    let opts = OptimOptions { seed, restarts: 1, ..cfg.optimizer };
    let res = maximize_multi(&objective, &opts)?;
    let eval = objective.evaluate(&res.best.point)?;
    let row = TimingRow {
        method: "cmps".into(),
        copies,
        trial,
        gamma,
        value: Some(eval.value),
        success_probability: eval.success_probability,
        status: res.best.trace.status.label().into(),
        seed,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok((row, rho))
}

/// Times the fixed-probability PPT program at success probability `p`,
/// stopping after `cap_s` seconds.
pub fn ppt_trial(cfg: &ExperimentConfig, rho: &QState, copies: usize, trial: usize, p: f64, cap_s: f64) -> TimingRow {
    let started = Instant::now();
    let opts = SolveOptions { time_limit_s: Some(cap_s), ..cfg.sdp };
    let (value, status) = if p > 0.0 {
        match ppt_fidelity_bound_with(rho, 2, p, &opts) {
            Ok(b) => (Some(b.value), bound_status(&b)),
            Err(e) => (None, format!("error: {e}")),
        }
    } else {
        (None, "error: zero success probability".into())
    };
    TimingRow {
        method: "ppt".into(),
        copies,
        trial,
        gamma: cfg.timing.gamma,
        value,
        success_probability: Some(p),
        status,
        seed: derive_seed(cfg.seed, OPTIMIZER_STREAM, copies * 1000 + trial),
        wall_time_s: started.elapsed().as_secs_f64(),
    }
}

/// A CMPS trial followed by the PPT program at the probability it reached.
pub fn timing_trial(cfg: &ExperimentConfig, copies: usize, trial: usize) -> Result<(TimingRow, TimingRow)> {
    let (cmps, rho) = cmps_trial(cfg, copies, trial)?;
    let p = cmps.success_probability.unwrap_or(0.0);
    let ppt = ppt_trial(cfg, &rho, copies, trial, p, cfg.timing.sdp_time_cap_s);
    Ok((cmps, ppt))
}

/// Runs every timing trial sequentially (so wall times are not shared with
/// other work) and writes `timing.csv` plus the manifest.
pub fn timing_report(cfg: &ExperimentConfig) -> Result<(Vec<TimingRow>, PathBuf)> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &m in &cfg.timing.copies {
        for trial in 0..cfg.timing.trials {
            let (a, b) = timing_trial(cfg, m, trial)?;
            rows.push(a);
            rows.push(b);
        }
    }
    fs::create_dir_all(&cfg.output.dir)?;
    let path = cfg.output.dir.join("timing.csv");
    fs::write(&path, timing_to_csv(&rows))?;
    let failures = rows.iter().filter(|r| r.status.starts_with("error")).count();
    write_manifest(cfg, &cfg.output.dir, TIMING_SCHEMA, rows.len(), failures, vec!["timing.csv".into()])?;
    Ok((rows, path))
}
