//! Experiment orchestration on the toy environment: classroom generation,
//! history persistence, per-condition runners, classroom-size sweeps,
//! statistics and result emission.

mod classroom;
mod history_io;
mod report;
mod runner;
mod stats;
mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meta::KcVector;
use crate::teachers::{AdrConfig, AlpGmmConfig};
use crate::toy_env::ToyEnvConfig;

pub use classroom::{gen_classroom, TypeAssignment};
pub use history_io::{load_history, read_history, save_history, write_history};
pub use report::{
    emit_outputs, final_performances, read_results, render_svg, render_table, write_results,
    write_summary, OutputMode, ResultRow,
};
pub use runner::{evaluation_types, run_condition, run_one, run_two_run, thread_count};
pub use stats::{mean, sem, std_dev, welch_ttest, Welch};
pub use sweep::{classroom_size_sweep, SweepPoint, SweepResult};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("condition {0} needs a trajectory history")]
    MissingHistory(Condition),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown condition `{0}`")]
    UnknownCondition(String),
    #[error("samples are degenerate: {0}")]
    DegenerateSamples(&'static str),
    #[error("malformed input at line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Student(#[from] crate::student::StudentError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Teacher setups compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Random,
    Alpgmm,
    Adr,
    InR,
    InT,
    InP,
    AgainR,
    AgainT,
    AgainP,
    AgainRnd,
    AgainGt,
}

impl Condition {
    pub const ALL: [Condition; 11] = [
        Condition::Random,
        Condition::Alpgmm,
        Condition::Adr,
        Condition::InR,
        Condition::InT,
        Condition::InP,
        Condition::AgainR,
        Condition::AgainT,
        Condition::AgainP,
        Condition::AgainRnd,
        Condition::AgainGt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Random => "random",
            Condition::Alpgmm => "alpgmm",
            Condition::Adr => "adr",
            Condition::InR => "in_r",
            Condition::InT => "in_t",
            Condition::InP => "in_p",
            Condition::AgainR => "again_r",
            Condition::AgainT => "again_t",
            Condition::AgainP => "again_p",
            Condition::AgainRnd => "again_rnd",
            Condition::AgainGt => "again_gt",
        }
    }

    /// Whether the condition replays curricula from a history.
    pub fn needs_history(self) -> bool {
        !matches!(self, Condition::Random | Condition::Alpgmm | Condition::Adr)
    }

    /// Whether the condition starts with an ALP-GMM pre-test.
    pub fn pretests(self) -> bool {
        self.needs_history() && !matches!(self, Condition::AgainRnd | Condition::AgainGt)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Condition::ALL
            .into_iter()
            .find(|c| c.name() == key)
            .ok_or_else(|| HarnessError::UnknownCondition(s.to_string()))
    }
}

/// Which student types a classroom or test set is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeSet {
    /// The four fixed near-corner cells.
    Four,
    /// Every grid cell.
    All,
}

impl TypeSet {
    pub fn types(self, env: &ToyEnvConfig) -> Vec<usize> {
        match self {
            TypeSet::Four => env.four_types(),
            TypeSet::All => env.all_types(),
        }
    }
}

impl FromStr for TypeSet {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "4" | "four" => Ok(TypeSet::Four),
            "400" | "all" => Ok(TypeSet::All),
            other => Err(HarnessError::InvalidConfig(format!(
                "type set `{other}` (expected four or all)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub condition: Condition,
    /// Total episodes per student.
    pub budget: u64,
    /// Episodes of the ALP-GMM pre-test; also when `kc_pre` is read.
    pub pretrain_budget: u64,
    pub seeds: usize,
    pub master_seed: u64,
    pub env: ToyEnvConfig,
    pub types: TypeSet,
    /// ALP-GMM settings; `rho_rnd` is the high exploration rate.
    pub alpgmm: AlpGmmConfig,
    /// Exploration rate of the ALP-GMM inside AGAIN.
    pub rho_low: f64,
    pub delta_lp: f64,
    /// Neighbours for KC-based selection.
    pub knn_k: usize,
    /// Episodes between time-mode curriculum steps and size of the reward
    /// window.
    pub in_update_rate: usize,
    pub adr: AdrConfig,
    pub checkpoint_every: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            condition: Condition::AgainR,
            budget: 200_000,
            pretrain_budget: 20_000,
            seeds: 48,
            master_seed: 0,
            env: ToyEnvConfig::default(),
            types: TypeSet::Four,
            alpgmm: AlpGmmConfig::default(),
            rho_low: 0.02,
            delta_lp: 0.2,
            knn_k: 3,
            in_update_rate: 250,
            adr: AdrConfig::default(),
            checkpoint_every: 2000,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
        if self.pretrain_budget >= self.budget {
            return bad("pretrain_budget must be smaller than budget");
        }
        if self.seeds == 0 {
            return bad("seeds must be at least 1");
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be positive");
        }
        if self.in_update_rate == 0 || self.alpgmm.fitting_rate == 0 {
            return bad("update and fitting rates must be positive");
        }
        if !(0.0..=1.0).contains(&self.rho_low) || !(0.0..=1.0).contains(&self.alpgmm.rho_rnd) {
            return bad("exploration rates must lie in [0, 1]");
        }
        if self.knn_k == 0 {
            return bad("knn_k must be at least 1");
        }
        self.alpgmm
            .fit
            .validate()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))
    }

    pub fn with_condition(&self, condition: Condition) -> Self {
        Self {
            condition,
            ..self.clone()
        }
    }
}

/// Outcome of one student trained under one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub condition: Condition,
    pub student_type: usize,
    /// `(episode, performance)` every `checkpoint_every` episodes.
    pub perf_curve: Vec<(u64, f64)>,
    pub final_perf: f64,
    /// KC readout after `pretrain_budget` episodes.
    pub kc_pre: KcVector,
    /// Sum of the final KC vector.
    pub j_s: f64,
    pub diagnostics: RunDiagnostics,
}

/// Sampling statistics used to check the phase structure of Meta-ACL runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    /// History index the curriculum was taken from.
    pub selected: Option<usize>,
    /// Number of curated mixtures replayed.
    pub curriculum_len: usize,
    /// Share of uniform draws during the pre-test.
    pub pretrain_uniform_fraction: Option<f64>,
    /// Share of post-selection draws within three standard deviations of
    /// some curated Gaussian.
    pub in_support_fraction: Option<f64>,
    /// Episode at which the last curated mixture became active.
    pub emancipation_episode: Option<u64>,
}
