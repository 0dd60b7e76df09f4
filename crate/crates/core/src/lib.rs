//! Meta automatic curriculum learning: ALP-GMM teachers, expert-curriculum
//! replay across a classroom of students, and a toy cell-unlocking learner
//! with an experiment harness.

pub mod alp;
pub mod gmm;
pub mod harness;
mod kdtree;
pub mod meta;
pub mod student;
pub mod teachers;
pub mod toy_env;

pub use alp::{AlpHistory, EpisodeOutcome, RewardRange, TaskBox, TaskError, TaskParams};
pub use gmm::{GaussianComponent, GmmError, WeightedGmm};
pub use meta::{KcVector, StudentMeta, TrainingTrajectory};
pub use student::{Student, StudentError};
pub use teachers::{DrawSource, Teacher};
pub use toy_env::{ToyEnvConfig, ToyStudent};
