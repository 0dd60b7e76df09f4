//! The learner side of the teacher/student loop.

use rand::RngCore;
use thiserror::Error;

use crate::alp::{EpisodeOutcome, TaskParams};
use crate::meta::{KcVector, StudentMeta};
use crate::teachers::Teacher;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StudentError {
    #[error("task parameters {0:?} lie outside the task box")]
    OutOfBounds(Vec<f64>),
    #[error("student type {index} is not one of the {cells} grid cells")]
    InvalidType { index: usize, cells: usize },
}

/// A black-box learner: it is handed tasks and returns episodic rewards.
pub trait Student {
    fn episode(&mut self, params: &TaskParams) -> Result<f64, StudentError>;

    /// Competence profile used to match students to past trajectories.
    fn knowledge_components(&self) -> KcVector;

    /// End-performance metric reported by the harness.
    fn performance(&self) -> f64;

    fn meta(&self) -> StudentMeta;

    /// Restores the freshly initialized learner of the same type.
    fn reset(&mut self);
}

/// Runs `episodes` sample/episode/observe rounds. `on_episode` sees the
/// 1-based episode counter (relative to this call) and the outcome.
pub fn train<T, S, F>(
    teacher: &mut T,
    student: &mut S,
    episodes: u64,
    rng: &mut dyn RngCore,
    mut on_episode: F,
) -> Result<(), StudentError>
where
    T: Teacher + ?Sized,
    S: Student + ?Sized,
    F: FnMut(u64, &EpisodeOutcome, &T, &S),
{
    for e in 1..=episodes {
        let params = teacher.sample(rng);
        let reward = student.episode(&params)?;
        let outcome = EpisodeOutcome::new(params, reward);
        teacher.observe(&outcome);
        on_episode(e, &outcome, teacher, student);
    }
    Ok(())
}
