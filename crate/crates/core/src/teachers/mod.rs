//! Curriculum generators sharing one contract: propose a task, then observe
//! the outcome of exactly that task.

mod adr;
mod alpgmm;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::alp::{EpisodeOutcome, TaskBox, TaskParams};

pub use adr::{AdrConfig, AdrTeacher};
pub use alpgmm::{AlpGmmConfig, AlpGmmTeacher};

/// Which branch of a teacher produced the most recent task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DrawSource {
    /// Uniform draw before any mixture exists.
    Bootstrap,
    /// Residual uniform exploration.
    Uniform,
    /// Component `i` of the live ALP-GMM mixture.
    AlpGmm(usize),
    /// Component `i` of the active expert-curriculum mixture.
    Curriculum(usize),
    /// ADR draw pinned to face `i` (dimension `i / 2`, high side when odd).
    AdrBoundary(usize),
    AdrInterior,
}

impl DrawSource {
    pub fn is_uniform(self) -> bool {
        matches!(self, DrawSource::Bootstrap | DrawSource::Uniform)
    }
}

pub trait Teacher {
    /// Proposes the next task; always inside the task box.
    fn sample(&mut self, rng: &mut dyn RngCore) -> TaskParams;

    /// Receives the outcome of the task returned by the previous `sample`.
    fn observe(&mut self, outcome: &EpisodeOutcome);

    fn last_source(&self) -> DrawSource;
}

/// Uniform sampling over a fixed box.
#[derive(Debug, Clone)]
pub struct RandomTeacher {
    bounds: TaskBox,
}

impl RandomTeacher {
    pub fn new(bounds: TaskBox) -> Self {
        Self { bounds }
    }
}

pub fn random_sample(bounds: &TaskBox, rng: &mut dyn RngCore) -> TaskParams {
    bounds.sample_uniform(rng)
}

impl Teacher for RandomTeacher {
    fn sample(&mut self, rng: &mut dyn RngCore) -> TaskParams {
        random_sample(&self.bounds, rng)
    }

    fn observe(&mut self, _outcome: &EpisodeOutcome) {}

    fn last_source(&self) -> DrawSource {
        DrawSource::Uniform
    }
}
