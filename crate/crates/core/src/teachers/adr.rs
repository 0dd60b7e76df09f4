use std::collections::VecDeque;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{DrawSource, Teacher};
use crate::alp::{EpisodeOutcome, TaskBox, TaskParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdrConfig {
    /// Probability of a boundary draw.
    pub rho_b: f64,
    /// Mean boundary reward that triggers an expansion.
    pub r_thr: f64,
    pub delta_step: f64,
    /// Boundary queue capacity.
    pub q: usize,
}

impl Default for AdrConfig {
    /// Toy-environment settings.
    fn default() -> Self {
        Self {
            rho_b: 0.5,
            r_thr: 1.0,
            delta_step: 0.05,
            q: 10,
        }
    }
}

/// Adaptive domain randomization: a sampling box grown outward from an easy
/// seed task, one face at a time.
#[derive(Debug, Clone)]
pub struct AdrTeacher {
    config: AdrConfig,
    task_box: TaskBox,
    sampling: TaskBox,
    queues: Vec<VecDeque<f64>>,
    pending_face: Option<usize>,
    last_source: DrawSource,
}

impl AdrTeacher {
    pub fn new(config: AdrConfig, p_easy: &TaskParams, task_box: TaskBox) -> Self {
        assert!(config.q > 0, "queue capacity must be positive");
        assert!(
            task_box.contains(p_easy.coords()),
            "p_easy must lie in the task box"
        );
        let d = task_box.dim();
        Self {
            config,
            sampling: TaskBox {
                low: p_easy.coords().to_vec(),
                high: p_easy.coords().to_vec(),
            },
            task_box,
            queues: vec![VecDeque::with_capacity(config.q); 2 * d],
            pending_face: None,
            last_source: DrawSource::AdrInterior,
        }
    }

    /// Current sampling box `[low, high]`.
    pub fn sampling_box(&self) -> &TaskBox {
        &self.sampling
    }

    pub fn queue_len(&self, face: usize) -> usize {
        self.queues[face].len()
    }

    fn expand(&mut self, face: usize) {
        let dim = face / 2;
        if face.is_multiple_of(2) {
            let v = self.sampling.low[dim] - self.config.delta_step;
            self.sampling.low[dim] = v.max(self.task_box.low[dim]);
        } else {
            let v = self.sampling.high[dim] + self.config.delta_step;
            self.sampling.high[dim] = v.min(self.task_box.high[dim]);
        }
    }
}

impl Teacher for AdrTeacher {
    fn sample(&mut self, rng: &mut dyn RngCore) -> TaskParams {
        let mut coords = self.sampling.sample_uniform(rng).into_inner();
        if rng.random::<f64>() < self.config.rho_b {
            let face = rng.random_range(0..self.queues.len());
            let dim = face / 2;
            coords[dim] = if face % 2 == 0 {
                self.sampling.low[dim]
            } else {
                self.sampling.high[dim]
            };
            self.pending_face = Some(face);
            self.last_source = DrawSource::AdrBoundary(face);
        } else {
            self.pending_face = None;
            self.last_source = DrawSource::AdrInterior;
        }
        self.task_box.clip(coords)
    }

    fn observe(&mut self, outcome: &EpisodeOutcome) {
        let Some(face) = self.pending_face.take() else {
            return;
        };
        let queue = &mut self.queues[face];
        if queue.len() == self.config.q {
            queue.pop_front();
        }
        queue.push_back(outcome.reward);
        if queue.len() == self.config.q {
            let mean = queue.iter().sum::<f64>() / queue.len() as f64;
            if mean >= self.config.r_thr {
                queue.clear();
                self.expand(face);
            }
        }
    }

    fn last_source(&self) -> DrawSource {
        self.last_source
    }
}
