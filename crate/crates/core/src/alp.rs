//! Task parameters, the parameter-reward history and absolute learning
//! progress (ALP) computed against the nearest previously seen task.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kdtree::KdTree;

#[derive(Debug, Error, PartialEq)]
pub enum TaskError {
    #[error("coordinate {index} = {value} lies outside [{low}, {high}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        low: f64,
        high: f64,
    },
    #[error("expected {expected} coordinates, got {found}")]
    Dimension { expected: usize, found: usize },
}

/// A point of the unit task box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskParams(Vec<f64>);

impl TaskParams {
    pub fn new(coords: Vec<f64>) -> Result<Self, TaskError> {
        for (index, &value) in coords.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(TaskError::OutOfBounds {
                    index,
                    value,
                    low: 0.0,
                    high: 1.0,
                });
            }
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Axis-aligned sampling box, always inside the unit box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskBox {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl TaskBox {
    pub fn unit(dim: usize) -> Self {
        Self {
            low: vec![0.0; dim],
            high: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.low.iter().zip(&self.high))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    /// Clips `coords` into the box. Non-finite values land on the low bound.
    pub fn clip(&self, coords: Vec<f64>) -> TaskParams {
        let clipped = coords
            .into_iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(v, (&lo, &hi))| if v.is_nan() { lo } else { v.clamp(lo, hi) })
            .collect();
        TaskParams(clipped)
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> TaskParams {
        let coords = self
            .low
            .iter()
            .zip(&self.high)
            .map(|(&lo, &hi)| (lo + (hi - lo) * rng.random::<f64>()).min(hi))
            .collect();
        TaskParams(coords)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub params: TaskParams,
    pub reward: f64,
}

impl EpisodeOutcome {
    pub fn new(params: TaskParams, reward: f64) -> Self {
        debug_assert!(reward.is_finite(), "episodic reward must be finite");
        Self { params, reward }
    }
}

/// Reward span used to normalize ALP into [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardRange {
    pub low: f64,
    pub high: f64,
}

impl RewardRange {
    pub const TOY: RewardRange = RewardRange {
        low: 0.0,
        high: 100.0,
    };

    pub fn span(&self) -> f64 {
        self.high - self.low
    }
}

/// Parameter-reward history `H` plus the FIFO window `W` of recent
/// (parameters, ALP) pairs that the GMM is fitted on.
#[derive(Debug, Clone)]
pub struct AlpHistory {
    rewards: Vec<f64>,
    params: Vec<TaskParams>,
    index: KdTree,
    window: VecDeque<(TaskParams, f64)>,
    capacity: usize,
    reward_range: RewardRange,
}

impl AlpHistory {
    pub fn new(task_dim: usize, capacity: usize, reward_range: RewardRange) -> Self {
        assert!(capacity > 0, "window capacity must be positive");
        assert!(reward_range.span() > 0.0, "reward range must be non-empty");
        Self {
            rewards: Vec::new(),
            params: Vec::new(),
            index: KdTree::new(task_dim),
            window: VecDeque::with_capacity(capacity),
            capacity,
            reward_range,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn reward_range(&self) -> RewardRange {
        self.reward_range
    }

    /// `i`-th recorded outcome in insertion order.
    pub fn entry(&self, i: usize) -> (&TaskParams, f64) {
        (&self.params[i], self.rewards[i])
    }

    pub fn window(&self) -> impl ExactSizeIterator<Item = &(TaskParams, f64)> + '_ {
        self.window.iter()
    }

    /// Window contents as concatenated `[params…, alp]` points.
    pub fn window_points(&self) -> Vec<Vec<f64>> {
        self.window
            .iter()
            .map(|(p, alp)| {
                let mut v = Vec::with_capacity(p.dim() + 1);
                v.extend_from_slice(p.coords());
                v.push(*alp);
                v
            })
            .collect()
    }

    /// Index of the nearest recorded entry (most recent on ties).
    pub fn nearest(&self, params: &TaskParams) -> Option<usize> {
        self.index.nearest(params.coords()).map(|(i, _)| i)
    }

    /// Normalized `|r_new − r_old|` against the nearest recorded task, or 0
    /// when nothing has been recorded yet.
    pub fn compute_alp(&self, outcome: &EpisodeOutcome) -> f64 {
        match self.nearest(&outcome.params) {
            None => 0.0,
            Some(i) => {
                let raw = (outcome.reward - self.rewards[i]).abs();
                (raw / self.reward_range.span()).clamp(0.0, 1.0)
            }
        }
    }

    /// Computes the outcome's ALP against the history, then stores it in
    /// `H` and `W`. Returns the ALP.
    pub fn record(&mut self, outcome: &EpisodeOutcome) -> f64 {
        let alp = self.compute_alp(outcome);
        self.index.insert(outcome.params.coords());
        self.params.push(outcome.params.clone());
        self.rewards.push(outcome.reward);
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back((outcome.params.clone(), alp));
        alp
    }
}
