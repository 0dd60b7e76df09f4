use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::CuratedCurriculum;
use crate::gmm::GaussianComponent;

/// How the expert curriculum moves from one mixture to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InMode {
    /// Advance on a fixed episode schedule.
    Time,
    /// Never advance; the union of all mixtures is used at once.
    Pool,
    /// Advance once the mean of the last N rewards reaches the mixture's
    /// threshold. The window is kept across advances, so a student already
    /// above several thresholds moves one mixture per episode.
    Reward,
}

/// Replay state over a curated curriculum.
#[derive(Debug, Clone)]
pub struct InCurriculum {
    curriculum: CuratedCurriculum,
    mode: InMode,
    index: usize,
    update_rate: usize,
    rewards: VecDeque<f64>,
    episodes: u64,
    emancipated: bool,
}

impl InCurriculum {
    pub fn new(curriculum: CuratedCurriculum, mode: InMode, update_rate: usize) -> Self {
        assert!(update_rate > 0, "update rate must be positive");
        let mut s = Self {
            curriculum,
            mode,
            index: 0,
            update_rate,
            rewards: VecDeque::with_capacity(update_rate),
            episodes: 0,
            emancipated: false,
        };
        s.check_emancipation();
        s
    }

    pub fn mode(&self) -> InMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.curriculum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curriculum.is_empty()
    }

    /// Index `i_c` of the active mixture.
    pub fn index(&self) -> usize {
        self.index
    }

    /// Set once the last mixture of a time- or reward-driven curriculum is
    /// active. Pool curricula never emancipate.
    pub fn emancipated(&self) -> bool {
        self.emancipated
    }

    pub fn curriculum(&self) -> &CuratedCurriculum {
        &self.curriculum
    }

    /// Components currently offered to the sampler.
    pub fn active_components(&self) -> Vec<&GaussianComponent> {
        if self.is_empty() {
            return Vec::new();
        }
        match self.mode {
            InMode::Pool => self
                .curriculum
                .gmms
                .iter()
                .flat_map(|g| g.components.iter())
                .collect(),
            InMode::Time | InMode::Reward => {
                self.curriculum.gmms[self.index].components.iter().collect()
            }
        }
    }

    fn check_emancipation(&mut self) {
        if self.mode != InMode::Pool && !self.is_empty() && self.index + 1 == self.len() {
            self.emancipated = true;
        }
    }

    /// Feeds one episodic reward and advances `i_c` when the mode's condition
    /// is met. The index never passes the last mixture.
    pub fn advance(&mut self, reward: f64) {
        if self.is_empty() {
            return;
        }
        let last = self.len() - 1;
        match self.mode {
            InMode::Pool => {}
            InMode::Time => {
                self.episodes += 1;
                if self.episodes.is_multiple_of(self.update_rate as u64) {
                    self.index = (self.index + 1).min(last);
                }
            }
            InMode::Reward => {
                if self.rewards.len() == self.update_rate {
                    self.rewards.pop_front();
                }
                self.rewards.push_back(reward);
                if self.rewards.len() == self.update_rate {
                    let mean = self.rewards.iter().sum::<f64>() / self.rewards.len() as f64;
                    if mean >= self.curriculum.reward_thresholds[self.index] && self.index < last {
                        self.index += 1;
                    }
                }
            }
        }
        self.check_emancipation();
    }
}

/// Applies one step of the curriculum update rule to `state`.
pub fn in_advance(state: &mut InCurriculum, reward: f64) {
    state.advance(reward);
}
