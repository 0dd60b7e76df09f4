use std::collections::VecDeque;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DrawSource, Teacher};
use crate::alp::{AlpHistory, EpisodeOutcome, RewardRange, TaskBox, TaskParams};
use crate::gmm::{sample_from_mixture, select_model, FitConfig, GaussianComponent, WeightedGmm};
use crate::meta::TrajectorySnapshot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlpGmmConfig {
    /// Episodes between refits; also the window capacity.
    pub fitting_rate: usize,
    pub rho_rnd: f64,
    pub fit: FitConfig,
    pub reward_range: RewardRange,
    /// Episodes averaged into a snapshot's mean reward.
    pub snapshot_reward_window: usize,
}

impl Default for AlpGmmConfig {
    fn default() -> Self {
        Self {
            fitting_rate: 250,
            rho_rnd: 0.1,
            fit: FitConfig::default(),
            reward_range: RewardRange::TOY,
            snapshot_reward_window: 50,
        }
    }
}

#[derive(Debug, Clone)]
struct SnapshotRecorder {
    snapshots: Vec<TrajectorySnapshot>,
    recent: VecDeque<f64>,
    capacity: usize,
}

impl SnapshotRecorder {
    fn close(&mut self, gmm: &WeightedGmm) {
        if self.recent.is_empty() {
            return;
        }
        let mean = self.recent.iter().sum::<f64>() / self.recent.len() as f64;
        self.snapshots.push(TrajectorySnapshot {
            gmm: gmm.clone(),
            mean_reward: mean,
        });
        self.recent.clear();
    }
}

/// Absolute-learning-progress GMM teacher: uniform bootstrap for the first
/// `fitting_rate` episodes, then a refit on the ALP window every
/// `fitting_rate` observations.
#[derive(Debug, Clone)]
pub struct AlpGmmTeacher {
    config: AlpGmmConfig,
    bounds: TaskBox,
    history: AlpHistory,
    current_gmm: Option<WeightedGmm>,
    episodes_seen: u64,
    refits: usize,
    fit_rng: ChaCha8Rng,
    last_source: DrawSource,
    recorder: Option<SnapshotRecorder>,
}

impl AlpGmmTeacher {
    pub fn new(config: AlpGmmConfig, bounds: TaskBox, seed: u64) -> Self {
        let history = AlpHistory::new(bounds.dim(), config.fitting_rate, config.reward_range);
        Self::with_history(config, bounds, history, None, seed)
    }

    /// Builds a teacher around an existing history (and optionally the mixture
    /// already fitted on its window), continuing the refit cadence.
    pub fn with_history(
        config: AlpGmmConfig,
        bounds: TaskBox,
        history: AlpHistory,
        current_gmm: Option<WeightedGmm>,
        seed: u64,
    ) -> Self {
        assert!(config.fitting_rate > 0, "fitting rate must be positive");
        Self {
            episodes_seen: history.len() as u64,
            config,
            bounds,
            history,
            current_gmm,
            refits: 0,
            fit_rng: ChaCha8Rng::seed_from_u64(seed),
            last_source: DrawSource::Bootstrap,
            recorder: None,
        }
    }

    /// Starts collecting one snapshot per fitted mixture.
    pub fn record_trajectory(mut self) -> Self {
        self.recorder = Some(SnapshotRecorder {
            snapshots: Vec::new(),
            recent: VecDeque::with_capacity(self.config.snapshot_reward_window),
            capacity: self.config.snapshot_reward_window,
        });
        self
    }

    /// Closes the live mixture's snapshot and returns everything recorded.
    pub fn take_trajectory(&mut self) -> Vec<TrajectorySnapshot> {
        match (&mut self.recorder, &self.current_gmm) {
            (Some(rec), Some(gmm)) => {
                rec.close(gmm);
                std::mem::take(&mut rec.snapshots)
            }
            (Some(rec), None) => std::mem::take(&mut rec.snapshots),
            (None, _) => Vec::new(),
        }
    }

    pub fn config(&self) -> &AlpGmmConfig {
        &self.config
    }

    pub fn bounds(&self) -> &TaskBox {
        &self.bounds
    }

    pub fn rho_rnd(&self) -> f64 {
        self.config.rho_rnd
    }

    pub fn history(&self) -> &AlpHistory {
        &self.history
    }

    pub fn current_gmm(&self) -> Option<&WeightedGmm> {
        self.current_gmm.as_ref()
    }

    pub fn episodes_seen(&self) -> u64 {
        self.episodes_seen
    }

    pub fn refit_count(&self) -> usize {
        self.refits
    }

    pub fn in_bootstrap(&self) -> bool {
        self.current_gmm.is_none()
    }

    /// Live mixture components paired with their mean-ALP utility.
    pub fn arms(&self) -> Vec<(&GaussianComponent, f64)> {
        self.current_gmm
            .as_ref()
            .map(WeightedGmm::utility_arms)
            .unwrap_or_default()
    }

    /// Splits the teacher into its history and live mixture.
    pub fn into_parts(self) -> (AlpHistory, Option<WeightedGmm>) {
        (self.history, self.current_gmm)
    }

    /// Records the outcome, refits when due and returns the outcome's ALP.
    pub fn record_outcome(&mut self, outcome: &EpisodeOutcome) -> f64 {
        let alp = self.history.record(outcome);
        self.episodes_seen += 1;
        if let (Some(rec), Some(_)) = (&mut self.recorder, &self.current_gmm) {
            if rec.recent.len() == rec.capacity {
                rec.recent.pop_front();
            }
            rec.recent.push_back(outcome.reward);
        }
        if self
            .episodes_seen
            .is_multiple_of(self.config.fitting_rate as u64)
        {
            self.refit();
        }
        alp
    }

    fn refit(&mut self) {
        let points = self.history.window_points();
        match select_model(&points, &self.config.fit, &mut self.fit_rng) {
            Ok(gmm) => {
                if let (Some(rec), Some(old)) = (&mut self.recorder, &self.current_gmm) {
                    rec.close(old);
                }
                self.current_gmm = Some(gmm);
                self.refits += 1;
            }
            Err(err) => log::warn!("ALP-GMM refit skipped: {err}"),
        }
    }
}

impl Teacher for AlpGmmTeacher {
    fn sample(&mut self, rng: &mut dyn RngCore) -> TaskParams {
        let Some(gmm) = &self.current_gmm else {
            self.last_source = DrawSource::Bootstrap;
            return self.bounds.sample_uniform(rng);
        };
        if rng.random::<f64>() < self.config.rho_rnd {
            self.last_source = DrawSource::Uniform;
            return self.bounds.sample_uniform(rng);
        }
        let (params, i) = sample_from_mixture(&gmm.utility_arms(), &self.bounds, rng)
            .expect("fitted mixtures have at least one component");
        self.last_source = DrawSource::AlpGmm(i);
        params
    }

    fn observe(&mut self, outcome: &EpisodeOutcome) {
        self.record_outcome(outcome);
    }

    fn last_source(&self) -> DrawSource {
        self.last_source
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refit_cadence_and_bootstrap() {
        let mut t = AlpGmmTeacher::new(AlpGmmConfig::default(), TaskBox::unit(2), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for e in 1..=251u64 {
            let p = t.sample(&mut rng);
            if e <= 250 {
                assert_eq!(t.last_source(), DrawSource::Bootstrap);
            }
            let r = if p.coords()[0] < 0.5 { 10.0 } else { 0.0 };
            t.observe(&EpisodeOutcome::new(p, r));
            if e == 249 {
                assert_eq!(t.refit_count(), 0);
            }
            if e == 250 || e == 251 {
                assert_eq!(t.refit_count(), 1);
            }
        }
        assert!(!t.in_bootstrap());
    }
}
