use std::collections::VecDeque;

use rand::{Rng, RngCore};

use super::{InCurriculum, InMode};
use crate::alp::{EpisodeOutcome, TaskBox, TaskParams};
use crate::gmm::sample_from_mixture;
use crate::teachers::{AlpGmmTeacher, DrawSource, Teacher};

/// Number of recent ALP values averaged into a live LP estimate.
pub const LIVE_LP_WINDOW: usize = 50;

/// Expert curriculum mixed with a low-exploration ALP-GMM.
///
/// While the curriculum is non-empty, each draw is uniform with probability
/// `rho_rnd` of the inner ALP-GMM; otherwise one arm is picked from the
/// union of the active expert components and the live ALP-GMM components,
/// proportionally to LP. Once the curriculum reaches its last mixture the
/// expert arms use LP measured on this student instead of the stored values.
#[derive(Debug, Clone)]
pub struct AgainTeacher {
    alpgmm: AlpGmmTeacher,
    curriculum: InCurriculum,
    live_lp: Vec<VecDeque<f64>>,
    last_source: DrawSource,
}

impl AgainTeacher {
    pub fn new(alpgmm: AlpGmmTeacher, curriculum: InCurriculum) -> Self {
        let mut s = Self {
            alpgmm,
            curriculum,
            live_lp: Vec::new(),
            last_source: DrawSource::Bootstrap,
        };
        s.reset_live_lp();
        s
    }

    pub fn alpgmm(&self) -> &AlpGmmTeacher {
        &self.alpgmm
    }

    pub fn curriculum(&self) -> &InCurriculum {
        &self.curriculum
    }

    fn reset_live_lp(&mut self) {
        self.live_lp = if self.curriculum.emancipated() {
            vec![VecDeque::with_capacity(LIVE_LP_WINDOW); self.curriculum.active_components().len()]
        } else {
            Vec::new()
        };
    }

    /// LP utility of active expert arm `i`.
    pub fn expert_utility(&self, i: usize) -> f64 {
        self.utility_of(i, self.curriculum.active_components()[i].lp_utility)
    }

    fn utility_of(&self, i: usize, stored: f64) -> f64 {
        match self.live_lp.get(i) {
            Some(w) if !w.is_empty() => w.iter().sum::<f64>() / w.len() as f64,
            _ => stored,
        }
    }

    fn bounds(&self) -> &TaskBox {
        self.alpgmm.bounds()
    }
}

impl Teacher for AgainTeacher {
    fn sample(&mut self, rng: &mut dyn RngCore) -> TaskParams {
        if self.curriculum.is_empty() {
            let p = self.alpgmm.sample(rng);
            self.last_source = self.alpgmm.last_source();
            return p;
        }
        if rng.random::<f64>() < self.alpgmm.rho_rnd() {
            self.last_source = DrawSource::Uniform;
            return self.bounds().sample_uniform(rng);
        }
        let experts = self.curriculum.active_components();
        let n_expert = experts.len();
        let mut arms: Vec<_> = experts
            .into_iter()
            .enumerate()
            .map(|(i, c)| (c, self.utility_of(i, c.lp_utility)))
            .collect();
        arms.extend(self.alpgmm.arms());
        let (params, i) = sample_from_mixture(&arms, self.bounds(), rng)
            .expect("curated mixtures are non-empty with valid utilities");
        self.last_source = if i < n_expert {
            DrawSource::Curriculum(i)
        } else {
            DrawSource::AlpGmm(i - n_expert)
        };
        params
    }

    fn observe(&mut self, outcome: &EpisodeOutcome) {
        let alp = self.alpgmm.record_outcome(outcome);
        if self.curriculum.is_empty() {
            return;
        }
        if let DrawSource::Curriculum(i) = self.last_source {
            if let Some(w) = self.live_lp.get_mut(i) {
                if w.len() == LIVE_LP_WINDOW {
                    w.pop_front();
                }
                w.push_back(alp);
            }
        }
        let was = self.curriculum.emancipated();
        // Reward-driven progress only looks at tasks drawn from the expert
        // mixture; the time schedule counts every episode.
        let from_expert = matches!(self.last_source, DrawSource::Curriculum(_));
        if from_expert || self.curriculum.mode() != InMode::Reward {
            self.curriculum.advance(outcome.reward);
        }
        if !was && self.curriculum.emancipated() {
            self.reset_live_lp();
        }
    }

    fn last_source(&self) -> DrawSource {
        self.last_source
    }
}

/// Expert curriculum alone: every draw comes from the active curated
/// components, weighted by their stored LP.
#[derive(Debug, Clone)]
pub struct InTeacher {
    curriculum: InCurriculum,
    bounds: TaskBox,
    last_source: DrawSource,
}

impl InTeacher {
    /// `None` when the curriculum is empty.
    pub fn new(curriculum: InCurriculum, bounds: TaskBox) -> Option<Self> {
        if curriculum.is_empty() {
            return None;
        }
        Some(Self {
            curriculum,
            bounds,
            last_source: DrawSource::Curriculum(0),
        })
    }

    pub fn curriculum(&self) -> &InCurriculum {
        &self.curriculum
    }
}

impl Teacher for InTeacher {
    fn sample(&mut self, rng: &mut dyn RngCore) -> TaskParams {
        let arms: Vec<_> = self
            .curriculum
            .active_components()
            .into_iter()
            .map(|c| (c, c.lp_utility))
            .collect();
        let (params, i) = sample_from_mixture(&arms, &self.bounds, rng)
            .expect("curated mixtures are non-empty with valid utilities");
        self.last_source = DrawSource::Curriculum(i);
        params
    }

    fn observe(&mut self, outcome: &EpisodeOutcome) {
        self.curriculum.advance(outcome.reward);
    }

    fn last_source(&self) -> DrawSource {
        self.last_source
    }
}
