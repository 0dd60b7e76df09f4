use rand::RngCore;

use super::{
    curate, select_prior, AgainTeacher, CuratedCurriculum, InCurriculum, InMode, InTeacher,
    KcVector, MetaError, TrainingTrajectory,
};
use crate::alp::EpisodeOutcome;
use crate::student::{train, Student};
use crate::teachers::{AlpGmmConfig, AlpGmmTeacher};

/// State after the ALP-GMM pre-test phase.
#[derive(Debug, Clone)]
pub struct Pretrained {
    /// The pre-test teacher with its history, window and live mixture.
    pub alpgmm: AlpGmmTeacher,
    pub kc_pre: KcVector,
    /// Selected history index, or why selection failed.
    pub selection: Result<usize, MetaError>,
    /// Curated curriculum of the selected trajectory (empty on failure).
    pub curriculum: CuratedCurriculum,
}

impl Pretrained {
    /// Continues with AGAIN: a new `rho_low` ALP-GMM that keeps the pre-test
    /// ALP history and window but starts without a fitted mixture.
    pub fn into_again(
        self,
        mode: InMode,
        rho_low: f64,
        update_rate: usize,
        seed: u64,
    ) -> AgainTeacher {
        let config = AlpGmmConfig {
            rho_rnd: rho_low,
            ..*self.alpgmm.config()
        };
        let bounds = self.alpgmm.bounds().clone();
        let (history, _) = self.alpgmm.into_parts();
        AgainTeacher::new(
            AlpGmmTeacher::with_history(config, bounds, history, None, seed),
            InCurriculum::new(self.curriculum, mode, update_rate),
        )
    }

    /// Continues with the expert curriculum alone, or returns the pre-test
    /// ALP-GMM untouched when there is nothing to replay.
    pub fn into_in(
        self,
        mode: InMode,
        update_rate: usize,
    ) -> Result<InTeacher, Box<AlpGmmTeacher>> {
        let bounds = self.alpgmm.bounds().clone();
        InTeacher::new(
            InCurriculum::new(self.curriculum, mode, update_rate),
            bounds,
        )
        .ok_or(Box::new(self.alpgmm))
    }
}

/// Settings of the pre-test and prior selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrainConfig {
    /// Episodes trained with ALP-GMM before measuring KC.
    pub budget: u64,
    /// Neighbours considered by `select_prior`.
    pub knn_k: usize,
    pub delta_lp: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            budget: 20_000,
            knn_k: 3,
            delta_lp: 0.2,
        }
    }
}

/// Trains `student` with `alpgmm` for the pre-test budget, reads its KC
/// vector, selects a prior trajectory and curates it.
pub fn pretrain_and_select<S, F>(
    student: &mut S,
    history: &[TrainingTrajectory],
    mut alpgmm: AlpGmmTeacher,
    config: &PretrainConfig,
    rng: &mut dyn RngCore,
    on_episode: F,
) -> Result<Pretrained, MetaError>
where
    S: Student + ?Sized,
    F: FnMut(u64, &EpisodeOutcome, &AlpGmmTeacher, &S),
{
    train(&mut alpgmm, student, config.budget, rng, on_episode)?;
    let kc_pre = student.knowledge_components();
    let selection = select_prior(history, &kc_pre, config.knn_k);
    let curriculum = match &selection {
        Ok(i) => curate(&history[*i].snapshots, config.delta_lp),
        Err(_) => CuratedCurriculum::default(),
    };
    Ok(Pretrained {
        alpgmm,
        kc_pre,
        selection,
        curriculum,
    })
}
