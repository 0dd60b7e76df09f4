//! Meta-learning on top of ALP-GMM: recorded training trajectories, their
//! curation into expert curricula, competence-based prior selection, and the
//! teachers that replay a curriculum (IN) or mix it with a live ALP-GMM
//! (AGAIN).

mod again;
mod curriculum;
mod pretrain;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gmm::WeightedGmm;

pub use again::{AgainTeacher, InTeacher, LIVE_LP_WINDOW};
pub use curriculum::{in_advance, InCurriculum, InMode};
pub use pretrain::{pretrain_and_select, PretrainConfig, Pretrained};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MetaError {
    #[error("trajectory history is empty")]
    EmptyHistory,
    #[error("KC vector of length {found} does not match the history's length {expected}")]
    KcLength { expected: usize, found: usize },
    #[error(transparent)]
    Student(#[from] crate::student::StudentError),
}

/// Per-probe competence profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KcVector(Vec<f64>);

impl KcVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn distance(&self, other: &KcVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Ground-truth description of a student, only used by privileged variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StudentMeta {
    pub student_type: usize,
}

/// One mixture fitted during a past run and the mean episodic reward of the
/// last tasks sampled while it was live.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySnapshot {
    pub gmm: WeightedGmm,
    pub mean_reward: f64,
}

/// A past student's record.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTrajectory {
    pub snapshots: Vec<TrajectorySnapshot>,
    pub kc_pre: KcVector,
    pub kc_post: KcVector,
    /// Post-training score: sum of `kc_post`.
    pub score: f64,
    pub student_meta: StudentMeta,
}

impl TrainingTrajectory {
    pub fn new(
        snapshots: Vec<TrajectorySnapshot>,
        kc_pre: KcVector,
        kc_post: KcVector,
        student_meta: StudentMeta,
    ) -> Self {
        let score = kc_post.sum();
        Self {
            snapshots,
            kc_pre,
            kc_post,
            score,
            student_meta,
        }
    }
}

/// Curated mixtures `C` with their paired reward thresholds `R`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CuratedCurriculum {
    pub gmms: Vec<WeightedGmm>,
    pub reward_thresholds: Vec<f64>,
}

impl CuratedCurriculum {
    pub fn len(&self) -> usize {
        self.gmms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gmms.is_empty()
    }
}

/// Drops every Gaussian whose LP utility is below `delta_lp`, drops mixtures
/// left empty together with their reward threshold, and renormalizes the
/// surviving weights of each mixture.
pub fn curate(raw: &[TrajectorySnapshot], delta_lp: f64) -> CuratedCurriculum {
    let mut out = CuratedCurriculum::default();
    for snap in raw {
        let kept: Vec<_> = snap
            .gmm
            .components
            .iter()
            .filter(|c| c.lp_utility >= delta_lp)
            .cloned()
            .collect();
        if kept.is_empty() {
            continue;
        }
        let total: f64 = kept.iter().map(|c| c.weight).sum();
        let n = kept.len() as f64;
        let components = kept
            .into_iter()
            .map(|mut c| {
                c.weight = if total > 0.0 {
                    c.weight / total
                } else {
                    1.0 / n
                };
                c
            })
            .collect();
        out.gmms.push(WeightedGmm {
            components,
            fit_log_likelihood: snap.gmm.fit_log_likelihood,
            aic: snap.gmm.aic,
        });
        out.reward_thresholds.push(snap.mean_reward);
    }
    out
}

fn check_kc_lengths(history: &[TrainingTrajectory], kc_pre: &KcVector) -> Result<(), MetaError> {
    for t in history {
        if t.kc_pre.len() != kc_pre.len() {
            return Err(MetaError::KcLength {
                expected: t.kc_pre.len(),
                found: kc_pre.len(),
            });
        }
    }
    Ok(())
}

/// Index of the trajectory with the best post-training score among the `k`
/// students whose pre-training KC vectors are closest to `kc_pre`.
///
/// Neighbours are ordered by distance, then history index; score ties go to
/// the lowest history index.
pub fn select_prior(
    history: &[TrainingTrajectory],
    kc_pre: &KcVector,
    k: usize,
) -> Result<usize, MetaError> {
    if history.is_empty() {
        return Err(MetaError::EmptyHistory);
    }
    check_kc_lengths(history, kc_pre)?;
    let mut order: Vec<(f64, usize)> = history
        .iter()
        .enumerate()
        .map(|(i, t)| (t.kc_pre.distance(kc_pre), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let k = k.clamp(1, history.len());
    Ok(best_score(history, order[..k].iter().map(|&(_, i)| i)))
}

fn best_score(history: &[TrainingTrajectory], candidates: impl Iterator<Item = usize>) -> usize {
    let mut best: Option<usize> = None;
    for i in candidates {
        best = match best {
            Some(b) if history[b].score > history[i].score => Some(b),
            Some(b) if history[b].score == history[i].score && b < i => Some(b),
            _ => Some(i),
        };
    }
    best.expect("candidate set is non-empty")
}

/// How a past trajectory is chosen for a new student.
#[derive(Debug, Clone, Copy)]
pub enum Selection<'a> {
    /// k-nearest neighbours in KC space, then best score.
    Kc { kc_pre: &'a KcVector, k: usize },
    /// Uniform over the history.
    Random,
    /// Best score among trajectories of the same student type; falls back to
    /// `Kc` with the given profile when no type matches.
    GroundTruth {
        meta: StudentMeta,
        kc_pre: &'a KcVector,
        k: usize,
    },
}

pub fn variant_select(
    history: &[TrainingTrajectory],
    selection: Selection<'_>,
    rng: &mut dyn RngCore,
) -> Result<usize, MetaError> {
    if history.is_empty() {
        return Err(MetaError::EmptyHistory);
    }
    match selection {
        Selection::Kc { kc_pre, k } => select_prior(history, kc_pre, k),
        Selection::Random => Ok(rng.random_range(0..history.len())),
        Selection::GroundTruth { meta, kc_pre, k } => {
            let mut same = history
                .iter()
                .enumerate()
                .filter(|(_, t)| t.student_meta == meta)
                .map(|(i, _)| i)
                .peekable();
            if same.peek().is_none() {
                return select_prior(history, kc_pre, k);
            }
            Ok(best_score(history, same))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::GaussianComponent;

    fn comp(lp: f64, w: f64) -> GaussianComponent {
        GaussianComponent::new(
            vec![0.5, 0.5, lp],
            vec![
                vec![0.01, 0.0, 0.0],
                vec![0.0, 0.01, 0.0],
                vec![0.0, 0.0, 0.01],
            ],
            w,
        )
    }

    fn snap(lps: &[f64], reward: f64) -> TrajectorySnapshot {
        let n = lps.len() as f64;
        TrajectorySnapshot {
            gmm: WeightedGmm {
                components: lps.iter().map(|&lp| comp(lp, 1.0 / n)).collect(),
                fit_log_likelihood: 0.0,
                aic: 0.0,
            },
            mean_reward: reward,
        }
    }

    fn traj(kc: Vec<f64>, score: f64, ty: usize) -> TrainingTrajectory {
        let mut t = TrainingTrajectory::new(
            vec![],
            KcVector::new(kc.clone()),
            KcVector::new(vec![score]),
            StudentMeta { student_type: ty },
        );
        t.score = score;
        t
    }

    #[test]
    fn curation_keeps_high_lp_and_renormalizes() {
        let c = curate(&[snap(&[0.5, 0.1], 12.0)], 0.2);
        assert_eq!(c.len(), 1);
        assert_eq!(c.gmms[0].components.len(), 1);
        assert_eq!(c.gmms[0].components[0].lp_utility, 0.5);
        assert!((c.gmms[0].components[0].weight - 1.0).abs() < 1e-12);
        assert_eq!(c.reward_thresholds, vec![12.0]);
    }

    #[test]
    fn curation_drops_empty_mixtures_with_thresholds() {
        let c = curate(
            &[
                snap(&[0.05], 1.0),
                snap(&[0.3, 0.25], 2.0),
                snap(&[0.1, 0.0], 3.0),
                snap(&[0.9], 4.0),
            ],
            0.2,
        );
        assert_eq!(c.len(), 2);
        assert_eq!(c.reward_thresholds, vec![2.0, 4.0]);
        assert!(curate(&[snap(&[0.1, 0.19], 1.0)], 0.2).is_empty());
    }

    #[test]
    fn single_trajectory_is_always_selected() {
        let h = vec![traj(vec![100.0, 0.0], 1.0, 0)];
        assert_eq!(
            select_prior(&h, &KcVector::new(vec![0.0, 0.0]), 3).unwrap(),
            0
        );
    }

    #[test]
    fn empty_history_errors() {
        assert_eq!(
            select_prior(&[], &KcVector::new(vec![0.0]), 3).unwrap_err(),
            MetaError::EmptyHistory
        );
    }

    #[test]
    fn mismatched_kc_length_errors() {
        let h = vec![traj(vec![1.0, 2.0], 1.0, 0)];
        assert!(matches!(
            select_prior(&h, &KcVector::new(vec![1.0]), 1),
            Err(MetaError::KcLength { .. })
        ));
    }

    #[test]
    fn best_score_within_neighbourhood() {
        let h = vec![
            traj(vec![0.0, 0.0], 5.0, 0),
            traj(vec![0.1, 0.0], 9.0, 0),
            traj(vec![0.0, 0.2], 9.0, 0),
            traj(vec![10.0, 10.0], 100.0, 1),
        ];
        // the three nearby students; tie on 9.0 resolves to the lower index
        assert_eq!(
            select_prior(&h, &KcVector::new(vec![0.0, 0.0]), 3).unwrap(),
            1
        );
        assert_eq!(
            select_prior(&h, &KcVector::new(vec![0.0, 0.0]), 1).unwrap(),
            0
        );
        assert_eq!(
            select_prior(&h, &KcVector::new(vec![0.0, 0.0]), 10).unwrap(),
            3
        );
    }

    #[test]
    fn ground_truth_filters_by_type() {
        use rand::SeedableRng;
        let h = vec![
            traj(vec![0.0], 50.0, 2),
            traj(vec![0.0], 80.0, 1),
            traj(vec![0.0], 60.0, 2),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let kc = KcVector::new(vec![0.0]);
        let sel = Selection::GroundTruth {
            meta: StudentMeta { student_type: 2 },
            kc_pre: &kc,
            k: 3,
        };
        assert_eq!(variant_select(&h, sel, &mut rng).unwrap(), 2);
        let missing = Selection::GroundTruth {
            meta: StudentMeta { student_type: 9 },
            kc_pre: &kc,
            k: 3,
        };
        assert_eq!(variant_select(&h, missing, &mut rng).unwrap(), 1);
    }
}
