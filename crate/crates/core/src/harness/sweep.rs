use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::runner::{evaluation_types, par_map, run_one};
use super::stats::{mean, sem, std_dev};
use super::{Condition, ExperimentConfig, HarnessError, RunRecord};
use crate::meta::TrainingTrajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub fraction: f64,
    pub condition: Condition,
    /// Trajectories kept from the history.
    pub history_len: usize,
    pub mean: f64,
    pub std: f64,
    pub sem: f64,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Every run, tagged with its fraction.
    pub records: Vec<(f64, RunRecord)>,
}

/// Sorted indices of the `⌈f·|H|⌉` trajectories kept for fraction `f`.
pub(crate) fn subsample(len: usize, fraction: f64, master_seed: u64) -> Vec<usize> {
    let m = ((fraction * len as f64).ceil() as usize).min(len);
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ fraction.to_bits());
    rng.set_stream(2);
    let mut idx = rand::seq::index::sample(&mut rng, len, m).into_vec();
    idx.sort_unstable();
    idx
}

/// Evaluates `conditions` on the fixed test set of `config` with
/// increasingly large random subsets of `history`.
pub fn classroom_size_sweep(
    history: &[TrainingTrajectory],
    fractions: &[f64],
    conditions: &[Condition],
    config: &ExperimentConfig,
) -> Result<SweepResult, HarnessError> {
    config.validate()?;
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(HarnessError::InvalidConfig(format!(
            "fraction {f} outside (0, 1]"
        )));
    }
    let types = evaluation_types(config);
    let mut points = Vec::new();
    let mut records = Vec::new();
    for &f in fractions {
        let idx = subsample(history.len(), f, config.master_seed);
        if idx.is_empty() {
            log::warn!("fraction {f} keeps no trajectory; skipped");
            continue;
        }
        // One subset alive at a time keeps memory bounded on large histories.
        let sub: Vec<TrainingTrajectory> = idx.iter().map(|&i| history[i].clone()).collect();
        let mut jobs = Vec::new();
        for &c in conditions {
            for (i, &ty) in types.iter().enumerate() {
                jobs.push((c, config.master_seed.wrapping_add(i as u64), ty));
            }
        }
        let runs = par_map(jobs, |(c, seed, ty)| {
            run_one(&config.with_condition(c), Some(&sub), seed, ty)
        })?;
        for &c in conditions {
            let finals: Vec<f64> = runs
                .iter()
                .filter(|r| r.condition == c)
                .map(|r| r.final_perf)
                .collect();
            points.push(SweepPoint {
                fraction: f,
                condition: c,
                history_len: sub.len(),
                mean: mean(&finals),
                std: std_dev(&finals),
                sem: sem(&finals),
                n: finals.len(),
            });
        }
        records.extend(runs.into_iter().map(|r| (f, r)));
    }
    Ok(SweepResult { points, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsample_sizes_and_order() {
        assert_eq!(subsample(400, 0.025, 7).len(), 10);
        assert_eq!(subsample(400, 0.1, 7).len(), 40);
        assert_eq!(subsample(3, 0.5, 7).len(), 2);
        assert_eq!(subsample(128, 1.0, 7), (0..128).collect::<Vec<_>>());
        let s = subsample(400, 0.25, 1);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s, subsample(400, 0.25, 1));
    }

    #[test]
    fn fractions_outside_unit_interval_error() {
        let cfg = ExperimentConfig::default();
        assert!(classroom_size_sweep(&[], &[0.0], &[Condition::AgainR], &cfg).is_err());
        assert!(classroom_size_sweep(&[], &[1.5], &[Condition::AgainR], &cfg).is_err());
    }
}
