use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::runner::par_map;
use super::{ExperimentConfig, HarnessError};
use crate::alp::TaskBox;
use crate::meta::{KcVector, TrainingTrajectory};
use crate::student::{train, Student};
use crate::teachers::AlpGmmTeacher;
use crate::toy_env::ToyStudent;

/// How classroom students get their type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeAssignment {
    /// Each student draws a type uniformly from the type set.
    Uniform,
    /// Student `i` gets type `i` of the set (cycling if `n` exceeds it).
    OnePerType,
}

/// Trains `n` students with ALP-GMM (the config's high exploration rate)
/// for the full budget and returns their recorded trajectories. Student `i`
/// uses seed `master_seed + i`; its `kc_pre` is read after
/// `pretrain_budget` episodes.
pub fn gen_classroom(
    n: usize,
    assignment: TypeAssignment,
    config: &ExperimentConfig,
) -> Result<Vec<TrainingTrajectory>, HarnessError> {
    config.validate()?;
    let types = config.types.types(&config.env);
    let jobs: Vec<usize> = (0..n).collect();
    par_map(jobs, |i| {
        let seed = config.master_seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let student_type = match assignment {
            TypeAssignment::Uniform => types[rng.random_range(0..types.len())],
            TypeAssignment::OnePerType => types[i % types.len()],
        };
        train_one(config, student_type, &mut rng)
    })
}

fn train_one(
    config: &ExperimentConfig,
    student_type: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TrainingTrajectory, HarnessError> {
    let mut student = ToyStudent::with_config(config.env, student_type)?;
    let mut teacher =
        AlpGmmTeacher::new(config.alpgmm, TaskBox::unit(2), rng.next_u64()).record_trajectory();
    let mut kc_pre: Option<KcVector> = None;
    let pretrain = config.pretrain_budget;
    train(
        &mut teacher,
        &mut student,
        config.budget,
        rng,
        |e, _, _, s| {
            if e == pretrain {
                kc_pre = Some(s.knowledge_components());
            }
        },
    )?;
    let kc_post = student.knowledge_components();
    Ok(TrainingTrajectory::new(
        teacher.take_trajectory(),
        kc_pre.unwrap_or_else(|| kc_post.clone()),
        kc_post,
        student.meta(),
    ))
}
