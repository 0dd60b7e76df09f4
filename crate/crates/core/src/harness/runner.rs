use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Condition, ExperimentConfig, HarnessError, RunDiagnostics, RunRecord};
use crate::alp::{TaskBox, TaskParams};
use crate::gmm::linalg::Cholesky;
use crate::meta::{
    curate, pretrain_and_select, variant_select, AgainTeacher, CuratedCurriculum, InCurriculum,
    InMode, KcVector, PretrainConfig, Selection, TrainingTrajectory,
};
use crate::student::{train, Student};
use crate::teachers::{AdrTeacher, AlpGmmConfig, AlpGmmTeacher, RandomTeacher, Teacher};
use crate::toy_env::ToyStudent;

/// Squared Mahalanobis radius of a curated Gaussian's support.
const SUPPORT_RADIUS_SQ: f64 = 9.0;

/// Worker count: `METAACL_THREADS` when set to a positive integer, otherwise
/// the available parallelism.
pub fn thread_count() -> usize {
    std::env::var("METAACL_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Maps `f` over `items` on the harness worker pool, keeping input order.
pub(crate) fn par_map<T, R, F>(items: Vec<T>, f: F) -> Result<Vec<R>, HarnessError>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R, HarnessError> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| HarnessError::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| items.into_par_iter().map(f).collect())
}

/// Student types of the fixed evaluation set: drawn uniformly with
/// replacement from the configured type set, from `master_seed` alone.
pub fn evaluation_types(config: &ExperimentConfig) -> Vec<usize> {
    let types = config.types.types(&config.env);
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    rng.set_stream(1);
    (0..config.seeds)
        .map(|_| types[rng.random_range(0..types.len())])
        .collect()
}

/// Runs `config.condition` on every evaluation student. Run `i` uses seed
/// `master_seed + i`.
pub fn run_condition(
    config: &ExperimentConfig,
    history: Option<&[TrainingTrajectory]>,
) -> Result<Vec<RunRecord>, HarnessError> {
    config.validate()?;
    if config.condition.needs_history() && history.is_none() {
        return Err(HarnessError::MissingHistory(config.condition));
    }
    let jobs: Vec<(u64, usize)> = evaluation_types(config)
        .into_iter()
        .enumerate()
        .map(|(i, ty)| (config.master_seed.wrapping_add(i as u64), ty))
        .collect();
    par_map(jobs, |(seed, ty)| run_one(config, history, seed, ty))
}

/// Mean and task-marginal factor of every curated Gaussian, grouped by
/// mixture.
struct Support {
    gmms: Vec<Vec<(Vec<f64>, Cholesky)>>,
}

impl Support {
    fn new(curriculum: &CuratedCurriculum) -> Option<Self> {
        let gmms: Vec<Vec<_>> = curriculum
            .gmms
            .iter()
            .map(|g| {
                g.components
                    .iter()
                    .filter_map(|c| {
                        let chol = c.task_marginal_cholesky()?;
                        Some((c.mean[..c.task_dim()].to_vec(), chol))
                    })
                    .collect()
            })
            .collect();
        gmms.iter().any(|g| !g.is_empty()).then_some(Self { gmms })
    }

    /// Whether `x` lies within the support of mixture `active`, or of any
    /// mixture when `active` is `None`.
    fn contains(&self, x: &[f64], active: Option<usize>) -> bool {
        let mut diff = vec![0.0; x.len()];
        let mut scratch = vec![0.0; x.len()];
        let mut inside = |(mean, chol): &(Vec<f64>, Cholesky)| {
            for (d, (a, m)) in diff.iter_mut().zip(x.iter().zip(mean)) {
                *d = a - m;
            }
            chol.mahalanobis_sq(&diff, &mut scratch) <= SUPPORT_RADIUS_SQ
        };
        match active {
            Some(i) => self.gmms[i].iter().any(&mut inside),
            None => self.gmms.iter().flatten().any(&mut inside),
        }
    }
}

struct Tracker {
    every: u64,
    pretrain_budget: u64,
    curve: Vec<(u64, f64)>,
    kc_pre: Option<KcVector>,
    pretest: bool,
    uniform_pre: u64,
    support: Option<Support>,
    /// Curriculum mixture in effect for the next draw; `None` for a pool.
    active: Option<usize>,
    post_draws: u64,
    in_support: u64,
    emancipation: Option<u64>,
}

impl Tracker {
    fn new(config: &ExperimentConfig) -> Self {
        Self {
            every: config.checkpoint_every,
            pretrain_budget: config.pretrain_budget,
            curve: Vec::with_capacity((config.budget / config.checkpoint_every) as usize + 1),
            kc_pre: None,
            pretest: false,
            uniform_pre: 0,
            support: None,
            active: None,
            post_draws: 0,
            in_support: 0,
            emancipation: None,
        }
    }

    fn step<S: Student + ?Sized>(
        &mut self,
        episode: u64,
        uniform: bool,
        params: &TaskParams,
        student: &S,
    ) {
        if self.pretest && episode <= self.pretrain_budget && uniform {
            self.uniform_pre += 1;
        }
        if let Some(support) = &self.support {
            self.post_draws += 1;
            if support.contains(params.coords(), self.active) {
                self.in_support += 1;
            }
        }
        if episode == self.pretrain_budget {
            self.kc_pre = Some(student.knowledge_components());
        }
        if episode.is_multiple_of(self.every) {
            self.curve.push((episode, student.performance()));
        }
    }

    /// Records the curriculum state reached after `episode`.
    fn follow(&mut self, curriculum: &InCurriculum, episode: u64) {
        self.active = (curriculum.mode() != InMode::Pool).then(|| curriculum.index());
        if self.emancipation.is_none() && curriculum.emancipated() {
            self.emancipation = Some(episode);
        }
    }
}

fn phase<T: Teacher + ?Sized>(
    teacher: &mut T,
    student: &mut ToyStudent,
    start: u64,
    episodes: u64,
    rng: &mut dyn RngCore,
    tracker: &mut Tracker,
    mut after: impl FnMut(&T, u64, &mut Tracker),
) -> Result<(), HarnessError> {
    train(teacher, student, episodes, rng, |e, outcome, t, s| {
        let episode = start + e;
        tracker.step(episode, t.last_source().is_uniform(), &outcome.params, s);
        after(t, episode, tracker);
    })?;
    Ok(())
}

fn no_hook<T: ?Sized>(_: &T, _: u64, _: &mut Tracker) {}

fn mode_of(condition: Condition) -> InMode {
    match condition {
        Condition::InT | Condition::AgainT => InMode::Time,
        Condition::InP | Condition::AgainP => InMode::Pool,
        _ => InMode::Reward,
    }
}

fn run_again(
    mut teacher: AgainTeacher,
    student: &mut ToyStudent,
    start: u64,
    episodes: u64,
    rng: &mut dyn RngCore,
    tracker: &mut Tracker,
) -> Result<(), HarnessError> {
    tracker.follow(teacher.curriculum(), start);
    phase(
        &mut teacher,
        student,
        start,
        episodes,
        rng,
        tracker,
        |t, ep, tr| tr.follow(t.curriculum(), ep),
    )
}

/// Trains one student of type `student_type` under `config.condition`.
pub fn run_one(
    config: &ExperimentConfig,
    history: Option<&[TrainingTrajectory]>,
    seed: u64,
    student_type: usize,
) -> Result<RunRecord, HarnessError> {
    let condition = config.condition;
    if condition.needs_history() && history.is_none() {
        return Err(HarnessError::MissingHistory(condition));
    }
    let history = history.unwrap_or(&[]);
    let mut student = ToyStudent::with_config(config.env, student_type)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fit_seed = rng.next_u64();
    let again_fit_seed = rng.next_u64();
    let mut select_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
    let bounds = TaskBox::unit(2);
    let high = config.alpgmm;
    let low = AlpGmmConfig {
        rho_rnd: config.rho_low,
        ..config.alpgmm
    };
    let mut tracker = Tracker::new(config);
    let mut diag = RunDiagnostics::default();
    let budget = config.budget;
    match condition {
        Condition::Random => {
            let mut t = RandomTeacher::new(bounds);
            phase(
                &mut t,
                &mut student,
                0,
                budget,
                &mut rng,
                &mut tracker,
                no_hook,
            )?;
        }
        Condition::Alpgmm => {
            let mut t = AlpGmmTeacher::new(high, bounds, fit_seed);
            phase(
                &mut t,
                &mut student,
                0,
                budget,
                &mut rng,
                &mut tracker,
                no_hook,
            )?;
        }
        Condition::Adr => {
            let types = config.types.types(&config.env);
            let easy = config
                .env
                .cell_center(types[rng.random_range(0..types.len())]);
            let mut t = AdrTeacher::new(config.adr, &easy, bounds);
            phase(
                &mut t,
                &mut student,
                0,
                budget,
                &mut rng,
                &mut tracker,
                no_hook,
            )?;
        }
        Condition::AgainRnd | Condition::AgainGt => {
            let fresh_kc = student.knowledge_components();
            let selection = if condition == Condition::AgainRnd {
                Selection::Random
            } else {
                Selection::GroundTruth {
                    meta: student.meta(),
                    kc_pre: &fresh_kc,
                    k: config.knn_k,
                }
            };
            let curriculum = match variant_select(history, selection, &mut select_rng) {
                Ok(i) => {
                    diag.selected = Some(i);
                    curate(&history[i].snapshots, config.delta_lp)
                }
                Err(_) => CuratedCurriculum::default(),
            };
            diag.curriculum_len = curriculum.len();
            tracker.support = Support::new(&curriculum);
            let teacher = AgainTeacher::new(
                AlpGmmTeacher::new(low, bounds, again_fit_seed),
                InCurriculum::new(curriculum, InMode::Reward, config.in_update_rate),
            );
            run_again(teacher, &mut student, 0, budget, &mut rng, &mut tracker)?;
        }
        _ => {
            let pre = PretrainConfig {
                budget: config.pretrain_budget,
                knn_k: config.knn_k,
                delta_lp: config.delta_lp,
            };
            tracker.pretest = true;
            let alpgmm = AlpGmmTeacher::new(high, bounds, fit_seed);
            let pretrained = pretrain_and_select(
                &mut student,
                history,
                alpgmm,
                &pre,
                &mut rng,
                |e, outcome, t, s| {
                    tracker.step(e, t.last_source().is_uniform(), &outcome.params, s)
                },
            )
            .map_err(|e| match e {
                crate::meta::MetaError::Student(s) => HarnessError::Student(s),
                other => HarnessError::InvalidConfig(other.to_string()),
            })?;
            diag.selected = pretrained.selection.as_ref().ok().copied();
            diag.curriculum_len = pretrained.curriculum.len();
            tracker.support = Support::new(&pretrained.curriculum);
            let start = config.pretrain_budget;
            let rest = budget - start;
            let mode = mode_of(condition);
            if matches!(
                condition,
                Condition::AgainR | Condition::AgainT | Condition::AgainP
            ) {
                let teacher = pretrained.into_again(
                    mode,
                    config.rho_low,
                    config.in_update_rate,
                    again_fit_seed,
                );
                run_again(teacher, &mut student, start, rest, &mut rng, &mut tracker)?;
            } else {
                match pretrained.into_in(mode, config.in_update_rate) {
                    Ok(mut t) => {
                        tracker.follow(t.curriculum(), start);
                        phase(
                            &mut t,
                            &mut student,
                            start,
                            rest,
                            &mut rng,
                            &mut tracker,
                            |t, ep, tr| tr.follow(t.curriculum(), ep),
                        )?;
                    }
                    Err(mut alpgmm) => {
                        phase(
                            &mut *alpgmm,
                            &mut student,
                            start,
                            rest,
                            &mut rng,
                            &mut tracker,
                            no_hook,
                        )?;
                    }
                }
            }
        }
    }
    Ok(finish(config, condition, seed, &student, tracker, diag))
}

/// Builds the run record once training has used the whole budget.
fn finish(
    config: &ExperimentConfig,
    condition: Condition,
    seed: u64,
    student: &ToyStudent,
    mut tracker: Tracker,
    mut diag: RunDiagnostics,
) -> RunRecord {
    let budget = config.budget;
    if !budget.is_multiple_of(config.checkpoint_every) {
        tracker.curve.push((budget, student.performance()));
    }
    if tracker.pretest {
        diag.pretrain_uniform_fraction =
            Some(tracker.uniform_pre as f64 / config.pretrain_budget.max(1) as f64);
    }
    if tracker.post_draws > 0 {
        diag.in_support_fraction = Some(tracker.in_support as f64 / tracker.post_draws as f64);
    }
    diag.emancipation_episode = tracker.emancipation;
    let kc_post = student.knowledge_components();
    RunRecord {
        seed,
        condition,
        student_type: student.student_type(),
        perf_curve: tracker.curve,
        final_perf: student.performance(),
        kc_pre: tracker.kc_pre.unwrap_or_else(|| kc_post.clone()),
        j_s: kc_post.sum(),
        diagnostics: diag,
    }
}

/// Self-curriculum mode: trains a student with ALP-GMM, curates its own
/// trajectory, resets the student and trains it again from scratch with
/// AGAIN-R on that curriculum. Both runs get `config.budget` episodes.
pub fn run_two_run(
    config: &ExperimentConfig,
    seed: u64,
    student_type: usize,
) -> Result<(RunRecord, RunRecord), HarnessError> {
    config.validate()?;
    let mut student = ToyStudent::with_config(config.env, student_type)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fit_seed = rng.next_u64();
    let again_fit_seed = rng.next_u64();
    let bounds = TaskBox::unit(2);

    let mut tracker = Tracker::new(config);
    let mut first = AlpGmmTeacher::new(config.alpgmm, bounds.clone(), fit_seed).record_trajectory();
    phase(
        &mut first,
        &mut student,
        0,
        config.budget,
        &mut rng,
        &mut tracker,
        no_hook,
    )?;
    let run1 = finish(
        config,
        Condition::Alpgmm,
        seed,
        &student,
        tracker,
        RunDiagnostics::default(),
    );

    let curriculum = curate(&first.take_trajectory(), config.delta_lp);
    student.reset();
    let mut tracker = Tracker::new(config);
    let diag = RunDiagnostics {
        curriculum_len: curriculum.len(),
        ..RunDiagnostics::default()
    };
    tracker.support = Support::new(&curriculum);
    let low = AlpGmmConfig {
        rho_rnd: config.rho_low,
        ..config.alpgmm
    };
    let teacher = AgainTeacher::new(
        AlpGmmTeacher::new(low, bounds, again_fit_seed),
        InCurriculum::new(curriculum, InMode::Reward, config.in_update_rate),
    );
    run_again(
        teacher,
        &mut student,
        0,
        config.budget,
        &mut rng,
        &mut tracker,
    )?;
    let run2 = finish(config, Condition::AgainR, seed, &student, tracker, diag);
    Ok((run1, run2))
}
