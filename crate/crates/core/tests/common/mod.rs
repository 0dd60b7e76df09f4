//! Oracles, synthetic data and checks shared by the integration tests and the
//! acceptance report.

#![allow(dead_code)]

use std::time::Instant;

use metaacl::gmm::{fit_em_traced, select_model, FitConfig, GaussianComponent, WeightedGmm};
use metaacl::harness::{
    gen_classroom, read_history, run_condition, run_one, write_history, Condition,
    ExperimentConfig, TypeAssignment,
};
use metaacl::meta::{select_prior, KcVector, StudentMeta, TrainingTrajectory, TrajectorySnapshot};
use metaacl::{AlpHistory, EpisodeOutcome, RewardRange, TaskParams, ToyStudent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// 99th percentiles of the chi-square distribution, indexed by degrees of
/// freedom (1..=3).
pub const CHI2_99: [f64; 4] = [
    f64::NAN,
    6.634896601021214,
    9.21034037197618,
    11.344866730144373,
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Pearson statistic of observed counts against expected probabilities.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = observed.iter().sum();
    observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

/// `per` points around each of `means`, isotropic with standard deviation `sd`.
pub fn clustered_points(seed: u64, means: &[Vec<f64>], sd: f64, per: usize) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, sd).unwrap();
    let mut out = Vec::with_capacity(means.len() * per);
    for m in means {
        for _ in 0..per {
            out.push(m.iter().map(|&c| c + noise.sample(&mut r)).collect());
        }
    }
    out
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Linear-scan nearest entry; the most recent one wins ties.
pub fn brute_nearest(points: &[Vec<f64>], q: &[f64]) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (i, p) in points.iter().enumerate() {
        let d = sq_dist(p, q);
        if best.is_none_or(|(bd, _)| d <= bd) {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| i)
}

/// Sort by (distance, index), keep the first `k`, return the best score with
/// ties going to the lowest index.
pub fn brute_select(history: &[TrainingTrajectory], kc: &[f64], k: usize) -> usize {
    let mut order: Vec<(f64, usize)> = history
        .iter()
        .enumerate()
        .map(|(i, t)| (sq_dist(t.kc_pre.values(), kc).sqrt(), i))
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let k = k.clamp(1, history.len());
    let mut best = order[0].1;
    for &(_, i) in &order[1..k] {
        let (s, bs) = (history[i].score, history[best].score);
        if s > bs || (s == bs && i < best) {
            best = i;
        }
    }
    best
}

/// A trajectory carrying only what selection looks at.
pub fn bare_trajectory(kc_pre: Vec<f64>, score: f64, student_type: usize) -> TrainingTrajectory {
    TrainingTrajectory::new(
        Vec::new(),
        KcVector::new(kc_pre),
        KcVector::new(vec![score]),
        StudentMeta { student_type },
    )
}

/// History whose KC profiles form `clusters` planted groups in `dim`
/// dimensions, with integer scores so that ties occur.
pub fn planted_history(
    seed: u64,
    n: usize,
    dim: usize,
    clusters: usize,
) -> Vec<TrainingTrajectory> {
    let mut r = rng(seed);
    let centers: Vec<Vec<f64>> = (0..clusters)
        .map(|_| (0..dim).map(|_| r.random_range(0.0..100.0)).collect())
        .collect();
    let noise = Normal::new(0.0, 3.0).unwrap();
    (0..n)
        .map(|_| {
            let c = r.random_range(0..clusters);
            let kc = centers[c]
                .iter()
                .map(|&x| x + noise.sample(&mut r))
                .collect();
            bare_trajectory(kc, r.random_range(0..20) as f64, c)
        })
        .collect()
}

pub fn random_component(r: &mut ChaCha8Rng, dim: usize) -> GaussianComponent {
    let mean: Vec<f64> = (0..dim).map(|_| r.random_range(0.0..1.0)).collect();
    let mut cov = vec![vec![0.0; dim]; dim];
    // A·Aᵀ + εI is symmetric positive definite.
    let a: Vec<Vec<f64>> = (0..dim)
        .map(|_| (0..dim).map(|_| r.random_range(-0.2..0.2)).collect())
        .collect();
    for i in 0..dim {
        for j in 0..dim {
            cov[i][j] = (0..dim).map(|t| a[i][t] * a[j][t]).sum::<f64>();
        }
        cov[i][i] += 1e-3;
    }
    GaussianComponent::new(mean, cov, r.random_range(0.1..1.0))
}

pub fn random_trajectory(
    r: &mut ChaCha8Rng,
    snapshots: usize,
    kc_len: usize,
) -> TrainingTrajectory {
    let snaps = (0..snapshots)
        .map(|_| {
            let k = r.random_range(1..5);
            let mut components: Vec<GaussianComponent> =
                (0..k).map(|_| random_component(r, 3)).collect();
            let total: f64 = components.iter().map(|c| c.weight).sum();
            for c in &mut components {
                c.weight /= total;
            }
            TrajectorySnapshot {
                gmm: WeightedGmm {
                    components,
                    fit_log_likelihood: r.random_range(-500.0..500.0),
                    aic: r.random_range(-1000.0..1000.0),
                },
                mean_reward: r.random_range(0.0..100.0),
            }
        })
        .collect();
    let kc_pre = (0..kc_len).map(|_| r.random_range(0..200) as f64).collect();
    let kc_post = (0..kc_len).map(|_| r.random_range(0..800) as f64).collect();
    TrainingTrajectory::new(
        snaps,
        KcVector::new(kc_pre),
        KcVector::new(kc_post),
        StudentMeta {
            student_type: r.random_range(0..400),
        },
    )
}

/// Summary of one acceptance sub-check.
pub type Check = Result<String, String>;

/// EM log-likelihood is non-decreasing along every restart of `fits` random
/// fits, up to a relative slack for the covariance regularizer.
pub fn check_em_monotone(fits: usize) -> Check {
    let config = FitConfig::default();
    let mut worst = 0.0f64;
    for seed in 0..fits as u64 {
        let mut r = rng(10_000 + seed);
        let dim = r.random_range(2..=4);
        let k_true = r.random_range(1..=4);
        let means: Vec<Vec<f64>> = (0..k_true)
            .map(|_| (0..dim).map(|_| r.random_range(0.0..1.0)).collect())
            .collect();
        let per = r.random_range(20..80);
        let points = clustered_points(seed, &means, r.random_range(0.02..0.2), per);
        let k = r.random_range(1..=5).min(points.len());
        let fit =
            fit_em_traced(&points, k, &config, &mut r).map_err(|e| format!("fit {seed}: {e}"))?;
        for trace in &fit.traces {
            for w in trace.windows(2) {
                let drop = (w[0] - w[1]) / w[0].abs().max(1.0);
                worst = worst.max(drop);
                if drop > 1e-6 {
                    return Err(format!(
                        "fit {seed}: log-likelihood fell from {} to {}",
                        w[0], w[1]
                    ));
                }
            }
        }
    }
    Ok(format!("{fits} fits, worst relative drop {worst:.1e}"))
}

/// Fraction of `seeds` where AIC selection picks 3 components on three
/// well-separated clusters of about 500 points in total.
pub fn aic_recovery_rate(seeds: usize) -> f64 {
    let config = FitConfig::default();
    let means = vec![vec![0.2, 0.2], vec![0.8, 0.3], vec![0.5, 0.8]];
    let hits = (0..seeds as u64)
        .filter(|&s| {
            let points = clustered_points(20_000 + s, &means, 0.04, 167);
            let gmm = select_model(&points, &config, &mut rng(s)).expect("fit");
            gmm.len() == 3
        })
        .count();
    hits as f64 / seeds as f64
}

pub fn check_aic_recovery(seeds: usize) -> Check {
    let rate = aic_recovery_rate(seeds);
    if rate >= 0.8 {
        Ok(format!(
            "k = 3 selected in {:.0}% of {seeds} seeds",
            rate * 100.0
        ))
    } else {
        Err(format!(
            "k = 3 selected in only {:.0}% of {seeds} seeds",
            rate * 100.0
        ))
    }
}

/// `compute_alp` equals a linear-scan oracle over the whole history.
pub fn check_alp_oracle(queries: usize) -> Check {
    let mut r = rng(30_000);
    let mut h = AlpHistory::new(2, 250, RewardRange::TOY);
    let mut points = Vec::new();
    let mut rewards = Vec::new();
    for _ in 0..2000 {
        // Coarse grid so that exact distance ties occur.
        let p = vec![
            (r.random_range(0..50) as f64) / 49.0,
            (r.random_range(0..50) as f64) / 49.0,
        ];
        let reward = r.random_range(0..=100) as f64;
        h.record(&EpisodeOutcome::new(
            TaskParams::new(p.clone()).unwrap(),
            reward,
        ));
        points.push(p);
        rewards.push(reward);
    }
    for q in 0..queries {
        let p = vec![r.random_range(0.0..1.0), r.random_range(0.0..1.0)];
        let reward = r.random_range(0.0..100.0);
        let i = brute_nearest(&points, &p).unwrap();
        let expected = ((reward - rewards[i]).abs() / 100.0).clamp(0.0, 1.0);
        let got = h.compute_alp(&EpisodeOutcome::new(
            TaskParams::new(p.clone()).unwrap(),
            reward,
        ));
        if got != expected || h.nearest(&TaskParams::new(p).unwrap()) != Some(i) {
            return Err(format!("query {q}: alp {got} but oracle {expected}"));
        }
    }
    Ok(format!("{queries} queries against 2000 entries"))
}

/// `select_prior` equals the brute-force oracle on random planted histories.
pub fn check_select_prior_oracle(histories: usize) -> Check {
    let mut r = rng(40_000);
    for h in 0..histories {
        let n = r.random_range(1..150);
        let dim = r.random_range(1..12);
        let history = planted_history(41_000 + h as u64, n, dim, r.random_range(1..6));
        for _ in 0..5 {
            let kc: Vec<f64> = (0..dim).map(|_| r.random_range(0.0..100.0)).collect();
            let k = r.random_range(1..8);
            let got =
                select_prior(&history, &KcVector::new(kc.clone()), k).map_err(|e| e.to_string())?;
            let want = brute_select(&history, &kc, k);
            if got != want {
                return Err(format!("history {h}: selected {got}, oracle {want}"));
            }
        }
    }
    Ok(format!("{histories} histories, 5 queries each"))
}

/// Random episodes on random students never break the cell rules.
pub fn check_toy_fuzz(episodes: usize) -> Check {
    let mut r = rng(50_000);
    let mut done = 0;
    while done < episodes {
        let ty = r.random_range(0..400);
        let mut s = ToyStudent::new(ty).map_err(|e| e.to_string())?;
        let cfg = *s.config();
        // Bias draws towards the start cell so that unlocking happens.
        let home = cfg.cell_center(ty).into_inner();
        for _ in 0..2000 {
            let before_counts: Vec<u32> = (0..400).map(|c| s.count(c)).collect();
            let before_unlocked: Vec<bool> = (0..400).map(|c| s.is_unlocked(c)).collect();
            let before_perf = s.perf();
            let p: Vec<f64> = if r.random_bool(0.7) {
                home.iter()
                    .map(|&c| (c + r.random_range(-0.12..0.12)).clamp(0.0, 1.0))
                    .collect()
            } else {
                vec![r.random_range(0.0..=1.0), r.random_range(0.0..=1.0)]
            };
            let cell = cfg.cell_of(&p);
            let reward = s.play(&p).map_err(|e| e.to_string())?;
            done += 1;
            let was_unlocked = before_unlocked[cell];
            let expected = if was_unlocked {
                (before_counts[cell] + 1).min(100) as f64
            } else {
                0.0
            };
            if reward != expected {
                return Err(format!("cell {cell}: reward {reward}, expected {expected}"));
            }
            for c in 0..400 {
                let grew = s.count(c) as i64 - before_counts[c] as i64;
                let want = i64::from(c == cell && was_unlocked);
                if grew != want {
                    return Err(format!("cell {c}: counter changed by {grew}"));
                }
                if before_unlocked[c] && !s.is_unlocked(c) {
                    return Err(format!("cell {c} locked again"));
                }
                if !before_unlocked[c] && s.is_unlocked(c) {
                    let (row, col, (cr, cc)) = (c / 20, c % 20, (cell / 20, cell % 20));
                    let adjacent = row.abs_diff(cr) + col.abs_diff(cc) == 1;
                    if !(adjacent && s.count(cell) >= 75) {
                        return Err(format!("cell {c} unlocked without a mature neighbour"));
                    }
                }
            }
            if s.perf() < before_perf || s.perf() != 100.0 * s.unlocked_cells() as f64 / 400.0 {
                return Err("performance decreased or disagrees with unlocked count".into());
            }
            if done == episodes {
                break;
            }
        }
    }
    Ok(format!("{episodes} episodes"))
}

/// Small configuration under which every condition runs in well under a
/// second.
pub fn small_config(condition: Condition) -> ExperimentConfig {
    ExperimentConfig {
        condition,
        budget: 3000,
        pretrain_budget: 1000,
        seeds: 3,
        master_seed: 77,
        checkpoint_every: 500,
        ..ExperimentConfig::default()
    }
}

pub fn small_history() -> Vec<TrainingTrajectory> {
    gen_classroom(
        4,
        TypeAssignment::OnePerType,
        &small_config(Condition::Alpgmm),
    )
    .expect("classroom")
}

/// Every condition gives the same records when rerun, and a record does not
/// depend on the batch it was computed in.
pub fn check_bit_identical() -> Check {
    let history = small_history();
    for c in Condition::ALL {
        let config = small_config(c);
        let h = c.needs_history().then_some(history.as_slice());
        let a = run_condition(&config, h).map_err(|e| e.to_string())?;
        let b = run_condition(&config, h).map_err(|e| e.to_string())?;
        let solo = run_one(&config, h, a[1].seed, a[1].student_type).map_err(|e| e.to_string())?;
        if json(&a) != json(&b) || json(&a[1]) != json(&solo) {
            return Err(format!("{c} is not reproducible"));
        }
    }
    Ok(format!("{} conditions", Condition::ALL.len()))
}

/// Exact text form; floats round-trip, so equal text means equal bits.
pub fn json<T: serde::Serialize>(x: &T) -> String {
    serde_json::to_string(x).expect("serializable")
}

/// Written then parsed histories equal the originals.
pub fn check_history_round_trip() -> Check {
    let mut r = rng(60_000);
    let mut history: Vec<TrainingTrajectory> =
        (0..20).map(|_| random_trajectory(&mut r, 6, 400)).collect();
    history.extend(small_history());
    let mut buf = Vec::new();
    write_history(&mut buf, &history).map_err(|e| e.to_string())?;
    let back = read_history(buf.as_slice()).map_err(|e| e.to_string())?;
    if back != history {
        return Err("history changed through serialization".into());
    }
    Ok(format!("{} trajectories", history.len()))
}

/// Runs `f`, returning its outcome and the elapsed seconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64())
}
