//! Gaussian mixtures over the concatenated (task parameters, learning
//! progress) space: EM fitting, AIC model selection and utility-weighted
//! sampling of task parameters.

mod em;
pub(crate) mod linalg;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alp::{TaskBox, TaskParams};
use linalg::Cholesky;

pub use em::{fit_em, fit_em_traced, EmFit};

#[derive(Debug, Error, PartialEq)]
pub enum GmmError {
    #[error("cannot fit {k} components to {points} points")]
    DegenerateInput { points: usize, k: usize },
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("point {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("component list is empty")]
    EmptyMixture,
    #[error("utility {0} is negative or not finite")]
    InvalidUtility(f64),
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("covariance is not positive-definite even after regularization")]
    NotPositiveDefinite,
}

/// One Gaussian of a mixture. The last coordinate of `mean` is the
/// normalized learning progress; `lp_utility` caches it clamped to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub weight: f64,
    pub lp_utility: f64,
}

impl GaussianComponent {
    pub fn new(mean: Vec<f64>, covariance: Vec<Vec<f64>>, weight: f64) -> Self {
        let lp_utility = mean.last().copied().unwrap_or(0.0).clamp(0.0, 1.0);
        Self {
            mean,
            covariance,
            weight,
            lp_utility,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Number of task coordinates (the LP coordinate excluded).
    pub fn task_dim(&self) -> usize {
        self.mean.len().saturating_sub(1)
    }

    pub(crate) fn task_marginal_cholesky(&self) -> Option<Cholesky> {
        let d = self.task_dim();
        let mut block = Vec::with_capacity(d * d);
        for row in self.covariance.iter().take(d) {
            block.extend_from_slice(&row[..d]);
        }
        Cholesky::with_jitter(&block, d, 1e-12)
    }

    /// Squared Mahalanobis distance of task coordinates `x` under the task
    /// marginal of this Gaussian.
    pub fn task_mahalanobis_sq(&self, x: &[f64]) -> Option<f64> {
        let chol = self.task_marginal_cholesky()?;
        let diff: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        let mut scratch = vec![0.0; diff.len()];
        Some(chol.mahalanobis_sq(&diff, &mut scratch))
    }
}

/// A fitted mixture. Weights sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGmm {
    pub components: Vec<GaussianComponent>,
    pub fit_log_likelihood: f64,
    pub aic: f64,
}

impl WeightedGmm {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, GaussianComponent::dim)
    }

    /// Pairs every component with its stored LP utility.
    pub fn utility_arms(&self) -> Vec<(&GaussianComponent, f64)> {
        self.components.iter().map(|c| (c, c.lp_utility)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub k_max: usize,
    pub em_max_iters: usize,
    /// Relative change of the log-likelihood below which EM stops.
    pub em_rel_tol: f64,
    /// Added to every covariance diagonal at each M-step.
    pub cov_regularizer: f64,
    pub restarts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            k_max: 10,
            em_max_iters: 100,
            em_rel_tol: 1e-4,
            cov_regularizer: 1e-6,
            restarts: 2,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), GmmError> {
        if self.k_max < 2 {
            return Err(GmmError::InvalidConfig("k_max must be at least 2"));
        }
        if self.cov_regularizer.is_nan() || self.cov_regularizer <= 0.0 {
            return Err(GmmError::InvalidConfig("cov_regularizer must be positive"));
        }
        if self.em_max_iters == 0 || self.restarts == 0 {
            return Err(GmmError::InvalidConfig(
                "em_max_iters and restarts must be positive",
            ));
        }
        Ok(())
    }
}

/// Number of free parameters of a full-covariance mixture.
pub fn parameter_count(k: usize, dim: usize) -> usize {
    (k - 1) + k * dim + k * dim * (dim + 1) / 2
}

/// Akaike information criterion `2P − 2 ln L̂`.
pub fn aic(log_likelihood: f64, parameters: usize) -> f64 {
    2.0 * parameters as f64 - 2.0 * log_likelihood
}

/// Outcome of a model-selection sweep.
#[derive(Debug, Clone)]
pub struct ModelSelection {
    pub best: WeightedGmm,
    /// `(k, aic)` of every candidate that was fitted, in fitting order.
    pub candidates: Vec<(usize, f64)>,
}

/// Fits k = 2..=k_max mixtures (capped at the number of points) and keeps the
/// one with the lowest AIC.
pub fn select_model<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    config: &FitConfig,
    rng: &mut R,
) -> Result<WeightedGmm, GmmError> {
    select_model_report(points, config, rng).map(|s| s.best)
}

pub fn select_model_report<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    config: &FitConfig,
    rng: &mut R,
) -> Result<ModelSelection, GmmError> {
    config.validate()?;
    let data = em::Dataset::new(points)?;
    let n = data.len();
    if n == 0 {
        return Err(GmmError::DegenerateInput { points: 0, k: 1 });
    }
    let k_hi = config.k_max.min(n);
    let k_lo = 2.min(k_hi);
    let mut best: Option<WeightedGmm> = None;
    let mut candidates = Vec::with_capacity(k_hi + 1 - k_lo);
    for k in k_lo..=k_hi {
        let fit = em::fit_dataset(&data, k, config, rng, false)?;
        candidates.push((k, fit.gmm.aic));
        if best.as_ref().is_none_or(|b| fit.gmm.aic < b.aic) {
            best = Some(fit.gmm);
        }
    }
    Ok(ModelSelection {
        best: best.expect("at least one candidate is fitted"),
        candidates,
    })
}

/// Picks a component with probability proportional to its utility (uniformly
/// when all utilities are zero), draws from its task marginal and clips the
/// draw into `bounds`. Returns the task and the index of the chosen arm.
pub fn sample_from_mixture<R: Rng + ?Sized>(
    arms: &[(&GaussianComponent, f64)],
    bounds: &TaskBox,
    rng: &mut R,
) -> Result<(TaskParams, usize), GmmError> {
    if arms.is_empty() {
        return Err(GmmError::EmptyMixture);
    }
    let mut total = 0.0;
    for &(_, u) in arms {
        if !u.is_finite() || u < 0.0 {
            return Err(GmmError::InvalidUtility(u));
        }
        total += u;
    }
    let chosen = if total > 0.0 {
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &(_, u)) in arms.iter().enumerate() {
            acc += u;
            if target < acc {
                pick = Some(i);
                break;
            }
        }
        // Rounding can leave `target` just above the running sum.
        pick.unwrap_or_else(|| arms.iter().rposition(|&(_, u)| u > 0.0).unwrap())
    } else {
        rng.random_range(0..arms.len())
    };
    let component = arms[chosen].0;
    let d = bounds.dim();
    let chol = component
        .task_marginal_cholesky()
        .ok_or(GmmError::NotPositiveDefinite)?;
    let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let mut offset = vec![0.0; d];
    chol.mul_lower(&z, &mut offset);
    let coords = (0..d).map(|i| component.mean[i] + offset[i]).collect();
    Ok((bounds.clip(coords), chosen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn component(mean: Vec<f64>, var: f64, lp: f64) -> GaussianComponent {
        let d = mean.len();
        let cov = (0..d)
            .map(|r| (0..d).map(|c| if r == c { var } else { 0.0 }).collect())
            .collect();
        let mut c = GaussianComponent::new(mean, cov, 1.0);
        c.lp_utility = lp;
        c
    }

    #[test]
    fn aic_direct_formula() {
        assert_eq!(aic(-100.0, 10), 220.0);
        // k=2, d=3: 1 + 6 + 12
        assert_eq!(parameter_count(2, 3), 19);
    }

    #[test]
    fn lp_utility_is_clamped_last_coordinate() {
        let c = GaussianComponent::new(vec![0.2, 0.3, 1.7], vec![vec![0.0; 3]; 3], 1.0);
        assert_eq!(c.lp_utility, 1.0);
        let c = GaussianComponent::new(vec![0.2, 0.3, -0.1], vec![vec![0.0; 3]; 3], 1.0);
        assert_eq!(c.lp_utility, 0.0);
    }

    #[test]
    fn zero_utility_arm_is_never_chosen() {
        let a = component(vec![0.2, 0.2, 0.5], 1e-4, 1.0);
        let b = component(vec![0.8, 0.8, 0.0], 1e-4, 0.0);
        let arms = [(&a, 1.0), (&b, 0.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let unit = TaskBox::unit(2);
        for _ in 0..2000 {
            let (_, i) = sample_from_mixture(&arms, &unit, &mut rng).unwrap();
            assert_eq!(i, 0);
        }
    }

    #[test]
    fn empty_and_negative_arms_are_rejected() {
        let unit = TaskBox::unit(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            sample_from_mixture(&[], &unit, &mut rng).unwrap_err(),
            GmmError::EmptyMixture
        );
        let a = component(vec![0.5, 0.5, 0.5], 0.01, 0.5);
        assert!(matches!(
            sample_from_mixture(&[(&a, -1.0)], &unit, &mut rng),
            Err(GmmError::InvalidUtility(_))
        ));
    }

    #[test]
    fn wide_gaussian_draws_are_clipped_into_bounds() {
        let a = component(vec![0.95, 0.05, 0.3], 4.0, 0.3);
        let unit = TaskBox::unit(2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut clipped = 0;
        for _ in 0..1000 {
            let (p, _) = sample_from_mixture(&[(&a, 1.0)], &unit, &mut rng).unwrap();
            assert!(unit.contains(p.coords()));
            if p.coords().iter().any(|&x| x == 0.0 || x == 1.0) {
                clipped += 1;
            }
        }
        assert!(clipped > 0);
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::default().validate().is_ok());
        let bad = FitConfig {
            k_max: 1,
            ..FitConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FitConfig {
            cov_regularizer: 0.0,
            ..FitConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn selection_caps_k_at_point_count() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.1, 0.5, 0.0]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = select_model_report(&pts, &FitConfig::default(), &mut rng).unwrap();
        assert!(s.candidates.iter().all(|&(k, _)| (2..=5).contains(&k)));
        assert_eq!(s.candidates.len(), 4);
        assert!(s.best.len() <= 5);
    }
}
