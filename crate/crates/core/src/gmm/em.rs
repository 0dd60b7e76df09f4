//! Expectation-maximization for full-covariance mixtures.

#![allow(clippy::needless_range_loop)]

use rand::Rng;

use super::linalg::Cholesky;
use super::{aic, parameter_count, FitConfig, GaussianComponent, GmmError, WeightedGmm};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
/// Terms this far below the per-point maximum are below one ulp of the sum.
const NEGLIGIBLE_LOG_RATIO: f64 = -40.0;
/// Floor added to effective counts so empty components keep a finite log-weight.
const COUNT_FLOOR: f64 = 10.0 * f64::EPSILON;

/// Row-major point matrix.
pub(crate) struct Dataset {
    values: Vec<f64>,
    n: usize,
    dim: usize,
}

impl Dataset {
    pub(crate) fn new(points: &[Vec<f64>]) -> Result<Self, GmmError> {
        let dim = points.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(points.len() * dim);
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(GmmError::DimensionMismatch {
                    index,
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(GmmError::NonFinite { index });
            }
            values.extend_from_slice(p);
        }
        Ok(Self {
            values,
            n: points.len(),
            dim,
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.n
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    fn covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let n = self.n as f64;
        let mut mean = vec![0.0; d];
        for i in 0..self.n {
            for (m, x) in mean.iter_mut().zip(self.row(i)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut cov = vec![0.0; d * d];
        for i in 0..self.n {
            let x = self.row(i);
            for r in 0..d {
                let dr = x[r] - mean[r];
                for c in 0..=r {
                    cov[r * d + c] += dr * (x[c] - mean[c]);
                }
            }
        }
        symmetrize_scaled(&mut cov, d, 1.0 / n);
        cov
    }
}

fn symmetrize_scaled(lower: &mut [f64], d: usize, scale: f64) {
    for r in 0..d {
        for c in 0..=r {
            let v = lower[r * d + c] * scale;
            lower[r * d + c] = v;
            lower[c * d + r] = v;
        }
    }
}

/// Mixture parameters in the flat layout used by the inner loops.
struct Params {
    k: usize,
    dim: usize,
    weights: Vec<f64>,
    means: Vec<f64>,
    covs: Vec<f64>,
}

/// A fitted mixture together with the log-likelihood trace of every restart.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub gmm: WeightedGmm,
    /// One sequence per restart; entry `t` is the log-likelihood of the
    /// parameters after `t` M-steps.
    pub traces: Vec<Vec<f64>>,
}

/// Fits a `k`-component mixture, keeping the best of `config.restarts`
/// k-means++-seeded runs.
pub fn fit_em<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    k: usize,
    config: &FitConfig,
    rng: &mut R,
) -> Result<WeightedGmm, GmmError> {
    fit_em_traced(points, k, config, rng).map(|f| f.gmm)
}

pub fn fit_em_traced<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    k: usize,
    config: &FitConfig,
    rng: &mut R,
) -> Result<EmFit, GmmError> {
    config.validate()?;
    let data = Dataset::new(points)?;
    fit_dataset(&data, k, config, rng, true)
}

pub(crate) fn fit_dataset<R: Rng + ?Sized>(
    data: &Dataset,
    k: usize,
    config: &FitConfig,
    rng: &mut R,
    keep_traces: bool,
) -> Result<EmFit, GmmError> {
    if k == 0 || data.n < k {
        return Err(GmmError::DegenerateInput { points: data.n, k });
    }
    let mut ws = Workspace::new(data.n, k, data.dim);
    let mut best: Option<(f64, Params)> = None;
    let mut traces = Vec::new();
    for _ in 0..config.restarts {
        let init = initialize(data, k, config.cov_regularizer, rng);
        let (ll, params, trace) = run_em(data, init, config, &mut ws)?;
        if keep_traces {
            traces.push(trace);
        }
        if best.as_ref().is_none_or(|(b, _)| ll > *b) {
            best = Some((ll, params));
        }
    }
    let (ll, params) = best.expect("restarts >= 1");
    let p = parameter_count(k, data.dim);
    Ok(EmFit {
        gmm: to_mixture(&params, ll, aic(ll, p)),
        traces,
    })
}

fn to_mixture(p: &Params, ll: f64, aic: f64) -> WeightedGmm {
    let d = p.dim;
    let components = (0..p.k)
        .map(|j| {
            let mean = p.means[j * d..(j + 1) * d].to_vec();
            let cov = (0..d)
                .map(|r| p.covs[j * d * d + r * d..j * d * d + (r + 1) * d].to_vec())
                .collect();
            GaussianComponent::new(mean, cov, p.weights[j])
        })
        .collect();
    WeightedGmm {
        components,
        fit_log_likelihood: ll,
        aic,
    }
}

/// k-means++ seeding of the means; every covariance starts at the data
/// covariance plus the regularizer, weights start uniform.
fn initialize<R: Rng + ?Sized>(data: &Dataset, k: usize, reg: f64, rng: &mut R) -> Params {
    let n = data.n;
    let d = data.dim;
    let mut means = Vec::with_capacity(k * d);
    let first = rng.random_range(0..n);
    means.extend_from_slice(data.row(first));
    let mut closest: Vec<f64> = (0..n)
        .map(|i| sq_dist(data.row(i), data.row(first)))
        .collect();
    for _ in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &w) in closest.iter().enumerate() {
                acc += w;
                if target < acc {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let center = data.row(pick).to_vec();
        for (i, c) in closest.iter_mut().enumerate() {
            *c = c.min(sq_dist(data.row(i), &center));
        }
        means.extend_from_slice(&center);
    }
    let mut base = data.covariance();
    for i in 0..d {
        base[i * d + i] += reg;
    }
    let covs = base.iter().copied().cycle().take(k * d * d).collect();
    Params {
        k,
        dim: d,
        weights: vec![1.0 / k as f64; k],
        means,
        covs,
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Workspace {
    resp: Vec<f64>,
    log_prob: Vec<f64>,
    diff: Vec<f64>,
    inv: Vec<f64>,
    consts: Vec<f64>,
}

impl Workspace {
    fn new(n: usize, k: usize, d: usize) -> Self {
        Self {
            resp: vec![0.0; n * k],
            log_prob: vec![0.0; k],
            diff: vec![0.0; d],
            inv: vec![0.0; k * d * d],
            consts: vec![0.0; k],
        }
    }
}

fn run_em(
    data: &Dataset,
    mut params: Params,
    config: &FitConfig,
    ws: &mut Workspace,
) -> Result<(f64, Params, Vec<f64>), GmmError> {
    let mut trace = Vec::new();
    let mut prev: Option<f64> = None;
    for iter in 0..config.em_max_iters {
        let ll = e_step(data, &params, ws)?;
        trace.push(ll);
        let converged = prev
            .is_some_and(|p| (ll - p).abs() <= config.em_rel_tol * p.abs().max(f64::MIN_POSITIVE));
        if converged || iter + 1 == config.em_max_iters {
            return Ok((ll, params, trace));
        }
        prev = Some(ll);
        m_step(data, &mut params, &ws.resp, config.cov_regularizer);
    }
    unreachable!("em_max_iters is validated to be positive")
}

/// Per-component constants of the E-step: log-weight minus the Gaussian
/// normalizer, and the inverse Cholesky factor in row-major order.
fn component_terms(p: &Params, inv: &mut [f64], consts: &mut [f64]) -> Result<(), GmmError> {
    let d = p.dim;
    for j in 0..p.k {
        let chol = Cholesky::with_jitter(&p.covs[j * d * d..(j + 1) * d * d], d, 1e-12)
            .ok_or(GmmError::NotPositiveDefinite)?;
        consts[j] = p.weights[j].ln() - 0.5 * (d as f64 * LN_2PI + chol.log_det());
        chol.inverse_lower(&mut inv[j * d * d..(j + 1) * d * d]);
    }
    Ok(())
}

/// Normalizes one row of log-probabilities into responsibilities and returns
/// the point's log-likelihood.
#[inline]
fn normalize_row(row: &mut [f64], log_prob: &[f64], max: f64) -> f64 {
    let mut sum = 0.0;
    for (r, &lp) in row.iter_mut().zip(log_prob) {
        let delta = lp - max;
        *r = if delta < NEGLIGIBLE_LOG_RATIO {
            0.0
        } else {
            delta.exp()
        };
        sum += *r;
    }
    let inv = 1.0 / sum;
    row.iter_mut().for_each(|r| *r *= inv);
    max + sum.ln()
}

/// Fills responsibilities and returns the total log-likelihood.
fn e_step(data: &Dataset, p: &Params, ws: &mut Workspace) -> Result<f64, GmmError> {
    component_terms(p, &mut ws.inv, &mut ws.consts)?;
    Ok(match p.dim {
        2 => e_step_fixed::<2>(data, p, ws),
        3 => e_step_fixed::<3>(data, p, ws),
        4 => e_step_fixed::<4>(data, p, ws),
        _ => e_step_dyn(data, p, ws),
    })
}

fn e_step_fixed<const D: usize>(data: &Dataset, p: &Params, ws: &mut Workspace) -> f64 {
    let k = p.k;
    let means: Vec<[f64; D]> = p
        .means
        .chunks_exact(D)
        .map(|m| m.try_into().expect("chunk of D"))
        .collect();
    let inv: Vec<[[f64; D]; D]> = ws
        .inv
        .chunks_exact(D * D)
        .take(k)
        .map(|m| std::array::from_fn(|r| m[r * D..(r + 1) * D].try_into().expect("row of D")))
        .collect();
    let mut total = 0.0;
    for (i, x) in data.values.chunks_exact(D).enumerate() {
        let mut max = f64::NEG_INFINITY;
        for j in 0..k {
            let diff: [f64; D] = std::array::from_fn(|t| x[t] - means[j][t]);
            let mut m = 0.0;
            for r in 0..D {
                let mut z = 0.0;
                for c in 0..=r {
                    z += inv[j][r][c] * diff[c];
                }
                m += z * z;
            }
            let lp = ws.consts[j] - 0.5 * m;
            ws.log_prob[j] = lp;
            max = max.max(lp);
        }
        total += normalize_row(&mut ws.resp[i * k..(i + 1) * k], &ws.log_prob[..k], max);
    }
    total
}

fn e_step_dyn(data: &Dataset, p: &Params, ws: &mut Workspace) -> f64 {
    let d = p.dim;
    let k = p.k;
    let mut total = 0.0;
    for i in 0..data.n {
        let x = data.row(i);
        let mut max = f64::NEG_INFINITY;
        for j in 0..k {
            let mu = &p.means[j * d..(j + 1) * d];
            let inv = &ws.inv[j * d * d..(j + 1) * d * d];
            for t in 0..d {
                ws.diff[t] = x[t] - mu[t];
            }
            let mut m = 0.0;
            for r in 0..d {
                let z: f64 = (0..=r).map(|c| inv[r * d + c] * ws.diff[c]).sum();
                m += z * z;
            }
            let lp = ws.consts[j] - 0.5 * m;
            ws.log_prob[j] = lp;
            max = max.max(lp);
        }
        total += normalize_row(&mut ws.resp[i * k..(i + 1) * k], &ws.log_prob[..k], max);
    }
    total
}

fn m_step(data: &Dataset, p: &mut Params, resp: &[f64], reg: f64) {
    match p.dim {
        2 => m_step_fixed::<2>(data, p, resp, reg),
        3 => m_step_fixed::<3>(data, p, resp, reg),
        4 => m_step_fixed::<4>(data, p, resp, reg),
        _ => m_step_dyn(data, p, resp, reg),
    }
}

fn m_step_fixed<const D: usize>(data: &Dataset, p: &mut Params, resp: &[f64], reg: f64) {
    let k = p.k;
    let mut counts = vec![COUNT_FLOOR; k];
    let mut means = vec![[0.0; D]; k];
    for (x, row) in data.values.chunks_exact(D).zip(resp.chunks_exact(k)) {
        for j in 0..k {
            let r = row[j];
            if r == 0.0 {
                continue;
            }
            counts[j] += r;
            for t in 0..D {
                means[j][t] += r * x[t];
            }
        }
    }
    for j in 0..k {
        for t in 0..D {
            means[j][t] /= counts[j];
        }
    }
    let mut covs = vec![[[0.0; D]; D]; k];
    for (x, row) in data.values.chunks_exact(D).zip(resp.chunks_exact(k)) {
        for j in 0..k {
            let r = row[j];
            if r == 0.0 {
                continue;
            }
            let diff: [f64; D] = std::array::from_fn(|t| x[t] - means[j][t]);
            for a in 0..D {
                let ra = r * diff[a];
                for b in 0..=a {
                    covs[j][a][b] += ra * diff[b];
                }
            }
        }
    }
    for j in 0..k {
        p.means[j * D..(j + 1) * D].copy_from_slice(&means[j]);
        let cov = &mut p.covs[j * D * D..(j + 1) * D * D];
        for a in 0..D {
            for b in 0..=a {
                cov[a * D + b] = covs[j][a][b];
            }
        }
        finish_component(p, j, counts[j], data.n, reg);
    }
}

fn finish_component(p: &mut Params, j: usize, count: f64, n: usize, reg: f64) {
    let d = p.dim;
    let cov = &mut p.covs[j * d * d..(j + 1) * d * d];
    symmetrize_scaled(cov, d, 1.0 / count);
    for t in 0..d {
        cov[t * d + t] += reg;
    }
    p.weights[j] = count / n as f64;
}

fn m_step_dyn(data: &Dataset, p: &mut Params, resp: &[f64], reg: f64) {
    let d = p.dim;
    let k = p.k;
    let n = data.n;
    let mut counts = vec![COUNT_FLOOR; k];
    p.means.iter_mut().for_each(|m| *m = 0.0);
    for i in 0..n {
        let x = data.row(i);
        let row = &resp[i * k..(i + 1) * k];
        for j in 0..k {
            let r = row[j];
            if r == 0.0 {
                continue;
            }
            counts[j] += r;
            for t in 0..d {
                p.means[j * d + t] += r * x[t];
            }
        }
    }
    for j in 0..k {
        for t in 0..d {
            p.means[j * d + t] /= counts[j];
        }
    }
    p.covs.iter_mut().for_each(|c| *c = 0.0);
    let mut diff = vec![0.0; d];
    for i in 0..n {
        let x = data.row(i);
        let row = &resp[i * k..(i + 1) * k];
        for j in 0..k {
            let r = row[j];
            if r == 0.0 {
                continue;
            }
            for t in 0..d {
                diff[t] = x[t] - p.means[j * d + t];
            }
            let cov = &mut p.covs[j * d * d..(j + 1) * d * d];
            for a in 0..d {
                let ra = r * diff[a];
                for b in 0..=a {
                    cov[a * d + b] += ra * diff[b];
                }
            }
        }
    }
    for j in 0..k {
        finish_component(p, j, counts[j], n, reg);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_points_give_regularizer_covariances() {
        let pts = vec![vec![0.4, 0.6, 0.1]; 30];
        let cfg = FitConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let gmm = fit_em(&pts, 2, &cfg, &mut rng).unwrap();
        assert!(gmm.fit_log_likelihood.is_finite());
        for c in &gmm.components {
            for r in 0..3 {
                for col in 0..3 {
                    let expect = if r == col { cfg.cov_regularizer } else { 0.0 };
                    assert!((c.covariance[r][col] - expect).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn too_few_points_is_degenerate() {
        let pts = vec![vec![0.1, 0.2]];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            fit_em(&pts, 2, &FitConfig::default(), &mut rng).unwrap_err(),
            GmmError::DegenerateInput { points: 1, k: 2 }
        );
    }

    #[test]
    fn non_finite_and_ragged_inputs_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = FitConfig::default();
        let pts = vec![vec![0.1, 0.2], vec![f64::NAN, 0.2], vec![0.3, 0.3]];
        assert_eq!(
            fit_em(&pts, 2, &cfg, &mut rng).unwrap_err(),
            GmmError::NonFinite { index: 1 }
        );
        let pts = vec![vec![0.1, 0.2], vec![0.2], vec![0.3, 0.3]];
        assert!(matches!(
            fit_em(&pts, 2, &cfg, &mut rng),
            Err(GmmError::DimensionMismatch { index: 1, .. })
        ));
    }

    #[test]
    fn weights_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![rng.random(), rng.random(), rng.random::<f64>() * 0.2])
            .collect();
        let gmm = fit_em(&pts, 4, &FitConfig::default(), &mut rng).unwrap();
        let s: f64 = gmm.components.iter().map(|c| c.weight).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
}
