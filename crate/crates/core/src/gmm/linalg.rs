//! Small dense helpers for the handful of dimensions the mixtures live in.

#![allow(clippy::needless_range_loop)]

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix,
/// stored row-major in a flat buffer.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
    inv_diag: Vec<f64>,
    log_det: f64,
}

impl Cholesky {
    /// Factorizes the row-major `dim × dim` matrix `a`. Returns `None` when a
    /// pivot is not strictly positive.
    pub(crate) fn new(a: &[f64], dim: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), dim * dim);
        let mut lower = vec![0.0; dim * dim];
        for r in 0..dim {
            for c in 0..=r {
                let mut sum = a[r * dim + c];
                for t in 0..c {
                    sum -= lower[r * dim + t] * lower[c * dim + t];
                }
                if r == c {
                    if !sum.is_finite() || sum <= 0.0 {
                        return None;
                    }
                    lower[r * dim + c] = sum.sqrt();
                } else {
                    lower[r * dim + c] = sum / lower[c * dim + c];
                }
            }
        }
        let inv_diag: Vec<f64> = (0..dim).map(|i| 1.0 / lower[i * dim + i]).collect();
        let log_det = 2.0 * (0..dim).map(|i| lower[i * dim + i].ln()).sum::<f64>();
        Some(Self {
            dim,
            lower,
            inv_diag,
            log_det,
        })
    }

    /// Factorizes `a`, adding growing multiples of `jitter` to the diagonal
    /// until the factorization succeeds.
    pub(crate) fn with_jitter(a: &[f64], dim: usize, jitter: f64) -> Option<Self> {
        if let Some(c) = Self::new(a, dim) {
            return Some(c);
        }
        let mut work = a.to_vec();
        let mut eps = jitter.max(f64::EPSILON);
        for _ in 0..8 {
            for i in 0..dim {
                work[i * dim + i] = a[i * dim + i] + eps;
            }
            if let Some(c) = Self::new(&work, dim) {
                return Some(c);
            }
            eps *= 10.0;
        }
        None
    }

    pub(crate) fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Squared Mahalanobis norm of `diff` (i.e. `diffᵀ A⁻¹ diff`). `scratch`
    /// must hold at least `dim` values.
    #[inline]
    pub(crate) fn mahalanobis_sq(&self, diff: &[f64], scratch: &mut [f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for r in 0..d {
            let row = &self.lower[r * d..r * d + r];
            let mut s = diff[r];
            for (l, z) in row.iter().zip(scratch.iter()) {
                s -= l * z;
            }
            let z = s * self.inv_diag[r];
            scratch[r] = z;
            acc += z * z;
        }
        acc
    }

    /// Writes `L⁻¹` (lower triangular, row-major) into `out`.
    pub(crate) fn inverse_lower(&self, out: &mut [f64]) {
        let d = self.dim;
        out[..d * d].iter_mut().for_each(|v| *v = 0.0);
        for c in 0..d {
            out[c * d + c] = self.inv_diag[c];
            for r in c + 1..d {
                let s: f64 = (c..r).map(|t| self.lower[r * d + t] * out[t * d + c]).sum();
                out[r * d + c] = -s * self.inv_diag[r];
            }
        }
    }

    /// Writes `L · z` into `out`.
    pub(crate) fn mul_lower(&self, z: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for r in 0..d {
            out[r] = (0..=r).map(|c| self.lower[r * d + c] * z[c]).sum();
        }
    }
}
