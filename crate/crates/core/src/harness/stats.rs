use statrs::distribution::{ContinuousCDF, StudentsT};

use super::HarnessError;

/// Result of a two-sided Welch test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Welch {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with Bessel's correction.
fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        0.0
    } else {
        variance(xs).sqrt()
    }
}

/// Standard error of the mean.
pub fn sem(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    std_dev(xs) / (xs.len() as f64).sqrt()
}

/// Two-sided unequal-variance t-test with Welch–Satterthwaite degrees of
/// freedom.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<Welch, HarnessError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(HarnessError::DegenerateSamples(
            "each sample needs at least two values",
        ));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(HarnessError::DegenerateSamples(
            "samples contain non-finite values",
        ));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a) / na, variance(b) / nb);
    if va + vb == 0.0 {
        return Err(HarnessError::DegenerateSamples(
            "both samples have zero variance",
        ));
    }
    let diff = mean(a) - mean(b);
    let t = diff / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|_| HarnessError::DegenerateSamples("invalid degrees of freedom"))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(Welch { t, df, p })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let w = welch_ttest(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(w.t, 0.0);
        assert!((w.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_samples_error() {
        assert!(welch_ttest(&[1.0], &[1.0, 2.0]).is_err());
        assert!(welch_ttest(&[2.0, 2.0], &[2.0, 2.0]).is_err());
    }

    #[test]
    fn one_constant_sample_is_allowed() {
        let w = welch_ttest(&[5.0, 5.0, 5.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(w.t > 0.0);
        assert!((w.df - 2.0).abs() < 1e-12);
    }

    #[test]
    fn summary_statistics() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        assert_eq!(mean(&xs), 5.0);
        assert!((std_dev(&xs) - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert!((sem(&xs) - std_dev(&xs) / 8f64.sqrt()).abs() < 1e-12);
    }
}
