//! One-tailed two-sample t-tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatTest {
    /// Unequal variances, Welch–Satterthwaite degrees of freedom.
    #[default]
    Welch,
    /// Equal variances, pooled estimate.
    Pooled,
}

/// Test statistic, one-tailed p-value for `mean(a) < mean(b)` and degrees of
/// freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the mean; zero for a single value.
pub fn std_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        0.0
    } else {
        (variance(xs) / xs.len() as f64).sqrt()
    }
}

fn check(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::DegenerateSample(format!(
            "t-test needs at least 2 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("t-test sample"));
    }
    let (ma, mb, va, vb) = (mean(a), mean(b), variance(a), variance(b));
    if va == 0.0 && vb == 0.0 && ma == mb {
        return Err(Error::DegenerateSample("both samples are constant and equal".into()));
    }
    Ok((ma, mb, va, vb))
}

fn lower_tail(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t < 0.0 { 0.0 } else { 1.0 };
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    dist.cdf(t).clamp(0.0, 1.0)
}

/// Welch's unequal-variance t-test, one-tailed for `mean(a) < mean(b)`.
pub fn one_tailed_welch_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    let (ma, mb, va, vb) = check(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se = (sa + sb).sqrt();
    if se == 0.0 {
        let t = if ma < mb { f64::NEG_INFINITY } else { f64::INFINITY };
        return Ok(TTest {
            t,
            p: lower_tail(t, 1.0),
            df: na + nb - 2.0,
        });
    }
    let t = (ma - mb) / se;
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TTest {
        t,
        p: lower_tail(t, df),
        df,
    })
}

/// Student's t-test with a pooled variance, one-tailed for `mean(a) < mean(b)`.
pub fn one_tailed_pooled_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    let (ma, mb, va, vb) = check(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
    let se = (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
    let t = if se == 0.0 {
        if ma < mb {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        (ma - mb) / se
    };
    Ok(TTest {
        t,
        p: lower_tail(t, df),
        df,
    })
}

pub fn one_tailed_test(kind: StatTest, a: &[f64], b: &[f64]) -> Result<TTest> {
    match kind {
        StatTest::Welch => one_tailed_welch_test(a, b),
        StatTest::Pooled => one_tailed_pooled_test(a, b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_give_half() {
        let a = [1.0, 2.0, 3.5, 0.2];
        let r = one_tailed_welch_test(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn separated_samples() {
        let r = one_tailed_welch_test(&[0.0; 4], &[10.0, 10.0, 10.0, 10.0001]).unwrap();
        assert!(r.p < 1e-6);
        assert!((r.df - 3.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_and_short_samples() {
        assert!(matches!(
            one_tailed_welch_test(&[1.0, 1.0], &[1.0, 1.0, 1.0]),
            Err(Error::DegenerateSample(_))
        ));
        assert!(matches!(one_tailed_welch_test(&[1.0], &[2.0, 3.0]), Err(Error::DegenerateSample(_))));
        let r = one_tailed_welch_test(&[1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert_eq!(r.p, 0.0);
    }

    #[test]
    fn pooled_matches_welch_for_equal_sizes_and_variances() {
        let a = [1.0, 2.0, 3.0];
        let b = [2.0, 3.0, 4.0];
        let w = one_tailed_welch_test(&a, &b).unwrap();
        let p = one_tailed_pooled_test(&a, &b).unwrap();
        assert!((w.t - p.t).abs() < 1e-12);
        assert!((w.df - p.df).abs() < 1e-12);
    }

    #[test]
    fn closed_form_two_df() {
        // With 2 degrees of freedom the t CDF is ½ + t / (2√(2 + t²)).
        let a = [0.0, 1.0];
        let b = [1.0, 2.0];
        let r = one_tailed_pooled_test(&a, &b).unwrap();
        assert!((r.df - 2.0).abs() < 1e-12);
        let expect = 0.5 + r.t / (2.0 * (2.0 + r.t * r.t).sqrt());
        assert!((r.p - expect).abs() < 1e-10);
    }
}
