use serde::{Deserialize, Serialize};

use crate::math::{exp, lgamma, ln, mean, sample_std, sqrt};
use crate::{Error, Result};

const MAX_ITERATIONS: usize = 300;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITERATIONS {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let step = d * c;
        h *= step;
        if (step - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = exp(lgamma(a + b) - lgamma(a) - lgamma(b) + a * ln(x) + b * ln(1.0 - x));
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// CDF of Student's t distribution with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-tailed p-value `P(|T| >= |t|)`.
pub fn two_tailed_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
    pub mean_difference: f64,
    /// The differences had zero variance; `p` follows the convention
    /// (0 when the means differ, 1 when they are identical).
    pub zero_variance: bool,
}

/// Paired two-tailed t-test on matched samples.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidConfig(
            "a paired t-test needs at least two pairs".into(),
        ));
    }
    let diffs: alloc::vec::Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    let m = mean(&diffs);
    let sd = sample_std(&diffs);
    let df = n - 1;
    // Differences equal up to rounding count as constant.
    if sd == 0.0 || sd <= 1e-12 * m.abs() {
        let identical = m == 0.0;
        return Ok(TTest {
            t: if identical {
                0.0
            } else {
                m.signum() * f64::INFINITY
            },
            p: if identical { 1.0 } else { 0.0 },
            df,
            mean_difference: m,
            zero_variance: true,
        });
    }
    let t = m / (sd / sqrt(n as f64));
    Ok(TTest {
        t,
        p: two_tailed_p(t, df as f64),
        df,
        mean_difference: m,
        zero_variance: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, StudentsT};

    #[test]
    fn identical_samples() {
        let a = [0.3, 0.2, 0.25, 0.4, 0.31];
        let r = paired_ttest(&a, &a).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
        assert!(r.zero_variance);
    }

    #[test]
    fn constant_differences_follow_convention() {
        let a = [2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = paired_ttest(&a, &b).unwrap();
        assert!(r.zero_variance);
        assert_eq!(r.p, 0.0);
        assert_eq!(r.t, f64::INFINITY);
    }

    #[test]
    fn matches_scipy_reference() {
        // scipy.stats.ttest_1samp([0.02, 0.01, 0.03, 0.02, 0.02], 0)
        let d = [0.02, 0.01, 0.03, 0.02, 0.02];
        let zeros = [0.0; 5];
        let r = paired_ttest(&d, &zeros).unwrap();
        assert!((r.t - 6.324555320336759).abs() < 1e-9);
        assert!((r.p - 0.0031982021523353056).abs() < 1e-10);
        assert_eq!(r.df, 4);

        // scipy.stats.ttest_rel(a, b)
        let a = [0.31, 0.28, 0.35, 0.30, 0.29];
        let b = [0.27, 0.29, 0.30, 0.26, 0.28];
        let r = paired_ttest(&a, &b).unwrap();
        assert!((r.t - 2.3162640965743453).abs() < 1e-9);
        assert!((r.p - 0.0814699795498255).abs() < 1e-10);
    }

    #[test]
    fn cdf_matches_scipy_and_statrs() {
        assert!((student_t_cdf(1.5, 3.0) - 0.8847080673775886).abs() < 1e-10);
        assert!((student_t_cdf(-2.2, 7.0) - 0.03186550765131839).abs() < 1e-10);
        assert!((1.0 - student_t_cdf(6.0, 2.0) - 0.013335736607712385).abs() < 1e-10);
        for df in [1.0, 2.0, 4.0, 9.0, 30.0] {
            let reference = StudentsT::new(0.0, 1.0, df).unwrap();
            for &t in &[-8.0, -3.1, -1.0, -0.2, 0.0, 0.4, 1.7, 2.5, 12.0] {
                assert!(
                    (student_t_cdf(t, df) - reference.cdf(t)).abs() < 1e-10,
                    "t={t} df={df}"
                );
            }
        }
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(paired_ttest(&[1.0], &[2.0]).is_err());
        assert!(paired_ttest(&[1.0, 2.0], &[2.0]).is_err());
    }
}
