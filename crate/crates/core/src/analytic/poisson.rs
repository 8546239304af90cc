//! Poisson probabilities accurate in both tails.
//!
//! The pmf uses Loader's saddle-point form (Stirling error plus deviance),
//! which keeps full relative precision for means up to 1e7 and beyond. The
//! CDF sums whichever tail does not contain the mode, starting from its
//! largest term, so small tail masses are returned with relative precision
//! and the complementary value follows by subtraction.

#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;

use crate::error::{Error, Result};

// ln(n!) - [(n + 1/2) ln n - n + ln sqrt(2 pi)] for n = 1..15.
const STIRLERR_SMALL: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258,
    0.041_340_695_955_409_294,
    0.027_677_925_684_998_339,
    0.020_790_672_103_765_093,
    0.016_644_691_189_821_192,
    0.013_876_128_823_070_748,
    0.011_896_709_945_891_770,
    0.010_411_265_261_972_096,
    0.009_255_462_182_712_733,
    0.008_330_563_433_362_871,
    0.007_573_675_487_951_841,
    0.006_942_840_107_209_530,
    0.006_408_994_188_004_207,
    0.005_951_370_112_758_848,
    0.005_554_733_551_962_801,
];

const S0: f64 = 1.0 / 12.0;
const S1: f64 = 1.0 / 360.0;
const S2: f64 = 1.0 / 1260.0;
const S3: f64 = 1.0 / 1680.0;
const S4: f64 = 1.0 / 1188.0;

// Re-anchor the term recurrence on an exact pmf value this often.
const REANCHOR: u32 = 256;
const TAIL_EPS: f64 = 1e-17;

fn stirlerr(n: f64) -> f64 {
    if n <= 15.0 {
        return STIRLERR_SMALL[n as usize];
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term x ln(x/np) + np - x, without cancellation near x = np.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// P(X = k) for X ~ Poisson(lambda). Assumes lambda >= 0.
pub(crate) fn pmf_unchecked(k: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if k == 0 {
        return (-lambda).exp();
    }
    let x = k as f64;
    (-stirlerr(x) - bd0(x, lambda)).exp() / (2.0 * PI * x).sqrt()
}

/// (P(X <= m), P(X > m)). Assumes lambda >= 0 and finite.
pub(crate) fn cdf_sf_unchecked(m: i64, lambda: f64) -> (f64, f64) {
    if m < 0 {
        return (0.0, 1.0);
    }
    if lambda == 0.0 {
        return (1.0, 0.0);
    }
    let m = m as u64;
    if (m as f64) < lambda {
        let lower = lower_tail(m, lambda);
        (lower, 1.0 - lower)
    } else {
        let upper = upper_tail(m + 1, lambda);
        (1.0 - upper, upper)
    }
}

/// Sum of pmf(k) for k = 0..=m, with m below the mean so terms decrease
/// going down.
fn lower_tail(m: u64, lambda: f64) -> f64 {
    let mut k = m;
    let mut term = pmf_unchecked(k, lambda);
    let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
    let mut steps = 0u32;
    loop {
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if k == 0 || term == 0.0 {
            break;
        }
        let ratio = k as f64 / lambda;
        if ratio < 1.0 && term * ratio / (1.0 - ratio) < TAIL_EPS * sum {
            break;
        }
        k -= 1;
        steps += 1;
        term = if steps.is_multiple_of(REANCHOR) {
            pmf_unchecked(k, lambda)
        } else {
            term * ratio
        };
    }
    sum
}

/// Sum of pmf(k) for k >= start, with start above the mean.
fn upper_tail(start: u64, lambda: f64) -> f64 {
    let mut k = start;
    let mut term = pmf_unchecked(k, lambda);
    let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
    let mut steps = 0u32;
    loop {
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if term == 0.0 {
            break;
        }
        let ratio = lambda / (k + 1) as f64;
        if ratio < 1.0 && term * ratio / (1.0 - ratio) < TAIL_EPS * sum {
            break;
        }
        k += 1;
        steps += 1;
        term = if steps.is_multiple_of(REANCHOR) {
            pmf_unchecked(k, lambda)
        } else {
            term * ratio
        };
    }
    sum
}

fn check_mean(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "Poisson mean must be finite and >= 0, got {lambda}"
        )))
    }
}

/// Probability mass P(X = k).
pub fn poisson_pmf(k: u64, lambda: f64) -> Result<f64> {
    check_mean(lambda)?;
    Ok(pmf_unchecked(k, lambda))
}

/// P(X <= m); zero for m < 0.
pub fn poisson_cdf(m: i64, lambda: f64) -> Result<f64> {
    check_mean(lambda)?;
    Ok(cdf_sf_unchecked(m, lambda).0)
}

/// P(X > m); one for m < 0.
pub fn poisson_sf(m: i64, lambda: f64) -> Result<f64> {
    check_mean(lambda)?;
    Ok(cdf_sf_unchecked(m, lambda).1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, abs: f64) {
        assert!((a - b).abs() <= abs, "{a} vs {b}");
    }

    fn rel(a: f64, b: f64, tol: f64) {
        assert!(((a - b) / b).abs() <= tol, "{a} vs {b}");
    }

    // Reference values from 40-60 digit arbitrary precision summation.
    #[test]
    fn cdf_reference_values() {
        close(poisson_cdf(0, 1.0).unwrap(), 0.367_879_441_171_442_32, 1e-15);
        close(poisson_cdf(300, 308.3).unwrap(), 0.331_205_511_743_538_76, 1e-13);
        close(poisson_cdf(10, 5.5).unwrap(), 0.974_748_749_455_460_11, 1e-14);
        close(poisson_cdf(1000, 1000.0).unwrap(), 0.508_409_367_168_505_99, 1e-13);
        close(poisson_cdf(10_000_000, 1e7).unwrap(), 0.500_084_104_416_326_00, 1e-12);
        rel(poisson_cdf(9_990_000, 1e7).unwrap(), 7.818_510_924_077_965_7e-4, 1e-10);
        rel(
            poisson_cdf(95_000, 97_500.0).unwrap(),
            4.534_546_534_076_354_4e-16,
            1e-10,
        );
        rel(poisson_cdf(200, 308.3).unwrap(), 2.832_534_099_241_764e-11, 1e-12);
        rel(poisson_sf(400, 308.3).unwrap(), 2.498_303_404_070_702_2e-7, 1e-12);
    }

    #[test]
    fn pmf_reference_values() {
        rel(poisson_pmf(300, 308.3).unwrap(), 0.020_571_483_106_869_479, 1e-13);
        rel(poisson_pmf(10_000_000, 1e7).unwrap(), 1.261_566_250_497_027_9e-4, 1e-12);
        rel(poisson_pmf(0, 2.5).unwrap(), 0.082_084_998_623_898_795, 1e-14);
        rel(poisson_pmf(1, 308.3).unwrap(), 3.944_434_547_691_853_5e-132, 1e-12);
    }

    #[test]
    fn degenerate_and_errors() {
        assert_eq!(poisson_cdf(-1, 3.0).unwrap(), 0.0);
        assert_eq!(poisson_cdf(0, 0.0).unwrap(), 1.0);
        assert_eq!(poisson_cdf(17, 0.0).unwrap(), 1.0);
        assert_eq!(poisson_sf(-3, 0.0).unwrap(), 1.0);
        assert!(poisson_cdf(3, -1.0).is_err());
        assert!(poisson_cdf(3, f64::NAN).is_err());
        assert!(poisson_pmf(3, f64::INFINITY).is_err());
    }

    #[test]
    fn stirlerr_branches_join() {
        // Table and series agree across the n = 15/16 handover to ~1e-12.
        let series = |n: f64| {
            let nn = n * n;
            (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
        };
        close(series(15.0), STIRLERR_SMALL[15], 1e-12);
    }

    #[test]
    fn tails_sum_to_one() {
        for &lam in &[0.3, 7.0, 308.3, 5_000.0, 97_500.0] {
            for &m in &[0_i64, 5, 300, 320, 4_900, 97_000, 98_000] {
                let (c, s) = cdf_sf_unchecked(m, lam);
                close(c + s, 1.0, 1e-12);
                assert!((0.0..=1.0).contains(&c) && (0.0..=1.0).contains(&s));
            }
        }
    }
}
