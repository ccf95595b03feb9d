use serde::{Deserialize, Serialize};

use super::{t_cdf, StatsError};

/// Williams test for whether metric 1 correlates with the judgments more
/// strongly than metric 2, given the correlation between the two metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilliamsResult {
    pub t: f64,
    pub df: u32,
    /// One-tailed, upper tail of `t`: evidence for `r13 > r23`.
    pub p: f64,
    pub r12: f64,
    pub r13: f64,
    pub r23: f64,
    pub n: usize,
}

/// `r13`: metric 1 vs human, `r23`: metric 2 vs human, `r12`: metric 1 vs
/// metric 2, `n`: number of instances.
pub fn williams_test(r13: f64, r23: f64, r12: f64, n: usize) -> Result<WilliamsResult, StatsError> {
    if n < 4 {
        return Err(StatsError::DegenerateDf(n));
    }
    for r in [r12, r13, r23] {
        if !(-1.0..=1.0).contains(&r) {
            return Err(StatsError::OutOfRange(r));
        }
    }
    let df = u32::try_from(n - 3).map_err(|_| StatsError::DegenerateDf(n))?;
    let result = |t: f64, p: f64| WilliamsResult { t, df, p, r12, r13, r23, n };
    if r13 == r23 {
        return Ok(result(0.0, 0.5));
    }

    // Grouped so that swapping r13 and r23 leaves k and the denominator bit-identical.
    let k = 1.0 - r12 * r12 - (r13 * r13 + r23 * r23) + 2.0 * r12 * (r13 * r23);
    let nf = n as f64;
    let sum = r13 + r23;
    let denom = 2.0 * k * (nf - 1.0) / (nf - 3.0) + (sum * sum / 4.0) * (1.0 - r12).powi(3);
    if denom.is_nan() || denom <= 0.0 {
        return Err(StatsError::Domain { k, r12, r13, r23, n });
    }
    let t = (r13 - r23) * ((nf - 1.0) * (1.0 + r12)).sqrt() / denom.sqrt();
    Ok(result(t, t_cdf(-t, df)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_correlations_give_half() {
        for r12 in [-0.5, 0.0, 0.3, 0.9, 1.0] {
            let w = williams_test(0.4, 0.4, r12, 30).unwrap();
            assert_eq!(w.t, 0.0);
            assert_eq!(w.p, 0.5);
            assert_eq!(w.df, 27);
        }
    }

    #[test]
    fn large_sample_fixture() {
        // Second evaluation written out term by term.
        let (r13, r23, r12, n) = (0.69f64, 0.60f64, 0.8f64, 5822usize);
        let k = 1.0 - r12.powi(2) - r13.powi(2) - r23.powi(2) + 2.0 * r12 * r13 * r23;
        let nf = n as f64;
        let num = (r13 - r23) * ((nf - 1.0) * (1.0 + r12)).sqrt();
        let den = (2.0 * k * ((nf - 1.0) / (nf - 3.0)) + ((r23 + r13).powi(2) / 4.0) * (1.0 - r12).powi(3)).sqrt();
        let w = williams_test(r13, r23, r12, n).unwrap();
        assert!((w.t - num / den).abs() < 1e-9);
        // t is far beyond any tabulated critical value: p underflows towards 0.
        assert!(w.t > 10.0);
        assert!(w.p < 1e-20);
    }

    #[test]
    fn antisymmetric() {
        let a = williams_test(0.71, 0.52, 0.63, 40).unwrap();
        let b = williams_test(0.52, 0.71, 0.63, 40).unwrap();
        assert_eq!(a.t, -b.t);
        assert!((a.p + b.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grows_as_metrics_become_collinear() {
        let mut last = 0.0;
        for i in 0..=9 {
            let r12 = 0.5 + 0.05 * f64::from(i);
            let t = williams_test(0.62, 0.6, r12, 200).unwrap().t;
            assert!(t > last, "r12={r12}");
            last = t;
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(williams_test(0.5, 0.4, 0.3, 3), Err(StatsError::DegenerateDf(3)));
        assert_eq!(williams_test(1.5, 0.4, 0.3, 10), Err(StatsError::OutOfRange(1.5)));
        // Inconsistent correlation matrix: K < 0 and the denominator goes negative.
        assert!(matches!(williams_test(0.99, -0.99, 0.99, 10), Err(StatsError::Domain { .. })));
    }
}
