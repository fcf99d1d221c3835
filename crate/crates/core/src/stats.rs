//! Sample statistics and log-linear decay fits.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::C64;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance (0 for fewer than two samples).
    pub variance: f64,
    pub stderr: f64,
    pub ci95: [f64; 2],
}

impl Stats {
    /// Sums run over the sorted samples, so the result does not depend on
    /// sample order.
    pub fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let values = &sorted[..];
        let n = values.len();
        if n == 0 {
            return Self { count: 0, mean: f64::NAN, variance: f64::NAN, stderr: f64::NAN, ci95: [f64::NAN; 2] };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let stderr = (variance / n as f64).sqrt();
        Self { count: n, mean, variance, stderr, ci95: [mean - Z95 * stderr, mean + Z95 * stderr] }
    }

    /// `|mean| <= k * stderr`.
    pub fn mean_within(&self, k: f64) -> bool {
        self.mean.abs() <= k * self.stderr
    }
}

/// Componentwise statistics of complex samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexStats {
    pub re: Stats,
    pub im: Stats,
    /// `E |X - E X|^2`, the sum of the componentwise variances.
    pub variance: f64,
}

impl ComplexStats {
    pub fn of(values: &[C64]) -> Self {
        let re: Vec<f64> = values.iter().map(|v| v.re).collect();
        let im: Vec<f64> = values.iter().map(|v| v.im).collect();
        let (re, im) = (Stats::of(&re), Stats::of(&im));
        Self { re, im, variance: re.variance + im.variance }
    }

    pub fn mean(&self) -> C64 {
        C64::new(self.re.mean, self.im.mean)
    }

    pub fn mean_within(&self, k: f64) -> bool {
        self.re.mean_within(k) && self.im.mean_within(k)
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares line through `(j, log2 value)`; `slope` is the negated
/// regression slope, so positive means decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

pub fn fit_decay(rows: &[(f64, f64)]) -> Result<DecayFit> {
    if rows.len() < 3 {
        return Err(Error::Argument(format!("decay fit needs at least 3 points, got {}", rows.len())));
    }
    if let Some(bad) = rows.iter().find(|r| !(r.1 > 0.0) || !r.1.is_finite()) {
        return Err(Error::Argument(format!("decay fit needs positive values, got {} at j = {}", bad.1, bad.0)));
    }
    let n = rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.log2()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("decay fit needs distinct abscissae".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let beta = sxy / sxx;
    let intercept = my - beta * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - beta * x).powi(2)).sum();
    let r2 = if ss_tot <= 1e-300 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(DecayFit { slope: -beta, intercept, r2, points: rows.len() })
}

/// `true` if every entry is strictly below its predecessor.
pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fit_examples() {
        let exact: Vec<(f64, f64)> = (3..7).map(|j| (j as f64, 0.5f64.powi(j))).collect();
        let f = fit_decay(&exact).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);

        let flat: Vec<(f64, f64)> = (0..5).map(|j| (j as f64, 3.0)).collect();
        assert!(fit_decay(&flat).unwrap().slope.abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noisy: Vec<(f64, f64)> = (0..8)
            .map(|j| (j as f64, 0.25f64.powi(j) * (1.0 + 0.01 * (2.0 * rng.random::<f64>() - 1.0))))
            .collect();
        assert!((fit_decay(&noisy).unwrap().slope - 2.0).abs() < 0.05);

        assert!(matches!(fit_decay(&[(0.0, 1.0), (1.0, 0.0), (2.0, 1.0)]), Err(Error::Argument(_))));
        assert!(fit_decay(&exact[..2]).is_err());
    }

    #[test]
    fn stats_examples() {
        let s = Stats::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
        assert!((s.stderr - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let c = ComplexStats::of(&[C64::new(1.0, 1.0), C64::new(-1.0, 3.0)]);
        assert_eq!(c.mean(), C64::new(0.0, 2.0));
        assert!((c.variance - 4.0).abs() < 1e-15);
        assert!(strictly_decreasing(&[3.0, 2.0, 1.0]) && !strictly_decreasing(&[3.0, 3.0]));
    }

    #[test]
    fn stats_ignore_sample_order() {
        let v = [0.3, -1.2, 4.5, 2.25, 0.0];
        let mut w = v;
        w.reverse();
        assert_eq!(Stats::of(&v), Stats::of(&w));
    }
}
