//! Binning statistics for correlated Monte Carlo series.

use serde::Serialize;

/// One binning level: the series coarse-grained into `n_bins` bins of
/// `bin_size` raw samples.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BinLevel {
    pub bin_size: usize,
    pub n_bins: usize,
    pub stderr: f64,
}

/// Running statistics with an autocorrelation-aware standard error.
///
/// The standard error is the largest binned estimate over all levels with
/// at least 64 bins; for correlated data the binned error grows with the
/// bin size until the bins decorrelate, so the plateau value is the honest
/// one and the naive level-0 value underestimates it.
#[derive(Debug, Clone, Serialize)]
pub struct SampleStats {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
    pub bins: Vec<BinLevel>,
}

impl SampleStats {
    pub fn from_series(series: &[f64]) -> SampleStats {
        let count = series.len();
        if count == 0 {
            return SampleStats {
                count: 0,
                mean: f64::NAN,
                variance: f64::NAN,
                stderr: f64::NAN,
                bins: Vec::new(),
            };
        }
        let mean = series.iter().sum::<f64>() / count as f64;
        let variance = if count > 1 {
            series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64
        } else {
            0.0
        };

        let mut bins = Vec::new();
        let mut level: Vec<f64> = series.to_vec();
        let mut bin_size = 1usize;
        while level.len() >= 64 {
            let n = level.len();
            let m = level.iter().sum::<f64>() / n as f64;
            let var = level.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            bins.push(BinLevel {
                bin_size,
                n_bins: n,
                stderr: (var / n as f64).sqrt(),
            });
            let half = n / 2;
            let mut next = Vec::with_capacity(half);
            for k in 0..half {
                next.push(0.5 * (level[2 * k] + level[2 * k + 1]));
            }
            level = next;
            bin_size *= 2;
        }
        let stderr = bins
            .iter()
            .map(|b| b.stderr)
            .fold(if count > 1 { (variance / count as f64).sqrt() } else { f64::NAN }, f64::max);
        SampleStats {
            count,
            mean,
            variance,
            stderr,
            bins,
        }
    }

    /// Merge independent chains: weighted mean, quadrature-combined errors.
    pub fn merge(parts: &[&SampleStats]) -> SampleStats {
        let total: usize = parts.iter().map(|p| p.count).sum();
        if total == 0 {
            return SampleStats::from_series(&[]);
        }
        let mean = parts
            .iter()
            .map(|p| p.mean * p.count as f64)
            .sum::<f64>()
            / total as f64;
        let stderr = parts
            .iter()
            .map(|p| {
                let w = p.count as f64 / total as f64;
                (w * p.stderr).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        let variance = parts
            .iter()
            .map(|p| (p.count.saturating_sub(1)) as f64 * p.variance)
            .sum::<f64>()
            / (total.saturating_sub(parts.len())).max(1) as f64;
        SampleStats {
            count: total,
            mean,
            variance,
            stderr,
            bins: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn iid_series_stderr_matches_naive() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let series: Vec<f64> = (0..8192).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = SampleStats::from_series(&series);
        let naive = (s.variance / s.count as f64).sqrt();
        // independent samples: binning should not inflate the error much
        assert!(s.stderr < 1.35 * naive, "{} vs {}", s.stderr, naive);
        assert!(s.stderr >= naive * 0.99);
    }

    #[test]
    fn correlated_series_stderr_grows_beyond_naive() {
        // AR(1) with strong correlation: the plateau error is well above
        // the naive estimate
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let rho = 0.95f64;
        let mut x = 0.0;
        let series: Vec<f64> = (0..65536)
            .map(|_| {
                x = rho * x + rng.random_range(-1.0..1.0);
                x
            })
            .collect();
        let s = SampleStats::from_series(&series);
        let naive = (s.variance / s.count as f64).sqrt();
        assert!(s.stderr > 3.0 * naive, "{} vs naive {}", s.stderr, naive);
        // bin table grows then plateaus: last level within noise of max
        let last = s.bins.last().unwrap().stderr;
        assert!(last > 0.7 * s.stderr);
    }

    #[test]
    fn merge_combines_counts_and_errors() {
        let a = SampleStats::from_series(&vec![1.0; 128]);
        let b = SampleStats::from_series(&vec![3.0; 128]);
        let m = SampleStats::merge(&[&a, &b]);
        assert_eq!(m.count, 256);
        assert!((m.mean - 2.0).abs() < 1e-14);
    }
}
