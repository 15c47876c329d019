//! Small statistical helpers for Monte Carlo estimates.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Proportion estimate with a normal-approximation half-width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Self {
        Proportion { successes, trials }
    }

    pub fn p_hat(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    /// Standard error of `p_hat`.
    pub fn sigma(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = self.p_hat();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// 95% half-width, clipped so that `p_hat +- ci` stays inside [0, 1].
    pub fn ci95(&self) -> f64 {
        let p = self.p_hat();
        (Z95 * self.sigma()).min(p.max(1.0 - p))
    }

    /// `|p_hat - p| / sigma` using the hypothesised `p` for the spread.
    pub fn z_score(&self, p: f64) -> f64 {
        let sd = (p * (1.0 - p) / self.trials as f64).sqrt();
        if sd == 0.0 {
            if (self.p_hat() - p).abs() == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.p_hat() - p).abs() / sd
        }
    }
}

/// Z statistic of `a - b` for two independent proportions (positive when `a > b`).
pub fn diff_z(a: &Proportion, b: &Proportion) -> f64 {
    let se = (a.sigma().powi(2) + b.sigma().powi(2)).sqrt();
    let d = a.p_hat() - b.p_hat();
    if se == 0.0 {
        if d == 0.0 {
            0.0
        } else {
            d.signum() * f64::INFINITY
        }
    } else {
        d / se
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
    /// Number of categories after pooling sparse ones.
    pub cells: usize,
}

/// Two-sample chi-square homogeneity test on category counts. Categories
/// whose expected count falls below `min_expected` in either sample are
/// pooled into one cell.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64], min_expected: f64) -> ChiSquareResult {
    assert_eq!(a.len(), b.len());
    let na: f64 = a.iter().sum::<u64>() as f64;
    let nb: f64 = b.iter().sum::<u64>() as f64;
    let n = na + nb;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let tot = (x + y) as f64;
        if tot == 0.0 {
            continue;
        }
        if tot * na.min(nb) / n < min_expected {
            pooled.0 += x as f64;
            pooled.1 += y as f64;
        } else {
            cells.push((x as f64, y as f64));
        }
    }
    if pooled.0 + pooled.1 > 0.0 {
        cells.push(pooled);
    }
    let mut stat = 0.0;
    for &(x, y) in &cells {
        let tot = x + y;
        let ea = tot * na / n;
        let eb = tot * nb / n;
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let dof = cells.len().saturating_sub(1) as f64;
    let p_value = if dof == 0.0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof).expect("dof > 0").cdf(stat)
    };
    ChiSquareResult {
        statistic: stat,
        dof,
        p_value,
        cells: cells.len(),
    }
}

/// Median of a sample (mean of the middle pair for even sizes).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
