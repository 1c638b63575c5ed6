//! Small statistics toolkit: exact (order-independent) accumulators,
//! sample moments with standard errors, regression slope, energy distance.

use serde::{Deserialize, Serialize};

const FIXED_SCALE: f64 = 18_446_744_073_709_551_616.0; // 2^64

/// Fixed-point accumulator with 2^-64 resolution. Integer addition makes
/// merging associative and commutative bit for bit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExactSum(i128);

impl ExactSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        self.0 = self.0.wrapping_add((x * FIXED_SCALE).round() as i128);
    }

    #[inline]
    pub fn merge(&mut self, other: &ExactSum) {
        self.0 = self.0.wrapping_add(other.0);
    }

    pub fn value(&self) -> f64 {
        self.0 as f64 / FIXED_SCALE
    }
}

/// Sample mean and its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (0 for fewer than two samples).
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn mean_se(xs: &[f64]) -> MeanSe {
    MeanSe {
        mean: mean(xs),
        se: (variance(xs) / xs.len() as f64).sqrt(),
    }
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Jackknife standard error of `stat(column means)` over the rows of
/// `samples` (one row per independent realization).
pub fn jackknife<F: Fn(&[f64]) -> f64>(samples: &[Vec<f64>], stat: F) -> MeanSe {
    let n = samples.len();
    let k = samples.first().map_or(0, Vec::len);
    let mut totals = vec![0.0; k];
    for row in samples {
        for (t, v) in totals.iter_mut().zip(row) {
            *t += v;
        }
    }
    let full: Vec<f64> = totals.iter().map(|t| t / n as f64).collect();
    let estimate = stat(&full);
    if n < 2 {
        return MeanSe {
            mean: estimate,
            se: f64::NAN,
        };
    }
    let mut buf = vec![0.0; k];
    let loo: Vec<f64> = samples
        .iter()
        .map(|row| {
            for ((b, t), v) in buf.iter_mut().zip(&totals).zip(row) {
                *b = (t - v) / (n - 1) as f64;
            }
            stat(&buf)
        })
        .collect();
    let m = mean(&loo);
    let var = loo.iter().map(|v| (v - m) * (v - m)).sum::<f64>() * (n - 1) as f64 / n as f64;
    MeanSe {
        mean: estimate,
        se: var.sqrt(),
    }
}

/// `Σ_{i,j} |a_i - b_j|` in `O((n+m) log(n+m))`.
fn cross_abs_sum(a: &[f64], b: &[f64]) -> f64 {
    let mut sb = b.to_vec();
    sb.sort_by(f64::total_cmp);
    let mut prefix = Vec::with_capacity(sb.len() + 1);
    prefix.push(0.0);
    for &v in &sb {
        prefix.push(prefix.last().unwrap() + v);
    }
    let total = *prefix.last().unwrap();
    let m = sb.len();
    a.iter()
        .map(|&x| {
            let k = sb.partition_point(|&v| v < x);
            let below = x * k as f64 - prefix[k];
            let above = (total - prefix[k]) - x * (m - k) as f64;
            below + above
        })
        .sum()
}

/// Energy distance `2E|X-Y| - E|X-X'| - E|Y-Y'|` between two 1-D samples
/// (V-statistic form, so the value is non-negative).
pub fn energy_distance(x: &[f64], y: &[f64]) -> f64 {
    let (n, m) = (x.len() as f64, y.len() as f64);
    let xy = cross_abs_sum(x, y) / (n * m);
    let xx = cross_abs_sum(x, x) / (n * n);
    let yy = cross_abs_sum(y, y) / (m * m);
    (2.0 * xy - xx - yy).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn slope_of_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 * i as f64 - 1.0)).collect();
        assert!((ols_slope(&pts) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn energy_distance_brute_force() {
        let x: [f64; 4] = [0.1, -0.4, 2.0, 0.7];
        let y: [f64; 3] = [1.0, 0.0, -1.5];
        let mut xy = 0.0;
        for a in &x {
            for b in &y {
                xy += (a - b).abs();
            }
        }
        let mut xx = 0.0;
        for a in &x {
            for b in &x {
                xx += (a - b).abs();
            }
        }
        let mut yy = 0.0;
        for a in &y {
            for b in &y {
                yy += (a - b).abs();
            }
        }
        let expected = 2.0 * xy / 12.0 - xx / 16.0 - yy / 9.0;
        assert!((energy_distance(&x, &y) - expected).abs() < 1e-14);
        assert_eq!(energy_distance(&x, &x), 0.0);
    }

    #[test]
    fn jackknife_of_mean_is_standard_error() {
        let rows: Vec<Vec<f64>> = [1.0, 4.0, 2.0, 8.0, 5.0].iter().map(|v| vec![*v]).collect();
        let flat: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let jk = jackknife(&rows, |m| m[0]);
        let direct = mean_se(&flat);
        assert!((jk.mean - direct.mean).abs() < 1e-14);
        assert!((jk.se - direct.se).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn exact_sum_order_independent(xs in prop::collection::vec(-1e3f64..1e3, 1..50), split in 0usize..50) {
            let split = split.min(xs.len());
            let mut all = ExactSum::default();
            for &x in &xs { all.add(x); }
            let mut a = ExactSum::default();
            let mut b = ExactSum::default();
            for &x in &xs[..split] { a.add(x); }
            for &x in xs[split..].iter().rev() { b.add(x); }
            let mut ba = b;
            ba.merge(&a);
            a.merge(&b);
            prop_assert_eq!(a, all);
            prop_assert_eq!(ba, all);
        }
    }
}
