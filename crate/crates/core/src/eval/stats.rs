//! Summary statistics and the two-sided Mann–Whitney U test.

use serde::{Deserialize, Serialize};

/// z for a two-sided 95% normal interval.
const Z95: f64 = 1.959_963_984_540_054;

/// Confidence intervals are only reported from this many samples upward.
pub const MIN_CI_SAMPLES: usize = 30;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Normal-approximation 95% interval for the mean, or `None` below
/// [`MIN_CI_SAMPLES`].
pub fn mean_ci95(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < MIN_CI_SAMPLES {
        return None;
    }
    let m = mean(xs);
    let half = Z95 * std_dev(xs) / (xs.len() as f64).sqrt();
    Some((m - half, m + half))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    /// Continuity-corrected normal score; 0 when the variance vanishes.
    pub z: f64,
    pub p_value: f64,
}

/// Average ranks (1-based) of `values`, ties sharing their mean rank. Also
/// returns the tie correction term `sum(t^3 - t)`.
fn average_ranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (ranks, ties)
}

/// Two-sided Mann–Whitney U test, normal approximation with tie and
/// continuity corrections. Empty samples or zero variance give `p = 1`.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> MannWhitney {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    if a.is_empty() || b.is_empty() {
        return MannWhitney {
            u: 0.0,
            z: 0.0,
            p_value: 1.0,
        };
    }
    let combined: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = average_ranks(&combined);
    let r1: f64 = ranks[..a.len()].iter().sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;
    let n = n1 + n2;
    let mu = n1 * n2 / 2.0;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if !(var > 0.0) {
        return MannWhitney { u, z: 0.0, p_value: 1.0 };
    }
    let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
    let p = libm::erfc(z / std::f64::consts::SQRT_2).min(1.0);
    MannWhitney {
        u,
        z: z.copysign(u - mu),
        p_value: p,
    }
}
