//! Small statistical toolkit: means, Wilson intervals, two-sample KS.

use rand::Rng;

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Proportion, its binomial standard error, and the 95% Wilson interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Proportion {
    pub hits: u64,
    pub trials: u64,
    pub p: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn proportion(hits: u64, trials: u64) -> Proportion {
    let n = trials as f64;
    let p = if trials == 0 { f64::NAN } else { hits as f64 / n };
    let z = 1.959_963_984_540_054;
    let (lo, hi) = if trials == 0 {
        (0.0, 1.0)
    } else {
        let denom = 1.0 + z * z / n;
        let centre = (p + z * z / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
        ((centre - half).max(0.0), (centre + half).min(1.0))
    };
    Proportion { hits, trials, p, se: (p * (1.0 - p) / n).sqrt(), lo, hi }
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    best
}

/// Upper `q` quantile of the KS statistic between two disjoint resamples of
/// `pool` with sizes `na` and `nb`, drawn with replacement.
pub fn ks_resampling_quantile<R: Rng + ?Sized>(pool: &[f64], na: usize, nb: usize, rounds: usize, q: f64, rng: &mut R) -> f64 {
    let mut stats: Vec<f64> = (0..rounds)
        .map(|_| {
            let a: Vec<f64> = (0..na).map(|_| pool[rng.random_range(0..pool.len())]).collect();
            let b: Vec<f64> = (0..nb).map(|_| pool[rng.random_range(0..pool.len())]).collect();
            ks_statistic(&a, &b)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let k = ((q * rounds as f64).ceil() as usize).clamp(1, rounds) - 1;
    stats[k]
}

/// Quantile by linear interpolation on sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

/// Ordinary least-squares slope and its standard error.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let se = if x.len() > 2 { (resid / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (slope, se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn ks_known_values() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_statistic(&[1.0, 3.0], &[2.0, 4.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn wilson_interval_contains_estimate() {
        let p = proportion(30, 100);
        assert!(p.lo < 0.3 && 0.3 < p.hi);
        let z = proportion(0, 50);
        assert!(z.lo < 1e-12);
        assert!(z.hi > 0.0);
    }

    #[test]
    fn same_law_resampling_quantile_is_small() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let pool: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let q = ks_resampling_quantile(&pool, 500, 500, 200, 0.95, &mut rng);
        // asymptotic 95% critical value 1.358 * sqrt(2/500)
        assert!((q - 0.0859).abs() < 0.02, "{q}");
    }

    #[test]
    fn slope_of_line() {
        let (s, _) = ols_slope(&[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 5.0, 7.0]);
        assert!((s - 2.0).abs() < 1e-12);
    }
}
