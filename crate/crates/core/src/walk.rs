//! Random-walk quantities tied to a kernel: the escape constant `β_d`,
//! exact and sampled moments of the continuous-time `D`-walk.

use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::lattice::{Kernel, KernelVariant, Site};
use crate::rng::StreamKey;

/// `e^{-x} I_0(x)` for `x ≥ 0`.
pub fn scaled_bessel_i0(x: f64) -> f64 {
    if x <= 40.0 {
        let q = x * x / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-18 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // asymptotic series; terms are ((2k-1)!!)^2 / (k! 8^k x^k)
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..12 {
            let kf = k as f64;
            term *= (2.0 * kf - 1.0).powi(2) / (kf * 8.0 * x);
            sum += term;
        }
        sum / (2.0 * std::f64::consts::PI * x).sqrt()
    }
}

/// Expected total time at the origin, `G = ∫_0^∞ P(W_t = o) dt`, for the
/// rate-one nearest-neighbour walk in `d ≥ 3`.
pub fn green_at_origin_nn(d: usize) -> Result<f64> {
    if d < 3 {
        return Err(Error::Config(format!("the walk is recurrent in d = {d}")));
    }
    let df = d as f64;
    let f = |t: f64| scaled_bessel_i0(t / df).powi(d as i32);
    // Simpson in u = ln t over [ln t0, ln t1]
    let (t0, t1) = (1e-10f64, 1e7f64);
    let (a, b) = (t0.ln(), t1.ln());
    let n = 40_000;
    let h = (b - a) / n as f64;
    let mut sum = 0.0;
    for i in 0..=n {
        let u = a + i as f64 * h;
        let t = u.exp();
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(t) * t;
    }
    let body = sum * h / 3.0;
    // tail: (2πt/d)^{-d/2} (1 + d²/(8t))
    let c = (2.0 * std::f64::consts::PI / df).powf(-df / 2.0);
    let e = df / 2.0 - 1.0;
    let tail = c * (t1.powf(-e) / e + df * df / 8.0 * t1.powf(-e - 1.0) / (e + 1.0));
    Ok(t0 + body + tail)
}

/// `β_d`: the escape probability for `d ≥ 3`, and `2πσ²` for `d = 2`.
///
/// In `d ≥ 3` only nearest-neighbour kernels are supported.
pub fn beta_d(kernel: &Kernel) -> Result<f64> {
    match kernel.dim() {
        2 => Ok(2.0 * std::f64::consts::PI * kernel.sigma2_f64()),
        d if d >= 3 => {
            if kernel.variant() != KernelVariant::NearestNeighbor {
                return Err(Error::Guard("escape probability is only available for nearest-neighbour kernels".into()));
            }
            Ok(1.0 / green_at_origin_nn(d)?)
        }
        d => Err(Error::Config(format!("β_d is undefined in d = {d}"))),
    }
}

/// Coefficients `c_1..c_k` with `E|S_n|^{2k} = Σ_j c_j n^j` for the
/// discrete `D`-walk, found by exact enumeration for `n ≤ k`.
pub fn step_sum_moment_poly(kernel: &Kernel, k: usize) -> Vec<f64> {
    let mut dist: rustc_hash::FxHashMap<Site, f64> = Default::default();
    dist.insert(Site::ORIGIN, 1.0);
    let w = kernel.max_weight_f64();
    let mut values = vec![0.0];
    for _ in 1..=k {
        let mut next: rustc_hash::FxHashMap<Site, f64> = Default::default();
        for (x, p) in &dist {
            for y in kernel.support() {
                *next.entry(x.add(y)).or_default() += p * w;
            }
        }
        dist = next;
        values.push(dist.iter().map(|(x, p)| p * (x.norm2() as f64).powi(k as i32)).sum());
    }
    // solve Σ_j c_j n^j = values[n], n = 1..k (Vandermonde, no constant term)
    let mut a: Vec<Vec<f64>> = (1..=k).map(|n| (1..=k).map(|j| (n as f64).powi(j as i32)).collect()).collect();
    let mut b: Vec<f64> = values[1..].to_vec();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in 0..k {
            if row != col {
                let f = a[row][col] / a[col][col];
                for c in col..k {
                    a[row][c] -= f * a[col][c];
                }
                b[row] -= f * b[col];
            }
        }
    }
    (0..k).map(|i| b[i] / a[i][i]).collect()
}

/// Raw Poisson moments `E[N^j]` for `j = 0..=k`, via Touchard polynomials.
fn poisson_moments(s: f64, k: usize) -> Vec<f64> {
    // Stirling numbers of the second kind
    let mut st = vec![vec![0.0f64; k + 1]; k + 1];
    st[0][0] = 1.0;
    for n in 1..=k {
        for j in 1..=n {
            st[n][j] = j as f64 * st[n - 1][j] + st[n - 1][j - 1];
        }
    }
    (0..=k).map(|n| (0..=n).map(|j| st[n][j] * s.powi(j as i32)).sum()).collect()
}

/// `E|W_s|^p` for the rate-one continuous-time `D`-walk, `p` even.
pub fn walk_moment_exact(kernel: &Kernel, s: f64, p: u32) -> Result<f64> {
    if p % 2 != 0 || p == 0 {
        return Err(Error::Config(format!("moment order must be a positive even integer, got {p}")));
    }
    let k = (p / 2) as usize;
    let c = step_sum_moment_poly(kernel, k);
    let m = poisson_moments(s, k);
    Ok(c.iter().enumerate().map(|(j, cj)| cj * m[j + 1]).sum())
}

/// Monte Carlo `E|W_s|^p` and its standard error.
pub fn walk_moment_mc(kernel: &Kernel, s: f64, p: u32, replicas: u64, key: StreamKey) -> (f64, f64) {
    let vals = crate::rng::replica_farm(key, replicas, |_, k| {
        let mut rng = k.rng();
        let n = if s > 0.0 { Poisson::new(s).unwrap().sample(&mut rng) as u64 } else { 0 };
        let mut x = Site::ORIGIN;
        for _ in 0..n {
            x = x.add(&kernel.sample(&mut rng));
        }
        (x.norm2() as f64).powf(p as f64 / 2.0)
    });
    crate::estimators::mean_se(&vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_branches_agree() {
        // both branches near the switch point
        let a = scaled_bessel_i0(40.0);
        let series = {
            let mut term = 1.0f64;
            let mut sum = 1.0f64;
            for k in 1..200 {
                term *= 400.0 / (k * k) as f64;
                sum += term;
            }
            sum * (-40.0f64).exp()
        };
        assert!((a - series).abs() < 1e-14);
        let asym = scaled_bessel_i0(40.000001);
        assert!((asym - a).abs() / a < 1e-6);
        assert!((scaled_bessel_i0(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn green_d3_matches_dynamic_programming() {
        // P(S_n = o) summed over n for the discrete walk, extrapolated in 1/√N
        let partial = |nmax: usize| -> f64 {
            let r = nmax / 2 + 1;
            let side = 2 * r + 1;
            let idx = |x: usize, y: usize, z: usize| (x * side + y) * side + z;
            let mut cur = vec![0.0f64; side * side * side];
            cur[idx(r, r, r)] = 1.0;
            let mut total = 1.0;
            for n in 1..=nmax {
                let reach = n.min(nmax - n).min(r - 1);
                let mut next = vec![0.0f64; cur.len()];
                for x in r - reach..=r + reach {
                    for y in r - reach..=r + reach {
                        for z in r - reach..=r + reach {
                            let v = cur[idx(x + 1, y, z)] + cur[idx(x - 1, y, z)] + cur[idx(x, y + 1, z)]
                                + cur[idx(x, y - 1, z)] + cur[idx(x, y, z + 1)] + cur[idx(x, y, z - 1)];
                            next[idx(x, y, z)] = v / 6.0;
                        }
                    }
                }
                cur = next;
                total += cur[idx(r, r, r)];
            }
            total
        };
        let (n1, n2) = (120usize, 240usize);
        let (g1, g2) = (partial(n1), partial(n2));
        let (a1, a2) = ((n1 as f64).sqrt(), (n2 as f64).sqrt());
        let extrapolated = (a2 * g2 - a1 * g1) / (a2 - a1);
        let g = green_at_origin_nn(3).unwrap();
        assert!((g - extrapolated).abs() < 2e-3, "{g} vs {extrapolated}");
        assert!((g - 1.516_386_059_151_978).abs() < 1e-9, "{g}");
    }

    #[test]
    fn beta_two_dimensional() {
        let k = Kernel::nearest_neighbor(2).unwrap();
        assert!((beta_d(&k).unwrap() - std::f64::consts::PI).abs() < 1e-15);
        assert!(beta_d(&Kernel::nearest_neighbor(1).unwrap()).is_err());
        assert!(matches!(beta_d(&Kernel::spread_out(3, 1).unwrap()), Err(Error::Guard(_))));
    }

    #[test]
    fn moment_polynomial_matches_gaussian_leading_term() {
        // d=3 NN: E|S_n|^2 = n, E|S_n|^4 = (5/3)n^2 - (2/3)n
        let k = Kernel::nearest_neighbor(3).unwrap();
        let c1 = step_sum_moment_poly(&k, 1);
        assert!((c1[0] - 1.0).abs() < 1e-12);
        let c2 = step_sum_moment_poly(&k, 2);
        assert!((c2[1] - 5.0 / 3.0).abs() < 1e-12 && (c2[0] + 2.0 / 3.0).abs() < 1e-12, "{c2:?}");
        let c3 = step_sum_moment_poly(&k, 3);
        assert!((c3[2] - 105.0 / 27.0).abs() < 1e-10, "{c3:?}");
    }

    #[test]
    fn moment_monte_carlo_agrees() {
        let k = Kernel::nearest_neighbor(3).unwrap();
        let exact = walk_moment_exact(&k, 4.0, 6).unwrap();
        let (m, se) = walk_moment_mc(&k, 4.0, 6, 200_000, StreamKey::new(5));
        assert!((m - exact).abs() < 4.0 * se, "{m} ± {se} vs {exact}");
    }
}
