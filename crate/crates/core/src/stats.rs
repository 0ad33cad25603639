//! Small shared statistics helpers: moments, autocorrelations, chi-square
//! tail probabilities, a dense linear solver and a Kolmogorov-Smirnov
//! uniformity check used by diagnostics and tests.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with the n-1 denominator.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn std_dev(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

/// Central moment of order `k` with the 1/n denominator.
pub fn central_moment(x: &[f64], k: u32) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(k as i32)).sum::<f64>() / x.len() as f64
}

/// Sample autocorrelations at lags 1..=max_lag (full-sample denominator).
pub fn autocorrelations(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let denom: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (1..=max_lag)
        .map(|k| {
            let num: f64 = (k..n).map(|t| (x[t] - m) * (x[t - k] - m)).sum();
            num / denom
        })
        .collect()
}

/// Upper-tail probability of a chi-square distribution with `df` degrees
/// of freedom.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df).expect("positive degrees of freedom");
    (1.0 - dist.cdf(x)).clamp(0.0, 1.0)
}

/// Solves `a * x = b` by Gaussian elimination with partial pivoting.
/// Intended for the small systems arising in lag regressions.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-12 {
            return Err(Error::Degenerate("singular regression matrix".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

/// Kolmogorov-Smirnov statistic of a sample against the uniform
/// distribution on (0,1).
pub fn ks_uniform_statistic(sample: &[f64]) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        let hi = (i as f64 + 1.0) / n - u;
        let lo = u - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}

/// Asymptotic Kolmogorov p-value for the KS statistic of an n-sample
/// against U(0,1).
pub fn ks_uniform_pvalue(sample: &[f64]) -> f64 {
    let n = sample.len() as f64;
    let d = ks_uniform_statistic(sample);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-1.0f64).powi(k + 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Deterministic substream RNG: the same `(seed, stream)` pair always
/// yields the same generator, independent of call order elsewhere.
pub fn substream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 step, used to derive independent per-task seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_on_linear_ramp() {
        let x: Vec<f64> = (1..=8).map(|v| v as f64).collect();
        assert!((mean(&x) - 4.5).abs() < 1e-12);
        assert!(central_moment(&x, 3).abs() < 1e-12);
    }

    #[test]
    fn solver_recovers_known_solution() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let b = vec![5.0, 10.0];
        let x = solve_linear(a, b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn solver_rejects_singular() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(solve_linear(a, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn substreams_are_reproducible() {
        use rand::Rng;
        let mut a = substream_rng(7, 3);
        let mut b = substream_rng(7, 3);
        let mut c = substream_rng(7, 4);
        let xa: f64 = a.random();
        let xb: f64 = b.random();
        let xc: f64 = c.random();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }
}
