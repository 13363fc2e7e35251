//! Rank-normalised split-R̂ and bulk effective sample size.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::SamplerError;

/// A convergence statistic; `degenerate` marks parameters that never moved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub value: f64,
    pub degenerate: bool,
}

fn check(chains: &[&[f64]]) -> Result<(), SamplerError> {
    let n = chains.first().map(|c| c.len()).unwrap_or(0);
    if chains.len() < 2 || n < 4 || chains.iter().any(|c| c.len() != n) {
        return Err(SamplerError::TooFewDraws { chains: 2, draws: 4 });
    }
    Ok(())
}

fn is_constant(chains: &[&[f64]]) -> bool {
    let first = chains[0][0];
    chains.iter().all(|c| c.iter().all(|&v| v == first))
}

/// Halves each chain, dropping the middle draw of odd-length chains.
fn split(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    out
}

/// Pooled average ranks mapped through `Φ⁻¹((r - 3/8) / (S + 1/4))`.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut all: Vec<(f64, usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, xs)| xs.iter().enumerate().map(move |(i, &x)| (x, c, i)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let s = all.len() as f64;
    let normal = Normal::standard();
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // ranks are 1-based; ties share the average
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let z = normal.inverse_cdf((rank - 0.375) / (s + 0.25));
        for &(_, c, k) in &all[i..=j] {
            out[c][k] = z;
        }
        i = j + 1;
    }
    out
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Classic potential scale reduction on already-split chains.
fn basic_rhat(chains: &[Vec<f64>]) -> f64 {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = mean(&chains.iter().map(|c| sample_var(c)).collect::<Vec<_>>());
    let b = n * sample_var(&means);
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

/// Rank-normalised split-R̂: the larger of the bulk and folded versions.
pub fn rhat(chains: &[&[f64]]) -> Result<Diagnostic, SamplerError> {
    check(chains)?;
    if is_constant(chains) {
        return Ok(Diagnostic {
            value: 1.0,
            degenerate: true,
        });
    }
    let halves = split(chains);
    let bulk = basic_rhat(&rank_normalize(&halves));
    let mut pooled: Vec<f64> = halves.iter().flatten().copied().collect();
    pooled.sort_by(f64::total_cmp);
    let med = quantile_sorted(&pooled, 0.5);
    let folded: Vec<Vec<f64>> = halves
        .iter()
        .map(|c| c.iter().map(|x| (x - med).abs()).collect())
        .collect();
    let tail = basic_rhat(&rank_normalize(&folded));
    let value = bulk.max(tail);
    Ok(Diagnostic {
        value: if value.is_nan() { f64::INFINITY } else { value },
        degenerate: false,
    })
}

/// Type-7 quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn autocov(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n - lag {
        s += (x[i] - m) * (x[i + lag] - m);
    }
    s / n as f64
}

/// Multi-chain ESS with Geyer's initial monotone sequence.
fn ess_raw(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let acov_mean = |lag: usize| -> f64 {
        chains
            .iter()
            .zip(&means)
            .map(|(c, &mu)| autocov(c, mu, lag))
            .sum::<f64>()
            / m as f64
    };
    let nf = n as f64;
    let mean_var = acov_mean(0) * nf / (nf - 1.0);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += sample_var(&means);
    }
    let mut rho = vec![0.0; n + 1];
    let mut even = 1.0;
    rho[0] = even;
    let mut odd = 1.0 - (mean_var - acov_mean(1)) / var_plus;
    rho[1] = odd;
    let mut t = 0;
    while t + 5 < n && !(even + odd).is_nan() && even + odd > 0.0 {
        t += 2;
        even = 1.0 - (mean_var - acov_mean(t)) / var_plus;
        odd = 1.0 - (mean_var - acov_mean(t + 1)) / var_plus;
        if even + odd >= 0.0 {
            rho[t] = even;
            rho[t + 1] = odd;
        }
    }
    let max_t = t;
    if even > 0.0 {
        rho[max_t] = even;
    }
    let mut t = 0;
    while t + 4 <= max_t {
        t += 2;
        if rho[t] + rho[t + 1] > rho[t - 2] + rho[t - 1] {
            rho[t] = (rho[t - 2] + rho[t - 1]) / 2.0;
            rho[t + 1] = rho[t];
        }
    }
    let total = (m * n) as f64;
    let tau = -1.0 + 2.0 * rho[..max_t].iter().sum::<f64>() + rho[max_t];
    let tau = tau.max(1.0 / total.log10());
    total / tau
}

/// Bulk effective sample size on rank-normalised split chains.
pub fn ess_bulk(chains: &[&[f64]]) -> Result<Diagnostic, SamplerError> {
    check(chains)?;
    if is_constant(chains) {
        return Ok(Diagnostic {
            value: f64::NAN,
            degenerate: true,
        });
    }
    Ok(Diagnostic {
        value: ess_raw(&rank_normalize(&split(chains))),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z + shift
            })
            .collect()
    }

    fn ar1(seed: u64, n: usize, rho: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: f64 = StandardNormal.sample(&mut rng);
        let s = (1.0 - rho * rho).sqrt();
        (0..n)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = rho * x + s * e;
                x
            })
            .collect()
    }

    #[test]
    fn same_distribution_gives_rhat_near_one() {
        let a = normals(1, 1000, 0.0);
        let b = normals(2, 1000, 0.0);
        let r = rhat(&[&a, &b]).unwrap();
        assert!((0.99..=1.05).contains(&r.value), "{}", r.value);
    }

    #[test]
    fn separated_chains_give_large_rhat() {
        let a = normals(1, 500, 0.0);
        let b = normals(2, 500, 10.0);
        let classic = basic_rhat(&split(&[&a, &b]));
        assert!(classic > 2.0, "{classic}");
        // ranks cap the statistic once the chains stop overlapping
        let r = rhat(&[&a, &b]).unwrap().value;
        assert!(r > 1.5, "{r}");
    }

    #[test]
    fn constant_chains_are_degenerate() {
        let a = vec![3.0; 50];
        let r = rhat(&[&a, &a]).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(r.degenerate);
        assert!(ess_bulk(&[&a, &a]).unwrap().degenerate);
    }

    #[test]
    fn too_few_draws() {
        let a = vec![1.0, 2.0, 3.0];
        assert!(rhat(&[&a, &a]).is_err());
        let b = normals(1, 10, 0.0);
        assert!(rhat(&[&b]).is_err());
    }

    #[test]
    fn iid_ess_close_to_draw_count() {
        let chains: Vec<Vec<f64>> = (0..4).map(|s| normals(10 + s, 1000, 0.0)).collect();
        let refs: Vec<&[f64]> = chains.iter().map(|c| c.as_slice()).collect();
        let e = ess_bulk(&refs).unwrap().value;
        assert!((e - 4000.0).abs() <= 0.2 * 4000.0, "{e}");
    }

    #[test]
    fn ar1_ess_matches_theory() {
        let rho = 0.9;
        let chains: Vec<Vec<f64>> = (0..4).map(|s| ar1(20 + s, 5000, rho)).collect();
        let refs: Vec<&[f64]> = chains.iter().map(|c| c.as_slice()).collect();
        let e = ess_bulk(&refs).unwrap().value;
        let theory = 20000.0 * (1.0 - rho) / (1.0 + rho);
        assert!((e - theory).abs() <= 0.3 * theory, "{e} vs {theory}");
    }

    #[test]
    fn chain_order_does_not_matter() {
        let chains: Vec<Vec<f64>> = (0..4).map(|s| ar1(30 + s, 400, 0.5)).collect();
        let fwd: Vec<&[f64]> = chains.iter().map(|c| c.as_slice()).collect();
        let rev: Vec<&[f64]> = chains.iter().rev().map(|c| c.as_slice()).collect();
        let (a, b) = (rhat(&fwd).unwrap().value, rhat(&rev).unwrap().value);
        assert!((a - b).abs() < 1e-12);
        let (a, b) = (ess_bulk(&fwd).unwrap().value, ess_bulk(&rev).unwrap().value);
        assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn quantiles_type7() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.5), 2.5);
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
        assert!((quantile_sorted(&xs, 0.25) - 1.75).abs() < 1e-15);
    }
}
