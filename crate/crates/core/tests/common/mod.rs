//! Shared oracles for the integration suites: brute-force correlation,
//! quadrature reference distributions, and elementary samplers. These
//! deliberately avoid the library's own computation paths.
//!
//! Each test target compiles its own copy, so not every helper is used
//! everywhere.
#![allow(dead_code)]

use photonstat::sim::TruncatedPowerLaw;
use photonstat::stream::PhotonStream;
use rand::Rng;

/// All-pairs cross-correlation histogram, the O(n²) reference for
/// `corr::correlate`. Delays binned over `[−max_eff, +max_eff)` with
/// `max_eff` rounded up to whole bins, exactly like the fast path claims.
pub fn brute_force_g2(stream: &PhotonStream, bin_width_ps: u64, max_delay_ps: u64) -> Vec<f64> {
    let half_bins = max_delay_ps.div_ceil(bin_width_ps);
    let max_eff = (half_bins * bin_width_ps) as i64;
    let mut hist = vec![0u64; (2 * half_bins) as usize];
    for a in stream.records().iter().filter(|r| r.channel == 0) {
        for b in stream.records().iter().filter(|r| r.channel == 1) {
            let tau = b.t_abs as i64 - a.t_abs as i64;
            if tau >= -max_eff && tau < max_eff {
                hist[((tau + max_eff) as u64 / bin_width_ps) as usize] += 1;
            }
        }
    }
    hist.into_iter().map(|c| c as f64).collect()
}

/// Standard normal via Box–Muller.
pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Poisson sampler: Knuth multiplication below 30, rounded normal above
/// (indistinguishable at the tolerances used here).
pub fn poisson<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < 30.0 {
        let limit = (-mean).exp();
        let mut k = 0u64;
        let mut p = 1.0;
        loop {
            p *= rng.random::<f64>();
            if p <= limit {
                return k;
            }
            k += 1;
        }
    } else {
        let v = mean + mean.sqrt() * normal(rng);
        if v < 0.0 {
            0
        } else {
            v.round() as u64
        }
    }
}

/// Reference CDF of the truncated power-law *density*
/// `f(t) ∝ t^{−m} e^{−t/τ}` on `[t_min, ∞)`, by Simpson quadrature in
/// log-time. Returns log-spaced abscissae and CDF values.
pub struct QuadratureCdf {
    pub ts: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl QuadratureCdf {
    pub fn build(law: &TruncatedPowerLaw, n_grid: usize) -> Self {
        let t_min = law.t_min_ps;
        let t_max = if law.tau_c_ps.is_finite() {
            // exponential tail: e^{-60} of mass left beyond 60 tau
            (law.tau_c_ps * 60.0).max(t_min * 1e4)
        } else {
            // pure power law (m > 1): survival(t) = (t/t_min)^{1-m}
            t_min * 10f64.powf(9.0 / (law.m - 1.0))
        };
        let lo = t_min.ln();
        let hi = t_max.ln();
        let n = n_grid.max(2_000) | 1; // odd point count for Simpson pairs
        let h = (hi - lo) / (n - 1) as f64;
        // integrand after u = ln t substitution: t^{1-m} e^{-t/tau}
        let g = |u: f64| {
            let t = u.exp();
            let expo = if law.tau_c_ps.is_finite() {
                (-t / law.tau_c_ps).exp()
            } else {
                1.0
            };
            t.powf(1.0 - law.m) * expo
        };
        let mut ts = vec![t_min];
        let mut cdf = vec![0.0];
        let mut acc = 0.0;
        let mut g_prev = g(lo);
        for k in (2..n).step_by(2) {
            let g_mid = g(lo + (k - 1) as f64 * h);
            let g_end = g(lo + k as f64 * h);
            acc += (g_prev + 4.0 * g_mid + g_end) * h / 3.0;
            g_prev = g_end;
            ts.push((lo + k as f64 * h).exp());
            cdf.push(acc);
        }
        let total = *cdf.last().unwrap();
        for v in cdf.iter_mut() {
            *v /= total;
        }
        Self { ts, cdf }
    }

    /// CDF at `t` by monotone linear interpolation.
    pub fn value(&self, t: f64) -> f64 {
        if t <= self.ts[0] {
            return 0.0;
        }
        if t >= *self.ts.last().unwrap() {
            return 1.0;
        }
        let idx = self.ts.partition_point(|&x| x < t);
        let (t0, t1) = (self.ts[idx - 1], self.ts[idx]);
        let (c0, c1) = (self.cdf[idx - 1], self.cdf[idx]);
        c0 + (c1 - c0) * (t - t0) / (t1 - t0)
    }
}

/// Kolmogorov–Smirnov statistic of samples against a reference CDF.
pub fn ks_statistic(sorted_samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted_samples.len() as f64;
    let mut worst: f64 = 0.0;
    for (i, &x) in sorted_samples.iter().enumerate() {
        let target = cdf(x);
        worst = worst
            .max((target - i as f64 / n).abs())
            .max((target - (i + 1) as f64 / n).abs());
    }
    worst
}
