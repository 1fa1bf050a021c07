//! Photoluminescence decay histograms, tri-exponential decay fitting,
//! average lifetimes, and saturation-curve fitting.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::models::{SaturationCurve, TriExpDecay};
use crate::fit::{fit_least_squares, FitOptions};
use crate::stream::{micro_times, PhotonStream};
use crate::PS_PER_NS;

/// Normalization state of a decay histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayNorm {
    RawCounts,
    PeakNormalized,
}

/// Histogram of photon micro-times over one pulse period.
#[derive(Debug, Clone, Serialize)]
pub struct DecayHistogram {
    pub bin_width_ps: u64,
    pub counts: Vec<f64>,
    pub normalization: DecayNorm,
}

impl DecayHistogram {
    /// Wraps precomputed bin contents (bin k covers `[k·w, (k+1)·w)` ps).
    pub fn from_counts(bin_width_ps: u64, counts: Vec<f64>) -> Self {
        Self {
            bin_width_ps,
            counts,
            normalization: DecayNorm::RawCounts,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total_counts(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Index of the tallest bin (first one on ties).
    pub fn peak_bin(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.counts.iter().enumerate() {
            if v > self.counts[best] {
                best = k;
            }
        }
        best
    }

    pub fn bin_center_ns(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.bin_width_ps as f64 / PS_PER_NS as f64
    }

    /// Copy with the tallest bin scaled to 1.
    pub fn peak_normalized(&self) -> Self {
        let peak = self.counts[self.peak_bin()];
        let counts = if peak > 0.0 {
            self.counts.iter().map(|&c| c / peak).collect()
        } else {
            self.counts.clone()
        };
        Self {
            bin_width_ps: self.bin_width_ps,
            counts,
            normalization: DecayNorm::PeakNormalized,
        }
    }
}

/// Histograms the stream's micro-times over `[0, rep_period)`.
pub fn decay_histogram(stream: &PhotonStream, bin_width_ps: u64) -> Result<DecayHistogram> {
    if bin_width_ps == 0 {
        return Err(Error::InvalidInput("bin width must be positive".into()));
    }
    let times = micro_times(stream)?;
    let n_bins = stream.rep_period_ps.div_ceil(bin_width_ps) as usize;
    let mut counts = vec![0.0f64; n_bins];
    for mt in times {
        counts[(mt.0 / bin_width_ps) as usize] += 1.0;
    }
    Ok(DecayHistogram::from_counts(bin_width_ps, counts))
}

/// Residual weighting for decay fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Poisson weights `1/max(count, 1)`.
    #[default]
    Poisson,
    Uniform,
}

/// Result of a tri-exponential decay fit,
/// `I(t) = Σᵢ Aᵢ exp(−(t−t₀)/τᵢ) + B`, components sorted by lifetime.
#[derive(Debug, Clone, Serialize)]
pub struct TriExpFit {
    pub amplitudes: [f64; 3],
    pub lifetimes_ns: [f64; 3],
    /// Pulse offset in ns; taken from the decay peak (or the provided
    /// initialization) and held fixed — with free amplitudes the model is
    /// degenerate in t₀.
    pub t0_ns: f64,
    /// Constant floor accounting for dark counts.
    pub baseline: f64,
    pub residual_rms: f64,
    pub converged: bool,
}

impl TriExpFit {
    pub fn eval(&self, t_ns: f64) -> f64 {
        let mut acc = self.baseline;
        for i in 0..3 {
            acc += self.amplitudes[i] * (-(t_ns - self.t0_ns) / self.lifetimes_ns[i]).exp();
        }
        acc
    }
}

/// Fits a tri-exponential decay to the histogram tail starting at the
/// peak bin. Lifetimes are initialized from log-slopes over tertiles of
/// the fit window and amplitudes from a linear least-squares solve; three
/// lifetime-scaled restarts (×0.3, ×1, ×3) guard against local minima.
pub fn fit_triexp(
    hist: &DecayHistogram,
    init: Option<&TriExpFit>,
    weighting: Weighting,
) -> Result<TriExpFit> {
    let peak = hist.peak_bin();
    let window = &hist.counts[peak..];
    if window.len() < 8 {
        return Err(Error::InsufficientStatistics(format!(
            "only {} bins past the decay peak",
            window.len()
        )));
    }
    let nonzero = window.iter().filter(|&&c| c > 0.0).count();
    if nonzero < 50 {
        return Err(Error::InsufficientStatistics(format!(
            "only {nonzero} nonzero bins past the decay peak (need 50)"
        )));
    }
    let first = window[0];
    if window.iter().all(|&c| c == first) {
        return Err(Error::DegenerateData(
            "decay histogram is constant past the peak".into(),
        ));
    }

    let xs: Vec<f64> = (peak..hist.n_bins()).map(|k| hist.bin_center_ns(k)).collect();
    let ys: Vec<f64> = window.to_vec();
    let weights: Option<Vec<f64>> = match weighting {
        Weighting::Poisson => Some(ys.iter().map(|&c| 1.0 / c.max(1.0)).collect()),
        Weighting::Uniform => None,
    };

    let t0 = init.map_or(xs[0], |f| f.t0_ns);
    let model = TriExpDecay { t0 };

    let options = FitOptions::default();
    // Tri-exponential cost surfaces are multimodal. Each start gets its
    // amplitudes from a linear solve at fixed lifetimes; the lifetime
    // ladders come from data log-slopes and from fixed fractions of the
    // window (robust when the slopes blur together), each also scaled
    // x0.3 and x3. The search stops early once a fit explains the data
    // down to the numerical floor.
    let floor = 1e-12
        * xs.iter()
            .enumerate()
            .map(|(i, _)| weights.as_deref().map_or(1.0, |w| w[i]) * ys[i] * ys[i])
            .sum::<f64>();
    let span = xs[xs.len() - 1] - xs[0];
    let slope_taus = initial_lifetimes(&xs, &ys).0;
    let ladder_taus = [span / 64.0, span / 16.0, span / 4.0];
    let mut starts: Vec<[f64; 7]> = Vec::new();
    if let Some(f) = init {
        starts.push([
            f.amplitudes[0],
            f.lifetimes_ns[0],
            f.amplitudes[1],
            f.lifetimes_ns[1],
            f.amplitudes[2],
            f.lifetimes_ns[2],
            f.baseline,
        ]);
    }
    for scale in [1.0, 0.3, 3.0] {
        for taus in [slope_taus, ladder_taus] {
            let taus = [taus[0] * scale, taus[1] * scale, taus[2] * scale];
            let amps = linear_amplitudes(&xs, &ys, t0, &taus, weights.as_deref());
            starts.push([
                amps[0], taus[0], amps[1], taus[1], amps[2], taus[2], amps[3],
            ]);
        }
    }
    let mut best: Option<crate::fit::FitOutcome<f64>> = None;
    for start in starts {
        let outcome = fit_least_squares(
            &model,
            &xs,
            &ys,
            weights.as_deref(),
            &start,
            &options,
        );
        let better = match &best {
            None => true,
            Some(b) => outcome.cost < b.cost,
        };
        if better {
            best = Some(outcome);
        }
        if best.as_ref().is_some_and(|b| b.converged && b.cost <= floor) {
            break;
        }
    }
    let outcome = best.expect("at least one start ran");

    let p = &outcome.params;
    let mut comps = [(p[0], p[1]), (p[2], p[3]), (p[4], p[5])];
    let mut baseline = p[6];
    // a component slower than a few window spans is indistinguishable
    // from a constant over the data; fold it into the floor instead of
    // letting it poison the amplitude-weighted average lifetime
    for comp in comps.iter_mut() {
        if comp.1 > 3.0 * span && comp.0 > 0.0 {
            baseline += comp.0;
            comp.0 = 0.0;
        }
    }
    comps.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    Ok(TriExpFit {
        amplitudes: [comps[0].0, comps[1].0, comps[2].0],
        lifetimes_ns: [comps[0].1, comps[1].1, comps[2].1],
        t0_ns: t0,
        baseline,
        residual_rms: outcome.residual_rms,
        converged: outcome.converged,
    })
}

/// Lifetime starting values from log-slopes over short/middle/long
/// stretches of the fit window. Fast components live in the first few
/// percent of the window, so the segments are graded, not equal thirds.
fn initial_lifetimes(xs: &[f64], ys: &[f64]) -> ([f64; 3], f64) {
    let n = xs.len();
    let tail = n.div_ceil(20).max(3).min(n);
    let baseline = ys[n - tail..].iter().sum::<f64>() / tail as f64;
    let span = xs[n - 1] - xs[0];

    let edges = [0.0, 0.04, 0.2, 1.0];
    let mut taus = [0.0f64; 3];
    for seg in 0..3 {
        let lo = xs[0] + span * edges[seg];
        let hi = xs[0] + span * edges[seg + 1];
        let a = xs.partition_point(|&x| x < lo);
        let b = xs.partition_point(|&x| x < hi).max(a + 1).min(n);
        let slope = log_slope(&xs[a..b], &ys[a..b], baseline);
        taus[seg] = match slope {
            Some(s) if s < -1e-12 => -1.0 / s,
            _ => span * [0.02, 0.1, 0.5][seg],
        };
    }
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // collapse accidental duplicates so the linear solve stays regular
    for i in 1..3 {
        if taus[i] <= taus[i - 1] * 1.2 {
            taus[i] = taus[i - 1] * 3.0;
        }
    }
    (taus, baseline)
}

fn log_slope(xs: &[f64], ys: &[f64], baseline: f64) -> Option<f64> {
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut n = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let v = y - baseline;
        if v > 0.0 {
            let ly = v.ln();
            sx += x;
            sy += ly;
            sxx += x * x;
            sxy += x * ly;
            n += 1.0;
        }
    }
    if n < 3.0 {
        return None;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

/// Weighted linear solve for `(A₁, A₂, A₃, B)` given fixed lifetimes.
fn linear_amplitudes(
    xs: &[f64],
    ys: &[f64],
    t0: f64,
    taus: &[f64; 3],
    weights: Option<&[f64]>,
) -> [f64; 4] {
    let mut ata = [0.0f64; 16];
    let mut atb = [0.0f64; 4];
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        let row = [
            (-(x - t0) / taus[0]).exp(),
            (-(x - t0) / taus[1]).exp(),
            (-(x - t0) / taus[2]).exp(),
            1.0,
        ];
        for a in 0..4 {
            atb[a] += w * row[a] * y;
            for b in 0..4 {
                ata[a * 4 + b] += w * row[a] * row[b];
            }
        }
    }
    let scale = ys.iter().cloned().fold(0.0f64, f64::max).max(1e-12);
    let mut rhs = atb;
    if crate::fit::linalg::solve_in_place(&mut ata, &mut rhs, 4) {
        // a component solved negative still needs a live starting value,
        // or the optimizer can never grow it back
        let floor = rhs[..3]
            .iter()
            .cloned()
            .fold(0.0f64, f64::max)
            .max(scale * 1e-3)
            * 1e-3;
        [
            rhs[0].max(floor),
            rhs[1].max(floor),
            rhs[2].max(floor),
            rhs[3].max(0.0),
        ]
    } else {
        let third = scale / 3.0;
        [third, third, third, 0.0]
    }
}

/// Averaging convention for multi-exponential lifetimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LifetimeAverage {
    /// `Σ Aᵢτᵢ / Σ Aᵢ`
    #[default]
    AmplitudeWeighted,
    /// `Σ Aᵢτᵢ² / Σ Aᵢτᵢ`
    IntensityWeighted,
}

/// Collapses a converged tri-exponential fit to one average lifetime (ns).
pub fn average_lifetime(fit: &TriExpFit, convention: LifetimeAverage) -> Result<f64> {
    if !fit.converged {
        return Err(Error::DegenerateData(
            "average lifetime of a non-converged fit".into(),
        ));
    }
    let a = &fit.amplitudes;
    let t = &fit.lifetimes_ns;
    let at: f64 = (0..3).map(|i| a[i] * t[i]).sum();
    match convention {
        LifetimeAverage::AmplitudeWeighted => {
            let sum_a: f64 = a.iter().sum();
            if sum_a <= 0.0 {
                return Err(Error::DegenerateData("all amplitudes are zero".into()));
            }
            Ok(at / sum_a)
        }
        LifetimeAverage::IntensityWeighted => {
            if at <= 0.0 {
                return Err(Error::DegenerateData("all amplitudes are zero".into()));
            }
            let att: f64 = (0..3).map(|i| a[i] * t[i] * t[i]).sum();
            Ok(att / at)
        }
    }
}

/// Saturation-curve fit `I = A(1 − e^{−P/P_sat}) + B·P/P_sat`.
#[derive(Debug, Clone, Serialize)]
pub struct SaturationFit {
    /// Exciton (saturating) amplitude.
    pub a: f64,
    /// Biexciton (linear) amplitude.
    pub b: f64,
    /// Saturation power, in the units of the input powers.
    pub p_sat: f64,
    pub residual_rms: f64,
    pub converged: bool,
}

/// Fits the saturation curve to `(power, intensity)` points spanning at
/// least a decade of power.
pub fn fit_saturation(points: &[(f64, f64)]) -> Result<SaturationFit> {
    if points.len() < 4 {
        return Err(Error::InsufficientStatistics(format!(
            "{} saturation points (need 4)",
            points.len()
        )));
    }
    let p_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let p_max = points.iter().map(|p| p.0).fold(0.0f64, f64::max);
    if !(p_min > 0.0) || p_max / p_min < 10.0 {
        return Err(Error::InvalidInput(
            "powers must be positive and span at least one decade".into(),
        ));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let xs: Vec<f64> = sorted.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = sorted.iter().map(|p| p.1).collect();

    let i_max = ys.iter().cloned().fold(0.0f64, f64::max);
    let knee_level = (1.0 - (-1.0f64).exp()) * i_max;
    let p_sat0 = xs
        .iter()
        .zip(&ys)
        .find(|(_, &y)| y >= knee_level)
        .map(|(&p, _)| p)
        .unwrap_or(xs[xs.len() / 2]);

    let init = [i_max, 0.0, p_sat0];
    let outcome = fit_least_squares(
        &SaturationCurve,
        &xs,
        &ys,
        None,
        &init,
        &FitOptions::default(),
    );
    Ok(SaturationFit {
        a: outcome.params[0],
        b: outcome.params[1],
        p_sat: outcome.params[2],
        residual_rms: outcome.residual_rms,
        converged: outcome.converged,
    })
}
