//! ON/OFF segmentation of intensity traces and OFF-duration statistics
//! with truncated power-law fitting.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::models::LogTruncatedPowerLaw;
use crate::fit::{fit_least_squares, FitOptions};
use crate::stream::IntensityTrace;
use crate::PS_PER_SEC;

/// Emission state of one trace segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlinkState {
    On,
    Off,
}

/// A maximal run of equal-state bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub state: BlinkState,
    pub start_bin: usize,
    pub len_bins: usize,
}

/// Threshold segmentation of an intensity trace.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentedTrace {
    pub threshold_counts_per_bin: u32,
    pub bin_width_ps: u64,
    pub n_bins: usize,
    pub segments: Vec<Segment>,
}

impl SegmentedTrace {
    pub fn off_segments(&self) -> impl Iterator<Item = &Segment> {
        self.segments
            .iter()
            .filter(|s| s.state == BlinkState::Off)
    }
}

/// Splits the trace into maximal ON/OFF runs. A bin is OFF exactly when
/// its count is *below* the threshold; ties count as ON.
pub fn segment(trace: &IntensityTrace, threshold: u32) -> SegmentedTrace {
    let mut segments: Vec<Segment> = Vec::new();
    for (k, &c) in trace.counts.iter().enumerate() {
        let state = if c < threshold {
            BlinkState::Off
        } else {
            BlinkState::On
        };
        match segments.last_mut() {
            Some(seg) if seg.state == state => seg.len_bins += 1,
            _ => segments.push(Segment {
                state,
                start_bin: k,
                len_bins: 1,
            }),
        }
    }
    SegmentedTrace {
        threshold_counts_per_bin: threshold,
        bin_width_ps: trace.bin_width_ps,
        n_bins: trace.counts.len(),
        segments,
    }
}

/// Empirical survival function of the OFF durations.
#[derive(Debug, Clone, Serialize)]
pub struct OffCdf {
    /// Sorted distinct OFF durations, seconds.
    pub durations_s: Vec<f64>,
    /// `P(τ_off ≥ d)` at each distinct duration, from 1 down to 1/n.
    pub probabilities: Vec<f64>,
    /// Number of OFF events behind the curve.
    pub n_events: usize,
    /// Discretization correction added to the fit abscissa: a run of k
    /// whole OFF bins censors both partially covered edge bins, so the
    /// true dwell is about one bin longer than `k·bin_width`. Zero for
    /// synthetic curves built directly from durations.
    pub edge_correction_s: f64,
}

/// Survival statistics of the uncensored OFF segments. Segments touching
/// either trace boundary have unknown true length and are excluded.
pub fn off_cdf(seg: &SegmentedTrace) -> Result<OffCdf> {
    let bin_s = seg.bin_width_ps as f64 / PS_PER_SEC as f64;
    let mut lens: Vec<usize> = seg
        .off_segments()
        .filter(|s| s.start_bin > 0 && s.start_bin + s.len_bins < seg.n_bins)
        .map(|s| s.len_bins)
        .collect();
    if lens.len() < 10 {
        return Err(Error::InsufficientStatistics(format!(
            "{} uncensored OFF segments (need 10)",
            lens.len()
        )));
    }
    lens.sort_unstable();
    let n = lens.len();
    let mut durations_s = Vec::new();
    let mut probabilities = Vec::new();
    let mut i = 0;
    while i < n {
        let d = lens[i];
        // events with duration >= d, evaluated before consuming the ties
        probabilities.push((n - i) as f64 / n as f64);
        durations_s.push(d as f64 * bin_s);
        while i < n && lens[i] == d {
            i += 1;
        }
    }
    Ok(OffCdf {
        durations_s,
        probabilities,
        n_events: n,
        edge_correction_s: bin_s,
    })
}

/// Builds an [`OffCdf`] straight from measured durations (seconds), for
/// data that never went through trace binning.
pub fn off_cdf_from_durations(durations: &[f64]) -> Result<OffCdf> {
    if durations.len() < 10 {
        return Err(Error::InsufficientStatistics(format!(
            "{} OFF durations (need 10)",
            durations.len()
        )));
    }
    let mut sorted = durations.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let mut durations_s = Vec::new();
    let mut probabilities = Vec::new();
    let mut i = 0;
    while i < n {
        let d = sorted[i];
        probabilities.push((n - i) as f64 / n as f64);
        durations_s.push(d);
        while i < n && sorted[i] == d {
            i += 1;
        }
    }
    Ok(OffCdf {
        durations_s,
        probabilities,
        n_events: n,
        edge_correction_s: 0.0,
    })
}

/// Truncated power-law fit of the OFF survival curve,
/// `P_off(τ_off > t) ≈ C t^{−m_off} e^{−t/τ_c}`.
#[derive(Debug, Clone, Serialize)]
pub struct PowerLawFit {
    pub c: f64,
    pub m_off: f64,
    pub tau_c_s: f64,
    /// RMS of the log-survival residuals over the fitted points.
    pub residual_rms: f64,
    pub converged: bool,
    /// Exponents below 1 make long OFF periods probable.
    pub levy_like: bool,
}

/// Fits the survival curve with the truncated power-law form in log
/// space: least squares of `ln P` against `ln C − m ln t − t/τ_c`.
///
/// Points are weighted by their survival value, which approximates
/// inverse-variance weighting of `ln P̂` deep in the tail while keeping
/// the head weights of order one; tail points backed by fewer than 3
/// events are dropped as pure noise.
pub fn fit_off_cdf(cdf: &OffCdf) -> Result<PowerLawFit> {
    if cdf.durations_s.len() < 10 {
        return Err(Error::InsufficientStatistics(format!(
            "{} distinct OFF durations (need 10)",
            cdf.durations_s.len()
        )));
    }
    let n = cdf.n_events as f64;
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for (&d, &p) in cdf.durations_s.iter().zip(&cdf.probabilities) {
        if p * n < 2.5 {
            continue;
        }
        ts.push(d + cdf.edge_correction_s);
        ys.push(p.ln());
        ws.push(p);
    }
    if ts.len() < 4 {
        return Err(Error::InsufficientStatistics(
            "too few well-supported survival points".into(),
        ));
    }

    // slope of the first decade in log-log space initializes the exponent
    let t_first = ts[0];
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut cnt = 0.0;
    for (&t, &y) in ts.iter().zip(&ys) {
        if t <= 10.0 * t_first {
            let lx = t.ln();
            sx += lx;
            sy += y;
            sxx += lx * lx;
            sxy += lx * y;
            cnt += 1.0;
        }
    }
    let denom = cnt * sxx - sx * sx;
    let m0 = if cnt >= 3.0 && denom.abs() > 1e-30 {
        (-(cnt * sxy - sx * sy) / denom).max(0.0)
    } else {
        1.0
    };
    let c0 = ys[0] + m0 * ts[0].ln();
    // cut-off initialized where the curve first drops 1/e below the pure
    // power-law extrapolation
    let tau0 = ts
        .iter()
        .zip(&ys)
        .find(|(&t, &y)| y < c0 - m0 * t.ln() - 1.0)
        .map(|(&t, _)| t)
        .unwrap_or(ts[ts.len() - 1]);

    let outcome = fit_least_squares(
        &LogTruncatedPowerLaw,
        &ts,
        &ys,
        Some(&ws),
        &[c0, m0, tau0],
        &FitOptions::default(),
    );
    let m_off = outcome.params[1];
    Ok(PowerLawFit {
        c: outcome.params[0].exp(),
        m_off,
        tau_c_s: outcome.params[2],
        residual_rms: outcome.residual_rms,
        converged: outcome.converged,
        levy_like: m_off < 1.0,
    })
}

/// Occurrences of each per-bin photon count, the intensity histogram
/// shown beside PL time traces.
pub fn intensity_histogram(trace: &IntensityTrace) -> BTreeMap<u32, u64> {
    let mut hist = BTreeMap::new();
    for &c in &trace.counts {
        *hist.entry(c).or_insert(0u64) += 1;
    }
    hist
}
