//! Second-order cross-correlation of the two HBT detector channels:
//! raw coincidence histograms, background cleaning, far-peak
//! normalization, and g²(0) extraction.
//!
//! Delays are signed, `τ = t(ch1) − t(ch0)`, binned over
//! `[−max_delay, +max_delay)`. Peak *areas* (counts integrated over one
//! pulse period, reported as the per-bin mean over that window) define
//! g²(0); areas are robust to bin width and coincide with peak heights
//! for flat backgrounds.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stream::PhotonStream;

/// Processing stage of a correlation histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Raw,
    Cleaned,
    Normalized,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Raw => "raw",
            Stage::Cleaned => "cleaned",
            Stage::Normalized => "normalized",
        }
    }
}

/// Binned coincidence counts versus inter-channel delay.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationHistogram {
    pub bin_width_ps: u64,
    /// Half-range of the delay axis; always a whole number of bins.
    pub max_delay_ps: u64,
    /// Pulse period inherited from the stream (0 for CW data).
    pub rep_period_ps: u64,
    /// Coincidences per delay bin over `[−max_delay, +max_delay)`.
    pub counts: Vec<f64>,
    /// Number of channel-0 photons considered.
    pub total_starts: u64,
    pub stage: Stage,
    pub background_cleaned: bool,
    /// Reference delay used by the normalization stage.
    pub reference_delay_ps: Option<u64>,
}

/// A delay band, used to sample the background between peaks.
#[derive(Debug, Clone, Copy)]
pub struct DelayBand {
    pub lo_ps: i64,
    pub hi_ps: i64,
}

impl DelayBand {
    /// Default background band: centered midway between the first and
    /// second side peaks, one quarter period wide.
    pub fn between_first_peaks(rep_period_ps: u64) -> Self {
        let center = 1.5 * rep_period_ps as f64;
        let half = rep_period_ps as f64 / 8.0;
        Self {
            lo_ps: (center - half) as i64,
            hi_ps: (center + half) as i64,
        }
    }
}

/// g²(0) summary extracted from a normalized histogram.
#[derive(Debug, Clone, Serialize)]
pub struct G2Result {
    pub g2_zero: f64,
    /// Mean bin content over the center-peak window.
    pub center_area: f64,
    /// Mean of the same quantity over the reference side peaks.
    pub mean_side_area: f64,
    pub n_side_peaks_used: usize,
    pub background_cleaned: bool,
}

impl CorrelationHistogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    /// Signed start of bin `k`.
    pub fn bin_start_ps(&self, k: usize) -> i64 {
        -(self.max_delay_ps as i64) + (k as u64 * self.bin_width_ps) as i64
    }

    fn bin_range_for_band(&self, band: DelayBand) -> std::ops::Range<usize> {
        // bins fully contained in [lo, hi)
        let bw = self.bin_width_ps as i64;
        let lo = -(self.max_delay_ps as i64);
        let first = ((band.lo_ps - lo) + bw - 1).div_euclid(bw).max(0) as usize;
        let last = ((band.hi_ps - lo).div_euclid(bw)).max(0) as usize;
        first.min(self.counts.len())..last.min(self.counts.len())
    }

    /// Indices of pulse-peak windows (width one period, centered on
    /// multiples of the period) fully inside the delay range.
    fn peak_orders(&self, rep_period_ps: u64) -> std::ops::RangeInclusive<i64> {
        let period = rep_period_ps as i64;
        let max = self.max_delay_ps as i64;
        let j_max = (max - period / 2).div_euclid(period);
        (-j_max)..=j_max
    }

    fn peak_window(&self, order: i64, rep_period_ps: u64) -> DelayBand {
        let period = rep_period_ps as i64;
        DelayBand {
            lo_ps: order * period - period / 2,
            hi_ps: order * period + period / 2,
        }
    }

    /// Mean bin content over the window of peak `order`.
    pub fn peak_mean(&self, order: i64, rep_period_ps: u64) -> f64 {
        let range = self.bin_range_for_band(self.peak_window(order, rep_period_ps));
        let n = range.len();
        if n == 0 {
            return 0.0;
        }
        self.counts[range].iter().sum::<f64>() / n as f64
    }
}

/// Correlates channel 0 against channel 1 with a two-pointer sweep over
/// the time-sorted stream (linear in photons × window occupancy).
///
/// `max_delay_ps` is rounded up to a whole number of bins.
pub fn correlate(
    stream: &PhotonStream,
    bin_width_ps: u64,
    max_delay_ps: u64,
) -> Result<CorrelationHistogram> {
    if bin_width_ps == 0 || max_delay_ps == 0 {
        return Err(Error::InvalidInput(
            "bin width and max delay must be positive".into(),
        ));
    }
    for channel in [0u8, 1u8] {
        if !stream.has_channel(channel) {
            return Err(Error::MissingChannel(channel));
        }
    }
    let half_bins = max_delay_ps.div_ceil(bin_width_ps);
    let max_eff = half_bins * bin_width_ps;
    let n_bins = (2 * half_bins) as usize;

    let starts = stream.channel_times(0);
    let stops = stream.channel_times(1);

    let sweep = |chunk: &[u64]| -> Vec<u64> {
        let mut hist = vec![0u64; n_bins];
        if chunk.is_empty() {
            return hist;
        }
        // first stop with t_b >= t_a - max_eff
        let mut lo = stops.partition_point(|&t| t + max_eff < chunk[0]);
        for &t_a in chunk {
            while lo < stops.len() && stops[lo] + max_eff < t_a {
                lo += 1;
            }
            let mut j = lo;
            while j < stops.len() && stops[j] < t_a + max_eff {
                let tau = stops[j] as i64 - t_a as i64;
                let bin = (tau + max_eff as i64) as u64 / bin_width_ps;
                hist[bin as usize] += 1;
                j += 1;
            }
        }
        hist
    };

    let chunk_len = (starts.len() / rayon::current_num_threads().max(1)).max(4096);
    let partials: Vec<Vec<u64>> = starts.par_chunks(chunk_len).map(sweep).collect();
    let mut counts = vec![0u64; n_bins];
    for partial in partials {
        for (acc, v) in counts.iter_mut().zip(partial) {
            *acc += v;
        }
    }

    Ok(CorrelationHistogram {
        bin_width_ps,
        max_delay_ps: max_eff,
        rep_period_ps: stream.rep_period_ps,
        counts: counts.into_iter().map(|c| c as f64).collect(),
        total_starts: starts.len() as u64,
        stage: Stage::Raw,
        background_cleaned: false,
        reference_delay_ps: None,
    })
}

/// Removes uncorrelated background from a raw histogram.
///
/// The background level `S(τ_b)` is the mean raw count per bin over a band
/// between correlation peaks; every bin is then replaced by
/// `S + S_b − 2√S·√S_b = (√S − √S_b)²`, which subtracts the
/// signal-background and background-background coincidence contributions.
pub fn clean_background(
    hist: &CorrelationHistogram,
    band: Option<DelayBand>,
) -> Result<CorrelationHistogram> {
    if hist.stage != Stage::Raw {
        return Err(Error::WrongStage {
            expected: "raw",
            got: hist.stage.name(),
        });
    }
    if hist.rep_period_ps == 0 {
        return Err(Error::UnsupportedMode(
            "background cleaning places its window relative to pulse peaks".into(),
        ));
    }
    let band = band.unwrap_or_else(|| DelayBand::between_first_peaks(hist.rep_period_ps));
    let range = hist.bin_range_for_band(band);
    if range.is_empty() {
        return Err(Error::InvalidWindow(
            "background band covers no whole bin".into(),
        ));
    }
    let window = &hist.counts[range];
    let s_b = window.iter().sum::<f64>() / window.len() as f64;

    // Reject a band that sits on a correlation peak: its mean should be
    // far below the tallest side-peak bin. A perfectly flat histogram has
    // no peak structure to overlap, so it is exempt.
    let mut side_max = 0.0f64;
    for order in hist.peak_orders(hist.rep_period_ps) {
        if order == 0 {
            continue;
        }
        let r = hist.bin_range_for_band(hist.peak_window(order, hist.rep_period_ps));
        for &v in &hist.counts[r] {
            side_max = side_max.max(v);
        }
    }
    let flat = hist
        .counts
        .iter()
        .all(|&v| (v - hist.counts[0]).abs() <= f64::EPSILON * hist.counts[0].abs());
    if !flat && s_b > 0.5 * side_max {
        return Err(Error::InvalidWindow(format!(
            "band mean {s_b:.3} exceeds half the side-peak maximum {side_max:.3}"
        )));
    }

    // S_b = 0 degenerates to the identity; applying the formula anyway
    // would only add sqrt/square rounding noise.
    let counts = if s_b == 0.0 {
        hist.counts.clone()
    } else {
        let sqrt_b = s_b.sqrt();
        hist.counts
            .iter()
            .map(|&s| {
                let d = s.sqrt() - sqrt_b;
                d * d
            })
            .collect()
    };
    Ok(CorrelationHistogram {
        counts,
        stage: Stage::Cleaned,
        background_cleaned: true,
        ..hist.clone()
    })
}

/// Rescales the histogram so the pulse peaks at delays beyond
/// `reference_delay_ps` have unit mean bin content (equivalently unit
/// area in period-normalized units). Those far peaks sit beyond the
/// blinking correlation time, where g² tends to 1.
pub fn normalize_peaks(
    hist: &CorrelationHistogram,
    rep_period_ps: u64,
    reference_delay_ps: u64,
) -> Result<CorrelationHistogram> {
    if hist.stage == Stage::Normalized {
        return Err(Error::WrongStage {
            expected: "raw or cleaned",
            got: hist.stage.name(),
        });
    }
    if rep_period_ps == 0 {
        return Err(Error::UnsupportedMode(
            "peak normalization requires pulsed data".into(),
        ));
    }
    let reference: Vec<i64> = hist
        .peak_orders(rep_period_ps)
        .filter(|&j| j != 0 && (j.unsigned_abs() * rep_period_ps) >= reference_delay_ps)
        .collect();
    if reference.len() < 3 {
        return Err(Error::InsufficientRange(format!(
            "only {} reference peaks beyond {} ps fit inside ±{} ps",
            reference.len(),
            reference_delay_ps,
            hist.max_delay_ps
        )));
    }
    let mean_ref = reference
        .iter()
        .map(|&j| hist.peak_mean(j, rep_period_ps))
        .sum::<f64>()
        / reference.len() as f64;
    if mean_ref <= 0.0 {
        return Err(Error::InsufficientStatistics(
            "reference peaks contain no counts".into(),
        ));
    }
    let counts = hist.counts.iter().map(|&v| v / mean_ref).collect();
    Ok(CorrelationHistogram {
        counts,
        stage: Stage::Normalized,
        reference_delay_ps: Some(reference_delay_ps),
        rep_period_ps,
        ..hist.clone()
    })
}

/// Extracts g²(0) from a normalized histogram as the ratio of the
/// center-peak area to the mean reference side-peak area.
pub fn g2_zero(hist: &CorrelationHistogram, n_side_peaks: usize) -> Result<G2Result> {
    if hist.stage != Stage::Normalized {
        return Err(Error::WrongStage {
            expected: "normalized",
            got: hist.stage.name(),
        });
    }
    let period = hist.rep_period_ps;
    let reference_delay = hist.reference_delay_ps.unwrap_or(period);
    let mut side: Vec<i64> = hist
        .peak_orders(period)
        .filter(|&j| j != 0 && (j.unsigned_abs() * period) >= reference_delay)
        .collect();
    side.sort_by_key(|j| j.unsigned_abs());
    side.truncate(n_side_peaks.max(1));
    let mean_side = side
        .iter()
        .map(|&j| hist.peak_mean(j, period))
        .sum::<f64>()
        / side.len() as f64;
    let center = hist.peak_mean(0, period);
    if mean_side <= 0.0 {
        return Err(Error::InsufficientStatistics(
            "side peaks contain no counts".into(),
        ));
    }
    Ok(G2Result {
        g2_zero: center / mean_side,
        center_area: center,
        mean_side_area: mean_side,
        n_side_peaks_used: side.len(),
        background_cleaned: hist.background_cleaned,
    })
}
