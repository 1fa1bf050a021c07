//! Emission-spectrum peak metrics (central emission wavelength, FWHM)
//! and cohort statistics.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::models::GaussianPeak;
use crate::fit::{fit_least_squares, FitOptions};

/// FWHM of a Gaussian per unit sigma: `2 √(2 ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;

/// A photoluminescence spectrum sampled on an increasing wavelength axis.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub wavelengths_nm: Vec<f64>,
    pub counts: Vec<f64>,
}

impl Spectrum {
    pub fn new(wavelengths_nm: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        if wavelengths_nm.len() != counts.len() {
            return Err(Error::InvalidInput(
                "wavelength and count arrays differ in length".into(),
            ));
        }
        if wavelengths_nm.len() < 8 {
            return Err(Error::InvalidInput("spectrum needs at least 8 samples".into()));
        }
        if !wavelengths_nm.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput(
                "wavelengths must be strictly increasing".into(),
            ));
        }
        if counts.iter().any(|&c| !(c >= 0.0)) {
            return Err(Error::InvalidInput("counts must be non-negative".into()));
        }
        Ok(Self {
            wavelengths_nm,
            counts,
        })
    }

    /// Reads a `wavelength_nm,counts` CSV file.
    pub fn from_csv_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut wavelengths = Vec::new();
        let mut counts = Vec::new();
        let mut offset = 0u64;
        for (idx, line) in text.lines().enumerate() {
            let line_offset = offset;
            offset += line.len() as u64 + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if idx == 0 && trimmed.starts_with("wavelength") {
                continue;
            }
            let (w, c) = trimmed.split_once(',').ok_or_else(|| Error::Format {
                offset: line_offset,
                reason: "expected `wavelength_nm,counts`".into(),
            })?;
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|_| Error::Format {
                    offset: line_offset,
                    reason: format!("bad number `{s}`"),
                })
            };
            wavelengths.push(parse(w)?);
            counts.push(parse(c)?);
        }
        Self::new(wavelengths, counts)
    }
}

/// Peak-extraction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakMethod {
    GaussianFit,
    HalfMaxInterpolation,
}

/// Central emission wavelength and full width at half maximum.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PeakMetrics {
    pub cew_nm: f64,
    pub fwhm_nm: f64,
    pub method: PeakMethod,
}

/// Extracts CEW and FWHM from a single-peaked spectrum.
///
/// `GaussianFit` fits a Gaussian plus constant baseline; the
/// interpolation method refines the maximum parabolically and crosses
/// half maximum linearly, which stays honest for asymmetric peaks.
pub fn peak_metrics(spectrum: &Spectrum, method: PeakMethod) -> Result<PeakMetrics> {
    let counts = &spectrum.counts;
    let wl = &spectrum.wavelengths_nm;
    let max = counts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = counts.iter().cloned().fold(f64::INFINITY, f64::min);
    // dominance is judged above the spectrum's own floor, so a constant
    // baseline offset cannot mask the peak
    let amp = max - min;
    let median = median_of(counts);
    if !(amp > 0.0) || amp < 2.0 * (median - min) {
        return Err(Error::Shape(
            "no dominant peak above the baseline".into(),
        ));
    }
    // hysteresis scan: a second excursion above 60% amplitude after a dip
    // below 40% is a second peak
    let hi = min + 0.6 * amp;
    let lo = min + 0.4 * amp;
    let mut rises = 0;
    let mut above = false;
    for &c in counts {
        if !above && c >= hi {
            above = true;
            rises += 1;
        } else if above && c <= lo {
            above = false;
        }
    }
    if rises > 1 {
        return Err(Error::Shape(format!("{rises} separated peaks found")));
    }

    let peak_idx = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(k, _)| k)
        .unwrap();

    let (cew, fwhm) = match method {
        PeakMethod::GaussianFit => {
            let sigma0 = half_width(wl, counts, peak_idx, min + 0.5 * amp)
                .map(|(l, r)| (r - l) / FWHM_PER_SIGMA)
                .unwrap_or((wl[wl.len() - 1] - wl[0]) / 6.0);
            let init = [amp, wl[peak_idx], sigma0.max(1e-6), min];
            let outcome = fit_least_squares(
                &GaussianPeak,
                wl,
                counts,
                None,
                &init,
                &FitOptions::default(),
            );
            if !outcome.converged {
                return Err(Error::DegenerateData("gaussian peak fit diverged".into()));
            }
            let p = outcome.params;
            (p[1], FWHM_PER_SIGMA * p[2])
        }
        PeakMethod::HalfMaxInterpolation => {
            let cew = parabolic_vertex(wl, counts, peak_idx);
            let (left, right) = half_width(wl, counts, peak_idx, min + 0.5 * amp)
                .ok_or_else(|| Error::Shape("half-maximum level never crossed".into()))?;
            (cew, right - left)
        }
    };

    if !(cew >= wl[0] && cew <= wl[wl.len() - 1]) {
        return Err(Error::Shape(format!(
            "fitted center {cew:.2} nm outside the wavelength range"
        )));
    }
    if !(fwhm > 0.0) {
        return Err(Error::Shape("non-positive FWHM".into()));
    }
    Ok(PeakMetrics {
        cew_nm: cew,
        fwhm_nm: fwhm,
        method,
    })
}

fn median_of(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Vertex of the parabola through the peak sample and its neighbors;
/// exact for symmetric peaks, and the plain maximum at the array ends.
fn parabolic_vertex(xs: &[f64], ys: &[f64], k: usize) -> f64 {
    if k == 0 || k + 1 >= xs.len() {
        return xs[k];
    }
    let (x0, x1, x2) = (xs[k - 1], xs[k], xs[k + 1]);
    let (y0, y1, y2) = (ys[k - 1], ys[k], ys[k + 1]);
    let d0 = (y1 - y0) / (x1 - x0);
    let d1 = (y2 - y1) / (x2 - x1);
    let curv = (d1 - d0) / (x2 - x0);
    if curv.abs() < 1e-30 {
        return x1;
    }
    0.5 * (x0 + x1 - d0 / curv)
}

/// Wavelengths where the spectrum crosses `level` on each side of the
/// peak, linearly interpolated.
fn half_width(xs: &[f64], ys: &[f64], peak: usize, level: f64) -> Option<(f64, f64)> {
    let mut left = None;
    for k in (1..=peak).rev() {
        if ys[k - 1] <= level && ys[k] >= level {
            left = Some(cross(xs[k - 1], ys[k - 1], xs[k], ys[k], level));
            break;
        }
    }
    let mut right = None;
    for k in peak..xs.len() - 1 {
        if ys[k] >= level && ys[k + 1] <= level {
            right = Some(cross(xs[k], ys[k], xs[k + 1], ys[k + 1], level));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Some((l, r)),
        _ => None,
    }
}

fn cross(x0: f64, y0: f64, x1: f64, y1: f64, level: f64) -> f64 {
    if (y1 - y0).abs() < 1e-30 {
        return 0.5 * (x0 + x1);
    }
    x0 + (level - y0) * (x1 - x0) / (y1 - y0)
}

/// Mean ± standard deviation of a cohort of peak metrics, plus the
/// scatter table of (CEW, FWHM) pairs.
#[derive(Debug, Clone, Serialize)]
pub struct CohortStats {
    pub n: usize,
    pub mean_cew_nm: f64,
    pub std_cew_nm: f64,
    pub mean_fwhm_nm: f64,
    pub std_fwhm_nm: f64,
    /// (CEW, FWHM) per emitter.
    pub scatter: Vec<(f64, f64)>,
}

pub fn cohort_stats(metrics: &[PeakMetrics]) -> Result<CohortStats> {
    if metrics.len() < 2 {
        return Err(Error::InsufficientStatistics(
            "cohort statistics need at least 2 emitters".into(),
        ));
    }
    let n = metrics.len() as f64;
    let mean = |f: &dyn Fn(&PeakMetrics) -> f64| metrics.iter().map(|m| f(m)).sum::<f64>() / n;
    let std = |f: &dyn Fn(&PeakMetrics) -> f64, mu: f64| {
        (metrics.iter().map(|m| (f(m) - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let cew = |m: &PeakMetrics| m.cew_nm;
    let fwhm = |m: &PeakMetrics| m.fwhm_nm;
    let mean_cew = mean(&cew);
    let mean_fwhm = mean(&fwhm);
    Ok(CohortStats {
        n: metrics.len(),
        mean_cew_nm: mean_cew,
        std_cew_nm: std(&cew, mean_cew),
        mean_fwhm_nm: mean_fwhm,
        std_fwhm_nm: std(&fwhm, mean_fwhm),
        scatter: metrics.iter().map(|m| (m.cew_nm, m.fwhm_nm)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian_spectrum(center: f64, fwhm: f64, amp: f64, base: f64) -> Spectrum {
        let sigma = fwhm / FWHM_PER_SIGMA;
        let wl: Vec<f64> = (0..301).map(|k| center - 60.0 + 0.4 * k as f64).collect();
        let counts: Vec<f64> = wl
            .iter()
            .map(|&x| amp * (-((x - center) / sigma).powi(2) / 2.0).exp() + base)
            .collect();
        Spectrum::new(wl, counts).unwrap()
    }

    #[test]
    fn exact_gaussian_recovers_ensemble_values() {
        let spec = gaussian_spectrum(511.0, 19.0, 1.0, 0.0);
        let m = peak_metrics(&spec, PeakMethod::GaussianFit).unwrap();
        assert!((m.cew_nm - 511.0).abs() < 1e-6, "cew {}", m.cew_nm);
        assert!((m.fwhm_nm - 19.0).abs() < 1e-6, "fwhm {}", m.fwhm_nm);
    }

    #[test]
    fn symmetric_triangle_is_exact_under_interpolation() {
        // apex at 520 nm, half-max width 10 nm -> base half-width 10 nm
        let wl: Vec<f64> = (0..41).map(|k| 500.0 + k as f64).collect();
        let counts: Vec<f64> = wl
            .iter()
            .map(|&x| (1.0 - (x - 520.0f64).abs() / 20.0).max(0.0))
            .collect();
        let m = peak_metrics(&Spectrum::new(wl, counts).unwrap(), PeakMethod::HalfMaxInterpolation)
            .unwrap();
        assert!((m.cew_nm - 520.0).abs() < 1e-9);
        assert!((m.fwhm_nm - 20.0).abs() < 1e-9);
    }

    #[test]
    fn metrics_invariant_under_scaling_baseline_and_shift() {
        let base = gaussian_spectrum(511.0, 19.0, 2.0, 0.3);
        let m0 = peak_metrics(&base, PeakMethod::GaussianFit).unwrap();
        // uniform intensity scaling
        let scaled = Spectrum::new(
            base.wavelengths_nm.clone(),
            base.counts.iter().map(|c| c * 12.5).collect(),
        )
        .unwrap();
        let m1 = peak_metrics(&scaled, PeakMethod::GaussianFit).unwrap();
        assert!((m0.cew_nm - m1.cew_nm).abs() < 1e-6);
        assert!((m0.fwhm_nm - m1.fwhm_nm).abs() < 1e-6);
        // constant baseline offset
        let offset = Spectrum::new(
            base.wavelengths_nm.clone(),
            base.counts.iter().map(|c| c + 5.0).collect(),
        )
        .unwrap();
        let m2 = peak_metrics(&offset, PeakMethod::GaussianFit).unwrap();
        assert!((m0.cew_nm - m2.cew_nm).abs() < 1e-6);
        assert!((m0.fwhm_nm - m2.fwhm_nm).abs() < 1e-6);
        // wavelength shift moves CEW by the shift and keeps FWHM
        let delta = 7.25;
        let shifted = Spectrum::new(
            base.wavelengths_nm.iter().map(|w| w + delta).collect(),
            base.counts.clone(),
        )
        .unwrap();
        let m3 = peak_metrics(&shifted, PeakMethod::GaussianFit).unwrap();
        assert!((m3.cew_nm - (m0.cew_nm + delta)).abs() < 1e-6);
        assert!((m3.fwhm_nm - m0.fwhm_nm).abs() < 1e-6);
    }

    #[test]
    fn noisy_gaussian_cew_scatter_stays_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let clean = gaussian_spectrum(511.0, 19.0, 1.0, 0.0);
        let mut cews = Vec::new();
        for _ in 0..100 {
            let noisy = Spectrum::new(
                clean.wavelengths_nm.clone(),
                clean
                    .counts
                    .iter()
                    .map(|c| (c + 0.05 * (rng.random::<f64>() - 0.5) * 2.0).max(0.0))
                    .collect(),
            )
            .unwrap();
            cews.push(peak_metrics(&noisy, PeakMethod::GaussianFit).unwrap().cew_nm);
        }
        let mean = cews.iter().sum::<f64>() / cews.len() as f64;
        let std = (cews.iter().map(|c| (c - mean).powi(2)).sum::<f64>()
            / (cews.len() - 1) as f64)
            .sqrt();
        assert!(std < 0.2, "CEW std {std}");
    }

    #[test]
    fn multi_peak_and_flat_spectra_are_rejected() {
        let wl: Vec<f64> = (0..101).map(|k| 480.0 + k as f64).collect();
        let two_peaks: Vec<f64> = wl
            .iter()
            .map(|&x| {
                (-((x - 510.0) / 5.0f64).powi(2) / 2.0).exp()
                    + (-((x - 550.0) / 5.0f64).powi(2) / 2.0).exp()
            })
            .collect();
        assert!(matches!(
            peak_metrics(&Spectrum::new(wl.clone(), two_peaks).unwrap(), PeakMethod::GaussianFit),
            Err(Error::Shape(_))
        ));
        let flat = vec![5.0; wl.len()];
        assert!(matches!(
            peak_metrics(&Spectrum::new(wl, flat).unwrap(), PeakMethod::GaussianFit),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn cohort_stats_basics() {
        let m = |cew: f64, fwhm: f64| PeakMetrics {
            cew_nm: cew,
            fwhm_nm: fwhm,
            method: PeakMethod::GaussianFit,
        };
        let identical = vec![m(505.0, 15.0); 5];
        let s = cohort_stats(&identical).unwrap();
        assert_eq!(s.std_cew_nm, 0.0);
        assert_eq!(s.std_fwhm_nm, 0.0);

        let two = vec![m(10.0, 10.0), m(20.0, 20.0)];
        let s = cohort_stats(&two).unwrap();
        assert!((s.mean_cew_nm - 15.0).abs() < 1e-12);
        assert!((s.std_cew_nm - 50.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(s.scatter.len(), 2);

        assert!(cohort_stats(&[m(1.0, 1.0)]).is_err());
    }
}
