//! Fluorescence lifetime–intensity distribution (FLID) maps.
//!
//! Each complete intensity bin with at least two photons contributes one
//! point: its photon count and the mean photon delay after the pulse
//! edge, referenced to the mode of the global decay histogram. The point
//! cloud is turned into a density with a product Gaussian kernel.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kde::{kde2d, silverman_bandwidth, DensityGrid, GridSpec};
use crate::lifetime::decay_histogram;
use crate::stream::PhotonStream;
use crate::PS_PER_NS;

/// Decay-histogram bin width used to locate the pulse arrival (t₀).
const T0_HISTOGRAM_BIN_PS: u64 = 100;

/// One intensity bin in FLID space.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlidPoint {
    /// Photons in the bin.
    pub intensity: u32,
    /// Mean micro-time minus t₀, ns.
    pub lifetime_ns: f64,
}

/// FLID point cloud and its kernel density estimate.
#[derive(Debug, Clone, Serialize)]
pub struct FlidMap {
    pub points: Vec<FlidPoint>,
    pub grid: DensityGrid<f64>,
    pub bandwidth_intensity: f64,
    pub bandwidth_lifetime_ns: f64,
    /// Pulse arrival reference subtracted from the micro-times, ps.
    pub t0_ps: f64,
}

/// Builds the FLID map of a pulsed stream with the given intensity bin
/// width (10 ms in the measurements this mirrors).
pub fn flid(
    stream: &PhotonStream,
    bin_width_ps: u64,
    grid_spec: &GridSpec<f64>,
) -> Result<FlidMap> {
    if bin_width_ps == 0 {
        return Err(Error::InvalidInput("bin width must be positive".into()));
    }
    if !stream.is_pulsed() {
        return Err(Error::UnsupportedMode(
            "FLID lifetimes need pulsed micro-times".into(),
        ));
    }
    let decay = decay_histogram(stream, T0_HISTOGRAM_BIN_PS.min(stream.rep_period_ps))?;
    let t0_ps = (decay.peak_bin() as f64 + 0.5) * decay.bin_width_ps as f64;

    let n_bins = (stream.duration_ps / bin_width_ps) as usize;
    let period = stream.rep_period_ps;
    let mut count = vec![0u32; n_bins];
    let mut micro_sum = vec![0.0f64; n_bins];
    let span = n_bins as u64 * bin_width_ps;
    for rec in stream.records() {
        if rec.t_abs >= span {
            continue;
        }
        let bin = (rec.t_abs / bin_width_ps) as usize;
        count[bin] += 1;
        micro_sum[bin] += (rec.t_abs % period) as f64;
    }

    let points: Vec<FlidPoint> = count
        .iter()
        .zip(&micro_sum)
        .filter(|(&c, _)| c >= 2)
        .map(|(&c, &sum)| FlidPoint {
            intensity: c,
            lifetime_ns: (sum / f64::from(c) - t0_ps) / PS_PER_NS as f64,
        })
        .collect();
    if points.len() < 50 {
        return Err(Error::InsufficientStatistics(format!(
            "{} bins with at least two photons (need 50)",
            points.len()
        )));
    }

    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (f64::from(p.intensity), p.lifetime_ns))
        .collect();
    let xs: Vec<f64> = xy.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = xy.iter().map(|p| p.1).collect();
    let bw = (silverman_bandwidth(&xs), silverman_bandwidth(&ys));
    let grid = kde2d(&xy, grid_spec, Some(bw));

    Ok(FlidMap {
        points,
        grid,
        bandwidth_intensity: bw.0,
        bandwidth_lifetime_ns: bw.1,
        t0_ps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate, Blinking, EmitterModel, TruncatedPowerLaw};

    fn bright_model() -> EmitterModel {
        EmitterModel {
            rep_period_ps: 400_000,
            mean_excitons_per_pulse: 0.6,
            lifetime_bright_ps: 20_000.0,
            lifetime_dim_ps: 4_000.0,
            qy_bright: 0.9,
            qy_dim: 0.1,
            biexciton_leak: 0.0,
            blinking: None,
            detect_efficiency: 0.05,
            dark_rate_hz: 0.0,
            bleach_tau_ps: None,
            irf_sigma_ps: 0.0,
            dead_time_ps: 0,
            biexciton_lifetime_factor: 0.5,
            seed: 0,
        }
    }

    #[test]
    fn non_blinking_emitter_gives_single_compact_mode() {
        let model = bright_model();
        let duration = 12_000_000_000_000u64; // 12 s
        let stream = simulate(&model, duration, 41).unwrap();
        let map = flid(&stream, 10_000_000_000, &GridSpec::square(64)).unwrap();
        assert!((map.grid.riemann_mass() - 1.0).abs() < 1e-3);

        let peak = map.grid.values.iter().cloned().fold(0.0f64, f64::max);
        let modes = map.grid.local_maxima(peak * 0.2);
        assert_eq!(modes.len(), 1, "modes: {modes:?}");
        let (intensity, lifetime, _) = modes[0];
        // expected bin intensity: pulses per bin * P(n>=1) * qy * det
        let pulses_per_bin = 10_000_000_000.0 / 400_000.0;
        let expect_i = pulses_per_bin * (1.0 - (-0.6f64).exp()) * 0.9 * 0.05;
        assert!(
            (intensity - expect_i).abs() / expect_i < 0.1,
            "intensity mode {intensity} vs {expect_i}"
        );
        assert!(
            (lifetime - 20.0).abs() / 20.0 < 0.1,
            "lifetime mode {lifetime}"
        );
    }

    #[test]
    fn two_state_emitter_is_bimodal() {
        let mut model = bright_model();
        model.qy_dim = 0.35;
        model.detect_efficiency = 0.08;
        model.blinking = Some(Blinking {
            dwell_on: TruncatedPowerLaw {
                m: 1.1,
                tau_c_ps: 4e11,
                t_min_ps: 5e10,
            },
            dwell_off: TruncatedPowerLaw {
                m: 1.1,
                tau_c_ps: 4e11,
                t_min_ps: 5e10,
            },
        });
        let stream = simulate(&model, 40_000_000_000_000, 43).unwrap();
        let map = flid(&stream, 10_000_000_000, &GridSpec::square(96)).unwrap();
        let peak = map.grid.values.iter().cloned().fold(0.0f64, f64::max);
        let modes = map.grid.local_maxima(peak * 0.1);
        assert!(modes.len() >= 2, "modes: {modes:?}");
    }

    #[test]
    fn identical_micro_times_collapse_to_a_ridge() {
        // photons pinned to one micro-time: every bin shares one lifetime
        use crate::stream::{PhotonRecord, PhotonStream};
        let period = 1_000u64;
        let mut recs = Vec::new();
        let mut t = 100u64;
        while recs.len() < 3000 {
            recs.push(PhotonRecord::new(0, t));
            // 2-4 photons per 10-pulse bin, micro-time always 100 ps
            t += period * if recs.len() % 3 == 0 { 3 } else { 4 };
        }
        let duration = recs.last().unwrap().t_abs + period;
        let stream = PhotonStream::new(recs, period, duration).unwrap();
        let map = flid(&stream, period * 10, &GridSpec::square(48)).unwrap();
        let spread = map
            .points
            .iter()
            .map(|p| p.lifetime_ns)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        assert!(spread.1 - spread.0 < 1e-9, "lifetime spread {spread:?}");
        assert!((map.grid.riemann_mass() - 1.0).abs() < 1e-3);
    }
}
