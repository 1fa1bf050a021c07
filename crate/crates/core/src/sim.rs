//! Monte Carlo generator of photon streams from a phenomenological
//! blinking-emitter model.
//!
//! The emitter alternates between a bright (neutral) and a dim (charged)
//! state following heavy-tailed dwell-time laws; every excitation pulse
//! draws a Poisson exciton number, emits at most one exciton photon plus
//! at most one biexciton photon, and detection applies quantum yield,
//! bleaching, IRF jitter, a 50/50 beamsplitter, and per-detector dark
//! counts. Output is deterministic for a fixed seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{PhotonRecord, PhotonStream};
use crate::PS_PER_SEC;

/// Truncated power-law dwell-time law with exponent `m`, exponential
/// cut-off `tau_c_ps`, and support `[t_min_ps, ∞)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct TruncatedPowerLaw {
    pub m: f64,
    pub tau_c_ps: f64,
    pub t_min_ps: f64,
}

impl TruncatedPowerLaw {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_min_ps > 0.0 && self.t_min_ps.is_finite()) {
            return Err(Error::InvalidModel("t_min_ps must be positive".into()));
        }
        if !(self.tau_c_ps > self.t_min_ps) {
            return Err(Error::InvalidModel(
                "tau_c_ps must exceed t_min_ps".into(),
            ));
        }
        if !(self.m > 0.0) {
            return Err(Error::InvalidModel("m must be positive".into()));
        }
        if !self.tau_c_ps.is_finite() && self.m <= 1.0 {
            return Err(Error::InvalidModel(
                "infinite tau_c_ps needs m > 1 for a normalizable density".into(),
            ));
        }
        Ok(())
    }
}

/// Draws a duration with density `∝ t^{−m} e^{−t/τ_c}` on `[t_min, ∞)`
/// by rejection from a pure power-law (`m > 1`) or shifted exponential
/// (`m ≤ 1`) envelope.
pub fn sample_truncated_power_law<R: Rng>(law: &TruncatedPowerLaw, rng: &mut R) -> f64 {
    let TruncatedPowerLaw {
        m,
        tau_c_ps: tau,
        t_min_ps: t_min,
    } = *law;
    loop {
        if m > 1.0 {
            let u = positive_uniform(rng);
            let t = t_min * u.powf(-1.0 / (m - 1.0));
            // envelope mismatch is exactly the cut-off factor
            let accept = if tau.is_finite() {
                rng.random::<f64>() < (-(t - t_min) / tau).exp()
            } else {
                true
            };
            if accept && t.is_finite() {
                return t;
            }
        } else {
            let u = positive_uniform(rng);
            let t = t_min - tau * u.ln();
            if rng.random::<f64>() < (t / t_min).powf(-m) {
                return t;
            }
        }
    }
}

/// Draws a dwell time whose *survival function* is the truncated power
/// law, `S(t) = (t/t_min)^{−m} e^{−(t−t_min)/τ_c}`, by inverse transform
/// (bisection on the monotone log-survival).
///
/// Measured OFF-duration statistics are fitted with that survival form,
/// so blinking dwell times are generated from it directly: a simulation
/// configured with the fitted `(m, τ_c)` reproduces the fitted curve.
pub fn sample_dwell<R: Rng>(law: &TruncatedPowerLaw, rng: &mut R) -> f64 {
    let TruncatedPowerLaw {
        m,
        tau_c_ps: tau,
        t_min_ps: t_min,
    } = *law;
    let u = positive_uniform(rng);
    let log_u = u.ln();
    // phi(t) = m ln(t/t_min) + (t - t_min)/tau + ln u, increasing in t
    let phi = |t: f64| m * (t / t_min).ln() + (t - t_min) / tau + log_u;
    let mut lo = t_min;
    let mut hi = t_min * 2.0;
    let mut guard = 0;
    while phi(hi) < 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 600 {
            return hi;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-12 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn positive_uniform<R: Rng>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1 = positive_uniform(rng);
    let u2 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Dwell-time laws of the two-state blinking process.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Blinking {
    pub dwell_on: TruncatedPowerLaw,
    pub dwell_off: TruncatedPowerLaw,
}

fn default_bx_factor() -> f64 {
    0.5
}

/// Phenomenological emitter + detection model.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EmitterModel {
    /// Excitation pulse period in ps (400 000 ps for 2.5 MHz).
    pub rep_period_ps: u64,
    /// Mean exciton number per pulse, proportional to P/P_sat.
    pub mean_excitons_per_pulse: f64,
    pub lifetime_bright_ps: f64,
    pub lifetime_dim_ps: f64,
    pub qy_bright: f64,
    pub qy_dim: f64,
    /// Probability that a pulse with ≥ 2 excitons also emits a biexciton
    /// photon; the knob that sets g²(0).
    pub biexciton_leak: f64,
    /// `None` disables blinking (emitter always bright).
    #[serde(default)]
    pub blinking: Option<Blinking>,
    pub detect_efficiency: f64,
    /// Dark counts per detector, Hz.
    #[serde(default)]
    pub dark_rate_hz: f64,
    /// Exponential decay constant of the quantum yield; `None` = stable.
    #[serde(default)]
    pub bleach_tau_ps: Option<f64>,
    /// Gaussian timing-jitter width of the detection chain, ps.
    #[serde(default)]
    pub irf_sigma_ps: f64,
    /// Detector dead time per channel; 0 disables it.
    #[serde(default)]
    pub dead_time_ps: u64,
    /// Biexciton photons decay faster than excitons by this factor.
    #[serde(default = "default_bx_factor")]
    pub biexciton_lifetime_factor: f64,
    /// Default RNG seed; an explicit seed argument overrides it.
    #[serde(default)]
    pub seed: u64,
}

impl EmitterModel {
    pub fn validate(&self) -> Result<()> {
        if self.rep_period_ps == 0 {
            return Err(Error::InvalidModel("rep_period_ps must be positive".into()));
        }
        for (name, p) in [
            ("qy_bright", self.qy_bright),
            ("qy_dim", self.qy_dim),
            ("biexciton_leak", self.biexciton_leak),
            ("detect_efficiency", self.detect_efficiency),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidModel(format!("{name} must be in [0, 1]")));
            }
        }
        if self.qy_dim > self.qy_bright {
            return Err(Error::InvalidModel("qy_dim must not exceed qy_bright".into()));
        }
        for (name, t) in [
            ("lifetime_bright_ps", self.lifetime_bright_ps),
            ("lifetime_dim_ps", self.lifetime_dim_ps),
        ] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidModel(format!("{name} must be positive")));
            }
        }
        if let Some(tau) = self.bleach_tau_ps {
            if !(tau > 0.0) {
                return Err(Error::InvalidModel("bleach_tau_ps must be positive".into()));
            }
        }
        if !(self.mean_excitons_per_pulse >= 0.0) || !(self.dark_rate_hz >= 0.0) {
            return Err(Error::InvalidModel(
                "rates and exciton numbers must be non-negative".into(),
            ));
        }
        if !(self.irf_sigma_ps >= 0.0) {
            return Err(Error::InvalidModel("irf_sigma_ps must be non-negative".into()));
        }
        if !(self.biexciton_lifetime_factor > 0.0) {
            return Err(Error::InvalidModel(
                "biexciton_lifetime_factor must be positive".into(),
            ));
        }
        if let Some(b) = &self.blinking {
            b.dwell_on.validate()?;
            b.dwell_off.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

/// One constant-state stretch of the simulated emitter timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSegment {
    pub bright: bool,
    pub start_ps: u64,
    pub end_ps: u64,
}

/// Ground-truth bookkeeping emitted alongside the photon stream.
#[derive(Debug, Clone, Default)]
pub struct SimTrace {
    pub segments: Vec<StateSegment>,
    pub n_pulses: u64,
    /// Pulses whose exciton photon was emitted (pre-detection).
    pub n_first_emitted: u64,
    /// Pulses that emitted both an exciton and a biexciton photon.
    pub n_pairs_emitted: u64,
    /// Pulses with both photons detected (any channel combination).
    pub n_pairs_detected: u64,
}

/// Runs the generator, discarding the trace.
pub fn simulate(model: &EmitterModel, duration_ps: u64, seed: u64) -> Result<PhotonStream> {
    simulate_traced(model, duration_ps, seed).map(|(s, _)| s)
}

/// Runs the generator and returns the internal ground-truth log with the
/// stream. Identical seeds produce byte-identical streams.
pub fn simulate_traced(
    model: &EmitterModel,
    duration_ps: u64,
    seed: u64,
) -> Result<(PhotonStream, SimTrace)> {
    model.validate()?;
    if duration_ps < model.rep_period_ps {
        return Err(Error::InvalidInput(
            "duration must cover at least one pulse period".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = SimTrace::default();

    // state timeline, bright first
    match &model.blinking {
        None => trace.segments.push(StateSegment {
            bright: true,
            start_ps: 0,
            end_ps: duration_ps,
        }),
        Some(blinking) => {
            let mut t = 0u64;
            let mut bright = true;
            while t < duration_ps {
                let law = if bright {
                    &blinking.dwell_on
                } else {
                    &blinking.dwell_off
                };
                let dwell = sample_dwell(law, &mut rng).round().max(1.0) as u64;
                let end = t.saturating_add(dwell).min(duration_ps);
                trace.segments.push(StateSegment {
                    bright,
                    start_ps: t,
                    end_ps: end,
                });
                bright = !bright;
                t = end;
            }
        }
    }

    let lambda = model.mean_excitons_per_pulse;
    let p_active = -(-lambda).exp_m1(); // P(n >= 1)
    let pair_given_active = if p_active > 0.0 {
        (1.0 - (-lambda).exp() * (1.0 + lambda)) / p_active // P(n >= 2 | n >= 1)
    } else {
        0.0
    };

    let period = model.rep_period_ps;
    let n_pulses = duration_ps / period + u64::from(duration_ps % period != 0);
    trace.n_pulses = n_pulses;

    let expect =
        (n_pulses as f64 * p_active * model.qy_bright * model.detect_efficiency).max(16.0);
    let mut records: Vec<PhotonRecord> = Vec::with_capacity(expect as usize + 1024);

    if p_active > 0.0 {
        let log_skip = (1.0 - p_active).ln(); // -inf when every pulse fires
        let mut seg_idx = 0usize;
        let mut pulse = geometric_gap(&mut rng, p_active, log_skip);
        while pulse < n_pulses {
            let t_pulse = pulse * period;
            while seg_idx + 1 < trace.segments.len() && t_pulse >= trace.segments[seg_idx].end_ps
            {
                seg_idx += 1;
            }
            let bright = trace.segments[seg_idx].bright;
            let (qy_state, lifetime) = if bright {
                (model.qy_bright, model.lifetime_bright_ps)
            } else {
                (model.qy_dim, model.lifetime_dim_ps)
            };
            let bleach = match model.bleach_tau_ps {
                Some(tau) => (-(t_pulse as f64) / tau).exp(),
                None => 1.0,
            };
            let qy = qy_state * bleach;

            let pair_pulse = pair_given_active > 0.0 && rng.random::<f64>() < pair_given_active;
            let first = rng.random::<f64>() < qy;
            let second = pair_pulse && rng.random::<f64>() < model.biexciton_leak * qy;
            if first {
                trace.n_first_emitted += 1;
            }
            if first && second {
                trace.n_pairs_emitted += 1;
            }

            let mut detected_here = 0u8;
            for (emitted, tau_emit) in [
                (first, lifetime),
                (second, lifetime * model.biexciton_lifetime_factor),
            ] {
                if !emitted {
                    continue;
                }
                let mut delay = -tau_emit * positive_uniform(&mut rng).ln();
                if model.irf_sigma_ps > 0.0 {
                    delay += model.irf_sigma_ps * standard_normal(&mut rng);
                }
                let route = rng.random::<f64>();
                if route >= model.detect_efficiency {
                    continue;
                }
                let channel = u8::from(route >= model.detect_efficiency * 0.5);
                let t_abs = t_pulse.saturating_add(delay.max(0.0).round() as u64);
                if t_abs <= duration_ps {
                    records.push(PhotonRecord { t_abs, channel });
                    detected_here += 1;
                }
            }
            if detected_here == 2 {
                trace.n_pairs_detected += 1;
            }

            pulse += 1 + geometric_gap(&mut rng, p_active, log_skip);
        }
    }

    if model.dark_rate_hz > 0.0 {
        let mean_gap_ps = PS_PER_SEC as f64 / model.dark_rate_hz;
        for channel in [0u8, 1u8] {
            let mut t = 0.0f64;
            loop {
                t += -mean_gap_ps * positive_uniform(&mut rng).ln();
                if t > duration_ps as f64 {
                    break;
                }
                records.push(PhotonRecord {
                    t_abs: t.round() as u64,
                    channel,
                });
            }
        }
    }

    records.sort_unstable_by_key(|r| (r.t_abs, r.channel));

    if model.dead_time_ps > 0 {
        let dead = model.dead_time_ps;
        let mut last: [Option<u64>; 2] = [None, None];
        records.retain(|r| {
            let slot = &mut last[r.channel as usize];
            let keep = match *slot {
                Some(prev) => r.t_abs.saturating_sub(prev) >= dead,
                None => true,
            };
            if keep {
                *slot = Some(r.t_abs);
            }
            keep
        });
    }

    let stream = PhotonStream::new(records, period, duration_ps)?;
    Ok((stream, trace))
}

fn geometric_gap<R: Rng>(rng: &mut R, p: f64, log_skip: f64) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    let u = positive_uniform(rng);
    let g = (u.ln() / log_skip).floor();
    if g.is_finite() && g >= 0.0 {
        g as u64
    } else {
        0
    }
}

/// Simulates the model at several relative excitation powers and returns
/// the detected count rate (counts/s) at each, for saturation fitting.
pub fn sweep_power(
    model: &EmitterModel,
    powers: &[f64],
    duration_ps: u64,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if powers.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::InvalidInput("powers must be positive".into()));
    }
    let duration_s = duration_ps as f64 / PS_PER_SEC as f64;
    let mut out = Vec::with_capacity(powers.len());
    for (i, &power) in powers.iter().enumerate() {
        let mut scaled = model.clone();
        scaled.mean_excitons_per_pulse = model.mean_excitons_per_pulse * power;
        let stream = simulate(&scaled, duration_ps, seed.wrapping_add(i as u64))?;
        out.push((power, stream.len() as f64 / duration_s));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_model() -> EmitterModel {
        EmitterModel {
            rep_period_ps: 400_000,
            mean_excitons_per_pulse: 0.4,
            lifetime_bright_ps: 10_000.0,
            lifetime_dim_ps: 2_000.0,
            qy_bright: 0.9,
            qy_dim: 0.09,
            biexciton_leak: 0.0,
            blinking: None,
            detect_efficiency: 0.5,
            dark_rate_hz: 0.0,
            bleach_tau_ps: None,
            irf_sigma_ps: 0.0,
            dead_time_ps: 0,
            biexciton_lifetime_factor: 0.5,
            seed: 0,
        }
    }

    #[test]
    fn same_seed_reproduces_stream() {
        let model = base_model();
        let a = simulate(&model, 50_000_000, 7).unwrap();
        let b = simulate(&model, 50_000_000, 7).unwrap();
        assert_eq!(a, b);
        let c = simulate(&model, 50_000_000, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn output_passes_stream_validation() {
        let mut model = base_model();
        model.dark_rate_hz = 500.0;
        model.irf_sigma_ps = 50.0;
        model.blinking = Some(Blinking {
            dwell_on: TruncatedPowerLaw {
                m: 1.2,
                tau_c_ps: 3e11,
                t_min_ps: 1e10,
            },
            dwell_off: TruncatedPowerLaw {
                m: 1.34,
                tau_c_ps: 2.5e11,
                t_min_ps: 1e10,
            },
        });
        let stream = simulate(&model, 2_000_000_000_000, 3).unwrap();
        stream.validate().unwrap();
        assert!(stream.len() > 100);
        assert!(stream.has_channel(0) && stream.has_channel(1));
    }

    #[test]
    fn zero_leak_never_emits_pairs() {
        let mut model = base_model();
        model.mean_excitons_per_pulse = 2.0;
        let (_, trace) = simulate_traced(&model, 1_000_000_000, 5).unwrap();
        assert_eq!(trace.n_pairs_emitted, 0);
        assert_eq!(trace.n_pairs_detected, 0);
    }

    #[test]
    fn saturated_excitation_approaches_qy_det_rate() {
        // <N> >> 1: every pulse is active, rate -> qy * det * f
        let mut model = base_model();
        model.mean_excitons_per_pulse = 30.0;
        let duration = 400_000_000_000u64; // 0.4 s -> 1e6 pulses
        let stream = simulate(&model, duration, 11).unwrap();
        let pulses = duration / model.rep_period_ps;
        let expected = pulses as f64 * model.qy_bright * model.detect_efficiency;
        let got = stream.len() as f64;
        assert!(
            (got - expected).abs() < 4.0 * expected.sqrt(),
            "got {got}, expected {expected}"
        );
    }

    #[test]
    fn pair_detection_frequency_matches_leak_formula() {
        let mut model = base_model();
        model.biexciton_leak = 0.2;
        model.mean_excitons_per_pulse = 0.8;
        model.detect_efficiency = 0.8;
        let duration = 800_000_000_000u64; // 2e6 pulses
        let (_, trace) = simulate_traced(&model, duration, 13).unwrap();
        let lambda: f64 = 0.8;
        let p_ge2 = 1.0 - (-lambda).exp() * (1.0 + lambda);
        let expect_rate = model.biexciton_leak
            * model.qy_bright
            * model.qy_bright
            * p_ge2
            * model.detect_efficiency
            * model.detect_efficiency;
        let expected = trace.n_pulses as f64 * expect_rate;
        let got = trace.n_pairs_detected as f64;
        assert!(
            (got - expected).abs() < 4.0 * expected.sqrt().max(1.0),
            "got {got}, expected {expected}"
        );
    }

    #[test]
    fn dwell_sampler_respects_support() {
        let law = TruncatedPowerLaw {
            m: 0.83,
            tau_c_ps: 1.5e11,
            t_min_ps: 1e10,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            assert!(sample_dwell(&law, &mut rng) >= law.t_min_ps);
            assert!(sample_truncated_power_law(&law, &mut rng) >= law.t_min_ps);
        }
    }

    #[test]
    fn density_sampler_matches_pure_power_law_cdf() {
        // tau_c -> inf, m = 2: analytic CDF is 1 - t_min/t
        let law = TruncatedPowerLaw {
            m: 2.0,
            tau_c_ps: f64::INFINITY,
            t_min_ps: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut samples: Vec<f64> = (0..20_000)
            .map(|_| sample_truncated_power_law(&law, &mut rng))
            .collect();
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = samples.len() as f64;
        let mut ks: f64 = 0.0;
        for (i, &t) in samples.iter().enumerate() {
            let target = 1.0 - 1.0 / t;
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            ks = ks.max((target - lo).abs()).max((target - hi).abs());
        }
        assert!(ks < 0.015, "KS statistic {ks}");
    }

    #[test]
    fn model_json_round_trip() {
        let mut model = base_model();
        model.blinking = Some(Blinking {
            dwell_on: TruncatedPowerLaw {
                m: 1.2,
                tau_c_ps: 5e11,
                t_min_ps: 5e10,
            },
            dwell_off: TruncatedPowerLaw {
                m: 0.83,
                tau_c_ps: 1.5e11,
                t_min_ps: 5e10,
            },
        });
        model.bleach_tau_ps = Some(3e14);
        let json = model.to_json();
        let back = EmitterModel::from_json(&json).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn invalid_models_are_rejected() {
        let mut m = base_model();
        m.qy_dim = 0.95; // exceeds qy_bright
        assert!(m.validate().is_err());
        let mut m = base_model();
        m.detect_efficiency = 1.5;
        assert!(m.validate().is_err());
        let mut m = base_model();
        m.rep_period_ps = 0;
        assert!(m.validate().is_err());
    }
}
