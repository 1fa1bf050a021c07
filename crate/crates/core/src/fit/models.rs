//! Curve models with analytic partial derivatives.

use super::CurveModel;
use crate::real::Real;

/// Tri-exponential photoluminescence decay with a constant baseline:
/// `I(t) = Σᵢ Aᵢ exp(−(t−t₀)/τᵢ) + B`.
///
/// Parameters: `[a1, tau1, a2, tau2, a3, tau3, b]`.
///
/// The pulse offset `t₀` is held fixed: with free amplitudes the model is
/// invariant under `t₀ → t₀ + δ`, `Aᵢ → Aᵢ e^{−δ/τᵢ}`, so optimizing it
/// would only slide along that degenerate manifold.
#[derive(Debug, Clone, Copy)]
pub struct TriExpDecay<F> {
    pub t0: F,
}

impl<F: Real> CurveModel<F> for TriExpDecay<F> {
    fn n_params(&self) -> usize {
        7
    }

    fn eval(&self, t: F, p: &[F]) -> F {
        let dt = t - self.t0;
        let mut acc = p[6];
        for i in 0..3 {
            let (a, tau) = (p[2 * i], p[2 * i + 1]);
            acc = acc + a * (-dt / tau).exp();
        }
        acc
    }

    fn partials(&self, t: F, p: &[F], out: &mut [F]) {
        let dt = t - self.t0;
        for i in 0..3 {
            let (a, tau) = (p[2 * i], p[2 * i + 1]);
            let e = (-dt / tau).exp();
            out[2 * i] = e;
            out[2 * i + 1] = a * e * dt / (tau * tau);
        }
        out[6] = F::one();
    }

    fn clamp(&self, p: &mut [F]) {
        for i in 0..3 {
            if p[2 * i] < F::zero() {
                p[2 * i] = F::zero();
            }
            if p[2 * i + 1] < F::of(1e-9) {
                p[2 * i + 1] = F::of(1e-9);
            }
        }
        // the floor counts dark events; it cannot be negative
        if p[6] < F::zero() {
            p[6] = F::zero();
        }
    }
}

/// Emission saturation versus excitation power:
/// `I(P) = A (1 − e^{−P/P_sat}) + B·P/P_sat`,
/// the exciton term saturating and the biexciton term growing linearly.
///
/// Parameters: `[a, b, p_sat]`.
#[derive(Debug, Clone, Copy)]
pub struct SaturationCurve;

impl<F: Real> CurveModel<F> for SaturationCurve {
    fn n_params(&self) -> usize {
        3
    }

    fn eval(&self, power: F, p: &[F]) -> F {
        let u = power / p[2];
        p[0] * (F::one() - (-u).exp()) + p[1] * u
    }

    fn partials(&self, power: F, p: &[F], out: &mut [F]) {
        let u = power / p[2];
        let e = (-u).exp();
        out[0] = F::one() - e;
        out[1] = u;
        out[2] = -(power / (p[2] * p[2])) * (p[0] * e + p[1]);
    }

    fn clamp(&self, p: &mut [F]) {
        if p[0] < F::zero() {
            p[0] = F::zero();
        }
        if p[1] < F::zero() {
            p[1] = F::zero();
        }
        if p[2] < F::of(1e-12) {
            p[2] = F::of(1e-12);
        }
    }
}

/// Gaussian emission peak over a constant baseline:
/// `y(λ) = A exp(−(λ−μ)²/(2σ²)) + c`.
///
/// Parameters: `[amplitude, center, sigma, baseline]`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianPeak;

impl<F: Real> CurveModel<F> for GaussianPeak {
    fn n_params(&self) -> usize {
        4
    }

    fn eval(&self, x: F, p: &[F]) -> F {
        let z = (x - p[1]) / p[2];
        p[0] * (-z * z / F::of(2.0)).exp() + p[3]
    }

    fn partials(&self, x: F, p: &[F], out: &mut [F]) {
        let d = x - p[1];
        let z = d / p[2];
        let e = (-z * z / F::of(2.0)).exp();
        out[0] = e;
        out[1] = p[0] * e * d / (p[2] * p[2]);
        out[2] = p[0] * e * d * d / (p[2] * p[2] * p[2]);
        out[3] = F::one();
    }

    fn clamp(&self, p: &mut [F]) {
        if p[0] < F::of(1e-12) {
            p[0] = F::of(1e-12);
        }
        if p[2] < F::of(1e-12) {
            p[2] = F::of(1e-12);
        }
    }
}

/// Log of a truncated power law, fitted against log-survival data:
/// `ln S(t) = ln C − m ln t − t/τ_c`.
///
/// Parameters: `[ln_c, m, tau_c]`.
#[derive(Debug, Clone, Copy)]
pub struct LogTruncatedPowerLaw;

impl<F: Real> CurveModel<F> for LogTruncatedPowerLaw {
    fn n_params(&self) -> usize {
        3
    }

    fn eval(&self, t: F, p: &[F]) -> F {
        p[0] - p[1] * t.ln() - t / p[2]
    }

    fn partials(&self, t: F, p: &[F], out: &mut [F]) {
        out[0] = F::one();
        out[1] = -t.ln();
        out[2] = t / (p[2] * p[2]);
    }

    fn clamp(&self, p: &mut [F]) {
        if p[2] < F::of(1e-15) {
            p[2] = F::of(1e-15);
        }
    }
}
