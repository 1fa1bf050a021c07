//! Weighted nonlinear least squares by damped Gauss–Newton
//! (Levenberg–Marquardt schedule), generic over the scalar type.
//!
//! A model supplies its value and analytic partial derivatives at one
//! abscissa; the driver assembles the weighted normal equations and damps
//! with the Marquardt diagonal. Steps that raise the cost or leave the
//! model's feasible region raise the damping instead of being taken.

pub mod linalg;
pub mod models;

use crate::real::Real;

/// A scalar-valued curve model with analytic partial derivatives.
pub trait CurveModel<F: Real> {
    fn n_params(&self) -> usize;

    /// Model value at abscissa `x`.
    fn eval(&self, x: F, params: &[F]) -> F;

    /// Partial derivatives of the model value with respect to each
    /// parameter, written into `out` (length `n_params`).
    fn partials(&self, x: F, params: &[F], out: &mut [F]);

    /// Projects a trial parameter vector into the model's domain
    /// (non-negative amplitudes, positive time constants, ...).
    fn clamp(&self, _params: &mut [F]) {}
}

/// Damping schedule and stopping rules.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions<F> {
    pub max_iterations: usize,
    /// Stop when the relative cost decrease falls below this.
    pub rel_cost_tol: F,
    pub lambda_init: F,
    pub lambda_up: F,
    pub lambda_down: F,
}

impl<F: Real> Default for FitOptions<F> {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            rel_cost_tol: F::of(1e-8),
            lambda_init: F::of(1e-3),
            lambda_up: F::of(10.0),
            lambda_down: F::of(0.1),
        }
    }
}

/// Fit result: best parameters seen, cost, and convergence diagnostics.
#[derive(Debug, Clone)]
pub struct FitOutcome<F> {
    pub params: Vec<F>,
    /// Weighted sum of squared residuals at `params`.
    pub cost: F,
    /// Unweighted root-mean-square residual.
    pub residual_rms: F,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `Σ wᵢ (model(xᵢ) − yᵢ)²` starting from `init`.
///
/// `weights` of `None` means uniform weights. Non-convergence is reported
/// through the `converged` flag with the best parameters found so far.
pub fn fit_least_squares<F: Real, M: CurveModel<F>>(
    model: &M,
    xs: &[F],
    ys: &[F],
    weights: Option<&[F]>,
    init: &[F],
    options: &FitOptions<F>,
) -> FitOutcome<F> {
    let n_params = model.n_params();
    assert_eq!(init.len(), n_params);
    assert_eq!(xs.len(), ys.len());
    let weight = |i: usize| weights.map_or(F::one(), |w| w[i]);

    let cost_of = |p: &[F]| -> F {
        let mut acc = F::zero();
        for i in 0..xs.len() {
            let r = model.eval(xs[i], p) - ys[i];
            acc = acc + weight(i) * r * r;
        }
        acc
    };

    let mut params = init.to_vec();
    let mut cost = cost_of(&params);
    let cost_start = cost;
    let mut lambda = options.lambda_init;
    let mut converged = false;
    let mut iterations = 0;
    // stop only after two consecutive undamped steps with negligible
    // relative improvement: a single small drop mid-descent (one damped
    // crawl iteration) must not end the fit early
    let mut stagnant_steps = 0;
    let mut grad_start = F::nan();

    let mut jtj = vec![F::zero(); n_params * n_params];
    let mut jtr = vec![F::zero(); n_params];
    let mut row = vec![F::zero(); n_params];

    for iter in 0..options.max_iterations {
        iterations = iter + 1;

        for v in jtj.iter_mut() {
            *v = F::zero();
        }
        for v in jtr.iter_mut() {
            *v = F::zero();
        }
        for i in 0..xs.len() {
            let w = weight(i);
            let r = model.eval(xs[i], &params) - ys[i];
            model.partials(xs[i], &params, &mut row);
            for a in 0..n_params {
                jtr[a] = jtr[a] + w * row[a] * r;
                for b in a..n_params {
                    jtj[a * n_params + b] = jtj[a * n_params + b] + w * row[a] * row[b];
                }
            }
        }
        for a in 1..n_params {
            for b in 0..a {
                jtj[a * n_params + b] = jtj[b * n_params + a];
            }
        }
        let grad_norm = jtr.iter().map(|&g| g * g).sum::<F>().sqrt();
        if grad_start.is_nan() {
            grad_start = grad_norm;
        }
        if grad_norm == F::zero() || cost <= F::of(1e-16) * cost_start {
            converged = true;
            break;
        }

        // Marquardt scaling keeps the step meaningful across badly scaled
        // parameters; floor the diagonal so dead parameters stay solvable.
        let max_diag = (0..n_params)
            .map(|a| jtj[a * n_params + a])
            .fold(F::zero(), |m, v| if v > m { v } else { m });
        let diag_floor = (max_diag + F::of(1e-300)) * F::of(1e-12);

        let mut improved = false;
        for _ in 0..24 {
            let mut lhs = jtj.clone();
            let mut rhs: Vec<F> = jtr.iter().map(|&g| -g).collect();
            for a in 0..n_params {
                let d = jtj[a * n_params + a];
                let d = if d > diag_floor { d } else { diag_floor };
                lhs[a * n_params + a] = lhs[a * n_params + a] + lambda * d;
            }
            if linalg::solve_in_place(&mut lhs, &mut rhs, n_params) {
                let mut trial: Vec<F> = params
                    .iter()
                    .zip(rhs.iter())
                    .map(|(&p, &d)| p + d)
                    .collect();
                model.clamp(&mut trial);
                let trial_cost = cost_of(&trial);
                if trial_cost.is_finite() && trial_cost <= cost {
                    let drop = cost - trial_cost;
                    let step_collapse = params.iter().zip(trial.iter()).all(|(&p, &t)| {
                        (t - p).abs() <= F::of(1e-11) * (p.abs() + F::of(1e-30))
                    });
                    params = trial;
                    let prev_cost = cost;
                    cost = trial_cost;
                    lambda = lambda * options.lambda_down;
                    if lambda < F::of(1e-12) {
                        lambda = F::of(1e-12);
                    }
                    improved = true;
                    if drop <= options.rel_cost_tol * (prev_cost + F::of(1e-300)) {
                        stagnant_steps += 1;
                        if stagnant_steps >= 2 || step_collapse {
                            converged = true;
                        }
                    } else {
                        stagnant_steps = 0;
                    }
                    break;
                }
            }
            lambda = lambda * options.lambda_up;
            if lambda > F::of(1e14) {
                break;
            }
        }

        if converged {
            break;
        }
        if !improved {
            // Damping exhausted without a downhill step. Right after a
            // stagnant accepted step that is the cost floor, not a stall;
            // otherwise require the gradient to have collapsed relative to
            // where the descent began.
            converged = stagnant_steps >= 1 || grad_norm <= F::of(1e-8) * grad_start;
            break;
        }
    }

    let mut sq = F::zero();
    for i in 0..xs.len() {
        let r = model.eval(xs[i], &params) - ys[i];
        sq = sq + r * r;
    }
    let residual_rms = if xs.is_empty() {
        F::zero()
    } else {
        (sq / F::of_usize(xs.len())).sqrt()
    };

    FitOutcome {
        params,
        cost,
        residual_rms,
        iterations,
        converged,
    }
}

/// Central-difference approximation of the model's partial derivatives,
/// independent of [`CurveModel::partials`]. Used to cross-check analytic
/// Jacobians.
pub fn numerical_partials<F: Real, M: CurveModel<F>>(
    model: &M,
    x: F,
    params: &[F],
    out: &mut [F],
) {
    let mut plus = params.to_vec();
    let mut minus = params.to_vec();
    // cube-root-of-eps step is the standard central-difference compromise
    let base = F::of(f64::EPSILON).powf(F::of(1.0 / 3.0));
    for k in 0..params.len() {
        let h = base * (params[k].abs() + F::one());
        plus[k] = params[k] + h;
        minus[k] = params[k] - h;
        let two_h = plus[k] - minus[k];
        out[k] = (model.eval(x, &plus) - model.eval(x, &minus)) / two_h;
        plus[k] = params[k];
        minus[k] = params[k];
    }
}

#[cfg(test)]
mod tests {
    use super::models::GaussianPeak;
    use super::*;

    #[test]
    fn recovers_noiseless_gaussian_exactly() {
        let model = GaussianPeak;
        let truth = [3.0f64, 510.0, 8.0, 0.25];
        let xs: Vec<f64> = (0..200).map(|i| 470.0 + 0.4 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| model.eval(x, &truth)).collect();
        let init = [2.0, 505.0, 12.0, 0.0];
        let out = fit_least_squares(&model, &xs, &ys, None, &init, &FitOptions::default());
        assert!(out.converged);
        for (got, want) in out.params.iter().zip(truth.iter()) {
            assert!(
                (got - want).abs() < 1e-7 * want.abs().max(1.0),
                "got {got}, want {want}"
            );
        }
    }

    #[test]
    fn generic_engine_runs_in_f32() {
        let model = GaussianPeak;
        let truth = [2.0f32, 5.0, 1.5, 0.1];
        let xs: Vec<f32> = (0..100).map(|i| 0.1 * i as f32).collect();
        let ys: Vec<f32> = xs.iter().map(|&x| model.eval(x, &truth)).collect();
        let init = [1.0f32, 4.0, 2.0, 0.0];
        let out = fit_least_squares(&model, &xs, &ys, None, &init, &FitOptions::default());
        assert!(out.converged);
        assert!((out.params[1] - 5.0).abs() < 1e-3);
    }

    #[test]
    fn flags_non_convergence_at_iteration_cap() {
        let model = GaussianPeak;
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| (x * 0.7).sin()).collect();
        let options = FitOptions {
            max_iterations: 1,
            ..FitOptions::default()
        };
        let out = fit_least_squares(&model, &xs, &ys, None, &[1.0, 25.0, 5.0, 0.0], &options);
        assert_eq!(out.iterations, 1);
        assert!(!out.params.iter().any(|p| p.is_nan()));
    }
}
