//! Two-dimensional kernel density estimation with a product Gaussian
//! kernel and Silverman's rule-of-thumb bandwidths.

use rayon::prelude::*;
use serde::Serialize;

use crate::real::Real;

/// Requested grid resolution and optional explicit axis ranges.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec<F> {
    pub nx: usize,
    pub ny: usize,
    /// Data range ± 3 bandwidths when absent.
    pub x_range: Option<(F, F)>,
    pub y_range: Option<(F, F)>,
}

impl<F> GridSpec<F> {
    pub fn square(n: usize) -> Self {
        Self {
            nx: n,
            ny: n,
            x_range: None,
            y_range: None,
        }
    }
}

/// Density sampled at cell centers of a regular grid, normalized so the
/// Riemann sum `Σ values · dx · dy` is exactly 1.
#[derive(Debug, Clone, Serialize)]
pub struct DensityGrid<F> {
    pub x0: F,
    pub dx: F,
    pub nx: usize,
    pub y0: F,
    pub dy: F,
    pub ny: usize,
    /// Row-major, `values[iy * nx + ix]`.
    pub values: Vec<F>,
}

impl<F: Real> DensityGrid<F> {
    pub fn x_center(&self, ix: usize) -> F {
        self.x0 + self.dx * (F::of_usize(ix) + F::of(0.5))
    }

    pub fn y_center(&self, iy: usize) -> F {
        self.y0 + self.dy * (F::of_usize(iy) + F::of(0.5))
    }

    pub fn value(&self, ix: usize, iy: usize) -> F {
        self.values[iy * self.nx + ix]
    }

    pub fn riemann_mass(&self) -> F {
        self.values.iter().copied().sum::<F>() * self.dx * self.dy
    }

    /// Cell-center coordinates of strict local maxima, tallest first.
    /// A cell qualifies when its value exceeds every existing neighbor
    /// (8-connected) and the given floor.
    pub fn local_maxima(&self, floor: F) -> Vec<(F, F, F)> {
        let mut peaks = Vec::new();
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let v = self.value(ix, iy);
                if v <= floor {
                    continue;
                }
                let mut is_peak = true;
                'scan: for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let jx = ix as i64 + dx;
                        let jy = iy as i64 + dy;
                        if jx < 0 || jy < 0 || jx >= self.nx as i64 || jy >= self.ny as i64 {
                            continue;
                        }
                        if self.value(jx as usize, jy as usize) >= v {
                            is_peak = false;
                            break 'scan;
                        }
                    }
                }
                if is_peak {
                    peaks.push((self.x_center(ix), self.y_center(iy), v));
                }
            }
        }
        peaks.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap());
        peaks
    }
}

/// Silverman's rule of thumb, `1.06 σ n^{−1/5}`, with a small floor for
/// degenerate (constant) samples.
pub fn silverman_bandwidth<F: Real>(values: &[F]) -> F {
    let n = values.len();
    if n < 2 {
        return F::of(1e-6);
    }
    let nf = F::of_usize(n);
    let mean = values.iter().copied().sum::<F>() / nf;
    let var = values
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .sum::<F>()
        / (nf - F::one());
    let sigma = var.sqrt();
    let bw = F::of(1.06) * sigma * nf.powf(F::of(-0.2));
    let floor = mean.abs() * F::of(1e-3) + F::of(1e-6);
    if bw > floor {
        bw
    } else {
        floor
    }
}

/// Estimates the density of `points` on a regular grid and normalizes the
/// grid to unit mass. Bandwidths default to Silverman's rule per axis.
pub fn kde2d<F: Real>(
    points: &[(F, F)],
    spec: &GridSpec<F>,
    bandwidths: Option<(F, F)>,
) -> DensityGrid<F> {
    assert!(!points.is_empty() && spec.nx > 0 && spec.ny > 0);
    let xs: Vec<F> = points.iter().map(|p| p.0).collect();
    let ys: Vec<F> = points.iter().map(|p| p.1).collect();
    let (bx, by) = bandwidths.unwrap_or((silverman_bandwidth(&xs), silverman_bandwidth(&ys)));

    let pad = F::of(3.0);
    let (x_lo, x_hi) = spec
        .x_range
        .unwrap_or_else(|| padded_range(&xs, bx * pad));
    let (y_lo, y_hi) = spec
        .y_range
        .unwrap_or_else(|| padded_range(&ys, by * pad));
    let dx = (x_hi - x_lo) / F::of_usize(spec.nx);
    let dy = (y_hi - y_lo) / F::of_usize(spec.ny);

    // Gaussian support is truncated at 8 bandwidths; the discarded mass is
    // far below the grid-mass tolerance and normalization absorbs it.
    let reach = F::of(8.0);
    let inv2bx2 = F::one() / (F::of(2.0) * bx * bx);
    let inv2by2 = F::one() / (F::of(2.0) * by * by);

    let rows: Vec<Vec<F>> = (0..spec.ny)
        .into_par_iter()
        .map(|iy| {
            let yc = y_lo + dy * (F::of_usize(iy) + F::of(0.5));
            let mut row = vec![F::zero(); spec.nx];
            for &(px, py) in points {
                let dyv = yc - py;
                if dyv.abs() > reach * by {
                    continue;
                }
                let wy = (-dyv * dyv * inv2by2).exp();
                // column range covered by the truncated kernel
                let lo_x = px - reach * bx;
                let hi_x = px + reach * bx;
                let i_lo = ((lo_x - x_lo) / dx).floor().to_f64().unwrap_or(0.0).max(0.0) as usize;
                let i_hi_f = ((hi_x - x_lo) / dx).ceil().to_f64().unwrap_or(0.0);
                let i_hi = if i_hi_f < 0.0 {
                    0
                } else {
                    (i_hi_f as usize).min(spec.nx)
                };
                for (ix, slot) in row.iter_mut().enumerate().take(i_hi).skip(i_lo.min(spec.nx)) {
                    let xc = x_lo + dx * (F::of_usize(ix) + F::of(0.5));
                    let dxv = xc - px;
                    *slot = *slot + wy * (-dxv * dxv * inv2bx2).exp();
                }
            }
            row
        })
        .collect();

    let mut values = Vec::with_capacity(spec.nx * spec.ny);
    for row in rows {
        values.extend(row);
    }
    let mass: F = values.iter().copied().sum::<F>() * dx * dy;
    if mass > F::zero() {
        for v in values.iter_mut() {
            *v = *v / mass;
        }
    }
    DensityGrid {
        x0: x_lo,
        dx,
        nx: spec.nx,
        y0: y_lo,
        dy,
        ny: spec.ny,
        values,
    }
}

fn padded_range<F: Real>(values: &[F], pad: F) -> (F, F) {
    let mut lo = values[0];
    let mut hi = values[0];
    for &v in values {
        if v < lo {
            lo = v;
        }
        if v > hi {
            hi = v;
        }
    }
    let pad = if pad > F::zero() { pad } else { F::of(1e-6) };
    (lo - pad, hi + pad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_mass_is_unity() {
        let pts: Vec<(f64, f64)> = (0..500)
            .map(|i| {
                let t = i as f64 * 0.01;
                (10.0 + t.sin() * 2.0, 5.0 + t.cos())
            })
            .collect();
        let grid = kde2d(&pts, &GridSpec::square(64), None);
        assert!((grid.riemann_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn density_nonnegative_and_bounded_by_kernel_peak() {
        let pts: Vec<(f64, f64)> = (0..200).map(|i| (i as f64 * 0.1, 3.0)).collect();
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let (bx, by) = (silverman_bandwidth(&xs), silverman_bandwidth(&ys));
        let grid = kde2d(&pts, &GridSpec::square(48), Some((bx, by)));
        // normalized density can never exceed n·K(0) with unit-mass kernels
        let bound = 1.0 / (2.0 * std::f64::consts::PI * bx * by);
        for &v in &grid.values {
            assert!(v >= 0.0);
            assert!(v <= bound * 1.0001);
        }
    }

    #[test]
    fn bimodal_points_give_two_maxima() {
        let mut pts = Vec::new();
        for i in 0..300 {
            let j = (i % 17) as f64 / 17.0 - 0.5;
            let k = (i % 13) as f64 / 13.0 - 0.5;
            pts.push((20.0 + j, 30.0 + k));
            pts.push((60.0 + k, 8.0 + j));
        }
        let grid = kde2d(&pts, &GridSpec::square(96), None);
        let peak = grid.values.iter().cloned().fold(0.0f64, f64::max);
        let modes = grid.local_maxima(peak * 0.05);
        assert!(modes.len() >= 2, "found {} modes", modes.len());
        let (x0, y0, _) = modes[0];
        let (x1, y1, _) = modes[1];
        let near = |x: f64, y: f64, cx: f64, cy: f64| (x - cx).abs() < 4.0 && (y - cy).abs() < 4.0;
        assert!(
            (near(x0, y0, 20.0, 30.0) && near(x1, y1, 60.0, 8.0))
                || (near(x0, y0, 60.0, 8.0) && near(x1, y1, 20.0, 30.0))
        );
    }

    #[test]
    fn degenerate_axis_yields_ridge() {
        let pts: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, 7.5)).collect();
        let grid = kde2d(&pts, &GridSpec::square(32), None);
        assert!((grid.riemann_mass() - 1.0).abs() < 1e-9);
        // mass hugs one y value while spreading across x
        let mut total = 0.0;
        let (mut mx, mut my, mut sx, mut sy) = (0.0, 0.0, 0.0, 0.0);
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let v = grid.value(ix, iy);
                total += v;
                mx += v * grid.x_center(ix);
                my += v * grid.y_center(iy);
            }
        }
        mx /= total;
        my /= total;
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let v = grid.value(ix, iy);
                sx += v * (grid.x_center(ix) - mx).powi(2);
                sy += v * (grid.y_center(iy) - my).powi(2);
            }
        }
        let (sx, sy) = ((sx / total).sqrt(), (sy / total).sqrt());
        assert!((my - 7.5).abs() < 0.01, "ridge y center {my}");
        assert!(sy < 0.01 * sx, "spread x {sx} vs y {sy}");
    }
}
