//! Seeded random test fields: sums of up to eight Gaussian bumps in
//! `(y, log t)` for half-space fields, or in `y` alone for spatial functions.
//!
//! The draw order below is frozen; regression constants elsewhere in the
//! workspace were calibrated against it.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::field::{HalfSpaceField, SpatialFunction};
use crate::grid::Grid;

const MAX_BUMPS: usize = 8;
/// Bump centers stay inside the sub-box of side `l/4` centered at the origin.
const SUPPORT_FRACTION: f64 = 8.0;
/// Spatial bump widths relative to the period.
const SIGMA_Y_MIN_FRACTION: f64 = 1.0 / 48.0;
const SIGMA_Y_MAX_FRACTION: f64 = 1.0 / 18.0;
/// Margins (in log t) keeping bumps clear of the time truncation.
const TAU_LOWER_MARGIN: f64 = 2.0;
const TAU_UPPER_MARGIN: f64 = 0.7;
const SIGMA_TAU_MIN: f64 = 0.25;
const SIGMA_TAU_MAX: f64 = 0.5;

struct Bump {
    amp: f64,
    cy: [f64; 2],
    sy: f64,
    ctau: f64,
    stau: f64,
}

fn draw_bumps(grid: &Grid, rng: &mut ChaCha8Rng) -> crate::error::Result<Vec<Bump>> {
    let l = grid.period();
    let count = rng.gen_range(1..=MAX_BUMPS);
    let tau_lo = grid.t_min().ln() + TAU_LOWER_MARGIN;
    let tau_hi = grid.t_max().ln() - TAU_UPPER_MARGIN;
    if tau_hi <= tau_lo {
        return Err(crate::error::CoreError::Param(format!(
            "time range [{}, {}] too narrow for the bump corpus margins",
            grid.t_min(),
            grid.t_max()
        )));
    }
    Ok((0..count)
        .map(|_| {
            let amp = rng.gen_range(0.2..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let cy = [
                rng.gen_range(-l / SUPPORT_FRACTION..l / SUPPORT_FRACTION),
                rng.gen_range(-l / SUPPORT_FRACTION..l / SUPPORT_FRACTION),
            ];
            let sy = rng.gen_range(l * SIGMA_Y_MIN_FRACTION..l * SIGMA_Y_MAX_FRACTION);
            let ctau = rng.gen_range(tau_lo..tau_hi);
            let stau = rng.gen_range(SIGMA_TAU_MIN..SIGMA_TAU_MAX);
            Bump {
                amp,
                cy,
                sy,
                ctau,
                stau,
            }
        })
        .collect())
}

/// Smooth, effectively compactly supported, reproducible random field.
pub fn bump_field(grid: &Grid, seed: u64) -> Result<HalfSpaceField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps = draw_bumps(grid, &mut rng)?;
    let nspace = grid.spatial_len();
    let mut values = Vec::with_capacity(grid.nt() * nspace);
    for &t in grid.t_nodes() {
        let tau = t.ln();
        for s in 0..nspace {
            let y = grid.coord(s);
            let mut v = 0.0;
            for b in &bumps {
                let mut d2 = 0.0;
                for ax in 0..grid.dim() {
                    let d = grid.axis_dist(y[ax], b.cy[ax]);
                    d2 += d * d;
                }
                let dt = tau - b.ctau;
                v += b.amp
                    * (-d2 / (2.0 * b.sy * b.sy) - dt * dt / (2.0 * b.stau * b.stau)).exp();
            }
            values.push(Complex64::new(v, 0.0));
        }
    }
    HalfSpaceField::from_values(grid.clone(), 1, values)
}

/// Spatial-only bump sum; `mean_zero` subtracts the torus mean (needed by the
/// semigroup experiments, where the constant mode sits in the kernel of L).
pub fn bump_function(grid: &Grid, seed: u64, mean_zero: bool) -> Result<SpatialFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = grid.period();
    let count = rng.gen_range(1..=MAX_BUMPS);
    let bumps: Vec<(f64, [f64; 2], f64)> = (0..count)
        .map(|_| {
            let amp = rng.gen_range(0.2..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let cy = [
                rng.gen_range(-l / SUPPORT_FRACTION..l / SUPPORT_FRACTION),
                rng.gen_range(-l / SUPPORT_FRACTION..l / SUPPORT_FRACTION),
            ];
            let sy = rng.gen_range(l * SIGMA_Y_MIN_FRACTION..l * SIGMA_Y_MAX_FRACTION);
            (amp, cy, sy)
        })
        .collect();
    let vals: Vec<f64> = (0..grid.spatial_len())
        .map(|s| {
            let y = grid.coord(s);
            bumps
                .iter()
                .map(|(amp, cy, sy)| {
                    let mut d2 = 0.0;
                    for ax in 0..grid.dim() {
                        let d = grid.axis_dist(y[ax], cy[ax]);
                        d2 += d * d;
                    }
                    amp * (-d2 / (2.0 * sy * sy)).exp()
                })
                .sum()
        })
        .collect();
    let f = SpatialFunction::from_real(grid.clone(), vals)?;
    Ok(if mean_zero { f.mean_zeroed() } else { f })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn seeded_fields_are_reproducible() {
        let g = make_grid(1, 16.0, 256, 0.05, 6.0, 64).unwrap();
        let a = bump_field(&g, 42).unwrap();
        let b = bump_field(&g, 42).unwrap();
        assert_eq!(a, b);
        let c = bump_field(&g, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn mean_zero_function_has_zero_mean() {
        let g = make_grid(1, 8.0, 128, 1e-4, 10.0, 32).unwrap();
        let f = bump_function(&g, 7, true).unwrap();
        let mean: f64 = f.values().iter().map(|z| z.re).sum::<f64>() / g.spatial_len() as f64;
        assert!(mean.abs() < 1e-14);
    }

    #[test]
    fn narrow_time_range_rejected() {
        let g = make_grid(1, 16.0, 256, 0.05, 0.4, 8).unwrap();
        assert!(bump_field(&g, 0).is_err());
    }

    #[test]
    fn bumps_fit_in_subbox() {
        // support fraction keeps centers within [-l/8, l/8]
        let g = make_grid(1, 16.0, 256, 0.05, 6.0, 64).unwrap();
        for seed in 0..20 {
            let f = bump_field(&g, seed).unwrap();
            // field decays well before the torus boundary
            let far = (0..g.nt())
                .map(|k| f.at(k, 0, 0).norm())
                .fold(0.0f64, f64::max);
            let peak = f
                .values()
                .iter()
                .map(|z| z.norm())
                .fold(0.0f64, f64::max);
            assert!(far < 1e-6 * peak.max(1e-300), "seed {seed}: far {far} peak {peak}");
        }
    }
}
