//! Centered Hardy-Littlewood maximal function over torus balls with dyadic
//! radii, via circular prefix sums.

use crate::error::{CoreError, Result};
use crate::field::SpatialFunction;
use crate::grid::Grid;

/// The dyadic radius family `{h, 2h, 4h, ..., l/2}`.
pub fn dyadic_radii(grid: &Grid) -> Vec<f64> {
    let mut radii = Vec::new();
    let mut r = grid.h();
    while r <= grid.period() / 2.0 + 1e-12 {
        radii.push(r);
        r *= 2.0;
    }
    radii
}

/// Ball averages of `vals` for a fixed radius `r` (strict cell-center
/// membership `dist < r`), one average per cell center.
pub(crate) fn ball_averages(grid: &Grid, vals: &[f64], r: f64) -> Vec<f64> {
    let nx = grid.nx();
    let h = grid.h();
    // strict |m| h < r  =>  |m| <= ceil(r/h) - 1
    let half = ((r / h).ceil() as usize).saturating_sub(1).min(nx / 2);
    match grid.dim() {
        1 => {
            let sums = circular_window_sums(vals, half);
            let count = (2 * half + 1).min(nx) as f64;
            sums.into_iter().map(|s| s / count).collect()
        }
        _ => {
            // per-row window sums for every admissible row offset
            let r2 = r * r;
            let mut offsets: Vec<(i64, usize)> = Vec::new();
            for d1 in -(half as i64)..=(half as i64) {
                let d1h = d1 as f64 * h;
                if d1h * d1h < r2 {
                    let rem = (r2 - d1h * d1h).sqrt();
                    let w = ((rem / h).ceil() as usize).saturating_sub(1).min(nx / 2);
                    offsets.push((d1, w));
                }
            }
            let mut row_sums: std::collections::BTreeMap<usize, Vec<f64>> =
                std::collections::BTreeMap::new();
            for &(_, w) in &offsets {
                row_sums.entry(w).or_default();
            }
            let widths: Vec<usize> = row_sums.keys().copied().collect();
            for w in widths {
                let mut per_row = Vec::with_capacity(nx * nx);
                for i in 0..nx {
                    let row = &vals[i * nx..(i + 1) * nx];
                    per_row.extend(circular_window_sums(row, w));
                }
                row_sums.insert(w, per_row);
            }
            let mut out = vec![0.0; nx * nx];
            let mut counts = 0usize;
            for &(_, w) in &offsets {
                counts += (2 * w + 1).min(nx);
            }
            for c1 in 0..nx {
                for c2 in 0..nx {
                    let mut acc = 0.0;
                    for &(d1, w) in &offsets {
                        let row = (c1 as i64 + d1).rem_euclid(nx as i64) as usize;
                        acc += row_sums[&w][row * nx + c2];
                    }
                    out[c1 * nx + c2] = acc / counts as f64;
                }
            }
            out
        }
    }
}

/// Circular moving-window sums with half-width `half` (window `2*half+1`).
fn circular_window_sums(vals: &[f64], half: usize) -> Vec<f64> {
    let n = vals.len();
    if 2 * half + 1 >= n {
        let total: f64 = vals.iter().sum();
        return vec![total; n];
    }
    let mut out = Vec::with_capacity(n);
    let mut acc: f64 = 0.0;
    for d in -(half as i64)..=(half as i64) {
        acc += vals[d.rem_euclid(n as i64) as usize];
    }
    for i in 0..n {
        out.push(acc);
        let leave = (i as i64 - half as i64).rem_euclid(n as i64) as usize;
        let enter = (i as i64 + half as i64 + 1).rem_euclid(n as i64) as usize;
        acc += vals[enter] - vals[leave];
    }
    out
}

/// Centered maximal function over the dyadic radius family.
///
/// Requires real nonnegative samples; the radius-`h` ball is the cell itself,
/// so `Mg >= g` pointwise by construction.
pub fn maximal_function(g: &SpatialFunction) -> Result<SpatialFunction> {
    let vals = g.real_values(1e-12).map_err(|_| {
        CoreError::Param("maximal function requires real-valued input".into())
    })?;
    if let Some(bad) = vals.iter().position(|&v| v < 0.0) {
        return Err(CoreError::Param(format!(
            "maximal function requires nonnegative input, got {} at index {bad}",
            vals[bad]
        )));
    }
    let grid = g.grid();
    let mut best = vals.clone();
    for r in dyadic_radii(grid) {
        if r <= grid.h() {
            continue; // radius-h average is g itself
        }
        let avg = ball_averages(grid, &vals, r);
        for (b, a) in best.iter_mut().zip(avg) {
            if a > *b {
                *b = a;
            }
        }
    }
    SpatialFunction::from_real(grid.clone(), best)
}
