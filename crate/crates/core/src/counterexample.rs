//! The two explicit field families whose `\tilde S / \tilde V` ratios diverge
//! (respectively vanish) with the scale parameter N, certifying the failure of
//! the converse one-way comparisons, plus the scaling-exponent scans.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::field::{HalfSpaceField, SpatialFunction};
use crate::fit::fit_loglog_slope;
use crate::grid::{make_grid, unit_ball_volume, Grid};
use crate::squarefn::{apply_squarefn, lp_norm_pth_power, SquareFunctionSpec, SquareKind};

/// Which counterexample family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `f_N(x,t) = N^{-1} t chi_{B(0,1)}(x) chi_{[0,1]}(t/N)`; defeats
    /// `||S~ f||_p <= C ||V~ f||_p` for `p < 1`.
    Lower,
    /// `f_N(x,t) = t v(B(x,t)) chi_{B(0,1/N)}(x) chi_{[0,1]}(t)` with
    /// `v(B(x,t)) = b_n t^n`; defeats `||V~ f||_p <= C ||S~ f||_p` for `p > 1`.
    Upper,
}

/// A family member pinned to a grid.
#[derive(Debug, Clone)]
pub struct FamilySpec {
    pub family: Family,
    pub scale: f64,
    pub grid: Grid,
}

impl FamilySpec {
    pub fn new(family: Family, scale: f64, grid: Grid) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(CoreError::Param(format!("N must be positive, got {scale}")));
        }
        match family {
            Family::Lower => {
                if scale <= 8.0 {
                    return Err(CoreError::Param(format!(
                        "lower family needs N > 8, got {scale}"
                    )));
                }
                if grid.t_max() < scale {
                    return Err(CoreError::Param(format!(
                        "lower family needs t_max >= N, got t_max = {} < {scale}",
                        grid.t_max()
                    )));
                }
                if grid.period() < scale / 4.0 {
                    return Err(CoreError::Param(format!(
                        "lower family needs spatial extent >= N/4, got period {}",
                        grid.period()
                    )));
                }
            }
            Family::Upper => {
                if grid.h() > 1.0 / (2.0 * scale) {
                    return Err(CoreError::Param(format!(
                        "upper family needs h <= 1/(2N), got h = {} for N = {scale}",
                        grid.h()
                    )));
                }
                if grid.t_max() < 1.0 {
                    return Err(CoreError::Param(format!(
                        "upper family needs t_max >= 1, got {}",
                        grid.t_max()
                    )));
                }
            }
        }
        Ok(Self {
            family,
            scale,
            grid,
        })
    }
}

/// Samples the family formula exactly at cell centers and time nodes.
pub fn build_family(spec: &FamilySpec) -> Result<HalfSpaceField> {
    let grid = &spec.grid;
    let n = grid.dim();
    let big_n = spec.scale;
    let origin = [0.0, 0.0];
    let bn = unit_ball_volume(n);
    let nspace = grid.spatial_len();
    let mut values = Vec::with_capacity(grid.nt() * nspace);
    for &t in grid.t_nodes() {
        for s in 0..nspace {
            let y = grid.coord(s);
            let d = grid.torus_dist(&y[..n], &origin[..n]);
            let v = match spec.family {
                Family::Lower => {
                    if d < 1.0 && t <= big_n {
                        t / big_n
                    } else {
                        0.0
                    }
                }
                Family::Upper => {
                    if d < 1.0 / big_n && t <= 1.0 {
                        t * bn * t.powi(n as i32)
                    } else {
                        0.0
                    }
                }
            };
            values.push(Complex64::new(v, 0.0));
        }
    }
    HalfSpaceField::from_values(grid.clone(), 1, values)
}

/// Default grid for a lower-family member: period `4N`, `t` in `[h/2, 2N]`,
/// fixed spatial resolution `h` so the scan isolates the scaling law.
pub const LOWER_FAMILY_H: f64 = 0.25;

/// Time nodes per octave of the `[h/2, 2N]` range. With dyadic `N` the
/// family cutoff `t = N` then lands exactly on a quadrature boundary, which
/// keeps the vertical transform an indicator with plateau `(N - t_min)/N`
/// up to the log-midpoint factor.
pub const LOWER_FAMILY_NODES_PER_OCTAVE: usize = 12;

pub fn lower_family_grid(big_n: f64) -> Result<Grid> {
    let period = 4.0 * big_n;
    let nx = (period / LOWER_FAMILY_H).round() as usize;
    let octaves = (16.0 * big_n).log2();
    let nt = (LOWER_FAMILY_NODES_PER_OCTAVE as f64 * octaves).round() as usize;
    make_grid(1, period, nx, LOWER_FAMILY_H / 2.0, 2.0 * big_n, nt)
}

/// Shared grid for the upper-family scan: fine enough for the smallest ball.
pub fn upper_family_grid() -> Result<Grid> {
    make_grid(1, 8.0, 4096, 1e-3, 2.0, 96)
}

/// One row of a ratio scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub scale: f64,
    /// `||S~ f_N||_p^p`
    pub norm_s_p: f64,
    /// `||V~ f_N||_p^p`
    pub norm_v_p: f64,
    pub ratio: f64,
}

/// Result of [`ratio_scan`]: per-N ratios and the fitted log-log slope
/// (with the smallest N dropped as preasymptotic). A single-N scan reports
/// the ratios with `fitted_slope = None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioScan {
    pub family: Family,
    pub p: f64,
    pub rows: Vec<ScanRow>,
    pub fitted_slope: Option<f64>,
    pub expected_slope: f64,
}

/// Evaluates `||S~ f_N||_p^p / ||V~ f_N||_p^p` across `scales` and fits the
/// log-log slope against N. Lower family requires `p < 1`, upper `p > 1`.
pub fn ratio_scan(family: Family, p: f64, scales: &[f64]) -> Result<RatioScan> {
    if scales.is_empty() {
        return Err(CoreError::Param("ratio scan needs at least one N".into()));
    }
    match family {
        Family::Lower => {
            if !(p > 0.0 && p < 1.0) {
                return Err(CoreError::Param(format!(
                    "lower family scan needs 0 < p < 1, got {p}"
                )));
            }
        }
        Family::Upper => {
            if !(p > 1.0) {
                return Err(CoreError::Param(format!(
                    "upper family scan needs p > 1, got {p}"
                )));
            }
        }
    }
    let shared_upper = if family == Family::Upper {
        Some(upper_family_grid()?)
    } else {
        None
    };
    let mut rows = Vec::with_capacity(scales.len());
    for &big_n in scales {
        let grid = match family {
            Family::Lower => lower_family_grid(big_n)?,
            Family::Upper => shared_upper.clone().unwrap(),
        };
        let spec = FamilySpec::new(family, big_n, grid)?;
        let f = build_family(&spec)?;
        let n = spec.grid.dim();
        let s_tilde = apply_squarefn(&SquareFunctionSpec::new(SquareKind::ConicalL1, n), &f)?;
        let v_tilde = apply_squarefn(&SquareFunctionSpec::new(SquareKind::VerticalL1, n), &f)?;
        let norm_s_p = lp_norm_pth_power(&s_tilde, p, None)?;
        let norm_v_p = lp_norm_pth_power(&v_tilde, p, None)?;
        rows.push(ScanRow {
            scale: big_n,
            norm_s_p,
            norm_v_p,
            ratio: norm_s_p / norm_v_p,
        });
    }
    let n_dim = 1.0; // scans run in dimension 1
    let expected_slope = match family {
        Family::Lower => n_dim * (1.0 - p),
        Family::Upper => -n_dim * (p - 1.0),
    };
    // drop the smallest N as preasymptotic
    let fitted_slope = if rows.len() >= 3 {
        let xs: Vec<f64> = rows[1..].iter().map(|r| r.scale).collect();
        let ys: Vec<f64> = rows[1..].iter().map(|r| r.ratio).collect();
        fit_loglog_slope(&xs, &ys)
    } else {
        None
    };
    Ok(RatioScan {
        family,
        p,
        rows,
        fitted_slope,
        expected_slope,
    })
}

/// The vertical L1 transform of a built family member, exposed for the
/// structural checks (`V~ f_N` is an exact indicator for the lower family).
pub fn vertical_l1(f: &HalfSpaceField) -> Result<SpatialFunction> {
    apply_squarefn(
        &SquareFunctionSpec::new(SquareKind::VerticalL1, f.grid().dim()),
        f,
    )
}

/// The conical L1 transform (`S~`).
pub fn conical_l1(f: &HalfSpaceField) -> Result<SpatialFunction> {
    apply_squarefn(
        &SquareFunctionSpec::new(SquareKind::ConicalL1, f.grid().dim()),
        f,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_family_vertical_is_exact_indicator() {
        let big_n = 16.0;
        let grid = lower_family_grid(big_n).unwrap();
        let spec = FamilySpec::new(Family::Lower, big_n, grid.clone()).unwrap();
        let f = build_family(&spec).unwrap();
        let v = vertical_l1(&f).unwrap();
        let mut inside_val: Option<f64> = None;
        for s in 0..grid.spatial_len() {
            let x = grid.coord(s)[0];
            let d = grid.axis_dist(x, 0.0);
            let val = v.at(s).re;
            if d < 1.0 {
                match inside_val {
                    None => inside_val = Some(val),
                    Some(prev) => assert_eq!(val, prev, "indicator plateau not cell-exact"),
                }
            } else {
                assert_eq!(val, 0.0, "V~ f_N must vanish outside B(0,1)");
            }
        }
        let c = inside_val.unwrap();
        assert!((c - 1.0).abs() < 0.01, "plateau constant {c}");
    }

    #[test]
    fn lower_family_small_n_rejected() {
        let grid = lower_family_grid(16.0).unwrap();
        assert!(FamilySpec::new(Family::Lower, 8.0, grid.clone()).is_err());
        assert!(FamilySpec::new(Family::Lower, 5.0, grid.clone()).is_err());
        // t_max < N
        assert!(FamilySpec::new(Family::Lower, 64.0, grid).is_err());
    }

    #[test]
    fn upper_family_conical_vanishes_beyond_two() {
        let grid = upper_family_grid().unwrap();
        let big_n = 8.0;
        let spec = FamilySpec::new(Family::Upper, big_n, grid.clone()).unwrap();
        let f = build_family(&spec).unwrap();
        let s = conical_l1(&f).unwrap();
        for idx in 0..grid.spatial_len() {
            let x = grid.coord(idx)[0];
            if grid.axis_dist(x, 0.0) > 2.0 {
                assert_eq!(s.at(idx).re, 0.0, "S~ f_N(x) must vanish for |x| > 2");
            }
        }
    }

    #[test]
    fn upper_family_grid_too_coarse_rejected() {
        let coarse = make_grid(1, 8.0, 64, 1e-3, 2.0, 16).unwrap(); // h = 1/8
        assert!(FamilySpec::new(Family::Upper, 16.0, coarse).is_err());
    }

    #[test]
    fn single_scale_scan_has_no_slope() {
        let scan = ratio_scan(Family::Lower, 0.5, &[16.0]).unwrap();
        assert_eq!(scan.rows.len(), 1);
        assert!(scan.fitted_slope.is_none());
        assert!(scan.rows[0].ratio > 0.0);
    }

    #[test]
    fn wrong_p_range_rejected() {
        assert!(ratio_scan(Family::Lower, 1.5, &[16.0]).is_err());
        assert!(ratio_scan(Family::Upper, 0.5, &[4.0]).is_err());
    }
}
