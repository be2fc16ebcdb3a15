//! The conical and vertical square functions, their L1 variants, the
//! parabolic conical variant, Lp norms, tent `T^infty_2` norms, and the
//! norm-comparison records.

use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::field::{cone_sum, HalfSpaceField, SpatialFunction};
use crate::grid::unit_ball_volume;
use crate::weights::Weight;

/// Which functional to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SquareKind {
    /// `x -> (∬_{|x-y| < alpha t} |F|^2 dy dt / t^q)^{1/2}`, `q = n+1`.
    Conical,
    /// `x -> (sum_k |F(x,t_k)|^2 dt_k/t_k)^{1/2}`.
    Vertical,
    /// `x -> ∬_{|x-y| < alpha t} |F| dy dt / t^{n+1}` (no outer root).
    ConicalL1,
    /// `x -> sum_k |F(x,t_k)| dt_k/t_k`.
    VerticalL1,
    /// `x -> (∬_{|x-y| < alpha sqrt(t)} |F|^2 dy dt / t^{n/2})^{1/2}`.
    ConicalParabolic,
}

/// A square function with its aperture and homogeneity power pinned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareFunctionSpec {
    pub kind: SquareKind,
    pub aperture: f64,
    /// Power of `t` dividing the measure for the conical kinds
    /// (`n+1` conical, `n/2` parabolic); unused by the vertical kinds.
    pub power: f64,
}

impl SquareFunctionSpec {
    /// Canonical spec for `kind` in dimension `n`, aperture 1.
    pub fn new(kind: SquareKind, n: usize) -> Self {
        let power = match kind {
            SquareKind::Conical | SquareKind::ConicalL1 => (n + 1) as f64,
            SquareKind::ConicalParabolic => n as f64 / 2.0,
            SquareKind::Vertical | SquareKind::VerticalL1 => 0.0,
        };
        Self {
            kind,
            aperture: 1.0,
            power,
        }
    }

    pub fn with_aperture(mut self, aperture: f64) -> Result<Self> {
        if !(aperture > 0.0) {
            return Err(CoreError::Param(format!(
                "aperture must be positive, got {aperture}"
            )));
        }
        self.aperture = aperture;
        Ok(self)
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.aperture > 0.0) {
            return Err(CoreError::Param("aperture must be positive".into()));
        }
        let canonical = SquareFunctionSpec::new(self.kind, n).power;
        match self.kind {
            SquareKind::Conical | SquareKind::ConicalL1 | SquareKind::ConicalParabolic => {
                if (self.power - canonical).abs() > 1e-12 {
                    return Err(CoreError::Param(format!(
                        "homogeneity power {} inconsistent with kind (want {canonical})",
                        self.power
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Applies a square function to a field, evaluating at every cell center.
///
/// Vector channels enter through the Euclidean norm: the quadratic kinds
/// integrate `|F|^2`, the L1 kinds integrate `|F|`.
pub fn apply_squarefn(spec: &SquareFunctionSpec, f: &HalfSpaceField) -> Result<SpatialFunction> {
    let grid = f.grid();
    spec.validate(grid.dim())?;
    let scalar = match spec.kind {
        SquareKind::ConicalL1 | SquareKind::VerticalL1 => f.abs(),
        _ => f.abs_squared(),
    };
    let nspace = grid.spatial_len();
    let values: Vec<f64> = match spec.kind {
        SquareKind::Vertical | SquareKind::VerticalL1 => {
            let root = spec.kind == SquareKind::Vertical;
            (0..nspace)
                .into_par_iter()
                .map(|s| {
                    let mut acc = 0.0;
                    for (k, (&t, &dt)) in grid.t_nodes().iter().zip(grid.dt_weights()).enumerate()
                    {
                        acc += scalar.scalar_at(k, s) * dt / t;
                    }
                    if root {
                        acc.sqrt()
                    } else {
                        acc
                    }
                })
                .collect()
        }
        SquareKind::Conical | SquareKind::ConicalL1 | SquareKind::ConicalParabolic => {
            let parabolic = spec.kind == SquareKind::ConicalParabolic;
            let root = spec.kind != SquareKind::ConicalL1;
            let radii: Vec<f64> = grid
                .t_nodes()
                .iter()
                .map(|&t| {
                    if parabolic {
                        spec.aperture * t.sqrt()
                    } else {
                        spec.aperture * t
                    }
                })
                .collect();
            (0..nspace)
                .into_par_iter()
                .map(|s| {
                    let x = grid.coord(s);
                    let v = cone_sum(&scalar, &x[..grid.dim()], &radii, spec.power);
                    if root {
                        v.sqrt()
                    } else {
                        v
                    }
                })
                .collect()
        }
    };
    SpatialFunction::from_real(grid.clone(), values)
}

/// `(sum_x |g(x)|^p w(x) h^n)^{1/p}`, with `w = 1` when absent.
pub fn lp_norm(g: &SpatialFunction, p: f64, w: Option<&Weight>) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(CoreError::Param(format!("p must be in (0, inf), got {p}")));
    }
    if let Some(w) = w {
        if w.grid() != g.grid() {
            return Err(CoreError::Param("weight grid does not match function grid".into()));
        }
    }
    let hn = g.grid().cell_volume();
    let mut acc = 0.0;
    for (s, z) in g.values().iter().enumerate() {
        let ws = w.map_or(1.0, |w| w.values()[s]);
        acc += z.norm().powf(p) * ws * hn;
    }
    Ok(acc.powf(1.0 / p))
}

/// Same accumulation without the outer `1/p` root: `sum |g|^p w h^n`.
pub fn lp_norm_pth_power(g: &SpatialFunction, p: f64, w: Option<&Weight>) -> Result<f64> {
    Ok(lp_norm(g, p, w)?.powf(p))
}

/// Relative defect of the exact L2 averaging identity
/// `||SF||_2^2 = b_n ||VF||_2^2`.
pub fn averaging_identity_residual(f: &HalfSpaceField) -> Result<f64> {
    let n = f.grid().dim();
    let s = apply_squarefn(&SquareFunctionSpec::new(SquareKind::Conical, n), f)?;
    let v = apply_squarefn(&SquareFunctionSpec::new(SquareKind::Vertical, n), f)?;
    let s2 = lp_norm(&s, 2.0, None)?.powi(2);
    let v2 = lp_norm(&v, 2.0, None)?.powi(2);
    let bn = unit_ball_volume(n);
    Ok((s2 - bn * v2).abs() / s2.max(f64::EPSILON))
}

/// Carleson-style tent norm: max over the supplied balls `B = (center, r)` of
/// `(|B|^{-1} ∬_{B x (0, r)} |F|^2 dy dt/t)^{1/2}`, cell-center membership.
pub fn tent_tinfty_norm(f: &HalfSpaceField, balls: &[(Vec<f64>, f64)]) -> Result<f64> {
    if balls.is_empty() {
        return Err(CoreError::Param("tent norm needs at least one ball".into()));
    }
    let grid = f.grid();
    for (_, r) in balls {
        if !(*r > 0.0) || *r > grid.period() / 4.0 {
            return Err(CoreError::Param(format!(
                "ball radius {r} outside (0, l/4] = (0, {}]",
                grid.period() / 4.0
            )));
        }
    }
    let scalar = f.abs_squared();
    let hn = grid.cell_volume();
    let mut best = 0.0f64;
    for (c, r) in balls {
        let mut cells = Vec::new();
        for s in 0..grid.spatial_len() {
            let y = grid.coord(s);
            if grid.torus_dist(&y[..grid.dim()], c) < *r {
                cells.push(s);
            }
        }
        if cells.is_empty() {
            continue;
        }
        let volume = cells.len() as f64 * hn;
        let mut mass = 0.0;
        for (k, (&t, &dt)) in grid.t_nodes().iter().zip(grid.dt_weights()).enumerate() {
            if t < *r {
                let mut slab = 0.0;
                for &s in &cells {
                    slab += scalar.scalar_at(k, s);
                }
                mass += slab * hn * dt / t;
            }
        }
        best = best.max((mass / volume).sqrt());
    }
    Ok(best)
}

/// Output of [`compare_norms`]: both norms, their ratio, and for `p < 2` the
/// explicit weak-type constant of the conical-controls-vertical proof with
/// `r = p/2`, together with the slack in that bound.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRecord {
    pub p: f64,
    pub norm_s: f64,
    pub norm_v: f64,
    /// `||SF||_p / ||VF||_p`; `None` is the 0/0 sentinel (both norms zero).
    pub ratio: Option<f64>,
    /// `2p/(b_n (2-p)) + 2p 3^n/(p - r)` with `r = p/2`, for `p < 2`.
    pub explicit_constant: Option<f64>,
    /// `C ||SF||_p^p - ||VF||_p^p` (nonnegative when the bound holds).
    pub bound_slack: Option<f64>,
}

/// Explicit constant of the `p < 2` comparison with `r = p/2`.
pub fn explicit_comparison_constant(p: f64, n: usize) -> f64 {
    let bn = unit_ball_volume(n);
    let r = p / 2.0;
    2.0 * p / (bn * (2.0 - p)) + 2.0 * p * 3f64.powi(n as i32) / (p - r)
}

/// Computes `||SF||_p`, `||VF||_p`, their ratio, and for `p < 2` the explicit
/// bound `||VF||_p^p <= C ||SF||_p^p`.
pub fn compare_norms(f: &HalfSpaceField, p: f64) -> Result<CompareRecord> {
    if !(p > 0.0) {
        return Err(CoreError::Param(format!("p must be positive, got {p}")));
    }
    let n = f.grid().dim();
    let s = apply_squarefn(&SquareFunctionSpec::new(SquareKind::Conical, n), f)?;
    let v = apply_squarefn(&SquareFunctionSpec::new(SquareKind::Vertical, n), f)?;
    let norm_s = lp_norm(&s, p, None)?;
    let norm_v = lp_norm(&v, p, None)?;
    let ratio = if norm_s == 0.0 && norm_v == 0.0 {
        None
    } else {
        Some(norm_s / norm_v)
    };
    let (constant, slack) = if p < 2.0 {
        let c = explicit_comparison_constant(p, n);
        (Some(c), Some(c * norm_s.powf(p) - norm_v.powf(p)))
    } else {
        (None, None)
    };
    Ok(CompareRecord {
        p,
        norm_s,
        norm_v,
        ratio,
        explicit_constant: constant,
        bound_slack: slack,
    })
}
