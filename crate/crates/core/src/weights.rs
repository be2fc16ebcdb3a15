//! Muckenhoupt A_p and reverse-Holder RH_q characteristics over the dyadic
//! ball family, and the weighted conical/vertical norm comparisons.

use crate::error::{CoreError, Result};
use crate::field::{HalfSpaceField, SpatialFunction};
use crate::grid::{unit_ball_volume, Grid};
use crate::maximal::{ball_averages, dyadic_radii, maximal_function};
use crate::squarefn::{apply_squarefn, lp_norm, SquareFunctionSpec, SquareKind};

/// Strictly positive weight samples with cached characteristics.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    grid: Grid,
    values: Vec<f64>,
    /// `(p, [w]_{A_p})` pairs estimated at construction.
    pub ap_cache: Vec<(f64, f64)>,
    /// `(q, [w]_{RH_q})` pairs estimated at construction (`f64::INFINITY` allowed).
    pub rh_cache: Vec<(f64, f64)>,
}

impl Weight {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.spatial_len() {
            return Err(CoreError::Param("weight sample count does not match grid".into()));
        }
        if let Some(bad) = values.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(CoreError::Param(format!(
                "weight must be strictly positive and finite, got {} at {bad}",
                values[bad]
            )));
        }
        let mut w = Self {
            grid,
            values,
            ap_cache: Vec::new(),
            rh_cache: Vec::new(),
        };
        w.ap_cache = vec![
            (1.0, ap_characteristic(&w, 1.0)?),
            (2.0, ap_characteristic(&w, 2.0)?),
        ];
        w.rh_cache = vec![
            (2.0, rh_characteristic(&w, 2.0)?),
            (f64::INFINITY, rh_characteristic(&w, f64::INFINITY)?),
        ];
        Ok(w)
    }

    pub fn sample(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let vals: Vec<f64> = (0..grid.spatial_len()).map(|s| f(&grid.coord(s))).collect();
        Self::new(grid.clone(), vals)
    }

    /// The constant weight 1.
    pub fn unit(grid: &Grid) -> Result<Self> {
        Self::sample(grid, |_| 1.0)
    }

    /// `w(x) = max(|x|, h)^a` with `|x|` the torus distance to the origin.
    pub fn power(grid: &Grid, a: f64) -> Result<Self> {
        let h = grid.h();
        let g = grid.clone();
        Self::sample(grid, move |x| {
            let d = g.torus_dist(x, &[0.0, 0.0]);
            d.max(h).powf(a)
        })
    }

    /// Plateau weight: 1 on the half torus `x_1 < 0`, `c` elsewhere.
    pub fn plateau(grid: &Grid, c: f64) -> Result<Self> {
        Self::sample(grid, move |x| if x[0] < 0.0 { 1.0 } else { c })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn as_function(&self) -> SpatialFunction {
        SpatialFunction::from_real(self.grid.clone(), self.values.clone()).expect("weight samples finite")
    }

    pub fn scaled(&self, c: f64) -> Result<Weight> {
        Weight::new(self.grid.clone(), self.values.iter().map(|v| c * v).collect())
    }
}

/// `[w]_{A_p}` over the dyadic ball family.
///
/// For `p > 1`: `max_B (avg_B w)(avg_B w^{-1/(p-1)})^{p-1}`.
/// For `p = 1`: `max_x M w(x)/w(x)` with the dyadic-radius maximal function.
pub fn ap_characteristic(w: &Weight, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(CoreError::Param(format!("A_p needs p >= 1, got {p}")));
    }
    let grid = &w.grid;
    if p == 1.0 {
        let mw = maximal_function(&w.as_function())?;
        let mut best = 0.0f64;
        for (s, &ws) in w.values.iter().enumerate() {
            best = best.max(mw.at(s).re / ws);
        }
        return Ok(best);
    }
    let dual: Vec<f64> = w.values.iter().map(|v| v.powf(-1.0 / (p - 1.0))).collect();
    let mut best = 0.0f64;
    for r in dyadic_radii(grid) {
        let avg_w = ball_averages(grid, &w.values, r);
        let avg_dual = ball_averages(grid, &dual, r);
        for (aw, ad) in avg_w.iter().zip(&avg_dual) {
            let c = aw * ad.powf(p - 1.0);
            if c > best {
                best = c;
            }
        }
    }
    Ok(best)
}

/// `[w]_{RH_q}` over the dyadic ball family: `max_B (avg_B w^q)^{1/q}/avg_B w`
/// for finite `q`, and `max_B (sup_B w)/avg_B w` for `q = infinity`.
pub fn rh_characteristic(w: &Weight, q: f64) -> Result<f64> {
    if !(q > 1.0) {
        return Err(CoreError::Param(format!("RH_q needs q > 1, got {q}")));
    }
    let grid = &w.grid;
    let mut best = 0.0f64;
    if q.is_infinite() {
        for r in dyadic_radii(grid) {
            let avg_w = ball_averages(grid, &w.values, r);
            let sup_w = ball_sups(grid, &w.values, r);
            for (aw, sw) in avg_w.iter().zip(&sup_w) {
                best = best.max(sw / aw);
            }
        }
        return Ok(best);
    }
    let powered: Vec<f64> = w.values.iter().map(|v| v.powf(q)).collect();
    for r in dyadic_radii(grid) {
        let avg_w = ball_averages(grid, &w.values, r);
        let avg_q = ball_averages(grid, &powered, r);
        for (aw, aq) in avg_w.iter().zip(&avg_q) {
            best = best.max(aq.powf(1.0 / q) / aw);
        }
    }
    Ok(best)
}

/// Sup of `vals` over each ball of radius `r` (strict membership).
fn ball_sups(grid: &Grid, vals: &[f64], r: f64) -> Vec<f64> {
    let nspace = grid.spatial_len();
    let mut out = vec![f64::NEG_INFINITY; nspace];
    for s in 0..nspace {
        let c = grid.coord(s);
        let mut m = f64::NEG_INFINITY;
        for j in 0..nspace {
            let y = grid.coord(j);
            if grid.torus_dist(&c[..grid.dim()], &y[..grid.dim()]) < r {
                m = m.max(vals[j]);
            }
        }
        out[s] = m;
    }
    out
}

/// Weighted comparison record: both weighted norms, the ratio, and the
/// characteristic governing the relevant side of the comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCompareRecord {
    pub p: f64,
    pub norm_s_w: f64,
    pub norm_v_w: f64,
    /// `None` is the 0/0 sentinel.
    pub ratio: Option<f64>,
    /// `("A_{p/2}", value)` when `p > 2`, `("RH_{(2/p)'}", value)` when `p < 2`.
    pub characteristic: Option<(String, f64)>,
}

/// Computes `||SF||_{L^p(w)}`, `||VF||_{L^p(w)}`, their ratio, and the weight
/// characteristic relevant at this `p` (`A_{p/2}` above 2, `RH_{(2/p)'}` below).
pub fn weighted_compare(f: &HalfSpaceField, p: f64, w: &Weight) -> Result<WeightedCompareRecord> {
    if !(p > 0.0) {
        return Err(CoreError::Param(format!("p must be positive, got {p}")));
    }
    let n = f.grid().dim();
    let s = apply_squarefn(&SquareFunctionSpec::new(SquareKind::Conical, n), f)?;
    let v = apply_squarefn(&SquareFunctionSpec::new(SquareKind::Vertical, n), f)?;
    let norm_s_w = lp_norm(&s, p, Some(w))?;
    let norm_v_w = lp_norm(&v, p, Some(w))?;
    let ratio = if norm_s_w == 0.0 && norm_v_w == 0.0 {
        None
    } else {
        Some(norm_s_w / norm_v_w)
    };
    let characteristic = if p > 2.0 {
        Some((format!("A_{}", p / 2.0), ap_characteristic(w, p / 2.0)?))
    } else if p < 2.0 {
        let q = 2.0 / (2.0 - p); // (2/p)'
        Some((format!("RH_{q}"), rh_characteristic(w, q)?))
    } else {
        None
    };
    Ok(WeightedCompareRecord {
        p,
        norm_s_w,
        norm_v_w,
        ratio,
        characteristic,
    })
}

/// Left side minus right side of the weighted averaging identity
/// `||SF||^2_{L^2(w)} = b_n sum |F|^2 (w(B(y,t))/|B(y,t)|) h^n dt/t`,
/// with `|B(y,t)| = b_n t^n` (continuum normalization), as a relative defect.
/// The identity is exact in the discrete model up to float rounding.
pub fn weighted_averaging_identity_defect(f: &HalfSpaceField, w: &Weight) -> Result<f64> {
    let grid = f.grid();
    let n = grid.dim();
    let s = apply_squarefn(&SquareFunctionSpec::new(SquareKind::Conical, n), f)?;
    let lhs = lp_norm(&s, 2.0, Some(w))?.powi(2);

    let bn = unit_ball_volume(n);
    let hn = grid.cell_volume();
    let scalar = f.abs_squared();
    let mut rhs = 0.0;
    for (k, (&t, &dt)) in grid.t_nodes().iter().zip(grid.dt_weights()).enumerate() {
        let r = t;
        // w(B(y,t)) via ball sums = averages * count
        let avg = ball_averages(grid, &w.values, r);
        let counts = ball_counts(grid, r);
        for s_idx in 0..grid.spatial_len() {
            let w_ball = avg[s_idx] * counts[s_idx] as f64 * hn;
            let vol = bn * t.powi(n as i32);
            rhs += scalar.scalar_at(k, s_idx) * (w_ball / vol) * hn * dt / t;
        }
    }
    rhs *= bn;
    Ok((lhs - rhs).abs() / lhs.max(f64::EPSILON))
}

fn ball_counts(grid: &Grid, r: f64) -> Vec<usize> {
    let nspace = grid.spatial_len();
    match grid.dim() {
        1 => {
            let half = ((r / grid.h()).ceil() as usize).saturating_sub(1);
            let c = (2 * half + 1).min(grid.nx());
            vec![c; nspace]
        }
        _ => {
            // count is translation invariant; compute once at the origin cell
            let c0 = grid.coord(0);
            let mut count = 0usize;
            for j in 0..nspace {
                let y = grid.coord(j);
                if grid.torus_dist(&c0, &y) < r {
                    count += 1;
                }
            }
            vec![count; nspace]
        }
    }
}
