//! Fields on the discretized half-space and the cone quadrature that every
//! conical square function reduces to.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::grid::Grid;

/// Complex samples `F(y, t)` on a [`Grid`], with `channels >= 1` components
/// per sample. Layout is time-major: `((k * spatial_len + s) * channels + c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaceField {
    grid: Grid,
    channels: usize,
    values: Vec<Complex64>,
}

impl HalfSpaceField {
    /// Wraps raw samples; dimensions must match the grid.
    pub fn from_values(grid: Grid, channels: usize, values: Vec<Complex64>) -> Result<Self> {
        if channels == 0 {
            return Err(CoreError::Param("channel count must be >= 1".into()));
        }
        let expect = grid.nt() * grid.spatial_len() * channels;
        if values.len() != expect {
            return Err(CoreError::Param(format!(
                "value array has {} entries, grid wants {}",
                values.len(),
                expect
            )));
        }
        if let Some(bad) = values.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CoreError::NonFinite(format!("sample at flat index {bad}")));
        }
        Ok(Self {
            grid,
            channels,
            values,
        })
    }

    pub fn zero(grid: Grid, channels: usize) -> Self {
        let len = grid.nt() * grid.spatial_len() * channels;
        Self {
            grid,
            channels,
            values: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, k: usize, s: usize, ch: usize) -> Complex64 {
        self.values[(k * self.grid.spatial_len() + s) * self.channels + ch]
    }

    /// Squared Euclidean channel norm `|F(y,t)|^2` as a 1-channel real field.
    pub fn abs_squared(&self) -> HalfSpaceField {
        self.map_scalar(|acc| acc)
    }

    /// Euclidean channel norm `|F(y,t)|` as a 1-channel real field.
    pub fn abs(&self) -> HalfSpaceField {
        self.map_scalar(f64::sqrt)
    }

    fn map_scalar(&self, f: impl Fn(f64) -> f64) -> HalfSpaceField {
        let nspace = self.grid.spatial_len();
        let mut out = Vec::with_capacity(self.grid.nt() * nspace);
        for ks in 0..self.grid.nt() * nspace {
            let mut acc = 0.0;
            for c in 0..self.channels {
                acc += self.values[ks * self.channels + c].norm_sqr();
            }
            out.push(Complex64::new(f(acc), 0.0));
        }
        HalfSpaceField {
            grid: self.grid.clone(),
            channels: 1,
            values: out,
        }
    }

    /// Scales every sample by `c`.
    pub fn scaled(&self, c: Complex64) -> HalfSpaceField {
        HalfSpaceField {
            grid: self.grid.clone(),
            channels: self.channels,
            values: self.values.iter().map(|z| z * c).collect(),
        }
    }

    /// Real part of the 1-channel sample at `(k, s)`; used by the quadratures,
    /// which operate on `|F|^2` or `|F|` style scalar fields.
    #[inline]
    pub fn scalar_at(&self, k: usize, s: usize) -> f64 {
        self.values[k * self.grid.spatial_len() + s].re
    }
}

/// Complex samples `g(x)` on the spatial part of a [`Grid`] (time axis unused).
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialFunction {
    grid: Grid,
    values: Vec<Complex64>,
}

impl SpatialFunction {
    pub fn from_values(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.spatial_len() {
            return Err(CoreError::Param(format!(
                "spatial sample count {} does not match grid ({})",
                values.len(),
                grid.spatial_len()
            )));
        }
        if let Some(bad) = values.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CoreError::NonFinite(format!("sample at index {bad}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_real(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let v = values.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
        Self::from_values(grid, v)
    }

    /// Samples a closure at every cell center.
    pub fn sample(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let vals: Vec<f64> = (0..grid.spatial_len()).map(|s| f(&grid.coord(s))).collect();
        Self::from_real(grid.clone(), vals)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn at(&self, s: usize) -> Complex64 {
        self.values[s]
    }

    /// Real parts, erroring if any imaginary residue exceeds `tol`.
    pub fn real_values(&self, tol: f64) -> Result<Vec<f64>> {
        if let Some(bad) = self.values.iter().position(|z| z.im.abs() > tol) {
            return Err(CoreError::Param(format!(
                "imaginary residue {} at index {bad} exceeds {tol}",
                self.values[bad].im
            )));
        }
        Ok(self.values.iter().map(|z| z.re).collect())
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Subtracts the spatial mean (per real/imaginary part).
    pub fn mean_zeroed(&self) -> SpatialFunction {
        let mean = self.values.iter().sum::<Complex64>() / self.values.len() as f64;
        SpatialFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|z| z - mean).collect(),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        let hn = self.grid.cell_volume();
        self.values
            .iter()
            .map(|z| z.norm_sqr() * hn)
            .sum::<f64>()
            .sqrt()
    }
}

/// Samples a scalar closure `(y, t) -> value` at every cell center / time node.
pub fn sample_field(
    grid: &Grid,
    f: impl Fn(&[f64], f64) -> Complex64,
) -> Result<HalfSpaceField> {
    let nspace = grid.spatial_len();
    let mut values = Vec::with_capacity(grid.nt() * nspace);
    for &t in grid.t_nodes() {
        for s in 0..nspace {
            let z = f(&grid.coord(s), t);
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(CoreError::NonFinite(format!(
                    "closure returned {z} at (y={:?}, t={t})",
                    grid.coord(s)
                )));
            }
            values.push(z);
        }
    }
    HalfSpaceField::from_values(grid.clone(), 1, values)
}

/// Real-valued convenience wrapper over [`sample_field`].
pub fn sample_field_real(grid: &Grid, f: impl Fn(&[f64], f64) -> f64) -> Result<HalfSpaceField> {
    sample_field(grid, |y, t| Complex64::new(f(y, t), 0.0))
}

/// Sums `value * h^n * dt_k / t_k^q` over the cells inside the cones
/// `dist_torus(x, y) < radius_k`, time-major then lexicographic in space.
///
/// `radii` supplies the cone radius per time node, which lets the same kernel
/// serve the linear cones `alpha * t` of `S` and the parabolic cones
/// `alpha * sqrt(t)` of `S_h`.
pub(crate) fn cone_sum(f: &HalfSpaceField, x: &[f64], radii: &[f64], q: f64) -> f64 {
    let grid = f.grid();
    let nx = grid.nx();
    let hn = grid.cell_volume();
    let mut total = 0.0;
    for (k, (&t, &dt)) in grid.t_nodes().iter().zip(grid.dt_weights()).enumerate() {
        let r = radii[k];
        let w = hn * dt * t.powf(-q);
        let mut slab = 0.0;
        match grid.dim() {
            1 => {
                for_axis_window(grid, x[0], r, |i| {
                    if grid.axis_dist(grid.axis_coord(i), x[0]) < r {
                        slab += f.scalar_at(k, i);
                    }
                });
            }
            _ => {
                for_axis_window(grid, x[0], r, |i| {
                    let d1 = grid.axis_dist(grid.axis_coord(i), x[0]);
                    if d1 < r {
                        let r2 = (r * r - d1 * d1).sqrt();
                        for_axis_window(grid, x[1], r2, |j| {
                            let d2 = grid.axis_dist(grid.axis_coord(j), x[1]);
                            if d1 * d1 + d2 * d2 < r * r {
                                slab += f.scalar_at(k, i * nx + j);
                            }
                        });
                    }
                });
            }
        }
        total += slab * w;
    }
    total
}

/// Visits every axis index whose cell can lie within distance `r` of `c`,
/// in ascending global index order (wrapped windows are split into their two
/// ascending runs, low run first).
fn for_axis_window(grid: &Grid, c: f64, r: f64, mut visit: impl FnMut(usize)) {
    let nx = grid.nx() as i64;
    let h = grid.h();
    if !(r > 0.0) {
        return;
    }
    let u = (c + 0.5 * grid.period()) / h;
    let lo = (u - r / h).floor() as i64 - 1;
    let hi = (u + r / h).ceil() as i64 + 1;
    if hi - lo + 1 >= nx {
        for i in 0..nx as usize {
            visit(i);
        }
        return;
    }
    let start = lo.rem_euclid(nx) as usize;
    let count = (hi - lo + 1) as usize;
    if start + count <= nx as usize {
        for i in start..start + count {
            visit(i);
        }
    } else {
        let wrap = start + count - nx as usize;
        for i in 0..wrap {
            visit(i);
        }
        for i in start..nx as usize {
            visit(i);
        }
    }
}

/// Cone integral with linear cones `dist(x, y) < aperture * t_k` and measure
/// `dy dt / t^q`, the inner integral of the conical square functions.
pub fn cone_integral(f: &HalfSpaceField, x: &[f64], aperture: f64, q: f64) -> Result<f64> {
    if f.channels() != 1 {
        return Err(CoreError::Param(
            "cone_integral expects a scalar-channel field (pass |F|^2 or |F|)".into(),
        ));
    }
    if !(aperture > 0.0) {
        return Err(CoreError::Param(format!("aperture must be positive, got {aperture}")));
    }
    let radii: Vec<f64> = f.grid().t_nodes().iter().map(|&t| aperture * t).collect();
    Ok(cone_sum(f, x, &radii, q))
}

/// Cone integral with parabolic cones `dist(x, y) < aperture * sqrt(t_k)`.
pub fn cone_integral_parabolic(
    f: &HalfSpaceField,
    x: &[f64],
    aperture: f64,
    q: f64,
) -> Result<f64> {
    if f.channels() != 1 {
        return Err(CoreError::Param(
            "cone_integral expects a scalar-channel field (pass |F|^2 or |F|)".into(),
        ));
    }
    if !(aperture > 0.0) {
        return Err(CoreError::Param(format!("aperture must be positive, got {aperture}")));
    }
    let radii: Vec<f64> = f.grid().t_nodes().iter().map(|&t| aperture * t.sqrt()).collect();
    Ok(cone_sum(f, x, &radii, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    // time range chosen so the t = 1 cutoff of the slab tests falls centered
    // between quadrature nodes (boundaries at 2^{-10 + j/24})
    fn grid1() -> Grid {
        make_grid(1, 8.0, 512, 2f64.powi(-10), 2.0, 264).unwrap()
    }

    #[test]
    fn zero_field_integrates_to_zero() {
        let g = grid1();
        let f = HalfSpaceField::zero(g, 1);
        let v = cone_integral(&f, &[0.3], 1.0, 2.0).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn homogeneous_slab_matches_closed_form() {
        // F(y,t) = t^2 on t <= 1, constant in y; alpha = 1, q = 2:
        // the continuum integral is int_0^1 (2t) t^2 / t^2 dt = 1.
        let g = grid1();
        let f = sample_field_real(&g, |_, t| if t <= 1.0 { t * t } else { 0.0 }).unwrap();
        let v = cone_integral(&f, &[0.0], 1.0, 2.0).unwrap();
        assert!((v - 1.0).abs() < 0.02, "got {v}");
    }

    #[test]
    fn single_cell_mass() {
        let g = make_grid(1, 8.0, 64, 0.05, 2.0, 16).unwrap();
        let k0 = 7;
        let s0 = 20;
        let mut vals = vec![Complex64::new(0.0, 0.0); g.nt() * g.spatial_len()];
        vals[k0 * g.spatial_len() + s0] = Complex64::new(1.0, 0.0);
        let f = HalfSpaceField::from_values(g.clone(), 1, vals).unwrap();
        let t0 = g.t_nodes()[k0];
        let expect = g.cell_volume() * g.dt_weights()[k0] / t0.powi(2);
        let y0 = g.coord(s0);
        // x inside the cone over the lone cell
        let near = cone_integral(&f, &[y0[0] + 0.4 * t0], 1.0, 2.0).unwrap();
        assert!((near - expect).abs() < 1e-15 * expect.max(1.0));
        // x far outside every cone that touches the cell
        let far = cone_integral(&f, &[y0[0] + g.period() / 2.0 - 0.1], 1.0, 2.0).unwrap();
        assert_eq!(far, 0.0);
    }

    #[test]
    fn sample_field_examples() {
        let g = make_grid(1, 8.0, 64, 0.05, 2.0, 16).unwrap();
        let ones = sample_field_real(&g, |_, _| 1.0).unwrap();
        assert!(ones.values().iter().all(|z| z.re == 1.0 && z.im == 0.0));

        let slabs = sample_field_real(&g, |_, t| t).unwrap();
        for (k, &t) in g.t_nodes().iter().enumerate() {
            for s in 0..g.spatial_len() {
                assert_eq!(slabs.at(k, s, 0).re, t);
            }
        }

        let bad = sample_field_real(&g, |y, _| if y[0] > 0.0 { f64::NAN } else { 0.0 });
        assert!(bad.is_err());
    }

    #[test]
    fn aperture_monotone_and_additive() {
        let g = make_grid(1, 8.0, 64, 0.05, 2.0, 16).unwrap();
        let f = sample_field_real(&g, |y, t| (-(y[0] * y[0]) - t).exp()).unwrap();
        let sq = f.abs_squared();
        let a = cone_integral(&sq, &[0.5], 0.7, 2.0).unwrap();
        let b = cone_integral(&sq, &[0.5], 1.3, 2.0).unwrap();
        assert!(a <= b);

        // additivity over disjoint supports is exact
        let left = sample_field_real(&g, |y, _| if y[0] < 0.0 { 1.0 } else { 0.0 }).unwrap();
        let right = sample_field_real(&g, |y, _| if y[0] >= 0.0 { 1.0 } else { 0.0 }).unwrap();
        let both = sample_field_real(&g, |_, _| 1.0).unwrap();
        let x = [0.25];
        let va = cone_integral(&left, &x, 1.0, 2.0).unwrap();
        let vb = cone_integral(&right, &x, 1.0, 2.0).unwrap();
        let vc = cone_integral(&both, &x, 1.0, 2.0).unwrap();
        assert!((va + vb - vc).abs() <= 1e-12 * vc.abs());
    }

    #[test]
    fn dilation_covariance_within_quadrature_tolerance() {
        // resample F_lam(y,t) = F(lam*y, lam*t) one geometric step up and
        // compare cone integrals at x and lam*x with q = n+1.
        let g = make_grid(1, 16.0, 1024, 0.01, 4.0, 256).unwrap();
        let lam = (g.t_max() / g.t_min()).powf(1.0 / g.nt() as f64);
        let f = |y: f64, t: f64| {
            let tau = (t / 0.5f64).ln();
            (-(y * y) / 0.5 - tau * tau).exp()
        };
        let base = sample_field_real(&g, |y, t| f(y[0], t)).unwrap();
        let dil = sample_field_real(&g, |y, t| f(lam * y[0], lam * t)).unwrap();
        let x = 0.3;
        let a = cone_integral(&dil.abs_squared(), &[x], 1.0, 2.0).unwrap();
        let b = cone_integral(&base.abs_squared(), &[lam * x], 1.0, 2.0).unwrap();
        let rel = (a - b).abs() / b.abs();
        assert!(rel < 0.02, "covariance defect {rel}");
    }
}
