//! Half-space fields generated by semigroups of an elliptic operator:
//! gradient fields for the four square functions and their m-indexed
//! generalizations, off-diagonal decay measurement, and the three-term
//! decomposition check.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::field::{cone_sum, HalfSpaceField, SpatialFunction};
use crate::fit::fit_line;
use crate::grid::Grid;
use crate::squarefn::{apply_squarefn, SquareFunctionSpec, SquareKind};

use super::semigroup::{heat, heat_at_nodes, poisson, DEFAULT_SUBORDINATION_NODES};
use super::EllipticOperator;

/// Which semigroup/gradient combination a field was produced by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldDescriptor {
    /// `grad_y e^{-tL} f` (n channels).
    GradHeat,
    /// `t grad_{y,t} e^{-t L^{1/2}} f` (n+1 channels).
    GradPoissonFull,
    /// `t grad_{y,t} ((t^2 L)^m e^{-t L^{1/2}} f)` (n+1 channels).
    PoissonFullM(usize),
    /// `(t^2 L)^m e^{-t^2 L} f` (scalar).
    HeatScalarM(usize),
    /// `grad_{y,t} ((t^2 L)^m e^{-t^2 L} f)` (n+1 channels, unscaled gradient).
    HeatFullM(usize),
}

impl FieldDescriptor {
    pub fn channels(&self, n: usize) -> usize {
        match self {
            FieldDescriptor::GradHeat => n,
            FieldDescriptor::HeatScalarM(_) => 1,
            _ => n + 1,
        }
    }

    fn power(&self) -> usize {
        match self {
            FieldDescriptor::PoissonFullM(m)
            | FieldDescriptor::HeatScalarM(m)
            | FieldDescriptor::HeatFullM(m) => *m,
            _ => 0,
        }
    }

    pub fn name(&self) -> String {
        match self {
            FieldDescriptor::GradHeat => "grad_heat".into(),
            FieldDescriptor::GradPoissonFull => "grad_poisson_full".into(),
            FieldDescriptor::PoissonFullM(m) => format!("m_poisson_full({m})"),
            FieldDescriptor::HeatScalarM(m) => format!("m_heat_scalar({m})"),
            FieldDescriptor::HeatFullM(m) => format!("m_heat_full({m})"),
        }
    }
}

/// A [`HalfSpaceField`] tagged with the descriptor that produced it.
#[derive(Debug, Clone)]
pub struct SemigroupField {
    pub field: HalfSpaceField,
    pub descriptor: FieldDescriptor,
}

/// Centered-difference spatial gradient of one spatial snapshot.
fn spatial_gradient(grid: &Grid, vals: &[Complex64]) -> Vec<Vec<Complex64>> {
    let nx = grid.nx();
    let inv_2h = 0.5 / grid.h();
    match grid.dim() {
        1 => {
            let mut gx = Vec::with_capacity(nx);
            for i in 0..nx {
                let ip = (i + 1) % nx;
                let im = (i + nx - 1) % nx;
                gx.push((vals[ip] - vals[im]) * inv_2h);
            }
            vec![gx]
        }
        _ => {
            let mut gx = vec![Complex64::new(0.0, 0.0); nx * nx];
            let mut gy = vec![Complex64::new(0.0, 0.0); nx * nx];
            for i in 0..nx {
                let ip = (i + 1) % nx;
                let im = (i + nx - 1) % nx;
                for j in 0..nx {
                    let jp = (j + 1) % nx;
                    let jm = (j + nx - 1) % nx;
                    gx[i * nx + j] = (vals[ip * nx + j] - vals[im * nx + j]) * inv_2h;
                    gy[i * nx + j] = (vals[i * nx + jp] - vals[i * nx + jm]) * inv_2h;
                }
            }
            vec![gx, gy]
        }
    }
}

/// Symmetric-in-log-t time derivative across the node list (one-sided at the
/// ends): `d/dt u(t_k) = (u_{k+1} - u_{k-1}) / (t_k * 2 dtau)`.
fn time_derivative(grid: &Grid, snapshots: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let nt = grid.nt();
    let dtau = grid.dtau();
    let t = grid.t_nodes();
    let mut out = Vec::with_capacity(nt);
    for k in 0..nt {
        let (hi, lo, span) = if k == 0 {
            (1, 0, dtau)
        } else if k == nt - 1 {
            (nt - 1, nt - 2, dtau)
        } else {
            (k + 1, k - 1, 2.0 * dtau)
        };
        let scale = 1.0 / (t[k] * span);
        let row: Vec<Complex64> = snapshots[hi]
            .iter()
            .zip(&snapshots[lo])
            .map(|(a, b)| (a - b) * scale)
            .collect();
        out.push(row);
    }
    out
}

fn pack_channels(
    grid: &Grid,
    descriptor: FieldDescriptor,
    per_node_channels: Vec<Vec<Vec<Complex64>>>,
) -> Result<SemigroupField> {
    let n = grid.dim();
    let channels = descriptor.channels(n);
    let nspace = grid.spatial_len();
    let mut values = Vec::with_capacity(grid.nt() * nspace * channels);
    for chans in &per_node_channels {
        debug_assert_eq!(chans.len(), channels);
        for s in 0..nspace {
            for ch in chans {
                values.push(ch[s]);
            }
        }
    }
    Ok(SemigroupField {
        field: HalfSpaceField::from_values(grid.clone(), channels, values)?,
        descriptor,
    })
}

/// Evaluates the descriptor's semigroup field on the operator's grid.
///
/// `(t^2 L)^m` is applied as `m` sparse multiplications of `L` before the
/// semigroup (they commute in the discrete model), the spatial gradient is
/// the centered difference, and the time derivative is symmetric differencing
/// in log t.
pub fn build_field(
    op: &EllipticOperator,
    f: &SpatialFunction,
    descriptor: FieldDescriptor,
) -> Result<SemigroupField> {
    let grid = op.grid().clone();
    let t_nodes = grid.t_nodes().to_vec();
    let m = descriptor.power();
    let g = op.apply_power(f, m)?;

    match descriptor {
        FieldDescriptor::GradHeat => {
            let snaps = heat_at_nodes(op, f, &t_nodes)?;
            let per_node = snaps
                .iter()
                .map(|u| spatial_gradient(&grid, u.values()))
                .collect();
            pack_channels(&grid, descriptor, per_node)
        }
        FieldDescriptor::HeatScalarM(_) => {
            let sq: Vec<f64> = t_nodes.iter().map(|t| t * t).collect();
            let snaps = heat_at_nodes(op, &g, &sq)?;
            let per_node = snaps
                .iter()
                .zip(&t_nodes)
                .map(|(u, &t)| {
                    let scale = t.powi(2 * m as i32);
                    vec![u.values().iter().map(|z| z * scale).collect::<Vec<_>>()]
                })
                .collect();
            pack_channels(&grid, descriptor, per_node)
        }
        FieldDescriptor::HeatFullM(_) => {
            let sq: Vec<f64> = t_nodes.iter().map(|t| t * t).collect();
            let snaps = heat_at_nodes(op, &g, &sq)?;
            let scaled: Vec<Vec<Complex64>> = snaps
                .iter()
                .zip(&t_nodes)
                .map(|(u, &t)| {
                    let scale = t.powi(2 * m as i32);
                    u.values().iter().map(|z| z * scale).collect()
                })
                .collect();
            let dts = time_derivative(&grid, &scaled);
            let per_node = scaled
                .iter()
                .zip(dts)
                .map(|(vals, dt)| {
                    let mut chans = spatial_gradient(&grid, vals);
                    chans.push(dt);
                    chans
                })
                .collect();
            pack_channels(&grid, descriptor, per_node)
        }
        FieldDescriptor::GradPoissonFull | FieldDescriptor::PoissonFullM(_) => {
            let scaled: Vec<Vec<Complex64>> = t_nodes
                .iter()
                .map(|&t| {
                    let u = poisson(op, &g, t, DEFAULT_SUBORDINATION_NODES)?;
                    let scale = t.powi(2 * m as i32);
                    Ok(u.values().iter().map(|z| z * scale).collect())
                })
                .collect::<Result<_>>()?;
            let dts = time_derivative(&grid, &scaled);
            let per_node = scaled
                .iter()
                .zip(dts)
                .zip(&t_nodes)
                .map(|((vals, dt), &t)| {
                    let mut chans: Vec<Vec<Complex64>> = spatial_gradient(&grid, vals)
                        .into_iter()
                        .map(|ch| ch.into_iter().map(|z| z * t).collect())
                        .collect();
                    chans.push(dt.into_iter().map(|z| z * t).collect());
                    chans
                })
                .collect();
            pack_channels(&grid, descriptor, per_node)
        }
    }
}

/// The vertical heat square function `G_h f = (int |grad e^{-tL} f|^2 dt)^{1/2}`,
/// realized as the vertical kind applied to `sqrt(t) grad e^{-tL} f`.
pub fn g_h_vertical(op: &EllipticOperator, f: &SpatialFunction) -> Result<SpatialFunction> {
    let grid = op.grid();
    let built = build_field(op, f, FieldDescriptor::GradHeat)?;
    let nspace = grid.spatial_len();
    let channels = built.field.channels();
    let mut values = Vec::with_capacity(grid.nt() * nspace * channels);
    for (k, &t) in grid.t_nodes().iter().enumerate() {
        let rt = t.sqrt();
        for s in 0..nspace {
            for c in 0..channels {
                values.push(built.field.at(k, s, c) * rt);
            }
        }
    }
    let scaled = HalfSpaceField::from_values(grid.clone(), channels, values)?;
    apply_squarefn(
        &SquareFunctionSpec::new(SquareKind::Vertical, grid.dim()),
        &scaled,
    )
}

/// The vertical Poisson square function
/// `G_P f = (int |t grad_{y,t} e^{-tL^{1/2}} f|^2 dt/t)^{1/2}` (the built
/// field already carries the `t` scaling, so the vertical kind applies
/// directly).
pub fn g_p_vertical(op: &EllipticOperator, f: &SpatialFunction) -> Result<SpatialFunction> {
    let built = build_field(op, f, FieldDescriptor::GradPoissonFull)?;
    apply_squarefn(
        &SquareFunctionSpec::new(SquareKind::Vertical, op.grid().dim()),
        &built.field,
    )
}

/// The parabolic conical heat square function
/// `(∬_{|x-y| < sqrt(t)} |grad_y e^{-tL} f|^2 dy dt / t^{n/2})^{1/2}`.
pub fn gh_conical_parabolic(
    op: &EllipticOperator,
    f: &SpatialFunction,
) -> Result<SpatialFunction> {
    let built = build_field(op, f, FieldDescriptor::GradHeat)?;
    apply_squarefn(
        &SquareFunctionSpec::new(SquareKind::ConicalParabolic, op.grid().dim()),
        &built.field,
    )
}

/// Per-time off-diagonal amplitude record.
#[derive(Debug, Clone, PartialEq)]
pub struct OffdiagRecord {
    /// `d(E, F)`: minimal torus distance between cell centers.
    pub distance: f64,
    /// `(t, ||e^{-tL}(f chi_E)||_{L^2(F)} / ||f||_{L^2(E)})` per requested time.
    pub rows: Vec<(f64, f64)>,
    /// Least-squares slope of `log amplitude` against `d^2/t`.
    pub slope: Option<f64>,
}

/// Measures `L^2 -> L^2` off-diagonal decay of the heat semigroup between
/// disjoint cell sets, with a least-squares fit of `log amplitude` vs `d^2/t`.
pub fn offdiag_decay(
    op: &EllipticOperator,
    e_cells: &[usize],
    f_cells: &[usize],
    f: &SpatialFunction,
    t_list: &[f64],
) -> Result<OffdiagRecord> {
    if e_cells.is_empty() || f_cells.is_empty() {
        return Err(CoreError::Param("E and F must be nonempty".into()));
    }
    if e_cells.iter().any(|c| f_cells.contains(c)) {
        return Err(CoreError::Param("E and F must be disjoint".into()));
    }
    let grid = op.grid();
    let hn = grid.cell_volume();
    // restrict f to E
    let mut masked = vec![Complex64::new(0.0, 0.0); grid.spatial_len()];
    for &c in e_cells {
        masked[c] = f.at(c);
    }
    let fe = SpatialFunction::from_values(grid.clone(), masked)?;
    let denom: f64 = e_cells
        .iter()
        .map(|&c| fe.at(c).norm_sqr() * hn)
        .sum::<f64>()
        .sqrt();
    if denom == 0.0 {
        return Err(CoreError::Param("f vanishes on E".into()));
    }
    let mut distance = f64::INFINITY;
    for &e in e_cells {
        let pe = grid.coord(e);
        for &fc in f_cells {
            let pf = grid.coord(fc);
            distance = distance.min(grid.torus_dist(&pe[..grid.dim()], &pf[..grid.dim()]));
        }
    }
    let mut rows = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let u = heat(op, &fe, t)?;
        let amp = f_cells
            .iter()
            .map(|&c| u.at(c).norm_sqr() * hn)
            .sum::<f64>()
            .sqrt()
            / denom;
        rows.push((t, amp));
    }
    let xs: Vec<f64> = rows.iter().map(|(t, _)| distance * distance / t).collect();
    let ys: Vec<f64> = rows.iter().map(|(_, a)| a.max(1e-300).ln()).collect();
    let slope = fit_line(&xs, &ys).map(|(s, _)| s);
    Ok(OffdiagRecord {
        distance,
        rows,
        slope,
    })
}

/// One evaluation point of the three-term decomposition check.
#[derive(Debug, Clone, PartialEq)]
pub struct CaccioppoliRow {
    pub cell: usize,
    /// Conical square function of `t grad_{y,t}((t^2 L)^m e^{-tL^{1/2}} f)`
    /// at aperture 1.
    pub lhs: f64,
    /// `(∬_{|x-y|<2t} |(t^2L)^m e^{-t^2 L} f|^2 dydt/t^{n+1})^{1/2}`.
    pub term1: f64,
    /// `(∬_{|x-y|<2t} |grad_{y,t}((t^2L)^m e^{-t^2 L} f)|^2 dydt/t^{n-1})^{1/2}`.
    pub term2: f64,
    /// `(∬_{|x-y|<2t} |(t^2L)^m (e^{-tL^{1/2}} - e^{-t^2 L}) f|^2 dydt/t^{n+1})^{1/2}`.
    pub term3: f64,
    /// `lhs / (m*term1 + term2 + term3)`; `None` when the denominator vanishes.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaccioppoliRecord {
    pub m: usize,
    pub rows: Vec<CaccioppoliRow>,
}

impl CaccioppoliRecord {
    pub fn max_ratio(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.ratio)
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
    }
}

/// Evaluates both sides of the decomposition inequality at the given cells:
/// the conical square function of the Poisson field against the three
/// heat-side terms at aperture 2, with the `m`-term dropped when `m = 0`.
pub fn caccioppoli_check(
    op: &EllipticOperator,
    f: &SpatialFunction,
    m: usize,
    cells: &[usize],
) -> Result<CaccioppoliRecord> {
    if m > 1 {
        return Err(CoreError::Param(format!("decomposition check supports m in {{0,1}}, got {m}")));
    }
    let grid = op.grid().clone();
    let n = grid.dim();
    let q_main = (n + 1) as f64;
    let q_grad = (n as f64) - 1.0;

    let lhs_field = build_field(op, f, FieldDescriptor::PoissonFullM(m))?
        .field
        .abs_squared();
    let heat_scalar = build_field(op, f, FieldDescriptor::HeatScalarM(m))?.field;
    let heat_full = build_field(op, f, FieldDescriptor::HeatFullM(m))?
        .field
        .abs_squared();

    // difference field (t^2 L)^m (e^{-t L^{1/2}} - e^{-t^2 L}) f
    let g = op.apply_power(f, m)?;
    let nspace = grid.spatial_len();
    let mut diff_values = Vec::with_capacity(grid.nt() * nspace);
    for (k, &t) in grid.t_nodes().iter().enumerate() {
        let pu = poisson(op, &g, t, DEFAULT_SUBORDINATION_NODES)?;
        let scale = t.powi(2 * m as i32);
        for s in 0..nspace {
            diff_values.push(pu.at(s) * scale - heat_scalar.at(k, s, 0));
        }
    }
    let diff = HalfSpaceField::from_values(grid.clone(), 1, diff_values)?.abs_squared();
    let heat_scalar_sq = heat_scalar.abs_squared();

    let radii1: Vec<f64> = grid.t_nodes().to_vec();
    let radii2: Vec<f64> = grid.t_nodes().iter().map(|t| 2.0 * t).collect();

    let mut rows = Vec::with_capacity(cells.len());
    for &cell in cells {
        let x = grid.coord(cell);
        let xc = &x[..n];
        let lhs = cone_sum(&lhs_field, xc, &radii1, q_main).sqrt();
        let term1 = cone_sum(&heat_scalar_sq, xc, &radii2, q_main).sqrt();
        let term2 = cone_sum(&heat_full, xc, &radii2, q_grad).sqrt();
        let term3 = cone_sum(&diff, xc, &radii2, q_main).sqrt();
        let denom = m as f64 * term1 + term2 + term3;
        let ratio = if denom > 0.0 { Some(lhs / denom) } else { None };
        rows.push(CaccioppoliRow {
            cell,
            lhs,
            term1,
            term2,
            term3,
            ratio,
        });
    }
    Ok(CaccioppoliRecord { m, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{laplacian_symbol, minus_laplacian};
    use crate::grid::make_grid;

    fn grid() -> Grid {
        make_grid(1, 8.0, 128, 1e-3, 10.0, 48).unwrap()
    }

    #[test]
    fn grad_heat_matches_discrete_symbol() {
        let g = grid();
        let op = minus_laplacian(&g).unwrap();
        let k = 3i64;
        let arg = 2.0 * std::f64::consts::PI * k as f64 / g.period();
        let f = SpatialFunction::sample(&g, |x| (arg * x[0]).cos()).unwrap();
        let built = build_field(&op, &f, FieldDescriptor::GradHeat).unwrap();
        let mu = laplacian_symbol(&g, k);
        // centered-difference symbol: sin(arg h)/h
        let sym = (arg * g.h()).sin() / g.h();
        for (kk, &t) in g.t_nodes().iter().enumerate().step_by(7) {
            for s in [0usize, 31, 64] {
                let x = g.coord(s)[0];
                let expect = -(arg * x).sin() * sym * (-t * mu).exp();
                let got = built.field.at(kk, s, 0).re;
                assert!(
                    (got - expect).abs() < 1e-8 + 1e-6 * expect.abs(),
                    "t={t}, x={x}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn constant_input_gives_zero_gradient_fields() {
        let g = grid();
        let op = minus_laplacian(&g).unwrap();
        let ones = SpatialFunction::sample(&g, |_| 1.0).unwrap();
        for d in [
            FieldDescriptor::GradHeat,
            FieldDescriptor::GradPoissonFull,
            FieldDescriptor::HeatFullM(0),
        ] {
            let built = build_field(&op, &ones, d).unwrap();
            let peak = built
                .field
                .values()
                .iter()
                .map(|z| z.norm())
                .fold(0.0f64, f64::max);
            assert!(peak < 1e-8, "{}: peak {peak}", d.name());
        }
    }

    #[test]
    fn m_zero_poisson_full_is_grad_poisson_full() {
        let g = make_grid(1, 8.0, 64, 0.01, 4.0, 16).unwrap();
        let op = minus_laplacian(&g).unwrap();
        let f = SpatialFunction::sample(&g, |x| (-(x[0] * x[0])).exp()).unwrap();
        let a = build_field(&op, &f, FieldDescriptor::PoissonFullM(0)).unwrap();
        let b = build_field(&op, &f, FieldDescriptor::GradPoissonFull).unwrap();
        assert_eq!(a.field.values(), b.field.values());
    }

    #[test]
    fn descriptor_channel_counts() {
        assert_eq!(FieldDescriptor::GradHeat.channels(2), 2);
        assert_eq!(FieldDescriptor::GradPoissonFull.channels(1), 2);
        assert_eq!(FieldDescriptor::HeatScalarM(1).channels(2), 1);
        assert_eq!(FieldDescriptor::HeatFullM(0).channels(2), 3);
    }

    #[test]
    fn offdiag_slope_near_gaussian_exponent() {
        let g = make_grid(1, 16.0, 256, 0.05, 4.0, 16).unwrap();
        let op = minus_laplacian(&g).unwrap();
        let e_cells: Vec<usize> = (0..g.spatial_len())
            .filter(|&s| {
                let x = g.coord(s)[0];
                (-1.5..=-1.0).contains(&x)
            })
            .collect();
        let f_cells: Vec<usize> = (0..g.spatial_len())
            .filter(|&s| {
                let x = g.coord(s)[0];
                (1.0..=1.5).contains(&x)
            })
            .collect();
        let f =
            SpatialFunction::sample(&g, |x| (-(x[0] + 1.25) * (x[0] + 1.25) / 0.02).exp()).unwrap();
        let ratio = (2.5f64 / 0.5).powf(1.0 / 7.0);
        let t_list: Vec<f64> = (0..8).map(|i| 0.5 * ratio.powi(i)).collect();
        let rec = offdiag_decay(&op, &e_cells, &f_cells, &f, &t_list).unwrap();
        assert!((rec.distance - 2.0).abs() < 1e-12);
        let slope = rec.slope.unwrap();
        assert!(
            (slope + 0.25).abs() < 0.25 * 0.2,
            "fitted slope {slope}, want -1/4 within 20%"
        );
        for (_, amp) in &rec.rows {
            assert!(*amp <= 1.0 + 1e-8);
        }
    }

    #[test]
    fn offdiag_flattens_at_large_t() {
        let g = make_grid(1, 16.0, 128, 0.05, 4.0, 16).unwrap();
        let op = minus_laplacian(&g).unwrap();
        let e_cells: Vec<usize> = (0..20).collect();
        let f_cells: Vec<usize> = (60..80).collect();
        let f = SpatialFunction::sample(&g, |_| 1.0).unwrap();
        let rec = offdiag_decay(&op, &e_cells, &f_cells, &f, &[50.0, 100.0, 200.0, 400.0]).unwrap();
        // amplitudes approach the mean-projection constant: local slope -> 0
        let a: Vec<f64> = rec.rows.iter().map(|r| r.1).collect();
        let local = (a[3].ln() - a[2].ln())
            / (rec.distance.powi(2) / 400.0 - rec.distance.powi(2) / 200.0);
        assert!(local.abs() < 0.05, "local exponent {local}");
    }

    #[test]
    fn offdiag_rejects_overlap() {
        let g = make_grid(1, 16.0, 128, 0.05, 4.0, 16).unwrap();
        let op = minus_laplacian(&g).unwrap();
        let f = SpatialFunction::sample(&g, |_| 1.0).unwrap();
        assert!(offdiag_decay(&op, &[1, 2], &[2, 3], &f, &[1.0]).is_err());
    }

    #[test]
    fn caccioppoli_constant_gives_sentinel() {
        let g = make_grid(1, 8.0, 64, 1e-3, 10.0, 24).unwrap();
        let op = minus_laplacian(&g).unwrap();
        let ones = SpatialFunction::sample(&g, |_| 1.0).unwrap();
        let rec = caccioppoli_check(&op, &ones, 0, &[0, 10, 32]).unwrap();
        for row in &rec.rows {
            assert!(row.lhs < 1e-8);
            assert!(row.ratio.is_none() || row.lhs < 1e-8);
        }
        assert!(caccioppoli_check(&op, &ones, 2, &[0]).is_err());
    }
}
