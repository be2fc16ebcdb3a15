//! Discretization of the upper half-space: a periodic spatial torus lattice
//! crossed with a geometric (log-spaced) time lattice carrying midpoint
//! weights for `dt/t` quadrature.

use crate::error::{CoreError, Result};

/// Discretized upper half-space `T^n x [t_min, t_max]`.
///
/// The spatial torus is identified with `[-l/2, l/2)^n`, sampled at the `nx^n`
/// cell centers `x_i = -l/2 + i*h`, `h = l/nx`. Time nodes are geometric,
/// `t_k = t_min * (t_max/t_min)^{(k - 1/2)/nt}` for `k = 1..nt`, with midpoint
/// weights `dt_k = t_k * log(t_max/t_min)/nt`, so that `sum_k dt_k/t_k`
/// telescopes to `log(t_max/t_min)` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    period: f64,
    nx: usize,
    t_min: f64,
    t_max: f64,
    nt: usize,
    h: f64,
    t_nodes: Vec<f64>,
    dt_weights: Vec<f64>,
}

/// Builds a grid, validating every structural precondition.
pub fn make_grid(
    n: usize,
    period: f64,
    nx: usize,
    t_min: f64,
    t_max: f64,
    nt: usize,
) -> Result<Grid> {
    if n != 1 && n != 2 {
        return Err(CoreError::Grid(format!("dimension n must be 1 or 2, got {n}")));
    }
    if nx < 8 || !nx.is_power_of_two() {
        return Err(CoreError::Grid(format!(
            "nx must be a power of two >= 8, got {nx}"
        )));
    }
    if !(period > 0.0) || !period.is_finite() {
        return Err(CoreError::Grid(format!("period must be positive, got {period}")));
    }
    if !(t_min > 0.0) || !(t_max > t_min) || !t_max.is_finite() {
        return Err(CoreError::Grid(format!(
            "time bounds must satisfy 0 < t_min < t_max, got [{t_min}, {t_max}]"
        )));
    }
    if nt < 2 {
        return Err(CoreError::Grid(format!("nt must be >= 2, got {nt}")));
    }
    let h = period / nx as f64;
    let log_ratio = (t_max / t_min).ln();
    let dtau = log_ratio / nt as f64;
    let mut t_nodes = Vec::with_capacity(nt);
    let mut dt_weights = Vec::with_capacity(nt);
    for k in 0..nt {
        let t = t_min * (dtau * (k as f64 + 0.5)).exp();
        t_nodes.push(t);
        dt_weights.push(t * dtau);
    }
    Ok(Grid {
        n,
        period,
        nx,
        t_min,
        t_max,
        nt,
        h,
        t_nodes,
        dt_weights,
    })
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// Spatial lattice spacing.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of spatial cells, `nx^n`.
    pub fn spatial_len(&self) -> usize {
        self.nx.pow(self.n as u32)
    }

    /// Spatial cell volume `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.n as i32)
    }

    pub fn t_nodes(&self) -> &[f64] {
        &self.t_nodes
    }

    /// Midpoint weights `dt_k` for `dt` quadrature (`dt_k/t_k` for `dt/t`).
    pub fn dt_weights(&self) -> &[f64] {
        &self.dt_weights
    }

    /// Log-spacing step `log(t_max/t_min)/nt`.
    pub fn dtau(&self) -> f64 {
        (self.t_max / self.t_min).ln() / self.nt as f64
    }

    /// Coordinate along one axis of the lattice point with per-axis index `i`.
    pub fn axis_coord(&self, i: usize) -> f64 {
        -0.5 * self.period + i as f64 * self.h
    }

    /// Cell center of the spatial cell with linear index `s` (row-major).
    pub fn coord(&self, s: usize) -> [f64; 2] {
        match self.n {
            1 => [self.axis_coord(s), 0.0],
            _ => [self.axis_coord(s / self.nx), self.axis_coord(s % self.nx)],
        }
    }

    /// Linear index of the cell whose per-axis indices are `i` (and `j` for n=2).
    pub fn index(&self, i: usize, j: usize) -> usize {
        match self.n {
            1 => i,
            _ => i * self.nx + j,
        }
    }

    /// Distance of two scalars on the periodic axis.
    pub fn axis_dist(&self, a: f64, b: f64) -> f64 {
        let mut d = (a - b).rem_euclid(self.period);
        if d > 0.5 * self.period {
            d = self.period - d;
        }
        d
    }

    /// Torus distance between two points (only the first `n` components used).
    pub fn torus_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.n {
            1 => self.axis_dist(a[0], b[0]),
            _ => {
                let dx = self.axis_dist(a[0], b[0]);
                let dy = self.axis_dist(a[1], b[1]);
                dx.hypot(dy)
            }
        }
    }

    /// Largest index k such that `t_nodes[k] <= bound`, as a node count.
    pub fn nodes_up_to(&self, bound: f64) -> usize {
        self.t_nodes.iter().take_while(|&&t| t <= bound).count()
    }
}

/// Volume of the unit Euclidean ball in dimension `n` (n = 1 or 2).
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => std::f64::consts::PI,
        _ => panic!("unsupported dimension {n}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_example_values() {
        let g = make_grid(1, 16.0, 256, 0.01, 10.0, 64).unwrap();
        assert_eq!(g.h(), 0.0625);
        let expected_t1 = 0.01 * 1000f64.powf(1.0 / 128.0);
        assert!((g.t_nodes()[0] - expected_t1).abs() < 1e-15);
    }

    #[test]
    fn degenerate_time_range_rejected() {
        assert!(make_grid(1, 16.0, 256, 1.0, 1.0, 8).is_err());
        assert!(make_grid(1, 16.0, 256, 2.0, 1.0, 8).is_err());
        assert!(make_grid(1, 16.0, 256, 0.0, 1.0, 8).is_err());
    }

    #[test]
    fn log_weight_identity() {
        let g = make_grid(2, 8.0, 64, 0.1, 1.0, 32).unwrap();
        let total: f64 = g
            .t_nodes()
            .iter()
            .zip(g.dt_weights())
            .map(|(t, dt)| dt / t)
            .sum();
        assert!((total - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn nx_validation() {
        assert!(make_grid(1, 16.0, 7, 0.1, 1.0, 8).is_err());
        assert!(make_grid(1, 16.0, 48, 0.1, 1.0, 8).is_err());
        assert!(make_grid(3, 16.0, 64, 0.1, 1.0, 8).is_err());
    }

    #[test]
    fn torus_distance_wraps() {
        let g = make_grid(1, 16.0, 256, 0.1, 1.0, 8).unwrap();
        assert!((g.axis_dist(-7.9, 7.9) - 0.2).abs() < 1e-12);
        let g2 = make_grid(2, 8.0, 64, 0.1, 1.0, 8).unwrap();
        let d = g2.torus_dist(&[-3.9, 0.0], &[3.9, 0.1]);
        assert!((d - (0.2f64.powi(2) + 0.1f64.powi(2)).sqrt()).abs() < 1e-12);
    }
}
