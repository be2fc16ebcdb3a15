//! Heat and Poisson semigroups for an assembled operator: spectral evaluation
//! for real symmetric operators of moderate size, Crank-Nicolson time stepping
//! otherwise, and the subordination quadrature tying the two together.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::field::SpatialFunction;

use super::EllipticOperator;

pub const DEFAULT_SUBORDINATION_NODES: usize = 32;

/// Generalized Gauss-Laguerre rule for the weight `s^{-1/2} e^{-s}`,
/// with the subordination normalization constant calibrated against the
/// exact symbol value at the reference point `c = 1` and then frozen.
#[derive(Debug, Clone)]
pub struct LaguerreRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Normalization `C` in `e^{-tL^{1/2}} = C \int_0^\infty s^{-1/2} e^{-s}
    /// e^{-t^2 L/(4s)} ds`.
    pub norm_constant: f64,
}

impl LaguerreRule {
    /// Golub-Welsch nodes and weights for `alpha = -1/2`.
    pub fn new(k: usize) -> Result<Self> {
        if k < 16 {
            return Err(CoreError::Param(format!(
                "subordination quadrature needs at least 16 nodes, got {k}"
            )));
        }
        let alpha = -0.5;
        let mut jac = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            jac[(i, i)] = 2.0 * i as f64 + alpha + 1.0;
            if i + 1 < k {
                let j = (i + 1) as f64;
                let off = (j * (j + alpha)).sqrt();
                jac[(i, i + 1)] = off;
                jac[(i + 1, i)] = off;
            }
        }
        let se = nalgebra::SymmetricEigen::new(jac);
        // total mass Gamma(alpha + 1) = Gamma(1/2) = sqrt(pi)
        let mass = std::f64::consts::PI.sqrt();
        let mut nodes: Vec<f64> = se.eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Christoffel numbers w_j = 1/sum_m p_m(x_j)^2 via the orthonormal
        // three-term recurrence; the eigensolver's vectors are not reliable
        // enough for the outermost nodes at this size.
        let weights: Vec<f64> = nodes
            .iter()
            .map(|&x| {
                let mut p_prev = 0.0f64;
                let mut p_curr = 1.0 / mass.sqrt();
                let mut sum = p_curr * p_curr;
                for m in 0..k - 1 {
                    let a_m = 2.0 * m as f64 + alpha + 1.0;
                    let b_m = if m == 0 {
                        0.0
                    } else {
                        (m as f64 * (m as f64 + alpha)).sqrt()
                    };
                    let b_next = ((m as f64 + 1.0) * (m as f64 + 1.0 + alpha)).sqrt();
                    let p_next = ((x - a_m) * p_curr - b_m * p_prev) / b_next;
                    sum += p_next * p_next;
                    p_prev = p_curr;
                    p_curr = p_next;
                }
                1.0 / sum
            })
            .collect();
        // calibrate: the continuum subordination integral at c = 1 equals
        // sqrt(pi) e^{-2}; C absorbs both the sqrt(pi) and the residual
        // quadrature bias at the reference point.
        let q1: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(s, w)| w * (-1.0 / s).exp())
            .sum();
        let norm_constant = (-2.0f64).exp() / q1;
        Ok(Self {
            nodes,
            weights,
            norm_constant,
        })
    }

    /// Cached rule for `k` nodes.
    pub fn cached(k: usize) -> Result<Arc<LaguerreRule>> {
        static CACHE: OnceLock<Mutex<BTreeMap<usize, Arc<LaguerreRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
        let mut guard = cache.lock().expect("laguerre cache poisoned");
        if let Some(rule) = guard.get(&k) {
            return Ok(rule.clone());
        }
        let rule = Arc::new(LaguerreRule::new(k)?);
        guard.insert(k, rule.clone());
        Ok(rule)
    }

    /// The subordination symbol `C sum_j w_j e^{-c/s_j}`, approximating
    /// `e^{-2 sqrt(c)}`.
    pub fn subordination_symbol(&self, c: f64) -> f64 {
        let q: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w * (-c / s).exp())
            .sum();
        self.norm_constant * q
    }
}

/// Spectral application of `phi(L)` (real symmetric path).
fn apply_spectral(
    op: &EllipticOperator,
    f: &SpatialFunction,
    phi: impl Fn(f64) -> f64,
) -> Result<SpatialFunction> {
    let (q, vals) = op.eigendecomposition();
    let n = f.values().len();
    let mut re = DVector::<f64>::zeros(n);
    let mut im = DVector::<f64>::zeros(n);
    for (i, z) in f.values().iter().enumerate() {
        re[i] = z.re;
        im[i] = z.im;
    }
    let has_im = im.iter().any(|&v| v != 0.0);
    let mut cre = q.transpose() * re;
    for i in 0..n {
        cre[i] *= phi(vals[i]);
    }
    let out_re = q * cre;
    let out_im = if has_im {
        let mut cim = q.transpose() * im;
        for i in 0..n {
            cim[i] *= phi(vals[i]);
        }
        Some(q * cim)
    } else {
        None
    };
    let values: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(out_re[i], out_im.as_ref().map_or(0.0, |v| v[i])))
        .collect();
    SpatialFunction::from_values(op.grid().clone(), values)
}

/// Crank-Nicolson substep bound `min(t/32, h^2/(2 Lambda))`.
fn cn_substep(op: &EllipticOperator, t: f64) -> f64 {
    let h = op.grid().h();
    (t / 32.0).min(h * h / (2.0 * op.lambda_upper()))
}

/// Factorized solver for `(I + c L)`.
enum CnSolver {
    Cyclic(CyclicTridiag),
    Dense(nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl CnSolver {
    fn build(op: &EllipticOperator, c: f64) -> Result<CnSolver> {
        let nspace = op.grid().spatial_len();
        if op.grid().dim() == 1 {
            let mut sub = vec![Complex64::new(0.0, 0.0); nspace];
            let mut diag = vec![Complex64::new(0.0, 0.0); nspace];
            let mut sup = vec![Complex64::new(0.0, 0.0); nspace];
            let mut tr = Complex64::new(0.0, 0.0);
            let mut bl = Complex64::new(0.0, 0.0);
            for (i, row) in op.rows().iter().enumerate() {
                for &(j, v) in row {
                    let mv = if i == j {
                        Complex64::new(1.0, 0.0) + v * c
                    } else {
                        v * c
                    };
                    if j == i {
                        diag[i] = mv;
                    } else if j + 1 == i {
                        sub[i] = mv;
                    } else if j == i + 1 {
                        sup[i] = mv;
                    } else if i == 0 && j == nspace - 1 {
                        tr = mv;
                    } else if i == nspace - 1 && j == 0 {
                        bl = mv;
                    } else {
                        return Err(CoreError::Solve(format!(
                            "unexpected stencil entry ({i},{j}) for 1-D operator"
                        )));
                    }
                }
            }
            Ok(CnSolver::Cyclic(CyclicTridiag::new(sub, diag, sup, tr, bl)?))
        } else {
            let mut m = DMatrix::<Complex64>::identity(nspace, nspace);
            for (i, row) in op.rows().iter().enumerate() {
                for &(j, v) in row {
                    m[(i, j)] += v * c;
                }
            }
            Ok(CnSolver::Dense(m.lu()))
        }
    }

    fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        match self {
            CnSolver::Cyclic(t) => t.solve(rhs),
            CnSolver::Dense(lu) => {
                let b = DVector::from_column_slice(rhs);
                let x = lu
                    .solve(&b)
                    .ok_or_else(|| CoreError::Solve("singular Crank-Nicolson matrix".into()))?;
                Ok(x.iter().copied().collect())
            }
        }
    }
}

/// Periodic (cyclic) tridiagonal solver: Thomas elimination plus a
/// Sherman-Morrison rank-one correction for the wrap-around corners.
struct CyclicTridiag {
    n: usize,
    thomas: Thomas,
    z: Vec<Complex64>,
    alpha_over_gamma: Complex64,
}

impl CyclicTridiag {
    fn new(
        sub: Vec<Complex64>,
        diag: Vec<Complex64>,
        sup: Vec<Complex64>,
        corner_tr: Complex64,
        corner_bl: Complex64,
    ) -> Result<Self> {
        let n = diag.len();
        if n < 3 {
            return Err(CoreError::Solve("cyclic solver needs n >= 3".into()));
        }
        let gamma = -diag[0];
        let mut d = diag;
        d[0] -= gamma;
        d[n - 1] -= corner_tr * corner_bl / gamma;
        let thomas = Thomas::factorize(&sub, &d, &sup)?;
        let mut u = vec![Complex64::new(0.0, 0.0); n];
        u[0] = gamma;
        u[n - 1] = corner_bl;
        let z = thomas.solve(&u);
        Ok(Self {
            n,
            thomas,
            z,
            alpha_over_gamma: corner_tr / gamma,
        })
    }

    fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let y = self.thomas.solve(rhs);
        let vy = y[0] + self.alpha_over_gamma * y[self.n - 1];
        let vz = Complex64::new(1.0, 0.0) + self.z[0] + self.alpha_over_gamma * self.z[self.n - 1];
        if vz.norm() == 0.0 {
            return Err(CoreError::Solve("singular cyclic correction".into()));
        }
        let factor = vy / vz;
        Ok((0..self.n).map(|i| y[i] - factor * self.z[i]).collect())
    }
}

/// Precomputed Thomas elimination for a (non-periodic) tridiagonal system.
struct Thomas {
    sub: Vec<Complex64>,
    cp: Vec<Complex64>,
    denom_inv: Vec<Complex64>,
}

impl Thomas {
    fn factorize(sub: &[Complex64], diag: &[Complex64], sup: &[Complex64]) -> Result<Self> {
        let n = diag.len();
        let mut cp = vec![Complex64::new(0.0, 0.0); n];
        let mut denom_inv = vec![Complex64::new(0.0, 0.0); n];
        let mut denom = diag[0];
        if denom.norm() == 0.0 {
            return Err(CoreError::Solve("zero pivot in tridiagonal solve".into()));
        }
        denom_inv[0] = Complex64::new(1.0, 0.0) / denom;
        cp[0] = sup[0] * denom_inv[0];
        for i in 1..n {
            denom = diag[i] - sub[i] * cp[i - 1];
            if denom.norm() == 0.0 {
                return Err(CoreError::Solve("zero pivot in tridiagonal solve".into()));
            }
            denom_inv[i] = Complex64::new(1.0, 0.0) / denom;
            if i + 1 < n {
                cp[i] = sup[i] * denom_inv[i];
            }
        }
        Ok(Self {
            sub: sub.to_vec(),
            cp,
            denom_inv,
        })
    }

    fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let n = rhs.len();
        let mut d = vec![Complex64::new(0.0, 0.0); n];
        d[0] = rhs[0] * self.denom_inv[0];
        for i in 1..n {
            d[i] = (rhs[i] - self.sub[i] * d[i - 1]) * self.denom_inv[i];
        }
        let mut x = d;
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] -= self.cp[i] * next;
        }
        x
    }
}

/// Marches Crank-Nicolson from time `from` to `to` (both semigroup times).
fn cn_march(
    op: &EllipticOperator,
    values: &mut Vec<Complex64>,
    from: f64,
    to: f64,
) -> Result<()> {
    if to <= from {
        return Ok(());
    }
    let delta_max = cn_substep(op, to);
    let steps = ((to - from) / delta_max).ceil().max(1.0) as usize;
    let delta = (to - from) / steps as f64;
    let solver = CnSolver::build(op, delta / 2.0)?;
    for _ in 0..steps {
        let lv = op.matvec(values);
        let rhs: Vec<Complex64> = values
            .iter()
            .zip(&lv)
            .map(|(u, l)| u - l * (delta / 2.0))
            .collect();
        *values = solver.solve(&rhs)?;
    }
    Ok(())
}

/// `e^{-tL} f`.
pub fn heat(op: &EllipticOperator, f: &SpatialFunction, t: f64) -> Result<SpatialFunction> {
    if !(t > 0.0) {
        return Err(CoreError::Param(format!("heat time must be positive, got {t}")));
    }
    if f.grid().spatial_len() != op.grid().spatial_len() {
        return Err(CoreError::Param("operator and function grids differ".into()));
    }
    if op.spectral_path() {
        return apply_spectral(op, f, |mu| (-t * mu).exp());
    }
    let mut values = f.values().to_vec();
    cn_march(op, &mut values, 0.0, t)?;
    SpatialFunction::from_values(op.grid().clone(), values)
}

/// `e^{-t_k L} f` for an ascending list of times. The Crank-Nicolson path
/// marches incrementally through the list (the semigroup law makes the
/// composite march equivalent to independent solves up to scheme accuracy).
pub fn heat_at_nodes(
    op: &EllipticOperator,
    f: &SpatialFunction,
    times: &[f64],
) -> Result<Vec<SpatialFunction>> {
    if times.windows(2).any(|w| w[0] >= w[1]) || times.first().is_some_and(|&t| t <= 0.0) {
        return Err(CoreError::Param("times must be positive and ascending".into()));
    }
    if op.spectral_path() {
        return times.iter().map(|&t| heat(op, f, t)).collect();
    }
    let mut out = Vec::with_capacity(times.len());
    let mut values = f.values().to_vec();
    let mut current = 0.0;
    for &t in times {
        cn_march(op, &mut values, current, t)?;
        current = t;
        out.push(SpatialFunction::from_values(op.grid().clone(), values.clone())?);
    }
    Ok(out)
}

/// `e^{-t L^{1/2}} f` through the subordination quadrature: `k_nodes`
/// generalized Gauss-Laguerre nodes applied to heat solves (collapsed onto
/// the spectrum when the spectral path is available -- the same quadrature,
/// evaluated per eigenvalue).
pub fn poisson(
    op: &EllipticOperator,
    f: &SpatialFunction,
    t: f64,
    k_nodes: usize,
) -> Result<SpatialFunction> {
    if !(t > 0.0) {
        return Err(CoreError::Param(format!(
            "poisson time must be positive, got {t}"
        )));
    }
    let rule = LaguerreRule::cached(k_nodes)?;
    if op.spectral_path() {
        return apply_spectral(op, f, |mu| rule.subordination_symbol(t * t * mu / 4.0));
    }
    let mut acc = vec![Complex64::new(0.0, 0.0); f.values().len()];
    for (s, w) in rule.nodes.iter().zip(&rule.weights) {
        let ht = heat(op, f, t * t / (4.0 * s))?;
        let scale = rule.norm_constant * w;
        for (a, v) in acc.iter_mut().zip(ht.values()) {
            *a += v * scale;
        }
    }
    SpatialFunction::from_values(op.grid().clone(), acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{laplacian_symbol, minus_laplacian, OperatorPreset};
    use crate::grid::make_grid;
    use num_complex::Complex64;

    fn grid() -> crate::grid::Grid {
        make_grid(1, 8.0, 128, 0.05, 4.0, 16).unwrap()
    }

    fn cos_mode(g: &crate::grid::Grid, k: i64) -> SpatialFunction {
        SpatialFunction::sample(g, |x| {
            (2.0 * std::f64::consts::PI * k as f64 * x[0] / g.period()).cos()
        })
        .unwrap()
    }

    #[test]
    fn heat_matches_fourier_oracle() {
        let g = grid();
        let op = minus_laplacian(&g).unwrap();
        for k in [1i64, 3, 8] {
            let f = cos_mode(&g, k);
            let mu = laplacian_symbol(&g, k);
            for t in [0.1, 1.0] {
                let u = heat(&op, &f, t).unwrap();
                let scale = (-t * mu).exp();
                for s in 0..g.spatial_len() {
                    let expect = scale * f.at(s).re;
                    assert!(
                        (u.at(s).re - expect).abs() < 1e-6,
                        "mode {k}, t {t}: {} vs {expect}",
                        u.at(s).re
                    );
                    assert_eq!(u.at(s).im, 0.0);
                }
            }
        }
    }

    #[test]
    fn heat_preserves_constants_and_contracts() {
        let g = grid();
        for preset in OperatorPreset::ALL {
            let op = preset.build(&g).unwrap();
            let ones = SpatialFunction::sample(&g, |_| 1.0).unwrap();
            for t in [0.2, 2.0] {
                let u = heat(&op, &ones, t).unwrap();
                for s in 0..g.spatial_len() {
                    assert!((u.at(s) - Complex64::new(1.0, 0.0)).norm() < 1e-8);
                }
            }
            let f = SpatialFunction::sample(&g, |x| (x[0] * 1.3).sin()).unwrap();
            let u = heat(&op, &f, 0.7).unwrap();
            assert!(u.l2_norm() <= f.l2_norm() * (1.0 + 1e-8), "{}", preset.name());
        }
    }

    #[test]
    fn heat_semigroup_law() {
        let g = grid();
        // spectral path: exact to rounding
        let op = minus_laplacian(&g).unwrap();
        let f = SpatialFunction::sample(&g, |x| (-(x[0] * x[0])).exp()).unwrap();
        let ab = heat(&op, &heat(&op, &f, 0.4).unwrap(), 0.6).unwrap();
        let once = heat(&op, &f, 1.0).unwrap();
        for s in 0..g.spatial_len() {
            assert!((ab.at(s) - once.at(s)).norm() < 1e-6);
        }
        // Crank-Nicolson path
        let opc = OperatorPreset::ComplexPerturbed.build(&g).unwrap();
        let ab = heat(&opc, &heat(&opc, &f, 0.4).unwrap(), 0.6).unwrap();
        let once = heat(&opc, &f, 1.0).unwrap();
        for s in 0..g.spatial_len() {
            assert!((ab.at(s) - once.at(s)).norm() < 1e-6, "CN semigroup law");
        }
    }

    #[test]
    fn cn_path_agrees_with_spectral_path() {
        // a real symmetric operator evaluated through both schemes
        let g = make_grid(1, 8.0, 64, 0.05, 4.0, 8).unwrap();
        let op = OperatorPreset::SmoothScalar.build(&g).unwrap();
        let f = SpatialFunction::sample(&g, |x| (x[0] * 0.9).cos()).unwrap();
        let t = 0.5;
        let spectral = heat(&op, &f, t).unwrap();
        let mut values = f.values().to_vec();
        cn_march(&op, &mut values, 0.0, t).unwrap();
        for (a, b) in spectral.values().iter().zip(&values) {
            assert!((a - b).norm() < 1e-5, "{a} vs {b}");
            // real coefficients, real input: the imaginary part stays
            // exactly zero through the complex solver
            assert_eq!(b.im, 0.0);
        }
    }

    #[test]
    fn poisson_matches_sqrt_symbol() {
        let g = grid();
        let op = minus_laplacian(&g).unwrap();
        // probe (k, t) pairs inside the accurate zone of the quadrature
        for (k, t) in [(2i64, 1.0), (3, 0.8), (8, 0.5)] {
            let f = cos_mode(&g, k);
            let mu = laplacian_symbol(&g, k);
            let u = poisson(&op, &f, t, DEFAULT_SUBORDINATION_NODES).unwrap();
            let scale = (-t * mu.sqrt()).exp();
            for s in [0usize, 17, 63] {
                let expect = scale * f.at(s).re;
                assert!(
                    (u.at(s).re - expect).abs() < 1e-3,
                    "mode {k} t {t}: {} vs {expect}",
                    u.at(s).re
                );
            }
        }
    }

    #[test]
    fn poisson_preserves_constants_and_semigroup_law() {
        let g = grid();
        let op = minus_laplacian(&g).unwrap();
        let ones = SpatialFunction::sample(&g, |_| 1.0).unwrap();
        let u = poisson(&op, &ones, 1.0, 32).unwrap();
        for s in 0..g.spatial_len() {
            assert!((u.at(s).re - 1.0).abs() < 1e-3);
        }
        let f = cos_mode(&g, 2);
        let two = poisson(&op, &poisson(&op, &f, 1.0, 32).unwrap(), 1.0, 32).unwrap();
        let once = poisson(&op, &f, 2.0, 32).unwrap();
        for s in 0..g.spatial_len() {
            assert!((two.at(s).re - once.at(s).re).abs() < 1e-3);
        }
    }

    #[test]
    fn poisson_rejects_small_quadrature() {
        let g = grid();
        let op = minus_laplacian(&g).unwrap();
        let f = cos_mode(&g, 1);
        assert!(poisson(&op, &f, 1.0, 8).is_err());
        assert!(poisson(&op, &f, -1.0, 32).is_err());
        assert!(heat(&op, &f, 0.0).is_err());
    }

    #[test]
    fn laguerre_rule_reproduces_subordination_symbol() {
        let rule = LaguerreRule::new(32).unwrap();
        // total mass: sum of weights = Gamma(1/2)
        let total: f64 = rule.weights.iter().sum();
        assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-10);
        // accurate zone c >= 0.5
        for c in [0.5, 1.0, 2.0, 4.0, 9.0, 25.0] {
            let got = rule.subordination_symbol(c);
            let expect = (-2.0 * c.sqrt()).exp();
            assert!((got - expect).abs() < 5e-4, "c={c}: {got} vs {expect}");
        }
        assert!((rule.norm_constant * total - 1.0).abs() < 1e-3);
    }

    #[test]
    fn cyclic_solver_matches_dense() {
        let n = 16;
        let mut sub = vec![Complex64::new(0.0, 0.0); n];
        let mut diag = vec![Complex64::new(0.0, 0.0); n];
        let mut sup = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            sub[i] = Complex64::new(-0.3, 0.05 * i as f64 / n as f64);
            diag[i] = Complex64::new(2.0 + 0.1 * (i as f64).sin(), 0.02);
            sup[i] = Complex64::new(-0.25, -0.03);
        }
        let tr = Complex64::new(-0.2, 0.01);
        let bl = Complex64::new(-0.15, -0.02);
        let solver = CyclicTridiag::new(sub.clone(), diag.clone(), sup.clone(), tr, bl).unwrap();
        let rhs: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64).cos(), (i as f64 * 0.5).sin()))
            .collect();
        let x = solver.solve(&rhs).unwrap();
        // residual check against the full cyclic matrix
        for i in 0..n {
            let mut acc = diag[i] * x[i];
            acc += sub[i] * x[(i + n - 1) % n] * if i == 0 { 0.0 } else { 1.0 };
            acc += sup[i] * x[(i + 1) % n] * if i == n - 1 { 0.0 } else { 1.0 };
            if i == 0 {
                acc += tr * x[n - 1];
            }
            if i == n - 1 {
                acc += bl * x[0];
            }
            assert!((acc - rhs[i]).norm() < 1e-10, "row {i}");
        }
    }
}
