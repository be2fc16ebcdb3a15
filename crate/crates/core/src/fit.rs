//! Least-squares line fitting, used by the scaling-law and off-diagonal
//! decay scans.

/// Ordinary least squares fit `y = slope * x + intercept`.
/// Returns `None` with fewer than two points or a degenerate abscissa.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Fit of `log y` against `log x`; inputs must be positive.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.iter().any(|&x| x <= 0.0) || ys.iter().any(|&y| y <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly).map(|(s, _)| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_recovered() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| -0.25 * x + 1.5).collect();
        let (s, b) = fit_line(&xs, &ys).unwrap();
        assert!((s + 0.25).abs() < 1e-14);
        assert!((b - 1.5).abs() < 1e-14);
    }

    #[test]
    fn degenerate_inputs_give_none() {
        assert!(fit_line(&[1.0], &[2.0]).is_none());
        assert!(fit_line(&[1.0, 1.0], &[2.0, 3.0]).is_none());
        assert!(fit_loglog_slope(&[1.0, -2.0], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn power_law_slope() {
        let xs = [4.0f64, 8.0, 16.0, 32.0];
        let ys: Vec<f64> = xs.iter().map(|&x| 3.0 * x.powf(-1.0)).collect();
        let s = fit_loglog_slope(&xs, &ys).unwrap();
        assert!((s + 1.0).abs() < 1e-12);
    }
}
