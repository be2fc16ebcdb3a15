//! The eight experiments: each builds its corpus, evaluates the relevant
//! operators, and returns a self-describing report with pass/fail/info
//! verdicts against the frozen tolerances in [`tolerances`].

use std::time::Instant;

use num_complex::Complex64;

use sqfn_core::corpus::{bump_field, bump_function};
use sqfn_core::counterexample::{
    build_family, conical_l1, lower_family_grid, ratio_scan, upper_family_grid, vertical_l1,
    Family, FamilySpec,
};
use sqfn_core::elliptic::{
    caccioppoli_check, g_h_vertical, heat, laplacian_symbol, minus_laplacian, offdiag_decay,
    poisson, OperatorPreset, DEFAULT_SUBORDINATION_NODES,
};
use sqfn_core::grid::Grid;
use sqfn_core::squarefn::{averaging_identity_residual, compare_norms};
use sqfn_core::weights::{ap_characteristic, rh_characteristic, weighted_compare};
use sqfn_core::{lp_norm, SpatialFunction};

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind, GridParams};
use crate::report::{Cell, ExperimentReport, OutputFormat, Timing, Verdict};

/// Frozen verdict thresholds. The regression ceilings were estimated once
/// over the seeded corpus and then frozen; the rest restate quadrature or
/// scheme tolerances.
pub mod tolerances {
    /// Averaging identity: relative residual per corpus field.
    pub const IDENTITY_RESIDUAL: f64 = 0.02;
    /// Mean residual ratio under simultaneous Nx/Nt doubling ("halves +-30%").
    pub const IDENTITY_REFINE_LO: f64 = 0.35;
    pub const IDENTITY_REFINE_HI: f64 = 0.65;
    /// p = 2 ratio against sqrt(b_n), relative.
    pub const P2_RATIO_REL: f64 = 0.01;
    /// Regression ceiling for ||SF||_4/||VF||_4 (corpus max 1.390).
    pub const P4_RATIO_CEILING: f64 = 1.6;
    /// Fitted scaling-law slope vs expected exponent, relative.
    pub const SLOPE_REL: f64 = 0.10;
    /// Lower-family vertical plateau against 1 (time-quadrature tolerance).
    pub const LOWER_PLATEAU: f64 = 0.01;
    /// Heat semigroup against the discrete Fourier symbol.
    pub const HEAT_ORACLE: f64 = 1e-6;
    /// Poisson semigroup against the square-root symbol (32 nodes).
    pub const POISSON_ORACLE: f64 = 1e-3;
    /// L2 contraction slack.
    pub const CONTRACTION: f64 = 1e-8;
    /// ||G_h f||_2^2 = 1/2 ||f||_2^2 for the flat Laplacian, relative.
    pub const GH_IDENTITY: f64 = 0.01;
    /// Ellipticity sandwich slack, relative.
    pub const SANDWICH: f64 = 0.02;
    /// Off-diagonal fitted exponent against -1/4, relative.
    pub const OFFDIAG_SLOPE_REL: f64 = 0.20;
    /// Decomposition ratio ceilings (corpus maxima 0.562 / 0.843).
    pub const CACCIO_CEILING_M0: f64 = 0.75;
    pub const CACCIO_CEILING_M1: f64 = 1.10;
    /// Ratio stability under one grid refinement.
    pub const CACCIO_REFINE_REL: f64 = 0.30;
    /// Weighted regression ceilings (corpus maxima 1.390 / 0.676).
    pub const WEIGHTED_P4_CEILING: f64 = 1.6;
    pub const WEIGHTED_P1_CEILING: f64 = 0.9;
    /// A_p characteristic invariance under w -> 3w (float rounding).
    pub const SCALE_INVARIANCE: f64 = 1e-12;
    /// Duality bound slack floor for the tight f = g case (the continuum
    /// bound is an equality there; discretization sits inside this).
    pub const CONVERSE_EQUALITY: f64 = 0.01;
}

fn cerr(e: impl std::fmt::Display) -> ConfigError {
    ConfigError(e.to_string())
}

/// Runs an experiment, optionally inside a dedicated rayon pool.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport, ConfigError> {
    if config.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(cerr)?;
        pool.install(|| run_inner(config))
    } else {
        run_inner(config)
    }
}

fn run_inner(config: &ExperimentConfig) -> Result<ExperimentReport, ConfigError> {
    let start = Instant::now();
    let mut report = match config.experiment {
        ExperimentKind::Identity => run_identity(config)?,
        ExperimentKind::Compare => run_compare(config)?,
        ExperimentKind::Counterexample => run_counterexample(config)?,
        ExperimentKind::Weighted => run_weighted(config)?,
        ExperimentKind::SemigroupSquarefn => run_semigroup(config)?,
        ExperimentKind::Offdiag => run_offdiag(config)?,
        ExperimentKind::Caccioppoli => run_caccioppoli(config)?,
        ExperimentKind::ConverseLowerbound => run_converse(config)?,
    };
    if config.timings {
        report.timings.push(Timing {
            stage: "total".into(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(report)
}

fn presets_for(config: &ExperimentConfig) -> Vec<OperatorPreset> {
    match config.operator {
        Some(p) => vec![p],
        None => OperatorPreset::ALL.to_vec(),
    }
}

fn num(v: f64) -> Cell {
    Cell::Num(v)
}

fn string(s: impl Into<String>) -> Cell {
    Cell::Str(s.into())
}

// ---------------------------------------------------------------- identity

fn run_identity(config: &ExperimentConfig) -> Result<ExperimentReport, ConfigError> {
    let grid = config.grid.build()?;
    let mut report = ExperimentReport::new(
        config.experiment.name(),
        config.echo(),
        vec!["field", "n", "Nx", "Nt", "residual"],
    );
    let residuals = identity_residuals(&grid, config.seed, config.fields)?;
    for (i, r) in residuals.iter().enumerate() {
        report.rows.push(vec![
            num(i as f64),
            num(grid.dim() as f64),
            num(grid.nx() as f64),
            num(grid.nt() as f64),
            num(*r),
        ]);
    }
    let max = residuals.iter().cloned().fold(0.0f64, f64::max);
    report.verdicts.push(Verdict::gate(
        "averaging_identity_max_residual",
        max < tolerances::IDENTITY_RESIDUAL,
        format!("{max}"),
        format!("< {}", tolerances::IDENTITY_RESIDUAL),
    ));
    if config.refine {
        let doubled = GridParams {
            nx: config.grid.nx * 2,
            nt: config.grid.nt * 2,
            ..config.grid
        }
        .build()?;
        let refined = identity_residuals(&doubled, config.seed, config.fields)?;
        let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
        let mean_ref = refined.iter().sum::<f64>() / refined.len() as f64;
        let ratio = mean_ref / mean;
        report.verdicts.push(Verdict::gate(
            "residual_halves_under_doubling",
            (tolerances::IDENTITY_REFINE_LO..=tolerances::IDENTITY_REFINE_HI).contains(&ratio),
            format!("{ratio}"),
            format!(
                "in [{}, {}]",
                tolerances::IDENTITY_REFINE_LO,
                tolerances::IDENTITY_REFINE_HI
            ),
        ));
    }
    Ok(report)
}

fn identity_residuals(grid: &Grid, seed: u64, fields: usize) -> Result<Vec<f64>, ConfigError> {
    (0..fields)
        .map(|i| {
            let f = bump_field(grid, seed + i as u64).map_err(cerr)?;
            averaging_identity_residual(&f).map_err(cerr)
        })
        .collect()
}

// ----------------------------------------------------------------- compare

fn run_compare(config: &ExperimentConfig) -> Result<ExperimentReport, ConfigError> {
    let grid = config.grid.build()?;
    let mut report = ExperimentReport::new(
        config.experiment.name(),
        config.echo(),
        vec![
            "kind", "field", "p", "n", "Nx", "Nt", "norm_S", "norm_V", "ratio",
            "explicit_bound", "slack",
        ],
    );
    let sqrt_bn = sqfn_core::unit_ball_volume(grid.dim()).sqrt();
    let mut worst_p2 = 0.0f64;
    let mut min_slack = f64::INFINITY;
    let mut max_p4 = 0.0f64;
    let mut has_sub2 = false;
    let mut has_p4 = false;
    for &p in &config.p_list {
        for i in 0..config.fields {
            let f = bump_field(&grid, config.seed + i as u64).map_err(cerr)?;
            let rec = compare_norms(&f, p).map_err(cerr)?;
            report.rows.push(vec![
                string("conical/vertical"),
                num(i as f64),
                num(p),
                num(grid.dim() as f64),
                num(grid.nx() as f64),
                num(grid.nt() as f64),
                num(rec.norm_s),
                num(rec.norm_v),
                Cell::ratio(rec.ratio),
                rec.explicit_constant.map_or(string(""), num),
                rec.bound_slack.map_or(string(""), num),
            ]);
            if p == 2.0 {
                if let Some(r) = rec.ratio {
                    worst_p2 = worst_p2.max((r / sqrt_bn - 1.0).abs());
                }
            }
            if p < 2.0 {
                has_sub2 = true;
                if let Some(s) = rec.bound_slack {
                    min_slack = min_slack.min(s);
                }
            }
            if p == 4.0 {
                has_p4 = true;
                if let Some(r) = rec.ratio {
                    max_p4 = max_p4.max(r);
                }
            }
        }
    }
    if config.p_list.contains(&2.0) {
        report.verdicts.push(Verdict::gate(
            "p2_ratio_matches_sqrt_ball_volume",
            worst_p2 < tolerances::P2_RATIO_REL,
            format!("{worst_p2}"),
            format!("relative deviation < {}", tolerances::P2_RATIO_REL),
        ));
    }
    if has_sub2 {
        report.verdicts.push(Verdict::gate(
            "explicit_bound_slack_nonnegative",
            min_slack >= 0.0,
            format!("{min_slack}"),
            ">= 0".into(),
        ));
    }
    if has_p4 {
        report.verdicts.push(Verdict::info(
            "p4_ratio_regression",
            format!("{max_p4}"),
            format!("<= {} (frozen corpus ceiling)", tolerances::P4_RATIO_CEILING),
        ));
        report.verdicts.push(Verdict::gate(
            "p4_ratio_below_frozen_ceiling",
            max_p4 <= tolerances::P4_RATIO_CEILING,
            format!("{max_p4}"),
            format!("<= {}", tolerances::P4_RATIO_CEILING),
        ));
    }

    // aperture dependence of the conical norm, measured but not bounded
    // (no constant is known for the change-of-aperture equivalence here)
    use sqfn_core::{apply_squarefn, SquareFunctionSpec, SquareKind};
    for aperture in [0.5, 2.0] {
        let mut worst = 0.0f64;
        for i in 0..config.fields.min(5) {
            let f = bump_field(&grid, config.seed + i as u64).map_err(cerr)?;
            let base = apply_squarefn(&SquareFunctionSpec::new(SquareKind::Conical, grid.dim()), &f)
                .map_err(cerr)?;
            let wide = apply_squarefn(
                &SquareFunctionSpec::new(SquareKind::Conical, grid.dim())
                    .with_aperture(aperture)
                    .map_err(cerr)?,
                &f,
            )
            .map_err(cerr)?;
            let r = lp_norm(&wide, 2.0, None).map_err(cerr)?
                / lp_norm(&base, 2.0, None).map_err(cerr)?;
            worst = worst.max(r.max(1.0 / r));
            report.rows.push(vec![
                string(format!("aperture_{aperture}_vs_1")),
                num(i as f64),
                num(2.0),
                num(grid.dim() as f64),
                num(grid.nx() as f64),
                num(grid.nt() as f64),
                num(lp_norm(&wide, 2.0, None).map_err(cerr)?),
                num(lp_norm(&base, 2.0, None).map_err(cerr)?),
                num(r),
                string(""),
                string(""),
            ]);
        }
        report.verdicts.push(Verdict::info(
            &format!("aperture_{aperture}_equivalence"),
            format!("max two-sided ratio {worst}"),
            "measured only; no constant asserted".into(),
        ));
    }
    Ok(report)
}

// --------------------------------------------------------- counterexample

fn run_counterexample(config: &ExperimentConfig) -> Result<ExperimentReport, ConfigError> {
    let mut report = ExperimentReport::new(
        config.experiment.name(),
        config.echo(),
        vec![
            "family",
            "n",
            "p",
            "N",
            "norm_S_tilde_p",
            "norm_V_tilde_p",
            "ratio",
            "fitted_slope",
            "expected_slope",
        ],
    );
    let jobs: Vec<(Family, f64, Vec<f64>)> = if config.p_list.is_empty() {
        vec![
            (Family::Lower, 0.5, vec![16.0, 32.0, 64.0, 128.0, 256.0]),
            (Family::Upper, 2.0, vec![4.0, 8.0, 16.0, 32.0]),
        ]
    } else {
        config
            .p_list
            .iter()
            .map(|&p| {
                let family = if p < 1.0 {
                    Ok(Family::Lower)
                } else if p > 1.0 {
                    Ok(Family::Upper)
                } else {
                    Err(ConfigError("p = 1 belongs to neither family".into()))
                }?;
                let scales = if config.n_list.is_empty() {
                    match family {
                        Family::Lower => vec![16.0, 32.0, 64.0, 128.0, 256.0],
                        Family::Upper => vec![4.0, 8.0, 16.0, 32.0],
                    }
                } else {
                    config.n_list.clone()
                };
                Ok((family, p, scales))
            })
            .collect::<Result<_, ConfigError>>()?
    };

    for (family, p, scales) in jobs {
        let scan = ratio_scan(family, p, &scales).map_err(cerr)?;
        let family_name = match family {
            Family::Lower => "lower",
            Family::Upper => "upper",
        };
        for row in &scan.rows {
            report.rows.push(vec![
                string(family_name),
                num(1.0),
                num(p),
                num(row.scale),
                num(row.norm_s_p),
                num(row.norm_v_p),
                num(row.ratio),
                scan.fitted_slope.map_or(string(""), num),
                num(scan.expected_slope),
            ]);
        }
        if let Some(slope) = scan.fitted_slope {
            let rel = (slope - scan.expected_slope).abs() / scan.expected_slope.abs();
            report.verdicts.push(Verdict::gate(
                &format!("{family_name}_slope_matches_exponent"),
                rel < tolerances::SLOPE_REL,
                format!("slope {slope} vs expected {}", scan.expected_slope),
                format!("relative error < {}", tolerances::SLOPE_REL),
            ));
        } else {
            report.verdicts.push(Verdict::info(
                &format!("{family_name}_slope_undefined"),
                "single N".into(),
                "needs >= 3 scales".into(),
            ));
        }
        // structural checks on the largest member
        match family {
            Family::Lower => {
                let big_n = *scales.last().unwrap();
                let grid = lower_family_grid(big_n).map_err(cerr)?;
                let spec = FamilySpec::new(family, big_n, grid.clone()).map_err(cerr)?;
                let f = build_family(&spec).map_err(cerr)?;
                let v = vertical_l1(&f).map_err(cerr)?;
                let (exact, plateau) = indicator_structure(&grid, &v, 1.0);
                report.verdicts.push(Verdict::gate(
                    "lower_vertical_is_indicator",
                    exact && (plateau - 1.0).abs() < tolerances::LOWER_PLATEAU,
                    format!("plateau {plateau}, shape exact: {exact}"),
                    format!("cell-exact indicator, |plateau - 1| < {}", tolerances::LOWER_PLATEAU),
                ));
            }
            Family::Upper => {
                let grid = upper_family_grid().map_err(cerr)?;
                let big_n = *scales.last().unwrap();
                let spec = FamilySpec::new(family, big_n, grid.clone()).map_err(cerr)?;
                let f = build_family(&spec).map_err(cerr)?;
                let s = conical_l1(&f).map_err(cerr)?;
                let mut support_ok = true;
                for idx in 0..grid.spatial_len() {
                    let x = grid.coord(idx)[0];
                    if grid.axis_dist(x, 0.0) > 2.0 && s.at(idx).re != 0.0 {
                        support_ok = false;
                    }
                }
                report.verdicts.push(Verdict::gate(
                    "upper_conical_vanishes_beyond_two",
                    support_ok,
                    format!("{support_ok}"),
                    "S~ f_N(x) = 0 for |x| > 2, cell-exact".into(),
                ));
            }
        }
    }
    Ok(report)
}

/// Checks that `v` is exactly `c * chi_{B(0, r)}` on cells; returns
/// (shape-exact, plateau value).
fn indicator_structure(grid: &Grid, v: &SpatialFunction, r: f64) -> (bool, f64) {
    let mut plateau = None;
    let mut exact = true;
    for s in 0..grid.spatial_len() {
        let x = grid.coord(s);
        let inside = grid.torus_dist(&x[..grid.dim()], &[0.0, 0.0][..grid.dim()]) < r;
        let val = v.at(s).re;
        if inside {
            match plateau {
                None => plateau = Some(val),
                Some(p) => {
                    if val != p {
                        exact = false;
                    }
                }
            }
        } else if val != 0.0 {
            exact = false;
        }
    }
    (exact, plateau.unwrap_or(0.0))
}

// ---------------------------------------------------------------- weighted

fn run_weighted(config: &ExperimentConfig) -> Result<ExperimentReport, ConfigError> {
    let grid = config.grid.build()?;
    let mut report = ExperimentReport::new(
        config.experiment.name(),
        config.echo(),
        vec![
            "weight", "field", "p", "n", "Nx", "Nt", "norm_S_w", "norm_V_w", "ratio",
            "char_label", "char_value", "ap2", "rh2",
        ],
    );
    let mut presets = vec![crate::config::WeightPreset::Unit];
    if config.weight != crate::config::WeightPreset::Unit {
        presets.push(config.weight.clone());
    }
    for preset in presets {
        let w = preset.build(&grid)?;
        let ap2 = ap_characteristic(&w, 2.0).map_err(cerr)?;
        let rh2 = rh_characteristic(&w, 2.0).map_err(cerr)?;
        let mut max_p4 = 0.0f64;
        let mut max_p1_vs = 0.0f64;
        for &p in &config.p_list {
            for i in 0..config.fields {
                let f = bump_field(&grid, config.seed + i as u64).map_err(cerr)?;
                let rec = weighted_compare(&f, p, &w).map_err(cerr)?;
                let (label, value) = rec
                    .characteristic
                    .clone()
                    .map_or((String::new(), f64::NAN), |c| c);
                report.rows.push(vec![
                    string(preset.name()),
                    num(i as f64),
                    num(p),
                    num(grid.dim() as f64),
                    num(grid.nx() as f64),
                    num(grid.nt() as f64),
                    num(rec.norm_s_w),
                    num(rec.norm_v_w),
                    Cell::ratio(rec.ratio),
                    string(label),
                    if value.is_nan() { string("") } else { num(value) },
                    num(ap2),
                    num(rh2),
                ]);
                if p == 4.0 {
                    if let Some(r) = rec.ratio {
                        max_p4 = max_p4.max(r);
                    }
                }
                if p == 1.0 {
                    if let Some(r) = rec.ratio {
                        max_p1_vs = max_p1_vs.max(1.0 / r);
                    }
                }
            }
        }
        if config.p_list.contains(&4.0) {
            report.verdicts.push(Verdict::gate(
                &format!("{}_p4_ratio_bounded", preset.name()),
                max_p4 <= tolerances::WEIGHTED_P4_CEILING,
                format!("{max_p4}"),
                format!("<= {} (frozen corpus ceiling)", tolerances::WEIGHTED_P4_CEILING),
            ));
        }
        if config.p_list.contains(&1.0) {
            report.verdicts.push(Verdict::gate(
                &format!("{}_p1_reverse_ratio_bounded", preset.name()),
                max_p1_vs <= tolerances::WEIGHTED_P1_CEILING,
                format!("{max_p1_vs}"),
                format!("<= {} (frozen corpus ceiling)", tolerances::WEIGHTED_P1_CEILING),
            ));
        }
        // scale invariance under w -> 3w
        let w3 = w.scaled(3.0).map_err(cerr)?;
        let mut worst = 0.0f64;
        for p in [1.0, 2.0, 4.0] {
            let a = ap_characteristic(&w, p).map_err(cerr)?;
            let b = ap_characteristic(&w3, p).map_err(cerr)?;
            worst = worst.max((a - b).abs() / a.max(1.0));
        }
        report.verdicts.push(Verdict::gate(
            &format!("{}_ap_scale_invariance", preset.name()),
            worst <= tolerances::SCALE_INVARIANCE,
            format!("{worst}"),
            format!("<= {} (exact to rounding)", tolerances::SCALE_INVARIANCE),
        ));
    }
    Ok(report)
}

// --------------------------------------------------------------- semigroup

fn run_semigroup(config: &ExperimentConfig) -> Result<ExperimentReport, ConfigError> {
    let grid = config.grid.build()?;
    let mut report = ExperimentReport::new(
        config.experiment.name(),
        config.echo(),
        vec!["check", "operator", "detail", "value"],
    );
    let lap = minus_laplacian(&grid).map_err(cerr)?;

    // heat and Poisson oracles against the discrete symbols (flat Laplacian)
    let mut heat_err = 0.0f64;
    for k in [1i64, 3, 8] {
        let arg = 2.0 * std::f64::consts::PI * k as f64 / grid.period();
        let f = SpatialFunction::sample(&grid, |x| (arg * x[0]).cos()).map_err(cerr)?;
        let mu = laplacian_symbol(&grid, k);
        for t in [0.1, 1.0] {
            let u = heat(&lap, &f, t).map_err(cerr)?;
            let mut err = 0.0f64;
            for s in 0..grid.spatial_len() {
                err = err.max((u.at(s).re - (-t * mu).exp() * f.at(s).re).abs());
            }
            heat_err = heat_err.max(err);
            report.rows.push(vec![
                string("heat_oracle"),
                string("identity"),
                string(format!("mode {k}, t {t}")),
                num(err),
            ]);
        }
    }
    report.verdicts.push(Verdict::gate(
        "heat_matches_fourier_oracle",
        heat_err < tolerances::HEAT_ORACLE,
        format!("{heat_err}"),
        format!("< {}", tolerances::HEAT_ORACLE),
    ));

    let mut poisson_err = 0.0f64;
    for (k, t) in [(2i64, 1.0), (3, 0.8), (8, 0.5)] {
        let arg = 2.0 * std::f64::consts::PI * k as f64 / grid.period();
        let f = SpatialFunction::sample(&grid, |x| (arg * x[0]).cos()).map_err(cerr)?;
        let mu = laplacian_symbol(&grid, k);
        let u = poisson(&lap, &f, t, DEFAULT_SUBORDINATION_NODES).map_err(cerr)?;
        let mut err = 0.0f64;
        for s in 0..grid.spatial_len() {
            err = err.max((u.at(s).re - (-t * mu.sqrt()).exp() * f.at(s).re).abs());
        }
        poisson_err = poisson_err.max(err);
        report.rows.push(vec![
            string("poisson_oracle"),
            string("identity"),
            string(format!("mode {k}, t {t}")),
            num(err),
        ]);
    }
    report.verdicts.push(Verdict::gate(
        "poisson_matches_sqrt_symbol",
        poisson_err < tolerances::POISSON_ORACLE,
        format!("{poisson_err}"),
        format!("< {} at K = {}", tolerances::POISSON_ORACLE, DEFAULT_SUBORDINATION_NODES),
    ));

    // semigroup laws
    let f0 = bump_function(&grid, config.seed, true).map_err(cerr)?;
    let mut law_err = 0.0f64;
    let composed = heat(&lap, &heat(&lap, &f0, 0.4).map_err(cerr)?, 0.6).map_err(cerr)?;
    let direct = heat(&lap, &f0, 1.0).map_err(cerr)?;
    for s in 0..grid.spatial_len() {
        law_err = law_err.max((composed.at(s) - direct.at(s)).norm());
    }
    report.verdicts.push(Verdict::gate(
        "heat_semigroup_law",
        law_err < tolerances::HEAT_ORACLE,
        format!("{law_err}"),
        format!("< {}", tolerances::HEAT_ORACLE),
    ));
    let arg = 2.0 * std::f64::consts::PI * 2.0 / grid.period();
    let mode = SpatialFunction::sample(&grid, |x| (arg * x[0]).cos()).map_err(cerr)?;
    let p2 = poisson(
        &lap,
        &poisson(&lap, &mode, 1.0, DEFAULT_SUBORDINATION_NODES).map_err(cerr)?,
        1.0,
        DEFAULT_SUBORDINATION_NODES,
    )
    .map_err(cerr)?;
    let p_direct = poisson(&lap, &mode, 2.0, DEFAULT_SUBORDINATION_NODES).map_err(cerr)?;
    let mut plaw_err = 0.0f64;
    for s in 0..grid.spatial_len() {
        plaw_err = plaw_err.max((p2.at(s) - p_direct.at(s)).norm());
    }
    report.verdicts.push(Verdict::gate(
        "poisson_semigroup_law",
        plaw_err < tolerances::POISSON_ORACLE,
        format!("{plaw_err}"),
        format!("< {}", tolerances::POISSON_ORACLE),
    ));

    // contraction across presets and corpus
    let mut worst_growth = 0.0f64;
    for preset in presets_for(config) {
        let op = preset.build(&grid).map_err(cerr)?;
        for i in 0..config.fields.min(5) {
            let f = bump_function(&grid, config.seed + i as u64, true).map_err(cerr)?;
            let base = f.l2_norm();
            for t in [0.1, 1.0, 5.0] {
                let u = heat(&op, &f, t).map_err(cerr)?;
                worst_growth = worst_growth.max(u.l2_norm() / base - 1.0);
            }
        }
    }
    report.verdicts.push(Verdict::gate(
        "l2_contraction",
        worst_growth <= tolerances::CONTRACTION,
        format!("{worst_growth}"),
        format!("norm growth <= {}", tolerances::CONTRACTION),
    ));

    // p = 2 square-function identity and ellipticity sandwich
    let mut worst_identity = 0.0f64;
    for i in 0..config.fields {
        let f = bump_function(&grid, config.seed + i as u64, true).map_err(cerr)?;
        let gh = g_h_vertical(&lap, &f).map_err(cerr)?;
        let lhs = lp_norm(&gh, 2.0, None).map_err(cerr)?.powi(2);
        let rhs = 0.5 * f.l2_norm().powi(2);
        worst_identity = worst_identity.max((lhs - rhs).abs() / rhs);
        report.rows.push(vec![
            string("gh_identity"),
            string("identity"),
            string(format!("field {i}")),
            num((lhs - rhs).abs() / rhs),
        ]);
    }
    report.verdicts.push(Verdict::gate(
        "gh_identity_half_l2",
        worst_identity < tolerances::GH_IDENTITY,
        format!("{worst_identity}"),
        format!("relative defect < {}", tolerances::GH_IDENTITY),
    ));

    for preset in presets_for(config) {
        if preset == OperatorPreset::ComplexPerturbed {
            continue; // sandwich is stated for real symmetric coefficients
        }
        let op = preset.build(&grid).map_err(cerr)?;
        let (lam, lam_up) = preset.ellipticity();
        let mut worst = 0.0f64;
        for i in 0..config.fields {
            let f = bump_function(&grid, config.seed + i as u64, true).map_err(cerr)?;
            let gh2 = lp_norm(&g_h_vertical(&op, &f).map_err(cerr)?, 2.0, None)
                .map_err(cerr)?
                .powi(2);
            let half = 0.5 * f.l2_norm().powi(2);
            worst = worst.max((lam * gh2 - half).max(0.0) / half);
            worst = worst.max((half - lam_up * gh2).max(0.0) / half);
        }
        report.verdicts.push(Verdict::gate(
            &format!("sandwich_{}", preset.name()),
            worst < tolerances::SANDWICH,
            format!("{worst}"),
            format!("relative violation < {}", tolerances::SANDWICH),
        ));
    }

    // Poisson vertical and parabolic conical variants at p = 2 for the flat
    // Laplacian; continuum references 1/2 and b_n/2 respectively
    {
        use sqfn_core::elliptic::{g_p_vertical, gh_conical_parabolic};
        let bn = sqfn_core::unit_ball_volume(grid.dim());
        let mut worst_gp = 0.0f64;
        let mut worst_par = 0.0f64;
        for i in 0..config.fields.min(5) {
            let f = bump_function(&grid, config.seed + i as u64, true).map_err(cerr)?;
            let half = 0.5 * f.l2_norm().powi(2);
            let gp2 = lp_norm(&g_p_vertical(&lap, &f).map_err(cerr)?, 2.0, None)
                .map_err(cerr)?
                .powi(2);
            worst_gp = worst_gp.max((gp2 - half).abs() / half);
            let par2 = lp_norm(&gh_conical_parabolic(&lap, &f).map_err(cerr)?, 2.0, None)
                .map_err(cerr)?
                .powi(2);
            worst_par = worst_par.max((par2 - bn * half).abs() / (bn * half));
        }
        report.verdicts.push(Verdict::info(
            "poisson_vertical_p2_identity",
            format!("worst relative defect {worst_gp}"),
            "reference 1/2 ||f||_2^2; informational (log-t differencing at the ends)".into(),
        ));
        report.verdicts.push(Verdict::info(
            "parabolic_conical_p2_identity",
            format!("worst relative defect {worst_par}"),
            "reference (b_n/2) ||f||_2^2; informational".into(),
        ));
    }

    // exploratory Lp ratio scan for G_h (informational; no blow-up asserted)
    for preset in presets_for(config) {
        let op = preset.build(&grid).map_err(cerr)?;
        for p in [1.5, 2.0, 4.0, 8.0] {
            let mut max_ratio = 0.0f64;
            for i in 0..config.fields.min(5) {
                let f = bump_function(&grid, config.seed + i as u64, true).map_err(cerr)?;
                let gh = g_h_vertical(&op, &f).map_err(cerr)?;
                let num_ = lp_norm(&gh, p, None).map_err(cerr)?;
                let den = lp_norm(&f, p, None).map_err(cerr)?;
                if den > 0.0 {
                    max_ratio = max_ratio.max(num_ / den);
                }
            }
            report.rows.push(vec![
                string("gh_lp_ratio"),
                string(preset.name()),
                string(format!("p {p}")),
                num(max_ratio),
            ]);
        }
    }
    report.verdicts.push(Verdict::info(
        "gh_lp_ratio_scan",
        "see gh_lp_ratio rows".into(),
        "exploratory; no blow-up asserted at desk scale".into(),
    ));
    Ok(report)
}

// ----------------------------------------------------------------- offdiag

/// Interval endpoints and probe profile for the off-diagonal scan
/// (calibrated so the fitted exponent of the flat Laplacian sits near -1/4).
const OFFDIAG_E: (f64, f64) = (-1.5, -1.0);
const OFFDIAG_F: (f64, f64) = (1.0, 1.5);
const OFFDIAG_CENTER: f64 = -1.25;
const OFFDIAG_SIGMA: f64 = 0.1;
const OFFDIAG_T: (f64, f64, usize) = (0.5, 2.5, 8);

fn run_offdiag(config: &ExperimentConfig) -> Result<ExperimentReport, ConfigError> {
    let grid = config.grid.build()?;
    if grid.period() < 8.0 {
        return Err(ConfigError(
            "offdiag needs period >= 8 to hold the probe intervals".into(),
        ));
    }
    let mut report = ExperimentReport::new(
        config.experiment.name(),
        config.echo(),
        vec!["operator", "t", "d", "amplitude", "d2_over_t"],
    );
    let e_cells: Vec<usize> = (0..grid.spatial_len())
        .filter(|&s| {
            let x = grid.coord(s)[0];
            x >= OFFDIAG_E.0 && x <= OFFDIAG_E.1
        })
        .collect();
    let f_cells: Vec<usize> = (0..grid.spatial_len())
        .filter(|&s| {
            let x = grid.coord(s)[0];
            x >= OFFDIAG_F.0 && x <= OFFDIAG_F.1
        })
        .collect();
    let probe = SpatialFunction::sample(&grid, |x| {
        (-(x[0] - OFFDIAG_CENTER).powi(2) / (2.0 * OFFDIAG_SIGMA * OFFDIAG_SIGMA)).exp()
    })
    .map_err(cerr)?;
    let (t0, t1, tn) = OFFDIAG_T;
    let ratio = (t1 / t0).powf(1.0 / (tn - 1) as f64);
    let t_list: Vec<f64> = (0..tn).map(|i| t0 * ratio.powi(i as i32)).collect();

    let mut worst_amp = 0.0f64;
    for preset in presets_for(config) {
        let op = preset.build(&grid).map_err(cerr)?;
        let rec = offdiag_decay(&op, &e_cells, &f_cells, &probe, &t_list).map_err(cerr)?;
        for (t, amp) in &rec.rows {
            report.rows.push(vec![
                string(preset.name()),
                num(*t),
                num(rec.distance),
                num(*amp),
                num(rec.distance * rec.distance / t),
            ]);
            worst_amp = worst_amp.max(*amp);
        }
        let slope = rec
            .slope
            .ok_or_else(|| ConfigError("slope fit failed".into()))?;
        if preset == OperatorPreset::Identity {
            let rel = (slope + 0.25).abs() / 0.25;
            report.verdicts.push(Verdict::gate(
                "identity_gaussian_exponent",
                rel < tolerances::OFFDIAG_SLOPE_REL,
                format!("slope {slope}"),
                format!("-1/4 within {}", tolerances::OFFDIAG_SLOPE_REL),
            ));
        }
        report.verdicts.push(Verdict::gate(
            &format!("{}_slope_negative", preset.name()),
            slope < 0.0,
            format!("{slope}"),
            "< 0".into(),
        ));
    }
    report.verdicts.push(Verdict::gate(
        "amplitudes_contractive",
        worst_amp <= 1.0 + tolerances::CONTRACTION,
        format!("{worst_amp}"),
        format!("<= 1 + {}", tolerances::CONTRACTION),
    ));
    Ok(report)
}

// ------------------------------------------------------------- caccioppoli

fn run_caccioppoli(config: &ExperimentConfig) -> Result<ExperimentReport, ConfigError> {
    let grid = config.grid.build()?;
    let mut report = ExperimentReport::new(
        config.experiment.name(),
        config.echo(),
        vec!["operator", "m", "field", "max_ratio"],
    );
    let presets = match config.operator {
        Some(p) => vec![p],
        None => vec![OperatorPreset::Identity],
    };
    for preset in presets {
        let op = preset.build(&grid).map_err(cerr)?;
        for m in [0usize, 1] {
            let ceiling = if m == 0 {
                tolerances::CACCIO_CEILING_M0
            } else {
                tolerances::CACCIO_CEILING_M1
            };
            let max_base = caccio_corpus_max(&op, &grid, m, config)?;
            for (i, r) in max_base.1.iter().enumerate() {
                report.rows.push(vec![
                    string(preset.name()),
                    num(m as f64),
                    num(i as f64),
                    num(*r),
                ]);
            }
            report.verdicts.push(Verdict::gate(
                &format!("{}_m{}_ratio_ceiling", preset.name(), m),
                max_base.0 <= ceiling,
                format!("{}", max_base.0),
                format!("<= {ceiling} (frozen corpus ceiling)"),
            ));
            if config.refine {
                let refined_grid = GridParams {
                    nx: config.grid.nx * 2,
                    nt: config.grid.nt * 2,
                    ..config.grid
                }
                .build()?;
                let refined_op = preset.build(&refined_grid).map_err(cerr)?;
                let max_ref = caccio_corpus_max(&refined_op, &refined_grid, m, config)?;
                let rel = (max_ref.0 - max_base.0).abs() / max_base.0;
                report.verdicts.push(Verdict::gate(
                    &format!("{}_m{}_refinement_stability", preset.name(), m),
                    rel <= tolerances::CACCIO_REFINE_REL,
                    format!("base {}, refined {}", max_base.0, max_ref.0),
                    format!("relative change <= {}", tolerances::CACCIO_REFINE_REL),
                ));
            }
        }
    }
    Ok(report)
}

fn caccio_corpus_max(
    op: &sqfn_core::elliptic::EllipticOperator,
    grid: &Grid,
    m: usize,
    config: &ExperimentConfig,
) -> Result<(f64, Vec<f64>), ConfigError> {
    let cells: Vec<usize> = (0..grid.spatial_len()).step_by(4).collect();
    let mut per_field = Vec::with_capacity(config.fields);
    let mut overall = 0.0f64;
    for i in 0..config.fields {
        let f = bump_function(grid, config.seed + i as u64, true).map_err(cerr)?;
        let rec = caccioppoli_check(op, &f, m, &cells).map_err(cerr)?;
        let r = rec.max_ratio().unwrap_or(0.0);
        per_field.push(r);
        overall = overall.max(r);
    }
    Ok((overall, per_field))
}

// ---------------------------------------------------- converse-lowerbound

fn run_converse(config: &ExperimentConfig) -> Result<ExperimentReport, ConfigError> {
    let grid = config.grid.build()?;
    let mut report = ExperimentReport::new(
        config.experiment.name(),
        config.echo(),
        vec!["operator", "pair", "lhs", "rhs", "slack"],
    );
    let lap = minus_laplacian(&grid).map_err(cerr)?;
    let hn = grid.cell_volume();
    for preset in presets_for(config) {
        let op = preset.build(&grid).map_err(cerr)?;
        let norm_a = op.coeff_sup_norm();
        let mut min_slack = f64::INFINITY;
        for pair in 0..config.fields {
            let f = bump_function(&grid, config.seed + 1000 + 2 * pair as u64, true)
                .map_err(cerr)?;
            let g = bump_function(&grid, config.seed + 1001 + 2 * pair as u64, true)
                .map_err(cerr)?;
            let lhs: Complex64 = f
                .values()
                .iter()
                .zip(g.values())
                .map(|(a, b)| a * b.conj() * hn)
                .sum();
            let ghf = g_h_vertical(&op, &f).map_err(cerr)?;
            let ghg = g_h_vertical(&lap, &g).map_err(cerr)?;
            let rhs = (norm_a + 1.0)
                * lp_norm(&ghf, 2.0, None).map_err(cerr)?
                * lp_norm(&ghg, 2.0, None).map_err(cerr)?;
            let slack = rhs - lhs.norm();
            min_slack = min_slack.min(slack / rhs.max(f64::EPSILON));
            report.rows.push(vec![
                string(preset.name()),
                num(pair as f64),
                num(lhs.norm()),
                num(rhs),
                num(slack),
            ]);
        }
        report.verdicts.push(Verdict::gate(
            &format!("{}_duality_bound", preset.name()),
            min_slack >= 0.0,
            format!("min relative slack {min_slack}"),
            ">= 0".into(),
        ));
    }
    // the tight f = g case for the flat Laplacian: the continuum bound is an
    // equality, so the discrete check carries a quadrature tolerance
    let f = bump_function(&grid, config.seed + 7, true).map_err(cerr)?;
    let gh = g_h_vertical(&lap, &f).map_err(cerr)?;
    let rhs = 2.0 * lp_norm(&gh, 2.0, None).map_err(cerr)?.powi(2);
    let lhs = f.l2_norm().powi(2);
    let rel = (rhs - lhs) / rhs;
    report.rows.push(vec![
        string("identity (f = g)"),
        num(-1.0),
        num(lhs),
        num(rhs),
        num(rhs - lhs),
    ]);
    report.verdicts.push(Verdict::gate(
        "equality_case_within_quadrature",
        rel >= -tolerances::CONVERSE_EQUALITY,
        format!("relative slack {rel}"),
        format!(">= -{} (tight case, quadrature tolerance)", tolerances::CONVERSE_EQUALITY),
    ));
    Ok(report)
}

pub fn emit_to(
    report: &ExperimentReport,
    format: OutputFormat,
    out: Option<&std::path::Path>,
) -> Result<(), ConfigError> {
    let bytes = report.emit(format);
    match out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| ConfigError(format!("cannot write {}: {e}", path.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| ConfigError(format!("stdout: {e}")))
        }
    }
}
