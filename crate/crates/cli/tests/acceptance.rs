//! Acceptance suite: every release gate runs here with its tolerance pinned
//! in code, one criterion per test, one summary line per criterion.
//!
//! Criteria that freeze corpus-calibrated ceilings reference the constants
//! in `sqfn_cli::tolerances`, which record the measured corpus values they
//! were frozen from.

use std::time::Instant;

use sqfn_cli::config::{ExperimentConfig, ExperimentKind};
use sqfn_cli::report::{ExperimentReport, OutputFormat, Status};
use sqfn_cli::{run, tolerances};

use sqfn_core::corpus::bump_function;
use sqfn_core::counterexample::{
    build_family, lower_family_grid, ratio_scan, Family, FamilySpec,
};
use sqfn_core::elliptic::{caccioppoli_check, minus_laplacian, OperatorPreset};
use sqfn_core::grid::make_grid;

fn assert_all_pass(report: &ExperimentReport, context: &str) {
    for v in &report.verdicts {
        assert_ne!(
            v.status,
            Status::Fail,
            "{context}: verdict {} failed (observed {}, threshold {})",
            v.name,
            v.observed,
            v.threshold
        );
    }
}

fn verdict<'r>(report: &'r ExperimentReport, name: &str) -> &'r sqfn_cli::report::Verdict {
    report
        .verdicts
        .iter()
        .find(|v| v.name == name)
        .unwrap_or_else(|| panic!("missing verdict {name}"))
}

#[test]
fn criterion_01_averaging_identity() {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::Identity);
    cfg.refine = true; // adds the Nx/Nt doubling check
    assert_eq!((cfg.grid.nx, cfg.grid.nt, cfg.fields), (256, 64, 50));
    let report = run(&cfg).unwrap();
    assert_all_pass(&report, "criterion 1");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "runtime {elapsed:?} exceeds 1 min");
    println!(
        "criterion 01 PASS: averaging identity ({}; doubling {}) in {elapsed:?}",
        verdict(&report, "averaging_identity_max_residual").observed,
        verdict(&report, "residual_halves_under_doubling").observed,
    );
}

#[test]
fn criterion_02_explicit_constant_bound() {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::Compare);
    cfg.p_list = vec![0.5, 1.0, 1.5];
    cfg.fields = 100;
    let report = run(&cfg).unwrap();
    assert_all_pass(&report, "criterion 2");
    // 100% of the corpus: every row's slack column is nonnegative
    let slack_col = report.columns.iter().position(|c| c == "slack").unwrap();
    let mut checked = 0;
    for row in &report.rows {
        if let sqfn_cli::report::Cell::Num(s) = row[slack_col] {
            assert!(s >= 0.0, "negative slack {s}");
            checked += 1;
        }
    }
    assert_eq!(checked, 300, "expected 3 p-values x 100 fields");
    println!(
        "criterion 02 PASS: explicit p<2 bound holds on {checked}/300 rows (min slack {})",
        verdict(&report, "explicit_bound_slack_nonnegative").observed
    );
}

#[test]
fn criterion_03_lower_family_scaling() {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::Counterexample);
    cfg.p_list = vec![0.5];
    cfg.n_list = vec![16.0, 32.0, 64.0, 128.0, 256.0];
    let report = run(&cfg).unwrap();
    assert_all_pass(&report, "criterion 3");
    let ratios = ratio_column(&report);
    assert!(
        ratios.windows(2).all(|w| w[0] <= w[1]),
        "lower family ratio must be nondecreasing in N: {ratios:?}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 300, "runtime {elapsed:?} exceeds 5 min");
    println!(
        "criterion 03 PASS: lower family ({}; {}) in {elapsed:?}",
        verdict(&report, "lower_slope_matches_exponent").observed,
        verdict(&report, "lower_vertical_is_indicator").observed,
    );
}

fn ratio_column(report: &ExperimentReport) -> Vec<f64> {
    let col = report.columns.iter().position(|c| c == "ratio").unwrap();
    report
        .rows
        .iter()
        .filter_map(|row| match row[col] {
            sqfn_cli::report::Cell::Num(v) => Some(v),
            _ => None,
        })
        .collect()
}

#[test]
fn criterion_04_upper_family_scaling() {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::Counterexample);
    cfg.p_list = vec![2.0];
    cfg.n_list = vec![4.0, 8.0, 16.0, 32.0];
    let report = run(&cfg).unwrap();
    assert_all_pass(&report, "criterion 4");
    let ratios = ratio_column(&report);
    assert!(
        ratios.windows(2).all(|w| w[0] >= w[1]),
        "upper family ratio must be nonincreasing in N: {ratios:?}"
    );
    println!(
        "criterion 04 PASS: upper family ({}; support {})",
        verdict(&report, "upper_slope_matches_exponent").observed,
        verdict(&report, "upper_conical_vanishes_beyond_two").observed,
    );
}

#[test]
fn criterion_05_semigroup_oracles() {
    let cfg = ExperimentConfig::defaults(ExperimentKind::SemigroupSquarefn);
    let report = run(&cfg).unwrap();
    assert_all_pass(&report, "criterion 5");
    for name in [
        "heat_matches_fourier_oracle",
        "poisson_matches_sqrt_symbol",
        "heat_semigroup_law",
        "poisson_semigroup_law",
        "l2_contraction",
    ] {
        assert_eq!(verdict(&report, name).status, Status::Pass, "{name}");
    }
    println!(
        "criterion 05 PASS: heat {} (tol {HEAT}), poisson {} (tol {POISSON}), contraction {}",
        verdict(&report, "heat_matches_fourier_oracle").observed,
        verdict(&report, "poisson_matches_sqrt_symbol").observed,
        verdict(&report, "l2_contraction").observed,
        HEAT = tolerances::HEAT_ORACLE,
        POISSON = tolerances::POISSON_ORACLE,
    );
}

#[test]
fn criterion_06_p2_square_function_identity() {
    let cfg = ExperimentConfig::defaults(ExperimentKind::SemigroupSquarefn);
    let report = run(&cfg).unwrap();
    assert_eq!(
        verdict(&report, "gh_identity_half_l2").status,
        Status::Pass
    );
    for preset in ["identity", "smooth-scalar", "checkerboard"] {
        assert_eq!(
            verdict(&report, &format!("sandwich_{preset}")).status,
            Status::Pass,
            "sandwich for {preset}"
        );
    }
    println!(
        "criterion 06 PASS: ||G_h f||_2^2 = (1/2)||f||_2^2 defect {} (tol {}), sandwich within {}",
        verdict(&report, "gh_identity_half_l2").observed,
        tolerances::GH_IDENTITY,
        tolerances::SANDWICH,
    );
}

#[test]
fn criterion_07_offdiagonal_decay() {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Offdiag);
    let report = run(&cfg).unwrap();
    assert_all_pass(&report, "criterion 7");
    for preset in OperatorPreset::ALL {
        assert_eq!(
            verdict(&report, &format!("{}_slope_negative", preset.name())).status,
            Status::Pass
        );
    }
    println!(
        "criterion 07 PASS: gaussian exponent {} (within {} of -1/4), all presets decay",
        verdict(&report, "identity_gaussian_exponent").observed,
        tolerances::OFFDIAG_SLOPE_REL,
    );
}

#[test]
fn criterion_08_decomposition_ratios() {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::Caccioppoli);
    cfg.refine = true;
    let report = run(&cfg).unwrap();
    assert_all_pass(&report, "criterion 8");
    println!(
        "criterion 08 PASS: m=0 {} (ceiling {}), m=1 {} (ceiling {}), stability {}",
        verdict(&report, "identity_m0_ratio_ceiling").observed,
        tolerances::CACCIO_CEILING_M0,
        verdict(&report, "identity_m1_ratio_ceiling").observed,
        tolerances::CACCIO_CEILING_M1,
        verdict(&report, "identity_m0_refinement_stability").observed,
    );
}

#[test]
fn criterion_09_weighted_comparisons() {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Weighted);
    let report = run(&cfg).unwrap();
    assert_all_pass(&report, "criterion 9");
    for name in [
        "unit_p4_ratio_bounded",
        "unit_p1_reverse_ratio_bounded",
        "unit_ap_scale_invariance",
        "power(0.5)_p4_ratio_bounded",
        "power(0.5)_p1_reverse_ratio_bounded",
        "power(0.5)_ap_scale_invariance",
    ] {
        assert_eq!(verdict(&report, name).status, Status::Pass, "{name}");
    }
    println!(
        "criterion 09 PASS: weighted ratios bounded (p4 {} <= {}, p1 {} <= {}), A_p scale-invariant",
        verdict(&report, "power(0.5)_p4_ratio_bounded").observed,
        tolerances::WEIGHTED_P4_CEILING,
        verdict(&report, "power(0.5)_p1_reverse_ratio_bounded").observed,
        tolerances::WEIGHTED_P1_CEILING,
    );
}

#[test]
fn criterion_10_converse_pairing() {
    let cfg = ExperimentConfig::defaults(ExperimentKind::ConverseLowerbound);
    assert_eq!(cfg.fields, 20);
    let report = run(&cfg).unwrap();
    assert_all_pass(&report, "criterion 10");
    for preset in OperatorPreset::ALL {
        assert_eq!(
            verdict(&report, &format!("{}_duality_bound", preset.name())).status,
            Status::Pass,
            "duality bound for {}",
            preset.name()
        );
    }
    println!(
        "criterion 10 PASS: duality bound on 20 pairs x 4 presets (worst {})",
        verdict(&report, "identity_duality_bound").observed
    );
}

#[test]
fn criterion_11_determinism() {
    // every experiment: byte-identical across two runs and across 1 vs many
    // worker threads
    for kind in ExperimentKind::ALL {
        let mut cfg = ExperimentConfig::defaults(kind);
        // trim corpus sizes: determinism does not depend on corpus size
        cfg.fields = cfg.fields.min(6);
        if kind == ExperimentKind::Counterexample {
            cfg.p_list = vec![0.5, 2.0];
            cfg.n_list = vec![];
        }
        cfg.threads = 1;
        let single_a = run(&cfg).unwrap().emit(OutputFormat::Csv);
        let single_b = run(&cfg).unwrap().emit(OutputFormat::Csv);
        assert_eq!(single_a, single_b, "{}: rerun differs", kind.name());
        cfg.threads = 4;
        let multi = run(&cfg).unwrap().emit(OutputFormat::Json);
        cfg.threads = 1;
        let single_json = run(&cfg).unwrap().emit(OutputFormat::Json);
        assert_eq!(single_json, multi, "{}: thread count changes bytes", kind.name());
        println!("criterion 11 [{}]: byte-identical across runs and thread counts", kind.name());
    }
    println!("criterion 11 PASS: all experiments deterministic");
}

// supporting spot-checks referenced by the criteria above

#[test]
fn lower_family_norm_equals_ball_volume() {
    // ||V~ f_N||_p^p = v(B(0,1)) for the lower family, up to the recorded
    // plateau constant and the discrete ball measure
    let scan = ratio_scan(Family::Lower, 0.5, &[16.0, 32.0]).unwrap();
    for row in &scan.rows {
        let grid = lower_family_grid(row.scale).unwrap();
        let spec = FamilySpec::new(Family::Lower, row.scale, grid.clone()).unwrap();
        let f = build_family(&spec).unwrap();
        let v = sqfn_core::counterexample::vertical_l1(&f).unwrap();
        // discrete measure of B(0,1)
        let count = (0..grid.spatial_len())
            .filter(|&s| grid.axis_dist(grid.coord(s)[0], 0.0) < 1.0)
            .count();
        let ball = count as f64 * grid.h();
        let norm_p = sqfn_core::lp_norm_pth_power(&v, 0.5, None).unwrap();
        // plateau c: norm = c^{1/2} * ball
        let plateau = (norm_p / ball).powi(2);
        assert!((plateau - 1.0).abs() < 0.01, "plateau {plateau}");
    }
}

#[test]
fn caccioppoli_zero_for_constants() {
    let grid = make_grid(1, 8.0, 64, 1e-3, 10.0, 24).unwrap();
    let op = minus_laplacian(&grid).unwrap();
    let constant = sqfn_core::SpatialFunction::sample(&grid, |_| 2.0).unwrap();
    let rec = caccioppoli_check(&op, &constant, 0, &[0, 16, 32]).unwrap();
    for row in rec.rows {
        assert!(row.lhs < 1e-8);
    }
    // and a nonconstant function gives finite positive ratios
    let f = bump_function(&grid, 3, true).unwrap();
    let rec = caccioppoli_check(&op, &f, 0, &[0, 16, 32]).unwrap();
    assert!(rec.max_ratio().unwrap() > 0.0);
}
