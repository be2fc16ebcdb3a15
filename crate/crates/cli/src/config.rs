//! Experiment configuration: per-experiment defaults, a flat key=value
//! config file, and flag overrides (flags win).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sqfn_core::elliptic::OperatorPreset;
use sqfn_core::grid::{make_grid, Grid};
use sqfn_core::weights::Weight;

use crate::report::OutputFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Identity,
    Compare,
    Counterexample,
    Weighted,
    SemigroupSquarefn,
    Offdiag,
    Caccioppoli,
    ConverseLowerbound,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Identity,
        ExperimentKind::Compare,
        ExperimentKind::Counterexample,
        ExperimentKind::Weighted,
        ExperimentKind::SemigroupSquarefn,
        ExperimentKind::Offdiag,
        ExperimentKind::Caccioppoli,
        ExperimentKind::ConverseLowerbound,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Identity => "identity",
            ExperimentKind::Compare => "compare",
            ExperimentKind::Counterexample => "counterexample",
            ExperimentKind::Weighted => "weighted",
            ExperimentKind::SemigroupSquarefn => "semigroup-squarefn",
            ExperimentKind::Offdiag => "offdiag",
            ExperimentKind::Caccioppoli => "caccioppoli",
            ExperimentKind::ConverseLowerbound => "converse-lowerbound",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    pub fn describe(&self) -> &'static str {
        match self {
            ExperimentKind::Identity => {
                "L2 averaging identity ||SF||_2^2 = b_n ||VF||_2^2 over a seeded bump corpus; \
                 optional grid-doubling convergence check (refine=true)"
            }
            ExperimentKind::Compare => {
                "conical/vertical norm comparison across a p-list: p=2 identity ratio, \
                 explicit-constant bound for p<2, empirical ratio regression for p>2"
            }
            ExperimentKind::Counterexample => {
                "scaling scans of the two explicit families: ratios ||S~f_N||_p^p/||V~f_N||_p^p \
                 and fitted log-log slopes against the expected exponents"
            }
            ExperimentKind::Weighted => {
                "weighted comparisons ||SF||_{L^p(w)} vs ||VF||_{L^p(w)} for the named weight \
                 presets, with A_p/RH_q characteristics and scale-invariance check"
            }
            ExperimentKind::SemigroupSquarefn => {
                "heat/Poisson semigroup oracles, contraction and semigroup laws, the p=2 \
                 square-function identity ||G_h f||_2^2 = 1/2 ||f||_2^2 and the ellipticity \
                 sandwich, plus an exploratory G_h Lp ratio scan"
            }
            ExperimentKind::Offdiag => {
                "L2 off-diagonal decay of e^{-tL} between separated intervals: fitted exponent \
                 of log amplitude vs d^2/t per operator preset"
            }
            ExperimentKind::Caccioppoli => {
                "three-term decomposition check: conical Poisson square function against the \
                 heat-side terms at aperture 2, ratio ceilings frozen per m"
            }
            ExperimentKind::ConverseLowerbound => {
                "duality bound |int f g~| <= (||A||_inf + 1) ||G_{h,L}f||_p ||G_{h,-Delta}g||_p' \
                 on seeded pairs at p = 2 for every operator preset"
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub n: usize,
    pub l: f64,
    pub nx: usize,
    pub tmin: f64,
    pub tmax: f64,
    pub nt: usize,
}

impl GridParams {
    pub fn build(&self) -> Result<Grid, ConfigError> {
        make_grid(self.n, self.l, self.nx, self.tmin, self.tmax, self.nt)
            .map_err(|e| ConfigError(format!("grid: {e}")))
    }
}

/// Weight presets by name: `unit`, `power(a)`, `plateau(c)`.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightPreset {
    Unit,
    Power(f64),
    Plateau(f64),
}

impl WeightPreset {
    pub fn parse(s: &str) -> Option<Self> {
        if s == "unit" {
            return Some(WeightPreset::Unit);
        }
        for (name, ctor) in [
            ("power", WeightPreset::Power as fn(f64) -> WeightPreset),
            ("plateau", WeightPreset::Plateau as fn(f64) -> WeightPreset),
        ] {
            for (open, close) in [("(", ")"), (":", "")] {
                let prefix = format!("{name}{open}");
                if let Some(rest) = s.strip_prefix(&prefix) {
                    let arg = rest.strip_suffix(close).unwrap_or(rest);
                    if let Ok(v) = arg.parse::<f64>() {
                        return Some(ctor(v));
                    }
                }
            }
        }
        None
    }

    pub fn name(&self) -> String {
        match self {
            WeightPreset::Unit => "unit".into(),
            WeightPreset::Power(a) => format!("power({a})"),
            WeightPreset::Plateau(c) => format!("plateau({c})"),
        }
    }

    pub fn build(&self, grid: &Grid) -> Result<Weight, ConfigError> {
        match self {
            WeightPreset::Unit => Weight::unit(grid),
            WeightPreset::Power(a) => Weight::power(grid, *a),
            WeightPreset::Plateau(c) => Weight::plateau(grid, *c),
        }
        .map_err(|e| ConfigError(format!("weight preset: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub grid: GridParams,
    pub seed: u64,
    pub p_list: Vec<f64>,
    pub n_list: Vec<f64>,
    /// `None` runs every preset the experiment supports.
    pub operator: Option<OperatorPreset>,
    pub weight: WeightPreset,
    pub fields: usize,
    pub refine: bool,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub threads: usize,
    pub timings: bool,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    /// Per-experiment defaults; grids were calibrated once against the
    /// corpus and stay frozen.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let grid = match kind {
            ExperimentKind::Identity | ExperimentKind::Compare | ExperimentKind::Weighted => {
                GridParams {
                    n: 1,
                    l: 16.0,
                    nx: 256,
                    tmin: 0.05,
                    tmax: 6.0,
                    nt: 64,
                }
            }
            // t_max chosen so e^{-2 t_max mu_1} truncation sits far below the
            // 1% identity tolerance while keeping the stepping path affordable
            ExperimentKind::SemigroupSquarefn | ExperimentKind::ConverseLowerbound => GridParams {
                n: 1,
                l: 8.0,
                nx: 256,
                tmin: 1e-5,
                tmax: 12.0,
                nt: 128,
            },
            ExperimentKind::Offdiag => GridParams {
                n: 1,
                l: 16.0,
                nx: 256,
                tmin: 0.05,
                tmax: 4.0,
                nt: 16,
            },
            ExperimentKind::Caccioppoli => GridParams {
                n: 1,
                l: 8.0,
                nx: 128,
                tmin: 1e-3,
                tmax: 20.0,
                nt: 64,
            },
            // per-N grids are built inside the scan; these are placeholders
            ExperimentKind::Counterexample => GridParams {
                n: 1,
                l: 8.0,
                nx: 4096,
                tmin: 1e-3,
                tmax: 2.0,
                nt: 96,
            },
        };
        let p_list = match kind {
            ExperimentKind::Compare => vec![0.5, 1.0, 1.5, 2.0, 4.0],
            ExperimentKind::Weighted => vec![4.0, 1.0],
            ExperimentKind::Counterexample => vec![],
            _ => vec![2.0],
        };
        let fields = match kind {
            ExperimentKind::Compare => 100,
            ExperimentKind::Identity | ExperimentKind::Weighted => 50,
            ExperimentKind::ConverseLowerbound => 20,
            ExperimentKind::Caccioppoli | ExperimentKind::SemigroupSquarefn => 10,
            _ => 0,
        };
        Self {
            experiment: kind,
            grid,
            seed: 0,
            p_list,
            n_list: vec![],
            operator: None,
            weight: WeightPreset::Power(0.5),
            fields,
            refine: false,
            out: None,
            format: OutputFormat::Csv,
            threads: 0,
            timings: false,
        }
    }

    /// Applies `key = value` pairs (config file first, then flags).
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |what: &str| ConfigError(format!("invalid {what}: {value}"));
        match key {
            "experiment" => {
                self.experiment = ExperimentKind::parse(value).ok_or_else(|| bad("experiment"))?
            }
            "n" => self.grid.n = value.parse().map_err(|_| bad("n"))?,
            "l" => self.grid.l = value.parse().map_err(|_| bad("l"))?,
            "nx" => self.grid.nx = value.parse().map_err(|_| bad("nx"))?,
            "tmin" => self.grid.tmin = value.parse().map_err(|_| bad("tmin"))?,
            "tmax" => self.grid.tmax = value.parse().map_err(|_| bad("tmax"))?,
            "nt" => self.grid.nt = value.parse().map_err(|_| bad("nt"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "p" => self.p_list = parse_list(value).ok_or_else(|| bad("p list"))?,
            "N" => self.n_list = parse_list(value).ok_or_else(|| bad("N list"))?,
            "operator" => {
                self.operator = Some(OperatorPreset::parse(value).ok_or_else(|| bad("operator"))?)
            }
            "weight" => self.weight = WeightPreset::parse(value).ok_or_else(|| bad("weight"))?,
            "fields" => self.fields = value.parse().map_err(|_| bad("fields"))?,
            "refine" => self.refine = value.parse().map_err(|_| bad("refine"))?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = OutputFormat::parse(value).ok_or_else(|| bad("format"))?,
            "threads" => self.threads = value.parse().map_err(|_| bad("threads"))?,
            "timings" => self.timings = value.parse().map_err(|_| bad("timings"))?,
            _ => return Err(ConfigError(format!("unknown config key: {key}"))),
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value", lineno + 1)))?;
            self.apply(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// `--grid nx=..,nt=..,l=..,tmin=..,tmax=..[,n=..]`
    pub fn apply_grid_flag(&mut self, spec: &str) -> Result<(), ConfigError> {
        for part in spec.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("grid flag: expected key=value, got {part}")))?;
            match k.trim() {
                "n" | "l" | "nx" | "tmin" | "tmax" | "nt" => self.apply(k.trim(), v.trim())?,
                other => return Err(ConfigError(format!("grid flag: unknown key {other}"))),
            }
        }
        Ok(())
    }

    /// Resolved configuration echo for the report.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("experiment".into(), self.experiment.name().into());
        m.insert("n".into(), self.grid.n.to_string());
        m.insert("l".into(), self.grid.l.to_string());
        m.insert("nx".into(), self.grid.nx.to_string());
        m.insert("tmin".into(), self.grid.tmin.to_string());
        m.insert("tmax".into(), self.grid.tmax.to_string());
        m.insert("nt".into(), self.grid.nt.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert(
            "p".into(),
            self.p_list
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        m.insert(
            "N".into(),
            self.n_list
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        m.insert(
            "operator".into(),
            self.operator.map_or("all".into(), |o| o.name().to_string()),
        );
        m.insert("weight".into(), self.weight.name());
        m.insert("fields".into(), self.fields.to_string());
        m.insert("refine".into(), self.refine.to_string());
        m
    }
}

fn parse_list(s: &str) -> Option<Vec<f64>> {
    let vals: Result<Vec<f64>, _> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect();
    vals.ok().filter(|v| !v.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_preset_parsing() {
        assert_eq!(WeightPreset::parse("unit"), Some(WeightPreset::Unit));
        assert_eq!(
            WeightPreset::parse("power(0.5)"),
            Some(WeightPreset::Power(0.5))
        );
        assert_eq!(
            WeightPreset::parse("power:0.5"),
            Some(WeightPreset::Power(0.5))
        );
        assert_eq!(
            WeightPreset::parse("plateau(2)"),
            Some(WeightPreset::Plateau(2.0))
        );
        assert_eq!(WeightPreset::parse("nope"), None);
    }

    #[test]
    fn grid_flag_overrides() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::Identity);
        c.apply_grid_flag("nx=512,nt=128,l=8.0,tmin=0.01,tmax=2.0").unwrap();
        assert_eq!(c.grid.nx, 512);
        assert_eq!(c.grid.nt, 128);
        assert_eq!(c.grid.l, 8.0);
        assert!(c.apply_grid_flag("bogus=1").is_err());
        assert!(c.apply_grid_flag("nx:512").is_err());
    }

    #[test]
    fn unknown_key_rejected() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::Identity);
        assert!(c.apply("banana", "1").is_err());
        assert!(c.apply("seed", "x").is_err());
        c.apply("p", "0.5, 1, 1.5").unwrap();
        assert_eq!(c.p_list, vec![0.5, 1.0, 1.5]);
    }

    #[test]
    fn experiment_names_roundtrip() {
        for kind in ExperimentKind::ALL {
            assert_eq!(ExperimentKind::parse(kind.name()), Some(kind));
        }
        assert_eq!(ExperimentKind::parse("nonsense"), None);
    }
}
