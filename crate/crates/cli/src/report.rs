//! Experiment reports and their CSV/JSON emission.
//!
//! Emission is deterministic: the same report serializes to identical bytes,
//! floats print as shortest round-trip decimals, and the 0/0 ratio sentinel
//! is spelled out instead of NaN.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Str(String),
    /// Both norms of a ratio were zero.
    Sentinel,
}

impl Cell {
    pub fn ratio(r: Option<f64>) -> Cell {
        match r {
            Some(v) => Cell::Num(v),
            None => Cell::Sentinel,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v}"),
            Cell::Str(s) => write!(f, "{s}"),
            Cell::Sentinel => write!(f, "0/0"),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Num(v) => s.serialize_f64(*v),
            Cell::Str(v) => s.serialize_str(v),
            Cell::Sentinel => s.serialize_str("0/0"),
        }
    }
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct CellVisitor;
        impl<'de> Visitor<'de> for CellVisitor {
            type Value = Cell;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a number or string cell")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Cell, E> {
                Ok(Cell::Num(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Cell, E> {
                Ok(Cell::Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Cell, E> {
                Ok(Cell::Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Cell, E> {
                if v == "0/0" {
                    Ok(Cell::Sentinel)
                } else {
                    Ok(Cell::Str(v.to_string()))
                }
            }
        }
        d.deserialize_any(CellVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Corpus-calibrated regression rather than a theorem-backed bound.
    Info,
}

/// A named check with its observed value and the threshold it was judged
/// against (thresholds appear verbatim so reports are self-describing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub status: Status,
    pub observed: String,
    pub threshold: String,
}

impl Verdict {
    pub fn gate(name: &str, ok: bool, observed: String, threshold: String) -> Verdict {
        Verdict {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            observed,
            threshold,
        }
    }

    pub fn info(name: &str, observed: String, threshold: String) -> Verdict {
        Verdict {
            name: name.into(),
            status: Status::Info,
            observed,
            threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: String,
    /// Resolved configuration echo (sorted keys).
    pub config: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub verdicts: Vec<Verdict>,
    /// Populated only when timings were requested; excluded by default so
    /// that emission is byte-identical across runs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub timings: Vec<Timing>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, config: BTreeMap<String, String>, columns: Vec<&str>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            config,
            columns: columns.into_iter().map(String::from).collect(),
            rows: Vec::new(),
            verdicts: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn any_fail(&self) -> bool {
        self.verdicts.iter().any(|v| v.status == Status::Fail)
    }

    /// CSV: header, rows, then verdicts as `#`-prefixed comment lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        for v in &self.verdicts {
            out.push_str(&format!(
                "# verdict,{},{},observed={},threshold={}\n",
                v.name,
                match v.status {
                    Status::Pass => "pass",
                    Status::Fail => "fail",
                    Status::Info => "info",
                },
                v.observed,
                v.threshold
            ));
        }
        for t in &self.timings {
            out.push_str(&format!("# timing,{},{}\n", t.stage, t.seconds));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    pub fn emit(&self, format: OutputFormat) -> Vec<u8> {
        match format {
            OutputFormat::Csv => self.to_csv().into_bytes(),
            OutputFormat::Json => self.to_json().into_bytes(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(OutputFormat::Csv),
            "json" => Some(OutputFormat::Json),
            _ => None,
        }
    }
}
