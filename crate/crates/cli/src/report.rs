//! Machine-readable run reports and their long-format CSV form.
//!
//! CSV columns: `scenario,table,key,inputs,field,value`. One row per
//! number; `table` is one of `meta`, `ops`, `times`, `bytes`, `metrics`;
//! `key` is the phase, edge or metric name. `meta` rows leave `key` and
//! `inputs` empty.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use hhe_core::bfv::OpCounts;
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

pub const FORMAT: &str = "hhe-bench-report/1";
pub const SUFFIX: &str = ".report.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchReport {
    pub format: String,
    pub scenario: String,
    pub profile: String,
    pub cipher: String,
    pub seed: u64,
    pub inputs: Vec<u64>,
    pub ops: Vec<OpRow>,
    /// Informational only.
    pub times: Vec<TimeRow>,
    pub bytes: Vec<ByteRow>,
    pub metrics: Vec<Metric>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpRow {
    pub phase: String,
    pub inputs: u64,
    pub rotations: u64,
    pub ct_ct_muls: u64,
    pub ct_pt_muls: u64,
    pub additions: u64,
    pub key_switches: u64,
    pub mod_switches: u64,
}

impl OpRow {
    pub fn new(phase: &str, inputs: usize, c: OpCounts) -> Self {
        Self {
            phase: phase.into(),
            inputs: inputs as u64,
            rotations: c.rotations,
            ct_ct_muls: c.ct_ct_muls,
            ct_pt_muls: c.ct_pt_muls,
            additions: c.additions,
            key_switches: c.key_switches,
            mod_switches: c.mod_switches,
        }
    }

    pub fn counts(&self) -> OpCounts {
        OpCounts {
            rotations: self.rotations,
            ct_ct_muls: self.ct_ct_muls,
            ct_pt_muls: self.ct_pt_muls,
            additions: self.additions,
            key_switches: self.key_switches,
            mod_switches: self.mod_switches,
        }
    }

    const FIELDS: [&'static str; 6] = [
        "rotations",
        "ct_ct_muls",
        "ct_pt_muls",
        "additions",
        "key_switches",
        "mod_switches",
    ];

    fn values(&self) -> [u64; 6] {
        [
            self.rotations,
            self.ct_ct_muls,
            self.ct_pt_muls,
            self.additions,
            self.key_switches,
            self.mod_switches,
        ]
    }

    fn set(&mut self, field: &str, v: u64) -> Option<()> {
        *match field {
            "rotations" => &mut self.rotations,
            "ct_ct_muls" => &mut self.ct_ct_muls,
            "ct_pt_muls" => &mut self.ct_pt_muls,
            "additions" => &mut self.additions,
            "key_switches" => &mut self.key_switches,
            "mod_switches" => &mut self.mod_switches,
            _ => return None,
        } = v;
        Some(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeRow {
    pub phase: String,
    pub inputs: u64,
    pub runs: u64,
    pub mean_s: f64,
    pub min_s: f64,
    pub max_s: f64,
}

impl TimeRow {
    pub fn from_samples(phase: &str, inputs: usize, secs: &[f64]) -> Self {
        let n = secs.len().max(1) as f64;
        Self {
            phase: phase.into(),
            inputs: inputs as u64,
            runs: secs.len() as u64,
            mean_s: secs.iter().sum::<f64>() / n,
            min_s: secs.iter().copied().fold(f64::INFINITY, f64::min).min(f64::MAX),
            max_s: secs.iter().copied().fold(0.0, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ByteRow {
    pub edge: String,
    pub inputs: u64,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metric {
    pub name: String,
    pub inputs: u64,
    pub value: f64,
}

impl BenchReport {
    pub fn new(scenario: &str, profile: &str, cipher: &str, seed: u64, inputs: &[usize]) -> Self {
        Self {
            format: FORMAT.into(),
            scenario: scenario.into(),
            profile: profile.into(),
            cipher: cipher.into(),
            seed,
            inputs: inputs.iter().map(|&n| n as u64).collect(),
            ops: Vec::new(),
            times: Vec::new(),
            bytes: Vec::new(),
            metrics: Vec::new(),
        }
    }

    pub fn metric(&mut self, name: &str, inputs: usize, value: f64) {
        self.metrics.push(Metric {
            name: name.into(),
            inputs: inputs as u64,
            value,
        });
    }

    pub fn metric_value(&self, name: &str, inputs: usize) -> Option<f64> {
        self.metrics
            .iter()
            .find(|m| m.name == name && m.inputs == inputs as u64)
            .map(|m| m.value)
    }

    pub fn ops_of(&self, phase: &str, inputs: usize) -> Option<&OpRow> {
        self.ops.iter().find(|r| r.phase == phase && r.inputs == inputs as u64)
    }

    /// File stem for the report in a run directory.
    pub fn file_name(&self) -> String {
        format!("{}{SUFFIX}", self.scenario.replace('/', "-"))
    }

    pub fn save(&self, dir: &Path) -> Result<std::path::PathBuf> {
        let path = dir.join(self.file_name());
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(&path, text).map_err(|e| CliError::file(&path, e))?;
        Ok(path)
    }
}

/// Every `*.report.json` in `dir`, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<BenchReport>> {
    if !dir.is_dir() {
        return Err(CliError::invalid(format!("no artifacts: {} is not a directory", dir.display())));
    }
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| CliError::file(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(SUFFIX)))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::invalid(format!(
            "no artifacts in {}: expected *{SUFFIX} files from a previous run",
            dir.display()
        )));
    }
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| CliError::file(p, e))?;
            let r: BenchReport =
                serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", p.display())))?;
            if r.format != FORMAT {
                return Err(CliError::invalid(format!("{}: unknown format {:?}", p.display(), r.format)));
            }
            Ok(r)
        })
        .collect()
}

pub fn to_json(reports: &[BenchReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)? + "\n")
}

pub fn from_json(text: &str) -> Result<Vec<BenchReport>> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    scenario: String,
    table: String,
    key: String,
    inputs: Option<u64>,
    field: String,
    value: String,
}

pub fn write_csv<W: Write>(out: W, reports: &[BenchReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        let row = |table: &str, key: &str, inputs: Option<u64>, field: &str, value: String| CsvRow {
            scenario: r.scenario.clone(),
            table: table.into(),
            key: key.into(),
            inputs,
            field: field.into(),
            value,
        };
        let list = r.inputs.iter().map(u64::to_string).collect::<Vec<_>>().join(";");
        for (f, v) in [
            ("format", r.format.clone()),
            ("profile", r.profile.clone()),
            ("cipher", r.cipher.clone()),
            ("seed", r.seed.to_string()),
            ("inputs", list),
        ] {
            w.serialize(row("meta", "", None, f, v))?;
        }
        for o in &r.ops {
            for (f, v) in OpRow::FIELDS.iter().zip(o.values()) {
                w.serialize(row("ops", &o.phase, Some(o.inputs), f, v.to_string()))?;
            }
        }
        for t in &r.times {
            for (f, v) in [
                ("runs", t.runs.to_string()),
                ("mean_s", t.mean_s.to_string()),
                ("min_s", t.min_s.to_string()),
                ("max_s", t.max_s.to_string()),
            ] {
                w.serialize(row("times", &t.phase, Some(t.inputs), f, v))?;
            }
        }
        for b in &r.bytes {
            w.serialize(row("bytes", &b.edge, Some(b.inputs), "bytes", b.bytes.to_string()))?;
        }
        for m in &r.metrics {
            w.serialize(row("metrics", &m.name, Some(m.inputs), "value", m.value.to_string()))?;
        }
    }
    w.flush().map_err(|e| CliError::invalid(format!("csv: {e}")))?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<BenchReport>> {
    let mut out: Vec<BenchReport> = Vec::new();
    for (i, row) in csv::Reader::from_reader(input).deserialize::<CsvRow>().enumerate() {
        let line = i + 2;
        let row = row?;
        let bad = |what: &str| CliError::invalid(format!("report csv line {line}: {what}"));
        let int = |s: &str| s.parse::<u64>().map_err(|_| bad(&format!("{s:?} is not an integer")));
        let float = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("{s:?} is not a number")));
        if out.last().is_none_or(|r| r.scenario != row.scenario) {
            if row.table != "meta" {
                return Err(bad("scenario does not start with its meta rows"));
            }
            out.push(BenchReport::new(&row.scenario, "", "", 0, &[]));
            out.last_mut().expect("pushed").format.clear();
        }
        let r = out.last_mut().expect("non-empty");
        let n = || row.inputs.ok_or_else(|| bad("missing inputs"));
        match row.table.as_str() {
            "meta" => match row.field.as_str() {
                "format" => r.format = row.value,
                "profile" => r.profile = row.value,
                "cipher" => r.cipher = row.value,
                "seed" => r.seed = int(&row.value)?,
                "inputs" => {
                    r.inputs = row
                        .value
                        .split(';')
                        .filter(|s| !s.is_empty())
                        .map(int)
                        .collect::<Result<_>>()?
                }
                f => return Err(bad(&format!("unknown meta field {f:?}"))),
            },
            "ops" => {
                let inputs = n()?;
                let idx = match r.ops.iter().position(|o| o.phase == row.key && o.inputs == inputs) {
                    Some(i) => i,
                    None => {
                        r.ops.push(OpRow {
                            phase: row.key.clone(),
                            inputs,
                            ..OpRow::default()
                        });
                        r.ops.len() - 1
                    }
                };
                r.ops[idx]
                    .set(&row.field, int(&row.value)?)
                    .ok_or_else(|| bad(&format!("unknown ops field {:?}", row.field)))?;
            }
            "times" => {
                let inputs = n()?;
                let idx = match r.times.iter().position(|t| t.phase == row.key && t.inputs == inputs) {
                    Some(i) => i,
                    None => {
                        r.times.push(TimeRow {
                            phase: row.key.clone(),
                            inputs,
                            ..TimeRow::default()
                        });
                        r.times.len() - 1
                    }
                };
                let t = &mut r.times[idx];
                match row.field.as_str() {
                    "runs" => t.runs = int(&row.value)?,
                    "mean_s" => t.mean_s = float(&row.value)?,
                    "min_s" => t.min_s = float(&row.value)?,
                    "max_s" => t.max_s = float(&row.value)?,
                    f => return Err(bad(&format!("unknown times field {f:?}"))),
                }
            }
            "bytes" => r.bytes.push(ByteRow {
                edge: row.key,
                inputs: n()?,
                bytes: int(&row.value)?,
            }),
            "metrics" => r.metrics.push(Metric {
                name: row.key,
                inputs: n()?,
                value: float(&row.value)?,
            }),
            t => return Err(bad(&format!("unknown table {t:?}"))),
        }
    }
    if out.is_empty() {
        return Err(CliError::invalid("report csv holds no rows"));
    }
    Ok(out)
}
