//! On-disk formats of the pipeline stages.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CircuitRecord};
use crate::error::{Error, Result};
use crate::expressibility::{ExpConfig, ExpressibilityLabels, Measure};
use crate::graph::{CircuitGraph, FEATURE_DIM, LAYOUT_VERSION};
use crate::metrics::EvalReport;
use crate::nanoformer::{ModelConfig, ModelParams, Regressor, TrainConfig, TrainHistory};
use crate::sim::NoiseConfig;

pub const TOOL_VERSION: &str = concat!("pqc-express ", env!("CARGO_PKG_VERSION"));

/// Write through a sibling temp file so readers never see a torn file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>, what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::Schema(format!("duplicate id {id:?} in {what}")));
        }
    }
    Ok(())
}

// circuits ------------------------------------------------------------------

pub fn write_circuits(path: &Path, circuits: &[(String, Circuit)]) -> Result<()> {
    let mut buf = Vec::new();
    for (id, c) in circuits {
        serde_json::to_writer(&mut buf, &c.to_record(id))?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

pub fn read_circuits(path: &Path) -> Result<Vec<(String, Circuit)>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CircuitRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Schema(format!("{} line {}: {e}", path.display(), lineno + 1)))?;
        let c = rec.to_circuit()?;
        out.push((rec.id, c));
    }
    check_unique(out.iter().map(|(id, _)| id.as_str()), &path.display().to_string())?;
    Ok(out)
}

// labels --------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct LabelRow {
    pub id: String,
    pub n_qubits: usize,
    pub n_gates: usize,
    pub depth: usize,
    pub n_u3: usize,
    pub labels: ExpressibilityLabels,
}

/// Settings that determine label values; recorded in the file header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelHeader {
    pub exp: ExpConfig,
    pub noise: NoiseConfig,
    pub measures: Vec<Measure>,
}

const LABEL_COLUMNS: [&str; 9] = ["id", "n_qubits", "n_gates", "depth", "n_u3", "exp1", "exp1r", "exp2", "exp2_noisy"];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_labels(path: &Path, header: &LabelHeader, rows: &[LabelRow]) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "# {TOOL_VERSION} labels")?;
    writeln!(buf, "# config: {}", serde_json::to_string(header)?)?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(LABEL_COLUMNS)?;
        for r in rows {
            w.write_record([
                r.id.clone(),
                r.n_qubits.to_string(),
                r.n_gates.to_string(),
                r.depth.to_string(),
                r.n_u3.to_string(),
                fmt_opt(r.labels.exp1),
                fmt_opt(r.labels.exp1r),
                fmt_opt(r.labels.exp2),
                fmt_opt(r.labels.exp2_noisy),
            ])?;
        }
        w.flush()?;
    }
    write_atomic(path, &buf)
}

pub struct LabelFile {
    /// `None` when the file carries no recognizable config header.
    pub header: Option<LabelHeader>,
    /// Label columns present in the file.
    pub columns: Vec<Measure>,
    pub rows: Vec<LabelRow>,
}

pub fn read_labels(path: &Path) -> Result<LabelFile> {
    let text = fs::read_to_string(path)?;
    let mut header = None;
    let mut body_start = 0;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(json) = rest.trim().strip_prefix("config:") {
                header = Some(serde_json::from_str(json.trim()).map_err(|e| {
                    Error::Schema(format!("{}: unreadable config header: {e}", path.display()))
                })?);
            }
            body_start += line.len() + 1;
        } else {
            break;
        }
    }
    let mut rdr = csv::ReaderBuilder::new().from_reader(text[body_start.min(text.len())..].as_bytes());
    let names: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let col = |name: &str| names.iter().position(|n| n == name);
    let id_col = col("id").ok_or_else(|| Error::Schema(format!("{}: missing column \"id\"", path.display())))?;
    let columns: Vec<Measure> = Measure::ALL.into_iter().filter(|m| col(m.column()).is_some()).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let at = |name: &str| col(name).and_then(|c| rec.get(c)).map(str::trim).unwrap_or("");
        let int = |name: &str| -> Result<usize> {
            let s = at(name);
            if s.is_empty() {
                return Ok(0);
            }
            s.parse().map_err(|_| Error::Schema(format!("{} row {}: bad {name} {s:?}", path.display(), i + 1)))
        };
        let real = |m: Measure| -> Result<Option<f64>> {
            let s = at(m.column());
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| {
                Error::Schema(format!("{} row {}: bad {} value {s:?}", path.display(), i + 1, m.column()))
            })
        };
        rows.push(LabelRow {
            id: rec.get(id_col).unwrap_or("").trim().to_string(),
            n_qubits: int("n_qubits")?,
            n_gates: int("n_gates")?,
            depth: int("depth")?,
            n_u3: int("n_u3")?,
            labels: ExpressibilityLabels {
                exp1: real(Measure::Exp1)?,
                exp1r: real(Measure::Exp1r)?,
                exp2: real(Measure::Exp2)?,
                exp2_noisy: real(Measure::Exp2Noisy)?,
            },
        });
    }
    check_unique(rows.iter().map(|r| r.id.as_str()), &path.display().to_string())?;
    Ok(LabelFile { header, columns, rows })
}

// graphs --------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFileHeader {
    pub layout: String,
    pub feature_dim: usize,
    pub n_records: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub id: String,
    #[serde(flatten)]
    pub graph: CircuitGraph,
}

pub fn write_graphs(path: &Path, records: &[GraphRecord]) -> Result<()> {
    let mut buf = Vec::new();
    let header = GraphFileHeader {
        layout: LAYOUT_VERSION.to_string(),
        feature_dim: FEATURE_DIM,
        n_records: records.len(),
    };
    serde_json::to_writer(&mut buf, &header)?;
    buf.push(b'\n');
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

/// Returns the layout tag with the records; callers decide whether it fits.
pub fn read_graphs(path: &Path) -> Result<(String, Vec<GraphRecord>)> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let first = lines.next().ok_or_else(|| Error::Schema(format!("{}: empty graph file", path.display())))??;
    let header: GraphFileHeader = serde_json::from_str(&first)
        .map_err(|e| Error::Schema(format!("{}: bad graph header: {e}", path.display())))?;
    let mut records = Vec::with_capacity(header.n_records);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: GraphRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Schema(format!("{} line {}: {e}", path.display(), i + 2)))?;
        if r.graph.features.iter().any(|f| f.len() != header.feature_dim) {
            return Err(Error::Schema(format!("{}: record {} has the wrong feature width", path.display(), r.id)));
        }
        records.push(r);
    }
    if records.len() != header.n_records {
        return Err(Error::Schema(format!(
            "{}: header announces {} records, found {}",
            path.display(),
            header.n_records,
            records.len()
        )));
    }
    check_unique(records.iter().map(|r| r.id.as_str()), &path.display().to_string())?;
    Ok((header.layout, records))
}

// checkpoints ---------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub tool: String,
    pub layout: String,
    pub structure: String,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub target_shift: f64,
    pub target_scale: f64,
    pub final_train_loss: Option<f64>,
    pub final_test_loss: Option<f64>,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub params: Vec<NamedArray>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl Checkpoint {
    pub fn new(model: &Regressor, train: &TrainConfig, history: &TrainHistory, train_ids: &[String], test_ids: &[String]) -> Self {
        let last = history.epochs.last();
        Self {
            tool: TOOL_VERSION.to_string(),
            layout: model.layout.clone(),
            structure: model.config.structure(),
            model: model.config.clone(),
            train: train.clone(),
            target_shift: model.target_shift,
            target_scale: model.target_scale,
            final_train_loss: last.and_then(|e| finite(e.train_loss)),
            final_test_loss: last.and_then(|e| finite(e.test_loss)),
            train_ids: train_ids.to_vec(),
            test_ids: test_ids.to_vec(),
            params: model
                .params
                .tensors()
                .into_iter()
                .map(|(name, v)| NamedArray { name, values: v.clone() })
                .collect(),
        }
    }

    pub fn regressor(&self) -> Result<Regressor> {
        self.model.validate()?;
        let mut params = ModelParams::zeros(&self.model);
        let expected: Vec<(String, usize)> = params.tensors().into_iter().map(|(n, t)| (n, t.len())).collect();
        if expected.len() != self.params.len() {
            return Err(Error::Schema(format!(
                "checkpoint has {} arrays, model expects {}",
                self.params.len(),
                expected.len()
            )));
        }
        for ((name, len), arr) in expected.iter().zip(&self.params) {
            if *name != arr.name || *len != arr.values.len() {
                return Err(Error::Schema(format!(
                    "checkpoint array {:?} ({} values) does not match expected {name:?} ({len})",
                    arr.name,
                    arr.values.len()
                )));
            }
        }
        let flat: Vec<f64> = self.params.iter().flat_map(|a| a.values.iter().copied()).collect();
        params.assign_flat(&flat)?;
        Ok(Regressor {
            config: self.model.clone(),
            params,
            target_shift: self.target_shift,
            target_scale: self.target_scale,
            layout: self.layout.clone(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = serde_json::to_vec_pretty(self)?;
        buf.push(b'\n');
        write_atomic(path, &buf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
    }
}

// tables --------------------------------------------------------------------

fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

pub fn write_history(path: &Path, h: &TrainHistory) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "# initial_train_loss: {}", h.initial_train_loss)?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["epoch", "lr", "train_loss", "test_loss"])?;
        for e in &h.epochs {
            w.write_record([e.epoch.to_string(), e.lr.to_string(), fmt_f(e.train_loss), fmt_f(e.test_loss)])?;
        }
        w.flush()?;
    }
    write_atomic(path, &buf)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub target: String,
    pub split: String,
    pub slice: String,
    pub report: EvalReport,
}

pub fn write_report(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "target", "split", "slice", "n", "rmse", "r2", "spearman", "kendall"])?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            r.target.clone(),
            r.split.clone(),
            r.slice.clone(),
            r.report.n.to_string(),
            fmt_f(r.report.rmse),
            fmt_f(r.report.r2),
            fmt_f(r.report.spearman),
            fmt_f(r.report.kendall),
        ])?;
    }
    let buf = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &buf)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScatterRow {
    pub id: String,
    pub n_qubits: usize,
    pub split: String,
    pub truth: f64,
    pub prediction: f64,
}

pub fn write_scatter(path: &Path, rows: &[ScatterRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "n_qubits", "split", "truth", "prediction"])?;
    for r in rows {
        w.write_record([r.id.clone(), r.n_qubits.to_string(), r.split.clone(), r.truth.to_string(), r.prediction.to_string()])?;
    }
    let buf = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &buf)
}

pub fn write_predictions(path: &Path, rows: &[(String, usize, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "n_qubits", "prediction"])?;
    for (id, n, y) in rows {
        w.write_record([id.clone(), n.to_string(), y.to_string()])?;
    }
    let buf = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &buf)
}

/// Parse a predictions or scatter table into `(id, prediction)` pairs.
pub fn read_prediction_column(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let names: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let find = |n: &str| {
        names
            .iter()
            .position(|x| x == n)
            .ok_or_else(|| Error::Schema(format!("{}: missing column {n:?}", path.display())))
    };
    let (id, pred) = (find("id")?, find("prediction")?);
    rdr.records()
        .map(|r| {
            let r = r?;
            let y = r[pred]
                .parse::<f64>()
                .map_err(|_| Error::Schema(format!("{}: bad prediction {:?}", path.display(), &r[pred])))?;
            Ok((r[id].to_string(), y))
        })
        .collect()
}
