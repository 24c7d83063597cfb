use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::RunConfig;
use super::io::{
    read_circuits, read_graphs, read_labels, write_circuits, write_graphs, write_history, write_labels,
    write_predictions, write_report, write_scatter, Checkpoint, GraphRecord, LabelHeader, LabelRow, ReportRow,
    ScatterRow,
};
use crate::circuit::generate_dataset_circuits;
use crate::error::{Error, Result};
use crate::expressibility::{compute_labels, Measure};
use crate::graph::{encode_graph, CircuitGraph, LAYOUT_VERSION};
use crate::metrics::evaluate;
use crate::nanoformer::{train, TrainSample};
use crate::seed::derive_seed;

/// Default artifact locations inside the output directory.
pub fn default_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

pub fn cmd_generate(cfg: &RunConfig, output: &Path) -> Result<usize> {
    let circuits = generate_dataset_circuits(&cfg.dataset_spec()?, cfg.seed)?;
    write_circuits(output, &circuits)?;
    Ok(circuits.len())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabelSummary {
    pub reused: usize,
    pub computed: usize,
    pub remaining: usize,
}

/// Label every circuit, reusing rows already present in `output`.
///
/// Each circuit draws from `derive_seed(seed, id)`, so a resumed file is
/// identical to one written in a single pass. `limit` caps how many new
/// rows are computed in this call.
pub fn cmd_label(cfg: &RunConfig, circuits: &Path, output: &Path, limit: Option<usize>) -> Result<LabelSummary> {
    let exp = cfg.exp_config()?;
    let noise = cfg.noise_config()?;
    let measures = cfg.measures()?;
    let header = LabelHeader { exp: exp.clone(), noise, measures: measures.clone() };
    let records = read_circuits(circuits)?;

    let mut existing: HashMap<String, LabelRow> = HashMap::new();
    if output.exists() {
        let file = read_labels(output)?;
        if file.header.as_ref() != Some(&header) {
            return Err(Error::Schema(format!(
                "{} was written with different label settings; remove it or restore the settings",
                output.display()
            )));
        }
        existing = file.rows.into_iter().map(|r| (r.id.clone(), r)).collect();
    }

    let mut todo: Vec<usize> = (0..records.len()).filter(|&i| !existing.contains_key(&records[i].0)).collect();
    let remaining_before = todo.len();
    if let Some(k) = limit {
        todo.truncate(k);
    }
    let fresh: Vec<LabelRow> = todo
        .par_iter()
        .map(|&i| {
            let (id, c) = &records[i];
            let labels = compute_labels(c, &exp, &noise, &measures, derive_seed(cfg.seed, id))?;
            let s = c.stats();
            Ok(LabelRow { id: id.clone(), n_qubits: c.n_qubits(), n_gates: s.n_gates, depth: s.depth, n_u3: s.n_u3, labels })
        })
        .collect::<Result<_>>()?;
    let computed = fresh.len();
    for r in fresh {
        existing.insert(r.id.clone(), r);
    }
    let reused = records.len() - remaining_before;
    let rows: Vec<LabelRow> = records.iter().filter_map(|(id, _)| existing.remove(id)).collect();
    write_labels(output, &header, &rows)?;
    Ok(LabelSummary { reused, computed, remaining: remaining_before - computed })
}

pub fn cmd_encode(circuits: &Path, output: &Path) -> Result<usize> {
    let records = read_circuits(circuits)?;
    let graphs = records
        .par_iter()
        .map(|(id, c)| Ok(GraphRecord { id: id.clone(), graph: encode_graph(c)? }))
        .collect::<Result<Vec<_>>>()?;
    write_graphs(output, &graphs)?;
    Ok(graphs.len())
}

fn load_graphs(path: &Path) -> Result<Vec<GraphRecord>> {
    let (layout, records) = read_graphs(path)?;
    if layout != LAYOUT_VERSION {
        return Err(Error::InvalidArgument(format!(
            "{} uses graph layout {layout:?}; this build reads {LAYOUT_VERSION:?}",
            path.display()
        )));
    }
    Ok(records)
}

/// Graph records joined with their target value, in id order.
fn join_targets(graphs: &Path, labels: &Path, target: Measure) -> Result<Vec<TrainSample>> {
    let file = read_labels(labels)?;
    if !file.columns.contains(&target) {
        return Err(Error::Schema(format!("{}: missing target column {:?}", labels.display(), target.column())));
    }
    let values: HashMap<&str, Option<f64>> = file.rows.iter().map(|r| (r.id.as_str(), r.labels.get(target))).collect();
    let mut out = Vec::new();
    for g in load_graphs(graphs)? {
        match values.get(g.id.as_str()) {
            Some(Some(v)) => out.push(TrainSample { id: g.id, graph: g.graph, target: *v }),
            Some(None) => {
                return Err(Error::Schema(format!(
                    "{}: target column {:?} is empty for {}",
                    labels.display(),
                    target.column(),
                    g.id
                )))
            }
            None => {}
        }
    }
    if out.is_empty() {
        return Err(Error::Schema(format!(
            "no record in {} has a label in {}",
            graphs.display(),
            labels.display()
        )));
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct TrainRunSummary {
    pub run: usize,
    pub seed: u64,
    pub checkpoint: PathBuf,
    pub history: PathBuf,
    pub final_train_loss: f64,
    pub final_test_loss: f64,
}

/// `model.json` / `history.csv` for a single run, `-run{r}` suffixes otherwise.
pub fn run_paths(out: &Path, runs: usize, run: usize) -> (PathBuf, PathBuf) {
    if runs == 1 {
        (out.join("model.json"), out.join("history.csv"))
    } else {
        (out.join(format!("model-run{run}.json")), out.join(format!("history-run{run}.csv")))
    }
}

pub fn cmd_train(cfg: &RunConfig, graphs: &Path, labels: &Path, out_dir: &Path) -> Result<Vec<TrainRunSummary>> {
    if cfg.runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    let mcfg = cfg.model_config()?;
    let samples = join_targets(graphs, labels, cfg.target_measure()?)?;
    let mut out = Vec::with_capacity(cfg.runs);
    for run in 0..cfg.runs {
        let tcfg = cfg.train_config(run)?;
        let result = train(&samples, &mcfg, &tcfg)?;
        let (ckpt_path, hist_path) = run_paths(out_dir, cfg.runs, run);
        Checkpoint::new(&result.model, &tcfg, &result.history, &result.train_ids, &result.test_ids).save(&ckpt_path)?;
        write_history(&hist_path, &result.history)?;
        let last = result.history.epochs.last();
        out.push(TrainRunSummary {
            run,
            seed: tcfg.seed,
            checkpoint: ckpt_path,
            history: hist_path,
            final_train_loss: last.map_or(result.history.initial_train_loss, |e| e.train_loss),
            final_test_loss: last.map_or(f64::NAN, |e| e.test_loss),
        });
    }
    Ok(out)
}

fn split_of(id: &str, train_ids: &HashSet<&str>, test_ids: &HashSet<&str>) -> &'static str {
    if train_ids.contains(id) {
        "train"
    } else if test_ids.contains(id) {
        "test"
    } else {
        "unseen"
    }
}

/// Score a checkpoint on every labeled graph, per split and optionally per
/// qubit count. Records are processed in id order, so the report does not
/// depend on file order.
pub fn cmd_eval(
    checkpoint: &Path,
    graphs: &Path,
    labels: &Path,
    per_qubit: bool,
    report: &Path,
    scatter: &Path,
) -> Result<Vec<ReportRow>> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let model = ckpt.regressor()?;
    let target = ckpt.train.target;
    let samples = join_targets(graphs, labels, target)?;
    let refs: Vec<&CircuitGraph> = samples.iter().map(|s| &s.graph).collect();
    let pred = model.predict(LAYOUT_VERSION, &refs)?;

    let train_ids: HashSet<&str> = ckpt.train_ids.iter().map(String::as_str).collect();
    let test_ids: HashSet<&str> = ckpt.test_ids.iter().map(String::as_str).collect();
    let scatter_rows: Vec<ScatterRow> = samples
        .iter()
        .zip(&pred)
        .map(|(s, y)| ScatterRow {
            id: s.id.clone(),
            n_qubits: s.graph.n_qubits,
            split: split_of(&s.id, &train_ids, &test_ids).to_string(),
            truth: s.target,
            prediction: *y,
        })
        .collect();

    let mut slices: Vec<(String, Option<usize>)> = Vec::new();
    if per_qubit {
        let qs: BTreeSet<usize> = samples.iter().map(|s| s.graph.n_qubits).collect();
        slices.extend(qs.into_iter().map(|q| (format!("{q}q"), Some(q))));
    }
    slices.push(("all".into(), None));

    let mut rows = Vec::new();
    for split in ["train", "test", "unseen", "all"] {
        for (name, q) in &slices {
            let (p, t): (Vec<f64>, Vec<f64>) = scatter_rows
                .iter()
                .filter(|r| split == "all" || r.split == split)
                .filter(|r| q.is_none_or(|q| r.n_qubits == q))
                .map(|r| (r.prediction, r.truth))
                .unzip();
            if p.len() < 2 {
                continue;
            }
            rows.push(ReportRow {
                model: ckpt.structure.clone(),
                target: target.column().to_string(),
                split: split.to_string(),
                slice: name.clone(),
                report: evaluate(&p, &t)?,
            });
        }
    }
    write_report(report, &rows)?;
    write_scatter(scatter, &scatter_rows)?;
    Ok(rows)
}

/// Encode and score a circuits file with a trained checkpoint.
pub fn cmd_predict(checkpoint: &Path, circuits: &Path, output: &Path) -> Result<usize> {
    let model = Checkpoint::load(checkpoint)?.regressor()?;
    let records = read_circuits(circuits)?;
    let graphs = records.iter().map(|(_, c)| encode_graph(c)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&CircuitGraph> = graphs.iter().collect();
    let pred = model.predict(LAYOUT_VERSION, &refs)?;
    let rows: Vec<(String, usize, f64)> =
        records.iter().zip(pred).map(|((id, c), y)| (id.clone(), c.n_qubits(), y)).collect();
    write_predictions(output, &rows)?;
    Ok(rows.len())
}

/// Score an encoded graphs file, refusing graphs of another layout.
pub fn predict_graphs(checkpoint: &Path, graphs: &Path) -> Result<Vec<(String, f64)>> {
    let model = Checkpoint::load(checkpoint)?.regressor()?;
    let (layout, records) = read_graphs(graphs)?;
    let refs: Vec<&CircuitGraph> = records.iter().map(|r| &r.graph).collect();
    let pred = model.predict(&layout, &refs)?;
    Ok(records.into_iter().map(|r| r.id).zip(pred).collect())
}
