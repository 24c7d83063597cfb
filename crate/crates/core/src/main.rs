use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pqc_express::pipeline::{
    cmd_encode, cmd_eval, cmd_generate, cmd_label, cmd_predict, cmd_train, default_path, RunConfig,
};
use pqc_express::Result;

#[derive(Parser)]
#[command(name = "pqcx", version, about = "Random PQC expressibility: generate, label, encode, train, evaluate")]
struct Cli {
    /// Flat TOML file with any subset of the run settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts and config snapshots.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample random circuits with the gatewise rule.
    Generate {
        /// Comma-separated qubit counts.
        #[arg(long, value_delimiter = ',')]
        qubits: Option<Vec<usize>>,
        /// Circuits per (qubits, gate count) pair.
        #[arg(long)]
        per_count: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compute expressibility labels; resumes from an existing output file.
    Label {
        #[arg(long)]
        circuits: Option<PathBuf>,
        /// Comma-separated subset of exp1, exp1r, exp2, exp2-noisy.
        #[arg(long, value_delimiter = ',')]
        measures: Option<Vec<String>>,
        #[arg(long)]
        fidelity_samples: Option<usize>,
        #[arg(long)]
        mmd_samples: Option<usize>,
        /// Stop after this many newly labeled circuits.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Encode circuits as DAG feature and adjacency arrays.
    Encode {
        #[arg(long)]
        circuits: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit the regressor on encoded graphs and labels.
    Train {
        #[arg(long)]
        graphs: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// heads-layers-hidden, e.g. 1-2-32.
        #[arg(long)]
        structure: Option<String>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        runs: Option<usize>,
        /// Share one train/test split across runs.
        #[arg(long)]
        fixed_split: bool,
    },
    /// Score a checkpoint and write the report and scatter tables.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        graphs: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Add one row per qubit count.
        #[arg(long)]
        per_qubit: bool,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        scatter: Option<PathBuf>,
    },
    /// Predict expressibility for a circuits file.
    Predict {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        circuits: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    let path = |p: Option<PathBuf>, cfg: &RunConfig, name: &str| p.unwrap_or_else(|| default_path(cfg, name));

    match cli.command {
        Command::Generate { qubits, per_count, output } => {
            if let Some(q) = qubits {
                cfg.qubits = q;
            }
            if let Some(k) = per_count {
                cfg.per_count = k;
            }
            let output = path(output, &cfg, "circuits.jsonl");
            cfg.write_snapshot("generate")?;
            let n = cmd_generate(&cfg, &output)?;
            eprintln!("wrote {n} circuits to {}", output.display());
        }
        Command::Label { circuits, measures, fidelity_samples, mmd_samples, limit, output } => {
            if let Some(m) = measures {
                cfg.measures = m;
            }
            if let Some(n) = fidelity_samples {
                cfg.n_fidelity_samples = n;
            }
            if let Some(m) = mmd_samples {
                cfg.mmd_samples = m;
            }
            let circuits = path(circuits, &cfg, "circuits.jsonl");
            let output = path(output, &cfg, "labels.csv");
            cfg.write_snapshot("label")?;
            let s = cmd_label(&cfg, &circuits, &output, limit)?;
            eprintln!(
                "labels: {} reused, {} computed, {} remaining -> {}",
                s.reused,
                s.computed,
                s.remaining,
                output.display()
            );
        }
        Command::Encode { circuits, output } => {
            let circuits = path(circuits, &cfg, "circuits.jsonl");
            let output = path(output, &cfg, "graphs.jsonl");
            cfg.write_snapshot("encode")?;
            let n = cmd_encode(&circuits, &output)?;
            eprintln!("encoded {n} graphs to {}", output.display());
        }
        Command::Train { graphs, labels, structure, target, epochs, runs, fixed_split } => {
            if let Some(s) = structure {
                cfg.structure = s;
            }
            if let Some(t) = target {
                cfg.target = t;
            }
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            if let Some(r) = runs {
                cfg.runs = r;
            }
            if fixed_split {
                cfg.resplit_per_run = false;
            }
            let graphs = path(graphs, &cfg, "graphs.jsonl");
            let labels = path(labels, &cfg, "labels.csv");
            cfg.write_snapshot("train")?;
            for r in cmd_train(&cfg, &graphs, &labels, &cfg.out)? {
                eprintln!(
                    "run {}: train mse {:.6}, test mse {:.6} -> {}",
                    r.run,
                    r.final_train_loss,
                    r.final_test_loss,
                    r.checkpoint.display()
                );
            }
        }
        Command::Eval { checkpoint, graphs, labels, per_qubit, report, scatter } => {
            cfg.per_qubit |= per_qubit;
            let checkpoint = path(checkpoint, &cfg, "model.json");
            let graphs = path(graphs, &cfg, "graphs.jsonl");
            let labels = path(labels, &cfg, "labels.csv");
            let report = path(report, &cfg, "eval.csv");
            let scatter = path(scatter, &cfg, "scatter.csv");
            cfg.write_snapshot("eval")?;
            let rows = cmd_eval(&checkpoint, &graphs, &labels, cfg.per_qubit, &report, &scatter)?;
            for r in rows {
                eprintln!(
                    "{:>6} {:>4} n={:<5} rmse={:.4} r2={:.4} rho={:.4} tau={:.4}",
                    r.split, r.slice, r.report.n, r.report.rmse, r.report.r2, r.report.spearman, r.report.kendall
                );
            }
        }
        Command::Predict { checkpoint, circuits, output } => {
            let checkpoint = path(checkpoint, &cfg, "model.json");
            let circuits = path(circuits, &cfg, "circuits.jsonl");
            let output = path(output, &cfg, "predictions.csv");
            cfg.write_snapshot("predict")?;
            let n = cmd_predict(&checkpoint, &circuits, &output)?;
            eprintln!("wrote {n} predictions to {}", output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
