use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use taskmesh::harness::{
    self, emit_run, replay, run_batch, run_corpus, sweep, trace_path, BatchOptions, BatchResult, ExperimentConfig,
    ReplayVerdict, ReportRow, SweepAxis, SweepSpec,
};
use taskmesh::schedule::RoutingPolicy;
use taskmesh::worldgen::{export, generate, ingest, CorpusRecord, WorldSpec};

#[derive(Parser)]
#[command(name = "taskmesh", version, about = "Seeded multi-agent task decomposition simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of synthetic episodes.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Run one batch per value of a swept knob.
    Sweep {
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated, strictly increasing values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Re-simulate an episode trace and check it is byte-identical.
    Replay {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Validate a JSONL corpus and evaluate one episode per record.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Generate one synthetic task from a world spec (JSON).
    Gen {
        #[arg(long)]
        spec: PathBuf,
        /// Also write the task as a one-line corpus file.
        #[arg(long)]
        corpus_out: Option<PathBuf>,
        #[arg(long, default_value = "task-0")]
        id: String,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Write one JSONL trace per episode.
    #[arg(long)]
    traces: bool,
    #[arg(long)]
    modules: Option<usize>,
    #[arg(long)]
    fanout: Option<usize>,
    #[arg(long)]
    k_ref: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    routing: Option<Routing>,
    #[arg(long)]
    no_projection: bool,
    #[arg(long)]
    tau_match: Option<f64>,
    #[arg(long)]
    theta_global: Option<f64>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Routing {
    Similarity,
    Random,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.modules {
            cfg.decompose.modules = v;
        }
        if let Some(v) = self.fanout {
            cfg.runtime.fanout = v;
        }
        if let Some(v) = self.k_ref {
            cfg.world.k_ref = v;
        }
        if let Some(v) = self.beta {
            cfg.decompose.beta = v;
        }
        if let Some(v) = self.gamma {
            cfg.world.gamma = v;
        }
        if let Some(v) = self.agents {
            cfg.schedule.agents = v;
        }
        if let Some(r) = self.routing {
            cfg.schedule.routing = match r {
                Routing::Similarity => RoutingPolicy::Similarity,
                Routing::Random => RoutingPolicy::Random,
            };
        }
        if self.no_projection {
            cfg.aggregate.projection = false;
        }
        if let Some(v) = self.tau_match {
            cfg.metrics.tau_match = v;
        }
        if let Some(v) = self.theta_global {
            cfg.metrics.theta_global = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn options(&self) -> BatchOptions {
        let workers = self
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        BatchOptions { workers, traces: self.traces }
    }
}

fn print_header() {
    println!("{:>10} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9}", "axis", "value", "sr", "dspl", "f1", "lb", "composite");
}

fn print_row(row: &ReportRow) {
    let r = &row.report;
    println!(
        "{:>10} {:>6} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
        row.axis,
        row.value,
        r.sr,
        r.dspl,
        r.subtask_f1,
        r.load_balancing,
        r.composite()
    );
}

fn batch_traces(batch: &BatchResult, cell: Option<(SweepAxis, usize)>) -> Vec<(PathBuf, &[taskmesh::trace::TraceEvent])> {
    batch
        .episodes
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.trace.as_deref().map(|t| (trace_path(cell, i), t)))
        .collect()
}

fn finish(out: &Path, manifest: &harness::RunManifest) {
    println!("wrote {} (content hash {})", out.join("metrics.csv").display(), manifest.content_hash);
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { common } => {
            let cfg = common.config()?;
            let batch = run_batch(&cfg, common.episodes, common.seed, &common.options())?;
            let row = ReportRow {
                axis: "run".into(),
                value: String::new(),
                seed: common.seed,
                config: cfg.clone(),
                report: batch.report.clone(),
            };
            print_header();
            print_row(&row);
            let traces = batch_traces(&batch, None);
            let manifest = emit_run(&common.out, &[row], &traces, "run", common.seed, common.episodes, &cfg)?;
            finish(&common.out, &manifest);
        }
        Command::Sweep { axis, values, common } => {
            let base = common.config()?;
            let spec = SweepSpec { axis, values, episodes_per_cell: common.episodes, base: base.clone(), seed: common.seed };
            let cells = sweep(&spec, &common.options())?;
            print_header();
            let mut rows = Vec::new();
            let mut traces = Vec::new();
            for cell in &cells {
                let row = ReportRow {
                    axis: axis.to_string(),
                    value: cell.value.to_string(),
                    seed: common.seed,
                    config: cell.config.clone(),
                    report: cell.batch.report.clone(),
                };
                print_row(&row);
                rows.push(row);
                traces.extend(batch_traces(&cell.batch, Some((axis, cell.value))));
            }
            let manifest = emit_run(&common.out, &rows, &traces, &format!("sweep {axis}"), common.seed, common.episodes, &base)?;
            finish(&common.out, &manifest);
        }
        Command::Replay { trace } => {
            let bytes = std::fs::read(&trace).with_context(|| format!("reading {}", trace.display()))?;
            match replay(&bytes)? {
                ReplayVerdict::Identical { events } => println!("identical: {events} events"),
                ReplayVerdict::Diverged { line } => bail!("trace diverges from re-simulation at line {line}"),
            }
        }
        Command::Ingest { corpus, common } => {
            let records = ingest(&corpus)?;
            let cfg = common.config()?;
            println!("{} valid records in {}", records.len(), corpus.display());
            let batch = run_corpus(&cfg, &records, common.seed, &common.options())?;
            let row = ReportRow {
                axis: "corpus".into(),
                value: String::new(),
                seed: common.seed,
                config: cfg.clone(),
                report: batch.report.clone(),
            };
            print_header();
            print_row(&row);
            let traces = batch_traces(&batch, None);
            let manifest = emit_run(&common.out, &[row], &traces, "ingest", common.seed, records.len(), &cfg)?;
            finish(&common.out, &manifest);
        }
        Command::Gen { spec, corpus_out, id } => {
            let text = std::fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let world: WorldSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", spec.display()))?;
            let task = generate(&world)?;
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, &task)?;
            writeln!(stdout)?;
            if let Some(path) = corpus_out {
                let record = CorpusRecord {
                    id,
                    task_text: task.task_text.clone(),
                    reference_subtasks: task.reference_texts.clone(),
                    metadata: serde_json::Map::from_iter([
                        ("seed".to_owned(), world.seed.into()),
                        ("k_ref".to_owned(), world.k_ref.into()),
                    ]),
                };
                let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                export(&[record], std::io::BufWriter::new(file))?;
            }
        }
    }
    Ok(())
}
