use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scattermesh_core::corpus::{
    build_labeled_dataset, load_corpus, parse_label_list, read_truth, Corpus, CorpusFormat, LabeledDataset,
    BREAST_NEOPLASMS_LABELS,
};
use scattermesh_core::descriptors::plot_projection;
use scattermesh_core::harness::{
    emit_report, grid_sweep, run_experiment, run_pipeline, table4_report, write_sweep_csv, ExperimentResult, GridSpec,
    PipelineConfig, ReportFormat, ReportStyle, WORKERS_ENV,
};
use scattermesh_core::metrics::ContingencyTable;
use scattermesh_core::synth::{planted_dataset, SynthParams};
use scattermesh_core::Error as CoreError;
use scattermesh_service::{default_config, ServiceConfig};

#[derive(Parser)]
#[command(name = "scattermesh", version, about = "Document clustering and cluster-quality evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus file and rewrite it as JSONL.
    Ingest {
        input: PathBuf,
        /// jsonl or csv; guessed from the extension when omitted.
        #[arg(long)]
        format: Option<CorpusFormat>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Keep documents carrying exactly one of the most frequent labels.
    BuildDataset {
        corpus: PathBuf,
        /// One label per line; defaults to the bundled breast-neoplasm headings.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 0)]
        min_class_size: usize,
        /// Output corpus; the truth table is written beside it as `<stem>.truth.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic planted-topic corpus and its truth table.
    Synth {
        /// JSON object overriding generator parameters.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one pipeline configuration and score it.
    Run {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Print this many descriptor terms per cluster.
        #[arg(long, default_value_t = 10)]
        descriptors: usize,
        /// Append the result as one JSON line.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        contingency: Option<PathBuf>,
    },
    /// Run every configuration of a parameter grid.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        /// Grid JSON; `--full-grid` uses the complete published grid instead.
        #[arg(long, required_unless_present = "full_grid", conflicts_with = "full_grid")]
        grid: Option<PathBuf>,
        #[arg(long)]
        full_grid: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
        /// Ranked CSV of every configuration.
        #[arg(long)]
        out: PathBuf,
        /// JSON lines of the successful results, for `report`.
        #[arg(long)]
        results: Option<PathBuf>,
        /// Print the configuration count and stop.
        #[arg(long)]
        dry_run: bool,
    },
    /// Render results or a matching matrix as a table.
    Report {
        #[arg(long, required_unless_present = "contingency", conflicts_with = "contingency")]
        results: Vec<PathBuf>,
        /// Matching-matrix CSV for `--style table4`.
        #[arg(long)]
        contingency: Option<PathBuf>,
        #[arg(long, default_value = "summary")]
        style: ReportStyle,
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-dimensional projection of a clustered corpus.
    Plot {
        corpus: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Serve the scatter/gather HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        corpus_dir: Option<PathBuf>,
        /// Session snapshots; sessions survive restarts when set.
        #[arg(long)]
        state_dir: Option<PathBuf>,
        /// Static client assets, served under /ui.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Corpus file (jsonl or csv).
    corpus: PathBuf,
    /// `id,class` table; defaults to `<stem>.truth.csv` beside the corpus.
    #[arg(long)]
    truth: Option<PathBuf>,
}

/// Failure classes mapped to exit codes 1, 2 and 3.
enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        match e.root() {
            CoreError::InvalidParameter(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn write_out(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Internal(format!("cannot write {}: {e}", path.display())))
}

fn create(path: &Path) -> Outcome<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Internal(format!("cannot write {}: {e}", path.display())))
}

fn internal(e: std::io::Error) -> Failure {
    Failure::Internal(e.to_string())
}

fn sidecar(corpus: &Path) -> PathBuf {
    scattermesh_service::state::sidecar_path(corpus)
}

fn open_corpus(path: &Path, format: Option<CorpusFormat>) -> Outcome<Corpus> {
    let format = format
        .or_else(|| CorpusFormat::from_path(path))
        .ok_or_else(|| Failure::Usage(format!("cannot tell the format of {}; pass --format", path.display())))?;
    let loaded = load_corpus(path, format)?;
    if loaded.skipped > 0 {
        eprintln!("skipped {} record(s) without id or title", loaded.skipped);
    }
    Ok(loaded.corpus)
}

fn open_dataset(data: &DataArgs) -> Outcome<LabeledDataset> {
    let corpus = open_corpus(&data.corpus, None)?;
    let truth_path = data.truth.clone().unwrap_or_else(|| sidecar(&data.corpus));
    let (truth, classes) = read_truth(&truth_path)?;
    Ok(LabeledDataset::from_parts(corpus, truth, classes)?)
}

fn read_config(path: Option<&Path>, seed: Option<u64>) -> Outcome<PipelineConfig> {
    let mut config = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", p.display())))?;
            PipelineConfig::from_json(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
        }
        None => default_config(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(config)
}

fn read_results(paths: &[PathBuf]) -> Outcome<Vec<ExperimentResult>> {
    let mut out = Vec::new();
    for path in paths {
        let file = File::open(path).map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
            if line.trim().is_empty() {
                continue;
            }
            let r: ExperimentResult = serde_json::from_str(&line)
                .map_err(|e| Failure::Data(format!("{} line {}: {e}", path.display(), i + 1)))?;
            out.push(r);
        }
    }
    Ok(out)
}

fn execute(command: Command) -> Outcome {
    match command {
        Command::Ingest { input, format, out } => {
            let corpus = open_corpus(&input, format)?;
            println!("{} documents", corpus.len());
            if let Some(out) = out {
                corpus.write_jsonl(&out)?;
            }
        }
        Command::BuildDataset {
            corpus,
            labels,
            classes,
            min_class_size,
            out,
        } => {
            let corpus = open_corpus(&corpus, None)?;
            let candidates = match labels {
                Some(p) => parse_label_list(
                    &fs::read_to_string(&p).map_err(|e| Failure::Data(format!("cannot read {}: {e}", p.display())))?,
                ),
                None => parse_label_list(BREAST_NEOPLASMS_LABELS),
            };
            let build = build_labeled_dataset(&corpus, &candidates, classes, min_class_size)?;
            build.dataset.corpus().write_jsonl(&out)?;
            build.dataset.write_truth(&sidecar(&out))?;
            for (class, size) in build.dataset.class_sizes() {
                println!("{size}\t{class}");
            }
            eprintln!(
                "dropped {} unlabeled and {} multi-label document(s)",
                build.dropped_unlabeled, build.dropped_multilabel
            );
        }
        Command::Synth { params, seed, out } => {
            let mut p: SynthParams = match params {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
                    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
                }
                None => SynthParams::default(),
            };
            if let Some(s) = seed {
                p.seed = s;
            }
            let data = planted_dataset(&p)?;
            data.corpus().write_jsonl(&out)?;
            data.write_truth(&sidecar(&out))?;
            println!("{} documents in {} topics", data.corpus().len(), data.classes().len());
        }
        Command::Run {
            data,
            config,
            seed,
            descriptors,
            out,
            contingency,
        } => {
            let dataset = open_dataset(&data)?;
            let config = read_config(config.as_deref(), seed)?;
            let result = run_experiment(&dataset, &config)?;
            let r = &result.report;
            let sc = r.sc.map_or("-".to_string(), |s| format!("{s:.3}"));
            println!(
                "k={} SC={sc} PRT={:.3} AMI={:.3} terms={} time={:.2}s",
                result.k_found, r.prt, r.ami, result.selected_terms, result.wall_time
            );
            if descriptors > 0 {
                let run = run_pipeline(dataset.corpus().records(), &config)?;
                for d in run.descriptors(descriptors)? {
                    println!("{}", d.render());
                }
            }
            if let Some(path) = out {
                let mut f = fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&path)
                    .map_err(|e| Failure::Internal(format!("cannot write {}: {e}", path.display())))?;
                writeln!(f, "{}", result.canonical_json()).map_err(internal)?;
            }
            if let Some(path) = contingency {
                result.contingency.write_csv(create(&path)?)?;
            }
        }
        Command::Sweep {
            data,
            grid,
            full_grid,
            seed,
            workers,
            out,
            results,
            dry_run,
        } => {
            let mut spec = if full_grid {
                GridSpec::full()
            } else {
                let path = grid.expect("clap requires --grid without --full-grid");
                let text = fs::read_to_string(&path)
                    .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            if spec.is_empty() {
                return Err(Failure::Usage("the grid has no configurations".into()));
            }
            let workers = workers
                .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
                .unwrap_or(1);
            println!("{} configurations on {workers} worker(s)", spec.len());
            if dry_run {
                return Ok(());
            }
            let dataset = open_dataset(&data)?;
            let outcomes = grid_sweep(&dataset, &spec, workers)?;
            let failed = outcomes.iter().filter(|o| o.error.is_some()).count();
            write_sweep_csv(create(&out)?, &outcomes)?;
            if let Some(path) = results {
                let mut w = create(&path)?;
                for r in outcomes.iter().filter_map(|o| o.result.as_ref()) {
                    writeln!(w, "{}", r.canonical_json()).map_err(internal)?;
                }
                w.flush().map_err(internal)?;
            }
            if let Some(best) = outcomes.first().and_then(|o| o.result.as_ref()) {
                println!("best AMI {:.3}", best.report.ami);
            }
            if failed > 0 {
                eprintln!("{failed} configuration(s) failed; see the error column");
            }
        }
        Command::Report {
            results,
            contingency,
            style,
            format,
            out,
        } => {
            let text = match contingency {
                Some(path) => {
                    if style != ReportStyle::Table4 {
                        return Err(Failure::Usage("--contingency only renders --style table4".into()));
                    }
                    let file =
                        File::open(&path).map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))?;
                    table4_report(&ContingencyTable::read_csv(file)?, format)?
                }
                None => emit_report(&read_results(&results)?, style, format)?,
            };
            match out {
                Some(path) => write_out(&path, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Plot {
            corpus,
            truth,
            config,
            svg,
            csv,
        } => {
            let docs = open_corpus(&corpus, None)?;
            let config = read_config(config.as_deref(), None)?;
            let truth_path = truth.or_else(|| Some(sidecar(&corpus)).filter(|p| p.is_file()));
            let labels: Option<Vec<String>> = match truth_path {
                Some(p) => {
                    let (map, _) = read_truth(&p)?;
                    let labels = docs
                        .ids()
                        .map(|id| map.get(id).cloned())
                        .collect::<Option<Vec<_>>>()
                        .ok_or_else(|| Failure::Data(format!("{} does not cover every document", p.display())))?;
                    Some(labels)
                }
                None => None,
            };
            let run = run_pipeline(docs.records(), &config)?;
            let projection = plot_projection(&run.matrix, &run.clustering, labels.as_deref())?;
            if let Some(path) = csv {
                projection.write_csv(create(&path)?)?;
            }
            match svg {
                Some(path) => write_out(&path, &projection.to_svg())?,
                None => projection.write_csv(std::io::stdout().lock())?,
            }
        }
        Command::Serve {
            port,
            corpus_dir,
            state_dir,
            ui_dir,
        } => {
            let runtime = tokio::runtime::Runtime::new().map_err(internal)?;
            let addr = SocketAddr::from((Ipv4Addr::UNSPECIFIED, port));
            runtime
                .block_on(scattermesh_service::serve(
                    addr,
                    ServiceConfig {
                        corpus_dir,
                        state_dir,
                        ui_dir,
                    },
                ))
                .map_err(internal)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
