//! `e2vts`: frame preprocessing, annotation propagation, OOD training,
//! evaluation, stage benchmarking and the annotation service.
//!
//! Exit codes: 0 success, 1 invalid input (bad flags, unreadable or malformed
//! inputs, bad config), 2 runtime failure.

use std::fmt::Display;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use e2vts_core::annotation::{propagation_frames, AnnotationDocument};
use e2vts_core::config::Settings;
use e2vts_core::io::{open_source, FrameSource};
use e2vts_core::metrics::evaluate_documents;
use e2vts_core::ood::{svm_train, EdgeDensityGrid, FeatureExtractor, SvmModel};
use e2vts_core::pipeline::{run_pipeline, MockSpotter, PipelineConfig, Stage, StageToggles};
use e2vts_core::autolabel::propagate_annotations;
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "e2vts", version, about = "Energy-aware preprocessing and auto-labeling for video text spotting")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

/// Flags accepted before any subcommand; the same flags after the subcommand win.
#[derive(Args, Clone, Default)]
struct Global {
    /// Flat key = value config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for every random component
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct ConfigOnly {
    /// Flat key = value config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads, 0 for all cores
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the staged pipeline over a frame directory or .y4m file
    Process {
        #[command(flatten)]
        global: Global,
        #[arg(long)]
        frames: PathBuf,
        /// Per-frame trace JSON
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Per-stage metrics JSON; printed to stdout when omitted
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Spotter detections JSON
        #[arg(long)]
        results: Option<PathBuf>,
        /// OOD model, overriding pipeline.ood_model
        #[arg(long)]
        ood_model: Option<PathBuf>,
    },
    /// Propagate seed annotations through consecutive frames
    Label {
        #[command(flatten)]
        global: ConfigOnly,
        #[arg(long)]
        frames: PathBuf,
        /// Annotation document; its lowest-index frame holds the seeds
        #[arg(long = "seed", value_name = "SEEDS_JSON")]
        seeds: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Last frame to label (default: last frame of the source)
        #[arg(long)]
        to: Option<usize>,
        /// Random seed for RANSAC
        #[arg(long)]
        rng_seed: Option<u64>,
    },
    /// Train the linear OOD rejector
    TrainOod {
        #[command(flatten)]
        global: Global,
        /// In-distribution frames
        #[arg(long)]
        pos: PathBuf,
        /// Out-of-distribution frames
        #[arg(long)]
        neg: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predicted annotations against ground truth
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Report JSON; printed to stdout when omitted
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Replay the pipeline over stage subsets and compare CPU time
    Bench {
        #[command(flatten)]
        global: Global,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        ood_model: Option<PathBuf>,
        /// Table JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve annotation sessions over HTTP
    Serve {
        #[command(flatten)]
        global: ConfigOnly,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

enum Failure {
    Input(String),
    Runtime(String),
}

type Outcome<T = ()> = Result<T, Failure>;

fn input<T, E: Display>(r: Result<T, E>, what: impl Display) -> Outcome<T> {
    r.map_err(|e| Failure::Input(format!("{what}: {e}")))
}

fn runtime<T, E: Display>(r: Result<T, E>, what: impl Display) -> Outcome<T> {
    r.map_err(|e| Failure::Runtime(format!("{what}: {e}")))
}

fn write_out(path: &Path, text: &str) -> Outcome {
    runtime(fs::write(path, text), format!("writing {}", path.display()))
}

fn settings(outer: &Global, inner: &Global) -> Outcome<Settings> {
    let config = inner.config.as_ref().or(outer.config.as_ref());
    let mut s = match config {
        Some(p) => input(Settings::load(p), "config")?,
        None => Settings::default(),
    };
    if let Some(seed) = inner.seed.or(outer.seed) {
        s.set_seed(seed);
    }
    if let Some(t) = inner.threads.or(outer.threads) {
        s.pipeline.threads = t;
    }
    input(s.validate(), "config")?;
    Ok(s)
}

fn open_frames(path: &Path) -> Outcome<Box<dyn FrameSource>> {
    let src = input(open_source(path), format!("frames {}", path.display()))?;
    if src.is_empty() {
        return Err(Failure::Input(format!("frames {}: no frames found", path.display())));
    }
    Ok(src)
}

fn read_document(path: &Path) -> Outcome<AnnotationDocument> {
    let text = input(fs::read_to_string(path), path.display())?;
    input(AnnotationDocument::from_json(&text), path.display())
}

fn load_model(cfg: &PipelineConfig, flag: Option<&PathBuf>) -> Outcome<Option<SvmModel>> {
    let Some(path) = flag.or(cfg.ood_model.as_ref()) else { return Ok(None) };
    let text = input(fs::read_to_string(path), format!("OOD model {}", path.display()))?;
    input(SvmModel::from_json(&text), format!("OOD model {}", path.display())).map(Some)
}

fn spotter(cfg: &PipelineConfig) -> Outcome<MockSpotter> {
    let doc = cfg.spotter.annotations.as_deref().map(read_document).transpose()?;
    Ok(MockSpotter::new(&cfg.spotter, doc.as_ref(), cfg.seed))
}

fn process(outer: &Global, inner: &Global, frames: &Path, trace: Option<&Path>, metrics: Option<&Path>, results: Option<&Path>, ood_model: Option<&PathBuf>) -> Outcome {
    let s = settings(outer, inner)?;
    let source = open_frames(frames)?;
    let model = load_model(&s.pipeline, ood_model)?;
    if s.pipeline.stages.ood && model.is_none() {
        return Err(Failure::Input("Stage III is enabled but no OOD model was given (--ood-model or pipeline.ood_model)".into()));
    }
    let spot = spotter(&s.pipeline)?;
    let out = input(run_pipeline(source.as_ref(), &s.pipeline, model.as_ref(), &spot), "pipeline")?;
    if let Some(p) = trace {
        write_out(p, &runtime(out.trace.to_json(), "trace")?)?;
    }
    let m = runtime(out.metrics.to_json(s.pipeline.timings), "metrics")?;
    match metrics {
        Some(p) => write_out(p, &m)?,
        None => println!("{m}"),
    }
    if let Some(p) = results {
        write_out(p, &runtime(serde_json::to_string_pretty(&out.results), "results")?)?;
    }
    Ok(())
}

fn label(outer: &Global, inner: &ConfigOnly, frames: &Path, seeds: &Path, out: &Path, to: Option<usize>, rng_seed: Option<u64>) -> Outcome {
    let global = Global { config: inner.config.clone(), seed: rng_seed, threads: inner.threads };
    let s = settings(outer, &global)?;
    let source = open_frames(frames)?;
    let doc = read_document(seeds)?;
    let first = doc.frames.iter().filter(|f| !f.annotations.is_empty()).map(|f| f.index).min();
    let first = first.ok_or_else(|| Failure::Input(format!("{}: no seed annotations", seeds.display())))?;
    let seed_annotations = doc.frame(first).expect("present").annotations.clone();
    let last = to.unwrap_or(source.len() - 1);
    if first >= source.len() || last >= source.len() || last < first {
        return Err(Failure::Input(format!("frame range {first}..={last} outside 0..{}", source.len())));
    }
    let frames: Vec<_> = input((first..=last).map(|i| source.load(i)).collect::<Result<Vec<_>, _>>(), "frames")?;
    let quads: Vec<_> = seed_annotations.iter().map(|a| a.quad).collect();
    let pool = runtime(rayon::ThreadPoolBuilder::new().num_threads(s.pipeline.threads).build(), "thread pool")?;
    let prop = pool.install(|| propagate_annotations(&frames, &quads, &s.propagate, |_, _| {}));
    let prop = runtime(prop, "propagation")?;
    if let Some(pos) = prop.halted_at {
        eprintln!("propagation halted at frame {}", first + pos);
    }
    let (frames, diagnostics) = propagation_frames(first, &seed_annotations, &prop);
    let result = AnnotationDocument { frames, diagnostics, ..Default::default() };
    write_out(out, &runtime(result.to_json(), "document")?)
}

fn train_ood(outer: &Global, inner: &Global, pos: &Path, neg: &Path, out: &Path) -> Outcome {
    let s = settings(outer, inner)?;
    let extractor = EdgeDensityGrid { screen: s.pipeline.screen, ..Default::default() };
    let pool = runtime(rayon::ThreadPoolBuilder::new().num_threads(s.pipeline.threads).build(), "thread pool")?;
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (dir, y) in [(pos, 1i8), (neg, -1i8)] {
        let src = open_frames(dir)?;
        let feats: Result<Vec<_>, _> = pool.install(|| (0..src.len()).into_par_iter().map(|i| src.load(i).and_then(|f| extractor.extract(&f))).collect());
        let feats = input(feats, dir.display())?;
        labels.extend(std::iter::repeat_n(y, feats.len()));
        samples.extend(feats);
    }
    let model = runtime(svm_train(&samples, &labels, &extractor.id(), s.svm), "training")?;
    write_out(out, &runtime(model.to_json(), "model")?)
}

fn eval(pred: &Path, gt: &Path, report: Option<&Path>) -> Outcome {
    let pred = read_document(pred)?;
    let gt = read_document(gt)?;
    let r = evaluate_documents(&pred, &gt);
    let text = runtime(serde_json::to_string_pretty(&r), "report")?;
    match report {
        Some(p) => write_out(p, &text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn bench(outer: &Global, inner: &Global, frames: &Path, ood_model: Option<&PathBuf>, out: Option<&Path>) -> Outcome {
    let s = settings(outer, inner)?;
    let source = open_frames(frames)?;
    let model = load_model(&s.pipeline, ood_model)?;
    let spot = spotter(&s.pipeline)?;
    let mut rows = Vec::new();
    for stages in StageToggles::all_subsets() {
        if stages.ood && model.is_none() {
            continue;
        }
        let cfg = PipelineConfig { stages, ..s.pipeline.clone() };
        let run = input(run_pipeline(source.as_ref(), &cfg, model.as_ref(), &spot), format!("stages {}", stages.label()))?;
        let total = run.metrics.total();
        let spotted = run.metrics.get(Stage::Spotter).frames_in;
        rows.push((stages.label(), total.cpu_ns, total.wall_ns, spotted));
    }
    let base = rows.iter().find(|r| r.0 == StageToggles { quality: false, screen: false, ood: false }.label()).map(|r| r.1.max(1)).unwrap_or(1);
    println!("{:<10} {:>12} {:>10} {:>14}", "stages", "cpu_ms", "relative", "spotter_calls");
    let mut table = Vec::new();
    for (name, cpu, wall, spotted) in &rows {
        let rel = *cpu as f64 / base as f64;
        println!("{:<10} {:>12.2} {:>10.3} {:>14}", name, *cpu as f64 / 1e6, rel, spotted);
        table.push(serde_json::json!({ "stages": name, "cpu_ns": cpu, "wall_ns": wall, "relative_cpu": rel, "spotter_calls": spotted }));
    }
    if model.is_none() {
        eprintln!("no OOD model given; subsets with Stage III skipped");
    }
    if let Some(p) = out {
        write_out(p, &runtime(serde_json::to_string_pretty(&serde_json::json!({ "version": 1, "rows": table })), "table")?)?;
    }
    Ok(())
}

fn serve(outer: &Global, inner: &ConfigOnly, host: std::net::IpAddr, port: u16, data: &Path) -> Outcome {
    let global = Global { config: inner.config.clone(), seed: None, threads: inner.threads };
    let s = settings(outer, &global)?;
    let state = input(e2vts_service::AppState::open(data, s.propagate), format!("data dir {}", data.display()))?;
    let rt = runtime(tokio::runtime::Runtime::new(), "runtime")?;
    let addr = SocketAddr::new(host, port);
    eprintln!("listening on http://{addr}");
    runtime(rt.block_on(e2vts_service::serve(addr, state)), "server")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let g = &cli.global;
    let result = match &cli.command {
        Command::Process { global, frames, trace, metrics, results, ood_model } => {
            process(g, global, frames, trace.as_deref(), metrics.as_deref(), results.as_deref(), ood_model.as_ref())
        }
        Command::Label { global, frames, seeds, out, to, rng_seed } => label(g, global, frames, seeds, out, *to, *rng_seed),
        Command::TrainOod { global, pos, neg, out } => train_ood(g, global, pos, neg, out),
        Command::Eval { pred, gt, report } => eval(pred, gt, report.as_deref()),
        Command::Bench { global, frames, ood_model, out } => bench(g, global, frames, ood_model.as_ref(), out.as_deref()),
        Command::Serve { global, port, data, host } => serve(g, global, *host, *port, data),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
