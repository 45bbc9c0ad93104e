mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use neptune_core::detection::detect_stream;
use neptune_core::ingest::{crop, load_frame_sequence, CropRect, FrameFormat, FrameWindow};
use neptune_core::labels::read_labels;
use neptune_core::pipeline::analyze_window;
use neptune_core::segmentation::{cluster_map, segments_csv};
use neptune_core::synth::{render, write_frames, SceneSpec};
use neptune_core::training::{baseline_report, train};
use neptune_core::{DetectorModel, GrayImage, RunConfig};

use output::Outputs;

#[derive(Parser)]
#[command(name = "neptune", version, about = "Near-drowning struggle detection for pool video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic scene into a PGM directory and a labels file.
    Synth {
        /// Scene description (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Receives `frames/` and `labels.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit cut-offs and rule sets for all five window lengths.
    Train {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Model file to write.
        #[arg(long)]
        model: PathBuf,
        /// Optional directory for `training_summary.csv` and `sweep.csv`.
        #[arg(long)]
        report_dir: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Per-second detections with a trained model.
    Detect {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Receives `detections.csv`, `union.csv` and `timeline.svg`.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score labeled segments with the published regression formula.
    Baseline {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        window_s: u32,
        /// Report CSV to write.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Write the merged matrix of one window as PGM (and optionally CSV).
    DumpMerge {
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Write segment tables and cluster maps of one window.
    DumpSegments {
        #[command(flatten)]
        window: WindowArgs,
        /// Receives `segments_a.csv`, `segments_b.csv`, `clusters3.pgm`, `clusters4.pgm`.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Args)]
struct WindowArgs {
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    window_s: u32,
    /// The window starts right after this many whole seconds.
    #[arg(long, default_value_t = 0)]
    start_second: u32,
}

/// A JSON config file plus per-field overrides.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    fps: Option<u32>,
    /// `x0,y0,w,h` with a 1-based origin.
    #[arg(long, value_parser = parse_crop)]
    crop: Option<CropRect>,
    #[arg(long)]
    stride_s: Option<u32>,
    /// `include_dc` or `exclude_dc`.
    #[arg(long, value_parser = parse_name::<neptune_core::DcPolicy>)]
    dc_policy: Option<neptune_core::DcPolicy>,
    /// `four` or `eight`.
    #[arg(long, value_parser = parse_name::<neptune_core::segmentation::Adjacency>)]
    adjacency: Option<neptune_core::segmentation::Adjacency>,
    /// `optimal` or `quantile`.
    #[arg(long, value_parser = parse_name::<neptune_core::segmentation::KmeansInit>)]
    kmeans_init: Option<neptune_core::segmentation::KmeansInit>,
    #[arg(long)]
    kmeans_max_iters: Option<usize>,
    /// `computed`, `builtin` or `builtin_repaired`.
    #[arg(long, value_parser = parse_name::<neptune_core::PercentileSource>)]
    percentile_source: Option<neptune_core::PercentileSource>,
    /// `pgm_dir`, `png_dir` or `raw_y8:WxH`.
    #[arg(long, value_parser = parse_format)]
    format: Option<FrameFormat>,
}

fn parse_name<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_crop(s: &str) -> std::result::Result<CropRect, String> {
    let parts: Vec<u32> = s
        .split(',')
        .map(|p| p.trim().parse::<u32>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format!("crop {s:?}: {e}"))?;
    match parts[..] {
        [x0, y0, w, h] => Ok(CropRect { x0, y0, w, h }),
        _ => Err(format!("crop {s:?} needs four numbers x0,y0,w,h")),
    }
}

fn parse_format(s: &str) -> std::result::Result<FrameFormat, String> {
    match s {
        "pgm_dir" => Ok(FrameFormat::PgmDir),
        "png_dir" => Ok(FrameFormat::PngDir),
        _ => {
            let dims = s
                .strip_prefix("raw_y8:")
                .ok_or_else(|| format!("unknown frame format {s:?}"))?;
            let (w, h) = dims
                .split_once('x')
                .ok_or_else(|| format!("raw size {dims:?} is not WxH"))?;
            Ok(FrameFormat::RawY8 {
                width: w.parse().map_err(|e| format!("raw width: {e}"))?,
                height: h.parse().map_err(|e| format!("raw height: {e}"))?,
            })
        }
    }
}

impl ConfigArgs {
    /// The config file if given, else `base`, with command-line fields on top.
    fn resolve(&self, base: RunConfig) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                RunConfig::from_json(&text).with_context(|| format!("parsing config {}", path.display()))?
            }
            None => base,
        };
        if let Some(v) = self.fps {
            cfg.fps = v;
        }
        if let Some(v) = self.crop {
            cfg.crop = Some(v);
        }
        if let Some(v) = self.stride_s {
            cfg.stride_s = v;
        }
        if let Some(v) = self.dc_policy {
            cfg.dc_policy = v;
        }
        if let Some(v) = self.adjacency {
            cfg.adjacency = v;
        }
        if let Some(v) = self.kmeans_init {
            cfg.kmeans_init = v;
        }
        if let Some(v) = self.kmeans_max_iters {
            cfg.kmeans_max_iters = v;
        }
        if let Some(v) = self.percentile_source {
            cfg.percentile_source = v;
        }
        if let Some(v) = self.format {
            cfg.format = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_frames(path: &Path, cfg: &RunConfig) -> Result<Vec<GrayImage>> {
    let frames = load_frame_sequence(path, cfg.format)
        .with_context(|| format!("loading frames from {}", path.display()))?;
    match cfg.crop {
        Some(rect) => frames
            .iter()
            .map(|f| crop(f, rect).map_err(Into::into))
            .collect(),
        None => Ok(frames),
    }
}

fn one_window(args: &WindowArgs, cfg: &RunConfig) -> Result<FrameWindow> {
    let frames = load_frames(&args.frames, cfg)?;
    let fps = cfg.fps as usize;
    let start = args.start_second as usize * fps;
    let end = start + args.window_s as usize * fps;
    if end > frames.len() {
        bail!(
            "a {} s window after {} s needs {end} frames, found {}",
            args.window_s,
            args.start_second,
            frames.len()
        );
    }
    Ok(FrameWindow::new(
        frames[start..end].to_vec(),
        cfg.fps,
        args.window_s,
        start + 1,
    )?)
}

fn cmd_synth(spec: &Path, out_dir: &Path, out: &mut Outputs) -> Result<()> {
    let text = std::fs::read_to_string(spec).with_context(|| format!("reading {}", spec.display()))?;
    let spec: SceneSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", spec.display()))?;
    let scene = render(&spec)?;
    out.replace_dir(&out_dir.join("frames"), |tmp| Ok(write_frames(tmp, &scene.frames)?))?;
    out.write(
        &out_dir.join("labels.csv"),
        neptune_core::labels::labels_csv(&scene.labels),
    )?;
    println!(
        "frames={} labels={} dir={}",
        scene.frames.len(),
        scene.labels.len(),
        out_dir.display()
    );
    Ok(())
}

fn cmd_train(
    frames: &Path,
    labels: &Path,
    model: &Path,
    report_dir: Option<&Path>,
    cfg: &RunConfig,
    out: &mut Outputs,
) -> Result<()> {
    let stream = load_frames(frames, cfg)?;
    let rows = read_labels(labels)?;
    let outcome = train(&stream, &rows, cfg)?;
    for r in &outcome.reports {
        println!("{}", r.counts_line());
        if let Some(w) = &r.warning {
            eprintln!("warning: {w}");
        }
    }
    print!("{}", outcome.summary_csv());
    out.write(model, outcome.model.to_json())?;
    if let Some(dir) = report_dir {
        out.write(&dir.join("training_summary.csv"), outcome.summary_csv())?;
        out.write(&dir.join("sweep.csv"), outcome.sweep_csv())?;
    }
    Ok(())
}

fn cmd_detect(frames: &Path, model_path: &Path, out_dir: &Path, args: &ConfigArgs, out: &mut Outputs) -> Result<()> {
    let model = DetectorModel::load(model_path)?;
    let base = RunConfig {
        fps: model.fps,
        crop: model.crop,
        dc_policy: model.pipeline.dc_policy,
        adjacency: model.pipeline.adjacency,
        kmeans_init: model.pipeline.kmeans_init,
        kmeans_max_iters: model.pipeline.kmeans_max_iters,
        percentile_source: model.percentile_source,
        ..RunConfig::default()
    };
    let cfg = args.resolve(base)?;
    model.check_config(&cfg)?;
    let stream = load_frames(frames, &cfg)?;
    let timeline = detect_stream(&model, &stream)?;
    out.write(&out_dir.join("detections.csv"), timeline.detections_csv())?;
    out.write(&out_dir.join("union.csv"), timeline.union_csv())?;
    out.write(&out_dir.join("timeline.svg"), timeline.to_svg())?;
    let hits = timeline.union.iter().filter(|u| **u).count();
    println!("seconds={} detected_seconds={hits}", timeline.seconds);
    Ok(())
}

fn cmd_baseline(frames: &Path, labels: &Path, window_s: u32, path: &Path, cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let stream = load_frames(frames, cfg)?;
    let rows = read_labels(labels)?;
    let report = baseline_report(&stream, &rows, cfg, window_s)?;
    println!("{}", report.summary());
    if let Err(e) = &report.correlation {
        bail!("correlation is undefined: {e}");
    }
    out.write(path, report.to_csv())
}

fn cmd_dump_merge(args: &WindowArgs, png: &Path, csv: Option<&Path>, cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let window = one_window(args, cfg)?;
    let matrix = neptune_core::merge_window(&window, cfg.dc_policy);
    if matrix.is_no_signal() {
        eprintln!("warning: window has no signal; merged matrix is all zeros");
    }
    out.write(png, matrix.to_image().to_pgm())?;
    if let Some(csv) = csv {
        out.write(csv, matrix.to_csv())?;
    }
    Ok(())
}

fn cmd_dump_segments(args: &WindowArgs, dir: &Path, cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let window = one_window(args, cfg)?;
    let analysis = analyze_window(&window, &cfg.pipeline())?;
    let seg = &analysis.segmentation;
    let (w, h) = (window.width(), window.height());
    out.write(&dir.join("segments_a.csv"), segments_csv(&seg.sa))?;
    out.write(&dir.join("segments_b.csv"), segments_csv(&seg.sb))?;
    if let Some(a) = &seg.three {
        out.write(&dir.join("clusters3.pgm"), cluster_map(w, h, a).to_pgm())?;
    }
    if let Some(a) = &seg.four {
        out.write(&dir.join("clusters4.pgm"), cluster_map(w, h, a).to_pgm())?;
    }
    println!("sa={} sb={} features={}", seg.sa.len(), seg.sb.len(), analysis.features.len());
    Ok(())
}

fn run(cli: Cli, out: &mut Outputs) -> Result<()> {
    match &cli.command {
        Command::Synth { spec, out: dir } => cmd_synth(spec, dir, out),
        Command::Train {
            frames,
            labels,
            model,
            report_dir,
            config,
        } => {
            let cfg = config.resolve(RunConfig::default())?;
            cmd_train(frames, labels, model, report_dir.as_deref(), &cfg, out)
        }
        Command::Detect {
            frames,
            model,
            out: dir,
            config,
        } => cmd_detect(frames, model, dir, config, out),
        Command::Baseline {
            frames,
            labels,
            window_s,
            out: path,
            config,
        } => {
            let cfg = config.resolve(RunConfig::default())?;
            cmd_baseline(frames, labels, *window_s, path, &cfg, out)
        }
        Command::DumpMerge {
            window,
            out: path,
            csv,
            config,
        } => {
            let cfg = config.resolve(RunConfig::default())?;
            cmd_dump_merge(window, path, csv.as_deref(), &cfg, out)
        }
        Command::DumpSegments {
            window,
            out: dir,
            config,
        } => {
            let cfg = config.resolve(RunConfig::default())?;
            cmd_dump_segments(window, dir, &cfg, out)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("NEPTUNE_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow!("NEPTUNE_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = Outputs::default();
    match configure_threads().and_then(|_| run(cli, &mut out)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            out.discard();
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
