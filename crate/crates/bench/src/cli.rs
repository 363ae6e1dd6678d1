//! Command-line interface. Exit codes: 0 success, 2 usage or validation
//! failure, 3 runtime I/O failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lodsplat::metrics::{self, redundancy_histogram, CalibrationReport, KpcHistogram};
use lodsplat::raster::{ShrinkKind, FIXED_TAU};
use lodsplat::scene::{save_scene_json, SceneError};
use lodsplat::tree::SyntheticSceneSpec;
use lodsplat::{build_tree, generate_synthetic_scene, Camera, FilterConfig, FilterKind, Image, LoDTree, RenderSettings, ShrinkMode, TreeBuildConfig};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use thiserror::Error;

use crate::path::PathFile;
use crate::report::{fmt_db, Aggregate, BenchReport, FrameRow};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "lodsplat", version, about = "LoD Gaussian-splat renderer and benchmark harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene (and optionally its LoD tree) from a JSON spec.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build an LoD tree over the level-0 nodes of a scene.
    BuildTree {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        depth: u32,
        #[arg(long)]
        gamma: f32,
        #[arg(long, default_value_t = 8)]
        children: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pre-render views and derive the adaptive shrink threshold.
    Calibrate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        views: PathBuf,
        #[arg(long = "lambda-g", default_value_t = 0.2)]
        lambda_g: f64,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render every frame of a camera path to PPM plus a timing report.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        path: PathBuf,
        #[arg(long, default_value = "parallel")]
        filter: FilterKind,
        #[arg(long, default_value = "3sigma")]
        shrink: ShrinkKind,
        /// Explicit shrink threshold (fixed defaults to 1/255).
        #[arg(long, conflicts_with = "calibration")]
        tau: Option<f64>,
        /// Calibration report providing the adaptive threshold.
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a filter × shrink matrix over a path; writes CSV and JSON reports.
    Bench {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        path: PathBuf,
        /// `FILTERS:SHRINKS`, e.g. `serial,parallel:3sigma,adaptive`.
        #[arg(long, default_value = "serial,parallel:3sigma,fixed,adaptive")]
        matrix: String,
        #[arg(long = "fixed-tau", default_value_t = FIXED_TAU)]
        fixed_tau: f64,
        #[arg(long = "adaptive-tau", conflicts_with = "calibration")]
        adaptive_tau: Option<f64>,
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print PSNR and SSIM between two PPM images.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, Args)]
pub struct Common {
    /// Pixel-radius threshold of the LoD filter.
    #[arg(long = "tau-r", default_value_t = lodsplat::filter::DEFAULT_TAU_R)]
    pub tau_r: f64,
    /// Worker-pool size for every stage; defaults to the available cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Common {
    fn filter_config(&self) -> Result<FilterConfig, CliError> {
        if !(self.tau_r > 0.0 && self.tau_r.is_finite()) {
            return Err(usage(format!("--tau-r must be positive, got {}", self.tau_r)));
        }
        let workers = match self.threads {
            Some(0) => return Err(usage("--threads must be at least 1")),
            Some(n) => n,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        Ok(FilterConfig { tau_r: self.tau_r, worker_count: workers })
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Gen { spec, out } => cmd_gen(&spec, &out),
        Command::BuildTree { scene, depth, gamma, children, seed, out } => {
            let cfg = TreeBuildConfig { depth, shrink_factor: gamma, children_per_node: children, seed };
            cmd_build_tree(&scene, &cfg, &out)
        }
        Command::Calibrate { scene, views, lambda_g, common, out } => cmd_calibrate(&scene, &views, lambda_g, &common, &out),
        Command::Render { scene, path, filter, shrink, tau, calibration, common, out } => {
            let mode = shrink_mode(shrink, tau, calibration.as_deref())?;
            cmd_render(&scene, &path, filter, mode, &common, &out)
        }
        Command::Bench { scene, path, matrix, fixed_tau, adaptive_tau, calibration, common, out } => {
            let (filters, shrinks) = parse_matrix(&matrix)?;
            let adaptive = if shrinks.contains(&ShrinkKind::Adaptive) {
                Some(adaptive_tau_from(adaptive_tau, calibration.as_deref())?)
            } else {
                None
            };
            let modes = shrinks
                .iter()
                .map(|k| match k {
                    ShrinkKind::ThreeSigma => ShrinkMode::ThreeSigma,
                    ShrinkKind::Fixed => ShrinkMode::Fixed(fixed_tau),
                    ShrinkKind::Adaptive => ShrinkMode::Adaptive(adaptive.unwrap()),
                })
                .collect::<Vec<_>>();
            cmd_bench(&scene, &path, &filters, &modes, &common, &out)
        }
        Command::Compare { a, b } => {
            let (p, s) = compare(&a, &b)?;
            println!("PSNR {} dB", fmt_db(p));
            println!("SSIM {s:.6}");
            Ok(())
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| io_err(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Parse JSON, naming the offending field on failure.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let bytes = read_bytes(path)?;
    let de = &mut serde_json::Deserializer::from_slice(&bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        CliError::Usage(format!("{}: field `{field}`: {}", path.display(), e.inner()))
    })
}

pub fn load_tree(path: &Path) -> Result<LoDTree, CliError> {
    lodsplat::load_scene(path).map_err(|e| match e {
        SceneError::Io(e) => io_err(path, e),
        other => usage(format!("{}: {other}", path.display())),
    })
}

fn save_tree(tree: &LoDTree, path: &Path) -> Result<(), CliError> {
    let r = if path.extension().is_some_and(|e| e == "json") {
        save_scene_json(tree, path)
    } else {
        lodsplat::save_scene(tree, path)
    };
    r.map_err(|e| match e {
        SceneError::Io(e) => io_err(path, e),
        other => usage(other),
    })
}

fn load_cameras(path: &Path) -> Result<Vec<Camera>, CliError> {
    let file: PathFile = read_json(path)?;
    file.cameras().map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Input of `gen`: root layout plus an optional tree configuration. Without
/// `tree` the roots are written as a single-level scene.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub scene: SyntheticSceneSpec,
    #[serde(default)]
    pub tree: Option<TreeBuildConfig>,
}

fn flat_tree(roots: Vec<lodsplat::GaussianNode>) -> LoDTree {
    let n = roots.len() as u32;
    LoDTree::from_parts(roots, vec![0, n], 0.5)
}

pub fn cmd_gen(spec: &Path, out: &Path) -> Result<(), CliError> {
    let spec: GenSpec = read_json(spec)?;
    let roots = generate_synthetic_scene(&spec.scene).map_err(usage)?;
    let tree = match spec.tree {
        Some(cfg) => build_tree(&roots, &cfg).map_err(|e| usage(format!("tree: {e}")))?,
        None => flat_tree(roots),
    };
    save_tree(&tree, out)?;
    println!("wrote {} nodes in {} levels to {}", tree.len(), tree.level_count(), out.display());
    Ok(())
}

pub fn cmd_build_tree(scene: &Path, cfg: &TreeBuildConfig, out: &Path) -> Result<(), CliError> {
    let input = load_tree(scene)?;
    let roots: Vec<_> = input.nodes()[input.level_range(0)].iter().map(|n| lodsplat::GaussianNode { leaf: true, ..*n }).collect();
    let tree = build_tree(&roots, cfg).map_err(usage)?;
    save_tree(&tree, out)?;
    println!("wrote {} nodes in {} levels to {}", tree.len(), tree.level_count(), out.display());
    Ok(())
}

pub fn cmd_calibrate(scene: &Path, views: &Path, lambda_g: f64, common: &Common, out: &Path) -> Result<(), CliError> {
    if !(lambda_g > 0.0 && lambda_g.is_finite()) {
        return Err(usage(format!("--lambda-g must be positive, got {lambda_g}")));
    }
    let config = common.filter_config()?;
    let tree = load_tree(scene)?;
    let cams = load_cameras(views)?;
    let report = metrics::calibrate(&tree, &cams, lambda_g, &config).map_err(usage)?;
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_bytes(out, text.as_bytes())?;
    println!("scene GTC {:.6}, tau {:.6}", report.scene_gtc, report.tau);
    Ok(())
}

fn adaptive_tau_from(tau: Option<f64>, calibration: Option<&Path>) -> Result<f64, CliError> {
    match (tau, calibration) {
        (Some(t), _) => Ok(t),
        (None, Some(p)) => Ok(read_json::<CalibrationReport>(p)?.tau),
        (None, None) => Err(usage("adaptive shrinking needs --calibration (or an explicit threshold)")),
    }
}

fn check_tau(tau: f64) -> Result<f64, CliError> {
    if tau > 0.0 && tau < 1.0 {
        Ok(tau)
    } else {
        Err(usage(format!("shrink threshold must lie in (0,1), got {tau}")))
    }
}

pub fn shrink_mode(kind: ShrinkKind, tau: Option<f64>, calibration: Option<&Path>) -> Result<ShrinkMode, CliError> {
    Ok(match kind {
        ShrinkKind::ThreeSigma => ShrinkMode::ThreeSigma,
        ShrinkKind::Fixed => ShrinkMode::Fixed(check_tau(tau.unwrap_or(FIXED_TAU))?),
        ShrinkKind::Adaptive => ShrinkMode::Adaptive(check_tau(adaptive_tau_from(tau, calibration)?)?),
    })
}

/// `FILTERS:SHRINKS` with comma-separated lists on each side.
pub fn parse_matrix(spec: &str) -> Result<(Vec<FilterKind>, Vec<ShrinkKind>), CliError> {
    let (f, s) = spec.split_once(':').ok_or_else(|| usage(format!("--matrix `{spec}`: expected FILTERS:SHRINKS")))?;
    let filters = f.split(',').map(|t| t.trim().parse::<FilterKind>()).collect::<Result<Vec<_>, _>>().map_err(usage)?;
    let shrinks = s.split(',').map(|t| t.trim().parse::<ShrinkKind>()).collect::<Result<Vec<_>, _>>().map_err(usage)?;
    Ok((filters, shrinks))
}

/// One rendered frame with its report row.
pub struct Frame {
    pub image: Image,
    pub row: FrameRow,
    pub histogram: KpcHistogram,
}

pub fn render_frame(tree: &LoDTree, cam: &Camera, index: usize, settings: &RenderSettings) -> Result<Frame, CliError> {
    let r = metrics::instrumented_render_with(tree, cam, settings).map_err(|e| usage(format!("frame {index}: {e}")))?;
    let histogram = redundancy_histogram(r.contributions.iter().map(|c| c.kpc));
    let row = FrameRow::new(index, settings.filter.name(), settings.shrink.name(), &r.output.stats, histogram.n_low());
    Ok(Frame { image: r.output.image, row, histogram })
}

pub fn frame_name(index: usize) -> String {
    format!("frame_{index:05}.ppm")
}

pub fn cmd_render(scene: &Path, path: &Path, filter: FilterKind, shrink: ShrinkMode, common: &Common, out: &Path) -> Result<(), CliError> {
    let config = common.filter_config()?;
    let tree = load_tree(scene)?;
    let cams = load_cameras(path)?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let settings = RenderSettings { filter, filter_config: config, shrink, collect_kpc: true };
    let mut rows = Vec::with_capacity(cams.len());
    let mut hist = KpcHistogram::default();
    for (i, cam) in cams.iter().enumerate() {
        let f = render_frame(&tree, cam, i, &settings)?;
        let file = out.join(frame_name(i));
        f.image.write_ppm(&file).map_err(|e| io_err(&file, e))?;
        hist.merge(&f.histogram);
        rows.push(f.row);
    }
    let agg = Aggregate::from_rows(&rows, shrink.tau(), None, hist);
    println!("{} frames, {:.2} FPS, mean N_P {:.1}", agg.frames, agg.fps, agg.mean_n_p);
    let report = BenchReport { rows, aggregates: vec![agg] };
    write_reports(&report, &out.join("report.csv"))
}

fn write_reports(report: &BenchReport, csv_path: &Path) -> Result<(), CliError> {
    report.write_csv(csv_path).map_err(|e| io_err(csv_path, e))?;
    let json = csv_path.with_extension("json");
    write_bytes(&json, report.to_json().as_bytes())?;
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let agg = csv_path.with_file_name(format!("{stem}_aggregate.csv"));
    report.write_aggregate_csv(&agg).map_err(|e| io_err(&agg, e))
}

/// Reference for quality columns: parallel filter, unshrunk extents.
fn reference_settings(config: FilterConfig) -> RenderSettings {
    RenderSettings { filter: FilterKind::Parallel, filter_config: config, shrink: ShrinkMode::ThreeSigma, collect_kpc: false }
}

pub fn cmd_bench(scene: &Path, path: &Path, filters: &[FilterKind], shrinks: &[ShrinkMode], common: &Common, out: &Path) -> Result<(), CliError> {
    let config = common.filter_config()?;
    for s in shrinks {
        if let Some(t) = s.tau() {
            check_tau(t)?;
        }
    }
    let tree = load_tree(scene)?;
    let cams = load_cameras(path)?;
    let reference: Vec<Image> = cams
        .iter()
        .map(|c| lodsplat::render(&tree, c, &reference_settings(config)).map(|o| o.image).map_err(usage))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    let mut aggregates = Vec::new();
    for &filter in filters {
        for &shrink in shrinks {
            let settings = RenderSettings { filter, filter_config: config, shrink, collect_kpc: true };
            let mut combo = Vec::with_capacity(cams.len());
            let mut hist = KpcHistogram::default();
            let (mut psnr_sum, mut ssim_sum) = (0.0, 0.0);
            for (i, cam) in cams.iter().enumerate() {
                let f = render_frame(&tree, cam, i, &settings)?;
                psnr_sum += metrics::psnr(&f.image, &reference[i]).map_err(usage)?;
                ssim_sum += metrics::ssim(&f.image, &reference[i]).map_err(usage)?;
                hist.merge(&f.histogram);
                combo.push(f.row);
            }
            let n = cams.len() as f64;
            let agg = Aggregate::from_rows(&combo, shrink.tau(), Some((psnr_sum / n, ssim_sum / n)), hist);
            println!(
                "{:>8} {:>8}: {:8.2} FPS  N_P {:10.1}  barriers {:.1}  PSNR {}",
                agg.filter_mode,
                agg.shrink_mode,
                agg.fps,
                agg.mean_n_p,
                agg.mean_barriers,
                fmt_db(psnr_sum / n)
            );
            rows.extend(combo);
            aggregates.push(agg);
        }
    }
    let csv_path = if out.extension().is_some_and(|e| e == "json") { out.with_extension("csv") } else { out.to_path_buf() };
    write_reports(&BenchReport { rows, aggregates }, &csv_path)
}

pub fn compare(a: &Path, b: &Path) -> Result<(f64, f64), CliError> {
    let read = |p: &Path| {
        Image::read_ppm(p).map_err(|e| match e {
            lodsplat::raster::PpmError::Io(e) => io_err(p, e),
            other => usage(format!("{}: {other}", p.display())),
        })
    };
    let (ia, ib) = (read(a)?, read(b)?);
    let p = metrics::psnr(&ia, &ib).map_err(usage)?;
    let s = metrics::ssim(&ia, &ib).map_err(usage)?;
    Ok((p, s))
}
