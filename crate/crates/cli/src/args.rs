use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage error (unknown flag, missing or inconsistent arguments)
  3  I/O error (missing or unwritable file)
  4  data-format error (malformed scan, calibration, pose, mask or manifest)
  5  numerical error (degenerate geometry, culled calibration frame)";

pub const DEFAULTS: &str = "\
Defaults:
  d-th 0.4 m, max-spread 2 deg, sigma 5 px, temporal-k 4 frames, template 32 px,
  search-radius 48 px, ncc-threshold 0.6, merge-radius 10 px, lr 1e-5,
  max-iters 20000, tol 1e-9, view-margin 40 px, min-area 3 px, overlap 0.2,
  obstacle-threshold 0.5";

#[derive(Debug, Parser)]
#[command(
    name = "smallobs",
    version,
    about = "Small on-road obstacle detection from LiDAR and camera"
)]
#[command(after_help = format!("{DEFAULTS}\n\n{EXIT_CODES}"))]
pub struct Cli {
    /// Worker threads; 0 uses every core. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Increase log detail on standard error (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ray-cast a scene description into a sequence directory.
    Simulate(SimulateArgs),
    /// Find small-obstacle segments in one scan.
    Detect(DetectArgs),
    /// Render the confidence map of one scan's detections.
    Confmap(ConfmapArgs),
    /// Refine LiDAR-camera extrinsics on annotated frames of a sequence.
    Calibrate(CalibrateArgs),
    /// Score predicted masks against ground truth.
    Evaluate(EvaluateArgs),
    /// Detect, render, aggregate over time and evaluate a whole sequence.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoadMode {
    /// Keep every segment.
    All,
    /// Keep segments between curbs found on each ring.
    Curbs,
    /// Keep segments that project onto road or obstacle pixels of a mask.
    Mask,
}

#[derive(Debug, Clone, Args)]
pub struct DetectionOpts {
    /// Breakpoint threshold, meters.
    #[arg(long, default_value_t = 0.4)]
    pub d_th: f64,
    /// Largest azimuthal spread of a segment, degrees.
    #[arg(long, default_value_t = 2.0)]
    pub max_spread: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TemporalOpts {
    /// Past frames remembered.
    #[arg(long = "temporal-k", default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 32)]
    pub template_size: u32,
    #[arg(long, default_value_t = 48)]
    pub search_radius: u32,
    #[arg(long, default_value_t = 0.6)]
    pub ncc_threshold: f64,
    #[arg(long, default_value_t = 10.0)]
    pub merge_radius: f64,
    /// Disable temporal aggregation.
    #[arg(long)]
    pub no_temporal: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub scan: PathBuf,
    /// Calibration file; required with `--road mask`.
    #[arg(long)]
    pub calib: Option<PathBuf>,
    /// Road segmentation mask for `--road mask`.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RoadMode::Curbs)]
    pub road: RoadMode,
    #[command(flatten)]
    pub detection: DetectionOpts,
    #[arg(long, default_value = "segments.txt")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConfmapArgs {
    #[arg(long)]
    pub scan: PathBuf,
    #[arg(long)]
    pub calib: PathBuf,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = RoadMode::Curbs)]
    pub road: RoadMode,
    #[command(flatten)]
    pub detection: DetectionOpts,
    /// Gaussian standard deviation, pixels.
    #[arg(long, default_value_t = 5.0)]
    pub sigma: f64,
    #[arg(long, default_value = "confmap.png")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Sequence directory with masks; its calibration is the starting point.
    #[arg(long)]
    pub seq: PathBuf,
    /// Comma-separated frame ids.
    #[arg(long, value_delimiter = ',', required = true)]
    pub frames: Vec<u32>,
    #[arg(long, default_value_t = 1e-5)]
    pub lr: f64,
    #[arg(long, default_value_t = 20000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Obstacle points must project this many pixels inside the image.
    #[arg(long, default_value_t = 40.0)]
    pub view_margin: f64,
    #[command(flatten)]
    pub detection: DetectionOpts,
    #[arg(long, default_value = "refined_calib.txt")]
    pub out: PathBuf,
    /// Loss trace; defaults to `<out>.log`.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory of predicted masks.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth masks with the same file names.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub min_area: usize,
    #[arg(long, default_value_t = 0.2)]
    pub overlap: f64,
    #[arg(long, default_value = "report.txt")]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub seq: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Road filter; `mask` uses the sequence masks.
    #[arg(long, value_enum, default_value_t = RoadMode::Mask)]
    pub road: RoadMode,
    #[command(flatten)]
    pub detection: DetectionOpts,
    #[arg(long, default_value_t = 5.0)]
    pub sigma: f64,
    #[command(flatten)]
    pub temporal: TemporalOpts,
    /// Confidence at or above which a pixel is predicted as obstacle.
    #[arg(long, default_value_t = 0.5)]
    pub obstacle_threshold: f32,
    #[arg(long, default_value_t = 3)]
    pub min_area: usize,
    #[arg(long, default_value_t = 0.2)]
    pub overlap: f64,
}
