use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bevtrack::bev::{render_heatmap, DEFAULT_SIGMA_CELLS};
use bevtrack::geometry::GroundGrid;
use bevtrack::io::{self, AnyFrame};
use bevtrack::metrics::{evaluate, ModpMode, DEFAULT_DET_RADIUS, DEFAULT_TRACK_RADIUS};
use bevtrack::pipeline::{self, PipelineConfig, PipelineError};
use bevtrack::plot;
use bevtrack::sim::Preset;
use clap::{Parser, Subcommand, ValueEnum};

const OUT_DIR_ENV: &str = "BEVTRACK_OUT_DIR";

#[derive(Parser)]
#[command(name = "bevtrack", version, about = "Multi-view BEV pedestrian tracking toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate ground truth, detections and calibration from a config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (falls back to $BEVTRACK_OUT_DIR, then the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Track a detections file into a tracks CSV.
    Track {
        #[arg(long)]
        detections: PathBuf,
        /// Tracker config, or a full pipeline config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score tracks (and optionally detections) against ground truth.
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        detections: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_DET_RADIUS)]
        det_r: f64,
        #[arg(long, default_value_t = DEFAULT_TRACK_RADIUS)]
        track_r: f64,
        #[arg(long, value_enum, default_value_t = Modp::Normalized)]
        modp: Modp,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Map an image point of one camera onto the ground plane.
    Project {
        #[arg(long)]
        calib: PathBuf,
        /// Pixel coordinates as `u,v`.
        #[arg(long, value_parser = parse_pair)]
        uv: (f64, f64),
        /// Camera id; defaults to the first camera in the file.
        #[arg(long)]
        camera: Option<i64>,
        /// Snap slightly non-orthonormal rotations to the nearest rotation.
        #[arg(long)]
        reorthonormalize: bool,
    },
    /// Render SVG or PGM figures.
    #[command(subcommand)]
    Plot(PlotCommand),
    /// Simulate, track and evaluate in one go.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PlotCommand {
    /// One colored polyline per track, ground truth in gray underneath.
    Tracks {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[command(flatten)]
        area: AreaArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rendered occupancy map of one frame of a ground-truth or detections file.
    Heatmap {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        frame: u32,
        #[command(flatten)]
        area: AreaArgs,
        #[arg(long, default_value_t = 0.1)]
        cell_size: f64,
        #[arg(long, default_value_t = DEFAULT_SIGMA_CELLS)]
        sigma: f64,
        /// Output format; inferred from the extension when omitted.
        #[arg(long, value_enum)]
        format: Option<ImageFormat>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct AreaArgs {
    /// Scene preset supplying the plotted area.
    #[arg(long, default_value = "wildtrack-like")]
    preset: Preset,
    /// Explicit area extent `x,y` in meters; overrides the preset.
    #[arg(long, value_parser = parse_pair)]
    area: Option<(f64, f64)>,
}

impl AreaArgs {
    fn extent(&self) -> (f64, f64) {
        self.area.unwrap_or_else(|| self.preset.area())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Modp {
    Normalized,
    MeanDistance,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ImageFormat {
    Pgm,
    Svg,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `a,b`, got `{s}`"))?;
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Self {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

impl From<io::FormatError> for Failure {
    fn from(e: io::FormatError) -> Self {
        Self::runtime(e.to_string())
    }
}

fn env_dir() -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// `--out`, then `$BEVTRACK_OUT_DIR`, then the config's `output_dir`.
fn resolve_dir(flag: Option<PathBuf>, config: Option<&PipelineConfig>) -> Result<PathBuf, Failure> {
    flag.or_else(env_dir)
        .or_else(|| config.and_then(|c| c.output_dir.clone()))
        .ok_or_else(|| Failure::usage(format!("no output directory: pass --out or set {OUT_DIR_ENV}")))
}

/// `--out`, then `$BEVTRACK_OUT_DIR/<default_name>`.
fn resolve_file(flag: Option<PathBuf>, default_name: &str) -> Option<PathBuf> {
    flag.or_else(|| env_dir().map(|d| d.join(default_name)))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Failure::runtime(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, bytes).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

fn print_report(report: &bevtrack::metrics::MetricsReport) {
    println!("{}", bevtrack::metrics::MetricsReport::TSV_HEADER);
    println!("{}", report.to_tsv());
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = PipelineConfig::load(&config)?;
            let dir = resolve_dir(out, Some(&cfg))?;
            let sim = pipeline::simulate(&cfg)?;
            pipeline::write_simulation(&sim, &dir)?;
            eprintln!("wrote {}", dir.display());
        }
        Command::Track { detections, config, out } => {
            let cfg = match config {
                Some(path) => pipeline::load_tracker_config(&path)?,
                None => Default::default(),
            };
            let out = resolve_file(out, pipeline::TRACKS_FILE)
                .ok_or_else(|| Failure::usage(format!("no output file: pass --out or set {OUT_DIR_ENV}")))?;
            let frames = io::read_detections(&detections)?;
            let rows = pipeline::track_frames(&frames, &cfg)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| Failure::runtime(format!("{}: {e}", parent.display())))?;
            }
            io::write_tracks(&out, &rows)?;
        }
        Command::Evaluate {
            gt,
            tracks,
            detections,
            det_r,
            track_r,
            modp,
            out,
        } => {
            for (name, v) in [("--det-r", det_r), ("--track-r", track_r)] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Failure::usage(format!("{name} must be positive, got {v}")));
                }
            }
            let gt = io::read_gt(&gt)?;
            let tracks = io::tracks_to_set(&io::read_tracks(&tracks)?);
            let det_points = match detections {
                Some(path) => Some(io::detection_points(&io::read_detections(&path)?)),
                None => None,
            };
            let mode = match modp {
                Modp::Normalized => ModpMode::Normalized,
                Modp::MeanDistance => ModpMode::MeanDistance,
            };
            let report = evaluate(&gt, &tracks, det_points.as_ref(), det_r, track_r, mode)
                .map_err(|e| Failure::runtime(e.to_string()))?;
            if let Some(out) = resolve_file(out, pipeline::METRICS_FILE) {
                pipeline::write_metrics(&out, &report)?;
            }
            print_report(&report);
        }
        Command::Project {
            calib,
            uv: (u, v),
            camera,
            reorthonormalize,
        } => {
            let cams = io::read_calibration(&calib, reorthonormalize).map_err(|e| match e {
                io::FormatError::Io { .. } => Failure::runtime(e.to_string()),
                _ => Failure::usage(e.to_string()),
            })?;
            let (id, cam) = match camera {
                Some(id) => cams
                    .iter()
                    .find(|(i, _)| *i == id)
                    .ok_or_else(|| Failure::usage(format!("camera {id} not in {}", calib.display())))?,
                None => cams
                    .first()
                    .ok_or_else(|| Failure::usage(format!("{} lists no cameras", calib.display())))?,
            };
            let [x, y] = cam
                .project_image_to_ground(u, v)
                .map_err(|e| Failure::runtime(format!("camera {id}: {e}")))?;
            println!("{x:.6} {y:.6}");
        }
        Command::Plot(PlotCommand::Tracks { tracks, gt, area, out }) => {
            let out = resolve_file(out, "tracks.svg")
                .ok_or_else(|| Failure::usage(format!("no output file: pass --out or set {OUT_DIR_ENV}")))?;
            let tracks = io::tracks_to_set(&io::read_tracks(&tracks)?);
            let gt = match gt {
                Some(path) => Some(io::read_gt(&path)?),
                None => None,
            };
            let (ax, ay) = area.extent();
            write_file(&out, plot::tracks_svg(&tracks, gt.as_ref(), ax, ay).as_bytes())?;
        }
        Command::Plot(PlotCommand::Heatmap {
            input,
            frame,
            area,
            cell_size,
            sigma,
            format,
            out,
        }) => {
            let out = resolve_file(out, "heatmap.pgm")
                .ok_or_else(|| Failure::usage(format!("no output file: pass --out or set {OUT_DIR_ENV}")))?;
            let format = format.unwrap_or_else(|| {
                if out.extension().is_some_and(|e| e.eq_ignore_ascii_case("svg")) {
                    ImageFormat::Svg
                } else {
                    ImageFormat::Pgm
                }
            });
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Failure::usage(format!("--sigma must be positive, got {sigma}")));
            }
            let (ax, ay) = area.extent();
            let grid = GroundGrid::covering(ax, ay, cell_size).map_err(|e| Failure::usage(e.to_string()))?;
            let frames: Vec<AnyFrame> = io::read_jsonl(&input)?;
            let selected = frames.iter().find(|f| f.frame() == frame).ok_or_else(|| {
                let last = frames.iter().map(AnyFrame::frame).max();
                Failure::usage(match last {
                    Some(last) => format!("frame {frame} not in {} (frames up to {last})", input.display()),
                    None => format!("{} has no frames", input.display()),
                })
            })?;
            let map = render_heatmap(&selected.points(), &grid, sigma);
            let bytes = match format {
                ImageFormat::Pgm => plot::heatmap_pgm(&map),
                ImageFormat::Svg => plot::heatmap_svg(&map, 2.0).into_bytes(),
            };
            write_file(&out, &bytes)?;
        }
        Command::Run { config, out } => {
            let cfg = PipelineConfig::load(&config)?;
            let dir = resolve_dir(out, Some(&cfg))?;
            let report = pipeline::run_pipeline(&cfg, &dir)?;
            print_report(&report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
