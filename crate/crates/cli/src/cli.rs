//! Argument parsing and I/O around [`crate::commands`]. A path of `-` means
//! stdin or stdout.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::{self, RefineOptions};
use crate::error::CliError;
use crate::formats::{MotionFile, SkeletonRef, SkeletonSpec};
use crate::synth::{generate, CameraMode, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "gravview", version, about = "Gravity-view trajectory recovery, refinement and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file, `-` for stdout.
    #[arg(long, short, default_value = "-")]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic sequence bundle (gvsynth/1).
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON synth configuration; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long, value_enum)]
        camera_mode: Option<CameraModeArg>,
        #[command(flatten)]
        out: Output,
    },
    /// Roll out the world trajectory from observations (gvobs/1 plus
    /// gvcamera/1, or a gvsynth/1 bundle) and write a gvmotion/1 file.
    Recover {
        #[arg(long, short, default_value = "-")]
        input: PathBuf,
        #[arg(long)]
        camera: Option<PathBuf>,
        /// Bundled skeleton name or a JSON skeleton file.
        #[arg(long)]
        skeleton: Option<String>,
        #[command(flatten)]
        out: Output,
    },
    /// Foot-contact refinement of a gvmotion/1 file.
    Refine {
        #[arg(long, short, default_value = "-")]
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        contact_threshold: f64,
        #[arg(long, default_value_t = 50)]
        ik_iters: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Score a predicted gvmotion/1 against a reference motion or bundle.
    Eval {
        #[arg(long, short, default_value = "-")]
        input: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, default_value_t = 100)]
        segment_len: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Encoder checksums of the seeded demo transformer.
    AttendDemo {
        #[arg(long, default_value_t = 48)]
        frames: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = 7)]
        input_seed: u64,
        /// Attention band L.
        #[arg(long)]
        train_len: Option<usize>,
        #[command(flatten)]
        out: Output,
    },
    /// Single-frame CCD IK from a gvik/1 request.
    IkSolve {
        #[arg(long, short, default_value = "-")]
        input: PathBuf,
        #[arg(long)]
        skeleton: Option<String>,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CameraModeArg {
    Static,
    Orbit,
    Handheld,
}

impl From<CameraModeArg> for CameraMode {
    fn from(m: CameraModeArg) -> Self {
        match m {
            CameraModeArg::Static => CameraMode::Static,
            CameraModeArg::Orbit => CameraMode::Orbit,
            CameraModeArg::Handheld => CameraMode::Handheld,
        }
    }
}

fn verbose() -> bool {
    std::env::var("GRAVVIEW_LOG").is_ok_and(|v| !v.is_empty() && v != "0" && v != "off")
}

fn log(msg: impl FnOnce() -> String) {
    if verbose() {
        eprintln!("gravview: {}", msg());
    }
}

fn display_name(path: &Path) -> String {
    if path == Path::new("-") {
        "<stdin>".into()
    } else {
        path.display().to_string()
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(io)?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).map_err(io)
    }
}

fn write_output(out: &Output, text: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: out.output.clone(), source };
    if out.output == Path::new("-") {
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(io)
    } else {
        std::fs::write(&out.output, text).map_err(io)
    }
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn skeleton_arg(arg: &str) -> Result<SkeletonRef, CliError> {
    let path = Path::new(arg);
    let named = SkeletonRef::Named(arg.to_string());
    if named.resolve().is_ok() || !path.exists() {
        named.resolve().map_err(|e| CliError::Validation(format!("--skeleton: {e}")))?;
        return Ok(named);
    }
    let text = read_input(path)?;
    let spec: SkeletonSpec = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        source_name: arg.to_string(),
        location: format!("line {}, column {}", e.line(), e.column()),
        detail: e.to_string(),
    })?;
    let r = SkeletonRef::Inline(spec);
    r.resolve().map_err(|e| CliError::invalid(arg, e))?;
    Ok(r)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth { seed, config, frames, camera_mode, out } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = read_input(path)?;
                    let mut de = serde_json::Deserializer::from_str(&text);
                    serde_path_to_error::deserialize::<_, SynthConfig>(&mut de).map_err(|e| CliError::Parse {
                        source_name: display_name(path),
                        location: e.path().to_string(),
                        detail: e.into_inner().to_string(),
                    })?
                }
                None => SynthConfig::default(),
            };
            if let Some(n) = frames {
                cfg.frames = *n;
            }
            if let Some(m) = camera_mode {
                cfg.camera_mode = (*m).into();
            }
            let bundle = generate(&cfg, *seed)?;
            log(|| format!("synth: {} frames, {:?} camera, seed {seed}", cfg.frames, cfg.camera_mode));
            write_output(out, &bundle.to_json_string("synth")?)
        }
        Command::Recover { input, camera, skeleton, out } => {
            let text = read_input(input)?;
            let cam = camera.as_ref().map(|p| Ok::<_, CliError>((read_input(p)?, display_name(p)))).transpose()?;
            let (mut obs, cam) = commands::load_recover_inputs(
                &text,
                &display_name(input),
                cam.as_ref().map(|(t, n)| (t.as_str(), n.as_str())),
            )?;
            if let Some(s) = skeleton {
                obs.skeleton = skeleton_arg(s)?;
                obs.validate(&display_name(input))?;
            }
            let start = std::time::Instant::now();
            let motion = commands::recover(&obs, &cam)?;
            log(|| format!("recover: {} frames in {:.1} ms", motion.frames, start.elapsed().as_secs_f64() * 1e3));
            write_output(out, &motion.to_json_string("recover")?)
        }
        Command::Refine { input, contact_threshold, ik_iters, out } => {
            let name = display_name(input);
            let motion = MotionFile::from_json_str(&read_input(input)?, &name)?;
            let opts = RefineOptions { contact_threshold: *contact_threshold, ik_iters: *ik_iters, ..RefineOptions::default() };
            let refined = commands::refine(&motion, &opts, &name)?;
            write_output(out, &refined.to_json_string("refine")?)
        }
        Command::Eval { input, reference, segment_len, out } => {
            let pred = MotionFile::from_json_str(&read_input(input)?, &display_name(input))?;
            let reference = commands::load_reference(&read_input(reference)?, &display_name(reference))?;
            if *segment_len == 0 {
                return Err(CliError::Validation("--segment-len must be positive".into()));
            }
            let metrics = commands::eval(&pred, &reference, *segment_len)?;
            write_output(out, &json(&metrics))
        }
        Command::AttendDemo { frames, seed, input_seed, train_len, out } => {
            if *frames == 0 {
                return Err(CliError::Validation("--frames must be positive".into()));
            }
            let demo = commands::attend_demo(*frames, *seed, *input_seed, *train_len)?;
            write_output(out, &json(&demo))
        }
        Command::IkSolve { input, skeleton, out } => {
            let name = display_name(input);
            let mut req = commands::parse_ik_request(&read_input(input)?, &name)?;
            if let Some(s) = skeleton {
                req.skeleton = skeleton_arg(s)?;
            }
            let result = commands::ik_solve(&req, &name)?;
            write_output(out, &json(&result))
        }
    }
}
