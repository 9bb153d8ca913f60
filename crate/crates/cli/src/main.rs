mod commands;
mod failure;
mod inputs;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dentreg::arch::Jaw;

use failure::Failure;

/// Tooth-aware registration of intraoral scans to CBCT tooth surfaces.
#[derive(Debug, Parser)]
#[command(name = "dentreg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic IOS / CBCT pair with ground truth.
    Synth(SynthArgs),
    /// Global alignment followed by tooth-aware ICP.
    Register(RegisterArgs),
    /// Per-tooth stitching correction under a given registration.
    Correct(CorrectArgs),
    /// Register, correct and report in one run.
    Integrate(IntegrateArgs),
    /// Accuracy of given transforms as a JSON report.
    Eval(EvalArgs),
    /// Occlusal relief and depth images of a mesh.
    Project(ProjectArgs),
    /// Vertex indices under each bounding box.
    Rois(RoisArgs),
    /// Universal tooth codes for bounding boxes, written as a label file.
    Identify(IdentifyArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "mandible")]
    jaw: Jaw,
    #[arg(long, default_value_t = 14)]
    teeth: usize,
    /// Approximate vertex count of a full tooth.
    #[arg(long, default_value_t = 600)]
    points: usize,
    /// Approximate vertex count of the gingiva ribbon.
    #[arg(long, default_value_t = 1200)]
    gingiva: usize,
    /// Surface noise sigma, mm.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Per-tooth drift rotation sigma, rad.
    #[arg(long, default_value_t = 0.0)]
    drift_rot: f64,
    /// Per-tooth drift translation sigma, mm.
    #[arg(long, default_value_t = 0.0)]
    drift_trans: f64,
    /// Largest global offset rotation, degrees.
    #[arg(long, default_value_t = 30.0)]
    offset_angle: f64,
    /// Largest global offset translation, mm.
    #[arg(long, default_value_t = 50.0)]
    offset_trans: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Pipeline parameters shared by the registration commands.
#[derive(Debug, Clone, Args)]
struct RegFlags {
    /// Edge-ratio threshold of the triplet filter, in (0.5, 1).
    #[arg(long, default_value_t = 0.9)]
    tau: f64,
    /// Neighbourhood size of the point feature histograms.
    #[arg(long, default_value_t = 30)]
    k: usize,
    /// ICP stop threshold on the mean residual, mm.
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Seed of the triplet sampler.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Match across tooth codes (plain ICP).
    #[arg(long)]
    no_label_constraint: bool,
}

#[derive(Debug, Clone, Args)]
struct ArchInputs {
    #[arg(long)]
    source_mesh: PathBuf,
    #[arg(long)]
    source_labels: PathBuf,
    #[arg(long)]
    target_mesh: Option<PathBuf>,
    #[arg(long)]
    target_labels: Option<PathBuf>,
    /// CBCT tooth mask, repeatable, instead of a labelled target mesh.
    #[arg(long = "target-mask", value_name = "CODE=PATH")]
    target_masks: Vec<String>,
}

#[derive(Debug, Args)]
struct RegisterArgs {
    #[command(flatten)]
    inputs: ArchInputs,
    #[command(flatten)]
    reg: RegFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CorrectArgs {
    #[command(flatten)]
    inputs: ArchInputs,
    #[command(flatten)]
    reg: RegFlags,
    /// Registration transform of the source arch.
    #[arg(long)]
    transform: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct LandmarkInputs {
    #[arg(long, requires = "target_landmarks")]
    source_landmarks: Option<PathBuf>,
    #[arg(long, requires = "source_landmarks")]
    target_landmarks: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IntegrateArgs {
    #[command(flatten)]
    inputs: ArchInputs,
    #[command(flatten)]
    reg: RegFlags,
    #[command(flatten)]
    landmarks: LandmarkInputs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    inputs: ArchInputs,
    #[arg(long)]
    transform: PathBuf,
    /// Per-tooth transforms; evaluated as the corrected stage.
    #[arg(long)]
    tooth_transforms: Option<PathBuf>,
    #[command(flatten)]
    landmarks: LandmarkInputs,
    /// Report file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct ImageFlags {
    #[arg(long, default_value_t = 400)]
    width: usize,
    #[arg(long, default_value_t = 400)]
    height: usize,
    /// Pixel spacing, mm.
    #[arg(long, default_value_t = 0.2)]
    spacing: f64,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[command(flatten)]
    image: ImageFlags,
    /// Splat vertices instead of rasterising triangles.
    #[arg(long)]
    points: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RoisArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    boxes: PathBuf,
    #[command(flatten)]
    image: ImageFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IdentifyArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    boxes: PathBuf,
    #[arg(long)]
    jaw: Jaw,
    #[command(flatten)]
    image: ImageFlags,
    #[arg(long)]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Register(a) => commands::register(&a),
        Command::Correct(a) => commands::correct(&a),
        Command::Integrate(a) => commands::integrate(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Project(a) => commands::project(&a),
        Command::Rois(a) => commands::rois(&a),
        Command::Identify(a) => commands::identify(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.exit_code())
        }
    }
}
