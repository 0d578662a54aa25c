use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use meshsplat::{ErrorClass, Vec3};

mod camera;
mod commands;

#[derive(Debug, Parser)]
#[command(
    name = "meshsplat",
    version,
    about = "Edit flat Gaussian scenes through a reference mesh"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "MESHSPLAT_THREADS")]
    threads: Option<usize>,

    /// Suppress counts and timings on stdout.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scene (.ply) to triangle soup (.obj or .ply plus an attribute sidecar).
    Encode { scene: PathBuf, soup: PathBuf },
    /// Triangle soup back to a scene (.ply).
    Decode { soup: PathBuf, scene: PathBuf },
    /// Carry an edit of the reference mesh over to a soup.
    Propagate(PropagateArgs),
    /// Area-weighted points on a mesh surface.
    Sample(SampleArgs),
    /// Orthographic preview of a scene as a binary PPM.
    Render(RenderArgs),
    /// Check any supported input and summarize it.
    Validate(ValidateArgs),
    /// Edit time against meshes of increasing face count.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct PropagateArgs {
    #[arg(long)]
    soup: PathBuf,
    /// Reference mesh the soup was built against.
    #[arg(long)]
    original: PathBuf,
    /// The same mesh after editing; faces must keep their order.
    #[arg(long)]
    edited: PathBuf,
    /// Edited soup.
    #[arg(long, required_unless_present = "scene")]
    out: Option<PathBuf>,
    /// Decode the edited soup straight to a scene file.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Per-triangle association table (TSV).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    mesh: PathBuf,
    /// `.ply` writes an initialized scene, anything else a TSV of points.
    out: PathBuf,
    #[arg(short, long, default_value_t = meshsplat::meshio::DEFAULT_SAMPLE_COUNT)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Analytic SDF config; adds distance, opacity and normal-loss columns.
    #[arg(long)]
    sdf: Option<PathBuf>,
    /// Bell sharpness for the SDF-conditioned opacity.
    #[arg(long, allow_hyphen_values = true, default_value_t = meshsplat::surface_prior::DEFAULT_BETA)]
    beta: f64,
    /// Scale the bell so that its peak is 1.
    #[arg(long)]
    normalize: bool,
}

#[derive(Debug, Args)]
struct RenderArgs {
    scene: PathBuf,
    /// Output image (.ppm).
    out: PathBuf,
    #[arg(long, default_value_t = 512)]
    width: usize,
    #[arg(long, default_value_t = 512)]
    height: usize,
    /// Viewing direction.
    #[arg(long, value_parser = vec3, default_value = "0,0,-1", allow_hyphen_values = true)]
    forward: Vec3,
    #[arg(long, value_parser = vec3, default_value = "0,1,0", allow_hyphen_values = true)]
    up: Vec3,
    /// Camera position; fitted to the scene when omitted.
    #[arg(long, value_parser = vec3, allow_hyphen_values = true)]
    position: Option<Vec3>,
    /// Visible width in world units; fitted to the scene when omitted.
    #[arg(long)]
    view_width: Option<f64>,
    #[arg(long, value_parser = vec3, default_value = "0,0,0")]
    background: Vec3,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    input: PathBuf,
    /// Also check that `input` is a valid edit of this mesh.
    #[arg(long)]
    against: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Target face counts (comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = meshsplat::bench::REFERENCE_FACE_COUNTS)]
    faces: Vec<usize>,
    #[arg(long, default_value_t = meshsplat::bench::DEFAULT_SOUP_SIZE)]
    soup_size: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Twist of the edit in radians per unit height.
    #[arg(long, default_value_t = 1.5)]
    twist: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn vec3(s: &str) -> Result<Vec3, String> {
    meshsplat::surface_prior::parse_vec3(s).ok_or_else(|| format!("expected x,y,z, got {s:?}"))
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Io => 2,
        ErrorClass::Validation => 3,
        ErrorClass::Numeric => 4,
    }
}

fn main() -> ExitCode {
    // Usage errors are input validation failures, not I/O.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(exit_code(ErrorClass::Validation));
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(exit_code(ErrorClass::Numeric));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .expect("global thread pool is configured once");
    }
    let out = commands::Output { quiet: cli.quiet };
    let result = match cli.command {
        Command::Encode { scene, soup } => commands::encode(&out, &scene, &soup),
        Command::Decode { soup, scene } => commands::decode(&out, &soup, &scene),
        Command::Propagate(a) => commands::propagate(&out, &a),
        Command::Sample(a) => commands::sample(&out, &a),
        Command::Render(a) => commands::render(&out, &a),
        Command::Validate(a) => commands::validate(&out, &a),
        Command::Bench(a) => commands::bench(&out, &a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
