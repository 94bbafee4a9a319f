//! `wallstrain` command-line driver.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wallstrain::io;
use wallstrain::perturb::WALL_THICKNESS_MM;
use wallstrain::phantom::GridSpec;
use wallstrain::{
    analytic_strain, compute_strain, estimate_all_frames, make_field, make_phantom_cloud, perturb, run_sweep, Error,
    FieldKind, FieldSpec, PerturbationSpec, PhantomSpec, Result, SurfaceFitParams,
};

#[derive(Parser)]
#[command(name = "wallstrain", version, about = "Local wall strain under surface perturbations")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an analytic phantom: cloud.csv, field.json/field.bin, strain.csv.
    Phantom(PhantomArgs),
    /// Estimate per-point frames and radii.
    Frames(FramesArgs),
    /// Strain of a displacement field on a reference cloud.
    Strain(StrainArgs),
    /// Offset a cloud along its reference normals.
    Perturb(PerturbArgs),
    /// Run a perturbation sweep described by a TOML file.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Sphere,
    Cylinder,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    radius: f64,
    #[arg(long)]
    points: usize,
    /// Cylinder length in mm.
    #[arg(long)]
    length: Option<f64>,
    /// `constant-radial:M` or `linear-radial:M`, magnitude in mm.
    #[arg(long, default_value = "constant-radial:0.5")]
    field: String,
    /// Grid spacing in mm.
    #[arg(long, default_value_t = 1.0)]
    grid: f64,
    /// Transition-zone band width in mm.
    #[arg(long, default_value_t = 0.0)]
    band: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FramesArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long, default_value_t = 30)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    /// Inlier distance threshold in mm.
    #[arg(long, default_value_t = 0.3)]
    threshold: f64,
    #[arg(long, default_value_t = 0.5)]
    min_inliers: f64,
    /// Radius clamp in mm.
    #[arg(long, default_value_t = 300.0)]
    r_max: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StrainArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    frames: PathBuf,
    /// Field header file.
    #[arg(long)]
    field: PathBuf,
    /// Report inward displacement as positive strain.
    #[arg(long)]
    negate: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PerturbArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    frames: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    sigma: f64,
    #[arg(long, allow_hyphen_values = true)]
    mu: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = WALL_THICKNESS_MM)]
    thickness: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn parse_field(text: &str, phantom: &PhantomSpec) -> Result<FieldKind> {
    let bad = || Error::Config(format!("field must be constant-radial:M or linear-radial:M, got {text:?}"));
    let (name, value) = text.split_once(':').ok_or_else(bad)?;
    let m: f64 = value.trim().parse().map_err(|_| bad())?;
    if !m.is_finite() {
        return Err(bad());
    }
    match name {
        "constant-radial" => Ok(FieldKind::constant_radial_for(phantom, m)),
        "linear-radial" => Ok(FieldKind::linear_radial_for(phantom, m)),
        _ => Err(bad()),
    }
}

fn run_phantom(a: &PhantomArgs) -> Result<()> {
    let mut spec = match a.kind {
        Kind::Sphere => PhantomSpec::sphere(a.radius, a.points),
        Kind::Cylinder => {
            let length = a
                .length
                .ok_or_else(|| Error::Config("--length is required for cylinders".into()))?;
            PhantomSpec::cylinder(a.radius, length, a.points)
        }
    };
    spec.transition_band_mm = a.band;
    spec.seed = a.seed;
    if !(a.grid > 0.0 && a.grid.is_finite()) {
        return Err(Error::Config("--grid must be positive".into()));
    }
    let cloud = make_phantom_cloud(&spec)?;
    let field_spec = FieldSpec {
        kind: parse_field(&a.field, &spec)?,
        grid: GridSpec::covering(&spec, a.grid, 0.0),
    };
    let field = make_field(&field_spec, &spec)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    io::write_cloud(&cloud, &a.out.join("cloud.csv"))?;
    io::write_field(&field, &a.out.join("field.json"))?;
    match analytic_strain(&spec, &field_spec) {
        Ok(strain) => io::write_strain(&strain, &a.out.join("strain.csv")),
        Err(Error::NoClosedForm) => Ok(()),
        Err(e) => Err(e),
    }
}

fn run_frames(a: &FramesArgs) -> Result<()> {
    let cloud = io::read_cloud(&a.cloud)?;
    let params = SurfaceFitParams {
        k_neighbors: a.k,
        mlesac_iterations: a.iterations,
        inlier_threshold_mm: a.threshold,
        min_inlier_fraction: a.min_inliers,
        r_max_mm: a.r_max,
        rng_seed: a.seed,
    };
    let frames = estimate_all_frames(&cloud, &params)?;
    io::write_frames(&frames, &a.out)
}

fn run_strain(a: &StrainArgs) -> Result<()> {
    let cloud = io::read_cloud(&a.cloud)?;
    let frames = io::read_frames(&a.frames)?;
    let field = io::read_field(&a.field)?;
    let mut strain = compute_strain(&cloud, &frames, &field, cloud.labels())?;
    if a.negate {
        strain = strain.negated();
    }
    io::write_strain(&strain, &a.out)
}

fn run_perturb(a: &PerturbArgs) -> Result<()> {
    let cloud = io::read_cloud(&a.cloud)?;
    let frames = io::read_frames(&a.frames)?;
    let spec = PerturbationSpec {
        wall_thickness_mm: a.thickness,
        ..PerturbationSpec::new(a.sigma, a.mu, a.seed)
    };
    io::write_cloud(&perturb(&cloud, &frames, &spec)?, &a.out)
}

fn run_sweep_cmd(a: &SweepArgs) -> Result<()> {
    let file = io::read_sweep_config(&a.config)?;
    let config = file.sweep_config()?;
    let cloud = io::read_cloud(&file.cloud)?;
    let frames = io::read_frames(&file.frames)?;
    let field = io::read_field(&file.field)?;
    let outcome = run_sweep(&cloud, &frames, &field, &config)?;
    io::write_sweep_reports(&a.out, &outcome, &config, &frames, file.scatter)?;
    let failed = outcome.cells.iter().filter(|c| c.failed()).count();
    println!(
        "{} cells, {failed} failed, reports in {}",
        outcome.cells.len(),
        a.out.display()
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Phantom(a) => run_phantom(a),
        Command::Frames(a) => run_frames(a),
        Command::Strain(a) => run_strain(a),
        Command::Perturb(a) => run_perturb(a),
        Command::Sweep(a) => run_sweep_cmd(a),
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("error: usage: {}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.kind(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
