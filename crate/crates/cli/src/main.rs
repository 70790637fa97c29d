//! `diffeo` — command-line front end for the deformation-field toolkit.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/processing error.

mod config;
mod render;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use diffeo_core::atlas::{build_atlas, AtlasOptions};
use diffeo_core::average::average_transformations;
use diffeo_core::diffgeo;
use diffeo_core::features;
use diffeo_core::fields::{compose, warp, FieldKind, Grid3, ScalarKind, ScalarVolume, VectorField};
use diffeo_core::metrics;
use diffeo_core::nifti;
use diffeo_core::register::register;
use diffeo_core::svf;
use diffeo_core::synth;
use diffeo_core::varsolve::{reconstruct, MonitorPair};

use config::{Config, RegisterFlags, SolveFlags};
use render::SliceAxis;

#[derive(Parser)]
#[command(name = "diffeo", version, about = "3D deformation-field toolkit", max_term_width = 100)]
struct Cli {
    /// Worker threads for voxel loops (0 = all cores). Falls back to the
    /// DIFFEO_THREADS environment variable. Results are identical for any
    /// value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// JSON config file with option defaults (flags take precedence).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Jacobian determinant of a deformation field
    Jd(JdArgs),
    /// Curl of a deformation field
    Curl(CurlArgs),
    /// Fraction of voxels with non-positive Jacobian determinant
    Negjac(NegjacArgs),
    /// Exponentiate a stationary velocity field (scaling and squaring)
    Exp(ExpArgs),
    /// Reconstruct a transformation from prescribed determinant/curl maps
    Reconstruct(ReconstructArgs),
    /// Register a moving volume onto a fixed volume
    Register(RegisterArgs),
    /// Average transformations via their determinant/curl content
    Average(AverageArgs),
    /// Build a template volume from a cohort of subjects
    Atlas(AtlasArgs),
    /// Dice overlap of two label volumes
    Dice(DiceArgs),
    /// Half mean squared intensity difference of two volumes
    Ssd(SsdArgs),
    /// Export 5-channel feature stacks (image + determinant + curl)
    Features(FeaturesArgs),
    /// Warp a volume by a transformation
    Warp(WarpArgs),
    /// Compose two transformations (outer after inner)
    Compose(ComposeArgs),
    /// Generate synthetic volumes and fields
    Synth(SynthArgs),
    /// Export a 2D slice as PNG (grayscale volume / RGB field)
    Slice(SliceArgs),
}

#[derive(Args)]
struct JdArgs {
    /// Input field (transformation or displacement)
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Store float64 instead of float32
    #[arg(long)]
    f64: bool,
}

#[derive(Args)]
struct CurlArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NegjacArgs {
    /// Jacobian-determinant volume (from `jd`)
    #[arg(long = "in")]
    input: PathBuf,
    /// Label volume; nonzero entries mark non-background
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ExpArgs {
    /// Input velocity field
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Squaring steps
    #[arg(long, default_value_t = svf::DEFAULT_STEPS)]
    steps: usize,
    /// Exponentiate the negated velocity (inverse map)
    #[arg(long)]
    inverse: bool,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Prescribed Jacobian-determinant volume
    #[arg(long)]
    f0: PathBuf,
    /// Prescribed curl field
    #[arg(long)]
    g0: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write the solve report as JSON
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print the solve report as JSON on stdout
    #[arg(long)]
    json: bool,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    curl_weight: Option<f64>,
    #[arg(long)]
    tol_abs: Option<f64>,
    #[arg(long)]
    tol_rel: Option<f64>,
}

#[derive(Args)]
struct RegisterArgs {
    #[arg(long)]
    moving: PathBuf,
    #[arg(long)]
    fixed: PathBuf,
    /// Output path for the stationary velocity
    #[arg(long)]
    out_velocity: Option<PathBuf>,
    /// Output path for the transformation
    #[arg(long)]
    out_field: Option<PathBuf>,
    /// Output path for the warped moving volume
    #[arg(long)]
    out_warped: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    svf_steps: Option<usize>,
    #[arg(long)]
    lambda_reg: Option<f64>,
}

#[derive(Args)]
struct AverageArgs {
    /// Input transformation fields (two or more recommended)
    #[arg(required = true)]
    fields: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    curl_weight: Option<f64>,
    #[arg(long)]
    tol_abs: Option<f64>,
    #[arg(long)]
    tol_rel: Option<f64>,
}

#[derive(Args)]
struct AtlasArgs {
    /// Subject volumes (at least two)
    #[arg(required = true)]
    subjects: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    json: bool,
    /// Convergence threshold on the mean displacement (voxels)
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_outer_iters: Option<usize>,
    /// Evolve only this candidate index (cheap variant)
    #[arg(long)]
    single_candidate: Option<usize>,
    /// Directory for the per-iteration average fields
    #[arg(long)]
    save_fields: Option<PathBuf>,
    #[arg(long)]
    reg_levels: Option<usize>,
    #[arg(long)]
    reg_iters: Option<usize>,
    #[arg(long)]
    solve_iters: Option<usize>,
}

#[derive(Args)]
struct DiceArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Single label to score; default scores all labels plus the mean
    #[arg(long)]
    label: Option<u32>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SsdArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    image: PathBuf,
    /// Transformation field(s); repeat for the fixed-side average
    #[arg(long = "field", required = true)]
    fields: Vec<PathBuf>,
    /// moving: one field, its own geometry; fixed: channel-wise mean
    #[arg(long, value_parser = ["moving", "fixed"])]
    mode: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct WarpArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    field: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Force nearest-neighbour sampling (labels use it automatically)
    #[arg(long)]
    nearest: bool,
    #[arg(long)]
    f64: bool,
}

#[derive(Args)]
struct ComposeArgs {
    /// Applied second: result(p) = outer(inner(p))
    #[arg(long)]
    outer: PathBuf,
    #[arg(long)]
    inner: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_parser = ["svf", "phantom", "ball-mask", "translation"])]
    kind: String,
    #[arg(long)]
    out: PathBuf,
    /// Cubic grid size (overridden by --nx/--ny/--nz)
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    nz: Option<usize>,
    /// Target max |component| of the velocity (svf kind)
    #[arg(long, default_value_t = 1.0)]
    amp: f64,
    /// Noise smoothing sigma in voxels (svf kind)
    #[arg(long, default_value_t = 4.0)]
    sigma: f64,
    /// Boundary taper width in voxels (svf kind; 0 disables)
    #[arg(long, default_value_t = 6.0)]
    taper: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ball radius in voxels (ball-mask kind)
    #[arg(long, default_value_t = 8.0)]
    radius: f64,
    /// Shift "dx,dy,dz" in voxels (translation kind)
    #[arg(long, default_value = "1,0,0")]
    shift: String,
}

#[derive(Args)]
struct SliceArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "z")]
    axis: String,
    #[arg(long)]
    index: usize,
    #[arg(long)]
    out: PathBuf,
}

// ---------------------------------------------------------------------------

enum CliError {
    Usage(String),
    Data(String),
}

impl From<diffeo_core::Error> for CliError {
    fn from(e: diffeo_core::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

type CmdResult = Result<(), CliError>;

fn usage<T: Into<String>>(msg: T) -> CliError {
    CliError::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/version output on stdout with exit 0.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let cfg = Config::load(cli.config.as_deref()).map_err(usage)?;
    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("DIFFEO_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .or(cfg.threads)
        .unwrap_or(0);
    diffeo_core::configure_threads(threads)?;

    match cli.command {
        Command::Jd(a) => cmd_jd(a),
        Command::Curl(a) => cmd_curl(a),
        Command::Negjac(a) => cmd_negjac(a),
        Command::Exp(a) => cmd_exp(a),
        Command::Reconstruct(a) => cmd_reconstruct(a, &cfg),
        Command::Register(a) => cmd_register(a, &cfg),
        Command::Average(a) => cmd_average(a, &cfg),
        Command::Atlas(a) => cmd_atlas(a, &cfg),
        Command::Dice(a) => cmd_dice(a),
        Command::Ssd(a) => cmd_ssd(a),
        Command::Features(a) => cmd_features(a),
        Command::Warp(a) => cmd_warp(a),
        Command::Compose(a) => cmd_compose(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Slice(a) => cmd_slice(a),
    }
}

/// Read a field and coerce it to a transformation: displacement fields get
/// the identity added (a retag); velocities must go through `exp` first.
fn read_transformation(path: &Path) -> Result<VectorField, CliError> {
    let field = nifti::read_field(path)?;
    match field.kind() {
        FieldKind::Transformation | FieldKind::Displacement => {
            Ok(field.into_transformation()?)
        }
        FieldKind::Velocity => Err(CliError::Data(format!(
            "{} is a velocity field; run `diffeo exp` to turn it into a transformation",
            path.display()
        ))),
        FieldKind::Curl => Err(CliError::Data(format!(
            "{} is a curl field, not a deformation",
            path.display()
        ))),
    }
}

fn read_labels(path: &Path) -> Result<ScalarVolume, CliError> {
    let vol = nifti::read_volume(path)?;
    vol.into_kind(ScalarKind::Label)
        .map_err(|e| CliError::Data(format!("{} is not a label volume: {e}", path.display())))
}

fn emit<T: serde::Serialize>(value: &T, json: bool, plain: String) -> CmdResult {
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?
        );
    } else {
        println!("{plain}");
    }
    Ok(())
}

fn write_report<T: serde::Serialize>(path: Option<&Path>, value: &T) -> CmdResult {
    if let Some(p) = path {
        let json =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
        std::fs::write(p, json).map_err(|e| CliError::Data(e.to_string()))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn cmd_jd(a: JdArgs) -> CmdResult {
    let (field, header) = nifti::read_field_with_header(&a.input)?;
    let phi = match field.kind() {
        FieldKind::Transformation | FieldKind::Displacement => field.into_transformation()?,
        _ => return Err(CliError::Data("input must be a deformation field".into())),
    };
    let jd = diffgeo::jacobian_determinant(&phi)?;
    let opts = nifti::WriteOptions { float64: a.f64, orientation_from: Some(header) };
    nifti::write_volume_with(&jd, &a.out, &opts)?;
    Ok(())
}

fn cmd_curl(a: CurlArgs) -> CmdResult {
    let field = nifti::read_field(&a.input)?;
    let cv = diffgeo::curl(&field)?;
    nifti::write_field(&cv, &a.out)?;
    Ok(())
}

#[derive(serde::Serialize)]
struct NegjacOut {
    fraction: f64,
    masked: bool,
}

fn cmd_negjac(a: NegjacArgs) -> CmdResult {
    let jd = nifti::read_volume(&a.input)?.into_kind(ScalarKind::Jacobian)?;
    let mask = a.mask.as_deref().map(read_labels).transpose()?;
    let fraction = diffgeo::negative_jacobian_fraction(&jd, mask.as_ref())?;
    emit(
        &NegjacOut { fraction, masked: mask.is_some() },
        a.json,
        format!("negative-jacobian fraction: {fraction}"),
    )
}

fn cmd_exp(a: ExpArgs) -> CmdResult {
    let z = nifti::read_field(&a.input)?;
    let z = match z.kind() {
        FieldKind::Velocity => z,
        // Allow untagged (displacement-default) inputs to act as velocities.
        FieldKind::Displacement => z.retag(FieldKind::Velocity),
        k => {
            return Err(CliError::Data(format!(
                "exp needs a velocity field, got {}",
                k.name()
            )))
        }
    };
    let phi = if a.inverse {
        svf::exponentiate_inverse(&z, a.steps)?
    } else {
        svf::exponentiate(&z, a.steps)?
    };
    nifti::write_field(&phi, &a.out)?;
    Ok(())
}

fn cmd_reconstruct(a: ReconstructArgs, cfg: &Config) -> CmdResult {
    let f0 = nifti::read_volume(&a.f0)?.into_kind(ScalarKind::Jacobian)?;
    let g0 = nifti::read_field(&a.g0)?;
    let g0 = match g0.kind() {
        FieldKind::Curl => g0,
        FieldKind::Displacement => g0.retag(FieldKind::Curl),
        k => {
            return Err(CliError::Data(format!(
                "g0 must be a curl field, got {}",
                k.name()
            )))
        }
    };
    let monitor = MonitorPair::new(f0, g0)?;
    if let Some(warning) = monitor.solvability_warning() {
        eprintln!("warning: {warning}");
    }
    let flags = SolveFlags {
        max_iters: a.max_iters,
        step: a.step,
        sigma: a.sigma,
        curl_weight: a.curl_weight,
        tol_abs: a.tol_abs,
        tol_rel: a.tol_rel,
    };
    let opts = config::solve_options(&flags, &cfg.solve);
    let (phi, report) = reconstruct(&monitor, &opts)?;
    nifti::write_field(&phi, &a.out)?;
    write_report(a.report.as_deref(), &report)?;
    emit(
        &report,
        a.json,
        format!(
            "reconstructed in {} iterations, functional {:.3e}, converged: {}",
            report.iterations, report.final_value, report.converged
        ),
    )
}

fn cmd_register(a: RegisterArgs, cfg: &Config) -> CmdResult {
    let moving = nifti::read_volume(&a.moving)?;
    let fixed = nifti::read_volume(&a.fixed)?;
    let flags = RegisterFlags {
        levels: a.levels,
        iters: a.iters,
        step: a.step,
        sigma: a.sigma,
        svf_steps: a.svf_steps,
        lambda_reg: a.lambda_reg,
    };
    let opts = config::register_options(&flags, &cfg.register);
    let (z, phi, report) = register(&moving, &fixed, &opts)?;
    if let Some(p) = &a.out_velocity {
        nifti::write_field(&z, p)?;
    }
    if let Some(p) = &a.out_field {
        nifti::write_field(&phi, p)?;
    }
    if let Some(p) = &a.out_warped {
        nifti::write_volume(&warp(&moving, &phi)?, p)?;
    }
    write_report(a.report.as_deref(), &report)?;
    emit(
        &report,
        a.json,
        format!(
            "registered in {} iterations, ssd {:.4e} -> {:.4e}, converged: {}",
            report.iterations, report.initial_ssd, report.final_ssd, report.converged
        ),
    )
}

fn cmd_average(a: AverageArgs, cfg: &Config) -> CmdResult {
    let phis = a
        .fields
        .iter()
        .map(|p| read_transformation(p))
        .collect::<Result<Vec<_>, _>>()?;
    let flags = SolveFlags {
        max_iters: a.max_iters,
        step: a.step,
        sigma: a.sigma,
        curl_weight: a.curl_weight,
        tol_abs: a.tol_abs,
        tol_rel: a.tol_rel,
    };
    let opts = config::solve_options(&flags, &cfg.solve);
    let (avg, report) = average_transformations(&phis, &opts)?;
    nifti::write_field(&avg, &a.out)?;
    write_report(a.report.as_deref(), &report)?;
    emit(
        &report,
        a.json,
        format!(
            "averaged {} fields in {} iterations, functional {:.3e}",
            phis.len(),
            report.iterations,
            report.final_value
        ),
    )
}

fn cmd_atlas(a: AtlasArgs, cfg: &Config) -> CmdResult {
    let subjects = a
        .subjects
        .iter()
        .map(nifti::read_volume)
        .collect::<Result<Vec<_>, _>>()?;
    let d = AtlasOptions::default();
    let mut registration = config::register_options(
        &RegisterFlags {
            levels: a.reg_levels,
            iters: a.reg_iters,
            step: None,
            sigma: None,
            svf_steps: None,
            lambda_reg: None,
        },
        &cfg.register,
    );
    if let Some(iters) = a.reg_iters {
        registration.iters = iters;
    }
    let mut solve = config::solve_options(
        &SolveFlags {
            max_iters: a.solve_iters,
            step: None,
            sigma: None,
            curl_weight: None,
            tol_abs: None,
            tol_rel: None,
        },
        &cfg.solve,
    );
    if let Some(iters) = a.solve_iters {
        solve.max_iters = iters;
    }
    let opts = AtlasOptions {
        epsilon: config::pick(a.epsilon, cfg.atlas.epsilon, d.epsilon),
        max_outer_iters: config::pick(a.max_outer_iters, cfg.atlas.max_outer_iters, d.max_outer_iters),
        registration,
        solve,
        single_candidate: a.single_candidate,
        collect_average_fields: a.save_fields.is_some(),
    };
    let (atlas, report) = build_atlas(&subjects, &opts)?;
    nifti::write_volume(&atlas, &a.out)?;
    if let Some(dir) = &a.save_fields {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Data(e.to_string()))?;
        for rec in &report.average_fields {
            let name = format!("avg_iter{}_candidate{}.nii", rec.iteration, rec.candidate);
            nifti::write_field(&rec.field, dir.join(name))?;
        }
    }
    write_report(a.report.as_deref(), &report)?;
    emit(
        &report,
        a.json,
        format!(
            "atlas from candidate {} after {} outer iterations, converged: {}",
            report.chosen, report.iterations, report.converged
        ),
    )
}

#[derive(serde::Serialize)]
struct DiceSingleOut {
    label: u32,
    dice: f64,
    both_empty: bool,
}

fn cmd_dice(a: DiceArgs) -> CmdResult {
    let va = read_labels(&a.a)?;
    let vb = read_labels(&a.b)?;
    match a.label {
        Some(label) => {
            let d = metrics::dice(&va, &vb, label)?;
            emit(
                &DiceSingleOut { label, dice: d.score, both_empty: d.both_empty },
                a.json,
                format!("dice[{label}]: {}", d.score),
            )
        }
        None => {
            let md = metrics::dice_multilabel(&va, &vb)?;
            emit(&md, a.json, format!("mean dice over {} labels: {}", md.per_label.len(), md.mean))
        }
    }
}

#[derive(serde::Serialize)]
struct SsdOut {
    ssd: f64,
}

fn cmd_ssd(a: SsdArgs) -> CmdResult {
    let va = nifti::read_volume(&a.a)?;
    let vb = nifti::read_volume(&a.b)?;
    let ssd = metrics::ssd_value(&va, &vb)?;
    emit(&SsdOut { ssd }, a.json, format!("ssd: {ssd}"))
}

fn cmd_features(a: FeaturesArgs) -> CmdResult {
    let image = nifti::read_volume(&a.image)?;
    let phis = a
        .fields
        .iter()
        .map(|p| read_transformation(p))
        .collect::<Result<Vec<_>, _>>()?;
    let stack = match a.mode.as_str() {
        "moving" => {
            if phis.len() != 1 {
                return Err(usage(format!(
                    "--mode moving takes exactly one --field, got {}",
                    phis.len()
                )));
            }
            features::moving_stack(&image, &phis[0])?
        }
        _ => features::fixed_stack(&image, &phis)?,
    };
    features::export_stack(&stack, &a.out)?;
    Ok(())
}

fn cmd_warp(a: WarpArgs) -> CmdResult {
    let (vol, header) = nifti::read_volume_with_header(&a.input)?;
    let vol = if a.nearest && vol.kind() != ScalarKind::Label {
        // Nearest-neighbour via the label path without relabelling the data:
        // only meaningful for integer-valued volumes.
        vol.into_kind(ScalarKind::Label)
            .map_err(|e| CliError::Data(format!("--nearest needs integer values: {e}")))?
    } else {
        vol
    };
    let phi = read_transformation(&a.field)?;
    let out = warp(&vol, &phi)?;
    let opts = nifti::WriteOptions { float64: a.f64, orientation_from: Some(header) };
    nifti::write_volume_with(&out, &a.out, &opts)?;
    Ok(())
}

fn cmd_compose(a: ComposeArgs) -> CmdResult {
    let outer = read_transformation(&a.outer)?;
    let inner = read_transformation(&a.inner)?;
    let combined = compose(&outer, &inner)?;
    nifti::write_field(&combined, &a.out)?;
    Ok(())
}

fn parse_shift(text: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(usage(format!("--shift needs 'dx,dy,dz', got '{text}'")));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p
            .trim()
            .parse()
            .map_err(|_| usage(format!("bad shift component '{p}'")))?;
    }
    Ok(out)
}

fn cmd_synth(a: SynthArgs) -> CmdResult {
    let nx = a.nx.unwrap_or(a.dim);
    let ny = a.ny.unwrap_or(a.dim);
    let nz = a.nz.unwrap_or(a.dim);
    let grid = Grid3::new(nx, ny, nz)?;
    match a.kind.as_str() {
        "svf" => {
            let z = synth::smooth_velocity(grid, a.amp, a.sigma, a.taper, a.seed)?;
            nifti::write_field(&z, &a.out)?;
        }
        "phantom" => {
            let vol = synth::phantom(grid, a.seed);
            nifti::write_volume(&vol, &a.out)?;
        }
        "ball-mask" => {
            let vol = synth::ball_mask(grid, a.radius)?;
            nifti::write_volume(&vol, &a.out)?;
        }
        _ => {
            let shift = parse_shift(&a.shift)?;
            let field = synth::translation_field(grid, shift)?;
            nifti::write_field(&field, &a.out)?;
        }
    }
    Ok(())
}

fn cmd_slice(a: SliceArgs) -> CmdResult {
    let axis: SliceAxis = a.axis.parse().map_err(usage)?;
    // Volumes and fields share the container format; try the volume shape
    // first, then the field shape.
    match nifti::read_volume(&a.input) {
        Ok(vol) => {
            render::save_volume_slice(&vol, axis, a.index, &a.out).map_err(CliError::Data)
        }
        Err(diffeo_core::Error::InvalidHeader(_)) => {
            let field = nifti::read_field(&a.input)?;
            render::save_field_slice(&field, axis, a.index, &a.out).map_err(CliError::Data)
        }
        Err(e) => Err(e.into()),
    }
}
