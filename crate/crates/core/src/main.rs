use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use polarlens::config::{KvConfig, Mode};
use polarlens::error::{PolarError, Result};
use polarlens::forward::ForwardOperator;
use polarlens::geom::{estimate_homography, load_correspondences, warp_image};
use polarlens::metrics::evaluate_stack;
use polarlens::polarimetry::{composite_rgb_viz, stokes_from_intensities};
use polarlens::ptf;
use polarlens::sim::{
    compute_rgb_guide, generate_stripe_mask, simulate_measurement, stack_drop_135,
    stack_to_grayscale, MaskSpec, SimConfig,
};
use polarlens::solver::{reconstruct, SolverConfig, SolverKind};
use polarlens::tensor::{normalize_psf, PolarizationMask, PolarizationStack, Psf};

#[derive(Parser)]
#[command(name = "polarlens", about = "Lensless polarization imaging pipeline", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat key = value configuration file; CLI flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// gray3 or color4.
    #[arg(long)]
    mode: Option<String>,
    /// Output directory (or file for single-output commands).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// fista or admm.
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "lambda-w")]
    lambda_w: Option<f64>,
    /// FISTA step tuning factor (step = 1/(L*c)).
    #[arg(long)]
    c: Option<f64>,
    /// ADMM penalty parameter.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a lensless measurement from a scene stack and PSF.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Scene stack PTF.
        #[arg(long)]
        scene: Option<PathBuf>,
        /// PSF PTF.
        #[arg(long)]
        psf: Option<PathBuf>,
        /// Mask PTF; generated as a stripe mask when absent.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Stripe repeats for a generated mask.
        #[arg(long = "mask-repeats")]
        mask_repeats: Option<usize>,
        /// Additive Gaussian noise sigma.
        #[arg(long = "noise-sigma")]
        noise_sigma: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Reconstruct a polarization stack from a measurement.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        measurement: Option<PathBuf>,
        #[arg(long)]
        psf: Option<PathBuf>,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long = "mask-repeats")]
        mask_repeats: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// PSNR/SSIM report for a reconstruction against ground truth.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Data range for the metrics.
        #[arg(long)]
        peak: Option<f64>,
    },
    /// Derive Stokes components, DoLP and AoLP from a four-angle stack.
    Stokes {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        stack: Option<PathBuf>,
    },
    /// Warp an image onto the reconstruction grid via a homography estimated
    /// from a correspondence file.
    Align {
        #[command(flatten)]
        common: Common,
        /// Input PNG.
        #[arg(long)]
        image: Option<PathBuf>,
        /// Correspondence file: one `sx sy dx dy` per line.
        #[arg(long)]
        correspondences: Option<PathBuf>,
        /// Output size as HxW; defaults to the input size.
        #[arg(long)]
        dims: Option<String>,
    },
    /// Write the 0/45/90 RGB-composite PNG of a grayscale stack.
    Viz {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        stack: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<KvConfig> {
    match &common.config {
        Some(p) => KvConfig::load(p),
        None => Ok(KvConfig::default()),
    }
}

fn resolve_path(flag: &Option<PathBuf>, cfg: &KvConfig, key: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| cfg.get(key).map(PathBuf::from))
        .ok_or_else(|| PolarError::Parse(format!("missing required path: --{key}")))
}

fn resolve_mode(common: &Common, cfg: &KvConfig) -> Result<Mode> {
    let s = common
        .mode
        .clone()
        .or_else(|| cfg.get("mode").map(str::to_string))
        .unwrap_or_else(|| "color4".to_string());
    Mode::parse(&s)
}

fn out_dir(common: &Common, cfg: &KvConfig) -> Result<PathBuf> {
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.get("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Apply the mode convention: gray3 drops the 135-degree plane and collapses
/// color channels by mean; color4 requires the four-angle stack.
fn adapt_scene(scene: PolarizationStack, mode: Mode) -> Result<PolarizationStack> {
    match mode {
        Mode::Gray3 => {
            let s = if scene.angles() == 4 { stack_drop_135(&scene)? } else { scene };
            stack_to_grayscale(&s)
        }
        Mode::Color4 => {
            if scene.angles() != 4 {
                return Err(PolarError::InvalidDims("color4 mode requires a four-angle stack".into()));
            }
            Ok(scene)
        }
    }
}

fn adapt_psf(psf: Psf, mode: Mode) -> Psf {
    match mode {
        Mode::Gray3 => psf.to_grayscale(),
        Mode::Color4 => psf,
    }
}

fn load_or_generate_mask(
    mask_flag: &Option<PathBuf>,
    repeats_flag: Option<usize>,
    cfg: &KvConfig,
    mode: Mode,
    height: usize,
    width: usize,
) -> Result<PolarizationMask> {
    if let Some(p) = mask_flag.clone().or_else(|| cfg.get("mask").map(PathBuf::from)) {
        return ptf::load_mask(p);
    }
    let repeats = match repeats_flag {
        Some(r) => r,
        None => cfg.get_usize("mask_repeats")?.unwrap_or(4),
    };
    generate_stripe_mask(&MaskSpec::new(height, width, mode.angles(), repeats)?)
}

fn solver_config(args: &SolverArgs, cfg: &KvConfig) -> Result<SolverConfig> {
    let kind_str = args
        .solver
        .clone()
        .or_else(|| cfg.get("solver").map(str::to_string))
        .unwrap_or_else(|| "fista".to_string());
    let mut sc = match kind_str.as_str() {
        "fista" => SolverConfig::fista_simulation(),
        "admm" => SolverConfig::admm_defaults(),
        other => return Err(PolarError::Parse(format!("unknown solver {other:?}"))),
    };
    if let Some(v) = args.iters.or(cfg.get_usize("iters")?) {
        sc.iterations = v;
    }
    if let Some(v) = args.lambda.or(cfg.get_f64("lambda")?) {
        sc.lambda = v;
    }
    if let Some(v) = args.lambda_w.or(cfg.get_f64("lambda_w")?) {
        sc.lambda_w = v;
    }
    if let Some(v) = args.c.or(cfg.get_f64("c")?) {
        sc.step_factor = v;
    }
    if let Some(v) = args.rho.or(cfg.get_f64("rho")?) {
        sc.rho = v;
    }
    if let Some(v) = args.seed.or(cfg.get_u64("seed")?) {
        sc.seed = v;
    }
    if let Some(v) = cfg.get_f64("cg_tol")? {
        sc.cg_tol = v;
    }
    if let Some(v) = cfg.get_usize("cg_max_iter")? {
        sc.cg_max_iter = v;
    }
    if let Some(v) = cfg.get_usize("log_every")? {
        sc.log_every = v;
    }
    sc.validate()?;
    Ok(sc)
}

fn cmd_simulate(
    common: &Common,
    scene: &Option<PathBuf>,
    psf: &Option<PathBuf>,
    mask: &Option<PathBuf>,
    mask_repeats: Option<usize>,
    noise_sigma: Option<f64>,
    seed: Option<u64>,
) -> Result<()> {
    let cfg = load_config(common)?;
    let mode = resolve_mode(common, &cfg)?;
    let dir = out_dir(common, &cfg)?;
    let scene = ptf::load_stack(resolve_path(scene, &cfg, "scene")?)?;
    let scene = adapt_scene(scene, mode)?;
    let psf = adapt_psf(ptf::load_psf(resolve_path(psf, &cfg, "psf")?)?, mode);
    let psf = normalize_psf(&psf)?;
    let (_, _, h, w) = scene.dims();
    let mask = load_or_generate_mask(mask, mask_repeats, &cfg, mode, h, w)?;
    let op = ForwardOperator::new(psf, mask)?;
    let sim_cfg = SimConfig {
        noise_sigma: match noise_sigma {
            Some(v) => v,
            None => cfg.get_f64("noise_sigma")?.unwrap_or(0.0),
        },
        seed: match seed {
            Some(v) => v,
            None => cfg.get_u64("seed")?.unwrap_or(0),
        },
    };
    let measurement = simulate_measurement(&scene, &op, &sim_cfg)?;
    ptf::save_measurement(&measurement, dir.join("measurement.ptf"))?;
    if mode == Mode::Color4 {
        let guide = compute_rgb_guide(&scene)?;
        ptf::save_tensor(&guide.into_dyn(), dir.join("guide.ptf"))?;
    }
    // partition checksum: total selected entries must equal H * W
    let checksum = op.mask().data().sum();
    println!("mask partition checksum: {checksum} (expected {})", h * w);
    Ok(())
}

fn cmd_reconstruct(
    common: &Common,
    measurement: &Option<PathBuf>,
    psf: &Option<PathBuf>,
    mask: &Option<PathBuf>,
    mask_repeats: Option<usize>,
    solver: &SolverArgs,
) -> Result<()> {
    let cfg = load_config(common)?;
    let mode = resolve_mode(common, &cfg)?;
    let dir = out_dir(common, &cfg)?;
    let y = ptf::load_measurement(resolve_path(measurement, &cfg, "measurement")?)?;
    let psf = adapt_psf(ptf::load_psf(resolve_path(psf, &cfg, "psf")?)?, mode);
    let psf = normalize_psf(&psf)?;
    let mask = load_or_generate_mask(mask, mask_repeats, &cfg, mode, y.height(), y.width())?;
    let op = ForwardOperator::new(psf, mask)?;
    let sc = solver_config(solver, &cfg)?;
    let report = reconstruct(&y, &op, &sc)?;
    ptf::save_stack(&report.estimate, dir.join("estimate.ptf"))?;
    std::fs::write(dir.join("trace.csv"), report.trace_csv())?;
    let kind = match sc.kind {
        SolverKind::Fista => "fista",
        SolverKind::Admm => "admm",
    };
    println!(
        "{kind}: {} iterations in {:.2}s",
        report.iterations,
        report.wall_time.as_secs_f64()
    );
    Ok(())
}

fn cmd_evaluate(common: &Common, pred: &Option<PathBuf>, gt: &Option<PathBuf>, peak: Option<f64>) -> Result<()> {
    let cfg = load_config(common)?;
    let pred = ptf::load_stack(resolve_path(pred, &cfg, "pred")?)?;
    let gt = ptf::load_stack(resolve_path(gt, &cfg, "gt")?)?;
    let peak = match peak {
        Some(v) => v,
        None => cfg.get_f64("peak")?.unwrap_or(1.0),
    };
    let report = evaluate_stack(&pred, &gt, peak)?;
    let csv = report.to_csv();
    match common.out.clone().or_else(|| cfg.get("out").map(PathBuf::from)) {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(path, csv)?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_stokes(common: &Common, stack: &Option<PathBuf>) -> Result<()> {
    let cfg = load_config(common)?;
    let dir = out_dir(common, &cfg)?;
    let stack = ptf::load_stack(resolve_path(stack, &cfg, "stack")?)?;
    let s = stokes_from_intensities(&stack)?;
    for (name, arr) in [("s0", &s.s0), ("s1", &s.s1), ("s2", &s.s2), ("dolp", &s.dolp), ("aolp", &s.aolp)] {
        ptf::save_tensor(&arr.clone().into_dyn(), dir.join(format!("{name}.ptf")))?;
    }
    Ok(())
}

fn cmd_align(
    common: &Common,
    image: &Option<PathBuf>,
    correspondences: &Option<PathBuf>,
    dims: &Option<String>,
) -> Result<()> {
    let cfg = load_config(common)?;
    let img = polarlens::png_io::load_png(resolve_path(image, &cfg, "image")?)?;
    let (src, dst) = load_correspondences(resolve_path(correspondences, &cfg, "correspondences")?)?;
    let h = estimate_homography(&src, &dst)?;
    let dims_str = dims.clone().or_else(|| cfg.get("dims").map(str::to_string));
    let (out_h, out_w) = match dims_str {
        Some(s) => {
            let (a, b) = s
                .split_once('x')
                .ok_or_else(|| PolarError::Parse(format!("dims must be HxW, got {s:?}")))?;
            (
                a.parse().map_err(|_| PolarError::Parse("bad dims".into()))?,
                b.parse().map_err(|_| PolarError::Parse("bad dims".into()))?,
            )
        }
        None => (img.dim().1, img.dim().2),
    };
    let (warped, _coverage) = warp_image(&img, &h, (out_h, out_w))?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.get("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("aligned.png"));
    polarlens::png_io::save_png(&warped, 8, out)?;
    Ok(())
}

fn cmd_viz(common: &Common, stack: &Option<PathBuf>) -> Result<()> {
    let cfg = load_config(common)?;
    let stack_path = resolve_path(stack, &cfg, "stack")?;
    let stack = ptf::load_stack(&stack_path)?;
    let stack = stack_to_grayscale(&stack)?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.get("out").map(PathBuf::from))
        .unwrap_or_else(|| Path::new(&stack_path).with_extension("png"));
    composite_rgb_viz(&stack, out)?;
    Ok(())
}

fn run() -> Result<()> {
    if let Ok(threads) = std::env::var("POLARLENS_THREADS") {
        let n: usize = threads
            .parse()
            .map_err(|_| PolarError::Parse(format!("POLARLENS_THREADS: bad integer {threads:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| PolarError::Parse(e.to_string()))?;
    }
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate { common, scene, psf, mask, mask_repeats, noise_sigma, seed } => {
            cmd_simulate(common, scene, psf, mask, *mask_repeats, *noise_sigma, *seed)
        }
        Command::Reconstruct { common, measurement, psf, mask, mask_repeats, solver } => {
            cmd_reconstruct(common, measurement, psf, mask, *mask_repeats, solver)
        }
        Command::Evaluate { common, pred, gt, peak } => cmd_evaluate(common, pred, gt, *peak),
        Command::Stokes { common, stack } => cmd_stokes(common, stack),
        Command::Align { common, image, correspondences, dims } => {
            cmd_align(common, image, correspondences, dims)
        }
        Command::Viz { common, stack } => cmd_viz(common, stack),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
