//! `setdist` — simulate disc processes, approximate raster realisations by
//! convex tessellation pieces, and test whether two realisations come from
//! the same process.
//!
//! Exit codes: 0 = ran to completion (p-values are data, never failures),
//! 2 = input error (bad arguments, unreadable or malformed files, invalid
//! config), 3 = pipeline error during computation.

mod config;
mod study;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{ProcessSpec, StudyConfig};
use setdist::error::Error;
use setdist::hyptest::SPLIT_RECOMMENDED_MIN_M;
use setdist::io as sdio;
use setdist::kernels::{CovSpec, KernelSpec};
use setdist::pipeline::{
    clip_cells_to_discs, extract_support_sample, poisson_disc_cover, sample_noneighbour_cells,
    two_realisation_test, voronoi, CoverConfig, MethodSpec, OriginPolicy, TwoRealisationConfig,
};
use setdist::pointproc::{rasterize, RadiusLaw, Window};
use setdist::rng::{derive_seed, RNG_ALGORITHM};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "setdist", version, about = "N-distance two-sample tests for random sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate seeded realisations of a disc process (PGM + disc CSV).
    Simulate(SimulateArgs),
    /// Cover one realisation, tessellate it and dump support vectors.
    Approximate(ApproximateArgs),
    /// Test whether two PGM realisations come from the same process.
    Test(TestArgs),
    /// Run a full study from a config file.
    Study(StudyArgs),
    /// Configuration utilities.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProcessName {
    Boolean,
    Cluster,
    Repulsive,
}

#[derive(Args)]
struct SimulateArgs {
    /// Process to simulate.
    #[arg(long, value_enum)]
    process: ProcessName,
    /// Number of realisations.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Master seed; realisation i uses a seed derived from (seed, i).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Window side in pixels (square window, unit pixel size).
    #[arg(long, default_value_t = 400)]
    window_px: usize,
    /// Boolean model intensity (discs per px²).
    #[arg(long)]
    intensity: Option<f64>,
    /// Cluster parent intensity (parents per px²).
    #[arg(long)]
    parent_intensity: Option<f64>,
    /// Mean children per cluster parent.
    #[arg(long)]
    mean_children: Option<f64>,
    /// Cluster displacement radius (px).
    #[arg(long)]
    cluster_radius: Option<f64>,
    /// Repulsive proposal intensity (proposals per px²).
    #[arg(long)]
    proposal_intensity: Option<f64>,
    /// Hard-core distance (px).
    #[arg(long)]
    hardcore_distance: Option<f64>,
    /// Fixed grain radius (px); overrides the uniform law.
    #[arg(long)]
    grain_radius: Option<f64>,
    /// Uniform grain radius law lower bound (px).
    #[arg(long, default_value_t = 8.0)]
    grain_lo: f64,
    /// Uniform grain radius law upper bound (px).
    #[arg(long, default_value_t = 16.0)]
    grain_hi: f64,
}

#[derive(Args)]
struct ApproximateArgs {
    /// Input mask (PGM, nonzero = foreground).
    mask: PathBuf,
    /// Covering-disc radius in pixels.
    #[arg(long, default_value_t = 5.0)]
    radius: f64,
    /// Number of support directions.
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Sample this many non-neighbouring cells; all cells when absent.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Support-function origin per piece.
    #[arg(long, value_enum, default_value_t = OriginArg::Generator)]
    origin: OriginArg,
    /// Polygon edges approximating a covering disc.
    #[arg(long, default_value_t = 64)]
    disc_poly_k: usize,
    /// Write the tessellation dump (JSON) here.
    #[arg(long)]
    tessellation: Option<PathBuf>,
    /// Write the support CSV here (stdout when absent).
    #[arg(long)]
    support: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OriginArg {
    Generator,
    Centroid,
}

impl From<OriginArg> for OriginPolicy {
    fn from(o: OriginArg) -> Self {
        match o {
            OriginArg::Generator => OriginPolicy::Generator,
            OriginArg::Centroid => OriginPolicy::Centroid,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelName {
    Euclidean,
    Gaussian,
    Cauchy,
    Expweighted,
    Radialpower,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodName {
    Permutation,
    SplitKs,
    SplitAd,
}

#[derive(Args)]
struct TestArgs {
    /// First realisation (PGM).
    mask1: PathBuf,
    /// Second realisation (PGM).
    mask2: PathBuf,
    /// Shared covering-disc radius in pixels.
    #[arg(long, default_value_t = 5.0)]
    radius: f64,
    /// Sampled non-neighbouring cells per realisation
    /// (default: 100 for permutation, 300 for split methods).
    #[arg(long)]
    m: Option<usize>,
    /// Number of support directions.
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, value_enum, default_value_t = KernelName::Euclidean)]
    kernel: KernelName,
    /// Kernel power r (euclidean, radialpower).
    #[arg(long)]
    r: Option<f64>,
    /// Scaled-identity matrix parameter (gaussian, cauchy).
    #[arg(long)]
    v_scale: Option<f64>,
    /// Weights for the expweighted kernel: one value repeated, or a
    /// comma-separated list of n values.
    #[arg(long)]
    w: Option<String>,
    /// Subset depth D (expweighted, radialpower).
    #[arg(long = "D")]
    depth: Option<usize>,
    #[arg(long, value_enum, default_value_t = MethodName::Permutation)]
    method: MethodName,
    /// Permutation count s.
    #[arg(long, default_value_t = 999)]
    perms: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Compact single-line JSON output.
    #[arg(long)]
    json: bool,
    #[arg(long, value_enum, default_value_t = OriginArg::Generator)]
    origin: OriginArg,
    #[arg(long, default_value_t = 64)]
    disc_poly_k: usize,
}

#[derive(Args)]
struct StudyArgs {
    /// Study config (JSON, see `setdist config init`).
    config: PathBuf,
    /// Output directory for the CSV tables.
    #[arg(long, default_value = "study_out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ConfigAction {
    /// Emit a config with full defaults.
    Init {
        /// desk = 50 replications / s=199; full = 200 replications / s=999.
        #[arg(long, value_enum, default_value_t = Preset::Desk)]
        preset: Preset,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Full,
}

struct Failure {
    code: i32,
    message: String,
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn pipeline_error(e: Error) -> Failure {
    Failure {
        code: 3,
        message: e.to_string(),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
    let result = match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Approximate(args) => run_approximate(args),
        Command::Test(args) => run_test(args),
        Command::Study(args) => run_study_cmd(args),
        Command::Config { action } => run_config(action),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

/// SETDIST_THREADS caps the worker pool; output is identical for every
/// pool size.
fn configure_threads() -> Result<(), Failure> {
    if let Ok(raw) = std::env::var("SETDIST_THREADS") {
        let n: usize = raw
            .parse()
            .map_err(|_| input_error(format!("SETDIST_THREADS must be an integer, got {raw:?}")))?;
        if n == 0 {
            return Err(input_error("SETDIST_THREADS must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| input_error(format!("failed to size thread pool: {e}")))?;
    }
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn build_process(args: &SimulateArgs) -> ProcessSpec {
    let radius_law = match args.grain_radius {
        Some(r) => RadiusLaw::Fixed { r },
        None => RadiusLaw::Uniform {
            lo: args.grain_lo,
            hi: args.grain_hi,
        },
    };
    match args.process {
        ProcessName::Boolean => {
            let ProcessSpec::Boolean { intensity, .. } = ProcessSpec::default_boolean() else {
                unreachable!()
            };
            ProcessSpec::Boolean {
                intensity: args.intensity.unwrap_or(intensity),
                radius_law,
            }
        }
        ProcessName::Cluster => {
            let ProcessSpec::Cluster {
                parent_intensity,
                mean_children,
                cluster_radius,
                ..
            } = ProcessSpec::default_cluster()
            else {
                unreachable!()
            };
            ProcessSpec::Cluster {
                parent_intensity: args.parent_intensity.unwrap_or(parent_intensity),
                mean_children: args.mean_children.unwrap_or(mean_children),
                cluster_radius: args.cluster_radius.unwrap_or(cluster_radius),
                radius_law,
            }
        }
        ProcessName::Repulsive => {
            let ProcessSpec::Repulsive {
                proposal_intensity,
                hardcore_distance,
                ..
            } = ProcessSpec::default_repulsive()
            else {
                unreachable!()
            };
            ProcessSpec::Repulsive {
                proposal_intensity: args.proposal_intensity.unwrap_or(proposal_intensity),
                hardcore_distance: args.hardcore_distance.unwrap_or(hardcore_distance),
                radius_law,
            }
        }
    }
}

fn run_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let window = Window::square_pixels(args.window_px)
        .map_err(|e| input_error(format!("bad window: {e}")))?;
    let spec = build_process(&args);
    std::fs::create_dir_all(&args.out)
        .map_err(|e| input_error(format!("cannot create {}: {e}", args.out.display())))?;

    let mut realisations = Vec::new();
    for i in 0..args.count {
        let seed = derive_seed(args.seed, i as u64);
        let union = spec
            .simulate(&window, seed)
            .map_err(|e| input_error(format!("invalid process parameters: {e}")))?;
        let mask = rasterize(&union);

        let pgm_name = format!("real_{i:03}.pgm");
        let csv_name = format!("real_{i:03}.csv");
        let pgm_bytes = sdio::pgm_bytes(&mask);
        let discs_csv = sdio::discs_to_csv(&union.discs);
        write_bytes(&args.out.join(&pgm_name), &pgm_bytes)?;
        write_bytes(&args.out.join(&csv_name), discs_csv.as_bytes())?;
        realisations.push(serde_json::json!({
            "index": i,
            "seed": seed,
            "pgm": pgm_name,
            "discs_csv": csv_name,
            "sha256_pgm": sha256_hex(&pgm_bytes),
            "sha256_discs": sha256_hex(discs_csv.as_bytes()),
        }));
    }
    let manifest = serde_json::json!({
        "process": spec,
        "window": window,
        "rng": { "algorithm": RNG_ALGORITHM, "master_seed": args.seed },
        "count": args.count,
        "realisations": realisations,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_bytes(&args.out.join("manifest.json"), text.as_bytes())?;
    Ok(())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes)
        .map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))
}

fn read_mask(path: &Path) -> Result<setdist::pointproc::RasterMask, Failure> {
    sdio::read_pgm(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn run_approximate(args: ApproximateArgs) -> Result<(), Failure> {
    let mask = read_mask(&args.mask)?;
    let centers = poisson_disc_cover(&mask, args.radius, derive_seed(args.seed, 1))
        .map_err(pipeline_error)?;
    let t = voronoi(&centers, mask.width() as f64, mask.height() as f64).map_err(pipeline_error)?;
    let cover = CoverConfig {
        radius: args.radius,
        disc_poly_k: args.disc_poly_k,
        origin_policy: args.origin.into(),
    };
    let pieces = clip_cells_to_discs(&t, &cover).map_err(pipeline_error)?;
    if !pieces.dropped().is_empty() {
        eprintln!(
            "warning: dropped {} numerically empty piece(s)",
            pieces.dropped().len()
        );
    }
    let chosen: Vec<usize> = match args.m {
        Some(m) => {
            sample_noneighbour_cells(&t, m, derive_seed(args.seed, 2)).map_err(pipeline_error)?
        }
        None => (0..t.len()).filter(|&i| pieces.body(i).is_some()).collect(),
    };
    let grid = setdist::geometry::AngleGrid::new(args.n).map_err(pipeline_error)?;
    let support =
        extract_support_sample(&t, &pieces, &chosen, &grid, &cover).map_err(pipeline_error)?;

    if let Some(path) = &args.tessellation {
        let json = serde_json::to_string_pretty(&t).expect("tessellation serializes");
        write_bytes(path, json.as_bytes())?;
    }
    let csv = sdio::support_to_csv(&support);
    match &args.support {
        Some(path) => write_bytes(path, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn parse_weights(raw: &str, n: usize) -> Result<Vec<f64>, Failure> {
    let values: Vec<f64> = raw
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| input_error(format!("cannot parse --w {raw:?}")))?;
    if values.len() == 1 {
        return Ok(vec![values[0]; n]);
    }
    if values.len() != n {
        return Err(input_error(format!(
            "--w needs 1 or {n} values, got {}",
            values.len()
        )));
    }
    Ok(values)
}

fn build_kernel(args: &TestArgs) -> Result<KernelSpec, Failure> {
    let bad = |e: Error| input_error(format!("invalid kernel parameters: {e}"));
    Ok(match args.kernel {
        KernelName::Euclidean => KernelSpec::euclidean(args.r.unwrap_or(1.0)).map_err(bad)?,
        KernelName::Gaussian => KernelSpec::Gaussian {
            v: CovSpec::ScaledIdentity(args.v_scale.unwrap_or(10.0)),
        },
        KernelName::Cauchy => KernelSpec::Cauchy {
            v: CovSpec::ScaledIdentity(args.v_scale.unwrap_or(1.0)),
        },
        KernelName::Expweighted => {
            let w = match &args.w {
                Some(raw) => parse_weights(raw, args.n)?,
                None => vec![1.0; args.n],
            };
            KernelSpec::exp_weighted(w, args.depth.unwrap_or(3)).map_err(bad)?
        }
        KernelName::Radialpower => {
            KernelSpec::radial_power(args.r.unwrap_or(1.0), args.depth.unwrap_or(3)).map_err(bad)?
        }
    })
}

fn run_test(args: TestArgs) -> Result<(), Failure> {
    let mask1 = read_mask(&args.mask1)?;
    let mask2 = read_mask(&args.mask2)?;
    let kernel = build_kernel(&args)?;
    kernel
        .validate(args.n)
        .map_err(|e| input_error(format!("invalid kernel parameters: {e}")))?;
    let (method, default_m) = match args.method {
        MethodName::Permutation => (MethodSpec::Permutation { s: args.perms }, 100),
        MethodName::SplitKs => (MethodSpec::SplitKs, 300),
        MethodName::SplitAd => (MethodSpec::SplitAd, 300),
    };
    let m = args.m.unwrap_or(default_m);
    if matches!(method, MethodSpec::SplitKs | MethodSpec::SplitAd) {
        if m < SPLIT_RECOMMENDED_MIN_M {
            eprintln!(
                "warning: split test with m = {m} < {SPLIT_RECOMMENDED_MIN_M}; asymptotic \
                 p-values are unreliable at this size, prefer --method permutation"
            );
        }
        if matches!(method, MethodSpec::SplitAd) && m / 3 < 30 {
            eprintln!(
                "warning: Anderson-Darling on sub-samples of {} values; small-sample p-values \
                 are interpolated from the asymptotic table",
                m / 3
            );
        }
    }
    let mut cfg = TwoRealisationConfig::new(args.radius, m, args.n, kernel, method, args.seed);
    cfg.disc_poly_k = args.disc_poly_k;
    cfg.origin_policy = args.origin.into();
    let result = two_realisation_test(&mask1, &mask2, &cfg).map_err(pipeline_error)?;
    let text = if args.json {
        serde_json::to_string(&result).expect("result serializes")
    } else {
        serde_json::to_string_pretty(&result).expect("result serializes")
    };
    println!("{text}");
    Ok(())
}

fn run_study_cmd(args: StudyArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| input_error(format!("cannot read {}: {e}", args.config.display())))?;
    let cfg: StudyConfig = serde_json::from_str(&text)
        .map_err(|e| input_error(format!("{}: {e}", args.config.display())))?;
    let errors = cfg.validation_errors();
    if !errors.is_empty() {
        let mut message = String::from("invalid study config:");
        for e in &errors {
            message.push_str("\n  - ");
            message.push_str(e);
        }
        return Err(input_error(message));
    }
    let outputs = study::run_study(&cfg).map_err(pipeline_error)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| input_error(format!("cannot create {}: {e}", args.out.display())))?;
    write_bytes(&args.out.join("pvalues.csv"), outputs.pvalues_csv.as_bytes())?;
    write_bytes(
        &args.out.join("power_summary.csv"),
        outputs.power_csv.as_bytes(),
    )?;
    write_bytes(
        &args.out.join("histogram.csv"),
        outputs.histogram_csv.as_bytes(),
    )?;
    eprintln!(
        "study complete: {} rows -> {}",
        outputs.rows.len(),
        args.out.display()
    );
    Ok(())
}

fn run_config(action: ConfigAction) -> Result<(), Failure> {
    match action {
        ConfigAction::Init { preset, out } => {
            let cfg = match preset {
                Preset::Desk => StudyConfig::desk(),
                Preset::Full => StudyConfig::full(),
            };
            let text = serde_json::to_string_pretty(&cfg).expect("config serializes");
            match out {
                Some(path) => write_bytes(&path, text.as_bytes())?,
                None => println!("{text}"),
            }
        }
    }
    Ok(())
}
