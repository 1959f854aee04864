use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use poisson_blp::benchmark::{run_benchmark, Manifest};
use poisson_blp::blp::Jitter;
use poisson_blp::matching::SearchParams;
use poisson_blp::metrics::{build_table, mse, psnr_from_mse};
use poisson_blp::pgm::{self, PgmOptions};
use poisson_blp::pilot::{BuiltinPilot, PilotSpec, Weighting};
use poisson_blp::pipeline::{denoise, PipelineConfig};
use poisson_blp::poisson::{poissonize, InverseKind, NoiseSpec};
use poisson_blp::{Error, Image};

/// Poisson image denoising by best linear prediction over groups of similar patches.
///
/// Thread count follows RAYON_NUM_THREADS.
#[derive(Debug, Parser)]
#[command(name = "poisson-blp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scale a clean image to a peak intensity and draw Poisson noise.
    Simulate(SimulateArgs),
    /// Denoise a Poisson-noisy image.
    Denoise(DenoiseArgs),
    /// PSNR and MSE of a test image against a reference.
    Evaluate(EvaluateArgs),
    /// Run a sweep described by a manifest and write a CSV table.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Clean input image (PGM).
    clean: PathBuf,
    /// Output: noisy counts.
    noisy: PathBuf,
    /// Output: clean image scaled to the peak (stored with a value-scale tag).
    scaled: PathBuf,
    #[arg(long)]
    peak: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write 16-bit samples.
    #[arg(long)]
    sixteen_bit: bool,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Patch side in pixels.
    #[arg(long, default_value_t = 8)]
    side: usize,
    /// Reference grid step.
    #[arg(long, default_value_t = 4)]
    stride: usize,
    /// Search window side in pixels.
    #[arg(long, default_value_t = 40)]
    window: usize,
    /// Patches per group.
    #[arg(long, default_value_t = 30)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    iterations: usize,
    /// Solve jitter relative to the mean diagonal of diag(μ) + Σ.
    #[arg(long, default_value_t = 1e-6)]
    jitter: f64,
    /// Built-in pilot hard threshold (stabilized noise units).
    #[arg(long, default_value_t = 2.7)]
    threshold: f64,
    /// Built-in pilot patch side.
    #[arg(long, default_value_t = 8)]
    pilot_side: usize,
    /// Built-in pilot patch stride.
    #[arg(long, default_value_t = 4)]
    pilot_stride: usize,
    /// Uniform instead of sparsity-adaptive aggregation in the built-in pilot.
    #[arg(long)]
    uniform_pilot_weights: bool,
    /// Use the algebraic inverse Anscombe transform in the built-in pilot.
    #[arg(long)]
    algebraic_inverse: bool,
}

impl ConfigArgs {
    fn builtin(&self) -> BuiltinPilot {
        BuiltinPilot {
            threshold: self.threshold,
            patch_side: self.pilot_side,
            stride: self.pilot_stride,
            weighting: if self.uniform_pilot_weights {
                Weighting::Uniform
            } else {
                Weighting::Sparsity
            },
            inverse: if self.algebraic_inverse {
                InverseKind::Algebraic
            } else {
                InverseKind::Asymptotic
            },
        }
    }

    fn config(&self, pilot: PilotSpec) -> PipelineConfig {
        PipelineConfig {
            search: SearchParams {
                patch_side: self.side,
                stride: self.stride,
                window: self.window,
                k: self.k,
            },
            iterations: self.iterations,
            jitter: Jitter::Relative(self.jitter),
            pilot,
            noise: None,
        }
    }
}

#[derive(Debug, Args)]
struct DenoiseArgs {
    /// Noisy input (PGM counts).
    noisy: PathBuf,
    /// Output image.
    out: PathBuf,
    /// `builtin`, or a PGM file holding an externally computed pilot.
    #[arg(long, default_value = "builtin")]
    pilot: String,
    /// Divide pilot file values by this to reach the working domain
    /// (default: the file's value-scale tag, else 1).
    #[arg(long)]
    pilot_scale: Option<f64>,
    /// Divide noisy file values by this (default: value-scale tag, else 1).
    #[arg(long)]
    noisy_scale: Option<f64>,
    /// Multiply output values by this before quantizing
    /// (default: stretch the maximum to full range).
    #[arg(long)]
    output_scale: Option<f64>,
    /// Write 16-bit samples.
    #[arg(long)]
    sixteen_bit: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    reference: PathBuf,
    test: PathBuf,
    /// PSNR peak (the working-domain maximum).
    #[arg(long)]
    peak: f64,
    #[arg(long)]
    reference_scale: Option<f64>,
    #[arg(long)]
    test_scale: Option<f64>,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    manifest: PathBuf,
    /// Output CSV.
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

fn write_scaled(img: &Image, path: &Path, scale: Option<f64>, sixteen_bit: bool) -> Result<(), Error> {
    let base = if sixteen_bit {
        PgmOptions::sixteen_bit()
    } else {
        PgmOptions::default()
    };
    let scale = scale.unwrap_or_else(|| {
        let max = img.max();
        if max > 0.0 {
            base.maxval as f64 / max
        } else {
            1.0
        }
    });
    pgm::write_pgm_with(img, path, &base.with_scale(scale))
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let spec = NoiseSpec::new(args.peak, args.seed)?;
    info!("simulate peak={} seed={}", spec.peak, spec.seed);
    let clean = pgm::read_pgm(&args.clean)?;
    let (scaled, noisy) = poissonize(&clean, &spec)?;
    let opts = if args.sixteen_bit || noisy.max() > 255.0 {
        PgmOptions::sixteen_bit()
    } else {
        PgmOptions::default()
    };
    pgm::write_pgm_with(&noisy, &args.noisy, &opts)?;
    let full = if args.sixteen_bit { 65535.0 } else { 255.0 };
    write_scaled(&scaled, &args.scaled, Some(full / spec.peak), args.sixteen_bit)?;
    println!("noisy max {} ({} pixels)", noisy.max(), noisy.len());
    Ok(())
}

fn run_denoise(args: DenoiseArgs) -> Result<(), Error> {
    let pilot = match args.pilot.as_str() {
        "builtin" => PilotSpec::Builtin(args.config.builtin()),
        path => PilotSpec::External {
            path: path.into(),
            scale: args.pilot_scale,
        },
    };
    let cfg = args.config.config(pilot);
    cfg.validate()?;
    info!("config: {cfg}");
    let noisy = pgm::read_pgm_file(&args.noisy)?.working_image(args.noisy_scale)?;
    let out = denoise(&noisy, &cfg)?;
    for (i, pass) in out.passes.iter().enumerate() {
        println!(
            "iteration {}: {:.3}s, {} groups, {} failed, max jitter {:e}",
            i + 1,
            pass.elapsed.as_secs_f64(),
            pass.groups,
            pass.failed_groups,
            pass.max_jitter
        );
    }
    write_scaled(&out.image, &args.out, args.output_scale, args.sixteen_bit)
}

fn evaluate(args: EvaluateArgs) -> Result<(), Error> {
    if !(args.peak > 0.0 && args.peak.is_finite()) {
        return Err(Error::Config(format!("peak must be > 0, got {}", args.peak)));
    }
    let reference = pgm::read_pgm_file(&args.reference)?.working_image(args.reference_scale)?;
    let test = pgm::read_pgm_file(&args.test)?.working_image(args.test_scale)?;
    let m = mse(&reference, &test)?;
    println!("psnr_db={:.4} mse={:.8}", psnr_from_mse(m, args.peak), m);
    Ok(())
}

fn benchmark(args: BenchmarkArgs) -> Result<(), Error> {
    let cfg = args.config.config(PilotSpec::Builtin(args.config.builtin()));
    cfg.validate()?;
    info!("config: {cfg}");
    let manifest = Manifest::load(&args.manifest)?;
    let records = run_benchmark(&manifest, &cfg)?;
    let table = build_table(&records);
    let csv = table.to_csv(&[format!("config: {cfg}")]);
    std::fs::write(&args.out, csv).map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    print!("{}", table.to_text());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Denoise(a) => run_denoise(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Benchmark(a) => benchmark(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
