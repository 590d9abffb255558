use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use widthtopo::config::Config;
use widthtopo::energy::EnergyVariant;
use widthtopo::io::{load_field_auto, save_field_auto};
use widthtopo::minimize::{meets_target, minimize_energy};
use widthtopo::nlstd::{log_to_csv, metrics, run_topo_nlstd_with, unary_features};
use widthtopo::persistence::{betti_at_threshold, compute_superlevel_persistence};
use widthtopo::{fixtures, Error, ScalarField};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

/// Width-aware topological energies and segmentation.
///
/// Images are read and written as PGM, PNG or raw f32 (`.f32`), chosen by
/// extension. Exit codes: 0 success, 1 I/O error, 2 configuration error,
/// 3 invariant violation. `TWS_THREADS` caps the worker thread count.
#[derive(Parser)]
#[command(name = "widthtopo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Superlevel persistence diagram as CSV.
    Ph {
        image: PathBuf,
        out_csv: PathBuf,
        /// Also print the Betti numbers of the superlevel set at this value.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Minimize a topological energy directly over the image.
    Minimize {
        image: PathBuf,
        config: PathBuf,
        out_image: PathBuf,
        #[arg(long, value_enum, default_value_t = Variant::Wt)]
        variant: Variant,
        /// Save every N-th iterate next to the output.
        #[arg(long)]
        snapshot_every: Option<usize>,
        /// Write the energy trace to this CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Segment an image with the nonlocal solver.
    Segment {
        image: PathBuf,
        config: PathBuf,
        out_dir: PathBuf,
        /// One feature image per class.
        #[arg(long, num_args = 1.., conflicts_with_all = ["means", "sigma"])]
        features: Vec<PathBuf>,
        /// Class mean intensities for quadratic features, e.g. `0.1,0.9`.
        #[arg(long, value_delimiter = ',', requires = "sigma")]
        means: Vec<f64>,
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Compare a prediction with ground truth, both binarized at 0.5.
    Metrics {
        pred: PathBuf,
        truth: PathBuf,
        /// Target Betti numbers; defaults to those of the truth image.
        #[arg(long, requires = "beta1")]
        beta0: Option<usize>,
        #[arg(long, requires = "beta0")]
        beta1: Option<usize>,
    },
    /// Write a synthetic test image.
    Fixture {
        #[arg(value_enum)]
        name: FixtureName,
        out: PathBuf,
        /// Seed for the noisy fixtures.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Ph,
    Wt,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureName {
    TwoBlob,
    SingleSaddle,
    Staircase,
    NoisyTwoBlob,
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Config(String),
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Core(e) if e.is_invariant() => EXIT_INVARIANT,
            Self::Core(Error::Config(_)) | Self::Config(_) => EXIT_CONFIG,
            Self::Core(_) | Self::Io(_) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Core(e) => e.fmt(f),
            Self::Config(m) | Self::Io(m) => f.write_str(m),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn configure_threads() -> CliResult {
    let Ok(value) = std::env::var("TWS_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("TWS_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn cmd_ph(image: &Path, out_csv: &Path, threshold: Option<f64>) -> CliResult {
    let field = load_field_auto(image)?;
    let diagram = compute_superlevel_persistence(&field);
    write_text(out_csv, &diagram.to_csv())?;
    if let Some(t) = threshold {
        println!("beta0 {}", betti_at_threshold(&diagram, t, 0));
        println!("beta1 {}", betti_at_threshold(&diagram, t, 1));
    }
    Ok(())
}

fn snapshot_path(out: &Path, iter: usize) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("iterate");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("f32");
    out.with_file_name(format!("{stem}_{iter:05}.{ext}"))
}

fn cmd_minimize(image: &Path, config: &Path, out: &Path, variant: Variant, every: Option<usize>, trace: Option<&Path>) -> CliResult {
    let field = load_field_auto(image)?;
    let cfg = Config::load(config)?;
    let params = cfg.topo()?;
    let adamw = cfg.adamw()?;
    let options = cfg.minimize_options()?;
    let variant = match variant {
        Variant::Ph => EnergyVariant::Ph,
        Variant::Wt => EnergyVariant::Wt,
    };
    if every == Some(0) {
        return Err(CliError::Config("--snapshot-every must be at least 1".into()));
    }
    let mut snapshot_error = None;
    let outcome = minimize_energy(&field, &params, adamw, options, variant, |i, f| {
        if every.is_some_and(|n| i % n == 0) && snapshot_error.is_none() {
            snapshot_error = save_field_auto(f, snapshot_path(out, i)).err();
        }
    })?;
    if let Some(e) = snapshot_error {
        return Err(e.into());
    }
    save_field_auto(&outcome.field, out)?;
    if let Some(path) = trace {
        let mut csv = String::from("iter,energy\n");
        for (i, e) in outcome.trace.iter().enumerate() {
            csv.push_str(&format!("{i},{e}\n"));
        }
        write_text(path, &csv)?;
    }
    let diagram = compute_superlevel_persistence(&outcome.field);
    println!("iterations {}", outcome.iterations);
    println!("energy {}", outcome.trace.last().copied().unwrap_or(0.0));
    println!("beta0 {}", betti_at_threshold(&diagram, 0.5, 0));
    println!("beta1 {}", betti_at_threshold(&diagram, 0.5, 1));
    println!("target_met {}", meets_target(&outcome.field, &params));
    Ok(())
}

fn cmd_segment(image: &Path, config: &Path, out_dir: &Path, features: &[PathBuf], means: &[f64], sigma: Option<f64>) -> CliResult {
    let img = load_field_auto(image)?;
    let cfg = Config::load(config)?;
    let solver = cfg.solver()?;
    let model = cfg.weight_model()?;
    let o: Vec<ScalarField> = if !features.is_empty() {
        features.iter().map(load_field_auto).collect::<Result<_, _>>()?
    } else {
        let sigma = sigma.ok_or_else(|| CliError::Config("either --features or --means with --sigma is required".into()))?;
        if means.is_empty() || !(sigma > 0.0) {
            return Err(CliError::Config("--means needs at least one value and --sigma must be positive".into()));
        }
        unary_features(&img, means, sigma)
    };
    fs::create_dir_all(out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let out = run_topo_nlstd_with(&o, &img, &model, &solver, |_| {})?;
    for (l, channel) in out.u.channels().iter().enumerate() {
        save_field_auto(channel, out_dir.join(format!("u_{l}.png")))?;
    }
    write_text(&out_dir.join("log.csv"), &log_to_csv(&out.log))?;
    let fg = out.u.channel(solver.topo_channel);
    let diagram = compute_superlevel_persistence(fg);
    println!("iterations {}", out.log.len());
    println!("converged {}", out.converged);
    println!("beta0 {}", betti_at_threshold(&diagram, 0.5, 0));
    println!("beta1 {}", betti_at_threshold(&diagram, 0.5, 1));
    Ok(())
}

fn cmd_metrics(pred: &Path, truth: &Path, targets: Option<[usize; 2]>) -> CliResult {
    let p = load_field_auto(pred)?;
    let t = load_field_auto(truth)?;
    let report = metrics(&p, &t, targets)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn noisy_two_blob(seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = fixtures::two_blob();
    for v in field.values_mut() {
        *v = (*v + 0.2 * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0);
    }
    field
}

fn cmd_fixture(name: FixtureName, out: &Path, seed: u64) -> CliResult {
    let field = match name {
        FixtureName::TwoBlob => fixtures::two_blob(),
        FixtureName::SingleSaddle => fixtures::single_saddle(),
        FixtureName::Staircase => fixtures::staircase(),
        FixtureName::NoisyTwoBlob => noisy_two_blob(seed),
    };
    save_field_auto(&field, out)?;
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    configure_threads()?;
    match cli.command {
        Command::Ph { image, out_csv, threshold } => cmd_ph(&image, &out_csv, threshold),
        Command::Minimize {
            image,
            config,
            out_image,
            variant,
            snapshot_every,
            trace,
        } => cmd_minimize(&image, &config, &out_image, variant, snapshot_every, trace.as_deref()),
        Command::Segment {
            image,
            config,
            out_dir,
            features,
            means,
            sigma,
        } => cmd_segment(&image, &config, &out_dir, &features, &means, sigma),
        Command::Metrics { pred, truth, beta0, beta1 } => cmd_metrics(&pred, &truth, beta0.zip(beta1).map(|(a, b)| [a, b])),
        Command::Fixture { name, out, seed } => cmd_fixture(name, &out, seed),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
