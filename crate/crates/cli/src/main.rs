mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "lbaudit", version, about = "Anonymity auditing for text-to-image leaderboards")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct EvalArgs {
    /// Dataset manifest.json
    #[arg(long)]
    manifest: PathBuf,
    /// Reference generations per (prompt, model) cell
    #[arg(long, default_value_t = 10)]
    k_ref: usize,
    /// Random split repetitions
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// L2-normalize embeddings before any distance
    #[arg(long)]
    normalize: bool,
    /// Include wall-clock runtime in the report
    #[arg(long)]
    timing: bool,
    /// Output path (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum OvrMode {
    Full,
    Limited,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic clustered embedding dataset
    GenSynth {
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 22)]
        models: usize,
        #[arg(long, default_value_t = 50)]
        prompts: usize,
        /// Generations per (prompt, model)
        #[arg(long, default_value_t = 30)]
        k: usize,
        /// Mean distance between model centers of a prompt
        #[arg(long, default_value_t = 8.0)]
        inter_sep: f64,
        /// Per-coordinate noise std within a cluster
        #[arg(long, default_value_t = 1.0)]
        intra_std: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Multi-class nearest-centroid attribution (top-k accuracy)
    Attribute(EvalArgs),
    /// One-vs-rest detection of a target model
    OneVsRest {
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, value_enum, default_value_t = OvrMode::Full)]
        mode: OvrMode,
        /// Target model id
        #[arg(long, default_value_t = 0)]
        target: u32,
        /// Quantile levels for limited mode
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.80, 0.85, 0.90, 0.95])]
        alpha: Vec<f64>,
    },
    /// Per-prompt distinguishability scores as CSV
    Distinguishability {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0.75)]
        tau: f64,
        #[arg(long)]
        normalize: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Attack success binned by distinguishability, as CSV
    SuccessCurve {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0.75)]
        tau: f64,
        #[arg(long, default_value_t = 4)]
        bins: usize,
        #[arg(long, default_value_t = 10)]
        k_ref: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        normalize: bool,
        /// Also write per-prompt (D, top-1) points here
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Noise-residual fingerprint attribution over DIR/<model>/*.pgm trees
    BaselineMarra {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fourier power-law attribution over DIR/<model>/*.pgm trees
    BaselineFourier {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Fit band as fractions of the sampling rate
        #[arg(long, default_value_t = 0.25)]
        band_lo: f64,
        #[arg(long, default_value_t = 0.5)]
        band_hi: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Adversarially post-process an image against a toy encoder ensemble
    Defend {
        /// Image to protect (PGM)
        #[arg(long)]
        image: PathBuf,
        /// Another model's generation to pull toward (PGM)
        #[arg(long)]
        positive: PathBuf,
        /// Budget in 8-bit counts
        #[arg(long, default_value_t = 4.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 0.1)]
        tau_temp: f64,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        /// Seeds of the ensemble's toy encoders
        #[arg(long, value_delimiter = ',', default_values_t = vec![1u64, 2, 3, 4])]
        encoder_seeds: Vec<u64>,
        #[arg(long, default_value_t = 16)]
        embed_dim: usize,
        /// Defended image (PGM)
        #[arg(long)]
        out: PathBuf,
        /// Loss trace CSV
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Add Gaussian noise to an image
    UndoNoise {
        #[arg(long)]
        image: PathBuf,
        /// Noise std in 8-bit counts
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cost of buying reference generations
    Cost {
        /// Per-image price of each model
        #[arg(long, value_delimiter = ',', required = true)]
        prices: Vec<f64>,
        /// Images bought per model
        #[arg(long, default_value_t = 1)]
        images: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Top-k plus one-vs-rest metrics for every model
    Report {
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.80, 0.85, 0.90, 0.95])]
        alpha: Vec<f64>,
    },
    /// Defense sweep on the synthetic toy-encoder attack pipeline
    ToyAttack {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 2.0, 4.0, 8.0])]
        epsilon: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
