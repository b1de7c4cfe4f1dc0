use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hsrn_cli::commands;
use hsrn_cli::commands::bench::BenchOpts;
use hsrn_cli::commands::eval::EvalOpts;
use hsrn_cli::commands::inspect::InspectOpts;
use hsrn_cli::commands::sr::SrOpts;

#[derive(Parser)]
#[command(
    name = "hsrn",
    version,
    about = "Frequency-domain single-image super-resolution",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a key=value run configuration file.
    Train {
        /// Path to the run configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Upscale a single image with a trained model.
    Sr {
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        /// Image to upscale.
        #[arg(long)]
        input: PathBuf,
        /// Where to write the upscaled image.
        #[arg(long)]
        output: PathBuf,
        /// Overlap in pixels between reconstruction tiles.
        #[arg(long, default_value_t = 16)]
        tile_overlap: usize,
    },
    /// Score a model against a directory of reference images.
    Eval {
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        /// Directory of reference images.
        #[arg(long)]
        dataset: PathBuf,
        /// Expected upscale factor; must match the model when given.
        #[arg(long)]
        scale: Option<usize>,
        /// Write the per-image report here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Overlap in pixels between reconstruction tiles.
        #[arg(long, default_value_t = 16)]
        tile_overlap: usize,
    },
    /// Measure reconstruction speed on synthetic planes.
    Bench {
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated square plane sizes to benchmark.
        #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
        sizes: Vec<usize>,
        /// Timed repetitions per size (after one warm-up run).
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// Write the timing table here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Overlap in pixels between reconstruction tiles.
        #[arg(long, default_value_t = 16)]
        tile_overlap: usize,
    },
    /// Dump a model's kernels and, optionally, its activations on an image.
    Inspect {
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        /// Directory to write images and CSV grids into.
        #[arg(long)]
        out_dir: PathBuf,
        /// Probe image for activation dumps.
        #[arg(long)]
        image: Option<PathBuf>,
        /// Restrict the dump to a single layer.
        #[arg(long)]
        layer: Option<usize>,
    },
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config } => commands::train::run(&config),
        Command::Sr { model, input, output, tile_overlap } => {
            commands::sr::run(&SrOpts { model, input, output, tile_overlap })
        }
        Command::Eval { model, dataset, scale, csv, tile_overlap } => {
            commands::eval::run(&EvalOpts { model, dataset, scale, csv, tile_overlap })
        }
        Command::Bench { model, sizes, repeats, csv, tile_overlap } => {
            commands::bench::run(&BenchOpts { model, sizes, repeats, csv, tile_overlap })
        }
        Command::Inspect { model, out_dir, image, layer } => {
            commands::inspect::run(&InspectOpts { model, out_dir, image, layer })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

/// Honor `HSRN_THREADS` before any parallel work spins up the global pool.
fn init_thread_pool() {
    if let Ok(value) = std::env::var("HSRN_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
            }
        }
    }
}
