//! `layerblur`: synthesize, compare, visualize and deblur layered motion blur.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numeric failure.

mod artifacts;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use layerblur::init::ForegroundChoice;
use layerblur::BlurModelKind;

#[derive(Parser)]
#[command(name = "layerblur", version, about = "Occlusion-aware layered motion blur tools")]
struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene script into blurred frames plus the ground truth.
    Synth {
        /// Scene script (JSON).
        script: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Replaces the script's noise seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Generative model used to render the frames.
        #[arg(long)]
        model: Option<BlurModelKind>,
    },
    /// Restore layers, mask and motions from a directory of frame_*.png.
    Deblur {
        /// Directory of frame_*.png, read in name order; defaults to the
        /// config's frames_dir.
        frames: Option<PathBuf>,
        /// Run configuration (JSON); defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for L0/L1/A.png, motions.json, energy.csv,
        /// metrics.json; defaults to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces the configured RANSAC seed offset.
        #[arg(long)]
        seed: Option<u64>,
        /// Blur model used by the solver (proposed or conventional).
        #[arg(long)]
        model: Option<BlurModelKind>,
        /// Start from the ground-truth bundle instead of flow initialization.
        #[arg(long)]
        gt_init: bool,
        /// Directory holding gt_L0/gt_L1/gt_A.png and motions.json; defaults
        /// to the frame directory.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Which RANSAC motion is the foreground.
        #[arg(long)]
        fg_label: Option<ForegroundChoice>,
    },
    /// Render a script under both models and map their difference.
    Modelcmp {
        script: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump and draw the per-pixel blur kernels of both models.
    Kernelviz {
        script: PathBuf,
        /// Pixels as x,y; repeat or separate with spaces.
        #[arg(long = "pixel", required = true, num_args = 1.., value_parser = commands::parse_pixel)]
        pixels: Vec<(usize, usize)>,
        #[arg(long, default_value_t = 0)]
        frame: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a restored bundle (L0/L1/A.png, motions.json) against ground truth.
    Eval {
        restored: PathBuf,
        truth: PathBuf,
        /// Also write metrics.json here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Re-anchor the restored layers on the truth's middle-frame pose
        /// first (needs restored motions).
        #[arg(long)]
        align: bool,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth { script, out, seed, model } => commands::synth(&script, &out, seed, model),
        Command::Deblur {
            frames,
            config,
            out,
            seed,
            model,
            gt_init,
            gt,
            fg_label,
        } => commands::deblur_cmd(commands::DeblurArgs {
            frames,
            config,
            out,
            seed,
            model,
            gt_init,
            gt,
            fg_label,
        }),
        Command::Modelcmp { script, out } => commands::modelcmp(&script, &out),
        Command::Kernelviz {
            script,
            pixels,
            frame,
            out,
        } => commands::kernelviz(&script, &pixels, frame, &out),
        Command::Eval {
            restored,
            truth,
            out,
            align,
        } => {
            let metrics = commands::eval(&restored, &truth, out.as_deref(), align)?;
            println!("{}", serde_json::to_string_pretty(&metrics)?);
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numeric = err
        .chain()
        .any(|e| e.downcast_ref::<layerblur::Error>().is_some_and(layerblur::Error::is_numeric));
    if numeric {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
