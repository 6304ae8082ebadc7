use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sqdr::cli::{self, EvalArgs, InferArgs};
use sqdr::metrics::EvalOptions;

#[derive(Parser)]
#[command(name = "sqdr", version, about = "Sinc front-end voice activity detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a config file; writes best.sqdr, final.sqdr, trainlog.csv.
    Train {
        config: PathBuf,
        out_dir: PathBuf,
    },
    /// Evaluate a checkpoint; prints the report as JSON.
    Eval {
        checkpoint: PathBuf,
        /// Dataset directory (WAVs + manifest.tsv) or synthetic:n=..,speech_frac=..
        dataset: String,
        #[arg(long)]
        smooth: bool,
        /// Comma-separated SNR list in dB, e.g. "10,5,0,-5,-10".
        #[arg(long, allow_hyphen_values = true)]
        snr_sweep: Option<String>,
        #[arg(long)]
        noise_dir: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, default_value_t = 0.15)]
        stride: f64,
        #[arg(long, default_value_t = 0.63)]
        window: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score one WAV file; prints offset_s, score, decision per window.
    Infer {
        checkpoint: PathBuf,
        wav: PathBuf,
        #[arg(long, default_value_t = 0.15)]
        stride: f64,
        #[arg(long, default_value_t = 0.63)]
        window: f64,
        #[arg(long)]
        smooth: bool,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Mix speech with noise at a target SNR.
    Mix {
        speech: PathBuf,
        noise: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        snr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        out: PathBuf,
    },
    /// Write a synthetic labeled dataset.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        speech_frac: f64,
        out_dir: PathBuf,
    },
    /// Dump learned cutoffs, gains and magnitude responses as CSV.
    InspectFilters {
        checkpoint: PathBuf,
        out_prefix: PathBuf,
    },
}

fn run(cmd: Command) -> sqdr::Result<()> {
    match cmd {
        Command::Train { config, out_dir } => {
            let s = cli::cmd_train(&config, &out_dir, cli::threads_from_env()?)?;
            if s.single_class {
                eprintln!("warning: training set has a single class; ranking term was inactive");
            }
            eprintln!(
                "trained {} epochs; best epoch {} (val auroc {:.4})",
                s.epochs, s.best_epoch, s.best_val_auroc
            );
        }
        Command::Eval { checkpoint, dataset, smooth, snr_sweep, noise_dir, csv, threshold, stride, window, seed } => {
            let snr_sweep = snr_sweep.as_deref().map(cli::parse_snr_list).transpose()?;
            let args = EvalArgs {
                checkpoint,
                dataset,
                options: EvalOptions { window_s: window, stride_s: stride, smooth, threshold },
                snr_sweep,
                noise_dir,
                csv,
                seed,
            };
            print!("{}", cli::cmd_eval(&args)?);
        }
        Command::Infer { checkpoint, wav, stride, window, smooth, threshold } => {
            let args = InferArgs {
                checkpoint,
                wav,
                options: EvalOptions { window_s: window, stride_s: stride, smooth, threshold },
            };
            print!("{}", cli::cmd_infer(&args)?);
        }
        Command::Mix { speech, noise, snr, seed, out } => cli::cmd_mix(&speech, &noise, snr, seed, &out)?,
        Command::Synth { n, seed, speech_frac, out_dir } => cli::cmd_synth(n, seed, speech_frac, &out_dir)?,
        Command::InspectFilters { checkpoint, out_prefix } => {
            cli::cmd_inspect_filters(&checkpoint, &out_prefix)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Cli::parse();
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
