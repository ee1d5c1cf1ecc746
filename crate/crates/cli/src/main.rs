use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sysaware_cli::{codec_cmd, run, theory, CliError, Config};

#[derive(Parser)]
#[command(name = "sysaware", version, about = "System-aware compression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Regular and system-aware rate-distortion sweeps on the configured system.
    Run(ExperimentArgs),
    /// Theoretical Gaussian rate-distortion curve.
    Theory(ExperimentArgs),
    /// Standalone tree codec.
    Codec {
        #[command(subcommand)]
        op: CodecOp,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat `key = value` config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Noise seed (overrides `system.seed`).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum CodecOp {
    /// Text signal (one value per line) to bitstream.
    Encode {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 5e-4)]
        nu: f64,
        #[arg(long, default_value_t = 8)]
        q_bits: u8,
        /// Tree depth; full depth when omitted.
        #[arg(long)]
        depth: Option<u8>,
    },
    /// Bitstream to text reconstruction.
    Decode { input: PathBuf, output: PathBuf },
}

fn load(args: &ExperimentArgs) -> Result<(Config, PathBuf), CliError> {
    let mut cfg = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let (cfg, out) = load(&args)?;
            let r = run::run_experiment(&cfg, &out)?;
            println!(
                "wrote {} regular and {} proposed points to {}",
                r.regular.points.len(),
                r.proposed.points.len(),
                out.display()
            );
        }
        Command::Theory(args) => {
            let (cfg, out) = load(&args)?;
            let r = theory::run_theory(&cfg, &out)?;
            println!("wrote {} theory points to {}", r.points.len(), out.display());
        }
        Command::Codec { op } => match op {
            CodecOp::Encode {
                input,
                output,
                nu,
                q_bits,
                depth,
            } => {
                let enc = codec_cmd::encode_file(&input, &output, nu, q_bits, depth)?;
                println!(
                    "leaves={} rate_bits={} squared_error={}",
                    enc.code.leaf_count(),
                    enc.code.rate_bits(),
                    enc.squared_error
                );
            }
            CodecOp::Decode { input, output } => {
                let signal = codec_cmd::decode_file(&input, &output)?;
                println!("samples={}", signal.len());
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
