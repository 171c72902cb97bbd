use std::process::ExitCode;

use clap::Parser;

use aqshift::commands::{enhance, eval, train, uicm};

#[derive(Parser)]
#[command(
    name = "aqshift",
    version,
    about = "Two-stage underwater image enhancement: percentile color correction\nfollowed by a learned per-pixel channel-wise shift"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand)]
enum Command {
    /// Enhance a batch of images with trained weights
    Enhance(enhance::EnhanceArgs),
    /// Train the shift predictor on paired input/ground-truth images
    Train(train::TrainArgs),
    /// Score predictions against references (MSE, PSNR, SSIM)
    Eval(eval::EvalArgs),
    /// Print colorfulness scores for images
    Uicm(uicm::UicmArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Enhance(args) => enhance::run(args),
        Command::Train(args) => train::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Uicm(args) => uicm::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
