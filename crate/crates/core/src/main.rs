use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ctloss::imageio::{read_image, write_image};
use ctloss::run::{apply_connectivity, maxima_csv, run_optimize, tree_json, RunConfig};
use ctloss::synth::SynthSpec;
use ctloss::{Connectivity, Error};

#[derive(Parser)]
#[command(name = "ctloss", version, about = "Differentiable max-tree tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConnArg {
    Chain2,
    Conn4,
    Conn8,
}

impl From<ConnArg> for Connectivity {
    fn from(c: ConnArg) -> Self {
        match c {
            ConnArg::Chain2 => Connectivity::Chain2,
            ConnArg::Conn4 => Connectivity::Conn4,
            ConnArg::Conn8 => Connectivity::Conn8,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    FourBumps,
    TwoRidges,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the max-tree of an image as JSON.
    Tree {
        input: PathBuf,
        #[arg(long, value_enum)]
        connectivity: Option<ConnArg>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Per-maximum altitude, dynamics and volume as CSV.
    Measures {
        input: PathBuf,
        #[arg(long, value_enum)]
        connectivity: Option<ConnArg>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic test image.
    Synth {
        #[arg(value_enum)]
        generator: Generator,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an optimisation described by a JSON configuration.
    Optimize { config: PathBuf },
}

fn emit(text: &str, output: Option<PathBuf>) -> Result<(), Error> {
    match output {
        Some(p) => std::fs::write(&p, text).map_err(|e| Error::Io { path: p, source: e }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Io {
                path: "<stdout>".into(),
                source: e,
            }),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Tree {
            input,
            connectivity,
            output,
        } => {
            let img = apply_connectivity(read_image(&input)?, connectivity.map(Into::into))?;
            emit(&tree_json(&img)?, output)
        }
        Command::Measures {
            input,
            connectivity,
            output,
        } => {
            let img = apply_connectivity(read_image(&input)?, connectivity.map(Into::into))?;
            emit(&maxima_csv(&img), output)
        }
        Command::Synth {
            generator,
            output,
            noise,
            seed,
        } => {
            let spec = match generator {
                Generator::FourBumps => SynthSpec::four_bumps_default(noise.unwrap_or(0.02), seed),
                Generator::TwoRidges => SynthSpec::two_ridges_default(noise.unwrap_or(0.0), seed),
            };
            write_image(&spec.generate()?, &output)
        }
        Command::Optimize { config } => {
            let cfg = RunConfig::load(&config)?;
            let summary = run_optimize(&cfg)?;
            print!("{}", summary.report(&cfg.loss));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::NonFinite { .. } => 3,
                _ => 1,
            })
        }
    }
}
