use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use credit_ri::config::parse_config;
use credit_ri::pipeline::{run_experiment, write_outputs};
use credit_ri::plot::render_svg;
use credit_ri::Error;

#[derive(Parser)]
#[command(
    name = "credit-ri",
    version,
    about = "Compare reject-inference techniques for credit scorecards"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `out.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed; overrides `seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

fn exit_code(err: &Error) -> u8 {
    if let Error::Stage { stage: "config", .. } = err {
        return EXIT_CONFIG;
    }
    match err.root() {
        Error::Config { .. } => EXIT_CONFIG,
        Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run { config, out, seed } = cli.command;

    let mut run = match parse_config(&config) {
        Ok(run) => run,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(out) = out {
        run.out_dir = out;
    }
    if let Some(seed) = seed {
        run.experiment.master_seed = seed;
    }

    let report = match run_experiment(&run.experiment) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let written = write_outputs(&report, &run.out_dir).and_then(|mut files| {
        if run.plot {
            let path = run.out_dir.join("plot.svg");
            std::fs::write(&path, render_svg(&report)).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            files.push(path);
        }
        Ok(files)
    });
    match written {
        Ok(files) => {
            if run.verbosity > 0 {
                eprintln!(
                    "selected {} (validation default rate {:.4} at a = {})",
                    report.selected, report.selection_value, report.operating_rate
                );
                for (stage, ms) in &report.metadata.timings_ms {
                    eprintln!("  {stage}: {ms} ms");
                }
                for f in files {
                    eprintln!("  wrote {}", f.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_DATA)
        }
    }
}
