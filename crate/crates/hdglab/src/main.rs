use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hdglab::{meshio, output, selftest, ConfigError, StudyConfig};
use hdglab_core::{Diagonal, Domain};

#[derive(Parser)]
#[command(name = "hdglab", version, about = "HDG convergence studies for Poisson and Dirichlet boundary control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the refinement study described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print a mesh in the plain-text dump format.
    MeshDump {
        #[arg(long, default_value = "square")]
        domain: Domain,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value = "right")]
        diagonal: Diagonal,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the property suite.
    Selftest,
}

#[derive(Args)]
struct Overrides {
    /// Polynomial degrees, e.g. `1,2`.
    #[arg(long)]
    k: Option<String>,
    /// Mesh levels, e.g. `2,4,8,16,32`.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    diagonal: Option<String>,
    #[arg(long)]
    problem: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

impl Overrides {
    fn apply(&self, config: &mut StudyConfig) -> Result<(), ConfigError> {
        let pairs = [
            ("problem", &self.problem),
            ("k", &self.k),
            ("levels", &self.levels),
            ("tau", &self.tau),
            ("diagonal", &self.diagonal),
            ("out", &self.out),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        Ok(())
    }
}

fn run(config: PathBuf, overrides: Overrides) -> anyhow::Result<ExitCode> {
    let mut cfg = match StudyConfig::load(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(2));
        }
    };
    if let Err(e) = overrides.apply(&mut cfg).and_then(|_| cfg.validate()) {
        eprintln!("error: {e}");
        return Ok(ExitCode::from(2));
    }
    let outcome = hdglab::run_study(&cfg)?;
    for study in &outcome.studies {
        println!("# {} k={}", cfg.problem.name(), study.degree);
        print!("{}", output::to_csv_string(&study.report)?);
    }
    for f in &outcome.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(if outcome.failed() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn main() -> anyhow::Result<ExitCode> {
    hdglab::init_threads()?;
    match Cli::parse().command {
        Command::Run { config, overrides } => run(config, overrides),
        Command::MeshDump { domain, n, diagonal, out } => {
            let text = meshio::dump(&domain.build(n, diagonal)?);
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest => {
            let checks = selftest::run_all();
            for c in &checks {
                println!("{}", c.line());
            }
            Ok(if checks.iter().all(|c| c.passed()) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
