use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod report;

use commands::Settings;
use config::{ConfigError, RunConfig};
use report::Report;

const CONFIG_ERROR: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "padic-harmonics", version, about = "Finite-level verification of p-adic spherical harmonics")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of random samples for sampled identities.
    #[arg(long, global = true)]
    samples: Option<usize>,

    /// Cap on closure and enumeration sizes.
    #[arg(long, global = true)]
    budget: Option<usize>,

    /// Write JSON lines here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Dimensions, orthonormality and irreducibility of the harmonic spaces.
    Decompose,
    /// Zonal functions, addition theorem, reproducing kernel, idempotent sums.
    Zonal,
    /// K_0(p^M) double cosets and subgroup generators.
    DoubleCosets,
    /// Newform theory for one principal series model.
    PrincipalSeries,
    /// Exact checks of the real and complex zonal harmonics.
    ArchVerify,
    /// The full verification grid.
    VerifyAll,
}

fn load(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(s) = cli.samples {
        cfg.run.samples = s;
    }
    if let Some(b) = cli.budget {
        cfg.run.budget = b;
    }
    if cli.out.is_some() {
        cfg.output = cli.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cmd: Command, cfg: &RunConfig) -> Result<Report, ConfigError> {
    let s = Settings::from_config(cfg);
    let n = cfg.n();
    let records = match cmd {
        Command::Decompose => commands::decompose(&cfg.ring()?, n, &s),
        Command::Zonal => commands::zonal(&cfg.ring()?, n, &s),
        Command::DoubleCosets => commands::double_cosets(&cfg.ring()?, n, &s),
        Command::PrincipalSeries => {
            let r = cfg.ring()?;
            let chars = commands::select_characters(cfg, &r, n).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            commands::principal_series(chars, &s)
        }
        Command::ArchVerify => commands::arch_verify(cfg, &s),
        Command::VerifyAll => commands::verify_all(&s),
    };
    Ok(Report::new(records, s.seed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let start = Instant::now();
    let report = match execute(cli.command, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let lines = report.to_jsonl();
    let written = match &cfg.output {
        Some(p) => std::fs::write(p, &lines),
        None => std::io::stdout().lock().write_all(lines.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(CONFIG_ERROR);
    }
    eprint!("{}", report.summary());
    eprintln!("seed {}, {:.1}s", cfg.run.seed, start.elapsed().as_secs_f64());
    ExitCode::from(report.exit_code() as u8)
}
