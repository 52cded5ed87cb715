use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nlcd::core::{BurgersProfile, Grid, HeatProfile, Profile};
use nlcd::io::write_field_csv;
use nlcd::manifest::{RunManifest, Status};
use nlcd::study::execute_as;
use nlcd::{load_spec, Result, Study};

/// Nonlocal convection-diffusion laboratory.
#[derive(Parser)]
#[command(name = "nlcd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a TOML spec.
    Run { spec: PathBuf },
    /// Run only the randomized inequality audits of a spec.
    Verify { spec: PathBuf },
    /// Sample a self-similar profile to an `x,u` CSV.
    Profile {
        #[arg(long, value_enum)]
        kind: ProfileKind,
        /// Total mass.
        #[arg(long = "M", visible_alias = "mass", default_value_t = 1.0)]
        mass: f64,
        /// Diffusivity (half the kernel's second moment).
        #[arg(long = "A", visible_alias = "diffusivity", default_value_t = 1.0)]
        diffusivity: f64,
        #[arg(long, short = 't', default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 20.0)]
        half_width: f64,
        #[arg(long, default_value_t = 2000)]
        cells: usize,
        /// Convection coefficient of the Burgers profile.
        #[arg(long, default_value_t = 1.0)]
        coupling: f64,
        #[arg(long, default_value = "profile.csv")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileKind {
    Heat,
    Burgers,
}

fn report(m: &RunManifest) -> ExitCode {
    for c in &m.criteria {
        let tag = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        println!("{tag} {}: {}", c.name, c.detail);
    }
    for n in &m.notes {
        println!("note: {n}");
    }
    println!("outputs in {}", m.output_dir.display());
    if m.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main_inner(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { spec } => {
            let s = load_spec(&spec)?;
            Ok(report(&execute_as(&s, s.study)?))
        }
        Command::Verify { spec } => {
            let s = load_spec(&spec)?;
            Ok(report(&execute_as(&s, Study::Inequalities)?))
        }
        Command::Profile { kind, mass, diffusivity, t, half_width, cells, coupling, out } => {
            let p = match kind {
                ProfileKind::Heat => Profile::Heat(HeatProfile::new(mass, diffusivity)?),
                ProfileKind::Burgers => Profile::Burgers(BurgersProfile::with_coupling(mass, diffusivity, coupling)?),
            };
            let grid = Grid::symmetric(half_width, cells)?;
            write_field_csv(&out, &p.sample(&grid, t)?)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
