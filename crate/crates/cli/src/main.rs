use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use mnkit_core::basis::{BasisFamily, MomentBasis};
use mnkit_core::harness::{self, output, Config};
use mnkit_core::quadrature::angular_quadrature;
use mnkit_core::realizability::build_polytope;

#[derive(Parser)]
#[command(name = "mnkit", version, about = "Realizability-preserving DG solver for entropy-based moment closures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write profile, logs and a JSON summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the number of cells.
        #[arg(long)]
        cells: Option<usize>,
    },
    /// Convergence table over a list of cell counts.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        cells: Vec<usize>,
        /// CSV destination; the table is always printed.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the facets of the numerically realizable slice.
    Polytope {
        #[arg(long, default_value = "monomial")]
        basis: BasisFamily,
        #[arg(long)]
        order: usize,
        #[arg(long, default_value_t = 40)]
        nq: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn run(config: &Path, out: &Path, cells: Option<usize>) -> Result<()> {
    let cfg = Config::from_file(config)?;
    let report = harness::run_with_cells(&cfg, cells.unwrap_or(cfg.cells))?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    output::write_profile(&mut create(&out.join("profile.csv"))?, &report)?;
    output::write_theta_log(&mut create(&out.join("theta.csv"))?, &report)?;
    output::write_regularization_log(&mut create(&out.join("regularization.csv"))?, &report)?;
    output::write_mass(&mut create(&out.join("mass.csv"))?, &report)?;
    output::write_summary(&mut create(&out.join("summary.json"))?, &report)?;

    println!(
        "{} J={} steps={} t={} wall={:.2}s",
        cfg.problem,
        report.state.len(),
        report.steps,
        report.t_final,
        report.wall_time_s
    );
    println!(
        "limiter events={} theta_max={:.3e} regularizations={} mean violations={}",
        report.theta_log.len(),
        report.theta_max,
        report.regularization_log.len(),
        report.mean_violations
    );
    if let Some((e1, einf)) = report.errors {
        println!("E1={e1:.4e} Einf={einf:.4e}");
    }
    Ok(())
}

fn converge(config: &Path, cells: &[usize], out: Option<&Path>) -> Result<()> {
    let cfg = Config::from_file(config)?;
    let report = harness::convergence_study(&cfg, cells)?;
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    output::write_convergence(&mut lock, &report)?;
    lock.flush()?;
    if let Some(path) = out {
        output::write_convergence(&mut create(path)?, &report)?;
    }
    Ok(())
}

fn polytope(family: BasisFamily, order: usize, nq: usize, out: &Path) -> Result<()> {
    let basis = MomentBasis::new(family, order)?;
    let quad = angular_quadrature(nq)?;
    let poly = build_polytope(&basis, &quad)?;
    let mut w = create(out)?;
    output::write_facets(&mut w, &poly)?;
    w.flush()?;
    println!("{} facets for {basis} with n_q = {nq}", poly.facets().len());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, out, cells } => run(&config, &out, cells),
        Command::Converge { config, cells, out } => converge(&config, &cells, out.as_deref()),
        Command::Polytope { basis, order, nq, out } => polytope(basis, order, nq, &out),
    }
}
