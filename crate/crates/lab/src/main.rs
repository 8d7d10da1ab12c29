use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use fnls_lab::config::{ConfigFile, Experiment, ExperimentConfig, Overrides};
use fnls_lab::report::Report;

/// Run a verification experiment and exit non-zero if any assertion fails.
#[derive(Debug, Parser)]
#[command(name = "fnls-lab", version)]
struct Cli {
    /// conserve, invariance, converge, picard, counting, strichartz, ansatz, threshold, or all
    experiment: String,
    /// TOML config file; for `all`, a directory of config files
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "n-max")]
    n_max: Option<u32>,
    #[arg(long = "T")]
    t_final: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    samples: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn print(report: &Report) {
    for a in &report.assertions {
        let tag = a.criterion.map_or(String::new(), |c| format!(" [criterion {c}]"));
        let status = if a.passed { "PASS" } else { "FAIL" };
        println!("{status} {}{tag} {}: {}", report.experiment, a.name, a.detail);
    }
    println!(
        "{}: {} (results in {})",
        report.experiment,
        if report.passed() {
            "all assertions passed"
        } else {
            "assertions failed"
        },
        report.config.output_dir.display()
    );
}

fn main_inner(cli: Cli) -> Result<bool> {
    let overrides = Overrides {
        seed: cli.seed,
        alpha: cli.alpha,
        n_max: cli.n_max,
        t_final: cli.t_final,
        dt: cli.dt,
        samples: cli.samples,
        out: cli.out,
    };
    let reports = if cli.experiment == "all" {
        let dir = cli.config.unwrap_or_else(|| PathBuf::from("configs"));
        fnls_lab::run_all(&dir, &overrides)?
    } else {
        let experiment: Experiment = cli.experiment.parse()?;
        let file = match &cli.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let cfg = ExperimentConfig::resolve(Some(experiment), file, overrides)?;
        vec![fnls_lab::run(&cfg)?]
    };
    reports.iter().for_each(print);
    if reports.is_empty() {
        println!("no experiments to run");
    }
    Ok(reports.iter().all(Report::passed))
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
