//! Command line driver.
//!
//! `projnull check <suite> --metric catalog:warped_pair` runs one suite on
//! one metric source and prints a line per check; `projnull run --config
//! file.json` does the same from a configuration file; `projnull catalog
//! list` shows the builtin metrics. The exit status is nonzero exactly when
//! some check fails (a check marked n/a does not fail).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use projnull::suite::{self, SuiteConfig, Tolerances};

#[derive(Parser)]
#[command(name = "projnull", version, about = "Residual checks for metric projective structures with Weyl nullity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite described by a JSON configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one named suite on a metric source.
    Check {
        /// Suite name; see `projnull check --help` for the list.
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(suite::suite_names()))]
        suite: String,
        /// `catalog:<name>` or a metric file path.
        #[arg(long)]
        metric: String,
        /// Optional partner source, same syntax as --metric.
        #[arg(long)]
        partner: Option<String>,
        /// Catalog parameter, `key=value`; repeatable.
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, String)>,
        /// Number of sampled points.
        #[arg(long, default_value_t = 60)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Residual tolerance for pointwise identities.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Tolerance for loop-holonomy comparisons.
        #[arg(long, default_value_t = 1e-4)]
        tol_holonomy: f64,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write per-point residuals as CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Catalog operations.
    Catalog {
        #[command(subcommand)]
        command: CatalogCommand,
    },
}

#[derive(Subcommand)]
enum CatalogCommand {
    /// List the builtin metrics.
    List,
}


fn parse_param(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected key=value, got `{s}`"))
}

fn execute(config: &SuiteConfig) -> Result<bool, projnull::Error> {
    let output = suite::run_suite(config)?;
    print!("{}", output.report.render_text());
    if let Some(path) = &config.out {
        std::fs::write(path, output.report.to_json()).map_err(|e| {
            projnull::Error::IntegrationFailure(format!("report write: {e}"))
        })?;
    }
    if let Some(path) = &config.csv {
        let ctx = suite::build_context(config)?;
        suite::write_csv(path, &ctx.spec.chart.coords, &output.rows)?;
    }
    Ok(output.report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => suite::load_config(&config).and_then(|cfg| execute(&cfg)),
        Command::Check {
            suite,
            metric,
            partner,
            params,
            points,
            seed,
            tol,
            tol_holonomy,
            out,
            csv,
        } => {
            let config = SuiteConfig {
                suite,
                metric,
                partner,
                params: params.into_iter().collect::<BTreeMap<_, _>>(),
                points,
                seed,
                tolerances: Tolerances {
                    residual: tol,
                    holonomy: tol_holonomy,
                    ..Tolerances::default()
                },
                out,
                csv,
            };
            execute(&config)
        }
        Command::Catalog { command } => match command {
            CatalogCommand::List => {
                for (name, description) in projnull::catalog::listing() {
                    println!("{name:<18} {description}");
                }
                Ok(true)
            }
        },
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
