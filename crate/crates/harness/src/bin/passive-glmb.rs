use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use passive_glmb::assignment::{murty_k_best, CostMatrix};
use passive_glmb::divergence::{gaussian_inner_product, GaussianSummary};
use passive_glmb::nalgebra::{DMatrix, DVector};
use passive_glmb::oracle::{brute_force_assignments, inner_product_quadrature_1d};
use passive_glmb::sensor::{FusionOrder, Strategy};
use passive_glmb_harness::output::write_report;
use passive_glmb_harness::{run_experiment, scenario_one, scenario_two, HarnessError, ScenarioConfig};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "passive-glmb",
    version,
    about = "Multi-target tracking over a passive bistatic radar network"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Greedy,
    Exhaustive,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    DualStage,
    Selected,
    Shuffled,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write CSV results.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        /// Receivers selected per step.
        #[arg(long)]
        sensors: Option<usize>,
        #[arg(long)]
        trials: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        fusion_order: Option<OrderArg>,
        /// Birth particles per track.
        #[arg(long)]
        particles: Option<usize>,
        #[arg(long)]
        max_components: Option<usize>,
        /// Run trials on a thread pool; results are identical.
        #[arg(long)]
        parallel: bool,
        /// Also write per-step estimates and truth as JSON lines.
        #[arg(long)]
        dump_estimates: bool,
    },
    /// Check a config file and report the first problem.
    ValidateConfig { file: PathBuf },
    /// Print a built-in scenario config as JSON.
    DefaultConfig {
        #[arg(value_parser = ["1", "2"])]
        scenario: String,
    },
    /// Brute-force reference computations.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Rank all assignments of a cost matrix by enumeration and by Murty's
    /// method. Rows are separated by ';', entries by ','.
    Assignment {
        matrix: String,
        #[arg(long, default_value_t = usize::MAX)]
        k: usize,
    },
    /// Compare the closed-form 1-D Gaussian inner product with quadrature.
    InnerProduct {
        mean_a: f64,
        var_a: f64,
        mean_b: f64,
        var_b: f64,
    },
}

fn parse_matrix(text: &str) -> Result<CostMatrix, HarnessError> {
    let rows: Result<Vec<Vec<f64>>, _> = text
        .split(';')
        .map(|row| row.split(',').map(|v| v.trim().parse::<f64>()).collect())
        .collect();
    let rows = rows.map_err(|e| HarnessError::Config(format!("bad matrix entry: {e}")))?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(HarnessError::Config("ragged matrix".into()));
    }
    Ok(CostMatrix::from_rows(&rows))
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run {
            config,
            strategy,
            sensors,
            trials,
            seed,
            out,
            fusion_order,
            particles,
            max_components,
            parallel,
            dump_estimates,
        } => {
            let mut c = ScenarioConfig::load(&config)?;
            if let Some(s) = strategy {
                c.selection.strategy = match s {
                    StrategyArg::Greedy => Strategy::Greedy,
                    StrategyArg::Exhaustive => Strategy::Exhaustive,
                    StrategyArg::Random => Strategy::Random,
                };
            }
            if let Some(o) = fusion_order {
                c.selection.fusion_order = match o {
                    OrderArg::DualStage => FusionOrder::DualStage,
                    OrderArg::Selected => FusionOrder::Selected,
                    OrderArg::Shuffled => FusionOrder::Shuffled,
                };
            }
            if let Some(p) = sensors {
                c.selection.sensors = p;
            }
            if let Some(n) = trials {
                c.mc_trials = n;
            }
            if let Some(s) = seed {
                c.base_seed = s;
            }
            if let Some(l) = particles {
                c.birth.particles_per_track = l;
            }
            if let Some(m) = max_components {
                c.filter.max_components = m;
            }
            c.validate()?;
            let report = run_experiment(&c, parallel)?;
            write_report(&report, &out, dump_estimates)?;
            println!(
                "time-averaged OSPA: {:.3} m over {} trials",
                report.time_averaged_ospa(),
                c.mc_trials
            );
            let failure = report
                .aborted()
                .next()
                .map(|t| format!("trial {} aborted at {}", t.trial, t.aborted.as_deref().unwrap_or("")));
            if let Some(msg) = failure {
                return Err(HarnessError::Core(passive_glmb::Error::Degenerate(msg)));
            }
        }
        Command::ValidateConfig { file } => {
            let c = ScenarioConfig::load(&file)?;
            println!(
                "{}: ok ({}, {} receivers)",
                file.display(),
                c.scenario,
                c.network.receivers.len()
            );
        }
        Command::DefaultConfig { scenario } => {
            let c = if scenario == "1" {
                scenario_one()
            } else {
                scenario_two()
            };
            println!("{}", c.to_json());
        }
        Command::Oracle(OracleCommand::Assignment { matrix, k }) => {
            let cost = parse_matrix(&matrix)?;
            let brute = brute_force_assignments(&cost);
            let ranked = murty_k_best(&cost, k);
            let list = |v: &[passive_glmb::assignment::Assignment]| {
                v.iter()
                    .map(|a| json!({"cols": a.cols, "cost": a.cost}))
                    .collect::<Vec<_>>()
            };
            let n = ranked.len();
            let agree = brute.iter().take(n).zip(&ranked).all(|(b, m)| b.cost == m.cost);
            let out = json!({"brute_force": list(&brute), "murty": list(&ranked), "costs_agree": agree});
            println!("{}", serde_json::to_string_pretty(&out).expect("json"));
        }
        Command::Oracle(OracleCommand::InnerProduct {
            mean_a,
            var_a,
            mean_b,
            var_b,
        }) => {
            if !(var_a > 0.0 && var_b > 0.0) {
                return Err(HarnessError::Config("variances must be positive".into()));
            }
            let g = |m: f64, v: f64| GaussianSummary {
                mean: DVector::from_vec(vec![m]),
                covariance: DMatrix::from_element(1, 1, v),
            };
            let closed = gaussian_inner_product(&g(mean_a, var_a), &g(mean_b, var_b))?;
            let quad = inner_product_quadrature_1d(mean_a, var_a, mean_b, var_b);
            let out = json!({"closed_form": closed, "quadrature": quad, "relative_error": (quad / closed - 1.0).abs()});
            println!("{}", serde_json::to_string_pretty(&out).expect("json"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
