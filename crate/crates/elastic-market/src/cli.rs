use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::commands::{self, Method, Output, Table, WorstCaseFamily};
use crate::error::CliError;
use crate::report::{to_json, RunReport};
use crate::scenario::{parse_scenario, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Br,
    Direct,
}

#[derive(Debug, Parser)]
#[command(
    name = "elastic-market",
    version,
    about = "Market clearing, equilibria and efficiency experiments for proportional bidding"
)]
pub struct Cli {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; sweeps default to csv, single runs to report.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Solver tolerance on bid changes.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Maximum solver sweeps.
    #[arg(long = "max-iter", global = true)]
    pub max_iter: Option<usize>,
    /// Nash solver for `nash` and `bound-check`.
    #[arg(long, global = true, value_enum)]
    pub method: Option<MethodArg>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clear the market for a bid vector.
    Clear {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        bids: Option<Vec<f64>>,
    },
    /// Welfare-maximizing allocation.
    System,
    /// Price-taking equilibrium bids.
    PriceTaking,
    /// Nash equilibrium of the single-link game.
    Nash,
    /// Check a bid vector against the equilibrium conditions.
    Verify {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        bids: Option<Vec<f64>>,
    },
    /// Build the worst-case instance for a two-piece (--a --b) or monomial
    /// (--B) price at each user count in --R.
    WorstCase {
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        b: Option<f64>,
        #[arg(long = "B", allow_hyphen_values = true)]
        exponent: Option<f64>,
        #[arg(long = "R", value_delimiter = ',')]
        users: Option<Vec<usize>>,
    },
    /// Tabulate g(B) over a grid of exponents.
    SweepG {
        #[arg(long = "B-grid", value_delimiter = ',', allow_hyphen_values = true)]
        grid: Option<Vec<f64>>,
    },
    /// Tabulate H(a, b) over a grid.
    SweepH {
        #[arg(long = "a-grid", value_delimiter = ',', allow_hyphen_values = true)]
        a_grid: Option<Vec<f64>>,
        #[arg(long = "b-grid", value_delimiter = ',', allow_hyphen_values = true)]
        b_grid: Option<Vec<f64>>,
    },
    /// Welfare-maximizing path rates of a network.
    NetworkSystem,
    /// Nash equilibrium of the network game.
    NetworkNash,
    /// Compare the equilibrium to the optimum; exit 3 if the ratio falls
    /// below its bound.
    BoundCheck {
        /// Check this many random single-link instances instead of a scenario.
        #[arg(long)]
        random: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Clear { .. } => "clear",
            Command::System => "system",
            Command::PriceTaking => "price-taking",
            Command::Nash => "nash",
            Command::Verify { .. } => "verify",
            Command::WorstCase { .. } => "worst-case",
            Command::SweepG { .. } => "sweep-g",
            Command::SweepH { .. } => "sweep-h",
            Command::NetworkSystem => "network-system",
            Command::NetworkNash => "network-nash",
            Command::BoundCheck { .. } => "bound-check",
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Command::WorstCase { .. } | Command::SweepG { .. } | Command::SweepH { .. } => {
                Format::Csv
            }
            Command::BoundCheck { random: Some(_) } => Format::Csv,
            _ => Format::Report,
        }
    }
}

fn load(cli: &Cli, required: bool) -> Result<Option<Scenario>, CliError> {
    let mut scenario = match &cli.scenario {
        Some(path) => parse_scenario(path)?,
        None if required => {
            return Err(CliError::Validation(
                "scenario: this command needs --scenario PATH".into(),
            ))
        }
        None => return Ok(None),
    };
    apply_flags(cli, &mut scenario.solver)?;
    Ok(Some(scenario))
}

fn apply_flags(cli: &Cli, cfg: &mut elastic_market_core::SolverConfig) -> Result<(), CliError> {
    if let Some(t) = cli.tol {
        cfg.tol = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(m) = cli.max_iter {
        cfg.max_sweeps = m;
    }
    cfg.validate().map_err(CliError::from)
}

fn config_json(cfg: &elastic_market_core::SolverConfig, method: Method) -> serde_json::Value {
    json!({
        "tol": cfg.tol,
        "max_sweeps": cfg.max_sweeps,
        "damping": cfg.damping,
        "seed": cfg.seed,
        "deviation_samples": cfg.deviation_samples,
        "verify_tol": cfg.verify_tol,
        "method": match method { Method::BestResponse => "br", Method::Direct => "direct" },
        "threads": crate::thread_cap(),
    })
}

fn pick<T: Clone>(flag: &Option<T>, from_scenario: Option<&T>, name: &str) -> Result<T, CliError> {
    flag.clone()
        .or_else(|| from_scenario.cloned())
        .ok_or_else(|| {
            CliError::Validation(format!(
                "{name}: missing (pass the flag or set it under experiment)"
            ))
        })
}

fn execute(
    cli: &Cli,
    cfg: &mut elastic_market_core::SolverConfig,
    method: Method,
) -> Result<Output, CliError> {
    let needs_scenario = match &cli.command {
        Command::WorstCase { .. } | Command::SweepG { .. } | Command::SweepH { .. } => false,
        Command::BoundCheck { random } => random.is_none(),
        _ => true,
    };
    let scenario = load(cli, needs_scenario)?;
    if let Some(s) = &scenario {
        *cfg = s.solver.clone();
    } else {
        apply_flags(cli, cfg)?;
    }
    let exp = scenario
        .as_ref()
        .map(|s| s.experiment.clone())
        .unwrap_or_default();
    let need = || scenario.as_ref().expect("scenario loaded above");
    match &cli.command {
        Command::Clear { bids } => commands::clear(need(), bids.as_ref()),
        Command::System => commands::system(need()),
        Command::PriceTaking => commands::price_taking(need()),
        Command::Nash => commands::nash(need(), method),
        Command::Verify { bids } => commands::verify(need(), bids.as_ref()),
        Command::WorstCase {
            a,
            b,
            exponent,
            users,
        } => {
            let users = pick(users, exp.users.as_ref(), "R")?;
            let exponent = exponent.or(exp.exponent);
            let family = match (a.or(exp.a), b.or(exp.b), exponent) {
                (Some(a), Some(b), None) => WorstCaseFamily::TwoPiece { a, b },
                (None, None, Some(e)) => WorstCaseFamily::Monomial { exponent: e },
                _ => {
                    return Err(CliError::Validation(
                        "worst-case: give either --a and --b, or --B".into(),
                    ))
                }
            };
            commands::worst_case(family, &users, cfg)
        }
        Command::SweepG { grid } => {
            commands::sweep_g(&pick(grid, exp.exponent_grid.as_ref(), "B-grid")?)
        }
        Command::SweepH { a_grid, b_grid } => commands::sweep_h(
            &pick(a_grid, exp.a_grid.as_ref(), "a-grid")?,
            &pick(b_grid, exp.b_grid.as_ref(), "b-grid")?,
        ),
        Command::NetworkSystem => commands::network_system(need()),
        Command::NetworkNash => commands::network_nash(need()),
        Command::BoundCheck { random } => match random.or(exp.random) {
            Some(n) if scenario.is_none() || random.is_some() => {
                commands::bound_check_random(n, method, cfg)
            }
            _ => commands::bound_check(need(), method),
        },
    }
}

/// CSV text for a table. Identical tables give identical bytes.
pub fn csv_string(table: &Table) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields"))
}

fn emit(cli: &Cli, text: &str) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Runs the parsed command line and returns the process exit code. `argv`
/// is echoed into reports.
pub fn run(cli: &Cli, argv: &[String]) -> Result<u8, CliError> {
    let started = Instant::now();
    let method = match cli.method {
        Some(MethodArg::Direct) => Method::Direct,
        _ => Method::BestResponse,
    };
    let mut cfg = elastic_market_core::SolverConfig::default();
    let output = crate::pool().install(|| execute(cli, &mut cfg, method))?;
    let text = match cli.format.unwrap_or_else(|| cli.command.default_format()) {
        Format::Csv => csv_string(&output.table)?,
        Format::Report => to_json(&RunReport {
            command: argv.to_vec(),
            config: config_json(&cfg, method),
            outputs: json!({ "command": cli.command.name(), "result": output.report }),
            wall_time_s: started.elapsed().as_secs_f64(),
        })?,
    };
    emit(cli, &text)?;
    if let Some(v) = output.violation {
        return Err(CliError::BoundViolation(v));
    }
    if let Some(f) = output.failure {
        eprintln!("error: {f}");
        return Ok(1);
    }
    Ok(0)
}
