//! Command-line front end: thin wrappers around the library, with
//! canonical JSON/CSV output. Exit codes: 0 success, 2 input error,
//! 3 solver error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use otmoves::annealing::{
    anneal, convergence_profile, first_move_acceptance, AnnealConfig, ExperimentSpec, Schedule,
};
use otmoves::homophily::{cograduation_index, connect, homophily_coupling, BivariateSample};
use otmoves::io::{to_csv, ProblemFile};
use otmoves::tables::{cost_of, Coupling, Matrix};
use otmoves::transport::exact_kcost;
use otmoves::trivariate::homophily3;
use otmoves::Error;

#[derive(Parser)]
#[command(name = "otmoves", about = "Finite-space optimal transport via table moves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleFlag {
    Geom95,
    Geom99,
    Harmonic,
    Log,
}

impl From<ScheduleFlag> for Schedule {
    fn from(f: ScheduleFlag) -> Schedule {
        match f {
            ScheduleFlag::Geom95 => Schedule::Geometric { rho: 0.95 },
            ScheduleFlag::Geom99 => Schedule::Geometric { rho: 0.99 },
            ScheduleFlag::Harmonic => Schedule::Harmonic,
            ScheduleFlag::Log => Schedule::Logarithmic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Output {
    /// Output format
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write output to a file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact Kantorovich solve with optimality certificate
    SolveExact {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Simulated annealing over the coupling polytope
    Anneal {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config schedule
        #[arg(long, value_enum)]
        schedule: Option<ScheduleFlag>,
        /// Also solve exactly and report the gap
        #[arg(long)]
        with_exact: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Maximal-homophily (North-West) coupling of the two margins
    Homophily {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Tri-variate maximal-homophily table (requires zeta)
    Homophily3 {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Gini co-graduation index of a bivariate sample
    Gini {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Basic-move path between two couplings with equal margins
    Connect {
        /// Coupling files {table, mu, nu}: from, then to
        #[arg(long, num_args = 2)]
        input: Vec<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Acceptance / convergence experiment grids
    Tables {
        /// Experiment spec file {ns, tau0_grid, b_grid, replicates, seed}
        #[arg(long)]
        config: PathBuf,
        /// Override the spec seed
        #[arg(long)]
        seed: Option<u64>,
        /// Which grid to run
        #[arg(long, value_enum, default_value = "acceptance")]
        table: TableKind,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TableKind {
    Acceptance,
    Convergence,
}

/// CLI-facing annealing config: {tau0, B, schedule: {kind, rho}, seed}.
#[derive(Deserialize)]
struct ConfigFile {
    tau0: f64,
    #[serde(rename = "B")]
    steps: u64,
    schedule: Schedule,
    seed: u64,
    #[serde(default)]
    log_temperature: bool,
}

enum CliError {
    Input(String),
    Solver(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> CliError {
        match e {
            Error::NonConvergence(_) => CliError::Solver(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

fn read_file(path: &PathBuf) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_problem(path: &PathBuf) -> Result<otmoves::io::Problem, CliError> {
    ProblemFile::from_json(&read_file(path)?)?
        .validate()
        .map_err(CliError::from)
}

fn read_coupling(path: &PathBuf) -> Result<Coupling, CliError> {
    serde_json::from_str(&read_file(path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Canonical JSON: all numbers rounded to 12 significant digits, struct
/// key order preserved.
fn canonical(v: &Value) -> Value {
    match v {
        Value::Number(n) => {
            let x = otmoves::io::round_sig(n.as_f64().unwrap_or(f64::NAN));
            serde_json::Number::from_f64(x)
                .map(Value::Number)
                .unwrap_or_else(|| v.clone())
        }
        Value::Array(items) => Value::Array(items.iter().map(canonical).collect()),
        Value::Object(map) => {
            Value::Object(map.iter().map(|(k, x)| (k.clone(), canonical(x))).collect())
        }
        other => other.clone(),
    }
}

fn emit(value: Value, output: &Output, csv: Option<String>) -> Result<(), CliError> {
    let text = match (output.format, csv) {
        (Format::Csv, Some(body)) => body,
        (Format::Csv, None) => {
            return Err(CliError::Input(
                "this command has no CSV representation".into(),
            ))
        }
        (Format::Json, _) => {
            let mut s = serde_json::to_string_pretty(&canonical(&value))
                .map_err(|e| CliError::Input(e.to_string()))?;
            s.push('\n');
            s
        }
    };
    match &output.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn matrix_json(m: &Matrix) -> Value {
    serde_json::to_value(m.clone()).unwrap_or(Value::Null)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::SolveExact { input, output } => {
            let p = read_problem(&input)?;
            if p.zeta.is_some() {
                return Err(CliError::Input("solve-exact takes a 2-margin problem".into()));
            }
            let sol = exact_kcost(&p.mu, &p.nu, &p.cost)?;
            let value = serde_json::to_value(&sol).map_err(|e| CliError::Input(e.to_string()))?;
            let csv = Some(otmoves::io::matrix_to_csv(sol.coupling.table()));
            emit(value, &output, csv)
        }
        Command::Anneal {
            input,
            config,
            seed,
            schedule,
            with_exact,
            output,
        } => {
            let p = read_problem(&input)?;
            let cf: ConfigFile = serde_json::from_str(&read_file(&config)?)
                .map_err(|e| CliError::Input(format!("{}: {e}", config.display())))?;
            let cfg = AnnealConfig {
                tau0: cf.tau0,
                steps: cf.steps,
                schedule: schedule.map(Schedule::from).unwrap_or(cf.schedule),
                seed: seed.unwrap_or(cf.seed),
                cost: p.cost.clone(),
                log_temperature: cf.log_temperature,
            };
            let report = anneal(&p.mu, &p.nu, &cfg)?;
            let mut value =
                serde_json::to_value(&report).map_err(|e| CliError::Input(e.to_string()))?;
            if with_exact {
                let exact = exact_kcost(&p.mu, &p.nu, &p.cost)?;
                if let Value::Object(map) = &mut value {
                    map.insert("exact_value".into(), json!(exact.value));
                    map.insert("gap".into(), json!(report.final_cost - exact.value));
                }
            }
            let csv = Some(otmoves::io::matrix_to_csv(report.final_coupling.table()));
            emit(value, &output, csv)
        }
        Command::Homophily { input, output } => {
            let p = read_problem(&input)?;
            let g = homophily_coupling(&p.mu, &p.nu)?;
            let cost = cost_of(&g, &p.cost)?;
            let value = json!({ "coupling": matrix_json(g.table()), "cost": cost });
            let csv = Some(otmoves::io::matrix_to_csv(g.table()));
            emit(value, &output, csv)
        }
        Command::Homophily3 { input, output } => {
            let p = read_problem(&input)?;
            let zeta = p
                .zeta
                .ok_or_else(|| CliError::Input("homophily3 needs a zeta margin".into()))?;
            let g = homophily3(&p.mu, &p.nu, &zeta)?;
            let slices: Vec<Value> = g.table().slices().iter().map(matrix_json).collect();
            let mut csv = String::new();
            for s in g.table().slices() {
                csv.push_str(&otmoves::io::matrix_to_csv(&s));
                csv.push('\n');
            }
            emit(json!({ "slices": slices }), &output, Some(csv))
        }
        Command::Gini { input, output } => {
            #[derive(Deserialize)]
            struct SampleFile {
                x: Vec<f64>,
                y: Vec<f64>,
            }
            let sf: SampleFile = serde_json::from_str(&read_file(&input)?)
                .map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
            let sample = BivariateSample::new(sf.x, sf.y)?;
            let (m_min, m_max) = cograduation_index(&sample);
            emit(json!({ "m_min": m_min, "m_max": m_max }), &output, None)
        }
        Command::Connect { input, output } => {
            let from = read_coupling(&input[0])?;
            let to = read_coupling(&input[1])?;
            let path = connect(&from, &to)?;
            let value =
                serde_json::to_value(&path).map_err(|e| CliError::Input(e.to_string()))?;
            emit(value, &output, None)
        }
        Command::Tables {
            config,
            seed,
            table,
            output,
        } => {
            let mut spec: ExperimentSpec = serde_json::from_str(&read_file(&config)?)
                .map_err(|e| CliError::Input(format!("{}: {e}", config.display())))?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            match table {
                TableKind::Acceptance => {
                    let cells = first_move_acceptance(&spec)?;
                    let value =
                        serde_json::to_value(&cells).map_err(|e| CliError::Input(e.to_string()))?;
                    let csv = to_csv(&["n", "tau0", "acceptance"], &cells)?;
                    emit(value, &output, Some(csv))
                }
                TableKind::Convergence => {
                    let cells = convergence_profile(&spec)?;
                    let value =
                        serde_json::to_value(&cells).map_err(|e| CliError::Input(e.to_string()))?;
                    let csv = to_csv(&["n", "steps", "proportion"], &cells)?;
                    emit(value, &output, Some(csv))
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("{}", json!({ "error": "input", "message": msg }));
            ExitCode::from(2)
        }
        Err(CliError::Solver(msg)) => {
            eprintln!("{}", json!({ "error": "solver", "message": msg }));
            ExitCode::from(3)
        }
    }
}
