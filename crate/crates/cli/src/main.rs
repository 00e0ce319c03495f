use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use riskwork::coherent::{coherent_contribution, optimal_coherent};
use riskwork::incoherent::{ergotropy, optimal_exponential, optimal_general};
use riskwork::model::{StateFile, System};
use riskwork::oracle::maximize_over_unitaries;
use riskwork::sweep::{self, GridRange, RSelection, SweepJob, SweepKind};
use riskwork::tolerance;
use riskwork::utility::UtilitySpec;

const PROFILE_VAR: &str = "RISKWORK_TOLERANCE_PROFILE";

#[derive(Debug)]
enum CliError {
    Core(riskwork::Error),
    Usage(String),
    Profile(String),
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Usage(_) => "USAGE",
            CliError::Profile(_) => "INVALID_TOLERANCE_PROFILE",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Usage(m) | CliError::Profile(m) => m.clone(),
        }
    }
}

impl From<riskwork::Error> for CliError {
    fn from(e: riskwork::Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = Result<T, CliError>;

/// Optimal work extraction for risk-sensitive agents.
#[derive(Parser, Debug)]
#[command(name = "riskwork", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal cycle and expected utility for a state file.
    Optimize(OptimizeArgs),
    /// Ergotropy (risk-neutral optimum) of a state file.
    Ergotropy(InputArgs),
    /// Qubit phase diagram over (p, r); CSV.
    PhaseD2(PhaseD2Args),
    /// Qutrit region maps over the population simplex; CSV.
    PhaseD3(PhaseD3Args),
    /// Value of the optimal cycle across the quasiprobability family; CSV.
    Qsweep(QsweepArgs),
    /// Rank two states at one r or over a range of r.
    Compare(CompareArgs),
    /// Brute-force search over unitaries.
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// State file (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    io: InputArgs,
    /// Risk parameter of the exponential utility.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    r: f64,
    /// Utility specification (JSON file); overrides --r.
    #[arg(long)]
    utility: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PhaseD2Args {
    #[arg(long, default_value_t = 0.02)]
    p_min: f64,
    #[arg(long, default_value_t = 0.98)]
    p_max: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = -3.0)]
    r_min: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 3.0)]
    r_max: f64,
    /// Points per axis.
    #[arg(long, default_value_t = 200)]
    grid: usize,
    /// Level spacing.
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PhaseD3Args {
    /// Simplex lattice resolution n (points p = (i, j, k)/n).
    #[arg(long, default_value_t = 60)]
    grid: usize,
    /// Comma-separated list of risk parameters.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',', default_value = "0,-20,20")]
    r: Vec<f64>,
    /// Comma-separated energies.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',', default_value = "1,2,3")]
    energies: Vec<f64>,
    /// Region map CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Frequency table CSV; appended to stdout when omitted.
    #[arg(long)]
    freq_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct QsweepArgs {
    #[command(flatten)]
    io: InputArgs,
    #[arg(long, allow_hyphen_values = true)]
    r: f64,
    #[arg(long, default_value_t = 21)]
    q_steps: usize,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    io: InputArgs,
    /// Second state file.
    #[arg(long)]
    other: PathBuf,
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["r_min", "r_max"])]
    r: Option<f64>,
    #[arg(long, allow_hyphen_values = true, requires = "r_max")]
    r_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true, requires = "r_min")]
    r_max: Option<f64>,
    /// Points in the r range.
    #[arg(long, default_value_t = 201)]
    grid: usize,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    io: InputArgs,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    r: f64,
    /// Utility specification (JSON file); overrides --r.
    #[arg(long)]
    utility: Option<PathBuf>,
    /// Quasiprobability parameter; defaults to 1/2.
    #[arg(long)]
    q: Option<f64>,
    /// Number of random restarts.
    #[arg(long, default_value_t = 100)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn read_to_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| riskwork::Error::Io(format!("{}: {e}", path.display())).into())
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| riskwork::Error::Io(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_json(out: Option<&Path>, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| riskwork::Error::Parse(e.to_string()))?;
    text.push('\n');
    emit(out, &text)
}

fn load_system(path: &Path) -> CliResult<System> {
    Ok(StateFile::from_json(&read_to_string(path)?)?.into_system()?)
}

fn load_utility(path: Option<&Path>, r: f64) -> CliResult<UtilitySpec> {
    let spec = match path {
        Some(p) => serde_json::from_str(&read_to_string(p)?).map_err(|e| riskwork::Error::Parse(e.to_string()))?,
        None => UtilitySpec::exponential(r)?,
    };
    spec.validate()?;
    Ok(spec)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("library types serialize")
}

fn optimize(args: &OptimizeArgs) -> CliResult<()> {
    let system = load_system(&args.io.input)?;
    let (rho, h) = (&system.state, &system.hamiltonian);
    let spec = load_utility(args.utility.as_deref(), args.r)?;
    let value = match (&spec, rho.is_incoherent()) {
        (UtilitySpec::Exponential { r }, true) => {
            json!({"kind": "incoherent", "r": r, "outcome": to_value(&optimal_exponential(&rho.populations(), h, *r)?)})
        }
        (UtilitySpec::Exponential { r }, false) => json!({
            "kind": "coherent",
            "r": r,
            "outcome": to_value(&optimal_coherent(rho, h, *r)?),
            "coherent_contribution": coherent_contribution(rho, h, *r)?,
        }),
        (_, true) => json!({
            "kind": "incoherent",
            "utility_spec": to_value(&spec),
            "outcome": to_value(&optimal_general(&rho.populations(), h, &spec)?),
        }),
        (_, false) => return Err(riskwork::Error::NotIncoherent.into()),
    };
    emit_json(args.io.out.as_deref(), &value)
}

fn ergotropy_cmd(args: &InputArgs) -> CliResult<()> {
    let system = load_system(&args.input)?;
    let (rho, h) = (&system.state, &system.hamiltonian);
    let value = if rho.is_incoherent() {
        let (value, perm) = ergotropy(&rho.populations(), h)?;
        json!({"kind": "incoherent", "ergotropy": value, "permutation": perm})
    } else {
        let out = optimal_coherent(rho, h, 0.0)?;
        json!({"kind": "coherent", "ergotropy": out.utility, "unitary": to_value(&out.unitary)})
    };
    emit_json(args.out.as_deref(), &value)
}

fn phase_d2(args: &PhaseD2Args) -> CliResult<()> {
    let mut job = SweepJob::new(SweepKind::PhaseD2);
    job.p_range = Some(GridRange::new(args.p_min, args.p_max, args.grid)?);
    job.r_range = Some(GridRange::new(args.r_min, args.r_max, args.grid)?);
    job.output = args.out.clone();
    job.validate()?;
    let csv = sweep::run_phase_d2(&job.p_range.unwrap(), &job.r_range.unwrap(), args.eps)?;
    emit(args.out.as_deref(), &csv)
}

fn phase_d3(args: &PhaseD3Args) -> CliResult<()> {
    let energies: [f64; 3] = args
        .energies
        .as_slice()
        .try_into()
        .map_err(|_| CliError::Usage(format!("--energies needs 3 values, got {}", args.energies.len())))?;
    let mut job = SweepJob::new(SweepKind::PhaseD3);
    job.resolution = Some(args.grid);
    job.validate()?;
    let out = sweep::run_phase_d3(args.grid, &args.r, energies)?;
    match (&args.out, &args.freq_out) {
        (_, Some(freq)) => {
            emit(args.out.as_deref(), &out.map_csv())?;
            emit(Some(freq), &out.frequency_csv())
        }
        (Some(map), None) => {
            emit(Some(map), &out.map_csv())?;
            emit(None, &out.frequency_csv())
        }
        (None, None) => emit(None, &format!("{}\n{}", out.map_csv(), out.frequency_csv())),
    }
}

fn qsweep(args: &QsweepArgs) -> CliResult<()> {
    let mut job = SweepJob::new(SweepKind::Qsweep);
    job.input = Some(args.io.input.clone());
    job.resolution = Some(args.q_steps);
    job.validate()?;
    let system = load_system(&args.io.input)?;
    emit(args.io.out.as_deref(), &sweep::run_qsweep(&system, args.r, args.q_steps)?)
}

fn compare(args: &CompareArgs) -> CliResult<()> {
    let mut job = SweepJob::new(SweepKind::Compare);
    job.input = Some(args.io.input.clone());
    let selection = match (args.r, args.r_min, args.r_max) {
        (Some(r), None, None) => RSelection::Single(r),
        (None, Some(lo), Some(hi)) => {
            let g = GridRange::new(lo, hi, args.grid)?;
            job.r_range = Some(g);
            RSelection::Range(g)
        }
        (None, None, None) => RSelection::Single(0.0),
        _ => return Err(CliError::Usage("give either --r or both --r-min and --r-max".into())),
    };
    job.validate()?;
    let a = load_system(&args.io.input)?;
    let b = load_system(&args.other)?;
    let report = sweep::run_compare(&a, &b, selection)?;
    emit_json(args.io.out.as_deref(), &to_value(&report))
}

fn oracle(args: &OracleArgs) -> CliResult<()> {
    let mut job = SweepJob::new(SweepKind::Oracle);
    job.input = Some(args.io.input.clone());
    job.seed = args.seed;
    job.validate()?;
    let system = load_system(&args.io.input)?;
    let spec = load_utility(args.utility.as_deref(), args.r)?;
    let report = maximize_over_unitaries(&system.state, &system.hamiltonian, &spec, args.q, args.budget, args.seed)?;
    emit_json(args.io.out.as_deref(), &to_value(&report))
}

fn install_profile() -> CliResult<()> {
    let Ok(name) = std::env::var(PROFILE_VAR) else {
        return Ok(());
    };
    let tol = tolerance::profile(&name)
        .ok_or_else(|| CliError::Profile(format!("{PROFILE_VAR}={name:?}; expected strict or default")))?;
    // only fails if already installed, which cannot happen before dispatch
    let _ = tolerance::install(tol);
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    install_profile()?;
    match &cli.command {
        Command::Optimize(a) => optimize(a),
        Command::Ergotropy(a) => ergotropy_cmd(a),
        Command::PhaseD2(a) => phase_d2(a),
        Command::PhaseD3(a) => phase_d3(a),
        Command::Qsweep(a) => qsweep(a),
        Command::Compare(a) => compare(a),
        Command::Oracle(a) => oracle(a),
    }
}

fn fail(err: &CliError) -> ExitCode {
    let message = err.message().replace('\n', " ");
    eprintln!("error: {}: {}", err.code(), message.trim());
    ExitCode::from(match err {
        CliError::Usage(_) => 2,
        _ => 1,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            return fail(&CliError::Usage(first));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
