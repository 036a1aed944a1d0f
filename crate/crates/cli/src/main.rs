mod experiments;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nilflow::asymptotics::{check_heisenberg_asymptotics, DEFAULT_THRESHOLD};
use nilflow::curvature::{CurvatureOptions, SectionalRequest};
use nilflow::flow::{self, FlowProblem, RhsMode, Sampling};
use nilflow::io::{self, AlgebraFile};
use nilflow::soliton::{
    heisenberg_soliton_residual, lauret_certify, soliton_heisenberg, soliton_unitriangular, unitriangular_soliton_residual,
};
use nilflow::{algebra, CurvatureBundle, Error, Family, MetricState};
use serde_json::json;

use experiments::{ExperimentConfig, ExperimentKind, FamilyName};

/// Default output directory when `--out` is not given.
const OUT_DIR_VAR: &str = "NILFLOW_OUT_DIR";

#[derive(Parser)]
#[command(name = "nilflow", version, about = "Curvature, Ricci flow and nilsolitons on nilpotent Lie groups")]
#[command(after_help = "Exit codes: 0 pass, 1 criteria failure, 2 usage error, 3 numerical breakdown.\n\
    Without --out, output goes to $NILFLOW_OUT_DIR/<default name> if set, else to stdout.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or validate structure-constant files
    #[command(subcommand)]
    Algebra(AlgebraCmd),
    /// Christoffel symbols, Riemann and Ricci tensors, scalar and sectional curvature
    Curvature(CurvatureArgs),
    /// Integrate the Ricci flow and write the sampled trajectory
    Flow(FlowArgs),
    /// Compare a long Heisenberg flow with its predicted power-law asymptotes
    Asymptotics(AsymptoticsArgs),
    /// Build an explicit soliton metric and optionally certify it
    Soliton(SolitonArgs),
    /// Run a named experiment and write a JSON report plus CSV tables
    Experiment(ExperimentArgs),
}

#[derive(Subcommand)]
enum AlgebraCmd {
    /// Write the structure constants of a standard family
    Gen {
        #[arg(long, value_enum)]
        family: FamilyName,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the Jacobi identity and nilpotency
    Validate {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Inputs {
    /// Algebra JSON file
    #[arg(long)]
    algebra: PathBuf,
    /// Metric JSON file
    #[arg(long)]
    metric: PathBuf,
}

#[derive(Args)]
struct CurvatureArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Include the full Riemann tensor
    #[arg(long)]
    riemann: bool,
    /// Sectional curvature of the plane e_I ^ e_J (1-based, repeatable)
    #[arg(long, num_args = 2, value_names = ["I", "J"], action = clap::ArgAction::Append)]
    sectional: Vec<usize>,
    /// Sectional curvature of every coordinate plane
    #[arg(long, conflicts_with = "sectional")]
    all_sectional: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Auto,
    General,
    HeisenbergDiag,
    UnitriangularDiag,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct FlowArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long)]
    t1: f64,
    #[arg(long, default_value_t = flow::DEFAULT_RTOL)]
    rtol: f64,
    #[arg(long, default_value_t = flow::DEFAULT_ATOL)]
    atol: f64,
    #[arg(long)]
    max_step: Option<f64>,
    /// Evenly spaced samples including both ends
    #[arg(long, default_value_t = 101)]
    samples: usize,
    /// Log-spaced samples per decade from max(t0, 1) instead
    #[arg(long, conflicts_with = "samples")]
    per_decade: Option<usize>,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    mode: ModeArg,
    /// Output format; defaults to the extension of --out, else csv
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AsymptoticsArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value_t = 1e6)]
    t_end: f64,
    /// Largest accepted deviation at t_end
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolitonArgs {
    #[arg(long, value_enum)]
    family: FamilyName,
    #[arg(long)]
    n: usize,
    /// Unitriangular scale parameter
    #[arg(long = "A", default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Solve for c and D with Ric = cI + D
    #[arg(long)]
    certify: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum, required_unless_present = "config")]
    name: Option<ExperimentKind>,
    /// ExperimentConfig JSON
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the report and CSV tables
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Breakdown(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::FlowBreakdown { .. } => Failure::Breakdown(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Algebra(cmd) => algebra_cmd(cmd),
        Command::Curvature(args) => curvature_cmd(args),
        Command::Flow(args) => flow_cmd(args),
        Command::Asymptotics(args) => asymptotics_cmd(args),
        Command::Soliton(args) => soliton_cmd(args),
        Command::Experiment(args) => experiment_cmd(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Breakdown(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn out_dir() -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_VAR).map(PathBuf::from)
}

fn resolve_out(out: Option<PathBuf>, default_name: &str) -> Option<PathBuf> {
    out.or_else(|| out_dir().map(|d| d.join(default_name)))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => Ok(io::write(path, text)?),
        None => {
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Usage(e.to_string())),
                _ => Ok(()),
            }
        }
    }
}

fn emit_json(out: Option<&Path>, value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Usage(e.to_string()))?;
    emit(out, &text)
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Failure::Usage(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Usage(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Failure::Usage(e.to_string()))
}

fn algebra_cmd(cmd: AlgebraCmd) -> Outcome {
    match cmd {
        AlgebraCmd::Gen { family, n, out } => {
            let spec = family.build(n)?;
            emit(resolve_out(out, "algebra.json").as_deref(), &io::algebra_to_json(&spec))?;
            Ok(true)
        }
        AlgebraCmd::Validate { file, out } => {
            let spec = io::read_algebra_file(&file).and_then(AlgebraFile::into_unchecked_spec)?;
            let report = algebra::validate(&spec);
            let value = json!({
                "file": file,
                "family": spec.family(),
                "report": report,
            });
            emit_json(resolve_out(out, "validation.json").as_deref(), &value)?;
            Ok(report.passed)
        }
    }
}

fn curvature_cmd(args: CurvatureArgs) -> Outcome {
    let spec = io::read_algebra(&args.inputs.algebra)?;
    let g = io::read_metric(&args.inputs.metric)?;
    let sectional = if args.all_sectional {
        SectionalRequest::All
    } else if args.sectional.is_empty() {
        SectionalRequest::None
    } else {
        let mut planes = Vec::new();
        for pair in args.sectional.chunks(2) {
            if pair[0] == 0 || pair[1] == 0 {
                return Err(Failure::Usage("sectional plane indices are 1-based".into()));
            }
            planes.push((pair[0] - 1, pair[1] - 1));
        }
        SectionalRequest::Planes(planes)
    };
    let bundle = CurvatureBundle::compute(&spec, &g, &CurvatureOptions { riemann: args.riemann, sectional })?;
    if bundle.ill_conditioned {
        eprintln!("warning: metric condition number exceeds {:e}", nilflow::metric::ILL_CONDITIONED);
    }
    emit_json(resolve_out(args.out, "curvature.json").as_deref(), &io::bundle_json(&spec, &bundle))?;
    Ok(true)
}

fn flow_cmd(args: FlowArgs) -> Outcome {
    let spec = io::read_algebra(&args.inputs.algebra)?;
    let g0 = io::read_metric(&args.inputs.metric)?;
    let mut problem = FlowProblem::new(spec, g0, (args.t0, args.t1))?.with_tolerances(args.rtol, args.atol);
    if let Some(h) = args.max_step {
        problem.max_step = h;
    }
    problem = match args.mode {
        ModeArg::Auto => problem,
        ModeArg::General => problem.with_mode(RhsMode::General)?,
        ModeArg::HeisenbergDiag => problem.with_mode(RhsMode::HeisenbergDiag)?,
        ModeArg::UnitriangularDiag => problem.with_mode(RhsMode::UnitriangularDiag)?,
    };
    problem = problem.with_sampling(match args.per_decade {
        Some(k) => Sampling::Log { per_decade: k, start: 1.0 },
        None => Sampling::Linear(args.samples),
    });
    let traj = flow::integrate(&problem)?;
    let out = resolve_out(args.out, "trajectory.csv");
    let format = args.format.unwrap_or_else(|| match out.as_deref().and_then(Path::extension) {
        Some(ext) if ext == "json" => Format::Json,
        _ => Format::Csv,
    });
    match format {
        Format::Json => emit_json(out.as_deref(), &io::trajectory_json(&traj))?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = io::trajectory_rows(&traj)
                .into_iter()
                .map(|r| r.into_iter().map(|v| v.to_string()).collect())
                .collect();
            emit(out.as_deref(), csv_text(&io::trajectory_header(&traj), &rows)?.trim_end())?;
        }
    }
    Ok(true)
}

fn asymptotics_cmd(args: AsymptoticsArgs) -> Outcome {
    let spec = io::read_algebra(&args.inputs.algebra)?;
    let Family::Heisenberg(n) = spec.family() else {
        return Err(Failure::Usage("asymptotics are predicted for Heisenberg algebras only".into()));
    };
    let g0 = io::read_metric(&args.inputs.metric)?;
    let d = g0
        .as_diagonal()
        .ok_or_else(|| Failure::Usage("asymptotics need a diagonal metric".into()))?;
    let report = check_heisenberg_asymptotics(n, d, args.t_end, args.threshold)?;
    let value = json!({ "version": nilflow::VERSION, "report": report });
    emit_json(resolve_out(args.out, "asymptotics.json").as_deref(), &value)?;
    Ok(report.pass)
}

fn soliton_cmd(args: SolitonArgs) -> Outcome {
    let (spec, g, residual): (_, MetricState, f64) = match args.family {
        FamilyName::Heisenberg => (
            nilflow::heisenberg(args.n)?,
            soliton_heisenberg(args.n, args.t)?,
            heisenberg_soliton_residual(args.n, args.t)?,
        ),
        FamilyName::Unitriangular => (
            nilflow::unitriangular(args.n)?,
            soliton_unitriangular(args.n, args.t, args.a)?,
            unitriangular_soliton_residual(args.n, args.t, args.a)?,
        ),
    };
    let labels: Vec<String> = (0..spec.dim()).map(|i| spec.label(i)).collect();
    let cert = if args.certify { Some(lauret_certify(&spec, &g)?) } else { None };
    let value = json!({
        "family": args.family,
        "n": args.n,
        "A": args.a,
        "t": args.t,
        "labels": labels,
        "metric": g.diagonal_entries(),
        "flow_residual": residual,
        "certificate": cert.as_ref().map(io::certificate_json),
    });
    emit_json(resolve_out(args.out, "soliton.json").as_deref(), &value)?;
    Ok(cert.map_or(true, |c| c.valid))
}

fn experiment_cmd(args: ExperimentArgs) -> Outcome {
    let config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let cfg: ExperimentConfig =
                serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            if let Some(name) = args.name {
                if name != cfg.experiment {
                    return Err(Failure::Usage(format!(
                        "experiment {} does not match config experiment {}",
                        name.name(),
                        cfg.experiment.name()
                    )));
                }
            }
            cfg
        }
        None => ExperimentConfig::named(args.name.expect("required by clap")),
    };
    let dir = args
        .out
        .or_else(|| config.out_dir.clone())
        .or_else(out_dir)
        .unwrap_or_else(|| PathBuf::from("nilflow-out"));
    let (report, artifacts) = experiments::run(config)?;
    let name = report.experiment.name();
    emit_json(Some(&dir.join(format!("{name}.json"))), &report)?;
    for a in &artifacts {
        emit(Some(&dir.join(&a.file_name)), &csv_text(&a.header, &a.rows)?)?;
    }
    for c in &report.criteria {
        println!("{} {}: {:e} (threshold {:e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
    }
    println!("{name}: {} ({:.2} s), report in {}", if report.pass { "PASS" } else { "FAIL" }, report.wall_clock_seconds, dir.display());
    Ok(report.pass)
}
