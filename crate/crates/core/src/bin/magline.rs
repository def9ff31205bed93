use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{debug, info};
use serde::Serialize;

use magline::classify::{
    classification_from_invariants, classification_report, classify_invariants, ic_from_invariants,
    CaseTag,
};
use magline::closedform::{
    classical_curvature_torsion, max_position_deviation, numerical_curvature_torsion,
    sample_closed_form, ClosedFormCurve,
};
use magline::fields::{Axis, KillingField, State6};
use magline::integrate::{drift_report, integrate_trajectory, IntegratorConfig, TrajectorySample};
use magline::output::{gnuplot_script, read_trajectory, write_csv, write_json, TrajectoryDocument};
use magline::{Error, Result};

#[derive(Parser)]
#[command(
    name = "magline",
    version,
    about = "Magnetic trajectories of Killing magnetic fields",
    allow_negative_numbers = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Case analysis of an initial condition (or of a pair p0,q0).
    Classify(StartArgs),
    /// Numerical integration of the Lorentz equation.
    Trace(RunArgs),
    /// Samples of the explicit solution.
    ClosedForm(RunArgs),
    /// Numerical and explicit solutions side by side.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Largest admissible position deviation.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Curvature and torsion along the explicit solution.
    Frenet(RunArgs),
    /// Gnuplot script for an existing trajectory file.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FieldChoice {
    RotX,
    RotY,
    RotZ,
    TransX,
    TransY,
    TransZ,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Args, Clone, Serialize)]
struct StartArgs {
    #[arg(long, value_enum, default_value = "rot-z")]
    field: FieldChoice,
    /// Strength of a translational field.
    #[arg(long)]
    strength: Option<f64>,
    /// x0,y0,z0,u0,v0,w0
    #[arg(long, allow_hyphen_values = true, conflicts_with = "invariants")]
    ic: Option<String>,
    /// p0,q0 of the rotational field; the start is built on the +x axis.
    #[arg(long, allow_hyphen_values = true)]
    invariants: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Serialize)]
struct RunArgs {
    #[command(flatten)]
    start: StartArgs,
    #[arg(long, default_value_t = 20.0)]
    t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 1e-10)]
    rel_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    abs_tol: f64,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutFormat,
}

impl RunArgs {
    fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            t_end: self.t_end,
            sample_dt: self.dt,
            ..IntegratorConfig::default()
        }
    }
}

fn parse_reals<const N: usize>(text: &str, what: &str) -> Result<[f64; N]> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Usage(format!("{what}: {e}")))?;
    let arr: [f64; N] = vals
        .try_into()
        .map_err(|v: Vec<f64>| Error::Usage(format!("{what}: expected {N} reals, got {}", v.len())))?;
    if arr.iter().any(|v| !v.is_finite()) {
        return Err(Error::Usage(format!("{what}: non-finite value")));
    }
    Ok(arr)
}

fn field_of(args: &StartArgs) -> Result<KillingField> {
    let translation = |axis| match args.strength {
        Some(s) if s.is_finite() => Ok(KillingField::Translation { axis, strength: s }),
        Some(s) => Err(Error::Usage(format!("strength {s}"))),
        None => Err(Error::Usage("translational fields need --strength".into())),
    };
    let rotation = |axis| {
        if args.strength.is_some() {
            return Err(Error::Usage("--strength applies to translational fields only".into()));
        }
        Ok(KillingField::Rotation { axis })
    };
    match args.field {
        FieldChoice::RotX => rotation(Axis::X),
        FieldChoice::RotY => rotation(Axis::Y),
        FieldChoice::RotZ => rotation(Axis::Z),
        FieldChoice::TransX => translation(Axis::X),
        FieldChoice::TransY => translation(Axis::Y),
        FieldChoice::TransZ => translation(Axis::Z),
    }
}

fn ic_of(text: &str) -> Result<State6> {
    let v = parse_reals::<6>(text, "--ic")?;
    let mut ic = State6::from_slice(&v);
    let speed = ic.speed();
    if (speed - 1.0).abs() > 1e-6 {
        return Err(Error::Usage(format!("initial velocity has norm {speed}, expected 1")));
    }
    ic.vel = ic.vel * (1.0 / speed);
    Ok(ic)
}

enum Start {
    Ic(State6),
    Invariants(f64, f64),
}

fn start_of(args: &StartArgs, field: &KillingField) -> Result<Start> {
    match (&args.ic, &args.invariants) {
        (Some(ic), None) => ic_of(ic).map(Start::Ic),
        (None, Some(inv)) => {
            if !matches!(field, KillingField::Rotation { axis: Axis::Z }) {
                return Err(Error::Usage("--invariants applies to rot-z only".into()));
            }
            let [p0, q0] = parse_reals::<2>(inv, "--invariants")?;
            Ok(Start::Invariants(p0, q0))
        }
        _ => Err(Error::Usage("give exactly one of --ic, --invariants".into())),
    }
}

/// Resolves the start of a run; an impossible pair of invariants is an error.
fn resolve_ic(args: &StartArgs, field: &KillingField) -> Result<State6> {
    match start_of(args, field)? {
        Start::Ic(ic) => Ok(ic),
        Start::Invariants(p0, q0) => match classify_invariants(p0, q0) {
            CaseTag::NonExistent { reason } => Err(Error::NonExistent(reason.to_string())),
            _ => ic_from_invariants(p0, q0),
        },
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit(args: &RunArgs, case: CaseTag, field: &KillingField, samples: Vec<TrajectorySample>) -> Result<()> {
    let summary = drift_report(&samples)?;
    let w = sink(&args.start.out)?;
    match args.format {
        OutFormat::Csv => write_csv(w, &samples),
        OutFormat::Json => {
            let invariants = match field {
                KillingField::Rotation { .. } => classification_report(
                    &State6::new(samples[0].pos, samples[0].vel),
                    field,
                )
                .invariants,
                KillingField::Translation { .. } => None,
            };
            write_json(
                w,
                &TrajectoryDocument { config: args, case, invariants, samples, summary },
            )
        }
    }
}

fn cmd_classify(args: &StartArgs) -> Result<()> {
    let field = field_of(args)?;
    let report = match start_of(args, &field)? {
        Start::Ic(ic) => classification_report(&ic, &field),
        Start::Invariants(p0, q0) => classification_from_invariants(p0, q0),
    };
    info!("case {}", report.case);
    let mut w = sink(&args.out)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    Ok(())
}

fn closed_form(args: &RunArgs) -> Result<(KillingField, State6, ClosedFormCurve)> {
    let field = field_of(&args.start)?;
    let ic = resolve_ic(&args.start, &field)?;
    args.integrator().validate()?;
    let curve = ClosedFormCurve::new(&field, &ic, (0.0, args.t_end))?;
    debug!("parameters {:?}", curve.params());
    Ok((field, ic, curve))
}

fn cmd_trace(args: &RunArgs) -> Result<()> {
    let field = field_of(&args.start)?;
    let ic = resolve_ic(&args.start, &field)?;
    let samples = integrate_trajectory(&field, &ic, &args.integrator())?;
    let case = classification_report(&ic, &field).case;
    emit(args, case, &field, samples)
}

fn cmd_closed_form(args: &RunArgs) -> Result<()> {
    let (field, ic, curve) = closed_form(args)?;
    let samples = sample_closed_form(&curve, &field, &ic, &args.integrator().sample_times())?;
    emit(args, curve.case(), &field, samples)
}

#[derive(Serialize)]
struct ComparisonRow {
    t: f64,
    numeric: [f64; 6],
    closed_form: [f64; 6],
    deviation: f64,
}

#[derive(Serialize)]
struct ComparisonDocument<'a> {
    config: &'a RunArgs,
    case: CaseTag,
    samples: Vec<ComparisonRow>,
    summary: ComparisonSummary,
}

#[derive(Serialize)]
struct ComparisonSummary {
    max_deviation: f64,
    max_speed_drift: f64,
    max_p0_drift: f64,
    max_q0_drift: f64,
    tol: f64,
}

/// Returns whether the deviation stayed within `tol`.
fn cmd_compare(args: &RunArgs, tol: f64) -> Result<bool> {
    let (field, ic, curve) = closed_form(args)?;
    let numeric = integrate_trajectory(&field, &ic, &args.integrator())?;
    let times: Vec<f64> = numeric.iter().map(|s| s.t).collect();
    let exact = sample_closed_form(&curve, &field, &ic, &times)?;
    let drift = drift_report(&numeric)?;
    let summary = ComparisonSummary {
        max_deviation: max_position_deviation(&numeric, &exact),
        max_speed_drift: drift.max_speed_drift,
        max_p0_drift: drift.max_p0_drift,
        max_q0_drift: drift.max_q0_drift,
        tol,
    };
    let rows: Vec<ComparisonRow> = numeric
        .iter()
        .zip(&exact)
        .map(|(a, b)| ComparisonRow {
            t: a.t,
            numeric: State6::new(a.pos, a.vel).to_array(),
            closed_form: State6::new(b.pos, b.vel).to_array(),
            deviation: (a.pos - b.pos).norm(),
        })
        .collect();
    let mut w = sink(&args.start.out)?;
    match args.format {
        OutFormat::Csv => {
            writeln!(w, "t,x,y,z,x_cf,y_cf,z_cf,deviation")?;
            for r in &rows {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    r.t, r.numeric[0], r.numeric[1], r.numeric[2], r.closed_form[0],
                    r.closed_form[1], r.closed_form[2], r.deviation
                )?;
            }
        }
        OutFormat::Json => {
            let ok = summary.max_deviation <= tol;
            serde_json::to_writer_pretty(
                &mut w,
                &ComparisonDocument { config: args, case: curve.case(), samples: rows, summary },
            )?;
            writeln!(w)?;
            return Ok(ok);
        }
    }
    eprintln!(
        "case={} max_deviation={:.3e} max_speed_drift={:.3e} max_p0_drift={:.3e} max_q0_drift={:.3e}",
        curve.case(),
        summary.max_deviation,
        summary.max_speed_drift,
        summary.max_p0_drift,
        summary.max_q0_drift
    );
    Ok(summary.max_deviation <= tol)
}

#[derive(Serialize)]
struct FrenetRow {
    t: f64,
    kappa: f64,
    tau: f64,
    kappa_exact: Option<f64>,
    tau_exact: Option<f64>,
}

fn cmd_frenet(args: &RunArgs) -> Result<()> {
    let (field, ic, curve) = closed_form(args)?;
    let exact = match field {
        KillingField::Translation { axis, strength } => {
            let w0 = axis.state_to_canonical(ic).vel.z;
            Some(classical_curvature_torsion(strength, w0)?)
        }
        KillingField::Rotation { .. } => None,
    };
    let mut rows = Vec::new();
    for t in args.integrator().sample_times() {
        curve.eval(t)?;
        let (kappa, tau) =
            numerical_curvature_torsion(|s| curve.eval(s).map(|x| x.pos).unwrap_or_default(), t, 1e-2);
        rows.push(FrenetRow {
            t,
            kappa,
            tau,
            kappa_exact: exact.map(|e| e.0),
            tau_exact: exact.map(|e| e.1),
        });
    }
    let mut w = sink(&args.start.out)?;
    match args.format {
        OutFormat::Json => {
            serde_json::to_writer_pretty(&mut w, &rows)?;
            writeln!(w)?;
        }
        OutFormat::Csv => {
            writeln!(w, "t,kappa,tau,kappa_exact,tau_exact")?;
            let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
            for r in &rows {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e},{},{}",
                    r.t,
                    r.kappa,
                    r.tau,
                    opt(r.kappa_exact),
                    opt(r.tau_exact)
                )?;
            }
        }
    }
    Ok(())
}

fn cmd_plot(input: &Path, out: &Option<PathBuf>) -> Result<()> {
    let samples = read_trajectory(input)?;
    if samples.is_empty() {
        return Err(Error::Usage(format!("{} holds no samples", input.display())));
    }
    let title = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trajectory".into());
    let mut w = sink(out)?;
    w.write_all(gnuplot_script(&samples, &title).as_bytes())?;
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_) | Error::Io(_) | Error::Json(_) => 1,
        Error::NonExistent(_) | Error::ContractViolation(_) | Error::InconsistentIc(_) | Error::Domain(_) => 2,
        Error::Divergence(_) | Error::IntegrationFailure { .. } | Error::Accuracy(_) => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("MAGLINE_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Classify(a) => cmd_classify(a).map(|_| true),
        Command::Trace(a) => cmd_trace(a).map(|_| true),
        Command::ClosedForm(a) => cmd_closed_form(a).map(|_| true),
        Command::Compare { run, tol } => cmd_compare(run, *tol),
        Command::Frenet(a) => cmd_frenet(a).map(|_| true),
        Command::Plot { input, out } => cmd_plot(input, out).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("magline: deviation above tolerance");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("magline: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
