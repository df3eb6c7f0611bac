//! Command-line front end: load problem configurations, run criterion
//! checks, integrate, verify conclusions, run the non-conjugation
//! harness, and emit CSV trajectories and key-value reports.
//!
//! Exit codes: 0 success / criterion holds; 1 verdict fails or an
//! assertion fails; 2 input error; 3 numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use qriccati::criteria::{
    check_cor41, check_thm31, check_thm32, check_thm33, check_thm34, check_thm35, check_thm41,
    default_grid, format_float, verify_conclusion, CriteriaError, Criterion, EnvelopePair,
    EnvelopeQuad, Verdict,
};
use qriccati::expr::config::{load_problem_config, ConfigError};
use qriccati::integrate::{integrate_ivp, IntegrateError};
use qriccati::model::{linear_system_rhs, real_rhs};
use qriccati::nonconj::{run_nonconj, NonconjError, NonconjInput, NonconjMode};
use qriccati::{NumericPolicy, ProblemSpec, Quaternion, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "qriccati",
    version,
    about = "Global-solvability criteria for quaternionic Riccati equations",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Check a criterion's hypotheses on the configured problem.
    Check {
        /// Criterion label: thm31|thm32|thm33|thm34|thm35|thm41|cor41
        #[arg(long)]
        criterion: String,
        /// Use the literal source-text variants of the boundary conditions.
        #[arg(long)]
        strict_source: bool,
        /// Sweep one parameter: key=lo:hi:count with key in
        /// {epsilon, Gamma, gamma0..gamma3}.
        #[arg(long)]
        sweep: Option<String>,
        config: PathBuf,
    },
    /// Integrate the real 4-component system and print a CSV trajectory.
    Integrate {
        /// Number of evenly spaced dense-output samples.
        #[arg(long, default_value_t = 1001)]
        samples: usize,
        config: PathBuf,
    },
    /// Check a criterion, then verify its conclusion by integration.
    Verify {
        #[arg(long)]
        criterion: String,
        #[arg(long)]
        strict_source: bool,
        #[arg(long)]
        sweep: Option<String>,
        config: PathBuf,
    },
    /// Run the non-conjugation harness for the associated linear system.
    Nonconj {
        /// Initial vector phi(t0) as a comma list of four reals.
        #[arg(long, default_value = "1,0,0,0")]
        phi0: String,
        /// Hypothesis branch: thm31 (componentwise) or thm32 (fivers).
        /// Defaults to thm31 when the config carries S_set, else thm32.
        #[arg(long)]
        mode: Option<String>,
        /// Re-run the criterion check before integrating.
        #[arg(long)]
        recheck: bool,
        /// Emit the (phi, psi) trajectory as CSV instead of the report.
        #[arg(long)]
        csv: bool,
        #[arg(long, default_value_t = 1001)]
        samples: usize,
        config: PathBuf,
    },
    /// Run the built-in closed-form oracles.
    Selftest,
}

/// Parses the argument vector and runs one command, writing to the given
/// sinks. Returns the process exit code.
pub fn run_command<O: Write, E: Write>(argv: &[String], out: &mut O, err: &mut E) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            };
            let _ = write!(err, "{e}");
            return code;
        }
    };
    let result = match cli.cmd {
        Cmd::Check {
            criterion,
            strict_source,
            sweep,
            config,
        } => cmd_check_or_verify(&criterion, strict_source, sweep, &config, false, out),
        Cmd::Verify {
            criterion,
            strict_source,
            sweep,
            config,
        } => cmd_check_or_verify(&criterion, strict_source, sweep, &config, true, out),
        Cmd::Integrate { samples, config } => cmd_integrate(samples, &config, out),
        Cmd::Nonconj {
            phi0,
            mode,
            recheck,
            csv,
            samples,
            config,
        } => cmd_nonconj(&phi0, mode.as_deref(), recheck, csv, samples, &config, out),
        Cmd::Selftest => cmd_selftest(out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "{}", e.diagnostic());
            e.exit_code()
        }
    }
}

/// CLI-level error with its exit-code mapping.
enum CliError {
    Input(String),
    Failed(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Failed(_) => EXIT_FAILED,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }

    fn diagnostic(&self) -> String {
        match self {
            CliError::Input(m) => format!("input error: {m}"),
            CliError::Failed(m) => format!("failed: {m}"),
            CliError::Numeric(m) => format!("numerical failure: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Validation { field, msg } => {
                CliError::Input(format!("validation error: {field}: {msg}"))
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<CriteriaError> for CliError {
    fn from(e: CriteriaError) -> Self {
        match e {
            CriteriaError::Precondition(msg) => CliError::Input(msg),
            CriteriaError::Bracket0Unbounded { .. } => CliError::Failed(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<IntegrateError> for CliError {
    fn from(e: IntegrateError) -> Self {
        match e {
            IntegrateError::BadWindow { .. } => CliError::Input(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<NonconjError> for CliError {
    fn from(e: NonconjError) -> Self {
        match e {
            NonconjError::ZeroPhi0 | NonconjError::GammaConstraint(_) => {
                CliError::Input(e.to_string())
            }
            NonconjError::CriterionFailed { .. } => CliError::Failed(e.to_string()),
            NonconjError::Criteria(inner) => inner.into(),
            NonconjError::Integrate(inner) => inner.into(),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

fn load(config: &Path) -> Result<ProblemSpec, CliError> {
    Ok(load_problem_config(config)?)
}

fn run_check(ps: &ProblemSpec, criterion: Criterion, strict: bool) -> Result<Verdict, CliError> {
    let grid = default_grid(ps);
    let verdict = match criterion {
        Criterion::Thm31 => {
            let s_set = ps
                .criterion
                .s_set
                .clone()
                .unwrap_or_else(|| vec![0, 1, 2, 3]);
            check_thm31(ps, &s_set, &grid)?
        }
        Criterion::Thm32 => {
            let eps = ps.criterion.epsilon.ok_or_else(|| {
                CliError::Input("validation error: epsilon required for thm32".into())
            })?;
            check_thm32(ps, eps, &grid, strict)?
        }
        Criterion::Thm33 => {
            let partition = ps.criterion.partition.clone().unwrap_or_default();
            check_thm33(ps, &partition, &grid)?
        }
        Criterion::Thm34 => {
            let env = EnvelopePair::from_problem(ps).map_err(cli_input)?;
            check_thm34(ps, &env, &grid, strict)?
        }
        Criterion::Thm35 => {
            let env = EnvelopePair::from_problem(ps).map_err(cli_input)?;
            check_thm35(ps, &env, &grid, strict)?
        }
        Criterion::Thm41 => {
            let env = EnvelopeQuad::from_problem(ps).map_err(cli_input)?;
            let gamma_cap = require_gamma_cap(ps)?;
            check_thm41(ps, &env, gamma_cap, &grid)?
        }
        Criterion::Cor41 => {
            let env = EnvelopeQuad::from_problem(ps).map_err(cli_input)?;
            let gamma_cap = require_gamma_cap(ps)?;
            check_cor41(ps, &env, gamma_cap, &grid)?
        }
    };
    Ok(verdict)
}

fn cli_input(e: CriteriaError) -> CliError {
    CliError::Input(e.to_string())
}

fn require_gamma_cap(ps: &ProblemSpec) -> Result<f64, CliError> {
    ps.criterion.gamma_cap.ok_or_else(|| {
        CliError::Input("validation error: Gamma required for this criterion".into())
    })
}

fn parse_criterion(label: &str) -> Result<Criterion, CliError> {
    Criterion::from_label(label).ok_or_else(|| {
        CliError::Input(format!(
            "unknown criterion `{label}` (expected thm31|thm32|thm33|thm34|thm35|thm41|cor41)"
        ))
    })
}

/// One check (and optional verification) run; returns the report lines and
/// the exit code.
fn check_verify_lines(
    ps: &ProblemSpec,
    criterion: Criterion,
    strict: bool,
    verify: bool,
) -> Result<(Vec<String>, i32), CliError> {
    let verdict = run_check(ps, criterion, strict)?;
    let mut lines = verdict.to_report_lines();
    let mut code = if verdict.holds { EXIT_OK } else { EXIT_FAILED };
    if verify && verdict.holds {
        let policy = NumericPolicy::with_overrides(&ps.numeric);
        let report = verify_conclusion(ps, &verdict, ps.gamma, &policy)?;
        lines.extend(report.to_report_lines());
        if !report.passed {
            code = EXIT_FAILED;
        }
    }
    Ok((lines, code))
}

/// Sweep key: applies a value to a copy of the problem.
fn apply_sweep(ps: &ProblemSpec, key: &str, value: f64) -> Result<ProblemSpec, CliError> {
    let mut out = ps.clone();
    match key {
        "epsilon" => out.criterion.epsilon = Some(value),
        "Gamma" => out.criterion.gamma_cap = Some(value),
        "gamma0" => out.gamma[0] = value,
        "gamma1" => out.gamma[1] = value,
        "gamma2" => out.gamma[2] = value,
        "gamma3" => out.gamma[3] = value,
        other => {
            return Err(CliError::Input(format!(
                "unknown sweep key `{other}` (expected epsilon, Gamma, or gamma0..gamma3)"
            )))
        }
    }
    Ok(out)
}

fn parse_sweep(arg: &str) -> Result<(String, f64, f64, usize), CliError> {
    let bad = || CliError::Input(format!("bad sweep `{arg}`, expected key=lo:hi:count"));
    let (key, range) = arg.split_once('=').ok_or_else(bad)?;
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    if count == 0 {
        return Err(bad());
    }
    Ok((key.to_string(), lo, hi, count))
}

fn cmd_check_or_verify<O: Write>(
    criterion: &str,
    strict: bool,
    sweep: Option<String>,
    config: &Path,
    verify: bool,
    out: &mut O,
) -> Result<i32, CliError> {
    let criterion = parse_criterion(criterion)?;
    let ps = load(config)?;
    let Some(sweep) = sweep else {
        let (lines, code) = check_verify_lines(&ps, criterion, strict, verify)?;
        for line in lines {
            let _ = writeln!(out, "{line}");
        }
        return Ok(code);
    };

    // fan out one worker per sweep value; print in index order
    let (key, lo, hi, count) = parse_sweep(&sweep)?;
    let values: Vec<f64> = (0..count)
        .map(|k| {
            if count == 1 {
                lo
            } else {
                lo + (hi - lo) * k as f64 / (count - 1) as f64
            }
        })
        .collect();
    type SweepResult = Result<(Vec<String>, i32), CliError>;
    let mut results: Vec<Option<SweepResult>> = (0..count).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (idx, &value) in values.iter().enumerate() {
            let ps = &ps;
            let key = &key;
            handles.push((
                idx,
                scope.spawn(move || -> SweepResult {
                    let swept = apply_sweep(ps, key, value)?;
                    swept.validate()?;
                    check_verify_lines(&swept, criterion, strict, verify)
                }),
            ));
        }
        for (idx, handle) in handles {
            results[idx] = Some(handle.join().expect("sweep worker panicked"));
        }
    });

    let mut worst = EXIT_OK;
    for (idx, (value, result)) in values.iter().zip(results).enumerate() {
        let _ = writeln!(out, "sweep_index = {idx}");
        let _ = writeln!(out, "sweep_{key} = {}", format_float(*value));
        match result.expect("worker result present") {
            Ok((lines, code)) => {
                for line in lines {
                    let _ = writeln!(out, "{line}");
                }
                worst = worst.max(code);
            }
            Err(e) => {
                let _ = writeln!(out, "error = {}", e.diagnostic());
                worst = worst.max(e.exit_code());
            }
        }
        let _ = writeln!(out);
    }
    Ok(worst)
}

fn write_trajectory_csv<O: Write>(traj: &Trajectory, samples: usize, out: &mut O) {
    let _ = writeln!(out, "t,q0,q1,q2,q3,status");
    let status = traj.status.label();
    for &t in &traj.sample_times(samples) {
        let q = traj.dense(t);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{status}",
            format_float(t),
            format_float(q[0]),
            format_float(q[1]),
            format_float(q[2]),
            format_float(q[3]),
        );
    }
}

fn cmd_integrate<O: Write>(samples: usize, config: &Path, out: &mut O) -> Result<i32, CliError> {
    let ps = load(config)?;
    let policy = NumericPolicy::with_overrides(&ps.numeric);
    let traj = integrate_ivp(real_rhs(&ps), &ps.gamma, ps.t0, ps.horizon, &policy)?;
    write_trajectory_csv(&traj, samples, out);
    Ok(EXIT_OK)
}

fn parse_vec4(s: &str) -> Result<[f64; 4], CliError> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err(CliError::Input(format!(
            "expected four comma-separated reals, got `{s}`"
        )));
    }
    let mut v = [0.0; 4];
    for (slot, p) in v.iter_mut().zip(parts) {
        *slot = p
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("`{p}` is not a number")))?;
    }
    Ok(v)
}

fn cmd_nonconj<O: Write>(
    phi0: &str,
    mode: Option<&str>,
    recheck: bool,
    csv: bool,
    samples: usize,
    config: &Path,
    out: &mut O,
) -> Result<i32, CliError> {
    let ps = load(config)?;
    let phi0 = parse_vec4(phi0)?;
    let mode = match mode {
        Some("thm31") => NonconjMode::Thm31 {
            s_set: ps
                .criterion
                .s_set
                .clone()
                .unwrap_or_else(|| vec![0, 1, 2, 3]),
        },
        Some("thm32") => NonconjMode::Thm32 {
            eps: ps.criterion.epsilon.ok_or_else(|| {
                CliError::Input("validation error: epsilon required for thm32 mode".into())
            })?,
        },
        Some(other) => {
            return Err(CliError::Input(format!(
                "unknown mode `{other}` (expected thm31 or thm32)"
            )))
        }
        None => match (&ps.criterion.s_set, ps.criterion.epsilon) {
            (None, Some(eps)) => NonconjMode::Thm32 { eps },
            (s_set, _) => NonconjMode::Thm31 {
                s_set: s_set.clone().unwrap_or_else(|| vec![0, 1, 2, 3]),
            },
        },
    };
    let policy = NumericPolicy::with_overrides(&ps.numeric);

    if csv {
        // raw (phi, psi) trajectory export
        let coupling = Quaternion::from_state(ps.gamma).symbol();
        let psi0 = coupling.apply(phi0);
        let mut state0 = [0.0; 8];
        state0[..4].copy_from_slice(&phi0);
        state0[4..].copy_from_slice(&psi0);
        let lifted = NumericPolicy {
            blowup_norm: policy.blowup_norm.max(1e100),
            ..policy
        };
        let traj = integrate_ivp(
            linear_system_rhs(&ps, 1),
            &state0,
            ps.t0,
            ps.horizon,
            &lifted,
        )?;
        let _ = writeln!(out, "t,phi1,phi2,phi3,phi4,psi1,psi2,psi3,psi4");
        for &t in &traj.sample_times(samples) {
            let s = traj.dense(t);
            let fields: Vec<String> = std::iter::once(format_float(t))
                .chain(s.iter().map(|v| format_float(*v)))
                .collect();
            let _ = writeln!(out, "{}", fields.join(","));
        }
        return Ok(EXIT_OK);
    }

    let input = NonconjInput {
        ps,
        phi0,
        mode,
        recheck,
    };
    let report = run_nonconj(&input, &policy)?;
    for line in report.to_report_lines() {
        let _ = writeln!(out, "{line}");
    }
    Ok(if report.nonconjugate {
        EXIT_OK
    } else {
        EXIT_FAILED
    })
}

fn cmd_selftest<O: Write>(out: &mut O) -> Result<i32, CliError> {
    use qriccati::model::quad_igh;
    let mut all_ok = true;
    let mut run = |name: &str, ok: bool| {
        let _ = writeln!(
            out,
            "selftest_{name} = {}",
            if ok { "pass" } else { "fail" }
        );
        all_ok &= ok;
    };

    run(
        "quaternion_units",
        Quaternion::I * Quaternion::J == Quaternion::K
            && Quaternion::J * Quaternion::I == -Quaternion::K,
    );

    let p = Quaternion::new(1.0, 2.0, -0.5, 0.25);
    let q = Quaternion::new(-0.75, 0.5, 3.0, 1.0);
    run(
        "symbol_homomorphism",
        (p * q)
            .symbol()
            .max_abs_diff(&p.symbol().matmul(&q.symbol()))
            <= 1e-12,
    );
    run(
        "determinant_law",
        (p.symbol().det() - p.norm_sq() * p.norm_sq()).abs() <= 1e-10 * p.norm_sq() * p.norm_sq(),
    );

    let decay = ProblemSpec::constant(
        [1.0, 0.0, 0.0, 0.0],
        [0.0; 4],
        [0.0; 4],
        [0.0; 4],
        0.0,
        10.0,
        [1.0, 0.0, 0.0, 0.0],
    );
    let traj = integrate_ivp(
        real_rhs(&decay),
        &decay.gamma,
        0.0,
        10.0,
        &NumericPolicy::default(),
    );
    run(
        "closed_form_decay",
        traj.map(|t| (t.last_state()[0] - 1.0 / 11.0).abs() <= 1e-8 / 11.0)
            .unwrap_or(false),
    );

    let escape = ProblemSpec::constant(
        [1.0, 0.0, 0.0, 0.0],
        [0.0; 4],
        [0.0; 4],
        [1.0, 0.0, 0.0, 0.0],
        0.0,
        3.0,
        [0.0; 4],
    );
    let traj = integrate_ivp(
        real_rhs(&escape),
        &escape.gamma,
        0.0,
        3.0,
        &NumericPolicy::default(),
    );
    run(
        "escape_time",
        traj.map(|t| match t.status {
            qriccati::Status::Escaped { t_escape } => {
                (t_escape - std::f64::consts::FRAC_PI_2).abs() <= 1e-3
            }
            _ => false,
        })
        .unwrap_or(false),
    );

    let igh = quad_igh(|_| Ok(1.0), |_| Ok(1.0), 0.0, 2.0);
    run(
        "weighted_quadrature",
        igh.map(|v| (v - (1.0 - (-2.0_f64).exp())).abs() <= 1e-9)
            .unwrap_or(false),
    );

    let e = qriccati::expr::parse_expr("exp(2*t)").unwrap();
    let de = e.diff();
    let h = 1e-5;
    let fd = (e.eval(1.0 + h).unwrap() - e.eval(1.0 - h).unwrap()) / (2.0 * h);
    run(
        "symbolic_derivative",
        (de.eval(1.0).unwrap() - fd).abs() <= 1e-6 * fd.abs(),
    );

    let constant = ProblemSpec::constant(
        [1.0, 0.0, 0.0, 0.0],
        [0.0; 4],
        [0.0; 4],
        [-1.0, 0.0, 0.0, 0.0],
        0.0,
        10.0,
        [1.0, 0.0, 0.0, 0.0],
    );
    let q_traj = integrate_ivp(
        real_rhs(&constant),
        &constant.gamma,
        0.0,
        10.0,
        &NumericPolicy::default(),
    );
    let liouville = q_traj.map_err(CliError::from).and_then(|t| {
        qriccati::nonconj::liouville_check(&constant, &t, &NumericPolicy::default())
            .map_err(CliError::from)
    });
    run(
        "liouville_identity",
        liouville.map(|r| r <= 1e-6).unwrap_or(false),
    );

    Ok(if all_ok { EXIT_OK } else { EXIT_FAILED })
}
