//! `qstore` command line.
//!
//! Reports are JSON on stdout (or `--report <path>`), with a short human
//! summary on stderr. Exit codes: 0 success, 1 check or retrieval failure,
//! 2 usage, 3 transport, 4 protocol violation.

use std::ffi::OsString;
use std::io::Write;
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::codec::{compose_program_unitary, Program};
use crate::error::Error;
use crate::generators::{u_of_theta, Angle, Generator};
use crate::linalg::{apply, fidelity_up_to_phase, StateVector};
use crate::protocol::{
    run_alice, run_session_with, serve_bob, AliceSession, ProtocolMessage, SessionError,
    StreamTransport, TransportKind,
};
use crate::retrieval::{
    monte_carlo_capped, retrieve_with_correction, Retrieval, DEFAULT_MAX_ATTEMPTS,
};
use crate::rng::RandomStream;
use crate::verify::{run_checks, VerifyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TRANSPORT: i32 = 3;
pub const EXIT_PROTOCOL: i32 = 4;

/// Substream that seeds random data states, disjoint from measurement streams.
const DATA_STREAM: u64 = u64::MAX;

const FIDELITY_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(
    name = "qstore",
    version,
    about = "Store, retrieve and distribute unitaries held in angle states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Retrieve one stored operator with repeat-until-success correction.
    Retrieve(RetrieveArgs),
    /// Statistics of the correction loop over many seeded trials.
    Montecarlo(MonteCarloArgs),
    /// Run the Alice/Bob program distribution protocol.
    #[command(subcommand)]
    Protocol(ProtocolCommand),
    /// Run the invariant suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Seed for every random draw; falls back to QPS_SEED, then 0.
    #[arg(long, env = "QPS_SEED", default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OperatorArgs {
    /// z:<i>,<j>,... | ps:<n> | dense:<path>
    #[arg(long)]
    generator: String,
    /// Rotation angle in radians.
    #[arg(long, allow_negative_numbers = true)]
    theta: f64,
    /// Number of data qubits.
    #[arg(long)]
    qubits: Option<usize>,
    /// Initial data state: `random` or `basis:<index>`.
    #[arg(long, default_value = "random")]
    data: String,
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    max_attempts: u32,
}

#[derive(Debug, Args)]
struct RetrieveArgs {
    #[command(flatten)]
    op: OperatorArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct MonteCarloArgs {
    #[command(flatten)]
    op: OperatorArgs,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SessionArgs {
    /// Program file: `J <i,j,...> <theta>` / `X <i,j,...>` per line.
    #[arg(long)]
    program: PathBuf,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long, default_value = "random")]
    data: String,
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    max_attempts: u32,
}

#[derive(Debug, Subcommand)]
enum ProtocolCommand {
    /// Alice and Bob in one process.
    Loopback {
        #[command(flatten)]
        session: SessionArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Bob: accept one session on a TCP address.
    Serve {
        #[arg(long)]
        listen: String,
        #[arg(long)]
        qubits: usize,
        #[arg(long, default_value = "random")]
        data: String,
        #[command(flatten)]
        common: Common,
    },
    /// Alice: run one session against a listening Bob.
    Connect {
        #[arg(long)]
        connect: String,
        #[command(flatten)]
        session: SessionArgs,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 5)]
    qubits: usize,
    #[command(flatten)]
    common: Common,
}

/// A finished subcommand: exit code, JSON report, one-line summary.
struct Outcome {
    code: i32,
    report: Value,
    summary: String,
}

/// Failure before a report could be produced.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Transport(_) | Error::Frame(_) => EXIT_TRANSPORT,
            Error::ProtocolViolation(_) | Error::RetryLimit(_) => EXIT_PROTOCOL,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    let report_path = match &cli.command {
        Command::Retrieve(a) => a.common.report.clone(),
        Command::Montecarlo(a) => a.common.report.clone(),
        Command::Verify(a) => a.common.report.clone(),
        Command::Protocol(
            ProtocolCommand::Loopback { common, .. }
            | ProtocolCommand::Serve { common, .. }
            | ProtocolCommand::Connect { common, .. },
        ) => common.report.clone(),
    };
    let result = match cli.command {
        Command::Retrieve(a) => cmd_retrieve(a),
        Command::Montecarlo(a) => cmd_montecarlo(a),
        Command::Protocol(p) => cmd_protocol(p),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(outcome) => {
            let _ = writeln!(stderr, "{}", outcome.summary);
            match emit(&outcome.report, report_path.as_deref(), stdout) {
                Ok(()) => outcome.code,
                Err(e) => {
                    let _ = writeln!(stderr, "error: cannot write report: {e}");
                    EXIT_FAILURE
                }
            }
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn emit(report: &Value, path: Option<&Path>, stdout: &mut dyn Write) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(report).expect("json values serialize");
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text),
        None => stdout.write_all(text.as_bytes()),
    }
}

fn header(command: &str, seed: u64, config: Value) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("command".into(), json!(command));
    m.insert("seed".into(), json!(seed));
    m.insert("config".into(), config);
    m
}

fn data_state(spec: &str, num_qubits: usize, seed: u64) -> Result<StateVector, Failure> {
    if spec == "random" {
        return Ok(StateVector::random(
            num_qubits,
            &mut RandomStream::substream(seed, DATA_STREAM),
        )?);
    }
    let index = spec
        .strip_prefix("basis:")
        .and_then(|i| i.parse::<usize>().ok())
        .ok_or_else(|| {
            usage(format!(
                "bad --data {spec:?}; expected random or basis:<index>"
            ))
        })?;
    Ok(StateVector::basis(num_qubits, index)?)
}

fn amplitudes_json(state: &StateVector) -> Value {
    state.amps().iter().map(|a| json!([a.re, a.im])).collect()
}

fn transcript_json(transcript: &[ProtocolMessage]) -> Value {
    transcript.iter().map(|m| json!(m.to_json())).collect()
}

fn operator_config(op: &OperatorArgs, g: &Generator) -> Value {
    json!({
        "generator": op.generator,
        "resolved_generator": g.to_string(),
        "qubits": g.num_data_qubits(),
        "theta": op.theta,
        "data": op.data,
        "max_attempts": op.max_attempts,
    })
}

fn cmd_retrieve(args: RetrieveArgs) -> Result<Outcome, Failure> {
    let RetrieveArgs { op, common } = args;
    let g = Generator::parse_spec(&op.generator, op.qubits)?;
    let theta = Angle::new(op.theta)?;
    if op.max_attempts == 0 {
        return Err(usage("--max-attempts must be at least 1"));
    }
    let data = data_state(&op.data, g.num_data_qubits(), common.seed)?;
    let mut rng = RandomStream::new(common.seed);
    let retrieval = retrieve_with_correction(theta, &g, &data, &mut rng, op.max_attempts)?;

    let mut report = header("retrieve", common.seed, operator_config(&op, &g));
    let (code, summary) = match &retrieval {
        Retrieval::Success { state, attempts } => {
            let want = apply(&u_of_theta(&g, theta), &data)?;
            let fidelity = fidelity_up_to_phase(state, &want)?;
            report.insert("success".into(), json!(true));
            report.insert("attempts".into(), json!(attempts));
            report.insert("fidelity".into(), json!(fidelity));
            let code = if fidelity >= 1.0 - FIDELITY_TOL {
                EXIT_OK
            } else {
                EXIT_FAILURE
            };
            (code, format!("retrieved {g} at θ={theta} in {attempts} attempt(s), fidelity {fidelity:.12} (seed {})", common.seed))
        }
        Retrieval::Exhausted { residual, failures } => {
            let k = i32::try_from(*failures).unwrap_or(i32::MAX);
            let wrong = Angle::new(-(2f64.powi(k) - 1.0) * theta.radians())?;
            let want = apply(&u_of_theta(&g, wrong), &data)?;
            let fidelity = fidelity_up_to_phase(residual, &want)?;
            report.insert("success".into(), json!(false));
            report.insert("attempts".into(), json!(failures));
            report.insert("residual_angle".into(), json!(wrong.radians()));
            report.insert("residual_fidelity".into(), json!(fidelity));
            (EXIT_FAILURE, format!("exhausted after {failures} attempt(s); residual matches U(−(2^k−1)θ) with fidelity {fidelity:.12} (seed {})", common.seed))
        }
    };
    Ok(Outcome {
        code,
        report: Value::Object(report),
        summary,
    })
}

fn cmd_montecarlo(args: MonteCarloArgs) -> Result<Outcome, Failure> {
    let MonteCarloArgs { op, trials, common } = args;
    let g = Generator::parse_spec(&op.generator, op.qubits)?;
    let theta = Angle::new(op.theta)?;
    if trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    if op.max_attempts == 0 {
        return Err(usage("--max-attempts must be at least 1"));
    }
    let data = data_state(&op.data, g.num_data_qubits(), common.seed)?;
    let stats = monte_carlo_capped(&g, theta, &data, trials, common.seed, op.max_attempts)?;

    let rate = stats.success_rate();
    let sigma = (0.25 / trials as f64).sqrt();
    let deviation = (rate - 0.5).abs() / sigma;
    let passed = deviation <= 5.0;

    let mut config = operator_config(&op, &g);
    config["trials"] = json!(trials);
    let mut report = header("montecarlo", common.seed, config);
    report.insert(
        "stats".into(),
        serde_json::to_value(&stats).expect("stats serialize"),
    );
    report.insert(
        "self_check".into(),
        json!({ "success_rate": rate, "sigma": sigma, "deviation_sigmas": deviation, "passed": passed }),
    );
    Ok(Outcome {
        code: if passed { EXIT_OK } else { EXIT_FAILURE },
        report: Value::Object(report),
        summary: format!(
            "{trials} trials: success rate {rate:.5} ({deviation:.2}σ from 1/2), mean attempts {:.5} (seed {})",
            stats.mean_attempts, common.seed
        ),
    })
}

fn load_program(args: &SessionArgs) -> Result<Program, Failure> {
    let text = std::fs::read_to_string(&args.program)
        .map_err(|e| usage(format!("cannot read {}: {e}", args.program.display())))?;
    Program::parse(&text, args.qubits)
        .map_err(|e| usage(format!("{}: {e}", args.program.display())))
}

fn session_config(args: &SessionArgs, program: &Program) -> Value {
    json!({
        "program": args.program.display().to_string(),
        "qubits": program.num_data_qubits(),
        "instructions": program.len(),
        "data": args.data,
        "max_attempts": args.max_attempts,
    })
}

fn session_failure(e: SessionError) -> Failure {
    let mut f = Failure::from(e.error);
    f.message = format!("{} (after {} messages)", f.message, e.transcript.len());
    f
}

fn cmd_protocol(cmd: ProtocolCommand) -> Result<Outcome, Failure> {
    match cmd {
        ProtocolCommand::Loopback { session, common } => {
            let program = load_program(&session)?;
            let initial = data_state(&session.data, program.num_data_qubits(), common.seed)?;
            let report = run_session_with(
                &program,
                &initial,
                TransportKind::Loopback,
                common.seed,
                session.max_attempts,
            )
            .map_err(session_failure)?;
            let want = apply(&compose_program_unitary(&program)?, &initial)?;
            let fidelity = fidelity_up_to_phase(&report.final_state, &want)?;
            let mut out = header(
                "protocol loopback",
                common.seed,
                session_config(&session, &program),
            );
            out.insert("angle_states_sent".into(), json!(report.angle_states_sent));
            out.insert("fidelity".into(), json!(fidelity));
            out.insert("final_state".into(), amplitudes_json(&report.final_state));
            out.insert("transcript".into(), transcript_json(&report.transcript));
            Ok(Outcome {
                code: if fidelity >= 1.0 - FIDELITY_TOL {
                    EXIT_OK
                } else {
                    EXIT_FAILURE
                },
                report: Value::Object(out),
                summary: format!(
                    "{} instruction(s), {} angle state(s) sent, fidelity {fidelity:.12} (seed {})",
                    program.len(),
                    report.angle_states_sent,
                    common.seed
                ),
            })
        }
        ProtocolCommand::Serve {
            listen,
            qubits,
            data,
            common,
        } => {
            let initial = data_state(&data, qubits, common.seed)?;
            let listener = TcpListener::bind(&listen).map_err(Error::from)?;
            let (stream, peer) = listener.accept().map_err(Error::from)?;
            let outcome = serve_bob(stream, initial, common.seed)?;
            let config = json!({ "listen": listen, "qubits": qubits, "data": data });
            let mut out = header("protocol serve", common.seed, config);
            out.insert("completed".into(), json!(outcome.completed));
            out.insert("final_state".into(), amplitudes_json(&outcome.data));
            out.insert("transcript".into(), transcript_json(&outcome.transcript));
            Ok(Outcome {
                code: if outcome.completed {
                    EXIT_OK
                } else {
                    EXIT_PROTOCOL
                },
                report: Value::Object(out),
                summary: format!(
                    "served {peer}: {} message(s), {}",
                    outcome.transcript.len(),
                    if outcome.completed {
                        "completed"
                    } else {
                        "aborted"
                    }
                ),
            })
        }
        ProtocolCommand::Connect {
            connect,
            session,
            common,
        } => {
            let program = load_program(&session)?;
            let stream = TcpStream::connect(&connect).map_err(Error::from)?;
            let mut transport = StreamTransport::new(stream);
            let alice = AliceSession::with_max_attempts(program.clone(), session.max_attempts);
            let run = run_alice(alice, &mut transport).map_err(session_failure)?;
            let mut config = session_config(&session, &program);
            config["connect"] = json!(connect);
            let mut out = header("protocol connect", common.seed, config);
            out.insert("angle_states_sent".into(), json!(run.angle_states_sent));
            out.insert("transcript".into(), transcript_json(&run.transcript));
            Ok(Outcome {
                code: EXIT_OK,
                report: Value::Object(out),
                summary: format!(
                    "sent {} instruction(s) using {} angle state(s)",
                    program.len(),
                    run.angle_states_sent
                ),
            })
        }
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<Outcome, Failure> {
    if args.qubits == 0 || args.qubits > 10 {
        return Err(usage("--qubits must be between 1 and 10"));
    }
    let cfg = VerifyConfig {
        num_qubits: args.qubits,
        seed: args.common.seed,
    };
    let results = run_checks(&cfg);
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name)
        .collect();
    let mut out = header("verify", cfg.seed, json!({ "qubits": cfg.num_qubits }));
    out.insert("passed".into(), json!(failed.is_empty()));
    out.insert(
        "checks".into(),
        serde_json::to_value(&results).expect("results serialize"),
    );
    let summary = if failed.is_empty() {
        format!("all {} checks passed", results.len())
    } else {
        format!("FAILED: {}", failed.join(", "))
    };
    Ok(Outcome {
        code: if failed.is_empty() {
            EXIT_OK
        } else {
            EXIT_FAILURE
        },
        report: Value::Object(out),
        summary,
    })
}
