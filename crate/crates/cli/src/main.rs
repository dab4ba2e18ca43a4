mod args;
mod repl;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use mergeloop::export::to_json_pretty;
use mergeloop::generator::{generate_machine, sample_held_out, sample_traces, undersample_traces};
use mergeloop::io::write_atomic;
use mergeloop::session::{ReplayFailure, SessionError};
use mergeloop::{
    parse_command_log, parse_traces, replay, run_batch, serialize_traces, to_dot, to_json,
    write_step_artifacts, Sample, Session,
};
use mergeloop_service::{resolve_addr, ServiceConfig};
use thiserror::Error;

use args::{Cli, RunMode};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

fn io_err(what: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", what.display()))
}

fn session_err(e: SessionError) -> CliError {
    match e {
        SessionError::HeuristicMismatch { .. } => CliError::Usage(e.to_string()),
        SessionError::Apta(_) => CliError::Data(e.to_string()),
    }
}

fn load_sample(cli: &Cli) -> Result<Sample, CliError> {
    let path = cli
        .input
        .as_deref()
        .ok_or_else(|| CliError::Usage("a trace file is required in this mode".into()))?;
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_traces(&text, cli.trace_mode())
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    write_atomic(path, contents.as_bytes()).map_err(io_err(path))
}

fn create_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn batch(cli: &Cli) -> Result<(), CliError> {
    let sample = load_sample(cli)?;
    let (model, log) = run_batch(&sample, &cli.params(), cli.heuristic()).map_err(session_err)?;
    create_out_dir(&cli.out_dir)?;
    write_file(&cli.out_dir.join("model.dot"), &to_dot(&model))?;
    write_file(&cli.out_dir.join("model.json"), &to_json_pretty(&model))?;
    write_file(&cli.out_dir.join("trace.log"), &format!("{log}\n"))?;
    println!("{log}");
    Ok(())
}

fn replay_log(cli: &Cli) -> Result<(), CliError> {
    let log_path = cli
        .log
        .as_deref()
        .ok_or_else(|| CliError::Usage("--log is required in replay mode".into()))?;
    let sample = load_sample(cli)?;
    let text = fs::read_to_string(log_path).map_err(io_err(log_path))?;
    let commands = parse_command_log(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", log_path.display())))?;
    let session =
        replay(sample, cli.params(), cli.heuristic(), &commands).map_err(|e| match e {
            ReplayFailure::Session(e) => session_err(e),
            ReplayFailure::Command(e) => CliError::Data(format!("{}: {e}", log_path.display())),
        })?;
    write_step_artifacts(&session, &cli.out_dir).map_err(io_err(&cli.out_dir))?;
    println!("{}", session.trace_log());
    Ok(())
}

fn interactive(cli: &Cli) -> Result<(), CliError> {
    let sample = load_sample(cli)?;
    let mut session = Session::new(sample, cli.params(), cli.heuristic()).map_err(session_err)?;
    let stdin = io::stdin();
    repl::run(
        &mut session,
        &cli.out_dir,
        stdin.lock(),
        &mut io::stdout().lock(),
        &mut io::stderr().lock(),
    )
    .map_err(io_err(&cli.out_dir))
}

fn serve(cli: &Cli) -> Result<(), CliError> {
    let addr = resolve_addr(cli.addr.as_deref());
    let config = ServiceConfig {
        artifacts_dir: cli.write_artifacts.then(|| cli.out_dir.clone()),
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(e.to_string()))?;
    runtime
        .block_on(mergeloop_service::serve(&addr, config))
        .map_err(|e| CliError::Data(format!("{addr}: {e}")))
}

fn generate(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.generator();
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let machine = generate_machine(&cfg).map_err(|e| CliError::Data(e.to_string()))?;
    create_out_dir(&cli.out_dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    let mut emit = |name: String, contents: String| -> Result<(), CliError> {
        let path = cli.out_dir.join(name);
        write_file(&path, &contents)?;
        written.push(path);
        Ok(())
    };
    emit(
        "traces.txt".into(),
        serialize_traces(&sample_traces(&machine, &cfg)),
    )?;
    emit("target.json".into(), to_json(&machine))?;
    if let Some(n) = cli.undersample {
        let small =
            undersample_traces(&machine, &cfg, n).map_err(|e| CliError::Usage(e.to_string()))?;
        emit(format!("traces{n}.txt"), serialize_traces(&small))?;
    }
    if let Some(n) = cli.held_out {
        emit(
            "held_out.txt".into(),
            serialize_traces(&sample_held_out(&machine, &cfg, n)),
        )?;
    }
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.data_name.is_some() {
        log::warn!("--data-name is accepted for compatibility and ignored");
    }
    if cli.satdfabound.is_some() {
        log::warn!("--satdfabound is accepted for compatibility and ignored");
    }
    match cli.mode {
        RunMode::Batch => batch(cli),
        RunMode::Interactive => interactive(cli),
        RunMode::Replay => replay_log(cli),
        RunMode::Serve => serve(cli),
        RunMode::Generate => generate(cli),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
