use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lockshift_core::flow::DEFAULT_ITERATION_BUDGET;
use lockshift_core::frontend::{parse, parse_guarded, resolve::check_program, FrontendError, Program};
use lockshift_core::guardcheck;
use lockshift_core::pipeline::{analyze, translate, Analysis, Options, Timings};
use lockshift_core::summary::{read_summary, validate, write_summary, LockSummary};

/// Infer lock summaries for Mini-C programs and rewrite them into the
/// guarded lock dialect.
#[derive(Parser, Debug)]
#[command(name = "lockshift", version, about)]
struct Cli {
    /// Check a guarded (.gmc) file and exit; same as the `check` subcommand.
    #[arg(long, value_name = "FILE", exclusive = true)]
    check: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the lock summary of a Mini-C program.
    Analyze(RunArgs),
    /// Rewrite a Mini-C program into the guarded dialect.
    Transform(RunArgs),
    /// Check guard ownership in a guarded program.
    Check {
        input: PathBuf,
    },
    /// Analyze, transform, and check.
    Full(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    input: PathBuf,

    /// Output file; standard output if omitted.
    #[arg(short = 'o', value_name = "FILE")]
    output: Option<PathBuf>,

    /// Also write the lock summary to FILE.
    #[arg(long, value_name = "FILE")]
    emit_summary: Option<PathBuf>,

    /// Transform with this summary instead of analyzing.
    #[arg(long, value_name = "FILE")]
    use_summary: Option<PathBuf>,

    /// Write each function's control-flow graph (DOT) to FILE.
    #[arg(long, value_name = "FILE")]
    dump_cfg: Option<PathBuf>,

    /// Write the call graph and its condensation (DOT) to FILE.
    #[arg(long, value_name = "FILE")]
    dump_callgraph: Option<PathBuf>,

    /// Write per-node lock sets (JSON) to FILE.
    #[arg(long, value_name = "FILE")]
    dump_flow: Option<PathBuf>,

    /// Print per-phase wall time to standard error.
    #[arg(long)]
    timings: bool,

    /// Maximum fixpoint passes per recursive component.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_ITERATION_BUDGET)]
    iteration_budget: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Analyze,
    Transform,
    Full,
}

/// Failure already reported to the user, carrying the exit code.
struct Reported(u8);

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match (cli.check, cli.command) {
        (Some(path), _) | (None, Some(Command::Check { input: path })) => check_file(&path),
        (None, Some(Command::Analyze(a))) => run(Mode::Analyze, &a),
        (None, Some(Command::Transform(a))) => run(Mode::Transform, &a),
        (None, Some(Command::Full(a))) => run(Mode::Full, &a),
        (None, None) => {
            eprintln!("error: no command given; see `lockshift --help`");
            Err(Reported(1))
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Reported(code)) => ExitCode::from(code),
    }
}

fn fail(err: anyhow::Error) -> Reported {
    eprintln!("error: {err:#}");
    Reported(1)
}

fn frontend_error(path: &Path, err: &FrontendError) -> Reported {
    eprintln!("{}:{err}", path.display());
    Reported(1)
}

fn read(path: &Path) -> Result<String, Reported> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(fail)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Reported> {
    match path {
        Some(p) if p != Path::new("-") => fs::write(p, text)
            .with_context(|| format!("cannot write {}", p.display()))
            .map_err(fail),
        _ => std::io::stdout()
            .write_all(text.as_bytes())
            .context("cannot write to standard output")
            .map_err(fail),
    }
}

fn check_file(path: &Path) -> Result<(), Reported> {
    let src = read(path)?;
    let program = parse_guarded(&src).map_err(|e| frontend_error(path, &e))?;
    let errors = guardcheck::check_program(&program);
    for e in &errors {
        eprintln!("{}:{e}", path.display());
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Reported(2))
    }
}

fn load_summary(path: &Path, program: &Program) -> Result<LockSummary, Reported> {
    let text = read(path)?;
    let env = check_program(program).map_err(|e| frontend_error(path, &e))?;
    let schema = |e: lockshift_core::summary::SchemaError| {
        eprintln!("{}: schema error at {}: {}", path.display(), e.path, e.message);
        Reported(1)
    };
    let summary = read_summary(&text).map_err(schema)?;
    validate(&summary, program, &env).map_err(schema)?;
    Ok(summary)
}

fn dumps(args: &RunArgs, a: &Analysis<'_>) -> Result<(), Reported> {
    if let Some(path) = &args.dump_cfg {
        let dot: String = a.flow.graphs.values().map(|g| g.to_dot()).collect();
        write_out(Some(path), &dot)?;
    }
    if let Some(path) = &args.dump_callgraph {
        write_out(Some(path), &a.call_graph.to_dot())?;
    }
    if let Some(path) = &args.dump_flow {
        let json = serde_json::to_string_pretty(&a.flow.to_json()).expect("flow facts serialize");
        write_out(Some(path), &(json + "\n"))?;
    }
    Ok(())
}

fn run(mode: Mode, args: &RunArgs) -> Result<(), Reported> {
    let input = args.input.as_path();
    let src = read(input)?;
    let program = parse(&src).map_err(|e| frontend_error(input, &e))?;
    let opts = Options {
        iteration_budget: args.iteration_budget,
    };

    let (summary, env, mut timings) = match &args.use_summary {
        Some(path) if mode != Mode::Analyze => {
            let mut timings = Timings::default();
            let summary = timings.time("load summary", || load_summary(path, &program))?;
            let env = check_program(&program).map_err(|e| frontend_error(input, &e))?;
            (summary, env, timings)
        }
        _ => {
            let a = analyze(&program, opts).map_err(|e| {
                eprintln!("{}: error: {e}", input.display());
                Reported(1)
            })?;
            for d in &a.diagnostics {
                eprintln!("{}:{d}", input.display());
            }
            dumps(args, &a)?;
            (a.summary, a.env, a.timings)
        }
    };

    if let Some(path) = &args.emit_summary {
        write_out(Some(path), &write_summary(&summary))?;
    }

    let mut code = 0;
    match mode {
        Mode::Analyze => {
            if args.emit_summary.is_none() || args.output.is_some() {
                write_out(args.output.as_deref(), &write_summary(&summary))?;
            }
        }
        Mode::Transform | Mode::Full => {
            let t = translate(&program, &env, &summary, &mut timings).map_err(|e| {
                eprintln!("{}: error: {e}", input.display());
                Reported(1)
            })?;
            for d in &t.diagnostics {
                eprintln!("{}:{d}", input.display());
            }
            write_out(args.output.as_deref(), &t.text)?;
            if mode == Mode::Full {
                let shown = args.output.as_deref().unwrap_or(input);
                for e in &t.errors {
                    eprintln!("{}:{e}", shown.display());
                }
                if !t.errors.is_empty() {
                    code = 2;
                }
            }
        }
    }

    if args.timings {
        for (stage, d) in &timings.0 {
            eprintln!("{stage:>14} {:>10.3} ms", d.as_secs_f64() * 1e3);
        }
        eprintln!("{:>14} {:>10.3} ms", "total", timings.total().as_secs_f64() * 1e3);
    }
    if code == 0 {
        Ok(())
    } else {
        Err(Reported(code))
    }
}
