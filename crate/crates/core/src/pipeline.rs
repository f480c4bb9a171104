//! The analysis stages chained together, with per-stage timings.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use crate::callgraph::{build_call_graph, CallGraph};
use crate::datalock::{collect_accesses, identify, AccessRecord, ProtectionVerdict};
use crate::diag::Diagnostic;
use crate::flow::{analyze_program, FlowError, ProgramFlow, DEFAULT_ITERATION_BUDGET};
use crate::frontend::{parse_guarded, resolve::check_program, FrontendError, Program, ProgramEnv};
use crate::guardcheck::{self, GuardError};
use crate::propagation::{collect_call_facts, propagate, CallSiteFact, FunctionFlowSummary};
use crate::summary::{build_summary, LockSummary};
use crate::transform::{print_guarded, transform, TransformError};

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub iteration_budget: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            iteration_budget: DEFAULT_ITERATION_BUDGET,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    /// The transformer produced text the guarded parser rejects.
    #[error("generated program does not parse: {0}")]
    Reparse(FrontendError),
}

/// Wall-clock time per stage, in execution order.
#[derive(Debug, Clone, Default)]
pub struct Timings(pub Vec<(&'static str, Duration)>);

impl Timings {
    pub fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push((stage, start.elapsed()));
        out
    }

    pub fn total(&self) -> Duration {
        self.0.iter().map(|(_, d)| *d).sum()
    }
}

/// Everything computed for one Mini-C program.
pub struct Analysis<'a> {
    pub program: &'a Program,
    pub env: ProgramEnv,
    pub call_graph: CallGraph,
    pub flow: ProgramFlow<'a>,
    pub calls: Vec<CallSiteFact>,
    pub functions: BTreeMap<String, FunctionFlowSummary>,
    pub accesses: Vec<AccessRecord>,
    pub verdicts: Vec<ProtectionVerdict>,
    pub summary: LockSummary,
    /// Warnings from every stage, sorted by line.
    pub diagnostics: Vec<Diagnostic>,
    pub timings: Timings,
}

/// Runs call-graph construction, flow analysis, propagation and data-lock
/// identification, and assembles the lock summary.
pub fn analyze(p: &Program, opts: Options) -> Result<Analysis<'_>, PipelineError> {
    let mut timings = Timings::default();
    let env = timings.time("resolve", || check_program(p))?;
    let call_graph = timings.time("callgraph", || build_call_graph(p));
    let flow = timings.time("flow", || analyze_program(p, &call_graph, opts.iteration_budget))?;
    let calls = timings.time("callsites", || collect_call_facts(p, &flow));
    let (functions, mut diagnostics) = timings.time("propagation", || propagate(p, &call_graph, &flow, &calls));
    let accesses = timings.time("accesses", || collect_accesses(p, &env, &flow, &functions));
    let verdicts = timings.time("datalock", || identify(p, &env, &call_graph, &accesses));
    let summary = timings.time("summary", || build_summary(&verdicts, &functions));
    diagnostics.extend(flow.diagnostics.iter().cloned());
    diagnostics.sort_by(|a, b| (a.line, a).cmp(&(b.line, b)));
    diagnostics.dedup();
    Ok(Analysis {
        program: p,
        env,
        call_graph,
        flow,
        calls,
        functions,
        accesses,
        verdicts,
        summary,
        diagnostics,
        timings,
    })
}

/// A transformed program together with its guard-ownership verdict.
#[derive(Debug, Clone)]
pub struct Translation {
    pub program: Program,
    pub text: String,
    pub diagnostics: Vec<Diagnostic>,
    /// Empty when the guarded program is accepted.
    pub errors: Vec<GuardError>,
}

/// Transforms `p` under `summary`, prints it, and checks the printed text.
pub fn translate(
    p: &Program,
    env: &ProgramEnv,
    summary: &LockSummary,
    timings: &mut Timings,
) -> Result<Translation, PipelineError> {
    let out = timings.time("transform", || transform(p, env, summary))?;
    let text = print_guarded(&out.program);
    let reparsed = timings.time("reparse", || parse_guarded(&text)).map_err(PipelineError::Reparse)?;
    let errors = timings.time("guardcheck", || guardcheck::check_program(&reparsed));
    Ok(Translation {
        program: out.program,
        text,
        diagnostics: out.diagnostics,
        errors,
    })
}
