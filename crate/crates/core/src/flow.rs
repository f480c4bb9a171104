//! Bottom-up guard analyses.
//!
//! Live guard analysis (LGA) is a backward may analysis whose value at entry
//! is the minimum entry lock set (MELS). Available guard analysis (AGA) is a
//! forward must analysis seeded with the MELS at entry; its value at ret is
//! the minimum return lock set (MRLS). Calls to user functions behave like
//! the unlocks and locks they summarize, after rewriting parameter-rooted
//! paths to the caller's argument paths.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::ser::{Serialize, SerializeSeq, Serializer};
use serde_json::{json, Map, Value};

use crate::callgraph::CallGraph;
use crate::cfg::{build_cfg, FlowGraph, NodeId};
use crate::diag::Diagnostic;
use crate::frontend::{Expr, LockPath, Program, Stmt, PTHREAD_MUTEX_LOCK, PTHREAD_MUTEX_UNLOCK};

pub const DEFAULT_ITERATION_BUDGET: usize = 1000;

/// A set of lock paths, or `Top`, the set of every lock path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LockSet {
    Finite(BTreeSet<LockPath>),
    Top,
}

impl Default for LockSet {
    fn default() -> Self {
        LockSet::empty()
    }
}

impl LockSet {
    pub fn empty() -> LockSet {
        LockSet::Finite(BTreeSet::new())
    }

    pub fn singleton(p: LockPath) -> LockSet {
        LockSet::Finite(BTreeSet::from([p]))
    }

    pub fn is_top(&self) -> bool {
        matches!(self, LockSet::Top)
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, LockSet::Finite(s) if s.is_empty())
    }

    pub fn contains(&self, p: &LockPath) -> bool {
        match self {
            LockSet::Finite(s) => s.contains(p),
            LockSet::Top => true,
        }
    }

    pub fn as_finite(&self) -> Option<&BTreeSet<LockPath>> {
        match self {
            LockSet::Finite(s) => Some(s),
            LockSet::Top => None,
        }
    }

    /// The finite contents; `Top` must have been ruled out by the caller.
    pub fn finite(&self) -> &BTreeSet<LockPath> {
        self.as_finite().expect("lock set is Top")
    }

    pub fn union(&self, other: &LockSet) -> LockSet {
        match (self, other) {
            (LockSet::Finite(a), LockSet::Finite(b)) => LockSet::Finite(a.union(b).cloned().collect()),
            _ => LockSet::Top,
        }
    }

    pub fn intersect(&self, other: &LockSet) -> LockSet {
        match (self, other) {
            (LockSet::Finite(a), LockSet::Finite(b)) => LockSet::Finite(a.intersection(b).cloned().collect()),
            (LockSet::Top, x) | (x, LockSet::Top) => x.clone(),
        }
    }

    /// `x - Top` is empty and `Top - S` stays `Top` for finite `S`.
    pub fn minus(&self, other: &LockSet) -> LockSet {
        match (self, other) {
            (_, LockSet::Top) => LockSet::empty(),
            (LockSet::Top, _) => LockSet::Top,
            (LockSet::Finite(a), LockSet::Finite(b)) => LockSet::Finite(a.difference(b).cloned().collect()),
        }
    }

    pub fn is_subset(&self, other: &LockSet) -> bool {
        match (self, other) {
            (_, LockSet::Top) => true,
            (LockSet::Top, _) => false,
            (LockSet::Finite(a), LockSet::Finite(b)) => a.is_subset(b),
        }
    }
}

impl FromIterator<LockPath> for LockSet {
    fn from_iter<I: IntoIterator<Item = LockPath>>(iter: I) -> Self {
        LockSet::Finite(iter.into_iter().collect())
    }
}

impl fmt::Display for LockSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LockSet::Top => f.write_str("TOP"),
            LockSet::Finite(s) => {
                let parts: Vec<String> = s.iter().map(ToString::to_string).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
        }
    }
}

impl Serialize for LockSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            LockSet::Top => serializer.serialize_str("TOP"),
            LockSet::Finite(s) => {
                let mut seq = serializer.serialize_seq(Some(s.len()))?;
                for p in s {
                    seq.serialize_element(&p.to_string())?;
                }
                seq.end()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("argument `{arg}` for parameter `{param}` is not a place")]
pub struct UnaliasableArgument {
    pub param: String,
    pub arg: String,
}

/// Rewrites a callee path `x_i.p'` to `canonical(e_i).p'`.
pub fn alias(p: &LockPath, params: &[String], args: &[Expr]) -> Result<LockPath, UnaliasableArgument> {
    let Some(i) = params.iter().position(|x| x == p.root()) else {
        return Ok(p.clone());
    };
    let arg = &args[i];
    match LockPath::of_place(arg) {
        Some(base) => Ok(p.rebase(1, &base)),
        None => Err(UnaliasableArgument {
            param: params[i].clone(),
            arg: crate::frontend::print_expr(arg),
        }),
    }
}

/// What a caller needs to know about a callee.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contract {
    pub params: Vec<String>,
    pub mels: LockSet,
    pub mrls: LockSet,
}

/// Shared state threaded through the per-statement transfer functions.
pub struct Context<'c> {
    pub contracts: &'c BTreeMap<String, Contract>,
    pub globals: &'c BTreeSet<String>,
    pub diagnostics: &'c mut BTreeSet<Diagnostic>,
}

impl Context<'_> {
    /// Set-lifted alias. Paths rooted at callee-private names, and paths
    /// whose argument is not a place, are dropped with a warning.
    fn alias_set(&mut self, set: &LockSet, callee: &str, args: &[Expr], caller: &str, line: u32) -> LockSet {
        let Some(contract) = self.contracts.get(callee) else {
            return LockSet::empty();
        };
        let LockSet::Finite(paths) = set else {
            return LockSet::Top;
        };
        let mut out = BTreeSet::new();
        for p in paths {
            if !contract.params.iter().any(|x| x == p.root()) && !self.globals.contains(p.root()) {
                self.diagnostics.insert(Diagnostic::warning(
                    Some(caller),
                    line,
                    format!("lock `{p}` of `{callee}` is not visible to its callers; dropped"),
                ));
                continue;
            }
            match alias(p, &contract.params, args) {
                Ok(q) => {
                    out.insert(q);
                }
                Err(e) => {
                    self.diagnostics.insert(Diagnostic::warning(
                        Some(caller),
                        line,
                        format!("{e}; lock `{p}` of `{callee}` dropped"),
                    ));
                }
            }
        }
        LockSet::Finite(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GenKill {
    pub gen_l: LockSet,
    pub kill_l: LockSet,
    pub gen_a: LockSet,
    pub kill_a: LockSet,
}

impl GenKill {
    /// Effect of `self` followed by `next`.
    pub fn then(&self, next: &GenKill) -> GenKill {
        GenKill {
            gen_a: self.gen_a.minus(&next.kill_a).union(&next.gen_a),
            kill_a: self.kill_a.union(&next.kill_a),
            gen_l: next.gen_l.minus(&self.kill_l).union(&self.gen_l),
            kill_l: self.kill_l.union(&next.kill_l),
        }
    }

    pub fn forward(&self, input: &LockSet) -> LockSet {
        input.minus(&self.kill_a).union(&self.gen_a)
    }

    pub fn backward(&self, output: &LockSet) -> LockSet {
        output.minus(&self.kill_l).union(&self.gen_l)
    }
}

/// One lock-relevant call inside a statement, in evaluation order.
#[derive(Debug, Clone)]
pub struct Event<'s> {
    /// Set for user-defined callees.
    pub call: Option<(&'s str, &'s [Expr])>,
    pub effect: GenKill,
}

pub fn statement_events<'s>(s: &'s Stmt, caller: &str, ctx: &mut Context<'_>) -> Vec<Event<'s>> {
    let mut calls = Vec::new();
    for e in s.own_exprs() {
        e.for_each_call(&mut |name, args| calls.push((name, args)));
    }
    let mut out = Vec::new();
    for (name, args) in calls {
        let lock_arg = || args.first().and_then(LockPath::of_place);
        match name {
            PTHREAD_MUTEX_LOCK => {
                let Some(p) = lock_arg() else { continue };
                let set = LockSet::singleton(p);
                out.push(Event {
                    call: None,
                    effect: GenKill {
                        kill_l: set.clone(),
                        gen_a: set,
                        ..GenKill::default()
                    },
                });
            }
            PTHREAD_MUTEX_UNLOCK => {
                let Some(p) = lock_arg() else { continue };
                let set = LockSet::singleton(p);
                out.push(Event {
                    call: None,
                    effect: GenKill {
                        gen_l: set.clone(),
                        kill_a: set,
                        ..GenKill::default()
                    },
                });
            }
            _ => {
                let Some(contract) = ctx.contracts.get(name) else { continue };
                let (mels, mrls) = (contract.mels.clone(), contract.mrls.clone());
                let entry = ctx.alias_set(&mels, name, args, caller, s.line);
                let ret = ctx.alias_set(&mrls, name, args, caller, s.line);
                out.push(Event {
                    call: Some((name, args)),
                    effect: GenKill {
                        gen_l: entry.clone(),
                        kill_a: entry,
                        kill_l: ret.clone(),
                        gen_a: ret,
                    },
                });
            }
        }
    }
    out
}

/// Gen/kill sets of a whole statement: its calls composed in order.
pub fn transfer_gen_kill(s: &Stmt, caller: &str, ctx: &mut Context<'_>) -> GenKill {
    statement_events(s, caller, ctx)
        .iter()
        .fold(GenKill::default(), |acc, e| acc.then(&e.effect))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionFlowFacts {
    pub name: String,
    pub params: Vec<String>,
    pub mels: LockSet,
    pub mrls: LockSet,
    /// Indexed by `NodeId.0`; unreachable nodes hold the empty set.
    pub in_l: Vec<LockSet>,
    pub out_l: Vec<LockSet>,
    pub in_a: Vec<LockSet>,
    pub out_a: Vec<LockSet>,
}

impl FunctionFlowFacts {
    pub fn contract(&self) -> Contract {
        Contract {
            params: self.params.clone(),
            mels: self.mels.clone(),
            mrls: self.mrls.clone(),
        }
    }
}

/// Solves LGA then AGA on one function against the given callee contracts.
pub fn analyze_function(g: &FlowGraph<'_>, ctx: &mut Context<'_>) -> FunctionFlowFacts {
    let f = g.function;
    let n = g.capacity();
    let mut effects = vec![GenKill::default(); n];
    for (node, s) in g.stmt_nodes() {
        effects[node.0] = transfer_gen_kill(s, &f.name, ctx);
    }

    // LGA: backward may.
    let mut in_l = vec![LockSet::empty(); n];
    let mut out_l = vec![LockSet::empty(); n];
    let mut work: VecDeque<NodeId> = g.nodes().collect::<Vec<_>>().into_iter().rev().collect();
    let mut queued = vec![false; n];
    for x in &work {
        queued[x.0] = true;
    }
    while let Some(x) = work.pop_front() {
        queued[x.0] = false;
        let out = if x == NodeId::RET {
            LockSet::empty()
        } else {
            g.succ(x).iter().fold(LockSet::empty(), |acc, s| acc.union(&in_l[s.0]))
        };
        let inn = effects[x.0].backward(&out);
        out_l[x.0] = out;
        if inn != in_l[x.0] {
            in_l[x.0] = inn;
            for p in g.pred(x) {
                if !queued[p.0] {
                    queued[p.0] = true;
                    work.push_back(*p);
                }
            }
        }
    }
    let mels = in_l[NodeId::ENTRY.0].clone();

    // AGA: forward must, seeded with the MELS.
    let mut in_a = vec![LockSet::empty(); n];
    let mut out_a: Vec<LockSet> = (0..n)
        .map(|i| if g.is_reachable(NodeId(i)) { LockSet::Top } else { LockSet::empty() })
        .collect();
    let mut work: VecDeque<NodeId> = g.nodes().collect();
    let mut queued = vec![false; n];
    for x in &work {
        queued[x.0] = true;
    }
    while let Some(x) = work.pop_front() {
        queued[x.0] = false;
        let inn = if x == NodeId::ENTRY {
            mels.clone()
        } else {
            g.pred(x).iter().fold(LockSet::Top, |acc, p| acc.intersect(&out_a[p.0]))
        };
        let out = effects[x.0].forward(&inn);
        in_a[x.0] = inn;
        if out != out_a[x.0] {
            out_a[x.0] = out;
            for s in g.succ(x) {
                if !queued[s.0] {
                    queued[s.0] = true;
                    work.push_back(*s);
                }
            }
        }
    }
    let mrls = out_a[NodeId::RET.0].clone();

    FunctionFlowFacts {
        name: f.name.clone(),
        params: f.param_names(),
        mels,
        mrls,
        in_l,
        out_l,
        in_a,
        out_a,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FlowError {
    #[error("no fixpoint for {{{}}} within {budget} iterations (unbounded lock paths?)", functions.join(", "))]
    IterationBudgetExceeded { functions: Vec<String>, budget: usize },
}

#[derive(Debug, Clone)]
pub struct SccOutcome {
    pub facts: BTreeMap<String, FunctionFlowFacts>,
    /// Full passes over the SCC, including the confirming pass for
    /// recursive components.
    pub passes: usize,
    /// `(MELS, MRLS)` of every member after each pass.
    pub trace: Vec<BTreeMap<String, (LockSet, LockSet)>>,
}

/// Iterates a merged call-graph node to its fixpoint. `ctx.contracts` must
/// hold the callee contracts of earlier components; members' contracts are
/// written back into it as they evolve.
pub fn analyze_scc(
    members: &[&FlowGraph<'_>],
    recursive: bool,
    contracts: &mut BTreeMap<String, Contract>,
    globals: &BTreeSet<String>,
    budget: usize,
    diagnostics: &mut BTreeSet<Diagnostic>,
) -> Result<SccOutcome, FlowError> {
    for g in members {
        contracts.insert(
            g.function.name.clone(),
            Contract {
                params: g.function.param_names(),
                mels: LockSet::empty(),
                mrls: LockSet::Top,
            },
        );
    }
    let mut facts = BTreeMap::new();
    let mut trace = Vec::new();
    let mut passes = 0;
    loop {
        if passes == budget {
            return Err(FlowError::IterationBudgetExceeded {
                functions: members.iter().map(|g| g.function.name.clone()).collect(),
                budget,
            });
        }
        passes += 1;
        let mut changed = false;
        for g in members {
            let mut ctx = Context {
                contracts,
                globals,
                diagnostics,
            };
            let result = analyze_function(g, &mut ctx);
            let contract = result.contract();
            if contracts.get(&result.name) != Some(&contract) {
                changed = true;
                contracts.insert(result.name.clone(), contract);
            }
            facts.insert(result.name.clone(), result);
        }
        trace.push(
            facts
                .values()
                .map(|f: &FunctionFlowFacts| (f.name.clone(), (f.mels.clone(), f.mrls.clone())))
                .collect(),
        );
        // Without in-component callees one pass is exact.
        if recursive && changed {
            continue;
        }
        // A must-result still at Top means no path produced a finite value
        // (e.g. unconditional self-recursion). Settle it on the empty set.
        let mut demoted = false;
        for g in members {
            let f = &facts[&g.function.name];
            if f.mrls.is_top() {
                let c = contracts.get_mut(&f.name).expect("member contract");
                c.mrls = LockSet::empty();
                demoted = true;
                diagnostics.insert(Diagnostic::warning(
                    Some(&f.name),
                    g.function.line_span.0,
                    "return lock set has no finite fixpoint; using the empty set",
                ));
            }
        }
        if !demoted {
            break;
        }
    }
    Ok(SccOutcome { facts, passes, trace })
}

/// Flow facts for a whole program.
#[derive(Debug, Clone)]
pub struct ProgramFlow<'a> {
    pub graphs: BTreeMap<String, FlowGraph<'a>>,
    pub facts: BTreeMap<String, FunctionFlowFacts>,
    /// Passes needed per merged call-graph node, by SCC index.
    pub passes: Vec<usize>,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn analyze_program<'a>(p: &'a Program, cg: &CallGraph, budget: usize) -> Result<ProgramFlow<'a>, FlowError> {
    let graphs: BTreeMap<String, FlowGraph<'a>> = p.functions().map(|f| (f.name.clone(), build_cfg(f))).collect();
    let globals: BTreeSet<String> = p.globals().map(|g| g.name.clone()).collect();
    let mut contracts = BTreeMap::new();
    let mut diagnostics = BTreeSet::new();
    let mut facts = BTreeMap::new();
    let mut passes = vec![0; cg.merged_nodes.len()];
    for &scc in &cg.post_order {
        let members: Vec<&FlowGraph<'a>> = cg.merged_nodes[scc].iter().map(|f| &graphs[f]).collect();
        let outcome = analyze_scc(
            &members,
            cg.is_recursive(scc),
            &mut contracts,
            &globals,
            budget,
            &mut diagnostics,
        )?;
        passes[scc] = outcome.passes;
        facts.extend(outcome.facts);
    }
    Ok(ProgramFlow {
        graphs,
        facts,
        passes,
        diagnostics: diagnostics.into_iter().collect(),
    })
}

impl ProgramFlow<'_> {
    /// Per-function In/Out sets keyed by source line, for `--dump-flow`.
    pub fn to_json(&self) -> Value {
        let mut out = Map::new();
        for (name, f) in &self.facts {
            let g = &self.graphs[name];
            let mut lines: BTreeMap<u32, Vec<Value>> = BTreeMap::new();
            for node in g.nodes() {
                let label = match node {
                    NodeId::ENTRY => "entry".to_owned(),
                    NodeId::RET => "ret".to_owned(),
                    n => format!("s{}", n.stmt_index().expect("stmt")),
                };
                let i = node.0;
                lines.entry(g.line(node)).or_default().push(json!({
                    "node": label,
                    "in_l": f.in_l[i],
                    "out_l": f.out_l[i],
                    "in_a": f.in_a[i],
                    "out_a": f.out_a[i],
                }));
            }
            let lines: Map<String, Value> = lines.into_iter().map(|(l, v)| (l.to_string(), Value::Array(v))).collect();
            out.insert(
                name.clone(),
                json!({ "mels": f.mels, "mrls": f.mrls, "lines": lines }),
            );
        }
        Value::Object(out)
    }
}
