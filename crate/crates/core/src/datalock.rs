//! Which lock protects which datum.
//!
//! Every access to a global or a struct field is recorded together with the
//! locks held there. The lock held most often is the candidate; it protects
//! the datum if some write happens under it and every access without it is
//! in code that cannot run concurrently.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::callgraph::CallGraph;
use crate::cfg::NodeId;
use crate::flow::ProgramFlow;
use crate::frontend::{AssignOp, Expr, FnEnv, LockPath, Program, ProgramEnv, Stmt, StmtKind, Type, PTHREAD_MUTEX_INIT};
use crate::propagation::FunctionFlowSummary;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    Global(String),
    Field { strukt: String, field: String },
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Global(g) => f.write_str(g),
            Target::Field { strukt, field } => write!(f, "struct {strukt}.{field}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AccessKind {
    Read,
    Write,
}

/// One syntactic access, before lock information is attached.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RawAccess {
    pub target: Target,
    /// For fields, the canonical path of the struct value accessed.
    pub base: Option<LockPath>,
    pub kind: AccessKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessRecord {
    pub function: String,
    pub line: u32,
    pub node: NodeId,
    pub held: BTreeSet<LockPath>,
    pub target: Target,
    pub base: Option<LockPath>,
    pub kind: AccessKind,
}

struct Visitor<'a, 'e> {
    env: &'a FnEnv<'e>,
    out: Vec<RawAccess>,
}

impl Visitor<'_, '_> {
    fn record(&mut self, target: Target, base: Option<LockPath>, kinds: &[AccessKind]) {
        for &kind in kinds {
            self.out.push(RawAccess {
                target: target.clone(),
                base: base.clone(),
                kind,
            });
        }
    }

    fn rvalue(&mut self, e: &Expr) {
        match e {
            Expr::IntLit(_) | Expr::Wildcard => {}
            Expr::Var(_) | Expr::Field { .. } | Expr::GuardDeref { .. } | Expr::GetMut { .. } => {
                self.access(e, &[AccessKind::Read])
            }
            Expr::AddrOf { place, .. } => self.storage(place),
            Expr::Deref(inner) => self.rvalue(inner),
            Expr::Binary { lhs, rhs, .. } => {
                self.rvalue(lhs);
                self.rvalue(rhs);
            }
            Expr::Call { args, .. } => args.iter().for_each(|a| self.rvalue(a)),
            Expr::Acquire(lock) => self.storage(lock),
            Expr::Tuple(es) => es.iter().for_each(|x| self.rvalue(x)),
        }
    }

    /// `e` itself is read and/or written.
    fn access(&mut self, e: &Expr, kinds: &[AccessKind]) {
        match e {
            Expr::Var(x) => {
                if self.env.is_global(x) && !self.env.var_type(x).is_some_and(Type::is_lock) {
                    self.record(Target::Global(x.clone()), None, kinds);
                }
            }
            Expr::Field { base, field, arrow } => {
                if let Some(def) = self.env.base_struct(base, *arrow) {
                    if !def.field(field).is_some_and(|f| f.ty.is_lock()) {
                        let target = Target::Field {
                            strukt: def.name.clone(),
                            field: field.clone(),
                        };
                        self.record(target, LockPath::of_place(base), kinds);
                    }
                }
                if *arrow {
                    self.rvalue(base);
                } else {
                    self.storage(base);
                }
            }
            Expr::Deref(inner) => self.rvalue(inner),
            Expr::GuardDeref { guard, field } => {
                if let Some(Type::Guard(path)) = self.env.var_type(guard) {
                    let path = path.clone();
                    self.payload_access(&path, field, kinds);
                }
            }
            Expr::GetMut { lock, field } => {
                if let Some(path) = LockPath::of_place(lock) {
                    self.payload_access(&path, field, kinds);
                }
                self.storage(lock);
            }
            Expr::Tuple(es) => es.iter().for_each(|x| self.access(x, kinds)),
            Expr::Wildcard => {}
            other => self.rvalue(other),
        }
    }

    /// Guarded dialect: `field` of the payload owned by lock `path` stands for
    /// the global or sibling field it was moved out of.
    fn payload_access(&mut self, path: &LockPath, field: &str, kinds: &[AccessKind]) {
        match path.parent() {
            None => self.record(Target::Global(field.to_owned()), None, kinds),
            Some(parent) => {
                let strukt = match self.env.path_type(&parent) {
                    Some(Type::Struct(s)) => Some(s),
                    Some(Type::Ptr(inner)) => inner.struct_name().map(str::to_owned),
                    _ => None,
                };
                if let Some(strukt) = strukt {
                    let target = Target::Field {
                        strukt,
                        field: field.to_owned(),
                    };
                    self.record(target, Some(parent), kinds);
                }
            }
        }
    }

    /// The storage of `place` is used (address taken, field selected) but not
    /// itself read; only pointers on the way are read.
    fn storage(&mut self, place: &Expr) {
        match place {
            Expr::Var(_) => {}
            Expr::Field { base, arrow, .. } => {
                if *arrow {
                    self.rvalue(base);
                } else {
                    self.storage(base);
                }
            }
            Expr::Deref(inner) => self.rvalue(inner),
            other => self.rvalue(other),
        }
    }
}

/// Accesses performed by the statement's own expressions (not nested blocks).
pub fn statement_accesses(env: &FnEnv<'_>, s: &Stmt) -> Vec<RawAccess> {
    let mut v = Visitor { env, out: Vec::new() };
    match &s.kind {
        StmtKind::Assign { place, op, value } => {
            v.rvalue(value);
            let kinds: &[AccessKind] = match op {
                AssignOp::Set => &[AccessKind::Write],
                _ => &[AccessKind::Read, AccessKind::Write],
            };
            v.access(place, kinds);
        }
        _ => {
            for e in s.own_exprs() {
                v.rvalue(e);
            }
        }
    }
    v.out
}

/// `(function, line, access)` for every statement of every function, in
/// either dialect. Used to compare programs before and after rewriting.
pub fn syntactic_accesses(p: &Program, env: &ProgramEnv) -> Vec<(String, u32, RawAccess)> {
    let mut out = Vec::new();
    for f in p.functions() {
        let fenv = FnEnv::of(env, f);
        f.body.walk(&mut |s| {
            for a in statement_accesses(&fenv, s) {
                out.push((f.name.clone(), s.line, a));
            }
        });
    }
    out.sort();
    out
}

pub fn collect_accesses(
    p: &Program,
    env: &ProgramEnv,
    flow: &ProgramFlow<'_>,
    summaries: &BTreeMap<String, FunctionFlowSummary>,
) -> Vec<AccessRecord> {
    let mut out = Vec::new();
    for f in p.functions() {
        let fenv = FnEnv::of(env, f);
        let g = &flow.graphs[&f.name];
        let facts = &flow.facts[&f.name];
        let pls = &summaries[&f.name].pls;
        for (node, s) in g.stmt_nodes() {
            let held: BTreeSet<LockPath> = facts.in_a[node.0].finite().union(pls).cloned().collect();
            for a in statement_accesses(&fenv, s) {
                out.push(AccessRecord {
                    function: f.name.clone(),
                    line: s.line,
                    node,
                    held: held.clone(),
                    target: a.target,
                    base: a.base,
                    kind: a.kind,
                });
            }
        }
    }
    out
}

/// A global lock (name) or a sibling lock field (field name).
pub type Candidate = String;

/// Locks that may serve as a candidate for `target`, as full paths for one access.
fn eligible_paths(target: &Target, base: Option<&LockPath>, env: &ProgramEnv) -> Vec<(Candidate, LockPath)> {
    match target {
        Target::Global(_) => env
            .globals
            .iter()
            .filter(|(_, ty)| ty.is_lock())
            .map(|(name, _)| (name.clone(), LockPath::root_only(name.clone())))
            .collect(),
        Target::Field { strukt, .. } => {
            let (Some(base), Some(def)) = (base, env.structs.get(strukt)) else {
                return Vec::new();
            };
            def.fields
                .iter()
                .filter(|f| f.ty.is_lock())
                .map(|f| (f.name.clone(), base.child(f.name.clone())))
                .collect()
        }
    }
}

fn holds(a: &AccessRecord, candidate: &str) -> bool {
    match &a.target {
        Target::Global(_) => a.held.contains(&LockPath::root_only(candidate)),
        Target::Field { .. } => a.base.as_ref().is_some_and(|b| a.held.contains(&b.child(candidate))),
    }
}

/// Most frequently held eligible lock; ties go to the least name.
pub fn candidate_lock(target: &Target, accesses: &[&AccessRecord], env: &ProgramEnv) -> Option<Candidate> {
    let mut counts: BTreeMap<Candidate, usize> = BTreeMap::new();
    for a in accesses {
        for (cand, path) in eligible_paths(target, a.base.as_ref(), env) {
            if a.held.contains(&path) {
                *counts.entry(cand).or_default() += 1;
            }
        }
    }
    // BTreeMap iterates in name order, so the first maximum is the least name.
    let best = counts.values().copied().max()?;
    counts.into_iter().find(|(_, c)| *c == best).map(|(k, _)| k)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtectionVerdict {
    pub target: Target,
    pub candidate: Option<Candidate>,
    pub protected: bool,
    pub unsafe_accesses: Vec<AccessRecord>,
}

/// Functions whose statements may run concurrently with other threads.
pub fn concurrent_functions(cg: &CallGraph) -> BTreeSet<String> {
    cg.reachable_from(cg.thread_entries.iter().map(String::as_str))
        .into_iter()
        .map(str::to_owned)
        .collect()
}

/// Lock paths passed to `pthread_mutex_init` in each function.
pub fn initialized_locks(p: &Program) -> BTreeMap<String, BTreeSet<LockPath>> {
    let mut out = BTreeMap::new();
    for f in p.functions() {
        let mut inits = BTreeSet::new();
        f.body.walk(&mut |s| {
            for e in s.own_exprs() {
                e.for_each_call(&mut |name, args| {
                    if name == PTHREAD_MUTEX_INIT {
                        if let Some(path) = args.first().and_then(LockPath::of_place) {
                            inits.insert(path);
                        }
                    }
                });
            }
        });
        out.insert(f.name.clone(), inits);
    }
    out
}

pub fn judge_protection(
    target: &Target,
    candidate: Option<Candidate>,
    accesses: &[&AccessRecord],
    concurrent: &BTreeSet<String>,
    inits: &BTreeMap<String, BTreeSet<LockPath>>,
) -> ProtectionVerdict {
    let Some(cand) = candidate else {
        return ProtectionVerdict {
            target: target.clone(),
            candidate: None,
            protected: false,
            unsafe_accesses: accesses.iter().map(|a| (*a).clone()).collect(),
        };
    };
    let (safe, unsafe_): (Vec<&AccessRecord>, Vec<&AccessRecord>) = accesses.iter().partition(|a| holds(a, &cand));
    let non_concurrent = |a: &AccessRecord| {
        if !concurrent.contains(&a.function) {
            return true;
        }
        match (&a.target, &a.base) {
            (Target::Field { .. }, Some(base)) => inits
                .get(&a.function)
                .is_some_and(|s| s.contains(&base.child(cand.clone()))),
            _ => false,
        }
    };
    let protected = safe.iter().any(|a| a.kind == AccessKind::Write) && unsafe_.iter().all(|a| non_concurrent(a));
    ProtectionVerdict {
        target: target.clone(),
        candidate: Some(cand),
        protected,
        unsafe_accesses: unsafe_.into_iter().cloned().collect(),
    }
}

/// Verdicts for every accessed global and struct field, in target order.
pub fn identify(p: &Program, env: &ProgramEnv, cg: &CallGraph, accesses: &[AccessRecord]) -> Vec<ProtectionVerdict> {
    let mut by_target: BTreeMap<&Target, Vec<&AccessRecord>> = BTreeMap::new();
    for a in accesses {
        by_target.entry(&a.target).or_default().push(a);
    }
    let concurrent = concurrent_functions(cg);
    let inits = initialized_locks(p);
    by_target
        .into_iter()
        .map(|(t, accs)| {
            let cand = candidate_lock(t, &accs, env);
            judge_protection(t, cand, &accs, &concurrent, &inits)
        })
        .collect()
}
