//! Ownership check for guard variables in the guarded dialect.
//!
//! A guard is usable only if it is owned on every path reaching the use.
//! Passing a guard to a call, returning it, dropping it, or copying it into
//! another variable moves it; `(*g).f` borrows it. Assigning `acquire()` or a
//! call result to it makes it owned again.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::cfg::{build_cfg, FlowGraph, NodeId};
use crate::frontend::{Expr, FunctionDef, Program, StmtKind, Type};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub enum GuardErrorKind {
    /// Used before any assignment.
    UseOfUninit,
    /// Used after being moved on every incoming path.
    UseAfterMove,
    /// Owned on some incoming paths and not on others.
    ConflictingPaths,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub struct GuardError {
    pub function: String,
    pub line: u32,
    pub kind: GuardErrorKind,
    pub guard: String,
}

impl fmt::Display for GuardError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = &self.guard;
        match self.kind {
            GuardErrorKind::UseOfUninit => write!(f, "{}: error: use of uninitialized guard `{g}`", self.line)?,
            GuardErrorKind::UseAfterMove => write!(f, "{}: error: use of moved guard `{g}`", self.line)?,
            GuardErrorKind::ConflictingPaths => {
                write!(f, "{}: error: guard `{g}` is owned on some paths but not others", self.line)?
            }
        }
        write!(f, " (in `{}`)", self.function)
    }
}

/// Abstract state of one guard variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardState {
    Uninit,
    Owned,
    Moved,
    Conflict,
}

impl GuardState {
    fn join(self, other: GuardState) -> GuardState {
        if self == other {
            self
        } else {
            GuardState::Conflict
        }
    }
}

/// What a statement does to a guard, in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardEvent<'s> {
    Borrow(&'s str),
    Move(&'s str),
    Define(&'s str),
}

/// Guard events of one statement (not its nested blocks).
pub fn statement_events<'s>(kind: &'s StmtKind, guards: &BTreeSet<&str>) -> Vec<GuardEvent<'s>> {
    let mut ev = Vec::new();
    match kind {
        StmtKind::Decl { init, .. } => {
            if let Some(e) = init {
                rvalue(e, guards, &mut ev);
            }
        }
        StmtKind::Assign { place, value, .. } => {
            rvalue(value, guards, &mut ev);
            target(place, guards, &mut ev);
        }
        StmtKind::Expr(e) | StmtKind::If { cond: e, .. } | StmtKind::While { cond: e, .. } => rvalue(e, guards, &mut ev),
        StmtKind::Return(Some(e)) => rvalue(e, guards, &mut ev),
        StmtKind::Drop(g) => {
            if guards.contains(g.as_str()) {
                ev.push(GuardEvent::Move(g));
            }
        }
        StmtKind::Return(None) | StmtKind::Block(_) => {}
    }
    ev
}

fn rvalue<'s>(e: &'s Expr, guards: &BTreeSet<&str>, ev: &mut Vec<GuardEvent<'s>>) {
    match e {
        Expr::Var(v) if guards.contains(v.as_str()) => ev.push(GuardEvent::Move(v)),
        Expr::GuardDeref { guard, .. } if guards.contains(guard.as_str()) => ev.push(GuardEvent::Borrow(guard)),
        Expr::Field { base, .. } => place(base, guards, ev),
        Expr::AddrOf { place: p, .. } => place(p, guards, ev),
        Expr::Deref(inner) => rvalue(inner, guards, ev),
        Expr::Acquire(lock) | Expr::GetMut { lock, .. } => place(lock, guards, ev),
        Expr::Binary { lhs, rhs, .. } => {
            rvalue(lhs, guards, ev);
            rvalue(rhs, guards, ev);
        }
        Expr::Call { args, .. } => args.iter().for_each(|a| rvalue(a, guards, ev)),
        Expr::Tuple(es) => es.iter().for_each(|x| rvalue(x, guards, ev)),
        _ => {}
    }
}

/// A place that is named but not moved out of.
fn place<'s>(e: &'s Expr, guards: &BTreeSet<&str>, ev: &mut Vec<GuardEvent<'s>>) {
    match e {
        Expr::Var(v) if guards.contains(v.as_str()) => ev.push(GuardEvent::Borrow(v)),
        Expr::Var(_) => {}
        other => rvalue(other, guards, ev),
    }
}

fn target<'s>(e: &'s Expr, guards: &BTreeSet<&str>, ev: &mut Vec<GuardEvent<'s>>) {
    match e {
        Expr::Var(v) if guards.contains(v.as_str()) => ev.push(GuardEvent::Define(v)),
        Expr::Var(_) | Expr::Wildcard => {}
        Expr::Tuple(es) => es.iter().for_each(|x| target(x, guards, ev)),
        other => place(other, guards, ev),
    }
}

/// Guard variables of `f`: guard-typed parameters and locals.
pub fn guard_variables(f: &FunctionDef) -> (BTreeSet<&str>, BTreeSet<&str>) {
    let params: BTreeSet<&str> = f.params.iter().filter(|p| p.ty.is_guard()).map(|p| p.name.as_str()).collect();
    let mut all = params.clone();
    f.body.walk(&mut |s| {
        if let StmtKind::Decl { ty: Type::Guard(_), name, .. } = &s.kind {
            all.insert(name.as_str());
        }
    });
    (params, all)
}

type State<'s> = BTreeMap<&'s str, GuardState>;

fn join_into<'s>(acc: &mut Option<State<'s>>, s: &State<'s>) {
    match acc {
        None => *acc = Some(s.clone()),
        Some(a) => {
            for (k, v) in a.iter_mut() {
                *v = v.join(s[k]);
            }
        }
    }
}

fn apply<'s>(state: &mut State<'s>, ev: &[GuardEvent<'s>], mut report: impl FnMut(&'s str, GuardErrorKind)) {
    for e in ev {
        match *e {
            GuardEvent::Define(g) => {
                state.insert(g, GuardState::Owned);
            }
            GuardEvent::Borrow(g) | GuardEvent::Move(g) => {
                match state[g] {
                    GuardState::Owned => {}
                    GuardState::Uninit => report(g, GuardErrorKind::UseOfUninit),
                    GuardState::Moved => report(g, GuardErrorKind::UseAfterMove),
                    GuardState::Conflict => report(g, GuardErrorKind::ConflictingPaths),
                }
                if matches!(e, GuardEvent::Move(_)) {
                    state.insert(g, GuardState::Moved);
                }
            }
        }
    }
}

/// Checks one function; errors are sorted and deduplicated.
pub fn check_function(f: &FunctionDef) -> Vec<GuardError> {
    let (params, guards) = guard_variables(f);
    if guards.is_empty() {
        return Vec::new();
    }
    let g = build_cfg(f);
    let events: Vec<Vec<GuardEvent>> = (0..g.capacity())
        .map(|i| g.stmt(NodeId(i)).map_or_else(Vec::new, |s| statement_events(&s.kind, &guards)))
        .collect();
    let entry: State = guards
        .iter()
        .map(|v| (*v, if params.contains(v) { GuardState::Owned } else { GuardState::Uninit }))
        .collect();
    let out = fixpoint(&g, &events, entry.clone());
    let mut errors = BTreeSet::new();
    for n in g.nodes() {
        let Some(mut state) = in_state(&g, &out, n, &entry) else { continue };
        apply(&mut state, &events[n.0], |guard, kind| {
            errors.insert(GuardError {
                function: f.name.clone(),
                line: g.line(n),
                kind,
                guard: guard.to_owned(),
            });
        });
    }
    errors.into_iter().collect()
}

fn in_state<'s>(g: &FlowGraph<'_>, out: &[Option<State<'s>>], n: NodeId, entry: &State<'s>) -> Option<State<'s>> {
    if n == NodeId::ENTRY {
        return Some(entry.clone());
    }
    let mut acc = None;
    for p in g.pred(n) {
        if let Some(s) = &out[p.0] {
            join_into(&mut acc, s);
        }
    }
    acc
}

fn fixpoint<'s>(g: &FlowGraph<'_>, events: &[Vec<GuardEvent<'s>>], entry: State<'s>) -> Vec<Option<State<'s>>> {
    let mut out: Vec<Option<State>> = vec![None; g.capacity()];
    let mut work: BTreeSet<NodeId> = g.nodes().collect();
    while let Some(n) = work.pop_first() {
        let Some(mut state) = in_state(g, &out, n, &entry) else { continue };
        apply(&mut state, &events[n.0], |_, _| {});
        if out[n.0].as_ref() != Some(&state) {
            out[n.0] = Some(state);
            work.extend(g.succ(n).iter().copied());
        }
    }
    out
}

/// Checks every function of a guarded program.
pub fn check_program(p: &Program) -> Vec<GuardError> {
    p.functions().flat_map(check_function).collect()
}
