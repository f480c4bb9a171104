//! Brute-force lock sets by enumerating every entry-to-exit path of a
//! loop-free, call-free function directly over its syntax tree.

use std::collections::{BTreeMap, BTreeSet};

use lockshift_core::callgraph::build_call_graph;
use lockshift_core::cfg::{FlowGraph, NodeId};
use lockshift_core::flow::{analyze_program, DEFAULT_ITERATION_BUDGET};
use lockshift_core::frontend::{
    Expr, FunctionDef, LockPath, Program, Stmt, StmtKind, PTHREAD_MUTEX_LOCK, PTHREAD_MUTEX_UNLOCK,
};

pub const MAX_NODES: usize = 12;

type Set = BTreeSet<LockPath>;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeSets {
    pub in_l: Set,
    pub out_l: Set,
    pub in_a: Set,
    pub out_a: Set,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleFacts {
    pub mels: Set,
    pub mrls: Set,
    /// Keyed by node index; only nodes on some path appear.
    pub nodes: BTreeMap<usize, NodeSets>,
}

enum Ev {
    Lock(LockPath),
    Unlock(LockPath),
}

fn event(s: &Stmt) -> Option<Ev> {
    let StmtKind::Expr(Expr::Call { name, args }) = &s.kind else { return None };
    let p = LockPath::of_place(args.first()?)?;
    match name.as_str() {
        PTHREAD_MUTEX_LOCK => Some(Ev::Lock(p)),
        PTHREAD_MUTEX_UNLOCK => Some(Ev::Unlock(p)),
        _ => None,
    }
}

fn paths<'a>(stmts: &'a [Stmt]) -> Vec<(Vec<&'a Stmt>, bool)> {
    let mut acc: Vec<(Vec<&Stmt>, bool)> = vec![(vec![], false)];
    for s in stmts {
        let tails: Vec<(Vec<&Stmt>, bool)> = match &s.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                let mut t = paths(&then_block.stmts);
                t.extend(match else_block {
                    Some(b) => paths(&b.stmts),
                    None => vec![(vec![], false)],
                });
                t.into_iter()
                    .map(|(mut p, r)| {
                        p.insert(0, s);
                        (p, r)
                    })
                    .collect()
            }
            StmtKind::Block(b) => paths(&b.stmts),
            StmtKind::Return(_) => vec![(vec![s], true)],
            StmtKind::While { .. } => panic!("oracle handles loop-free functions only"),
            _ => vec![(vec![s], false)],
        };
        let mut next = Vec::new();
        for (prefix, done) in acc {
            if done {
                next.push((prefix, true));
                continue;
            }
            for (tail, r) in &tails {
                let mut p = prefix.clone();
                p.extend(tail.iter().copied());
                next.push((p, *r));
            }
        }
        acc = next;
    }
    acc
}

/// Locks released in `suffix` before being acquired there.
fn live(suffix: &[&Stmt]) -> Set {
    let mut out = Set::new();
    let mut acquired = Set::new();
    for s in suffix {
        match event(s) {
            Some(Ev::Unlock(p)) if !acquired.contains(&p) => {
                out.insert(p);
            }
            Some(Ev::Lock(p)) => {
                acquired.insert(p);
            }
            _ => {}
        }
    }
    out
}

fn step(held: &mut Set, s: &Stmt) {
    match event(s) {
        Some(Ev::Lock(p)) => {
            held.insert(p);
        }
        Some(Ev::Unlock(p)) => {
            held.remove(&p);
        }
        None => {}
    }
}

fn meet(slot: &mut Option<Set>, s: &Set) {
    *slot = Some(match slot.take() {
        None => s.clone(),
        Some(a) => a.intersection(s).cloned().collect(),
    });
}

pub fn enumerate(f: &FunctionDef) -> OracleFacts {
    let order: Vec<*const Stmt> = f.statements().into_iter().map(|s| s as *const Stmt).collect();
    let node_of = |s: &Stmt| order.iter().position(|p| std::ptr::eq(*p, s)).expect("statement in tree") + 2;
    let all = paths(&f.body.stmts);

    let mut mels = Set::new();
    let mut in_l: BTreeMap<usize, Set> = BTreeMap::new();
    let mut out_l: BTreeMap<usize, Set> = BTreeMap::new();
    for (p, _) in &all {
        mels.extend(live(p));
        for (i, s) in p.iter().enumerate() {
            let n = node_of(s);
            in_l.entry(n).or_default().extend(live(&p[i..]));
            out_l.entry(n).or_default().extend(live(&p[i + 1..]));
        }
    }

    let mut in_a: BTreeMap<usize, Option<Set>> = BTreeMap::new();
    let mut out_a: BTreeMap<usize, Option<Set>> = BTreeMap::new();
    let mut at_ret: Option<Set> = None;
    for (p, _) in &all {
        let mut held = mels.clone();
        for s in p {
            let n = node_of(s);
            meet(in_a.entry(n).or_default(), &held);
            step(&mut held, s);
            meet(out_a.entry(n).or_default(), &held);
        }
        meet(&mut at_ret, &held);
    }
    let mrls = at_ret.unwrap_or_default();

    let mut nodes = BTreeMap::new();
    nodes.insert(
        NodeId::ENTRY.0,
        NodeSets {
            in_l: mels.clone(),
            out_l: mels.clone(),
            in_a: mels.clone(),
            out_a: mels.clone(),
        },
    );
    nodes.insert(
        NodeId::RET.0,
        NodeSets {
            in_a: mrls.clone(),
            out_a: mrls.clone(),
            ..NodeSets::default()
        },
    );
    for (n, l) in in_l {
        nodes.insert(
            n,
            NodeSets {
                in_l: l,
                out_l: out_l.remove(&n).unwrap_or_default(),
                in_a: in_a.remove(&n).flatten().unwrap_or_default(),
                out_a: out_a.remove(&n).flatten().unwrap_or_default(),
            },
        );
    }
    OracleFacts { mels, mrls, nodes }
}

/// Whether the oracle applies: no loops, no user calls, at most `max_nodes` nodes.
pub fn eligible(g: &FlowGraph<'_>, user_functions: &BTreeSet<String>, max_nodes: usize) -> bool {
    if g.has_cycle() || g.node_count() > max_nodes {
        return false;
    }
    let mut calls_user = false;
    for (_, s) in g.stmt_nodes() {
        if matches!(s.kind, StmtKind::While { .. }) {
            return false;
        }
        for e in s.own_exprs() {
            e.for_each_call(&mut |name, _| calls_user |= user_functions.contains(name));
        }
    }
    !calls_user
}

/// Compares every eligible function of `p` with the analysis; returns how
/// many were compared.
pub fn compare(p: &Program) -> Result<usize, String> {
    let cg = build_call_graph(p);
    let flow = analyze_program(p, &cg, DEFAULT_ITERATION_BUDGET).map_err(|e| e.to_string())?;
    let users: BTreeSet<String> = p.functions().map(|f| f.name.clone()).collect();
    let mut compared = 0;
    for f in p.functions() {
        let g = &flow.graphs[&f.name];
        if !eligible(g, &users, MAX_NODES) {
            continue;
        }
        let facts = &flow.facts[&f.name];
        let want = enumerate(f);
        if facts.mels.finite() != &want.mels || facts.mrls.finite() != &want.mrls {
            return Err(format!(
                "{}: MELS/MRLS {} {} vs oracle {:?} {:?}",
                f.name, facts.mels, facts.mrls, want.mels, want.mrls
            ));
        }
        for n in g.nodes() {
            let got = NodeSets {
                in_l: facts.in_l[n.0].finite().clone(),
                out_l: facts.out_l[n.0].finite().clone(),
                in_a: facts.in_a[n.0].finite().clone(),
                out_a: facts.out_a[n.0].finite().clone(),
            };
            let expected = want.nodes.get(&n.0).cloned().unwrap_or_default();
            if got != expected {
                return Err(format!("{} node {}: {got:?} vs oracle {expected:?}", f.name, n.0));
            }
        }
        compared += 1;
    }
    Ok(compared)
}
