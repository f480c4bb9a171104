//! Top-down propagation of held locks from callers to callees.
//!
//! A callee's entry lock set (ELS) is what every caller always holds at
//! every call, rewritten into the callee's parameter names. The part not
//! consumed by the callee itself (the PLS) is handed back on return.

use std::collections::{BTreeMap, BTreeSet};

use crate::callgraph::CallGraph;
use crate::cfg::NodeId;
use crate::diag::Diagnostic;
use crate::flow::{statement_events, Context, Contract, LockSet, ProgramFlow};
use crate::frontend::{Expr, LockPath, Program};

/// Locks available at one call `caller -> callee(args)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallSiteFact {
    pub caller: String,
    pub callee: String,
    pub available: BTreeSet<LockPath>,
    pub args: Vec<Expr>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FunctionFlowSummary {
    pub mels: BTreeSet<LockPath>,
    pub mrls: BTreeSet<LockPath>,
    pub els: BTreeSet<LockPath>,
    pub pls: BTreeSet<LockPath>,
    pub rls: BTreeSet<LockPath>,
    pub lock_line: BTreeMap<LockPath, Vec<u32>>,
}

/// Available locks at each reachable call of a user function. Calls are
/// visited in evaluation order, so a call nested in another statement sees
/// the effect of the calls evaluated before it.
pub fn collect_call_facts(p: &Program, flow: &ProgramFlow<'_>) -> Vec<CallSiteFact> {
    let contracts: BTreeMap<String, Contract> = flow.facts.iter().map(|(k, f)| (k.clone(), f.contract())).collect();
    let globals: BTreeSet<String> = p.globals().map(|g| g.name.clone()).collect();
    let mut scratch = BTreeSet::new();
    let mut out = Vec::new();
    for f in p.functions() {
        let g = &flow.graphs[&f.name];
        let facts = &flow.facts[&f.name];
        for (node, s) in g.stmt_nodes() {
            let mut ctx = Context {
                contracts: &contracts,
                globals: &globals,
                diagnostics: &mut scratch,
            };
            let mut state = facts.in_a[node.0].clone();
            for event in statement_events(s, &f.name, &mut ctx) {
                if let Some((callee, args)) = event.call {
                    out.push(CallSiteFact {
                        caller: f.name.clone(),
                        callee: callee.to_owned(),
                        available: state.finite().clone(),
                        args: args.to_vec(),
                        line: s.line,
                    });
                }
                state = event.effect.forward(&state);
            }
        }
    }
    out
}

/// Maps a caller path into the callee: the first argument whose canonical
/// path prefixes `q` is replaced by its parameter name. Globals with no
/// matching argument pass through; other paths have no name in the callee.
pub fn to_callee_path(q: &LockPath, args: &[Expr], params: &[String], globals: &BTreeSet<String>) -> Option<LockPath> {
    for (arg, param) in args.iter().zip(params) {
        let Some(base) = LockPath::of_place(arg) else { continue };
        if q.starts_with(&base) {
            return Some(q.rebase(base.len(), &LockPath::root_only(param.clone())));
        }
    }
    globals.contains(q.root()).then(|| q.clone())
}

pub fn propagate(
    p: &Program,
    cg: &CallGraph,
    flow: &ProgramFlow<'_>,
    calls: &[CallSiteFact],
) -> (BTreeMap<String, FunctionFlowSummary>, Vec<Diagnostic>) {
    let globals: BTreeSet<String> = p.globals().map(|g| g.name.clone()).collect();
    let callers = cg.callers();
    let mut diagnostics = BTreeSet::new();
    let mels_of = |f: &str| LockSet::Finite(flow.facts[f].mels.finite().clone());

    let mut by_edge: BTreeMap<(&str, &str), Vec<&CallSiteFact>> = BTreeMap::new();
    for c in calls {
        by_edge.entry((c.caller.as_str(), c.callee.as_str())).or_default().push(c);
    }

    let mut roots: BTreeSet<&str> = BTreeSet::new();
    let mut els: BTreeMap<&str, LockSet> = BTreeMap::new();
    for name in &cg.nodes {
        if callers[name.as_str()].is_empty() {
            roots.insert(name);
            els.insert(name, mels_of(name));
        } else {
            els.insert(name, LockSet::Top);
        }
    }

    // Callers are visited before callees so that chains settle in one sweep.
    let mut rank: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, scc) in cg.post_order.iter().rev().enumerate() {
        for f in &cg.merged_nodes[*scc] {
            rank.insert(f, i);
        }
    }
    let mut work: BTreeSet<(usize, &str)> = cg.nodes.iter().filter(|g| !roots.contains(g.as_str())).map(|g| (rank[g.as_str()], g.as_str())).collect();
    loop {
        // Decreasing worklist iteration to the greatest fixpoint.
        while let Some((_, g)) = work.pop_first() {
            if roots.contains(g) {
                continue;
            }
            let params = &flow.facts[g].params;
            let mut acc = LockSet::Top;
            for f in &callers[g] {
                let els_f = &els[f];
                for c in by_edge.get(&(*f, g)).into_iter().flatten() {
                    let held = LockSet::Finite(c.available.clone()).union(els_f);
                    let prop = match held {
                        LockSet::Top => LockSet::Top,
                        LockSet::Finite(qs) => qs
                            .iter()
                            .filter_map(|q| {
                                let mapped = to_callee_path(q, &c.args, params, &globals);
                                if mapped.is_none() {
                                    diagnostics.insert(Diagnostic::warning(
                                        Some(f),
                                        c.line,
                                        format!("held lock `{q}` has no name in `{g}`; not propagated"),
                                    ));
                                }
                                mapped
                            })
                            .collect(),
                    };
                    acc = acc.intersect(&prop);
                }
            }
            if acc != els[g] {
                els.insert(g, acc);
                work.extend(cg.callees(g).map(|h| (rank[h], h)));
            }
        }
        // Caller cycles unreachable from any root keep Top; settle the first
        // such function on its MELS and continue from there.
        let Some(stuck) = cg.nodes.iter().find(|g| els[g.as_str()].is_top()) else {
            break;
        };
        roots.insert(stuck);
        els.insert(stuck, mels_of(stuck));
        work.extend(cg.callees(stuck).map(|h| (rank[h], h)));
    }

    let mut out = BTreeMap::new();
    for f in p.functions() {
        let facts = &flow.facts[&f.name];
        let mels = facts.mels.finite().clone();
        let mrls = facts.mrls.finite().clone();
        let mut entry = els[f.name.as_str()].finite().clone();
        if !mels.is_subset(&entry) {
            diagnostics.insert(Diagnostic::warning(
                Some(&f.name),
                f.line_span.0,
                format!(
                    "callers do not always hold {} on entry",
                    LockSet::Finite(mels.difference(&entry).cloned().collect())
                ),
            ));
            entry.extend(mels.iter().cloned());
        }
        let pls: BTreeSet<LockPath> = entry.difference(&mels).cloned().collect();
        if let Some(q) = pls.intersection(&mrls).next() {
            diagnostics.insert(Diagnostic::warning(
                Some(&f.name),
                f.line_span.0,
                format!("`{q}` is acquired while callers already hold it"),
            ));
        }
        let rls: BTreeSet<LockPath> = mrls.union(&pls).cloned().collect();

        let g = &flow.graphs[&f.name];
        let mut lock_line: BTreeMap<LockPath, BTreeSet<u32>> = BTreeMap::new();
        for (node, s) in g.stmt_nodes() {
            for q in facts.in_a[node.0].finite().iter().chain(&pls) {
                lock_line.entry(q.clone()).or_default().insert(s.line);
            }
        }
        debug_assert!(g.nodes().all(|n| n == NodeId::ENTRY || !facts.in_a[n.0].is_top()));
        out.insert(
            f.name.clone(),
            FunctionFlowSummary {
                mels,
                mrls,
                els: entry,
                pls,
                rls,
                lock_line: lock_line.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect(),
            },
        );
    }
    (out, diagnostics.into_iter().collect())
}
