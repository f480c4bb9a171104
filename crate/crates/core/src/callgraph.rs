//! Call graph over user-defined functions and its SCC condensation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::frontend::{Expr, Program, Stmt, PTHREAD_CREATE};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallGraph {
    /// Function names in declaration order.
    pub nodes: Vec<String>,
    pub edges: BTreeMap<String, BTreeSet<String>>,
    pub merged_nodes: Vec<BTreeSet<String>>,
    pub merged_edges: Vec<BTreeSet<usize>>,
    /// SCC indices, callees before callers.
    pub post_order: Vec<usize>,
    /// Functions passed to `pthread_create`.
    pub thread_entries: BTreeSet<String>,
    /// Calls to names that are neither user functions nor the lock API.
    pub external_calls: BTreeSet<String>,
    scc_of: BTreeMap<String, usize>,
}

impl CallGraph {
    pub fn callees(&self, f: &str) -> impl Iterator<Item = &str> {
        self.edges.get(f).into_iter().flatten().map(String::as_str)
    }

    /// Callers of each function on the original graph.
    pub fn callers(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut out: BTreeMap<&str, BTreeSet<&str>> = self.nodes.iter().map(|n| (n.as_str(), BTreeSet::new())).collect();
        for (f, gs) in &self.edges {
            for g in gs {
                out.entry(g.as_str()).or_default().insert(f.as_str());
            }
        }
        out
    }

    pub fn scc_of(&self, f: &str) -> Option<usize> {
        self.scc_of.get(f).copied()
    }

    /// An SCC is recursive if it has several members or a self-call.
    pub fn is_recursive(&self, scc: usize) -> bool {
        let members = &self.merged_nodes[scc];
        members.len() > 1 || members.iter().any(|f| self.edges.get(f).is_some_and(|c| c.contains(f)))
    }

    /// Functions reachable from `roots` (roots included).
    pub fn reachable_from<'a>(&'a self, roots: impl IntoIterator<Item = &'a str>) -> BTreeSet<&'a str> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&str> = roots.into_iter().collect();
        while let Some(f) = stack.pop() {
            if seen.insert(f) {
                stack.extend(self.callees(f));
            }
        }
        seen
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph callgraph {\n  subgraph cluster_original {\n    label=\"original\";\n");
        for n in &self.nodes {
            let _ = writeln!(out, "    \"{n}\";");
        }
        for (f, gs) in &self.edges {
            for g in gs {
                let _ = writeln!(out, "    \"{f}\" -> \"{g}\";");
            }
        }
        out.push_str("  }\n  subgraph cluster_merged {\n    label=\"merged\";\n");
        for (i, members) in self.merged_nodes.iter().enumerate() {
            let names: Vec<&str> = members.iter().map(String::as_str).collect();
            let _ = writeln!(out, "    scc{i} [label=\"{{{}}}\"];", names.join(", "));
        }
        for (i, succs) in self.merged_edges.iter().enumerate() {
            for j in succs {
                let _ = writeln!(out, "    scc{i} -> scc{j};");
            }
        }
        out.push_str("  }\n}\n");
        out
    }
}

fn calls_in_stmt<'a>(s: &'a Stmt, f: &mut impl FnMut(&'a str, &'a [Expr])) {
    for e in s.own_exprs() {
        e.for_each_call(f);
    }
}

pub fn build_call_graph(p: &Program) -> CallGraph {
    let nodes: Vec<String> = p.functions().map(|f| f.name.clone()).collect();
    let known: BTreeSet<&str> = nodes.iter().map(String::as_str).collect();
    let mut edges: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut thread_entries = BTreeSet::new();
    let mut external_calls = BTreeSet::new();
    for f in p.functions() {
        let out = edges.entry(f.name.clone()).or_default();
        f.body.walk(&mut |s| {
            calls_in_stmt(s, &mut |name, args| {
                if name == PTHREAD_CREATE {
                    if let Some(Expr::Var(entry)) = args.get(1) {
                        thread_entries.insert(entry.clone());
                    }
                } else if known.contains(name) {
                    out.insert(name.to_owned());
                } else if !crate::frontend::LOCK_API.contains(&name) {
                    external_calls.insert(name.to_owned());
                }
            })
        });
    }

    let index: BTreeMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let adj: Vec<Vec<usize>> = nodes
        .iter()
        .map(|n| edges.get(n).into_iter().flatten().map(|g| index[g.as_str()]).collect())
        .collect();
    let components = tarjan(&adj);

    let mut comp_of = vec![0; nodes.len()];
    for (c, members) in components.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }
    let mut merged_edges = vec![BTreeSet::new(); components.len()];
    for (v, outs) in adj.iter().enumerate() {
        for &w in outs {
            if comp_of[v] != comp_of[w] {
                merged_edges[comp_of[v]].insert(comp_of[w]);
            }
        }
    }
    let merged_nodes: Vec<BTreeSet<String>> = components
        .iter()
        .map(|members| members.iter().map(|&v| nodes[v].clone()).collect())
        .collect();
    let scc_of = nodes.iter().enumerate().map(|(i, n)| (n.clone(), comp_of[i])).collect();
    // Tarjan emits components in reverse topological order: callees first.
    let post_order = (0..components.len()).collect();
    CallGraph {
        nodes,
        edges,
        merged_nodes,
        merged_edges,
        post_order,
        thread_entries,
        external_calls,
        scc_of,
    }
}

/// Iterative Tarjan; components come out callees-first.
fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next = 0;
    let mut out = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        // (vertex, next edge position)
        let mut work = vec![(root, 0usize)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = work.last_mut() {
            if let Some(&w) = adj[v].get(*pos) {
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                out.push(comp);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;
    use proptest::prelude::*;

    fn names(cg: &CallGraph) -> Vec<Vec<String>> {
        cg.post_order
            .iter()
            .map(|&i| cg.merged_nodes[i].iter().cloned().collect())
            .collect()
    }

    #[test]
    fn chain_is_post_ordered() {
        let p = parse("mutex_t m; void unlock() { pthread_mutex_unlock(&m); } void unlock2() { unlock(); }").unwrap();
        let cg = build_call_graph(&p);
        assert_eq!(cg.edges["unlock2"], BTreeSet::from(["unlock".to_owned()]));
        assert_eq!(names(&cg), vec![vec!["unlock".to_owned()], vec!["unlock2".to_owned()]]);
    }

    #[test]
    fn self_recursion_is_one_scc() {
        let p = parse(
            "mutex_t m; void unlock(int n) { if (n <= 0) { pthread_mutex_unlock(&m); } else { unlock(n - 1); } }",
        )
        .unwrap();
        let cg = build_call_graph(&p);
        assert_eq!(cg.merged_nodes.len(), 1);
        assert!(cg.edges["unlock"].contains("unlock"));
        assert!(cg.is_recursive(0));
        assert!(cg.merged_edges[0].is_empty());
    }

    #[test]
    fn no_calls_gives_isolated_sccs() {
        let p = parse("void a() { } void b() { } void c() { }").unwrap();
        let cg = build_call_graph(&p);
        assert_eq!(cg.merged_nodes.len(), 3);
        assert!(cg.merged_edges.iter().all(BTreeSet::is_empty));
        assert!((0..3).all(|i| !cg.is_recursive(i)));
    }

    #[test]
    fn thread_entries_are_not_edges() {
        let p = parse("thread_t t; void w() { } void main() { pthread_create(&t, w); }").unwrap();
        let cg = build_call_graph(&p);
        assert!(cg.edges["main"].is_empty());
        assert_eq!(cg.thread_entries, BTreeSet::from(["w".to_owned()]));
    }

    #[test]
    fn externs_are_not_nodes() {
        let p = parse("int rand(); void f() { int x = rand(); }").unwrap();
        let cg = build_call_graph(&p);
        assert_eq!(cg.nodes, vec!["f".to_owned()]);
        assert!(cg.external_calls.contains("rand"));
    }

    #[test]
    fn mutual_recursion_merges() {
        let p = parse("void a() { b(); } void b() { a(); c(); } void c() { } void d() { a(); }").unwrap();
        let cg = build_call_graph(&p);
        let order = names(&cg);
        assert_eq!(
            order,
            vec![
                vec!["c".to_owned()],
                vec!["a".to_owned(), "b".to_owned()],
                vec!["d".to_owned()]
            ]
        );
    }

    fn random_program() -> impl Strategy<Value = String> {
        proptest::collection::vec(proptest::collection::vec(0usize..8, 0..4), 1..9).prop_map(|calls| {
            let n = calls.len();
            let mut src = String::new();
            for (i, cs) in calls.iter().enumerate() {
                src.push_str(&format!("void f{i}() {{"));
                for c in cs {
                    src.push_str(&format!(" f{}();", c % n));
                }
                src.push_str(" }\n");
            }
            src
        })
    }

    proptest! {
        #[test]
        fn condensation_is_acyclic_and_post_ordered(src in random_program()) {
            let cg = build_call_graph(&parse(&src).unwrap());
            let pos: BTreeMap<usize, usize> = cg.post_order.iter().enumerate().map(|(i, c)| (*c, i)).collect();
            prop_assert_eq!(pos.len(), cg.merged_nodes.len());
            for (a, succs) in cg.merged_edges.iter().enumerate() {
                for b in succs {
                    prop_assert!(pos[b] < pos[&a], "callee after caller");
                }
            }
            // SCC membership agrees with mutual reachability.
            for f in &cg.nodes {
                for g in &cg.nodes {
                    let fg = cg.reachable_from([f.as_str()]).contains(g.as_str());
                    let gf = cg.reachable_from([g.as_str()]).contains(f.as_str());
                    prop_assert_eq!(fg && gf, cg.scc_of(f) == cg.scc_of(g));
                }
            }
        }
    }
}
