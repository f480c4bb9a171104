//! Statement-level control-flow graphs with distinguished entry and ret nodes.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::frontend::{Block, FunctionDef, Stmt, StmtKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const ENTRY: NodeId = NodeId(0);
    pub const RET: NodeId = NodeId(1);

    fn stmt(i: usize) -> NodeId {
        NodeId(i + 2)
    }

    /// Pre-order statement index, `None` for entry/ret.
    pub fn stmt_index(self) -> Option<usize> {
        self.0.checked_sub(2)
    }
}

/// CFG of one function. Statements are numbered in pre-order; statements
/// unreachable from entry (dead code after `return`) are kept out of the
/// graph and reported by [`FlowGraph::is_reachable`].
#[derive(Debug, Clone)]
pub struct FlowGraph<'a> {
    pub function: &'a FunctionDef,
    stmts: Vec<&'a Stmt>,
    succ: Vec<BTreeSet<NodeId>>,
    pred: Vec<BTreeSet<NodeId>>,
    reachable: Vec<bool>,
}

impl<'a> FlowGraph<'a> {
    pub fn node_count(&self) -> usize {
        self.reachable.iter().filter(|r| **r).count()
    }

    /// All reachable nodes, entry first, ret second.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.succ.len()).filter(|i| self.reachable[*i]).map(NodeId)
    }

    pub fn stmt_nodes(&self) -> impl Iterator<Item = (NodeId, &'a Stmt)> + '_ {
        self.stmts
            .iter()
            .enumerate()
            .map(|(i, s)| (NodeId::stmt(i), *s))
            .filter(|(n, _)| self.reachable[n.0])
    }

    pub fn stmt(&self, n: NodeId) -> Option<&'a Stmt> {
        n.stmt_index().map(|i| self.stmts[i])
    }

    /// Source line of a statement node; entry/ret map to the function span.
    pub fn line(&self, n: NodeId) -> u32 {
        match n {
            NodeId::ENTRY => self.function.line_span.0,
            NodeId::RET => self.function.line_span.1,
            _ => self.stmt(n).map(|s| s.line).unwrap_or(0),
        }
    }

    pub fn succ(&self, n: NodeId) -> &BTreeSet<NodeId> {
        &self.succ[n.0]
    }

    pub fn pred(&self, n: NodeId) -> &BTreeSet<NodeId> {
        &self.pred[n.0]
    }

    pub fn is_reachable(&self, n: NodeId) -> bool {
        self.reachable[n.0]
    }

    /// Index space size (including unreachable statements).
    pub fn capacity(&self) -> usize {
        self.succ.len()
    }

    pub fn has_cycle(&self) -> bool {
        // Kahn's algorithm over reachable nodes.
        let mut indeg: Vec<usize> = self.pred.iter().map(BTreeSet::len).collect();
        let mut stack = vec![NodeId::ENTRY];
        let mut seen = 0;
        while let Some(n) = stack.pop() {
            seen += 1;
            for s in &self.succ[n.0] {
                indeg[s.0] -= 1;
                if indeg[s.0] == 0 {
                    stack.push(*s);
                }
            }
        }
        seen != self.node_count()
    }

    pub fn to_dot(&self) -> String {
        let mut out = format!("digraph \"{}\" {{\n", self.function.name);
        for n in self.nodes() {
            let label = match n {
                NodeId::ENTRY => "entry".to_owned(),
                NodeId::RET => "ret".to_owned(),
                _ => {
                    let s = self.stmt(n).expect("stmt node");
                    format!("{}: {}", s.line, stmt_label(s)).replace('"', "\\\"")
                }
            };
            let _ = writeln!(out, "  n{} [label=\"{label}\"];", n.0);
        }
        for n in self.nodes() {
            for s in self.succ(n) {
                let _ = writeln!(out, "  n{} -> n{};", n.0, s.0);
            }
        }
        out.push_str("}\n");
        out
    }
}

fn stmt_label(s: &Stmt) -> String {
    use crate::frontend::print_expr;
    match &s.kind {
        StmtKind::Decl { name, .. } => format!("decl {name}"),
        StmtKind::Assign { place, op, value } => {
            format!("{} {} {}", print_expr(place), op.symbol(), print_expr(value))
        }
        StmtKind::Expr(e) => print_expr(e),
        StmtKind::If { cond, .. } => format!("if {}", print_expr(cond)),
        StmtKind::While { cond, .. } => format!("while {}", print_expr(cond)),
        StmtKind::Return(Some(e)) => format!("return {}", print_expr(e)),
        StmtKind::Return(None) => "return".to_owned(),
        StmtKind::Block(_) => "block".to_owned(),
        StmtKind::Drop(g) => format!("drop {g}"),
    }
}

struct Builder<'a> {
    stmts: Vec<&'a Stmt>,
    succ: Vec<BTreeSet<NodeId>>,
}

impl<'a> Builder<'a> {
    fn add_edge(&mut self, from: NodeId, to: NodeId) {
        self.succ[from.0].insert(to);
    }

    fn new_node(&mut self, s: &'a Stmt) -> NodeId {
        self.stmts.push(s);
        self.succ.push(BTreeSet::new());
        NodeId::stmt(self.stmts.len() - 1)
    }

    /// Links `preds` into the block and returns the nodes that fall out of it.
    fn block(&mut self, b: &'a Block, preds: Vec<NodeId>) -> Vec<NodeId> {
        b.stmts.iter().fold(preds, |preds, s| self.stmt(s, preds))
    }

    fn stmt(&mut self, s: &'a Stmt, preds: Vec<NodeId>) -> Vec<NodeId> {
        let n = self.new_node(s);
        for p in preds {
            self.add_edge(p, n);
        }
        match &s.kind {
            StmtKind::Return(_) => {
                self.add_edge(n, NodeId::RET);
                vec![]
            }
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                let mut exits = self.block(then_block, vec![n]);
                match else_block {
                    Some(b) => exits.extend(self.block(b, vec![n])),
                    None => exits.push(n),
                }
                exits.sort();
                exits.dedup();
                exits
            }
            StmtKind::While { body, .. } => {
                for e in self.block(body, vec![n]) {
                    self.add_edge(e, n);
                }
                vec![n]
            }
            StmtKind::Block(b) => self.block(b, vec![n]),
            _ => vec![n],
        }
    }
}

pub fn build_cfg(f: &FunctionDef) -> FlowGraph<'_> {
    let mut b = Builder {
        stmts: Vec::new(),
        succ: vec![BTreeSet::new(), BTreeSet::new()],
    };
    for e in b.block(&f.body, vec![NodeId::ENTRY]) {
        b.add_edge(e, NodeId::RET);
    }
    let Builder { stmts, mut succ } = b;
    let n = succ.len();

    let mut reachable = vec![false; n];
    let mut stack = vec![NodeId::ENTRY];
    reachable[0] = true;
    while let Some(x) = stack.pop() {
        for s in &succ[x.0] {
            if !reachable[s.0] {
                reachable[s.0] = true;
                stack.push(*s);
            }
        }
    }
    // Ret is always a node even if every path loops forever.
    reachable[NodeId::RET.0] = true;
    for (i, out) in succ.iter_mut().enumerate() {
        if !reachable[i] {
            out.clear();
        }
    }
    let mut pred = vec![BTreeSet::new(); n];
    for (i, out) in succ.iter().enumerate() {
        for s in out {
            pred[s.0].insert(NodeId(i));
        }
    }
    FlowGraph {
        function: f,
        stmts,
        succ,
        pred,
        reachable,
    }
}
