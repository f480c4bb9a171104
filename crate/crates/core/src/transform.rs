//! Rewrites a Mini-C program into the guarded dialect under a lock summary.
//!
//! Protected globals move into a payload struct owned by their lock, and
//! protected struct fields move into a payload struct owned by the sibling
//! lock field. Lock and unlock calls become `acquire()` and `drop(..)` on
//! guard variables, and guards are threaded through calls as extra
//! parameters and extra return values according to the summary.

use std::collections::{BTreeMap, BTreeSet};

use crate::diag::Diagnostic;
use crate::flow::alias;
use crate::frontend::{
    print_program, AssignOp, Block, Expr, FieldDef, FnEnv, FunctionDef, GlobalDecl, Item, LockDecl, LockPath, Param,
    Program, ProgramEnv, Stmt, StmtKind, StructDef, Type, PTHREAD_MUTEX_INIT, PTHREAD_MUTEX_LOCK, PTHREAD_MUTEX_UNLOCK,
};
use crate::summary::{validate, FunctionSummary, LockSummary, SchemaError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransformError {
    #[error("summary does not match the program: {0}")]
    SummaryMismatch(#[from] SchemaError),
}

#[derive(Debug, Clone)]
pub struct TransformOutput {
    pub program: Program,
    pub diagnostics: Vec<Diagnostic>,
}

/// Renders a guarded program; statement lines are preserved.
pub fn print_guarded(p: &Program) -> String {
    print_program(p)
}

pub fn transform(p: &Program, env: &ProgramEnv, summary: &LockSummary) -> Result<TransformOutput, TransformError> {
    validate(summary, p, env)?;
    let plan = Plan::new(p, env, summary);
    let mut diagnostics = Vec::new();
    let mut items = Vec::new();
    let mut emitted: BTreeSet<String> = BTreeSet::new();
    for item in &p.items {
        match item {
            Item::Struct(s) => {
                for lock in s.fields.iter().filter(|f| f.ty.is_lock()) {
                    if let Some(payload) = plan.struct_payload.get(&(s.name.clone(), lock.name.clone())) {
                        let fields = s
                            .fields
                            .iter()
                            .filter(|f| plan.struct_prot.get(&(s.name.clone(), f.name.clone())) == Some(&lock.name))
                            .map(|f| FieldDef {
                                name: f.name.clone(),
                                ty: map_type(&f.ty),
                            })
                            .collect();
                        items.push(Item::Struct(StructDef {
                            name: payload.clone(),
                            fields,
                            line: s.line,
                        }));
                    }
                }
                let fields = s
                    .fields
                    .iter()
                    .filter(|f| !plan.struct_prot.contains_key(&(s.name.clone(), f.name.clone())))
                    .map(|f| {
                        let ty = if f.ty.is_lock() {
                            Type::Lock(plan.struct_payload.get(&(s.name.clone(), f.name.clone())).cloned())
                        } else {
                            map_type(&f.ty)
                        };
                        FieldDef { name: f.name.clone(), ty }
                    })
                    .collect();
                items.push(Item::Struct(StructDef {
                    name: s.name.clone(),
                    fields,
                    line: s.line,
                }));
            }
            Item::Global(g) if g.ty.is_lock() => {
                if let Some(payload) = plan.global_payload.get(&g.name) {
                    if emitted.insert(g.name.clone()) {
                        items.push(plan.global_payload_struct(&g.name, payload, g.line));
                    }
                }
                let init = plan
                    .protected_by(&g.name)
                    .map(|v| (v.name.clone(), v.init.clone()))
                    .collect();
                items.push(Item::Lock(LockDecl {
                    name: g.name.clone(),
                    payload: plan.global_payload.get(&g.name).cloned(),
                    init,
                    line: g.line,
                }));
            }
            Item::Global(g) => match summary.global_lock_map.get(&g.name) {
                Some(lock) => {
                    if emitted.insert(lock.clone()) {
                        let payload = &plan.global_payload[lock];
                        items.push(plan.global_payload_struct(lock, payload, g.line));
                    }
                }
                None => items.push(Item::Global(GlobalDecl {
                    ty: map_type(&g.ty),
                    ..g.clone()
                })),
            },
            Item::Lock(l) => items.push(Item::Lock(l.clone())),
            Item::Extern(e) => {
                let mut e = e.clone();
                e.ret = map_type(&e.ret);
                for prm in &mut e.params {
                    prm.ty = map_type(&prm.ty);
                }
                items.push(Item::Extern(e));
            }
            Item::Function(f) => {
                let mut rw = FnRewriter::new(&plan, f);
                items.push(Item::Function(rw.function()));
                diagnostics.append(&mut rw.diagnostics);
            }
        }
    }
    Ok(TransformOutput {
        program: Program { items },
        diagnostics,
    })
}

fn map_type(t: &Type) -> Type {
    match t {
        Type::Mutex => Type::Lock(None),
        Type::Ptr(inner) => Type::ptr(map_type(inner)),
        other => other.clone(),
    }
}

/// Picks `base`, or `base_1`, `base_2`, ... avoiding `taken` and `reserved`,
/// and adds it to `taken`.
fn fresh(base: &str, taken: &mut BTreeSet<String>, reserved: &BTreeSet<String>) -> String {
    let mut name = base.to_owned();
    let mut i = 1;
    while taken.contains(&name) || reserved.contains(&name) {
        name = format!("{base}_{i}");
        i += 1;
    }
    taken.insert(name.clone());
    name
}

struct Callee {
    params: Vec<String>,
    ret: Type,
    entry: Vec<LockPath>,
    returns: Vec<LockPath>,
}

/// Whole-program facts shared by every function rewrite.
struct Plan<'a> {
    program: &'a Program,
    env: &'a ProgramEnv,
    summary: &'a LockSummary,
    /// (struct, field) -> lock field.
    struct_prot: BTreeMap<(String, String), String>,
    /// Global lock -> payload struct name.
    global_payload: BTreeMap<String, String>,
    /// (struct, lock field) -> payload struct name.
    struct_payload: BTreeMap<(String, String), String>,
    callees: BTreeMap<String, Callee>,
    global_names: BTreeSet<String>,
}

impl<'a> Plan<'a> {
    fn new(p: &'a Program, env: &'a ProgramEnv, summary: &'a LockSummary) -> Plan<'a> {
        let mut type_names: BTreeSet<String> = p.structs().map(|s| s.name.clone()).collect();
        let mut global_payload = BTreeMap::new();
        for g in p.globals().filter(|g| g.ty.is_lock()) {
            if summary.global_lock_map.values().any(|l| *l == g.name) {
                global_payload.insert(g.name.clone(), fresh(&format!("{}Data", g.name), &mut type_names, &BTreeSet::new()));
            }
        }
        let mut struct_prot = BTreeMap::new();
        let mut struct_payload = BTreeMap::new();
        for s in p.structs() {
            let Some(map) = summary.struct_lock_map.get(&s.name) else { continue };
            for (field, lock) in map {
                struct_prot.insert((s.name.clone(), field.clone()), lock.clone());
            }
            for f in s.fields.iter().filter(|f| f.ty.is_lock()) {
                if map.values().any(|l| *l == f.name) {
                    let name = fresh(&format!("{}{}Data", s.name, f.name), &mut type_names, &BTreeSet::new());
                    struct_payload.insert((s.name.clone(), f.name.clone()), name);
                }
            }
        }
        let empty = FunctionSummary::default();
        let callees = p
            .functions()
            .map(|f| {
                let fs = summary.function_map.get(&f.name).unwrap_or(&empty);
                let callee = Callee {
                    params: f.param_names(),
                    ret: f.ret.clone(),
                    entry: fs.entry_lock.iter().cloned().collect(),
                    returns: fs.return_lock.iter().cloned().collect(),
                };
                (f.name.clone(), callee)
            })
            .collect();
        let global_names = p
            .items
            .iter()
            .filter_map(|i| match i {
                Item::Global(g) => Some(g.name.clone()),
                Item::Lock(l) => Some(l.name.clone()),
                Item::Extern(e) => Some(e.name.clone()),
                Item::Function(f) => Some(f.name.clone()),
                Item::Struct(_) => None,
            })
            .collect();
        Plan {
            program: p,
            env,
            summary,
            struct_prot,
            global_payload,
            struct_payload,
            callees,
            global_names,
        }
    }

    fn protected_by<'s>(&'s self, lock: &'s str) -> impl Iterator<Item = &'a GlobalDecl> + 's {
        self.program
            .globals()
            .filter(move |g| self.summary.global_lock_map.get(&g.name).is_some_and(|l| l == lock))
    }

    fn global_payload_struct(&self, lock: &str, payload: &str, line: u32) -> Item {
        let fields = self
            .protected_by(lock)
            .map(|g| FieldDef {
                name: g.name.clone(),
                ty: map_type(&g.ty),
            })
            .collect();
        Item::Struct(StructDef {
            name: payload.to_owned(),
            fields,
            line,
        })
    }
}

struct FnRewriter<'p, 'a> {
    plan: &'p Plan<'a>,
    f: &'a FunctionDef,
    env: FnEnv<'a>,
    fs: FunctionSummary,
    taken: BTreeSet<String>,
    guards: BTreeMap<LockPath, String>,
    params: BTreeSet<LockPath>,
    used: BTreeSet<LockPath>,
    temps: Vec<(String, Type)>,
    ret_guards: Vec<LockPath>,
    diagnostics: Vec<Diagnostic>,
}

impl<'p, 'a> FnRewriter<'p, 'a> {
    fn new(plan: &'p Plan<'a>, f: &'a FunctionDef) -> Self {
        let env = FnEnv::of(plan.env, f);
        let fs = plan.summary.function_map.get(&f.name).cloned().unwrap_or_default();
        let taken: BTreeSet<String> = env.locals.keys().cloned().collect();
        let mut rw = FnRewriter {
            plan,
            f,
            env,
            taken,
            guards: BTreeMap::new(),
            params: fs.entry_lock.clone(),
            used: BTreeSet::new(),
            temps: Vec::new(),
            ret_guards: fs.return_lock.iter().cloned().collect(),
            fs,
            diagnostics: Vec::new(),
        };
        let own: BTreeSet<LockPath> = rw.fs.entry_lock.union(&rw.fs.return_lock).cloned().collect();
        for p in &own {
            rw.guard(p);
        }
        rw
    }

    fn guard(&mut self, p: &LockPath) -> String {
        if let Some(g) = self.guards.get(p) {
            self.used.insert(p.clone());
            return g.clone();
        }
        let g = fresh(&p.guard_name(), &mut self.taken, &self.plan.global_names);
        self.guards.insert(p.clone(), g.clone());
        self.used.insert(p.clone());
        g
    }

    fn warn(&mut self, line: u32, msg: String) {
        self.diagnostics.push(Diagnostic::warning(Some(&self.f.name), line, msg));
    }

    fn function(&mut self) -> FunctionDef {
        let f = self.f;
        let mut body = self.block(&f.body);
        if f.ret == Type::Void && !self.ret_guards.is_empty() && f.body.falls_through() {
            let value = self.return_value(None);
            body.push(Stmt::new(f.line_span.1, StmtKind::Return(Some(value))));
        }
        let mut params: Vec<Param> = f
            .params
            .iter()
            .map(|p| Param {
                name: p.name.clone(),
                ty: map_type(&p.ty),
            })
            .collect();
        for p in self.fs.entry_lock.clone() {
            params.push(Param {
                name: self.guards[&p].clone(),
                ty: Type::Guard(p),
            });
        }
        let mut decls = Vec::new();
        for p in &self.used {
            if !self.params.contains(p) {
                decls.push(Stmt::new(
                    f.line_span.0,
                    StmtKind::Decl {
                        ty: Type::Guard(p.clone()),
                        name: self.guards[p].clone(),
                        init: None,
                    },
                ));
            }
        }
        for (name, ty) in &self.temps {
            decls.push(Stmt::new(
                f.line_span.0,
                StmtKind::Decl {
                    ty: ty.clone(),
                    name: name.clone(),
                    init: None,
                },
            ));
        }
        decls.extend(body);
        let ret = returned_type(&map_type(&f.ret), &self.ret_guards);
        FunctionDef {
            name: f.name.clone(),
            ret,
            params,
            body: Block::new(decls),
            line_span: f.line_span,
        }
    }

    fn block(&mut self, b: &Block) -> Vec<Stmt> {
        b.stmts.iter().flat_map(|s| self.stmt(s)).collect()
    }

    fn stmt(&mut self, s: &Stmt) -> Vec<Stmt> {
        let line = s.line;
        let mut out = Vec::new();
        let kind = match &s.kind {
            StmtKind::Expr(Expr::Call { name, args }) if name == PTHREAD_MUTEX_LOCK || name == PTHREAD_MUTEX_UNLOCK => {
                let Expr::AddrOf { place, .. } = &args[0] else {
                    return vec![s.clone()];
                };
                let Some(p) = LockPath::of_place(place) else {
                    return vec![s.clone()];
                };
                let g = self.guard(&p);
                if name == PTHREAD_MUTEX_LOCK {
                    StmtKind::Assign {
                        place: Expr::Var(g),
                        op: AssignOp::Set,
                        value: Expr::Acquire(place.clone()),
                    }
                } else {
                    StmtKind::Drop(g)
                }
            }
            StmtKind::Expr(Expr::Call { name, .. }) if name == PTHREAD_MUTEX_INIT => return vec![],
            StmtKind::Expr(e) => {
                let hoist = nested_guard_call(self.plan, e, true);
                let value = self.top_value(e, line, hoist, &mut out);
                match self.returned_guards(e, line) {
                    Some(targets) => StmtKind::Assign {
                        place: self.destructure(None, e, targets),
                        op: AssignOp::Set,
                        value,
                    },
                    None => StmtKind::Expr(value),
                }
            }
            StmtKind::Assign {
                place,
                op: AssignOp::Set,
                value,
            } => {
                let hoist = nested_guard_call(self.plan, value, true) || nested_guard_call(self.plan, place, false);
                let v = self.top_value(value, line, hoist, &mut out);
                let pl = self.expr(place, line, &mut hoist.then_some(&mut out));
                match self.returned_guards(value, line) {
                    Some(targets) if matches!(pl, Expr::Var(_)) => StmtKind::Assign {
                        place: self.destructure(Some(pl), value, targets),
                        op: AssignOp::Set,
                        value: v,
                    },
                    Some(targets) => {
                        // A payload place may be reached through a guard the
                        // destructuring rebinds, so store through a temporary.
                        let t = self.temp(value);
                        out.push(Stmt::new(
                            line,
                            StmtKind::Assign {
                                place: self.destructure(Some(t.clone()), value, targets),
                                op: AssignOp::Set,
                                value: v,
                            },
                        ));
                        StmtKind::Assign {
                            place: pl,
                            op: AssignOp::Set,
                            value: t,
                        }
                    }
                    None => StmtKind::Assign {
                        place: pl,
                        op: AssignOp::Set,
                        value: v,
                    },
                }
            }
            StmtKind::Assign { place, op, value } => {
                let hoist = nested_guard_call(self.plan, value, false) || nested_guard_call(self.plan, place, false);
                let v = self.expr(value, line, &mut hoist.then_some(&mut out));
                let pl = self.expr(place, line, &mut hoist.then_some(&mut out));
                StmtKind::Assign {
                    place: pl,
                    op: *op,
                    value: v,
                }
            }
            StmtKind::Decl { ty, name, init: Some(init) } => {
                let hoist = nested_guard_call(self.plan, init, true);
                let v = self.top_value(init, line, hoist, &mut out);
                match self.returned_guards(init, line) {
                    Some(targets) => {
                        out.push(Stmt::new(
                            line,
                            StmtKind::Decl {
                                ty: map_type(ty),
                                name: name.clone(),
                                init: None,
                            },
                        ));
                        StmtKind::Assign {
                            place: self.destructure(Some(Expr::Var(name.clone())), init, targets),
                            op: AssignOp::Set,
                            value: v,
                        }
                    }
                    None => StmtKind::Decl {
                        ty: map_type(ty),
                        name: name.clone(),
                        init: Some(v),
                    },
                }
            }
            StmtKind::Decl { ty, name, init: None } => StmtKind::Decl {
                ty: map_type(ty),
                name: name.clone(),
                init: None,
            },
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                let hoist = nested_guard_call(self.plan, cond, false);
                let c = self.expr(cond, line, &mut hoist.then_some(&mut out));
                StmtKind::If {
                    cond: c,
                    then_block: Block::new(self.block(then_block)),
                    else_block: else_block.as_ref().map(|b| Block::new(self.block(b))),
                }
            }
            StmtKind::While { cond, body } => {
                let hoist = nested_guard_call(self.plan, cond, false);
                let c = self.expr(cond, line, &mut hoist.then_some(&mut out));
                let mut new_body = self.block(body);
                if hoist && body.falls_through() {
                    let again: Vec<Stmt> = out.iter().map(|s| Stmt::new(body_end(body, line), s.kind.clone())).collect();
                    new_body.extend(again);
                }
                StmtKind::While {
                    cond: c,
                    body: Block::new(new_body),
                }
            }
            StmtKind::Return(e) => {
                let hoist = e.as_ref().is_some_and(|e| nested_guard_call(self.plan, e, false));
                let v = e.as_ref().map(|e| self.expr(e, line, &mut hoist.then_some(&mut out)));
                if self.ret_guards.is_empty() {
                    StmtKind::Return(v)
                } else {
                    StmtKind::Return(Some(self.return_value(v)))
                }
            }
            StmtKind::Block(b) => StmtKind::Block(Block::new(self.block(b))),
            StmtKind::Drop(_) => s.kind.clone(),
        };
        out.push(Stmt::new(line, kind));
        out
    }

    fn return_value(&mut self, value: Option<Expr>) -> Expr {
        let mut parts: Vec<Expr> = value.into_iter().collect();
        for p in self.ret_guards.clone() {
            parts.push(Expr::Var(self.guard(&p)));
        }
        if parts.len() == 1 {
            parts.pop().expect("one part")
        } else {
            Expr::Tuple(parts)
        }
    }

    /// Rewrites the root of an expression statement or assignment; a root
    /// call is kept in place so its returned guards can be destructured.
    fn top_value(&mut self, e: &Expr, line: u32, hoist: bool, out: &mut Vec<Stmt>) -> Expr {
        let mut pre = hoist.then_some(out);
        match e {
            Expr::Call { name, args } if self.plan.callees.contains_key(name) => self.call(name, args, line, &mut pre),
            _ => self.expr(e, line, &mut pre),
        }
    }

    /// Caller-side guard targets for the guards returned by a root call.
    fn returned_guards(&mut self, e: &Expr, line: u32) -> Option<Vec<Expr>> {
        let Expr::Call { name, args } = e else { return None };
        let callee = self.plan.callees.get(name)?;
        if callee.returns.is_empty() {
            return None;
        }
        let mut targets = Vec::new();
        for p in &callee.returns {
            targets.push(match alias(p, &callee.params, args) {
                Ok(q) => Expr::Var(self.guard(&q)),
                Err(err) => {
                    self.warn(line, format!("guard for `{p}` returned by `{name}` is discarded: {err}"));
                    Expr::Wildcard
                }
            });
        }
        Some(targets)
    }

    fn destructure(&self, value_place: Option<Expr>, call: &Expr, guards: Vec<Expr>) -> Expr {
        let Expr::Call { name, .. } = call else { unreachable!("destructure of a non-call") };
        let void = self.plan.callees[name].ret == Type::Void;
        let mut parts = Vec::new();
        if !void {
            parts.push(value_place.unwrap_or(Expr::Wildcard));
        }
        parts.extend(guards);
        if parts.len() == 1 {
            parts.pop().expect("one part")
        } else {
            Expr::Tuple(parts)
        }
    }

    /// A user call with the caller's guards appended for the callee's entry locks.
    fn call(&mut self, name: &str, args: &[Expr], line: u32, pre: &mut Option<&mut Vec<Stmt>>) -> Expr {
        let mut new_args: Vec<Expr> = args.iter().map(|a| self.expr(a, line, pre)).collect();
        if let Some(callee) = self.plan.callees.get(name) {
            for p in &callee.entry {
                let q = match alias(p, &callee.params, args) {
                    Ok(q) => q,
                    Err(err) => {
                        self.warn(line, format!("cannot pass guard for `{p}` to `{name}`: {err}"));
                        p.clone()
                    }
                };
                new_args.push(Expr::Var(self.guard(&q)));
            }
        }
        Expr::Call {
            name: name.to_owned(),
            args: new_args,
        }
    }

    /// Rewrites protected accesses and calls. With `pre` set, every nested
    /// call is evaluated into a temporary first, in evaluation order.
    fn expr(&mut self, e: &Expr, line: u32, pre: &mut Option<&mut Vec<Stmt>>) -> Expr {
        match e {
            Expr::Var(x) if self.env.is_global(x) => match self.plan.summary.global_lock_map.get(x) {
                Some(lock) => {
                    let lp = LockPath::root_only(lock.clone());
                    self.data(&lp, Expr::Var(lock.clone()), x, line)
                }
                None => e.clone(),
            },
            Expr::Field { base, field, arrow } => {
                let new_base = self.expr(base, line, pre);
                let lock = self
                    .env
                    .base_struct(base, *arrow)
                    .and_then(|def| self.plan.struct_prot.get(&(def.name.clone(), field.clone())))
                    .cloned();
                match (lock, LockPath::of_place(base)) {
                    (Some(lock), Some(bp)) => {
                        let lock_place = Expr::field(new_base, lock.clone(), *arrow);
                        self.data(&bp.child(lock), lock_place, field, line)
                    }
                    (Some(lock), None) => Expr::GetMut {
                        lock: Box::new(Expr::field(new_base, lock, *arrow)),
                        field: field.clone(),
                    },
                    (None, _) => Expr::field(new_base, field.clone(), *arrow),
                }
            }
            Expr::AddrOf { mutable, place } => Expr::AddrOf {
                mutable: *mutable,
                place: Box::new(self.expr(place, line, pre)),
            },
            Expr::Deref(inner) => Expr::Deref(Box::new(self.expr(inner, line, pre))),
            Expr::Binary { op, lhs, rhs } => Expr::Binary {
                op: *op,
                lhs: Box::new(self.expr(lhs, line, pre)),
                rhs: Box::new(self.expr(rhs, line, pre)),
            },
            Expr::Call { name, args } => {
                let call = self.call(name, args, line, pre);
                match pre {
                    Some(out) => self.hoist(e, call, line, out),
                    None => call,
                }
            }
            Expr::Tuple(es) => Expr::Tuple(es.iter().map(|x| self.expr(x, line, pre)).collect()),
            _ => e.clone(),
        }
    }

    fn hoist(&mut self, original: &Expr, call: Expr, line: u32, out: &mut Vec<Stmt>) -> Expr {
        let ret = self.return_type(original);
        let (value, temp) = if ret == Type::Void {
            (Expr::IntLit(0), None)
        } else {
            let t = self.temp(original);
            (t.clone(), Some(t))
        };
        let place = match self.returned_guards(original, line) {
            Some(guards) => self.destructure(temp, original, guards),
            None => match temp {
                Some(t) => t,
                None => {
                    out.push(Stmt::new(line, StmtKind::Expr(call)));
                    return value;
                }
            },
        };
        out.push(Stmt::new(
            line,
            StmtKind::Assign {
                place,
                op: AssignOp::Set,
                value: call,
            },
        ));
        value
    }

    fn return_type(&self, call: &Expr) -> Type {
        let Expr::Call { name, .. } = call else { unreachable!("return type of a non-call") };
        match self.plan.callees.get(name) {
            Some(c) => c.ret.clone(),
            None => self.plan.env.functions.get(name).map_or(Type::Int, |s| s.ret.clone()),
        }
    }

    /// A fresh temporary typed by the return type of `call`.
    fn temp(&mut self, call: &Expr) -> Expr {
        let ty = map_type(&self.return_type(call));
        let t = fresh("tmp", &mut self.taken, &self.plan.global_names);
        self.temps.push((t.clone(), ty));
        Expr::Var(t)
    }

    /// Access to payload field `field` of the lock at `lock` (named by `place`).
    fn data(&mut self, lock: &LockPath, place: Expr, field: &str, line: u32) -> Expr {
        let held = self.fs.lock_line.get(lock).is_some_and(|ls| ls.contains(&line));
        if held {
            Expr::GuardDeref {
                guard: self.guard(lock),
                field: field.to_owned(),
            }
        } else {
            Expr::GetMut {
                lock: Box::new(place),
                field: field.to_owned(),
            }
        }
    }
}

fn returned_type(ret: &Type, guards: &[LockPath]) -> Type {
    if guards.is_empty() {
        return ret.clone();
    }
    let mut parts = Vec::new();
    if *ret != Type::Void {
        parts.push(ret.clone());
    }
    parts.extend(guards.iter().cloned().map(Type::Guard));
    if parts.len() == 1 {
        parts.pop().expect("one part")
    } else {
        Type::Tuple(parts)
    }
}

fn body_end(body: &Block, fallback: u32) -> u32 {
    let mut last = fallback;
    body.walk(&mut |s| last = last.max(s.line));
    last
}

/// Whether `e` contains a call that returns guards, other than `e` itself
/// when `skip_root` is set.
fn nested_guard_call(plan: &Plan<'_>, e: &Expr, skip_root: bool) -> bool {
    let mut found = false;
    let mut visit = |name: &str, _: &[Expr]| {
        found |= plan.callees.get(name).is_some_and(|c| !c.returns.is_empty());
    };
    match (skip_root, e) {
        (true, Expr::Call { args, .. }) => args.iter().for_each(|a| a.for_each_call(&mut visit)),
        _ => e.for_each_call(&mut visit),
    }
    found
}

#[cfg(test)]
mod tests;
