//! Name resolution and light type checking.

use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::error::{FrontendError, NotALockPlace};
use super::lockpath::LockPath;
use super::{LOCK_API, PTHREAD_CREATE, PTHREAD_MUTEX_INIT, PTHREAD_MUTEX_LOCK, PTHREAD_MUTEX_UNLOCK};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub params: Vec<Param>,
    pub ret: Type,
    /// `false` for body-less prototypes.
    pub defined: bool,
}

/// Whole-program symbol tables.
#[derive(Debug, Clone, Default)]
pub struct ProgramEnv {
    pub structs: HashMap<String, StructDef>,
    pub globals: HashMap<String, Type>,
    pub functions: HashMap<String, Signature>,
}

impl ProgramEnv {
    pub fn build(p: &Program) -> Result<ProgramEnv, FrontendError> {
        let mut env = ProgramEnv::default();
        let mut ordinary: HashSet<&str> = HashSet::new();
        for item in &p.items {
            let (name, line) = match item {
                Item::Struct(s) => {
                    if env.structs.insert(s.name.clone(), s.clone()).is_some() {
                        return Err(FrontendError::Duplicate {
                            line: s.line,
                            name: s.name.clone(),
                        });
                    }
                    let mut seen = HashSet::new();
                    for f in &s.fields {
                        if !seen.insert(f.name.as_str()) {
                            return Err(FrontendError::Duplicate {
                                line: s.line,
                                name: format!("{}.{}", s.name, f.name),
                            });
                        }
                    }
                    continue;
                }
                Item::Global(g) => {
                    env.globals.insert(g.name.clone(), g.ty.clone());
                    (g.name.as_str(), g.line)
                }
                Item::Lock(l) => {
                    env.globals.insert(l.name.clone(), Type::Lock(l.payload.clone()));
                    (l.name.as_str(), l.line)
                }
                Item::Extern(e) => {
                    env.functions.insert(
                        e.name.clone(),
                        Signature {
                            params: e.params.clone(),
                            ret: e.ret.clone(),
                            defined: false,
                        },
                    );
                    (e.name.as_str(), e.line)
                }
                Item::Function(f) => {
                    env.functions.insert(
                        f.name.clone(),
                        Signature {
                            params: f.params.clone(),
                            ret: f.ret.clone(),
                            defined: true,
                        },
                    );
                    (f.name.as_str(), f.line_span.0)
                }
            };
            if LOCK_API.contains(&name) || name == "drop" {
                return Err(FrontendError::type_error(line, format!("`{name}` is reserved")));
            }
            if !ordinary.insert(name) {
                return Err(FrontendError::Duplicate {
                    line,
                    name: name.to_owned(),
                });
            }
        }
        Ok(env)
    }

    pub fn is_user_function(&self, name: &str) -> bool {
        self.functions.get(name).is_some_and(|s| s.defined)
    }
}

/// Variables visible inside one function: parameters and locals
/// (function-scoped), falling back to globals.
#[derive(Debug, Clone)]
pub struct FnEnv<'e> {
    pub program: &'e ProgramEnv,
    pub locals: HashMap<String, Type>,
}

impl<'e> FnEnv<'e> {
    /// Environment with every parameter and local declaration of `f`.
    pub fn of(program: &'e ProgramEnv, f: &FunctionDef) -> FnEnv<'e> {
        let mut locals: HashMap<String, Type> = f.params.iter().map(|p| (p.name.clone(), p.ty.clone())).collect();
        f.body.walk(&mut |s| {
            if let StmtKind::Decl { ty, name, .. } = &s.kind {
                locals.insert(name.clone(), ty.clone());
            }
        });
        FnEnv { program, locals }
    }

    pub fn var_type(&self, name: &str) -> Option<&Type> {
        self.locals.get(name).or_else(|| self.program.globals.get(name))
    }

    /// `true` if `name` resolves to a global variable here.
    pub fn is_global(&self, name: &str) -> bool {
        !self.locals.contains_key(name) && self.program.globals.contains_key(name)
    }

    fn struct_of(&self, ty: &Type, arrow: bool) -> Option<&StructDef> {
        let target = if arrow { ty.pointee()? } else { ty };
        match target {
            Type::Struct(s) => self.program.structs.get(s),
            _ => None,
        }
    }

    /// Struct definition reached by `base.` / `base->`.
    pub fn base_struct(&self, base: &Expr, arrow: bool) -> Option<&StructDef> {
        let ty = self.type_of(base)?;
        self.struct_of(&ty, arrow)
    }

    /// Struct type of the value a lock path's parent denotes, e.g. for `x.m`
    /// the struct that `x` points to (or is).
    pub fn path_type(&self, path: &LockPath) -> Option<Type> {
        let mut ty = self.var_type(path.root())?.clone();
        for seg in &path.segments()[1..] {
            let sname = match &ty {
                Type::Struct(s) => s.clone(),
                Type::Ptr(inner) => match inner.as_ref() {
                    Type::Struct(s) => s.clone(),
                    _ => return None,
                },
                _ => return None,
            };
            ty = self.program.structs.get(&sname)?.field(seg)?.ty.clone();
        }
        Some(ty)
    }

    fn payload_field(&self, lock_ty: &Type, field: &str) -> Option<Type> {
        match lock_ty {
            Type::Lock(Some(p)) => Some(self.program.structs.get(p)?.field(field)?.ty.clone()),
            _ => None,
        }
    }

    /// Best-effort static type of an expression; `None` when ill-typed.
    pub fn type_of(&self, e: &Expr) -> Option<Type> {
        match e {
            Expr::IntLit(_) | Expr::Binary { .. } => Some(Type::Int),
            Expr::Var(v) => self.var_type(v).cloned(),
            Expr::Field { base, field, arrow } => {
                let s = self.base_struct(base, *arrow)?;
                Some(s.field(field)?.ty.clone())
            }
            Expr::AddrOf { place, .. } => Some(Type::ptr(self.type_of(place)?)),
            Expr::Deref(inner) => self.type_of(inner)?.pointee().cloned(),
            Expr::Call { name, .. } => {
                if LOCK_API.contains(&name.as_str()) {
                    Some(Type::Int)
                } else {
                    Some(self.program.functions.get(name)?.ret.clone())
                }
            }
            Expr::GuardDeref { guard, field } => {
                let Type::Guard(path) = self.var_type(guard)? else {
                    return None;
                };
                let lock_ty = self.path_type(path)?;
                self.payload_field(&lock_ty, field)
            }
            Expr::GetMut { lock, field } => {
                let lock_ty = self.type_of(lock)?;
                self.payload_field(&lock_ty, field)
            }
            Expr::Acquire(lock) => Some(Type::Guard(LockPath::of_place(lock)?)),
            Expr::Tuple(es) => Some(Type::Tuple(es.iter().map(|e| self.type_of(e)).collect::<Option<_>>()?)),
            Expr::Wildcard => Some(Type::Void),
        }
    }

    /// Canonical lock path of a lock-API argument `&p` / `&mut p`.
    pub fn lock_path_of(&self, arg: &Expr) -> Result<LockPath, NotALockPlace> {
        let Expr::AddrOf { place, .. } = arg else {
            return Err(NotALockPlace);
        };
        match self.type_of(place) {
            Some(t) if t.is_lock() => LockPath::of_place(place).ok_or(NotALockPlace),
            _ => Err(NotALockPlace),
        }
    }
}

/// Checks names and types of a parsed program.
pub fn check_program(p: &Program) -> Result<ProgramEnv, FrontendError> {
    let env = ProgramEnv::build(p)?;
    let check_ty = |ty: &Type, line: u32| -> Result<(), FrontendError> { check_type(&env, ty, line) };
    for item in &p.items {
        match item {
            Item::Struct(s) => {
                for f in &s.fields {
                    check_ty(&f.ty, s.line)?;
                }
            }
            Item::Global(g) => {
                check_ty(&g.ty, g.line)?;
                if let Some(init) = &g.init {
                    let fenv = FnEnv {
                        program: &env,
                        locals: HashMap::new(),
                    };
                    Checker {
                        env: &fenv,
                        fname: "",
                        declared: HashSet::new(),
                    }
                    .expr(init, g.line, false)?;
                }
            }
            Item::Lock(l) => {
                if let Some(payload) = &l.payload {
                    let Some(def) = env.structs.get(payload) else {
                        return Err(FrontendError::UnknownIdentifier {
                            line: l.line,
                            name: payload.clone(),
                        });
                    };
                    for (field, _) in &l.init {
                        if def.field(field).is_none() {
                            return Err(FrontendError::UnknownIdentifier {
                                line: l.line,
                                name: format!("{payload}.{field}"),
                            });
                        }
                    }
                }
            }
            Item::Extern(e) => {
                check_ty(&e.ret, e.line)?;
                for prm in &e.params {
                    check_ty(&prm.ty, e.line)?;
                }
            }
            Item::Function(f) => check_function(&env, f)?,
        }
    }
    Ok(env)
}

fn check_type(env: &ProgramEnv, ty: &Type, line: u32) -> Result<(), FrontendError> {
    match ty {
        Type::Struct(s) | Type::Lock(Some(s)) if !env.structs.contains_key(s) => Err(FrontendError::UnknownIdentifier {
            line,
            name: format!("struct {s}"),
        }),
        Type::Ptr(t) => check_type(env, t, line),
        Type::Tuple(ts) => ts.iter().try_for_each(|t| check_type(env, t, line)),
        _ => Ok(()),
    }
}

fn check_function(env: &ProgramEnv, f: &FunctionDef) -> Result<(), FrontendError> {
    let line = f.line_span.0;
    check_type(env, &f.ret, line)?;
    let mut declared = HashSet::new();
    for prm in &f.params {
        check_type(env, &prm.ty, line)?;
        if !declared.insert(prm.name.clone()) {
            return Err(FrontendError::Duplicate {
                line,
                name: prm.name.clone(),
            });
        }
    }
    let fenv = FnEnv::of(env, f);
    let mut checker = Checker {
        env: &fenv,
        fname: &f.name,
        declared,
    };
    checker.block(&f.body)
}

struct Checker<'a, 'e> {
    env: &'a FnEnv<'e>,
    fname: &'a str,
    /// Parameters and locals declared so far, in pre-order.
    declared: HashSet<String>,
}

impl Checker<'_, '_> {
    fn block(&mut self, b: &Block) -> Result<(), FrontendError> {
        b.stmts.iter().try_for_each(|s| self.stmt(s))
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), FrontendError> {
        let line = s.line;
        match &s.kind {
            StmtKind::Decl { ty, name, init } => {
                check_type(self.env.program, ty, line)?;
                if let Some(init) = init {
                    self.expr(init, line, false)?;
                }
                if !self.declared.insert(name.clone()) {
                    return Err(FrontendError::Duplicate { line, name: name.clone() });
                }
            }
            StmtKind::Assign { place, value, .. } => {
                self.expr(value, line, false)?;
                self.place(place, line)?;
            }
            StmtKind::Expr(e) => self.expr(e, line, true)?,
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                self.expr(cond, line, false)?;
                self.block(then_block)?;
                if let Some(b) = else_block {
                    self.block(b)?;
                }
            }
            StmtKind::While { cond, body } => {
                self.expr(cond, line, false)?;
                self.block(body)?;
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.expr(e, line, false)?;
                }
            }
            StmtKind::Block(b) => self.block(b)?,
            StmtKind::Drop(g) => {
                self.var(g, line)?;
                if !self.env.var_type(g).is_some_and(Type::is_guard) {
                    return Err(FrontendError::type_error(line, format!("`drop` of non-guard `{g}`")));
                }
            }
        }
        Ok(())
    }

    fn var(&self, name: &str, line: u32) -> Result<(), FrontendError> {
        let known = if self.env.locals.contains_key(name) {
            self.declared.contains(name)
        } else {
            self.env.program.globals.contains_key(name)
        };
        if known {
            Ok(())
        } else {
            Err(FrontendError::UnknownIdentifier {
                line,
                name: name.to_owned(),
            })
        }
    }

    fn place(&self, e: &Expr, line: u32) -> Result<(), FrontendError> {
        match e {
            Expr::Var(_) | Expr::Field { .. } | Expr::Deref(_) | Expr::GuardDeref { .. } | Expr::GetMut { .. } => {
                self.expr(e, line, false)
            }
            Expr::Tuple(es) => es.iter().try_for_each(|x| match x {
                Expr::Wildcard => Ok(()),
                other => self.place(other, line),
            }),
            _ => Err(FrontendError::type_error(line, "left-hand side is not assignable")),
        }
    }

    fn expr(&self, e: &Expr, line: u32, top_level_stmt: bool) -> Result<(), FrontendError> {
        match e {
            Expr::IntLit(_) | Expr::Wildcard => Ok(()),
            Expr::Var(v) => self.var(v, line),
            Expr::Field { base, field, arrow } => {
                self.expr(base, line, false)?;
                let Some(def) = self.env.base_struct(base, *arrow) else {
                    let op = if *arrow { "->" } else { "." };
                    return Err(FrontendError::type_error(line, format!("`{op}{field}` applied to a non-struct")));
                };
                if def.field(field).is_none() {
                    return Err(FrontendError::UnknownIdentifier {
                        line,
                        name: format!("{}.{field}", def.name),
                    });
                }
                Ok(())
            }
            Expr::AddrOf { place, .. } => self.place(place, line),
            Expr::Deref(inner) => {
                self.expr(inner, line, false)?;
                match self.env.type_of(inner) {
                    Some(Type::Ptr(_)) => Ok(()),
                    _ => Err(FrontendError::type_error(line, "dereference of a non-pointer")),
                }
            }
            Expr::Binary { lhs, rhs, .. } => {
                self.expr(lhs, line, false)?;
                self.expr(rhs, line, false)
            }
            Expr::Call { name, args } => self.call(name, args, line, top_level_stmt),
            Expr::GuardDeref { guard, field } => {
                self.var(guard, line)?;
                if self.env.type_of(e).is_none() {
                    return Err(FrontendError::type_error(line, format!("guard `{guard}` has no payload field `{field}`")));
                }
                Ok(())
            }
            Expr::GetMut { lock, field } => {
                self.expr(lock, line, false)?;
                if self.env.type_of(e).is_none() {
                    return Err(FrontendError::type_error(line, format!("`get_mut().{field}` on a lock without that field")));
                }
                Ok(())
            }
            Expr::Acquire(lock) => {
                self.expr(lock, line, false)?;
                match self.env.type_of(lock) {
                    Some(t) if t.is_lock() => Ok(()),
                    _ => Err(FrontendError::type_error(line, "`acquire()` on a non-lock")),
                }
            }
            Expr::Tuple(es) => es.iter().try_for_each(|x| self.expr(x, line, false)),
        }
    }

    fn call(&self, name: &str, args: &[Expr], line: u32, top_level_stmt: bool) -> Result<(), FrontendError> {
        let lock_api = LOCK_API.contains(&name);
        if lock_api && !top_level_stmt {
            return Err(FrontendError::type_error(line, format!("`{name}` may only appear as a statement")));
        }
        match name {
            PTHREAD_MUTEX_LOCK | PTHREAD_MUTEX_UNLOCK | PTHREAD_MUTEX_INIT => {
                if args.len() != 1 {
                    return Err(FrontendError::type_error(line, format!("`{name}` takes exactly one argument")));
                }
                if let Expr::AddrOf { place, .. } = &args[0] {
                    self.place(place, line)?;
                }
                self.env
                    .lock_path_of(&args[0])
                    .map(|_| ())
                    .map_err(|_| FrontendError::type_error(line, format!("argument of `{name}` is not the address of a lock")))
            }
            PTHREAD_CREATE => {
                if args.len() != 2 {
                    return Err(FrontendError::type_error(line, "`pthread_create` takes a thread and a function"));
                }
                match &args[0] {
                    Expr::AddrOf { place, .. } if self.env.type_of(place) == Some(Type::Thread) => self.place(place, line)?,
                    _ => return Err(FrontendError::type_error(line, "first argument of `pthread_create` must be `&thread`")),
                }
                match &args[1] {
                    Expr::Var(f) if self.env.program.is_user_function(f) => Ok(()),
                    Expr::Var(f) => Err(FrontendError::UnknownIdentifier {
                        line,
                        name: f.clone(),
                    }),
                    _ => Err(FrontendError::type_error(line, "second argument of `pthread_create` must be a function name")),
                }
            }
            _ => {
                let Some(sig) = self.env.program.functions.get(name) else {
                    return Err(FrontendError::UnknownIdentifier {
                        line,
                        name: name.to_owned(),
                    });
                };
                if sig.params.len() != args.len() {
                    return Err(FrontendError::type_error(
                        line,
                        format!(
                            "`{name}` expects {} argument(s), got {} (in `{}`)",
                            sig.params.len(),
                            args.len(),
                            self.fname
                        ),
                    ));
                }
                args.iter().try_for_each(|a| self.expr(a, line, false))
            }
        }
    }
}

/// Rewrites `(*g).f` into `GuardDeref` wherever `g` is a guard variable.
pub(crate) fn lower_guard_derefs(p: &mut Program) {
    for item in &mut p.items {
        let Item::Function(f) = item else { continue };
        let mut guards: HashSet<String> = f.params.iter().filter(|p| p.ty.is_guard()).map(|p| p.name.clone()).collect();
        f.body.walk(&mut |s| {
            if let StmtKind::Decl { ty: Type::Guard(_), name, .. } = &s.kind {
                guards.insert(name.clone());
            }
        });
        if guards.is_empty() {
            continue;
        }
        lower_block(&mut f.body, &guards);
    }
}

fn lower_block(b: &mut Block, guards: &HashSet<String>) {
    for s in &mut b.stmts {
        match &mut s.kind {
            StmtKind::Decl { init, .. } => {
                if let Some(e) = init {
                    lower_expr(e, guards);
                }
            }
            StmtKind::Assign { place, value, .. } => {
                lower_expr(place, guards);
                lower_expr(value, guards);
            }
            StmtKind::Expr(e) => lower_expr(e, guards),
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                lower_expr(cond, guards);
                lower_block(then_block, guards);
                if let Some(b) = else_block {
                    lower_block(b, guards);
                }
            }
            StmtKind::While { cond, body } => {
                lower_expr(cond, guards);
                lower_block(body, guards);
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    lower_expr(e, guards);
                }
            }
            StmtKind::Block(b) => lower_block(b, guards),
            StmtKind::Drop(_) => {}
        }
    }
}

fn lower_expr(e: &mut Expr, guards: &HashSet<String>) {
    if let Expr::Field { base, field, arrow: false } = e {
        if let Expr::Deref(inner) = base.as_ref() {
            if let Expr::Var(g) = inner.as_ref() {
                if guards.contains(g) {
                    *e = Expr::GuardDeref {
                        guard: g.clone(),
                        field: field.clone(),
                    };
                    return;
                }
            }
        }
    }
    match e {
        Expr::Field { base, .. } => lower_expr(base, guards),
        Expr::AddrOf { place, .. } => lower_expr(place, guards),
        Expr::Deref(x) | Expr::Acquire(x) => lower_expr(x, guards),
        Expr::GetMut { lock, .. } => lower_expr(lock, guards),
        Expr::Binary { lhs, rhs, .. } => {
            lower_expr(lhs, guards);
            lower_expr(rhs, guards);
        }
        Expr::Call { args, .. } => args.iter_mut().for_each(|a| lower_expr(a, guards)),
        Expr::Tuple(es) => es.iter_mut().for_each(|a| lower_expr(a, guards)),
        _ => {}
    }
}
