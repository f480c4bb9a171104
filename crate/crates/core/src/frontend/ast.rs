//! Abstract syntax shared by Mini-C input and the guarded output dialect.
//!
//! The guarded forms (`Type::Lock`, `Type::Guard`, `Expr::GuardDeref`,
//! `Expr::GetMut`, `Expr::Acquire`, `StmtKind::Drop`, ...) never appear in a
//! program parsed as Mini-C; the transformer introduces them and the guarded
//! parser accepts them.

use std::fmt;

use super::lockpath::LockPath;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Type {
    Int,
    Void,
    Mutex,
    Thread,
    Struct(String),
    Ptr(Box<Type>),
    /// Data-owning lock; `None` when the lock protects nothing.
    Lock(Option<String>),
    /// A guard witnessing possession of the named lock.
    Guard(LockPath),
    Tuple(Vec<Type>),
}

impl Type {
    pub fn ptr(inner: Type) -> Type {
        Type::Ptr(Box::new(inner))
    }

    pub fn is_lock(&self) -> bool {
        matches!(self, Type::Mutex | Type::Lock(_))
    }

    pub fn is_guard(&self) -> bool {
        matches!(self, Type::Guard(_))
    }

    /// The struct named by `T` or `T*` (one level of indirection).
    pub fn struct_name(&self) -> Option<&str> {
        match self {
            Type::Struct(s) => Some(s),
            _ => None,
        }
    }

    pub fn pointee(&self) -> Option<&Type> {
        match self {
            Type::Ptr(t) => Some(t),
            _ => None,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => f.write_str("int"),
            Type::Void => f.write_str("void"),
            Type::Mutex => f.write_str("mutex_t"),
            Type::Thread => f.write_str("thread_t"),
            Type::Struct(s) => write!(f, "struct {s}"),
            Type::Ptr(t) => write!(f, "{t} *"),
            Type::Lock(None) => f.write_str("mutex<>"),
            Type::Lock(Some(p)) => write!(f, "mutex<{p}>"),
            Type::Guard(p) => write!(f, "guard<{p}>"),
            Type::Tuple(ts) => {
                f.write_str("(")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le => 1,
            BinOp::Add | BinOp::Sub => 2,
            BinOp::Mul => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    IntLit(i64),
    Var(String),
    /// `base.field` (`arrow == false`) or `base->field` (`arrow == true`).
    Field {
        base: Box<Expr>,
        field: String,
        arrow: bool,
    },
    AddrOf {
        mutable: bool,
        place: Box<Expr>,
    },
    Deref(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Call {
        name: String,
        args: Vec<Expr>,
    },
    /// `(*guard).field`
    GuardDeref {
        guard: String,
        field: String,
    },
    /// `lock.get_mut().field`
    GetMut {
        lock: Box<Expr>,
        field: String,
    },
    /// `lock.acquire()`
    Acquire(Box<Expr>),
    Tuple(Vec<Expr>),
    /// `_` on the left of a destructuring assignment.
    Wildcard,
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn field(base: Expr, field: impl Into<String>, arrow: bool) -> Expr {
        Expr::Field {
            base: Box::new(base),
            field: field.into(),
            arrow,
        }
    }

    pub fn call(name: impl Into<String>, args: Vec<Expr>) -> Expr {
        Expr::Call {
            name: name.into(),
            args,
        }
    }

    /// Visits every call in evaluation order (arguments before the call).
    pub fn for_each_call<'a>(&'a self, f: &mut impl FnMut(&'a str, &'a [Expr])) {
        match self {
            Expr::IntLit(_) | Expr::Var(_) | Expr::GuardDeref { .. } | Expr::Wildcard => {}
            Expr::Field { base, .. } => base.for_each_call(f),
            Expr::AddrOf { place, .. } => place.for_each_call(f),
            Expr::Deref(e) | Expr::Acquire(e) => e.for_each_call(f),
            Expr::GetMut { lock, .. } => lock.for_each_call(f),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.for_each_call(f);
                rhs.for_each_call(f);
            }
            Expr::Call { name, args } => {
                for a in args {
                    a.for_each_call(f);
                }
                f(name, args);
            }
            Expr::Tuple(es) => {
                for e in es {
                    e.for_each_call(f);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
}

impl AssignOp {
    pub fn symbol(self) -> &'static str {
        match self {
            AssignOp::Set => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
        }
    }

    pub fn bin_op(self) -> Option<BinOp> {
        match self {
            AssignOp::Set => None,
            AssignOp::Add => Some(BinOp::Add),
            AssignOp::Sub => Some(BinOp::Sub),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Block {
    pub stmts: Vec<Stmt>,
}

impl Block {
    pub fn new(stmts: Vec<Stmt>) -> Block {
        Block { stmts }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Stmt {
    pub line: u32,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StmtKind {
    Decl {
        ty: Type,
        name: String,
        init: Option<Expr>,
    },
    Assign {
        place: Expr,
        op: AssignOp,
        value: Expr,
    },
    Expr(Expr),
    If {
        cond: Expr,
        then_block: Block,
        else_block: Option<Block>,
    },
    While {
        cond: Expr,
        body: Block,
    },
    Return(Option<Expr>),
    Block(Block),
    /// `drop(guard);`
    Drop(String),
}

impl Stmt {
    pub fn new(line: u32, kind: StmtKind) -> Stmt {
        Stmt { line, kind }
    }

    /// Expressions evaluated by this statement itself, excluding nested
    /// statements, in evaluation order.
    pub fn own_exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Decl { init, .. } => init.iter().collect(),
            StmtKind::Assign { place, value, .. } => vec![value, place],
            StmtKind::Expr(e) => vec![e],
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            StmtKind::Return(e) => e.iter().collect(),
            StmtKind::Block(_) | StmtKind::Drop(_) => vec![],
        }
    }

    /// Visits the statement and all nested statements in pre-order.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        match &self.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                then_block.walk(f);
                if let Some(b) = else_block {
                    b.walk(f);
                }
            }
            StmtKind::While { body, .. } => body.walk(f),
            StmtKind::Block(b) => b.walk(f),
            _ => {}
        }
    }
}

impl Block {
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        for s in &self.stmts {
            s.walk(f);
        }
    }

    /// Whether control can reach the end of the block without a `return`.
    pub fn falls_through(&self) -> bool {
        for s in &self.stmts {
            match &s.kind {
                StmtKind::Return(_) => return false,
                StmtKind::If {
                    then_block,
                    else_block: Some(e),
                    ..
                } if !then_block.falls_through() && !e.falls_through() => return false,
                StmtKind::Block(b) if !b.falls_through() => return false,
                _ => {}
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FunctionDef {
    pub name: String,
    pub ret: Type,
    pub params: Vec<Param>,
    pub body: Block,
    /// First and last source line (1-based).
    pub line_span: (u32, u32),
}

impl FunctionDef {
    pub fn param_names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    /// All statements of the body in pre-order.
    pub fn statements(&self) -> Vec<&Stmt> {
        let mut out = Vec::new();
        self.body.walk(&mut |s| out.push(s));
        out
    }
}

/// A body-less prototype; calls to it are library calls.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExternDecl {
    pub name: String,
    pub ret: Type,
    pub params: Vec<Param>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GlobalDecl {
    pub name: String,
    pub ty: Type,
    pub init: Option<Expr>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldDef {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StructDef {
    pub name: String,
    pub fields: Vec<FieldDef>,
    pub line: u32,
}

impl StructDef {
    pub fn field(&self, name: &str) -> Option<&FieldDef> {
        self.fields.iter().find(|f| f.name == name)
    }
}

/// A data-owning lock: `mutex<Payload> m = Payload { a = 0, b };`
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LockDecl {
    pub name: String,
    pub payload: Option<String>,
    /// Payload field initializers; `None` leaves the field default-initialized.
    pub init: Vec<(String, Option<Expr>)>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Item {
    Struct(StructDef),
    Global(GlobalDecl),
    Lock(LockDecl),
    Extern(ExternDecl),
    Function(FunctionDef),
}

impl Item {
    pub fn line(&self) -> u32 {
        match self {
            Item::Struct(s) => s.line,
            Item::Global(g) => g.line,
            Item::Lock(l) => l.line,
            Item::Extern(e) => e.line,
            Item::Function(f) => f.line_span.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Program {
    pub items: Vec<Item>,
}

impl Program {
    pub fn globals(&self) -> impl Iterator<Item = &GlobalDecl> {
        self.items.iter().filter_map(|i| match i {
            Item::Global(g) => Some(g),
            _ => None,
        })
    }

    pub fn structs(&self) -> impl Iterator<Item = &StructDef> {
        self.items.iter().filter_map(|i| match i {
            Item::Struct(s) => Some(s),
            _ => None,
        })
    }

    pub fn functions(&self) -> impl Iterator<Item = &FunctionDef> {
        self.items.iter().filter_map(|i| match i {
            Item::Function(f) => Some(f),
            _ => None,
        })
    }

    pub fn locks(&self) -> impl Iterator<Item = &LockDecl> {
        self.items.iter().filter_map(|i| match i {
            Item::Lock(l) => Some(l),
            _ => None,
        })
    }

    pub fn externs(&self) -> impl Iterator<Item = &ExternDecl> {
        self.items.iter().filter_map(|i| match i {
            Item::Extern(e) => Some(e),
            _ => None,
        })
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions().find(|f| f.name == name)
    }

    pub fn struct_def(&self, name: &str) -> Option<&StructDef> {
        self.structs().find(|s| s.name == name)
    }

    pub fn global(&self, name: &str) -> Option<&GlobalDecl> {
        self.globals().find(|g| g.name == name)
    }
}
