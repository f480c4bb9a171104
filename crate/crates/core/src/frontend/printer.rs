//! Line-preserving pretty printer for both dialects.
//!
//! Every item and statement is placed on its recorded source line when that
//! line has not been passed yet; otherwise it continues the current line.
//! Parsing the output therefore reproduces the original line numbers.

use super::ast::*;

pub fn print_program(p: &Program) -> String {
    let mut pr = Printer::default();
    for item in &p.items {
        pr.item(item);
    }
    let mut out = pr.out;
    if !out.is_empty() {
        out.push('\n');
    }
    out
}

pub fn print_expr(e: &Expr) -> String {
    expr_str(e, 0)
}

#[derive(Default)]
struct Printer {
    out: String,
    line: u32,
    depth: usize,
    line_empty: bool,
}

impl Printer {
    fn emit(&mut self, target: u32, text: &str) {
        if self.line == 0 {
            self.line = 1;
            self.line_empty = true;
        }
        while self.line < target {
            self.out.push('\n');
            self.line += 1;
            self.line_empty = true;
        }
        if self.line_empty {
            for _ in 0..self.depth {
                self.out.push_str("    ");
            }
            self.line_empty = false;
        } else {
            self.out.push(' ');
        }
        self.out.push_str(text);
    }

    fn here(&mut self, text: &str) {
        let l = self.line;
        self.emit(l, text);
    }

    fn item(&mut self, item: &Item) {
        match item {
            Item::Struct(s) => {
                let fields: Vec<String> = s.fields.iter().map(|f| format!("{};", decl(&f.ty, &f.name))).collect();
                let body = if fields.is_empty() {
                    String::new()
                } else {
                    format!(" {}", fields.join(" "))
                };
                self.emit(s.line, &format!("struct {} {{{body} }};", s.name));
            }
            Item::Global(g) => {
                let text = match &g.init {
                    Some(e) => format!("{} = {};", decl(&g.ty, &g.name), expr_str(e, 0)),
                    None => format!("{};", decl(&g.ty, &g.name)),
                };
                self.emit(g.line, &text);
            }
            Item::Lock(l) => {
                let ty = Type::Lock(l.payload.clone());
                let text = match &l.payload {
                    Some(payload) if !l.init.is_empty() => {
                        let inits: Vec<String> = l
                            .init
                            .iter()
                            .map(|(f, v)| match v {
                                Some(v) => format!("{f} = {}", expr_str(v, 0)),
                                None => f.clone(),
                            })
                            .collect();
                        format!("{} = {payload} {{ {} }};", decl(&ty, &l.name), inits.join(", "))
                    }
                    _ => format!("{};", decl(&ty, &l.name)),
                };
                self.emit(l.line, &text);
            }
            Item::Extern(e) => {
                let text = format!("{}({});", decl(&e.ret, &e.name), params_str(&e.params));
                self.emit(e.line, &text);
            }
            Item::Function(f) => {
                let text = format!("{}({}) {{", decl(&f.ret, &f.name), params_str(&f.params));
                self.emit(f.line_span.0, &text);
                self.depth += 1;
                for s in &f.body.stmts {
                    self.stmt(s);
                }
                self.depth -= 1;
                self.emit(f.line_span.1, "}");
            }
        }
    }

    fn block_body(&mut self, b: &Block) {
        self.depth += 1;
        for s in &b.stmts {
            self.stmt(s);
        }
        self.depth -= 1;
        self.here("}");
    }

    fn stmt(&mut self, s: &Stmt) {
        let line = s.line;
        match &s.kind {
            StmtKind::Decl { ty, name, init } => {
                let text = match init {
                    Some(e) => format!("{} = {};", decl(ty, name), expr_str(e, 0)),
                    None => format!("{};", decl(ty, name)),
                };
                self.emit(line, &text);
            }
            StmtKind::Assign { place, op, value } => {
                let text = format!("{} {} {};", expr_str(place, 0), op.symbol(), expr_str(value, 0));
                self.emit(line, &text);
            }
            StmtKind::Expr(e) => self.emit(line, &format!("{};", expr_str(e, 0))),
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                self.emit(line, &format!("if ({}) {{", expr_str(cond, 0)));
                self.block_body(then_block);
                if let Some(b) = else_block {
                    self.here("else {");
                    self.block_body(b);
                }
            }
            StmtKind::While { cond, body } => {
                self.emit(line, &format!("while ({}) {{", expr_str(cond, 0)));
                self.block_body(body);
            }
            StmtKind::Return(None) => self.emit(line, "return;"),
            StmtKind::Return(Some(e)) => self.emit(line, &format!("return {};", expr_str(e, 0))),
            StmtKind::Block(b) => {
                self.emit(line, "{");
                self.block_body(b);
            }
            StmtKind::Drop(g) => self.emit(line, &format!("drop({g});")),
        }
    }
}

fn params_str(params: &[Param]) -> String {
    params.iter().map(|p| decl(&p.ty, &p.name)).collect::<Vec<_>>().join(", ")
}

fn base_and_stars(ty: &Type) -> (String, usize) {
    match ty {
        Type::Ptr(inner) => {
            let (b, n) = base_and_stars(inner);
            (b, n + 1)
        }
        other => (other.to_string(), 0),
    }
}

/// `struct s *x`
pub(crate) fn decl(ty: &Type, name: &str) -> String {
    let (base, stars) = base_and_stars(ty);
    format!("{base} {}{name}", "*".repeat(stars))
}

const PREC_UNARY: u8 = 4;
const PREC_POSTFIX: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op, .. } => op.precedence(),
        Expr::AddrOf { .. } | Expr::Deref(_) => PREC_UNARY,
        _ => PREC_POSTFIX + 1,
    }
}

fn expr_str(e: &Expr, min_prec: u8) -> String {
    let s = match e {
        Expr::IntLit(n) => n.to_string(),
        Expr::Var(v) => v.clone(),
        Expr::Field { base, field, arrow } => {
            format!("{}{}{field}", expr_str(base, PREC_POSTFIX), if *arrow { "->" } else { "." })
        }
        Expr::AddrOf { mutable, place } => {
            format!("&{}{}", if *mutable { "mut " } else { "" }, expr_str(place, PREC_UNARY))
        }
        Expr::Deref(inner) => format!("*{}", expr_str(inner, PREC_UNARY)),
        Expr::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            format!("{} {} {}", expr_str(lhs, p), op.symbol(), expr_str(rhs, p + 1))
        }
        Expr::Call { name, args } => {
            let args: Vec<String> = args.iter().map(|a| expr_str(a, 0)).collect();
            format!("{name}({})", args.join(", "))
        }
        Expr::GuardDeref { guard, field } => format!("(*{guard}).{field}"),
        Expr::GetMut { lock, field } => format!("{}.get_mut().{field}", expr_str(lock, PREC_POSTFIX)),
        Expr::Acquire(lock) => format!("{}.acquire()", expr_str(lock, PREC_POSTFIX)),
        Expr::Tuple(es) => {
            let parts: Vec<String> = es.iter().map(|a| expr_str(a, 0)).collect();
            format!("({})", parts.join(", "))
        }
        Expr::Wildcard => "_".to_owned(),
    };
    if prec(e) < min_prec {
        format!("({s})")
    } else {
        s
    }
}
