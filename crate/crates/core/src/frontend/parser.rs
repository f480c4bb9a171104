//! Recursive-descent parser for Mini-C and the guarded dialect.

use super::ast::*;
use super::error::FrontendError;
use super::lexer::{Tok, Token};
use super::lockpath::LockPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dialect {
    MiniC,
    Guarded,
}

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    dialect: Dialect,
}

type PResult<T> = Result<T, FrontendError>;

impl Parser {
    pub(crate) fn new(toks: Vec<Token>, dialect: Dialect) -> Parser {
        Parser { toks, pos: 0, dialect }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn cur(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn line(&self) -> u32 {
        self.cur().line
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let t = self.cur();
        Err(FrontendError::syntax(t.line, t.col, message))
    }

    fn expect(&mut self, tok: Tok) -> PResult<Token> {
        if *self.peek() == tok {
            Ok(self.advance())
        } else {
            let found = self.peek().describe();
            self.error(format!("expected {}, found {found}", tok.describe()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            other => self.error(format!("expected identifier, found {}", other.describe())),
        }
    }

    fn guarded(&self) -> bool {
        self.dialect == Dialect::Guarded
    }

    fn is_contextual(&self, k: usize, word: &str) -> bool {
        matches!(self.peek_at(k), Tok::Ident(s) if s == word)
    }

    fn starts_type(&self) -> bool {
        match self.peek() {
            Tok::KwInt | Tok::KwVoid | Tok::KwMutex | Tok::KwThread | Tok::KwStruct => true,
            Tok::Ident(s) if self.guarded() && (s == "mutex" || s == "guard") => *self.peek_at(1) == Tok::Lt,
            _ => false,
        }
    }

    pub(crate) fn program(&mut self) -> PResult<Program> {
        let mut items = Vec::new();
        while *self.peek() != Tok::Eof {
            items.push(self.item()?);
        }
        Ok(Program { items })
    }

    fn item(&mut self) -> PResult<Item> {
        let line = self.line();
        if *self.peek() == Tok::KwStruct && *self.peek_at(2) == Tok::LBrace {
            self.advance();
            let name = self.ident()?;
            self.expect(Tok::LBrace)?;
            let mut fields = Vec::new();
            while *self.peek() != Tok::RBrace {
                let ty = self.ty()?;
                let fname = self.ident()?;
                self.expect(Tok::Semi)?;
                fields.push(FieldDef { name: fname, ty });
            }
            self.expect(Tok::RBrace)?;
            self.eat(&Tok::Semi);
            return Ok(Item::Struct(StructDef { name, fields, line }));
        }
        let starts_tuple = self.guarded() && *self.peek() == Tok::LParen;
        if !self.starts_type() && !starts_tuple {
            let found = self.peek().describe();
            return self.error(format!("expected a declaration, found {found}"));
        }
        let ty = self.ty()?;
        let name = self.ident()?;
        if *self.peek() == Tok::LParen {
            let params = self.params()?;
            if self.eat(&Tok::Semi) {
                return Ok(Item::Extern(ExternDecl { name, ret: ty, params, line }));
            }
            let body = self.block()?;
            let end = self.toks[self.pos.saturating_sub(1)].line;
            return Ok(Item::Function(FunctionDef {
                name,
                ret: ty,
                params,
                body,
                line_span: (line, end),
            }));
        }
        if let Type::Lock(payload) = &ty {
            let mut init = Vec::new();
            if self.eat(&Tok::Assign) {
                let lit = self.ident()?;
                if payload.as_deref() != Some(lit.as_str()) {
                    return self.error(format!("payload literal `{lit}` does not match the lock type"));
                }
                self.expect(Tok::LBrace)?;
                while *self.peek() != Tok::RBrace {
                    let field = self.ident()?;
                    let value = if self.eat(&Tok::Assign) { Some(self.expr()?) } else { None };
                    init.push((field, value));
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(Tok::RBrace)?;
            }
            self.expect(Tok::Semi)?;
            return Ok(Item::Lock(LockDecl {
                name,
                payload: payload.clone(),
                init,
                line,
            }));
        }
        let init = if self.eat(&Tok::Assign) { Some(self.expr()?) } else { None };
        self.expect(Tok::Semi)?;
        Ok(Item::Global(GlobalDecl { name, ty, init, line }))
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() == Tok::KwVoid && *self.peek_at(1) == Tok::RParen {
            self.advance();
        }
        while *self.peek() != Tok::RParen {
            let ty = self.ty()?;
            let name = self.ident()?;
            params.push(Param { name, ty });
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RParen)?;
        Ok(params)
    }

    fn ty(&mut self) -> PResult<Type> {
        let mut ty = match self.peek().clone() {
            Tok::KwInt => {
                self.advance();
                Type::Int
            }
            Tok::KwVoid => {
                self.advance();
                Type::Void
            }
            Tok::KwMutex => {
                self.advance();
                Type::Mutex
            }
            Tok::KwThread => {
                self.advance();
                Type::Thread
            }
            Tok::KwStruct => {
                self.advance();
                Type::Struct(self.ident()?)
            }
            Tok::Ident(s) if self.guarded() && s == "mutex" => {
                self.advance();
                self.expect(Tok::Lt)?;
                let payload = if *self.peek() == Tok::Gt { None } else { Some(self.ident()?) };
                self.expect(Tok::Gt)?;
                Type::Lock(payload)
            }
            Tok::Ident(s) if self.guarded() && s == "guard" => {
                self.advance();
                self.expect(Tok::Lt)?;
                let mut segs = vec![self.ident()?];
                while self.eat(&Tok::Dot) {
                    segs.push(self.ident()?);
                }
                self.expect(Tok::Gt)?;
                Type::Guard(LockPath::new(segs))
            }
            Tok::LParen if self.guarded() => {
                self.advance();
                let mut ts = vec![self.ty()?];
                while self.eat(&Tok::Comma) {
                    ts.push(self.ty()?);
                }
                self.expect(Tok::RParen)?;
                Type::Tuple(ts)
            }
            other => return self.error(format!("expected a type, found {}", other.describe())),
        };
        while self.eat(&Tok::Star) {
            ty = Type::ptr(ty);
        }
        Ok(ty)
    }

    fn block(&mut self) -> PResult<Block> {
        self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return self.error("unexpected end of input inside block");
            }
            stmts.push(self.stmt()?);
        }
        self.expect(Tok::RBrace)?;
        Ok(Block::new(stmts))
    }

    fn body(&mut self) -> PResult<Block> {
        if *self.peek() == Tok::LBrace {
            self.block()
        } else {
            Ok(Block::new(vec![self.stmt()?]))
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let line = self.line();
        let kind = match self.peek() {
            Tok::LBrace => StmtKind::Block(self.block()?),
            Tok::KwIf => {
                self.advance();
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                let then_block = self.body()?;
                let else_block = if self.eat(&Tok::KwElse) { Some(self.body()?) } else { None };
                StmtKind::If {
                    cond,
                    then_block,
                    else_block,
                }
            }
            Tok::KwWhile => {
                self.advance();
                self.expect(Tok::LParen)?;
                let cond = self.expr()?;
                self.expect(Tok::RParen)?;
                let body = self.body()?;
                StmtKind::While { cond, body }
            }
            Tok::KwReturn => {
                self.advance();
                let value = if *self.peek() == Tok::Semi { None } else { Some(self.expr()?) };
                self.expect(Tok::Semi)?;
                StmtKind::Return(value)
            }
            _ if self.starts_type() => {
                let ty = self.ty()?;
                let name = self.ident()?;
                let init = if self.eat(&Tok::Assign) { Some(self.expr()?) } else { None };
                self.expect(Tok::Semi)?;
                StmtKind::Decl { ty, name, init }
            }
            _ if self.guarded() && self.is_contextual(0, "drop") && *self.peek_at(1) == Tok::LParen => {
                self.advance();
                self.advance();
                let g = self.ident()?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::Semi)?;
                StmtKind::Drop(g)
            }
            _ => {
                let lhs = self.expr()?;
                let op = match self.peek() {
                    Tok::Assign => Some(AssignOp::Set),
                    Tok::PlusAssign => Some(AssignOp::Add),
                    Tok::MinusAssign => Some(AssignOp::Sub),
                    _ => None,
                };
                let kind = match op {
                    Some(op) => {
                        self.advance();
                        let value = self.expr()?;
                        StmtKind::Assign { place: lhs, op, value }
                    }
                    None => StmtKind::Expr(lhs),
                };
                self.expect(Tok::Semi)?;
                kind
            }
        };
        Ok(Stmt::new(line, kind))
    }

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.additive()?;
        loop {
            let op = match self.peek() {
                Tok::EqEq => BinOp::Eq,
                Tok::NotEq => BinOp::Ne,
                Tok::Lt => BinOp::Lt,
                Tok::Le => BinOp::Le,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.additive()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.multiplicative()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::Star) {
            let rhs = self.unary()?;
            lhs = Expr::Binary {
                op: BinOp::Mul,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn starts_operand(tok: &Tok) -> bool {
        matches!(tok, Tok::Ident(_) | Tok::Int(_) | Tok::LParen | Tok::Star | Tok::Amp)
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek() {
            Tok::Amp => {
                self.advance();
                let mutable = self.is_contextual(0, "mut") && Self::starts_operand(self.peek_at(1));
                if mutable {
                    self.advance();
                }
                let place = self.unary()?;
                Ok(Expr::AddrOf {
                    mutable,
                    place: Box::new(place),
                })
            }
            Tok::Star => {
                self.advance();
                Ok(Expr::Deref(Box::new(self.unary()?)))
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            match self.peek() {
                Tok::Dot => {
                    self.advance();
                    let name = self.ident()?;
                    if self.guarded() && *self.peek() == Tok::LParen && (name == "acquire" || name == "get_mut") {
                        self.advance();
                        self.expect(Tok::RParen)?;
                        if name == "acquire" {
                            e = Expr::Acquire(Box::new(e));
                        } else {
                            self.expect(Tok::Dot)?;
                            let field = self.ident()?;
                            e = Expr::GetMut {
                                lock: Box::new(e),
                                field,
                            };
                        }
                    } else {
                        e = Expr::field(e, name, false);
                    }
                }
                Tok::Arrow => {
                    self.advance();
                    let name = self.ident()?;
                    e = Expr::field(e, name, true);
                }
                _ => return Ok(e),
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(Expr::IntLit(n))
            }
            Tok::Ident(name) => {
                self.advance();
                if self.guarded() && name == "_" {
                    return Ok(Expr::Wildcard);
                }
                if self.eat(&Tok::LParen) {
                    let mut args = Vec::new();
                    while *self.peek() != Tok::RParen {
                        args.push(self.expr()?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Call { name, args })
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Tok::LParen => {
                self.advance();
                let first = self.expr()?;
                if self.guarded() && *self.peek() == Tok::Comma {
                    let mut es = vec![first];
                    while self.eat(&Tok::Comma) {
                        es.push(self.expr()?);
                    }
                    self.expect(Tok::RParen)?;
                    return Ok(Expr::Tuple(es));
                }
                self.expect(Tok::RParen)?;
                Ok(first)
            }
            other => self.error(format!("expected an expression, found {}", other.describe())),
        }
    }
}
