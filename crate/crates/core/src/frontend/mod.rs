//! Mini-C front end: lexing, parsing, name resolution and printing.
//!
//! Mini-C is a small C subset with a pthread-style mutex API:
//!
//! ```text
//! program  := item*
//! item     := "struct" ID "{" (type ID ";")* "}" ";"?
//!           | type ID ("=" expr)? ";"
//!           | type ID "(" params ")" (block | ";")
//! type     := ("int" | "void" | "mutex_t" | "thread_t" | "struct" ID) "*"*
//! stmt     := block | type ID ("=" expr)? ";"
//!           | "if" "(" expr ")" body ("else" body)?
//!           | "while" "(" expr ")" body
//!           | "return" expr? ";"
//!           | expr ("=" | "+=" | "-=") expr ";"
//!           | expr ";"
//! expr     := sum (("==" | "!=" | "<" | "<=") sum)*
//! sum      := term (("+" | "-") term)*
//! term     := unary ("*" unary)*
//! unary    := "&" "mut"? unary | "*" unary | postfix
//! postfix  := primary ("." ID | "->" ID)*
//! primary  := INT | ID | ID "(" args ")" | "(" expr ")"
//! ```
//!
//! The guarded dialect (`.gmc`) extends this with `mutex<P>` / `guard<path>`
//! / tuple types, `lock.acquire()`, `lock.get_mut().f`, `(*g).f`,
//! `drop(g);`, tuple expressions and `_`.

pub mod ast;
mod error;
mod lexer;
pub mod lockpath;
mod parser;
mod printer;
pub mod resolve;

pub use ast::*;
pub use error::{FrontendError, NotALockPlace};
pub use lockpath::LockPath;
pub use parser::Dialect;
pub use printer::{print_expr, print_program};
pub use resolve::{FnEnv, ProgramEnv, Signature};

pub const PTHREAD_MUTEX_LOCK: &str = "pthread_mutex_lock";
pub const PTHREAD_MUTEX_UNLOCK: &str = "pthread_mutex_unlock";
pub const PTHREAD_MUTEX_INIT: &str = "pthread_mutex_init";
pub const PTHREAD_CREATE: &str = "pthread_create";

/// Library calls with built-in meaning; never call-graph nodes.
pub const LOCK_API: [&str; 4] = [PTHREAD_MUTEX_LOCK, PTHREAD_MUTEX_UNLOCK, PTHREAD_MUTEX_INIT, PTHREAD_CREATE];

/// Parses and checks a Mini-C program.
pub fn parse(source: &str) -> Result<Program, FrontendError> {
    let program = parse_unchecked(source, Dialect::MiniC)?;
    resolve::check_program(&program)?;
    Ok(program)
}

/// Parses and checks a program in the guarded dialect.
pub fn parse_guarded(source: &str) -> Result<Program, FrontendError> {
    let mut program = parse_unchecked(source, Dialect::Guarded)?;
    resolve::lower_guard_derefs(&mut program);
    resolve::check_program(&program)?;
    Ok(program)
}

/// Syntax only; no name resolution.
pub fn parse_unchecked(source: &str, dialect: Dialect) -> Result<Program, FrontendError> {
    let toks = lexer::tokenize(source)?;
    parser::Parser::new(toks, dialect).program()
}

/// Renders a Mini-C program back to source text.
pub fn print_source(p: &Program) -> String {
    print_program(p)
}
