use super::*;
use crate::frontend::{parse, parse_guarded};
use crate::pipeline::{analyze, Options};

fn guarded(src: &str) -> (String, Vec<Diagnostic>) {
    let p = parse(src).unwrap();
    let a = analyze(&p, Options::default()).unwrap();
    let out = transform(&p, &a.env, &a.summary).unwrap();
    let text = print_guarded(&out.program);
    parse_guarded(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    (text, out.diagnostics)
}

fn line(text: &str, n: usize) -> &str {
    text.lines().nth(n - 1).unwrap_or("").trim()
}

#[test]
fn shared_counter_structure() {
    let (text, diags) = guarded(include_str!("../../fixtures/corpus/shared_counter.mc"));
    println!("{text}");
    assert!(diags.is_empty(), "{diags:?}");
    assert!(line(&text, 1).starts_with("struct mData { int n; }"), "{text}");
    assert!(line(&text, 2).starts_with("mutex<mData> m = mData { n = 0 };"), "{text}");
    assert!(line(&text, 3).contains("struct smData { int n; }"), "{text}");
    assert!(line(&text, 3).contains("struct s { mutex<smData> m; }"), "{text}");
    assert!(text.contains("void unlock(guard<m> m_guard)"), "{text}");
    assert!(text.contains("guard<m> lock()"), "{text}");
    assert!(line(&text, 9).contains("m_guard = m.acquire();"), "{text}");
    assert!(line(&text, 9).contains("return m_guard;"), "{text}");
    assert!(line(&text, 11).contains("m_guard = lock();"), "{text}");
    assert!(line(&text, 12).contains("(*m_guard).n += 1;"), "{text}");
    assert!(line(&text, 12).contains("unlock(m_guard);"), "{text}");
    assert!(line(&text, 14).contains("m.get_mut().n += 1;"), "{text}");
    assert!(line(&text, 16).contains("(*m_guard).n += 1;"), "{text}");
    assert!(line(&text, 17).contains("drop(m_guard);"), "{text}");
    assert!(line(&text, 22).contains("(*x_m_guard).n += 1;"), "{text}");
}

#[test]
fn lock_free_program_is_unchanged_up_to_printing() {
    let src = "int a;\nint f(int x) {\n    return x + a;\n}\n";
    let p = parse(src).unwrap();
    let (text, _) = guarded(src);
    assert_eq!(text, print_program(&p));
}

#[test]
fn unprotected_lock_becomes_empty_mutex() {
    let (text, _) = guarded("mutex_t m; void f() { pthread_mutex_lock(&m); pthread_mutex_unlock(&m); }");
    assert!(text.contains("mutex<> m;"), "{text}");
    assert!(text.contains("m_guard = m.acquire(); drop(m_guard);"), "{text}");
}

#[test]
fn init_calls_are_deleted() {
    let (text, _) = guarded(
        "struct s { int n; mutex_t m; }; struct s g; \
         void f() { pthread_mutex_init(&g.m); pthread_mutex_lock(&g.m); g.n = 1; pthread_mutex_unlock(&g.m); }",
    );
    assert!(!text.contains("init"), "{text}");
    assert!(text.contains("(*g_m_guard).n = 1;"), "{text}");
}

#[test]
fn returned_guard_and_value_destructure() {
    let src = "int n; mutex_t m;\n\
               int get() { pthread_mutex_lock(&m); return n; }\n\
               void f() { int v = get(); n = v; pthread_mutex_unlock(&m); }\n";
    let (text, _) = guarded(src);
    assert!(text.contains("(int, guard<m>) get()"), "{text}");
    assert!(text.contains("return ((*m_guard).n, m_guard);"), "{text}");
    assert!(text.contains("int v; (v, m_guard) = get();"), "{text}");
}

#[test]
fn nested_guard_returning_call_is_hoisted() {
    let src = "int n; mutex_t m;\n\
               int get() { pthread_mutex_lock(&m); return n; }\n\
               int id(int x) { return x; }\n\
               void f() { int v = id(get()); pthread_mutex_unlock(&m); }\n";
    let (text, _) = guarded(src);
    assert!(text.contains("int tmp;"), "{text}");
    assert!(text.contains("(int, guard<m>) id(int x, guard<m> m_guard)"), "{text}");
    assert!(text.contains("(tmp, m_guard) = get(); int v; (v, m_guard) = id(tmp, m_guard);"), "{text}");
}

#[test]
fn parameter_paths_are_renamed_at_call_sites() {
    let src = "struct s { int n; mutex_t m; };\n\
               void inc(struct s *p) { p->n += 1; }\n\
               void f(struct s *x) { pthread_mutex_lock(&x->m); inc(x); pthread_mutex_unlock(&x->m); }\n";
    let (text, _) = guarded(src);
    assert!(text.contains("guard<p.m> inc(struct s *p, guard<p.m> p_m_guard)"), "{text}");
    assert!(text.contains("(*p_m_guard).n += 1; return p_m_guard;"), "{text}");
    assert!(text.contains("x_m_guard = inc(x, x_m_guard);"), "{text}");
}

#[test]
fn guard_names_avoid_collisions() {
    let src = "int n; mutex_t m; int m_guard;\n\
               void f() { pthread_mutex_lock(&m); n = m_guard; pthread_mutex_unlock(&m); }\n";
    let (text, _) = guarded(src);
    assert!(text.contains("m_guard_1 = m.acquire();"), "{text}");
    assert!(text.contains("(*m_guard_1).n = m_guard;"), "{text}");
}

#[test]
fn mismatched_summary_is_rejected() {
    let p = parse("int n; void f() { n = 1; }").unwrap();
    let env = crate::frontend::resolve::check_program(&p).unwrap();
    let s = crate::summary::read_summary(r#"{"global_lock_map": {"n": "q"}}"#).unwrap();
    assert!(matches!(transform(&p, &env, &s), Err(TransformError::SummaryMismatch(_))));
}

#[test]
fn payload_place_is_stored_through_a_temporary() {
    let src = "int n; mutex_t m;\n\
               void lk() { pthread_mutex_lock(&m); }\n\
               int get() { pthread_mutex_lock(&m); return 1; }\n\
               void f() { lk(); n = 2; pthread_mutex_unlock(&m); n = get(); pthread_mutex_unlock(&m); }\n";
    let (text, _) = guarded(src);
    assert!(text.contains("(tmp, m_guard) = get(); (*m_guard).n = tmp;"), "{text}");
}
