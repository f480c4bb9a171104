//! Browser bindings for the analyzer. Each export takes program text and
//! returns a JSON object with an `ok` flag; the page renders it.

use lockshift_core::frontend::{parse, parse_guarded};
use lockshift_core::guardcheck;
use lockshift_core::pipeline::{analyze, translate, Options};
use lockshift_core::summary::write_summary;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

fn failure(message: impl ToString) -> Value {
    json!({ "ok": false, "error": message.to_string() })
}

fn strings<T: ToString>(items: &[T]) -> Vec<String> {
    items.iter().map(ToString::to_string).collect()
}

/// Lock summary of a Mini-C program.
pub fn analyze_json(src: &str) -> Value {
    let program = match parse(src) {
        Ok(p) => p,
        Err(e) => return failure(e),
    };
    match analyze(&program, Options::default()) {
        Ok(a) => json!({
            "ok": true,
            "summary": write_summary(&a.summary),
            "diagnostics": strings(&a.diagnostics),
        }),
        Err(e) => failure(e),
    }
}

/// Guarded rewrite of a Mini-C program, with its ownership verdict.
pub fn transform_json(src: &str) -> Value {
    let program = match parse(src) {
        Ok(p) => p,
        Err(e) => return failure(e),
    };
    let mut a = match analyze(&program, Options::default()) {
        Ok(a) => a,
        Err(e) => return failure(e),
    };
    match translate(&program, &a.env, &a.summary, &mut a.timings) {
        Ok(t) => {
            let mut diagnostics = strings(&a.diagnostics);
            diagnostics.extend(strings(&t.diagnostics));
            json!({
                "ok": true,
                "output": t.text,
                "summary": write_summary(&a.summary),
                "diagnostics": diagnostics,
                "guard_errors": strings(&t.errors),
            })
        }
        Err(e) => failure(e),
    }
}

/// Ownership check of a guarded program.
pub fn check_json(src: &str) -> Value {
    match parse_guarded(src) {
        Ok(p) => {
            let errors = guardcheck::check_program(&p);
            json!({ "ok": true, "accepted": errors.is_empty(), "guard_errors": strings(&errors) })
        }
        Err(e) => failure(e),
    }
}

#[wasm_bindgen(js_name = analyze)]
pub fn analyze_js(src: &str) -> String {
    analyze_json(src).to_string()
}

#[wasm_bindgen(js_name = transform)]
pub fn transform_js(src: &str) -> String {
    transform_json(src).to_string()
}

#[wasm_bindgen(js_name = check)]
pub fn check_js(src: &str) -> String {
    check_json(src).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = "mutex_t m;\nint n;\nvoid f() {\n  pthread_mutex_lock(&m);\n  n = 1;\n  pthread_mutex_unlock(&m);\n}\n";

    #[test]
    fn analyze_reports_protection() {
        let v = analyze_json(SRC);
        assert_eq!(v["ok"], true);
        assert!(v["summary"].as_str().unwrap().contains(r#""n": "m""#), "{v}");
    }

    #[test]
    fn transform_emits_guards() {
        let v = transform_json(SRC);
        assert_eq!(v["ok"], true, "{v}");
        let out = v["output"].as_str().unwrap();
        assert!(out.contains("m.acquire()") && out.contains("drop(m_guard);"), "{out}");
        assert_eq!(v["guard_errors"], json!([]));
    }

    #[test]
    fn check_round_trips_transform_output() {
        let out = transform_json(SRC)["output"].as_str().unwrap().to_owned();
        assert_eq!(check_json(&out)["accepted"], true);
    }

    #[test]
    fn check_flags_use_after_drop() {
        let src = "struct d { int n; };\nmutex<d> m = d { n = 0 };\nvoid f() {\n  guard<m> g;\n  g = m.acquire();\n  drop(g);\n  (*g).n = 1;\n}\n";
        let v = check_json(src);
        assert_eq!(v["accepted"], false, "{v}");
        assert!(v["guard_errors"][0].as_str().unwrap().starts_with("7:"), "{v}");
    }

    #[test]
    fn syntax_errors_are_reported() {
        let v = analyze_json("void f( {");
        assert_eq!(v["ok"], false);
        assert!(v["error"].as_str().unwrap().contains("syntax error"));
    }

    #[test]
    fn exports_return_json_text() {
        let v: Value = serde_json::from_str(&check_js("")).unwrap();
        assert_eq!(v["accepted"], true);
    }
}
