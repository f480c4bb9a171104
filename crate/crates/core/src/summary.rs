//! The whole-program lock summary and its JSON form.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::datalock::{ProtectionVerdict, Target};
use crate::frontend::{FnEnv, LockPath, Program, ProgramEnv, Type};
use crate::propagation::FunctionFlowSummary;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSummary {
    #[serde(default)]
    pub entry_lock: BTreeSet<LockPath>,
    #[serde(default)]
    pub return_lock: BTreeSet<LockPath>,
    #[serde(default)]
    pub lock_line: BTreeMap<LockPath, BTreeSet<u32>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockSummary {
    /// Global variable -> global lock.
    #[serde(default)]
    pub global_lock_map: BTreeMap<String, String>,
    /// Struct -> field -> sibling lock field.
    #[serde(default)]
    pub struct_lock_map: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default)]
    pub function_map: BTreeMap<String, FunctionSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct SchemaError {
    /// JSON path of the offending value, `.` for the root.
    pub path: String,
    pub message: String,
}

impl SchemaError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> SchemaError {
        SchemaError {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub fn build_summary(verdicts: &[ProtectionVerdict], flow: &BTreeMap<String, FunctionFlowSummary>) -> LockSummary {
    let mut s = LockSummary::default();
    for v in verdicts.iter().filter(|v| v.protected) {
        let Some(lock) = &v.candidate else { continue };
        match &v.target {
            Target::Global(g) => {
                s.global_lock_map.insert(g.clone(), lock.clone());
            }
            Target::Field { strukt, field } => {
                s.struct_lock_map
                    .entry(strukt.clone())
                    .or_default()
                    .insert(field.clone(), lock.clone());
            }
        }
    }
    for (name, f) in flow {
        s.function_map.insert(
            name.clone(),
            FunctionSummary {
                entry_lock: f.els.clone(),
                return_lock: f.rls.clone(),
                lock_line: f
                    .lock_line
                    .iter()
                    .map(|(k, v)| (k.clone(), v.iter().copied().collect()))
                    .collect(),
            },
        );
    }
    s
}

pub fn read_summary(json: &str) -> Result<LockSummary, SchemaError> {
    let de = &mut serde_json::Deserializer::from_str(json);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        SchemaError::at(path, e.into_inner().to_string())
    })
}

/// Canonical text: two-space indentation, sorted keys, trailing newline.
pub fn write_summary(s: &LockSummary) -> String {
    let mut out = serde_json::to_string_pretty(s).expect("summary serializes");
    out.push('\n');
    out
}

/// Checks that every name in the summary exists in `p` with the right kind.
pub fn validate(s: &LockSummary, p: &Program, env: &ProgramEnv) -> Result<(), SchemaError> {
    let is_lock_global = |name: &str| env.globals.get(name).is_some_and(Type::is_lock);
    for (var, lock) in &s.global_lock_map {
        let path = format!("global_lock_map.{var}");
        match env.globals.get(var) {
            None => return Err(SchemaError::at(path, format!("no global `{var}`"))),
            Some(t) if t.is_lock() => return Err(SchemaError::at(path, format!("`{var}` is a lock"))),
            _ => {}
        }
        if !is_lock_global(lock) {
            return Err(SchemaError::at(path, format!("no global lock `{lock}`")));
        }
    }
    for (strukt, fields) in &s.struct_lock_map {
        let Some(def) = env.structs.get(strukt) else {
            return Err(SchemaError::at(format!("struct_lock_map.{strukt}"), format!("no struct `{strukt}`")));
        };
        for (field, lock) in fields {
            let path = format!("struct_lock_map.{strukt}.{field}");
            match def.field(field) {
                None => return Err(SchemaError::at(path, format!("no field `{strukt}.{field}`"))),
                Some(f) if f.ty.is_lock() => return Err(SchemaError::at(path, format!("`{strukt}.{field}` is a lock"))),
                _ => {}
            }
            if !def.field(lock).is_some_and(|f| f.ty.is_lock()) {
                return Err(SchemaError::at(path, format!("no lock field `{strukt}.{lock}`")));
            }
        }
    }
    for (fname, fs) in &s.function_map {
        let base = format!("function_map.{fname}");
        let Some(f) = p.function(fname) else {
            return Err(SchemaError::at(base, format!("no function `{fname}`")));
        };
        let fenv = FnEnv::of(env, f);
        let check = |lock: &LockPath, path: String| -> Result<(), SchemaError> {
            if fenv.path_type(lock).is_some_and(|t| t.is_lock()) {
                Ok(())
            } else {
                Err(SchemaError::at(path, format!("`{lock}` is not a lock in `{fname}`")))
            }
        };
        for l in &fs.entry_lock {
            check(l, format!("{base}.entry_lock"))?;
        }
        for l in &fs.return_lock {
            check(l, format!("{base}.return_lock"))?;
        }
        for (l, lines) in &fs.lock_line {
            let path = format!("{base}.lock_line.{l}");
            check(l, path.clone())?;
            let (lo, hi) = f.line_span;
            if let Some(bad) = lines.iter().find(|n| **n < lo || **n > hi) {
                return Err(SchemaError::at(path, format!("line {bad} is outside `{fname}` ({lo}-{hi})")));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;
    use crate::frontend::resolve::check_program;

    const SUMMARY_TEXT: &str = r#"{ "global_lock_map": { "n": "m" },
  "struct_lock_map": { "s": { "n": "m" } },
  "function_map": {
    "unlock": {
      "entry_lock": ["m"], "return_lock": [] },
    "lock": {
      "entry_lock": [], "return_lock": ["m"] },
    "foo": { "lock_line": { "m": [16, 17] } }
    }}"#;

    #[test]
    fn summary_text_parses_and_round_trips() {
        let s = read_summary(SUMMARY_TEXT).unwrap();
        assert_eq!(s.global_lock_map["n"], "m");
        assert_eq!(s.struct_lock_map["s"]["n"], "m");
        let foo = &s.function_map["foo"];
        assert_eq!(foo.lock_line[&"m".parse().unwrap()], BTreeSet::from([16, 17]));
        let text = write_summary(&s);
        assert_eq!(read_summary(&text).unwrap(), s);
        assert_eq!(write_summary(&read_summary(&text).unwrap()), text);
    }

    #[test]
    fn empty_object_is_empty_summary() {
        assert_eq!(read_summary("{}").unwrap(), LockSummary::default());
    }

    #[test]
    fn canonical_form_is_sorted_two_space() {
        let s = read_summary(r#"{"function_map": {"b": {}, "a": {"entry_lock": ["y", "x", "x"]}}}"#).unwrap();
        let text = write_summary(&s);
        assert!(text.starts_with("{\n  \"global_lock_map\": {},"));
        let a = text.find("\"a\"").unwrap();
        let b = text.find("\"b\"").unwrap();
        assert!(a < b);
        assert!(text.contains("\"x\",\n        \"y\""), "{text}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let err = read_summary(r#"{"function_map": {"f": {"entry_locks": []}}}"#).unwrap_err();
        assert_eq!(err.path, "function_map.f.entry_locks");
        let err = read_summary(r#"{"global_lock_map": {"n": 3}}"#).unwrap_err();
        assert_eq!(err.path, "global_lock_map.n");
        let err = read_summary(r#"{"function_map": {"f": {"entry_lock": ["a..b"]}}}"#).unwrap_err();
        assert!(err.path.starts_with("function_map.f.entry_lock"));
    }

    #[test]
    fn validation_against_program() {
        let p = parse("int n; mutex_t m; void f() { pthread_mutex_lock(&m); n = 1; pthread_mutex_unlock(&m); }").unwrap();
        let env = check_program(&p).unwrap();
        let ok = read_summary(r#"{"global_lock_map": {"n": "m"}, "function_map": {"f": {"lock_line": {"m": [1]}}}}"#).unwrap();
        validate(&ok, &p, &env).unwrap();
        let bad = read_summary(r#"{"global_lock_map": {"n": "q"}}"#).unwrap();
        assert_eq!(validate(&bad, &p, &env).unwrap_err().path, "global_lock_map.n");
        let bad = read_summary(r#"{"function_map": {"f": {"entry_lock": ["k"]}}}"#).unwrap();
        assert_eq!(validate(&bad, &p, &env).unwrap_err().path, "function_map.f.entry_lock");
        let bad = read_summary(r#"{"function_map": {"g": {}}}"#).unwrap();
        assert!(validate(&bad, &p, &env).is_err());
    }
}
