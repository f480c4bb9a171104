//! One pass/fail line per acceptance criterion. Runs without the libtest
//! harness so the report is always printed; exits non-zero on any failure.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use lockshift_core::datalock::syntactic_accesses;
use lockshift_core::frontend::{parse, parse_guarded, resolve::check_program, LockPath, Program};
use lockshift_core::guardcheck::{self, GuardErrorKind};
use lockshift_core::pipeline::{analyze, translate, Options, Translation};
use lockshift_core::summary::{read_summary, write_summary, LockSummary};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn paths(names: &[&str]) -> BTreeSet<LockPath> {
    names.iter().map(|n| n.parse().unwrap()).collect()
}

fn corpus(name: &str) -> String {
    std::fs::read_to_string(common::fixture_dir("corpus").join(name)).unwrap()
}

fn full(p: &Program) -> Result<(LockSummary, Translation), String> {
    let mut a = analyze(p, Options::default()).map_err(|e| e.to_string())?;
    let t = translate(p, &a.env, &a.summary, &mut a.timings).map_err(|e| e.to_string())?;
    Ok((a.summary, t))
}

fn worked_examples() -> Outcome {
    // (fixture, function, expected MELS, expected MRLS); None = not asserted.
    type Case = (&'static str, &'static str, Option<&'static [&'static str]>, Option<&'static [&'static str]>);
    let cases: [Case; 9] = [
        ("unlock.mc", "unlock", Some(&["m"]), None),
        ("may_unlock.mc", "may_unlock", Some(&["m"]), None),
        ("lock.mc", "lock", None, Some(&["m"])),
        ("may_lock.mc", "may_lock", None, Some(&[])),
        ("unlock_and_lock.mc", "unlock_and_lock", Some(&["m"]), Some(&["m"])),
        ("unlock_twice.mc", "unlock2", Some(&["m"]), None),
        ("alias_param.mc", "lock_and_unlock", Some(&[]), None),
        ("recursive_unlock.mc", "unlock", Some(&["m"]), None),
        ("recursive_lock.mc", "lock", None, Some(&["m"])),
    ];
    for (file, func, mels, mrls) in cases {
        let p = parse(&corpus(file)).map_err(|e| format!("{file}: {e}"))?;
        let a = analyze(&p, Options::default()).map_err(|e| format!("{file}: {e}"))?;
        let facts = &a.flow.facts[func];
        if let Some(want) = mels {
            ensure(facts.mels.finite() == &paths(want), || format!("{file}: MELS {} != {want:?}", facts.mels))?;
        }
        if let Some(want) = mrls {
            ensure(facts.mrls.finite() == &paths(want), || format!("{file}: MRLS {} != {want:?}", facts.mrls))?;
        }
        if file.starts_with("recursive") {
            let scc = a.call_graph.scc_of(func).unwrap();
            let passes = a.flow.passes[scc];
            ensure(passes <= 2, || format!("{file}: {passes} fixpoint passes"))?;
        }
    }
    Ok("9 example functions, set equality".into())
}

fn end_to_end_pipeline() -> Outcome {
    let p = parse(&corpus("shared_counter.mc")).map_err(|e| e.to_string())?;
    let (summary, t) = full(&p)?;
    let golden = |name: &str| std::fs::read_to_string(common::fixture_dir("golden").join(name)).unwrap();

    ensure(summary.global_lock_map == BTreeMap::from([("n".into(), "m".into())]), || {
        format!("global_lock_map {:?}", summary.global_lock_map)
    })?;
    let s_map = BTreeMap::from([("n".to_owned(), "m".to_owned())]);
    ensure(summary.struct_lock_map == BTreeMap::from([("s".to_owned(), s_map)]), || {
        format!("struct_lock_map {:?}", summary.struct_lock_map)
    })?;
    let fm = &summary.function_map;
    ensure(fm["unlock"].entry_lock == paths(&["m"]) && fm["unlock"].return_lock.is_empty(), || "unlock".into())?;
    ensure(fm["lock"].return_lock == paths(&["m"]) && fm["lock"].entry_lock.is_empty(), || "lock".into())?;
    let foo = &fm["foo"].lock_line;
    ensure(foo.len() == 1 && foo[&"m".parse().unwrap()] == BTreeSet::from([16, 17]), || format!("foo.lock_line {foo:?}"))?;
    ensure(write_summary(&summary) == golden("shared_counter.summary.json"), || "summary differs from golden".into())?;

    ensure(t.text == golden("shared_counter.gmc"), || format!("guarded output differs from golden:\n{}", t.text))?;
    let line = |n: usize| t.text.lines().nth(n - 1).unwrap_or("").to_owned();
    let expect = [
        (1, "struct mData { int n; };"),
        (2, "mutex<mData> m = mData { n = 0 };"),
        (3, "struct smData { int n; };"),
        (7, "void unlock(guard<m> m_guard) { drop(m_guard); }"),
        (8, "guard<m> lock()"),
        (9, "return m_guard;"),
        (11, "m_guard = lock();"),
        (12, "unlock(m_guard);"),
        (14, "m.get_mut().n += 1;"),
        (16, "(*m_guard).n += 1;"),
    ];
    for (n, text) in expect {
        ensure(line(n).contains(text), || format!("line {n}: expected `{text}` in `{}`", line(n)))?;
    }
    ensure(t.errors.is_empty(), || format!("guardcheck: {:?}", t.errors))?;
    Ok("summary and guarded program match goldens".into())
}

fn guardcheck_acceptance() -> Outcome {
    let fixtures = common::fixtures("corpus", "mc");
    ensure(fixtures.len() >= 25, || format!("only {} corpus programs", fixtures.len()))?;
    for (name, src) in &fixtures {
        let p = parse(src).map_err(|e| format!("{name}: {e}"))?;
        let (_, t) = full(&p).map_err(|e| format!("{name}: {e}"))?;
        ensure(t.errors.is_empty(), || format!("{name}: {:?}", t.errors))?;
    }
    let rejected = [
        ("cond_acq.mc", GuardErrorKind::UseAfterMove),
        ("path_divergent.mc", GuardErrorKind::ConflictingPaths),
    ];
    for (name, kind) in rejected {
        let src = std::fs::read_to_string(common::fixture_dir("rejected").join(name)).unwrap();
        let p = parse(&src).map_err(|e| format!("{name}: {e}"))?;
        let (_, t) = full(&p)?;
        ensure(!t.errors.is_empty() && t.errors.iter().all(|e| e.kind == kind), || {
            format!("{name}: expected {kind:?}, got {:?}", t.errors)
        })?;
    }
    let src = std::fs::read_to_string(common::fixture_dir("rejected").join("conditional.gmc")).unwrap();
    let errors = guardcheck::check_program(&parse_guarded(&src).map_err(|e| e.to_string())?);
    ensure(errors.len() == 1 && errors[0].kind == GuardErrorKind::ConflictingPaths, || {
        format!("conditional.gmc: {errors:?}")
    })?;
    Ok(format!("{} corpus programs accepted, 3 failure fixtures rejected", fixtures.len()))
}

fn oracle_equivalence() -> Outcome {
    let mut compared = 0;
    for (name, src) in common::fixtures("corpus", "mc") {
        let p = parse(&src).map_err(|e| format!("{name}: {e}"))?;
        compared += common::oracle::compare(&p).map_err(|e| format!("{name}: {e}"))?;
    }
    ensure(compared > 0, || "no eligible functions".into())?;
    Ok(format!("{compared} loop-free call-free functions match path enumeration"))
}

fn structural_invariants() -> Outcome {
    let mut checked = 0;
    for (name, src) in common::fixtures("corpus", "mc") {
        let p = parse(&src).map_err(|e| format!("{name}: {e}"))?;
        let a = analyze(&p, Options::default()).map_err(|e| format!("{name}: {e}"))?;
        for (f, s) in &a.functions {
            ensure(s.mels.is_subset(&s.els), || format!("{name}/{f}: MELS not in ELS"))?;
            ensure(s.mrls.is_subset(&s.rls), || format!("{name}/{f}: MRLS not in RLS"))?;
            let lhs: BTreeSet<_> = s.els.difference(&s.mels).collect();
            let rhs: BTreeSet<_> = s.rls.difference(&s.mrls).collect();
            ensure(lhs == rhs, || format!("{name}/{f}: ELS-MELS != RLS-MRLS"))?;
        }
        let mut timings = a.timings.clone();
        let t = translate(&p, &a.env, &a.summary, &mut timings).map_err(|e| format!("{name}: {e}"))?;
        ensure(!t.text.contains("pthread_mutex_lock") && !t.text.contains("pthread_mutex_unlock"), || {
            format!("{name}: lock calls remain")
        })?;

        let guarded = parse_guarded(&t.text).map_err(|e| format!("{name}: {e}"))?;
        let genv = check_program(&guarded).map_err(|e| format!("{name}: {e}"))?;
        let key = |v: Vec<(String, u32, lockshift_core::datalock::RawAccess)>| {
            let mut v: Vec<_> = v.into_iter().map(|(f, l, a)| (f, l, a.target, a.kind)).collect();
            v.sort();
            v
        };
        let before = key(syntactic_accesses(&p, &a.env));
        let after = key(syntactic_accesses(&guarded, &genv));
        ensure(before == after, || format!("{name}: access multiset changed\n{before:?}\n{after:?}"))?;

        let text = write_summary(&a.summary);
        let back = read_summary(&text).map_err(|e| format!("{name}: {e}"))?;
        ensure(back == a.summary && write_summary(&back) == text, || format!("{name}: summary round trip"))?;
        checked += 1;
    }
    Ok(format!("{checked} programs"))
}

fn performance() -> Outcome {
    let src = common::synth::chained_program(5000);
    let n = common::synth::function_count(&src);
    ensure(n == 5000, || format!("generator produced {n} functions"))?;
    let start = Instant::now();
    let p = parse(&src).map_err(|e| e.to_string())?;
    let (_, t) = full(&p)?;
    let elapsed = start.elapsed();
    ensure(t.errors.is_empty(), || format!("synthetic program rejected: {:?}", &t.errors[..t.errors.len().min(3)]))?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("5000 functions in {:.2} s", elapsed.as_secs_f64()))
}

fn main() -> std::process::ExitCode {
    let criteria: [(&str, fn() -> Outcome); 6] = [
        ("1 worked examples", worked_examples),
        ("2 end-to-end pipeline", end_to_end_pipeline),
        ("3 guardcheck acceptance", guardcheck_acceptance),
        ("4 oracle equivalence", oracle_equivalence),
        ("5 structural invariants", structural_invariants),
        ("6 performance", performance),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                println!("FAIL criterion {name}: {why}");
                failed.push(name);
            }
        }
    }
    if failed.is_empty() {
        std::process::ExitCode::SUCCESS
    } else {
        eprintln!("failed: {failed:?}");
        std::process::ExitCode::FAILURE
    }
}
