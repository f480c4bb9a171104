mod common;

use lockshift_core::frontend::parse;
use lockshift_core::pipeline::{analyze, translate, Options};

#[test]
fn every_corpus_program_transforms_and_checks() {
    let mut failures = Vec::new();
    for (name, src) in common::fixtures("corpus", "mc") {
        let p = parse(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
        let mut a = analyze(&p, Options::default()).unwrap_or_else(|e| panic!("{name}: {e}"));
        let t = translate(&p, &a.env, &a.summary, &mut a.timings).unwrap_or_else(|e| panic!("{name}: {e}"));
        if !t.errors.is_empty() {
            failures.push(format!("{name}: {:?}\n{}", t.errors, t.text));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n\n"));
}
