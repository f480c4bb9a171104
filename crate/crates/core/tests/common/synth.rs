//! Large generated programs for scalability checks.

use std::fmt::Write;

/// A program with `functions` functions in one call chain over ten locks.
///
/// Shapes rotate between a direct critical section, a critical section
/// around a helper that touches the data, and acquisition through
/// lock/unlock helper functions.
pub fn chained_program(functions: usize) -> String {
    const LOCKS: usize = 10;
    let mut s = String::new();
    for k in 0..LOCKS {
        let _ = writeln!(s, "int d{k};");
        let _ = writeln!(s, "mutex_t m{k};");
    }
    s.push_str("thread_t t;\n");
    for k in 0..LOCKS {
        let _ = writeln!(s, "void lock{k}() {{\n    pthread_mutex_lock(&m{k});\n}}");
        let _ = writeln!(s, "void unlock{k}() {{\n    pthread_mutex_unlock(&m{k});\n}}");
    }
    // Helpers, f0 and main are fixed; chain functions fill the rest.
    let target = functions.max(2 * LOCKS + 2);
    let mut count = 2 * LOCKS + 2;
    s.push_str("void f0() {\n    d0 += 1;\n}\n");
    let mut i = 1;
    while count < target {
        let k = i % LOCKS;
        let prev = i - 1;
        let shape = if i % 3 == 1 && count + 2 > target { 0 } else { i % 3 };
        match shape {
            0 => {
                let _ = writeln!(
                    s,
                    "void f{i}() {{\n    pthread_mutex_lock(&m{k});\n    d{k} += 1;\n    pthread_mutex_unlock(&m{k});\n    f{prev}();\n}}"
                );
            }
            1 => {
                let _ = writeln!(
                    s,
                    "void f{i}() {{\n    f{prev}();\n    pthread_mutex_lock(&m{k});\n    g{i}();\n    pthread_mutex_unlock(&m{k});\n}}"
                );
                let _ = writeln!(s, "void g{i}() {{\n    d{k} = d{k} + {i};\n}}");
                count += 1;
            }
            _ => {
                let _ = writeln!(s, "void f{i}() {{\n    lock{k}();\n    d{k} -= 1;\n    unlock{k}();\n    f{prev}();\n}}");
            }
        }
        count += 1;
        i += 1;
    }
    let _ = writeln!(s, "int main() {{\n    pthread_create(&t, f{});\n    return 0;\n}}", i - 1);
    s
}

pub fn function_count(src: &str) -> usize {
    src.lines().filter(|l| l.starts_with("void ") || l.starts_with("int main")).count()
}
