use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ast::Expr;

/// Symbolic name of a lock: a root variable followed by field names.
///
/// `&mut (*a).m`, `&a->m` and `&a.m` all denote `a.m`.
///
/// The derived ordering on segments coincides with the ordering of the
/// dotted text, because `.` sorts before every identifier character.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LockPath {
    segments: Vec<String>,
}

impl LockPath {
    pub fn new(segments: Vec<String>) -> LockPath {
        assert!(!segments.is_empty(), "lock path needs a root");
        LockPath { segments }
    }

    pub fn root_only(name: impl Into<String>) -> LockPath {
        LockPath::new(vec![name.into()])
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn root(&self) -> &str {
        &self.segments[0]
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn child(&self, field: impl Into<String>) -> LockPath {
        let mut segments = self.segments.clone();
        segments.push(field.into());
        LockPath { segments }
    }

    /// The path without its last segment, if any.
    pub fn parent(&self) -> Option<LockPath> {
        (self.segments.len() > 1).then(|| LockPath {
            segments: self.segments[..self.segments.len() - 1].to_vec(),
        })
    }

    pub fn last(&self) -> &str {
        self.segments.last().expect("non-empty")
    }

    pub fn starts_with(&self, prefix: &LockPath) -> bool {
        self.segments.starts_with(&prefix.segments)
    }

    /// Replaces `prefix` at the front of this path with `replacement`.
    pub fn rebase(&self, prefix_len: usize, replacement: &LockPath) -> LockPath {
        let mut segments = replacement.segments.clone();
        segments.extend_from_slice(&self.segments[prefix_len..]);
        LockPath { segments }
    }

    /// Name of the guard variable standing for this lock: `x.m` -> `x_m_guard`.
    pub fn guard_name(&self) -> String {
        format!("{}_guard", self.segments.join("_"))
    }

    /// Canonical path of a place expression, ignoring `&`, `*`, and the
    /// `.`/`->` distinction. `None` if the expression is not a place.
    pub fn of_place(e: &Expr) -> Option<LockPath> {
        match e {
            Expr::Var(v) => Some(LockPath::root_only(v.clone())),
            Expr::Field { base, field, .. } => Some(LockPath::of_place(base)?.child(field.clone())),
            Expr::Deref(inner) | Expr::AddrOf { place: inner, .. } => LockPath::of_place(inner),
            _ => None,
        }
    }

    /// Rebuilds an expression naming this path (`a.b.c` -> `a.b.c` with dots).
    pub fn to_expr(&self) -> Expr {
        let mut e = Expr::Var(self.segments[0].clone());
        for s in &self.segments[1..] {
            e = Expr::field(e, s.clone(), false);
        }
        e
    }
}

impl fmt::Display for LockPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.segments.join("."))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid lock path `{0}`")]
pub struct InvalidLockPath(pub String);

impl FromStr for LockPath {
    type Err = InvalidLockPath;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let segments: Vec<String> = s.split('.').map(str::to_owned).collect();
        let ok = segments.iter().all(|seg| {
            let mut chars = seg.chars();
            matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
                && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        });
        if ok {
            Ok(LockPath { segments })
        } else {
            Err(InvalidLockPath(s.to_owned()))
        }
    }
}

impl Serialize for LockPath {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LockPath {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn guard_names() {
        assert_eq!(LockPath::root_only("m").guard_name(), "m_guard");
        assert_eq!("x.m".parse::<LockPath>().unwrap().guard_name(), "x_m_guard");
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!("".parse::<LockPath>().is_err());
        assert!("a..b".parse::<LockPath>().is_err());
        assert!("1a".parse::<LockPath>().is_err());
        assert!("a.b_c".parse::<LockPath>().is_ok());
    }

    #[test]
    fn place_canonicalization() {
        // &mut (*b).m
        let e = Expr::AddrOf {
            mutable: true,
            place: Box::new(Expr::field(Expr::Deref(Box::new(Expr::var("b"))), "m", false)),
        };
        assert_eq!(LockPath::of_place(&e).unwrap().to_string(), "b.m");
        // x->m.inner
        let e = Expr::field(Expr::field(Expr::var("x"), "m", true), "inner", false);
        assert_eq!(LockPath::of_place(&e).unwrap().to_string(), "x.m.inner");
        assert_eq!(LockPath::of_place(&Expr::IntLit(3)), None);
    }

    proptest! {
        #[test]
        fn ordering_matches_text(a in proptest::collection::vec("[a-z_][a-z0-9_]{0,3}", 1..4),
                                 b in proptest::collection::vec("[a-z_][a-z0-9_]{0,3}", 1..4)) {
            let pa = LockPath::new(a);
            let pb = LockPath::new(b);
            prop_assert_eq!(pa.cmp(&pb), pa.to_string().cmp(&pb.to_string()));
        }

        #[test]
        fn text_round_trip(a in proptest::collection::vec("[a-zA-Z_][a-zA-Z0-9_]{0,5}", 1..5)) {
            let p = LockPath::new(a);
            prop_assert_eq!(p.to_string().parse::<LockPath>().unwrap(), p);
        }
    }
}
