//! Term representation shared by the parser, the engine, and callers that
//! build facts or queries programmatically.

use std::fmt;
use std::sync::Arc;

/// Interned-ish symbol: cheap to clone, compared by pointer first and by
/// content second, so symbols created independently still compare equal.
#[derive(Clone, Eq)]
pub struct Sym(Arc<str>);

impl Sym {
    pub fn new(name: &str) -> Self {
        Sym(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl PartialEq for Sym {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl std::hash::Hash for Sym {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.hash(state);
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<&str> for Sym {
    fn from(s: &str) -> Self {
        Sym::new(s)
    }
}

/// A logical term. Variables are uppercase-initial in the surface syntax;
/// numbers are double-precision reals.
#[derive(Clone, PartialEq, Debug)]
pub enum Term {
    Atom(Sym),
    Var(Sym),
    Num(f64),
    Compound(Sym, Vec<Term>),
}

impl Term {
    pub fn atom(name: &str) -> Term {
        Term::Atom(Sym::new(name))
    }

    pub fn var(name: &str) -> Term {
        Term::Var(Sym::new(name))
    }

    pub fn num(value: f64) -> Term {
        Term::Num(value)
    }

    pub fn compound(functor: &str, args: Vec<Term>) -> Term {
        debug_assert!(!args.is_empty(), "compound arity must be >= 1");
        Term::Compound(Sym::new(functor), args)
    }

    /// Predicate key of a callable term: functor name plus arity.
    /// Atoms are zero-arity predicates.
    pub fn functor(&self) -> Option<(&Sym, usize)> {
        match self {
            Term::Atom(s) => Some((s, 0)),
            Term::Compound(s, args) => Some((s, args.len())),
            _ => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Atom(_) | Term::Num(_) => true,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
        }
    }

    /// Collects variable names in first-occurrence order.
    pub fn collect_vars(&self, out: &mut Vec<Sym>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Compound(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
            _ => {}
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Atom(s) => write!(f, "{s}"),
            Term::Var(v) => write!(f, "{v}"),
            Term::Num(n) => write!(f, "{n}"),
            Term::Compound(s, args) => {
                write!(f, "{s}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// One body goal, possibly negated (`not(G)` / `\+ G`).
#[derive(Clone, PartialEq, Debug)]
pub struct Literal {
    pub goal: Term,
    pub negated: bool,
}

impl Literal {
    pub fn positive(goal: Term) -> Self {
        Literal { goal, negated: false }
    }

    pub fn negative(goal: Term) -> Self {
        Literal { goal, negated: true }
    }
}

/// A Horn clause: facts have an empty body.
#[derive(Clone, PartialEq, Debug)]
pub struct Clause {
    pub head: Term,
    pub body: Vec<Literal>,
}

impl Clause {
    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            write!(f, " :- ")?;
            for (i, lit) in self.body.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                if lit.negated {
                    write!(f, "not({})", lit.goal)?;
                } else {
                    write!(f, "{}", lit.goal)?;
                }
            }
        }
        write!(f, ".")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_equality_across_independent_allocations() {
        assert_eq!(Sym::new("vehicle"), Sym::new("vehicle"));
        assert_ne!(Sym::new("vehicle"), Sym::new("vehicles"));
    }

    #[test]
    fn groundness() {
        let t = Term::compound("f", vec![Term::atom("a"), Term::num(1.0)]);
        assert!(t.is_ground());
        let t = Term::compound("f", vec![Term::var("X")]);
        assert!(!t.is_ground());
    }

    #[test]
    fn var_collection_order_and_dedup() {
        let t = Term::compound(
            "f",
            vec![Term::var("X"), Term::compound("g", vec![Term::var("Y"), Term::var("X")])],
        );
        let mut vars = Vec::new();
        t.collect_vars(&mut vars);
        assert_eq!(vars, vec![Sym::new("X"), Sym::new("Y")]);
    }
}
