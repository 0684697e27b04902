//! SLD resolution with backtracking, negation-as-failure, and arithmetic
//! builtins.
//!
//! Resolution is depth-first, trying clauses in source order; dynamic facts
//! (from the [`FactStore`]) are tried before rule clauses of the same
//! predicate, in assertion order. A configurable depth limit converts
//! accidental recursion into an error rather than a hang. Negated literals
//! must be ground when evaluated; unification has no occurs-check (the
//! intended rule bases cannot build cyclic terms). A goal whose predicate has
//! no clauses and no facts fails silently, as in datalog.

use std::collections::HashMap;
use std::rc::Rc;

use crate::error::{EngineError, ParseError};
use crate::parser::{is_builtin, parse_program};
use crate::term::{Clause, Sym, Term};

/// Default resolution depth limit.
pub const DEFAULT_DEPTH_LIMIT: usize = 512;

// ---------------------------------------------------------------------------
// Compiled representation
// ---------------------------------------------------------------------------

/// Clause-local term with variables resolved to slot indices.
#[derive(Clone, Debug)]
enum CTerm {
    Atom(Sym),
    Num(f64),
    Var(u32),
    App(Sym, Rc<[CTerm]>),
}

#[derive(Debug)]
struct CClause {
    head: CTerm,
    body: Vec<(CTerm, bool)>,
    n_slots: usize,
}

fn compile_term(term: &Term, slots: &mut Vec<Sym>) -> CTerm {
    match term {
        Term::Atom(s) => CTerm::Atom(s.clone()),
        Term::Num(n) => CTerm::Num(*n),
        Term::Var(v) => {
            let slot = slots.iter().position(|s| s == v).unwrap_or_else(|| {
                slots.push(v.clone());
                slots.len() - 1
            });
            CTerm::Var(slot as u32)
        }
        Term::Compound(f, args) => {
            let cargs: Vec<CTerm> = args.iter().map(|a| compile_term(a, slots)).collect();
            CTerm::App(f.clone(), cargs.into())
        }
    }
}

fn compile_clause(clause: &Clause) -> CClause {
    let mut slots = Vec::new();
    let head = compile_term(&clause.head, &mut slots);
    let body = clause
        .body
        .iter()
        .map(|lit| (compile_term(&lit.goal, &mut slots), lit.negated))
        .collect();
    CClause { head, body, n_slots: slots.len() }
}

// ---------------------------------------------------------------------------
// Rule base and fact store
// ---------------------------------------------------------------------------

/// An immutable, parsed rule program. Shareable across threads.
pub struct RuleBase {
    source: Vec<Clause>,
    compiled: Vec<CClause>,
    index: HashMap<(Sym, usize), Vec<usize>>,
}

impl RuleBase {
    /// Parses a rule program. Disjunctions are desugared, so `clauses()` may
    /// contain more entries than the source text.
    pub fn parse(text: &str) -> Result<RuleBase, ParseError> {
        let source = parse_program(text)?;
        Ok(Self::from_clauses(source))
    }

    pub fn from_clauses(source: Vec<Clause>) -> RuleBase {
        let compiled: Vec<CClause> = source.iter().map(compile_clause).collect();
        let mut index: HashMap<(Sym, usize), Vec<usize>> = HashMap::new();
        for (i, clause) in source.iter().enumerate() {
            let (functor, arity) = clause
                .head
                .functor()
                .expect("parser guarantees callable heads");
            index.entry((functor.clone(), arity)).or_default().push(i);
        }
        RuleBase { source, compiled, index }
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.source
    }
}

/// Ground facts grouped by predicate, asserted and cleared per evaluation
/// step. Confined to one thread; concurrent queries need separate stores.
#[derive(Default)]
pub struct FactStore {
    groups: HashMap<(Sym, usize), Vec<(Term, RT)>>,
    count: usize,
}

impl FactStore {
    pub fn new() -> FactStore {
        FactStore::default()
    }

    pub fn assert_fact(&mut self, fact: Term) -> Result<(), EngineError> {
        if !fact.is_ground() {
            return Err(EngineError::NonGroundFact { fact: fact.to_string() });
        }
        let Some((functor, arity)) = fact.functor() else {
            return Err(EngineError::NotCallable { fact: fact.to_string() });
        };
        let rt = ground_to_rt(&fact);
        self.groups
            .entry((functor.clone(), arity))
            .or_default()
            .push((fact, rt));
        self.count += 1;
        Ok(())
    }

    pub fn clear(&mut self) {
        self.groups.clear();
        self.count = 0;
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Facts for one predicate, in assertion order.
    pub fn facts(&self, functor: &str, arity: usize) -> impl Iterator<Item = &Term> {
        self.groups
            .get(&(Sym::new(functor), arity))
            .into_iter()
            .flat_map(|v| v.iter().map(|(t, _)| t))
    }
}

// ---------------------------------------------------------------------------
// Runtime terms and the resolution machine
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
enum RT {
    Atom(Sym),
    Num(f64),
    Var(u32),
    App(Sym, Rc<[RT]>),
}

fn ground_to_rt(term: &Term) -> RT {
    match term {
        Term::Atom(s) => RT::Atom(s.clone()),
        Term::Num(n) => RT::Num(*n),
        Term::Var(_) => unreachable!("asserted facts are ground"),
        Term::Compound(f, args) => {
            RT::App(f.clone(), args.iter().map(ground_to_rt).collect())
        }
    }
}

fn instantiate(ct: &CTerm, base: u32) -> RT {
    match ct {
        CTerm::Atom(s) => RT::Atom(s.clone()),
        CTerm::Num(n) => RT::Num(*n),
        CTerm::Var(slot) => RT::Var(base + slot),
        CTerm::App(f, args) => {
            RT::App(f.clone(), args.iter().map(|a| instantiate(a, base)).collect())
        }
    }
}

type Goals = Option<Rc<GoalNode>>;

struct GoalNode {
    goal: RT,
    negated: bool,
    depth: usize,
    next: Goals,
}

fn push_goal(goal: RT, negated: bool, depth: usize, next: Goals) -> Goals {
    Some(Rc::new(GoalNode { goal, negated, depth, next }))
}

#[derive(Clone, Copy, PartialEq)]
enum Flow {
    Continue,
    Stop,
}

struct Machine<'a> {
    rb: &'a RuleBase,
    fs: &'a FactStore,
    bindings: Vec<Option<RT>>,
    trail: Vec<u32>,
    depth_limit: usize,
}

impl<'a> Machine<'a> {
    fn new(rb: &'a RuleBase, fs: &'a FactStore, depth_limit: usize, query_slots: usize) -> Self {
        Machine {
            rb,
            fs,
            bindings: vec![None; query_slots],
            trail: Vec::with_capacity(64),
            depth_limit,
        }
    }

    fn deref(&self, t: &RT) -> RT {
        let mut cur = t.clone();
        while let RT::Var(v) = cur {
            match &self.bindings[v as usize] {
                Some(next) => cur = next.clone(),
                None => break,
            }
        }
        cur
    }

    fn bind(&mut self, var: u32, value: RT) {
        self.bindings[var as usize] = Some(value);
        self.trail.push(var);
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let var = self.trail.pop().unwrap();
            self.bindings[var as usize] = None;
        }
    }

    fn unify(&mut self, a: &RT, b: &RT) -> bool {
        let a = self.deref(a);
        let b = self.deref(b);
        match (&a, &b) {
            (RT::Var(x), RT::Var(y)) if x == y => true,
            (RT::Var(x), _) => {
                self.bind(*x, b);
                true
            }
            (_, RT::Var(y)) => {
                self.bind(*y, a);
                true
            }
            (RT::Atom(p), RT::Atom(q)) => p == q,
            (RT::Num(m), RT::Num(n)) => m == n,
            (RT::App(f, xs), RT::App(g, ys)) => {
                f == g
                    && xs.len() == ys.len()
                    && xs.iter().zip(ys.iter()).all(|(x, y)| self.unify(x, y))
            }
            _ => false,
        }
    }

    /// Fully applies current bindings; remaining variables stay as vars.
    fn resolve(&self, t: &RT) -> RT {
        match self.deref(t) {
            RT::App(f, args) => RT::App(f, args.iter().map(|a| self.resolve(a)).collect()),
            other => other,
        }
    }

    fn eval(&self, t: &RT) -> Result<f64, EngineError> {
        match self.deref(t) {
            RT::Num(n) => Ok(n),
            RT::Var(_) => Err(EngineError::NonGroundArithmetic {
                expr: rt_to_term(&self.resolve(t)).to_string(),
            }),
            RT::Atom(a) => Err(EngineError::UnknownArithmetic {
                functor: a.as_str().to_string(),
                arity: 0,
            }),
            RT::App(f, args) => {
                let mut vals = [0.0f64; 2];
                if args.len() > 2 {
                    return Err(EngineError::UnknownArithmetic {
                        functor: f.as_str().to_string(),
                        arity: args.len(),
                    });
                }
                for (i, a) in args.iter().enumerate() {
                    vals[i] = self.eval(a)?;
                }
                match (f.as_str(), args.len()) {
                    ("+", 2) => Ok(vals[0] + vals[1]),
                    ("-", 2) => Ok(vals[0] - vals[1]),
                    ("*", 2) => Ok(vals[0] * vals[1]),
                    ("/", 2) => Ok(vals[0] / vals[1]),
                    ("-", 1) => Ok(-vals[0]),
                    ("abs", 1) => Ok(vals[0].abs()),
                    ("sqrt", 1) => Ok(vals[0].sqrt()),
                    ("min", 2) => Ok(vals[0].min(vals[1])),
                    ("max", 2) => Ok(vals[0].max(vals[1])),
                    (name, arity) => Err(EngineError::UnknownArithmetic {
                        functor: name.to_string(),
                        arity,
                    }),
                }
            }
        }
    }

    fn run(
        &mut self,
        goals: &Goals,
        emit: &mut dyn FnMut(&Machine) -> Flow,
    ) -> Result<Flow, EngineError> {
        let Some(node) = goals else {
            return Ok(emit(self));
        };
        let goal = self.deref(&node.goal);

        if node.negated {
            let resolved = self.resolve(&goal);
            if !rt_is_ground(&resolved) {
                return Err(EngineError::NonGroundNegation {
                    goal: rt_to_term(&resolved).to_string(),
                });
            }
            let mark = self.trail.len();
            let sub = push_goal(resolved, false, node.depth, None);
            let mut found = false;
            self.run(&sub, &mut |_| {
                found = true;
                Flow::Stop
            })?;
            self.undo_to(mark);
            if found {
                return Ok(Flow::Continue); // negated goal provable: branch fails
            }
            return self.run(&node.next, emit);
        }

        let (functor, arity) = match &goal {
            RT::Atom(s) => (s.clone(), 0),
            RT::App(f, args) => (f.clone(), args.len()),
            // A goal that is a number or an unbound variable cannot be called.
            _ => return Ok(Flow::Continue),
        };

        if is_builtin(functor.as_str(), arity) {
            let args: Vec<RT> = match &goal {
                RT::App(_, args) => args.to_vec(),
                _ => Vec::new(),
            };
            return self.run_builtin(functor.as_str(), &args, node, emit);
        }

        let key = (functor, arity);
        let mark = self.trail.len();

        let fs: &'a FactStore = self.fs;
        if let Some(facts) = fs.groups.get(&key) {
            for (_, fact_rt) in facts {
                if self.unify(&goal, fact_rt) && self.run(&node.next, emit)? == Flow::Stop {
                    self.undo_to(mark);
                    return Ok(Flow::Stop);
                }
                self.undo_to(mark);
            }
        }

        let rb: &'a RuleBase = self.rb;
        if let Some(clause_ids) = rb.index.get(&key) {
            let child_depth = node.depth + 1;
            for &ci in clause_ids {
                if child_depth > self.depth_limit {
                    return Err(EngineError::DepthExceeded { limit: self.depth_limit });
                }
                let clause = &rb.compiled[ci];
                let base = self.bindings.len() as u32;
                self.bindings
                    .resize(self.bindings.len() + clause.n_slots, None);
                let head = instantiate(&clause.head, base);
                if self.unify(&goal, &head) {
                    let mut gl = node.next.clone();
                    for (ct, negated) in clause.body.iter().rev() {
                        gl = push_goal(instantiate(ct, base), *negated, child_depth, gl);
                    }
                    if self.run(&gl, emit)? == Flow::Stop {
                        self.undo_to(mark);
                        self.bindings.truncate(base as usize);
                        return Ok(Flow::Stop);
                    }
                }
                self.undo_to(mark);
                self.bindings.truncate(base as usize);
            }
        }

        Ok(Flow::Continue)
    }

    fn run_builtin(
        &mut self,
        name: &str,
        args: &[RT],
        node: &GoalNode,
        emit: &mut dyn FnMut(&Machine) -> Flow,
    ) -> Result<Flow, EngineError> {
        let mark = self.trail.len();
        let succeeded = match name {
            "=" => self.unify(&args[0], &args[1]),
            "is" => {
                let value = RT::Num(self.eval(&args[1])?);
                self.unify(&args[0], &value)
            }
            _ => {
                let lhs = self.eval(&args[0])?;
                let rhs = self.eval(&args[1])?;
                match name {
                    "=:=" => lhs == rhs,
                    "<" => lhs < rhs,
                    ">" => lhs > rhs,
                    "=<" => lhs <= rhs,
                    ">=" => lhs >= rhs,
                    _ => unreachable!("unhandled builtin {name}"),
                }
            }
        };
        if succeeded && self.run(&node.next, emit)? == Flow::Stop {
            self.undo_to(mark);
            return Ok(Flow::Stop);
        }
        self.undo_to(mark);
        Ok(Flow::Continue)
    }
}

fn rt_is_ground(t: &RT) -> bool {
    match t {
        RT::Var(_) => false,
        RT::Atom(_) | RT::Num(_) => true,
        RT::App(_, args) => args.iter().all(rt_is_ground),
    }
}

fn rt_to_term(t: &RT) -> Term {
    match t {
        RT::Atom(s) => Term::Atom(s.clone()),
        RT::Num(n) => Term::Num(*n),
        RT::Var(id) => Term::Var(Sym::new(&format!("_G{id}"))),
        RT::App(f, args) => Term::Compound(f.clone(), args.iter().map(rt_to_term).collect()),
    }
}

// ---------------------------------------------------------------------------
// Public query API
// ---------------------------------------------------------------------------

/// A solution: bindings for the query's variables, in first-occurrence order.
/// Extraction fully resolves each binding, so applying a substitution twice
/// equals applying it once.
#[derive(Clone, Debug, PartialEq)]
pub struct Substitution {
    bindings: Vec<(Sym, Term)>,
}

impl Substitution {
    pub fn get(&self, var: &str) -> Option<&Term> {
        self.bindings
            .iter()
            .find(|(sym, _)| sym.as_str() == var)
            .map(|(_, term)| term)
    }

    pub fn bindings(&self) -> &[(Sym, Term)] {
        &self.bindings
    }

    /// Applies the substitution to a term.
    pub fn apply(&self, term: &Term) -> Term {
        match term {
            Term::Var(v) => self
                .get(v.as_str())
                .cloned()
                .unwrap_or_else(|| term.clone()),
            Term::Compound(f, args) => {
                Term::Compound(f.clone(), args.iter().map(|a| self.apply(a)).collect())
            }
            other => other.clone(),
        }
    }
}

/// Runs a query, invoking `visitor` once per solution in derivation order.
/// The visitor returns `false` to stop the search early.
pub fn solve_each(
    goal: &Term,
    rb: &RuleBase,
    fs: &FactStore,
    depth_limit: usize,
    mut visitor: impl FnMut(&Substitution) -> bool,
) -> Result<(), EngineError> {
    let mut slots: Vec<Sym> = Vec::new();
    let cgoal = compile_term(goal, &mut slots);
    let mut machine = Machine::new(rb, fs, depth_limit, slots.len());
    let goals = push_goal(instantiate(&cgoal, 0), false, 0, None);
    machine
        .run(&goals, &mut |m| {
            let bindings = slots
                .iter()
                .enumerate()
                .map(|(i, sym)| (sym.clone(), rt_to_term(&m.resolve(&RT::Var(i as u32)))))
                .collect();
            if visitor(&Substitution { bindings }) {
                Flow::Continue
            } else {
                Flow::Stop
            }
        })
        .map(|_| ())
}

/// Runs a query and collects every solution. Solution order is deterministic:
/// facts in assertion order, then clauses in source order, depth-first.
pub fn solve(
    goal: &Term,
    rb: &RuleBase,
    fs: &FactStore,
    depth_limit: usize,
) -> Result<Vec<Substitution>, EngineError> {
    let mut out = Vec::new();
    solve_each(goal, rb, fs, depth_limit, |s| {
        out.push(s.clone());
        true
    })?;
    Ok(out)
}

/// True iff the goal has at least one solution (stops at the first).
pub fn has_solution(
    goal: &Term,
    rb: &RuleBase,
    fs: &FactStore,
    depth_limit: usize,
) -> Result<bool, EngineError> {
    let mut found = false;
    solve_each(goal, rb, fs, depth_limit, |_| {
        found = true;
        false
    })?;
    Ok(found)
}

/// `findall/3`: the template instantiated under every solution of `goal`, in
/// solution order. No solutions yields an empty list, not a failure.
/// Duplicate solutions are preserved.
pub fn find_all(
    template: &Term,
    goal: &Term,
    rb: &RuleBase,
    fs: &FactStore,
    depth_limit: usize,
) -> Result<Vec<Term>, EngineError> {
    // Template and goal share one variable namespace so they co-refer.
    let mut slots: Vec<Sym> = Vec::new();
    let ctemplate = compile_term(template, &mut slots);
    let cgoal = compile_term(goal, &mut slots);
    let mut machine = Machine::new(rb, fs, depth_limit, slots.len());
    let template_rt = instantiate(&ctemplate, 0);
    let goals = push_goal(instantiate(&cgoal, 0), false, 0, None);
    let mut out = Vec::new();
    machine
        .run(&goals, &mut |m| {
            out.push(rt_to_term(&m.resolve(&template_rt)));
            Flow::Continue
        })
        .map(|_| ())?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_query;

    fn rb(text: &str) -> RuleBase {
        RuleBase::parse(text).unwrap()
    }

    fn q(text: &str) -> Term {
        parse_query(text).unwrap()
    }

    fn ask(rules: &RuleBase, fs: &FactStore, query: &str) -> Vec<Substitution> {
        solve(&q(query), rules, fs, DEFAULT_DEPTH_LIMIT).unwrap()
    }

    #[test]
    fn facts_match_in_order() {
        let rules = rb("q(a). q(b).");
        let fs = FactStore::new();
        let sols = ask(&rules, &fs, "q(X)");
        assert_eq!(sols.len(), 2);
        assert_eq!(sols[0].get("X"), Some(&Term::atom("a")));
        assert_eq!(sols[1].get("X"), Some(&Term::atom("b")));
    }

    #[test]
    fn negation_as_failure() {
        let rules = rb("front_is_free :- not(front_is_busy).");
        let mut fs = FactStore::new();
        assert_eq!(ask(&rules, &fs, "front_is_free").len(), 1);
        fs.assert_fact(Term::atom("front_is_busy")).unwrap();
        assert_eq!(ask(&rules, &fs, "front_is_free").len(), 0);
    }

    #[test]
    fn arithmetic_filter() {
        let rules = rb("p(X) :- q(X), X > 2.");
        let mut fs = FactStore::new();
        fs.assert_fact(q("q(1)")).unwrap();
        fs.assert_fact(q("q(3)")).unwrap();
        let sols = ask(&rules, &fs, "p(X)");
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].get("X"), Some(&Term::num(3.0)));
    }

    #[test]
    fn find_all_collects_in_order_with_duplicates() {
        let rules = rb("");
        let mut fs = FactStore::new();
        for name in ["a", "b", "a"] {
            fs.assert_fact(Term::compound("q", vec![Term::atom(name)])).unwrap();
        }
        let result =
            find_all(&q("X"), &q("q(X)"), &rules, &fs, DEFAULT_DEPTH_LIMIT).unwrap();
        assert_eq!(result, vec![Term::atom("a"), Term::atom("b"), Term::atom("a")]);
    }

    #[test]
    fn find_all_empty_on_no_solutions() {
        let rules = rb("");
        let fs = FactStore::new();
        let result =
            find_all(&q("X"), &q("missing(X)"), &rules, &fs, DEFAULT_DEPTH_LIMIT).unwrap();
        assert!(result.is_empty());
    }

    #[test]
    fn find_all_length_matches_solution_count() {
        let rules = rb("p(X) :- q(X). p(X) :- r(X).");
        let mut fs = FactStore::new();
        fs.assert_fact(q("q(1)")).unwrap();
        fs.assert_fact(q("r(1)")).unwrap();
        fs.assert_fact(q("r(2)")).unwrap();
        let sols = ask(&rules, &fs, "p(X)");
        let collected =
            find_all(&q("X"), &q("p(X)"), &rules, &fs, DEFAULT_DEPTH_LIMIT).unwrap();
        assert_eq!(sols.len(), collected.len());
    }

    #[test]
    fn assert_then_query_vehicle_fact() {
        let rules = rb("");
        let mut fs = FactStore::new();
        fs.assert_fact(q("vehicle(7, 4, c(120.0, 13.2), c(4.5, 2.0), c(28.0, 0.0))"))
            .unwrap();
        let sols = ask(&rules, &fs, "vehicle(7, L, _, _, _)");
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].get("L"), Some(&Term::num(4.0)));
    }

    #[test]
    fn clear_facts_empties_store() {
        let rules = rb("");
        let mut fs = FactStore::new();
        fs.assert_fact(q("vehicle(1, 4, c(0, 0), c(4, 2), c(30, 0))")).unwrap();
        fs.clear();
        assert!(fs.is_empty());
        assert_eq!(ask(&rules, &fs, "vehicle(I, L, P, S, V)").len(), 0);
    }

    #[test]
    fn non_ground_fact_rejected() {
        let mut fs = FactStore::new();
        let err = fs.assert_fact(q("vehicle(X, 4, c(0, 0), c(4, 2), c(30, 0))")).unwrap_err();
        assert!(matches!(err, EngineError::NonGroundFact { .. }));
    }

    #[test]
    fn non_ground_negation_raises() {
        let rules = rb("p :- not(r(Y)).");
        let fs = FactStore::new();
        let err = solve(&q("p"), &rules, &fs, DEFAULT_DEPTH_LIMIT).unwrap_err();
        assert!(matches!(err, EngineError::NonGroundNegation { .. }));
    }

    #[test]
    fn non_ground_arithmetic_raises() {
        let rules = rb("p(X) :- X > 2.");
        let fs = FactStore::new();
        let err = solve(&q("p(Y)"), &rules, &fs, DEFAULT_DEPTH_LIMIT).unwrap_err();
        assert!(matches!(err, EngineError::NonGroundArithmetic { .. }));
    }

    #[test]
    fn depth_limit_catches_recursion() {
        let rules = rb("loop :- loop.");
        let fs = FactStore::new();
        let err = solve(&q("loop"), &rules, &fs, 64).unwrap_err();
        assert_eq!(err, EngineError::DepthExceeded { limit: 64 });
    }

    #[test]
    fn is_evaluates_expressions() {
        let rules = rb("gap(G) :- G is max(0, abs(3 - 10) - 2).");
        let fs = FactStore::new();
        let sols = ask(&rules, &fs, "gap(G)");
        assert_eq!(sols[0].get("G"), Some(&Term::num(5.0)));
    }

    #[test]
    fn infix_is_unifies_numbers() {
        let rules = rb("same(A, B) :- A is B.");
        let fs = FactStore::new();
        assert_eq!(ask(&rules, &fs, "same(X, 4)").len(), 1);
        assert_eq!(ask(&rules, &fs, "same(3, 4)").len(), 0);
    }

    #[test]
    fn unification_builtin_binds() {
        let rules = rb("pick(A) :- A = left_lane_change.");
        let fs = FactStore::new();
        let sols = ask(&rules, &fs, "pick(X)");
        assert_eq!(sols[0].get("X"), Some(&Term::atom("left_lane_change")));
    }

    #[test]
    fn disjunction_order_preserved() {
        let rules = rb("p(X) :- X = 1; X = 2.");
        let fs = FactStore::new();
        let sols = ask(&rules, &fs, "p(X)");
        assert_eq!(sols.len(), 2);
        assert_eq!(sols[0].get("X"), Some(&Term::num(1.0)));
        assert_eq!(sols[1].get("X"), Some(&Term::num(2.0)));
    }

    #[test]
    fn substitution_applied_to_goal_is_provable() {
        let rules = rb("p(X) :- q(X), r(X).");
        let mut fs = FactStore::new();
        for f in ["q(1)", "q(2)", "r(2)"] {
            fs.assert_fact(q(f)).unwrap();
        }
        let goal = q("p(X)");
        for sol in ask(&rules, &fs, "p(X)") {
            let grounded = sol.apply(&goal);
            assert!(grounded.is_ground());
            assert!(has_solution(&grounded, &rules, &fs, DEFAULT_DEPTH_LIMIT).unwrap());
        }
    }

    #[test]
    fn deterministic_solution_order() {
        let rules = rb("edge(a, b). edge(a, c). path(X, Y) :- edge(X, Y).");
        let fs = FactStore::new();
        let first = ask(&rules, &fs, "path(a, Y)");
        let second = ask(&rules, &fs, "path(a, Y)");
        assert_eq!(first, second);
    }

    #[test]
    fn unknown_predicate_fails_silently() {
        let rules = rb("p :- ghost.");
        let fs = FactStore::new();
        assert_eq!(ask(&rules, &fs, "p").len(), 0);
    }
}
