//! Test support: a random generator for small function-free stratified
//! programs and an independent bottom-up ground-enumeration oracle.
//!
//! The oracle shares nothing with the resolution engine: it enumerates every
//! ground instantiation of every rule and checks bodies by set lookup,
//! iterating to a fixpoint. Stratification is enforced by construction in the
//! generator (rules for predicate `i` only reference predicates `< i`), so
//! negation-as-failure and the stratified model coincide and SLD resolution
//! terminates.

use std::collections::{BTreeMap, BTreeSet};

use crate::engine::{find_all, solve, FactStore, RuleBase, DEFAULT_DEPTH_LIMIT};
use crate::term::{Clause, Term};

/// SplitMix64: tiny deterministic RNG so the testkit stays dependency-free.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn chance(&mut self, num: u32, den: u32) -> bool {
        (self.next_u64() % den as u64) < num as u64
    }
}

/// A generated program: rule text (parsed by the engine under test) plus the
/// facts split between program text and dynamic assertion, so both fact
/// paths are exercised.
pub struct GeneratedProgram {
    pub rules_text: String,
    pub dynamic_facts: Vec<Term>,
    /// name -> arity for every predicate in the program.
    pub predicates: Vec<(String, usize)>,
}

const CONSTANTS: &[&str] = &["a", "b", "c", "d", "e", "f"];

pub fn random_program(rng: &mut TestRng) -> GeneratedProgram {
    let n_consts = 2 + rng.below(5); // 2..=6
    let consts = &CONSTANTS[..n_consts];
    let n_preds = 2 + rng.below(3); // 2..=4
    let predicates: Vec<(String, usize)> = (0..n_preds)
        .map(|i| (format!("p{i}"), 1 + rng.below(2)))
        .collect();

    let mut text = String::new();
    let mut dynamic_facts = Vec::new();

    // Facts over any predicate.
    let n_facts = 1 + rng.below(12);
    for _ in 0..n_facts {
        let (name, arity) = &predicates[rng.below(n_preds)];
        let args: Vec<Term> = (0..*arity)
            .map(|_| Term::atom(consts[rng.below(n_consts)]))
            .collect();
        let fact = Term::compound(name, args);
        if rng.chance(1, 2) {
            text.push_str(&format!("{fact}.\n"));
        } else {
            dynamic_facts.push(fact);
        }
    }

    // Stratified non-recursive rules: the head predicate index strictly
    // dominates every body predicate index.
    let var_names = ["X", "Y", "Z", "W"];
    let n_rules = 1 + rng.below(4);
    for _ in 0..n_rules {
        let head_idx = 1 + rng.below(n_preds - 1);
        let (head_name, head_arity) = predicates[head_idx].clone();

        let n_pos = 1 + rng.below(3);
        let n_vars = 1 + rng.below(var_names.len());
        let mut body = Vec::new();
        let mut used_vars: Vec<&str> = Vec::new();
        for _ in 0..n_pos {
            let body_idx = rng.below(head_idx);
            let (name, arity) = &predicates[body_idx];
            let args: Vec<String> = (0..*arity)
                .map(|_| {
                    if rng.chance(3, 4) {
                        let v = var_names[rng.below(n_vars)];
                        if !used_vars.contains(&v) {
                            used_vars.push(v);
                        }
                        v.to_string()
                    } else {
                        consts[rng.below(n_consts)].to_string()
                    }
                })
                .collect();
            body.push(format!("{name}({})", args.join(", ")));
        }

        // Optional negated literal; its variables must already be bound by
        // the positive literals so negation is ground when evaluated.
        if rng.chance(1, 2) {
            let body_idx = rng.below(head_idx);
            let (name, arity) = &predicates[body_idx];
            let args: Vec<String> = (0..*arity)
                .map(|_| {
                    if !used_vars.is_empty() && rng.chance(2, 3) {
                        used_vars[rng.below(used_vars.len())].to_string()
                    } else {
                        consts[rng.below(n_consts)].to_string()
                    }
                })
                .collect();
            body.push(format!("not({name}({}))", args.join(", ")));
        }

        // Head arguments come from positively-bound variables (range
        // restriction) with constants as fallback.
        let head_args: Vec<String> = (0..head_arity)
            .map(|_| {
                if !used_vars.is_empty() && rng.chance(3, 4) {
                    used_vars[rng.below(used_vars.len())].to_string()
                } else {
                    consts[rng.below(n_consts)].to_string()
                }
            })
            .collect();

        text.push_str(&format!(
            "{head_name}({}) :- {}.\n",
            head_args.join(", "),
            body.join(", ")
        ));
    }

    GeneratedProgram { rules_text: text, dynamic_facts, predicates }
}

/// Ground atom as (predicate, argument constants).
pub type GroundAtom = (String, Vec<String>);

fn term_const(term: &Term) -> String {
    match term {
        Term::Atom(s) => s.as_str().to_string(),
        other => panic!("oracle handles function-free programs only, got {other}"),
    }
}

/// Bottom-up evaluation by exhaustive ground instantiation, for
/// non-recursive stratified programs. Predicates are finalized in dependency
/// order so a negated literal is only ever checked against a fully-derived
/// predicate (the stratified model). Panics on a cyclic dependency graph —
/// the generator never produces one.
pub fn ground_oracle(clauses: &[Clause], extra_facts: &[Term]) -> BTreeSet<GroundAtom> {
    let mut derived: BTreeSet<GroundAtom> = BTreeSet::new();
    for fact in extra_facts {
        derived.insert(atom_of(fact));
    }
    let mut rules = Vec::new();
    for clause in clauses {
        if clause.is_fact() {
            derived.insert(atom_of(&clause.head));
        } else {
            rules.push(clause);
        }
    }

    // Constant universe: everything mentioned anywhere.
    let mut universe: BTreeSet<String> = BTreeSet::new();
    for (_, args) in &derived {
        universe.extend(args.iter().cloned());
    }
    for rule in &rules {
        collect_consts(&rule.head, &mut universe);
        for lit in &rule.body {
            collect_consts(&lit.goal, &mut universe);
        }
    }
    let universe: Vec<String> = universe.into_iter().collect();

    // Topological order over the predicate dependency graph.
    let pred_of = |t: &Term| -> String {
        match t {
            Term::Atom(s) => s.as_str().to_string(),
            Term::Compound(f, _) => f.as_str().to_string(),
            other => panic!("not a callable term: {other}"),
        }
    };
    let mut preds: BTreeSet<String> = derived.iter().map(|(n, _)| n.clone()).collect();
    for rule in &rules {
        preds.insert(pred_of(&rule.head));
        for lit in &rule.body {
            preds.insert(pred_of(&lit.goal));
        }
    }
    let mut order: Vec<String> = Vec::new();
    let mut remaining: BTreeSet<String> = preds.clone();
    while !remaining.is_empty() {
        let ready: Vec<String> = remaining
            .iter()
            .filter(|p| {
                rules.iter().filter(|r| &pred_of(&r.head) == *p).all(|r| {
                    r.body
                        .iter()
                        .all(|lit| !remaining.contains(&pred_of(&lit.goal)))
                })
            })
            .cloned()
            .collect();
        assert!(!ready.is_empty(), "cyclic predicate dependencies in oracle input");
        for p in ready {
            remaining.remove(&p);
            order.push(p);
        }
    }

    // Finalize each predicate in turn: by the topological order, every body
    // literal refers to an already-complete predicate, so one sweep per rule
    // suffices; loop to a fixpoint anyway.
    for pred in &order {
        loop {
            let mut added = false;
            for rule in rules.iter().filter(|r| &pred_of(&r.head) == pred) {
                let mut vars = Vec::new();
                rule.head.collect_vars(&mut vars);
                for lit in &rule.body {
                    lit.goal.collect_vars(&mut vars);
                }
                let n = vars.len();
                let mut assignment = vec![0usize; n];
                loop {
                    let env: BTreeMap<&str, &str> = vars
                        .iter()
                        .zip(assignment.iter())
                        .map(|(v, &i)| (v.as_str(), universe[i].as_str()))
                        .collect();
                    let body_holds = rule.body.iter().all(|lit| {
                        let atom = instantiate_atom(&lit.goal, &env);
                        derived.contains(&atom) != lit.negated
                    });
                    if body_holds {
                        let head = instantiate_atom(&rule.head, &env);
                        if derived.insert(head) {
                            added = true;
                        }
                    }
                    // Next assignment in odometer order.
                    let mut k = 0;
                    loop {
                        if k == n {
                            break;
                        }
                        assignment[k] += 1;
                        if assignment[k] < universe.len() {
                            break;
                        }
                        assignment[k] = 0;
                        k += 1;
                    }
                    if n == 0 || k == n {
                        break;
                    }
                }
            }
            if !added {
                break;
            }
        }
    }
    derived
}

fn collect_consts(term: &Term, out: &mut BTreeSet<String>) {
    match term {
        Term::Atom(s) => {
            out.insert(s.as_str().to_string());
        }
        Term::Compound(_, args) => {
            for a in args {
                collect_consts(a, out);
            }
        }
        _ => {}
    }
}

fn atom_of(term: &Term) -> GroundAtom {
    match term {
        Term::Atom(s) => (s.as_str().to_string(), Vec::new()),
        Term::Compound(f, args) => (
            f.as_str().to_string(),
            args.iter().map(term_const).collect(),
        ),
        other => panic!("not a callable ground atom: {other}"),
    }
}

fn instantiate_atom(term: &Term, env: &BTreeMap<&str, &str>) -> GroundAtom {
    match term {
        Term::Atom(s) => (s.as_str().to_string(), Vec::new()),
        Term::Compound(f, args) => (
            f.as_str().to_string(),
            args.iter()
                .map(|a| match a {
                    Term::Atom(s) => s.as_str().to_string(),
                    Term::Var(v) => env[v.as_str()].to_string(),
                    other => panic!("function-free programs only, got {other}"),
                })
                .collect(),
        ),
        other => panic!("not a callable term: {other}"),
    }
}

/// Runs one generated program through both the SLD engine and the oracle and
/// checks that the solution sets agree for every predicate, and that
/// `find_all` lengths match `solve` counts. Returns a description of the
/// first mismatch.
pub fn check_program_against_oracle(program: &GeneratedProgram) -> Result<(), String> {
    let rb = RuleBase::parse(&program.rules_text)
        .map_err(|e| format!("generated program failed to parse: {e}\n{}", program.rules_text))?;
    let mut fs = FactStore::new();
    for fact in &program.dynamic_facts {
        fs.assert_fact(fact.clone()).map_err(|e| e.to_string())?;
    }
    let expected = ground_oracle(rb.clauses(), &program.dynamic_facts);

    for (name, arity) in &program.predicates {
        let vars: Vec<Term> = (0..*arity).map(|i| Term::var(&format!("V{i}"))).collect();
        let query = Term::compound(name, vars.clone());
        let sols = solve(&query, &rb, &fs, DEFAULT_DEPTH_LIMIT)
            .map_err(|e| format!("solve({query}) failed: {e}\n{}", program.rules_text))?;

        let mut got: BTreeSet<GroundAtom> = BTreeSet::new();
        for sol in &sols {
            let grounded = sol.apply(&query);
            if !grounded.is_ground() {
                return Err(format!("non-ground solution for {query}: {grounded}"));
            }
            got.insert(atom_of(&grounded));
        }
        let want: BTreeSet<GroundAtom> = expected
            .iter()
            .filter(|(n, args)| n == name && args.len() == *arity)
            .cloned()
            .collect();
        if got != want {
            return Err(format!(
                "solution set mismatch for {name}/{arity}:\n  solve:  {got:?}\n  oracle: {want:?}\nprogram:\n{}dynamic facts: {:?}",
                program.rules_text, program.dynamic_facts
            ));
        }

        let template = Term::compound("t", vars);
        let collected = find_all(&template, &query, &rb, &fs, DEFAULT_DEPTH_LIMIT)
            .map_err(|e| e.to_string())?;
        if collected.len() != sols.len() {
            return Err(format!(
                "find_all length {} != solve count {} for {query}",
                collected.len(),
                sols.len()
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_handles_negation() {
        let rb = RuleBase::parse("p0(a). p0(b). p1(X) :- p0(X), not(p0(c)).").unwrap();
        let derived = ground_oracle(rb.clauses(), &[]);
        assert!(derived.contains(&("p1".to_string(), vec!["a".to_string()])));
        assert!(derived.contains(&("p1".to_string(), vec!["b".to_string()])));
    }

    #[test]
    fn oracle_negation_blocks() {
        let rb = RuleBase::parse("p0(a). p1(X) :- p0(X), not(p0(a)).").unwrap();
        let derived = ground_oracle(rb.clauses(), &[]);
        assert!(!derived.iter().any(|(n, _)| n == "p1"));
    }

    #[test]
    fn generated_programs_parse_and_check() {
        let mut rng = TestRng::new(7);
        for _ in 0..25 {
            let program = random_program(&mut rng);
            check_program_against_oracle(&program).unwrap();
        }
    }
}
