//! Resolution vs. exhaustive ground enumeration on random small programs.

use logic::testkit::{check_program_against_oracle, random_program, TestRng};

#[test]
fn solve_matches_ground_enumeration_on_random_programs() {
    let mut rng = TestRng::new(0x5EED);
    for i in 0..200 {
        let program = random_program(&mut rng);
        if let Err(msg) = check_program_against_oracle(&program) {
            panic!("program {i}: {msg}");
        }
    }
}

#[test]
fn fact_order_determines_solution_order() {
    use logic::{solve, FactStore, RuleBase, Term, DEFAULT_DEPTH_LIMIT};
    let rb = RuleBase::parse("").unwrap();
    let mut fs = FactStore::new();
    for name in ["c", "a", "b"] {
        fs.assert_fact(Term::compound("q", vec![Term::atom(name)])).unwrap();
    }
    let goal = Term::compound("q", vec![Term::var("X")]);
    let names: Vec<String> = solve(&goal, &rb, &fs, DEFAULT_DEPTH_LIMIT)
        .unwrap()
        .iter()
        .map(|s| s.get("X").unwrap().to_string())
        .collect();
    assert_eq!(names, ["c", "a", "b"]);
}
