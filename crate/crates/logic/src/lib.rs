//! A minimal logic-programming engine: Horn clauses with SLD resolution,
//! backtracking, negation-as-failure, and arithmetic builtins.
//!
//! Rule files use a Prolog-like surface syntax (see [`parser`] for the
//! grammar). A [`RuleBase`] is immutable after parsing and shareable across
//! threads; per-step ground scene facts live in a thread-confined
//! [`FactStore`]. Queries run via [`solve`] / [`solve_each`] / [`find_all`].

pub mod engine;
pub mod error;
pub mod parser;
pub mod term;
pub mod testkit;

pub use engine::{
    find_all, has_solution, solve, solve_each, FactStore, RuleBase, Substitution,
    DEFAULT_DEPTH_LIMIT,
};
pub use error::{EngineError, LogicError, ParseError};
pub use parser::{parse_program, parse_query};
pub use term::{Clause, Literal, Sym, Term};
