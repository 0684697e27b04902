//! Rule-file parser.
//!
//! Grammar (documented here because the engine ships rule files as data):
//!
//! ```text
//! program    := clause*
//! clause     := term ( ":-" body )? "."
//! body       := disjunction of conjunctions of literals
//! literal    := "not" "(" body ")" | "\+" literal | expr
//! expr       := additive ( cmp-op additive )?      cmp-op: is = =:= < > =< >=
//! additive   := multiplicative ( ("+"|"-") multiplicative )*
//! multiplicative := unary ( ("*"|"/") unary )*
//! unary      := "-" unary | primary
//! primary    := number | variable | atom | atom "(" expr-list ")" | "(" body ")"
//! ```
//!
//! `%` starts a line comment. Variables begin with an uppercase letter or
//! `_`; a bare `_` is a fresh anonymous variable per occurrence. Disjunction
//! (`;`) is desugared at parse time into one clause per disjunct, so the
//! engine itself only ever sees conjunctive bodies.

use crate::error::ParseError;
use crate::term::{Clause, Literal, Sym, Term};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Atom(String),
    Var(String),
    Num(f64),
    LParen,
    RParen,
    Comma,
    Semicolon,
    Dot,
    Neck,      // :-
    NotPrefix, // \+
    Op(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct SpannedTok {
    tok: Tok,
    line: usize,
    col: usize,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax { line: self.line, col: self.col, msg: msg.into() }
    }

    fn peek_byte(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek_byte()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(b)
    }

    fn skip_ws_and_comments(&mut self) {
        loop {
            match self.peek_byte() {
                Some(b) if b.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'%') => {
                    while let Some(b) = self.peek_byte() {
                        if b == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn next_tok(&mut self) -> Result<SpannedTok, ParseError> {
        self.skip_ws_and_comments();
        let (line, col) = (self.line, self.col);
        let spanned = |tok| SpannedTok { tok, line, col };
        let Some(b) = self.peek_byte() else {
            return Ok(spanned(Tok::Eof));
        };
        match b {
            b'(' => {
                self.bump();
                Ok(spanned(Tok::LParen))
            }
            b')' => {
                self.bump();
                Ok(spanned(Tok::RParen))
            }
            b',' => {
                self.bump();
                Ok(spanned(Tok::Comma))
            }
            b';' => {
                self.bump();
                Ok(spanned(Tok::Semicolon))
            }
            b'.' => {
                self.bump();
                Ok(spanned(Tok::Dot))
            }
            b':' => {
                self.bump();
                if self.peek_byte() == Some(b'-') {
                    self.bump();
                    Ok(spanned(Tok::Neck))
                } else {
                    Err(self.err("expected '-' after ':'"))
                }
            }
            b'\\' => {
                self.bump();
                if self.peek_byte() == Some(b'+') {
                    self.bump();
                    Ok(spanned(Tok::NotPrefix))
                } else {
                    Err(self.err("expected '+' after '\\'"))
                }
            }
            b'=' => {
                self.bump();
                match self.peek_byte() {
                    Some(b':') => {
                        self.bump();
                        if self.peek_byte() == Some(b'=') {
                            self.bump();
                            Ok(spanned(Tok::Op("=:=")))
                        } else {
                            Err(self.err("expected '=' after '=:'"))
                        }
                    }
                    Some(b'<') => {
                        self.bump();
                        Ok(spanned(Tok::Op("=<")))
                    }
                    _ => Ok(spanned(Tok::Op("="))),
                }
            }
            b'>' => {
                self.bump();
                if self.peek_byte() == Some(b'=') {
                    self.bump();
                    Ok(spanned(Tok::Op(">=")))
                } else {
                    Ok(spanned(Tok::Op(">")))
                }
            }
            b'<' => {
                self.bump();
                Ok(spanned(Tok::Op("<")))
            }
            b'+' => {
                self.bump();
                Ok(spanned(Tok::Op("+")))
            }
            b'-' => {
                self.bump();
                Ok(spanned(Tok::Op("-")))
            }
            b'*' => {
                self.bump();
                Ok(spanned(Tok::Op("*")))
            }
            b'/' => {
                self.bump();
                Ok(spanned(Tok::Op("/")))
            }
            b'0'..=b'9' => {
                let start = self.pos;
                while matches!(self.peek_byte(), Some(b'0'..=b'9')) {
                    self.bump();
                }
                // A '.' is a decimal point only when digits follow; otherwise
                // it terminates the clause.
                if self.peek_byte() == Some(b'.')
                    && matches!(self.src.get(self.pos + 1), Some(b'0'..=b'9'))
                {
                    self.bump();
                    while matches!(self.peek_byte(), Some(b'0'..=b'9')) {
                        self.bump();
                    }
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let value: f64 = text
                    .parse()
                    .map_err(|_| self.err(format!("invalid number literal '{text}'")))?;
                Ok(spanned(Tok::Num(value)))
            }
            b'a'..=b'z' => {
                let name = self.lex_ident();
                Ok(spanned(Tok::Atom(name)))
            }
            b'A'..=b'Z' | b'_' => {
                let name = self.lex_ident();
                Ok(spanned(Tok::Var(name)))
            }
            other => Err(self.err(format!("unexpected character '{}'", other as char))),
        }
    }

    fn lex_ident(&mut self) -> String {
        let start = self.pos;
        while matches!(self.peek_byte(), Some(b) if b.is_ascii_alphanumeric() || b == b'_') {
            self.bump();
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string()
    }
}

/// Builtins recognised by the engine: name -> arity.
pub const BUILTINS: &[(&str, usize)] = &[
    ("is", 2),
    ("=", 2),
    ("=:=", 2),
    ("<", 2),
    (">", 2),
    ("=<", 2),
    (">=", 2),
];

pub fn is_builtin(name: &str, arity: usize) -> bool {
    BUILTINS.iter().any(|&(n, a)| n == name && a == arity)
}

fn builtin_arity(name: &str) -> Option<usize> {
    BUILTINS.iter().find(|&&(n, _)| n == name).map(|&(_, a)| a)
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    current: SpannedTok,
    anon_counter: usize,
}

const COMP_OPS: &[&str] = &["is", "=", "=:=", "<", ">", "=<", ">="];

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer::new(src);
        let current = lexer.next_tok()?;
        Ok(Parser { lexer, current, anon_counter: 0 })
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax { line: self.current.line, col: self.current.col, msg: msg.into() }
    }

    fn advance(&mut self) -> Result<SpannedTok, ParseError> {
        let next = self.lexer.next_tok()?;
        Ok(std::mem::replace(&mut self.current, next))
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.current.tok == tok {
            self.advance()?;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}, found {:?}", self.current.tok)))
        }
    }

    fn fresh_anon(&mut self) -> Term {
        self.anon_counter += 1;
        Term::var(&format!("_Anon{}", self.anon_counter))
    }

    /// Parses a full body expression: `;` over `,` over comparisons.
    fn parse_body_expr(&mut self) -> Result<Term, ParseError> {
        let mut left = self.parse_conj()?;
        while self.current.tok == Tok::Semicolon {
            self.advance()?;
            let right = self.parse_conj()?;
            left = Term::compound(";", vec![left, right]);
        }
        Ok(left)
    }

    fn parse_conj(&mut self) -> Result<Term, ParseError> {
        let mut left = self.parse_comparison()?;
        while self.current.tok == Tok::Comma {
            self.advance()?;
            let right = self.parse_comparison()?;
            left = Term::compound(",", vec![left, right]);
        }
        Ok(left)
    }

    fn parse_comparison(&mut self) -> Result<Term, ParseError> {
        if self.current.tok == Tok::NotPrefix {
            self.advance()?;
            let inner = self.parse_comparison()?;
            return Ok(Term::compound("\\+", vec![inner]));
        }
        let left = self.parse_additive()?;
        let op = match &self.current.tok {
            Tok::Op(op) if COMP_OPS.contains(op) => Some(op.to_string()),
            Tok::Atom(a) if a == "is" => Some("is".to_string()),
            _ => None,
        };
        if let Some(op) = op {
            self.advance()?;
            let right = self.parse_additive()?;
            Ok(Term::compound(&op, vec![left, right]))
        } else {
            Ok(left)
        }
    }

    fn parse_additive(&mut self) -> Result<Term, ParseError> {
        let mut left = self.parse_multiplicative()?;
        loop {
            let op = match self.current.tok {
                Tok::Op("+") => "+",
                Tok::Op("-") => "-",
                _ => break,
            };
            self.advance()?;
            let right = self.parse_multiplicative()?;
            left = Term::compound(op, vec![left, right]);
        }
        Ok(left)
    }

    fn parse_multiplicative(&mut self) -> Result<Term, ParseError> {
        let mut left = self.parse_unary()?;
        loop {
            let op = match self.current.tok {
                Tok::Op("*") => "*",
                Tok::Op("/") => "/",
                _ => break,
            };
            self.advance()?;
            let right = self.parse_unary()?;
            left = Term::compound(op, vec![left, right]);
        }
        Ok(left)
    }

    fn parse_unary(&mut self) -> Result<Term, ParseError> {
        if self.current.tok == Tok::Op("-") {
            self.advance()?;
            let inner = self.parse_unary()?;
            return Ok(match inner {
                Term::Num(n) => Term::Num(-n),
                other => Term::compound("-", vec![other]),
            });
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<Term, ParseError> {
        match self.current.tok.clone() {
            Tok::Num(n) => {
                self.advance()?;
                Ok(Term::Num(n))
            }
            Tok::Var(name) => {
                self.advance()?;
                if name == "_" {
                    Ok(self.fresh_anon())
                } else {
                    Ok(Term::Var(Sym::new(&name)))
                }
            }
            Tok::Atom(name) => {
                let (line, col) = (self.current.line, self.current.col);
                self.advance()?;
                if self.current.tok == Tok::LParen {
                    self.advance()?;
                    let mut args = vec![self.parse_comparison()?];
                    while self.current.tok == Tok::Comma {
                        self.advance()?;
                        args.push(self.parse_comparison()?);
                    }
                    self.expect(Tok::RParen, "')'")?;
                    if let Some(expected) = builtin_arity(&name) {
                        if expected != args.len() && name != "-" {
                            return Err(ParseError::Arity {
                                name,
                                expected,
                                found: args.len(),
                                line,
                                col,
                            });
                        }
                    }
                    Ok(Term::Compound(Sym::new(&name), args))
                } else {
                    Ok(Term::Atom(Sym::new(&name)))
                }
            }
            Tok::LParen => {
                self.advance()?;
                let inner = self.parse_body_expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            other => Err(self.err(format!("expected a term, found {other:?}"))),
        }
    }

    fn parse_clause(&mut self) -> Result<Option<Vec<Clause>>, ParseError> {
        if self.current.tok == Tok::Eof {
            return Ok(None);
        }
        let (line, col) = (self.current.line, self.current.col);
        let head = self.parse_comparison()?;
        match head {
            Term::Atom(_) | Term::Compound(_, _) => {}
            _ => return Err(self.err("clause head must be an atom or compound term")),
        }
        if let Some((functor, arity)) = head.functor() {
            if is_builtin(functor.as_str(), arity)
                || (functor.as_str() == "not" && arity == 1)
                || (functor.as_str() == "\\+" && arity == 1)
            {
                return Err(ParseError::ReservedHead {
                    name: functor.as_str().to_string(),
                    arity,
                    line,
                    col,
                });
            }
        }
        let bodies = if self.current.tok == Tok::Neck {
            self.advance()?;
            let body = self.parse_body_expr()?;
            body_to_dnf(&body)
        } else {
            vec![Vec::new()]
        };
        self.expect(Tok::Dot, "'.'")?;
        Ok(Some(
            bodies
                .into_iter()
                .map(|body| Clause { head: head.clone(), body })
                .collect(),
        ))
    }
}

/// Flattens a body term tree into disjunctive normal form: one literal list
/// per resulting clause. `,`/`;` nodes come from the parser; `not`/`\+` mark
/// negated literals.
fn body_to_dnf(term: &Term) -> Vec<Vec<Literal>> {
    match term {
        Term::Compound(f, args) if f.as_str() == ";" && args.len() == 2 => {
            let mut out = body_to_dnf(&args[0]);
            out.extend(body_to_dnf(&args[1]));
            out
        }
        Term::Compound(f, args) if f.as_str() == "," && args.len() == 2 => {
            let left = body_to_dnf(&args[0]);
            let right = body_to_dnf(&args[1]);
            let mut out = Vec::with_capacity(left.len() * right.len());
            for l in &left {
                for r in &right {
                    let mut conj = l.clone();
                    conj.extend(r.clone());
                    out.push(conj);
                }
            }
            out
        }
        Term::Compound(f, args)
            if (f.as_str() == "not" || f.as_str() == "\\+") && args.len() == 1 =>
        {
            // Negation over a disjunction is not distributed; the engine
            // evaluates the inner goal as-is, so restrict to simple goals.
            vec![vec![Literal::negative(args[0].clone())]]
        }
        other => vec![vec![Literal::positive(other.clone())]],
    }
}

/// Parses a program: a sequence of `.`-terminated clauses with `%` comments.
pub fn parse_program(text: &str) -> Result<Vec<Clause>, ParseError> {
    let mut parser = Parser::new(text)?;
    let mut clauses = Vec::new();
    while let Some(batch) = parser.parse_clause()? {
        clauses.extend(batch);
    }
    Ok(clauses)
}

/// Parses a single term (no trailing dot), for building queries from text.
pub fn parse_query(text: &str) -> Result<Term, ParseError> {
    let mut parser = Parser::new(text)?;
    let term = parser.parse_comparison()?;
    if parser.current.tok != Tok::Eof && parser.current.tok != Tok::Dot {
        return Err(parser.err("trailing input after query term"));
    }
    Ok(term)
}
