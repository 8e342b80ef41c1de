//! Reader for `.dl` program files and `.facts` fact files.
//!
//! ```text
//! % transitive closure
//! T(?x,?y) :- E(?x,?y).
//! T(?x,?z) :- E(?x,?y), T(?y,?z).
//! ```
//!
//! Variables start with `?`. Constants are bare words (`[A-Za-z0-9_]+`) or
//! double-quoted strings with `\"` and `\\` escapes. `%` starts a line comment.

use std::collections::HashMap;

use thiserror::Error;

use crate::model::{Atom, FactSet, Interner, ModelError, Program, Rule, RuleId, Term, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("variable ?{0} in fact position")]
    VariableInFact(String),
    #[error("expected a rule, found a fact (facts belong in a fact file)")]
    FactInProgram,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Var(String),
    Str(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Implies,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next();
        if c == Some('\n') {
            self.line += 1;
            self.column = 1;
        } else if c.is_some() {
            self.column += 1;
        }
        c
    }

    fn word(&mut self) -> String {
        let mut w = String::new();
        while let Some(c) = self.peek().filter(|&c| is_word_char(c)) {
            w.push(c);
            self.bump();
        }
        w
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut cur = Cursor { chars: text.chars().peekable(), line: 1, column: 1 };
    let err = |line, column, msg: &str| ParseError {
        line,
        column,
        kind: ParseErrorKind::Syntax(msg.to_owned()),
    };
    while let Some(c) = cur.peek() {
        let (line, column) = (cur.line, cur.column);
        let tok = match c {
            '%' => {
                while cur.peek().is_some_and(|c| c != '\n') {
                    cur.bump();
                }
                continue;
            }
            c if c.is_whitespace() => {
                cur.bump();
                continue;
            }
            '(' | ')' | ',' | '.' => {
                cur.bump();
                match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    _ => Tok::Dot,
                }
            }
            ':' => {
                cur.bump();
                if cur.bump() != Some('-') {
                    return Err(err(line, column, "expected ':-'"));
                }
                Tok::Implies
            }
            '?' => {
                cur.bump();
                let name = cur.word();
                if name.is_empty() {
                    return Err(err(line, column, "empty variable name"));
                }
                Tok::Var(name)
            }
            '"' => {
                cur.bump();
                let mut s = String::new();
                loop {
                    match cur.bump() {
                        None => return Err(err(line, column, "unterminated string")),
                        Some('"') => break,
                        Some('\\') => match cur.bump() {
                            Some(e @ ('"' | '\\')) => s.push(e),
                            Some('n') => s.push('\n'),
                            _ => return Err(err(cur.line, cur.column, "bad escape")),
                        },
                        Some(c) => s.push(c),
                    }
                }
                Tok::Str(s)
            }
            c if is_word_char(c) => Tok::Word(cur.word()),
            other => {
                return Err(err(line, column, &format!("unexpected character {other:?}")));
            }
        };
        out.push(Spanned { tok, line, column });
    }
    Ok(out)
}

/// A parsed atom before interning. Terms keep their source text.
#[derive(Debug)]
struct RawAtom {
    pred: String,
    args: Vec<RawTerm>,
    line: usize,
    column: usize,
}

#[derive(Debug)]
enum RawTerm {
    Var(String),
    Const(String),
}

#[derive(Debug)]
struct RawStatement {
    head: RawAtom,
    body: Option<Vec<RawAtom>>,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    eof: (usize, usize),
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        let toks = lex(text)?;
        let lines = text.split('\n').count().max(1);
        let last = text.rsplit('\n').next().unwrap_or("").chars().count() + 1;
        Ok(Parser { toks, pos: 0, eof: (lines, last) })
    }

    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map(|s| (s.line, s.column)).unwrap_or(self.eof)
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, column) = self.here();
        Err(ParseError { line, column, kind: ParseErrorKind::Syntax(msg.into()) })
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek().map(|s| &s.tok) == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            self.syntax(format!("expected {what}"))
        }
    }

    fn statement(&mut self) -> Result<Option<RawStatement>, ParseError> {
        if self.peek().is_none() {
            return Ok(None);
        }
        let head = self.atom()?;
        let body = if self.eat(&Tok::Implies) {
            let mut body = vec![self.atom()?];
            while self.eat(&Tok::Comma) {
                body.push(self.atom()?);
            }
            Some(body)
        } else {
            None
        };
        self.expect(Tok::Dot, "'.'")?;
        Ok(Some(RawStatement { head, body }))
    }

    fn atom(&mut self) -> Result<RawAtom, ParseError> {
        let (line, column) = self.here();
        let pred = match self.peek().map(|s| &s.tok) {
            Some(Tok::Word(w)) if !w.starts_with(|c: char| c.is_ascii_digit()) => w.clone(),
            _ => return self.syntax("expected a predicate name"),
        };
        self.pos += 1;
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) {
            if !self.eat(&Tok::RParen) {
                loop {
                    args.push(self.term()?);
                    if self.eat(&Tok::RParen) {
                        break;
                    }
                    self.expect(Tok::Comma, "',' or ')'")?;
                }
            }
        }
        Ok(RawAtom { pred, args, line, column })
    }

    fn term(&mut self) -> Result<RawTerm, ParseError> {
        let t = match self.peek().map(|s| s.tok.clone()) {
            Some(Tok::Var(v)) => RawTerm::Var(v),
            Some(Tok::Word(w)) | Some(Tok::Str(w)) => RawTerm::Const(w),
            _ => return self.syntax("expected a term"),
        };
        self.pos += 1;
        Ok(t)
    }
}

fn at(line: usize, column: usize, kind: impl Into<ParseErrorKind>) -> ParseError {
    ParseError { line, column, kind: kind.into() }
}

fn intern_atom(
    raw: &RawAtom,
    interner: &mut Interner,
    vars: &mut HashMap<String, Var>,
    var_names: &mut Vec<String>,
) -> Result<Atom, ParseError> {
    let pred = interner
        .predicate(&raw.pred, raw.args.len())
        .map_err(|e| at(raw.line, raw.column, e))?;
    let args = raw
        .args
        .iter()
        .map(|t| match t {
            RawTerm::Const(c) => Term::Const(interner.intern_const(c)),
            RawTerm::Var(name) => Term::Var(*vars.entry(name.clone()).or_insert_with(|| {
                var_names.push(name.clone());
                Var(var_names.len() as u32 - 1)
            })),
        })
        .collect();
    Ok(Atom::new(pred, args))
}

/// Parses a program file. Every rule is checked for safety and every
/// predicate for a consistent arity.
pub fn parse_program(text: &str, interner: &mut Interner) -> Result<Program, ParseError> {
    let mut p = Parser::new(text)?;
    let mut rules = Vec::new();
    while let Some(stmt) = p.statement()? {
        let (line, column) = (stmt.head.line, stmt.head.column);
        let Some(body) = stmt.body else {
            return Err(at(line, column, ParseErrorKind::FactInProgram));
        };
        let mut vars = HashMap::new();
        let mut names = Vec::new();
        let head = intern_atom(&stmt.head, interner, &mut vars, &mut names)?;
        let body = body
            .iter()
            .map(|a| intern_atom(a, interner, &mut vars, &mut names))
            .collect::<Result<Vec<_>, _>>()?;
        let rule = Rule::new(RuleId(rules.len()), head, body, names)
            .map_err(|e| at(line, column, e))?;
        rules.push(rule);
    }
    Ok(Program::new(rules))
}

/// Parses a fact file into a deduplicated fact set.
pub fn parse_facts(text: &str, interner: &mut Interner) -> Result<FactSet, ParseError> {
    let mut p = Parser::new(text)?;
    let mut facts = FactSet::new();
    while let Some(stmt) = p.statement()? {
        let a = &stmt.head;
        if stmt.body.is_some() {
            return Err(at(a.line, a.column, ParseErrorKind::Syntax("expected a fact, found a rule".into())));
        }
        if let Some(RawTerm::Var(v)) = a.args.iter().find(|t| matches!(t, RawTerm::Var(_))) {
            return Err(at(a.line, a.column, ParseErrorKind::VariableInFact(v.clone())));
        }
        let args: Vec<&str> = a
            .args
            .iter()
            .map(|t| match t {
                RawTerm::Const(c) => c.as_str(),
                RawTerm::Var(_) => unreachable!(),
            })
            .collect();
        let fact = interner.fact(&a.pred, &args).map_err(|e| at(a.line, a.column, e))?;
        facts.insert(fact);
    }
    Ok(facts)
}
