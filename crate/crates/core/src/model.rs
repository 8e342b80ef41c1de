//! Terms, atoms, facts, rules and the symbol interner.
//!
//! Constants and predicates are interned to dense integer ids when a program
//! or dataset is loaded; everything downstream of the parser compares ids
//! only. Variables are numbered per rule in order of first occurrence (head
//! first, then body left to right).

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// An interned constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Const(pub u32);

/// An interned predicate symbol. The arity is fixed by the [`Interner`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pred(pub u32);

/// A rule-local variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub u32);

impl Var {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Stable identifier of a rule: its position in the program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleId(pub usize);

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A ground tuple of constants. Shared so that facts can sit in several
/// indexes without copying.
pub type Tuple = Arc<[Const]>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Var),
    Const(Const),
}

impl Term {
    pub fn as_var(self) -> Option<Var> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub pred: Pred,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: Pred, args: Vec<Term>) -> Self {
        Atom { pred, args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    /// Variables of the atom, possibly with repetitions.
    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.args.iter().filter_map(|t| t.as_var())
    }

    /// Instantiates the atom; `None` if some variable is unbound.
    pub fn ground(&self, binding: &[Option<Const>]) -> Option<Fact> {
        let mut args = Vec::with_capacity(self.args.len());
        for t in &self.args {
            args.push(match *t {
                Term::Const(c) => c,
                Term::Var(v) => binding[v.index()]?,
            });
        }
        Some(Fact::new(self.pred, args))
    }
}

/// A variable-free atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fact {
    pub pred: Pred,
    pub args: Tuple,
}

impl Fact {
    pub fn new(pred: Pred, args: impl Into<Tuple>) -> Self {
        Fact { pred, args: args.into() }
    }
}

pub type FactSet = HashSet<Fact>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unsafe rule: head variable ?{var} does not occur in the body")]
    UnsafeRule { var: String },
    #[error("rule has an empty body")]
    EmptyBody,
    #[error("arity conflict for predicate {pred}: declared with arity {first}, used with arity {second}")]
    ArityConflict { pred: String, first: usize, second: usize },
}

/// A safe rule `head :- body[0], ..., body[n]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub id: RuleId,
    pub head: Atom,
    pub body: Vec<Atom>,
    var_names: Vec<String>,
}

impl Rule {
    /// Builds a rule, checking safety. `var_names[i]` names `Var(i)`; every
    /// variable used in the atoms must have a name.
    pub fn new(
        id: RuleId,
        head: Atom,
        body: Vec<Atom>,
        var_names: Vec<String>,
    ) -> Result<Rule, ModelError> {
        if body.is_empty() {
            return Err(ModelError::EmptyBody);
        }
        let mut in_body = vec![false; var_names.len()];
        for v in body.iter().flat_map(|a| a.vars()) {
            in_body[v.index()] = true;
        }
        if let Some(v) = head.vars().find(|v| !in_body[v.index()]) {
            return Err(ModelError::UnsafeRule {
                var: var_names[v.index()].clone(),
            });
        }
        Ok(Rule { id, head, body, var_names })
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn var_name(&self, v: Var) -> &str {
        &self.var_names[v.index()]
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    /// Distinct head variables in order of first occurrence.
    pub fn head_vars(&self) -> Vec<Var> {
        dedup_vars(self.head.vars())
    }

    /// Distinct variables of the given body atoms in order of first occurrence.
    pub fn vars_of<'a>(&'a self, atoms: impl IntoIterator<Item = usize> + 'a) -> Vec<Var> {
        dedup_vars(atoms.into_iter().flat_map(move |i| self.body[i].vars()))
    }

    pub fn body_vars(&self) -> Vec<Var> {
        self.vars_of(0..self.body.len())
    }

    /// Same rule with a different id (used when assembling programs).
    pub fn with_id(mut self, id: RuleId) -> Rule {
        self.id = id;
        self
    }
}

pub(crate) fn dedup_vars(vars: impl Iterator<Item = Var>) -> Vec<Var> {
    let mut out: Vec<Var> = Vec::new();
    for v in vars {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// A finite set of safe rules, identified by position.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    rules: Vec<Rule>,
}

impl Program {
    /// Renumbers rule ids to their positions.
    pub fn new(rules: Vec<Rule>) -> Self {
        let rules = rules
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.with_id(RuleId(i)))
            .collect();
        Program { rules }
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, id: RuleId) -> &Rule {
        &self.rules[id.0]
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// A total substitution over a rule's variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Substitution(pub Vec<Const>);

impl Substitution {
    /// Converts a complete binding; `None` if a variable is unbound.
    pub fn from_binding(binding: &[Option<Const>]) -> Option<Self> {
        binding.iter().copied().collect::<Option<Vec<_>>>().map(Substitution)
    }

    pub fn get(&self, v: Var) -> Const {
        self.0[v.index()]
    }

    pub fn apply(&self, atom: &Atom) -> Fact {
        let args: Vec<Const> = atom
            .args
            .iter()
            .map(|t| match *t {
                Term::Const(c) => c,
                Term::Var(v) => self.get(v),
            })
            .collect();
        Fact::new(atom.pred, args)
    }
}

/// Symbol tables for constants and predicates.
#[derive(Clone, Debug, Default)]
pub struct Interner {
    consts: Vec<String>,
    const_ids: HashMap<String, Const>,
    preds: Vec<(String, usize)>,
    pred_ids: HashMap<String, Pred>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern_const(&mut self, name: &str) -> Const {
        if let Some(&c) = self.const_ids.get(name) {
            return c;
        }
        let c = Const(self.consts.len() as u32);
        self.consts.push(name.to_owned());
        self.const_ids.insert(name.to_owned(), c);
        c
    }

    pub fn lookup_const(&self, name: &str) -> Option<Const> {
        self.const_ids.get(name).copied()
    }

    pub fn const_name(&self, c: Const) -> &str {
        &self.consts[c.0 as usize]
    }

    pub fn num_consts(&self) -> usize {
        self.consts.len()
    }

    /// Interns a predicate, fixing its arity on first use.
    pub fn predicate(&mut self, name: &str, arity: usize) -> Result<Pred, ModelError> {
        if let Some(&p) = self.pred_ids.get(name) {
            let first = self.preds[p.0 as usize].1;
            if first != arity {
                return Err(ModelError::ArityConflict {
                    pred: name.to_owned(),
                    first,
                    second: arity,
                });
            }
            return Ok(p);
        }
        let p = Pred(self.preds.len() as u32);
        self.preds.push((name.to_owned(), arity));
        self.pred_ids.insert(name.to_owned(), p);
        Ok(p)
    }

    pub fn lookup_pred(&self, name: &str) -> Option<Pred> {
        self.pred_ids.get(name).copied()
    }

    pub fn pred_name(&self, p: Pred) -> &str {
        &self.preds[p.0 as usize].0
    }

    pub fn arity(&self, p: Pred) -> usize {
        self.preds[p.0 as usize].1
    }

    pub fn num_preds(&self) -> usize {
        self.preds.len()
    }

    /// Builds a fact from names, interning as needed.
    pub fn fact(&mut self, pred: &str, args: &[&str]) -> Result<Fact, ModelError> {
        let p = self.predicate(pred, args.len())?;
        let args: Vec<Const> = args.iter().map(|a| self.intern_const(a)).collect();
        Ok(Fact::new(p, args))
    }

    pub fn display_const(&self, c: Const) -> String {
        quote_const(self.const_name(c))
    }

    pub fn display_fact(&self, f: &Fact) -> String {
        let args: Vec<String> = f.args.iter().map(|&c| self.display_const(c)).collect();
        format!("{}({})", self.pred_name(f.pred), args.join(","))
    }

    pub fn display_atom(&self, rule: &Rule, atom: &Atom) -> String {
        let args: Vec<String> = atom
            .args
            .iter()
            .map(|t| match *t {
                Term::Var(v) => format!("?{}", rule.var_name(v)),
                Term::Const(c) => self.display_const(c),
            })
            .collect();
        format!("{}({})", self.pred_name(atom.pred), args.join(","))
    }

    pub fn display_rule(&self, rule: &Rule) -> String {
        let body: Vec<String> = rule.body.iter().map(|a| self.display_atom(rule, a)).collect();
        format!("{} :- {}.", self.display_atom(rule, &rule.head), body.join(", "))
    }

    /// Sort key giving the dump order: predicate name, then constant text
    /// position by position.
    pub fn fact_sort_key<'a>(&'a self, f: &Fact) -> (&'a str, Vec<&'a str>) {
        (
            self.pred_name(f.pred),
            f.args.iter().map(|&c| self.const_name(c)).collect(),
        )
    }

    /// Facts in deterministic dump order.
    pub fn sorted_facts<'f>(&self, facts: impl IntoIterator<Item = &'f Fact>) -> Vec<&'f Fact> {
        let mut v: Vec<&Fact> = facts.into_iter().collect();
        v.sort_by(|a, b| self.fact_sort_key(a).cmp(&self.fact_sort_key(b)));
        v
    }
}

pub(crate) fn is_bare_const(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn quote_const(s: &str) -> String {
    if is_bare_const(s) {
        return s.to_owned();
    }
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arity_is_fixed_on_first_use() {
        let mut i = Interner::new();
        let p = i.predicate("E", 2).unwrap();
        assert_eq!(i.predicate("E", 2).unwrap(), p);
        let err = i.predicate("E", 3).unwrap_err();
        assert_eq!(
            err,
            ModelError::ArityConflict { pred: "E".into(), first: 2, second: 3 }
        );
    }

    #[test]
    fn unsafe_rule_is_rejected() {
        let mut i = Interner::new();
        let p = i.predicate("P", 1).unwrap();
        let q = i.predicate("Q", 1).unwrap();
        let err = Rule::new(
            RuleId(0),
            Atom::new(p, vec![Term::Var(Var(0))]),
            vec![Atom::new(q, vec![Term::Var(Var(1))])],
            vec!["x".into(), "y".into()],
        )
        .unwrap_err();
        assert_eq!(err, ModelError::UnsafeRule { var: "x".into() });
    }

    #[test]
    fn constants_needing_quotes_are_quoted() {
        let mut i = Interner::new();
        let a = i.intern_const("a0");
        let b = i.intern_const("hello world");
        let c = i.intern_const("say \"hi\"");
        assert_eq!(i.display_const(a), "a0");
        assert_eq!(i.display_const(b), "\"hello world\"");
        assert_eq!(i.display_const(c), "\"say \\\"hi\\\"\"");
    }
}
