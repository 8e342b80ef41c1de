use std::collections::HashMap;

use hdlog_core::{Atom, Const, Fact, FactSet, Program, Rule, Term, Var};

fn matches(atom: &Atom, fact: &Fact, binding: &mut [Option<Const>]) -> bool {
    if atom.pred != fact.pred || atom.args.len() != fact.args.len() {
        return false;
    }
    for (t, &c) in atom.args.iter().zip(fact.args.iter()) {
        match *t {
            Term::Const(k) if k != c => return false,
            Term::Const(_) => {}
            Term::Var(v) => match binding[v.index()] {
                Some(b) if b != c => return false,
                Some(_) => {}
                None => binding[v.index()] = Some(c),
            },
        }
    }
    true
}

fn ground(atom: &Atom, binding: &[Option<Const>]) -> Fact {
    let args: Vec<Const> = atom
        .args
        .iter()
        .map(|t| match *t {
            Term::Const(c) => c,
            Term::Var(v) => binding[v.index()].expect("safe rule"),
        })
        .collect();
    Fact::new(atom.pred, args)
}

/// Calls `f` with every body instance over `facts` (one call per distinct
/// substitution), passing the grounded body.
fn each_instance(atoms: &[Atom], num_vars: usize, facts: &[Fact], f: &mut dyn FnMut(&[Option<Const>], &[Fact])) {
    fn go(
        atoms: &[Atom],
        facts: &[Fact],
        i: usize,
        binding: &mut Vec<Option<Const>>,
        body: &mut Vec<Fact>,
        f: &mut dyn FnMut(&[Option<Const>], &[Fact]),
    ) {
        if i == atoms.len() {
            f(binding, body);
            return;
        }
        for fact in facts {
            let saved = binding.clone();
            if matches(&atoms[i], fact, binding) {
                body.push(fact.clone());
                go(atoms, facts, i + 1, binding, body, f);
                body.pop();
            }
            *binding = saved;
        }
    }
    go(atoms, facts, 0, &mut vec![None; num_vars], &mut Vec::new(), f);
}

/// Head facts of all instances with body in `facts`, with instance counts.
pub fn instances(rule: &Rule, facts: &FactSet) -> HashMap<Fact, u32> {
    instances_touching(rule, facts, None)
}

/// Like [`instances`], restricted to instances whose body meets `delta`
/// when given.
pub fn instances_touching(rule: &Rule, facts: &FactSet, delta: Option<&FactSet>) -> HashMap<Fact, u32> {
    let list: Vec<Fact> = facts.iter().cloned().collect();
    let mut out = HashMap::new();
    each_instance(&rule.body, rule.num_vars(), &list, &mut |b, body| {
        if delta.is_none_or(|d| body.iter().any(|f| d.contains(f))) {
            *out.entry(ground(&rule.head, b)).or_insert(0) += 1;
        }
    });
    out
}

/// Matches of the body atoms listed in `lambda`, projected onto `chi`,
/// with match counts.
pub fn node_matches(rule: &Rule, lambda: &[usize], chi: &[Var], facts: &FactSet) -> HashMap<Vec<Const>, u32> {
    let atoms: Vec<Atom> = lambda.iter().map(|&a| rule.body[a].clone()).collect();
    let list: Vec<Fact> = facts.iter().cloned().collect();
    let mut out = HashMap::new();
    each_instance(&atoms, rule.num_vars(), &list, &mut |b, _| {
        let row = chi.iter().map(|v| b[v.index()].expect("chi covered by lambda")).collect();
        *out.entry(row).or_insert(0) += 1;
    });
    out
}

/// Fixpoint of naive rule application.
pub fn naive_mat(program: &Program, explicit: &FactSet) -> FactSet {
    let mut all = explicit.clone();
    loop {
        let mut new = Vec::new();
        for r in program.rules() {
            new.extend(instances(r, &all).into_keys().filter(|f| !all.contains(f)));
        }
        if new.is_empty() {
            return all;
        }
        all.extend(new);
    }
}

/// `r[I ∸ Δ⁺] \ I` with `Δ⁺ ⊆ I`.
pub fn add_contract(rule: &Rule, i: &FactSet, delta: &FactSet) -> FactSet {
    instances_touching(rule, i, Some(delta)).into_keys().filter(|f| !i.contains(f)).collect()
}

/// `r[I ∸ Δ⁻] ∩ (I \ Δ⁻)` with `Δ⁻ ⊆ I`.
pub fn del_contract(rule: &Rule, i: &FactSet, delta: &FactSet) -> FactSet {
    instances_touching(rule, i, Some(delta))
        .into_keys()
        .filter(|f| i.contains(f) && !delta.contains(f))
        .collect()
}

/// `r[I] ∩ Δ`.
pub fn red_contract(rule: &Rule, i: &FactSet, delta: &FactSet) -> FactSet {
    instances(rule, i).into_keys().filter(|f| delta.contains(f)).collect()
}
