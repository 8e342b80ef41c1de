//! Plan-based rule evaluation: seminaïve materialisation and the standard
//! Del/Red/Add operators.
//!
//! Every function here reads Δ from the delta region of the store it is
//! handed; I is the whole store and I \ Δ its old region.

use std::collections::HashMap;
use std::fmt;

use crate::join::{JoinPlan, UNBOUND};
use crate::model::{Const, Fact, FactSet, Program, Rule, RuleId, Substitution, Term};
use crate::store::{FactStore, Region, Tag};

/// Counters for one evaluation run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoundStats {
    pub rounds: usize,
    pub substitutions_considered: u64,
    pub facts_derived: usize,
    /// substitutions_considered split by round.
    pub per_round: Vec<u64>,
}

impl RoundStats {
    pub fn begin_round(&mut self) {
        self.rounds += 1;
        self.per_round.push(0);
    }

    pub fn add_work(&mut self, work: u64) {
        self.substitutions_considered += work;
        if let Some(last) = self.per_round.last_mut() {
            *last += work;
        }
    }

    pub fn merge(&mut self, other: &RoundStats) {
        self.rounds += other.rounds;
        self.substitutions_considered += other.substitutions_considered;
        self.facts_derived += other.facts_derived;
        self.per_round.extend_from_slice(&other.per_round);
    }
}

impl fmt::Display for RoundStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rounds={}", self.rounds)?;
        writeln!(f, "substitutions_considered={}", self.substitutions_considered)?;
        write!(f, "facts_derived={}", self.facts_derived)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("body index {index} out of range for a rule with {len} body atoms")]
pub struct IndexOutOfRange {
    pub index: usize,
    pub len: usize,
}

/// Textual-order join plans for one rule.
#[derive(Clone, Debug)]
pub struct RulePlans {
    body: JoinPlan,
    head_bound: JoinPlan,
}

impl RulePlans {
    pub fn new(rule: &Rule) -> Self {
        RulePlans {
            body: JoinPlan::new(&rule.body, &[], rule.num_vars()),
            head_bound: JoinPlan::new(&rule.body, &rule.head_vars(), rule.num_vars()),
        }
    }

    pub fn register(&self, store: &mut FactStore) {
        self.body.register(store);
        self.head_bound.register(store);
    }
}

fn labeled_regions(n: usize, i: usize) -> Vec<Region> {
    (0..n)
        .map(|j| match j.cmp(&i) {
            std::cmp::Ordering::Less => Region::Old,
            std::cmp::Ordering::Equal => Region::Delta,
            std::cmp::Ordering::Greater => Region::All,
        })
        .collect()
}

/// Visits every substitution of `B_0^{I\Δ} ∧ … ∧ B_i^Δ ∧ … ∧ B_n^I` for
/// every i, in order of i. Positions whose predicate has no delta facts
/// are skipped.
pub fn for_each_labeled(
    rule: &Rule,
    plans: &RulePlans,
    store: &FactStore,
    work: &mut u64,
    f: &mut dyn FnMut(usize, &[Const]),
) {
    let n = rule.body.len();
    let mut binding = vec![UNBOUND; rule.num_vars()];
    for i in 0..n {
        if store.region_len(rule.body[i].pred, Region::Delta) == 0 {
            continue;
        }
        plans.body.run(store, &labeled_regions(n, i), &mut binding, work, &mut |s| {
            f(i, s);
            true
        });
    }
}

fn head_of(rule: &Rule, s: &[Const]) -> Fact {
    let args: Vec<Const> = rule
        .head
        .args
        .iter()
        .map(|t| match *t {
            Term::Const(c) => c,
            Term::Var(v) => s[v.index()],
        })
        .collect();
    Fact::new(rule.head.pred, args)
}

/// r[I]: heads of all substitutions matching the body in I.
pub fn apply_rule(rule: &Rule, store: &FactStore) -> FactSet {
    let plan = JoinPlan::new(&rule.body, &[], rule.num_vars());
    let mut binding = vec![UNBOUND; rule.num_vars()];
    let mut out = FactSet::new();
    plan.run(store, &vec![Region::All; rule.body.len()], &mut binding, &mut 0, &mut |s| {
        out.insert(head_of(rule, s));
        true
    });
    out
}

/// Substitutions matching the body with atom `i` in Δ, earlier atoms in
/// I \ Δ and later atoms in I.
pub fn eval_body_labeled(rule: &Rule, i: usize, store: &FactStore) -> Result<Vec<Substitution>, IndexOutOfRange> {
    let n = rule.body.len();
    if i >= n {
        return Err(IndexOutOfRange { index: i, len: n });
    }
    let plan = JoinPlan::new(&rule.body, &[], rule.num_vars());
    let mut binding = vec![UNBOUND; rule.num_vars()];
    let mut out = Vec::new();
    plan.run(store, &labeled_regions(n, i), &mut binding, &mut 0, &mut |s| {
        out.push(Substitution(s.to_vec()));
        true
    });
    Ok(out)
}

/// Head facts of r[I ∸ Δ] with the number of rule instances producing each.
pub fn derive_counted(rule: &Rule, plans: &RulePlans, store: &FactStore, work: &mut u64) -> HashMap<Fact, u32> {
    let mut out: HashMap<Fact, u32> = HashMap::new();
    for_each_labeled(rule, plans, store, work, &mut |_, s| {
        *out.entry(head_of(rule, s)).or_default() += 1;
    });
    out
}

/// Π[I ∸ Δ].
pub fn delta_apply(program: &Program, store: &FactStore) -> FactSet {
    let mut out = FactSet::new();
    for rule in program.rules() {
        let plans = RulePlans::new(rule);
        out.extend(derive_counted(rule, &plans, store, &mut 0).into_keys());
    }
    out
}

/// Facts returned by a standard operator together with the per-fact
/// number of rule instances enumerated to obtain them.
#[derive(Clone, Debug, Default)]
pub struct Derived {
    pub facts: FactSet,
    pub instances: HashMap<Fact, u32>,
}

/// r[I ∸ Δ⁺] \ I, with Δ⁺ the delta region.
pub fn std_add(rule: &Rule, plans: &RulePlans, store: &FactStore, work: &mut u64) -> Derived {
    let instances = derive_counted(rule, plans, store, work);
    let facts = instances.keys().filter(|f| !store.contains(f)).cloned().collect();
    Derived { facts, instances }
}

/// r[I ∸ Δ⁻] ∩ (I \ Δ⁻), with Δ⁻ the delta region.
pub fn std_del(rule: &Rule, plans: &RulePlans, store: &FactStore, work: &mut u64) -> Derived {
    let instances = derive_counted(rule, plans, store, work);
    let facts = instances.keys().filter(|f| store.contains_in(f, Region::Old)).cloned().collect();
    Derived { facts, instances }
}

/// Binds the head of `rule` to `fact`; None if they do not unify.
pub(crate) fn unify_head(rule: &Rule, fact: &Fact) -> Option<Vec<Const>> {
    if rule.head.pred != fact.pred {
        return None;
    }
    let mut binding = vec![UNBOUND; rule.num_vars()];
    for (t, &c) in rule.head.args.iter().zip(fact.args.iter()) {
        match *t {
            Term::Const(k) if k != c => return None,
            Term::Const(_) => {}
            Term::Var(v) => {
                let slot = &mut binding[v.index()];
                if *slot != UNBOUND && *slot != c {
                    return None;
                }
                *slot = c;
            }
        }
    }
    Some(binding)
}

/// r[I] ∩ Δ: the facts of `delta` with a one-step derivation by `rule`
/// from I. All matches are enumerated so that `work` does not depend on
/// index order.
pub fn std_red(rule: &Rule, plans: &RulePlans, store: &FactStore, delta: &FactSet, work: &mut u64) -> FactSet {
    let regions = vec![Region::All; rule.body.len()];
    let mut out = FactSet::new();
    for f in delta {
        let Some(mut binding) = unify_head(rule, f) else { continue };
        let mut found = false;
        plans.head_bound.run(store, &regions, &mut binding, work, &mut |_| {
            found = true;
            true
        });
        if found {
            out.insert(f.clone());
        }
    }
    out
}

/// Seminaïve materialisation of `program` over `explicit`.
pub fn mat(program: &Program, explicit: &FactSet) -> (FactStore, RoundStats) {
    mat_observed(program, explicit, &mut |_, _, _| {})
}

/// [`mat`], reporting every rule instance considered as (rule, body
/// position in Δ, substitution).
pub fn mat_observed(
    program: &Program,
    explicit: &FactSet,
    observer: &mut dyn FnMut(RuleId, usize, &[Const]),
) -> (FactStore, RoundStats) {
    let plans: Vec<RulePlans> = program.rules().iter().map(RulePlans::new).collect();
    let mut store = FactStore::new();
    for p in &plans {
        p.register(&mut store);
    }
    for f in explicit {
        store.insert(f.clone(), Tag::Delta);
    }
    let mut stats = RoundStats::default();
    loop {
        stats.begin_round();
        let mut work = 0;
        let mut new = FactSet::new();
        for (rule, p) in program.rules().iter().zip(&plans) {
            for_each_labeled(rule, p, &store, &mut work, &mut |i, s| {
                observer(rule.id, i, s);
                let h = head_of(rule, s);
                if !store.contains(&h) {
                    new.insert(h);
                }
            });
        }
        stats.add_work(work);
        store.commit_delta();
        if new.is_empty() {
            break;
        }
        stats.facts_derived += new.len();
        for f in new {
            store.insert(f, Tag::Delta);
        }
    }
    (store, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Interner;
    use crate::parse::{parse_facts, parse_program};

    struct Fixture {
        i: Interner,
        p: Program,
    }

    impl Fixture {
        fn new(program: &str) -> Self {
            let mut i = Interner::new();
            let p = parse_program(program, &mut i).unwrap();
            Fixture { i, p }
        }

        fn facts(&mut self, text: &str) -> FactSet {
            parse_facts(text, &mut self.i).unwrap()
        }

        fn store(&mut self, all: &str, delta: &str) -> FactStore {
            let all = self.facts(all);
            let delta = self.facts(delta);
            FactStore::with_delta(&all, &delta)
        }
    }

    const TC: &str = "T(?x,?y) :- E(?x,?y).\nT(?x,?z) :- E(?x,?y), T(?y,?z).";

    #[test]
    fn apply_rule_on_triangle() {
        let mut fx = Fixture::new("R(?x,?z) :- E(?x,?y), E(?y,?z).");
        let s = fx.store("E(1,2). E(2,3). E(3,1).", "");
        let want = fx.facts("R(1,3). R(2,1). R(3,2).");
        assert_eq!(apply_rule(&fx.p.rules()[0], &s), want);
        assert!(apply_rule(&fx.p.rules()[0], &FactStore::new()).is_empty());
    }

    #[test]
    fn labeled_evaluation_picks_the_delta_position() {
        let mut fx = Fixture::new("H(?x) :- A(?x), B(?x).");
        let s = fx.store("A(1). B(1). A(2). B(2).", "B(2).");
        let r = &fx.p.rules()[0];
        assert!(eval_body_labeled(r, 0, &s).unwrap().is_empty());
        let two = fx.i.lookup_const("2").unwrap();
        assert_eq!(eval_body_labeled(r, 1, &s).unwrap(), vec![Substitution(vec![two])]);
        assert_eq!(eval_body_labeled(r, 2, &s), Err(IndexOutOfRange { index: 2, len: 2 }));
        assert_eq!(delta_apply(&fx.p, &s), fx.facts("H(2)."));
    }

    #[test]
    fn delta_equal_to_store_gives_apply_rule() {
        let mut fx = Fixture::new("H(?x) :- A(?x), B(?x).");
        let s = fx.store("A(1). B(1). A(2). B(2).", "A(1). B(1). A(2). B(2).");
        assert_eq!(delta_apply(&fx.p, &s), apply_rule(&fx.p.rules()[0], &s));
        let empty = fx.store("A(1). B(1).", "");
        assert!(delta_apply(&fx.p, &empty).is_empty());
    }

    #[test]
    fn transitive_closure_of_a_chain() {
        let mut fx = Fixture::new(TC);
        let e = fx.facts("E(1,2). E(2,3). E(3,4).");
        let (store, stats) = mat(&fx.p, &e);
        assert_eq!(store.len() - e.len(), 6);
        assert_eq!(stats.facts_derived, 6);
        let (store, _) = mat(&Program::new(vec![]), &e);
        assert_eq!(store.facts(Region::All), e);
    }

    #[test]
    fn standard_operators_on_transitive_closure() {
        let mut fx = Fixture::new(TC);
        let r = fx.p.rules()[1].clone();
        let plans = RulePlans::new(&r);

        let s = fx.store("E(1,2). E(2,3). T(2,3).", "T(2,3).");
        assert_eq!(std_add(&r, &plans, &s, &mut 0).facts, fx.facts("T(1,3)."));
        let s = fx.store("E(1,2). E(2,3). T(2,3). T(1,3).", "");
        assert!(std_add(&r, &plans, &s, &mut 0).facts.is_empty());

        let s = fx.store("E(1,2). E(2,3). T(2,3). T(1,3).", "E(1,2).");
        assert_eq!(std_del(&r, &plans, &s, &mut 0).facts, fx.facts("T(1,3)."));
        let s = fx.store("E(1,2). E(2,3). T(2,3). T(1,3).", "E(1,2). T(1,3).");
        assert!(std_del(&r, &plans, &s, &mut 0).facts.is_empty());

        let s = fx.store("E(1,2). E(2,3). T(2,3).", "");
        let d = fx.facts("T(1,3).");
        assert_eq!(std_red(&r, &plans, &s, &d, &mut 0), d);
        assert!(std_red(&r, &plans, &s, &FactSet::new(), &mut 0).is_empty());
        let d = fx.facts("E(1,3).");
        assert!(std_red(&r, &plans, &s, &d, &mut 0).is_empty());
    }

    #[test]
    fn head_constants_and_repeats_unify() {
        let mut fx = Fixture::new("H(?x,?x,c) :- A(?x).");
        let s = fx.store("A(1).", "");
        let r = fx.p.rules()[0].clone();
        let plans = RulePlans::new(&r);
        let good = fx.facts("H(1,1,c).");
        let bad = fx.facts("H(1,2,c). H(1,1,d).");
        assert_eq!(std_red(&r, &plans, &s, &good, &mut 0), good);
        assert!(std_red(&r, &plans, &s, &bad, &mut 0).is_empty());
    }

    #[test]
    fn no_rule_instance_is_considered_twice() {
        let mut fx = Fixture::new(TC);
        let e = fx.facts("E(1,2). E(2,3). E(3,1). E(3,4). E(4,4).");
        let mut seen = std::collections::HashSet::new();
        mat_observed(&fx.p, &e, &mut |r, _, s| {
            assert!(seen.insert((r, s.to_vec())), "repeated instance");
        });
        assert!(!seen.is_empty());
    }
}
