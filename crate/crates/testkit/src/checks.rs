//! Comparisons of engine operators and updates against the naive
//! evaluators. Each returns a description of the first mismatch.

use std::collections::HashMap;

use hdlog_core::decomp::{decompose, stats_for, HypertreeDecomposition};
use hdlog_core::dred::{EngineConfig, MaterialisationState, Mode, UpdateRequest};
use hdlog_core::hdeval::{HdOptions, HdRule};
use hdlog_core::seminaive::{std_add, std_del, std_red, RulePlans};
use hdlog_core::{Fact, FactSet, FactStore, Rule};

use crate::gen::Instance;
use crate::naive::{add_contract, del_contract, instances, instances_touching, naive_mat, node_matches, red_contract};

fn minus(a: &FactSet, b: &FactSet) -> FactSet {
    a.difference(b).cloned().collect()
}

/// Decompositions exercised for a rule: the searched one and a single node.
pub fn decompositions(rule: &Rule, facts: &FactSet) -> Vec<HypertreeDecomposition> {
    let stats = stats_for(std::slice::from_ref(rule), facts);
    vec![decompose(rule, &stats).expect("complete stats"), HypertreeDecomposition::single_node(rule)]
}

fn check_nodes(hd: &HdRule, ns: &hdlog_core::hdeval::NodeStore, facts: &FactSet, when: &str) -> Result<(), String> {
    let rule = hd.rule();
    for (p, node) in hd.decomposition().nodes().iter().enumerate() {
        let want = node_matches(rule, &node.lambda, &node.chi, facts);
        let got: HashMap<Vec<_>, u32> = ns.nodes[p].counts.iter().map(|(r, &c)| (r.to_vec(), c)).collect();
        let inst: std::collections::HashSet<Vec<_>> = ns.nodes[p].inst_i.iter().map(|r| r.to_vec()).collect();
        if got != want || inst != want.keys().cloned().collect() {
            return Err(format!("node p{} of rule {} out of sync {when}", p + 1, rule.id));
        }
    }
    Ok(())
}

/// Results of the three HD operators on one rule and decomposition.
#[derive(Debug, PartialEq, Eq)]
pub struct OperatorResults {
    pub add: FactSet,
    pub add_instances: HashMap<Fact, u32>,
    pub del: FactSet,
    pub red: FactSet,
}

/// Runs add on (I ∪ Δ⁺, Δ⁺), then del and red on (I, Δ⁻), with the node
/// sets checked against naive joins after each step.
pub fn run_hd_operators(
    hd: &HdRule,
    i: &FactSet,
    plus: &FactSet,
    minus_set: &FactSet,
    opts: HdOptions,
) -> Result<OperatorResults, String> {
    let rule = hd.rule();
    let mut work = 0;

    let all: FactSet = i.union(plus).cloned().collect();
    let old = minus(&all, plus);
    let mut store = FactStore::with_delta(&all, plus);
    hd.register(&mut store);
    let mut ns = hd.node_store();
    hd.rebuild(&mut ns, &FactStore::from_facts(&old));
    let added = hd.hd_add(&mut ns, &store, opts, &mut work);
    check_nodes(hd, &ns, &all, "after add")?;

    let mut store = FactStore::with_delta(i, minus_set);
    hd.register(&mut store);
    hd.rebuild(&mut ns, &FactStore::from_facts(i));
    let deleted = hd.hd_del(&mut ns, &store, opts, &mut work);
    let rest = minus(i, minus_set);
    check_nodes(hd, &ns, &rest, "after del")?;

    let mut counts = instances(rule, i);
    for (f, c) in &deleted.instances {
        let n = counts.get_mut(f).ok_or_else(|| format!("del of rule {} decremented absent {f:?}", rule.id))?;
        *n = n.checked_sub(*c).ok_or_else(|| format!("del of rule {} over-decremented {f:?}", rule.id))?;
    }
    counts.retain(|_, c| *c > 0);
    let after = FactStore::from_facts(&rest);
    let red = hd.hd_red(&mut ns, &after, minus_set, &counts, opts, &mut work);
    check_nodes(hd, &ns, &rest, "after red")?;
    Ok(OperatorResults { add: added.facts, add_instances: added.instances, del: deleted.facts, red })
}

/// Every operator of every rule in both modules against its contract,
/// plus reducer neutrality when `reducer_off` is set.
pub fn check_operators(inst: &Instance, reducer_off: bool) -> Result<(), String> {
    let i = &inst.explicit;
    let plus: FactSet = minus(&inst.add, i);
    let del: FactSet = inst.del.intersection(i).cloned().collect();
    let all: FactSet = i.union(&plus).cloned().collect();
    let rest = minus(i, &del);
    for rule in inst.program.rules() {
        let want_add = add_contract(rule, &all, &plus);
        let want_add_instances = instances_touching(rule, &all, Some(&plus));
        let want_del = del_contract(rule, i, &del);
        let want_red = red_contract(rule, &rest, &del);

        let plans = RulePlans::new(rule);
        let mut work = 0;
        let s = FactStore::with_delta(&all, &plus);
        let got = std_add(rule, &plans, &s, &mut work);
        if got.facts != want_add || got.instances != want_add_instances {
            return Err(format!("std add differs on rule {}", rule.id));
        }
        let s = FactStore::with_delta(i, &del);
        if std_del(rule, &plans, &s, &mut work).facts != want_del {
            return Err(format!("std del differs on rule {}", rule.id));
        }
        if std_red(rule, &plans, &FactStore::from_facts(&rest), &del, &mut work) != want_red {
            return Err(format!("std red differs on rule {}", rule.id));
        }

        for hd in decompositions(rule, i) {
            let hd = HdRule::new(rule, hd).map_err(|e| e.to_string())?;
            let got = run_hd_operators(&hd, i, &plus, &del, HdOptions { reducer: true })?;
            if got.add != want_add {
                return Err(format!("hd add differs on rule {} ({} nodes)", rule.id, hd.decomposition().len()));
            }
            if got.add_instances != want_add_instances {
                return Err(format!("hd add enumerated wrong instances on rule {}", rule.id));
            }
            if got.del != want_del {
                return Err(format!("hd del differs on rule {} ({} nodes)", rule.id, hd.decomposition().len()));
            }
            if got.red != want_red {
                return Err(format!("hd red differs on rule {} ({} nodes)", rule.id, hd.decomposition().len()));
            }
            if reducer_off {
                let plain = run_hd_operators(&hd, i, &plus, &del, HdOptions { reducer: false })?;
                if plain != got {
                    return Err(format!("reducer changes results on rule {}", rule.id));
                }
            }
        }
    }
    Ok(())
}

/// Materialises E, applies (E⁺, E⁻) and compares I and every count with
/// naive recomputation.
pub fn check_update(inst: &Instance, mode: Mode) -> Result<MaterialisationState, String> {
    let config = EngineConfig::with_mode(mode);
    let (mut state, _) = MaterialisationState::materialise(&inst.program, &inst.explicit, config).map_err(|e| e.to_string())?;
    check_state(&state, inst, &inst.explicit, "after materialisation")?;
    state.update(&UpdateRequest::new(inst.add.clone(), inst.del.clone()));
    let target: FactSet = minus(&inst.explicit, &inst.del).union(&inst.add).cloned().collect();
    check_state(&state, inst, &target, "after update")?;
    Ok(state)
}

/// I, E and the count table of `state` against naive recomputation on `explicit`.
pub fn check_state(state: &MaterialisationState, inst: &Instance, explicit: &FactSet, when: &str) -> Result<(), String> {
    let want = naive_mat(&inst.program, explicit);
    if state.facts() != want {
        let extra = minus(&state.facts(), &want).len();
        let missing = minus(&want, &state.facts()).len();
        return Err(format!("materialisation differs {when}: {extra} extra, {missing} missing"));
    }
    if &state.explicit != explicit {
        return Err(format!("explicit set differs {when}"));
    }
    let table = state.count_table();
    for (r, rule) in inst.program.rules().iter().enumerate() {
        if table.facts[r] != instances(rule, &want) {
            return Err(format!("fact counts of rule {r} differ {when}"));
        }
        if let (Some(hd), Some(ns)) = (&state.rules[r].hd, &state.rules[r].nodes) {
            check_nodes(hd, ns, &want, when)?;
        }
    }
    if table != state.recount() {
        return Err(format!("recount differs {when}"));
    }
    state.check_invariants().map_err(|e| format!("{e} {when}"))
}
