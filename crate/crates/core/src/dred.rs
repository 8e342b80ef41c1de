//! The DRed driver with per-rule dispatch to the standard or the
//! decomposition-based operators, and the derivation count table.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::decomp::{decompose_with, is_complex, DecompError, HypertreeDecomposition, RelationStats, SearchConfig};
use crate::hdeval::{HdError, HdOptions, HdRule, NodeStore, Row};
use crate::join::{JoinPlan, UNBOUND};
use crate::model::{Fact, FactSet, Program, Rule, RuleId, Term};
use crate::seminaive::{std_add, std_del, std_red, RoundStats, RulePlans};
use crate::store::{FactStore, Region, Tag};

/// How rules are assigned to evaluation modules.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    /// Every rule uses plan-based evaluation.
    Standard,
    /// Every rule uses decomposition-based evaluation.
    Hd,
    /// Complex rules use decompositions, the rest use plans.
    #[default]
    Combined,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Mode::Standard),
            "hd" => Ok(Mode::Hd),
            "combined" => Ok(Mode::Combined),
            other => Err(format!("unknown mode `{other}` (expected standard, hd or combined)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Standard => "standard",
            Mode::Hd => "hd",
            Mode::Combined => "combined",
        })
    }
}

/// Evaluation module of one rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Module {
    Standard,
    Hd,
}

impl fmt::Display for Module {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Module::Standard => "standard",
            Module::Hd => "hd",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EngineConfig {
    pub mode: Mode,
    /// Evaluate rules of one round on the rayon pool (needs the `parallel`
    /// feature; ignored otherwise).
    pub parallel: bool,
    pub hd: HdOptions,
    pub search: SearchConfig,
    /// Record node sets after every in-node step.
    pub trace: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: Mode::Combined,
            parallel: cfg!(feature = "parallel"),
            hd: HdOptions::default(),
            search: SearchConfig::default(),
            trace: false,
        }
    }
}

impl EngineConfig {
    pub fn with_mode(mode: Mode) -> Self {
        EngineConfig { mode, ..Self::default() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Decomp(#[from] DecompError),
    #[error("rule {rule}: {source}")]
    Hd { rule: RuleId, source: HdError },
}

/// Assigns each rule a module, with the decomposition for HD rules.
pub fn partition_program(
    program: &Program,
    stats: &RelationStats,
    mode: Mode,
    search: SearchConfig,
) -> Result<Vec<(Module, Option<HypertreeDecomposition>)>, DecompError> {
    program
        .rules()
        .iter()
        .map(|r| {
            let module = match mode {
                Mode::Standard => Module::Standard,
                Mode::Hd => Module::Hd,
                Mode::Combined if is_complex(r, stats)? => Module::Hd,
                Mode::Combined => Module::Standard,
            };
            Ok(match module {
                Module::Standard => (module, None),
                Module::Hd => (module, Some(decompose_with(r, stats, search, None)?)),
            })
        })
        .collect()
}

/// Per-rule evaluation state.
#[derive(Clone, Debug)]
pub struct RuleState {
    pub rule: Rule,
    pub module: Module,
    plans: RulePlans,
    pub hd: Option<HdRule>,
    pub nodes: Option<NodeStore>,
    /// Number of currently valid instances of this rule deriving each fact.
    pub counts: HashMap<Fact, u32>,
}

impl RuleState {
    fn add_counts(&mut self, instances: &HashMap<Fact, u32>) {
        for (f, c) in instances {
            *self.counts.entry(f.clone()).or_default() += c;
        }
    }

    fn sub_counts(&mut self, instances: &HashMap<Fact, u32>) {
        for (f, c) in instances {
            if let Some(n) = self.counts.get_mut(f) {
                *n = n.saturating_sub(*c);
                if *n == 0 {
                    self.counts.remove(f);
                }
            }
        }
    }
}

/// Explicit facts to add and remove.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UpdateRequest {
    pub add: FactSet,
    pub del: FactSet,
}

impl UpdateRequest {
    pub fn new(add: FactSet, del: FactSet) -> Self {
        UpdateRequest { add, del }
    }

    /// E⁻ := (E⁻ ∩ E) \ E⁺ and E⁺ := E⁺ \ E.
    pub fn normalised(&self, explicit: &FactSet) -> UpdateRequest {
        UpdateRequest {
            del: self.del.iter().filter(|f| explicit.contains(f) && !self.add.contains(f)).cloned().collect(),
            add: self.add.iter().filter(|f| !explicit.contains(f)).cloned().collect(),
        }
    }
}

/// Outcome of one update.
#[derive(Clone, Debug, Default)]
pub struct UpdateReport {
    /// |D|
    pub overdeleted: usize,
    /// Overdeleted facts put back by rederivation.
    pub rederived: usize,
    /// |A|
    pub added: usize,
    pub delete: RoundStats,
    pub rederive: RoundStats,
    pub add: RoundStats,
    pub delete_time: Duration,
    pub rederive_time: Duration,
    pub add_time: Duration,
}

impl UpdateReport {
    pub fn substitutions(&self) -> u64 {
        self.delete.substitutions_considered + self.rederive.substitutions_considered + self.add.substitutions_considered
    }
}

/// Per-fact and per-node-tuple derivation counts plus the explicit set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DerivationCountTable {
    /// Instances per fact, by rule.
    pub facts: Vec<HashMap<Fact, u32>>,
    /// In-node matches per tuple, by rule and node (HD rules only).
    pub tuples: Vec<Option<Vec<HashMap<Row, u32>>>>,
    pub explicit: FactSet,
}

impl DerivationCountTable {
    /// Total count of `f` over all rules.
    pub fn count(&self, f: &Fact) -> u32 {
        self.facts.iter().filter_map(|m| m.get(f)).sum()
    }
}

/// True iff `f` has a currently valid one-step derivation.
pub fn oracle_check(f: &Fact, counts: &DerivationCountTable) -> bool {
    counts.count(f) > 0
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvariantViolation {
    #[error("explicit fact {0:?} is missing from the store")]
    ExplicitMissing(Fact),
    #[error("fact {0:?} is neither explicit nor derived")]
    Unsupported(Fact),
    #[error("fact {0:?} has derivations but is missing from the store")]
    DerivedMissing(Fact),
    #[error("derivation counts of rule {0} differ from a recount")]
    FactCounts(RuleId),
    #[error("instantiations of rule {rule} node {node} differ from a recount")]
    NodeTuples { rule: RuleId, node: usize },
    #[error("the store's delta region is not empty")]
    DeltaNotEmpty,
    #[error("store indexes are inconsistent")]
    Indexes,
}

fn for_rules<T: Send>(
    rules: &mut [RuleState],
    parallel: bool,
    f: impl Fn(&mut RuleState) -> T + Sync + Send,
) -> Vec<T> {
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return rules.par_iter_mut().map(f).collect();
    }
    let _ = parallel;
    rules.iter_mut().map(f).collect()
}

/// E, I, the per-rule module assignment, node sets and counts.
#[derive(Clone, Debug)]
pub struct MaterialisationState {
    pub explicit: FactSet,
    pub store: FactStore,
    pub rules: Vec<RuleState>,
    pub config: EngineConfig,
}

impl MaterialisationState {
    /// Empty state for `program`, with decompositions chosen under `stats`.
    pub fn new(program: &Program, stats: &RelationStats, config: EngineConfig) -> Result<Self, EngineError> {
        let parts = partition_program(program, stats, config.mode, config.search)?;
        let mut store = FactStore::new();
        let mut rules = Vec::new();
        for (rule, (module, hd)) in program.rules().iter().zip(parts) {
            let plans = RulePlans::new(rule);
            plans.register(&mut store);
            let hd = match hd {
                Some(hd) => {
                    let h = HdRule::new(rule, hd).map_err(|source| EngineError::Hd { rule: rule.id, source })?;
                    h.register(&mut store);
                    Some(h)
                }
                None => None,
            };
            let nodes = hd.as_ref().map(|h| {
                let mut ns = h.node_store();
                if config.trace {
                    ns.trace = Some(Vec::new());
                }
                ns
            });
            rules.push(RuleState { rule: rule.clone(), module, plans, hd, nodes, counts: HashMap::new() });
        }
        Ok(MaterialisationState { explicit: FactSet::new(), store, rules, config })
    }

    /// Builds the state and materialises `explicit`, with statistics taken
    /// from `explicit`.
    pub fn materialise(program: &Program, explicit: &FactSet, config: EngineConfig) -> Result<(Self, UpdateReport), EngineError> {
        let mut stats = RelationStats::from_facts(explicit);
        stats.complete_for(program.rules());
        let mut state = Self::new(program, &stats, config)?;
        let report = state.update(&UpdateRequest::new(explicit.clone(), FactSet::new()));
        Ok((state, report))
    }

    pub fn assignment(&self) -> Vec<Module> {
        self.rules.iter().map(|r| r.module).collect()
    }

    /// The materialisation I.
    pub fn facts(&self) -> FactSet {
        self.store.facts(Region::All)
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    /// Applies an update with DRed.
    pub fn update(&mut self, req: &UpdateRequest) -> UpdateReport {
        dred_update(self, req)
    }

    /// The incrementally maintained counts.
    pub fn count_table(&self) -> DerivationCountTable {
        DerivationCountTable {
            facts: self.rules.iter().map(|r| r.counts.clone()).collect(),
            tuples: self
                .rules
                .iter()
                .map(|r| r.nodes.as_ref().map(|ns| ns.nodes.iter().map(|n| n.counts.clone()).collect()))
                .collect(),
            explicit: self.explicit.clone(),
        }
    }

    /// Counts rebuilt from scratch over the current I.
    pub fn recount(&self) -> DerivationCountTable {
        let facts = self.rules.iter().map(|r| count_instances(&r.rule, &self.store)).collect();
        let tuples = self
            .rules
            .iter()
            .map(|r| r.hd.as_ref().map(|h| (0..h.decomposition().len()).map(|p| h.full_join(p, &self.store)).collect()))
            .collect();
        DerivationCountTable { facts, tuples, explicit: self.explicit.clone() }
    }

    /// Checks E ⊆ I, support of every fact, counts against a recount and
    /// node sets against full in-node joins.
    pub fn check_invariants(&self) -> Result<(), InvariantViolation> {
        if self.store.delta_len() != 0 {
            return Err(InvariantViolation::DeltaNotEmpty);
        }
        if !self.store.indexes_consistent() {
            return Err(InvariantViolation::Indexes);
        }
        if let Some(f) = self.explicit.iter().find(|f| !self.store.contains(f)) {
            return Err(InvariantViolation::ExplicitMissing(f.clone()));
        }
        let table = self.count_table();
        for f in self.store.iter(Region::All) {
            if !self.explicit.contains(&f) && !oracle_check(&f, &table) {
                return Err(InvariantViolation::Unsupported(f));
            }
        }
        for m in &table.facts {
            if let Some(f) = m.keys().find(|f| !self.store.contains(f)) {
                return Err(InvariantViolation::DerivedMissing(f.clone()));
            }
        }
        let fresh = self.recount();
        for (r, (a, b)) in table.facts.iter().zip(&fresh.facts).enumerate() {
            if a != b {
                return Err(InvariantViolation::FactCounts(RuleId(r)));
            }
        }
        for (r, rs) in self.rules.iter().enumerate() {
            let (Some(ns), Some(want)) = (&rs.nodes, &fresh.tuples[r]) else { continue };
            for (p, (node, want)) in ns.nodes.iter().zip(want).enumerate() {
                let keys: std::collections::HashSet<Row> = want.keys().cloned().collect();
                if node.counts != *want || node.inst_i.to_set() != keys {
                    return Err(InvariantViolation::NodeTuples { rule: RuleId(r), node: p });
                }
            }
        }
        Ok(())
    }
}

/// Number of instances of `rule` over I deriving each head fact.
fn count_instances(rule: &Rule, store: &FactStore) -> HashMap<Fact, u32> {
    let plan = JoinPlan::new(&rule.body, &[], rule.num_vars());
    let mut binding = vec![UNBOUND; rule.num_vars()];
    let mut out: HashMap<Fact, u32> = HashMap::new();
    plan.run(store, &vec![Region::All; rule.body.len()], &mut binding, &mut 0, &mut |s| {
        let args: Vec<_> = rule
            .head
            .args
            .iter()
            .map(|t| match *t {
                Term::Const(c) => c,
                Term::Var(v) => s[v.index()],
            })
            .collect();
        *out.entry(Fact::new(rule.head.pred, args)).or_default() += 1;
        true
    });
    out
}

fn union_in_order(parts: Vec<(FactSet, u64)>, stats: &mut RoundStats) -> FactSet {
    let mut out = FactSet::new();
    for (facts, work) in parts {
        stats.add_work(work);
        out.extend(facts);
    }
    out
}

/// One run of DRed: overdelete, rederive, add.
pub fn dred_update(state: &mut MaterialisationState, req: &UpdateRequest) -> UpdateReport {
    let req = req.normalised(&state.explicit);
    let parallel = state.config.parallel;
    let opts = state.config.hd;
    let mut report = UpdateReport::default();

    // Overdelete
    let started = Instant::now();
    let mut deleted = FactSet::new();
    let mut next = req.del.clone();
    loop {
        let delta: FactSet = next.into_iter().filter(|f| !deleted.contains(f)).collect();
        if delta.is_empty() {
            break;
        }
        report.delete.begin_round();
        for f in &delta {
            state.store.retag(f, Tag::Delta);
        }
        let store = &state.store;
        let parts = for_rules(&mut state.rules, parallel, |rs| {
            let mut work = 0;
            let d = match rs.module {
                Module::Standard => {
                    let d = std_del(&rs.rule, &rs.plans, store, &mut work);
                    (d.facts, d.instances)
                }
                Module::Hd => {
                    let hd = rs.hd.as_ref().expect("hd rule");
                    let d = hd.hd_del(rs.nodes.as_mut().expect("node store"), store, opts, &mut work);
                    (d.facts, d.instances)
                }
            };
            rs.sub_counts(&d.1);
            (d.0, work)
        });
        next = union_in_order(parts, &mut report.delete);
        for f in &delta {
            state.store.remove(f);
        }
        deleted.extend(delta);
    }
    report.overdeleted = deleted.len();
    report.delete_time = started.elapsed();

    // Rederive
    let started = Instant::now();
    report.rederive.begin_round();
    let store = &state.store;
    let deleted_ref = &deleted;
    let parts = for_rules(&mut state.rules, parallel, |rs| {
        let mut work = 0;
        let facts = match rs.module {
            Module::Standard => std_red(&rs.rule, &rs.plans, store, deleted_ref, &mut work),
            Module::Hd => {
                let hd = rs.hd.as_ref().expect("hd rule");
                hd.hd_red(rs.nodes.as_mut().expect("node store"), store, deleted_ref, &rs.counts, opts, &mut work)
            }
        };
        (facts, work)
    });
    let mut rederived = union_in_order(parts, &mut report.rederive);
    rederived.extend(deleted.iter().filter(|f| state.explicit.contains(f) && !req.del.contains(f)).cloned());
    report.rederived = rederived.len();
    report.rederive_time = started.elapsed();

    // Add
    let started = Instant::now();
    let mut next: FactSet = rederived.into_iter().chain(req.add.iter().cloned()).collect();
    let mut added = 0;
    loop {
        let delta: FactSet = next.into_iter().filter(|f| !state.store.contains(f)).collect();
        if delta.is_empty() {
            break;
        }
        report.add.begin_round();
        added += delta.len();
        for f in delta {
            state.store.insert(f, Tag::Delta);
        }
        let store = &state.store;
        let parts = for_rules(&mut state.rules, parallel, |rs| {
            let mut work = 0;
            let d = match rs.module {
                Module::Standard => {
                    let d = std_add(&rs.rule, &rs.plans, store, &mut work);
                    (d.facts, d.instances)
                }
                Module::Hd => {
                    let hd = rs.hd.as_ref().expect("hd rule");
                    let d = hd.hd_add(rs.nodes.as_mut().expect("node store"), store, opts, &mut work);
                    (d.facts, d.instances)
                }
            };
            rs.add_counts(&d.1);
            (d.0, work)
        });
        next = union_in_order(parts, &mut report.add);
        report.add.facts_derived += next.len();
        state.store.commit_delta();
    }
    report.added = added;
    report.add_time = started.elapsed();

    for f in &req.del {
        state.explicit.remove(f);
    }
    state.explicit.extend(req.add.iter().cloned());
    report
}
