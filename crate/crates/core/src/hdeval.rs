//! Rule evaluation over a hypertree decomposition with per-node
//! instantiation sets kept between updates.
//!
//! Every node's χ equals the variables of its λ atoms, so a node tuple
//! determines the λ match that produced it and a joint tuple (one per
//! node) determines a rule instance. Cross-node joins carry
//! multiplicities so that per-instance derivation counts come out exact.

use std::collections::{HashMap, HashSet};

use crate::decomp::{check_decomposition, node_name, HypertreeDecomposition, Violation};
use crate::join::{JoinPlan, UNBOUND};
use crate::model::{Const, Fact, FactSet, Interner, Rule, Term, Var};
use crate::store::{FactStore, Region};

/// A χ(p)-tuple.
pub type Row = Box<[Const]>;

fn key_of(row: &[Const], positions: &[usize]) -> Row {
    positions.iter().map(|&i| row[i]).collect()
}

/// A set of rows with hash indexes on chosen column lists.
#[derive(Clone, Debug, Default)]
pub struct TupleSet {
    rows: HashSet<Row>,
    indexes: Vec<(Vec<usize>, HashMap<Row, HashSet<Row>>)>,
}

impl TupleSet {
    pub fn with_keys(keys: &[Vec<usize>]) -> Self {
        TupleSet {
            rows: HashSet::new(),
            indexes: keys.iter().filter(|k| !k.is_empty()).map(|k| (k.clone(), HashMap::new())).collect(),
        }
    }

    pub fn insert(&mut self, row: Row) -> bool {
        if self.rows.contains(&row) {
            return false;
        }
        for (cols, index) in &mut self.indexes {
            index.entry(key_of(&row, cols)).or_default().insert(row.clone());
        }
        self.rows.insert(row)
    }

    pub fn remove(&mut self, row: &[Const]) -> bool {
        if !self.rows.remove(row) {
            return false;
        }
        for (cols, index) in &mut self.indexes {
            let k = key_of(row, cols);
            if let Some(bucket) = index.get_mut(&k) {
                bucket.remove(row);
                if bucket.is_empty() {
                    index.remove(&k);
                }
            }
        }
        true
    }

    pub fn contains(&self, row: &[Const]) -> bool {
        self.rows.contains(row)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter()
    }

    pub fn clear(&mut self) {
        self.rows.clear();
        for (_, index) in &mut self.indexes {
            index.clear();
        }
    }

    /// Visits the rows whose `cols` equal `key`.
    fn lookup(&self, cols: &[usize], key: &[Const], work: &mut u64, f: &mut dyn FnMut(&Row)) {
        if let Some((_, index)) = self.indexes.iter().find(|(c, _)| c == cols) {
            *work += 1;
            if let Some(bucket) = index.get(key) {
                for r in bucket {
                    *work += 1;
                    f(r);
                }
            }
        } else {
            for r in &self.rows {
                *work += 1;
                if cols.iter().zip(key).all(|(&c, k)| r[c] == *k) {
                    f(r);
                }
            }
        }
    }

    pub fn to_set(&self) -> HashSet<Row> {
        self.rows.clone()
    }
}

/// Region a node is evaluated against for one pivot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    I,
    Plus,
    IPlus,
    Minus,
    IMinus,
}

/// Labelling function for cross-node evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelFn {
    /// I ∪ Δ⁺ before the pivot, Δ⁺ at it, I after it.
    Plus,
    /// I before the pivot, Δ⁻ at it, I \ Δ⁻ after it.
    Minus,
}

impl LabelFn {
    pub fn label(self, pivot: usize, node: usize) -> Label {
        use std::cmp::Ordering::*;
        match (self, node.cmp(&pivot)) {
            (LabelFn::Plus, Less) => Label::IPlus,
            (LabelFn::Plus, Equal) => Label::Plus,
            (LabelFn::Plus, Greater) => Label::I,
            (LabelFn::Minus, Less) => Label::I,
            (LabelFn::Minus, Equal) => Label::Minus,
            (LabelFn::Minus, Greater) => Label::IMinus,
        }
    }
}

/// Active instantiations of a node: a labelled view over its sets, or a
/// set materialised by a semijoin.
#[derive(Clone, Debug)]
pub enum Active {
    View(Label),
    Set(HashSet<Row>),
}

impl Default for Active {
    fn default() -> Self {
        Active::Set(HashSet::new())
    }
}

/// Instantiation sets of one node.
#[derive(Clone, Debug, Default)]
pub struct NodeInst {
    pub inst_i: TupleSet,
    pub plus: TupleSet,
    pub minus: TupleSet,
    pub re: HashSet<Row>,
    pub ac: Active,
    /// Number of in-node matches supporting each tuple of `inst_i`.
    pub counts: HashMap<Row, u32>,
}

impl NodeInst {
    fn with_keys(keys: &[Vec<usize>]) -> Self {
        NodeInst {
            inst_i: TupleSet::with_keys(keys),
            plus: TupleSet::with_keys(keys),
            minus: TupleSet::with_keys(keys),
            ..Default::default()
        }
    }

    fn view_contains(&self, label: Label, row: &[Const]) -> bool {
        match label {
            Label::I => self.inst_i.contains(row),
            Label::Plus => self.plus.contains(row),
            Label::IPlus => self.inst_i.contains(row) || self.plus.contains(row),
            Label::Minus => self.minus.contains(row),
            Label::IMinus => self.inst_i.contains(row) && !self.minus.contains(row),
        }
    }

    /// Number of active tuples.
    pub fn ac_len(&self) -> usize {
        match &self.ac {
            Active::Set(s) => s.len(),
            Active::View(Label::I) => self.inst_i.len(),
            Active::View(Label::Plus) => self.plus.len(),
            Active::View(Label::IPlus) => {
                self.inst_i.len() + self.plus.iter().filter(|r| !self.inst_i.contains(r)).count()
            }
            Active::View(Label::Minus) => self.minus.len(),
            Active::View(Label::IMinus) => {
                self.inst_i.len() - self.minus.iter().filter(|r| self.inst_i.contains(r)).count()
            }
        }
    }

    pub fn ac_contains(&self, row: &[Const]) -> bool {
        match &self.ac {
            Active::Set(s) => s.contains(row),
            Active::View(l) => self.view_contains(*l, row),
        }
    }

    pub fn ac_for_each(&self, f: &mut dyn FnMut(&Row)) {
        match &self.ac {
            Active::Set(s) => s.iter().for_each(f),
            Active::View(Label::I) => self.inst_i.iter().for_each(f),
            Active::View(Label::Plus) => self.plus.iter().for_each(f),
            Active::View(Label::Minus) => self.minus.iter().for_each(f),
            Active::View(Label::IPlus) => {
                self.inst_i.iter().for_each(&mut *f);
                self.plus.iter().filter(|r| !self.inst_i.contains(r)).for_each(f);
            }
            Active::View(Label::IMinus) => self.inst_i.iter().filter(|r| !self.minus.contains(r)).for_each(f),
        }
    }

    /// Active tuples as a set.
    pub fn active(&self) -> HashSet<Row> {
        let mut out = HashSet::new();
        self.ac_for_each(&mut |r| {
            out.insert(r.clone());
        });
        out
    }

    fn ac_lookup(&self, cols: &[usize], key: &[Const], work: &mut u64, f: &mut dyn FnMut(&Row)) {
        match &self.ac {
            Active::Set(s) => {
                for r in s {
                    *work += 1;
                    if cols.iter().zip(key).all(|(&c, k)| r[c] == *k) {
                        f(r);
                    }
                }
            }
            Active::View(l) => {
                let l = *l;
                match l {
                    Label::I | Label::IMinus => self.inst_i.lookup(cols, key, work, &mut |r| {
                        if l == Label::I || !self.minus.contains(r) {
                            f(r)
                        }
                    }),
                    Label::Plus => self.plus.lookup(cols, key, work, f),
                    Label::Minus => self.minus.lookup(cols, key, work, f),
                    Label::IPlus => {
                        self.inst_i.lookup(cols, key, work, &mut *f);
                        self.plus.lookup(cols, key, work, &mut |r| {
                            if !self.inst_i.contains(r) {
                                f(r)
                            }
                        });
                    }
                }
            }
        }
    }

    /// Sets `ac` from a label.
    pub fn set_active(&mut self, label: Label) {
        self.ac = Active::View(label);
    }
}

/// Copies of a node's I, plus, minus and re sets.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NodeSnapshot {
    pub inst_i: HashSet<Row>,
    pub plus: HashSet<Row>,
    pub minus: HashSet<Row>,
    pub re: HashSet<Row>,
}

/// Node sets captured right after the in-node step of an operator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    /// "add", "del" or "red".
    pub phase: &'static str,
    pub nodes: Vec<NodeSnapshot>,
}

/// Instantiation sets for every node of one rule's decomposition.
#[derive(Clone, Debug, Default)]
pub struct NodeStore {
    pub nodes: Vec<NodeInst>,
    /// Recorded events, when tracing is enabled.
    pub trace: Option<Vec<TraceEvent>>,
}

impl NodeStore {
    pub fn snapshot(&self) -> Vec<NodeSnapshot> {
        self.nodes
            .iter()
            .map(|n| NodeSnapshot {
                inst_i: n.inst_i.to_set(),
                plus: n.plus.to_set(),
                minus: n.minus.to_set(),
                re: n.re.clone(),
            })
            .collect()
    }
}

impl NodeStore {
    pub fn node(&self, p: usize) -> &NodeInst {
        &self.nodes[p]
    }
}

/// Evaluation switches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HdOptions {
    /// Run the semijoin passes before cross-node joins.
    pub reducer: bool,
}

impl Default for HdOptions {
    fn default() -> Self {
        HdOptions { reducer: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HdError {
    #[error("invalid decomposition: {0}")]
    Invalid(#[from] Violation),
    #[error("body atom {0} is in no node")]
    AtomMissing(usize),
    #[error("chi of node {0} differs from the variables of its atoms")]
    ChiNotFull(String),
}

#[derive(Clone, Debug)]
struct NodePlan {
    chi: Vec<Var>,
    lambda: Vec<usize>,
    /// λ(p) in order; labelled runs differ only in regions.
    full_plan: JoinPlan,
    /// Positions in χ shared with each neighbour, by neighbour id.
    shared: HashMap<usize, Vec<usize>>,
}

/// A rule compiled for decomposition-based evaluation.
#[derive(Clone, Debug)]
pub struct HdRule {
    rule: Rule,
    hd: HypertreeDecomposition,
    plans: Vec<NodePlan>,
    head_vars: Vec<Var>,
}

/// Result of an HD operator: the returned facts plus, per head fact, the
/// number of joint instantiations (rule instances) enumerated.
#[derive(Clone, Debug, Default)]
pub struct HdDerived {
    pub facts: FactSet,
    pub instances: HashMap<Fact, u32>,
}

/// Cross-node join result: rows over `schema` with multiplicities.
#[derive(Clone, Debug, Default)]
struct Bag {
    schema: Vec<Var>,
    rows: HashMap<Row, u64>,
}

impl HdRule {
    pub fn new(rule: &Rule, hd: HypertreeDecomposition) -> Result<Self, HdError> {
        check_decomposition(rule, &hd)?;
        let mut covered = vec![false; rule.body.len()];
        for n in hd.nodes() {
            for &a in &n.lambda {
                covered[a] = true;
            }
        }
        if let Some(a) = covered.iter().position(|c| !c) {
            return Err(HdError::AtomMissing(a));
        }
        let mut plans = Vec::new();
        for (p, n) in hd.nodes().iter().enumerate() {
            let lv: HashSet<Var> = n.lambda.iter().flat_map(|&a| rule.body[a].vars()).collect();
            if lv != n.chi.iter().copied().collect::<HashSet<_>>() || lv.len() != n.chi.len() {
                return Err(HdError::ChiNotFull(node_name(p)));
            }
            let full_plan = JoinPlan::new(n.lambda.iter().map(|&a| &rule.body[a]), &[], rule.num_vars());
            let mut shared = HashMap::new();
            for q in hd.neighbours(p) {
                let other = &hd.node(q).chi;
                let mut common: Vec<Var> = n.chi.iter().copied().filter(|v| other.contains(v)).collect();
                common.sort();
                shared.insert(q, common.iter().map(|v| n.chi.iter().position(|w| w == v).unwrap()).collect());
            }
            plans.push(NodePlan { chi: n.chi.clone(), lambda: n.lambda.clone(), full_plan, shared });
        }
        Ok(HdRule { rule: rule.clone(), hd, plans, head_vars: rule.head_vars() })
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    pub fn decomposition(&self) -> &HypertreeDecomposition {
        &self.hd
    }

    /// Empty instantiation sets shaped for this rule.
    pub fn node_store(&self) -> NodeStore {
        NodeStore {
            nodes: self
                .plans
                .iter()
                .map(|p| NodeInst::with_keys(&p.shared.values().cloned().collect::<Vec<_>>()))
                .collect(),
            trace: None,
        }
    }

    /// Registers the store indexes used by in-node evaluation.
    pub fn register(&self, store: &mut FactStore) {
        for p in &self.plans {
            p.full_plan.register(store);
        }
    }

    fn row_of(&self, p: usize, binding: &[Const]) -> Row {
        self.plans[p].chi.iter().map(|v| binding[v.index()]).collect()
    }

    /// Π_p[I, Δ] with Δ the store's delta region: each χ(p)-tuple with the
    /// number of λ(p) matches in I that touch Δ.
    pub fn pi_p(&self, p: usize, store: &FactStore, work: &mut u64) -> HashMap<Row, u32> {
        let plan = &self.plans[p];
        let m = plan.lambda.len();
        let mut out: HashMap<Row, u32> = HashMap::new();
        let mut binding = vec![UNBOUND; self.rule.num_vars()];
        for i in 0..m {
            if store.region_len(self.rule.body[plan.lambda[i]].pred, Region::Delta) == 0 {
                continue;
            }
            let regions: Vec<Region> = (0..m)
                .map(|j| match j.cmp(&i) {
                    std::cmp::Ordering::Less => Region::Old,
                    std::cmp::Ordering::Equal => Region::Delta,
                    std::cmp::Ordering::Greater => Region::All,
                })
                .collect();
            plan.full_plan.run(store, &regions, &mut binding, work, &mut |s| {
                *out.entry(self.row_of(p, s)).or_default() += 1;
                true
            });
        }
        out
    }

    /// Π_p[I, I]: the full in-node join with match counts.
    pub fn full_join(&self, p: usize, store: &FactStore) -> HashMap<Row, u32> {
        let plan = &self.plans[p];
        let mut out: HashMap<Row, u32> = HashMap::new();
        let mut binding = vec![UNBOUND; self.rule.num_vars()];
        plan.full_plan.run(store, &vec![Region::All; plan.lambda.len()], &mut binding, &mut 0, &mut |s| {
            *out.entry(self.row_of(p, s)).or_default() += 1;
            true
        });
        out
    }

    /// target ⋉ source on the columns they share.
    fn semijoin(&self, ns: &mut NodeStore, target: usize, source: usize, work: &mut u64) {
        let tcols = &self.plans[target].shared[&source];
        let scols = &self.plans[source].shared[&target];
        let (t, s) = (&ns.nodes[target], &ns.nodes[source]);
        let (tlen, slen) = (t.ac_len(), s.ac_len());
        if tlen == 0 {
            return;
        }
        if slen == 0 {
            ns.nodes[target].ac = Active::Set(HashSet::new());
            return;
        }
        if tcols.is_empty() {
            return;
        }
        let mut kept = HashSet::new();
        if tlen <= slen {
            let mut keys: Option<HashSet<Row>> = None;
            if let Active::Set(set) = &s.ac {
                *work += set.len() as u64;
                keys = Some(set.iter().map(|r| key_of(r, scols)).collect());
            }
            t.ac_for_each(&mut |r| {
                *work += 1;
                let k = key_of(r, tcols);
                let hit = match &keys {
                    Some(keys) => keys.contains(&k),
                    None => {
                        let mut found = false;
                        s.ac_lookup(scols, &k, work, &mut |_| found = true);
                        found
                    }
                };
                if hit {
                    kept.insert(r.clone());
                }
            });
        } else {
            let mut keys = HashSet::new();
            s.ac_for_each(&mut |r| {
                *work += 1;
                keys.insert(key_of(r, scols));
            });
            if let Active::Set(set) = &t.ac {
                for r in set {
                    *work += 1;
                    if keys.contains(&key_of(r, tcols)) {
                        kept.insert(r.clone());
                    }
                }
            } else {
                for k in &keys {
                    t.ac_lookup(tcols, k, work, &mut |r| {
                        kept.insert(r.clone());
                    });
                }
            }
        }
        if kept.len() != tlen {
            ns.nodes[target].ac = Active::Set(kept);
        }
    }

    /// Top-down left semijoins from `start`: every node is reduced by its
    /// neighbour nearer to `start`, in breadth-first order.
    pub fn top_down_lsj(&self, start: usize, ns: &mut NodeStore, work: &mut u64) {
        for (p, from) in self.hd.bfs_from(start) {
            if let Some(q) = from {
                self.semijoin(ns, p, q, work);
            }
        }
    }

    /// Bottom-up left semijoins towards `start`: in reverse breadth-first
    /// order every node reduces its neighbour nearer to `start`.
    pub fn bottom_up_lsj(&self, start: usize, ns: &mut NodeStore, work: &mut u64) {
        for (p, from) in self.hd.bfs_from(start).into_iter().rev() {
            if let Some(q) = from {
                self.semijoin(ns, q, p, work);
            }
        }
    }

    fn join_node(&self, p: usize, ns: &NodeStore, work: &mut u64) -> Bag {
        let plan = &self.plans[p];
        let inst = &ns.nodes[p];
        let children = &self.hd.node(p).children;
        let mut bags: Vec<(usize, Bag)> = Vec::new();
        for &c in children {
            let b = self.join_node(c, ns, work);
            if b.rows.is_empty() {
                return Bag { schema: plan.chi.clone(), rows: HashMap::new() };
            }
            bags.push((c, b));
        }
        let mut acc = Bag { schema: plan.chi.clone(), rows: HashMap::new() };
        let smallest = (0..bags.len()).min_by_key(|&i| bags[i].1.rows.len());
        match smallest {
            Some(i) if bags[i].1.rows.len() < inst.ac_len() => {
                let (c, bag) = bags.swap_remove(i);
                let pcols = &plan.shared[&c];
                let ccols: Vec<usize> = pcols
                    .iter()
                    .map(|&k| bag.schema.iter().position(|v| *v == plan.chi[k]).unwrap())
                    .collect();
                let extra: Vec<usize> = (0..bag.schema.len()).filter(|&k| !plan.chi.contains(&bag.schema[k])).collect();
                acc.schema.extend(extra.iter().map(|&k| bag.schema[k]));
                for (crow, m) in &bag.rows {
                    *work += 1;
                    let key = key_of(crow, &ccols);
                    inst.ac_lookup(pcols, &key, work, &mut |prow| {
                        let row: Row = prow.iter().copied().chain(extra.iter().map(|&k| crow[k])).collect();
                        *acc.rows.entry(row).or_default() += m;
                    });
                }
            }
            _ => inst.ac_for_each(&mut |r| {
                *work += 1;
                acc.rows.insert(r.clone(), 1);
            }),
        }
        for (_, bag) in bags {
            acc = self.join_bags(acc, &bag, work);
        }
        let keep: Vec<usize> = (0..acc.schema.len())
            .filter(|&k| plan.chi.contains(&acc.schema[k]) || self.head_vars.contains(&acc.schema[k]))
            .collect();
        if keep.len() == acc.schema.len() {
            return acc;
        }
        let mut rows: HashMap<Row, u64> = HashMap::new();
        for (r, m) in acc.rows {
            *rows.entry(key_of(&r, &keep)).or_default() += m;
        }
        Bag { schema: keep.iter().map(|&k| acc.schema[k]).collect(), rows }
    }

    fn join_bags(&self, left: Bag, right: &Bag, work: &mut u64) -> Bag {
        let shared: Vec<Var> = left.schema.iter().copied().filter(|v| right.schema.contains(v)).collect();
        let lcols: Vec<usize> = shared.iter().map(|v| left.schema.iter().position(|w| w == v).unwrap()).collect();
        let rcols: Vec<usize> = shared.iter().map(|v| right.schema.iter().position(|w| w == v).unwrap()).collect();
        let extra: Vec<usize> = (0..right.schema.len()).filter(|&k| !left.schema.contains(&right.schema[k])).collect();
        let mut index: HashMap<Row, Vec<(&Row, u64)>> = HashMap::new();
        for (r, m) in &right.rows {
            *work += 1;
            index.entry(key_of(r, &rcols)).or_default().push((r, *m));
        }
        let mut schema = left.schema.clone();
        schema.extend(extra.iter().map(|&k| right.schema[k]));
        let mut rows: HashMap<Row, u64> = HashMap::new();
        for (l, lm) in &left.rows {
            *work += 1;
            if let Some(matches) = index.get(&key_of(l, &lcols)) {
                for (r, rm) in matches {
                    let row: Row = l.iter().copied().chain(extra.iter().map(|&k| r[k])).collect();
                    *rows.entry(row).or_default() += lm * rm;
                }
            }
        }
        Bag { schema, rows }
    }

    /// Joins the active sets bottom-up from the root and projects onto the
    /// head: each head fact with its number of joint instantiations.
    pub fn cross_node_join(&self, ns: &NodeStore, work: &mut u64) -> HashMap<Fact, u64> {
        let bag = self.join_node(self.hd.root(), ns, work);
        if bag.rows.is_empty() {
            return HashMap::new();
        }
        let cols: Vec<usize> = self
            .head_vars
            .iter()
            .map(|v| bag.schema.iter().position(|w| w == v).expect("head variable in root result"))
            .collect();
        let mut out: HashMap<Fact, u64> = HashMap::new();
        for (r, m) in bag.rows {
            let args: Vec<Const> = self
                .rule
                .head
                .args
                .iter()
                .map(|t| match *t {
                    Term::Const(c) => c,
                    Term::Var(v) => r[cols[self.head_vars.iter().position(|w| *w == v).unwrap()]],
                })
                .collect();
            *out.entry(Fact::new(self.rule.head.pred, args)).or_default() += m;
        }
        out
    }

    /// One pass per pivot node: label, set actives, reduce, join.
    pub fn cross_node_evaluation(
        &self,
        labels: LabelFn,
        ns: &mut NodeStore,
        opts: HdOptions,
        work: &mut u64,
    ) -> HashMap<Fact, u64> {
        let mut out: HashMap<Fact, u64> = HashMap::new();
        let root = self.hd.root();
        for pivot in 0..self.plans.len() {
            for (j, node) in ns.nodes.iter_mut().enumerate() {
                node.set_active(labels.label(pivot, j));
            }
            let pivot_len = ns.nodes[pivot].ac_len();
            if pivot_len == 0 {
                continue;
            }
            if opts.reducer {
                let max = ns.nodes.iter().map(NodeInst::ac_len).max().unwrap_or(0);
                if pivot_len * 3 < max {
                    self.top_down_lsj(pivot, ns, work);
                }
                self.bottom_up_lsj(root, ns, work);
                self.top_down_lsj(root, ns, work);
            }
            for (f, m) in self.cross_node_join(ns, work) {
                *out.entry(f).or_default() += m;
            }
        }
        for node in &mut ns.nodes {
            node.ac = Active::default();
        }
        out
    }

    fn record(&self, ns: &mut NodeStore, phase: &'static str) {
        if ns.trace.is_some() {
            let nodes = ns.snapshot();
            if let Some(t) = ns.trace.as_mut() {
                t.push(TraceEvent { phase, nodes });
            }
        }
    }

    /// r[I ∸ Δ⁺] \ I with Δ⁺ the delta region.
    pub fn hd_add(&self, ns: &mut NodeStore, store: &FactStore, opts: HdOptions, work: &mut u64) -> HdDerived {
        for p in 0..self.plans.len() {
            let matches = self.pi_p(p, store, work);
            let node = &mut ns.nodes[p];
            node.plus.clear();
            for (row, c) in matches {
                if !node.inst_i.contains(&row) {
                    node.plus.insert(row.clone());
                }
                *node.counts.entry(row).or_default() += c;
            }
        }
        self.record(ns, "add");
        let derived = self.cross_node_evaluation(LabelFn::Plus, ns, opts, work);
        for node in &mut ns.nodes {
            let plus = std::mem::take(&mut node.plus);
            for r in plus.iter() {
                node.inst_i.insert(r.clone());
            }
            node.plus = plus;
            node.plus.clear();
        }
        let facts = derived.keys().filter(|f| !store.contains(f)).cloned().collect();
        HdDerived { facts, instances: to_u32(derived) }
    }

    /// r[I ∸ Δ⁻] ∩ (I \ Δ⁻) with Δ⁻ the delta region.
    pub fn hd_del(&self, ns: &mut NodeStore, store: &FactStore, opts: HdOptions, work: &mut u64) -> HdDerived {
        for p in 0..self.plans.len() {
            let matches = self.pi_p(p, store, work);
            let node = &mut ns.nodes[p];
            node.minus.clear();
            for (row, c) in matches {
                if node.inst_i.contains(&row) {
                    node.minus.insert(row.clone());
                    node.re.insert(row.clone());
                    if let Some(n) = node.counts.get_mut(&row) {
                        *n = n.saturating_sub(c);
                    }
                }
            }
        }
        self.record(ns, "del");
        let derived = self.cross_node_evaluation(LabelFn::Minus, ns, opts, work);
        for node in &mut ns.nodes {
            let minus: Vec<Row> = node.minus.iter().cloned().collect();
            for r in minus {
                if node.counts.get(&r).is_none_or(|&c| c == 0) {
                    node.counts.remove(&r);
                    node.inst_i.remove(&r);
                }
            }
            node.minus.clear();
        }
        let facts = derived.keys().filter(|f| store.contains_in(f, Region::Old)).cloned().collect();
        HdDerived { facts, instances: to_u32(derived) }
    }

    /// r[I] ∩ Δ over the post-overdeletion store. `fact_counts` holds this
    /// rule's instance counts per fact.
    pub fn hd_red(
        &self,
        ns: &mut NodeStore,
        store: &FactStore,
        delta: &FactSet,
        fact_counts: &HashMap<Fact, u32>,
        opts: HdOptions,
        work: &mut u64,
    ) -> FactSet {
        debug_assert_eq!(store.delta_len(), 0);
        for node in &mut ns.nodes {
            node.plus.clear();
            let re = std::mem::take(&mut node.re);
            for r in re {
                if node.counts.get(&r).is_some_and(|&c| c > 0) {
                    node.plus.insert(r);
                }
            }
        }
        self.record(ns, "red");
        let mut out: FactSet = self
            .cross_node_evaluation(LabelFn::Plus, ns, opts, work)
            .into_keys()
            .filter(|f| delta.contains(f))
            .collect();
        for node in &mut ns.nodes {
            let plus: Vec<Row> = node.plus.iter().cloned().collect();
            for r in plus {
                node.inst_i.insert(r);
            }
            node.plus.clear();
            node.re.clear();
        }
        out.extend(
            delta
                .iter()
                .filter(|f| f.pred == self.rule.head.pred && fact_counts.get(f).is_some_and(|&c| c > 0))
                .cloned(),
        );
        out
    }

    /// Builds every node's `inst_i` and counts from scratch over I.
    pub fn rebuild(&self, ns: &mut NodeStore, store: &FactStore) {
        for p in 0..self.plans.len() {
            let counts = self.full_join(p, store);
            let node = &mut ns.nodes[p];
            node.inst_i.clear();
            for r in counts.keys() {
                node.inst_i.insert(r.clone());
            }
            node.counts = counts;
            node.plus.clear();
            node.minus.clear();
            node.re.clear();
        }
    }

    /// Lines `inst <rule> <node> <set> {tuple;...}` for every node and set.
    pub fn dump(&self, ns: &NodeStore, interner: &Interner) -> String {
        let ac: Vec<HashSet<Row>> = ns.nodes.iter().map(NodeInst::active).collect();
        dump_snapshot(self.rule.id.0, &ns.snapshot(), Some(&ac), interner)
    }
}

/// Inst dump lines for captured node sets; `ac` sets are printed when given.
pub fn dump_snapshot(rule: usize, nodes: &[NodeSnapshot], ac: Option<&[HashSet<Row>]>, interner: &Interner) -> String {
    let mut out = String::new();
    for (p, node) in nodes.iter().enumerate() {
        let mut sets: Vec<(&str, &HashSet<Row>)> =
            vec![("I", &node.inst_i), ("plus", &node.plus), ("minus", &node.minus)];
        if let Some(ac) = ac {
            sets.push(("ac", &ac[p]));
        }
        sets.push(("re", &node.re));
        for (set, rows) in sets {
            out.push_str(&format!("inst r{rule} {} {set} {}\n", node_name(p), format_rows(rows, interner)));
        }
    }
    out
}

fn to_u32(m: HashMap<Fact, u64>) -> HashMap<Fact, u32> {
    m.into_iter().map(|(f, c)| (f, u32::try_from(c).expect("instance count fits u32"))).collect()
}

/// `{(a,b);(c,d)}` with rows ordered by constant text.
pub fn format_rows(rows: &HashSet<Row>, interner: &Interner) -> String {
    let mut text: Vec<Vec<String>> = rows
        .iter()
        .map(|r| r.iter().map(|&c| interner.display_const(c)).collect())
        .collect();
    text.sort();
    let parts: Vec<String> = text.into_iter().map(|r| format!("({})", r.join(","))).collect();
    format!("{{{}}}", parts.join(";"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_facts, parse_program};
    use crate::store::Tag;

    fn setup(rule: &str, hd: Vec<(Vec<&str>, Vec<usize>, Option<usize>)>) -> (HdRule, Interner) {
        let mut i = Interner::new();
        let p = parse_program(rule, &mut i).unwrap();
        let r = p.rules()[0].clone();
        let var = |n: &str| Var(r.var_names().iter().position(|x| x == n).unwrap() as u32);
        let spec = hd.into_iter().map(|(c, l, p)| (c.into_iter().map(var).collect(), l, p)).collect();
        let hd = HypertreeDecomposition::new(spec).unwrap();
        (HdRule::new(&r, hd).unwrap(), i)
    }

    fn row(i: &mut Interner, names: &[&str]) -> Row {
        names.iter().map(|n| i.intern_const(n)).collect()
    }

    #[test]
    fn labels_follow_the_pivot() {
        assert_eq!(LabelFn::Plus.label(1, 0), Label::IPlus);
        assert_eq!(LabelFn::Plus.label(1, 1), Label::Plus);
        assert_eq!(LabelFn::Plus.label(1, 2), Label::I);
        assert_eq!(LabelFn::Minus.label(1, 0), Label::I);
        assert_eq!(LabelFn::Minus.label(1, 1), Label::Minus);
        assert_eq!(LabelFn::Minus.label(1, 2), Label::IMinus);
    }

    #[test]
    fn active_sets_per_label() {
        let mut i = Interner::new();
        let mut n = NodeInst::with_keys(&[]);
        let (a, b) = (row(&mut i, &["1", "2"]), row(&mut i, &["3", "4"]));
        n.inst_i.insert(a.clone());
        n.plus.insert(b.clone());
        n.set_active(Label::IPlus);
        assert_eq!(n.active(), HashSet::from([a.clone(), b.clone()]));
        n.plus.clear();
        n.inst_i.insert(b.clone());
        n.minus.insert(b.clone());
        n.set_active(Label::Minus);
        assert_eq!(n.active(), HashSet::from([b.clone()]));
        n.set_active(Label::IMinus);
        assert_eq!(n.active(), HashSet::from([a.clone()]));
        assert_eq!(n.ac_len(), 1);
    }

    fn two_node() -> (HdRule, Interner) {
        setup(
            "H(?a,?b) :- P(?a,?b), C(?a,?b).",
            vec![(vec!["a", "b"], vec![0], None), (vec!["a", "b"], vec![1], Some(0))],
        )
    }

    #[test]
    fn bottom_up_pass_reduces_the_parent() {
        let (r, mut i) = two_node();
        let mut ns = r.node_store();
        let (a1, b2) = (row(&mut i, &["a", "1"]), row(&mut i, &["b", "2"]));
        ns.nodes[0].ac = Active::Set(HashSet::from([a1.clone(), b2]));
        ns.nodes[1].ac = Active::Set(HashSet::from([a1.clone()]));
        r.bottom_up_lsj(0, &mut ns, &mut 0);
        assert_eq!(ns.nodes[0].active(), HashSet::from([a1]));
    }

    #[test]
    fn empty_pivot_empties_every_node() {
        let (r, mut i) = two_node();
        let mut ns = r.node_store();
        ns.nodes[0].ac = Active::Set(HashSet::from([row(&mut i, &["a", "1"])]));
        ns.nodes[1].ac = Active::Set(HashSet::new());
        r.top_down_lsj(1, &mut ns, &mut 0);
        assert!(ns.nodes[0].active().is_empty());
    }

    #[test]
    fn no_shared_variables_keeps_or_empties() {
        let (r, mut i) = setup(
            "H(?a,?b) :- P(?a), C(?b).",
            vec![(vec!["a"], vec![0], None), (vec!["b"], vec![1], Some(0))],
        );
        let mut ns = r.node_store();
        let x = row(&mut i, &["x"]);
        ns.nodes[0].ac = Active::Set(HashSet::from([x.clone()]));
        ns.nodes[1].ac = Active::Set(HashSet::from([row(&mut i, &["y"])]));
        r.bottom_up_lsj(0, &mut ns, &mut 0);
        assert_eq!(ns.nodes[0].active(), HashSet::from([x]));
        ns.nodes[1].ac = Active::Set(HashSet::new());
        r.bottom_up_lsj(0, &mut ns, &mut 0);
        assert!(ns.nodes[0].active().is_empty());
        let got = r.cross_node_join(&ns, &mut 0);
        assert!(got.is_empty());
    }

    #[test]
    fn single_node_join_projects_to_head() {
        let (r, mut i) = setup("H(?a) :- P(?a,?b).", vec![(vec!["a", "b"], vec![0], None)]);
        let mut ns = r.node_store();
        ns.nodes[0].ac = Active::Set(HashSet::from([row(&mut i, &["x", "1"]), row(&mut i, &["x", "2"])]));
        let got = r.cross_node_join(&ns, &mut 0);
        let h = i.fact("H", &["x"]).unwrap();
        assert_eq!(got, HashMap::from([(h, 2)]));
    }

    #[test]
    fn add_and_delete_round_trip_restores_instantiations() {
        let (r, mut i) = setup(
            "R(?x) :- E(?x,?y), E(?y,?z), E(?z,?x).",
            vec![(vec!["x", "y", "z"], vec![0, 1], None), (vec!["z", "x"], vec![2], Some(0))],
        );
        let facts = parse_facts("E(1,2). E(2,3). E(3,1). E(3,4).", &mut i).unwrap();
        let mut store = FactStore::with_delta(&facts, &facts);
        r.register(&mut store);
        let mut ns = r.node_store();
        let got = r.hd_add(&mut ns, &store, HdOptions::default(), &mut 0);
        let want = parse_facts("R(1). R(2). R(3).", &mut i).unwrap();
        assert_eq!(got.facts, want);
        assert!(got.instances.values().all(|&c| c == 1));
        store.commit_delta();
        for p in 0..2 {
            assert_eq!(ns.nodes[p].counts, r.full_join(p, &store));
            assert!(ns.nodes[p].plus.is_empty());
        }
        let e12 = i.fact("E", &["1", "2"]).unwrap();
        store.retag(&e12, Tag::Delta);
        let del = r.hd_del(&mut ns, &store, HdOptions::default(), &mut 0);
        assert!(del.facts.is_empty(), "R facts are not in the store");
        assert_eq!(del.instances.len(), 3);
        store.remove(&e12);
        for p in 0..2 {
            assert_eq!(ns.nodes[p].inst_i.to_set(), r.full_join(p, &store).into_keys().collect());
        }
    }
}
