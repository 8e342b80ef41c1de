//! Hypertree decompositions of rule bodies: representation, validity,
//! width, cost estimation and search.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use crate::model::{dedup_vars, FactSet, Interner, Pred, Rule, Term, Var};

/// One node of a decomposition. `lambda` holds body atom indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecompNode {
    pub chi: Vec<Var>,
    pub lambda: Vec<usize>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// A rooted tree of nodes; node ids are positions in `nodes` and also fix
/// the node order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HypertreeDecomposition {
    nodes: Vec<DecompNode>,
    root: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ShapeError {
    #[error("decomposition has no nodes")]
    Empty,
    #[error("node {0} has an out-of-range parent")]
    BadParent(usize),
    #[error("decomposition has {0} roots")]
    Roots(usize),
    #[error("parent links contain a cycle")]
    Cycle,
}

impl HypertreeDecomposition {
    /// Builds a decomposition from `(chi, lambda, parent)` triples.
    pub fn new(spec: Vec<(Vec<Var>, Vec<usize>, Option<usize>)>) -> Result<Self, ShapeError> {
        if spec.is_empty() {
            return Err(ShapeError::Empty);
        }
        let n = spec.len();
        let mut nodes: Vec<DecompNode> = spec
            .into_iter()
            .map(|(chi, lambda, parent)| DecompNode { chi, lambda, parent, children: Vec::new() })
            .collect();
        let roots: Vec<usize> = (0..n).filter(|&i| nodes[i].parent.is_none()).collect();
        if roots.len() != 1 {
            return Err(ShapeError::Roots(roots.len()));
        }
        for i in 0..n {
            if let Some(p) = nodes[i].parent {
                if p >= n || p == i {
                    return Err(ShapeError::BadParent(i));
                }
                nodes[p].children.push(i);
            }
        }
        let hd = HypertreeDecomposition { nodes, root: roots[0] };
        if hd.bfs(hd.root).len() != n {
            return Err(ShapeError::Cycle);
        }
        Ok(hd)
    }

    /// The single-node decomposition with λ = b(r) and χ = var(b(r)).
    pub fn single_node(rule: &Rule) -> Self {
        Self::new(vec![(rule.body_vars(), (0..rule.body.len()).collect(), None)]).expect("one root")
    }

    pub fn nodes(&self) -> &[DecompNode] {
        &self.nodes
    }

    pub fn node(&self, p: usize) -> &DecompNode {
        &self.nodes[p]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Tree neighbours of `p`.
    pub fn neighbours(&self, p: usize) -> impl Iterator<Item = usize> + '_ {
        self.nodes[p].parent.into_iter().chain(self.nodes[p].children.iter().copied())
    }

    /// Nodes in breadth-first order from `start`, treating the tree as
    /// undirected, each paired with its predecessor on the path to `start`.
    pub fn bfs_from(&self, start: usize) -> Vec<(usize, Option<usize>)> {
        let mut seen = vec![false; self.nodes.len()];
        let mut out = Vec::new();
        let mut queue = VecDeque::from([(start, None)]);
        seen[start] = true;
        while let Some((p, from)) = queue.pop_front() {
            out.push((p, from));
            for q in self.neighbours(p) {
                if !seen[q] {
                    seen[q] = true;
                    queue.push_back((q, Some(p)));
                }
            }
        }
        out
    }

    fn bfs(&self, start: usize) -> Vec<usize> {
        let mut seen = vec![false; self.nodes.len()];
        let mut out = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(p) = queue.pop_front() {
            out.push(p);
            for &q in &self.nodes[p].children {
                if !seen[q] {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
        out
    }

    /// Nodes of the subtree rooted at `p`.
    pub fn subtree(&self, p: usize) -> Vec<usize> {
        self.bfs(p)
    }

    /// Edges as (parent, child) pairs.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes.iter().enumerate().filter_map(|(i, n)| n.parent.map(|p| (p, i)))
    }

    /// Decomposition dump, one line per node in node order.
    pub fn dump(&self, rule: &Rule, interner: &Interner) -> String {
        let mut out = String::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let parent = n.parent.map_or("-".to_string(), node_name);
            let chi: Vec<String> = n.chi.iter().map(|&v| format!("?{}", rule.var_name(v))).collect();
            let lambda: Vec<String> = n.lambda.iter().map(|&a| interner.display_atom(rule, &rule.body[a])).collect();
            out.push_str(&format!(
                "node {} parent={} chi={{{}}} lambda={{{}}}\n",
                node_name(i),
                parent,
                chi.join(","),
                lambda.join(",")
            ));
        }
        out
    }
}

/// Printed name of node `i` (`p1`, `p2`, ...).
pub fn node_name(i: usize) -> String {
    format!("p{}", i + 1)
}

/// The first violated condition of the decomposition definition.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Violation {
    #[error("atom {atom} refers to a body atom that does not exist")]
    AtomOutOfRange { atom: usize },
    #[error("condition 1: no node covers the variables of body atom {atom}")]
    Uncovered { atom: usize },
    #[error("condition 2: the nodes containing variable {var} are not connected")]
    Disconnected { var: String },
    #[error("condition 3: variable {var} of node {node} is not a variable of its atoms")]
    ChiOutsideLambda { node: String, var: String },
    #[error("condition 4: variable {var} of node {node} appears below it but not in its chi")]
    Descendant { node: String, var: String },
}

impl Violation {
    /// The number of the violated condition (0 for malformed input).
    pub fn condition(&self) -> u8 {
        match self {
            Violation::AtomOutOfRange { .. } => 0,
            Violation::Uncovered { .. } => 1,
            Violation::Disconnected { .. } => 2,
            Violation::ChiOutsideLambda { .. } => 3,
            Violation::Descendant { .. } => 4,
        }
    }
}

fn atom_vars(rule: &Rule, atoms: &[usize]) -> HashSet<Var> {
    atoms.iter().flat_map(|&a| rule.body[a].vars()).collect()
}

/// Checks conditions 1 to 4 in order and reports the first violation.
pub fn check_decomposition(rule: &Rule, hd: &HypertreeDecomposition) -> Result<(), Violation> {
    for n in hd.nodes() {
        if let Some(&atom) = n.lambda.iter().find(|&&a| a >= rule.body.len()) {
            return Err(Violation::AtomOutOfRange { atom });
        }
    }
    let chis: Vec<HashSet<Var>> = hd.nodes().iter().map(|n| n.chi.iter().copied().collect()).collect();
    for (a, atom) in rule.body.iter().enumerate() {
        if !chis.iter().any(|chi| atom.vars().all(|v| chi.contains(&v))) {
            return Err(Violation::Uncovered { atom: a });
        }
    }
    let mut all_vars: Vec<Var> = chis.iter().flatten().copied().collect();
    all_vars.sort();
    all_vars.dedup();
    for v in all_vars {
        let tops = (0..hd.len())
            .filter(|&p| chis[p].contains(&v) && hd.node(p).parent.is_none_or(|q| !chis[q].contains(&v)))
            .count();
        if tops != 1 {
            return Err(Violation::Disconnected { var: rule.var_name(v).to_string() });
        }
    }
    for (p, n) in hd.nodes().iter().enumerate() {
        let lv = atom_vars(rule, &n.lambda);
        if let Some(v) = n.chi.iter().find(|v| !lv.contains(v)) {
            return Err(Violation::ChiOutsideLambda { node: node_name(p), var: rule.var_name(*v).to_string() });
        }
    }
    for (p, n) in hd.nodes().iter().enumerate() {
        let below: HashSet<Var> = hd.subtree(p).into_iter().flat_map(|q| chis[q].iter().copied()).collect();
        let mut lv: Vec<Var> = atom_vars(rule, &n.lambda).into_iter().collect();
        lv.sort();
        if let Some(v) = lv.into_iter().find(|v| below.contains(v) && !chis[p].contains(v)) {
            return Err(Violation::Descendant { node: node_name(p), var: rule.var_name(v).to_string() });
        }
    }
    Ok(())
}

/// max |λ(p)|.
pub fn width(hd: &HypertreeDecomposition) -> usize {
    hd.nodes().iter().map(|n| n.lambda.len()).max().unwrap_or(0)
}

/// Per-predicate cardinality statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct PredStats {
    /// Tuple count T.
    pub tuples: f64,
    /// Distinct values V per argument position.
    pub distinct: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RelationStats {
    preds: HashMap<Pred, PredStats>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecompError {
    #[error("no statistics for predicate {name}")]
    MissingStats { pred: Pred, name: String },
    #[error("rule has {atoms} body atoms, above the search bound of {bound}")]
    SearchSpaceExceeded { atoms: usize, bound: usize },
}

impl RelationStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// T and V measured on a fact set.
    pub fn from_facts<'a>(facts: impl IntoIterator<Item = &'a crate::model::Fact>) -> Self {
        let mut seen: HashMap<Pred, (usize, Vec<HashSet<crate::model::Const>>)> = HashMap::new();
        for f in facts {
            let e = seen.entry(f.pred).or_insert_with(|| (0, vec![HashSet::new(); f.args.len()]));
            e.0 += 1;
            for (i, c) in f.args.iter().enumerate() {
                e.1[i].insert(*c);
            }
        }
        let preds = seen
            .into_iter()
            .map(|(p, (t, cols))| {
                (p, PredStats { tuples: t as f64, distinct: cols.iter().map(|c| c.len() as f64).collect() })
            })
            .collect();
        RelationStats { preds }
    }

    pub fn insert(&mut self, pred: Pred, stats: PredStats) {
        self.preds.insert(pred, stats);
    }

    pub fn get(&self, pred: Pred) -> Option<&PredStats> {
        self.preds.get(&pred)
    }

    /// Fills in every predicate of `rules` that has no entry. A predicate
    /// defined by rules whose bodies have statistics gets the summed head
    /// estimates of those rules, repeated until nothing changes; any other
    /// gets T equal to the total of the known T (1 if none) and V = T.
    pub fn complete_for<'a>(&mut self, rules: impl IntoIterator<Item = &'a Rule>) {
        let rules: Vec<&Rule> = rules.into_iter().collect();
        loop {
            let mut derived: HashMap<Pred, PredStats> = HashMap::new();
            for r in &rules {
                if self.preds.contains_key(&r.head.pred) {
                    continue;
                }
                let Some(est) = self.body_estimate(r) else { continue };
                let head = &r.head;
                let tuples = est.tuples.max(1.0);
                let distinct: Vec<f64> = head
                    .args
                    .iter()
                    .map(|t| match *t {
                        Term::Const(_) => 1.0,
                        Term::Var(v) => est.distinct.get(&v).copied().unwrap_or(tuples).clamp(1.0, tuples),
                    })
                    .collect();
                let cap: f64 = distinct.iter().product();
                let tuples = tuples.min(cap.max(1.0));
                let e = derived.entry(head.pred).or_insert(PredStats { tuples: 0.0, distinct: vec![0.0; head.arity()] });
                e.tuples += tuples;
                for (d, x) in e.distinct.iter_mut().zip(distinct) {
                    *d += x.min(tuples);
                }
            }
            if derived.is_empty() {
                break;
            }
            for (p, mut st) in derived {
                for d in &mut st.distinct {
                    *d = d.min(st.tuples);
                }
                self.preds.insert(p, st);
            }
        }
        let t = self.preds.values().map(|s| s.tuples).sum::<f64>().max(1.0);
        for rule in rules {
            for atom in std::iter::once(&rule.head).chain(&rule.body) {
                self.preds.entry(atom.pred).or_insert_with(|| PredStats {
                    tuples: t,
                    distinct: vec![t; atom.arity()],
                });
            }
        }
    }

    fn body_estimate(&self, rule: &Rule) -> Option<Estimate> {
        let mut acc: Option<Estimate> = None;
        for atom in &rule.body {
            let e = atom_estimate(self.preds.get(&atom.pred)?, &atom.args);
            acc = Some(match acc {
                None => e,
                Some(prev) => join_estimate(prev, e),
            });
        }
        acc
    }

    fn lookup(&self, pred: Pred, interner: Option<&Interner>) -> Result<&PredStats, DecompError> {
        self.preds.get(&pred).ok_or_else(|| DecompError::MissingStats {
            pred,
            name: interner.map_or_else(|| format!("#{}", pred.0), |i| i.pred_name(pred).to_string()),
        })
    }
}

/// Size estimate of a partial join: T and V per variable.
struct Estimate {
    tuples: f64,
    distinct: HashMap<Var, f64>,
}

fn atom_estimate(stats: &PredStats, args: &[Term]) -> Estimate {
    let mut tuples = stats.tuples;
    let mut distinct: HashMap<Var, f64> = HashMap::new();
    for (i, t) in args.iter().enumerate() {
        let v = stats.distinct.get(i).copied().unwrap_or(stats.tuples).max(1.0);
        match *t {
            Term::Const(_) => tuples /= v,
            Term::Var(x) => {
                let e = distinct.entry(x).or_insert(v);
                *e = e.min(v);
            }
        }
    }
    Estimate { tuples, distinct }
}

fn join_estimate(a: Estimate, b: Estimate) -> Estimate {
    let mut denom = 1.0;
    let mut distinct = a.distinct;
    for (x, vb) in b.distinct {
        match distinct.get_mut(&x) {
            Some(va) => {
                denom *= va.max(vb).max(1.0);
                *va = va.min(vb);
            }
            None => {
                distinct.insert(x, vb);
            }
        }
    }
    let tuples = a.tuples * b.tuples / denom;
    for v in distinct.values_mut() {
        *v = v.min(tuples.max(1.0));
    }
    Estimate { tuples, distinct }
}

/// Left-to-right estimates for the atoms of one node: (|p̂|, in-node cost),
/// the in-node cost being the sum of every prefix estimate.
fn node_estimate(rule: &Rule, lambda: &[usize], stats: &RelationStats, interner: Option<&Interner>) -> Result<(f64, f64), DecompError> {
    let mut acc: Option<Estimate> = None;
    let mut cost = 0.0;
    for &a in lambda {
        let atom = &rule.body[a];
        let e = atom_estimate(stats.lookup(atom.pred, interner)?, &atom.args);
        let next = match acc.take() {
            None => e,
            Some(prev) => join_estimate(prev, e),
        };
        cost += next.tuples;
        acc = Some(next);
    }
    Ok((acc.map_or(0.0, |e| e.tuples), cost))
}

/// Σ in-node cost + Σ over edges 2·(|p̂i| + |p̂j|).
pub fn estimate_cost(rule: &Rule, hd: &HypertreeDecomposition, stats: &RelationStats) -> Result<f64, DecompError> {
    estimate_cost_named(rule, hd, stats, None)
}

pub(crate) fn estimate_cost_named(
    rule: &Rule,
    hd: &HypertreeDecomposition,
    stats: &RelationStats,
    interner: Option<&Interner>,
) -> Result<f64, DecompError> {
    let mut sizes = Vec::with_capacity(hd.len());
    let mut cost = 0.0;
    for n in hd.nodes() {
        let (size, inner) = node_estimate(rule, &n.lambda, stats, interner)?;
        sizes.push(size);
        cost += inner;
    }
    for (p, c) in hd.edges() {
        cost += 2.0 * (sizes[p] + sizes[c]);
    }
    Ok(cost)
}

/// Estimated size of the join of `atoms` of `rule`, left to right.
pub fn join_size(rule: &Rule, atoms: &[usize], stats: &RelationStats) -> Result<f64, DecompError> {
    Ok(node_estimate(rule, atoms, stats, None)?.0)
}

/// Search limits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchConfig {
    /// Largest body the search accepts.
    pub atom_bound: usize,
    /// Largest node width enumerated before falling back to a single node.
    pub max_width: usize,
    pub ranking: Ranking,
}

/// Order in which candidate decompositions are compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ranking {
    /// Cheapest candidate over all widths; width breaks cost ties.
    CostFirst,
    /// Cheapest candidate of the smallest width that has one.
    WidthFirst,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { atom_bound: 12, max_width: 3, ranking: Ranking::CostFirst }
    }
}

impl SearchConfig {
    /// Smallest width over every width up to the body size.
    pub fn exhaustive() -> Self {
        SearchConfig { atom_bound: 12, max_width: usize::MAX, ranking: Ranking::WidthFirst }
    }
}

/// Calls `f` with every partition of `0..n` into blocks of at most `w`
/// elements; blocks are ordered by their smallest element.
fn for_each_partition(n: usize, w: usize, f: &mut dyn FnMut(&[Vec<usize>])) {
    fn go(i: usize, n: usize, w: usize, blocks: &mut Vec<Vec<usize>>, f: &mut dyn FnMut(&[Vec<usize>])) {
        if i == n {
            f(blocks);
            return;
        }
        for b in 0..blocks.len() {
            if blocks[b].len() < w {
                blocks[b].push(i);
                go(i + 1, n, w, blocks, f);
                blocks[b].pop();
            }
        }
        blocks.push(vec![i]);
        go(i + 1, n, w, blocks, f);
        blocks.pop();
    }
    go(0, n, w, &mut Vec::new(), f);
}

/// Joins the blocks into a tree by a maximum-weight spanning tree on shared
/// variable counts, rooted at block 0, with χ = var(λ).
fn tree_for(rule: &Rule, blocks: &[Vec<usize>]) -> HypertreeDecomposition {
    let vars: Vec<Vec<Var>> = blocks.iter().map(|b| rule.vars_of(b.iter().copied())).collect();
    let k = blocks.len();
    let mut edges = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let w = vars[i].iter().filter(|v| vars[j].contains(v)).count();
            edges.push((w, i, j));
        }
    }
    edges.sort_by(|a, b| b.0.cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut comp: Vec<usize> = (0..k).collect();
    fn find(c: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while c[r] != r {
            r = c[r];
        }
        c[x] = r;
        r
    }
    let mut adj = vec![Vec::new(); k];
    for (_, i, j) in edges {
        let (a, b) = (find(&mut comp, i), find(&mut comp, j));
        if a != b {
            comp[a] = b;
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let mut parent = vec![None; k];
    let mut seen = vec![false; k];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(p) = queue.pop_front() {
        adj[p].sort();
        for &q in &adj[p] {
            if !seen[q] {
                seen[q] = true;
                parent[q] = Some(p);
                queue.push_back(q);
            }
        }
    }
    let spec = blocks.iter().zip(vars).zip(parent).map(|((b, v), p)| (v, b.clone(), p)).collect();
    HypertreeDecomposition::new(spec).expect("spanning tree")
}

fn sorted_lambdas(hd: &HypertreeDecomposition) -> Vec<Vec<usize>> {
    let mut l: Vec<Vec<usize>> = hd
        .nodes()
        .iter()
        .map(|n| {
            let mut x = n.lambda.clone();
            x.sort();
            x
        })
        .collect();
    l.sort();
    l
}

/// A valid decomposition of minimal estimated cost among the candidates of
/// the smallest width that has any.
pub fn decompose(rule: &Rule, stats: &RelationStats) -> Result<HypertreeDecomposition, DecompError> {
    decompose_with(rule, stats, SearchConfig::default(), None)
}

pub fn decompose_with(
    rule: &Rule,
    stats: &RelationStats,
    config: SearchConfig,
    interner: Option<&Interner>,
) -> Result<HypertreeDecomposition, DecompError> {
    let n = rule.body.len();
    if n > config.atom_bound {
        return Err(DecompError::SearchSpaceExceeded { atoms: n, bound: config.atom_bound });
    }
    for atom in &rule.body {
        stats.lookup(atom.pred, interner)?;
    }
    let mut best: Option<((f64, usize, usize, Vec<Vec<usize>>), HypertreeDecomposition)> = None;
    for w in 1..=config.max_width.min(n) {
        let mut err = None;
        for_each_partition(n, w, &mut |blocks| {
            if blocks.iter().map(Vec::len).max() != Some(w) || err.is_some() {
                return;
            }
            let hd = tree_for(rule, blocks);
            if check_decomposition(rule, &hd).is_err() {
                return;
            }
            let cost = match estimate_cost_named(rule, &hd, stats, interner) {
                Ok(c) => c,
                Err(e) => {
                    err = Some(e);
                    return;
                }
            };
            let key = (cost, w, hd.len(), sorted_lambdas(&hd));
            let better = match &best {
                None => true,
                Some((k, _)) => key.0 < k.0 || (key.0 == k.0 && (key.1, key.2, &key.3) < (k.1, k.2, &k.3)),
            };
            if better {
                best = Some((key, hd));
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        if config.ranking == Ranking::WidthFirst && best.is_some() {
            break;
        }
    }
    if let Some((_, hd)) = best {
        return Ok(hd);
    }
    Ok(HypertreeDecomposition::single_node(rule))
}

/// True iff no width-1 decomposition of the rule exists.
pub fn is_complex(rule: &Rule, stats: &RelationStats) -> Result<bool, DecompError> {
    let one = SearchConfig { max_width: 1, ranking: Ranking::WidthFirst, ..SearchConfig::default() };
    let hd = decompose_with(rule, stats, one, None)?;
    Ok(rule.body.len() > 1 && width(&hd) > 1)
}

/// Statistics from a fact set, completed for the rules' predicates.
pub fn stats_for(rules: &[Rule], facts: &FactSet) -> RelationStats {
    let mut s = RelationStats::from_facts(facts);
    s.complete_for(rules);
    s
}

impl fmt::Display for DecompNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "chi={:?} lambda={:?}", self.chi, self.lambda)
    }
}

/// χ for a node as the variables of its atoms, in first-occurrence order.
pub fn chi_of(rule: &Rule, lambda: &[usize]) -> Vec<Var> {
    dedup_vars(lambda.iter().flat_map(|&a| rule.body[a].vars()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_program;
    use proptest::prelude::*;

    const PC: &str = "PC(?x,?y) :- CW(?x,?z1), CA(?x,?z2), PC(?z1,?y), PC(?z2,?y).";

    fn rule(text: &str) -> (Rule, Interner) {
        let mut i = Interner::new();
        let p = parse_program(text, &mut i).unwrap();
        (p.rules()[0].clone(), i)
    }

    fn var(r: &Rule, name: &str) -> Var {
        Var(r.var_names().iter().position(|n| n == name).unwrap() as u32)
    }

    fn vars(r: &Rule, names: &[&str]) -> Vec<Var> {
        names.iter().map(|n| var(r, n)).collect()
    }

    fn uniform(r: &Rule, _: &Interner) -> RelationStats {
        let mut s = RelationStats::new();
        s.complete_for([r]);
        s
    }

    fn pairing_pc(r: &Rule) -> HypertreeDecomposition {
        HypertreeDecomposition::new(vec![
            (vars(r, &["x", "z1", "y"]), vec![0, 2], None),
            (vars(r, &["x", "z2", "y"]), vec![1, 3], Some(0)),
        ])
        .unwrap()
    }

    #[test]
    fn pc_decomposition_is_valid_with_width_two() {
        let (r, i) = rule(PC);
        let hd = pairing_pc(&r);
        assert_eq!(check_decomposition(&r, &hd), Ok(()));
        assert_eq!(width(&hd), 2);
        assert_eq!(
            hd.dump(&r, &i),
            "node p1 parent=- chi={?x,?z1,?y} lambda={CW(?x,?z1),PC(?z1,?y)}\n\
             node p2 parent=p1 chi={?x,?z2,?y} lambda={CA(?x,?z2),PC(?z2,?y)}\n"
        );
    }

    #[test]
    fn single_node_is_always_valid() {
        for text in [PC, "T(?x,?z) :- E(?x,?y), T(?y,?z).", "R(?x) :- E(?x,?y), E(?y,?z), E(?z,?x)."] {
            let (r, _) = rule(text);
            let hd = HypertreeDecomposition::single_node(&r);
            assert_eq!(check_decomposition(&r, &hd), Ok(()));
            assert_eq!(width(&hd), r.body.len());
        }
    }

    #[test]
    fn broken_path_violates_connectedness() {
        let (r, _) = rule("H(?x) :- A(?x,?y), B(?y,?z), C(?z,?x).");
        let hd = HypertreeDecomposition::new(vec![
            (vars(&r, &["x", "y"]), vec![0], None),
            (vars(&r, &["y", "z"]), vec![1], Some(0)),
            (vars(&r, &["z", "x"]), vec![2], Some(1)),
        ])
        .unwrap();
        let v = check_decomposition(&r, &hd).unwrap_err();
        assert_eq!(v.condition(), 2);
        assert_eq!(v, Violation::Disconnected { var: "x".into() });
    }

    #[test]
    fn each_condition_is_reported() {
        let (r, _) = rule("H(?x) :- A(?x,?y), B(?y,?z).");
        let missing = HypertreeDecomposition::new(vec![(vars(&r, &["x", "y"]), vec![0], None)]).unwrap();
        assert_eq!(check_decomposition(&r, &missing).unwrap_err().condition(), 1);
        let outside = HypertreeDecomposition::new(vec![
            (vars(&r, &["x", "y", "z"]), vec![0], None),
            (vars(&r, &["y", "z"]), vec![1], Some(0)),
        ])
        .unwrap();
        assert_eq!(check_decomposition(&r, &outside).unwrap_err().condition(), 3);
        let descendant = HypertreeDecomposition::new(vec![
            (vars(&r, &["y"]), vec![0, 1], None),
            (vars(&r, &["x", "y"]), vec![0], Some(0)),
            (vars(&r, &["y", "z"]), vec![1], Some(0)),
        ])
        .unwrap();
        assert_eq!(check_decomposition(&r, &descendant).unwrap_err().condition(), 4);
    }

    fn narrowest(r: &Rule, s: &RelationStats) -> HypertreeDecomposition {
        let config = SearchConfig { ranking: Ranking::WidthFirst, ..SearchConfig::default() };
        decompose_with(r, s, config, None).unwrap()
    }

    #[test]
    fn chain_has_width_one() {
        let (r, i) = rule("T(?x,?z) :- E(?x,?y), T(?y,?z).");
        let chain = HypertreeDecomposition::new(vec![
            (vars(&r, &["x", "y"]), vec![0], None),
            (vars(&r, &["y", "z"]), vec![1], Some(0)),
        ])
        .unwrap();
        assert_eq!(check_decomposition(&r, &chain), Ok(()));
        assert_eq!(width(&chain), 1);
        let s = uniform(&r, &i);
        assert_eq!(width(&narrowest(&r, &s)), 1);
        assert!(!is_complex(&r, &s).unwrap());
    }

    #[test]
    fn cyclic_rules_are_complex() {
        for text in [PC, "R(?x) :- E(?x,?y), E(?y,?z), E(?z,?x)."] {
            let (r, i) = rule(text);
            let s = uniform(&r, &i);
            let hd = narrowest(&r, &s);
            assert_eq!(check_decomposition(&r, &hd), Ok(()));
            assert_eq!(width(&hd), 2);
            assert_eq!(check_decomposition(&r, &decompose(&r, &s).unwrap()), Ok(()));
            assert!(is_complex(&r, &s).unwrap());
        }
        let (r, i) = rule("H(?x) :- A(?x).");
        assert!(!is_complex(&r, &uniform(&r, &i)).unwrap());
    }

    #[test]
    fn uniform_stats_tie_the_two_pairings_of_the_pc_rule() {
        let (r, i) = rule(PC);
        let s = uniform(&r, &i);
        let pairing = estimate_cost(&r, &pairing_pc(&r), &s).unwrap();
        let other = HypertreeDecomposition::new(vec![
            (vars(&r, &["x", "z1", "z2"]), vec![0, 1], None),
            (vars(&r, &["z1", "y", "z2"]), vec![2, 3], Some(0)),
        ])
        .unwrap();
        assert_eq!(pairing, estimate_cost(&r, &other, &s).unwrap());
        assert_eq!(decompose(&r, &s).unwrap(), other);
    }

    #[test]
    fn textbook_join_estimate() {
        let (r, mut i) = rule("H(?a) :- R(?a,?b), S(?a,?c).");
        let (rp, sp) = (i.predicate("R", 2).unwrap(), i.predicate("S", 2).unwrap());
        let mut s = RelationStats::new();
        s.insert(rp, PredStats { tuples: 100.0, distinct: vec![20.0, 100.0] });
        s.insert(sp, PredStats { tuples: 50.0, distinct: vec![10.0, 50.0] });
        assert_eq!(join_size(&r, &[0, 1], &s).unwrap(), 250.0);
        let single = HypertreeDecomposition::single_node(&r);
        assert_eq!(estimate_cost(&r, &single, &s).unwrap(), 100.0 + 250.0);
        let two = HypertreeDecomposition::new(vec![
            (vars(&r, &["a", "b"]), vec![0], None),
            (vars(&r, &["a", "c"]), vec![1], Some(0)),
        ])
        .unwrap();
        assert_eq!(estimate_cost(&r, &two, &s).unwrap(), 100.0 + 50.0 + 2.0 * (100.0 + 50.0));
    }

    #[test]
    fn missing_stats_name_the_predicate() {
        let (r, i) = rule("H(?a) :- R(?a), S(?a).");
        let err = decompose_with(&r, &RelationStats::new(), SearchConfig::default(), Some(&i)).unwrap_err();
        assert_eq!(err.to_string(), "no statistics for predicate R");
    }

    #[test]
    fn search_bound_is_enforced() {
        let body: Vec<String> = (0..13).map(|k| format!("E(?v{k},?v{})", k + 1)).collect();
        let (r, i) = rule(&format!("H(?v0) :- {}.", body.join(", ")));
        assert!(matches!(
            decompose(&r, &uniform(&r, &i)),
            Err(DecompError::SearchSpaceExceeded { atoms: 13, bound: 12 })
        ));
    }

    fn renamed_rule(names: &[String]) -> String {
        format!(
            "PC(?{a},?{b}) :- CW(?{a},?{c}), CA(?{a},?{d}), PC(?{c},?{b}), PC(?{d},?{b}).",
            a = names[0],
            b = names[1],
            c = names[2],
            d = names[3]
        )
    }

    proptest! {
        #[test]
        fn cost_ignores_variable_names(
            names in proptest::sample::subsequence(vec!["a","b","c","d","e","f","g","h"], 4).prop_shuffle(),
            t in proptest::collection::vec(1.0f64..1000.0, 3),
        ) {
            let names: Vec<String> = names.into_iter().map(String::from).collect();
            let base: Vec<String> = ["x", "y", "z1", "z2"].iter().map(|s| s.to_string()).collect();
            let mut costs = Vec::new();
            for ns in [&base, &names] {
                let (r, mut i) = rule(&renamed_rule(ns));
                let mut s = RelationStats::new();
                for (k, p) in ["CW", "CA", "PC"].iter().enumerate() {
                    let pred = i.predicate(p, 2).unwrap();
                    s.insert(pred, PredStats { tuples: t[k], distinct: vec![t[k].sqrt(), t[k] / 2.0] });
                }
                let hd = decompose(&r, &s).unwrap();
                costs.push((estimate_cost(&r, &hd, &s).unwrap(), sorted_lambdas(&hd)));
            }
            prop_assert_eq!(&costs[0], &costs[1]);
        }
    }
}
