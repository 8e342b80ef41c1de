//! Fact storage partitioned into an `old` region (I \ Δ) and a `delta`
//! region (Δ), with hash indexes on bound argument positions.
//!
//! Every fact carries exactly one tag. Indexes are keyed by a bitmask of
//! bound positions and are kept up to date on every insert, remove and
//! retag; lookups on masks nobody registered fall back to a filtered scan.

use std::collections::{HashMap, HashSet};

use crate::model::{Const, Fact, FactSet, Pred, Rule, Term, Tuple};

/// Which part of the store an atom is matched against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    /// I \ Δ
    Old,
    /// Δ
    Delta,
    /// I
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tag {
    Old,
    Delta,
}

/// Bitmask of bound argument positions.
pub type Mask = u64;

pub(crate) fn mask_positions(mask: Mask) -> impl Iterator<Item = usize> {
    (0..64).filter(move |i| mask & (1 << i) != 0)
}

fn project(tuple: &[Const], mask: Mask) -> Box<[Const]> {
    mask_positions(mask).map(|i| tuple[i]).collect()
}

#[derive(Clone, Debug, Default)]
struct Part {
    tuples: HashSet<Tuple>,
    indexes: HashMap<Mask, HashMap<Box<[Const]>, Vec<Tuple>>>,
}

impl Part {
    fn insert(&mut self, t: Tuple) -> bool {
        if !self.tuples.insert(t.clone()) {
            return false;
        }
        for (&mask, index) in self.indexes.iter_mut() {
            index.entry(project(&t, mask)).or_default().push(t.clone());
        }
        true
    }

    fn remove(&mut self, t: &[Const]) -> Option<Tuple> {
        let owned = self.tuples.take(t)?;
        for (&mask, index) in self.indexes.iter_mut() {
            let key = project(t, mask);
            if let Some(bucket) = index.get_mut(&key) {
                if let Some(pos) = bucket.iter().position(|x| **x == *t) {
                    bucket.swap_remove(pos);
                }
                if bucket.is_empty() {
                    index.remove(&key);
                }
            }
        }
        Some(owned)
    }

    fn add_index(&mut self, mask: Mask) {
        if self.indexes.contains_key(&mask) {
            return;
        }
        let mut index: HashMap<Box<[Const]>, Vec<Tuple>> = HashMap::new();
        for t in &self.tuples {
            index.entry(project(t, mask)).or_default().push(t.clone());
        }
        self.indexes.insert(mask, index);
    }

    fn for_each_match(&self, mask: Mask, key: &[Const], f: &mut dyn FnMut(&Tuple) -> bool) -> bool {
        if mask == 0 {
            for t in &self.tuples {
                if !f(t) {
                    return false;
                }
            }
            return true;
        }
        if let Some(index) = self.indexes.get(&mask) {
            if let Some(bucket) = index.get(key) {
                for t in bucket {
                    if !f(t) {
                        return false;
                    }
                }
            }
            return true;
        }
        for t in &self.tuples {
            if mask_positions(mask).zip(key).all(|(i, k)| t[i] == *k) && !f(t) {
                return false;
            }
        }
        true
    }
}

#[derive(Clone, Debug, Default)]
struct Relation {
    old: Part,
    delta: Part,
}

impl Relation {
    fn part(&self, tag: Tag) -> &Part {
        match tag {
            Tag::Old => &self.old,
            Tag::Delta => &self.delta,
        }
    }

    fn part_mut(&mut self, tag: Tag) -> &mut Part {
        match tag {
            Tag::Old => &mut self.old,
            Tag::Delta => &mut self.delta,
        }
    }
}

/// The fact store I with its delta partition.
#[derive(Clone, Debug, Default)]
pub struct FactStore {
    relations: Vec<Relation>,
    len: usize,
    delta_len: usize,
}

impl FactStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// A store holding `facts`, all tagged old.
    pub fn from_facts<'a>(facts: impl IntoIterator<Item = &'a Fact>) -> Self {
        let mut s = Self::new();
        for f in facts {
            s.insert(f.clone(), Tag::Old);
        }
        s
    }

    /// A store holding I with the facts of `delta` tagged delta. Facts of
    /// `delta` missing from `all` are added.
    pub fn with_delta<'a>(
        all: impl IntoIterator<Item = &'a Fact>,
        delta: impl IntoIterator<Item = &'a Fact>,
    ) -> Self {
        let mut s = Self::from_facts(all);
        for f in delta {
            if !s.retag(f, Tag::Delta) {
                s.insert(f.clone(), Tag::Delta);
            }
        }
        s
    }

    fn relation_mut(&mut self, p: Pred) -> &mut Relation {
        let i = p.0 as usize;
        if self.relations.len() <= i {
            self.relations.resize_with(i + 1, Relation::default);
        }
        &mut self.relations[i]
    }

    fn relation(&self, p: Pred) -> Option<&Relation> {
        self.relations.get(p.0 as usize)
    }

    /// Maintains an index for lookups of `pred` with the positions in `mask` bound.
    pub fn register_mask(&mut self, pred: Pred, mask: Mask) {
        let rel = self.relation_mut(pred);
        rel.old.add_index(mask);
        rel.delta.add_index(mask);
    }

    /// Registers the masks used when matching `atoms` in the given order,
    /// starting with the variables in `bound` already bound.
    pub fn register_order<'a>(&mut self, atoms: impl IntoIterator<Item = &'a crate::model::Atom>, bound: &[crate::model::Var]) {
        let mut bound: HashSet<_> = bound.iter().copied().collect();
        for atom in atoms {
            let mut mask = 0;
            for (i, t) in atom.args.iter().enumerate() {
                match *t {
                    Term::Const(_) => mask |= 1 << i,
                    Term::Var(v) if bound.contains(&v) => mask |= 1 << i,
                    Term::Var(_) => {}
                }
            }
            let full = if atom.arity() == 64 { u64::MAX } else { (1u64 << atom.arity()) - 1 };
            if mask != 0 && mask != full {
                self.register_mask(atom.pred, mask);
            }
            bound.extend(atom.vars());
        }
    }

    /// Registers the masks of the textual-order body plan of `rule`.
    pub fn register_rule(&mut self, rule: &Rule) {
        self.register_order(&rule.body, &[]);
    }

    /// Inserts a fact with the given tag; false if it is already present
    /// (in either region).
    pub fn insert(&mut self, fact: Fact, tag: Tag) -> bool {
        if self.tag_of(&fact).is_some() {
            return false;
        }
        self.relation_mut(fact.pred).part_mut(tag).insert(fact.args);
        self.len += 1;
        if tag == Tag::Delta {
            self.delta_len += 1;
        }
        true
    }

    pub fn remove(&mut self, fact: &Fact) -> Option<Tag> {
        let tag = self.tag_of(fact)?;
        self.relation_mut(fact.pred).part_mut(tag).remove(&fact.args);
        self.len -= 1;
        if tag == Tag::Delta {
            self.delta_len -= 1;
        }
        Some(tag)
    }

    /// Moves a present fact to the region of `tag`; false if absent.
    pub fn retag(&mut self, fact: &Fact, tag: Tag) -> bool {
        let Some(cur) = self.tag_of(fact) else { return false };
        if cur != tag {
            let rel = self.relation_mut(fact.pred);
            let t = rel.part_mut(cur).remove(&fact.args).expect("tagged fact present");
            rel.part_mut(tag).insert(t);
            match tag {
                Tag::Delta => self.delta_len += 1,
                Tag::Old => self.delta_len -= 1,
            }
        }
        true
    }

    /// Retags every delta fact as old.
    pub fn commit_delta(&mut self) {
        for rel in &mut self.relations {
            let moved: Vec<Tuple> = rel.delta.tuples.iter().cloned().collect();
            for t in moved {
                rel.delta.remove(&t);
                rel.old.insert(t);
            }
        }
        self.delta_len = 0;
    }

    /// Removes every delta fact.
    pub fn drop_delta(&mut self) {
        for rel in &mut self.relations {
            let gone: Vec<Tuple> = rel.delta.tuples.iter().cloned().collect();
            for t in gone {
                rel.delta.remove(&t);
            }
        }
        self.len -= self.delta_len;
        self.delta_len = 0;
    }

    pub fn tag_of(&self, fact: &Fact) -> Option<Tag> {
        let rel = self.relation(fact.pred)?;
        if rel.old.tuples.contains(&*fact.args) {
            Some(Tag::Old)
        } else if rel.delta.tuples.contains(&*fact.args) {
            Some(Tag::Delta)
        } else {
            None
        }
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.tag_of(fact).is_some()
    }

    pub fn contains_in(&self, fact: &Fact, region: Region) -> bool {
        match (self.tag_of(fact), region) {
            (None, _) => false,
            (Some(_), Region::All) => true,
            (Some(Tag::Old), Region::Old) | (Some(Tag::Delta), Region::Delta) => true,
            _ => false,
        }
    }

    pub fn contains_tuple(&self, pred: Pred, region: Region, args: &[Const]) -> bool {
        let Some(rel) = self.relation(pred) else { return false };
        match region {
            Region::Old => rel.old.tuples.contains(args),
            Region::Delta => rel.delta.tuples.contains(args),
            Region::All => rel.old.tuples.contains(args) || rel.delta.tuples.contains(args),
        }
    }

    /// Number of facts in I.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn delta_len(&self) -> usize {
        self.delta_len
    }

    pub fn region_len(&self, pred: Pred, region: Region) -> usize {
        self.relation(pred).map_or(0, |rel| match region {
            Region::Old => rel.old.tuples.len(),
            Region::Delta => rel.delta.tuples.len(),
            Region::All => rel.old.tuples.len() + rel.delta.tuples.len(),
        })
    }

    /// Visits the tuples of `pred` in `region` whose positions in `mask`
    /// equal `key` (listed in ascending position order). The visitor returns
    /// false to stop early; the return value reports whether the scan ran to
    /// completion.
    pub fn for_each_match(
        &self,
        pred: Pred,
        region: Region,
        mask: Mask,
        key: &[Const],
        f: &mut dyn FnMut(&Tuple) -> bool,
    ) -> bool {
        let Some(rel) = self.relation(pred) else { return true };
        match region {
            Region::Old => rel.old.for_each_match(mask, key, f),
            Region::Delta => rel.delta.for_each_match(mask, key, f),
            Region::All => {
                rel.old.for_each_match(mask, key, f) && rel.delta.for_each_match(mask, key, f)
            }
        }
    }

    /// Facts of the region.
    pub fn iter(&self, region: Region) -> impl Iterator<Item = Fact> + '_ {
        self.relations.iter().enumerate().flat_map(move |(p, rel)| {
            let pred = Pred(p as u32);
            let parts: Vec<&Part> = match region {
                Region::Old => vec![rel.part(Tag::Old)],
                Region::Delta => vec![rel.part(Tag::Delta)],
                Region::All => vec![rel.part(Tag::Old), rel.part(Tag::Delta)],
            };
            parts
                .into_iter()
                .flat_map(|part| part.tuples.iter())
                .map(move |t| Fact { pred, args: t.clone() })
        })
    }

    pub fn facts(&self, region: Region) -> FactSet {
        self.iter(region).collect()
    }

    /// Checks that every index agrees with the tuple sets; used by tests
    /// and the `check` command.
    pub fn indexes_consistent(&self) -> bool {
        self.relations.iter().all(|rel| {
            [&rel.old, &rel.delta].into_iter().all(|part| {
                part.indexes.iter().all(|(&mask, index)| {
                    let n: usize = index.values().map(Vec::len).sum();
                    n == part.tuples.len()
                        && index.iter().all(|(k, bucket)| {
                            bucket.iter().all(|t| part.tuples.contains(t) && project(t, mask) == *k)
                        })
                })
            })
        })
    }
}
