//! Left-to-right nested index joins over a [`FactStore`].

use crate::model::{Atom, Const, Pred, Term, Var};
use crate::store::{FactStore, Mask, Region};

#[derive(Clone, Debug)]
struct Step {
    pred: Pred,
    mask: Mask,
    full: bool,
    key: Vec<Term>,
    /// Positions whose variable is first bound by this step.
    binds: Vec<(usize, Var)>,
    /// Pairs of positions in this atom that must hold the same constant.
    eqs: Vec<(usize, usize)>,
}

/// A fixed matching order for a sequence of atoms.
///
/// Steps are matched in the given order. Variables in `bound` must be set in
/// the binding before [`JoinPlan::run`] is called.
#[derive(Clone, Debug)]
pub struct JoinPlan {
    steps: Vec<Step>,
    num_vars: usize,
}

impl JoinPlan {
    pub fn new<'a>(atoms: impl IntoIterator<Item = &'a Atom>, bound: &[Var], num_vars: usize) -> Self {
        let mut is_bound = vec![false; num_vars];
        for v in bound {
            is_bound[v.index()] = true;
        }
        let mut steps = Vec::new();
        for atom in atoms {
            let mut mask = 0;
            let mut key = Vec::new();
            let mut binds = Vec::new();
            let mut eqs = Vec::new();
            for (pos, term) in atom.args.iter().enumerate() {
                match *term {
                    Term::Const(_) => {
                        mask |= 1 << pos;
                        key.push(*term);
                    }
                    Term::Var(v) if is_bound[v.index()] => {
                        mask |= 1 << pos;
                        key.push(*term);
                    }
                    Term::Var(v) => match binds.iter().find(|(_, w)| *w == v) {
                        Some(&(first, _)) => eqs.push((first, pos)),
                        None => binds.push((pos, v)),
                    },
                }
            }
            for &(_, v) in &binds {
                is_bound[v.index()] = true;
            }
            steps.push(Step {
                pred: atom.pred,
                mask,
                full: binds.is_empty() && eqs.is_empty(),
                key,
                binds,
                eqs,
            });
        }
        JoinPlan { steps, num_vars }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Predicate of step `i`.
    pub fn pred(&self, i: usize) -> Pred {
        self.steps[i].pred
    }

    /// Index masks this plan looks up with.
    pub fn masks(&self) -> impl Iterator<Item = (Pred, Mask)> + '_ {
        self.steps.iter().filter(|s| !s.full && s.mask != 0).map(|s| (s.pred, s.mask))
    }

    /// Registers this plan's lookup masks with the store.
    pub fn register(&self, store: &mut FactStore) {
        for (p, m) in self.masks() {
            store.register_mask(p, m);
        }
    }

    /// Enumerates every extension of `binding` matching step `i` against
    /// `regions[i]`. `work` is incremented once per candidate fact examined
    /// and once per membership probe. The callback returns false to stop;
    /// the return value is false if enumeration was stopped.
    pub fn run(
        &self,
        store: &FactStore,
        regions: &[Region],
        binding: &mut [Const],
        work: &mut u64,
        f: &mut dyn FnMut(&[Const]) -> bool,
    ) -> bool {
        debug_assert_eq!(regions.len(), self.steps.len());
        let mut keys: Vec<Vec<Const>> = self.steps.iter().map(|s| Vec::with_capacity(s.key.len())).collect();
        self.step(0, store, regions, binding, &mut keys, work, f)
    }

    #[allow(clippy::too_many_arguments)]
    fn step(
        &self,
        i: usize,
        store: &FactStore,
        regions: &[Region],
        binding: &mut [Const],
        keys: &mut [Vec<Const>],
        work: &mut u64,
        f: &mut dyn FnMut(&[Const]) -> bool,
    ) -> bool {
        let Some(step) = self.steps.get(i) else {
            return f(binding);
        };
        let (key, rest) = keys.split_first_mut().expect("one key buffer per step");
        key.clear();
        key.extend(step.key.iter().map(|t| match *t {
            Term::Const(c) => c,
            Term::Var(v) => binding[v.index()],
        }));
        if step.full {
            *work += 1;
            if store.contains_tuple(step.pred, regions[i], key) {
                return self.step(i + 1, store, regions, binding, rest, work, f);
            }
            return true;
        }
        store.for_each_match(step.pred, regions[i], step.mask, key, &mut |t| {
            *work += 1;
            if step.eqs.iter().any(|&(a, b)| t[a] != t[b]) {
                return true;
            }
            for &(pos, v) in &step.binds {
                binding[v.index()] = t[pos];
            }
            self.step(i + 1, store, regions, binding, rest, work, f)
        })
    }
}

/// Placeholder for unbound binding slots.
pub const UNBOUND: Const = Const(u32::MAX);
