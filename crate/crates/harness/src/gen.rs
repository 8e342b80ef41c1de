//! Synthetic datasets: the co-author example and arithmetic expression trees.

use std::fmt::Write;

use anyhow::{bail, Result};
use hdlog_core::{parse_facts, parse_program, FactSet, Interner, Program};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A generated program and dataset in text form, ready to parse or write.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generated {
    pub program: String,
    pub facts: String,
}

impl Generated {
    /// Parses both texts with a fresh interner.
    pub fn load(&self) -> Result<(Interner, Program, FactSet)> {
        let mut i = Interner::new();
        let p = parse_program(&self.program, &mut i)?;
        let f = parse_facts(&self.facts, &mut i)?;
        Ok((i, p, f))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CollabParams {
    pub n: usize,
    pub k: usize,
}

pub const COLLAB_RULE: &str = "PC(?x,?y) :- CW(?x,?z1), CA(?x,?z2), PC(?z1,?y), PC(?z2,?y).";

/// The co-author dataset: 4nk + 2 facts.
pub fn gen_collab(p: CollabParams) -> Result<Generated> {
    let CollabParams { n, k } = p;
    if n == 0 || k == 0 {
        bail!("gen collab needs n >= 1 and k >= 1 (got n={n}, k={k})");
    }
    let mut facts = String::new();
    for i in 0..n {
        for j in 1..=k {
            let m = i * k + j;
            writeln!(facts, "CW(a{i},b{m}).").unwrap();
            writeln!(facts, "CA(a{i},c{m}).").unwrap();
            writeln!(facts, "PC(b{m},d{j}).").unwrap();
            writeln!(facts, "PC(c{m},d{j}).").unwrap();
        }
    }
    writeln!(facts, "CW(a{n},a2).").unwrap();
    writeln!(facts, "CA(a{n},a3).").unwrap();
    Ok(Generated { program: format!("{COLLAB_RULE}\n"), facts })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExpParams {
    pub num_expressions: usize,
    pub num_value_sets: usize,
    pub max_depth: usize,
    pub seed: u64,
}

/// Size of the value domain; arithmetic wraps modulo this.
pub const EXP_DOMAIN: u32 = 50;
const EXP_VARS: usize = 4;

pub const EXP_PROGRAM: &str = "\
eval(?n,?s,?v) :- leaf(?n,?x), binding(?s,?x,?v).
eval(?n,?s,?v) :- node(?n,plus,?l,?r), child(?n,?l), child(?n,?r), eval(?l,?s,?a), eval(?r,?s,?b), sum(?a,?b,?v), val(?a), val(?b), set(?s).
eval(?n,?s,?v) :- node(?n,minus,?l,?r), child(?n,?l), child(?n,?r), eval(?l,?s,?a), eval(?r,?s,?b), diff(?a,?b,?v), val(?a), val(?b), set(?s).
eval(?n,?s,?v) :- node(?n,times,?l,?r), child(?n,?l), child(?n,?r), eval(?l,?s,?a), eval(?r,?s,?b), prod(?a,?b,?v), val(?a), val(?b), set(?s).
";

fn gen_tree(rng: &mut ChaCha8Rng, id: &str, depth: usize, max_depth: usize, out: &mut String) {
    if depth >= max_depth || rng.gen_bool(0.3) {
        writeln!(out, "leaf({id},x{}).", rng.gen_range(0..EXP_VARS)).unwrap();
        return;
    }
    let op = ["plus", "minus", "times"][rng.gen_range(0..3)];
    let (l, r) = (format!("{id}l"), format!("{id}r"));
    writeln!(out, "node({id},{op},{l},{r}).").unwrap();
    writeln!(out, "child({id},{l}).").unwrap();
    writeln!(out, "child({id},{r}).").unwrap();
    gen_tree(rng, &l, depth + 1, max_depth, out);
    gen_tree(rng, &r, depth + 1, max_depth, out);
}

/// Random expression trees of depth at most `max_depth` (a lone leaf has
/// depth 1), each evaluated under every value set. Deterministic in `seed`.
pub fn gen_exp(p: ExpParams) -> Result<Generated> {
    if p.num_expressions == 0 || p.num_value_sets == 0 || p.max_depth == 0 {
        bail!("gen exp needs positive counts and depth (got {p:?})");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut facts = String::new();
    for e in 0..p.num_expressions {
        gen_tree(&mut rng, &format!("e{e}"), 1, p.max_depth, &mut facts);
    }
    for s in 0..p.num_value_sets {
        writeln!(facts, "set(s{s}).").unwrap();
        for x in 0..EXP_VARS {
            writeln!(facts, "binding(s{s},x{x},{}).", rng.gen_range(0..EXP_DOMAIN)).unwrap();
        }
    }
    for a in 0..EXP_DOMAIN {
        writeln!(facts, "val({a}).").unwrap();
        for b in 0..EXP_DOMAIN {
            let (sum, diff, prod) = ((a + b) % EXP_DOMAIN, (a + EXP_DOMAIN - b) % EXP_DOMAIN, (a * b) % EXP_DOMAIN);
            writeln!(facts, "sum({a},{b},{sum}).\ndiff({a},{b},{diff}).\nprod({a},{b},{prod}).").unwrap();
        }
    }
    Ok(Generated { program: EXP_PROGRAM.to_string(), facts })
}
