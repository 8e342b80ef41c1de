use std::collections::BTreeSet;

use hdlog_core::{parse_facts, parse_program, FactSet, Interner, Program};
use rand::seq::SliceRandom;
use rand::Rng;

const PC: &str = "PC(?x,?y) :- CW(?x,?z1), CA(?x,?z2), PC(?z1,?y), PC(?z2,?y).";
const BINARY: [&str; 6] = ["A", "B", "C", "CW", "CA", "PC"];

/// Text of a random program of up to `max_rules` rules mixing binary chain
/// rules (one to three body atoms) and the co-author rule.
pub fn random_program_text<R: Rng>(rng: &mut R, max_rules: usize) -> String {
    let count = rng.gen_range(1..=max_rules);
    let mut rules = Vec::new();
    for _ in 0..count {
        if rng.gen_bool(0.3) {
            rules.push(PC.to_string());
            continue;
        }
        let len = rng.gen_range(1..=3);
        let body: Vec<String> = (0..len)
            .map(|i| format!("{}(?v{},?v{})", BINARY.choose(rng).unwrap(), i, i + 1))
            .collect();
        let head = BINARY.choose(rng).unwrap();
        rules.push(format!("{head}(?v0,?v{len}) :- {}.", body.join(", ")));
    }
    rules.join("\n")
}

fn random_fact_text<R: Rng>(rng: &mut R, domain: usize) -> String {
    format!("{}(c{},c{}).", BINARY.choose(rng).unwrap(), rng.gen_range(0..domain), rng.gen_range(0..domain))
}

/// A random program with an explicit fact set and an update.
pub struct Instance {
    pub interner: Interner,
    pub program: Program,
    pub explicit: FactSet,
    pub add: FactSet,
    pub del: FactSet,
}

/// Random instance with at most `max_facts` explicit facts over a small
/// constant domain, so that rules fire often. `del` is drawn mostly from the
/// explicit facts, `add` mostly from outside them.
pub fn random_instance<R: Rng>(rng: &mut R, max_rules: usize, max_facts: usize) -> Instance {
    let mut interner = Interner::new();
    let program = parse_program(&random_program_text(rng, max_rules), &mut interner).expect("generated program parses");
    let domain = rng.gen_range(3..=6);
    let n = rng.gen_range(0..=max_facts);
    let text: BTreeSet<String> = (0..n).map(|_| random_fact_text(rng, domain)).collect();
    let lines: Vec<String> = text.into_iter().collect();
    let explicit = parse_facts(&lines.join("\n"), &mut interner).expect("generated facts parse");
    let mut del_lines: Vec<String> = lines.iter().filter(|_| rng.gen_bool(0.25)).cloned().collect();
    let extra = rng.gen_range(0..=3);
    del_lines.extend((0..extra).map(|_| random_fact_text(rng, domain)));
    let add_lines: Vec<String> = (0..rng.gen_range(0..=8)).map(|_| random_fact_text(rng, domain)).collect();
    let del = parse_facts(&del_lines.join("\n"), &mut interner).expect("generated facts parse");
    let add = parse_facts(&add_lines.join("\n"), &mut interner).expect("generated facts parse");
    Instance { interner, program, explicit, add, del }
}
