/// Thirty rules of assorted shapes: chains, stars, cycles, cliques, grids
/// and rules with constants or repeated variables.
pub const RULE_CORPUS: &str = "\
T(?x,?y) :- E(?x,?y).
T(?x,?z) :- E(?x,?y), T(?y,?z).
Tri(?x,?y,?z) :- E(?x,?y), E(?y,?z), E(?z,?x).
PC(?x,?y) :- CW(?x,?z1), CA(?x,?z2), PC(?z1,?y), PC(?z2,?y).
Sq(?a) :- E(?a,?b), E(?b,?c), E(?c,?d), E(?d,?a).
Pent(?a) :- E(?a,?b), E(?b,?c), E(?c,?d), E(?d,?e), E(?e,?a).
Hex(?a) :- E(?a,?b), E(?b,?c), E(?c,?d), E(?d,?e), E(?e,?f), E(?f,?a).
Star(?x) :- SA(?x,?a), SB(?x,?b), SC(?x,?c), SD(?x,?d).
Path4(?a,?e) :- E(?a,?b), F(?b,?c), G(?c,?d), H(?d,?e).
K4(?a) :- E(?a,?b), E(?a,?c), E(?a,?d), E(?b,?c), E(?b,?d), E(?c,?d).
Tern(?x,?w) :- R(?x,?y,?z), U(?y,?z,?w).
TernCyc(?x) :- R(?x,?y,?z), S(?y,?w), S(?z,?w), S(?w,?x).
Self(?x) :- E(?x,?x).
Loop(?x) :- E(?x,?y), E(?y,?x).
Const(?x) :- E(?x,a), E(a,?y), E(?y,?x).
Cover(?x,?y) :- R(?x,?y,?z), E(?x,?y), E(?y,?z), E(?z,?x).
Bowtie(?x) :- E(?x,?a), E(?a,?b), E(?b,?x), E(?x,?c), E(?c,?d), E(?d,?x).
Two(?x,?y) :- A(?x), B(?y).
Grid(?a) :- H(?a,?b), H(?c,?d), V(?a,?c), V(?b,?d).
Chord(?a) :- E(?a,?b), E(?b,?c), E(?c,?d), E(?d,?a), E(?a,?c).
Diamond(?a,?d) :- E(?a,?b), E(?a,?c), E(?b,?d), E(?c,?d).
Kite(?a) :- E(?a,?b), E(?b,?c), E(?c,?a), E(?c,?t).
Wheel(?h) :- S(?h,?a), S(?h,?b), S(?h,?c), E(?a,?b), E(?b,?c), E(?c,?a).
Tree(?r) :- E(?r,?a), E(?r,?b), E(?a,?c), E(?a,?d), E(?b,?f).
Mixed(?x,?z) :- R(?x,?y,?x), E(?y,?z).
Hyper(?x) :- R(?x,?y,?z), R(?y,?z,?w), R(?z,?w,?x).
Unary(?x) :- A(?x), B(?x), C(?x).
Pair(?x,?y) :- E(?x,?y), F(?y,?x), G(?x,?y).
LongCyc(?a) :- E(?a,?b), F(?b,?c), G(?c,?a), E(?c,?e), F(?e,?g), G(?g,?c).
Prism(?a) :- E(?a,?b), E(?b,?c), E(?c,?a), F(?a,?d), F(?b,?e), F(?c,?g), E(?d,?e), E(?e,?g), E(?g,?d).
";

/// Transitive closure plus a few rules over it; every rule is acyclic.
pub const TC_PROGRAM: &str = "\
T(?x,?y) :- E(?x,?y).
T(?x,?z) :- E(?x,?y), T(?y,?z).
Reach(?x) :- Src(?s), T(?s,?x).
Back(?x,?y) :- T(?x,?y), E(?y,?x).
Lab(?x,?l) :- T(?x,?y), L(?y,?l).
";

/// A cycle of `n` vertices with chords every third vertex and labels on
/// every fifth.
pub fn tc_facts(n: usize) -> String {
    let mut out = String::from("Src(v0).\n");
    for i in 0..n {
        out.push_str(&format!("E(v{i},v{}).\n", (i + 1) % n));
        if i % 3 == 0 {
            out.push_str(&format!("E(v{i},v{}).\n", (i + 7) % n));
        }
        if i % 5 == 0 {
            out.push_str(&format!("L(v{i},l{}).\n", i % 2));
        }
    }
    out
}
