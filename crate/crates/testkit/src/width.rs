use hdlog_core::{Rule, Var};

fn partitions(n: usize) -> Vec<Vec<usize>> {
    // restricted growth strings
    let mut out = Vec::new();
    let mut a = vec![0usize; n];
    fn go(i: usize, max: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == a.len() {
            out.push(a.clone());
            return;
        }
        for b in 0..=max + 1 {
            a[i] = b;
            go(i + 1, max.max(b), a, out);
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    go(1, 0, &mut a, &mut out);
    out
}

/// Edge lists of every labelled tree on `m` vertices, via Prüfer sequences.
fn trees(m: usize) -> Vec<Vec<(usize, usize)>> {
    if m == 1 {
        return vec![vec![]];
    }
    if m == 2 {
        return vec![vec![(0, 1)]];
    }
    let mut out = Vec::new();
    let total = m.pow(m as u32 - 2);
    for code in 0..total {
        let mut seq = Vec::with_capacity(m - 2);
        let mut c = code;
        for _ in 0..m - 2 {
            seq.push(c % m);
            c /= m;
        }
        let mut degree = vec![1usize; m];
        for &s in &seq {
            degree[s] += 1;
        }
        let mut edges = Vec::new();
        for &s in &seq {
            let leaf = (0..m).find(|&v| degree[v] == 1).unwrap();
            edges.push((leaf, s));
            degree[leaf] -= 1;
            degree[s] -= 1;
        }
        let rest: Vec<usize> = (0..m).filter(|&v| degree[v] == 1).collect();
        edges.push((rest[0], rest[1]));
        out.push(edges);
    }
    out
}

fn connected_for_every_var(rule: &Rule, blocks: &[Vec<usize>], edges: &[(usize, usize)]) -> bool {
    let has = |b: &Vec<usize>, v: Var| b.iter().any(|&a| rule.body[a].vars().any(|w| w == v));
    for v in rule.body_vars() {
        let holders: Vec<usize> = (0..blocks.len()).filter(|&b| has(&blocks[b], v)).collect();
        let mut seen = vec![false; blocks.len()];
        let mut stack = vec![holders[0]];
        seen[holders[0]] = true;
        while let Some(x) = stack.pop() {
            for &(a, b) in edges {
                for (p, q) in [(a, b), (b, a)] {
                    if p == x && !seen[q] && holders.contains(&q) {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        if holders.iter().any(|&h| !seen[h]) {
            return false;
        }
    }
    true
}

/// Smallest width over all trees whose nodes partition the body atoms, with
/// each node's variables being exactly those of its atoms. Exponential;
/// meant for bodies of at most six atoms.
pub fn exact_width(rule: &Rule) -> usize {
    let n = rule.body.len();
    let mut best = n;
    for labels in partitions(n) {
        let m = labels.iter().max().map_or(0, |x| x + 1);
        let blocks: Vec<Vec<usize>> = (0..m).map(|b| (0..n).filter(|&a| labels[a] == b).collect()).collect();
        let w = blocks.iter().map(Vec::len).max().unwrap_or(0);
        if w >= best {
            continue;
        }
        if trees(m).iter().any(|t| connected_for_every_var(rule, &blocks, t)) {
            best = w;
        }
    }
    best
}
