//! Shared helpers and brute-force language predicates for integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use ncm_core::machine::SimCaps;
use ncm_core::oracle::accepts;
use ncm_core::{parse_machine, parse_semilinear, Instr, Machine, SemilinearSet, Word};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture(name: &str) -> Machine {
    let text = std::fs::read_to_string(fixture_path(name)).unwrap();
    parse_machine(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn fixture_sl(name: &str) -> SemilinearSet {
    parse_semilinear(&std::fs::read_to_string(fixture_path(name)).unwrap()).unwrap()
}

pub fn w(s: &str) -> Word {
    s.split_whitespace().map(String::from).collect()
}

pub fn letters(s: &str) -> Word {
    s.chars().map(|c| c.to_string()).collect()
}

pub fn instrs(w: &[String]) -> Vec<Instr> {
    w.iter().map(|s| Instr::parse(s).unwrap()).collect()
}

pub fn words_over(alphabet: &[String], max_len: usize) -> Vec<Word> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &layer {
            for a in alphabet {
                let mut x: Word = w.clone();
                x.push(a.clone());
                next.push(x);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Accepted by some run found by bounded simulation.
pub fn simulates(m: &Machine, w: &[String]) -> bool {
    accepts(m, w, &SimCaps::for_machine(m, w.len())).unwrap()
}

pub fn count(w: &[Instr], x: Instr) -> usize {
    w.iter().filter(|y| **y == x).count()
}

/// Words over Δ_k of length at most `max_len` in which every counter is
/// balanced and never decremented below zero.
pub fn balanced_words(k: usize, max_len: usize) -> Vec<Vec<Instr>> {
    fn go(k: usize, left: usize, cur: &mut Vec<Instr>, cs: &mut Vec<usize>, ds: &mut Vec<usize>, out: &mut Vec<Vec<Instr>>) {
        let owed: usize = (0..k).map(|i| cs[i] - ds[i]).sum();
        if owed == 0 {
            out.push(cur.clone());
        }
        if left == 0 || owed > left {
            return;
        }
        for i in 0..k {
            if owed < left {
                cur.push(Instr::C(i + 1));
                cs[i] += 1;
                go(k, left - 1, cur, cs, ds, out);
                cs[i] -= 1;
                cur.pop();
            }
            if ds[i] < cs[i] {
                cur.push(Instr::D(i + 1));
                ds[i] += 1;
                go(k, left - 1, cur, cs, ds, out);
                ds[i] -= 1;
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(k, max_len, &mut Vec::new(), &mut vec![0; k], &mut vec![0; k], &mut out);
    out
}

fn runs_of(w: &[Instr], x: Instr) -> usize {
    let mut n = 0;
    for (i, y) in w.iter().enumerate() {
        if *y == x && (i == 0 || w[i - 1] != x) {
            n += 1;
        }
    }
    n
}

fn balanced(w: &[Instr], k: usize) -> bool {
    (1..=k).all(|j| count(w, Instr::C(j)) == count(w, Instr::D(j)))
}

fn all_c_before_d(w: &[Instr], j: usize) -> bool {
    let last_c = w.iter().rposition(|x| *x == Instr::C(j));
    let first_d = w.iter().position(|x| *x == Instr::D(j));
    match (last_c, first_d) {
        (Some(c), Some(d)) => c < d,
        _ => true,
    }
}

/// a_1^{i_1} ⋯ a_{2k}^{i_{2k}}: every letter in one block, C_j before D_j,
/// equal exponents.
pub fn in_lb(w: &[Instr], k: usize) -> bool {
    balanced(w, k)
        && (1..=k).all(|j| runs_of(w, Instr::C(j)) <= 1 && runs_of(w, Instr::D(j)) <= 1 && all_c_before_d(w, j))
}

/// Blocks of C letters in some order, then blocks of D letters in some order.
pub fn in_lbi_lbd(w: &[Instr], k: usize) -> bool {
    let split = w.iter().position(|x| !x.is_inc()).unwrap_or(w.len());
    in_lb(w, k) && w[split..].iter().all(|x| !x.is_inc())
}

/// Ordered cuts of permutations of `items` into nonempty consecutive blocks.
pub fn structures(items: &[usize]) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    for p in permutations(items) {
        let n = p.len();
        for mask in 0..(1u32 << n.saturating_sub(1)) {
            let mut blocks = vec![vec![p[0]]];
            for i in 1..n {
                if mask & (1 << (i - 1)) != 0 {
                    blocks.push(Vec::new());
                }
                blocks.last_mut().unwrap().push(p[i]);
            }
            out.push(blocks);
        }
    }
    out
}

pub fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// w_1^{x_1} ⋯ w_m^{x_m} D_1^{y_1} ⋯ D_k^{y_k} (or its mirror with the
/// roles of C and D swapped), generated exhaustively up to `max_len`.
pub fn block_family(k: usize, max_len: usize, blocks_of_c: bool) -> BTreeSet<Vec<Instr>> {
    let mut out = BTreeSet::new();
    let idx: Vec<usize> = (1..=k).collect();
    for st in structures(&idx) {
        let m = st.len();
        let mut xs = vec![1usize; m];
        loop {
            let len: usize = st.iter().zip(&xs).map(|(b, x)| 2 * b.len() * x).sum();
            if len <= max_len {
                let mut y = vec![0usize; k + 1];
                for (b, x) in st.iter().zip(&xs) {
                    for i in b {
                        y[*i] = *x;
                    }
                }
                let (blk, plain): (fn(usize) -> Instr, fn(usize) -> Instr) =
                    if blocks_of_c { (Instr::C, Instr::D) } else { (Instr::D, Instr::C) };
                let mut body = Vec::new();
                for (b, x) in st.iter().zip(&xs) {
                    for _ in 0..*x {
                        body.extend(b.iter().map(|i| blk(*i)));
                    }
                }
                let mut tail = Vec::new();
                for i in 1..=k {
                    tail.extend(std::iter::repeat_n(plain(i), y[i]));
                }
                let word = if blocks_of_c { [body, tail].concat() } else { [tail, body].concat() };
                out.insert(word);
            }
            // odometer over xs with early stop on length
            let mut i = 0;
            loop {
                if i == m {
                    break;
                }
                xs[i] += 1;
                if xs[i] <= max_len {
                    break;
                }
                xs[i] = 1;
                i += 1;
            }
            if i == m {
                break;
            }
        }
    }
    out
}

fn splits(n: usize, parts: usize) -> Vec<Vec<usize>> {
    // boundaries 0 = b_0 <= b_1 <= ... <= b_{parts-1} <= b_parts = n
    fn go(from: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            let mut b = vec![0];
            b.extend(cur.iter().copied());
            b.push(n);
            out.push(b);
            return;
        }
        for x in from..=n {
            cur.push(x);
            go(x, n, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, parts - 1, &mut Vec::new(), &mut out);
    out
}

/// w_0 w_1 ⋯ w_k with w_0 ∈ Δc*, w_i ∈ {C_{i+1..k}, D_i}*, w_k ∈ D_k* and
/// |w_0 ⋯ w_{j-1}|_{C_j} = |w_j|_{D_j} > 0.
pub fn in_lbd(w: &[Instr], k: usize) -> bool {
    splits(w.len(), k + 1).into_iter().any(|b| {
        let seg = |i: usize| &w[b[i]..b[i + 1]];
        let shapes = (0..=k).all(|i| {
            seg(i).iter().all(|x| match x {
                Instr::C(c) => *c > i,
                Instr::D(d) => *d == i,
            })
        });
        shapes
            && (1..=k).all(|j| {
                let before = count(&w[..b[j]], Instr::C(j));
                before == count(seg(j), Instr::D(j)) && before > 0
            })
    })
}

/// w_0 ⋯ w_k with w_0 ∈ C_1*, w_i ∈ {D_1..D_i, C_{i+1}}*, w_k ∈ Δd* and
/// |w_{j-1}|_{C_j} = |w_j ⋯ w_k|_{D_j} > 0.
pub fn in_lbi(w: &[Instr], k: usize) -> bool {
    splits(w.len(), k + 1).into_iter().any(|b| {
        let seg = |i: usize| &w[b[i]..b[i + 1]];
        let shapes = (0..=k).all(|i| {
            seg(i).iter().all(|x| match x {
                Instr::C(c) => *c == i + 1,
                Instr::D(d) => *d <= i,
            })
        });
        shapes
            && (1..=k).all(|j| {
                let here = count(seg(j - 1), Instr::C(j));
                here == count(&w[b[j]..], Instr::D(j)) && here > 0
            })
    })
}
