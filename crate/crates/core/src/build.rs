//! Machine constructions: closures under the trio and AFL operations, the
//! trio decomposition, the greedy distinct-letter normal form, semilinear
//! compilers and the short-word bounded form.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::automaton::Nfa;
use crate::budget::Budget;
use crate::decide::{input_product, phase_automaton};
use crate::error::{Error, Result};
use crate::flowsolve::{is_m_positive, LinearSet, SemilinearSet};
use crate::machine::{delta_alphabet, Instr, Machine, MachineBuilder, Phase, Word};
use crate::patterns::{eq_acceptor_with, Expr, Pattern};

// ---------------------------------------------------------------------------
// Helpers

fn free(k: usize) -> Vec<Option<bool>> {
    vec![None; k]
}

fn free_but_positive(k: usize, i: usize) -> Vec<Option<bool>> {
    let mut g = vec![None; k];
    g[i] = Some(true);
    g
}

fn unit(k: usize, i: usize, d: i8) -> Vec<i8> {
    let mut v = vec![0; k];
    v[i] = d;
    v
}

fn widen(guard: &[bool], delta: &[i8], before: usize, after: usize) -> (Vec<bool>, Vec<i8>) {
    let mut g = vec![false; before];
    g.extend_from_slice(guard);
    g.extend(std::iter::repeat(false).take(after));
    let mut d = vec![0; before];
    d.extend_from_slice(delta);
    d.extend(std::iter::repeat(0).take(after));
    (g, d)
}

// ---------------------------------------------------------------------------
// Homomorphisms

/// A homomorphism given by the image of each symbol.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SymbolMap {
    pub images: BTreeMap<String, Word>,
}

impl SymbolMap {
    pub fn new() -> Self {
        SymbolMap::default()
    }

    pub fn identity(alphabet: &[String]) -> Self {
        SymbolMap { images: alphabet.iter().map(|a| (a.clone(), vec![a.clone()])).collect() }
    }

    pub fn with<S: AsRef<str>>(mut self, a: &str, image: &[S]) -> Self {
        self.images.insert(a.to_string(), image.iter().map(|s| s.as_ref().to_string()).collect());
        self
    }

    pub fn image(&self, a: &str) -> Option<&Word> {
        self.images.get(a)
    }

    pub fn apply(&self, w: &[String]) -> Result<Word> {
        let mut out = Vec::new();
        for a in w {
            out.extend(self.image(a).ok_or_else(|| Error::invalid(format!("no image for symbol {a}")))?.iter().cloned());
        }
        Ok(out)
    }

    /// Parses `a=x y, b=` where each image is a space-separated word.
    pub fn parse(text: &str) -> Result<Self> {
        let mut m = SymbolMap::new();
        for (n, entry) in text.split([',', ';']).enumerate() {
            let entry = entry.trim();
            if entry.is_empty() {
                continue;
            }
            let (lhs, rhs) = entry
                .split_once('=')
                .ok_or_else(|| Error::parse(1, n + 1, format!("expected 'symbol=image' in '{entry}'")))?;
            let lhs = lhs.trim();
            if lhs.is_empty() || lhs.contains(char::is_whitespace) {
                return Err(Error::parse(1, n + 1, format!("bad symbol '{lhs}'")));
            }
            if m.images.contains_key(lhs) {
                return Err(Error::parse(1, n + 1, format!("symbol {lhs} mapped twice")));
            }
            let image = rhs.split_whitespace().filter(|s| *s != "@").map(String::from).collect();
            m.images.insert(lhs.to_string(), image);
        }
        Ok(m)
    }

    fn check_total(&self, alphabet: &[String]) -> Result<()> {
        match alphabet.iter().find(|a| !self.images.contains_key(*a)) {
            Some(a) => Err(Error::invalid(format!("homomorphism has no image for symbol {a}"))),
            None => Ok(()),
        }
    }
}

impl fmt::Display for SymbolMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.images.iter().map(|(a, w)| format!("{a}={}", w.join(" "))).collect();
        f.write_str(&parts.join(", "))
    }
}

/// Machine for `h(L(m))`. Long images are read along chains of fresh states;
/// the chain checks the original guard and applies the counter change on its
/// last step, so counter values are untouched while the guard is in force.
pub fn homomorphism_image(m: &Machine, h: &SymbolMap) -> Result<Machine> {
    m.check_structure()?;
    h.check_total(&m.alphabet)?;
    let mut b = MachineBuilder::new(m.k);
    for a in &m.alphabet {
        for s in &h.images[a] {
            b.symbol(s);
        }
    }
    for s in &m.states {
        b.state(s);
    }
    b.set_initial(m.initial);
    for f in &m.finals {
        b.add_final(*f);
    }
    let zero = vec![0i8; m.k];
    for t in &m.transitions {
        let img: Vec<usize> = match t.input {
            Some(a) => h.images[&m.alphabet[a]].iter().map(|s| b.symbol(s)).collect(),
            None => Vec::new(),
        };
        if img.is_empty() {
            b.add(t.src, None, t.guard.clone(), t.dst, t.delta.clone());
            continue;
        }
        let mut p = t.src;
        for (i, s) in img.iter().enumerate() {
            if i + 1 == img.len() {
                b.add(p, Some(*s), t.guard.clone(), t.dst, t.delta.clone());
            } else {
                let q = b.fresh_state(&format!("{}~{}", t.label, i + 1));
                b.add(p, Some(*s), t.guard.clone(), q, zero.clone());
                p = q;
            }
        }
    }
    b.build()
}

/// Machine for `h⁻¹(L(m))`, where `h` maps the new alphabet into words over
/// the alphabet of `m`. Reading a symbol buffers its image, which is then
/// consumed by λ-moves.
pub fn inverse_homomorphism(m: &Machine, h: &SymbolMap) -> Result<Machine> {
    m.check_structure()?;
    let out = m.outgoing();
    let mut b = MachineBuilder::new(m.k);
    let domain: Vec<(usize, Option<Vec<usize>>)> = h
        .images
        .iter()
        .map(|(a, w)| (b.symbol(a), w.iter().map(|s| m.symbol_index(s)).collect::<Option<Vec<usize>>>()))
        .collect();
    for s in &m.states {
        b.state(s);
    }
    b.set_initial(m.initial);
    for f in &m.finals {
        b.add_final(*f);
    }
    // (state, domain symbol, consumed prefix length) -> builder state
    let mut mid: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut node = |b: &mut MachineBuilder, q: usize, sym: usize, i: usize, len: usize, queue: &mut VecDeque<_>| {
        if i == len {
            return q;
        }
        *mid.entry((q, sym, i)).or_insert_with(|| {
            let name = format!("{}~{}~{}", m.states[q], b_symbol_name(h, sym), i);
            queue.push_back((q, sym, i));
            b.fresh_state(&name)
        })
    };
    for q in 0..m.states.len() {
        for &ti in &out[q] {
            let t = &m.transitions[ti];
            if t.input.is_none() {
                b.add(q, None, t.guard.clone(), t.dst, t.delta.clone());
            }
        }
        for (sym, img) in &domain {
            let Some(img) = img else { continue };
            if img.is_empty() {
                b.add_partial(q, Some(*sym), &free(m.k), q, &vec![0; m.k]);
                continue;
            }
            for &ti in &out[q] {
                let t = &m.transitions[ti];
                if t.input == Some(img[0]) {
                    let d = node(&mut b, t.dst, *sym, 1, img.len(), &mut queue);
                    b.add(q, Some(*sym), t.guard.clone(), d, t.delta.clone());
                }
            }
        }
    }
    while let Some((q, sym, i)) = queue.pop_front() {
        let src = node(&mut b, q, sym, i, usize::MAX, &mut queue);
        let img = domain.iter().find(|(s, _)| *s == sym).and_then(|(_, w)| w.clone()).expect("buffered image");
        for &ti in &out[q] {
            let t = &m.transitions[ti];
            let next = match t.input {
                None => i,
                Some(a) if a == img[i] => i + 1,
                Some(_) => continue,
            };
            let d = node(&mut b, t.dst, sym, next, img.len(), &mut queue);
            b.add(src, None, t.guard.clone(), d, t.delta.clone());
        }
    }
    Ok(b.build()?.trimmed())
}

fn b_symbol_name(h: &SymbolMap, sym: usize) -> String {
    h.images.keys().nth(sym).cloned().unwrap_or_default()
}

/// Machine for `L(m) ∩ L(a)`: the synchronous product on input letters.
pub fn intersect_regular(m: &Machine, a: &Nfa, budget: &Budget) -> Result<Machine> {
    m.check_structure()?;
    let dfa = a.determinize_with(budget)?.minimized();
    Ok(input_product(m, &dfa).0)
}

// ---------------------------------------------------------------------------
// Union, concatenation, reversal

fn disjoint_pair(m1: &Machine, m2: &Machine) -> (MachineBuilder, Vec<usize>, Vec<usize>) {
    let k = m1.k + m2.k;
    let mut b = MachineBuilder::new(k);
    b.symbols(&m1.alphabet);
    b.symbols(&m2.alphabet);
    let s1: Vec<usize> = m1.states.iter().map(|s| b.state(&format!("1.{s}"))).collect();
    let s2: Vec<usize> = m2.states.iter().map(|s| b.state(&format!("2.{s}"))).collect();
    for t in &m1.transitions {
        let (g, d) = widen(&t.guard, &t.delta, 0, m2.k);
        let a = t.input.map(|a| b.symbol(&m1.alphabet[a]));
        b.add_labeled(format!("1.{}", t.label), s1[t.src], a, g, s1[t.dst], d);
    }
    for t in &m2.transitions {
        let (g, d) = widen(&t.guard, &t.delta, m1.k, 0);
        let a = t.input.map(|a| b.symbol(&m2.alphabet[a]));
        b.add_labeled(format!("2.{}", t.label), s2[t.src], a, g, s2[t.dst], d);
    }
    (b, s1, s2)
}

/// Machine for `L(m1) ∪ L(m2)` on disjoint counters, entered from a fresh
/// initial state.
pub fn union(m1: &Machine, m2: &Machine) -> Result<Machine> {
    m1.check_structure()?;
    m2.check_structure()?;
    let (mut b, s1, s2) = disjoint_pair(m1, m2);
    let k = b.k();
    let start = b.fresh_state("start");
    b.set_initial(start);
    b.add_labeled("start.1".into(), start, None, vec![false; k], s1[m1.initial], vec![0; k]);
    b.add_labeled("start.2".into(), start, None, vec![false; k], s2[m2.initial], vec![0; k]);
    for f in &m1.finals {
        b.add_final(s1[*f]);
    }
    for f in &m2.finals {
        b.add_final(s2[*f]);
    }
    b.build()
}

/// Machine for `L(m1) L(m2)` on disjoint counters; a zero-guarded λ-bridge
/// leads from each final state of `m1` to the start of `m2`.
pub fn concat(m1: &Machine, m2: &Machine) -> Result<Machine> {
    m1.check_structure()?;
    m2.check_structure()?;
    let (mut b, s1, s2) = disjoint_pair(m1, m2);
    let k = b.k();
    b.set_initial(s1[m1.initial]);
    for (n, f) in m1.finals.iter().enumerate() {
        b.add_labeled(format!("bridge.{n}"), s1[*f], None, vec![false; k], s2[m2.initial], vec![0; k]);
    }
    for f in &m2.finals {
        b.add_final(s2[*f]);
    }
    b.build()
}

fn phase_code(ph: &[Phase]) -> String {
    ph.iter()
        .map(|p| match p {
            Phase::Z0 => 'z',
            Phase::Inc => 'i',
            Phase::Dec => 'd',
            Phase::ZF => 'f',
        })
        .collect()
}

/// Machine for the reversal of `L(m)`. The phase automaton is the
/// instruction-labelled automaton of `m` with its zero tests made explicit;
/// it is run backwards with increments and decrements swapped, and each
/// guard is read off the phase of the node being left.
pub fn reversal(m: &Machine) -> Result<Machine> {
    m.check_structure()?;
    let pa = phase_automaton(m)?;
    let mut b = MachineBuilder::new(m.k);
    b.symbols(&m.alphabet);
    let nodes: Vec<usize> =
        pa.nodes.iter().map(|(q, ph)| b.state(&format!("{}~{}", m.states[*q], phase_code(ph)))).collect();
    let start = b.fresh_state("start");
    b.set_initial(start);
    b.add_final(nodes[pa.initial]);
    for f in &pa.finals {
        b.add(start, None, vec![false; m.k], nodes[*f], vec![0; m.k]);
    }
    for e in &pa.edges {
        let t = &m.transitions[e.transition];
        let guard: Vec<bool> = pa.nodes[e.to].1.iter().map(|p| p.positive()).collect();
        let delta: Vec<i8> = t.delta.iter().map(|d| -d).collect();
        b.add(nodes[e.to], t.input, guard, nodes[e.from], delta);
    }
    Ok(b.build()?.trimmed())
}

// ---------------------------------------------------------------------------
// Trio decomposition

/// `L(m) = h(g⁻¹(I_eq) ∩ R)` over an alphabet Γ of transition descriptors
/// `(q,a,X,p)`.
#[derive(Clone, Debug)]
pub struct TrioDecomposition {
    pub k: usize,
    pub gamma: Vec<String>,
    /// Instruction image of each Γ symbol.
    pub g: Vec<Vec<Instr>>,
    /// Input image of each Γ symbol.
    pub h: Vec<Option<String>>,
    /// Phase-ordering language over Γ.
    pub r: Nfa,
    pub pattern: Pattern,
}

impl TrioDecomposition {
    pub fn g_map(&self) -> SymbolMap {
        SymbolMap {
            images: self
                .gamma
                .iter()
                .zip(&self.g)
                .map(|(s, w)| (s.clone(), w.iter().map(|i| i.to_string()).collect()))
                .collect(),
        }
    }

    pub fn h_map(&self) -> SymbolMap {
        SymbolMap {
            images: self.gamma.iter().zip(&self.h).map(|(s, a)| (s.clone(), a.iter().cloned().collect())).collect(),
        }
    }

    /// Builds a machine for `h(g⁻¹(I_eq) ∩ R)`.
    pub fn reconstruct(&self, budget: &Budget) -> Result<Machine> {
        let eq = eq_acceptor_with(&self.pattern, budget)?;
        let pre = inverse_homomorphism(&eq, &self.g_map())?;
        let cut = intersect_regular(&pre, &self.r, budget)?;
        homomorphism_image(&cut, &self.h_map())
    }
}

/// Splits `m` into a regular part over Γ and the I_eq language of `pattern`
/// (default: every instruction word). `m` should satisfy the pattern.
pub fn trio_decomposition(m: &Machine, pattern: Option<&Pattern>) -> Result<TrioDecomposition> {
    m.check_structure()?;
    let mut pattern = match pattern {
        Some(p) => p.clone(),
        None => Pattern::new(Expr::star(Expr::union(delta_alphabet(m.k).into_iter().map(Expr::Sym).collect())))?,
    };
    if pattern.k > m.k {
        return Err(Error::invalid(format!("pattern uses {} counters, machine has {}", pattern.k, m.k)));
    }
    pattern.k = m.k;
    let pa = phase_automaton(m)?;
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut gamma = Vec::new();
    let mut g = Vec::new();
    let mut h = Vec::new();
    let mut edge_sym = Vec::new();
    for e in &pa.edges {
        let t = &m.transitions[e.transition];
        let instrs: Vec<Instr> = t
            .delta
            .iter()
            .enumerate()
            .filter(|(_, d)| **d != 0)
            .map(|(i, d)| if *d > 0 { Instr::C(i + 1) } else { Instr::D(i + 1) })
            .collect();
        let input = t.input.map(|a| m.alphabet[a].clone());
        let x: String = if instrs.is_empty() { "@".into() } else { instrs.iter().map(|i| i.to_string()).collect() };
        let name =
            format!("({},{},{},{})", m.states[t.src], input.clone().unwrap_or_else(|| "@".into()), x, m.states[t.dst]);
        let id = *index.entry(name.clone()).or_insert_with(|| {
            gamma.push(name);
            g.push(instrs);
            h.push(input);
            gamma.len() - 1
        });
        edge_sym.push(id);
    }
    let mut r = Nfa::new(gamma.clone());
    while r.num_states() < pa.nodes.len() {
        r.add_state();
    }
    r.initial = pa.initial;
    for f in &pa.finals {
        r.finals[*f] = true;
    }
    for (e, s) in pa.edges.iter().zip(&edge_sym) {
        r.add_edge(e.from, Some(*s), e.to);
    }
    Ok(TrioDecomposition { k: m.k, gamma, g, h, r, pattern })
}

// ---------------------------------------------------------------------------
// Greedy splitting

/// Amounts `γ_(p,q)` with prescribed row and column sums.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMatrix {
    pub rows: Vec<u64>,
    pub cols: Vec<u64>,
    pub entries: Vec<Vec<u64>>,
}

impl SplitMatrix {
    pub fn row_sums(&self) -> Vec<u64> {
        self.entries.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.cols.len()).map(|q| self.entries.iter().map(|r| r[q]).sum()).collect()
    }

    pub fn is_consistent(&self) -> bool {
        self.row_sums() == self.rows && self.col_sums() == self.cols
    }
}

/// The greedy loop: take `min(X(p), Y(q))`, subtract it from both, advance
/// `p` when `X(p)` is exhausted and `q` when `Y(q)` is (both on a tie).
pub fn greedy_split(rows: &[u64], cols: &[u64]) -> Result<SplitMatrix> {
    let (sr, sc): (u64, u64) = (rows.iter().sum(), cols.iter().sum());
    if sr != sc {
        return Err(Error::invalid(format!("row sum {sr} differs from column sum {sc}")));
    }
    let mut x = rows.to_vec();
    let mut y = cols.to_vec();
    let mut entries = vec![vec![0u64; cols.len()]; rows.len()];
    let (mut p, mut q) = (0, 0);
    while p < rows.len() && q < cols.len() {
        let v = x[p].min(y[q]);
        entries[p][q] = v;
        x[p] -= v;
        y[q] -= v;
        if x[p] == 0 {
            p += 1;
        }
        if y[q] == 0 {
            q += 1;
        }
    }
    Ok(SplitMatrix { rows: rows.to_vec(), cols: cols.to_vec(), entries })
}

// ---------------------------------------------------------------------------
// Distinct-letter normal form

/// `a_1 ⋯ a_n` when the expression is `a_1^* ⋯ a_n^*`.
pub fn letter_bounded_shape(e: &Expr) -> Option<Vec<Instr>> {
    let one = |x: &Expr| match x {
        Expr::Star(inner) => match inner.as_ref() {
            Expr::Sym(s) => Instr::parse(s),
            _ => None,
        },
        _ => None,
    };
    match e {
        Expr::Eps => Some(Vec::new()),
        Expr::Concat(v) => v.iter().map(one).collect(),
        x => one(x).map(|i| vec![i]),
    }
}

/// Machine over Δ_k accepting `I_eq` of the letter-bounded pattern `p`, in
/// which every counter is increased in one section and decreased in one
/// section. A counter `x` whose letters repeat is replaced by a grid of
/// `α·β` counters `(p,q)`: the p-th `C_x` section fills `(p,1)..(p,β)` in
/// turn and the q-th `D_x` section drains `(1,q)..(α,q)` in turn, skipping
/// cells whose `D_x` section comes first. New counters are numbered by first
/// use.
pub fn distinct_normal_form(p: &Pattern, budget: &Budget) -> Result<Machine> {
    let seq = letter_bounded_shape(&p.expr)
        .ok_or_else(|| Error::invalid("expression is not of the form a_1* ... a_n* over instruction letters"))?;
    let k = p.k;
    let cpos = |y: usize| -> Vec<usize> { (0..seq.len()).filter(|s| seq[*s] == Instr::C(y)).collect() };
    let dpos = |y: usize| -> Vec<usize> { (0..seq.len()).filter(|s| seq[*s] == Instr::D(y)).collect() };
    if seq.is_empty() || (1..=k).all(|y| cpos(y).len() <= 1 && dpos(y).len() <= 1) {
        return eq_acceptor_with(p, budget);
    }
    // Per section, the counter keys it works through.
    let mut slots: Vec<Vec<(usize, usize, usize)>> = Vec::new();
    for (s, a) in seq.iter().enumerate() {
        let y = a.counter();
        let (cs, ds) = (cpos(y), dpos(y));
        let grid = cs.len() > 1 || ds.len() > 1;
        let keys = if !grid {
            vec![(y, 0, 0)]
        } else if a.is_inc() {
            let pi = cs.iter().position(|x| *x == s).expect("own position");
            (0..ds.len()).filter(|q| ds[*q] > s).map(|q| (y, pi, q)).collect()
        } else {
            let qi = ds.iter().position(|x| *x == s).expect("own position");
            (0..cs.len()).filter(|pi| cs[*pi] < s).map(|pi| (y, pi, qi)).collect()
        };
        slots.push(keys);
    }
    let mut number: HashMap<(usize, usize, usize), usize> = HashMap::new();
    for key in slots.iter().flatten() {
        let n = number.len();
        number.entry(*key).or_insert(n);
    }
    let kk = number.len().max(1);
    // Finite control also remembers which original counters have been
    // decremented, so no C_x follows a D_x.
    let mut b = MachineBuilder::new(kk);
    b.symbols(&delta_alphabet(k));
    type Key = (usize, usize, Vec<bool>);
    let mut ids: HashMap<Key, usize> = HashMap::new();
    let mut todo: Vec<Key> = Vec::new();
    let node = |b: &mut MachineBuilder, ids: &mut HashMap<Key, usize>, key: Key, todo: &mut Vec<Key>| -> usize {
        *ids.entry(key.clone()).or_insert_with(|| {
            let flags: String = key.2.iter().map(|f| if *f { '1' } else { '0' }).collect();
            todo.push(key.clone());
            b.state(&format!("s{}_{}/{}", key.0 + 1, key.1 + 1, flags))
        })
    };
    let start = node(&mut b, &mut ids, (0, 0, vec![false; k]), &mut todo);
    let end = b.state("end");
    b.set_initial(start);
    b.add_final(end);
    while let Some((s, r, flags)) = todo.pop() {
        let here = ids[&(s, r, flags.clone())];
        let instr = seq[s];
        let x = instr.counter() - 1;
        if let Some(key) = slots[s].get(r) {
            let c = number[key];
            let a = b.symbol(&instr.to_string());
            if instr.is_inc() {
                if !flags[x] {
                    b.add_partial(here, Some(a), &free(kk), here, &unit(kk, c, 1));
                }
            } else {
                let mut f2 = flags.clone();
                f2[x] = true;
                let dst = node(&mut b, &mut ids, (s, r, f2), &mut todo);
                b.add_partial(here, Some(a), &free_but_positive(kk, c), dst, &unit(kk, c, -1));
            }
        }
        if r + 1 < slots[s].len() {
            let dst = node(&mut b, &mut ids, (s, r + 1, flags.clone()), &mut todo);
            b.add_partial(here, None, &free(kk), dst, &vec![0; kk]);
        }
        if s + 1 < slots.len() {
            let dst = node(&mut b, &mut ids, (s + 1, 0, flags.clone()), &mut todo);
            b.add_partial(here, None, &free(kk), dst, &vec![0; kk]);
        } else {
            b.add(here, None, vec![false; kk], end, vec![0; kk]);
        }
    }
    Ok(b.build()?.trimmed())
}

// ---------------------------------------------------------------------------
// Semilinear compilers

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinearMode {
    /// Guess the vector on the counters first, then check the input.
    BdiLbd,
    /// Count the input first, then subtract the vector.
    LbiBdd,
}

impl FromStr for LinearMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bdi-lbd" => Ok(LinearMode::BdiLbd),
            "lbi-bdd" => Ok(LinearMode::LbiBdd),
            _ => Err(Error::invalid(format!("unknown mode '{s}' (expected bdi-lbd or lbi-bdd)"))),
        }
    }
}

fn check_words(dim: usize, words: &[Word]) -> Result<()> {
    if words.len() != dim {
        return Err(Error::invalid(format!("{} words given for dimension {dim}", words.len())));
    }
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if words.iter().any(|w| w.is_empty()) {
        return Err(Error::invalid("words must be non-empty"));
    }
    Ok(())
}

/// Reads `w` from `from` to `to`; the first step carries `guard` and
/// `delta`, the rest carry `rest`.
fn read_chain(
    b: &mut MachineBuilder,
    from: usize,
    to: usize,
    w: &[usize],
    first: (&[Option<bool>], &[i8]),
    rest: &[Option<bool>],
    hint: &str,
) {
    let k = b.k();
    let mut p = from;
    for (i, a) in w.iter().enumerate() {
        let q = if i + 1 == w.len() { to } else { b.fresh_state(hint) };
        if i == 0 {
            b.add_partial(p, Some(*a), first.0, q, first.1);
        } else {
            b.add_partial(p, Some(*a), rest, q, &vec![0; k]);
        }
        p = q;
    }
}

/// λ-steps from `from` to `to` applying `delta` once per listed counter.
fn lambda_chain(b: &mut MachineBuilder, from: usize, to: usize, steps: &[(usize, i8)], hint: &str) {
    let k = b.k();
    if steps.is_empty() {
        b.add_partial(from, None, &free(k), to, &vec![0; k]);
        return;
    }
    let mut p = from;
    for (n, (i, d)) in steps.iter().enumerate() {
        let q = if n + 1 == steps.len() { to } else { b.fresh_state(hint) };
        let g = if *d < 0 { free_but_positive(k, *i) } else { free(k) };
        b.add_partial(p, None, &g, q, &unit(k, *i, *d));
        p = q;
    }
}

fn vector_steps(v: &[u64], d: i8) -> Vec<(usize, i8)> {
    v.iter().enumerate().flat_map(|(i, n)| std::iter::repeat((i, d)).take(*n as usize)).collect()
}

/// Machine accepting `{w_1^{i_1} ⋯ w_k^{i_k} : (i_1..i_k) ∈ q}`.
pub fn compile_linear_set(q: &LinearSet, words: &[Word], mode: LinearMode) -> Result<Machine> {
    let k = q.dim();
    check_words(k, words)?;
    if q.periods.iter().any(|p| p.len() != k) {
        return Err(Error::invalid("period dimension differs from constant"));
    }
    let mut b = MachineBuilder::new(k);
    let enc: Vec<Vec<usize>> = words.iter().map(|w| w.iter().map(|s| b.symbol(s)).collect()).collect();
    let periods: Vec<&Vec<u64>> = q.periods.iter().filter(|p| p.iter().any(|x| *x > 0)).collect();
    let zero = vec![0i8; k];
    match mode {
        LinearMode::BdiLbd => {
            let start = b.state("load");
            let hub = b.state("hub");
            b.set_initial(start);
            lambda_chain(&mut b, start, hub, &vector_steps(&q.constant, 1), "load");
            for p in &periods {
                lambda_chain(&mut b, hub, hub, &vector_steps(p, 1), "period");
            }
            let v: Vec<usize> = (0..=k).map(|i| b.state(&format!("check{}", i + 1))).collect();
            b.add_partial(hub, None, &free(k), v[0], &zero);
            b.add_final(v[k]);
            for i in 0..k {
                let mut rest = free(k);
                rest.iter_mut().take(i).for_each(|g| *g = Some(false));
                let mut first = rest.clone();
                first[i] = Some(true);
                read_chain(&mut b, v[i], v[i], &enc[i], (&first, &unit(k, i, -1)), &rest, "check");
                let mut done = rest.clone();
                done[i] = Some(false);
                b.add_partial(v[i], None, &done, v[i + 1], &zero);
            }
        }
        LinearMode::LbiBdd => {
            let r: Vec<usize> = (0..=k).map(|i| b.state(&format!("read{}", i + 1))).collect();
            b.set_initial(r[0]);
            for i in 0..k {
                let mut g = free(k);
                g.iter_mut().skip(i + 1).for_each(|x| *x = Some(false));
                read_chain(&mut b, r[i], r[i], &enc[i], (&g, &unit(k, i, 1)), &g, "read");
                b.add_partial(r[i], None, &g, r[i + 1], &zero);
            }
            let hub = b.state("hub");
            lambda_chain(&mut b, r[k], hub, &vector_steps(&q.constant, -1), "const");
            for p in &periods {
                lambda_chain(&mut b, hub, hub, &vector_steps(p, -1), "period");
            }
            let fin = b.state("accept");
            b.add(hub, None, vec![false; k], fin, zero);
            b.add_final(fin);
        }
    }
    Ok(b.build()?.trimmed())
}

/// Machine accepting `{a_1^{i_1} ⋯ a_m^{i_m} : (i_1..i_m) ∈ s}` for a
/// 2-positive `s`. Each block `a_j^*` is split into a constant part and one
/// part per period; a period with two nonzero coordinates gets a counter
/// that is filled in its first block and drained in its second.
pub fn compile_two_positive(s: &SemilinearSet, letters: &[String]) -> Result<Machine> {
    s.check()?;
    if !is_m_positive(s, 2) {
        return Err(Error::invalid("semilinear set is not 2-positive"));
    }
    if letters.len() != s.dim || s.dim == 0 {
        return Err(Error::invalid(format!("{} letters given for dimension {}", letters.len(), s.dim)));
    }
    if letters.iter().collect::<BTreeSet<_>>().len() != letters.len() {
        return Err(Error::invalid("letters must be distinct"));
    }
    let mut parts = s.components.iter().map(|c| two_positive_component(c, letters));
    let Some(first) = parts.next() else {
        let mut b = MachineBuilder::new(1);
        b.symbols(letters);
        b.state("q0");
        return b.build();
    };
    let mut acc = first?;
    for m in parts {
        acc = union(&acc, &m?)?;
    }
    Ok(acc)
}

fn two_positive_component(c: &LinearSet, letters: &[String]) -> Result<Machine> {
    let m = letters.len();
    let periods: Vec<&Vec<u64>> = c.periods.iter().filter(|p| p.iter().any(|x| *x > 0)).collect();
    let mut counter = vec![None; periods.len()];
    let mut kk = 0;
    for (i, p) in periods.iter().enumerate() {
        if p.iter().filter(|x| **x > 0).count() == 2 {
            counter[i] = Some(kk);
            kk += 1;
        }
    }
    let k = kk.max(1);
    let mut b = MachineBuilder::new(k);
    b.symbols(letters);
    let zero = vec![0i8; k];
    let entry: Vec<usize> = (0..=m).map(|j| b.state(&format!("block{}", j + 1))).collect();
    b.set_initial(entry[0]);
    for j in 0..m {
        let a = j;
        let mut cur = b.fresh_state(&format!("b{}_const", j + 1));
        let word = vec![a; c.constant[j] as usize];
        if word.is_empty() {
            b.add_partial(entry[j], None, &free(k), cur, &zero);
        } else {
            read_chain(&mut b, entry[j], cur, &word, (&free(k), &zero), &free(k), "const");
        }
        for (i, p) in periods.iter().enumerate() {
            if p[j] == 0 {
                continue;
            }
            let next = b.fresh_state(&format!("b{}_p{}", j + 1, i + 1));
            b.add_partial(cur, None, &free(k), next, &zero);
            cur = next;
            let word = vec![a; p[j] as usize];
            match counter[i] {
                None => read_chain(&mut b, cur, cur, &word, (&free(k), &zero), &free(k), "per"),
                Some(x) => {
                    let opens = p.iter().position(|v| *v > 0) == Some(j);
                    if opens {
                        // Fill on the last letter of each repetition.
                        let mut w = word.clone();
                        let last = w.pop().expect("nonzero coordinate");
                        let mid = if w.is_empty() { cur } else { b.fresh_state("per") };
                        if !w.is_empty() {
                            read_chain(&mut b, cur, mid, &w, (&free(k), &zero), &free(k), "per");
                        }
                        b.add_partial(mid, Some(last), &free(k), cur, &unit(k, x, 1));
                    } else {
                        let first = free_but_positive(k, x);
                        read_chain(&mut b, cur, cur, &word, (&first, &unit(k, x, -1)), &free(k), "per");
                    }
                }
            }
        }
        b.add_partial(cur, None, &free(k), entry[j + 1], &zero);
    }
    let fin = b.state("accept");
    b.add(entry[m], None, vec![false; k], fin, zero);
    b.add_final(fin);
    Ok(b.build()?.trimmed())
}

// ---------------------------------------------------------------------------
// Short-word bounded form

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

fn compositions(items: &[usize]) -> Vec<Vec<Vec<usize>>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 1..=items.len() {
        for mut rest in compositions(&items[first..]) {
            rest.insert(0, items[..first].to_vec());
            out.push(rest);
        }
    }
    out
}

/// Machine over Δ_k accepting the generator language of `BDiLBd` whose
/// counter behaviour only uses starred words of length at most two.
///
/// For each guessed block structure `w_1 ⋯ w_m`, counter `j` counts the
/// repetitions of `w_j`. When `D_l` is read and `C_l` lies in a block with
/// letters still to check, every decrement of the block's counter is paired
/// with an increment of a fresh counter, giving `(D_c C_n)^*`.
pub fn sbd_form(k: usize) -> Result<Machine> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let mut b = MachineBuilder::new(k);
    let alpha = delta_alphabet(k);
    b.symbols(&alpha);
    let c_sym = |i: usize| 2 * i;
    let d_sym = |i: usize| 2 * i + 1;
    let start = b.state("start");
    b.set_initial(start);
    let fin = b.state("accept");
    b.add_final(fin);
    let zero = vec![0i8; k];
    let mut structures = Vec::new();
    for p in permutations(k) {
        structures.extend(compositions(&p));
    }
    for (sx, blocks) in structures.iter().enumerate() {
        let tag = format!("g{}", sx + 1);
        let enter: Vec<usize> = (0..blocks.len()).map(|j| b.state(&format!("{tag}_w{}", j + 1))).collect();
        let again: Vec<usize> = (0..blocks.len()).map(|j| b.state(&format!("{tag}_w{}r", j + 1))).collect();
        b.add(start, None, vec![false; k], enter[0], zero.clone());
        for (j, w) in blocks.iter().enumerate() {
            let word: Vec<usize> = w.iter().map(|i| c_sym(*i)).collect();
            for from in [enter[j], again[j]] {
                let mut g = free(k);
                g.iter_mut().skip(j + 1).for_each(|x| *x = Some(false));
                let mut p = from;
                for (n, a) in word.iter().enumerate() {
                    if n + 1 == word.len() {
                        b.add_partial(p, Some(*a), &g, again[j], &unit(k, j, 1));
                    } else {
                        let q = b.fresh_state(&format!("{tag}_w{}", j + 1));
                        b.add_partial(p, Some(*a), &g, q, &zero);
                        p = q;
                    }
                }
            }
            if j + 1 < blocks.len() {
                b.add_partial(again[j], None, &free(k), enter[j + 1], &zero);
            }
        }
        // Verification of D_1 .. D_k.
        let mut holder: Vec<usize> = (0..blocks.len()).collect();
        let mut fresh = blocks.len();
        let mut cur = again[blocks.len() - 1];
        for l in 0..k {
            let j = blocks.iter().position(|w| w.contains(&l)).expect("letter in a block");
            let c = holder[j];
            let copies = blocks[j].iter().any(|x| *x > l);
            let entry = b.fresh_state(&format!("{tag}_d{}", l + 1));
            b.add_partial(cur, None, &free(k), entry, &zero);
            let tail = b.fresh_state(&format!("{tag}_d{}t", l + 1));
            let dec = free_but_positive(k, c);
            if copies {
                let n = fresh;
                fresh += 1;
                let mid = b.fresh_state(&format!("{tag}_d{}m", l + 1));
                b.add_partial(entry, Some(d_sym(l)), &dec, mid, &unit(k, c, -1));
                b.add_partial(tail, Some(d_sym(l)), &dec, mid, &unit(k, c, -1));
                b.add_partial(mid, None, &free(k), tail, &unit(k, n, 1));
                holder[j] = n;
            } else {
                b.add_partial(entry, Some(d_sym(l)), &dec, tail, &unit(k, c, -1));
                b.add_partial(tail, Some(d_sym(l)), &dec, tail, &unit(k, c, -1));
            }
            let mut done = free(k);
            done[c] = Some(false);
            cur = b.fresh_state(&format!("{tag}_d{}e", l + 1));
            b.add_partial(tail, None, &done, cur, &zero);
        }
        b.add(cur, None, vec![false; k], fin, zero.clone());
    }
    Ok(b.build()?.trimmed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::parse_machine;
    use crate::oracle::{bounded_equiv, enumerate_language};
    use crate::machine::SimCaps;

    const ANBN: &str = "ncm\ncounters 1\nalphabet a b\nstates q0 q1 f\ninitial q0\nfinal q0 f\n\
        trans t1 q0 a * q0 1\ntrans t2 q0 b p q1 -1\ntrans t3 q1 b p q1 -1\ntrans t4 q1 @ z f 0\n";

    fn w(s: &str) -> Word {
        s.chars().map(|c| c.to_string()).collect()
    }

    fn lang(m: &Machine, n: usize) -> Vec<Word> {
        enumerate_language(m, &SimCaps::for_machine(m, n)).unwrap().words
    }

    #[test]
    fn greedy_split_traces() {
        assert_eq!(greedy_split(&[3, 2], &[4, 1]).unwrap().entries, vec![vec![3, 0], vec![1, 1]]);
        assert_eq!(greedy_split(&[2, 2], &[2, 2]).unwrap().entries, vec![vec![2, 0], vec![0, 2]]);
        assert_eq!(greedy_split(&[5], &[5]).unwrap().entries, vec![vec![5]]);
        assert!(greedy_split(&[1], &[2]).is_err());
    }

    #[test]
    fn hom_and_inverse() {
        let m = parse_machine(ANBN).unwrap();
        let h = SymbolMap::new().with("a", &["c"]).with::<&str>("b", &[]);
        let img = homomorphism_image(&m, &h).unwrap();
        assert_eq!(lang(&img, 4), vec![vec![], w("c"), w("cc"), w("ccc"), w("cccc")]);
        let inv = inverse_homomorphism(&m, &SymbolMap::new().with("c", &["a", "b"])).unwrap();
        let l = lang(&inv, 3);
        assert!(l.contains(&w("c")) && !l.contains(&w("cc")));
    }

    #[test]
    fn reversal_of_anbn() {
        let m = parse_machine(ANBN).unwrap();
        let r = reversal(&m).unwrap();
        assert_eq!(lang(&r, 6), vec![vec![], w("ba"), w("bbaa"), w("bbbaaa")]);
    }

    #[test]
    fn trio_round_trip_on_anbn() {
        let m = parse_machine(ANBN).unwrap();
        let d = trio_decomposition(&m, None).unwrap();
        let back = d.reconstruct(&Budget::default()).unwrap();
        assert!(bounded_equiv(&m, &back, 6).unwrap().equal());
    }

    #[test]
    fn linear_set_modes_agree() {
        let q = LinearSet { constant: vec![1, 1], periods: vec![vec![1, 1]] };
        let words = vec![w("a"), w("b")];
        for mode in [LinearMode::BdiLbd, LinearMode::LbiBdd] {
            let m = compile_linear_set(&q, &words, mode).unwrap();
            assert_eq!(lang(&m, 6), vec![w("ab"), w("aabb"), w("aaabbb")]);
        }
    }

    #[test]
    fn sbd_small() {
        let m = sbd_form(1).unwrap();
        assert_eq!(lang(&m, 4).len(), 2);
        let m = sbd_form(2).unwrap();
        let l = lang(&m, 6);
        let parse = |s: &str| s.split_whitespace().map(String::from).collect::<Word>();
        assert!(l.contains(&parse("C1 C2 D1 D2")));
        assert!(!l.contains(&parse("C1 C2 D1 D2 D2")));
        assert!(l.contains(&parse("C1 C2 C2 D1 D2 D2")));
    }
}
