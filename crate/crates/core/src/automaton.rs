//! Finite automata over named alphabets: ε-NFAs, complete DFAs, subset
//! construction, complement, products and minimization.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::budget::Budget;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Nfa {
    pub alphabet: Vec<String>,
    /// Per state: `(symbol or ε, target)`.
    pub trans: Vec<Vec<(Option<usize>, usize)>>,
    pub initial: usize,
    pub finals: Vec<bool>,
}

impl Nfa {
    pub fn new(alphabet: Vec<String>) -> Self {
        Nfa { alphabet, trans: vec![Vec::new()], initial: 0, finals: vec![false] }
    }

    pub fn num_states(&self) -> usize {
        self.trans.len()
    }

    pub fn add_state(&mut self) -> usize {
        self.trans.push(Vec::new());
        self.finals.push(false);
        self.trans.len() - 1
    }

    pub fn add_edge(&mut self, p: usize, a: Option<usize>, q: usize) {
        if !self.trans[p].contains(&(a, q)) {
            self.trans[p].push((a, q));
        }
    }

    pub fn symbol(&self, s: &str) -> Option<usize> {
        self.alphabet.iter().position(|a| a == s)
    }

    pub fn eps_closure(&self, set: &mut BTreeSet<usize>) {
        let mut stack: Vec<usize> = set.iter().copied().collect();
        while let Some(p) = stack.pop() {
            for &(a, q) in &self.trans[p] {
                if a.is_none() && set.insert(q) {
                    stack.push(q);
                }
            }
        }
    }

    pub fn step(&self, set: &BTreeSet<usize>, a: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for &p in set {
            for &(b, q) in &self.trans[p] {
                if b == Some(a) {
                    out.insert(q);
                }
            }
        }
        self.eps_closure(&mut out);
        out
    }

    pub fn start_set(&self) -> BTreeSet<usize> {
        let mut s = BTreeSet::from([self.initial]);
        self.eps_closure(&mut s);
        s
    }

    pub fn accepts(&self, w: &[usize]) -> bool {
        let mut cur = self.start_set();
        for &a in w {
            cur = self.step(&cur, a);
            if cur.is_empty() {
                return false;
            }
        }
        cur.iter().any(|q| self.finals[*q])
    }

    /// Accepts a word given by symbol names; unknown names reject.
    pub fn accepts_word(&self, w: &[String]) -> bool {
        let mut enc = Vec::with_capacity(w.len());
        for s in w {
            match self.symbol(s) {
                Some(a) => enc.push(a),
                None => return false,
            }
        }
        self.accepts(&enc)
    }

    pub fn determinize(&self) -> Result<Dfa> {
        self.determinize_with(&Budget::default())
    }

    /// Subset construction; every created DFA state is charged to `budget`.
    pub fn determinize_with(&self, budget: &Budget) -> Result<Dfa> {
        let n = self.alphabet.len();
        let start = self.start_set();
        let mut index: HashMap<BTreeSet<usize>, usize> = HashMap::new();
        let mut sets = vec![start.clone()];
        index.insert(start, 0);
        let mut delta: Vec<Vec<usize>> = Vec::new();
        let mut i = 0;
        while i < sets.len() {
            budget.charge("dfa states", 1)?;
            let mut row = Vec::with_capacity(n);
            for a in 0..n {
                let next = self.step(&sets[i], a);
                let id = match index.get(&next) {
                    Some(id) => *id,
                    None => {
                        sets.push(next.clone());
                        index.insert(next, sets.len() - 1);
                        sets.len() - 1
                    }
                };
                row.push(id);
            }
            delta.push(row);
            i += 1;
        }
        let finals = sets.iter().map(|s| s.iter().any(|q| self.finals[*q])).collect();
        Ok(Dfa { alphabet: self.alphabet.clone(), delta, initial: 0, finals })
    }

    /// Automaton for the reversed language.
    pub fn reverse(&self) -> Nfa {
        let mut r = Nfa::new(self.alphabet.clone());
        r.trans = vec![Vec::new(); self.num_states() + 1];
        r.finals = vec![false; self.num_states() + 1];
        let start = self.num_states();
        r.initial = start;
        for p in 0..self.num_states() {
            for &(a, q) in &self.trans[p] {
                r.trans[q].push((a, p));
            }
            if self.finals[p] {
                r.trans[start].push((None, p));
            }
        }
        r.finals[self.initial] = true;
        r
    }

    /// Equivalent automaton without ε-edges, on the same state set.
    pub fn remove_eps(&self) -> Nfa {
        let n = self.num_states();
        let mut out = Nfa::new(self.alphabet.clone());
        out.trans = vec![Vec::new(); n];
        out.finals = vec![false; n];
        out.initial = self.initial;
        for p in 0..n {
            let mut cl = BTreeSet::from([p]);
            self.eps_closure(&mut cl);
            out.finals[p] = cl.iter().any(|q| self.finals[*q]);
            for &r in &cl {
                for &(a, q) in &self.trans[r] {
                    if let Some(a) = a {
                        if !out.trans[p].contains(&(Some(a), q)) {
                            out.trans[p].push((Some(a), q));
                        }
                    }
                }
            }
        }
        out
    }

    /// Shuffle product of two automata over the same alphabet.
    pub fn shuffle(&self, other: &Nfa) -> Nfa {
        let a = self.remove_eps();
        let b = other.remove_eps();
        let nb = b.num_states();
        let id = |p: usize, q: usize| p * nb + q;
        let mut out = Nfa::new(self.alphabet.clone());
        out.trans = vec![Vec::new(); a.num_states() * nb];
        out.finals = vec![false; a.num_states() * nb];
        out.initial = id(a.initial, b.initial);
        for p in 0..a.num_states() {
            for q in 0..nb {
                out.finals[id(p, q)] = a.finals[p] && b.finals[q];
                for &(s, p2) in &a.trans[p] {
                    out.trans[id(p, q)].push((s, id(p2, q)));
                }
                for &(s, q2) in &b.trans[q] {
                    out.trans[id(p, q)].push((s, id(p, q2)));
                }
            }
        }
        out
    }

    /// Re-expresses the automaton over a larger alphabet containing this one.
    pub fn over_alphabet(&self, alphabet: &[String]) -> Result<Nfa> {
        let map: Vec<usize> = self
            .alphabet
            .iter()
            .map(|s| {
                alphabet
                    .iter()
                    .position(|a| a == s)
                    .ok_or_else(|| Error::invalid(format!("symbol {s} missing from target alphabet")))
            })
            .collect::<Result<_>>()?;
        let mut out = self.clone();
        out.alphabet = alphabet.to_vec();
        for row in &mut out.trans {
            for e in row.iter_mut() {
                e.0 = e.0.map(|a| map[a]);
            }
        }
        Ok(out)
    }
}

/// Complete deterministic automaton.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dfa {
    pub alphabet: Vec<String>,
    pub delta: Vec<Vec<usize>>,
    pub initial: usize,
    pub finals: Vec<bool>,
}

impl Dfa {
    /// Δ* over the given alphabet.
    pub fn universal(alphabet: Vec<String>) -> Dfa {
        let n = alphabet.len();
        Dfa { alphabet, delta: vec![vec![0; n]], initial: 0, finals: vec![true] }
    }

    pub fn empty(alphabet: Vec<String>) -> Dfa {
        let mut d = Dfa::universal(alphabet);
        d.finals[0] = false;
        d
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn symbol(&self, s: &str) -> Option<usize> {
        self.alphabet.iter().position(|a| a == s)
    }

    pub fn run(&self, w: &[usize]) -> usize {
        w.iter().fold(self.initial, |q, a| self.delta[q][*a])
    }

    pub fn accepts(&self, w: &[usize]) -> bool {
        self.finals[self.run(w)]
    }

    pub fn accepts_word(&self, w: &[String]) -> bool {
        let mut q = self.initial;
        for s in w {
            match self.symbol(s) {
                Some(a) => q = self.delta[q][a],
                None => return false,
            }
        }
        self.finals[q]
    }

    pub fn complement(&self) -> Dfa {
        let mut d = self.clone();
        d.finals.iter_mut().for_each(|f| *f = !*f);
        d
    }

    /// Synchronous product; `both` selects intersection, otherwise union.
    pub fn product(&self, other: &Dfa, both: bool) -> Result<Dfa> {
        if self.alphabet != other.alphabet {
            return Err(Error::invalid("product of automata over different alphabets"));
        }
        let n = self.alphabet.len();
        let mut index = HashMap::new();
        let mut pairs = vec![(self.initial, other.initial)];
        index.insert(pairs[0], 0usize);
        let mut delta = Vec::new();
        let mut i = 0;
        while i < pairs.len() {
            let (p, q) = pairs[i];
            let mut row = Vec::with_capacity(n);
            for a in 0..n {
                let t = (self.delta[p][a], other.delta[q][a]);
                let id = *index.entry(t).or_insert_with(|| {
                    pairs.push(t);
                    pairs.len() - 1
                });
                row.push(id);
            }
            delta.push(row);
            i += 1;
        }
        let finals = pairs
            .iter()
            .map(|(p, q)| if both { self.finals[*p] && other.finals[*q] } else { self.finals[*p] || other.finals[*q] })
            .collect();
        Ok(Dfa { alphabet: self.alphabet.clone(), delta, initial: 0, finals })
    }

    /// Re-expresses the automaton over `alphabet`; symbols it did not know
    /// lead to a rejecting sink.
    pub fn over_alphabet(&self, alphabet: &[String]) -> Dfa {
        let sink = self.num_states();
        let map: Vec<Option<usize>> = alphabet.iter().map(|s| self.symbol(s)).collect();
        let mut delta: Vec<Vec<usize>> = self
            .delta
            .iter()
            .map(|row| map.iter().map(|m| m.map_or(sink, |a| row[a])).collect())
            .collect();
        delta.push(vec![sink; alphabet.len()]);
        let mut finals = self.finals.clone();
        finals.push(false);
        Dfa { alphabet: alphabet.to_vec(), delta, initial: self.initial, finals }.minimized()
    }

    /// States from which a final state is reachable.
    pub fn live_states(&self) -> Vec<bool> {
        let n = self.num_states();
        let mut rev = vec![Vec::new(); n];
        for p in 0..n {
            for &q in &self.delta[p] {
                rev[q].push(p);
            }
        }
        let mut live = self.finals.clone();
        let mut stack: Vec<usize> = (0..n).filter(|q| live[*q]).collect();
        while let Some(q) = stack.pop() {
            for &p in &rev[q] {
                if !live[p] {
                    live[p] = true;
                    stack.push(p);
                }
            }
        }
        live
    }

    pub fn is_empty(&self) -> bool {
        !self.live_states()[self.initial]
    }

    /// Length-lexicographically least accepted word.
    pub fn shortest_accepted(&self) -> Option<Vec<usize>> {
        let n = self.num_states();
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[self.initial] = true;
        let mut queue = VecDeque::from([self.initial]);
        while let Some(p) = queue.pop_front() {
            if self.finals[p] {
                let mut w = Vec::new();
                let mut cur = p;
                while let Some((prev, a)) = parent[cur] {
                    w.push(a);
                    cur = prev;
                }
                w.reverse();
                return Some(w);
            }
            for (a, &q) in self.delta[p].iter().enumerate() {
                if !seen[q] {
                    seen[q] = true;
                    parent[q] = Some((p, a));
                    queue.push_back(q);
                }
            }
        }
        None
    }

    /// Whether the language is finite.
    pub fn is_finite(&self) -> bool {
        let live = self.live_states();
        let n = self.num_states();
        let mut reach = vec![false; n];
        let mut stack = vec![self.initial];
        reach[self.initial] = true;
        while let Some(p) = stack.pop() {
            for &q in &self.delta[p] {
                if !reach[q] {
                    reach[q] = true;
                    stack.push(q);
                }
            }
        }
        let useful: Vec<bool> = (0..n).map(|q| live[q] && reach[q]).collect();
        // Cycle detection restricted to useful states.
        let mut color = vec![0u8; n];
        for s in 0..n {
            if !useful[s] || color[s] != 0 {
                continue;
            }
            let mut stack = vec![(s, 0usize)];
            color[s] = 1;
            while let Some((p, i)) = stack.pop() {
                if i < self.delta[p].len() {
                    stack.push((p, i + 1));
                    let q = self.delta[p][i];
                    if !useful[q] {
                        continue;
                    }
                    if color[q] == 1 {
                        return false;
                    }
                    if color[q] == 0 {
                        color[q] = 1;
                        stack.push((q, 0));
                    }
                } else {
                    color[p] = 2;
                }
            }
        }
        true
    }

    /// Minimal equivalent automaton restricted to reachable states.
    pub fn minimized(&self) -> Dfa {
        let n = self.num_states();
        let sigma = self.alphabet.len();
        let mut reach = vec![false; n];
        let mut order = vec![self.initial];
        reach[self.initial] = true;
        let mut i = 0;
        while i < order.len() {
            for &q in &self.delta[order[i]] {
                if !reach[q] {
                    reach[q] = true;
                    order.push(q);
                }
            }
            i += 1;
        }
        let mut class: Vec<usize> = vec![0; n];
        for &q in &order {
            class[q] = self.finals[q] as usize;
        }
        let mut count = 0;
        loop {
            let mut sig: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
            let mut next = vec![0; n];
            for &q in &order {
                let key = (class[q], (0..sigma).map(|a| class[self.delta[q][a]]).collect::<Vec<_>>());
                let len = sig.len();
                next[q] = *sig.entry(key).or_insert(len);
            }
            let new_count = sig.len();
            class = next;
            if new_count == count {
                break;
            }
            count = new_count;
        }
        let mut delta = vec![vec![0; sigma]; count];
        let mut finals = vec![false; count];
        for &q in &order {
            for a in 0..sigma {
                delta[class[q]][a] = class[self.delta[q][a]];
            }
            finals[class[q]] = self.finals[q];
        }
        Dfa { alphabet: self.alphabet.clone(), delta, initial: class[self.initial], finals }
    }

    pub fn to_nfa(&self) -> Nfa {
        let mut n = Nfa::new(self.alphabet.clone());
        n.trans = self
            .delta
            .iter()
            .map(|row| row.iter().enumerate().map(|(a, q)| (Some(a), *q)).collect())
            .collect();
        n.finals = self.finals.clone();
        n.initial = self.initial;
        n
    }

    /// `L(self) ⊆ L(other)`; on failure the least counterexample.
    pub fn included_in(&self, other: &Dfa) -> Result<std::result::Result<(), Vec<usize>>> {
        let diff = self.product(&other.complement(), true)?;
        Ok(match diff.shortest_accepted() {
            None => Ok(()),
            Some(w) => Err(w),
        })
    }
}

/// Nfa accepting exactly one word.
pub fn word_nfa(alphabet: Vec<String>, w: &[usize]) -> Nfa {
    let mut n = Nfa::new(alphabet);
    let mut cur = 0;
    for &a in w {
        let q = n.add_state();
        n.add_edge(cur, Some(a), q);
        cur = q;
    }
    n.finals[cur] = true;
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    // a*b*
    fn astar_bstar() -> Nfa {
        let mut n = Nfa::new(ab());
        let q = n.add_state();
        n.add_edge(0, Some(0), 0);
        n.add_edge(0, None, q);
        n.add_edge(q, Some(1), q);
        n.finals[q] = true;
        n
    }

    #[test]
    fn determinize_and_complement() {
        let d = astar_bstar().determinize().unwrap();
        assert!(d.accepts(&[0, 0, 1]));
        assert!(!d.accepts(&[1, 0]));
        let c = d.complement();
        assert!(c.accepts(&[1, 0]));
        assert_eq!(c.shortest_accepted(), Some(vec![1, 0]));
        assert!(!d.is_finite());
    }

    #[test]
    fn shuffle_of_letters() {
        let mut a = Nfa::new(ab());
        let q = a.add_state();
        a.add_edge(0, Some(0), q);
        a.finals[q] = true;
        let mut b = Nfa::new(ab());
        let q = b.add_state();
        b.add_edge(0, Some(1), q);
        b.finals[q] = true;
        let s = a.shuffle(&b);
        assert!(s.accepts(&[0, 1]) && s.accepts(&[1, 0]));
        assert!(!s.accepts(&[0]) && !s.accepts(&[0, 0]));
    }

    #[test]
    fn reverse_and_minimize() {
        let r = astar_bstar().reverse().determinize().unwrap().minimized();
        assert!(r.accepts(&[1, 1, 0]));
        assert!(!r.accepts(&[0, 1]));
        assert_eq!(r.num_states(), 3);
    }

    #[test]
    fn inclusion_counterexample() {
        let d = astar_bstar().determinize().unwrap();
        let u = Dfa::universal(ab());
        assert!(d.included_in(&u).unwrap().is_ok());
        assert_eq!(u.included_in(&d).unwrap(), Err(vec![1, 0]));
    }

    #[test]
    fn budget_stops_subset_construction() {
        let err = astar_bstar().determinize_with(&Budget::new(1)).unwrap_err();
        assert!(err.is_budget());
    }
}
