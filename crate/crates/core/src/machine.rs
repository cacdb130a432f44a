//! One-way k-counter machines: data model, operational semantics, static
//! well-formedness analysis, bounded simulation and run projections.
//!
//! Acceptance throughout the crate means: a final state, the whole input
//! consumed, and every counter back at zero.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

pub type Word = Vec<String>;

/// Counter instruction letter. Counter indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Instr {
    C(usize),
    D(usize),
}

impl Instr {
    pub fn counter(self) -> usize {
        match self {
            Instr::C(i) | Instr::D(i) => i,
        }
    }

    pub fn is_inc(self) -> bool {
        matches!(self, Instr::C(_))
    }

    pub fn parse(s: &str) -> Option<Instr> {
        let (head, tail) = s.split_at(s.find(|c: char| c.is_ascii_digit())?);
        if tail.is_empty() || !tail.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let n: usize = tail.parse().ok()?;
        if n == 0 {
            return None;
        }
        match head {
            "C" => Some(Instr::C(n)),
            "D" => Some(Instr::D(n)),
            _ => None,
        }
    }
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instr::C(i) => write!(f, "C{i}"),
            Instr::D(i) => write!(f, "D{i}"),
        }
    }
}

/// The instruction alphabet `C1 D1 C2 D2 ...` as symbol names.
pub fn delta_alphabet(k: usize) -> Vec<String> {
    (1..=k).flat_map(|i| [format!("C{i}"), format!("D{i}")]).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub label: String,
    pub src: usize,
    /// Index into the machine alphabet; `None` is a λ-move.
    pub input: Option<usize>,
    /// `true` means the counter must be positive, `false` that it must be zero.
    pub guard: Vec<bool>,
    pub dst: usize,
    pub delta: Vec<i8>,
}

impl Transition {
    /// The instruction performed, taken from the first changed counter.
    pub fn instr(&self) -> Option<Instr> {
        self.delta.iter().enumerate().find(|(_, d)| **d != 0).map(|(i, d)| {
            if *d > 0 {
                Instr::C(i + 1)
            } else {
                Instr::D(i + 1)
            }
        })
    }

    pub fn changed_counters(&self) -> usize {
        self.delta.iter().filter(|d| **d != 0).count()
    }

    pub fn enabled(&self, counters: &[u64]) -> bool {
        self.guard.iter().zip(counters).all(|(g, c)| *g == (*c > 0))
    }

    pub fn apply(&self, counters: &[u64]) -> Vec<u64> {
        counters
            .iter()
            .zip(&self.delta)
            .map(|(c, d)| (*c as i64 + *d as i64) as u64)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Machine {
    pub k: usize,
    pub states: Vec<String>,
    pub alphabet: Vec<String>,
    pub transitions: Vec<Transition>,
    pub initial: usize,
    pub finals: BTreeSet<usize>,
}

impl Machine {
    pub fn check_structure(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.k == 0 {
            problems.push("counter count must be at least 1".to_string());
        }
        if self.initial >= self.states.len() {
            problems.push(format!("initial state index {} out of range", self.initial));
        }
        for f in &self.finals {
            if *f >= self.states.len() {
                problems.push(format!("final state index {f} out of range"));
            }
        }
        let mut seen = HashSet::new();
        for s in &self.states {
            if !seen.insert(s) {
                problems.push(format!("duplicate state name {s}"));
            }
        }
        let mut seen = HashSet::new();
        for s in &self.alphabet {
            if !seen.insert(s) {
                problems.push(format!("duplicate symbol {s}"));
            }
        }
        let mut labels = HashSet::new();
        for t in &self.transitions {
            if !labels.insert(&t.label) {
                problems.push(format!("duplicate label {}", t.label));
            }
            if t.src >= self.states.len() || t.dst >= self.states.len() {
                problems.push(format!("transition {} has a dangling endpoint", t.label));
            }
            if let Some(a) = t.input {
                if a >= self.alphabet.len() {
                    problems.push(format!("transition {} reads an unknown symbol", t.label));
                }
            }
            if t.guard.len() != self.k || t.delta.len() != self.k {
                problems.push(format!("transition {} has guard or delta of wrong length", t.label));
                continue;
            }
            for i in 0..self.k {
                if !(-1..=1).contains(&t.delta[i]) {
                    problems.push(format!("transition {} has delta outside -1..1", t.label));
                }
                if !t.guard[i] && t.delta[i] < 0 {
                    problems.push(format!(
                        "transition {} decrements counter {} under a zero guard",
                        t.label,
                        i + 1
                    ));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Structure(problems.join("; ")))
        }
    }

    pub fn symbol_index(&self, s: &str) -> Option<usize> {
        self.alphabet.iter().position(|a| a == s)
    }

    pub fn state_index(&self, s: &str) -> Option<usize> {
        self.states.iter().position(|a| a == s)
    }

    pub fn transition_index(&self, label: &str) -> Option<usize> {
        self.transitions.iter().position(|t| t.label == label)
    }

    pub fn encode_word(&self, w: &[String]) -> Result<Vec<usize>> {
        w.iter()
            .map(|s| {
                self.symbol_index(s)
                    .ok_or_else(|| Error::invalid(format!("symbol {s} is not in the machine alphabet")))
            })
            .collect()
    }

    pub fn decode_word(&self, w: &[usize]) -> Word {
        w.iter().map(|a| self.alphabet[*a].clone()).collect()
    }

    pub fn is_accepting(&self, state: usize, counters: &[u64]) -> bool {
        self.finals.contains(&state) && counters.iter().all(|c| *c == 0)
    }

    pub fn outgoing(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.states.len()];
        for (i, t) in self.transitions.iter().enumerate() {
            out[t.src].push(i);
        }
        out
    }

    /// States from which some final state is reachable in the transition graph.
    pub fn coreachable(&self) -> Vec<bool> {
        let mut rev = vec![Vec::new(); self.states.len()];
        for t in &self.transitions {
            rev[t.dst].push(t.src);
        }
        let mut mark = vec![false; self.states.len()];
        let mut stack: Vec<usize> = self.finals.iter().copied().collect();
        for f in &stack {
            mark[*f] = true;
        }
        while let Some(q) = stack.pop() {
            for p in &rev[q] {
                if !mark[*p] {
                    mark[*p] = true;
                    stack.push(*p);
                }
            }
        }
        mark
    }

    /// Counters that are never decremented by a λ-move; every unit stored in
    /// them costs one input symbol to remove.
    pub(crate) fn input_paid_counters(&self) -> Vec<bool> {
        let mut paid = vec![true; self.k];
        if self.transitions.iter().any(|t| t.changed_counters() > 1) {
            return vec![false; self.k];
        }
        for t in &self.transitions {
            if t.input.is_none() {
                for i in 0..self.k {
                    if t.delta[i] < 0 {
                        paid[i] = false;
                    }
                }
            }
        }
        paid
    }

    /// Replays a transition sequence from the initial configuration.
    pub fn replay(&self, ts: &[usize]) -> Option<Run> {
        let mut cfg = Config { state: self.initial, position: 0, counters: vec![0; self.k] };
        let mut configs = vec![cfg.clone()];
        let mut input = Vec::new();
        for &ti in ts {
            let t = self.transitions.get(ti)?;
            if t.src != cfg.state || !t.enabled(&cfg.counters) {
                return None;
            }
            let counters = t.apply(&cfg.counters);
            let mut position = cfg.position;
            if let Some(a) = t.input {
                input.push(self.alphabet[a].clone());
                position += 1;
            }
            cfg = Config { state: t.dst, position, counters };
            configs.push(cfg.clone());
        }
        Some(Run {
            input,
            configs,
            transitions: ts.to_vec(),
            labels: ts.iter().map(|t| self.transitions[*t].label.clone()).collect(),
        })
    }

    /// Checks that `run` is an accepting run of this machine.
    pub fn check_run(&self, run: &Run) -> std::result::Result<(), String> {
        if run.configs.len() != run.transitions.len() + 1 || run.labels.len() != run.transitions.len() {
            return Err("run has inconsistent lengths".into());
        }
        let first = &run.configs[0];
        if first.state != self.initial || first.position != 0 || first.counters.iter().any(|c| *c != 0) {
            return Err("run does not start in the initial configuration".into());
        }
        let word = self.encode_word(&run.input).map_err(|e| e.to_string())?;
        for (i, &ti) in run.transitions.iter().enumerate() {
            let t = self.transitions.get(ti).ok_or("unknown transition")?;
            if t.label != run.labels[i] {
                return Err(format!("step {i}: label mismatch"));
            }
            let (a, b) = (&run.configs[i], &run.configs[i + 1]);
            if t.src != a.state || t.dst != b.state {
                return Err(format!("step {i}: state mismatch"));
            }
            if !t.enabled(&a.counters) {
                return Err(format!("step {i}: guard violated"));
            }
            if t.apply(&a.counters) != b.counters {
                return Err(format!("step {i}: counter update mismatch"));
            }
            match t.input {
                None if b.position != a.position => return Err(format!("step {i}: λ-move advanced input")),
                Some(s) if word.get(a.position) != Some(&s) || b.position != a.position + 1 => {
                    return Err(format!("step {i}: input symbol mismatch"))
                }
                _ => {}
            }
        }
        let last = run.configs.last().unwrap();
        if last.position != word.len() {
            return Err("run does not consume the whole input".into());
        }
        if !self.is_accepting(last.state, &last.counters) {
            return Err("run does not end in an accepting configuration".into());
        }
        Ok(())
    }

    /// Adds a fresh final state entered by a zero-testing λ-move from every
    /// old final state, so that acceptance is visibly counter-zero.
    pub fn sealed(&self) -> Machine {
        let mut b = MachineBuilder::from_machine(self);
        let acc = b.fresh_state("acc");
        let old: Vec<usize> = self.finals.iter().copied().collect();
        b.clear_finals();
        for f in old {
            b.add(f, None, vec![false; self.k], acc, vec![0; self.k]);
        }
        b.add_final(acc);
        b.build_unchecked()
    }

    /// Drops states that are unreachable from the initial state or cannot
    /// reach a final state.
    pub fn trimmed(&self) -> Machine {
        self.trimmed_with_map().0
    }

    /// Like [`Machine::trimmed`], also returning the original index of each
    /// kept transition.
    pub fn trimmed_with_map(&self) -> (Machine, Vec<usize>) {
        let n = self.states.len();
        let mut fwd = vec![false; n];
        let out = self.outgoing();
        let mut stack = vec![self.initial];
        fwd[self.initial] = true;
        while let Some(q) = stack.pop() {
            for &ti in &out[q] {
                let d = self.transitions[ti].dst;
                if !fwd[d] {
                    fwd[d] = true;
                    stack.push(d);
                }
            }
        }
        let back = self.coreachable();
        let keep: Vec<bool> = (0..n).map(|q| q == self.initial || (fwd[q] && back[q])).collect();
        let mut map = vec![usize::MAX; n];
        let mut states = Vec::new();
        for q in 0..n {
            if keep[q] {
                map[q] = states.len();
                states.push(self.states[q].clone());
            }
        }
        let kept: Vec<usize> = (0..self.transitions.len())
            .filter(|i| keep[self.transitions[*i].src] && keep[self.transitions[*i].dst])
            .collect();
        let transitions = kept
            .iter()
            .map(|i| {
                let t = &self.transitions[*i];
                Transition { src: map[t.src], dst: map[t.dst], ..t.clone() }
            })
            .collect();
        let m = Machine {
            k: self.k,
            states,
            alphabet: self.alphabet.clone(),
            transitions,
            initial: map[self.initial],
            finals: self.finals.iter().filter(|f| keep[**f]).map(|f| map[*f]).collect(),
        };
        (m, kept)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Config {
    pub state: usize,
    pub position: usize,
    pub counters: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run {
    pub input: Word,
    /// One more configuration than there are steps.
    pub configs: Vec<Config>,
    pub transitions: Vec<usize>,
    pub labels: Vec<String>,
}

impl Run {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Incremental construction of machines with interned names.
#[derive(Clone, Debug)]
pub struct MachineBuilder {
    m: Machine,
    state_ix: HashMap<String, usize>,
    sym_ix: HashMap<String, usize>,
    labels: HashSet<String>,
}

impl MachineBuilder {
    pub fn new(k: usize) -> Self {
        MachineBuilder {
            m: Machine {
                k,
                states: Vec::new(),
                alphabet: Vec::new(),
                transitions: Vec::new(),
                initial: 0,
                finals: BTreeSet::new(),
            },
            state_ix: HashMap::new(),
            sym_ix: HashMap::new(),
            labels: HashSet::new(),
        }
    }

    pub fn from_machine(m: &Machine) -> Self {
        MachineBuilder {
            state_ix: m.states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect(),
            sym_ix: m.alphabet.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect(),
            labels: m.transitions.iter().map(|t| t.label.clone()).collect(),
            m: m.clone(),
        }
    }

    pub fn k(&self) -> usize {
        self.m.k
    }

    pub fn symbol(&mut self, s: &str) -> usize {
        if let Some(i) = self.sym_ix.get(s) {
            return *i;
        }
        let i = self.m.alphabet.len();
        self.m.alphabet.push(s.to_string());
        self.sym_ix.insert(s.to_string(), i);
        i
    }

    pub fn symbols<S: AsRef<str>>(&mut self, syms: &[S]) {
        for s in syms {
            self.symbol(s.as_ref());
        }
    }

    /// Interns a state by name.
    pub fn state(&mut self, name: &str) -> usize {
        if let Some(i) = self.state_ix.get(name) {
            return *i;
        }
        let i = self.m.states.len();
        self.m.states.push(name.to_string());
        self.state_ix.insert(name.to_string(), i);
        i
    }

    /// Creates a state whose name does not collide with existing ones.
    pub fn fresh_state(&mut self, hint: &str) -> usize {
        if !self.state_ix.contains_key(hint) {
            return self.state(hint);
        }
        let mut n = 1;
        loop {
            let name = format!("{hint}_{n}");
            if !self.state_ix.contains_key(&name) {
                return self.state(&name);
            }
            n += 1;
        }
    }

    pub fn num_states(&self) -> usize {
        self.m.states.len()
    }

    pub fn set_initial(&mut self, q: usize) {
        self.m.initial = q;
    }

    pub fn add_final(&mut self, q: usize) {
        self.m.finals.insert(q);
    }

    pub fn clear_finals(&mut self) {
        self.m.finals.clear();
    }

    fn fresh_label(&mut self) -> String {
        let mut n = self.m.transitions.len();
        loop {
            let l = format!("t{n}");
            if !self.labels.contains(&l) {
                return l;
            }
            n += 1;
        }
    }

    pub fn add(&mut self, src: usize, input: Option<usize>, guard: Vec<bool>, dst: usize, delta: Vec<i8>) -> usize {
        let label = self.fresh_label();
        self.add_labeled(label, src, input, guard, dst, delta)
    }

    pub fn add_labeled(
        &mut self,
        label: String,
        src: usize,
        input: Option<usize>,
        guard: Vec<bool>,
        dst: usize,
        delta: Vec<i8>,
    ) -> usize {
        self.labels.insert(label.clone());
        self.m.transitions.push(Transition { label, src, input, guard, dst, delta });
        self.m.transitions.len() - 1
    }

    /// Adds one transition per completion of a partial guard (`None` entries
    /// take both values). Completions that would decrement a zero counter are
    /// skipped.
    pub fn add_partial(
        &mut self,
        src: usize,
        input: Option<usize>,
        guard: &[Option<bool>],
        dst: usize,
        delta: &[i8],
    ) -> Vec<usize> {
        let mut out = Vec::new();
        for g in expand_guard(guard) {
            if g.iter().zip(delta).any(|(g, d)| !*g && *d < 0) {
                continue;
            }
            out.push(self.add(src, input, g, dst, delta.to_vec()));
        }
        out
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.m.transitions
    }

    pub fn build(self) -> Result<Machine> {
        self.m.check_structure()?;
        Ok(self.m)
    }

    pub(crate) fn build_unchecked(self) -> Machine {
        debug_assert!(self.m.check_structure().is_ok(), "{:?}", self.m.check_structure());
        self.m
    }
}

/// All total guards compatible with a partial one.
pub fn expand_guard(partial: &[Option<bool>]) -> Vec<Vec<bool>> {
    let mut out = vec![Vec::with_capacity(partial.len())];
    for g in partial {
        match g {
            Some(v) => out.iter_mut().for_each(|x| x.push(*v)),
            None => {
                let mut next = Vec::with_capacity(out.len() * 2);
                for x in out {
                    let mut a = x.clone();
                    a.push(false);
                    let mut b = x;
                    b.push(true);
                    next.push(a);
                    next.push(b);
                }
                out = next;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Well-formedness

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationKind {
    MultiCounterChange,
    ReversalViolation,
    NonzeroAcceptPossible,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::MultiCounterChange => "multi-counter-change",
            ViolationKind::ReversalViolation => "reversal-violation",
            ViolationKind::NonzeroAcceptPossible => "nonzero-accept-possible",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Offending transition label, or the final state name for accept violations.
    pub evidence: String,
    /// Found in the reachable part of the phase analysis.
    pub reachable: bool,
    /// Lies on a path that can still reach a final state.
    pub on_accepting_path: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WellFormedReport {
    pub is_well_formed: bool,
    pub violations: Vec<Violation>,
    pub is_deterministic: bool,
}

impl WellFormedReport {
    /// The weaker reading: only runs that can still accept are constrained.
    pub fn well_formed_on_accepting_runs(&self) -> bool {
        self.violations.iter().all(|v| {
            v.kind == ViolationKind::NonzeroAcceptPossible || !(v.reachable && v.on_accepting_path)
        })
    }
}

/// Static analysis of the one-change, one-reversal and zero-at-accept rules.
pub fn validate_well_formed(m: &Machine) -> Result<WellFormedReport> {
    m.check_structure()?;
    let mut violations = Vec::new();
    let fwd_states = reachable_states(m);
    let back = m.coreachable();
    for t in &m.transitions {
        if t.changed_counters() > 1 {
            violations.push(Violation {
                kind: ViolationKind::MultiCounterChange,
                evidence: t.label.clone(),
                reachable: fwd_states[t.src],
                on_accepting_path: back[t.dst],
            });
        }
    }

    // Reversal analysis on states x {never-decremented, decremented}^k.
    let out = m.outgoing();
    let k = m.k;
    let start = (m.initial, vec![false; k]);
    let mut seen: HashSet<(usize, Vec<bool>)> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back(start);
    let mut flagged = BTreeSet::new();
    while let Some((q, ph)) = queue.pop_front() {
        for &ti in &out[q] {
            let t = &m.transitions[ti];
            let mut next = ph.clone();
            let mut bad = false;
            for i in 0..k {
                if t.delta[i] > 0 && ph[i] {
                    bad = true;
                }
                if t.delta[i] < 0 {
                    next[i] = true;
                }
            }
            if bad {
                flagged.insert(ti);
                continue;
            }
            let key = (t.dst, next);
            if seen.insert(key.clone()) {
                queue.push_back(key);
            }
        }
    }
    for ti in flagged {
        let t = &m.transitions[ti];
        violations.push(Violation {
            kind: ViolationKind::ReversalViolation,
            evidence: t.label.clone(),
            reachable: true,
            on_accepting_path: back[t.dst],
        });
    }
    // Transitions that increment a counter which some path could have
    // decremented before, even if that path is not reachable.
    for (ti, t) in m.transitions.iter().enumerate() {
        if fwd_states[t.src] {
            continue;
        }
        let _ = ti;
        if t.delta.iter().any(|d| *d > 0) && decrements_reach(m, t) {
            violations.push(Violation {
                kind: ViolationKind::ReversalViolation,
                evidence: t.label.clone(),
                reachable: false,
                on_accepting_path: back[t.dst],
            });
        }
    }

    // Zero-at-accept analysis on the guard-consistent phase product.
    for f in nonzero_accepting_finals(m) {
        violations.push(Violation {
            kind: ViolationKind::NonzeroAcceptPossible,
            evidence: m.states[f].clone(),
            reachable: true,
            on_accepting_path: true,
        });
    }

    Ok(WellFormedReport { is_well_formed: violations.is_empty(), violations, is_deterministic: is_deterministic(m) })
}

fn reachable_states(m: &Machine) -> Vec<bool> {
    let out = m.outgoing();
    let mut mark = vec![false; m.states.len()];
    let mut stack = vec![m.initial];
    mark[m.initial] = true;
    while let Some(q) = stack.pop() {
        for &ti in &out[q] {
            let d = m.transitions[ti].dst;
            if !mark[d] {
                mark[d] = true;
                stack.push(d);
            }
        }
    }
    mark
}

/// Whether some decrement of a counter incremented by `t` can precede `t`.
fn decrements_reach(m: &Machine, t: &Transition) -> bool {
    let mut rev = vec![Vec::new(); m.states.len()];
    for (i, u) in m.transitions.iter().enumerate() {
        rev[u.dst].push(i);
    }
    let mut seen = vec![false; m.states.len()];
    let mut stack = vec![t.src];
    seen[t.src] = true;
    while let Some(q) = stack.pop() {
        for &ui in &rev[q] {
            let u = &m.transitions[ui];
            if (0..m.k).any(|i| t.delta[i] > 0 && u.delta[i] < 0) {
                return true;
            }
            if !seen[u.src] {
                seen[u.src] = true;
                stack.push(u.src);
            }
        }
    }
    false
}

/// Per-counter lifecycle used by the zero-at-accept analysis and by the
/// phase automaton of the decision procedures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Z0,
    Inc,
    Dec,
    ZF,
}

impl Phase {
    pub fn positive(self) -> bool {
        matches!(self, Phase::Inc | Phase::Dec)
    }
}

/// Successor phase vectors of `ph` under `t`; empty when `t` is not
/// consistent with `ph`.
pub(crate) fn phase_successors(t: &Transition, ph: &[Phase]) -> Vec<Vec<Phase>> {
    let k = ph.len();
    for i in 0..k {
        if t.guard[i] != ph[i].positive() {
            return Vec::new();
        }
    }
    let mut outs = vec![ph.to_vec()];
    for i in 0..k {
        match t.delta[i] {
            0 => {}
            1 => match ph[i] {
                Phase::Z0 | Phase::Inc => outs.iter_mut().for_each(|o| o[i] = Phase::Inc),
                _ => return Vec::new(),
            },
            _ => match ph[i] {
                Phase::Inc | Phase::Dec => {
                    let mut next = Vec::new();
                    for o in outs {
                        let mut a = o.clone();
                        a[i] = Phase::Dec;
                        let mut b = o;
                        b[i] = Phase::ZF;
                        next.push(a);
                        next.push(b);
                    }
                    outs = next;
                }
                _ => return Vec::new(),
            },
        }
    }
    outs
}

fn nonzero_accepting_finals(m: &Machine) -> BTreeSet<usize> {
    let out = m.outgoing();
    let start = (m.initial, vec![Phase::Z0; m.k]);
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back(start);
    let mut bad = BTreeSet::new();
    while let Some((q, ph)) = queue.pop_front() {
        if m.finals.contains(&q) && ph.iter().any(|p| p.positive()) {
            bad.insert(q);
        }
        for &ti in &out[q] {
            let t = &m.transitions[ti];
            for next in phase_successors(t, &ph) {
                let key = (t.dst, next);
                if seen.insert(key.clone()) {
                    queue.push_back(key);
                }
            }
        }
    }
    bad
}

/// For every state and guard, at most one transition is applicable on any
/// symbol once λ-moves are counted.
pub fn is_deterministic(m: &Machine) -> bool {
    let mut groups: HashMap<(usize, Vec<bool>), (usize, HashMap<usize, usize>)> = HashMap::new();
    for t in &m.transitions {
        let e = groups.entry((t.src, t.guard.clone())).or_default();
        match t.input {
            None => e.0 += 1,
            Some(a) => *e.1.entry(a).or_default() += 1,
        }
    }
    groups.values().all(|(lam, per)| *lam <= 1 && per.values().all(|c| c + lam <= 1))
}

// ---------------------------------------------------------------------------
// Bounded simulation

/// Caps for bounded exploration of configurations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimCaps {
    pub max_word_len: usize,
    pub max_counter_value: u64,
    pub max_lambda_run: u64,
    pub max_total_steps: u64,
}

impl SimCaps {
    /// Defaults: counter cap `2·len + 8`, λ-run cap `|Q|·(cap+1)^k`.
    pub fn for_machine(m: &Machine, max_word_len: usize) -> SimCaps {
        let cap = 2 * max_word_len as u64 + 8;
        let lam = (m.states.len() as u64).saturating_mul((cap + 1).saturating_pow(m.k as u32));
        SimCaps { max_word_len, max_counter_value: cap, max_lambda_run: lam, max_total_steps: 2_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunSet {
    pub runs: Vec<Run>,
    pub truncated: bool,
}

/// All accepting runs on `w` found within the caps, shortest first.
pub fn run_word(m: &Machine, w: &[String], caps: &SimCaps) -> Result<RunSet> {
    m.check_structure()?;
    let word = m.encode_word(w)?;
    let out = m.outgoing();
    let back = m.coreachable();
    let mut runs = Vec::new();
    let mut truncated = false;
    let mut steps = 0u64;
    let mut path: Vec<usize> = Vec::new();
    let start = Config { state: m.initial, position: 0, counters: vec![0; m.k] };

    struct Ctx<'a> {
        m: &'a Machine,
        word: &'a [usize],
        out: &'a [Vec<usize>],
        back: &'a [bool],
        caps: &'a SimCaps,
    }
    fn dfs(
        cx: &Ctx,
        cfg: &Config,
        lam: u64,
        path: &mut Vec<usize>,
        runs: &mut Vec<Vec<usize>>,
        steps: &mut u64,
        truncated: &mut bool,
    ) {
        if cfg.position == cx.word.len() && cx.m.is_accepting(cfg.state, &cfg.counters) {
            runs.push(path.clone());
        }
        for &ti in &cx.out[cfg.state] {
            let t = &cx.m.transitions[ti];
            if !cx.back[t.dst] || !t.enabled(&cfg.counters) {
                continue;
            }
            let (pos, lam2) = match t.input {
                None => (cfg.position, lam + 1),
                Some(a) => {
                    if cx.word.get(cfg.position) != Some(&a) {
                        continue;
                    }
                    (cfg.position + 1, 0)
                }
            };
            if lam2 > cx.caps.max_lambda_run {
                *truncated = true;
                continue;
            }
            let counters = t.apply(&cfg.counters);
            if counters.iter().any(|c| *c > cx.caps.max_counter_value) {
                *truncated = true;
                continue;
            }
            *steps += 1;
            if *steps > cx.caps.max_total_steps {
                *truncated = true;
                return;
            }
            path.push(ti);
            let next = Config { state: t.dst, position: pos, counters };
            dfs(cx, &next, lam2, path, runs, steps, truncated);
            path.pop();
        }
    }

    let cx = Ctx { m, word: &word, out: &out, back: &back, caps };
    let mut found = Vec::new();
    dfs(&cx, &start, 0, &mut path, &mut found, &mut steps, &mut truncated);
    found.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    found.dedup();
    for ts in found {
        runs.push(m.replay(&ts).expect("explored run replays"));
    }
    Ok(RunSet { runs, truncated })
}

/// Outcome of a breadth-first search for an accepting run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Search {
    Found(Vec<usize>),
    /// The whole configuration space was explored without success.
    Exhausted,
    /// Caps cut the exploration short.
    Truncated,
}

/// Shortest accepting run, either on a fixed word or on any word.
pub(crate) fn shortest_accepting(m: &Machine, word: Option<&[usize]>, counter_cap: u64, limit: usize) -> Search {
    let out = m.outgoing();
    let back = m.coreachable();
    if !back[m.initial] {
        return Search::Exhausted;
    }
    let paid = m.input_paid_counters();
    let len = word.map(|w| w.len());
    type Key = (usize, usize, Vec<u64>);
    let start: Key = (m.initial, 0, vec![0; m.k]);
    let mut parent: HashMap<Key, Option<(Key, usize)>> = HashMap::new();
    parent.insert(start.clone(), None);
    let mut queue = VecDeque::new();
    queue.push_back(start);
    let mut truncated = false;
    while let Some(key) = queue.pop_front() {
        let (q, pos, ref cs) = key;
        let done = len.map_or(true, |l| pos == l);
        if done && m.is_accepting(q, cs) {
            let mut ts = Vec::new();
            let mut cur = key.clone();
            while let Some(Some((prev, t))) = parent.get(&cur) {
                ts.push(*t);
                cur = prev.clone();
            }
            ts.reverse();
            return Search::Found(ts);
        }
        for &ti in &out[q] {
            let t = &m.transitions[ti];
            if !back[t.dst] || !t.enabled(cs) {
                continue;
            }
            let npos = match (t.input, word) {
                (None, _) => pos,
                (Some(a), Some(w)) => {
                    if w.get(pos) != Some(&a) {
                        continue;
                    }
                    pos + 1
                }
                (Some(_), None) => pos,
            };
            let ncs = t.apply(cs);
            if let Some(l) = len {
                let owed: u64 = (0..m.k).filter(|i| paid[*i]).map(|i| ncs[i]).sum();
                if owed > (l - npos) as u64 {
                    continue;
                }
            }
            if ncs.iter().any(|c| *c > counter_cap) {
                truncated = true;
                continue;
            }
            let nk = (t.dst, npos, ncs);
            if !parent.contains_key(&nk) {
                if parent.len() >= limit {
                    return Search::Truncated;
                }
                parent.insert(nk.clone(), Some((key.clone(), ti)));
                queue.push_back(nk);
            }
        }
    }
    if truncated {
        Search::Truncated
    } else {
        Search::Exhausted
    }
}

// ---------------------------------------------------------------------------
// Projections

/// `(h_Δ(α), h_Σ(α))` for the transition sequence α of the run.
pub fn project_run(m: &Machine, r: &Run) -> (Vec<Instr>, Word) {
    let instrs = r.transitions.iter().filter_map(|t| m.transitions[*t].instr()).collect();
    let input = r.transitions.iter().filter_map(|t| m.transitions[*t].input).map(|a| m.alphabet[a].clone()).collect();
    (instrs, input)
}

/// Removes every stretch between two equal configurations.
pub fn collapse_run(r: &Run) -> Run {
    let mut configs = r.configs.clone();
    let mut transitions = r.transitions.clone();
    let mut labels = r.labels.clone();
    'outer: loop {
        let mut first: HashMap<&Config, usize> = HashMap::new();
        for (j, c) in configs.iter().enumerate() {
            if let Some(&i) = first.get(c) {
                configs.drain(i..j);
                transitions.drain(i..j);
                labels.drain(i..j);
                continue 'outer;
            }
            first.insert(c, j);
        }
        break;
    }
    Run { input: r.input.clone(), configs, transitions, labels }
}

/// Renders a word; symbols are juxtaposed when all are single characters.
pub fn render_word(w: &[String]) -> String {
    if w.is_empty() {
        return "<eps>".to_string();
    }
    if w.iter().all(|s| s.chars().count() == 1) {
        w.concat()
    } else {
        w.join(" ")
    }
}

pub fn render_instrs(w: &[Instr]) -> String {
    if w.is_empty() {
        return "<eps>".to_string();
    }
    w.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

/// Splits text into alphabet symbols: whitespace separates tokens and each
/// token is cut greedily into the longest matching symbols.
pub fn tokenize_word(text: &str, alphabet: &[String]) -> Result<Word> {
    let text = text.trim();
    if text.is_empty() || text == "<eps>" || text == "@" {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for tok in text.split_whitespace() {
        let mut rest = tok;
        while !rest.is_empty() {
            let best = alphabet.iter().filter(|a| !a.is_empty() && rest.starts_with(a.as_str())).max_by_key(|a| a.len());
            match best {
                Some(a) => {
                    out.push(a.clone());
                    rest = &rest[a.len()..];
                }
                None => return Err(Error::invalid(format!("cannot split '{tok}' into alphabet symbols"))),
            }
        }
    }
    Ok(out)
}

/// Length-lexicographic order on words.
pub fn shortlex(a: &[String], b: &[String]) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anbn() -> Machine {
        let mut b = MachineBuilder::new(1);
        let a = b.symbol("a");
        let bb = b.symbol("b");
        let q0 = b.state("q0");
        let q1 = b.state("q1");
        let f = b.state("f");
        b.add(q0, Some(a), vec![false], q0, vec![1]);
        b.add(q0, Some(a), vec![true], q0, vec![1]);
        b.add(q0, Some(bb), vec![true], q1, vec![-1]);
        b.add(q1, Some(bb), vec![true], q1, vec![-1]);
        b.add(q0, None, vec![false], f, vec![0]);
        b.add(q1, None, vec![false], f, vec![0]);
        b.add_final(f);
        b.build().unwrap()
    }

    #[test]
    fn instr_parse_and_display() {
        assert_eq!(Instr::parse("C12"), Some(Instr::C(12)));
        assert_eq!(Instr::parse("D1"), Some(Instr::D(1)));
        assert_eq!(Instr::parse("C0"), None);
        assert_eq!(Instr::parse("E1"), None);
        assert_eq!(Instr::D(3).to_string(), "D3");
    }

    #[test]
    fn multi_change_is_flagged() {
        let mut b = MachineBuilder::new(2);
        let q = b.state("q");
        b.add(q, None, vec![false, false], q, vec![1, 1]);
        b.add_final(q);
        let r = validate_well_formed(&b.build().unwrap()).unwrap();
        assert!(r.violations.iter().any(|v| v.kind == ViolationKind::MultiCounterChange));
        assert!(!r.is_well_formed);
    }

    #[test]
    fn reversal_on_linear_path_is_flagged() {
        let mut b = MachineBuilder::new(1);
        let s: Vec<usize> = (0..4).map(|i| b.state(&format!("s{i}"))).collect();
        b.add(s[0], None, vec![false], s[1], vec![1]);
        b.add(s[1], None, vec![true], s[2], vec![-1]);
        b.add(s[2], None, vec![false], s[3], vec![1]);
        b.add_final(s[3]);
        let r = validate_well_formed(&b.build().unwrap()).unwrap();
        assert!(r
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::ReversalViolation && v.reachable && v.on_accepting_path));
    }

    #[test]
    fn anbn_is_well_formed_and_deterministic() {
        let r = validate_well_formed(&anbn()).unwrap();
        assert!(r.is_well_formed, "{:?}", r.violations);
    }

    #[test]
    fn run_word_and_projection() {
        let m = anbn();
        let w: Word = vec!["a".into(), "a".into(), "b".into(), "b".into()];
        let rs = run_word(&m, &w, &SimCaps::for_machine(&m, 4)).unwrap();
        assert_eq!(rs.runs.len(), 1);
        let (instrs, input) = project_run(&m, &rs.runs[0]);
        assert_eq!(input, w);
        assert_eq!(instrs, vec![Instr::C(1), Instr::C(1), Instr::D(1), Instr::D(1)]);
        assert!(m.check_run(&rs.runs[0]).is_ok());
        let bad: Word = vec!["a".into(), "a".into(), "b".into()];
        assert!(run_word(&m, &bad, &SimCaps::for_machine(&m, 3)).unwrap().runs.is_empty());
    }

    #[test]
    fn collapse_removes_loops_and_is_idempotent() {
        let mut b = MachineBuilder::new(1);
        let p = b.state("p");
        let q = b.state("q");
        b.add(p, None, vec![false], q, vec![0]);
        b.add(q, None, vec![false], p, vec![0]);
        b.add_final(p);
        let m = b.build().unwrap();
        let r = m.replay(&[0, 1, 0, 1]).unwrap();
        let c = collapse_run(&r);
        assert!(c.is_empty());
        assert!(m.check_run(&c).is_ok());
        assert_eq!(collapse_run(&c), c);
    }

    #[test]
    fn expand_guard_counts() {
        assert_eq!(expand_guard(&[None, Some(true), None]).len(), 4);
        assert_eq!(expand_guard(&[]), vec![Vec::<bool>::new()]);
    }

    #[test]
    fn tokenizer_prefers_long_symbols() {
        let alpha: Vec<String> = vec!["a".into(), "ab".into(), "b".into()];
        assert_eq!(tokenize_word("abb", &alpha).unwrap(), vec!["ab".to_string(), "b".to_string()]);
        assert!(tokenize_word("<eps>", &alpha).unwrap().is_empty());
        assert!(tokenize_word("c", &alpha).is_err());
    }
}
