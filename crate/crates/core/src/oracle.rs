//! Brute-force ground truth by bounded exploration of configurations.

use std::collections::{BTreeSet, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::machine::{shortlex, validate_well_formed, Instr, Machine, MachineBuilder, SimCaps, Word};

/// Words found by bounded enumeration, in length-lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Language {
    pub words: Vec<Word>,
    /// Some branch was cut by a cap, so words may be missing.
    pub truncated: bool,
}

impl Language {
    pub fn contains(&self, w: &[String]) -> bool {
        self.words.binary_search_by(|x| shortlex(x, w)).is_ok()
    }
}

/// Every word of length at most `caps.max_word_len` accepted within the caps.
pub fn enumerate_language(m: &Machine, caps: &SimCaps) -> Result<Language> {
    m.check_structure()?;
    let out = m.outgoing();
    let back = m.coreachable();
    let paid = m.input_paid_counters();
    let max_len = caps.max_word_len;
    type Key = (usize, Vec<usize>, Vec<u64>);
    let start: Key = (m.initial, Vec::new(), vec![0; m.k]);
    let mut seen: HashSet<Key> = HashSet::new();
    let mut queue: VecDeque<(Key, u64)> = VecDeque::new();
    let mut found: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut truncated = false;
    let mut steps = 0u64;
    if back[m.initial] {
        seen.insert(start.clone());
        queue.push_back((start, 0));
    }
    while let Some(((q, w, cs), lam)) = queue.pop_front() {
        if m.is_accepting(q, &cs) {
            found.insert(w.clone());
        }
        for &ti in &out[q] {
            let t = &m.transitions[ti];
            if !back[t.dst] || !t.enabled(&cs) {
                continue;
            }
            let mut w2 = w.clone();
            let mut lam2 = 0;
            match t.input {
                Some(a) => {
                    if w.len() == max_len {
                        continue;
                    }
                    w2.push(a);
                }
                None => lam2 = lam + 1,
            }
            if lam2 > caps.max_lambda_run {
                truncated = true;
                continue;
            }
            let cs2 = t.apply(&cs);
            if cs2.iter().any(|c| *c > caps.max_counter_value) {
                truncated = true;
                continue;
            }
            // Units in input-paid counters each need one more symbol.
            let owed: u64 = (0..m.k).filter(|i| paid[*i]).map(|i| cs2[i]).sum();
            if owed > (max_len - w2.len()) as u64 {
                continue;
            }
            steps += 1;
            if steps > caps.max_total_steps {
                truncated = true;
                queue.clear();
                break;
            }
            let key = (t.dst, w2, cs2);
            if seen.insert(key.clone()) {
                queue.push_back((key, lam2));
            }
        }
    }
    let mut words: Vec<Word> = found.iter().map(|w| m.decode_word(w)).collect();
    words.sort_by(|a, b| shortlex(a, b));
    Ok(Language { words, truncated })
}

/// Whether some accepting run on `w` stays within the counter cap, by
/// breadth-first search over configurations.
pub fn accepts(m: &Machine, w: &[String], caps: &SimCaps) -> Result<bool> {
    m.check_structure()?;
    let word = m.encode_word(w)?;
    let out = m.outgoing();
    let back = m.coreachable();
    type Key = (usize, usize, Vec<u64>);
    let start: Key = (m.initial, 0, vec![0; m.k]);
    let mut seen: HashSet<Key> = HashSet::new();
    let mut queue: VecDeque<Key> = VecDeque::new();
    if back[m.initial] {
        seen.insert(start.clone());
        queue.push_back(start);
    }
    while let Some((q, pos, cs)) = queue.pop_front() {
        if pos == word.len() && m.is_accepting(q, &cs) {
            return Ok(true);
        }
        for &ti in &out[q] {
            let t = &m.transitions[ti];
            if !back[t.dst] || !t.enabled(&cs) {
                continue;
            }
            let pos2 = match t.input {
                None => pos,
                Some(a) if word.get(pos) == Some(&a) => pos + 1,
                Some(_) => continue,
            };
            let cs2 = t.apply(&cs);
            if cs2.iter().any(|c| *c > caps.max_counter_value) {
                continue;
            }
            let key = (t.dst, pos2, cs2);
            if seen.insert(key.clone()) {
                queue.push_back(key);
            }
        }
    }
    Ok(false)
}

/// Instruction words of accepting runs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Behaviors {
    pub words: Vec<Vec<Instr>>,
    pub truncated: bool,
}

/// Instruction projections of accepting runs, up to length
/// `caps.max_word_len`. Input is ignored, and the counters are a function of
/// the instruction word, so the search space is finite.
pub fn enumerate_behaviors(m: &Machine, caps: &SimCaps) -> Result<Behaviors> {
    m.check_structure()?;
    let out = m.outgoing();
    let back = m.coreachable();
    let max_len = caps.max_word_len;
    type Key = (usize, Vec<Instr>, Vec<u64>);
    let start: Key = (m.initial, Vec::new(), vec![0; m.k]);
    let mut seen: HashSet<Key> = HashSet::new();
    let mut queue = VecDeque::new();
    let mut found = BTreeSet::new();
    let mut truncated = false;
    let mut steps = 0u64;
    if back[m.initial] {
        seen.insert(start.clone());
        queue.push_back(start);
    }
    while let Some((q, w, cs)) = queue.pop_front() {
        if m.is_accepting(q, &cs) {
            found.insert(w.clone());
        }
        for &ti in &out[q] {
            let t = &m.transitions[ti];
            if !back[t.dst] || !t.enabled(&cs) {
                continue;
            }
            let mut w2 = w.clone();
            for (i, d) in t.delta.iter().enumerate() {
                match d {
                    1 => w2.push(Instr::C(i + 1)),
                    -1 => w2.push(Instr::D(i + 1)),
                    _ => {}
                }
            }
            if w2.len() > max_len {
                continue;
            }
            steps += 1;
            if steps > caps.max_total_steps {
                truncated = true;
                queue.clear();
                break;
            }
            let key = (t.dst, w2, t.apply(&cs));
            if seen.insert(key.clone()) {
                queue.push_back(key);
            }
        }
    }
    let mut words: Vec<Vec<Instr>> = found.into_iter().collect();
    words.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(Behaviors { words, truncated })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EquivStatus {
    Equal,
    /// No difference found, but an enumeration was truncated.
    EqualWithinExplored,
    Different,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equivalence {
    pub status: EquivStatus,
    /// Length-lexicographically least word in the symmetric difference.
    pub counterexample: Option<Word>,
}

impl Equivalence {
    pub fn equal(&self) -> bool {
        self.status != EquivStatus::Different
    }
}

pub fn bounded_equiv(m1: &Machine, m2: &Machine, len: usize) -> Result<Equivalence> {
    let a = enumerate_language(m1, &SimCaps::for_machine(m1, len))?;
    let b = enumerate_language(m2, &SimCaps::for_machine(m2, len))?;
    Ok(compare_languages(&a, &b))
}

pub fn compare_languages(a: &Language, b: &Language) -> Equivalence {
    let sa: BTreeSet<&Word> = a.words.iter().collect();
    let sb: BTreeSet<&Word> = b.words.iter().collect();
    let counterexample = sa.symmetric_difference(&sb).min_by(|x, y| shortlex(x, y)).map(|w| (*w).clone());
    let status = match (&counterexample, a.truncated || b.truncated) {
        (Some(_), _) => EquivStatus::Different,
        (None, false) => EquivStatus::Equal,
        (None, true) => EquivStatus::EqualWithinExplored,
    };
    Equivalence { status, counterexample }
}

/// Shape of randomly generated machines.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomShape {
    pub max_states: usize,
    pub max_counters: usize,
    pub max_transitions: usize,
    pub alphabet: Vec<String>,
}

impl Default for RandomShape {
    fn default() -> Self {
        RandomShape { max_states: 4, max_counters: 2, max_transitions: 8, alphabet: vec!["a".into(), "b".into()] }
    }
}

/// A random machine whose accepting runs are one-reversal and change at most
/// one counter per step. Draws are repeated until the checks pass.
pub fn random_machine(rng: &mut impl Rng, shape: &RandomShape) -> Machine {
    loop {
        let m = random_candidate(rng, shape);
        let Ok(rep) = validate_well_formed(&m) else { continue };
        if rep.well_formed_on_accepting_runs() {
            return m;
        }
    }
}

fn random_candidate(rng: &mut impl Rng, shape: &RandomShape) -> Machine {
    let n = rng.random_range(1..=shape.max_states.max(1));
    let k = rng.random_range(1..=shape.max_counters.max(1));
    let mut b = MachineBuilder::new(k);
    b.symbols(&shape.alphabet);
    for i in 0..n {
        b.state(&format!("q{i}"));
    }
    b.set_initial(0);
    for q in 0..n {
        if rng.random_bool(0.4) {
            b.add_final(q);
        }
    }
    b.add_final(rng.random_range(0..n));
    let count = rng.random_range(1..=shape.max_transitions.max(1));
    for _ in 0..count {
        let src = rng.random_range(0..n);
        let dst = rng.random_range(0..n);
        let input = if shape.alphabet.is_empty() || rng.random_bool(0.2) {
            None
        } else {
            Some(rng.random_range(0..shape.alphabet.len()))
        };
        // Mostly unconstrained guards, so languages are not trivially small.
        let mut guard: Vec<Option<bool>> =
            (0..k).map(|_| if rng.random_bool(0.7) { None } else { Some(rng.random_bool(0.5)) }).collect();
        let mut delta = vec![0i8; k];
        let c = rng.random_range(0..k);
        match rng.random_range(0..3) {
            0 => delta[c] = 1,
            1 => {
                delta[c] = -1;
                guard[c] = Some(true);
            }
            _ => {}
        }
        b.add_partial(src, input, &guard, dst, &delta);
    }
    b.build().expect("generated machine is structurally valid")
}

/// A seeded generator, for reproducible draws.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A uniformly random word of length at most `max_len`.
pub fn random_word(rng: &mut impl Rng, alphabet: &[String], max_len: usize) -> Word {
    if alphabet.is_empty() {
        return Vec::new();
    }
    let len = rng.random_range(0..=max_len);
    (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())].clone()).collect()
}
