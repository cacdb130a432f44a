//! Instruction-language expressions over Δ_k (and plain regular expressions
//! over arbitrary alphabets), their automata, syntactic family
//! classification, the I_eq acceptor and the family generators.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::automaton::{Dfa, Nfa};
use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::machine::{delta_alphabet, expand_guard, Instr, Machine, MachineBuilder};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Eps,
    Sym(String),
    Concat(Vec<Expr>),
    Union(Vec<Expr>),
    Star(Box<Expr>),
    Plus(Box<Expr>),
    Shuffle(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn sym(s: impl Into<String>) -> Expr {
        Expr::Sym(s.into())
    }

    pub fn star(e: Expr) -> Expr {
        Expr::Star(Box::new(e))
    }

    pub fn plus(e: Expr) -> Expr {
        Expr::Plus(Box::new(e))
    }

    pub fn word<S: AsRef<str>>(w: &[S]) -> Expr {
        match w.len() {
            0 => Expr::Eps,
            1 => Expr::sym(w[0].as_ref()),
            _ => Expr::Concat(w.iter().map(|s| Expr::sym(s.as_ref())).collect()),
        }
    }

    pub fn union(mut es: Vec<Expr>) -> Expr {
        if es.len() == 1 {
            es.pop().unwrap()
        } else {
            Expr::Union(es)
        }
    }

    pub fn concat(mut es: Vec<Expr>) -> Expr {
        match es.len() {
            0 => Expr::Eps,
            1 => es.pop().unwrap(),
            _ => Expr::Concat(es),
        }
    }

    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Eps => {}
            Expr::Sym(s) => {
                out.insert(s.clone());
            }
            Expr::Concat(v) | Expr::Union(v) => v.iter().for_each(|e| e.collect_symbols(out)),
            Expr::Star(e) | Expr::Plus(e) => e.collect_symbols(out),
            Expr::Shuffle(a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
        }
    }

    /// Largest counter index mentioned, 0 when no instruction occurs.
    pub fn max_counter(&self) -> usize {
        self.symbols().iter().filter_map(|s| Instr::parse(s)).map(|i| i.counter()).max().unwrap_or(0)
    }

    /// Thompson construction over `alphabet`, which must contain every symbol.
    pub fn to_nfa(&self, alphabet: &[String]) -> Result<Nfa> {
        for s in self.symbols() {
            if !alphabet.contains(&s) {
                return Err(Error::invalid(format!("symbol {s} is outside the alphabet")));
            }
        }
        let mut n = Nfa::new(alphabet.to_vec());
        let (s, f) = self.build(&mut n);
        n.initial = s;
        n.finals[f] = true;
        Ok(n)
    }

    fn build(&self, n: &mut Nfa) -> (usize, usize) {
        match self {
            Expr::Eps => {
                let s = n.add_state();
                (s, s)
            }
            Expr::Sym(a) => {
                let s = n.add_state();
                let f = n.add_state();
                let a = n.symbol(a).expect("checked");
                n.add_edge(s, Some(a), f);
                (s, f)
            }
            Expr::Concat(v) => {
                let s = n.add_state();
                let mut cur = s;
                for e in v {
                    let (a, b) = e.build(n);
                    n.add_edge(cur, None, a);
                    cur = b;
                }
                (s, cur)
            }
            Expr::Union(v) => {
                let s = n.add_state();
                let f = n.add_state();
                for e in v {
                    let (a, b) = e.build(n);
                    n.add_edge(s, None, a);
                    n.add_edge(b, None, f);
                }
                (s, f)
            }
            Expr::Star(e) | Expr::Plus(e) => {
                let s = n.add_state();
                let f = n.add_state();
                let (a, b) = e.build(n);
                n.add_edge(s, None, a);
                n.add_edge(b, None, a);
                n.add_edge(b, None, f);
                if matches!(self, Expr::Star(_)) {
                    n.add_edge(s, None, f);
                }
                (s, f)
            }
            Expr::Shuffle(x, y) => {
                let alpha = n.alphabet.clone();
                let xa = x.to_nfa(&alpha).expect("checked");
                let ya = y.to_nfa(&alpha).expect("checked");
                let sh = xa.shuffle(&ya);
                let off = n.num_states();
                for _ in 0..sh.num_states() {
                    n.add_state();
                }
                let f = n.add_state();
                for p in 0..sh.num_states() {
                    for &(a, q) in &sh.trans[p] {
                        n.add_edge(p + off, a, q + off);
                    }
                    if sh.finals[p] {
                        n.add_edge(p + off, None, f);
                    }
                }
                (sh.initial + off, f)
            }
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Shuffle(..) => 0,
            Expr::Union(_) => 1,
            Expr::Concat(_) => 2,
            Expr::Star(_) | Expr::Plus(_) => 3,
            Expr::Eps | Expr::Sym(_) => 4,
        }
    }

    fn fmt_in(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.prec() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Expr::Eps => f.write_str("@")?,
            Expr::Sym(s) => f.write_str(s)?,
            Expr::Concat(v) => {
                for (i, e) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    e.fmt_in(f, 3)?;
                }
            }
            Expr::Union(v) => {
                for (i, e) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" | ")?;
                    }
                    e.fmt_in(f, 2)?;
                }
            }
            Expr::Star(e) | Expr::Plus(e) => {
                e.fmt_in(f, 4)?;
                f.write_str(if matches!(self, Expr::Star(_)) { "*" } else { "+" })?;
            }
            Expr::Shuffle(a, b) => {
                a.fmt_in(f, 1)?;
                f.write_str(" # ")?;
                b.fmt_in(f, 1)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_in(f, 0)
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Sym(String),
    Eps,
    LParen,
    RParen,
    Bar,
    Hash,
    Star,
    Plus,
}

fn lex(text: &str, alphabet: Option<&[String]>) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let special = |c: char| "()|#*+@".contains(c) || c.is_whitespace();
    while i < chars.len() {
        let (pos, c) = chars[i];
        let col = text[..pos].chars().count() + 1;
        let simple = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '|' => Some(Tok::Bar),
            '#' => Some(Tok::Hash),
            '*' => Some(Tok::Star),
            '+' => Some(Tok::Plus),
            '@' => Some(Tok::Eps),
            _ => None,
        };
        if let Some(t) = simple {
            out.push((col, t));
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && !special(chars[j].1) {
            j += 1;
        }
        let end = if j < chars.len() { chars[j].0 } else { text.len() };
        let run = &text[pos..end];
        match alphabet {
            None => {
                // Instruction mode: C<n> / D<n> tokens, juxtaposition allowed.
                let mut rest = run;
                let mut rcol = col;
                while !rest.is_empty() {
                    let head = rest.chars().next().unwrap();
                    if head != 'C' && head != 'D' {
                        return Err(Error::parse(1, rcol, format!("expected C<n> or D<n>, found '{head}'")));
                    }
                    let digits = rest[1..].chars().take_while(|c| c.is_ascii_digit()).count();
                    if digits == 0 {
                        return Err(Error::parse(1, rcol, "missing counter index"));
                    }
                    let tok = &rest[..1 + digits];
                    if Instr::parse(tok).is_none() {
                        return Err(Error::parse(1, rcol, format!("invalid counter index in '{tok}'")));
                    }
                    out.push((rcol, Tok::Sym(tok.to_string())));
                    rest = &rest[1 + digits..];
                    rcol += 1 + digits;
                }
            }
            Some(alpha) => {
                let mut rest = run;
                let mut rcol = col;
                while !rest.is_empty() {
                    let best = alpha
                        .iter()
                        .filter(|a| !a.is_empty() && rest.starts_with(a.as_str()))
                        .max_by_key(|a| a.len())
                        .ok_or_else(|| Error::parse(1, rcol, format!("'{rest}' does not start with an alphabet symbol")))?;
                    out.push((rcol, Tok::Sym(best.clone())));
                    rcol += best.chars().count();
                    rest = &rest[best.len()..];
                }
            }
        }
        i = j;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.0)
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut e = self.alt()?;
        while self.peek() == Some(&Tok::Hash) {
            self.pos += 1;
            let r = self.alt()?;
            e = Expr::Shuffle(Box::new(e), Box::new(r));
        }
        Ok(e)
    }

    fn alt(&mut self) -> Result<Expr> {
        let mut v = vec![self.seq()?];
        while self.peek() == Some(&Tok::Bar) {
            self.pos += 1;
            v.push(self.seq()?);
        }
        Ok(Expr::union(v))
    }

    fn seq(&mut self) -> Result<Expr> {
        let mut v = Vec::new();
        while matches!(self.peek(), Some(Tok::Sym(_) | Tok::Eps | Tok::LParen)) {
            v.push(self.item()?);
        }
        if v.is_empty() {
            return Err(Error::parse(1, self.col(), "expected a symbol, '@' or '('"));
        }
        Ok(Expr::concat(v))
    }

    fn item(&mut self) -> Result<Expr> {
        let mut e = self.atom()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => e = Expr::star(e),
                Some(Tok::Plus) => e = Expr::plus(e),
                _ => return Ok(e),
            }
            self.pos += 1;
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let col = self.col();
        match self.toks.get(self.pos).map(|t| t.1.clone()) {
            Some(Tok::Sym(s)) => {
                self.pos += 1;
                Ok(Expr::Sym(s))
            }
            Some(Tok::Eps) => {
                self.pos += 1;
                Ok(Expr::Eps)
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(Error::parse(1, self.col(), "expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            _ => Err(Error::parse(1, col, "expected a symbol, '@' or '('")),
        }
    }
}

fn parse_with(text: &str, alphabet: Option<&[String]>) -> Result<Expr> {
    let toks = lex(text, alphabet)?;
    let mut p = Parser { toks, pos: 0, end_col: text.chars().count() + 1 };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(Error::parse(1, p.col(), "unexpected token"));
    }
    Ok(e)
}

/// An instruction expression with its inferred counter count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    pub expr: Expr,
    pub k: usize,
}

impl Pattern {
    pub fn new(expr: Expr) -> Result<Pattern> {
        for s in expr.symbols() {
            if Instr::parse(&s).is_none() {
                return Err(Error::invalid(format!("'{s}' is not an instruction symbol")));
            }
        }
        let k = expr.max_counter().max(1);
        Ok(Pattern { expr, k })
    }

    /// Automaton over Δ_k for `k >= self.k`.
    pub fn nfa(&self, k: usize) -> Result<Nfa> {
        if k < self.k {
            return Err(Error::invalid(format!("pattern uses counter {} but only {k} counters exist", self.k)));
        }
        self.expr.to_nfa(&delta_alphabet(k))
    }

    pub fn dfa(&self, k: usize, budget: &Budget) -> Result<Dfa> {
        Ok(self.nfa(k)?.determinize_with(budget)?.minimized())
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

/// Parses an instruction expression over Δ_k.
pub fn parse_pattern(text: &str) -> Result<Pattern> {
    Pattern::new(parse_with(text, None)?)
}

/// Parses a regular expression over `alphabet`; runs of non-special
/// characters are split greedily into alphabet symbols.
pub fn parse_regex(text: &str, alphabet: &[String]) -> Result<Expr> {
    parse_with(text, Some(alphabet))
}

pub fn expr_to_nfa(p: &Pattern) -> Result<Nfa> {
    p.nfa(p.k)
}

/// Complete DFA for the complement, with the subset construction charged to
/// `budget`.
pub fn determinize_complement(n: &Nfa, budget: &Budget) -> Result<Dfa> {
    Ok(n.determinize_with(budget)?.complement())
}

// ---------------------------------------------------------------------------
// Families

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FamilyTag {
    LBiLBd,
    StLB,
    LB,
    BDiLBd,
    LBiBDd,
    BD,
    LBd,
    LBi,
    LBunion,
    ALL,
    SBD,
}

impl FamilyTag {
    pub const ALL_TAGS: [FamilyTag; 11] = [
        FamilyTag::LBiLBd,
        FamilyTag::StLB,
        FamilyTag::LB,
        FamilyTag::BDiLBd,
        FamilyTag::LBiBDd,
        FamilyTag::BD,
        FamilyTag::LBd,
        FamilyTag::LBi,
        FamilyTag::LBunion,
        FamilyTag::ALL,
        FamilyTag::SBD,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyTag::LBiLBd => "LBiLBd",
            FamilyTag::StLB => "StLB",
            FamilyTag::LB => "LB",
            FamilyTag::BDiLBd => "BDiLBd",
            FamilyTag::LBiBDd => "LBiBDd",
            FamilyTag::BD => "BD",
            FamilyTag::LBd => "LBd",
            FamilyTag::LBi => "LBi",
            FamilyTag::LBunion => "LBunion",
            FamilyTag::ALL => "ALL",
            FamilyTag::SBD => "SBD",
        }
    }
}

impl fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyTag::ALL_TAGS
            .iter()
            .copied()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown family tag '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    /// Families from the definition list whose templates the expression fits.
    pub tags: BTreeSet<FamilyTag>,
    /// LBunion and SBD, reported apart from the base templates.
    pub derived: BTreeSet<FamilyTag>,
    /// Tags whose distinct-letter variant also fits.
    pub distinct: BTreeSet<FamilyTag>,
    /// Letter sequence witnessing LB when there is a single disjunct.
    pub letters: Option<Vec<String>>,
    /// Word sequence witnessing BD when there is a single disjunct.
    pub words: Option<Vec<Vec<String>>>,
}

const MAX_DISJUNCTS: usize = 512;

/// Distributes unions that are not under a star.
fn disjuncts(e: &Expr) -> Option<Vec<Expr>> {
    Some(match e {
        Expr::Union(v) => {
            let mut out = Vec::new();
            for x in v {
                out.extend(disjuncts(x)?);
                if out.len() > MAX_DISJUNCTS {
                    return None;
                }
            }
            out
        }
        Expr::Concat(v) => {
            let mut acc = vec![Vec::new()];
            for x in v {
                let ds = disjuncts(x)?;
                let mut next = Vec::new();
                for a in &acc {
                    for d in &ds {
                        let mut c: Vec<Expr> = a.clone();
                        c.push(d.clone());
                        next.push(c);
                    }
                }
                if next.len() > MAX_DISJUNCTS {
                    return None;
                }
                acc = next;
            }
            acc.into_iter().map(Expr::concat).collect()
        }
        Expr::Shuffle(a, b) => {
            let (da, db) = (disjuncts(a)?, disjuncts(b)?);
            if da.len() * db.len() > MAX_DISJUNCTS {
                return None;
            }
            let mut out = Vec::new();
            for x in &da {
                for y in &db {
                    out.push(Expr::Shuffle(Box::new(x.clone()), Box::new(y.clone())));
                }
            }
            out
        }
        other => vec![other.clone()],
    })
}

/// Whether every word of `e` is a single fixed word; returns it.
fn fixed_word(e: &Expr) -> Option<Vec<String>> {
    match e {
        Expr::Eps => Some(Vec::new()),
        Expr::Sym(s) => Some(vec![s.clone()]),
        Expr::Concat(v) => {
            let mut w = Vec::new();
            for x in v {
                w.extend(fixed_word(x)?);
            }
            Some(w)
        }
        Expr::Union(v) => {
            let ws: Vec<Vec<String>> = v.iter().map(fixed_word).collect::<Option<_>>()?;
            if ws.windows(2).all(|p| p[0] == p[1]) {
                ws.into_iter().next()
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Shortest `u` with `w = u^r`.
pub fn primitive_root<T: PartialEq + Clone>(w: &[T]) -> Vec<T> {
    let n = w.len();
    for d in 1..=n {
        if n % d == 0 && (0..n).all(|i| w[i] == w[i % d]) {
            return w[..d].to_vec();
        }
    }
    w.to_vec()
}

fn is_subsequence<T: PartialEq>(small: &[T], big: &[T]) -> bool {
    let mut it = big.iter();
    small.iter().all(|x| it.any(|y| y == x))
}

fn merge_adjacent<T: PartialEq>(v: &mut Vec<T>) {
    v.dedup();
}

/// A sequence `w_1..w_n` with `proj(L(e)) ⊆ w_1^*⋯w_n^*` found syntactically;
/// `keep` selects the projected symbols and `letters` requires `|w_i| = 1`.
fn bounded_cover(e: &Expr, keep: &dyn Fn(&str) -> bool, letters: bool) -> Option<Vec<Vec<String>>> {
    let proj = |w: Vec<String>| -> Vec<String> { w.into_iter().filter(|s| keep(s)).collect() };
    let out = match e {
        Expr::Eps => Vec::new(),
        Expr::Sym(s) => {
            if keep(s) {
                vec![vec![s.clone()]]
            } else {
                Vec::new()
            }
        }
        Expr::Concat(v) => {
            let mut out = Vec::new();
            for x in v {
                out.extend(bounded_cover(x, keep, letters)?);
            }
            out
        }
        Expr::Union(v) => {
            let parts: Vec<Vec<Vec<String>>> =
                v.iter().map(|x| bounded_cover(x, keep, letters)).collect::<Option<_>>()?;
            let longest = parts.iter().max_by_key(|p| p.len()).cloned().unwrap_or_default();
            if parts.iter().all(|p| is_subsequence(p, &longest)) {
                longest
            } else {
                parts.concat()
            }
        }
        Expr::Star(x) | Expr::Plus(x) => {
            let root = match fixed_word(x) {
                Some(w) => Some(primitive_root(&proj(w))),
                None => {
                    let mut inner = bounded_cover(x, keep, letters)?;
                    merge_adjacent(&mut inner);
                    match inner.len() {
                        0 => Some(Vec::new()),
                        1 => Some(inner.pop().unwrap()),
                        _ => None,
                    }
                }
            }?;
            if root.is_empty() {
                Vec::new()
            } else if letters && root.len() > 1 {
                return None;
            } else {
                vec![root]
            }
        }
        Expr::Shuffle(a, b) => {
            let ca = bounded_cover(a, keep, letters);
            let cb = bounded_cover(b, keep, letters);
            let a_empty = a.symbols().iter().all(|s| !keep(s));
            let b_empty = b.symbols().iter().all(|s| !keep(s));
            if a_empty {
                cb?
            } else if b_empty {
                ca?
            } else {
                return None;
            }
        }
    };
    if letters && out.iter().any(|w| w.len() > 1) {
        return None;
    }
    let mut out = out;
    merge_adjacent(&mut out);
    Some(out)
}

fn is_inc(s: &str) -> bool {
    s.starts_with('C')
}

fn is_dec(s: &str) -> bool {
    s.starts_with('D')
}

/// No `C_r … C_s … D_r … D_s` crossing with `r ≠ s` in the letter sequence.
pub fn is_stratified(seq: &[Instr]) -> bool {
    let m = seq.len();
    for l in 0..m {
        let Instr::C(r) = seq[l] else { continue };
        for lp in l + 1..m {
            let Instr::C(s) = seq[lp] else { continue };
            if r == s {
                continue;
            }
            for j in lp + 1..m {
                if seq[j] != Instr::D(r) {
                    continue;
                }
                if seq[j + 1..].contains(&Instr::D(s)) {
                    return false;
                }
            }
        }
    }
    true
}

fn instrs(w: &[String]) -> Vec<Instr> {
    w.iter().filter_map(|s| Instr::parse(s)).collect()
}

fn distinct<T: Ord>(v: &[T]) -> bool {
    let set: BTreeSet<&T> = v.iter().collect();
    set.len() == v.len()
}

struct OneClass {
    tags: BTreeSet<FamilyTag>,
    derived: BTreeSet<FamilyTag>,
    distinct: BTreeSet<FamilyTag>,
    letters: Option<Vec<String>>,
    words: Option<Vec<Vec<String>>>,
}

fn classify_one(e: &Expr) -> OneClass {
    use FamilyTag::*;
    let mut tags = BTreeSet::from([ALL]);
    let mut dist = BTreeSet::new();
    let all = |_: &str| true;
    let lb = bounded_cover(e, &all, true).map(|v| v.into_iter().map(|mut w| w.pop().unwrap()).collect::<Vec<_>>());
    let bd = bounded_cover(e, &all, false);
    if let Some(seq) = &lb {
        tags.insert(LB);
        tags.insert(BD);
        let is = instrs(seq);
        let first_dec = seq.iter().position(|s| is_dec(s)).unwrap_or(seq.len());
        let ordered = seq[first_dec..].iter().all(|s| is_dec(s));
        let d = distinct(seq);
        if d {
            dist.insert(LB);
        }
        if ordered {
            tags.insert(LBiLBd);
            if d {
                dist.insert(LBiLBd);
            }
        }
        if is_stratified(&is) {
            tags.insert(StLB);
            if d {
                dist.insert(StLB);
            }
        }
    }
    if let Some(words) = &bd {
        tags.insert(BD);
        let mixed = words.iter().any(|w| w.iter().any(|s| is_inc(s)) && w.iter().any(|s| is_dec(s)));
        if !mixed {
            let first_dec = words.iter().position(|w| w.iter().any(|s| is_dec(s))).unwrap_or(words.len());
            let split = words[first_dec..].iter().all(|w| w.iter().all(|s| is_dec(s)));
            if split {
                if words[first_dec..].iter().all(|w| w.len() == 1) {
                    tags.insert(BDiLBd);
                }
                if words[..first_dec].iter().all(|w| w.len() == 1) {
                    tags.insert(LBiBDd);
                }
            }
        }
    }
    if tags.contains(&LBiLBd) {
        tags.insert(BDiLBd);
        tags.insert(LBiBDd);
    }
    if bounded_cover(e, &is_dec, true).is_some() {
        tags.insert(LBd);
    }
    if bounded_cover(e, &is_inc, true).is_some() {
        tags.insert(LBi);
    }
    let mut derived = BTreeSet::new();
    if tags.contains(&LBd) || tags.contains(&LBi) {
        derived.insert(LBunion);
    }
    let short_words = match &bd {
        Some(words) => words.iter().all(|w| w.len() <= 2),
        None => lb.is_some(),
    };
    if short_words {
        derived.insert(SBD);
    }
    OneClass { tags, derived, distinct: dist, letters: lb, words: bd }
}

/// Syntactic family classification. Unions outside stars distribute and the
/// result is the intersection over the disjuncts.
pub fn classify_families(p: &Pattern) -> Classification {
    let Some(ds) = disjuncts(&p.expr) else {
        return Classification {
            tags: BTreeSet::from([FamilyTag::ALL]),
            derived: BTreeSet::new(),
            distinct: BTreeSet::new(),
            letters: None,
            words: None,
        };
    };
    let mut tags: Option<BTreeSet<FamilyTag>> = None;
    let mut derived: Option<BTreeSet<FamilyTag>> = None;
    let mut dist: Option<BTreeSet<FamilyTag>> = None;
    let single = ds.len() == 1;
    let mut letters = None;
    let mut words = None;
    for d in &ds {
        let c = classify_one(d);
        let meet = |acc: Option<BTreeSet<FamilyTag>>, x: BTreeSet<FamilyTag>| {
            Some(match acc {
                None => x,
                Some(prev) => prev.intersection(&x).copied().collect(),
            })
        };
        tags = meet(tags, c.tags);
        derived = meet(derived, c.derived);
        dist = meet(dist, c.distinct);
        if single {
            letters = c.letters;
            words = c.words;
        }
    }
    Classification {
        tags: tags.unwrap_or_default(),
        derived: derived.unwrap_or_default(),
        distinct: dist.unwrap_or_default(),
        letters,
        words,
    }
}

// ---------------------------------------------------------------------------
// I_eq acceptor

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Order {
    None,
    Inc,
    Dec,
}

/// Machine over Δ_k accepting the words of `dfa` with `|w|_{C_i} = |w|_{D_i}`
/// and every `C_i` before any `D_i`. The alphabet of `dfa` must be Δ_k.
pub fn eq_acceptor_dfa(dfa: &Dfa, k: usize) -> Result<Machine> {
    if dfa.alphabet != delta_alphabet(k) {
        return Err(Error::invalid("automaton alphabet must be the instruction alphabet"));
    }
    let dfa = dfa.minimized();
    let live = dfa.live_states();
    let mut b = MachineBuilder::new(k);
    b.symbols(&dfa.alphabet);
    let acc = b.state("acc");
    let name = |q: usize, o: &[Order]| {
        let s: String = o
            .iter()
            .map(|x| match x {
                Order::None => 'n',
                Order::Inc => 'i',
                Order::Dec => 'd',
            })
            .collect();
        format!("s{q}_{s}")
    };
    let start = (dfa.initial, vec![Order::None; k]);
    let init = b.state(&name(start.0, &start.1));
    b.set_initial(init);
    b.add_final(acc);
    if !live[dfa.initial] {
        return Ok(b.build_unchecked());
    }
    let mut seen: HashMap<(usize, Vec<Order>), usize> = HashMap::new();
    seen.insert(start.clone(), init);
    let mut queue = VecDeque::from([start]);
    while let Some((q, ord)) = queue.pop_front() {
        let src = seen[&(q, ord.clone())];
        let partial: Vec<Option<bool>> = ord
            .iter()
            .map(|o| match o {
                Order::None => Some(false),
                Order::Inc => Some(true),
                Order::Dec => None,
            })
            .collect();
        if dfa.finals[q] && !ord.contains(&Order::Inc) {
            b.add(src, None, vec![false; k], acc, vec![0; k]);
        }
        for (a, sym) in dfa.alphabet.iter().enumerate() {
            let q2 = dfa.delta[q][a];
            if !live[q2] {
                continue;
            }
            let ins = Instr::parse(sym).expect("instruction alphabet");
            let i = ins.counter() - 1;
            let mut ord2 = ord.clone();
            let mut g = partial.clone();
            let mut delta = vec![0i8; k];
            match ins {
                Instr::C(_) => {
                    if ord[i] == Order::Dec {
                        continue;
                    }
                    ord2[i] = Order::Inc;
                    delta[i] = 1;
                }
                Instr::D(_) => {
                    if ord[i] == Order::None {
                        continue;
                    }
                    ord2[i] = Order::Dec;
                    g[i] = Some(true);
                    delta[i] = -1;
                }
            }
            let key = (q2, ord2);
            let dst = match seen.get(&key) {
                Some(d) => *d,
                None => {
                    let d = b.state(&name(key.0, &key.1));
                    seen.insert(key.clone(), d);
                    queue.push_back(key);
                    d
                }
            };
            for full in expand_guard(&g) {
                b.add(src, Some(a), full, dst, delta.clone());
            }
        }
    }
    Ok(b.build_unchecked().trimmed())
}

/// Well-formed machine accepting `I_eq` of the pattern.
pub fn eq_acceptor(p: &Pattern) -> Result<Machine> {
    eq_acceptor_with(p, &Budget::default())
}

pub fn eq_acceptor_with(p: &Pattern, budget: &Budget) -> Result<Machine> {
    eq_acceptor_dfa(&p.dfa(p.k, budget)?, p.k)
}

// ---------------------------------------------------------------------------
// Generators

fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x.clone());
            out.push(p);
        }
    }
    out
}

/// All ways to cut a sequence into consecutive non-empty blocks.
fn cuts<T: Clone>(items: &[T]) -> Vec<Vec<Vec<T>>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 1..=items.len() {
        for mut rest in cuts(&items[first..]) {
            rest.insert(0, items[..first].to_vec());
            out.push(rest);
        }
    }
    out
}

fn sym(i: Instr) -> Expr {
    Expr::Sym(i.to_string())
}

fn letters_star(seq: &[Instr]) -> Expr {
    Expr::concat(seq.iter().map(|i| Expr::star(sym(*i))).collect())
}

fn any_of(letters: &[Instr]) -> Expr {
    Expr::union(letters.iter().map(|i| sym(*i)).collect())
}

/// Regular envelope whose `I_eq` is the generator language `L_k^tag`.
pub fn generator_envelope(tag: FamilyTag, k: usize) -> Result<Pattern> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let cs: Vec<Instr> = (1..=k).map(Instr::C).collect();
    let ds: Vec<Instr> = (1..=k).map(Instr::D).collect();
    let all: Vec<Instr> = (1..=k).flat_map(|i| [Instr::C(i), Instr::D(i)]).collect();
    let expr = match tag {
        FamilyTag::LB => {
            let mut alts = Vec::new();
            for p in permutations(&all) {
                let ok = (1..=k).all(|j| {
                    p.iter().position(|x| *x == Instr::C(j)) < p.iter().position(|x| *x == Instr::D(j))
                });
                if ok {
                    alts.push(letters_star(&p));
                }
            }
            Expr::union(alts)
        }
        FamilyTag::LBiLBd => {
            let mut alts = Vec::new();
            for pc in permutations(&cs) {
                for pd in permutations(&ds) {
                    alts.push(Expr::concat(vec![letters_star(&pc), letters_star(&pd)]));
                }
            }
            Expr::union(alts)
        }
        FamilyTag::BDiLBd | FamilyTag::LBiBDd => {
            let (blocky, plain) = if tag == FamilyTag::BDiLBd { (&cs, &ds) } else { (&ds, &cs) };
            let mut alts = Vec::new();
            for p in permutations(blocky) {
                for c in cuts(&p) {
                    let blocks = Expr::concat(
                        c.iter().map(|w| Expr::plus(Expr::word(&w.iter().map(|i| i.to_string()).collect::<Vec<_>>()))).collect(),
                    );
                    let rest = letters_star(plain);
                    alts.push(if tag == FamilyTag::BDiLBd {
                        Expr::concat(vec![blocks, rest])
                    } else {
                        Expr::concat(vec![rest, blocks])
                    });
                }
            }
            Expr::union(alts)
        }
        FamilyTag::LBd => {
            // w_0 ∈ Δc*, w_j ∈ {C_{j+1..k}, D_j}* with at least one D_j.
            let mut parts = vec![Expr::star(any_of(&cs))];
            for j in 1..=k {
                let mut letters: Vec<Instr> = ((j + 1)..=k).map(Instr::C).collect();
                letters.push(Instr::D(j));
                let s = Expr::star(any_of(&letters));
                parts.push(Expr::concat(vec![s.clone(), sym(Instr::D(j)), s]));
            }
            Expr::concat(parts)
        }
        FamilyTag::LBi => {
            // w_{j-1} ∈ {D_1..D_{j-1}, C_j}* with at least one C_j, w_k ∈ Δd*.
            let mut parts = Vec::new();
            for j in 1..=k {
                let mut letters: Vec<Instr> = (1..j).map(Instr::D).collect();
                letters.push(Instr::C(j));
                let s = Expr::star(any_of(&letters));
                parts.push(Expr::concat(vec![s.clone(), sym(Instr::C(j)), s]));
            }
            parts.push(Expr::star(any_of(&ds)));
            Expr::concat(parts)
        }
        other => return Err(Error::invalid(format!("no generator for family {other}"))),
    };
    let mut p = Pattern::new(expr)?;
    p.k = k;
    Ok(p)
}

/// Machine over Δ_k accepting the generator language `L_k^tag`.
pub fn generator(tag: FamilyTag, k: usize) -> Result<Machine> {
    generator_with(tag, k, &Budget::default())
}

pub fn generator_with(tag: FamilyTag, k: usize, budget: &Budget) -> Result<Machine> {
    eq_acceptor_with(&generator_envelope(tag, k)?, budget)
}
