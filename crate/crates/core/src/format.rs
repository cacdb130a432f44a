//! Text formats for machines and semilinear sets.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::flowsolve::{LinearSet, SemilinearSet};
use crate::machine::{Machine, Transition};

struct Line<'a> {
    no: usize,
    toks: Vec<(usize, &'a str)>,
}

fn lines(text: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let mut toks = Vec::new();
        let mut start = None;
        for (j, c) in body.char_indices() {
            if c.is_whitespace() {
                if let Some(s) = start.take() {
                    toks.push((s + 1, &body[s..j]));
                }
            } else if start.is_none() {
                start = Some(j);
            }
        }
        if let Some(s) = start {
            toks.push((s + 1, &body[s..]));
        }
        if !toks.is_empty() {
            out.push(Line { no: i + 1, toks });
        }
    }
    out
}

/// Parses the machine text format. `*` guard characters expand to both
/// variants; the expanded copies are labelled `<label>/<guard>`, and
/// variants that would decrement a zero counter are dropped.
pub fn parse_machine(text: &str) -> Result<Machine> {
    let ls = lines(text);
    let mut it = ls.iter();
    let first = it.next().ok_or_else(|| Error::parse(1, 1, "empty file, expected 'ncm'"))?;
    if first.toks[0].1 != "ncm" || first.toks.len() != 1 {
        return Err(Error::parse(first.no, first.toks[0].0, "expected header 'ncm'"));
    }
    let mut k: Option<usize> = None;
    let mut alphabet: Option<Vec<String>> = None;
    let mut states: Option<Vec<String>> = None;
    let mut initial: Option<(usize, usize, String)> = None;
    let mut finals: Option<(usize, Vec<(usize, String)>)> = None;
    let mut trans_lines = Vec::new();
    for l in it {
        let (col, head) = l.toks[0];
        let args = &l.toks[1..];
        let once = |seen: bool| {
            if seen {
                Err(Error::parse(l.no, col, format!("duplicate '{head}' directive")))
            } else {
                Ok(())
            }
        };
        match head {
            "counters" => {
                once(k.is_some())?;
                if args.len() != 1 {
                    return Err(Error::parse(l.no, col, "expected 'counters <k>'"));
                }
                let v: usize = args[0]
                    .1
                    .parse()
                    .map_err(|_| Error::parse(l.no, args[0].0, "expected a counter count"))?;
                if v == 0 {
                    return Err(Error::parse(l.no, args[0].0, "counter count must be at least 1"));
                }
                k = Some(v);
            }
            "alphabet" => {
                once(alphabet.is_some())?;
                alphabet = Some(args.iter().map(|t| t.1.to_string()).collect());
            }
            "states" => {
                once(states.is_some())?;
                if args.is_empty() {
                    return Err(Error::parse(l.no, col, "expected at least one state"));
                }
                states = Some(args.iter().map(|t| t.1.to_string()).collect());
            }
            "initial" => {
                once(initial.is_some())?;
                if args.len() != 1 {
                    return Err(Error::parse(l.no, col, "expected 'initial <q>'"));
                }
                initial = Some((l.no, args[0].0, args[0].1.to_string()));
            }
            "final" => {
                once(finals.is_some())?;
                finals = Some((l.no, args.iter().map(|t| (t.0, t.1.to_string())).collect()));
            }
            "trans" => trans_lines.push(l),
            _ => return Err(Error::parse(l.no, col, format!("unknown directive '{head}'"))),
        }
    }
    let missing = |what: &str| Error::parse(first.no, 1, format!("missing '{what}' directive"));
    let k = k.ok_or_else(|| missing("counters"))?;
    let alphabet = alphabet.ok_or_else(|| missing("alphabet"))?;
    let states = states.ok_or_else(|| missing("states"))?;
    let (iline, icol, iname) = initial.ok_or_else(|| missing("initial"))?;
    let (fline, fnames) = finals.unwrap_or((first.no, Vec::new()));
    let mut seen = HashSet::new();
    for s in &states {
        if !seen.insert(s) {
            return Err(Error::parse(first.no, 1, format!("duplicate state name '{s}'")));
        }
    }
    let mut seen = HashSet::new();
    for s in &alphabet {
        if s == "@" {
            return Err(Error::parse(first.no, 1, "'@' is reserved for λ"));
        }
        if !seen.insert(s) {
            return Err(Error::parse(first.no, 1, format!("duplicate symbol '{s}'")));
        }
    }
    let state_of = |line: usize, col: usize, s: &str| {
        states
            .iter()
            .position(|x| x == s)
            .ok_or_else(|| Error::parse(line, col, format!("undeclared state '{s}'")))
    };
    let initial = state_of(iline, icol, &iname)?;
    let mut finals = std::collections::BTreeSet::new();
    for (col, f) in &fnames {
        finals.insert(state_of(fline, *col, f)?);
    }
    let mut transitions = Vec::new();
    let mut labels = HashSet::new();
    for l in trans_lines {
        let t = &l.toks;
        if t.len() != 6 + k {
            return Err(Error::parse(
                l.no,
                t[0].0,
                format!("expected 'trans <label> <src> <in> <guard> <dst>' plus {k} deltas, got {} fields", t.len() - 1),
            ));
        }
        let label = t[1].1.to_string();
        if !labels.insert(label.clone()) {
            return Err(Error::parse(l.no, t[1].0, format!("duplicate label '{label}'")));
        }
        let src = state_of(l.no, t[2].0, t[2].1)?;
        let input = if t[3].1 == "@" {
            None
        } else {
            Some(
                alphabet
                    .iter()
                    .position(|a| a == t[3].1)
                    .ok_or_else(|| Error::parse(l.no, t[3].0, format!("symbol '{}' not in alphabet", t[3].1)))?,
            )
        };
        let guard_str = t[4].1;
        if guard_str.chars().count() != k {
            return Err(Error::parse(l.no, t[4].0, format!("guard '{guard_str}' must have length {k}")));
        }
        let mut partial = Vec::with_capacity(k);
        for (j, c) in guard_str.chars().enumerate() {
            partial.push(match c {
                'z' => Some(false),
                'p' => Some(true),
                '*' => None,
                _ => return Err(Error::parse(l.no, t[4].0 + j, format!("guard character '{c}' not in z, p, *"))),
            });
        }
        let dst = state_of(l.no, t[5].0, t[5].1)?;
        let mut delta = Vec::with_capacity(k);
        for (col, d) in &t[6..] {
            let v: i8 = match *d {
                "-1" => -1,
                "0" => 0,
                "1" | "+1" => 1,
                _ => return Err(Error::parse(l.no, *col, format!("delta '{d}' not in -1, 0, 1"))),
            };
            delta.push(v);
        }
        for i in 0..k {
            if partial[i] == Some(false) && delta[i] < 0 {
                return Err(Error::parse(
                    l.no,
                    t[4].0 + i,
                    format!("counter {} is decremented under a zero guard", i + 1),
                ));
            }
        }
        let expanded = crate::machine::expand_guard(&partial);
        let wildcard = partial.iter().any(|g| g.is_none());
        for g in expanded {
            if g.iter().zip(&delta).any(|(g, d)| !*g && *d < 0) {
                continue;
            }
            let label = if wildcard { format!("{label}/{}", guard_string(&g)) } else { label.clone() };
            transitions.push(Transition { label, src, input, guard: g, dst, delta: delta.clone() });
        }
    }
    let m = Machine { k, states, alphabet, transitions, initial, finals };
    let mut lbl = HashSet::new();
    for t in &m.transitions {
        if !lbl.insert(&t.label) {
            return Err(Error::Structure(format!("expanded label '{}' collides with another label", t.label)));
        }
    }
    m.check_structure()?;
    Ok(m)
}

pub fn guard_string(g: &[bool]) -> String {
    g.iter().map(|p| if *p { 'p' } else { 'z' }).collect()
}

pub fn write_machine(m: &Machine) -> String {
    let mut s = String::from("ncm\n");
    let _ = writeln!(s, "counters {}", m.k);
    let _ = writeln!(s, "alphabet {}", m.alphabet.join(" ").trim_end());
    let _ = writeln!(s, "states {}", m.states.join(" "));
    let _ = writeln!(s, "initial {}", m.states[m.initial]);
    let fin: Vec<&str> = m.finals.iter().map(|f| m.states[*f].as_str()).collect();
    let _ = writeln!(s, "final {}", fin.join(" ").trim_end());
    for t in &m.transitions {
        let input = t.input.map_or("@", |a| m.alphabet[a].as_str());
        let deltas: Vec<String> = t.delta.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(
            s,
            "trans {} {} {} {} {} {}",
            t.label,
            m.states[t.src],
            input,
            guard_string(&t.guard),
            m.states[t.dst],
            deltas.join(" ")
        );
    }
    s
}

pub fn parse_semilinear(text: &str) -> Result<SemilinearSet> {
    let ls = lines(text);
    let mut it = ls.iter();
    let first = it.next().ok_or_else(|| Error::parse(1, 1, "empty file, expected 'semilinear dim=<n>'"))?;
    let dim = match (first.toks.first(), first.toks.get(1), first.toks.len()) {
        (Some((_, "semilinear")), Some((col, d)), 2) => d
            .strip_prefix("dim=")
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| Error::parse(first.no, *col, "expected 'dim=<n>'"))?,
        _ => return Err(Error::parse(first.no, 1, "expected header 'semilinear dim=<n>'")),
    };
    let mut comps: Vec<LinearSet> = Vec::new();
    for l in it {
        let (col, head) = l.toks[0];
        let mut v = Vec::with_capacity(dim);
        for (c, x) in &l.toks[1..] {
            v.push(x.parse::<u64>().map_err(|_| Error::parse(l.no, *c, format!("expected a natural number, got '{x}'")))?);
        }
        if v.len() != dim {
            return Err(Error::parse(l.no, col, format!("expected {dim} coordinates, got {}", v.len())));
        }
        match head {
            "linear" => comps.push(LinearSet { constant: v, periods: Vec::new() }),
            "period" => comps
                .last_mut()
                .ok_or_else(|| Error::parse(l.no, col, "'period' before any 'linear'"))?
                .periods
                .push(v),
            _ => return Err(Error::parse(l.no, col, format!("unknown directive '{head}'"))),
        }
    }
    Ok(SemilinearSet { dim, components: comps })
}

pub fn write_semilinear(s: &SemilinearSet) -> String {
    let mut out = format!("semilinear dim={}\n", s.dim);
    let join = |v: &[u64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    for c in &s.components {
        let _ = writeln!(out, "linear {}", join(&c.constant));
        for p in &c.periods {
            let _ = writeln!(out, "period {}", join(p));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "ncm\ncounters 1\nalphabet a b\nstates q f # two states\ninitial q\nfinal f\n\
        trans x q a * q 1\ntrans y q b p f -1\ntrans e q @ z f 0\n";

    #[test]
    fn star_guard_expands() {
        let m = parse_machine(SMALL).unwrap();
        let labels: Vec<&str> = m.transitions.iter().map(|t| t.label.as_str()).collect();
        assert_eq!(labels, ["x/z", "x/p", "y", "e"]);
    }

    #[test]
    fn round_trip() {
        let m = parse_machine(SMALL).unwrap();
        assert_eq!(parse_machine(&write_machine(&m)).unwrap(), m);
    }

    #[test]
    fn errors_carry_positions() {
        let bad = SMALL.replace("trans y q b p f -1", "trans y q b pp f -1");
        match parse_machine(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
        let dup = SMALL.replace("trans e", "trans y");
        assert!(matches!(parse_machine(&dup), Err(Error::Parse { line: 9, .. })));
        let dangling = SMALL.replace("z f 0", "z g 0");
        assert!(parse_machine(&dangling).is_err());
    }

    #[test]
    fn semilinear_round_trip() {
        let s = parse_semilinear("semilinear dim=2\nlinear 2 3\nperiod 1 2\nperiod 2 5\n").unwrap();
        assert_eq!(s.components.len(), 1);
        assert_eq!(s.components[0].periods.len(), 2);
        assert_eq!(parse_semilinear(&write_semilinear(&s)).unwrap(), s);
        assert!(parse_semilinear("semilinear dim=2\nperiod 1 1\n").is_err());
    }
}
