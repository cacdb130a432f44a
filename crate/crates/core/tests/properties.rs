//! Property tests against brute-force oracles.

mod common;

use std::collections::{BTreeSet, HashSet};

use common::*;
use ncm_core::build::{compile_linear_set, greedy_split, LinearMode};
use ncm_core::decide::{
    contained_in_regular, is_letter_bounded, restrict_to_instructions, satisfies, Witness,
};
use ncm_core::flowsolve::{semilinear_member, solve, solve_unbounded, validate_witness};
use ncm_core::machine::{collapse_run, delta_alphabet, project_run, run_word, shortlex, SimCaps};
use ncm_core::oracle::{accepts, enumerate_behaviors, enumerate_language, random_machine, seeded_rng, RandomShape};
use ncm_core::patterns::{classify_families, eq_acceptor, parse_pattern, Pattern};
use ncm_core::{parse_machine, write_machine, Budget, Expr, FamilyTag, FlowSystem, LinearSet, Machine, SemilinearSet};
use proptest::prelude::*;

fn machine_from_seed(seed: u64) -> Machine {
    random_machine(&mut seeded_rng(seed), &RandomShape::default())
}

// ---------------------------------------------------------------------------
// Flow systems

#[derive(Debug, Clone)]
struct Graph {
    fs: FlowSystem,
}

fn graph() -> impl Strategy<Value = Graph> {
    (2usize..=6)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec((0..n, 0..n), 1..=9),
                prop::collection::btree_set(0..n, 1..=2),
                prop::option::of((0usize..9, 0usize..9)),
            )
        })
        .prop_map(|(n, edges, sinks, pair)| {
            let mut fs = FlowSystem::new(n, 0);
            for (a, b) in &edges {
                fs.add_edge(*a, *b);
            }
            fs.sinks = sinks.into_iter().collect();
            if let Some((x, y)) = pair {
                let (x, y) = (x % edges.len(), y % edges.len());
                if x != y {
                    fs.balance.push((vec![x], vec![y]));
                }
            }
            Graph { fs }
        })
}

/// Walks of at most `max` edges from the source ending at a sink whose
/// balance pairs hold.
fn brute_walk_exists(fs: &FlowSystem, max: usize) -> bool {
    fn go(fs: &FlowSystem, at: usize, left: usize, used: &mut Vec<u64>) -> bool {
        let balanced = fs.balance.iter().all(|(a, b)| {
            a.iter().map(|e| used[*e]).sum::<u64>() == b.iter().map(|e| used[*e]).sum::<u64>()
        });
        if fs.sinks.contains(&at) && balanced {
            return true;
        }
        if left == 0 {
            return false;
        }
        for (i, e) in fs.edges.iter().enumerate() {
            if e.from == at {
                used[i] += 1;
                let ok = go(fs, e.to, left - 1, used);
                used[i] -= 1;
                if ok {
                    return true;
                }
            }
        }
        false
    }
    go(fs, fs.source, max, &mut vec![0; fs.edges.len()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solve_agrees_with_walk_enumeration(g in graph()) {
        let (sol, _) = solve(&g.fs, &Budget::default()).unwrap();
        let brute = brute_walk_exists(&g.fs, 12);
        if brute {
            prop_assert!(sol.is_some());
        }
        match sol {
            Some(w) => prop_assert_eq!(validate_witness(&g.fs, &w), Ok(())),
            None => prop_assert!(!brute),
        }
    }

    #[test]
    fn unbounded_witnesses_pump(g in graph(), pick in 0usize..9) {
        let growth = vec![pick % g.fs.edges.len()];
        let (sol, _) = solve_unbounded(&g.fs, &growth, &Budget::default()).unwrap();
        if let Some(u) = sol {
            prop_assert_eq!(validate_witness(&g.fs, &u.base), Ok(()));
            for p in &u.pumped {
                prop_assert_eq!(validate_witness(&g.fs, p), Ok(()));
            }
            prop_assert!(u.circulation[growth[0]] > 0);
            let sizes: Vec<usize> = std::iter::once(&u.base).chain(&u.pumped).map(|w| w.walk.len()).collect();
            prop_assert!(sizes.windows(2).all(|s| s[0] < s[1]));
        }
    }
}

// ---------------------------------------------------------------------------
// Semilinear sets

fn linear_set(dim: usize) -> impl Strategy<Value = LinearSet> {
    (prop::collection::vec(0u64..=3, dim), prop::collection::vec(prop::collection::vec(0u64..=3, dim), 0..=3))
        .prop_map(|(constant, periods)| LinearSet { constant, periods })
}

/// All vectors with coordinates at most `cap` reachable from the constant.
fn brute_members(q: &LinearSet, cap: u64) -> HashSet<Vec<u64>> {
    let mut seen = HashSet::new();
    if q.constant.iter().any(|c| *c > cap) {
        return seen;
    }
    let mut stack = vec![q.constant.clone()];
    while let Some(v) = stack.pop() {
        if !seen.insert(v.clone()) {
            continue;
        }
        for p in &q.periods {
            let nv: Vec<u64> = v.iter().zip(p).map(|(a, b)| a + b).collect();
            if nv.iter().all(|x| *x <= cap) && nv != v {
                stack.push(nv);
            }
        }
    }
    seen
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn semilinear_member_matches_coefficient_search(q in linear_set(2)) {
        let members = brute_members(&q, 15);
        let s = SemilinearSet { dim: 2, components: vec![q] };
        for a in 0..=15u64 {
            for b in 0..=15u64 {
                let v = vec![a, b];
                prop_assert_eq!(semilinear_member(&s, &v).unwrap(), members.contains(&v), "{:?}", v);
            }
        }
    }

    #[test]
    fn compiled_linear_sets_accept_exactly_their_vectors(
        q in linear_set(2),
        ra in 1usize..=2,
        rb in 1usize..=2,
        lbi in any::<bool>(),
    ) {
        let q = LinearSet { periods: q.periods.into_iter().filter(|p| p.iter().any(|x| *x > 0)).collect(), ..q };
        let words = vec![vec!["a".to_string(); ra], vec!["b".to_string(); rb]];
        let mode = if lbi { LinearMode::LbiBdd } else { LinearMode::BdiLbd };
        let m = compile_linear_set(&q, &words, mode).unwrap();
        let members = brute_members(&q, 6);
        for a in 0..=6usize {
            for b in 0..=6usize {
                let w = [vec!["a".to_string(); ra * a], vec!["b".to_string(); rb * b]].concat();
                let got = accepts(&m, &w, &SimCaps::for_machine(&m, w.len())).unwrap();
                prop_assert_eq!(got, members.contains(&vec![a as u64, b as u64]), "({}, {})", a, b);
            }
        }
    }

    #[test]
    fn greedy_split_marginals(rows in prop::collection::vec(0u64..=10, 1..=5), seed in any::<u64>()) {
        let total: u64 = rows.iter().sum();
        let mut rng = seeded_rng(seed);
        let n = 1 + (seed % 4) as usize;
        let mut cuts: Vec<u64> = (0..n - 1).map(|_| rand::Rng::random_range(&mut rng, 0..=total)).collect();
        cuts.push(0);
        cuts.push(total);
        cuts.sort();
        let cols: Vec<u64> = cuts.windows(2).map(|p| p[1] - p[0]).collect();
        let s = greedy_split(&rows, &cols).unwrap();
        prop_assert_eq!(s.row_sums(), rows.clone());
        prop_assert_eq!(s.col_sums(), cols.clone());
        prop_assert_eq!(greedy_split(&rows, &cols).unwrap(), s);
    }
}

// ---------------------------------------------------------------------------
// Instruction expressions

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(Expr::Eps),
        prop::sample::select(vec!["C1", "D1", "C2", "D2"]).prop_map(Expr::sym),
    ];
    leaf.prop_recursive(3, 12, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Expr::Concat),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Expr::Union),
            inner.clone().prop_map(|e| Expr::Star(Box::new(e))),
            inner.clone().prop_map(|e| Expr::Plus(Box::new(e))),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::Shuffle(Box::new(a), Box::new(b))),
        ]
    })
}

/// Membership by the recursive definition of each operator.
fn matches(e: &Expr, w: &[String]) -> bool {
    match e {
        Expr::Eps => w.is_empty(),
        Expr::Sym(s) => w.len() == 1 && w[0] == *s,
        Expr::Union(v) => v.iter().any(|x| matches(x, w)),
        Expr::Concat(v) => match v.split_first() {
            None => w.is_empty(),
            Some((h, rest)) => {
                let tail = Expr::Concat(rest.to_vec());
                (0..=w.len()).any(|i| matches(h, &w[..i]) && matches(&tail, &w[i..]))
            }
        },
        Expr::Star(x) => w.is_empty() || (1..=w.len()).any(|i| matches(x, &w[..i]) && matches(e, &w[i..])),
        Expr::Plus(x) => (1..=w.len()).any(|i| matches(x, &w[..i]) && matches(&Expr::Star(x.clone()), &w[i..]))
            || matches(x, w),
        Expr::Shuffle(a, b) => (0u32..(1 << w.len())).any(|mask| {
            let (l, r): (Vec<_>, Vec<_>) = w.iter().enumerate().partition(|(i, _)| mask & (1 << i) != 0);
            let l: Vec<String> = l.into_iter().map(|(_, s)| s.clone()).collect();
            let r: Vec<String> = r.into_iter().map(|(_, s)| s.clone()).collect();
            matches(a, &l) && matches(b, &r)
        }),
    }
}

fn in_eq(w: &[ncm_core::Instr], k: usize) -> bool {
    use ncm_core::Instr;
    (1..=k).all(|j| {
        let cs = count(w, Instr::C(j));
        let ds = count(w, Instr::D(j));
        let last_c = w.iter().rposition(|x| *x == Instr::C(j));
        let first_d = w.iter().position(|x| *x == Instr::D(j));
        cs == ds && !matches!((last_c, first_d), (Some(c), Some(d)) if c > d)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn nfa_matches_recursive_definition(e in expr(), seed in any::<u64>()) {
        let alphabet = delta_alphabet(2);
        let nfa = e.to_nfa(&alphabet).unwrap();
        let mut rng = seeded_rng(seed);
        for _ in 0..1000 / 60 + 1 {
            let w = ncm_core::oracle::random_word(&mut rng, &alphabet, 5);
            prop_assert_eq!(nfa.accepts_word(&w), matches(&e, &w), "{:?}", w);
        }
        for w in words_over(&alphabet, 3) {
            prop_assert_eq!(nfa.accepts_word(&w), matches(&e, &w), "{:?}", w);
        }
    }

    #[test]
    fn eq_acceptor_is_the_balanced_ordered_part(e in expr()) {
        let mut p = Pattern::new(e.clone()).unwrap();
        p.k = 2;
        let m = eq_acceptor(&p).unwrap();
        let got: BTreeSet<Vec<String>> = enumerate_language(&m, &SimCaps::for_machine(&m, 8)).unwrap().words.into_iter().collect();
        let want: BTreeSet<Vec<String>> = balanced_words(2, 8)
            .into_iter()
            .filter(|w| in_eq(w, 2))
            .map(|w| w.iter().map(|i| i.to_string()).collect::<Vec<_>>())
            .filter(|w| matches(&e, w))
            .collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn classification_respects_template_subsumption(e in expr()) {
        let c = classify_families(&Pattern::new(e).unwrap());
        if c.tags.contains(&FamilyTag::LB) {
            prop_assert!(c.tags.contains(&FamilyTag::BD));
        }
        if c.tags.contains(&FamilyTag::LBiLBd) {
            prop_assert!(c.tags.contains(&FamilyTag::LB));
        }
        if c.derived.contains(&FamilyTag::SBD) {
            prop_assert!(c.tags.contains(&FamilyTag::BD));
        }
        prop_assert!(c.tags.contains(&FamilyTag::ALL));
    }
}

// ---------------------------------------------------------------------------
// Machines, runs and decisions

fn patterns_for(k: usize) -> Vec<&'static str> {
    if k == 1 {
        vec!["C1* D1*", "(C1 | D1)*", "C1* C1 D1*"]
    } else {
        vec!["C1* C2* D1* D2*", "(C1 | C2)* (D1 | D2)*", "C1* D1* C2* D2*", "C2* D2* C1* D1*"]
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn runs_step_correctly_and_collapse(seed in any::<u64>()) {
        let m = machine_from_seed(seed);
        let l = enumerate_language(&m, &SimCaps::for_machine(&m, 5)).unwrap();
        for w in l.words.iter().take(5) {
            let rs = run_word(&m, w, &SimCaps { max_total_steps: 20_000, ..SimCaps::for_machine(&m, w.len()) }).unwrap();
            for r in rs.runs.iter().take(5) {
                prop_assert_eq!(m.check_run(r), Ok(()));
                prop_assert_eq!(&project_run(&m, r).1, &r.input);
                let c = collapse_run(r);
                let distinct: HashSet<_> = c.configs.iter().collect();
                prop_assert_eq!(distinct.len(), c.configs.len());
                prop_assert_eq!(collapse_run(&c), c.clone());
                prop_assert_eq!(m.check_run(&c), Ok(()));
            }
        }
    }

    #[test]
    fn text_format_round_trips(seed in any::<u64>()) {
        let m = machine_from_seed(seed);
        prop_assert_eq!(parse_machine(&write_machine(&m)).unwrap(), m);
    }

    #[test]
    fn enumeration_is_monotone_and_ordered(seed in any::<u64>()) {
        let m = machine_from_seed(seed);
        let a = enumerate_language(&m, &SimCaps::for_machine(&m, 5)).unwrap();
        let b = enumerate_language(&m, &SimCaps::for_machine(&m, 6)).unwrap();
        prop_assert!(a.words.windows(2).all(|p| shortlex(&p[0], &p[1]).is_lt()));
        if !a.truncated {
            prop_assert!(a.words.iter().all(|w| b.contains(w)));
        }
    }

    #[test]
    fn satisfies_is_sound_against_behaviours(seed in any::<u64>(), pick in 0usize..4) {
        let m = machine_from_seed(seed);
        let pats = patterns_for(m.k);
        let mut p = parse_pattern(pats[pick % pats.len()]).unwrap();
        p.k = m.k;
        let b = Budget::default();
        let v = satisfies(&m, &p, &b).unwrap();
        let nfa = p.nfa(m.k).unwrap();
        let beh = enumerate_behaviors(&m, &SimCaps::for_machine(&m, 10)).unwrap();
        let outside = beh.words.iter().find(|w| !nfa.accepts_word(&w.iter().map(|i| i.to_string()).collect::<Vec<_>>()));
        if v.answer {
            prop_assert!(outside.is_none(), "yes, yet {:?} escapes", outside);
        } else if let Some(Witness::Behavior { run, .. }) = &v.witness {
            prop_assert_eq!(m.check_run(run), Ok(()));
        }
        if outside.is_some() {
            prop_assert!(!v.answer);
        }
    }

    #[test]
    fn restriction_shrinks_and_satisfies(seed in any::<u64>(), pick in 0usize..4) {
        let m = machine_from_seed(seed);
        let pats = patterns_for(m.k);
        let mut p = parse_pattern(pats[pick % pats.len()]).unwrap();
        p.k = m.k;
        let b = Budget::default();
        let r = restrict_to_instructions(&m, &p, &b).unwrap();
        let lr = enumerate_language(&r, &SimCaps::for_machine(&r, 8)).unwrap();
        let lm = enumerate_language(&m, &SimCaps::for_machine(&m, 8)).unwrap();
        prop_assert!(lr.words.iter().all(|w| lm.contains(w)));
        prop_assert!(satisfies(&r, &p, &b).unwrap().answer);
    }

    #[test]
    fn letter_boundedness_answers_recheck(seed in any::<u64>()) {
        let m = machine_from_seed(seed);
        let b = Budget::default();
        let v = is_letter_bounded(&m, &b).unwrap();
        if v.answer {
            let seq = v.sequence().unwrap().to_vec();
            let nfa = ncm_core::decide::bounded_nfa(&m.alphabet, &seq).unwrap();
            prop_assert!(contained_in_regular(&m, &nfa, &b).unwrap().answer);
        } else {
            let Some(Witness::Pumping { words }) = &v.witness else { panic!("no pumping certificate") };
            for w in words {
                prop_assert!(accepts(&m, w, &SimCaps::for_machine(&m, w.len())).unwrap(), "{:?}", w);
            }
        }
    }
}
