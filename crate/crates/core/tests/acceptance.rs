//! The twelve acceptance criteria, one pass/fail line each.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use ncm_core::build::{
    compile_linear_set, compile_two_positive, concat, distinct_normal_form, greedy_split, homomorphism_image,
    intersect_regular, inverse_homomorphism, reversal, sbd_form, trio_decomposition, union,
    LinearMode, SymbolMap,
};
use ncm_core::decide::{
    bd_with_bound, bd_with_bound_where, bounded_nfa, contained_in_regular, infer_family, is_empty, is_infinite,
    is_letter_bounded, is_m_bounded, membership, restrict_to_instructions, satisfies, Witness,
};
use ncm_core::machine::SimCaps;
use ncm_core::oracle::{bounded_equiv, enumerate_language, random_machine, random_word, seeded_rng, RandomShape};
use ncm_core::patterns::{eq_acceptor, generator, parse_pattern, parse_regex};
use ncm_core::{classify_families, Budget, FamilyTag, Instr, Machine, Word};
use rand::Rng;

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

fn same_language(a: &Machine, b: &Machine, len: usize, what: &str) -> Outcome {
    let eq = bounded_equiv(a, b, len).map_err(|e| e.to_string())?;
    ensure!(eq.equal(), "{what}: languages differ on {:?}", eq.counterexample);
    Ok(())
}

fn lang_set(m: &Machine, len: usize) -> BTreeSet<Word> {
    let l = enumerate_language(m, &SimCaps::for_machine(m, len)).unwrap();
    assert!(!l.truncated, "enumeration truncated");
    l.words.into_iter().collect()
}

fn c01_pattern_satisfaction() -> Outcome {
    let m = fixture("ex2.ncm");
    let b = Budget::default();
    let yes = satisfies(&m, &parse_pattern("C1* C2* D1* D2*").unwrap(), &b).map_err(|e| e.to_string())?;
    ensure!(yes.answer, "ex2 should satisfy C1* C2* D1* D2*");
    let e = parse_pattern("C1* D1* C2* D2*").unwrap();
    let no = satisfies(&m, &e, &b).map_err(|e| e.to_string())?;
    ensure!(!no.answer, "ex2 should not satisfy C1* D1* C2* D2*");
    let Some(Witness::Behavior { instrs, run }) = &no.witness else {
        return Err("missing counterexample run".into());
    };
    m.check_run(run)?;
    let labels: Vec<String> = instrs.iter().map(|i| i.to_string()).collect();
    ensure!(!e.nfa(2).unwrap().accepts_word(&labels), "counterexample behaviour lies in the pattern");
    Ok(())
}

fn c02_semilinear_compilation() -> Outcome {
    let m = fixture("ex3.ncm");
    let s = fixture_sl("ex3.sl");
    let ab = vec![w("a"), w("b")];
    for mode in [LinearMode::BdiLbd, LinearMode::LbiBdd] {
        let c = compile_linear_set(&s.components[0], &ab, mode).map_err(|e| e.to_string())?;
        ensure!(lang_set(&c, 25).len() >= 10, "compiled language nearly empty");
        same_language(&c, &m, 25, &format!("linear set {mode:?}"))?;
    }
    let c = compile_two_positive(&s, &w("a b")).map_err(|e| e.to_string())?;
    same_language(&c, &m, 25, "2-positive compilation")?;
    let cls = classify_families(&parse_pattern("(C1 C2)* (C3 C4)* D1* D3* D2* D4*").unwrap());
    let want: BTreeSet<FamilyTag> = [FamilyTag::BDiLBd, FamilyTag::BD, FamilyTag::LBd, FamilyTag::ALL].into();
    ensure!(cls.tags == want, "classification {:?}", cls.tags);
    Ok(())
}

fn c03_generators() -> Outcome {
    const LEN: usize = 12;
    for k in 1..=2 {
        let cands = balanced_words(k, LEN);
        let preds: Vec<(FamilyTag, BTreeSet<Vec<Instr>>)> = vec![
            (FamilyTag::LB, cands.iter().filter(|x| in_lb(x, k)).cloned().collect()),
            (FamilyTag::LBiLBd, cands.iter().filter(|x| in_lbi_lbd(x, k)).cloned().collect()),
            (FamilyTag::BDiLBd, block_family(k, LEN, true)),
            (FamilyTag::LBiBDd, block_family(k, LEN, false)),
            (FamilyTag::LBd, cands.iter().filter(|x| in_lbd(x, k)).cloned().collect()),
            (FamilyTag::LBi, cands.iter().filter(|x| in_lbi(x, k)).cloned().collect()),
        ];
        for (tag, want) in preds {
            let g = generator(tag, k).map_err(|e| e.to_string())?;
            let got: BTreeSet<Vec<Instr>> = lang_set(&g, LEN).iter().map(|x| instrs(x)).collect();
            if got != want {
                let extra = got.difference(&want).next();
                let missing = want.difference(&got).next();
                return Err(format!("{tag} k={k}: extra {extra:?}, missing {missing:?}"));
            }
        }
    }
    Ok(())
}

fn c04_trio_round_trip() -> Outcome {
    let mut rng = seeded_rng(4);
    let b = Budget::default();
    let mut words = 0;
    for i in 0..20 {
        let m = random_machine(&mut rng, &RandomShape::default());
        let d = trio_decomposition(&m, None).map_err(|e| e.to_string())?;
        let r = d.reconstruct(&b).map_err(|e| e.to_string())?;
        same_language(&r, &m, 8, &format!("machine {i}"))?;
        words += lang_set(&m, 8).len();
    }
    ensure!(words >= 100, "random languages too small to be informative ({words} words)");
    Ok(())
}

fn c05_greedy_split() -> Outcome {
    let mut rng = seeded_rng(5);
    for _ in 0..500 {
        let total = rng.random_range(0..=40u64);
        let mut parts = |n: usize| {
            let mut cuts: Vec<u64> = (0..n - 1).map(|_| rng.random_range(0..=total)).collect();
            cuts.push(0);
            cuts.push(total);
            cuts.sort();
            cuts.windows(2).map(|p| p[1] - p[0]).collect::<Vec<u64>>()
        };
        let rows = parts(1 + (total % 5) as usize);
        let cols = parts(1 + (total % 4) as usize);
        let s = greedy_split(&rows, &cols).map_err(|e| e.to_string())?;
        ensure!(s.row_sums() == rows && s.col_sums() == cols, "marginals of {rows:?} x {cols:?}");
    }
    let s = greedy_split(&[3, 2], &[4, 1]).map_err(|e| e.to_string())?;
    ensure!(s.entries == vec![vec![3, 0], vec![1, 1]], "worked example gave {:?}", s.entries);
    Ok(())
}

fn c06_distinct_normal_form() -> Outcome {
    let b = Budget::default();
    for text in ["C1* C2* C1* D1* D2*", "C1* D1* C1* D1*"] {
        let p = parse_pattern(text).unwrap();
        let n = distinct_normal_form(&p, &b).map_err(|e| e.to_string())?;
        same_language(&n, &eq_acceptor(&p).unwrap(), 10, text)?;
        let v = infer_family(&n, FamilyTag::LB, &b).map_err(|e| e.to_string())?;
        ensure!(v.answer, "{text}: normal form is not letter-bounded");
        let seq = v.sequence().unwrap();
        let distinct: BTreeSet<&Word> = seq.iter().collect();
        ensure!(distinct.len() == seq.len(), "{text}: sequence {seq:?} repeats a letter");
    }
    Ok(())
}

fn c07_decision_consistency() -> Outcome {
    let mut rng = seeded_rng(7);
    let b = Budget::default();
    for i in 0..100 {
        let m = random_machine(&mut rng, &RandomShape::default());
        let lang = enumerate_language(&m, &SimCaps::for_machine(&m, 8)).unwrap();
        let e = is_empty(&m, &b).map_err(|e| e.to_string())?;
        if e.answer {
            ensure!(lang.words.is_empty(), "machine {i}: empty but accepts {:?}", lang.words[0]);
        } else {
            let run = e.run().ok_or("nonempty without a run")?;
            m.check_run(run).map_err(|s| format!("machine {i}: {s}"))?;
        }
        for x in lang.words.iter().take(30) {
            let v = membership(&m, x, &b).map_err(|e| e.to_string())?;
            ensure!(v.answer, "machine {i}: {x:?} rejected");
            m.check_run(v.run().unwrap())?;
        }
        if !lang.truncated {
            for _ in 0..30 {
                let x = random_word(&mut rng, &m.alphabet, 8);
                let v = membership(&m, &x, &b).map_err(|e| e.to_string())?;
                ensure!(v.answer == lang.contains(&x), "machine {i}: membership of {x:?}");
            }
        }
        let inf = is_infinite(&m, &b).map_err(|e| e.to_string())?;
        if inf.answer {
            ensure!(!e.answer, "machine {i}: infinite and empty");
            let Some(Witness::Pumping { words }) = &inf.witness else {
                return Err(format!("machine {i}: infinite without pumping words"));
            };
            ensure!(words.windows(2).all(|p| p[0].len() < p[1].len()), "machine {i}: no growth");
            for x in words {
                ensure!(simulates(&m, x), "machine {i}: pumped word {x:?} not accepted");
            }
        }
    }
    Ok(())
}

fn c08_boundedness() -> Outcome {
    let b = Budget::default();
    let anbn = fixture("anbn.ncm");
    let v = is_letter_bounded(&anbn, &b).map_err(|e| e.to_string())?;
    ensure!(v.answer && v.sequence() == Some(&[w("a"), w("b")][..]), "a^n b^n: {}", v.report());
    let re = parse_regex("a* b*", &anbn.alphabet).unwrap().to_nfa(&anbn.alphabet).unwrap();
    ensure!(contained_in_regular(&anbn, &re, &b).map_err(|e| e.to_string())?.answer, "a^n b^n not in a*b*");
    let ab = fixture("ab-star.ncm");
    let v = is_letter_bounded(&ab, &b).map_err(|e| e.to_string())?;
    ensure!(!v.answer, "(ab)* reported letter-bounded");
    let v = is_m_bounded(&ab, 2, &b).map_err(|e| e.to_string())?;
    ensure!(v.answer, "(ab)* should be 2-bounded");
    let seq = v.sequence().ok_or("no word sequence")?.to_vec();
    ensure!(seq.contains(&w("a b")), "sequence {seq:?} lacks ab");
    let nfa = bounded_nfa(&ab.alphabet, &seq).unwrap();
    ensure!(contained_in_regular(&ab, &nfa, &b).map_err(|e| e.to_string())?.answer, "containment recheck failed");
    Ok(())
}

fn c09_bounded_patterns() -> Outcome {
    let b = Budget::default();
    let v = bd_with_bound(&fixture("ex2.ncm"), 4, &b).map_err(|e| e.to_string())?;
    ensure!(v.answer, "ex2 with n=4: {}", v.report());
    let v = bd_with_bound(&fixture("anbncn.ncm"), 4, &b).map_err(|e| e.to_string())?;
    let Some(Witness::Pattern(p)) = &v.witness else {
        return Err(format!("anbncn: {}", v.report()));
    };
    ensure!(v.answer && p.replace(' ', "").contains("C1C2"), "anbncn pattern {p}");
    let v = bd_with_bound(&fixture("ex2.ncm"), 1, &b).map_err(|e| e.to_string())?;
    ensure!(!v.answer, "ex2 with n=1 should fail");
    Ok(())
}

fn c10_closures() -> Outcome {
    let mut rng = seeded_rng(10);
    let b = Budget::default();
    let shape = RandomShape { max_states: 3, max_transitions: 6, ..RandomShape::default() };
    let regexes = ["a* b*", "(a | b)* a", "(a b)*", "b (a | b)*"];
    for i in 0..20 {
        let m1 = random_machine(&mut rng, &shape);
        let m2 = random_machine(&mut rng, &shape);
        let l1 = lang_set(&m1, 8);
        let l2 = lang_set(&m2, 8);
        let u = lang_set(&union(&m1, &m2).map_err(|e| e.to_string())?, 8);
        ensure!(u == l1.union(&l2).cloned().collect(), "pair {i}: union");
        let c = lang_set(&concat(&m1, &m2).map_err(|e| e.to_string())?, 8);
        let want: BTreeSet<Word> =
            l1.iter().flat_map(|x| l2.iter().map(move |y| [x.clone(), y.clone()].concat())).filter(|z| z.len() <= 8).collect();
        ensure!(c == want, "pair {i}: concatenation");
        let r = lang_set(&reversal(&m1).map_err(|e| e.to_string())?, 8);
        ensure!(r == l1.iter().map(|x| x.iter().rev().cloned().collect()).collect(), "pair {i}: reversal");
        let mut h = SymbolMap::new();
        for a in ["a", "b"] {
            let n = rng.random_range(1..=2);
            let img: Vec<&str> = (0..n).map(|_| ["a", "b", "c"][rng.random_range(0..3)]).collect();
            h = h.with(a, &img);
        }
        let hm = lang_set(&homomorphism_image(&m1, &h).map_err(|e| e.to_string())?, 8);
        let want: BTreeSet<Word> = l1.iter().map(|x| h.apply(x).unwrap()).filter(|z| z.len() <= 8).collect();
        ensure!(hm == want, "pair {i}: image under {h}");
        let mut g = SymbolMap::new();
        for a in ["c", "d"] {
            let n = rng.random_range(0..=2);
            let img: Vec<&str> = (0..n).map(|_| ["a", "b"][rng.random_range(0..2)]).collect();
            g = g.with(a, &img);
        }
        let inv = inverse_homomorphism(&m2, &g).map_err(|e| e.to_string())?;
        let got = lang_set(&inv, 8);
        let want: BTreeSet<Word> =
            words_over(&w("c d"), 8).into_iter().filter(|x| simulates(&m2, &g.apply(x).unwrap())).collect();
        ensure!(got == want, "pair {i}: inverse image under {g}");
        let re = regexes[i % regexes.len()];
        let nfa = parse_regex(re, &m1.alphabet).unwrap().to_nfa(&m1.alphabet).unwrap();
        let cut = lang_set(&intersect_regular(&m1, &nfa, &b).map_err(|e| e.to_string())?, 8);
        ensure!(cut == l1.iter().filter(|x| nfa.accepts_word(x)).cloned().collect(), "pair {i}: intersection with {re}");
    }
    // Erasing image: a^n b^n with b erased is a*.
    let anbn = fixture("anbn.ncm");
    let erase = SymbolMap::new().with("a", &["a"]).with::<&str>("b", &[]);
    let a_star = lang_set(&homomorphism_image(&anbn, &erase).map_err(|e| e.to_string())?, 8);
    ensure!(a_star == (0..=8).map(|n| vec!["a".to_string(); n]).collect(), "erasing image of a^n b^n");
    // w $ a^i b^j reversed is b^j a^i $ w^R.
    let rev = lang_set(&reversal(&fixture("ex4a-m1.ncm")).map_err(|e| e.to_string())?, 7);
    let want: BTreeSet<Word> = words_over(&w("a b $"), 7)
        .into_iter()
        .filter(|x| {
            let Some(p) = x.iter().position(|s| s == "$") else { return false };
            let (head, tail) = (&x[..p], &x[p + 1..]);
            let j = head.iter().take_while(|s| *s == "b").count();
            let i = head.len() - j;
            head[j..].iter().all(|s| s == "a")
                && !tail.contains(&"$".to_string())
                && tail.iter().filter(|s| *s == "a").count() == i
                && tail.iter().filter(|s| *s == "b").count() == j
        })
        .collect();
    ensure!(rev == want, "reversal of the separator machine");
    Ok(())
}

fn c11_restriction() -> Outcome {
    let b = Budget::default();
    let m = fixture("two-strategy.ncm");
    let e = parse_pattern("C1* D1*").unwrap();
    ensure!(!satisfies(&m, &e, &b).map_err(|e| e.to_string())?.answer, "source already satisfies the pattern");
    let r = restrict_to_instructions(&m, &e, &b).map_err(|e| e.to_string())?;
    same_language(&r, &m, 8, "restriction")?;
    ensure!(satisfies(&r, &e, &b).map_err(|e| e.to_string())?.answer, "restricted machine violates the pattern");
    Ok(())
}

fn c12_sbd_form() -> Outcome {
    let b = Budget::default();
    let s = sbd_form(2).map_err(|e| e.to_string())?;
    same_language(&s, &generator(FamilyTag::BDiLBd, 2).unwrap(), 12, "sbd form vs generator")?;
    let v = bd_with_bound_where(&s, 8, &b, |ws| ws.iter().all(|x| x.len() <= 2)).map_err(|e| e.to_string())?;
    ensure!(v.answer, "no pattern with words of length at most 2: {}", v.report());
    Ok(())
}

#[test]
fn acceptance_criteria() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("01 pattern satisfaction with counterexample run", c01_pattern_satisfaction),
        ("02 semilinear compilation and classification", c02_semilinear_compilation),
        ("03 generator languages", c03_generators),
        ("04 trio decomposition round trip", c04_trio_round_trip),
        ("05 greedy split marginals", c05_greedy_split),
        ("06 distinct-letter normal form", c06_distinct_normal_form),
        ("07 emptiness, membership, infiniteness", c07_decision_consistency),
        ("08 letter and word boundedness", c08_boundedness),
        ("09 bounded patterns of given length", c09_bounded_patterns),
        ("10 closure constructions", c10_closures),
        ("11 restriction to an instruction language", c11_restriction),
        ("12 SBD form", c12_sbd_form),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(()) => println!("PASS criterion {name} ({secs:.1}s)"),
            Err(e) => {
                println!("FAIL criterion {name} ({secs:.1}s): {e}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
