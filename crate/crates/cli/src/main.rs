use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ncm_core::build::{self, LinearMode, SymbolMap};
use ncm_core::decide::{self, Verdict};
use ncm_core::machine::{render_instrs, render_word, tokenize_word, validate_well_formed, SimCaps};
use ncm_core::oracle::{self, EquivStatus};
use ncm_core::patterns::{self, parse_pattern, parse_regex, Pattern};
use ncm_core::{parse_machine, parse_semilinear, write_machine, Budget, Error, FamilyTag, Machine, SemilinearSet};

#[derive(Parser)]
#[command(name = "ncm", version, about = "Workbench for reversal-bounded counter machines and instruction languages")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Output style.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Work limit shared by solver nodes and automaton states.
    #[arg(long, global = true, default_value_t = Budget::DEFAULT)]
    budget: u64,
    /// Word length bound for enumeration and comparison.
    #[arg(long, global = true, default_value_t = 8)]
    max_len: usize,
    /// Seed for sampled checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClosureOp {
    Union,
    Concat,
    Reversal,
    Hom,
    Invhom,
    Intersect,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check well-formedness (one reversal, one counter per step, zero at acceptance).
    Validate { machine: PathBuf },
    /// Decide whether a word is accepted.
    Member { machine: PathBuf, word: String },
    /// List accepted words up to --max-len, one per line.
    Enumerate { machine: PathBuf },
    /// Decide emptiness.
    Empty { machine: PathBuf },
    /// Decide whether the language is infinite.
    Infinite { machine: PathBuf },
    /// Decide whether every accepting run follows an instruction pattern.
    Satisfies {
        machine: PathBuf,
        #[arg(long)]
        pattern: String,
    },
    /// Keep only the runs that follow an instruction pattern.
    Restrict {
        machine: PathBuf,
        #[arg(long)]
        pattern: String,
    },
    /// Syntactic family tags of an instruction pattern.
    Classify {
        #[arg(long)]
        pattern: String,
    },
    /// Decide membership of a machine in a letter-bounded family.
    Infer {
        machine: PathBuf,
        #[arg(long)]
        family: FamilyTag,
    },
    /// Decide whether the language lies in a_1* ... a_n* for letters.
    LetterBounded { machine: PathBuf },
    /// Decide whether the language lies in w_1* ... w_n* with |w_i| <= m.
    MBounded {
        machine: PathBuf,
        #[arg(long)]
        m: usize,
    },
    /// Search an instruction pattern w_1* ... w_r* of total length <= n.
    BdBounded {
        machine: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Compile one linear set over words into a machine.
    CompileLinear {
        semilinear: PathBuf,
        /// Comma-separated words, one per coordinate.
        #[arg(long)]
        words: String,
        #[arg(long, default_value = "bdi-lbd")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        component: usize,
    },
    /// Compile a 2-positive semilinear set over distinct letters.
    #[command(name = "compile-2positive")]
    Compile2positive {
        semilinear: PathBuf,
        /// Letters, one per coordinate.
        #[arg(long)]
        letters: String,
    },
    /// Machine for a generator language.
    Generator {
        #[arg(long)]
        family: FamilyTag,
        #[arg(long)]
        k: usize,
    },
    /// Closure constructions.
    Closure {
        #[arg(value_enum)]
        op: ClosureOp,
        machine: PathBuf,
        other: Option<PathBuf>,
        /// Symbol map such as "a=x y, b=" for hom and invhom.
        #[arg(long)]
        map: Option<String>,
        /// Regular expression for intersect.
        #[arg(long)]
        regex: Option<String>,
    },
    /// Distinct-letter normal form of a letter-bounded pattern.
    Normalize {
        #[arg(long)]
        pattern: String,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Split a machine into a regular part and an I_eq language.
    Decompose {
        machine: PathBuf,
        #[arg(long)]
        pattern: Option<String>,
    },
    /// Machine in SBD form for the BDiLBd generator.
    SbdForm {
        #[arg(long)]
        k: usize,
    },
    /// Compare two languages up to --max-len, plus sampled longer words.
    Compare { machine: PathBuf, other: PathBuf },
}

struct Report {
    text: String,
    json: Value,
}

impl Report {
    fn verdict(v: &Verdict) -> Report {
        Report {
            text: v.report(),
            json: json!({
                "answer": v.answer,
                "witness": v.witness.as_ref().map(|w| w.to_string()),
                "certificate": v.certificate,
                "budget_used": v.budget_used,
            }),
        }
    }

    fn machine(m: &Machine) -> Report {
        let text = write_machine(m);
        Report {
            json: json!({ "states": m.states.len(), "counters": m.k, "transitions": m.transitions.len(), "machine": text }),
            text: text.trim_end().to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

fn load_machine(path: &Path) -> Result<Machine, Error> {
    parse_machine(&read(path)?).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

fn load_semilinear(path: &Path) -> Result<SemilinearSet, Error> {
    parse_semilinear(&read(path)?).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

fn pattern_for(text: &str, k: usize) -> Result<Pattern, Error> {
    let mut p = parse_pattern(text)?;
    p.k = p.k.max(k);
    Ok(p)
}

fn list(items: &[String], sep: &str) -> Vec<String> {
    items.iter().flat_map(|s| s.split(sep)).map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn second(other: &Option<PathBuf>) -> Result<Machine, Error> {
    let path = other.as_ref().ok_or_else(|| Error::invalid("this operation needs a second machine"))?;
    load_machine(path)
}

fn dispatch(cli: &Cli) -> Result<Report, Error> {
    let budget = Budget::new(cli.budget);
    let b = &budget;
    Ok(match &cli.cmd {
        Cmd::Validate { machine } => {
            let m = load_machine(machine)?;
            let r = validate_well_formed(&m)?;
            let lines: Vec<String> = r
                .violations
                .iter()
                .map(|v| {
                    format!("{} {} reachable={} accepting_path={}", v.kind, v.evidence, yes(v.reachable), yes(v.on_accepting_path))
                })
                .collect();
            let head = format!(
                "well_formed={} deterministic={} violations={}",
                yes(r.is_well_formed),
                yes(r.is_deterministic),
                lines.len()
            );
            Report {
                text: std::iter::once(head).chain(lines.iter().cloned()).collect::<Vec<_>>().join("\n"),
                json: json!({
                    "well_formed": r.is_well_formed,
                    "deterministic": r.is_deterministic,
                    "violations": lines,
                }),
            }
        }
        Cmd::Member { machine, word } => {
            let m = load_machine(machine)?;
            let w = tokenize_word(word, &m.alphabet)?;
            Report::verdict(&decide::membership(&m, &w, b)?)
        }
        Cmd::Enumerate { machine } => {
            let m = load_machine(machine)?;
            let l = oracle::enumerate_language(&m, &SimCaps::for_machine(&m, cli.max_len))?;
            let words: Vec<String> = l.words.iter().map(|w| render_word(w)).collect();
            let mut text = words.join("\n");
            if l.truncated {
                text.push_str("\n# truncated");
            }
            Report { text: text.trim_start().to_string(), json: json!({ "words": words, "truncated": l.truncated }) }
        }
        Cmd::Empty { machine } => Report::verdict(&decide::is_empty(&load_machine(machine)?, b)?),
        Cmd::Infinite { machine } => Report::verdict(&decide::is_infinite(&load_machine(machine)?, b)?),
        Cmd::Satisfies { machine, pattern } => {
            let m = load_machine(machine)?;
            Report::verdict(&decide::satisfies(&m, &pattern_for(pattern, m.k)?, b)?)
        }
        Cmd::Restrict { machine, pattern } => {
            let m = load_machine(machine)?;
            Report::machine(&decide::restrict_to_instructions(&m, &pattern_for(pattern, m.k)?, b)?)
        }
        Cmd::Classify { pattern } => {
            let c = patterns::classify_families(&parse_pattern(pattern)?);
            let names = |s: &std::collections::BTreeSet<FamilyTag>| s.iter().map(|t| t.name()).collect::<Vec<_>>();
            let (tags, derived, distinct) = (names(&c.tags), names(&c.derived), names(&c.distinct));
            let text = format!(
                "tags={} derived={} distinct={}",
                join_or_none(&tags),
                join_or_none(&derived),
                join_or_none(&distinct)
            );
            Report {
                text,
                json: json!({
                    "tags": tags,
                    "derived": derived,
                    "distinct": distinct,
                    "letters": c.letters,
                    "words": c.words.as_ref().map(|ws| ws.iter().map(|w| w.join(" ")).collect::<Vec<_>>()),
                }),
            }
        }
        Cmd::Infer { machine, family } => Report::verdict(&decide::infer_family(&load_machine(machine)?, *family, b)?),
        Cmd::LetterBounded { machine } => Report::verdict(&decide::is_letter_bounded(&load_machine(machine)?, b)?),
        Cmd::MBounded { machine, m } => Report::verdict(&decide::is_m_bounded(&load_machine(machine)?, *m, b)?),
        Cmd::BdBounded { machine, n } => Report::verdict(&decide::bd_with_bound(&load_machine(machine)?, *n, b)?),
        Cmd::CompileLinear { semilinear, words, mode, component } => {
            let s = load_semilinear(semilinear)?;
            let q = s
                .components
                .get(*component)
                .ok_or_else(|| Error::invalid(format!("no linear component {component}")))?;
            let ws: Vec<Vec<String>> = list(std::slice::from_ref(words), ",")
                .iter()
                .map(|w| w.split_whitespace().map(String::from).collect())
                .collect();
            Report::machine(&build::compile_linear_set(q, &ws, mode.parse::<LinearMode>()?)?)
        }
        Cmd::Compile2positive { semilinear, letters } => {
            let s = load_semilinear(semilinear)?;
            let ls: Vec<String> = letters.split([',', ' ']).filter(|x| !x.is_empty()).map(String::from).collect();
            Report::machine(&build::compile_two_positive(&s, &ls)?)
        }
        Cmd::Generator { family, k } => Report::machine(&patterns::generator_with(*family, *k, b)?),
        Cmd::Closure { op, machine, other, map, regex } => {
            let m = load_machine(machine)?;
            let symbol_map = || -> Result<SymbolMap, Error> {
                SymbolMap::parse(map.as_deref().ok_or_else(|| Error::invalid("--map is required"))?)
            };
            let out = match op {
                ClosureOp::Union => build::union(&m, &second(other)?)?,
                ClosureOp::Concat => build::concat(&m, &second(other)?)?,
                ClosureOp::Reversal => build::reversal(&m)?,
                ClosureOp::Hom => build::homomorphism_image(&m, &symbol_map()?)?,
                ClosureOp::Invhom => build::inverse_homomorphism(&m, &symbol_map()?)?,
                ClosureOp::Intersect => {
                    let text = regex.as_deref().ok_or_else(|| Error::invalid("--regex is required"))?;
                    let nfa = parse_regex(text, &m.alphabet)?.to_nfa(&m.alphabet)?;
                    build::intersect_regular(&m, &nfa, b)?
                }
            };
            Report::machine(&out)
        }
        Cmd::Normalize { pattern, k } => {
            Report::machine(&build::distinct_normal_form(&pattern_for(pattern, k.unwrap_or(0))?, b)?)
        }
        Cmd::Decompose { machine, pattern } => {
            let m = load_machine(machine)?;
            let p = pattern.as_deref().map(|t| pattern_for(t, m.k)).transpose()?;
            let d = build::trio_decomposition(&m, p.as_ref())?;
            let rows: Vec<String> = d
                .gamma
                .iter()
                .zip(&d.g)
                .zip(&d.h)
                .map(|((s, g), h)| format!("{s} g={} h={}", render_instrs(g), h.as_deref().unwrap_or("<eps>")))
                .collect();
            let head = format!("gamma={} regular_states={} pattern={}", d.gamma.len(), d.r.num_states(), d.pattern);
            Report {
                text: std::iter::once(head).chain(rows.iter().cloned()).collect::<Vec<_>>().join("\n"),
                json: json!({
                    "gamma": d.gamma,
                    "g": d.g.iter().map(|g| render_instrs(g)).collect::<Vec<_>>(),
                    "h": d.h,
                    "regular_states": d.r.num_states(),
                    "pattern": d.pattern.to_string(),
                }),
            }
        }
        Cmd::SbdForm { k } => Report::machine(&build::sbd_form(*k)?),
        Cmd::Compare { machine, other } => {
            let (m1, m2) = (load_machine(machine)?, load_machine(other)?);
            let eq = oracle::bounded_equiv(&m1, &m2, cli.max_len)?;
            let mut status = match eq.status {
                EquivStatus::Equal => "equal",
                EquivStatus::EqualWithinExplored => "equal-within-explored",
                EquivStatus::Different => "different",
            };
            let mut counterexample = eq.counterexample.clone();
            let mut sampled = 0;
            if counterexample.is_none() {
                let mut rng = oracle::seeded_rng(cli.seed);
                let alphabet: Vec<String> =
                    m1.alphabet.iter().chain(&m2.alphabet).cloned().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
                for _ in 0..50 {
                    let w = oracle::random_word(&mut rng, &alphabet, 2 * cli.max_len);
                    sampled += 1;
                    let caps1 = SimCaps::for_machine(&m1, w.len());
                    let caps2 = SimCaps::for_machine(&m2, w.len());
                    let in1 = m1.encode_word(&w).is_ok() && oracle::accepts(&m1, &w, &caps1)?;
                    let in2 = m2.encode_word(&w).is_ok() && oracle::accepts(&m2, &w, &caps2)?;
                    if in1 != in2 {
                        status = "different";
                        counterexample = Some(w);
                        break;
                    }
                }
            }
            let ce = counterexample.as_ref().map(|w| render_word(w));
            Report {
                text: format!("status={status} counterexample={} sampled={sampled}", ce.as_deref().unwrap_or("none")),
                json: json!({ "status": status, "counterexample": ce, "sampled": sampled }),
            }
        }
    })
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn join_or_none(xs: &[&str]) -> String {
    if xs.is_empty() {
        "none".into()
    } else {
        xs.join(",")
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(r) => {
            let out = match cli.format {
                Format::Text => r.text,
                Format::Structured => serde_json::to_string_pretty(&r.json).expect("serializable report"),
            };
            // A closed pipe downstream is not an error of ours.
            let _ = writeln!(std::io::stdout(), "{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            match cli.format {
                Format::Text => eprintln!("error: {e}"),
                Format::Structured => {
                    let kind = if e.is_budget() { "budget" } else { "input" };
                    println!("{}", json!({ "error": e.to_string(), "kind": kind }));
                }
            }
            ExitCode::from(if e.is_budget() { 3 } else { 2 })
        }
    }
}
