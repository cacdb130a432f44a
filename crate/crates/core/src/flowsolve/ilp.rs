//! Best-first branch and bound over the exact simplex, with lazily
//! generated disjunctive cuts.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::ToPrimitive;

use super::lp::{ceil, floor, is_integral, solve_lp, Cmp, Lp, LpOutcome, Row};
use crate::budget::Budget;
use crate::error::Result;

/// A restriction applied to a branch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Restriction {
    /// Force every listed variable to zero.
    Zero(Vec<usize>),
    /// Require the listed variables to sum to at least one.
    AtLeastOne(Vec<usize>),
}

/// Verdict of the lazy check on an integral LP optimum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Lazy {
    Accept,
    /// Replace the node by one child per alternative; every integral point
    /// that should be accepted must satisfy one of them, and the rejected
    /// point must satisfy none.
    Branch(Vec<Restriction>),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IlpStats {
    pub nodes: u64,
    pub pivots: u64,
    pub lazy_cuts: u64,
    /// Decimal digits of the small-solution box bound.
    pub bound_digits: usize,
}

#[derive(Clone, Debug)]
struct Node {
    lower: Vec<i64>,
    upper: Vec<Option<i64>>,
    rows: Vec<Row>,
}

type Heap = BinaryHeap<Reverse<(BigRational, u64)>>;
type Store = Vec<Option<(Node, Vec<BigRational>)>>;

/// `n·(m·a')^(2m+1)` with `a' = a·(n+1) + |b|`: every feasible system of `m`
/// rows over `n` variables has an integral solution in the box when it has
/// any whose support equals a fixed pattern.
pub fn small_solution_bound(lp: &Lp) -> BigUint {
    let m = lp.rows.len() as u64;
    let n = lp.n as u64;
    let a = lp.rows.iter().flat_map(|r| r.coefs.iter().map(|c| c.1.unsigned_abs())).max().unwrap_or(1).max(1);
    let b = lp.rows.iter().map(|r| r.rhs.unsigned_abs()).max().unwrap_or(0);
    let ap = BigUint::from(a) * BigUint::from(n + 1) + BigUint::from(b);
    let base = BigUint::from(m.max(1)) * ap;
    BigUint::from(n.max(1)) * base.pow((2 * m + 1) as u32)
}

/// Minimizes `lp.cost` over integral points accepted by `check`.
pub fn branch_and_bound(
    lp: &Lp,
    budget: &Budget,
    mut check: impl FnMut(&[i64]) -> Lazy,
) -> Result<(Option<Vec<i64>>, IlpStats)> {
    let bound = small_solution_bound(lp);
    let bound_i64 = bound.to_i64();
    let mut stats = IlpStats { bound_digits: bound.to_string().len(), ..IlpStats::default() };
    let mut heap: Heap = BinaryHeap::new();
    let mut store: Store = Vec::new();
    let root = Node { lower: lp.lower.clone(), upper: lp.upper.clone(), rows: Vec::new() };
    let push = |node: Node, heap: &mut Heap, store: &mut Store, stats: &mut IlpStats| -> Result<()> {
        budget.charge("solver nodes", 1)?;
        stats.nodes += 1;
        let mut sub = lp.clone();
        sub.lower = node.lower.clone();
        sub.upper = node.upper.clone();
        sub.rows.extend(node.rows.iter().cloned());
        if let LpOutcome::Optimal { x, value } = solve_lp(&sub, &mut stats.pivots) {
            heap.push(Reverse((value, store.len() as u64)));
            store.push(Some((node, x)));
        }
        Ok(())
    };
    push(root, &mut heap, &mut store, &mut stats)?;
    while let Some(Reverse((_, id))) = heap.pop() {
        let (node, x) = store[id as usize].take().expect("queued node");
        match x.iter().position(|v| !is_integral(v)) {
            Some(j) => {
                let f = floor(&x[j]);
                let c = ceil(&x[j]);
                let mut left = node.clone();
                left.upper[j] = Some(f.to_i64().expect("bounded branch value"));
                push(left, &mut heap, &mut store, &mut stats)?;
                let within = match bound_i64 {
                    Some(b) => c <= BigInt::from(b),
                    None => true,
                };
                if within {
                    let mut right = node;
                    right.lower[j] = c.to_i64().expect("bounded branch value");
                    push(right, &mut heap, &mut store, &mut stats)?;
                }
            }
            None => {
                let xi: Vec<i64> = x
                    .iter()
                    .map(|v| v.to_integer().to_i64().expect("integral value fits"))
                    .collect();
                match check(&xi) {
                    Lazy::Accept => return Ok((Some(xi), stats)),
                    Lazy::Branch(alts) => {
                        stats.lazy_cuts += 1;
                        for alt in alts {
                            let mut child = node.clone();
                            match alt {
                                Restriction::Zero(vars) => {
                                    for v in vars {
                                        child.upper[v] = Some(0);
                                    }
                                }
                                Restriction::AtLeastOne(vars) => {
                                    child.rows.push(Row {
                                        coefs: vars.into_iter().map(|v| (v, 1)).collect(),
                                        cmp: Cmp::Ge,
                                        rhs: 1,
                                    });
                                }
                            }
                            push(child, &mut heap, &mut store, &mut stats)?;
                        }
                    }
                }
            }
        }
    }
    Ok((None, stats))
}
