//! Balanced-walk feasibility on labelled digraphs, and semilinear sets.
//!
//! A walk from the source to some sink is encoded by edge multiplicities
//! satisfying flow conservation; balance pairs, lower bounds and required
//! classes become linear rows, and connectivity of the support is enforced
//! by lazy disjunctive cuts inside branch and bound.

pub mod ilp;
pub mod lp;
mod semilinear;

pub use semilinear::{is_m_positive, semilinear_member, LinearSet, SemilinearSet};

use std::collections::{HashMap, VecDeque};

use crate::budget::Budget;
use crate::error::{Error, Result};
use ilp::{branch_and_bound, IlpStats, Lazy, Restriction};
use lp::{Cmp, Lp, Row};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlowEdge {
    pub from: usize,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowSystem {
    pub nodes: usize,
    pub edges: Vec<FlowEdge>,
    pub source: usize,
    pub sinks: Vec<usize>,
    /// Pairs of edge classes whose total usage must agree.
    pub balance: Vec<(Vec<usize>, Vec<usize>)>,
    /// Per-edge minimum multiplicity; empty means all zero.
    pub lower: Vec<u64>,
    /// Classes of which some edge must be used.
    pub require: Vec<Vec<usize>>,
}

impl FlowSystem {
    pub fn new(nodes: usize, source: usize) -> Self {
        FlowSystem {
            nodes,
            edges: Vec::new(),
            source,
            sinks: Vec::new(),
            balance: Vec::new(),
            lower: Vec::new(),
            require: Vec::new(),
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize) -> usize {
        self.edges.push(FlowEdge { from, to });
        self.edges.len() - 1
    }

    fn lower_of(&self, e: usize) -> u64 {
        self.lower.get(e).copied().unwrap_or(0)
    }

    fn check(&self) -> Result<()> {
        let bad_node = |v: usize| v >= self.nodes;
        if bad_node(self.source) || self.sinks.iter().any(|s| bad_node(*s)) {
            return Err(Error::invalid("flow system references a missing node"));
        }
        if self.edges.iter().any(|e| bad_node(e.from) || bad_node(e.to)) {
            return Err(Error::invalid("flow edge references a missing node"));
        }
        let ne = self.edges.len();
        let classes = self.balance.iter().flat_map(|(a, b)| a.iter().chain(b)).chain(self.require.iter().flatten());
        for e in classes {
            if *e >= ne {
                return Err(Error::invalid("class references a missing edge"));
            }
        }
        if !self.lower.is_empty() && self.lower.len() != ne {
            return Err(Error::invalid("lower bounds must cover every edge"));
        }
        Ok(())
    }

    /// Per-edge contribution to every balance pair, required class and
    /// `extra` class; zero exactly for edges the constraints never see.
    fn signatures(&self, extra: &[usize]) -> Vec<Vec<i64>> {
        let width = self.balance.len() + self.require.len() + 2;
        let mut sig = vec![vec![0i64; width]; self.edges.len()];
        for (i, (a, b)) in self.balance.iter().enumerate() {
            for e in a {
                sig[*e][i] += 1;
            }
            for e in b {
                sig[*e][i] -= 1;
            }
        }
        let off = self.balance.len();
        for (i, c) in self.require.iter().enumerate() {
            for e in c {
                sig[*e][off + i] = 1;
            }
        }
        for e in extra {
            sig[*e][width - 2] = 1;
        }
        for (e, s) in sig.iter_mut().enumerate() {
            s[width - 1] = self.lower_of(e) as i64;
        }
        sig
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowWitness {
    /// Edge multiplicities.
    pub y: Vec<u64>,
    /// The edges of a source-to-sink walk realizing `y`.
    pub walk: Vec<usize>,
    pub end: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub ilp: IlpStats,
    pub variables: usize,
    pub rows: usize,
    pub reduced_nodes: usize,
    pub reduced_edges: usize,
}

impl SolveStats {
    pub fn summary(&self) -> String {
        format!(
            "bnb_nodes={} pivots={} cuts={} vars={} rows={} box_bound_digits={}",
            self.ilp.nodes, self.ilp.pivots, self.ilp.lazy_cuts, self.variables, self.rows, self.ilp.bound_digits
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Unbounded {
    pub base: FlowWitness,
    /// Circulation on the original edges.
    pub circulation: Vec<u64>,
    /// Walks realizing `base + circulation` and `base + 2·circulation`.
    pub pumped: Vec<FlowWitness>,
}

/// Re-validates a witness arithmetically and as a walk.
pub fn validate_witness(fs: &FlowSystem, w: &FlowWitness) -> std::result::Result<(), String> {
    if w.y.len() != fs.edges.len() {
        return Err("multiplicity vector has the wrong length".into());
    }
    let mut counted = vec![0u64; fs.edges.len()];
    let mut at = fs.source;
    for &e in &w.walk {
        let edge = fs.edges.get(e).ok_or("walk uses a missing edge")?;
        if edge.from != at {
            return Err(format!("walk breaks at edge {e}"));
        }
        at = edge.to;
        counted[e] += 1;
    }
    if at != w.end || !fs.sinks.contains(&at) {
        return Err("walk does not end at a sink".into());
    }
    if counted != w.y {
        return Err("walk does not realize the multiplicities".into());
    }
    let mut net = vec![0i64; fs.nodes];
    for (e, edge) in fs.edges.iter().enumerate() {
        net[edge.from] += w.y[e] as i64;
        net[edge.to] -= w.y[e] as i64;
    }
    for (v, n) in net.iter().enumerate() {
        let expect = (v == fs.source) as i64 - (v == w.end) as i64;
        if *n != expect {
            return Err(format!("conservation fails at node {v}"));
        }
    }
    for (a, b) in &fs.balance {
        let sa: u64 = a.iter().map(|e| w.y[*e]).sum();
        let sb: u64 = b.iter().map(|e| w.y[*e]).sum();
        if sa != sb {
            return Err("balance pair violated".into());
        }
    }
    for (e, y) in w.y.iter().enumerate() {
        if *y < fs.lower_of(e) {
            return Err(format!("edge {e} below its lower bound"));
        }
    }
    for c in &fs.require {
        if c.iter().all(|e| w.y[*e] == 0) {
            return Err("required class unused".into());
        }
    }
    Ok(())
}

/// The system with usable edges only, and neutral strongly connected parts
/// collapsed to single nodes.
struct Reduced {
    /// Quotient node of each original node (`usize::MAX` when unusable).
    comp: Vec<usize>,
    ncomp: usize,
    /// Original edge behind each quotient edge.
    edges: Vec<usize>,
    ends: Vec<(usize, usize)>,
    source: usize,
    sinks: Vec<usize>,
    /// Usable neutral edges, for lifting walks.
    neutral_adj: Vec<Vec<usize>>,
    representative: Vec<usize>,
}

/// Tarjan's algorithm over the nodes with `include` set; other nodes get
/// `usize::MAX`.
fn strongly_connected(succ: &[Vec<usize>], include: &[bool]) -> (Vec<usize>, usize) {
    let n = succ.len();
    let mut comp = vec![usize::MAX; n];
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut tstack = Vec::new();
    let mut counter = 0;
    let mut ncomp = 0;
    for root in 0..n {
        if !include[root] || index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        tstack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut i)) = call.last_mut() {
            if *i < succ[v].len() {
                let w = succ[v][*i];
                *i += 1;
                if !include[w] {
                    continue;
                }
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    tstack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(p, _)) = call.last() {
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = tstack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = ncomp;
                        if w == v {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    (comp, ncomp)
}

fn reduce(fs: &FlowSystem, extra: &[usize]) -> Option<Reduced> {
    let n = fs.nodes;
    let mut out_adj = vec![Vec::new(); n];
    let mut in_adj = vec![Vec::new(); n];
    for (e, edge) in fs.edges.iter().enumerate() {
        out_adj[edge.from].push(e);
        in_adj[edge.to].push(e);
    }
    let mut fwd = vec![false; n];
    fwd[fs.source] = true;
    let mut stack = vec![fs.source];
    while let Some(v) = stack.pop() {
        for &e in &out_adj[v] {
            let t = fs.edges[e].to;
            if !fwd[t] {
                fwd[t] = true;
                stack.push(t);
            }
        }
    }
    let mut back = vec![false; n];
    for &s in &fs.sinks {
        if !back[s] {
            back[s] = true;
            stack.push(s);
        }
    }
    while let Some(v) = stack.pop() {
        for &e in &in_adj[v] {
            let f = fs.edges[e].from;
            if !back[f] {
                back[f] = true;
                stack.push(f);
            }
        }
    }
    if !back[fs.source] {
        return None;
    }
    let usable_node: Vec<bool> = (0..n).map(|v| fwd[v] && back[v]).collect();
    let usable_edge = |e: usize| usable_node[fs.edges[e].from] && usable_node[fs.edges[e].to];
    for e in 0..fs.edges.len() {
        if fs.lower_of(e) > 0 && !usable_edge(e) {
            return None;
        }
    }
    let sig = fs.signatures(extra);
    let neutral: Vec<bool> = sig.iter().map(|s| s.iter().all(|x| *x == 0)).collect();
    let mut neutral_adj = vec![Vec::new(); n];
    for (e, edge) in fs.edges.iter().enumerate() {
        if neutral[e] && usable_edge(e) {
            neutral_adj[edge.from].push(e);
        }
    }
    let succ: Vec<Vec<usize>> = neutral_adj.iter().map(|es| es.iter().map(|e| fs.edges[*e].to).collect()).collect();
    let (comp, ncomp) = strongly_connected(&succ, &usable_node);
    let mut representative = vec![usize::MAX; ncomp];
    for v in 0..n {
        if comp[v] != usize::MAX && representative[comp[v]] == usize::MAX {
            representative[comp[v]] = v;
        }
    }
    representative[comp[fs.source]] = fs.source;
    let mut edges = Vec::new();
    let mut ends = Vec::new();
    let mut seen: HashMap<(usize, usize, Vec<i64>), usize> = HashMap::new();
    for (e, edge) in fs.edges.iter().enumerate() {
        if !usable_edge(e) {
            continue;
        }
        let (a, b) = (comp[edge.from], comp[edge.to]);
        if neutral[e] && a == b {
            continue;
        }
        if fs.lower_of(e) == 0 {
            let key = (a, b, sig[e].clone());
            if seen.contains_key(&key) {
                continue;
            }
            seen.insert(key, e);
        }
        edges.push(e);
        ends.push((a, b));
    }
    let mut sinks: Vec<usize> = fs.sinks.iter().filter(|s| usable_node[**s]).map(|s| comp[*s]).collect();
    sinks.sort_unstable();
    sinks.dedup();
    let source = comp[fs.source];
    Some(Reduced { comp, ncomp, edges, ends, source, sinks, neutral_adj, representative })
}

impl Reduced {
    /// Shortest neutral path inside one component.
    fn neutral_path(&self, fs: &FlowSystem, from: usize, to: usize) -> Vec<usize> {
        if from == to {
            return Vec::new();
        }
        let mut parent: HashMap<usize, usize> = HashMap::new();
        let mut queue = VecDeque::from([from]);
        let c = self.comp[from];
        while let Some(v) = queue.pop_front() {
            for &e in &self.neutral_adj[v] {
                let w = fs.edges[e].to;
                if self.comp[w] != c || w == from || parent.contains_key(&w) {
                    continue;
                }
                parent.insert(w, e);
                if w == to {
                    let mut path = Vec::new();
                    let mut cur = to;
                    while cur != from {
                        let e = parent[&cur];
                        path.push(e);
                        cur = fs.edges[e].from;
                    }
                    path.reverse();
                    return path;
                }
                queue.push_back(w);
            }
        }
        unreachable!("nodes of a neutral component are mutually reachable")
    }

    /// Lifts a sequence of quotient edges starting at original node `start`.
    fn lift(&self, fs: &FlowSystem, start: usize, qwalk: &[usize], via_rep: bool) -> (Vec<usize>, usize) {
        let mut walk = Vec::new();
        let mut at = start;
        for &qe in qwalk {
            let e = self.edges[qe];
            let tail = fs.edges[e].from;
            if via_rep {
                let r = self.representative[self.comp[at]];
                walk.extend(self.neutral_path(fs, at, r));
                at = r;
            }
            walk.extend(self.neutral_path(fs, at, tail));
            walk.push(e);
            at = fs.edges[e].to;
        }
        if via_rep {
            let r = self.representative[self.comp[at]];
            walk.extend(self.neutral_path(fs, at, r));
            at = r;
        }
        (walk, at)
    }

    fn finish(&self, fs: &FlowSystem, mut walk: Vec<usize>, at: usize) -> FlowWitness {
        let c = self.comp[at];
        let sink = fs
            .sinks
            .iter()
            .copied()
            .filter(|s| self.comp[*s] == c)
            .min_by_key(|s| self.neutral_path(fs, at, *s).len())
            .expect("walk ends in a sink component");
        walk.extend(self.neutral_path(fs, at, sink));
        let mut y = vec![0u64; fs.edges.len()];
        for e in &walk {
            y[*e] += 1;
        }
        FlowWitness { y, walk, end: sink }
    }
}

/// Some usable growth edge lies on a cycle of usable edges.
fn growth_on_cycle(fs: &FlowSystem, red: &Reduced, growth: &[usize]) -> bool {
    let usable: Vec<bool> = red.comp.iter().map(|c| *c != usize::MAX).collect();
    let mut succ = vec![Vec::new(); fs.nodes];
    for e in &fs.edges {
        succ[e.from].push(e.to);
    }
    let (comp, _) = strongly_connected(&succ, &usable);
    growth.iter().any(|g| {
        let e = fs.edges[*g];
        usable[e.from] && usable[e.to] && comp[e.from] == comp[e.to]
    })
}

/// Euler trail over quotient edges with multiplicities, from `start` to `end`.
fn euler(ends: &[(usize, usize)], mult: &[u64], ncomp: usize, start: usize) -> Vec<usize> {
    let mut adj = vec![Vec::new(); ncomp];
    for (i, (a, _)) in ends.iter().enumerate() {
        if mult[i] > 0 {
            adj[*a].push(i);
        }
    }
    let mut left = mult.to_vec();
    let mut ptr = vec![0usize; ncomp];
    let mut stack: Vec<(usize, Option<usize>)> = vec![(start, None)];
    let mut out = Vec::new();
    while let Some(&(v, via)) = stack.last() {
        let mut advanced = false;
        while ptr[v] < adj[v].len() {
            let e = adj[v][ptr[v]];
            if left[e] == 0 {
                ptr[v] += 1;
                continue;
            }
            left[e] -= 1;
            stack.push((ends[e].1, Some(e)));
            advanced = true;
            break;
        }
        if !advanced {
            stack.pop();
            if let Some(e) = via {
                out.push(e);
            }
        }
    }
    out.reverse();
    out
}

/// Weakly connected components of a support over the quotient; returns a
/// cut for the first component with edges that misses the source.
fn connectivity_cut(
    red: &Reduced,
    supports: &[(&[i64], usize)],
    cut_vars: &dyn Fn(usize) -> Vec<usize>,
) -> Option<Lazy> {
    let n = red.ncomp;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut c = x;
        while p[c] != r {
            let nx = p[c];
            p[c] = r;
            c = nx;
        }
        r
    }
    let ne = red.edges.len();
    let used = |e: usize| supports.iter().any(|(x, off)| x[off + e] > 0);
    for e in 0..ne {
        if used(e) {
            let (a, b) = red.ends[e];
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
    }
    let src = find(&mut parent, red.source);
    let mut bad_root = None;
    for e in 0..ne {
        if used(e) {
            let r = find(&mut parent, red.ends[e].0);
            if r != src {
                bad_root = Some(r);
                break;
            }
        }
    }
    let root = bad_root?;
    let in_s: Vec<bool> = (0..n).map(|v| find(&mut parent, v) == root).collect();
    let mut zero = Vec::new();
    let mut enter = Vec::new();
    for e in 0..ne {
        let (a, b) = red.ends[e];
        if in_s[a] {
            zero.extend(cut_vars(e));
        } else if in_s[b] {
            enter.extend(cut_vars(e));
        }
    }
    Some(Lazy::Branch(vec![Restriction::Zero(zero), Restriction::AtLeastOne(enter)]))
}

/// Rows for a walk on the quotient using variables `off..off+ne` plus one
/// sink-choice variable per quotient sink (when `walk`), or a circulation.
fn encode_flow(fs: &FlowSystem, red: &Reduced, lp: &mut Lp, off: usize, sink_off: Option<usize>) {
    let ne = red.edges.len();
    let mut rows: Vec<Vec<(usize, i64)>> = vec![Vec::new(); red.ncomp];
    for e in 0..ne {
        let (a, b) = red.ends[e];
        if a != b {
            rows[a].push((off + e, 1));
            rows[b].push((off + e, -1));
        }
    }
    if let Some(so) = sink_off {
        for (i, s) in red.sinks.iter().enumerate() {
            rows[*s].push((so + i, 1));
        }
    }
    for (v, coefs) in rows.into_iter().enumerate() {
        let rhs = if sink_off.is_some() && v == red.source { 1 } else { 0 };
        if coefs.is_empty() && rhs == 0 {
            continue;
        }
        lp.rows.push(Row { coefs, cmp: Cmp::Eq, rhs });
    }
    let pos: HashMap<usize, usize> = red.edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let class = |c: &[usize]| -> Vec<usize> { c.iter().filter_map(|e| pos.get(e).copied()).collect() };
    for (a, b) in &fs.balance {
        let mut coefs: HashMap<usize, i64> = HashMap::new();
        for e in class(a) {
            *coefs.entry(off + e).or_default() += 1;
        }
        for e in class(b) {
            *coefs.entry(off + e).or_default() -= 1;
        }
        let mut coefs: Vec<(usize, i64)> = coefs.into_iter().filter(|c| c.1 != 0).collect();
        coefs.sort_unstable();
        if !coefs.is_empty() {
            lp.rows.push(Row { coefs, cmp: Cmp::Eq, rhs: 0 });
        }
    }
}

fn base_lp(fs: &FlowSystem, red: &Reduced, circulation: bool) -> Lp {
    let ne = red.edges.len();
    let ns = red.sinks.len();
    let n = if circulation { 2 * ne + ns } else { ne + ns };
    let mut lp = Lp { n, rows: Vec::new(), lower: vec![0; n], upper: vec![None; n], cost: vec![0; n] };
    for (i, e) in red.edges.iter().enumerate() {
        lp.lower[i] = fs.lower_of(*e) as i64;
        lp.cost[i] = 1;
        if circulation {
            lp.cost[ne + ns + i] = 1;
        }
    }
    for i in 0..ns {
        lp.upper[ne + i] = Some(1);
    }
    encode_flow(fs, red, &mut lp, 0, Some(ne));
    let pos: HashMap<usize, usize> = red.edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    for c in &fs.require {
        let coefs: Vec<(usize, i64)> = c.iter().filter_map(|e| pos.get(e)).map(|i| (*i, 1)).collect();
        lp.rows.push(Row { coefs, cmp: Cmp::Ge, rhs: 1 });
    }
    if circulation {
        encode_flow(fs, red, &mut lp, ne + ns, None);
    }
    lp
}

/// Finds a source-to-sink walk meeting every constraint, or proves none
/// exists. Budget exhaustion is reported as an error, never as infeasible.
pub fn solve(fs: &FlowSystem, budget: &Budget) -> Result<(Option<FlowWitness>, SolveStats)> {
    fs.check()?;
    let Some(red) = reduce(fs, &[]) else { return Ok((None, SolveStats::default())) };
    let lp = base_lp(fs, &red, false);
    let ne = red.edges.len();
    let mut stats =
        SolveStats { variables: lp.n, rows: lp.rows.len(), reduced_nodes: red.ncomp, reduced_edges: ne, ..Default::default() };
    let (sol, ilp_stats) = branch_and_bound(&lp, budget, |x| {
        connectivity_cut(&red, &[(x, 0)], &|e| vec![e]).unwrap_or(Lazy::Accept)
    })?;
    stats.ilp = ilp_stats;
    let Some(x) = sol else { return Ok((None, stats)) };
    let mult: Vec<u64> = x[..ne].iter().map(|v| *v as u64).collect();
    let qwalk = euler(&red.ends, &mult, red.ncomp, red.source);
    let (walk, at) = red.lift(fs, fs.source, &qwalk, false);
    let w = red.finish(fs, walk, at);
    debug_assert_eq!(validate_witness(fs, &w), Ok(()));
    Ok((Some(w), stats))
}

/// Finds a witness walk together with a balanced circulation touching
/// `growth` whose support joins the walk, so that pumping it yields
/// witnesses of unbounded size.
pub fn solve_unbounded(fs: &FlowSystem, growth: &[usize], budget: &Budget) -> Result<(Option<Unbounded>, SolveStats)> {
    fs.check()?;
    if growth.iter().any(|e| *e >= fs.edges.len()) {
        return Err(Error::invalid("growth class references a missing edge"));
    }
    let Some(red) = reduce(fs, growth) else { return Ok((None, SolveStats::default())) };
    if !growth_on_cycle(fs, &red, growth) {
        return Ok((None, SolveStats::default()));
    }
    let ne = red.edges.len();
    let ns = red.sinks.len();
    let mut lp = base_lp(fs, &red, true);
    let zoff = ne + ns;
    let pos: HashMap<usize, usize> = red.edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let gro: Vec<(usize, i64)> = growth.iter().filter_map(|e| pos.get(e)).map(|i| (zoff + i, 1)).collect();
    let mut stats = SolveStats::default();
    if gro.is_empty() {
        return Ok((None, stats));
    }
    lp.rows.push(Row { coefs: gro, cmp: Cmp::Ge, rhs: 1 });
    stats.variables = lp.n;
    stats.rows = lp.rows.len();
    stats.reduced_nodes = red.ncomp;
    stats.reduced_edges = ne;
    let (sol, ilp_stats) = branch_and_bound(&lp, budget, |x| {
        if let Some(c) = connectivity_cut(&red, &[(x, 0)], &|e| vec![e]) {
            return c;
        }
        connectivity_cut(&red, &[(x, 0), (x, zoff)], &|e| vec![e, zoff + e]).unwrap_or(Lazy::Accept)
    })?;
    stats.ilp = ilp_stats;
    let Some(x) = sol else { return Ok((None, stats)) };
    let y: Vec<u64> = x[..ne].iter().map(|v| *v as u64).collect();
    let z: Vec<u64> = x[zoff..zoff + ne].iter().map(|v| *v as u64).collect();
    let walk_for = |t: u64| {
        let mult: Vec<u64> = y.iter().zip(&z).map(|(a, b)| a + t * b).collect();
        let qwalk = euler(&red.ends, &mult, red.ncomp, red.source);
        let (walk, at) = red.lift(fs, fs.source, &qwalk, true);
        red.finish(fs, walk, at)
    };
    let base = walk_for(0);
    let once = walk_for(1);
    let twice = walk_for(2);
    let circulation: Vec<u64> = once.y.iter().zip(&base.y).map(|(a, b)| a.saturating_sub(*b)).collect();
    Ok((Some(Unbounded { base, circulation, pumped: vec![once, twice] }), stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    // s -a-> t, t -b-> t, balance {a} = {b}.
    fn two_node() -> FlowSystem {
        let mut fs = FlowSystem::new(2, 0);
        let a = fs.add_edge(0, 1);
        let b = fs.add_edge(1, 1);
        fs.sinks = vec![1];
        fs.balance = vec![(vec![a], vec![b])];
        fs
    }

    #[test]
    fn two_node_walk() {
        let fs = two_node();
        let (w, stats) = solve(&fs, &Budget::default()).unwrap();
        let w = w.unwrap();
        assert_eq!(w.y, vec![1, 1]);
        assert_eq!(w.walk, vec![0, 1]);
        assert_eq!(validate_witness(&fs, &w), Ok(()));
        assert!(stats.summary().contains("box_bound_digits"));
    }

    #[test]
    fn empty_balance_gives_shortest_walk() {
        let mut fs = FlowSystem::new(3, 0);
        fs.add_edge(0, 1);
        fs.add_edge(1, 2);
        fs.add_edge(0, 2);
        fs.sinks = vec![2];
        let (w, _) = solve(&fs, &Budget::default()).unwrap();
        assert_eq!(w.unwrap().walk, vec![2]);
    }

    #[test]
    fn unreachable_sink_is_infeasible() {
        let mut fs = FlowSystem::new(3, 0);
        fs.add_edge(0, 1);
        fs.sinks = vec![2];
        assert_eq!(solve(&fs, &Budget::default()).unwrap().0, None);
    }

    #[test]
    fn disconnected_cycle_is_rejected() {
        // The only way to balance is a cycle unreachable from the source.
        let mut fs = FlowSystem::new(4, 0);
        let a = fs.add_edge(0, 1);
        let c = fs.add_edge(2, 3);
        let d = fs.add_edge(3, 2);
        fs.sinks = vec![1];
        fs.require = vec![vec![c]];
        let _ = (a, d);
        assert_eq!(solve(&fs, &Budget::default()).unwrap().0, None);
    }

    #[test]
    fn unbounded_pumps() {
        // s -C-> p (loop C), p -D-> q (loop D), q sink, growth = loops.
        let mut fs = FlowSystem::new(3, 0);
        let c0 = fs.add_edge(0, 1);
        let cl = fs.add_edge(1, 1);
        let d0 = fs.add_edge(1, 2);
        let dl = fs.add_edge(2, 2);
        fs.sinks = vec![2];
        fs.balance = vec![(vec![c0, cl], vec![d0, dl])];
        let (u, _) = solve_unbounded(&fs, &[cl, dl], &Budget::default()).unwrap();
        let u = u.unwrap();
        for w in std::iter::once(&u.base).chain(&u.pumped) {
            assert_eq!(validate_witness(&fs, w), Ok(()));
        }
        assert!(u.pumped[1].walk.len() > u.pumped[0].walk.len());
        let mut fin = FlowSystem::new(2, 0);
        let e = fin.add_edge(0, 1);
        fin.sinks = vec![1];
        assert_eq!(solve_unbounded(&fin, &[e], &Budget::default()).unwrap().0, None);
    }
}
