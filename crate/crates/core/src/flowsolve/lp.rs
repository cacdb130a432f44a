//! Exact bounded-variable primal simplex.
//!
//! Arithmetic is generic over [`Field`]; the solver first runs with checked
//! `i128` fractions and restarts over arbitrary-precision rationals when an
//! intermediate value overflows.

use std::cmp::Ordering;
use std::fmt::Debug;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub trait Field: Clone + Debug + PartialEq {
    fn zero() -> Self;
    fn from_i64(v: i64) -> Self;
    fn add(&self, o: &Self) -> Option<Self>;
    fn sub(&self, o: &Self) -> Option<Self>;
    fn mul(&self, o: &Self) -> Option<Self>;
    fn div(&self, o: &Self) -> Option<Self>;
    fn neg(&self) -> Self;
    fn signum(&self) -> i8;
    fn to_big(&self) -> BigRational;

    fn is_zero(&self) -> bool {
        self.signum() == 0
    }

    fn cmp_to(&self, o: &Self) -> Option<Ordering> {
        Some(self.sub(o)?.signum().cmp(&0))
    }
}

/// Reduced fraction with `i128` parts and positive denominator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Q128 {
    n: i128,
    d: i128,
}

fn gcd(a: i128, b: i128) -> i128 {
    a.unsigned_abs().gcd(&b.unsigned_abs()) as i128
}

impl Q128 {
    fn make(n: i128, d: i128) -> Option<Q128> {
        if d == 0 {
            return None;
        }
        let g = gcd(n, d).max(1);
        let (mut n, mut d) = (n / g, d / g);
        if d < 0 {
            n = n.checked_neg()?;
            d = d.checked_neg()?;
        }
        Some(Q128 { n, d })
    }
}

impl Field for Q128 {
    fn zero() -> Self {
        Q128 { n: 0, d: 1 }
    }

    fn from_i64(v: i64) -> Self {
        Q128 { n: v as i128, d: 1 }
    }

    fn add(&self, o: &Self) -> Option<Self> {
        if self.d == o.d {
            return Q128::make(self.n.checked_add(o.n)?, self.d);
        }
        let g = gcd(self.d, o.d);
        let (a, b) = (self.d / g, o.d / g);
        let n = self.n.checked_mul(b)?.checked_add(o.n.checked_mul(a)?)?;
        Q128::make(n, self.d.checked_mul(b)?)
    }

    fn sub(&self, o: &Self) -> Option<Self> {
        self.add(&o.neg())
    }

    fn mul(&self, o: &Self) -> Option<Self> {
        if self.n == 0 || o.n == 0 {
            return Some(Q128::zero());
        }
        let g1 = gcd(self.n, o.d);
        let g2 = gcd(o.n, self.d);
        let n = (self.n / g1).checked_mul(o.n / g2)?;
        let d = (self.d / g2).checked_mul(o.d / g1)?;
        Some(Q128 { n, d })
    }

    fn div(&self, o: &Self) -> Option<Self> {
        if o.n == 0 {
            return None;
        }
        self.mul(&Q128::make(o.d, o.n)?)
    }

    fn neg(&self) -> Self {
        Q128 { n: -self.n, d: self.d }
    }

    fn signum(&self) -> i8 {
        self.n.signum() as i8
    }

    fn to_big(&self) -> BigRational {
        BigRational::new(BigInt::from(self.n), BigInt::from(self.d))
    }
}

impl Field for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }

    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn add(&self, o: &Self) -> Option<Self> {
        Some(self + o)
    }

    fn sub(&self, o: &Self) -> Option<Self> {
        Some(self - o)
    }

    fn mul(&self, o: &Self) -> Option<Self> {
        Some(self * o)
    }

    fn div(&self, o: &Self) -> Option<Self> {
        if num_traits::Zero::is_zero(o) {
            None
        } else {
            Some(self / o)
        }
    }

    fn neg(&self) -> Self {
        -self.clone()
    }

    fn signum(&self) -> i8 {
        if self.is_positive() {
            1
        } else if self.is_negative() {
            -1
        } else {
            0
        }
    }

    fn to_big(&self) -> BigRational {
        self.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

/// Sparse row `Σ coef·x_j (cmp) rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    pub coefs: Vec<(usize, i64)>,
    pub cmp: Cmp,
    pub rhs: i64,
}

/// `min cost·x` subject to rows and `lower ≤ x ≤ upper`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lp {
    pub n: usize,
    pub rows: Vec<Row>,
    pub lower: Vec<i64>,
    pub upper: Vec<Option<i64>>,
    pub cost: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<BigRational>, value: BigRational },
    Infeasible,
    Unbounded,
}

/// Solves exactly; `pivots` accumulates the number of simplex pivots.
pub fn solve_lp(lp: &Lp, pivots: &mut u64) -> LpOutcome {
    for (j, l) in lp.lower.iter().enumerate() {
        if let Some(u) = lp.upper[j] {
            if u < *l {
                return LpOutcome::Infeasible;
            }
        }
    }
    match Simplex::<Q128>::run(lp, pivots) {
        Some(r) => r,
        None => Simplex::<BigRational>::run(lp, pivots).expect("arbitrary precision cannot overflow"),
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum At {
    Basic,
    Lower,
    Upper,
}

struct Simplex<F: Field> {
    m: usize,
    t: Vec<Vec<F>>,
    xb: Vec<F>,
    basis: Vec<usize>,
    status: Vec<At>,
    lo: Vec<F>,
    up: Vec<Option<F>>,
}

const DEGENERATE_STREAK: u32 = 40;

impl<F: Field> Simplex<F> {
    fn value(&self, j: usize) -> F {
        match self.status[j] {
            At::Lower => self.lo[j].clone(),
            At::Upper => self.up[j].clone().expect("upper status needs a bound"),
            At::Basic => {
                let i = self.basis.iter().position(|b| *b == j).unwrap();
                self.xb[i].clone()
            }
        }
    }

    fn run(lp: &Lp, pivots: &mut u64) -> Option<LpOutcome> {
        let m = lp.rows.len();
        let n_slack = lp.rows.iter().filter(|r| r.cmp != Cmp::Eq).count();
        let n_real = lp.n + n_slack;
        let total = n_real + m;
        let mut t = vec![vec![F::zero(); total]; m];
        let mut lo = Vec::with_capacity(total);
        let mut up = Vec::with_capacity(total);
        for j in 0..lp.n {
            lo.push(F::from_i64(lp.lower[j]));
            up.push(lp.upper[j].map(F::from_i64));
        }
        let mut slack = lp.n;
        let mut rhs = Vec::with_capacity(m);
        for (i, r) in lp.rows.iter().enumerate() {
            for &(j, c) in &r.coefs {
                t[i][j] = t[i][j].add(&F::from_i64(c))?;
            }
            match r.cmp {
                Cmp::Le => {
                    t[i][slack] = F::from_i64(1);
                    slack += 1;
                }
                Cmp::Ge => {
                    t[i][slack] = F::from_i64(-1);
                    slack += 1;
                }
                Cmp::Eq => {}
            }
            rhs.push(F::from_i64(r.rhs));
        }
        for _ in lp.n..n_real {
            lo.push(F::zero());
            up.push(None);
        }
        for _ in 0..m {
            lo.push(F::zero());
            up.push(None);
        }
        let mut status = vec![At::Lower; total];
        let mut xb = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        for i in 0..m {
            let mut r = rhs[i].clone();
            for j in 0..n_real {
                if !t[i][j].is_zero() {
                    r = r.sub(&t[i][j].mul(&lo[j])?)?;
                }
            }
            if r.signum() < 0 {
                for j in 0..n_real {
                    t[i][j] = t[i][j].neg();
                }
                r = r.neg();
            }
            t[i][n_real + i] = F::from_i64(1);
            basis.push(n_real + i);
            status[n_real + i] = At::Basic;
            xb.push(r);
        }
        let mut s = Simplex { m, t, xb, basis, status, lo, up };
        let mut c1 = vec![0i64; total];
        for c in c1.iter_mut().skip(n_real) {
            *c = 1;
        }
        match s.optimize(&c1, pivots)? {
            false => unreachable!("phase one is bounded"),
            true => {}
        }
        let mut infeas = F::zero();
        for i in 0..m {
            if s.basis[i] >= n_real {
                infeas = infeas.add(&s.xb[i])?;
            }
        }
        if infeas.signum() > 0 {
            return Some(LpOutcome::Infeasible);
        }
        for j in n_real..total {
            s.up[j] = Some(F::zero());
        }
        let mut c2 = vec![0i64; total];
        c2[..lp.n].copy_from_slice(&lp.cost);
        if !s.optimize(&c2, pivots)? {
            return Some(LpOutcome::Unbounded);
        }
        let x: Vec<BigRational> = (0..lp.n).map(|j| s.value(j).to_big()).collect();
        let value = x.iter().zip(&lp.cost).fold(<BigRational as num_traits::Zero>::zero(), |acc, (v, c)| acc + v * BigRational::from_integer(BigInt::from(*c)));
        Some(LpOutcome::Optimal { x, value })
    }

    /// Returns `Some(true)` at an optimum, `Some(false)` when unbounded and
    /// `None` on arithmetic overflow.
    fn optimize(&mut self, cost: &[i64], pivots: &mut u64) -> Option<bool> {
        let total = cost.len();
        let mut d: Vec<F> = cost.iter().map(|c| F::from_i64(*c)).collect();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0 {
                let cbf = F::from_i64(cb);
                for j in 0..total {
                    if !self.t[i][j].is_zero() {
                        d[j] = d[j].sub(&cbf.mul(&self.t[i][j])?)?;
                    }
                }
            }
        }
        let mut streak = 0u32;
        let mut bland = false;
        loop {
            // Entering variable.
            let mut enter: Option<(usize, F)> = None;
            for j in 0..total {
                let fixed = matches!(&self.up[j], Some(u) if *u == self.lo[j]);
                if fixed || self.status[j] == At::Basic {
                    continue;
                }
                let improving = match self.status[j] {
                    At::Lower => d[j].signum() < 0,
                    At::Upper => d[j].signum() > 0,
                    At::Basic => false,
                };
                if !improving {
                    continue;
                }
                if bland {
                    enter = Some((j, d[j].clone()));
                    break;
                }
                let mag = if d[j].signum() < 0 { d[j].neg() } else { d[j].clone() };
                let better = match &enter {
                    None => true,
                    Some((_, best)) => mag.cmp_to(best)? == Ordering::Greater,
                };
                if better {
                    enter = Some((j, mag));
                }
            }
            let Some((q, _)) = enter else { return Some(true) };
            let dir: i8 = if self.status[q] == At::Lower { 1 } else { -1 };
            // Ratio test.
            let mut theta: Option<F> = match &self.up[q] {
                Some(u) => Some(u.sub(&self.lo[q])?),
                None => None,
            };
            let mut leave: Option<(usize, At)> = None;
            for i in 0..self.m {
                let a = &self.t[i][q];
                if a.is_zero() {
                    continue;
                }
                let b = self.basis[i];
                // Basic variable moves by -dir·a per unit of θ.
                let rate = if dir > 0 { a.neg() } else { a.clone() };
                let (limit, bound) = if rate.signum() < 0 {
                    (self.xb[i].sub(&self.lo[b])?.div(&rate.neg())?, At::Lower)
                } else {
                    match &self.up[b] {
                        Some(u) => (u.sub(&self.xb[i])?.div(&rate)?, At::Upper),
                        None => continue,
                    }
                };
                let take = match &theta {
                    None => true,
                    Some(th) => match limit.cmp_to(th)? {
                        Ordering::Less => true,
                        Ordering::Equal => match leave {
                            Some((li, _)) => bland && b < self.basis[li],
                            None => false,
                        },
                        Ordering::Greater => false,
                    },
                };
                if take {
                    theta = Some(limit);
                    leave = Some((i, bound));
                }
            }
            let Some(theta) = theta else { return Some(false) };
            *pivots += 1;
            if theta.is_zero() {
                streak += 1;
                if streak > DEGENERATE_STREAK {
                    bland = true;
                }
            } else {
                streak = 0;
            }
            let step = if dir > 0 { theta.clone() } else { theta.neg() };
            for i in 0..self.m {
                if !self.t[i][q].is_zero() {
                    self.xb[i] = self.xb[i].sub(&self.t[i][q].mul(&step)?)?;
                }
            }
            match leave {
                None => {
                    self.status[q] = if dir > 0 { At::Upper } else { At::Lower };
                }
                Some((r, bound)) => {
                    let old = self.basis[r];
                    let entering_value = self.value(q).add(&step)?;
                    self.status[old] = bound;
                    self.status[q] = At::Basic;
                    self.basis[r] = q;
                    self.xb[r] = entering_value;
                    let piv = self.t[r][q].clone();
                    for j in 0..total {
                        if !self.t[r][j].is_zero() {
                            self.t[r][j] = self.t[r][j].div(&piv)?;
                        }
                    }
                    let prow = self.t[r].clone();
                    for i in 0..self.m {
                        if i == r || self.t[i][q].is_zero() {
                            continue;
                        }
                        let f = self.t[i][q].clone();
                        for j in 0..total {
                            if !prow[j].is_zero() {
                                self.t[i][j] = self.t[i][j].sub(&f.mul(&prow[j])?)?;
                            }
                        }
                    }
                    let f = d[q].clone();
                    if !f.is_zero() {
                        for j in 0..total {
                            if !prow[j].is_zero() {
                                d[j] = d[j].sub(&f.mul(&prow[j])?)?;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `floor` of a rational.
pub fn floor(x: &BigRational) -> BigInt {
    x.floor().to_integer()
}

pub fn ceil(x: &BigRational) -> BigInt {
    x.ceil().to_integer()
}

pub fn to_i64(x: &BigInt) -> Option<i64> {
    x.to_i64()
}

pub fn is_integral(x: &BigRational) -> bool {
    x.denom().is_one()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn small_lp() {
        // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6
        let lp = Lp {
            n: 2,
            rows: vec![
                Row { coefs: vec![(0, 1), (1, 2)], cmp: Cmp::Le, rhs: 4 },
                Row { coefs: vec![(0, 3), (1, 1)], cmp: Cmp::Le, rhs: 6 },
            ],
            lower: vec![0, 0],
            upper: vec![None, None],
            cost: vec![-1, -1],
        };
        match solve_lp(&lp, &mut 0) {
            LpOutcome::Optimal { x, value } => {
                assert_eq!(x, vec![q(8, 5), q(6, 5)]);
                assert_eq!(value, q(-14, 5));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let lp = Lp {
            n: 1,
            rows: vec![Row { coefs: vec![(0, 1)], cmp: Cmp::Ge, rhs: 3 }],
            lower: vec![0],
            upper: vec![Some(2)],
            cost: vec![1],
        };
        assert_eq!(solve_lp(&lp, &mut 0), LpOutcome::Infeasible);
        let lp = Lp { n: 1, rows: vec![], lower: vec![0], upper: vec![None], cost: vec![-1] };
        assert_eq!(solve_lp(&lp, &mut 0), LpOutcome::Unbounded);
    }

    #[test]
    fn equality_with_bounds() {
        // x + y = 5, 1 <= x <= 2, min y  ->  x = 2, y = 3
        let lp = Lp {
            n: 2,
            rows: vec![Row { coefs: vec![(0, 1), (1, 1)], cmp: Cmp::Eq, rhs: 5 }],
            lower: vec![1, 0],
            upper: vec![Some(2), None],
            cost: vec![0, 1],
        };
        match solve_lp(&lp, &mut 0) {
            LpOutcome::Optimal { x, .. } => assert_eq!(x, vec![q(2, 1), q(3, 1)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn q128_arithmetic() {
        let a = Q128::make(1, 3).unwrap();
        let b = Q128::make(1, 6).unwrap();
        assert_eq!(a.add(&b).unwrap(), Q128::make(1, 2).unwrap());
        assert_eq!(a.div(&b).unwrap(), Q128::from_i64(2));
        assert!(Q128::from_i64(i64::MAX).mul(&Q128::from_i64(i64::MAX)).is_some());
        let big = Q128 { n: i128::MAX / 2, d: 1 };
        assert!(big.mul(&Q128::from_i64(4)).is_none());
    }
}
