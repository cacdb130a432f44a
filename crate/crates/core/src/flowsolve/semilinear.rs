use std::collections::HashSet;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearSet {
    pub constant: Vec<u64>,
    pub periods: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemilinearSet {
    pub dim: usize,
    pub components: Vec<LinearSet>,
}

impl LinearSet {
    pub fn dim(&self) -> usize {
        self.constant.len()
    }

    /// Whether `v` is the constant plus a nonnegative combination of periods.
    pub fn contains(&self, v: &[u64]) -> bool {
        if v.len() != self.dim() || v.iter().zip(&self.constant).any(|(a, c)| a < c) {
            return false;
        }
        let rest: Vec<u64> = v.iter().zip(&self.constant).map(|(a, c)| a - c).collect();
        let periods: Vec<&Vec<u64>> = self.periods.iter().filter(|p| p.iter().any(|x| *x > 0)).collect();
        let mut dead = HashSet::new();
        reach(&periods, 0, rest, &mut dead)
    }
}

fn reach(periods: &[&Vec<u64>], j: usize, rest: Vec<u64>, dead: &mut HashSet<(usize, Vec<u64>)>) -> bool {
    if rest.iter().all(|x| *x == 0) {
        return true;
    }
    if j == periods.len() || dead.contains(&(j, rest.clone())) {
        return false;
    }
    let p = periods[j];
    let mut cur = rest.clone();
    loop {
        if reach(periods, j + 1, cur.clone(), dead) {
            return true;
        }
        if cur.iter().zip(p.iter()).any(|(a, b)| a < b) {
            break;
        }
        for (a, b) in cur.iter_mut().zip(p.iter()) {
            *a -= b;
        }
    }
    dead.insert((j, rest));
    false
}

impl SemilinearSet {
    pub fn check(&self) -> Result<()> {
        for c in &self.components {
            if c.dim() != self.dim || c.periods.iter().any(|p| p.len() != self.dim) {
                return Err(Error::invalid(format!("linear set does not have dimension {}", self.dim)));
            }
        }
        Ok(())
    }
}

/// Membership of `v` in the union of the linear sets.
pub fn semilinear_member(s: &SemilinearSet, v: &[u64]) -> Result<bool> {
    s.check()?;
    if v.len() != s.dim {
        return Err(Error::invalid(format!("vector has dimension {}, set has {}", v.len(), s.dim)));
    }
    Ok(s.components.iter().any(|c| c.contains(v)))
}

/// Every period has at most `m` nonzero coordinates.
pub fn is_m_positive(s: &SemilinearSet, m: usize) -> bool {
    s.components.iter().flat_map(|c| &c.periods).all(|p| p.iter().filter(|x| **x > 0).count() <= m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> SemilinearSet {
        SemilinearSet {
            dim: 2,
            components: vec![LinearSet { constant: vec![2, 3], periods: vec![vec![1, 2], vec![2, 5]] }],
        }
    }

    #[test]
    fn example_three_membership() {
        let s = q();
        assert!(semilinear_member(&s, &[2, 3]).unwrap());
        assert!(semilinear_member(&s, &[3, 5]).unwrap());
        assert!(!semilinear_member(&s, &[3, 4]).unwrap());
        assert!(!semilinear_member(&s, &[2, 2]).unwrap());
        assert!(semilinear_member(&s, &[4, 8]).unwrap());
        assert!(semilinear_member(&s, &[2]).is_err());
    }

    #[test]
    fn positivity() {
        assert!(is_m_positive(&q(), 2));
        assert!(!is_m_positive(&q(), 1));
        let s = SemilinearSet { dim: 3, components: vec![LinearSet { constant: vec![0; 3], periods: vec![vec![1, 1, 1]] }] };
        assert!(!is_m_positive(&s, 2));
        let s = SemilinearSet { dim: 1, components: vec![LinearSet { constant: vec![0], periods: vec![] }] };
        assert!(is_m_positive(&s, 1));
    }
}
