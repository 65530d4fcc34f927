//! Dense exact simplex for `max c·x` subject to `A·x ≤ b`, `x ≥ 0`, `b ≥ 0`.
//!
//! The origin is feasible, so no phase one is needed. Bland's rule
//! guarantees termination.

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::field::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("right-hand side {0} is negative")]
    NegativeRhs(usize),
    #[error("constraint matrix has inconsistent shape")]
    Shape,
    #[error("objective is unbounded")]
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpSolution {
    pub x: Vec<Rational>,
    pub value: Rational,
}

pub fn maximize(c: &[Rational], a: &[Vec<Rational>], b: &[Rational]) -> Result<LpSolution, LpError> {
    let n = c.len();
    let m = a.len();
    if b.len() != m || a.iter().any(|row| row.len() != n) {
        return Err(LpError::Shape);
    }
    if let Some(i) = b.iter().position(Signed::is_negative) {
        return Err(LpError::NegativeRhs(i));
    }
    let width = n + m + 1;
    let rhs = width - 1;
    let mut t: Vec<Vec<Rational>> = Vec::with_capacity(m + 1);
    for i in 0..m {
        let mut row = vec![Rational::zero(); width];
        row[..n].clone_from_slice(&a[i]);
        row[n + i] = Rational::from_integer(1.into());
        row[rhs] = b[i].clone();
        t.push(row);
    }
    let mut obj = vec![Rational::zero(); width];
    for j in 0..n {
        obj[j] = -c[j].clone();
    }
    t.push(obj);
    let mut basis: Vec<usize> = (n..n + m).collect();

    while let Some(enter) = (0..n + m).find(|&j| t[m][j].is_negative()) {
        let mut leave: Option<(usize, Rational)> = None;
        for i in 0..m {
            if !t[i][enter].is_positive() {
                continue;
            }
            let ratio = &t[i][rhs] / &t[i][enter];
            let better = match &leave {
                None => true,
                Some((k, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*k]),
            };
            if better {
                leave = Some((i, ratio));
            }
        }
        let (row, _) = leave.ok_or(LpError::Unbounded)?;
        pivot(&mut t, row, enter);
        basis[row] = enter;
    }

    let mut x = vec![Rational::zero(); n];
    for (i, &j) in basis.iter().enumerate() {
        if j < n {
            x[j] = t[i][rhs].clone();
        }
    }
    Ok(LpSolution { x, value: t[m][rhs].clone() })
}

fn pivot(t: &mut [Vec<Rational>], row: usize, col: usize) {
    let inv = t[row][col].recip();
    for v in t[row].iter_mut() {
        if !v.is_zero() {
            *v *= &inv;
        }
    }
    let pivot_row = t[row].clone();
    for (i, r) in t.iter_mut().enumerate() {
        if i == row || r[col].is_zero() {
            continue;
        }
        let factor = r[col].clone();
        for (v, p) in r.iter_mut().zip(&pivot_row) {
            if !p.is_zero() {
                *v -= &factor * p;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{int, rat};
    use proptest::prelude::*;

    #[test]
    fn textbook_example() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), value 36
        let sol = maximize(
            &[int(3), int(5)],
            &[vec![int(1), int(0)], vec![int(0), int(2)], vec![int(3), int(2)]],
            &[int(4), int(12), int(18)],
        )
        .unwrap();
        assert_eq!(sol.x, vec![int(2), int(6)]);
        assert_eq!(sol.value, int(36));
    }

    #[test]
    fn degenerate_and_fractional() {
        let sol = maximize(&[int(1), int(1)], &[vec![int(2), int(1)], vec![int(1), int(3)]], &[int(1), int(1)]).unwrap();
        assert_eq!(sol.value, rat(3, 5));
        let zero = maximize(&[int(1)], &[vec![int(1)]], &[int(0)]).unwrap();
        assert_eq!(zero.value, int(0));
    }

    #[test]
    fn errors() {
        assert_eq!(maximize(&[int(1)], &[vec![int(-1)]], &[int(1)]).unwrap_err(), LpError::Unbounded);
        assert_eq!(maximize(&[int(1)], &[vec![int(1)]], &[int(-1)]).unwrap_err(), LpError::NegativeRhs(0));
        assert_eq!(maximize(&[int(1)], &[vec![int(1), int(2)]], &[int(1)]).unwrap_err(), LpError::Shape);
    }

    proptest! {
        // a bounded box LP is solved by the upper corner
        #[test]
        fn box_constraints(bounds in proptest::collection::vec(0i64..20, 1..6), weights in proptest::collection::vec(1i64..5, 6)) {
            let n = bounds.len();
            let a: Vec<Vec<Rational>> = (0..n).map(|i| (0..n).map(|j| if i == j { int(1) } else { int(0) }).collect()).collect();
            let b: Vec<Rational> = bounds.iter().map(|&x| rat(x, 3)).collect();
            let c: Vec<Rational> = weights[..n].iter().map(|&w| int(w)).collect();
            let sol = maximize(&c, &a, &b).unwrap();
            prop_assert_eq!(&sol.x, &b);
        }
    }
}
