//! Exact arithmetic in the Eisenstein extensions `K_M = Q[π]/(π^M − p)` of the
//! p-adic rationals.
//!
//! Elements are stored as `M` rational coordinates in the basis
//! `1, π, …, π^{M−1}`. Valuations are normalized by `v(p) = 1`, so
//! `v(π) = 1/M` and every valuation lies in `(1/M)·ℤ`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("ramification index must be positive")]
    ZeroRamification,
    #[error("division by zero in K_{0}")]
    DivisionByZero(u32),
    #[error("cannot embed K_{from} into K_{to}: {to} is not a multiple of {from}")]
    NotAMultiple { from: u32, to: u32 },
    #[error("elements live in different fields (p={0}, M={1}) vs (p={2}, M={3})")]
    ContextMismatch(u64, u32, u64, u32),
}

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Number of times `p` divides a nonzero integer; `None` for zero.
pub fn int_valuation(p: u64, n: &BigInt) -> Option<i64> {
    if n.is_zero() {
        return None;
    }
    let p = BigInt::from(p);
    let mut n = n.abs();
    let mut v = 0;
    loop {
        let (q, r) = n.div_rem(&p);
        if !r.is_zero() {
            return Some(v);
        }
        n = q;
        v += 1;
    }
}

/// p-adic valuation of a rational; `None` for zero.
pub fn rational_valuation(p: u64, r: &Rational) -> Option<i64> {
    let num = int_valuation(p, r.numer())?;
    let den = int_valuation(p, r.denom()).unwrap_or(0);
    Some(num - den)
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// An exact valuation: a rational, or `+∞` for zero. Ordered with `+∞` last.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Valuation {
    Finite(Rational),
    Infinite,
}

impl Valuation {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Valuation::Infinite)
    }

    /// Adds a finite shift; `+∞` absorbs it.
    pub fn shifted(&self, by: &Rational) -> Valuation {
        match self {
            Valuation::Finite(v) => Valuation::Finite(v + by),
            Valuation::Infinite => Valuation::Infinite,
        }
    }
}

impl Add for &Valuation {
    type Output = Valuation;
    fn add(self, rhs: &Valuation) -> Valuation {
        match (self, rhs) {
            (Valuation::Finite(a), Valuation::Finite(b)) => Valuation::Finite(a + b),
            _ => Valuation::Infinite,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinite => write!(f, "+inf"),
        }
    }
}

/// The field `K_M`: prime `p` and ramification index `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldContext {
    p: u64,
    ramification: u32,
}

impl FieldContext {
    pub fn new(p: u64, ramification: u32) -> Result<Self, FieldError> {
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        if ramification == 0 {
            return Err(FieldError::ZeroRamification);
        }
        Ok(FieldContext { p, ramification })
    }

    /// The p-adic rationals themselves (`M = 1`).
    pub fn rationals(p: u64) -> Result<Self, FieldError> {
        Self::new(p, 1)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn ramification(&self) -> u32 {
        self.ramification
    }

    pub fn with_ramification(&self, ramification: u32) -> Result<Self, FieldError> {
        Self::new(self.p, ramification)
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement {
            ctx: *self,
            num: vec![BigInt::zero(); self.ramification as usize],
            den: BigInt::one(),
        }
    }

    pub fn one(&self) -> FieldElement {
        self.from_rational(Rational::one())
    }

    pub fn from_rational(&self, r: Rational) -> FieldElement {
        let (n, d) = r.into_raw();
        let mut x = self.zero();
        x.num[0] = n;
        x.den = d;
        x
    }

    pub fn from_int(&self, n: i64) -> FieldElement {
        self.from_rational(int(n))
    }

    /// The uniformizer `π`.
    pub fn uniformizer(&self) -> FieldElement {
        self.pi_power(1)
    }

    /// `π^k` for any integer `k`, i.e. `p^{⌊k/M⌋}·π^{k mod M}`.
    pub fn pi_power(&self, k: i64) -> FieldElement {
        let m = self.ramification as i64;
        let (q, r) = k.div_mod_floor(&m);
        let power = BigInt::from(self.p).pow(q.unsigned_abs() as u32);
        let mut x = self.zero();
        if q >= 0 {
            x.num[r as usize] = power;
        } else {
            x.num[r as usize] = BigInt::one();
            x.den = power;
        }
        x
    }

    /// Builds an element from its coordinates in `1, π, …, π^{M−1}`.
    pub fn element(&self, coeffs: Vec<Rational>) -> FieldElement {
        assert_eq!(coeffs.len(), self.ramification as usize, "coordinate count must equal M");
        let den = coeffs.iter().fold(BigInt::one(), |l, a| l.lcm(a.denom()));
        let num = coeffs.iter().map(|a| a.numer() * (&den / a.denom())).collect();
        FieldElement::normalized(*self, num, den)
    }
}

/// `p^k` as a rational, for any integer `k`.
pub fn rational_pow(p: u64, k: i64) -> Rational {
    let base = BigInt::from(p).pow(k.unsigned_abs() as u32);
    if k >= 0 {
        Rational::from_integer(base)
    } else {
        Rational::new(BigInt::one(), base)
    }
}

/// An element `Σ a_j π^j` of `K_M`, stored as integer numerators over one
/// positive common denominator in lowest terms.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FieldElement {
    ctx: FieldContext,
    num: Vec<BigInt>,
    den: BigInt,
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (j, a) in self.coeffs().iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            terms.push(match j {
                0 => format!("{a}"),
                1 => format!("{a}*pi"),
                _ => format!("{a}*pi^{j}"),
            });
        }
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

impl FieldElement {
    fn normalized(ctx: FieldContext, mut num: Vec<BigInt>, mut den: BigInt) -> FieldElement {
        if den.is_negative() {
            den = -den;
            for n in num.iter_mut() {
                *n = -&*n;
            }
        }
        let mut g = den.clone();
        for n in &num {
            if g.is_one() {
                break;
            }
            if !n.is_zero() {
                g = g.gcd(n);
            }
        }
        if num.iter().all(Zero::is_zero) {
            den = BigInt::one();
        } else if !g.is_one() {
            for n in num.iter_mut() {
                *n = &*n / &g;
            }
            den /= g;
        }
        FieldElement { ctx, num, den }
    }

    pub fn ctx(&self) -> FieldContext {
        self.ctx
    }

    pub fn coeffs(&self) -> Vec<Rational> {
        self.num.iter().map(|n| Rational::new(n.clone(), self.den.clone())).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.num.iter().all(Zero::is_zero)
    }

    /// The rational value when the element lies in `Q`.
    pub fn as_rational(&self) -> Option<Rational> {
        if self.num[1..].iter().all(Zero::is_zero) {
            Some(Rational::new(self.num[0].clone(), self.den.clone()))
        } else {
            None
        }
    }

    /// Valuation in units of `1/M`: `min_j (M·v_p(a_j) + j)`.
    ///
    /// The candidates are pairwise distinct modulo `M`, so the ultrametric
    /// inequality is an equality and the minimum is the exact valuation.
    pub fn scaled_valuation(&self) -> Option<i64> {
        let m = self.ctx.ramification as i64;
        let shift = if self.den.is_one() { 0 } else { int_valuation(self.ctx.p, &self.den).unwrap_or(0) };
        self.num
            .iter()
            .enumerate()
            .filter_map(|(j, a)| int_valuation(self.ctx.p, a).map(|v| (v - shift) * m + j as i64))
            .min()
    }

    pub fn valuation(&self) -> Valuation {
        match self.scaled_valuation() {
            Some(s) => Valuation::Finite(Rational::new(
                BigInt::from(s),
                BigInt::from(self.ctx.ramification),
            )),
            None => Valuation::Infinite,
        }
    }

    /// True when `v(self) ≥ 0`.
    pub fn is_integral(&self) -> bool {
        self.scaled_valuation().is_none_or(|v| v >= 0)
    }

    pub fn scale(&self, r: &Rational) -> FieldElement {
        let num = self.num.iter().map(|a| a * r.numer()).collect();
        FieldElement::normalized(self.ctx, num, &self.den * r.denom())
    }

    /// Multiplication by `π^k`.
    pub fn shift(&self, k: i64) -> FieldElement {
        if k == 0 {
            return self.clone();
        }
        self * &self.ctx.pi_power(k)
    }

    fn check_ctx(&self, other: &FieldElement) {
        assert!(
            self.ctx == other.ctx,
            "{}",
            FieldError::ContextMismatch(self.ctx.p, self.ctx.ramification, other.ctx.p, other.ctx.ramification)
        );
    }

    /// Multiplicative inverse, solving `x·y = 1` as a rational linear system.
    pub fn inv(&self) -> Result<FieldElement, FieldError> {
        if self.is_zero() {
            return Err(FieldError::DivisionByZero(self.ctx.ramification));
        }
        let m = self.ctx.ramification as usize;
        let mut support = self.num.iter().enumerate().filter(|(_, a)| !a.is_zero());
        let (j, a) = support.next().expect("nonzero");
        if support.next().is_none() {
            // (a/den)·π^j has inverse (den/a)·π^{−j}
            return Ok(self.ctx.pi_power(-(j as i64)).scale(&Rational::new(self.den.clone(), a.clone())));
        }
        // Column j of the multiplication-by-numerator matrix is n·π^j.
        let numerator = FieldElement { ctx: self.ctx, num: self.num.clone(), den: BigInt::one() };
        let mut a: Vec<Vec<Rational>> = vec![vec![Rational::zero(); m + 1]; m];
        let mut col = numerator;
        let pi = self.ctx.uniformizer();
        for j in 0..m {
            for (i, row) in a.iter_mut().enumerate() {
                row[j] = Rational::from_integer(col.num[i].clone());
            }
            col = &col * &pi;
        }
        a[0][m] = Rational::one();
        let y = solve_augmented(a).expect("multiplication by a nonzero element is invertible");
        Ok(self.ctx.element(y).scale(&Rational::from_integer(self.den.clone())))
    }

    pub fn div(&self, other: &FieldElement) -> Result<FieldElement, FieldError> {
        Ok(self * &other.inv()?)
    }

    /// Image under `K_M → K_{M'}`, `π ↦ π'^{M'/M}`.
    pub fn embed(&self, target: u32) -> Result<FieldElement, FieldError> {
        let from = self.ctx.ramification;
        if target == 0 || !target.is_multiple_of(from) {
            return Err(FieldError::NotAMultiple { from, to: target });
        }
        let step = (target / from) as usize;
        let ctx = self.ctx.with_ramification(target)?;
        let mut out = ctx.zero();
        for (j, a) in self.num.iter().enumerate() {
            out.num[j * step] = a.clone();
        }
        out.den = self.den.clone();
        Ok(out)
    }

    /// Numerators of `self` and `other` over a shared denominator.
    fn aligned(&self, other: &FieldElement) -> (Vec<BigInt>, Vec<BigInt>, BigInt) {
        if self.den == other.den {
            return (self.num.clone(), other.num.clone(), self.den.clone());
        }
        let g = self.den.gcd(&other.den);
        let a = &other.den / &g;
        let b = &self.den / &g;
        let left = self.num.iter().map(|n| n * &a).collect();
        let right = other.num.iter().map(|n| n * &b).collect();
        (left, right, &self.den * a)
    }
}

/// Gauss–Jordan on an augmented `n × (n+1)` rational system.
fn solve_augmented(mut a: Vec<Vec<Rational>>) -> Option<Vec<Rational>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        let inv = a[col][col].recip();
        for x in a[col].iter_mut() {
            *x = &*x * &inv;
        }
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col && !row[col].is_zero() {
                let factor = row[col].clone();
                for (x, y) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= &factor * y;
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[n].clone()).collect())
}

impl Add for &FieldElement {
    type Output = FieldElement;
    fn add(self, rhs: &FieldElement) -> FieldElement {
        self.check_ctx(rhs);
        if rhs.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return rhs.clone();
        }
        let (a, b, den) = self.aligned(rhs);
        let num = a.into_iter().zip(b).map(|(x, y)| x + y).collect();
        FieldElement::normalized(self.ctx, num, den)
    }
}

impl Sub for &FieldElement {
    type Output = FieldElement;
    fn sub(self, rhs: &FieldElement) -> FieldElement {
        self.check_ctx(rhs);
        if rhs.is_zero() {
            return self.clone();
        }
        let (a, b, den) = self.aligned(rhs);
        let num = a.into_iter().zip(b).map(|(x, y)| x - y).collect();
        FieldElement::normalized(self.ctx, num, den)
    }
}

impl Neg for &FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        FieldElement {
            ctx: self.ctx,
            num: self.num.iter().map(|a| -a).collect(),
            den: self.den.clone(),
        }
    }
}

impl Mul for &FieldElement {
    type Output = FieldElement;
    fn mul(self, rhs: &FieldElement) -> FieldElement {
        self.check_ctx(rhs);
        let m = self.ctx.ramification as usize;
        if self.is_zero() || rhs.is_zero() {
            return self.ctx.zero();
        }
        let mut low = vec![BigInt::zero(); m];
        let mut high = vec![BigInt::zero(); m];
        for (i, a) in self.num.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.num.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let k = i + j;
                if k < m {
                    low[k] += a * b;
                } else {
                    high[k - m] += a * b;
                }
            }
        }
        // π^M = p
        let p = BigInt::from(self.ctx.p);
        for (l, h) in low.iter_mut().zip(high) {
            if !h.is_zero() {
                *l += h * &p;
            }
        }
        FieldElement::normalized(self.ctx, low, &self.den * &rhs.den)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for FieldElement {
            type Output = FieldElement;
            fn $method(self, rhs: FieldElement) -> FieldElement {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&FieldElement> for FieldElement {
            type Output = FieldElement;
            fn $method(self, rhs: &FieldElement) -> FieldElement {
                (&self).$method(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        -&self
    }
}
