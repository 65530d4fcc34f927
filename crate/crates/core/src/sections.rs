//! Sections of `O(md)` as polynomials, their pointwise and sup norms, the
//! unit balls of sup norms as lattices, and finite-level relative volumes.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::field::{rational_valuation, FieldContext, FieldElement, FieldError, Rational, Valuation};
use crate::lattices::{scaled_weight, DiagonalNorm, FieldMatrix, Lattice, LatticeError};
use crate::metrics::Metric;
use crate::tree::TreePoint;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SectionError {
    #[error("section of degree {degree} exceeds the bound {bound}")]
    DegreeTooLarge { degree: usize, bound: usize },
    #[error("the zero section has no finite norm")]
    ZeroSection,
    #[error("level m must be positive")]
    ZeroLevel,
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(u32, u32),
    #[error("expected {expected} points, got {got}")]
    PointCount { expected: usize, got: usize },
    #[error("point {0} is outside the closed unit disc")]
    NotInUnitDisc(Rational),
    #[error("prime mismatch: {0} vs {1}")]
    PrimeMismatch(u64, u64),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Polynomial `Σ c_i zⁱ` viewed as a section of `O(bound)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    coeffs: Vec<Rational>,
}

impl Section {
    pub fn new(mut coeffs: Vec<Rational>, bound: usize) -> Result<Self, SectionError> {
        while coeffs.len() > bound + 1 && coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        if coeffs.len() > bound + 1 {
            return Err(SectionError::DegreeTooLarge { degree: coeffs.len() - 1, bound });
        }
        coeffs.resize(bound + 1, Rational::zero());
        Ok(Section { coeffs })
    }

    pub fn monomial(i: usize, bound: usize) -> Self {
        let mut coeffs = vec![Rational::zero(); bound + 1];
        coeffs[i] = Rational::one();
        Section { coeffs }
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn bound(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| !c.is_zero())
    }

    pub fn eval(&self, z: &Rational) -> Rational {
        self.coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * z + c)
    }

    /// Coefficients of `s` in powers of `z − a`.
    pub fn recentered(&self, a: &Rational) -> Vec<Rational> {
        let mut b = self.coeffs.clone();
        if a.is_zero() {
            return b;
        }
        let n = b.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                let carry = a * &b[j + 1];
                b[j] += carry;
            }
        }
        b
    }

    /// Product as a section of `O(bound₁ + bound₂)`.
    pub fn mul(&self, other: &Section) -> Section {
        let mut coeffs = vec![Rational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Section { coeffs }
    }

    pub fn to_vector(&self, ctx: FieldContext) -> Vec<FieldElement> {
        self.coeffs.iter().map(|c| ctx.from_rational(c.clone())).collect()
    }
}

fn level_weight(phi: &Metric, m: u32, x: &TreePoint) -> Rational {
    Rational::from_integer(BigInt::from(m)) * phi.evaluate(x)
}

fn section_bound(phi: &Metric, m: u32) -> usize {
    (m as usize) * (phi.degree() as usize)
}

/// Valuation of `|s(x)| e^{−mφ(x)}` at a point of the unit-disc region.
pub fn point_norm(s: &Section, x: &TreePoint, phi: &Metric, m: u32) -> Valuation {
    let shifted = s.recentered(&x.center_rational());
    let gauss = shifted
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            rational_valuation(x.p(), c)
                .map(|v| Rational::from_integer(BigInt::from(v)) + Rational::from_integer(BigInt::from(i)) * x.exponent())
        })
        .min();
    match gauss {
        Some(v) => Valuation::Finite(v + level_weight(phi, m, x)),
        None => Valuation::Infinite,
    }
}

/// Valuation of `sup |s| e^{−mφ}`: the minimum of [`point_norm`] over the
/// vertices of `φ`'s tree. Along an edge the point norm is a minimum of
/// affine functions plus an affine weight, hence concave; off the tree and
/// outside the unit disc it only grows.
pub fn sup_norm(s: &Section, phi: &Metric, m: u32) -> Result<Valuation, SectionError> {
    if m == 0 {
        return Err(SectionError::ZeroLevel);
    }
    let bound = section_bound(phi, m);
    if s.degree().is_some_and(|k| k > bound) {
        return Err(SectionError::DegreeTooLarge { degree: s.degree().unwrap(), bound });
    }
    if s.is_zero() {
        return Err(SectionError::ZeroSection);
    }
    Ok(phi.tree().vertices().iter().map(|x| point_norm(s, x, phi, m)).min().expect("trees are nonempty"))
}

/// Column `i` holds the monomial coefficients of `(z − a)ⁱ`.
pub fn recentering_matrix(ctx: FieldContext, a: &Rational, n: usize) -> FieldMatrix {
    let mut cols: Vec<Vec<Rational>> = Vec::with_capacity(n);
    let neg = -a.clone();
    let mut col = vec![Rational::zero(); n];
    col[0] = Rational::one();
    for i in 0..n {
        if i > 0 {
            // (z − a)ⁱ = z·(z − a)^{i−1} − a·(z − a)^{i−1}
            let prev = col.clone();
            for k in 0..n {
                let mut v = &prev[k] * &neg;
                if k > 0 {
                    v += &prev[k - 1];
                }
                col[k] = v;
            }
        }
        cols.push(col.clone());
    }
    let elements: Vec<Vec<FieldElement>> =
        cols.into_iter().map(|c| c.into_iter().map(|r| ctx.from_rational(r)).collect()).collect();
    FieldMatrix::from_columns(ctx, &elements)
}

/// Diagonal weights `i·q_x + m·g(x)` of the norm attached to vertex `x`.
fn vertex_weights(phi: &Metric, m: u32, x: &TreePoint) -> Vec<Rational> {
    let base = level_weight(phi, m, x);
    (0..=section_bound(phi, m))
        .map(|i| Rational::from_integer(BigInt::from(i)) * x.exponent() + &base)
        .collect()
}

/// The sup norm `‖·‖_{mφ}` as a minimum of diagonal norms, one per vertex.
#[derive(Debug, Clone)]
pub struct SectionNorm {
    norms: Vec<DiagonalNorm>,
}

impl SectionNorm {
    pub fn new(phi: &Metric, m: u32, ctx: FieldContext) -> Result<Self, SectionError> {
        if m == 0 {
            return Err(SectionError::ZeroLevel);
        }
        if ctx.p() != phi.p() {
            return Err(SectionError::PrimeMismatch(ctx.p(), phi.p()));
        }
        let n = section_bound(phi, m) + 1;
        let norms = phi
            .tree()
            .vertices()
            .iter()
            .map(|x| {
                let basis = recentering_matrix(ctx, &x.center_rational(), n);
                DiagonalNorm::new(basis, vertex_weights(phi, m, x))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SectionNorm { norms })
    }

    pub fn norms(&self) -> &[DiagonalNorm] {
        &self.norms
    }

    pub fn norm(&self, v: &[FieldElement]) -> Result<Valuation, SectionError> {
        let mut best = Valuation::Infinite;
        for d in &self.norms {
            best = std::cmp::min(best, d.norm(v)?);
        }
        Ok(best)
    }

    pub fn unit_ball(&self) -> Result<Lattice, SectionError> {
        let mut balls = self.norms.iter().map(DiagonalNorm::unit_ball);
        let mut acc = balls.next().expect("at least the Gauss point")?;
        for ball in balls {
            acc = acc.intersect(&ball?)?;
        }
        Ok(acc)
    }
}

/// Unit ball of `‖·‖_{mφ}` as a lattice over `K_M`.
pub fn sup_norm_lattice(phi: &Metric, m: u32, ctx: FieldContext) -> Result<Lattice, SectionError> {
    SectionNorm::new(phi, m, ctx)?.unit_ball()
}

fn lcm_denominators<'a>(values: impl Iterator<Item = &'a Rational>) -> u32 {
    values.fold(BigInt::one(), |acc, r| acc.lcm(r.denom())).try_into().expect("ramification fits in u32")
}

/// Smallest `M` putting every weight `i·q_x + m·g(x)` of every metric and
/// level into `(1/M)ℤ`.
pub fn ramification_for(metrics: &[&Metric], levels: &[u32]) -> u32 {
    let mut values: Vec<Rational> = Vec::new();
    for phi in metrics {
        for (x, g) in phi.tree().vertices().iter().zip(phi.potential().values()) {
            values.push(x.exponent().clone());
            for &m in levels {
                values.push(Rational::from_integer(BigInt::from(m)) * g);
            }
        }
    }
    lcm_denominators(values.iter())
}

fn check_pair(phi: &Metric, psi: &Metric, m: u32) -> Result<(), SectionError> {
    if m == 0 {
        return Err(SectionError::ZeroLevel);
    }
    if phi.degree() != psi.degree() {
        return Err(SectionError::DegreeMismatch(phi.degree(), psi.degree()));
    }
    if phi.p() != psi.p() {
        return Err(SectionError::PrimeMismatch(phi.p(), psi.p()));
    }
    Ok(())
}

/// `vol(‖·‖_{mφ}, ‖·‖_{mψ})` computed over `K_M` by explicit lattices.
pub fn vol_m_over_field(phi: &Metric, psi: &Metric, m: u32, ramification: u32) -> Result<Rational, SectionError> {
    check_pair(phi, psi, m)?;
    let ctx = FieldContext::new(phi.p(), ramification)?;
    let a = sup_norm_lattice(phi, m, ctx)?;
    let b = sup_norm_lattice(psi, m, ctx)?;
    Ok(b.det_valuation() - a.det_valuation())
}

/// `v(det)` of the unit ball of `‖·‖_{mφ}` over `K_M`, via its rational
/// slices.
///
/// Writing a vector as `Σ_r π^r y_r` with rational `y_r`, the condition
/// `v(c_i) ≥ −w_i` splits into `v_p(c_i(y_r)) ≥ ⌈−w_i − r/M⌉` for each
/// `r < M`, so the ball is a direct sum of `M` lattices over `ℤ_(p)` and its
/// determinant valuation is the average of theirs.
pub fn unit_ball_log_det(phi: &Metric, m: u32, ramification: u32) -> Result<Rational, SectionError> {
    if m == 0 {
        return Err(SectionError::ZeroLevel);
    }
    let p = phi.p();
    let rationals = FieldContext::rationals(p)?;
    let n = section_bound(phi, m) + 1;
    let big_m = Rational::from_integer(BigInt::from(ramification));

    // vertices sharing a center share a basis; their constraints merge
    let mut groups: Vec<(Rational, Vec<i64>)> = Vec::new();
    for x in phi.tree().vertices() {
        let scaled: Vec<i64> = vertex_weights(phi, m, x)
            .iter()
            .map(|w| scaled_weight(w, ramification))
            .collect::<Result<_, _>>()?;
        let center = x.center_rational();
        match groups.iter_mut().find(|(c, _)| *c == center) {
            Some((_, ws)) => {
                for (acc, w) in ws.iter_mut().zip(scaled) {
                    *acc = (*acc).min(w);
                }
            }
            None => groups.push((center, scaled)),
        }
    }
    let bases: Vec<FieldMatrix> = groups.iter().map(|(c, _)| recentering_matrix(rationals, c, n)).collect();

    let mut memo: HashMap<Vec<i64>, i64> = HashMap::new();
    let mut total = 0i64;
    for r in 0..i64::from(ramification) {
        // ⌈(−M·w − r)/M⌉ for each scaled weight M·w
        let exponents: Vec<i64> = groups
            .iter()
            .flat_map(|(_, ws)| ws.iter().map(move |&w| Integer::div_ceil(&(-w - r), &i64::from(ramification))))
            .collect();
        if let Some(&v) = memo.get(&exponents) {
            total += v;
            continue;
        }
        let mut acc: Option<Lattice> = None;
        for (k, basis) in bases.iter().enumerate() {
            let ball = Lattice::new(basis.shift_columns(&exponents[k * n..(k + 1) * n]))?;
            acc = Some(match acc {
                None => ball,
                Some(prev) => prev.intersect(&ball)?,
            });
        }
        let v = acc.expect("at least one vertex").det_scaled_valuation();
        memo.insert(exponents, v);
        total += v;
    }
    Ok(Rational::from_integer(BigInt::from(total)) / big_m)
}

/// `vol(‖·‖_{mφ}, ‖·‖_{mψ})` over `K_M` for the given ramification.
pub fn vol_m_with(phi: &Metric, psi: &Metric, m: u32, ramification: u32) -> Result<Rational, SectionError> {
    check_pair(phi, psi, m)?;
    Ok(unit_ball_log_det(psi, m, ramification)? - unit_ball_log_det(phi, m, ramification)?)
}

/// `vol(‖·‖_{mφ}, ‖·‖_{mψ})` with the smallest admissible ramification.
pub fn vol_m(phi: &Metric, psi: &Metric, m: u32) -> Result<Rational, SectionError> {
    let ramification = ramification_for(&[phi, psi], &[m]);
    vol_m_with(phi, psi, m, ramification)
}

/// Valuation of `|det(zⁱ(x_j))|` weighted by `e^{−mφ}` at each point.
pub fn vandermonde_value(points: &[Rational], phi: &Metric, m: u32) -> Result<Valuation, SectionError> {
    if m == 0 {
        return Err(SectionError::ZeroLevel);
    }
    let expected = section_bound(phi, m) + 1;
    if points.len() != expected {
        return Err(SectionError::PointCount { expected, got: points.len() });
    }
    let p = phi.p();
    if let Some(x) = points.iter().find(|x| rational_valuation(p, x).is_some_and(|v| v < 0)) {
        return Err(SectionError::NotInUnitDisc(x.clone()));
    }
    let mut total = Rational::zero();
    for (i, x) in points.iter().enumerate() {
        for y in &points[i + 1..] {
            match rational_valuation(p, &(x - y)) {
                Some(v) => total += Rational::from_integer(BigInt::from(v)),
                None => return Ok(Valuation::Infinite),
            }
        }
        total += Rational::from_integer(BigInt::from(m)) * phi.potential().evaluate_rational(x);
    }
    Ok(Valuation::Finite(total))
}

/// `true` when `a` and `b` lie in the same residue disc of radius `1`.
pub fn same_residue_disc(p: u64, a: &Rational, b: &Rational) -> bool {
    rational_valuation(p, &(a - b)).is_none_or(|v| v > 0)
}

/// `vol_m/(m·N)` with `N = md + 1`.
pub fn normalized_per_section(vol: &Rational, m: u32, degree: u32) -> Rational {
    let n = u64::from(m) * u64::from(degree) + 1;
    vol / Rational::from_integer(BigInt::from(u64::from(m) * n))
}
