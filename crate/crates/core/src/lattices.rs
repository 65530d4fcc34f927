//! Lattices over the valuation ring of `K_M`.
//!
//! A lattice is stored through a basis matrix whose columns span it over
//! the valuation ring. Everything reduces to two kernels: determinant
//! valuations (relative volumes) and the Smith normal form (contents and
//! intersections). Both pivot on a minimal-valuation entry, so every
//! elimination multiplier is integral and every transform unimodular.

use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;
use thiserror::Error;

use crate::field::{FieldContext, FieldElement, FieldError, Rational, Valuation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("inner lattice is not contained in the outer lattice")]
    NotContained,
    #[error("weight {weight} is not in the value group (1/{ramification})Z")]
    WeightOutsideValueGroup { weight: Rational, ramification: u32 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Dense row-major matrix over `K_M`.
#[derive(Clone, PartialEq, Eq)]
pub struct FieldMatrix {
    ctx: FieldContext,
    rows: usize,
    cols: usize,
    data: Vec<FieldElement>,
}

impl fmt::Debug for FieldMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}x{} over K_{}]", self.rows, self.cols, self.ctx.ramification())?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self[(i, j)].to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for FieldMatrix {
    type Output = FieldElement;
    fn index(&self, (i, j): (usize, usize)) -> &FieldElement {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for FieldMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut FieldElement {
        &mut self.data[i * self.cols + j]
    }
}

impl FieldMatrix {
    pub fn from_fn(
        ctx: FieldContext,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> FieldElement,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        FieldMatrix { ctx, rows, cols, data }
    }

    pub fn zeros(ctx: FieldContext, rows: usize, cols: usize) -> Self {
        Self::from_fn(ctx, rows, cols, |_, _| ctx.zero())
    }

    pub fn identity(ctx: FieldContext, n: usize) -> Self {
        Self::from_fn(ctx, n, n, |i, j| if i == j { ctx.one() } else { ctx.zero() })
    }

    pub fn diagonal(ctx: FieldContext, entries: Vec<FieldElement>) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(ctx, n, n);
        for (i, e) in entries.into_iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    /// Matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(ctx: FieldContext, columns: &[Vec<FieldElement>]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        Self::from_fn(ctx, rows, cols, |i, j| columns[j][i].clone())
    }

    pub fn ctx(&self) -> FieldContext {
        self.ctx
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn column(&self, j: usize) -> Vec<FieldElement> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn mul(&self, other: &FieldMatrix) -> Result<FieldMatrix, LatticeError> {
        if self.cols != other.rows {
            return Err(LatticeError::DimensionMismatch(self.cols, other.rows));
        }
        let mut out = FieldMatrix::zeros(self.ctx, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if b.is_zero() {
                        continue;
                    }
                    out[(i, j)] = &out[(i, j)] + &(a * b);
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[FieldElement]) -> Result<Vec<FieldElement>, LatticeError> {
        if self.cols != v.len() {
            return Err(LatticeError::DimensionMismatch(self.cols, v.len()));
        }
        Ok((0..self.rows)
            .map(|i| {
                (0..self.cols).fold(self.ctx.zero(), |acc, j| {
                    if v[j].is_zero() || self[(i, j)].is_zero() {
                        acc
                    } else {
                        &acc + &(&self[(i, j)] * &v[j])
                    }
                })
            })
            .collect())
    }

    /// Multiplies column `j` by `π^{shifts[j]}`.
    pub fn shift_columns(&self, shifts: &[i64]) -> FieldMatrix {
        let mut out = self.clone();
        for (j, &s) in shifts.iter().enumerate() {
            if s == 0 {
                continue;
            }
            let factor = self.ctx.pi_power(s);
            for i in 0..self.rows {
                out[(i, j)] = &self[(i, j)] * &factor;
            }
        }
        out
    }

    /// Smallest valuation among the entries, `+∞` for the zero matrix.
    pub fn min_valuation(&self) -> Valuation {
        self.data.iter().map(FieldElement::valuation).min().unwrap_or(Valuation::Infinite)
    }

    /// True when every entry has valuation `≥ 0`.
    pub fn is_integral(&self) -> bool {
        self.data.iter().all(FieldElement::is_integral)
    }

    /// Valuation of the determinant in units of `1/M`, `None` if singular.
    pub fn det_scaled_valuation(&self) -> Option<i64> {
        assert!(self.is_square(), "determinant of a non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut total = 0i64;
        for k in 0..n {
            let (pivot_row, pivot_val) = (k..n)
                .filter_map(|r| a[(r, k)].scaled_valuation().map(|v| (r, v)))
                .min_by_key(|&(_, v)| v)?;
            total += pivot_val;
            a.swap_rows(k, pivot_row);
            let pinv = a[(k, k)].inv().ok()?;
            for r in k + 1..n {
                if a[(r, k)].is_zero() {
                    continue;
                }
                let c = &a[(r, k)] * &pinv;
                for j in k + 1..n {
                    if a[(k, j)].is_zero() {
                        continue;
                    }
                    let delta = &c * &a[(k, j)];
                    a[(r, j)] = &a[(r, j)] - &delta;
                }
            }
        }
        Some(total)
    }

    pub fn det_valuation(&self) -> Valuation {
        match self.det_scaled_valuation() {
            Some(s) => Valuation::Finite(Rational::new(
                BigInt::from(s),
                BigInt::from(self.ctx.ramification()),
            )),
            None => Valuation::Infinite,
        }
    }

    /// Solves `self · X = rhs` for square invertible `self`.
    pub fn solve(&self, rhs: &FieldMatrix) -> Result<FieldMatrix, LatticeError> {
        if !self.is_square() {
            return Err(LatticeError::DimensionMismatch(self.rows, self.cols));
        }
        if rhs.rows != self.rows {
            return Err(LatticeError::DimensionMismatch(self.rows, rhs.rows));
        }
        let n = self.rows;
        let m = rhs.cols;
        let mut a = self.clone();
        let mut b = rhs.clone();
        for k in 0..n {
            let (pivot_row, _) = (k..n)
                .filter_map(|r| a[(r, k)].scaled_valuation().map(|v| (r, v)))
                .min_by_key(|&(_, v)| v)
                .ok_or(LatticeError::Singular)?;
            a.swap_rows(k, pivot_row);
            b.swap_rows(k, pivot_row);
            let pinv = a[(k, k)].inv()?;
            for j in k..n {
                a[(k, j)] = &a[(k, j)] * &pinv;
            }
            for j in 0..m {
                b[(k, j)] = &b[(k, j)] * &pinv;
            }
            for r in 0..n {
                if r == k || a[(r, k)].is_zero() {
                    continue;
                }
                let c = a[(r, k)].clone();
                for j in k..n {
                    if a[(k, j)].is_zero() {
                        continue;
                    }
                    let delta = &c * &a[(k, j)];
                    a[(r, j)] = &a[(r, j)] - &delta;
                }
                for j in 0..m {
                    if b[(k, j)].is_zero() {
                        continue;
                    }
                    let delta = &c * &b[(k, j)];
                    b[(r, j)] = &b[(r, j)] - &delta;
                }
            }
        }
        Ok(b)
    }

    pub fn inverse(&self) -> Result<FieldMatrix, LatticeError> {
        self.solve(&FieldMatrix::identity(self.ctx, self.rows))
    }

    pub fn embed(&self, target: u32) -> Result<FieldMatrix, LatticeError> {
        let ctx = self.ctx.with_ramification(target)?;
        let data = self.data.iter().map(|x| x.embed(target)).collect::<Result<Vec<_>, _>>()?;
        Ok(FieldMatrix { ctx, rows: self.rows, cols: self.cols, data })
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row_r ← row_r − c·row_k
    fn row_axpy(&mut self, r: usize, k: usize, c: &FieldElement, from: usize) {
        for j in from..self.cols {
            if self[(k, j)].is_zero() {
                continue;
            }
            let delta = c * &self[(k, j)];
            self[(r, j)] = &self[(r, j)] - &delta;
        }
    }

    /// col_s ← col_s − c·col_k
    fn col_axpy(&mut self, s: usize, k: usize, c: &FieldElement) {
        for i in 0..self.rows {
            if self[(i, k)].is_zero() {
                continue;
            }
            let delta = c * &self[(i, k)];
            self[(i, s)] = &self[(i, s)] - &delta;
        }
    }
}

/// `U·A·V = diag(diagonal)` with `U`, `V` unimodular and diagonal valuations
/// nondecreasing.
#[derive(Debug, Clone)]
pub struct SmithForm {
    pub left: FieldMatrix,
    pub left_inverse: FieldMatrix,
    pub right: FieldMatrix,
    pub diagonal: Vec<FieldElement>,
}

impl SmithForm {
    pub fn valuations(&self) -> Vec<Rational> {
        self.diagonal
            .iter()
            .map(|d| d.valuation().finite().cloned().expect("Smith diagonal of an invertible matrix is nonzero"))
            .collect()
    }

    /// Diagonal valuations in units of `1/M`.
    pub fn scaled_valuations(&self) -> Vec<i64> {
        self.diagonal.iter().map(|d| d.scaled_valuation().expect("nonzero diagonal")).collect()
    }
}

#[derive(Clone, Copy)]
struct Tracking {
    left: bool,
    left_inverse: bool,
    right: bool,
}

pub fn smith_normal_form(a: &FieldMatrix) -> Result<SmithForm, LatticeError> {
    smith_with(a, Tracking { left: true, left_inverse: true, right: true })
}

fn smith_with(a: &FieldMatrix, track: Tracking) -> Result<SmithForm, LatticeError> {
    if !a.is_square() {
        return Err(LatticeError::DimensionMismatch(a.rows, a.cols));
    }
    let ctx = a.ctx;
    let n = a.rows;
    let empty = FieldMatrix::zeros(ctx, 0, 0);
    let ident = || FieldMatrix::identity(ctx, n);
    let mut work = a.clone();
    let mut left = if track.left { ident() } else { empty.clone() };
    let mut left_inv = if track.left_inverse { ident() } else { empty.clone() };
    let mut right = if track.right { ident() } else { empty };

    for k in 0..n {
        let mut best: Option<(usize, usize, i64)> = None;
        for i in k..n {
            for j in k..n {
                if let Some(v) = work[(i, j)].scaled_valuation() {
                    if best.is_none_or(|(_, _, b)| v < b) {
                        best = Some((i, j, v));
                    }
                }
            }
        }
        let (pi, pj, _) = best.ok_or(LatticeError::Singular)?;
        work.swap_rows(k, pi);
        if track.left {
            left.swap_rows(k, pi);
        }
        if track.left_inverse {
            left_inv.swap_cols(k, pi);
        }
        work.swap_cols(k, pj);
        if track.right {
            right.swap_cols(k, pj);
        }
        let pinv = work[(k, k)].inv()?;
        for r in k + 1..n {
            if work[(r, k)].is_zero() {
                continue;
            }
            let c = &work[(r, k)] * &pinv;
            work.row_axpy(r, k, &c, k);
            if track.left {
                left.row_axpy(r, k, &c, 0);
            }
            if track.left_inverse {
                // U⁻¹ ← U⁻¹·(I + c·e_r·e_kᵀ): col_k += c·col_r
                let neg = -&c;
                left_inv.col_axpy(k, r, &neg);
            }
        }
        for s in k + 1..n {
            if work[(k, s)].is_zero() {
                continue;
            }
            let c = &work[(k, s)] * &pinv;
            work[(k, s)] = ctx.zero();
            if track.right {
                right.col_axpy(s, k, &c);
            }
        }
    }
    let diagonal = (0..n).map(|i| work[(i, i)].clone()).collect();
    Ok(SmithForm { left, left_inverse: left_inv, right, diagonal })
}

/// Full-rank module over the valuation ring, spanned by the basis columns.
#[derive(Clone, Debug)]
pub struct Lattice {
    basis: FieldMatrix,
}

impl Lattice {
    pub fn new(basis: FieldMatrix) -> Result<Self, LatticeError> {
        if !basis.is_square() {
            return Err(LatticeError::DimensionMismatch(basis.rows, basis.cols));
        }
        if basis.det_scaled_valuation().is_none() {
            return Err(LatticeError::Singular);
        }
        Ok(Lattice { basis })
    }

    /// `span{π^{e_i}·e_i}`.
    pub fn diagonal(ctx: FieldContext, exponents: &[i64]) -> Self {
        let entries = exponents.iter().map(|&e| ctx.pi_power(e)).collect();
        Lattice { basis: FieldMatrix::diagonal(ctx, entries) }
    }

    pub fn standard(ctx: FieldContext, n: usize) -> Self {
        Lattice { basis: FieldMatrix::identity(ctx, n) }
    }

    pub fn basis(&self) -> &FieldMatrix {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.rows
    }

    pub fn ctx(&self) -> FieldContext {
        self.basis.ctx
    }

    fn check_dim(&self, other: &Lattice) -> Result<(), LatticeError> {
        if self.dim() != other.dim() {
            return Err(LatticeError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(())
    }

    /// Coordinates of `other`'s basis in `self`'s basis.
    pub fn transition_to(&self, other: &Lattice) -> Result<FieldMatrix, LatticeError> {
        self.check_dim(other)?;
        self.basis.solve(&other.basis)
    }

    /// `other ⊆ self`.
    pub fn contains(&self, other: &Lattice) -> Result<bool, LatticeError> {
        Ok(self.transition_to(other)?.is_integral())
    }

    /// Equality as modules, decided by mutual containment.
    pub fn same_as(&self, other: &Lattice) -> Result<bool, LatticeError> {
        Ok(self.contains(other)? && other.contains(self)?)
    }

    /// Lattice norm in valuation form: the largest `v(a)` with `v ∈ a·L`,
    /// which is `min_i v(c_i)` for the coordinates `c` of `v` in the basis.
    pub fn norm(&self, v: &[FieldElement]) -> Result<Valuation, LatticeError> {
        if v.len() != self.dim() {
            return Err(LatticeError::DimensionMismatch(self.dim(), v.len()));
        }
        let rhs = FieldMatrix::from_columns(self.ctx(), &[v.to_vec()]);
        let coords = self.basis.solve(&rhs)?;
        Ok(coords.min_valuation())
    }

    pub fn scaled(&self, a: &FieldElement) -> Lattice {
        let basis = FieldMatrix {
            ctx: self.ctx(),
            rows: self.basis.rows,
            cols: self.basis.cols,
            data: self.basis.data.iter().map(|x| x * a).collect(),
        };
        Lattice { basis }
    }

    /// Valuation of the basis determinant in units of `1/M`.
    pub fn det_scaled_valuation(&self) -> i64 {
        self.basis.det_scaled_valuation().expect("lattice bases are invertible")
    }

    pub fn det_valuation(&self) -> Rational {
        Rational::new(BigInt::from(self.det_scaled_valuation()), BigInt::from(self.ctx().ramification()))
    }

    /// `self ∩ other`.
    ///
    /// With `C` the transition matrix and `C = U⁻¹·D·V⁻¹` its Smith form,
    /// `O^N ∩ C·O^N = U⁻¹·diag(π^{max(0, e_k)})·O^N`, mapped back through
    /// `self`'s basis.
    pub fn intersect(&self, other: &Lattice) -> Result<Lattice, LatticeError> {
        let c = self.transition_to(other)?;
        if c.is_integral() {
            return Ok(other.clone());
        }
        let snf = smith_with(&c, Tracking { left: false, left_inverse: true, right: false })?;
        let shifts: Vec<i64> = snf.scaled_valuations().into_iter().map(|e| e.max(0)).collect();
        let local = snf.left_inverse.shift_columns(&shifts);
        Ok(Lattice { basis: self.basis.mul(&local)? })
    }

    pub fn embed(&self, target: u32) -> Result<Lattice, LatticeError> {
        Ok(Lattice { basis: self.basis.embed(target)? })
    }
}

/// Norm `v ↦ min_i (v(c_i) + w_i)` in valuation form, `c` the coordinates
/// of `v` in `basis`.
#[derive(Clone, Debug)]
pub struct DiagonalNorm {
    basis: FieldMatrix,
    weights: Vec<Rational>,
}

impl DiagonalNorm {
    pub fn new(basis: FieldMatrix, weights: Vec<Rational>) -> Result<Self, LatticeError> {
        if !basis.is_square() {
            return Err(LatticeError::DimensionMismatch(basis.rows, basis.cols));
        }
        if weights.len() != basis.cols {
            return Err(LatticeError::DimensionMismatch(basis.cols, weights.len()));
        }
        if basis.det_scaled_valuation().is_none() {
            return Err(LatticeError::Singular);
        }
        Ok(DiagonalNorm { basis, weights })
    }

    pub fn basis(&self) -> &FieldMatrix {
        &self.basis
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn norm(&self, v: &[FieldElement]) -> Result<Valuation, LatticeError> {
        let rhs = FieldMatrix::from_columns(self.basis.ctx, &[v.to_vec()]);
        let coords = self.basis.solve(&rhs)?;
        Ok((0..coords.rows)
            .map(|i| coords[(i, 0)].valuation().shifted(&self.weights[i]))
            .min()
            .unwrap_or(Valuation::Infinite))
    }

    /// Unit ball `{v(c_i) ≥ −w_i}`; a lattice reproducing the norm exactly
    /// when every weight lies in `(1/M)ℤ`.
    pub fn unit_ball(&self) -> Result<Lattice, LatticeError> {
        let m = self.basis.ctx.ramification();
        let shifts = self
            .weights
            .iter()
            .map(|w| scaled_weight(w, m).map(|s| -s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Lattice { basis: self.basis.shift_columns(&shifts) })
    }
}

/// `M·w` as an integer, or an error when `w ∉ (1/M)ℤ`.
pub fn scaled_weight(w: &Rational, ramification: u32) -> Result<i64, LatticeError> {
    let scaled = w * Rational::from_integer(BigInt::from(ramification));
    if !scaled.is_integer() {
        return Err(LatticeError::WeightOutsideValueGroup { weight: w.clone(), ramification });
    }
    Ok(i64::try_from(scaled.to_integer()).expect("weight fits in i64"))
}

/// Anything whose unit ball is a lattice.
pub trait UnitBall {
    fn unit_ball_lattice(&self) -> Result<Lattice, LatticeError>;
}

impl UnitBall for Lattice {
    fn unit_ball_lattice(&self) -> Result<Lattice, LatticeError> {
        Ok(self.clone())
    }
}

impl UnitBall for DiagonalNorm {
    fn unit_ball_lattice(&self) -> Result<Lattice, LatticeError> {
        self.unit_ball()
    }
}

/// `vol(‖·‖₁, ‖·‖₂) = v(det T)` with `T` expressing a basis of the second
/// unit ball in a basis of the first.
pub fn relative_volume<A: UnitBall, B: UnitBall>(first: &A, second: &B) -> Result<Rational, LatticeError> {
    let l1 = first.unit_ball_lattice()?;
    let l2 = second.unit_ball_lattice()?;
    l1.check_dim(&l2)?;
    if l1.ctx() != l2.ctx() {
        return Err(FieldError::ContextMismatch(
            l1.ctx().p(),
            l1.ctx().ramification(),
            l2.ctx().p(),
            l2.ctx().ramification(),
        )
        .into());
    }
    Ok(l2.det_valuation() - l1.det_valuation())
}

/// The torsion module `outer / inner`.
#[derive(Clone, Debug)]
pub struct TorsionModule {
    outer: Lattice,
    inner: Lattice,
    transition: FieldMatrix,
}

impl TorsionModule {
    pub fn new(outer: Lattice, inner: Lattice) -> Result<Self, LatticeError> {
        let transition = outer.transition_to(&inner)?;
        if !transition.is_integral() {
            return Err(LatticeError::NotContained);
        }
        Ok(TorsionModule { outer, inner, transition })
    }

    pub fn outer(&self) -> &Lattice {
        &self.outer
    }

    pub fn inner(&self) -> &Lattice {
        &self.inner
    }

    /// Elementary divisor valuations `v(a_i)` of the quotient.
    pub fn invariants(&self) -> Result<Vec<Rational>, LatticeError> {
        Ok(smith_with(&self.transition, Tracking { left: false, left_inverse: false, right: false })?.valuations())
    }

    /// `Σ v(a_i)`.
    pub fn content(&self) -> Result<Rational, LatticeError> {
        Ok(self.invariants()?.into_iter().fold(Rational::zero(), |acc, v| acc + v))
    }
}
