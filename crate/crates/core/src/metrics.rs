//! Piecewise-linear metrics `φ_triv + g` on `O(d)`, their Monge–Ampère
//! measures, energies, psh envelopes and equilibrium metrics.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::field::Rational;
use crate::lp::{self, LpError};
use crate::tree::{DiscreteMeasure, PLFunction, SkeletonTree, TreeError, TreePoint};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("metric is not psh")]
    NotPsh,
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(u32, u32),
    #[error("operation needs positive degree")]
    ZeroDegree,
    #[error("no psh metric lies below a non-constant metric on the trivial bundle")]
    Infeasible,
    #[error("envelope cross-check failed: {0}")]
    CrossCheck(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// The metric `φ_triv + g` on `O(d)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metric {
    degree: u32,
    potential: PLFunction,
}

fn from_u32(d: u32) -> Rational {
    Rational::from_integer(BigInt::from(d))
}

impl Metric {
    pub fn new(degree: u32, potential: PLFunction) -> Self {
        Metric { degree, potential }
    }

    pub fn trivial(p: u64, degree: u32) -> Self {
        let tree = SkeletonTree::build(p, []).expect("Gauss point alone is a tree");
        Metric { degree, potential: PLFunction::zero(tree) }
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn potential(&self) -> &PLFunction {
        &self.potential
    }

    pub fn tree(&self) -> &SkeletonTree {
        self.potential.tree()
    }

    pub fn p(&self) -> u64 {
        self.tree().p()
    }

    /// `g(x)`, the metric relative to `φ_triv` at `x`.
    pub fn evaluate(&self, x: &TreePoint) -> Rational {
        self.potential.evaluate(x)
    }

    /// Laplacian masses plus `d` at the Gauss point, in tree order.
    pub fn ma_masses(&self) -> Vec<Rational> {
        let mut masses = self.potential.laplacian_masses();
        masses[self.tree().root()] += from_u32(self.degree);
        masses
    }

    pub fn ma_measure(&self) -> DiscreteMeasure {
        DiscreteMeasure::from_masses(self.tree(), self.ma_masses())
    }

    pub fn is_psh(&self) -> bool {
        self.ma_masses().iter().all(|m| !m.is_negative())
    }

    pub fn add_function(&self, f: &PLFunction) -> Result<Metric, MetricError> {
        Ok(Metric { degree: self.degree, potential: self.potential.add(f)? })
    }

    pub fn add_constant(&self, c: &Rational) -> Metric {
        Metric { degree: self.degree, potential: self.potential.add_constant(c) }
    }

    /// Difference of potentials `g_self − g_other`.
    pub fn difference(&self, other: &Metric) -> Result<PLFunction, MetricError> {
        self.check_degree(other)?;
        Ok(self.potential.sub(&other.potential)?)
    }

    /// `(1 − t)·self + t·other`.
    pub fn convex_combination(&self, other: &Metric, t: &Rational) -> Result<Metric, MetricError> {
        self.check_degree(other)?;
        let s = Rational::one() - t;
        let potential = self.potential.combine(&other.potential, |a, b| &s * a + t * b)?;
        Ok(Metric { degree: self.degree, potential })
    }

    /// `sup |g_self − g_other|`, attained at vertices of the common tree.
    pub fn sup_distance(&self, other: &Metric) -> Result<Rational, MetricError> {
        let diff = self.potential.sub(&other.potential)?;
        Ok(std::cmp::max(diff.max_value(), -diff.min_value()))
    }

    /// Pointwise `self ≤ other`.
    pub fn le(&self, other: &Metric) -> Result<bool, MetricError> {
        Ok(!self.potential.sub(&other.potential)?.max_value().is_positive())
    }

    /// Same metric with its potential carried by a refinement of the tree.
    pub fn on_tree(&self, tree: &SkeletonTree) -> Metric {
        Metric { degree: self.degree, potential: self.potential.restrict_to(tree) }
    }

    fn check_degree(&self, other: &Metric) -> Result<(), MetricError> {
        if self.degree != other.degree {
            return Err(MetricError::DegreeMismatch(self.degree, other.degree));
        }
        Ok(())
    }

    /// `E(φ, ψ) = ½[∫(φ−ψ) dd^cφ + ∫(φ−ψ) dd^cψ]`.
    pub fn energy(&self, other: &Metric) -> Result<Rational, MetricError> {
        self.check_degree(other)?;
        if self.degree == 0 {
            return Err(MetricError::ZeroDegree);
        }
        if !self.is_psh() || !other.is_psh() {
            return Err(MetricError::NotPsh);
        }
        self.energy_unchecked(other)
    }

    /// The energy formula without the psh precondition.
    pub fn energy_unchecked(&self, other: &Metric) -> Result<Rational, MetricError> {
        let diff = self.potential.sub(&other.potential)?;
        let a = diff.integrate(&self.ma_measure());
        let b = diff.integrate(&other.ma_measure());
        Ok((a + b) / Rational::from_integer(BigInt::from(2)))
    }

    /// `∫ f dd^c self`.
    pub fn pair(&self, f: &PLFunction) -> Rational {
        f.integrate(&self.ma_measure())
    }

    /// Greatest psh metric below `self`.
    pub fn envelope(&self) -> Result<Metric, MetricError> {
        if self.degree == 0 {
            return if self.potential.is_constant() { Ok(self.clone()) } else { Err(MetricError::Infeasible) };
        }
        if self.is_psh() {
            return Ok(self.clone());
        }
        let bounds: Vec<Option<Rational>> = self.potential.values().iter().cloned().map(Some).collect();
        let values = solve_obstacle(self.tree(), &bounds, self.degree)?;
        Ok(Metric { degree: self.degree, potential: PLFunction::new(self.tree().clone(), values)? })
    }

    /// Greatest psh metric whose value at `x` is at most `self(x)`.
    pub fn equilibrium_metric(&self, x: &TreePoint) -> Result<Metric, MetricError> {
        if self.degree == 0 {
            return Err(MetricError::ZeroDegree);
        }
        let tree = self.tree().with_points([x.clone()])?;
        let mut bounds = vec![None; tree.len()];
        bounds[tree.index_of(x).expect("x was added")] = Some(self.evaluate(x));
        let values = solve_obstacle(&tree, &bounds, self.degree)?;
        Ok(Metric { degree: self.degree, potential: PLFunction::new(tree, values)? })
    }
}

/// Constraint rows `Σ_u (h_v − h_u)/ℓ_{uv} ≤ anchor_v`, one per vertex.
fn mass_rows(tree: &SkeletonTree, degree: u32) -> (Vec<Vec<Rational>>, Vec<Rational>) {
    let n = tree.len();
    let mut rows = vec![vec![Rational::zero(); n]; n];
    for (up, down, len) in tree.edges() {
        let w = len.recip();
        rows[up][up] += &w;
        rows[up][down] -= &w;
        rows[down][down] += &w;
        rows[down][up] -= w;
    }
    let mut anchors = vec![Rational::zero(); n];
    anchors[tree.root()] = from_u32(degree);
    (rows, anchors)
}

/// Largest vertex values `h` with `h_v ≤ bound_v` where bounded and
/// `φ_triv + h` psh. At least one vertex must be bounded.
///
/// Solved as one exact LP per vertex in the shifted variable `z = h − c`,
/// `c` the smallest bound; the constant `c` is feasible so `z ≥ 0` loses
/// nothing and the origin is a feasible start.
pub fn solve_obstacle(tree: &SkeletonTree, bounds: &[Option<Rational>], degree: u32) -> Result<Vec<Rational>, MetricError> {
    let n = tree.len();
    let shift = bounds.iter().flatten().min().cloned().ok_or(LpError::Unbounded)?;
    let (mut a, mut b) = mass_rows(tree, degree);
    for (v, bound) in bounds.iter().enumerate() {
        if let Some(bound) = bound {
            let mut row = vec![Rational::zero(); n];
            row[v] = Rational::one();
            a.push(row);
            b.push(bound - &shift);
        }
    }
    let values = (0..n)
        .into_par_iter()
        .map(|v| {
            let mut c = vec![Rational::zero(); n];
            c[v] = Rational::one();
            lp::maximize(&c, &a, &b).map(|sol| sol.value + &shift)
        })
        .collect::<Result<Vec<_>, _>>()?;
    cross_check(tree, bounds, degree, &values)?;
    Ok(values)
}

/// The LP answer must be feasible, and a monotone Gauss–Seidel relaxation
/// started from an upper bound must stay above it.
fn cross_check(tree: &SkeletonTree, bounds: &[Option<Rational>], degree: u32, h: &[Rational]) -> Result<(), MetricError> {
    let n = tree.len();
    let mut neighbours: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); n];
    for (up, down, len) in tree.edges() {
        let w = len.recip();
        neighbours[up].push((down, w.clone()));
        neighbours[down].push((up, w));
    }
    let anchor = |v: usize| if v == tree.root() { from_u32(degree) } else { Rational::zero() };
    let cap = |v: usize, vals: &[Rational]| -> Option<Rational> {
        if neighbours[v].is_empty() {
            return None;
        }
        let (num, den) = neighbours[v]
            .iter()
            .fold((anchor(v), Rational::zero()), |(s, w), (u, wu)| (s + &vals[*u] * wu, w + wu));
        Some(num / den)
    };
    for v in 0..n {
        if bounds[v].as_ref().is_some_and(|b| &h[v] > b) || cap(v, h).is_some_and(|c| h[v] > c) {
            return Err(MetricError::CrossCheck(format!("LP solution violates a constraint at {}", tree.vertex(v))));
        }
    }
    // start above every psh candidate: slopes of psh potentials are bounded by d
    let d = from_u32(degree);
    let mut iterate: Vec<Rational> = (0..n)
        .map(|v| {
            bounds
                .iter()
                .enumerate()
                .filter_map(|(u, b)| b.as_ref().map(|b| b + &d * tree.vertex(u).distance(tree.vertex(v))))
                .min()
                .expect("some vertex is bounded")
        })
        .collect();
    for _ in 0..4 * n {
        for v in 0..n {
            let mut next = iterate[v].clone();
            if let Some(b) = &bounds[v] {
                next = std::cmp::min(next, b.clone());
            }
            if let Some(c) = cap(v, &iterate) {
                next = std::cmp::min(next, c);
            }
            iterate[v] = next;
        }
        if iterate.iter().zip(h).any(|(x, y)| x < y) {
            return Err(MetricError::CrossCheck("relaxation dropped below the LP solution".into()));
        }
    }
    Ok(())
}

/// Greatest psh potential below `g` on the union of its tree with `extra`
/// points; used to confirm that refinement does not change the envelope.
pub fn envelope_on_refinement(phi: &Metric, extra: &[TreePoint]) -> Result<Metric, MetricError> {
    let tree = phi.tree().with_points(extra.iter().cloned())?;
    let refined = phi.on_tree(&tree);
    let bounds: Vec<Option<Rational>> = refined.potential().values().iter().cloned().map(Some).collect();
    if phi.degree() == 0 {
        return phi.envelope();
    }
    let values = solve_obstacle(&tree, &bounds, phi.degree())?;
    Ok(Metric::new(phi.degree(), PLFunction::new(tree, values)?))
}

/// Psh potential with prescribed Monge–Ampère masses (in tree order,
/// nonnegative, total `d`) and value `base` at the Gauss point.
pub fn psh_from_masses(tree: &SkeletonTree, degree: u32, masses: &[Rational], base: Rational) -> Metric {
    let n = tree.len();
    let mut below = masses.to_vec();
    for v in (1..n).rev() {
        if let Some(up) = tree.parent(v) {
            let m = below[v].clone();
            below[up] += m;
        }
    }
    let mut values = vec![base; n];
    for v in 1..n {
        let up = tree.parent(v).expect("non-root vertex has a parent");
        values[v] = &values[up] - tree.edge_length(v).unwrap() * &below[v];
    }
    Metric::new(degree, PLFunction::new(tree.clone(), values).expect("one value per vertex"))
}
