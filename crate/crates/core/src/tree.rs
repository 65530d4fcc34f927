//! Finite skeleta of the Berkovich projective line inside the closed unit
//! disc, piecewise-affine functions on them, and discrete measures.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::field::{int_valuation, rational_valuation, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("center {0} is outside the closed unit disc")]
    NotInUnitDisc(Rational),
    #[error("radius exponent {0} is negative")]
    NegativeExponent(Rational),
    #[error("points over different primes ({0} and {1})")]
    PrimeMismatch(u64, u64),
    #[error("vertex set is not meet-closed: meet of {first} and {second} is {meet}, which is missing")]
    MissingMeet { first: Box<TreePoint>, second: Box<TreePoint>, meet: Box<TreePoint> },
    #[error("vertex set does not contain the Gauss point")]
    MissingRoot,
    #[error("expected {expected} vertex values, got {got}")]
    ValueCount { expected: usize, got: usize },
    #[error("vertex {0} listed twice")]
    DuplicateVertex(TreePoint),
}

/// The point `ζ_{a, p^{-q}}`: the disc `{v_p(z − a) ≥ q}`.
///
/// The center is stored reduced modulo `p^{⌈q⌉}`, so equal points compare
/// equal. Points are ordered by exponent first; the Gauss point is least.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TreePoint {
    exponent: Rational,
    center: BigInt,
    p: u64,
}

impl fmt::Display for TreePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ζ({}, {})", self.center, self.exponent)
    }
}

fn residue_modulus(p: u64, exponent: &Rational) -> BigInt {
    let k = exponent.ceil().to_integer();
    let k = u32::try_from(k).expect("radius exponent fits in u32");
    BigInt::from(p).pow(k)
}

/// `v_p(a − b)` for a rational `a` and an integer `b`, `None` if equal.
fn center_gap(p: u64, a: &Rational, b: &BigInt) -> Option<Rational> {
    let diff = a - Rational::from_integer(b.clone());
    rational_valuation(p, &diff).map(|v| Rational::from_integer(BigInt::from(v)))
}

fn int_gap(p: u64, a: &BigInt, b: &BigInt) -> Option<Rational> {
    int_valuation(p, &(a - b)).map(|v| Rational::from_integer(BigInt::from(v)))
}

/// `min(q, gap)` with `None` standing for `+∞`.
fn cap(q: &Rational, gap: Option<Rational>) -> Rational {
    match gap {
        Some(g) if &g < q => g,
        _ => q.clone(),
    }
}

impl TreePoint {
    pub fn new(p: u64, center: Rational, exponent: Rational) -> Result<Self, TreeError> {
        if exponent.is_negative() {
            return Err(TreeError::NegativeExponent(exponent));
        }
        if rational_valuation(p, &center).is_some_and(|v| v < 0) {
            return Err(TreeError::NotInUnitDisc(center));
        }
        let modulus = residue_modulus(p, &exponent);
        let (num, den) = (center.numer().clone(), center.denom().clone());
        let inv = den.modinv(&modulus).unwrap_or_else(BigInt::zero);
        let reduced = (num * inv).mod_floor_positive(&modulus);
        Ok(TreePoint { exponent, center: reduced, p })
    }

    /// Same as [`TreePoint::new`] with an integer center.
    pub fn from_int(p: u64, center: i64, exponent: Rational) -> Result<Self, TreeError> {
        Self::new(p, Rational::from_integer(BigInt::from(center)), exponent)
    }

    pub fn gauss(p: u64) -> Self {
        TreePoint { exponent: Rational::zero(), center: BigInt::zero(), p }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn center(&self) -> &BigInt {
        &self.center
    }

    pub fn center_rational(&self) -> Rational {
        Rational::from_integer(self.center.clone())
    }

    pub fn exponent(&self) -> &Rational {
        &self.exponent
    }

    pub fn is_gauss(&self) -> bool {
        self.exponent.is_zero()
    }

    fn with_exponent(&self, exponent: Rational) -> TreePoint {
        let modulus = residue_modulus(self.p, &exponent);
        TreePoint { center: self.center.mod_floor_positive(&modulus), exponent, p: self.p }
    }

    /// Infimum of the two points in the tree order.
    pub fn meet(&self, other: &TreePoint) -> TreePoint {
        assert_eq!(self.p, other.p, "meet of points over different primes");
        let q = cap(std::cmp::min(&self.exponent, &other.exponent), int_gap(self.p, &self.center, &other.center));
        self.with_exponent(q)
    }

    /// `self ≤ other`: the disc of `other` lies inside the disc of `self`.
    pub fn le(&self, other: &TreePoint) -> bool {
        self.exponent <= other.exponent
            && int_gap(self.p, &self.center, &other.center).is_none_or(|g| g >= self.exponent)
    }

    /// Path distance `q_x + q_y − 2 q_{x∧y}`.
    pub fn distance(&self, other: &TreePoint) -> Rational {
        let m = self.meet(other);
        &self.exponent + &other.exponent - m.exponent * Rational::from_integer(BigInt::from(2))
    }

    /// Contains the type-1 point `a`.
    pub fn contains_point(&self, a: &Rational) -> bool {
        center_gap(self.p, a, &self.center).is_none_or(|g| g >= self.exponent)
    }
}

trait ModFloorPositive {
    fn mod_floor_positive(&self, m: &BigInt) -> BigInt;
}

impl ModFloorPositive for BigInt {
    fn mod_floor_positive(&self, m: &BigInt) -> BigInt {
        if m.is_one() {
            return BigInt::zero();
        }
        let r = self % m;
        if r.is_negative() {
            r + m
        } else {
            r
        }
    }
}

/// Where a point lands after retraction: a vertex, or the interior of the
/// edge from `parent(child)` to `child` at the given exponent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreePosition {
    Vertex(usize),
    Edge { child: usize, exponent: Rational },
}

/// Meet-closed finite vertex set rooted at the Gauss point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonTree {
    p: u64,
    vertices: Vec<TreePoint>,
    index: BTreeMap<TreePoint, usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
}

impl SkeletonTree {
    /// Smallest meet-closed tree containing `points` and the Gauss point.
    pub fn build(p: u64, points: impl IntoIterator<Item = TreePoint>) -> Result<Self, TreeError> {
        let mut set = BTreeSet::from([TreePoint::gauss(p)]);
        for x in points {
            if x.p != p {
                return Err(TreeError::PrimeMismatch(p, x.p));
            }
            set.insert(x);
        }
        loop {
            let current: Vec<&TreePoint> = set.iter().collect();
            let mut fresh = BTreeSet::new();
            for (i, x) in current.iter().enumerate() {
                for y in &current[i + 1..] {
                    let m = x.meet(y);
                    if !set.contains(&m) {
                        fresh.insert(m);
                    }
                }
            }
            if fresh.is_empty() {
                break;
            }
            set.extend(fresh);
        }
        Ok(Self::assemble(p, set.into_iter().collect()))
    }

    /// Validates an explicit vertex list instead of closing it.
    pub fn from_vertices(p: u64, vertices: Vec<TreePoint>) -> Result<Self, TreeError> {
        let mut set = BTreeSet::new();
        for x in &vertices {
            if x.p != p {
                return Err(TreeError::PrimeMismatch(p, x.p));
            }
            if !set.insert(x.clone()) {
                return Err(TreeError::DuplicateVertex(x.clone()));
            }
        }
        if !set.contains(&TreePoint::gauss(p)) {
            return Err(TreeError::MissingRoot);
        }
        for (i, x) in vertices.iter().enumerate() {
            for y in &vertices[i + 1..] {
                let meet = x.meet(y);
                if !set.contains(&meet) {
                    return Err(TreeError::MissingMeet { first: Box::new(x.clone()), second: Box::new(y.clone()), meet: Box::new(meet) });
                }
            }
        }
        Ok(Self::assemble(p, set.into_iter().collect()))
    }

    fn assemble(p: u64, vertices: Vec<TreePoint>) -> Self {
        let n = vertices.len();
        let index = vertices.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        for i in 1..n {
            // vertices are sorted by exponent, so the last ancestor found is the deepest
            let up = (0..i).rev().find(|&j| vertices[j].le(&vertices[i]));
            parent[i] = up;
            if let Some(j) = up {
                children[j].push(i);
            }
        }
        SkeletonTree { p, vertices, index, parent, children }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[TreePoint] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &TreePoint {
        &self.vertices[i]
    }

    pub fn index_of(&self, x: &TreePoint) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Length of the edge from `parent(i)` to `i`.
    pub fn edge_length(&self, i: usize) -> Option<Rational> {
        self.parent[i].map(|j| &self.vertices[i].exponent - &self.vertices[j].exponent)
    }

    /// `(parent, child, length)` for every edge.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, Rational)> + '_ {
        (1..self.len()).filter_map(move |i| self.parent[i].map(|j| (j, i, self.edge_length(i).unwrap())))
    }

    /// Vertices of the subtree rooted at `i`, including `i`.
    pub fn subtree(&self, i: usize) -> Vec<usize> {
        let mut out = vec![i];
        let mut k = 0;
        while k < out.len() {
            out.extend_from_slice(&self.children[out[k]]);
            k += 1;
        }
        out
    }

    pub fn union(&self, other: &SkeletonTree) -> Result<SkeletonTree, TreeError> {
        if self == other {
            return Ok(self.clone());
        }
        SkeletonTree::build(self.p, self.vertices.iter().chain(other.vertices.iter()).cloned())
    }

    pub fn with_points(&self, extra: impl IntoIterator<Item = TreePoint>) -> Result<SkeletonTree, TreeError> {
        SkeletonTree::build(self.p, self.vertices.iter().cloned().chain(extra))
    }

    pub fn contains_vertices_of(&self, other: &SkeletonTree) -> bool {
        other.vertices.iter().all(|v| self.index.contains_key(v))
    }

    /// The point of the tree at exponent `exponent` on the edge into `child`.
    pub fn point_on_edge(&self, child: usize, exponent: Rational) -> TreePoint {
        self.vertices[child].with_exponent(exponent)
    }

    fn locate(&self, anchor: TreePoint) -> TreePosition {
        if let Some(i) = self.index_of(&anchor) {
            return TreePosition::Vertex(i);
        }
        let child = (0..self.len())
            .filter(|&i| anchor.le(&self.vertices[i]))
            .min_by(|&a, &b| self.vertices[a].exponent.cmp(&self.vertices[b].exponent))
            .expect("retraction lies on the tree");
        TreePosition::Edge { child, exponent: anchor.exponent }
    }

    /// Retraction of `x` onto the tree.
    pub fn retract(&self, x: &TreePoint) -> TreePosition {
        self.locate(self.retraction_point(x))
    }

    pub fn retraction_point(&self, x: &TreePoint) -> TreePoint {
        let best = self
            .vertices
            .iter()
            .map(|v| x.meet(v).exponent)
            .max()
            .unwrap_or_else(Rational::zero);
        x.with_exponent(best)
    }

    /// Retraction of the type-1 point `a`, which must lie in the unit disc.
    pub fn retract_rational(&self, a: &Rational) -> TreePosition {
        self.locate(self.rational_retraction_point(a))
    }

    pub fn rational_retraction_point(&self, a: &Rational) -> TreePoint {
        let best = self
            .vertices
            .iter()
            .map(|v| cap(&v.exponent, center_gap(self.p, a, &v.center)))
            .max()
            .unwrap_or_else(Rational::zero);
        TreePoint::new(self.p, a.clone(), best).expect("type-1 point in the unit disc")
    }

    pub fn position_point(&self, pos: &TreePosition) -> TreePoint {
        match pos {
            TreePosition::Vertex(i) => self.vertices[*i].clone(),
            TreePosition::Edge { child, exponent } => self.point_on_edge(*child, exponent.clone()),
        }
    }
}

/// Piecewise-affine function: affine on edges, constant off the tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PLFunction {
    tree: SkeletonTree,
    values: Vec<Rational>,
}

impl PLFunction {
    pub fn new(tree: SkeletonTree, values: Vec<Rational>) -> Result<Self, TreeError> {
        if values.len() != tree.len() {
            return Err(TreeError::ValueCount { expected: tree.len(), got: values.len() });
        }
        Ok(PLFunction { tree, values })
    }

    /// Builds the tree from `(point, value)` pairs; they must already be
    /// meet-closed and contain the Gauss point.
    pub fn from_pairs(p: u64, pairs: Vec<(TreePoint, Rational)>) -> Result<Self, TreeError> {
        let tree = SkeletonTree::from_vertices(p, pairs.iter().map(|(x, _)| x.clone()).collect())?;
        let mut values = vec![Rational::zero(); tree.len()];
        for (x, v) in pairs {
            values[tree.index_of(&x).unwrap()] = v;
        }
        Ok(PLFunction { tree, values })
    }

    pub fn constant(tree: SkeletonTree, c: Rational) -> Self {
        let values = vec![c; tree.len()];
        PLFunction { tree, values }
    }

    pub fn zero(tree: SkeletonTree) -> Self {
        Self::constant(tree, Rational::zero())
    }

    pub fn tree(&self) -> &SkeletonTree {
        &self.tree
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &Rational {
        &self.values[i]
    }

    pub fn at_position(&self, pos: &TreePosition) -> Rational {
        match pos {
            TreePosition::Vertex(i) => self.values[*i].clone(),
            TreePosition::Edge { child, exponent } => {
                let up = self.tree.parent(*child).expect("edge has a parent");
                let q0 = self.tree.vertex(up).exponent();
                let q1 = self.tree.vertex(*child).exponent();
                let t = (exponent - q0) / (q1 - q0);
                &self.values[up] + t * (&self.values[*child] - &self.values[up])
            }
        }
    }

    pub fn evaluate(&self, x: &TreePoint) -> Rational {
        self.at_position(&self.tree.retract(x))
    }

    pub fn evaluate_rational(&self, a: &Rational) -> Rational {
        self.at_position(&self.tree.retract_rational(a))
    }

    /// Slope leaving `from` toward the adjacent vertex `to`.
    fn outgoing_slope(&self, from: usize, to: usize, length: &Rational) -> Rational {
        (&self.values[to] - &self.values[from]) / length
    }

    /// Mass at each vertex (in tree order): sum of outgoing slopes.
    pub fn laplacian_masses(&self) -> Vec<Rational> {
        let mut masses = vec![Rational::zero(); self.tree.len()];
        for (up, down, len) in self.tree.edges() {
            let s = self.outgoing_slope(up, down, &len);
            masses[down] -= &s;
            masses[up] += s;
        }
        masses
    }

    pub fn laplacian(&self) -> DiscreteMeasure {
        DiscreteMeasure::from_masses(&self.tree, self.laplacian_masses())
    }

    /// Same function on a tree containing every vertex of the current one.
    pub fn restrict_to(&self, tree: &SkeletonTree) -> PLFunction {
        assert!(tree.contains_vertices_of(&self.tree), "target tree must refine the source tree");
        let values = tree.vertices().iter().map(|x| self.evaluate(x)).collect();
        PLFunction { tree: tree.clone(), values }
    }

    pub fn refine(&self, extra: impl IntoIterator<Item = TreePoint>) -> Result<PLFunction, TreeError> {
        let tree = self.tree.with_points(extra)?;
        Ok(self.restrict_to(&tree))
    }

    /// Pointwise combination on the union of both trees.
    pub fn combine(
        &self,
        other: &PLFunction,
        f: impl Fn(&Rational, &Rational) -> Rational,
    ) -> Result<PLFunction, TreeError> {
        if self.tree.p != other.tree.p {
            return Err(TreeError::PrimeMismatch(self.tree.p, other.tree.p));
        }
        let (a, b) = if self.tree == other.tree {
            (self.clone(), other.clone())
        } else {
            let tree = self.tree.union(&other.tree)?;
            (self.restrict_to(&tree), other.restrict_to(&tree))
        };
        let values = a.values.iter().zip(&b.values).map(|(x, y)| f(x, y)).collect();
        Ok(PLFunction { tree: a.tree, values })
    }

    pub fn add(&self, other: &PLFunction) -> Result<PLFunction, TreeError> {
        self.combine(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &PLFunction) -> Result<PLFunction, TreeError> {
        self.combine(other, |x, y| x - y)
    }

    pub fn map(&self, f: impl Fn(&Rational) -> Rational) -> PLFunction {
        PLFunction { tree: self.tree.clone(), values: self.values.iter().map(f).collect() }
    }

    pub fn scale(&self, c: &Rational) -> PLFunction {
        self.map(|x| x * c)
    }

    pub fn add_constant(&self, c: &Rational) -> PLFunction {
        self.map(|x| x + c)
    }

    pub fn min_value(&self) -> Rational {
        self.values.iter().min().cloned().expect("trees are nonempty")
    }

    pub fn max_value(&self) -> Rational {
        self.values.iter().max().cloned().expect("trees are nonempty")
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|v| v == &self.values[0])
    }

    /// `∫ f dμ` for a measure supported anywhere in the disc.
    pub fn integrate(&self, mu: &DiscreteMeasure) -> Rational {
        mu.atoms().iter().fold(Rational::zero(), |acc, (x, m)| acc + self.evaluate(x) * m)
    }
}

/// Finitely supported measure with rational masses; zero atoms are dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiscreteMeasure {
    atoms: BTreeMap<TreePoint, Rational>,
}

impl DiscreteMeasure {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dirac(x: TreePoint, mass: Rational) -> Self {
        let mut mu = Self::new();
        mu.add_atom(x, mass);
        mu
    }

    pub fn from_masses(tree: &SkeletonTree, masses: Vec<Rational>) -> Self {
        let mut mu = Self::new();
        for (x, m) in tree.vertices().iter().zip(masses) {
            mu.add_atom(x.clone(), m);
        }
        mu
    }

    pub fn add_atom(&mut self, x: TreePoint, mass: Rational) {
        if mass.is_zero() {
            return;
        }
        let entry = self.atoms.entry(x).or_insert_with(Rational::zero);
        *entry += mass;
        if entry.is_zero() {
            self.atoms.retain(|_, m| !m.is_zero());
        }
    }

    pub fn atoms(&self) -> &BTreeMap<TreePoint, Rational> {
        &self.atoms
    }

    pub fn mass_at(&self, x: &TreePoint) -> Rational {
        self.atoms.get(x).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn total_mass(&self) -> Rational {
        self.atoms.values().fold(Rational::zero(), |a, m| a + m)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.atoms.values().all(|m| !m.is_negative())
    }

    pub fn add(&self, other: &DiscreteMeasure) -> DiscreteMeasure {
        let mut out = self.clone();
        for (x, m) in &other.atoms {
            out.add_atom(x.clone(), m.clone());
        }
        out
    }

    pub fn scale(&self, c: &Rational) -> DiscreteMeasure {
        let mut out = DiscreteMeasure::new();
        for (x, m) in &self.atoms {
            out.add_atom(x.clone(), m * c);
        }
        out
    }

    pub fn sub(&self, other: &DiscreteMeasure) -> DiscreteMeasure {
        self.add(&other.scale(&-Rational::one()))
    }

    /// Total variation `Σ |μ(x) − ν(x)|` over the union of supports.
    pub fn total_variation(&self, other: &DiscreteMeasure) -> Rational {
        self.sub(other).atoms.values().fold(Rational::zero(), |a, m| a + m.abs())
    }
}

impl fmt::Display for DiscreteMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.atoms.iter().map(|(x, m)| format!("{m}·δ{x}")).collect();
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}
