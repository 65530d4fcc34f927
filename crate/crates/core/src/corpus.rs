//! Seeded random trees and metrics, plus the small named instances used
//! throughout the experiments.

use num_bigint::BigInt;
use rand::Rng;

use crate::field::{rat, Rational};
use crate::metrics::{psh_from_masses, Metric};
use crate::tree::{PLFunction, SkeletonTree, TreePoint};

/// Shape of randomly drawn trees.
#[derive(Debug, Clone, Copy)]
pub struct TreeShape {
    pub p: u64,
    /// Number of random points before meet closure.
    pub points: usize,
    /// Exponents are drawn from `{k/denominator : 1 ≤ k ≤ max_steps}`.
    pub denominator: i64,
    pub max_steps: i64,
}

impl TreeShape {
    pub fn small(p: u64) -> Self {
        TreeShape { p, points: 3, denominator: 1, max_steps: 3 }
    }
}

pub fn random_point<R: Rng>(rng: &mut R, shape: &TreeShape) -> TreePoint {
    let steps = rng.gen_range(1..=shape.max_steps);
    let exponent = rat(steps, shape.denominator);
    let digits = exponent.ceil().to_integer();
    let modulus = BigInt::from(shape.p).pow(u32::try_from(digits).expect("small exponent"));
    let modulus = i64::try_from(modulus).expect("small modulus");
    let center = rng.gen_range(0..modulus);
    TreePoint::from_int(shape.p, center, exponent).expect("valid point")
}

pub fn random_tree<R: Rng>(rng: &mut R, shape: &TreeShape) -> SkeletonTree {
    let points: Vec<TreePoint> = (0..shape.points).map(|_| random_point(rng, shape)).collect();
    SkeletonTree::build(shape.p, points).expect("points share p")
}

/// Random rational in `[-span, span]` with the given denominator.
pub fn random_rational<R: Rng>(rng: &mut R, span: i64, denominator: i64) -> Rational {
    rat(rng.gen_range(-span * denominator..=span * denominator), denominator)
}

/// Arbitrary (usually non-psh) PL metric.
pub fn random_pl_metric<R: Rng>(rng: &mut R, shape: &TreeShape, degree: u32, value_denominator: i64) -> Metric {
    let tree = random_tree(rng, shape);
    let values = (0..tree.len()).map(|_| random_rational(rng, 2, value_denominator)).collect();
    Metric::new(degree, PLFunction::new(tree, values).expect("one value per vertex"))
}

/// Psh metric on a random tree: random nonnegative masses of total `d`
/// spread in units of `1/mass_denominator`.
pub fn random_psh_metric<R: Rng>(rng: &mut R, shape: &TreeShape, degree: u32, mass_denominator: i64) -> Metric {
    let tree = random_tree(rng, shape);
    let units = i64::from(degree) * mass_denominator;
    let mut counts = vec![0i64; tree.len()];
    for _ in 0..units {
        counts[rng.gen_range(0..tree.len())] += 1;
    }
    let masses: Vec<Rational> = counts.iter().map(|&c| rat(c, mass_denominator)).collect();
    let base = random_rational(rng, 1, 2);
    psh_from_masses(&tree, degree, &masses, base)
}

/// Random PL function on `tree` with values in `[-span, span]`.
pub fn random_function<R: Rng>(rng: &mut R, tree: &SkeletonTree, span: i64, denominator: i64) -> PLFunction {
    let values = (0..tree.len()).map(|_| random_rational(rng, span, denominator)).collect();
    PLFunction::new(tree.clone(), values).expect("one value per vertex")
}

/// The tree `{ζ_{0,0}, ζ_{0,1}}`.
pub fn segment_tree(p: u64) -> SkeletonTree {
    let leaf = TreePoint::from_int(p, 0, rat(1, 1)).expect("valid point");
    SkeletonTree::build(p, [leaf]).expect("single prime")
}

/// Function on [`segment_tree`] with the given root and leaf values.
pub fn segment_function(p: u64, root: Rational, leaf: Rational) -> PLFunction {
    PLFunction::new(segment_tree(p), vec![root, leaf]).expect("two vertices")
}

/// Psh metric on `O(1)`: slope `−1/2` from the Gauss point to `ζ_{0,1}`.
pub fn half_slope_metric(p: u64) -> Metric {
    Metric::new(1, segment_function(p, rat(0, 1), rat(-1, 2)))
}

/// The tent `0 → 1` from the Gauss point to `ζ_{0,1}`.
pub fn tent(p: u64) -> PLFunction {
    segment_function(p, rat(0, 1), rat(1, 1))
}

/// Non-psh metric `φ_triv + tent` on `O(d)`.
pub fn tent_metric(p: u64, degree: u32) -> Metric {
    Metric::new(degree, tent(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_are_deterministic_and_valid() {
        let shape = TreeShape { p: 3, points: 4, denominator: 2, max_steps: 5 };
        let a = random_psh_metric(&mut ChaCha8Rng::seed_from_u64(7), &shape, 2, 3);
        let b = random_psh_metric(&mut ChaCha8Rng::seed_from_u64(7), &shape, 2, 3);
        assert_eq!(a, b);
        assert!(a.is_psh());
        assert_eq!(a.ma_measure().total_mass(), rat(2, 1));
        assert!(!tent_metric(2, 1).is_psh());
        assert!(half_slope_metric(2).is_psh());
    }
}
