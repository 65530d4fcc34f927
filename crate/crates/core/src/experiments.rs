//! Experiments on top of volumes and envelopes: differentiability of
//! volumes, the sandwich inequality, orthogonality, Dirac solutions and
//! Fekete points.

use itertools::Itertools;
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::field::{rational_valuation, Rational, Valuation};
use crate::metrics::{Metric, MetricError};
use crate::sections::{ramification_for, vandermonde_value, SectionError};
use crate::tree::{DiscreteMeasure, PLFunction, TreePoint};
use crate::volumes::{resolve_ramification, vol_limit_at, ExtrapolationReport, VolumeError, Window};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExperimentError {
    #[error("metric must be psh")]
    NotPsh,
    #[error("operation needs positive degree")]
    ZeroDegree,
    #[error("finite-difference steps must be positive, got {0}")]
    NonPositiveStep(Rational),
    #[error("pool has {pool} distinct points, a configuration needs {needed}")]
    PoolTooSmall { pool: usize, needed: usize },
    #[error("dirac experiment produced {0}")]
    NotDirac(DiscreteMeasure),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Section(#[from] SectionError),
}

fn two() -> Rational {
    Rational::from_integer(BigInt::from(2))
}

/// One symmetric finite difference `(V(t) − V(−t))/2t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffStep {
    pub t: Rational,
    pub plus: ExtrapolationReport,
    pub minus: ExtrapolationReport,
    pub derivative: Rational,
    /// `(bound(t) + bound(−t))/2t`.
    pub bound: Rational,
    pub gap: Rational,
}

impl DiffStep {
    pub fn within_bound(&self) -> bool {
        self.gap <= self.bound
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffReport {
    /// `∫ f dd^c φ`.
    pub target: Rational,
    pub steps: Vec<DiffStep>,
    pub ramification: u32,
}

/// Estimates `d/dt vol(L, φ + tf, φ)` at `0` by symmetric differences.
pub fn diff_experiment(
    phi: &Metric,
    f: &PLFunction,
    steps: &[Rational],
    levels: &[u32],
    window: Window,
) -> Result<DiffReport, ExperimentError> {
    diff_experiment_at(phi, f, steps, levels, window, None)
}

/// [`diff_experiment`] over a requested `K_M`, which must contain the one
/// the data needs.
pub fn diff_experiment_at(
    phi: &Metric,
    f: &PLFunction,
    steps: &[Rational],
    levels: &[u32],
    window: Window,
    ramification: Option<u32>,
) -> Result<DiffReport, ExperimentError> {
    if !phi.is_psh() {
        return Err(ExperimentError::NotPsh);
    }
    if let Some(t) = steps.iter().find(|t| !t.is_positive()) {
        return Err(ExperimentError::NonPositiveStep(t.clone()));
    }
    let perturbed: Vec<(Rational, Metric, Metric)> = steps
        .iter()
        .map(|t| Ok((t.clone(), phi.add_function(&f.scale(t))?, phi.add_function(&f.scale(&-t))?)))
        .collect::<Result<_, MetricError>>()?;
    let mut all: Vec<&Metric> = vec![phi];
    for (_, a, b) in &perturbed {
        all.push(a);
        all.push(b);
    }
    let ramification = resolve_ramification(ramification_for(&all, levels), ramification)?;
    let steps = perturbed
        .par_iter()
        .map(|(t, up, down)| {
            let plus = vol_limit_at(up, phi, levels, window, ramification)?;
            let minus = vol_limit_at(down, phi, levels, window, ramification)?;
            let width = two() * t;
            let derivative = (plus.estimate() - minus.estimate()) / &width;
            let bound = (plus.error_bound() + minus.error_bound()) / &width;
            Ok(DiffStep { t: t.clone(), plus, minus, derivative, bound, gap: Rational::zero() })
        })
        .collect::<Result<Vec<_>, VolumeError>>()?;
    let target = phi.pair(f);
    let steps = steps
        .into_iter()
        .map(|mut s| {
            s.gap = (&s.derivative - &target).abs();
            s
        })
        .collect();
    Ok(DiffReport { target, steps, ramification })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SandwichReport {
    /// `C = e`.
    pub constant: u32,
    pub inf_f: Rational,
    pub sup_f: Rational,
    /// `∫ f (dd^cφ + dd^cψ₁)`.
    pub pairing: Rational,
    pub volume: ExtrapolationReport,
    /// `pairing − vol(L, φ + f, φ)`.
    pub middle: Rational,
    pub bound: Rational,
}

impl SandwichReport {
    fn c(&self) -> Rational {
        Rational::from_integer(BigInt::from(self.constant))
    }

    pub fn lower(&self) -> Rational {
        self.c() * &self.inf_f
    }

    pub fn upper(&self) -> Rational {
        self.c() * &self.sup_f
    }

    /// Both inequalities, each allowed to miss by the extrapolation bound.
    pub fn holds(&self) -> bool {
        self.lower() <= &self.middle + &self.bound && &self.middle - &self.bound <= self.upper()
    }

    pub fn lower_slack(&self) -> Rational {
        &self.middle - self.lower()
    }

    pub fn upper_slack(&self) -> Rational {
        self.upper() - &self.middle
    }
}

/// `C inf f ≤ ∫ f (dd^cφ + dd^cψ₁) − vol(L, φ + f, φ) ≤ C sup f` with
/// `f = ψ₁ − ψ₂` and `C = e`.
pub fn sandwich_check(phi: &Metric, psi1: &Metric, psi2: &Metric, levels: &[u32], window: Window) -> Result<SandwichReport, ExperimentError> {
    if phi.degree() == 0 || psi1.degree() == 0 {
        return Err(ExperimentError::ZeroDegree);
    }
    if !phi.is_psh() || !psi1.is_psh() || !psi2.is_psh() {
        return Err(ExperimentError::NotPsh);
    }
    let f = psi1.difference(psi2)?;
    let shifted = phi.add_function(&f)?;
    let volume = vol_limit_at(&shifted, phi, levels, window, ramification_for(&[&shifted, phi], levels))?;
    let pairing = f.integrate(&phi.ma_measure().add(&psi1.ma_measure()));
    let middle = &pairing - volume.estimate();
    let bound = volume.error_bound().clone();
    Ok(SandwichReport {
        constant: psi1.degree(),
        inf_f: f.min_value(),
        sup_f: f.max_value(),
        pairing,
        volume,
        middle,
        bound,
    })
}

/// `∫ (φ − P(φ)) dd^c P(φ)`.
pub fn orthogonality_experiment(phi: &Metric) -> Result<Rational, ExperimentError> {
    if phi.degree() == 0 {
        return Err(ExperimentError::ZeroDegree);
    }
    let env = phi.envelope()?;
    Ok(env.pair(&phi.difference(&env)?))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiracReport {
    pub point: TreePoint,
    pub equilibrium: Metric,
    pub measure: DiscreteMeasure,
    pub expected: DiscreteMeasure,
}

impl DiracReport {
    pub fn is_dirac(&self) -> bool {
        self.measure == self.expected
    }
}

pub fn dirac_experiment(x: &TreePoint, phi: &Metric) -> Result<DiracReport, ExperimentError> {
    if phi.degree() == 0 {
        return Err(ExperimentError::ZeroDegree);
    }
    let equilibrium = phi.equilibrium_metric(x)?;
    let measure = equilibrium.ma_measure();
    let expected = DiscreteMeasure::dirac(x.clone(), Rational::from_integer(BigInt::from(phi.degree())));
    Ok(DiracReport { point: x.clone(), equilibrium, measure, expected })
}

/// How Fekete configurations are searched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeketeSearch {
    /// Every `N`-subset of the pool.
    Exhaustive,
    /// Greedy single swaps from a seeded random start, at most `budget`
    /// evaluations.
    LocalSearch { seed: u64, budget: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeketeReport {
    pub m: u32,
    pub n: usize,
    /// Best configuration, sorted; ties broken lexicographically.
    pub best: Vec<Rational>,
    /// Number of configurations attaining the best value (exhaustive only).
    pub ties: usize,
    pub best_valuation: Valuation,
    pub empirical: DiscreteMeasure,
    /// `dd^cφ / d`.
    pub target: DiscreteMeasure,
    pub distance: Rational,
    /// The optimum is over pool points only.
    pub pool_restricted: bool,
    pub evaluations: usize,
}

impl FeketeReport {
    /// All pairwise differences in the best configuration are units.
    pub fn pairwise_units(&self, p: u64) -> bool {
        self.best
            .iter()
            .tuple_combinations()
            .all(|(a, b)| rational_valuation(p, &(a - b)) == Some(0))
    }
}

/// Smaller valuation is a larger determinant; ties go to the
/// lexicographically smaller sorted configuration.
fn better(candidate: &(Valuation, Vec<Rational>), incumbent: &(Valuation, Vec<Rational>)) -> bool {
    (&candidate.0, &candidate.1) < (&incumbent.0, &incumbent.1)
}

pub fn fekete_experiment(phi: &Metric, m: u32, pool: &[Rational], search: &FeketeSearch) -> Result<FeketeReport, ExperimentError> {
    if phi.degree() == 0 {
        return Err(ExperimentError::ZeroDegree);
    }
    if !phi.is_psh() {
        return Err(ExperimentError::NotPsh);
    }
    let mut points = pool.to_vec();
    points.sort();
    points.dedup();
    let n = (m * phi.degree()) as usize + 1;
    if points.len() < n {
        return Err(ExperimentError::PoolTooSmall { pool: points.len(), needed: n });
    }
    let value = |config: &[Rational]| vandermonde_value(config, phi, m);
    let (best, ties, evaluations) = match search {
        FeketeSearch::Exhaustive => {
            let scored = points
                .iter()
                .cloned()
                .combinations(n)
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|c| value(&c).map(|v| (v, c)))
                .collect::<Result<Vec<_>, _>>()?;
            let evaluations = scored.len();
            let best = scored.iter().min_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1))).cloned().expect("nonempty");
            let ties = scored.iter().filter(|(v, _)| *v == best.0).count();
            (best, ties, evaluations)
        }
        FeketeSearch::LocalSearch { seed, budget } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut shuffled = points.clone();
            shuffled.shuffle(&mut rng);
            let mut config: Vec<Rational> = shuffled[..n].to_vec();
            config.sort();
            let mut current = (value(&config)?, config);
            let mut evaluations = 1;
            'search: loop {
                let mut improved = false;
                for i in 0..n {
                    for candidate in &points {
                        if current.1.contains(candidate) {
                            continue;
                        }
                        if evaluations >= *budget {
                            break 'search;
                        }
                        let mut next = current.1.clone();
                        next[i] = candidate.clone();
                        next.sort();
                        let scored = (value(&next)?, next);
                        evaluations += 1;
                        if better(&scored, &current) {
                            current = scored;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
            (current, 1, evaluations)
        }
    };
    let (best_valuation, best) = best;
    let tree = phi.tree();
    let weight = Rational::new(1.into(), BigInt::from(n));
    let mut empirical = DiscreteMeasure::new();
    for x in &best {
        empirical.add_atom(tree.rational_retraction_point(x), weight.clone());
    }
    let target = phi.ma_measure().scale(&Rational::new(1.into(), phi.degree().into()));
    let distance = empirical.total_variation(&target);
    Ok(FeketeReport {
        m,
        n,
        best,
        ties,
        best_valuation,
        empirical,
        target,
        distance,
        pool_restricted: true,
        evaluations,
    })
}
