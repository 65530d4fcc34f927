use berkline_core::corpus::{half_slope_metric, random_psh_metric, tent, TreeShape};
use berkline_core::experiments::{fekete_experiment, FeketeSearch};
use berkline_core::field::{int, rat, Rational};
use berkline_core::volumes::vol_limit;
use berkline_core::{vol_m, Metric, Window};
use num_traits::Signed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn levels(a: u32, b: u32) -> Vec<u32> {
    (a..=b).collect()
}

#[test]
fn volume_is_antisymmetric_at_every_level_and_in_the_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let shape = TreeShape { p: 3, points: 2, denominator: 1, max_steps: 2 };
    let phi = random_psh_metric(&mut rng, &shape, 1, 2);
    let psi = random_psh_metric(&mut rng, &shape, 1, 2);
    for m in 1..=8 {
        assert_eq!(vol_m(&phi, &psi, m).unwrap(), -vol_m(&psi, &phi, m).unwrap());
    }
    let ab = vol_limit(&phi, &psi, &levels(1, 12), Window::default()).unwrap();
    let ba = vol_limit(&psi, &phi, &levels(1, 12), Window::default()).unwrap();
    assert_eq!(ab.estimate(), &-ba.estimate());
    assert_eq!(ab.error_bound(), ba.error_bound());
}

#[test]
fn limit_is_monotone_under_pointwise_order() {
    let phi = half_slope_metric(2);
    let above = phi.add_function(&tent(2).scale(&rat(1, 4))).unwrap();
    let triv = Metric::trivial(2, 1);
    let low = vol_limit(&phi, &triv, &levels(8, 24), Window::All).unwrap();
    let high = vol_limit(&above, &triv, &levels(8, 24), Window::All).unwrap();
    assert!(high.estimate() + high.error_bound() >= low.estimate() - low.error_bound());
    for m in [4, 9, 16] {
        assert!(vol_m(&above, &triv, m).unwrap() >= vol_m(&phi, &triv, m).unwrap());
    }
}

#[test]
fn fekete_value_is_translation_invariant_by_integers() {
    // z -> z + k preserves the Gauss norm, so the optimum does not move
    let triv = Metric::trivial(3, 1);
    let pool: Vec<Rational> = (0..9).map(int).collect();
    let shifted: Vec<Rational> = pool.iter().map(|x| x + int(5)).collect();
    for m in 1..=3 {
        let a = fekete_experiment(&triv, m, &pool, &FeketeSearch::Exhaustive).unwrap();
        let b = fekete_experiment(&triv, m, &shifted, &FeketeSearch::Exhaustive).unwrap();
        assert_eq!(a.best_valuation, b.best_valuation, "m = {m}");
        assert_eq!(a.ties, b.ties);
    }
}

#[test]
fn local_search_never_beats_exhaustive() {
    let triv = Metric::trivial(2, 1);
    let pool: Vec<Rational> = (0..10).map(|k| rat(k, 1)).collect();
    let exact = fekete_experiment(&triv, 2, &pool, &FeketeSearch::Exhaustive).unwrap();
    for seed in 0..4 {
        let local = fekete_experiment(&triv, 2, &pool, &FeketeSearch::LocalSearch { seed, budget: 60 }).unwrap();
        assert!(local.best_valuation >= exact.best_valuation);
        assert!(local.evaluations <= 60);
    }
}

#[test]
fn degree_zero_volumes_are_bounded() {
    let phi = Metric::new(0, tent(2));
    let triv = Metric::trivial(2, 0);
    let r = vol_limit(&phi, &triv, &levels(1, 10), Window::default()).unwrap();
    assert!(r.estimate().abs() <= r.error_bound().clone());
}
