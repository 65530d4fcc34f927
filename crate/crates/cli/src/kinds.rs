//! Experiment registry and runners.

use berkline_core::experiments::{
    diff_experiment_at, dirac_experiment, fekete_experiment, orthogonality_experiment, sandwich_check, FeketeSearch,
};
use berkline_core::field::{Rational, Valuation};
use berkline_core::volumes::{check_vol_equals_energy_at, rr_slope_experiment, ExtrapolationReport};
use num_traits::Zero;
use serde_json::{json, Value};

use crate::config::{Config, Kind, SearchSpec};
use crate::error::{invalid, CliError};
use crate::report::{self, exact, Assertion, Row};

pub const KINDS: [(Kind, &str); 7] = [
    (Kind::Diff, "diff"),
    (Kind::Sandwich, "sandwich"),
    (Kind::Orth, "orth"),
    (Kind::Dirac, "dirac"),
    (Kind::Fekete, "fekete"),
    (Kind::Rr, "rr"),
    (Kind::VolEnergy, "vol-energy"),
];

pub fn name(kind: Kind) -> &'static str {
    KINDS.iter().find(|(k, _)| *k == kind).map(|(_, n)| *n).expect("every kind is registered")
}

pub fn lookup(name: &str) -> Result<Kind, CliError> {
    KINDS.iter().find(|(_, n)| *n == name).map(|(k, _)| *k).ok_or_else(|| CliError::UnknownKind(name.to_string()))
}

pub fn describe(kind: Kind) -> &'static str {
    match kind {
        Kind::Diff => {
            "diff: differentiability of the volume. For psh phi and a PL function f, \
             t -> vol(L, phi + t f, phi) is differentiable at 0 with derivative \
             the integral of f against dd^c phi. Estimated by symmetric finite \
             differences of extrapolated volumes.\n\
             needs: metrics.phi, functions.f, params.t_grid, params.m_max"
        }
        Kind::Sandwich => {
            "sandwich: with f = psi1 - psi2 for psh psi1, psi2 on a bundle of degree e, \
             e inf f <= integral of f against (dd^c phi + dd^c psi1) minus vol(L, phi + f, phi) <= e sup f.\n\
             needs: metrics.phi, metrics.psi1, metrics.psi2, params.m_max"
        }
        Kind::Orth => {
            "orth: orthogonality of the psh envelope. The Monge-Ampere measure of P(phi) \
             is supported in the contact locus {P(phi) = phi}, so the integral of \
             phi - P(phi) against dd^c P(phi) vanishes.\n\
             needs: metrics.phi"
        }
        Kind::Dirac => {
            "dirac: the equilibrium metric of a point x (greatest psh metric not \
             exceeding phi at x) has Monge-Ampere measure d times the Dirac mass at x.\n\
             needs: metrics.phi, params.point"
        }
        Kind::Fekete => {
            "fekete: configurations maximizing the metrized Vandermonde determinant \
             of sections of mL equidistribute towards the normalized Monge-Ampere \
             measure. The search runs over a finite pool of rational points.\n\
             needs: metrics.phi, params.m, params.pool"
        }
        Kind::Rr => {
            "rr: Riemann-Roch for a vertical divisor D with model function phi_D >= 0. \
             h0(D, mA|D) grows like m times the integral of phi_D against dd^c phi_A.\n\
             needs: metrics.phi (the ample metric), functions.divisor, params.m_max"
        }
        Kind::VolEnergy => {
            "vol-energy: the relative volume equals the Monge-Ampere energy of the \
             psh envelopes, vol(L, phi, psi) = E(P(phi), P(psi)).\n\
             needs: metrics.phi, metrics.psi, params.m_max"
        }
    }
}

pub struct RunOptions {
    pub m_max: Option<u32>,
    pub seed: Option<u64>,
}

pub struct Outcome {
    pub results: Value,
    pub rows: Vec<Row>,
    pub assertions: Vec<Assertion>,
    pub ramification: Option<u32>,
    pub levels: Vec<u32>,
    pub seed: Option<u64>,
}

impl Outcome {
    fn new(results: Value, assertions: Vec<Assertion>) -> Self {
        Outcome { results, rows: Vec::new(), assertions, ramification: None, levels: Vec::new(), seed: None }
    }
}

pub fn run(config: &Config, opts: &RunOptions) -> Result<Outcome, CliError> {
    config.field()?;
    match config.kind {
        Kind::Diff => diff(config, opts),
        Kind::Sandwich => sandwich(config, opts),
        Kind::Orth => orth(config),
        Kind::Dirac => dirac(config),
        Kind::Fekete => fekete(config, opts),
        Kind::Rr => rr(config, opts),
        Kind::VolEnergy => vol_energy(config, opts),
    }
}

fn volume_rows(report: &ExtrapolationReport, t: Option<&Rational>) -> Vec<Row> {
    report
        .volumes
        .iter()
        .map(|(m, v)| Row::new(*m, t, v, &(v / Rational::from_integer((u64::from(*m) * u64::from(*m)).into()))))
        .collect()
}

fn extrapolation(report: &ExtrapolationReport) -> Value {
    json!({
        "estimate": exact(report.estimate()),
        "error_bound": exact(report.error_bound()),
        "slope": exact(&report.fit.slope),
        "window": report.fit.window,
    })
}

fn bound_assertion(config: &Config, assertions: &mut Vec<Assertion>, name: &str, bound: &Rational) -> Result<(), CliError> {
    if let Some(limit) = config.optional(config.params.max_bound, "max_bound")? {
        assertions.push(Assertion::at_most(name, bound, &limit));
    }
    Ok(())
}

fn diff(config: &Config, opts: &RunOptions) -> Result<Outcome, CliError> {
    let phi = config.metric("phi")?;
    let f = config.function("f")?;
    let steps = config.rationals(&config.params.t_grid, "t_grid")?;
    let levels = config.levels(opts.m_max)?;
    let report = diff_experiment_at(&phi, &f, &steps, &levels, config.window()?, config.field.ramification).map_err(invalid)?;
    let mut assertions = Vec::new();
    let mut rows = Vec::new();
    let mut legs = Vec::new();
    for s in &report.steps {
        let t = report::exact_string(&s.t);
        assertions.push(Assertion::at_most(format!("gap_within_bound[t={t}]"), &s.gap, &s.bound));
        bound_assertion(config, &mut assertions, &format!("bound_below_limit[t={t}]"), &s.bound)?;
        rows.extend(volume_rows(&s.plus, Some(&s.t)));
        rows.extend(volume_rows(&s.minus, Some(&-&s.t)));
        legs.push(json!({
            "t": exact(&s.t),
            "derivative": exact(&s.derivative),
            "bound": exact(&s.bound),
            "gap": exact(&s.gap),
            "plus": extrapolation(&s.plus),
            "minus": extrapolation(&s.minus),
        }));
    }
    let results = json!({ "target": exact(&report.target), "steps": legs });
    Ok(Outcome { rows, ramification: Some(report.ramification), levels, ..Outcome::new(results, assertions) })
}

fn sandwich(config: &Config, opts: &RunOptions) -> Result<Outcome, CliError> {
    let phi = config.metric("phi")?;
    let psi1 = config.metric("psi1")?;
    let psi2 = config.metric("psi2")?;
    let levels = config.levels(opts.m_max)?;
    let r = sandwich_check(&phi, &psi1, &psi2, &levels, config.window()?).map_err(invalid)?;
    let mut assertions = vec![Assertion::new(
        "sandwich_holds",
        r.holds(),
        format!(
            "{} <= {} <= {} up to {}",
            report::exact_string(&r.lower()),
            report::exact_string(&r.middle),
            report::exact_string(&r.upper()),
            report::exact_string(&r.bound)
        ),
    )];
    bound_assertion(config, &mut assertions, "bound_below_limit", &r.bound)?;
    let results = json!({
        "constant": r.constant,
        "inf_f": exact(&r.inf_f),
        "sup_f": exact(&r.sup_f),
        "pairing": exact(&r.pairing),
        "volume": extrapolation(&r.volume),
        "middle": exact(&r.middle),
        "lower": exact(&r.lower()),
        "upper": exact(&r.upper()),
        "lower_slack": exact(&r.lower_slack()),
        "upper_slack": exact(&r.upper_slack()),
    });
    let rows = volume_rows(&r.volume, None);
    Ok(Outcome { rows, ramification: Some(r.volume.ramification), levels, ..Outcome::new(results, assertions) })
}

fn orth(config: &Config) -> Result<Outcome, CliError> {
    let phi = config.metric("phi")?;
    let residual = orthogonality_experiment(&phi).map_err(invalid)?;
    let assertions = vec![Assertion::new("residual_zero", residual.is_zero(), report::exact_string(&residual))];
    let results = json!({ "residual": exact(&residual), "input_is_psh": phi.is_psh() });
    Ok(Outcome::new(results, assertions))
}

fn dirac(config: &Config) -> Result<Outcome, CliError> {
    let phi = config.metric("phi")?;
    let x = config.point()?;
    let r = dirac_experiment(&x, &phi).map_err(invalid)?;
    let assertions = vec![Assertion::new("measure_is_dirac", r.is_dirac(), r.measure.to_string())];
    let results = json!({
        "point": report::point(&r.point),
        "measure": report::measure(&r.measure),
        "expected": report::measure(&r.expected),
    });
    Ok(Outcome::new(results, assertions))
}

fn fekete(config: &Config, opts: &RunOptions) -> Result<Outcome, CliError> {
    let phi = config.metric("phi")?;
    let pool = config.rationals(&config.params.pool, "pool")?;
    let m = config.params.m.ok_or_else(|| CliError::Validation("missing params.m".into()))?;
    let seed = opts.seed.or(config.params.seed).unwrap_or(0);
    let (search, seed) = match config.params.search.unwrap_or_default() {
        SearchSpec::Exhaustive => (FeketeSearch::Exhaustive, None),
        SearchSpec::Local => (FeketeSearch::LocalSearch { seed, budget: config.params.budget.unwrap_or(10_000) }, Some(seed)),
    };
    let r = fekete_experiment(&phi, m, &pool, &search).map_err(invalid)?;
    let mut assertions = Vec::new();
    if let Some(v) = config.optional(config.params.expect_valuation, "expect_valuation")? {
        assertions.push(Assertion::new(
            "optimal_valuation",
            r.best_valuation == Valuation::Finite(v.clone()),
            format!("{} == {}", r.best_valuation, report::exact_string(&v)),
        ));
    }
    if let Some(limit) = config.optional(config.params.max_distance, "max_distance")? {
        assertions.push(Assertion::at_most("distance_below_limit", &r.distance, &limit));
    }
    let results = json!({
        "m": r.m,
        "points": r.n,
        "best": r.best.iter().map(exact).collect::<Vec<_>>(),
        "ties": r.ties,
        "best_valuation": report::valuation(&r.best_valuation),
        "pairwise_units": r.pairwise_units(phi.p()),
        "empirical": report::measure(&r.empirical),
        "target": report::measure(&r.target),
        "distance": exact(&r.distance),
        "pool_restricted": r.pool_restricted,
        "evaluations": r.evaluations,
    });
    Ok(Outcome { seed, ..Outcome::new(results, assertions) })
}

fn rr(config: &Config, opts: &RunOptions) -> Result<Outcome, CliError> {
    let phi = config.metric("phi")?;
    let divisor = config.function("divisor")?;
    let levels = config.levels(opts.m_max)?;
    let r = rr_slope_experiment(&divisor, &phi, &levels, config.window()?).map_err(invalid)?;
    let mut assertions = vec![Assertion::at_most("gap_within_bound", &r.gap, &r.fit.error_bound)];
    bound_assertion(config, &mut assertions, "bound_below_limit", &r.fit.error_bound)?;
    let rows = r
        .levels
        .iter()
        .map(|l| Row::new(l.m, None, &l.content, &(&l.content / Rational::from_integer(l.m.into()))))
        .collect();
    let results = json!({
        "levels": r.levels.iter().map(|l| json!({
            "m": l.m,
            "content": exact(&l.content),
            "pre_stabilization": l.pre_stabilization,
        })).collect::<Vec<_>>(),
        "slope": exact(r.slope()),
        "intercept": exact(&r.fit.intercept),
        "target": exact(&r.target),
        "gap": exact(&r.gap),
        "error_bound": exact(&r.fit.error_bound),
        "ample_masses_positive": r.ample_masses_positive,
    });
    Ok(Outcome { rows, levels, ..Outcome::new(results, assertions) })
}

fn vol_energy(config: &Config, opts: &RunOptions) -> Result<Outcome, CliError> {
    let phi = config.metric("phi")?;
    let psi = config.metric("psi")?;
    let levels = config.levels(opts.m_max)?;
    let r = check_vol_equals_energy_at(&phi, &psi, &levels, config.window()?, config.field.ramification).map_err(invalid)?;
    let mut assertions = vec![Assertion::at_most("gap_within_bound", &r.gap, r.volume.error_bound())];
    bound_assertion(config, &mut assertions, "bound_below_limit", r.volume.error_bound())?;
    let results = json!({
        "volume": extrapolation(&r.volume),
        "energy": exact(&r.energy),
        "gap": exact(&r.gap),
    });
    let rows = volume_rows(&r.volume, None);
    Ok(Outcome { rows, ramification: Some(r.volume.ramification), levels, ..Outcome::new(results, assertions) })
}
