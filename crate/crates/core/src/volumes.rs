//! Extrapolated relative volumes, the volume/energy comparison and the
//! Riemann–Roch content series.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::field::Rational;
use crate::metrics::{Metric, MetricError};
use crate::sections::{ramification_for, vol_m_with, SectionError};
use crate::tree::PLFunction;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VolumeError {
    #[error("K_{requested} does not contain K_{needed}, which the data needs")]
    RamificationTooCoarse { requested: u32, needed: u32 },
    #[error("fit window has {0} samples, at least 4 are needed")]
    WindowTooSmall(usize),
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(u32, u32),
    #[error("divisor function is negative somewhere (minimum {0})")]
    NegativeDivisor(Rational),
    #[error("ample metric is not psh")]
    NotPsh,
    #[error(transparent)]
    Section(#[from] SectionError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Which levels enter the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// The largest `n` levels.
    Last(usize),
    All,
}

impl Default for Window {
    fn default() -> Self {
        Window::Last(8)
    }
}

impl Window {
    pub fn select(&self, levels: &[u32]) -> Vec<u32> {
        let mut sorted = levels.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        match *self {
            Window::All => sorted,
            Window::Last(n) => sorted[sorted.len().saturating_sub(n)..].to_vec(),
        }
    }
}

fn r(n: impl Into<BigInt>) -> Rational {
    Rational::from_integer(n.into())
}

/// Exact least-squares line `y = a + b·x`.
pub fn fit_affine(points: &[(Rational, Rational)]) -> (Rational, Rational) {
    let n = r(points.len() as u64);
    let mean_x = points.iter().fold(Rational::zero(), |s, (x, _)| s + x) / &n;
    let mean_y = points.iter().fold(Rational::zero(), |s, (_, y)| s + y) / &n;
    let (sxy, sxx) = points.iter().fold((Rational::zero(), Rational::zero()), |(sxy, sxx), (x, y)| {
        let dx = x - &mean_x;
        (sxy + &dx * (y - &mean_y), sxx + &dx * &dx)
    });
    let b = if sxx.is_zero() { Rational::zero() } else { sxy / sxx };
    let a = mean_y - &b * mean_x;
    (a, b)
}

/// One fitted series `y_m ≈ a + b/m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesFit {
    pub intercept: Rational,
    pub slope: Rational,
    /// `(m, y_m − a − b/m)` on the window.
    pub residuals: Vec<(u32, Rational)>,
    pub window: Vec<u32>,
    /// Twice the largest absolute residual.
    pub error_bound: Rational,
}

pub fn fit_series(samples: &[(u32, Rational)], window: Window) -> Result<SeriesFit, VolumeError> {
    let levels: Vec<u32> = samples.iter().map(|(m, _)| *m).collect();
    let chosen = window.select(&levels);
    if chosen.len() < 4 {
        return Err(VolumeError::WindowTooSmall(chosen.len()));
    }
    let points: Vec<(u32, Rational, Rational)> = samples
        .iter()
        .filter(|(m, _)| chosen.contains(m))
        .map(|(m, y)| (*m, Rational::new(1.into(), (*m).into()), y.clone()))
        .collect();
    let xy: Vec<(Rational, Rational)> = points.iter().map(|(_, x, y)| (x.clone(), y.clone())).collect();
    let (a, b) = fit_affine(&xy);
    let residuals: Vec<(u32, Rational)> = points.iter().map(|(m, x, y)| (*m, y - &a - &b * x)).collect();
    let worst = residuals.iter().map(|(_, e)| e.abs()).max().unwrap_or_else(Rational::zero);
    Ok(SeriesFit { intercept: a, slope: b, residuals, window: chosen, error_bound: worst * r(2) })
}

/// `vol_m(φ, ψ)` for each level, computed concurrently and sorted by `m`.
pub fn vol_series(phi: &Metric, psi: &Metric, levels: &[u32], ramification: u32) -> Result<Vec<(u32, Rational)>, VolumeError> {
    let mut out = levels
        .par_iter()
        .map(|&m| vol_m_with(phi, psi, m, ramification).map(|v| (m, v)))
        .collect::<Result<Vec<_>, _>>()?;
    out.sort_by_key(|(m, _)| *m);
    out.dedup_by_key(|(m, _)| *m);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtrapolationReport {
    /// `(m, vol_m)` over the whole range.
    pub volumes: Vec<(u32, Rational)>,
    pub fit: SeriesFit,
    pub ramification: u32,
}

impl ExtrapolationReport {
    pub fn estimate(&self) -> &Rational {
        &self.fit.intercept
    }

    pub fn error_bound(&self) -> &Rational {
        &self.fit.error_bound
    }
}

/// Fits `vol_m/m² ≈ a + b/m`; the intercept estimates `vol(L, φ, ψ)`.
pub fn vol_limit(phi: &Metric, psi: &Metric, levels: &[u32], window: Window) -> Result<ExtrapolationReport, VolumeError> {
    vol_limit_at(phi, psi, levels, window, ramification_for(&[phi, psi], levels))
}

/// [`vol_limit`] over a caller-chosen `K_M`, shared across related runs.
pub fn vol_limit_at(
    phi: &Metric,
    psi: &Metric,
    levels: &[u32],
    window: Window,
    ramification: u32,
) -> Result<ExtrapolationReport, VolumeError> {
    if phi.degree() != psi.degree() {
        return Err(VolumeError::DegreeMismatch(phi.degree(), psi.degree()));
    }
    let chosen = window.select(levels);
    if chosen.len() < 4 {
        return Err(VolumeError::WindowTooSmall(chosen.len()));
    }
    let volumes = vol_series(phi, psi, levels, ramification)?;
    let normalized: Vec<(u32, Rational)> = volumes.iter().map(|(m, v)| (*m, v / r(u64::from(*m) * u64::from(*m)))).collect();
    let fit = fit_series(&normalized, window)?;
    Ok(ExtrapolationReport { volumes, fit, ramification })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VolEnergyReport {
    pub volume: ExtrapolationReport,
    /// `E(P(φ), P(ψ))`.
    pub energy: Rational,
    pub gap: Rational,
}

impl VolEnergyReport {
    pub fn within_bound(&self) -> bool {
        self.gap <= *self.volume.error_bound()
    }
}

/// `needed`, or a requested multiple of it.
pub fn resolve_ramification(needed: u32, requested: Option<u32>) -> Result<u32, VolumeError> {
    match requested {
        None => Ok(needed),
        Some(m) if m > 0 && m % needed == 0 => Ok(m),
        Some(m) => Err(VolumeError::RamificationTooCoarse { requested: m, needed }),
    }
}

/// Extrapolated volume against the energy of the envelopes.
pub fn check_vol_equals_energy(phi: &Metric, psi: &Metric, levels: &[u32], window: Window) -> Result<VolEnergyReport, VolumeError> {
    check_vol_equals_energy_at(phi, psi, levels, window, None)
}

pub fn check_vol_equals_energy_at(
    phi: &Metric,
    psi: &Metric,
    levels: &[u32],
    window: Window,
    ramification: Option<u32>,
) -> Result<VolEnergyReport, VolumeError> {
    let ramification = resolve_ramification(ramification_for(&[phi, psi], levels), ramification)?;
    let volume = vol_limit_at(phi, psi, levels, window, ramification)?;
    let energy = phi.envelope()?.energy(&psi.envelope()?)?;
    let gap = (volume.estimate() - &energy).abs();
    Ok(VolEnergyReport { volume, energy, gap })
}

/// Content `h⁰(D, m𝒜|_D)`: the relative volume of the unit balls of
/// `mφ_A` and `mφ_A − φ_D`.
pub fn rr_content(phi_d: &PLFunction, phi_a: &Metric, m: u32) -> Result<Rational, VolumeError> {
    if m == 0 {
        return Err(SectionError::ZeroLevel.into());
    }
    let min = phi_d.min_value();
    if min.is_negative() {
        return Err(VolumeError::NegativeDivisor(min));
    }
    let lowered = phi_a.add_function(&phi_d.scale(&-Rational::new(1.into(), m.into())))?;
    let ramification = ramification_for(&[phi_a, &lowered], &[m]);
    Ok(vol_m_with(phi_a, &lowered, m, ramification)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RRLevel {
    pub m: u32,
    pub content: Rational,
    /// Outside the fit window, where the Serre-vanishing regime is not
    /// assumed to have started.
    pub pre_stabilization: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RRReport {
    pub levels: Vec<RRLevel>,
    /// Fit of `content/m ≈ a + b/m`.
    pub fit: SeriesFit,
    /// `∫ φ_D dd^c φ_A`.
    pub target: Rational,
    pub gap: Rational,
    /// Every Monge–Ampère mass of `φ_A` on its own tree is positive.
    pub ample_masses_positive: bool,
}

impl RRReport {
    /// Growth rate of `h⁰` in `m`: the intercept of the `content/m` fit.
    #[allow(clippy::misnamed_getters)]
    pub fn slope(&self) -> &Rational {
        &self.fit.intercept
    }
}

pub fn rr_slope_experiment(phi_d: &PLFunction, phi_a: &Metric, levels: &[u32], window: Window) -> Result<RRReport, VolumeError> {
    if !phi_a.is_psh() {
        return Err(VolumeError::NotPsh);
    }
    let mut contents = levels
        .par_iter()
        .map(|&m| rr_content(phi_d, phi_a, m).map(|c| (m, c)))
        .collect::<Result<Vec<_>, _>>()?;
    contents.sort_by_key(|(m, _)| *m);
    contents.dedup_by_key(|(m, _)| *m);
    let per_level: Vec<(u32, Rational)> = contents.iter().map(|(m, c)| (*m, c / r(*m))).collect();
    let fit = fit_series(&per_level, window)?;
    let levels = contents
        .into_iter()
        .map(|(m, content)| RRLevel { m, content, pre_stabilization: !fit.window.contains(&m) })
        .collect();
    let target = phi_a.pair(phi_d);
    let gap = (&fit.intercept - &target).abs();
    let ample_masses_positive = phi_a.ma_masses().iter().all(Signed::is_positive);
    Ok(RRReport { levels, fit, target, gap, ample_masses_positive })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{half_slope_metric, segment_function, tent, tent_metric};
    use crate::field::{int, rat, FieldContext};
    use crate::lattices::TorsionModule;
    use crate::sections::sup_norm_lattice;

    fn range(a: u32, b: u32) -> Vec<u32> {
        (a..=b).collect()
    }

    #[test]
    fn fit_recovers_exact_lines() {
        let pts: Vec<(Rational, Rational)> = (1..6).map(|k| (rat(1, k), int(3) - rat(2, k))).collect();
        assert_eq!(fit_affine(&pts), (int(3), int(-2)));
        let samples: Vec<(u32, Rational)> = (1..=3).map(|m| (m, int(0))).collect();
        assert_eq!(fit_series(&samples, Window::All).unwrap_err(), VolumeError::WindowTooSmall(3));
    }

    #[test]
    fn window_selection() {
        assert_eq!(Window::Last(3).select(&[5, 1, 4, 2, 3]), vec![3, 4, 5]);
        assert_eq!(Window::All.select(&[2, 1, 2]), vec![1, 2]);
        assert_eq!(Window::default(), Window::Last(8));
    }

    #[test]
    fn scaling_is_exact() {
        let phi = half_slope_metric(2);
        let c = rat(3, 2);
        let report = vol_limit(&phi.add_constant(&c), &phi, &range(1, 12), Window::default()).unwrap();
        assert_eq!(report.estimate(), &c);
        assert!(report.fit.residuals.iter().all(|(_, e)| e.is_zero()));
        let same = vol_limit(&phi, &phi, &range(1, 12), Window::default()).unwrap();
        assert_eq!(same.estimate(), &int(0));
    }

    #[test]
    fn degree_zero_limit_vanishes() {
        let phi = Metric::new(0, segment_function(3, int(1), int(-1)));
        let psi = Metric::trivial(3, 0);
        let report = vol_limit(&phi, &psi, &range(1, 10), Window::default()).unwrap();
        assert_eq!(report.estimate(), &int(0));
        assert_eq!(report.error_bound(), &int(0));
    }

    #[test]
    fn half_slope_energy_within_bound() {
        let phi = half_slope_metric(2);
        let triv = Metric::trivial(2, 1);
        let report = check_vol_equals_energy(&phi, &triv, &range(8, 24), Window::All).unwrap();
        assert_eq!(report.energy, rat(-1, 8));
        assert!(report.within_bound(), "gap {} bound {}", report.gap, report.volume.error_bound());
    }

    #[test]
    fn ramification_override() {
        assert_eq!(resolve_ramification(2, None), Ok(2));
        assert_eq!(resolve_ramification(2, Some(6)), Ok(6));
        assert_eq!(resolve_ramification(2, Some(3)), Err(VolumeError::RamificationTooCoarse { requested: 3, needed: 2 }));
        let phi = half_slope_metric(2);
        let triv = Metric::trivial(2, 1);
        let base = check_vol_equals_energy(&phi, &triv, &range(4, 9), Window::All).unwrap();
        let finer = check_vol_equals_energy_at(&phi, &triv, &range(4, 9), Window::All, Some(4 * base.volume.ramification)).unwrap();
        assert_eq!(base.volume.volumes, finer.volume.volumes);
        assert_eq!(base.gap, finer.gap);
    }

    #[test]
    fn tent_energy_side_is_zero() {
        let report = check_vol_equals_energy(&tent_metric(2, 1), &Metric::trivial(2, 1), &range(4, 16), Window::All).unwrap();
        assert_eq!(report.energy, int(0));
        assert!(report.within_bound());
    }

    #[test]
    fn rr_examples() {
        let triv = Metric::trivial(2, 1);
        let tree = crate::corpus::segment_tree(2);
        for k in 0..3 {
            let d = PLFunction::constant(tree.clone(), int(k));
            for m in 1..6 {
                assert_eq!(rr_content(&d, &triv, m).unwrap(), int(k * (i64::from(m) + 1)));
            }
        }
        let neg = segment_function(2, int(0), int(-1));
        assert_eq!(rr_content(&neg, &triv, 2).unwrap_err(), VolumeError::NegativeDivisor(int(-1)));
    }

    #[test]
    fn rr_tent_matches_lattice_quotient() {
        let triv = Metric::trivial(2, 1);
        let m = 4;
        let lowered = triv.add_function(&tent(2).scale(&rat(-1, 4))).unwrap();
        let ctx = FieldContext::new(2, ramification_for(&[&triv, &lowered], &[m])).unwrap();
        let outer = sup_norm_lattice(&triv, m, ctx).unwrap();
        let inner = sup_norm_lattice(&lowered, m, ctx).unwrap();
        let content = TorsionModule::new(outer, inner).unwrap().content().unwrap();
        assert_eq!(rr_content(&tent(2), &triv, m).unwrap(), content);
    }

    #[test]
    fn rr_slope_examples() {
        let triv = Metric::trivial(2, 1);
        let constant = PLFunction::constant(crate::corpus::segment_tree(2), int(2));
        let report = rr_slope_experiment(&constant, &triv, &range(1, 12), Window::default()).unwrap();
        assert_eq!(report.slope(), &int(2));
        assert_eq!(report.target, int(2));
        assert!(report.ample_masses_positive);
        assert!(report.levels.iter().filter(|l| l.m < 5).all(|l| l.pre_stabilization));

        let t = rr_slope_experiment(&tent(2), &triv, &range(1, 12), Window::default()).unwrap();
        assert_eq!(t.target, int(0));
        assert!(t.gap <= t.fit.error_bound);
        let doubled = rr_slope_experiment(&tent(2).scale(&int(2)), &triv, &range(1, 12), Window::default()).unwrap();
        assert_eq!(doubled.target, int(2) * &t.target);
        assert_eq!(doubled.slope(), &(int(2) * t.slope()));
        assert_eq!(rr_slope_experiment(&tent(2), &tent_metric(2, 1), &range(1, 8), Window::default()).unwrap_err(), VolumeError::NotPsh);
    }
}
