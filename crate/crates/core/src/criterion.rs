//! Decides from correlation series whether a parameter point acts as a
//! continuous source of antibunched photon pairs: single signal photons must be
//! bunched (`G⁽²⁾` peaked at τ = 0), pairs must be antibunched
//! (`g_{s,2}(0)` below its long-time value), and the pair antibunching must be
//! slower than the single-photon bunching.

use std::fmt;

use crate::analytic::{self, Timescales};
use crate::lindblad::{linspace, CorrelationSeries, MasterEquation};
use crate::{Error, Result};

/// Grid extensions tried by [`evaluate_master_equation`] before giving up.
pub const MAX_GRID_EXTENSIONS: usize = 4;

/// Regime read off the pump `g_p⁽²⁾(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `|g − 1| ≤ band`: single photons / coherent light (green).
    Coherent,
    /// `g < 1 − band`: good pair source (blue).
    OptimalPair,
    /// `g > 1 + band`: degraded pair source (red).
    DegradedPair,
}

impl Regime {
    pub fn color(self) -> &'static str {
        match self {
            Regime::Coherent => "green",
            Regime::OptimalPair => "blue",
            Regime::DegradedPair => "red",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.color())
    }
}

/// Thresholds of the classification. All are relative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriterionConfig {
    /// Half-width of the green band around `g_p⁽²⁾(0) = 1`.
    pub band: f64,
    /// Allowed spread of the pair plateau, and margin for calling `g_{s,2}(0)`
    /// antibunched.
    pub plateau_tolerance: f64,
    /// Minimum antibunching-time / bunching-width ratio.
    pub timescale_ratio: f64,
    /// `G⁽²⁾(0)` within this fraction of the maximum counts as a peak at zero.
    pub peak_tolerance: f64,
}

impl Default for CriterionConfig {
    fn default() -> Self {
        Self { band: 0.05, plateau_tolerance: 0.02, timescale_ratio: 3.0, peak_tolerance: 0.02 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairSourceVerdict {
    pub is_pair_source: bool,
    pub g2_peak_at_zero: bool,
    pub pairs_antibunched: bool,
    pub timescale_ordering_ok: bool,
    /// `tau_a`: pair antibunching time, `tau_b`: bunching width of `G⁽²⁾`,
    /// `tau_in`: position of the `G⁽²⁾` maximum.
    pub measured: Timescales,
    /// Long-time value of the pair correlator.
    pub pair_plateau: f64,
    pub regime: Option<Regime>,
}

impl PairSourceVerdict {
    pub fn with_regime(mut self, g2_pump_zero: f64, band: f64) -> Self {
        self.regime = Some(classify_regime_with_band(g2_pump_zero, band));
        self
    }
}

pub fn classify_regime(g2_pump_zero: f64) -> Regime {
    classify_regime_with_band(g2_pump_zero, CriterionConfig::default().band)
}

pub fn classify_regime_with_band(g2_pump_zero: f64, band: f64) -> Regime {
    if g2_pump_zero < 1.0 - band {
        Regime::OptimalPair
    } else if g2_pump_zero > 1.0 + band {
        Regime::DegradedPair
    } else {
        Regime::Coherent
    }
}

/// Linear interpolation of the first `τ` at which `f` crosses `level`, walking
/// right from index `start`. `above` selects the direction of the crossing.
fn first_crossing(tau: &[f64], f: &[f64], start: usize, level: f64, above: bool) -> Option<f64> {
    let reached = |v: f64| if above { v >= level } else { v <= level };
    if reached(f[start]) {
        return Some(tau[start]);
    }
    (start + 1..f.len()).find(|&i| reached(f[i])).map(|i| {
        let (t0, t1, f0, f1) = (tau[i - 1], tau[i], f[i - 1], f[i]);
        if f1 == f0 {
            t1
        } else {
            t0 + (level - f0) * (t1 - t0) / (f1 - f0)
        }
    })
}

/// Mean of the last 10% of the series (at least one point) and its largest
/// relative deviation from that mean.
fn plateau(values: &[f64]) -> (f64, f64) {
    let n = (values.len() / 10).max(1);
    let tail = &values[values.len() - n..];
    let mean = tail.iter().sum::<f64>() / n as f64;
    let spread = tail.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    (mean, if mean != 0.0 { spread / mean.abs() } else { f64::INFINITY })
}

/// Half-maximum width of `g2` above its long-time baseline, around its peak.
fn bunching_width(tau: &[f64], g2: &[f64], peak: usize, baseline: f64) -> f64 {
    let half = baseline + 0.5 * (g2[peak] - baseline);
    let right = first_crossing(tau, g2, peak, half, false).unwrap_or(tau[tau.len() - 1]);
    let left = (0..peak).rev().find(|&i| g2[i] <= half).map_or(tau[0], |i| {
        let (t0, t1, f0, f1) = (tau[i], tau[i + 1], g2[i], g2[i + 1]);
        t0 + (half - f0) * (t1 - t0) / (f1 - f0)
    });
    right - left
}

/// Applies the pair-source criterion to a signal `G⁽²⁾(τ)` series (any overall
/// scale) and a normalized pair series `g_{s,2}(τ)` on the same grid.
pub fn evaluate_criterion(
    g2: &CorrelationSeries,
    g2_pairs: &CorrelationSeries,
    config: &CriterionConfig,
) -> Result<PairSourceVerdict> {
    let tau = &g2.tau;
    let same_grid = tau.len() == g2_pairs.tau.len()
        && tau.iter().zip(&g2_pairs.tau).all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
    if !same_grid || tau.len() < 3 || g2.values.len() != tau.len() || g2_pairs.values.len() != tau.len() {
        return Err(Error::InvalidParams("correlation series must share a grid of at least 3 points".into()));
    }
    let last = tau[tau.len() - 1];

    let (pair_plateau, spread) = plateau(&g2_pairs.values);
    if spread > config.plateau_tolerance {
        return Err(Error::GridTooShort(format!(
            "pair correlator still varies by {spread:.3e} (relative) over the last 10% of the grid ending at τ = {last}"
        )));
    }
    let (g2_base, _) = plateau(&g2.values);

    let g = &g2.values;
    let peak = (0..g.len()).fold(0, |best, i| if g[i] > g[best] { i } else { best });
    let g2_peak_at_zero = peak <= 1 || g[0] >= (1.0 - config.peak_tolerance) * g[peak];
    let tau_b = bunching_width(tau, g, peak, g2_base);

    let p = &g2_pairs.values;
    let pairs_antibunched = p[0] < (1.0 - config.plateau_tolerance) * pair_plateau;
    // first time the pair correlator has covered 1 − 1/e of its way to the plateau
    let gap = p[0] - pair_plateau;
    let target = pair_plateau + gap / std::f64::consts::E;
    let tau_a = if gap == 0.0 { tau[0] } else { first_crossing(tau, p, 0, target, gap < 0.0).unwrap_or(last) };

    let measured = Timescales { tau_a, tau_b, tau_in: tau[peak] };
    let longest = tau_a.max(tau_b).max(measured.tau_in);
    if last < 5.0 * longest {
        return Err(Error::GridTooShort(format!("grid ends at τ = {last}, measured timescales need {}", 5.0 * longest)));
    }
    let timescale_ordering_ok = measured.tau_in <= tau_b && tau_a >= config.timescale_ratio * tau_b;

    Ok(PairSourceVerdict {
        is_pair_source: g2_peak_at_zero && pairs_antibunched && timescale_ordering_ok,
        g2_peak_at_zero,
        pairs_antibunched,
        timescale_ordering_ok,
        measured,
        pair_plateau,
        regime: None,
    })
}

/// `τ` grid resolving `[0, 20/γ_s]` finely and reaching `horizon` with a
/// coarser uniform tail.
pub fn criterion_tau_grid(gamma_s: f64, horizon: f64) -> Vec<f64> {
    let fine_end = 20.0 / gamma_s;
    if horizon <= fine_end {
        return linspace(0.0, horizon, 401);
    }
    let mut tau = linspace(0.0, fine_end, 401);
    tau.extend(linspace(fine_end, horizon, 4001).into_iter().skip(1));
    tau
}

/// Computes both correlators of `me` and applies the criterion, starting from
/// a horizon of ten times the longest closed-form timescale and extending it
/// fourfold whenever the series have not settled.
pub fn evaluate_master_equation(me: &MasterEquation, config: &CriterionConfig) -> Result<PairSourceVerdict> {
    let p = &me.params;
    let ts = analytic::timescales(p);
    let estimate = [ts.tau_a, ts.tau_b, ts.tau_in].into_iter().filter(|t| t.is_finite()).fold(0.0, f64::max);
    let mut horizon = (10.0 * estimate).clamp(50.0 / p.gamma_s, 1e6 / p.gamma_s);
    let g2_pump_zero = me.observables().g2_p0;
    let mut last_err = None;
    for _ in 0..=MAX_GRID_EXTENSIONS {
        let tau = criterion_tau_grid(p.gamma_s, horizon);
        let g2 = me.correlator_g2(&tau)?;
        let pairs = me.correlator_g2_pairs(&tau)?;
        match evaluate_criterion(&g2.raw, &pairs.normalized, config) {
            Ok(v) => return Ok(v.with_regime(g2_pump_zero, config.band)),
            Err(e @ Error::GridTooShort(_)) => {
                log::debug!("extending criterion grid beyond τ = {horizon}: {e}");
                last_err = Some(e);
                horizon *= 4.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{linspace, SeriesKind};
    use proptest::prelude::*;

    fn series(tau: &[f64], f: impl Fn(f64) -> f64, kind: SeriesKind) -> CorrelationSeries {
        CorrelationSeries { tau: tau.to_vec(), values: tau.iter().map(|&t| f(t)).collect(), kind }
    }

    fn ideal(tau_a: f64, tau_b: f64) -> (CorrelationSeries, CorrelationSeries) {
        let tau = linspace(0.0, 20.0 * tau_a.max(tau_b), 8001);
        let g2 = series(&tau, |t| 1.0 + 40.0 * (-t / tau_b).exp(), SeriesKind::G2);
        let pairs = series(&tau, |t| (1.0 - (-t / (2.0 * tau_a)).exp()).powi(2), SeriesKind::G2PairsNormalized);
        (g2, pairs)
    }

    #[test]
    fn regime_examples() {
        assert_eq!(classify_regime(1.0), Regime::Coherent);
        assert_eq!(classify_regime(0.3), Regime::OptimalPair);
        assert_eq!(classify_regime(3.0), Regime::DegradedPair);
        assert_eq!(classify_regime(1.04), Regime::Coherent);
        assert_eq!(classify_regime(0.96), Regime::Coherent);
    }

    #[test]
    fn well_separated_timescales_pass() {
        let (g2, pairs) = ideal(50.0, 1.0);
        let v = evaluate_criterion(&g2, &pairs, &CriterionConfig::default()).unwrap();
        assert!(v.is_pair_source, "{v:?}");
        // half maximum of e^{−t/τ_B} above baseline: τ_B ln 2
        assert!((v.measured.tau_b - 2f64.ln()).abs() < 0.02);
        // (1 − e^{−t/2τ_A})² = 1 − 1/e
        let want = -2.0 * 50.0 * (1.0 - (1.0 - 1.0 / std::f64::consts::E).sqrt()).ln();
        assert!((v.measured.tau_a - want).abs() < 0.01 * want, "{} vs {want}", v.measured.tau_a);
    }

    #[test]
    fn delayed_peak_fails() {
        let (mut g2, pairs) = ideal(50.0, 1.0);
        g2.values = g2.tau.iter().map(|&t| 1.0 + 40.0 * t * (-t).exp()).collect();
        let v = evaluate_criterion(&g2, &pairs, &CriterionConfig::default()).unwrap();
        assert!(!v.g2_peak_at_zero);
        assert!(!v.is_pair_source);
    }

    #[test]
    fn bunched_pairs_fail() {
        let (g2, mut pairs) = ideal(50.0, 1.0);
        pairs.values = pairs.tau.iter().map(|&t| 1.0 + 2.0 * (-t / 3.0).exp()).collect();
        let v = evaluate_criterion(&g2, &pairs, &CriterionConfig::default()).unwrap();
        assert!(!v.pairs_antibunched);
        assert!(!v.is_pair_source);
    }

    #[test]
    fn comparable_timescales_fail_ordering() {
        let (g2, pairs) = ideal(0.5, 1.0);
        let v = evaluate_criterion(&g2, &pairs, &CriterionConfig::default()).unwrap();
        assert!(v.pairs_antibunched);
        assert!(!v.timescale_ordering_ok);
    }

    #[test]
    fn short_grid_is_reported() {
        let tau = linspace(0.0, 20.0, 201);
        let g2 = series(&tau, |t| 1.0 + (-t).exp(), SeriesKind::G2);
        let pairs = series(&tau, |t| 1.0 - (-t / 100.0).exp(), SeriesKind::G2PairsNormalized);
        assert!(matches!(evaluate_criterion(&g2, &pairs, &CriterionConfig::default()), Err(Error::GridTooShort(_))));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let (g2, mut pairs) = ideal(50.0, 1.0);
        pairs.tau[3] += 1e-3;
        assert!(matches!(evaluate_criterion(&g2, &pairs, &CriterionConfig::default()), Err(Error::InvalidParams(_))));
    }

    proptest! {
        #[test]
        fn verdict_ignores_scale_of_g2(scale in 1e-12f64..1e12, tau_a in 2.0f64..200.0, tau_b in 0.2f64..3.0) {
            let (g2, pairs) = ideal(tau_a, tau_b);
            let mut scaled = g2.clone();
            scaled.values.iter_mut().for_each(|v| *v *= scale);
            let cfg = CriterionConfig::default();
            let a = evaluate_criterion(&g2, &pairs, &cfg).unwrap();
            let b = evaluate_criterion(&scaled, &pairs, &cfg).unwrap();
            prop_assert_eq!(a.is_pair_source, b.is_pair_source);
            prop_assert_eq!(a.g2_peak_at_zero, b.g2_peak_at_zero);
            prop_assert!((a.measured.tau_b - b.measured.tau_b).abs() <= 1e-9 * a.measured.tau_b);
        }
    }
}
