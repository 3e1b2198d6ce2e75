//! Closed-form rates, populations and wavefunction shapes valid in the
//! bad-cavity limit `g_j ≪ γ_j`. They serve as oracles for the numerical
//! modules and are evaluated wherever asked; leaving the regime only logs a
//! warning.

use crate::{Error, Result, SystemParams};

/// Coupling-to-decay ratio above which the bad-cavity formulas are flagged.
pub const BAD_CAVITY_RATIO: f64 = 0.1;

/// Adiabatically eliminated two-level description of the emitter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveModel {
    /// `Ω_eff = 2 Ω_p g_p / γ_p`
    pub omega_eff: f64,
    /// `γ_eff = Γ_p + Γ_s(Ω_s) + γ*`
    pub gamma_eff: f64,
    /// `Γ_p = 4 g_p² / γ_p`
    pub gamma_p_purcell: f64,
    /// `Γ_s(Ω_s) = 4 g_s² γ_s / (γ_s² + 4 Ω_s²)`
    pub gamma_s_purcell: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectivePopulations {
    pub n_e: f64,
    pub n_s: f64,
}

/// Pair reloading time, single-photon width and intra-pair delay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Timescales {
    pub tau_a: f64,
    pub tau_b: f64,
    pub tau_in: f64,
}

impl Timescales {
    /// `τ_in < τ_B < τ_A`
    pub fn ordered(&self) -> bool {
        self.tau_in < self.tau_b && self.tau_b < self.tau_a
    }
}

pub(crate) fn warn_outside_bad_cavity(params: &SystemParams, what: &str) {
    let rp = params.g_p / params.gamma_p;
    let rs = params.g_s / params.gamma_s;
    if rp > BAD_CAVITY_RATIO || rs > BAD_CAVITY_RATIO {
        log::warn!("{what}: outside the bad-cavity regime (g_p/γ_p = {rp:.3}, g_s/γ_s = {rs:.3})");
    }
}

/// Purcell rate of the signal path at control drive `omega_s`.
pub fn gamma_s_at(params: &SystemParams, omega_s: f64) -> f64 {
    let gs = params.gamma_s;
    4.0 * params.g_s * params.g_s * gs / (gs * gs + 4.0 * omega_s * omega_s)
}

pub fn gamma_p_purcell(params: &SystemParams) -> f64 {
    4.0 * params.g_p * params.g_p / params.gamma_p
}

pub fn purcell_rates(params: &SystemParams) -> EffectiveModel {
    let gp = gamma_p_purcell(params);
    let gs = gamma_s_at(params, params.omega_s_drive);
    EffectiveModel {
        omega_eff: 2.0 * params.omega_p_drive * params.g_p / params.gamma_p,
        gamma_eff: gp + gs + params.gamma_star,
        gamma_p_purcell: gp,
        gamma_s_purcell: gs,
    }
}

/// Control drive at which a resonant pump photon is converted into a signal
/// pair with unit probability:
/// `Ω_2ph² = (γ_s²/4) [Γ_s(0) − (Γ_p − γ*)] / (Γ_p − γ*)`.
///
/// The drive value in `params` is ignored.
pub fn omega_2ph(params: &SystemParams) -> Result<f64> {
    let net = gamma_p_purcell(params) - params.gamma_star;
    let gs0 = gamma_s_at(params, 0.0);
    if net <= 0.0 {
        return Err(Error::NoDownConversionPoint("requires Γ_p > γ*"));
    }
    // equality up to round-off still has the (zero) solution
    if gs0 < net * (1.0 - 1e-12) {
        return Err(Error::NoDownConversionPoint("requires Γ_s(0) ≥ Γ_p − γ*"));
    }
    Ok(0.5 * params.gamma_s * ((gs0 - net).max(0.0) / net).sqrt())
}

/// Lorentzian approximation of the pump reflection coefficient,
/// `|1 − 2Γ_p / (Γ_p + γ* + Γ_s − 2ik)|²`.
pub fn lorentzian_reflection(params: &SystemParams, k: f64) -> f64 {
    let m = purcell_rates(params);
    let num_re = m.gamma_s_purcell + params.gamma_star - m.gamma_p_purcell;
    let den_re = m.gamma_eff;
    (num_re * num_re + 4.0 * k * k) / (den_re * den_re + 4.0 * k * k)
}

/// Steady-state emitter and signal populations of the effective two-level
/// model: `n_e = 4Ω_eff²/(γ_eff² + 8Ω_eff²)`, `n_s = 2 (Γ_s/γ_s) n_e`.
pub fn effective_populations(params: &SystemParams) -> EffectivePopulations {
    warn_outside_bad_cavity(params, "effective_populations");
    let m = purcell_rates(params);
    let w2 = m.omega_eff * m.omega_eff;
    let den = m.gamma_eff * m.gamma_eff + 8.0 * w2;
    let n_e = if den > 0.0 { 4.0 * w2 / den } else { 0.0 };
    EffectivePopulations { n_e, n_s: 2.0 * m.gamma_s_purcell / params.gamma_s * n_e }
}

/// Unnormalized approximate two-photon probability at intra-pair separation
/// `r` for resonant injection:
/// `|2Ω_s e^{−(γ_s−Γ_s)r/2} + γ_s e^{−Γ_s r/2} sin[Ω_s(1 + Γ_s/2γ_s) r]|²`.
pub fn psi_2ph_approx(params: &SystemParams, r: f64) -> f64 {
    let om = params.omega_s_drive;
    let gs = params.gamma_s;
    let g = gamma_s_at(params, om);
    let a = 2.0 * om * (-(gs - g) * r / 2.0).exp() + gs * (-g * r / 2.0).exp() * (om * (1.0 + g / (2.0 * gs)) * r).sin();
    a * a
}

/// First local maximum of [`psi_2ph_approx`] in `r > 0`.
fn first_maximum_approx(params: &SystemParams) -> f64 {
    let om = params.omega_s_drive;
    if om <= 0.0 {
        return f64::INFINITY;
    }
    let f = |r: f64| psi_2ph_approx(params, r);
    let span = 2.0 * std::f64::consts::PI / om;
    let n = 4000;
    let h = span / n as f64;
    let mut best = 0;
    for i in 1..n {
        let (a, b, c) = (f((i - 1) as f64 * h), f(i as f64 * h), f((i + 1) as f64 * h));
        if b >= a && b >= c {
            best = i;
            break;
        }
    }
    if best == 0 {
        return 0.0;
    }
    // golden-section refinement inside the bracketing cell pair
    let (mut lo, mut hi) = ((best - 1) as f64 * h, (best + 1) as f64 * h);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = hi - phi * (hi - lo);
        let x2 = lo + phi * (hi - lo);
        if f(x1) < f(x2) {
            lo = x1;
        } else {
            hi = x2;
        }
    }
    0.5 * (lo + hi)
}

/// Reloading rate `τ_A⁻¹`.
///
/// Uses `2 [2(γ_s−γ*)g_s²/(4Ω_s² + (γ*−γ_s)²) + 2g_p²/(γ_p−γ*) + γ*/2]`,
/// which equals `Γ_p + Γ_s(Ω_s)` at γ* = 0 and tends to
/// `Γ_p + Γ_s + γ*` for γ* ≪ γ_j. For γ* ≥ γ_p the pump term is singular and
/// the sum `Γ_p + Γ_s + γ*` is returned instead.
pub fn reloading_rate(params: &SystemParams) -> f64 {
    let p = params;
    let gst = p.gamma_star;
    if gst >= p.gamma_p {
        return purcell_rates(p).gamma_eff;
    }
    let ds = p.gamma_s - gst;
    let s = 2.0 * ds * p.g_s * p.g_s / (4.0 * p.omega_s_drive * p.omega_s_drive + ds * ds);
    let pump = 2.0 * p.g_p * p.g_p / (p.gamma_p - gst);
    2.0 * (s + pump + gst / 2.0)
}

pub fn timescales(params: &SystemParams) -> Timescales {
    Timescales {
        tau_a: 1.0 / reloading_rate(params),
        tau_b: 1.0 / params.gamma_s,
        tau_in: first_maximum_approx(params),
    }
}
