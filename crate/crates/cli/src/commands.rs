//! The data-producing subcommands. Every function returns tables in the
//! configured unit; rates are multiplied and times divided by γ_s on output.

use pairsource::analytic;
use pairsource::circuit::{self, RwaReport};
use pairsource::criterion::{classify_regime_with_band, evaluate_master_equation, CriterionConfig, PairSourceVerdict};
use pairsource::lindblad::{linspace, MasterEquation, SteadyObservables};
use pairsource::scattering::Scatterer;
use pairsource::SystemParams;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{param_mut, Config, ValidSweep};
use crate::output::{Cell, Output, Table};
use crate::CliError;

/// Steady-state observable columns a sweep can report.
pub const OBSERVABLES: [&str; 7] = ["n_p", "n_s", "n_e", "n_p_out", "g2_p0", "g2_s0", "g2_pairs0"];

#[derive(Clone, Debug)]
struct PointResult {
    observables: Option<SteadyObservables>,
    verdict: Option<PairSourceVerdict>,
    status: String,
}

fn evaluate_point(base: &SystemParams, sweep: &ValidSweep, values: &[f64]) -> PointResult {
    let mut p = *base;
    for ((name, _), &v) in sweep.axes.iter().zip(values) {
        *param_mut(&mut p, name).expect("validated name") = v;
    }
    let me = match p.validate().and_then(|_| MasterEquation::with_truncation(p, sweep.truncation)) {
        Ok(me) => me,
        Err(e) => return PointResult { observables: None, verdict: None, status: format!("error: {e}") },
    };
    let observables = Some(me.observables());
    if !sweep.verdict {
        return PointResult { observables, verdict: None, status: "ok".into() };
    }
    let config = CriterionConfig { band: sweep.band, ..CriterionConfig::default() };
    match evaluate_master_equation(&me, &config) {
        Ok(v) => PointResult { observables, verdict: Some(v), status: "ok".into() },
        Err(e) => PointResult { observables, verdict: None, status: format!("verdict error: {e}") },
    }
}

pub fn sweep(cfg: &Config, jobs: usize) -> Result<Output, CliError> {
    let base = cfg.system_params()?;
    let sweep = cfg.sweep()?;
    let units = cfg.units()?;
    let points = sweep.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    log::info!("sweeping {} points on {jobs} workers", points.len());
    let results: Vec<PointResult> = pool.install(|| {
        points
            .par_iter()
            .map(|values| {
                let r = evaluate_point(&base, &sweep, values);
                log::info!("{values:?}: {}", r.status);
                r
            })
            .collect()
    });

    let selected: Vec<&str> = match &sweep.observables {
        Some(list) => OBSERVABLES.iter().copied().filter(|o| list.iter().any(|l| l == o)).collect(),
        None => OBSERVABLES.to_vec(),
    };
    let mut columns: Vec<&str> = sweep.axes.iter().map(|(n, _)| n.as_str()).collect();
    columns.extend(&selected);
    columns.push("regime");
    if sweep.verdict {
        columns.extend(["pair_source", "tau_a", "tau_b"]);
    }
    columns.push("status");

    let mut table = Table::new("sweep", &columns);
    let mut failures = 0;
    for (values, r) in points.iter().zip(&results) {
        let mut row: Vec<Cell> = values.iter().map(|&v| Cell::Num(units.rate_out(v))).collect();
        let obs = r.observables.map(|o| o.as_array());
        for name in &selected {
            let v = obs.and_then(|o| o.iter().find(|(n, _)| n == name).map(|(_, v)| *v));
            row.push(v.map_or(Cell::Empty, Cell::Num));
        }
        row.push(
            r.observables
                .map_or(Cell::Empty, |o| Cell::from(classify_regime_with_band(o.g2_p0, sweep.band).color())),
        );
        if sweep.verdict {
            match &r.verdict {
                Some(v) => row.extend([
                    Cell::Bool(v.is_pair_source),
                    Cell::Num(units.time_out(v.measured.tau_a)),
                    Cell::Num(units.time_out(v.measured.tau_b)),
                ]),
                None => row.extend([Cell::Empty, Cell::Empty, Cell::Empty]),
            }
        }
        if r.status != "ok" {
            failures += 1;
        }
        row.push(Cell::from(r.status.clone()));
        table.push(row);
    }
    if failures > 0 {
        log::warn!("{failures} of {} sweep points reported errors; see the status column", points.len());
    }
    Ok(Output { tables: vec![table], json: None })
}

pub fn correlate(cfg: &Config) -> Result<Output, CliError> {
    let base = cfg.system_params()?;
    let units = cfg.units()?;
    let (tau, truncation) = cfg.correlate()?;
    let me = MasterEquation::with_truncation(base, truncation)?;
    let g2 = me.correlator_g2(&tau)?;
    let pairs = me.correlator_g2_pairs(&tau)?;
    let mut table = Table::new("correlate", &["tau", "G2", "g2", "G2_pairs", "g2_pairs"]);
    for i in 0..tau.len() {
        table.push(vec![
            Cell::Num(units.time_out(tau[i])),
            Cell::Num(g2.raw.values[i]),
            Cell::Num(g2.normalized.values[i]),
            Cell::Num(pairs.raw.values[i]),
            Cell::Num(pairs.normalized.values[i]),
        ]);
    }
    Ok(Output { tables: vec![table], json: None })
}

pub fn scatter(cfg: &Config) -> Result<Output, CliError> {
    let base = cfg.system_params()?;
    let units = cfg.units()?;
    let s = cfg.scatter()?;
    let scatterer = Scatterer::new(&base)?;

    let span = s.k_span.unwrap_or_else(|| 5.0 * analytic::purcell_rates(&base).gamma_eff);
    let mut spectrum = Table::new("spectrum", &["k", "R_p", "R_p_lorentzian"]);
    for k in linspace(-span, span, s.k_points) {
        spectrum.push(vec![
            Cell::Num(units.rate_out(k)),
            Cell::Num(scatterer.reflection_coefficient(k)?),
            Cell::Num(analytic::lorentzian_reflection(&base, k)),
        ]);
    }

    let r = linspace(0.0, s.r_max, s.r_points);
    let series = scatterer.g2_equivalents(&r, s.k)?;
    let mut wave = Table::new("wavefunctions", &["r", "psi2_peak_normalized", "psi4_independent_normalized"]);
    for i in 0..r.len() {
        wave.push(vec![
            Cell::Num(units.time_out(r[i])),
            Cell::Num(series.psi2_peak_normalized[i]),
            Cell::Num(series.psi4_independent_normalized[i]),
        ]);
    }
    Ok(Output { tables: vec![spectrum, wave], json: None })
}

fn rwa_json(r: &RwaReport) -> serde_json::Value {
    json!({
        "rwa_margin": r.rwa_margin,
        "horizon": r.horizon,
        "step": r.step,
        "steps": r.steps,
        "max_infidelity": r.max_infidelity,
        "final_infidelity": r.final_infidelity,
        "max_ground_population": r.max_ground_population,
        "in_regime": r.in_regime,
    })
}

/// Circuit quantities stay in the configured unit: the mapping is linear in
/// every frequency, so no γ_s scaling applies.
pub fn circuit(cfg: &Config) -> Result<Output, CliError> {
    let (cp, section) = cfg.circuit()?;
    let spectrum = circuit::two_qubit_spectrum(cp.omega_t, cp.kappa)?;
    let closed = circuit::closed_form_energies(cp.omega_t, cp.kappa);
    let deviation = spectrum.max_energy_deviation(cp.omega_t, cp.kappa) / (cp.omega_t * (1.0 + cp.kappa * cp.kappa).sqrt());
    let eff = circuit::effective_parameters(&cp)?;
    let rwa = if section.rwa {
        let horizon = section.horizon.unwrap_or(10.0 / cp.g_1s);
        Some(circuit::rwa_validation(&cp, horizon)?)
    } else {
        None
    };

    let levels = ["g", "m1", "m2", "e"];
    let mut spec_table = Table::new("spectrum", &["level", "energy", "closed_form"]);
    for i in 0..4 {
        spec_table.push(vec![Cell::from(levels[i]), Cell::Num(spectrum.energies[i]), Cell::Num(closed[i])]);
    }
    let mut params = vec![
        ("omega_s_drive", eff.omega_s_drive),
        ("g_p", eff.g_p),
        ("g_s", eff.g_s),
        ("freq_l", eff.freq_l),
        ("freq_p", eff.freq_p),
        ("freq_s", eff.freq_s),
        ("rwa_margin", eff.rwa_margin),
        ("spectrum_relative_deviation", deviation),
    ];
    if let Some(r) = &rwa {
        params.extend([
            ("rwa_horizon", r.horizon),
            ("rwa_max_infidelity", r.max_infidelity),
            ("rwa_final_infidelity", r.final_infidelity),
            ("rwa_max_ground_population", r.max_ground_population),
        ]);
    }
    let mut param_table = Table::new("parameters", &["name", "value"]);
    for (n, v) in &params {
        param_table.push(vec![Cell::from(*n), Cell::Num(*v)]);
    }

    let body = json!({
        "spectrum": {
            "levels": levels,
            "energies": spectrum.energies,
            "closed_form": closed,
            "relative_deviation": deviation,
        },
        "effective": {
            "omega_s_drive": eff.omega_s_drive,
            "g_p": eff.g_p,
            "g_s": eff.g_s,
            "freq_l": eff.freq_l,
            "freq_p": eff.freq_p,
            "freq_s": eff.freq_s,
            "rwa_margin": eff.rwa_margin,
            "rwa_warning": eff.rwa_margin > circuit::RWA_WARN_MARGIN,
        },
        "rwa": rwa.as_ref().map(rwa_json),
    });
    Ok(Output { tables: vec![spec_table, param_table], json: Some(body) })
}
