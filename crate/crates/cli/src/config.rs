//! TOML run configuration.
//!
//! Rates and frequencies are read in `unit` (default: multiples of γ_s) and
//! converted to internal units of γ_s by dividing by `params.gamma_s`. Times
//! are read in the inverse unit. Omitted parameters take the reference
//! operating point, expressed in multiples of γ_s; an omitted control drive is
//! set to the deterministic down-conversion point Ω_2ph when one exists.

use std::path::{Path, PathBuf};

use pairsource::circuit::CircuitParams;
use pairsource::lindblad::DEFAULT_TRUNCATION;
use pairsource::SystemParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
pub enum Unit {
    #[default]
    #[serde(rename = "gamma_s")]
    GammaS,
    #[serde(rename = "MHz")]
    MHz,
    #[serde(rename = "GHz")]
    GHz,
}

impl Unit {
    pub fn label(self) -> &'static str {
        match self {
            Unit::GammaS => "gamma_s",
            Unit::MHz => "MHz",
            Unit::GHz => "GHz",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub g_p: Option<f64>,
    pub g_s: Option<f64>,
    pub omega_s_drive: Option<f64>,
    pub omega_p_drive: Option<f64>,
    pub gamma_p: Option<f64>,
    pub gamma_s: Option<f64>,
    pub gamma_star: Option<f64>,
    pub k0: Option<f64>,
}

/// One swept parameter.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: String,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: Scale,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub axis: Vec<Axis>,
    pub truncation: Option<[u32; 2]>,
    /// Evaluate the pair-source verdict at every point (long-time correlators).
    #[serde(default = "yes")]
    pub verdict: bool,
    pub band: Option<f64>,
    /// Subset of observable columns; all when omitted.
    pub observables: Option<Vec<String>>,
}

fn yes() -> bool {
    true
}

impl Default for SweepSection {
    /// 61 log-spaced control drives over `[10⁻³, 10²] γ_s`.
    fn default() -> Self {
        Self {
            axis: vec![Axis {
                param: "omega_s_drive".into(),
                start: 1e-3,
                stop: 1e2,
                points: 61,
                scale: Scale::Log,
            }],
            truncation: None,
            verdict: true,
            band: None,
            observables: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelateSection {
    #[serde(default = "default_tau_max")]
    pub tau_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    pub truncation: Option<[u32; 2]>,
}

fn default_tau_max() -> f64 {
    20.0
}

fn default_points() -> usize {
    401
}

impl Default for CorrelateSection {
    fn default() -> Self {
        Self { tau_max: default_tau_max(), points: default_points(), truncation: None }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterSection {
    /// Half-width of the reflection spectrum; defaults to 5 (Γ_p + Γ_s + γ*).
    pub k_span: Option<f64>,
    #[serde(default = "default_points")]
    pub k_points: usize,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_points")]
    pub r_points: usize,
    /// Injection momentum of the wavefunction grids.
    #[serde(default)]
    pub k: f64,
}

fn default_r_max() -> f64 {
    10.0
}

impl Default for ScatterSection {
    fn default() -> Self {
        Self { k_span: None, k_points: default_points(), r_max: default_r_max(), r_points: default_points(), k: 0.0 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    pub omega_t: f64,
    pub kappa: f64,
    pub g_1l: f64,
    pub g_2p: f64,
    pub g_1s: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    /// RWA comparison horizon; defaults to 10/g_1s.
    pub horizon: Option<f64>,
    #[serde(default = "yes")]
    pub rwa: bool,
}

fn one() -> f64 {
    1.0
}

impl Default for CircuitSection {
    /// Every effective coupling 0.01 at ω_t = 5, κ = 0.1 (RWA margin 0.01).
    fn default() -> Self {
        Self {
            omega_t: 5.0,
            kappa: 0.1,
            g_1l: 0.01,
            g_2p: 0.1,
            g_1s: 0.01 * std::f64::consts::SQRT_2,
            alpha: 1.0,
            horizon: None,
            rwa: true,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub unit: Unit,
    #[serde(default)]
    pub params: ParamsSection,
    pub sweep: Option<SweepSection>,
    pub correlate: Option<CorrelateSection>,
    pub scatter: Option<ScatterSection>,
    pub circuit: Option<CircuitSection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// A parsed configuration together with the bytes it was read from.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: Config,
    pub source: Vec<u8>,
}

impl LoadedConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let source = match path {
            Some(p) => std::fs::read(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?,
            None => Vec::new(),
        };
        let text = std::str::from_utf8(&source).map_err(|e| CliError::Config(format!("config is not UTF-8: {e}")))?;
        let config: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self { config, source })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config = toml::from_str(text).map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        Ok(Self { config, source: text.as_bytes().to_vec() })
    }
}

/// Conversion between configuration units and internal units of γ_s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Units {
    pub unit: Unit,
    /// γ_s expressed in `unit`.
    pub gamma_s: f64,
}

impl Units {
    pub fn rate_in(&self, v: f64) -> f64 {
        v / self.gamma_s
    }

    pub fn rate_out(&self, v: f64) -> f64 {
        v * self.gamma_s
    }

    pub fn time_in(&self, t: f64) -> f64 {
        t * self.gamma_s
    }

    pub fn time_out(&self, t: f64) -> f64 {
        t / self.gamma_s
    }
}

pub const PARAM_NAMES: [&str; 8] =
    ["g_p", "g_s", "omega_s_drive", "omega_p_drive", "gamma_p", "gamma_s", "gamma_star", "k0"];

pub fn param_mut<'a>(p: &'a mut SystemParams, name: &str) -> Option<&'a mut f64> {
    Some(match name {
        "g_p" => &mut p.g_p,
        "g_s" => &mut p.g_s,
        "omega_s_drive" => &mut p.omega_s_drive,
        "omega_p_drive" => &mut p.omega_p_drive,
        "gamma_p" => &mut p.gamma_p,
        "gamma_s" => &mut p.gamma_s,
        "gamma_star" => &mut p.gamma_star,
        "k0" => &mut p.k0,
        _ => return None,
    })
}

fn check_truncation(t: Option<[u32; 2]>) -> Result<(u32, u32), CliError> {
    match t {
        None => Ok(DEFAULT_TRUNCATION),
        Some([np, ns]) if np >= 1 && ns >= 4 => Ok((np, ns)),
        Some(_) => Err(CliError::Config("truncation needs n_p >= 1 and n_s >= 4".into())),
    }
}

fn finite_positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite")))
    }
}

impl Config {
    pub fn units(&self) -> Result<Units, CliError> {
        match (self.unit, self.params.gamma_s) {
            (Unit::GammaS, None) => Ok(Units { unit: Unit::GammaS, gamma_s: 1.0 }),
            (Unit::GammaS, Some(g)) if g == 1.0 => Ok(Units { unit: Unit::GammaS, gamma_s: 1.0 }),
            (Unit::GammaS, Some(_)) => {
                Err(CliError::Config("gamma_s must be 1 when rates are given in units of gamma_s".into()))
            }
            (u, Some(g)) => {
                finite_positive("gamma_s", g)?;
                Ok(Units { unit: u, gamma_s: g })
            }
            (u, None) => Err(CliError::Config(format!("gamma_s is required when unit = \"{}\"", u.label()))),
        }
    }

    /// Base parameters in internal units.
    pub fn system_params(&self) -> Result<SystemParams, CliError> {
        let u = self.units()?;
        let mut p = SystemParams::reference();
        let s = &self.params;
        for (name, v) in [
            ("g_p", s.g_p),
            ("g_s", s.g_s),
            ("omega_s_drive", s.omega_s_drive),
            ("omega_p_drive", s.omega_p_drive),
            ("gamma_p", s.gamma_p),
            ("gamma_s", s.gamma_s),
            ("gamma_star", s.gamma_star),
            ("k0", s.k0),
        ] {
            if let Some(v) = v {
                *param_mut(&mut p, name).expect("known name") = u.rate_in(v);
            }
        }
        p.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if s.omega_s_drive.is_none() {
            if let Ok(w) = pairsource::analytic::omega_2ph(&p) {
                p.omega_s_drive = w;
            }
        }
        Ok(p)
    }

    pub fn sweep(&self) -> Result<ValidSweep, CliError> {
        let s = self.sweep.clone().unwrap_or_default();
        if s.axis.is_empty() {
            return Err(CliError::Config("sweep needs at least one [[sweep.axis]]".into()));
        }
        let u = self.units()?;
        let mut axes = Vec::new();
        for a in &s.axis {
            if !PARAM_NAMES.contains(&a.param.as_str()) {
                return Err(CliError::Config(format!("unknown sweep parameter {:?}", a.param)));
            }
            if axes.iter().any(|(n, _): &(String, Vec<f64>)| *n == a.param) {
                return Err(CliError::Config(format!("parameter {:?} swept twice", a.param)));
            }
            if a.points == 0 {
                return Err(CliError::Config(format!("sweep of {} has an empty range", a.param)));
            }
            if !(a.start.is_finite() && a.stop.is_finite()) {
                return Err(CliError::Config(format!("sweep of {} has a non-finite endpoint", a.param)));
            }
            let values = match a.scale {
                Scale::Linear => pairsource::lindblad::linspace(a.start, a.stop, a.points),
                Scale::Log => {
                    if a.start <= 0.0 || a.stop <= 0.0 {
                        return Err(CliError::Config(format!("log sweep of {} needs positive endpoints", a.param)));
                    }
                    pairsource::measure::logspace(a.start, a.stop, a.points)
                }
            };
            axes.push((a.param.clone(), values.into_iter().map(|v| u.rate_in(v)).collect()));
        }
        let band = s.band.unwrap_or(pairsource::criterion::CriterionConfig::default().band);
        finite_positive("band", band)?;
        if let Some(obs) = &s.observables {
            for o in obs {
                if !crate::commands::OBSERVABLES.contains(&o.as_str()) {
                    return Err(CliError::Config(format!("unknown observable {o:?}")));
                }
            }
        }
        Ok(ValidSweep {
            axes,
            truncation: check_truncation(s.truncation)?,
            verdict: s.verdict,
            band,
            observables: s.observables.clone(),
        })
    }

    pub fn correlate(&self) -> Result<(Vec<f64>, (u32, u32)), CliError> {
        let c = self.correlate.clone().unwrap_or_default();
        let u = self.units()?;
        finite_positive("tau_max", c.tau_max)?;
        if c.points < 2 {
            return Err(CliError::Config("correlate needs at least 2 points".into()));
        }
        let tau = pairsource::lindblad::linspace(0.0, u.time_in(c.tau_max), c.points);
        Ok((tau, check_truncation(c.truncation)?))
    }

    pub fn scatter(&self) -> Result<ScatterSection, CliError> {
        let mut s = self.scatter.clone().unwrap_or_default();
        let u = self.units()?;
        if let Some(span) = s.k_span {
            finite_positive("k_span", span)?;
            s.k_span = Some(u.rate_in(span));
        }
        finite_positive("r_max", s.r_max)?;
        if s.k_points < 2 || s.r_points < 2 {
            return Err(CliError::Config("scatter grids need at least 2 points".into()));
        }
        if !s.k.is_finite() {
            return Err(CliError::Config("k must be finite".into()));
        }
        s.r_max = u.time_in(s.r_max);
        s.k = u.rate_in(s.k);
        Ok(s)
    }

    /// Circuit parameters stay in the configured unit; the mapping is
    /// scale-free.
    pub fn circuit(&self) -> Result<(CircuitParams, CircuitSection), CliError> {
        let c = self.circuit.clone().unwrap_or_default();
        let cp = CircuitParams {
            omega_t: c.omega_t,
            kappa: c.kappa,
            g_1l: c.g_1l,
            g_2p: c.g_2p,
            g_1s: c.g_1s,
            alpha: c.alpha,
        };
        cp.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(h) = c.horizon {
            finite_positive("horizon", h)?;
        } else if c.rwa && c.g_1s == 0.0 {
            return Err(CliError::Config("horizon is required when g_1s = 0".into()));
        }
        Ok((cp, c))
    }
}

/// A validated sweep in internal units.
#[derive(Clone, Debug)]
pub struct ValidSweep {
    pub axes: Vec<(String, Vec<f64>)>,
    pub truncation: (u32, u32),
    pub verdict: bool,
    pub band: f64,
    pub observables: Option<Vec<String>>,
}

impl ValidSweep {
    /// Grid points in row order, first axis outermost.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![]];
        for (_, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_reference_point_at_omega_2ph() {
        let c = LoadedConfig::parse("").unwrap().config;
        let r = SystemParams::reference();
        assert_eq!(c.system_params().unwrap(), r.with_omega_s(pairsource::analytic::omega_2ph(&r).unwrap()));
        let s = c.sweep().unwrap();
        assert_eq!(s.points().len(), 61);
        assert!((s.axes[0].1[0] - 1e-3).abs() < 1e-15 && (s.axes[0].1[60] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn physical_units_are_scaled_by_gamma_s() {
        let c = LoadedConfig::parse("unit = \"MHz\"\n[params]\ngamma_s = 10.0\ngamma_p = 200.0\ng_s = 1.0\n")
            .unwrap()
            .config;
        let p = c.system_params().unwrap();
        assert_eq!((p.gamma_s, p.gamma_p, p.g_s), (1.0, 20.0, 0.1));
        let u = c.units().unwrap();
        assert_eq!(u.rate_out(2.0), 20.0);
        assert_eq!(u.time_out(5.0), 0.5);
        let missing = LoadedConfig::parse("unit = \"GHz\"\n").unwrap().config;
        assert!(matches!(missing.units(), Err(CliError::Config(_))));
    }

    #[test]
    fn rejects_bad_sweeps() {
        for text in [
            "[sweep]\n[[sweep.axis]]\nparam = \"omega_s_drive\"\nstart = 1.0\nstop = 2.0\npoints = 0\n",
            "[sweep]\n[[sweep.axis]]\nparam = \"omega_s_drive\"\nstart = 0.0\nstop = 2.0\npoints = 5\nscale = \"log\"\n",
            "[sweep]\n[[sweep.axis]]\nparam = \"nope\"\nstart = 1.0\nstop = 2.0\npoints = 5\n",
            "[sweep]\naxis = []\n",
        ] {
            let c = LoadedConfig::parse(text).unwrap().config;
            assert!(matches!(c.sweep(), Err(CliError::Config(_))), "{text}");
        }
        assert!(LoadedConfig::parse("[params]\nbogus = 1\n").is_err());
    }

    #[test]
    fn grid_order_is_first_axis_outermost() {
        let text = "[sweep]\n[[sweep.axis]]\nparam = \"omega_s_drive\"\nstart = 1.0\nstop = 2.0\npoints = 2\n\
                    [[sweep.axis]]\nparam = \"gamma_star\"\nstart = 0.0\nstop = 0.5\npoints = 3\n";
        let s = LoadedConfig::parse(text).unwrap().config.sweep().unwrap();
        let pts = s.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], vec![1.0, 0.0]);
        assert_eq!(pts[2], vec![1.0, 0.5]);
        assert_eq!(pts[3], vec![2.0, 0.0]);
    }
}
