//! Two coupled qubits and three LC resonators mapped onto the four-level
//! emitter.
//!
//! The qubit pair `H = (ω_t/2)(σz⁽¹⁾ + σz⁽²⁾) + ω_t κ σx⁽¹⁾σx⁽²⁾` has the
//! eigenstates `g < m1 < m2 < e` with energies `∓ω_t√(1+κ²)` and `∓ω_t κ`.
//! Qubit product states are indexed `|q1 q2⟩ → 2 q1 + q2`, with `|1⟩` the
//! `σz = +1` state.

use std::f64::consts::{PI, SQRT_2};

use faer::{c64, Mat, Side};

use crate::linalg::{expm, I, ONE, ZERO};
use crate::{Error, Result, SystemParams};

/// Above this RWA margin a warning is logged.
pub const RWA_WARN_MARGIN: f64 = 0.1;
/// At or above this margin an RWA comparison is labeled out of regime.
pub const RWA_REGIME_LIMIT: f64 = 0.5;
/// Photon cutoff of both resonators in [`rwa_validation`].
pub const RWA_PHOTON_CUTOFF: usize = 1;
/// Lab-frame time steps per unit of `1/ω_p`.
pub const STEPS_PER_PUMP_PERIOD: f64 = 50.0;

/// Hardware parameters of the circuit. `alpha` is the (real) coherent
/// amplitude of the strongly driven control resonator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircuitParams {
    pub omega_t: f64,
    pub kappa: f64,
    pub g_1l: f64,
    pub g_2p: f64,
    pub g_1s: f64,
    pub alpha: f64,
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.omega_t, self.kappa, self.g_1l, self.g_2p, self.g_1s, self.alpha];
        if !all.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParams("non-finite circuit parameter".into()));
        }
        if self.omega_t <= 0.0 {
            return Err(Error::InvalidParams("omega_t must be positive".into()));
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvalidParams("kappa must be positive".into()));
        }
        Ok(())
    }
}

/// Pauli `σz` on qubit 1 or 2.
pub fn sigma_z(qubit: usize) -> Mat<c64> {
    assert!(qubit == 1 || qubit == 2);
    Mat::from_fn(4, 4, |i, j| {
        if i != j {
            return ZERO;
        }
        let bit = if qubit == 1 { i >> 1 } else { i & 1 };
        if bit == 1 {
            ONE
        } else {
            -ONE
        }
    })
}

/// Pauli `σx` on qubit 1 or 2.
pub fn sigma_x(qubit: usize) -> Mat<c64> {
    assert!(qubit == 1 || qubit == 2);
    let flip = if qubit == 1 { 2 } else { 1 };
    Mat::from_fn(4, 4, |i, j| if i ^ flip == j { ONE } else { ZERO })
}

pub fn two_qubit_hamiltonian(omega_t: f64, kappa: f64) -> Mat<c64> {
    let z = &sigma_z(1) + &sigma_z(2);
    let xx = sigma_x(1) * sigma_x(2);
    Mat::from_fn(4, 4, |i, j| z[(i, j)] * (0.5 * omega_t) + xx[(i, j)] * (omega_t * kappa))
}

/// `[E_g, E_1, E_2, E_e]`.
pub fn closed_form_energies(omega_t: f64, kappa: f64) -> [f64; 4] {
    let s = (1.0 + kappa * kappa).sqrt();
    [-omega_t * s, -omega_t * kappa, omega_t * kappa, omega_t * s]
}

/// Normalized eigenvectors `g, m1, m2, e` as columns in the qubit basis:
/// `m_{2,1} = (|10⟩ ± |01⟩)/√2`, and `e`, `g` the mixtures of `|11⟩` and
/// `|00⟩` with positive `|11⟩` and `|00⟩` weight respectively.
pub fn closed_form_vectors(kappa: f64) -> Mat<c64> {
    let t = kappa / (1.0 + (1.0 + kappa * kappa).sqrt());
    let n = (1.0 + t * t).sqrt();
    let h = 1.0 / SQRT_2;
    let cols: [[f64; 4]; 4] = [
        [1.0 / n, 0.0, 0.0, -t / n],
        [0.0, -h, h, 0.0],
        [0.0, h, h, 0.0],
        [t / n, 0.0, 0.0, 1.0 / n],
    ];
    Mat::from_fn(4, 4, |i, j| c64::new(cols[j][i], 0.0))
}

#[derive(Clone, Debug)]
pub struct TwoQubitSpectrum {
    /// `[E_g, E_1, E_2, E_e]`.
    pub energies: [f64; 4],
    /// Eigenvectors as columns in the order of `energies`, phase-aligned with
    /// [`closed_form_vectors`].
    pub vectors: Mat<c64>,
}

impl TwoQubitSpectrum {
    /// Matrix elements `⟨i|op|j⟩` in the eigenbasis `g, m1, m2, e`.
    pub fn transform(&self, op: &Mat<c64>) -> Mat<c64> {
        self.vectors.adjoint() * op * &self.vectors
    }

    pub fn max_energy_deviation(&self, omega_t: f64, kappa: f64) -> f64 {
        let want = closed_form_energies(omega_t, kappa);
        self.energies.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Numerical eigendecomposition of the qubit pair. Degenerate eigenvalues
/// (only at `κ = 0`) are resolved by projecting the closed-form vectors onto
/// the degenerate subspace.
pub fn two_qubit_spectrum(omega_t: f64, kappa: f64) -> Result<TwoQubitSpectrum> {
    if !(omega_t.is_finite() && kappa.is_finite() && omega_t > 0.0 && kappa >= 0.0) {
        return Err(Error::InvalidParams("two-qubit spectrum needs omega_t > 0 and kappa >= 0".into()));
    }
    let h = two_qubit_hamiltonian(omega_t, kappa);
    let evd = h.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Singular(format!("two-qubit eigensolve: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let energies = [s[0].re, s[1].re, s[2].re, s[3].re];
    let reference = closed_form_vectors(kappa);
    let mut vectors = Mat::<c64>::zeros(4, 4);
    let cluster_tol = 1e-9 * omega_t;
    for j in 0..4 {
        // projector onto the eigenspace of energies[j]
        let members: Vec<usize> = (0..4).filter(|&k| (energies[k] - energies[j]).abs() <= cluster_tol).collect();
        let mut w = vec![ZERO; 4];
        for &k in &members {
            let overlap: c64 = (0..4).map(|i| u[(i, k)].conj() * reference[(i, j)]).sum();
            for (i, wi) in w.iter_mut().enumerate() {
                *wi += u[(i, k)] * overlap;
            }
        }
        for prev in 0..j {
            let c: c64 = (0..4).map(|i| vectors[(i, prev)].conj() * w[i]).sum();
            for (i, wi) in w.iter_mut().enumerate() {
                *wi -= vectors[(i, prev)] * c;
            }
        }
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            return Err(Error::Singular("eigenvector alignment lost a direction".into()));
        }
        for (i, wi) in w.iter().enumerate() {
            vectors[(i, j)] = wi / norm;
        }
    }
    Ok(TwoQubitSpectrum { energies, vectors })
}

fn from_entries(entries: &[(usize, usize, f64)]) -> Mat<c64> {
    let mut m = Mat::<c64>::zeros(4, 4);
    for &(i, j, v) in entries {
        m[(i, j)] += c64::new(v, 0.0);
        if i != j {
            m[(j, i)] += c64::new(v, 0.0);
        }
    }
    m
}

// eigenbasis indices
const G: usize = 0;
const M1: usize = 1;
const M2: usize = 2;
const E: usize = 3;

/// First-order (in κ) form of `σz⁽¹⁾` in the eigenbasis:
/// `|e⟩⟨e| − |g⟩⟨g| − κ|g⟩⟨e| + |m1⟩⟨m2| + H.c.`
pub fn simplified_sigma_z1(kappa: f64) -> Mat<c64> {
    from_entries(&[(E, E, 1.0), (G, G, -1.0), (G, E, -kappa), (M1, M2, 1.0)])
}

/// First-order form of `σz⁽²⁾`: as `σz⁽¹⁾` with the `m1`–`m2` sign flipped.
pub fn simplified_sigma_z2(kappa: f64) -> Mat<c64> {
    from_entries(&[(E, E, 1.0), (G, G, -1.0), (G, E, -kappa), (M1, M2, -1.0)])
}

/// `√2 σx⁽¹⁾ = |m2⟩⟨e| − |m1⟩⟨e| + |g⟩⟨m2| + |g⟩⟨m1| + H.c.`
pub fn simplified_sqrt2_sigma_x1() -> Mat<c64> {
    from_entries(&[(M2, E, 1.0), (M1, E, -1.0), (G, M2, 1.0), (G, M1, 1.0)])
}

/// Couplings and resonator frequencies that realize the emitter model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveParameters {
    /// Control Rabi frequency `Ω_s = g_1L α`.
    pub omega_s_drive: f64,
    /// Signed pump coupling `g_p = −g_2p κ`.
    pub g_p: f64,
    pub g_s: f64,
    /// Control resonator frequency `ω_L = E_2 − E_1`.
    pub freq_l: f64,
    /// Pump resonator frequency `ω_p = E_e − E_g`.
    pub freq_p: f64,
    /// Signal resonator frequency `ω_s = E_e − E_2 = E_1 − E_g`.
    pub freq_s: f64,
    /// Largest coupling over the smallest qubit splitting `2ω_t κ`.
    pub rwa_margin: f64,
}

impl EffectiveParameters {
    /// Overrides the couplings and control drive of `base`. Only `|g_p|`
    /// is physical: its sign is absorbed by the phase of `|e⟩`.
    pub fn to_system_params(&self, base: &SystemParams) -> SystemParams {
        SystemParams { g_p: self.g_p.abs(), g_s: self.g_s.abs(), omega_s_drive: self.omega_s_drive.abs(), ..*base }
    }
}

pub fn effective_parameters(cp: &CircuitParams) -> Result<EffectiveParameters> {
    cp.validate()?;
    let s = (1.0 + cp.kappa * cp.kappa).sqrt();
    let omega_s_drive = cp.g_1l * cp.alpha;
    let g_p = -cp.g_2p * cp.kappa;
    let g_s = cp.g_1s / SQRT_2;
    let splitting = 2.0 * cp.omega_t * cp.kappa;
    let rwa_margin = omega_s_drive.abs().max(g_p.abs()).max(g_s.abs()) / splitting;
    if rwa_margin > RWA_WARN_MARGIN {
        log::warn!("rotating-wave margin {rwa_margin:.3} exceeds {RWA_WARN_MARGIN}");
    }
    Ok(EffectiveParameters {
        omega_s_drive,
        g_p,
        g_s,
        freq_l: splitting,
        freq_p: 2.0 * cp.omega_t * s,
        freq_s: cp.omega_t * (s - cp.kappa),
        rwa_margin,
    })
}

/// Outcome of comparing full and rotating-wave dynamics from `|0,0,e⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct RwaReport {
    pub rwa_margin: f64,
    /// Simulated time, the requested horizon rounded up to whole steps.
    pub horizon: f64,
    pub step: f64,
    pub steps: usize,
    /// `1 − |⟨ψ_RWA|ψ_full⟩|²` maximized over the checkpoints.
    pub max_infidelity: f64,
    pub final_infidelity: f64,
    /// Largest population found in `g` (any photon numbers).
    pub max_ground_population: f64,
    /// False when the margin is at or above [`RWA_REGIME_LIMIT`].
    pub in_regime: bool,
}

/// Which coupling terms drive the lab-frame evolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CouplingTerms {
    /// Every term of the three coupling Hamiltonians.
    Full,
    /// Only the terms discarded by the rotating-wave approximation.
    CounterRotating,
}

/// Circuit Hamiltonian on `qubits ⊗ pump ⊗ signal` in the qubit eigenbasis.
/// Product index is `(n_p (N+1) + n_s) · 4 + level`.
struct LabModel {
    /// Bare energies, the diagonal of the free Hamiltonian.
    h0: Vec<f64>,
    /// Resonator couplings, split into resonant and non-resonant parts.
    static_resonant: Mat<c64>,
    static_rest: Mat<c64>,
    /// Control coupling multiplying `e^{−iω_L t}` and `e^{+iω_L t}`.
    drive_minus: (Mat<c64>, Mat<c64>),
    drive_plus: (Mat<c64>, Mat<c64>),
    freq_l: f64,
}

impl LabModel {
    fn new(cp: &CircuitParams, eff: &EffectiveParameters) -> Result<Self> {
        let spec = two_qubit_spectrum(cp.omega_t, cp.kappa)?;
        let z1 = spec.transform(&sigma_z(1));
        let z2 = spec.transform(&sigma_z(2));
        let x1 = spec.transform(&sigma_x(1));
        let nmax = RWA_PHOTON_CUTOFF;
        let levels = nmax + 1;
        let dim = 4 * levels * levels;
        let index = |np: usize, ns: usize, q: usize| (np * levels + ns) * 4 + q;
        let mut h0 = vec![0.0; dim];
        for np in 0..levels {
            for ns in 0..levels {
                for q in 0..4 {
                    h0[index(np, ns, q)] = spec.energies[q] + eff.freq_p * np as f64 + eff.freq_s * ns as f64;
                }
            }
        }
        let mut coupling = Mat::<c64>::zeros(dim, dim);
        let mut drive = Mat::<c64>::zeros(dim, dim);
        for np in 0..levels {
            for ns in 0..levels {
                for q in 0..4 {
                    for r in 0..4 {
                        let to = index(np, ns, q);
                        drive[(to, index(np, ns, r))] += z1[(q, r)] * (cp.g_1l * cp.alpha);
                        // (a + a†) on the pump and on the signal
                        for dn in [-1i64, 1] {
                            let mp = np as i64 + dn;
                            if (0..levels as i64).contains(&mp) {
                                let sq = ((np.max(mp as usize)) as f64).sqrt();
                                coupling[(to, index(mp as usize, ns, r))] += z2[(q, r)] * (cp.g_2p * sq);
                            }
                            let ms = ns as i64 + dn;
                            if (0..levels as i64).contains(&ms) {
                                let sq = ((ns.max(ms as usize)) as f64).sqrt();
                                coupling[(to, index(np, ms as usize, r))] += x1[(q, r)] * (cp.g_1s * sq);
                            }
                        }
                    }
                }
            }
        }
        // element (a, b) rotates as e^{i(h0_a − h0_b + shift) t} in the interaction picture
        let tol = 1e-9 * eff.freq_p.max(1.0);
        let split = |m: &Mat<c64>, shift: f64| {
            let mut res = Mat::<c64>::zeros(dim, dim);
            let mut rest = Mat::<c64>::zeros(dim, dim);
            for j in 0..dim {
                for i in 0..dim {
                    if (h0[i] - h0[j] + shift).abs() < tol {
                        res[(i, j)] = m[(i, j)];
                    } else {
                        rest[(i, j)] = m[(i, j)];
                    }
                }
            }
            (res, rest)
        };
        let (static_resonant, static_rest) = split(&coupling, 0.0);
        let drive_minus = split(&drive, -eff.freq_l);
        let drive_plus = split(&drive, eff.freq_l);
        Ok(Self { h0, static_resonant, static_rest, drive_minus, drive_plus, freq_l: eff.freq_l })
    }

    fn dim(&self) -> usize {
        self.h0.len()
    }

    fn lab_hamiltonian(&self, terms: CouplingTerms, t: f64) -> Mat<c64> {
        let n = self.dim();
        let em = c64::cis(-self.freq_l * t);
        let ep = c64::cis(self.freq_l * t);
        Mat::from_fn(n, n, |i, j| {
            let diag = if i == j { c64::new(self.h0[i], 0.0) } else { ZERO };
            let rest = self.static_rest[(i, j)] + em * self.drive_minus.1[(i, j)] + ep * self.drive_plus.1[(i, j)];
            match terms {
                CouplingTerms::CounterRotating => diag + rest,
                CouplingTerms::Full => {
                    diag + rest
                        + self.static_resonant[(i, j)]
                        + em * self.drive_minus.0[(i, j)]
                        + ep * self.drive_plus.0[(i, j)]
                }
            }
        })
    }

    /// Time-independent interaction-picture Hamiltonian of the kept terms.
    fn rwa_hamiltonian(&self) -> Mat<c64> {
        &self.static_resonant + &self.drive_minus.0 + &self.drive_plus.0
    }
}

fn apply(u: &Mat<c64>, v: &[c64], out: &mut [c64]) {
    let n = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..n).map(|j| u[(i, j)] * v[j]).sum();
    }
}

/// Compares lab-frame evolution under `terms` (mapped to the interaction
/// picture) with the rotating-wave Hamiltonian, over `horizon` from `|0,0,e⟩`.
///
/// The lab Hamiltonian is periodic in `2π/ω_L`, so the piecewise-constant
/// step propagators of one period are computed once and cycled.
pub fn rwa_comparison(cp: &CircuitParams, horizon: f64, terms: CouplingTerms) -> Result<RwaReport> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidParams("horizon must be finite and non-negative".into()));
    }
    let eff = effective_parameters(cp)?;
    let model = LabModel::new(cp, &eff)?;
    let n = model.dim();
    let period = 2.0 * PI / model.freq_l;
    let per_period = (period * STEPS_PER_PUMP_PERIOD * eff.freq_p).ceil().max(1.0) as usize;
    let dt = period / per_period as f64;
    let steps = (horizon / dt).ceil() as usize;
    let props: Vec<Mat<c64>> = (0..per_period.min(steps.max(1)))
        .map(|k| {
            let h = model.lab_hamiltonian(terms, (k as f64 + 0.5) * dt);
            expm(Mat::from_fn(n, n, |i, j| h[(i, j)] * (-I * dt)).as_ref())
        })
        .collect();

    let hr = model.rwa_hamiltonian();
    let evd = hr.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Singular(format!("RWA eigensolve: {e:?}")))?;
    let (ur, sr) = (evd.U(), evd.S().column_vector());
    let start = E; // |0,0,e⟩
    let rwa_state = |t: f64| -> Vec<c64> {
        // exp(−i H_R t) |start⟩
        (0..n)
            .map(|i| (0..n).map(|k| ur[(i, k)] * c64::cis(-sr[k].re * t) * ur[(start, k)].conj()).sum())
            .collect()
    };

    let mut psi = vec![ZERO; n];
    psi[start] = ONE;
    let mut next = vec![ZERO; n];
    let stride = (steps / 2000).max(1);
    let mut max_infidelity: f64 = 0.0;
    let mut final_infidelity = 0.0;
    let mut max_ground_population: f64 = 0.0;
    for step in 1..=steps {
        apply(&props[(step - 1) % props.len()], &psi, &mut next);
        std::mem::swap(&mut psi, &mut next);
        if step % stride == 0 || step == steps {
            let t = step as f64 * dt;
            let reference = rwa_state(t);
            let overlap: c64 =
                (0..n).map(|i| reference[i].conj() * c64::cis(model.h0[i] * t) * psi[i]).sum();
            let infidelity = (1.0 - overlap.norm_sqr()).max(0.0);
            max_infidelity = max_infidelity.max(infidelity);
            final_infidelity = infidelity;
            let ground: f64 = (0..n).filter(|i| i % 4 == G).map(|i| psi[i].norm_sqr()).sum();
            max_ground_population = max_ground_population.max(ground);
        }
    }
    Ok(RwaReport {
        rwa_margin: eff.rwa_margin,
        horizon: steps as f64 * dt,
        step: dt,
        steps,
        max_infidelity,
        final_infidelity,
        max_ground_population,
        in_regime: eff.rwa_margin < RWA_REGIME_LIMIT,
    })
}

/// [`rwa_comparison`] with every coupling term kept.
pub fn rwa_validation(cp: &CircuitParams, horizon: f64) -> Result<RwaReport> {
    rwa_comparison(cp, horizon, CouplingTerms::Full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::scattering::ScatterBlock;
    use crate::{BasisState, Level};
    use proptest::prelude::*;

    fn circuit(omega_t: f64, kappa: f64, g: f64) -> CircuitParams {
        // every effective coupling equal to g
        CircuitParams { omega_t, kappa, g_1l: g, g_2p: g / kappa, g_1s: g * SQRT_2, alpha: 1.0 }
    }

    #[test]
    fn uncoupled_qubits() {
        let s = two_qubit_spectrum(2.0, 0.0).unwrap();
        let want = [-2.0, 0.0, 0.0, 2.0];
        for (a, b) in s.energies.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        let id = s.vectors.adjoint() * &s.vectors;
        assert!(max_abs((&id - crate::linalg::identity(4)).as_ref()) < 1e-14);
    }

    #[test]
    fn reference_spectrum_and_vectors() {
        let s = two_qubit_spectrum(5.0, 0.1).unwrap();
        assert!((s.energies[2] - 0.5).abs() < 1e-12);
        assert!((s.energies[3] - 5.0 * 1.01f64.sqrt()).abs() < 1e-12);
        assert!((s.energies[3] - 5.02494).abs() < 1e-5);
        // m2 = (|10⟩ + |01⟩)/√2
        let h = 1.0 / SQRT_2;
        for (i, w) in [0.0, h, h, 0.0].into_iter().enumerate() {
            assert!((s.vectors[(i, M2)] - c64::new(w, 0.0)).norm() < 1e-12);
        }
        assert!(max_abs((&s.vectors - closed_form_vectors(0.1)).as_ref()) < 1e-12);
    }

    #[test]
    fn spectrum_matches_closed_forms() {
        for kappa in [0.01, 0.1, 0.5, 1.0, 3.0] {
            let s = two_qubit_spectrum(1.7, kappa).unwrap();
            assert!(s.max_energy_deviation(1.7, kappa) < 1e-12 * 1.7, "κ = {kappa}");
            let h = two_qubit_hamiltonian(1.7, kappa);
            let d = s.transform(&h);
            for i in 0..4 {
                for j in 0..4 {
                    let want = if i == j { s.energies[i] } else { 0.0 };
                    assert!((d[(i, j)] - c64::new(want, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn operator_transforms_match_simplified_forms() {
        for kappa in [0.1, 0.05, 0.01] {
            let s = two_qubit_spectrum(1.0, kappa).unwrap();
            for (exact, approx) in [
                (s.transform(&sigma_z(1)), simplified_sigma_z1(kappa)),
                (s.transform(&sigma_z(2)), simplified_sigma_z2(kappa)),
            ] {
                let dev = max_abs((&exact - &approx).as_ref());
                assert!(dev <= 0.6 * kappa * kappa, "κ = {kappa}: {dev}");
            }
            // the σx form carries O(κ) corrections from the |00⟩, |11⟩ mixing
            let x = s.transform(&sigma_x(1));
            let dev = max_abs((&Mat::from_fn(4, 4, |i, j| x[(i, j)] * SQRT_2) - simplified_sqrt2_sigma_x1()).as_ref());
            assert!(dev <= 0.6 * kappa, "κ = {kappa}: {dev}");
        }
    }

    #[test]
    fn frequencies_and_couplings() {
        let cp = CircuitParams { omega_t: 5.0, kappa: 0.1, g_1l: 0.02, g_2p: 0.3, g_1s: 0.04, alpha: 2.0 };
        let e = effective_parameters(&cp).unwrap();
        assert!((e.freq_l - 1.0).abs() < 1e-14);
        assert!((e.freq_p - 10.0 * 1.01f64.sqrt()).abs() < 1e-13);
        assert!((e.freq_p - 10.0499).abs() < 1e-4);
        assert!((e.freq_s - 4.5249).abs() < 1e-4);
        assert!((e.omega_s_drive - 0.04).abs() < 1e-15);
        assert!((e.g_p + 0.03).abs() < 1e-15);
        assert!((e.g_s - 0.04 / SQRT_2).abs() < 1e-15);
        assert!((e.rwa_margin - 0.04).abs() < 1e-14);
        // the same splittings from the eigensolver
        let s = two_qubit_spectrum(5.0, 0.1).unwrap().energies;
        assert!((s[2] - s[1] - e.freq_l).abs() < 1e-12);
        assert!((s[3] - s[0] - e.freq_p).abs() < 1e-12);
        assert!((s[3] - s[2] - e.freq_s).abs() < 1e-12);
        assert!((s[1] - s[0] - e.freq_s).abs() < 1e-12);

        let zero = effective_parameters(&CircuitParams { g_2p: 0.0, ..cp }).unwrap();
        assert_eq!(zero.g_p, 0.0);
        assert!(effective_parameters(&CircuitParams { kappa: 0.0, ..cp }).is_err());
    }

    #[test]
    fn pump_coupling_sign_is_a_gauge() {
        let base = SystemParams { omega_s_drive: 2.0, gamma_star: 0.05, ..SystemParams::reference() };
        let flipped = SystemParams { g_p: -base.g_p, ..base };
        let idx = BasisState::new(1, 0, Level::G);
        for k in [-3.0, 0.0, 0.7, 25.0] {
            let r = |p: &SystemParams| {
                let b = ScatterBlock::new(p, 2);
                let i = b.basis.index_of(&idx).unwrap();
                let mut rhs = vec![ZERO; b.basis.len()];
                rhs[i] = ONE;
                ONE + I * p.gamma_p * b.resolvent(c64::new(k, 0.0), &rhs).unwrap()[i]
            };
            assert!((r(&base) - r(&flipped)).norm() < 1e-13, "k = {k}");
        }
    }

    #[test]
    fn no_couplings_means_no_infidelity() {
        let cp = CircuitParams { omega_t: 1.0, kappa: 0.2, g_1l: 0.0, g_2p: 0.0, g_1s: 0.0, alpha: 1.0 };
        let r = rwa_validation(&cp, 40.0).unwrap();
        assert!(r.max_infidelity < 1e-12, "{}", r.max_infidelity);
        assert!(r.step <= 1.0 / (STEPS_PER_PUMP_PERIOD * effective_parameters(&cp).unwrap().freq_p));
    }

    #[test]
    fn smaller_margin_gives_better_rwa() {
        let g = 0.01;
        let horizon = 10.0 / (g * SQRT_2);
        let kappa = 0.2;
        // fixed couplings; the qubit frequency sets the margin
        let coarse = rwa_validation(&circuit(g / (0.2 * kappa), kappa, g), horizon).unwrap();
        let fine = rwa_validation(&circuit(g / (0.02 * kappa), kappa, g), horizon).unwrap();
        assert!((coarse.rwa_margin - 0.1).abs() < 1e-12 && (fine.rwa_margin - 0.01).abs() < 1e-12);
        assert!(fine.max_infidelity < coarse.max_infidelity, "{fine:?} vs {coarse:?}");
        assert!(coarse.in_regime && fine.in_regime);
    }

    #[test]
    fn counter_rotating_terms_barely_transfer() {
        let g = 0.01;
        let kappa = 0.2;
        for margin in [0.1, 0.03] {
            let cp = circuit(g / (2.0 * kappa * margin), kappa, g);
            let r = rwa_comparison(&cp, 10.0 / (g * SQRT_2), CouplingTerms::CounterRotating).unwrap();
            assert!(r.max_ground_population < margin * margin, "margin {margin}: {}", r.max_ground_population);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn control_frequency_is_linear_in_kappa(omega_t in 0.1f64..10.0, kappa in 0.01f64..1.0, scale in 0.1f64..5.0) {
            let base = CircuitParams { omega_t, kappa, g_1l: 0.01, g_2p: 0.01, g_1s: 0.01, alpha: 1.0 };
            let a = effective_parameters(&base).unwrap();
            let b = effective_parameters(&CircuitParams { kappa: kappa * scale, ..base }).unwrap();
            prop_assert!((b.freq_l - scale * a.freq_l).abs() <= 1e-12 * b.freq_l);
        }

        #[test]
        fn spectrum_is_orthonormal_and_closed_form(omega_t in 0.1f64..10.0, kappa in 0.001f64..2.0) {
            let s = two_qubit_spectrum(omega_t, kappa).unwrap();
            prop_assert!(s.max_energy_deviation(omega_t, kappa) <= 1e-12 * omega_t);
            let id = s.vectors.adjoint() * &s.vectors;
            prop_assert!(max_abs((&id - crate::linalg::identity(4)).as_ref()) < 1e-12);
        }
    }
}
