//! Few-photon scattering off the emitter: pump reflection, two-photon
//! amplitudes and wavefunctions, and the four-photon wavefunction of two
//! overlapping pairs.
//!
//! Everything is evaluated with the non-Hermitian Hamiltonian
//! `H_S* = H_S − i(γ_p/2) a_p†a_p − i(γ_s/2) a_s†a_s − i(γ*/2)|e⟩⟨e|`
//! restricted to charge blocks `c = 0..=4`. Wavefunctions are reported without
//! their plane-wave envelope phases `e^{ik·x}`; only moduli are meaningful.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, MatRef};
use gkquad::single::Integrator;
use gkquad::Tolerance;

use crate::fock::{build_hamiltonian, lower_p, lower_s, BasisState, FockBasis, Level, SystemParams};
use crate::linalg::{expm, identity, matvec, norm1, solve, I, ZERO};
use crate::{Error, Result};

/// Eigenvector condition number above which exponentials fall back to
/// scaling and squaring.
pub const EIGEN_COND_LIMIT: f64 = 1e6;

/// Half-width of the momentum window of the pair-flux integral, in units of γ_s.
pub const FLUX_WINDOW: f64 = 50.0;

/// `H_S*` on one charge block.
#[derive(Clone, Debug)]
pub struct ScatterBlock {
    pub charge: u32,
    pub basis: FockBasis,
    pub matrix: Mat<c64>,
}

impl ScatterBlock {
    pub fn new(params: &SystemParams, charge: u32) -> Self {
        let basis = FockBasis::charge(charge);
        let mut matrix = build_hamiltonian(params, &basis).matrix;
        for (i, s) in basis.states().iter().enumerate() {
            let mut loss = 0.5 * (params.gamma_p * s.n_p as f64 + params.gamma_s * s.n_s as f64);
            if s.level == Level::E {
                loss += 0.5 * params.gamma_star;
            }
            matrix[(i, i)] -= I * loss;
        }
        Self { charge, basis, matrix }
    }

    pub fn basis_id(&self) -> String {
        self.basis.id()
    }

    pub fn eigenvalues(&self) -> Result<Vec<c64>> {
        self.matrix
            .eigenvalues()
            .map_err(|e| Error::Singular(format!("eigenvalues of charge-{} block: {e:?}", self.charge)))
    }

    /// Solves `(H* − z) x = b`.
    pub fn resolvent(&self, z: c64, b: &[c64]) -> Result<Vec<c64>> {
        let n = self.basis.len();
        let shifted = Mat::from_fn(n, n, |i, j| if i == j { self.matrix[(i, j)] - z } else { self.matrix[(i, j)] });
        solve(shifted.as_ref(), b)
    }
}

/// `exp(−i H r)` for a fixed small block, by eigendecomposition when the
/// eigenvectors are well conditioned and by scaling and squaring otherwise.
#[derive(Clone, Debug)]
struct Propagator {
    h: Mat<c64>,
    eig: Option<(Vec<c64>, Mat<c64>, Mat<c64>)>,
}

impl Propagator {
    fn new(h: &Mat<c64>) -> Self {
        let n = h.nrows();
        let eig = h.eigen().ok().and_then(|e| {
            let u = e.U().to_owned();
            let vals: Vec<c64> = (0..n).map(|i| e.S().column_vector()[i]).collect();
            let u_inv = u.partial_piv_lu().solve(identity(n));
            let cond = norm1(u.as_ref()) * norm1(u_inv.as_ref());
            (cond.is_finite() && cond <= EIGEN_COND_LIMIT).then_some((vals, u, u_inv))
        });
        Self { h: h.clone(), eig }
    }

    fn apply(&self, r: f64, v: &[c64]) -> Vec<c64> {
        match &self.eig {
            Some((vals, u, u_inv)) => {
                let mut w = matvec(u_inv.as_ref(), v);
                for (x, l) in w.iter_mut().zip(vals) {
                    *x *= (-I * l * r).exp();
                }
                matvec(u.as_ref(), &w)
            }
            None => {
                let n = self.h.nrows();
                let a = Mat::from_fn(n, n, |i, j| -I * self.h[(i, j)] * r);
                matvec(expm(a.as_ref()).as_ref(), v)
            }
        }
    }

    fn uses_eigenbasis(&self) -> bool {
        self.eig.is_some()
    }
}

/// One wavefunction value.
#[derive(Clone, Debug, PartialEq)]
pub struct WavefunctionSample {
    /// Separation `r` (intra-pair) or `R` (between pairs), in units of 1/γ_s.
    pub separation: f64,
    pub amplitude: c64,
    /// Incoming pump momenta.
    pub momenta: Vec<f64>,
}

impl WavefunctionSample {
    pub fn probability(&self) -> f64 {
        self.amplitude.norm_sqr()
    }
}

/// Shape-normalized scattering series on a common separation grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatterSeries {
    pub tau: Vec<f64>,
    /// `|Ψ_2ph(τ)|²` divided by its maximum over the grid.
    pub psi2_peak_normalized: Vec<f64>,
    /// `|ψ_4ph(τ)|²` divided by its independent-scattering value.
    pub psi4_independent_normalized: Vec<f64>,
}

fn row(m: MatRef<'_, c64>, i: usize) -> Vec<c64> {
    (0..m.ncols()).map(|j| m[(i, j)]).collect()
}

/// Charge blocks `c = 0..=4` and the ladder maps between them, built once per
/// parameter point.
#[derive(Clone, Debug)]
pub struct Scatterer {
    pub params: SystemParams,
    blocks: Vec<ScatterBlock>,
    /// `a_s` from block c+1 into block c, indexed by c.
    signal_lower: Vec<Mat<c64>>,
    /// `a_p†` from block 2 into block 4.
    pump_raise_24: Mat<c64>,
    /// `⟨0| a_s²` restricted to block 2.
    pair_out_20: Vec<c64>,
    /// `a_s²` from block 4 into block 2.
    pair_lower_42: Mat<c64>,
    /// Index of `|1,0,g⟩` in block 2.
    pump_index: usize,
    prop1: Propagator,
    prop2: Propagator,
}

impl Scatterer {
    pub fn new(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        let blocks: Vec<ScatterBlock> = (0..=4).map(|c| ScatterBlock::new(params, c)).collect();
        let signal_lower: Vec<Mat<c64>> =
            (0..4).map(|c| lower_s(&blocks[c + 1].basis, &blocks[c].basis).matrix).collect();
        let pump_raise_24 = lower_p(&blocks[4].basis, &blocks[2].basis).adjoint().matrix;
        let s20 = &signal_lower[0] * &signal_lower[1];
        let pair_lower_42 = &signal_lower[2] * &signal_lower[3];
        let pump_index = blocks[2]
            .basis
            .index_of(&BasisState::new(1, 0, Level::G))
            .expect("|1,0,g⟩ spans charge 2");
        let prop1 = Propagator::new(&blocks[1].matrix);
        let prop2 = Propagator::new(&blocks[2].matrix);
        Ok(Self {
            params: *params,
            pair_out_20: row(s20.as_ref(), 0),
            blocks,
            signal_lower,
            pump_raise_24,
            pair_lower_42,
            pump_index,
            prop1,
            prop2,
        })
    }

    pub fn block(&self, charge: u32) -> &ScatterBlock {
        &self.blocks[charge as usize]
    }

    /// Whether the charge-1 and charge-2 exponentials use the eigenbasis
    /// (as opposed to the scaling-and-squaring fallback).
    pub fn uses_eigenbasis(&self) -> (bool, bool) {
        (self.prop1.uses_eigenbasis(), self.prop2.uses_eigenbasis())
    }

    fn pump_photon(&self) -> Vec<c64> {
        let mut e = vec![ZERO; self.blocks[2].basis.len()];
        e[self.pump_index] = c64::new(1.0, 0.0);
        e
    }

    /// `(H*_2 − k)⁻¹ a_p†|0⟩`
    fn loaded(&self, k: f64) -> Result<Vec<c64>> {
        self.blocks[2].resolvent(c64::new(k, 0.0), &self.pump_photon())
    }

    /// Pump reflection amplitude `r(k) = 1 + iγ_p ⟨1,0,g|(H*_2 − k)⁻¹|1,0,g⟩`.
    pub fn reflection(&self, k: f64) -> Result<c64> {
        let x = self.loaded(k)?;
        Ok(c64::new(1.0, 0.0) + I * self.params.gamma_p * x[self.pump_index])
    }

    /// `R_p(k) = |r(k)|²`.
    pub fn reflection_coefficient(&self, k: f64) -> Result<f64> {
        Ok(self.reflection(k)?.norm_sqr())
    }

    /// Reduced two-photon amplitude `T(q1, k − q1)` multiplying
    /// `δ(q1 + q2 − k)`.
    pub fn two_photon_amplitude(&self, q1: f64, k: f64) -> Result<c64> {
        let q2 = k - q1;
        let y = matvec(self.signal_lower[1].as_ref(), &self.loaded(k)?);
        let a = self.blocks[1].resolvent(c64::new(q1, 0.0), &y)?;
        let b = self.blocks[1].resolvent(c64::new(q2, 0.0), &y)?;
        let sum: Vec<c64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let z = matvec(self.signal_lower[0].as_ref(), &sum)[0];
        let p = &self.params;
        Ok(-I * p.gamma_s * (p.gamma_p / (2.0 * PI)).sqrt() * z)
    }

    /// Probability that a pump photon at momentum `k` leaves as a signal pair,
    /// `(1/2) ∫ dq |T(q, k − q)|²`, integrated adaptively over
    /// `|q| ≤ FLUX_WINDOW γ_s` plus a `q⁻⁴` tail estimate.
    pub fn pair_flux(&self, k: f64) -> Result<f64> {
        let w = FLUX_WINDOW * self.params.gamma_s;
        let mut failure = None;
        let mut f = |q: f64| match self.two_photon_amplitude(q, k) {
            Ok(t) => t.norm_sqr(),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        };
        let edges = (f(-w), f(w));
        let mut points: Vec<f64> = Vec::new();
        for l in self.blocks[1].eigenvalues()? {
            for q in [l.re, k - l.re] {
                if q.abs() < w {
                    points.push(q);
                }
            }
        }
        points.sort_by(f64::total_cmp);
        points.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let inner = Integrator::new(&mut f)
            .tolerance(Tolerance::AbsOrRel(1e-12, 1e-11))
            .max_iters(5000)
            .points(&points)
            .run(-w..w)
            .estimate()
            .map_err(|e| Error::Quadrature(format!("{e:?}")));
        if let Some(e) = failure {
            return Err(e);
        }
        // |T|² ~ C q⁻⁴ beyond the window: ∫_w^∞ C q⁻⁴ dq = f(w) w / 3
        let tail = (edges.0 + edges.1) * w / 3.0;
        Ok(0.5 * (inner? + tail))
    }

    /// `Ψ_2ph(r) = √(γ_p/2π) γ_s ⟨0| a_s e^{−iH* r} a_s (H* − k)⁻¹ a_p† |0⟩`.
    pub fn psi_2ph(&self, r: f64, k: f64) -> Result<WavefunctionSample> {
        let y = matvec(self.signal_lower[1].as_ref(), &self.loaded(k)?);
        let y = self.prop1.apply(r.abs(), &y);
        let z = matvec(self.signal_lower[0].as_ref(), &y)[0];
        let p = &self.params;
        Ok(WavefunctionSample {
            separation: r,
            amplitude: (p.gamma_p / (2.0 * PI)).sqrt() * p.gamma_s * z,
            momenta: vec![k],
        })
    }

    fn dot(a: &[c64], b: &[c64]) -> c64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// One ordering `ψ(R; k1, k2)` of the overlapping-pairs wavefunction.
    fn psi_4ph_ordered(&self, r: f64, k1: f64, k2: f64) -> Result<c64> {
        let x1 = self.loaded(k1)?;
        let up = matvec(self.pump_raise_24.as_ref(), &x1);
        // 1/(k1 + k2 − H*) = −(H* − (k1 + k2))⁻¹
        let y: Vec<c64> = self.blocks[4].resolvent(c64::new(k1 + k2, 0.0), &up)?.iter().map(|v| -v).collect();
        let y = matvec(self.pair_lower_42.as_ref(), &y);
        let t1 = Self::dot(&self.pair_out_20, &self.prop2.apply(r, &y));

        let x2 = self.loaded(k2)?;
        let mut evolved = self.prop2.apply(r, &x2);
        let phase = (-I * k2 * r).exp();
        for (e, x) in evolved.iter_mut().zip(&x2) {
            *e -= phase * x;
        }
        let t2 = Self::dot(&self.pair_out_20, &evolved) * Self::dot(&self.pair_out_20, &x1);

        let p = &self.params;
        Ok(-(p.gamma_p / (2.0 * PI)) * p.gamma_s * p.gamma_s * (t1 + t2))
    }

    /// Four-photon wavefunction of two perfectly overlapped pairs at pair
    /// separation `R`, symmetrized over the incoming momenta.
    pub fn psi_4ph_pair(&self, r: f64, k1: f64, k2: f64) -> Result<WavefunctionSample> {
        let amplitude = self.psi_4ph_ordered(r, k1, k2)? + self.psi_4ph_ordered(r, k2, k1)?;
        Ok(WavefunctionSample { separation: r, amplitude, momenta: vec![k1, k2] })
    }

    /// Independent-scattering value `Ψ_2ph(0; k1) Ψ_2ph(0; k2) + (k1 ↔ k2)`
    /// at zero intra-pair separation.
    pub fn psi_4ph_independent(&self, k1: f64, k2: f64) -> Result<c64> {
        let a = self.psi_2ph(0.0, k1)?.amplitude;
        let b = self.psi_2ph(0.0, k2)?.amplitude;
        Ok(2.0 * a * b)
    }

    /// `|ψ_4ph(R)|²` relative to independent scattering; tends to 1 for
    /// `R ≫ τ_A`.
    pub fn psi_4ph_normalized(&self, r: f64, k1: f64, k2: f64) -> Result<f64> {
        let num = self.psi_4ph_pair(r, k1, k2)?.probability();
        let den = self.psi_4ph_independent(k1, k2)?.norm_sqr();
        if den == 0.0 {
            return Err(Error::Singular("independent-scattering value vanishes".into()));
        }
        Ok(num / den)
    }

    /// Shape-normalized `|Ψ_2ph|²` and `|ψ_4ph|²` at injection momentum `k`
    /// on the separation grid `tau`.
    pub fn g2_equivalents(&self, tau: &[f64], k: f64) -> Result<ScatterSeries> {
        let mut psi2 = tau.iter().map(|&t| Ok(self.psi_2ph(t, k)?.probability())).collect::<Result<Vec<f64>>>()?;
        let peak = psi2.iter().copied().fold(0.0, f64::max);
        if peak > 0.0 {
            psi2.iter_mut().for_each(|v| *v /= peak);
        }
        let psi4 = tau.iter().map(|&t| self.psi_4ph_normalized(t, k, k)).collect::<Result<Vec<f64>>>()?;
        Ok(ScatterSeries { tau: tau.to_vec(), psi2_peak_normalized: psi2, psi4_independent_normalized: psi4 })
    }
}

pub fn reflection_amplitude(params: &SystemParams, k: f64) -> Result<c64> {
    Scatterer::new(params)?.reflection(k)
}

pub fn two_photon_amplitude(params: &SystemParams, q1: f64, k: f64) -> Result<c64> {
    Scatterer::new(params)?.two_photon_amplitude(q1, k)
}

pub fn psi_2ph(params: &SystemParams, r: f64, k: f64) -> Result<WavefunctionSample> {
    Scatterer::new(params)?.psi_2ph(r, k)
}

pub fn psi_4ph_pair(params: &SystemParams, r: f64, k1: f64, k2: f64) -> Result<WavefunctionSample> {
    Scatterer::new(params)?.psi_4ph_pair(r, k1, k2)
}

/// Resonant-injection series comparable to the master-equation correlators.
pub fn g2_scatter_equivalents(params: &SystemParams, tau: &[f64]) -> Result<ScatterSeries> {
    Scatterer::new(params)?.g2_equivalents(tau, 0.0)
}

/// `R_p(k) + (1/2)∫|T|² − 1`; zero at γ* = 0 when flux is conserved.
pub fn flux_defect(params: &SystemParams, k: f64) -> Result<f64> {
    let s = Scatterer::new(params)?;
    Ok(s.reflection_coefficient(k)? + s.pair_flux(k)? - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic;
    use proptest::prelude::*;

    fn at_optimum() -> SystemParams {
        let p = SystemParams::reference();
        p.with_omega_s(analytic::omega_2ph(&p).unwrap())
    }

    /// The c = 2 block written out in the order
    /// `|1,0,g⟩, |0,2,g⟩, |0,0,e⟩, |0,1,m1⟩, |0,1,m2⟩`.
    fn written_out_c2(p: &SystemParams) -> Mat<c64> {
        let re = |x: f64| c64::new(x, 0.0);
        let im = |x: f64| c64::new(0.0, x);
        let s2 = 2f64.sqrt() * p.g_s;
        let o = p.omega_s_drive;
        let z = c64::new(0.0, 0.0);
        let rows = [
            [im(-p.gamma_p / 2.0), z, re(p.g_p), z, z],
            [z, im(-p.gamma_s), z, re(s2), z],
            [re(p.g_p), z, im(-p.gamma_star / 2.0), z, re(p.g_s)],
            [z, re(s2), z, im(-p.gamma_s / 2.0), re(o)],
            [z, z, re(p.g_s), re(o), im(-p.gamma_s / 2.0)],
        ];
        Mat::from_fn(5, 5, |i, j| rows[i][j])
    }

    #[test]
    fn charge_two_block_matches_written_form() {
        let p = at_optimum().with_gamma_star(0.3);
        let b = ScatterBlock::new(&p, 2);
        let order = [
            BasisState::new(1, 0, Level::G),
            BasisState::new(0, 2, Level::G),
            BasisState::new(0, 0, Level::E),
            BasisState::new(0, 1, Level::M1),
            BasisState::new(0, 1, Level::M2),
        ];
        let perm: Vec<usize> = order.iter().map(|s| b.basis.index_of(s).unwrap()).collect();
        let want = written_out_c2(&p);
        for i in 0..5 {
            for j in 0..5 {
                assert!((b.matrix[(perm[i], perm[j])] - want[(i, j)]).norm() < 1e-15, "({i},{j})");
            }
        }
    }

    #[test]
    fn block_eigenvalues_decay() {
        for p in [at_optimum(), SystemParams::reference().with_omega_s(1e-3).with_gamma_star(0.5)] {
            for c in 1..=4 {
                for l in ScatterBlock::new(&p, c).eigenvalues().unwrap() {
                    assert!(l.im < 0.0, "c = {c}: {l}");
                }
            }
        }
    }

    #[test]
    fn decoupled_pump_reflects_with_unit_modulus() {
        let p = SystemParams { g_p: 0.0, ..at_optimum() };
        let s = Scatterer::new(&p).unwrap();
        for k in [-30.0, -1.0, 0.0, 0.5, 7.0] {
            assert!((s.reflection(k).unwrap().norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn decoupled_pump_has_no_resolvent_weight_in_other_states() {
        let p = SystemParams { g_p: 0.0, ..at_optimum() };
        let s = Scatterer::new(&p).unwrap();
        let x = s.loaded(0.3).unwrap();
        for (i, v) in x.iter().enumerate() {
            if i != s.pump_index {
                assert_eq!(*v, ZERO);
            }
        }
    }

    #[test]
    fn resonant_pump_is_converted() {
        let s = Scatterer::new(&at_optimum()).unwrap();
        assert!(s.reflection_coefficient(0.0).unwrap() <= 1e-3);
    }

    #[test]
    fn far_detuned_pump_is_reflected() {
        let p = at_optimum();
        let s = Scatterer::new(&p).unwrap();
        for k in [-100.0 * p.gamma_p, 100.0 * p.gamma_p] {
            assert!((s.reflection_coefficient(k).unwrap() - 1.0).abs() < 1e-2);
        }
    }

    #[test]
    fn no_signal_coupling_no_pairs() {
        let p = SystemParams { g_s: 0.0, ..at_optimum() };
        let s = Scatterer::new(&p).unwrap();
        assert_eq!(s.two_photon_amplitude(0.3, 0.0).unwrap(), ZERO);
        assert_eq!(s.psi_2ph(0.4, 0.0).unwrap().amplitude, ZERO);
    }

    #[test]
    fn flux_is_conserved_without_dephasing() {
        let p = at_optimum();
        let s = Scatterer::new(&p).unwrap();
        let gp = analytic::gamma_p_purcell(&p);
        for k in [0.0, gp, -gp, 5.0 * gp, -5.0 * gp] {
            let d = s.reflection_coefficient(k).unwrap() + s.pair_flux(k).unwrap() - 1.0;
            assert!(d.abs() < 1e-6, "k = {k}: {d:e}");
        }
    }

    #[test]
    fn dephasing_loses_flux() {
        let p = at_optimum().with_gamma_star(0.01);
        assert!(flux_defect(&p, 0.0).unwrap() < -1e-3);
    }

    #[test]
    fn wavefunction_decays_beyond_slowest_mode() {
        let s = Scatterer::new(&at_optimum()).unwrap();
        let peak = (0..2000).map(|i| s.psi_2ph(i as f64 * 0.005, 0.0).unwrap().probability()).fold(0.0, f64::max);
        let slowest = s.block(1).eigenvalues().unwrap().iter().map(|l| -l.im).fold(f64::INFINITY, f64::min);
        // 40 e-foldings of the amplitude of the slowest mode
        let r = 40.0 / slowest;
        assert!(s.psi_2ph(r, 0.0).unwrap().probability() < 1e-12 * peak);
    }

    #[test]
    fn propagator_matches_dense_exponential() {
        let p = at_optimum().with_gamma_star(0.2);
        let s = Scatterer::new(&p).unwrap();
        assert_eq!(s.uses_eigenbasis(), (true, true));
        let h = &s.block(2).matrix;
        let v: Vec<c64> = (0..5).map(|i| c64::new(i as f64, 1.0)).collect();
        for r in [0.0, 0.3, 4.0, 25.0] {
            let a = Mat::from_fn(5, 5, |i, j| -I * h[(i, j)] * r);
            let want = matvec(expm(a.as_ref()).as_ref(), &v);
            let got = s.prop2.apply(r, &v);
            for (x, y) in got.iter().zip(&want) {
                assert!((x - y).norm() < 1e-10, "r = {r}");
            }
        }
    }

    #[test]
    fn defective_block_falls_back() {
        // Jordan block: eigenvectors are parallel
        let h = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) | (1, 1) => c64::new(0.0, -1.0),
            (0, 1) => c64::new(1.0, 0.0),
            _ => ZERO,
        });
        let prop = Propagator::new(&h);
        assert!(!prop.uses_eigenbasis());
        let v = [c64::new(0.0, 0.0), c64::new(1.0, 0.0)];
        let r = 2.0;
        let out = prop.apply(r, &v);
        // exp(−i(−i + N) r) = e^{−r}(1 − i r N)
        let decay = (-r as f64).exp();
        assert!((out[0] - c64::new(0.0, -r) * decay).norm() < 1e-13);
        assert!((out[1] - c64::new(decay, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn independent_scattering_limit() {
        let p = SystemParams { g_p: 2.0, ..SystemParams::reference().with_omega_s(5.0) };
        let s = Scatterer::new(&p).unwrap();
        let v = s.psi_4ph_normalized(1e3, 0.0, 0.0).unwrap();
        assert!((v - 1.0).abs() < 1e-3, "{v}");
    }

    #[test]
    fn pair_wavefunction_at_zero_separation_is_small() {
        let s = Scatterer::new(&at_optimum()).unwrap();
        let v = s.psi_4ph_normalized(0.0, 0.0, 0.0).unwrap();
        assert!(v < 1e-3, "{v}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn two_photon_amplitude_is_symmetric(q1 in -20.0f64..20.0, k in -1.0f64..1.0, om in 0.01f64..20.0) {
            let s = Scatterer::new(&SystemParams::reference().with_omega_s(om)).unwrap();
            let a = s.two_photon_amplitude(q1, k).unwrap();
            let b = s.two_photon_amplitude(k - q1, k).unwrap();
            prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-300));
        }

        #[test]
        fn pair_wavefunction_is_symmetric_in_momenta(r in 0.0f64..50.0, k1 in -0.1f64..0.1, k2 in -0.1f64..0.1) {
            let s = Scatterer::new(&at_optimum()).unwrap();
            let a = s.psi_4ph_pair(r, k1, k2).unwrap().amplitude;
            let b = s.psi_4ph_pair(r, k2, k1).unwrap().amplitude;
            prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-300));
        }
    }
}
