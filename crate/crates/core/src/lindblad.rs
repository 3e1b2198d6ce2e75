//! Driven master equation on a box-truncated Fock space: Liouvillian,
//! steady state, populations and two-time correlators via the quantum
//! regression theorem.
//!
//! Density matrices are vectorized by stacking columns, so `ρ_ij` sits at index
//! `i + d j` and `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use faer::linalg::solvers::Solve;
use faer::sparse::SparseColMat;
use faer::{c64, Mat, Side};

use crate::fock::{build_hamiltonian, charge_operator, BasisMode, FockBasis, LabeledOperator, ModeOperators, SystemParams};
use crate::linalg::{csc_from_triplets, sp_matvec, ExpAction, ShiftInvertExp, I, ONE, ZERO};
use crate::{Error, Result};

/// Default box truncation `(N_p, N_s)`.
pub const DEFAULT_TRUNCATION: (u32, u32) = (2, 4);

/// Residual bound accepted from the steady-state solve.
pub const STEADY_RESIDUAL_TOL: f64 = 1e-10;

/// Sparse Liouvillian acting on column-stacked density matrices.
///
/// The drive changes the charge by two and every other term preserves the
/// charge difference between ket and bra, so elements `ρ_ij` with an even
/// difference `c_i − c_j` never mix with the odd ones. The even block, which
/// holds the steady state and every correlator seed, is kept separately.
#[derive(Clone, Debug)]
pub struct Superoperator {
    pub matrix: SparseColMat<usize, c64>,
    pub basis: BasisMode,
    /// Hilbert-space dimension `d`; the matrix is `d² × d²`.
    pub dim: usize,
    even: Vec<usize>,
    even_block: SparseColMat<usize, c64>,
}

impl Superoperator {
    fn new(matrix: SparseColMat<usize, c64>, basis: &FockBasis) -> Self {
        let d = basis.len();
        let charge: Vec<u32> = basis.states().iter().map(|s| s.charge()).collect();
        let even: Vec<usize> = (0..d * d).filter(|k| (charge[k % d] + charge[k / d]) % 2 == 0).collect();
        let mut position = vec![usize::MAX; d * d];
        for (r, &k) in even.iter().enumerate() {
            position[k] = r;
        }
        let entries = matrix
            .triplet_iter()
            .filter(|t| position[t.row] != usize::MAX && position[t.col] != usize::MAX)
            .map(|t| (position[t.row], position[t.col], *t.val))
            .collect();
        let even_block = csc_from_triplets(even.len(), even.len(), entries);
        Self { matrix, basis: basis.mode(), dim: d, even, even_block }
    }

    /// Column-stacked indices spanned by the even block, in block order.
    pub fn even_indices(&self) -> &[usize] {
        &self.even
    }

    pub fn even_block(&self) -> &SparseColMat<usize, c64> {
        &self.even_block
    }

    fn restrict(&self, full: &[c64]) -> Vec<c64> {
        self.even.iter().map(|&k| full[k]).collect()
    }

    fn extend(&self, reduced: &[c64]) -> Vec<c64> {
        let mut full = vec![ZERO; self.dim * self.dim];
        for (&k, v) in self.even.iter().zip(reduced) {
            full[k] = *v;
        }
        full
    }

    /// `L[X]` for a `d × d` matrix `X`.
    pub fn apply(&self, x: &Mat<c64>) -> Mat<c64> {
        let v = vectorize(x);
        let mut out = vec![ZERO; v.len()];
        sp_matvec(&self.matrix, &v, &mut out);
        unvectorize(&out, self.dim)
    }
}

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub matrix: Mat<c64>,
    pub basis: BasisMode,
}

impl DensityMatrix {
    pub fn trace(&self) -> c64 {
        (0..self.matrix.nrows()).map(|i| self.matrix[(i, i)]).sum()
    }

    /// `tr(A ρ)`.
    pub fn expect(&self, a: &Mat<c64>) -> c64 {
        let d = self.matrix.nrows();
        let mut acc = ZERO;
        for i in 0..d {
            for k in 0..d {
                acc += a[(i, k)] * self.matrix[(k, i)];
            }
        }
        acc
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = Mat::from_fn(self.matrix.nrows(), self.matrix.ncols(), |i, j| {
            (self.matrix[(i, j)] + self.matrix[(j, i)].conj()) * 0.5
        });
        herm.self_adjoint_eigenvalues(Side::Lower)
            .map(|ev| ev.into_iter().fold(f64::INFINITY, f64::min))
            .unwrap_or(f64::NAN)
    }

    pub fn hermiticity_error(&self) -> f64 {
        let m = &self.matrix;
        let mut e: f64 = 0.0;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                e = e.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        e
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesKind {
    G2,
    G2Normalized,
    G2Pairs,
    G2PairsNormalized,
    PopulationVsParam,
}

#[derive(Clone, Debug)]
pub struct CorrelationSeries {
    pub tau: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: SeriesKind,
}

impl CorrelationSeries {
    /// Series divided by its maximum (left unchanged when the maximum is 0).
    pub fn peak_normalized(&self) -> Vec<f64> {
        let peak = self.values.iter().copied().fold(0.0, f64::max);
        if peak > 0.0 {
            self.values.iter().map(|v| v / peak).collect()
        } else {
            self.values.clone()
        }
    }
}

/// Raw correlator and its normalized counterpart on the same grid.
#[derive(Clone, Debug)]
pub struct CorrelatorPair {
    pub raw: CorrelationSeries,
    pub normalized: CorrelationSeries,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Populations {
    pub n_p: f64,
    pub n_s: f64,
    pub n_e: f64,
    pub n_p_out: f64,
}

/// Steady-state values reported by sweeps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyObservables {
    pub n_p: f64,
    pub n_s: f64,
    pub n_e: f64,
    pub n_p_out: f64,
    pub g2_p0: f64,
    pub g2_s0: f64,
    pub g2_pairs0: f64,
}

impl SteadyObservables {
    pub fn as_array(&self) -> [(&'static str, f64); 7] {
        [
            ("n_p", self.n_p),
            ("n_s", self.n_s),
            ("n_e", self.n_e),
            ("n_p_out", self.n_p_out),
            ("g2_p0", self.g2_p0),
            ("g2_s0", self.g2_s0),
            ("g2_pairs0", self.g2_pairs0),
        ]
    }
}

pub fn vectorize(x: &Mat<c64>) -> Vec<c64> {
    let d = x.nrows();
    (0..d * d).map(|k| x[(k % d, k / d)]).collect()
}

pub fn unvectorize(v: &[c64], d: usize) -> Mat<c64> {
    Mat::from_fn(d, d, |i, j| v[i + d * j])
}

fn nonzeros(m: &Mat<c64>) -> Vec<(usize, usize, c64)> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != ZERO {
                out.push((i, j, v));
            }
        }
    }
    out
}

/// Generator of `dρ/dt = −i[H, ρ] + Σ_j (γ_j/2)(2 c_j ρ c_j† − c_j†c_j ρ − ρ c_j†c_j)`
/// with `H = H_S − k_0 C/2 + Ω_p(a_p + a_p†)` and jump operators `a_p`, `a_s`, `|g⟩⟨e|`.
pub fn build_liouvillian(params: &SystemParams, basis: &FockBasis) -> Result<Superoperator> {
    params.validate()?;
    if let BasisMode::Charge(_) = basis.mode() {
        return Err(Error::WrongBasis { expected: "box-truncated", got: basis.id() });
    }
    let d = basis.len();
    let ops = ModeOperators::new(basis);
    let mut h = build_hamiltonian(params, basis).matrix;
    if params.k0 != 0.0 {
        let c = charge_operator(basis).matrix;
        h -= Mat::from_fn(d, d, |i, j| c[(i, j)] * (0.5 * params.k0));
    }
    let a_p = &ops.a_p.matrix;
    h += Mat::from_fn(d, d, |i, j| (a_p[(i, j)] + a_p[(j, i)].conj()) * params.omega_p_drive);

    let jumps: [(&LabeledOperator, f64); 3] =
        [(&ops.a_p, params.gamma_p), (&ops.a_s, params.gamma_s), (&ops.sigma_ge, params.gamma_star)];

    // K = H − (i/2) Σ γ c†c, so that −iKρ + iρK† carries both the commutator
    // and the anticommutator parts.
    let mut k = h;
    for (c, gamma) in jumps {
        if gamma == 0.0 {
            continue;
        }
        let ctc = c.matrix.adjoint() * &c.matrix;
        k -= Mat::from_fn(d, d, |i, j| ctc[(i, j)] * c64::new(0.0, 0.5 * gamma));
    }

    let mut entries = Vec::new();
    let mi = c64::new(0.0, -1.0);
    for (a, b, v) in nonzeros(&k) {
        // −i (I ⊗ K)
        for j in 0..d {
            entries.push((a + d * j, b + d * j, mi * v));
        }
        // +i (K̄ ⊗ I)
        for i in 0..d {
            entries.push((i + d * a, i + d * b, I * v.conj()));
        }
    }
    for (c, gamma) in jumps {
        if gamma == 0.0 {
            continue;
        }
        let nz = nonzeros(&c.matrix);
        for &(x, y, u) in &nz {
            for &(a, b, v) in &nz {
                entries.push((a + d * x, b + d * y, u.conj() * v * gamma));
            }
        }
    }
    let n = d * d;
    Ok(Superoperator::new(csc_from_triplets(n, n, entries), basis))
}

/// Trace-one kernel element of `L`, found by replacing the equation for `ρ_00`
/// with the trace condition and solving the sparse system by LU. Only the even
/// block enters the solve; the odd block of the steady state is zero.
pub fn steady_state(l: &Superoperator) -> Result<DensityMatrix> {
    steady_state_balanced(l, &vec![1.0; l.even.len()])
}

/// [`steady_state`] solved for `y = x / w` under the diagonal similarity
/// `W⁻¹ L W`, with `w` the expected magnitude of each even-block coordinate
/// (`w = 1` for `ρ_00`). Keeps the relative accuracy of components far below
/// the vacuum population.
pub fn steady_state_balanced(l: &Superoperator, w: &[f64]) -> Result<DensityMatrix> {
    let d = l.dim;
    let n = l.even.len();
    assert_eq!(w.len(), n, "one weight per even coordinate");
    // ρ_00 is the first even coordinate.
    debug_assert_eq!(l.even[0], 0);
    let mut entries: Vec<(usize, usize, c64)> = l
        .even_block
        .triplet_iter()
        .filter(|t| t.row != 0)
        .map(|t| (t.row, t.col, *t.val * (w[t.col] / w[t.row])))
        .collect();
    for (r, &k) in l.even.iter().enumerate() {
        if k % d == k / d {
            entries.push((0, r, c64::new(w[r], 0.0)));
        }
    }
    let a = csc_from_triplets(n, n, entries);
    let lu = a.sp_lu().map_err(|e| Error::Singular(format!("sparse LU: {e:?}")))?;
    let mut rhs = Mat::<c64>::zeros(n, 1);
    rhs[(0, 0)] = ONE;
    let x = lu.solve(&rhs);
    let v: Vec<c64> = (0..n).map(|i| x[(i, 0)] * w[i]).collect();
    if !v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::DegenerateKernel { residual: f64::NAN });
    }
    let raw = unvectorize(&l.extend(&v), d);
    let rho = Mat::from_fn(d, d, |i, j| (raw[(i, j)] + raw[(j, i)].conj()) * 0.5);
    let mut res = vec![ZERO; d * d];
    sp_matvec(&l.matrix, &vectorize(&rho), &mut res);
    let residual = res.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(residual <= STEADY_RESIDUAL_TOL) {
        return Err(Error::DegenerateKernel { residual });
    }
    Ok(DensityMatrix { matrix: rho, basis: l.basis })
}

/// Magnitude scale of `ρ_ij` in the weak-drive expansion,
/// `s^(⌈c_i/2⌉ + ⌈c_j/2⌉)` with `s = 2Ω_p/γ_p` (clamped to `[10⁻¹², 1]`), per
/// entry of the even block. Each drive step moves the charge by two; odd
/// charges are reached by one signal emission from the even charge above.
fn weak_drive_scale(params: &SystemParams, basis: &FockBasis, l: &Superoperator) -> Vec<f64> {
    let d = basis.len();
    let s = (2.0 * params.omega_p_drive / params.gamma_p).clamp(1e-12, 1.0);
    let order: Vec<i32> = basis.states().iter().map(|st| st.charge().div_ceil(2) as i32).collect();
    l.even.iter().map(|&k| s.powi(order[k % d] + order[k / d])).collect()
}

/// Amplitude of the coherent pump input in the normalization where the
/// reflected field is `Ω_p/γ_p − i a_p`.
pub fn pump_input_amplitude(params: &SystemParams) -> f64 {
    params.omega_p_drive / params.gamma_p
}

pub fn populations(rho: &DensityMatrix, params: &SystemParams, ops: &ModeOperators) -> Populations {
    let a_p = &ops.a_p.matrix;
    let a_s = &ops.a_s.matrix;
    let n_p = rho.expect(&(a_p.adjoint() * a_p)).re;
    let n_s = rho.expect(&(a_s.adjoint() * a_s)).re;
    let n_e = rho.expect(&ops.proj_e.matrix).re;
    let beta = pump_input_amplitude(params);
    let d = a_p.nrows();
    let out = Mat::from_fn(d, d, |i, j| {
        let id = if i == j { c64::new(beta, 0.0) } else { ZERO };
        id - I * a_p[(i, j)]
    });
    let n_p_out = rho.expect(&(out.adjoint() * &out)).re;
    Populations { n_p, n_s, n_e, n_p_out }
}

fn power(a: &Mat<c64>, k: u32) -> Mat<c64> {
    let mut out = crate::linalg::identity(a.nrows());
    for _ in 0..k {
        out = &out * a;
    }
    out
}

/// `⟨A†^k A^k⟩`.
fn normal_moment(rho: &DensityMatrix, a: &Mat<c64>, k: u32) -> f64 {
    let ak = power(a, k);
    rho.expect(&(ak.adjoint() * &ak)).re
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Evenly spaced grid including both endpoints.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![start],
        _ => (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// 400 uniform points on `[0, 20]`.
pub fn default_tau_grid() -> Vec<f64> {
    linspace(0.0, 20.0, 400)
}

/// Propagates `X` under `exp(L τ)`.
pub fn evolve_superop(l: &Superoperator, x: &Mat<c64>, tau: f64) -> Mat<c64> {
    let mut v = vectorize(x);
    ExpAction::new(&l.matrix).apply(&mut v, tau);
    unvectorize(&v, l.dim)
}

/// Steady-state solution of one parameter point, with the operators needed for
/// correlators cached.
#[derive(Clone, Debug)]
pub struct MasterEquation {
    pub params: SystemParams,
    pub basis: FockBasis,
    pub ops: ModeOperators,
    pub liouvillian: Superoperator,
    pub steady: DensityMatrix,
}

impl MasterEquation {
    pub fn new(params: SystemParams, basis: FockBasis) -> Result<Self> {
        let liouvillian = build_liouvillian(&params, &basis)?;
        let steady = steady_state_balanced(&liouvillian, &weak_drive_scale(&params, &basis, &liouvillian))?;
        let ops = ModeOperators::new(&basis);
        Ok(Self { params, basis, ops, liouvillian, steady })
    }

    pub fn with_truncation(params: SystemParams, (n_p, n_s): (u32, u32)) -> Result<Self> {
        Self::new(params, FockBasis::boxed(n_p, n_s))
    }

    pub fn populations(&self) -> Populations {
        populations(&self.steady, &self.params, &self.ops)
    }

    pub fn observables(&self) -> SteadyObservables {
        let p = self.populations();
        let a_p = &self.ops.a_p.matrix;
        let a_s = &self.ops.a_s.matrix;
        let g2_p0 = ratio(normal_moment(&self.steady, a_p, 2), p.n_p * p.n_p);
        let gs2 = normal_moment(&self.steady, a_s, 2);
        let g2_s0 = ratio(gs2, p.n_s * p.n_s);
        let g2_pairs0 = ratio(normal_moment(&self.steady, a_s, 4), gs2 * gs2);
        SteadyObservables { n_p: p.n_p, n_s: p.n_s, n_e: p.n_e, n_p_out: p.n_p_out, g2_p0, g2_s0, g2_pairs0 }
    }

    /// `tr[A†^k A^k exp(Lτ)(A^k ρ A†^k)]` on an ascending grid of `τ ≥ 0`.
    ///
    /// Propagation runs on the even block after the diagonal similarity
    /// [`weak_drive_scale`], so that components many orders of magnitude
    /// below the vacuum part keep their relative accuracy.
    fn regression(&self, a: &Mat<c64>, k: u32, tau: &[f64]) -> Result<Vec<f64>> {
        let d = self.basis.len();
        let ak = power(a, k);
        let x0 = &ak * &self.steady.matrix * ak.adjoint();
        let m = ak.adjoint() * &ak;
        let l = &self.liouvillian;
        let w = weak_drive_scale(&self.params, &self.basis, l);
        let scaled = csc_from_triplets(
            w.len(),
            w.len(),
            l.even_block().triplet_iter().map(|t| (t.row, t.col, *t.val * (w[t.col] / w[t.row]))).collect(),
        );
        // tr(M X) as a functional on the scaled even block
        let weights: Vec<c64> = l.even.iter().zip(&w).map(|(&idx, wi)| m[(idx / d, idx % d)] * *wi).collect();
        let mut v: Vec<c64> = l.restrict(&vectorize(&x0)).iter().zip(&w).map(|(x, wi)| x / *wi).collect();
        let mut out = vec![0.0; tau.len()];
        ShiftInvertExp::new(&scaled).propagate(&mut v, tau, |i, x| {
            out[i] = weights.iter().zip(x).map(|(w, y)| w * y).sum::<c64>().re;
        })?;
        Ok(out)
    }

    fn check_grid(tau: &[f64]) -> Result<()> {
        let ascending = tau.windows(2).all(|w| w[1] >= w[0]);
        if tau.is_empty() || !ascending || tau[0] < 0.0 {
            return Err(Error::GridTooShort("tau grid must be non-empty, non-negative and ascending".into()));
        }
        Ok(())
    }

    /// `G⁽²⁾(τ)` of the signal mode and `g⁽²⁾(τ) = G⁽²⁾(τ)/n_s²`.
    pub fn correlator_g2(&self, tau: &[f64]) -> Result<CorrelatorPair> {
        Self::check_grid(tau)?;
        let values = self.regression(&self.ops.a_s.matrix, 1, tau)?;
        let n_s = self.populations().n_s;
        let normalized = values.iter().map(|v| ratio(*v, n_s * n_s)).collect();
        Ok(CorrelatorPair {
            raw: CorrelationSeries { tau: tau.to_vec(), values, kind: SeriesKind::G2 },
            normalized: CorrelationSeries { tau: tau.to_vec(), values: normalized, kind: SeriesKind::G2Normalized },
        })
    }

    /// Pair correlator `G_{s,2}(τ)` and `g_{s,2}(τ) = G_{s,2}(τ)/G⁽²⁾(0)²`.
    pub fn correlator_g2_pairs(&self, tau: &[f64]) -> Result<CorrelatorPair> {
        Self::check_grid(tau)?;
        let have = self.basis.max_n_s();
        if have < 4 {
            return Err(Error::TruncationTooSmall { needed: 4, have });
        }
        let values = self.regression(&self.ops.a_s.matrix, 2, tau)?;
        let g2_zero = normal_moment(&self.steady, &self.ops.a_s.matrix, 2);
        let normalized = values.iter().map(|v| ratio(*v, g2_zero * g2_zero)).collect();
        Ok(CorrelatorPair {
            raw: CorrelationSeries { tau: tau.to_vec(), values, kind: SeriesKind::G2Pairs },
            normalized: CorrelationSeries {
                tau: tau.to_vec(),
                values: normalized,
                kind: SeriesKind::G2PairsNormalized,
            },
        })
    }
}

/// Signal `G⁽²⁾` at the default truncation.
pub fn correlator_g2(params: &SystemParams, tau: &[f64]) -> Result<CorrelatorPair> {
    MasterEquation::with_truncation(*params, DEFAULT_TRUNCATION)?.correlator_g2(tau)
}

/// Pair correlator at the default truncation.
pub fn correlator_g2_pairs(params: &SystemParams, tau: &[f64]) -> Result<CorrelatorPair> {
    MasterEquation::with_truncation(*params, DEFAULT_TRUNCATION)?.correlator_g2_pairs(tau)
}

/// Observables at a base truncation and at twice its photon cutoffs.
#[derive(Clone, Debug)]
pub struct TruncationReport {
    pub base: SteadyObservables,
    pub doubled: SteadyObservables,
    /// Largest relative change over all reported observables.
    pub max_rel_change: f64,
    pub worst_observable: &'static str,
}

pub fn truncation_check(params: &SystemParams, (n_p, n_s): (u32, u32)) -> Result<TruncationReport> {
    let base = MasterEquation::with_truncation(*params, (n_p, n_s))?.observables();
    let doubled = MasterEquation::with_truncation(*params, (2 * n_p, 2 * n_s))?.observables();
    let mut max_rel_change = 0.0;
    let mut worst_observable = "";
    for ((name, a), (_, b)) in base.as_array().into_iter().zip(doubled.as_array()) {
        let scale = a.abs().max(b.abs());
        let rel = if scale > 0.0 { (a - b).abs() / scale } else { 0.0 };
        if rel > max_rel_change || worst_observable.is_empty() {
            max_rel_change = rel;
            worst_observable = name;
        }
    }
    Ok(TruncationReport { base, doubled, max_rel_change, worst_observable })
}
