//! Truncated Fock spaces for the pump mode, the signal mode and the four-level
//! emitter, together with the system Hamiltonian and ladder operators.
//!
//! States are labeled `|n_p, n_s, r⟩` with `r ∈ {g, m1, m2, e}`. The charge
//! `C = 2 n_p + n_s + w(r)` (with `w(g) = 0`, `w(m1) = w(m2) = 1`, `w(e) = 2`)
//! commutes with the Hamiltonian, so every Hamiltonian built here is block
//! diagonal in charge.

use std::collections::HashMap;
use std::fmt;

use faer::{c64, Mat};

use crate::{Error, Result};

/// Emitter level, ordered `g < m1 < m2 < e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    G,
    M1,
    M2,
    E,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::G, Level::M1, Level::M2, Level::E];

    /// Contribution of the level to the conserved charge.
    pub fn weight(self) -> u32 {
        match self {
            Level::G => 0,
            Level::M1 | Level::M2 => 1,
            Level::E => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Level::G => "g",
            Level::M1 => "m1",
            Level::M2 => "m2",
            Level::E => "e",
        }
    }
}

/// Product state `|n_p, n_s, level⟩`. The derived ordering is lexicographic on
/// `(n_p, n_s, level)`, which fixes the basis ordering everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    pub n_p: u32,
    pub n_s: u32,
    pub level: Level,
}

impl BasisState {
    pub const fn new(n_p: u32, n_s: u32, level: Level) -> Self {
        Self { n_p, n_s, level }
    }

    pub fn charge(&self) -> u32 {
        2 * self.n_p + self.n_s + self.level.weight()
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{},{}⟩", self.n_p, self.n_s, self.level.label())
    }
}

/// How a basis was truncated. Doubles as the basis identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisMode {
    /// All states with `n_p ≤ n_p_max`, `n_s ≤ n_s_max` and any level.
    Box { n_p_max: u32, n_s_max: u32 },
    /// All states of a fixed charge.
    Charge(u32),
}

impl fmt::Display for BasisMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisMode::Box { n_p_max, n_s_max } => write!(f, "box({n_p_max},{n_s_max})"),
            BasisMode::Charge(c) => write!(f, "charge({c})"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FockBasis {
    mode: BasisMode,
    states: Vec<BasisState>,
    index: HashMap<BasisState, usize>,
}

impl FockBasis {
    pub fn enumerate(mode: BasisMode) -> Self {
        let mut states = Vec::new();
        match mode {
            BasisMode::Box { n_p_max, n_s_max } => {
                for n_p in 0..=n_p_max {
                    for n_s in 0..=n_s_max {
                        for level in Level::ALL {
                            states.push(BasisState::new(n_p, n_s, level));
                        }
                    }
                }
            }
            BasisMode::Charge(c) => {
                for n_p in 0..=c / 2 {
                    for n_s in 0..=c - 2 * n_p {
                        for level in Level::ALL {
                            let s = BasisState::new(n_p, n_s, level);
                            if s.charge() == c {
                                states.push(s);
                            }
                        }
                    }
                }
            }
        }
        states.sort();
        let index = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Self { mode, states, index }
    }

    pub fn boxed(n_p_max: u32, n_s_max: u32) -> Self {
        Self::enumerate(BasisMode::Box { n_p_max, n_s_max })
    }

    pub fn charge(c: u32) -> Self {
        Self::enumerate(BasisMode::Charge(c))
    }

    pub fn mode(&self) -> BasisMode {
        self.mode
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &BasisState) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Largest signal occupation representable in this basis.
    pub fn max_n_s(&self) -> u32 {
        self.states.iter().map(|s| s.n_s).max().unwrap_or(0)
    }

    pub fn id(&self) -> String {
        self.mode.to_string()
    }
}

/// Physical rates and couplings, all in units of the signal decay rate unless
/// the caller chooses otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    pub g_p: f64,
    pub g_s: f64,
    /// Control Rabi frequency Ω_s coupling `m1` and `m2`.
    pub omega_s_drive: f64,
    /// Coherent pump drive amplitude Ω_p.
    pub omega_p_drive: f64,
    pub gamma_p: f64,
    pub gamma_s: f64,
    pub gamma_star: f64,
    /// Detuning of the pump drive from resonance.
    pub k0: f64,
}

impl SystemParams {
    /// Bad-cavity operating point with γ_s = 1: γ_p = 20, g_p = g_s = 0.1,
    /// Ω_p = 0.01, γ* = 0. Ω_s is left at zero.
    pub fn reference() -> Self {
        Self {
            g_p: 0.1,
            g_s: 0.1,
            omega_s_drive: 0.0,
            omega_p_drive: 0.01,
            gamma_p: 20.0,
            gamma_s: 1.0,
            gamma_star: 0.0,
            k0: 0.0,
        }
    }

    pub fn with_omega_s(mut self, omega_s: f64) -> Self {
        self.omega_s_drive = omega_s;
        self
    }

    pub fn with_omega_p(mut self, omega_p: f64) -> Self {
        self.omega_p_drive = omega_p;
        self
    }

    pub fn with_gamma_star(mut self, gamma_star: f64) -> Self {
        self.gamma_star = gamma_star;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.g_p,
            self.g_s,
            self.omega_s_drive,
            self.omega_p_drive,
            self.gamma_p,
            self.gamma_s,
            self.gamma_star,
            self.k0,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite value".into()));
        }
        if self.gamma_p <= 0.0 || self.gamma_s <= 0.0 {
            return Err(Error::InvalidParams("gamma_p and gamma_s must be positive".into()));
        }
        if self.gamma_star < 0.0 {
            return Err(Error::InvalidParams("gamma_star must be non-negative".into()));
        }
        for (name, v) in [
            ("g_p", self.g_p),
            ("g_s", self.g_s),
            ("omega_s_drive", self.omega_s_drive),
            ("omega_p_drive", self.omega_p_drive),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Dense complex matrix bound to the bases it maps between.
#[derive(Clone, Debug)]
pub struct LabeledOperator {
    pub matrix: Mat<c64>,
    pub source: BasisMode,
    pub target: BasisMode,
    pub hermitian: bool,
}

impl LabeledOperator {
    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint().to_owned(),
            source: self.target,
            target: self.source,
            hermitian: self.hermitian,
        }
    }

    /// `max |M − M†|`; meaningful for square operators only.
    pub fn hermiticity_error(&self) -> f64 {
        let m = &self.matrix;
        let mut err: f64 = 0.0;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                err = err.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        err
    }

    pub fn max_abs(&self) -> f64 {
        crate::linalg::max_abs(self.matrix.as_ref())
    }
}

/// Diagonal charge operator `C` on a basis.
pub fn charge_operator(basis: &FockBasis) -> LabeledOperator {
    let n = basis.len();
    let matrix = Mat::from_fn(n, n, |i, j| {
        if i == j {
            c64::new(basis.states()[i].charge() as f64, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    });
    LabeledOperator { matrix, source: basis.mode(), target: basis.mode(), hermitian: true }
}

/// `H_S = g_p a_p†|g⟩⟨e| + Ω_s|m2⟩⟨m1| + g_s a_s†(|m2⟩⟨e| + |g⟩⟨m1|) + H.c.`
///
/// Terms whose image falls outside a box truncation are dropped.
pub fn build_hamiltonian(params: &SystemParams, basis: &FockBasis) -> LabeledOperator {
    let n = basis.len();
    let mut h = Mat::<c64>::zeros(n, n);
    let mut add = |from: usize, to: BasisState, amp: f64| {
        if amp == 0.0 {
            return;
        }
        if let Some(i) = basis.index_of(&to) {
            h[(i, from)] += c64::new(amp, 0.0);
        }
    };
    for (j, s) in basis.states().iter().enumerate() {
        let sqrt_p = ((s.n_p + 1) as f64).sqrt();
        let sqrt_s = ((s.n_s + 1) as f64).sqrt();
        match s.level {
            Level::E => {
                add(j, BasisState::new(s.n_p + 1, s.n_s, Level::G), params.g_p * sqrt_p);
                add(j, BasisState::new(s.n_p, s.n_s + 1, Level::M2), params.g_s * sqrt_s);
            }
            Level::M1 => {
                add(j, BasisState::new(s.n_p, s.n_s, Level::M2), params.omega_s_drive);
                add(j, BasisState::new(s.n_p, s.n_s + 1, Level::G), params.g_s * sqrt_s);
            }
            Level::G | Level::M2 => {}
        }
    }
    let matrix = &h + h.adjoint();
    LabeledOperator { matrix, source: basis.mode(), target: basis.mode(), hermitian: true }
}

fn ladder(from: &FockBasis, to: &FockBasis, lower: impl Fn(&BasisState) -> Option<(BasisState, f64)>) -> LabeledOperator {
    let mut matrix = Mat::<c64>::zeros(to.len(), from.len());
    for (j, s) in from.states().iter().enumerate() {
        if let Some((t, amp)) = lower(s) {
            if let Some(i) = to.index_of(&t) {
                matrix[(i, j)] = c64::new(amp, 0.0);
            }
        }
    }
    LabeledOperator { matrix, source: from.mode(), target: to.mode(), hermitian: false }
}

/// Pump annihilator `a_p` mapping `from` into `to` (pass the same basis twice
/// for a box truncation).
pub fn lower_p(from: &FockBasis, to: &FockBasis) -> LabeledOperator {
    ladder(from, to, |s| {
        (s.n_p > 0).then(|| (BasisState::new(s.n_p - 1, s.n_s, s.level), (s.n_p as f64).sqrt()))
    })
}

/// Signal annihilator `a_s` mapping `from` into `to`.
pub fn lower_s(from: &FockBasis, to: &FockBasis) -> LabeledOperator {
    ladder(from, to, |s| {
        (s.n_s > 0).then(|| (BasisState::new(s.n_p, s.n_s - 1, s.level), (s.n_s as f64).sqrt()))
    })
}

/// Emitter transition `|to⟩⟨from|` acting as identity on both modes.
pub fn transition(basis: &FockBasis, to: Level, from: Level) -> LabeledOperator {
    ladder(basis, basis, |s| {
        (s.level == from).then(|| (BasisState::new(s.n_p, s.n_s, to), 1.0))
    })
    .with_hermitian(to == from)
}

impl LabeledOperator {
    fn with_hermitian(mut self, hermitian: bool) -> Self {
        self.hermitian = hermitian;
        self
    }
}

/// Operators on a box-truncated basis used by the master equation.
#[derive(Clone, Debug)]
pub struct ModeOperators {
    pub a_p: LabeledOperator,
    pub a_s: LabeledOperator,
    /// `|g⟩⟨e|`
    pub sigma_ge: LabeledOperator,
    /// `|e⟩⟨e|`
    pub proj_e: LabeledOperator,
}

impl ModeOperators {
    pub fn new(basis: &FockBasis) -> Self {
        Self {
            a_p: lower_p(basis, basis),
            a_s: lower_s(basis, basis),
            sigma_ge: transition(basis, Level::G, Level::E),
            proj_e: transition(basis, Level::E, Level::E),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(n_p: u32, n_s: u32, l: Level) -> BasisState {
        BasisState::new(n_p, n_s, l)
    }

    #[test]
    fn charge_blocks_match_enumeration() {
        use Level::*;
        let expected: [&[BasisState]; 5] = [
            &[s(0, 0, G)],
            &[s(0, 1, G), s(0, 0, M1), s(0, 0, M2)],
            &[s(1, 0, G), s(0, 2, G), s(0, 0, E), s(0, 1, M1), s(0, 1, M2)],
            &[s(1, 1, G), s(0, 3, G), s(1, 0, M1), s(1, 0, M2), s(0, 1, E), s(0, 2, M1), s(0, 2, M2)],
            &[
                s(2, 0, G),
                s(1, 2, G),
                s(0, 4, G),
                s(0, 2, E),
                s(1, 0, E),
                s(0, 3, M1),
                s(1, 1, M1),
                s(1, 1, M2),
                s(0, 3, M2),
            ],
        ];
        for (c, want) in expected.iter().enumerate() {
            let b = FockBasis::charge(c as u32);
            let mut got = b.states().to_vec();
            let mut want = want.to_vec();
            got.sort();
            want.sort();
            assert_eq!(got, want, "charge {c}");
        }
    }

    #[test]
    fn box_zero_has_one_state_per_level() {
        let b = FockBasis::boxed(0, 0);
        assert_eq!(b.len(), 4);
        assert_eq!(b.len(), FockBasis::boxed(2, 4).len() / 15);
    }

    #[test]
    fn ordering_is_lexicographic() {
        let b = FockBasis::charge(2);
        let order: Vec<String> = b.states().iter().map(|s| s.to_string()).collect();
        assert_eq!(order, ["|0,0,e⟩", "|0,1,m1⟩", "|0,1,m2⟩", "|0,2,g⟩", "|1,0,g⟩"]);
    }

    #[test]
    fn hamiltonian_matrix_elements() {
        let p = SystemParams { g_p: 0.3, g_s: 0.7, omega_s_drive: 1.9, ..SystemParams::reference() };
        let b = FockBasis::boxed(2, 3);
        let h = build_hamiltonian(&p, &b).matrix;
        let ix = |st: BasisState| b.index_of(&st).unwrap();
        assert_eq!(h[(ix(s(1, 0, Level::G)), ix(s(0, 0, Level::E)))].re, 0.3);
        assert_eq!(h[(ix(s(0, 1, Level::M2)), ix(s(0, 0, Level::E)))].re, 0.7);
        assert_eq!(h[(ix(s(0, 0, Level::M2)), ix(s(0, 0, Level::M1)))].re, 1.9);
        // bosonic enhancement on the second signal photon
        let v = h[(ix(s(0, 2, Level::G)), ix(s(0, 1, Level::M1)))].re;
        assert!((v - 0.7 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_couplings_give_zero_matrix() {
        let p = SystemParams { g_p: 0.0, g_s: 0.0, omega_s_drive: 0.0, ..SystemParams::reference() };
        let h = build_hamiltonian(&p, &FockBasis::boxed(2, 4));
        assert_eq!(h.max_abs(), 0.0);
    }

    #[test]
    fn ladder_examples() {
        let b = FockBasis::boxed(1, 3);
        let a_s = lower_s(&b, &b).matrix;
        let ix = |st: BasisState| b.index_of(&st).unwrap();
        assert_eq!(a_s[(ix(s(0, 0, Level::G)), ix(s(0, 1, Level::G)))].re, 1.0);
        assert!((a_s[(ix(s(0, 1, Level::G)), ix(s(0, 2, Level::G)))].re - 2f64.sqrt()).abs() < 1e-15);

        let c2 = FockBasis::charge(2);
        let c0 = FockBasis::charge(0);
        let a_p = lower_p(&c2, &c0).matrix;
        assert_eq!((a_p.nrows(), a_p.ncols()), (1, 5));
        let col = c2.index_of(&s(1, 0, Level::G)).unwrap();
        for j in 0..5 {
            let want = if j == col { 1.0 } else { 0.0 };
            assert_eq!(a_p[(0, j)].re, want);
        }
    }

    #[test]
    fn box_blocks_reproduce_charge_blocks() {
        let p = SystemParams { g_p: 0.37, g_s: 0.21, omega_s_drive: 2.5, ..SystemParams::reference() };
        let big = FockBasis::boxed(3, 6);
        let hb = build_hamiltonian(&p, &big).matrix;
        for c in 0..=4 {
            let cb = FockBasis::charge(c);
            let hc = build_hamiltonian(&p, &cb).matrix;
            for (i, si) in cb.states().iter().enumerate() {
                for (j, sj) in cb.states().iter().enumerate() {
                    let bi = big.index_of(si).unwrap();
                    let bj = big.index_of(sj).unwrap();
                    assert_eq!(hb[(bi, bj)], hc[(i, j)], "charge {c} entry {si} {sj}");
                }
            }
        }
    }

    #[test]
    fn deterministic_enumeration() {
        assert_eq!(FockBasis::boxed(2, 4).states(), FockBasis::boxed(2, 4).states());
        assert_eq!(FockBasis::charge(4).states(), FockBasis::charge(4).states());
    }

    #[test]
    fn validation_rejects_bad_rates() {
        assert!(SystemParams { gamma_p: 0.0, ..SystemParams::reference() }.validate().is_err());
        assert!(SystemParams { gamma_star: -1e-3, ..SystemParams::reference() }.validate().is_err());
        assert!(SystemParams { g_s: -0.1, ..SystemParams::reference() }.validate().is_err());
        assert!(SystemParams::reference().validate().is_ok());
    }

    proptest! {
        #[test]
        fn hamiltonian_commutes_with_charge(
            g_p in 0.0..5.0f64, g_s in 0.0..5.0f64, om in 0.0..50.0f64,
            np in 0u32..3, ns in 0u32..5,
        ) {
            let p = SystemParams { g_p, g_s, omega_s_drive: om, ..SystemParams::reference() };
            let b = FockBasis::boxed(np, ns);
            let h = build_hamiltonian(&p, &b);
            let states = b.states();
            for j in 0..b.len() {
                for i in 0..b.len() {
                    if states[i].charge() != states[j].charge() {
                        prop_assert_eq!(h.matrix[(i, j)], c64::new(0.0, 0.0));
                    }
                }
            }
            prop_assert!(h.hermiticity_error() <= 1e-14 * h.max_abs().max(1.0));
        }
    }
}
