//! Small dense helpers and the action of a sparse matrix exponential.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{c64, Mat, MatRef};

use crate::{Error, Result};

pub(crate) const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub(crate) const I: c64 = c64 { re: 0.0, im: 1.0 };

pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut v: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            v = v.max(m[(i, j)].norm());
        }
    }
    v
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1(m: MatRef<'_, c64>) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn identity(n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

/// Solves `a x = b` for a single right-hand side by partial-pivoting LU.
pub fn solve(a: MatRef<'_, c64>, b: &[c64]) -> Result<Vec<c64>> {
    let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    let x = a.partial_piv_lu().solve(&rhs);
    let out: Vec<c64> = (0..b.len()).map(|i| x[(i, 0)]).collect();
    if out.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(out)
    } else {
        Err(Error::Singular(format!("{}x{} dense system", a.nrows(), a.ncols())))
    }
}

pub fn matvec(a: MatRef<'_, c64>, x: &[c64]) -> Vec<c64> {
    let mut y = vec![ZERO; a.nrows()];
    for (j, xj) in x.iter().enumerate() {
        if *xj == ZERO {
            continue;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += a[(i, j)] * xj;
        }
    }
    y
}

/// Dense matrix exponential by Taylor scaling and squaring. Meant for the
/// small blocks of the scattering engine.
pub fn expm(a: MatRef<'_, c64>) -> Mat<c64> {
    let n = a.nrows();
    let norm = norm1(a);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(s);
    let b = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let mut sum = identity(n);
    let mut term = identity(n);
    for k in 1..40 {
        term = &term * &b;
        let inv = 1.0 / k as f64;
        for j in 0..n {
            for i in 0..n {
                term[(i, j)] *= inv;
            }
        }
        sum += &term;
        if max_abs(term.as_ref()) <= f64::EPSILON * 1e-2 * max_abs(sum.as_ref()) {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Builds a CSC matrix, summing duplicate entries and dropping exact zeros.
pub fn csc_from_triplets(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize, c64)>) -> SparseColMat<usize, c64> {
    entries.sort_unstable_by_key(|&(i, j, _)| (j, i));
    let mut merged: Vec<Triplet<usize, usize, c64>> = Vec::with_capacity(entries.len());
    for (i, j, v) in entries {
        match merged.last_mut() {
            Some(t) if t.row == i && t.col == j => t.val += v,
            _ => merged.push(Triplet::new(i, j, v)),
        }
    }
    merged.retain(|t| t.val != ZERO);
    SparseColMat::try_new_from_triplets(nrows, ncols, &merged).expect("indices within bounds")
}

/// `y = A x` for a CSC matrix.
pub fn sp_matvec(a: &SparseColMat<usize, c64>, x: &[c64], y: &mut [c64]) {
    y.fill(ZERO);
    let sym = a.symbolic();
    let col_ptr = sym.col_ptr();
    let row_idx = sym.row_idx();
    let val = a.val();
    for (j, xj) in x.iter().enumerate() {
        if *xj == ZERO {
            continue;
        }
        for k in col_ptr[j]..col_ptr[j + 1] {
            y[row_idx[k]] += val[k] * xj;
        }
    }
}

fn inf_norm(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Action of `exp(t A)` on vectors for a sparse generator `A`.
///
/// The generator is shifted by the mean of its diagonal and each step is split
/// into substeps of 1-norm at most `THETA`, on which the Taylor series is
/// summed until the last two terms fall below unit round-off.
#[derive(Clone, Debug)]
pub struct ExpAction {
    shifted: SparseColMat<usize, c64>,
    mu: c64,
    norm1: f64,
}

impl ExpAction {
    const THETA: f64 = 2.0;
    const MAX_TERMS: usize = 60;

    pub fn new(a: &SparseColMat<usize, c64>) -> Self {
        let n = a.nrows();
        let mut entries = Vec::with_capacity(a.compute_nnz() + n);
        let mut trace = ZERO;
        for t in a.triplet_iter() {
            if t.row == t.col {
                trace += *t.val;
            }
            entries.push((t.row, t.col, *t.val));
        }
        let mu = trace / n as f64;
        entries.extend((0..n).map(|i| (i, i, -mu)));
        let shifted = csc_from_triplets(n, n, entries);
        let sym = shifted.symbolic();
        let norm1 = (0..n)
            .map(|j| shifted.val()[sym.col_ptr()[j]..sym.col_ptr()[j + 1]].iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        Self { shifted, mu, norm1 }
    }

    pub fn dim(&self) -> usize {
        self.shifted.nrows()
    }

    /// Overwrites `v` with `exp(t A) v`. `t` must be non-negative.
    pub fn apply(&self, v: &mut [c64], t: f64) {
        assert!(t >= 0.0, "negative propagation time");
        if t == 0.0 {
            return;
        }
        let substeps = ((t * self.norm1) / Self::THETA).ceil().max(1.0) as usize;
        let h = t / substeps as f64;
        let phase = (self.mu * h).exp();
        let n = v.len();
        let mut term = vec![ZERO; n];
        let mut next = vec![ZERO; n];
        for _ in 0..substeps {
            term.copy_from_slice(v);
            let mut prev_norm = f64::INFINITY;
            for k in 1..=Self::MAX_TERMS {
                sp_matvec(&self.shifted, &term, &mut next);
                let c = h / k as f64;
                for (a, b) in term.iter_mut().zip(&next) {
                    *a = b * c;
                }
                for (a, b) in v.iter_mut().zip(&term) {
                    *a += b;
                }
                let tn = inf_norm(&term);
                if tn + prev_norm <= f64::EPSILON * 0.5 * inf_norm(v) {
                    break;
                }
                prev_norm = tn;
            }
            for a in v.iter_mut() {
                *a *= phase;
            }
        }
    }
}

fn norm2(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Action of `exp(t A)` by restarted Arnoldi projection with adaptive steps.
///
/// Each step builds an `m`-dimensional Krylov basis, exponentiates the small
/// Hessenberg matrix and accepts the step when the estimated local error is
/// below `tol` relative to the current vector norm. Steps are not bound by
/// `‖A‖`, so stiff generators whose fast modes have decayed are propagated
/// over long times cheaply.
#[derive(Clone, Debug)]
pub struct KrylovExp {
    a: SparseColMat<usize, c64>,
    m: usize,
    tol: f64,
    /// Step size suggested by the previous call.
    step: f64,
}

impl KrylovExp {
    pub fn new(a: &SparseColMat<usize, c64>) -> Self {
        Self::with_settings(a, 30, 1e-12)
    }

    pub fn with_settings(a: &SparseColMat<usize, c64>, m: usize, tol: f64) -> Self {
        assert!(m >= 2 && tol > 0.0);
        Self { a: a.clone(), m: m.min(a.nrows().max(1)), tol, step: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Overwrites `v` with `exp(t A) v`. `t` must be non-negative.
    pub fn apply(&mut self, v: &mut [c64], t: f64) {
        self.propagate(v, &[t], |_, _| {});
    }

    /// Arnoldi factorization of `A` on the Krylov space of `v / β`. Returns
    /// the orthonormal basis, the Hessenberg matrix, its used size and whether
    /// the space is invariant.
    fn arnoldi(&self, v: &[c64], beta: f64) -> (Vec<Vec<c64>>, Mat<c64>, usize, bool) {
        let n = v.len();
        let mut basis: Vec<Vec<c64>> = Vec::with_capacity(self.m + 1);
        basis.push(v.iter().map(|x| x / beta).collect());
        let mut h = Mat::<c64>::zeros(self.m + 1, self.m);
        let mut w = vec![ZERO; n];
        for j in 0..self.m {
            sp_matvec(&self.a, &basis[j], &mut w);
            // modified Gram-Schmidt, repeated once for stability
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let c: c64 = q.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                    h[(i, j)] += c;
                    for (x, y) in w.iter_mut().zip(q) {
                        *x -= c * y;
                    }
                }
            }
            let nw = norm2(&w);
            if nw <= 1e-14 * h[(j, j)].norm().max(1.0) {
                return (basis, h, j + 1, true);
            }
            h[(j + 1, j)] = c64::new(nw, 0.0);
            basis.push(w.iter().map(|x| x / nw).collect());
        }
        (basis, h, self.m, false)
    }

    /// First column of the exponential of the augmented Hessenberg matrix
    /// scaled by `dt`: the projected solution and, unless the space is
    /// invariant, the local error estimate in the last entry.
    fn projected(h: &Mat<c64>, k: usize, exact: bool, dt: f64) -> (Vec<c64>, f64) {
        let kk = if exact { k } else { k + 1 };
        let big = Mat::from_fn(kk, kk, |i, j| if j < k && i <= k { h[(i, j)] * dt } else { ZERO });
        let e = expm(big.as_ref());
        let err = if exact { 0.0 } else { e[(k, 0)].norm() };
        ((0..k).map(|i| e[(i, 0)]).collect(), err)
    }

    fn combine(basis: &[Vec<c64>], coeffs: &[c64], beta: f64, out: &mut [c64]) {
        out.fill(ZERO);
        for (c, q) in coeffs.iter().zip(basis) {
            let c = c * beta;
            for (x, y) in out.iter_mut().zip(q) {
                *x += c * y;
            }
        }
    }

    /// Propagates `v` through the ascending, non-negative `times` (measured
    /// from the current state), calling `observe(i, exp(times[i] A) v)` for
    /// each. One Krylov basis serves every time inside its accepted step. On
    /// return `v` holds the state at the last time.
    pub fn propagate(&mut self, v: &mut [c64], times: &[f64], mut observe: impl FnMut(usize, &[c64])) {
        assert!(times.first().map_or(true, |&t| t >= 0.0), "negative propagation time");
        assert!(times.windows(2).all(|w| w[1] >= w[0]), "times must be ascending");
        let mut now = 0.0;
        let mut next = 0;
        let mut scratch = vec![ZERO; v.len()];
        while next < times.len() && times[next] <= now {
            observe(next, v);
            next += 1;
        }
        while next < times.len() {
            let beta = norm2(v);
            if beta == 0.0 {
                (next..times.len()).for_each(|i| observe(i, v));
                return;
            }
            let (basis, h, k, exact) = self.arnoldi(v, beta);
            let horizon = times[times.len() - 1] - now;
            let mut dt = if self.step > 0.0 { self.step.min(horizon) } else { horizon };
            let coeffs = loop {
                let (c, err) = Self::projected(&h, k, exact, dt);
                if err <= self.tol || dt <= horizon * 1e-14 {
                    let grow = if err > 0.0 { 0.9 * (self.tol / err).powf(1.0 / k as f64) } else { 4.0 };
                    self.step = dt * grow.clamp(0.2, 4.0);
                    break c;
                }
                dt *= (0.9 * (self.tol / err).powf(1.0 / k as f64)).clamp(0.05, 0.5);
            };
            while next < times.len() && times[next] - now < dt {
                let (c, _) = Self::projected(&h, k, exact, times[next] - now);
                Self::combine(&basis, &c, beta, &mut scratch);
                observe(next, &scratch);
                next += 1;
            }
            Self::combine(&basis, &coeffs, beta, v);
            now += dt;
            while next < times.len() && times[next] <= now {
                observe(next, v);
                next += 1;
            }
        }
    }
}

/// Action of `exp(t A)` for stiff dissipative generators by shift-and-invert
/// Krylov projection.
///
/// The Krylov space is built from `Z = (I − γA)⁻¹`, whose spectrum compresses
/// fast-decaying modes towards zero, and `A` is recovered on it as
/// `(I − H⁻¹)/γ`. The shift `γ` follows the step size on a power-of-two
/// ladder so sparse LU factors are reused across steps. Each accepted step
/// serves every requested time inside it.
pub struct ShiftInvertExp {
    a: SparseColMat<usize, c64>,
    m: usize,
    tol: f64,
    step: f64,
    factors: std::collections::HashMap<i32, faer::sparse::linalg::solvers::Lu<usize, c64>>,
}

impl ShiftInvertExp {
    /// Ratio between the step and the shift `γ`.
    const STEP_PER_SHIFT: f64 = 4.0;

    pub fn new(a: &SparseColMat<usize, c64>) -> Self {
        Self::with_settings(a, 12, 1e-10)
    }

    pub fn with_settings(a: &SparseColMat<usize, c64>, m: usize, tol: f64) -> Self {
        assert!(m >= 4 && tol > 0.0);
        Self { a: a.clone(), m: m.min(a.nrows().max(1)), tol, step: 0.0, factors: Default::default() }
    }

    fn factor(&mut self, level: i32) -> Result<&faer::sparse::linalg::solvers::Lu<usize, c64>> {
        if !self.factors.contains_key(&level) {
            let gamma = 2f64.powi(level);
            let n = self.a.nrows();
            let mut entries: Vec<(usize, usize, c64)> =
                self.a.triplet_iter().map(|t| (t.row, t.col, -*t.val * gamma)).collect();
            entries.extend((0..n).map(|i| (i, i, ONE)));
            let m = csc_from_triplets(n, n, entries);
            let lu = m.sp_lu().map_err(|e| Error::Singular(format!("sparse LU of I − γA: {e:?}")))?;
            self.factors.insert(level, lu);
        }
        Ok(&self.factors[&level])
    }

    /// Basis and projected generator on the shift-and-invert Krylov space of
    /// `v / β`, plus the generator projected on one dimension fewer for the
    /// error estimate.
    fn project(&mut self, v: &[c64], beta: f64, level: i32) -> Result<(Vec<Vec<c64>>, Mat<c64>, Option<Mat<c64>>)> {
        let n = v.len();
        let m = self.m;
        let lu = self.factor(level)?;
        let mut basis: Vec<Vec<c64>> = vec![v.iter().map(|x| x / beta).collect()];
        let mut h = Mat::<c64>::zeros(m + 1, m);
        let mut k = m;
        for j in 0..m {
            let rhs = Mat::from_fn(n, 1, |i, _| basis[j][i]);
            let sol = lu.solve(&rhs);
            let mut w: Vec<c64> = (0..n).map(|i| sol[(i, 0)]).collect();
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let c: c64 = q.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                    h[(i, j)] += c;
                    for (x, y) in w.iter_mut().zip(q) {
                        *x -= c * y;
                    }
                }
            }
            let nw = norm2(&w);
            if nw <= 1e-14 * h[(j, j)].norm().max(1e-300) {
                k = j + 1;
                break;
            }
            h[(j + 1, j)] = c64::new(nw, 0.0);
            basis.push(w.iter().map(|x| x / nw).collect());
        }
        basis.truncate(k);
        let gamma = 2f64.powi(level);
        let generator = |size: usize| -> Result<Mat<c64>> {
            let hm = Mat::from_fn(size, size, |i, j| h[(i, j)]);
            let inv = hm.partial_piv_lu().solve(identity(size));
            if !(0..size).all(|i| (0..size).all(|j| inv[(i, j)].re.is_finite() && inv[(i, j)].im.is_finite())) {
                return Err(Error::Singular("projected shift-and-invert matrix".into()));
            }
            Ok(Mat::from_fn(size, size, |i, j| {
                let id = if i == j { ONE } else { ZERO };
                (id - inv[(i, j)]) / gamma
            }))
        };
        let full = generator(k)?;
        let reduced = if k == m && k > 3 { Some(generator(k - 2)?) } else { None };
        Ok((basis, full, reduced))
    }

    fn coefficients(g: &Mat<c64>, t: f64) -> Vec<c64> {
        let n = g.nrows();
        let e = expm(Mat::from_fn(n, n, |i, j| g[(i, j)] * t).as_ref());
        (0..n).map(|i| e[(i, 0)]).collect()
    }

    /// Overwrites `v` with `exp(t A) v`.
    pub fn apply(&mut self, v: &mut [c64], t: f64) -> Result<()> {
        self.propagate(v, &[t], |_, _| {})
    }

    /// Same contract as [`KrylovExp::propagate`].
    pub fn propagate(&mut self, v: &mut [c64], times: &[f64], mut observe: impl FnMut(usize, &[c64])) -> Result<()> {
        assert!(times.first().map_or(true, |&t| t >= 0.0), "negative propagation time");
        assert!(times.windows(2).all(|w| w[1] >= w[0]), "times must be ascending");
        let mut now = 0.0;
        let mut next = 0;
        let mut scratch = vec![ZERO; v.len()];
        while next < times.len() && times[next] <= now {
            observe(next, v);
            next += 1;
        }
        while next < times.len() {
            let beta = norm2(v);
            if beta == 0.0 {
                (next..times.len()).for_each(|i| observe(i, v));
                return Ok(());
            }
            let horizon = times[times.len() - 1] - now;
            // first step: reach the first requested time
            let mut dt = if self.step > 0.0 { self.step.min(horizon) } else { (times[next] - now).max(horizon * 1e-6) };
            let (basis, g) = loop {
                let level = (dt / Self::STEP_PER_SHIFT).log2().round() as i32;
                let (basis, g, reduced) = self.project(v, beta, level)?;
                let err = match &reduced {
                    None => 0.0,
                    Some(r) => {
                        let a = Self::coefficients(&g, dt);
                        let b = Self::coefficients(r, dt);
                        a.iter().enumerate().map(|(i, x)| (x - b.get(i).copied().unwrap_or(ZERO)).norm_sqr()).sum::<f64>().sqrt()
                    }
                };
                if err <= self.tol || dt <= horizon * 1e-12 {
                    self.step = if err <= 0.1 * self.tol { 2.0 * dt } else { dt };
                    break (basis, g);
                }
                dt *= 0.5;
            };
            while next < times.len() && times[next] - now < dt {
                let c = Self::coefficients(&g, times[next] - now);
                KrylovExp::combine(&basis, &c, beta, &mut scratch);
                observe(next, &scratch);
                next += 1;
            }
            let c = Self::coefficients(&g, dt);
            KrylovExp::combine(&basis, &c, beta, v);
            now += dt;
            while next < times.len() && times[next] <= now {
                observe(next, v);
                next += 1;
            }
        }
        Ok(())
    }
}
