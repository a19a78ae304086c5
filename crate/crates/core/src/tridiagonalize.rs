//! Reduction of a symmetric matrix to its Krylov (tridiagonal) form.
//!
//! Two independent routes are provided: Householder reflections, which are
//! cheap and stable for the full reduction, and the Lanczos three-term
//! recursion with full reorthogonalization, which works from any start
//! vector. From `e₁` both produce the same coefficients; the reflector route
//! can also hand out single Krylov vectors in `O(N²)` without forming the
//! whole basis.

use serde::{Deserialize, Serialize};

use crate::ensembles::{dot, DenseSymmetric};
use crate::error::{Error, Result};

/// Relative breakdown threshold: Lanczos stops once `b < BREAKDOWN_REL * ‖H‖_F`.
pub const BREAKDOWN_REL: f64 = 1e-12;

/// What the first Krylov vector was.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StartVector {
    /// Computational basis vector `e_index` (0-based).
    Basis(usize),
    /// Thermofield-double state at inverse temperature `beta`.
    Thermofield { beta: f64 },
    Custom,
}

/// Orthonormal Krylov vectors `|K_0⟩, |K_1⟩, …`, each stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct KrylovBasis {
    dim: usize,
    data: Vec<f64>,
}

impl KrylovBasis {
    pub fn new(dim: usize) -> Self {
        KrylovBasis { dim, data: Vec::new() }
    }

    pub fn from_vectors(dim: usize, vectors: &[Vec<f64>]) -> Result<Self> {
        let mut b = KrylovBasis::new(dim);
        for v in vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            b.push(v);
        }
        Ok(b)
    }

    pub fn push(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.dim);
        self.data.extend_from_slice(v);
    }

    /// Dimension of the ambient space.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored Krylov vectors.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Largest `|⟨K_i|K_j⟩ - δ_ij|` over all pairs.
    pub fn orthonormality_error(&self) -> f64 {
        let m = self.len();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..=i {
                let d = dot(self.vector(i), self.vector(j));
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((d - target).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreakdownInfo {
    /// Krylov dimension reached before the residual vanished.
    pub dimension: usize,
    pub residual: f64,
}

/// Lanczos coefficients `a_n` (n = 0..m) and `b_n` (n = 1..m), optionally with
/// the Krylov basis in the computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalForm {
    /// Diagonal coefficients `a_0 … a_{m-1}`.
    pub a: Vec<f64>,
    /// Off-diagonal coefficients; `b[n-1]` couples `K_{n-1}` and `K_n`. All `≥ 0`.
    pub b: Vec<f64>,
    pub basis: Option<KrylovBasis>,
    pub start: StartVector,
    /// Set when the Lanczos recursion hit an invariant subspace early.
    pub breakdown: Option<BreakdownInfo>,
}

impl TridiagonalForm {
    /// Builds a form from explicit coefficients.
    pub fn from_coefficients(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::invalid("empty tridiagonal form"));
        }
        if b.len() + 1 != a.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len() - 1,
                got: b.len(),
            });
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tridiagonal coefficients".into()));
        }
        if b.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("off-diagonal coefficients must be non-negative"));
        }
        Ok(TridiagonalForm {
            a,
            b,
            basis: None,
            start: StartVector::Custom,
            breakdown: None,
        })
    }

    /// Krylov dimension `m`.
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// `(x = n/N, b_n)` for `n = 1..N-1`.
    pub fn scaled_profile(&self) -> Vec<(f64, f64)> {
        scaled_profile(self)
    }

    /// `y = T x` for the tridiagonal matrix.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let m = self.len();
        for i in 0..m {
            let mut s = self.a[i] * x[i];
            if i > 0 {
                s += self.b[i - 1] * x[i - 1];
            }
            if i + 1 < m {
                s += self.b[i] * x[i + 1];
            }
            y[i] = s;
        }
    }

    /// Largest deviation of `Kᵀ H K` from the stored coefficients, relative
    /// to `‖H‖_F`. `None` without a basis.
    pub fn projection_error(&self, h: &DenseSymmetric) -> Option<f64> {
        let basis = self.basis.as_ref()?;
        let m = basis.len();
        let n = h.dim();
        let mut hk = vec![0.0; n];
        let mut worst: f64 = 0.0;
        for j in 0..m {
            h.matvec(basis.vector(j), &mut hk);
            for i in 0..m {
                let got = dot(basis.vector(i), &hk);
                let want = if i == j {
                    self.a[i]
                } else if i + 1 == j {
                    self.b[i]
                } else if j + 1 == i {
                    self.b[j]
                } else {
                    0.0
                };
                worst = worst.max((got - want).abs());
            }
        }
        Some(worst / h.frobenius_norm().max(f64::MIN_POSITIVE))
    }
}

/// `(n/N, b_n)` pairs for `n = 1..N-1`.
pub fn scaled_profile(t: &TridiagonalForm) -> Vec<(f64, f64)> {
    let n = t.len() as f64;
    t.b
        .iter()
        .enumerate()
        .map(|(i, &b)| ((i + 1) as f64 / n, b))
        .collect()
}

/// Householder reflectors of a completed reduction.
///
/// `Q = P_0 P_1 ⋯ P_{N-3} · D` where `P_k = I - τ_k v_k v_kᵀ` acts on indices
/// `k+1..N` and `D` is the diagonal sign matrix that makes every `b_n ≥ 0`.
#[derive(Debug, Clone)]
pub struct HouseholderReduction {
    pub form: TridiagonalForm,
    reflectors: Vec<(Vec<f64>, f64)>,
    signs: Vec<f64>,
}

impl HouseholderReduction {
    pub fn dim(&self) -> usize {
        self.signs.len()
    }

    fn apply_reflector(&self, k: usize, x: &mut [f64]) {
        let (v, tau) = &self.reflectors[k];
        if *tau == 0.0 {
            return;
        }
        let tail = &mut x[k + 1..];
        let s = tau * dot(v, tail);
        for (t, vi) in tail.iter_mut().zip(v) {
            *t -= s * vi;
        }
    }

    /// Krylov vector `|K_k⟩` (from `e₁`) in the computational basis, `O(N·k)`.
    pub fn krylov_vector(&self, k: usize) -> Vec<f64> {
        let n = self.dim();
        let mut x = vec![0.0; n];
        x[k] = self.signs[k];
        // only P_j with j < k touch e_k
        for j in (0..k.min(self.reflectors.len())).rev() {
            self.apply_reflector(j, &mut x);
        }
        x
    }

    /// The full orthogonal basis, accumulated backwards over the reflectors.
    pub fn basis(&self) -> KrylovBasis {
        let n = self.dim();
        // Q = P_0(P_1(⋯ P_{N-3} I)), row-major. After P_{N-3}..P_{j+1} the
        // rows j+1.. are nonzero only in columns j+1.., so P_j touches that block.
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = 1.0;
        }
        let mut w = vec![0.0; n];
        for j in (0..self.reflectors.len()).rev() {
            let (v, tau) = &self.reflectors[j];
            if *tau == 0.0 {
                continue;
            }
            let lo = j + 1;
            // w = vᵀ Q[lo.., lo..]
            w[lo..].iter_mut().for_each(|x| *x = 0.0);
            for (r, vr) in v.iter().enumerate() {
                let row = &q[(lo + r) * n + lo..(lo + r + 1) * n];
                for (wc, qc) in w[lo..].iter_mut().zip(row) {
                    *wc += vr * qc;
                }
            }
            for (r, vr) in v.iter().enumerate() {
                let s = tau * vr;
                let row = &mut q[(lo + r) * n + lo..(lo + r + 1) * n];
                for (qc, wc) in row.iter_mut().zip(&w[lo..]) {
                    *qc -= s * wc;
                }
            }
        }
        let mut basis = KrylovBasis::new(n);
        let mut col = vec![0.0; n];
        for k in 0..n {
            for i in 0..n {
                col[i] = q[i * n + k] * self.signs[k];
            }
            basis.push(&col);
        }
        basis
    }
}

/// Householder reduction keeping the reflectors.
pub fn householder_reduce(h: &DenseSymmetric) -> Result<HouseholderReduction> {
    if !h.is_finite() {
        return Err(Error::NonFinite("matrix entries".into()));
    }
    let n = h.dim();
    // working copy; only the lower triangle (j <= i) is read and updated
    let mut w = h.as_slice().to_vec();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        diag[k] = w[k * n + k];
        let m = n - k - 1;
        let mut v: Vec<f64> = (0..m).map(|i| w[(k + 1 + i) * n + k]).collect();
        let tail_sq: f64 = v[1..].iter().map(|x| x * x).sum();
        let x0 = v[0];
        if tail_sq == 0.0 {
            off[k] = x0;
            reflectors.push((v, 0.0));
            continue;
        }
        let norm = (x0 * x0 + tail_sq).sqrt();
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        v[0] = x0 - alpha;
        let vtv = v[0] * v[0] + tail_sq;
        let tau = 2.0 / vtv;
        off[k] = alpha;

        // p = τ A22 v using the lower triangle of A22
        let base = k + 1;
        let p = &mut p[..m];
        p.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..m {
            let row = &w[(base + i) * n + base..(base + i) * n + base + i];
            let vi = v[i];
            let mut acc = 0.0;
            for (j, a) in row.iter().enumerate() {
                acc += a * v[j];
                p[j] += a * vi;
            }
            p[i] += acc + w[(base + i) * n + base + i] * vi;
        }
        for x in p.iter_mut() {
            *x *= tau;
        }
        // w = p - (τ/2)(pᵀv) v ; A22 -= v wᵀ + w vᵀ
        let kappa = 0.5 * tau * dot(p, &v);
        for (pi, vi) in p.iter_mut().zip(&v) {
            *pi -= kappa * vi;
        }
        for i in 0..m {
            let (vi, wi) = (v[i], p[i]);
            let row = &mut w[(base + i) * n + base..(base + i) * n + base + i + 1];
            for (j, a) in row.iter_mut().enumerate() {
                *a -= vi * p[j] + wi * v[j];
            }
        }
        reflectors.push((v, tau));
    }
    if n >= 2 {
        diag[n - 2] = w[(n - 2) * n + n - 2];
        off[n - 2] = w[(n - 1) * n + n - 2];
    }
    diag[n - 1] = w[(n - 1) * n + n - 1];

    let mut signs = vec![1.0; n];
    for k in 0..off.len() {
        signs[k + 1] = if off[k] < 0.0 { -signs[k] } else { signs[k] };
    }
    let b: Vec<f64> = off.iter().map(|x| x.abs()).collect();
    Ok(HouseholderReduction {
        form: TridiagonalForm {
            a: diag,
            b,
            basis: None,
            start: StartVector::Basis(0),
            breakdown: None,
        },
        reflectors,
        signs,
    })
}

/// Householder tridiagonalization with `|K_0⟩ = e₁`.
pub fn householder_tridiagonalize(h: &DenseSymmetric, accumulate_basis: bool) -> Result<TridiagonalForm> {
    let red = householder_reduce(h)?;
    let basis = accumulate_basis.then(|| red.basis());
    let mut form = red.form;
    form.basis = basis;
    Ok(form)
}

/// Lanczos recursion with two-pass classical Gram–Schmidt against every
/// previous Krylov vector.
///
/// Stops after `steps` vectors, or earlier when the residual drops below
/// [`BREAKDOWN_REL`]` · ‖H‖_F`; the early stop is recorded in
/// [`TridiagonalForm::breakdown`].
pub fn lanczos_tridiagonalize(h: &DenseSymmetric, v0: &[f64], steps: usize) -> Result<TridiagonalForm> {
    lanczos_with(h.dim(), h.frobenius_norm(), |x, y| h.matvec(x, y), v0, steps)
}

/// Lanczos on an arbitrary symmetric operator given by `matvec`.
pub fn lanczos_with(
    dim: usize,
    operator_norm: f64,
    mut matvec: impl FnMut(&[f64], &mut [f64]),
    v0: &[f64],
    steps: usize,
) -> Result<TridiagonalForm> {
    if v0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: v0.len(),
        });
    }
    if steps == 0 || steps > dim {
        return Err(Error::invalid(format!("steps must lie in 1..={dim}, got {steps}")));
    }
    if v0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("start vector".into()));
    }
    let norm = dot(v0, v0).sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized { norm });
    }
    let threshold = BREAKDOWN_REL * operator_norm;
    let mut basis = KrylovBasis::new(dim);
    basis.push(v0);
    let mut a = Vec::with_capacity(steps);
    let mut b: Vec<f64> = Vec::with_capacity(steps);
    let mut w = vec![0.0; dim];
    let mut coeffs = Vec::with_capacity(steps);
    let mut breakdown = None;

    for j in 0..steps {
        matvec(basis.vector(j), &mut w);
        let aj = dot(basis.vector(j), &w);
        a.push(aj);
        if j + 1 == steps {
            break;
        }
        for (wi, qi) in w.iter_mut().zip(basis.vector(j)) {
            *wi -= aj * qi;
        }
        if j > 0 {
            let bj = b[j - 1];
            for (wi, qi) in w.iter_mut().zip(basis.vector(j - 1)) {
                *wi -= bj * qi;
            }
        }
        for _pass in 0..2 {
            coeffs.clear();
            coeffs.extend(basis.vectors().map(|q| dot(q, &w)));
            for (q, c) in basis.vectors().zip(&coeffs) {
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let bn = dot(&w, &w).sqrt();
        if bn < threshold {
            breakdown = Some(BreakdownInfo {
                dimension: j + 1,
                residual: bn,
            });
            break;
        }
        b.push(bn);
        let inv = 1.0 / bn;
        let next: Vec<f64> = w.iter().map(|x| x * inv).collect();
        basis.push(&next);
    }
    Ok(TridiagonalForm {
        a,
        b,
        basis: Some(basis),
        start: StartVector::Custom,
        breakdown,
    })
}

/// Ensemble-averaged Lanczos coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleProfile {
    pub n: usize,
    pub realizations: usize,
    pub a_mean: Vec<f64>,
    pub a_stderr: Vec<f64>,
    pub b_mean: Vec<f64>,
    pub b_stderr: Vec<f64>,
}

impl EnsembleProfile {
    /// Averages forms of equal length, in the given order.
    pub fn from_forms<'a>(forms: impl IntoIterator<Item = &'a TridiagonalForm>) -> Result<Self> {
        let mut acc: Option<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = None;
        let mut count = 0usize;
        let mut len = 0;
        for f in forms {
            let (sa, sa2, sb, sb2) = acc.get_or_insert_with(|| {
                len = f.len();
                (vec![0.0; len], vec![0.0; len], vec![0.0; len - 1], vec![0.0; len - 1])
            });
            if f.len() != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    got: f.len(),
                });
            }
            for (i, &x) in f.a.iter().enumerate() {
                sa[i] += x;
                sa2[i] += x * x;
            }
            for (i, &x) in f.b.iter().enumerate() {
                sb[i] += x;
                sb2[i] += x * x;
            }
            count += 1;
        }
        let (sa, sa2, sb, sb2) = acc.ok_or_else(|| Error::invalid("no realizations to average"))?;
        let stats = |s: &[f64], s2: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let c = count as f64;
            s.iter()
                .zip(s2)
                .map(|(&m1, &m2)| {
                    let mean = m1 / c;
                    let var = if count > 1 {
                        ((m2 - c * mean * mean) / (c - 1.0)).max(0.0)
                    } else {
                        0.0
                    };
                    (mean, (var / c).sqrt())
                })
                .unzip()
        };
        let (a_mean, a_stderr) = stats(&sa, &sa2);
        let (b_mean, b_stderr) = stats(&sb, &sb2);
        Ok(EnsembleProfile {
            n: len,
            realizations: count,
            a_mean,
            a_stderr,
            b_mean,
            b_stderr,
        })
    }

    /// `(x, b̄)` pairs, `x = n/N`.
    pub fn profile(&self) -> Vec<(f64, f64)> {
        let n = self.n as f64;
        self.b_mean
            .iter()
            .enumerate()
            .map(|(i, &b)| ((i + 1) as f64 / n, b))
            .collect()
    }

    /// `(x, ā, b̄)` triples for the density-of-states integral.
    pub fn profile_with_a(&self) -> Vec<(f64, f64, f64)> {
        let n = self.n as f64;
        self.b_mean
            .iter()
            .enumerate()
            .map(|(i, &b)| ((i + 1) as f64 / n, self.a_mean[i + 1], b))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{generate_rp, EnsembleConfig, Normalization};

    fn random_symmetric(n: usize, seed: u64) -> DenseSymmetric {
        generate_rp(&EnsembleConfig::new(n, 0.0, Normalization::Standard, seed)).unwrap()
    }

    fn e1(n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        v
    }

    #[test]
    fn two_by_two_is_already_tridiagonal() {
        let h = DenseSymmetric::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let t = householder_tridiagonalize(&h, true).unwrap();
        assert_eq!(t.a, vec![0.0, 0.0]);
        assert_eq!(t.b, vec![1.0]);
    }

    #[test]
    fn tridiagonal_input_is_returned_exactly() {
        let a = [0.3, -1.2, 2.0, 0.7, -0.1];
        let b = [1.5, 0.25, 3.0, 0.5];
        let h = DenseSymmetric::from_upper(5, |i, j| {
            if i == j {
                a[i]
            } else if j == i + 1 {
                b[i]
            } else {
                0.0
            }
        });
        let t = householder_tridiagonalize(&h, false).unwrap();
        assert_eq!(t.a, a);
        assert_eq!(t.b, b);
    }

    #[test]
    fn negative_off_diagonals_absorbed_into_signs() {
        let h = DenseSymmetric::from_upper(4, |i, j| match (i, j) {
            (i, j) if i == j => i as f64,
            (0, 1) => -2.0,
            (1, 2) => 1.0,
            (2, 3) => -0.5,
            _ => 0.0,
        });
        let t = householder_tridiagonalize(&h, true).unwrap();
        assert_eq!(t.b, vec![2.0, 1.0, 0.5]);
        assert!(t.projection_error(&h).unwrap() < 1e-14);
    }

    #[test]
    fn rejects_non_finite() {
        let h = DenseSymmetric::from_upper(3, |i, j| if i == 1 && j == 2 { f64::NAN } else { 1.0 });
        assert!(householder_tridiagonalize(&h, false).is_err());
    }

    #[test]
    fn householder_basis_is_orthonormal_and_reproduces_coefficients() {
        let h = random_symmetric(60, 3);
        let t = householder_tridiagonalize(&h, true).unwrap();
        let basis = t.basis.as_ref().unwrap();
        assert_eq!(basis.vector(0), e1(60).as_slice());
        assert!(basis.orthonormality_error() < 1e-12);
        assert!(t.projection_error(&h).unwrap() < 1e-12);
        assert!(t.b.iter().all(|&b| b >= 0.0));
    }

    #[test]
    fn single_krylov_vectors_match_full_basis() {
        let h = random_symmetric(40, 4);
        let red = householder_reduce(&h).unwrap();
        let basis = red.basis();
        for k in [0, 1, 2, 19, 38, 39] {
            let v = red.krylov_vector(k);
            for (x, y) in v.iter().zip(basis.vector(k)) {
                assert!((x - y).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn lanczos_identity_terminates_at_once() {
        let h = DenseSymmetric::identity(5);
        let mut v0 = vec![1.0; 5];
        let s = (5f64).sqrt();
        v0.iter_mut().for_each(|x| *x /= s);
        let t = lanczos_tridiagonalize(&h, &v0, 5).unwrap();
        assert_eq!(t.len(), 1);
        assert!((t.a[0] - 1.0).abs() < 1e-15);
        assert_eq!(t.breakdown.unwrap().dimension, 1);
    }

    #[test]
    fn lanczos_from_eigenvector_stops() {
        let h = DenseSymmetric::diagonal(&[3.0, -1.0, 0.5, 2.0]);
        let t = lanczos_tridiagonalize(&h, &e1(4), 4).unwrap();
        assert_eq!(t.a, vec![3.0]);
        assert!(t.breakdown.is_some());
    }

    #[test]
    fn lanczos_rejects_unnormalized_start() {
        let h = DenseSymmetric::identity(3);
        let err = lanczos_tridiagonalize(&h, &[1.0, 1.0, 0.0], 3).unwrap_err();
        assert!(matches!(err, Error::NotNormalized { .. }));
        assert!(lanczos_tridiagonalize(&h, &e1(3), 4).is_err());
    }

    #[test]
    fn lanczos_matches_householder_on_6x6() {
        let h = random_symmetric(6, 17);
        let hh = householder_tridiagonalize(&h, false).unwrap();
        let lz = lanczos_tridiagonalize(&h, &e1(6), 6).unwrap();
        for (x, y) in hh.a.iter().zip(&lz.a) {
            assert!((x - y).abs() < 1e-8);
        }
        for (x, y) in hh.b.iter().zip(&lz.b) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn lanczos_stays_orthogonal() {
        let n = 400;
        let h = random_symmetric(n, 5);
        let t = lanczos_tridiagonalize(&h, &e1(n), n).unwrap();
        assert_eq!(t.len(), n);
        assert!(t.basis.as_ref().unwrap().orthonormality_error() < 1e-10);
        assert!(t.projection_error(&h).unwrap() < 1e-8);
    }

    #[test]
    fn lanczos_basis_matches_householder_basis_up_to_roundoff() {
        let n = 30;
        let h = random_symmetric(n, 8);
        let lz = lanczos_tridiagonalize(&h, &e1(n), n).unwrap();
        let red = householder_reduce(&h).unwrap();
        for k in 0..n {
            let v = red.krylov_vector(k);
            for (x, y) in v.iter().zip(lz.basis.as_ref().unwrap().vector(k)) {
                assert!((x - y).abs() < 1e-7, "k = {k}");
            }
        }
    }

    #[test]
    fn profile_grid() {
        let t = TridiagonalForm::from_coefficients(vec![0.0; 4], vec![3.0, 2.0, 1.0]).unwrap();
        assert_eq!(t.scaled_profile(), vec![(0.25, 3.0), (0.5, 2.0), (0.75, 1.0)]);
    }

    #[test]
    fn ensemble_mean_of_a_vanishes() {
        let n = 64;
        let reals = 200;
        let forms: Vec<_> = (0..reals)
            .map(|r| {
                let cfg = EnsembleConfig::new(n, 1.0, Normalization::Standard, 2).with_realization(r);
                householder_tridiagonalize(&generate_rp(&cfg).unwrap(), false).unwrap()
            })
            .collect();
        let p = EnsembleProfile::from_forms(&forms).unwrap();
        let outliers = p
            .a_mean
            .iter()
            .zip(&p.a_stderr)
            .filter(|(m, s)| m.abs() > 3.0 * **s)
            .count();
        // 64 coefficients at 3σ: expect ~0.2 exceedances by chance
        assert!(outliers <= 2, "{outliers} coefficients with |mean| > 3 stderr");
    }
}
