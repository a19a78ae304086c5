//! Inverse participation ratios of Krylov vectors and eigenstates, the
//! Krylov fractal exponent, and eigenstate–Krylov overlaps.

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{dot, generate_rp, EnsembleConfig};
use crate::error::{Error, Result};
use crate::spectral::EigenSystem;
use crate::tridiagonalize::{householder_reduce, KrylovBasis, TridiagonalForm};

const UNIT_TOLERANCE: f64 = 1e-10;

/// `Σ_n |v_n|^{2ℓ}` of a unit vector.
pub fn ipr(v: &[f64], ell: u32) -> Result<f64> {
    if ell == 0 {
        return Err(Error::invalid("moment order must be positive"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("vector".into()));
    }
    let norm = dot(v, v).sqrt();
    if (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::NotNormalized { norm });
    }
    Ok(v.iter().map(|x| (x * x).powi(ell as i32)).sum())
}

/// `IPR^ℓ_K(φ_k)` of the `k`-th Krylov vector.
pub fn krylov_ipr(basis: &KrylovBasis, k: usize, ell: u32) -> Result<f64> {
    if k >= basis.len() {
        return Err(Error::invalid(format!(
            "Krylov index {k} out of range for {} vectors",
            basis.len()
        )));
    }
    ipr(basis.vector(k), ell)
}

/// `Σ_n |s^m_n|^{2ℓ}` of eigenvector `m`.
pub fn eigenstate_ipr(eig: &EigenSystem, m: usize, ell: u32) -> Result<f64> {
    let vectors = eig
        .vectors
        .as_ref()
        .ok_or_else(|| Error::invalid("eigenvectors in the computational basis are absent"))?;
    let v = vectors
        .get(m)
        .ok_or_else(|| Error::invalid(format!("eigenvector index {m} out of range")))?;
    ipr(v, ell)
}

/// Which Krylov vector enters the size scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KRule {
    /// `k = N − 1`.
    LastVector,
    /// `k = N / 2`.
    MidVector,
}

impl KRule {
    pub fn index(&self, n: usize) -> usize {
        match self {
            KRule::LastVector => n - 1,
            KRule::MidVector => n / 2,
        }
    }
}

impl std::str::FromStr for KRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last" | "last-vector" => Ok(KRule::LastVector),
            "mid" | "mid-vector" => Ok(KRule::MidVector),
            _ => Err(Error::invalid(format!("unknown Krylov index rule {s:?}"))),
        }
    }
}

/// Ensemble-mean Krylov IPR at one `(γ, N, k, ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrylovIprRecord {
    pub gamma: f64,
    pub n: usize,
    pub k: usize,
    pub ell: u32,
    pub ipr: f64,
    pub stderr: f64,
    pub realizations: usize,
}

/// Mean `IPR^ℓ_K(φ_k)` over realizations, with the Krylov vector from `e₁`
/// taken from the Householder reflectors in `O(N k)`.
pub fn krylov_ipr_ensemble(cfg: &EnsembleConfig, realizations: usize, k: usize, ell: u32) -> Result<KrylovIprRecord> {
    cfg.validate()?;
    if realizations == 0 {
        return Err(Error::invalid("need at least one realization"));
    }
    if k >= cfg.n {
        return Err(Error::invalid(format!("Krylov index {k} out of range for N = {}", cfg.n)));
    }
    let values: Vec<f64> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let h = generate_rp(&cfg.with_realization(r as u64))?;
            let red = householder_reduce(&h)?;
            ipr(&red.krylov_vector(k), ell)
        })
        .collect::<Result<_>>()?;
    let (mean, stderr) = mean_stderr(&values);
    Ok(KrylovIprRecord {
        gamma: cfg.gamma,
        n: cfg.n,
        k,
        ell,
        ipr: mean,
        stderr,
        realizations,
    })
}

/// Sample mean and its standard error (zero for a single value).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Scaling exponent `IPR²_K ∼ N^(−D₂)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractalExponent {
    pub gamma: f64,
    pub d2: f64,
    pub fit_stderr: f64,
    pub n_grid: Vec<usize>,
}

/// Regression of `ln IPR` on `ln N` over the records selected by `rule`
/// (`ℓ = 2`); `D₂` is minus the slope.
pub fn fit_d2(records: &[KrylovIprRecord], rule: KRule) -> Result<FractalExponent> {
    let mut sel: Vec<&KrylovIprRecord> = records
        .iter()
        .filter(|r| r.ell == 2 && r.k == rule.index(r.n))
        .collect();
    sel.sort_by_key(|r| r.n);
    sel.dedup_by_key(|r| r.n);
    if sel.len() < 3 {
        return Err(Error::invalid(format!(
            "D₂ needs at least 3 system sizes, got {}",
            sel.len()
        )));
    }
    let gamma = sel[0].gamma;
    if sel.iter().any(|r| r.gamma != gamma) {
        return Err(Error::invalid("records mix several γ values"));
    }
    if sel.iter().any(|r| !(r.ipr > 0.0)) {
        return Err(Error::invalid("IPR must be positive"));
    }
    let pts: Vec<(f64, f64)> = sel.iter().map(|r| ((r.n as f64).ln(), r.ipr.ln())).collect();
    let (slope, stderr) = linear_slope(&pts);
    Ok(FractalExponent {
        gamma,
        d2: -slope,
        fit_stderr: stderr,
        n_grid: sel.iter().map(|r| r.n).collect(),
    })
}

/// Ordinary least-squares slope and its standard error.
pub fn linear_slope(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    let slope = sxy / sxx;
    if pts.len() < 3 {
        return (slope, 0.0);
    }
    let rss: f64 = pts.iter().map(|p| (p.1 - ym - slope * (p.0 - xm)).powi(2)).sum();
    (slope, (rss / (n - 2.0) / sxx).sqrt())
}

/// `η^k_m = ⟨ψ_m|K_k⟩` for `k = 0..m` by the forward three-term recursion
/// `b_{k+1} η^{k+1} = (E − a_k) η^k − b_k η^{k−1}`.
///
/// Forward recursion amplifies the dominant solution, so the rounding error
/// in `E` grows by the chain's growth factor `G`. The recursion therefore
/// runs in binary floating point with about `128 + 2·log₂G` bits, and an
/// `e_m` within `1e-10·‖t‖` of an eigenvalue of `t` is first polished to
/// that eigenvalue at the same precision. Other energies are used as given.
/// Prefer [`overlaps_direct`] above `N ≈ 256`.
pub fn overlap_recurrence(t: &TridiagonalForm, e_m: f64, eta0: f64) -> Result<Vec<f64>> {
    if let Some(i) = t.b.iter().position(|&b| !(b > 0.0)) {
        return Err(Error::invalid(format!(
            "b_{} = 0 splits off an invariant subspace",
            i + 1
        )));
    }
    if !e_m.is_finite() || !eta0.is_finite() {
        return Err(Error::NonFinite("overlap recurrence input".into()));
    }
    let chain = PreciseChain::new(t, chain_precision(t, e_m));
    let e = chain.polish(e_m);
    let eta0 = chain.big(eta0);
    Ok(chain.run(&e).iter().map(|x| (x * &eta0).to_f64().value()).collect())
}

type Big = FBig<HalfEven, 2>;

/// Bits needed so that `G`-fold amplification keeps ~128 good bits.
fn chain_precision(t: &TridiagonalForm, e: f64) -> usize {
    // scaled forward run tracking ln max|η^k| with η^0 = 1
    let (mut u, mut v, mut log_scale, mut max_log) = (0.0f64, 1.0f64, 0.0f64, 0.0f64);
    for k in 0..t.len().saturating_sub(1) {
        let prev = if k > 0 { t.b[k - 1] * u } else { 0.0 };
        let w = ((e - t.a[k]) * v - prev) / t.b[k];
        (u, v) = (v, w);
        let s = u.abs().max(v.abs());
        if !(s.is_finite() && s > 0.0) {
            break;
        }
        u /= s;
        v /= s;
        log_scale += s.ln();
        max_log = max_log.max(log_scale);
    }
    (128.0 + 2.0 * max_log / std::f64::consts::LN_2).clamp(128.0, 16384.0) as usize
}

/// The tridiagonal coefficients lifted to a fixed binary precision.
struct PreciseChain {
    bits: usize,
    a: Vec<Big>,
    b: Vec<Big>,
}

impl PreciseChain {
    fn new(t: &TridiagonalForm, bits: usize) -> Self {
        let lift = |v: &[f64]| v.iter().map(|&x| big_with(x, bits)).collect();
        PreciseChain {
            bits,
            a: lift(&t.a),
            b: lift(&t.b),
        }
    }

    fn big(&self, x: f64) -> Big {
        big_with(x, self.bits)
    }

    /// `η^0 = 1, η^1, …, η^{M−1}` at energy `e`.
    fn run(&self, e: &Big) -> Vec<Big> {
        let m = self.a.len();
        let mut eta: Vec<Big> = Vec::with_capacity(m);
        eta.push(self.big(1.0));
        for k in 0..m.saturating_sub(1) {
            let mut next = (e - &self.a[k]) * &eta[k];
            if k > 0 {
                next -= &self.b[k - 1] * &eta[k - 1];
            }
            eta.push(next / &self.b[k]);
        }
        eta
    }

    /// `(E − a_{M−1}) η^{M−1} − b_{M−1} η^{M−2}`, zero exactly at eigenvalues.
    fn residual(&self, e: &Big) -> Big {
        let eta = self.run(e);
        let m = eta.len();
        let mut r = (e - &self.a[m - 1]) * &eta[m - 1];
        if m > 1 {
            r -= &self.b[m - 2] * &eta[m - 2];
        }
        r
    }

    /// Secant iteration on [`Self::residual`] from `e_m`. Returns the root
    /// it converges to when that root lies within `1e-10·‖t‖` of `e_m`, and
    /// `e_m` itself otherwise.
    fn polish(&self, e_m: f64) -> Big {
        let to_f64 = |x: &Big| x.to_f64().value();
        let scale = self.a.iter().map(|x| to_f64(x).abs()).fold(0.0, f64::max)
            + 2.0 * self.b.iter().map(to_f64).fold(0.0, f64::max);
        let start = self.big(e_m);
        if !(scale > 0.0) {
            return start;
        }
        let window = 1e-10 * scale;
        let near = |x: &Big| to_f64(&(x - &start)).abs() <= window;
        let tol = scale * 2f64.powi(-(self.bits.min(1000) as i32 - 8));
        let mut x0 = start.clone();
        let mut x1 = self.big(e_m + 16.0 * f64::EPSILON * scale);
        let mut f0 = self.residual(&x0);
        let mut f1 = self.residual(&x1);
        for _ in 0..64 {
            if f1 == Big::ZERO {
                return if near(&x1) { x1 } else { start };
            }
            let df = &f1 - &f0;
            if df == Big::ZERO || !near(&x1) {
                break;
            }
            let x2 = &x1 - &f1 * (&x1 - &x0) / df;
            let step = to_f64(&(&x2 - &x1)).abs();
            x0 = std::mem::replace(&mut x1, x2);
            f0 = std::mem::replace(&mut f1, self.residual(&x1));
            if step <= tol {
                return if near(&x1) { x1 } else { start };
            }
        }
        start
    }
}

fn big_with(x: f64, bits: usize) -> Big {
    Big::try_from(x).expect("finite input").with_precision(bits).value()
}

/// `η[k][m] = ⟨ψ_m|K_k⟩` by explicit projection of both sets of vectors in
/// the computational basis.
pub fn overlaps_direct(eigenvectors: &[Vec<f64>], basis: &KrylovBasis) -> Result<Vec<Vec<f64>>> {
    if eigenvectors.iter().any(|v| v.len() != basis.dim()) {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: eigenvectors.iter().map(|v| v.len()).find(|&l| l != basis.dim()).unwrap_or(0),
        });
    }
    Ok(basis
        .vectors()
        .map(|k| eigenvectors.iter().map(|v| dot(v, k)).collect())
        .collect())
}

/// `Σ_n |Σ_m η^k_m s^m_n|^{2ℓ}`: the Krylov IPR rebuilt from overlaps and
/// eigenvectors.
pub fn ipr_from_overlaps(eta_k: &[f64], eigenvectors: &[Vec<f64>], ell: u32) -> Result<f64> {
    if eta_k.len() != eigenvectors.len() {
        return Err(Error::DimensionMismatch {
            expected: eigenvectors.len(),
            got: eta_k.len(),
        });
    }
    let n = eigenvectors.first().map_or(0, |v| v.len());
    let mut phi = vec![0.0; n];
    for (e, v) in eta_k.iter().zip(eigenvectors) {
        for (p, x) in phi.iter_mut().zip(v) {
            *p += e * x;
        }
    }
    ipr(&phi, ell)
}

/// `|Σ_m (η^k_m)² − 1|`.
pub fn completeness_defect(eta_k: &[f64]) -> f64 {
    (dot(eta_k, eta_k) - 1.0).abs()
}
