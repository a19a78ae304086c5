//! Recursive variance flow of a heteroskedastic Gaussian matrix under
//! successive Householder steps, and the resulting prediction of the
//! Lanczos-coefficient profile.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Entry variances of the active `L × L` block.
///
/// `a` is the variance of the block's first diagonal entry, `c` that of its
/// first row; `b_diag` and `d_off` describe the remaining bulk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceState {
    pub l: usize,
    pub a: f64,
    pub b_diag: f64,
    pub c: f64,
    pub d_off: f64,
}

impl VarianceState {
    /// Homogeneous start `a = b_diag = α`, `c = d_off = β`.
    pub fn initial(n: usize, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !(beta >= 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::invalid(format!(
                "variances must be finite and non-negative, got α = {alpha}, β = {beta}"
            )));
        }
        Ok(VarianceState {
            l: n,
            a: alpha,
            b_diag: alpha,
            c: beta,
            d_off: beta,
        })
    }

    fn is_non_negative(&self) -> bool {
        self.a >= 0.0 && self.b_diag >= 0.0 && self.c >= 0.0 && self.d_off >= 0.0
    }
}

/// Leading-order variances after one Householder-type transformation of an
/// `n`-dimensional block with diagonal variance `alpha` and off-diagonal
/// variance `beta`: `(A, B, C, D)`.
pub fn transformed_variances(alpha: f64, beta: f64, n: f64) -> (f64, f64, f64, f64) {
    let s = alpha - 2.0 * beta;
    (
        2.0 * beta + s / n,
        alpha - 4.0 * s / n,
        beta + 2.0 * s / n,
        beta + 3.0 * s / (n * n),
    )
}

/// One step of the recursion, evaluated with `N = L`.
pub fn step_variances(s: &VarianceState) -> Result<VarianceState> {
    if s.l < 3 {
        return Err(Error::invalid(format!("recursion bottom reached at L = {}", s.l)));
    }
    let (a, b, c, d) = transformed_variances(s.b_diag, s.d_off, s.l as f64);
    Ok(VarianceState {
        l: s.l - 1,
        a,
        b_diag: b,
        c,
        d_off: d,
    })
}

/// Norm of an `L`-component Gaussian vector with per-component variance `σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NakagamiSpec {
    pub l: usize,
    pub sigma2: f64,
}

impl NakagamiSpec {
    pub fn new(l: usize, sigma2: f64) -> Result<Self> {
        if l == 0 || !(sigma2 >= 0.0) {
            return Err(Error::invalid(format!("Nakagami needs L > 0 and σ² >= 0, got L = {l}, σ² = {sigma2}")));
        }
        Ok(NakagamiSpec { l, sigma2 })
    }

    /// `√(2σ²) Γ((L+1)/2) / Γ(L/2)`.
    pub fn mean(&self) -> f64 {
        let l = self.l as f64;
        (2.0 * self.sigma2).sqrt() * (ln_gamma(0.5 * (l + 1.0)) - ln_gamma(0.5 * l)).exp()
    }
}

/// `(x = k/N, ā_k, b̄_k)` for `k = 1..N−1`.
///
/// `b_k` is the Nakagami mean over the `L = N − k` first-row entries with
/// the first-row variance `c` reached after `k − 1` steps; the diagonal
/// means vanish. Negative variances produced by roundoff are clamped and
/// counted in `clamped`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedProfile {
    pub n: usize,
    pub points: Vec<(f64, f64, f64)>,
    pub states: Vec<VarianceState>,
    pub clamped: usize,
}

impl PredictedProfile {
    /// `(x, b)` pairs.
    pub fn b_profile(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|&(x, _, b)| (x, b)).collect()
    }
}

pub fn predict_lanczos_profile(n: usize, alpha: f64, beta: f64) -> Result<PredictedProfile> {
    if n < 3 {
        return Err(Error::invalid(format!("prediction needs N >= 3, got {n}")));
    }
    let mut state = VarianceState::initial(n, alpha, beta)?;
    let mut points = Vec::with_capacity(n - 1);
    let mut states = Vec::with_capacity(n - 1);
    let mut clamped = 0usize;
    for k in 1..n {
        if k > 1 {
            state = step_variances(&state)?;
            if !state.is_non_negative() {
                clamped += 1;
                log::warn!("negative variance at step {k} clamped to zero: {state:?}");
                state.a = state.a.max(0.0);
                state.b_diag = state.b_diag.max(0.0);
                state.c = state.c.max(0.0);
                state.d_off = state.d_off.max(0.0);
            }
        }
        states.push(state);
        let b = NakagamiSpec::new(n - k, state.c)?.mean();
        points.push((k as f64 / n as f64, 0.0, b));
    }
    Ok(PredictedProfile {
        n,
        points,
        states,
        clamped,
    })
}

/// The four moment functions `(ω, μ, ν, ζ)` of the Householder matrix
/// entries, as closed-form `O(N⁻⁴)` expressions.
pub fn householder_moment_sums(n: usize) -> Result<(f64, f64, f64, f64)> {
    if n < 8 {
        return Err(Error::invalid(format!("moment sums need N >= 8, got {n}")));
    }
    let nf = n as f64;
    let r = nf.sqrt();
    let n2 = nf * nf;
    let n3 = n2 * nf;
    let n4 = n2 * n2;
    let omega = (4.0 * nf * r + n3 - 12.0 * nf + 16.0 * r - 81.0) / n4;
    let mu = (nf * r - 5.0 * n2 * r - 4.0 * n3 * r - 4.0 * n3 - 12.0 * n2 - 28.0 * nf + 65.0 * r - 46.0) / (n4 * r);
    let nu = (2.0 * nf * r + n3 - 8.0 * nf + 10.0 * r - 48.0) / n4;
    let zeta = (11.0 * nf * r + 3.0 * n2 * r + 4.0 * n2 + 28.0 * nf + 31.0 * r + 150.0) / (n4 * r);
    Ok((omega, mu, nu, zeta))
}

/// Sample estimates matching [`householder_moment_sums`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HouseholderMoments {
    pub n: usize,
    pub samples: usize,
    /// `Σ_l M⁴_{l1}`.
    pub omega: MomentEstimate,
    /// `Σ_l M⁴_{li} − 1`, `i ≠ 1`.
    pub mu: MomentEstimate,
    /// `Σ_l M²_{l1} M²_{lj}`, `j ≠ 1`.
    pub nu: MomentEstimate,
    /// `Σ_l M²_{li} M²_{lj}`, `i ≠ j`, both `≠ 1`.
    pub zeta: MomentEstimate,
}

/// Householder matrix `M = I − 2uuᵀ/(uᵀu)`, `u = v − ‖v‖e₁`, so that
/// `M v = ‖v‖ e₁`. Row-major.
pub fn householder_matrix(v: &[f64]) -> Result<Vec<f64>> {
    let n = v.len();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::invalid("Householder vector must be non-zero"));
    }
    let mut u = v.to_vec();
    u[0] -= norm;
    let uu: f64 = u.iter().map(|x| x * x).sum();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            m[i * n + j] = if uu > 0.0 { delta - 2.0 * u[i] * u[j] / uu } else { delta };
        }
    }
    Ok(m)
}

/// Monte-Carlo moments of Householder matrices built from Gaussian `v`.
/// Each matrix contributes the average over its bulk columns (and column
/// pairs) as one sample.
pub fn empirical_householder_moments(n: usize, samples: usize, seed: u64) -> Result<HouseholderMoments> {
    if n < 3 || samples < 2 {
        return Err(Error::invalid("need N >= 3 and at least 2 samples"));
    }
    let mut vals: [Vec<f64>; 4] = Default::default();
    for s in 0..samples {
        let mut rng = Stream::new(seed, s as u64);
        let v: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let m = householder_matrix(&v)?;
        let col_sq = |i: usize| -> Vec<f64> { (0..n).map(|l| m[l * n + i] * m[l * n + i]).collect() };
        let cols: Vec<Vec<f64>> = (0..n).map(col_sq).collect();
        let pair = |i: usize, j: usize| -> f64 { cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum() };
        vals[0].push(pair(0, 0));
        vals[1].push((1..n).map(|i| pair(i, i) - 1.0).sum::<f64>() / (n - 1) as f64);
        vals[2].push((1..n).map(|j| pair(0, j)).sum::<f64>() / (n - 1) as f64);
        let mut z = 0.0;
        let mut count = 0usize;
        for i in 1..n {
            for j in (i + 1)..n {
                z += pair(i, j);
                count += 1;
            }
        }
        vals[3].push(z / count.max(1) as f64);
    }
    let est = |v: &[f64]| {
        let (mean, stderr) = crate::krylov_ipr::mean_stderr(v);
        MomentEstimate { mean, stderr }
    };
    Ok(HouseholderMoments {
        n,
        samples,
        omega: est(&vals[0]),
        mu: est(&vals[1]),
        nu: est(&vals[2]),
        zeta: est(&vals[3]),
    })
}

/// One row of a predicted-versus-empirical overlay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlayRow {
    pub x: f64,
    pub b_predicted: f64,
    pub b_empirical: f64,
    pub rel_error: f64,
}

/// Pairs two profiles sampled on the same `x` grid.
pub fn overlay(predicted: &[(f64, f64)], empirical: &[(f64, f64)]) -> Result<Vec<OverlayRow>> {
    if predicted.len() != empirical.len() {
        return Err(Error::DimensionMismatch {
            expected: predicted.len(),
            got: empirical.len(),
        });
    }
    predicted
        .iter()
        .zip(empirical)
        .map(|(&(x, bp), &(xe, be))| {
            if (x - xe).abs() > 1e-12 {
                return Err(Error::invalid(format!("grids differ at x = {x} vs {xe}")));
            }
            Ok(OverlayRow {
                x,
                b_predicted: bp,
                b_empirical: be,
                rel_error: if be != 0.0 { (bp - be) / be } else { f64::INFINITY },
            })
        })
        .collect()
}

/// Jarque–Bera statistic and its asymptotic χ²₂ p-value `e^(−JB/2)`.
pub fn jarque_bera(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 8 {
        return Err(Error::invalid("Jarque–Bera needs at least 8 samples"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if !(m2 > 0.0) {
        return Err(Error::invalid("samples have zero variance"));
    }
    let m3 = samples.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2);
    let jb = n / 6.0 * (skew * skew + 0.25 * (kurt - 3.0).powi(2));
    Ok((jb, (-0.5 * jb).exp()))
}
