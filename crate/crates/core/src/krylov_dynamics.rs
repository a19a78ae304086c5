//! Krylov-space Schrödinger evolution and spread complexity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::ensembles::{dot, generate_rp, DenseSymmetric, EnsembleConfig};
use crate::error::{Error, Result};
use crate::spectral::eig_tridiagonal;
use crate::tridiagonalize::{householder_tridiagonalize, lanczos_with, StartVector, TridiagonalForm};

/// Default relative margin by which the maximum must exceed the plateau.
pub const DEFAULT_PEAK_THRESHOLD: f64 = 0.02;
/// Largest relative drift across the plateau window of a saturated trace.
pub const SATURATION_TOLERANCE: f64 = 0.02;
/// Confidence level at which an ensemble-mean drift counts as real.
pub const SATURATION_CONFIDENCE: f64 = 0.999;
/// Fraction of the time window, at its end, that defines the plateau.
pub const PLATEAU_FRACTION: f64 = 0.2;
const MIN_PLATEAU_POINTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialStateKind {
    TfdInfiniteTemperature,
    TfdBeta(f64),
    ComputationalBasis(usize),
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    Eigenbasis,
    Computational,
}

/// A normalized initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub kind: InitialStateKind,
    pub representation: Representation,
    pub amplitudes: Vec<f64>,
}

/// Eigenbasis amplitudes `e^(−β E_m / 2) / √Z`.
pub fn tfd_weights(values: &[f64], beta: f64) -> Result<Vec<f64>> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::invalid(format!("beta must be finite and non-negative, got {beta}")));
    }
    if values.is_empty() {
        return Err(Error::invalid("empty spectrum"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spectrum".into()));
    }
    // shifting by the ground energy leaves the normalized state unchanged
    let e0 = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = values.iter().map(|e| (-0.5 * beta * (e - e0)).exp()).collect();
    let norm = dot(&w, &w).sqrt();
    w.iter_mut().for_each(|x| *x /= norm);
    Ok(w)
}

impl InitialState {
    /// TFD state in the eigenbasis of the given spectrum.
    pub fn tfd(values: &[f64], beta: f64) -> Result<Self> {
        Ok(InitialState {
            kind: tfd_kind(beta),
            representation: Representation::Eigenbasis,
            amplitudes: tfd_weights(values, beta)?,
        })
    }
}

fn tfd_kind(beta: f64) -> InitialStateKind {
    if beta == 0.0 {
        InitialStateKind::TfdInfiniteTemperature
    } else {
        InitialStateKind::TfdBeta(beta)
    }
}

/// Krylov spectrum of `H` from its TFD state, computed in the
/// computational basis: the state `Σ_m w_m |ψ_m⟩` is assembled from the
/// eigenvectors and fed to full-reorthogonalization Lanczos.
pub fn build_tfd_krylov(h: &DenseSymmetric, beta: f64) -> Result<(TridiagonalForm, InitialState)> {
    if !(beta >= 0.0) {
        return Err(Error::invalid(format!("beta must be non-negative, got {beta}")));
    }
    let t = householder_tridiagonalize(h, true)?;
    let eig = eig_tridiagonal(&t, true)?;
    let vectors = eig.vectors.as_ref().ok_or_else(|| Error::invalid("eigenvectors unavailable"))?;
    let w = tfd_weights(&eig.values, beta)?;
    let dim = h.dim();
    let mut psi = vec![0.0; dim];
    for (wm, v) in w.iter().zip(vectors) {
        for (p, x) in psi.iter_mut().zip(v) {
            *p += wm * x;
        }
    }
    let norm = dot(&psi, &psi).sqrt();
    psi.iter_mut().for_each(|x| *x /= norm);
    let mut form = lanczos_with(dim, h.frobenius_norm(), |x, y| h.matvec(x, y), &psi, dim)?;
    form.start = StartVector::Thermofield { beta };
    Ok((
        form,
        InitialState {
            kind: tfd_kind(beta),
            representation: Representation::Computational,
            amplitudes: psi,
        },
    ))
}

/// Krylov spectrum of the TFD state from the eigenvalues alone.
///
/// Lanczos runs on `diag(E)` from the weight vector; the coefficients
/// depend only on the spectral measure, so they coincide with
/// [`build_tfd_krylov`]. The returned basis is expressed in the eigenbasis.
pub fn tfd_krylov_from_spectrum(values: &[f64], beta: f64) -> Result<TridiagonalForm> {
    let w = tfd_weights(values, beta)?;
    let norm = dot(values, values).sqrt();
    let mut form = lanczos_with(
        values.len(),
        norm,
        |x, y| {
            for ((yi, xi), e) in y.iter_mut().zip(x).zip(values) {
                *yi = e * xi;
            }
        },
        &w,
        values.len(),
    )?;
    form.start = StartVector::Thermofield { beta };
    Ok(form)
}

/// Evolution `ψ_n(t) = Σ_k M_{nk} e^{−iλ_k t}` in a fixed Krylov space.
#[derive(Debug, Clone)]
pub struct KrylovPropagator {
    lambdas: Vec<f64>,
    /// row `n` holds `M_{nk} = ⟨K_n|φ_k⟩⟨φ_k|ψ₀⟩` over `k`
    modes: Vec<f64>,
    dim: usize,
}

impl KrylovPropagator {
    /// Diagonalizes the tridiagonal matrix and projects `psi0`.
    pub fn new(t: &TridiagonalForm, psi0: &[f64]) -> Result<Self> {
        let m = t.len();
        if psi0.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: psi0.len(),
            });
        }
        check_unit(psi0)?;
        let eig = eig_tridiagonal(t, true)?;
        let u = eig.tridiagonal_vectors.expect("requested eigenvectors");
        let c: Vec<f64> = u.iter().map(|uk| dot(uk, psi0)).collect();
        let mut modes = vec![0.0; m * m];
        for (k, uk) in u.iter().enumerate() {
            for n in 0..m {
                modes[n * m + k] = uk[n] * c[k];
            }
        }
        Ok(KrylovPropagator {
            lambdas: eig.values,
            modes,
            dim: m,
        })
    }

    /// Propagator for `|K₀⟩` when the Krylov basis is known in the
    /// eigenbasis of `H`, as produced by [`tfd_krylov_from_spectrum`]:
    /// `⟨K_n|E_k⟩⟨E_k|K₀⟩` needs no further diagonalization.
    pub fn from_spectral_basis(values: &[f64], t: &TridiagonalForm) -> Result<Self> {
        let basis = t
            .basis
            .as_ref()
            .ok_or_else(|| Error::invalid("tridiagonal form carries no basis"))?;
        if basis.dim() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                got: basis.dim(),
            });
        }
        let m = basis.len();
        let nk = values.len();
        let k0 = basis.vector(0);
        let mut modes = vec![0.0; m * nk];
        for (n, kn) in basis.vectors().enumerate() {
            for k in 0..nk {
                modes[n * nk + k] = kn[k] * k0[k];
            }
        }
        Ok(KrylovPropagator {
            lambdas: values.to_vec(),
            modes,
            dim: m,
        })
    }

    /// Krylov dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(Re ψ, Im ψ)` at time `t`.
    pub fn amplitudes(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let nk = self.lambdas.len();
        let (s, c): (Vec<f64>, Vec<f64>) = self.lambdas.iter().map(|l| (l * t).sin_cos()).unzip();
        let mut re = vec![0.0; self.dim];
        let mut im = vec![0.0; self.dim];
        for n in 0..self.dim {
            let row = &self.modes[n * nk..(n + 1) * nk];
            re[n] = dot(row, &c);
            im[n] = -dot(row, &s);
        }
        (re, im)
    }

    /// `|ψ_n(t)|²`.
    pub fn occupations(&self, t: f64) -> Vec<f64> {
        let (re, im) = self.amplitudes(t);
        re.iter().zip(&im).map(|(a, b)| a * a + b * b).collect()
    }

    /// `K_S(t) = Σ_n n |ψ_n(t)|²` and the unitarity defect `|Σ|ψ_n|² − 1|`.
    pub fn complexity(&self, t: f64) -> (f64, f64) {
        let occ = self.occupations(t);
        let ks = occ.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        let total: f64 = occ.iter().sum();
        (ks, (total - 1.0).abs())
    }

    /// `K_S` on a grid with the worst unitarity defect.
    pub fn complexity_series(&self, times: &[f64]) -> (Vec<f64>, f64) {
        let mut worst: f64 = 0.0;
        let ks = times
            .iter()
            .map(|&t| {
                let (k, d) = self.complexity(t);
                worst = worst.max(d);
                k
            })
            .collect();
        (ks, worst)
    }
}

fn check_unit(v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("initial state".into()));
    }
    let norm = dot(v, v).sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized { norm });
    }
    Ok(())
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::invalid("empty time grid"));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("time grid".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("times must be strictly ascending"));
    }
    Ok(())
}

/// Spread-complexity time series with its peak diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityTrace {
    pub times: Vec<f64>,
    /// `occupations[i][n] = |ψ_n(times[i])|²`; empty for ensemble means.
    pub occupations: Vec<Vec<f64>>,
    pub ks: Vec<f64>,
    pub peak_value: f64,
    pub peak_time: f64,
    pub plateau: f64,
    pub has_peak: bool,
    /// Largest `|Σ|ψ_n|² − 1|` over the stored times.
    pub unitarity_defect: f64,
}

impl ComplexityTrace {
    /// Trace from raw `K_S` values; peak fields use [`DEFAULT_PEAK_THRESHOLD`]
    /// without the saturation test.
    pub fn from_series(times: Vec<f64>, ks: Vec<f64>, occupations: Vec<Vec<f64>>, unitarity_defect: f64) -> Result<Self> {
        check_times(&times)?;
        if ks.len() != times.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: ks.len(),
            });
        }
        let plateau = plateau_mean(&times, &ks);
        let (imax, &kmax) = ks
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        let has_peak = kmax > plateau * (1.0 + DEFAULT_PEAK_THRESHOLD);
        Ok(ComplexityTrace {
            peak_value: if has_peak { kmax } else { plateau },
            peak_time: times[imax],
            times,
            occupations,
            ks,
            plateau,
            has_peak,
            unitarity_defect,
        })
    }

    /// Same trace with `K_S` divided by `scale`.
    pub fn scaled(&self, scale: f64) -> ComplexityTrace {
        ComplexityTrace {
            ks: self.ks.iter().map(|k| k / scale).collect(),
            peak_value: self.peak_value / scale,
            plateau: self.plateau / scale,
            ..self.clone()
        }
    }
}

fn plateau_window(times: &[f64]) -> usize {
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let start = t1 - PLATEAU_FRACTION * (t1 - t0);
    times.partition_point(|&t| t < start)
}

/// Least-squares summary of `K_S` over the plateau window.
struct WindowDrift {
    mean: f64,
    std: f64,
    /// Regression slope times the window span, signed.
    drift: f64,
}

fn window_drift(times: &[f64], ks: &[f64]) -> Result<WindowDrift> {
    let start = plateau_window(times);
    let count = times.len() - start;
    if count < MIN_PLATEAU_POINTS {
        return Err(Error::TraceTooShort(format!(
            "{count} points in the plateau window, need {MIN_PLATEAU_POINTS}"
        )));
    }
    let (tw, kw) = (&times[start..], &ks[start..]);
    let n = count as f64;
    let tm = tw.iter().sum::<f64>() / n;
    let mean = kw.iter().sum::<f64>() / n;
    let sxx: f64 = tw.iter().map(|t| (t - tm) * (t - tm)).sum();
    let sxy: f64 = tw.iter().zip(kw).map(|(t, k)| (t - tm) * (k - mean)).sum();
    let std = (kw.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(WindowDrift {
        mean,
        std,
        drift: sxy / sxx * (tw[count - 1] - tw[0]),
    })
}

fn plateau_mean(times: &[f64], ks: &[f64]) -> f64 {
    let i = plateau_window(times).min(ks.len() - 1);
    let w = &ks[i..];
    w.iter().sum::<f64>() / w.len() as f64
}

/// Exact Krylov evolution of `psi0`.
pub fn propagate(t: &TridiagonalForm, psi0: &[f64], times: &[f64]) -> Result<ComplexityTrace> {
    check_times(times)?;
    let prop = KrylovPropagator::new(t, psi0)?;
    let mut occupations = Vec::with_capacity(times.len());
    let mut ks = Vec::with_capacity(times.len());
    let mut worst: f64 = 0.0;
    for &time in times {
        let occ = prop.occupations(time);
        worst = worst.max((occ.iter().sum::<f64>() - 1.0).abs());
        ks.push(occ.iter().enumerate().map(|(n, p)| n as f64 * p).sum());
        occupations.push(occ);
    }
    ComplexityTrace::from_series(times.to_vec(), ks, occupations, worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSummary {
    pub has_peak: bool,
    pub peak_value: f64,
    pub peak_time: f64,
    pub plateau: f64,
}

/// Peak detection relative to the plateau over the final
/// [`PLATEAU_FRACTION`] of the window.
///
/// The trace must have saturated: the regression drift across the plateau
/// window has to stay below [`SATURATION_TOLERANCE`] of the plateau or below
/// twice the standard deviation of K_S inside the window.
pub fn detect_peak(trace: &ComplexityTrace, threshold: f64) -> Result<PeakSummary> {
    detect_peak_with_noise(trace, threshold, 0.0)
}

/// [`detect_peak`] for an ensemble-mean trace whose plateau-window drift is
/// uncertain by `noise_margin`: drifts within it are attributed to sampling
/// noise, not to unfinished growth.
pub fn detect_peak_with_noise(trace: &ComplexityTrace, threshold: f64, noise_margin: f64) -> Result<PeakSummary> {
    if !(threshold >= 0.0) {
        return Err(Error::invalid(format!("threshold must be non-negative, got {threshold}")));
    }
    if !(noise_margin >= 0.0) {
        return Err(Error::invalid(format!("noise margin must be non-negative, got {noise_margin}")));
    }
    let (times, ks) = (&trace.times, &trace.ks);
    let w = window_drift(times, ks)?;
    let drift = w.drift.abs();
    // fluctuations around the plateau are time-correlated; only a drift that
    // dominates them (a linear ramp has drift ≈ 3.5 std) counts as unsaturated
    if drift > SATURATION_TOLERANCE * w.mean.abs() && drift > 2.0 * w.std && drift > noise_margin {
        return Err(Error::TraceTooShort(format!(
            "K_S still drifts by {drift:.3e} across the plateau window (plateau {:.3e})",
            w.mean
        )));
    }
    let km = w.mean;
    let (imax, &kmax) = ks
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let has_peak = kmax > km * (1.0 + threshold);
    Ok(PeakSummary {
        has_peak,
        peak_value: if has_peak { kmax } else { km },
        peak_time: times[imax],
        plateau: km,
    })
}

/// `t_H = 2π (N − 1) / (E_max − E_min)`, the inverse mean level spacing.
pub fn heisenberg_time(values: &[f64]) -> Result<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.len() < 2 || !(hi > lo) {
        return Err(Error::invalid("spectrum needs two distinct levels"));
    }
    Ok(2.0 * std::f64::consts::PI * (values.len() - 1) as f64 / (hi - lo))
}

/// Shape of the spread-complexity time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGridSpec {
    /// Geometric points from `t_start_factor / b₁` up to `t_H`.
    pub geometric_points: usize,
    /// Linear points from `t_H` to `horizon · t_H`.
    pub linear_points: usize,
    pub t_start_factor: f64,
    pub horizon: f64,
}

impl Default for TimeGridSpec {
    fn default() -> Self {
        TimeGridSpec {
            geometric_points: 300,
            linear_points: 300,
            t_start_factor: 1e-2,
            horizon: 10.0,
        }
    }
}

impl TimeGridSpec {
    pub fn build(&self, b1: f64, t_h: f64) -> Result<Vec<f64>> {
        if !(b1 > 0.0) || !(t_h > 0.0) {
            return Err(Error::invalid("time grid needs b₁ > 0 and t_H > 0"));
        }
        if self.geometric_points < 2 || self.linear_points < 2 || !(self.horizon > 1.0) {
            return Err(Error::invalid("time grid needs at least 2 points per segment and horizon > 1"));
        }
        let t0 = (self.t_start_factor / b1).min(0.5 * t_h);
        let ng = self.geometric_points;
        let mut times: Vec<f64> = vec![0.0];
        let ratio = (t_h / t0).ln() / (ng - 1) as f64;
        times.extend((0..ng).map(|i| t0 * (ratio * i as f64).exp()));
        let nl = self.linear_points;
        let step = (self.horizon - 1.0) * t_h / nl as f64;
        times.extend((1..=nl).map(|i| t_h + step * i as f64));
        times.dedup_by(|a, b| *a <= *b);
        Ok(times)
    }
}

/// Ensemble-mean spread complexity for RP realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadEnsemble {
    pub n: usize,
    pub gamma: f64,
    pub beta: f64,
    pub realizations: usize,
    pub times: Vec<f64>,
    pub ks_mean: Vec<f64>,
    pub ks_stderr: Vec<f64>,
    /// Realizations whose individual trace shows a peak.
    pub has_peak_fraction: f64,
    /// Standard error of the plateau-window drift of `ks_mean`, from the
    /// spread of the per-realization drifts (zero for one realization).
    pub drift_stderr: f64,
    pub unitarity_defect: f64,
}

impl SpreadEnsemble {
    /// Mean trace, without occupations.
    pub fn trace(&self) -> Result<ComplexityTrace> {
        ComplexityTrace::from_series(self.times.clone(), self.ks_mean.clone(), Vec::new(), self.unitarity_defect)
    }

    /// Mean trace in units of `N`.
    pub fn normalized_trace(&self) -> Result<ComplexityTrace> {
        Ok(self.trace()?.scaled(self.n as f64))
    }

    /// Peak summary of the normalized mean trace. The saturation test treats
    /// drifts inside the two-sided [`SATURATION_CONFIDENCE`] Student-t
    /// interval of [`SpreadEnsemble::drift_stderr`] as noise.
    pub fn peak(&self, threshold: f64) -> Result<PeakSummary> {
        let margin = if self.realizations > 1 {
            let t = StudentsT::new(0.0, 1.0, (self.realizations - 1) as f64)
                .map_err(|e| Error::invalid(e.to_string()))?
                .inverse_cdf(0.5 + 0.5 * SATURATION_CONFIDENCE);
            t * self.drift_stderr / self.n as f64
        } else {
            0.0
        };
        detect_peak_with_noise(&self.normalized_trace()?, threshold, margin)
    }
}

/// Spread complexity of the TFD state averaged over realizations
/// `0..realizations` of `cfg`.
///
/// The grid is derived from realization 0 and shared by all realizations;
/// the per-realization traces are reduced in realization order.
pub fn spread_ensemble(cfg: &EnsembleConfig, realizations: usize, beta: f64, grid: &TimeGridSpec) -> Result<SpreadEnsemble> {
    if realizations == 0 {
        return Err(Error::invalid("need at least one realization"));
    }
    let spectrum = |r: usize| -> Result<Vec<f64>> {
        let h = generate_rp(&cfg.with_realization(r as u64))?;
        let t = householder_tridiagonalize(&h, false)?;
        Ok(eig_tridiagonal(&t, false)?.values)
    };
    let first = spectrum(0)?;
    let form0 = tfd_krylov_from_spectrum(&first, beta)?;
    let b1 = form0.b.first().copied().unwrap_or(1.0);
    let times = grid.build(b1, heisenberg_time(&first)?)?;

    let traces: Vec<(Vec<f64>, f64, bool, f64)> = (0..realizations)
        .into_par_iter()
        .map(|r| -> Result<(Vec<f64>, f64, bool, f64)> {
            let values = if r == 0 { first.clone() } else { spectrum(r)? };
            let form = tfd_krylov_from_spectrum(&values, beta)?;
            let prop = KrylovPropagator::from_spectral_basis(&values, &form)?;
            let (ks, defect) = prop.complexity_series(&times);
            let trace = ComplexityTrace::from_series(times.clone(), ks, Vec::new(), defect)?;
            // single traces never average out, so only the peak test applies
            let peak = trace.has_peak;
            // too short a window fails the saturation test of the mean anyway
            let drift = window_drift(&times, &trace.ks).map_or(0.0, |w| w.drift);
            Ok((trace.ks, defect, peak, drift))
        })
        .collect::<Result<_>>()?;

    let m = times.len();
    let (mut s, mut s2) = (vec![0.0; m], vec![0.0; m]);
    let mut defect: f64 = 0.0;
    let mut peaks = 0usize;
    for (ks, d, p, _) in &traces {
        for i in 0..m {
            s[i] += ks[i];
            s2[i] += ks[i] * ks[i];
        }
        defect = defect.max(*d);
        peaks += usize::from(*p);
    }
    let r = realizations as f64;
    let ks_mean: Vec<f64> = s.iter().map(|v| v / r).collect();
    let ks_stderr = s2
        .iter()
        .zip(&ks_mean)
        .map(|(q, mu)| {
            if realizations > 1 {
                ((q - r * mu * mu) / (r - 1.0)).max(0.0).sqrt() / r.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    Ok(SpreadEnsemble {
        n: cfg.n,
        gamma: cfg.gamma,
        beta,
        realizations,
        times,
        ks_mean,
        ks_stderr,
        has_peak_fraction: peaks as f64 / r,
        drift_stderr: crate::krylov_ipr::mean_stderr(&traces.iter().map(|t| t.3).collect::<Vec<_>>()).1,
        unitarity_defect: defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::Normalization;

    #[test]
    fn rabi_oscillation() {
        let t = TridiagonalForm::from_coefficients(vec![0.0, 0.0], vec![1.0]).unwrap();
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let tr = propagate(&t, &[1.0, 0.0], &times).unwrap();
        for (i, &time) in times.iter().enumerate() {
            assert!((tr.occupations[i][0] - time.cos().powi(2)).abs() < 1e-14);
            assert!((tr.ks[i] - time.sin().powi(2)).abs() < 1e-14);
        }
        assert!(tr.unitarity_defect < 1e-14);
    }

    #[test]
    fn identity_evolution() {
        let t = TridiagonalForm::from_coefficients(vec![0.3, -0.2, 0.1], vec![0.5, 0.7]).unwrap();
        let psi0 = [0.6, 0.0, 0.8];
        let tr = propagate(&t, &psi0, &[0.0]).unwrap();
        assert_eq!(tr.ks.len(), 1);
        assert!((tr.occupations[0][0] - 0.36).abs() < 1e-14);
        assert!((tr.occupations[0][2] - 0.64).abs() < 1e-14);
        let tr = propagate(&t, &[1.0, 0.0, 0.0], &[0.0]).unwrap();
        assert!(tr.ks[0].abs() < 1e-14);
    }

    #[test]
    fn input_validation() {
        let t = TridiagonalForm::from_coefficients(vec![0.0, 0.0], vec![1.0]).unwrap();
        assert!(propagate(&t, &[1.0, 0.0, 0.0], &[0.0]).is_err());
        assert!(propagate(&t, &[1.0, 1.0], &[0.0]).is_err());
        assert!(propagate(&t, &[1.0, 0.0], &[1.0, 0.5]).is_err());
        assert!(tfd_weights(&[0.0, 1.0], -1.0).is_err());
    }

    #[test]
    fn energy_is_conserved() {
        let h = generate_rp(&EnsembleConfig::new(60, 1.0, Normalization::Standard, 4)).unwrap();
        let t = householder_tridiagonalize(&h, false).unwrap();
        let mut psi0 = vec![0.0; 60];
        psi0[0] = 1.0;
        let prop = KrylovPropagator::new(&t, &psi0).unwrap();
        let energy = |time: f64| {
            let (re, im) = prop.amplitudes(time);
            let mut y = vec![0.0; 60];
            t.apply(&re, &mut y);
            let mut e = dot(&re, &y);
            t.apply(&im, &mut y);
            e += dot(&im, &y);
            e
        };
        let e0 = energy(0.0);
        for time in [0.5, 3.0, 40.0, 1e3] {
            assert!((energy(time) - e0).abs() < 1e-9);
        }
    }

    #[test]
    fn early_time_is_quadratic() {
        let h = generate_rp(&EnsembleConfig::new(50, 0.0, Normalization::Standard, 8)).unwrap();
        let t = householder_tridiagonalize(&h, false).unwrap();
        let mut psi0 = vec![0.0; 50];
        psi0[0] = 1.0;
        let b1 = t.b[0];
        let times: Vec<f64> = (1..=5).map(|i| i as f64 * 2e-4 / b1).collect();
        let tr = propagate(&t, &psi0, &times).unwrap();
        for (time, ks) in times.iter().zip(&tr.ks) {
            let law = b1 * b1 * time * time;
            assert!((ks - law).abs() < 1e-6 * law, "{ks} vs {law}");
        }
    }

    #[test]
    fn tfd_state_overlaps() {
        let h = generate_rp(&EnsembleConfig::new(4, 0.0, Normalization::Standard, 3)).unwrap();
        let (form, state) = build_tfd_krylov(&h, 0.0).unwrap();
        assert_eq!(state.kind, InitialStateKind::TfdInfiniteTemperature);
        let t = householder_tridiagonalize(&h, true).unwrap();
        let eig = eig_tridiagonal(&t, true).unwrap();
        for v in eig.vectors.unwrap() {
            assert!((dot(&v, &state.amplitudes).abs() - 0.5).abs() < 1e-12);
        }
        assert_eq!(form.len(), 4);
    }

    #[test]
    fn low_temperature_tfd_is_ground_state() {
        let h = generate_rp(&EnsembleConfig::new(12, 0.0, Normalization::Standard, 5)).unwrap();
        let (form, _) = build_tfd_krylov(&h, 1e4).unwrap();
        assert_eq!(form.len(), 1);
        assert!(form.breakdown.is_some());
        let t = householder_tridiagonalize(&h, false).unwrap();
        let e0 = eig_tridiagonal(&t, false).unwrap().values[0];
        assert!((form.a[0] - e0).abs() < 1e-10);
    }

    #[test]
    fn spectral_route_matches_dense_route() {
        let h = generate_rp(&EnsembleConfig::new(40, 1.0, Normalization::Standard, 9)).unwrap();
        let (dense, _) = build_tfd_krylov(&h, 0.7).unwrap();
        let t = householder_tridiagonalize(&h, false).unwrap();
        let values = eig_tridiagonal(&t, false).unwrap().values;
        let spectral = tfd_krylov_from_spectrum(&values, 0.7).unwrap();
        assert_eq!(dense.len(), spectral.len());
        for (x, y) in dense.a.iter().zip(&spectral.a) {
            assert!((x - y).abs() < 1e-8);
        }
        for (x, y) in dense.b.iter().zip(&spectral.b) {
            assert!((x - y).abs() < 1e-8);
        }
        // both propagators give the same complexity
        let mut e0 = vec![0.0; spectral.len()];
        e0[0] = 1.0;
        let direct = KrylovPropagator::new(&spectral, &e0).unwrap();
        let shortcut = KrylovPropagator::from_spectral_basis(&values, &spectral).unwrap();
        for time in [0.1, 2.0, 30.0] {
            assert!((direct.complexity(time).0 - shortcut.complexity(time).0).abs() < 1e-8);
        }
    }

    fn saturating(times: &[f64], bump: f64) -> ComplexityTrace {
        let ks: Vec<f64> = times
            .iter()
            .map(|t| 10.0 * (1.0 - (-t).exp()) + bump * 10.0 * (-(t - 3.0) * (t - 3.0)).exp())
            .collect();
        ComplexityTrace::from_series(times.to_vec(), ks, Vec::new(), 0.0).unwrap()
    }

    #[test]
    fn monotone_trace_has_no_peak() {
        let times: Vec<f64> = (0..500).map(|i| i as f64 * 0.1).collect();
        let tr = saturating(&times, 0.0);
        let p = detect_peak(&tr, DEFAULT_PEAK_THRESHOLD).unwrap();
        assert!(!p.has_peak);
        assert_eq!(p.peak_value, p.plateau);
        assert!((p.plateau - 10.0).abs() < 1e-9);
    }

    #[test]
    fn bump_is_detected() {
        let times: Vec<f64> = (0..500).map(|i| i as f64 * 0.1).collect();
        let p = detect_peak(&saturating(&times, 0.2), DEFAULT_PEAK_THRESHOLD).unwrap();
        assert!(p.has_peak);
        assert!(p.peak_value > 10.0 * 1.05);
    }

    #[test]
    fn unsaturated_trace_is_rejected() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.05).collect();
        assert!(matches!(
            detect_peak(&saturating(&times, 0.0), DEFAULT_PEAK_THRESHOLD),
            Err(Error::TraceTooShort(_))
        ));
        let times = [0.0, 1.0, 2.0];
        assert!(detect_peak(&saturating(&times, 0.0), DEFAULT_PEAK_THRESHOLD).is_err());
    }

    #[test]
    fn noise_margin_excuses_only_small_drifts() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.05).collect();
        let tr = saturating(&times, 0.0);
        assert!(detect_peak_with_noise(&tr, DEFAULT_PEAK_THRESHOLD, 0.1).is_err());
        assert!(detect_peak_with_noise(&tr, DEFAULT_PEAK_THRESHOLD, 1.0).is_ok());
        assert!(detect_peak_with_noise(&tr, DEFAULT_PEAK_THRESHOLD, -1.0).is_err());
    }

    #[test]
    fn small_ensembles_are_saturated() {
        let cfg = EnsembleConfig::new(48, 0.5, Normalization::UnitBandwidth, 3);
        let ens = spread_ensemble(&cfg, 6, 0.0, &TimeGridSpec::default()).unwrap();
        assert!(ens.drift_stderr > 0.0);
        let p = ens.peak(DEFAULT_PEAK_THRESHOLD).unwrap();
        assert!((p.plateau - 0.5 * 47.0 / 48.0).abs() < 0.05);
    }

    #[test]
    fn time_grid_shape() {
        let g = TimeGridSpec::default().build(2.0, 100.0).unwrap();
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 5e-3).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!((g.last().unwrap() - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn small_ensemble_is_unitary_and_reproducible() {
        let cfg = EnsembleConfig::new(40, 0.0, Normalization::UnitBandwidth, 1);
        let spec = TimeGridSpec {
            geometric_points: 40,
            linear_points: 40,
            ..TimeGridSpec::default()
        };
        let a = spread_ensemble(&cfg, 4, 0.0, &spec).unwrap();
        let b = spread_ensemble(&cfg, 4, 0.0, &spec).unwrap();
        assert_eq!(a, b);
        assert!(a.unitarity_defect < 1e-9);
        let tail = a.normalized_trace().unwrap().plateau;
        assert!((tail - 39.0 / 80.0).abs() < 0.05, "{tail}");
    }
}
