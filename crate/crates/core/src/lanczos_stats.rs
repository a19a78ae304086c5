//! Analytic profiles for the Lanczos coefficients, their fits and the
//! log-variance diagnostic.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::lsq::{levenberg_marquardt, LsqOptions};
use crate::tridiagonalize::TridiagonalForm;

/// Below this `|1 − q|` the q-logarithm is the natural logarithm.
pub const Q_LOG_LIMIT: f64 = 1e-8;

/// `ln_q x = (x^(1−q) − 1) / (1 − q)`.
pub fn q_log(x: f64, q: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_nan() {
        return Err(Error::invalid(format!("q-logarithm needs x > 0, got {x}")));
    }
    let u = 1.0 - q;
    let l = x.ln();
    if u.abs() < Q_LOG_LIMIT {
        return Ok(l);
    }
    Ok((u * l).exp_m1() / u)
}

/// `(ln_q x, ∂ ln_q x / ∂q)`, stable through `q = 1`.
fn q_log_and_dq(l: f64, q: f64) -> (f64, f64) {
    let u = 1.0 - q;
    let t = u * l;
    if t.abs() < 1e-2 {
        // ln_q x = Σ_{k≥1} l^k u^{k-1} / k!
        let (mut value, mut du) = (0.0, 0.0);
        let mut term = l; // l^k u^{k-1} / k!
        for k in 1..12 {
            value += term;
            if k >= 2 {
                du += (k - 1) as f64 * term / u_or_one(u);
            }
            term *= t / (k + 1) as f64;
        }
        if u == 0.0 {
            du = l * l / 2.0;
        }
        (value, -du)
    } else {
        let e = t.exp_m1();
        let value = e / u;
        let du = (l * (e + 1.0) * u - e) / (u * u);
        (value, -du)
    }
}

fn u_or_one(u: f64) -> f64 {
    if u == 0.0 {
        1.0
    } else {
        u
    }
}

/// Continuous shifted binomial `bin(g, d) = 2^(−d) Γ(d+1) / (Γ(d(½−g)+1) Γ(d(½+g)+1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialKernel {
    pub d: f64,
}

impl BinomialKernel {
    pub fn new(d: f64) -> Result<Self> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::invalid(format!("binomial order must be positive, got {d}")));
        }
        Ok(BinomialKernel { d })
    }

    /// Kernel with `d = log₂ N`.
    pub fn for_dimension(n: usize) -> Result<Self> {
        Self::new((n as f64).log2())
    }

    pub fn bin(&self, g: f64) -> Result<f64> {
        if !(g.abs() <= 0.5) {
            return Err(Error::invalid(format!("bin needs |g| <= 1/2, got {g}")));
        }
        let d = self.d;
        let log = -d * std::f64::consts::LN_2 + ln_gamma(d + 1.0)
            - ln_gamma(d * (0.5 - g) + 1.0)
            - ln_gamma(d * (0.5 + g) + 1.0);
        Ok(log.exp())
    }

    /// Non-negative branch of the inverse of `bin`.
    pub fn nib(&self, x: f64) -> Result<f64> {
        let top = self.bin(0.0)?;
        let bottom = self.bin(0.5)?;
        if !(x > 0.0) {
            return Err(Error::OutOfRegime(format!(
                "nib is ill-defined at the origin (x = {x})"
            )));
        }
        if x > top * (1.0 + 1e-14) || x < bottom * (1.0 - 1e-14) {
            return Err(Error::OutOfRegime(format!(
                "x = {x} outside the range [{bottom}, {top}] of bin"
            )));
        }
        if x >= top {
            return Ok(0.0);
        }
        if x <= bottom {
            return Ok(0.5);
        }
        // bin is decreasing on [0, 1/2]
        let (mut lo, mut hi) = (0.0f64, 0.5f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.bin(mid)? > x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Inverse of the peak-normalized kernel `bin(g, d) / bin(0, d)`, the
    /// form whose small-argument behaviour is `g ≈ sqrt(−ln x / 2d)`.
    pub fn nib_normalized(&self, x: f64) -> Result<f64> {
        let top = self.bin(0.0)?;
        self.nib(x * top)
    }
}

/// Analytic families fitted to `b(x)²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnsatzForm {
    /// `b² = −p ln_q x`.
    QLog,
    /// `b² = p (1 − x) − q ln x`.
    Superposition,
}

impl std::fmt::Display for AnsatzForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AnsatzForm::QLog => "q-log",
            AnsatzForm::Superposition => "superposition",
        })
    }
}

impl std::str::FromStr for AnsatzForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q-log" | "qlog" => Ok(AnsatzForm::QLog),
            "superposition" => Ok(AnsatzForm::Superposition),
            _ => Err(Error::invalid(format!("unknown ansatz form {s:?}"))),
        }
    }
}

impl AnsatzForm {
    /// Model value of the scaled `b²` at `x`.
    pub fn evaluate(&self, p: f64, q: f64, x: f64) -> Result<f64> {
        match self {
            AnsatzForm::QLog => Ok(-p * q_log(x, q)?),
            AnsatzForm::Superposition => {
                if !(x > 0.0) {
                    return Err(Error::invalid(format!("superposition ansatz needs x > 0, got {x}")));
                }
                Ok(p * (1.0 - x) - q * x.ln())
            }
        }
    }
}

/// Sanity bounds on the fitted `q` of the q-log form.
pub const Q_BOUNDS: (f64, f64) = (-0.2, 1.05);
/// Fixed optimizer start `(p, q)`.
pub const FIT_START: (f64, f64) = (1.0, 0.5);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzFit {
    pub form: AnsatzForm,
    pub p: f64,
    pub q: f64,
    pub dp: f64,
    pub dq: f64,
    pub epsilon: f64,
    pub x_min: f64,
    /// `b²` was divided by this before fitting.
    pub scale: f64,
}

/// Default fit-domain cutoff for dimension `n`.
pub fn default_x_min(n: usize) -> f64 {
    2.0 / n as f64
}

/// Fits `b(x)² / scale` with `scale = max b²` over the retained points
/// `x ≥ x_min`, starting from [`FIT_START`].
pub fn fit_ansatz(profile: &[(f64, f64)], form: AnsatzForm, x_min: f64) -> Result<AnsatzFit> {
    fit_ansatz_with(profile, form, x_min, None)
}

/// As [`fit_ansatz`], optionally holding `q` fixed.
pub fn fit_ansatz_with(profile: &[(f64, f64)], form: AnsatzForm, x_min: f64, fixed_q: Option<f64>) -> Result<AnsatzFit> {
    if profile.iter().any(|(x, b)| !x.is_finite() || !b.is_finite()) {
        return Err(Error::NonFinite("Lanczos profile".into()));
    }
    let pts: Vec<(f64, f64)> = profile
        .iter()
        .filter(|(x, _)| *x >= x_min && *x > 0.0)
        .map(|&(x, b)| (x, b * b))
        .collect();
    if pts.len() < 10 {
        return Err(Error::invalid(format!(
            "need at least 10 profile points with x >= {x_min}, got {}",
            pts.len()
        )));
    }
    let scale = pts.iter().map(|p| p.1).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::invalid("profile is identically zero"));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1 / scale).collect();
    let m = xs.len();
    let n_params = if fixed_q.is_some() { 1 } else { 2 };
    let (lower, upper) = match form {
        AnsatzForm::QLog => (vec![1e-12, Q_BOUNDS.0], vec![f64::INFINITY, Q_BOUNDS.1]),
        AnsatzForm::Superposition => (vec![f64::NEG_INFINITY; 2], vec![f64::INFINITY; 2]),
    };
    let opts = LsqOptions {
        lower: Some(lower[..n_params].to_vec()),
        upper: Some(upper[..n_params].to_vec()),
        ..LsqOptions::default()
    };
    let start = match fixed_q {
        Some(_) => vec![FIT_START.0],
        None => vec![FIT_START.0, FIT_START.1],
    };
    let sol = levenberg_marquardt(
        |params, r, jac| {
            let p = params[0];
            let q = fixed_q.unwrap_or_else(|| params[1]);
            for i in 0..m {
                let l = xs[i];
                let (f, dfp, dfq) = match form {
                    AnsatzForm::QLog => {
                        let (lq, dlq) = q_log_and_dq(l, q);
                        (-p * lq, -lq, -p * dlq)
                    }
                    AnsatzForm::Superposition => {
                        let x = l.exp();
                        (p * (1.0 - x) - q * l, 1.0 - x, -l)
                    }
                };
                r[i] = f - ys[i];
                jac[i * n_params] = dfp;
                if n_params == 2 {
                    jac[i * 2 + 1] = dfq;
                }
            }
        },
        &start,
        m,
        &opts,
    )?;
    let p = sol.params[0];
    let (q, dq) = match fixed_q {
        Some(q) => (q, 0.0),
        None => (sol.params[1], sol.covariance[1][1].max(0.0)),
    };
    let dp = sol.covariance[0][0].max(0.0);
    let epsilon = epsilon_formula(p, q, dp, dq)?;
    Ok(AnsatzFit {
        form,
        p,
        q,
        dp,
        dq,
        epsilon,
        x_min,
        scale,
    })
}

/// Relative goodness of fit in percent,
/// `√(Δp + Δq)·10² / (min(|p−1|, |q−1|) + 1)`.
pub fn goodness_epsilon(fit: &AnsatzFit) -> Result<f64> {
    epsilon_formula(fit.p, fit.q, fit.dp, fit.dq)
}

fn epsilon_formula(p: f64, q: f64, dp: f64, dq: f64) -> Result<f64> {
    let denom = (p - 1.0).abs().min((q - 1.0).abs()) + 1.0;
    if !(denom > 0.0) || !(dp >= 0.0 && dq >= 0.0) {
        return Err(Error::OutOfRegime(format!(
            "goodness of fit undefined for p = {p}, q = {q}, dp = {dp}, dq = {dq}"
        )));
    }
    Ok((dp + dq).sqrt() * 100.0 / denom)
}

/// Calibration of the Gaussian-limit profile `b = sqrt(−ξ²/2 · ln x)`
/// against the position of the profile maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiCalibration {
    pub xi: f64,
    pub x_star: f64,
}

/// `ξ` such that the Gaussian-limit profile, in units of the maximum of
/// `b`, equals 1 at the maximizing `x*` among points with `x ≥ x_min`.
pub fn calibrate_xi(profile: &[(f64, f64)], x_min: f64) -> Result<XiCalibration> {
    let &(x_star, _) = profile
        .iter()
        .filter(|(x, b)| *x >= x_min && *x > 0.0 && b.is_finite())
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::invalid("no profile points above x_min"))?;
    if x_star >= 1.0 {
        return Err(Error::OutOfRegime("profile maximum at x = 1".into()));
    }
    Ok(XiCalibration {
        xi: (2.0 / -x_star.ln()).sqrt(),
        x_star,
    })
}

/// Sample variance over `j` of `ln(b_{2j−1} / b_{2j})`.
pub fn log_variance(t: &TridiagonalForm) -> Result<f64> {
    if let Some(i) = t.b.iter().position(|&b| !(b > 0.0)) {
        return Err(Error::invalid(format!("b_{} = {} is not positive", i + 1, t.b[i])));
    }
    let logs: Vec<f64> = t.b.chunks_exact(2).map(|c| (c[0] / c[1]).ln()).collect();
    if logs.len() < 2 {
        return Err(Error::TraceTooShort(format!(
            "log-variance needs at least 4 coefficients, got {}",
            t.b.len()
        )));
    }
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    Ok(logs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// `1 < γ ≤ 2`.
    Fractal,
    /// `γ > 2`.
    Localized,
}

impl Phase {
    pub fn of(gamma: f64) -> Option<Phase> {
        if gamma > 2.0 {
            Some(Phase::Localized)
        } else if gamma > 1.0 {
            Some(Phase::Fractal)
        } else {
            None
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Fractal => "fractal",
            Phase::Localized => "localized",
        })
    }
}

/// `σ_b(γ) = a γ^n + c` within one phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub phase: Phase,
    pub n_dim: usize,
    pub a: f64,
    pub n: f64,
    pub c: f64,
}

/// Minimum number of points a phase needs to be fitted.
pub const MIN_POWERLAW_POINTS: usize = 5;

/// Fits the power law separately in every phase that has at least
/// [`MIN_POWERLAW_POINTS`] points; phases with fewer are skipped.
pub fn fit_logvar_powerlaw(points: &[(f64, f64)], n_dim: usize) -> Result<Vec<PowerLawFit>> {
    let mut out = Vec::new();
    for phase in [Phase::Fractal, Phase::Localized] {
        let pts: Vec<(f64, f64)> = points
            .iter()
            .copied()
            .filter(|(g, _)| Phase::of(*g) == Some(phase))
            .collect();
        if pts.len() < MIN_POWERLAW_POINTS {
            continue;
        }
        let (a, n, c) = fit_power_law(&pts)?;
        out.push(PowerLawFit {
            phase,
            n_dim,
            a,
            n,
            c,
        });
    }
    if out.is_empty() {
        return Err(Error::invalid(format!(
            "no phase has at least {MIN_POWERLAW_POINTS} points"
        )));
    }
    Ok(out)
}

/// `y = a x^n + c` by exponent scan and refinement.
pub fn fit_power_law(pts: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if pts.iter().any(|(x, y)| !(*x > 0.0) || !y.is_finite()) {
        return Err(Error::invalid("power-law fit needs x > 0 and finite y"));
    }
    // for fixed n the model is linear in (a, c)
    let linear = |n: f64| -> (f64, f64, f64) {
        let m = pts.len() as f64;
        let (mut su, mut sy, mut suu, mut suy) = (0.0, 0.0, 0.0, 0.0);
        for &(x, y) in pts {
            let u = x.powf(n);
            su += u;
            sy += y;
            suu += u * u;
            suy += u * y;
        }
        let det = m * suu - su * su;
        if det.abs() < 1e-300 {
            return (0.0, sy / m, f64::INFINITY);
        }
        let a = (m * suy - su * sy) / det;
        let c = (sy - a * su) / m;
        let rss = pts.iter().map(|&(x, y)| (a * x.powf(n) + c - y).powi(2)).sum();
        (a, c, rss)
    };
    let (mut best_n, mut best) = (1.0, linear(1.0));
    for k in 1..=160 {
        let n = -8.0 + 0.1 * k as f64;
        let cand = linear(n);
        if cand.2 < best.2 {
            best = cand;
            best_n = n;
        }
    }
    let sol = levenberg_marquardt(
        |p, r, jac| {
            for (i, &(x, y)) in pts.iter().enumerate() {
                let u = x.powf(p[1]);
                r[i] = p[0] * u + p[2] - y;
                jac[3 * i] = u;
                jac[3 * i + 1] = p[0] * u * x.ln();
                jac[3 * i + 2] = 1.0;
            }
        },
        &[best.0, best_n, best.1],
        pts.len(),
        &LsqOptions::default(),
    )?;
    Ok((sol.params[0], sol.params[1], sol.params[2]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_log_values() {
        for q in [-0.2, 0.0, 0.3, 1.0, 1.05] {
            assert_eq!(q_log(1.0, q).unwrap(), 0.0);
        }
        assert!((q_log(0.5, 1.0).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        assert!((q_log(0.5, 1.0 - 1e-9).unwrap() - 0.5f64.ln()).abs() < 1e-9);
        assert!((q_log(0.25, 0.0).unwrap() + 0.75).abs() < 1e-15);
        assert!(q_log(0.0, 0.5).is_err());
        assert!(q_log(-1.0, 0.5).is_err());
    }

    #[test]
    fn q_derivative_matches_finite_difference() {
        for &x in &[1e-3, 0.1, 0.7] {
            let l: f64 = f64::ln(x);
            for q in [-0.1, 0.4, 0.995, 1.0, 1.02] {
                let (v, d) = q_log_and_dq(l, q);
                let h = 1e-6;
                let (vp, _) = q_log_and_dq(l, q + h);
                let (vm, _) = q_log_and_dq(l, q - h);
                assert!((v - q_log(x, q).unwrap()).abs() < 1e-12 * (1.0 + v.abs()));
                let fd = (vp - vm) / (2.0 * h);
                assert!((d - fd).abs() < 1e-6 * (1.0 + fd.abs()), "x={x} q={q}: {d} vs {fd}");
            }
        }
    }

    #[test]
    fn binomial_kernel() {
        let k = BinomialKernel::new(12.0).unwrap();
        let b0 = k.bin(0.0).unwrap();
        // 2^-12 C(12, 6)
        assert!((b0 - 924.0 / 4096.0).abs() < 1e-12);
        assert!((k.bin(0.5).unwrap() - 1.0 / 4096.0).abs() < 1e-15);
        for g in [0.05, 0.2, 0.4] {
            assert!(k.bin(g).unwrap() < b0);
            assert!((k.bin(g).unwrap() - k.bin(-g).unwrap()).abs() < 1e-15);
        }
        assert_eq!(k.nib(b0).unwrap(), 0.0);
        assert_eq!(k.nib(1.0 / 4096.0).unwrap(), 0.5);
        assert!(k.nib(0.5).is_err());
        assert!(k.nib(0.0).is_err());
        assert!(k.bin(0.6).is_err());
    }

    #[test]
    fn nib_small_argument_asymptotics() {
        let k = BinomialKernel::new(12.0).unwrap();
        let approx = (-(0.1f64).ln() / 24.0).sqrt();
        let g = k.nib_normalized(0.1).unwrap();
        assert!((g / approx - 1.0).abs() < 0.03, "{g} vs {approx}");
        // the unnormalized inverse carries the 2^-d C(d, d/2) prefactor; the
        // value is the root of lnΓ-form bin(g) = 0.1 found independently
        let g = k.nib(0.1).unwrap();
        assert!((g - 0.189_805_274_336_311).abs() < 1e-10, "{g}");
    }

    #[test]
    fn nib_is_monotone() {
        let k = BinomialKernel::new(10.0).unwrap();
        let xs: Vec<f64> = (1..50).map(|i| 0.001 + i as f64 * 0.004).collect();
        let gs: Vec<f64> = xs.iter().map(|&x| k.nib(x).unwrap()).collect();
        assert!(gs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon_formula(0.7, 0.2, 0.0, 0.0).unwrap(), 0.0);
        assert!((epsilon_formula(1.0, 0.0, 0.0002, 0.0002).unwrap() - 2.0).abs() < 1e-12);
    }

    fn synthetic(form: AnsatzForm, p: f64, q: f64, npts: usize) -> Vec<(f64, f64)> {
        (1..=npts)
            .map(|i| {
                let x = i as f64 / (npts + 1) as f64;
                (x, form.evaluate(p, q, x).unwrap().sqrt())
            })
            .collect()
    }

    #[test]
    fn qlog_round_trip() {
        // sample includes small x so the maximum of b² sits at the first point
        let prof = synthetic(AnsatzForm::QLog, 0.5, 0.3, 500);
        let fit = fit_ansatz(&prof, AnsatzForm::QLog, 0.0).unwrap();
        let scale = fit.scale;
        assert!((fit.p * scale - 0.5).abs() < 1e-6, "{}", fit.p * scale);
        assert!((fit.q - 0.3).abs() < 1e-6);
        assert!(fit.epsilon < 1e-4);
        assert_eq!(fit.epsilon, goodness_epsilon(&fit).unwrap());
    }

    #[test]
    fn qlog_round_trip_in_scaled_units() {
        // data already in (0, 1] so the scale is 1
        let prof: Vec<(f64, f64)> = (0..500)
            .map(|i| {
                let x = 0.36 + 0.64 * i as f64 / 499.0;
                (x, (-0.5 * q_log(x, 0.3).unwrap()).sqrt())
            })
            .collect();
        let fit = fit_ansatz(&prof, AnsatzForm::QLog, 0.0).unwrap();
        let expect_p = 0.5 / fit.scale;
        assert!((fit.p - expect_p).abs() < 1e-6);
        assert!((fit.q - 0.3).abs() < 1e-6);
    }

    #[test]
    fn q_zero_limit_recovers_semicircle() {
        let prof: Vec<(f64, f64)> = (1..400).map(|i| {
            let x = i as f64 / 400.0;
            (x, (1.0 - x).sqrt())
        }).collect();
        let fit = fit_ansatz_with(&prof, AnsatzForm::QLog, 0.0, Some(0.0)).unwrap();
        let resid: f64 = prof
            .iter()
            .map(|&(x, b)| (fit.p * fit.scale * (1.0 - x) - b * b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(resid < 1e-10);
        assert!((fit.p * fit.scale - 1.0).abs() < 1e-10);
    }

    #[test]
    fn superposition_round_trip() {
        let prof = synthetic(AnsatzForm::Superposition, 0.6, 0.2, 300);
        let fit = fit_ansatz(&prof, AnsatzForm::Superposition, 0.0).unwrap();
        assert!((fit.p * fit.scale - 0.6).abs() < 1e-8);
        assert!((fit.q * fit.scale - 0.2).abs() < 1e-8);
    }

    #[test]
    fn fit_domain_requirements() {
        let prof = synthetic(AnsatzForm::QLog, 0.5, 0.3, 9);
        assert!(fit_ansatz(&prof, AnsatzForm::QLog, 0.0).is_err());
        let mut prof = synthetic(AnsatzForm::QLog, 0.5, 0.3, 40);
        prof[3].1 = f64::NAN;
        assert!(fit_ansatz(&prof, AnsatzForm::QLog, 0.0).is_err());
    }

    #[test]
    fn xi_calibration_of_exact_profile() {
        // b = sqrt(-(ξ²/2) ln x) with a cutoff below x = 0.01 is maximal at the cutoff
        let xi = 0.5f64;
        let prof: Vec<(f64, f64)> = (1..1000)
            .map(|i| {
                let x = i as f64 / 1000.0;
                (x, (-(xi * xi / 2.0) * x.ln()).sqrt())
            })
            .collect();
        let cal = calibrate_xi(&prof, 0.01).unwrap();
        assert!((cal.x_star - 0.01).abs() < 1e-12);
        assert!((cal.xi - (2.0 / -(0.01f64).ln()).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn log_variance_examples() {
        let t = TridiagonalForm::from_coefficients(vec![0.0; 9], vec![0.7; 8]).unwrap();
        assert_eq!(log_variance(&t).unwrap(), 0.0);
        let t = TridiagonalForm::from_coefficients(vec![0.0; 9], vec![1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(log_variance(&t).is_err());
        // ratios e, e^-1: logs ±1, sample variance 4/3
        let e = std::f64::consts::E;
        let t = TridiagonalForm::from_coefficients(vec![0.0; 7], vec![e, 1.0, 1.0, e, e, 1.0]).unwrap();
        assert!((log_variance(&t).unwrap() - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn power_law_round_trip() {
        let pts: Vec<(f64, f64)> = (0..8)
            .map(|i| {
                let g = 2.25 + 0.25 * i as f64;
                (g, 0.1 * g.powi(3) + 0.01)
            })
            .collect();
        let fits = fit_logvar_powerlaw(&pts, 512).unwrap();
        assert_eq!(fits.len(), 1);
        let f = fits[0];
        assert_eq!(f.phase, Phase::Localized);
        assert!((f.a - 0.1).abs() < 1e-4);
        assert!((f.n - 3.0).abs() < 1e-4);
        assert!((f.c - 0.01).abs() < 1e-4);
    }

    #[test]
    fn power_law_needs_points() {
        let pts = [(1.5, 0.1), (1.7, 0.2), (3.0, 1.0)];
        assert!(fit_logvar_powerlaw(&pts, 64).is_err());
    }
}
