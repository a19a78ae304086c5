//! Tridiagonal eigensolver, level-spacing statistics and density of states.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quadrature::gl20_integrate;
use crate::tridiagonalize::TridiagonalForm;

const MAX_QL_SWEEPS: usize = 60;

/// Spectrum of a tridiagonal form, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    /// `tridiagonal_vectors[m][k] = ⟨K_k|ψ_m⟩`: eigenvectors expressed in the
    /// Krylov basis.
    pub tridiagonal_vectors: Option<Vec<Vec<f64>>>,
    /// `vectors[m][n] = s^m_n = ⟨n|ψ_m⟩`, present when the form carried its basis.
    pub vectors: Option<Vec<Vec<f64>>>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Full spectrum by implicit-shift QL.
///
/// With `want_vectors`, eigenvectors are accumulated in the Krylov basis and,
/// when the form carries its basis, also back-transformed to the
/// computational basis.
pub fn eig_tridiagonal(t: &TridiagonalForm, want_vectors: bool) -> Result<EigenSystem> {
    let n = t.len();
    if n == 0 {
        return Err(Error::invalid("empty tridiagonal form"));
    }
    let mut d = t.a.clone();
    let mut e = t.b.clone();
    e.push(0.0);
    // rows of z are eigenvectors (in the Krylov basis)
    let mut z = if want_vectors {
        let mut z = vec![0.0; n * n];
        for i in 0..n {
            z[i * n + i] = 1.0;
        }
        Some(z)
    } else {
        None
    };

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            if iter == MAX_QL_SWEEPS {
                return Err(Error::NoConvergence { index: l });
            }
            iter += 1;
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_mut() {
                    let (head, tail) = z.split_at_mut((i + 1) * n);
                    let zi = &mut head[i * n..];
                    let zi1 = &mut tail[..n];
                    for (u, w) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let f = *w;
                        *w = s * *u + c * f;
                        *u = c * *u - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let tridiagonal_vectors = z.map(|z| {
        order
            .iter()
            .map(|&i| z[i * n..(i + 1) * n].to_vec())
            .collect::<Vec<_>>()
    });
    let vectors = match (&tridiagonal_vectors, &t.basis) {
        (Some(tv), Some(basis)) => {
            let dim = basis.dim();
            Some(
                tv.iter()
                    .map(|coeffs| {
                        let mut out = vec![0.0; dim];
                        for (c, k) in coeffs.iter().zip(basis.vectors()) {
                            for (o, x) in out.iter_mut().zip(k) {
                                *o += c * x;
                            }
                        }
                        out
                    })
                    .collect(),
            )
        }
        _ => None,
    };
    Ok(EigenSystem {
        values,
        tridiagonal_vectors,
        vectors,
    })
}

/// `|Σ λ - Σ a_n|`.
pub fn trace_identity_error(t: &TridiagonalForm, values: &[f64]) -> f64 {
    (values.iter().sum::<f64>() - t.a.iter().sum::<f64>()).abs()
}

/// `|Σ λ² - (Σ a_n² + 2 Σ b_n²)|`.
pub fn frobenius_identity_error(t: &TridiagonalForm, values: &[f64]) -> f64 {
    let lhs: f64 = values.iter().map(|v| v * v).sum();
    let rhs: f64 = t.a.iter().map(|v| v * v).sum::<f64>() + 2.0 * t.b.iter().map(|v| v * v).sum::<f64>();
    (lhs - rhs).abs()
}

/// Default central fraction of levels used for `⟨r⟩`.
pub const DEFAULT_R_WINDOW: f64 = 0.5;

/// Mean consecutive level-spacing ratio over the central `window_fraction`
/// of an ascending spectrum.
pub fn r_statistics(values: &[f64], window_fraction: f64) -> Result<f64> {
    let ratios = spacing_ratios(values, window_fraction)?;
    Ok(ratios.iter().sum::<f64>() / ratios.len() as f64)
}

/// Individual ratios `r_n = min(s_n, s_{n+1}) / max(s_n, s_{n+1})`.
pub fn spacing_ratios(values: &[f64], window_fraction: f64) -> Result<Vec<f64>> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "window fraction must lie in (0, 1], got {window_fraction}"
        )));
    }
    if values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("eigenvalues must be ascending"));
    }
    let n = values.len();
    let count = ((window_fraction * n as f64).round() as usize).min(n);
    if count < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 levels in the window, got {count}"
        )));
    }
    let lo = (n - count) / 2;
    let window = &values[lo..lo + count];
    let spacings: Vec<f64> = window.windows(2).map(|w| w[1] - w[0]).collect();
    if spacings.iter().all(|&s| s == 0.0) {
        return Err(Error::invalid("all levels in the window are degenerate"));
    }
    Ok(spacings
        .windows(2)
        .map(|s| {
            let (lo, hi) = if s[0] < s[1] { (s[0], s[1]) } else { (s[1], s[0]) };
            if hi == 0.0 {
                0.0
            } else {
                lo / hi
            }
        })
        .collect())
}

/// Density of states from a Lanczos profile.
///
/// `profile` holds `(x, a(x), b(x))` samples with ascending `x` in `(0, 1)`;
/// between samples the coefficients are interpolated linearly and beyond
/// the first/last sample they are held constant. On each interpolation
/// segment the radicand `4b² − (E−a)²` is an exact quadratic, so the
/// integral is split at its roots and every positive piece is integrated
/// after the substitution `x = c − h cos θ`, which absorbs the inverse
/// square-root singularities at the band edges.
pub fn dos_from_lanczos(profile: &[(f64, f64, f64)], e_grid: &[f64]) -> Result<Vec<f64>> {
    if profile.is_empty() {
        return Err(Error::invalid("empty Lanczos profile"));
    }
    if profile.iter().any(|p| !(p.0.is_finite() && p.1.is_finite() && p.2.is_finite())) {
        return Err(Error::NonFinite("Lanczos profile".into()));
    }
    if profile.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::invalid("profile x must be strictly ascending"));
    }
    if e_grid.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite("energy grid".into()));
    }
    let mut nodes = Vec::with_capacity(profile.len() + 2);
    let first = profile[0];
    let last = profile[profile.len() - 1];
    if first.0 > 0.0 {
        nodes.push((0.0, first.1, first.2));
    }
    nodes.extend_from_slice(profile);
    if last.0 < 1.0 {
        nodes.push((1.0, last.1, last.2));
    }
    Ok(e_grid
        .iter()
        .map(|&e| {
            let total: f64 = nodes
                .windows(2)
                .map(|w| segment_integral(w[0], w[1], e))
                .sum();
            (total / std::f64::consts::PI).max(0.0)
        })
        .collect())
}

/// `∫ dx / sqrt(4b² − (E−a)²)` over one linear segment, positive part only.
fn segment_integral(p0: (f64, f64, f64), p1: (f64, f64, f64), e: f64) -> f64 {
    let dx = p1.0 - p0.0;
    let (a0, b0) = (p0.1, p0.2);
    let (da, db) = (p1.1 - a0, p1.2 - b0);
    let u = e - a0;
    // f(t) = ct² + bt + k on t ∈ [0, 1]
    let c = 4.0 * db * db - da * da;
    let b = 8.0 * b0 * db + 2.0 * u * da;
    let k = 4.0 * b0 * b0 - u * u;
    let f = |t: f64| (c * t + b) * t + k;
    let scale = c.abs() + b.abs() + k.abs();
    if scale == 0.0 {
        return 0.0;
    }
    let mut cuts = vec![0.0];
    let mut roots = quadratic_roots(c, b, k, scale);
    roots.retain(|&r| r > 0.0 && r < 1.0);
    roots.sort_by(f64::total_cmp);
    cuts.extend(roots);
    cuts.push(1.0);
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let (l, r) = (w[0], w[1]);
        if r - l <= 0.0 || f(0.5 * (l + r)) <= 0.0 {
            continue;
        }
        let (mid, half) = (0.5 * (l + r), 0.5 * (r - l));
        acc += gl20_integrate(
            |theta| {
                let t = mid - half * theta.cos();
                let v = f(t);
                if v <= 0.0 {
                    0.0
                } else {
                    half * theta.sin() / v.sqrt()
                }
            },
            0.0,
            std::f64::consts::PI,
        );
    }
    acc * dx
}

fn quadratic_roots(c: f64, b: f64, k: f64, scale: f64) -> Vec<f64> {
    if c.abs() <= 1e-14 * scale {
        if b.abs() <= 1e-14 * scale {
            return vec![];
        }
        return vec![-k / b];
    }
    let disc = b * b - 4.0 * c * k;
    if disc < 0.0 {
        return vec![];
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + sq.copysign(b));
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / c, k / q]
}

/// Closed-form density for the q-logarithm Lanczos profile `b² = −p ln_q x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DosModel {
    pub p: f64,
    pub q: f64,
}

/// Below this `1 − q` the density is evaluated in its Gaussian limit.
pub const GAUSSIAN_LIMIT: f64 = 1e-3;

impl DosModel {
    /// Accepts `p > 0` and `−1 < q < 1` (the form stays normalizable for
    /// mildly negative `q`, which finite-size fits can produce).
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::invalid(format!("p must be positive, got {p}")));
        }
        if !q.is_finite() || q >= 1.0 {
            return Err(Error::invalid(format!("q must be below 1, got {q}")));
        }
        if q <= -1.0 {
            return Err(Error::invalid(format!("q must exceed -1, got {q}")));
        }
        Ok(DosModel { p, q })
    }

    /// Support half-width `z = 2 sqrt(p / (1 − q))`.
    pub fn half_width(&self) -> f64 {
        2.0 * (self.p / (1.0 - self.q)).sqrt()
    }

    pub fn density(&self, e: f64) -> f64 {
        let (p, q) = (self.p, self.q);
        let u = 1.0 - q;
        if u < GAUSSIAN_LIMIT {
            return (-e * e / (4.0 * p)).exp() / (4.0 * std::f64::consts::PI * p).sqrt();
        }
        let z = self.half_width();
        if e.abs() >= z {
            return 0.0;
        }
        let k = 1.0 / u;
        let log_norm = -0.5 * (4.0 * std::f64::consts::PI * p * u).ln() + ln_gamma(k) - ln_gamma(0.5 + k);
        let base = 1.0 - e * e * u / (4.0 * p);
        (log_norm + (1.0 + q) / (2.0 * u) * base.ln()).exp()
    }
}

pub fn dos_closed_form(model: &DosModel, e: f64) -> f64 {
    model.density(e)
}

/// Tabulated density curve on an ascending grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub energies: Vec<f64>,
    pub density: Vec<f64>,
}

impl DensityCurve {
    pub fn new(energies: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if energies.len() != density.len() || energies.len() < 2 {
            return Err(Error::DimensionMismatch {
                expected: energies.len(),
                got: density.len(),
            });
        }
        Ok(DensityCurve { energies, density })
    }

    /// Cumulative trapezoid integral, normalized to end at 1.
    pub fn cdf(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.energies.len());
        let mut acc = 0.0;
        out.push(0.0);
        for i in 1..self.energies.len() {
            acc += 0.5 * (self.density[i] + self.density[i - 1]) * (self.energies[i] - self.energies[i - 1]);
            out.push(acc);
        }
        if acc > 0.0 {
            out.iter_mut().for_each(|v| *v /= acc);
        }
        out
    }

    pub fn total_mass(&self) -> f64 {
        self.energies
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(e, d)| 0.5 * (d[0] + d[1]) * (e[1] - e[0]))
            .sum()
    }

    /// Kolmogorov–Smirnov distance between this density and the empirical
    /// distribution of `samples`.
    pub fn ks_distance(&self, samples: &[f64]) -> f64 {
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let cdf = self.cdf();
        let model = |x: f64| -> f64 {
            let e = &self.energies;
            if x <= e[0] {
                return 0.0;
            }
            if x >= e[e.len() - 1] {
                return 1.0;
            }
            let i = e.partition_point(|&v| v <= x);
            let t = (x - e[i - 1]) / (e[i] - e[i - 1]);
            cdf[i - 1] + t * (cdf[i] - cdf[i - 1])
        };
        let n = sorted.len() as f64;
        sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = model(x);
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{generate_rp, EnsembleConfig, Normalization};
    use crate::quadrature::integrate;
    use crate::tridiagonalize::householder_tridiagonalize;

    fn form(a: Vec<f64>, b: Vec<f64>) -> TridiagonalForm {
        TridiagonalForm::from_coefficients(a, b).unwrap()
    }

    #[test]
    fn two_by_two() {
        let e = eig_tridiagonal(&form(vec![0.0, 0.0], vec![1.0]), false).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-15);
        assert!((e.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_site_chain() {
        let e = eig_tridiagonal(&form(vec![0.0; 3], vec![1.0, 1.0]), true).unwrap();
        let s = 2f64.sqrt();
        for (v, w) in e.values.iter().zip([-s, 0.0, s]) {
            assert!((v - w).abs() < 1e-14);
        }
    }

    #[test]
    fn eigenvectors_in_computational_basis() {
        let h = generate_rp(&EnsembleConfig::new(40, 0.5, Normalization::Standard, 6)).unwrap();
        let t = householder_tridiagonalize(&h, true).unwrap();
        let eig = eig_tridiagonal(&t, true).unwrap();
        let vecs = eig.vectors.as_ref().unwrap();
        let norm = h.frobenius_norm();
        let mut hv = vec![0.0; 40];
        for (m, v) in vecs.iter().enumerate() {
            h.matvec(v, &mut hv);
            for (x, y) in hv.iter().zip(v) {
                assert!((x - eig.values[m] * y).abs() < 1e-8 * norm);
            }
            for w in vecs.iter().take(m + 1) {
                let d = crate::ensembles::dot(v, w);
                let target = if std::ptr::eq(v, w) { 1.0 } else { 0.0 };
                assert!((d - target).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn trace_and_frobenius_identities() {
        let h = generate_rp(&EnsembleConfig::new(80, 1.5, Normalization::Standard, 2)).unwrap();
        let t = householder_tridiagonalize(&h, false).unwrap();
        let eig = eig_tridiagonal(&t, false).unwrap();
        let norm = h.frobenius_norm();
        assert!(trace_identity_error(&t, &eig.values) < 1e-8 * 80.0 * norm);
        assert!(frobenius_identity_error(&t, &eig.values) < 1e-10 * norm * norm);
    }

    #[test]
    fn equally_spaced_levels() {
        let r = r_statistics(&[0.0, 1.0, 2.0, 3.0, 4.0], 1.0).unwrap();
        assert_eq!(r, 1.0);
    }

    #[test]
    fn degenerate_levels() {
        let r = spacing_ratios(&[0.0, 1.0, 1.0, 2.0], 1.0).unwrap();
        assert_eq!(r, vec![0.0, 0.0]);
        assert!(r_statistics(&[1.0; 6], 1.0).is_err());
        assert!(r_statistics(&[0.0, 1.0], 1.0).is_err());
        assert!(r_statistics(&[0.0, 1.0, 2.0], 0.0).is_err());
    }

    #[test]
    fn poisson_levels() {
        // i.i.d. exponential spacings; the exact mean ratio is 2 ln 2 − 1
        let mut s = crate::rng::Stream::new(123, 0);
        let mut e = 0.0;
        let levels: Vec<f64> = (0..1_000_002)
            .map(|_| {
                let u: f64 = loop {
                    let u = rand::RngExt::random::<f64>(s.rng_mut());
                    if u > 0.0 {
                        break u;
                    }
                };
                e += -u.ln();
                e
            })
            .collect();
        let r = r_statistics(&levels, 1.0).unwrap();
        assert!((r - (2.0 * 2f64.ln() - 1.0)).abs() < 0.001, "{r}");
    }

    #[test]
    fn arcsine_law_from_constant_b() {
        let profile: Vec<_> = (1..200).map(|i| (i as f64 / 200.0, 0.0, 0.5)).collect();
        let grid: Vec<f64> = (-9..=9).map(|i| i as f64 * 0.1).collect();
        let rho = dos_from_lanczos(&profile, &grid).unwrap();
        for (e, r) in grid.iter().zip(rho) {
            let exact = 1.0 / (std::f64::consts::PI * (1.0 - e * e).sqrt());
            assert!((r / exact - 1.0).abs() < 0.01, "E = {e}: {r} vs {exact}");
        }
    }

    #[test]
    fn semicircle_from_sqrt_profile() {
        let n = 4000;
        let profile: Vec<_> = (1..n)
            .map(|i| {
                let x = i as f64 / n as f64;
                (x, 0.0, (1.0 - x).sqrt())
            })
            .collect();
        let grid: Vec<f64> = (-18..=18).map(|i| i as f64 * 0.1).collect();
        let rho = dos_from_lanczos(&profile, &grid).unwrap();
        for (e, r) in grid.iter().zip(rho) {
            let exact = (4.0 - e * e).sqrt() / (2.0 * std::f64::consts::PI);
            assert!((r / exact - 1.0).abs() < 0.01, "E = {e}: {r} vs {exact}");
        }
    }

    /// Geometric refinement towards both `x = 0` and `x = 1`, where the
    /// profiles below are singular.
    fn two_sided_grid(edge: f64, per_side: usize) -> Vec<f64> {
        let mut xs: Vec<f64> = (0..per_side)
            .map(|i| edge.powf(1.0 - i as f64 / per_side as f64) * 0.5)
            .collect();
        xs.extend((0..per_side).rev().map(|i| 1.0 - edge.powf(1.0 - i as f64 / per_side as f64) * 0.5));
        xs
    }

    #[test]
    fn gaussian_from_log_profile() {
        let xi: f64 = 0.5;
        // geometric grid resolves the logarithmic growth at small x
        let profile: Vec<_> = two_sided_grid(1e-12, 3000)
            .into_iter()
            .map(|x| (x, 0.0, xi * (-0.5 * x.ln()).sqrt()))
            .collect();
        let grid: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.05).collect();
        let rho = dos_from_lanczos(&profile, &grid).unwrap();
        for (e, r) in grid.iter().zip(rho) {
            let exact = (-e * e / (2.0 * xi * xi)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * xi);
            assert!((r / exact - 1.0).abs() < 0.02, "E = {e}: {r} vs {exact}");
        }
    }

    #[test]
    fn empty_profile_rejected() {
        assert!(dos_from_lanczos(&[], &[0.0]).is_err());
    }

    #[test]
    fn closed_form_values() {
        let m = DosModel::new(1.0, 0.0).unwrap();
        assert!((m.density(0.0) - 1.0 / std::f64::consts::PI).abs() < 1e-14);
        for (p, q) in [(1.0, 0.0), (0.25, 0.5), (0.3, 0.9)] {
            let m = DosModel::new(p, q).unwrap();
            assert_eq!(m.density(m.half_width()), 0.0);
        }
        assert!(DosModel::new(1.0, 1.0).is_err());
        assert!(DosModel::new(0.0, 0.5).is_err());
    }

    #[test]
    fn closed_form_normalization() {
        let m = DosModel::new(0.25, 0.5).unwrap();
        let z = m.half_width();
        let mass = integrate(|t: f64| m.density(-z * t.cos()) * z * t.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
    }

    #[test]
    fn gaussian_branch_is_continuous() {
        let near = DosModel::new(0.125, 1.0 - 1.01e-3).unwrap();
        let limit = DosModel::new(0.125, 1.0 - 0.99e-3).unwrap();
        for e in [0.0, 0.3, 0.7] {
            let (a, b) = (near.density(e), limit.density(e));
            assert!((a / b - 1.0).abs() < 2e-3, "E = {e}: {a} vs {b}");
        }
    }

    #[test]
    fn closed_form_matches_lanczos_integral() {
        // the q-log profile fed through the x-integral reproduces the closed form
        for (p, q) in [(1.0, 0.0), (0.4, 0.5), (0.2, 0.8)] {
            let profile: Vec<_> = two_sided_grid(1e-10, 3000)
                .into_iter()
                .map(|x| {
                    let b2 = p * (1.0 - x.powf(1.0 - q)) / (1.0 - q);
                    (x, 0.0, b2.sqrt())
                })
                .collect();
            let model = DosModel::new(p, q).unwrap();
            let z = model.half_width();
            let grid: Vec<f64> = (-8..=8).map(|i| i as f64 * 0.1 * z).collect();
            let rho = dos_from_lanczos(&profile, &grid).unwrap();
            for (e, r) in grid.iter().zip(rho) {
                let exact = model.density(*e);
                assert!((r - exact).abs() < 0.01 * model.density(0.0), "p={p} q={q} E={e}: {r} vs {exact}");
            }
        }
    }

    #[test]
    fn ks_distance_of_matching_samples_is_small() {
        let m = DosModel::new(1.0, 0.0).unwrap();
        let grid: Vec<f64> = (0..=400).map(|i| -2.0 + i as f64 * 0.01).collect();
        let curve = DensityCurve::new(grid.clone(), grid.iter().map(|&e| m.density(e)).collect()).unwrap();
        // semicircle quantiles via inverse-transform on a fine grid
        let cdf = curve.cdf();
        let samples: Vec<f64> = (0..1000)
            .map(|i| {
                let u = (i as f64 + 0.5) / 1000.0;
                let j = cdf.partition_point(|&c| c < u).min(grid.len() - 1);
                grid[j]
            })
            .collect();
        assert!(curve.ks_distance(&samples) < 0.01);
        let shifted: Vec<f64> = samples.iter().map(|x| x + 1.0).collect();
        assert!(curve.ks_distance(&shifted) > 0.2);
    }
}
