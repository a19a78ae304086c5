//! Bounded Levenberg–Marquardt for small dense least-squares problems.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LsqOptions {
    pub max_iterations: usize,
    /// Relative parameter-step tolerance for convergence.
    pub step_tolerance: f64,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl Default for LsqOptions {
    fn default() -> Self {
        LsqOptions {
            max_iterations: 500,
            step_tolerance: 1e-12,
            lower: None,
            upper: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqSolution {
    pub params: Vec<f64>,
    /// `s² (JᵀJ)⁻¹` with `s² = RSS / (m − n)`.
    pub covariance: Vec<Vec<f64>>,
    pub rss: f64,
    pub iterations: usize,
}

/// Minimizes `Σ rᵢ(p)²`.
///
/// `eval(p, r, j)` fills the `m` residuals and the row-major `m × n`
/// Jacobian `∂rᵢ/∂pₖ`. Iterates are projected onto the box bounds.
pub fn levenberg_marquardt<F>(mut eval: F, p0: &[f64], m: usize, opts: &LsqOptions) -> Result<LsqSolution>
where
    F: FnMut(&[f64], &mut [f64], &mut [f64]),
{
    let n = p0.len();
    if n == 0 || m <= n {
        return Err(Error::invalid(format!(
            "least squares needs more residuals than parameters ({m} vs {n})"
        )));
    }
    let project = |p: &mut [f64]| {
        if let Some(lo) = &opts.lower {
            p.iter_mut().zip(lo).for_each(|(x, l)| *x = x.max(*l));
        }
        if let Some(hi) = &opts.upper {
            p.iter_mut().zip(hi).for_each(|(x, h)| *x = x.min(*h));
        }
    };
    let mut p = p0.to_vec();
    project(&mut p);
    let mut r = vec![0.0; m];
    let mut jac = vec![0.0; m * n];
    let mut r_try = vec![0.0; m];
    let mut jac_try = vec![0.0; m * n];
    eval(&p, &mut r, &mut jac);
    let mut rss = sum_sq(&r);
    if !rss.is_finite() {
        return Err(Error::NonFinite("residuals at the initial point".into()));
    }
    let (mut jtj, mut jtr) = normal_equations(&jac, &r, m, n);
    let mut lambda = 1e-3 * (0..n).map(|i| jtj[i * n + i]).fold(0.0, f64::max).max(1e-300);

    for iteration in 1..=opts.max_iterations {
        if rss == 0.0 {
            return finish(p, &jac, rss, m, n, iteration);
        }
        let mut lhs = jtj.clone();
        for i in 0..n {
            lhs[i * n + i] += lambda * jtj[i * n + i].max(1e-300);
        }
        let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
        let Some(step) = solve(&lhs, &rhs, n) else {
            lambda *= 10.0;
            continue;
        };
        let mut candidate: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
        project(&mut candidate);
        eval(&candidate, &mut r_try, &mut jac_try);
        let rss_try = sum_sq(&r_try);
        if rss_try.is_finite() && rss_try <= rss {
            let small_step = candidate
                .iter()
                .zip(&p)
                .all(|(c, o)| (c - o).abs() <= opts.step_tolerance * (o.abs() + opts.step_tolerance));
            let stalled = rss - rss_try <= 1e-15 * rss;
            p = candidate;
            std::mem::swap(&mut r, &mut r_try);
            std::mem::swap(&mut jac, &mut jac_try);
            rss = rss_try;
            (jtj, jtr) = normal_equations(&jac, &r, m, n);
            if small_step || stalled {
                return finish(p, &jac, rss, m, n, iteration);
            }
            lambda = (lambda / 3.0).max(1e-300);
        } else {
            lambda *= 2.0;
            // no descent direction left at working precision
            if lambda > 1e20 {
                return finish(p, &jac, rss, m, n, iteration);
            }
        }
    }
    Err(Error::FitNoConvergence {
        iterations: opts.max_iterations,
        last: p,
    })
}

fn finish(params: Vec<f64>, jac: &[f64], rss: f64, m: usize, n: usize, iterations: usize) -> Result<LsqSolution> {
    let zeros = vec![0.0; m];
    let (jtj, _) = normal_equations(jac, &zeros, m, n);
    let inv = invert(&jtj, n).ok_or(Error::SingularJacobian)?;
    let s2 = rss / (m - n) as f64;
    let covariance = (0..n).map(|i| (0..n).map(|k| s2 * inv[i * n + k]).collect()).collect();
    Ok(LsqSolution {
        params,
        covariance,
        rss,
        iterations,
    })
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn normal_equations(jac: &[f64], r: &[f64], m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jtj = vec![0.0; n * n];
    let mut jtr = vec![0.0; n];
    for i in 0..m {
        let row = &jac[i * n..(i + 1) * n];
        for a in 0..n {
            jtr[a] += row[a] * r[i];
            for b in 0..n {
                jtj[a * n + b] += row[a] * row[b];
            }
        }
    }
    (jtj, jtr)
}

/// Gauss–Jordan inverse with partial pivoting; `None` when numerically singular.
fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    // equilibrate so the pivot test is scale free
    let d: Vec<f64> = (0..n).map(|i| a[i * n + i].abs().sqrt().max(1e-300)).collect();
    let mut m: Vec<f64> = (0..n * n).map(|k| a[k] / (d[k / n] * d[k % n])).collect();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x * n + col].abs().total_cmp(&m[y * n + col].abs()))?;
        if m[piv * n + col].abs() < 1e-13 {
            return None;
        }
        for k in 0..n {
            m.swap(col * n + k, piv * n + k);
            inv.swap(col * n + k, piv * n + k);
        }
        let pv = m[col * n + col];
        for k in 0..n {
            m[col * n + k] /= pv;
            inv[col * n + k] /= pv;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row * n + col];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                m[row * n + k] -= f * m[col * n + k];
                inv[row * n + k] -= f * inv[col * n + k];
            }
        }
    }
    Some((0..n * n).map(|k| inv[k] / (d[k / n] * d[k % n])).collect())
}

fn solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let inv = invert(a, n)?;
    Some((0..n).map(|i| (0..n).map(|k| inv[i * n + k] * b[k]).sum()).collect())
}
