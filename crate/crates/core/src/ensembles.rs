//! Rosenzweig–Porter and heteroskedastic Gaussian symmetric matrices.
//!
//! The RP Hamiltonian is `H = A + N^(-γ/2) B` with `A` diagonal and `B` drawn
//! from the GOE. Three normalizations are supported because different
//! observables are conventionally studied at different overall scales; see
//! [`Normalization`].

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Largest dimension that is materialized densely (2 GiB per matrix).
pub const MAX_DIM: usize = 16384;

/// Overall scale convention for the generated ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `diag(A) ~ N(0,1)`, `B` GOE with diagonal variance 1 and off-diagonal
    /// variance 1/2.
    #[default]
    Standard,
    /// `Standard` with every variance divided by `N`.
    UnitBandwidth,
    /// Entries of `H` drawn directly with diagonal variance `1/(2N)` and
    /// off-diagonal variance `1/(4 N^(γ+1))`.
    Heteroskedastic,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Normalization::Standard),
            "unit-bandwidth" => Ok(Normalization::UnitBandwidth),
            "heteroskedastic" => Ok(Normalization::Heteroskedastic),
            other => Err(Error::invalid(format!("unknown normalization '{other}'"))),
        }
    }
}

impl std::fmt::Display for Normalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Normalization::Standard => "standard",
            Normalization::UnitBandwidth => "unit-bandwidth",
            Normalization::Heteroskedastic => "heteroskedastic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n: usize,
    pub gamma: f64,
    pub normalization: Normalization,
    pub seed: u64,
    /// Realization index; selects the random stream together with `seed`.
    #[serde(default)]
    pub realization: u64,
}

/// Per-class variances of the matrix entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassVariances {
    pub diagonal: f64,
    pub off_diagonal: f64,
}

impl EnsembleConfig {
    pub fn new(n: usize, gamma: f64, normalization: Normalization, seed: u64) -> Self {
        EnsembleConfig {
            n,
            gamma,
            normalization,
            seed,
            realization: 0,
        }
    }

    pub fn with_realization(mut self, realization: u64) -> Self {
        self.realization = realization;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid(format!("N must be at least 2, got {}", self.n)));
        }
        if self.n > MAX_DIM {
            return Err(Error::invalid(format!(
                "N = {} exceeds the dense limit {MAX_DIM}",
                self.n
            )));
        }
        if !self.gamma.is_finite() {
            return Err(Error::NonFinite("gamma".into()));
        }
        if self.gamma < 0.0 {
            return Err(Error::invalid("gamma must be non-negative"));
        }
        Ok(())
    }

    /// Coupling `N^(-γ/2)` in front of the GOE part.
    pub fn coupling(&self) -> f64 {
        (self.n as f64).powf(-self.gamma / 2.0)
    }

    /// Configured variance of diagonal and off-diagonal entries of `H`.
    pub fn variances(&self) -> ClassVariances {
        let n = self.n as f64;
        let s2 = n.powf(-self.gamma);
        match self.normalization {
            Normalization::Standard => ClassVariances {
                diagonal: 1.0 + s2,
                off_diagonal: 0.5 * s2,
            },
            Normalization::UnitBandwidth => ClassVariances {
                diagonal: (1.0 + s2) / n,
                off_diagonal: 0.5 * s2 / n,
            },
            Normalization::Heteroskedastic => ClassVariances {
                diagonal: 1.0 / (2.0 * n),
                off_diagonal: 1.0 / (4.0 * n.powf(self.gamma + 1.0)),
            },
        }
    }
}

/// Where a matrix came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    RosenzweigPorter(EnsembleConfig),
    Heteroskedastic {
        n: usize,
        alpha: f64,
        beta: f64,
        seed: u64,
    },
    Explicit,
}

/// Dense real symmetric matrix, stored full and row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymmetric {
    dim: usize,
    entries: Vec<f64>,
    meta: Provenance,
}

impl DenseSymmetric {
    /// Builds a matrix from its upper triangle; `f(i, j)` is called for `j >= i`.
    pub fn from_upper(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                entries[i * dim + j] = v;
                entries[j * dim + i] = v;
            }
        }
        DenseSymmetric {
            dim,
            entries,
            meta: Provenance::Explicit,
        }
    }

    /// Wraps explicit row-major entries, checking exact symmetry.
    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(Error::invalid(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(DenseSymmetric {
            dim,
            entries,
            meta: Provenance::Explicit,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            entries.extend_from_slice(r);
        }
        Self::from_row_major(dim, entries)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::from_upper(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_upper(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn meta(&self) -> &Provenance {
        &self.meta
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    /// `y = H x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(self.row(i), x);
        }
    }

    /// Writes the binary dump (little-endian `u64` dimension followed by the
    /// full row-major matrix as `f64`) and a JSON provenance sidecar next to it.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        w.write_all(&(self.dim as u64).to_le_bytes()).map_err(io)?;
        for v in &self.entries {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)?;
        let sidecar = sidecar_path(path);
        let json = serde_json::to_string_pretty(&self.meta).expect("provenance serializes");
        std::fs::write(&sidecar, json).map_err(|e| Error::io(&sidecar, e))?;
        Ok(())
    }

    /// Reads a binary dump and its sidecar (missing sidecar means `Explicit`).
    pub fn read_binary(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut word = [0u8; 8];
        r.read_exact(&mut word).map_err(|e| Error::io(path, e))?;
        let dim = u64::from_le_bytes(word) as usize;
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Format {
                path: path.into(),
                reason: format!("implausible dimension {dim}"),
            });
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for _ in 0..dim * dim {
            r.read_exact(&mut word).map_err(|e| Error::io(path, e))?;
            entries.push(f64::from_le_bytes(word));
        }
        let mut m = Self::from_row_major(dim, entries).map_err(|e| Error::Format {
            path: path.into(),
            reason: e.to_string(),
        })?;
        let sidecar = sidecar_path(path);
        if sidecar.exists() {
            let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
            m.meta = serde_json::from_str(&text).map_err(|e| Error::Format {
                path: sidecar.clone(),
                reason: e.to_string(),
            })?;
        }
        Ok(m)
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the compiler vectorize without reassociation flags
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Draws one RP realization.
///
/// Draw order is fixed: `N` diagonal entries of `A`, then the upper triangle
/// of `B` row by row, so equal configurations give bit-identical matrices.
pub fn generate_rp(cfg: &EnsembleConfig) -> Result<DenseSymmetric> {
    cfg.validate()?;
    let n = cfg.n;
    let mut stream = Stream::new(cfg.seed, cfg.realization);
    let diag_a: Vec<f64> = (0..n).map(|_| stream.normal()).collect();
    let mut m = match cfg.normalization {
        Normalization::Standard | Normalization::UnitBandwidth => {
            let overall = if cfg.normalization == Normalization::UnitBandwidth {
                (1.0 / n as f64).sqrt()
            } else {
                1.0
            };
            let s = cfg.coupling();
            let off = std::f64::consts::FRAC_1_SQRT_2;
            DenseSymmetric::from_upper(n, |i, j| {
                let z = stream.normal();
                if i == j {
                    overall * (diag_a[i] + s * z)
                } else {
                    overall * s * off * z
                }
            })
        }
        Normalization::Heteroskedastic => {
            let v = cfg.variances();
            let (sd, so) = (v.diagonal.sqrt(), v.off_diagonal.sqrt());
            DenseSymmetric::from_upper(n, |i, j| {
                let z = stream.normal();
                if i == j {
                    sd * z
                } else {
                    so * z
                }
            })
        }
    };
    m.meta = Provenance::RosenzweigPorter(*cfg);
    Ok(m)
}

/// Gaussian symmetric matrix with diagonal variance `alpha` and off-diagonal
/// variance `beta`.
pub fn generate_heteroskedastic(n: usize, alpha: f64, beta: f64, seed: u64) -> Result<DenseSymmetric> {
    generate_heteroskedastic_realization(n, alpha, beta, seed, 0)
}

pub fn generate_heteroskedastic_realization(
    n: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    realization: u64,
) -> Result<DenseSymmetric> {
    if !(2..=MAX_DIM).contains(&n) {
        return Err(Error::invalid(format!("N must lie in 2..={MAX_DIM}, got {n}")));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::invalid(format!("beta must be non-negative, got {beta}")));
    }
    let mut stream = Stream::new(seed, realization);
    let (sd, so) = (alpha.sqrt(), beta.sqrt());
    let mut m = DenseSymmetric::from_upper(n, |i, j| {
        let z = stream.normal();
        if i == j {
            sd * z
        } else {
            so * z
        }
    });
    m.meta = Provenance::Heteroskedastic { n, alpha, beta, seed };
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class_variances(m: &DenseSymmetric) -> (f64, f64) {
        let n = m.dim();
        let mut d = 0.0;
        let mut o = 0.0;
        for i in 0..n {
            d += m.get(i, i).powi(2);
            for j in (i + 1)..n {
                o += m.get(i, j).powi(2);
            }
        }
        (d / n as f64, o / (n * (n - 1) / 2) as f64)
    }

    #[test]
    fn rejects_bad_configs() {
        let bad_n = EnsembleConfig::new(1, 0.0, Normalization::Standard, 0);
        assert!(generate_rp(&bad_n).is_err());
        let bad_g = EnsembleConfig::new(4, f64::NAN, Normalization::Standard, 0);
        assert!(matches!(generate_rp(&bad_g), Err(Error::NonFinite(_))));
        let inf_g = EnsembleConfig::new(4, f64::INFINITY, Normalization::Standard, 0);
        assert!(generate_rp(&inf_g).is_err());
        assert!(generate_heteroskedastic(4, 0.0, 1.0, 0).is_err());
        assert!(generate_heteroskedastic(4, -1.0, 1.0, 0).is_err());
    }

    #[test]
    fn huge_gamma_suppresses_goe_part() {
        let cfg = EnsembleConfig::new(2, 200.0, Normalization::Standard, 9);
        let m = generate_rp(&cfg).unwrap();
        assert!(m.get(0, 1).abs() < 1e-15);
    }

    #[test]
    fn deterministic_and_symmetric() {
        let cfg = EnsembleConfig::new(33, 1.3, Normalization::UnitBandwidth, 77).with_realization(5);
        let a = generate_rp(&cfg).unwrap();
        let b = generate_rp(&cfg).unwrap();
        assert_eq!(a, b);
        for i in 0..33 {
            for j in 0..33 {
                assert_eq!(a.get(i, j), a.get(j, i));
            }
        }
        let c = generate_rp(&cfg.with_realization(6)).unwrap();
        assert_ne!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn goe_off_diagonal_variance_is_one_half() {
        let n = 1024;
        let reals = 200;
        let mut acc = 0.0;
        for r in 0..reals {
            let cfg = EnsembleConfig::new(n, 0.0, Normalization::Standard, 11).with_realization(r);
            acc += class_variances(&generate_rp(&cfg).unwrap()).1;
        }
        let v = acc / reals as f64;
        assert!((v - 0.5).abs() < 0.01, "off-diagonal variance {v}");
    }

    #[test]
    fn heteroskedastic_convention_variance() {
        let n = 512;
        let reals = 500;
        let beta = 1.0 / (4.0 * (n as f64).powi(2));
        let mut acc = 0.0;
        for r in 0..reals {
            let cfg = EnsembleConfig::new(n, 1.0, Normalization::Heteroskedastic, 3).with_realization(r);
            acc += class_variances(&generate_rp(&cfg).unwrap()).1;
        }
        let v = acc / reals as f64;
        assert!(((v - beta) / beta).abs() < 0.05, "{v} vs {beta}");
    }

    #[test]
    fn heteroskedastic_convention_ratio() {
        for &(n, g) in &[(64usize, 1.0), (512, 0.0), (100, 2.5)] {
            let v = EnsembleConfig::new(n, g, Normalization::Heteroskedastic, 0).variances();
            let ratio = v.diagonal / v.off_diagonal;
            let expected = 2.0 * (n as f64).powf(g);
            assert!((ratio / expected - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn wigner_ratio_of_heteroskedastic_draws() {
        let (n, beta) = (256, 0.5);
        let mut ratio = 0.0;
        let reals = 500;
        for r in 0..reals {
            let m = generate_heteroskedastic_realization(n, 2.0 * beta, beta, 5, r).unwrap();
            let (d, o) = class_variances(&m);
            ratio += d / o;
        }
        ratio /= reals as f64;
        assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn zero_beta_is_diagonal() {
        let m = generate_heteroskedastic(4, 1.0, 0.0, 1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(m.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn entry_means_vanish() {
        let (n, reals) = (128usize, 1000u64);
        let mut sum = vec![0.0; n * n];
        for r in 0..reals {
            let m = generate_heteroskedastic_realization(n, 1.0, 0.25, 8, r).unwrap();
            for (s, v) in sum.iter_mut().zip(m.as_slice()) {
                *s += v;
            }
        }
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let var = if i == j { 1.0 } else { 0.25 };
                let stderr = (var / reals as f64).sqrt();
                let mean = sum[i * n + j] / reals as f64;
                worst = worst.max(mean.abs() / stderr);
            }
        }
        // 8256 independent entries: a 3-sigma bound per entry would be exceeded
        // by chance about 22 times, so bound the maximum at the Gaussian extreme.
        assert!(worst < 5.0, "largest standardized mean {worst}");
    }

    #[test]
    fn variance_convergence_all_conventions() {
        for norm in [
            Normalization::Standard,
            Normalization::UnitBandwidth,
            Normalization::Heteroskedastic,
        ] {
            let base = EnsembleConfig::new(16, 0.7, norm, 21);
            let want = base.variances();
            let (mut d, mut o) = (0.0, 0.0);
            let reals = 1000;
            for r in 0..reals {
                let (dv, ov) = class_variances(&generate_rp(&base.with_realization(r)).unwrap());
                d += dv;
                o += ov;
            }
            d /= reals as f64;
            o /= reals as f64;
            assert!((d / want.diagonal - 1.0).abs() < 0.1, "{norm}: diag {d}");
            assert!((o / want.off_diagonal - 1.0).abs() < 0.1, "{norm}: off {o}");
        }
    }

    #[test]
    fn binary_dump_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.bin");
        let cfg = EnsembleConfig::new(7, 0.5, Normalization::Standard, 4);
        let m = generate_rp(&cfg).unwrap();
        m.write_binary(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 8 + 8 * 49);
        assert_eq!(&bytes[..8], &7u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &m.get(0, 0).to_le_bytes());
        assert_eq!(&bytes[16..24], &m.get(0, 1).to_le_bytes());
        let back = DenseSymmetric::read_binary(&path).unwrap();
        assert_eq!(back, m);
    }
}
