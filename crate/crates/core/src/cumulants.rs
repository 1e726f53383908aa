//! Second and fourth cumulant tensors: closed form from a source model, or
//! plug-in estimates from samples.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixing::MixingMatrix;
use crate::scalar::Scalar;
use crate::tensors::{packed_len2, pair_index, quads, SymMat, SymTen4};

/// Distribution of one latent source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SourceDist {
    Exponential { rate: f64 },
    StudentT { dof: f64 },
    Gaussian { variance: f64 },
    /// Any distribution with the given variance and fourth cumulant. Sampled
    /// as a symmetric three-point law.
    Moments { variance: f64, fourth_cumulant: f64 },
}

impl SourceDist {
    pub fn is_gaussian(&self) -> bool {
        matches!(self, SourceDist::Gaussian { .. })
    }

    /// `(variance, fourth cumulant)`.
    pub fn moments(&self) -> Result<(f64, f64)> {
        match *self {
            SourceDist::Exponential { rate } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(Error::InvalidConfig(format!("exponential rate must be positive, got {rate}")));
                }
                // cumulants of exp(rate) are (n-1)! / rate^n
                Ok((1.0 / (rate * rate), 6.0 / rate.powi(4)))
            }
            SourceDist::StudentT { dof } => {
                if dof.is_nan() || dof <= 4.0 {
                    return Err(Error::UndefinedMoment { dof });
                }
                let var = dof / (dof - 2.0);
                Ok((var, 6.0 / (dof - 4.0) * var * var))
            }
            SourceDist::Gaussian { variance } => {
                if !(variance > 0.0 && variance.is_finite()) {
                    return Err(Error::InvalidConfig(format!("gaussian variance must be positive, got {variance}")));
                }
                Ok((variance, 0.0))
            }
            SourceDist::Moments { variance, fourth_cumulant } => {
                if !(variance > 0.0 && variance.is_finite() && fourth_cumulant.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "moments need positive variance and finite fourth cumulant, got ({variance}, {fourth_cumulant})"
                    )));
                }
                Ok((variance, fourth_cumulant))
            }
        }
    }

    /// One draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(match *self {
            SourceDist::Exponential { rate } => {
                let u: f64 = rng.random();
                -(1.0 - u).ln() / rate
            }
            SourceDist::StudentT { dof } => {
                let z: f64 = StandardNormal.sample(rng);
                let chi = ChiSquared::new(dof).map_err(|e| Error::InvalidConfig(e.to_string()))?;
                let c: f64 = chi.sample(rng);
                z / (c / dof).sqrt()
            }
            SourceDist::Gaussian { variance } => {
                let z: f64 = StandardNormal.sample(rng);
                variance.sqrt() * z
            }
            SourceDist::Moments { variance, fourth_cumulant } => {
                let (p, a) = three_point(variance, fourth_cumulant)?;
                let u: f64 = rng.random();
                if u < p / 2.0 {
                    a
                } else if u < p {
                    -a
                } else {
                    0.0
                }
            }
        })
    }
}

/// `±a` with probability `p/2` each, `0` otherwise; kurtosis is `1/p`.
fn three_point(variance: f64, fourth_cumulant: f64) -> Result<(f64, f64)> {
    let kurt = fourth_cumulant / (variance * variance) + 3.0;
    if kurt < 1.0 {
        return Err(Error::InvalidConfig(format!(
            "no distribution has variance {variance} and fourth cumulant {fourth_cumulant}"
        )));
    }
    let p = 1.0 / kurt;
    Ok((p, (variance / p).sqrt()))
}

/// Per-source distributions, at most one of them Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    sources: Vec<SourceDist>,
}

impl SourceSpec {
    pub fn new(sources: Vec<SourceDist>) -> Result<Self> {
        let gaussians = sources.iter().filter(|s| s.is_gaussian()).count();
        if gaussians > 1 {
            return Err(Error::ModelViolation(format!("{gaussians} Gaussian sources; at most one is allowed")));
        }
        for s in &sources {
            s.moments()?;
        }
        Ok(Self { sources })
    }

    /// `count` copies of `Moments { 1, 6 }` followed by one standard-variance
    /// Gaussian scaled to `gaussian_variance`.
    pub fn synthetic_default(non_gaussian: usize, gaussian_variance: f64) -> Result<Self> {
        let mut v = vec![SourceDist::Moments { variance: 1.0, fourth_cumulant: 6.0 }; non_gaussian];
        v.push(SourceDist::Gaussian { variance: gaussian_variance });
        Self::new(v)
    }

    pub fn sources(&self) -> &[SourceDist] {
        &self.sources
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn gaussian_index(&self) -> Option<usize> {
        self.sources.iter().position(SourceDist::is_gaussian)
    }

    /// Rejects non-Gaussian sources whose fourth cumulant vanishes; recovery
    /// cannot see those in the fourth cumulant.
    pub fn validate_for_recovery(&self) -> Result<()> {
        for (j, s) in self.sources.iter().enumerate() {
            if !s.is_gaussian() && s.moments()?.1 == 0.0 {
                return Err(Error::ModelViolation(format!("non-Gaussian source {j} has zero fourth cumulant")));
            }
        }
        Ok(())
    }

    /// Ensures the parsed spec still satisfies the model (used after deserialising).
    pub fn validated(self) -> Result<Self> {
        Self::new(self.sources)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Population,
    Sample { n: usize },
}

/// Second and fourth cumulants of the observations.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantPair<T: Scalar> {
    pub k2: SymMat<T>,
    pub k4: SymTen4<T>,
    pub provenance: Provenance,
}

impl<T: Scalar> CumulantPair<T> {
    pub fn new(k2: SymMat<T>, k4: SymTen4<T>, provenance: Provenance) -> Result<Self> {
        if k2.dim() != k4.dim() {
            return Err(Error::DimensionMismatch { expected: k2.dim(), found: k4.dim() });
        }
        Ok(Self { k2, k4, provenance })
    }

    pub fn dim(&self) -> usize {
        self.k2.dim()
    }

    pub fn is_population(&self) -> bool {
        self.provenance == Provenance::Population
    }
}

/// `k2 = sum_j sigma_j a_j^{⊗2}`, `k4 = sum_{j non-Gaussian} lambda_j a_j^{⊗4}`.
pub fn population_cumulants<T: Scalar>(a: &MixingMatrix<T>, spec: &SourceSpec) -> Result<CumulantPair<T>> {
    if spec.len() != a.cols() {
        return Err(Error::DimensionMismatch { expected: a.cols(), found: spec.len() });
    }
    let dim = a.rows();
    let mut k2 = SymMat::zeros(dim);
    let mut k4 = SymTen4::zeros(dim);
    for (j, src) in spec.sources().iter().enumerate() {
        let (var, fourth) = src.moments()?;
        let col = a.column(j);
        k2.add_outer(T::lit(var), &col);
        if !src.is_gaussian() && fourth != 0.0 {
            k4.add_outer(T::lit(fourth), &col);
        }
    }
    CumulantPair::new(k2, k4, Provenance::Population)
}

const BLOCK_ROWS: usize = 4096;

/// Plug-in (divide by `n`) cumulant estimates from an `n x I` data matrix.
///
/// Rows are processed in fixed-size blocks whose partial sums are reduced in
/// block order, so results do not depend on the thread count.
pub fn sample_cumulants<T: Scalar>(x: &DMatrix<T>) -> Result<CumulantPair<T>> {
    let n = x.nrows();
    let dim = x.ncols();
    if n < 2 {
        return Err(Error::InsufficientData { n, min: 2 });
    }
    if let Some((pos, _)) = x.iter().enumerate().find(|(_, v)| !v.finite()) {
        return Err(Error::InvalidData(format!("non-finite entry at row {}, column {}", pos % n, pos / n)));
    }

    let nt = T::from_usize_lossy(n);
    let mean: Vec<T> = (0..dim).map(|c| x.column(c).iter().fold(T::zero(), |a, &v| a + v) / nt).collect();

    let m2 = packed_len2(dim);
    let quad_pairs: Vec<(usize, usize)> =
        quads(dim).map(|[i, j, k, l]| (pair_index(i, j), pair_index(k, l))).collect();
    let pair_list: Vec<(usize, usize)> = crate::tensors::pairs(dim).collect();

    let blocks: Vec<(usize, usize)> = (0..n).step_by(BLOCK_ROWS).map(|s| (s, (s + BLOCK_ROWS).min(n))).collect();
    let partials: Vec<(Vec<T>, Vec<T>)> = blocks
        .par_iter()
        .map(|&(start, end)| {
            let mut s2 = vec![T::zero(); m2];
            let mut s4 = vec![T::zero(); quad_pairs.len()];
            let mut y = vec![T::zero(); dim];
            let mut p = vec![T::zero(); m2];
            for r in start..end {
                for c in 0..dim {
                    y[c] = x[(r, c)] - mean[c];
                }
                for (slot, &(i, j)) in p.iter_mut().zip(&pair_list) {
                    *slot = y[i] * y[j];
                }
                for (acc, &v) in s2.iter_mut().zip(&p) {
                    *acc += v;
                }
                for (acc, &(a, b)) in s4.iter_mut().zip(&quad_pairs) {
                    *acc += p[a] * p[b];
                }
            }
            (s2, s4)
        })
        .collect();

    let mut s2 = vec![T::zero(); m2];
    let mut s4 = vec![T::zero(); quad_pairs.len()];
    for (b2, b4) in &partials {
        for (a, &v) in s2.iter_mut().zip(b2) {
            *a += v;
        }
        for (a, &v) in s4.iter_mut().zip(b4) {
            *a += v;
        }
    }
    s2.iter_mut().for_each(|v| *v /= nt);
    let k2 = SymMat::from_packed(dim, s2)?;

    let k4_data: Vec<T> = quads(dim)
        .zip(&s4)
        .map(|([i, j, k, l], &m4)| {
            m4 / nt - (k2.get(i, j) * k2.get(k, l) + k2.get(i, k) * k2.get(j, l) + k2.get(i, l) * k2.get(j, k))
        })
        .collect();
    let k4 = SymTen4::from_packed(dim, k4_data)?;
    CumulantPair::new(k2, k4, Provenance::Sample { n })
}
