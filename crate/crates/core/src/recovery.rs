//! Mixing-matrix recovery from cumulants.
//!
//! Step one finds the non-Gaussian columns as the rank-one points of the
//! dominant eigenspace of the flattened fourth cumulant (subspace power
//! method). Step two finds the Gaussian column as a rank-one matrix in the
//! span of the squared known columns and the second cumulant.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cumulants::CumulantPair;
use crate::error::{Error, Result};
use crate::mixing::{abs_cosine, canonical_direction, norm, MixingMatrix};
use crate::optimize::{best_of_restarts, powell_minimize, MinimizeConfig};
use crate::scalar::Scalar;
use crate::tensors::{flatten, packed_len2, SymMat, SymTen4};

/// Requested number of rank-one terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rank {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoveryConfig {
    /// Population rank cut: eigenvalues below this fraction of the largest are dropped.
    pub rank_rel_tol: f64,
    /// Auto-rank gap ratio below which the rank decision is flagged.
    pub rank_gap_warn: f64,
    pub starts_per_rank: usize,
    pub power_iters: usize,
    pub power_tol: f64,
    /// Added multiple of the iterate in each power step.
    pub power_shift: f64,
    /// A fixed point is rank one when `|P_U w(xx^T)| >= 1 - eps`. `None`
    /// picks `1e-6` for population input and `0.2` for sample input.
    pub accept_eps: Option<f64>,
    /// Candidates with larger `|cos|` are the same column.
    pub dedup_cos: f64,
    /// Reject ranks above `C(I,2)`, where the decomposition stops being unique.
    pub enforce_uniqueness_bound: bool,
    pub residual_abs_tol: f64,
    pub residual_rel_tol: f64,
    /// `|l_J| / |l|` below which the Gaussian column counts as absent.
    pub gaussian_ratio_tol: f64,
    pub minimize: MinimizeConfig,
    pub seed: u64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            rank_rel_tol: 1e-6,
            rank_gap_warn: 10.0,
            starts_per_rank: 50,
            power_iters: 1000,
            power_tol: 1e-12,
            power_shift: 0.0,
            accept_eps: None,
            dedup_cos: 0.99,
            enforce_uniqueness_bound: true,
            residual_abs_tol: 1e-6,
            residual_rel_tol: 0.25,
            gaussian_ratio_tol: 1e-8,
            minimize: MinimizeConfig::default(),
            seed: 0,
        }
    }
}

impl RecoveryConfig {
    pub fn validate(&self) -> Result<()> {
        self.minimize.validate()?;
        if self.starts_per_rank == 0 || self.power_iters == 0 {
            return Err(Error::InvalidConfig("power-method budgets must be positive".into()));
        }
        if !(self.dedup_cos > 0.0 && self.dedup_cos < 1.0) {
            return Err(Error::InvalidConfig(format!("dedup_cos must lie in (0, 1), got {}", self.dedup_cos)));
        }
        if !(self.rank_rel_tol > 0.0 && self.power_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        Ok(())
    }

    fn accept_eps_for(&self, population: bool) -> f64 {
        self.accept_eps.unwrap_or(if population { 1e-6 } else { 0.2 })
    }
}

/// Rank-one terms of a fourth-order tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<T: Scalar> {
    /// Unit vectors in canonical sign.
    pub vectors: Vec<Vec<T>>,
    pub lambdas: Vec<T>,
    /// `|P_U w(vv^T)|` for each vector.
    pub fit: Vec<T>,
    pub subspace_rank: usize,
    /// Flattening eigenvalues sorted by decreasing magnitude.
    pub eigenvalues: Vec<T>,
    pub rank_warning: Option<String>,
    /// `|k4 - sum_r lambda_r v_r^{⊗4}|`.
    pub residual: T,
}

/// Output of [`recover`]: estimated mixing matrix with the Gaussian column last.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult<T: Scalar> {
    pub a_hat: MixingMatrix<T>,
    /// Coefficients of `κ2` on the squared columns.
    pub coefficients: Vec<T>,
    /// `|κ2 - sum_j l_j â_j^{⊗2}|`.
    pub objective: T,
    pub decomposition: Decomposition<T>,
}

/// Dominant eigenspace of the flattened tensor in isometric coordinates.
struct Subspace<T: Scalar> {
    dim: usize,
    basis: DMatrix<T>,
}

impl<T: Scalar> Subspace<T> {
    /// Returns `P_U w(xx^T)` as a full symmetric matrix and `|P_U w(xx^T)|^2`.
    fn project_square(&self, x: &[T]) -> (DMatrix<T>, T) {
        let w = SymMat::outer(x).to_weighted();
        let c = self.basis.tr_mul(&w);
        let p = &self.basis * &c;
        let m = SymMat::from_weighted(self.dim, &p).expect("packed length").to_full();
        (m, c.norm_squared())
    }

    fn fit(&self, x: &[T]) -> T {
        let w = SymMat::outer(x).to_weighted();
        self.basis.tr_mul(&w).norm()
    }
}

/// The part of `sub` orthogonal to `P_U w(vv^T)` for every found `v`.
fn deflate<T: Scalar>(sub: &Subspace<T>, found: &[Vec<T>]) -> Subspace<T> {
    let r = sub.basis.ncols();
    let coords = DMatrix::from_fn(r, found.len(), |i, k| {
        let w = SymMat::outer(&found[k]).to_weighted();
        sub.basis.column(i).dot(&w)
    });
    let padded = coords.resize_horizontally(r, T::zero());
    let svd = padded.svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap_or(std::cmp::Ordering::Equal));
    let keep = r - found.len().min(r);
    let kept = DMatrix::from_fn(r, keep, |i, k| u[(i, order[r - keep + k])]);
    Subspace { dim: sub.dim, basis: &sub.basis * kept }
}

fn sorted_eigen<T: Scalar>(flat: DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let eig = SymmetricEigen::new(flat);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b].abs().partial_cmp(&eig.eigenvalues[a].abs()).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Rank decision: population input counts eigenvalues above a relative
/// threshold; sample input cuts at the largest ratio of consecutive
/// magnitudes among the leading `C(I,2) + 1`.
fn choose_rank<T: Scalar>(eigs: &[T], dim: usize, population: bool, cfg: &RecoveryConfig) -> (usize, Option<String>) {
    let mags: Vec<f64> = eigs.iter().map(|e| e.abs().as_f64()).collect();
    let top = mags.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return (0, Some("fourth cumulant is zero".into()));
    }
    let limit = (dim * (dim - 1) / 2).max(1).min(mags.len());
    let ratio = |k: usize| if k < mags.len() { mags[k - 1] / mags[k].max(f64::MIN_POSITIVE) } else { f64::INFINITY };
    let rank = if population {
        mags.iter().filter(|&&m| m > cfg.rank_rel_tol * top).count()
    } else {
        let mut best = 1;
        for k in 1..=limit {
            if ratio(k) > ratio(best) {
                best = k;
            }
        }
        best
    };
    let gap = ratio(rank.max(1));
    let warning = (gap < cfg.rank_gap_warn)
        .then(|| format!("rank {rank} is ambiguous: eigenvalue gap ratio {gap:.3} below {}", cfg.rank_gap_warn));
    (rank, warning)
}

fn random_unit<T: Scalar, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<T> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.iter().map(|x| T::lit(x / n)).collect();
        }
    }
}

/// One projected power run from `x0`; returns the final unit iterate.
fn power_run<T: Scalar>(sub: &Subspace<T>, x0: Vec<T>, cfg: &RecoveryConfig) -> Vec<T> {
    let shift = T::lit(cfg.power_shift);
    let tol = T::lit(cfg.power_tol);
    let mut x = x0;
    for _ in 0..cfg.power_iters {
        let (m, _) = sub.project_square(&x);
        let y = &m * DVector::from_column_slice(&x);
        let mut next: Vec<T> = y.iter().zip(&x).map(|(&a, &b)| a + shift * b).collect();
        let n = norm(&next);
        if n == T::zero() || !n.finite() {
            break;
        }
        next.iter_mut().for_each(|v| *v /= n);
        let (mut dp, mut dm) = (T::zero(), T::zero());
        for (a, b) in next.iter().zip(&x) {
            dp += (*a - *b) * (*a - *b);
            dm += (*a + *b) * (*a + *b);
        }
        x = next;
        if dp.min(dm).sqrt() < tol {
            break;
        }
    }
    x
}

/// Symmetric rank-`R` decomposition `k4 ≈ sum_r lambda_r v_r^{⊗4}`.
pub fn decompose_k4<T: Scalar>(
    k4: &SymTen4<T>,
    rank: Rank,
    population: bool,
    cfg: &RecoveryConfig,
) -> Result<Decomposition<T>> {
    cfg.validate()?;
    let dim = k4.dim();
    let m = packed_len2(dim);
    let (eigs, vecs) = sorted_eigen(flatten(k4).into_matrix());
    let (r, rank_warning) = match rank {
        Rank::Fixed(r) => (r, None),
        Rank::Auto => choose_rank(&eigs, dim, population, cfg),
    };
    // C(I,2), except that binary quartics of rank two are also unique.
    let bound = (dim * (dim - 1) / 2).max(dim);
    if r == 0 {
        return Err(Error::InvalidConfig("rank must be at least 1".into()));
    }
    if r >= m || (cfg.enforce_uniqueness_bound && r > bound) {
        let bound = if cfg.enforce_uniqueness_bound { bound.min(m - 1) } else { m - 1 };
        return Err(Error::RankTooLarge { rank: r, bound });
    }
    let sub = Subspace { dim, basis: vecs.columns(0, r).into_owned() };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts: Vec<Vec<T>> = (0..cfg.starts_per_rank * r).map(|_| random_unit(dim, &mut rng)).collect();
    let finals: Vec<(Vec<T>, T)> = starts
        .into_par_iter()
        .map(|x0| {
            let x = power_run(&sub, x0, cfg);
            let f = sub.fit(&x);
            (x, f)
        })
        .collect();

    let accept = T::one() - T::lit(cfg.accept_eps_for(population));
    let mut ranked: Vec<(usize, &(Vec<T>, T))> = finals.iter().enumerate().filter(|(_, (_, f))| *f >= accept).collect();
    ranked.sort_by(|a, b| b.1 .1.partial_cmp(&a.1 .1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    let dedup = T::lit(cfg.dedup_cos);
    let mut chosen: Vec<(Vec<T>, T)> = Vec::with_capacity(r);
    for (_, (x, f)) in ranked {
        if chosen.iter().all(|(c, _)| abs_cosine(c, x) <= dedup) {
            chosen.push((canonical_direction(x), *f));
            if chosen.len() == r {
                break;
            }
        }
    }
    // Noisy subspaces can have fewer than R attractors: deflate the found
    // directions and search the remainder, one vector per round.
    while chosen.len() < r {
        let found: Vec<Vec<T>> = chosen.iter().map(|(v, _)| v.clone()).collect();
        let rest = deflate(&sub, &found);
        let starts: Vec<Vec<T>> =
            (0..cfg.starts_per_rank * (r - found.len())).map(|_| random_unit(dim, &mut rng)).collect();
        let best = starts
            .into_par_iter()
            .map(|x0| {
                let x = power_run(&rest, x0, cfg);
                let f = sub.fit(&x);
                (x, f)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .filter(|(x, f)| *f >= accept && found.iter().all(|c| abs_cosine(c, x) <= dedup))
            .fold(None::<(Vec<T>, T)>, |acc, cand| match acc {
                Some(a) if a.1 >= cand.1 => Some(a),
                _ => Some(cand),
            });
        match best {
            Some((x, f)) => chosen.push((canonical_direction(&x), f)),
            None => break,
        }
    }
    if chosen.len() < r {
        return Err(Error::DecompositionFailure {
            found: chosen.len(),
            wanted: r,
            partial: chosen.iter().map(|(v, _)| v.iter().map(|x| x.as_f64()).collect()).collect(),
        });
    }

    let vectors: Vec<Vec<T>> = chosen.iter().map(|(v, _)| v.clone()).collect();
    let lambdas = fourth_order_coefficients(k4, &vectors);
    let residual = k4_residual(k4, &vectors, &lambdas);
    Ok(Decomposition {
        vectors,
        lambdas,
        fit: chosen.iter().map(|(_, f)| *f).collect(),
        subspace_rank: r,
        eigenvalues: eigs,
        rank_warning,
        residual,
    })
}

/// Least-squares `lambda` minimising `|k4 - sum_r lambda_r v_r^{⊗4}|` for unit `v_r`.
pub fn fourth_order_coefficients<T: Scalar>(k4: &SymTen4<T>, vectors: &[Vec<T>]) -> Vec<T> {
    let r = vectors.len();
    let gram = DMatrix::from_fn(r, r, |a, b| crate::mixing::dot(&vectors[a], &vectors[b]).powi(4));
    let rhs = DVector::from_iterator(r, vectors.iter().map(|v| k4.eval(v)));
    least_squares(gram, rhs)
}

/// Orthonormal basis of the column space of `a`.
fn orthonormal_range<T: Scalar>(a: &DMatrix<T>) -> DMatrix<T> {
    if a.ncols() == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let cut = svd.singular_values.max() * T::lit(1e-10);
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] > cut).collect();
    DMatrix::from_fn(a.nrows(), keep.len(), |i, k| u[(i, keep[k])])
}

fn least_squares<T: Scalar>(a: DMatrix<T>, b: DVector<T>) -> Vec<T> {
    let svd = a.svd(true, true);
    let eps = svd.singular_values.max() * T::eps() * T::from_usize_lossy(b.len().max(1));
    svd.solve(&b, eps).map(|x| x.iter().copied().collect()).unwrap_or_else(|_| vec![T::zero(); b.len()])
}

/// `|k4 - sum_r lambda_r v_r^{⊗4}|`.
pub fn k4_residual<T: Scalar>(k4: &SymTen4<T>, vectors: &[Vec<T>], lambdas: &[T]) -> T {
    let mut t = k4.clone();
    for (v, &l) in vectors.iter().zip(lambdas) {
        t.add_outer(-l, v);
    }
    t.frobenius_norm()
}

/// Output of [`recover_gaussian_column`].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianColumn<T: Scalar> {
    pub v: Vec<T>,
    /// Coefficients of the known columns followed by that of `v`.
    pub coefficients: Vec<T>,
    pub objective: T,
}

/// `|κ2 - sum_j l_j a_j^{⊗2} - l_J v^{⊗2}|` with `v` normalised first.
pub fn span_residual<T: Scalar>(k2: &SymMat<T>, known: &[Vec<T>], v: &[T], l: &[T]) -> T {
    span_residual_sq(k2, known, v, l).max(T::zero()).sqrt()
}

fn span_residual_sq<T: Scalar>(k2: &SymMat<T>, known: &[Vec<T>], v: &[T], l: &[T]) -> T {
    let nv = norm(v);
    let mut r = k2.clone();
    for (a, &c) in known.iter().zip(l) {
        r.add_outer(-c, a);
    }
    let c = l[known.len()] / (nv * nv);
    r.add_outer(-c, v);
    let s = r.frobenius_norm();
    s * s
}

/// Finds the Gaussian column: a unit `v`, not collinear with any known
/// column, such that `v^{⊗2}` lies in the span of `κ2` and the squared known
/// columns.
pub fn recover_gaussian_column<T: Scalar>(
    k2: &SymMat<T>,
    known: &[Vec<T>],
    cfg: &RecoveryConfig,
) -> Result<GaussianColumn<T>> {
    cfg.validate()?;
    let dim = k2.dim();
    if let Some(bad) = known.iter().find(|a| a.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: bad.len() });
    }
    for i in 0..known.len() {
        for j in i + 1..known.len() {
            if abs_cosine(&known[i], &known[j]) > T::lit(cfg.dedup_cos) {
                return Err(Error::ModelViolation(format!("known columns {i} and {j} are collinear")));
            }
        }
    }
    let k2_norm = k2.frobenius_norm();

    // κ2 already in the span of the known squares: nothing left for v.
    if !known.is_empty() {
        let basis = DMatrix::from_fn(packed_len2(dim), known.len(), |p, j| SymMat::outer(&known[j]).to_weighted()[p]);
        let target = k2.to_weighted();
        let coef = least_squares(basis.clone(), target.clone());
        let fitted = &basis * DVector::from_vec(coef);
        let rem = (target - fitted).norm();
        if rem <= T::lit(cfg.gaussian_ratio_tol) * k2_norm.max(T::eps()) {
            return Err(Error::GaussianColumnUndetected { ratio: 0.0 });
        }
    }

    let j = known.len() + 1;
    let m = packed_len2(dim);
    let basis = DMatrix::from_fn(m, known.len(), |p, c| SymMat::outer(&known[c]).to_weighted()[p]);
    let q = orthonormal_range(&basis);
    let target = k2.to_weighted();
    let r0 = if q.ncols() > 0 { &target - &q * q.tr_mul(&target) } else { target.clone() };
    let r0_sq = r0.norm_squared();

    // l eliminated: squared distance from κ2 to span{a_j a_j^T, v v^T}.
    let projected = |v: &[T]| -> T {
        let nv2 = v.iter().fold(T::zero(), |s, &x| s + x * x);
        if nv2 == T::zero() {
            return T::lit(f64::INFINITY);
        }
        let mut x = SymMat::outer(v).to_weighted();
        x /= nv2;
        let w = if q.ncols() > 0 { &x - &q * q.tr_mul(&x) } else { x };
        let w2 = w.norm_squared();
        if w2 <= T::eps() * T::eps() {
            return r0_sq;
        }
        let c = r0.dot(&w);
        (r0_sq - c * c / w2).max(T::zero())
    };
    let mut mcfg = cfg.minimize;
    mcfg.seed = cfg.seed ^ 0x9e37_79b9_7f4a_7c15;
    let reduced = best_of_restarts(projected, |_, rng: &mut ChaCha8Rng| random_unit(dim, rng), &mcfg)?;

    // joint polish over (v, l) from the reduced optimum
    let v0 = canonical_direction(&reduced.x);
    let mut full = basis.clone().resize_horizontally(j, T::zero());
    full.set_column(j - 1, &SymMat::outer(&v0).to_weighted());
    let mut x0 = v0.clone();
    x0.extend(least_squares(full, target));
    let joint = |p: &[T]| {
        let (v, l) = p.split_at(dim);
        if norm(v) == T::zero() {
            return T::lit(f64::INFINITY);
        }
        span_residual_sq(k2, known, v, l)
    };
    let polished = powell_minimize(joint, &x0, &mcfg)?;
    let best = if polished.f <= joint(&x0) { polished.x } else { x0 };

    let (v_raw, l_raw) = best.split_at(dim);
    let v = canonical_direction(v_raw);
    let l = l_raw.to_vec();
    let obj = span_residual(k2, known, &v, &l);
    let threshold = cfg.residual_abs_tol + cfg.residual_rel_tol * k2_norm.as_f64();
    if obj.as_f64() > threshold {
        return Err(Error::ResidualTooLarge { objective: obj.as_f64(), threshold });
    }
    let l_norm = norm(&l);
    let ratio = if l_norm == T::zero() { 0.0 } else { (l[j - 1].abs() / l_norm).as_f64() };
    if ratio < cfg.gaussian_ratio_tol || known.iter().any(|a| abs_cosine(a, &v) > T::lit(cfg.dedup_cos)) {
        return Err(Error::GaussianColumnUndetected { ratio });
    }
    Ok(GaussianColumn { v, coefficients: l, objective: obj })
}

/// Full pipeline: decompose `κ4` into `J - 1` terms, then find the Gaussian
/// column from `κ2`. `num_sources = None` takes `J` from the detected rank.
pub fn recover<T: Scalar>(
    cp: &CumulantPair<T>,
    num_sources: Option<usize>,
    cfg: &RecoveryConfig,
) -> Result<RecoveryResult<T>> {
    let rank = match num_sources {
        Some(0) | Some(1) => {
            return Err(Error::InvalidConfig("need at least two sources (one Gaussian, one not)".into()))
        }
        Some(j) => Rank::Fixed(j - 1),
        None => Rank::Auto,
    };
    let decomposition = decompose_k4(&cp.k4, rank, cp.is_population(), cfg)?;
    let gauss = recover_gaussian_column(&cp.k2, &decomposition.vectors, cfg)?;
    let mut cols = decomposition.vectors.clone();
    cols.push(gauss.v.clone());
    let a_hat = MixingMatrix::from_columns(&cols)?;
    let objective = frobenius_fit(&cp.k2, &cols, &gauss.coefficients);
    Ok(RecoveryResult { a_hat, coefficients: gauss.coefficients, objective, decomposition })
}

/// `|κ2 - sum_j l_j a_j^{⊗2}|`.
pub fn frobenius_fit<T: Scalar>(k2: &SymMat<T>, cols: &[Vec<T>], l: &[T]) -> T {
    let mut fit = SymMat::zeros(k2.dim());
    for (a, &c) in cols.iter().zip(l) {
        fit.add_outer(c, a);
    }
    crate::tensors::frobenius_distance(k2, &fit).expect("same dimension")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulants::{population_cumulants, SourceSpec};

    fn example_matrix() -> MixingMatrix<f64> {
        crate::fixtures::example_4x6()
    }

    #[test]
    fn orthogonal_diagonal_tensor() {
        let mut k4 = SymTen4::<f64>::outer(&[1.0, 0.0]);
        k4.add_outer(1.0, &[0.0, 1.0]);
        k4.scale(6.0);
        let d = decompose_k4(&k4, Rank::Fixed(2), true, &RecoveryConfig::default()).unwrap();
        let mut vs = d.vectors.clone();
        vs.sort_by(|a, b| b[0].partial_cmp(&a[0]).unwrap());
        assert!((vs[0][0] - 1.0).abs() < 1e-10 && vs[0][1].abs() < 1e-6);
        assert!((vs[1][1] - 1.0).abs() < 1e-10 && vs[1][0].abs() < 1e-6);
        for l in &d.lambdas {
            assert!((l - 6.0).abs() < 1e-8);
        }
    }

    #[test]
    fn auto_rank_population() {
        let a = example_matrix();
        let cp = population_cumulants(&a, &SourceSpec::synthetic_default(5, 1.0).unwrap()).unwrap();
        let d = decompose_k4(&cp.k4, Rank::Auto, true, &RecoveryConfig::default()).unwrap();
        assert_eq!(d.subspace_rank, 5);
        assert!(d.rank_warning.is_none());
    }

    #[test]
    fn rank_above_uniqueness_bound_rejected() {
        let k4 = SymTen4::<f64>::outer(&[1.0, 0.0, 0.0]);
        let r = decompose_k4(&k4, Rank::Fixed(4), true, &RecoveryConfig::default());
        assert_eq!(r.unwrap_err(), Error::RankTooLarge { rank: 4, bound: 3 });
    }

    #[test]
    fn pure_rank_one_second_cumulant() {
        let w = [0.6, -0.8, 0.0];
        let k2 = SymMat::outer(&w);
        let g = recover_gaussian_column(&k2, &[], &RecoveryConfig::default()).unwrap();
        assert!(abs_cosine(&g.v, &w) > 1.0 - 1e-8);
        assert!(g.objective < 1e-6);
    }

    #[test]
    fn second_cumulant_in_known_span() {
        let mut k2 = SymMat::<f64>::outer(&[1.0, 0.0]);
        k2.scale(2.0);
        let r = recover_gaussian_column(&k2, &[vec![1.0, 0.0]], &RecoveryConfig::default());
        assert!(matches!(r, Err(Error::GaussianColumnUndetected { .. })));
    }

    #[test]
    fn inconsistent_second_cumulant() {
        // identity in 3 dimensions is not a known square plus one rank-one term
        let k2 = SymMat::identity(3);
        let cfg = RecoveryConfig { residual_rel_tol: 0.01, ..Default::default() };
        let r = recover_gaussian_column(&k2, &[vec![1.0, 0.0, 0.0]], &cfg);
        assert!(matches!(r, Err(Error::ResidualTooLarge { .. })));
    }

    #[test]
    fn scaling_equivariance_of_decomposition() {
        let a = example_matrix();
        let cp = population_cumulants(&a, &SourceSpec::synthetic_default(5, 1.0).unwrap()).unwrap();
        let cfg = RecoveryConfig::default();
        let d1 = decompose_k4(&cp.k4, Rank::Fixed(5), true, &cfg).unwrap();
        let mut k4c = cp.k4.clone();
        k4c.scale(3.5);
        let d2 = decompose_k4(&k4c, Rank::Fixed(5), true, &cfg).unwrap();
        for (u, l1) in d1.vectors.iter().zip(&d1.lambdas) {
            let k = (0..5).max_by(|&a, &b| abs_cosine(u, &d2.vectors[a]).partial_cmp(&abs_cosine(u, &d2.vectors[b])).unwrap()).unwrap();
            assert!(abs_cosine(u, &d2.vectors[k]) > 1.0 - 1e-10);
            let l2 = d2.lambdas[k];
            assert!((l1 * 3.5 - l2).abs() < 1e-8 * l2.abs().max(1.0));
        }
    }
}
