//! Identifiability of a mixing matrix: generic classification by size, the
//! 2x2-minor kernel test, a numeric search for rank-one matrices in the span
//! of the squared columns, and the source construction that turns such a
//! matrix into two indistinguishable models.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cumulants::SourceDist;
use crate::error::{Error, Result};
use crate::mixing::{abs_cosine, canonical_direction, MixingMatrix};
use crate::optimize::{powell_minimize, MinimizeConfig};
use crate::scalar::Scalar;
use crate::tensors::{packed_len2, SymMat};

/// Relative singular-value cut for numerical ranks.
pub const RANK_REL_TOL: f64 = 1e-10;

/// Outcome of a classification or a probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    GenericIdentifiable,
    GenericNonIdentifiable,
    GenericAmbiguous,
    /// `bb^T = sum_j coefficients_j a_j a_j^T` with `b` unit and away from every column.
    WitnessFound { b: Vec<f64>, coefficients: Vec<f64>, residual: f64 },
    NoWitnessFound { best_residual: f64, starts: usize },
    CollinearColumns { pair: (usize, usize) },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::GenericIdentifiable => "identifiable",
            Verdict::GenericNonIdentifiable => "non-identifiable",
            Verdict::GenericAmbiguous => "ambiguous",
            Verdict::WitnessFound { .. } => "witness_found",
            Verdict::NoWitnessFound { .. } => "no_witness_found",
            Verdict::CollinearColumns { .. } => "collinear_columns",
        }
    }
}

fn binom2(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Identifiability of a generic real `I x J` matrix.
pub fn classify_generic(rows: usize, cols: usize) -> Verdict {
    let n = binom2(rows);
    if cols <= n || (rows, cols) == (2, 2) || (rows, cols) == (3, 4) {
        Verdict::GenericIdentifiable
    } else if cols == n + 1 && rows >= 4 && matches!(rows % 4, 2 | 3) {
        Verdict::GenericAmbiguous
    } else {
        Verdict::GenericNonIdentifiable
    }
}

/// Column pairs `(i, j)`, `i < j`, with `|cos| > 1 - tol`.
pub fn collinear_pairs<T: Scalar>(a: &MixingMatrix<T>, tol: T) -> Vec<(usize, usize)> {
    let cols = a.columns();
    let mut out = Vec::new();
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            if abs_cosine(&cols[i], &cols[j]) > T::one() - tol {
                out.push((i, j));
            }
        }
    }
    out
}

fn numerical_rank<T: Scalar>(sv: &DVector<T>) -> usize {
    let top = sv.iter().fold(T::zero(), |m, &s| m.max(s));
    if top == T::zero() {
        return 0;
    }
    let cut = T::lit(RANK_REL_TOL) * top;
    sv.iter().filter(|&&s| s > cut).count()
}

/// Numerical rank of the Khatri-Rao square (columns `a_j a_j^T`).
pub fn khatri_rao_rank<T: Scalar>(a: &MixingMatrix<T>) -> usize {
    if a.cols() == 0 {
        return 0;
    }
    numerical_rank(&a.khatri_rao_weighted().svd(false, false).singular_values)
}

/// Orthonormal basis (isometric coordinates) of the span of the squared
/// columns, and a basis of its orthogonal complement.
pub(crate) fn square_span_bases<T: Scalar>(a: &MixingMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    let m = packed_len2(a.rows());
    let kr = a.khatri_rao_weighted();
    // pad so the left factor is square
    let padded = if kr.ncols() < m { kr.clone().resize_horizontally(m, T::zero()) } else { kr.clone() };
    let svd = padded.svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let rank = numerical_rank(&svd.singular_values).min(kr.ncols());
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].partial_cmp(&svd.singular_values[x]).unwrap_or(std::cmp::Ordering::Equal));
    let span = DMatrix::from_fn(m, rank, |i, k| u[(i, order[k])]);
    let comp = DMatrix::from_fn(m, m - rank, |i, k| u[(i, order[rank + k])]);
    (span, comp)
}

/// The minor matrices of the kernel test.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport<T: Scalar> {
    /// `C(I,2) x C(J,2)`: entry `((k,k'),(i,j)) = a_ki a_k'j - a_k'i a_kj`.
    pub c: DMatrix<T>,
    /// `C(n+1,2) x C(J,2)`: row `(p,q)`, `p <= q`, is `C_p * C_q` entrywise.
    pub d: DMatrix<T>,
    pub kernel_dim: usize,
    /// Columns span `ker D`.
    pub kernel_basis: DMatrix<T>,
}

/// Lexicographic pairs `(i, j)`, `i < j < n`.
pub fn strict_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// Builds `C(A)` and `D(A)` and the kernel of `D(A)`.
///
/// `sum_j lambda_j a_j a_j^T` has rank at most one exactly when
/// `D(A) (lambda_i lambda_j)_{i<j} = 0`.
pub fn kernel_report<T: Scalar>(a: &MixingMatrix<T>) -> Result<KernelReport<T>> {
    if a.cols() < 2 {
        return Err(Error::InvalidConfig("the kernel test needs at least two columns".into()));
    }
    let m = a.matrix();
    let row_pairs = strict_pairs(a.rows());
    let col_pairs = strict_pairs(a.cols());
    let c = DMatrix::from_fn(row_pairs.len(), col_pairs.len(), |p, q| {
        let (k, k2) = row_pairs[p];
        let (i, j) = col_pairs[q];
        m[(k, i)] * m[(k2, j)] - m[(k2, i)] * m[(k, j)]
    });
    let n = row_pairs.len();
    let d_rows: Vec<(usize, usize)> = (0..n).flat_map(|p| (p..n).map(move |q| (p, q))).collect();
    let d = DMatrix::from_fn(d_rows.len(), col_pairs.len(), |r, q| {
        let (p1, p2) = d_rows[r];
        c[(p1, q)] * c[(p2, q)]
    });
    let cols = col_pairs.len();
    let padded = if d.nrows() < cols { d.clone().resize_vertically(cols, T::zero()) } else { d.clone() };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors");
    let rank = numerical_rank(&svd.singular_values);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].partial_cmp(&svd.singular_values[x]).unwrap_or(std::cmp::Ordering::Equal));
    let kernel_dim = cols - rank;
    let kernel_basis = DMatrix::from_fn(cols, kernel_dim, |i, k| vt[(order[rank + k], i)]);
    Ok(KernelReport { c, d, kernel_dim, kernel_basis })
}

/// `(lambda_i lambda_j)_{i<j}` in the column order of `D(A)`.
pub fn pair_products<T: Scalar>(lambda: &[T]) -> DVector<T> {
    let pairs = strict_pairs(lambda.len());
    DVector::from_iterator(pairs.len(), pairs.iter().map(|&(i, j)| lambda[i] * lambda[j]))
}

impl<T: Scalar> KernelReport<T> {
    /// `|D (lambda_i lambda_j)| / |lambda|^2`.
    pub fn kernel_residual(&self, lambda: &[T]) -> T {
        let n2 = lambda.iter().fold(T::zero(), |s, &x| s + x * x);
        if n2 == T::zero() {
            return T::zero();
        }
        (&self.d * pair_products(lambda)).norm() / n2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub starts: usize,
    /// Largest normalised residual accepted as a witness.
    pub witness_tol: f64,
    /// Candidates with `|cos|` above this against a column count as that column.
    pub collinear_cos: f64,
    /// Columns closer than `1 - collinear_tol` in `|cos|` are collinear.
    pub collinear_tol: f64,
    /// Standard deviation of the perturbation of column starts.
    pub start_noise: f64,
    pub minimize: MinimizeConfig,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            starts: 200,
            witness_tol: 1e-8,
            collinear_cos: 0.99,
            collinear_tol: 1e-9,
            start_noise: 0.1,
            minimize: MinimizeConfig::default(),
            seed: 0,
        }
    }
}

/// `|(Id - QQ^T) w(bb^T)| / |b|^2` given a basis `comp` of the complement.
fn span_distance<T: Scalar>(comp: &DMatrix<T>, b: &[T]) -> T {
    let nb = b.iter().fold(T::zero(), |s, &x| s + x * x);
    if nb == T::zero() {
        return T::lit(f64::INFINITY);
    }
    if comp.ncols() == 0 {
        return T::zero();
    }
    comp.tr_mul(&SymMat::outer(b).to_weighted()).norm() / nb
}

/// Searches for a unit `b`, not collinear with any column, such that `bb^T`
/// lies in the span of the squared columns.
///
/// Minimises the span distance divided by `prod_j min(1, sin^2(b, a_j) / delta^2)`
/// where `delta` is the sine at the collinearity cut, so every column is a
/// pole rather than a trivial minimiser.
pub fn rank_one_probe<T: Scalar>(a: &MixingMatrix<T>, cfg: &ProbeConfig) -> Result<Verdict> {
    cfg.minimize.validate()?;
    if cfg.starts == 0 {
        return Err(Error::InvalidConfig("starts must be at least 1".into()));
    }
    if let Some(&pair) = collinear_pairs(a, T::lit(cfg.collinear_tol)).first() {
        return Ok(Verdict::CollinearColumns { pair });
    }
    let dim = a.rows();
    let unit = a.canonical();
    let cols = unit.columns();
    let (_, comp) = square_span_bases(&unit);
    let delta2 = T::lit(1.0 - cfg.collinear_cos * cfg.collinear_cos);
    let penalty = |b: &[T]| -> T {
        let nb2 = b.iter().fold(T::zero(), |s, &x| s + x * x);
        cols.iter().fold(T::one(), |acc, c| {
            let cs = crate::mixing::dot(c, b);
            let sin2 = (T::one() - cs * cs / nb2).max(T::zero());
            acc * (sin2 / delta2).min(T::one())
        })
    };
    let objective = |b: &[T]| -> T {
        let p = penalty(b);
        if p == T::zero() {
            return T::lit(f64::INFINITY);
        }
        span_distance(&comp, b) / p
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = cfg.start_noise;
    let starts: Vec<Vec<T>> = (0..cfg.starts)
        .map(|k| {
            if k % 2 == 1 && !cols.is_empty() {
                let c = &cols[(k / 2) % cols.len()];
                c.iter().map(|&x| x + T::lit(noise * rng.sample::<f64, _>(StandardNormal))).collect()
            } else {
                let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                v.into_iter().map(T::lit).collect()
            }
        })
        .collect();
    let runs: Vec<Option<(Vec<T>, T)>> = starts
        .par_iter()
        .map(|x0| powell_minimize(&objective, x0, &cfg.minimize).ok().map(|r| (r.x, r.f)))
        .collect();

    let cut = T::lit(cfg.collinear_cos);
    let separated = |b: &[T]| cols.iter().all(|c| abs_cosine(c, b) <= cut);
    let mut best_witness: Option<(Vec<T>, T)> = None;
    let mut best_residual: Option<T> = None;
    for (b, g) in runs.into_iter().flatten() {
        if !g.finite() || !separated(&b) {
            continue;
        }
        let resid = span_distance(&comp, &b);
        if best_residual.is_none_or(|r| resid < r) {
            best_residual = Some(resid);
        }
        if resid <= T::lit(cfg.witness_tol) && best_witness.as_ref().is_none_or(|(_, bg)| g < *bg) {
            best_witness = Some((b, g));
        }
    }
    if let Some((b, _)) = best_witness {
        let b = canonical_direction(&b);
        let coefficients = square_coefficients(a, &b);
        let residual = span_distance(&comp, &b).as_f64();
        return Ok(Verdict::WitnessFound { b: to_f64(&b), coefficients: to_f64(&coefficients), residual });
    }
    Ok(Verdict::NoWitnessFound {
        best_residual: best_residual.map_or(f64::INFINITY, |r| r.as_f64()),
        starts: cfg.starts,
    })
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

/// Least-squares coefficients of `bb^T` on the squared columns of `a`.
pub fn square_coefficients<T: Scalar>(a: &MixingMatrix<T>, b: &[T]) -> Vec<T> {
    let kr = a.khatri_rao_weighted();
    let target = SymMat::outer(b).to_weighted();
    let svd = kr.svd(true, true);
    let eps = svd.singular_values.max() * T::lit(RANK_REL_TOL);
    svd.solve(&target, eps).map(|x| x.iter().copied().collect()).unwrap_or_else(|_| vec![T::zero(); a.cols()])
}

/// Relative residual `|bb^T - sum_j lambda_j a_j a_j^T| / |bb^T|`.
pub fn witness_residual<T: Scalar>(a: &MixingMatrix<T>, b: &[T], lambda: &[T]) -> T {
    let target = SymMat::outer(b);
    let mut r = target.clone();
    for (c, &l) in a.columns().iter().zip(lambda) {
        r.add_outer(-l, c);
    }
    r.frobenius_norm() / target.frobenius_norm().max(T::eps())
}

/// A source that is a base distribution plus an independent centred Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeSource {
    pub base: Option<SourceDist>,
    pub extra_variance: f64,
}

impl CompositeSource {
    pub fn variance(&self) -> Result<f64> {
        let b = match self.base {
            Some(d) => d.moments()?.0,
            None => 0.0,
        };
        Ok(b + self.extra_variance)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let b = match self.base {
            Some(d) => d.sample(rng)?,
            None => 0.0,
        };
        let z: f64 = if self.extra_variance > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
        Ok(b + self.extra_variance.sqrt() * z)
    }
}

/// Two models `x = A s` and `x = B r` with the same distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessModels<T: Scalar> {
    pub a: MixingMatrix<T>,
    pub sources_a: Vec<CompositeSource>,
    pub b: MixingMatrix<T>,
    pub sources_b: Vec<CompositeSource>,
}

impl<T: Scalar> WitnessModels<T> {
    /// Closed-form covariances of `A s` and `B r`.
    pub fn population_covariances(&self) -> Result<(SymMat<T>, SymMat<T>)> {
        let cov = |m: &MixingMatrix<T>, srcs: &[CompositeSource]| -> Result<SymMat<T>> {
            let mut k = SymMat::zeros(m.rows());
            for (j, s) in srcs.iter().enumerate() {
                k.add_outer(T::lit(s.variance()?), &m.column(j));
            }
            Ok(k)
        };
        Ok((cov(&self.a, &self.sources_a)?, cov(&self.b, &self.sources_b)?))
    }

    /// `n` draws of each model, as two `n x I` matrices.
    pub fn sample(&self, n: usize, seed: u64) -> Result<(DMatrix<T>, DMatrix<T>)> {
        let draw = |m: &MixingMatrix<T>, srcs: &[CompositeSource], seed: u64| -> Result<DMatrix<T>> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = DMatrix::zeros(n, m.rows());
            let mut s = vec![T::zero(); srcs.len()];
            for r in 0..n {
                for (slot, src) in s.iter_mut().zip(srcs) {
                    *slot = T::lit(src.sample(&mut rng)?);
                }
                for i in 0..m.rows() {
                    out[(r, i)] = (0..srcs.len()).fold(T::zero(), |acc, j| acc + m.matrix()[(i, j)] * s[j]);
                }
            }
            Ok(out)
        };
        Ok((draw(&self.a, &self.sources_a, seed)?, draw(&self.b, &self.sources_b, seed ^ 0x5bd1_e995)?))
    }
}

/// Builds two source models with equal observed distributions from a witness
/// `bb^T = sum_{j<J} lambda_j a_j a_j^T + lambda_J a_J a_J^T`.
///
/// `lambda` has length `J - 1` (coefficient of `a_J` taken as one) or `J`
/// (any positive last coefficient). Non-Gaussian parts are exponential(1);
/// `s_J` is standard Gaussian and `r_J` Gaussian with variance `1/lambda_J`.
pub fn witness_distributions<T: Scalar>(a: &MixingMatrix<T>, b: &[T], lambda: &[T]) -> Result<WitnessModels<T>> {
    let cols = a.cols();
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: b.len() });
    }
    let full: Vec<T> = match lambda.len() {
        l if l + 1 == cols => lambda.iter().copied().chain([T::one()]).collect(),
        l if l == cols => lambda.to_vec(),
        l => return Err(Error::DimensionMismatch { expected: cols - 1, found: l }),
    };
    if let Some(j) = (0..cols).find(|&j| abs_cosine(&a.column(j), b) > T::lit(0.99)) {
        return Err(Error::DegenerateWitness { column: j });
    }
    let residual = witness_residual(a, b, &full);
    if !(residual <= T::lit(1e-8)) {
        return Err(Error::InvalidWitness { residual: residual.as_f64() });
    }
    let last = full[cols - 1];
    if last <= T::zero() {
        return Err(Error::InvalidWitness { residual: residual.as_f64() });
    }
    let y = SourceDist::Exponential { rate: 1.0 };
    let mut sources_a = Vec::with_capacity(cols);
    let mut sources_b = Vec::with_capacity(cols);
    for &l in &full[..cols - 1] {
        let v = (l / last).as_f64();
        if v >= 0.0 {
            sources_a.push(CompositeSource { base: Some(y), extra_variance: v });
            sources_b.push(CompositeSource { base: Some(y), extra_variance: 0.0 });
        } else {
            sources_a.push(CompositeSource { base: Some(y), extra_variance: 0.0 });
            sources_b.push(CompositeSource { base: Some(y), extra_variance: -v });
        }
    }
    sources_a.push(CompositeSource { base: None, extra_variance: 1.0 });
    sources_b.push(CompositeSource { base: None, extra_variance: 1.0 / last.as_f64() });
    let mut bm = a.clone();
    bm.set_column(cols - 1, b);
    Ok(WitnessModels { a: a.clone(), sources_a, b: bm, sources_b })
}

/// Largest number of exponent vectors the monomial enumeration may hold.
pub const VERONESE_BUDGET: u128 = 20_000_000;

fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Number of distinct monomials of degree `2 ell` in `I` variables that are
/// products of `ell` square-free quadratic monomials `x_i x_j`, `i < j`,
/// counted by enumerating the products step by step.
pub fn projected_veronese_count(rows: usize, ell: usize) -> Result<u64> {
    if rows < 2 {
        return Err(Error::InvalidConfig("need at least two variables".into()));
    }
    if ell == 0 {
        return Ok(1);
    }
    let states = binom((2 * ell + rows - 1) as u64, (rows - 1) as u64);
    if states > VERONESE_BUDGET || ell > u16::MAX as usize / 2 {
        return Err(Error::SizeLimit { what: format!("{states} monomials for I = {rows}, ell = {ell}") });
    }
    let edges = strict_pairs(rows);
    let mut current: HashSet<Vec<u16>> = HashSet::from([vec![0u16; rows]]);
    for _ in 0..ell {
        let mut next = HashSet::with_capacity(current.len() * 2);
        for e in &current {
            for &(i, j) in &edges {
                let mut f = e.clone();
                f[i] += 1;
                f[j] += 1;
                next.insert(f);
            }
        }
        current = next;
    }
    Ok(current.len() as u64)
}

/// Number of degree sequences of loopless multigraphs with `ell` edges on
/// `I` labelled vertices: vectors with `0 <= a_i <= ell` summing to `2 ell`.
pub fn multigraph_degree_count(rows: usize, ell: usize) -> u128 {
    if rows == 0 {
        return u128::from(ell == 0);
    }
    let (i, l) = (rows as u64, ell as u64);
    // at most one coordinate can exceed ell
    let over = if l >= 1 { binom(l + i - 2, i - 1) } else { 0 };
    binom(2 * l + i - 1, i - 1) - i as u128 * over
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn classify_examples() {
        assert_eq!(classify_generic(6, 15), Verdict::GenericIdentifiable);
        assert_eq!(classify_generic(6, 16), Verdict::GenericAmbiguous);
        assert_eq!(classify_generic(8, 29), Verdict::GenericNonIdentifiable);
        assert_eq!(classify_generic(2, 2), Verdict::GenericIdentifiable);
        assert_eq!(classify_generic(3, 4), Verdict::GenericIdentifiable);
        assert_eq!(classify_generic(2, 3), Verdict::GenericNonIdentifiable);
        assert_eq!(classify_generic(4, 7), Verdict::GenericNonIdentifiable);
        assert_eq!(classify_generic(7, 22), Verdict::GenericAmbiguous);
    }

    #[test]
    fn collinear_examples() {
        let a = MixingMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 0.0]);
        assert_eq!(collinear_pairs(&a, 1e-9), vec![(0, 1)]);
        assert!(collinear_pairs(&fixtures::example_2x3::<f64>(), 1e-9).is_empty());
        assert!(collinear_pairs(&MixingMatrix::new(DMatrix::<f64>::identity(3, 3)), 1e-9).is_empty());
    }

    #[test]
    fn khatri_rao_rank_examples() {
        assert_eq!(khatri_rao_rank(&MixingMatrix::new(DMatrix::<f64>::identity(3, 3))), 3);
        assert_eq!(khatri_rao_rank(&fixtures::example_2x3::<f64>()), 3);
        assert!(khatri_rao_rank(&fixtures::example_5x9::<f64>()) < 9);
    }

    #[test]
    fn kernel_report_two_by_three() {
        let r = kernel_report(&fixtures::example_2x3::<f64>()).unwrap();
        assert_eq!(r.c.as_slice(), &[1.0, 1.0, -1.0]);
        assert_eq!(r.d.as_slice(), &[1.0, 1.0, 1.0]);
        assert_eq!(r.kernel_dim, 2);
        assert!(r.kernel_residual(&[-1.0, 2.0, 2.0]) < 1e-15);
    }

    #[test]
    fn kernel_report_identity_and_shape() {
        let r = kernel_report(&MixingMatrix::new(DMatrix::<f64>::identity(2, 2))).unwrap();
        assert_eq!(r.c.as_slice(), &[1.0]);
        assert_eq!(r.d.as_slice(), &[1.0]);
        assert_eq!(r.kernel_dim, 0);
        let r = kernel_report(&fixtures::example_4x6::<f64>()).unwrap();
        assert_eq!(r.c.shape(), (6, 15));
        assert_eq!(r.d.shape(), (21, 15));
    }

    #[test]
    fn probe_identity_finds_nothing() {
        let a = MixingMatrix::new(DMatrix::<f64>::identity(3, 3));
        let cfg = ProbeConfig { starts: 40, ..Default::default() };
        assert!(matches!(rank_one_probe(&a, &cfg).unwrap(), Verdict::NoWitnessFound { .. }));
    }

    #[test]
    fn probe_duplicate_column() {
        let a = MixingMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, 0.0, 1.0, 0.0]);
        assert_eq!(rank_one_probe(&a, &ProbeConfig::default()).unwrap(), Verdict::CollinearColumns { pair: (0, 2) });
    }

    #[test]
    fn probe_two_by_three_finds_sound_witness() {
        let a = fixtures::example_2x3::<f64>();
        let cfg = ProbeConfig { starts: 20, ..Default::default() };
        match rank_one_probe(&a, &cfg).unwrap() {
            Verdict::WitnessFound { b, coefficients, residual } => {
                assert!(residual <= 1e-8);
                assert!(witness_residual(&a, &b, &coefficients) < 1e-6);
                for c in a.columns() {
                    assert!(abs_cosine(&c, &b) <= 0.99);
                }
            }
            v => panic!("unexpected {v:?}"),
        }
    }

    #[test]
    fn witness_models_for_two_by_three() {
        let a = fixtures::example_2x3::<f64>();
        let (b, l) = fixtures::example_2x3_witness();
        let w = witness_distributions(&a, &b, &l).unwrap();
        assert_eq!(w.b, MixingMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 2.0]));
        let (ka, kb) = w.population_covariances().unwrap();
        for (x, y) in ka.packed().iter().zip(kb.packed()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn witness_errors() {
        let a = fixtures::example_2x3::<f64>();
        let r = witness_distributions(&a, &[1.0, 1.0], &[0.0, 0.0]);
        assert_eq!(r.unwrap_err(), Error::DegenerateWitness { column: 2 });
        let r = witness_distributions(&a, &[1.0, 3.0], &[-1.0, 2.0, 2.0]);
        assert!(matches!(r, Err(Error::InvalidWitness { .. })));
    }

    #[test]
    fn veronese_small_counts() {
        assert_eq!(projected_veronese_count(3, 1).unwrap(), 3);
        assert_eq!(projected_veronese_count(2, 2).unwrap(), 1);
        assert!(matches!(projected_veronese_count(12, 400), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn degree_count_closed_form_small() {
        assert_eq!(multigraph_degree_count(3, 1), 3);
        assert_eq!(multigraph_degree_count(2, 2), 1);
        // 4 vertices, 2 edges: 6 pairs of distinct-support sequences... enumerate directly
        let direct = (0..=2u32)
            .flat_map(|a| (0..=2u32).flat_map(move |b| (0..=2u32).flat_map(move |c| (0..=2u32).map(move |d| [a, b, c, d]))))
            .filter(|v| v.iter().sum::<u32>() == 4)
            .count();
        assert_eq!(multigraph_degree_count(4, 2), direct as u128);
    }
}
