//! Quadric systems: the quadrics cut out by the linear relations among the
//! squared columns of a mixing matrix, and explicit quadric systems in `n`
//! variables with `2^n` tracked solutions of which a prescribed number are real.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixing::MixingMatrix;
use crate::scalar::Scalar;
use crate::tensors::{packed_len2, pairs, SymMat};

/// Imaginary parts below this count as zero.
pub const REAL_TOL: f64 = 1e-8;

/// Polynomials `f_k(x) = x^T F_k x + g_k . x + c_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadricSystem<T: Scalar> {
    pub dim: usize,
    pub forms: Vec<SymMat<T>>,
    /// Linear parts, one per form; all zero for homogeneous systems.
    pub linear: Vec<Vec<T>>,
    pub constants: Vec<T>,
    pub homogeneous: bool,
}

impl<T: Scalar> QuadricSystem<T> {
    pub fn homogeneous(dim: usize, forms: Vec<SymMat<T>>) -> Self {
        let k = forms.len();
        Self { dim, forms, linear: vec![vec![T::zero(); dim]; k], constants: vec![T::zero(); k], homogeneous: true }
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: n });
        }
        Ok(())
    }

    /// `(f_1(x), ..., f_k(x))`.
    pub fn evaluate(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_dim(x.len())?;
        Ok(self
            .forms
            .iter()
            .zip(&self.linear)
            .zip(&self.constants)
            .map(|((f, g), &c)| f.quadratic_form(x) + g.iter().zip(x).fold(T::zero(), |s, (&a, &b)| s + a * b) + c)
            .collect())
    }

    /// Evaluation at a complex point.
    pub fn evaluate_complex(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        self.check_dim(x.len())?;
        Ok(self
            .forms
            .iter()
            .zip(&self.linear)
            .zip(&self.constants)
            .map(|((f, g), &c)| {
                let mut s = Complex::new(c, T::zero());
                for (i, j) in pairs(self.dim) {
                    let w = if i == j { f.get(i, i) } else { f.get(i, j) + f.get(i, j) };
                    s += x[i] * x[j] * w;
                }
                for (gi, xi) in g.iter().zip(x) {
                    s += *xi * *gi;
                }
                s
            })
            .collect())
    }

    /// Substitutes `x = Q y + t`.
    fn substitute(&self, q: &DMatrix<T>, t: &[T]) -> Self {
        let n = self.dim;
        let tv = nalgebra::DVector::from_column_slice(t);
        let mut out = self.clone();
        for k in 0..self.len() {
            let f = self.forms[k].to_full();
            let g = nalgebra::DVector::from_column_slice(&self.linear[k]);
            let f2 = q.transpose() * &f * q;
            let g2 = q.transpose() * (&f * &tv * T::lit(2.0) + &g);
            let c2 = tv.dot(&(&f * &tv)) + g.dot(&tv) + self.constants[k];
            out.forms[k] = SymMat::from_full(&((&f2 + f2.transpose()) * T::lit(0.5))).expect("square");
            out.linear[k] = g2.iter().copied().collect();
            out.constants[k] = c2;
        }
        out.homogeneous = self.homogeneous && t.iter().all(|&x| x == T::zero());
        debug_assert_eq!(out.dim, n);
        out
    }

    /// Portable form: monomial coefficients keyed by 1-based indices.
    pub fn to_doc(&self) -> QuadricSystemDoc {
        let forms = self
            .forms
            .iter()
            .map(|f| {
                pairs(self.dim)
                    .filter_map(|(i, j)| {
                        let c = if i == j { f.get(i, i) } else { f.get(i, j) + f.get(i, j) };
                        (c != T::zero()).then(|| (format!("{},{}", i + 1, j + 1), c.as_f64()))
                    })
                    .collect()
            })
            .collect();
        let linear = self
            .linear
            .iter()
            .map(|g| g.iter().enumerate().filter(|(_, c)| **c != T::zero()).map(|(i, c)| ((i + 1).to_string(), c.as_f64())).collect())
            .collect();
        QuadricSystemDoc {
            dim: self.dim,
            homogeneous: self.homogeneous,
            forms,
            linear,
            constants: self.constants.iter().map(|c| c.as_f64()).collect(),
        }
    }
}

/// Serializable quadric system. `forms[k]["i,j"]` is the coefficient of
/// `x_i x_j` (`i <= j`, 1-based) in `f_k`; `linear[k]["i"]` that of `x_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadricSystemDoc {
    pub dim: usize,
    pub homogeneous: bool,
    pub forms: Vec<BTreeMap<String, f64>>,
    pub linear: Vec<BTreeMap<String, f64>>,
    pub constants: Vec<f64>,
}

/// Orthonormal basis of the linear relations `sum_{i<=j} l_ij z_ij = 0`
/// satisfied by every `z = packed(a_j a_j^T)`, as packed coefficient vectors.
pub fn linear_relations<T: Scalar>(a: &MixingMatrix<T>) -> Vec<Vec<T>> {
    let m = packed_len2(a.rows());
    let kr = a.khatri_rao_packed();
    if kr.ncols() == 0 {
        return (0..m).map(|p| (0..m).map(|q| if p == q { T::one() } else { T::zero() }).collect()).collect();
    }
    let padded = if kr.ncols() < m { kr.clone().resize_horizontally(m, T::zero()) } else { kr };
    let svd = padded.svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let top = svd.singular_values.max();
    let cut = top * T::lit(crate::identifiability::RANK_REL_TOL);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].partial_cmp(&svd.singular_values[x]).unwrap_or(std::cmp::Ordering::Equal));
    let rank = order.iter().filter(|&&k| svd.singular_values[k] > cut).count();
    order[rank..m].iter().map(|&k| u.column(k).iter().copied().collect()).collect()
}

/// Quadric of a packed relation: `F_ii = l_ii`, `F_ij = l_ij / 2`.
pub fn relation_form<T: Scalar>(dim: usize, relation: &[T]) -> SymMat<T> {
    let mut f = SymMat::zeros(dim);
    for (p, (i, j)) in pairs(dim).enumerate() {
        f.set(i, j, if i == j { relation[p] } else { relation[p] / T::lit(2.0) });
    }
    f
}

/// One homogeneous quadric per linear relation; every column of `a` is a
/// common zero.
pub fn quadric_system<T: Scalar>(a: &MixingMatrix<T>) -> QuadricSystem<T> {
    let forms = linear_relations(a).iter().map(|r| relation_form(a.rows(), r)).collect();
    QuadricSystem::homogeneous(a.rows(), forms)
}

/// A quadric system with its full solution set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedSystem<T: Scalar> {
    pub system: QuadricSystem<T>,
    pub solutions: Vec<Vec<Complex<T>>>,
    pub real_count: usize,
}

impl<T: Scalar> TrackedSystem<T> {
    /// Largest `|f_k|` over all solutions.
    pub fn max_residual(&self) -> T {
        self.solutions
            .iter()
            .flat_map(|s| self.system.evaluate_complex(s).expect("tracked dimension"))
            .fold(T::zero(), |m, v| m.max(cabs(v)))
    }

    /// Smallest Euclidean distance between two solutions.
    pub fn min_pairwise_distance(&self) -> T {
        let mut best = T::lit(f64::INFINITY);
        for (k, p) in self.solutions.iter().enumerate() {
            for q in &self.solutions[k + 1..] {
                let d = p.iter().zip(q).fold(T::zero(), |s, (a, b)| s + (*a - *b).norm_sqr()).sqrt();
                best = best.min(d);
            }
        }
        best
    }

    pub fn count_real(&self) -> usize {
        self.solutions.iter().filter(|s| is_real(s)).count()
    }
}

fn cabs<T: Scalar>(z: Complex<T>) -> T {
    z.norm_sqr().sqrt()
}

/// Principal square root.
fn csqrt<T: Scalar>(z: Complex<T>) -> Complex<T> {
    let r = cabs(z);
    let two = T::lit(2.0);
    let re = ((r + z.re) / two).max(T::zero()).sqrt();
    let im = ((r - z.re) / two).max(T::zero()).sqrt();
    Complex::new(re, if z.im < T::zero() { -im } else { im })
}

fn is_real<T: Scalar>(p: &[Complex<T>]) -> bool {
    p.iter().all(|z| z.im.abs() < T::lit(REAL_TOL))
}

/// Seed of the variable changes in [`build_real_count_system`].
pub const REAL_COUNT_SEED: u64 = 0x51ed_270b_a1f3_c3a9;

/// `I - 1` quadrics in `I - 1` variables with `2^(I-1)` distinct solutions,
/// exactly `ell` of them real.
///
/// Built by induction on the number of variables from `x^2 -+ 1`. Doubling a
/// real count appends `(x_1 - alpha)^2 - x_new^2`; the count `2 ell' - 2`
/// comes from appending `x_1^2 + x_new^2 - beta^2` with `beta` between the two
/// largest `|x_1|` over real solutions, after a random change of variables
/// that separates those values.
pub fn build_real_count_system<T: Scalar>(rows: usize, ell: usize) -> Result<TrackedSystem<T>> {
    build_real_count_system_seeded(rows, ell, REAL_COUNT_SEED)
}

pub fn build_real_count_system_seeded<T: Scalar>(rows: usize, ell: usize, seed: u64) -> Result<TrackedSystem<T>> {
    if rows < 2 || rows > 31 {
        return Err(Error::InvalidConfig(format!("need 2 <= I <= 31, got {rows}")));
    }
    let n = rows - 1;
    let max = 1usize << n;
    if ell % 2 == 1 || ell > max {
        return Err(Error::InvalidCount { dim: n, real: ell, max });
    }
    // real counts at each level, top-down
    let mut plan = vec![ell];
    for level in (1..n).rev() {
        let l = *plan.last().expect("non-empty");
        let prev = if l % 4 == 0 { l / 2 } else { (l + 2) / 2 };
        debug_assert!(prev <= 1 << level);
        plan.push(prev);
    }
    plan.reverse();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((rows as u64) << 32) ^ ell as u64);
    let c = |re: f64, im: f64| Complex::new(T::lit(re), T::lit(im));
    let (sign, sols) = if plan[0] == 2 { (-1.0, vec![vec![c(1.0, 0.0)], vec![c(-1.0, 0.0)]]) } else { (1.0, vec![vec![c(0.0, 1.0)], vec![c(0.0, -1.0)]]) };
    let mut sys = QuadricSystem {
        dim: 1,
        forms: vec![SymMat::identity(1)],
        linear: vec![vec![T::zero()]],
        constants: vec![T::lit(sign)],
        homogeneous: false,
    };
    let mut sols = sols;

    for level in 1..n {
        let target = plan[level];
        let current = plan[level - 1];
        if target == 2 * current {
            let alpha = sols.iter().fold(T::zero(), |m, s| m.max(cabs(s[0]))) + T::one();
            sys = extend(&sys, T::one(), T::lit(-1.0), -T::lit(2.0) * alpha, alpha * alpha);
            sols = sols
                .into_iter()
                .flat_map(|s| {
                    let d = s[0] - Complex::new(alpha, T::zero());
                    let mut p = s.clone();
                    p.push(d);
                    let mut q = s;
                    q.push(-d);
                    [p, q]
                })
                .collect();
        } else {
            debug_assert_eq!(target + 2, 2 * current);
            let (moved, moved_sols, beta) = separate(&sys, &sols, &mut rng)?;
            sys = extend(&moved, T::one(), T::one(), T::zero(), -beta * beta);
            let b2 = Complex::new(beta * beta, T::zero());
            sols = moved_sols
                .into_iter()
                .flat_map(|s| {
                    let r = csqrt(b2 - s[0] * s[0]);
                    let mut p = s.clone();
                    p.push(r);
                    let mut q = s;
                    q.push(-r);
                    [p, q]
                })
                .collect();
        }
    }
    let mut tracked = TrackedSystem { system: sys, solutions: sols, real_count: 0 };
    tracked.real_count = tracked.count_real();
    Ok(tracked)
}

/// Appends variable `x_new` and the quadric
/// `a x_1^2 + b x_new^2 + g x_1 + c`.
fn extend<T: Scalar>(sys: &QuadricSystem<T>, a: T, b: T, g: T, c: T) -> QuadricSystem<T> {
    let n = sys.dim;
    let grow = |f: &SymMat<T>| {
        let mut out = SymMat::zeros(n + 1);
        for (i, j) in pairs(n) {
            out.set(i, j, f.get(i, j));
        }
        out
    };
    let mut forms: Vec<SymMat<T>> = sys.forms.iter().map(grow).collect();
    let mut linear: Vec<Vec<T>> = sys.linear.iter().map(|g| g.iter().copied().chain([T::zero()]).collect()).collect();
    let mut f = SymMat::zeros(n + 1);
    f.set(0, 0, a);
    f.set(n, n, b);
    forms.push(f);
    let mut l = vec![T::zero(); n + 1];
    l[0] = g;
    linear.push(l);
    let mut constants = sys.constants.clone();
    constants.push(c);
    QuadricSystem { dim: n + 1, forms, linear, constants, homogeneous: false }
}

/// Random affine change of variables after which the real solutions have
/// well separated `|x_1|`; returns the new system, its solutions and `beta`.
fn separate<T: Scalar>(
    sys: &QuadricSystem<T>,
    sols: &[Vec<Complex<T>>],
    rng: &mut ChaCha8Rng,
) -> Result<(QuadricSystem<T>, Vec<Vec<Complex<T>>>, T)> {
    let n = sys.dim;
    for _ in 0..100 {
        let g = DMatrix::from_fn(n, n, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)));
        let q = g.qr().q();
        let t: Vec<T> = (0..n).map(|_| T::lit(0.5 * rng.sample::<f64, _>(StandardNormal))).collect();
        // y = Q^T (x - t)
        let moved: Vec<Vec<Complex<T>>> = sols
            .iter()
            .map(|s| {
                (0..n)
                    .map(|i| (0..n).fold(Complex::new(T::zero(), T::zero()), |acc, k| acc + (s[k] - Complex::new(t[k], T::zero())) * q[(k, i)]))
                    .collect()
            })
            .collect();
        let mut mags: Vec<T> = moved.iter().filter(|s| is_real(s)).map(|s| s[0].re.abs()).collect();
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        if mags.len() < 2 {
            return Err(Error::InvalidCount { dim: n + 1, real: 2 * mags.len(), max: 1 << (n + 1) });
        }
        let gap = mags[0] - mags[1];
        let scale = mags[0].max(T::one());
        if gap > T::lit(1e-2) * scale && mags[1] > T::lit(1e-3) {
            let beta = (mags[0] + mags[1]) / T::lit(2.0);
            let cleaned = moved
                .into_iter()
                .map(|s| if is_real(&s) { s.into_iter().map(|z| Complex::new(z.re, T::zero())).collect() } else { s })
                .collect();
            return Ok((sys.substitute(&q, &t), cleaned, beta));
        }
    }
    Err(Error::InvalidConfig("could not separate the real solutions".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn lex_to_packed(dim: usize, lex: &[f64]) -> Vec<f64> {
        let lex_pairs: Vec<(usize, usize)> = (0..dim).flat_map(|i| (i..dim).map(move |j| (i, j))).collect();
        let mut out = vec![0.0; lex.len()];
        for (k, &(i, j)) in lex_pairs.iter().enumerate() {
            out[crate::tensors::pair_index(i, j)] = lex[k];
        }
        out
    }

    fn rank(rows: &[Vec<f64>]) -> usize {
        if rows.is_empty() {
            return 0;
        }
        let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
        let sv = m.svd(false, false).singular_values;
        let top = sv.max();
        sv.iter().filter(|&&s| s > 1e-10 * top).count()
    }

    #[test]
    fn relations_of_four_by_six_match_table() {
        let a = fixtures::example_4x6::<f64>();
        let rel = linear_relations(&a);
        assert_eq!(rel.len(), 4);
        let table: Vec<Vec<f64>> = fixtures::EXAMPLE_4X6_RELATIONS.iter().map(|r| lex_to_packed(4, r)).collect();
        let mut stacked = rel.clone();
        stacked.extend(table.iter().cloned());
        assert_eq!(rank(&table), 4);
        assert_eq!(rank(&stacked), 4);
    }

    #[test]
    fn relations_of_identity() {
        let a = MixingMatrix::new(DMatrix::<f64>::identity(2, 2));
        let rel = linear_relations(&a);
        assert_eq!(rel.len(), 1);
        assert!(rel[0][0].abs() < 1e-12 && rel[0][2].abs() < 1e-12);
        assert!((rel[0][1].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_span_has_no_relations() {
        let a = MixingMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        assert!(linear_relations(&a).is_empty());
    }

    #[test]
    fn four_by_six_quadrics_vanish_on_columns() {
        let a = fixtures::example_4x6::<f64>();
        let sys = quadric_system(&a);
        for c in a.columns() {
            for v in sys.evaluate(&c).unwrap() {
                assert!(v.abs() < 1e-10);
            }
        }
        for v in sys.evaluate(&[1.0, 1.0, 1.0, 0.0]).unwrap() {
            assert!(v.abs() < 1e-10);
        }
        assert_eq!(sys.evaluate(&[0.0; 4]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn two_by_three_quadric_vanishes_at_witness() {
        let sys = quadric_system(&fixtures::example_2x3::<f64>());
        assert_eq!(sys.len(), 0);
        let (b, _) = fixtures::example_2x3_witness();
        assert!(sys.evaluate(&b).unwrap().is_empty());
    }

    #[test]
    fn evaluate_base_case() {
        let t = build_real_count_system::<f64>(2, 2).unwrap();
        assert_eq!(t.system.evaluate(&[2.0]).unwrap(), vec![3.0]);
        assert!(t.system.evaluate(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn base_cases() {
        let t = build_real_count_system::<f64>(2, 2).unwrap();
        assert_eq!(t.real_count, 2);
        let mut xs: Vec<f64> = t.solutions.iter().map(|s| s[0].re).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(xs, vec![-1.0, 1.0]);
        let t = build_real_count_system::<f64>(2, 0).unwrap();
        assert_eq!(t.real_count, 0);
        assert_eq!(t.system.constants, vec![1.0]);
    }

    #[test]
    fn three_variables_two_real() {
        let t = build_real_count_system::<f64>(3, 2).unwrap();
        assert_eq!(t.system.len(), 2);
        assert_eq!(t.solutions.len(), 4);
        assert_eq!(t.real_count, 2);
        assert!(t.max_residual() < 1e-10);
        assert!(t.min_pairwise_distance() > 1e-6);
    }

    #[test]
    fn invalid_counts() {
        assert!(matches!(build_real_count_system::<f64>(3, 3), Err(Error::InvalidCount { .. })));
        assert!(matches!(build_real_count_system::<f64>(3, 6), Err(Error::InvalidCount { .. })));
    }

    #[test]
    fn all_counts_up_to_six() {
        for rows in 2..=6 {
            for ell in (0..=1usize << (rows - 1)).step_by(2) {
                let t = build_real_count_system::<f64>(rows, ell).unwrap();
                assert_eq!(t.solutions.len(), 1 << (rows - 1));
                assert_eq!(t.real_count, ell, "I={rows} ell={ell}");
                assert!(t.max_residual() < 1e-8, "I={rows} ell={ell} residual {}", t.max_residual());
                assert!(t.min_pairwise_distance() > 1e-6);
            }
        }
    }

    #[test]
    fn doc_round_trip_keys() {
        let t = build_real_count_system::<f64>(3, 4).unwrap();
        let doc = t.system.to_doc();
        assert_eq!(doc.dim, 2);
        assert_eq!(doc.forms.len(), 2);
        assert!(doc.forms[1].contains_key("2,2"));
    }
}
