//! Packed symmetric tensors of order two and four.
//!
//! Entries are stored once per sorted multi-index, in colexicographic order:
//! `(i, j)` with `i <= j` lives at `j (j + 1) / 2 + i`, and `(i, j, k, l)` with
//! `i <= j <= k <= l` at `i + C(j+1, 2) + C(k+2, 3) + C(l+3, 4)`. Inner products
//! weight every stored entry by the number of full-tensor positions it stands
//! for, so packed norms agree with full Frobenius norms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of packed entries of a symmetric `dim x dim` matrix.
#[inline]
pub const fn packed_len2(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Number of packed entries of a symmetric order-4 tensor, `C(dim + 3, 4)`.
#[inline]
pub const fn packed_len4(dim: usize) -> usize {
    dim * (dim + 1) * (dim + 2) * (dim + 3) / 24
}

#[inline]
pub const fn pair_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

#[inline]
fn quad_index_sorted(i: usize, j: usize, k: usize, l: usize) -> usize {
    i + (j + 1) * j / 2 + (k + 2) * (k + 1) * k / 6 + (l + 3) * (l + 2) * (l + 1) * l / 24
}

#[inline]
pub fn quad_index(i: usize, j: usize, k: usize, l: usize) -> usize {
    let mut s = [i, j, k, l];
    s.sort_unstable();
    quad_index_sorted(s[0], s[1], s[2], s[3])
}

/// Sorted index pairs `(i, j)`, `i <= j`, in packed order.
pub fn pairs(dim: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..dim).flat_map(|j| (0..=j).map(move |i| (i, j)))
}

/// Sorted index quadruples in packed order.
pub fn quads(dim: usize) -> impl Iterator<Item = [usize; 4]> {
    (0..dim).flat_map(|l| {
        (0..=l).flat_map(move |k| (0..=k).flat_map(move |j| (0..=j).map(move |i| [i, j, k, l])))
    })
}

/// Number of distinct orderings of a sorted quadruple.
pub fn multiplicity4(q: &[usize; 4]) -> usize {
    let mut m = 24;
    let mut run = 1;
    for w in 1..4 {
        if q[w] == q[w - 1] {
            run += 1;
        } else {
            m /= factorial(run);
            run = 1;
        }
    }
    m / factorial(run)
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Symmetric matrix in packed storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> SymMat<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![T::zero(); packed_len2(dim)] }
    }

    pub fn from_packed(dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != packed_len2(dim) {
            return Err(Error::DimensionMismatch { expected: packed_len2(dim), found: data.len() });
        }
        Ok(Self { dim, data })
    }

    /// Packs the upper triangle of a square matrix.
    pub fn from_full(m: &DMatrix<T>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        let dim = m.nrows();
        let data = pairs(dim).map(|(i, j)| m[(i, j)]).collect();
        Ok(Self { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        let mut s = Self::zeros(dim);
        for i in 0..dim {
            s.set(i, i, T::one());
        }
        s
    }

    /// `v v^T`.
    pub fn outer(v: &[T]) -> Self {
        let dim = v.len();
        let data = pairs(dim).map(|(i, j)| v[i] * v[j]).collect();
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn packed(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[pair_index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[pair_index(i, j)] = v;
    }

    pub fn to_full(&self) -> DMatrix<T> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    /// Isometric coordinates: off-diagonal entries scaled by `sqrt(2)`, so the
    /// Euclidean inner product of two such vectors is the Frobenius inner product.
    pub fn to_weighted(&self) -> DVector<T> {
        let r2 = T::lit(2.0).sqrt();
        DVector::from_iterator(
            self.data.len(),
            pairs(self.dim).zip(&self.data).map(|((i, j), &v)| if i == j { v } else { v * r2 }),
        )
    }

    pub fn from_weighted(dim: usize, w: &DVector<T>) -> Result<Self> {
        if w.len() != packed_len2(dim) {
            return Err(Error::DimensionMismatch { expected: packed_len2(dim), found: w.len() });
        }
        let r2 = T::lit(2.0).sqrt();
        let data = pairs(dim).zip(w.iter()).map(|((i, j), &v)| if i == j { v } else { v / r2 }).collect();
        Ok(Self { dim, data })
    }

    pub fn scale(&mut self, c: T) {
        self.data.iter_mut().for_each(|x| *x *= c);
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: T, other: &Self) -> Result<()> {
        self.check_dim(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        Ok(())
    }

    /// `self += c * v v^T` without materialising the outer product.
    pub fn add_outer(&mut self, c: T, v: &[T]) {
        debug_assert_eq!(v.len(), self.dim);
        let mut idx = 0;
        for j in 0..self.dim {
            let cv = c * v[j];
            for i in 0..=j {
                self.data[idx] += cv * v[i];
                idx += 1;
            }
        }
    }

    /// Frobenius inner product `sum_{i,j} M_ij N_ij`.
    pub fn inner(&self, other: &Self) -> Result<T> {
        self.check_dim(other)?;
        Ok(self.inner_unchecked(other))
    }

    fn inner_unchecked(&self, other: &Self) -> T {
        let two = T::lit(2.0);
        let mut acc = T::zero();
        let mut idx = 0;
        for j in 0..self.dim {
            for i in 0..=j {
                let p = self.data[idx] * other.data[idx];
                acc += if i == j { p } else { two * p };
                idx += 1;
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> T {
        self.inner_unchecked(self).max(T::zero()).sqrt()
    }

    /// `v^T M v`.
    pub fn quadratic_form(&self, v: &[T]) -> T {
        let two = T::lit(2.0);
        let mut acc = T::zero();
        for (idx, (i, j)) in pairs(self.dim).enumerate() {
            let p = self.data[idx] * v[i] * v[j];
            acc += if i == j { p } else { two * p };
        }
        acc
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        Ok(())
    }
}

/// `‖M - N‖_F`.
pub fn frobenius_distance<T: Scalar>(m: &SymMat<T>, n: &SymMat<T>) -> Result<T> {
    m.check_dim(n)?;
    let mut d = m.clone();
    d.add_scaled(-T::one(), n)?;
    Ok(d.frobenius_norm())
}

/// Symmetric order-4 tensor in packed storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTen4<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> SymTen4<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![T::zero(); packed_len4(dim)] }
    }

    pub fn from_packed(dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != packed_len4(dim) {
            return Err(Error::DimensionMismatch { expected: packed_len4(dim), found: data.len() });
        }
        Ok(Self { dim, data })
    }

    /// `v ⊗ v ⊗ v ⊗ v`.
    pub fn outer(v: &[T]) -> Self {
        let dim = v.len();
        let data = quads(dim).map(|[i, j, k, l]| v[i] * v[j] * v[k] * v[l]).collect();
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn packed(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> T {
        self.data[quad_index(i, j, k, l)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: T) {
        self.data[quad_index(i, j, k, l)] = v;
    }

    pub fn scale(&mut self, c: T) {
        self.data.iter_mut().for_each(|x| *x *= c);
    }

    pub fn add_scaled(&mut self, c: T, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        Ok(())
    }

    /// `self += c * v^{⊗4}`.
    pub fn add_outer(&mut self, c: T, v: &[T]) {
        debug_assert_eq!(v.len(), self.dim);
        for (slot, [i, j, k, l]) in self.data.iter_mut().zip(quads(v.len())) {
            *slot += c * v[i] * v[j] * v[k] * v[l];
        }
    }

    /// Full-tensor inner product, each packed entry weighted by its multiplicity.
    pub fn inner(&self, other: &Self) -> Result<T> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        Ok(quads(self.dim)
            .zip(self.data.iter().zip(&other.data))
            .fold(T::zero(), |acc, (q, (&a, &b))| acc + T::from_usize_lossy(multiplicity4(&q)) * a * b))
    }

    pub fn frobenius_norm(&self) -> T {
        self.inner(self).expect("same dim").max(T::zero()).sqrt()
    }

    /// `<T, v^{⊗4}> = sum T_ijkl v_i v_j v_k v_l` over all `dim^4` tuples.
    pub fn eval(&self, v: &[T]) -> T {
        quads(self.dim).zip(&self.data).fold(T::zero(), |acc, (q, &t)| {
            acc + T::from_usize_lossy(multiplicity4(&q)) * t * v[q[0]] * v[q[1]] * v[q[2]] * v[q[3]]
        })
    }

    /// Dense `dim^4` array in row-major order, for inspection and tests.
    pub fn to_full(&self) -> Vec<T> {
        let n = self.dim;
        let mut out = Vec::with_capacity(n * n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        out.push(self.get(i, j, k, l));
                    }
                }
            }
        }
        out
    }
}

/// Result of [`outer_power`].
#[derive(Debug, Clone, PartialEq)]
pub enum OuterPower<T> {
    Order2(SymMat<T>),
    Order4(SymTen4<T>),
}

/// `v^{⊗d}` for `d` in `{2, 4}`.
pub fn outer_power<T: Scalar>(v: &[T], d: usize) -> Result<OuterPower<T>> {
    if v.is_empty() {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    match d {
        2 => Ok(OuterPower::Order2(SymMat::outer(v))),
        4 => Ok(OuterPower::Order4(SymTen4::outer(v))),
        _ => Err(Error::UnsupportedOrder(d)),
    }
}

/// Order-(2,2) flattening of a [`SymTen4`] in isometric packed coordinates.
///
/// For all `x, y`: `w(xx^T)^T F w(yy^T) = T(x, x, y, y)` where `w` is
/// [`SymMat::to_weighted`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlatMat<T: Scalar> {
    dim: usize,
    mat: DMatrix<T>,
}

impl<T: Scalar> FlatMat<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.mat
    }
}

pub fn flatten<T: Scalar>(t: &SymTen4<T>) -> FlatMat<T> {
    let dim = t.dim();
    let m = packed_len2(dim);
    let r2 = T::lit(2.0).sqrt();
    let w = |i: usize, j: usize| if i == j { T::one() } else { r2 };
    let pr: Vec<(usize, usize)> = pairs(dim).collect();
    let mat = DMatrix::from_fn(m, m, |p, q| {
        let (i, j) = pr[p];
        let (k, l) = pr[q];
        w(i, j) * w(k, l) * t.get(i, j, k, l)
    });
    FlatMat { dim, mat }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_txxyy(t: &SymTen4<f64>, x: &[f64], y: &[f64]) -> f64 {
        let n = t.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        acc += t.get(i, j, k, l) * x[i] * x[j] * y[k] * y[l];
                    }
                }
            }
        }
        acc
    }

    fn random_tensor(dim: usize, rng: &mut ChaCha8Rng) -> SymTen4<f64> {
        let data = (0..packed_len4(dim)).map(|_| rng.random_range(-1.0..1.0)).collect();
        SymTen4::from_packed(dim, data).unwrap()
    }

    #[test]
    fn packed_indexing_is_dense_and_ordered() {
        for dim in 1..7 {
            for (n, (i, j)) in pairs(dim).enumerate() {
                assert_eq!(pair_index(i, j), n);
                assert_eq!(pair_index(j, i), n);
            }
            for (n, q) in quads(dim).enumerate() {
                assert_eq!(quad_index(q[3], q[1], q[0], q[2]), n);
            }
            assert_eq!(quads(dim).count(), packed_len4(dim));
        }
    }

    #[test]
    fn multiplicities_sum_to_full_size() {
        for dim in 1..6 {
            let total: usize = quads(dim).map(|q| multiplicity4(&q)).sum();
            assert_eq!(total, dim.pow(4));
        }
    }

    #[test]
    fn outer_power_order2_small() {
        let OuterPower::Order2(m) = outer_power(&[1.0, 2.0], 2).unwrap() else { panic!() };
        assert_eq!(m.to_full(), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]));
    }

    #[test]
    fn outer_power_order4_basis() {
        let OuterPower::Order4(t) = outer_power(&[1.0, 0.0, 0.0], 4).unwrap() else { panic!() };
        let nz: Vec<_> = t.packed().iter().enumerate().filter(|(_, &v)| v != 0.0).collect();
        assert_eq!(nz, vec![(0, &1.0)]);
    }

    #[test]
    fn outer_power_order4_ones() {
        let OuterPower::Order4(t) = outer_power(&[1.0, 1.0], 4).unwrap() else { panic!() };
        assert!(t.packed().iter().all(|&v| v == 1.0));
        assert!(t.to_full().iter().all(|&v| v == 1.0));
        let total: usize = quads(2).map(|q| multiplicity4(&q)).sum();
        assert_eq!(total, 16);
    }

    #[test]
    fn outer_power_rejects_other_orders() {
        assert_eq!(outer_power(&[1.0], 3), Err(Error::UnsupportedOrder(3)));
    }

    #[test]
    fn flatten_basis_tensors() {
        let t = SymTen4::outer(&[1.0, 0.0]);
        let f = flatten(&t);
        let mut expect = DMatrix::zeros(3, 3);
        expect[(0, 0)] = 1.0;
        assert_eq!(f.matrix(), &expect);

        let mut t = SymTen4::outer(&[1.0, 0.0]);
        t.add_outer(1.0, &[0.0, 1.0]);
        let f = flatten(&t);
        assert_eq!(f.matrix(), &DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 1.0])));
    }

    #[test]
    fn flatten_quadratic_form_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in 1..6 {
            for _ in 0..20 {
                let t = random_tensor(dim, &mut rng);
                let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let f = flatten(&t);
                let wx = SymMat::outer(&x).to_weighted();
                let wy = SymMat::outer(&y).to_weighted();
                let lhs = (wx.transpose() * f.matrix() * wy)[(0, 0)];
                let rhs = brute_txxyy(&t, &x, &y);
                assert_relative_eq!(lhs, rhs, epsilon = 1e-12, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn frobenius_distance_examples() {
        let m = SymMat::from_full(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        let z = SymMat::zeros(2);
        assert_eq!(frobenius_distance(&m, &m).unwrap(), 0.0);
        assert_eq!(frobenius_distance(&m, &z).unwrap(), 1.0);
        let off = SymMat::from_full(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_relative_eq!(frobenius_distance(&off, &z).unwrap(), 2f64.sqrt());
        assert!(frobenius_distance(&off, &SymMat::zeros(3)).is_err());
    }

    #[test]
    fn eval_matches_full_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_tensor(4, &mut rng);
        let v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        assert_relative_eq!(t.eval(&v), brute_txxyy(&t, &v, &v), max_relative = 1e-12);
        // <T, v^4> through the generic inner product as well
        assert_relative_eq!(t.inner(&SymTen4::outer(&v)).unwrap(), t.eval(&v), max_relative = 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let v = [1.0f32, -2.0, 0.5];
        let m = SymMat::outer(&v);
        assert!((m.frobenius_norm() - 5.25).abs() < 1e-5);
        let t = SymTen4::outer(&v);
        assert!((t.frobenius_norm() - 5.25f32 * 5.25).abs() < 1e-3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        fn vec_strategy(max_dim: usize) -> impl Strategy<Value = Vec<f64>> {
            (1..=max_dim).prop_flat_map(|d| prop::collection::vec(-3.0f64..3.0, d))
        }

        fn vec_pair(max_dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
            (1..=max_dim).prop_flat_map(|d| {
                (prop::collection::vec(-3.0f64..3.0, d), prop::collection::vec(-3.0f64..3.0, d))
            })
        }

        proptest! {
            #[test]
            fn unpack_repack_identity(v in vec_strategy(6), w in vec_strategy(6)) {
                let mut m = SymMat::outer(&v);
                if w.len() == v.len() { m.add_outer(-0.5, &w); }
                let back = SymMat::from_full(&m.to_full()).unwrap();
                prop_assert_eq!(&back, &m);
                let back_w = SymMat::from_weighted(m.dim(), &m.to_weighted()).unwrap();
                for (a, b) in back_w.packed().iter().zip(m.packed()) {
                    prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
                }
            }

            #[test]
            fn packed_inner_matches_full((v, w) in vec_pair(6)) {
                let a = SymMat::outer(&v);
                let mut b = SymMat::outer(&w);
                b.add_outer(2.0, &v);
                let full = a.to_full().component_mul(&b.to_full()).sum();
                let packed = a.inner(&b).unwrap();
                prop_assert!((full - packed).abs() <= 1e-10 * (1.0 + full.abs()));
                let wi = a.to_weighted().dot(&b.to_weighted());
                prop_assert!((wi - packed).abs() <= 1e-10 * (1.0 + full.abs()));
            }

            #[test]
            fn outer_power_homogeneity(v in vec_strategy(5), c in -3.0f64..3.0) {
                let cv: Vec<f64> = v.iter().map(|x| c * x).collect();
                let mut m = SymMat::outer(&v);
                m.scale(c * c);
                let mc = SymMat::outer(&cv);
                for (a, b) in m.packed().iter().zip(mc.packed()) {
                    prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
                }
                let mut t = SymTen4::outer(&v);
                t.scale(c.powi(4));
                let tc = SymTen4::outer(&cv);
                for (a, b) in t.packed().iter().zip(tc.packed()) {
                    prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
                }
            }

            #[test]
            fn permutation_equivariance(v in vec_strategy(6), seed in any::<u64>()) {
                let n = v.len();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut perm: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() { perm.swap(i, rng.random_range(0..=i)); }
                let pv: Vec<f64> = perm.iter().map(|&p| v[p]).collect();
                let t = SymTen4::outer(&v);
                let pt = SymTen4::outer(&pv);
                let m = SymMat::outer(&v);
                let pm = SymMat::outer(&pv);
                for i in 0..n { for j in 0..n {
                    prop_assert!((pm.get(i, j) - m.get(perm[i], perm[j])).abs() <= 1e-12 * (1.0 + m.get(perm[i], perm[j]).abs()));
                    for k in 0..n { for l in 0..n {
                        let want = t.get(perm[i], perm[j], perm[k], perm[l]);
                        prop_assert!((pt.get(i, j, k, l) - want).abs() <= 1e-12 * (1.0 + want.abs()));
                    }}
                }}
            }

            #[test]
            fn flatten_is_linear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let dim = rng.random_range(1..5);
                let t1 = random_tensor(dim, &mut rng);
                let t2 = random_tensor(dim, &mut rng);
                let mut combo = t1.clone();
                combo.scale(a);
                combo.add_scaled(b, &t2).unwrap();
                let lhs = flatten(&combo).into_matrix();
                let rhs = flatten(&t1).into_matrix() * a + flatten(&t2).into_matrix() * b;
                prop_assert!((lhs - rhs).amax() <= 1e-12);
            }
        }
    }
}
