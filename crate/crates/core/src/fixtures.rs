//! Matrices with known identifiability behaviour, used by tests, the
//! acceptance suite and the CLI.

use crate::mixing::MixingMatrix;
use crate::scalar::Scalar;

fn from_rows<T: Scalar>(rows: &[&[f64]]) -> MixingMatrix<T> {
    let cols = rows[0].len();
    let data: Vec<T> = rows.iter().flat_map(|r| r.iter().map(|&v| T::lit(v))).collect();
    MixingMatrix::from_row_slice(rows.len(), cols, &data)
}

/// Identifiable 4x6 matrix: its first five columns have a unique fourth-order
/// decomposition and no non-column `b` has `bb^T` in the span of the squares.
pub fn example_4x6<T: Scalar>() -> MixingMatrix<T> {
    from_rows(&[
        &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        &[0.0, 1.0, 0.0, 0.0, 1.0, 1.0],
        &[0.0, 0.0, 1.0, 0.0, 1.0, 1.0],
        &[0.0, 0.0, 0.0, 1.0, 0.0, 1.0],
    ])
}

/// Non-identifiable 2x3 matrix; `b = (1, 2)` satisfies
/// `bb^T = -a1a1^T + 2 a2a2^T + 2 a3a3^T`.
pub fn example_2x3<T: Scalar>() -> MixingMatrix<T> {
    from_rows(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]])
}

/// The witness for [`example_2x3`] and its coefficients.
pub fn example_2x3_witness() -> ([f64; 2], [f64; 3]) {
    ([1.0, 2.0], [-1.0, 2.0, 2.0])
}

/// Identifiable 4x8 matrix beyond the generic threshold.
pub fn example_4x8<T: Scalar>() -> MixingMatrix<T> {
    from_rows(&[
        &[0.0, 3.0, 1.0, -27417.0 / 160871.0, 1.0, 0.0, 0.0, 0.0],
        &[1.0, 9.0, 11.0, 282663.0 / 36181.0, 0.0, 1.0, 0.0, 0.0],
        &[2.0, 14.0, 13.0, 17.0, 0.0, 0.0, 1.0, 0.0],
        &[3.0, 1.0, -89735.0 / 6339.0, 19.0, 0.0, 0.0, 0.0, 1.0],
    ])
}

/// 5x9 matrix `(A_1 | I_5)` whose Khatri-Rao square has rank below 9.
pub fn example_5x9<T: Scalar>() -> MixingMatrix<T> {
    let a1: [[f64; 4]; 5] = [
        [0.0, 3.0, 1.0, -27417.0 / 160871.0],
        [1.0, 9.0, 11.0, 282663.0 / 36181.0],
        [2.0, 14.0, 13.0, 17.0],
        [3.0, 1.0, -89735.0 / 6339.0, 19.0],
        [0.0, 0.0, 0.0, 0.0],
    ];
    let rows: Vec<Vec<f64>> = (0..5)
        .map(|i| {
            let mut r = a1[i].to_vec();
            r.extend((0..5).map(|k| if k == i { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    from_rows(&refs)
}

/// Linear relations among the squared columns of [`example_4x6`], rows in
/// coordinates `z11 z12 z13 z14 z22 z23 z24 z33 z34 z44`.
pub const EXAMPLE_4X6_RELATIONS: [[f64; 10]; 4] = [
    [0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
];
