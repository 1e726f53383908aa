use nalgebra::DMatrix;
use oica::fixtures;
use oica::identifiability::{kernel_report, khatri_rao_rank};
use oica::{
    generate_mixing, greedy_match, population_cumulants, recover, rel_frob_error, sample_cumulants, sample_mixture,
    MixingMatrix, RecoveryConfig, SourceDist, SourceSpec,
};
use proptest::prelude::*;

fn spec(non_gaussian: usize, gaussian_variance: f64) -> SourceSpec {
    SourceSpec::synthetic_default(non_gaussian, gaussian_variance).unwrap()
}

// Brute-force sums over every index tuple, no packing.
#[test]
fn population_cumulants_match_direct_sums() {
    let a: MixingMatrix<f64> = generate_mixing(3, 5, 11);
    let s = SourceSpec::new(vec![
        SourceDist::Exponential { rate: 2.0 },
        SourceDist::StudentT { dof: 7.0 },
        SourceDist::Moments { variance: 0.5, fourth_cumulant: -0.2 },
        SourceDist::Exponential { rate: 1.0 },
        SourceDist::Gaussian { variance: 3.0 },
    ])
    .unwrap();
    let moments: Vec<(f64, f64)> = s.sources().iter().map(|d| d.moments().unwrap()).collect();
    let cp = population_cumulants(&a, &s).unwrap();
    let m = a.matrix();
    for i in 0..3 {
        for j in 0..3 {
            let want: f64 = (0..5).map(|c| moments[c].0 * m[(i, c)] * m[(j, c)]).sum();
            assert!((cp.k2.get(i, j) - want).abs() < 1e-12);
            for k in 0..3 {
                for l in 0..3 {
                    let want: f64 = (0..5).map(|c| moments[c].1 * m[(i, c)] * m[(j, c)] * m[(k, c)] * m[(l, c)]).sum();
                    assert!((cp.k4.get(i, j, k, l) - want).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn sample_cumulants_approach_population() {
    let a: MixingMatrix<f64> = generate_mixing(3, 4, 5);
    let s = spec(3, 1.0);
    let pop = population_cumulants(&a, &s).unwrap();
    let x = sample_mixture(&a, &s, 400_000, 9).unwrap();
    let est = sample_cumulants(&x).unwrap();
    let rel = |p: &[f64], q: &[f64]| {
        let d: f64 = p.iter().zip(q).map(|(u, v)| (u - v) * (u - v)).sum();
        let n: f64 = p.iter().map(|u| u * u).sum();
        (d / n).sqrt()
    };
    assert!(rel(pop.k2.packed(), est.k2.packed()) < 0.02);
    assert!(rel(pop.k4.packed(), est.k4.packed()) < 0.2);
}

#[test]
fn fixture_recovery_in_both_precisions() {
    let cfg = RecoveryConfig::default();
    let a64 = fixtures::example_4x6::<f64>();
    let r64 = recover(&population_cumulants(&a64, &spec(5, 1.0)).unwrap(), Some(6), &cfg).unwrap();
    let t64 = a64.canonical();
    let e64 = rel_frob_error(&t64, &greedy_match(&t64, &r64.a_hat).unwrap()).unwrap();
    assert!(e64 < 1e-6, "f64 error {e64}");

    let a32 = fixtures::example_4x6::<f32>();
    let r32 = recover(&population_cumulants(&a32, &spec(5, 1.0)).unwrap(), Some(6), &cfg).unwrap();
    let t32 = a32.canonical();
    let e32 = rel_frob_error(&t32, &greedy_match(&t32, &r32.a_hat).unwrap()).unwrap();
    assert!(e32 < 1e-2, "f32 error {e32}");
}

#[test]
fn empty_sample_is_rejected() {
    let x = DMatrix::<f64>::zeros(0, 3);
    assert!(sample_cumulants(&x).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn gaussian_variance_does_not_move_the_estimate(var in 0.25f64..4.0, seed in 0u64..1000) {
        let a: MixingMatrix<f64> = generate_mixing(4, 6, seed);
        // columns closer than the dedup cosine are merged by design
        prop_assume!(a.max_abs_cosine() < 0.95);
        let cfg = RecoveryConfig { seed, ..RecoveryConfig::default() };
        let truth = a.canonical();
        let res = recover(&population_cumulants(&a, &spec(5, var)).unwrap(), Some(6), &cfg).unwrap();
        let err = rel_frob_error(&truth, &greedy_match(&truth, &res.a_hat).unwrap()).unwrap();
        prop_assert!(err < 1e-5, "error {}", err);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn invariants_under_row_and_column_relabelling(
        rows in 2usize..5,
        extra in 0usize..6,
        seed in 0u64..10_000,
        shift in 0usize..16,
    ) {
        let cols = rows + extra;
        let a: MixingMatrix<f64> = generate_mixing(rows, cols, seed);
        let row_perm: Vec<usize> = (0..rows).map(|i| (i + shift) % rows).collect();
        let col_perm: Vec<usize> = (0..cols).map(|j| (j + shift) % cols).collect();
        let b = a.permute_rows(&row_perm);
        let c = MixingMatrix::from_columns(&col_perm.iter().map(|&j| a.column(j)).collect::<Vec<_>>()).unwrap();
        let r = khatri_rao_rank(&a);
        prop_assert_eq!(r, khatri_rao_rank(&b));
        prop_assert_eq!(r, khatri_rao_rank(&c));
        prop_assert_eq!(r, cols.min(rows * (rows + 1) / 2));
        let k = kernel_report(&a).unwrap().kernel_dim;
        prop_assert_eq!(k, kernel_report(&b).unwrap().kernel_dim);
        prop_assert_eq!(k, kernel_report(&c).unwrap().kernel_dim);
    }
}
