//! Synthetic experiments: random mixing matrices, column matching, the
//! relative Frobenius error and parameter sweeps.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cumulants::{population_cumulants, sample_cumulants, SourceDist, SourceSpec};
use crate::error::{Error, Result};
use crate::mixing::{cosine, MixingMatrix};
use crate::recovery::{recover, RecoveryConfig};
use crate::scalar::Scalar;

/// Collinearity tolerance used when drawing random mixing matrices.
pub const GENERATE_COLLINEAR_TOL: f64 = 1e-6;

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at size `j`, independent across `(seed, j, trial)`.
pub fn derive_seed(seed: u64, j: usize, trial: usize) -> u64 {
    mix64(mix64(mix64(seed) ^ j as u64) ^ trial as u64)
}

/// Random `I x J` matrix with i.i.d. standard normal entries, in canonical
/// column form; redrawn while two columns are collinear.
pub fn generate_mixing<T: Scalar>(rows: usize, cols: usize, seed: u64) -> MixingMatrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let m = DMatrix::from_fn(rows, cols, |_, _| T::lit(rng.sample(StandardNormal)));
        let a = MixingMatrix::new(m).canonical();
        if a.no_collinear_pair(T::lit(GENERATE_COLLINEAR_TOL)) {
            return a;
        }
    }
}

/// `n` independent rows of `A s` with `s_j` drawn from `spec`.
pub fn sample_mixture<T: Scalar>(a: &MixingMatrix<T>, spec: &SourceSpec, n: usize, seed: u64) -> Result<DMatrix<T>> {
    if spec.len() != a.cols() {
        return Err(Error::DimensionMismatch { expected: a.cols(), found: spec.len() });
    }
    let spec = spec.clone().validated()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(n, a.rows());
    let mut s = vec![T::zero(); a.cols()];
    for r in 0..n {
        for (slot, d) in s.iter_mut().zip(spec.sources()) {
            *slot = T::lit(d.sample(&mut rng)?);
        }
        for i in 0..a.rows() {
            let mut acc = T::zero();
            for (j, &sj) in s.iter().enumerate() {
                acc += a.matrix()[(i, j)] * sj;
            }
            out[(r, i)] = acc;
        }
    }
    Ok(out)
}

fn check_shape<T: Scalar>(a: &MixingMatrix<T>, b: &MixingMatrix<T>) -> Result<()> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: b.rows() });
    }
    if a.cols() != b.cols() {
        return Err(Error::DimensionMismatch { expected: a.cols(), found: b.cols() });
    }
    Ok(())
}

/// Reorders and sign-flips the first `J - 1` columns of `a_hat` to follow
/// `a_true` greedily by `|cosine|`; the last (Gaussian) column stays last and
/// is only sign-aligned.
pub fn greedy_match<T: Scalar>(a_true: &MixingMatrix<T>, a_hat: &MixingMatrix<T>) -> Result<MixingMatrix<T>> {
    check_shape(a_true, a_hat)?;
    let cols = a_true.cols();
    if cols == 0 {
        return Ok(a_hat.clone());
    }
    let truth = a_true.columns();
    let cand = a_hat.columns();
    let mut used = vec![false; cols - 1];
    let mut out = a_hat.clone();
    let signed = |c: &[T], t: &[T]| -> Vec<T> {
        if cosine(c, t) < T::zero() {
            c.iter().map(|&x| -x).collect()
        } else {
            c.to_vec()
        }
    };
    for j in 0..cols - 1 {
        let mut best: Option<(usize, T)> = None;
        for k in (0..cols - 1).filter(|&k| !used[k]) {
            let c = cosine(&cand[k], &truth[j]).abs();
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((k, c));
            }
        }
        let (k, _) = best.expect("an unused candidate remains");
        used[k] = true;
        out.set_column(j, &signed(&cand[k], &truth[j]));
    }
    out.set_column(cols - 1, &signed(&cand[cols - 1], &truth[cols - 1]));
    Ok(out)
}

/// `sqrt(sum_ij (a_ij - a'_ij)^2 / J)`.
pub fn rel_frob_error<T: Scalar>(a_true: &MixingMatrix<T>, a_matched: &MixingMatrix<T>) -> Result<T> {
    check_shape(a_true, a_matched)?;
    let d = a_true.matrix() - a_matched.matrix();
    Ok((d.norm_squared() / T::from_usize_lossy(a_true.cols().max(1))).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CumulantMode {
    Population,
    Sample { n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    /// Observation dimension `I`.
    pub rows: usize,
    /// Source counts `J` to sweep.
    pub cols: Vec<usize>,
    pub trials: usize,
    pub mode: CumulantMode,
    /// Distribution of every non-Gaussian source.
    pub non_gaussian: SourceDist,
    pub gaussian_variance: f64,
    pub seed: u64,
    pub recovery: RecoveryConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            rows: 6,
            cols: vec![10],
            trials: 10,
            mode: CumulantMode::Population,
            non_gaussian: SourceDist::Moments { variance: 1.0, fourth_cumulant: 6.0 },
            gaussian_variance: 1.0,
            seed: 0,
            // Sweeps run past the uniqueness bound on purpose.
            recovery: RecoveryConfig { enforce_uniqueness_bound: false, ..RecoveryConfig::default() },
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 2 {
            return Err(Error::InvalidConfig("rows must be at least 2".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if let Some(j) = self.cols.iter().find(|&&j| j < 2) {
            return Err(Error::InvalidConfig(format!("source counts must be at least 2, got {j}")));
        }
        if matches!(self.mode, CumulantMode::Sample { n } if n < 2) {
            return Err(Error::InvalidConfig("sample size must be at least 2".into()));
        }
        self.spec(2)?;
        self.recovery.validate()
    }

    fn spec(&self, cols: usize) -> Result<SourceSpec> {
        if self.non_gaussian.is_gaussian() {
            return Err(Error::ModelViolation("non-Gaussian template is Gaussian".into()));
        }
        let mut v = vec![self.non_gaussian; cols - 1];
        v.push(SourceDist::Gaussian { variance: self.gaussian_variance });
        SourceSpec::new(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rows: usize,
    pub cols: usize,
    pub trial: usize,
    /// Sample size, `None` for population cumulants.
    pub n: Option<usize>,
    /// Matched relative Frobenius error; NaN when the trial failed.
    pub error: f64,
    pub objective: f64,
    pub seed: u64,
    /// Reason code of a failed trial.
    pub reason: Option<String>,
}

/// One trial: draw `A`, form cumulants, recover, match, measure.
pub fn run_trial(cfg: &SweepConfig, cols: usize, trial: usize) -> SweepRow {
    let seed = derive_seed(cfg.seed, cols, trial);
    let n = match cfg.mode {
        CumulantMode::Population => None,
        CumulantMode::Sample { n } => Some(n),
    };
    let mut row =
        SweepRow { rows: cfg.rows, cols, trial, n, error: f64::NAN, objective: f64::NAN, seed, reason: None };
    let outcome = (|| -> Result<(f64, f64)> {
        let a: MixingMatrix<f64> = generate_mixing(cfg.rows, cols, seed);
        let spec = cfg.spec(cols)?;
        let cp = match cfg.mode {
            CumulantMode::Population => population_cumulants(&a, &spec)?,
            CumulantMode::Sample { n } => sample_cumulants(&sample_mixture(&a, &spec, n, mix64(seed))?)?,
        };
        let rcfg = RecoveryConfig { seed, ..cfg.recovery };
        let res = recover(&cp, Some(cols), &rcfg)?;
        let matched = greedy_match(&a, &res.a_hat)?;
        Ok((rel_frob_error(&a, &matched)?, res.objective))
    })();
    match outcome {
        Ok((e, o)) => {
            row.error = e;
            row.objective = o;
        }
        Err(e) => row.reason = Some(e.code().to_string()),
    }
    row
}

/// All `(J, trial)` combinations, run in parallel, returned in `(J, trial)` order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = cfg.cols.iter().flat_map(|&j| (0..cfg.trials).map(move |t| (j, t))).collect();
    Ok(jobs.par_iter().map(|&(j, t)| run_trial(cfg, j, t)).collect())
}

/// Mean error over successful rows with the given `J`, and the failure count.
pub fn mean_error(rows: &[SweepRow], cols: usize) -> (f64, usize) {
    let sel: Vec<&SweepRow> = rows.iter().filter(|r| r.cols == cols).collect();
    let ok: Vec<f64> = sel.iter().map(|r| r.error).filter(|e| e.is_finite()).collect();
    let mean = if ok.is_empty() { f64::NAN } else { ok.iter().sum::<f64>() / ok.len() as f64 };
    (mean, sel.len() - ok.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> MixingMatrix<f64> {
        MixingMatrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn generate_is_deterministic_and_unit() {
        let a: MixingMatrix<f64> = generate_mixing(6, 10, 42);
        let b: MixingMatrix<f64> = generate_mixing(6, 10, 42);
        assert_eq!(a, b);
        for c in a.columns() {
            assert!((crate::mixing::norm(&c) - 1.0).abs() < 1e-12);
        }
        assert!(a.is_canonical(1e-12));
    }

    #[test]
    fn relative_error_examples() {
        let id = m(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(rel_frob_error(&id, &id).unwrap(), 0.0);
        let e = rel_frob_error(&id, &m(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!((e - 0.5f64.sqrt()).abs() < 1e-15);
        let e = rel_frob_error(&m(2, 1, &[1.0, 0.0]), &m(2, 1, &[0.0, 1.0])).unwrap();
        assert!((e - 2f64.sqrt()).abs() < 1e-15);
        assert!(rel_frob_error(&id, &m(2, 1, &[1.0, 0.0])).is_err());
    }

    #[test]
    fn match_undoes_swap_and_sign() {
        let a = m(3, 3, &[1.0, 0.0, 0.6, 0.0, 1.0, 0.0, 0.0, 0.0, 0.8]);
        let hat = m(3, 3, &[0.0, -1.0, 0.6, 1.0, 0.0, 0.0, 0.0, 0.0, 0.8]);
        assert_eq!(greedy_match(&a, &hat).unwrap(), a);
        assert_eq!(greedy_match(&a, &a).unwrap(), a);
    }

    #[test]
    fn match_keeps_last_column_in_place() {
        let a = m(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        // the last estimate is closest to the first truth column but must stay last
        let hat = m(2, 3, &[0.0, 0.9, -1.0, 1.0, 0.1, 0.0]);
        let out = greedy_match(&a, &hat).unwrap();
        assert_eq!(out.column(2), vec![1.0, 0.0]);
    }

    #[test]
    fn match_with_one_perturbed_column() {
        let t = 10f64.to_radians();
        let a = m(3, 4, &[1.0, 0.0, 0.0, 0.5, 0.0, 1.0, 0.0, 0.5, 0.0, 0.0, 1.0, 0.0]);
        let hat = m(3, 4, &[0.0, t.cos(), 0.0, 0.5, 1.0, t.sin(), 0.0, 0.5, 0.0, 0.0, 1.0, 0.0]);
        let out = greedy_match(&a, &hat).unwrap();
        assert_eq!(out.column(1), vec![0.0, 1.0, 0.0]);
        assert_eq!(out.column(2), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn mixture_columns_means() {
        let a = m(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let spec = SourceSpec::new(vec![SourceDist::Exponential { rate: 1.0 }; 2]).unwrap();
        let x = sample_mixture(&a, &spec, 1_000_000, 3).unwrap();
        for c in 0..2 {
            assert!((x.column(c).mean() - 1.0).abs() < 0.01);
        }
        assert_eq!(sample_mixture(&a, &spec, 0, 3).unwrap().nrows(), 0);
    }

    #[test]
    fn derived_seeds_differ() {
        let s: std::collections::HashSet<u64> =
            (0..50).flat_map(|t| (2..10).map(move |j| derive_seed(7, j, t))).collect();
        assert_eq!(s.len(), 400);
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = SweepConfig { rows: 4, cols: vec![5, 6], trials: 2, seed: 9, ..Default::default() };
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert_eq!((a[0].cols, a[0].trial, a[3].cols, a[3].trial), (5, 0, 6, 1));
    }

    #[test]
    fn sweep_config_validation() {
        assert!(SweepConfig { trials: 0, ..Default::default() }.validate().is_err());
        assert!(SweepConfig { cols: vec![1], ..Default::default() }.validate().is_err());
    }
}
