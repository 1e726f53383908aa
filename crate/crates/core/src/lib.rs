//! Overcomplete independent component analysis with at most one Gaussian
//! source.
//!
//! The crate recovers a mixing matrix `A` (model `x = A s`) from the second
//! and fourth cumulants of `x`, probes whether a given `A` is identifiable,
//! and builds the quadric systems attached to it. Numeric code is generic
//! over [`Scalar`] (`f32` or `f64`); the `*64` aliases below fix `f64`.

pub mod cumulants;
pub mod error;
pub mod experiments;
pub mod fixtures;
pub mod identifiability;
pub mod mixing;
pub mod optimize;
pub mod quadrics;
pub mod recovery;
pub mod scalar;
pub mod tensors;

pub use cumulants::{population_cumulants, sample_cumulants, CumulantPair, Provenance, SourceDist, SourceSpec};
pub use error::{Error, Result};
pub use experiments::{
    derive_seed, generate_mixing, greedy_match, rel_frob_error, run_sweep, sample_mixture, CumulantMode, SweepConfig,
    SweepRow,
};
pub use identifiability::{
    classify_generic, collinear_pairs, kernel_report, khatri_rao_rank, projected_veronese_count, rank_one_probe,
    witness_distributions, KernelReport, ProbeConfig, Verdict, WitnessModels,
};
pub use mixing::MixingMatrix;
pub use optimize::{best_of_restarts, powell_minimize, MinimizeConfig, MinimizeResult};
pub use quadrics::{
    build_real_count_system, linear_relations, quadric_system, QuadricSystem, QuadricSystemDoc, TrackedSystem,
};
pub use recovery::{decompose_k4, recover, recover_gaussian_column, Decomposition, Rank, RecoveryConfig, RecoveryResult};
pub use scalar::Scalar;
pub use tensors::{flatten, frobenius_distance, outer_power, FlatMat, OuterPower, SymMat, SymTen4};

pub type SymMat64 = SymMat<f64>;
pub type SymTen4F64 = SymTen4<f64>;
pub type SymMat32 = SymMat<f32>;
pub type SymTen4F32 = SymTen4<f32>;
pub type MixingMatrix64 = MixingMatrix<f64>;
pub type MixingMatrix32 = MixingMatrix<f32>;
pub type CumulantPair64 = CumulantPair<f64>;
pub type RecoveryResult64 = RecoveryResult<f64>;
pub type KernelReport64 = KernelReport<f64>;
pub type WitnessModels64 = WitnessModels<f64>;
pub type QuadricSystem64 = QuadricSystem<f64>;
pub type TrackedSystem64 = TrackedSystem<f64>;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
