//! Utility-optimized local differential privacy (ULDP) for discrete
//! distribution estimation.
//!
//! The alphabet is `0..w`; symbols `0..v` are sensitive and must be
//! protected, the rest may be released through invertible outputs. The crate
//! covers:
//!
//! - block designs and the mechanisms built from them ([`designs`], [`mechanism`]),
//! - the score-based unbiased estimator and Fisher information ([`estimation`]),
//! - the minimax error `M*(w, v, ε)` and its saddle point ([`put`]),
//! - Monte-Carlo validation and budget sweeps ([`sim`], [`sweep`]),
//! - encoding categorical data into the alphabet ([`dataset`]).
//!
//! Symbols are 0-based in the API and 1-based in every serialised form.

pub mod dataset;
pub mod designs;
pub mod error;
pub mod estimation;
pub mod mechanism;
pub mod put;
pub mod sim;
pub mod simplex;
pub mod sweep;

pub use designs::{complete_design, validate_design, BlockDesign, DesignParams, DesignReport};
pub use error::{Result, UldpError};
pub use estimation::{EstimatorTable, FisherMatrix, SufficientStats};
pub use mechanism::{
    bd_mechanism, extremal_from_gamma, ubd_mechanism, ubd_streaming, validate_uldp, GammaWeights,
    Mechanism, MechanismKind, OutputSymbol, UldpReport,
};
pub use put::{ldp_optimum, rbd, Problem, SaddleSolution, SolveMethod};
pub use sim::{run_trials, SimConfig, SimResult};
pub use simplex::{p_alpha, DirectionBasis, Distribution, Mixture, Partition, Subspace};
pub use sweep::{sweep, SweepRow};
