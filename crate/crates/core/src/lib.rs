//! Belief-network webs: product extensions, the intersection-overlap
//! alternative model, locally computable logarithmic-score guarantees and a
//! maximum-entropy fit by iterative proportional fitting.
//!
//! Numerical code is generic over [`Prob`] (`f32` or `f64`); the `*64`
//! aliases below fix it to `f64`, which the file formats and the experiment
//! harness use.
//!
//! ```
//! use beliefweb::{unpack, guaranteed_score_standard, product_extension, harness};
//!
//! let structure = harness::preset("fig1").unwrap();
//! let system = harness::random_consistent_system(&structure, 7);
//! let unpacking = unpack(system.structure()).unwrap();
//! let px = product_extension(&system, &unpacking).unwrap();
//! assert!((px.joint.sum() - 1.0).abs() < 1e-12);
//! let local = guaranteed_score_standard(&system, &unpacking).unwrap();
//! assert!(local.value < 0.0);
//! ```

pub mod error;
pub mod expansion;
pub mod format;
pub mod harness;
pub mod maxent;
pub mod model;
pub mod scalar;
pub mod scoring;
pub mod web;

pub use error::{Error, Result};
pub use expansion::{
    alternative_model, alternative_model_any, check_conditional_consistency, check_consistency,
    product_extension, ConditionalReport, ConsistencyStatus, ConsistencyVerdict, ExpansionResult,
    ModelKind, ProbabilitySystem,
};
pub use maxent::{maxent_fit, sample_k, verify_guarantee_chain, ChainReport, MaxentResult};
pub use model::{JointDistribution, JointSpace, ProbTable, VarId, Variable};
pub use scalar::Prob;
pub use scoring::{
    entropy, guaranteed_score_alt, guaranteed_score_standard, kl_divergence, log_score,
    relative_score, score_report, LocalScore, ScoreReport,
};
pub use web::{
    classify, find_terminals, intersection_overlaps, unpack, unpack_with_rule, OStarRule,
    Structure, StructureLabel, Unpacking, UnpackingStep,
};

pub type ProbTable64 = ProbTable<f64>;
pub type ProbTable32 = ProbTable<f32>;
pub type Joint64 = JointDistribution<f64>;
pub type Joint32 = JointDistribution<f32>;
pub type System64 = ProbabilitySystem<f64>;
pub type System32 = ProbabilitySystem<f32>;
pub type Expansion64 = ExpansionResult<f64>;
pub type Expansion32 = ExpansionResult<f32>;
