//! Linear value-function approximation on B-spline father wavelets.
//!
//! The feature set is a collection of dilated and translated B-splines
//! (orders 0 to 2) combined into tensor products across state dimensions.
//! Because B-splines satisfy a two-scale refinement relation, any feature can
//! be replaced by finer copies of itself without changing the represented
//! value function, which makes the basis adaptively refinable:
//!
//! - **splitting** (AWR) swaps a feature for its children at the next scale,
//!   redistributing its weight through the refinement mask;
//! - **combining** (IBFDD) adds products of features over disjoint dimensions
//!   with zero initial weight;
//! - **MAWB** alternates the two, growing a minimal decoupled basis on demand.
//!
//! Which feature to refine is decided by incremental relevance statistics of
//! the TD error. The crate also ships a Sarsa(λ) agent, Mountain Car and
//! Acrobot environments, a Fourier baseline basis, and a seeded experiment
//! harness that writes plot-ready CSV learning curves.

pub mod adaptive;
pub mod agent;
pub mod basis;
pub mod envs;
pub mod error;
pub mod harness;
pub mod relevance;
pub mod wavelet;

pub use adaptive::{split_feature, AdaptiveConfig, AdaptiveController, AdaptiveMode, EditRecord};
pub use agent::{q_value, run_episode, select_action, sarsa_step, AgentConfig, EpisodeRecord, TDSample};
pub use basis::{BasisFunction, BasisSet, FunctionForm, FunctionId};
pub use envs::{Acrobot, EnvKind, Environment, MountainCar};
pub use error::{Error, Result};
pub use relevance::RelevanceStats;
pub use wavelet::{eval_bspline_raw, normalization_constant, refinement_mask, RefinementMask, WaveletAtom};
