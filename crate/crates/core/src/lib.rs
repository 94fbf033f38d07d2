//! Spatio-spectral exploration planning.
//!
//! A rover on an eight-connected grid collects in-situ spectra so that the
//! collected library reconstructs an orbital hyperspectral image well under
//! non-negative linear unmixing. This crate holds the unmixing math
//! ([`spectral`]), scene representation and synthetic data ([`scene`]), the
//! exploration MDP and its entropy reward ([`mdp`]), the planners
//! ([`planners`]: MCTS-based NMPSE, greedy spectral selection, fixed-step and
//! random baselines) and the experiment harness ([`eval`]).
//!
//! The numerical core is generic over the scalar type through [`Scalar`]
//! (implemented for `f32` and `f64`); the aliases at the crate root fix the
//! common `f64` instantiations.

pub mod config;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod mdp;
pub mod planners;
pub mod rng;
pub mod scalar;
pub mod scene;
pub mod spectral;

pub use error::{Error, Result};
pub use rng::RandomStream;
pub use scalar::Scalar;

pub type Spectrum = spectral::Spectrum<f64>;
pub type SpectralLibrary = spectral::SpectralLibrary<f64>;
pub type AbundanceVector = spectral::AbundanceVector<f64>;
pub type UnmixResult = spectral::UnmixResult<f64>;
pub type SolverOptions = spectral::SolverOptions<f64>;
pub type SpectralImage = scene::SpectralImage<f64>;
pub type InSituOracle = scene::InSituOracle<f64>;
pub type SceneryPair = scene::SceneryPair<f64>;
pub type ExplorationState = mdp::ExplorationState<f64>;
pub type RewardModel = mdp::RewardModel<f64>;
pub type PlannerOutcome = planners::PlannerOutcome<f64>;

pub type Spectrum32 = spectral::Spectrum<f32>;
pub type SpectralLibrary32 = spectral::SpectralLibrary<f32>;
pub type SceneryPair32 = scene::SceneryPair<f32>;

pub use mdp::{ExplorationAction, GridCell};
