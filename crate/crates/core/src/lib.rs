//! Exact and Monte Carlo simulation of central-moment statistics of
//! multimode two-mode-squeezed light under linear optics.
//!
//! The crate tracks zero-mean Gaussian states through squeezers, passive
//! optics, loss and gain ([`gaussian`]), evaluates arbitrary joint central
//! moments of photon-number and Stokes observables by ordered Wick
//! contraction ([`moment`]), cross-checks everything against a truncated
//! Fock-space simulation ([`fock`]), plans Bell/GHZ/cluster constructions
//! with their loss budgets ([`planner`]), and emulates finite-shot intensity
//! measurement ([`sampler`]). Evaluation backends are exposed behind a
//! common registry ([`backend`]) and circuits round-trip through a line
//! oriented text format ([`dsl`]).

pub mod backend;
pub mod circuit;
pub mod dsl;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod moment;
pub mod observable;
pub mod planner;
pub mod sampler;
mod wick;

pub use circuit::{Circuit, Gate, ModeLayout, SpatialId};
pub use error::{Error, ParseError, Result};
pub use gaussian::{GaussianState, ModeId, PolMode, DEFAULT_TOL};
pub use observable::{MomentQuery, ObservableLabel, QuadraticObservable, StokesComponent};
pub use wick::thread_pool;
