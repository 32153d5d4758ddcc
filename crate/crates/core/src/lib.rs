//! Surrogate-model-based adaptive sampling for expensive black-box functions.
//!
//! The crate is organised around the generic adaptive sampling loop:
//!
//! * [`space`] and [`archive`] hold the shared domain types (bounds, objective
//!   sense, the evaluated archive and its budget);
//! * [`surrogate`] is the Gaussian-process model (Matérn 5/2, fixed
//!   hyperparameters);
//! * [`acq`] contains the acquisition functions: closed-form variance-based
//!   scores, Monte-Carlo batch scores and knowledge gradient, and the
//!   distance-based weighted score and Pareto (EEPA⁺) selectors;
//! * [`discretize`] generates the finite candidate sets (uniform, Sobol,
//!   dynamic coordinate perturbation) and the maximin Latin hypercube design;
//! * [`problems`] provides Rosenbrock, Rastrigin, Levy and a subprocess
//!   objective;
//! * [`harness`] drives replications and writes CSV reports.
//!
//! All points are kept in the unit hypercube internally and all acquisition
//! math runs on canonical (maximization) values.

pub mod acq;
pub mod api;
pub mod archive;
pub mod discretize;
pub mod error;
pub mod harness;
pub mod problems;
pub mod rng;
pub mod space;
pub mod stats;
pub mod surrogate;

pub use archive::{AppendReport, BudgetState, Dataset};
pub use error::{Error, Result};
pub use rng::RngStream;
pub use space::{canonicalize, decanonicalize, Bounds, ObjectiveSense};
