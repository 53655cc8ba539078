//! Classical dynamics, action integrals and eigenvalue counting for
//! two- and three-dimensional magnetic Schrödinger and Schrödinger–Pauli
//! operators in the strong-field regime.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: problem instances, field tensors, pointwise hypotheses;
//! * [`dynamics`]: Hamiltonian flow, drift lines, magnetic lines, guiding
//!   centres and half-space magnetic billiards;
//! * [`action`]: turning points, the action `η(x′, r)`, bounce periods and
//!   non-degeneracy diagnostics;
//! * [`spectral`]: Landau ladders, Sturm fiber counts, Bohr–Sommerfeld
//!   counts, the second-term integral and exactly solvable counts;
//! * [`asymptotics`]: parameter sweeps and log-log slope fits of remainders;
//! * [`cli`]: JSON configs and artifact writing for the `magdrift` binary.

// Index loops mirror the tensor notation; negated comparisons treat NaN as failure.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod asymptotics;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod poly;
pub mod spectral;
pub mod sturm;

pub use error::{Error, Result};
pub use model::{ModelSpec, OperatorKind};
