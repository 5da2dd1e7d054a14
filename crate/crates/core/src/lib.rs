//! Solvers for the parabolic equation `u_t = lambda_j(D^2 u)` and its
//! stationary counterpart, built on a two-player tug-of-war style game.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod domain;
pub mod dpp;
pub mod eig;
pub mod envelope;
pub mod error;
pub mod fdiff;
pub mod game;
mod vecops;

pub use domain::{build_grid, eval_payoff, interpolate, Domain, Grid, NodeKind, PayoffData, ValueSlice};
pub use eig::{courant_fischer, eigenvalues_sym, generate_frames, lambda_j, FrameSet, SymMatrix};
pub use error::{Error, Result};
pub use dpp::{dpp_update, solve_elliptic, solve_parabolic, DppConfig, InitialGuess};
pub use fdiff::{discrete_hessian, solve_fd, FdConfig};
pub use envelope::{boundary_samples, concave_envelope, convex_envelope, directional_envelope_bound};
pub use game::{estimate_value, play, value_strategy_pair, GameMode, GameTrajectory, State, ValueEstimate};
pub use asymptotics::{detect_coincidence, estimate_principal_eigenvalue, fit_decay, halfspace_scenario, one_sided_coincidence, verify_radial_barrier, CoincidenceReport, DecayFit, Extreme, Side};
