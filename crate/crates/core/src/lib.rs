//! Energy-optimal biological transport networks.
//!
//! The crate covers three related models:
//!
//! * discrete networks: weighted graphs whose edge conductivities minimize the
//!   sum of pumping power and metabolic cost under the Kirchhoff law
//!   ([`network`], [`kirchhoff`], [`discrete_optim`], [`murray`]);
//! * a continuum model on rectangular grids with a nonnegative diagonal
//!   conductivity tensor ([`continuum_grid`]);
//! * a phenomenological continuum model whose permeability is `rI + m⊗m`
//!   ([`continuum_vector`]).
//!
//! For each model the crate computes critical points of the constrained
//! energy and checks the corresponding generalized Murray law: the balance of
//! conductivity powers at network nodes, or of boundary fluxes over
//! subdomains.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// Parameter checks use `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Triangular solves and symmetric fills read better with explicit indices.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod continuum_grid;
pub mod continuum_vector;
pub mod discrete_optim;
mod error;
pub mod kirchhoff;
pub mod linalg;
pub(crate) mod math;
pub mod minimize;
pub mod murray;
pub mod network;
pub mod profile;

pub use error::{EdgeFault, Error};

pub type Result<T> = core::result::Result<T, Error>;
