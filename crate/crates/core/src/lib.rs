//! Numerical core for time-dependent mean field games of controls driven by
//! the fractional Laplacian on the flat torus 𝕋^d (d ∈ {1, 2}).
//!
//! The crate is `no_std` + `alloc`. Everything here is a pure function of its
//! inputs: grids and fields are immutable values, transforms are planned once
//! per grid and shared read-only. Enabling the `parallel` feature turns the
//! embarrassingly parallel maps (per-slice control solves, particle stepping)
//! into rayon maps; results are bit-identical to the sequential build.
//!
//! Layout:
//!
//! - [`grid`], [`spectral`]: discretization of the torus and the Fourier
//!   multiplier operators, `(-Δ)^s`, its semigroup, ∇, div, Bessel norms.
//! - [`measure`], [`transport`]: probability densities, joint state–control
//!   measures, control moments and Wasserstein distances.
//! - [`model`]: Lagrangian/Hamiltonian models, the Legendre transform, the
//!   θ-rescaled family and the quadratic coupled-control example.
//! - [`mu`], [`hjb`], [`fp`], [`equilibrium`]: the coupled solver.
//! - [`levy`]: particle simulation with 2s-stable jumps.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is how NaN gets rejected along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod equilibrium;
pub mod error;
pub mod fft;
pub mod fp;
pub mod grid;
pub mod hjb;
pub mod levy;
pub(crate) mod math;
pub mod measure;
pub mod model;
pub mod mu;
pub(crate) mod par;
pub mod spectral;
pub mod transport;

pub use error::{Error, Result};
pub use grid::{ScalarField, SpectralGrid, TimeGrid, VectorField};
pub use measure::{GridMeasure, JointControlMeasure, MeasurePath};
