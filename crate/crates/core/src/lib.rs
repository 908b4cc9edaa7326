//! Low-dimensional embeddings of point clouds from a diagonal-constrained
//! semi-definite program over a diffusion kernel.
//!
//! The pipeline is:
//!
//! 1. [`kernel`]: Gaussian base kernel, degrees and the diffusion kernel `K`.
//! 2. [`sdp`]: maximize `Tr(rho K)` subject to `diag(rho) = diag(K)`, `rho` p.s.d.,
//!    through a thin factor solved by the projected power method.
//! 3. [`certificate`]: dual certificate deciding global optimality.
//! 4. [`embed`]: embedding coordinates from the factor by SVD.
//! 5. [`oos`]: projected Nyström extension to new points.
//!
//! [`diffmaps`] provides the diffusion-maps baseline and [`toy`] the
//! discretized interval experiment.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificate;
pub mod dataio;
pub mod diffmaps;
pub mod embed;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod oos;
pub mod sdp;
pub mod toy;

pub use error::{Error, Result};
