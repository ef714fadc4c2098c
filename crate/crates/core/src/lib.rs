//! Exact sampling of first-passage times `tau_L = inf{t : X_t = L}` for
//! unit-diffusion SDEs `dX = b(X) dt + dB`.
//!
//! ```
//! use exact_fpt::{sample, BoundCertificate, DrawStreams, DriftModel, SamplerConfig, Variant};
//!
//! let cfg = SamplerConfig::new(
//!     DriftModel::Sine { offset: 2.0 },
//!     0.0,
//!     1.0,
//!     BoundCertificate::upper(5.0).unwrap(),
//!     Variant::A1,
//! );
//! let draw = sample(&cfg, &mut DrawStreams::new(42, 0)).unwrap();
//! assert!(draw.value > 0.0);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod error;
pub mod harness;
pub mod model;
pub mod quad;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use model::{BoundCertificate, DriftModel, GammaField};
pub use rng::RandomStream;
pub use sampler::{
    optimal_split_count, sample, sample_a1, sample_a2, sample_a3, sample_rho, sample_shift,
    sample_split, DrawStreams, FptDraw, RunStats, SamplerConfig, Variant,
};
